//! Calibrations of generalized annuli.
//!
//! A generalized annulus `{R0 < |x| < R1}` is calibrable for a signature `χ`
//! when the calibration ODE admits a solution `z` with `z = ∓1`, `z' = 0` on
//! the finite boundary spheres and `|z| ≤ 1` throughout.  This module solves
//! the boundary-value problems for all four domain kinds, classifies
//! calibrability, computes the planar critical ratio `Q*`, and cross-checks
//! every facet speed `λ` through the Saint-Venant identity.

use crate::error::{Error, Result};
use crate::radial::{Dimension, RadialProfile};
use std::sync::OnceLock;

/// Largest dimension accepted by the annulus solver.  The homogeneous
/// (`Q`-normalized) assembly keeps the linear system well scaled for
/// `n <= MAX_ANNULUS_DIMENSION`; beyond that the `Q^(2n)` entries overflow
/// the dynamic range for thick annuli.
pub const MAX_ANNULUS_DIMENSION: u32 = 10;

/// Boundary orientation: the sign of `u_outside - u_facet` across a boundary
/// component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn of(x: f64) -> Sign {
        if x >= 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Signature of a generalized annulus: one sign per finite boundary sphere.
///
/// Balls carry only an outer sign, complements of balls only an inner one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureSpec {
    pub chi_inner: Option<Sign>,
    pub chi_outer: Option<Sign>,
}

impl SignatureSpec {
    pub fn ball(chi_outer: Sign) -> Self {
        SignatureSpec {
            chi_inner: None,
            chi_outer: Some(chi_outer),
        }
    }

    pub fn complement(chi_inner: Sign) -> Self {
        SignatureSpec {
            chi_inner: Some(chi_inner),
            chi_outer: None,
        }
    }

    pub fn annulus(chi_inner: Sign, chi_outer: Sign) -> Self {
        SignatureSpec {
            chi_inner: Some(chi_inner),
            chi_outer: Some(chi_outer),
        }
    }

    /// The orientation used throughout for "constant signature": `χ ≡ -1`.
    pub fn constant() -> Self {
        Self::annulus(Sign::Minus, Sign::Minus)
    }

    /// The orientation used throughout for "non-constant signature":
    /// `χ = +1` inside, `χ = -1` outside.
    pub fn non_constant() -> Self {
        Self::annulus(Sign::Plus, Sign::Minus)
    }

    pub fn is_constant(&self) -> Option<bool> {
        match (self.chi_inner, self.chi_outer) {
            (Some(i), Some(o)) => Some(i == o),
            _ => None,
        }
    }
}

/// The domain `{R0 < |x| < R1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedAnnulus {
    pub n: Dimension,
    pub r0: f64,
    /// May be `f64::INFINITY`.
    pub r1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnulusKind {
    Ball,
    Annulus,
    ComplementOfBall,
    WholeSpace,
}

impl GeneralizedAnnulus {
    pub fn new(n: Dimension, r0: f64, r1: f64) -> Result<Self> {
        if !(r0 >= 0.0) || !(r0 < r1) {
            return Err(Error::Domain(format!(
                "generalized annulus requires 0 <= R0 < R1, got [{r0}, {r1}]"
            )));
        }
        Ok(GeneralizedAnnulus { n, r0, r1 })
    }

    pub fn ball(n: Dimension, r: f64) -> Result<Self> {
        Self::new(n, 0.0, r)
    }

    pub fn kind(&self) -> AnnulusKind {
        match (self.r0 == 0.0, self.r1.is_infinite()) {
            (true, false) => AnnulusKind::Ball,
            (false, false) => AnnulusKind::Annulus,
            (false, true) => AnnulusKind::ComplementOfBall,
            (true, true) => AnnulusKind::WholeSpace,
        }
    }
}

/// Admissibility report attached to every solved calibration.
#[derive(Debug, Clone, Copy)]
pub struct Admissibility {
    pub sup_abs_z: f64,
    pub argmax: f64,
    /// Residuals of the four boundary conditions `(z(R0)-v0, z'(R0), z(R1)-v1, z'(R1))`;
    /// unused slots (ball, complement) are zero.
    pub bc_residuals: [f64; 4],
}

/// A Cahn-Hoffman calibration: the radial profile, the facet speed `λ`,
/// and the admissibility evidence.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub profile: RadialProfile,
    pub lambda: f64,
    pub admissibility: Admissibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictReason {
    Admissible,
    ViolatesUnitBound,
    NoBoundedSolution,
}

/// Outcome of a calibrability question, with a witness profile when one
/// exists (for inadmissible annuli the witness is the unique BVP solution
/// that violates the unit bound).
#[derive(Debug, Clone)]
pub struct CalibrabilityVerdict {
    pub calibrable: bool,
    pub reason: VerdictReason,
    pub witness: Option<Calibration>,
    pub violation_radius: Option<f64>,
}

impl CalibrabilityVerdict {
    fn admissible(c: Calibration) -> Self {
        CalibrabilityVerdict {
            calibrable: true,
            reason: VerdictReason::Admissible,
            witness: Some(c),
            violation_radius: None,
        }
    }
}

// ---------------------------------------------------------------------------
// closed-form solvers
// ---------------------------------------------------------------------------

/// Ball calibration profile without the admissibility scan.
pub(crate) fn ball_profile(n: Dimension, r: f64, chi_outer: Sign) -> Result<(RadialProfile, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    let s = -chi_outer.as_f64();
    let r3 = r * r * r;
    let profile = RadialProfile::new(n, [s * 0.5 / r3, 0.0, s * -1.5 / r, 0.0], 0.0, r)?;
    let lambda = profile.lambda();
    Ok((profile, lambda))
}

/// Complement calibration profile without the admissibility scan.
/// Errors in the planar case, where no bounded solution exists.
pub(crate) fn complement_profile(
    n: Dimension,
    r: f64,
    chi_inner: Sign,
) -> Result<(RadialProfile, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    if n.is_planar() {
        return Err(Error::Domain(
            "planar complements of balls admit no calibration".into(),
        ));
    }
    let s = chi_inner.as_f64();
    let nf = n.as_f64();
    let c1 = s * -(nf - 1.0) / 2.0 * r.powf(nf - 3.0);
    let c3 = s * (nf - 3.0) / 2.0 * r.powf(nf - 1.0);
    let profile = RadialProfile::new(n, [0.0, c1, 0.0, c3], r, f64::INFINITY)?;
    Ok((profile, 0.0))
}

/// Calibration of the ball `B_R` with the reference orientation `χ = -1`:
/// `z(r) = 1/2 (r/R)^3 - 3/2 (r/R)`, `λ = -n(n+2)/R^3`.
pub fn solve_ball(n: Dimension, r: f64) -> Result<Calibration> {
    solve_ball_oriented(n, r, Sign::Minus)
}

/// Ball calibration for either boundary orientation.
pub fn solve_ball_oriented(n: Dimension, r: f64, chi_outer: Sign) -> Result<Calibration> {
    let (profile, lambda) = ball_profile(n, r, chi_outer)?;
    let boundary = profile.eval(r)?;
    let sup = profile.sup_abs_z();
    Ok(Calibration {
        profile,
        lambda,
        admissibility: Admissibility {
            sup_abs_z: sup.sup,
            argmax: sup.argmax,
            bc_residuals: [boundary.z - chi_outer.as_f64(), boundary.z_prime, 0.0, 0.0],
        },
    })
}

/// Calibrability of the complement of `B_R` with the reference orientation
/// `χ = +1` on the boundary (so `z(R) = -1`).  Calibrable exactly when
/// `n ≠ 2`.
pub fn solve_complement(n: Dimension, r: f64) -> Result<CalibrabilityVerdict> {
    solve_complement_oriented(n, r, Sign::Plus)
}

pub fn solve_complement_oriented(
    n: Dimension,
    r: f64,
    chi_inner: Sign,
) -> Result<CalibrabilityVerdict> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    if n.is_planar() {
        // the bounded solution space {r^(1-n)} = {1/r} cannot meet
        // z(R) = -1, z'(R) = 0 simultaneously
        return Ok(CalibrabilityVerdict {
            calibrable: false,
            reason: VerdictReason::NoBoundedSolution,
            witness: None,
            violation_radius: None,
        });
    }
    let (profile, lambda) = complement_profile(n, r, chi_inner)?;
    let boundary = profile.eval(r)?;
    let sup = profile.sup_abs_z();
    Ok(CalibrabilityVerdict::admissible(Calibration {
        lambda,
        admissibility: Admissibility {
            sup_abs_z: sup.sup,
            argmax: sup.argmax,
            bc_residuals: [boundary.z + chi_inner.as_f64(), boundary.z_prime, 0.0, 0.0],
        },
        profile,
    }))
}

/// Solve the annulus boundary-value problem for the given signature and
/// decide admissibility.
///
/// Boundary conditions: `z(R0) = -χ_inner`, `z(R1) = χ_outer`, `z' = 0` at
/// both radii.  The affine system is assembled in the rescaled variable
/// `ρ = r/R1` and solved by partial-pivot elimination.
pub fn solve_annulus(
    n: Dimension,
    r0: f64,
    r1: f64,
    sig: SignatureSpec,
) -> Result<CalibrabilityVerdict> {
    let (chi_in, chi_out) = match (sig.chi_inner, sig.chi_outer) {
        (Some(i), Some(o)) => (i, o),
        _ => {
            return Err(Error::Domain(
                "annulus signature requires both boundary signs".into(),
            ))
        }
    };
    let (profile, lambda) = annulus_profile(n, r0, r1, chi_in, chi_out)?;
    let b0 = profile.eval(r0)?;
    let b1 = profile.eval(r1)?;
    let sup = profile.sup_abs_z();
    let admissibility = Admissibility {
        sup_abs_z: sup.sup,
        argmax: sup.argmax,
        bc_residuals: [
            b0.z - (-chi_in.as_f64()),
            b0.z_prime,
            b1.z - chi_out.as_f64(),
            b1.z_prime,
        ],
    };
    let calibration = Calibration {
        profile,
        lambda,
        admissibility,
    };

    let calibrable = if n.is_planar() {
        match sig.is_constant() {
            Some(true) => {
                // admissible iff the profile has no inflection at the inner
                // boundary pointing the wrong way; equivalently m(Q) <= 0,
                // i.e. Q <= Q*
                m_function(r1 / r0) <= 0.0
            }
            Some(false) => false,
            None => unreachable!(),
        }
    } else {
        true
    };

    if calibrable {
        Ok(CalibrabilityVerdict::admissible(calibration))
    } else {
        Ok(CalibrabilityVerdict {
            calibrable: false,
            reason: VerdictReason::ViolatesUnitBound,
            violation_radius: Some(calibration.admissibility.argmax),
            witness: Some(calibration),
        })
    }
}

/// BVP solve without the admissibility scan; used by the facet integrators
/// where admissibility is guaranteed structurally.
pub(crate) fn annulus_profile(
    n: Dimension,
    r0: f64,
    r1: f64,
    chi_in: Sign,
    chi_out: Sign,
) -> Result<(RadialProfile, f64)> {
    if !(r0 > 0.0 && r0 < r1 && r1.is_finite()) {
        return Err(Error::Domain(format!(
            "annulus requires 0 < R0 < R1 < inf, got [{r0}, {r1}]"
        )));
    }
    if n.get() > MAX_ANNULUS_DIMENSION {
        return Err(Error::DimensionRange {
            n: n.get(),
            min: 1,
            max: MAX_ANNULUS_DIMENSION,
            context: "annulus boundary-value solve",
        });
    }
    let v0 = -chi_in.as_f64();
    let v1 = chi_out.as_f64();
    let rho0 = r0 / r1;
    let coeffs_hat = solve_4x4(basis_matrix(n, rho0, 1.0), [v0, 0.0, v1, 0.0])?;
    let coeffs = unscale_coefficients(n, coeffs_hat, r1);
    let profile = RadialProfile::new(n, coeffs, r0, r1)?;
    let lambda = profile.lambda();
    Ok((profile, lambda))
}

/// Rows: `z(ra) ; z'(ra) ; z(rb) ; z'(rb)` over the four basis functions.
fn basis_matrix(n: Dimension, ra: f64, rb: f64) -> [[f64; 4]; 4] {
    let nf = n.as_f64();
    let row = |r: f64| -> ([f64; 4], [f64; 4]) {
        if n.is_planar() {
            let l = r.ln();
            (
                [r * r * r, r * l, r, 1.0 / r],
                [3.0 * r * r, l + 1.0, 1.0, -1.0 / (r * r)],
            )
        } else {
            (
                [r.powi(3), r.powf(3.0 - nf), r, r.powf(1.0 - nf)],
                [
                    3.0 * r * r,
                    (3.0 - nf) * r.powf(2.0 - nf),
                    1.0,
                    (1.0 - nf) * r.powf(-nf),
                ],
            )
        }
    };
    let (za, dza) = row(ra);
    let (zb, dzb) = row(rb);
    [za, dza, zb, dzb]
}

/// Undo the `ρ = r/R1` rescaling.  For the power basis the exponents give
/// pure powers of `R1`; the log basis mixes the `r log r` coefficient into
/// the linear term.
fn unscale_coefficients(n: Dimension, c_hat: [f64; 4], r1: f64) -> [f64; 4] {
    let nf = n.as_f64();
    if n.is_planar() {
        [
            c_hat[0] / (r1 * r1 * r1),
            c_hat[1] / r1,
            (c_hat[2] - c_hat[1] * r1.ln()) / r1,
            c_hat[3] * r1,
        ]
    } else {
        [
            c_hat[0] / (r1 * r1 * r1),
            c_hat[1] * r1.powf(nf - 3.0),
            c_hat[2] / r1,
            c_hat[3] * r1.powf(nf - 1.0),
        ]
    }
}

/// Partial-pivot Gaussian elimination on a 4x4 system.
fn solve_4x4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let mut pivot = col;
        for row in col + 1..4 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::SingularSystem(
                "boundary-condition matrix is numerically singular".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for col in (0..4).rev() {
        let mut s = b[col];
        for k in col + 1..4 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// the planar critical ratio
// ---------------------------------------------------------------------------

/// `m(Q) = log Q - (Q²-1)(2Q-1) / (Q (Q²-2Q+3))` for `Q >= 1`.
///
/// A planar annulus with constant signature is calibrable iff `m(Q) <= 0`,
/// i.e. iff `Q <= Q*` where `Q*` is the unique zero of `m` on `(1, ∞)`.
pub fn m_function(q: f64) -> f64 {
    q.ln() - (q * q - 1.0) * (2.0 * q - 1.0) / (q * (q * q - 2.0 * q + 3.0))
}

/// Derivative `m'(Q) = (Q-3)(Q-1)(Q+1)³ / (Q² (Q²-2Q+3)²)`.
pub fn m_function_derivative(q: f64) -> f64 {
    (q - 3.0) * (q - 1.0) * (q + 1.0).powi(3) / (q * q * (q * q - 2.0 * q + 3.0).powi(2))
}

/// The critical outer/inner radius ratio for planar annuli, computed by
/// bisection of `m` on `[3, 20]` to absolute tolerance 1e-10 and cached.
pub fn compute_qstar() -> f64 {
    static QSTAR: OnceLock<f64> = OnceLock::new();
    *QSTAR.get_or_init(|| {
        let (mut lo, mut hi) = (3.0f64, 20.0f64);
        debug_assert!(m_function(lo) < 0.0 && m_function(hi) > 0.0);
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if m_function(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

// ---------------------------------------------------------------------------
// classification
// ---------------------------------------------------------------------------

/// Dispatch a calibrability question to the matching solver.
pub fn classify(domain: &GeneralizedAnnulus, sig: SignatureSpec) -> Result<CalibrabilityVerdict> {
    match domain.kind() {
        AnnulusKind::Ball => {
            let chi = sig
                .chi_outer
                .ok_or_else(|| Error::Domain("ball signature requires an outer sign".into()))?;
            Ok(CalibrabilityVerdict::admissible(solve_ball_oriented(
                domain.n, domain.r1, chi,
            )?))
        }
        AnnulusKind::ComplementOfBall => {
            let chi = sig.chi_inner.ok_or_else(|| {
                Error::Domain("complement signature requires an inner sign".into())
            })?;
            solve_complement_oriented(domain.n, domain.r0, chi)
        }
        AnnulusKind::Annulus => solve_annulus(domain.n, domain.r0, domain.r1, sig),
        AnnulusKind::WholeSpace => Err(Error::UnsupportedDomain(
            "the whole space has no boundary data to calibrate against".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Saint-Venant identity
// ---------------------------------------------------------------------------

/// Facet speed computed through the Saint-Venant problem instead of the
/// boundary-value solve:
///
/// `λ ∫_U w_sv = ∫_∂U χ κ ν·∇w_sv + ∫_∂U χ`
///
/// where `-Δ w_sv = 1` in `U`, `w_sv = 0` on `∂U`, and `κ` is the sum of the
/// principal curvatures.  All integrals are evaluated in closed form over
/// spheres.  Only bounded domains (balls and annuli) are accepted.
pub fn saint_venant_lambda(domain: &GeneralizedAnnulus, sig: SignatureSpec) -> Result<f64> {
    let n = domain.n;
    let nf = n.as_f64();
    let (r0, r1) = (domain.r0, domain.r1);
    if r1.is_infinite() {
        return Err(Error::Domain(
            "Saint-Venant identity requires a bounded domain".into(),
        ));
    }
    let chi_out = sig
        .chi_outer
        .ok_or_else(|| Error::Domain("bounded domain requires an outer sign".into()))?
        .as_f64();

    // w_sv = -r²/(2n) + A + B g(r) with g = r^(2-n) (n ≠ 2) or log r (n = 2);
    // ball: B = 0.
    let (a_coef, b_coef) = if r0 == 0.0 {
        (r1 * r1 / (2.0 * nf), 0.0)
    } else {
        let g = |r: f64| {
            if n.is_planar() {
                r.ln()
            } else {
                r.powf(2.0 - nf)
            }
        };
        // solve w(r0) = w(r1) = 0
        let det = g(r1) - g(r0);
        if det == 0.0 {
            return Err(Error::SingularSystem("Saint-Venant boundary system".into()));
        }
        let b = (r1 * r1 - r0 * r0) / (2.0 * nf) / det;
        let a = r0 * r0 / (2.0 * nf) - b * g(r0);
        (a, b)
    };
    let w_prime = |r: f64| -> f64 {
        let gp = if n.is_planar() {
            1.0 / r
        } else {
            (2.0 - nf) * r.powf(1.0 - nf)
        };
        -r / nf + b_coef * gp
    };
    // ∫_U w_sv, with the n ω_n factor dropped (it cancels against the
    // boundary measures): ∫ w(r) r^(n-1) dr over [r0, r1]
    let antider = |r: f64| -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let quad = -r.powf(nf + 2.0) / (2.0 * nf * (nf + 2.0));
        let aff = a_coef * r.powf(nf) / nf;
        let extra = if n.is_planar() {
            b_coef * (r * r * r.ln() / 2.0 - r * r / 4.0)
        } else {
            b_coef * r * r / 2.0
        };
        quad + aff + extra
    };
    let integral = antider(r1) - antider(r0);

    // boundary sum with the common n omega_n factor cancelled against the
    // volume integral: sphere measures reduce to r^(n-1)
    let mut boundary = 0.0;
    // outer sphere: exterior normal +e_r, kappa = (n-1)/r1, nu·grad w = w'(r1)
    boundary += r1.powf(nf - 1.0) * (chi_out * (nf - 1.0) / r1 * w_prime(r1) + chi_out);
    if r0 > 0.0 {
        let chi_in = sig
            .chi_inner
            .ok_or_else(|| Error::Domain("annulus requires an inner sign".into()))?
            .as_f64();
        // inner sphere: exterior normal -e_r, kappa = -(n-1)/r0,
        // nu·grad w = -w'(r0)
        boundary += r0.powf(nf - 1.0) * (chi_in * (-(nf - 1.0) / r0) * (-w_prime(r0)) + chi_in);
    }
    Ok(boundary / integral)
}
