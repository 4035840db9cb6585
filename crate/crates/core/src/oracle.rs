//! Independent verification machinery.
//!
//! Everything here re-derives results through a second code path: the
//! boundary-value solver rebuilds the solution basis by repeated symbolic
//! differentiation of `a r^p log^q r` terms (it does not import the basis
//! tables of [`crate::radial`]), the finite-difference residual evaluates
//! the calibration ODE by nested centered differences on sampled values,
//! and the RK4 / quadrature helpers provide generic references for the
//! closed-form dynamics.

use crate::error::{Error, Result};
use crate::radial::Dimension;
use crate::unit_ball_volume;

// ---------------------------------------------------------------------------
// symbolic terms a r^p (log r)^q
// ---------------------------------------------------------------------------

/// One term `coef * r^power * (log r)^logpow`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: f64,
    power: f64,
    logpow: u32,
}

impl Term {
    fn eval(&self, r: f64) -> f64 {
        self.coef * r.powf(self.power) * r.ln().powi(self.logpow as i32)
    }
}

/// A finite sum of terms, closed under differentiation:
/// `(a r^p log^q)' = a p r^(p-1) log^q + a q r^(p-1) log^(q-1)`.
#[derive(Debug, Clone, PartialEq)]
struct TermSum(Vec<Term>);

impl TermSum {
    fn differentiate(&self) -> TermSum {
        let mut out = Vec::new();
        for t in &self.0 {
            if t.coef != 0.0 && t.power != 0.0 {
                out.push(Term {
                    coef: t.coef * t.power,
                    power: t.power - 1.0,
                    logpow: t.logpow,
                });
            }
            if t.coef != 0.0 && t.logpow > 0 {
                out.push(Term {
                    coef: t.coef * t.logpow as f64,
                    power: t.power - 1.0,
                    logpow: t.logpow - 1,
                });
            }
        }
        TermSum(out)
    }

    fn eval(&self, r: f64) -> f64 {
        self.0.iter().map(|t| t.eval(r)).sum()
    }
}

/// The four basis solutions of the calibration ODE, reconstructed from the
/// dimension alone.
fn oracle_basis(n: Dimension) -> [TermSum; 4] {
    let nf = n.as_f64();
    let pow = |p: f64| {
        TermSum(vec![Term {
            coef: 1.0,
            power: p,
            logpow: 0,
        }])
    };
    if n.is_planar() {
        [
            pow(3.0),
            TermSum(vec![Term {
                coef: 1.0,
                power: 1.0,
                logpow: 1,
            }]),
            pow(1.0),
            pow(-1.0),
        ]
    } else {
        [pow(3.0), pow(3.0 - nf), pow(1.0), pow(1.0 - nf)]
    }
}

// ---------------------------------------------------------------------------
// boundary-value solve (second path)
// ---------------------------------------------------------------------------

/// The assembled 4x4 affine system of an annulus boundary-value problem.
#[derive(Debug, Clone)]
pub struct LinearSystem4 {
    pub matrix: [[f64; 4]; 4],
    pub rhs: [f64; 4],
}

/// Boundary data for the annulus problem: prescribed `z` at the two radii
/// (the derivative conditions are always homogeneous).
#[derive(Debug, Clone, Copy)]
pub struct BoundaryData {
    pub z_inner: f64,
    pub z_outer: f64,
}

/// Solution of the oracle's boundary-value solve.
#[derive(Debug, Clone, Copy)]
pub struct BvpSolution {
    pub coeffs: [f64; 4],
    pub lambda: f64,
}

/// Assemble the annulus system from raw basis evaluations.
pub fn assemble(n: Dimension, r0: f64, r1: f64, bc: BoundaryData) -> Result<LinearSystem4> {
    if !(r0 > 0.0 && r0 < r1 && r1.is_finite()) {
        return Err(Error::Domain(format!(
            "annulus requires 0 < R0 < R1 < inf, got [{r0}, {r1}]"
        )));
    }
    let basis = oracle_basis(n);
    let derivs: Vec<TermSum> = basis.iter().map(|b| b.differentiate()).collect();
    let mut matrix = [[0.0; 4]; 4];
    for j in 0..4 {
        matrix[0][j] = basis[j].eval(r0);
        matrix[1][j] = derivs[j].eval(r0);
        matrix[2][j] = basis[j].eval(r1);
        matrix[3][j] = derivs[j].eval(r1);
    }
    Ok(LinearSystem4 {
        matrix,
        rhs: [bc.z_inner, 0.0, bc.z_outer, 0.0],
    })
}

fn eliminate(sys: &LinearSystem4) -> Result<[f64; 4]> {
    let mut a = sys.matrix;
    let mut b = sys.rhs;
    for col in 0..4 {
        let mut pivot = col;
        for row in col + 1..4 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::SingularSystem("oracle boundary system".into()));
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

fn lambda_of(n: Dimension, c0: f64) -> f64 {
    let nf = n.as_f64();
    if n.is_planar() {
        -16.0 * c0
    } else {
        -2.0 * nf * (nf + 2.0) * c0
    }
}

/// Solve the annulus boundary-value problem through the oracle path.
pub fn bvp_solve(n: Dimension, r0: f64, r1: f64, bc: BoundaryData) -> Result<BvpSolution> {
    let sys = assemble(n, r0, r1, bc)?;
    let coeffs = eliminate(&sys)?;
    Ok(BvpSolution {
        coeffs,
        lambda: lambda_of(n, coeffs[0]),
    })
}

/// Ball variant: regularity at the origin replaces two conditions
/// (`c1 = c3 = 0`), leaving a 2x2 system for `(c0, c2)` from
/// `z(R) = z_boundary`, `z'(R) = 0`.
pub fn bvp_solve_ball(n: Dimension, r: f64, z_boundary: f64) -> Result<BvpSolution> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    let basis = oracle_basis(n);
    let d0 = basis[0].differentiate();
    let d2 = basis[2].differentiate();
    let a = [
        [basis[0].eval(r), basis[2].eval(r)],
        [d0.eval(r), d2.eval(r)],
    ];
    let b = [z_boundary, 0.0];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 {
        return Err(Error::SingularSystem("oracle ball system".into()));
    }
    let c0 = (b[0] * a[1][1] - b[1] * a[0][1]) / det;
    let c2 = (a[0][0] * b[1] - a[1][0] * b[0]) / det;
    Ok(BvpSolution {
        coeffs: [c0, 0.0, c2, 0.0],
        lambda: lambda_of(n, c0),
    })
}

// ---------------------------------------------------------------------------
// finite-difference residual
// ---------------------------------------------------------------------------

/// Sampled radial function on a strictly increasing grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::Domain(
                "grid and values must have equal length".into(),
            ));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        Ok(GridFunction { radii, values })
    }

    pub fn sample<F: Fn(f64) -> f64>(radii: Vec<f64>, f: F) -> Result<Self> {
        let values = radii.iter().map(|&r| f(r)).collect();
        Self::new(radii, values)
    }
}

/// Centered first derivative.  Uniform grids with enough points use the
/// five-point fourth-order stencil (the Richardson extrapolation of the
/// three-point one); otherwise the three-point formula for non-uniform
/// spacing (exact for quadratics, second order on smoothly graded grids).
fn centered_derivative(radii: &[f64], values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = radii.len();
    let h = radii[1] - radii[0];
    let uniform = radii
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-8 * h);
    if uniform && m >= 5 {
        let mut rs = Vec::with_capacity(m - 4);
        let mut ds = Vec::with_capacity(m - 4);
        for i in 2..m - 2 {
            let d = (-values[i + 2] + 8.0 * values[i + 1] - 8.0 * values[i - 1] + values[i - 2])
                / (12.0 * h);
            rs.push(radii[i]);
            ds.push(d);
        }
        return (rs, ds);
    }
    let mut rs = Vec::with_capacity(m - 2);
    let mut ds = Vec::with_capacity(m - 2);
    for i in 1..m - 1 {
        let hm = radii[i] - radii[i - 1];
        let hp = radii[i + 1] - radii[i];
        let d = (values[i + 1] * hm * hm - values[i - 1] * hp * hp
            + values[i] * (hp * hp - hm * hm))
            / (hm * hp * (hm + hp));
        rs.push(radii[i]);
        ds.push(d);
    }
    (rs, ds)
}

/// Maximum absolute residual of the calibration ODE over the interior grid,
/// evaluated by three nested centered differences:
/// `-r^(1-n) ( r^(n-1) ( r^(1-n) ( r^(n-1) z )' )' )' - λ`.
///
/// Very fine grids are subsampled (stride chosen so at most ~1500 points
/// enter the stencil): three nested differences amplify rounding noise like
/// `ε/h³`, so shrinking `h` below ~1e-3 of the span makes the residual
/// worse, not better.
pub fn fd_ode_residual(grid: &GridFunction, n: Dimension, lambda: f64) -> Result<f64> {
    let stride = grid.radii.len().div_ceil(1500);
    let (radii, values): (Vec<f64>, Vec<f64>) = grid
        .radii
        .iter()
        .zip(&grid.values)
        .step_by(stride.max(1))
        .map(|(&r, &z)| (r, z))
        .unzip();
    if radii.len() < 7 {
        return Err(Error::Domain(
            "finite-difference residual needs at least 7 grid points".into(),
        ));
    }
    let grid = GridFunction { radii, values };
    let nf = n.as_f64();
    let weighted: Vec<f64> = grid
        .radii
        .iter()
        .zip(&grid.values)
        .map(|(&r, &z)| r.powf(nf - 1.0) * z)
        .collect();
    let (r1, d1) = centered_derivative(&grid.radii, &weighted);
    let div: Vec<f64> = r1
        .iter()
        .zip(&d1)
        .map(|(&r, &d)| r.powf(1.0 - nf) * d)
        .collect();
    let (r2, d2) = centered_derivative(&r1, &div);
    let w2: Vec<f64> = r2
        .iter()
        .zip(&d2)
        .map(|(&r, &d)| r.powf(nf - 1.0) * d)
        .collect();
    let (r3, d3) = centered_derivative(&r2, &w2);
    let mut max_res: f64 = 0.0;
    for (&r, &d) in r3.iter().zip(&d3) {
        let res = -r.powf(1.0 - nf) * d - lambda;
        max_res = max_res.max(res.abs());
    }
    Ok(max_res)
}

// ---------------------------------------------------------------------------
// generic RK4
// ---------------------------------------------------------------------------

/// Classical fixed-step RK4 over `[t0, t1]`; returns the sampled trajectory
/// including both endpoints.  Errors on non-finite states.
pub fn rk4<F>(f: F, y0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) || !(t1 > t0) {
        return Err(Error::Domain("rk4 requires dt > 0 and t1 > t0".into()));
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = vec![(t, y.clone())];
    let add = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    while t < t1 - 1e-15 * t1.abs().max(1.0) {
        let h = dt.min(t1 - t);
        let k1 = f(t, &y);
        let k2 = f(t + h / 2.0, &add(&y, &k1, h / 2.0));
        let k3 = f(t + h / 2.0, &add(&y, &k2, h / 2.0));
        let k4 = f(t + h, &add(&y, &k3, h));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                t,
                reason: "rk4 state became non-finite".into(),
            });
        }
        out.push((t, y.clone()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// radial quadrature
// ---------------------------------------------------------------------------

/// `∫_{R0}^{R1} f(r) n ω_n r^(n-1) dr` by adaptive Simpson quadrature to
/// absolute tolerance `1e-10` (relative for large integrals).  Unbounded
/// intervals are rejected; callers integrate closed forms there instead.
pub fn radial_integral<F>(f: F, n: Dimension, r0: f64, r1: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(r0 >= 0.0 && r0 < r1) {
        return Err(Error::Domain(format!(
            "integration interval requires 0 <= R0 < R1, got [{r0}, {r1}]"
        )));
    }
    if r1.is_infinite() {
        return Err(Error::Domain(
            "unbounded radial integrals diverge or require closed forms".into(),
        ));
    }
    let nf = n.as_f64();
    let weight = nf * unit_ball_volume(n);
    let g = |r: f64| weight * f(r) * r.powf(nf - 1.0);
    Ok(adaptive_simpson(&g, r0, r1, 1e-10, 40))
}

fn simpson<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (g(a) + 4.0 * g(m) + g(b))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let whole = simpson(g, a, b);
    let m = 0.5 * (a + b);
    let left = simpson(g, a, m);
    let right = simpson(g, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(g, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(g, m, b, tol / 2.0, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{solve_annulus, solve_ball, SignatureSpec};

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn bvp_degenerate_non_constant_case() {
        // one-dimensional non-constant boundary data reduces to (0,0,0,-1)
        let sol = bvp_solve(
            dim(1),
            1.0,
            3.0,
            BoundaryData {
                z_inner: -1.0,
                z_outer: -1.0,
            },
        )
        .unwrap();
        assert!(sol.coeffs[0].abs() < 1e-12);
        assert!(sol.coeffs[1].abs() < 1e-12);
        assert!(sol.coeffs[2].abs() < 1e-12);
        assert!((sol.coeffs[3] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn bvp_matches_calibration_module() {
        // cross-path equivalence on a handful of deterministic cases
        for (n, r0, r1) in [
            (3u32, 1.0, 2.0),
            (5, 1.0, 2.0),
            (2, 1.0, 5.0),
            (7, 0.3, 2.2),
        ] {
            let o = bvp_solve(
                dim(n),
                r0,
                r1,
                BoundaryData {
                    z_inner: 1.0,
                    z_outer: -1.0,
                },
            )
            .unwrap();
            let v = solve_annulus(dim(n), r0, r1, SignatureSpec::constant()).unwrap();
            let c = v.witness.unwrap();
            let cc = c.profile.coefficients();
            for j in 0..4 {
                let denom = cc[j].abs().max(1e-12);
                assert!(
                    ((o.coeffs[j] - cc[j]) / denom).abs() < 1e-10,
                    "n = {n}, c{j}: {} vs {}",
                    o.coeffs[j],
                    cc[j]
                );
            }
            assert!(((o.lambda - c.lambda) / c.lambda.abs().max(1e-12)).abs() < 1e-10);
        }
    }

    #[test]
    fn bvp_ball_matches_closed_form() {
        for n in [1u32, 2, 3, 5, 8] {
            let sol = bvp_solve_ball(dim(n), 2.0, -1.0).unwrap();
            let c = solve_ball(dim(n), 2.0).unwrap();
            let cc = c.profile.coefficients();
            assert!((sol.coeffs[0] - cc[0]).abs() < 1e-12, "n = {n}");
            assert!((sol.coeffs[2] - cc[2]).abs() < 1e-12, "n = {n}");
            assert!(
                ((sol.lambda - c.lambda) / c.lambda).abs() < 1e-12,
                "n = {n}"
            );
            // agreement persists down to the origin
            let eps = 1e-6f64;
            let z_local = sol.coeffs[0] * eps.powi(3) + sol.coeffs[2] * eps;
            let z_lib = c.profile.z(eps).unwrap();
            assert!((z_local - z_lib).abs() < 1e-18);
        }
    }

    #[test]
    fn fd_residual_constant_and_linear() {
        let grid: Vec<f64> = (0..200).map(|i| 1.0 + i as f64 * 0.01).collect();
        // constant z, n = 1: residual equals |λ|
        let g = GridFunction::sample(grid.clone(), |_| 5.0).unwrap();
        let res = fd_ode_residual(&g, dim(1), 2.5).unwrap();
        assert!((res - 2.5).abs() < 1e-9);
        // z = r, n = 1, λ = 0: residual at rounding level
        let g = GridFunction::sample(grid, |r| r).unwrap();
        let res = fd_ode_residual(&g, dim(1), 0.0).unwrap();
        assert!(res < 1e-9);
    }

    #[test]
    fn fd_residual_on_ball_calibration() {
        let c = solve_ball(dim(3), 1.0).unwrap();
        let m = 10_000;
        let grid: Vec<f64> = (0..=m).map(|i| 0.1 + 0.8 * i as f64 / m as f64).collect();
        let g = GridFunction::sample(grid, |r| c.profile.z(r).unwrap()).unwrap();
        let res = fd_ode_residual(&g, dim(3), c.lambda).unwrap();
        assert!(res <= 1e-5, "residual {res}");
    }

    #[test]
    fn fd_residual_grid_too_coarse() {
        let g = GridFunction::new(vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]).unwrap();
        assert!(fd_ode_residual(&g, dim(1), 0.0).is_err());
    }

    #[test]
    fn rk4_zero_field_constant() {
        let traj = rk4(|_, _| vec![0.0, 0.0], &[1.0, 2.0], 0.0, 1.0, 0.1).unwrap();
        let (_, last) = traj.last().unwrap();
        assert_eq!(last, &vec![1.0, 2.0]);
    }

    #[test]
    fn radial_integral_unit_ball() {
        // f = 1 over the unit ball in n = 3: 4π/3
        let v = radial_integral(|_| 1.0, dim(3), 0.0, 1.0).unwrap();
        assert!((v - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-10);
    }

    #[test]
    fn radial_integral_rejects_unbounded() {
        assert!(radial_integral(|_| 1.0, dim(3), 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn radial_integral_div_of_ball_calibration() {
        // ∫ div Z over B_R equals the signed boundary measure -H^(n-1)(∂B_R)
        for (n, r) in [(1u32, 1.0), (3, 1.0), (3, 2.0), (5, 0.7)] {
            let c = solve_ball(dim(n), r).unwrap();
            let val = radial_integral(|x| c.profile.eval(x).unwrap().div, dim(n), 0.0, r).unwrap();
            let expect = -crate::sphere_area(dim(n), r);
            assert!(
                ((val - expect) / expect).abs() < 1e-8,
                "n = {n}, R = {r}: {val} vs {expect}"
            );
        }
    }

    #[test]
    fn saint_venant_ball_integral_two_paths() {
        // ∫ w_sv over B_R in n = 3, w = (R² - r²)/6: symbolic vs quadrature
        let r = 1.3f64;
        let symbolic = {
            // ∫ (R² - r²)/6 * 4π r² dr over [0, R] = 4π/6 (R⁵/3 - R⁵/5)
            4.0 * std::f64::consts::PI / 6.0 * (r.powi(5) / 3.0 - r.powi(5) / 5.0)
        };
        let quad = radial_integral(|x| (r * r - x * x) / 6.0, dim(3), 0.0, r).unwrap();
        assert!((symbolic - quad).abs() < 1e-12 * symbolic.abs());
    }
}
