//! Radial solutions of the fourth-order total variation flow
//! `u_t = -Δ div(∇u/|∇u|)` on `R^n`.
//!
//! The library is organized around the scalar radial component `z(r)` of a
//! Cahn-Hoffman vector field `Z(x) = z(|x|) x/|x|`:
//!
//! * [`radial`] — the four-dimensional solution basis of the third-order
//!   calibration ODE, exact per-monomial derivatives, and the sup-norm check.
//! * [`calibration`] — boundary-value solvers for generalized annuli
//!   (balls, annuli, complements of balls), calibrability classification,
//!   the critical ratio `Q*`, and the Saint-Venant cross-check for the facet
//!   speed `λ`.
//! * [`ball`] — closed-form evolution of characteristic functions of balls,
//!   extinction times and first integrals.
//! * [`stack`] — event-driven integration of piecewise-constant radial data
//!   (stacks) by the facet ODE system, including the planar (`n = 2`)
//!   bending-region dynamics.
//! * [`oracle`] — independent verification machinery: finite-difference
//!   residuals, a second boundary-value solve path, generic RK4 and
//!   adaptive quadrature.
//! * [`verify`] — the property suites wired into the command-line `verify`
//!   subcommand.

pub mod ball;
pub mod calibration;
pub mod error;
pub mod oracle;
pub mod radial;
pub mod stack;
pub mod verify;

pub use error::{Error, Result};
pub use radial::{Basis, Dimension, FieldSample, RadialProfile};

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: Dimension) -> f64 {
    // omega_n = pi^(n/2) / Gamma(n/2 + 1), via the two-step recurrence
    // omega_n = 2 pi / n * omega_{n-2} with omega_0 = 1, omega_1 = 2.
    let n = n.get();
    let mut omega = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 3 };
    while k <= n {
        omega *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    omega
}

/// Surface measure of the sphere of radius `r` in `R^n`, `n ω_n r^(n-1)`.
pub fn sphere_area(n: Dimension, r: f64) -> f64 {
    n.get() as f64 * unit_ball_volume(n) * r.powi(n.get() as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ball_volumes() {
        let pi = std::f64::consts::PI;
        assert_eq!(unit_ball_volume(Dimension::new(1).unwrap()), 2.0);
        assert!((unit_ball_volume(Dimension::new(2).unwrap()) - pi).abs() < 1e-15);
        assert!((unit_ball_volume(Dimension::new(3).unwrap()) - 4.0 * pi / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(Dimension::new(4).unwrap()) - pi * pi / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        // n=3, r=1: 4 pi
        assert!((sphere_area(Dimension::new(3).unwrap(), 1.0) - 4.0 * pi).abs() < 1e-14);
        // n=1: two endpoints
        assert_eq!(sphere_area(Dimension::new(1).unwrap(), 7.0), 2.0);
    }
}
