//! Closed-form evolution of characteristic functions of balls.
//!
//! For `u_0 = a_0 1_{B_{R0}}`, the solution stays of the form
//! `a(t) 1_{B_{R(t)}}` for every dimension except `n = 2`, where the
//! exterior develops a `t/|x|^3` tail.  Writing
//! `s(t) = 1 - n(4n-10) t / (a_0 R_0^3)`,
//!
//! ```text
//! a(t) = a_0 s^((n+2)/(4n-10)),   R(t) = R_0 s^((n-4)/(4n-10))     (n ≠ 2)
//! ```
//!
//! which covers `n = 1` (where `s` grows and there is no extinction) as well
//! as `n ≥ 3` (extinction at `t* = a_0 R_0^3 / (n(4n-10))`).  For `n = 2`,
//! with `S(t) = sqrt(a_0² R_0^6 + 9t²)`,
//!
//! ```text
//! R(t) = R_0 sqrt(1 + 6t (3t + S) / (a_0² R_0^6)),   a(t) = (S + t) / R³,
//! ```
//!
//! the second form chosen over the expanded rational expression to avoid
//! cancellation for `t ≫ a_0 R_0^3`.

use crate::error::{Error, Result};
use crate::radial::Dimension;
use crate::{sphere_area, unit_ball_volume};

/// Ball state at a given time along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallState {
    pub n: Dimension,
    pub a: f64,
    pub r: f64,
    pub t: f64,
}

/// Either an evolving ball state or the zero function past extinction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BallEvolution {
    Alive(BallState),
    Extinct,
}

impl BallEvolution {
    pub fn state(self) -> Option<BallState> {
        match self {
            BallEvolution::Alive(s) => Some(s),
            BallEvolution::Extinct => None,
        }
    }
}

fn check_initial(a0: f64, r0: f64) -> Result<()> {
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!(
            "initial radius must be positive, got {r0}"
        )));
    }
    if !a0.is_finite() {
        return Err(Error::Domain(format!(
            "initial height must be finite, got {a0}"
        )));
    }
    Ok(())
}

/// Evolve `a_0 1_{B_{R0}}` to time `t`.
///
/// Negative heights are handled by odd symmetry of the flow
/// (`u → -u` maps solutions to solutions); `a_0 = 0` is already extinct.
/// At `t = t*` exactly the state is reported extinct.
pub fn evolve_ball(n: Dimension, a0: f64, r0: f64, t: f64) -> Result<BallEvolution> {
    check_initial(a0, r0)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    if a0 == 0.0 {
        return Ok(BallEvolution::Extinct);
    }
    if a0 < 0.0 {
        return Ok(match evolve_ball(n, -a0, r0, t)? {
            BallEvolution::Alive(s) => BallEvolution::Alive(BallState { a: -s.a, ..s }),
            BallEvolution::Extinct => BallEvolution::Extinct,
        });
    }
    let nf = n.as_f64();
    if n.is_planar() {
        let c = a0 * a0 * r0.powi(6);
        let s = (c + 9.0 * t * t).sqrt();
        let r = r0 * (1.0 + 6.0 * t * (3.0 * t + s) / c).sqrt();
        let a = (s + t) / (r * r * r);
        return Ok(BallEvolution::Alive(BallState { n, a, r, t }));
    }
    let k = nf * (4.0 * nf - 10.0);
    let s = 1.0 - k * t / (a0 * r0 * r0 * r0);
    if s <= 0.0 {
        return Ok(BallEvolution::Extinct);
    }
    let a = a0 * s.powf((nf + 2.0) / (4.0 * nf - 10.0));
    let r = r0 * s.powf((nf - 4.0) / (4.0 * nf - 10.0));
    Ok(BallEvolution::Alive(BallState { n, a, r, t }))
}

/// Extinction time `a_0 R_0^3 / (n(4n-10))` for `n ≥ 3`; infinite for
/// `n ∈ {1, 2}`.
pub fn extinction_time(n: Dimension, a0: f64, r0: f64) -> Result<f64> {
    check_initial(a0, r0)?;
    let nf = n.as_f64();
    if n.get() <= 2 {
        return Ok(f64::INFINITY);
    }
    Ok(a0.abs() * r0 * r0 * r0 / (nf * (4.0 * nf - 10.0)))
}

/// Deviation of `a R³` from its first integral:
/// `a R³ - (a_0 R_0^3 - n(4n-10) t)` for `n ≠ 2` and
/// `a R³ - (sqrt(a_0² R_0^6 + 9t²) + t)` for `n = 2`.
/// Zero along exact trajectories.
pub fn first_integral(n: Dimension, a0: f64, r0: f64, state: &BallState) -> f64 {
    let nf = n.as_f64();
    let current = state.a * state.r.powi(3);
    let expected = if n.is_planar() {
        let sign = if a0 < 0.0 { -1.0 } else { 1.0 };
        sign * ((a0 * a0 * r0.powi(6) + 9.0 * state.t * state.t).sqrt() + state.t)
    } else {
        a0 * r0.powi(3) - a0.signum() * nf * (4.0 * nf - 10.0) * state.t
    };
    current - expected
}

/// Solution height `u(t, r)`.
pub fn profile_at(n: Dimension, a0: f64, r0: f64, t: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    match evolve_ball(n, a0, r0, t)? {
        BallEvolution::Extinct => Ok(0.0),
        BallEvolution::Alive(s) => {
            if r < s.r {
                Ok(s.a)
            } else if n.is_planar() {
                Ok(a0.signum() * t / (r * r * r))
            } else {
                Ok(0.0)
            }
        }
    }
}

/// Speed `dR/dt` of the facet boundary: `-n(n-4)/(R² a)` for `n ≠ 2` and
/// `3R/(a R³ - t)` for `n = 2` (the planar law needs the current time).
pub fn boundary_jump_speed(n: Dimension, a: f64, r: f64, t: f64) -> Result<f64> {
    if a == 0.0 {
        return Err(Error::Singular {
            r,
            reason: "facet height is zero; boundary speed undefined".into(),
        });
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let nf = n.as_f64();
    if n.is_planar() {
        let denom = a * r * r * r - a.signum() * t;
        if denom == 0.0 {
            return Err(Error::Singular {
                r,
                reason: "vanishing gap a R^3 - t".into(),
            });
        }
        Ok(3.0 * r / denom)
    } else {
        Ok(-nf * (nf - 4.0) / (r * r * a))
    }
}

/// `∫ u` for the ball state (plus the planar tail when present).
pub fn ball_mass(state: &BallState) -> f64 {
    let bulk = state.a * unit_ball_volume(state.n) * state.r.powi(state.n.get() as i32);
    if state.n.is_planar() {
        // tail: ∫_R^∞ (±t/r³) 2π r dr = ±2π t / R
        let sign = state.a.signum();
        bulk + sign * 2.0 * std::f64::consts::PI * state.t / state.r
    } else {
        bulk
    }
}

/// Total variation of the ball state: the jump across the boundary sphere
/// times its area (the planar tail contributes its own radial variation).
pub fn ball_tv(state: &BallState) -> f64 {
    let outside = if state.n.is_planar() {
        state.a.signum() * state.t / state.r.powi(3)
    } else {
        0.0
    };
    let jump = (state.a - outside).abs() * sphere_area(state.n, state.r);
    if state.n.is_planar() {
        // |d/dr (t/r³)| integrated over the tail: ∫_R^∞ 3t/r⁴ 2π r dr = 2π t / R²
        jump + 2.0 * std::f64::consts::PI * state.t / (state.r * state.r)
    } else {
        jump
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: u32) -> Dimension {
        Dimension::new(n).unwrap()
    }

    fn alive(n: u32, a0: f64, r0: f64, t: f64) -> BallState {
        evolve_ball(dim(n), a0, r0, t).unwrap().state().unwrap()
    }

    #[test]
    fn initial_condition() {
        for n in [1u32, 2, 3, 4, 5, 6] {
            let s = alive(n, 1.3, 0.7, 0.0);
            assert!((s.a - 1.3).abs() < 1e-14);
            assert!((s.r - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn n4_height_linear_radius_constant() {
        for t in [0.0, 0.01, 0.03, 0.0416] {
            let s = alive(4, 1.0, 1.0, t);
            assert!((s.a - (1.0 - 24.0 * t)).abs() < 1e-12);
            assert_eq!(s.r, 1.0);
        }
        assert!(matches!(
            evolve_ball(dim(4), 1.0, 1.0, 1.0 / 24.0).unwrap(),
            BallEvolution::Extinct
        ));
    }

    #[test]
    fn n3_radius_diverges() {
        let tstar = extinction_time(dim(3), 1.0, 1.0).unwrap();
        assert!((tstar - 1.0 / 6.0).abs() < 1e-15);
        let s = alive(3, 1.0, 1.0, 0.9 * tstar);
        assert!((s.r - 0.1f64.powf(-0.5)).abs() < 1e-12);
        assert!(s.r > 3.0);
        assert!(matches!(
            evolve_ball(dim(3), 1.0, 1.0, tstar).unwrap(),
            BallEvolution::Extinct
        ));
    }

    #[test]
    fn n1_explicit_point() {
        let s = alive(1, 1.0, 1.0, 4.0);
        assert!((s.a - 0.2).abs() < 1e-14);
        assert!((s.r - 5.0).abs() < 1e-13);
        // a R constant in one dimension
        for t in [0.3, 1.7, 9.0] {
            let s = alive(1, 1.0, 1.0, t);
            assert!((s.a * s.r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extinction_times() {
        assert_eq!(extinction_time(dim(2), 1.0, 1.0).unwrap(), f64::INFINITY);
        assert_eq!(extinction_time(dim(1), 1.0, 1.0).unwrap(), f64::INFINITY);
        assert!((extinction_time(dim(5), 2.0, 1.0).unwrap() - 0.04).abs() < 1e-16);
    }

    #[test]
    fn first_integrals_vanish_along_trajectories() {
        for n in [1u32, 3, 4, 5, 6] {
            let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
            let horizon = if tstar.is_finite() {
                0.98 * tstar
            } else {
                10.0
            };
            for i in 1..=20 {
                let t = horizon * i as f64 / 20.0;
                let s = alive(n, 1.0, 1.0, t);
                assert!(
                    first_integral(dim(n), 1.0, 1.0, &s).abs() < 1e-12,
                    "n = {n}, t = {t}"
                );
            }
        }
        for i in 1..=20 {
            let t = 10.0 * i as f64 / 20.0;
            let s = alive(2, 1.0, 1.0, t);
            assert!(
                first_integral(dim(2), 1.0, 1.0, &s).abs() < 1e-10,
                "n = 2, t = {t}"
            );
        }
    }

    #[test]
    fn monotonicity_table() {
        // a decreasing for all n; R increasing for n in {1,2,3}, constant for
        // n = 4, decreasing for n >= 5
        for n in [1u32, 2, 3, 4, 5, 6] {
            let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
            let horizon = if tstar.is_finite() { 0.95 * tstar } else { 5.0 };
            let mut prev = alive(n, 1.0, 1.0, 0.0);
            for i in 1..=50 {
                let s = alive(n, 1.0, 1.0, horizon * i as f64 / 50.0);
                assert!(s.a < prev.a, "a not decreasing for n = {n}");
                match n {
                    1 | 2 | 3 => assert!(s.r > prev.r),
                    4 => assert_eq!(s.r, prev.r),
                    _ => assert!(s.r < prev.r),
                }
                prev = s;
            }
        }
    }

    #[test]
    fn closed_forms_satisfy_ode_systems() {
        // d/dt of (a, R) from the formulas matches the ODE right-hand sides
        for n in [1u32, 2, 3, 4, 5, 6] {
            let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
            let horizon = if tstar.is_finite() { 0.8 * tstar } else { 4.0 };
            for i in 1..10 {
                let t = horizon * i as f64 / 10.0;
                let h = 1e-6 * horizon;
                let sp = alive(n, 1.0, 1.0, t + h);
                let sm = alive(n, 1.0, 1.0, t - h);
                let s = alive(n, 1.0, 1.0, t);
                let da = (sp.a - sm.a) / (2.0 * h);
                let dr = (sp.r - sm.r) / (2.0 * h);
                let nf = n as f64;
                let da_expect = if n == 2 {
                    -8.0 / s.r.powi(3)
                } else {
                    -nf * (nf + 2.0) / s.r.powi(3)
                };
                let dr_expect = boundary_jump_speed(dim(n), s.a, s.r, t).unwrap();
                assert!(
                    ((da - da_expect) / da_expect.abs().max(1e-12)).abs() < 1e-6,
                    "n = {n}, t = {t}: da {da} vs {da_expect}"
                );
                let denom = dr_expect.abs().max(1e-9);
                assert!(
                    ((dr - dr_expect) / denom).abs() < 1e-6,
                    "n = {n}, t = {t}: dR {dr} vs {dr_expect}"
                );
            }
        }
    }

    #[test]
    fn jump_speed_reference_values() {
        assert_eq!(boundary_jump_speed(dim(4), 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert!((boundary_jump_speed(dim(3), 1.0, 1.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((boundary_jump_speed(dim(2), 1.0, 1.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!((boundary_jump_speed(dim(1), 1.0, 1.0, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(boundary_jump_speed(dim(3), 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn planar_profile_and_gap() {
        // tail value, gap positivity, and linear growth of u at fixed r
        let s = alive(2, 1.0, 1.0, 0.5);
        let gap = s.a - 0.5 / s.r.powi(3);
        assert!(gap > 0.0);
        for t in [0.1, 1.0, 5.0, 10.0] {
            let s = alive(2, 1.0, 1.0, t);
            assert!(s.a - t / s.r.powi(3) > 0.0, "gap at t = {t}");
        }
        let r_fix = 30.0;
        let u1 = profile_at(dim(2), 1.0, 1.0, 2.0, r_fix).unwrap();
        let u2 = profile_at(dim(2), 1.0, 1.0, 3.0, r_fix).unwrap();
        assert!(((u2 - u1) - 1.0 / r_fix.powi(3)).abs() < 1e-15);
        // n != 2: zero outside
        assert_eq!(profile_at(dim(3), 1.0, 1.0, 0.05, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn mass_conservation_low_dimensions() {
        // n = 1: 2 a R constant; n = 2: pi a R² + 2 pi t / R constant
        let m0 = ball_mass(&alive(1, 1.0, 1.0, 0.0));
        for t in [0.5, 2.0, 10.0] {
            let m = ball_mass(&alive(1, 1.0, 1.0, t));
            assert!(((m - m0) / m0).abs() < 1e-10, "n = 1, t = {t}");
        }
        let m0 = ball_mass(&alive(2, 1.0, 1.0, 0.0));
        for t in [0.5, 2.0, 10.0] {
            let m = ball_mass(&alive(2, 1.0, 1.0, t));
            assert!(((m - m0) / m0).abs() < 1e-10, "n = 2, t = {t}");
        }
    }

    #[test]
    fn tv_energy_decreasing() {
        for n in [1u32, 2, 3, 4, 5, 6] {
            let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
            let horizon = if tstar.is_finite() {
                0.95 * tstar
            } else {
                10.0
            };
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let s = alive(n, 1.0, 1.0, horizon * i as f64 / 40.0);
                let tv = ball_tv(&s);
                assert!(tv <= prev * (1.0 + 1e-12), "n = {n}");
                prev = tv;
            }
        }
    }

    #[test]
    fn negative_heights_by_symmetry() {
        let sp = alive(3, 1.0, 1.0, 0.1);
        let sm = alive(3, -1.0, 1.0, 0.1);
        assert_eq!(sp.a, -sm.a);
        assert_eq!(sp.r, sm.r);
        let u = profile_at(dim(2), -1.0, 1.0, 1.0, 50.0).unwrap();
        assert!(u < 0.0);
    }

    #[test]
    fn reference_mass_and_tv() {
        let s = BallState {
            n: dim(1),
            a: 1.0,
            r: 2.0,
            t: 0.0,
        };
        assert!((ball_mass(&s) - 4.0).abs() < 1e-15);
        assert!((ball_tv(&s) - 2.0).abs() < 1e-15);
        let s = BallState {
            n: dim(3),
            a: 1.0,
            r: 1.0,
            t: 0.0,
        };
        assert!((ball_tv(&s) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }
}
