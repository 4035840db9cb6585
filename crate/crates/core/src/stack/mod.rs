//! Evolution of stacks — piecewise-constant radial data — by the facet ODE
//! system.
//!
//! A stack with jump radii `R^0 < … < R^(N-1)` and heights `a^0, …, a^N`
//! (`a^N = 0`) evolves by
//!
//! ```text
//! da^k/dt = λ^k,            dR^k/dt = d^k / (a^k - a^(k+1)),
//! ```
//!
//! where `λ^k` is the facet speed of region `k`'s calibration and
//! `d^k = z^k_rr(R^k) - z^(k+1)_rr(R^k)` is the jump of the second radial
//! derivative of the pasted Cahn-Hoffman field across the interface
//! (inside minus outside — the convention fixed by the single-ball case,
//! where the system reduces to `dR/dt = -n(n-4)/(R² a)`).
//!
//! For `n ≠ 2` every region is calibrable and the solution stays a stack
//! between events; events (facet merges, region collapses, extinction) are
//! localized by bisection and the stack restarts with smaller `N`.  The
//! planar case, which develops bending regions, lives in [`n2`] and is
//! driven through [`evolve_n2`].

pub mod n2;

pub use n2::evolve_n2;

use crate::calibration::{annulus_profile, ball_profile, complement_profile, Sign};
use crate::error::{Error, Result};
use crate::radial::Dimension;
use crate::{sphere_area, unit_ball_volume};

/// A piecewise-constant radial function with finitely many jumps and zero
/// value at infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    n: Dimension,
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl Stack {
    /// Validating constructor: radii strictly increasing and positive,
    /// `values.len() == radii.len() + 1`, adjacent values distinct, outer
    /// value zero.
    pub fn new(n: Dimension, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::Domain(
                "a stack needs at least one jump radius".into(),
            ));
        }
        if values.len() != radii.len() + 1 {
            return Err(Error::Domain(format!(
                "stack with {} radii needs {} values, got {}",
                radii.len(),
                radii.len() + 1,
                values.len()
            )));
        }
        if !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain(
                "stack radii must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("stack values must be finite".into()));
        }
        if *values.last().unwrap() != 0.0 {
            return Err(Error::Domain(
                "the outermost stack value must be zero".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain(
                "adjacent stack values must be distinct".into(),
            ));
        }
        Ok(Stack { n, radii, values })
    }

    /// Non-validating constructor for internal skeletons (facet layouts of
    /// planar states may legally repeat non-adjacent values).
    pub(crate) fn raw(n: Dimension, radii: Vec<f64>, values: Vec<f64>) -> Self {
        Stack { n, radii, values }
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of jumps `N`.
    pub fn jumps(&self) -> usize {
        self.radii.len()
    }

    pub fn value_at(&self, r: f64) -> f64 {
        let idx = self.radii.partition_point(|&x| x <= r);
        self.values[idx]
    }

    /// `∫ u` (the unbounded outer region carries value zero).
    pub fn mass(&self) -> f64 {
        let omega = unit_ball_volume(self.n);
        let p = self.n.get() as i32;
        let mut total = 0.0;
        let mut inner = 0.0;
        for (k, &r) in self.radii.iter().enumerate() {
            total += self.values[k] * omega * (r.powi(p) - inner);
            inner = r.powi(p);
        }
        total
    }

    /// Total variation `Σ_k |a^k - a^(k+1)| n ω_n (R^k)^(n-1)`.
    pub fn tv(&self) -> f64 {
        self.radii
            .iter()
            .enumerate()
            .map(|(k, &r)| (self.values[k] - self.values[k + 1]).abs() * sphere_area(self.n, r))
            .sum()
    }
}

/// Facet speeds `λ^k` and interface jump coefficients `d^k` of a stack.
#[derive(Debug, Clone)]
pub struct FacetSpeeds {
    /// `λ^0 … λ^N`, with `λ^N = 0`.
    pub lambdas: Vec<f64>,
    /// `d^0 … d^(N-1)`.
    pub jumps: Vec<f64>,
}

/// Facet speeds of a non-planar stack via the per-region calibration solves.
pub fn facet_speeds(stack: &Stack) -> Result<FacetSpeeds> {
    if stack.n.is_planar() {
        return Err(Error::Domain(
            "facet_speeds requires n != 2; planar stacks evolve through evolve_n2".into(),
        ));
    }
    let (lambdas, jumps) = speeds_from_parts(stack.n, &stack.radii, &stack.values)?;
    Ok(FacetSpeeds { lambdas, jumps })
}

/// Core speed computation on raw state arrays (no stack validation, so the
/// integrator can probe trial states).
fn speeds_from_parts(n: Dimension, radii: &[f64], values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let count = radii.len();
    let mut lambdas = Vec::with_capacity(count + 1);
    // z'' of each region's calibration at its inner/outer boundary
    let mut zpp_outer = Vec::with_capacity(count + 1);
    let mut zpp_inner = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let (profile, lambda) = if k == 0 {
            let chi = Sign::of(values[1] - values[0]);
            ball_profile(n, radii[0], chi)?
        } else if k == count {
            let chi = Sign::of(values[count - 1] - values[count]);
            complement_profile(n, radii[count - 1], chi)?
        } else {
            let chi_in = Sign::of(values[k - 1] - values[k]);
            let chi_out = Sign::of(values[k + 1] - values[k]);
            annulus_profile(n, radii[k - 1], radii[k], chi_in, chi_out)?
        };
        lambdas.push(if k == count { 0.0 } else { lambda });
        zpp_inner.push(if k == 0 {
            0.0
        } else {
            profile.eval(radii[k - 1])?.z_second
        });
        zpp_outer.push(if k == count {
            0.0
        } else {
            profile.eval(radii[k])?.z_second
        });
    }
    let jumps = (0..count)
        .map(|k| zpp_outer[k] - zpp_inner[k + 1])
        .collect();
    Ok((lambdas, jumps))
}

/// Trajectory events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryEvent {
    /// Adjacent facets `k` and `k+1` became one (their heights met, or the
    /// region between their interfaces collapsed to zero width).
    FacetMerge { index: usize, time: f64 },
    /// The innermost radius reached zero.
    InnerCollapse { time: f64 },
    /// The stack emptied; `u ≡ 0` from this time on.
    Extinction { time: f64 },
    /// Planar bending-region layout change (region spawned, consumed, or a
    /// facet ratio crossed the critical value).
    BendingTransition { time: f64 },
}

impl TrajectoryEvent {
    pub fn time(&self) -> f64 {
        match *self {
            TrajectoryEvent::FacetMerge { time, .. }
            | TrajectoryEvent::InnerCollapse { time }
            | TrajectoryEvent::Extinction { time }
            | TrajectoryEvent::BendingTransition { time } => time,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TrajectoryEvent::FacetMerge { .. } => "facet_merge",
            TrajectoryEvent::InnerCollapse { .. } => "inner_collapse",
            TrajectoryEvent::Extinction { .. } => "extinction",
            TrajectoryEvent::BendingTransition { .. } => "bending_transition",
        }
    }
}

/// One sampled point of a bending region: `u(t, r) = u_entry + σ (t - t_entry)/r³`
/// for `t ≥ t_entry`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BendRecord {
    pub r: f64,
    pub u_entry: f64,
    pub t_entry: f64,
}

/// A planar bending region: a radial zone where the field is saturated
/// (`Z = ±x/|x|`) and the profile bends pointwise with `u_t = σ/r³`.
#[derive(Debug, Clone, PartialEq)]
pub struct BendingProfile {
    /// Sign of `u_t r³`.
    pub sigma: f64,
    pub r_in: f64,
    /// `f64::INFINITY` for the outer tail.
    pub r_out: f64,
    /// Sample records sorted by radius.
    pub records: Vec<BendRecord>,
    /// Entry data `(u_entry, t_entry)` for radii beyond the last record
    /// (the untouched zone of a tail).
    pub pristine: Option<(f64, f64)>,
}

impl BendingProfile {
    /// Reconstruct `u(t, r)` from the records (linear interpolation between
    /// record radii, each advanced to time `t` by its own bending law).
    pub fn value_at(&self, t: f64, r: f64) -> f64 {
        let at = |rec: &BendRecord| rec.u_entry + self.sigma * (t - rec.t_entry) / rec.r.powi(3);
        let pristine_at = |r: f64| {
            let (u_e, t_e) = self.pristine.unwrap_or((0.0, 0.0));
            u_e + self.sigma * (t - t_e) / (r * r * r)
        };
        if self.records.is_empty() {
            return pristine_at(r);
        }
        let first = &self.records[0];
        let last = self.records.last().unwrap();
        if r <= first.r {
            return at(first);
        }
        if r >= last.r {
            if self.pristine.is_some() {
                return pristine_at(r);
            }
            return at(last);
        }
        let idx = self.records.partition_point(|rec| rec.r < r);
        let (lo, hi) = (&self.records[idx - 1], &self.records[idx]);
        let w = (r - lo.r) / (hi.r - lo.r);
        (1.0 - w) * at(lo) + w * at(hi)
    }

    /// Radii of the stored samples clipped to the current span.
    fn sample_radii(&self) -> Vec<f64> {
        let mut rs: Vec<f64> = Vec::with_capacity(self.records.len() + 2);
        rs.push(self.r_in);
        for rec in &self.records {
            if rec.r > self.r_in && rec.r < self.r_out {
                rs.push(rec.r);
            }
        }
        if self.r_out.is_finite() {
            rs.push(self.r_out);
        }
        rs
    }
}

/// Full solution state: facet skeleton plus (planar only) bending regions.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub stack: Stack,
    pub bending: Vec<BendingProfile>,
}

impl EvolutionState {
    pub fn from_stack(t: f64, stack: Stack) -> Self {
        EvolutionState {
            t,
            stack,
            bending: Vec::new(),
        }
    }

    /// Height `u(t, r)`; bending regions override the facet skeleton.
    pub fn value_at(&self, r: f64) -> f64 {
        for b in &self.bending {
            if r >= b.r_in && r < b.r_out {
                return b.value_at(self.t, r);
            }
        }
        self.stack.value_at(r)
    }

    /// True when no bending region of meaningful width remains (the planar
    /// tail, whose height decays like `t/r³`, is ignored below the given
    /// height tolerance at its inner edge).
    pub fn is_stack_within(&self, height_tol: f64) -> bool {
        self.bending.iter().all(|b| {
            if b.r_out.is_finite() {
                b.r_out - b.r_in <= 1e-9 * b.r_out.max(1.0)
            } else {
                self.value_at(b.r_in * (1.0 + 1e-9)).abs() <= height_tol
            }
        })
    }

    /// `∫ u`, exact on facets and trapezoidal over bending samples; the
    /// planar tail contributes its closed-form integral.
    pub fn mass(&self) -> f64 {
        let n = self.stack.dimension();
        let p = n.get() as i32;
        let omega = unit_ball_volume(n);
        let mut total = self.stack.mass();
        for b in &self.bending {
            // remove the facet-skeleton contribution over the bending span
            let hi = if b.r_out.is_finite() { b.r_out } else { b.r_in };
            let mut lo = b.r_in;
            while lo < hi {
                let idx = self.stack.radii().partition_point(|&x| x <= lo);
                let seg_hi = if idx < self.stack.jumps() {
                    self.stack.radii()[idx].min(hi)
                } else {
                    hi
                };
                total -= self.stack.values()[idx] * omega * (seg_hi.powi(p) - lo.powi(p));
                if seg_hi <= lo {
                    break;
                }
                lo = seg_hi;
            }
            // add the bending contribution
            let area = |r: f64| n.get() as f64 * omega * r.powi(p - 1);
            let rs = b.sample_radii();
            for w in rs.windows(2) {
                let u0 = b.value_at(self.t, w[0]);
                let u1 = b.value_at(self.t, w[1]);
                total += 0.5 * (u0 * area(w[0]) + u1 * area(w[1])) * (w[1] - w[0]);
            }
            if b.r_out.is_infinite() {
                // tail beyond the last sample: u = σ (t - t_e)/r³ with the
                // planar measure 2π r dr
                let r_last = rs.last().copied().unwrap_or(b.r_in);
                let (_, t_e) = b.pristine.unwrap_or((0.0, 0.0));
                total += 2.0 * std::f64::consts::PI * b.sigma * (self.t - t_e) / r_last;
            }
        }
        total
    }

    /// One-sided limit of `u` at a radius (exact region lookup, robust even
    /// when interfaces sit arbitrarily close together).
    fn side_value(&self, r: f64, from_left: bool) -> f64 {
        for b in &self.bending {
            let covered = if from_left {
                r > b.r_in && r <= b.r_out
            } else {
                r >= b.r_in && r < b.r_out
            };
            if covered {
                return b.value_at(self.t, r);
            }
        }
        let radii = self.stack.radii();
        let idx = if from_left {
            radii.partition_point(|&x| x < r)
        } else {
            radii.partition_point(|&x| x <= r)
        };
        self.stack.values()[idx]
    }

    /// Total variation: interface jumps plus sampled variation over bending
    /// regions.
    pub fn tv(&self) -> f64 {
        let n = self.stack.dimension();
        let mut total = 0.0;
        let mut cuts: Vec<f64> = self.stack.radii().to_vec();
        for b in &self.bending {
            cuts.push(b.r_in);
            if b.r_out.is_finite() {
                cuts.push(b.r_out);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        for &c in &cuts {
            let below = self.side_value(c, true);
            let above = self.side_value(c, false);
            total += (below - above).abs() * sphere_area(n, c);
        }
        for b in &self.bending {
            let rs = b.sample_radii();
            for w in rs.windows(2) {
                let du = b.value_at(self.t, w[1]) - b.value_at(self.t, w[0]);
                total += du.abs() * sphere_area(n, 0.5 * (w[0] + w[1]));
            }
            if b.r_out.is_infinite() {
                let r_last = rs.last().copied().unwrap_or(b.r_in);
                let (_, t_e) = b.pristine.unwrap_or((0.0, 0.0));
                total += 2.0 * std::f64::consts::PI * (self.t - t_e).abs() / (r_last * r_last);
            }
        }
        total
    }
}

/// Mass `∫ u` and total variation of a state.
pub fn mass_and_energy(state: &EvolutionState) -> (f64, f64) {
    (state.mass(), state.tv())
}

/// A computed trajectory: recorded states plus the events encountered.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<EvolutionState>,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    pub fn last_state(&self) -> &EvolutionState {
        self.states
            .last()
            .expect("trajectory has at least the initial state")
    }

    pub fn extinction(&self) -> Option<f64> {
        self.events.iter().find_map(|e| match e {
            TrajectoryEvent::Extinction { time } => Some(*time),
            _ => None,
        })
    }
}

/// Integration options.
#[derive(Debug, Clone, Copy)]
pub struct EvolveOpts {
    /// Base step; defaults to `t_end / 10^4`.
    pub dt: Option<f64>,
    /// Record every k-th accepted step (events and endpoints are always
    /// recorded).
    pub record_every: usize,
    /// Guard against runaway event cascades; defaults to `10 N`.
    pub max_events: Option<usize>,
}

impl Default for EvolveOpts {
    fn default() -> Self {
        EvolveOpts {
            dt: None,
            record_every: 1,
            max_events: None,
        }
    }
}

/// Relative per-step motion cap; steps moving any component further are
/// halved, which keeps the integrator resolved through near-singular
/// approaches to events.
const MOTION_CAP: f64 = 0.02;
const MAX_HALVINGS: u32 = 48;

struct Parts {
    radii: Vec<f64>,
    values: Vec<f64>, // length radii.len() + 1, last pinned to zero
}

fn rk4_parts(n: Dimension, p: &Parts, dt: f64) -> Result<Parts> {
    let count = p.radii.len();
    let dof = 2 * count; // radii + inner values (outer value pinned)
    let pattern = sign_pattern(&p.values);
    let pack = |p: &Parts| -> Vec<f64> {
        let mut y = Vec::with_capacity(dof);
        y.extend_from_slice(&p.radii);
        y.extend_from_slice(&p.values[..count]);
        y
    };
    let unpack = |y: &[f64]| -> Parts {
        let mut values = y[count..].to_vec();
        values.push(0.0);
        Parts {
            radii: y[..count].to_vec(),
            values,
        }
    };
    let f = |y: &[f64]| -> Result<Vec<f64>> {
        let parts = unpack(y);
        // an event function changing sign at an internal stage poisons the
        // stage combination (opposite-orientation speeds can cancel exactly),
        // so such trials are rejected and bisected instead
        if !state_valid(&parts, &pattern) {
            return Err(Error::Integration {
                t: f64::NAN,
                reason: "event crossing inside an integration stage".into(),
            });
        }
        let (lambdas, jumps) = speeds_from_parts(n, &parts.radii, &parts.values)?;
        let mut dy = Vec::with_capacity(dof);
        for k in 0..count {
            dy.push(jumps[k] / (parts.values[k] - parts.values[k + 1]));
        }
        dy.extend_from_slice(&lambdas[..count]);
        Ok(dy)
    };
    let y0 = pack(p);
    let add = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let k1 = f(&y0)?;
    let k2 = f(&add(&y0, &k1, dt / 2.0))?;
    let k3 = f(&add(&y0, &k2, dt / 2.0))?;
    let k4 = f(&add(&y0, &k3, dt))?;
    let mut y = y0;
    for i in 0..dof {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(unpack(&y))
}

/// Advance a non-planar stack state by one plain RK4 step of length `dt`.
///
/// The caller guarantees no event occurs inside the step; speeds are
/// re-derived from the current geometry at each internal stage.
pub fn step(state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!(
            "step length must be positive, got {dt}"
        )));
    }
    let stack = &state.stack;
    if stack.dimension().is_planar() {
        return Err(Error::Domain("step requires n != 2".into()));
    }
    let parts = Parts {
        radii: stack.radii().to_vec(),
        values: stack.values().to_vec(),
    };
    let next = rk4_parts(stack.dimension(), &parts, dt).map_err(|e| Error::Integration {
        t: state.t,
        reason: e.to_string(),
    })?;
    if next.radii.iter().any(|r| !r.is_finite()) || next.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            t: state.t,
            reason: "step produced a non-finite state".into(),
        });
    }
    Ok(EvolutionState::from_stack(
        state.t + dt,
        Stack::new(stack.dimension(), next.radii, next.values)?,
    ))
}

fn sign_pattern(values: &[f64]) -> Vec<bool> {
    values.windows(2).map(|w| w[0] > w[1]).collect()
}

fn state_valid(p: &Parts, pattern: &[bool]) -> bool {
    if p.radii.iter().any(|r| !r.is_finite()) || p.values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if !(p.radii[0] > 0.0) || p.radii.windows(2).any(|w| !(w[0] < w[1])) {
        return false;
    }
    sign_pattern(&p.values) == pattern
}

fn too_fast(old: &Parts, new: &Parts, r_scale: f64, a_scale: f64) -> bool {
    for (a, b) in old.radii.iter().zip(&new.radii) {
        if (a - b).abs() > MOTION_CAP * a.abs().max(1e-3 * r_scale) {
            return true;
        }
    }
    for (a, b) in old.values.iter().zip(&new.values) {
        if (a - b).abs() > MOTION_CAP * a_scale {
            return true;
        }
    }
    false
}

/// Smallest relative event margin: distance to the nearest of
/// `R^0 = 0`, `R^k = R^(k+1)`, `a^k = a^(k+1)`.
fn min_margin(p: &Parts, r_scale: f64, a_scale: f64) -> f64 {
    let mut m = p.radii[0] / r_scale;
    for w in p.radii.windows(2) {
        m = m.min((w[1] - w[0]) / r_scale);
    }
    for w in p.values.windows(2) {
        m = m.min((w[0] - w[1]).abs() / a_scale);
    }
    m
}

/// Remove the element realizing the smallest margin, then sweep the rest.
/// Used when time cannot advance further in double precision: the state is
/// pinned against its event and the crossing is resolved in place.
fn rebuild_nearest(
    p: &mut Parts,
    t: f64,
    r_scale: f64,
    a_scale: f64,
    events: &mut Vec<TrajectoryEvent>,
) {
    let mut best = (p.radii[0] / r_scale, 0usize, 0u8);
    for (k, w) in p.radii.windows(2).enumerate() {
        let m = (w[1] - w[0]) / r_scale;
        if m < best.0 {
            best = (m, k, 1);
        }
    }
    for (k, w) in p.values.windows(2).enumerate() {
        let m = (w[0] - w[1]).abs() / a_scale;
        if m < best.0 {
            best = (m, k, 2);
        }
    }
    match best.2 {
        0 => {
            p.radii.remove(0);
            p.values.remove(0);
            events.push(TrajectoryEvent::InnerCollapse { time: t });
        }
        1 => {
            p.radii.remove(best.1 + 1);
            p.values.remove(best.1 + 1);
            events.push(TrajectoryEvent::FacetMerge {
                index: best.1,
                time: t,
            });
        }
        _ => {
            p.values.remove(best.1);
            p.radii.remove(best.1);
            events.push(TrajectoryEvent::FacetMerge {
                index: best.1,
                time: t,
            });
        }
    }
    rebuild(p, t, r_scale, a_scale, events);
}

/// Remove degenerate elements from a raw state, reporting the events.
/// `u` changes only on a set of vanishing measure, so trajectories stay
/// continuous in `L¹` across the rebuild.
fn rebuild(p: &mut Parts, t: f64, r_scale: f64, a_scale: f64, events: &mut Vec<TrajectoryEvent>) {
    let tol_r = 1e-9 * r_scale;
    let tol_a = 1e-9 * a_scale;
    loop {
        if p.radii.is_empty() {
            break;
        }
        if p.radii[0] <= tol_r {
            p.radii.remove(0);
            p.values.remove(0);
            events.push(TrajectoryEvent::InnerCollapse { time: t });
            continue;
        }
        if let Some(k) = p.radii.windows(2).position(|w| w[1] - w[0] <= tol_r) {
            // the annular region between interfaces k and k+1 vanished
            p.radii.remove(k + 1);
            p.values.remove(k + 1);
            events.push(TrajectoryEvent::FacetMerge { index: k, time: t });
            continue;
        }
        if let Some(k) = p
            .values
            .windows(2)
            .position(|w| (w[0] - w[1]).abs() <= tol_a)
        {
            p.values.remove(k);
            p.radii.remove(k);
            events.push(TrajectoryEvent::FacetMerge { index: k, time: t });
            continue;
        }
        break;
    }
    if p.radii.is_empty() {
        events.push(TrajectoryEvent::Extinction { time: t });
        p.values = vec![0.0];
    } else {
        // keep the zero tail exact
        let last = p.values.len() - 1;
        p.values[last] = 0.0;
    }
}

/// Integrate a non-planar stack to `t_end` with event detection.
///
/// Classical fixed-step RK4 with three refinements: trial steps that move
/// any component more than the 2% motion cap are halved (resolving the
/// near-singular approach to events), trial steps that cross an event
/// function are bisected to time tolerance `1e-10 t_end`, and states whose
/// smallest event margin drops below `1e-11` (relative) trigger the rebuild
/// directly — that last rule catches tangential contacts, where heights
/// meet with vanishing speed and no sign change ever occurs.
pub fn evolve(stack: &Stack, t_end: f64, opts: &EvolveOpts) -> Result<Trajectory> {
    if stack.dimension().is_planar() {
        return Err(Error::Domain(
            "evolve requires n != 2; use evolve_n2 for planar stacks".into(),
        ));
    }
    if !(t_end > 0.0) {
        return Err(Error::Domain(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if let Some(dt) = opts.dt {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
    }
    let n = stack.dimension();
    let dt0 = opts.dt.unwrap_or(t_end / 1e4);
    let record_every = opts.record_every.max(1);
    let max_events = opts.max_events.unwrap_or(10 * stack.jumps());
    let r_scale = *stack.radii().last().unwrap();
    let a_scale = stack
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let margin_tol = 1e-11;
    let time_tol = 1e-10 * t_end;
    let dt_floor = dt0 * 2f64.powi(-(MAX_HALVINGS as i32));

    let mut parts = Parts {
        radii: stack.radii().to_vec(),
        values: stack.values().to_vec(),
    };
    let mut t = 0.0;
    let mut events = Vec::new();
    let mut states = vec![EvolutionState::from_stack(0.0, stack.clone())];
    let mut accepted: usize = 0;

    'outer: while t < t_end * (1.0 - 1e-14) {
        if parts.radii.is_empty() {
            break;
        }
        let pattern = sign_pattern(&parts.values);
        let mut h = dt0.min(t_end - t);
        let mut halvings = 0u32;
        loop {
            if t + h == t {
                // time cannot advance in double precision: the state is
                // pinned against its event; resolve it in place
                rebuild_nearest(&mut parts, t, r_scale, a_scale, &mut events);
                if events.len() > max_events {
                    return Err(Error::Integration {
                        t,
                        reason: format!("event cascade exceeded {max_events} events"),
                    });
                }
                push_state(&mut states, n, t, &parts);
                if parts.radii.is_empty() {
                    break 'outer;
                }
                break;
            }
            let trial = match rk4_parts(n, &parts, h) {
                Ok(tr) if state_valid(&tr, &pattern) => Some(tr),
                _ => None,
            };
            match trial {
                Some(tr) => {
                    if too_fast(&parts, &tr, r_scale, a_scale) && halvings < MAX_HALVINGS {
                        h /= 2.0;
                        halvings += 1;
                        continue;
                    }
                    parts = tr;
                    t += h;
                    accepted += 1;
                    if min_margin(&parts, r_scale, a_scale) < margin_tol {
                        push_state(&mut states, n, t, &parts);
                        rebuild(&mut parts, t, r_scale, a_scale, &mut events);
                        if events.len() > max_events {
                            return Err(Error::Integration {
                                t,
                                reason: format!("event cascade exceeded {max_events} events"),
                            });
                        }
                        push_state(&mut states, n, t, &parts);
                        if parts.radii.is_empty() {
                            break 'outer;
                        }
                    } else if accepted % record_every == 0 {
                        push_state(&mut states, n, t, &parts);
                    }
                    break;
                }
                None => {
                    // event inside (t, t + h]: bisect to the crossing
                    if h > dt_floor.max(time_tol) {
                        let (mut lo, mut hi) = (0.0f64, h);
                        while hi - lo > time_tol {
                            let mid = 0.5 * (lo + hi);
                            match rk4_parts(n, &parts, mid) {
                                Ok(tr) if state_valid(&tr, &pattern) => lo = mid,
                                _ => hi = mid,
                            }
                        }
                        if lo > 0.0 {
                            parts = rk4_parts(n, &parts, lo)?;
                        }
                        t += hi;
                    } else {
                        t += h;
                    }
                    // record the pre-event state so trajectories expose the
                    // (vanishing) jump across the rebuild
                    push_state(&mut states, n, t, &parts);
                    // the crossing is localized to within the time tolerance,
                    // so the nearest margin names the event even if it has
                    // not numerically collapsed yet
                    rebuild_nearest(&mut parts, t, r_scale, a_scale, &mut events);
                    if events.len() > max_events {
                        return Err(Error::Integration {
                            t,
                            reason: format!("event cascade exceeded {max_events} events"),
                        });
                    }
                    push_state(&mut states, n, t, &parts);
                    if parts.radii.is_empty() {
                        break 'outer;
                    }
                    break;
                }
            }
        }
    }
    if states.last().map(|s| s.t) != Some(t) {
        push_state(&mut states, n, t, &parts);
    }
    Ok(Trajectory { states, events })
}

fn push_state(states: &mut Vec<EvolutionState>, n: Dimension, t: f64, parts: &Parts) {
    let stack = Stack::raw(n, parts.radii.clone(), parts.values.clone());
    states.push(EvolutionState::from_stack(t, stack));
}
