//! Planar (`n = 2`) stack evolution with bending regions.
//!
//! In the plane, complements of balls, annuli with non-constant signature,
//! and annuli with constant signature thicker than the critical ratio `Q*`
//! are not calibrable.  A stack therefore does not stay a stack: wherever a
//! facet cannot be calibrated the field saturates (`Z = ±x/|x|`) and the
//! profile bends pointwise with `u_t = σ/r³`.  The state becomes an
//! alternating arrangement of facets and bending regions:
//!
//! * the innermost region is always a ball facet (balls are calibrable);
//! * a constant-signature annulus facet thicker than `Q*` keeps only its
//!   outer part `[R/Q*, R]`, pinned at the critical ratio, with its inner
//!   boundary slaved to the outer one; the remainder bends;
//! * non-constant-signature annuli and the outer complement bend entirely.
//!
//! Bending regions are tracked by sampled `(r, u_entry, t_entry)` records:
//! a point entering a bending region at time `t_entry` with height `u_entry`
//! carries `u(t, r) = u_entry + σ (t - t_entry)/r³` until a facet absorbs it
//! again.  Facet boundaries move by the jump law
//! `dR/dt = d / (u⁻ - u⁺)` with `d` the jump of the radial derivative of
//! `div Z` (zero from the saturated side only through its `-σ_Z/r²` term),
//! and slaved boundaries move with their outer partner, peeling records into
//! the bending region below.  Outer regions never depend on inner ones, so a
//! single pass over the coupled system integrates everything.
//!
//! Layout changes (a bending region consumed, a facet ratio crossing `Q*`,
//! facets merging) are localized by bisection exactly like the non-planar
//! events, and the arrangement is rebuilt by re-applying the layout rule to
//! the current state.  Applying that rule at positive times extrapolates the
//! initial-time construction: in particular, a facet whose ratio reaches the
//! critical value mid-flight is re-split there (or rides the constraint with
//! its ratio clamped at `Q*`), which is the natural continuation rather than
//! a derived fact.

use super::{
    BendRecord, BendingProfile, EvolutionState, EvolveOpts, Stack, Trajectory, TrajectoryEvent,
};
use crate::calibration::{annulus_profile, ball_profile, compute_qstar, Sign};
use crate::error::{Error, Result};
use crate::radial::Dimension;

/// Initial record count per finite bending region.
const BEND_GRID: usize = 2048;
const MOTION_CAP: f64 = 0.02;
const MAX_HALVINGS: u32 = 48;

#[derive(Debug, Clone)]
enum LRegion {
    Facet { slaved_inner: bool },
    Bend(BendData),
}

#[derive(Debug, Clone)]
struct BendData {
    sigma: f64,
    records: Vec<BendRecord>,
    /// Entry data for radii beyond the last record (tail only).
    pristine: Option<(f64, f64)>,
    /// Grid scale of the region at creation; record insertion density for
    /// moving boundaries is anchored here so early micro-steps cannot force
    /// ever-denser sampling.
    base_cell: f64,
}

impl BendData {
    fn value_at(&self, t: f64, r: f64) -> f64 {
        let at = |rec: &BendRecord| rec.u_entry + self.sigma * (t - rec.t_entry) / rec.r.powi(3);
        if self.records.is_empty() {
            let (u_e, t_e) = self.pristine.unwrap_or((0.0, 0.0));
            return u_e + self.sigma * (t - t_e) / (r * r * r);
        }
        let first = &self.records[0];
        let last = self.records.last().unwrap();
        if r <= first.r {
            return at(first);
        }
        if r >= last.r {
            if let Some((u_e, t_e)) = self.pristine {
                return u_e + self.sigma * (t - t_e) / (r * r * r);
            }
            return at(last);
        }
        let idx = self.records.partition_point(|rec| rec.r < r);
        let (lo, hi) = (&self.records[idx - 1], &self.records[idx]);
        let w = (r - lo.r) / (hi.r - lo.r);
        (1.0 - w) * at(lo) + w * at(hi)
    }
}

/// Geometry of the arrangement: interface radii (one per adjacent region
/// pair) and facet heights, in region order.
#[derive(Debug, Clone, PartialEq)]
struct Geo {
    xs: Vec<f64>,
    vals: Vec<f64>,
}

struct Engine {
    n: Dimension,
    qstar: f64,
    regions: Vec<LRegion>,
    geo: Geo,
    t: f64,
    r_scale: f64,
    a_scale: f64,
}

/// Indices helping map between regions and geometry entries.
impl Engine {
    fn facet_index(&self, region: usize) -> usize {
        self.regions[..region]
            .iter()
            .filter(|r| matches!(r, LRegion::Facet { .. }))
            .count()
    }

    fn region_span(&self, region: usize) -> (f64, f64) {
        let lo = if region == 0 {
            0.0
        } else {
            self.geo.xs[region - 1]
        };
        let hi = if region == self.regions.len() - 1 {
            f64::INFINITY
        } else {
            self.geo.xs[region]
        };
        (lo, hi)
    }
}

fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let ratio = (hi / lo).powf(1.0 / (count as f64 - 1.0));
    let mut rs = Vec::with_capacity(count);
    let mut r = lo;
    for i in 0..count {
        if i == count - 1 {
            r = hi;
        }
        rs.push(r);
        r *= ratio;
    }
    rs
}

fn bend_from_span(sigma: f64, lo: f64, hi: f64, u_entry: f64, t: f64, grid: usize) -> BendData {
    let records = geometric_grid(lo, hi, grid)
        .into_iter()
        .map(|r| BendRecord {
            r,
            u_entry,
            t_entry: t,
        })
        .collect();
    BendData {
        sigma,
        records,
        pristine: None,
        base_cell: ((hi - lo) / grid.max(2) as f64).max(1e-12 * hi),
    }
}

/// Apply the layout rule to a stack at time `t`.
fn layout_from_stack(stack: &Stack, t: f64, qstar: f64) -> (Vec<LRegion>, Geo) {
    let radii = stack.radii();
    let values = stack.values();
    let count = radii.len();
    let mut regions = Vec::new();
    let mut xs = Vec::new();
    let mut vals = Vec::new();

    regions.push(LRegion::Facet {
        slaved_inner: false,
    });
    vals.push(values[0]);
    xs.push(radii[0]);

    for k in 1..count {
        let chi_in = Sign::of(values[k - 1] - values[k]);
        let chi_out = Sign::of(values[k + 1] - values[k]);
        let (lo, hi) = (radii[k - 1], radii[k]);
        if chi_in != chi_out {
            // monotone through: bends entirely
            regions.push(LRegion::Bend(bend_from_span(
                chi_in.as_f64(),
                lo,
                hi,
                values[k],
                t,
                BEND_GRID,
            )));
            xs.push(hi);
        } else if hi / lo <= qstar * (1.0 + 1e-12) {
            regions.push(LRegion::Facet {
                slaved_inner: false,
            });
            vals.push(values[k]);
            xs.push(hi);
        } else {
            // too thick: inner part bends, outer part survives at ratio Q*
            let split = hi / qstar;
            regions.push(LRegion::Bend(bend_from_span(
                chi_in.as_f64(),
                lo,
                split,
                values[k],
                t,
                BEND_GRID,
            )));
            xs.push(split);
            regions.push(LRegion::Facet { slaved_inner: true });
            vals.push(values[k]);
            xs.push(hi);
        }
    }

    // outer complement always bends
    let sigma_tail = Sign::of(values[count - 1] - values[count]).as_f64();
    let tail_r = radii[count - 1];
    regions.push(LRegion::Bend(BendData {
        sigma: sigma_tail,
        records: Vec::new(),
        pristine: Some((0.0, t)),
        base_cell: tail_r / BEND_GRID as f64,
    }));

    (regions, Geo { xs, vals })
}

/// Rates of change of every geometry entry (slaved interfaces included,
/// derived from their outer partner).
fn geo_rates(n: Dimension, qstar: f64, t: f64, regions: &[LRegion], geo: &Geo) -> Result<Geo> {
    let m = regions.len();
    let span = |i: usize| -> (f64, f64) {
        let lo = if i == 0 { 0.0 } else { geo.xs[i - 1] };
        let hi = if i == m - 1 { f64::INFINITY } else { geo.xs[i] };
        (lo, hi)
    };
    // facet heights per region index
    let mut facet_val = vec![f64::NAN; m];
    {
        let mut fi = 0;
        for (i, reg) in regions.iter().enumerate() {
            if matches!(reg, LRegion::Facet { .. }) {
                facet_val[i] = geo.vals[fi];
                fi += 1;
            }
        }
    }
    let value_at = |i: usize, r: f64| -> f64 {
        match &regions[i] {
            LRegion::Facet { .. } => facet_val[i],
            LRegion::Bend(b) => b.value_at(t, r),
        }
    };

    // per-region calibration data: facet speed and grad(div Z) at boundaries
    let mut lambda = vec![0.0; m];
    let mut gd_in = vec![0.0; m];
    let mut gd_out = vec![0.0; m];
    for (i, reg) in regions.iter().enumerate() {
        let (lo, hi) = span(i);
        match reg {
            LRegion::Bend(b) => {
                // saturated field: grad div = σ_u / r²
                if lo > 0.0 {
                    gd_in[i] = b.sigma / (lo * lo);
                }
                if hi.is_finite() {
                    gd_out[i] = b.sigma / (hi * hi);
                }
            }
            LRegion::Facet { slaved_inner } => {
                if lo == 0.0 {
                    let chi = Sign::of(value_at(i + 1, hi) - facet_val[i]);
                    let (profile, lam) = ball_profile(n, hi, chi)?;
                    lambda[i] = lam;
                    gd_out[i] = profile.eval(hi)?.grad_div;
                } else {
                    let (chi_in, chi_out) = if *slaved_inner {
                        let sigma_below = match &regions[i - 1] {
                            LRegion::Bend(b) => b.sigma,
                            LRegion::Facet { .. } => {
                                return Err(Error::Integration {
                                    t,
                                    reason: "slaved facet without bending region below".into(),
                                })
                            }
                        };
                        let chi = Sign::of(sigma_below);
                        (chi, chi)
                    } else {
                        (
                            Sign::of(value_at(i - 1, lo) - facet_val[i]),
                            Sign::of(value_at(i + 1, hi) - facet_val[i]),
                        )
                    };
                    if chi_in != chi_out {
                        return Err(Error::Integration {
                            t,
                            reason: "planar annulus facet with non-constant signature".into(),
                        });
                    }
                    let lo_eff = if *slaved_inner { hi / qstar } else { lo };
                    let (profile, lam) = annulus_profile(n, lo_eff, hi, chi_in, chi_out)?;
                    lambda[i] = lam;
                    gd_in[i] = profile.eval(lo_eff)?.grad_div;
                    gd_out[i] = profile.eval(hi)?.grad_div;
                }
            }
        }
    }

    // interface speeds: jump law; slaved interfaces follow their partner
    let mut xdot = vec![0.0; geo.xs.len()];
    for i in (0..geo.xs.len()).rev() {
        let x = geo.xs[i];
        if matches!(regions[i + 1], LRegion::Facet { slaved_inner: true }) {
            // inner boundary of a marginal facet: x_i = x_(i+1) / Q*
            xdot[i] = xdot[i + 1] / qstar;
            continue;
        }
        let u_lo = value_at(i, x);
        let u_hi = value_at(i + 1, x);
        let d = gd_out[i] - gd_in[i + 1];
        let gap = u_lo - u_hi;
        if gap == 0.0 {
            if d == 0.0 {
                // frozen interface between equally saturated regions
                xdot[i] = 0.0;
                continue;
            }
            return Err(Error::Integration {
                t,
                reason: format!("vanishing jump at interface r = {x}"),
            });
        }
        xdot[i] = d / gap;
    }

    let mut vdot = Vec::with_capacity(geo.vals.len());
    for (i, reg) in regions.iter().enumerate() {
        if matches!(reg, LRegion::Facet { .. }) {
            vdot.push(lambda[i]);
        }
    }
    Ok(Geo {
        xs: xdot,
        vals: vdot,
    })
}

fn pack(geo: &Geo, regions: &[LRegion]) -> Vec<f64> {
    let mut y = Vec::with_capacity(geo.xs.len() + geo.vals.len());
    for (i, &x) in geo.xs.iter().enumerate() {
        if !matches!(regions[i + 1], LRegion::Facet { slaved_inner: true }) {
            y.push(x);
        }
    }
    y.extend_from_slice(&geo.vals);
    y
}

fn unpack(y: &[f64], regions: &[LRegion], template: &Geo, qstar: f64) -> Geo {
    let mut xs = vec![0.0; template.xs.len()];
    let mut iy = 0;
    for i in 0..xs.len() {
        if !matches!(regions[i + 1], LRegion::Facet { slaved_inner: true }) {
            xs[i] = y[iy];
            iy += 1;
        }
    }
    // derive slaved interfaces from their outer partner (no chains: a slaved
    // facet's outer interface is always free)
    for i in (0..xs.len()).rev() {
        if matches!(regions[i + 1], LRegion::Facet { slaved_inner: true }) {
            xs[i] = xs[i + 1] / qstar;
        }
    }
    let vals = y[iy..].to_vec();
    Geo { xs, vals }
}

fn rk4_geo(
    n: Dimension,
    qstar: f64,
    t: f64,
    regions: &[LRegion],
    geo: &Geo,
    dt: f64,
) -> Result<Geo> {
    let y0 = pack(geo, regions);
    let pattern = gap_pattern(t, regions, geo);
    let f = |tt: f64, y: &[f64]| -> Result<Vec<f64>> {
        let g = unpack(y, regions, geo, qstar);
        // reject stages that straddle an event crossing; the caller bisects
        if !geo_valid(tt, regions, &g, qstar, &pattern) {
            return Err(Error::Integration {
                t: tt,
                reason: "event crossing inside an integration stage".into(),
            });
        }
        let rates = geo_rates(n, qstar, tt, regions, &g)?;
        Ok(pack(&rates, regions))
    };
    let add = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let k1 = f(t, &y0)?;
    let k2 = f(t + dt / 2.0, &add(&y0, &k1, dt / 2.0))?;
    let k3 = f(t + dt / 2.0, &add(&y0, &k2, dt / 2.0))?;
    let k4 = f(t + dt, &add(&y0, &k3, dt))?;
    let mut y = y0;
    for i in 0..y.len() {
        y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(unpack(&y, regions, geo, qstar))
}

/// Sign pattern of every interface jump (`u⁻ - u⁺`), for event detection.
fn gap_pattern(t: f64, regions: &[LRegion], geo: &Geo) -> Vec<bool> {
    let m = regions.len();
    let mut facet_val = vec![f64::NAN; m];
    let mut fi = 0;
    for (i, reg) in regions.iter().enumerate() {
        if matches!(reg, LRegion::Facet { .. }) {
            facet_val[i] = geo.vals[fi];
            fi += 1;
        }
    }
    let value_at = |i: usize, r: f64| -> f64 {
        match &regions[i] {
            LRegion::Facet { .. } => facet_val[i],
            LRegion::Bend(b) => b.value_at(t, r),
        }
    };
    geo.xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if matches!(regions[i + 1], LRegion::Facet { slaved_inner: true }) {
                true // slaved boundary is continuous; no jump to monitor
            } else {
                value_at(i, x) >= value_at(i + 1, x)
            }
        })
        .collect()
}

fn geo_valid(t: f64, regions: &[LRegion], geo: &Geo, qstar: f64, pattern: &[bool]) -> bool {
    if geo.xs.iter().any(|x| !x.is_finite()) || geo.vals.iter().any(|v| !v.is_finite()) {
        return false;
    }
    if !(geo.xs[0] > 0.0) || geo.xs.windows(2).any(|w| !(w[0] < w[1])) {
        return false;
    }
    // unslaved constant-signature facets must stay at or below the critical
    // ratio
    let mut fi = 0;
    for (i, reg) in regions.iter().enumerate() {
        if let LRegion::Facet { slaved_inner } = reg {
            if i > 0 && !slaved_inner {
                let lo = geo.xs[i - 1];
                let hi = geo.xs[i];
                if hi / lo > qstar * (1.0 + 1e-9) {
                    return false;
                }
            }
            fi += 1;
        }
    }
    let _ = fi;
    gap_pattern(t, regions, geo) == pattern
}

fn too_fast(old: &Geo, new: &Geo, r_scale: f64, a_scale: f64) -> bool {
    for (a, b) in old.xs.iter().zip(&new.xs) {
        if (a - b).abs() > MOTION_CAP * a.abs().max(1e-3 * r_scale) {
            return true;
        }
    }
    for (a, b) in old.vals.iter().zip(&new.vals) {
        if (a - b).abs() > MOTION_CAP * a_scale {
            return true;
        }
    }
    false
}

/// Structural margins: region widths (and the innermost radius), plus height
/// gaps across facet|facet interfaces.  Facet|bend gaps are excluded — they
/// legitimately ride arbitrarily close to zero without closing.
fn min_margin(regions: &[LRegion], geo: &Geo, r_scale: f64, a_scale: f64) -> f64 {
    let mut m = geo.xs[0] / r_scale;
    for w in geo.xs.windows(2) {
        m = m.min((w[1] - w[0]) / r_scale);
    }
    let mut fi = 0;
    let mut prev_facet: Option<(usize, f64)> = None;
    for (i, reg) in regions.iter().enumerate() {
        if matches!(reg, LRegion::Facet { .. }) {
            if let Some((j, v)) = prev_facet {
                if j + 1 == i {
                    m = m.min((v - geo.vals[fi]).abs() / a_scale);
                }
            }
            prev_facet = Some((i, geo.vals[fi]));
            fi += 1;
        }
    }
    m
}

impl Engine {
    fn new(stack: &Stack) -> Engine {
        let qstar = compute_qstar();
        let (regions, geo) = layout_from_stack(stack, 0.0, qstar);
        let r_scale = *stack.radii().last().unwrap();
        let a_scale = stack
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        Engine {
            n: stack.dimension(),
            qstar,
            regions,
            geo,
            t: 0.0,
            r_scale,
            a_scale,
        }
    }

    /// Transfer bending records across moved interfaces after an accepted
    /// step from geometry `old` (at time `t_old`) to the current geometry.
    fn shuffle_records(&mut self, old: &Geo, t_old: f64) {
        let t_new = self.t;
        for i in 0..self.geo.xs.len() {
            let x_old = old.xs[i];
            let x_new = self.geo.xs[i];
            if x_new == x_old {
                continue;
            }
            // facet height on whichever side is a facet (for peeled entries)
            let slaved_above = matches!(self.regions[i + 1], LRegion::Facet { slaved_inner: true });
            let left_facet_value = match &self.regions[i] {
                LRegion::Facet { .. } => Some(self.geo.vals[self.facet_index(i)]),
                _ => None,
            };
            let right_facet_value = match &self.regions[i + 1] {
                LRegion::Facet { .. } => Some(self.geo.vals[self.facet_index(i + 1)]),
                _ => None,
            };
            // left region loses or gains coverage at its top edge
            if let LRegion::Bend(b) = &mut self.regions[i] {
                if x_new < x_old {
                    // shrank: drop records above the new boundary
                    while b.records.last().map(|rec| rec.r > x_new).unwrap_or(false) {
                        b.records.pop();
                    }
                } else {
                    // grew: the newly covered span enters the bend now
                    let u_e = if slaved_above {
                        // peeled off the marginal facet, continuous there
                        right_facet_value.expect("slaved facet above")
                    } else {
                        b.value_at(t_new, x_old)
                    };
                    push_span_records(b, x_old, x_new, u_e, t_old, t_new);
                }
            }
            // right region mirrored at its bottom edge
            if let LRegion::Bend(b) = &mut self.regions[i + 1] {
                if x_new > x_old {
                    let keep = b.records.partition_point(|rec| rec.r < x_new);
                    b.records.drain(..keep);
                } else {
                    let u_e = match left_facet_value {
                        Some(v) => v,
                        None => b.value_at(t_new, x_old),
                    };
                    push_front_span_records(b, x_new, x_old, u_e, t_old, t_new);
                }
            }
        }
    }

    fn to_state(&self) -> EvolutionState {
        let mut radii = Vec::new();
        let mut values = Vec::new();
        let mut bending = Vec::new();
        for (i, reg) in self.regions.iter().enumerate() {
            let (lo, hi) = self.region_span(i);
            match reg {
                LRegion::Facet { .. } => {
                    values.push(self.geo.vals[self.facet_index(i)]);
                    radii.push(hi);
                }
                LRegion::Bend(b) => {
                    let mut records = b.records.clone();
                    // a slaved facet above peels continuously; pin the exact
                    // boundary value so reconstructions see no spurious jump
                    if let Some(LRegion::Facet { slaved_inner: true }) = self.regions.get(i + 1) {
                        let value = self.geo.vals[self.facet_index(i + 1)];
                        records.retain(|rec| rec.r < hi);
                        records.push(BendRecord {
                            r: hi,
                            u_entry: value,
                            t_entry: self.t,
                        });
                    }
                    bending.push(BendingProfile {
                        sigma: b.sigma,
                        r_in: lo,
                        r_out: hi,
                        records,
                        pristine: b.pristine,
                    });
                }
            }
        }
        // facet skeleton: each facet's value claims territory up to its own
        // outer boundary; bending spans override on evaluation
        values.push(0.0);
        let stack = Stack::raw(self.n, radii, values);
        EvolutionState {
            t: self.t,
            stack,
            bending,
        }
    }

    /// Re-apply the layout rules to the current arrangement, emitting the
    /// events performed.  Returns true when anything changed.  `tol_scale`
    /// loosens the collapse tolerances so that a crossing localized by
    /// bisection (which stops a time tolerance short of the exact event)
    /// still resolves.
    fn relayout(&mut self, events: &mut Vec<TrajectoryEvent>, tol_scale: f64) -> Result<bool> {
        let tol_r = 1e-9 * self.r_scale * tol_scale;
        let tol_a = 1e-9 * self.a_scale * tol_scale;
        let t = self.t;
        let mut changed = false;
        loop {
            let m = self.regions.len();
            // 1. innermost radius collapsed
            if m > 1 && self.geo.xs[0] <= tol_r {
                match self.regions[1] {
                    LRegion::Facet { .. } => {
                        self.regions.remove(0);
                        self.geo.xs.remove(0);
                        self.geo.vals.remove(0);
                        if let LRegion::Facet { slaved_inner } = &mut self.regions[0] {
                            *slaved_inner = false;
                        }
                        events.push(TrajectoryEvent::InnerCollapse { time: t });
                        changed = true;
                        continue;
                    }
                    LRegion::Bend(_) => {
                        return Err(Error::Integration {
                            t,
                            reason: "innermost facet collapsed onto a bending region".into(),
                        })
                    }
                }
            }
            // 2. zero-width region
            if let Some(i) =
                (0..m - 1).find(|&i| i + 1 < m - 1 && self.geo.xs[i + 1] - self.geo.xs[i] <= tol_r)
            {
                let region = i + 1;
                let was_bend = matches!(self.regions[region], LRegion::Bend(_));
                let under_slaved = was_bend
                    && matches!(
                        self.regions.get(region + 1),
                        Some(LRegion::Facet { slaved_inner: true })
                    );
                if !was_bend {
                    let fi = self.facet_index(region);
                    self.geo.vals.remove(fi);
                }
                self.regions.remove(region);
                if under_slaved {
                    // keep the slaved boundary's radius so the unslaved facet
                    // starts at the critical ratio exactly
                    self.geo.xs.remove(i);
                } else {
                    self.geo.xs.remove(i + 1);
                }
                // a consumed bending region unslaves the facet above
                if was_bend {
                    if let Some(LRegion::Facet { slaved_inner }) = self.regions.get_mut(region) {
                        *slaved_inner = false;
                    }
                    events.push(TrajectoryEvent::BendingTransition { time: t });
                } else {
                    events.push(TrajectoryEvent::FacetMerge { index: i, time: t });
                }
                changed = true;
                continue;
            }
            // 3. adjacent facets with equal heights merge
            let mut merged = false;
            for i in 0..self.regions.len().saturating_sub(1) {
                let (LRegion::Facet { .. }, LRegion::Facet { .. }) =
                    (&self.regions[i], &self.regions[i + 1])
                else {
                    continue;
                };
                let fi = self.facet_index(i);
                if (self.geo.vals[fi] - self.geo.vals[fi + 1]).abs() <= tol_a {
                    let inner_slaved = match self.regions[i] {
                        LRegion::Facet { slaved_inner } => slaved_inner,
                        _ => unreachable!(),
                    };
                    self.regions.remove(i + 1);
                    self.regions[i] = LRegion::Facet {
                        slaved_inner: inner_slaved,
                    };
                    let v = 0.5 * (self.geo.vals[fi] + self.geo.vals[fi + 1]);
                    self.geo.vals.remove(fi + 1);
                    self.geo.vals[fi] = v;
                    self.geo.xs.remove(i);
                    events.push(TrajectoryEvent::FacetMerge { index: i, time: t });
                    merged = true;
                    break;
                }
            }
            if merged {
                changed = true;
                continue;
            }
            // 4. facet admissibility: split too-thick constant-signature
            // facets; convert non-constant-signature facets to bending
            let mut converted = false;
            for i in 1..self.regions.len() - 1 {
                let LRegion::Facet { slaved_inner } = self.regions[i] else {
                    continue;
                };
                if slaved_inner {
                    continue;
                }
                let (lo, hi) = self.region_span(i);
                if lo == 0.0 {
                    continue; // balls are always calibrable
                }
                let fi = self.facet_index(i);
                let value = self.geo.vals[fi];
                let u_below = self.neighbor_value(i, lo, true);
                let u_above = self.neighbor_value(i, hi, false);
                let chi_in = Sign::of(u_below - value);
                let chi_out = Sign::of(u_above - value);
                if chi_in != chi_out {
                    // monotone through: the whole facet bends
                    self.regions[i] =
                        LRegion::Bend(bend_from_span(chi_in.as_f64(), lo, hi, value, t, BEND_GRID));
                    self.geo.vals.remove(fi);
                    events.push(TrajectoryEvent::BendingTransition { time: t });
                    converted = true;
                    break;
                }
                if hi / lo > self.qstar * (1.0 + 1e-12) {
                    let split = hi / self.qstar;
                    let grid = ((BEND_GRID as f64) * (split - lo) / (hi - lo)).ceil() as usize + 2;
                    self.regions.insert(
                        i,
                        LRegion::Bend(bend_from_span(
                            chi_in.as_f64(),
                            lo,
                            split,
                            value,
                            t,
                            grid.min(BEND_GRID),
                        )),
                    );
                    self.regions[i + 1] = LRegion::Facet { slaved_inner: true };
                    self.geo.xs.insert(i, split);
                    events.push(TrajectoryEvent::BendingTransition { time: t });
                    converted = true;
                    break;
                }
            }
            if converted {
                changed = true;
                continue;
            }
            break;
        }
        Ok(changed)
    }

    fn neighbor_value(&self, region: usize, at: f64, below: bool) -> f64 {
        let j = if below { region - 1 } else { region + 1 };
        match &self.regions[j] {
            LRegion::Facet { .. } => self.geo.vals[self.facet_index(j)],
            LRegion::Bend(b) => b.value_at(self.t, at),
        }
    }
}

/// Extend a bend's coverage at its top edge over `[from, to]`, interpolating
/// entry data across the swept span.  Insertion density is anchored to the
/// region's creation-time grid: a boundary moving less than one base cell
/// contributes at most one record per step, and a boundary sweeping several
/// cells gets intermediates (the resolution-refinement rule for fast
/// boundaries).
fn push_span_records(b: &mut BendData, from: f64, to: f64, u_to: f64, t_from: f64, t_to: f64) {
    if let Some(last) = b.records.last() {
        // coalesce micro-motions: the sliver between the last record and the
        // boundary evaluates by clamping until it spans a meaningful cell
        if to - last.r < b.base_cell / 8.0 {
            return;
        }
    }
    let u_from = b.value_at(t_from, from);
    let steps = (((to - from) / b.base_cell).ceil() as usize).clamp(1, 8);
    for k in 1..=steps {
        let w = k as f64 / steps as f64;
        b.records.push(BendRecord {
            r: from + w * (to - from),
            u_entry: u_from + w * (u_to - u_from),
            t_entry: t_from + w * (t_to - t_from),
        });
    }
}

/// Mirror of [`push_span_records`] for a bend growing at its bottom edge.
fn push_front_span_records(
    b: &mut BendData,
    to: f64,
    from: f64,
    u_to: f64,
    t_from: f64,
    t_to: f64,
) {
    if let Some(first) = b.records.first() {
        if first.r - to < b.base_cell / 8.0 {
            return;
        }
    }
    let u_from = b.value_at(t_from, from);
    let steps = (((from - to) / b.base_cell).ceil() as usize).clamp(1, 8);
    let mut new_records = Vec::with_capacity(steps + b.records.len());
    for k in (1..=steps).rev() {
        let w = k as f64 / steps as f64;
        new_records.push(BendRecord {
            r: from + w * (to - from),
            u_entry: u_from + w * (u_to - u_from),
            t_entry: t_from + w * (t_to - t_from),
        });
    }
    new_records.extend(b.records.drain(..));
    b.records = new_records;
}

/// Optional progress trace for long runs, enabled by `TVFLOW_TRACE=1`.
fn trace_step(engine: &Engine, accepted: usize, h: f64, states: usize) {
    if std::env::var_os("TVFLOW_TRACE").is_none() || accepted % 1000 != 0 {
        return;
    }
    let records: usize = engine
        .regions
        .iter()
        .map(|r| match r {
            LRegion::Bend(b) => b.records.len(),
            _ => 0,
        })
        .sum();
    eprintln!(
        "trace: accepted={accepted} t={:.6} h={h:.3e} records={records} states={states} regions={}",
        engine.t,
        engine.regions.len()
    );
}

/// Integrate a planar stack to `t_end`.
pub fn evolve_n2(stack: &Stack, t_end: f64, opts: &EvolveOpts) -> Result<Trajectory> {
    if !stack.dimension().is_planar() {
        return Err(Error::Domain(
            "evolve_n2 requires n = 2; use evolve otherwise".into(),
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
    let dt0 = opts.dt.unwrap_or(t_end / 1e4);
    let record_every = opts.record_every.max(1);
    let max_events = opts.max_events.unwrap_or(10 * stack.jumps().max(4));
    let time_tol = 1e-10 * t_end;
    let dt_floor = dt0 * 2f64.powi(-(MAX_HALVINGS as i32));

    let mut engine = Engine::new(stack);
    let mut events = Vec::new();
    let mut states = vec![engine.to_state()];
    let mut accepted: usize = 0;

    while engine.t < t_end * (1.0 - 1e-14) {
        let pattern = gap_pattern(engine.t, &engine.regions, &engine.geo);
        let mut h = dt0.min(t_end - engine.t);
        let mut halvings = 0u32;
        loop {
            if engine.t + h == engine.t {
                // pinned against an event at double-precision resolution
                let changed = engine.relayout(&mut events, 1e3)?;
                if !changed {
                    return Err(Error::Integration {
                        t: engine.t,
                        reason: "time stagnated without a resolvable event".into(),
                    });
                }
                states.push(engine.to_state());
                break;
            }
            let trial = match rk4_geo(
                engine.n,
                engine.qstar,
                engine.t,
                &engine.regions,
                &engine.geo,
                h,
            ) {
                Ok(g) if geo_valid(engine.t + h, &engine.regions, &g, engine.qstar, &pattern) => {
                    Some(g)
                }
                _ => None,
            };
            match trial {
                Some(g) => {
                    if too_fast(&engine.geo, &g, engine.r_scale, engine.a_scale)
                        && halvings < MAX_HALVINGS
                    {
                        h /= 2.0;
                        halvings += 1;
                        continue;
                    }
                    let old = std::mem::replace(&mut engine.geo, g);
                    let t_old = engine.t;
                    engine.t += h;
                    engine.shuffle_records(&old, t_old);
                    accepted += 1;
                    trace_step(&engine, accepted, h, states.len());
                    let mut recorded = false;
                    if min_margin(&engine.regions, &engine.geo, engine.r_scale, engine.a_scale)
                        < 1e-11
                    {
                        states.push(engine.to_state());
                        if engine.relayout(&mut events, 1.0)? {
                            states.push(engine.to_state());
                            recorded = true;
                        } else {
                            states.pop();
                        }
                    }
                    if !recorded && accepted % record_every == 0 {
                        states.push(engine.to_state());
                    }
                    break;
                }
                None => {
                    if h > dt_floor.max(time_tol) {
                        let (mut lo, mut hi) = (0.0f64, h);
                        while hi - lo > time_tol {
                            let mid = 0.5 * (lo + hi);
                            match rk4_geo(
                                engine.n,
                                engine.qstar,
                                engine.t,
                                &engine.regions,
                                &engine.geo,
                                mid,
                            ) {
                                Ok(g)
                                    if geo_valid(
                                        engine.t + mid,
                                        &engine.regions,
                                        &g,
                                        engine.qstar,
                                        &pattern,
                                    ) =>
                                {
                                    lo = mid
                                }
                                _ => hi = mid,
                            }
                        }
                        if lo > 0.0 {
                            let g = rk4_geo(
                                engine.n,
                                engine.qstar,
                                engine.t,
                                &engine.regions,
                                &engine.geo,
                                lo,
                            )?;
                            let old = std::mem::replace(&mut engine.geo, g);
                            let t_old = engine.t;
                            engine.t += lo;
                            engine.shuffle_records(&old, t_old);
                        }
                        engine.t += hi - lo;
                    } else {
                        engine.t += h;
                    }
                    // record the pre-event arrangement so reconstructions
                    // expose the (vanishing) jump across the relayout
                    states.push(engine.to_state());
                    let mut changed = false;
                    for tol_scale in [1.0, 1e2, 1e4, 1e6] {
                        if engine.relayout(&mut events, tol_scale)? {
                            changed = true;
                            break;
                        }
                    }
                    if !changed {
                        return Err(Error::Integration {
                            t: engine.t,
                            reason: "event detected but the layout did not change".into(),
                        });
                    }
                    if events.len() > max_events {
                        return Err(Error::Integration {
                            t: engine.t,
                            reason: format!("event cascade exceeded {max_events} events"),
                        });
                    }
                    states.push(engine.to_state());
                    break;
                }
            }
        }
    }
    if states.last().map(|s| s.t) != Some(engine.t) {
        states.push(engine.to_state());
    }
    Ok(Trajectory { states, events })
}
