//! CSV and JSON emitters for evolution runs.
//!
//! CSV files carry a header row and '.'-decimal numbers printed with 17
//! significant digits, so every `f64` round-trips exactly.

use anyhow::{Context, Result};
use std::fmt::Write as _;
use std::path::Path;
use tvflow_core::ball::{evolve_ball, BallEvolution};
use tvflow_core::radial::Dimension;
use tvflow_core::stack::{EvolutionState, Trajectory, TrajectoryEvent};

/// Lossless float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory table: one row per recorded state while the facet count still
/// matches the initial stack (events that change the topology end the
/// table; later states appear in the profile snapshots and events file).
pub fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory,
    closed_form_ball: Option<(Dimension, f64, f64)>,
) -> Result<()> {
    let jumps0 = traj.states[0].stack.jumps();
    let mut out = String::new();
    out.push('t');
    for k in 0..=jumps0 {
        write!(out, ",a{k}").unwrap();
    }
    for k in 0..jumps0 {
        write!(out, ",R{k}").unwrap();
    }
    if closed_form_ball.is_some() {
        out.push_str(",a_closed,R_closed");
    }
    out.push('\n');
    let mut last_t = f64::NEG_INFINITY;
    for state in &traj.states {
        if state.stack.jumps() != jumps0 {
            break;
        }
        if state.t <= last_t {
            continue;
        }
        last_t = state.t;
        out.push_str(&fmt_f64(state.t));
        for v in state.stack.values() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for r in state.stack.radii() {
            out.push(',');
            out.push_str(&fmt_f64(*r));
        }
        if let Some((n, a0, r0)) = closed_form_ball {
            match evolve_ball(n, a0, r0, state.t).expect("valid ball data") {
                BallEvolution::Alive(s) => {
                    out.push(',');
                    out.push_str(&fmt_f64(s.a));
                    out.push(',');
                    out.push_str(&fmt_f64(s.r));
                }
                BallEvolution::Extinct => out.push_str(",0,0"),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Profile snapshot `(t, r, u)` with double points at jump radii so the
/// piecewise structure survives plotting.
pub fn write_profile_csv(path: &Path, state: &EvolutionState, r_max: f64) -> Result<()> {
    let mut radii: Vec<f64> = Vec::new();
    let lo = 1e-3 * r_max;
    let count = 512;
    for i in 0..=count {
        radii.push(lo + (r_max - lo) * i as f64 / count as f64);
    }
    for &r in state.stack.radii() {
        if r < r_max {
            radii.push(r * (1.0 - 1e-9));
            radii.push(r * (1.0 + 1e-9));
        }
    }
    for b in &state.bending {
        for rec in b.records.iter().step_by(4) {
            if rec.r > lo && rec.r < r_max {
                radii.push(rec.r);
            }
        }
        for edge in [b.r_in, b.r_out] {
            if edge.is_finite() && edge > lo && edge < r_max {
                radii.push(edge * (1.0 - 1e-9));
                radii.push(edge * (1.0 + 1e-9));
            }
        }
    }
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    let mut out = String::from("t,r,u\n");
    for r in radii {
        let u = state.value_at(r);
        writeln!(out, "{},{},{}", fmt_f64(state.t), fmt_f64(r), fmt_f64(u)).unwrap();
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_events_json(path: &Path, events: &[TrajectoryEvent]) -> Result<()> {
    let items: Vec<serde_json::Value> = events
        .iter()
        .map(|e| {
            let mut obj = serde_json::json!({
                "kind": e.kind_name(),
                "time": e.time(),
            });
            if let TrajectoryEvent::FacetMerge { index, .. } = e {
                obj["index"] = serde_json::json!(index);
            }
            obj
        })
        .collect();
    let doc = serde_json::to_string_pretty(&items)?;
    std::fs::write(path, doc).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [1.0 / 3.0, 9.7063113864034599, f64::MIN_POSITIVE, -1e300] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }
}
