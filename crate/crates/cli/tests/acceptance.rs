//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p tvflow-cli --test acceptance -- --nocapture` to
//! see the per-criterion lines.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;
use tvflow_core::ball::{ball_mass, evolve_ball, extinction_time, first_integral, BallEvolution};
use tvflow_core::calibration::{
    classify, compute_qstar, m_function, solve_annulus, solve_ball, solve_complement,
    GeneralizedAnnulus, Sign, SignatureSpec,
};
use tvflow_core::oracle::{bvp_solve, fd_ode_residual, rk4, BoundaryData, GridFunction};
use tvflow_core::radial::{Dimension, RadialProfile};
use tvflow_core::stack::{evolve, EvolveOpts, Stack};
use tvflow_core::verify::{
    constant_signature_coeffs, non_constant_signature_coeffs, random_stack, Rng,
};

fn dim(n: u32) -> Dimension {
    Dimension::new(n).unwrap()
}

struct Criterion {
    name: &'static str,
    failures: Vec<String>,
    started: Instant,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion {
            name,
            failures: Vec::new(),
            started: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Fn() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self, budget: Option<f64>) {
        let elapsed = self.started.elapsed().as_secs_f64();
        let mut failures = self.failures;
        if let Some(b) = budget {
            if elapsed >= b {
                failures.push(format!("runtime {elapsed:.2}s exceeded budget {b}s"));
            }
        }
        if failures.is_empty() {
            println!("ACCEPTANCE {}: PASS ({elapsed:.2}s)", self.name);
        } else {
            println!("ACCEPTANCE {}: FAIL ({elapsed:.2}s)", self.name);
            for f in &failures {
                println!("    {f}");
            }
            panic!("{} failed: {:?}", self.name, failures);
        }
    }
}

fn grid_residual_max(profile: &RadialProfile) -> f64 {
    let (lo, hi) = profile.domain();
    let lo = if lo == 0.0 { 1e-4 * hi.min(1e4) } else { lo };
    let hi = if hi.is_infinite() { 1e3 * lo } else { hi };
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let r = lo * (hi / lo).powf((i as f64 + 0.5) / 100.0);
        worst = worst.max(profile.ode_residual(r).unwrap().abs());
    }
    worst
}

#[test]
fn c1_critical_ratio() {
    let mut c = Criterion::new("C1 critical-ratio");
    let q = compute_qstar();
    c.check((9.6..=9.8).contains(&q), || {
        format!("Q* = {q} outside [9.6, 9.8]")
    });
    c.check(q > 3.0, || format!("Q* = {q} not above 3"));
    c.check(m_function(q).abs() <= 1e-10, || {
        format!("m(Q*) = {:e}", m_function(q))
    });
    c.finish(Some(0.1));
}

#[test]
fn c2_calibration_correctness() {
    let mut c = Criterion::new("C2 calibration-correctness");
    // balls n = 1..7
    for n in 1..=7u32 {
        let cal = solve_ball(dim(n), 1.0).unwrap();
        c.check(
            cal.admissibility
                .bc_residuals
                .iter()
                .all(|r| r.abs() <= 1e-12),
            || format!("ball n = {n} boundary residuals"),
        );
        c.check(cal.admissibility.sup_abs_z <= 1.0 + 1e-10, || {
            format!("ball n = {n} sup")
        });
        let res = grid_residual_max(&cal.profile);
        c.check(res <= 1e-9 * (1.0 + cal.lambda.abs()), || {
            format!("ball n = {n} residual {res:e}")
        });
    }
    // complements n in {1,3,4,5,6}
    for n in [1u32, 3, 4, 5, 6] {
        let v = solve_complement(dim(n), 1.0).unwrap();
        let cal = v.witness.unwrap();
        c.check(
            cal.admissibility
                .bc_residuals
                .iter()
                .all(|r| r.abs() <= 1e-12),
            || format!("complement n = {n} boundary residuals"),
        );
        c.check(cal.admissibility.sup_abs_z <= 1.0 + 1e-10, || {
            format!("complement n = {n} sup")
        });
        let res = grid_residual_max(&cal.profile);
        c.check(res <= 1e-9, || {
            format!("complement n = {n} residual {res:e}")
        });
    }
    // 50 random annuli, both signatures, against the closed-form tables
    let mut rng = Rng::new(0xacc_e97);
    for case in 0..50 {
        let n = [1u32, 3, 4, 5, 6, 7][(case * 7 + 3) % 6];
        let q = rng.uniform(1.02, 50.0);
        let r1 = rng.uniform(0.5, 3.0);
        for sig in [SignatureSpec::constant(), SignatureSpec::non_constant()] {
            let v = solve_annulus(dim(n), r1 / q, r1, sig).unwrap();
            let cal = v.witness.unwrap();
            c.check(
                cal.admissibility
                    .bc_residuals
                    .iter()
                    .all(|r| r.abs() <= 1e-12),
                || format!("annulus case {case} n = {n} boundary residuals"),
            );
            c.check(cal.admissibility.sup_abs_z <= 1.0 + 1e-10, || {
                format!(
                    "annulus case {case} n = {n} sup {}",
                    cal.admissibility.sup_abs_z
                )
            });
            let res = grid_residual_max(&cal.profile);
            c.check(res <= 1e-9 * (1.0 + cal.lambda.abs()), || {
                format!("annulus case {case} n = {n} residual {res:e}")
            });
            let reference = if sig == SignatureSpec::constant() {
                constant_signature_coeffs(dim(n), q, r1)
            } else {
                non_constant_signature_coeffs(dim(n), q, r1)
            };
            let scale = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in 0..4 {
                let rel = (cal.profile.coefficients()[j] - reference[j]).abs() / scale;
                c.check(rel <= 1e-8, || {
                    format!("case {case} n = {n} Q = {q:.3} c{j} rel {rel:e}")
                });
            }
        }
    }
    c.finish(Some(5.0));
}

#[test]
fn c3_classification_table() {
    let mut c = Criterion::new("C3 classification-table");
    for n in 1..=7u32 {
        let ball = GeneralizedAnnulus::ball(dim(n), 1.3).unwrap();
        c.check(
            classify(&ball, SignatureSpec::ball(Sign::Minus))
                .unwrap()
                .calibrable,
            || format!("ball n = {n}"),
        );
        let comp = GeneralizedAnnulus::new(dim(n), 0.8, f64::INFINITY).unwrap();
        let verdict = classify(&comp, SignatureSpec::complement(Sign::Plus)).unwrap();
        c.check(verdict.calibrable == (n != 2), || {
            format!("complement n = {n}")
        });
        let ann = GeneralizedAnnulus::new(dim(n), 1.0, 7.0).unwrap();
        let verdict = classify(&ann, SignatureSpec::non_constant()).unwrap();
        c.check(verdict.calibrable == (n != 2), || {
            format!("non-constant annulus n = {n}")
        });
    }
    // planar constant signature on a 1000-point ratio grid
    let qstar = compute_qstar();
    let points = 1000usize;
    let cell = 29.0 / points as f64;
    let mut flip: Option<f64> = None;
    let mut prev = true;
    for i in 0..points {
        let q = 1.0 + cell * (i as f64 + 1.0);
        let verdict = solve_annulus(dim(2), 1.0, q, SignatureSpec::constant()).unwrap();
        c.check(verdict.calibrable == (q <= qstar), || {
            format!("verdict at Q = {q} disagrees with Q <= Q*")
        });
        if prev && !verdict.calibrable {
            flip = Some(q);
        }
        prev = verdict.calibrable;
    }
    c.check(
        flip.map(|q| (q - qstar).abs() <= cell).unwrap_or(false),
        || format!("verdict flip at {flip:?} not within one cell of {qstar}"),
    );
    c.finish(None);
}

#[test]
fn c4_ball_dynamics() {
    let mut c = Criterion::new("C4 ball-dynamics");
    for n in [3u32, 4, 5, 6] {
        let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
        let stack = Stack::new(dim(n), vec![1.0], vec![1.0, 0.0]).unwrap();
        let traj = evolve(&stack, 1.2 * tstar, &EvolveOpts::default()).unwrap();
        match traj.extinction() {
            Some(te) => c.check(((te - tstar) / tstar).abs() <= 1e-4, || {
                format!("n = {n} extinction {te} vs {tstar}")
            }),
            None => c.check(false, || format!("n = {n}: extinction not detected")),
        }
        if n == 4 {
            let drift = traj
                .states
                .iter()
                .filter(|s| s.stack.jumps() == 1)
                .map(|s| (s.stack.radii()[0] - 1.0).abs())
                .fold(0.0f64, f64::max);
            c.check(drift <= 1e-10, || format!("n = 4 radius drift {drift:e}"));
        }
    }
    // n = 3 radius growth at 0.9 t*
    let tstar = 1.0 / 6.0;
    let stack = Stack::new(dim(3), vec![1.0], vec![1.0, 0.0]).unwrap();
    let traj = evolve(&stack, 0.9 * tstar, &EvolveOpts::default()).unwrap();
    let r_end = traj.last_state().stack.radii()[0];
    c.check(r_end > 3.0, || format!("n = 3 radius {r_end} not above 3"));
    let expect = 0.1f64.powf(-0.5);
    c.check((r_end - expect).abs() <= 1e-3 * expect, || {
        format!("n = 3 radius {r_end} vs closed form {expect}")
    });
    // first integrals along closed-form trajectories
    for n in [1u32, 2, 3, 4, 5, 6] {
        let tstar = extinction_time(dim(n), 1.0, 1.0).unwrap();
        let horizon = if tstar.is_finite() {
            0.98 * tstar
        } else {
            10.0
        };
        for i in 1..=50 {
            let t = horizon * i as f64 / 50.0;
            if let BallEvolution::Alive(s) = evolve_ball(dim(n), 1.0, 1.0, t).unwrap() {
                let dev = first_integral(dim(n), 1.0, 1.0, &s).abs();
                c.check(dev <= 1e-10, || {
                    format!("n = {n} first integral {dev:e} at t = {t}")
                });
            }
        }
    }
    c.finish(Some(10.0));
}

#[test]
fn c5_low_dimensional_conservation() {
    let mut c = Criterion::new("C5 low-n-conservation");
    for n in [1u32, 2] {
        let m0 = ball_mass(&evolve_ball(dim(n), 1.0, 1.0, 0.0).unwrap().state().unwrap());
        for i in 0..=100 {
            let t = 10.0 * i as f64 / 100.0;
            let s = evolve_ball(dim(n), 1.0, 1.0, t).unwrap().state().unwrap();
            let drift = (ball_mass(&s) - m0).abs() / m0.abs();
            c.check(drift <= 1e-6, || {
                format!("n = {n} mass drift {drift:e} at t = {t}")
            });
            if n == 2 && t > 0.0 {
                let gap = s.a - t / s.r.powi(3);
                c.check(gap > 0.0, || format!("gap {gap} at t = {t}"));
            }
        }
    }
    c.finish(None);
}

#[test]
fn c6_oracle_equivalence() {
    let mut c = Criterion::new("C6 oracle-equivalence");
    // RK4 against the closed forms
    let traj = rk4(
        |_t, y| {
            let (a, r) = (y[0], y[1]);
            vec![-15.0 / (r * r * r), 3.0 / (r * r * a)]
        },
        &[1.0, 1.0],
        0.0,
        0.1,
        1e-5,
    )
    .unwrap();
    let (_, y) = traj.last().unwrap();
    let s = evolve_ball(dim(3), 1.0, 1.0, 0.1).unwrap().state().unwrap();
    let err = (y[0] - s.a).abs().max((y[1] - s.r).abs());
    c.check(err <= 1e-7, || format!("ball system error {err:e}"));
    let traj = rk4(
        |t, y| {
            let (a, r) = (y[0], y[1]);
            vec![-8.0 / (r * r * r), 3.0 * r / (a * r * r * r - t)]
        },
        &[1.0, 1.0],
        0.0,
        1.0,
        1e-5,
    )
    .unwrap();
    let (_, y) = traj.last().unwrap();
    let s = evolve_ball(dim(2), 1.0, 1.0, 1.0).unwrap().state().unwrap();
    let err = (y[0] - s.a).abs().max((y[1] - s.r).abs());
    c.check(err <= 1e-7, || format!("planar system error {err:e}"));

    // RK4 convergence order >= 3.9
    let reference = evolve_ball(dim(3), 1.0, 1.0, 0.1).unwrap().state().unwrap();
    let dts = [2e-3, 1e-3, 5e-4, 2.5e-4];
    let mut errs = Vec::new();
    for &dt in &dts {
        let traj = rk4(
            |_t, y| {
                let (a, r) = (y[0], y[1]);
                vec![-15.0 / (r * r * r), 3.0 / (r * r * a)]
            },
            &[1.0, 1.0],
            0.0,
            0.1,
            dt,
        )
        .unwrap();
        let (_, y) = traj.last().unwrap();
        errs.push((y[0] - reference.a).abs().max((y[1] - reference.r).abs()));
    }
    let slope = (0..dts.len() - 1)
        .map(|i| (errs[i] / errs[i + 1]).ln() / (dts[i] / dts[i + 1]).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    c.check(slope >= 3.9, || format!("RK4 order {slope}"));

    // finite-difference residual order >= 1.9 under grid refinement
    let cal = solve_ball(dim(3), 1.0).unwrap();
    let sizes = [50usize, 100, 200, 400];
    let mut res = Vec::new();
    for &m in &sizes {
        let grid: Vec<f64> = (0..=m).map(|i| 0.1 + 0.8 * i as f64 / m as f64).collect();
        let g = GridFunction::sample(grid, |r| cal.profile.z(r).unwrap()).unwrap();
        res.push(fd_ode_residual(&g, dim(3), cal.lambda).unwrap());
    }
    let slope = (0..sizes.len() - 1)
        .map(|i| (res[i] / res[i + 1]).ln() / (sizes[i + 1] as f64 / sizes[i] as f64).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    c.check(slope >= 1.9, || {
        format!("fd residual order {slope} ({res:?})")
    });

    // cross-path: oracle solve vs calibration solve
    let mut rng = Rng::new(0x0c0ffee);
    for _ in 0..100 {
        let n = [1u32, 2, 3, 4, 5, 6, 7][(rng.uniform(0.0, 7.0) as usize).min(6)];
        let q = rng.uniform(1.05, 30.0);
        let r1 = rng.uniform(0.5, 3.0);
        let v = solve_annulus(dim(n), r1 / q, r1, SignatureSpec::constant()).unwrap();
        let cal = v.witness.unwrap();
        let o = bvp_solve(
            dim(n),
            r1 / q,
            r1,
            BoundaryData {
                z_inner: 1.0,
                z_outer: -1.0,
            },
        )
        .unwrap();
        let scale = cal
            .profile
            .coefficients()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 0..4 {
            let rel = (o.coeffs[j] - cal.profile.coefficients()[j]).abs() / scale;
            c.check(rel <= 1e-10, || {
                format!("cross-path n = {n} Q = {q:.2} c{j} {rel:e}")
            });
        }
    }
    c.finish(None);
}

// ---------------------------------------------------------------------------
// criterion 7: profile snapshot reproduction through the CLI
// ---------------------------------------------------------------------------

fn run_evolve(dir: &Path, name: &str, scenario: &str) -> PathBuf {
    let scenario_path = dir.join(format!("{name}.json"));
    std::fs::write(&scenario_path, scenario).unwrap();
    let prefix = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_tvflow"))
        .args([
            "evolve",
            "--scenario",
            scenario_path.to_str().unwrap(),
            "--out",
            prefix.to_str().unwrap(),
        ])
        .status()
        .expect("tvflow runs");
    assert!(status.success(), "evolve {name} failed");
    prefix
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let raw = std::fs::read_to_string(path).unwrap_or_else(|_| panic!("read {path:?}"));
    let mut lines = raw.lines();
    let header: Vec<String> = lines
        .next()
        .expect("header")
        .split(',')
        .map(|s| s.to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let idx = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("column {name} in {header:?}"));
    rows.iter().map(|r| r[idx]).collect()
}

fn monotone(xs: &[f64], increasing: bool, tol: f64) -> bool {
    xs.windows(2).all(|w| {
        if increasing {
            w[1] >= w[0] - tol
        } else {
            w[1] <= w[0] + tol
        }
    })
}

#[test]
fn c7_snapshot_reproduction() {
    let mut c = Criterion::new("C7 snapshot-reproduction");
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // ball runs for n = 1..6 at reference snapshot times
    let ball_times: [(u32, [f64; 4]); 6] = [
        (1, [0.0, 0.8, 1.6, 2.4]),
        (2, [0.0, 0.1, 0.2, 0.3]),
        (3, [0.0, 0.04, 0.08, 0.12]),
        (4, [0.0, 0.01, 0.02, 0.03]),
        (5, [0.0, 0.005, 0.01, 0.015]),
        (6, [0.0, 0.005, 0.01, 0.015]),
    ];
    for (n, times) in ball_times {
        let scenario = format!(
            r#"{{"n":{n},"kind":"ball","radii":[1.0],"values":[1.0],"t_end":{},"outputs":[{},{},{},{}]}}"#,
            times[3], times[0], times[1], times[2], times[3]
        );
        let prefix = run_evolve(dir, &format!("ball{n}"), &scenario);
        let (header, rows) = read_csv(&PathBuf::from(format!(
            "{}_trajectory.csv",
            prefix.to_string_lossy()
        )));
        let heights = column(&header, &rows, "a0");
        let radii = column(&header, &rows, "R0");
        c.check(monotone(&heights, false, 1e-12), || {
            format!("n = {n}: heights not decreasing")
        });
        match n {
            1 | 2 | 3 => c.check(monotone(&radii, true, 1e-12), || {
                format!("n = {n}: radius not increasing")
            }),
            4 => c.check(radii.iter().all(|r| (r - 1.0).abs() <= 1e-10), || {
                format!("n = 4: radius not constant")
            }),
            _ => c.check(monotone(&radii, false, 1e-12), || {
                format!("n = {n}: radius not decreasing")
            }),
        }
        // closed-form columns must track the integrator
        let ac = column(&header, &rows, "a_closed");
        let worst = heights
            .iter()
            .zip(&ac)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        c.check(worst <= 1e-5, || {
            format!("n = {n}: closed-form gap {worst:e}")
        });
        // the planar tail carries u = t/r³ beyond the facet
        if n == 2 {
            let (h, rows) = read_csv(&PathBuf::from(format!(
                "{}_profile_3.csv",
                prefix.to_string_lossy()
            )));
            let t = column(&h, &rows, "t")[0];
            let rs = column(&h, &rows, "r");
            let us = column(&h, &rows, "u");
            let r_facet = *radii.last().unwrap();
            let mut checked = 0;
            for (r, u) in rs.iter().zip(&us) {
                if *r > 1.1 * r_facet {
                    let expect = t / (r * r * r);
                    c.check((u - expect).abs() <= 1e-4, || {
                        format!("n = 2 tail at r = {r}: {u} vs {expect}")
                    });
                    checked += 1;
                }
            }
            c.check(checked > 10, || "n = 2 tail unsampled".to_string());
        }
    }

    // annulus runs (characteristic function of {1 < |x| < 2})
    for (n, t_end) in [(1u32, 0.075), (2, 0.03), (3, 0.018), (4, 0.012), (5, 0.009)] {
        let scenario = format!(
            r#"{{"n":{n},"kind":"stack","radii":[1.0,2.0],"values":[0.0,1.0,0.0],"t_end":{t_end},"outputs":[0.0,{t_end}]}}"#
        );
        let prefix = run_evolve(dir, &format!("annulus{n}"), &scenario);
        let (header, rows) = read_csv(&PathBuf::from(format!(
            "{}_trajectory.csv",
            prefix.to_string_lossy()
        )));
        let a1 = column(&header, &rows, "a1");
        c.check(monotone(&a1, false, 1e-12), || {
            format!("annulus n = {n}: height not decaying")
        });
        let a0 = column(&header, &rows, "a0");
        c.check(a0.last().unwrap() > &0.0, || {
            format!("annulus n = {n}: hole not filling")
        });
        let r1 = column(&header, &rows, "R1");
        c.check(r1.last().unwrap() > &2.0, || {
            format!("annulus n = {n}: outer radius did not grow")
        });
        if n != 2 {
            let r0 = column(&header, &rows, "R0");
            c.check(r0.last().unwrap() < &1.0, || {
                format!("annulus n = {n}: inner radius did not shrink")
            });
        }
    }

    // the planar thick annulus: bending appears, is consumed, and the final
    // snapshot is a stack again within height tolerance 1e-3
    let scenario = r#"{"n":2,"kind":"stack","radii":[1.0,20.0],"values":[0.0,1.0,0.0],"t_end":6.0,"outputs":[0.0,2.0,4.0,6.0]}"#;
    let prefix = run_evolve(dir, "thick", scenario);
    let events: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(format!("{}_events.json", prefix.to_string_lossy())).unwrap(),
    )
    .unwrap();
    let kinds: Vec<&str> = events
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    c.check(kinds.contains(&"bending_transition"), || {
        format!("no bending transition in {kinds:?}")
    });
    let (h, rows) = read_csv(&PathBuf::from(format!(
        "{}_profile_3.csv",
        prefix.to_string_lossy()
    )));
    let t = column(&h, &rows, "t")[0];
    c.check((t - 6.0).abs() <= 1e-6, || {
        format!("final snapshot at t = {t}")
    });
    let rs = column(&h, &rows, "r");
    let us = column(&h, &rows, "u");
    // within 1e-3, the profile is a single plateau followed by zero
    let plateau = us[rs.iter().position(|&r| r > 5.0).unwrap()];
    for (r, u) in rs.iter().zip(&us) {
        if *r < 19.9 {
            c.check((u - plateau).abs() <= 1e-3, || {
                format!("bending remains at r = {r}: u = {u} vs plateau {plateau}")
            });
        }
        if *r > 21.0 {
            c.check(u.abs() <= 1e-3, || {
                format!("tail too large at r = {r}: {u}")
            });
        }
    }
    c.check(plateau > 0.9, || {
        format!("plateau {plateau} unexpectedly low")
    });
    c.finish(None);
}

#[test]
fn c8_property_suite() {
    let mut c = Criterion::new("C8 property-suite");
    let mut rng = Rng::new(0x9a9a_57ac);
    for n in [1u32, 3, 4, 5] {
        for case in 0..20 {
            let stack = random_stack(&mut rng, dim(n), 4);
            let opts = EvolveOpts {
                record_every: 5,
                ..EvolveOpts::default()
            };
            let traj = match evolve(&stack, 0.05, &opts) {
                Ok(t) => t,
                Err(e) => {
                    c.check(false, || format!("n = {n} case {case}: {e}"));
                    continue;
                }
            };
            // TV energy never increases
            let mut prev_tv = f64::INFINITY;
            for state in &traj.states {
                let tv = state.tv();
                c.check(tv <= prev_tv * (1.0 + 1e-8) + 1e-12, || {
                    format!("n = {n} case {case}: TV rose to {tv} at t = {}", state.t)
                });
                prev_tv = tv;
            }
            // continuity across events: equal-time pre/post pairs differ by
            // at most the grid tolerance in L¹
            let r_span = 1.5 * stack.radii().last().unwrap();
            for w in traj.states.windows(2) {
                if w[0].t != w[1].t || w[0].stack == w[1].stack {
                    continue;
                }
                let mut l1 = 0.0;
                let cells = 2000;
                for i in 0..cells {
                    let r = (i as f64 + 0.5) * r_span / cells as f64;
                    l1 += (w[0].value_at(r) - w[1].value_at(r)).abs()
                        * tvflow_core::sphere_area(dim(n), r)
                        * (r_span / cells as f64);
                }
                c.check(l1 <= 1e-6 * r_span.powi(n as i32 + 1), || {
                    format!("n = {n} case {case}: L¹ jump {l1:e} at t = {}", w[0].t)
                });
            }
        }
    }
    c.finish(Some(60.0));
}
