//! `tvflow` — calibrations and facet dynamics of the radial fourth-order
//! total variation flow.

mod output;
mod scenario;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tvflow_core::calibration::{
    classify, compute_qstar, m_function, GeneralizedAnnulus, Sign, SignatureSpec,
};
use tvflow_core::radial::Dimension;
use tvflow_core::stack::{evolve, evolve_n2, EvolveOpts, Trajectory};
use tvflow_core::verify::{run_suite, Suite};

use output::{fmt_f64, write_events_json, write_profile_csv, write_trajectory_csv};
use scenario::ScenarioFile;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_NOT_CALIBRABLE: u8 = 3;
const EXIT_INTEGRATION_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "tvflow",
    about = "Radial fourth-order total variation flow: calibrations, calibrability, facet dynamics",
    after_help = "Exit codes: 0 success; 1 verification failure; 2 invalid input; \
                  3 domain not calibrable; 4 integration failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the calibration boundary-value problem on a generalized annulus
    /// and report admissibility.  Use --r0 0 for a ball, --r1 inf for the
    /// complement of a ball.
    Calibrate {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        r0: f64,
        /// Outer radius; "inf" selects the complement of a ball.
        #[arg(long, value_parser = parse_radius)]
        r1: f64,
        /// Boundary signature: "const" (same sign on both boundaries) or
        /// "nonconst".
        #[arg(long, default_value = "const")]
        signature: String,
        /// Sample count for the optional z(r) table.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        /// Write the z(r) samples to this CSV file instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the critical outer/inner radius ratio for planar annuli.
    Qstar {
        /// Also print a table of the threshold function m(Q).
        #[arg(long, default_value_t = 0)]
        table: usize,
    },
    /// Evolve a scenario file and write trajectory, profile and event data.
    Evolve {
        /// Scenario JSON path.
        #[arg(long)]
        scenario: PathBuf,
        /// Output file prefix (files PREFIX_trajectory.csv,
        /// PREFIX_profile_K.csv, PREFIX_events.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suites and print one line per check.
    Verify {
        /// all | calibration | dynamics | oracle
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn parse_radius(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Calibrate {
            n,
            r0,
            r1,
            signature,
            samples,
            csv,
        } => cmd_calibrate(n, r0, r1, &signature, samples, csv.as_deref()),
        Command::Qstar { table } => cmd_qstar(table),
        Command::Evolve { scenario, out } => cmd_evolve(&scenario, &out),
        Command::Verify { suite } => cmd_verify(&suite),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}

fn cmd_calibrate(
    n: u32,
    r0: f64,
    r1: f64,
    signature: &str,
    samples: usize,
    csv: Option<&std::path::Path>,
) -> Result<u8> {
    let n = Dimension::new(n)?;
    let domain = GeneralizedAnnulus::new(n, r0, r1)?;
    let sig = match (domain.kind(), signature) {
        (tvflow_core::calibration::AnnulusKind::Ball, _) => SignatureSpec::ball(Sign::Minus),
        (tvflow_core::calibration::AnnulusKind::ComplementOfBall, _) => {
            SignatureSpec::complement(Sign::Plus)
        }
        (_, "const") => SignatureSpec::constant(),
        (_, "nonconst") => SignatureSpec::non_constant(),
        (_, other) => return Err(anyhow!("unknown signature {other:?}")),
    };
    let verdict = classify(&domain, sig)?;
    println!(
        "domain: {:?}, n = {}, R0 = {r0}, R1 = {r1}",
        domain.kind(),
        n
    );
    println!("calibrable: {} ({:?})", verdict.calibrable, verdict.reason);
    if let Some(c) = &verdict.witness {
        let co = c.profile.coefficients();
        println!(
            "basis: {:?}; coefficients: c0 = {}, c1 = {}, c2 = {}, c3 = {}",
            c.profile.basis(),
            fmt_f64(co[0]),
            fmt_f64(co[1]),
            fmt_f64(co[2]),
            fmt_f64(co[3])
        );
        println!("lambda: {}", fmt_f64(c.lambda));
        println!(
            "sup |z|: {} at r = {}",
            fmt_f64(c.admissibility.sup_abs_z),
            fmt_f64(c.admissibility.argmax)
        );
        println!(
            "boundary residuals: {:?}",
            c.admissibility.bc_residuals.map(fmt_f64)
        );
        if !verdict.calibrable {
            println!("note: profile violates |z| <= 1; emitted for inspection only");
        }
        if samples > 0 {
            let (lo, hi) = c.profile.domain();
            let lo = if lo == 0.0 { 1e-3 * hi.min(1e3) } else { lo };
            let hi = if hi.is_infinite() {
                10.0 * lo.max(1.0)
            } else {
                hi
            };
            let mut table = String::from("r,z\n");
            for i in 0..samples {
                let r = lo + (hi - lo) * i as f64 / (samples.max(2) - 1) as f64;
                let z = c.profile.z(r).unwrap_or(f64::NAN);
                table.push_str(&format!("{},{}\n", fmt_f64(r), fmt_f64(z)));
            }
            match csv {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
        }
    } else {
        println!("no candidate profile exists for this domain");
    }
    Ok(if verdict.calibrable {
        0
    } else {
        EXIT_NOT_CALIBRABLE
    })
}

fn cmd_qstar(table: usize) -> Result<u8> {
    let q = compute_qstar();
    println!("Q* = {q:.10}");
    println!("m(Q*) = {}", fmt_f64(m_function(q)));
    if table > 0 {
        println!("Q,m");
        for i in 0..table {
            let x = 1.0 + 29.0 * (i as f64 + 1.0) / table as f64;
            println!("{},{}", fmt_f64(x), fmt_f64(m_function(x)));
        }
    }
    Ok(0)
}

fn cmd_evolve(scenario_path: &std::path::Path, out: &std::path::Path) -> Result<u8> {
    let scenario = ScenarioFile::load(scenario_path)?;
    let stack = scenario.stack()?;
    let n = stack.dimension();
    let record_every = match scenario.dt {
        Some(dt) => ((scenario.t_end / dt / 4000.0).ceil() as usize).max(1),
        None => 2,
    };
    let opts = EvolveOpts {
        dt: scenario.dt,
        record_every,
        max_events: None,
    };
    let result: Result<Trajectory, tvflow_core::Error> = if n.is_planar() {
        evolve_n2(&stack, scenario.t_end, &opts)
    } else {
        evolve(&stack, scenario.t_end, &opts)
    };
    let traj = match result {
        Ok(t) => t,
        Err(err) => {
            eprintln!("integration failed: {err}");
            return Ok(EXIT_INTEGRATION_FAILED);
        }
    };

    let closed = if scenario.is_ball() {
        Some((n, scenario.values[0], scenario.radii[0]))
    } else {
        None
    };
    let prefix = out.to_string_lossy();
    write_trajectory_csv(
        &PathBuf::from(format!("{prefix}_trajectory.csv")),
        &traj,
        closed,
    )?;
    write_events_json(
        &PathBuf::from(format!("{prefix}_events.json")),
        &traj.events,
    )?;

    let r_max_all = traj
        .states
        .iter()
        .flat_map(|s| s.stack.radii().iter().copied())
        .fold(scenario.radii.iter().cloned().fold(0.0, f64::max), f64::max);
    for (k, &t_snap) in scenario.outputs.iter().enumerate() {
        let state = traj
            .states
            .iter()
            .min_by(|a, b| {
                (a.t - t_snap)
                    .abs()
                    .partial_cmp(&(b.t - t_snap).abs())
                    .unwrap()
            })
            .ok_or_else(|| anyhow!("empty trajectory"))?;
        write_profile_csv(
            &PathBuf::from(format!("{prefix}_profile_{k}.csv")),
            state,
            1.5 * r_max_all,
        )?;
    }
    println!(
        "evolved to t = {} with {} recorded states and {} events",
        fmt_f64(traj.last_state().t),
        traj.states.len(),
        traj.events.len()
    );
    Ok(0)
}

fn cmd_verify(suite: &str) -> Result<u8> {
    let suite = Suite::parse(suite).ok_or_else(|| anyhow!("unknown suite {suite:?}"))?;
    let results = run_suite(suite);
    let mut failures = 0usize;
    for r in &results {
        println!(
            "{} {} — {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
        if !r.pass {
            failures += 1;
        }
    }
    let summary = serde_json::json!({
        "checks": results.len(),
        "failures": failures,
        "pass": failures == 0,
    });
    println!("{summary}");
    Ok(if failures == 0 { 0 } else { EXIT_VERIFY_FAILED })
}
