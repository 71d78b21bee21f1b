use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hyqmom::closure::{close, spectral_decomposition_with_tol, ClosureSpec};
use hyqmom::moment_algebra::{
    format_f64, is_strictly_realizable, moments_to_recurrence, MomentVector, MAX_HALF_ORDER,
};
use hyqmom::sampling::{rng, RecurrenceSampler, StateSampler};
use hyqmom::solver::{run, RunConfig};
use hyqmom::stability::{certify, StabilityTolerances};
use hyqmom::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::RunManifest;
use crate::{Cli, ClosureFlags, Command, Format};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NOT_REALIZABLE: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;
pub const EXIT_REALIZABILITY_LOSS: u8 = 4;

/// Default directory for `simulate` when `--output-dir` is absent.
const SIMULATE_DIR: &str = "hyqmom-output";

pub const TRIVIAL_STABILITY: &str = "Condition (I)/(III) trivial: no relaxing block";

#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotRealizable { .. } => EXIT_NOT_REALIZABLE,
            Error::InternalConsistency(_) | Error::InconsistentClosure { .. } => EXIT_CERTIFICATION,
            Error::RealizabilityLoss { .. } => EXIT_REALIZABILITY_LOSS,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// What a command produced before anything is written.
struct Report {
    /// Printed to stdout and saved as the primary output file.
    body: String,
    code: u8,
    config: Value,
    summary: Value,
    /// Extra files as `(name, contents)`.
    files: Vec<(String, String)>,
}

impl Report {
    fn passed(&self) -> bool {
        self.code == 0
    }
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    let started = Instant::now();
    let (name, report) = match &cli.command {
        Command::Close {
            closure,
            gamma,
            moments,
        } => ("close", cmd_close(cli, closure, *gamma, moments)?),
        Command::Spectrum {
            moments,
            gamma,
            new_closure,
            check_interlacing,
        } => (
            "spectrum",
            cmd_spectrum(cli, moments, *gamma, *new_closure, *check_interlacing)?,
        ),
        Command::VerifyHyperbolicity {
            n,
            samples,
            gamma,
            min_gap,
        } => (
            "verify-hyperbolicity",
            cmd_verify_hyperbolicity(cli, *n, *samples, *gamma, *min_gap)?,
        ),
        Command::VerifyStability {
            n,
            samples,
            rho,
            velocity,
            theta,
        } => (
            "verify-stability",
            cmd_verify_stability(cli, *n, *samples, rho, velocity, theta)?,
        ),
        Command::Simulate { config } => ("simulate", cmd_simulate(cli, config)?),
    };

    print!("{}", report.body);
    let dir = match (&cli.output_dir, &cli.command) {
        (Some(d), _) => Some(d.clone()),
        (None, Command::Simulate { .. }) => Some(PathBuf::from(SIMULATE_DIR)),
        (None, _) => None,
    };
    if let Some(dir) = dir {
        write_outputs(cli, name, &report, &dir, started)?;
    }
    Ok(Outcome { code: report.code })
}

fn write_outputs(
    cli: &Cli,
    name: &str,
    report: &Report,
    dir: &Path,
    started: Instant,
) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::usage(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let ext = match cli.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let primary = format!("{name}.{ext}");
    fs::write(dir.join(&primary), &report.body).map_err(io)?;
    let mut outputs = vec![primary];
    for (file, contents) in &report.files {
        fs::write(dir.join(file), contents).map_err(io)?;
        outputs.push(file.clone());
    }
    let manifest = RunManifest::new(
        cli,
        name,
        report.config.clone(),
        outputs,
        report.code,
        report.passed(),
        report.summary.clone(),
        started.elapsed().as_secs_f64(),
    );
    fs::write(dir.join("manifest.json"), manifest.to_json()).map_err(io)?;
    Ok(())
}

fn parse_moments(text: &str) -> Result<MomentVector, Failure> {
    MomentVector::from_csv_row(text).map_err(|e| Failure::usage(format!("--moments: {e}")))
}

/// Exit-2 failure with the Hankel pivot report when `m` is not strictly
/// realizable at the given tolerance.
fn require_realizable(m: &MomentVector, tol: f64) -> Result<Vec<f64>, Failure> {
    let rep = is_strictly_realizable(m, tol)?;
    if let Some(k) = rep.failing_pivot {
        let pivots: Vec<String> = rep.pivots.iter().map(|p| format!("{p:e}")).collect();
        return Err(Failure {
            code: EXIT_NOT_REALIZABLE,
            message: format!(
                "moment vector is not strictly realizable: Hankel pivot {k} = {:e} is not above {:e} (= tol * M_0)\n  pivots: [{}]",
                rep.pivots[k],
                rep.threshold,
                pivots.join(", ")
            ),
        });
    }
    Ok(rep.pivots)
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn csv_line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

fn check_order(n: usize) -> Result<(), Failure> {
    if n == 0 || n > MAX_HALF_ORDER {
        return Err(Failure::usage(format!(
            "--n must be in 1..={MAX_HALF_ORDER}, got {n}"
        )));
    }
    Ok(())
}

fn cmd_close(
    cli: &Cli,
    flags: &ClosureFlags,
    gamma: f64,
    moments: &str,
) -> Result<Report, Failure> {
    let m = parse_moments(moments)?;
    let spec = if flags.qmom {
        ClosureSpec::Qmom
    } else if flags.hyqmom {
        ClosureSpec::hyqmom(gamma)
    } else {
        ClosureSpec::NewClosure
    };
    let pivots = require_realizable(&m, cli.tol)?;
    let value = close(&m, &spec)?;
    let rc = moments_to_recurrence(&m)?;
    let index = m.len();
    let body = match cli.format {
        Format::Json => to_json(&json!({
            "closure": spec.name(),
            "moments": m.values(),
            "closed_index": index,
            "closed_name": format!("M_{index}"),
            "closed_value": value,
            "recurrence": { "a": rc.a(), "b": rc.b() },
            "realizability": { "pivots": pivots, "tol": cli.tol },
        })),
        Format::Csv => {
            csv_line(&[
                "closure".into(),
                "closed_index".into(),
                "closed_value".into(),
            ]) + &csv_line(&[spec.name(), index.to_string(), format_f64(value)])
        }
    };
    Ok(Report {
        body,
        code: 0,
        config: json!({ "closure": spec.name(), "gamma": gamma, "moments": m.values() }),
        summary: json!({ "closed_index": index, "closed_value": value }),
        files: vec![],
    })
}

fn cmd_spectrum(
    cli: &Cli,
    moments: &str,
    gamma: f64,
    new_closure: bool,
    check_interlacing: bool,
) -> Result<Report, Failure> {
    let m = parse_moments(moments)?;
    let spec = if new_closure {
        ClosureSpec::NewClosure
    } else {
        ClosureSpec::hyqmom(gamma)
    };
    require_realizable(&m, cli.tol)?;
    let sd = spectral_decomposition_with_tol(&m, &spec, cli.tol)?;
    let diag = &sd.diagnostics;
    if diag.separation.near_degenerate {
        eprintln!(
            "warning: eigenvalues nearly coincide (min gap {:e}, spectral radius {:e})",
            diag.separation.min_gap, diag.separation.spectral_radius
        );
    }
    if diag.positivity_expected && !diag.weights_positive {
        eprintln!("warning: non-positive reconstruction weight");
    }
    let certified = !check_interlacing || diag.interlaced;
    let body = match cli.format {
        Format::Json => {
            let mut v = json!({
                "closure": spec.name(),
                "moments": m.values(),
                "eigenvalues": sd.lambda,
                "weights": sd.omega,
                "characteristic_coefficients": sd.c,
                "separation": diag.separation,
                "weights_positive": diag.weights_positive,
                "moment_residual": diag.moment_residual,
            });
            if check_interlacing {
                v["interlacing_certified"] = json!(diag.interlaced);
            }
            to_json(&v)
        }
        Format::Csv => {
            let mut s = csv_line(&["index".into(), "lambda".into(), "omega".into()]);
            for (i, (l, w)) in sd.lambda.iter().zip(&sd.omega).enumerate() {
                s += &csv_line(&[i.to_string(), format_f64(*l), format_f64(*w)]);
            }
            s
        }
    };
    Ok(Report {
        body,
        code: if certified { 0 } else { EXIT_CERTIFICATION },
        config: json!({
            "closure": spec.name(),
            "moments": m.values(),
            "check_interlacing": check_interlacing,
        }),
        summary: json!({
            "interlaced": diag.interlaced,
            "near_degenerate": diag.separation.near_degenerate,
            "weights_positive": diag.weights_positive,
        }),
        files: vec![],
    })
}

#[derive(Debug, Serialize)]
struct HyperbolicitySummary {
    n: usize,
    gamma: f64,
    samples: usize,
    seed: u64,
    min_gap: f64,
    failures: usize,
    /// Indices of the first failing samples.
    failed_samples: Vec<usize>,
    min_relative_gap: f64,
    max_moment_residual: f64,
    passed: bool,
}

const LISTED_FAILURES: usize = 20;

fn cmd_verify_hyperbolicity(
    cli: &Cli,
    n: usize,
    samples: usize,
    gamma: f64,
    min_gap: f64,
) -> Result<Report, Failure> {
    check_order(n)?;
    if !(gamma > -2.0 * n as f64) {
        return Err(Failure::usage(format!(
            "--gamma must exceed -2n = {}, got {gamma}",
            -2.0 * n as f64
        )));
    }
    let spec = ClosureSpec::hyqmom(gamma);
    let sampler = RecurrenceSampler::default();
    let mut r = rng(cli.seed);
    let mut failed = Vec::new();
    let mut min_rel = f64::INFINITY;
    let mut max_res = 0.0_f64;
    for i in 0..samples {
        let (_, m) = sampler.moments(&mut r, 2 * n + 1)?;
        let ok = match spectral_decomposition_with_tol(&m, &spec, cli.tol) {
            Ok(sd) => {
                let sep = sd.diagnostics.separation;
                let rel = sep.min_gap / sep.spectral_radius;
                min_rel = min_rel.min(rel);
                max_res = max_res.max(sd.diagnostics.moment_residual);
                sd.diagnostics.interlaced && rel > min_gap
            }
            Err(_) => false,
        };
        if !ok {
            failed.push(i);
        }
    }
    let failures = failed.len();
    failed.truncate(LISTED_FAILURES);
    let summary = HyperbolicitySummary {
        n,
        gamma,
        samples,
        seed: cli.seed,
        min_gap,
        failures,
        failed_samples: failed,
        min_relative_gap: min_rel,
        max_moment_residual: max_res,
        passed: failures == 0,
    };
    let body = match cli.format {
        Format::Json => to_json(&summary),
        Format::Csv => {
            csv_line(
                &[
                    "n",
                    "gamma",
                    "samples",
                    "seed",
                    "failures",
                    "min_relative_gap",
                    "max_moment_residual",
                    "passed",
                ]
                .map(String::from),
            ) + &csv_line(&[
                n.to_string(),
                format_f64(gamma),
                samples.to_string(),
                cli.seed.to_string(),
                failures.to_string(),
                format_f64(min_rel),
                format_f64(max_res),
                (failures == 0).to_string(),
            ])
        }
    };
    Ok(Report {
        body,
        code: if failures == 0 { 0 } else { EXIT_CERTIFICATION },
        config: json!({
            "n": n, "gamma": gamma, "samples": samples, "min_gap": min_gap,
            "sampler": sampler,
        }),
        summary: serde_json::to_value(&summary).expect("plain data"),
        files: vec![],
    })
}

fn parse_range(flag: &str, text: &str, positive: bool) -> Result<(f64, f64), Failure> {
    let bad = || {
        Failure::usage(format!(
            "--{flag}: expected LO,HI with LO < HI, got '{text}'"
        ))
    };
    let (lo, hi) = text.split_once(',').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    if positive && lo <= 0.0 {
        return Err(Failure::usage(format!(
            "--{flag}: range must be positive, got '{text}'"
        )));
    }
    Ok((lo, hi))
}

fn cmd_verify_stability(
    cli: &Cli,
    n: usize,
    samples: usize,
    rho: &str,
    velocity: &str,
    theta: &str,
) -> Result<Report, Failure> {
    check_order(n)?;
    let sampler = StateSampler {
        rho: parse_range("rho", rho, true)?,
        velocity: parse_range("velocity", velocity, false)?,
        theta: parse_range("theta", theta, true)?,
    };
    let config = json!({ "n": n, "samples": samples, "sampler": sampler });
    if n == 1 {
        let body = match cli.format {
            Format::Json => {
                to_json(&json!({ "n": 1, "trivial": true, "message": TRIVIAL_STABILITY }))
            }
            Format::Csv => format!("{TRIVIAL_STABILITY}\n"),
        };
        return Ok(Report {
            body,
            code: 0,
            config,
            summary: json!({ "trivial": true }),
            files: vec![],
        });
    }
    let tol = StabilityTolerances::default();
    let mut r = rng(cli.seed);
    let certs = (0..samples)
        .map(|_| certify(&sampler.sample(&mut r), n, &tol))
        .collect::<hyqmom::Result<Vec<_>>>()?;
    let failures = certs.iter().filter(|c| !c.passed).count();
    let body = match cli.format {
        Format::Json => to_json(&certs),
        Format::Csv => {
            let mut s = csv_line(
                &[
                    "n",
                    "rho",
                    "U",
                    "theta",
                    "symmetrizer_asymmetry",
                    "k_offblock_norm",
                    "condition_one_residual",
                    "spd_min_eigenvalue",
                    "passed",
                ]
                .map(String::from),
            );
            for c in &certs {
                let res = &c.residuals;
                s += &csv_line(&[
                    c.n.to_string(),
                    format_f64(c.state.rho),
                    format_f64(c.state.velocity),
                    format_f64(c.state.theta),
                    format_f64(res.symmetrizer_asymmetry),
                    format_f64(res.k_offblock_norm),
                    format_f64(res.condition_one_residual),
                    format_f64(res.spd_min_eigenvalue),
                    c.passed.to_string(),
                ]);
            }
            s
        }
    };
    if failures > 0 {
        eprintln!("{failures} of {samples} certificates failed");
    }
    Ok(Report {
        body,
        code: if failures == 0 { 0 } else { EXIT_CERTIFICATION },
        config,
        summary: json!({ "samples": samples, "failures": failures, "tolerances": tol }),
        files: vec![],
    })
}

fn cmd_simulate(cli: &Cli, path: &Path) -> Result<Report, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = RunConfig::from_json(&text).map_err(|e| Failure::usage(e.to_string()))?;
    let config = serde_json::to_value(&cfg).expect("plain data");
    let traj = match run(&cfg) {
        Ok(t) => t,
        Err(e @ Error::RealizabilityLoss { .. }) => {
            eprintln!("error: {e}");
            return Ok(Report {
                body: String::new(),
                code: EXIT_REALIZABILITY_LOSS,
                config,
                summary: json!({ "realizability_loss": e.to_string() }),
                files: vec![],
            });
        }
        Err(e) => return Err(e.into()),
    };

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (i, snap) in traj.snapshots.iter().enumerate() {
        let file = format!("snapshot_{i:04}.csv");
        files.push((file.clone(), snap.to_csv()));
        rows.push(json!({
            "file": file,
            "time": snap.time,
            "step": snap.step,
            "flagged_cells": snap.flagged_cells(),
        }));
    }
    let flagged: usize = traj.snapshots.iter().map(|s| s.flagged_cells()).sum();
    if flagged > 0 {
        eprintln!("warning: {flagged} cell snapshots flagged near the realizability boundary");
    }
    let final_time = traj.snapshots.last().map_or(0.0, |s| s.time);
    let summary = json!({
        "steps": traj.steps,
        "final_time": final_time,
        "all_realizable": true,
        "flagged_cells": flagged,
        "snapshots": rows,
    });
    let body = match cli.format {
        Format::Json => to_json(&summary),
        Format::Csv => {
            let mut s = csv_line(&["file", "time", "step", "flagged_cells"].map(String::from));
            for (i, snap) in traj.snapshots.iter().enumerate() {
                s += &csv_line(&[
                    format!("snapshot_{i:04}.csv"),
                    format_f64(snap.time),
                    snap.step.to_string(),
                    snap.flagged_cells().to_string(),
                ]);
            }
            s
        }
    };
    Ok(Report {
        body,
        code: 0,
        config,
        summary,
        files,
    })
}
