use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sgsde_core::dynamics::{integrate_forward, integrate_forward_with, tail_envelopes, Trajectory};
use sgsde_core::gain::{EquilibriumCheck, FixedPointResult, GainOperator, InputProcess};
use sgsde_core::model::{small_gain_report, NormGrid, SmallGainReport};
use sgsde_core::stationary::{
    deterministic_equilibrium, drift_check, exact_density_1d, histogram_l1, lyapunov_covariance,
    mc_stationary, small_noise_concentration, DriftCheck,
};
use sgsde_core::NoisePath;

use crate::config::{InitialGuess, RunConfig};
use crate::error::CliError;
use crate::{json, presets};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Check,
    Simulate,
    Pullback,
    Equilibrium,
    Stationary,
    Example(String),
}

/// The document printed on standard output, and whether every comparison
/// in it passed (always true outside `example`).
#[derive(Debug, Clone)]
pub struct Outcome {
    pub document: Value,
    pub pass: bool,
}

impl Outcome {
    fn ok(document: Value) -> Self {
        Outcome {
            document,
            pass: true,
        }
    }
}

pub fn run_command(cmd: &Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    match cmd {
        Command::Check => check(cfg, out).map(Outcome::ok),
        Command::Simulate => simulate(cfg, out).map(Outcome::ok),
        Command::Pullback => pullback(cfg, out).map(Outcome::ok),
        Command::Equilibrium => {
            let path = cfg.noise_path(cfg.seeds.base)?;
            equilibrium(cfg, &path, out).map(|r| Outcome::ok(r.document))
        }
        Command::Stationary => stationary(cfg, out).map(Outcome::ok),
        Command::Example(id) => example(id, cfg, out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn missing(section: &str) -> CliError {
    CliError::config(
        section,
        "this command needs the section in the configuration",
    )
}

fn report(cfg: &RunConfig) -> Result<SmallGainReport, CliError> {
    Ok(small_gain_report(
        &cfg.spec,
        NormGrid {
            t_max: cfg.check.t_max,
            n_points: cfg.check.points,
        },
    )?)
}

fn drift(cfg: &RunConfig, out: &Path) -> Result<Option<DriftCheck>, CliError> {
    let Some(d) = cfg.drift else { return Ok(None) };
    let dc = drift_check(&cfg.spec, d.epsilon, d.radius, d.samples)?;
    json::write_file(&out.join("drift.json"), &dc)?;
    Ok(Some(dc))
}

fn check(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let r = report(cfg)?;
    json::write_file(&out.join("check.json"), &r)?;
    let dc = drift(cfg, out)?;
    Ok(json!({ "check": r, "drift": dc }))
}

fn simulate(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let s = cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?;
    let seeds = if cfg.noise_csv.is_some() {
        vec![cfg.seeds.base]
    } else {
        cfg.seed_list()
    };
    let runs: Vec<Result<(u64, Trajectory), CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let path = cfg.noise_path(seed)?;
            let tr = integrate_forward_with(&cfg.spec, path.view(), &s.x0, s.t0, s.t1, s.scheme)?;
            Ok((seed, tr))
        })
        .collect();
    let mut docs = Vec::new();
    for run in runs {
        let (seed, tr) = run?;
        let stem = if seeds.len() == 1 {
            "trajectory".to_string()
        } else {
            format!("trajectory_{seed}")
        };
        let csv = format!("{stem}.csv");
        tr.write_csv(create(&out.join(&csv))?)?;
        json::write_file(&out.join(format!("{stem}.json")), tr.meta())?;
        docs.push(json!({ "seed": tr.meta().seed, "csv": csv, "finalState": tr.final_state() }));
    }
    Ok(json!({ "runs": docs }))
}

#[derive(Serialize)]
struct Envelopes {
    state: sgsde_core::dynamics::TailEnvelope,
    output: sgsde_core::dynamics::TailEnvelope,
}

fn pullback(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let pb = cfg.pullback.as_ref().ok_or_else(|| missing("pullback"))?;
    let path = cfg.noise_path(cfg.seeds.base)?;
    let tr = integrate_forward(&cfg.spec, path.view(), &pb.x, -pb.t, 0.0)?;
    tr.write_csv(create(&out.join("pullback.csv"))?)?;
    let envelope = match pb.envelope {
        Some(e) => Some(Envelopes {
            state: tail_envelopes(&cfg.spec, path.view(), &pb.x, e.tau, e.horizon, false)?,
            output: tail_envelopes(&cfg.spec, path.view(), &pb.x, e.tau, e.horizon, true)?,
        }),
        None => None,
    };
    let doc = json!({
        "seed": path.seed(),
        "dt": path.dt(),
        "x": pb.x,
        "t": pb.t,
        "state": tr.final_state(),
        "envelope": envelope,
    });
    json::write_file(&out.join("pullback.json"), &doc)?;
    Ok(doc)
}

struct EquilibriumRun {
    result: FixedPointResult,
    check: Option<EquilibriumCheck>,
    document: Value,
}

fn equilibrium(cfg: &RunConfig, path: &NoisePath, out: &Path) -> Result<EquilibriumRun, CliError> {
    let opts = &cfg.equilibrium;
    let op = match opts.warmup {
        Some(w) => GainOperator::with_warmup(&cfg.spec, path, w)?,
        None => GainOperator::new(&cfg.spec, path)?,
    };
    let bound = cfg.spec.output().bound();
    let u0 = match opts.initial_guess {
        InitialGuess::H0 => None,
        InitialGuess::Zero => Some(InputProcess::constant(path, &vec![0.0; cfg.dim()], bound)?),
        InitialGuess::Bound => Some(InputProcess::constant(path, bound, bound)?),
    };
    let result = op.iterate_fixed_point(u0, opts.tol, opts.max_iter)?;
    let window = opts
        .window
        .clone()
        .unwrap_or_else(|| vec![0.0, path.t_fwd()]);
    let check = if window[1] > window[0] {
        Some(op.verify_equilibrium(
            &result,
            window[0],
            window[1],
            opts.initial_conditions.as_deref(),
        )?)
    } else {
        None
    };
    result.u_star.write_csv(create(&out.join("u_star.csv"))?)?;
    result
        .equilibrium
        .write_csv(create(&out.join("equilibrium.csv"))?)?;
    let document = json!({
        "seed": path.seed(),
        "dt": path.dt(),
        "tPast": path.t_past(),
        "tFwd": path.t_fwd(),
        "tol": opts.tol,
        "result": result.summary(),
        "verification": check,
    });
    json::write_file(&out.join("equilibrium.json"), &document)?;
    Ok(EquilibriumRun {
        result,
        check,
        document,
    })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn stationary(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let opts = cfg.mc_options(cfg.seeds.base);
    let est = mc_stationary(&cfg.spec, &opts)?;
    let mut hist_files = Vec::new();
    for (i, h) in est.histograms.iter().enumerate() {
        let name = format!("hist_{}.csv", i + 1);
        h.write_csv(create(&out.join(&name))?)?;
        hist_files.push(name);
    }
    let density = match cfg.stationary.density {
        Some(den) => {
            let a = cfg.spec.a()[(0, 0)];
            let sigma = cfg.spec.sigma().row(0).norm();
            let grid = exact_density_1d(
                a,
                cfg.spec.output(),
                sigma,
                &linspace(den.lo, den.hi, den.points),
            )?;
            grid.write_csv(create(&out.join("density.csv"))?)?;
            Some(json!({
                "csv": "density.csv",
                "normalization": grid.normalization,
                "histogramL1": histogram_l1(&grid, &est.histograms[0]),
            }))
        }
        None => None,
    };
    let concentration = match &cfg.concentration {
        Some(c) => {
            let (xbar, rows) = small_noise_concentration(&cfg.spec, &c.scales, &opts)?;
            let doc = json!({ "deterministicEquilibrium": xbar, "rows": rows });
            json::write_file(&out.join("concentration.json"), &doc)?;
            Some(doc)
        }
        None => None,
    };
    let doc = json!({
        "options": {
            "samples": opts.samples,
            "mode": opts.mode,
            "burnIn": opts.burn_in,
            "dt": opts.dt,
            "seed": opts.seed,
            "x0": opts.x0,
            "thin": opts.thin,
            "bins": opts.bins,
        },
        "samples": est.samples,
        "mean": est.mean,
        "covariance": est.covariance,
        "standardError": est.standard_error,
        "histograms": hist_files,
        "linearPartCovariance": lyapunov_covariance(cfg.spec.a(), cfg.spec.sigma())
            .ok()
            .map(|s| (0..s.nrows()).map(|i| s.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()),
        "deterministicEquilibrium": deterministic_equilibrium(&cfg.spec).ok(),
        "density": density,
        "concentration": concentration,
    });
    json::write_file(&out.join("stationary.json"), &doc)?;
    Ok(doc)
}

/// Agreement with a stated reference value.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct Comparison {
    quantity: String,
    reference: f64,
    computed: f64,
    rel_err: f64,
    tol: f64,
    pass: bool,
}

impl Comparison {
    fn new(quantity: impl Into<String>, reference: f64, computed: f64, tol: f64) -> Self {
        let rel_err = (computed - reference).abs() / reference.abs().max(f64::MIN_POSITIVE);
        Comparison {
            quantity: quantity.into(),
            reference,
            computed,
            rel_err,
            tol,
            pass: rel_err <= tol,
        }
    }
}

/// A qualitative claim or desk-scale surrogate bound.
#[derive(Debug, Clone, Serialize)]
struct Claim {
    name: String,
    value: Value,
    bound: String,
    pass: bool,
}

fn claim(name: &str, value: impl Serialize, bound: &str, pass: bool) -> Claim {
    Claim {
        name: name.into(),
        value: json!(value),
        bound: bound.into(),
        pass,
    }
}

const REFERENCE_TOL: f64 = 1e-9;

fn example(id: &str, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let id = presets::canonical(id).unwrap_or(id);
    let r = report(cfg)?;
    json::write_file(&out.join("check.json"), &r)?;
    let mut comparisons = Vec::new();
    let mut claims = Vec::new();
    let mut note = None;
    let mut equilibrium_doc = Value::Null;

    if let Some(reference) = presets::reference_values(id) {
        for (k, (&p, z)) in reference.eigenvalues.iter().zip(&r.eigenvalues).enumerate() {
            comparisons.push(Comparison::new(
                format!("eigenvalue[{k}]"),
                p,
                z[0],
                REFERENCE_TOL,
            ));
            claims.push(claim(
                &format!("eigenvalue[{k}].im"),
                z[1],
                "|im| <= 1e-9",
                z[1].abs() <= REFERENCE_TOL,
            ));
        }
        comparisons.push(Comparison::new(
            "gain",
            reference.gain,
            r.gain.unwrap_or(f64::NAN),
            REFERENCE_TOL,
        ));
        claims.push(claim("cooperative", r.cooperative, "true", r.cooperative));
        let ratio = r.norm_bound_max_ratio.unwrap_or(f64::INFINITY);
        claims.push(claim(
            "normBoundMaxRatio",
            ratio,
            "<= 1 + 1e-9",
            ratio <= 1.0 + REFERENCE_TOL,
        ));
        claims.push(claim(
            "smallGainOk",
            r.small_gain_ok,
            "true",
            r.small_gain_ok,
        ));

        let path = cfg.noise_path(cfg.seeds.base)?;
        let eq = equilibrium(cfg, &path, out)?;
        let g = eq.result.gain;
        claims.push(claim(
            "rateEstimate",
            eq.result.rate_estimate,
            "<= gain + 0.05",
            eq.result.rate_estimate <= g + 0.05,
        ));
        if let Some(c) = &eq.check {
            claims.push(claim(
                "maxDeviation",
                c.max_deviation,
                "< 5e-3",
                c.max_deviation < 5e-3,
            ));
            claims.push(claim(
                "pullbackGap",
                c.pullback_gap,
                "<= 1e-2",
                c.pullback_gap <= 1e-2,
            ));
        }
        equilibrium_doc = eq.document;
    } else {
        claims.push(claim("cooperative", r.cooperative, "false", !r.cooperative));
        claims.push(claim(
            "theoremApplies",
            r.theorem_applies,
            "false",
            !r.theorem_applies,
        ));
        let a = -cfg.spec.a()[(0, 0)];
        let l = cfg.spec.lipschitz();
        claims.push(claim(
            "lipschitzBelowA",
            json!({ "L": l, "a": a }),
            "L < a",
            l < a,
        ));
        note = Some(
            "A is not cooperative, so the trajectory small-gain theorem does not apply and the \
             fixed-point pipeline is skipped; the stationary law is covered by the drift condition",
        );
    }
    let dc = drift(cfg, out)?;
    if let Some(dc) = &dc {
        claims.push(claim("driftOk", dc.ok, "true", dc.ok));
    }
    let stationary_doc = stationary(cfg, out)?;

    let pass = comparisons.iter().all(|c| c.pass) && claims.iter().all(|c| c.pass);
    let doc = json!({
        "example": id,
        "pass": pass,
        "comparisons": comparisons,
        "claims": claims,
        "note": note,
        "check": r,
        "drift": dc,
        "equilibrium": equilibrium_doc,
        "stationary": stationary_doc,
    });
    json::write_file(&out.join(format!("example_{id}.json")), &doc)?;
    Ok(Outcome {
        document: doc,
        pass,
    })
}
