//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the PASS/FAIL lines are always printed; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::Value;
use sgsde_cli::presets;
use sgsde_core::dynamics::pullback;
use sgsde_core::gain::{envelope_inputs, GainOperator, InputProcess};
use sgsde_core::model::{
    check_norm_bound, Monotonicity, OutputFunctionSpec, OutputKind, SystemSpec,
};
use sgsde_core::stationary::{
    drift_check, exact_density_1d, histogram_l1, lyapunov_covariance, lyapunov_residual,
    mc_samples, mc_stationary, small_noise_concentration, Histogram, McOptions, SamplingMode,
};
use sgsde_core::{Error, NoisePath};

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn spec(id: &str) -> SystemSpec {
    presets::load(id).unwrap().spec
}

fn warmup(spec: &SystemSpec, dt: f64) -> f64 {
    let lambda = sgsde_core::model::spectral_abscissa(spec.a()).unwrap();
    (18.5 / lambda.abs() / dt).ceil() * dt
}

fn sgsde(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = sgsde_cli::run(
        std::iter::once("sgsde").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    let text = String::from_utf8(out).unwrap() + &String::from_utf8(err).unwrap();
    (code, text)
}

fn lambda_51() -> f64 {
    (-3.0 + 5f64.sqrt()) / 2.0
}

fn lambda_53() -> f64 {
    -2.0 + 2f64.sqrt()
}

fn gain_51() -> f64 {
    1.0 / (2.0 * (3.0 - 5f64.sqrt()))
}

fn gain_53() -> f64 {
    9.0 / (16.0 * (2.0 - 2f64.sqrt()))
}

fn catalog_gains() -> [(&'static str, f64); 3] {
    [("5.1", gain_51()), ("5.2", 9.0 / 16.0), ("5.3", gain_53())]
}

fn reference_numbers() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s5 = 5f64.sqrt();
    let s2 = 2f64.sqrt();
    let cases: [(&str, Vec<f64>, f64); 3] = [
        ("5.1", vec![lambda_51(), -1.0, (-3.0 - s5) / 2.0], gain_51()),
        ("5.2", vec![-1.0, -2.0, -3.0], 9.0 / 16.0),
        ("5.3", vec![lambda_53(), -3.0, -2.0 - s2], gain_53()),
    ];
    let mut worst: f64 = 0.0;
    for (id, eig, gain) in cases {
        let out = dir.path().join(id);
        let (code, text) = sgsde(&["check", "--preset", id, "--out", out.to_str().unwrap()]);
        require(code == 0, || format!("check {id} exited {code}: {text}"))?;
        let r: Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("check.json")).unwrap())
                .unwrap();
        for (k, want) in eig.iter().enumerate() {
            let re = r["eigenvalues"][k][0].as_f64().unwrap();
            let im = r["eigenvalues"][k][1].as_f64().unwrap();
            worst = worst.max(rel(re, *want));
            require(rel(re, *want) <= 1e-9 && im.abs() <= 1e-9, || {
                format!("{id}: eigenvalue {k} = {re}{im:+}i, reference {want}")
            })?;
        }
        let lambda = r["lambda"].as_f64().unwrap();
        require(rel(lambda, eig[0]) <= 1e-9, || {
            format!("{id}: lambda {lambda}")
        })?;
        let g = r["gain"].as_f64().unwrap();
        worst = worst.max(rel(g, gain));
        require(rel(g, gain) <= 1e-9, || {
            format!("{id}: gain {g}, reference {gain}")
        })?;
        require(r["smallGainOk"] == true, || {
            format!("{id}: smallGainOk false")
        })?;
    }
    let out = dir.path().join("6.1");
    let (code, text) = sgsde(&["check", "--preset", "6.1", "--out", out.to_str().unwrap()]);
    require(code == 0, || format!("check 6.1 exited {code}: {text}"))?;
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("check.json")).unwrap()).unwrap();
    require(r["cooperative"] == false, || {
        "6.1 reported cooperative".into()
    })?;
    Ok(format!(
        "worst relative error {worst:.1e}; 6.1 not cooperative"
    ))
}

fn norm_bound() -> Outcome {
    let mut detail = Vec::new();
    for (id, lambda) in [("5.1", lambda_51()), ("5.3", lambda_53())] {
        let c = check_norm_bound(spec(id).a(), lambda, 20.0, 2000).map_err(|e| e.to_string())?;
        require(c.ok && c.max_ratio <= 1.0 + 1e-9, || {
            format!("{id}: max ratio {}", c.max_ratio)
        })?;
        detail.push(format!("{id} max ratio {:.12}", c.max_ratio));
    }
    for a in [-0.25, -1.0, -2.5, -7.0] {
        let c = check_norm_bound(&DMatrix::from_element(1, 1, a), a, 20.0, 2000)
            .map_err(|e| e.to_string())?;
        require(c.max_ratio == 1.0, || {
            format!("scalar a = {a}: ratio {}", c.max_ratio)
        })?;
    }
    detail.push("scalar ratios exactly 1".into());
    Ok(detail.join("; "))
}

fn contraction() -> Outcome {
    let mut detail = Vec::new();
    for (id, gain) in catalog_gains() {
        let s = spec(id);
        let path = NoisePath::sample(2024, 1e-3, 40.0, 10.0, 3).unwrap();
        let op = GainOperator::new(&s, &path).map_err(|e| e.to_string())?;
        let worst = (0..100u64)
            .into_par_iter()
            .map(|j| {
                let bound = s.output().bound();
                let mut u1 = InputProcess::random(&path, bound, 2 * j);
                let mut u2 = InputProcess::random(&path, bound, 2 * j + 1);
                // odd pairs: random constant levels, which come close to the gain
                if j % 2 == 1 {
                    u1 = InputProcess::constant(&path, u1.value(0), bound).unwrap();
                    u2 = InputProcess::constant(&path, u2.value(0), bound).unwrap();
                }
                op.contraction_ratio(&u1, &u2).unwrap()
            })
            .reduce(|| 0.0, f64::max);
        require(worst <= gain + 1e-6, || {
            format!("{id}: ratio {worst} > gain {gain}")
        })?;
        detail.push(format!("{id} worst {worst:.4} <= {gain:.4}"));
    }
    Ok(detail.join("; "))
}

fn fixed_point() -> Outcome {
    let cfg = presets::load("5.2").unwrap();
    let path = cfg.noise_path(7).unwrap();
    let op = GainOperator::new(&cfg.spec, &path).map_err(|e| e.to_string())?;
    let bound = cfg.spec.output().bound();
    let tol = 1e-10;
    let zero = InputProcess::constant(&path, &[0.0; 3], bound).unwrap();
    let top = InputProcess::constant(&path, bound, bound).unwrap();
    let r0 = op
        .iterate_fixed_point(Some(zero), tol, 200)
        .map_err(|e| e.to_string())?;
    let rn = op
        .iterate_fixed_point(Some(top), tol, 200)
        .map_err(|e| e.to_string())?;
    let mut worst_ratio: f64 = 0.0;
    for r in [&r0, &rn] {
        require(r.iterations <= 45, || {
            format!("{} iterations", r.iterations)
        })?;
        require(*r.residuals.last().unwrap() <= tol, || {
            "final residual above tol".into()
        })?;
        for w in r.residuals.windows(2) {
            worst_ratio = worst_ratio.max(w[1] / w[0]);
        }
    }
    require(worst_ratio <= 0.6125, || {
        format!("residual ratio {worst_ratio}")
    })?;
    let gap = op.distance(&r0.u_star, &rn.u_star);
    require(gap <= 2e-10, || {
        format!("u0 = 0 and u0 = N differ by {gap}")
    })?;
    Ok(format!(
        "iterations {}/{}, worst ratio {worst_ratio:.4}, agreement {gap:.1e}",
        r0.iterations, rn.iterations
    ))
}

fn invariance() -> Outcome {
    let ics: Vec<Vec<f64>> = vec![
        vec![0.0, 0.0, 0.0],
        vec![5.0, 5.0, 5.0],
        vec![-5.0, -5.0, -5.0],
        vec![5.0, -5.0, 0.0],
        vec![-5.0, 0.0, 5.0],
    ];
    let mut detail = Vec::new();
    for id in ["5.1", "5.2", "5.3"] {
        let s = spec(id);
        let t_past = (2.0 * warmup(&s, 1e-3)).ceil();
        let fine = NoisePath::sample(7, 5e-4, t_past, 10.0, 3).unwrap();
        let coarse = fine.coarsen(2).unwrap();
        let run = |p: &NoisePath| {
            let op = GainOperator::new(&s, p)?;
            let r = op.iterate_fixed_point(None, 1e-10, 200)?;
            op.verify_equilibrium(&r, 0.0, 10.0, Some(&ics))
        };
        let c = run(&coarse).map_err(|e| e.to_string())?;
        let f = run(&fine).map_err(|e| e.to_string())?;
        require(c.max_deviation < 5e-3, || {
            format!("{id}: maxDeviation {}", c.max_deviation)
        })?;
        let halving = c.max_deviation / f.max_deviation;
        require(halving >= 1.5, || format!("{id}: halving factor {halving}"))?;
        require(c.initial_conditions == 5 && c.pullback_gap <= 1e-2, || {
            format!("{id}: pullbackGap {}", c.pullback_gap)
        })?;
        detail.push(format!(
            "{id} dev {:.1e} (x{halving:.2}), gap {:.1e}",
            c.max_deviation, c.pullback_gap
        ));
    }
    Ok(detail.join("; "))
}

fn sandwich() -> Outcome {
    let s = spec("5.1");
    let dt = 0.01;
    let (tau, horizon) = (10.0, 30.0);
    let path = NoisePath::sample(7, dt, horizon + warmup(&s, dt) + 5.0, 2.0, 3).unwrap();
    let op = GainOperator::new(&s, &path).map_err(|e| e.to_string())?;
    let u_star = op
        .iterate_fixed_point(None, 1e-13, 500)
        .map_err(|e| e.to_string())?
        .u_star;
    let mut xs = vec![vec![0.0; 3]];
    for i in 0..3 {
        for v in [5.0, -5.0] {
            let mut x = vec![0.0; 3];
            x[i] = v;
            xs.push(x);
        }
    }
    let from = op.trusted_start();
    let results: Vec<Result<(f64, f64), String>> = xs
        .par_iter()
        .map(|x| {
            let (mut lo, mut hi) =
                envelope_inputs(&s, &path, x, tau, horizon).map_err(|e| e.to_string())?;
            let ka = op.apply_k(&lo).unwrap().state_at(0.0).unwrap().to_vec();
            let kb = op.apply_k(&hi).unwrap().state_at(0.0).unwrap().to_vec();
            let pb = pullback(&s, path.view(), x, horizon).map_err(|e| e.to_string())?;
            let mut sand: f64 = f64::NEG_INFINITY;
            for i in 0..3 {
                sand = sand.max(ka[i] - pb[i]).max(pb[i] - kb[i]);
            }
            let mut nest: f64 = f64::NEG_INFINITY;
            let mut prev: Option<(InputProcess, InputProcess)> = None;
            for _ in 1..=5 {
                lo = op.apply_gain(&op.apply_gain(&lo).unwrap()).unwrap();
                hi = op.apply_gain(&op.apply_gain(&hi).unwrap()).unwrap();
                nest = nest
                    .max(lo.max_excess(&u_star, from))
                    .max(u_star.max_excess(&hi, from));
                if let Some((pl, ph)) = &prev {
                    nest = nest
                        .max(pl.max_excess(&lo, from))
                        .max(hi.max_excess(ph, from));
                }
                prev = Some((lo.clone(), hi.clone()));
            }
            Ok((sand, nest))
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, r) in xs.iter().zip(results) {
        let (sand, nest) = r?;
        require(sand <= 1e-2, || {
            format!("x = {x:?}: sandwich violated by {sand}")
        })?;
        require(nest <= 1e-8, || {
            format!("x = {x:?}: nesting violated by {nest}")
        })?;
        worst = (worst.0.max(sand), worst.1.max(nest));
    }
    Ok(format!(
        "sandwich excess {:.1e} <= 1e-2, nesting excess {:.1e} <= 1e-8",
        worst.0, worst.1
    ))
}

/// Kronecker-form solve of `A S + S A^T + sigma sigma^T = 0`.
fn lyapunov_oracle(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let k = id.kronecker(a) + a.kronecker(&id);
    let q = sigma * sigma.transpose();
    let rhs = -DVector::from_column_slice(q.as_slice());
    let v = k.lu().solve(&rhs).unwrap();
    DMatrix::from_column_slice(d, d, v.as_slice())
}

fn stationary_cross_validation() -> Outcome {
    let a = spec("5.1").a().clone();
    let c = 0.1;
    let sigma = DMatrix::identity(3, 3) * 0.2;
    let lin = SystemSpec::new(
        a.clone(),
        sigma.clone(),
        OutputFunctionSpec::constant(&[c; 3]).unwrap(),
        0.0,
    )
    .map_err(|e| e.to_string())?;
    let opts = McOptions {
        samples: 10_000,
        mode: SamplingMode::EnsemblePullback,
        burn_in: 40.0,
        dt: 0.01,
        seed: 1,
        x0: None,
        thin: None,
        bins: None,
    };
    let est = mc_stationary(&lin, &opts).map_err(|e| e.to_string())?;
    let mean = -a.clone().lu().solve(&DVector::from_element(3, c)).unwrap();
    for i in 0..3 {
        require(
            (est.mean[i] - mean[i]).abs() <= 3.0 * est.standard_error[i],
            || {
                format!(
                    "(a) mean {} vs {} (se {})",
                    est.mean[i], mean[i], est.standard_error[i]
                )
            },
        )?;
    }
    let target = lyapunov_oracle(&a, &sigma);
    let frob = (est.covariance_matrix() - &target).norm() / target.norm();
    require(frob <= 0.1, || format!("(a) covariance off by {frob}"))?;

    let h = OutputFunctionSpec::uniform(
        OutputKind::ReciprocalOffsetTanh,
        OutputFunctionSpec::diagonal_wiring(1),
        &[4.0, 1.0],
        Monotonicity::AntiOrderPreserving,
    )
    .unwrap();
    let scalar = SystemSpec::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 0.5),
        h,
        1.0 / 16.0,
    )
    .map_err(|e| e.to_string())?;
    let samples = mc_samples(
        &scalar,
        &McOptions {
            samples: 1_000_000,
            mode: SamplingMode::ErgodicTimeAverage,
            burn_in: 10.0,
            seed: 11,
            ..opts.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    let hist = Histogram::build(samples.iter().copied(), None);
    let xs: Vec<f64> = (0..6501).map(|k| -3.0 + 6.5 * k as f64 / 6500.0).collect();
    let p = exact_density_1d(-1.0, scalar.output(), 0.5, &xs).map_err(|e| e.to_string())?;
    let l1 = histogram_l1(&p, &hist);
    require(l1 <= 0.05, || format!("(b) L1 distance {l1}"))?;

    let mut worst_res: f64 = 0.0;
    for id in presets::IDS {
        let s = spec(id);
        let sol = lyapunov_covariance(s.a(), s.sigma()).map_err(|e| e.to_string())?;
        let res = lyapunov_residual(s.a(), s.sigma(), &sol);
        require(res <= 1e-10, || format!("(c) {id}: residual {res}"))?;
        let agree = (&sol - lyapunov_oracle(s.a(), s.sigma())).amax();
        require(agree <= 1e-12, || {
            format!("(c) {id}: differs from the Kronecker solve by {agree}")
        })?;
        worst_res = worst_res.max(res);
    }
    Ok(format!(
        "(a) covariance {:.1}% Frobenius; (b) L1 {l1:.4}; (c) residual {worst_res:.1e}",
        100.0 * frob
    ))
}

fn drift() -> Outcome {
    let s = spec("6.1");
    let c = drift_check(&s, 0.1, 10.0, 10_000).map_err(|e| e.to_string())?;
    require(c.ok, || format!("drift check failed: {c:?}"))?;
    for l in [0.9, 0.95, 2.0] {
        let strong = s.with_lipschitz(l).unwrap();
        match drift_check(&strong, 0.1, 10.0, 10_000) {
            Err(Error::Refused(_)) => {}
            other => return Err(format!("L = {l} not refused: {other:?}")),
        }
    }
    Ok(format!(
        "worst margin {:.3}; L >= lambda - eps refused",
        c.worst_margin
    ))
}

/// `A x + h(x) = 0` for the diagonal competitive example, by direct
/// iteration `x_i = h(x_{i-1}) / |a_i|`.
fn competitive_equilibrium() -> Vec<f64> {
    let a = [1.0, 2.0, 3.0];
    let h = |y: f64| 1.0 / (5.0 + y.tanh());
    let mut x = [0.0; 3];
    for _ in 0..200 {
        x = [h(x[2]) / a[0], h(x[0]) / a[1], h(x[1]) / a[2]];
    }
    x.to_vec()
}

fn concentration() -> Outcome {
    let s = spec("5.2");
    let opts = McOptions {
        samples: 10_000,
        mode: SamplingMode::EnsemblePullback,
        burn_in: 20.0,
        dt: 0.01,
        seed: 3,
        x0: None,
        thin: None,
        bins: None,
    };
    let (xbar, rows) =
        small_noise_concentration(&s, &[1.0, 0.5, 0.25], &opts).map_err(|e| e.to_string())?;
    let oracle = competitive_equilibrium();
    for i in 0..3 {
        require((xbar[i] - oracle[i]).abs() <= 1e-12, || {
            format!("x_bar {xbar:?} vs {oracle:?}")
        })?;
    }
    let t1 = rows[0].cov_trace;
    let mut ratios = Vec::new();
    for (row, expect) in rows.iter().zip([1.0, 0.25, 0.0625]) {
        let r = row.cov_trace / t1;
        require((r / expect - 1.0).abs() <= 0.3, || {
            format!("scale {}: ratio {r}", row.scale)
        })?;
        ratios.push(format!("{r:.4}"));
    }
    let q = &rows[2];
    let mut worst_z: f64 = 0.0;
    for i in 0..3 {
        let z = (q.mean[i] - oracle[i]).abs() / q.standard_error[i];
        worst_z = worst_z.max(z);
        require(z <= 3.0, || {
            format!("scale 0.25: component {i} is {z:.2} SE from x_bar")
        })?;
    }
    Ok(format!(
        "trace ratios ({}); worst |mean - x_bar| = {worst_z:.2} SE",
        ratios.join(", ")
    ))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut files = 0;
    for id in presets::IDS {
        let mut runs = Vec::new();
        for threads in ["1", "4", "4"] {
            let out = dir.path().join(format!("{id}-{threads}-{}", runs.len()));
            let (code, stdout) = sgsde(&[
                "example",
                id,
                "--threads",
                threads,
                "--out",
                out.to_str().unwrap(),
            ]);
            require(code == 0, || format!("example {id} exited {code}"))?;
            runs.push((stdout, read_dir_sorted(&out)));
        }
        require(runs[0] == runs[1] && runs[1] == runs[2], || {
            format!("example {id}: outputs differ")
        })?;
        files += runs[0].1.len();
    }
    Ok(format!(
        "{files} artifacts byte-identical across 1 and 4 threads and repeated runs"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reference-value reproduction", 1.0, reference_numbers),
        ("norm-bound verification", 5.0, norm_bound),
        ("contraction property", 30.0, contraction),
        ("fixed-point convergence", 60.0, fixed_point),
        ("equilibrium invariance", 60.0, invariance),
        ("sandwich property", 60.0, sandwich),
        (
            "stationary cross-validation",
            300.0,
            stationary_cross_validation,
        ),
        ("drift condition", 5.0, drift),
        ("small-noise concentration", 300.0, concentration),
        ("determinism", f64::INFINITY, determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, limit, f)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|p| name.contains(p.as_str()) || *p == n.to_string())
        {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(d) if secs <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded the {limit} s limit")),
            Err(e) => (false, e),
        };
        if !pass {
            failed += 1;
        }
        let limit = if limit.is_finite() {
            format!(" < {limit} s")
        } else {
            String::new()
        };
        println!(
            "criterion {n:>2} {} {name} [{secs:.2} s{limit}]: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
