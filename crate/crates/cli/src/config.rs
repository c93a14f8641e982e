//! The JSON run configuration.
//!
//! Every float field accepts either a JSON number or a string expression
//! understood by [`crate::expr`]. Unknown keys are rejected, and all
//! preconditions that can be checked without computing are checked here.

use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use serde_json::Value;
use sgsde_core::dynamics::Scheme;
use sgsde_core::model::{self, Monotonicity, OutputFunctionSpec, OutputKind, SystemSpec};
use sgsde_core::stationary::SamplingMode;
use sgsde_core::NoisePath;

use crate::error::CliError;
use crate::expr;

/// Warmup of the gain operator in units of `1/|lambda|`.
const WARMUP_DECAY_TIMES: f64 = 18.5;
/// Default burn-in of the Monte Carlo sampler in units of `1/|lambda|`.
const BURN_IN_DECAY_TIMES: f64 = 12.0;

const REQUIRED: [&str; 2] = ["system", "grid"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: SystemSpec,
    /// Spectral abscissa of `A`.
    pub lambda: f64,
    pub grid: Grid,
    pub seeds: Seeds,
    pub noise_csv: Option<PathBuf>,
    pub check: CheckOptions,
    pub simulate: Option<SimulateOptions>,
    pub pullback: Option<PullbackOptions>,
    pub equilibrium: EquilibriumOptions,
    pub stationary: StationaryOptions,
    pub drift: Option<DriftOptions>,
    pub concentration: Option<ConcentrationOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dt: f64,
    t_past: Option<f64>,
    pub t_fwd: f64,
}

impl Grid {
    /// Defaults to twice the gain-operator warmup when `A` is stable.
    pub fn t_past(&self) -> Result<f64, CliError> {
        self.t_past.ok_or_else(|| {
            CliError::config(
                "grid.t_past",
                "required when A is not stable (no default warmup exists)",
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub base: u64,
    pub count: usize,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { base: 0, count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOptions {
    #[serde(deserialize_with = "opt_num")]
    pub t_max: Option<f64>,
    pub points: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            t_max: None,
            points: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateOptions {
    #[serde(deserialize_with = "num_vec")]
    pub x0: Vec<f64>,
    #[serde(default, deserialize_with = "num")]
    pub t0: f64,
    #[serde(deserialize_with = "num")]
    pub t1: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeOptions {
    #[serde(deserialize_with = "num")]
    pub tau: f64,
    #[serde(deserialize_with = "num")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PullbackOptions {
    #[serde(deserialize_with = "num_vec")]
    pub x: Vec<f64>,
    #[serde(deserialize_with = "num")]
    pub t: f64,
    #[serde(default)]
    pub envelope: Option<EnvelopeOptions>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    /// `h(0)`, clamped into `[0, N]`.
    #[default]
    H0,
    Zero,
    /// The output bound `N`.
    Bound,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumOptions {
    #[serde(deserialize_with = "num")]
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    /// Verification window `[t0, t1]`; defaults to `[0, t_fwd]`.
    #[serde(deserialize_with = "opt_num_vec")]
    pub window: Option<Vec<f64>>,
    #[serde(deserialize_with = "opt_num_mat")]
    pub initial_conditions: Option<Vec<Vec<f64>>>,
    #[serde(deserialize_with = "opt_num")]
    pub warmup: Option<f64>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-10,
            max_iter: 500,
            initial_guess: InitialGuess::H0,
            window: None,
            initial_conditions: None,
            warmup: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityOptions {
    #[serde(deserialize_with = "num")]
    pub lo: f64,
    #[serde(deserialize_with = "num")]
    pub hi: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryOptions {
    pub samples: usize,
    pub mode: SamplingMode,
    #[serde(deserialize_with = "opt_num")]
    pub burn_in: Option<f64>,
    #[serde(deserialize_with = "opt_num")]
    pub dt: Option<f64>,
    #[serde(deserialize_with = "opt_num")]
    pub thin: Option<f64>,
    pub bins: Option<usize>,
    #[serde(deserialize_with = "opt_num_vec")]
    pub x0: Option<Vec<f64>>,
    pub density: Option<DensityOptions>,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        StationaryOptions {
            samples: 10_000,
            mode: SamplingMode::EnsemblePullback,
            burn_in: None,
            dt: None,
            thin: None,
            bins: None,
            x0: None,
            density: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftOptions {
    #[serde(deserialize_with = "num")]
    pub epsilon: f64,
    #[serde(deserialize_with = "num")]
    pub radius: f64,
    #[serde(default = "default_drift_samples")]
    pub samples: usize,
}

fn default_drift_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationOptions {
    #[serde(deserialize_with = "num_vec")]
    pub scales: Vec<f64>,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Gain-operator warmup `18.5/|lambda|` rounded up to the grid.
    pub fn default_warmup(&self) -> f64 {
        warmup_for(self.lambda, self.grid.dt)
    }

    /// Monte Carlo step, burn-in (rounded up to that step) and options for
    /// `seed`.
    pub fn mc_options(&self, seed: u64) -> sgsde_core::stationary::McOptions {
        let st = &self.stationary;
        let dt = st.dt.unwrap_or(self.grid.dt);
        let burn_in = st
            .burn_in
            .unwrap_or_else(|| (BURN_IN_DECAY_TIMES / self.lambda.abs() / dt).ceil() * dt);
        sgsde_core::stationary::McOptions {
            samples: st.samples,
            mode: st.mode,
            burn_in,
            dt,
            seed,
            x0: st.x0.clone(),
            thin: st.thin,
            bins: st.bins,
        }
    }

    /// The two-sided path for `seed`, or the file named by `noise_csv`.
    pub fn noise_path(&self, seed: u64) -> Result<NoisePath, CliError> {
        if let Some(file) = &self.noise_csv {
            let f = std::fs::File::open(file).map_err(|e| CliError::io(file, e))?;
            let path = NoisePath::read_csv(f)?;
            if path.noise_dim() != self.spec.noise_dim() {
                return Err(CliError::config(
                    "noise_csv",
                    format!(
                        "file has {} noise columns, sigma has {}",
                        path.noise_dim(),
                        self.spec.noise_dim()
                    ),
                ));
            }
            return Ok(path);
        }
        Ok(NoisePath::sample(
            seed,
            self.grid.dt,
            self.grid.t_past()?,
            self.grid.t_fwd,
            self.spec.noise_dim(),
        )?)
    }

    /// Seeds `base .. base + count`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds.count as u64)
            .map(|k| self.seeds.base + k)
            .collect()
    }
}

fn warmup_for(lambda: f64, dt: f64) -> f64 {
    (WARMUP_DECAY_TIMES / lambda.abs() / dt).ceil() * dt
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    grid: RawGrid,
    #[serde(default)]
    seeds: Seeds,
    #[serde(default)]
    noise_csv: Option<PathBuf>,
    #[serde(default)]
    check: CheckOptions,
    #[serde(default)]
    simulate: Option<SimulateOptions>,
    #[serde(default)]
    pullback: Option<PullbackOptions>,
    #[serde(default)]
    equilibrium: EquilibriumOptions,
    #[serde(default)]
    stationary: StationaryOptions,
    #[serde(default)]
    drift: Option<DriftOptions>,
    #[serde(default)]
    concentration: Option<ConcentrationOptions>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(deserialize_with = "num_mat")]
    a: Vec<Vec<f64>>,
    sigma: RawSigma,
    output: RawOutput,
    #[serde(deserialize_with = "num")]
    lipschitz: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSigma {
    Scalar(Num),
    Matrix(Vec<Vec<Num>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    kind: OutputKind,
    wiring: RawWiring,
    params: RawParams,
    monotonicity: Monotonicity,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawWiring {
    Named(String),
    Explicit(Vec<Vec<usize>>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawParams {
    Uniform(Vec<Num>),
    PerCoordinate(Vec<Vec<Num>>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(deserialize_with = "num")]
    dt: f64,
    #[serde(default, deserialize_with = "opt_num")]
    t_past: Option<f64>,
    #[serde(deserialize_with = "num")]
    t_fwd: f64,
}

/// A float given as a JSON number or an expression string.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a numeric expression string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                expr::eval(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

fn num<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Num::deserialize(d).map(|n| n.0)
}

fn opt_num<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    Ok(Option::<Num>::deserialize(d)?.map(|n| n.0))
}

fn num_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Num>::deserialize(d)?
        .into_iter()
        .map(|n| n.0)
        .collect())
}

fn opt_num_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    Ok(Option::<Vec<Num>>::deserialize(d)?.map(|v| v.into_iter().map(|n| n.0).collect()))
}

fn unwrap_rows(rows: Vec<Vec<Num>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|n| n.0).collect())
        .collect()
}

fn num_mat<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
    Ok(unwrap_rows(Vec::<Vec<Num>>::deserialize(d)?))
}

fn opt_num_mat<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<f64>>>, D::Error> {
    Ok(Option::<Vec<Vec<Num>>>::deserialize(d)?.map(unwrap_rows))
}

/// Parses and validates a configuration document. Relative file names are
/// resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::config("", format!("malformed JSON: {e}")))?;
    let Some(obj) = value.as_object() else {
        return Err(CliError::config(
            "",
            "the configuration must be a JSON object",
        ));
    };
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|k| !obj.contains_key(*k))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::config(
            "",
            format!("missing required fields: {}", missing.join(", ")),
        ));
    }
    let raw: RawConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer: String = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => {
                    Some(format!("/{}", key.replace('~', "~0").replace('/', "~1")))
                }
                serde_path_to_error::Segment::Enum { variant } => Some(format!("/{variant}")),
                serde_path_to_error::Segment::Unknown => None,
            })
            .collect();
        CliError::Config {
            field: e.path().to_string(),
            pointer,
            message: e.inner().to_string(),
        }
    })?;
    build(raw, base_dir)
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, path.parent())
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(CliError::config(field, "must be a non-empty matrix"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != m) {
        return Err(CliError::config(
            field,
            format!("row {i} has {} entries, row 0 has {m}", rows[i].len()),
        ));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn system(raw: RawSystem) -> Result<SystemSpec, CliError> {
    let a = matrix(&raw.a, "system.a")?;
    let d = a.nrows();
    let sigma = match raw.sigma {
        RawSigma::Scalar(s) => DMatrix::identity(d, d) * s.0,
        RawSigma::Matrix(rows) => matrix(&unwrap_rows(rows), "system.sigma")?,
    };
    let wiring = match raw.output.wiring {
        RawWiring::Named(name) => match name.as_str() {
            "diagonal" => OutputFunctionSpec::diagonal_wiring(d),
            "cyclic" => OutputFunctionSpec::cyclic_wiring(d),
            "sum" => OutputFunctionSpec::sum_wiring(d),
            _ => {
                return Err(CliError::config(
                    "system.output.wiring",
                    format!(
                    "unknown wiring `{name}`; use diagonal, cyclic, sum or explicit index lists"
                ),
                ))
            }
        },
        RawWiring::Explicit(w) => w,
    };
    let params = match raw.output.params {
        RawParams::Uniform(p) => vec![p.into_iter().map(|n| n.0).collect(); wiring.len()],
        RawParams::PerCoordinate(p) => unwrap_rows(p),
    };
    let output = OutputFunctionSpec::new(raw.output.kind, wiring, params, raw.output.monotonicity)
        .map_err(|e| CliError::from_core_in("system.output", e))?;
    SystemSpec::new(a, sigma, output, raw.lipschitz)
        .map_err(|e| CliError::from_core_in("system", e))
}

fn is_multiple(v: f64, dt: f64) -> bool {
    let r = v / dt;
    (r - r.round()).abs() <= 1e-9 * r.abs().max(1.0)
}

fn check_dim(v: &[f64], d: usize, field: &str) -> Result<(), CliError> {
    if v.len() != d {
        return Err(CliError::config(
            field,
            format!("has {} entries, the system has dimension {d}", v.len()),
        ));
    }
    Ok(())
}

fn build(raw: RawConfig, base_dir: Option<&Path>) -> Result<RunConfig, CliError> {
    let spec = system(raw.system)?;
    let d = spec.dim();
    let lambda =
        model::spectral_abscissa(spec.a()).map_err(|e| CliError::from_core_in("system.a", e))?;

    let g = raw.grid;
    if !(g.dt > 0.0 && g.dt.is_finite()) {
        return Err(CliError::config("grid.dt", "must be positive"));
    }
    if !(g.t_fwd >= 0.0 && g.t_fwd.is_finite()) {
        return Err(CliError::config("grid.t_fwd", "must be nonnegative"));
    }
    let t_past = match g.t_past {
        Some(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config("grid.t_past", "must be positive"));
            }
            Some(t)
        }
        None if lambda < 0.0 => Some(2.0 * warmup_for(lambda, g.dt)),
        None => None,
    };
    if let Some(t) = t_past {
        if !is_multiple(t, g.dt) {
            return Err(CliError::config(
                "grid.dt",
                format!("dt = {} does not divide grid.t_past = {t}", g.dt),
            ));
        }
    }
    if !is_multiple(g.t_fwd, g.dt) {
        return Err(CliError::config(
            "grid.dt",
            format!("dt = {} does not divide grid.t_fwd = {}", g.dt, g.t_fwd),
        ));
    }
    let grid = Grid {
        dt: g.dt,
        t_past,
        t_fwd: g.t_fwd,
    };

    if raw.seeds.count == 0 {
        return Err(CliError::config("seeds.count", "must be at least 1"));
    }
    let noise_csv = match raw.noise_csv {
        Some(p) => {
            let p = match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            };
            if !p.is_file() {
                return Err(CliError::config(
                    "noise_csv",
                    format!("file {} does not exist", p.display()),
                ));
            }
            Some(p)
        }
        None => None,
    };

    if raw.check.points < 2 {
        return Err(CliError::config("check.points", "need at least two points"));
    }
    if let Some(t) = raw.check.t_max {
        if !(t > 0.0) {
            return Err(CliError::config("check.t_max", "must be positive"));
        }
    }
    if let Some(s) = &raw.simulate {
        check_dim(&s.x0, d, "simulate.x0")?;
        if !(s.t1 > s.t0) {
            return Err(CliError::config("simulate.t1", "must exceed simulate.t0"));
        }
    }
    if let Some(p) = &raw.pullback {
        check_dim(&p.x, d, "pullback.x")?;
        if !(p.t > 0.0) {
            return Err(CliError::config("pullback.t", "must be positive"));
        }
        if let Some(e) = &p.envelope {
            if !(e.tau >= 0.0 && e.horizon > e.tau) {
                return Err(CliError::config(
                    "pullback.envelope",
                    "need 0 <= tau < horizon",
                ));
            }
        }
    }
    let eq = &raw.equilibrium;
    if !(eq.tol > 0.0) {
        return Err(CliError::config("equilibrium.tol", "must be positive"));
    }
    if eq.max_iter == 0 {
        return Err(CliError::config(
            "equilibrium.max_iter",
            "must be at least 1",
        ));
    }
    if let Some(w) = &eq.window {
        if w.len() != 2 || !(w[1] > w[0]) {
            return Err(CliError::config(
                "equilibrium.window",
                "must be [t0, t1] with t1 > t0",
            ));
        }
    }
    if let Some(ics) = &eq.initial_conditions {
        if ics.is_empty() {
            return Err(CliError::config(
                "equilibrium.initial_conditions",
                "must not be empty",
            ));
        }
        for x in ics {
            check_dim(x, d, "equilibrium.initial_conditions")?;
        }
    }
    if let Some(w) = eq.warmup {
        if !(w > 0.0) {
            return Err(CliError::config("equilibrium.warmup", "must be positive"));
        }
    }
    let st = &raw.stationary;
    if st.samples < 2 {
        return Err(CliError::config(
            "stationary.samples",
            "need at least two samples",
        ));
    }
    if let Some(x0) = &st.x0 {
        check_dim(x0, d, "stationary.x0")?;
    }
    if let Some(dt) = st.dt {
        if !(dt > 0.0) {
            return Err(CliError::config("stationary.dt", "must be positive"));
        }
    }
    if let Some(den) = &st.density {
        if d != 1 {
            return Err(CliError::config(
                "stationary.density",
                "the exact density is only available for d = 1",
            ));
        }
        if !(den.hi > den.lo) || den.points < 3 {
            return Err(CliError::config(
                "stationary.density",
                "need lo < hi and at least three points",
            ));
        }
    }
    if let Some(dr) = &raw.drift {
        if !(dr.epsilon > 0.0) {
            return Err(CliError::config("drift.epsilon", "must be positive"));
        }
        if !(dr.radius > 0.0) {
            return Err(CliError::config("drift.radius", "must be positive"));
        }
        if dr.samples == 0 {
            return Err(CliError::config("drift.samples", "must be at least 1"));
        }
    }
    if let Some(c) = &raw.concentration {
        if c.scales.is_empty() || c.scales.iter().any(|s| !(*s >= 0.0)) {
            return Err(CliError::config(
                "concentration.scales",
                "need a nonempty list of nonnegative scales",
            ));
        }
    }

    Ok(RunConfig {
        spec,
        lambda,
        grid,
        seeds: raw.seeds,
        noise_csv,
        check: raw.check,
        simulate: raw.simulate,
        pullback: raw.pullback,
        equilibrium: raw.equilibrium,
        stationary: raw.stationary,
        drift: raw.drift,
        concentration: raw.concentration,
    })
}
