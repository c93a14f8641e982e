//! System description `dX = [A X + h(X)] dt + sigma dW` and the structural
//! hypotheses behind the small-gain theorem: cooperativity, stability, the
//! max-entry bound on `Phi(t)`, and the gain `-L d^2 / lambda`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Built-in scalar profiles `f(y)` available for each output coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    /// `f(y) = c`; params `[c]`.
    Constant,
    /// `f(y) = clamp(c0 + c1 y, 0, cap)`; params `[c0, c1, cap]`.
    AffineClamped,
    /// `f(y) = 1 / (c0 + c1 (pi/2 - atan y))`; params `[c0, c1]`.
    ReciprocalOffsetArctan,
    /// `f(y) = 1 / (c0 + c1 (1 + tanh y))`; params `[c0, c1]`.
    ReciprocalOffsetTanh,
    /// `f(y) = 1 / (c0 + c1 (pi/2 + atan y))`; params `[c0, c1]`.
    ReciprocalOffsetAtanShifted,
}

impl OutputKind {
    fn n_params(self) -> usize {
        match self {
            OutputKind::Constant => 1,
            OutputKind::AffineClamped => 3,
            _ => 2,
        }
    }

    /// Range of the offset function `g` for the reciprocal profiles.
    fn offset_range(self) -> Option<f64> {
        match self {
            OutputKind::ReciprocalOffsetArctan | OutputKind::ReciprocalOffsetAtanShifted => {
                Some(PI)
            }
            OutputKind::ReciprocalOffsetTanh => Some(2.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    OrderPreserving,
    AntiOrderPreserving,
}

/// Output function `h`: coordinate `i` applies the catalog profile with
/// `params[i]` to the sum of the state coordinates listed in `wiring[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFunctionSpec {
    kind: OutputKind,
    wiring: Vec<Vec<usize>>,
    params: Vec<Vec<f64>>,
    monotonicity: Monotonicity,
    bound: Vec<f64>,
}

impl OutputFunctionSpec {
    pub fn new(
        kind: OutputKind,
        wiring: Vec<Vec<usize>>,
        params: Vec<Vec<f64>>,
        monotonicity: Monotonicity,
    ) -> Result<Self> {
        let d = wiring.len();
        if d == 0 {
            return Err(Error::invalid(
                "output.wiring",
                "needs at least one coordinate",
            ));
        }
        if params.len() != d {
            return Err(Error::invalid(
                "output.params",
                format!("expected {d} coefficient rows, got {}", params.len()),
            ));
        }
        for (i, w) in wiring.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::invalid(
                    format!("output.wiring[{i}]"),
                    "each output needs at least one input coordinate",
                ));
            }
            if let Some(&j) = w.iter().find(|&&j| j >= d) {
                return Err(Error::invalid(
                    format!("output.wiring[{i}]"),
                    format!("state index {j} out of range for dimension {d}"),
                ));
            }
        }
        let mut bound = Vec::with_capacity(d);
        for (i, p) in params.iter().enumerate() {
            let field = format!("output.params[{i}]");
            if p.len() != kind.n_params() {
                return Err(Error::invalid(
                    field,
                    format!(
                        "{kind:?} takes {} coefficients, got {}",
                        kind.n_params(),
                        p.len()
                    ),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(field, "coefficients must be finite"));
            }
            let n_i = match kind {
                OutputKind::Constant => {
                    if p[0] < 0.0 {
                        return Err(Error::invalid(field, "constant output must be nonnegative"));
                    }
                    p[0]
                }
                OutputKind::AffineClamped => {
                    if p[2] <= 0.0 {
                        return Err(Error::invalid(field, "clamp ceiling must be positive"));
                    }
                    p[2]
                }
                _ => {
                    let g_max = kind.offset_range().unwrap();
                    let lo = p[0].min(p[0] + p[1] * g_max);
                    if lo <= 0.0 {
                        return Err(Error::invalid(
                            field,
                            format!(
                                "denominator c0 + c1 g reaches {lo} on the range of g; it must stay positive"
                            ),
                        ));
                    }
                    1.0 / lo
                }
            };
            bound.push(n_i);
        }
        Ok(OutputFunctionSpec {
            kind,
            wiring,
            params,
            monotonicity,
            bound,
        })
    }

    /// Every coordinate uses the same `params` and reads the listed input.
    pub fn uniform(
        kind: OutputKind,
        wiring: Vec<Vec<usize>>,
        params: &[f64],
        monotonicity: Monotonicity,
    ) -> Result<Self> {
        let d = wiring.len();
        Self::new(kind, wiring, vec![params.to_vec(); d], monotonicity)
    }

    /// `h_i` reads `x_i`.
    pub fn diagonal_wiring(d: usize) -> Vec<Vec<usize>> {
        (0..d).map(|i| vec![i]).collect()
    }

    /// `h_i` reads `x_{i-1}` with `x_0 = x_d`.
    pub fn cyclic_wiring(d: usize) -> Vec<Vec<usize>> {
        (0..d).map(|i| vec![(i + d - 1) % d]).collect()
    }

    /// `h_i` reads `x_1 + ... + x_d`.
    pub fn sum_wiring(d: usize) -> Vec<Vec<usize>> {
        (0..d).map(|_| (0..d).collect()).collect()
    }

    pub fn constant(values: &[f64]) -> Result<Self> {
        Self::new(
            OutputKind::Constant,
            Self::diagonal_wiring(values.len()),
            values.iter().map(|&c| vec![c]).collect(),
            Monotonicity::OrderPreserving,
        )
    }

    pub fn dim(&self) -> usize {
        self.wiring.len()
    }

    pub fn kind(&self) -> OutputKind {
        self.kind
    }

    pub fn wiring(&self) -> &[Vec<usize>] {
        &self.wiring
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    /// Componentwise supremum `N` of the range.
    pub fn bound(&self) -> &[f64] {
        &self.bound
    }

    #[inline]
    fn profile(&self, i: usize, y: f64) -> f64 {
        let p = &self.params[i];
        match self.kind {
            OutputKind::Constant => p[0],
            OutputKind::AffineClamped => (p[0] + p[1] * y).clamp(0.0, p[2]),
            OutputKind::ReciprocalOffsetArctan => 1.0 / (p[0] + p[1] * (FRAC_PI_2 - y.atan())),
            OutputKind::ReciprocalOffsetTanh => 1.0 / (p[0] + p[1] * (1.0 + y.tanh())),
            OutputKind::ReciprocalOffsetAtanShifted => 1.0 / (p[0] + p[1] * (FRAC_PI_2 + y.atan())),
        }
    }

    /// Writes `h(x)` into `out`.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, (o, w)) in out.iter_mut().zip(&self.wiring).enumerate() {
            let y: f64 = w.iter().map(|&j| x[j]).sum();
            *o = self.profile(i, y);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Central-difference Jacobian, row-major `d x d`.
    pub fn jacobian_fd(&self, x: &[f64], step: f64) -> Vec<f64> {
        let d = self.dim();
        let mut jac = vec![0.0; d * d];
        let mut xp = x.to_vec();
        let mut hp = vec![0.0; d];
        let mut hm = vec![0.0; d];
        for j in 0..d {
            xp[j] = x[j] + step;
            self.eval_into(&xp, &mut hp);
            xp[j] = x[j] - step;
            self.eval_into(&xp, &mut hm);
            xp[j] = x[j];
            for i in 0..d {
                jac[i * d + j] = (hp[i] - hm[i]) / (2.0 * step);
            }
        }
        jac
    }
}

const FD_STEP: f64 = 1e-5;
const VALIDATION_SAMPLES: usize = 256;
const VALIDATION_HALF_WIDTH: f64 = 10.0;
const SAMPLING_SEED: u64 = 0x5E_ED0F_B0C5;

/// A `d`-dimensional box `[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox(pub Vec<(f64, f64)>);

impl SampleBox {
    pub fn cube(d: usize, half_width: f64) -> Self {
        SampleBox(vec![(-half_width, half_width); d])
    }

    /// Center first, then `n - 1` uniform points from a fixed stream.
    fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
        let mut pts = Vec::with_capacity(n);
        pts.push(self.0.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
        while pts.len() < n {
            pts.push(
                self.0
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect(),
            );
        }
        pts
    }
}

/// The SDE together with the declared Lipschitz bound `L` of `h`.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    output: OutputFunctionSpec,
    lipschitz: f64,
}

impl SystemSpec {
    /// Structural validation plus sampled checks of the declared `L` and
    /// monotonicity on the cube `[-10, 10]^d`.
    pub fn new(
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
        output: OutputFunctionSpec,
        lipschitz: f64,
    ) -> Result<Self> {
        let spec = Self::unchecked(a, sigma, output, lipschitz)?;
        let sample_box = SampleBox::cube(spec.dim(), VALIDATION_HALF_WIDTH);
        validate_lipschitz(&spec, &sample_box, VALIDATION_SAMPLES)?;
        validate_monotonicity(&spec.output, &sample_box, VALIDATION_SAMPLES)?;
        Ok(spec)
    }

    /// Structural validation only (shapes, finiteness, signs).
    pub fn unchecked(
        a: DMatrix<f64>,
        sigma: DMatrix<f64>,
        output: OutputFunctionSpec,
        lipschitz: f64,
    ) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || !a.is_square() {
            return Err(Error::invalid(
                "A",
                format!(
                    "must be a nonempty square matrix, got {}x{}",
                    a.nrows(),
                    a.ncols()
                ),
            ));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("A", "entries must be finite"));
        }
        if sigma.nrows() != d || sigma.ncols() == 0 {
            return Err(Error::invalid(
                "sigma",
                format!(
                    "must be {d} x m with m >= 1, got {}x{}",
                    sigma.nrows(),
                    sigma.ncols()
                ),
            ));
        }
        if sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sigma", "entries must be finite"));
        }
        if output.dim() != d {
            return Err(Error::invalid(
                "output",
                format!(
                    "output dimension {} does not match state dimension {d}",
                    output.dim()
                ),
            ));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::invalid(
                "lipschitz",
                "must be finite and nonnegative",
            ));
        }
        Ok(SystemSpec {
            a,
            sigma,
            output,
            lipschitz,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn output(&self) -> &OutputFunctionSpec {
        &self.output
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Same system with `sigma` replaced.
    pub fn with_sigma(&self, sigma: DMatrix<f64>) -> Result<Self> {
        Self::unchecked(self.a.clone(), sigma, self.output.clone(), self.lipschitz)
    }

    /// Same system with the declared `L` replaced.
    pub fn with_lipschitz(&self, lipschitz: f64) -> Result<Self> {
        Self::unchecked(
            self.a.clone(),
            self.sigma.clone(),
            self.output.clone(),
            lipschitz,
        )
    }

    pub fn evaluate_h(&self, x: &[f64]) -> Vec<f64> {
        self.output.eval(x)
    }
}

/// Spectral abscissa of `A`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    linalg::spectral_abscissa(a)
}

/// Off-diagonal entries all nonnegative.
pub fn check_cooperative(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] >= 0.0))
}

pub fn fundamental_matrix(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    linalg::fundamental_matrix(a, t)
}

/// Outcome of the grid check of `max_ij |Phi_ij(t)| <= e^{lambda t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBoundCheck {
    pub ok: bool,
    pub max_ratio: f64,
}

pub const NORM_BOUND_SLACK: f64 = 1e-9;

/// `r(t) = ||Phi(t)|| e^{-lambda t}` on a uniform grid over `[0, t_max]`.
pub fn check_norm_bound(
    a: &DMatrix<f64>,
    lambda: f64,
    t_max: f64,
    n_points: usize,
) -> Result<NormBoundCheck> {
    if !(lambda < 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must be negative, got {lambda}"),
        ));
    }
    if !(t_max > 0.0) || n_points < 2 {
        return Err(Error::invalid(
            "t_max",
            "need t_max > 0 and at least two grid points",
        ));
    }
    let mut max_ratio: f64 = 0.0;
    for k in 0..n_points {
        let t = t_max * k as f64 / (n_points - 1) as f64;
        let r = if a.nrows() == 1 {
            // scalar flow: the ratio is e^{(a - lambda) t}
            ((a[(0, 0)] - lambda) * t).exp()
        } else {
            linalg::max_abs(&linalg::fundamental_matrix(a, t)) * (-lambda * t).exp()
        };
        max_ratio = max_ratio.max(r);
    }
    Ok(NormBoundCheck {
        ok: max_ratio <= 1.0 + NORM_BOUND_SLACK,
        max_ratio,
    })
}

pub fn evaluate_h(spec: &SystemSpec, x: &[f64]) -> Vec<f64> {
    spec.evaluate_h(x)
}

/// Largest sampled `|dh_i/dx_j|` over the box (central differences, step 1e-5).
pub fn estimate_lipschitz(spec: &SystemSpec, sample_box: &SampleBox, n_samples: usize) -> f64 {
    lipschitz_scan(&spec.output, sample_box, n_samples).0
}

fn lipschitz_scan(
    output: &OutputFunctionSpec,
    sample_box: &SampleBox,
    n_samples: usize,
) -> (f64, Vec<f64>) {
    let mut best = (0.0, sample_box.points(1).remove(0));
    for x in sample_box.points(n_samples.max(1)) {
        let m = output
            .jacobian_fd(&x, FD_STEP)
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        if m > best.0 {
            best = (m, x);
        }
    }
    best
}

/// Fails when the sampled derivative bound exceeds the declared `L`.
pub fn validate_lipschitz(
    spec: &SystemSpec,
    sample_box: &SampleBox,
    n_samples: usize,
) -> Result<f64> {
    let (est, x) = lipschitz_scan(&spec.output, sample_box, n_samples);
    // finite-difference rounding on exactly linear profiles
    let allowed = spec.lipschitz * (1.0 + 1e-6) + 1e-9;
    if est > allowed {
        return Err(Error::invalid(
            "lipschitz",
            format!(
                "sampled |dh_i/dx_j| = {est} at x = {x:?} exceeds declared L = {}",
                spec.lipschitz
            ),
        ));
    }
    Ok(est)
}

/// Sign pattern of the sampled Jacobian against the declared monotonicity.
pub fn validate_monotonicity(
    output: &OutputFunctionSpec,
    sample_box: &SampleBox,
    n_samples: usize,
) -> Result<()> {
    let sign = match output.monotonicity {
        Monotonicity::OrderPreserving => 1.0,
        Monotonicity::AntiOrderPreserving => -1.0,
    };
    for x in sample_box.points(n_samples.max(1)) {
        if let Some(v) = output
            .jacobian_fd(&x, FD_STEP)
            .iter()
            .find(|&&v| sign * v < -1e-10)
        {
            return Err(Error::invalid(
                "output.monotonicity",
                format!(
                    "declared {:?} but sampled partial derivative {v} at x = {x:?} has the wrong sign",
                    output.monotonicity
                ),
            ));
        }
    }
    Ok(())
}

/// Grid used for the `Phi(t)` bound; defaults to `20/|lambda|` and 2000 points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormGrid {
    pub t_max: Option<f64>,
    pub n_points: usize,
}

impl Default for NormGrid {
    fn default() -> Self {
        NormGrid {
            t_max: None,
            n_points: 2000,
        }
    }
}

const LAMBDA_RELAXATIONS: [f64; 3] = [0.01, 0.05, 0.1];

/// Verdicts for (A), (H2) and the quantities behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SmallGainReport {
    pub d: usize,
    /// `(re, im)` pairs, sorted by decreasing real part.
    pub eigenvalues: Vec<[f64; 2]>,
    pub spectral_abscissa: f64,
    /// The decay rate used for the bound; the spectral abscissa unless relaxed.
    pub lambda: f64,
    pub lambda_relaxation: f64,
    pub cooperative: bool,
    pub stable: bool,
    pub norm_bound_t_max: Option<f64>,
    pub norm_bound_max_ratio: Option<f64>,
    pub norm_bound_ok: bool,
    #[serde(rename = "L")]
    pub l: f64,
    /// `-L d^2 / lambda`; absent when `A` is not stable.
    pub gain: Option<f64>,
    pub small_gain_ok: bool,
    /// `L d max_i sum_j int_0^T |Phi_ij|`, reported for information only.
    pub sharp_gain: Option<f64>,
    /// All hypotheses of the trajectory theorem: cooperative, stable,
    /// norm bound and small gain.
    pub theorem_applies: bool,
    pub reason: Option<String>,
}

pub fn small_gain_report(spec: &SystemSpec, grid: NormGrid) -> Result<SmallGainReport> {
    let a = spec.a();
    let d = spec.dim();
    let eig = linalg::eigenvalues(a)?;
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let cooperative = check_cooperative(a);
    let stable = abscissa < 0.0;
    let l = spec.lipschitz();
    let mut report = SmallGainReport {
        d,
        eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
        spectral_abscissa: abscissa,
        lambda: abscissa,
        lambda_relaxation: 0.0,
        cooperative,
        stable,
        norm_bound_t_max: None,
        norm_bound_max_ratio: None,
        norm_bound_ok: false,
        l,
        gain: None,
        small_gain_ok: false,
        sharp_gain: None,
        theorem_applies: false,
        reason: None,
    };
    if !stable {
        report.reason = Some(format!(
            "A is not stable: spectral abscissa {abscissa} >= 0, gain undefined"
        ));
        return Ok(report);
    }
    let t_max = grid.t_max.unwrap_or(20.0 / abscissa.abs());
    report.norm_bound_t_max = Some(t_max);
    let mut check = check_norm_bound(a, abscissa, t_max, grid.n_points)?;
    let mut lambda = abscissa;
    let mut relaxation = 0.0;
    if !check.ok {
        for delta in LAMBDA_RELAXATIONS {
            let relaxed = abscissa * (1.0 - delta);
            let c = check_norm_bound(a, relaxed, t_max, grid.n_points)?;
            if c.ok {
                check = c;
                lambda = relaxed;
                relaxation = delta;
                break;
            }
        }
    }
    report.lambda = lambda;
    report.lambda_relaxation = relaxation;
    report.norm_bound_max_ratio = Some(check.max_ratio);
    report.norm_bound_ok = check.ok;
    let gain = -l * (d * d) as f64 / lambda;
    report.gain = Some(gain);
    report.small_gain_ok = gain < 1.0;
    report.sharp_gain = Some(l * d as f64 * integrated_row_norm(a, t_max, grid.n_points));
    report.theorem_applies = cooperative && report.norm_bound_ok && report.small_gain_ok;
    let mut reasons = Vec::new();
    if !cooperative {
        reasons.push("A is not cooperative".to_string());
    }
    if !check.ok {
        reasons.push(format!(
            "max |Phi_ij(t)| e^(-lambda t) reaches {} > 1",
            check.max_ratio
        ));
    }
    if !report.small_gain_ok {
        reasons.push(format!("gain {gain} >= 1"));
    }
    if !reasons.is_empty() {
        report.reason = Some(reasons.join("; "));
    }
    Ok(report)
}

/// `max_i sum_j int_0^T |Phi_ij(s)| ds` by the trapezoid rule.
fn integrated_row_norm(a: &DMatrix<f64>, t_max: f64, n_points: usize) -> f64 {
    let d = a.nrows();
    let h = t_max / (n_points - 1) as f64;
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for k in 0..n_points {
        let w = if k == 0 || k == n_points - 1 {
            0.5
        } else {
            1.0
        };
        acc += linalg::fundamental_matrix(a, h * k as f64).abs() * (w * h);
    }
    acc.row_iter().map(|r| r.sum()).fold(0.0, f64::max)
}
