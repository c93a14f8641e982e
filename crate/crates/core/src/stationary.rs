//! Stationary law: Monte Carlo estimates in two sampling modes, the
//! Lyapunov-equation Gaussian for constant `h`, the closed-form 1-D
//! Fokker-Planck density, and the quadratic drift condition.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, Propagator};
use crate::error::{Error, Result};
use crate::export;
use crate::linalg;
use crate::model::{self, NormGrid, OutputFunctionSpec, SystemSpec};
use crate::noise::{self, IncrementGenerator, NoisePath};

/// Minimum burn-in in units of `1/|lambda|`.
pub const MIN_BURN_IN_DECAY_TIMES: f64 = 10.0;

/// Solves `A S + S A^T + sigma sigma^T = 0` through the Kronecker system.
pub fn lyapunov_covariance(a: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if !a.is_square() || sigma.nrows() != d {
        return Err(Error::Shape(format!(
            "A is {}x{} and sigma has {} rows",
            a.nrows(),
            a.ncols(),
            sigma.nrows()
        )));
    }
    let eig = linalg::eigenvalues(a)?;
    if let Some(z) = eig.iter().find(|z| z.re >= 0.0) {
        return Err(Error::Refused(format!(
            "A is not stable: eigenvalue {} + {}i has nonnegative real part",
            z.re, z.im
        )));
    }
    let id = DMatrix::<f64>::identity(d, d);
    let op = id.kronecker(a) + a.kronecker(&id);
    let q = sigma * sigma.transpose();
    let rhs = -nalgebra::DVector::from_column_slice(q.as_slice());
    let vec = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("Lyapunov operator is singular".into()))?;
    let s = DMatrix::from_column_slice(d, d, vec.as_slice());
    Ok((&s + s.transpose()) * 0.5)
}

/// `max |A S + S A^T + sigma sigma^T|`.
pub fn lyapunov_residual(a: &DMatrix<f64>, sigma: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    linalg::max_abs(&(a * s + s * a.transpose() + sigma * sigma.transpose()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// One pullback sample `phi(burn_in, theta_{-burn_in} omega) x0` per seed.
    #[default]
    EnsemblePullback,
    /// One long forward run, thinned after the burn-in.
    ErgodicTimeAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Freedman-Diaconis bins unless `bins` is given.
    pub fn build(samples: impl Iterator<Item = f64>, bins: Option<usize>) -> Histogram {
        let mut sorted: Vec<f64> = samples.collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n == 0 {
            return Histogram {
                edges: vec![0.0, 1.0],
                counts: vec![0],
            };
        }
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        let nbins = match bins {
            Some(b) => b.max(1),
            None => {
                let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                let width = 2.0 * iqr / (n as f64).cbrt();
                if width > 0.0 && hi > lo {
                    (((hi - lo) / width).ceil() as usize).clamp(1, 10_000)
                } else {
                    1
                }
            }
        };
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let w = (hi - lo) / nbins as f64;
        let edges: Vec<f64> = (0..=nbins).map(|j| lo + w * j as f64).collect();
        let mut counts = vec![0u64; nbins];
        for v in sorted {
            let j = (((v - lo) / w) as usize).min(nbins - 1);
            counts[j] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Piecewise-constant density (counts normalized by total and width).
    pub fn density(&self, j: usize) -> f64 {
        self.counts[j] as f64 / (self.total() as f64 * (self.edges[j + 1] - self.edges[j]))
    }

    /// CSV with columns `left, right, count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = (0..self.counts.len())
            .map(|j| vec![self.edges[j], self.edges[j + 1], self.counts[j] as f64])
            .collect();
        export::write_table(writer, &["left", "right", "count"], &rows)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StationaryEstimate {
    pub samples: usize,
    pub mode: SamplingMode,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Standard error of each mean coordinate; batch means in ergodic mode.
    pub standard_error: Vec<f64>,
    pub histograms: Vec<Histogram>,
}

impl StationaryEstimate {
    /// Moments and histograms of step-major samples (`n x d`), reduced in a
    /// fixed sequential order.
    pub fn from_samples(
        samples: &[f64],
        d: usize,
        mode: SamplingMode,
        bins: Option<usize>,
    ) -> Result<Self> {
        let n = samples.len() / d;
        if n < 2 {
            return Err(Error::invalid("samples", "need at least two samples"));
        }
        let mut mean = vec![0.0; d];
        for row in samples.chunks(d) {
            for i in 0..d {
                mean[i] += row[i];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![vec![0.0; d]; d];
        for row in samples.chunks(d) {
            for i in 0..d {
                for j in i..d {
                    cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[i][j] /= (n - 1) as f64;
                cov[j][i] = cov[i][j];
            }
        }
        let standard_error = match mode {
            SamplingMode::EnsemblePullback => {
                (0..d).map(|i| (cov[i][i] / n as f64).sqrt()).collect()
            }
            SamplingMode::ErgodicTimeAverage => batch_means_error(samples, d, &mean, &cov),
        };
        let histograms = (0..d)
            .map(|i| Histogram::build(samples.iter().skip(i).step_by(d).copied(), bins))
            .collect();
        Ok(StationaryEstimate {
            samples: n,
            mode,
            mean,
            covariance: cov,
            standard_error,
            histograms,
        })
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let d = self.mean.len();
        DMatrix::from_fn(d, d, |i, j| self.covariance[i][j])
    }

    pub fn covariance_trace(&self) -> f64 {
        (0..self.mean.len()).map(|i| self.covariance[i][i]).sum()
    }
}

const BATCHES: usize = 50;

fn batch_means_error(samples: &[f64], d: usize, mean: &[f64], cov: &[Vec<f64>]) -> Vec<f64> {
    let n = samples.len() / d;
    if n < 2 * BATCHES {
        return (0..d).map(|i| (cov[i][i] / n as f64).sqrt()).collect();
    }
    let size = n / BATCHES;
    (0..d)
        .map(|i| {
            let mut s2 = 0.0;
            for b in 0..BATCHES {
                let m: f64 = (b * size..(b + 1) * size)
                    .map(|k| samples[k * d + i])
                    .sum::<f64>()
                    / size as f64;
                s2 += (m - mean[i]).powi(2);
            }
            (s2 / (BATCHES - 1) as f64 / BATCHES as f64).sqrt()
        })
        .collect()
}

/// Monte Carlo settings; `thin` defaults to `1/|lambda|`.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub mode: SamplingMode,
    pub burn_in: f64,
    pub dt: f64,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub thin: Option<f64>,
    pub bins: Option<usize>,
}

fn check_mc_preconditions(spec: &SystemSpec, opts: &McOptions) -> Result<f64> {
    let report = model::small_gain_report(spec, NormGrid::default())?;
    if !report.stable {
        return Err(Error::Refused(report.reason.unwrap_or_default()));
    }
    let lambda = report.spectral_abscissa.abs();
    if !(report.small_gain_ok || spec.lipschitz() < lambda) {
        return Err(Error::Refused(format!(
            "neither the small-gain condition (gain {:?}) nor L = {} < |lambda| = {lambda} holds",
            report.gain,
            spec.lipschitz()
        )));
    }
    if opts.burn_in < MIN_BURN_IN_DECAY_TIMES / lambda - 1e-9 {
        return Err(Error::Range {
            field: "burn_in".into(),
            message: format!("burn-in {} is below 10/|lambda|", opts.burn_in),
            required: MIN_BURN_IN_DECAY_TIMES / lambda,
        });
    }
    if opts.samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    Ok(lambda)
}

/// Raw samples (`n x d`, in seed or time order) of the stationary law.
pub fn mc_samples(spec: &SystemSpec, opts: &McOptions) -> Result<Vec<f64>> {
    let lambda = check_mc_preconditions(spec, opts)?;
    let d = spec.dim();
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![0.0; d]);
    if x0.len() != d {
        return Err(Error::Shape(format!(
            "x0 has {} entries, expected {d}",
            x0.len()
        )));
    }
    match opts.mode {
        SamplingMode::EnsemblePullback => {
            let burn = noise::steps_in(opts.burn_in, opts.dt, "burn_in")?;
            let prop = Propagator::new(spec, opts.dt);
            let rows: Vec<Result<Vec<f64>>> = (0..opts.samples)
                .into_par_iter()
                .map(|i| {
                    let path = NoisePath::sample(
                        opts.seed.wrapping_add(i as u64),
                        opts.dt,
                        opts.burn_in,
                        0.0,
                        spec.noise_dim(),
                    )?;
                    dynamics::pullback_with_propagator(
                        spec,
                        &prop,
                        path.view(),
                        &x0,
                        burn as f64 * opts.dt,
                    )
                })
                .collect();
            let mut out = Vec::with_capacity(opts.samples * d);
            for r in rows {
                out.extend(r?);
            }
            Ok(out)
        }
        SamplingMode::ErgodicTimeAverage => {
            let thin = opts.thin.unwrap_or(1.0 / lambda);
            let burn = noise::steps_in(opts.burn_in, opts.dt, "burn_in")?;
            let stride = ((thin / opts.dt).round() as usize).max(1);
            ergodic_samples(spec, opts.dt, opts.seed, &x0, burn, stride, opts.samples)
        }
    }
}

/// Forward run from `x0` at `t = 0`; increments are generated in chunks so
/// the path is never materialized.
fn ergodic_samples(
    spec: &SystemSpec,
    dt: f64,
    seed: u64,
    x0: &[f64],
    burn: usize,
    stride: usize,
    n: usize,
) -> Result<Vec<f64>> {
    const CHUNK: usize = 1 << 14;
    let d = spec.dim();
    let m = spec.noise_dim();
    let prop = Propagator::new(spec, dt);
    let gen = IncrementGenerator::new(seed, dt, m);
    let total = burn + stride * (n - 1);
    let mut out = Vec::with_capacity(n * d);
    let mut x = x0.to_vec();
    let mut hx = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut buf = vec![0.0; CHUNK * m];
    let mut k = 0usize;
    if burn == 0 {
        out.extend_from_slice(&x);
    }
    while k < total {
        let count = CHUNK.min(total - k);
        gen.fill(k as i64, count, &mut buf[..count * m]);
        for j in 0..count {
            spec.output().eval_into(&x, &mut hx);
            prop.step(&x, &hx, &buf[j * m..(j + 1) * m], &mut next);
            std::mem::swap(&mut x, &mut next);
            let step = k + j + 1;
            if step >= burn && (step - burn).is_multiple_of(stride) {
                dynamics::check_finite(&x, step as f64 * dt)?;
                out.extend_from_slice(&x);
            }
        }
        k += count;
    }
    Ok(out)
}

pub fn mc_stationary(spec: &SystemSpec, opts: &McOptions) -> Result<StationaryEstimate> {
    let samples = mc_samples(spec, opts)?;
    StationaryEstimate::from_samples(&samples, spec.dim(), opts.mode, opts.bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub density: Vec<f64>,
    pub normalization: f64,
}

impl DensityGrid {
    /// Linear interpolation, zero outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let j = self.xs.partition_point(|&v| v <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        let f = (x - x0) / (x1 - x0);
        self.density[j - 1] * (1.0 - f) + self.density[j] * f
    }

    /// CSV with columns `x, p`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .xs
            .iter()
            .zip(&self.density)
            .map(|(&x, &p)| vec![x, p])
            .collect();
        export::write_table(writer, &["x", "p"], &rows)
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Share of the grid width on each side treated as the edge.
const EDGE_FRACTION: f64 = 0.02;
const EDGE_MASS: f64 = 1e-4;

/// `p(x) ~ exp((2/sigma^2) int (a y + h(y)) dy)` for the scalar system
/// `dx = (a x + h(x)) dt + sigma dW`, by cumulative trapezoid in log space.
pub fn exact_density_1d(
    a: f64,
    h: &OutputFunctionSpec,
    sigma: f64,
    xs: &[f64],
) -> Result<DensityGrid> {
    if !(a < 0.0) {
        return Err(Error::invalid("a", format!("must be negative, got {a}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    if h.dim() != 1 {
        return Err(Error::Shape(format!(
            "output function has dimension {}, expected 1",
            h.dim()
        )));
    }
    if xs.len() < 3 || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "xs",
            "need at least three strictly increasing points",
        ));
    }
    let drift: Vec<f64> = xs.iter().map(|&x| a * x + h.eval(&[x])[0]).collect();
    let scale = 2.0 / (sigma * sigma);
    let mut logp = vec![0.0; xs.len()];
    for k in 1..xs.len() {
        logp[k] = logp[k - 1] + scale * 0.5 * (xs[k] - xs[k - 1]) * (drift[k - 1] + drift[k]);
    }
    let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut density: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
    let z = trapezoid(xs, &density);
    density.iter_mut().for_each(|p| *p /= z);
    let width = xs[xs.len() - 1] - xs[0];
    let (lo_cut, hi_cut) = (
        xs[0] + EDGE_FRACTION * width,
        xs[xs.len() - 1] - EDGE_FRACTION * width,
    );
    let lo_n = xs.partition_point(|&x| x <= lo_cut).max(2);
    let hi_n = xs.partition_point(|&x| x < hi_cut).min(xs.len() - 2);
    let edge = trapezoid(&xs[..lo_n], &density[..lo_n]) + trapezoid(&xs[hi_n..], &density[hi_n..]);
    if edge > EDGE_MASS {
        return Err(Error::invalid(
            "xs",
            format!("density mass {edge} near the grid edges exceeds {EDGE_MASS}; widen the grid"),
        ));
    }
    let normalization = trapezoid(xs, &density);
    Ok(DensityGrid {
        xs: xs.to_vec(),
        density,
        normalization,
    })
}

/// `int |p - hist|` with `p` interpolated on the density grid; mass of `p`
/// outside the histogram range counts in full.
pub fn histogram_l1(p: &DensityGrid, hist: &Histogram) -> f64 {
    const SUB: usize = 32;
    let mut l1 = 0.0;
    for j in 0..hist.counts.len() {
        let (e0, e1) = (hist.edges[j], hist.edges[j + 1]);
        let q = hist.density(j);
        let h = (e1 - e0) / SUB as f64;
        let mut acc = 0.0;
        for s in 0..=SUB {
            let w = if s == 0 || s == SUB { 0.5 } else { 1.0 };
            acc += w * (p.at(e0 + h * s as f64) - q).abs();
        }
        l1 += acc * h;
    }
    let (lo, hi) = (hist.edges[0], hist.edges[hist.edges.len() - 1]);
    let outside: Vec<(f64, f64)> =
        p.xs.iter()
            .zip(&p.density)
            .map(|(&x, &d)| (x, if x < lo || x > hi { d } else { 0.0 }))
            .collect();
    let xs: Vec<f64> = outside.iter().map(|v| v.0).collect();
    let ys: Vec<f64> = outside.iter().map(|v| v.1).collect();
    l1 + trapezoid(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DriftCheck {
    pub ok: bool,
    pub worst_margin: f64,
    pub lambda: f64,
    pub lipschitz: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub samples: usize,
}

const DRIFT_SEED: u64 = 0xD41F7;

/// Samples `LV(x) + (lambda - eps - L)|x|^2 / 2` with `V = |x|^2 / 2` at
/// radii in `[R, 10R]`; the condition holds when every margin is `<= 0`.
pub fn drift_check(
    spec: &SystemSpec,
    epsilon: f64,
    radius: f64,
    n_samples: usize,
) -> Result<DriftCheck> {
    if !(epsilon > 0.0) || !(radius > 0.0) || n_samples == 0 {
        return Err(Error::invalid(
            "epsilon",
            "need epsilon > 0, R > 0 and at least one sample",
        ));
    }
    let d = spec.dim();
    let sigma = spec.sigma();
    if sigma.ncols() != d || (0..d).any(|i| (0..d).any(|j| i != j && sigma[(i, j)] != 0.0)) {
        return Err(Error::invalid(
            "sigma",
            "the drift check needs a diagonal square sigma",
        ));
    }
    let lambda = -model::spectral_abscissa(spec.a())?;
    let l = spec.lipschitz();
    if !(lambda > l + epsilon) {
        return Err(Error::Refused(format!(
            "drift condition needs lambda > L + epsilon, got lambda = {lambda}, L = {l}, epsilon = {epsilon}"
        )));
    }
    let c = 0.5 * (lambda - epsilon - l);
    let noise_term = 0.5 * (0..d).map(|i| sigma[(i, i)].powi(2)).sum::<f64>();
    let a = linalg::row_major(spec.a());
    let mut rng = ChaCha8Rng::seed_from_u64(DRIFT_SEED);
    let mut dir = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        loop {
            for v in dir.iter_mut() {
                *v = 2.0 * rng.random::<f64>() - 1.0;
            }
            let n2: f64 = dir.iter().map(|v| v * v).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                let n = n2.sqrt();
                dir.iter_mut().for_each(|v| *v /= n);
                break;
            }
        }
        let r = radius * (1.0 + 9.0 * rng.random::<f64>());
        for i in 0..d {
            x[i] = r * dir[i];
        }
        spec.output().eval_into(&x, &mut f);
        linalg::gemv_acc(&a, &x, &mut f);
        let lv = noise_term + x.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        worst = worst.max(lv + c * r * r);
    }
    Ok(DriftCheck {
        ok: worst <= 0.0,
        worst_margin: worst,
        lambda,
        lipschitz: l,
        epsilon,
        radius,
        samples: n_samples,
    })
}

/// Solves `A x + h(x) = 0` by `x <- -A^{-1} h(x)`, halving the step if the
/// plain iteration stops contracting.
pub fn deterministic_equilibrium(spec: &SystemSpec) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-14;
    const MAX_ITER: usize = 10_000;
    let lu = spec.a().clone().lu();
    let d = spec.dim();
    for omega in [1.0, 0.5, 0.25] {
        let mut x = vec![0.0; d];
        let mut prev = f64::INFINITY;
        let mut growth = 0;
        for _ in 0..MAX_ITER {
            let hx = nalgebra::DVector::from_vec(spec.evaluate_h(&x));
            let target = -lu
                .solve(&hx)
                .ok_or_else(|| Error::invalid("A", "matrix is singular"))?;
            let mut step: f64 = 0.0;
            for i in 0..d {
                let nx = (1.0 - omega) * x[i] + omega * target[i];
                step = step.max((nx - x[i]).abs());
                x[i] = nx;
            }
            if step <= TOL * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
                return Ok(x);
            }
            if step >= prev {
                growth += 1;
                if growth > 20 {
                    break;
                }
            }
            prev = step;
        }
    }
    Err(Error::invalid(
        "system",
        "deterministic equilibrium iteration x <- -A^{-1} h(x) does not contract",
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentrationRow {
    pub scale: f64,
    pub mean_dist_to_det_eq: f64,
    pub cov_trace: f64,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
}

/// Moments under `sigma <- s sigma` for each scale, all with the same seeds.
pub fn small_noise_concentration(
    spec: &SystemSpec,
    scales: &[f64],
    opts: &McOptions,
) -> Result<(Vec<f64>, Vec<ConcentrationRow>)> {
    let report = model::small_gain_report(spec, NormGrid::default())?;
    if !report.small_gain_ok {
        return Err(Error::Refused(format!(
            "small-gain condition fails: {}",
            report.reason.unwrap_or_default()
        )));
    }
    let xbar = deterministic_equilibrium(spec)?;
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid(
                "scales",
                format!("scale {s} must be finite and nonnegative"),
            ));
        }
        let scaled = spec.with_sigma(spec.sigma() * s)?;
        let est = mc_stationary(&scaled, opts)?;
        let dist = est
            .mean
            .iter()
            .zip(&xbar)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(ConcentrationRow {
            scale: s,
            mean_dist_to_det_eq: dist,
            cov_trace: est.covariance_trace(),
            mean: est.mean,
            standard_error: est.standard_error,
        });
    }
    Ok((xbar, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_ou_variance() {
        let s = lyapunov_covariance(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert_abs_diff_eq!(s[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn unstable_lyapunov_names_eigenvalue() {
        let err = lyapunov_covariance(
            &DMatrix::from_element(1, 1, 0.3),
            &DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap_err();
        assert!(err.to_string().contains("0.3"), "{err}");
    }

    #[test]
    fn histogram_counts_sum_to_samples() {
        let xs: Vec<f64> = (0..1000)
            .map(|k| ((k * 7919) % 1000) as f64 / 37.0)
            .collect();
        let h = Histogram::build(xs.iter().copied(), None);
        assert_eq!(h.total(), 1000);
        let h = Histogram::build(xs.iter().copied(), Some(13));
        assert_eq!(h.counts.len(), 13);
        assert_eq!(h.total(), 1000);
    }

    #[test]
    fn degenerate_samples_give_one_bin() {
        let h = Histogram::build([2.0; 10].into_iter(), None);
        assert_eq!(h.counts, vec![10]);
    }

    #[test]
    fn narrow_grid_is_refused() {
        let h = OutputFunctionSpec::constant(&[0.0]).unwrap();
        let xs: Vec<f64> = (0..=100).map(|k| -0.5 + 0.01 * k as f64).collect();
        let err = exact_density_1d(-1.0, &h, 1.0, &xs).unwrap_err();
        assert!(err.to_string().contains("widen"), "{err}");
    }
}
