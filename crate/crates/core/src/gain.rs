//! The input-to-state operator `K` and the gain operator `K^h = h o K`,
//! realized along one noise orbit: an input `u` is the grid function
//! `v(t_k) = u(theta_{t_k} omega)` and `K` becomes the causal recursion
//! `X_{k+1} = Phi(dt) X_k + Psi(dt) v_k + Phi(dt) sigma dW_k` from
//! `X = 0` at the left edge of the path.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, Propagator, Scheme, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::export;
use crate::model::{self, NormGrid, SystemSpec};
use crate::noise::{self, NoisePath};

/// Default burn-in in units of `1/|lambda|`; `e^{-18.5}` is about `1e-8`.
pub const WARMUP_DECAY_TIMES: f64 = 18.5;

/// A grid function on the full path grid with values in `[0, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputProcess {
    start_time: f64,
    dt: f64,
    d: usize,
    values: Vec<f64>,
    bound: Vec<f64>,
}

impl InputProcess {
    pub fn from_values(
        path: &NoisePath,
        d: usize,
        values: Vec<f64>,
        bound: &[f64],
    ) -> Result<Self> {
        let points = path.steps() + 1;
        if bound.len() != d || values.len() != points * d {
            return Err(Error::Shape(format!(
                "input has {} values and bound of length {}, expected {} points x {d}",
                values.len(),
                bound.len(),
                points
            )));
        }
        for (k, row) in values.chunks(d).enumerate() {
            for (i, (&v, &n)) in row.iter().zip(bound).enumerate() {
                if !(v >= 0.0 && v <= n) {
                    return Err(Error::invalid(
                        "u",
                        format!("value {v} at grid point {k}, coordinate {i} outside [0, {n}]"),
                    ));
                }
            }
        }
        Ok(InputProcess {
            start_time: path.time(0),
            dt: path.dt(),
            d,
            values,
            bound: bound.to_vec(),
        })
    }

    /// The same vector at every grid point.
    pub fn constant(path: &NoisePath, value: &[f64], bound: &[f64]) -> Result<Self> {
        let points = path.steps() + 1;
        Self::from_values(path, value.len(), value.repeat(points), bound)
    }

    /// Independent uniform draws in `[0, N_i]` at every grid point.
    pub fn random(path: &NoisePath, bound: &[f64], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = path.steps() + 1;
        let values = (0..points * bound.len())
            .map(|j| rng.random::<f64>() * bound[j % bound.len()])
            .collect();
        InputProcess {
            start_time: path.time(0),
            dt: path.dt(),
            d: bound.len(),
            values,
            bound: bound.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bound(&self) -> &[f64] {
        &self.bound
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_{k >= from} |u(t_k) - v(t_k)|_inf`.
    pub fn sup_distance(&self, other: &InputProcess, from: usize) -> f64 {
        self.values[from * self.d..]
            .iter()
            .zip(&other.values[from * self.d..])
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `u_i(t_k) - v_i(t_k)` over grid points `from..`.
    pub fn max_excess(&self, other: &InputProcess, from: usize) -> f64 {
        self.values[from * self.d..]
            .iter()
            .zip(&other.values[from * self.d..])
            .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b))
    }

    /// CSV with columns `t, u_1 .. u_d`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        export::write_series(
            writer,
            "u",
            (0..self.len()).map(|k| self.time(k)),
            &self.values,
            self.d,
        )
    }

    fn check_grid(&self, path: &NoisePath, d: usize) -> Result<()> {
        if self.d != d
            || self.len() != path.steps() + 1
            || self.dt != path.dt()
            || self.start_time != path.time(0)
        {
            return Err(Error::Shape(format!(
                "input grid ({} points of dimension {}, dt = {}) does not match the path ({} points, dt = {}) and system dimension {d}",
                self.len(),
                self.d,
                self.dt,
                path.steps() + 1,
                path.dt()
            )));
        }
        Ok(())
    }
}

/// `K` and `K^h` on one path, with the trusted window after the burn-in.
#[derive(Debug, Clone)]
pub struct GainOperator<'a> {
    spec: &'a SystemSpec,
    path: &'a NoisePath,
    prop: Propagator,
    warmup_steps: usize,
}

impl<'a> GainOperator<'a> {
    /// Burn-in `18.5/|lambda|`, rounded up to the grid.
    pub fn new(spec: &'a SystemSpec, path: &'a NoisePath) -> Result<Self> {
        let abscissa = model::spectral_abscissa(spec.a())?;
        if !(abscissa < 0.0) {
            return Err(Error::Refused(format!(
                "A is not stable (spectral abscissa {abscissa}); K is undefined"
            )));
        }
        let steps = (WARMUP_DECAY_TIMES / abscissa.abs() / path.dt() - 1e-9).ceil() as usize;
        Self::with_warmup_steps(spec, path, steps)
    }

    pub fn with_warmup(spec: &'a SystemSpec, path: &'a NoisePath, warmup: f64) -> Result<Self> {
        let steps = noise::steps_in(warmup, path.dt(), "warmup")?;
        Self::with_warmup_steps(spec, path, steps)
    }

    fn with_warmup_steps(
        spec: &'a SystemSpec,
        path: &'a NoisePath,
        warmup_steps: usize,
    ) -> Result<Self> {
        if path.noise_dim() != spec.noise_dim() {
            return Err(Error::Shape(format!(
                "path has {} noise components, sigma has {} columns",
                path.noise_dim(),
                spec.noise_dim()
            )));
        }
        if warmup_steps > path.steps() {
            return Err(Error::Range {
                field: "t_past".into(),
                message: format!(
                    "burn-in {} leaves no trusted window on a path of length {}",
                    warmup_steps as f64 * path.dt(),
                    path.t_past() + path.t_fwd()
                ),
                required: warmup_steps as f64 * path.dt() - path.t_fwd(),
            });
        }
        Ok(GainOperator {
            spec,
            path,
            prop: Propagator::new(spec, path.dt()),
            warmup_steps,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        self.spec
    }

    pub fn path(&self) -> &NoisePath {
        self.path
    }

    pub fn warmup(&self) -> f64 {
        self.warmup_steps as f64 * self.path.dt()
    }

    /// Grid index where the trusted window starts.
    pub fn trusted_start(&self) -> usize {
        self.warmup_steps
    }

    /// Grid index of `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = noise::shift_steps(t, self.path.dt())? + self.path.past_steps() as i64;
        if k < 0 || k as usize > self.path.steps() {
            return Err(Error::Range {
                field: "t".into(),
                message: format!(
                    "t = {t} outside the path window [{}, {}]",
                    -self.path.t_past(),
                    self.path.t_fwd()
                ),
                required: t.abs(),
            });
        }
        Ok(k as usize)
    }

    /// Grid-point states of `K(u)` from `X = 0` at the left edge.
    fn k_states(&self, u: &InputProcess) -> Result<Vec<f64>> {
        let d = self.spec.dim();
        u.check_grid(self.path, d)?;
        let n = self.path.steps();
        let mut states = vec![0.0; (n + 1) * d];
        let mut next = vec![0.0; d];
        for k in 0..n {
            let (done, rest) = states.split_at_mut((k + 1) * d);
            self.prop.step(
                &done[k * d..],
                u.value(k),
                self.path.increment(k),
                &mut next,
            );
            rest[..d].copy_from_slice(&next);
        }
        dynamics::check_finite(&states[n * d..], self.path.t_fwd())?;
        Ok(states)
    }

    fn trajectory(&self, states: Vec<f64>, first: usize) -> Trajectory {
        let d = self.spec.dim();
        Trajectory::from_parts(
            d,
            states[first * d..].to_vec(),
            TrajectoryMeta {
                seed: self.path.seed(),
                dt: self.path.dt(),
                x0: vec![0.0; d],
                start_time: self.path.time(first),
                scheme: Scheme::ExponentialEuler,
            },
        )
    }

    /// `[K(u)](theta_t omega)` on the trusted window.
    pub fn apply_k(&self, u: &InputProcess) -> Result<Trajectory> {
        let states = self.k_states(u)?;
        Ok(self.trajectory(states, self.warmup_steps))
    }

    /// `K(u)` on every grid point, burn-in included.
    pub fn apply_k_full(&self, u: &InputProcess) -> Result<Trajectory> {
        let states = self.k_states(u)?;
        Ok(self.trajectory(states, 0))
    }

    /// `h(K(u))` on the full grid.
    pub fn apply_gain(&self, u: &InputProcess) -> Result<InputProcess> {
        let d = self.spec.dim();
        let mut values = self.k_states(u)?;
        let mut hx = vec![0.0; d];
        for row in values.chunks_mut(d) {
            self.spec.output().eval_into(row, &mut hx);
            row.copy_from_slice(&hx);
        }
        Ok(InputProcess {
            start_time: u.start_time,
            dt: u.dt,
            d,
            values,
            bound: self.spec.output().bound().to_vec(),
        })
    }

    /// Sup-norm distance on the trusted window.
    pub fn distance(&self, u1: &InputProcess, u2: &InputProcess) -> f64 {
        u1.sup_distance(u2, self.warmup_steps)
    }

    /// `rho(K^h u1, K^h u2) / rho(u1, u2)` on the trusted window.
    pub fn contraction_ratio(&self, u1: &InputProcess, u2: &InputProcess) -> Result<f64> {
        let den = self.distance(u1, u2);
        if den == 0.0 {
            return Err(Error::Numerical(
                "contraction ratio undefined: the inputs coincide on the trusted window".into(),
            ));
        }
        let num = self.distance(&self.apply_gain(u1)?, &self.apply_gain(u2)?);
        Ok(num / den)
    }

    /// `h(0)` clipped to `[0, N]`, held constant.
    pub fn default_initial_guess(&self) -> Result<InputProcess> {
        let bound = self.spec.output().bound();
        let h0: Vec<f64> = self
            .spec
            .evaluate_h(&vec![0.0; self.spec.dim()])
            .iter()
            .zip(bound)
            .map(|(v, n)| v.clamp(0.0, *n))
            .collect();
        InputProcess::constant(self.path, &h0, bound)
    }

    /// Banach iteration `u <- K^h u` until the trusted-window residual drops
    /// to `tol`.
    pub fn iterate_fixed_point(
        &self,
        u0: Option<InputProcess>,
        tol: f64,
        max_iter: usize,
    ) -> Result<FixedPointResult> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tol", "must be positive"));
        }
        let report = model::small_gain_report(self.spec, NormGrid::default())?;
        if !report.small_gain_ok {
            return Err(Error::Refused(format!(
                "small-gain condition fails ({}); run `check` and consult the report",
                report.reason.as_deref().unwrap_or("gain >= 1")
            )));
        }
        let gain = report.gain.unwrap_or(f64::NAN);
        let mut u = match u0 {
            Some(u) => u,
            None => self.default_initial_guess()?,
        };
        let mut residuals = Vec::new();
        loop {
            let next = self.apply_gain(&u)?;
            let r = self.distance(&next, &u);
            residuals.push(r);
            u = next;
            if r <= tol {
                break;
            }
            if residuals.len() >= max_iter {
                return Err(Error::NonConvergence {
                    tol,
                    iterations: residuals.len(),
                    last: r,
                    residuals,
                });
            }
        }
        let rate_estimate = geometric_rate(&residuals);
        let equilibrium = self.apply_k(&u)?;
        Ok(FixedPointResult {
            iterations: residuals.len(),
            residuals,
            rate_estimate,
            gain,
            warmup: self.warmup(),
            u_star: u,
            equilibrium,
        })
    }

    /// Equilibrium invariance and pullback convergence of `X* = K(u*)`.
    ///
    /// `max_deviation` integrates forward from `X*(t0)` with plain
    /// Euler-Maruyama, an independent scheme, so it measures discretization
    /// error; `scheme_deviation` repeats this with the scheme `K` itself is
    /// built from. `pullback_gap` compares `pullback(x, t_past - warmup)`
    /// with `X*(0)` over the initial conditions (default set when `None`).
    pub fn verify_equilibrium(
        &self,
        result: &FixedPointResult,
        t0: f64,
        t1: f64,
        initial_conditions: Option<&[Vec<f64>]>,
    ) -> Result<EquilibriumCheck> {
        let eq = &result.equilibrium;
        let k0 = eq.index_of(t0)?;
        let k1 = eq.index_of(t1)?;
        if k1 <= k0 {
            return Err(Error::invalid("t1", "need t0 < t1"));
        }
        let view = self.path.view();
        let x_start = eq.state(k0).to_vec();
        let deviation = |scheme| -> Result<f64> {
            let tr = dynamics::integrate_with_propagator(
                self.spec,
                &self.prop,
                view,
                &x_start,
                eq.time(k0),
                eq.time(k1),
                scheme,
            )?;
            let mut worst: f64 = 0.0;
            for j in 0..tr.len() {
                for (a, b) in tr.state(j).iter().zip(eq.state(k0 + j)) {
                    worst = worst.max((a - b).abs());
                }
            }
            Ok(worst)
        };
        let max_deviation = deviation(Scheme::EulerMaruyama)?;
        let scheme_deviation = deviation(Scheme::ExponentialEuler)?;

        let d = self.spec.dim();
        let past = self.path.past_steps();
        if self.warmup_steps > past {
            return Err(Error::Range {
                field: "t_past".into(),
                message: "t = 0 lies inside the burn-in; the pullback gap needs t_past > warmup"
                    .into(),
                required: self.warmup(),
            });
        }
        let gap_steps = past - self.warmup_steps;
        let gap_time = gap_steps as f64 * self.path.dt();
        let x_star0 = eq.state_at(0.0)?.to_vec();
        let defaults;
        let ics = match initial_conditions {
            Some(ics) => ics,
            None => {
                defaults = default_initial_conditions(d);
                &defaults
            }
        };
        let mut pullback_gap: f64 = 0.0;
        for x in ics {
            let p = dynamics::pullback_with_propagator(self.spec, &self.prop, view, x, gap_time)?;
            for (a, b) in p.iter().zip(&x_star0) {
                pullback_gap = pullback_gap.max((a - b).abs());
            }
        }
        Ok(EquilibriumCheck {
            t0: eq.time(k0),
            t1: eq.time(k1),
            max_deviation,
            scheme_deviation,
            pullback_time: gap_time,
            pullback_gap,
            initial_conditions: ics.len(),
        })
    }
}

/// `{0, 5*1, -5*1, 5 e_1, -5 e_d}`.
pub fn default_initial_conditions(d: usize) -> Vec<Vec<f64>> {
    let mut e1 = vec![0.0; d];
    e1[0] = 5.0;
    let mut ed = vec![0.0; d];
    ed[d - 1] = -5.0;
    vec![vec![0.0; d], vec![5.0; d], vec![-5.0; d], e1, ed]
}

fn geometric_rate(residuals: &[f64]) -> f64 {
    let n = residuals.len();
    if n < 2 || residuals[0] == 0.0 {
        return 0.0;
    }
    (residuals[n - 1] / residuals[0]).powf(1.0 / (n - 1) as f64)
}

#[derive(Debug, Clone)]
pub struct FixedPointResult {
    pub u_star: InputProcess,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// Geometric mean of successive residual ratios.
    pub rate_estimate: f64,
    /// `-L d^2 / lambda` from the small-gain report.
    pub gain: f64,
    pub warmup: f64,
    /// `X*(t) = [K(u*)](theta_t omega)` on the trusted window.
    pub equilibrium: Trajectory,
}

impl FixedPointResult {
    pub fn summary(&self) -> FixedPointSummary {
        FixedPointSummary {
            iterations: self.iterations,
            residuals: self.residuals.clone(),
            rate_estimate: self.rate_estimate,
            gain: self.gain,
            warmup: self.warmup,
            x_star_at_zero: self.equilibrium.state_at(0.0).ok().map(<[f64]>::to_vec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FixedPointSummary {
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub rate_estimate: f64,
    pub gain: f64,
    pub warmup: f64,
    pub x_star_at_zero: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumCheck {
    pub t0: f64,
    pub t1: f64,
    pub max_deviation: f64,
    pub scheme_deviation: f64,
    pub pullback_time: f64,
    pub pullback_gap: f64,
    pub initial_conditions: usize,
}

/// The tail envelopes `a_tau^h`, `b_tau^h` evaluated along the orbit:
/// at grid point `r` they are the componentwise min/max of
/// `h(phi(t, theta_{r-t} omega) x)` over grid `t` in `[tau, horizon]`.
/// Points closer than `horizon` to the left edge get the trivial bounds
/// `0` and `N`.
pub fn envelope_inputs(
    spec: &SystemSpec,
    path: &NoisePath,
    x: &[f64],
    tau: f64,
    horizon: f64,
) -> Result<(InputProcess, InputProcess)> {
    let d = spec.dim();
    if x.len() != d {
        return Err(Error::Shape(format!(
            "x has {} entries, expected {d}",
            x.len()
        )));
    }
    let dt = path.dt();
    let tau_steps = noise::steps_in(tau, dt, "tau")?;
    let h_steps = noise::steps_in(horizon, dt, "horizon")?;
    if h_steps <= tau_steps {
        return Err(Error::invalid("horizon", "must exceed tau"));
    }
    let n = path.steps();
    if h_steps > n {
        return Err(Error::Range {
            field: "t_past".into(),
            message: format!("horizon {horizon} exceeds the path length"),
            required: horizon - path.t_fwd(),
        });
    }
    let prop = Propagator::new(spec, dt);
    let bound = spec.output().bound();
    let points = n + 1;
    let starts: Vec<usize> = (0..=n - tau_steps).collect();
    let chunk = (starts.len() / (4 * rayon::current_num_threads()).max(1)).max(1);
    let (lower, upper) = starts
        .par_chunks(chunk)
        .map(|ss| {
            let mut lo = vec![f64::INFINITY; points * d];
            let mut hi = vec![f64::NEG_INFINITY; points * d];
            let mut xs = vec![0.0; d];
            let mut next = vec![0.0; d];
            let mut hx = vec![0.0; d];
            for &s in ss {
                xs.copy_from_slice(x);
                if tau_steps == 0 && s >= h_steps {
                    spec.output().eval_into(&xs, &mut hx);
                    for i in 0..d {
                        lo[s * d + i] = lo[s * d + i].min(hx[i]);
                        hi[s * d + i] = hi[s * d + i].max(hx[i]);
                    }
                }
                let last = (s + h_steps).min(n);
                for k in s..last {
                    spec.output().eval_into(&xs, &mut hx);
                    prop.step(&xs, &hx, path.increment(k), &mut next);
                    std::mem::swap(&mut xs, &mut next);
                    let r = k + 1;
                    if r - s >= tau_steps && r >= h_steps {
                        spec.output().eval_into(&xs, &mut hx);
                        for i in 0..d {
                            lo[r * d + i] = lo[r * d + i].min(hx[i]);
                            hi[r * d + i] = hi[r * d + i].max(hx[i]);
                        }
                    }
                }
            }
            (lo, hi)
        })
        .reduce(
            || {
                (
                    vec![f64::INFINITY; points * d],
                    vec![f64::NEG_INFINITY; points * d],
                )
            },
            |(mut lo, mut hi), (l2, h2)| {
                for (a, b) in lo.iter_mut().zip(l2) {
                    *a = a.min(b);
                }
                for (a, b) in hi.iter_mut().zip(h2) {
                    *a = a.max(b);
                }
                (lo, hi)
            },
        );
    let mut lower = lower;
    let mut upper = upper;
    for k in 0..points {
        for i in 0..d {
            if k < h_steps {
                lower[k * d + i] = 0.0;
                upper[k * d + i] = bound[i];
            }
        }
    }
    if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            time: f64::NAN,
            norm: f64::INFINITY,
        });
    }
    Ok((
        InputProcess::from_values(path, d, lower, bound)?,
        InputProcess::from_values(path, d, upper, bound)?,
    ))
}

/// Largest contraction ratio over independent paths, `pairs` random input
/// pairs per path. Paths are processed in parallel; the maximum does not
/// depend on scheduling.
pub fn max_contraction_over_paths(
    spec: &SystemSpec,
    paths: &[NoisePath],
    pairs: usize,
) -> Result<f64> {
    let ratios: Vec<Result<f64>> = paths
        .par_iter()
        .enumerate()
        .map(|(p, path)| {
            let op = GainOperator::new(spec, path)?;
            let bound = spec.output().bound();
            let mut worst: f64 = 0.0;
            for j in 0..pairs {
                let key = ((p as u64) << 32) | (2 * j as u64);
                let u1 = InputProcess::random(path, bound, key);
                let u2 = InputProcess::random(path, bound, key + 1);
                worst = worst.max(op.contraction_ratio(&u1, &u2)?);
            }
            Ok(worst)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in ratios {
        worst = worst.max(r?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Monotonicity, OutputFunctionSpec, OutputKind};
    use nalgebra::{DMatrix, DVector};

    fn ex52(sigma: f64) -> SystemSpec {
        SystemSpec::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0])),
            DMatrix::from_diagonal_element(3, 3, sigma),
            OutputFunctionSpec::uniform(
                OutputKind::ReciprocalOffsetTanh,
                OutputFunctionSpec::cyclic_wiring(3),
                &[4.0, 1.0],
                Monotonicity::AntiOrderPreserving,
            )
            .unwrap(),
            1.0 / 16.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_input_without_noise_stays_at_zero() {
        let spec = ex52(0.0);
        let path = NoisePath::sample(1, 0.01, 20.0, 1.0, 3).unwrap();
        let op = GainOperator::new(&spec, &path).unwrap();
        let u = InputProcess::constant(&path, &[0.0; 3], spec.output().bound()).unwrap();
        let x = op.apply_k(&u).unwrap();
        assert!(x.states().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_grid_is_a_shape_error() {
        let spec = ex52(0.1);
        let a = NoisePath::sample(1, 0.01, 20.0, 0.0, 3).unwrap();
        let b = NoisePath::sample(1, 0.02, 20.0, 0.0, 3).unwrap();
        let op = GainOperator::new(&spec, &a).unwrap();
        let u = InputProcess::constant(&b, &[0.1; 3], spec.output().bound()).unwrap();
        assert!(matches!(op.apply_k(&u), Err(Error::Shape(_))));
    }

    #[test]
    fn identical_inputs_have_no_ratio() {
        let spec = ex52(0.1);
        let path = NoisePath::sample(1, 0.01, 20.0, 0.0, 3).unwrap();
        let op = GainOperator::new(&spec, &path).unwrap();
        let u = InputProcess::random(&path, spec.output().bound(), 3);
        assert!(op.contraction_ratio(&u, &u.clone()).is_err());
    }

    #[test]
    fn out_of_range_input_is_rejected() {
        let path = NoisePath::sample(1, 0.5, 1.0, 0.0, 1).unwrap();
        assert!(InputProcess::constant(&path, &[0.3], &[0.25]).is_err());
    }

    #[test]
    fn burn_in_longer_than_path_is_a_range_error() {
        let spec = ex52(0.1);
        let path = NoisePath::sample(1, 0.01, 5.0, 0.0, 3).unwrap();
        assert!(matches!(
            GainOperator::new(&spec, &path),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn geometric_rate_of_exact_decay() {
        let r = [1.0, 0.5, 0.25, 0.125];
        assert!((geometric_rate(&r) - 0.5).abs() < 1e-15);
        assert_eq!(geometric_rate(&[0.3]), 0.0);
    }
}
