//! Forward and pullback integration of `dX = [A X + h(X)] dt + sigma dW`.
//!
//! The default scheme is exponential Euler,
//! `X_{k+1} = Phi(dt) X_k + Psi(dt) h(X_k) + Phi(dt) sigma dW_k`,
//! which is exact for the linear part. Plain Euler-Maruyama is kept for
//! cross-checks. Integrator and noise share one grid; increments are never
//! interpolated.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export;
use crate::linalg::{self, StepIntegrals};
use crate::model::SystemSpec;
use crate::noise::{self, PathView};

/// States beyond this max-norm are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ExponentialEuler,
    EulerMaruyama,
}

/// One-step maps of both schemes for a fixed `dt`, stored row-major.
#[derive(Debug, Clone)]
pub struct Propagator {
    d: usize,
    m: usize,
    dt: f64,
    phi: Vec<f64>,
    psi: Vec<f64>,
    phi_sigma: Vec<f64>,
    a: Vec<f64>,
    sigma: Vec<f64>,
    integrals: StepIntegrals,
}

impl Propagator {
    pub fn new(spec: &SystemSpec, dt: f64) -> Self {
        let integrals = linalg::step_integrals(spec.a(), dt);
        let phi_sigma = &integrals.phi * spec.sigma();
        Propagator {
            d: spec.dim(),
            m: spec.noise_dim(),
            dt,
            phi: linalg::row_major(&integrals.phi),
            psi: linalg::row_major(&integrals.psi),
            phi_sigma: linalg::row_major(&phi_sigma),
            a: linalg::row_major(spec.a()),
            sigma: linalg::row_major(spec.sigma()),
            integrals,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn integrals(&self) -> &StepIntegrals {
        &self.integrals
    }

    /// `out = Phi x + Psi drive + Phi sigma dw`.
    #[inline]
    pub fn step(&self, x: &[f64], drive: &[f64], dw: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        linalg::gemv_acc(&self.phi, x, out);
        linalg::gemv_acc(&self.psi, drive, out);
        linalg::gemv_acc(&self.phi_sigma, dw, out);
    }

    /// `out = x + (A x + drive) dt + sigma dw`.
    #[inline]
    pub fn step_em(&self, x: &[f64], drive: &[f64], dw: &[f64], out: &mut [f64]) {
        out.copy_from_slice(drive);
        linalg::gemv_acc(&self.a, x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + *o * self.dt;
        }
        linalg::gemv_acc(&self.sigma, dw, out);
    }

    #[inline]
    pub fn step_with(&self, scheme: Scheme, x: &[f64], drive: &[f64], dw: &[f64], out: &mut [f64]) {
        match scheme {
            Scheme::ExponentialEuler => self.step(x, drive, dw, out),
            Scheme::EulerMaruyama => self.step_em(x, drive, dw, out),
        }
    }
}

#[inline]
pub(crate) fn check_finite(x: &[f64], time: f64) -> Result<()> {
    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(norm <= DIVERGENCE_LIMIT) {
        return Err(Error::Divergence { time, norm });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub seed: Option<u64>,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub start_time: f64,
    pub scheme: Scheme,
}

/// States on the uniform grid `start_time + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    d: usize,
    states: Vec<f64>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    pub(crate) fn from_parts(d: usize, states: Vec<f64>, meta: TrajectoryMeta) -> Self {
        debug_assert_eq!(states.len() % d, 0);
        Trajectory { d, states, meta }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.meta.start_time + k as f64 * self.meta.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Grid index of time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = noise::shift_steps(t - self.meta.start_time, self.meta.dt)?;
        if k < 0 || k as usize >= self.len() {
            return Err(Error::Range {
                field: "t".into(),
                message: format!(
                    "t = {t} outside trajectory [{}, {}]",
                    self.meta.start_time,
                    self.time(self.len() - 1)
                ),
                required: t.abs(),
            });
        }
        Ok(k as usize)
    }

    pub fn state_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.state(self.index_of(t)?))
    }

    /// Sub-trajectory over grid indices `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> Trajectory {
        let mut meta = self.meta.clone();
        meta.start_time = self.time(first);
        Trajectory {
            d: self.d,
            states: self.states[first * self.d..(last + 1) * self.d].to_vec(),
            meta,
        }
    }

    /// CSV with columns `t, x_1 .. x_d`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        export::write_series(writer, "x", self.times(), &self.states, self.d)
    }
}

/// Runs the scheme over view steps `first .. first + steps` starting from
/// `x0`; `drive` supplies the drift input at each step from the current state.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_steps(
    spec: &SystemSpec,
    prop: &Propagator,
    view: PathView<'_>,
    x0: &[f64],
    first: i64,
    steps: usize,
    scheme: Scheme,
    mut record: impl FnMut(usize, &[f64]),
) -> Result<Vec<f64>> {
    let d = spec.dim();
    let mut x = x0.to_vec();
    let mut hx = vec![0.0; d];
    let mut next = vec![0.0; d];
    record(0, &x);
    for j in 0..steps {
        spec.output().eval_into(&x, &mut hx);
        prop.step_with(scheme, &x, &hx, view.increment(first + j as i64), &mut next);
        std::mem::swap(&mut x, &mut next);
        if x.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            check_finite(&x, (first + j as i64 + 1) as f64 * prop.dt)?;
        }
        record(j + 1, &x);
    }
    Ok(x)
}

fn check_x0(spec: &SystemSpec, x0: &[f64]) -> Result<()> {
    if x0.len() != spec.dim() {
        return Err(Error::Shape(format!(
            "initial condition has {} entries, system dimension is {}",
            x0.len(),
            spec.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x0", "must be finite"));
    }
    Ok(())
}

fn check_noise_dim(spec: &SystemSpec, view: &PathView<'_>) -> Result<()> {
    if view.noise_dim() != spec.noise_dim() {
        return Err(Error::Shape(format!(
            "path has {} noise components, sigma has {} columns",
            view.noise_dim(),
            spec.noise_dim()
        )));
    }
    Ok(())
}

/// Solution on `[t0, t1]` (view time) started at `x0`.
pub fn integrate_forward(
    spec: &SystemSpec,
    view: PathView<'_>,
    x0: &[f64],
    t0: f64,
    t1: f64,
) -> Result<Trajectory> {
    integrate_forward_with(spec, view, x0, t0, t1, Scheme::ExponentialEuler)
}

pub fn integrate_forward_with(
    spec: &SystemSpec,
    view: PathView<'_>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    let prop = Propagator::new(spec, view.dt());
    integrate_with_propagator(spec, &prop, view, x0, t0, t1, scheme)
}

pub(crate) fn integrate_with_propagator(
    spec: &SystemSpec,
    prop: &Propagator,
    view: PathView<'_>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    scheme: Scheme,
) -> Result<Trajectory> {
    check_x0(spec, x0)?;
    check_noise_dim(spec, &view)?;
    if !(t0 < t1) {
        return Err(Error::invalid(
            "t1",
            format!("need t0 < t1, got [{t0}, {t1}]"),
        ));
    }
    let first = noise::shift_steps(t0, view.dt())?;
    let last = noise::shift_steps(t1, view.dt())?;
    let steps = (last - first) as usize;
    view.require_steps(first, steps)?;
    let d = spec.dim();
    let mut states = Vec::with_capacity((steps + 1) * d);
    run_steps(spec, prop, view, x0, first, steps, scheme, |_, x| {
        states.extend_from_slice(x)
    })?;
    Ok(Trajectory::from_parts(
        d,
        states,
        TrajectoryMeta {
            seed: view.base().seed(),
            dt: view.dt(),
            x0: x0.to_vec(),
            start_time: first as f64 * view.dt(),
            scheme,
        },
    ))
}

/// `phi(t, theta_{-t} omega) x`: the state at view time 0 of the solution
/// started from `x` at view time `-t`.
pub fn pullback(spec: &SystemSpec, view: PathView<'_>, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let prop = Propagator::new(spec, view.dt());
    pullback_with_propagator(spec, &prop, view, x, t)
}

pub(crate) fn pullback_with_propagator(
    spec: &SystemSpec,
    prop: &Propagator,
    view: PathView<'_>,
    x: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    check_x0(spec, x)?;
    check_noise_dim(spec, &view)?;
    if t < 0.0 {
        return Err(Error::invalid("t", "pullback time must be nonnegative"));
    }
    let steps = noise::steps_in(t, view.dt(), "t")?;
    if steps == 0 {
        return Ok(x.to_vec());
    }
    let shifted = view
        .shift_steps(-(steps as i64))
        .map_err(|_| Error::Range {
            field: "t".into(),
            message: format!(
                "pullback time {t} exceeds the path's past horizon {}",
                view.t_past()
            ),
            required: t - view.offset(),
        })?;
    shifted.require_steps(0, steps)?;
    run_steps(
        spec,
        prop,
        shifted,
        x,
        0,
        steps,
        Scheme::ExponentialEuler,
        |_, _| {},
    )
}

/// `max_t |X(t) - [Phi(t) x0 + int_0^t Phi(t-s) h(X(s)) ds + N_0(t)]|` where
/// the drift integral uses `h(X)` interpolated linearly between grid points
/// and `N_0` is the stochastic convolution started at 0. The scheme freezes
/// `h` over each step, so the residual isolates that quadrature error.
pub fn voc_residual(spec: &SystemSpec, view: PathView<'_>, x0: &[f64], t1: f64) -> Result<f64> {
    let prop = Propagator::new(spec, view.dt());
    let traj = integrate_with_propagator(spec, &prop, view, x0, 0.0, t1, Scheme::ExponentialEuler)?;
    let d = spec.dim();
    let dt = view.dt();
    let n = traj.len() - 1;
    let ints = prop.integrals();
    let w_next = &ints.psi_ramp / dt;
    let w_prev = &ints.psi - &w_next;
    let w_next = linalg::row_major(&w_next);
    let w_prev = linalg::row_major(&w_prev);
    let phi = linalg::row_major(&ints.phi);

    let conv = noise::convolution_window(spec.a(), spec.sigma(), view, 0, n)?;
    let mut drift = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut h_prev = spec.evaluate_h(traj.state(0));
    let mut h_next = vec![0.0; d];
    let x0v = nalgebra::DVector::from_column_slice(x0);
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        spec.output().eval_into(traj.state(k), &mut h_next);
        next.fill(0.0);
        linalg::gemv_acc(&phi, &drift, &mut next);
        linalg::gemv_acc(&w_prev, &h_prev, &mut next);
        linalg::gemv_acc(&w_next, &h_next, &mut next);
        std::mem::swap(&mut drift, &mut next);
        std::mem::swap(&mut h_prev, &mut h_next);
        let lin = linalg::fundamental_matrix(spec.a(), k as f64 * dt) * &x0v;
        for i in 0..d {
            let v = lin[i] + drift[i] + conv[k * d + i];
            worst = worst.max((traj.state(k)[i] - v).abs());
        }
    }
    Ok(worst)
}

/// Finite-horizon tail envelope of the pullback trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEnvelope {
    pub tau: f64,
    pub horizon: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub under_h: bool,
}

/// Componentwise inf/sup of `phi(t, theta_{-t} omega) x` (or of its image
/// under `h`) over grid `t` in `[tau, horizon]`.
pub fn tail_envelopes(
    spec: &SystemSpec,
    view: PathView<'_>,
    x: &[f64],
    tau: f64,
    horizon: f64,
    under_h: bool,
) -> Result<TailEnvelope> {
    check_x0(spec, x)?;
    check_noise_dim(spec, &view)?;
    let dt = view.dt();
    let tau_steps = noise::steps_in(tau, dt, "tau")?;
    let h_steps = noise::steps_in(horizon, dt, "horizon")?;
    if h_steps <= tau_steps {
        return Err(Error::invalid("horizon", "must exceed tau"));
    }
    view.require_steps(-(h_steps as i64), h_steps)?;
    let prop = Propagator::new(spec, dt);
    let d = spec.dim();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    let mut hx = vec![0.0; d];
    for steps in tau_steps..=h_steps {
        let start = view.shift_steps(-(steps as i64))?;
        let end = run_steps(
            spec,
            &prop,
            start,
            x,
            0,
            steps,
            Scheme::ExponentialEuler,
            |_, _| {},
        )?;
        let v: &[f64] = if under_h {
            spec.output().eval_into(&end, &mut hx);
            &hx
        } else {
            &end
        };
        for i in 0..d {
            lower[i] = lower[i].min(v[i]);
            upper[i] = upper[i].max(v[i]);
        }
    }
    Ok(TailEnvelope {
        tau: tau_steps as f64 * dt,
        horizon: h_steps as f64 * dt,
        lower,
        upper,
        under_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Monotonicity, OutputFunctionSpec, OutputKind};
    use crate::noise::NoisePath;
    use nalgebra::{DMatrix, DVector};

    fn linear_spec(c: f64, sigma: f64) -> SystemSpec {
        SystemSpec::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.3, -2.0]),
            DMatrix::from_diagonal_element(2, 2, sigma),
            OutputFunctionSpec::constant(&[c, c]).unwrap(),
            0.0,
        )
        .unwrap()
    }

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
    fn linear_flow_without_noise_matches_matrix_exponential() {
        let spec = linear_spec(0.0, 0.0);
        let path = NoisePath::sample(1, 0.01, 0.01, 3.0, 2).unwrap();
        let x0 = [1.0, -2.0];
        let tr = integrate_forward(&spec, path.view(), &x0, 0.0, 3.0).unwrap();
        let expect = linalg::fundamental_matrix(spec.a(), 3.0) * DVector::from_column_slice(&x0);
        for i in 0..2 {
            assert!((tr.final_state()[i] - expect[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_input_settles_at_linear_solve() {
        let spec = linear_spec(0.4, 0.0);
        let path = NoisePath::sample(1, 0.01, 0.01, 30.0, 2).unwrap();
        let tr = integrate_forward(&spec, path.view(), &[3.0, 3.0], 0.0, 30.0).unwrap();
        let c = DVector::from_vec(vec![0.4, 0.4]);
        let eq = -spec.a().clone().lu().solve(&c).unwrap();
        for i in 0..2 {
            assert!((tr.final_state()[i] - eq[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn pullback_at_zero_is_identity() {
        let spec = ex52(0.1);
        let path = NoisePath::sample(1, 0.01, 1.0, 0.0, 3).unwrap();
        assert_eq!(
            pullback(&spec, path.view(), &[1.0, 2.0, 3.0], 0.0).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn pullback_beyond_past_is_a_range_error() {
        let spec = ex52(0.1);
        let path = NoisePath::sample(1, 0.01, 1.0, 0.0, 3).unwrap();
        let err = pullback(&spec, path.view(), &[0.0; 3], 2.0).unwrap_err();
        assert!(matches!(err, Error::Range { .. }), "{err}");
    }

    #[test]
    fn divergence_fails_loudly() {
        let spec = SystemSpec::new(
            DMatrix::from_element(1, 1, 5.0),
            DMatrix::from_element(1, 1, 0.0),
            OutputFunctionSpec::constant(&[0.0]).unwrap(),
            0.0,
        )
        .unwrap();
        let path = NoisePath::sample(1, 0.1, 0.1, 10.0, 1).unwrap();
        let err = integrate_forward(&spec, path.view(), &[1.0], 0.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn voc_residual_vanishes_for_linear_and_constant_input() {
        let path = NoisePath::sample(4, 0.01, 0.01, 5.0, 2).unwrap();
        let r0 = voc_residual(&linear_spec(0.0, 0.0), path.view(), &[1.0, 1.0], 5.0).unwrap();
        assert!(r0 <= 1e-10, "{r0}");
        let rc = voc_residual(&linear_spec(0.7, 0.0), path.view(), &[1.0, 1.0], 5.0).unwrap();
        assert!(rc <= 1e-8, "{rc}");
        let rn = voc_residual(&linear_spec(0.7, 0.3), path.view(), &[1.0, 1.0], 5.0).unwrap();
        assert!(rn <= 1e-8, "{rn}");
    }

    #[test]
    fn singleton_tail_envelope() {
        let spec = ex52(0.1);
        let path = NoisePath::sample(2, 0.01, 2.0, 0.0, 3).unwrap();
        let env = tail_envelopes(&spec, path.view(), &[0.0; 3], 1.0, 1.01, false).unwrap();
        let p = pullback(&spec, path.view(), &[0.0; 3], 1.0).unwrap();
        let q = pullback(&spec, path.view(), &[0.0; 3], 1.01).unwrap();
        for i in 0..3 {
            assert_eq!(env.lower[i], p[i].min(q[i]));
            assert_eq!(env.upper[i], p[i].max(q[i]));
        }
    }
}
