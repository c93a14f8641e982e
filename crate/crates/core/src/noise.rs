//! Two-sided discretized Wiener paths, the shift `theta_s`, and the
//! stochastic convolution `N(t) = int_{-t_past}^t Phi(t - s) sigma dW(s)`.
//!
//! Increments are drawn from ChaCha8 used as a counter-based generator:
//! the increment of component `c` over `[j dt, (j + 1) dt]` depends only on
//! `(seed, c, j)`, so any window of a path can be regenerated on its own and
//! paths with a longer horizon extend shorter ones.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::export::fmt_f64;
use crate::linalg;

/// Step-index offset so negative indices map to valid ChaCha word positions.
const INDEX_OFFSET: i64 = 1 << 40;
/// ChaCha 32-bit words consumed per normal draw (two `u64`s).
const WORDS_PER_DRAW: u128 = 4;

/// Number of whole steps in `t`, or an error naming `field`.
pub fn steps_in(t: f64, dt: f64, field: &str) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(
            "dt",
            format!("must be positive and finite, got {dt}"),
        ));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid(
            field,
            format!("must be finite and nonnegative, got {t}"),
        ));
    }
    let q = t / dt;
    let n = q.round();
    if (q - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::invalid(
            field,
            format!("{t} is not a whole multiple of dt = {dt}"),
        ));
    }
    Ok(n as usize)
}

/// Grid-aligned shift in steps.
pub fn shift_steps(s: f64, dt: f64) -> Result<i64> {
    let q = s / dt;
    let n = q.round();
    if !q.is_finite() || (q - n).abs() > 1e-9 * n.abs().max(1.0) {
        return Err(Error::invalid(
            "shift",
            format!("{s} is not a multiple of dt = {dt}"),
        ));
    }
    Ok(n as i64)
}

#[inline]
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Keyed Brownian increment generator.
#[derive(Debug, Clone, Copy)]
pub struct IncrementGenerator {
    seed: u64,
    dt: f64,
    m: usize,
}

impl IncrementGenerator {
    pub fn new(seed: u64, dt: f64, m: usize) -> Self {
        IncrementGenerator { seed, dt, m }
    }

    /// Increments for steps `first .. first + count`, step-major (`count x m`).
    pub fn fill(&self, first: i64, count: usize, out: &mut [f64]) {
        assert_eq!(out.len(), count * self.m);
        let scale = self.dt.sqrt();
        for c in 0..self.m {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(c as u64);
            rng.set_word_pos((first + INDEX_OFFSET) as u128 * WORDS_PER_DRAW);
            for j in 0..count {
                out[j * self.m + c] = scale * standard_normal(&mut rng);
            }
        }
    }
}

/// A Wiener path sampled on `t_k = k dt`, `k = -past_steps ..= fwd_steps`,
/// anchored at `W(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dt: f64,
    past_steps: usize,
    fwd_steps: usize,
    m: usize,
    seed: Option<u64>,
    increments: Vec<f64>,
    values: Vec<f64>,
}

impl NoisePath {
    pub fn sample(seed: u64, dt: f64, t_past: f64, t_fwd: f64, m: usize) -> Result<Self> {
        let past_steps = steps_in(t_past, dt, "t_past")?;
        let fwd_steps = steps_in(t_fwd, dt, "t_fwd")?;
        if past_steps == 0 {
            return Err(Error::invalid("t_past", "must be positive"));
        }
        if m == 0 {
            return Err(Error::invalid("m", "noise dimension must be positive"));
        }
        let n = past_steps + fwd_steps;
        let mut increments = vec![0.0; n * m];
        IncrementGenerator::new(seed, dt, m).fill(-(past_steps as i64), n, &mut increments);
        Ok(Self::from_increments(
            dt,
            past_steps,
            fwd_steps,
            m,
            Some(seed),
            increments,
        ))
    }

    fn from_increments(
        dt: f64,
        past_steps: usize,
        fwd_steps: usize,
        m: usize,
        seed: Option<u64>,
        increments: Vec<f64>,
    ) -> Self {
        let n = past_steps + fwd_steps;
        let mut values = vec![0.0; (n + 1) * m];
        for k in past_steps..n {
            for c in 0..m {
                values[(k + 1) * m + c] = values[k * m + c] + increments[k * m + c];
            }
        }
        for k in (0..past_steps).rev() {
            for c in 0..m {
                values[k * m + c] = values[(k + 1) * m + c] - increments[k * m + c];
            }
        }
        NoisePath {
            dt,
            past_steps,
            fwd_steps,
            m,
            seed,
            increments,
            values,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_past(&self) -> f64 {
        self.past_steps as f64 * self.dt
    }

    pub fn t_fwd(&self) -> f64 {
        self.fwd_steps as f64 * self.dt
    }

    pub fn past_steps(&self) -> usize {
        self.past_steps
    }

    pub fn fwd_steps(&self) -> usize {
        self.fwd_steps
    }

    pub fn steps(&self) -> usize {
        self.past_steps + self.fwd_steps
    }

    pub fn noise_dim(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Time of grid point `k` (0-based from the left edge).
    pub fn time(&self, k: usize) -> f64 {
        (k as i64 - self.past_steps as i64) as f64 * self.dt
    }

    /// `W(t_k)`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.m..(k + 1) * self.m]
    }

    /// `W(t_{k+1}) - W(t_k)` as drawn.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[k * self.m..(k + 1) * self.m]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn view(&self) -> PathView<'_> {
        PathView {
            base: self,
            offset: 0,
        }
    }

    /// `theta_s` applied to this path.
    pub fn shift(&self, s: f64) -> Result<PathView<'_>> {
        self.view().shift(s)
    }

    /// The same Brownian motion on a grid `factor` times coarser; coarse
    /// increments are exact sums of consecutive fine increments.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        if factor == 0
            || !self.past_steps.is_multiple_of(factor)
            || !self.fwd_steps.is_multiple_of(factor)
        {
            return Err(Error::invalid(
                "factor",
                format!(
                    "{factor} must divide both horizons ({} and {} steps)",
                    self.past_steps, self.fwd_steps
                ),
            ));
        }
        let n = self.steps() / factor;
        let m = self.m;
        let mut inc = vec![0.0; n * m];
        for k in 0..n {
            for c in 0..m {
                inc[k * m + c] = (0..factor)
                    .map(|j| self.increments[(k * factor + j) * m + c])
                    .sum();
            }
        }
        Ok(Self::from_increments(
            self.dt * factor as f64,
            self.past_steps / factor,
            self.fwd_steps / factor,
            m,
            self.seed,
            inc,
        ))
    }

    /// CSV with columns `t, W_1 .. W_m`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m).map(|c| format!("W_{c}")));
        w.write_record(&header)?;
        for k in 0..=self.steps() {
            let mut rec = vec![fmt_f64(self.time(k))];
            rec.extend(self.value(k).iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads a path written by [`NoisePath::write_csv`] (or any uniform grid
    /// containing `t = 0` with `W(0) = 0`). Increments become differences of
    /// consecutive values. Temperedness of foreign paths is not checked.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let m = r.headers()?.len().saturating_sub(1);
        if m == 0 {
            return Err(Error::invalid(
                "noise_csv",
                "expected columns t, W_1 .. W_m",
            ));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::invalid(
                        "noise_csv",
                        format!("row {}: bad number {s:?}: {e}", row + 1),
                    )
                })
            };
            times.push(parse(&rec[0])?);
            for c in 1..=m {
                values.push(parse(&rec[c])?);
            }
        }
        if times.len() < 2 {
            return Err(Error::invalid("noise_csv", "need at least two grid points"));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::invalid("noise_csv", "times must increase"));
        }
        for (k, t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * dt.max(t.abs()) {
                return Err(Error::invalid(
                    "noise_csv",
                    format!("row {}: grid is not uniform", k + 1),
                ));
            }
        }
        let past_steps = steps_in(-times[0], dt, "noise_csv")?;
        if past_steps == 0 || past_steps >= times.len() {
            return Err(Error::invalid(
                "noise_csv",
                "grid must contain t = 0 and some past",
            ));
        }
        if values[past_steps * m..(past_steps + 1) * m]
            .iter()
            .any(|&v| v != 0.0)
        {
            return Err(Error::invalid("noise_csv", "W(0) must be exactly zero"));
        }
        let n = times.len() - 1;
        let mut increments = vec![0.0; n * m];
        for k in 0..n {
            for c in 0..m {
                increments[k * m + c] = values[(k + 1) * m + c] - values[k * m + c];
            }
        }
        Ok(NoisePath {
            dt,
            past_steps,
            fwd_steps: n - past_steps,
            m,
            seed: None,
            increments,
            values,
        })
    }
}

/// `theta_s` applied to a base path: view time `r` corresponds to base time
/// `s + r`, and the view's value at `r` is `W(s + r) - W(s)`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    base: &'a NoisePath,
    offset: i64,
}

impl<'a> PathView<'a> {
    pub fn base(&self) -> &'a NoisePath {
        self.base
    }

    pub fn dt(&self) -> f64 {
        self.base.dt
    }

    pub fn noise_dim(&self) -> usize {
        self.base.m
    }

    /// The shift `s` in steps.
    pub fn offset_steps(&self) -> i64 {
        self.offset
    }

    pub fn offset(&self) -> f64 {
        self.offset as f64 * self.base.dt
    }

    /// Earliest view time covered by the base grid (`<= 0`).
    pub fn t_past(&self) -> f64 {
        (self.base.past_steps as i64 + self.offset) as f64 * self.base.dt
    }

    /// Latest view time covered by the base grid (`>= 0`).
    pub fn t_fwd(&self) -> f64 {
        (self.base.fwd_steps as i64 - self.offset) as f64 * self.base.dt
    }

    /// First and one-past-last view step indices available.
    pub fn step_range(&self) -> (i64, i64) {
        (
            -(self.base.past_steps as i64) - self.offset,
            self.base.fwd_steps as i64 - self.offset,
        )
    }

    pub fn shift(&self, s: f64) -> Result<PathView<'a>> {
        let k = shift_steps(s, self.base.dt)?;
        self.shift_steps(k)
    }

    pub fn shift_steps(&self, k: i64) -> Result<PathView<'a>> {
        let offset = self.offset + k;
        let origin = self.base.past_steps as i64 + offset;
        if origin < 0 || origin > self.base.steps() as i64 {
            let required = -(offset as f64) * self.base.dt;
            return Err(Error::Range {
                field: "shift".into(),
                message: format!(
                    "origin {} lies outside the path window [{}, {}]",
                    offset as f64 * self.base.dt,
                    -self.base.t_past(),
                    self.base.t_fwd()
                ),
                required: required.abs(),
            });
        }
        Ok(PathView {
            base: self.base,
            offset,
        })
    }

    /// Checks that view steps `first .. first + count` exist.
    pub fn require_steps(&self, first: i64, count: usize) -> Result<()> {
        let (lo, hi) = self.step_range();
        let dt = self.base.dt;
        if first < lo {
            return Err(Error::Range {
                field: "t_past".into(),
                message: format!(
                    "needs view time {} but the path starts at {}",
                    first as f64 * dt,
                    lo as f64 * dt
                ),
                required: (-(first + self.offset)) as f64 * dt,
            });
        }
        if first + count as i64 > hi {
            return Err(Error::Range {
                field: "t_fwd".into(),
                message: format!(
                    "needs view time {} but the path ends at {}",
                    (first + count as i64) as f64 * dt,
                    hi as f64 * dt
                ),
                required: (first + count as i64 + self.offset) as f64 * dt,
            });
        }
        Ok(())
    }

    /// Increment over view step `j`, i.e. `[j dt, (j + 1) dt]`.
    #[inline]
    pub fn increment(&self, j: i64) -> &'a [f64] {
        let k = (self.base.past_steps as i64 + self.offset + j) as usize;
        self.base.increment(k)
    }

    /// `W(s + r) - W(s)` at view step `j` (`r = j dt`).
    pub fn value_steps(&self, j: i64) -> Result<Vec<f64>> {
        let (lo, hi) = self.step_range();
        if j < lo || j > hi {
            return Err(Error::Range {
                field: "t".into(),
                message: format!(
                    "view time {} outside [{}, {}]",
                    j as f64 * self.base.dt,
                    lo as f64 * self.base.dt,
                    hi as f64 * self.base.dt
                ),
                required: ((j + self.offset).abs()) as f64 * self.base.dt,
            });
        }
        let origin = (self.base.past_steps as i64 + self.offset) as usize;
        let k = (origin as i64 + j) as usize;
        Ok(self
            .base
            .value(k)
            .iter()
            .zip(self.base.value(origin))
            .map(|(a, b)| a - b)
            .collect())
    }

    pub fn value_at(&self, r: f64) -> Result<Vec<f64>> {
        self.value_steps(shift_steps(r, self.base.dt)?)
    }
}

impl<'a> From<&'a NoisePath> for PathView<'a> {
    fn from(p: &'a NoisePath) -> Self {
        p.view()
    }
}

/// Stationary OU process `N(t_k)` on every grid point of the view, started
/// from `N = 0` at the view's left edge by `N_{k+1} = Phi(dt) (N_k + sigma dW_k)`.
/// Returned step-major (`points x d`), first row at the left edge.
pub fn convolution_process(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    view: PathView<'_>,
) -> Result<Vec<f64>> {
    let (lo, hi) = view.step_range();
    convolution_window(a, sigma, view, lo, (hi - lo) as usize)
}

/// The same recursion started from `N = 0` at view step `first`, run for
/// `count` steps; `count + 1` rows.
pub fn convolution_window(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    view: PathView<'_>,
    first: i64,
    count: usize,
) -> Result<Vec<f64>> {
    let d = a.nrows();
    if sigma.nrows() != d || sigma.ncols() != view.noise_dim() {
        return Err(Error::Shape(format!(
            "sigma is {}x{}, expected {d}x{}",
            sigma.nrows(),
            sigma.ncols(),
            view.noise_dim()
        )));
    }
    view.require_steps(first, count)?;
    let phi = linalg::row_major(&linalg::fundamental_matrix(a, view.dt()));
    let sig = linalg::row_major(sigma);
    let mut out = vec![0.0; (count + 1) * d];
    let mut pre = vec![0.0; d];
    let mut next = vec![0.0; d];
    for k in 0..count {
        pre.copy_from_slice(&out[k * d..(k + 1) * d]);
        linalg::gemv_acc(&sig, view.increment(first + k as i64), &mut pre);
        next.fill(0.0);
        linalg::gemv_acc(&phi, &pre, &mut next);
        out[(k + 1) * d..(k + 2) * d].copy_from_slice(&next);
    }
    Ok(out)
}

/// `N(t) = int_{-t_past}^t Phi(t - s) sigma dW(s)` with the view's left
/// horizon standing in for minus infinity.
pub fn stochastic_convolution(
    a: &DMatrix<f64>,
    sigma: &DMatrix<f64>,
    view: PathView<'_>,
    t: f64,
) -> Result<Vec<f64>> {
    let j = shift_steps(t, view.dt())?;
    let (lo, hi) = view.step_range();
    if j < lo || j > hi {
        return Err(Error::Range {
            field: "t".into(),
            message: format!(
                "t = {t} outside the path window [{}, {}]",
                -view.t_past(),
                view.t_fwd()
            ),
            required: t.abs(),
        });
    }
    let d = a.nrows();
    let proc_ = convolution_process(a, sigma, view)?;
    let k = (j - lo) as usize;
    Ok(proc_[k * d..(k + 1) * d].to_vec())
}

/// Analytic bound `e^{lambda (t + t_past)} ||sigma||` on the effect of
/// truncating the convolution at `-t_past`.
pub fn truncation_bound(lambda: f64, sigma: &DMatrix<f64>, t: f64, t_past: f64) -> f64 {
    (lambda * (t + t_past)).exp() * linalg::max_abs(sigma)
}
