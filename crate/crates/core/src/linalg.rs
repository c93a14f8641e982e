//! Small dense linear algebra: matrix exponential, its integrals, spectra.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`; the state dimension is
//! a runtime value and at desk scale never exceeds a handful of rows.

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

// Higham's theta_m bounds for the [m/m] Pade approximants (m = 3, 5, 7, 9, 13).
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry, the matrix norm used throughout for `Phi(t)`.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Odd/even Pade parts for degrees 3..9, from precomputed even powers.
fn pade_low(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let mut even_pow = id.clone();
    let mut u_inner = DMatrix::<f64>::zeros(n, n);
    let mut v = DMatrix::<f64>::zeros(n, n);
    for k in 0..b.len() / 2 {
        u_inner += &even_pow * b[2 * k + 1];
        v += &even_pow * b[2 * k];
        even_pow = &even_pow * &a2;
    }
    (a * u_inner, v)
}

fn pade13(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * B13[13] + &a4 * B13[11] + &a2 * B13[9]);
    let u = a * (u_hi + &a6 * B13[7] + &a4 * B13[5] + &a2 * B13[3] + &id * B13[1]);
    let v_hi = &a6 * (&a6 * B13[12] + &a4 * B13[10] + &a2 * B13[8]);
    let v = v_hi + &a6 * B13[6] + &a4 * B13[4] + &a2 * B13[2] + &id * B13[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with a diagonal Pade kernel.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let (u, v, squarings) = if norm <= THETA_3 {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if norm <= THETA_5 {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if norm <= THETA_7 {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if norm <= THETA_9 {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s as u32)
    };
    let numer = &v + &u;
    let denom = &v - &u;
    // denom is well conditioned for every norm class above
    let mut r = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is invertible within the theta bounds");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

/// `Phi(t) = exp(A t)`.
pub fn fundamental_matrix(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    if a.nrows() == 1 && a.ncols() == 1 {
        return DMatrix::from_element(1, 1, (a[(0, 0)] * t).exp());
    }
    expm(&(a * t))
}

/// Step integrals of the linear flow over `[0, h]`.
#[derive(Debug, Clone)]
pub struct StepIntegrals {
    /// `Phi(h)`
    pub phi: DMatrix<f64>,
    /// `int_0^h Phi(s) ds`
    pub psi: DMatrix<f64>,
    /// `int_0^h Phi(s) (h - s) ds`
    pub psi_ramp: DMatrix<f64>,
}

/// Computes `Phi(h)` and its first two integrals from one exponential of the
/// block matrix `[[A, I, 0], [0, 0, I], [0, 0, 0]] * h`.
pub fn step_integrals(a: &DMatrix<f64>, h: f64) -> StepIntegrals {
    let d = a.nrows();
    let mut big = DMatrix::<f64>::zeros(3 * d, 3 * d);
    big.view_mut((0, 0), (d, d)).copy_from(&(a * h));
    for i in 0..d {
        big[(i, d + i)] = h;
        big[(d + i, 2 * d + i)] = h;
    }
    let e = expm(&big);
    StepIntegrals {
        phi: e.view((0, 0), (d, d)).into_owned(),
        psi: e.view((0, d), (d, d)).into_owned(),
        psi_ramp: e.view((0, 2 * d), (d, d)).into_owned(),
    }
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("A", "matrix has non-finite entries"));
    }
    let schur =
        Schur::try_new(a.clone(), 1e-15, 10_000).ok_or_else(|| Error::Eigen(format!("{a}")))?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(ev)
}

/// Maximum real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Row-major copy for allocation-free kernels.
pub(crate) fn row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// `out += M x` for a row-major `rows x x.len()` matrix.
#[inline]
pub(crate) fn gemv_acc(m: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &m[i * cols..(i + 1) * cols];
        let mut s = 0.0;
        for (r, v) in row.iter().zip(x) {
            s += r * v;
        }
        *o += s;
    }
}
