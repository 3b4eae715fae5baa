//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Norms are Frobenius unless the function name says otherwise.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;

/// Eigenvalues with `|Re λ|` below this are treated as lying on the imaginary axis.
pub const IMAG_AXIS_TOL: f64 = 1e-10;

pub fn frob(m: &Mat) -> f64 {
    m.norm()
}

/// `(M + Mᵀ) / 2`.
pub fn sym_part(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `M − Mᵀ`.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

/// Overwrites `m` with its symmetric part and returns the pre-symmetrization drift.
pub fn symmetrize_in_place(m: &mut Mat) -> f64 {
    let n = m.nrows();
    let mut drift2 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = m[(i, j)] - m[(j, i)];
            drift2 += 2.0 * d * d;
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    drift2.sqrt()
}

pub fn singular_values(m: &Mat) -> Vec<f64> {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

/// Largest singular value (operator 2-norm).
pub fn spectral_norm(m: &Mat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn min_singular_value(m: &Mat) -> f64 {
    singular_values(m).into_iter().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn sym_max_eigenvalue(m: &Mat) -> f64 {
    SymmetricEigen::new(sym_part(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a real square matrix via complex Schur form.
pub fn eigenvalues(m: &Mat) -> Vec<Complex64> {
    let t = nalgebra::Schur::new(to_complex(m)).unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Complex Givens rotation `[c s; -conj(s) c]` annihilating `g` against `f`.
fn lartg(f: Complex64, g: Complex64) -> (f64, Complex64) {
    if g.norm() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if f.norm() == 0.0 {
        return (0.0, g.conj() / g.norm());
    }
    let fa = f.norm();
    let norm = fa.hypot(g.norm());
    (fa / norm, (f / fa) * g.conj() / norm)
}

/// Applies `x ← c x + s y`, `y ← c y − conj(s) x` elementwise.
fn rot_pair(x: &mut Complex64, y: &mut Complex64, c: f64, s: Complex64) {
    let tmp = *x * c + s * *y;
    *y = *y * c - s.conj() * *x;
    *x = tmp;
}

/// Swaps the adjacent diagonal entries `k` and `k + 1` of an upper-triangular
/// Schur factor, updating the unitary factor accordingly.
fn swap_adjacent(t: &mut CMat, q: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s) = lartg(t[(k, k + 1)], t22 - t11);
    for j in (k + 2)..n {
        let (mut a, mut b) = (t[(k, j)], t[(k + 1, j)]);
        rot_pair(&mut a, &mut b, c, s);
        t[(k, j)] = a;
        t[(k + 1, j)] = b;
    }
    for i in 0..k {
        let (mut a, mut b) = (t[(i, k)], t[(i, k + 1)]);
        rot_pair(&mut a, &mut b, c, s.conj());
        t[(i, k)] = a;
        t[(i, k + 1)] = b;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
    for i in 0..q.nrows() {
        let (mut a, mut b) = (q[(i, k)], q[(i, k + 1)]);
        rot_pair(&mut a, &mut b, c, s.conj());
        q[(i, k)] = a;
        q[(i, k + 1)] = b;
    }
}

/// Complex Schur decomposition `M = Q T Qᴴ` reordered so that every eigenvalue
/// with negative real part comes first on the diagonal of `T`.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub q: CMat,
    pub t: CMat,
    /// Number of leading eigenvalues with `Re λ < 0`.
    pub n_stable: usize,
    /// Smallest `|Re λ|` over the spectrum.
    pub min_abs_real: f64,
}

pub fn ordered_schur_stable_first(m: &Mat) -> OrderedSchur {
    let (mut q, mut t) = nalgebra::Schur::new(to_complex(m)).unpack();
    let n = t.nrows();
    let mut target = 0;
    for i in 0..n {
        if t[(i, i)].re < 0.0 {
            let mut k = i;
            while k > target {
                swap_adjacent(&mut t, &mut q, k - 1);
                k -= 1;
            }
            target += 1;
        }
    }
    let min_abs_real = (0..n)
        .map(|i| t[(i, i)].re.abs())
        .fold(f64::INFINITY, f64::min);
    OrderedSchur {
        q,
        t,
        n_stable: target,
        min_abs_real,
    }
}

/// Back substitution for `(T + shift I) y = rhs` with `T` upper triangular.
fn upper_tri_solve(t: &CMat, shift: Complex64, rhs: &mut [Complex64]) -> Option<()> {
    let n = t.nrows();
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= t[(i, j)] * rhs[j];
        }
        let d = t[(i, i)] + shift;
        if d.norm() < 1e-300 {
            return None;
        }
        rhs[i] = acc / d;
    }
    Some(())
}

/// Solves the Sylvester equation `A X + X B = C` by complex Schur forms of
/// `A` and `B`. Returns `None` when `A` and `−B` share an eigenvalue.
pub fn solve_sylvester(a: &Mat, b: &Mat, c: &Mat) -> Option<Mat> {
    let (m, n) = (a.nrows(), b.nrows());
    let (ua, ta) = nalgebra::Schur::new(to_complex(a)).unpack();
    let (vb, tb) = nalgebra::Schur::new(to_complex(b)).unpack();
    let d = ua.adjoint() * to_complex(c) * &vb;
    let mut y = CMat::zeros(m, n);
    for j in 0..n {
        let mut rhs: Vec<Complex64> = (0..m).map(|i| d[(i, j)]).collect();
        for k in 0..j {
            let coef = tb[(k, j)];
            for (i, r) in rhs.iter_mut().enumerate() {
                *r -= y[(i, k)] * coef;
            }
        }
        upper_tri_solve(&ta, tb[(j, j)], &mut rhs)?;
        for (i, r) in rhs.into_iter().enumerate() {
            y[(i, j)] = r;
        }
    }
    let x = ua * y * vb.adjoint();
    Some(x.map(|z| z.re))
}
