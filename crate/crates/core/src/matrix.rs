//! Dense complex matrices: Kronecker products, partial traces, Hermitian
//! functional calculus, fidelity and purification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues below this are treated as zero for PSD inputs.
pub const PSD_CLAMP: f64 = -1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Tensor-factor dimensions of a composite space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimShape {
    pub factors: Vec<usize>,
}

impl DimShape {
    pub fn new(factors: &[usize]) -> Self {
        Self { factors: factors.to_vec() }
    }

    pub fn total(&self) -> usize {
        self.factors.iter().product()
    }
}

pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn tensor_all(ms: &[&CMatrix]) -> CMatrix {
    let mut out = eye(1);
    for m in ms {
        out = out.kronecker(m);
    }
    out
}

pub fn ket(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = cr(1.0);
    v
}

/// |i><j| in dimension d.
pub fn unit(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(d, d);
    m[(i, j)] = cr(1.0);
    m
}

pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}

/// Hilbert-Schmidt inner product Tr(a† b).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * cr(0.5)
}

/// Row-major vectorization.
pub fn vec_rows(m: &CMatrix) -> CVector {
    let (r, c) = m.shape();
    CVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

pub fn unvec_rows(v: &CVector, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |i, j| v[i * c + j])
}

/// Partial trace keeping the factors listed in `keep` (in their original order).
pub fn partial_trace(m: &CMatrix, shape: &DimShape, keep: &[usize]) -> Result<CMatrix> {
    let n = shape.total();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix {}x{} vs shape total {}",
            m.nrows(),
            m.ncols(),
            n
        )));
    }
    let k = shape.factors.len();
    if keep.iter().any(|&i| i >= k) {
        return Err(Error::DimensionMismatch("keep index out of range".into()));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..k).filter(|i| !kept.contains(i)).collect();
    let dk: usize = kept.iter().map(|&i| shape.factors[i]).product();
    let dt: usize = traced.iter().map(|&i| shape.factors[i]).product();

    // strides of each factor in the full index
    let mut strides = vec![1usize; k];
    for i in (0..k.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape.factors[i + 1];
    }
    let compose = |sub: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &f in sub.iter().rev() {
            let d = shape.factors[f];
            off += (idx % d) * strides[f];
            idx /= d;
        }
        off
    };
    let kept_off: Vec<usize> = (0..dk).map(|i| compose(&kept, i)).collect();
    let tr_off: Vec<usize> = (0..dt).map(|i| compose(&traced, i)).collect();

    let mut out = zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut s = Complex64::new(0.0, 0.0);
            for &t in &tr_off {
                s += m[(kept_off[a] + t, kept_off[b] + t)];
            }
            out[(a, b)] = s;
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Cyclic Jacobi. nalgebra 0.33's `symmetric_eigen` can return orthonormal
/// vectors that are not eigenvectors when the spectrum is degenerate.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let mut a = hermitize(h);
    let mut v = eye(n);
    let total = a.norm();
    if n > 1 && total > 0.0 {
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|j| (0..j).map(move |i| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * total {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    jacobi_rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let vals = idx.iter().map(|&i| a[(i, i)].re).collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

fn jacobi_rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if b <= 1e-300 || b < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = cr(0.0);
        a[(q, p)] = cr(0.0);
        return;
    }
    // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let ph = (apq / b).conj();
    let tau = (aqq - app) / (2.0 * b);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let (gpp, gpq, gqp, gqq) = (cr(c), cr(s), ph * (-s), ph * c);
    let n = a.nrows();
    for k in 0..n {
        let (xp, xq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = xp * gpp + xq * gqp;
        a[(k, q)] = xp * gpq + xq * gqq;
    }
    for k in 0..n {
        let (xp, xq) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = gpp.conj() * xp + gqp.conj() * xq;
        a[(q, k)] = gpq.conj() * xp + gqq.conj() * xq;
    }
    a[(p, q)] = cr(0.0);
    a[(q, p)] = cr(0.0);
    a[(p, p)] = cr(a[(p, p)].re);
    a[(q, q)] = cr(a[(q, q)].re);
    for k in 0..n {
        let (xp, xq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = xp * gpp + xq * gqp;
        v[(k, q)] = xp * gpq + xq * gqq;
    }
}

pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    eigh(h).0.first().copied().unwrap_or(0.0)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn herm_fn(h: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = cr(f(vals[j]));
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    let dev = hermiticity_deviation(h);
    let scale = max_abs(h).max(1.0);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

fn check_psd(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_hermitian(h)?;
    let (vals, vecs) = eigh(h);
    if let Some(&m) = vals.first() {
        if m < PSD_CLAMP {
            return Err(Error::NotPsd(m));
        }
    }
    Ok((vals, vecs))
}

pub fn herm_sqrt(h: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = check_psd(h)?;
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let s = cr(vals[j].max(0.0).sqrt());
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(scaled * vecs.adjoint())
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let (vals, _) = eigh(&dilation(m));
    vals.iter().map(|v| v.abs()).sum::<f64>() / 2.0
}

/// [[0, A], [A†, 0]]: eigenvalues ±σ_i(A) plus |rows − cols| zeros.
fn dilation(m: &CMatrix) -> CMatrix {
    let (r, c) = m.shape();
    let mut h = CMatrix::zeros(r + c, r + c);
    h.view_mut((0, r), (r, c)).copy_from(m);
    h.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    h
}

/// Thin SVD A = U diag(s) V† with s descending, U: r×k, V: c×k, k = min(r, c).
///
/// Computed from the Hermitian dilation; nalgebra 0.33's SVD loses accuracy
/// on repeated singular values. Directions with σ below 1e-12·σ_max are
/// completed to orthonormal frames.
pub fn svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return (CMatrix::zeros(r, 0), Vec::new(), CMatrix::zeros(c, 0));
    }
    let (vals, vecs) = eigh(&dilation(m));
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = 1e-12 * top.max(1e-300);
    let mut us: Vec<CVector> = Vec::with_capacity(k);
    let mut vs: Vec<CVector> = Vec::with_capacity(k);
    let mut s = Vec::with_capacity(k);
    for j in (0..r + c).rev().take(k) {
        if vals[j] <= cut {
            break;
        }
        let x = vecs.column(j);
        let u = CVector::from_fn(r, |i, _| x[i]);
        let v = CVector::from_fn(c, |i, _| x[r + i]);
        let (nu, nv) = (u.norm(), v.norm());
        us.push(u / cr(nu));
        vs.push(v / cr(nv));
        s.push(vals[j]);
    }
    complete_frame(&mut us, r, k);
    complete_frame(&mut vs, c, k);
    s.resize(k, 0.0);
    (CMatrix::from_columns(&us), s, CMatrix::from_columns(&vs))
}

/// Extends orthonormal vectors in C^d to `k` of them with canonical basis
/// vectors (Gram-Schmidt, largest residual first).
fn complete_frame(frame: &mut Vec<CVector>, d: usize, k: usize) {
    while frame.len() < k {
        let mut best: Option<CVector> = None;
        let mut best_norm = -1.0;
        for i in 0..d {
            let mut e = ket(d, i);
            for _ in 0..2 {
                for q in frame.iter() {
                    let coef = q.dotc(&e);
                    e -= q * coef;
                }
            }
            let n = e.norm();
            if n > best_norm {
                best_norm = n;
                best = Some(e);
            }
        }
        let e = best.expect("d > 0");
        frame.push(&e / cr(best_norm));
    }
}

/// Root fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)), evaluated as the trace norm
/// of sqrt(rho) sqrt(sigma).
pub fn state_fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::DimensionMismatch("fidelity arguments differ in shape".into()));
    }
    let a = herm_sqrt(rho)?;
    let b = herm_sqrt(sigma)?;
    Ok(trace_norm(&(a * b)))
}

/// Canonical purification on H ⊗ H: eigenvalues descending, global phase fixed
/// so the first nonzero amplitude is real positive.
pub fn purify(rho: &CMatrix) -> Result<CVector> {
    let (vals, vecs) = check_psd(rho)?;
    let d = vals.len();
    let mut psi = CVector::zeros(d * d);
    for (slot, j) in (0..d).rev().enumerate() {
        let s = vals[j].max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..d {
            psi[i * d + slot] += vecs[(i, j)] * s;
        }
    }
    if let Some(first) = psi.iter().find(|z| z.norm() > 1e-12).copied() {
        let phase = first.conj() / first.norm();
        psi *= phase;
    }
    Ok(psi)
}

/// Orthonormal basis for the range of a PSD matrix (eigenvalues above `tol`
/// relative to the largest), largest eigenvalue first.
pub fn support_basis(h: &CMatrix, tol: f64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cols: Vec<usize> = (0..vals.len())
        .rev()
        .filter(|&j| vals[j] > tol * top.max(1e-300))
        .collect();
    CMatrix::from_fn(h.nrows(), cols.len(), |r, k| vecs[(r, cols[k])])
}
