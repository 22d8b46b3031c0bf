//! Reductions of fidelity maximizations to standard-form SDPs.
//!
//! The fidelity f(A, BB†) equals max Re Tr(Z B†) over [[A, Z], [Z†, 1]] ⪰ 0.
//! Blocks are restricted to the supports that can actually occur, so the
//! resulting problems are strictly feasible.

use super::{Functional, SdpProblem, SdpSolution, Sense};
use crate::error::{Error, Result};
use crate::matrix::{c, cr, eigh, eye, hermitize, support_basis, CMatrix};

const SUPPORT_TOL: f64 = 1e-10;

/// Hermitian coordinates of a square matrix: diagonal, then for p<q the real
/// and imaginary parts of the (p,q) entry.
pub fn hermitian_components(y: &CMatrix) -> Vec<f64> {
    let n = y.nrows();
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        out.push(y[(p, p)].re);
    }
    for p in 0..n {
        for q in p + 1..n {
            out.push(y[(p, q)].re);
            out.push(y[(p, q)].im);
        }
    }
    out
}

/// Coordinate functionals matching [`hermitian_components`] on a block,
/// with entries offset by (`off`, `off`).
fn component_functionals(block: usize, n: usize, off: usize) -> Vec<Functional> {
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        let mut f = Functional::new();
        f.add(block, off + p, off + p, cr(1.0));
        out.push(f);
    }
    for p in 0..n {
        for q in p + 1..n {
            let mut f = Functional::new();
            f.add(block, off + p, off + q, cr(1.0));
            out.push(f);
            let mut g = Functional::new();
            g.add(block, off + p, off + q, c(0.0, -1.0));
            out.push(g);
        }
    }
    out
}

/// Basis of Hermitian n×n matrices dual to [`hermitian_components`].
fn hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        let mut m = CMatrix::zeros(n, n);
        m[(p, p)] = cr(1.0);
        out.push(m);
    }
    for p in 0..n {
        for q in p + 1..n {
            let mut m = CMatrix::zeros(n, n);
            m[(p, q)] = cr(1.0);
            m[(q, p)] = cr(1.0);
            out.push(m);
            let mut m = CMatrix::zeros(n, n);
            m[(p, q)] = c(0.0, 1.0);
            m[(q, p)] = c(0.0, -1.0);
            out.push(m);
        }
    }
    out
}

/// Rows expressing each Hermitian component of `map(X_block)` as a
/// functional of the block variable (n×n). `map` must be real-linear and
/// Hermiticity preserving.
pub fn linear_map_rows(block: usize, n: usize, map: &dyn Fn(&CMatrix) -> CMatrix) -> Vec<Functional> {
    let coords = component_functionals(block, n, 0);
    let images: Vec<Vec<f64>> = hermitian_basis(n).iter().map(|e| hermitian_components(&map(e))).collect();
    let out_len = images.first().map(|v| v.len()).unwrap_or(0);
    (0..out_len)
        .map(|k| {
            let mut f = Functional::new();
            for (l, img) in images.iter().enumerate() {
                let w = img[k];
                if w.abs() > 1e-15 {
                    for t in &coords[l].terms {
                        f.add(t.block, t.row, t.col, t.coeff * w);
                    }
                }
            }
            f
        })
        .collect()
}

fn concat(a: &Functional, b: &Functional, scale_b: f64) -> Functional {
    let mut f = a.clone();
    for t in &b.terms {
        f.add(t.block, t.row, t.col, t.coeff * scale_b);
    }
    f
}

/// Parametrization of the Choi matrix J (in ⊗ out) of the optimized channel.
#[derive(Debug, Clone)]
pub enum ChoiParam {
    /// J itself is the PSD variable.
    Full,
    /// J = V K V† with K ⪰ 0; the columns of V are vectorized Kraus-space
    /// basis operators, so every Kraus operator lies in their span.
    Subspace(CMatrix),
}

impl ChoiParam {
    fn var_dim(&self, n: usize) -> usize {
        match self {
            ChoiParam::Full => n,
            ChoiParam::Subspace(v) => v.ncols(),
        }
    }

    pub fn choi_of(&self, k: &CMatrix) -> CMatrix {
        match self {
            ChoiParam::Full => k.clone(),
            ChoiParam::Subspace(v) => v * k * v.adjoint(),
        }
    }

    fn interior(&self, din: usize, dout: usize) -> CMatrix {
        match self {
            ChoiParam::Full => eye(din * dout) / cr(dout as f64),
            ChoiParam::Subspace(v) => eye(v.ncols()),
        }
    }
}

/// Vectorized Kraus operator in the Choi convention: v[(i,a)] = E[a,i].
pub fn kraus_vector(e: &CMatrix) -> crate::matrix::CVector {
    let (dout, din) = e.shape();
    crate::matrix::CVector::from_fn(din * dout, |idx, _| e[(idx % dout, idx / dout)])
}

/// Choi-state action: (ℛ⊗id)(τ)[(a,r),(b,s)] = Σ_ij τ[(i,r),(j,s)] J[(i,a),(j,b)].
pub fn choi_apply(j: &CMatrix, tau: &CMatrix, din: usize, dout: usize, dref: usize) -> CMatrix {
    let mut out = CMatrix::zeros(dout * dref, dout * dref);
    for i in 0..din {
        for jj in 0..din {
            for a in 0..dout {
                for b in 0..dout {
                    let w = j[(i * dout + a, jj * dout + b)];
                    if w.norm() == 0.0 {
                        continue;
                    }
                    for r in 0..dref {
                        for s in 0..dref {
                            out[(a * dref + r, b * dref + s)] += w * tau[(i * dref + r, jj * dref + s)];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Tr_out of a Choi matrix on in ⊗ out.
pub fn choi_trace_out(j: &CMatrix, din: usize, dout: usize) -> CMatrix {
    CMatrix::from_fn(din, din, |i, k| (0..dout).map(|a| j[(i * dout + a, k * dout + a)]).sum())
}

/// Additional real-linear equality map(J) = rhs on the Choi matrix.
pub struct ChoiConstraint {
    pub map: Box<dyn Fn(&CMatrix) -> CMatrix + Send + Sync>,
    pub rhs: CMatrix,
}

pub struct ChannelFidelitySdp {
    pub problem: SdpProblem,
    pub param: ChoiParam,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Dimension of the compressed output block and the target rank.
    pub w11_dim: usize,
    pub target_rank: usize,
}

impl ChannelFidelitySdp {
    pub fn choi(&self, sol: &SdpSolution) -> CMatrix {
        hermitize(&self.param.choi_of(&sol.blocks[0]))
    }
}

/// Low-rank factor B with BB† = h (h PSD), eigenvalues above a relative cutoff.
fn psd_factor(h: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cols: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > 1e-12 * top.max(1e-300)).collect();
    CMatrix::from_fn(h.nrows(), cols.len(), |r, k| vecs[(r, cols[k])] * vals[cols[k]].sqrt())
}

/// SDP for max over channels ℛ (in → out) of f((ℛ⊗id)(τ), target), where τ
/// lives on in ⊗ ref and the target on out ⊗ ref. Trace preservation is
/// always imposed; `extra` adds further equalities on J.
pub fn build_channel_fidelity_sdp(
    tau: &CMatrix,
    target: &CMatrix,
    in_dim: usize,
    out_dim: usize,
    ref_dim: usize,
    param: ChoiParam,
    extra: &[ChoiConstraint],
) -> Result<ChannelFidelitySdp> {
    let (din, dout, dref) = (in_dim, out_dim, ref_dim);
    if tau.nrows() != din * dref || target.nrows() != dout * dref {
        return Err(Error::DimensionMismatch("fidelity SDP state sizes".into()));
    }
    if let ChoiParam::Subspace(v) = &param {
        if v.nrows() != din * dout || v.ncols() == 0 {
            return Err(Error::DimensionMismatch("Kraus subspace frame".into()));
        }
    }
    let nvar = param.var_dim(din * dout);

    let lin = |k: &CMatrix| choi_apply(&param.choi_of(k), tau, din, dout, dref);
    let l_int = hermitize(&lin(&param.interior(din, dout)));
    let full_dim = dout * dref;
    let q = support_basis(&l_int, SUPPORT_TOL);
    let compress = q.ncols() < full_dim;
    let nq = if compress { q.ncols() } else { full_dim };
    let target_c = if compress { q.adjoint() * target * &q } else { target.clone() };
    let bfac = psd_factor(&hermitize(&target_c));
    let r = bfac.ncols();
    if r == 0 || nq == 0 {
        return Err(Error::InvalidArgument("degenerate fidelity SDP (zero state)".into()));
    }

    let mut prob = SdpProblem::new(vec![nvar, nq + r], Sense::Maximize);
    for a in 0..nq {
        for b in 0..r {
            prob.objective.add(1, a, nq + b, bfac[(a, b)].conj());
        }
    }

    // W11 = Q† L(J) Q
    let w11_map = |k: &CMatrix| {
        let l = lin(k);
        if compress {
            q.adjoint() * l * &q
        } else {
            l
        }
    };
    let rows = linear_map_rows(0, nvar, &w11_map);
    let wcomp = component_functionals(1, nq, 0);
    for (wf, jf) in wcomp.iter().zip(&rows) {
        prob.add_constraint(concat(wf, jf, -1.0), 0.0);
    }
    // W22 = 1
    let id_r = hermitian_components(&eye(r));
    for (f, v) in component_functionals(1, r, nq).into_iter().zip(id_r) {
        prob.add_constraint(f, v);
    }
    // trace preservation
    let tp = |k: &CMatrix| choi_trace_out(&param.choi_of(k), din, dout);
    for (f, v) in linear_map_rows(0, nvar, &tp).into_iter().zip(hermitian_components(&eye(din))) {
        prob.add_constraint(f, v);
    }
    for con in extra {
        let m = |k: &CMatrix| (con.map)(&param.choi_of(k));
        for (f, v) in linear_map_rows(0, nvar, &m).into_iter().zip(hermitian_components(&con.rhs)) {
            if !f.is_empty() || v.abs() > 0.0 {
                prob.add_constraint(f, v);
            }
        }
    }
    Ok(ChannelFidelitySdp { problem: prob, param, in_dim: din, out_dim: dout, w11_dim: nq, target_rank: r })
}

/// SDP whose optimum is the root fidelity f(ρ, σ).
pub fn build_state_fidelity_sdp(rho: &CMatrix, sigma: &CMatrix) -> Result<SdpProblem> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::DimensionMismatch("state fidelity SDP".into()));
    }
    let qr = support_basis(&hermitize(rho), SUPPORT_TOL);
    let qs = support_basis(&hermitize(sigma), SUPPORT_TOL);
    let (nr, ns) = (qr.ncols(), qs.ncols());
    let mut prob = SdpProblem::new(vec![nr + ns], Sense::Maximize);
    if nr == 0 || ns == 0 {
        return Ok(prob);
    }
    let rr = qr.adjoint() * rho * &qr;
    let ss = qs.adjoint() * sigma * &qs;
    let overlap = qs.adjoint() * &qr;
    for a in 0..nr {
        for b in 0..ns {
            prob.objective.add(0, a, nr + b, overlap[(b, a)]);
        }
    }
    for (f, v) in component_functionals(0, nr, 0).into_iter().zip(hermitian_components(&rr)) {
        prob.add_constraint(f, v);
    }
    for (f, v) in component_functionals(0, ns, nr).into_iter().zip(hermitian_components(&ss)) {
        prob.add_constraint(f, v);
    }
    Ok(prob)
}

