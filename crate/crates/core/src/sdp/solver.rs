//! Primal-dual interior-point method (HKM direction, Mehrotra
//! predictor-corrector) for
//!
//!   min ⟨C,X⟩  s.t. ⟨A_i,X⟩ = b_i, X ⪰ 0,     ⟨A,X⟩ = Re Tr(AX),
//!
//! with dual  max bᵀy  s.t. Z = C − Σ y_i A_i ⪰ 0.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Functional, SdpProblem, SdpSolution, SdpStatus, Sense};
use crate::matrix::{cr, eigh, eye, hermitize, max_abs, CMatrix};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 200 }
    }
}

/// A Hermitian matrix restricted to one block.
#[derive(Debug, Clone)]
enum BlockOp {
    Sparse(Vec<(usize, usize, Complex64)>),
    Dense(CMatrix),
}

#[derive(Debug, Clone)]
struct Op {
    parts: Vec<(usize, BlockOp)>,
}

impl Op {
    fn from_functional(f: &Functional, dims: &[usize]) -> Self {
        let mut per_block: BTreeMap<usize, BTreeMap<(usize, usize), Complex64>> = BTreeMap::new();
        for t in &f.terms {
            let e = per_block.entry(t.block).or_default();
            if t.row == t.col {
                *e.entry((t.row, t.row)).or_insert(cr(0.0)) += cr(t.coeff.re);
            } else {
                *e.entry((t.col, t.row)).or_insert(cr(0.0)) += t.coeff * 0.5;
                *e.entry((t.row, t.col)).or_insert(cr(0.0)) += t.coeff.conj() * 0.5;
            }
        }
        let parts = per_block
            .into_iter()
            .filter_map(|(b, entries)| {
                let entries: Vec<_> = entries
                    .into_iter()
                    .filter(|(_, v)| v.norm() > 0.0)
                    .map(|((r, c), v)| (r, c, v))
                    .collect();
                if entries.is_empty() {
                    return None;
                }
                let n = dims[b];
                if entries.len() > 2 * n {
                    let mut m = CMatrix::zeros(n, n);
                    for (r, c, v) in entries {
                        m[(r, c)] = v;
                    }
                    Some((b, BlockOp::Dense(m)))
                } else {
                    Some((b, BlockOp::Sparse(entries)))
                }
            })
            .collect();
        Op { parts }
    }

    /// Re Tr(A X).
    fn dot(&self, xs: &[CMatrix]) -> f64 {
        let mut s = 0.0;
        for (b, op) in &self.parts {
            let x = &xs[*b];
            match op {
                BlockOp::Sparse(es) => {
                    for &(r, c, v) in es {
                        s += (v * x[(c, r)]).re;
                    }
                }
                BlockOp::Dense(a) => {
                    s += a.iter().zip(x.transpose().iter()).map(|(p, q)| (p * q).re).sum::<f64>();
                }
            }
        }
        s
    }

    fn axpy_into(&self, alpha: f64, out: &mut [CMatrix]) {
        for (b, op) in &self.parts {
            match op {
                BlockOp::Sparse(es) => {
                    for &(r, c, v) in es {
                        out[*b][(r, c)] += v * alpha;
                    }
                }
                BlockOp::Dense(a) => out[*b] += a * cr(alpha),
            }
        }
    }

    fn frob_sq(&self) -> f64 {
        self.parts
            .iter()
            .map(|(_, op)| match op {
                BlockOp::Sparse(es) => es.iter().map(|e| e.2.norm_sqr()).sum::<f64>(),
                BlockOp::Dense(a) => a.norm_squared(),
            })
            .sum()
    }

    fn to_dense_block(&self, b: usize, n: usize) -> Option<CMatrix> {
        let mut m = None;
        for (bb, op) in &self.parts {
            if *bb != b {
                continue;
            }
            let acc = m.get_or_insert_with(|| CMatrix::zeros(n, n));
            match op {
                BlockOp::Sparse(es) => {
                    for &(r, c, v) in es {
                        acc[(r, c)] += v;
                    }
                }
                BlockOp::Dense(a) => *acc += a,
            }
        }
        m
    }
}

/// ⟨A, B⟩ for two ops, both expanded densely per shared block.
fn op_inner(a: &Op, b: &Op, dims: &[usize]) -> f64 {
    let mut s = 0.0;
    for (ba, _) in &a.parts {
        if !b.parts.iter().any(|(bb, _)| bb == ba) {
            continue;
        }
        let n = dims[*ba];
        let da = a.to_dense_block(*ba, n).unwrap();
        let db = b.to_dense_block(*ba, n).unwrap();
        s += da.iter().zip(db.transpose().iter()).map(|(p, q)| (p * q).re).sum::<f64>();
    }
    s
}

/// Keeps a maximal linearly independent prefix-greedy subset of constraints.
/// Returns (kept, dropped, consistent).
fn independent_rows(ops: &[Op], b: &[f64], dims: &[usize]) -> (Vec<usize>, Vec<usize>, bool) {
    let m = ops.len();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    let mut l_rows: Vec<Vec<f64>> = Vec::new(); // per kept row: L coefficients against kept
    let mut beta: Vec<f64> = Vec::new();
    let mut consistent = true;
    let bscale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for i in 0..m {
        let gii = ops[i].frob_sq();
        if gii == 0.0 {
            if b[i].abs() > 1e-9 * bscale {
                consistent = false;
            }
            dropped.push(i);
            continue;
        }
        let mut li = Vec::with_capacity(kept.len());
        for (k, &kk) in kept.iter().enumerate() {
            let g = op_inner(&ops[i], &ops[kk], dims);
            let mut v = g;
            for l in 0..k {
                v -= li[l] * l_rows[k][l];
            }
            v /= l_rows[k][k];
            li.push(v);
        }
        let r = gii - li.iter().map(|v| v * v).sum::<f64>();
        let bres = b[i] - li.iter().zip(&beta).map(|(l, bb)| l * bb).sum::<f64>();
        if r <= 1e-10 * gii {
            if bres.abs() > 1e-7 * bscale * (1.0 + gii.sqrt()) {
                consistent = false;
            }
            dropped.push(i);
        } else {
            let d = r.sqrt();
            li.push(d);
            beta.push(bres / d);
            l_rows.push(li);
            kept.push(i);
        }
    }
    (kept, dropped, consistent)
}

fn block_inner(a: &[CMatrix], b: &[CMatrix]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y.iter()).map(|(p, q)| (p.conj() * q).re).sum::<f64>())
        .sum()
}

fn blocks_norm(a: &[CMatrix]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Largest α ≤ 1 with X + αΔX ⪰ 0 scaled by γ; X must be positive definite.
fn step_length(x: &[CMatrix], dx: &[CMatrix], gamma: f64) -> Option<f64> {
    let mut alpha: f64 = 1.0;
    for (xb, db) in x.iter().zip(dx) {
        let chol = xb.clone().cholesky()?;
        let l = chol.l();
        let s = l.solve_lower_triangular(db)?;
        let t = l.solve_lower_triangular(&s.adjoint())?;
        let lo = eigh(&hermitize(&t)).0.first().copied().unwrap_or(0.0);
        if lo < 0.0 {
            alpha = alpha.min(gamma * (-1.0 / lo));
        }
    }
    Some(alpha.min(1.0))
}

fn solve_real(m: &DMatrix<f64>, rhs: &nalgebra::DVector<f64>) -> Option<nalgebra::DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

struct Prepared {
    dims: Vec<usize>,
    c: Vec<CMatrix>,
    ops: Vec<Op>,
    b: Vec<f64>,
}

fn infeasible_solution(dims: &[usize], dropped: Vec<usize>) -> SdpSolution {
    SdpSolution {
        status: SdpStatus::Infeasible,
        value: f64::NAN,
        dual_value: f64::NAN,
        blocks: dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        dual_slack: dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        dual_values: vec![],
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations: 0,
        dropped_constraints: dropped,
    }
}

pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let dims = problem.block_dims.clone();
    if problem.check().is_err() {
        let mut s = infeasible_solution(&dims, vec![]);
        s.status = SdpStatus::NumericalFailure;
        return s;
    }
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let c_op = Op::from_functional(&problem.objective, &dims);
    let mut c: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
    c_op.axpy_into(sign, &mut c);

    let all_ops: Vec<Op> =
        problem.constraints.iter().map(|k| Op::from_functional(&k.functional, &dims)).collect();
    let all_b: Vec<f64> = problem.constraints.iter().map(|k| k.rhs).collect();
    let (kept, dropped, consistent) = independent_rows(&all_ops, &all_b, &dims);
    if !consistent {
        return infeasible_solution(&dims, dropped);
    }
    // run on a unit-scale objective so rescaling the objective leaves the
    // iterates unchanged
    let cscale = c.iter().map(max_abs).fold(0.0, f64::max);
    let cscale = if cscale > 0.0 { cscale } else { 1.0 };
    let c: Vec<CMatrix> = c.into_iter().map(|x| x / cr(cscale)).collect();
    let prep = Prepared {
        dims: dims.clone(),
        c,
        ops: kept.iter().map(|&i| all_ops[i].clone()).collect(),
        b: kept.iter().map(|&i| all_b[i]).collect(),
    };
    let mut sol = interior_point(&prep, opts);
    // map duals back to the original constraint indexing
    let mut y_full = vec![0.0; problem.constraints.len()];
    for (k, &i) in kept.iter().enumerate() {
        y_full[i] = sol.dual_values.get(k).copied().unwrap_or(0.0);
    }
    sol.dual_values = y_full.into_iter().map(|v| v * sign * cscale).collect();
    sol.value *= sign * cscale;
    sol.dual_value *= sign * cscale;
    for z in &mut sol.dual_slack {
        *z *= cr(cscale);
    }
    sol.dropped_constraints = dropped;
    sol
}

fn interior_point(p: &Prepared, opts: &SolveOptions) -> SdpSolution {
    let dims = &p.dims;
    let m = p.ops.len();
    let ntot: usize = dims.iter().sum();
    let nf = ntot as f64;
    let bnorm = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cnorm = blocks_norm(&p.c);
    let max_a = p.ops.iter().map(|o| o.frob_sq().sqrt()).fold(0.0, f64::max);

    let mut xi: f64 = 10f64.max(nf.sqrt());
    for (o, &bi) in p.ops.iter().zip(&p.b) {
        xi = xi.max(nf.sqrt() * (1.0 + bi.abs()) / (1.0 + o.frob_sq().sqrt()));
    }
    let eta = 10f64.max(nf.sqrt()).max(cnorm).max(max_a);
    let mut x: Vec<CMatrix> = dims.iter().map(|&n| eye(n) * cr(xi)).collect();
    let mut z: Vec<CMatrix> = dims.iter().map(|&n| eye(n) * cr(eta)).collect();
    let mut y = vec![0.0; m];

    let a_of = |xs: &[CMatrix]| -> Vec<f64> { p.ops.iter().map(|o| o.dot(xs)).collect() };
    let at_of = |ys: &[f64]| -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = dims.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (o, &v) in p.ops.iter().zip(ys) {
            if v != 0.0 {
                o.axpy_into(v, &mut out);
            }
        }
        out
    };

    let mut status = SdpStatus::MaxIter;
    let mut iters = 0;
    let (mut rp_rel, mut rd_rel, mut gap_rel) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut pobj = f64::NAN;
    let mut dobj = f64::NAN;
    for it in 0..=opts.max_iter {
        iters = it;
        let ax = a_of(&x);
        let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let aty = at_of(&y);
        let rd: Vec<CMatrix> = (0..dims.len()).map(|k| &p.c[k] - &aty[k] - &z[k]).collect();
        pobj = block_inner(&p.c, &x);
        dobj = p.b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();
        rp_rel = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + bnorm);
        rd_rel = blocks_norm(&rd) / (1.0 + cnorm);
        gap_rel = (pobj - dobj).abs() / pobj.abs().max(dobj.abs()).max(1.0);
        if rp_rel <= opts.tol && rd_rel <= opts.tol && gap_rel <= opts.tol {
            status = SdpStatus::Optimal;
            break;
        }
        if it == opts.max_iter {
            break;
        }
        if !pobj.is_finite() || !dobj.is_finite() {
            status = SdpStatus::NumericalFailure;
            break;
        }
        let mu = block_inner(&x, &z) / nf;

        let zinv: Option<Vec<CMatrix>> = z
            .iter()
            .map(|zb| zb.clone().cholesky().map(|ch| hermitize(&ch.inverse())))
            .collect();
        let Some(zinv) = zinv else {
            status = SdpStatus::NumericalFailure;
            break;
        };

        // Schur complement M_ij = Re Tr(A_i X A_j Z⁻¹)
        let g: Vec<Vec<(usize, CMatrix)>> = p
            .ops
            .iter()
            .map(|o| {
                o.parts
                    .iter()
                    .map(|(b, op)| {
                        let xb = &x[*b];
                        let zi = &zinv[*b];
                        let n = dims[*b];
                        let gm = match op {
                            BlockOp::Sparse(es) => {
                                let mut gm = CMatrix::zeros(n, n);
                                for &(r, c, v) in es {
                                    for i in 0..n {
                                        let xv = xb[(i, r)] * v;
                                        if xv.norm() == 0.0 {
                                            continue;
                                        }
                                        for j in 0..n {
                                            gm[(i, j)] += xv * zi[(c, j)];
                                        }
                                    }
                                }
                                gm
                            }
                            BlockOp::Dense(a) => xb * a * zi,
                        };
                        (*b, gm)
                    })
                    .collect()
            })
            .collect();
        let mut mm = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for (b, op) in &p.ops[i].parts {
                    for (bg, gm) in &g[j] {
                        if bg != b {
                            continue;
                        }
                        match op {
                            BlockOp::Sparse(es) => {
                                for &(r, c, v) in es {
                                    s += (v * gm[(c, r)]).re;
                                }
                            }
                            BlockOp::Dense(a) => {
                                s += a
                                    .iter()
                                    .zip(gm.transpose().iter())
                                    .map(|(u, w)| (u * w).re)
                                    .sum::<f64>();
                            }
                        }
                    }
                }
                mm[(i, j)] = s;
                mm[(j, i)] = s;
            }
        }
        let chol = mm.clone().cholesky();
        let solve_m = |rhs: &nalgebra::DVector<f64>| -> Option<nalgebra::DVector<f64>> {
            match &chol {
                Some(ch) => Some(ch.solve(rhs)),
                None => solve_real(&mm, rhs),
            }
        };

        // direction for a given complementarity target T: ΔX = T − X ΔZ Z⁻¹
        let x_rd_zinv: Vec<CMatrix> = (0..dims.len()).map(|k| &x[k] * &rd[k] * &zinv[k]).collect();
        let direction = |t: &[CMatrix]| -> Option<(Vec<CMatrix>, Vec<f64>, Vec<CMatrix>)> {
            let tt: Vec<CMatrix> = (0..dims.len()).map(|k| &t[k] - &x_rd_zinv[k]).collect();
            let at = a_of(&tt);
            let rhs = nalgebra::DVector::from_iterator(m, (0..m).map(|i| rp[i] - at[i]));
            let dy = solve_m(&rhs)?;
            let dyv: Vec<f64> = dy.iter().copied().collect();
            let atdy = at_of(&dyv);
            let dz: Vec<CMatrix> = (0..dims.len()).map(|k| &rd[k] - &atdy[k]).collect();
            let dx: Vec<CMatrix> =
                (0..dims.len()).map(|k| hermitize(&(&t[k] - &x[k] * &dz[k] * &zinv[k]))).collect();
            Some((dx, dyv, dz))
        };

        // predictor
        let t_aff: Vec<CMatrix> = x.iter().map(|xb| -xb).collect();
        let Some((dxa, _, dza)) = direction(&t_aff) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let (Some(ap), Some(ad)) = (step_length(&x, &dxa, 1.0), step_length(&z, &dza, 1.0)) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let mut xa = x.clone();
        let mut za = z.clone();
        for k in 0..dims.len() {
            xa[k] += &dxa[k] * cr(ap);
            za[k] += &dza[k] * cr(ad);
        }
        let mu_aff = block_inner(&xa, &za) / nf;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let t_cor: Vec<CMatrix> = (0..dims.len())
            .map(|k| &zinv[k] * cr(sigma * mu) - &x[k] - &dxa[k] * &dza[k] * &zinv[k])
            .collect();
        let Some((dx, dy, dz)) = direction(&t_cor) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        let gamma = 0.9 + 0.08 * ap.min(ad);
        let (Some(ap), Some(ad)) = (step_length(&x, &dx, gamma), step_length(&z, &dz, gamma)) else {
            status = SdpStatus::NumericalFailure;
            break;
        };
        for k in 0..dims.len() {
            x[k] = hermitize(&(&x[k] + &dx[k] * cr(ap)));
            z[k] = hermitize(&(&z[k] + &dz[k] * cr(ad)));
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
        if ap < 1e-12 && ad < 1e-12 {
            status = SdpStatus::NumericalFailure;
            break;
        }
    }
    SdpSolution {
        status,
        value: pobj,
        dual_value: dobj,
        blocks: x,
        dual_slack: z,
        dual_values: y,
        primal_residual: rp_rel,
        dual_residual: rd_rel,
        gap: gap_rel,
        iterations: iters,
        dropped_constraints: vec![],
    }
}
