//! Quantum channels in Kraus form with lazily cached Choi matrix and
//! Stinespring isometry.
//!
//! Conventions: the Choi matrix is J = Σ_ij |i⟩⟨j| ⊗ 𝒩(|i⟩⟨j|) on in ⊗ out,
//! so J[(i,a),(j,b)] = 𝒩(|i⟩⟨j|)[a,b]. The Stinespring isometry is
//! V = Σ_k E_k ⊗ |k⟩ on out ⊗ env.

use std::sync::OnceLock;

use crate::algebra::{
    block_structure, commutant, conditional_expectation, conditional_expectation_kraus,
    AlgebraBasis, BlockStructure,
};
use crate::error::{Error, Result};
use crate::matrix::{cr, eigh, eye, max_abs, min_eigenvalue, state_fidelity, trace_norm, CMatrix};

/// Eigenvalue cutoff (relative) when extracting Kraus operators from a Choi matrix.
pub const KRAUS_CUTOFF: f64 = 1e-12;
/// Default threshold for superoperator equality on Choi matrices.
pub const CHOI_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Channel {
    in_dim: usize,
    out_dim: usize,
    kraus: Vec<CMatrix>,
    choi: OnceLock<CMatrix>,
    stinespring: OnceLock<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub trace_preservation_residual: f64,
    pub choi_min_eigenvalue: f64,
    pub isometry_residual: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDistance {
    pub choi_frobenius: f64,
    pub fidelity_lower_bound: Option<f64>,
}

impl Channel {
    /// Builds a channel from Kraus operators; only shapes are checked here,
    /// use [`Channel::validate`] for trace preservation.
    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty Kraus family".into()))?;
        let (dout, din) = first.shape();
        if kraus.iter().any(|k| k.shape() != (dout, din)) {
            return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
        }
        Ok(Self { in_dim: din, out_dim: dout, kraus, choi: OnceLock::new(), stinespring: OnceLock::new() })
    }

    /// Kraus form of a CP map given by its Choi matrix (in ⊗ out convention).
    pub fn from_choi(choi: &CMatrix, in_dim: usize, out_dim: usize) -> Result<Self> {
        if choi.nrows() != in_dim * out_dim || choi.ncols() != in_dim * out_dim {
            return Err(Error::DimensionMismatch("Choi matrix size".into()));
        }
        let (vals, vecs) = eigh(choi);
        let top = vals.last().copied().unwrap_or(0.0);
        if let Some(&lo) = vals.first() {
            if lo < -1e-9 * top.max(1.0) {
                return Err(Error::NotPsd(lo));
            }
        }
        let mut kraus = Vec::new();
        for k in (0..vals.len()).rev() {
            if vals[k] <= KRAUS_CUTOFF * top.max(1e-300) {
                continue;
            }
            let s = vals[k].sqrt();
            kraus.push(CMatrix::from_fn(out_dim, in_dim, |a, i| vecs[(i * out_dim + a, k)] * s));
        }
        if kraus.is_empty() {
            kraus.push(CMatrix::zeros(out_dim, in_dim));
        }
        Self::from_kraus(kraus)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![eye(d)]).expect("nonempty")
    }

    pub fn unitary(u: CMatrix) -> Self {
        Self::from_kraus(vec![u]).expect("nonempty")
    }

    /// ρ ↦ Tr(ρ) as a map to a one-dimensional output.
    pub fn trace_out(d: usize) -> Self {
        let kraus = (0..d).map(|i| CMatrix::from_fn(1, d, |_, j| cr((i == j) as u8 as f64))).collect();
        Self::from_kraus(kraus).expect("nonempty")
    }

    /// ρ ↦ Tr(ρ)·1/d.
    pub fn completely_depolarizing(d: usize) -> Self {
        let s = cr(1.0 / (d as f64).sqrt());
        let mut kraus = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                kraus.push(crate::matrix::unit(d, a, b) * s);
            }
        }
        Self::from_kraus(kraus).expect("nonempty")
    }

    /// ρ ↦ Tr(ρ)·σ.
    pub fn replacement(sigma: &CMatrix, in_dim: usize) -> Result<Self> {
        let (vals, vecs) = eigh(sigma);
        let mut kraus = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if v <= 1e-14 {
                continue;
            }
            let col = vecs.column(k) * cr(v.sqrt());
            for i in 0..in_dim {
                let mut e = CMatrix::zeros(sigma.nrows(), in_dim);
                e.set_column(i, &col);
                kraus.push(e);
            }
        }
        Self::from_kraus(kraus)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn kraus_rank(&self) -> usize {
        self.kraus.len()
    }

    pub fn choi(&self) -> &CMatrix {
        self.choi.get_or_init(|| {
            let (din, dout) = (self.in_dim, self.out_dim);
            let mut choi = CMatrix::zeros(din * dout, din * dout);
            for e in &self.kraus {
                let v = CMatrix::from_fn(din * dout, 1, |idx, _| e[(idx % dout, idx / dout)]);
                choi += &v * v.adjoint();
            }
            choi
        })
    }

    pub fn stinespring(&self) -> &CMatrix {
        self.stinespring.get_or_init(|| {
            let (din, dout, r) = (self.in_dim, self.out_dim, self.kraus.len());
            let mut v = CMatrix::zeros(dout * r, din);
            for (k, e) in self.kraus.iter().enumerate() {
                for a in 0..dout {
                    for i in 0..din {
                        v[(a * r + k, i)] = e[(a, i)];
                    }
                }
            }
            v
        })
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.out_dim, self.out_dim);
        for e in &self.kraus {
            out += e * rho * e.adjoint();
        }
        out
    }

    /// Heisenberg-picture map X ↦ Σ E†XE.
    pub fn adjoint_apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.nrows() != self.out_dim || x.ncols() != self.out_dim {
            return Err(Error::DimensionMismatch("observable size differs from output".into()));
        }
        let mut out = CMatrix::zeros(self.in_dim, self.in_dim);
        for e in &self.kraus {
            out += e.adjoint() * x * e;
        }
        Ok(out)
    }

    /// (𝒩 ⊗ id_r)(τ) for τ on in ⊗ ref.
    pub fn apply_with_reference(&self, tau: &CMatrix, ref_dim: usize) -> CMatrix {
        let id = eye(ref_dim);
        let mut out = CMatrix::zeros(self.out_dim * ref_dim, self.out_dim * ref_dim);
        for e in &self.kraus {
            let big = e.kronecker(&id);
            out += &big * tau * big.adjoint();
        }
        out
    }

    pub fn trace_preservation_residual(&self) -> f64 {
        let mut s = CMatrix::zeros(self.in_dim, self.in_dim);
        for e in &self.kraus {
            s += e.adjoint() * e;
        }
        max_abs(&(s - eye(self.in_dim)))
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let tp = self.trace_preservation_residual();
        let lo = min_eigenvalue(self.choi());
        let v = self.stinespring();
        let iso = max_abs(&(v.adjoint() * v - eye(self.in_dim)));
        ValidationReport {
            trace_preservation_residual: tp,
            choi_min_eigenvalue: lo,
            isometry_residual: iso,
            valid: tp <= tol && lo >= -tol && iso <= tol,
        }
    }

    /// Kraus family of minimal size reproducing the same map: unitary mixing
    /// by the eigenvectors of the HS Gram matrix, dropping null directions.
    pub fn reduced(&self) -> Channel {
        let r = self.kraus.len();
        let g = CMatrix::from_fn(r, r, |k, l| crate::matrix::hs_inner(&self.kraus[k], &self.kraus[l]));
        let (vals, vecs) = eigh(&g);
        let top = vals.last().copied().unwrap_or(0.0);
        let mut kraus = Vec::new();
        for j in (0..r).rev() {
            if vals[j] <= KRAUS_CUTOFF * top.max(1e-300) {
                continue;
            }
            let mut f = CMatrix::zeros(self.out_dim, self.in_dim);
            for k in 0..r {
                f += &self.kraus[k] * vecs[(k, j)];
            }
            kraus.push(f);
        }
        if kraus.is_empty() {
            return self.clone();
        }
        Channel::from_kraus(kraus).expect("same shapes")
    }

    /// Complementary channel in Gram form: ρ ↦ Σ_ij Tr(E_i ρ E_j†)|i⟩⟨j|.
    pub fn complementary(&self) -> Channel {
        let r = self.kraus.len();
        let kraus = (0..self.out_dim)
            .map(|a| CMatrix::from_fn(r, self.in_dim, |i, x| self.kraus[i][(a, x)]))
            .collect();
        Channel::from_kraus(kraus).expect("nonempty")
    }
}

fn check_compose(outer: &Channel, inner: &Channel) -> Result<()> {
    if outer.in_dim != inner.out_dim {
        return Err(Error::DimensionMismatch(format!(
            "composition of a {}-input channel after a {}-output channel",
            outer.in_dim, inner.out_dim
        )));
    }
    Ok(())
}

/// outer ∘ inner, Kraus order: outer index major.
pub fn compose(outer: &Channel, inner: &Channel) -> Result<Channel> {
    check_compose(outer, inner)?;
    let mut kraus = Vec::with_capacity(outer.kraus.len() * inner.kraus.len());
    for a in &outer.kraus {
        for b in &inner.kraus {
            kraus.push(a * b);
        }
    }
    Channel::from_kraus(kraus)
}

/// Composition followed by Kraus rank reduction.
pub fn compose_reduced(outer: &Channel, inner: &Channel) -> Result<Channel> {
    Ok(compose(outer, inner)?.reduced())
}

pub fn tensor_channels(a: &Channel, b: &Channel) -> Channel {
    let mut kraus = Vec::with_capacity(a.kraus.len() * b.kraus.len());
    for x in &a.kraus {
        for y in &b.kraus {
            kraus.push(x.kronecker(y));
        }
    }
    Channel::from_kraus(kraus).expect("nonempty")
}

/// Sum of two CP maps with equal shapes (Kraus families concatenated).
pub fn channel_sum(a: &Channel, b: &Channel) -> Result<Channel> {
    if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
        return Err(Error::DimensionMismatch("summands differ in shape".into()));
    }
    let mut kraus = a.kraus.clone();
    kraus.extend(b.kraus.iter().cloned());
    Channel::from_kraus(kraus)
}

pub fn distance(a: &Channel, b: &Channel) -> Result<ChannelDistance> {
    if a.in_dim != b.in_dim || a.out_dim != b.out_dim {
        return Err(Error::DimensionMismatch("channels differ in shape".into()));
    }
    Ok(ChannelDistance { choi_frobenius: (a.choi() - b.choi()).norm(), fidelity_lower_bound: None })
}

pub fn choi_distance(a: &Channel, b: &Channel) -> Result<f64> {
    Ok(distance(a, b)?.choi_frobenius)
}

fn idempotence_residual(p: &Channel) -> Result<f64> {
    choi_distance(&compose(p, p)?, p)
}

/// Def. of physicality: Choi-Frobenius distance between 𝒬𝒩𝒫 and 𝒬𝒩.
pub fn is_physical(n: &Channel, p: &Channel, q: &Channel, tol: f64) -> Result<(bool, f64)> {
    for (name, c) in [("p", p), ("q", q)] {
        let r = idempotence_residual(c)?;
        if r > CHOI_TOL {
            return Err(Error::Precondition(format!("{name} is not idempotent (residual {r:.3e})")));
        }
    }
    let qn = compose(q, n)?;
    let qnp = compose(&qn, p)?;
    let res = choi_distance(&qnp, &qn)?;
    Ok((res <= tol, res))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixReport {
    /// max_B ‖𝒩̂(B) − B‖_F over basis elements.
    pub adjoint_residual: f64,
    /// max ‖[E_i, B]‖_F over Kraus operators and basis elements.
    pub kraus_commutator_residual: f64,
    pub fixes: bool,
}

fn check_square_on(n: &Channel, b: &AlgebraBasis) -> Result<()> {
    if n.in_dim != n.out_dim || n.in_dim != b.ambient_dim() {
        return Err(Error::DimensionMismatch("channel and algebra dimensions".into()));
    }
    Ok(())
}

pub fn fixes_algebra(n: &Channel, b: &AlgebraBasis, tol: f64) -> Result<FixReport> {
    check_square_on(n, b)?;
    let mut adj: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for x in b.basis() {
        adj = adj.max((n.adjoint_apply(x)? - x).norm());
        for e in n.kraus() {
            comm = comm.max(crate::matrix::commutator(e, x).norm());
        }
    }
    Ok(FixReport {
        adjoint_residual: adj,
        kraus_commutator_residual: comm,
        fixes: adj <= tol && comm <= tol,
    })
}

/// Largest residual of 𝒩̂(A) outside the algebra.
pub fn maps_into_residual(n: &Channel, a: &AlgebraBasis) -> Result<f64> {
    check_square_on(n, a)?;
    let mut worst: f64 = 0.0;
    for x in a.basis() {
        worst = worst.max(a.residual(&n.adjoint_apply(x)?));
    }
    Ok(worst)
}

pub fn maps_into(n: &Channel, a: &AlgebraBasis, tol: f64) -> Result<bool> {
    Ok(maps_into_residual(n, a)? <= tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub maps_into_residual: f64,
    pub fix: FixReport,
    pub local: bool,
    /// b equals the commutant of a.
    pub strong: bool,
}

pub fn is_local(n: &Channel, a: &AlgebraBasis, b: &AlgebraBasis, tol: f64) -> Result<LocalityReport> {
    check_square_on(n, a)?;
    check_square_on(n, b)?;
    let mut worst: f64 = 0.0;
    for x in a.basis() {
        for y in b.basis() {
            worst = worst.max(crate::matrix::commutator(x, y).norm());
        }
    }
    if worst > 1e-8 {
        return Err(Error::Precondition(format!(
            "second algebra is not inside the commutant of the first (residual {worst:.3e})"
        )));
    }
    let mi = maps_into_residual(n, a)?;
    let fix = fixes_algebra(n, b, tol)?;
    let strong = crate::algebra::same_span(&commutant(a), b, crate::algebra::SPAN_TOL);
    Ok(LocalityReport { maps_into_residual: mi, local: mi <= tol && fix.fixes, fix, strong })
}

fn check_fidelity_args(n: &Channel, m: &Channel, rho: &CMatrix) -> Result<()> {
    if n.in_dim != m.in_dim || n.out_dim != m.out_dim {
        return Err(Error::DimensionMismatch("channels differ in shape".into()));
    }
    if rho.nrows() != n.in_dim || rho.ncols() != n.in_dim {
        return Err(Error::DimensionMismatch("state does not match channel input".into()));
    }
    Ok(())
}

/// Entanglement fidelity f((𝒩⊗id)(ψ), (ℳ⊗id)(ψ)) for a purification ψ of ρ.
pub fn entanglement_fidelity(n: &Channel, m: &Channel, rho: &CMatrix) -> Result<f64> {
    check_fidelity_args(n, m, rho)?;
    let psi = crate::matrix::purify(rho)?;
    let tau = &psi * psi.adjoint();
    let d = n.in_dim;
    let a = n.apply_with_reference(&tau, d);
    let b = m.apply_with_reference(&tau, d);
    state_fidelity(&crate::matrix::hermitize(&a), &crate::matrix::hermitize(&b))
}

/// Same quantity from the Kraus overlaps: ‖[Tr(ρ E_k† F_l)]_{kl}‖_1.
pub fn entanglement_fidelity_kraus(n: &Channel, m: &Channel, rho: &CMatrix) -> Result<f64> {
    check_fidelity_args(n, m, rho)?;
    Ok(trace_norm(&kraus_overlap(n.kraus(), m.kraus(), rho)))
}

/// Γ[k,l] = Tr(ρ E_k† F_l).
pub fn kraus_overlap(e: &[CMatrix], f: &[CMatrix], rho: &CMatrix) -> CMatrix {
    let fr: Vec<CMatrix> = f.iter().map(|fl| fl * rho).collect();
    CMatrix::from_fn(e.len(), f.len(), |k, l| {
        e[k].iter().zip(fr[l].iter()).map(|(x, y)| x.conj() * y).sum()
    })
}

/// Local complementary channel, constructive form: the Gram complement of
/// 𝒫_{ℬ'} ∘ 𝒩 (no rank reduction).
pub fn local_complementary(c: &Channel, b: &AlgebraBasis) -> Result<Channel> {
    if c.out_dim != b.ambient_dim() {
        return Err(Error::DimensionMismatch("algebra must act on the channel output".into()));
    }
    let pb = conditional_expectation(&commutant(b))?;
    Ok(compose(&pb, c)?.complementary())
}

/// Definitional form (𝒫_ℬ ⊗ id_E)∘𝒱_𝒩 on out ⊗ env, i.e. the channel whose
/// adjoint is B⊗E ↦ V†(𝒫_ℬ(B)⊗E)V.
pub fn local_complementary_definitional(c: &Channel, b: &AlgebraBasis) -> Result<Channel> {
    if c.out_dim != b.ambient_dim() {
        return Err(Error::DimensionMismatch("algebra must act on the channel output".into()));
    }
    let pb = conditional_expectation(b)?;
    let env = eye(c.kraus_rank());
    let kraus = pb.kraus().iter().map(|k| k.kronecker(&env) * c.stinespring()).collect();
    Channel::from_kraus(kraus)
}

/// Channels T, T' with T∘𝒞 = 𝒟 and T'∘𝒟 = 𝒞, where 𝒞 and 𝒟 are the
/// constructive and definitional local complements of a channel with
/// `env_dim` Kraus operators. `commutant_blocks` is the block structure of ℬ'.
pub fn local_complement_translators(
    commutant_blocks: &BlockStructure,
    env_dim: usize,
) -> Result<(Channel, Channel)> {
    let d = commutant_blocks.sectors[0].isometry.ncols();
    let r = env_dim;
    let cdim: usize = commutant_blocks.sectors.iter().map(|s| s.right_dim * s.right_dim).sum::<usize>() * r;
    let ddim = d * r;
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut off = 0;
    for s in &commutant_blocks.sectors {
        let (n, m) = (s.left_dim, s.right_dim);
        let ud = s.isometry.adjoint();
        for a in 0..m {
            for cc in 0..n {
                let mut t = CMatrix::zeros(ddim, cdim);
                let mut tb = CMatrix::zeros(cdim, ddim);
                for b in 0..m {
                    let col = ud.column(cc * m + b);
                    for k in 0..r {
                        let src = (off + a * m + b) * r + k;
                        for x in 0..d {
                            t[(x * r + k, src)] = col[x] / cr((n as f64).sqrt());
                            tb[(src, x * r + k)] = col[x].conj() / cr((m as f64).sqrt());
                        }
                    }
                }
                forward.push(t);
                backward.push(tb);
            }
        }
        off += m * m;
    }
    Ok((Channel::from_kraus(forward)?, Channel::from_kraus(backward)?))
}

/// Block structure of ℬ' used by the constructive local complement.
pub fn commutant_blocks(b: &AlgebraBasis) -> Result<BlockStructure> {
    block_structure(&commutant(b))
}

/// Kraus operators of 𝒫_{ℬ'} in the order used by [`local_complementary`].
pub fn commutant_projection_kraus(b: &AlgebraBasis) -> Result<Vec<CMatrix>> {
    Ok(conditional_expectation_kraus(&commutant_blocks(b)?))
}
