//! Finite-dimensional unital †-algebras given by Hilbert-Schmidt orthonormal
//! bases: generation, commutants, centers, Wedderburn blocks and conditional
//! expectations.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::matrix::{cr, eigh, eye, hermitize, unit, unvec_rows, vec_rows, CMatrix, CVector};
use crate::random::{complex_gaussian, gaussian, seeded};

/// Relative drop tolerance of the Gram-Schmidt closure.
pub const DROP_TOL: f64 = 1e-10;
/// Principal-angle tolerance used by `intersect`.
pub const INTERSECT_TOL: f64 = 1e-9;
/// Principal-angle tolerance for span comparisons.
pub const SPAN_TOL: f64 = 1e-7;
/// Eigenvalue clustering tolerance for sector splitting.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Seed of the random central element used for sector splitting.
pub const SECTOR_SEED: u64 = 0x5EC7_0B1A;

#[derive(Debug, Clone)]
pub struct AlgebraBasis {
    ambient_dim: usize,
    basis: Vec<CMatrix>,
}

/// Incremental orthonormalizer over vectorized matrices.
struct Orthonormalizer {
    vecs: Vec<CVector>,
}

impl Orthonormalizer {
    fn new() -> Self {
        Self { vecs: Vec::new() }
    }

    fn residual(&self, v: &CVector) -> CVector {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.vecs {
                let coef: Complex64 = q.iter().zip(r.iter()).map(|(x, y)| x.conj() * y).sum();
                r.axpy(-coef, q, Complex64::new(1.0, 0.0));
            }
        }
        r
    }

    /// Adds the normalized residual of `v` if it is not (numerically) in the span.
    fn push(&mut self, v: &CVector, tol: f64) -> bool {
        let n0 = v.norm();
        if n0 == 0.0 {
            return false;
        }
        let r = self.residual(v);
        let n = r.norm();
        if n <= tol * n0.max(1.0) {
            return false;
        }
        self.vecs.push(r / cr(n));
        true
    }
}

impl AlgebraBasis {
    /// Wraps a basis that is already HS-orthonormal. No closure check.
    pub fn from_orthonormal(ambient_dim: usize, basis: Vec<CMatrix>) -> Self {
        Self { ambient_dim, basis }
    }

    /// Orthonormalizes a spanning set without closing it under products.
    pub fn span_of(ambient_dim: usize, mats: &[CMatrix]) -> Result<Self> {
        check_dims(ambient_dim, mats)?;
        let mut orth = Orthonormalizer::new();
        for m in mats {
            orth.push(&vec_rows(m), DROP_TOL);
        }
        Ok(Self::from_vecs(ambient_dim, &orth.vecs))
    }

    fn from_vecs(d: usize, vecs: &[CVector]) -> Self {
        Self {
            ambient_dim: d,
            basis: vecs.iter().map(|v| unvec_rows(v, d, d)).collect(),
        }
    }

    pub fn full(d: usize) -> Self {
        let mut basis = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                basis.push(unit(d, i, j));
            }
        }
        Self { ambient_dim: d, basis }
    }

    pub fn trivial(d: usize) -> Self {
        Self { ambient_dim: d, basis: vec![eye(d) / cr((d as f64).sqrt())] }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    /// Columns are the row-major vectorized basis elements (d² × dim).
    pub fn frame(&self) -> CMatrix {
        let d2 = self.ambient_dim * self.ambient_dim;
        let mut f = CMatrix::zeros(d2, self.basis.len());
        for (k, b) in self.basis.iter().enumerate() {
            f.set_column(k, &vec_rows(b));
        }
        f
    }

    /// Hilbert-Schmidt orthogonal projection onto the span.
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for b in &self.basis {
            out += b * crate::matrix::hs_inner(b, x);
        }
        out
    }

    /// Frobenius norm of the component of `x` orthogonal to the span.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        (x - self.project(x)).norm()
    }

    /// Closure diagnostics: (adjoint residual, product residual, identity residual).
    pub fn closure_residuals(&self) -> (f64, f64, f64) {
        let mut adj: f64 = 0.0;
        let mut prod: f64 = 0.0;
        for a in &self.basis {
            adj = adj.max(self.residual(&a.adjoint()));
            for b in &self.basis {
                prod = prod.max(self.residual(&(a * b)));
            }
        }
        let id = self.residual(&eye(self.ambient_dim));
        (adj, prod, id)
    }

    pub fn is_algebra(&self, tol: f64) -> bool {
        let (a, p, i) = self.closure_residuals();
        a <= tol && p <= tol && i <= tol
    }
}

fn check_dims(d: usize, mats: &[CMatrix]) -> Result<()> {
    for m in mats {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected {d}x{d}, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(())
}

fn check_same_ambient(a: &AlgebraBasis, b: &AlgebraBasis) -> Result<()> {
    if a.ambient_dim != b.ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions {} and {}",
            a.ambient_dim, b.ambient_dim
        )));
    }
    Ok(())
}

/// Smallest unital †-algebra containing the generators.
pub fn generate_algebra(generators: &[CMatrix], ambient_dim: usize) -> Result<AlgebraBasis> {
    check_dims(ambient_dim, generators)?;
    let d = ambient_dim;
    let mut orth = Orthonormalizer::new();
    orth.push(&vec_rows(&eye(d)), DROP_TOL);
    for g in generators {
        orth.push(&vec_rows(g), DROP_TOL);
        orth.push(&vec_rows(&g.adjoint()), DROP_TOL);
    }
    let mut mats: Vec<CMatrix> = orth.vecs.iter().map(|v| unvec_rows(v, d, d)).collect();
    let mut i = 0;
    while i < mats.len() {
        let adj = mats[i].adjoint();
        if orth.push(&vec_rows(&adj), DROP_TOL) {
            mats.push(unvec_rows(orth.vecs.last().unwrap(), d, d));
        }
        let mut j = 0;
        while j <= i {
            for p in [&mats[i] * &mats[j], &mats[j] * &mats[i]] {
                if orth.push(&vec_rows(&p), DROP_TOL) {
                    mats.push(unvec_rows(orth.vecs.last().unwrap(), d, d));
                }
            }
            j += 1;
        }
        i += 1;
    }
    Ok(AlgebraBasis { ambient_dim: d, basis: mats })
}

/// Null space of X ↦ ([A_k, X])_k, found from the Gram operator Σ L_k†L_k.
pub fn commutant(a: &AlgebraBasis) -> AlgebraBasis {
    let d = a.ambient_dim;
    let d2 = d * d;
    let id = eye(d);
    let mut s1 = CMatrix::zeros(d, d);
    let mut s2 = CMatrix::zeros(d, d);
    let mut cross = CMatrix::zeros(d2, d2);
    for m in &a.basis {
        let mh = m.adjoint();
        s1 += &mh * m;
        s2 += m * &mh;
        cross += mh.kronecker(&m.transpose()) + m.kronecker(&m.conjugate());
    }
    let g = s1.kronecker(&id) + id.kronecker(&s2.conjugate()) - cross;
    let (vals, vecs) = eigh(&g);
    let top = vals.last().copied().unwrap_or(0.0).max(1.0);
    let null: Vec<CVector> = (0..d2)
        .filter(|&k| vals[k] <= 1e-9 * top)
        .map(|k| vecs.column(k).into_owned())
        .collect();
    AlgebraBasis::from_vecs(d, &null)
}

/// Intersection of spans by principal angles.
pub fn intersect(a: &AlgebraBasis, b: &AlgebraBasis) -> Result<AlgebraBasis> {
    check_same_ambient(a, b)?;
    let d = a.ambient_dim;
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(AlgebraBasis { ambient_dim: d, basis: vec![] });
    }
    let qa = a.frame();
    let qb = b.frame();
    let m = qa.adjoint() * &qb;
    let (_, _, vr) = crate::matrix::svd(&m);
    let mut orth = Orthonormalizer::new();
    for k in 0..vr.ncols() {
        let w = &qb * vr.column(k);
        let resid = (&w - &qa * (qa.adjoint() * &w)).norm();
        if resid <= INTERSECT_TOL {
            orth.push(&w, 1e-6);
        }
    }
    Ok(AlgebraBasis::from_vecs(d, &orth.vecs))
}

pub fn center(a: &AlgebraBasis) -> AlgebraBasis {
    intersect(a, &commutant(a)).expect("same ambient dimension")
}

pub fn join(a: &AlgebraBasis, b: &AlgebraBasis) -> Result<AlgebraBasis> {
    check_same_ambient(a, b)?;
    let mut gens = a.basis.clone();
    gens.extend(b.basis.iter().cloned());
    generate_algebra(&gens, a.ambient_dim)
}

/// Frobenius residual of projecting `x` onto the span is at most `tol`.
pub fn contains(a: &AlgebraBasis, x: &CMatrix, tol: f64) -> Result<bool> {
    check_dims(a.ambient_dim, std::slice::from_ref(x))?;
    Ok(a.residual(x) <= tol)
}

/// Largest sine of the principal angles between the spans, or infinity when
/// the dimensions differ.
pub fn span_distance(a: &AlgebraBasis, b: &AlgebraBasis) -> f64 {
    if a.ambient_dim != b.ambient_dim || a.dim() != b.dim() {
        return f64::INFINITY;
    }
    a.basis.iter().map(|x| b.residual(x)).fold(0.0, f64::max)
}

pub fn same_span(a: &AlgebraBasis, b: &AlgebraBasis, tol: f64) -> bool {
    span_distance(a, b) <= tol
}

/// b' ∩ ambient.
pub fn relative_commutant(b: &AlgebraBasis, ambient: &AlgebraBasis) -> Result<AlgebraBasis> {
    check_same_ambient(b, ambient)?;
    for x in &b.basis {
        if ambient.residual(x) > 1e-8 {
            return Err(Error::Precondition("algebra is not contained in the ambient algebra".into()));
        }
    }
    intersect(&commutant(b), ambient)
}

fn random_hermitian_element<R: Rng>(rng: &mut R, basis: &[CMatrix]) -> CMatrix {
    let n = basis.first().map(|b| b.nrows()).unwrap_or(0);
    let mut h = CMatrix::zeros(n, n);
    for b in basis {
        let hb = hermitize(b);
        let ab = (b - b.adjoint()) * Complex64::new(0.0, -0.5);
        h += hb * cr(gaussian(rng)) + ab * cr(gaussian(rng));
    }
    hermitize(&h)
}

/// Groups sorted eigenvalues into clusters; errors when two clusters are
/// closer than ten times the tolerance.
fn cluster_eigenvalues(vals: &[f64], tol: f64) -> Result<Vec<std::ops::Range<usize>>> {
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let t = tol * scale.max(1.0);
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=vals.len() {
        if k == vals.len() || vals[k] - vals[k - 1] > t {
            if k < vals.len() && vals[k] - vals[k - 1] < 10.0 * t {
                return Err(Error::DegenerateSplit(format!(
                    "eigenvalue clusters separated by {:.3e}",
                    vals[k] - vals[k - 1]
                )));
            }
            out.push(start..k);
            start = k;
        }
    }
    Ok(out)
}

fn cluster_basis(vecs: &CMatrix, r: &std::ops::Range<usize>) -> CMatrix {
    vecs.columns(r.start, r.len()).into_owned()
}

fn sort_projectors(ps: &mut [CMatrix]) {
    let key = |p: &CMatrix| {
        let rank = p.trace().re.round() as i64;
        let weighted: f64 = (0..p.nrows()).map(|i| i as f64 * p[(i, i)].re).sum();
        (rank, weighted)
    };
    ps.sort_by(|a, b| {
        let (ra, wa) = key(a);
        let (rb, wb) = key(b);
        rb.cmp(&ra).then(wa.total_cmp(&wb))
    });
}

/// Minimal projectors of the center, by diagonalizing a seeded random
/// Hermitian central element.
pub fn minimal_central_projectors(a: &AlgebraBasis) -> Result<Vec<CMatrix>> {
    let z = center(a);
    central_projectors_of(&z, a.ambient_dim)
}

fn central_projectors_of(z: &AlgebraBasis, d: usize) -> Result<Vec<CMatrix>> {
    if z.dim() <= 1 {
        return Ok(vec![eye(d)]);
    }
    let mut rng = seeded(SECTOR_SEED);
    let h = random_hermitian_element(&mut rng, &z.basis);
    let (vals, vecs) = eigh(&h);
    let clusters = cluster_eigenvalues(&vals, CLUSTER_TOL)?;
    if clusters.len() != z.dim() {
        return Err(Error::DegenerateSplit(format!(
            "{} eigenvalue clusters for a center of dimension {}",
            clusters.len(),
            z.dim()
        )));
    }
    let mut ps: Vec<CMatrix> = clusters
        .iter()
        .map(|r| {
            let v = cluster_basis(&vecs, r);
            &v * v.adjoint()
        })
        .collect();
    sort_projectors(&mut ps);
    Ok(ps)
}

#[derive(Debug, Clone)]
pub struct Sector {
    pub projector: CMatrix,
    /// n_i: dimension of the factor on which the algebra acts fully.
    pub left_dim: usize,
    /// m_i: multiplicity.
    pub right_dim: usize,
    /// U_i: (n_i·m_i) × d, maps range(P_i) onto C^{n_i} ⊗ C^{m_i}.
    pub isometry: CMatrix,
}

#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub sectors: Vec<Sector>,
    pub seed: u64,
}

impl BlockStructure {
    /// Reassemble ⊕ U_i†(A_i ⊗ 1)U_i from per-sector left factors.
    pub fn assemble(&self, blocks: &[CMatrix]) -> CMatrix {
        let d = self.sectors[0].isometry.ncols();
        let mut out = CMatrix::zeros(d, d);
        for (s, a) in self.sectors.iter().zip(blocks) {
            let full = a.kronecker(&eye(s.right_dim));
            out += s.isometry.adjoint() * full * &s.isometry;
        }
        out
    }

    /// Per-sector left factors A_i of x (assuming x lies in the algebra).
    pub fn split(&self, x: &CMatrix) -> Vec<CMatrix> {
        self.sectors
            .iter()
            .map(|s| {
                let y = &s.isometry * x * s.isometry.adjoint();
                partial_trace_right(&y, s.left_dim, s.right_dim) / cr(s.right_dim as f64)
            })
            .collect()
    }
}

fn partial_trace_right(y: &CMatrix, n: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| (0..m).map(|k| y[(a * m + k, b * m + k)]).sum())
}

/// Wedderburn decomposition 𝒜 = ⊕ U_i†(M_{n_i} ⊗ 1_{m_i})U_i.
pub fn block_structure(a: &AlgebraBasis) -> Result<BlockStructure> {
    let d = a.ambient_dim;
    let projectors = minimal_central_projectors(a)?;
    let mut rng = seeded(SECTOR_SEED ^ 0x9E37_79B9);
    let mut sectors = Vec::with_capacity(projectors.len());
    for p in projectors {
        let (pv, pvecs) = eigh(&p);
        let cols: Vec<usize> = (0..d).filter(|&k| pv[k] > 0.5).collect();
        let r = cols.len();
        let s = CMatrix::from_fn(d, r, |i, k| pvecs[(i, cols[k])]);
        let compressed: Vec<CMatrix> = a.basis.iter().map(|b| s.adjoint() * b * &s).collect();
        let sub = AlgebraBasis::span_of(r, &compressed)?;
        let n2 = sub.dim();
        let n = (n2 as f64).sqrt().round() as usize;
        if n * n != n2 || n == 0 || r % n != 0 {
            return Err(Error::Factorization(format!(
                "sector of rank {r} carries an algebra of dimension {n2}"
            )));
        }
        let m = r / n;
        let h = random_hermitian_element(&mut rng, &sub.basis);
        let (vals, vecs) = eigh(&h);
        let clusters = cluster_eigenvalues(&vals, CLUSTER_TOL)?;
        if clusters.len() != n || clusters.iter().any(|c| c.len() != m) {
            return Err(Error::Factorization(format!(
                "expected {n} eigenvalue clusters of size {m}"
            )));
        }
        let e: Vec<CMatrix> = clusters.iter().map(|c| cluster_basis(&vecs, c)).collect();
        let f1 = &e[0];
        let mut x = CMatrix::zeros(r, r);
        for b in &sub.basis {
            x += b * complex_gaussian(&mut rng);
        }
        let mut local = CMatrix::zeros(n * m, r);
        for (ai, ea) in e.iter().enumerate() {
            // e_a x e_1 restricted to range(e_1) → range(e_a)
            let blk = ea.adjoint() * &x * f1;
            let c2 = (blk.adjoint() * &blk).trace().re / m as f64;
            if c2 <= 1e-20 {
                return Err(Error::Factorization("vanishing matrix unit".into()));
            }
            let v = ea * blk / cr(c2.sqrt());
            for b in 0..m {
                let col = v.column(b);
                for k in 0..r {
                    local[(ai * m + b, k)] = col[k].conj();
                }
            }
        }
        let iso = local * s.adjoint();
        sectors.push(Sector { projector: p, left_dim: n, right_dim: m, isometry: iso });
    }
    let bs = BlockStructure { sectors, seed: SECTOR_SEED };
    for b in &a.basis {
        let parts = bs.split(b);
        let back = bs.assemble(&parts);
        let err = (&back - b).norm();
        if err > 1e-8 {
            return Err(Error::Factorization(format!("block round-trip residual {err:.3e}")));
        }
    }
    Ok(bs)
}

/// Kraus operators U_i†(1_{n_i} ⊗ |a⟩⟨b|)U_i/√m_i of the conditional
/// expectation onto the algebra.
pub fn conditional_expectation_kraus(bs: &BlockStructure) -> Vec<CMatrix> {
    let mut kraus = Vec::new();
    for s in &bs.sectors {
        let (n, m) = (s.left_dim, s.right_dim);
        for a in 0..m {
            for b in 0..m {
                let mid = eye(n).kronecker(&unit(m, a, b)) / cr((m as f64).sqrt());
                kraus.push(s.isometry.adjoint() * mid * &s.isometry);
            }
        }
    }
    kraus
}

pub fn conditional_expectation(a: &AlgebraBasis) -> Result<Channel> {
    let bs = block_structure(a)?;
    Channel::from_kraus(conditional_expectation_kraus(&bs))
}

/// Random unital algebra: U†(⊕ M_{n_i} ⊗ 1_{m_i})U for a random unitary U.
pub fn random_algebra<R: Rng>(rng: &mut R, blocks: &[(usize, usize)]) -> AlgebraBasis {
    let d: usize = blocks.iter().map(|(n, m)| n * m).sum();
    let u = crate::random::random_unitary(rng, d);
    let mut gens = Vec::new();
    let mut off = 0;
    for &(n, m) in blocks {
        for i in 0..n {
            for j in 0..n {
                let mut g = CMatrix::zeros(d, d);
                let blk = unit(n, i, j).kronecker(&eye(m));
                g.view_mut((off, off), (n * m, n * m)).copy_from(&blk);
                gens.push(u.adjoint() * g * &u);
            }
        }
        off += n * m;
    }
    generate_algebra(&gens, d).expect("consistent dimensions")
}
