//! Correctability conditions and optimal recovery fidelities.
//!
//! Least-squares checks use a pseudoinverse with relative singular-value
//! cutoff [`PINV_CUTOFF`]. Fidelity optimizations are SDPs over Choi
//! matrices (see [`crate::sdp`]).

use num_complex::Complex64;

use crate::algebra::{commutant, conditional_expectation, AlgebraBasis};
use crate::channel::{
    compose, local_complementary_definitional, Channel,
};
use crate::error::{Error, Result};
use crate::fermion::{parity_operator, physical_algebra, physical_commutant, FermionSystem};
use crate::matrix::{cr, eigh, eye, hermitize, max_abs, trace, trace_norm, unit, CMatrix, CVector};
use crate::sdp::{
    build_channel_fidelity_sdp, hermitian_components, kraus_vector, linear_map_rows, solve,
    ChoiConstraint, ChoiParam, Functional, SdpProblem, SdpStatus, Sense, SolveOptions,
};

/// Default residual threshold for "correctable".
pub const DEFAULT_TOL: f64 = 1e-8;
/// Relative singular-value cutoff of least-squares solves.
pub const PINV_CUTOFF: f64 = 1e-10;
const STRUCT_TOL: f64 = 1e-9;

/// Isometric encoding W: logical → physical.
#[derive(Debug, Clone)]
pub struct Code {
    w: CMatrix,
    projector: CMatrix,
}

impl Code {
    pub fn new(w: CMatrix) -> Result<Self> {
        let k = w.ncols();
        if k == 0 || k > w.nrows() {
            return Err(Error::DimensionMismatch(format!("isometry shape {}x{}", w.nrows(), k)));
        }
        let dev = max_abs(&(w.adjoint() * &w - eye(k)));
        if dev > 1e-10 {
            return Err(Error::InvalidArgument(format!("W†W deviates from 1 by {dev:.3e}")));
        }
        let projector = &w * w.adjoint();
        Ok(Self { w, projector })
    }

    /// Code spanned by the given orthonormal physical vectors.
    pub fn from_columns(cols: &[CVector]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::InvalidArgument("empty code".into()));
        }
        Self::new(CMatrix::from_columns(cols))
    }

    /// The trivial code W = 1.
    pub fn identity(d: usize) -> Self {
        Self::new(eye(d)).expect("identity is an isometry")
    }

    pub fn logical_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn physical_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn isometry(&self) -> &CMatrix {
        &self.w
    }

    pub fn projector(&self) -> &CMatrix {
        &self.projector
    }

    /// Maximally mixed state on the code space, WW†/k.
    pub fn maximally_mixed(&self) -> CMatrix {
        &self.projector / cr(self.logical_dim() as f64)
    }

    /// The encoding channel ρ ↦ WρW†.
    pub fn encoding(&self) -> Channel {
        Channel::from_kraus(vec![self.w.clone()]).expect("isometry")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Correctable,
    NotCorrectable,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Correctable => "correctable",
            Verdict::NotCorrectable => "not_correctable",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NamedMatrix {
    pub name: String,
    pub matrix: CMatrix,
}

#[derive(Debug, Clone)]
pub struct CorrectabilityReport {
    pub verdict: Verdict,
    /// Frobenius norm of the least-squares misfit over all equations.
    pub residual: f64,
    pub tolerance: f64,
    pub coefficients: Vec<NamedMatrix>,
    pub flags: Vec<(String, bool)>,
}

impl CorrectabilityReport {
    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.iter().find(|(n, _)| n == name).map(|f| f.1)
    }

    pub fn coefficient(&self, name: &str) -> Option<&CMatrix> {
        self.coefficients.iter().find(|c| c.name == name).map(|c| &c.matrix)
    }
}

/// Least-squares fit of `target` by Σ c_i cols_i; returns (c, residual norm).
fn lstsq(cols: &[Vec<Complex64>], target: &[Complex64]) -> (Vec<Complex64>, f64) {
    let n = cols.len();
    let g = CMatrix::from_fn(n, n, |i, j| cols[i].iter().zip(&cols[j]).map(|(a, b)| a.conj() * b).sum());
    let rhs: Vec<Complex64> =
        cols.iter().map(|c| c.iter().zip(target).map(|(a, b)| a.conj() * b).sum()).collect();
    let (vals, vecs) = eigh(&hermitize(&g));
    let top = vals.last().copied().unwrap_or(0.0).max(0.0);
    let mut coef = vec![Complex64::new(0.0, 0.0); n];
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= PINV_CUTOFF * top || lam <= 0.0 {
            continue;
        }
        let proj: Complex64 = (0..n).map(|i| vecs[(i, k)].conj() * rhs[i]).sum::<Complex64>() / lam;
        for (i, c) in coef.iter_mut().enumerate() {
            *c += vecs[(i, k)] * proj;
        }
    }
    let mut res = target.to_vec();
    for (c, col) in coef.iter().zip(cols) {
        for (r, v) in res.iter_mut().zip(col) {
            *r -= c * v;
        }
    }
    (coef, res.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

fn flat(ms: &[CMatrix]) -> Vec<Complex64> {
    ms.iter().flat_map(|m| m.iter().copied()).collect()
}

fn check_kraus(code: &Code, kraus: &[CMatrix]) -> Result<()> {
    if kraus.is_empty() {
        return Err(Error::InvalidArgument("empty Kraus list".into()));
    }
    for e in kraus {
        if e.ncols() != code.physical_dim() {
            return Err(Error::DimensionMismatch("Kraus operator vs code".into()));
        }
    }
    Ok(())
}

/// Hermitian PSD with unit trace, within `tol`.
fn is_density(m: &CMatrix, tol: f64) -> bool {
    let lo = eigh(&hermitize(m)).0.first().copied().unwrap_or(0.0);
    max_abs(&(m - m.adjoint())) <= tol && lo >= -tol && (trace(m).re - 1.0).abs() <= tol
}

/// Knill-Laflamme: W†E_j†E_iW = ⟨i|σ|j⟩ W†W.
pub fn kl_check(code: &Code, kraus: &[CMatrix], tol: f64) -> Result<CorrectabilityReport> {
    check_kraus(code, kraus)?;
    let w = code.isometry();
    let k = code.logical_dim();
    let ew: Vec<CMatrix> = kraus.iter().map(|e| e * w).collect();
    let r = kraus.len();
    let id = vec![flat(&[eye(k)])];
    let mut sigma = CMatrix::zeros(r, r);
    let mut res2 = 0.0;
    for i in 0..r {
        for j in 0..r {
            let m = ew[j].adjoint() * &ew[i];
            let (c, res) = lstsq(&id, &flat(&[m]));
            sigma[(i, j)] = c[0];
            res2 += res * res;
        }
    }
    let residual = res2.sqrt();
    let density = is_density(&sigma, tol.max(1e-12));
    let verdict = if residual <= tol && density { Verdict::Correctable } else { Verdict::NotCorrectable };
    Ok(CorrectabilityReport {
        verdict,
        residual,
        tolerance: tol,
        coefficients: vec![NamedMatrix { name: "sigma".into(), matrix: sigma }],
        flags: vec![("sigma_is_state".into(), density)],
    })
}

fn check_projectors(ps: &[CMatrix], d: usize) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::InvalidArgument("no sector projectors".into()));
    }
    let mut sum = CMatrix::zeros(d, d);
    for (i, p) in ps.iter().enumerate() {
        if p.shape() != (d, d) {
            return Err(Error::DimensionMismatch("sector projector size".into()));
        }
        if max_abs(&(p * p - p)) > STRUCT_TOL || max_abs(&(p - p.adjoint())) > STRUCT_TOL {
            return Err(Error::InvalidArgument(format!("P_{i} is not an orthogonal projector")));
        }
        for q in &ps[i + 1..] {
            if max_abs(&(p * q)) > STRUCT_TOL {
                return Err(Error::InvalidArgument("sector projectors are not mutually orthogonal".into()));
            }
        }
        sum += p;
    }
    if max_abs(&(sum - eye(d))) > STRUCT_TOL {
        return Err(Error::InvalidArgument("sector projectors do not sum to 1".into()));
    }
    Ok(())
}

/// Superselection conditions: W†E_n†P_jE_mW = Σ_i c_{ijnm} W†P_iW, with the
/// state conditions on σ_{j|i} checked when the linear ones hold.
pub fn superselection_kl_check(
    code: &Code,
    kraus: &[CMatrix],
    projectors: &[CMatrix],
    tol: f64,
) -> Result<CorrectabilityReport> {
    check_kraus(code, kraus)?;
    let d = code.physical_dim();
    check_projectors(projectors, d)?;
    let w = code.isometry();
    let r = kraus.len();
    let s = projectors.len();
    let q: Vec<CMatrix> = projectors.iter().map(|p| w.adjoint() * p * w).collect();
    let qcols: Vec<Vec<Complex64>> = q.iter().map(|m| flat(std::slice::from_ref(m))).collect();
    let ew: Vec<CMatrix> = kraus.iter().map(|e| e * w).collect();
    // c[i][j] is an r×r table over (n, m)
    let mut c = vec![vec![CMatrix::zeros(r, r); s]; s];
    let mut lhs = vec![vec![vec![CMatrix::zeros(0, 0); r]; r]; s];
    let mut res2 = 0.0;
    for j in 0..s {
        for n in 0..r {
            for m in 0..r {
                let mm = ew[n].adjoint() * &projectors[j] * &ew[m];
                let (coef, res) = lstsq(&qcols, &flat(std::slice::from_ref(&mm)));
                res2 += res * res;
                for i in 0..s {
                    c[i][j][(n, m)] = coef[i];
                }
                lhs[j][n][m] = mm;
            }
        }
    }
    let residual = res2.sqrt();
    let proj = code.projector();
    let commutes = projectors.iter().all(|p| max_abs(&(p * proj - proj * p)) <= STRUCT_TOL);
    let fixed_charge = projectors.iter().any(|p| max_abs(&(p * w - w)) <= STRUCT_TOL);
    let present: Vec<bool> = q.iter().map(|m| trace(m).re > STRUCT_TOL).collect();

    let mut coefficients = Vec::new();
    for i in 0..s {
        for j in 0..s {
            coefficients.push(NamedMatrix { name: format!("c[i={i},j={j}]"), matrix: c[i][j].clone() });
        }
    }
    let mut flags = vec![
        ("charge_commutes_with_code".to_string(), commutes),
        ("fixed_charge".to_string(), fixed_charge),
    ];
    let verdict = if residual > tol {
        Verdict::NotCorrectable
    } else if commutes {
        // coefficients are unique on present sectors: σ_{j|i} = c_{ij··}
        let mut ok = true;
        for i in (0..s).filter(|&i| present[i]) {
            let mut total = 0.0;
            for j in 0..s {
                let sig = &c[i][j];
                let lo = eigh(&hermitize(sig)).0.first().copied().unwrap_or(0.0);
                ok &= lo >= -tol.max(1e-12) && max_abs(&(sig - sig.adjoint())) <= tol.max(1e-12);
                total += trace(sig).re;
            }
            ok &= (total - 1.0).abs() <= tol.max(1e-12);
        }
        flags.push(("sigma_states_feasible".into(), ok));
        if ok {
            Verdict::Correctable
        } else {
            Verdict::NotCorrectable
        }
    } else {
        let (ok, status) = sigma_feasibility(&q, &lhs, r, tol)?;
        flags.push(("sigma_states_feasible".into(), ok));
        match (ok, status) {
            (true, _) => Verdict::Correctable,
            (false, SdpStatus::Infeasible) => Verdict::NotCorrectable,
            _ => Verdict::Indeterminate,
        }
    };
    if fixed_charge {
        // W†E_n†P_jE_mW = c_{jnm} W†W
        let mut simple = Vec::new();
        for j in 0..s {
            let t = CMatrix::from_fn(r, r, |n, m| trace(&lhs[j][n][m]) / cr(code.logical_dim() as f64));
            simple.push(NamedMatrix { name: format!("c[j={j}]"), matrix: t });
        }
        coefficients.extend(simple);
    }
    Ok(CorrectabilityReport { verdict, residual, tolerance: tol, coefficients, flags })
}

/// Feasibility of Σ_i σ_{j|i} ⊗ W†P_iW = [W†E_n†P_jE_mW]_{nm} with σ_{j|i} ⪰ 0
/// and Σ_j Tr σ_{j|i} = 1.
fn sigma_feasibility(
    q: &[CMatrix],
    lhs: &[Vec<Vec<CMatrix>>],
    r: usize,
    tol: f64,
) -> Result<(bool, SdpStatus)> {
    let s = q.len();
    let k = q[0].nrows();
    let mut prob = SdpProblem::new(vec![r; s * s], Sense::Maximize);
    let block = |i: usize, j: usize| i * s + j;
    for j in 0..s {
        let y = CMatrix::from_fn(r * k, r * k, |a, b| lhs[j][a / k][b / k][(a % k, b % k)]);
        let mut rows: Vec<Functional> = Vec::new();
        for i in 0..s {
            let qi = q[i].clone();
            let part = linear_map_rows(block(i, j), r, &move |x: &CMatrix| x.kronecker(&qi));
            if rows.is_empty() {
                rows = part;
            } else {
                for (acc, f) in rows.iter_mut().zip(part) {
                    acc.terms.extend(f.terms);
                }
            }
        }
        for (f, v) in rows.into_iter().zip(hermitian_components(&hermitize(&y))) {
            prob.add_constraint(f, v);
        }
    }
    for i in 0..s {
        let mut f = Functional::new();
        for j in 0..s {
            for a in 0..r {
                f.add(block(i, j), a, a, cr(1.0));
            }
        }
        prob.add_constraint(f, 1.0);
    }
    let sol = solve(&prob, &SolveOptions { tol: tol.max(1e-9), max_iter: 200 });
    Ok((sol.status == SdpStatus::Optimal, sol.status))
}

/// Tensor-product locality: W†(E_i†E_j⊗B)W = λ_ij W†(1⊗B)W for all B on H_B.
pub fn tensor_local_check(
    code: &Code,
    dims: (usize, usize),
    kraus_a: &[CMatrix],
    tol: f64,
) -> Result<CorrectabilityReport> {
    let (da, db) = dims;
    if da * db != code.physical_dim() {
        return Err(Error::DimensionMismatch(format!("bipartition {da}x{db} vs code dimension {}", code.physical_dim())));
    }
    if kraus_a.is_empty() || kraus_a.iter().any(|e| e.shape() != (da, da)) {
        return Err(Error::DimensionMismatch("Kraus operators must act on H_A".into()));
    }
    let w = code.isometry();
    let ida = eye(da);
    let units: Vec<CMatrix> = (0..db).flat_map(|m| (0..db).map(move |n| unit(db, m, n))).collect();
    let rhs: Vec<CMatrix> = units.iter().map(|b| w.adjoint() * ida.kronecker(b) * w).collect();
    let col = vec![flat(&rhs)];
    let r = kraus_a.len();
    let mut lambda = CMatrix::zeros(r, r);
    let mut res2 = 0.0;
    for i in 0..r {
        for j in 0..r {
            let ee = kraus_a[i].adjoint() * &kraus_a[j];
            let lhs: Vec<CMatrix> = units.iter().map(|b| w.adjoint() * ee.kronecker(b) * w).collect();
            let (c, res) = lstsq(&col, &flat(&lhs));
            lambda[(i, j)] = c[0];
            res2 += res * res;
        }
    }
    let residual = res2.sqrt();
    let verdict = if residual <= tol { Verdict::Correctable } else { Verdict::NotCorrectable };
    Ok(CorrectabilityReport {
        verdict,
        residual,
        tolerance: tol,
        coefficients: vec![NamedMatrix { name: "lambda".into(), matrix: lambda }],
        flags: vec![],
    })
}

/// Fermionic strong locality: W†E_i†E_jB_kW = λ_{ijk} W†B_kW for B in the
/// physical commutant of 𝒜_ω and B_k = P_kBP_k. Kraus operators must lie in
/// 𝒜_ω.
pub fn fermion_local_check(
    sys: &FermionSystem,
    code: &Code,
    kraus: &[CMatrix],
    region: &[usize],
    tol: f64,
) -> Result<CorrectabilityReport> {
    check_kraus(code, kraus)?;
    if code.physical_dim() != sys.dim() {
        return Err(Error::DimensionMismatch("code vs fermion system".into()));
    }
    let alg = physical_algebra(sys, region)?;
    for (i, e) in kraus.iter().enumerate() {
        let rel = alg.residual(e) / e.norm().max(1.0);
        if rel > STRUCT_TOL {
            return Err(Error::Precondition(format!(
                "Kraus operator {i} is not in the local physical algebra (residual {rel:.3e})"
            )));
        }
    }
    let comm = physical_commutant(sys, region)?;
    let (sectors, cw) = if region.len() % 2 == 0 && !region.is_empty() {
        let p = parity_operator(sys, region)?;
        (vec![("+", p.p_plus), ("-", p.p_minus)], Some(p.c))
    } else {
        (vec![("+", eye(sys.dim()))], None)
    };
    let w = code.isometry();
    let r = kraus.len();
    let mut res2 = 0.0;
    let mut coefficients = Vec::new();
    let mut states_ok = true;
    for (label, pk) in &sectors {
        let bk: Vec<CMatrix> = comm.basis().iter().map(|b| pk * b * pk).collect();
        let rhs: Vec<CMatrix> = bk.iter().map(|b| w.adjoint() * b * w).collect();
        let col = flat(&rhs);
        let weight: f64 = col.iter().map(|z| z.norm_sqr()).sum();
        let mut lambda = CMatrix::zeros(r, r);
        if weight > 1e-20 {
            for i in 0..r {
                for j in 0..r {
                    let ee = kraus[i].adjoint() * &kraus[j];
                    let lhs: Vec<CMatrix> = bk.iter().map(|b| w.adjoint() * &ee * b * w).collect();
                    let (c, res) = lstsq(std::slice::from_ref(&col), &flat(&lhs));
                    lambda[(i, j)] = c[0];
                    res2 += res * res;
                }
            }
            // λ_{ijk} = ⟨j|ρ_k|i⟩ for a state ρ_k
            states_ok &= is_density(&lambda.transpose(), tol.max(1e-12));
        }
        coefficients.push(NamedMatrix { name: format!("lambda[{label}]"), matrix: lambda });
    }
    let residual = res2.sqrt();
    let proj = code.projector();
    let mut flags = vec![("rho_states_valid".to_string(), states_ok)];
    if let Some(c) = &cw {
        let commutes = max_abs(&(c * proj - proj * c)) <= STRUCT_TOL;
        flags.push(("code_commutes_with_parity".into(), commutes));
        let fixed = max_abs(&(c * w - w)) <= STRUCT_TOL || max_abs(&(c * w + w)) <= STRUCT_TOL;
        flags.push(("fixed_parity_code".into(), fixed));
    }
    let verdict = if residual <= tol && states_ok { Verdict::Correctable } else { Verdict::NotCorrectable };
    Ok(CorrectabilityReport { verdict, residual, tolerance: tol, coefficients, flags })
}

// ---------------------------------------------------------------------------
// Optimal recovery fidelities

/// Class of channels 𝒮 on the environment side of the fixed-algebra duality.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentClass {
    /// 𝒮 = id ⊗ 𝒮_E on output ⊗ environment.
    Dilation,
    /// Kraus operators in ℬ' ⊗ L(E_M, E_N), i.e. 𝒮† fixes ℬ ⊗ 1.
    Commutant,
}

/// Class used by default for the fixed-algebra environment side.
pub const FIXED_ALGEBRA_CLASS: EnvironmentClass = EnvironmentClass::Dilation;

#[derive(Debug, Clone)]
pub enum RecoveryConstraint {
    Unconstrained,
    /// Physical recovery 𝒫ℛ𝒬 = 𝒫ℛ; 𝒬 acts on ℛ's input, 𝒫 on its output.
    Physical { p: Channel, q: Channel },
    /// ℛ† fixes the algebra.
    Fixes { algebra: AlgebraBasis },
}

impl RecoveryConstraint {
    pub fn describe(&self) -> String {
        match self {
            RecoveryConstraint::Unconstrained => "unconstrained".into(),
            RecoveryConstraint::Physical { .. } => "physical(p,q)".into(),
            RecoveryConstraint::Fixes { algebra } => format!("fixes(dim {})", algebra.dim()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FidelityResult {
    pub value: f64,
    /// Choi matrix of the optimal ℛ or 𝒮 (input ⊗ output).
    pub optimizer: CMatrix,
    pub in_dim: usize,
    pub out_dim: usize,
    /// |primal − dual| of the SDP.
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub constraint: String,
    /// (variable dimension, constraint rows) of the SDP.
    pub sdp_size: (usize, usize),
}

impl FidelityResult {
    pub fn is_certified(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn channel(&self) -> Result<Channel> {
        Channel::from_choi(&self.optimizer, self.in_dim, self.out_dim)
    }
}

/// (ψψ†, r) with ψ a purification of ρ on H ⊗ C^r, r = rank ρ.
pub fn purification_state(rho: &CMatrix) -> Result<(CMatrix, usize)> {
    let d = rho.nrows();
    let (vals, vecs) = eigh(&hermitize(rho));
    let top = vals.last().copied().unwrap_or(0.0);
    if vals.first().copied().unwrap_or(0.0) < -1e-9 * top.max(1.0) {
        return Err(Error::NotPsd(vals[0]));
    }
    let keep: Vec<usize> = (0..d).rev().filter(|&j| vals[j] > 1e-12 * top.max(1e-300)).collect();
    let r = keep.len();
    if r == 0 {
        return Err(Error::InvalidArgument("zero state".into()));
    }
    let psi = CVector::from_fn(d * r, |idx, _| {
        let (i, s) = (idx / r, idx % r);
        vecs[(i, keep[s])] * vals[keep[s]].sqrt()
    });
    Ok((&psi * psi.adjoint(), r))
}

fn check_state(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.shape() != (d, d) {
        return Err(Error::DimensionMismatch("state does not match channel input".into()));
    }
    if (trace(rho).re - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("state must have unit trace".into()));
    }
    Ok(())
}

/// max over channels 𝒳: from `src` output to `dst` output of
/// f((𝒳∘src ⊗ id)(ψ), (dst ⊗ id)(ψ)).
fn channel_fidelity_max(
    src: &Channel,
    dst: &Channel,
    rho: &CMatrix,
    param: ChoiParam,
    extra: &[ChoiConstraint],
    opts: &SolveOptions,
    label: String,
) -> Result<FidelityResult> {
    let (psi, r) = purification_state(rho)?;
    let tau = hermitize(&src.apply_with_reference(&psi, r));
    let target = hermitize(&dst.apply_with_reference(&psi, r));
    let (din, dout) = (src.out_dim(), dst.out_dim());
    let built = build_channel_fidelity_sdp(&tau, &target, din, dout, r, param, extra)?;
    let sol = solve(&built.problem, opts);
    let nvar: usize = built.problem.block_dims.iter().sum();
    Ok(FidelityResult {
        value: sol.value,
        optimizer: built.choi(&sol),
        in_dim: din,
        out_dim: dout,
        duality_gap: (sol.value - sol.dual_value).abs(),
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        status: sol.status,
        constraint: label,
        sdp_size: (nvar, built.problem.constraints.len()),
    })
}

/// Choi(ℛ∘𝒬) from Choi(ℛ): Σ_k (K_kᵀ⊗1) J (K_kᵀ⊗1)†.
pub fn choi_precompose(j: &CMatrix, q: &Channel, dout: usize) -> CMatrix {
    let id = eye(dout);
    let mut out = CMatrix::zeros(j.nrows(), j.ncols());
    for k in q.kraus() {
        let a = k.transpose().kronecker(&id);
        out += &a * j * a.adjoint();
    }
    out
}

/// Choi(𝒫∘ℛ) from Choi(ℛ): Σ_l (1⊗P_l) J (1⊗P_l)†.
pub fn choi_postcompose(j: &CMatrix, p: &Channel, din: usize) -> CMatrix {
    let id = eye(din);
    let mut out = CMatrix::zeros(din * p.out_dim(), din * p.out_dim());
    for k in p.kraus() {
        let a = id.kronecker(k);
        out += &a * j * a.adjoint();
    }
    out
}

/// Orthonormal vectorized Kraus-span frame for channels whose Kraus
/// operators lie in span(ops) (ops HS-orthonormal).
fn kraus_span_frame(ops: &[CMatrix]) -> CMatrix {
    let cols: Vec<CVector> = ops.iter().map(kraus_vector).collect();
    CMatrix::from_columns(&cols)
}

/// max_ℛ F_ρ(ℛ𝒩, ℳ) under the given constraint. For `Physical` the target
/// is 𝒫ℳ.
pub fn optimal_recovery_fidelity(
    n: &Channel,
    m: &Channel,
    rho: &CMatrix,
    constraint: &RecoveryConstraint,
    opts: &SolveOptions,
) -> Result<FidelityResult> {
    if n.in_dim() != m.in_dim() {
        return Err(Error::DimensionMismatch("channels must share their input".into()));
    }
    check_state(rho, n.in_dim())?;
    let (din, dout) = (n.out_dim(), m.out_dim());
    let label = format!("lhs:{}", constraint.describe());
    match constraint {
        RecoveryConstraint::Unconstrained => channel_fidelity_max(n, m, rho, ChoiParam::Full, &[], opts, label),
        RecoveryConstraint::Physical { p, q } => {
            if q.in_dim() != din || q.out_dim() != din || p.in_dim() != dout || p.out_dim() != dout {
                return Err(Error::DimensionMismatch("physical projectors vs recovery shape".into()));
            }
            let (p2, q2) = (p.clone(), q.clone());
            let con = ChoiConstraint {
                map: Box::new(move |j: &CMatrix| {
                    let pr = choi_postcompose(j, &p2, din);
                    choi_precompose(&pr, &q2, dout) - pr
                }),
                rhs: CMatrix::zeros(din * dout, din * dout),
            };
            let pm = compose(p, m)?;
            channel_fidelity_max(n, &pm, rho, ChoiParam::Full, &[con], opts, label)
        }
        RecoveryConstraint::Fixes { algebra } => {
            if din != dout || algebra.ambient_dim() != din {
                return Err(Error::DimensionMismatch("fixed algebra must act on the recovery space".into()));
            }
            let frame = kraus_span_frame(commutant(algebra).basis());
            channel_fidelity_max(n, m, rho, ChoiParam::Subspace(frame), &[], opts, label)
        }
    }
}

/// Environment side max_𝒮 F_ρ(𝒩̂, 𝒮ℳ̂) with complements chosen per
/// constraint (ordinary; of 𝒬𝒩 and 𝒫ℳ; local w.r.t. the fixed algebra).
pub fn environment_side_fidelity(
    n: &Channel,
    m: &Channel,
    rho: &CMatrix,
    constraint: &RecoveryConstraint,
    opts: &SolveOptions,
) -> Result<FidelityResult> {
    environment_side_fidelity_with_class(n, m, rho, constraint, FIXED_ALGEBRA_CLASS, opts)
}

pub fn environment_side_fidelity_with_class(
    n: &Channel,
    m: &Channel,
    rho: &CMatrix,
    constraint: &RecoveryConstraint,
    class: EnvironmentClass,
    opts: &SolveOptions,
) -> Result<FidelityResult> {
    if n.in_dim() != m.in_dim() {
        return Err(Error::DimensionMismatch("channels must share their input".into()));
    }
    check_state(rho, n.in_dim())?;
    let label = format!("rhs:{}", constraint.describe());
    match constraint {
        RecoveryConstraint::Unconstrained => {
            let nc = n.reduced().complementary();
            let mc = m.reduced().complementary();
            channel_fidelity_max(&mc, &nc, rho, ChoiParam::Full, &[], opts, label)
        }
        RecoveryConstraint::Physical { p, q } => {
            let nc = compose(q, n)?.reduced().complementary();
            let mc = compose(p, m)?.reduced().complementary();
            channel_fidelity_max(&mc, &nc, rho, ChoiParam::Full, &[], opts, label)
        }
        RecoveryConstraint::Fixes { algebra } => {
            let (nr, mr) = (n.reduced(), m.reduced());
            let nl = local_complementary_definitional(&nr, algebra)?;
            let ml = local_complementary_definitional(&mr, algebra)?;
            let (en, em) = (nr.kraus_rank(), mr.kraus_rank());
            let h = algebra.ambient_dim();
            let env_units: Vec<CMatrix> =
                (0..en).flat_map(|e| (0..em).map(move |f| unit_rect(en, em, e, f))).collect();
            let ops: Vec<CMatrix> = match class {
                EnvironmentClass::Dilation => env_units.iter().map(|u| eye(h).kronecker(u) / cr((h as f64).sqrt())).collect(),
                EnvironmentClass::Commutant => {
                    let bc = commutant(algebra);
                    bc.basis().iter().flat_map(|b| env_units.iter().map(move |u| b.kronecker(u))).collect()
                }
            };
            let frame = kraus_span_frame(&ops);
            channel_fidelity_max(&ml, &nl, rho, ChoiParam::Subspace(frame), &[], opts, label)
        }
    }
}

fn unit_rect(r: usize, c: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(r, c);
    m[(i, j)] = cr(1.0);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualityVerdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct DualityReport {
    pub lhs: FidelityResult,
    pub rhs: FidelityResult,
    pub difference: f64,
    pub tolerance: f64,
    pub verdict: DualityVerdict,
}

/// Runs both sides of the duality for the given constraint.
pub fn verify_duality(
    n: &Channel,
    m: &Channel,
    rho: &CMatrix,
    constraint: &RecoveryConstraint,
    opts: &SolveOptions,
    tol: f64,
) -> Result<DualityReport> {
    let lhs = optimal_recovery_fidelity(n, m, rho, constraint, opts)?;
    let rhs = environment_side_fidelity(n, m, rho, constraint, opts)?;
    let difference = (lhs.value - rhs.value).abs();
    let verdict = if !lhs.is_certified() || !rhs.is_certified() {
        DualityVerdict::Indeterminate
    } else if difference <= tol {
        DualityVerdict::Pass
    } else {
        DualityVerdict::Fail
    };
    Ok(DualityReport { lhs, rhs, difference, tolerance: tol, verdict })
}

// ---------------------------------------------------------------------------
// Worst-case fidelity

#[derive(Debug, Clone)]
pub struct WorstCaseResult {
    /// Certified lower bound on max_ℛ min_ρ F_ρ(ℛ𝒩𝒲, ℳ𝒲).
    pub value: f64,
    /// Fidelity of the returned recovery at the worst state found (≥ value).
    pub upper_estimate: f64,
    /// Choi matrix of the returned recovery.
    pub recovery: CMatrix,
    /// Logical state attaining `upper_estimate`.
    pub worst_state: CMatrix,
    pub rounds: usize,
    pub converged: bool,
    /// Always true: global optimality is not claimed.
    pub heuristic: bool,
}

/// min over logical states σ of ‖Γ(σ)‖₁, Γ[k,l] = Tr(σ E_k† F_l); this is
/// convex in σ. Frank-Wolfe with exact line search; returns
/// (certified lower bound, best value, minimizer).
pub fn min_entanglement_fidelity(
    e: &[CMatrix],
    f: &[CMatrix],
    start: &CMatrix,
    max_iter: usize,
    tol: f64,
) -> (f64, f64, CMatrix) {
    let d = start.nrows();
    // Γ is linear in σ: vec(Γ) = T vec(σ)
    let mut t = CMatrix::zeros(e.len() * f.len(), d * d);
    for (k, ek) in e.iter().enumerate() {
        for (l, fl) in f.iter().enumerate() {
            let ef = ek.adjoint() * fl;
            for i in 0..d {
                for j in 0..d {
                    t[(k * f.len() + l, i * d + j)] = ef[(j, i)];
                }
            }
        }
    }
    let overlap = |s: &CMatrix| {
        let g = &t * crate::matrix::vec_rows(s);
        CMatrix::from_fn(e.len(), f.len(), |k, l| g[k * f.len() + l])
    };
    // Gram-side singular values: cheap, accurate to ~1e-8, used for line search only
    let fast_norm = |g: &CMatrix| {
        let gram = if g.nrows() >= g.ncols() { g.adjoint() * g } else { g * g.adjoint() };
        eigh(&gram).0.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>()
    };
    let eval = |s: &CMatrix| trace_norm(&overlap(s));
    let mut sigma = hermitize(start);
    let mut val = eval(&sigma);
    let mut lower = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let phi = polar_factor(&overlap(&sigma));
        let mut h = CMatrix::zeros(sigma.nrows(), sigma.ncols());
        for k in 0..e.len() {
            for l in 0..f.len() {
                let w = phi[(k, l)].conj();
                if w.norm() > 0.0 {
                    h += e[k].adjoint() * &f[l] * w;
                }
            }
        }
        let h = hermitize(&h);
        let (vals, vecs) = eigh(&h);
        lower = lower.max(vals[0]);
        if val - lower <= tol {
            break;
        }
        let v = vecs.column(0).into_owned();
        let vertex = &v * v.adjoint();
        let line = |t: f64| fast_norm(&overlap(&(&sigma * cr(1.0 - t) + &vertex * cr(t))));
        // golden-section search on the convex restriction
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - gr * (b - a);
        let mut x2 = a + gr * (b - a);
        let (mut f1, mut f2) = (line(x1), line(x2));
        for _ in 0..60 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = line(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = line(x2);
            }
        }
        let step = 0.5 * (a + b);
        let cand_state = hermitize(&(&sigma * cr(1.0 - step) + &vertex * cr(step)));
        let cand = eval(&cand_state);
        if cand < val {
            sigma = cand_state;
            val = cand;
        } else if eval(&vertex) < val {
            sigma = vertex;
            val = eval(&sigma);
        } else {
            break;
        }
    }
    (lower, val, sigma)
}

/// Partial isometry Φ of the polar decomposition Γ = Φ|Γ|, so that
/// Re Tr(Φ†Γ) = ‖Γ‖₁. Built from the Gram matrix of the thinner side.
fn polar_factor(g: &CMatrix) -> CMatrix {
    let tall = g.nrows() >= g.ncols();
    let gram = if tall { g.adjoint() * g } else { g * g.adjoint() };
    let (vals, vecs) = eigh(&gram);
    let cut = 1e-12 * vals.last().copied().unwrap_or(0.0).max(1e-300);
    let n = gram.nrows();
    let mut inv_sqrt = CMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cut {
            let v = vecs.column(k);
            inv_sqrt += v * v.adjoint() * cr(1.0 / lam.sqrt());
        }
    }
    if tall {
        g * inv_sqrt
    } else {
        inv_sqrt * g
    }
}

/// Seesaw between the SDP over ℛ at fixed ρ and the convex minimization over
/// code states at fixed ℛ. Heuristic for the maximin; the returned value is a
/// certified lower bound for the returned recovery. A target `m` whose input
/// is the logical space is used as is; otherwise it is composed with the
/// encoding.
pub fn worst_case_fidelity_seesaw(
    n: &Channel,
    m: &Channel,
    code: &Code,
    rounds: usize,
    opts: &SolveOptions,
) -> Result<WorstCaseResult> {
    let enc = code.encoding();
    let nw = compose(n, &enc)?;
    let mw = if m.in_dim() == code.logical_dim() && m.in_dim() != code.physical_dim() {
        m.clone()
    } else {
        compose(m, &enc)?
    };
    let k = code.logical_dim();
    let mut rho = eye(k) / cr(k as f64);
    let mut best: Option<WorstCaseResult> = None;
    let mut converged = false;
    let mut used = 0;
    for round in 0..rounds.max(1) {
        used = round + 1;
        let fr = optimal_recovery_fidelity(&nw, &mw, &rho, &RecoveryConstraint::Unconstrained, opts)?;
        let r = fr.channel()?;
        let rn = compose(&r, &nw)?;
        let (lower, val, sigma) = min_entanglement_fidelity(rn.kraus(), mw.kraus(), &rho, 400, 1e-10);
        let improved = best.as_ref().map_or(true, |b| lower > b.value + 1e-9);
        if improved {
            best = Some(WorstCaseResult {
                value: lower,
                upper_estimate: val,
                recovery: fr.optimizer.clone(),
                worst_state: sigma.clone(),
                rounds: used,
                converged: false,
                heuristic: true,
            });
        }
        // the SDP value at σ upper-bounds the maximin
        if (fr.value - lower).abs() <= 1e-7 || !improved && round > 0 {
            converged = (fr.value - lower).abs() <= 1e-7;
            break;
        }
        rho = hermitize(&((&rho + &sigma) * cr(0.5)));
    }
    let mut out = best.expect("at least one round");
    out.rounds = used;
    out.converged = converged;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Complement equivalence

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    NotEquivalent,
    Indeterminate,
}

/// Decides whether 𝒞 = 𝒯∘𝒟 and 𝒟 = 𝒯'∘𝒞 for some channels, via the optimal
/// entanglement fidelity at the maximally mixed input in both directions.
/// Returns the verdict and the two optimal values.
pub fn equivalent_complements(c: &Channel, d: &Channel, opts: &SolveOptions) -> Result<(Equivalence, f64, f64)> {
    if c.in_dim() != d.in_dim() {
        return Err(Error::DimensionMismatch("complements must share their input".into()));
    }
    let rho = eye(c.in_dim()) / cr(c.in_dim() as f64);
    let cd = optimal_recovery_fidelity(d, c, &rho, &RecoveryConstraint::Unconstrained, opts)?;
    let dc = optimal_recovery_fidelity(c, d, &rho, &RecoveryConstraint::Unconstrained, opts)?;
    let worst = (1.0 - cd.value).max(1.0 - dc.value);
    let v = if worst <= 1e-6 {
        Equivalence::Equivalent
    } else if worst >= 1e-4 {
        Equivalence::NotEquivalent
    } else {
        Equivalence::Indeterminate
    };
    Ok((v, cd.value, dc.value))
}

/// Conditional expectation onto `algebra` as the constraint projector.
pub fn algebra_projector(algebra: &AlgebraBasis) -> Result<Channel> {
    conditional_expectation(algebra)
}

#[cfg(test)]
mod tests;
