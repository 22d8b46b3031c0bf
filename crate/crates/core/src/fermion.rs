//! Jordan-Wigner Majorana operators, parity superselection and Majorana-ring
//! codes.
//!
//! Majorana indices are 1-based: w_{2j-1} = Z..Z Y_j and w_{2j} = Z..Z X_j,
//! with mode 1 the leftmost tensor factor.

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::AlgebraBasis;
use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::matrix::{anticommutator, c, cr, eye, max_abs, tensor_all, trace, CMatrix};
use crate::random::{complex_gaussian, ginibre, normalize_kraus, random_unitary};
use crate::recovery::Code;

/// Largest supported mode count.
pub const MAX_MODES: usize = 7;
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct FermionSystem {
    n_modes: usize,
    majorana: Vec<CMatrix>,
}

fn pauli(k: char) -> CMatrix {
    let (z, o, i) = (cr(0.0), cr(1.0), c(0.0, 1.0));
    match k {
        'X' => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => eye(2),
    }
}

impl FermionSystem {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_MODES {
            return Err(Error::InvalidArgument(format!("mode count {n_modes} outside 1..={MAX_MODES}")));
        }
        let (x, y, z, id) = (pauli('X'), pauli('Y'), pauli('Z'), eye(2));
        let mut majorana = Vec::with_capacity(2 * n_modes);
        for j in 0..n_modes {
            for s in [&y, &x] {
                let factors: Vec<&CMatrix> =
                    (0..n_modes).map(|l| if l < j { &z } else if l == j { s } else { &id }).collect();
                majorana.push(tensor_all(&factors));
            }
        }
        let sys = Self { n_modes, majorana };
        let d = sys.dim() as f64;
        for k in 0..2 * n_modes {
            for l in k..2 * n_modes {
                let ac = anticommutator(&sys.majorana[k], &sys.majorana[l]);
                let target = if k == l { eye(sys.dim()) * cr(2.0) } else { CMatrix::zeros(sys.dim(), sys.dim()) };
                if max_abs(&(ac - target)) > REL_TOL * d {
                    return Err(Error::Numerical("Majorana anticommutation check failed".into()));
                }
            }
        }
        Ok(sys)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_majoranas(&self) -> usize {
        2 * self.n_modes
    }

    pub fn dim(&self) -> usize {
        1 << self.n_modes
    }

    /// w_k for 1 ≤ k ≤ 2N.
    pub fn majorana(&self, k: usize) -> Result<&CMatrix> {
        if k == 0 || k > self.n_majoranas() {
            return Err(Error::InvalidArgument(format!("Majorana index {k} outside 1..={}", self.n_majoranas())));
        }
        Ok(&self.majorana[k - 1])
    }

    /// Ascending product of the listed Majoranas (identity for the empty list).
    pub fn monomial(&self, indices: &[usize]) -> Result<CMatrix> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("repeated Majorana index in monomial".into()));
        }
        let mut m = eye(self.dim());
        for &k in &sorted {
            m *= self.majorana(k)?;
        }
        Ok(m)
    }

    /// Majorana indices {2j-1, 2j} of the listed 1-based modes.
    pub fn mode_majoranas(&self, modes: &[usize]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(2 * modes.len());
        for &j in modes {
            if j == 0 || j > self.n_modes {
                return Err(Error::InvalidArgument(format!("mode {j} out of range")));
            }
            out.extend([2 * j - 1, 2 * j]);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn check_region(&self, region: &[usize]) -> Result<Vec<usize>> {
        let mut r = region.to_vec();
        r.sort_unstable();
        r.dedup();
        if r.len() != region.len() {
            return Err(Error::InvalidArgument("repeated index in region".into()));
        }
        if r.iter().any(|&k| k == 0 || k > self.n_majoranas()) {
            return Err(Error::InvalidArgument("region index out of range".into()));
        }
        Ok(r)
    }

    pub fn complement(&self, region: &[usize]) -> Vec<usize> {
        (1..=self.n_majoranas()).filter(|k| !region.contains(k)).collect()
    }
}

/// A Majorana monomial with complex coefficient, indices sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub indices: Vec<usize>,
    pub coeff: Complex64,
}

impl Monomial {
    pub fn new(mut indices: Vec<usize>, coeff: Complex64) -> Self {
        indices.sort_unstable();
        Self { indices, coeff }
    }

    pub fn is_even(&self) -> bool {
        self.indices.len() % 2 == 0
    }

    pub fn matrix(&self, sys: &FermionSystem) -> Result<CMatrix> {
        Ok(sys.monomial(&self.indices)? * self.coeff)
    }
}

pub fn polynomial(sys: &FermionSystem, terms: &[Monomial]) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(sys.dim(), sys.dim());
    for t in terms {
        m += t.matrix(sys)?;
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct ParityData {
    pub region: Vec<usize>,
    pub c: CMatrix,
    pub p_plus: CMatrix,
    pub p_minus: CMatrix,
}

/// C_ω = ± i^{|ω|/2} w_{ω_1}⋯w_{ω_m}, sign chosen so that the vacuum
/// expectation is nonnegative.
pub fn parity_operator(sys: &FermionSystem, region: &[usize]) -> Result<ParityData> {
    let r = sys.check_region(region)?;
    if r.len() % 2 != 0 {
        return Err(Error::InvalidArgument(format!("parity needs an even region, got {} indices", r.len())));
    }
    let mut phase = cr(1.0);
    for _ in 0..r.len() / 2 {
        phase *= c(0.0, 1.0);
    }
    let mut cm = sys.monomial(&r)? * phase;
    if cm[(0, 0)].re < 0.0 {
        cm = -cm;
    }
    let id = eye(sys.dim());
    let p_plus = (&id + &cm) * cr(0.5);
    let p_minus = (&id - &cm) * cr(0.5);
    Ok(ParityData { region: r, c: cm, p_plus, p_minus })
}

/// Global parity C_Ω.
pub fn global_parity(sys: &FermionSystem) -> CMatrix {
    let all: Vec<usize> = (1..=sys.n_majoranas()).collect();
    parity_operator(sys, &all).expect("whole system has an even region").c
}

/// Parity dephasing ρ ↦ (ρ + CρC)/2, the projection onto the physical
/// (even) algebra.
pub fn parity_dephasing(c: &CMatrix) -> Channel {
    let d = c.nrows();
    let id = eye(d);
    let kraus = vec![(&id + c) * cr(0.5), (&id - c) * cr(0.5)];
    Channel::from_kraus(kraus).expect("square projectors")
}

fn subsets(region: &[usize], even: bool) -> Vec<Vec<usize>> {
    let n = region.len();
    (0u32..(1u32 << n))
        .filter(|m| (m.count_ones() % 2 == 0) == even)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).map(|i| region[i]).collect())
        .collect()
}

/// Even monomials with indices in `region`.
pub fn even_monomials(sys: &FermionSystem, region: &[usize]) -> Result<Vec<CMatrix>> {
    let r = sys.check_region(region)?;
    subsets(&r, true).iter().map(|s| sys.monomial(s)).collect()
}

/// Odd monomials with indices in `region`.
pub fn odd_monomials(sys: &FermionSystem, region: &[usize]) -> Result<Vec<CMatrix>> {
    let r = sys.check_region(region)?;
    subsets(&r, false).iter().map(|s| sys.monomial(s)).collect()
}

fn orthonormal_monomials(sys: &FermionSystem, mats: Vec<CMatrix>) -> AlgebraBasis {
    let s = cr(1.0 / (sys.dim() as f64).sqrt());
    AlgebraBasis::from_orthonormal(sys.dim(), mats.into_iter().map(|m| m * s).collect())
}

/// 𝒜_ω: span of the even monomials supported in `region`.
pub fn physical_algebra(sys: &FermionSystem, region: &[usize]) -> Result<AlgebraBasis> {
    Ok(orthonormal_monomials(sys, even_monomials(sys, region)?))
}

/// Commutant of 𝒜_ω inside the physical algebra 𝒜_Ω: span{M_S, C_ω M_S}
/// over even S ⊆ ωᶜ. For odd |ω| the C_ω terms are absent.
pub fn physical_commutant(sys: &FermionSystem, region: &[usize]) -> Result<AlgebraBasis> {
    let r = sys.check_region(region)?;
    let rest = sys.complement(&r);
    let mut mats = even_monomials(sys, &rest)?;
    if r.len() % 2 == 0 && !r.is_empty() {
        let cw = sys.monomial(&r)?;
        let extra: Vec<CMatrix> = mats.iter().map(|m| &cw * m).collect();
        mats.extend(extra);
    }
    Ok(orthonormal_monomials(sys, mats))
}

/// Parity classification of an operator against an involution C.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityClass {
    Even,
    Odd,
    Indefinite,
}

pub fn classify_parity(e: &CMatrix, c: &CMatrix, tol: f64) -> ParityClass {
    let scale = e.norm().max(1.0);
    if (e * c - c * e).norm() <= tol * scale {
        ParityClass::Even
    } else if (e * c + c * e).norm() <= tol * scale {
        ParityClass::Odd
    } else {
        ParityClass::Indefinite
    }
}

/// Definite-parity regrouping of a channel's Kraus operators.
#[derive(Debug, Clone)]
pub struct ParitySplit {
    pub kraus_even: Vec<CMatrix>,
    pub kraus_odd: Vec<CMatrix>,
    /// Number of input Kraus operators that had to be regrouped.
    pub regrouped: usize,
}

impl ParitySplit {
    /// The parity-preserving CP part 𝒩₊ (None when empty).
    pub fn n_plus(&self) -> Option<Channel> {
        (!self.kraus_even.is_empty()).then(|| Channel::from_kraus(self.kraus_even.clone()).expect("shapes"))
    }

    /// The parity-flipping CP part 𝒩₋ (None when empty).
    pub fn n_minus(&self) -> Option<Channel> {
        (!self.kraus_odd.is_empty()).then(|| Channel::from_kraus(self.kraus_odd.clone()).expect("shapes"))
    }

    /// 𝒩₊ + 𝒩₋ as a single CP map.
    pub fn combined(&self) -> Channel {
        let all: Vec<CMatrix> = self.kraus_even.iter().chain(&self.kraus_odd).cloned().collect();
        Channel::from_kraus(all).expect("shapes")
    }
}

fn check_involution(c: &CMatrix) -> Result<()> {
    let d = c.nrows();
    if !c.is_square() || max_abs(&(c * c - eye(d))) > 1e-10 || max_abs(&(c - c.adjoint())) > 1e-10 {
        return Err(Error::InvalidArgument("C must be a Hermitian involution".into()));
    }
    Ok(())
}

/// Splits the Kraus operators of `n` into parity-even and parity-odd ones.
/// Definite-parity operators are kept; an indefinite E is replaced by
/// (E ± CEC)/(2√2) and (CE ± EC)/(2√2). The sum of both parts acts as 𝒬𝒩𝒫.
pub fn definite_parity_split(n: &Channel, c: &CMatrix) -> Result<ParitySplit> {
    check_involution(c)?;
    if n.in_dim() != c.nrows() || n.out_dim() != c.nrows() {
        return Err(Error::DimensionMismatch("parity operator vs channel".into()));
    }
    let s = cr(1.0 / (2.0 * 2f64.sqrt()));
    let mut split = ParitySplit { kraus_even: vec![], kraus_odd: vec![], regrouped: 0 };
    for e in n.kraus() {
        match classify_parity(e, c, REL_TOL) {
            ParityClass::Even => split.kraus_even.push(e.clone()),
            ParityClass::Odd => split.kraus_odd.push(e.clone()),
            ParityClass::Indefinite => {
                let cec = c * e * c;
                let ce = c * e;
                let ec = e * c;
                split.kraus_even.push((e + &cec) * s);
                split.kraus_even.push((&ce + &ec) * s);
                split.kraus_odd.push((e - &cec) * s);
                split.kraus_odd.push((&ce - &ec) * s);
                split.regrouped += 1;
            }
        }
    }
    Ok(split)
}

/// Choi-Frobenius distance between 𝒬∘(𝒩₊+𝒩₋) and 𝒬∘𝒩, with 𝒬 the parity
/// dephasing of `c`. Zero exactly when 𝒩 is physical.
pub fn split_reconstruction_residual(n: &Channel, split: &ParitySplit, c: &CMatrix) -> Result<f64> {
    let q = parity_dephasing(c);
    let lhs = crate::channel::compose(&q, &split.combined())?;
    let rhs = crate::channel::compose(&q, n)?;
    crate::channel::choi_distance(&lhs, &rhs)
}

/// Random physical channel: definite-parity Kraus operators, normalized, then
/// mixed by a random unitary so the presented Kraus operators are generically
/// of indefinite parity.
pub fn random_physical_channel<R: Rng + ?Sized>(
    rng: &mut R,
    c: &CMatrix,
    n_even: usize,
    n_odd: usize,
) -> Result<Channel> {
    check_involution(c)?;
    let d = c.nrows();
    let mut raw = Vec::with_capacity(n_even + n_odd);
    for k in 0..n_even + n_odd {
        let g = ginibre(rng, d, d);
        let cgc = c * &g * c;
        raw.push(if k < n_even { (&g + cgc) * cr(0.5) } else { (&g - cgc) * cr(0.5) });
    }
    let kraus = normalize_kraus(&raw).ok_or_else(|| Error::Numerical("degenerate Kraus family".into()))?;
    let u = random_unitary(rng, kraus.len());
    let mixed = (0..kraus.len())
        .map(|i| {
            let mut m = CMatrix::zeros(d, d);
            for (j, e) in kraus.iter().enumerate() {
                m += e * u[(i, j)];
            }
            m
        })
        .collect();
    Channel::from_kraus(mixed)
}

/// Ring distance-respecting window test: all indices fit in a contiguous
/// ring interval of at most `len` Majoranas (indices taken modulo 2N).
pub fn fits_ring_window(indices: &[usize], n_majoranas: usize, len: usize) -> bool {
    if indices.is_empty() {
        return true;
    }
    (1..=n_majoranas).any(|start| {
        indices.iter().all(|&k| (k + n_majoranas - start) % n_majoranas < len)
    })
}

/// The contiguous ring window of `len` Majoranas starting at `start`.
pub fn ring_window(start: usize, len: usize, n_majoranas: usize) -> Vec<usize> {
    let mut w: Vec<usize> = (0..len).map(|o| (start - 1 + o) % n_majoranas + 1).collect();
    w.sort_unstable();
    w
}

/// One Kraus operator as a Majorana polynomial.
pub type KrausPolynomial = Vec<Monomial>;

/// Noise channel whose Kraus operators are the given Majorana polynomials.
/// Each monomial must be even (unless `allow_odd`) and fit in a ring window
/// of `max_support` Majoranas. Σ E†E must be proportional to 1; the family
/// is then rescaled to be trace preserving.
pub fn geometric_noise(
    sys: &FermionSystem,
    max_support: usize,
    kraus: &[KrausPolynomial],
    allow_odd: bool,
) -> Result<Channel> {
    if max_support < 2 && !allow_odd {
        return Err(Error::InvalidArgument("max_support must be at least 2".into()));
    }
    if kraus.is_empty() {
        return Err(Error::InvalidArgument("empty Kraus list".into()));
    }
    let mut mats = Vec::with_capacity(kraus.len());
    for poly in kraus {
        for m in poly {
            if !allow_odd && !m.is_even() {
                return Err(Error::InvalidArgument(format!("odd monomial {:?} needs the odd override", m.indices)));
            }
            if !fits_ring_window(&m.indices, sys.n_majoranas(), max_support) {
                return Err(Error::InvalidArgument(format!(
                    "monomial {:?} is not supported on a ring window of length {max_support}",
                    m.indices
                )));
            }
        }
        mats.push(polynomial(sys, poly)?);
    }
    let d = sys.dim();
    let mut s = CMatrix::zeros(d, d);
    for e in &mats {
        s += e.adjoint() * e;
    }
    let scale = trace(&s).re / d as f64;
    if scale <= 0.0 || max_abs(&(&s - eye(d) * cr(scale))) > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidArgument("Kraus weights cannot be normalized by a global rescaling".into()));
    }
    let f = cr(1.0 / scale.sqrt());
    Channel::from_kraus(mats.into_iter().map(|e| e * f).collect())
}

/// Mixed-monomial noise: each Kraus operator is √p·phase·M for an even
/// monomial M inside one ring window of `max_support` Majoranas.
pub fn random_geometric_noise<R: Rng + ?Sized>(
    rng: &mut R,
    sys: &FermionSystem,
    max_support: usize,
    n_kraus: usize,
) -> Result<Channel> {
    let nm = sys.n_majoranas();
    let mut polys = Vec::with_capacity(n_kraus);
    for _ in 0..n_kraus {
        let start = rng.gen_range(1..=nm);
        let window = ring_window(start, max_support.min(nm), nm);
        let evens = subsets(&window, true);
        let pick = evens[rng.gen_range(0..evens.len())].clone();
        let z = complex_gaussian(rng);
        polys.push(vec![Monomial::new(pick, z / cr(z.norm()) * cr(rng.gen_range(0.2..1.0f64)))]);
    }
    // single-monomial Kraus operators have E†E ∝ 1, so a global rescaling suffices
    geometric_noise(sys, max_support, &polys, false)
}

/// Majorana-ring code: unpaired modes ω on a ring, the rest paired.
#[derive(Debug, Clone)]
pub struct MajoranaRingScenario {
    pub system: FermionSystem,
    pub unpaired: Vec<usize>,
    pub pairing: Vec<(usize, usize)>,
    /// Maximal ring runs of paired indices between consecutive unpaired ones.
    pub intervals: Vec<Vec<usize>>,
    pub code: Code,
    /// Sign s with W†C_Ω W = s·C̃ (logical global parity).
    pub logical_parity_sign: f64,
}

impl MajoranaRingScenario {
    /// Length of the shortest interval I_j.
    pub fn shortest_interval(&self) -> usize {
        self.intervals.iter().map(|i| i.len()).min().unwrap_or(0)
    }

    /// Global parity of the physical system.
    pub fn global_parity(&self) -> CMatrix {
        global_parity(&self.system)
    }

    /// Physical operators realizing the logical Majoranas.
    pub fn logical_majorana(&self, m: usize) -> Result<&CMatrix> {
        if m == 0 || m > self.unpaired.len() {
            return Err(Error::InvalidArgument("logical Majorana index out of range".into()));
        }
        self.system.majorana(self.unpaired[m - 1])
    }
}

fn ring_intervals(unpaired: &[usize], nm: usize) -> Vec<Vec<usize>> {
    let mut sorted = unpaired.to_vec();
    sorted.sort_unstable();
    let k = sorted.len();
    (0..k)
        .map(|j| {
            let a = sorted[j];
            let b = sorted[(j + 1) % k];
            let mut run = Vec::new();
            let mut x = a % nm + 1;
            while x != b {
                run.push(x);
                x = x % nm + 1;
            }
            run
        })
        .filter(|r| !r.is_empty())
        .collect()
}

/// Nearest-neighbour pairing of each interval between unpaired modes.
pub fn nearest_neighbour_pairing(n_majoranas: usize, unpaired: &[usize]) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for run in ring_intervals(unpaired, n_majoranas) {
        if run.len() % 2 != 0 {
            return Err(Error::InvalidArgument("interval of odd length cannot be paired".into()));
        }
        pairs.extend(run.chunks(2).map(|p| (p[0], p[1])));
    }
    Ok(pairs)
}

/// Builds the code whose range is the joint +1 eigenspace of −i w_p w_q over
/// the pairing, with logical Majorana m realized by w_{ω_m}.
pub fn majorana_ring(
    sys: &FermionSystem,
    unpaired: &[usize],
    pairing: &[(usize, usize)],
) -> Result<MajoranaRingScenario> {
    let nm = sys.n_majoranas();
    if unpaired.is_empty() || unpaired.len() % 2 != 0 {
        return Err(Error::InvalidArgument("need a nonzero even number of unpaired modes".into()));
    }
    let mut seen = vec![false; nm + 1];
    for &k in unpaired.iter().chain(pairing.iter().flat_map(|(p, q)| [p, q])) {
        if k == 0 || k > nm || seen[k] {
            return Err(Error::InvalidArgument(format!("index {k} repeated or out of range")));
        }
        seen[k] = true;
    }
    if seen[1..].iter().any(|s| !s) {
        return Err(Error::InvalidArgument("unpaired modes and pairing must cover all Majoranas".into()));
    }
    let d = sys.dim();
    let k = unpaired.len() / 2;
    let id = eye(d);
    // projector onto the logical vacuum: stabilizers plus i w_{ω_{2l-1}} w_{ω_{2l}} = +1
    let mut proj = id.clone();
    for &(p, q) in pairing {
        let s = sys.majorana(p)? * sys.majorana(q)? * c(0.0, -1.0);
        proj = &proj * (&id + s) * cr(0.5);
    }
    let code_proj = proj.clone();
    for l in 0..k {
        let s = sys.majorana(unpaired[2 * l])? * sys.majorana(unpaired[2 * l + 1])? * c(0.0, 1.0);
        proj = &proj * (&id + s) * cr(0.5);
    }
    let col = (0..d)
        .max_by(|&a, &b| proj[(a, a)].re.partial_cmp(&proj[(b, b)].re).unwrap())
        .unwrap_or(0);
    let mut vac = proj.column(col).into_owned();
    let nv = vac.norm();
    if nv < 1e-8 {
        return Err(Error::Numerical("empty logical vacuum".into()));
    }
    vac /= cr(nv);
    if let Some(first) = vac.iter().find(|z| z.norm() > 1e-12).copied() {
        vac *= first.conj() / cr(first.norm());
    }
    let dl = 1usize << k;
    let mut w = CMatrix::zeros(d, dl);
    for x in 0..dl {
        // |x⟩ = w̃_{2l_1}⋯w̃_{2l_r}|0⟩ with l_1 < … < l_r, mode 1 the top bit
        let mut v = vac.clone();
        for l in (0..k).rev() {
            if x >> (k - 1 - l) & 1 == 1 {
                v = sys.majorana(unpaired[2 * l + 1])? * v;
            }
        }
        w.set_column(x, &v);
    }
    let code = Code::new(w)?;
    if max_abs(&(code.projector() - &code_proj)) > 1e-9 {
        return Err(Error::Numerical("code projector differs from the stabilizer projector".into()));
    }
    let cg = global_parity(sys);
    if max_abs(&(&cg * code.projector() - code.projector() * &cg)) > 1e-9 {
        return Err(Error::Numerical("code projector does not commute with parity".into()));
    }
    let logical = FermionSystem::new(k)?;
    let cl = global_parity(&logical);
    let reduced = code.isometry().adjoint() * &cg * code.isometry();
    let sign = if max_abs(&(&reduced - &cl)) < 1e-9 {
        1.0
    } else if max_abs(&(&reduced + &cl)) < 1e-9 {
        -1.0
    } else {
        return Err(Error::Numerical("W†C W is not ±C on the logical modes".into()));
    };
    Ok(MajoranaRingScenario {
        system: sys.clone(),
        unpaired: unpaired.to_vec(),
        pairing: pairing.to_vec(),
        intervals: ring_intervals(unpaired, nm),
        code,
        logical_parity_sign: sign,
    })
}

/// Ring with nearest-neighbour pairing inside every interval.
pub fn standard_ring(n_modes: usize, unpaired: &[usize]) -> Result<MajoranaRingScenario> {
    let sys = FermionSystem::new(n_modes)?;
    let pairing = nearest_neighbour_pairing(sys.n_majoranas(), unpaired)?;
    majorana_ring(&sys, unpaired, &pairing)
}

/// Quasiparticle poisoning {w_{ω_1}/√2, w_{ω_2}/√2}.
pub fn poisoning_noise(sys: &FermionSystem, a: usize, b: usize) -> Result<Channel> {
    let h = cr(std::f64::consts::FRAC_1_SQRT_2);
    let polys = vec![vec![Monomial::new(vec![a], h)], vec![Monomial::new(vec![b], h)]];
    geometric_noise(sys, sys.n_majoranas(), &polys, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{center, join, relative_commutant, same_span, SPAN_TOL};
    use crate::channel::is_physical;
    use crate::matrix::{commutator, ket};
    use crate::random::{random_kraus, seeded};

    #[test]
    fn single_mode_convention() {
        let s = FermionSystem::new(1).unwrap();
        assert!(max_abs(&(s.majorana(2).unwrap() - pauli('X'))) < 1e-15);
        assert!(max_abs(&(s.majorana(1).unwrap() - pauli('Y'))) < 1e-15);
        let p = parity_operator(&s, &[1, 2]).unwrap();
        assert!(max_abs(&(&p.c - pauli('Z'))) < 1e-15);
        assert!(s.majorana(3).is_err());
        assert!(s.majorana(0).is_err());
    }

    #[test]
    fn clifford_relations() {
        let s = FermionSystem::new(3).unwrap();
        for k in 1..=6 {
            let w = s.majorana(k).unwrap();
            assert!(max_abs(&(w * w - eye(8))) < 1e-12);
            assert!(max_abs(&(w - w.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn parity_properties() {
        let s = FermionSystem::new(3).unwrap();
        let all: Vec<usize> = (1..=6).collect();
        let p = parity_operator(&s, &all).unwrap();
        let vac = ket(8, 0);
        assert!(((vac.adjoint() * &p.c * &vac)[(0, 0)].re - 1.0).abs() < 1e-12);
        let mut nop = eye(8);
        for j in 0..3 {
            let f: Vec<CMatrix> = (0..3).map(|l| if l == j { pauli('Z') } else { eye(2) }).collect();
            nop = nop * tensor_all(&f.iter().collect::<Vec<_>>());
        }
        assert!(max_abs(&(&p.c - nop)) < 1e-12);
        assert!(parity_operator(&s, &[1, 2, 3]).is_err());
        for region in [vec![1, 4], vec![2, 3, 5, 6], vec![1, 2]] {
            let p = parity_operator(&s, &region).unwrap();
            assert!(max_abs(&(&p.c * &p.c - eye(8))) < 1e-12);
            assert!(max_abs(&(&p.c - p.c.adjoint())) < 1e-12);
            assert!(max_abs(&(&p.p_plus + &p.p_minus - eye(8))) < 1e-12);
            assert!(max_abs(&(&p.p_plus * &p.p_minus)) < 1e-12);
            for m in even_monomials(&s, &region).unwrap() {
                assert!(max_abs(&commutator(&p.c, &m)) < 1e-12);
            }
        }
    }

    #[test]
    fn global_parity_covariance_of_monomials() {
        let s = FermionSystem::new(3).unwrap();
        let c = global_parity(&s);
        let all: Vec<usize> = (1..=6).collect();
        for sub in subsets(&all, true).into_iter().chain(subsets(&all, false)).filter(|x| x.len() <= 4) {
            let m = s.monomial(&sub).unwrap();
            let res = if sub.len() % 2 == 0 { commutator(&c, &m) } else { anticommutator(&c, &m) };
            assert!(max_abs(&res) < 1e-12, "{sub:?}");
        }
    }

    #[test]
    fn physical_algebra_dimensions() {
        let s = FermionSystem::new(3).unwrap();
        assert_eq!(physical_algebra(&s, &[]).unwrap().dim(), 1);
        let one = physical_algebra(&s, &[1, 2]).unwrap();
        assert_eq!(one.dim(), 2);
        assert!(one.is_algebra(1e-10));
        let two = physical_algebra(&s, &s.mode_majoranas(&[1, 2]).unwrap()).unwrap();
        assert_eq!(two.dim(), 8);
        let a = physical_algebra(&s, &[1, 2, 3]).unwrap();
        let b = physical_algebra(&s, &[4, 5, 6]).unwrap();
        for x in a.basis() {
            for y in b.basis() {
                assert!(max_abs(&commutator(x, y)) < 1e-12);
            }
        }
    }

    #[test]
    fn commutant_and_center_of_regions() {
        for n in 2..=3 {
            let s = FermionSystem::new(n).unwrap();
            let all: Vec<usize> = (1..=2 * n).collect();
            let omega_phys = physical_algebra(&s, &all).unwrap();
            for region in [vec![1, 2], vec![2, 3], vec![1, 2, 3, 4], vec![1, 3]] {
                let a = physical_algebra(&s, &region).unwrap();
                let rc = relative_commutant(&a, &omega_phys).unwrap();
                let cw = parity_operator(&s, &region).unwrap().c;
                let rest = physical_algebra(&s, &s.complement(&region)).unwrap();
                let cspan = AlgebraBasis::span_of(s.dim(), &[eye(s.dim()), cw.clone()]).unwrap();
                let expected = join(&cspan, &rest).unwrap();
                assert!(same_span(&rc, &expected, SPAN_TOL), "n={n} {region:?}");
                assert!(same_span(&rc, &physical_commutant(&s, &region).unwrap(), SPAN_TOL));
                if region.len() < 2 * n {
                    assert!(same_span(&center(&a), &cspan, SPAN_TOL));
                }
            }
        }
    }

    #[test]
    fn split_of_definite_channel_is_unchanged() {
        let s = FermionSystem::new(2).unwrap();
        let c = global_parity(&s);
        let h = cr(std::f64::consts::FRAC_1_SQRT_2);
        let n = Channel::from_kraus(vec![s.monomial(&[1, 2]).unwrap() * h, eye(4) * h]).unwrap();
        let sp = definite_parity_split(&n, &c).unwrap();
        assert_eq!(sp.regrouped, 0);
        assert_eq!(sp.kraus_even.len(), 2);
        assert!(sp.kraus_odd.is_empty());
        assert!(sp.n_minus().is_none());
    }

    #[test]
    fn split_of_majorana_mixture() {
        let s = FermionSystem::new(2).unwrap();
        let cp = global_parity(&s);
        let w = s.majorana(1).unwrap().clone();
        let iw = &w * c(0.0, 1.0);
        let c = cp;
        let e1 = (eye(4) + &iw) * cr(0.5);
        let e2 = (eye(4) - &iw) * cr(0.5);
        let n = Channel::from_kraus(vec![e1, e2]).unwrap();
        let sp = definite_parity_split(&n, &c).unwrap();
        for e in &sp.kraus_even {
            assert!(max_abs(&commutator(e, &c)) < 1e-12);
        }
        for e in &sp.kraus_odd {
            assert!(max_abs(&anticommutator(e, &c)) < 1e-12);
        }
        let mut rng = seeded(4);
        let rho = crate::random::random_density(&mut rng, 4);
        let q = parity_dephasing(&c);
        let expected = q.apply(&((&rho + &w * &rho * &w) * cr(0.5)));
        assert!(max_abs(&(sp.combined().apply(&rho) - expected)) < 1e-12);
    }

    #[test]
    fn split_reconstruction_detects_physicality() {
        let s = FermionSystem::new(2).unwrap();
        let c = global_parity(&s);
        let p = parity_dephasing(&c);
        let mut rng = seeded(21);
        for _ in 0..5 {
            let n = random_physical_channel(&mut rng, &c, 2, 1).unwrap();
            assert!(n.trace_preservation_residual() < 1e-10);
            assert!(is_physical(&n, &p, &p, 1e-9).unwrap().0);
            let sp = definite_parity_split(&n, &c).unwrap();
            assert!(split_reconstruction_residual(&n, &sp, &c).unwrap() < 1e-9);
            let bad = Channel::from_kraus(random_kraus(&mut rng, 4, 4, 2)).unwrap();
            assert!(!is_physical(&bad, &p, &p, 1e-9).unwrap().0);
            let sp = definite_parity_split(&bad, &c).unwrap();
            assert!(split_reconstruction_residual(&bad, &sp, &c).unwrap() > 1e-6);
        }
    }

    #[test]
    fn small_ring_code() {
        let s = FermionSystem::new(3).unwrap();
        let ring = majorana_ring(&s, &[1, 6], &[(2, 3), (4, 5)]).unwrap();
        assert_eq!(ring.code.logical_dim(), 2);
        let w = ring.code.isometry();
        for &(p, q) in &[(2usize, 3usize), (4, 5)] {
            let stab = s.majorana(p).unwrap() * s.majorana(q).unwrap() * c(0.0, -1.0);
            assert!(max_abs(&(&stab * w - w)) < 1e-12);
        }
        assert_eq!(ring.intervals, vec![vec![2, 3, 4, 5]]);
    }

    #[test]
    fn ring_logical_majoranas_match_jordan_wigner() {
        let ring = standard_ring(6, &[1, 4, 7, 10]).unwrap();
        assert_eq!(ring.code.logical_dim(), 4);
        assert_eq!(ring.shortest_interval(), 2);
        let logical = FermionSystem::new(2).unwrap();
        let w = ring.code.isometry();
        for m in 1..=4 {
            let red = w.adjoint() * ring.logical_majorana(m).unwrap() * w;
            assert!(max_abs(&(red - logical.majorana(m).unwrap())) < 1e-10, "m={m}");
        }
        let c = ring.global_parity();
        let pr = ring.code.projector();
        assert!(max_abs(&commutator(&c, pr)) < 1e-10);
    }

    #[test]
    fn ring_rejects_bad_partitions() {
        let s = FermionSystem::new(3).unwrap();
        assert!(majorana_ring(&s, &[1, 6], &[(2, 3)]).is_err());
        assert!(majorana_ring(&s, &[1], &[(2, 3), (4, 5)]).is_err());
        assert!(majorana_ring(&s, &[1, 6], &[(2, 3), (3, 5)]).is_err());
    }

    #[test]
    fn geometric_noise_rules() {
        let s = FermionSystem::new(3).unwrap();
        let i = c(0.0, 1.0);
        let polys = vec![
            vec![Monomial::new(vec![], cr(1.0))],
            vec![Monomial::new(vec![6, 1], i)],
        ];
        let n = geometric_noise(&s, 2, &polys, false).unwrap();
        assert!(n.trace_preservation_residual() < 1e-10);
        let far = vec![vec![Monomial::new(vec![1, 4], i)]];
        assert!(geometric_noise(&s, 2, &far, false).is_err());
        let odd = vec![vec![Monomial::new(vec![1], cr(1.0))]];
        assert!(geometric_noise(&s, 2, &odd, false).is_err());
        let mixed = vec![vec![Monomial::new(vec![], cr(1.0)), Monomial::new(vec![1, 2], i)]];
        assert!(geometric_noise(&s, 2, &mixed, false).is_err());
        let p = poisoning_noise(&s, 1, 6).unwrap();
        assert!(p.trace_preservation_residual() < 1e-10);
        let mut rng = seeded(1);
        let r = random_geometric_noise(&mut rng, &s, 2, 3).unwrap();
        assert!(r.trace_preservation_residual() < 1e-10);
    }

    #[test]
    fn ring_windows_wrap() {
        assert!(fits_ring_window(&[12, 1], 12, 2));
        assert!(!fits_ring_window(&[1, 3], 12, 2));
        assert_eq!(ring_window(12, 2, 12), vec![1, 12]);
    }
}
