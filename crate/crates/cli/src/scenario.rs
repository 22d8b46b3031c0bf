//! Scenario files: JSON with complex numbers as `[re, im]` (a bare number is
//! read as real) and matrices as row-major nested arrays.

use std::collections::BTreeMap;

use serde::Deserialize;

use constrained_recovery::algebra::{commutant, conditional_expectation, generate_algebra, AlgebraBasis};
use constrained_recovery::channel::compose;
use constrained_recovery::fermion::{
    geometric_noise, global_parity, majorana_ring, nearest_neighbour_pairing, parity_dephasing, parity_operator,
    physical_algebra, physical_commutant, poisoning_noise, polynomial, random_physical_channel, FermionSystem,
    Monomial,
};
use constrained_recovery::matrix::{eye, CMatrix, CVector};
use constrained_recovery::random::{random_kraus, seeded};
use constrained_recovery::{Channel, Code};
use num_complex::Complex64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize, PartialEq)]
#[serde(untagged)]
pub enum Cx {
    Pair([f64; 2]),
    Real(f64),
}

impl Cx {
    pub fn value(self) -> Complex64 {
        match self {
            Cx::Pair([re, im]) => Complex64::new(re, im),
            Cx::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Cx>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSpec {
    pub indices: Vec<usize>,
    #[serde(default = "one")]
    pub coeff: Cx,
}

fn one() -> Cx {
    Cx::Pair([1.0, 0.0])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub system: SystemSpec,
    #[serde(default)]
    pub algebras: BTreeMap<String, AlgebraSpec>,
    #[serde(default)]
    pub channels: BTreeMap<String, ChannelSpec>,
    #[serde(default)]
    pub code: Option<CodeSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Qudits { dims: Vec<usize> },
    Fermions { modes: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraSpec {
    /// Algebra generated by explicit matrices.
    Generators { generators: Vec<MatrixSpec> },
    /// Algebra generated by Majorana polynomials.
    Monomials { generators: Vec<Vec<MonomialSpec>> },
    Full,
    Trivial,
    /// span{1, C} for the global parity C.
    Parity,
    /// Even Majorana polynomials supported in the region.
    Region { region: Vec<usize> },
    /// Commutant of the region algebra inside the even algebra.
    RegionCommutant { region: Vec<usize> },
    Commutant { of: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Kraus { kraus: Vec<MatrixSpec> },
    Identity { #[serde(default)] dim: Option<usize> },
    Depolarizing { #[serde(default)] dim: Option<usize> },
    /// Full dephasing in the computational basis.
    Dephasing { #[serde(default)] dim: Option<usize> },
    ParityDephasing { #[serde(default)] region: Option<Vec<usize>> },
    ConditionalExpectation { algebra: String },
    Geometric {
        max_support: usize,
        kraus: Vec<Vec<MonomialSpec>>,
        #[serde(default)]
        allow_odd: bool,
    },
    Poisoning { a: usize, b: usize },
    Random { in_dim: usize, out_dim: usize, rank: usize },
    RandomPhysical { n_even: usize, n_odd: usize },
    Compose { outer: String, inner: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CodeSpec {
    Identity,
    Isometry { isometry: MatrixSpec },
    /// Orthonormal code vectors.
    Columns { columns: Vec<Vec<Cx>> },
    /// Computational basis states spanning the code.
    BasisStates { states: Vec<usize> },
    MajoranaRing {
        unpaired: Vec<usize>,
        #[serde(default)]
        pairing: Option<Vec<[usize; 2]>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ProjectorSpec {
    /// "global_parity" or "identity".
    Named(String),
    Matrices(Vec<MatrixSpec>),
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Unconstrained,
    Physical { p: String, q: String },
    Fixes { algebra: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    /// "maximally_mixed".
    Named(String),
    Matrix(MatrixSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelitySpec {
    pub noise: String,
    /// Target channel; defaults to the identity on the (logical) input.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub constraint: Option<ConstraintSpec>,
    #[serde(default)]
    pub state: Option<StateSpec>,
    /// Compose noise and target with the code isometry (default: true when a code is given).
    #[serde(default)]
    pub on_code: Option<bool>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub sdp_tol: Option<f64>,
    #[serde(default)]
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Kl { channel: String, #[serde(default)] tol: Option<f64> },
    SuperselectionKl {
        channel: String,
        #[serde(default)]
        projectors: Option<ProjectorSpec>,
        #[serde(default)]
        tol: Option<f64>,
    },
    TensorLocal { channel: String, dims: [usize; 2], #[serde(default)] tol: Option<f64> },
    FermionLocal { channel: String, region: Vec<usize>, #[serde(default)] tol: Option<f64> },
    Optimal(FidelitySpec),
    Environment(FidelitySpec),
    Duality(FidelitySpec),
    Seesaw(FidelitySpec),
    Algebra { algebra: String, #[serde(default)] ops: Vec<String> },
    Channel {
        channel: String,
        #[serde(default)]
        ops: Vec<String>,
        #[serde(default)]
        algebra: Option<String>,
        #[serde(default)]
        p: Option<String>,
        #[serde(default)]
        q: Option<String>,
        #[serde(default)]
        b: Option<String>,
        #[serde(default)]
        tol: Option<f64>,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Kl { .. } => "kl",
            TaskSpec::SuperselectionKl { .. } => "superselection_kl",
            TaskSpec::TensorLocal { .. } => "tensor_local",
            TaskSpec::FermionLocal { .. } => "fermion_local",
            TaskSpec::Optimal(_) => "optimal",
            TaskSpec::Environment(_) => "environment",
            TaskSpec::Duality(_) => "duality",
            TaskSpec::Seesaw(_) => "seesaw",
            TaskSpec::Algebra { .. } => "algebra",
            TaskSpec::Channel { .. } => "channel",
        }
    }
}

/// Problems with the scenario itself (exit code 2).
#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("cannot read scenario: {0}")]
    Io(String),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SchemaError {
    SchemaError::Invalid(msg.into())
}

pub fn parse(text: &str) -> Result<Scenario, SchemaError> {
    let sc: Scenario = serde_json::from_str(text).map_err(|e| SchemaError::Parse(e.to_string()))?;
    if sc.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", sc.schema_version)));
    }
    Ok(sc)
}

pub fn load(path: &std::path::Path) -> Result<Scenario, SchemaError> {
    let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn matrix(spec: &MatrixSpec, what: &str) -> Result<CMatrix, SchemaError> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 || spec.iter().any(|r| r.len() != cols) {
        return Err(invalid(format!("{what}: matrix must be a non-empty rectangular array")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| spec[i][j].value()))
}

pub fn matrix_to_json(m: &CMatrix) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| serde_json::Value::Array((0..m.ncols()).map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn monomials(spec: &[MonomialSpec]) -> Vec<Monomial> {
    spec.iter().map(|m| Monomial::new(m.indices.clone(), m.coeff.value())).collect()
}

/// FNV-1a, to give each named random channel its own stream.
fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Scenario with every named object constructed and dimension-checked.
pub struct Resolved {
    pub seed: u64,
    pub dim: usize,
    pub fermions: Option<FermionSystem>,
    pub algebras: BTreeMap<String, AlgebraBasis>,
    pub channels: BTreeMap<String, Channel>,
    pub code: Option<Code>,
    pub tasks: Vec<TaskSpec>,
}

fn core_err(ctx: &str, e: constrained_recovery::Error) -> SchemaError {
    invalid(format!("{ctx}: {e}"))
}

impl Resolved {
    pub fn new(sc: &Scenario, seed: u64) -> Result<Self, SchemaError> {
        let (dim, fermions) = match &sc.system {
            SystemSpec::Qudits { dims } => {
                if dims.is_empty() || dims.contains(&0) {
                    return Err(invalid("qudit dims must be positive"));
                }
                let d: usize = dims.iter().product();
                if d > 256 {
                    return Err(invalid(format!("total dimension {d} exceeds 256")));
                }
                (d, None)
            }
            SystemSpec::Fermions { modes } => {
                let sys = FermionSystem::new(*modes).map_err(|e| core_err("system", e))?;
                (sys.dim(), Some(sys))
            }
        };
        let mut r = Resolved {
            seed,
            dim,
            fermions,
            algebras: BTreeMap::new(),
            channels: BTreeMap::new(),
            code: None,
            tasks: sc.tasks.clone(),
        };
        for name in sc.algebras.keys() {
            r.algebra(sc, name, 0)?;
        }
        for name in sc.channels.keys() {
            r.channel(sc, name, 0)?;
        }
        if let Some(code) = &sc.code {
            r.code = Some(r.build_code(code)?);
        }
        for (i, t) in sc.tasks.iter().enumerate() {
            r.validate_task(t).map_err(|e| invalid(format!("task {i} ({}): {e}", t.kind())))?;
        }
        Ok(r)
    }

    fn fermions(&self, what: &str) -> Result<&FermionSystem, SchemaError> {
        self.fermions.as_ref().ok_or_else(|| invalid(format!("{what} needs a fermionic system")))
    }

    fn algebra(&mut self, sc: &Scenario, name: &str, depth: usize) -> Result<AlgebraBasis, SchemaError> {
        if let Some(a) = self.algebras.get(name) {
            return Ok(a.clone());
        }
        if depth > 32 {
            return Err(invalid(format!("algebra '{name}': reference cycle")));
        }
        let spec = sc.algebras.get(name).ok_or_else(|| invalid(format!("unknown algebra '{name}'")))?;
        let ctx = format!("algebra '{name}'");
        let d = self.dim;
        let a = match spec {
            AlgebraSpec::Generators { generators } => {
                let gens = generators.iter().map(|g| matrix(g, &ctx)).collect::<Result<Vec<_>, _>>()?;
                generate_algebra(&gens, d).map_err(|e| core_err(&ctx, e))?
            }
            AlgebraSpec::Monomials { generators } => {
                let sys = self.fermions(&ctx)?;
                let gens = generators
                    .iter()
                    .map(|p| polynomial(sys, &monomials(p)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| core_err(&ctx, e))?;
                generate_algebra(&gens, d).map_err(|e| core_err(&ctx, e))?
            }
            AlgebraSpec::Full => AlgebraBasis::full(d),
            AlgebraSpec::Trivial => AlgebraBasis::trivial(d),
            AlgebraSpec::Parity => {
                let c = global_parity(self.fermions(&ctx)?);
                AlgebraBasis::span_of(d, &[eye(d), c]).map_err(|e| core_err(&ctx, e))?
            }
            AlgebraSpec::Region { region } => physical_algebra(self.fermions(&ctx)?, region).map_err(|e| core_err(&ctx, e))?,
            AlgebraSpec::RegionCommutant { region } => {
                physical_commutant(self.fermions(&ctx)?, region).map_err(|e| core_err(&ctx, e))?
            }
            AlgebraSpec::Commutant { of } => commutant(&self.algebra(sc, of, depth + 1)?),
        };
        self.algebras.insert(name.to_string(), a.clone());
        Ok(a)
    }

    fn channel(&mut self, sc: &Scenario, name: &str, depth: usize) -> Result<Channel, SchemaError> {
        if let Some(c) = self.channels.get(name) {
            return Ok(c.clone());
        }
        if depth > 32 {
            return Err(invalid(format!("channel '{name}': reference cycle")));
        }
        let spec = sc.channels.get(name).ok_or_else(|| invalid(format!("unknown channel '{name}'")))?;
        let ctx = format!("channel '{name}'");
        let d = self.dim;
        let mut rng = seeded(self.seed ^ name_hash(name));
        let ch = match spec {
            ChannelSpec::Kraus { kraus } => {
                let ks = kraus.iter().map(|k| matrix(k, &ctx)).collect::<Result<Vec<_>, _>>()?;
                let c = Channel::from_kraus(ks).map_err(|e| core_err(&ctx, e))?;
                let v = c.validate(1e-8);
                if !v.valid {
                    return Err(invalid(format!(
                        "{ctx}: not trace preserving (residual {:.3e})",
                        v.trace_preservation_residual
                    )));
                }
                c
            }
            ChannelSpec::Identity { dim } => Channel::identity(dim.unwrap_or(d)),
            ChannelSpec::Depolarizing { dim } => Channel::completely_depolarizing(dim.unwrap_or(d)),
            ChannelSpec::Dephasing { dim } => {
                let n = dim.unwrap_or(d);
                Channel::from_kraus((0..n).map(|i| constrained_recovery::matrix::unit(n, i, i)).collect())
                    .map_err(|e| core_err(&ctx, e))?
            }
            ChannelSpec::ParityDephasing { region } => {
                let sys = self.fermions(&ctx)?;
                let c = match region {
                    Some(r) => parity_operator(sys, r).map_err(|e| core_err(&ctx, e))?.c,
                    None => global_parity(sys),
                };
                parity_dephasing(&c)
            }
            ChannelSpec::ConditionalExpectation { algebra } => {
                let a = self.algebra(sc, algebra, depth + 1)?;
                conditional_expectation(&a).map_err(|e| core_err(&ctx, e))?
            }
            ChannelSpec::Geometric { max_support, kraus, allow_odd } => {
                let polys: Vec<Vec<Monomial>> = kraus.iter().map(|p| monomials(p)).collect();
                geometric_noise(self.fermions(&ctx)?, *max_support, &polys, *allow_odd).map_err(|e| core_err(&ctx, e))?
            }
            ChannelSpec::Poisoning { a, b } => poisoning_noise(self.fermions(&ctx)?, *a, *b).map_err(|e| core_err(&ctx, e))?,
            ChannelSpec::Random { in_dim, out_dim, rank } => {
                if *in_dim == 0 || *out_dim == 0 || *rank == 0 || out_dim * rank < *in_dim {
                    return Err(invalid(format!("{ctx}: need out_dim·rank ≥ in_dim > 0")));
                }
                Channel::from_kraus(random_kraus(&mut rng, *in_dim, *out_dim, *rank)).map_err(|e| core_err(&ctx, e))?
            }
            ChannelSpec::RandomPhysical { n_even, n_odd } => {
                let c = global_parity(self.fermions(&ctx)?);
                random_physical_channel(&mut rng, &c, *n_even, *n_odd).map_err(|e| core_err(&ctx, e))?
            }
            ChannelSpec::Compose { outer, inner } => {
                let o = self.channel(sc, outer, depth + 1)?;
                let i = self.channel(sc, inner, depth + 1)?;
                compose(&o, &i).map_err(|e| core_err(&ctx, e))?
            }
        };
        self.channels.insert(name.to_string(), ch.clone());
        Ok(ch)
    }

    fn build_code(&self, spec: &CodeSpec) -> Result<Code, SchemaError> {
        let d = self.dim;
        let ctx = "code";
        let code = match spec {
            CodeSpec::Identity => Code::identity(d),
            CodeSpec::Isometry { isometry } => Code::new(matrix(isometry, ctx)?).map_err(|e| core_err(ctx, e))?,
            CodeSpec::Columns { columns } => {
                let cols: Vec<CVector> =
                    columns.iter().map(|c| CVector::from_iterator(c.len(), c.iter().map(|z| z.value()))).collect();
                if cols.iter().any(|c| c.len() != d) {
                    return Err(invalid(format!("code columns must have length {d}")));
                }
                Code::from_columns(&cols).map_err(|e| core_err(ctx, e))?
            }
            CodeSpec::BasisStates { states } => {
                if states.iter().any(|&s| s >= d) {
                    return Err(invalid(format!("basis state index out of range 0..{d}")));
                }
                let cols: Vec<CVector> = states.iter().map(|&s| constrained_recovery::matrix::ket(d, s)).collect();
                Code::from_columns(&cols).map_err(|e| core_err(ctx, e))?
            }
            CodeSpec::MajoranaRing { unpaired, pairing } => {
                let sys = self.fermions(ctx)?;
                let pairs: Vec<(usize, usize)> = match pairing {
                    Some(p) => p.iter().map(|[a, b]| (*a, *b)).collect(),
                    None => nearest_neighbour_pairing(sys.n_majoranas(), unpaired).map_err(|e| core_err(ctx, e))?,
                };
                majorana_ring(sys, unpaired, &pairs).map_err(|e| core_err(ctx, e))?.code
            }
        };
        if code.physical_dim() != d {
            return Err(invalid(format!("code acts on dimension {} but the system has {d}", code.physical_dim())));
        }
        Ok(code)
    }

    pub fn get_channel(&self, name: &str) -> Result<&Channel, SchemaError> {
        self.channels.get(name).ok_or_else(|| invalid(format!("unknown channel '{name}'")))
    }

    pub fn get_algebra(&self, name: &str) -> Result<&AlgebraBasis, SchemaError> {
        self.algebras.get(name).ok_or_else(|| invalid(format!("unknown algebra '{name}'")))
    }

    pub fn get_code(&self) -> Result<&Code, SchemaError> {
        self.code.as_ref().ok_or_else(|| invalid("task needs a code"))
    }

    pub fn projectors(&self, spec: &Option<ProjectorSpec>) -> Result<Vec<CMatrix>, SchemaError> {
        let d = self.dim;
        match spec {
            None => match &self.fermions {
                Some(sys) => {
                    let c = global_parity(sys);
                    Ok(vec![(eye(d) + &c) * Complex64::new(0.5, 0.0), (eye(d) - &c) * Complex64::new(0.5, 0.0)])
                }
                None => Ok(vec![eye(d)]),
            },
            Some(ProjectorSpec::Named(n)) if n == "identity" => Ok(vec![eye(d)]),
            Some(ProjectorSpec::Named(n)) if n == "global_parity" => {
                let c = global_parity(self.fermions("global_parity projectors")?);
                Ok(vec![(eye(d) + &c) * Complex64::new(0.5, 0.0), (eye(d) - &c) * Complex64::new(0.5, 0.0)])
            }
            Some(ProjectorSpec::Named(n)) => Err(invalid(format!("unknown projector family '{n}'"))),
            Some(ProjectorSpec::Matrices(ms)) => {
                let ps = ms.iter().map(|m| matrix(m, "projector")).collect::<Result<Vec<_>, _>>()?;
                if ps.iter().any(|p| p.shape() != (d, d)) {
                    return Err(invalid(format!("projectors must be {d}x{d}")));
                }
                Ok(ps)
            }
        }
    }

    /// (noise, target, input state) for a fidelity task.
    pub fn fidelity_inputs(&self, f: &FidelitySpec) -> Result<(Channel, Channel, CMatrix), SchemaError> {
        let noise = self.get_channel(&f.noise)?.clone();
        let on_code = f.on_code.unwrap_or(self.code.is_some());
        let (n, m) = if on_code {
            let code = self.get_code()?;
            if noise.in_dim() != code.physical_dim() {
                return Err(invalid("noise input does not match the code's physical dimension"));
            }
            let enc = code.encoding();
            let n = compose(&noise, &enc).map_err(|e| core_err("noise", e))?;
            let m = match &f.target {
                Some(t) => {
                    let t = self.get_channel(t)?;
                    if t.in_dim() != code.physical_dim() {
                        return Err(invalid("target input does not match the code's physical dimension"));
                    }
                    compose(t, &enc).map_err(|e| core_err("target", e))?
                }
                None => Channel::identity(code.logical_dim()),
            };
            (n, m)
        } else {
            let m = match &f.target {
                Some(t) => self.get_channel(t)?.clone(),
                None => Channel::identity(noise.in_dim()),
            };
            (noise, m)
        };
        if n.in_dim() != m.in_dim() {
            return Err(invalid("noise and target must share their input dimension"));
        }
        let k = n.in_dim();
        let rho = match &f.state {
            None => eye(k) / Complex64::new(k as f64, 0.0),
            Some(StateSpec::Named(s)) if s == "maximally_mixed" => eye(k) / Complex64::new(k as f64, 0.0),
            Some(StateSpec::Named(s)) => return Err(invalid(format!("unknown state '{s}'"))),
            Some(StateSpec::Matrix(m)) => {
                let r = matrix(m, "state")?;
                if r.shape() != (k, k) {
                    return Err(invalid(format!("state must be {k}x{k}")));
                }
                r
            }
        };
        Ok((n, m, rho))
    }

    fn validate_task(&self, t: &TaskSpec) -> Result<(), SchemaError> {
        let check_tol = |tol: &Option<f64>| match tol {
            Some(x) if !(x.is_finite() && *x > 0.0) => Err(invalid("tolerance must be positive")),
            _ => Ok(()),
        };
        match t {
            TaskSpec::Kl { channel, tol } => {
                check_tol(tol)?;
                let c = self.get_channel(channel)?;
                if c.in_dim() != self.get_code()?.physical_dim() {
                    return Err(invalid("channel input does not match the code"));
                }
            }
            TaskSpec::SuperselectionKl { channel, projectors, tol } => {
                check_tol(tol)?;
                let c = self.get_channel(channel)?;
                let ps = self.projectors(projectors)?;
                if c.in_dim() != self.get_code()?.physical_dim() || c.out_dim() != ps[0].nrows() {
                    return Err(invalid("channel, code and projectors must act on the same space"));
                }
            }
            TaskSpec::TensorLocal { channel, dims, tol } => {
                check_tol(tol)?;
                let c = self.get_channel(channel)?;
                if dims[0] * dims[1] != self.get_code()?.physical_dim() || c.in_dim() != dims[0] || c.out_dim() != dims[0] {
                    return Err(invalid("tensor_local needs a channel on H_A with dims[0]·dims[1] = code dimension"));
                }
            }
            TaskSpec::FermionLocal { channel, region, tol } => {
                check_tol(tol)?;
                let sys = self.fermions("fermion_local")?;
                if region.iter().any(|&k| k == 0 || k > sys.n_majoranas()) {
                    return Err(invalid("region index out of range"));
                }
                let c = self.get_channel(channel)?;
                if c.in_dim() != sys.dim() || self.get_code()?.physical_dim() != sys.dim() {
                    return Err(invalid("fermion_local needs channel and code on the fermionic space"));
                }
            }
            TaskSpec::Optimal(f) | TaskSpec::Environment(f) | TaskSpec::Duality(f) | TaskSpec::Seesaw(f) => {
                check_tol(&f.tol)?;
                check_tol(&f.sdp_tol)?;
                let (n, m, rho) = self.fidelity_inputs(f)?;
                if (rho.trace().re - 1.0).abs() > 1e-8 {
                    return Err(invalid("state must have unit trace"));
                }
                match f.constraint.as_ref().unwrap_or(&ConstraintSpec::Unconstrained) {
                    ConstraintSpec::Unconstrained => {}
                    ConstraintSpec::Physical { p, q } => {
                        let (p, q) = (self.get_channel(p)?, self.get_channel(q)?);
                        if q.in_dim() != n.out_dim() || q.out_dim() != n.out_dim() || p.in_dim() != m.out_dim() || p.out_dim() != m.out_dim() {
                            return Err(invalid("physical constraint: q must act on the noise output and p on the target output"));
                        }
                    }
                    ConstraintSpec::Fixes { algebra } => {
                        let a = self.get_algebra(algebra)?;
                        if n.out_dim() != m.out_dim() || a.ambient_dim() != n.out_dim() {
                            return Err(invalid("fixes constraint needs equal noise/target outputs on the algebra's space"));
                        }
                    }
                }
                if matches!(t, TaskSpec::Seesaw(_)) {
                    let code_ok = f.on_code.unwrap_or(self.code.is_some());
                    if !code_ok {
                        return Err(invalid("seesaw runs over code states and needs a code"));
                    }
                }
            }
            TaskSpec::Algebra { algebra, ops } => {
                self.get_algebra(algebra)?;
                for op in ops {
                    if !["commutant", "center", "blocks", "closure"].contains(&op.as_str()) {
                        return Err(invalid(format!("unknown algebra op '{op}'")));
                    }
                }
            }
            TaskSpec::Channel { channel, ops, algebra, p, q, b, tol } => {
                check_tol(tol)?;
                self.get_channel(channel)?;
                for op in ops {
                    match op.as_str() {
                        "validate" | "complement" => {}
                        "local_complement" | "fixes" => {
                            self.get_algebra(algebra.as_deref().ok_or_else(|| invalid(format!("op '{op}' needs 'algebra'")))?)?;
                        }
                        "physical" => {
                            self.get_channel(p.as_deref().ok_or_else(|| invalid("op 'physical' needs 'p'"))?)?;
                            self.get_channel(q.as_deref().ok_or_else(|| invalid("op 'physical' needs 'q'"))?)?;
                        }
                        "local" => {
                            self.get_algebra(algebra.as_deref().ok_or_else(|| invalid("op 'local' needs 'algebra'"))?)?;
                            self.get_algebra(b.as_deref().ok_or_else(|| invalid("op 'local' needs 'b'"))?)?;
                        }
                        _ => return Err(invalid(format!("unknown channel op '{op}'"))),
                    }
                }
            }
        }
        Ok(())
    }
}
