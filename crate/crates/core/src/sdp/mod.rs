//! Dense complex-Hermitian semidefinite programs.
//!
//! A problem has Hermitian PSD blocks X_b. Functionals are real-linear:
//! ℓ(X) = Re Σ coeff·X_b[r,c] over the listed terms.

mod builders;
mod dump;
mod solver;

pub use builders::{
    build_channel_fidelity_sdp, build_state_fidelity_sdp, choi_apply, choi_trace_out,
    hermitian_components, kraus_vector, linear_map_rows, ChannelFidelitySdp, ChoiConstraint,
    ChoiParam,
};
pub use dump::{parse_problem, write_problem, write_solution};
pub use solver::{solve, SolveOptions};

use num_complex::Complex64;

use crate::matrix::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coeff: Complex64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Functional {
    pub terms: Vec<Term>,
}

impl Functional {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, block: usize, row: usize, col: usize, coeff: Complex64) {
        if coeff != Complex64::new(0.0, 0.0) {
            self.terms.push(Term { block, row, col, coeff });
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, blocks: &[CMatrix]) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.coeff * blocks[t.block][(t.row, t.col)]).re)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub functional: Functional,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub sense: Sense,
    pub objective: Functional,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, sense: Sense) -> Self {
        Self { block_dims, sense, objective: Functional::new(), constraints: Vec::new() }
    }

    pub fn add_constraint(&mut self, functional: Functional, rhs: f64) {
        self.constraints.push(Constraint { functional, rhs });
    }

    /// Checks that every term addresses an existing block entry.
    pub fn check(&self) -> crate::Result<()> {
        let bad = |t: &Term| {
            t.block >= self.block_dims.len()
                || t.row >= self.block_dims[t.block]
                || t.col >= self.block_dims[t.block]
        };
        if self.objective.terms.iter().any(bad)
            || self.constraints.iter().any(|c| c.functional.terms.iter().any(bad))
        {
            return Err(crate::Error::DimensionMismatch("SDP term outside its block".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal objective in the problem's own sense.
    pub value: f64,
    /// Dual objective in the problem's own sense.
    pub dual_value: f64,
    pub blocks: Vec<CMatrix>,
    pub dual_slack: Vec<CMatrix>,
    pub dual_values: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Indices of constraints removed as linearly dependent.
    pub dropped_constraints: Vec<usize>,
}
