//! Approximate recovery of quantum channels under superselection and locality
//! constraints.

pub mod algebra;
pub mod channel;
pub mod error;
pub mod fermion;
pub mod matrix;
pub mod random;
pub mod recovery;
pub mod sdp;

pub use algebra::{AlgebraBasis, BlockStructure, Sector};
pub use channel::{Channel, ChannelDistance, ValidationReport};
pub use error::{Error, Result};
pub use matrix::{CMatrix, CVector, DimShape};
pub use sdp::{SdpProblem, SdpSolution, SdpStatus, SolveOptions};
pub use fermion::{FermionSystem, MajoranaRingScenario, Monomial};
pub use recovery::{Code, CorrectabilityReport, FidelityResult, RecoveryConstraint, Verdict};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
