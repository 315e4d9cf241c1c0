//! Spectral construction of small-amplitude spike solutions of nonlocally
//! coupled systems `U + K∗U + N(U; μ) = 0`.

pub mod error;
pub mod grid;
pub mod kernel;
pub mod symmetry;
pub mod nonlinearity;
pub mod hypotheses;
pub mod normalform;
pub mod krylov;
pub mod groundstate;
pub mod solver;
pub mod continuation;

pub use continuation::{periodic_study, sweep, tail_analysis, ContinuationResult, KernelTail, SpikeProblem, TailClass, TailReport};
pub use error::{ContinuationError, GridError, GroundStateError, HypothesisError, KernelError, NormalFormError, SolverError};
pub use grid::{Field, UniformGrid};
pub use groundstate::{solve_groundstate, GroundState};
pub use hypotheses::{check_hypotheses, BifurcationData, CheckOptions, HypothesisReport};
pub use kernel::{KernelEntry, KernelSpec};
pub use nonlinearity::Nonlinearity;
pub use solver::{build_rescaled, RescaledSystem, SolverOptions, SpikeSolution};
pub use symmetry::SymmetryGroup;
