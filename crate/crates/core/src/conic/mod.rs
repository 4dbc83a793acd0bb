//! Conic encodings of the beamforming subproblems and the solver interface.

pub mod assemble;
pub mod program;
pub mod rank_one;
pub mod solver;

pub use assemble::{Assembler, Assembly, BlockSolution, EnergyBlock, InfoBlock, Layout, TauBlock};
pub use program::{AffineExpr, Cone, ConicProgram};
pub use rank_one::{extract_rank_one, split_energy_covariance, RankOne, RANK_ONE_RATIO_TOL};
pub use solver::{ClarabelSolver, ConicSolver, Solution, SolveReport, SolveStatus, SolverSettings};
