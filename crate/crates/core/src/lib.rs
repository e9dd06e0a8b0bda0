//! Quasi-Newton methods built from Bregman divergences on the cone of
//! positive-definite matrices.
//!
//! A scalar potential `V` induces the divergence
//! `D_V(P,Q) = V(det P) − V(det Q) + ν(det Q)⟨Q⁻¹,P⟩ − n·ν(det Q)` with
//! `ν(z) = −zV′(z)`. Projecting the current Hessian approximation onto the
//! secant manifold `{B | Bs = y}` under `D_V` gives the V-BFGS update;
//! `V = −log` recovers BFGS. The crate provides
//!
//! * [`linalg`]: Cholesky factors with rank-one update and downdate;
//! * [`potentials`]: builtin and custom potentials with admissibility checks;
//! * [`geometry`]: divergences, dual coordinates and projection residuals;
//! * [`updates`]: BFGS, DFP, V-BFGS, V-DFP and self-scaling updates;
//! * [`sparse`]: chordal patterns, max-determinant completion and sparse updates;
//! * [`solver`]: a Wolfe line-search quasi-Newton driver and invariance checks;
//! * [`oracle`]: direct Newton minimizers used as independent references.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod potentials;
pub mod roots;
pub mod solver;
pub mod sparse;
pub mod updates;

pub use error::{Error, Result};
pub use geometry::{
    invert_theta, kl_divergence, projection_orthogonality_residual, pythagorean_gap, pythagorean_residual,
    theta_coordinate, v_bregman_divergence, SecantManifold, ThetaPoint,
};
pub use linalg::{CholeskyFactor, PDMatrix, Sign, SymMatrix};
pub use potentials::{Potential, PotentialKind, PotentialReport};
pub use solver::{
    invariance_check, minimize, transform_problem, wolfe_line_search, InvarianceReport, IterationRecord,
    LineSearchParams, Objective, SkipPolicy, SolverConfig, SolverStatus, SolverTrace, SparsityConfig,
};
pub use sparse::{
    clique_factorize, is_chordal, sparse_update, theta_v_project_sparse, CliqueFactorization, CliqueTree,
    SparseAlgorithm, SparseUpdate, SparsityPattern, TraceKind, TraceReference,
};
pub use updates::{
    bfgs_update, dfp_update, self_scaling_update, solve_scaling_equation, v_bfgs_update, v_dfp_update,
    variational_oracle, SecantPair, UpdateFamily,
};
