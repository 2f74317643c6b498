//! Best uniform approximation of functions given by their values on a
//! finite point set.
//!
//! The model is an affine combination `a0 + a1 g1(x) + ... + an gn(x)` of
//! user-chosen basis functions. The solver keeps a working set of n+2 grid
//! points split into two signed groups, fits the unique model that deviates
//! by a common amount sigma with alternating signs on that set, and then
//! repeatedly swaps in a point where the residual exceeds sigma. Each swap
//! is chosen so that the two groups keep straddling each other in the
//! lifted coordinates `(g1(x), ..., gn(x))`, which forces sigma to grow
//! monotonically until no grid point beats it.
//!
//! Optimality is certified geometrically: the deviation sigma is best
//! possible exactly when the convex hulls of the lifted positive-extreme
//! and negative-extreme points intersect. [`solver::solve_minimax`] runs
//! the exchange to termination and returns that certificate, while
//! [`oracle::lp_minimax`] solves the same problem as a linear program so
//! the two routes can be compared.

pub mod bases;
pub mod exchange;
pub mod geometry;
pub mod interpolation;
pub mod numerics;
pub mod oracle;
pub mod problem;
pub mod solver;

pub use problem::{
    deviation_profile, evaluate_model, extreme_sets, BasisFamily, BasisFn, CoefficientVector,
    DeviationProfile, DiscreteDomain, Problem, ProblemError,
};
pub use solver::{
    solve_minimax, OptimalityCertificate, SingularityPolicy, SolveOptions, SolveResult,
    SolveStatus, SolverError,
};
