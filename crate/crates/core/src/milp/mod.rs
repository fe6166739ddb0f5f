//! Mixed-integer linear programming: problem container, simplex, presolve and branch-and-bound.

mod bnb;
mod lp_format;
mod presolve;
mod problem;
mod simplex;

pub use bnb::{solve, solve_lp_relaxation, BranchAndBound, LpRelaxation};
pub use lp_format::to_lp_string;
pub use problem::{
    Constraint, LinExpr, MilpError, MilpProblem, MilpSolution, MilpSolver, MilpStatus, Relation, SolveLimits, VarId,
};
