use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a column in a [`MilpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse row; indices may repeat, repeated entries are summed.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Violation of the row divided by its largest absolute coefficient.
    pub fn scaled_violation(&self, values: &[f64]) -> f64 {
        let norm = self
            .coeffs
            .iter()
            .fold(0.0_f64, |acc, &(_, a)| acc.max(a.abs()))
            .max(1.0);
        let lhs = self.activity(values);
        let raw = match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        };
        raw / norm
    }
}

/// Linear expression used while assembling models: `sum(coef * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn term(mut self, var: VarId, coef: f64) -> Self {
        self.add_term(var, coef);
        self
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }
}

/// Bounded mixed-integer linear program in minimization form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    /// Constant added to every objective value.
    pub objective_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MilpError {
    #[error("variable {var} has lower bound {lo} above upper bound {hi}")]
    InvertedBounds { var: usize, lo: f64, hi: f64 },
    #[error("non-finite coefficient in {location}")]
    NonFinite { location: String },
    #[error("constraint {row} references variable {var} but the problem has {num_vars}")]
    IndexOutOfRange { row: usize, var: usize, num_vars: usize },
    #[error("inconsistent column vector lengths")]
    Shape,
    #[error("simplex iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: f64, hi: f64, integer: bool, cost: f64) -> VarId {
        let id = VarId(self.objective.len());
        self.names.push(name.into());
        self.objective.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.integer.push(integer);
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, true, cost)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lo: f64, hi: f64, cost: f64) -> VarId {
        self.add_var(name, lo, hi, true, cost)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64, cost: f64) -> VarId {
        self.add_var(name, lo, hi, false, cost)
    }

    pub fn add_cost(&mut self, var: VarId, cost: f64) {
        self.objective[var.0] += cost;
    }

    /// Adds `expr (relation) rhs`; the expression constant moves to the right-hand side.
    pub fn add_row(&mut self, name: impl Into<String>, expr: LinExpr, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: expr.terms.into_iter().map(|(v, a)| (v.0, a)).collect(),
            relation,
            rhs: rhs - expr.constant,
        });
    }

    pub fn add_constraint(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n || self.names.len() != n {
            return Err(MilpError::Shape);
        }
        for j in 0..n {
            if self.objective[j].is_nan() || self.objective[j].is_infinite() {
                return Err(MilpError::NonFinite { location: format!("objective[{j}]") });
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(MilpError::NonFinite { location: format!("bounds[{j}]") });
            }
            if self.lower[j] > self.upper[j] {
                return Err(MilpError::InvertedBounds { var: j, lo: self.lower[j], hi: self.upper[j] });
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(MilpError::NonFinite { location: "objective offset".into() });
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(MilpError::NonFinite { location: format!("rhs of row {r}") });
            }
            for &(j, a) in &c.coeffs {
                if j >= n {
                    return Err(MilpError::IndexOutOfRange { row: r, var: j, num_vars: n });
                }
                if !a.is_finite() {
                    return Err(MilpError::NonFinite { location: format!("row {r}, column {j}") });
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().zip(values).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Largest row-scaled violation of constraints and bounds.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.scaled_violation(values))
            .fold(0.0, f64::max);
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - values[j]).max(values[j] - self.upper[j]).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        (0..self.num_vars())
            .filter(|&j| self.integer[j])
            .map(|j| (values[j] - values[j].round()).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// A node or time cap stopped the search; `values` hold the best incumbent, if any.
    GapLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub nodes_explored: u64,
    pub simplex_iterations: u64,
    pub wall_time_s: f64,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        matches!(self.status, MilpStatus::Optimal | MilpStatus::GapLimit) && !self.values.is_empty()
    }

    pub(crate) fn without_incumbent(status: MilpStatus) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective: f64::INFINITY,
            bound: f64::NEG_INFINITY,
            nodes_explored: 0,
            simplex_iterations: 0,
            wall_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    pub node_cap: Option<u64>,
    pub time_cap: Option<Duration>,
    pub abs_gap: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { node_cap: None, time_cap: None, abs_gap: 1e-6 }
    }
}

impl SolveLimits {
    pub fn with_time_cap(mut self, cap: Duration) -> Self {
        self.time_cap = Some(cap);
        self
    }

    pub fn with_node_cap(mut self, cap: u64) -> Self {
        self.node_cap = Some(cap);
        self
    }
}

/// Anything able to solve a [`MilpProblem`]. Model builders only depend on this trait,
/// so an external engine can be plugged in behind it.
pub trait MilpSolver: Send + Sync {
    fn solve(&self, problem: &MilpProblem, limits: &SolveLimits) -> Result<MilpSolution, MilpError>;
}
