//! LP-based branch-and-bound.
//!
//! Nodes are explored best-bound first with depth-first plunging: after a
//! branch the child on the side of the rounding direction is solved at once on
//! the working tableau, the sibling goes to the queue. Popped nodes start from a
//! copy of the root tableau with their bound changes replayed and are solved by
//! the dual simplex. Ties in bound go to the most recently created node.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::presolve::{presolve, PresolveOutcome, Presolved};
use super::problem::{MilpError, MilpProblem, MilpSolution, MilpSolver, MilpStatus, SolveLimits};
use super::simplex::{LpStatus, Tableau};

const INT_TOL: f64 = 1e-6;

/// Default [`MilpSolver`]: presolve, dense simplex and best-bound branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBound;

impl MilpSolver for BranchAndBound {
    fn solve(&self, problem: &MilpProblem, limits: &SolveLimits) -> Result<MilpSolution, MilpError> {
        solve(problem, limits)
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    bound: f64,
    changes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound, then newest node, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| self.id.cmp(&other.id))
    }
}

/// Solves `problem` to optimality or until a cap in `limits` is hit.
pub fn solve(problem: &MilpProblem, limits: &SolveLimits) -> Result<MilpSolution, MilpError> {
    let start = Instant::now();
    problem.validate()?;
    let pre = match presolve(problem) {
        PresolveOutcome::Infeasible => {
            let mut sol = MilpSolution::without_incumbent(MilpStatus::Infeasible);
            sol.wall_time_s = start.elapsed().as_secs_f64();
            return Ok(sol);
        }
        PresolveOutcome::Reduced(p) => p,
    };
    let mut search = Search::new(problem, &pre, limits, start);
    search.run()?;
    Ok(search.finish())
}

/// Solves the continuous relaxation of `problem` (integrality dropped, no presolve).
pub fn solve_lp_relaxation(problem: &MilpProblem) -> Result<LpRelaxation, MilpError> {
    problem.validate()?;
    let rows = problem
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs))
        .collect();
    let lp = super::simplex::LpData::new(
        problem.num_vars(),
        rows,
        problem.objective.clone(),
        problem.lower.clone(),
        problem.upper.clone(),
    );
    let mut tab = Tableau::new(&lp);
    let status = match tab.solve()? {
        LpStatus::Optimal => MilpStatus::Optimal,
        LpStatus::Unbounded => MilpStatus::Unbounded,
        _ => MilpStatus::Infeasible,
    };
    let (values, duals) = if status == MilpStatus::Optimal {
        let duals = tab
            .scaled_duals()
            .iter()
            .zip(&lp.row_scale)
            .map(|(y, s)| y / s)
            .collect();
        (tab.structural_values().to_vec(), duals)
    } else {
        (Vec::new(), Vec::new())
    };
    let objective = if status == MilpStatus::Optimal {
        problem.objective_value(&values)
    } else {
        f64::NAN
    };
    Ok(LpRelaxation { status, values, duals, objective, iterations: tab.iterations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRelaxation {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    /// One multiplier per constraint: the objective change per unit increase of its right-hand side.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: u64,
}

struct Search<'a> {
    problem: &'a MilpProblem,
    pre: &'a Presolved,
    limits: &'a SolveLimits,
    start: Instant,
    incumbent: Option<(Vec<f64>, f64)>,
    nodes: u64,
    iterations: u64,
    next_id: u64,
    status: Option<MilpStatus>,
    open_bound: f64,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MilpProblem, pre: &'a Presolved, limits: &'a SolveLimits, start: Instant) -> Self {
        Self {
            problem,
            pre,
            limits,
            start,
            incumbent: None,
            nodes: 0,
            iterations: 0,
            next_id: 0,
            status: None,
            open_bound: f64::INFINITY,
        }
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((_, obj)) => obj - self.limits.abs_gap,
            None => f64::INFINITY,
        }
    }

    fn capped(&self) -> bool {
        if let Some(cap) = self.limits.node_cap {
            if self.nodes >= cap {
                return true;
            }
        }
        if let Some(cap) = self.limits.time_cap {
            if self.start.elapsed() >= cap {
                return true;
            }
        }
        false
    }

    /// Most fractional integer column; ties go to the lowest index.
    fn branching_candidate(&self, values: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_dist = INT_TOL;
        for (j, &v) in values.iter().enumerate() {
            if !self.pre.integer[j] {
                continue;
            }
            let frac = v - v.floor();
            let dist = frac.min(1.0 - frac);
            if dist > best_dist {
                best_dist = dist;
                best = Some((j, v));
            }
        }
        best
    }

    fn record_incumbent(&mut self, reduced: &[f64]) {
        let mut values = self.pre.postsolve(reduced);
        for (j, v) in values.iter_mut().enumerate() {
            if self.problem.integer[j] {
                *v = v.round();
            }
        }
        let obj = self.problem.objective_value(&values);
        let better = match &self.incumbent {
            None => true,
            Some((_, cur)) => obj < *cur,
        };
        if better {
            self.incumbent = Some((values, obj));
        }
    }

    fn run(&mut self) -> Result<(), MilpError> {
        let mut root = Tableau::new(&self.pre.lp);
        let root_status = root.solve()?;
        self.iterations += root.iterations;
        self.nodes = 1;
        match root_status {
            LpStatus::Infeasible | LpStatus::Cutoff => {
                self.status = Some(MilpStatus::Infeasible);
                return Ok(());
            }
            LpStatus::Unbounded => {
                self.status = Some(MilpStatus::Unbounded);
                return Ok(());
            }
            LpStatus::Optimal => {}
        }
        root.iterations = 0;

        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut current: Option<(Node, Tableau)> = Some((
            Node { id: self.bump_id(), bound: root.objective(), changes: Vec::new() },
            root.clone(),
        ));
        let mut solved_current = true;

        loop {
            let (node, mut tab) = match current.take() {
                Some(c) => c,
                None => {
                    let Some(node) = heap.pop() else { break };
                    if node.bound + self.pre.offset >= self.cutoff() {
                        continue;
                    }
                    if self.capped() {
                        heap.push(node);
                        break;
                    }
                    let mut tab = root.clone();
                    for &(j, lo, hi) in &node.changes {
                        let (l0, h0) = tab.bounds(j);
                        tab.set_bounds(j, l0.max(lo), h0.min(hi));
                    }
                    solved_current = false;
                    (node, tab)
                }
            };
            if !solved_current {
                self.nodes += 1;
                let cutoff = self.cutoff() - self.pre.offset;
                let status = tab.reoptimize(cutoff)?;
                self.iterations += tab.iterations;
                tab.iterations = 0;
                match status {
                    LpStatus::Optimal => {}
                    LpStatus::Infeasible | LpStatus::Cutoff => continue,
                    LpStatus::Unbounded => {
                        // Bounded root relaxation cannot become unbounded under tighter bounds.
                        continue;
                    }
                }
            }
            solved_current = false;
            let obj = tab.objective();
            if obj + self.pre.offset >= self.cutoff() {
                continue;
            }
            let values = tab.structural_values().to_vec();
            let Some((j, v)) = self.branching_candidate(&values) else {
                self.record_incumbent(&values);
                continue;
            };
            let (lo, hi) = tab.bounds(j);
            let down = (j, lo, v.floor());
            let up = (j, v.ceil(), hi);
            let plunge_up = v - v.floor() >= 0.5;
            let (first, second) = if plunge_up { (up, down) } else { (down, up) };
            let mut other = node.changes.clone();
            other.push(second);
            heap.push(Node { id: self.bump_id(), bound: obj, changes: other });
            if self.capped() {
                let mut changes = node.changes;
                changes.push(first);
                heap.push(Node { id: self.bump_id(), bound: obj, changes });
                break;
            }
            let mut changes = node.changes;
            changes.push(first);
            tab.set_bounds(first.0, first.1, first.2);
            current = Some((Node { id: self.bump_id(), bound: obj, changes }, tab));
        }

        let cutoff = self.cutoff();
        heap.retain(|n| n.bound + self.pre.offset < cutoff);
        if let Some(best) = heap.peek() {
            self.open_bound = best.bound + self.pre.offset;
            self.status = Some(MilpStatus::GapLimit);
        }
        Ok(())
    }

    fn bump_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn finish(self) -> MilpSolution {
        let wall = self.start.elapsed().as_secs_f64();
        let status = match self.status {
            Some(s) => s,
            None if self.incumbent.is_some() => MilpStatus::Optimal,
            None => MilpStatus::Infeasible,
        };
        let mut sol = match (status, self.incumbent) {
            (MilpStatus::Optimal | MilpStatus::GapLimit, Some((values, obj))) => MilpSolution {
                status,
                bound: if status == MilpStatus::Optimal { obj } else { self.open_bound.min(obj) },
                values,
                objective: obj,
                nodes_explored: 0,
                simplex_iterations: 0,
                wall_time_s: 0.0,
            },
            (MilpStatus::GapLimit, None) => {
                let mut s = MilpSolution::without_incumbent(MilpStatus::GapLimit);
                s.bound = self.open_bound;
                s
            }
            (s, _) => MilpSolution::without_incumbent(s),
        };
        sol.nodes_explored = self.nodes;
        sol.simplex_iterations = self.iterations;
        sol.wall_time_s = wall;
        sol
    }
}
