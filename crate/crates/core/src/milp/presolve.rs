//! Bound tightening and row elimination ahead of branch-and-bound.

use super::problem::{MilpProblem, Relation};
use super::simplex::LpData;

const FEAS_TOL: f64 = 1e-9;
const INT_TOL: f64 = 1e-6;
const MAX_PASSES: usize = 20;

pub(crate) struct Presolved {
    pub lp: LpData,
    pub integer: Vec<bool>,
    /// Original column index of each reduced column.
    pub col_map: Vec<usize>,
    /// Value of every original column removed because its bounds met.
    pub fixed: Vec<Option<f64>>,
    /// Objective contribution of the fixed columns plus the problem offset.
    pub offset: f64,
}

impl Presolved {
    /// Expands a reduced solution to the original column space.
    pub fn postsolve(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (k, &j) in self.col_map.iter().enumerate() {
            full[j] = reduced[k];
        }
        full
    }
}

pub(crate) enum PresolveOutcome {
    Reduced(Presolved),
    Infeasible,
}

struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
    active: bool,
}

fn round_bounds(lo: &mut f64, hi: &mut f64) {
    *lo = (*lo - INT_TOL).ceil();
    *hi = (*hi + INT_TOL).floor();
}

pub(crate) fn presolve(problem: &MilpProblem) -> PresolveOutcome {
    let n = problem.num_vars();
    let mut lo = problem.lower.clone();
    let mut hi = problem.upper.clone();
    let integer = &problem.integer;
    for j in 0..n {
        if integer[j] {
            round_bounds(&mut lo[j], &mut hi[j]);
        }
        if lo[j] > hi[j] + FEAS_TOL {
            return PresolveOutcome::Infeasible;
        }
    }

    let mut rows: Vec<Row> = problem
        .constraints
        .iter()
        .map(|c| {
            let mut coeffs = c.coeffs.clone();
            coeffs.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
            for (j, a) in coeffs {
                match merged.last_mut() {
                    Some((lj, la)) if *lj == j => *la += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|&(_, a)| a != 0.0);
            Row { coeffs: merged, relation: c.relation, rhs: c.rhs, active: true }
        })
        .collect();

    let is_fixed = |lo: &[f64], hi: &[f64], j: usize| hi[j] - lo[j] <= 1e-12;

    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for row in rows.iter_mut().filter(|r| r.active) {
            let mut constant = 0.0;
            let mut free: Vec<(usize, f64)> = Vec::new();
            for &(j, a) in &row.coeffs {
                if is_fixed(&lo, &hi, j) {
                    constant += a * lo[j];
                } else {
                    free.push((j, a));
                }
            }
            let rhs = row.rhs - constant;
            let scale = row.coeffs.iter().fold(1.0_f64, |m, &(_, a)| m.max(a.abs()));
            let tol = FEAS_TOL * scale.max(rhs.abs());

            if free.is_empty() {
                let ok = match row.relation {
                    Relation::Le => 0.0 <= rhs + tol,
                    Relation::Ge => 0.0 >= rhs - tol,
                    Relation::Eq => rhs.abs() <= tol,
                };
                if !ok {
                    return PresolveOutcome::Infeasible;
                }
                row.active = false;
                changed = true;
                continue;
            }

            if free.len() == 1 {
                let (j, a) = free[0];
                let bound = rhs / a;
                let (upper, lower) = match (row.relation, a > 0.0) {
                    (Relation::Le, true) | (Relation::Ge, false) => (Some(bound), None),
                    (Relation::Le, false) | (Relation::Ge, true) => (None, Some(bound)),
                    (Relation::Eq, _) => (Some(bound), Some(bound)),
                };
                if let Some(u) = upper {
                    let u = if integer[j] { (u + INT_TOL).floor() } else { u };
                    if u < hi[j] {
                        hi[j] = u;
                    }
                }
                if let Some(l) = lower {
                    let l = if integer[j] { (l - INT_TOL).ceil() } else { l };
                    if l > lo[j] {
                        lo[j] = l;
                    }
                }
                if lo[j] > hi[j] {
                    if lo[j] - hi[j] > FEAS_TOL * scale.max(1.0) {
                        return PresolveOutcome::Infeasible;
                    }
                    let mid = 0.5 * (lo[j] + hi[j]);
                    lo[j] = mid;
                    hi[j] = mid;
                }
                row.active = false;
                changed = true;
                continue;
            }

            // Activity range of the remaining terms.
            let (mut min_act, mut max_act) = (0.0, 0.0);
            let (mut min_inf, mut max_inf) = (0usize, 0usize);
            for &(j, a) in &free {
                let (l, h) = if a > 0.0 { (a * lo[j], a * hi[j]) } else { (a * hi[j], a * lo[j]) };
                if l.is_finite() { min_act += l } else { min_inf += 1 }
                if h.is_finite() { max_act += h } else { max_inf += 1 }
            }
            let check_le = matches!(row.relation, Relation::Le | Relation::Eq);
            let check_ge = matches!(row.relation, Relation::Ge | Relation::Eq);
            if check_le && min_inf == 0 && min_act > rhs + tol {
                return PresolveOutcome::Infeasible;
            }
            if check_ge && max_inf == 0 && max_act < rhs - tol {
                return PresolveOutcome::Infeasible;
            }
            let redundant = match row.relation {
                Relation::Le => max_inf == 0 && max_act <= rhs + tol,
                Relation::Ge => min_inf == 0 && min_act >= rhs - tol,
                Relation::Eq => false,
            };
            if redundant {
                row.active = false;
                changed = true;
                continue;
            }

            for &(j, a) in &free {
                if !integer[j] {
                    continue;
                }
                if check_le && min_inf == 0 {
                    let contrib = if a > 0.0 { a * lo[j] } else { a * hi[j] };
                    let slack = rhs - (min_act - contrib);
                    if a > 0.0 {
                        let u = (slack / a + INT_TOL).floor();
                        if u < hi[j] {
                            hi[j] = u;
                            changed = true;
                        }
                    } else {
                        let l = (slack / a - INT_TOL).ceil();
                        if l > lo[j] {
                            lo[j] = l;
                            changed = true;
                        }
                    }
                }
                if check_ge && max_inf == 0 {
                    let contrib = if a > 0.0 { a * hi[j] } else { a * lo[j] };
                    let slack = rhs - (max_act - contrib);
                    if a > 0.0 {
                        let l = (slack / a - INT_TOL).ceil();
                        if l > lo[j] {
                            lo[j] = l;
                            changed = true;
                        }
                    } else {
                        let u = (slack / a + INT_TOL).floor();
                        if u < hi[j] {
                            hi[j] = u;
                            changed = true;
                        }
                    }
                }
                if lo[j] > hi[j] {
                    return PresolveOutcome::Infeasible;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut fixed = vec![None; n];
    let mut col_map = Vec::new();
    let mut new_index = vec![usize::MAX; n];
    let mut offset = problem.objective_offset;
    for j in 0..n {
        if is_fixed(&lo, &hi, j) {
            let v = if integer[j] { lo[j].round() } else { lo[j] };
            fixed[j] = Some(v);
            offset += problem.objective[j] * v;
        } else {
            new_index[j] = col_map.len();
            col_map.push(j);
        }
    }
    let mut lp_rows = Vec::new();
    for row in rows.iter().filter(|r| r.active) {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::new();
        for &(j, a) in &row.coeffs {
            match fixed[j] {
                Some(v) => rhs -= a * v,
                None => coeffs.push((new_index[j], a)),
            }
        }
        lp_rows.push((coeffs, row.relation, rhs));
    }
    let lp = LpData::new(
        col_map.len(),
        lp_rows,
        col_map.iter().map(|&j| problem.objective[j]).collect(),
        col_map.iter().map(|&j| lo[j]).collect(),
        col_map.iter().map(|&j| hi[j]).collect(),
    );
    PresolveOutcome::Reduced(Presolved {
        lp,
        integer: col_map.iter().map(|&j| integer[j]).collect(),
        col_map,
        fixed,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::problem::LinExpr;

    #[test]
    fn singleton_rows_become_bounds() {
        let mut p = MilpProblem::new();
        let x = p.add_integer("x", 0.0, 10.0, 1.0);
        let y = p.add_binary("y", 1.0);
        p.add_row("a", LinExpr::new().term(x, 2.0), Relation::Ge, 5.0);
        p.add_row("b", LinExpr::new().term(x, 1.0).term(y, 1.0), Relation::Le, 3.0);
        let PresolveOutcome::Reduced(pre) = presolve(&p) else { panic!("infeasible") };
        // x >= 3 from the singleton, then y <= 0 and x <= 3 from the activity bound.
        assert_eq!(pre.fixed[x.0], Some(3.0));
        assert_eq!(pre.fixed[y.0], Some(0.0));
        assert_eq!(pre.offset, 3.0);
        assert_eq!(pre.lp.num_rows(), 0);
    }

    #[test]
    fn detects_conflicting_rows() {
        let mut p = MilpProblem::new();
        let x = p.add_binary("x", 0.0);
        let y = p.add_binary("y", 0.0);
        p.add_row("a", LinExpr::new().term(x, 1.0).term(y, 1.0), Relation::Ge, 3.0);
        assert!(matches!(presolve(&p), PresolveOutcome::Infeasible));
    }
}
