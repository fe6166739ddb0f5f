//! CPLEX LP text output.

use std::fmt::Write;

use super::problem::MilpProblem;

fn push_terms(out: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) -> bool {
    let mut first = true;
    for (j, a) in terms {
        if a == 0.0 {
            continue;
        }
        let sign = if a < 0.0 { "-" } else { "+" };
        let mag = a.abs();
        if first {
            if a < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        if mag == 1.0 {
            let _ = write!(out, " {}", names[j]);
        } else {
            let _ = write!(out, " {} {}", mag, names[j]);
        }
        first = false;
    }
    !first
}

fn bound_text(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Renders `problem` in LP format: objective terms in column order, rows in
/// insertion order, one bounds line per column, then the integer sections.
pub fn to_lp_string(problem: &MilpProblem) -> String {
    let names = &problem.names;
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    let any = push_terms(&mut out, problem.objective.iter().copied().enumerate(), names);
    if problem.objective_offset != 0.0 {
        let c = problem.objective_offset;
        if any {
            let _ = write!(out, " {} {}", if c < 0.0 { "-" } else { "+" }, c.abs());
        } else {
            let _ = write!(out, " {c}");
        }
    } else if !any {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    for c in &problem.constraints {
        let _ = write!(out, " {}:", c.name);
        if !push_terms(&mut out, c.coeffs.iter().copied(), names) {
            out.push_str(" 0");
        }
        let _ = writeln!(out, " {} {}", c.relation.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..problem.num_vars() {
        let (lo, hi) = (problem.lower[j], problem.upper[j]);
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " {} free", names[j]);
        } else if lo == hi {
            let _ = writeln!(out, " {} = {}", names[j], lo);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", bound_text(lo), names[j], bound_text(hi));
        }
    }
    let is_binary = |j: usize| problem.integer[j] && problem.lower[j] == 0.0 && problem.upper[j] == 1.0;
    let generals: Vec<&str> = (0..problem.num_vars())
        .filter(|&j| problem.integer[j] && !is_binary(j))
        .map(|j| names[j].as_str())
        .collect();
    let binaries: Vec<&str> = (0..problem.num_vars())
        .filter(|&j| is_binary(j))
        .map(|j| names[j].as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for name in generals {
            let _ = writeln!(out, " {name}");
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::problem::{LinExpr, Relation};

    #[test]
    fn small_model_text() {
        let mut p = MilpProblem::new();
        let a = p.add_binary("a", -3.0);
        let b = p.add_integer("b", 0.0, 4.0, 2.5);
        let c = p.add_continuous("c", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        p.add_row("r1", LinExpr::new().term(a, 1.0).term(b, -2.0).term(c, 1.0), Relation::Le, 1.0);
        let text = to_lp_string(&p);
        assert_eq!(
            text,
            "Minimize\n obj: - 3 a + 2.5 b\nSubject To\n r1: a - 2 b + c <= 1\nBounds\n 0 <= a <= 1\n 0 <= b <= 4\n c free\nGenerals\n b\nBinaries\n a\nEnd\n"
        );
    }
}
