//! Bounded-variable simplex on a dense tableau.
//!
//! Every row `i` carries a logical column `n + i` so the system reads
//! `A x + s = b` with `s` bounded according to the row relation. The tableau
//! stores `B^-1 [A | I | b]`; rows are updated only where the pivot column is
//! nonzero, which keeps the sparse structure of routing models cheap to pivot.
//!
//! Primal phase one minimizes the sum of bound infeasibilities, phase two is a
//! textbook primal simplex, and the dual simplex re-optimizes after bound
//! changes inside branch-and-bound. Dantzig pricing with a Harris ratio test is
//! used until a run of degenerate pivots triggers Bland's rule.

use super::problem::{MilpError, Relation};

const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
const DEGENERATE_RUN: usize = 50;
const NONBASIC: usize = usize::MAX;

/// Row-scaled linear system handed to the tableau.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub num_cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
    /// Divisor applied to each row; duals of the original rows are `y' / scale`.
    pub row_scale: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    pub fn new(
        num_cols: usize,
        rows: Vec<(Vec<(usize, f64)>, Relation, f64)>,
        cost: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Self {
        let mut data = LpData {
            num_cols,
            rows: Vec::with_capacity(rows.len()),
            relations: Vec::with_capacity(rows.len()),
            rhs: Vec::with_capacity(rows.len()),
            row_scale: Vec::with_capacity(rows.len()),
            cost,
            lower,
            upper,
        };
        for (coeffs, rel, rhs) in rows {
            let scale = coeffs.iter().fold(0.0_f64, |m, &(_, a)| m.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            data.rows.push(coeffs.into_iter().map(|(j, a)| (j, a / scale)).collect());
            data.relations.push(rel);
            data.rhs.push(rhs / scale);
            data.row_scale.push(scale);
        }
        data
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Dual simplex objective passed the cutoff.
    Cutoff,
}

#[derive(Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    stride: usize,
    t: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    pub iterations: u64,
    pub iteration_limit: u64,
    scratch: Vec<(usize, f64)>,
}

enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    fn sign(&self) -> f64 {
        match self {
            Direction::Increase => 1.0,
            Direction::Decrease => -1.0,
        }
    }
}

impl Tableau {
    pub fn new(lp: &LpData) -> Self {
        let m = lp.num_rows();
        let n = lp.num_cols;
        let ncols = n + m;
        let stride = ncols + 1;
        let mut t = vec![0.0; m * stride];
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        let mut cost = lp.cost.clone();
        cost.resize(ncols, 0.0);
        for (i, row) in lp.rows.iter().enumerate() {
            let base = i * stride;
            for &(j, a) in row {
                t[base + j] += a;
            }
            t[base + n + i] = 1.0;
            t[base + ncols] = lp.rhs[i];
            let (l, h) = match lp.relations[i] {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            x[j] = initial_nonbasic_value(lo[j], hi[j], cost[j]);
        }
        let basis: Vec<usize> = (n..ncols).collect();
        let mut row_of = vec![NONBASIC; ncols];
        for (i, &b) in basis.iter().enumerate() {
            row_of[b] = i;
        }
        let d = cost.clone();
        let mut tab = Tableau {
            m,
            n,
            ncols,
            stride,
            t,
            d,
            cost,
            lo,
            hi,
            x,
            basis,
            row_of,
            iterations: 0,
            iteration_limit: 0,
            scratch: Vec::new(),
        };
        tab.iteration_limit = 200 * (m as u64 + ncols as u64) + 10_000;
        tab.recompute_basic_values();
        tab
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.stride + j]
    }

    pub fn structural_values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Row duals of the scaled system (`y' = c_B B^-1`).
    pub fn scaled_duals(&self) -> Vec<f64> {
        (0..self.m).map(|i| -self.d[self.n + i]).collect()
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    fn is_basic(&self, j: usize) -> bool {
        self.row_of[j] != NONBASIC
    }

    /// Tightens or replaces the bounds of a structural column, moving a nonbasic
    /// value onto the new box so the tableau stays consistent.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.is_basic(j) {
            return;
        }
        let old = self.x[j];
        let mut new = old;
        if new < lo || new > hi || !(new == lo || new == hi) {
            new = if self.d[j] > 0.0 {
                if lo.is_finite() { lo } else { hi }
            } else if self.d[j] < 0.0 {
                if hi.is_finite() { hi } else { lo }
            } else {
                new.clamp(lo, hi)
            };
            if !new.is_finite() {
                new = 0.0_f64.clamp(lo, hi);
            }
        }
        if new != old {
            self.move_nonbasic(j, new - old);
        }
    }

    fn move_nonbasic(&mut self, j: usize, delta: f64) {
        self.x[j] += delta;
        for i in 0..self.m {
            let a = self.at(i, j);
            if a != 0.0 {
                let b = self.basis[i];
                self.x[b] -= a * delta;
            }
        }
    }

    pub fn recompute_basic_values(&mut self) {
        let nonzero: Vec<(usize, f64)> = (0..self.ncols)
            .filter(|&j| !self.is_basic(j) && self.x[j] != 0.0)
            .map(|j| (j, self.x[j]))
            .collect();
        for i in 0..self.m {
            let base = i * self.stride;
            let mut v = self.t[base + self.ncols];
            for &(j, xj) in &nonzero {
                v -= self.t[base + j] * xj;
            }
            let b = self.basis[i];
            self.x[b] = v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let base = i * self.stride;
            for j in 0..self.ncols {
                let a = self.t[base + j];
                if a != 0.0 {
                    d[j] -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let stride = self.stride;
        let prow = r * stride;
        let inv = 1.0 / self.t[prow + q];
        let mut row = std::mem::take(&mut self.scratch);
        row.clear();
        for j in 0..stride {
            let v = self.t[prow + j];
            if v != 0.0 {
                let scaled = v * inv;
                self.t[prow + j] = scaled;
                row.push((j, scaled));
            }
        }
        self.t[prow + q] = 1.0;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let base = i * stride;
            let f = self.t[base + q];
            if f == 0.0 {
                continue;
            }
            for &(j, p) in &row {
                let v = self.t[base + j] - f * p;
                self.t[base + j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            self.t[base + q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, p) in &row {
                if j < self.ncols {
                    self.d[j] -= f * p;
                }
            }
        }
        self.d[q] = 0.0;
        self.scratch = row;
        let leaving = self.basis[r];
        self.row_of[leaving] = NONBASIC;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.iterations += 1;
    }

    fn check_limit(&self) -> Result<(), MilpError> {
        if self.iterations > self.iteration_limit {
            Err(MilpError::IterationLimit(self.iterations as usize))
        } else {
            Ok(())
        }
    }

    /// Chooses an entering column for reduced costs `d`.
    fn price(&self, d: &[f64], bland: bool) -> Option<(usize, Direction)> {
        let mut best: Option<(usize, Direction)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.is_basic(j) || self.hi[j] - self.lo[j] <= 1e-12 {
                continue;
            }
            let dj = d[j];
            let dir = if dj < -DUAL_TOL && self.x[j] < self.hi[j] - PRIMAL_TOL * 1e-3 {
                Direction::Increase
            } else if dj > DUAL_TOL && self.x[j] > self.lo[j] + PRIMAL_TOL * 1e-3 {
                Direction::Decrease
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    /// Ratio test for a primal step along column `q`. With `phase_one` set,
    /// infeasible basics only block when they reach the violated bound.
    /// Returns `(row, step)`; `row == None` with a finite step is a bound flip.
    fn primal_ratio(&self, q: usize, dir: &Direction, phase_one: bool, bland: bool) -> Option<(Option<usize>, f64)> {
        let sign = dir.sign();
        let own = self.hi[q] - self.lo[q];
        // First pass (Harris): relaxed bound on the step.
        let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new();
        for i in 0..self.m {
            let a = self.at(i, q);
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let rate = -sign * a;
            let b = self.basis[i];
            let (xb, lo, hi) = (self.x[b], self.lo[b], self.hi[b]);
            let dist = if rate < 0.0 {
                if phase_one && xb < lo - PRIMAL_TOL {
                    continue;
                }
                if phase_one && xb > hi + PRIMAL_TOL {
                    xb - hi
                } else if lo.is_finite() {
                    xb - lo
                } else {
                    continue;
                }
            } else {
                if phase_one && xb > hi + PRIMAL_TOL {
                    continue;
                }
                if phase_one && xb < lo - PRIMAL_TOL {
                    lo - xb
                } else if hi.is_finite() {
                    hi - xb
                } else {
                    continue;
                }
            };
            limits.push((i, dist.max(0.0), rate.abs(), a.abs()));
        }
        if limits.is_empty() {
            return if own.is_finite() { Some((None, own)) } else { None };
        }
        if bland {
            let mut best: Option<(usize, f64)> = None;
            for &(i, dist, rate, _) in &limits {
                let ratio = dist / rate;
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
            let (i, ratio) = best.unwrap();
            if own.is_finite() && own <= ratio {
                return Some((None, own));
            }
            return Some((Some(i), ratio));
        }
        let relaxed = limits
            .iter()
            .map(|&(_, dist, rate, _)| (dist + PRIMAL_TOL) / rate)
            .fold(f64::INFINITY, f64::min);
        if own.is_finite() && own <= relaxed {
            return Some((None, own));
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for &(i, dist, rate, mag) in &limits {
            let ratio = dist / rate;
            if ratio <= relaxed {
                let better = match best {
                    None => true,
                    Some((_, _, bm)) => mag > bm,
                };
                if better {
                    best = Some((i, ratio, mag));
                }
            }
        }
        let (i, ratio, _) = best.unwrap();
        Some((Some(i), ratio))
    }

    /// Applies a primal step of length `step` along `q` and pivots if a basic variable blocks.
    fn primal_step(&mut self, q: usize, dir: &Direction, row: Option<usize>, step: f64) {
        let sign = dir.sign();
        let delta = sign * step;
        match row {
            None => {
                let target = match dir {
                    Direction::Increase => self.hi[q],
                    Direction::Decrease => self.lo[q],
                };
                let actual = target - self.x[q];
                self.move_nonbasic(q, actual);
                self.x[q] = target;
            }
            Some(r) => {
                let leaving = self.basis[r];
                let a = self.at(r, q);
                let rate = -sign * a;
                let lb = self.lo[leaving];
                let ub = self.hi[leaving];
                let xb = self.x[leaving];
                let target = if rate < 0.0 {
                    if xb > ub + PRIMAL_TOL { ub } else { lb }
                } else if xb < lb - PRIMAL_TOL {
                    lb
                } else {
                    ub
                };
                self.move_nonbasic(q, delta);
                self.pivot(r, q);
                self.x[leaving] = target;
            }
        }
    }

    /// Minimizes the sum of infeasibilities; returns whether a feasible basis was found.
    pub fn phase_one(&mut self) -> Result<bool, MilpError> {
        let mut degenerate = 0usize;
        let mut d1 = vec![0.0; self.ncols];
        loop {
            self.check_limit()?;
            d1.iter_mut().for_each(|v| *v = 0.0);
            let mut any = false;
            for i in 0..self.m {
                let b = self.basis[i];
                let w = if self.x[b] < self.lo[b] - PRIMAL_TOL {
                    -1.0
                } else if self.x[b] > self.hi[b] + PRIMAL_TOL {
                    1.0
                } else {
                    continue;
                };
                any = true;
                let base = i * self.stride;
                for j in 0..self.ncols {
                    let a = self.t[base + j];
                    if a != 0.0 {
                        d1[j] -= w * a;
                    }
                }
            }
            if !any {
                return Ok(true);
            }
            for &b in &self.basis {
                d1[b] = 0.0;
            }
            let bland = degenerate > DEGENERATE_RUN;
            let Some((q, dir)) = self.price(&d1, bland) else {
                return Ok(false);
            };
            let Some((row, step)) = self.primal_ratio(q, &dir, true, bland) else {
                // The infeasibility sum is bounded below; an unblocked improving ray is numerical noise.
                self.recompute_basic_values();
                degenerate = DEGENERATE_RUN + 1;
                continue;
            };
            if step < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.primal_step(q, &dir, row, step);
        }
    }

    pub fn primal(&mut self) -> Result<LpStatus, MilpError> {
        let mut degenerate = 0usize;
        loop {
            self.check_limit()?;
            let bland = degenerate > DEGENERATE_RUN;
            let d = std::mem::take(&mut self.d);
            let choice = self.price(&d, bland);
            self.d = d;
            let Some((q, dir)) = choice else {
                return Ok(LpStatus::Optimal);
            };
            let Some((row, step)) = self.primal_ratio(q, &dir, false, bland) else {
                return Ok(LpStatus::Unbounded);
            };
            if step < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.primal_step(q, &dir, row, step);
        }
    }

    /// Solves from the current basis: phase one, then phase two.
    pub fn solve(&mut self) -> Result<LpStatus, MilpError> {
        if !self.phase_one()? {
            return Ok(LpStatus::Infeasible);
        }
        self.recompute_reduced_costs();
        let status = self.primal()?;
        self.recompute_basic_values();
        Ok(status)
    }

    fn max_dual_infeasibility(&self) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.ncols {
            if self.is_basic(j) || self.hi[j] - self.lo[j] <= 1e-12 {
                continue;
            }
            let dj = self.d[j];
            if dj < 0.0 && self.x[j] < self.hi[j] - 1e-10 {
                worst = worst.max(-dj);
            }
            if dj > 0.0 && self.x[j] > self.lo[j] + 1e-10 {
                worst = worst.max(dj);
            }
        }
        worst
    }

    /// Dual simplex from a dual feasible basis after bound changes, followed by
    /// a primal clean-up pass. Stops early once the objective exceeds `cutoff`.
    pub fn reoptimize(&mut self, cutoff: f64) -> Result<LpStatus, MilpError> {
        let mut degenerate = 0usize;
        let mut z = self.objective();
        let mut refresh = 0usize;
        loop {
            self.check_limit()?;
            if z > cutoff + 1e-9 * (1.0 + z.abs()) {
                let exact = self.objective();
                if exact > cutoff {
                    return Ok(LpStatus::Cutoff);
                }
                z = exact;
            }
            let bland = degenerate > DEGENERATE_RUN;
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let viol = if self.x[b] < self.lo[b] - PRIMAL_TOL {
                    self.lo[b] - self.x[b]
                } else if self.x[b] > self.hi[b] + PRIMAL_TOL {
                    self.x[b] - self.hi[b]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((bi, bv)) => {
                        if bland {
                            b < self.basis[bi]
                        } else {
                            viol > bv
                        }
                    }
                };
                if better {
                    leave = Some((i, viol));
                }
            }
            let Some((r, _)) = leave else {
                break;
            };
            let b = self.basis[r];
            let increase = self.x[b] < self.lo[b];
            let target = if increase { self.lo[b] } else { self.hi[b] };
            // Entering column: ratio |d_j| / |a_rj| over columns that move x_b toward its bound.
            let base = r * self.stride;
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..self.ncols {
                let a = self.t[base + j];
                if a.abs() < PIVOT_TOL || self.is_basic(j) || self.hi[j] - self.lo[j] <= 1e-12 {
                    continue;
                }
                // x_b changes by -a * dx_j.
                let want_dx_positive = (a < 0.0) == increase;
                let can = if want_dx_positive {
                    self.x[j] < self.hi[j] - 1e-12
                } else {
                    self.x[j] > self.lo[j] + 1e-12
                };
                if !can {
                    continue;
                }
                let dj = self.d[j];
                let dual_slack = if want_dx_positive { dj } else { -dj };
                cands.push((j, dual_slack.max(0.0), a.abs()));
            }
            if cands.is_empty() {
                return Ok(LpStatus::Infeasible);
            }
            let q = if bland {
                let mut best = cands[0];
                for &c in &cands[1..] {
                    let (r0, r1) = (best.1 / best.2, c.1 / c.2);
                    if r1 < r0 - 1e-12 || (r1 <= r0 + 1e-12 && c.0 < best.0) {
                        best = c;
                    }
                }
                best.0
            } else {
                let relaxed = cands
                    .iter()
                    .map(|&(_, s, mag)| (s + DUAL_TOL) / mag)
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<(usize, f64)> = None;
                for &(j, s, mag) in &cands {
                    if s / mag <= relaxed && best.map_or(true, |(_, bm)| mag > bm) {
                        best = Some((j, mag));
                    }
                }
                best.unwrap().0
            };
            let a = self.at(r, q);
            let dx = (self.x[b] - target) / a;
            let ratio = self.d[q].abs() / a.abs();
            if ratio < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            z += self.d[q] * dx;
            self.move_nonbasic(q, dx);
            self.pivot(r, q);
            self.x[b] = target;
            refresh += 1;
            if refresh % 100 == 0 {
                self.recompute_basic_values();
            }
        }
        self.recompute_basic_values();
        if self.max_dual_infeasibility() > DUAL_TOL {
            if !self.phase_one()? {
                return Ok(LpStatus::Infeasible);
            }
            let status = self.primal()?;
            self.recompute_basic_values();
            if status != LpStatus::Optimal {
                return Ok(status);
            }
        }
        if self.objective() > cutoff {
            return Ok(LpStatus::Cutoff);
        }
        Ok(LpStatus::Optimal)
    }
}

fn initial_nonbasic_value(lo: f64, hi: f64, cost: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            if cost < 0.0 {
                hi
            } else {
                lo
            }
        }
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}
