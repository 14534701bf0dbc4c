//! Bounded-variable revised simplex, two phases, with an explicit dense basis
//! inverse updated by pivoting and refactorized periodically.

use serde::{Deserialize, Serialize};

use super::{LinearProgram, Relation};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values; empty unless optimal.
    pub primal: Vec<f64>,
    /// Includes the program's offset. `+inf` when infeasible, `-inf` when
    /// unbounded.
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Largest accepted absolute residual of the returned point.
    pub tolerance: f64,
    /// Reduced-cost threshold for optimality.
    pub optimality_tol: f64,
    /// Pivots below this magnitude are never taken.
    pub pivot_tol: f64,
    /// `None` picks a cap from the problem size.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degeneracy_threshold: usize,
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-7,
            optimality_tol: 1e-9,
            pivot_tol: 1e-7,
            max_iterations: None,
            degeneracy_threshold: 50,
            refactor_every: 100,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram, tolerance: f64) -> Result<LpSolution> {
    solve_lp_with(lp, &SolverOptions { tolerance, ..SolverOptions::default() })
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpSolution> {
    let mut t = Tableau::new(lp, opts)?;
    let n = lp.num_vars();
    let m = lp.num_rows();

    // Phase 1: drive the artificials to zero.
    let mut phase1 = vec![0.0; t.cols.len()];
    for c in &mut phase1[n + m..] {
        *c = 1.0;
    }
    if t.basis.iter().any(|&b| b >= n + m) {
        match t.run(&phase1, 1)? {
            Outcome::Optimal => {}
            Outcome::Unbounded => return Err(Error::Numerical("phase 1 reported an unbounded ray".into())),
        }
        let worst = (n + m..t.cols.len()).map(|j| t.x[j]).fold(0.0, f64::max);
        if worst > opts.tolerance {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                objective: f64::INFINITY,
                iterations: t.iterations,
            });
        }
    }
    for j in n + m..t.cols.len() {
        t.hi[j] = 0.0;
        if t.state[j] != State::Basic {
            t.state[j] = State::Lower;
            t.x[j] = 0.0;
        }
    }

    let mut phase2 = vec![0.0; t.cols.len()];
    phase2[..n].copy_from_slice(lp.costs());
    match t.run(&phase2, 2)? {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                objective: f64::NEG_INFINITY,
                iterations: t.iterations,
            })
        }
    }
    let primal: Vec<f64> = (0..n).map(|j| t.x[j].clamp(lp.lower(j), lp.upper(j))).collect();
    let violation = lp.max_violation(&primal);
    if !(violation <= opts.tolerance) {
        return Err(Error::Numerical(format!(
            "simplex point violates constraints by {violation:e} after {} iterations ({m} rows, {n} columns)",
            t.iterations
        )));
    }
    Ok(LpSolution { status: LpStatus::Optimal, objective: lp.objective_value(&primal), primal, iterations: t.iterations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum Outcome {
    Optimal,
    Unbounded,
}

/// Columns are structurals, then one slack per row, then one artificial per
/// row. Row `i` reads `A_i x + s_i (+/- a_i) = b_i`.
struct Tableau<'a> {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    rhs: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    /// Row-major `m x m`.
    binv: Vec<f64>,
    opts: &'a SolverOptions,
    cap: usize,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Tableau<'a> {
    /// Starting basis: per row, the slack when it can absorb the residual,
    /// else a structural column that keeps the basis triangular and every
    /// basic value within bounds, else an artificial.
    fn new(lp: &LinearProgram, opts: &'a SolverOptions) -> Result<Self> {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let total = n + 2 * m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (i, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coeffs {
                cols[j].push((i, a));
            }
        }
        let mut lo = Vec::with_capacity(total);
        let mut hi = Vec::with_capacity(total);
        let mut x = Vec::with_capacity(total);
        let mut state = Vec::with_capacity(total);
        for j in 0..n {
            let (l, h) = (lp.lower(j), lp.upper(j));
            lo.push(l);
            hi.push(h);
            let (v, s) = if l.is_finite() {
                (l, State::Lower)
            } else if h.is_finite() {
                (h, State::Upper)
            } else {
                (0.0, State::Zero)
            };
            x.push(v);
            state.push(s);
        }
        let rhs: Vec<f64> = lp.rows().iter().map(|r| r.rhs).collect();
        // Row activity left to the slack: rhs minus the structural terms.
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for &(i, a) in &cols[j] {
                    residual[i] -= a * x[j];
                }
            }
        }
        let slack_bounds: Vec<(f64, f64)> = lp
            .rows()
            .iter()
            .map(|row| match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            })
            .collect();
        let within = |v: f64, (l, h): (f64, f64)| v >= l - 1e-12 && v <= h + 1e-12;

        #[derive(Clone, Copy, PartialEq)]
        enum RowBasic {
            Pending,
            Slack,
            Other,
        }
        let mut row_basic = vec![RowBasic::Pending; m];
        let mut basis = vec![0; m];
        let mut artificial = vec![(0.0, 1.0, false); m];
        let mut slack_at = vec![0.0; m];
        for i in 0..m {
            let r = residual[i];
            let sb = slack_bounds[i];
            if within(r, sb) {
                row_basic[i] = RowBasic::Slack;
                basis[i] = n + i;
                continue;
            }
            let target = r.clamp(sb.0, sb.1);
            let mut best: Option<(usize, f64, f64)> = None;
            for &(j, a) in &lp.rows()[i].coeffs {
                if state[j] == State::Basic || lo[j] == hi[j] {
                    continue;
                }
                let delta = (r - target) / a;
                let v = x[j] + delta;
                if !within(v, (lo[j], hi[j])) {
                    continue;
                }
                let fits = cols[j].iter().all(|&(k, b)| {
                    k >= i || (row_basic[k] == RowBasic::Slack && within(residual[k] - b * delta, slack_bounds[k]))
                });
                if fits && best.is_none_or(|(_, bb, _)| a.abs() > bb) {
                    best = Some((j, a.abs(), delta));
                }
            }
            match best {
                Some((j, _, delta)) => {
                    x[j] += delta;
                    for &(k, b) in &cols[j] {
                        residual[k] -= b * delta;
                    }
                    state[j] = State::Basic;
                    basis[i] = j;
                    row_basic[i] = RowBasic::Other;
                    slack_at[i] = target;
                }
                None => {
                    basis[i] = n + m + i;
                    row_basic[i] = RowBasic::Other;
                    slack_at[i] = target;
                    let sign = if r > target { 1.0 } else { -1.0 };
                    artificial[i] = ((r - target).abs(), sign, true);
                }
            }
        }
        for i in 0..m {
            cols[n + i].push((i, 1.0));
            lo.push(slack_bounds[i].0);
            hi.push(slack_bounds[i].1);
            if row_basic[i] == RowBasic::Slack {
                x.push(residual[i]);
                state.push(State::Basic);
            } else {
                let at = slack_at[i];
                x.push(at);
                state.push(if at == slack_bounds[i].0 { State::Lower } else { State::Upper });
            }
        }
        for (i, (value, sign, basic)) in artificial.into_iter().enumerate() {
            cols[n + m + i].push((i, sign));
            lo.push(0.0);
            hi.push(if basic { f64::INFINITY } else { 0.0 });
            x.push(value);
            state.push(if basic { State::Basic } else { State::Lower });
        }
        let cap = opts.max_iterations.unwrap_or(20_000 + 50 * (n + m));
        let mut t = Tableau {
            m,
            cols,
            lo,
            hi,
            x,
            rhs,
            state,
            basis,
            binv: Vec::new(),
            opts,
            cap,
            iterations: 0,
            since_refactor: 0,
        };
        t.refactor()?;
        Ok(t)
    }

    fn run(&mut self, cost: &[f64], phase: u8) -> Result<Outcome> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut pi = vec![0.0; m];
        loop {
            if self.iterations >= self.cap {
                return Err(Error::Numerical(format!(
                    "simplex hit its {}-iteration cap in phase {phase} ({m} rows, {} columns, degenerate streak {degenerate})",
                    self.cap,
                    self.cols.len()
                )));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let bland = degenerate > self.opts.degeneracy_threshold;
            self.duals(cost, &mut pi);
            let Some((q, dir)) = self.price(cost, &pi, bland) else {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(q);
            match self.ratio_test(q, dir, &alpha, bland) {
                Step::Unbounded => {
                    if self.since_refactor > 0 {
                        self.refactor()?;
                        continue;
                    }
                    return Ok(Outcome::Unbounded);
                }
                Step::Flip(range) => {
                    self.shift(q, dir, range, &alpha);
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    degenerate = 0;
                }
                Step::Pivot { row, step, to_upper } => {
                    self.shift(q, dir, step, &alpha);
                    let leaving = self.basis[row];
                    self.x[leaving] = if to_upper { self.hi[leaving] } else { self.lo[leaving] };
                    self.state[leaving] = if to_upper && self.lo[leaving] != self.hi[leaving] {
                        State::Upper
                    } else {
                        State::Lower
                    };
                    self.state[q] = State::Basic;
                    self.basis[row] = q;
                    self.pivot(row, &alpha);
                    if step <= 1e-12 {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                }
            }
            self.iterations += 1;
        }
    }

    fn duals(&self, cost: &[f64], pi: &mut [f64]) {
        let m = self.m;
        pi.iter_mut().for_each(|p| *p = 0.0);
        for r in 0..m {
            let c = cost[self.basis[r]];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (p, b) in pi.iter_mut().zip(row) {
                    *p += c * b;
                }
            }
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, cost: &[f64], pi: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols.len() {
            let s = self.state[j];
            if s == State::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = cost[j] - self.cols[j].iter().map(|&(i, a)| pi[i] * a).sum::<f64>();
            let dir = match s {
                State::Lower if d < -tol => 1.0,
                State::Upper if d > tol => -1.0,
                State::Zero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[q] {
            for (r, out) in alpha.iter_mut().enumerate() {
                *out += a * self.binv[r * m + i];
            }
        }
        alpha
    }

    /// Harris-style two-pass ratio test; under Bland's rule, the exact minimum
    /// ratio with ties to the lowest column index.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        let ptol = self.opts.pivot_tol;
        let ftol = 1e-9;
        let range = self.hi[q] - self.lo[q];
        // Basic r changes by -dir * alpha_r per unit step.
        let limit = |r: usize, slack: f64| -> Option<(f64, bool)> {
            let b = self.basis[r];
            let rate = dir * alpha[r];
            if rate > ptol && self.lo[b].is_finite() {
                Some(((self.x[b] - self.lo[b] + slack) / rate, false))
            } else if rate < -ptol && self.hi[b].is_finite() {
                Some(((self.hi[b] - self.x[b] + slack) / -rate, true))
            } else {
                None
            }
        };
        let mut chosen: Option<(usize, f64, bool)> = None;
        if bland {
            let mut t_min = f64::INFINITY;
            for r in 0..self.m {
                if let Some((t, _)) = limit(r, 0.0) {
                    t_min = t_min.min(t.max(0.0));
                }
            }
            if t_min.is_finite() {
                // Lowest basic index among the tied rows, skipping pivots far
                // smaller than the largest tied one.
                let ties: Vec<(usize, f64, bool)> = (0..self.m)
                    .filter_map(|r| limit(r, 0.0).map(|(t, up)| (r, t.max(0.0), up)))
                    .filter(|&(_, t, _)| t <= t_min + 1e-12)
                    .collect();
                let largest = ties.iter().map(|&(r, _, _)| alpha[r].abs()).fold(0.0, f64::max);
                for (r, t, up) in ties {
                    if alpha[r].abs() >= 1e-3 * largest
                        && chosen.is_none_or(|(c, _, _)| self.basis[r] < self.basis[c])
                    {
                        chosen = Some((r, t, up));
                    }
                }
            }
        } else {
            let mut t_max = f64::INFINITY;
            for r in 0..self.m {
                if let Some((t, _)) = limit(r, ftol) {
                    t_max = t_max.min(t);
                }
            }
            if t_max.is_finite() {
                let mut best_pivot = 0.0;
                for r in 0..self.m {
                    if let Some((t, up)) = limit(r, 0.0) {
                        if t <= t_max && alpha[r].abs() > best_pivot {
                            best_pivot = alpha[r].abs();
                            chosen = Some((r, t.max(0.0), up));
                        }
                    }
                }
            }
        }
        match chosen {
            Some((_, t, _)) if range.is_finite() && range <= t => Step::Flip(range),
            Some((row, step, to_upper)) => Step::Pivot { row, step, to_upper },
            None if range.is_finite() => Step::Flip(range),
            None => Step::Unbounded,
        }
    }

    fn shift(&mut self, q: usize, dir: f64, step: f64, alpha: &[f64]) {
        if step == 0.0 {
            return;
        }
        self.x[q] += dir * step;
        for r in 0..self.m {
            let b = self.basis[r];
            self.x[b] -= dir * step * alpha[r];
        }
    }

    fn pivot(&mut self, row: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[row];
        let pivot_row: Vec<f64> = self.binv[row * m..(row + 1) * m].iter().map(|v| v * inv).collect();
        for r in 0..m {
            if r == row || alpha[r] == 0.0 {
                continue;
            }
            let f = alpha[r];
            let target = &mut self.binv[r * m..(r + 1) * m];
            for (t, p) in target.iter_mut().zip(&pivot_row) {
                *t -= f * p;
            }
        }
        self.binv[row * m..(row + 1) * m].copy_from_slice(&pivot_row);
        self.since_refactor += 1;
    }

    /// Rebuilds the inverse by Gauss-Jordan elimination and recomputes the
    /// basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (r, &b) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[b] {
                a[i * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * m + c].abs().total_cmp(&a[j * m + c].abs()))
                .filter(|&p| a[p * m + c].abs() > 1e-12)
                .ok_or_else(|| {
                    Error::Numerical(format!(
                        "basis became singular at column {c} of {m} after {} iterations",
                        self.iterations
                    ))
                })?;
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = 1.0 / a[c * m + c];
            for k in 0..m {
                a[c * m + k] *= d;
                inv[c * m + k] *= d;
            }
            for i in 0..m {
                let f = a[i * m + c];
                if i == c || f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[i * m + k] -= f * a[c * m + k];
                    inv[i * m + k] -= f * inv[c * m + k];
                }
            }
        }
        self.binv = inv;
        let mut v = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for &(i, a) in col {
                    v[i] -= a * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.basis[r]] = row.iter().zip(&v).map(|(b, v)| b * v).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }
}

enum Step {
    Unbounded,
    /// The entering variable runs into its own opposite bound.
    Flip(f64),
    Pivot { row: usize, step: f64, to_upper: bool },
}
