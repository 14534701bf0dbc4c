//! Linear programs and an embedded simplex solver.
//!
//! Programs are always minimizations. Variables carry their own bounds (either
//! side may be infinite), so fixing a variable is a matter of `lower == upper`.

mod simplex;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::{solve_lp, solve_lp_with, LpSolution, LpStatus, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sparse `(column, coefficient)` pairs, one per column, no zeros.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    names: Vec<String>,
    index: HashMap<String, usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    offset: f64,
    rows: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invariant(format!("duplicate variable `{name}`")));
        }
        check_bounds(&name, lower, upper)?;
        if !cost.is_finite() {
            return Err(Error::invariant(format!("variable `{name}` has cost {cost}")));
        }
        let col = self.names.len();
        self.index.insert(name.clone(), col);
        self.names.push(name);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        Ok(col)
    }

    /// Adds a row; repeated columns are summed and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        let name = name.into();
        if !rhs.is_finite() {
            return Err(Error::invariant(format!("row `{name}` has rhs {rhs}")));
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (col, a) in coeffs {
            if col >= self.names.len() {
                return Err(Error::invariant(format!("row `{name}` references missing column {col}")));
            }
            if !a.is_finite() {
                return Err(Error::invariant(format!("row `{name}` has coefficient {a}")));
            }
            match merged.iter_mut().find(|(c, _)| *c == col) {
                Some(entry) => entry.1 += a,
                None => merged.push((col, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Constraint { name, coeffs: merged, relation, rhs });
        Ok(self.rows.len() - 1)
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) -> Result<()> {
        check_bounds(&self.names[col], lower, upper)?;
        self.lower[col] = lower;
        self.upper[col] = upper;
        Ok(())
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.cost[col] = cost;
    }

    /// Constant added to every reported objective value.
    pub fn set_offset(&mut self, offset: f64) {
        self.offset = offset;
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn name(&self, col: usize) -> &str {
        &self.names[col]
    }

    pub fn lower(&self, col: usize) -> f64 {
        self.lower[col]
    }

    pub fn upper(&self, col: usize) -> f64 {
        self.upper[col]
    }

    pub fn cost(&self, col: usize) -> f64 {
        self.cost[col]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.offset + self.cost.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Row activity `sum_j a_j x_j`.
    pub fn activity(&self, row: usize, x: &[f64]) -> f64 {
        self.rows[row].coeffs.iter().map(|&(c, a)| a * x[c]).sum()
    }

    /// Largest absolute violation over rows and bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (r, row) in self.rows.iter().enumerate() {
            let lhs = self.activity(r, x);
            let gap = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// Writes the program in CPLEX LP text format. The objective offset has no
    /// portable representation there and is written as a comment.
    pub fn write_lp<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "\\ objective offset: {}", self.offset);
        out.push_str("Minimize\n obj:");
        let terms: Vec<(usize, f64)> =
            self.cost.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
        if terms.is_empty() {
            // An empty objective is not accepted by every reader.
            let _ = write!(out, " 0 {}", self.names.first().map(String::as_str).unwrap_or("dummy"));
        }
        self.write_terms(&mut out, &terms);
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            if row.coeffs.is_empty() {
                let _ = write!(out, " 0 {}", self.names[0]);
            }
            self.write_terms(&mut out, &row.coeffs);
            let _ = writeln!(out, " {} {}", row.relation.symbol(), row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, name) in self.names.iter().enumerate() {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo == hi {
                let _ = writeln!(out, " {name} = {lo}");
            } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                let _ = writeln!(out, " {name} free");
            } else if lo != 0.0 || hi != f64::INFINITY {
                let lo = if lo == f64::NEG_INFINITY { "-inf".to_string() } else { lo.to_string() };
                let hi = if hi == f64::INFINITY { "+inf".to_string() } else { hi.to_string() };
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
        }
        out.push_str("End\n");
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    fn write_terms(&self, out: &mut String, terms: &[(usize, f64)]) {
        for (n, &(j, a)) in terms.iter().enumerate() {
            if n > 0 && n % 8 == 0 {
                out.push_str("\n   ");
            }
            let sign = if a < 0.0 { '-' } else { '+' };
            let _ = write!(out, " {sign} {} {}", a.abs(), self.names[j]);
        }
    }
}

fn check_bounds(name: &str, lower: f64, upper: f64) -> Result<()> {
    if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
        return Err(Error::invariant(format!("variable `{name}` has bounds [{lower}, {upper}]")));
    }
    Ok(())
}
