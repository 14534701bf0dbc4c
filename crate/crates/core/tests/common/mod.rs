//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls the crate's solver: vertices are
//! found by brute force over active sets with nalgebra doing the algebra.

#![allow(dead_code)]

use amod_core::lp::{LinearProgram, Relation};
use amod_core::mivr::{Demand, IndexConvention, MivrInstance};
use amod_core::network::TransitionMatrices;
use amod_core::uncertainty::UncertaintySet;
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use amod_core::forecast::{DistFamily, ForecastModel, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A dense minimization `min c.x + offset` over explicit rows. Variable
/// bounds must already be written as rows.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub cost: Vec<f64>,
    pub offset: f64,
    pub rows: Vec<(Vec<f64>, Relation, f64)>,
}

fn combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1, |acc, i| acc * (n as u128 - i) / (i + 1))
}

impl DenseLp {
    pub fn from_lp(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut rows = Vec::new();
        for r in lp.rows() {
            let mut a = vec![0.0; n];
            for &(c, v) in &r.coeffs {
                a[c] += v;
            }
            rows.push((a, r.relation, r.rhs));
        }
        for j in 0..n {
            let unit = |j: usize| {
                let mut a = vec![0.0; n];
                a[j] = 1.0;
                a
            };
            if lp.lower(j) == lp.upper(j) {
                rows.push((unit(j), Relation::Eq, lp.lower(j)));
                continue;
            }
            if lp.lower(j).is_finite() {
                rows.push((unit(j), Relation::Ge, lp.lower(j)));
            }
            if lp.upper(j).is_finite() {
                rows.push((unit(j), Relation::Le, lp.upper(j)));
            }
        }
        DenseLp { cost: lp.costs().to_vec(), offset: lp.offset(), rows }
    }

    pub fn vars(&self) -> usize {
        self.cost.len()
    }

    /// Number of candidate active sets the enumeration would visit.
    pub fn bases(&self) -> u128 {
        let eq = self.rows.iter().filter(|r| r.1 == Relation::Eq).count();
        let ineq = self.rows.len() - eq;
        if eq > self.vars() {
            return 0;
        }
        combinations(ineq, self.vars() - eq)
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.rows.iter().all(|(a, rel, b)| {
            let lhs: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
            let tol = 1e-9 * (1.0 + b.abs() + a.iter().map(|v| v.abs()).sum::<f64>());
            match rel {
                Relation::Le => lhs <= b + tol,
                Relation::Ge => lhs >= b - tol,
                Relation::Eq => (lhs - b).abs() <= tol,
            }
        })
    }

    /// Every basic feasible point: an independent subset of the equalities
    /// plus each choice of inequalities completing it to `vars` active rows,
    /// kept when the unique solution satisfies every row.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let n = self.vars();
        let mut eq: Vec<usize> = Vec::new();
        for r in (0..self.rows.len()).filter(|&r| self.rows[r].1 == Relation::Eq) {
            let mut trial = eq.clone();
            trial.push(r);
            if rank(&self.matrix(&trial)) == trial.len() {
                eq = trial;
            }
        }
        let ineq: Vec<usize> = (0..self.rows.len()).filter(|&r| self.rows[r].1 != Relation::Eq).collect();
        let mut out = Vec::new();
        let mut active = eq;
        self.extend(&ineq, 0, n, &mut active, &mut out);
        out
    }

    fn extend(&self, ineq: &[usize], from: usize, n: usize, active: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if active.len() == n {
            if let Some(x) = self.solve_active(active) {
                if self.feasible(&x) {
                    out.push(x);
                }
            }
            return;
        }
        let need = n - active.len();
        for i in from..ineq.len() {
            if ineq.len() - i < need {
                break;
            }
            active.push(ineq[i]);
            self.extend(ineq, i + 1, n, active, out);
            active.pop();
        }
    }

    fn matrix(&self, active: &[usize]) -> DMatrix<f64> {
        let n = self.vars();
        DMatrix::from_fn(active.len(), n, |r, c| self.rows[active[r]].0[c])
    }

    fn solve_active(&self, active: &[usize]) -> Option<Vec<f64>> {
        let n = self.vars();
        if active.len() != n {
            return None;
        }
        if n == 0 {
            return Some(Vec::new());
        }
        let a = self.matrix(active);
        let b = DVector::from_fn(n, |r, _| self.rows[active[r]].2);
        let lu = a.clone().full_piv_lu();
        let u = lu.u();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if (0..n).any(|i| u[(i, i)].abs() <= 1e-10 * scale) {
            return None;
        }
        lu.solve(&b).map(|x| x.iter().copied().collect())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.offset + self.cost.iter().zip(x).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Optimal objective over a polytope, `None` when no vertex is feasible.
    pub fn minimum(&self) -> Option<f64> {
        self.vertices().iter().map(|x| self.objective(x)).min_by(f64::total_cmp)
    }
}

fn rank(m: &DMatrix<f64>) -> usize {
    let svd = m.clone().svd(false, false);
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    svd.singular_values.iter().filter(|&&s| s > 1e-10 * top.max(1.0)).count()
}

/// Random bounded LP: nonnegative variables, a few optional upper bounds,
/// `Le`/`Ge`/`Eq` rows built around a random feasible point (occasionally
/// perturbed so that some instances are infeasible), and a closing
/// `sum x <= B` row. The size is capped so vertex enumeration stays cheap.
pub fn random_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    loop {
        let n = rng.random_range(1..=max_vars);
        let m = rng.random_range(0..max_rows);
        let uppers: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        let ineq = n + m + 1 + uppers.iter().filter(|&&u| u).count();
        if combinations(ineq, n) > 200_000 {
            continue;
        }
        let point: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let mut lp = LinearProgram::new();
        for j in 0..n {
            let ub = if uppers[j] { point[j] + rng.random_range(0..4) as f64 } else { f64::INFINITY };
            let cost = rng.random_range(-6..=6) as f64;
            lp.add_var(format!("x{j}"), 0.0, ub, cost).unwrap();
        }
        let infeasible = rng.random_bool(0.1);
        for r in 0..m {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.7) {
                    coeffs.push((j, rng.random_range(-4..=4) as f64));
                }
            }
            let at: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
            let slack = rng.random_range(0..5) as f64;
            let (rel, rhs) = match rng.random_range(0..10) {
                0 => (Relation::Eq, at),
                1..=5 => (Relation::Le, at + slack),
                _ => (Relation::Ge, at - slack),
            };
            let rhs = if infeasible && r == 0 { rhs + if rel == Relation::Ge { 40.0 } else { -40.0 } } else { rhs };
            lp.add_constraint(format!("r{r}"), coeffs, rel, rhs).unwrap();
        }
        let budget = point.iter().sum::<f64>() + rng.random_range(0..10) as f64;
        lp.add_constraint("budget", (0..n).map(|j| (j, 1.0)), Relation::Le, budget).unwrap();
        return lp;
    }
}

/// Closed-form targets of a set slice recomputed by vertex enumeration of
/// `{lb <= r <= ub, centre - budget <= sum r <= centre + budget}`.
pub fn set_bound_oracle(set: &UncertaintySet, k: usize) -> (Vec<f64>, f64) {
    let n = set.regions();
    let centre: f64 = (0..n).map(|i| set.mu(i, k)).sum();
    let mut rows = Vec::new();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push((e.clone(), Relation::Ge, set.lb(i, k)));
        rows.push((e, Relation::Le, set.ub(i, k)));
    }
    rows.push((vec![1.0; n], Relation::Le, centre + set.budget()));
    rows.push((vec![1.0; n], Relation::Ge, centre - set.budget()));
    let mut poly = DenseLp { cost: vec![0.0; n], offset: 0.0, rows };
    let mins = (0..n)
        .map(|i| {
            poly.cost = (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
            poly.minimum().expect("nonempty set")
        })
        .collect();
    poly.cost = vec![-1.0; n];
    let sum_max = -poly.minimum().expect("nonempty set");
    (mins, sum_max)
}

/// Random nonempty set over `regions x intervals` cells; centres lie inside
/// their boxes, some cells are degenerate and some budgets are zero.
pub fn random_set<R: Rng>(rng: &mut R, regions: usize, intervals: usize) -> UncertaintySet {
    let cells = regions * intervals;
    let mut lb = Vec::with_capacity(cells);
    let mut mu = Vec::with_capacity(cells);
    let mut ub = Vec::with_capacity(cells);
    for _ in 0..cells {
        let lo = rng.random_range(0.0..10.0);
        let width = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..10.0) };
        lb.push(lo);
        mu.push(lo + width * rng.random_range(0.0..=1.0));
        ub.push(lo + width);
    }
    let budget = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..15.0) };
    UncertaintySet::new(regions, intervals, lb, mu, ub, budget).unwrap()
}

/// Same centres and budget, boxes widened by random nonnegative amounts
/// (lower bounds stay nonnegative).
pub fn widen<R: Rng>(rng: &mut R, set: &UncertaintySet) -> UncertaintySet {
    let (n, h) = (set.regions(), set.intervals());
    let mut lb = Vec::new();
    let mut mu = Vec::new();
    let mut ub = Vec::new();
    for i in 0..n {
        for k in 0..h {
            lb.push((set.lb(i, k) - rng.random_range(0.0..3.0)).max(0.0));
            mu.push(set.mu(i, k));
            ub.push(set.ub(i, k) + rng.random_range(0.0..3.0));
        }
    }
    UncertaintySet::new(n, h, lb, mu, ub, set.budget()).unwrap()
}

fn random_transitions<R: Rng>(rng: &mut R, n: usize) -> TransitionMatrices {
    let mut p = Array2::zeros((n, n));
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        let w: Vec<f64> = (0..2 * n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
        let total: f64 = w.iter().sum();
        for j in 0..n {
            if total > 0.0 {
                p[[i, j]] = w[j] / total;
                q[[i, j]] = w[n + j] / total;
            } else {
                q[[i, i]] = 1.0;
            }
        }
    }
    TransitionMatrices { p, q }
}

/// Tiny random instance with point demand; callers swap in a set.
pub fn random_instance<R: Rng>(rng: &mut R, max_n: usize, max_horizon: usize) -> MivrInstance {
    let n = rng.random_range(1..=max_n);
    let horizon = rng.random_range(1..=max_horizon);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)]).collect();
    let dist = Array2::from_shape_fn((n, n), |(i, j)| {
        ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
    });
    let a = Array2::from_shape_fn((n, n), |(i, j)| u8::from(i != j && rng.random_bool(0.25)));
    let b = Array2::from_shape_fn((n, n), |(i, j)| u8::from(i != j && rng.random_bool(0.4)));
    let v0: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
    let o0: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
    let fleet = v0.iter().chain(&o0).sum::<f64>() + rng.random_range(0..3) as f64;
    let demand: Vec<f64> = (0..n * horizon).map(|_| rng.random_range(0.0..8.0)).collect();
    MivrInstance {
        n,
        horizon,
        dist,
        a,
        b,
        v0,
        o0,
        transitions: random_transitions(rng, n),
        beta: rng.random_range(0.5..2.0),
        gamma: rng.random_range(5.0..100.0),
        fleet_size: fleet,
        demand: Demand::Point(demand),
        convention: if rng.random_bool(0.2) { IndexConvention::SupplyOriented } else { IndexConvention::CustomerVehicle },
    }
}

/// Tiny instance paired with a random set of matching shape.
pub fn random_robust_instance<R: Rng>(rng: &mut R, max_n: usize, max_horizon: usize) -> (MivrInstance, UncertaintySet) {
    let mut inst = random_instance(rng, max_n, max_horizon);
    let set = random_set(rng, inst.n, inst.horizon);
    inst.demand = Demand::Set(set.clone());
    (inst, set)
}

pub fn set_centres(set: &UncertaintySet) -> Vec<f64> {
    (0..set.regions()).flat_map(|i| (0..set.intervals()).map(move |k| (i, k))).map(|(i, k)| set.mu(i, k)).collect()
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

// Finite-difference gradient oracle.

pub const FD_STEP: f64 = 1e-4;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Representative in-domain parameters and observations per family.
pub fn head_cases(family: DistFamily) -> Vec<([f64; 2], f64)> {
    match family {
        DistFamily::Normal => vec![([1.5, 2.0], 3.2), ([-0.7, 0.4], 0.1), ([10.0, 5.0], 2.0)],
        DistFamily::TruncatedNormal => vec![([1.5, 2.0], 3.2), ([-1.0, 1.5], 0.4), ([6.0, 3.0], 0.0)],
        DistFamily::Poisson => vec![([2.0, 0.0], 0.0), ([3.5, 0.0], 5.0), ([40.0, 0.0], 31.0)],
        DistFamily::ZeroInflatedPoisson => vec![([0.3, 2.5], 0.0), ([0.1, 4.0], 6.0), ([0.6, 0.5], 1.0)],
        DistFamily::NegativeBinomial => vec![([3.0, 2.0], 0.0), ([5.0, 0.7], 9.0), ([20.0, 15.0], 12.0)],
    }
}

fn central<F: FnMut(f64) -> f64>(mut f: F, at: f64) -> f64 {
    (f(at + FD_STEP) - f(at - FD_STEP)) / (2.0 * FD_STEP)
}

/// Worst relative error of the NLL gradient with respect to both the
/// parameters and the raw pre-link outputs over [`head_cases`].
pub fn head_gradient_error(family: DistFamily) -> f64 {
    let mut worst = 0.0f64;
    for (theta, y) in head_cases(family) {
        let (_, g) = family.nll_with_grad(&theta, y).unwrap();
        let raw = family.unlink(theta);
        let (_, gr) = family.nll_raw(&raw, y).unwrap();
        for p in 0..family.arity() {
            let at = |v: f64, base: [f64; 2]| {
                let mut t = base;
                t[p] = v;
                t
            };
            let numeric = central(|v| family.nll(&at(v, theta), y).unwrap(), theta[p]);
            worst = worst.max(rel_err(g[p], numeric));
            let numeric = central(|v| family.nll_raw(&at(v, raw), y).unwrap().0, raw[p]);
            worst = worst.max(rel_err(gr[p], numeric));
        }
    }
    worst
}

/// A 2-zone, 2-lag model with every weight and bias nonzero.
pub fn two_zone_model(family: DistFamily, seed: u64) -> ForecastModel {
    let config = ModelConfig { family, lag: 2, hidden: 3, gcn_layers: 2, horizon: 2, input_scale: 4.0 };
    let a_hat = ndarray::array![[0.5, 0.5], [0.5, 0.5]];
    let mut m = ForecastModel::new(config, a_hat, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    for t in [&mut m.weights.lstm.b, &mut m.weights.recent_b, &mut m.weights.hist_b, &mut m.weights.recent_w] {
        t.mapv_inplace(|v| v + rng.random_range(-0.5..0.5));
    }
    m.weights.hist_w.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    m
}

/// Worst relative error of the backpropagated gradient of the summed NLL
/// over every weight of [`two_zone_model`].
pub fn model_gradient_error(family: DistFamily) -> f64 {
    let lags = ndarray::array![[3.0, 1.0], [0.0, 5.0]];
    let hist = ndarray::array![[2.0, 2.5], [4.0, 1.0]];
    let target = ndarray::array![[2.0, 0.0], [6.0, 3.0]];
    let model = two_zone_model(family, 11);
    let (_, grad) = model.loss_and_grad(&lags, &hist, &target).unwrap();
    let mut worst = 0.0f64;
    for idx in 0..model.weights.param_count() {
        let mut probe = model.clone();
        let numeric = central(
            |v| {
                probe.weights.set_flat(idx, v);
                probe.loss_and_grad(&lags, &hist, &target).unwrap().0
            },
            model.weights.get_flat(idx),
        );
        worst = worst.max(rel_err(grad.get_flat(idx), numeric));
    }
    worst
}
