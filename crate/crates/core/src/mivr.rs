//! Matching-integrated vehicle rebalancing programs.
//!
//! Over a horizon of `h` intervals the program plans rebalancing flows
//! `x[k][i][j]` (vehicles sent from `i` to `j`) and advisory matchings
//! `y[k][i][j]` (customers in `i` served by vehicles from `j`), tracking
//! vacant (`V`), post-rebalancing (`S`) and occupied (`O`) counts per region.
//! Only the rounded first-interval flows are executed.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation};
use crate::network::{match_feasibility, rebalance_feasibility, TimeGrid, TransitionMatrices, ZoneNetwork};
use crate::uncertainty::UncertaintySet;

/// Metres to kilometres; objective distances are in km so that the
/// unsatisfied-trip penalty and travel costs are commensurate.
pub const DEFAULT_DISTANCE_SCALE: f64 = 1e-3;

/// Residual tolerance handed to the LP solver.
pub const LP_TOLERANCE: f64 = 1e-7;

/// Orientation of the demand-side matching sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexConvention {
    /// `y[i][j]` serves customers of `i` with vehicles of `j`; demand rows sum
    /// over the vehicle index `j`, supply rows over the customer index.
    #[default]
    CustomerVehicle,
    /// Demand rows sum `y[j][i]` over `j`, the same orientation as the supply
    /// rows, while the unsatisfied-demand identity keeps `y[i][j]`.
    SupplyOriented,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Demand {
    /// Region-major `n x h` point demand.
    Point(Vec<f64>),
    Set(UncertaintySet),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MivrInstance {
    pub n: usize,
    pub horizon: usize,
    /// Objective distances.
    pub dist: Array2<f64>,
    /// `a[i][j] = 1` forbids rebalancing from `i` to `j`.
    pub a: Array2<u8>,
    /// `b[i][j] = 1` forbids serving customers in `i` from `j`.
    pub b: Array2<u8>,
    pub v0: Vec<f64>,
    pub o0: Vec<f64>,
    pub transitions: TransitionMatrices,
    pub beta: f64,
    pub gamma: f64,
    pub fleet_size: f64,
    pub demand: Demand,
    pub convention: IndexConvention,
}

impl MivrInstance {
    /// An instance over `net` with an empty fleet, zero point demand, `beta = 1`
    /// and `gamma = 100`.
    pub fn from_network(net: &ZoneNetwork, grid: &TimeGrid, horizon: usize, transitions: TransitionMatrices) -> Self {
        let n = net.len();
        MivrInstance {
            n,
            horizon,
            dist: net.dist() * DEFAULT_DISTANCE_SCALE,
            a: rebalance_feasibility(net, grid),
            b: match_feasibility(net, grid),
            v0: vec![0.0; n],
            o0: vec![0.0; n],
            transitions,
            beta: 1.0,
            gamma: 100.0,
            fleet_size: f64::INFINITY,
            demand: Demand::Point(vec![0.0; n * horizon]),
            convention: IndexConvention::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.n, self.horizon);
        if h == 0 {
            return Err(Error::shape("horizon must be at least one interval"));
        }
        let square = |a: (usize, usize)| a == (n, n);
        if !square(self.dist.dim()) || !square(self.a.dim()) || !square(self.b.dim()) {
            return Err(Error::shape(format!("distance and feasibility matrices must be {n}x{n}")));
        }
        if !square(self.transitions.p.dim()) || !square(self.transitions.q.dim()) {
            return Err(Error::shape(format!("transition matrices must be {n}x{n}")));
        }
        self.transitions.validate()?;
        if self.v0.len() != n || self.o0.len() != n {
            return Err(Error::shape(format!("initial counts must have {n} regions")));
        }
        if self.v0.iter().chain(&self.o0).any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::invariant("initial vehicle counts must be finite and nonnegative"));
        }
        let total: f64 = self.v0.iter().chain(&self.o0).sum();
        if total > self.fleet_size + 1e-9 {
            return Err(Error::invariant(format!("{total} vehicles exceed the fleet size {}", self.fleet_size)));
        }
        if !(self.beta > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::invariant("beta and gamma must be positive"));
        }
        match &self.demand {
            Demand::Point(r) => {
                if r.len() != n * h {
                    return Err(Error::shape(format!("point demand needs {} cells, got {}", n * h, r.len())));
                }
                if r.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::invariant("point demand must be finite and nonnegative"));
                }
            }
            Demand::Set(s) => {
                if s.regions() != n || s.intervals() != h {
                    return Err(Error::shape(format!(
                        "uncertainty set is {}x{}, instance is {n}x{h}",
                        s.regions(),
                        s.intervals()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Demand-side orientation: the pairs `(customer, vehicle)` summed in the
    /// demand row of region `i`.
    fn demand_pairs(&self, i: usize) -> Vec<(usize, usize)> {
        match self.convention {
            IndexConvention::CustomerVehicle => (0..self.n).map(|j| (i, j)).collect(),
            IndexConvention::SupplyOriented => (0..self.n).map(|j| (j, i)).collect(),
        }
    }
}

struct Layout {
    x: Vec<usize>,
    y: Vec<usize>,
    s: Vec<usize>,
    v: Vec<usize>,
    o: Vec<usize>,
}

impl Layout {
    fn pair(&self, n: usize, k: usize, i: usize, j: usize) -> usize {
        (k * n + i) * n + j
    }

    fn cell(&self, n: usize, k: usize, i: usize) -> usize {
        k * n + i
    }
}

/// Variables and the rows shared by both variants: matching supply, outflow
/// capacity, post-rebalancing balance and the vacant/occupied recursions.
fn skeleton(inst: &MivrInstance) -> Result<(LinearProgram, Layout)> {
    inst.validate()?;
    let (n, h) = (inst.n, inst.horizon);
    let inf = f64::INFINITY;
    let mut lp = LinearProgram::new();
    let mut layout = Layout { x: Vec::new(), y: Vec::new(), s: Vec::new(), v: Vec::new(), o: Vec::new() };
    for k in 0..h {
        for i in 0..n {
            for j in 0..n {
                let ub = if i == j || inst.a[[i, j]] == 1 { 0.0 } else { inf };
                layout.x.push(lp.add_var(format!("x_{i}_{j}_{k}"), 0.0, ub, inst.dist[[i, j]])?);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let ub = if inst.b[[i, j]] == 1 { 0.0 } else { inf };
                layout.y.push(lp.add_var(format!("y_{i}_{j}_{k}"), 0.0, ub, inst.beta * inst.dist[[i, j]])?);
            }
        }
        for i in 0..n {
            layout.s.push(lp.add_var(format!("S_{i}_{k}"), 0.0, inf, 0.0)?);
        }
        for i in 0..n {
            let (lo, hi) = if k == 0 { (inst.v0[i], inst.v0[i]) } else { (0.0, inf) };
            layout.v.push(lp.add_var(format!("V_{i}_{k}"), lo, hi, 0.0)?);
        }
        for i in 0..n {
            let (lo, hi) = if k == 0 { (inst.o0[i], inst.o0[i]) } else { (0.0, inf) };
            layout.o.push(lp.add_var(format!("O_{i}_{k}"), lo, hi, 0.0)?);
        }
    }
    let (p, q) = (&inst.transitions.p, &inst.transitions.q);
    for k in 0..h {
        for i in 0..n {
            let s = layout.s[layout.cell(n, k, i)];
            let v = layout.v[layout.cell(n, k, i)];
            let supply = (0..n).map(|j| (layout.y[layout.pair(n, k, j, i)], 1.0));
            lp.add_constraint(format!("supply_{i}_{k}"), supply.chain([(s, -1.0)]), Relation::Le, 0.0)?;
            let out = (0..n).filter(|&j| j != i).map(|j| (layout.x[layout.pair(n, k, i, j)], 1.0));
            lp.add_constraint(format!("outflow_{i}_{k}"), out.chain([(v, -1.0)]), Relation::Le, 0.0)?;
            let mut bal = vec![(s, 1.0), (v, -1.0)];
            for j in (0..n).filter(|&j| j != i) {
                bal.push((layout.x[layout.pair(n, k, j, i)], -1.0));
                bal.push((layout.x[layout.pair(n, k, i, j)], 1.0));
            }
            lp.add_constraint(format!("balance_{i}_{k}"), bal, Relation::Eq, 0.0)?;
        }
        if k + 1 < h {
            for i in 0..n {
                let mut vac = vec![(layout.v[layout.cell(n, k + 1, i)], 1.0), (layout.s[layout.cell(n, k, i)], -1.0)];
                let mut occ = vec![(layout.o[layout.cell(n, k + 1, i)], 1.0)];
                for j in 0..n {
                    let yji = layout.y[layout.pair(n, k, j, i)];
                    let oj = layout.o[layout.cell(n, k, j)];
                    vac.push((yji, 1.0));
                    vac.push((oj, -q[[j, i]]));
                    occ.push((yji, -1.0));
                    occ.push((oj, -p[[j, i]]));
                }
                lp.add_constraint(format!("vacant_{i}_{k}"), vac, Relation::Eq, 0.0)?;
                lp.add_constraint(format!("occupied_{i}_{k}"), occ, Relation::Eq, 0.0)?;
            }
        }
    }
    Ok((lp, layout))
}

/// Deterministic program on point demand, with unsatisfied-demand variables
/// `T` penalized by `gamma`.
pub fn build_deterministic(inst: &MivrInstance) -> Result<LinearProgram> {
    let Demand::Point(r) = &inst.demand else {
        return Err(Error::invariant("the deterministic program needs point demand"));
    };
    let (mut lp, layout) = skeleton(inst)?;
    let (n, h) = (inst.n, inst.horizon);
    for k in 0..h {
        for i in 0..n {
            let demand = r[i * h + k];
            let t = lp.add_var(format!("T_{i}_{k}"), 0.0, f64::INFINITY, inst.gamma)?;
            let served = inst.demand_pairs(i).into_iter().map(|(c, v)| (layout.y[layout.pair(n, k, c, v)], 1.0));
            lp.add_constraint(format!("demand_{i}_{k}"), served, Relation::Le, demand)?;
            let unmet = (0..n).map(|j| (layout.y[layout.pair(n, k, i, j)], 1.0)).chain([(t, 1.0)]);
            lp.add_constraint(format!("unmet_{i}_{k}"), unmet, Relation::Eq, demand)?;
        }
    }
    Ok(lp)
}

/// Robust counterpart over a budgeted box set: each demand row holds for its
/// worst case and the unsatisfied-demand term is replaced by its worst-case
/// value, whose demand part is a constant carried in the objective offset.
pub fn build_robust(inst: &MivrInstance) -> Result<LinearProgram> {
    let Demand::Set(set) = &inst.demand else {
        return Err(Error::invariant("the robust program needs an uncertainty set"));
    };
    let (mut lp, layout) = skeleton(inst)?;
    let (n, h) = (inst.n, inst.horizon);
    let mut offset = 0.0;
    for k in 0..h {
        offset += inst.gamma * set.worst_case_sum_max(k)?;
        for i in 0..n {
            let served = inst.demand_pairs(i).into_iter().map(|(c, v)| (layout.y[layout.pair(n, k, c, v)], 1.0));
            lp.add_constraint(format!("demand_{i}_{k}"), served, Relation::Le, set.worst_case_min(k, i)?)?;
            for j in 0..n {
                let col = layout.y[layout.pair(n, k, i, j)];
                lp.set_cost(col, lp.cost(col) - inst.gamma);
            }
        }
    }
    lp.set_offset(offset);
    Ok(lp)
}

/// Builds the variant matching the instance's demand.
pub fn build(inst: &MivrInstance) -> Result<LinearProgram> {
    match inst.demand {
        Demand::Point(_) => build_deterministic(inst),
        Demand::Set(_) => build_robust(inst),
    }
}

/// First-interval rebalancing counts plus the advisory plan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RebalancePlan {
    /// `(from, to) -> vehicles`, nonzero entries only.
    pub x: BTreeMap<(usize, usize), u32>,
    /// `(k, customer region, vehicle region) -> planned matches`.
    pub planned_y: BTreeMap<(usize, usize, usize), f64>,
    pub objective: f64,
    /// Set when the plan came from the deterministic fallback.
    pub fallback: bool,
}

impl RebalancePlan {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn outflow(&self, i: usize) -> u32 {
        self.x.range((i, 0)..(i + 1, 0)).map(|(_, c)| c).sum()
    }

    pub fn total_moves(&self) -> u32 {
        self.x.values().sum()
    }

    /// `k,i,j,x` rows for the executed interval.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "i", "j", "x"])?;
        for (&(i, j), &c) in &self.x {
            w.write_record(["0".to_string(), i.to_string(), j.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rounds the first-interval flows per origin by largest remainder, keeping
/// each origin's total within its vacant vehicles. Ties go to the lower
/// destination index.
pub fn extract_plan(solution: &LpSolution, lp: &LinearProgram, inst: &MivrInstance) -> Result<RebalancePlan> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::invariant(format!("cannot extract a plan from a {:?} solution", solution.status)));
    }
    let n = inst.n;
    let value = |name: String| -> Result<f64> {
        let col = lp.var(&name).ok_or_else(|| Error::invariant(format!("program has no variable `{name}`")))?;
        Ok(solution.primal[col])
    };
    let mut plan = RebalancePlan { objective: solution.objective, ..RebalancePlan::default() };
    for i in 0..n {
        let mut flows = Vec::new();
        for j in (0..n).filter(|&j| j != i) {
            flows.push((j, value(format!("x_{i}_{j}_0"))?.max(0.0)));
        }
        let cap = (inst.v0[i] + 1e-9).floor().max(0.0) as u64;
        for (j, c) in largest_remainder(&flows, cap) {
            if c > 0 {
                plan.x.insert((i, j), c as u32);
            }
        }
    }
    for k in 0..inst.horizon {
        for i in 0..n {
            for j in 0..n {
                let y = value(format!("y_{i}_{j}_{k}"))?;
                if y > 1e-9 {
                    plan.planned_y.insert((k, i, j), y);
                }
            }
        }
    }
    Ok(plan)
}

/// Integer split of `values` whose total is the rounded sum, capped at `cap`.
fn largest_remainder(values: &[(usize, f64)], cap: u64) -> Vec<(usize, u64)> {
    let snapped: Vec<(usize, f64)> = values
        .iter()
        .map(|&(j, v)| if (v - v.round()).abs() < 1e-6 { (j, v.round()) } else { (j, v) })
        .collect();
    let sum: f64 = snapped.iter().map(|(_, v)| v).sum();
    let target = (sum.round() as u64).min(cap);
    let mut out: Vec<(usize, u64)> = snapped.iter().map(|&(j, v)| (j, v.floor() as u64)).collect();
    let remainders: Vec<f64> = snapped.iter().map(|(_, v)| v - v.floor()).collect();
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| remainders[b].total_cmp(&remainders[a]).then(out[a].0.cmp(&out[b].0)));
    let mut assigned: u64 = out.iter().map(|(_, c)| c).sum();
    let mut cursor = 0;
    while assigned < target && !order.is_empty() {
        out[order[cursor % order.len()]].1 += 1;
        assigned += 1;
        cursor += 1;
    }
    // Only reachable when the capacity guard binds below the floors.
    while assigned > target {
        for &idx in order.iter().rev() {
            if assigned > target && out[idx].1 > 0 {
                out[idx].1 -= 1;
                assigned -= 1;
            }
        }
    }
    out
}

/// Builds, solves and rounds. A robust program without an optimal solution
/// is replaced by the deterministic program on the set centres.
pub fn plan(inst: &MivrInstance) -> Result<RebalancePlan> {
    let lp = build(inst)?;
    let solution = solve_lp(&lp, LP_TOLERANCE)?;
    if solution.status == LpStatus::Optimal {
        return extract_plan(&solution, &lp, inst);
    }
    let Demand::Set(set) = &inst.demand else {
        return Err(if solution.status == LpStatus::Infeasible { Error::Infeasible } else { Error::Unbounded });
    };
    log::warn!("robust program is {:?}; falling back to the deterministic program on the set centres", solution.status);
    let mut det = inst.clone();
    det.demand = Demand::Point(
        (0..inst.n).flat_map(|i| (0..inst.horizon).map(move |k| (i, k))).map(|(i, k)| set.mu(i, k)).collect(),
    );
    let lp = build_deterministic(&det)?;
    let solution = solve_lp(&lp, LP_TOLERANCE)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Infeasible);
    }
    let mut plan = extract_plan(&solution, &lp, &det)?;
    plan.fallback = true;
    Ok(plan)
}

/// Vertices of the interval-`k` slice `{lb <= r <= ub, |sum (r - mu)| <= budget}`:
/// box corners inside the budget band, plus points with all but one
/// coordinate at a bound lying on a budget hyperplane.
pub fn set_vertices(set: &UncertaintySet, k: usize) -> Vec<Vec<f64>> {
    let n = set.regions();
    let centre: f64 = (0..n).map(|i| set.mu(i, k)).sum();
    let (lo, hi) = (centre - set.budget(), centre + set.budget());
    let slack = 1e-9 * (1.0 + centre.abs());
    let mut out: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| {
        if !out.iter().any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-12)) {
            out.push(v);
        }
    };
    for mask in 0..(1u32 << n) {
        let v: Vec<f64> = (0..n).map(|i| if mask >> i & 1 == 1 { set.ub(i, k) } else { set.lb(i, k) }).collect();
        let s: f64 = v.iter().sum();
        if s >= lo - slack && s <= hi + slack {
            push(v, &mut out);
        }
    }
    for free in 0..n {
        for mask in 0..(1u32 << (n - 1)) {
            let mut v = vec![0.0; n];
            for (bit, i) in (0..n).filter(|&i| i != free).enumerate() {
                v[i] = if mask >> bit & 1 == 1 { set.ub(i, k) } else { set.lb(i, k) };
            }
            let rest: f64 = v.iter().sum();
            for target in [lo, hi] {
                let r = target - rest;
                if r >= set.lb(free, k) - slack && r <= set.ub(free, k) + slack {
                    v[free] = r.clamp(set.lb(free, k), set.ub(free, k));
                    push(v.clone(), &mut out);
                }
            }
        }
    }
    out
}

/// Validation oracle: `min_{x,y} max_{r in vertices}` of the robust objective
/// with every demand row enforced at every vertex, as one epigraph program.
pub fn minmax_oracle(inst: &MivrInstance, set: &UncertaintySet) -> Result<f64> {
    if inst.n > 4 || inst.horizon > 2 {
        return Err(Error::TooLarge(format!(
            "min-max oracle handles n <= 4 and horizon <= 2, got n = {} and horizon = {}",
            inst.n, inst.horizon
        )));
    }
    let mut inst = inst.clone();
    inst.demand = Demand::Set(set.clone());
    let (mut lp, layout) = skeleton(&inst)?;
    let n = inst.n;
    for k in 0..inst.horizon {
        let t = lp.add_var(format!("t_{k}"), f64::NEG_INFINITY, f64::INFINITY, 1.0)?;
        let all_y: Vec<usize> = (0..n * n).map(|c| layout.y[k * n * n + c]).collect();
        for (v, vertex) in set_vertices(set, k).iter().enumerate() {
            for (i, &r) in vertex.iter().enumerate() {
                let served = inst.demand_pairs(i).into_iter().map(|(c, w)| (layout.y[layout.pair(n, k, c, w)], 1.0));
                lp.add_constraint(format!("demand_{i}_{k}_v{v}"), served, Relation::Le, r)?;
            }
            let total: f64 = vertex.iter().sum();
            let epi = all_y.iter().map(|&c| (c, inst.gamma)).chain([(t, 1.0)]);
            lp.add_constraint(format!("epigraph_{k}_v{v}"), epi, Relation::Ge, inst.gamma * total)?;
        }
    }
    let solution = solve_lp(&lp, LP_TOLERANCE)?;
    match solution.status {
        LpStatus::Optimal => Ok(solution.objective),
        LpStatus::Infeasible => Err(Error::Infeasible),
        LpStatus::Unbounded => Err(Error::Unbounded),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(demand: f64, vacant: f64) -> MivrInstance {
        MivrInstance {
            n: 1,
            horizon: 1,
            dist: array![[0.0]],
            a: array![[0]],
            b: array![[0]],
            v0: vec![vacant],
            o0: vec![0.0],
            transitions: TransitionMatrices::stay_vacant(1),
            beta: 1.0,
            gamma: 100.0,
            fleet_size: 10.0,
            demand: Demand::Point(vec![demand]),
            convention: IndexConvention::CustomerVehicle,
        }
    }

    fn solve(inst: &MivrInstance) -> (LinearProgram, LpSolution) {
        let lp = build(inst).unwrap();
        let s = solve_lp(&lp, LP_TOLERANCE).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        (lp, s)
    }

    #[test]
    fn single_region_enough_vehicles() {
        let (lp, s) = solve(&single(3.0, 5.0));
        assert!((s.primal[lp.var("y_0_0_0").unwrap()] - 3.0).abs() < 1e-9);
        assert!(s.primal[lp.var("T_0_0").unwrap()].abs() < 1e-9);
        assert!(s.objective.abs() < 1e-9);
    }

    #[test]
    fn single_region_short_of_vehicles() {
        let (lp, s) = solve(&single(3.0, 1.0));
        assert!((s.primal[lp.var("y_0_0_0").unwrap()] - 1.0).abs() < 1e-9);
        assert!((s.primal[lp.var("T_0_0").unwrap()] - 2.0).abs() < 1e-9);
        assert!((s.objective - 200.0).abs() < 1e-9);
    }

    #[test]
    fn zero_demand_plans_nothing() {
        let (lp, s) = solve(&single(0.0, 5.0));
        assert_eq!(s.primal[lp.var("y_0_0_0").unwrap()], 0.0);
        assert!(s.objective.abs() < 1e-12);
    }

    #[test]
    fn point_set_matches_deterministic() {
        let det = single(3.0, 1.0);
        let mut rob = det.clone();
        rob.demand = Demand::Set(UncertaintySet::point(1, 1, vec![3.0]).unwrap());
        assert!((solve(&det).1.objective - solve(&rob).1.objective).abs() < 1e-9);
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(&[(1, 2.0), (2, 1.0)], 3), vec![(1, 2), (2, 1)]);
        assert_eq!(largest_remainder(&[(1, 1.5), (2, 1.5)], 3), vec![(1, 2), (2, 1)]);
        let r = largest_remainder(&[(1, 1.0), (2, 0.999), (3, 1.0)], 2);
        assert!(r.iter().map(|(_, c)| c).sum::<u64>() <= 2);
        assert_eq!(largest_remainder(&[(1, 2.9999999)], 5), vec![(1, 3)]);
        assert_eq!(largest_remainder(&[(1, 0.4), (2, 0.4)], 5), vec![(1, 1), (2, 0)]);
    }

    #[test]
    fn vertices_of_box_and_budget() {
        let wide = UncertaintySet::new(2, 1, vec![0.0, 1.0], vec![1.0, 2.0], vec![2.0, 3.0], 100.0).unwrap();
        assert_eq!(set_vertices(&wide, 0).len(), 4);
        let point = UncertaintySet::point(2, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(set_vertices(&point, 0), vec![vec![1.0, 2.0]]);
        // Budget 1 cuts two corners off the square, leaving a hexagon.
        let cut = UncertaintySet::new(2, 1, vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0], 1.0).unwrap();
        assert_eq!(set_vertices(&cut, 0).len(), 6);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let mut inst = single(1.0, 1.0);
        inst.horizon = 3;
        inst.demand = Demand::Point(vec![1.0; 3]);
        let set = UncertaintySet::point(1, 3, vec![1.0; 3]).unwrap();
        assert!(matches!(minmax_oracle(&inst, &set), Err(Error::TooLarge(_))));
    }
}
