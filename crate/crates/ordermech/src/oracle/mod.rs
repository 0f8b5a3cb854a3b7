//! Finite-type ground truth: the mechanism design LP on a value grid, the best deterministic
//! pricing on the same grid, and exhaustive vertex enumeration for tiny grids.
//!
//! Buyer values are rounded down to the grid, so every grid solution is a feasible mechanism
//! for the continuous instance and the LP value is at most the continuous optimum.

pub mod simplex;

use crate::dist::Instance;
use crate::num::{to_f64, Field, Q};
use crate::poset::ItemId;
use crate::verify::{Mechanism, MenuComplexity, StepFn};
use num_traits::{One, Signed, Zero};
use simplex::{Cmp, LinearProgram, LpStatus, PivotRule};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Largest variable count solved in exact arithmetic under [`Arithmetic::Auto`].
pub const EXACT_VAR_LIMIT: usize = 48;
/// Largest dense tableau (rows times columns) the float path accepts.
pub const TABLEAU_LIMIT: usize = 40_000_000;
/// Allocation levels closer than this are counted once in float menus.
pub const LEVEL_CLUSTER: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("grid needs at least two points, got {0}")]
    Grid(usize),
    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Exact for small programs, float otherwise.
    #[default]
    Auto,
    Exact,
    Float,
}

/// Values rounded down to a grid shared by all items.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInstance {
    /// `0 = v_0 < v_1 < ... < v_n = H`; index 0 collects the mass below the first positive point.
    pub grid: Vec<Q>,
    /// `masses[G][i]`: unconditional mass of `G` with value in `[v_i, v_{i+1})`.
    pub masses: Vec<Vec<Q>>,
    /// `revenue[G][i] = v_i S_G(v_i)`: revenue of a unit step at `v_i`.
    pub revenue: Vec<Vec<Q>>,
    /// Discrete virtual values where the mass is positive.
    pub virtual_values: Vec<Vec<Option<Q>>>,
    pub edges: Vec<(ItemId, ItemId)>,
    /// `H / n`: bound on the loss from rounding values down.
    pub bound: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    /// Set when the program was solved in rational arithmetic.
    pub exact_objective: Option<Q>,
    pub grid: Vec<Q>,
    /// `allocations[G][i]` at grid point `i`.
    pub allocations: Vec<Vec<f64>>,
    pub payments: Vec<Vec<f64>>,
    /// Multiplier of `Σ_i d_G(i) <= 1` per item.
    pub cap_duals: Vec<f64>,
    /// Multipliers of the utility-dominance rows per edge and grid point.
    pub ic_duals: BTreeMap<(ItemId, ItemId), Vec<f64>>,
    pub bound: f64,
    pub pivots: usize,
    exact_increments: Option<Vec<Vec<Q>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deterministic {
    /// `None` means the item is not offered.
    pub prices: Vec<Option<Q>>,
    pub revenue: Q,
}

/// Grid of `n` uniform points `kH/n` merged with every marginal breakpoint and `extra`.
pub fn discretize(inst: &Instance, n: usize, extra: &[Q]) -> Result<GridInstance, OracleError> {
    if n < 2 && extra.is_empty() {
        return Err(OracleError::Grid(n));
    }
    let h = &inst.h;
    let mut pts: BTreeSet<Q> = (1..=n).map(|k| h * Q::from_integer(k.into()) / Q::from_integer(n.into())).collect();
    for m in &inst.marginals {
        pts.extend(m.breakpoints());
    }
    pts.extend(extra.iter().cloned());
    pts.insert(h.clone());
    pts.insert(Q::zero());
    let grid: Vec<Q> = pts.into_iter().filter(|v| !v.is_negative() && v <= h).collect();
    let mut masses = Vec::with_capacity(inst.m());
    let mut revenue = Vec::with_capacity(inst.m());
    let mut virtual_values = Vec::with_capacity(inst.m());
    for md in &inst.marginals {
        let surv: Vec<Q> = grid.iter().map(|v| md.survival(v)).collect();
        let mass: Vec<Q> = (0..grid.len()).map(|i| &surv[i] - surv.get(i + 1).cloned().unwrap_or_else(Q::zero)).collect();
        let vv = (0..grid.len())
            .map(|i| {
                mass[i].is_positive().then(|| {
                    let next = surv.get(i + 1).cloned().unwrap_or_else(Q::zero);
                    let gap = grid.get(i + 1).map(|x| x - &grid[i]).unwrap_or_else(Q::zero);
                    &grid[i] - gap * next / &mass[i]
                })
            })
            .collect();
        revenue.push(grid.iter().zip(&surv).map(|(v, s)| v * s).collect());
        masses.push(mass);
        virtual_values.push(vv);
    }
    let denom = if n >= 2 { n } else { grid.len() - 1 };
    Ok(GridInstance { grid, masses, revenue, virtual_values, edges: inst.poset.edges().to_vec(), bound: h / Q::from_integer(denom.into()) })
}

impl GridInstance {
    pub fn m(&self) -> usize {
        self.masses.len()
    }

    /// Positive grid points, the candidate jump locations.
    fn steps(&self) -> &[Q] {
        &self.grid[1..]
    }

    fn n_vars(&self) -> usize {
        self.m() * self.steps().len()
    }

    /// `max c x, A x <= b, x >= 0` over increments `x[G * N + j]` at step point `j`.
    fn program(&self) -> (Vec<Q>, Vec<(Vec<Q>, Q)>) {
        let pts = self.steps();
        let n = pts.len();
        let nv = self.n_vars();
        let mut obj = vec![Q::zero(); nv];
        for g in 0..self.m() {
            for j in 0..n {
                obj[g * n + j] = self.revenue[g][j + 1].clone();
            }
        }
        let mut rows = Vec::new();
        for g in 0..self.m() {
            let mut r = vec![Q::zero(); nv];
            for j in 0..n {
                r[g * n + j] = Q::one();
            }
            rows.push((r, Q::one()));
        }
        for &(w, b) in &self.edges {
            for i in 1..n {
                let mut r = vec![Q::zero(); nv];
                for j in 0..i {
                    let d = &pts[i] - &pts[j];
                    r[b * n + j] = d.clone();
                    r[w * n + j] = -d;
                }
                rows.push((r, Q::zero()));
            }
        }
        (obj, rows)
    }
}

fn run_lp<F: Field>(obj: &[Q], rows: &[(Vec<Q>, Q)], rule: PivotRule) -> simplex::LpResult<F> {
    let mut lp = LinearProgram::new(obj.len(), obj.iter().map(F::from_q).collect());
    for (r, rhs) in rows {
        lp.push(r.iter().map(F::from_q).collect(), Cmp::Le, F::from_q(rhs));
    }
    lp.solve(rule)
}

pub fn solve_lp(inst: &Instance, n: usize) -> Result<LpSolution, OracleError> {
    solve_grid(&discretize(inst, n, &[])?, Arithmetic::Auto)
}

pub fn solve_grid(g: &GridInstance, arith: Arithmetic) -> Result<LpSolution, OracleError> {
    let (obj, rows) = g.program();
    let nv = obj.len();
    if rows.len() * (nv + rows.len()) > TABLEAU_LIMIT {
        return Err(OracleError::SizeLimit(format!("{} rows x {} variables", rows.len(), nv)));
    }
    let exact = match arith {
        Arithmetic::Exact => true,
        Arithmetic::Float => false,
        Arithmetic::Auto => nv <= EXACT_VAR_LIMIT,
    };
    let (x, duals, objective, exact_obj, pivots, xq) = if exact {
        let res = run_lp::<Q>(&obj, &rows, PivotRule::Bland);
        if res.status != LpStatus::Optimal {
            return Err(OracleError::Lp(res.status));
        }
        let xf = res.x.iter().map(to_f64).collect();
        let df = res.duals.iter().map(to_f64).collect();
        (xf, df, to_f64(&res.objective), Some(res.objective.clone()), res.pivots, Some(res.x))
    } else {
        let res = run_lp::<f64>(&obj, &rows, PivotRule::Dantzig);
        if res.status != LpStatus::Optimal {
            return Err(OracleError::Lp(res.status));
        }
        (res.x, res.duals, res.objective, None, res.pivots, None)
    };
    let pts = g.steps();
    let n = pts.len();
    let mut allocations = Vec::with_capacity(g.m());
    let mut payments = Vec::with_capacity(g.m());
    for item in 0..g.m() {
        let mut a = 0.0;
        let mut p = 0.0;
        let mut al = vec![0.0];
        let mut pl = vec![0.0];
        for j in 0..n {
            let d = x[item * n + j].max(0.0);
            a += d;
            p += d * to_f64(&pts[j]);
            al.push(a.min(1.0));
            pl.push(p);
        }
        allocations.push(al);
        payments.push(pl);
    }
    let cap_duals = duals[..g.m()].to_vec();
    let mut ic_duals = BTreeMap::new();
    let mut k = g.m();
    for &e in &g.edges {
        let mut v = vec![0.0; n];
        for slot in v.iter_mut().skip(1) {
            *slot = duals[k];
            k += 1;
        }
        ic_duals.insert(e, v);
    }
    let exact_increments = xq.map(|xq| (0..g.m()).map(|item| xq[item * n..(item + 1) * n].to_vec()).collect());
    Ok(LpSolution {
        objective,
        exact_objective: exact_obj,
        grid: g.grid.clone(),
        allocations,
        payments,
        cap_duals,
        ic_duals,
        bound: to_f64(&g.bound),
        pivots,
        exact_increments,
    })
}

impl LpSolution {
    /// Distinct nonzero allocation levels per item, clustered at `tol`.
    pub fn menu_complexity(&self, tol: f64) -> MenuComplexity {
        let per_item: Vec<usize> = self
            .allocations
            .iter()
            .map(|al| {
                let mut lv: Vec<f64> = al.iter().copied().filter(|a| *a > tol).collect();
                lv.sort_by(f64::total_cmp);
                let mut count = 0;
                let mut last = f64::NEG_INFINITY;
                for a in lv {
                    if a - last > tol {
                        count += 1;
                        last = a;
                    }
                }
                count
            })
            .collect();
        MenuComplexity { total: per_item.iter().sum(), per_item }
    }

    /// The grid solution as a step mechanism. Exact when solved in rationals; float levels are
    /// converted and clamped otherwise.
    pub fn mechanism(&self) -> Mechanism {
        let pts = &self.grid[1..];
        let alloc = (0..self.allocations.len())
            .map(|item| {
                let mut level = Q::zero();
                let mut jumps = Vec::new();
                for (j, v) in pts.iter().enumerate() {
                    let d = match &self.exact_increments {
                        Some(xq) => xq[item][j].clone(),
                        None => {
                            let prev = crate::num::from_f64(self.allocations[item][j]).unwrap_or_else(Q::zero);
                            let cur = crate::num::from_f64(self.allocations[item][j + 1]).unwrap_or_else(Q::zero);
                            crate::num::pos_part(&(cur - prev))
                        }
                    };
                    if d.is_positive() {
                        level = crate::num::min_q(&(level + d), &Q::one());
                        jumps.push((v.clone(), level.clone()));
                    }
                }
                StepFn::new(jumps).expect("nonnegative increments")
            })
            .collect();
        Mechanism::new(alloc)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    while parent[x] != x {
        return find(parent, parent[x]);
    }
    x
}

fn is_forest(m: usize, edges: &[(ItemId, ItemId)]) -> bool {
    let mut parent: Vec<usize> = (0..m).collect();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}

/// Best posted prices on the grid's positive points with `p_worse <= p_better` on every edge;
/// an item may also be left unsold. Tree DP on forests, enumeration with range-max queries
/// for up to four items otherwise.
pub fn best_deterministic(g: &GridInstance) -> Result<Deterministic, OracleError> {
    let m = g.m();
    let n = g.steps().len();
    // option n is "not offered"
    let val: Vec<Vec<f64>> = (0..m).map(|item| (1..=n).map(|j| to_f64(&g.revenue[item][j])).chain(std::iter::once(0.0)).collect()).collect();
    let choice = if is_forest(m, &g.edges) {
        forest_dp(m, n + 1, &g.edges, &val)
    } else if m <= 4 {
        enumerate_prices(m, n + 1, &g.edges, &val)
    } else {
        return Err(OracleError::SizeLimit(format!("{m} items on a poset with undirected cycles")));
    };
    let prices: Vec<Option<Q>> = choice.iter().map(|&k| (k < n).then(|| g.grid[k + 1].clone())).collect();
    let revenue = choice.iter().enumerate().filter(|(_, &k)| k < n).map(|(item, &k)| g.revenue[item][k + 1].clone()).sum();
    Ok(Deterministic { prices, revenue })
}

fn forest_dp(m: usize, k: usize, edges: &[(ItemId, ItemId)], val: &[Vec<f64>]) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); m];
    for &(w, b) in edges {
        // flag: neighbour is the better endpoint
        adj[w].push((b, true));
        adj[b].push((w, false));
    }
    let mut order = Vec::new();
    let mut parent = vec![usize::MAX; m];
    let mut seen = vec![false; m];
    for root in 0..m {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            order.push(u);
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
    }
    let mut best: Vec<Vec<f64>> = val.to_vec();
    // for child c: the child's best option given each parent option
    let mut pick: Vec<Vec<usize>> = vec![Vec::new(); m];
    for &c in order.iter().rev() {
        let p = parent[c];
        if p == usize::MAX {
            continue;
        }
        let child_better = adj[p].iter().find(|(v, _)| *v == c).expect("tree edge").1;
        let mut arg = vec![0usize; k];
        if child_better {
            // child option >= parent option: suffix max
            let mut bi = k - 1;
            for o in (0..k).rev() {
                if best[c][o] >= best[c][bi] {
                    bi = o;
                }
                arg[o] = bi;
            }
        } else {
            let mut bi = 0;
            for o in 0..k {
                if best[c][o] > best[c][bi] {
                    bi = o;
                }
                arg[o] = bi;
            }
        }
        for o in 0..k {
            best[p][o] += best[c][arg[o]];
        }
        pick[c] = arg;
    }
    let mut choice = vec![0usize; m];
    for &u in &order {
        choice[u] = if parent[u] == usize::MAX {
            (0..k).fold(0, |bi, o| if best[u][o] > best[u][bi] { o } else { bi })
        } else {
            pick[u][choice[parent[u]]]
        };
    }
    choice
}

/// Sparse table for range-maximum queries returning the index of the maximum.
struct RangeMax {
    table: Vec<Vec<usize>>,
    vals: Vec<f64>,
}

impl RangeMax {
    fn new(vals: &[f64]) -> Self {
        let mut table = vec![(0..vals.len()).collect::<Vec<_>>()];
        let mut w = 1;
        while 2 * w <= vals.len() {
            let prev = table.last().unwrap();
            let next = (0..=vals.len() - 2 * w)
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + w]);
                    if vals[b] > vals[a] { b } else { a }
                })
                .collect();
            table.push(next);
            w *= 2;
        }
        RangeMax { table, vals: vals.to_vec() }
    }

    /// Index of the maximum on `lo..=hi`.
    fn query(&self, lo: usize, hi: usize) -> usize {
        let len = hi - lo + 1;
        let lvl = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let (a, b) = (self.table[lvl][lo], self.table[lvl][hi + 1 - (1 << lvl)]);
        if self.vals[b] > self.vals[a] { b } else { a }
    }
}

fn enumerate_prices(m: usize, k: usize, edges: &[(ItemId, ItemId)], val: &[Vec<f64>]) -> Vec<usize> {
    let last = m - 1;
    let rmq = RangeMax::new(&val[last]);
    let mut best = (f64::NEG_INFINITY, vec![0; m]);
    let mut cur = vec![0usize; m];
    fn rec(i: usize, last: usize, k: usize, edges: &[(ItemId, ItemId)], val: &[Vec<f64>], rmq: &RangeMax, cur: &mut Vec<usize>, acc: f64, best: &mut (f64, Vec<usize>)) {
        if i == last {
            let mut lo = 0;
            let mut hi = k - 1;
            for &(w, b) in edges {
                if b == last {
                    lo = lo.max(cur[w]);
                } else if w == last {
                    hi = hi.min(cur[b]);
                }
            }
            if lo > hi {
                return;
            }
            let o = rmq.query(lo, hi);
            let total = acc + val[last][o];
            if total > best.0 {
                cur[last] = o;
                *best = (total, cur.clone());
            }
            return;
        }
        'opt: for o in 0..k {
            for &(w, b) in edges {
                let ok = if w == i && b < i { o <= cur[b] } else if b == i && w < i { cur[w] <= o } else { true };
                if !ok {
                    continue 'opt;
                }
            }
            cur[i] = o;
            rec(i + 1, last, k, edges, val, rmq, cur, acc + val[i][o], best);
        }
    }
    rec(0, last, k, edges, val, &rmq, &mut cur, 0.0, &mut best);
    best.1
}

/// Solves `A x = b` exactly; `None` when singular.
fn solve_square(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
                let t = &f * &b[col];
                b[r] -= t;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Optimum of the grid program by trying every basis: each choice of `n_vars` tight
/// constraints (including nonnegativity) whose solution is feasible.
pub fn vertex_enumeration(g: &GridInstance) -> Result<Q, OracleError> {
    let (obj, rows) = g.program();
    let nv = obj.len();
    let mut all: Vec<(Vec<Q>, Q)> = rows;
    for j in 0..nv {
        let mut r = vec![Q::zero(); nv];
        r[j] = -Q::one();
        all.push((r, Q::zero()));
    }
    if nv > 10 || all.len() > 24 {
        return Err(OracleError::SizeLimit(format!("{nv} variables, {} constraints", all.len())));
    }
    let mut best: Option<Q> = None;
    let total = all.len();
    let mut idx: Vec<usize> = (0..nv).collect();
    loop {
        let a = idx.iter().map(|&i| all[i].0.clone()).collect();
        let b = idx.iter().map(|&i| all[i].1.clone()).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = all.iter().all(|(r, rhs)| r.iter().zip(&x).map(|(c, v)| c * v).sum::<Q>() <= *rhs);
            if feasible {
                let val: Q = obj.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|bv| val > *bv) {
                    best = Some(val);
                }
            }
        }
        // next combination
        let mut i = nv;
        loop {
            if i == 0 {
                return Ok(best.unwrap_or_else(Q::zero));
            }
            i -= 1;
            if idx[i] < total - nv + i {
                idx[i] += 1;
                for j in i + 1..nv {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DensityDist, MarginalDist};
    use crate::dmr::solve_dmr;
    use crate::num::{q, qr};
    use crate::poset::ItemPoset;
    use crate::verify::revenue;
    use proptest::prelude::*;

    fn uniform_single(h: i64) -> Instance {
        Instance::new(ItemPoset::new(&["G"], &[]).unwrap(), q(h), vec![MarginalDist::Density(DensityDist::uniform(q(1), q(h)))]).unwrap()
    }

    #[test]
    fn two_point_uniform_grid() {
        let g = discretize(&uniform_single(1), 2, &[]).unwrap();
        assert_eq!(g.grid, vec![q(0), qr(1, 2), q(1)]);
        assert_eq!(g.masses[0], vec![qr(1, 2), qr(1, 2), q(0)]);
        assert_eq!(g.virtual_values[0][0], Some(-qr(1, 2)));
        assert_eq!(g.virtual_values[0][1], Some(qr(1, 2)));
        assert_eq!(g.virtual_values[0][2], None);
    }

    #[test]
    fn virtual_values_converge() {
        let inst = uniform_single(1);
        let mut prev = f64::INFINITY;
        for n in [50, 100, 200, 400] {
            let g = discretize(&inst, n, &[]).unwrap();
            let i = n / 4;
            // continuous value 2v - 1 at v = 1/4
            let err = (to_f64(g.virtual_values[0][i].as_ref().unwrap()) - (2.0 * to_f64(&g.grid[i]) - 1.0)).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn single_item_is_posted_reserve() {
        let inst = uniform_single(1);
        let sol = solve_grid(&discretize(&inst, 10, &[]).unwrap(), Arithmetic::Exact).unwrap();
        assert_eq!(sol.exact_objective, Some(qr(1, 4)));
        let mech = sol.mechanism();
        assert_eq!(mech.allocation[0], StepFn::posted(qr(1, 2)));
        let det = best_deterministic(&discretize(&inst, 10, &[]).unwrap()).unwrap();
        assert_eq!(det.revenue, qr(1, 4));
        assert_eq!(det.prices, vec![Some(qr(1, 2))]);
    }

    #[test]
    fn float_and_exact_agree() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        let ms = vec![
            MarginalDist::Density(DensityDist::new(qr(1, 3), vec![q(0), q(2), q(4)], vec![qr(1, 8), qr(3, 8)]).unwrap()),
            MarginalDist::Density(DensityDist::uniform(qr(1, 3), q(4))),
            MarginalDist::Density(DensityDist::uniform(qr(1, 3), q(4))),
        ];
        let inst = Instance::new(p, q(4), ms).unwrap();
        let g = discretize(&inst, 8, &[]).unwrap();
        let ex = solve_grid(&g, Arithmetic::Exact).unwrap();
        let fl = solve_grid(&g, Arithmetic::Float).unwrap();
        assert!((ex.objective - fl.objective).abs() < 1e-9);
        assert_eq!(revenue(&inst, &ex.mechanism()), ex.exact_objective.clone().unwrap());
        let det = best_deterministic(&g).unwrap();
        assert!(to_f64(&det.revenue) <= ex.objective + 1e-12);
    }

    #[test]
    fn dmr_instance_within_grid_bound() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        let u = || MarginalDist::Density(DensityDist::uniform(qr(1, 3), q(1)));
        let inst = Instance::new(p, q(1), vec![u(), u(), u()]).unwrap();
        let (pv, _) = solve_dmr(&inst).unwrap();
        let rev = to_f64(&revenue(&inst, &Mechanism::posted_prices(&pv.prices)));
        let sol = solve_lp(&inst, 200).unwrap();
        assert!(sol.objective <= rev + 1e-9);
        assert!(rev - sol.objective <= 2.0 / 200.0);
        let det = best_deterministic(&discretize(&inst, 200, &[]).unwrap()).unwrap();
        assert!((to_f64(&det.revenue) - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn diamond_uses_enumeration() {
        let p = ItemPoset::new(&["A", "B", "C", "D"], &[("D", "B"), ("D", "C"), ("B", "A"), ("C", "A")]).unwrap();
        assert!(!is_forest(4, p.edges()));
        let ms = (1..=4).map(|k| MarginalDist::Density(DensityDist::new(qr(1, 4), vec![q(0), q(k), q(5)], vec![qr(1, 10), (Q::one() - qr(k, 10)) / q(5 - k)]).unwrap())).collect();
        let inst = Instance::new(p, q(5), ms).unwrap();
        let g = discretize(&inst, 10, &[]).unwrap();
        let det = best_deterministic(&g).unwrap();
        // brute force over all 11^4 options
        let n = g.grid.len() - 1;
        let mut best = Q::zero();
        for code in 0..(n + 1).pow(4) {
            let o: Vec<usize> = (0..4).map(|i| code / (n + 1).pow(i as u32) % (n + 1)).collect();
            if g.edges.iter().all(|&(w, b)| o[w] <= o[b]) {
                let r: Q = (0..4).filter(|&i| o[i] < n).map(|i| g.revenue[i][o[i] + 1].clone()).sum();
                if r > best {
                    best = r;
                }
            }
        }
        assert_eq!(det.revenue, best);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tiny_programs_match_vertex_enumeration(w in proptest::collection::vec(1i64..6, 4), two in any::<bool>()) {
            let h = 2;
            let dist = |a: i64, b: i64| MarginalDist::Density(DensityDist::new(qr(1, if two { 2 } else { 1 }), vec![q(0), q(1), q(h)], vec![qr(a, a + b), qr(b, a + b)]).unwrap());
            let inst = if two {
                Instance::new(ItemPoset::new(&["A", "C"], &[("C", "A")]).unwrap(), q(h), vec![dist(w[0], w[1]), dist(w[2], w[3])]).unwrap()
            } else {
                Instance::new(ItemPoset::new(&["A"], &[]).unwrap(), q(h), vec![dist(w[0], w[1])]).unwrap()
            };
            let g = discretize(&inst, 4, &[]).unwrap();
            prop_assert!(g.grid.len() - 1 <= 4);
            let lp = solve_grid(&g, Arithmetic::Exact).unwrap();
            prop_assert_eq!(lp.exact_objective.unwrap(), vertex_enumeration(&g).unwrap());
        }

        #[test]
        fn refinement_never_lowers_objective(k in 1usize..4) {
            let inst = uniform_single(3);
            let coarse = solve_grid(&discretize(&inst, 3 * k, &[]).unwrap(), Arithmetic::Exact).unwrap();
            let fine = solve_grid(&discretize(&inst, 6 * k, &[]).unwrap(), Arithmetic::Exact).unwrap();
            prop_assert!(fine.exact_objective.unwrap() >= coarse.exact_objective.unwrap());
        }
    }
}
