//! Optimal deterministic pricing when every marginal has declining marginal revenue, with a
//! flow certificate for the posted prices.

use crate::dist::Instance;
use crate::dual::{DualSolution, FlowVar};
use crate::num::Q;
use crate::oracle::simplex::{Cmp, LinearProgram, LpStatus, PivotRule};
use crate::poset::ItemId;
use crate::pwl::{argmin_integral, Pwl};
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

/// Largest item count for the subset enumeration in [`solve_dmr`].
pub const MAX_ITEMS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmrError {
    #[error("marginal of item {0} does not have declining marginal revenue")]
    NotDmr(ItemId),
    #[error("{0} items exceed the enumeration limit of {MAX_ITEMS}")]
    TooManyItems(usize),
    #[error("item {0} is not strictly better than the base item")]
    NotDominated(ItemId),
    #[error("flow routing failed for the block at price {0}")]
    Stuck(f64),
    #[error("expected {want} prices, got {got}")]
    Arity { want: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriceVector {
    pub prices: Vec<Q>,
    /// Lowest price among the strictly better neighbours; `H` for maximal items.
    pub upper_bounds: Vec<Q>,
}

/// Summed revenue curve of a base item and the clamped curves of better items.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedCurve {
    /// Negated derivative of the summed curve, exact.
    pub fphi: Pwl,
    /// Summed revenue curve sampled on the breakpoint grid.
    pub revenue: Pwl,
    /// Largest maximizer.
    pub maximizer: Q,
}

fn masks_closed(m: usize, edges: &[(ItemId, ItemId)], upward: bool) -> Vec<u32> {
    (0u32..1 << m)
        .filter(|s| {
            edges.iter().all(|&(w, b)| {
                let (from, to) = if upward { (w, b) } else { (b, w) };
                s & (1 << from) == 0 || s & (1 << to) != 0
            })
        })
        .collect()
}

/// Largest maximizer of the summed revenue curve over the items in `set`.
fn block_reserve(fphis: &[Pwl], set: u32) -> Q {
    let mut acc: Option<Pwl> = None;
    for (g, f) in fphis.iter().enumerate() {
        if set & (1 << g) != 0 {
            acc = Some(match acc {
                None => f.clone(),
                Some(a) => a.add(f),
            });
        }
    }
    argmin_integral(&acc.expect("nonempty set")).0
}

/// Optimal monotone prices: for every item the max over upper sets containing it of the min over
/// lower sets containing it of the block reserve of their intersection.
pub fn solve_dmr(inst: &Instance) -> Result<(PriceVector, DualSolution), DmrError> {
    let m = inst.m();
    if m > MAX_ITEMS {
        return Err(DmrError::TooManyItems(m));
    }
    if let Some(g) = (0..m).find(|&g| !inst.marginals[g].is_dmr(&Q::zero())) {
        return Err(DmrError::NotDmr(g));
    }
    let fphis: Vec<Pwl> = inst.marginals.iter().map(|d| d.fphi()).collect();
    let edges = inst.poset.edges();
    let uppers = masks_closed(m, edges, true);
    let lowers = masks_closed(m, edges, false);
    let mut memo: HashMap<u32, Q> = HashMap::new();
    let mut prices = Vec::with_capacity(m);
    for g in 0..m {
        let bit = 1u32 << g;
        let mut best: Option<Q> = None;
        for u in uppers.iter().filter(|u| *u & bit != 0) {
            let mut worst: Option<Q> = None;
            for l in lowers.iter().filter(|l| *l & bit != 0) {
                let s = u & l;
                let a = memo.entry(s).or_insert_with(|| block_reserve(&fphis, s)).clone();
                if worst.as_ref().is_none_or(|w| a < *w) {
                    worst = Some(a);
                }
            }
            let worst = worst.expect("the full set is a lower set");
            if best.as_ref().is_none_or(|b| worst > *b) {
                best = Some(worst);
            }
        }
        prices.push(best.expect("the full set is an upper set"));
    }
    let upper_bounds = (0..m)
        .map(|g| {
            edges.iter().filter(|(w, _)| *w == g).map(|(_, b)| prices[*b].clone()).min().unwrap_or_else(|| inst.h.clone())
        })
        .collect();
    let pv = PriceVector { prices, upper_bounds };
    let dual = dmr_flow_certificate(inst, &pv.prices)?;
    Ok((pv, dual))
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Flow certificate with zero ironing for posted `prices`. Items joined by equal-price edges
/// form a block; inside a block at price `c`, flow atoms sit at `c` and at `H`, with the least
/// total mass that puts every `f Φ` at or below zero left of `c` and at or above zero from `c`.
pub fn dmr_flow_certificate(inst: &Instance, prices: &[Q]) -> Result<DualSolution, DmrError> {
    let m = inst.m();
    if prices.len() != m {
        return Err(DmrError::Arity { want: m, got: prices.len() });
    }
    let mut parent: Vec<usize> = (0..m).collect();
    for &(w, b) in inst.poset.edges() {
        if prices[w] == prices[b] {
            let (rw, rb) = (find(&mut parent, w), find(&mut parent, b));
            parent[rw] = rb;
        }
    }
    let mut blocks: BTreeMap<usize, Vec<ItemId>> = BTreeMap::new();
    for g in 0..m {
        let r = find(&mut parent, g);
        blocks.entry(r).or_default().push(g);
    }
    let mut dual = DualSolution::zero(inst);
    for items in blocks.values() {
        let c = &prices[items[0]];
        let stuck = || DmrError::Stuck(crate::num::to_f64(c));
        let fphis: Vec<Pwl> = items.iter().map(|&g| inst.marginals[g].fphi()).collect();
        // f Φ_G(c) + t_G >= 0 and f Φ_G(c-) + s_G + t_G <= 0, where s, t are net outflows at c, H
        let at: Vec<Q> = fphis.iter().map(|f| f.eval(c)).collect();
        let before: Vec<Q> = fphis.iter().map(|f| if c.is_positive() { f.left_limit(c) } else { f.eval(c) }).collect();
        let bedges: Vec<(ItemId, ItemId)> = inst.poset.edges().iter().copied().filter(|(w, b)| items.contains(w) && items.contains(b)).collect();
        if bedges.is_empty() {
            if at[0].is_negative() || before[0].is_positive() {
                return Err(stuck());
            }
            continue;
        }
        let n = 2 * bedges.len();
        let mut lp = LinearProgram::<Q>::new(n, vec![-Q::from_integer(1.into()); n]);
        for (i, &g) in items.iter().enumerate() {
            let mut only_h = vec![Q::zero(); n];
            let mut both = vec![Q::zero(); n];
            for (e, &(w, b)) in bedges.iter().enumerate() {
                let sign = if w == g { Q::from_integer(1.into()) } else if b == g { Q::from_integer((-1).into()) } else { continue };
                only_h[2 * e + 1] = sign.clone();
                both[2 * e] = sign.clone();
                both[2 * e + 1] = sign;
            }
            lp.push(only_h, Cmp::Ge, -at[i].clone());
            lp.push(both, Cmp::Le, -before[i].clone());
        }
        let res = lp.solve(PivotRule::Bland);
        if res.status != LpStatus::Optimal {
            return Err(stuck());
        }
        for (e, &(w, b)) in bedges.iter().enumerate() {
            let atoms = vec![(c.clone(), res.x[2 * e].clone()), (inst.h.clone(), res.x[2 * e + 1].clone())];
            let fv = FlowVar::from_atoms(atoms);
            if !fv.atoms.is_empty() {
                dual.flows.insert((w, b), fv);
            }
        }
    }
    Ok(dual)
}

/// `R_base(p) + Σ_{G ∈ set} R_G(max(p, r_G))`, where `r_G` is the monopoly reserve of `G`.
pub fn compose_pricing_curve(inst: &Instance, base: ItemId, set: &[ItemId]) -> Result<ComposedCurve, DmrError> {
    let closure = inst.poset.closure();
    let mut fphi = inst.marginals[base].fphi();
    for &g in set {
        if !closure[base][g] {
            return Err(DmrError::NotDominated(g));
        }
        let md = &inst.marginals[g];
        fphi = fphi.add(&md.fphi().zero_below(&md.monopoly_reserve()));
    }
    let maximizer = argmin_integral(&fphi).0;
    let mut xs: Vec<Q> = fphi.breakpoints().to_vec();
    for &g in std::iter::once(&base).chain(set) {
        xs.extend(inst.marginals[g].breakpoints());
    }
    xs.push(maximizer.clone());
    xs.sort();
    xs.dedup();
    let clamped = |g: ItemId, p: &Q| {
        let md = &inst.marginals[g];
        let r = md.monopoly_reserve();
        md.revenue_at(if *p < r { &r } else { p })
    };
    let pts: Vec<(Q, Q)> = xs
        .iter()
        .map(|p| (p.clone(), inst.marginals[base].revenue_at(p) + set.iter().map(|&g| clamped(g, p)).sum::<Q>()))
        .collect();
    let revenue = Pwl::from_vertices(&pts).expect("sorted grid");
    Ok(ComposedCurve { fphi, revenue, maximizer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DensityDist, MarginalDist};
    use crate::num::{q, qr};
    use crate::poset::ItemPoset;
    use crate::verify::{cs_check, ic_check, revenue, Mechanism};
    use proptest::prelude::*;

    fn uni(mass: Q, h: i64) -> MarginalDist {
        MarginalDist::Density(DensityDist::uniform(mass, q(h)))
    }

    fn certified(inst: &Instance) -> PriceVector {
        let (pv, d) = solve_dmr(inst).unwrap();
        let rep = cs_check(inst, &Mechanism::posted_prices(&pv.prices), &d, &Q::zero());
        assert!(rep.is_clean(), "{:?}", rep.cs_violations);
        assert!(rep.duality_gap.is_zero());
        pv
    }

    #[test]
    fn single_uniform() {
        let inst = Instance::new(ItemPoset::new(&["G"], &[]).unwrap(), q(1), vec![uni(q(1), 1)]).unwrap();
        let (pv, d) = solve_dmr(&inst).unwrap();
        assert_eq!(pv.prices, vec![qr(1, 2)]);
        assert!(d.flows.is_empty());
    }

    #[test]
    fn two_item_line_grid_search() {
        // C uniform on [0, 2] (reserve 1), A with density 1/4, 1/4, 1 on thirds of [0, 2] (reserve 4/3)
        let c = uni(qr(1, 2), 2);
        let a = increasing_steps(qr(1, 2), &[1, 1, 4], 2);
        let inst = Instance::new(ItemPoset::new(&["C", "A"], &[("C", "A")]).unwrap(), q(2), vec![c, a]).unwrap();
        let pv = certified(&inst);
        let mut best = (Q::zero(), q(0), q(0));
        for i in 0..=120 {
            for j in i..=120 {
                let p = [qr(i, 60), qr(j, 60)];
                let r = revenue(&inst, &Mechanism::posted_prices(&p));
                if r > best.0 {
                    best = (r, p[0].clone(), p[1].clone());
                }
            }
        }
        assert_eq!(vec![best.1, best.2], pv.prices);
        assert_eq!(pv.prices, vec![q(1), qr(4, 3)]);
    }

    #[test]
    fn pooled_star_matches_composed_curve() {
        // worst item has the highest reserve, so its price is pooled down to the composed maximizer
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        let h = 4;
        let c = MarginalDist::Density(DensityDist::new(qr(1, 2), vec![q(0), q(3), q(4)], vec![qr(1, 12), qr(3, 4)]).unwrap());
        let inst = Instance::new(p, q(h), vec![uni(qr(1, 4), h), uni(qr(1, 4), h), c]).unwrap();
        assert!(inst.is_dmr(&Q::zero()));
        let pv = certified(&inst);
        let comp = compose_pricing_curve(&inst, 2, &[0, 1]).unwrap();
        assert_eq!(pv.prices[2], comp.maximizer);
        for g in [0, 1] {
            let r = inst.marginals[g].monopoly_reserve();
            assert_eq!(pv.prices[g], if r > pv.prices[2] { r } else { pv.prices[2].clone() });
        }
        assert!(compose_pricing_curve(&inst, 0, &[2]).is_err());
    }

    #[test]
    fn equal_reserves_need_no_flow() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        let inst = Instance::new(p, q(2), vec![uni(qr(1, 3), 2), uni(qr(1, 3), 2), uni(qr(1, 3), 2)]).unwrap();
        let (pv, d) = solve_dmr(&inst).unwrap();
        assert!(pv.prices.iter().all(|x| *x == q(1)));
        assert!(d.flows.is_empty());
        assert_eq!(compose_pricing_curve(&inst, 2, &[0, 1]).unwrap().maximizer, q(1));
    }

    #[test]
    fn rejects_non_dmr() {
        let bimodal = MarginalDist::Density(DensityDist::new(q(1), vec![q(0), q(1), q(9), q(10)], vec![qr(45, 100), qr(1, 1000), qr(542, 1000)]).unwrap());
        let inst = Instance::new(ItemPoset::new(&["G"], &[]).unwrap(), q(10), vec![bimodal]).unwrap();
        assert_eq!(solve_dmr(&inst).unwrap_err(), DmrError::NotDmr(0));
    }

    /// Nondecreasing step densities on equal-width pieces; these always have declining marginal
    /// revenue.
    fn increasing_steps(mass: Q, weights: &[i64], h: i64) -> MarginalDist {
        let mut w = weights.to_vec();
        w.sort();
        let k = w.len() as i64;
        let total: i64 = w.iter().sum();
        let xs = (0..=k).map(|i| qr(i * h, k)).collect();
        let dens = w.iter().map(|x| qr(*x * k, total * h)).collect();
        MarginalDist::Density(DensityDist::new(mass, xs, dens).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_line_and_star_certified(
            masses in proptest::collection::vec(1i64..5, 3),
            weights in proptest::collection::vec(proptest::collection::vec(1i64..6, 1..4), 3),
            star in any::<bool>(),
        ) {
            let edges: &[(&str, &str)] = if star { &[("C", "A"), ("C", "B")] } else { &[("C", "B"), ("B", "A")] };
            let p = ItemPoset::new(&["A", "B", "C"], edges).unwrap();
            let total: i64 = masses.iter().sum();
            let marg = masses.iter().zip(&weights).map(|(m, w)| increasing_steps(qr(*m, total), w, 8)).collect();
            let inst = Instance::new(p, q(8), marg).unwrap();
            prop_assert!(inst.is_dmr(&Q::zero()));
            let (pv, d) = solve_dmr(&inst).unwrap();
            let mech = Mechanism::posted_prices(&pv.prices);
            prop_assert!(ic_check(&inst, &mech).is_empty());
            let rep = cs_check(&inst, &mech, &d, &Q::zero());
            prop_assert!(rep.is_clean());
            prop_assert!(rep.duality_gap.is_zero());
        }
    }
}
