//! Closed-form optimal mechanism and dual when every item has at most one strictly better
//! neighbour.

use crate::dist::{DistError, Instance, MarginalDist, DEFAULT_SAMPLES};
use crate::dual::{support_intervals, DualSolution, FlowVar};
use crate::num::Q;
use crate::poset::ItemId;
use crate::pwl::{lower_hull, Pwl};
use crate::verify::{Mechanism, StepFn};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("item {item} has {degree} strictly better neighbours; at most one is supported")]
    OutDegree { item: ItemId, degree: usize },
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Cumulative curve of an item together with everything it absorbs from worse items.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulativeCurve {
    /// Derivative of `cumulative` (piecewise constant).
    pub marginal: Pwl,
    /// `-R_G` plus the clamped curves of all worse neighbours.
    pub cumulative: Pwl,
    /// Lower convex envelope of `cumulative`.
    pub hull: Pwl,
    /// Largest minimizer of `cumulative`.
    pub reserve: Q,
    /// `hull` left of `reserve`, constant from there.
    pub clamped: Pwl,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainSolution {
    pub mechanism: Mechanism,
    pub dual: DualSolution,
    pub curves: Vec<CumulativeCurve>,
    /// The instance the certificate refers to. Density marginals are replaced by their exact
    /// piecewise-linear revenue-curve approximation.
    pub instance: Instance,
}

/// `2^m - 1`.
pub fn menu_bound(m: u32) -> u64 {
    (1u64 << m) - 1
}

fn successor(inst: &Instance) -> Result<Vec<Option<ItemId>>, ChainError> {
    let mut out = vec![None; inst.m()];
    for g in 0..inst.m() {
        let succ: Vec<ItemId> = inst.poset.edges().iter().filter(|(w, _)| *w == g).map(|(_, b)| *b).collect();
        if succ.len() > 1 {
            return Err(ChainError::OutDegree { item: g, degree: succ.len() });
        }
        out[g] = succ.first().copied();
    }
    Ok(out)
}

/// Replaces density marginals by curve marginals so all cumulative curves are piecewise linear.
pub fn curve_instance(inst: &Instance) -> Result<Instance, ChainError> {
    let marginals = inst
        .marginals
        .iter()
        .map(|m| match m {
            MarginalDist::Curve(_) => Ok(m.clone()),
            MarginalDist::Density(_) => Ok(MarginalDist::Curve(m.to_curve(DEFAULT_SAMPLES)?)),
        })
        .collect::<Result<Vec<_>, DistError>>()?;
    Ok(Instance { marginals, ..inst.clone() })
}

fn revenue_pwl(m: &MarginalDist) -> Pwl {
    match m {
        MarginalDist::Curve(c) => c.curve().clone(),
        MarginalDist::Density(_) => unreachable!("converted by curve_instance"),
    }
}

fn largest_argmin(f: &Pwl) -> Q {
    let verts = f.vertices();
    let min = verts.iter().map(|(_, y)| y).min().expect("nonempty").clone();
    verts.into_iter().filter(|(_, y)| *y == min).map(|(x, _)| x).max().expect("nonempty")
}

/// Cumulative curves for all items, worst first. Requires piecewise-linear revenue curves (see
/// [`curve_instance`]).
pub fn build_curves(inst: &Instance) -> Result<Vec<CumulativeCurve>, ChainError> {
    let succ = successor(inst)?;
    let inst = curve_instance(inst)?;
    let mut curves: Vec<Option<CumulativeCurve>> = vec![None; inst.m()];
    for g in inst.poset.topo_order() {
        let mut cum = revenue_pwl(&inst.marginals[g]).neg();
        for w in (0..inst.m()).filter(|&w| succ[w] == Some(g)) {
            cum = cum.add(&curves[w].as_ref().expect("worse items first").clamped);
        }
        let cum = cum.simplify();
        let hull = Pwl::from_vertices(&lower_hull(&cum.vertices())).expect("sorted hull");
        let reserve = largest_argmin(&cum);
        let at_r = cum.eval(&reserve);
        let mut pts: Vec<(Q, Q)> = hull.vertices().into_iter().filter(|(x, _)| *x < reserve).collect();
        pts.push((reserve.clone(), at_r.clone()));
        if reserve < inst.h {
            pts.push((inst.h.clone(), at_r));
        }
        let clamped = if pts.len() == 1 {
            Pwl::constant(Q::zero(), inst.h.clone(), pts[0].1.clone())
        } else {
            Pwl::from_vertices(&pts).expect("sorted")
        };
        curves[g] = Some(CumulativeCurve { marginal: cum.derivative(), cumulative: cum, hull, reserve, clamped });
    }
    Ok(curves.into_iter().map(|c| c.expect("every item visited")).collect())
}

/// Flow from an item to its better neighbour: atoms at the hull kinks below the reserve and at
/// the reserve, so that the cumulative tail equals the negated hull slope there.
fn closed_form_flow(c: &CumulativeCurve) -> FlowVar {
    let slope = c.hull.derivative();
    let mut atoms = Vec::new();
    for k in 1..slope.pieces() {
        let x = &slope.breakpoints()[k];
        if x.is_positive() && *x < c.reserve {
            atoms.push((x.clone(), slope.jump_at(k)));
        }
    }
    if c.reserve.is_positive() {
        atoms.push((c.reserve.clone(), -slope.left_limit(&c.reserve)));
    }
    FlowVar::from_atoms(atoms)
}

/// Allocation of a worse item from its better neighbour's: steps at points where the cumulative
/// curve is ironed are split between the ironed interval's endpoints, keeping their barycenter.
fn split_allocation(dominator: &StepFn, c: &CumulativeCurve, ironed: &[(Q, Q)]) -> StepFn {
    let mut inc: BTreeMap<Q, Q> = BTreeMap::new();
    for (v, d) in dominator.increments() {
        if v > c.reserve {
            break;
        }
        match ironed.iter().find(|(a, b)| *a < v && v < *b) {
            None => *inc.entry(v).or_insert_with(Q::zero) += d,
            Some((lo, hi)) => {
                let delta = (hi - &v) / (hi - lo);
                *inc.entry(lo.clone()).or_insert_with(Q::zero) += &delta * &d;
                *inc.entry(hi.clone()).or_insert_with(Q::zero) += (Q::one() - delta) * d;
            }
        }
    }
    let mut level = Q::zero();
    let mut jumps = Vec::new();
    for (v, d) in inc {
        if v >= c.reserve {
            break;
        }
        level += d;
        jumps.push((v, level.clone()));
    }
    jumps.push((c.reserve.clone(), Q::one()));
    StepFn::new(jumps).expect("split increments keep the allocation monotone")
}

pub fn solve_chain(inst: &Instance) -> Result<ChainSolution, ChainError> {
    let succ = successor(inst)?;
    let curves = build_curves(inst)?;
    let inst = curve_instance(inst)?;
    let m = inst.m();
    let mut lambda = Vec::with_capacity(m);
    let mut ironed = Vec::with_capacity(m);
    for c in &curves {
        let l = c.cumulative.sub(&c.hull).simplify();
        ironed.push(support_intervals(&l));
        lambda.push(l);
    }
    let mut flows = BTreeMap::new();
    for g in 0..m {
        if let Some(d) = succ[g] {
            let f = closed_form_flow(&curves[g]);
            if !f.atoms.is_empty() {
                flows.insert((g, d), f);
            }
        }
    }
    let mut alloc: Vec<Option<StepFn>> = vec![None; m];
    for g in inst.poset.topo_order().into_iter().rev() {
        alloc[g] = Some(match succ[g] {
            None => StepFn::posted(curves[g].reserve.clone()),
            Some(d) => split_allocation(alloc[d].as_ref().expect("better items first"), &curves[g], &ironed[g]),
        });
    }
    let mechanism = Mechanism::new(alloc.into_iter().map(|a| a.expect("every item visited")).collect());
    Ok(ChainSolution { mechanism, dual: DualSolution { lambda, flows }, curves, instance: inst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{CurveDist, DensityDist};
    use crate::dmr::solve_dmr;
    use crate::master::{generate, DualSpec, ItemSpec};
    use crate::num::{q, qr};
    use crate::poset::ItemPoset;
    use crate::verify::{cs_check, menu_complexity, revenue};
    use proptest::prelude::*;

    #[test]
    fn bound_values() {
        assert_eq!(menu_bound(1), 1);
        assert_eq!(menu_bound(3), 7);
        assert_eq!(menu_bound(5), 31);
    }

    #[test]
    fn single_item_posts_reserve() {
        let r = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), qr(3, 2)), (q(4), q(0))]).unwrap();
        let inst = Instance::new(ItemPoset::new(&["G"], &[]).unwrap(), q(4), vec![MarginalDist::Curve(CurveDist::new(r.clone()).unwrap())]).unwrap();
        let sol = solve_chain(&inst).unwrap();
        assert_eq!(sol.curves[0].cumulative, r.neg().simplify());
        assert_eq!(sol.curves[0].reserve, q(2));
        assert_eq!(sol.mechanism.allocation[0], StepFn::posted(q(2)));
        assert_eq!(menu_complexity(&sol.mechanism).total, 1);
    }

    #[test]
    fn dmr_line_agrees_with_pricing() {
        let p = ItemPoset::new(&["C", "A"], &[("C", "A")]).unwrap();
        let c = MarginalDist::Density(DensityDist::uniform(qr(1, 2), q(2)));
        let a = MarginalDist::Density(DensityDist::new(qr(1, 2), vec![q(0), q(1), q(2)], vec![qr(1, 4), qr(3, 4)]).unwrap());
        let inst = Instance::new(p, q(2), vec![c, a]).unwrap();
        let sol = solve_chain(&inst).unwrap();
        let (pv, _) = solve_dmr(&sol.instance).unwrap();
        assert_eq!(sol.curves.iter().map(|c| c.reserve.clone()).collect::<Vec<_>>(), pv.prices);
    }

    #[test]
    fn two_sources_share_a_sink() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("B", "A"), ("C", "A")]).unwrap();
        let u = || MarginalDist::Density(DensityDist::uniform(qr(1, 3), q(1)));
        let inst = Instance::new(p, q(1), vec![u(), u(), u()]).unwrap();
        let curves = build_curves(&inst).unwrap();
        let own = curve_instance(&inst).unwrap();
        let expect = revenue_pwl(&own.marginals[0]).neg().add(&curves[1].clamped).add(&curves[2].clamped);
        assert_eq!(curves[0].cumulative, expect.simplify());
    }

    #[test]
    fn dominated_item_randomizes_once() {
        // worse item C has a dip straddling the better item's price
        let h = q(16);
        let p = ItemPoset::new(&["C", "A"], &[("C", "A")]).unwrap();
        let spec = DualSpec {
            poset: p,
            h: h.clone(),
            items: vec![ItemSpec::new(q(4), q(12), vec![(q(5), q(11))]), ItemSpec::new(q(8), q(8), vec![])],
            flows: BTreeMap::new(),
        };
        let (inst, _) = generate(&spec).unwrap();
        let sol = solve_chain(&inst).unwrap();
        let rep = cs_check(&sol.instance, &sol.mechanism, &sol.dual, &Q::zero());
        assert!(rep.is_clean(), "{:?}", rep.cs_violations);
        assert!(rep.duality_gap.is_zero());
        let c = &sol.mechanism.allocation[0];
        assert_eq!(c.jumps().len(), 2);
        assert!(c.jumps()[0].1 < Q::one());
    }

    #[test]
    fn three_line_menu_bound() {
        let h = q(16);
        let p = ItemPoset::new(&["C", "B", "A"], &[("C", "B"), ("B", "A")]).unwrap();
        let spec = DualSpec {
            poset: p,
            h,
            items: vec![
                ItemSpec::new(q(2), q(13), vec![(q(3), q(6)), (q(7), q(12))]),
                ItemSpec::new(q(3), q(12), vec![(q(4), q(9)), (q(10), q(11))]),
                ItemSpec::new(q(6), q(10), vec![(q(6), q(10))]),
            ],
            flows: BTreeMap::new(),
        };
        let (inst, _) = generate(&spec).unwrap();
        let sol = solve_chain(&inst).unwrap();
        assert!(cs_check(&sol.instance, &sol.mechanism, &sol.dual, &Q::zero()).is_clean());
        assert!(menu_complexity(&sol.mechanism).total as u64 <= menu_bound(3));
        assert_eq!(revenue(&sol.instance, &sol.mechanism), crate::dual::dual_objective(&sol.instance, &sol.dual));
    }

    #[test]
    fn rejects_out_degree_two() {
        let p = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
        let u = || MarginalDist::Density(DensityDist::uniform(qr(1, 3), q(1)));
        let inst = Instance::new(p, q(1), vec![u(), u(), u()]).unwrap();
        assert!(matches!(solve_chain(&inst), Err(ChainError::OutDegree { item: 2, degree: 2 })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn random_lines_are_certified(m in 2usize..=4, cuts in proptest::collection::vec(proptest::collection::vec(0i64..56, 2..7), 4)) {
            let names = ["G0", "G1", "G2", "G3"];
            let edges: Vec<(&str, &str)> = (0..m - 1).map(|i| (names[i], names[i + 1])).collect();
            let p = ItemPoset::new(&names[..m], &edges).unwrap();
            let items = cuts[..m].iter().map(|c| {
                let mut xs: Vec<Q> = c.iter().map(|x| Q::one() + qr(*x, 4)).collect();
                xs.sort();
                xs.dedup();
                let inner = if xs.len() > 2 { &xs[1..xs.len() - 1] } else { &[] };
                let ivs = inner.chunks(2).filter(|w| w.len() == 2).map(|w| (w[0].clone(), w[1].clone())).collect();
                ItemSpec::new(xs[0].clone(), xs.last().unwrap().clone(), ivs)
            }).collect();
            let spec = DualSpec { poset: p, h: q(16), items, flows: BTreeMap::new() };
            let (inst, _) = generate(&spec).unwrap();
            let sol = solve_chain(&inst).unwrap();
            let rep = cs_check(&sol.instance, &sol.mechanism, &sol.dual, &Q::zero());
            prop_assert!(rep.is_clean());
            prop_assert!(rep.duality_gap.is_zero());
            prop_assert!(sol.dual.validate(&sol.instance).is_ok());
            prop_assert!(menu_complexity(&sol.mechanism).total as u64 <= menu_bound(m as u32));
            for (g, a) in sol.mechanism.allocation.iter().enumerate() {
                prop_assert_eq!(a.eval(&sol.curves[g].reserve), Q::one());
            }
        }
    }
}
