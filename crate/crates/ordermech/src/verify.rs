//! Step allocations, payments, revenue, menus and the optimality certificate check.

use crate::dist::Instance;
use crate::dual::{dual_objective, virtual_profile, DualSolution};
use crate::num::Q;
use crate::poset::ItemId;
use crate::pwl::Pwl;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("jump positions must be strictly increasing and nonnegative")]
    Positions,
    #[error("allocation must be nondecreasing within [0, 1] (at {0})")]
    NotMonotone(f64),
}

/// Right-continuous nondecreasing step function on `[0, H]` starting at 0. Each entry
/// `(v, a)` means the allocation is `a` from `v` until the next entry.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StepFn {
    jumps: Vec<(Q, Q)>,
}

impl StepFn {
    pub fn new(jumps: Vec<(Q, Q)>) -> Result<Self, StepError> {
        let mut prev_v: Option<&Q> = None;
        let mut prev_a = Q::zero();
        for (v, a) in &jumps {
            if v.is_negative() || prev_v.is_some_and(|p| p >= v) {
                return Err(StepError::Positions);
            }
            if *a < prev_a || *a > Q::one() {
                return Err(StepError::NotMonotone(crate::num::to_f64(v)));
            }
            prev_v = Some(v);
            prev_a = a.clone();
        }
        let mut s = StepFn { jumps };
        s.normalize();
        Ok(s)
    }

    pub fn zero() -> Self {
        StepFn::default()
    }

    pub fn posted(price: Q) -> Self {
        StepFn { jumps: vec![(price, Q::one())] }
    }

    /// Drops entries that do not change the level.
    fn normalize(&mut self) {
        let mut out: Vec<(Q, Q)> = Vec::with_capacity(self.jumps.len());
        let mut level = Q::zero();
        for (v, a) in self.jumps.drain(..) {
            if a != level {
                level = a.clone();
                out.push((v, a));
            }
        }
        self.jumps = out;
    }

    pub fn jumps(&self) -> &[(Q, Q)] {
        &self.jumps
    }

    pub fn eval(&self, v: &Q) -> Q {
        self.jumps.iter().take_while(|(p, _)| p <= v).last().map(|(_, a)| a.clone()).unwrap_or_else(Q::zero)
    }

    pub fn left_limit(&self, v: &Q) -> Q {
        self.jumps.iter().take_while(|(p, _)| p < v).last().map(|(_, a)| a.clone()).unwrap_or_else(Q::zero)
    }

    /// `(position, increment)` pairs.
    pub fn increments(&self) -> Vec<(Q, Q)> {
        let mut prev = Q::zero();
        self.jumps
            .iter()
            .map(|(v, a)| {
                let d = a - &prev;
                prev = a.clone();
                (v.clone(), d)
            })
            .collect()
    }

    /// `∫_0^v a`.
    pub fn utility(&self, v: &Q) -> Q {
        self.increments().into_iter().filter(|(p, _)| p <= v).map(|(p, d)| (v - p) * d).sum()
    }

    /// `v a(v) - ∫_0^v a`.
    pub fn payment(&self, v: &Q) -> Q {
        self.increments().into_iter().filter(|(p, _)| p <= v).map(|(p, d)| p * d).sum()
    }

    /// Distinct nonzero allocation levels.
    pub fn levels(&self) -> Vec<Q> {
        let set: BTreeSet<Q> = self.jumps.iter().map(|(_, a)| a.clone()).filter(|a| a.is_positive()).collect();
        set.into_iter().collect()
    }

    /// Menu rows `(probability, price)`.
    pub fn menu(&self) -> Vec<(Q, Q)> {
        self.jumps.iter().map(|(v, a)| (a.clone(), self.payment(v))).collect()
    }

    /// Same function with a redundant entry inserted at `v`; used to test representation
    /// invariance.
    pub fn split_at(&self, v: &Q) -> Vec<(Q, Q)> {
        let mut j = self.jumps.clone();
        if !j.iter().any(|(p, _)| p == v) {
            j.push((v.clone(), self.eval(v)));
            j.sort_by(|a, b| a.0.cmp(&b.0));
        }
        j
    }

    pub fn as_pwl(&self, h: &Q) -> Pwl {
        let mut xs = vec![Q::zero()];
        let mut vals = vec![Q::zero()];
        for (v, a) in &self.jumps {
            if v.is_zero() {
                vals[0] = a.clone();
            } else if v < h {
                xs.push(v.clone());
                vals.push(a.clone());
            }
        }
        xs.push(h.clone());
        Pwl::steps(xs, vals).expect("jumps are sorted")
    }
}

/// Allocation per item; payments follow from the payment identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Mechanism {
    pub allocation: Vec<StepFn>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcViolation {
    pub worse: ItemId,
    pub better: ItemId,
    pub v: f64,
    pub magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    Cs1,
    Cs2,
    Cs3,
    Cs4,
    DualFeasibility,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsViolation {
    pub condition: Condition,
    pub item: ItemId,
    /// Set for flow conditions.
    pub other: Option<ItemId>,
    pub v: f64,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub cs_violations: Vec<CsViolation>,
    pub ic_violations: Vec<IcViolation>,
    pub duality_gap: Q,
    pub revenue: Q,
    pub dual_objective: Q,
}

impl CertificateReport {
    pub fn is_clean(&self) -> bool {
        self.cs_violations.is_empty() && self.ic_violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MenuComplexity {
    pub total: usize,
    pub per_item: Vec<usize>,
}

impl Mechanism {
    pub fn new(allocation: Vec<StepFn>) -> Self {
        Mechanism { allocation }
    }

    pub fn posted_prices(prices: &[Q]) -> Self {
        Mechanism { allocation: prices.iter().cloned().map(StepFn::posted).collect() }
    }

    pub fn payment(&self, g: ItemId, v: &Q) -> Q {
        self.allocation[g].payment(v)
    }

    pub fn utility(&self, g: ItemId, v: &Q) -> Q {
        self.allocation[g].utility(v)
    }
}

/// Builds the mechanism from raw `(position, level)` lists, rejecting non-monotone input.
pub fn payments_from_allocation(alloc: Vec<Vec<(Q, Q)>>) -> Result<Mechanism, StepError> {
    Ok(Mechanism { allocation: alloc.into_iter().map(StepFn::new).collect::<Result<_, _>>()? })
}

fn check_points(inst: &Instance, mech: &Mechanism, items: &[ItemId]) -> Vec<Q> {
    let mut pts: BTreeSet<Q> = items.iter().flat_map(|&g| mech.allocation[g].jumps().iter().map(|(v, _)| v.clone())).collect();
    pts.insert(Q::zero());
    pts.insert(inst.h.clone());
    pts.into_iter().collect()
}

/// Utility dominance along every edge, checked at all jump points (exact for step rules).
pub fn ic_check(inst: &Instance, mech: &Mechanism) -> Vec<IcViolation> {
    let mut out = Vec::new();
    for &(w, b) in inst.poset.edges() {
        for v in check_points(inst, mech, &[w, b]) {
            let gap = mech.utility(b, &v) - mech.utility(w, &v);
            if gap.is_positive() {
                out.push(IcViolation { worse: w, better: b, v: crate::num::to_f64(&v), magnitude: crate::num::to_f64(&gap) });
            }
        }
    }
    out
}

/// Expected revenue, computed from payments and cross-checked against the virtual-welfare
/// form.
pub fn revenue(inst: &Instance, mech: &Mechanism) -> Q {
    let rev: Q = inst
        .marginals
        .iter()
        .zip(&mech.allocation)
        .map(|(m, a)| a.increments().iter().map(|(v, d)| d * m.revenue_at(v)).sum::<Q>())
        .sum();
    debug_assert_eq!(rev, virtual_welfare(inst, mech));
    rev
}

/// `Σ_G ∫ a_G fphi_G`.
pub fn virtual_welfare(inst: &Instance, mech: &Mechanism) -> Q {
    inst.marginals
        .iter()
        .zip(&mech.allocation)
        .map(|(m, a)| {
            let fphi = m.fphi();
            a.increments().iter().map(|(v, d)| d * fphi.integral_between(v, &inst.h)).sum::<Q>()
        })
        .sum()
}

pub fn menu_complexity(mech: &Mechanism) -> MenuComplexity {
    let per_item: Vec<usize> = mech.allocation.iter().map(|a| a.levels().len()).collect();
    MenuComplexity { total: per_item.iter().sum(), per_item }
}

/// Complementary slackness of `(mech, dual)` plus IC, dual feasibility and the duality gap.
/// Strict signs are read with tolerance `tol` on the `f Φ` scale.
pub fn cs_check(inst: &Instance, mech: &Mechanism, dual: &DualSolution, tol: &Q) -> CertificateReport {
    let f = crate::num::to_f64;
    let mut cs = Vec::new();
    let profile = virtual_profile(inst, dual);
    let neg_tol = -tol.clone();
    for (g, a) in mech.allocation.iter().enumerate() {
        let raw = &profile.items[g].fphi;
        let mut cuts: Vec<Q> = a.jumps().iter().map(|(v, _)| v.clone()).collect();
        cuts.extend(raw.zero_crossings());
        let fphi = raw.refine(&cuts);
        for k in 0..fphi.pieces() {
            let (x0, _, y0, y1) = fphi.piece(k);
            let level = a.eval(x0);
            let hi = if y0 > y1 { y0 } else { y1 };
            let lo = if y0 < y1 { y0 } else { y1 };
            if hi > tol && level < Q::one() {
                cs.push(CsViolation { condition: Condition::Cs1, item: g, other: None, v: f(x0), magnitude: f(&((Q::one() - &level) * hi)) });
            }
            if *lo < neg_tol && level.is_positive() {
                cs.push(CsViolation { condition: Condition::Cs2, item: g, other: None, v: f(x0), magnitude: f(&(-(&level * lo))) });
            }
        }
        let lambda = &dual.lambda[g];
        for (v, d) in a.increments() {
            let l = lambda.eval(&v);
            if l > *tol {
                cs.push(CsViolation { condition: Condition::Cs3, item: g, other: None, v: f(&v), magnitude: f(&(l * d)) });
            }
        }
        if lambda.min_value() < neg_tol || lambda.eval(&Q::zero()).abs() > *tol || lambda.eval(&inst.h).abs() > *tol {
            cs.push(CsViolation { condition: Condition::DualFeasibility, item: g, other: None, v: 0.0, magnitude: f(&lambda.min_value()) });
        }
    }
    for (&(w, b), flow) in &dual.flows {
        let gap_at = |v: &Q| mech.utility(w, v) - mech.utility(b, v);
        for (y, mass) in &flow.atoms {
            if mass.is_negative() {
                cs.push(CsViolation { condition: Condition::DualFeasibility, item: w, other: Some(b), v: f(y), magnitude: f(mass) });
            }
            let gap = gap_at(y);
            if mass.is_positive() && gap.abs() > *tol {
                cs.push(CsViolation { condition: Condition::Cs4, item: w, other: Some(b), v: f(y), magnitude: f(&(mass * gap)) });
            }
        }
        if let Some(dens) = &flow.density {
            let pts = check_points(inst, mech, &[w, b]);
            for k in 0..dens.pieces() {
                let (x0, x1, y0, y1) = dens.piece(k);
                if y0.is_negative() || y1.is_negative() {
                    cs.push(CsViolation { condition: Condition::DualFeasibility, item: w, other: Some(b), v: f(x0), magnitude: f(y0) });
                }
                if !(y0.is_positive() || y1.is_positive()) {
                    continue;
                }
                let inner = pts.iter().filter(|p| *p > x0 && *p < x1);
                for v in std::iter::once(x0).chain(inner).chain(std::iter::once(x1)) {
                    let gap = gap_at(v);
                    if gap.abs() > *tol {
                        cs.push(CsViolation { condition: Condition::Cs4, item: w, other: Some(b), v: f(v), magnitude: f(&gap) });
                    }
                }
            }
        }
    }
    let rev = revenue(inst, mech);
    let obj = dual_objective(inst, dual);
    CertificateReport {
        cs_violations: cs,
        ic_violations: ic_check(inst, mech),
        duality_gap: &obj - &rev,
        revenue: rev,
        dual_objective: obj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DensityDist, MarginalDist};
    use crate::num::{q, qr};
    use crate::poset::ItemPoset;
    use proptest::prelude::*;

    fn single_uniform() -> Instance {
        let p = ItemPoset::new(&["A"], &[]).unwrap();
        Instance::new(p, q(1), vec![MarginalDist::Density(DensityDist::uniform(q(1), q(1)))]).unwrap()
    }

    #[test]
    fn payment_identity_examples() {
        let posted = StepFn::posted(qr(1, 2));
        assert_eq!(posted.payment(&qr(3, 4)), qr(1, 2));
        let split = StepFn::new(vec![(q(1), qr(1, 2)), (q(3), q(1))]).unwrap();
        assert_eq!(split.payment(&q(2)), qr(1, 2));
        assert_eq!(split.payment(&q(3)), q(2));
        assert_eq!(StepFn::zero().payment(&q(3)), q(0));
        assert!(payments_from_allocation(vec![vec![(q(1), q(1)), (q(2), qr(1, 2))]]).is_err());
    }

    #[test]
    fn revenue_examples() {
        let inst = single_uniform();
        assert_eq!(revenue(&inst, &Mechanism::posted_prices(&[qr(1, 2)])), qr(1, 4));
        assert_eq!(revenue(&inst, &Mechanism::posted_prices(&[q(0)])), q(0));
    }

    #[test]
    fn ic_examples() {
        let p = ItemPoset::new(&["A", "C"], &[("C", "A")]).unwrap();
        let u = || MarginalDist::Density(DensityDist::uniform(qr(1, 2), q(1)));
        let inst = Instance::new(p, q(1), vec![u(), u()]).unwrap();
        let bad = Mechanism::posted_prices(&[qr(1, 4), qr(1, 2)]);
        let v = ic_check(&inst, &bad);
        assert!(!v.is_empty() && v.iter().all(|x| x.v > 0.25 && x.v <= 1.0));
        assert!(ic_check(&inst, &Mechanism::posted_prices(&[qr(1, 2), qr(1, 2)])).is_empty());
    }

    #[test]
    fn menu_counts() {
        let m = Mechanism::posted_prices(&[q(1), q(2), q(3)]);
        assert_eq!(menu_complexity(&m).total, 3);
    }

    #[test]
    fn myerson_pair_is_certified() {
        let inst = single_uniform();
        let dual = DualSolution::zero(&inst);
        let r = cs_check(&inst, &Mechanism::posted_prices(&[qr(1, 2)]), &dual, &Q::zero());
        assert!(r.is_clean());
        assert!(r.duality_gap.is_zero());
        let shifted = cs_check(&inst, &Mechanism::posted_prices(&[qr(3, 5)]), &dual, &q(0));
        assert!(shifted.cs_violations.iter().any(|v| v.condition == Condition::Cs1 && (v.v - 0.5).abs() < 1e-12));
        assert!(shifted.duality_gap.is_positive());
    }

    proptest! {
        #[test]
        fn levels_ignore_redundant_breakpoints(
            raw in proptest::collection::vec((1i64..100, 1i64..=10), 1..6),
            cut in 1i64..100,
        ) {
            let mut pos: Vec<i64> = raw.iter().map(|r| r.0).collect();
            pos.sort();
            pos.dedup();
            let mut lv: Vec<i64> = raw.iter().map(|r| r.1).take(pos.len()).collect();
            lv.sort();
            let s = StepFn::new(pos.iter().zip(&lv).map(|(p, l)| (qr(*p, 10), qr(*l, 10))).collect()).unwrap();
            let t = StepFn::new(s.split_at(&qr(cut, 10))).unwrap();
            prop_assert_eq!(menu_complexity(&Mechanism::new(vec![s.clone()])), menu_complexity(&Mechanism::new(vec![t.clone()])));
            for v in 0..110 {
                let v = qr(v, 10);
                prop_assert_eq!(s.payment(&v), &v * s.eval(&v) - s.utility(&v));
            }
        }
    }
}
