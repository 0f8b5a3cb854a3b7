//! Lagrangian dual solutions: ironing multipliers per item and flows along poset edges.
//!
//! Sign convention on an edge `(worse, better)`: flow leaving `worse` raises `f Φ_worse`
//! below the flow point; flow entering `better` lowers `f Φ_better` there.

use crate::dist::Instance;
use crate::num::Q;
use crate::poset::ItemId;
use crate::pwl::{upper_hull, Pwl};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("multiplier of item {0} is not continuous")]
    Discontinuous(ItemId),
    #[error("multiplier of item {0} is negative or nonzero at an endpoint")]
    LambdaSign(ItemId),
    #[error("flow on ({0},{1}) is negative or misplaced")]
    FlowSign(ItemId, ItemId),
    #[error("flow on ({0},{1}) does not follow a poset edge")]
    NotAnEdge(ItemId, ItemId),
    #[error("swap operation needs the two-edge star poset")]
    NotStar,
    #[error("step {eps} exceeds the admissible maximum {max}")]
    StepTooLarge { eps: f64, max: f64 },
    #[error("finding does not match the dual: {0}")]
    StaleFinding(String),
}

/// Flow along one edge: point masses plus an optional nonnegative piecewise-constant density.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FlowVar {
    pub atoms: Vec<(Q, Q)>,
    pub density: Option<Pwl>,
}

impl FlowVar {
    pub fn from_atoms(mut atoms: Vec<(Q, Q)>) -> Self {
        atoms.retain(|(_, m)| !m.is_zero());
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        FlowVar { atoms, density: None }
    }

    pub fn mass_at(&self, y: &Q) -> Q {
        self.atoms.iter().filter(|(p, _)| p == y).map(|(_, m)| m.clone()).sum()
    }

    /// Adds (or with negative `m`, removes) mass at `y`.
    pub fn shift(&mut self, y: &Q, m: &Q) {
        if let Some(e) = self.atoms.iter_mut().find(|(p, _)| p == y) {
            e.1 += m;
        } else {
            self.atoms.push((y.clone(), m.clone()));
            self.atoms.sort_by(|a, b| a.0.cmp(&b.0));
        }
        self.atoms.retain(|(_, m)| !m.is_zero());
    }

    pub fn total(&self) -> Q {
        let d = self.density.as_ref().map(|d| d.integral()).unwrap_or_else(Q::zero);
        self.atoms.iter().map(|(_, m)| m.clone()).sum::<Q>() + d
    }

    /// `Ā(v)`: mass strictly above `v` plus the density tail from `v`.
    pub fn tail(&self, h: &Q) -> Pwl {
        let mut xs = vec![Q::zero()];
        xs.extend(self.atoms.iter().map(|(p, _)| p.clone()).filter(|p| p.is_positive() && p < h));
        xs.push(h.clone());
        xs.dedup();
        let vals: Vec<Q> = xs[..xs.len() - 1]
            .iter()
            .map(|v| self.atoms.iter().filter(|(p, _)| p > v).map(|(_, m)| m.clone()).sum())
            .collect();
        let mut t = Pwl::steps(xs, vals).expect("sorted atoms");
        if let Some(d) = &self.density {
            let anti = d.antiderivative().expect("flow density is piecewise constant");
            let total = anti.eval(anti.hi());
            t = t.add(&Pwl::constant(Q::zero(), h.clone(), total).sub(&anti));
        }
        t
    }

    /// Whether any flow sits in the half-open range `[lo, hi)`.
    pub fn has_flow_in(&self, lo: &Q, hi: &Q) -> bool {
        self.atoms.iter().any(|(p, m)| p >= lo && p < hi && m.is_positive())
            || self.density.as_ref().is_some_and(|d| {
                (0..d.pieces()).any(|k| {
                    let (x0, x1, y0, y1) = d.piece(k);
                    (y0.is_positive() || y1.is_positive()) && x0 < hi && x1 > lo
                })
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub lambda: Vec<Pwl>,
    pub flows: BTreeMap<(ItemId, ItemId), FlowVar>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemProfile {
    pub fphi: Pwl,
    pub r_lo: Q,
    pub r_hi: Q,
    pub ironed_intervals: Vec<(Q, Q)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VirtualProfile {
    pub items: Vec<ItemProfile>,
}

/// Alternating points `(x, item)` with decreasing `x`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TopChain {
    pub points: Vec<(Q, ItemId)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SwapFinding {
    /// Consecutive chain points `(x, item)`, `(y, other)` with flow into `item` at `z`.
    Double { item: ItemId, other: ItemId, x: Q, y: Q, z: Q },
    /// Flow into `(x, item)` and `(y, other)` with `x > r̄_item > y > r̄_other`.
    Upper { item: ItemId, other: ItemId, x: Q, y: Q },
}

impl DualSolution {
    pub fn zero(inst: &Instance) -> Self {
        DualSolution {
            lambda: (0..inst.m()).map(|_| Pwl::constant(Q::zero(), inst.h.clone(), Q::zero())).collect(),
            flows: BTreeMap::new(),
        }
    }

    pub fn flow(&self, from: ItemId, to: ItemId) -> Option<&FlowVar> {
        self.flows.get(&(from, to))
    }

    pub fn validate(&self, inst: &Instance) -> Result<(), DualError> {
        for (g, l) in self.lambda.iter().enumerate() {
            if !l.is_continuous() {
                return Err(DualError::Discontinuous(g));
            }
            if l.min_value().is_negative() || !l.eval(&Q::zero()).is_zero() || !l.eval(&inst.h).is_zero() {
                return Err(DualError::LambdaSign(g));
            }
        }
        for (&(w, b), f) in &self.flows {
            if !inst.poset.edges().contains(&(w, b)) {
                return Err(DualError::NotAnEdge(w, b));
            }
            let bad_atom = f.atoms.iter().any(|(p, m)| m.is_negative() || !p.is_positive() || *p > inst.h);
            let bad_density = f.density.as_ref().is_some_and(|d| d.min_value().is_negative());
            if bad_atom || bad_density {
                return Err(DualError::FlowSign(w, b));
            }
        }
        Ok(())
    }
}

fn flow_balance(inst: &Instance, d: &DualSolution, g: ItemId) -> Pwl {
    let mut acc = Pwl::constant(Q::zero(), inst.h.clone(), Q::zero());
    for (&(w, b), f) in &d.flows {
        if w == g {
            acc = acc.add(&f.tail(&inst.h));
        }
        if b == g {
            acc = acc.sub(&f.tail(&inst.h));
        }
    }
    acc
}

/// `f Φ` with the ironing term left out.
pub fn unironed_fphi(inst: &Instance, d: &DualSolution, g: ItemId) -> Pwl {
    inst.marginals[g].fphi().add(&flow_balance(inst, d, g))
}

/// `inf{v : fΦ(v) >= 0}` and `sup{v : fΦ(v) <= 0}` on the domain.
pub fn zero_region(fphi: &Pwl) -> (Q, Q) {
    let mut lo = None;
    for k in 0..fphi.pieces() {
        let (x0, x1, y0, y1) = fphi.piece(k);
        if !y0.is_negative() {
            lo = Some(x0.clone());
            break;
        }
        if !y1.is_negative() {
            // linear crossing inside the piece (y1 is the left limit)
            lo = Some(if y1.is_zero() { x1.clone() } else { x0 + (x1 - x0) * y0 / (y0 - y1) });
            break;
        }
    }
    let mut hi = None;
    for k in (0..fphi.pieces()).rev() {
        let (x0, x1, y0, y1) = fphi.piece(k);
        if !y1.is_positive() {
            hi = Some(x1.clone());
            break;
        }
        if !y0.is_positive() {
            hi = Some(if y0.is_zero() { x0.clone() } else { x0 + (x1 - x0) * y0 / (y0 - y1) });
            break;
        }
    }
    let lo = lo.unwrap_or_else(|| fphi.hi().clone());
    let hi = hi.unwrap_or_else(|| fphi.lo().clone());
    (lo, hi)
}

/// Maximal intervals on which a continuous nonnegative function is positive.
pub fn support_intervals(lambda: &Pwl) -> Vec<(Q, Q)> {
    let mut out = Vec::new();
    let mut start: Option<Q> = None;
    let verts = lambda.vertices();
    for (i, (x, y)) in verts.iter().enumerate() {
        if y.is_positive() {
            if start.is_none() {
                start = Some(verts[i.saturating_sub(1)].0.clone());
            }
        } else if let Some(s) = start.take() {
            out.push((s, x.clone()));
        }
    }
    if let Some(s) = start {
        out.push((s, lambda.hi().clone()));
    }
    out
}

pub fn virtual_profile(inst: &Instance, d: &DualSolution) -> VirtualProfile {
    let items = (0..inst.m())
        .map(|g| {
            let fphi = unironed_fphi(inst, d, g).sub(&d.lambda[g].derivative());
            let (r_lo, r_hi) = zero_region(&fphi);
            ItemProfile { fphi, r_lo, r_hi, ironed_intervals: support_intervals(&d.lambda[g]) }
        })
        .collect();
    VirtualProfile { items }
}

impl ItemProfile {
    /// The ironed interval whose interior contains `x`.
    pub fn interval_containing(&self, x: &Q) -> Option<(Q, Q)> {
        self.ironed_intervals.iter().find(|(a, b)| a < x && x < b).cloned()
    }
}

/// `Σ_G ∫ (f Φ_G)^+`.
pub fn dual_objective(inst: &Instance, d: &DualSolution) -> Q {
    virtual_profile(inst, d).items.iter().map(|p| p.fphi.positive_integral()).sum()
}

/// Samples per piece when the unironed profile is not piecewise constant.
const IRON_SAMPLES: usize = 16;

/// `Γ(v) = -∫_0^v f Φ⁰`, exact when `f Φ⁰` is piecewise constant and sampled otherwise.
fn gamma_curve(fphi0: &Pwl) -> Pwl {
    if let Ok(a) = fphi0.antiderivative() {
        return a.neg();
    }
    let mut pts = Vec::new();
    for (x, _) in fphi0.sample(IRON_SAMPLES) {
        let v = -fphi0.integral_between(fphi0.lo(), &x);
        pts.push((x, v));
    }
    Pwl::from_vertices(&pts).expect("samples are sorted")
}

/// Replaces every `λ_G` by the minimal ironing that makes `f Φ_G` nondecreasing, keeping the
/// flows.
pub fn properly_iron(inst: &Instance, d: &DualSolution) -> DualSolution {
    let lambda = (0..inst.m())
        .map(|g| {
            let gamma = gamma_curve(&unironed_fphi(inst, d, g)).simplify();
            let hull = Pwl::from_vertices(&upper_hull(&gamma.vertices())).expect("sorted hull");
            hull.sub(&gamma).simplify()
        })
        .collect();
    DualSolution { lambda, flows: d.flows.clone() }
}

fn star_roles(inst: &Instance) -> Option<(ItemId, ItemId, ItemId)> {
    inst.poset.star()
}

/// Chain points need `f Φ = 0`, flow in, positive `λ`, and to sit inside the previous
/// point's ironed interval.
pub fn find_top_chain(inst: &Instance, d: &DualSolution) -> TopChain {
    let Some((c, a, b)) = star_roles(inst) else { return TopChain::default() };
    let prof = virtual_profile(inst, d);
    let (first, second) = if prof.items[a].r_hi >= prof.items[b].r_hi { (a, b) } else { (b, a) };
    if prof.items[first].r_hi == prof.items[second].r_hi {
        return TopChain::default();
    }
    let candidates = |g: ItemId, lo: &Q, hi: &Q| -> Option<Q> {
        let f = d.flow(c, g)?;
        f.atoms
            .iter()
            .filter(|(p, m)| m.is_positive() && p > lo && p < hi)
            .filter(|(p, _)| prof.items[g].fphi.eval(p).is_zero() && d.lambda[g].eval(p).is_positive())
            .map(|(p, _)| p.clone())
            .max()
    };
    let mut points = Vec::new();
    let Some(x1) = candidates(first, &prof.items[second].r_hi, &prof.items[first].r_hi) else {
        return TopChain::default();
    };
    points.push((x1, first));
    loop {
        let (x, g) = points.last().unwrap().clone();
        let (bottom, _) = prof.items[g].interval_containing(&x).expect("chain point is ironed");
        let other = if g == first { second } else { first };
        match candidates(other, &bottom, &x) {
            Some(y) => points.push((y, other)),
            None => break,
        }
    }
    TopChain { points }
}

pub fn detect_swaps(inst: &Instance, d: &DualSolution) -> Vec<SwapFinding> {
    let Some((c, a, b)) = star_roles(inst) else { return Vec::new() };
    let prof = virtual_profile(inst, d);
    let chain = find_top_chain(inst, d);
    let mut out = Vec::new();
    for w in chain.points.windows(2) {
        let ((x, g), (y, other)) = (&w[0], &w[1]);
        let (bottom, _) = prof.items[*g].interval_containing(x).expect("chain point is ironed");
        if let Some(f) = d.flow(c, *g) {
            for (z, m) in &f.atoms {
                if m.is_positive() && *z >= bottom && z < y {
                    out.push(SwapFinding::Double { item: *g, other: *other, x: x.clone(), y: y.clone(), z: z.clone() });
                }
            }
        }
    }
    for (g, other) in [(a, b), (b, a)] {
        let (Some(fg), Some(fo)) = (d.flow(c, g), d.flow(c, other)) else { continue };
        let (rg, ro) = (&prof.items[g].r_hi, &prof.items[other].r_hi);
        for (x, mx) in &fg.atoms {
            for (y, my) in &fo.atoms {
                if mx.is_positive() && my.is_positive() && x > rg && rg > y && y > ro {
                    out.push(SwapFinding::Upper { item: g, other, x: x.clone(), y: y.clone() });
                }
            }
        }
    }
    out
}

/// Largest admissible step for a double-swap removal.
pub fn double_swap_limit(inst: &Instance, d: &DualSolution, f: &SwapFinding) -> Result<Q, DualError> {
    let (c, _, _) = star_roles(inst).ok_or(DualError::NotStar)?;
    let SwapFinding::Double { item, other, x, y, z } = f else {
        return Err(DualError::StaleFinding("not a double swap".into()));
    };
    let k = (x - y) / (y - z);
    let mass = |g: ItemId, p: &Q| d.flow(c, g).map(|fl| fl.mass_at(p)).unwrap_or_else(Q::zero);
    let mut limit = mass(*item, x);
    limit = limit.min(mass(*other, y) / (Q::one() + &k));
    limit = limit.min(mass(*item, z) / &k);
    // unit bump of Γ on [z, x] peaking at y with height x - y; it must stay below λ
    let lambda = &d.lambda[*item];
    let bump = |v: &Q| {
        if v <= z || v >= x {
            Q::zero()
        } else if v <= y {
            &k * (v - z)
        } else {
            &k * (y - z) - (v - y)
        }
    };
    let mut pts: Vec<Q> = lambda.breakpoints().iter().filter(|v| *v > z && *v < x).cloned().collect();
    pts.push(y.clone());
    for v in pts {
        let b = bump(&v);
        if b.is_positive() {
            limit = limit.min(lambda.eval(&v) / b);
        }
    }
    if !limit.is_positive() {
        return Err(DualError::StaleFinding("no admissible step".into()));
    }
    Ok(limit)
}

/// Reroutes flow around a double swap; `eps` defaults to half the admissible maximum.
pub fn remove_double_swap(inst: &Instance, d: &DualSolution, f: &SwapFinding, eps: Option<Q>) -> Result<DualSolution, DualError> {
    let (c, _, _) = star_roles(inst).ok_or(DualError::NotStar)?;
    let max = double_swap_limit(inst, d, f)?;
    let eps = eps.unwrap_or_else(|| &max / Q::from_integer(2.into()));
    if eps > max || !eps.is_positive() {
        return Err(DualError::StepTooLarge { eps: crate::num::to_f64(&eps), max: crate::num::to_f64(&max) });
    }
    let SwapFinding::Double { item, other, x, y, z } = f else { unreachable!() };
    let k = (x - y) / (y - z);
    let alpha = &k * &eps;
    let gamma = &eps + &alpha;
    let mut out = d.clone();
    let mut mv = |g: ItemId, p: &Q, m: Q| out.flows.entry((c, g)).or_default().shift(p, &m);
    mv(*item, x, -eps.clone());
    mv(*other, x, eps.clone());
    mv(*other, y, -gamma.clone());
    mv(*item, y, gamma);
    mv(*item, z, -alpha.clone());
    mv(*other, z, alpha);
    Ok(properly_iron(inst, &out))
}

/// Pushes flow into `other` up from `y` to `x` and flow into `item` down from `x` to `y`.
pub fn remove_upper_swap(inst: &Instance, d: &DualSolution, f: &SwapFinding) -> Result<DualSolution, DualError> {
    let (c, _, _) = star_roles(inst).ok_or(DualError::NotStar)?;
    let SwapFinding::Upper { item, other, x, y } = f else {
        return Err(DualError::StaleFinding("not an upper swap".into()));
    };
    if !detect_swaps(inst, d).contains(f) {
        return Err(DualError::StaleFinding("upper swap not present".into()));
    }
    let mass = |g: ItemId, p: &Q| d.flow(c, g).map(|fl| fl.mass_at(p)).unwrap_or_else(Q::zero);
    let half = Q::new(1.into(), 2.into());
    // `other` must stay positive on [y, x) or the welfare it loses no longer matches the gain
    let room = virtual_profile(inst, d).items[*other].fphi.eval(y);
    let amount = mass(*item, x).min(mass(*other, y)).min(room) * &half;
    let mut out = d.clone();
    let mut mv = |g: ItemId, p: &Q, m: Q| out.flows.entry((c, g)).or_default().shift(p, &m);
    mv(*other, y, -amount.clone());
    mv(*other, x, amount.clone());
    mv(*item, x, -amount.clone());
    mv(*item, y, amount);
    Ok(properly_iron(inst, &out))
}

/// Proper ironing followed by swap removal (double swaps first) until none remain or the
/// iteration budget `10 · #atoms` runs out.
pub fn best_dual(inst: &Instance, d: &DualSolution) -> DualSolution {
    let mut cur = properly_iron(inst, d);
    let atoms: usize = d.flows.values().map(|f| f.atoms.len()).sum();
    for _ in 0..(10 * atoms.max(1)) {
        let found = detect_swaps(inst, &cur);
        let next = found
            .iter()
            .find(|f| matches!(f, SwapFinding::Double { .. }))
            .or_else(|| found.first())
            .and_then(|f| match f {
                SwapFinding::Double { .. } => remove_double_swap(inst, &cur, f, None).ok(),
                SwapFinding::Upper { .. } => remove_upper_swap(inst, &cur, f).ok(),
            });
        match next {
            Some(n) => cur = n,
            None => break,
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{CurveDist, DensityDist, MarginalDist};
    use crate::num::{q, qr};
    use crate::poset::ItemPoset;

    fn uniform_single() -> Instance {
        let p = ItemPoset::new(&["A"], &[]).unwrap();
        Instance::new(p, q(1), vec![MarginalDist::Density(DensityDist::uniform(q(1), q(1)))]).unwrap()
    }

    #[test]
    fn zero_dual_is_myerson() {
        let inst = uniform_single();
        let d = DualSolution::zero(&inst);
        let p = virtual_profile(&inst, &d);
        assert_eq!(p.items[0].fphi, inst.marginals[0].fphi());
        assert_eq!(p.items[0].r_lo, qr(1, 2));
        assert_eq!(p.items[0].r_hi, qr(1, 2));
        assert_eq!(dual_objective(&inst, &d), qr(1, 4));
    }

    fn line() -> Instance {
        let p = ItemPoset::new(&["A", "C"], &[("C", "A")]).unwrap();
        let u = || MarginalDist::Density(DensityDist::uniform(qr(1, 2), q(2)));
        Instance::new(p, q(2), vec![u(), u()]).unwrap()
    }

    #[test]
    fn flow_shifts_profiles_below_the_point() {
        let inst = line();
        let mut d = DualSolution::zero(&inst);
        d.flows.insert((1, 0), FlowVar::from_atoms(vec![(q(1), qr(1, 10))]));
        let base = virtual_profile(&inst, &DualSolution::zero(&inst));
        let p = virtual_profile(&inst, &d);
        for v in [qr(1, 2), qr(99, 100)] {
            assert_eq!(p.items[0].fphi.eval(&v), base.items[0].fphi.eval(&v) - qr(1, 10));
            assert_eq!(p.items[1].fphi.eval(&v), base.items[1].fphi.eval(&v) + qr(1, 10));
        }
        for v in [q(1), qr(3, 2)] {
            assert_eq!(p.items[0].fphi.eval(&v), base.items[0].fphi.eval(&v));
        }
    }

    #[test]
    fn ironing_a_down_jump() {
        // revenue curve with a dip gives one down jump in f φ
        let r = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), qr(9, 10)), (q(3), qr(11, 10)), (q(4), q(0))]).unwrap();
        let p = ItemPoset::new(&["A"], &[]).unwrap();
        let inst = Instance::new(p, q(4), vec![MarginalDist::Curve(CurveDist::new(r.clone()).unwrap())]).unwrap();
        let d = properly_iron(&inst, &DualSolution::zero(&inst));
        let prof = virtual_profile(&inst, &d);
        assert!(prof.items[0].fphi.is_nondecreasing(&Q::zero()));
        assert_eq!(prof.items[0].ironed_intervals, vec![(q(1), q(3))]);
        assert_eq!(prof.items[0].fphi.eval(&qr(3, 2)), -qr(1, 20));
        // ironing leaves the integral over the interval unchanged
        let before = inst.marginals[0].fphi().integral_between(&q(1), &q(3));
        assert_eq!(prof.items[0].fphi.integral_between(&q(1), &q(3)), before);
        // already monotone input is left alone
        let u = uniform_single();
        assert_eq!(properly_iron(&u, &DualSolution::zero(&u)).lambda[0].max_value(), q(0));
    }

    #[test]
    fn objective_dominates_primal_revenue() {
        let inst = line();
        let mut d = DualSolution::zero(&inst);
        d.flows.insert((1, 0), FlowVar::from_atoms(vec![(q(1), qr(1, 10)), (qr(3, 2), qr(1, 20))]));
        let obj = dual_objective(&inst, &d);
        for (pa, pc) in [(q(1), q(1)), (qr(3, 2), q(1)), (qr(1, 2), qr(1, 2))] {
            let m = crate::verify::Mechanism::posted_prices(&[pa, pc]);
            assert!(crate::verify::ic_check(&inst, &m).is_empty());
            assert!(obj >= crate::verify::revenue(&inst, &m));
        }
    }

    #[test]
    fn zero_region_of_signed_profile() {
        let f = Pwl::steps(vec![q(0), q(1), q(2), q(3)], vec![q(-1), q(0), q(1)]).unwrap();
        assert_eq!(zero_region(&f), (q(1), q(2)));
        let g = Pwl::from_vertices(&[(q(0), q(-1)), (q(2), q(1))]).unwrap();
        assert_eq!(zero_region(&g), (q(1), q(1)));
    }

    #[test]
    fn upper_swap_lowers_the_top_of_the_zero_region() {
        use crate::master::{generate, DualSpec, ItemSpec};
        // (ironing of A, y, r̄_A afterwards)
        let cases = [(vec![], q(7), q(7)), (vec![(q(6), q(10))], q(7), q(6)), (vec![(q(4), q(8))], q(6), q(4))];
        for (ivs, y, expect) in cases {
            let poset = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).unwrap();
            let items = vec![ItemSpec::new(q(3), q(10), ivs), ItemSpec::new(q(2), q(5), vec![]), ItemSpec::new(q(2), q(14), vec![])];
            let flows = [((2, 0), vec![q(12)]), ((2, 1), vec![y.clone()])].into_iter().collect();
            let (inst, d) = generate(&DualSpec { poset, h: q(16), items, flows }).unwrap();
            let found = detect_swaps(&inst, &d);
            assert_eq!(found, vec![SwapFinding::Upper { item: 0, other: 1, x: q(12), y }]);
            let after = remove_upper_swap(&inst, &d, &found[0]).unwrap();
            assert_eq!(dual_objective(&inst, &after), dual_objective(&inst, &d));
            let prof = virtual_profile(&inst, &after);
            assert_eq!((prof.items[0].r_hi.clone(), prof.items[1].r_hi.clone()), (expect, q(5)));
            assert!(detect_swaps(&inst, &after).is_empty());
            assert!(remove_upper_swap(&inst, &after, &found[0]).is_err());
        }
    }
}
