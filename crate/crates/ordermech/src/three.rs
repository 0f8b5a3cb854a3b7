//! Primal recovery for the two-branch star `{(C, A), (C, B)}` from a swap-free dual, and the
//! certified menu-complexity lower bound along a top chain.

use crate::dist::Instance;
use crate::dual::{detect_swaps, find_top_chain, virtual_profile, DualSolution, TopChain, VirtualProfile};
use crate::num::Q;
use crate::poset::ItemId;
use crate::verify::{Mechanism, StepFn};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThreeError {
    #[error("poset is not the two-branch star")]
    NotStar,
    #[error("dual has {0} swap finding(s); remove them first")]
    Swaps(usize),
    #[error("chain condition fails at point {index}: {what}")]
    Chain { index: usize, what: String },
    #[error("unsupported dual shape: {0}")]
    Unsupported(String),
    #[error("recovery invariant broken: {0}")]
    Invariant(String),
    #[error("mechanism fails a precondition of the lower-bound argument: {0}")]
    LowerBound(String),
}

/// Which point the top induction step equalizes utilities at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TopRule {
    /// Reserve when there is flow into the first item above the first chain point, else the
    /// chain point.
    #[default]
    Auto,
    ChainPoint,
    Reserve,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RecoveryPath {
    /// Both branches share an unironed zero point and are posted there.
    CommonZero(Q),
    /// No chain: one branch posted, the other a two-step lottery.
    EmptyChain,
    /// Bottom-up induction along the chain.
    Chain { top_at_reserve: bool },
}

/// Induction bookkeeping for the chain path.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryState {
    pub chain: TopChain,
    /// Product of all scale factors applied so far.
    pub lambda_scale: Q,
    /// Scale factor of each step, bottom first.
    pub factors: Vec<Q>,
    /// Allocations of the two branches, in the order returned by `ItemPoset::star`.
    pub alloc_a: StepFn,
    pub alloc_b: StepFn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub mechanism: Mechanism,
    pub path: RecoveryPath,
    pub state: Option<RecoveryState>,
}

/// Allocation under construction as `(position, level)` pairs, sorted by position.
type Steps = Vec<(Q, Q)>;

fn utility(s: &Steps, v: &Q) -> Q {
    let mut prev = Q::zero();
    let mut u = Q::zero();
    for (p, a) in s {
        if p > v {
            break;
        }
        u += (v - p) * (a - &prev);
        prev = a.clone();
    }
    u
}

fn level_at(s: &Steps, v: &Q) -> Q {
    s.iter().take_while(|(p, _)| p <= v).last().map(|(_, a)| a.clone()).unwrap_or_else(Q::zero)
}

/// Multiplies the levels below `t` by `factor` and makes the allocation 1 from `t` on.
fn scale_below(s: &Steps, t: &Q, factor: &Q) -> Steps {
    let mut out: Steps = s.iter().filter(|(p, _)| p < t).map(|(p, a)| (p.clone(), a * factor)).collect();
    out.push((t.clone(), Q::one()));
    out
}

fn to_step(s: Steps) -> Result<StepFn, ThreeError> {
    StepFn::new(s).map_err(|e| ThreeError::Invariant(e.to_string()))
}

/// Slope of `max(u_a, u_b)` as a step function: kinks at every jump and at every crossing.
pub fn max_utility_slope(a: &StepFn, b: &StepFn, h: &Q) -> StepFn {
    let mut pts: BTreeSet<Q> = a.jumps().iter().chain(b.jumps()).map(|(v, _)| v.clone()).collect();
    pts.insert(Q::zero());
    pts.insert(h.clone());
    let pts: Vec<Q> = pts.into_iter().collect();
    let mut out: Vec<(Q, Q)> = Vec::new();
    let mut push = |v: Q, lvl: Q| {
        if out.last().is_some_and(|(p, _)| *p == v) {
            out.last_mut().unwrap().1 = lvl;
        } else if out.last().map_or(!lvl.is_zero(), |(_, l)| *l != lvl) {
            out.push((v, lvl));
        }
    };
    for w in pts.windows(2) {
        let (p, nxt) = (&w[0], &w[1]);
        let (sa, sb) = (a.eval(p), b.eval(p));
        let (ua, ub) = (a.utility(p), b.utility(p));
        // leader at p; ties go to the steeper branch
        let a_leads = ua > ub || (ua == ub && sa >= sb);
        push(p.clone(), if a_leads { sa.clone() } else { sb.clone() });
        if sa != sb {
            let t = p + (&ub - &ua) / (&sa - &sb);
            if t > *p && t < *nxt {
                push(t, if sa > sb { sa } else { sb });
            }
        }
    }
    StepFn::new(out).expect("slope of a convex maximum is monotone")
}

/// Completes the worst item: follows the slope of the better branches' maximum utility and is 1
/// from its own upper zero point.
pub fn complete_worst(a: &StepFn, b: &StepFn, r_hi: &Q, h: &Q) -> StepFn {
    let slope = max_utility_slope(a, b, h);
    let mut s: Vec<(Q, Q)> = slope.jumps().iter().filter(|(p, _)| p < r_hi).cloned().collect();
    s.push((r_hi.clone(), Q::one()));
    StepFn::new(s).expect("levels stay in [0, 1]")
}

fn common_zero_point(prof: &VirtualProfile, d: &DualSolution, a: ItemId, b: ItemId) -> Option<Q> {
    let (pa, pb) = (&prof.items[a], &prof.items[b]);
    let lo = if pa.r_lo > pb.r_lo { &pa.r_lo } else { &pb.r_lo };
    let hi = if pa.r_hi < pb.r_hi { &pa.r_hi } else { &pb.r_hi };
    if lo > hi {
        return None;
    }
    let mut cand: Vec<Q> = vec![lo.clone(), hi.clone()];
    for (x, y) in pa.ironed_intervals.iter().chain(&pb.ironed_intervals) {
        cand.extend([x.clone(), y.clone()]);
    }
    cand.into_iter()
        .filter(|v| v >= lo && v <= hi)
        .filter(|v| d.lambda[a].eval(v).is_zero() && d.lambda[b].eval(v).is_zero())
        .max()
}

pub fn recover_primal(inst: &Instance, d: &DualSolution) -> Result<Mechanism, ThreeError> {
    Ok(recover(inst, d, TopRule::Auto)?.mechanism)
}

pub fn recover(inst: &Instance, d: &DualSolution, rule: TopRule) -> Result<Recovery, ThreeError> {
    let (c, a, b) = inst.poset.star().ok_or(ThreeError::NotStar)?;
    let swaps = detect_swaps(inst, d);
    if !swaps.is_empty() {
        return Err(ThreeError::Swaps(swaps.len()));
    }
    let prof = virtual_profile(inst, d);
    let h = &inst.h;
    let assemble = |aa: StepFn, ab: StepFn| {
        let ac = complete_worst(&aa, &ab, &prof.items[c].r_hi, h);
        let mut alloc = vec![StepFn::zero(); 3];
        alloc[a] = aa;
        alloc[b] = ab;
        alloc[c] = ac;
        Mechanism::new(alloc)
    };

    if let Some(v) = common_zero_point(&prof, d, a, b) {
        let mech = assemble(StepFn::posted(v.clone()), StepFn::posted(v.clone()));
        return Ok(Recovery { mechanism: mech, path: RecoveryPath::CommonZero(v), state: None });
    }
    let (first, second) = if prof.items[a].r_hi >= prof.items[b].r_hi { (a, b) } else { (b, a) };
    let chain = find_top_chain(inst, d);

    if chain.points.is_empty() {
        let top2 = &prof.items[second].r_hi;
        let Some((lo, hi)) = prof.items[first].interval_containing(top2) else {
            return Err(ThreeError::Unsupported("zero regions of the two branches are disjoint".into()));
        };
        let beta = (&hi - top2) / (&hi - &lo);
        let lottery = to_step(vec![(lo, beta), (hi, Q::one())])?;
        let (aa, ab) = if first == a { (lottery, StepFn::posted(top2.clone())) } else { (StepFn::posted(top2.clone()), lottery) };
        return Ok(Recovery { mechanism: assemble(aa, ab), path: RecoveryPath::EmptyChain, state: None });
    }

    let x1 = chain.points[0].0.clone();
    let top1 = prof.items[first].r_hi.clone();
    let at_reserve = match rule {
        TopRule::ChainPoint => false,
        TopRule::Reserve => true,
        TopRule::Auto => d.flow(c, first).is_some_and(|f| {
            f.atoms.iter().any(|(p, m)| m.is_positive() && *p > x1 && *p <= top1)
                || (f.density.is_some() && f.has_flow_in(&x1, &top1))
        }),
    };
    let mut state = chain_induction(&prof, &chain, first, second, at_reserve)?;
    if first != a {
        std::mem::swap(&mut state.alloc_a, &mut state.alloc_b);
    }
    let mech = assemble(state.alloc_a.clone(), state.alloc_b.clone());
    Ok(Recovery { mechanism: mech, path: RecoveryPath::Chain { top_at_reserve: at_reserve }, state: Some(state) })
}

/// Bottom-up induction. Roles: index 0 is the item owning the first chain point. The returned
/// state stores role 0 in `alloc_a` and role 1 in `alloc_b`; the caller maps roles to items.
fn chain_induction(prof: &VirtualProfile, chain: &TopChain, first: ItemId, second: ItemId, at_reserve: bool) -> Result<RecoveryState, ThreeError> {
    let m = chain.points.len();
    let role = |g: ItemId| usize::from(g != first);
    let item_of = [first, second];
    let pts: Vec<Q> = chain.points.iter().map(|(x, _)| x.clone()).collect();
    // bottoms of the ironed intervals holding each chain point (index k-1 for point k)
    let mut lows = Vec::with_capacity(m);
    for (k, (x, g)) in chain.points.iter().enumerate() {
        if role(*g) != k % 2 {
            return Err(ThreeError::Chain { index: k + 1, what: "items do not alternate".into() });
        }
        let (lo, _) = prof.items[*g]
            .interval_containing(x)
            .ok_or_else(|| ThreeError::Chain { index: k + 1, what: "point is not inside an ironed interval of its item".into() })?;
        lows.push(lo);
    }
    // thresholds: theta[0], theta[1] are the upper zero points; theta[k+1] = low of point k
    let mut theta = vec![prof.items[first].r_hi.clone(), prof.items[second].r_hi.clone()];
    theta.extend(lows.iter().take(m.saturating_sub(1)).cloned());
    for k in 1..=m {
        let p = &pts[k - 1];
        if !(p > &theta[k] && p < &theta[k - 1]) {
            return Err(ThreeError::Chain { index: k, what: "point is not strictly between the neighbouring thresholds".into() });
        }
    }

    let mut alloc: [Steps; 2] = [Vec::new(), Vec::new()];
    let bottom = (m - 1) % 2;
    alloc[bottom] = vec![(lows[m - 1].clone(), Q::one())];
    alloc[1 - bottom] = vec![(theta[m].clone(), Q::one())];
    let mut scale = Q::one();
    let mut factors = Vec::with_capacity(m);
    for k in (1..=m).rev() {
        let p_role = (k - 1) % 2;
        let o_role = 1 - p_role;
        let target = if k == 1 && at_reserve { theta[0].clone() } else { pts[k - 1].clone() };
        let up = utility(&alloc[p_role], &target);
        let uo = utility(&alloc[o_role], &theta[k]);
        let den = &up - &uo;
        let num = &target - &theta[k];
        if !den.is_positive() || num > den || !num.is_positive() {
            return Err(ThreeError::Chain { index: k, what: format!("scale factor {num}/{den} is outside (0, 1]") });
        }
        let lam = num / den;
        let before: Vec<[Q; 2]> = pts[k..].iter().map(|x| [utility(&alloc[0], x), utility(&alloc[1], x)]).collect();
        alloc[p_role] = scale_below(&alloc[p_role], &theta[k - 1], &lam);
        alloc[o_role] = scale_below(&alloc[o_role], &theta[k], &lam);
        for (x, prev) in pts[k..].iter().zip(&before) {
            for r in 0..2 {
                if utility(&alloc[r], x) != &lam * &prev[r] {
                    return Err(ThreeError::Invariant(format!("scaling changed the utility ratio of item {} at {x}", item_of[r])));
                }
            }
        }
        if utility(&alloc[0], &target) != utility(&alloc[1], &target) {
            return Err(ThreeError::Invariant(format!("utilities differ at {target}")));
        }
        scale *= &lam;
        factors.push(lam);
    }
    debug_assert!(pts.iter().enumerate().all(|(k, x)| level_at(&alloc[k % 2], x) < Q::one()));
    let [s0, s1] = alloc;
    Ok(RecoveryState { chain: chain.clone(), lambda_scale: scale, factors, alloc_a: to_step(s0)?, alloc_b: to_step(s1)? })
}

/// Checks on `mech` what the lower-bound argument needs along the top chain of `d` (equal
/// branch utilities at chain points, no jumps inside ironed intervals, alternating order of the
/// branch allocations) and returns the number of distinct nonzero allocation values seen at
/// the chain points.
pub fn verify_chain_lower_bound(inst: &Instance, d: &DualSolution, mech: &Mechanism) -> Result<usize, ThreeError> {
    let (_, a, b) = inst.poset.star().ok_or(ThreeError::NotStar)?;
    let chain = find_top_chain(inst, d);
    if chain.points.is_empty() {
        return Err(ThreeError::LowerBound("dual has no top chain".into()));
    }
    let prof = virtual_profile(inst, d);
    for g in [a, b] {
        for (v, _) in mech.allocation[g].jumps() {
            if prof.items[g].interval_containing(v).is_some() {
                return Err(ThreeError::LowerBound(format!("item {g} jumps at {v} inside an ironed interval")));
            }
        }
    }
    let mut prev_sign = None;
    let mut values = BTreeSet::new();
    for (i, (x, _)) in chain.points.iter().enumerate() {
        if mech.utility(a, x) != mech.utility(b, x) {
            return Err(ThreeError::LowerBound(format!("branch utilities differ at chain point {}", i + 1)));
        }
        let (la, lb) = (mech.allocation[a].eval(x), mech.allocation[b].eval(x));
        let sign = (&la - &lb).signum();
        if sign.is_zero() || prev_sign.as_ref() == Some(&sign) {
            return Err(ThreeError::LowerBound(format!("branch allocations do not alternate at chain point {}", i + 1)));
        }
        prev_sign = Some(sign);
        values.extend([la, lb].into_iter().filter(|v| v.is_positive()));
    }
    Ok(values.len())
}
