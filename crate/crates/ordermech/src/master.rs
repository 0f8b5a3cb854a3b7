//! Instance generation from a prescribed dual skeleton: zero regions, ironed intervals and flow
//! points per item. Every generated instance comes with a dual that realizes the skeleton
//! exactly, which is re-detected from scratch before it is returned.

use crate::dist::{CurveDist, DistError, Instance, MarginalDist};
use crate::dual::{self, detect_swaps, find_top_chain, properly_iron, virtual_profile, DualSolution, FlowVar, TopChain};
use crate::num::{q, Q};
use crate::poset::{ItemId, ItemPoset};
use crate::pwl::Pwl;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasterError {
    #[error("item {0}: need 1 <= r_lo <= r_hi < H")]
    Endpoints(usize),
    #[error("item {0}: ironed intervals must be nonempty, sorted, disjoint and inside [r_lo, r_hi]")]
    Intervals(usize),
    #[error("flow point {point} on ({worse},{better}) is invalid: {why}")]
    FlowPoint { worse: usize, better: usize, point: f64, why: String },
    #[error("({0},{1}) is not a poset edge")]
    NotAnEdge(usize, usize),
    #[error("{0} item specs for {1} items")]
    Arity(usize, usize),
    #[error("curve slope {slope} exceeds the bound {bound}")]
    Slope { slope: f64, bound: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("generated dual does not realize the skeleton: {0}")]
    Mismatch(String),
    #[error("chain length {m} does not fit; at most {max} levels fit between H/4 and 3H/4")]
    ChainTooLong { m: usize, max: usize },
}

/// Skeleton for one item.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemSpec {
    pub r_lo: Q,
    pub r_hi: Q,
    pub intervals: Vec<(Q, Q)>,
    /// Relative weight of the item before normalization.
    pub weight: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualSpec {
    pub poset: ItemPoset,
    pub h: Q,
    pub items: Vec<ItemSpec>,
    /// Flow points per edge `(worse, better)`.
    pub flows: BTreeMap<(ItemId, ItemId), Vec<Q>>,
}

/// A generated chain instance with its ground truth.
#[derive(Clone, Debug)]
pub struct ChainInstance {
    pub spec: DualSpec,
    pub instance: Instance,
    pub dual: DualSolution,
    pub chain: TopChain,
}

impl ItemSpec {
    pub fn new(r_lo: Q, r_hi: Q, intervals: Vec<(Q, Q)>) -> Self {
        ItemSpec { r_lo, r_hi, intervals, weight: Q::one() }
    }

    fn check(&self, g: usize, h: &Q) -> Result<(), MasterError> {
        if self.r_lo < Q::one() || self.r_lo > self.r_hi || self.r_hi >= sliver_start(h) {
            return Err(MasterError::Endpoints(g));
        }
        let mut prev = self.r_lo.clone();
        for (a, b) in &self.intervals {
            if a >= b || *a < prev || *b > self.r_hi {
                return Err(MasterError::Intervals(g));
            }
            prev = b.clone();
        }
        Ok(())
    }
}

/// Start of the short final stretch on which a curve drops to zero at `H`.
pub fn sliver_start(h: &Q) -> Q {
    h - h / Q::from_integer((1u64 << 20).into())
}

/// Curve features use slopes of `1/(2kH)` with `k` this value; the rest of the slope budget
/// `R(1)/(2H)` is left for flow kinks.
pub const FEATURE_DIVISOR: i64 = 8;

/// Feature slope `1/(2kH)`.
fn feature_slope(h: &Q) -> Q {
    Q::one() / (q(2 * FEATURE_DIVISOR) * h)
}

/// Target revenue curve for one item, before flow corrections: slope `1 + s` on `[0, 1]`, `s` up
/// to `r_lo`, flat through the zero region with a V-shaped dip on every ironed interval, then
/// falling to `H` with slope at most `s`, where `s` is the feature slope.
pub fn curve_from_spec(spec: &ItemSpec, h: &Q) -> Result<Pwl, MasterError> {
    spec.check(0, h)?;
    let s = feature_slope(h);
    let one = Q::one();
    let top = &one + &spec.r_lo * &s;
    let mut pts = vec![(Q::zero(), Q::zero())];
    if spec.r_lo > one {
        pts.push((one.clone(), &one + &s));
    }
    pts.push((spec.r_lo.clone(), top.clone()));
    for (a, b) in &spec.intervals {
        let mid = (a + b) / q(2);
        pts.push((a.clone(), top.clone()));
        pts.push((mid.clone(), &top - (&mid - a) * &s));
        pts.push((b.clone(), top.clone()));
    }
    pts.push((spec.r_hi.clone(), top.clone()));
    let fall = (&spec.r_lo + &one) / (h - &spec.r_hi);
    let fall = if fall > one { one } else { fall };
    pts.push((h.clone(), &top - (h - &spec.r_hi) * &s * fall));
    pts.dedup_by(|b, a| a.0 == b.0 && a.1 == b.1);
    Ok(Pwl::from_vertices(&pts).expect("spec points are sorted").simplify())
}

/// Distribution of mass `mass` whose revenue curve is a positive multiple of `r` on `[0, s]`,
/// where `s` is [`sliver_start`]; any mass the curve leaves at `H` is spread over `[s, H]`.
/// The slope bound `|R'| <= R(1)/(2H)` is enforced on `[1, s]`.
pub fn dist_from_curve(r: &Pwl, h: &Q, mass: &Q) -> Result<MarginalDist, MasterError> {
    let one = Q::one();
    let r1 = r.eval(&one);
    if !r1.is_positive() {
        return Err(DistError::BadCurve("R(1) must be positive".into()).into());
    }
    let bound = &r1 / (q(2) * h);
    let s = sliver_start(h);
    for k in 0..r.pieces() {
        let (x0, x1, _, _) = r.piece(k);
        if *x1 <= one || *x0 >= s {
            continue;
        }
        let slope = r.slope(k);
        if slope.abs() > bound {
            return Err(MasterError::Slope { slope: crate::num::to_f64(&slope), bound: crate::num::to_f64(&bound) });
        }
    }
    let scale = mass / &r1;
    let mut pts: Vec<(Q, Q)> = r.vertices().into_iter().filter(|(x, _)| *x < s).map(|(x, y)| (x, y * &scale)).collect();
    pts.push((s.clone(), r.eval(&s) * &scale));
    pts.push((h.clone(), Q::zero()));
    let curve = Pwl::from_vertices(&pts).expect("sorted").simplify();
    Ok(MarginalDist::Curve(CurveDist::new(curve)?))
}

impl DualSpec {
    pub fn validate(&self) -> Result<(), MasterError> {
        if self.items.len() != self.poset.len() {
            return Err(MasterError::Arity(self.items.len(), self.poset.len()));
        }
        for (g, it) in self.items.iter().enumerate() {
            it.check(g, &self.h)?;
        }
        let s = sliver_start(&self.h);
        for (&(w, b), pts) in &self.flows {
            if !self.poset.edges().contains(&(w, b)) {
                return Err(MasterError::NotAnEdge(w, b));
            }
            for y in pts {
                let bad = |why: &str| MasterError::FlowPoint { worse: w, better: b, point: crate::num::to_f64(y), why: why.into() };
                if *y < Q::one() || *y >= s {
                    return Err(bad("outside [1, H)"));
                }
                if self.items[w].intervals.iter().any(|(lo, hi)| y > lo && y <= hi) {
                    return Err(bad("inside an ironed interval of the sending item"));
                }
            }
        }
        Ok(())
    }

    fn flow_count(&self) -> usize {
        self.flows.values().map(|v| v.len()).sum()
    }
}

/// Builds an instance and a dual realizing `spec`. Each flow point carries the same small mass,
/// compensated by a kink in both endpoint curves so that the unironed `f Φ` of every item is
/// exactly the negated slope of its target curve.
pub fn generate(spec: &DualSpec) -> Result<(Instance, DualSolution), MasterError> {
    spec.validate()?;
    let h = &spec.h;
    let m = spec.items.len();
    let min_weight = spec.items.iter().map(|it| it.weight.clone()).min().expect("at least one item");
    if !min_weight.is_positive() {
        return Err(MasterError::Endpoints(spec.items.iter().position(|it| !it.weight.is_positive()).unwrap_or(0)));
    }
    // slack in the slope bound is at least w(k-1)/(2kH); kinks use at most half of it
    let k = q(FEATURE_DIVISOR);
    let mu = &min_weight * (&k - q(1)) / (q(4) * &k * h * Q::from_integer((spec.flow_count() + 1).into()));
    let mut curves = Vec::with_capacity(m);
    for it in &spec.items {
        curves.push(curve_from_spec(it, h)?.scale(&it.weight));
    }
    for (&(w, b), pts) in &spec.flows {
        for y in pts {
            let kink = Pwl::from_vertices(&[(Q::zero(), Q::zero()), (y.clone(), y * &mu), (h.clone(), y * &mu)]).expect("sorted");
            curves[w] = curves[w].add(&kink);
            curves[b] = curves[b].sub(&kink);
        }
    }
    // every curve is linear on [0, 1], so R(1) is its first slope and one factor rescales all items
    let total: Q = curves.iter().map(|c| c.slope(0)).sum();
    let mut marginals = Vec::with_capacity(m);
    for c in &curves {
        marginals.push(dist_from_curve(c, h, &(c.slope(0) / &total))?);
    }
    let mut flows = BTreeMap::new();
    for (&(w, b), pts) in &spec.flows {
        let atoms = pts.iter().map(|y| (y.clone(), &mu / &total)).collect();
        flows.insert((w, b), FlowVar::from_atoms(atoms));
    }
    let inst = Instance::new(spec.poset.clone(), h.clone(), marginals)?;
    let dual = properly_iron(&inst, &DualSolution { lambda: Vec::new(), flows });
    check_realizes(spec, &inst, &dual)?;
    Ok((inst, dual))
}

/// Re-detects zero regions, ironed intervals and flow supports and compares them with `spec`.
pub fn check_realizes(spec: &DualSpec, inst: &Instance, d: &DualSolution) -> Result<(), MasterError> {
    d.validate(inst).map_err(|e| MasterError::Mismatch(e.to_string()))?;
    let prof = virtual_profile(inst, d);
    for (g, (it, p)) in spec.items.iter().zip(&prof.items).enumerate() {
        if p.r_lo != it.r_lo || p.r_hi != it.r_hi {
            return Err(MasterError::Mismatch(format!("item {g}: zero region [{}, {}]", p.r_lo, p.r_hi)));
        }
        if p.ironed_intervals != it.intervals {
            return Err(MasterError::Mismatch(format!("item {g}: ironed intervals {:?}", p.ironed_intervals)));
        }
        if !p.fphi.is_nondecreasing(&Q::zero()) {
            return Err(MasterError::Mismatch(format!("item {g}: virtual value not monotone")));
        }
    }
    for (&(w, b), pts) in &spec.flows {
        let got: Vec<Q> = d.flow(w, b).map(|f| f.atoms.iter().map(|(p, _)| p.clone()).collect()).unwrap_or_default();
        let mut want = pts.clone();
        want.sort();
        want.dedup();
        if got != want || d.flow(w, b).is_some_and(|f| f.density.is_some()) {
            return Err(MasterError::Mismatch(format!("flow support on ({w},{b})")));
        }
    }
    for (&(w, b), f) in &d.flows {
        if !f.atoms.is_empty() && !spec.flows.contains_key(&(w, b)) {
            return Err(MasterError::Mismatch(format!("unexpected flow on ({w},{b})")));
        }
    }
    Ok(())
}

/// Item ids in chain instances.
pub const CHAIN_A: ItemId = 0;
pub const CHAIN_B: ItemId = 1;
pub const CHAIN_C: ItemId = 2;

/// Interleaved layout for the two-branch star. `levels` is strictly decreasing
/// `e_0 > e_1 > ... > e_{M+1}`; chain point `i` (1-based) sits at `points[i-1]` inside
/// `(e_i, e_{i-1})` and belongs to A for odd `i`, B for even `i`. Its ironed interval is
/// `[e_{i+1}, e_{i-1}]`, so intervals of the same item abut. With `converge` both items share
/// the bottom `e_{M+1}` of their zero regions, which leaves a common unironed zero point.
pub fn chain_spec(levels: &[Q], points: &[Q], h: &Q, converge: bool) -> DualSpec {
    let m = points.len();
    assert_eq!(levels.len(), m + 2, "need M + 2 levels");
    let poset = ItemPoset::new(&["A", "B", "C"], &[("C", "A"), ("C", "B")]).expect("star poset");
    let mut ivs: [Vec<(Q, Q)>; 2] = [Vec::new(), Vec::new()];
    for i in 1..=m {
        ivs[(i + 1) % 2].push((levels[i + 1].clone(), levels[i - 1].clone()));
    }
    for v in ivs.iter_mut() {
        v.reverse();
    }
    let bottom = |item: usize| -> Q {
        let owner_of_last = (m + 1) % 2;
        if converge || m == 0 || item == owner_of_last {
            levels[m + 1].clone()
        } else {
            levels[m].clone()
        }
    };
    let [ia, ib] = ivs;
    let items = vec![
        ItemSpec::new(bottom(0), levels[0].clone(), ia),
        ItemSpec::new(if m == 0 { levels[1].clone() } else { bottom(1) }, levels[1].clone(), ib),
        ItemSpec::new(h / q(8), q(7) * h / q(8), Vec::new()),
    ];
    let mut flows = BTreeMap::new();
    flows.insert((CHAIN_C, CHAIN_A), points.to_vec());
    flows.insert((CHAIN_C, CHAIN_B), points.to_vec());
    DualSpec { poset, h: h.clone(), items, flows }
}

/// Builds a chain instance from a layout and checks that the top chain and swap-freeness are
/// re-detected.
pub fn chain_instance_from(levels: &[Q], points: &[Q], h: &Q, converge: bool) -> Result<ChainInstance, MasterError> {
    for w in levels.windows(2) {
        if w[0] <= w[1] {
            return Err(MasterError::Mismatch("levels must decrease".into()));
        }
    }
    for (i, p) in points.iter().enumerate() {
        if *p <= levels[i + 1] || *p >= levels[i] {
            return Err(MasterError::Mismatch(format!("chain point {} outside its slot", i + 1)));
        }
    }
    let spec = chain_spec(levels, points, h, converge);
    let (instance, dual) = generate(&spec)?;
    let expected = TopChain { points: points.iter().enumerate().map(|(i, p)| (p.clone(), if i % 2 == 0 { CHAIN_A } else { CHAIN_B })).collect() };
    let chain = find_top_chain(&instance, &dual);
    if chain != expected {
        return Err(MasterError::Mismatch(format!("top chain of length {} instead of {}", chain.points.len(), expected.points.len())));
    }
    if !detect_swaps(&instance, &dual).is_empty() {
        return Err(MasterError::Mismatch("generated dual has swaps".into()));
    }
    Ok(ChainInstance { spec, instance, dual, chain })
}

/// Chain instance with `m` points: levels evenly spaced in `[H/4, 3H/4]`, each chain point in
/// the middle of its slot.
pub fn generate_chain_instance(m: usize, h: &Q) -> Result<ChainInstance, MasterError> {
    let lo = h / q(4);
    let hi = q(3) * h / q(4);
    let step = (&hi - &lo) / Q::from_integer((m + 1).into());
    // levels closer than 1/1024 make the instance numerically meaningless for float consumers
    let max = crate::num::to_f64(&((&hi - &lo) * q(1024))) as usize;
    if m + 1 > max {
        return Err(MasterError::ChainTooLong { m, max: max.saturating_sub(1) });
    }
    let levels: Vec<Q> = (0..m + 2).map(|k| &hi - &step * Q::from_integer(k.into())).collect();
    let points: Vec<Q> = (1..=m).map(|i| (&levels[i] + &levels[i - 1]) / q(2)).collect();
    chain_instance_from(&levels, &points, h, false)
}

/// Geometric layout `e_k = limit + (e_0 - limit) ratio^k` converging to `limit`.
pub fn geometric_levels(m: usize, top: &Q, limit: &Q, ratio: &Q) -> Vec<Q> {
    let mut out = Vec::with_capacity(m + 2);
    let mut gap = top - limit;
    for _ in 0..m + 2 {
        out.push(limit + &gap);
        gap *= ratio;
    }
    out
}

pub use dual::support_intervals as ironed_intervals_of;

/// Line `G0 -> G1 -> ...` of `m` items with random endpoints and ironed intervals on a
/// quarter grid in `[1, min(H, 16) - 1)`. No flow points; the generated dual only irons.
pub fn random_line_spec<R: rand::Rng>(m: usize, h: &Q, rng: &mut R) -> DualSpec {
    let names: Vec<String> = (0..m).map(|i| format!("G{i}")).collect();
    let poset = ItemPoset::new_raw(names, (1..m).map(|i| (i - 1, i)).collect());
    let slots = (crate::num::to_f64(h).min(16.0) as i64 - 2).max(1) * 4;
    let items = (0..m)
        .map(|_| {
            let k = rng.gen_range(2..=8);
            let mut xs: Vec<Q> = (0..k).map(|_| Q::one() + crate::num::qr(rng.gen_range(0..slots), 4)).collect();
            xs.sort();
            xs.dedup();
            let inner = if xs.len() > 2 { &xs[1..xs.len() - 1] } else { &[] };
            let ivs = inner.chunks(2).filter(|w| w.len() == 2).map(|w| (w[0].clone(), w[1].clone())).collect();
            ItemSpec::new(xs[0].clone(), xs.last().unwrap().clone(), ivs)
        })
        .collect();
    DualSpec { poset, h: h.clone(), items, flows: BTreeMap::new() }
}
