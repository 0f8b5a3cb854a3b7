//! Marginal value distributions, revenue curves, virtual values and value-space ironing.
//!
//! All quantities are unconditional: `S(v)` is the mass of buyers interested in the item with
//! value at least `v`, `R(v) = v S(v)` and `fphi(v) = v f(v) - S(v) = -R'(v)`.

use crate::num::{q, Q};
use crate::poset::ItemPoset;
use crate::pwl::{argmin_integral, upper_hull, Pwl};
use crate::verify::StepFn;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Density floor for piecewise-constant inputs.
pub const DENSITY_FLOOR: f64 = 1e-9;
/// Sub-samples per piece when a quadratic revenue curve is linearized.
pub const DEFAULT_SAMPLES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("density pieces must tile [0, H] in order")]
    BadPieces,
    #[error("density {0} below the floor")]
    DensityFloor(f64),
    #[error("density integrates to {0}, not 1")]
    NotNormalized(f64),
    #[error("revenue curve invalid: {0}")]
    BadCurve(String),
    #[error("density vanishes on [0, {0}); virtual value undefined there")]
    ZeroDensity(f64),
    #[error("interest masses sum to {0}, not 1")]
    MassSum(f64),
    #[error("{0} marginals for {1} items")]
    Arity(usize, usize),
    #[error("split lottery needs 0 <= low < high <= H and 0 < beta <= 1")]
    SplitRange,
}

/// Piecewise-constant conditional density on `[0, H]` scaled by the interest mass `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityDist {
    q: Q,
    xs: Vec<Q>,
    dens: Vec<Q>,
}

/// Distribution given by a continuous piecewise-linear unconditional revenue curve through the
/// origin. Its first piece has slope `q`, so no mass lies below the first kink.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveDist {
    q: Q,
    r: Pwl,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MarginalDist {
    Density(DensityDist),
    Curve(CurveDist),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub poset: ItemPoset,
    pub h: Q,
    pub marginals: Vec<MarginalDist>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IronedCurve {
    pub base: Pwl,
    pub hull: Pwl,
    pub ironed_intervals: Vec<(Q, Q)>,
}

impl DensityDist {
    /// `xs` tiles `[0, H]`; `dens[k]` is the conditional density on piece `k`.
    pub fn new(q: Q, xs: Vec<Q>, dens: Vec<Q>) -> Result<Self, DistError> {
        if xs.len() < 2 || xs.len() != dens.len() + 1 || !xs[0].is_zero() || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistError::BadPieces);
        }
        let floor = crate::num::from_f64(DENSITY_FLOOR).unwrap();
        if let Some(d) = dens.iter().find(|d| **d < floor) {
            return Err(DistError::DensityFloor(crate::num::to_f64(d)));
        }
        let total: Q = xs.windows(2).zip(&dens).map(|(w, d)| (&w[1] - &w[0]) * d).sum();
        if (crate::num::to_f64(&total) - 1.0).abs() > 1e-12 {
            return Err(DistError::NotNormalized(crate::num::to_f64(&total)));
        }
        // inputs read from decimal text are off by rounding; renormalize exactly
        let dens = dens.into_iter().map(|d| d / &total).collect();
        Ok(DensityDist { q, xs, dens })
    }

    pub fn uniform(q: Q, h: Q) -> Self {
        let d = Q::one() / &h;
        DensityDist { q, xs: vec![Q::zero(), h], dens: vec![d] }
    }

    pub fn pieces(&self) -> impl Iterator<Item = (&Q, &Q, &Q)> {
        self.xs.windows(2).zip(&self.dens).map(|(w, d)| (&w[0], &w[1], d))
    }

    fn survival(&self, v: &Q) -> Q {
        let mut below = Q::zero();
        for (a, b, d) in self.pieces() {
            if v <= a {
                break;
            }
            let hi = if v < b { v } else { b };
            below += (hi - a) * d;
        }
        &self.q * (Q::one() - below)
    }
}

impl CurveDist {
    pub fn new(r: Pwl) -> Result<Self, DistError> {
        let bad = |m: &str| Err(DistError::BadCurve(m.to_string()));
        if !r.lo().is_zero() || !r.eval(&Q::zero()).is_zero() {
            return bad("must start at the origin");
        }
        if !r.is_continuous() {
            return bad("must be continuous");
        }
        if !r.eval(r.hi()).is_zero() {
            return bad("must vanish at H");
        }
        let q = r.slope(0);
        if !q.is_positive() {
            return bad("first piece must rise");
        }
        for k in 0..r.pieces() {
            let (x0, x1, y0, y1) = r.piece(k);
            if k + 1 < r.pieces() && !y1.is_positive() {
                return bad("must stay positive inside (0, H)");
            }
            // S = R/v is nonincreasing iff each piece has a nonnegative intercept
            if (y0 - r.slope(k) * x0).is_negative() {
                return Err(DistError::BadCurve(format!("negative density on [{x0}, {x1}]")));
            }
        }
        Ok(CurveDist { q, r })
    }

    pub fn curve(&self) -> &Pwl {
        &self.r
    }

    fn survival(&self, v: &Q) -> Q {
        if v <= self.r.breakpoints().get(1).unwrap() {
            return self.q.clone();
        }
        self.r.eval(v) / v
    }
}

impl MarginalDist {
    pub fn q(&self) -> &Q {
        match self {
            MarginalDist::Density(d) => &d.q,
            MarginalDist::Curve(c) => &c.q,
        }
    }

    pub fn h(&self) -> Q {
        match self {
            MarginalDist::Density(d) => d.xs.last().unwrap().clone(),
            MarginalDist::Curve(c) => c.r.hi().clone(),
        }
    }

    /// Breakpoints of the underlying representation.
    pub fn breakpoints(&self) -> Vec<Q> {
        match self {
            MarginalDist::Density(d) => d.xs.clone(),
            MarginalDist::Curve(c) => c.r.breakpoints().to_vec(),
        }
    }

    /// Unconditional mass with value at least `v`.
    pub fn survival(&self, v: &Q) -> Q {
        if v.is_negative() || v.is_zero() {
            return self.q().clone();
        }
        if *v > self.h() {
            return Q::zero();
        }
        match self {
            MarginalDist::Density(d) => d.survival(v),
            MarginalDist::Curve(c) => c.survival(v),
        }
    }

    pub fn cdf_at(&self, v: &Q) -> Q {
        self.q() - self.survival(v)
    }

    /// Mass with value in `[a, b)`.
    pub fn mass(&self, a: &Q, b: &Q) -> Q {
        self.survival(a) - self.survival(b)
    }

    pub fn revenue_at(&self, v: &Q) -> Q {
        v * self.survival(v)
    }

    /// `v f(v) - S(v)`, exact.
    pub fn fphi(&self) -> Pwl {
        match self {
            MarginalDist::Density(d) => {
                let mut pts = Vec::new();
                for (a, b, dens) in d.pieces() {
                    let f = &d.q * dens;
                    let s = d.survival(a);
                    pts.push((a.clone(), a * &f - &s));
                    pts.push((b.clone(), q(2) * b * &f - &f * a - &s));
                }
                Pwl::from_vertices(&pts).expect("density pieces are sorted")
            }
            MarginalDist::Curve(c) => c.r.derivative().neg(),
        }
    }

    /// Unconditional density. Exact for densities; sampled for curve inputs.
    pub fn density(&self, samples: usize) -> Pwl {
        match self {
            MarginalDist::Density(d) => {
                Pwl::steps(d.xs.clone(), d.dens.iter().map(|x| x * &d.q).collect()).expect("sorted")
            }
            MarginalDist::Curve(c) => {
                let mut pts = Vec::new();
                for k in 0..c.r.pieces() {
                    let (x0, x1, y0, _) = c.r.piece(k);
                    let icpt = y0 - c.r.slope(k) * x0;
                    for s in 0..=samples.max(1) {
                        let v = x0 + (x1 - x0) * Q::new(s.into(), samples.max(1).into());
                        let f = if k == 0 { Q::zero() } else { &icpt / (&v * &v) };
                        pts.push((v, f));
                    }
                }
                Pwl::from_vertices(&pts).expect("sorted")
            }
        }
    }

    pub fn cdf(&self, samples: usize) -> Pwl {
        match self {
            MarginalDist::Density(d) => {
                let pts: Vec<(Q, Q)> = d.xs.iter().map(|x| (x.clone(), self.cdf_at(x))).collect();
                Pwl::from_vertices(&pts).expect("sorted")
            }
            MarginalDist::Curve(c) => self.sampled(&c.r, samples, |v| self.cdf_at(v)),
        }
    }

    fn sampled(&self, grid: &Pwl, samples: usize, f: impl Fn(&Q) -> Q) -> Pwl {
        let pts: Vec<(Q, Q)> = grid.sample(samples).into_iter().map(|(x, _)| (x.clone(), f(&x))).collect();
        Pwl::from_vertices(&pts).expect("sorted")
    }

    /// Revenue curve as a piecewise-linear function: exact for curve inputs, sampled at
    /// `samples` points per piece for densities.
    pub fn revenue_curve(&self, samples: usize) -> Pwl {
        match self {
            MarginalDist::Curve(c) => c.r.clone(),
            MarginalDist::Density(d) => {
                let grid = Pwl::steps(d.xs.clone(), d.dens.clone()).expect("sorted");
                self.sampled(&grid, samples, |v| self.revenue_at(v))
            }
        }
    }

    /// Myerson virtual value `v - S(v)/f(v)`.
    pub fn virtual_value(&self) -> Result<Pwl, DistError> {
        match self {
            MarginalDist::Density(d) => {
                let mut pts = Vec::new();
                for (a, b, dens) in d.pieces() {
                    let f = &d.q * dens;
                    pts.push((a.clone(), a - d.survival(a) / &f));
                    pts.push((b.clone(), b - (d.survival(a) - (b - a) * &f) / &f));
                }
                Ok(Pwl::from_vertices(&pts).expect("sorted"))
            }
            MarginalDist::Curve(c) => Err(DistError::ZeroDensity(crate::num::to_f64(&c.r.breakpoints()[1]))),
        }
    }

    /// Concavity of the revenue curve, i.e. `fphi` nondecreasing.
    pub fn is_dmr(&self, tol: &Q) -> bool {
        self.fphi().is_nondecreasing(tol)
    }

    /// Largest maximizer of the revenue curve.
    pub fn monopoly_reserve(&self) -> Q {
        argmin_integral(&self.fphi()).0
    }

    /// Same distribution with all mass between sample points pushed up to the next sample,
    /// giving an exact piecewise-linear curve.
    pub fn to_curve(&self, samples: usize) -> Result<CurveDist, DistError> {
        match self {
            MarginalDist::Curve(c) => Ok(c.clone()),
            MarginalDist::Density(_) => CurveDist::new(self.revenue_curve(samples)),
        }
    }
}

impl Instance {
    pub fn new(poset: ItemPoset, h: Q, marginals: Vec<MarginalDist>) -> Result<Self, DistError> {
        if marginals.len() != poset.len() {
            return Err(DistError::Arity(marginals.len(), poset.len()));
        }
        let total: Q = marginals.iter().map(|m| m.q().clone()).sum();
        if (crate::num::to_f64(&total) - 1.0).abs() > 1e-12 {
            return Err(DistError::MassSum(crate::num::to_f64(&total)));
        }
        Ok(Instance { poset, h, marginals })
    }

    pub fn m(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_dmr(&self, tol: &Q) -> bool {
        self.marginals.iter().all(|m| m.is_dmr(tol))
    }
}

/// Upper concave envelope of a continuous piecewise-linear curve, with the maximal open
/// stretches where it lies strictly above.
pub fn iron(r: &Pwl) -> IronedCurve {
    let base = r.simplify();
    let verts = base.vertices();
    let hull_pts = upper_hull(&verts);
    let hull = Pwl::from_vertices(&hull_pts).expect("hull is sorted");
    let mut ironed = Vec::new();
    let mut start: Option<Q> = None;
    for (x, y) in &verts {
        let touching = hull.eval(x) == *y;
        match (&start, touching) {
            (Some(s), true) => {
                if s < x {
                    ironed.push((s.clone(), x.clone()));
                }
                start = Some(x.clone());
            }
            (None, true) => start = Some(x.clone()),
            _ => {}
        }
    }
    // keep only stretches with an interior point strictly below the hull
    ironed.retain(|(a, b)| verts.iter().any(|(x, y)| x > a && x < b && hull.eval(x) > *y));
    IronedCurve { base, hull, ironed_intervals: ironed }
}

/// `{0 below low, beta on [low, high), 1 from high}` with the matching payments.
pub fn split_lottery(low: &Q, high: &Q, beta: &Q, h: &Q) -> Result<StepFn, DistError> {
    if low.is_negative() || low >= high || high > h || !beta.is_positive() || *beta > Q::one() {
        return Err(DistError::SplitRange);
    }
    if beta.is_one() {
        return Ok(StepFn::new(vec![(low.clone(), Q::one())]).expect("valid step"));
    }
    Ok(StepFn::new(vec![(low.clone(), beta.clone()), (high.clone(), Q::one())]).expect("valid step"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::qr;
    use proptest::prelude::*;

    fn uniform(qm: Q, h: i64) -> MarginalDist {
        MarginalDist::Density(DensityDist::uniform(qm, q(h)))
    }

    fn two_piece() -> MarginalDist {
        MarginalDist::Density(DensityDist::new(q(1), vec![q(0), qr(1, 4), q(1)], vec![q(2), qr(2, 3)]).unwrap())
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(uniform(q(1), 1).cdf(16).eval(&qr(1, 3)), qr(1, 3));
        assert_eq!(uniform(qr(1, 2), 1).cdf_at(&q(1)), qr(1, 2));
        assert_eq!(two_piece().cdf_at(&qr(1, 4)), qr(1, 2));
    }

    #[test]
    fn revenue_examples() {
        assert_eq!(uniform(q(1), 1).revenue_at(&qr(1, 2)), qr(1, 4));
        assert_eq!(uniform(q(1), 1).monopoly_reserve(), qr(1, 2));
        assert_eq!(uniform(qr(1, 3), 1).revenue_at(&qr(1, 2)), qr(1, 12));
        assert!(uniform(q(1), 1).revenue_curve(16).eval(&q(1)).is_zero());
    }

    #[test]
    fn constant_target_curve() {
        // R = 1 on [1, H] gives F = 1 - 1/x
        let h = q(4);
        let r = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(3), q(1)), (h.clone(), q(0))]).unwrap();
        let m = MarginalDist::Curve(CurveDist::new(r).unwrap());
        assert_eq!(m.cdf_at(&q(2)), qr(1, 2));
        assert_eq!(m.revenue_at(&qr(5, 2)), q(1));
    }

    #[test]
    fn virtual_values() {
        let u = uniform(q(1), 1);
        let phi = u.virtual_value().unwrap();
        assert_eq!(phi.eval(&qr(3, 4)), qr(1, 2));
        assert_eq!(phi.eval(&qr(1, 2)), q(0));
        let two = two_piece().virtual_value().unwrap();
        assert!(two.eval(&qr(1, 4)) != two.left_limit(&qr(1, 4)));
    }

    #[test]
    fn derivative_identity_by_finite_differences() {
        let m = two_piece();
        let fphi = m.fphi();
        let h = qr(1, 1_000_000);
        for v in [qr(1, 10), qr(1, 5), qr(1, 2), qr(9, 10)] {
            let fd = (m.revenue_at(&(&v + &h)) - m.revenue_at(&(&v - &h))) / (q(2) * &h);
            let diff = crate::num::to_f64(&(fd + fphi.eval(&v)));
            assert!(diff.abs() < 1e-5, "{diff}");
        }
    }

    #[test]
    fn dmr_detection() {
        assert!(uniform(q(1), 1).is_dmr(&Q::zero()));
        assert!(!two_piece().is_dmr(&Q::zero()));
        let rising = DensityDist::new(q(1), vec![q(0), qr(1, 2), q(1)], vec![qr(1, 2), qr(3, 2)]).unwrap();
        assert!(MarginalDist::Density(rising).is_dmr(&Q::zero()));
        let dip = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), qr(9, 10)), (q(3), qr(11, 10)), (q(4), q(0))]).unwrap();
        assert!(!MarginalDist::Curve(CurveDist::new(dip).unwrap()).is_dmr(&Q::zero()));
    }

    #[test]
    fn ironing_examples() {
        let concave = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), q(0))]).unwrap();
        assert!(iron(&concave).ironed_intervals.is_empty());
        let r = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), qr(1, 5)), (q(3), qr(6, 5)), (q(4), q(0))]).unwrap();
        let ir = iron(&r);
        assert_eq!(ir.ironed_intervals, vec![(q(1), q(3))]);
        assert_eq!(ir.hull.eval(&q(2)), qr(11, 10));
        // convex combination of the interval endpoints
        let z = qr(7, 4);
        let beta = (q(3) - &z) / q(2);
        assert_eq!(ir.hull.eval(&z), &beta * q(1) + (Q::one() - &beta) * qr(6, 5));
    }

    #[test]
    fn split_lottery_payments() {
        let s = split_lottery(&q(1), &q(3), &qr(1, 2), &q(4)).unwrap();
        assert_eq!(s.payment(&q(3)), q(2));
        assert_eq!(s.payment(&q(2)), qr(1, 2));
        let posted = split_lottery(&q(1), &q(3), &q(1), &q(4)).unwrap();
        assert_eq!(posted.payment(&q(2)), q(1));
        assert!(split_lottery(&q(3), &q(1), &qr(1, 2), &q(4)).is_err());
    }

    fn random_density() -> impl Strategy<Value = MarginalDist> {
        proptest::collection::vec(1u32..20, 1..6).prop_map(|ws| {
            let n = ws.len() as i64;
            let xs: Vec<Q> = (0..=n).map(|i| qr(i, 1)).collect();
            let total: u32 = ws.iter().sum();
            let dens: Vec<Q> = ws.iter().map(|w| qr(*w as i64, total as i64)).collect();
            MarginalDist::Density(DensityDist::new(qr(1, 2), xs, dens).unwrap())
        })
    }

    proptest! {
        #[test]
        fn revenue_vanishes_at_both_ends(m in random_density()) {
            prop_assert!(m.revenue_at(&Q::zero()).is_zero());
            prop_assert!(m.revenue_at(&m.h()).is_zero());
            prop_assert_eq!(m.cdf_at(&m.h()), m.q().clone());
        }

        #[test]
        fn iron_is_idempotent(m in random_density()) {
            let once = iron(&m.revenue_curve(8));
            let twice = iron(&once.hull);
            prop_assert_eq!(twice.hull.simplify(), once.hull.simplify());
            prop_assert!(twice.ironed_intervals.is_empty());
        }

        #[test]
        fn reserve_maximizes_sampled_revenue(m in random_density()) {
            let r = m.monopoly_reserve();
            let best = m.revenue_at(&r);
            for (x, _) in m.revenue_curve(8).sample(1) {
                prop_assert!(m.revenue_at(&x) <= best);
            }
        }
    }
}
