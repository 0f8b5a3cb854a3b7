//! Piecewise-linear functions with exact rational breakpoints and optional jumps.

use crate::num::{max_q, min_q, pos_part, Q};
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwlError {
    #[error("breakpoints must be strictly increasing (at index {0})")]
    Unsorted(usize),
    #[error("need at least two breakpoints")]
    TooShort,
    #[error("value arrays have length {got}, expected {want}")]
    Length { got: usize, want: usize },
    #[error("operation requires a piecewise-constant function")]
    NotConstant,
}

/// Function on `[xs[0], xs[last]]`. On piece `k` it runs linearly from `left[k]` at `xs[k]`
/// to `right[k]` as `v -> xs[k+1]`. Evaluation is right-continuous; at the last breakpoint
/// the left limit is returned.
#[derive(Clone, Debug, PartialEq)]
pub struct Pwl {
    xs: Vec<Q>,
    left: Vec<Q>,
    right: Vec<Q>,
}

impl Pwl {
    pub fn new(xs: Vec<Q>, left: Vec<Q>, right: Vec<Q>) -> Result<Self, PwlError> {
        if xs.len() < 2 {
            return Err(PwlError::TooShort);
        }
        for i in 1..xs.len() {
            if xs[i] <= xs[i - 1] {
                return Err(PwlError::Unsorted(i));
            }
        }
        let want = xs.len() - 1;
        for len in [left.len(), right.len()] {
            if len != want {
                return Err(PwlError::Length { got: len, want });
            }
        }
        Ok(Pwl { xs, left, right })
    }

    /// Builds from a vertex list. A repeated abscissa encodes a jump: the first copy is the
    /// left limit, the second the value.
    pub fn from_vertices(pts: &[(Q, Q)]) -> Result<Self, PwlError> {
        let mut xs = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut i = 0;
        while i + 1 < pts.len() {
            let (x0, y0) = &pts[i];
            let (x1, y1) = &pts[i + 1];
            if x1 == x0 {
                i += 1;
                continue;
            }
            if x1 < x0 {
                return Err(PwlError::Unsorted(i + 1));
            }
            xs.push(x0.clone());
            left.push(y0.clone());
            right.push(y1.clone());
            i += 1;
        }
        if let Some((x, _)) = pts.last() {
            xs.push(x.clone());
        }
        Pwl::new(xs, left, right)
    }

    pub fn constant(lo: Q, hi: Q, c: Q) -> Self {
        Pwl::new(vec![lo, hi], vec![c.clone()], vec![c]).expect("constant on a nonempty interval")
    }

    /// Step function taking `vals[k]` on `[xs[k], xs[k+1])`.
    pub fn steps(xs: Vec<Q>, vals: Vec<Q>) -> Result<Self, PwlError> {
        Pwl::new(xs, vals.clone(), vals)
    }

    pub fn breakpoints(&self) -> &[Q] {
        &self.xs
    }

    pub fn lo(&self) -> &Q {
        &self.xs[0]
    }

    pub fn hi(&self) -> &Q {
        self.xs.last().unwrap()
    }

    pub fn pieces(&self) -> usize {
        self.left.len()
    }

    /// (x0, x1, value at x0, left limit at x1)
    pub fn piece(&self, k: usize) -> (&Q, &Q, &Q, &Q) {
        (&self.xs[k], &self.xs[k + 1], &self.left[k], &self.right[k])
    }

    pub fn slope(&self, k: usize) -> Q {
        (&self.right[k] - &self.left[k]) / (&self.xs[k + 1] - &self.xs[k])
    }

    /// Index of the piece whose half-open interval contains `x` (clamped to the domain).
    fn locate(&self, x: &Q) -> usize {
        let n = self.pieces();
        match self.xs.binary_search(x) {
            Ok(i) => i.min(n - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 1),
        }
    }

    fn interp(&self, k: usize, x: &Q) -> Q {
        let (x0, x1) = (&self.xs[k], &self.xs[k + 1]);
        if x <= x0 {
            return self.left[k].clone();
        }
        if x >= x1 {
            return self.right[k].clone();
        }
        &self.left[k] + (&self.right[k] - &self.left[k]) * (x - x0) / (x1 - x0)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.interp(self.locate(x), x)
    }

    pub fn left_limit(&self, x: &Q) -> Q {
        if x <= self.lo() {
            return self.left[0].clone();
        }
        match self.xs.binary_search(x) {
            Ok(i) => self.right[i - 1].clone(),
            Err(i) => self.interp((i - 1).min(self.pieces() - 1), x),
        }
    }

    pub fn jump_at(&self, k: usize) -> Q {
        if k == 0 || k >= self.pieces() {
            return Q::zero();
        }
        &self.left[k] - &self.right[k - 1]
    }

    pub fn is_continuous(&self) -> bool {
        (1..self.pieces()).all(|k| self.jump_at(k).is_zero())
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.left.iter().zip(&self.right).all(|(a, b)| a == b)
    }

    /// Same function with extra breakpoints inserted (points outside the domain are ignored).
    pub fn refine(&self, pts: &[Q]) -> Pwl {
        let mut all: Vec<Q> = self
            .xs
            .iter()
            .chain(pts.iter().filter(|p| *p > self.lo() && *p < self.hi()))
            .cloned()
            .collect();
        all.sort();
        all.dedup();
        if all.len() == self.xs.len() {
            return self.clone();
        }
        let mut left = Vec::with_capacity(all.len() - 1);
        let mut right = Vec::with_capacity(all.len() - 1);
        for w in all.windows(2) {
            let k = self.locate(&w[0]);
            left.push(self.interp(k, &w[0]));
            right.push(self.interp(k, &w[1]));
        }
        Pwl { xs: all, left, right }
    }

    fn combine(&self, other: &Pwl, op: impl Fn(&Q, &Q) -> Q) -> Pwl {
        let a = self.refine(&other.xs);
        let b = other.refine(&self.xs);
        // domains may differ; restrict to the common part
        let lo = max_q(a.lo(), b.lo());
        let hi = min_q(a.hi(), b.hi());
        let a = a.restrict(&lo, &hi);
        let b = b.restrict(&lo, &hi);
        let left = a.left.iter().zip(&b.left).map(|(x, y)| op(x, y)).collect();
        let right = a.right.iter().zip(&b.right).map(|(x, y)| op(x, y)).collect();
        Pwl { xs: a.xs, left, right }
    }

    pub fn add(&self, other: &Pwl) -> Pwl {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Pwl) -> Pwl {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, c: &Q) -> Pwl {
        Pwl {
            xs: self.xs.clone(),
            left: self.left.iter().map(|v| v * c).collect(),
            right: self.right.iter().map(|v| v * c).collect(),
        }
    }

    pub fn neg(&self) -> Pwl {
        self.scale(&-Q::from_integer(1.into()))
    }

    /// Same function with all values left of `r` replaced by zero.
    pub fn zero_below(&self, r: &Q) -> Pwl {
        let mut out = self.refine(std::slice::from_ref(r));
        for k in 0..out.pieces() {
            if out.xs[k] < *r {
                out.left[k] = Q::zero();
                out.right[k] = Q::zero();
            }
        }
        out
    }

    /// Restriction to `[a, b]` (clamped to the domain, must be nonempty).
    pub fn restrict(&self, a: &Q, b: &Q) -> Pwl {
        let a = max_q(a, self.lo());
        let b = min_q(b, self.hi());
        let r = self.refine(&[a.clone(), b.clone()]);
        let i = r.xs.iter().position(|x| *x == a).unwrap();
        let j = r.xs.iter().position(|x| *x == b).unwrap();
        Pwl { xs: r.xs[i..=j].to_vec(), left: r.left[i..j].to_vec(), right: r.right[i..j].to_vec() }
    }

    pub fn integral(&self) -> Q {
        (0..self.pieces())
            .map(|k| (&self.xs[k + 1] - &self.xs[k]) * (&self.left[k] + &self.right[k]) / Q::from_integer(2.into()))
            .sum()
    }

    pub fn integral_between(&self, a: &Q, b: &Q) -> Q {
        if a >= b {
            return Q::zero();
        }
        self.restrict(a, b).integral()
    }

    /// Exact `∫ max(f, 0)`.
    pub fn positive_integral(&self) -> Q {
        let two = Q::from_integer(2.into());
        let mut total = Q::zero();
        for k in 0..self.pieces() {
            let (x0, x1, y0, y1) = self.piece(k);
            let w = x1 - x0;
            if !y0.is_negative() && !y1.is_negative() {
                total += &w * (y0 + y1) / &two;
            } else if y0.is_positive() || y1.is_positive() {
                // one sign change: the positive part is a triangle
                let top = max_q(y0, y1);
                let t = &top / (y0 - y1).abs();
                total += &w * &t * &top / &two;
            }
        }
        total
    }

    /// Continuous antiderivative `v -> ∫_lo^v f`, exact for piecewise-constant `f`.
    pub fn antiderivative(&self) -> Result<Pwl, PwlError> {
        if !self.is_piecewise_constant() {
            return Err(PwlError::NotConstant);
        }
        let mut acc = Q::zero();
        let mut pts = vec![(self.xs[0].clone(), acc.clone())];
        for k in 0..self.pieces() {
            acc += (&self.xs[k + 1] - &self.xs[k]) * &self.left[k];
            pts.push((self.xs[k + 1].clone(), acc.clone()));
        }
        Pwl::from_vertices(&pts)
    }

    /// Piecewise-constant derivative of a continuous function.
    pub fn derivative(&self) -> Pwl {
        let vals: Vec<Q> = (0..self.pieces()).map(|k| self.slope(k)).collect();
        Pwl { xs: self.xs.clone(), left: vals.clone(), right: vals }
    }

    /// Vertices `(x, f(x))` using right values; meaningful for continuous functions.
    pub fn vertices(&self) -> Vec<(Q, Q)> {
        let mut out: Vec<(Q, Q)> = (0..self.pieces()).map(|k| (self.xs[k].clone(), self.left[k].clone())).collect();
        out.push((self.hi().clone(), self.right.last().unwrap().clone()));
        out
    }

    /// All one-sided values at breakpoints, used for extrema.
    fn all_values(&self) -> impl Iterator<Item = &Q> {
        self.left.iter().chain(self.right.iter())
    }

    pub fn max_value(&self) -> Q {
        self.all_values().max().unwrap().clone()
    }

    pub fn min_value(&self) -> Q {
        self.all_values().min().unwrap().clone()
    }

    pub fn is_nondecreasing(&self, tol: &Q) -> bool {
        let ntol = -tol.clone();
        (0..self.pieces()).all(|k| &self.right[k] - &self.left[k] >= ntol && self.jump_at(k) >= ntol)
    }

    /// Merges adjacent pieces that are continuous and collinear.
    pub fn simplify(&self) -> Pwl {
        let mut xs = vec![self.xs[0].clone()];
        let mut left = vec![self.left[0].clone()];
        let mut right = vec![self.right[0].clone()];
        for k in 1..self.pieces() {
            let last = right.len() - 1;
            let x0 = xs.last().unwrap().clone();
            let mergeable = self.left[k] == right[last] && {
                let s_prev = (&right[last] - &left[last]) / (&self.xs[k] - &x0);
                s_prev == self.slope(k)
            };
            if mergeable {
                right[last] = self.right[k].clone();
            } else {
                xs.push(self.xs[k].clone());
                left.push(self.left[k].clone());
                right.push(self.right[k].clone());
            }
        }
        xs.push(self.hi().clone());
        Pwl { xs, left, right }
    }

    /// `(x, f(x))` at breakpoints plus `per_piece - 1` interior points per piece.
    pub fn sample(&self, per_piece: usize) -> Vec<(Q, Q)> {
        let mut out = Vec::new();
        for k in 0..self.pieces() {
            let (x0, x1, _, _) = self.piece(k);
            for s in 0..per_piece.max(1) {
                let x = x0 + (x1 - x0) * Q::new(s.into(), per_piece.max(1).into());
                out.push((x.clone(), self.interp(k, &x)));
            }
        }
        out.push((self.hi().clone(), self.right.last().unwrap().clone()));
        out
    }

    /// Points inside pieces where a linear piece changes sign.
    pub fn zero_crossings(&self) -> Vec<Q> {
        let mut cuts = Vec::new();
        for k in 0..self.pieces() {
            let (x0, x1, y0, y1) = self.piece(k);
            if (y0.is_positive() && y1.is_negative()) || (y0.is_negative() && y1.is_positive()) {
                cuts.push(x0 + (x1 - x0) * y0 / (y0 - y1));
            }
        }
        cuts
    }

    /// Positive part, exact (zero crossings become breakpoints).
    pub fn positive_part(&self) -> Pwl {
        let r = self.refine(&self.zero_crossings());
        Pwl {
            xs: r.xs,
            left: r.left.iter().map(pos_part).collect(),
            right: r.right.iter().map(pos_part).collect(),
        }
    }
}

/// Largest minimizer of `x -> ∫_lo^x g` and the minimum value. Exact for piecewise-linear `g`.
pub fn argmin_integral(g: &Pwl) -> (Q, Q) {
    let mut best = (g.lo().clone(), Q::zero());
    let mut acc = Q::zero();
    let two = Q::from_integer(2.into());
    for k in 0..g.pieces() {
        let (x0, x1, y0, y1) = g.piece(k);
        let w = x1 - x0;
        if (y0.is_negative() && y1.is_positive()) || (y0.is_positive() && y1.is_negative()) {
            let t = y0 / (y0 - y1);
            let val = &acc + &w * &t * y0 / &two;
            if val <= best.1 {
                best = (x0 + &w * &t, val);
            }
        }
        acc += &w * (y0 + y1) / &two;
        if acc <= best.1 {
            best = (x1.clone(), acc.clone());
        }
    }
    best
}

/// Upper concave hull of points sorted by abscissa (monotone chain). Collinear points are
/// dropped, so the output consists of strict kinks only.
pub fn upper_hull(pts: &[(Q, Q)]) -> Vec<(Q, Q)> {
    let mut hull: Vec<(Q, Q)> = Vec::with_capacity(pts.len());
    for p in pts {
        if let Some(last) = hull.last() {
            if last.0 == p.0 {
                if p.1 > last.1 {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // keep b only if it lies strictly above the chord a-p
            let cross = (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0);
            if !cross.is_negative() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p.clone());
    }
    hull
}

/// Lower convex hull, via the upper hull of the negated points.
pub fn lower_hull(pts: &[(Q, Q)]) -> Vec<(Q, Q)> {
    let neg: Vec<(Q, Q)> = pts.iter().map(|(x, y)| (x.clone(), -y.clone())).collect();
    upper_hull(&neg).into_iter().map(|(x, y)| (x, -y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qr};

    fn tri() -> Pwl {
        Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), q(0))]).unwrap()
    }

    #[test]
    fn eval_and_limits() {
        let f = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(1), q(3)), (q(2), q(3))]).unwrap();
        assert_eq!(f.eval(&qr(1, 2)), qr(1, 2));
        assert_eq!(f.eval(&q(1)), q(3));
        assert_eq!(f.left_limit(&q(1)), q(1));
        assert_eq!(f.eval(&q(2)), q(3));
        assert!(!f.is_continuous());
    }

    #[test]
    fn arithmetic_merges_breakpoints() {
        let g = Pwl::steps(vec![q(0), qr(1, 2), q(2)], vec![q(1), q(-1)]).unwrap();
        let s = tri().add(&g);
        assert_eq!(s.breakpoints(), &[q(0), qr(1, 2), q(1), q(2)]);
        assert_eq!(s.eval(&qr(1, 4)), qr(5, 4));
        assert_eq!(s.eval(&qr(3, 2)), qr(-1, 2));
        assert_eq!(tri().sub(&tri()).max_value(), q(0));
    }

    #[test]
    fn integrals() {
        assert_eq!(tri().integral(), q(1));
        assert_eq!(tri().integral_between(&qr(1, 2), &q(1)), qr(3, 8));
        let f = Pwl::from_vertices(&[(q(0), q(-1)), (q(2), q(1))]).unwrap();
        assert_eq!(f.positive_integral(), qr(1, 2));
        assert_eq!(f.positive_part().integral(), qr(1, 2));
        let c = Pwl::steps(vec![q(0), q(1), q(3)], vec![q(2), q(-1)]).unwrap();
        let a = c.antiderivative().unwrap();
        assert_eq!(a.eval(&q(3)), q(0));
        assert_eq!(a.derivative().eval(&q(2)), q(-1));
    }

    #[test]
    fn hulls() {
        let pts = vec![(q(0), q(0)), (q(1), q(1)), (q(2), qr(1, 5)), (q(3), qr(6, 5)), (q(4), q(0))];
        let h = upper_hull(&pts);
        assert_eq!(h.len(), 4);
        let f = Pwl::from_vertices(&h).unwrap();
        assert_eq!(f.eval(&q(2)), qr(11, 10));
        let l = lower_hull(&[(q(0), q(0)), (q(1), q(-1)), (q(2), q(-2)), (q(3), q(0))]);
        assert_eq!(l, vec![(q(0), q(0)), (q(2), q(-2)), (q(3), q(0))]);
    }

    #[test]
    fn argmin_of_integral() {
        let g = Pwl::from_vertices(&[(q(0), q(-1)), (q(2), q(1))]).unwrap();
        assert_eq!(argmin_integral(&g), (q(1), qr(-1, 2)));
        let z = Pwl::steps(vec![q(0), q(1), q(2), q(3)], vec![q(-1), q(0), q(1)]).unwrap();
        assert_eq!(argmin_integral(&z), (q(2), q(-1)));
    }

    #[test]
    fn simplify_removes_collinear() {
        let f = Pwl::from_vertices(&[(q(0), q(0)), (q(1), q(1)), (q(2), q(2))]).unwrap();
        assert_eq!(f.simplify().pieces(), 1);
    }
}
