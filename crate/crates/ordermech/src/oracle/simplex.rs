//! Dense two-phase simplex on a condensed tableau, generic over the scalar field.
//!
//! Rows are kept as `x_B(i) = b_i - sum_j a_ij x_N(j)`; only nonbasic columns are stored.

use crate::num::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    Bland,
    /// Largest reduced cost, falling back to Bland after a run of degenerate pivots.
    Dantzig,
}

#[derive(Clone, Debug)]
pub struct LinearProgram<F> {
    pub n_vars: usize,
    /// Maximized.
    pub objective: Vec<F>,
    pub rows: Vec<(Vec<F>, Cmp, F)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpResult<F> {
    pub status: LpStatus,
    pub x: Vec<F>,
    pub objective: F,
    /// One multiplier per row, sign convention of `max c x, A x <= b` (nonnegative on binding `Le` rows).
    pub duals: Vec<F>,
    pub pivots: usize,
}

impl<F: Field> LinearProgram<F> {
    pub fn new(n_vars: usize, objective: Vec<F>) -> Self {
        assert_eq!(objective.len(), n_vars);
        LinearProgram { n_vars, objective, rows: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<F>, cmp: Cmp, rhs: F) {
        assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push((coeffs, cmp, rhs));
    }

    pub fn solve(&self, rule: PivotRule) -> LpResult<F> {
        Tableau::build(self).run(rule, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Orig(usize),
    /// Slack, surplus or artificial attached to a row; `unit` marks the +1 column.
    Aux { row: usize, unit: bool },
}

struct Tableau<F> {
    m: usize,
    width: usize,
    /// m rows of `width` coefficients followed by the rhs.
    data: Vec<F>,
    obj: Vec<F>,
    obj_val: F,
    basic: Vec<Var>,
    nonbasic: Vec<Var>,
    /// Artificial columns may not re-enter once they leave.
    blocked: Vec<bool>,
    artificial_rows: Vec<bool>,
    pivots: usize,
}

impl<F: Field> Tableau<F> {
    fn build(lp: &LinearProgram<F>) -> Self {
        let m = lp.rows.len();
        let mut nonbasic: Vec<Var> = (0..lp.n_vars).map(Var::Orig).collect();
        let mut basic = Vec::with_capacity(m);
        let mut artificial_rows = vec![false; m];
        let mut flips = vec![false; m];
        let mut surplus_of = vec![None; m];
        for (i, (_, cmp, rhs)) in lp.rows.iter().enumerate() {
            let neg = *rhs < F::zero();
            let cmp = match (*cmp, neg) {
                (Cmp::Le, true) => Cmp::Ge,
                (Cmp::Ge, true) => Cmp::Le,
                (c, _) => c,
            };
            flips[i] = neg;
            match cmp {
                Cmp::Le => basic.push(Var::Aux { row: i, unit: true }),
                Cmp::Ge => {
                    surplus_of[i] = Some(nonbasic.len());
                    nonbasic.push(Var::Aux { row: i, unit: false });
                    basic.push(Var::Aux { row: i, unit: true });
                    artificial_rows[i] = true;
                }
                Cmp::Eq => {
                    basic.push(Var::Aux { row: i, unit: true });
                    artificial_rows[i] = true;
                }
            }
        }
        let width = nonbasic.len();
        let stride = width + 1;
        let mut data = vec![F::zero(); m * stride];
        for (i, (coeffs, _, rhs)) in lp.rows.iter().enumerate() {
            let row = &mut data[i * stride..(i + 1) * stride];
            for (j, c) in coeffs.iter().enumerate() {
                row[j] = if flips[i] { -c.clone() } else { c.clone() };
            }
            if let Some(s) = surplus_of[i] {
                row[s] = -F::one();
            }
            row[width] = if flips[i] { -rhs.clone() } else { rhs.clone() };
        }
        Tableau {
            m,
            width,
            data,
            obj: vec![F::zero(); width],
            obj_val: F::zero(),
            basic,
            nonbasic,
            blocked: vec![false; width],
            artificial_rows,
            pivots: 0,
        }
    }

    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, i: usize, j: usize) -> &F {
        &self.data[i * self.stride() + j]
    }

    fn rhs(&self, i: usize) -> &F {
        &self.data[i * self.stride() + self.width]
    }

    fn is_artificial(&self, v: Var) -> bool {
        matches!(v, Var::Aux { row, unit: true } if self.artificial_rows[row])
    }

    fn var_order(v: Var) -> usize {
        match v {
            Var::Orig(j) => j,
            Var::Aux { row, unit } => (1usize << 40) + 2 * row + usize::from(unit),
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.stride();
        let p = self.data[r * stride + c].clone();
        let inv = F::one() / p;
        {
            let row = &mut self.data[r * stride..(r + 1) * stride];
            for (j, x) in row.iter_mut().enumerate() {
                if j != c && !x.is_exact_zero() {
                    *x = x.clone() * inv.clone();
                }
            }
            row[c] = inv.clone();
        }
        let pivot_row: Vec<F> = self.data[r * stride..(r + 1) * stride].to_vec();
        let nz: Vec<usize> = (0..stride).filter(|&j| j != c && !pivot_row[j].is_exact_zero()).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * stride + c].clone();
            if f.is_exact_zero() {
                continue;
            }
            let row = &mut self.data[i * stride..(i + 1) * stride];
            for &j in &nz {
                row[j].sub_mul_assign(&f, &pivot_row[j]);
            }
            row[c] = -(f * inv.clone());
        }
        // objective: z = z0 + sum d_j x_j
        let d = self.obj[c].clone();
        if !d.is_exact_zero() {
            for &j in &nz {
                if j == self.width {
                    self.obj_val = self.obj_val.clone() + d.clone() * pivot_row[j].clone();
                } else {
                    self.obj[j].sub_mul_assign(&d, &pivot_row[j]);
                }
            }
            self.obj[c] = -(d * inv);
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[c]);
        if self.is_artificial(self.nonbasic[c]) {
            self.blocked[c] = true;
        }
        self.pivots += 1;
    }

    fn entering(&self, rule: PivotRule, bland: bool) -> Option<usize> {
        let candidates = (0..self.width).filter(|&j| !self.blocked[j] && self.obj[j].is_pos());
        if bland || rule == PivotRule::Bland {
            candidates.min_by_key(|&j| Self::var_order(self.nonbasic[j]))
        } else {
            let mut best: Option<usize> = None;
            for j in candidates {
                if best.map_or(true, |b| self.obj[j] > self.obj[b]) {
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, c: usize, bland: bool) -> Option<usize> {
        let rows = (0..self.m).filter(|&i| self.at(i, c).is_pos());
        let clamp = |x: &F| if *x < F::zero() { F::zero() } else { x.clone() };
        if bland {
            let mut best: Option<(usize, F)> = None;
            for i in rows {
                let ratio = clamp(self.rhs(i)) / self.at(i, c).clone();
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br
                            || (ratio == *br
                                && Self::var_order(self.basic[i]) < Self::var_order(self.basic[*bi]))
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            return best.map(|(i, _)| i);
        }
        // Harris two-pass: relax the bound by the tolerance, then take the largest pivot.
        let rows: Vec<usize> = rows.collect();
        let tol = F::harris_tol();
        let bound = rows
            .iter()
            .map(|&i| (clamp(self.rhs(i)) + tol.clone()) / self.at(i, c).clone())
            .fold(None, |acc: Option<F>, r| match acc {
                Some(a) if a <= r => Some(a),
                _ => Some(r),
            })?;
        let mut best: Option<usize> = None;
        for &i in &rows {
            let ratio = clamp(self.rhs(i)) / self.at(i, c).clone();
            if ratio <= bound && best.map_or(true, |b| self.at(i, c) > self.at(b, c)) {
                best = Some(i);
            }
        }
        best
    }

    /// Returns false when unbounded.
    fn optimize(&mut self, rule: PivotRule) -> bool {
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run > 50;
            let Some(c) = self.entering(rule, bland) else { return true };
            let Some(r) = self.leaving(c, bland || rule == PivotRule::Bland) else { return false };
            if self.rhs(r).is_zero_tol() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
    }

    fn run(mut self, rule: PivotRule, lp: &LinearProgram<F>) -> LpResult<F> {
        let stride = self.stride();
        let n = lp.n_vars;
        let fail = |status, pivots| LpResult {
            status,
            x: vec![F::zero(); n],
            objective: F::zero(),
            duals: vec![F::zero(); lp.rows.len()],
            pivots,
        };
        if self.artificial_rows.iter().any(|&a| a) {
            // phase one: maximize minus the sum of artificials
            for i in 0..self.m {
                if self.artificial_rows[i] {
                    for j in 0..=self.width {
                        let v = self.data[i * stride + j].clone();
                        if j == self.width {
                            self.obj_val = self.obj_val.clone() - v;
                        } else {
                            self.obj[j] = self.obj[j].clone() + v;
                        }
                    }
                }
            }
            self.optimize(rule);
            if self.obj_val.is_neg() {
                return fail(LpStatus::Infeasible, self.pivots);
            }
            // drive zero-level artificials out of the basis where possible
            for r in 0..self.m {
                if self.is_artificial(self.basic[r]) {
                    let c = (0..self.width)
                        .find(|&j| !self.blocked[j] && !self.at(r, j).is_zero_tol());
                    if let Some(c) = c {
                        self.pivot(r, c);
                    }
                }
            }
            // rows still holding an artificial are redundant; pin it at zero
            self.obj = vec![F::zero(); self.width];
            self.obj_val = F::zero();
        }
        for (j, cj) in lp.objective.iter().enumerate() {
            if cj.is_exact_zero() {
                continue;
            }
            match self.nonbasic.iter().position(|&v| v == Var::Orig(j)) {
                Some(c) => self.obj[c] = self.obj[c].clone() + cj.clone(),
                None => {
                    let r = self.basic.iter().position(|&v| v == Var::Orig(j)).unwrap();
                    self.obj_val = self.obj_val.clone() + cj.clone() * self.rhs(r).clone();
                    for c in 0..self.width {
                        let a = self.at(r, c).clone();
                        self.obj[c].sub_mul_assign(cj, &a);
                    }
                }
            }
        }
        for r in 0..self.m {
            if self.is_artificial(self.basic[r]) {
                // keep this row's artificial at zero by forbidding columns that would move it
                for c in 0..self.width {
                    if !self.at(r, c).is_zero_tol() {
                        self.blocked[c] = true;
                    }
                }
            }
        }
        if !self.optimize(rule) {
            return fail(LpStatus::Unbounded, self.pivots);
        }
        let mut x = vec![F::zero(); n];
        for (r, v) in self.basic.iter().enumerate() {
            if let Var::Orig(j) = v {
                x[*j] = self.rhs(r).clone();
            }
        }
        let mut duals = vec![F::zero(); lp.rows.len()];
        for (c, v) in self.nonbasic.iter().enumerate() {
            if let Var::Aux { row, unit: true } = *v {
                let rhs_neg = lp.rows[row].2 < F::zero();
                let y = -self.obj[c].clone();
                duals[row] = if rhs_neg { -y } else { y };
            }
        }
        LpResult { status: LpStatus::Optimal, x, objective: self.obj_val.clone(), duals, pivots: self.pivots }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qr, Q};

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(2, vec![q(3), q(5)]);
        lp.push(vec![q(1), q(0)], Cmp::Le, q(4));
        lp.push(vec![q(0), q(2)], Cmp::Le, q(12));
        lp.push(vec![q(3), q(2)], Cmp::Le, q(18));
        let res = lp.solve(PivotRule::Bland);
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.objective, q(36));
        assert_eq!(res.x, vec![q(2), q(6)]);
        assert_eq!(res.duals, vec![q(0), qr(3, 2), q(1)]);
    }

    #[test]
    fn phase_one_with_equalities() {
        // max x + y, x + y = 2, x >= 1/2, y - x <= -1/2 -> 2
        let mut lp = LinearProgram::new(2, vec![q(1), q(1)]);
        lp.push(vec![q(1), q(1)], Cmp::Eq, q(2));
        lp.push(vec![q(1), q(0)], Cmp::Ge, qr(1, 2));
        lp.push(vec![q(-1), q(1)], Cmp::Le, qr(-1, 2));
        let res = lp.solve(PivotRule::Bland);
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.objective, q(2));
        assert!(res.x[0] >= qr(5, 4));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1, vec![q(1)]);
        lp.push(vec![q(1)], Cmp::Le, q(1));
        lp.push(vec![q(1)], Cmp::Ge, q(2));
        assert_eq!(lp.solve(PivotRule::Bland).status, LpStatus::Infeasible);
        let mut lp = LinearProgram::new(2, vec![q(1), q(0)]);
        lp.push(vec![q(-1), q(1)], Cmp::Le, q(1));
        assert_eq!(lp.solve(PivotRule::Bland).status, LpStatus::Unbounded);
    }

    #[test]
    fn float_agrees_with_rational() {
        let mut lpq = LinearProgram::new(3, vec![q(2), q(3), q(1)]);
        lpq.push(vec![q(1), q(1), q(1)], Cmp::Le, q(4));
        lpq.push(vec![q(1), q(3), q(0)], Cmp::Le, q(6));
        lpq.push(vec![q(2), q(0), q(1)], Cmp::Le, q(5));
        let exact: Q = lpq.solve(PivotRule::Bland).objective;
        let lpf = LinearProgram {
            n_vars: 3,
            objective: lpq.objective.iter().map(crate::num::to_f64).collect(),
            rows: lpq
                .rows
                .iter()
                .map(|(c, k, b)| (c.iter().map(crate::num::to_f64).collect(), *k, crate::num::to_f64(b)))
                .collect(),
        };
        let approx = lpf.solve(PivotRule::Dantzig).objective;
        assert!((approx - crate::num::to_f64(&exact)).abs() < 1e-12);
    }
}
