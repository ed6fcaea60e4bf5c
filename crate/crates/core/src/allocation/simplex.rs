//! Dense two-phase tableau simplex with Bland's anti-cycling rule.
//!
//! Solves `min cᵀx  s.t.  A_eq x = b_eq,  A_le x ≤ b_le,  x ≥ 0`. Problems
//! here have at most a few dozen rows, so a dense tableau is the simplest
//! thing that is fast enough.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 10_000;

/// Rows are stored densely; every row has `c.len()` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        x: DVector<f64>,
        objective: f64,
    },
    /// Farkas multipliers `y` over the equality rows followed by the `≤`
    /// rows: `yᵀA ≤ 0` on every variable and slack while `yᵀb > 0`.
    Infeasible {
        farkas: DVector<f64>,
    },
    Unbounded,
    /// Pivot budget exhausted; should not happen with Bland's rule.
    IterationLimit,
}

impl LinearProgram {
    pub fn new(c: DVector<f64>) -> Self {
        Self {
            c,
            eq: Vec::new(),
            le: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn push_eq(&mut self, row: &[f64], rhs: f64) {
        debug_assert_eq!(row.len(), self.n_vars());
        self.eq.push((row.to_vec(), rhs));
    }

    pub fn push_le(&mut self, row: &[f64], rhs: f64) {
        debug_assert_eq!(row.len(), self.n_vars());
        self.le.push((row.to_vec(), rhs));
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// `m + 1` rows; the last is the reduced-cost row, the last column the
    /// right-hand side (negated objective in the cost row).
    t: DMatrix<f64>,
    basis: Vec<usize>,
    /// structural variables, then slacks, then artificials
    n_struct: usize,
    n_slack: usize,
    m: usize,
    /// `+1`/`-1` applied to each row so the right-hand side is non-negative
    row_sign: Vec<f64>,
    /// standard-form matrix `[A_eq 0; A_le I]` with its right-hand side,
    /// kept for polishing the final basis
    a_std: DMatrix<f64>,
    b_std: DVector<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let (me, ml) = (lp.eq.len(), lp.le.len());
        let m = me + ml;
        let mut a_std = DMatrix::zeros(m, n + ml);
        let mut b_std = DVector::zeros(m);
        for (i, (row, rhs)) in lp.eq.iter().chain(&lp.le).enumerate() {
            for (j, v) in row.iter().enumerate() {
                a_std[(i, j)] = *v;
            }
            b_std[i] = *rhs;
            if i >= me {
                a_std[(i, n + i - me)] = 1.0;
            }
        }

        let n_std = n + ml;
        let cols = n_std + m + 1;
        let mut t = DMatrix::zeros(m + 1, cols);
        let mut row_sign = vec![1.0; m];
        for i in 0..m {
            let s = if b_std[i] < 0.0 { -1.0 } else { 1.0 };
            row_sign[i] = s;
            for j in 0..n_std {
                t[(i, j)] = s * a_std[(i, j)];
            }
            t[(i, n_std + i)] = 1.0;
            t[(i, cols - 1)] = s * b_std[i];
        }
        Self {
            t,
            basis: (n_std..n_std + m).collect(),
            n_struct: n,
            n_slack: ml,
            m,
            row_sign,
            a_std,
            b_std,
        }
    }

    fn n_std(&self) -> usize {
        self.n_struct + self.n_slack
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        let cols = self.t.ncols();
        for j in 0..cols {
            self.t[(r, j)] /= p;
        }
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for j in 0..cols {
                    let v = self.t[(r, j)];
                    self.t[(i, j)] -= f * v;
                }
                self.t[(i, c)] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule over columns `< limit`. Returns `Err(())` on an
    /// unbounded direction.
    fn iterate(&mut self, limit: usize) -> Result<bool, ()> {
        for _ in 0..MAX_PIVOTS {
            let obj = self.m;
            let Some(c) = (0..limit).find(|&j| self.t[(obj, j)] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let rhs = self.rhs_col();
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[(i, c)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    let better = match best {
                        None => true,
                        Some((bi, br)) => ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = best else {
                return Err(());
            };
            self.pivot(r, c);
        }
        Ok(false)
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let (obj, rhs) = (self.m, self.rhs_col());
        for j in 0..self.t.ncols() {
            self.t[(obj, j)] = if j < costs.len() { costs[j] } else { 0.0 };
        }
        for i in 0..self.m {
            let cb = costs.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for j in 0..=rhs {
                    let v = self.t[(i, j)];
                    self.t[(obj, j)] -= cb * v;
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let n_std = self.n_std();
        let n_all = n_std + self.m;
        let scale = 1.0 + self.b_std.amax();

        // phase 1: minimise the sum of artificials
        let mut phase1 = vec![0.0; n_all];
        phase1[n_std..].fill(1.0);
        self.set_costs(&phase1);
        match self.iterate(n_all) {
            Ok(true) => {}
            Ok(false) => return LpOutcome::IterationLimit,
            Err(()) => unreachable!("phase 1 is bounded below by zero"),
        }
        let infeasibility = -self.t[(self.m, self.rhs_col())];
        if infeasibility > 1e-9 * scale {
            // reduced cost of artificial i is 1 - y_i
            let farkas = DVector::from_fn(self.m, |i, _| (1.0 - self.t[(self.m, n_std + i)]) * self.row_sign[i]);
            return LpOutcome::Infeasible { farkas };
        }

        // drive zero-level artificials out of the basis
        for r in 0..self.m {
            if self.basis[r] >= n_std {
                if let Some(c) = (0..n_std).find(|&j| self.t[(r, j)].abs() > PIVOT_TOL) {
                    self.pivot(r, c);
                }
            }
        }

        // phase 2 over structural and slack columns only
        let mut costs = vec![0.0; n_std];
        costs[..self.n_struct].copy_from_slice(lp.c.as_slice());
        self.set_costs(&costs);
        match self.iterate(n_std) {
            Ok(true) => {}
            Ok(false) => return LpOutcome::IterationLimit,
            Err(()) => return LpOutcome::Unbounded,
        }

        let x_std = self.polished();
        let x = x_std.rows(0, self.n_struct).into_owned();
        let objective = lp.c.dot(&x);
        LpOutcome::Optimal { x, objective }
    }

    /// Re-solves the final basis against the original data, removing the
    /// round-off accumulated over the pivots.
    fn polished(&self) -> DVector<f64> {
        let n_std = self.n_std();
        let rhs = self.rhs_col();
        let mut x = DVector::zeros(n_std);
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n_std {
                x[b] = self.t[(i, rhs)].max(0.0);
            }
        }
        let cols: Vec<usize> = self.basis.iter().copied().filter(|&b| b < n_std).collect();
        if cols.len() == self.m {
            let basis = DMatrix::from_fn(self.m, self.m, |i, k| self.a_std[(i, cols[k])]);
            if let Some(xb) = basis.lu().solve(&self.b_std) {
                if xb.iter().all(|v| v.is_finite() && *v >= -1e-12) {
                    for (k, &c) in cols.iter().enumerate() {
                        x[c] = xb[k].max(0.0);
                    }
                }
            }
        }
        x
    }
}
