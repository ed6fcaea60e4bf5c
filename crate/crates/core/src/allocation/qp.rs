//! Primal active-set method for strictly convex quadratic programs with
//! equality constraints and box bounds:
//! `min ½xᵀHx + fᵀx  s.t.  A x = b,  l ≤ x ≤ u`.

use nalgebra::{DMatrix, DVector};

const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQp {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Equality multipliers.
    pub lambda: DVector<f64>,
    /// `g - Aᵀλ` per variable: non-negative on lower and non-positive on
    /// upper active bounds, zero on free variables at the optimum.
    pub bound_multipliers: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

impl BoxQp {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.h * x)[0] + self.f.dot(x)
    }

    /// Starts from `x0`, which must satisfy every constraint.
    pub fn solve(&self, x0: &DVector<f64>) -> QpSolution {
        let n = x0.len();
        let mut x = x0.clone();
        let tol = 1e-12 * (1.0 + self.upper.amax().min(1e12));
        let mut state: Vec<Bound> = (0..n)
            .map(|i| {
                if (x[i] - self.lower[i]).abs() <= tol {
                    Bound::Lower
                } else if (self.upper[i] - x[i]).abs() <= tol {
                    Bound::Upper
                } else {
                    Bound::Free
                }
            })
            .collect();

        let mut iterations = 0;
        let mut lambda = DVector::zeros(self.a.nrows());
        while iterations < MAX_ITER {
            iterations += 1;
            for (i, s) in state.iter().enumerate() {
                match s {
                    Bound::Lower => x[i] = self.lower[i],
                    Bound::Upper => x[i] = self.upper[i],
                    Bound::Free => {}
                }
            }
            let g = &self.h * &x + &self.f;
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
            let (p, lam) = self.equality_step(&g, &free);
            lambda = lam;

            if p.amax() <= STEP_TOL * (1.0 + x.amax()) {
                let r = &g - self.a.transpose() * &lambda;
                // most violated multiplier among active bounds
                let worst = (0..n)
                    .filter_map(|i| match state[i] {
                        Bound::Lower if r[i] < -1e-12 => Some((i, -r[i])),
                        Bound::Upper if r[i] > 1e-12 => Some((i, r[i])),
                        _ => None,
                    })
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match worst {
                    Some((i, _)) => state[i] = Bound::Free,
                    None => break,
                }
                continue;
            }

            let mut alpha = 1.0;
            let mut blocking = None;
            for &i in &free {
                let step = if p[i] < 0.0 {
                    (self.lower[i] - x[i]) / p[i]
                } else if p[i] > 0.0 {
                    (self.upper[i] - x[i]) / p[i]
                } else {
                    continue;
                };
                if step < alpha {
                    alpha = step.max(0.0);
                    blocking = Some((i, if p[i] < 0.0 { Bound::Lower } else { Bound::Upper }));
                }
            }
            x += &p * alpha;
            if let Some((i, b)) = blocking {
                state[i] = b;
            }
        }

        let g = &self.h * &x + &self.f;
        let bound_multipliers = &g - self.a.transpose() * &lambda;
        let kkt_residual = self.kkt_residual(&x, &bound_multipliers, &state);
        QpSolution {
            x,
            lambda,
            bound_multipliers,
            iterations,
            kkt_residual,
        }
    }

    /// Step `p` minimising the model over the free variables while keeping
    /// `A p = 0`, with the equality multipliers.
    fn equality_step(&self, g: &DVector<f64>, free: &[usize]) -> (DVector<f64>, DVector<f64>) {
        let n = g.len();
        let m = self.a.nrows();
        let k = free.len();
        if k + m == 0 {
            return (DVector::zeros(n), DVector::zeros(0));
        }
        let mut kkt = DMatrix::zeros(k + m, k + m);
        let mut rhs = DVector::zeros(k + m);
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                kkt[(a, b)] = self.h[(i, j)];
            }
            for r in 0..m {
                kkt[(a, k + r)] = -self.a[(r, i)];
                kkt[(k + r, a)] = self.a[(r, i)];
            }
            rhs[a] = -g[i];
        }
        // rank-deficient constraint blocks (few free variables) have a
        // family of multipliers; the SVD picks the minimum-norm one
        let sol = kkt
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| {
                kkt.svd(true, true)
                    .solve(&rhs, 1e-12)
                    .unwrap_or_else(|_| DVector::zeros(k + m))
            });
        let mut p = DVector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            p[i] = sol[a];
        }
        let lambda = sol.rows(k, m).into_owned();
        if k == 0 && m > 0 {
            // every variable pinned: least-squares multipliers
            let at = self.a.transpose();
            let lam = at
                .clone()
                .svd(true, true)
                .solve(g, 1e-12)
                .unwrap_or_else(|_| DVector::zeros(m));
            return (p, lam);
        }
        (p, lambda)
    }

    fn kkt_residual(&self, x: &DVector<f64>, r: &DVector<f64>, state: &[Bound]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..x.len() {
            let v = match state[i] {
                Bound::Free => r[i].abs(),
                Bound::Lower => (-r[i]).max(0.0),
                Bound::Upper => r[i].max(0.0),
            };
            worst = worst.max(v);
            worst = worst.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        if self.a.nrows() > 0 {
            worst = worst.max((&self.a * x - &self.b).amax());
        }
        worst
    }
}
