//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver or plant code it is used to check.

#![allow(dead_code)]

use lattice_flight::allocation::{AllocationProblem, Metric, MetricParams};
use nalgebra::{DVector, Matrix3, Matrix3xX, Rotation3, Vector3};
use rand::Rng;

pub const G: f64 = 9.81;

/// A random lattice-like agent layout: `n` agents at radii 5–30 cm, angles
/// jittered around an even spread so the matrix has full rank.
pub fn random_gamma<R: Rng>(rng: &mut R, n: usize) -> Matrix3xX<f64> {
    let cols: Vec<Vector3<f64>> = (0..n)
        .map(|i| {
            let base = std::f64::consts::TAU * i as f64 / n as f64;
            let a = base + rng.random_range(-0.4..0.4);
            let r = rng.random_range(0.05..0.3);
            let (x, y) = (r * a.cos(), r * a.sin());
            Vector3::new(y, -x, 1.0)
        })
        .collect();
    Matrix3xX::from_columns(&cols)
}

/// A feasible problem: the right-hand side is generated from thrusts
/// strictly inside the box.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, metric: Metric) -> AllocationProblem {
    let t_max = 0.6;
    let gamma = random_gamma(rng, n);
    let t = DVector::from_fn(n, |_, _| rng.random_range(0.05..0.95 * t_max));
    let rhs = &gamma * &t;
    let batteries = (0..n).map(|_| rng.random_range(3.3..4.2)).collect();
    AllocationProblem {
        gamma,
        rhs: Vector3::new(rhs[0], rhs[1], rhs[2]),
        t_max,
        metric,
        params: MetricParams {
            batteries,
            delta_volt: 2.9,
            ..MetricParams::default()
        },
    }
}

pub fn inf_residual(gamma: &Matrix3xX<f64>, t: &DVector<f64>, rhs: &Vector3<f64>) -> f64 {
    (gamma * t - rhs).amax()
}

/// `Γᵀ(ΓΓᵀ)⁻¹ rhs` by Cramer's rule on the 3×3 Gram matrix.
pub fn min_norm(gamma: &Matrix3xX<f64>, rhs: &Vector3<f64>) -> DVector<f64> {
    let gram: Matrix3<f64> = gamma * gamma.transpose();
    let det = gram.determinant();
    let mut y = Vector3::zeros();
    for k in 0..3 {
        let mut m = gram;
        m.set_column(k, rhs);
        y[k] = m.determinant() / det;
    }
    gamma.transpose() * y
}

/// Unit null vector of a 3×4 matrix from signed 3×3 minors.
pub fn null_vector(gamma: &Matrix3xX<f64>) -> DVector<f64> {
    assert_eq!(gamma.ncols(), 4);
    let mut v = DVector::zeros(4);
    for j in 0..4 {
        let cols: Vec<usize> = (0..4).filter(|c| *c != j).collect();
        let m = Matrix3::from_columns(&[gamma.column(cols[0]), gamma.column(cols[1]), gamma.column(cols[2])]);
        v[j] = if j % 2 == 0 { 1.0 } else { -1.0 } * m.determinant();
    }
    let norm = v.norm();
    v / norm
}

/// Minimum of a convex function of the thrusts over the feasible segment
/// `T(s) = T_p + s v` of an n = 4 problem: a 4001-point lattice search,
/// then ternary refinement around the best cell.
pub fn brute_force_n4(problem: &AllocationProblem, objective: impl Fn(&DVector<f64>) -> f64) -> Option<f64> {
    let tp = min_norm(&problem.gamma, &problem.rhs);
    let v = null_vector(&problem.gamma);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..4 {
        if v[i].abs() < 1e-14 {
            if tp[i] < -1e-12 || tp[i] > problem.t_max + 1e-12 {
                return None;
            }
            continue;
        }
        let a = (0.0 - tp[i]) / v[i];
        let b = (problem.t_max - tp[i]) / v[i];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if lo > hi {
        return None;
    }
    let at = |s: f64| objective(&(&tp + &v * s));
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let mut best = (0, at(lo));
    for k in 1..=steps {
        let f = at(lo + h * k as f64);
        if f < best.1 {
            best = (k, f);
        }
    }
    let mut a = lo + h * (best.0 as f64 - 1.0).max(0.0);
    let mut b = (lo + h * (best.0 as f64 + 1.0)).min(hi);
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if at(m1) <= at(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    Some(at(0.5 * (a + b)).min(best.1))
}

/// `1 / (1 - e^{δ - B})`.
pub fn battery_weight(b: f64, delta: f64) -> f64 {
    1.0 / (1.0 - (delta - b).exp())
}

/// Rigid multi-rotor with every thrust along body z, written out
/// independently of the library plant. State `[p, v, (φ, θ, ψ), Euler rates]`.
#[derive(Debug, Clone)]
pub struct RigidOracle {
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub first_moment: Vector3<f64>,
    /// Agent positions in the body frame.
    pub arms: Vec<Vector3<f64>>,
}

impl RigidOracle {
    fn deriv(&self, x: &[f64; 12], thrusts: &[f64], moments: &[f64]) -> [f64; 12] {
        let rot = Rotation3::from_euler_angles(x[6], x[7], x[8]);
        let w = Vector3::new(x[9], x[10], x[11]);
        let total: f64 = thrusts.iter().sum();
        let acc = rot * Vector3::new(0.0, 0.0, total) / self.mass - Vector3::new(0.0, 0.0, G);
        let mut torque = Vector3::zeros();
        for ((r, t), m) in self.arms.iter().zip(thrusts).zip(moments) {
            torque += r.cross(&Vector3::new(0.0, 0.0, *t)) + Vector3::new(0.0, 0.0, *m);
        }
        torque += self.first_moment.cross(&(rot.inverse() * Vector3::new(0.0, 0.0, -G)));
        torque -= w.cross(&(self.inertia * w));
        let alpha = self.inertia.lu().solve(&torque).expect("invertible");
        [
            x[3], x[4], x[5], acc.x, acc.y, acc.z, x[9], x[10], x[11], alpha.x, alpha.y, alpha.z,
        ]
    }

    pub fn step(&self, x: &[f64; 12], thrusts: &[f64], moments: &[f64], dt: f64) -> [f64; 12] {
        let add = |a: &[f64; 12], k: &[f64; 12], s: f64| {
            let mut out = *a;
            for i in 0..12 {
                out[i] += s * k[i];
            }
            out
        };
        let k1 = self.deriv(x, thrusts, moments);
        let k2 = self.deriv(&add(x, &k1, dt / 2.0), thrusts, moments);
        let k3 = self.deriv(&add(x, &k2, dt / 2.0), thrusts, moments);
        let k4 = self.deriv(&add(x, &k3, dt), thrusts, moments);
        let mut out = *x;
        for i in 0..12 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}
