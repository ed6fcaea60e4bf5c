use nalgebra::{Matrix3, Vector3};

/// `V_z = ½(e_z² + s_z²)`.
pub fn altitude_lyapunov(e_z: f64, s_z: f64) -> f64 {
    0.5 * (e_z * e_z + s_z * s_z)
}

/// Mass-estimate term `(m̂ - m)² / (2 σ m)` added to `V_z` when adapting.
pub fn mass_lyapunov(estimate: f64, truth: f64, sigma: f64) -> f64 {
    let err = estimate - truth;
    err * err / (2.0 * sigma * truth)
}

/// Composite attitude function
/// `½eᵀe + ½zᵀz + ½tr(J̃ᵀJ⁻¹J̃Λ⁻¹) + (1/2σ) τ̃ᵀJ⁻¹τ̃` with `J̃ = J - Ĵ` and
/// `τ̃ = τ^s - τ̂^s`, evaluated against the true `J` and `τ^s`.
#[allow(clippy::too_many_arguments)]
pub fn attitude_lyapunov(
    e: &Vector3<f64>,
    z: &Vector3<f64>,
    inertia: &Matrix3<f64>,
    inertia_inv: &Matrix3<f64>,
    estimate: &Matrix3<f64>,
    lambda_inv: &Matrix3<f64>,
    static_torque: &Vector3<f64>,
    torque_estimate: &Vector3<f64>,
    sigma: f64,
) -> f64 {
    let jt = inertia - estimate;
    let tt = static_torque - torque_estimate;
    0.5 * e.norm_squared()
        + 0.5 * z.norm_squared()
        + 0.5 * (jt.transpose() * inertia_inv * jt * lambda_inv).trace()
        + 0.5 / sigma * (tt.transpose() * inertia_inv * tt)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_at_perfect_knowledge() {
        let j = Matrix3::from_diagonal(&Vector3::new(1e-3, 2e-3, 3e-3));
        let v = attitude_lyapunov(
            &Vector3::zeros(),
            &Vector3::zeros(),
            &j,
            &j.try_inverse().unwrap(),
            &j,
            &Matrix3::identity(),
            &Vector3::new(0.1, 0.0, 0.0),
            &Vector3::new(0.1, 0.0, 0.0),
            1.0,
        );
        assert_eq!(v, 0.0);
        assert_eq!(altitude_lyapunov(0.0, 0.0), 0.0);
        assert_eq!(mass_lyapunov(0.2, 0.2, 0.1), 0.0);
    }

    #[test]
    fn positive_elsewhere() {
        let j = Matrix3::from_diagonal(&Vector3::new(1e-3, 2e-3, 3e-3));
        let v = attitude_lyapunov(
            &Vector3::zeros(),
            &Vector3::zeros(),
            &j,
            &j.try_inverse().unwrap(),
            &(j * 0.5),
            &Matrix3::identity(),
            &Vector3::zeros(),
            &Vector3::zeros(),
            1.0,
        );
        assert!(v > 0.0);
        assert!((altitude_lyapunov(0.1, -0.2) - 0.025).abs() < 1e-15);
    }
}
