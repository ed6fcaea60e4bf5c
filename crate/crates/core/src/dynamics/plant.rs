use nalgebra::{Matrix3, Matrix3xX, SVector, Vector3};

use super::{psi_matrix, rotation_zyx, xi_matrix, DynamicsError, FlightState, ThrustVector};
use crate::flexibility::{lag_towards, BeamParams, FlexState};
use crate::structure::{wrap_angle, MassProperties, Structure, StructureGeometry};
use crate::GRAVITY;

/// Everything the simulated vehicle is made of.
#[derive(Debug, Clone)]
pub struct PlantParams {
    /// True mass properties, payload included.
    pub mass: MassProperties,
    pub geometry: StructureGeometry,
    pub beams: Vec<Option<BeamParams>>,
    /// Time constant of the lag between commanded thrust and rod bending;
    /// zero applies the static deflection instantly.
    pub flex_tau: f64,
    inertia_inv: Matrix3<f64>,
}

impl PlantParams {
    pub fn new(
        mass: MassProperties,
        geometry: StructureGeometry,
        beams: Vec<Option<BeamParams>>,
        flex_tau: f64,
    ) -> Result<Self, DynamicsError> {
        let inertia_inv = mass.inertia.try_inverse().ok_or(DynamicsError::SingularInertia)?;
        Ok(Self {
            mass,
            geometry,
            beams,
            flex_tau: flex_tau.max(0.0),
            inertia_inv,
        })
    }

    pub fn from_structure(structure: &Structure, flex_tau: f64) -> Result<Self, DynamicsError> {
        Self::new(
            structure.truth.clone(),
            structure.geometry.clone(),
            BeamParams::for_structure(&structure.spec),
            flex_tau,
        )
    }

    /// Rigid plant: rods never bend.
    pub fn rigid(mut self) -> Self {
        self.beams = vec![None; self.beams.len()];
        self
    }

    pub fn n_agents(&self) -> usize {
        self.geometry.n_agents()
    }
}

/// Time derivative of `[position, velocity, attitude, rates]`.
pub type StateDerivative = SVector<f64, 12>;

/// Right-hand side with thrusts, moments and bending held over a step.
#[derive(Debug, Clone)]
pub struct DerivativeModel<'a> {
    params: &'a PlantParams,
    /// `Ψ T` in `C_s`.
    force: Vector3<f64>,
    /// `Ξ T + Ψ M`.
    torque: Vector3<f64>,
}

impl<'a> DerivativeModel<'a> {
    pub fn new(params: &'a PlantParams, flex: &FlexState, command: &ThrustVector) -> Self {
        let psi: Matrix3xX<f64> = psi_matrix(&params.geometry, flex);
        let xi = xi_matrix(&params.geometry, flex);
        Self {
            params,
            force: &psi * &command.thrusts,
            torque: xi * &command.thrusts + psi * &command.moments,
        }
    }

    pub fn eval(&self, x: &StateDerivative) -> StateDerivative {
        let attitude = Vector3::new(x[6], x[7], x[8]);
        let rates = Vector3::new(x[9], x[10], x[11]);
        let r = rotation_zyx(&attitude);
        let mass = &self.params.mass;
        let accel = Vector3::new(0.0, 0.0, -GRAVITY) + r * self.force / mass.total_mass;
        let torque = self.torque + mass.static_torque_at(&r) - rates.cross(&(mass.inertia * rates));
        let alpha = self.params.inertia_inv * torque;
        let mut dx = StateDerivative::zeros();
        dx.fixed_rows_mut::<3>(0).copy_from(&x.fixed_rows::<3>(3));
        dx.fixed_rows_mut::<3>(3).copy_from(&accel);
        dx.fixed_rows_mut::<3>(6).copy_from(&rates);
        dx.fixed_rows_mut::<3>(9).copy_from(&alpha);
        dx
    }
}

/// One classical fourth-order Runge–Kutta step.
pub fn rk4_step<const N: usize>(
    x: &SVector<f64, N>,
    dt: f64,
    f: impl Fn(&SVector<f64, N>) -> SVector<f64, N>,
) -> SVector<f64, N> {
    let k1 = f(x);
    let k2 = f(&(x + k1 * (dt / 2.0)));
    let k3 = f(&(x + k2 * (dt / 2.0)));
    let k4 = f(&(x + k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn pack(state: &FlightState) -> StateDerivative {
    let mut x = StateDerivative::zeros();
    x.fixed_rows_mut::<3>(0).copy_from(&state.position);
    x.fixed_rows_mut::<3>(3).copy_from(&state.velocity);
    x.fixed_rows_mut::<3>(6).copy_from(&state.attitude);
    x.fixed_rows_mut::<3>(9).copy_from(&state.rates);
    x
}

fn target_flex(params: &PlantParams, command: &ThrustVector) -> FlexState {
    FlexState::from_thrusts(&params.beams, command.thrusts.as_slice(), GRAVITY)
}

/// Bending after `dt`: the static deflection for the held command, lagged
/// when `flex_tau > 0`.
pub fn flex_after(params: &PlantParams, previous: &FlexState, command: &ThrustVector, dt: f64) -> FlexState {
    lag_towards(previous, &target_flex(params, command), dt, params.flex_tau)
}

/// Advances the plant by `dt` with the command held (zero-order hold).
///
/// Bending is updated first and held over the step, then the twelve rigid
/// states are integrated with RK4.
pub fn step(
    state: &FlightState,
    command: &ThrustVector,
    dt: f64,
    params: &PlantParams,
) -> Result<FlightState, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let n = params.n_agents();
    if command.thrusts.len() != n || command.moments.len() != n {
        return Err(DynamicsError::AgentCount {
            expected: n,
            found: command.thrusts.len(),
        });
    }
    let flex = flex_after(params, &state.flex, command, dt);
    let model = DerivativeModel::new(params, &flex, command);
    let x = rk4_step(&pack(state), dt, |x| model.eval(x));

    let next = FlightState {
        position: x.fixed_rows::<3>(0).into_owned(),
        velocity: x.fixed_rows::<3>(3).into_owned(),
        attitude: x.fixed_rows::<3>(6).map(wrap_angle),
        rates: x.fixed_rows::<3>(9).into_owned(),
        flex,
    };
    check_finite(&next)?;
    Ok(next)
}

fn check_finite(state: &FlightState) -> Result<(), DynamicsError> {
    let checks: [(&'static str, &Vector3<f64>); 4] = [
        ("position", &state.position),
        ("velocity", &state.velocity),
        ("attitude", &state.attitude),
        ("rates", &state.rates),
    ];
    for (name, v) in checks {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(DynamicsError::NonFiniteState(name));
        }
    }
    if !state
        .flex
        .agents
        .iter()
        .all(|f| f.gamma.is_finite() && f.delta_z.is_finite())
    {
        return Err(DynamicsError::NonFiniteState("flex"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = include_str!("../../scenarios/quad.lattice");

    fn quad() -> (Structure, PlantParams) {
        let s = Structure::parse(QUAD).unwrap();
        let p = PlantParams::from_structure(&s, 0.0).unwrap();
        (s, p)
    }

    #[test]
    fn free_fall() {
        let (_, p) = quad();
        let mut state = FlightState::at_rest(Vector3::zeros(), 4);
        let cmd = ThrustVector::zeros(4);
        for _ in 0..100 {
            state = step(&state, &cmd, 0.001, &p).unwrap();
        }
        assert!((state.position.z + 0.5 * GRAVITY * 0.01).abs() < 1e-9);
    }

    #[test]
    fn hover_is_held() {
        let (s, p) = quad();
        let p = p.rigid();
        let mut state = FlightState::at_rest(Vector3::new(0.0, 0.0, 1.0), 4);
        let cmd = ThrustVector::uniform(4, s.truth.total_mass * GRAVITY / 4.0);
        for _ in 0..10_000 {
            state = step(&state, &cmd, 0.001, &p).unwrap();
        }
        assert!((state.position - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-6);
        assert!(state.attitude.norm() < 1e-9);
    }

    #[test]
    fn filter_lags_bending() {
        let (s, p) = quad();
        let lagged = PlantParams::from_structure(&s, 0.05).unwrap();
        let state = FlightState::at_rest(Vector3::zeros(), 4);
        let cmd = ThrustVector::uniform(4, 0.5);
        let instant = step(&state, &cmd, 0.001, &p).unwrap();
        let slow = step(&state, &cmd, 0.001, &lagged).unwrap();
        assert!(instant.flex.agents[0].gamma > 0.0);
        assert!(slow.flex.agents[0].gamma < instant.flex.agents[0].gamma);
        assert!(slow.flex.agents[0].gamma > 0.0);
    }

    #[test]
    fn invalid_inputs() {
        let (_, p) = quad();
        let state = FlightState::at_rest(Vector3::zeros(), 4);
        assert!(matches!(
            step(&state, &ThrustVector::zeros(4), 0.0, &p),
            Err(DynamicsError::InvalidStep(_))
        ));
        assert!(matches!(
            step(&state, &ThrustVector::zeros(3), 0.001, &p),
            Err(DynamicsError::AgentCount { .. })
        ));
        let cmd = ThrustVector::uniform(4, f64::INFINITY);
        assert!(matches!(
            step(&state, &cmd, 0.001, &p),
            Err(DynamicsError::NonFiniteState(_))
        ));
    }
}
