use nalgebra::{Rotation3, Vector3};

use super::{
    altitude_control, attitude_accel, attitude_adaptation_step, attitude_control, lateral_control,
    mass_adaptation_drive, mass_adaptation_step, weighted_xi, xi_terms, AdaptiveFloors, AdaptiveState, AltitudeCommand,
    AttitudeGains, ControlError, ErrorState, MassAdaptationLaw, PositionGains,
};
use crate::dynamics::FlightState;
use crate::flexibility::{BeamParams, FlexState};
use crate::structure::{wrap_angle, Structure, StructureGeometry};
use crate::GRAVITY;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub position: PositionGains,
    pub attitude: AttitudeGains,
    pub mass_law: MassAdaptationLaw,
    pub adapt_mass: bool,
    pub adapt_attitude: bool,
    /// Enables the bending-compensation terms (`Σγξ` and the `cos γ`
    /// projection of the summed thrust).
    pub flex_compensation: bool,
    /// Time constant of the first-order filter on the desired attitude, s.
    pub attitude_filter_tau: f64,
    pub desired_yaw: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            position: PositionGains::default(),
            attitude: AttitudeGains::default(),
            mass_law: MassAdaptationLaw::default(),
            adapt_mass: true,
            adapt_attitude: true,
            flex_compensation: true,
            attitude_filter_tau: 0.05,
            desired_yaw: 0.0,
        }
    }
}

/// Position reference held over a control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl Reference {
    pub fn hold(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
        }
    }
}

/// Output of one control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    /// `T^d`, N.
    pub total_thrust: f64,
    /// `τ^c = (τ_x, τ_y, τ_z)`, N·m.
    pub torque: Vector3<f64>,
    /// Filtered desired attitude `Γ^d` used this tick.
    pub desired_attitude: Vector3<f64>,
    /// `Ω^d`, the rate of the filtered desired attitude.
    pub desired_rates: Vector3<f64>,
    pub errors: ErrorState,
    pub altitude: AltitudeCommand,
    /// `Σ γ_i ξ_i`, zero with compensation off.
    pub xi_sum: Vector3<f64>,
    /// Adaptive estimates the command was computed with, the previous
    /// interval already integrated in.
    pub adaptive: AdaptiveState,
}

/// A control interval awaiting its closing measurement. The adaptation laws
/// are stepped with the errors measured at its end (backward Euler), against
/// the references the interval was commanded with.
#[derive(Debug, Clone)]
struct OpenInterval {
    dt: f64,
    /// References advanced to the end of the interval.
    reference: Reference,
    desired: Vector3<f64>,
    desired_rates: Vector3<f64>,
    drive: f64,
    accel: Vector3<f64>,
}

/// Deterministic control state machine: `(measurement, estimates)` in,
/// `(command, estimates)` out.
#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    geometry: StructureGeometry,
    beams: Vec<Option<BeamParams>>,
    floors: AdaptiveFloors,
    adaptive: AdaptiveState,
    filtered_attitude: Option<Vector3<f64>>,
    last_thrusts: Vec<f64>,
    open: Option<OpenInterval>,
}

impl Controller {
    /// Estimates start from the nominal structure: known mass, parallel-axis
    /// inertia, zero static torque.
    pub fn new(structure: &Structure, config: ControllerConfig) -> Result<Self, ControlError> {
        config.position.validate()?;
        config.attitude.validate()?;
        let nominal = &structure.nominal;
        let n = structure.n_agents();
        Ok(Self {
            floors: AdaptiveFloors::from_initial(structure.spec.hardware_mass(), &nominal.inertia),
            adaptive: AdaptiveState {
                mass: nominal.total_mass,
                inertia: nominal.inertia,
                static_torque: Vector3::zeros(),
            },
            geometry: structure.geometry.clone(),
            beams: BeamParams::for_structure(&structure.spec),
            filtered_attitude: None,
            last_thrusts: vec![nominal.total_mass * GRAVITY / n as f64; n],
            open: None,
            config,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn adaptive(&self) -> &AdaptiveState {
        &self.adaptive
    }

    pub fn floors(&self) -> &AdaptiveFloors {
        &self.floors
    }

    /// Overrides the estimates, e.g. to hand the controller the true mass.
    pub fn set_adaptive(&mut self, adaptive: AdaptiveState) {
        self.adaptive = adaptive;
    }

    pub fn n_agents(&self) -> usize {
        self.geometry.n_agents()
    }

    /// Bending the controller believes in, from the last allocated thrusts.
    pub fn estimated_flex(&self) -> FlexState {
        FlexState::from_thrusts(&self.beams, &self.last_thrusts, GRAVITY)
    }

    /// Feeds back the allocated thrusts; used by the next tick's `ΔT_i`
    /// and bending estimate.
    pub fn record_thrusts(&mut self, thrusts: &[f64]) -> Result<(), ControlError> {
        if thrusts.len() != self.last_thrusts.len() {
            return Err(ControlError::AgentCount {
                expected: self.last_thrusts.len(),
                found: thrusts.len(),
            });
        }
        self.last_thrusts.copy_from_slice(thrusts);
        Ok(())
    }

    /// Tracking errors with position errors resolved in the yaw-aligned frame.
    fn tracking_errors(
        &self,
        measured: &FlightState,
        reference: &Reference,
        desired: &Vector3<f64>,
        desired_rates: &Vector3<f64>,
    ) -> ErrorState {
        let cfg = &self.config;
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), -measured.attitude.z);
        let pos_err = yaw * (measured.position - reference.position);
        let vel_err = yaw * (measured.velocity - reference.velocity);
        ErrorState::position(&pos_err, &vel_err, &cfg.position).with_attitude(
            &measured.attitude,
            &measured.rates,
            desired,
            desired_rates,
            &cfg.attitude,
        )
    }

    /// Integrates the adaptation laws over the interval the previous tick
    /// opened, now that its end is measured.
    fn close_interval(&mut self, measured: &FlightState) {
        let Some(open) = self.open.take() else {
            return;
        };
        let end = self.tracking_errors(measured, &open.reference, &open.desired, &open.desired_rates);
        let cfg = &self.config;
        if cfg.adapt_mass {
            self.adaptive.mass = mass_adaptation_step(
                self.adaptive.mass,
                open.drive,
                open.dt * end.s_z,
                &cfg.position,
                self.floors.mass,
            );
        }
        if cfg.adapt_attitude {
            let z_integral = end.z_att * open.dt;
            let (inertia, static_torque) =
                attitude_adaptation_step(&self.adaptive, &open.accel, &z_integral, &cfg.attitude, &self.floors);
            self.adaptive.inertia = inertia;
            self.adaptive.static_torque = static_torque;
        }
    }

    /// One control tick of length `dt`.
    pub fn update(&mut self, measured: &FlightState, reference: &Reference, dt: f64) -> ControlCommand {
        self.close_interval(measured);
        let cfg = &self.config;
        let n = self.n_agents();
        let m_hat = self.adaptive.mass;
        let att = measured.attitude;
        let (phi, theta, psi) = (att.x, att.y, att.z);

        let flex = self.estimated_flex();
        let hover_share = m_hat * GRAVITY / n as f64;
        let delta_thrusts: Vec<f64> = self.last_thrusts.iter().map(|t| t - hover_share).collect();
        let deltas = Vector3::new(phi, theta, wrap_angle(psi - cfg.desired_yaw));
        let xi_sum = if cfg.flex_compensation {
            weighted_xi(&xi_terms(&self.geometry, &deltas, &delta_thrusts, m_hat), &flex)
        } else {
            Vector3::zeros()
        };

        let position_errors = self.tracking_errors(measured, reference, &Vector3::zeros(), &Vector3::zeros());
        let kappa = phi.cos() * theta.cos() * self.vertical_fraction(&flex);
        let altitude = altitude_control(&position_errors, xi_sum.z, &cfg.position, m_hat, kappa);
        let (theta_d, phi_d) = lateral_control(&position_errors, xi_sum.x, xi_sum.y, &cfg.position);
        let raw = Vector3::new(phi_d, theta_d, cfg.desired_yaw);

        let filtered = *self.filtered_attitude.get_or_insert(raw);
        let tau_f = cfg.attitude_filter_tau;
        let desired_rates = if tau_f > 0.0 {
            (raw - filtered).map(wrap_angle) / tau_f
        } else {
            Vector3::zeros()
        };
        let errors = self.tracking_errors(measured, reference, &filtered, &desired_rates);
        let torque = attitude_control(&errors, &measured.rates, &self.adaptive, &cfg.attitude);

        self.open = Some(OpenInterval {
            dt,
            reference: Reference {
                position: reference.position + reference.velocity * dt,
                velocity: reference.velocity,
            },
            desired: filtered + desired_rates * dt,
            desired_rates,
            drive: mass_adaptation_drive(&errors, xi_sum.z, &cfg.position, cfg.mass_law),
            accel: attitude_accel(&errors, &cfg.attitude),
        });
        self.filtered_attitude = Some(if tau_f > 0.0 {
            filtered + (raw - filtered) * (1.0 - (-dt / tau_f).exp())
        } else {
            raw
        });

        ControlCommand {
            total_thrust: altitude.total,
            torque,
            desired_attitude: filtered,
            desired_rates,
            errors,
            altitude,
            xi_sum,
            adaptive: self.adaptive.clone(),
        }
    }

    /// `Σ f_i cos γ_i` over the last thrust fractions `f_i`; `1` with
    /// compensation off.
    fn vertical_fraction(&self, flex: &FlexState) -> f64 {
        if !self.config.flex_compensation {
            return 1.0;
        }
        let total: f64 = self.last_thrusts.iter().sum();
        let n = self.last_thrusts.len() as f64;
        self.last_thrusts
            .iter()
            .zip(flex.gammas())
            .map(|(t, g)| {
                let f = if total > 0.0 { t / total } else { 1.0 / n };
                f * g.cos()
            })
            .sum()
    }
}
