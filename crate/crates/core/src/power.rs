//! Shape-matched battery voltage model.
//!
//! Charge drawn `q ∈ [0, 1]` grows as `q̇ = k_idle + k_load T²`. The
//! voltage is a resting curve (linear plateau plus a logistic knee) minus a
//! fast exponential drop once the pack starts delivering current:
//!
//! ```text
//! V = B_full - s q - K σ((q - q_k)/w) - d (1 - e^{-(q - q_0)/q_d}) + offset
//! ```

use crate::GRAVITY;

/// Mass of one reference copter, kg.
pub const REFERENCE_COPTER_MASS: f64 = 0.033;
/// Largest payload one reference copter lifts, kg.
pub const REFERENCE_MAX_PAYLOAD: f64 = 0.013125;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PowerError {
    #[error("time step must be positive, found {0}")]
    InvalidStep(f64),
    #[error("calibration failed: {0}")]
    Calibration(String),
}

/// Cutoff voltages observed for different payloads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaPreset {
    Unloaded,
    /// 80 % of the maximum payload.
    Payload80,
    /// 90 % of the maximum payload; the most conservative, used by `f_B`.
    Payload90,
}

impl DeltaPreset {
    pub fn volts(self) -> f64 {
        match self {
            DeltaPreset::Unloaded => 2.6,
            DeltaPreset::Payload80 => 2.75,
            DeltaPreset::Payload90 => 2.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryParams {
    /// Non-operating voltage of a full pack, V.
    pub b_full: f64,
    pub delta_volt: f64,
    /// Idle drain, 1/s.
    pub k_idle: f64,
    /// Load drain, 1/(s·N²).
    pub k_load: f64,
    /// Initial drop depth `d`, V, and its charge scale `q_d`.
    pub drop: f64,
    pub drop_scale: f64,
    /// Plateau slope `s`, V per unit charge.
    pub slope: f64,
    /// Knee depth `K`, centre `q_k` and width `w`.
    pub knee_depth: f64,
    pub knee_center: f64,
    pub knee_width: f64,
    /// Hard lower limit, V.
    pub floor: f64,
}

impl Default for BatteryParams {
    /// Curve fitted to a 430 s unloaded hover and a 270 s hover carrying 80 %
    /// of the maximum payload.
    fn default() -> Self {
        let unloaded = REFERENCE_COPTER_MASS * GRAVITY;
        let loaded = (REFERENCE_COPTER_MASS + 0.8 * REFERENCE_MAX_PAYLOAD) * GRAVITY;
        Self::shape()
            .calibrated(
                (unloaded, 430.0, DeltaPreset::Unloaded.volts()),
                (loaded, 270.0, DeltaPreset::Payload80.volts()),
            )
            .expect("reference calibration is well posed")
    }
}

impl BatteryParams {
    /// The curve shape with unit drain rates; see [`BatteryParams::calibrated`].
    pub fn shape() -> Self {
        Self {
            b_full: 4.0,
            delta_volt: DeltaPreset::Payload90.volts(),
            k_idle: 0.0,
            k_load: 1.0,
            drop: 0.25,
            drop_scale: 0.01,
            slope: 0.45,
            knee_depth: 1.2,
            knee_center: 0.95,
            knee_width: 0.015,
            floor: 2.5,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta_volt = delta;
        self
    }

    /// Resting voltage after drawing `q`, before the floor.
    fn resting(&self, q: f64) -> f64 {
        let knee = self.knee_depth / (1.0 + (-(q - self.knee_center) / self.knee_width).exp());
        self.b_full - self.slope * q - knee
    }

    fn load_drop(&self, drawn: f64) -> f64 {
        self.drop * (1.0 - (-drawn.max(0.0) / self.drop_scale).exp())
    }

    /// Voltage of a pack that started full after drawing `q`.
    pub fn voltage_at(&self, q: f64) -> f64 {
        (self.resting(q) - self.load_drop(q)).max(self.floor)
    }

    /// Charge drawn by a fresh pack when its voltage reaches `delta`
    /// (bisection; the curve is strictly decreasing).
    pub fn charge_at_cutoff(&self, delta: f64) -> Option<f64> {
        if self.voltage_at(0.0) <= delta || self.voltage_at(2.0) > delta {
            return None;
        }
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.voltage_at(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Drain rate at thrust `t`.
    pub fn drain(&self, thrust: f64) -> f64 {
        self.k_idle + self.k_load * thrust * thrust
    }

    /// Solves for `(k_idle, k_load)` so that constant-thrust hovers
    /// `(thrust, endurance, cutoff)` last exactly as long as given.
    pub fn calibrated(self, a: (f64, f64, f64), b: (f64, f64, f64)) -> Result<Self, PowerError> {
        let qa = self
            .charge_at_cutoff(a.2)
            .ok_or_else(|| PowerError::Calibration(format!("cutoff {} V never reached", a.2)))?;
        let qb = self
            .charge_at_cutoff(b.2)
            .ok_or_else(|| PowerError::Calibration(format!("cutoff {} V never reached", b.2)))?;
        // qa/ta = k_i + k_l Ta², qb/tb = k_i + k_l Tb²
        let (ra, rb) = (qa / a.1, qb / b.1);
        let (sa, sb) = (a.0 * a.0, b.0 * b.0);
        if (sa - sb).abs() < 1e-12 {
            return Err(PowerError::Calibration("reference thrusts must differ".into()));
        }
        let k_load = (ra - rb) / (sa - sb);
        let k_idle = ra - k_load * sa;
        if k_load <= 0.0 || k_idle < 0.0 {
            return Err(PowerError::Calibration(format!(
                "endurances imply k_idle = {k_idle}, k_load = {k_load}"
            )));
        }
        Ok(Self { k_idle, k_load, ..self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub voltage: f64,
    /// Normalised charge drawn, `[0, 1]` over the useful range.
    pub capacity_used: f64,
    /// Charge already drawn when the pack was installed.
    pub capacity_start: f64,
    /// Reading above a full pack's non-operating voltage.
    pub offset: f64,
}

/// Emitted by [`battery_step`] on the step the voltage crosses `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Depleted {
    pub voltage: f64,
}

impl BatteryState {
    pub fn full(params: &BatteryParams) -> Self {
        Self {
            voltage: params.b_full,
            capacity_used: 0.0,
            capacity_start: 0.0,
            offset: 0.0,
        }
    }

    /// A pack whose resting reading is `voltage`: the charge already drawn is
    /// read off the resting curve; readings above `b_full` keep the excess
    /// as a constant offset.
    pub fn from_voltage(voltage: f64, params: &BatteryParams) -> Self {
        if voltage >= params.b_full {
            return Self {
                voltage,
                offset: voltage - params.b_full,
                ..Self::full(params)
            };
        }
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if params.resting(mid) > voltage {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        Self {
            voltage: voltage.max(params.floor),
            capacity_used: q,
            capacity_start: q,
            offset: 0.0,
        }
    }

    fn voltage_for(&self, q: f64, params: &BatteryParams) -> f64 {
        (params.resting(q) - params.load_drop(q - self.capacity_start) + self.offset).max(params.floor)
    }
}

/// Advances one pack by `dt` at constant thrust. Negative thrust drains as
/// its magnitude.
pub fn battery_step(
    state: &BatteryState,
    thrust: f64,
    dt: f64,
    params: &BatteryParams,
) -> Result<(BatteryState, Option<Depleted>), PowerError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PowerError::InvalidStep(dt));
    }
    let q = state.capacity_used + params.drain(thrust) * dt;
    let voltage = state.voltage_for(q, params).min(state.voltage);
    let next = BatteryState {
        voltage,
        capacity_used: q,
        ..*state
    };
    let event = (state.voltage > params.delta_volt && voltage <= params.delta_volt).then_some(Depleted { voltage });
    Ok((next, event))
}

/// Time for a fresh pack at constant `thrust` to reach `delta`.
pub fn endurance(params: &BatteryParams, thrust: f64, delta: f64, dt: f64) -> Result<f64, PowerError> {
    let p = params.with_delta(delta);
    let mut s = BatteryState::full(&p);
    let mut t = 0.0;
    while t < 1e5 {
        let (next, event) = battery_step(&s, thrust, dt, &p)?;
        t += dt;
        if event.is_some() {
            return Ok(t);
        }
        s = next;
    }
    Err(PowerError::Calibration(format!("no depletion at {thrust} N")))
}
