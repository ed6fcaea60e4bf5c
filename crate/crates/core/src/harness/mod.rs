//! Scenario runner: waypoint missions, measurement noise, telemetry and
//! metric comparisons.
//!
//! Timing: the plant integrates at 1 ms, the controller and allocator run
//! every 5 ms and the waypoint reference is refreshed every 20 ms.

mod inspect;
mod scenario;
mod suite;
mod telemetry;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Matrix3xX, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use inspect::inspect;
pub use scenario::{AllocationConfig, BatteryConfig, Hold, NoiseConfig, PlantConfig, Scenario, Waypoint};
pub use suite::{bundled, bundled_lattice, scenario_suite, SUITE};
pub use telemetry::{header, write_csv, TelemetryRecord, SCHEMA};

use crate::allocation::{self, build_gamma, AllocationError, AllocationProblem, Metric, SolverStatus};
use crate::config::ConfigError;
use crate::control::{
    altitude_lyapunov, attitude_lyapunov, mass_lyapunov, AdaptiveState, ControlError, Controller, ErrorState, Reference,
};
use crate::dynamics::{self, DynamicsError, FlightState, PlantParams, ThrustVector};
use crate::flexibility::FlexState;
use crate::power::{battery_step, BatteryState, PowerError};
use crate::structure::StructureError;
use crate::GRAVITY;

pub const PLANT_DT: f64 = 0.001;
pub const CONTROL_DT: f64 = 0.005;
pub const WAYPOINT_DT: f64 = 0.020;
const PLANT_STEPS: usize = 5;
const WAYPOINT_TICKS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
    #[error("simulation diverged at tick {tick}: {source}")]
    Diverged { tick: usize, source: DynamicsError },
}

impl HarnessError {
    /// Process exit code: 2 for divergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Diverged { .. } => 2,
            _ => 1,
        }
    }
}

/// Tolerances a waypoint counts as reached within.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleBand {
    pub altitude: f64,
    pub planar: f64,
}

impl Default for SettleBand {
    fn default() -> Self {
        Self {
            altitude: 0.02,
            planar: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub metric: Metric,
    pub ticks: usize,
    pub max_abs_e_z: f64,
    /// Per [`Scenario::holds`] entry, the time after the hold starts from
    /// which the vehicle stays in the [`SettleBand`]; `None` if it never does.
    pub settling_times: Vec<Option<f64>>,
    pub mean_thrust: Vec<f64>,
    pub max_thrust: Vec<f64>,
    pub min_battery: f64,
    pub degraded_ticks: usize,
    /// Ticks with a clamped or degraded allocation or a thrust on its bound.
    pub saturated_ticks: usize,
    pub rms_position_error: f64,
    pub rms_altitude_error: f64,
    /// Largest one-tick growth of `V_z` (plus the mass term when adapting).
    pub max_v_z_increase: f64,
    pub max_v_att_increase: f64,
    /// `(agent, time)` of every battery crossing its cutoff.
    pub depleted: Vec<(usize, f64)>,
    pub final_adaptive: AdaptiveState,
}

impl RunSummary {
    pub fn degraded_fraction(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.degraded_ticks as f64 / self.ticks as f64
        }
    }

    pub fn max_agent_thrust(&self) -> f64 {
        self.max_thrust.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_agent_thrust(&self) -> f64 {
        self.mean_thrust.iter().sum::<f64>() / self.mean_thrust.len().max(1) as f64
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario        {}", self.scenario);
        let _ = writeln!(s, "metric          {}", self.metric);
        let _ = writeln!(s, "ticks           {}", self.ticks);
        let _ = writeln!(s, "max |e_z|       {:.5} m", self.max_abs_e_z);
        let _ = writeln!(s, "rms position    {:.5} m", self.rms_position_error);
        for (i, t) in self.settling_times.iter().enumerate() {
            match t {
                Some(t) => _ = writeln!(s, "hold {i:<10} settled after {t:.2} s"),
                None => _ = writeln!(s, "hold {i:<10} not settled"),
            }
        }
        for i in 0..self.mean_thrust.len() {
            let _ = writeln!(
                s,
                "agent {i:<9} mean {:.4} N  max {:.4} N",
                self.mean_thrust[i], self.max_thrust[i]
            );
        }
        let _ = writeln!(s, "min battery     {:.3} V", self.min_battery);
        let _ = writeln!(s, "degraded        {:.2} %", 100.0 * self.degraded_fraction());
        let _ = writeln!(s, "saturated ticks {}", self.saturated_ticks);
        let _ = writeln!(s, "max ΔV_z        {:.3e}", self.max_v_z_increase);
        let _ = writeln!(s, "max ΔV_att      {:.3e}", self.max_v_att_increase);
        s
    }
}

/// Growth of the Lyapunov functions over one control tick: both ends use the
/// references frozen over the tick, the end uses the estimates after the
/// tick's adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovStep {
    pub time: f64,
    pub dv_z: f64,
    pub dv_att: f64,
    pub status: SolverStatus,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub lyapunov: Vec<LyapunovStep>,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut buf = Vec::new();
        write_csv(&mut buf, &self.records).expect("writing to memory");
        String::from_utf8(buf).expect("telemetry is ASCII")
    }

    /// Writes `<dir>/<scenario>_<metric>.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(format!("{}_{}.csv", self.summary.scenario, self.summary.metric));
        std::fs::write(&path, self.csv()).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

struct Noise {
    rng: ChaCha8Rng,
    position: Option<Normal<f64>>,
    attitude: Option<Normal<f64>>,
}

impl Noise {
    fn new(config: &NoiseConfig, seed: u64) -> Self {
        let normal = |s: f64| (s > 0.0).then(|| Normal::new(0.0, s).expect("finite σ"));
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            position: normal(config.position),
            attitude: normal(config.attitude),
        }
    }

    fn measure(&mut self, state: &FlightState) -> FlightState {
        let mut m = state.clone();
        if let Some(d) = self.position {
            m.position += Vector3::from_fn(|_, _| d.sample(&mut self.rng));
        }
        if let Some(d) = self.attitude {
            m.attitude += Vector3::from_fn(|_, _| d.sample(&mut self.rng));
        }
        m
    }
}

struct Lyapunov<'a> {
    scenario: &'a Scenario,
    plant: &'a PlantParams,
    inertia_inv: nalgebra::Matrix3<f64>,
    lambda_inv: nalgebra::Matrix3<f64>,
}

impl Lyapunov<'_> {
    fn errors(
        &self,
        state: &FlightState,
        reference: &Reference,
        desired: &Vector3<f64>,
        desired_rates: &Vector3<f64>,
    ) -> ErrorState {
        let cfg = &self.scenario.control;
        let yaw = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), -state.attitude.z);
        ErrorState::position(
            &(yaw * (state.position - reference.position)),
            &(yaw * (state.velocity - reference.velocity)),
            &cfg.position,
        )
        .with_attitude(&state.attitude, &state.rates, desired, desired_rates, &cfg.attitude)
    }

    /// `τ^s` enters at the attitude measured when the interval opened and
    /// is held over it, the torque the estimate is cancelling there.
    fn values(&self, errors: &ErrorState, adaptive: &AdaptiveState, static_torque: &Vector3<f64>) -> (f64, f64) {
        let cfg = &self.scenario.control;
        let truth = &self.plant.mass;
        let mut v_z = altitude_lyapunov(errors.e_z, errors.s_z);
        if cfg.adapt_mass {
            v_z += mass_lyapunov(adaptive.mass, truth.total_mass, cfg.position.sigma_m);
        }
        let v_att = attitude_lyapunov(
            &errors.e_att,
            &errors.z_att,
            &truth.inertia,
            &self.inertia_inv,
            &adaptive.inertia,
            &self.lambda_inv,
            static_torque,
            &adaptive.static_torque,
            cfg.attitude.sigma_tau,
        );
        (v_z, v_att)
    }
}

/// Runs one scenario to completion. Deterministic for a given scenario,
/// seed included.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    let structure = &scenario.structure;
    let n = structure.n_agents();
    let mut plant = PlantParams::from_structure(structure, scenario.plant.flex_tau)
        .map_err(|source| HarnessError::Diverged { tick: 0, source })?;
    if scenario.plant.rigid {
        plant = plant.rigid();
    }
    let mut ctrl = Controller::new(structure, scenario.control.clone())?;
    let gamma: Matrix3xX<f64> = build_gamma(&structure.geometry);
    let alloc = &scenario.allocation;
    let battery_params = scenario.battery.params;
    let mut batteries: Vec<BatteryState> = scenario
        .battery
        .initial
        .iter()
        .map(|&v| BatteryState::from_voltage(v, &battery_params))
        .collect();

    let hover = vec![plant.mass.total_mass * GRAVITY / n as f64; n];
    let mut state = FlightState {
        attitude: scenario.initial_attitude,
        flex: FlexState::from_thrusts(&plant.beams, &hover, GRAVITY),
        ..FlightState::at_rest(scenario.initial_position, n)
    };
    let mut noise = Noise::new(&scenario.noise, scenario.seed);
    let lyap = Lyapunov {
        scenario,
        plant: &plant,
        inertia_inv: plant.mass.inertia.try_inverse().expect("plant inertia is invertible"),
        lambda_inv: scenario
            .control
            .attitude
            .lambda
            .try_inverse()
            .ok_or_else(|| HarnessError::Scenario("adaptation gain Λ is singular".into()))?,
    };

    let ticks = (scenario.duration / CONTROL_DT).round() as usize;
    let mut records = Vec::with_capacity(ticks);
    let mut sample = (0.0, scenario.reference_at(0.0));
    let mut acc = Accumulator::new(scenario, n, ticks);
    let mut lyapunov = Vec::with_capacity(ticks);
    let mut open: Option<OpenTick> = None;

    for tick in 0..ticks {
        let t = tick as f64 * CONTROL_DT;
        if tick % WAYPOINT_TICKS == 0 {
            sample = (t, scenario.reference_at(t));
        }
        // between updates the last sample is extrapolated along its velocity
        let reference = Reference {
            position: sample.1.position + sample.1.velocity * (t - sample.0),
            velocity: sample.1.velocity,
        };
        let measured = noise.measure(&state);
        let cmd = ctrl.update(&measured, &reference, CONTROL_DT);
        if let Some(open) = open.take() {
            // the update just folded the last interval into the estimates
            let end = lyap.errors(&state, &open.reference, &open.desired, &open.desired_rates);
            let (v_z_end, v_att_end) = lyap.values(&end, &cmd.adaptive, &open.static_torque);
            let step = LyapunovStep {
                time: open.time,
                dv_z: v_z_end - open.v_z,
                dv_att: v_att_end - open.v_att,
                status: open.status,
            };
            acc.max_v_z_increase = acc.max_v_z_increase.max(step.dv_z);
            acc.max_v_att_increase = acc.max_v_att_increase.max(step.dv_att);
            lyapunov.push(step);
        }

        let problem = AllocationProblem {
            gamma: gamma.clone(),
            rhs: Vector3::new(cmd.torque.x, cmd.torque.y, cmd.total_thrust),
            t_max: alloc.t_max,
            metric: alloc.metric,
            params: allocation::MetricParams {
                batteries: batteries.iter().map(|b| b.voltage).collect(),
                ..alloc.params.clone()
            },
        };
        let result = allocation::allocate(&problem);
        // the bending estimate follows the thrusts about to be applied
        ctrl.record_thrusts(result.thrusts.as_slice())?;
        let moments = allocation::distribute_yaw(
            cmd.torque.z,
            &result.thrusts,
            &structure.geometry,
            &ctrl.estimated_flex(),
            alloc.moment_max,
        );

        let before = lyap.errors(&state, &reference, &cmd.desired_attitude, &cmd.desired_rates);
        let static_torque = plant.mass.static_torque_at(&state.rotation());
        let (v_z, v_att) = lyap.values(&before, &cmd.adaptive, &static_torque);
        records.push(TelemetryRecord {
            time: t,
            position: state.position,
            attitude: state.attitude,
            reference: reference.position,
            thrusts: result.thrusts.iter().copied().collect(),
            moments: moments.iter().copied().collect(),
            gammas: state.flex.agents.iter().map(|f| f.gamma).collect(),
            deflections: state.flex.agents.iter().map(|f| f.delta_z).collect(),
            batteries: batteries.iter().map(|b| b.voltage).collect(),
            mass_estimate: cmd.adaptive.mass,
            inertia_estimate: cmd.adaptive.inertia.diagonal(),
            torque_estimate: cmd.adaptive.static_torque,
            v_z,
            v_attitude: v_att,
            status: result.status,
        });
        acc.observe(&state, &reference, &result.thrusts, result.status, alloc.t_max);

        let command = ThrustVector {
            thrusts: result.thrusts.clone(),
            moments,
        };
        for sub in 0..PLANT_STEPS {
            state = dynamics::step(&state, &command, PLANT_DT, &plant)
                .map_err(|source| HarnessError::Diverged { tick, source })?;
            for (i, b) in batteries.iter_mut().enumerate() {
                let (next, event) = battery_step(b, command.thrusts[i], PLANT_DT, &battery_params)?;
                if event.is_some() {
                    let at = t + (sub + 1) as f64 * PLANT_DT;
                    log::warn!("agent {i} battery depleted at {at:.3} s");
                    acc.depleted.push((i, at));
                }
                *b = next;
            }
        }

        open = Some(OpenTick {
            time: t,
            v_z,
            v_att,
            static_torque,
            reference: Reference {
                position: reference.position + reference.velocity * CONTROL_DT,
                velocity: reference.velocity,
            },
            desired: cmd.desired_attitude + cmd.desired_rates * CONTROL_DT,
            desired_rates: cmd.desired_rates,
            status: result.status,
        });
        acc.min_battery = batteries.iter().map(|b| b.voltage).fold(acc.min_battery, f64::min);
    }

    let summary = acc.finish(&records, ctrl.adaptive().clone());
    Ok(RunOutput {
        records,
        lyapunov,
        summary,
    })
}

/// Lyapunov values at the start of a tick and the references frozen over it.
struct OpenTick {
    time: f64,
    v_z: f64,
    v_att: f64,
    static_torque: Vector3<f64>,
    reference: Reference,
    desired: Vector3<f64>,
    desired_rates: Vector3<f64>,
    status: SolverStatus,
}

struct Accumulator<'a> {
    scenario: &'a Scenario,
    thrust_sum: Vec<f64>,
    thrust_max: Vec<f64>,
    degraded: usize,
    saturated: usize,
    sq_position: f64,
    sq_altitude: f64,
    max_e_z: f64,
    min_battery: f64,
    max_v_z_increase: f64,
    max_v_att_increase: f64,
    depleted: Vec<(usize, f64)>,
    ticks: usize,
}

impl<'a> Accumulator<'a> {
    fn new(scenario: &'a Scenario, n: usize, ticks: usize) -> Self {
        Self {
            scenario,
            thrust_sum: vec![0.0; n],
            thrust_max: vec![0.0; n],
            degraded: 0,
            saturated: 0,
            sq_position: 0.0,
            sq_altitude: 0.0,
            max_e_z: 0.0,
            min_battery: f64::INFINITY,
            max_v_z_increase: f64::NEG_INFINITY,
            max_v_att_increase: f64::NEG_INFINITY,
            depleted: Vec::new(),
            ticks,
        }
    }

    fn observe(
        &mut self,
        state: &FlightState,
        reference: &Reference,
        thrusts: &DVector<f64>,
        status: SolverStatus,
        t_max: f64,
    ) {
        for (i, &t) in thrusts.iter().enumerate() {
            self.thrust_sum[i] += t;
            self.thrust_max[i] = self.thrust_max[i].max(t);
        }
        let on_bound = thrusts.iter().any(|&t| t <= 1e-9 || t >= t_max - 1e-9);
        self.degraded += (status == SolverStatus::Degraded) as usize;
        self.saturated += (status != SolverStatus::Optimal || on_bound) as usize;
        let err = state.position - reference.position;
        self.sq_position += err.norm_squared();
        self.sq_altitude += err.z * err.z;
        self.max_e_z = self.max_e_z.max(err.z.abs());
    }

    fn finish(self, records: &[TelemetryRecord], final_adaptive: AdaptiveState) -> RunSummary {
        let k = self.ticks.max(1) as f64;
        RunSummary {
            scenario: self.scenario.name.clone(),
            metric: self.scenario.allocation.metric,
            ticks: self.ticks,
            max_abs_e_z: self.max_e_z,
            settling_times: settling_times(self.scenario, records, SettleBand::default()),
            mean_thrust: self.thrust_sum.iter().map(|s| s / k).collect(),
            max_thrust: self.thrust_max,
            min_battery: self.min_battery,
            degraded_ticks: self.degraded,
            saturated_ticks: self.saturated,
            rms_position_error: (self.sq_position / k).sqrt(),
            rms_altitude_error: (self.sq_altitude / k).sqrt(),
            max_v_z_increase: self.max_v_z_increase,
            max_v_att_increase: self.max_v_att_increase,
            depleted: self.depleted,
            final_adaptive,
        }
    }
}

/// Per hold, the time after its start from which every record inside the
/// hold lies within `band` of the held position.
pub fn settling_times(scenario: &Scenario, records: &[TelemetryRecord], band: SettleBand) -> Vec<Option<f64>> {
    scenario
        .holds()
        .iter()
        .map(|h| {
            let segment: Vec<&TelemetryRecord> =
                records.iter().filter(|r| r.time >= h.start && r.time < h.end).collect();
            let inside = |r: &TelemetryRecord| {
                let e = r.position - h.position;
                e.z.abs() < band.altitude && e.xy().norm() < band.planar
            };
            match segment.iter().rposition(|r| !inside(r)) {
                None => segment.first().map(|_| 0.0),
                Some(i) if i + 1 < segment.len() => Some(segment[i + 1].time - h.start),
                Some(_) => None,
            }
        })
        .collect()
}

/// One row of a metric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub max_thrust: f64,
    pub mean_thrust: f64,
    pub rms_position_error: f64,
    pub saturated_ticks: usize,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub runs: Vec<RunOutput>,
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut s = String::from("metric,max_thrust,mean_thrust,rms_position_error,saturated_ticks\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.metric, r.max_thrust, r.mean_thrust, r.rms_position_error, r.saturated_ticks
            );
        }
        s
    }

    /// Writes each run's telemetry plus `comparison.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        let mut paths = Vec::new();
        for (i, run) in self.runs.iter().enumerate() {
            // repeated metrics get distinct files
            let p = run.write_to(dir)?;
            if self.runs[..i].iter().any(|r| r.summary.metric == run.summary.metric) {
                let renamed = dir.join(format!("{}_{}_{i}.csv", run.summary.scenario, run.summary.metric));
                std::fs::rename(&p, &renamed).map_err(|e| HarnessError::Io(e.to_string()))?;
                paths.push(renamed);
            } else {
                paths.push(p);
            }
        }
        let table = dir.join("comparison.csv");
        std::fs::write(&table, self.table()).map_err(|e| HarnessError::Io(format!("{}: {e}", table.display())))?;
        paths.push(table);
        Ok(paths)
    }
}

/// Runs the same scenario once per metric; only the metric differs.
pub fn compare_metrics(scenario: &Scenario, metrics: &[Metric]) -> Result<Comparison, HarnessError> {
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &metric in metrics {
        let run = run_scenario(&scenario.clone().with_metric(metric))?;
        let s = &run.summary;
        rows.push(ComparisonRow {
            metric,
            max_thrust: s.max_agent_thrust(),
            mean_thrust: s.mean_agent_thrust(),
            rms_position_error: s.rms_position_error,
            saturated_ticks: s.saturated_ticks,
        });
        runs.push(run);
    }
    Ok(Comparison { rows, runs })
}
