use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use super::HarnessError;
use crate::allocation::{Metric, MetricParams};
use crate::config::{ConfigError, Document, Section};
use crate::control::{ControllerConfig, MassAdaptationLaw, Reference};
use crate::power::BatteryParams;
use crate::structure::{PayloadSpec, Structure};

/// A position to reach at `time`, coming from the previous waypoint; two
/// waypoints at the same time make a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub position: Vector3<f64>,
    /// Arrival time, s.
    pub time: f64,
}

/// A stretch over which the reference stands still.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hold {
    pub position: Vector3<f64>,
    pub start: f64,
    pub end: f64,
}

/// Measurement noise standard deviations. Velocities and rates are measured
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Attitude σ, rad.
    pub attitude: f64,
    /// Position σ, m.
    pub position: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            attitude: 0.5_f64.to_radians(),
            position: 0.002,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            attitude: 0.0,
            position: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationConfig {
    pub metric: Metric,
    pub params: MetricParams,
    /// Per-agent thrust limit, N.
    pub t_max: f64,
    /// Per-agent yaw moment limit, N·m.
    pub moment_max: f64,
    /// Fraction of degraded ticks above which a run counts as failed.
    pub fallback_threshold: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Ft,
            params: MetricParams::default(),
            t_max: 0.6,
            moment_max: 0.01,
            fallback_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Bending lag time constant, s; zero bends instantly.
    pub flex_tau: f64,
    /// Forces rigid rods in the plant.
    pub rigid: bool,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            flex_tau: 0.0,
            rigid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    pub params: BatteryParams,
    /// Initial readings, one per agent.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Where the lattice came from, for reports.
    pub structure_path: PathBuf,
    /// Lattice with the scenario's payload applied (the plant's truth).
    pub structure: Structure,
    pub waypoints: Vec<Waypoint>,
    pub duration: f64,
    pub seed: u64,
    pub noise: NoiseConfig,
    pub plant: PlantConfig,
    pub control: ControllerConfig,
    pub allocation: AllocationConfig,
    pub battery: BatteryConfig,
    pub initial_position: Vector3<f64>,
    pub initial_attitude: Vector3<f64>,
}

const SECTIONS: &[&str] = &[
    "scenario",
    "waypoint",
    "noise",
    "plant",
    "gains",
    "allocation",
    "battery",
    "initial",
    "payload",
];

impl Scenario {
    /// Reads a scenario; its `structure` path is resolved against the
    /// scenario's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = read(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with(&text, |name| {
            let p = dir.join(name);
            read(&p).map(|t| (p, t))
        })
    }

    /// Parses scenario text, loading the lattice through `load`.
    pub fn parse_with<F>(text: &str, load: F) -> Result<Self, HarnessError>
    where
        F: FnOnce(&str) -> Result<(PathBuf, String), HarnessError>,
    {
        let doc = Document::parse(text)?;
        doc.expect_sections(SECTIONS)?;
        let head = doc
            .section("scenario")
            .ok_or_else(|| HarnessError::Scenario("missing [scenario] section".into()))?;
        head.expect_keys(&["name", "structure", "duration", "seed"])?;
        let name: String = head.required("name")?;
        let structure_name: String = head.required("structure")?;
        let (structure_path, lattice) = load(&structure_name)?;

        let mut spec = crate::structure::StructureSpec::parse(&lattice)?;
        if let Some(p) = doc.section("payload") {
            p.expect_keys(&["mass", "offset", "known"])?;
            let offset = match p.get("offset") {
                Some(e) => Vector3::from(e.parse_vec3()?),
                None => Vector3::zeros(),
            };
            spec.payload = Some(PayloadSpec {
                mass: p.required("mass")?,
                offset,
                known: p.or("known", false)?,
            });
        }
        let structure = Structure::new(spec)?;
        let n = structure.n_agents();

        let waypoints = parse_waypoints(&doc)?;
        let last = waypoints.last().map_or(0.0, |w| w.time);
        let duration: f64 = head.required("duration")?;
        if !(duration > 0.0 && duration >= last) {
            return Err(HarnessError::Scenario(format!(
                "duration {duration} must be positive and cover the last waypoint at {last}"
            )));
        }

        let mut noise = NoiseConfig::default();
        if let Some(s) = doc.section("noise") {
            s.expect_keys(&["attitude_deg", "position"])?;
            noise.attitude = s.or("attitude_deg", noise.attitude.to_degrees())?.to_radians();
            noise.position = s.or("position", noise.position)?;
        }

        let mut plant = PlantConfig::default();
        if let Some(s) = doc.section("plant") {
            s.expect_keys(&["flex_tau", "rigid"])?;
            plant.flex_tau = s.or("flex_tau", plant.flex_tau)?;
            plant.rigid = s.or("rigid", plant.rigid)?;
        }

        let control = match doc.section("gains") {
            Some(s) => parse_gains(s)?,
            None => ControllerConfig::default(),
        };

        let mut allocation = AllocationConfig::default();
        if let Some(s) = doc.section("allocation") {
            s.expect_keys(&[
                "metric",
                "epsilon",
                "alpha_min",
                "alpha_max",
                "tau_x_max",
                "tau_y_max",
                "delta_volt",
                "t_max",
                "moment_max",
                "fallback_threshold",
            ])?;
            let a = &mut allocation;
            a.metric = s.or("metric", a.metric)?;
            a.params.epsilon = s.or("epsilon", a.params.epsilon)?;
            a.params.alpha_min = s.or("alpha_min", a.params.alpha_min)?;
            a.params.alpha_max = s.or("alpha_max", a.params.alpha_max)?;
            a.params.tau_x_max = s.or("tau_x_max", a.params.tau_x_max)?;
            a.params.tau_y_max = s.or("tau_y_max", a.params.tau_y_max)?;
            a.params.delta_volt = s.or("delta_volt", a.params.delta_volt)?;
            a.t_max = s.or("t_max", a.t_max)?;
            a.moment_max = s.or("moment_max", a.moment_max)?;
            a.fallback_threshold = s.or("fallback_threshold", a.fallback_threshold)?;
            a.params.validate()?;
        }

        let mut battery = BatteryConfig {
            params: BatteryParams::default(),
            initial: vec![BatteryParams::default().b_full; n],
        };
        if let Some(s) = doc.section("battery") {
            s.expect_keys(&["initial", "delta"])?;
            if let Some(e) = s.get("initial") {
                let v: Vec<f64> = e.parse_list()?;
                battery.initial = match v.len() {
                    1 => vec![v[0]; n],
                    k if k == n => v,
                    k => {
                        return Err(HarnessError::Scenario(format!(
                            "[battery] initial lists {k} readings for {n} agents"
                        )))
                    }
                };
            }
            battery.params.delta_volt = s.or("delta", battery.params.delta_volt)?;
        }

        let mut initial_position = waypoints.first().map_or(Vector3::zeros(), |w| w.position);
        let mut initial_attitude = Vector3::zeros();
        if let Some(s) = doc.section("initial") {
            s.expect_keys(&["position", "attitude_deg"])?;
            if let Some(e) = s.get("position") {
                initial_position = Vector3::from(e.parse_vec3()?);
            }
            if let Some(e) = s.get("attitude_deg") {
                initial_attitude = Vector3::from(e.parse_vec3()?).map(f64::to_radians);
            }
        }

        Ok(Self {
            name,
            structure_path,
            structure,
            waypoints,
            duration,
            seed: head.or("seed", 0)?,
            noise,
            plant,
            control,
            allocation,
            battery,
            initial_position,
            initial_attitude,
        })
    }

    /// Reference position and velocity at `t`. Between waypoints (and from
    /// the initial position to the first) the reference follows a cubic
    /// ease, so its velocity is continuous and zero at every waypoint.
    pub fn reference_at(&self, t: f64) -> Reference {
        let mut from = (self.initial_position, 0.0);
        for w in &self.waypoints {
            if t < w.time {
                let span = w.time - from.1;
                let u = (t - from.1) / span;
                let delta = w.position - from.0;
                return Reference {
                    position: from.0 + delta * (u * u * (3.0 - 2.0 * u)),
                    velocity: delta * (6.0 * u * (1.0 - u) / span),
                };
            }
            from = (w.position, w.time);
        }
        Reference::hold(from.0)
    }

    /// Maximal intervals with a stationary reference, in time order.
    pub fn holds(&self) -> Vec<Hold> {
        let mut out: Vec<Hold> = Vec::new();
        let mut extend = |position: Vector3<f64>, start: f64, end: f64| match out.last_mut() {
            Some(h) if h.position == position && h.end == start => h.end = end,
            _ => out.push(Hold { position, start, end }),
        };
        let mut prev = (self.initial_position, 0.0);
        for w in &self.waypoints {
            if w.position == prev.0 {
                extend(w.position, prev.1, w.time);
            }
            prev = (w.position, w.time);
        }
        extend(prev.0, prev.1, self.duration);
        out.retain(|h| h.end > h.start);
        out
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.allocation.metric = metric;
        self
    }

    pub fn without_noise(mut self) -> Self {
        self.noise = NoiseConfig::none();
        self
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn parse_waypoints(doc: &Document) -> Result<Vec<Waypoint>, HarnessError> {
    let mut out = Vec::new();
    for s in doc.sections("waypoint") {
        s.expect_keys(&["point"])?;
        for e in s.get_all("point") {
            let v: Vec<f64> = e.parse_list()?;
            if v.len() != 4 {
                return Err(ConfigError::InvalidValue {
                    line: e.line,
                    key: "point".into(),
                    message: format!("expected x, y, z, t; found {} values", v.len()),
                }
                .into());
            }
            out.push(Waypoint {
                position: Vector3::new(v[0], v[1], v[2]),
                time: v[3],
            });
        }
    }
    if out.is_empty() {
        return Err(HarnessError::Scenario("at least one waypoint is required".into()));
    }
    if out.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(HarnessError::Scenario("waypoints must be time-ordered".into()));
    }
    Ok(out)
}

fn diag(s: &Section, key: &str, default: Matrix3<f64>) -> Result<Matrix3<f64>, ConfigError> {
    match s.get(key) {
        Some(e) => Ok(Matrix3::from_diagonal(&Vector3::from(e.parse_vec3()?))),
        None => Ok(default),
    }
}

fn parse_gains(s: &Section) -> Result<ControllerConfig, HarnessError> {
    s.expect_keys(&[
        "kz1",
        "kz2",
        "kx1",
        "kx2",
        "ky1",
        "ky2",
        "sigma_m",
        "angle_max",
        "k_phi",
        "k_omega",
        "lambda",
        "sigma_tau",
        "adapt_mass",
        "adapt_attitude",
        "flex_compensation",
        "filter_tau",
        "mass_law",
        "desired_yaw",
    ])?;
    let mut c = ControllerConfig::default();
    let p = &mut c.position;
    p.kz1 = s.or("kz1", p.kz1)?;
    p.kz2 = s.or("kz2", p.kz2)?;
    p.kx1 = s.or("kx1", p.kx1)?;
    p.kx2 = s.or("kx2", p.kx2)?;
    p.ky1 = s.or("ky1", p.ky1)?;
    p.ky2 = s.or("ky2", p.ky2)?;
    p.sigma_m = s.or("sigma_m", p.sigma_m)?;
    p.angle_max = s.or("angle_max", p.angle_max)?;
    let a = &mut c.attitude;
    a.k_phi = diag(s, "k_phi", a.k_phi)?;
    a.k_omega = diag(s, "k_omega", a.k_omega)?;
    a.lambda = diag(s, "lambda", a.lambda)?;
    a.sigma_tau = s.or("sigma_tau", a.sigma_tau)?;
    c.adapt_mass = s.or("adapt_mass", c.adapt_mass)?;
    c.adapt_attitude = s.or("adapt_attitude", c.adapt_attitude)?;
    c.flex_compensation = s.or("flex_compensation", c.flex_compensation)?;
    c.attitude_filter_tau = s.or("filter_tau", c.attitude_filter_tau)?;
    c.desired_yaw = s.or::<f64>("desired_yaw", 0.0)?.to_radians();
    if let Some(e) = s.get("mass_law") {
        c.mass_law = match e.value.as_str() {
            "without_gravity" => MassAdaptationLaw::WithoutGravity,
            "gravity_compensated" => MassAdaptationLaw::GravityCompensated,
            other => {
                return Err(ConfigError::InvalidValue {
                    line: e.line,
                    key: "mass_law".into(),
                    message: format!("expected without_gravity or gravity_compensated, found `{other}`"),
                }
                .into())
            }
        };
    }
    c.position.validate()?;
    c.attitude.validate()?;
    Ok(c)
}
