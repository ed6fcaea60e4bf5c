//! Text form of a one-shot allocation problem, as read by the `allocate`
//! subcommand.
//!
//! ```text
//! [problem]
//! metric = fb
//! rhs = 0, 0, 1.9          # τ_x, τ_y, T^d
//! tau_z = 0                # optional, split across agents
//! t_max = 0.6
//! batteries = 4.1, 4.1, 3.85, 4.1, 4.1
//! structure = pentacopter.lattice   # or one [agent] section per agent
//!
//! [agent]
//! position = 0.17, 0
//! ```

use nalgebra::{DVector, Matrix3xX, Vector3};

use super::{allocate, build_gamma, AllocationError, AllocationProblem, AllocationResult, Metric, MetricParams};
use crate::config::{ConfigError, Document};
use crate::structure::{Structure, StructureError};

#[derive(Debug, thiserror::Error)]
pub enum RequestError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("{0}")]
    Invalid(String),
}

const PROBLEM_KEYS: &[&str] = &[
    "metric",
    "rhs",
    "tau_z",
    "t_max",
    "moment_max",
    "epsilon",
    "alpha_min",
    "alpha_max",
    "tau_x_max",
    "tau_y_max",
    "delta_volt",
    "arm_min",
    "batteries",
    "structure",
];

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationRequest {
    pub problem: AllocationProblem,
    pub tau_z: f64,
    pub moment_max: f64,
}

impl AllocationRequest {
    /// Parses a request; `load` resolves a `structure = …` reference to the
    /// lattice text.
    pub fn parse_with<F>(text: &str, load: F) -> Result<Self, RequestError>
    where
        F: FnOnce(&str) -> Result<String, RequestError>,
    {
        let doc = Document::parse(text)?;
        doc.expect_sections(&["problem", "agent"])?;
        let head = doc
            .section("problem")
            .ok_or_else(|| RequestError::Invalid("missing [problem] section".into()))?;
        head.expect_keys(PROBLEM_KEYS)?;

        let gamma = match head.optional::<String>("structure")? {
            Some(name) => {
                if doc.sections("agent").next().is_some() {
                    return Err(RequestError::Invalid(
                        "give either `structure` or [agent] sections, not both".into(),
                    ));
                }
                build_gamma(&Structure::parse(&load(&name)?)?.geometry)
            }
            None => agent_gamma(&doc)?,
        };
        let n = gamma.ncols();

        let rhs = head
            .get("rhs")
            .ok_or_else(|| RequestError::Invalid("[problem] needs `rhs = tau_x, tau_y, thrust`".into()))?
            .parse_vec3()?;
        let defaults = MetricParams::default();
        let batteries = match head.get("batteries") {
            Some(e) => {
                let v: Vec<f64> = e.parse_list()?;
                match v.len() {
                    1 => vec![v[0]; n],
                    len if len == n => v,
                    len => {
                        return Err(RequestError::Invalid(format!(
                            "line {}: {len} battery readings for {n} agents",
                            e.line
                        )))
                    }
                }
            }
            None => vec![4.0; n],
        };
        let params = MetricParams {
            epsilon: head.or("epsilon", defaults.epsilon)?,
            alpha_min: head.or("alpha_min", defaults.alpha_min)?,
            alpha_max: head.or("alpha_max", defaults.alpha_max)?,
            tau_x_max: head.or("tau_x_max", defaults.tau_x_max)?,
            tau_y_max: head.or("tau_y_max", defaults.tau_y_max)?,
            delta_volt: head.or("delta_volt", defaults.delta_volt)?,
            arm_min: head.or("arm_min", defaults.arm_min)?,
            batteries,
        };
        let problem = AllocationProblem {
            gamma,
            rhs: Vector3::from(rhs),
            t_max: head.or("t_max", 0.6)?,
            metric: head.or("metric", Metric::Ft)?,
            params,
        };
        problem.validate()?;
        let moment_max: f64 = head.or("moment_max", 0.01)?;
        if moment_max.is_nan() || moment_max < 0.0 {
            return Err(RequestError::Invalid(format!(
                "moment_max must be non-negative, found {moment_max}"
            )));
        }
        Ok(Self {
            problem,
            tau_z: head.or("tau_z", 0.0)?,
            moment_max,
        })
    }

    /// Solves (falling back to least squares when infeasible) and splits the
    /// yaw torque equally; no bending is assumed.
    pub fn run(&self) -> AllocationResult {
        let mut result = allocate(&self.problem);
        let n = self.problem.n_agents();
        let share = (self.tau_z / n as f64).clamp(-self.moment_max, self.moment_max);
        result.moments = DVector::from_element(n, share);
        result
    }
}

fn agent_gamma(doc: &Document) -> Result<Matrix3xX<f64>, RequestError> {
    let mut columns = Vec::new();
    for s in doc.sections("agent") {
        s.expect_keys(&["position"])?;
        let e = s
            .get("position")
            .ok_or_else(|| RequestError::Invalid(format!("line {}: [agent] needs `position = x, y`", s.line)))?;
        let p: Vec<f64> = e.parse_list()?;
        if !(p.len() == 2 || p.len() == 3) {
            return Err(RequestError::Invalid(format!(
                "line {}: position takes 2 or 3 values",
                e.line
            )));
        }
        columns.push(Vector3::new(p[1], -p[0], 1.0));
    }
    if columns.is_empty() {
        return Err(RequestError::Invalid(
            "no agents: give `structure` or [agent] sections".into(),
        ));
    }
    Ok(Matrix3xX::from_columns(&columns))
}

/// CSV `agent,thrust,moment` followed by a status line.
pub fn render_result(result: &AllocationResult) -> String {
    let mut out = String::from("agent,thrust,moment\n");
    for (i, (t, m)) in result.thrusts.iter().zip(result.moments.iter()).enumerate() {
        out.push_str(&format!("{i},{t},{m}\n"));
    }
    out.push_str(&format!(
        "# status={} objective={} residual={:e}\n",
        result.status, result.objective, result.residual
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::SolverStatus;

    fn no_files(_: &str) -> Result<String, RequestError> {
        Err(RequestError::Invalid("no files".into()))
    }

    #[test]
    fn agents_and_yaw() {
        let text = "[problem]\nrhs = 0, 0, 1.2\ntau_z = 0.004\n\
                    [agent]\nposition = 0.1, 0\n[agent]\nposition = 0, 0.1\n\
                    [agent]\nposition = -0.1, 0\n[agent]\nposition = 0, -0.1\n";
        let req = AllocationRequest::parse_with(text, no_files).unwrap();
        let r = req.run();
        assert_eq!(r.status, SolverStatus::Optimal);
        for t in r.thrusts.iter() {
            assert!((t - 0.3).abs() < 1e-9);
        }
        assert!(r.moments.iter().all(|m| (m - 0.001).abs() < 1e-15));
        let csv = render_result(&r);
        assert!(csv.starts_with("agent,thrust,moment\n0,"));
        assert!(csv.trim_end().ends_with(&format!("residual={:e}", r.residual)));
    }

    #[test]
    fn battery_count_must_match() {
        let text = "[problem]\nrhs = 0, 0, 1\nbatteries = 4, 4\n\
                    [agent]\nposition = 0.1, 0\n[agent]\nposition = 0, 0.1\n[agent]\nposition = -0.1, -0.1\n";
        assert!(matches!(
            AllocationRequest::parse_with(text, no_files),
            Err(RequestError::Invalid(_))
        ));
    }

    #[test]
    fn structure_reference_is_loaded() {
        let text = "[problem]\nmetric = pinv\nrhs = 0, 0, 1.5\nstructure = quad.lattice\n";
        let req = AllocationRequest::parse_with(text, |name| {
            assert_eq!(name, "quad.lattice");
            Ok(include_str!("../../scenarios/quad.lattice").to_string())
        })
        .unwrap();
        assert_eq!(req.problem.n_agents(), 4);
        assert_eq!(req.problem.metric, Metric::PseudoInverse);
    }
}
