//! Thrust allocation: distribute the commanded total thrust and roll/pitch
//! torques among the agents under a selectable metric, then split the yaw
//! moment.
//!
//! ```text
//! Γ T = [τ_x, τ_y, T^d]ᵀ,   column i = [^sc_iy, -^sc_ix, 1]ᵀ,   0 ≤ T_i ≤ T_max
//! ```

mod qp;
pub mod request;
mod simplex;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3xX, Vector3};

use crate::flexibility::FlexState;
use crate::structure::StructureGeometry;

pub use qp::{BoxQp, QpSolution};
pub use request::{render_result, AllocationRequest, RequestError};
pub use simplex::{LinearProgram, LpOutcome};

/// Equality tolerance an `Optimal` result is held to.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AllocationError {
    #[error("allocation matrix has rank {0} < 3: agents are collinear")]
    RankDeficient(usize),
    #[error("allocation infeasible: {0}")]
    Infeasible(InfeasibilityCertificate),
    #[error("agent {agent} battery at {voltage} V is at or below the {cutoff} V cutoff")]
    BatteryBelowCutoff { agent: usize, voltage: f64, cutoff: f64 },
    #[error("invalid allocation problem: {0}")]
    InvalidProblem(String),
    #[error("unknown metric `{0}` (expected pinv, ft, fe or fb)")]
    UnknownMetric(String),
}

/// Evidence that no `T` in the box meets the equality.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    /// Farkas multipliers on `[τ_x, τ_y, T^d]`.
    pub equality: Vector3<f64>,
    /// Multipliers on the upper bounds `T_i ≤ T_max`.
    pub upper_bounds: DVector<f64>,
    pub reason: String,
}

impl fmt::Display for InfeasibilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (multipliers on Γ rows {:?})",
            self.reason,
            self.equality.as_slice()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    PseudoInverse,
    /// Minimise the largest thrust.
    Ft,
    /// Blend of `Ft` and the torque-arm efficiency term.
    Fe,
    /// Battery-weighted quadratic.
    Fb,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::PseudoInverse, Metric::Ft, Metric::Fe, Metric::Fb];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PseudoInverse => "pinv",
            Metric::Ft => "ft",
            Metric::Fe => "fe",
            Metric::Fb => "fb",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pinv" | "pseudoinverse" | "pseudo-inverse" => Ok(Metric::PseudoInverse),
            "ft" => Ok(Metric::Ft),
            "fe" => Ok(Metric::Fe),
            "fb" => Ok(Metric::Fb),
            other => Err(AllocationError::UnknownMetric(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricParams {
    /// Blend weight of the worst-case thrust term in `Fe`.
    pub epsilon: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub tau_x_max: f64,
    pub tau_y_max: f64,
    /// Battery cutoff `δ`, V.
    pub delta_volt: f64,
    /// Per-agent battery readings `B_i`, V; required by `Fb`.
    pub batteries: Vec<f64>,
    /// Arms shorter than this have their reciprocal clamped.
    pub arm_min: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            epsilon: 0.67,
            alpha_min: 0.1,
            alpha_max: 1.0,
            tau_x_max: 0.09,
            tau_y_max: 0.09,
            delta_volt: 2.9,
            batteries: Vec::new(),
            arm_min: 0.01,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<(), AllocationError> {
        let bad = |m: &str| Err(AllocationError::InvalidProblem(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= 1.0) {
            return bad("saturation thresholds need 0 ≤ α_min < α_max ≤ 1");
        }
        if !(self.tau_x_max > 0.0 && self.tau_y_max > 0.0 && self.arm_min > 0.0) {
            return bad("torque normalisers and arm_min must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    pub gamma: Matrix3xX<f64>,
    /// `(τ_x^c, τ_y^c, T^d)`.
    pub rhs: Vector3<f64>,
    pub t_max: f64,
    pub metric: Metric,
    pub params: MetricParams,
}

impl AllocationProblem {
    pub fn n_agents(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        if self.n_agents() < 3 {
            return Err(AllocationError::InvalidProblem(format!(
                "at least 3 agents are required, found {}",
                self.n_agents()
            )));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(AllocationError::InvalidProblem(format!(
                "t_max must be positive, found {}",
                self.t_max
            )));
        }
        if !self.rhs.iter().all(|v| v.is_finite()) || !self.gamma.iter().all(|v| v.is_finite()) {
            return Err(AllocationError::InvalidProblem("non-finite entries".into()));
        }
        self.params.validate()
    }

    pub fn residual(&self, thrusts: &DVector<f64>) -> f64 {
        (&self.gamma * thrusts - self.rhs).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    /// Pseudo-inverse solution clipped into the box; residual reported.
    Clamped,
    /// Infeasible problem answered by the bounded least-squares fallback.
    Degraded,
}

impl fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Clamped => "clamped",
            SolverStatus::Degraded => "degraded",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub thrusts: DVector<f64>,
    pub moments: DVector<f64>,
    pub objective: f64,
    /// `‖Γ T - rhs‖_∞`.
    pub residual: f64,
    pub status: SolverStatus,
}

/// Columns `[^sc_iy, -^sc_ix, 1]`. Logs a warning when the agents are
/// collinear through `C_s`.
pub fn build_gamma(geometry: &StructureGeometry) -> Matrix3xX<f64> {
    let gamma = Matrix3xX::from_fn(geometry.n_agents(), |r, i| {
        let p = &geometry.agent_poses[i];
        match r {
            0 => p.y(),
            1 => -p.x(),
            _ => 1.0,
        }
    });
    let rank = gamma_rank(&gamma);
    if rank < 3 {
        log::warn!("allocation matrix has rank {rank}: agents are collinear");
    }
    gamma
}

pub fn gamma_rank(gamma: &Matrix3xX<f64>) -> usize {
    let sv = gamma.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|s| **s > 1e-9 * top.max(1e-300)).count()
}

/// `0` below `α_min`, `1` above `α_max`, linear in between.
pub fn saturation(x: f64, alpha_min: f64, alpha_max: f64) -> f64 {
    if x <= alpha_min {
        0.0
    } else if x >= alpha_max {
        1.0
    } else {
        (x - alpha_min) / (alpha_max - alpha_min)
    }
}

/// `f_B` weight `1 / (1 - e^{δ - B})`.
pub fn battery_weight(voltage: f64, delta: f64) -> f64 {
    1.0 / (1.0 - (delta - voltage).exp())
}

fn result(
    problem: &AllocationProblem,
    thrusts: DVector<f64>,
    objective: f64,
    status: SolverStatus,
) -> AllocationResult {
    let n = thrusts.len();
    AllocationResult {
        residual: problem.residual(&thrusts),
        moments: DVector::zeros(n),
        thrusts,
        objective,
        status,
    }
}

/// Minimum-norm solution `Γᵀ(ΓΓᵀ)⁻¹ rhs`, clipped into `[0, T_max]`.
pub fn solve_pseudo_inverse(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    problem.validate()?;
    let rank = gamma_rank(&problem.gamma);
    if rank < 3 {
        return Err(AllocationError::RankDeficient(rank));
    }
    let g = &problem.gamma;
    let gram = g * g.transpose();
    let y = gram
        .lu()
        .solve(&problem.rhs)
        .ok_or(AllocationError::RankDeficient(rank))?;
    let raw: DVector<f64> = g.transpose() * y;
    let clamped = raw.map(|t| t.clamp(0.0, problem.t_max));
    let status = if clamped == raw {
        SolverStatus::Optimal
    } else {
        SolverStatus::Clamped
    };
    let objective = clamped.norm_squared();
    Ok(result(problem, clamped, objective, status))
}

/// Builds `min ε·t + (1-ε)·Σ c_i T_i` over `[T, t]` with the allocation
/// equality, `T_i ≤ t` and `T_i ≤ T_max`.
fn epigraph_lp(problem: &AllocationProblem, weight_t: f64, costs: &[f64]) -> LinearProgram {
    let n = problem.n_agents();
    let mut c = DVector::zeros(n + 1);
    for (i, ci) in costs.iter().enumerate() {
        c[i] = (1.0 - weight_t) * ci;
    }
    c[n] = weight_t;
    let mut lp = LinearProgram::new(c);
    for r in 0..3 {
        let mut row: Vec<f64> = problem.gamma.row(r).iter().copied().collect();
        row.push(0.0);
        lp.push_eq(&row, problem.rhs[r]);
    }
    for i in 0..n {
        let mut row = vec![0.0; n + 1];
        row[i] = 1.0;
        row[n] = -1.0;
        lp.push_le(&row, 0.0);
        let mut row = vec![0.0; n + 1];
        row[i] = 1.0;
        lp.push_le(&row, problem.t_max);
    }
    lp
}

fn certificate(problem: &AllocationProblem, farkas: &DVector<f64>) -> InfeasibilityCertificate {
    let n = problem.n_agents();
    let equality = Vector3::new(farkas[0], farkas[1], farkas[2]);
    // ≤ rows alternate [T_i - t ≤ 0, T_i ≤ T_max]
    let upper_bounds = DVector::from_fn(n, |i, _| farkas[3 + 2 * i + 1]);
    let td = problem.rhs.z;
    let reason = if td < 0.0 {
        format!("total thrust {td:.4} N is negative")
    } else if td > n as f64 * problem.t_max {
        format!("total thrust {td:.4} N exceeds {n} × {:.4} N", problem.t_max)
    } else if equality.x.abs() + equality.y.abs() > 0.0 {
        format!(
            "torques ({:.4}, {:.4}) N·m are out of reach at {td:.4} N total thrust",
            problem.rhs.x, problem.rhs.y
        )
    } else {
        "thrust bounds conflict with the allocation equality".to_string()
    };
    InfeasibilityCertificate {
        equality,
        upper_bounds,
        reason,
    }
}

/// Solves the epigraph LP and then picks the lexicographically smallest
/// `T` on the optimal face, so the answer does not depend on pivoting.
fn solve_lexicographic(
    problem: &AllocationProblem,
    weight_t: f64,
    costs: &[f64],
) -> Result<(DVector<f64>, f64), AllocationError> {
    problem.validate()?;
    let n = problem.n_agents();
    let mut lp = epigraph_lp(problem, weight_t, costs);
    let (mut x, objective) = match lp.solve() {
        LpOutcome::Optimal { x, objective } => (x, objective),
        LpOutcome::Infeasible { farkas } => return Err(AllocationError::Infeasible(certificate(problem, &farkas))),
        other => {
            return Err(AllocationError::InvalidProblem(format!(
                "LP solver ended with {other:?}"
            )))
        }
    };
    let slack = |v: f64| v + 1e-12 * (1.0 + v.abs());
    lp.push_le(lp.c.clone().as_slice(), slack(objective));
    for k in 0..n {
        let mut c = DVector::zeros(n + 1);
        c[k] = 1.0;
        let mut stage = lp.clone();
        stage.c = c;
        match stage.solve() {
            LpOutcome::Optimal { x: xs, objective: tk } => {
                x = xs;
                let mut row = vec![0.0; n + 1];
                row[k] = 1.0;
                lp.push_le(&row, slack(tk));
            }
            // the optimal face is non-empty; a failure here is round-off,
            // keep the last vertex
            _ => break,
        }
    }
    // vertices can overshoot a bound by round-off
    let thrusts = x.rows(0, n).map(|t| t.clamp(0.0, problem.t_max));
    Ok((thrusts, objective))
}

/// Minimises `‖T‖_∞` with the lexicographic tie-break.
pub fn solve_ft(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let n = problem.n_agents();
    let (thrusts, _) = solve_lexicographic(problem, 1.0, &vec![0.0; n])?;
    let objective = thrusts.amax();
    Ok(result(problem, thrusts, objective, SolverStatus::Optimal))
}

/// Saturated torque demands `(ε_x, ε_y)`.
pub fn torque_demand(problem: &AllocationProblem) -> (f64, f64) {
    let p = &problem.params;
    (
        saturation(problem.rhs.x.abs() / p.tau_x_max, p.alpha_min, p.alpha_max),
        saturation(problem.rhs.y.abs() / p.tau_y_max, p.alpha_min, p.alpha_max),
    )
}

/// Per-agent cost `ε_x/|Γ_0i| + ε_y/|Γ_1i|` of the efficiency term.
pub fn efficiency_costs(problem: &AllocationProblem) -> Vec<f64> {
    let (ex, ey) = torque_demand(problem);
    let arm_min = problem.params.arm_min;
    (0..problem.n_agents())
        .map(|i| {
            let rx = 1.0 / problem.gamma[(0, i)].abs().max(arm_min);
            let ry = 1.0 / problem.gamma[(1, i)].abs().max(arm_min);
            ex * rx + ey * ry
        })
        .collect()
}

/// `ε f_T + (1-ε) f_M`.
pub fn solve_fe(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    let costs = efficiency_costs(problem);
    if costs.iter().all(|c| *c == 0.0) {
        // no torque demand: the efficiency term vanishes
        return solve_ft(problem);
    }
    let (thrusts, objective) = solve_lexicographic(problem, problem.params.epsilon, &costs)?;
    Ok(result(problem, thrusts, objective, SolverStatus::Optimal))
}

/// Minimises `Σ w_i T_i²` with battery weights.
pub fn solve_fb(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    problem.validate()?;
    let n = problem.n_agents();
    let p = &problem.params;
    if p.batteries.len() != n {
        return Err(AllocationError::InvalidProblem(format!(
            "{} battery readings for {n} agents",
            p.batteries.len()
        )));
    }
    if let Some((agent, &voltage)) = p.batteries.iter().enumerate().find(|(_, b)| **b <= p.delta_volt) {
        return Err(AllocationError::BatteryBelowCutoff {
            agent,
            voltage,
            cutoff: p.delta_volt,
        });
    }
    let weights = DVector::from_iterator(n, p.batteries.iter().map(|b| battery_weight(*b, p.delta_volt)));
    // any feasible point starts the active set
    let (start, _) = solve_lexicographic(problem, 1.0, &vec![0.0; n])?;
    let qp = fb_qp(problem, &weights);
    let sol = qp.solve(&start);
    let thrusts = sol.x.map(|t| t.clamp(0.0, problem.t_max));
    let objective = thrusts.iter().zip(weights.iter()).map(|(t, w)| w * t * t).sum();
    Ok(result(problem, thrusts, objective, SolverStatus::Optimal))
}

/// The `f_B` quadratic program, exposed for KKT checks.
pub fn fb_qp(problem: &AllocationProblem, weights: &DVector<f64>) -> BoxQp {
    let n = problem.n_agents();
    BoxQp {
        h: DMatrix::from_diagonal(&(weights * 2.0)),
        f: DVector::zeros(n),
        a: DMatrix::from_fn(3, n, |r, c| problem.gamma[(r, c)]),
        b: DVector::from_column_slice(problem.rhs.as_slice()),
        lower: DVector::zeros(n),
        upper: DVector::from_element(n, problem.t_max),
    }
}

/// Dispatches on `problem.metric`.
pub fn solve(problem: &AllocationProblem) -> Result<AllocationResult, AllocationError> {
    match problem.metric {
        Metric::PseudoInverse => solve_pseudo_inverse(problem),
        Metric::Ft => solve_ft(problem),
        Metric::Fe => solve_fe(problem),
        Metric::Fb => solve_fb(problem),
    }
}

/// Bounded least squares on the allocation equality, torques scaled by the
/// mean arm so both kinds of residual weigh alike.
pub fn least_squares_fallback(problem: &AllocationProblem) -> AllocationResult {
    let n = problem.n_agents();
    let mean_arm = (0..n)
        .map(|i| problem.gamma[(0, i)].hypot(problem.gamma[(1, i)]))
        .sum::<f64>()
        / n as f64;
    let scale = Vector3::new(1.0 / mean_arm.max(1e-6), 1.0 / mean_arm.max(1e-6), 1.0);
    let w = DMatrix::from_fn(3, n, |r, c| problem.gamma[(r, c)] * scale[r]);
    let target = DVector::from_fn(3, |r, _| problem.rhs[r] * scale[r]);
    let qp = BoxQp {
        // tiny ridge keeps the Hessian strictly convex
        h: w.transpose() * &w + DMatrix::identity(n, n) * 1e-9,
        f: -(w.transpose() * &target),
        a: DMatrix::zeros(0, n),
        b: DVector::zeros(0),
        lower: DVector::zeros(n),
        upper: DVector::from_element(n, problem.t_max),
    };
    let sol = qp.solve(&DVector::zeros(n));
    let thrusts = sol.x.map(|t| t.clamp(0.0, problem.t_max));
    let objective = (&w * &thrusts - &target).norm_squared();
    result(problem, thrusts, objective, SolverStatus::Degraded)
}

/// Flight-side entry point: never fails. Infeasible problems fall back to
/// bounded least squares with a `Degraded` status.
pub fn allocate(problem: &AllocationProblem) -> AllocationResult {
    match solve(problem) {
        Ok(r) => r,
        Err(err) => {
            log::debug!("allocation fallback: {err}");
            least_squares_fallback(problem)
        }
    }
}

/// Yaw coupling of a bent rod, `ζ_i = γ_i (^sc_iy cos α_i - ^sc_ix sin α_i)`.
pub fn yaw_coupling(geometry: &StructureGeometry, flex: &FlexState) -> DVector<f64> {
    DVector::from_fn(geometry.n_agents(), |i, _| {
        let p = &geometry.agent_poses[i];
        let (sa, ca) = p.alpha.sin_cos();
        flex.agents[i].gamma * (p.y() * ca - p.x() * sa)
    })
}

/// Total yaw moment `ΣM = τ_z - Σ ζ_i T_i`, split equally and clamped to
/// `±moment_max` per agent.
pub fn distribute_yaw(
    tau_z: f64,
    thrusts: &DVector<f64>,
    geometry: &StructureGeometry,
    flex: &FlexState,
    moment_max: f64,
) -> DVector<f64> {
    let total = tau_z - yaw_coupling(geometry, flex).dot(thrusts);
    let n = thrusts.len();
    DVector::from_element(n, (total / n as f64).clamp(-moment_max, moment_max))
}
