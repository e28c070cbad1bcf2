//! The analyze, validate, split and simulate commands, as library functions.

use std::fmt::Write as _;

use halo_core::{
    closed_form_optimal_t, mean_response_time, optimal_split, oracle_optimal_split,
    proportional_split, regime, run_simulation, uniform_server_split, utilization, ArrivalRate,
    ClusterSpec, LoadSplit, PolicyConfig, PolicyKind, PolicyName, QueueingError, Regime,
    SimError, SplitSolution,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::table::{AnalyzeRow, SweepRow};

/// Allowed relative gap between the closed form (or solver) and the oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-6;
/// Slack when checking that the optimum does not exceed the proportional split.
pub const ORDERING_SLACK: f64 = 1e-9;
pub const DEFAULT_RESOLUTION: f64 = 1e-3;
/// Prefix of the error note on cells whose queues diverge.
pub const SATURATED: &str = "SaturatedRun";

/// True when the row failed because a queue diverged.
pub fn is_saturated(row: &SweepRow) -> bool {
    row.error.as_deref().is_some_and(|e| e.starts_with(SATURATED))
}

fn rate(lambda: f64) -> ArrivalRate {
    ArrivalRate::new(lambda).expect("validated arrival rate")
}

/// Optimal response time at `lambda`: the closed form when every group is
/// active, the active-set solver otherwise.
pub fn optimal_response(cluster: &ClusterSpec, lambda: f64) -> Result<(f64, Regime), QueueingError> {
    let r = rate(lambda);
    match regime(cluster, r) {
        Regime::ClosedForm => Ok((closed_form_optimal_t(cluster, r)?, Regime::ClosedForm)),
        Regime::ActiveSet => Ok((optimal_split(cluster, r)?.response_time, Regime::ActiveSet)),
    }
}

/// Response time at the proportional split next to the optimum, per lambda.
pub fn analyze(config: &ExperimentConfig) -> Result<Vec<AnalyzeRow>, QueueingError> {
    let prop = proportional_split(&config.cluster);
    config
        .lambdas
        .iter()
        .map(|&lambda| {
            let (t_opt, regime) = optimal_response(&config.cluster, lambda)?;
            Ok(AnalyzeRow {
                scenario: config.label.clone(),
                lambda,
                rho: utilization(&config.cluster, rate(lambda)),
                t_prop: mean_response_time(&config.cluster, rate(lambda), &prop)?,
                t_opt,
                regime: regime.as_str().to_string(),
            })
        })
        .collect()
}

/// One lambda of the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub lambda: f64,
    pub regime: Regime,
    pub t_prop: f64,
    pub t_oracle: f64,
    pub t_solver: f64,
    /// `None` outside the closed form's validity region.
    pub t_closed: Option<f64>,
    pub ordering_ok: bool,
    pub closed_ok: Option<bool>,
    pub solver_ok: bool,
}

impl ValidationRow {
    pub fn passed(&self) -> bool {
        self.ordering_ok && self.solver_ok && self.closed_ok.unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub scenario: String,
    pub resolution: f64,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ValidationRow::passed)
    }

    /// Fixed-width PASS/FAIL table.
    pub fn render(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "validate {} (oracle resolution {:e}, tolerance {:e})",
            self.scenario, self.resolution, ORACLE_TOLERANCE
        );
        let _ = writeln!(
            out,
            "{:>10} {:>12} {:>14} {:>14} {:>14} {:>14}  {:<8} {:<8} {:<8} result",
            "lambda", "regime", "T_prop", "T_oracle", "T_solver", "T_closed", "order", "closed", "solver"
        );
        for r in &self.rows {
            let closed = r
                .t_closed
                .map(|t| format!("{t:.9}"))
                .unwrap_or_else(|| "n/a".to_string());
            let _ = writeln!(
                out,
                "{:>10.4} {:>12} {:>14.9} {:>14.9} {:>14.9} {:>14}  {:<8} {:<8} {:<8} {}",
                r.lambda,
                r.regime.as_str(),
                r.t_prop,
                r.t_oracle,
                r.t_solver,
                closed,
                verdict(r.ordering_ok),
                r.closed_ok.map(verdict).unwrap_or("n/a"),
                verdict(r.solver_ok),
                verdict(r.passed()),
            );
        }
        let _ = writeln!(out, "overall: {}", verdict(self.passed()));
        out
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Checks the closed form and the active-set solver against the brute-force
/// oracle at every configured lambda, and that the optimum never exceeds the
/// proportional split's response time.
pub fn validate(config: &ExperimentConfig, resolution: f64) -> Result<ValidationReport, QueueingError> {
    let cluster = &config.cluster;
    let prop = proportional_split(cluster);
    let rows = config
        .lambdas
        .iter()
        .map(|&lambda| {
            let r = rate(lambda);
            let oracle = oracle_optimal_split(cluster, r, resolution)?;
            let solver = optimal_split(cluster, r)?;
            let t_prop = mean_response_time(cluster, r, &prop)?;
            let t_closed = match closed_form_optimal_t(cluster, r) {
                Ok(t) => Some(t),
                Err(QueueingError::OutsideValidityRegion { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(ValidationRow {
                lambda,
                regime: regime(cluster, r),
                t_prop,
                t_oracle: oracle.response_time,
                t_solver: solver.response_time,
                t_closed,
                ordering_ok: oracle.response_time <= t_prop + ORDERING_SLACK,
                closed_ok: t_closed
                    .map(|t| relative_gap(t, oracle.response_time) < ORACLE_TOLERANCE),
                solver_ok: relative_gap(solver.response_time, oracle.response_time)
                    < ORACLE_TOLERANCE,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ValidationReport {
        scenario: config.label.clone(),
        resolution,
        rows,
    })
}

/// Optimal split at one lambda, formatted for the terminal.
pub fn describe_split(cluster: &ClusterSpec, lambda: f64) -> Result<String, QueueingError> {
    let r = ArrivalRate::new(lambda)?;
    let SplitSolution {
        split,
        response_time,
        active_groups,
    } = optimal_split(cluster, r)?;
    let mut out = String::new();
    let _ = writeln!(out, "lambda: {lambda}");
    let _ = writeln!(out, "rho: {}", utilization(cluster, r));
    let _ = writeln!(out, "regime: {}", regime(cluster, r).as_str());
    let _ = writeln!(out, "T: {response_time:.12}");
    let _ = writeln!(out, "active_groups: {active_groups:?}");
    for (i, (g, p)) in cluster.groups().iter().zip(split.probabilities()).enumerate() {
        let _ = writeln!(
            out,
            "group {i}: count={} speed={} p={p:.12} per_server_rate={:.12}",
            g.count,
            g.speed,
            lambda * p / f64::from(g.count)
        );
    }
    Ok(out)
}

/// Group split a queue-blind policy converges to, if it has one.
fn long_run_split(cluster: &ClusterSpec, policy: &PolicyConfig) -> Option<LoadSplit> {
    let per_server = match policy.kind {
        PolicyKind::Rnd | PolicyKind::Rr => return Some(uniform_server_split(cluster)),
        PolicyKind::HaloRnd | PolicyKind::WeightedRr | PolicyKind::HaloRr => {
            policy.weights.clone()?
        }
        PolicyKind::Pod | PolicyKind::HaloPod => return None,
    };
    let mut groups = vec![0.0; cluster.len()];
    for (g, w) in cluster.server_groups().into_iter().zip(per_server) {
        groups[g] += w;
    }
    let total: f64 = groups.iter().sum();
    groups.iter_mut().for_each(|p| *p = (*p / total).min(1.0));
    LoadSplit::new(groups).ok()
}

/// Simulates one (lambda, policy) cell.
pub fn simulate_cell(config: &ExperimentConfig, lambda: f64, name: PolicyName) -> SweepRow {
    let cluster = &config.cluster;
    let r = rate(lambda);
    let mut row = SweepRow {
        scenario: config.label.clone(),
        policy: name.as_str().to_string(),
        lambda,
        rho: utilization(cluster, r),
        analytic_t: None,
        simulated_t: None,
        ci_halfwidth: None,
        jobs_counted: None,
        seed: config.sim.seed,
        regime: name.is_halo().then(|| regime(cluster, r).as_str().to_string()),
        error: None,
    };

    let policy = match PolicyConfig::for_policy(name, cluster, r) {
        Ok(p) => p,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    if let Some(split) = long_run_split(cluster, &policy) {
        match mean_response_time(cluster, r, &split) {
            Ok(t) => {
                if matches!(name, PolicyName::Rnd | PolicyName::HaloRnd) {
                    row.analytic_t = Some(t);
                }
            }
            Err(QueueingError::Unstable { group_index }) => {
                row.error = Some(format!(
                    "{SATURATED}: group {group_index} is saturated under this policy's split"
                ));
                return row;
            }
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }

    match run_simulation(cluster, r, &config.service, &policy, &config.sim) {
        Ok(result) => {
            row.simulated_t = Some(result.mean_response_time);
            row.ci_halfwidth = Some(result.ci_halfwidth);
            row.jobs_counted = Some(result.jobs_counted as u64);
        }
        Err(e @ SimError::SaturatedRun { .. }) => row.error = Some(format!("{SATURATED}: {e}")),
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Every (lambda, policy) cell, in config order (lambda-major). Cells run in
/// parallel; order and values do not depend on scheduling.
pub fn simulate(config: &ExperimentConfig) -> Vec<SweepRow> {
    let cells: Vec<(f64, PolicyName)> = config
        .lambdas
        .iter()
        .flat_map(|&l| config.policies.iter().map(move |&p| (l, p)))
        .collect();
    cells
        .par_iter()
        .map(|&(lambda, name)| simulate_cell(config, lambda, name))
        .collect()
}
