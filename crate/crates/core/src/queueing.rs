//! Closed-form response times and the optimal load split for clusters of
//! M/G/1/PS servers.
//!
//! Group `i` holds `k_i` independent single-core servers of speed `mu_i`.
//! Under a split `p`, each server of group `i` sees Poisson traffic at rate
//! `lambda * p_i / k_i`, and by PS insensitivity its mean response time is
//! `1 / (mu_i - lambda * p_i / k_i)` whatever the service distribution.

use serde::Serialize;

use crate::cluster::{
    ArrivalRate, ClusterSpec, LoadSplit, QueueingError, Result, SplitSolution,
};

/// Which formula produced an optimal response time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Every group carries load; the all-active closed form is exact.
    ClosedForm,
    /// Some group is optimally idle; only the active-set solver applies.
    ActiveSet,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ClosedForm => "closed_form",
            Regime::ActiveSet => "active_set",
        }
    }
}

/// Offered load `lambda / sum(k_i * mu_i)`. Values at or above 1 are returned
/// as-is so callers can detect overload.
pub fn utilization(cluster: &ClusterSpec, rate: ArrivalRate) -> f64 {
    rate.value() / cluster.total_capacity()
}

/// Mean response time `sum_i p_i / (mu_i - lambda p_i / k_i)`.
///
/// Groups with `p_i == 0` contribute nothing. Fails with
/// [`QueueingError::Unstable`] if a loaded group would be saturated.
pub fn mean_response_time(
    cluster: &ClusterSpec,
    rate: ArrivalRate,
    split: &LoadSplit,
) -> Result<f64> {
    split.check_len(cluster)?;
    let lambda = rate.value();
    let mut total = 0.0;
    for (group_index, (g, &p)) in cluster.groups().iter().zip(split.probabilities()).enumerate() {
        if p == 0.0 {
            continue;
        }
        let per_server = lambda * p / f64::from(g.count);
        if per_server >= g.speed {
            return Err(QueueingError::Unstable { group_index });
        }
        total += p / (g.speed - per_server);
    }
    Ok(total)
}

/// Split proportional to group capacity, `p_i = k_i mu_i / sum_j k_j mu_j`.
pub fn proportional_split(cluster: &ClusterSpec) -> LoadSplit {
    let capacity = cluster.total_capacity();
    LoadSplit::from_raw(
        cluster
            .groups()
            .iter()
            .map(|g| g.capacity() / capacity)
            .collect(),
    )
}

/// Split that gives every individual server the same share, `p_i = k_i / sum_j k_j`.
/// This is the stationary split of a speed-unaware random dispatcher.
pub fn uniform_server_split(cluster: &ClusterSpec) -> LoadSplit {
    let servers = cluster.total_servers() as f64;
    LoadSplit::from_raw(
        cluster
            .groups()
            .iter()
            .map(|g| f64::from(g.count) / servers)
            .collect(),
    )
}

fn check_rate(cluster: &ClusterSpec, rate: ArrivalRate) -> Result<f64> {
    let lambda = rate.value();
    let capacity = cluster.total_capacity();
    if lambda >= capacity {
        return Err(QueueingError::Overloaded {
            rate: lambda,
            capacity,
        });
    }
    if lambda == 0.0 {
        return Err(QueueingError::DegenerateRate);
    }
    Ok(lambda)
}

/// Optimal mean response time assuming every group carries load:
///
/// `[2 sum_{i<j} k_i k_j sqrt(mu_i mu_j) - sum_i k_i mu_i sum_{j!=i} k_j + lambda sum_i k_i]
///  / [lambda (sum_i k_i mu_i - lambda)]`
///
/// Returns [`QueueingError::OutsideValidityRegion`] below some group's
/// activation threshold; use [`optimal_split`] there.
pub fn closed_form_optimal_t(cluster: &ClusterSpec, rate: ArrivalRate) -> Result<f64> {
    let lambda = check_rate(cluster, rate)?;
    let thresholds = activation_thresholds(cluster);
    if let Some(group_index) = thresholds.iter().position(|&t| t > lambda) {
        return Err(QueueingError::OutsideValidityRegion { group_index });
    }

    let groups = cluster.groups();
    let total_servers: f64 = groups.iter().map(|g| f64::from(g.count)).sum();
    let mut cross = 0.0;
    for (i, gi) in groups.iter().enumerate() {
        for gj in &groups[i + 1..] {
            cross += f64::from(gi.count) * f64::from(gj.count) * (gi.speed * gj.speed).sqrt();
        }
    }
    let spill: f64 = groups
        .iter()
        .map(|g| g.capacity() * (total_servers - f64::from(g.count)))
        .sum();
    let numerator = 2.0 * cross - spill + lambda * total_servers;
    let denominator = lambda * (cluster.total_capacity() - lambda);
    Ok(numerator / denominator)
}

/// Group indices sorted by decreasing speed; ties keep input order.
fn by_decreasing_speed(cluster: &ClusterSpec) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cluster.len()).collect();
    order.sort_by(|&a, &b| {
        cluster.groups()[b]
            .speed
            .total_cmp(&cluster.groups()[a].speed)
    });
    order
}

/// Arrival rate below which each group optimally receives no load.
///
/// Group `m` activates once the water level over the strictly faster groups
/// reaches its speed, at `sum_{j faster} k_j sqrt(mu_j) (sqrt(mu_j) - sqrt(mu_m))`.
/// Fastest groups get 0; equal speeds get equal thresholds.
pub fn activation_thresholds(cluster: &ClusterSpec) -> Vec<f64> {
    let groups = cluster.groups();
    groups
        .iter()
        .map(|gm| {
            let root_m = gm.speed.sqrt();
            groups
                .iter()
                .filter(|gj| gj.speed > gm.speed)
                .map(|gj| {
                    let root_j = gj.speed.sqrt();
                    f64::from(gj.count) * root_j * (root_j - root_m)
                })
                .sum()
        })
        .collect()
}

/// Which formula applies at `rate`: the closed form once every group is active.
pub fn regime(cluster: &ClusterSpec, rate: ArrivalRate) -> Regime {
    let max_threshold = activation_thresholds(cluster)
        .into_iter()
        .fold(0.0, f64::max);
    if rate.value() >= max_threshold {
        Regime::ClosedForm
    } else {
        Regime::ActiveSet
    }
}

/// Split minimizing mean response time (square-root rule with active-set
/// clamping).
///
/// Within the active set `A` each server of group `i` receives
/// `mu_i - sqrt(mu_i) * (sum_A k_j mu_j - lambda) / sum_A k_j sqrt(mu_j)`;
/// groups whose activation threshold is not below `lambda` get nothing.
pub fn optimal_split(cluster: &ClusterSpec, rate: ArrivalRate) -> Result<SplitSolution> {
    let lambda = check_rate(cluster, rate)?;
    let thresholds = activation_thresholds(cluster);
    let groups = cluster.groups();

    let active: Vec<usize> = by_decreasing_speed(cluster)
        .into_iter()
        .filter(|&i| thresholds[i] < lambda)
        .collect();
    let active_capacity: f64 = active.iter().map(|&i| groups[i].capacity()).sum();
    let active_root_capacity: f64 = active
        .iter()
        .map(|&i| f64::from(groups[i].count) * groups[i].speed.sqrt())
        .sum();
    let level = (active_capacity - lambda) / active_root_capacity;

    let mut probabilities = vec![0.0; cluster.len()];
    for &i in &active {
        let g = &groups[i];
        let per_server = (g.speed - g.speed.sqrt() * level).max(0.0);
        probabilities[i] = f64::from(g.count) * per_server / lambda;
    }
    let total: f64 = probabilities.iter().sum();
    probabilities.iter_mut().for_each(|p| *p /= total);
    let split = LoadSplit::from_raw(probabilities);
    let response_time = mean_response_time(cluster, rate, &split)?;
    Ok(SplitSolution::from_split(split, response_time))
}

/// Expands group probabilities into per-server weights `p_i / k_i`, group-major.
pub fn per_server_weights(cluster: &ClusterSpec, split: &LoadSplit) -> Vec<f64> {
    cluster
        .groups()
        .iter()
        .zip(split.probabilities())
        .flat_map(|(g, &p)| std::iter::repeat_n(p / f64::from(g.count), g.count as usize))
        .collect()
}
