//! Cluster description types shared by the analytic and simulation layers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the normalization of a probability vector.
pub const SPLIT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueingError {
    #[error("group count must be at least 1 (group {index})")]
    InvalidCount { index: usize },
    #[error("group {index} speed {speed} must be positive and finite")]
    InvalidSpeed { index: usize, speed: f64 },
    #[error("cluster must contain at least one group")]
    EmptyCluster,
    #[error("arrival rate {0} must be non-negative and finite")]
    InvalidRate(f64),
    #[error("load split invalid: {0}")]
    InvalidSplit(String),
    #[error("split saturates group {group_index}")]
    Unstable { group_index: usize },
    #[error("arrival rate {rate} meets or exceeds cluster capacity {capacity}")]
    Overloaded { rate: f64, capacity: f64 },
    #[error("closed form does not apply: group {group_index} is inactive at this rate")]
    OutsideValidityRegion { group_index: usize },
    #[error("arrival rate is zero; no split is meaningful")]
    DegenerateRate,
    #[error("oracle resolution {0} must lie in (0, 0.01]")]
    InvalidResolution(f64),
}

pub type Result<T> = std::result::Result<T, QueueingError>;

/// A set of identical single-core processor-sharing servers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: u32,
    /// Requests per second served by one server of this group.
    pub speed: f64,
}

impl GroupSpec {
    pub fn new(count: u32, speed: f64) -> Self {
        Self { count, speed }
    }

    /// Aggregate service capacity `count * speed`.
    pub fn capacity(&self) -> f64 {
        f64::from(self.count) * self.speed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSpec {
    groups: Vec<GroupSpec>,
}

impl ClusterSpec {
    pub fn new(groups: Vec<GroupSpec>) -> Result<Self> {
        if groups.is_empty() {
            return Err(QueueingError::EmptyCluster);
        }
        for (index, g) in groups.iter().enumerate() {
            if g.count == 0 {
                return Err(QueueingError::InvalidCount { index });
            }
            if !(g.speed.is_finite() && g.speed > 0.0) {
                return Err(QueueingError::InvalidSpeed {
                    index,
                    speed: g.speed,
                });
            }
        }
        Ok(Self { groups })
    }

    /// Convenience constructor from `(count, speed)` pairs.
    pub fn from_pairs(pairs: &[(u32, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(k, mu)| GroupSpec::new(k, mu)).collect())
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total_capacity(&self) -> f64 {
        self.groups.iter().map(GroupSpec::capacity).sum()
    }

    pub fn total_servers(&self) -> usize {
        self.groups.iter().map(|g| g.count as usize).sum()
    }

    /// Speed of every individual server, group-major.
    pub fn server_speeds(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.speed, g.count as usize))
            .collect()
    }

    /// Group index of every individual server, group-major.
    pub fn server_groups(&self) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(i, g)| std::iter::repeat_n(i, g.count as usize))
            .collect()
    }
}

impl<'de> Deserialize<'de> for ClusterSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let groups = Vec::<GroupSpec>::deserialize(d)?;
        ClusterSpec::new(groups).map_err(serde::de::Error::custom)
    }
}

/// Total cluster request rate in requests per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct ArrivalRate(f64);

impl ArrivalRate {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(Self(lambda))
        } else {
            Err(QueueingError::InvalidRate(lambda))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Probability that an arriving request is routed to each group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSplit {
    probabilities: Vec<f64>,
}

impl LoadSplit {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(QueueingError::InvalidSplit("empty".into()));
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(QueueingError::InvalidSplit(format!(
                "entry {i} = {p} outside [0, 1]"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SPLIT_SUM_TOLERANCE {
            return Err(QueueingError::InvalidSplit(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Validates the split and checks it has one entry per group of `cluster`.
    pub fn for_cluster(cluster: &ClusterSpec, probabilities: Vec<f64>) -> Result<Self> {
        let split = Self::new(probabilities)?;
        split.check_len(cluster)?;
        Ok(split)
    }

    pub(crate) fn check_len(&self, cluster: &ClusterSpec) -> Result<()> {
        if self.probabilities.len() != cluster.len() {
            return Err(QueueingError::InvalidSplit(format!(
                "{} entries for {} groups",
                self.probabilities.len(),
                cluster.len()
            )));
        }
        Ok(())
    }

    /// Builds a split without validation. Callers guarantee the invariants.
    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Largest absolute coordinate difference to `other`.
    pub fn max_abs_diff(&self, other: &LoadSplit) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// An optimal (or oracle-optimal) split together with its response time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSolution {
    pub split: LoadSplit,
    /// Mean response time in seconds at `split`.
    pub response_time: f64,
    /// Indices of groups with strictly positive probability, ascending.
    pub active_groups: Vec<usize>,
}

impl SplitSolution {
    pub(crate) fn from_split(split: LoadSplit, response_time: f64) -> Self {
        let active_groups = split
            .probabilities()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
            .collect();
        Self {
            split,
            response_time,
            active_groups,
        }
    }
}
