//! Dispatch policies: random, round-robin, smooth weighted round-robin,
//! power-of-D, and their variants weighted by the optimal load split.
//!
//! Servers are addressed by a global index over the flattened cluster
//! (group-major). Every random draw goes through a seeded ChaCha stream and
//! integer ranges are sampled as `u64`, so a dispatch sequence is the same on
//! every platform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ArrivalRate, ClusterSpec, QueueingError, SPLIT_SUM_TOLERANCE};
use crate::queueing::{optimal_split, per_server_weights, proportional_split};

pub const DEFAULT_QUANTIZATION: u32 = 1024;

/// Global index of one server in the flattened cluster.
pub type ServerId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("every samplable server has weight 0")]
    NoEligibleServer,
    #[error("d = {d} must be between 1 and the server count {servers}")]
    InvalidD { d: usize, servers: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("quantization must be positive")]
    InvalidQuantization,
    #[error("queue view has {got} entries for {servers} servers")]
    ViewMismatch { got: usize, servers: usize },
    #[error("unknown policy name {0:?}")]
    UnknownPolicy(String),
    #[error("policy is not a weighted round-robin")]
    NotWeightedRoundRobin,
    #[error(transparent)]
    Queueing(#[from] QueueingError),
}

pub type Result<T> = std::result::Result<T, PolicyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    Rnd,
    Rr,
    WeightedRr,
    Pod,
    HaloRnd,
    HaloRr,
    HaloPod,
}

/// Policy names accepted on the command line and in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Rnd,
    Rr,
    Wrr,
    PodBase,
    PodJsqr,
    HaloRnd,
    HaloRr,
    HaloPod,
}

impl PolicyName {
    pub const ALL: [PolicyName; 8] = [
        PolicyName::Rnd,
        PolicyName::Rr,
        PolicyName::Wrr,
        PolicyName::PodBase,
        PolicyName::PodJsqr,
        PolicyName::HaloRnd,
        PolicyName::HaloRr,
        PolicyName::HaloPod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Rnd => "rnd",
            PolicyName::Rr => "rr",
            PolicyName::Wrr => "wrr",
            PolicyName::PodBase => "pod_base",
            PolicyName::PodJsqr => "pod_jsqr",
            PolicyName::HaloRnd => "halo_rnd",
            PolicyName::HaloRr => "halo_rr",
            PolicyName::HaloPod => "halo_pod",
        }
    }

    pub fn is_halo(self) -> bool {
        matches!(
            self,
            PolicyName::HaloRnd | PolicyName::HaloRr | PolicyName::HaloPod
        )
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyName {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

/// A dispatch policy and its parameters, before any runtime state exists.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub servers: usize,
    /// Candidates sampled per request (POD family).
    pub d: Option<usize>,
    /// Per-server probabilities (weighted kinds).
    pub weights: Option<Vec<f64>>,
    /// Denominator for integer weights in the round-robin kinds.
    pub quantization: u32,
}

impl PolicyConfig {
    fn plain(kind: PolicyKind, servers: usize) -> Self {
        Self {
            kind,
            servers,
            d: None,
            weights: None,
            quantization: DEFAULT_QUANTIZATION,
        }
    }

    fn weighted(kind: PolicyKind, weights: Vec<f64>) -> Self {
        Self {
            kind,
            servers: weights.len(),
            d: None,
            weights: Some(weights),
            quantization: DEFAULT_QUANTIZATION,
        }
    }

    pub fn rnd(servers: usize) -> Self {
        Self::plain(PolicyKind::Rnd, servers)
    }

    pub fn rr(servers: usize) -> Self {
        Self::plain(PolicyKind::Rr, servers)
    }

    pub fn pod(servers: usize, d: usize) -> Self {
        Self {
            d: Some(d),
            ..Self::plain(PolicyKind::Pod, servers)
        }
    }

    pub fn weighted_rr(weights: Vec<f64>) -> Self {
        Self::weighted(PolicyKind::WeightedRr, weights)
    }

    pub fn halo_rnd(weights: Vec<f64>) -> Self {
        Self::weighted(PolicyKind::HaloRnd, weights)
    }

    pub fn halo_rr(weights: Vec<f64>) -> Self {
        Self::weighted(PolicyKind::HaloRr, weights)
    }

    pub fn halo_pod(weights: Vec<f64>, d: usize) -> Self {
        Self {
            d: Some(d),
            ..Self::weighted(PolicyKind::HaloPod, weights)
        }
    }

    pub fn with_quantization(mut self, quantization: u32) -> Self {
        self.quantization = quantization;
        self
    }

    /// Resolves a named policy against a cluster. HALO variants take their
    /// weights from the optimal split at `rate`; `wrr` uses capacity-proportional
    /// weights.
    pub fn for_policy(name: PolicyName, cluster: &ClusterSpec, rate: ArrivalRate) -> Result<Self> {
        let servers = cluster.total_servers();
        let halo_weights = || -> Result<Vec<f64>> {
            let solution = optimal_split(cluster, rate)?;
            Ok(per_server_weights(cluster, &solution.split))
        };
        let config = match name {
            PolicyName::Rnd => Self::rnd(servers),
            PolicyName::Rr => Self::rr(servers),
            PolicyName::Wrr => {
                Self::weighted_rr(per_server_weights(cluster, &proportional_split(cluster)))
            }
            PolicyName::PodBase => Self::pod(servers, 2.min(servers)),
            PolicyName::PodJsqr => Self::pod(servers, servers),
            PolicyName::HaloRnd => Self::halo_rnd(halo_weights()?),
            PolicyName::HaloRr => Self::halo_rr(halo_weights()?),
            PolicyName::HaloPod => Self::halo_pod(halo_weights()?, 2.min(servers)),
        };
        config.validate()?;
        Ok(config)
    }

    /// Long-run probability that a request goes to each server, for the kinds
    /// whose routing ignores queue state. `None` for RR and POD kinds.
    pub fn stationary_weights(&self) -> Option<Vec<f64>> {
        match self.kind {
            PolicyKind::Rnd => Some(vec![1.0 / self.servers as f64; self.servers]),
            PolicyKind::HaloRnd => self.weights.clone(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.servers == 0 {
            return Err(PolicyError::InvalidD { d: 0, servers: 0 });
        }
        if self.quantization == 0 {
            return Err(PolicyError::InvalidQuantization);
        }
        if let Some(d) = self.d {
            if d == 0 || d > self.servers {
                return Err(PolicyError::InvalidD {
                    d,
                    servers: self.servers,
                });
            }
        }
        let needs_weights = matches!(
            self.kind,
            PolicyKind::WeightedRr | PolicyKind::HaloRnd | PolicyKind::HaloRr | PolicyKind::HaloPod
        );
        let needs_d = matches!(self.kind, PolicyKind::Pod | PolicyKind::HaloPod);
        if needs_d && self.d.is_none() {
            return Err(PolicyError::InvalidD {
                d: 0,
                servers: self.servers,
            });
        }
        match (&self.weights, needs_weights) {
            (None, true) => Err(PolicyError::InvalidWeights("missing".into())),
            (Some(w), _) => {
                if w.len() != self.servers {
                    return Err(PolicyError::InvalidWeights(format!(
                        "{} weights for {} servers",
                        w.len(),
                        self.servers
                    )));
                }
                if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(PolicyError::InvalidWeights("negative or non-finite".into()));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > SPLIT_SUM_TOLERANCE {
                    return Err(PolicyError::InvalidWeights(format!("sum to {sum}")));
                }
                Ok(())
            }
            (None, false) => Ok(()),
        }
    }
}

/// Smooth weighted round-robin over integer weights summing to the
/// quantization denominator. Each step adds every weight to its score, picks
/// the highest score (lowest index on ties) and subtracts the total from it.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothWrr {
    weights: Vec<i64>,
    scores: Vec<i64>,
    total: i64,
}

impl SmoothWrr {
    pub fn new(weights: &[f64], quantization: u32) -> Self {
        let weights = quantize(weights, quantization);
        Self {
            scores: vec![0; weights.len()],
            total: i64::from(quantization),
            weights,
        }
    }

    pub fn integer_weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn scores(&self) -> &[i64] {
        &self.scores
    }

    pub fn next_server(&mut self) -> ServerId {
        for (score, w) in self.scores.iter_mut().zip(&self.weights) {
            *score += w;
        }
        let mut pick = 0;
        for i in 1..self.scores.len() {
            if self.scores[i] > self.scores[pick] {
                pick = i;
            }
        }
        self.scores[pick] -= self.total;
        pick
    }
}

/// Largest-remainder rounding of `weights * quantization` to integers that
/// sum exactly to `quantization`. Ties in the remainder go to the lower index.
fn quantize(weights: &[f64], quantization: u32) -> Vec<i64> {
    let q = f64::from(quantization);
    let scaled: Vec<f64> = weights.iter().map(|w| w * q).collect();
    let mut ints: Vec<i64> = scaled.iter().map(|s| s.floor() as i64).collect();
    let assigned: i64 = ints.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = i64::from(quantization) - assigned;
    for &i in order.iter().cycle().take(order.len().max(1) * 2) {
        if remaining <= 0 {
            break;
        }
        ints[i] += 1;
        remaining -= 1;
    }
    ints
}

/// Per-server sampling by inverse CDF over cumulative weights.
#[derive(Debug, Clone, PartialEq)]
struct WeightedSampler {
    weights: Vec<f64>,
}

impl WeightedSampler {
    /// Draws one index among `eligible` in proportion to weight, or `None`
    /// when all eligible weights are zero.
    fn draw(&self, rng: &mut ChaCha8Rng, eligible: &[bool]) -> Option<ServerId> {
        let total: f64 = self
            .weights
            .iter()
            .zip(eligible)
            .filter(|(_, &e)| e)
            .map(|(w, _)| w)
            .sum();
        if total <= 0.0 {
            return None;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = None;
        for (i, (&w, &e)) in self.weights.iter().zip(eligible).enumerate() {
            if !e || w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(i);
            if target < acc {
                return Some(i);
            }
        }
        last
    }
}

fn uniform_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n as u64) as usize
}

/// Runtime state of one dispatcher. Not shared between threads.
#[derive(Debug, Clone)]
pub struct DispatcherState {
    policy: PolicyConfig,
    rr_cursor: usize,
    wrr: Option<SmoothWrr>,
    sampler: Option<WeightedSampler>,
    rng: ChaCha8Rng,
    scratch: Vec<usize>,
}

impl DispatcherState {
    pub fn new(policy: PolicyConfig, rng: ChaCha8Rng) -> Result<Self> {
        policy.validate()?;
        let wrr = match policy.kind {
            PolicyKind::WeightedRr | PolicyKind::HaloRr => Some(SmoothWrr::new(
                policy.weights.as_deref().unwrap_or_default(),
                policy.quantization,
            )),
            _ => None,
        };
        let sampler = match policy.kind {
            PolicyKind::HaloRnd | PolicyKind::HaloPod => Some(WeightedSampler {
                weights: policy.weights.clone().unwrap_or_default(),
            }),
            _ => None,
        };
        Ok(Self {
            scratch: (0..policy.servers).collect(),
            policy,
            rr_cursor: 0,
            wrr,
            sampler,
            rng,
        })
    }

    pub fn from_seed(policy: PolicyConfig, seed: u64) -> Result<Self> {
        Self::new(policy, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn rr_cursor(&self) -> usize {
        self.rr_cursor
    }

    pub fn set_rr_cursor(&mut self, cursor: usize) {
        self.rr_cursor = cursor % self.policy.servers;
    }

    pub fn wrr(&self) -> Option<&SmoothWrr> {
        self.wrr.as_ref()
    }

    /// Picks the server for the next request. `jobs_in_service` holds the
    /// current number of in-progress requests at every server.
    pub fn dispatch(&mut self, jobs_in_service: &[usize]) -> Result<ServerId> {
        let servers = self.policy.servers;
        if jobs_in_service.len() != servers {
            return Err(PolicyError::ViewMismatch {
                got: jobs_in_service.len(),
                servers,
            });
        }
        match self.policy.kind {
            PolicyKind::Rnd => Ok(uniform_index(&mut self.rng, servers)),
            PolicyKind::Rr => {
                let pick = self.rr_cursor;
                self.rr_cursor = (self.rr_cursor + 1) % servers;
                Ok(pick)
            }
            PolicyKind::WeightedRr | PolicyKind::HaloRr => {
                let wrr = self.wrr.as_mut().expect("round-robin state");
                if wrr.weights.iter().all(|&w| w == 0) {
                    return Err(PolicyError::NoEligibleServer);
                }
                Ok(wrr.next_server())
            }
            PolicyKind::HaloRnd => {
                let sampler = self.sampler.as_ref().expect("sampler");
                sampler
                    .draw(&mut self.rng, &vec![true; servers])
                    .ok_or(PolicyError::NoEligibleServer)
            }
            PolicyKind::Pod | PolicyKind::HaloPod => {
                let candidates = self.draw_candidates()?;
                Ok(self.fewest_jobs(&candidates, jobs_in_service))
            }
        }
    }

    /// The candidate set a POD-family dispatch would compare, drawn from the
    /// same stream. Fails for other kinds.
    pub fn draw_candidates(&mut self) -> Result<Vec<ServerId>> {
        let d = self.policy.d.unwrap_or(1);
        match self.policy.kind {
            PolicyKind::Pod => Ok(self.sample_uniform_candidates(d)),
            PolicyKind::HaloPod => self.sample_weighted_candidates(d),
            _ => Err(PolicyError::InvalidD {
                d: 0,
                servers: self.policy.servers,
            }),
        }
    }

    /// `d` distinct servers, uniformly without replacement (partial Fisher-Yates).
    fn sample_uniform_candidates(&mut self, d: usize) -> Vec<ServerId> {
        let n = self.scratch.len();
        for i in 0..d {
            let j = i + uniform_index(&mut self.rng, n - i);
            self.scratch.swap(i, j);
        }
        self.scratch[..d].to_vec()
    }

    /// Up to `d` distinct servers drawn successively in proportion to weight.
    /// Zero-weight servers are never drawn.
    fn sample_weighted_candidates(&mut self, d: usize) -> Result<Vec<ServerId>> {
        let sampler = self.sampler.as_ref().expect("sampler");
        let mut eligible = vec![true; self.policy.servers];
        let mut picked = Vec::with_capacity(d);
        while picked.len() < d {
            match sampler.draw(&mut self.rng, &eligible) {
                Some(i) => {
                    eligible[i] = false;
                    picked.push(i);
                }
                None => break,
            }
        }
        if picked.is_empty() {
            return Err(PolicyError::NoEligibleServer);
        }
        Ok(picked)
    }

    /// Least-occupied candidate; ties broken uniformly at random.
    fn fewest_jobs(&mut self, candidates: &[ServerId], jobs: &[usize]) -> ServerId {
        let least = candidates.iter().map(|&s| jobs[s]).min().unwrap_or(0);
        let tied: Vec<ServerId> = candidates
            .iter()
            .copied()
            .filter(|&s| jobs[s] == least)
            .collect();
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[uniform_index(&mut self.rng, tied.len())]
        }
    }
}

/// Builds a ready-to-use dispatcher for a named policy.
pub fn build_policy(
    name: PolicyName,
    cluster: &ClusterSpec,
    rate: ArrivalRate,
    seed: u64,
) -> Result<DispatcherState> {
    DispatcherState::from_seed(PolicyConfig::for_policy(name, cluster, rate)?, seed)
}

/// Fraction of the first `steps` dispatches a weighted round-robin sends to
/// each server. Runs on a copy; `state` is untouched.
pub fn wrr_sequence_fractions(state: &DispatcherState, steps: usize) -> Result<Vec<f64>> {
    let mut wrr = state.wrr.clone().ok_or(PolicyError::NotWeightedRoundRobin)?;
    let mut counts = vec![0usize; wrr.weights.len()];
    for _ in 0..steps {
        counts[wrr.next_server()] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / steps as f64)
        .collect())
}
