//! Mean-one service requirement distributions.

use rand::Rng;
use rand_distr::{Distribution, Exp1, LogNormal};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Distribution of the work carried by one request, normalized analytically
/// to mean 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceDistribution {
    #[default]
    Exponential,
    Deterministic,
    /// `exp(N(-sigma^2 / 2, sigma^2))`.
    Lognormal { sigma: f64 },
    /// Pareto tail of exponent `shape` truncated to `[L, bound_ratio * L]`,
    /// with `L` solved for mean 1.
    BoundedPareto { shape: f64, bound_ratio: f64 },
}

impl ServiceDistribution {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            ServiceDistribution::Exponential | ServiceDistribution::Deterministic => Ok(()),
            ServiceDistribution::Lognormal { sigma } => {
                if sigma.is_finite() && sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(SimError::InvalidConfig(format!(
                        "lognormal sigma {sigma} must be finite and non-negative"
                    )))
                }
            }
            ServiceDistribution::BoundedPareto { shape, bound_ratio } => {
                if !(shape.is_finite() && shape > 0.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "bounded_pareto shape {shape} must be positive"
                    )));
                }
                if !(bound_ratio.is_finite() && bound_ratio > 1.0) {
                    return Err(SimError::InvalidConfig(format!(
                        "bounded_pareto bound_ratio {bound_ratio} must exceed 1"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Lower bound `L` of a bounded Pareto with mean 1.
    pub fn pareto_lower_bound(shape: f64, bound_ratio: f64) -> f64 {
        // mean / L for a bounded Pareto on [L, rL]
        let mean_over_lower = if (shape - 1.0).abs() < 1e-12 {
            bound_ratio * bound_ratio.ln() / (bound_ratio - 1.0)
        } else {
            shape / (shape - 1.0) * (1.0 - bound_ratio.powf(1.0 - shape))
                / (1.0 - bound_ratio.powf(-shape))
        };
        1.0 / mean_over_lower
    }

    /// Analytic mean (1 for every variant up to rounding).
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential | ServiceDistribution::Deterministic => 1.0,
            ServiceDistribution::Lognormal { sigma } => {
                let location = -0.5 * sigma * sigma;
                (location + 0.5 * sigma * sigma).exp()
            }
            ServiceDistribution::BoundedPareto { shape, bound_ratio } => {
                let lower = Self::pareto_lower_bound(shape, bound_ratio);
                self.pareto_moment(1.0, lower, shape, bound_ratio)
            }
        }
    }

    /// Analytic variance.
    pub fn variance(&self) -> f64 {
        match *self {
            ServiceDistribution::Exponential => 1.0,
            ServiceDistribution::Deterministic => 0.0,
            ServiceDistribution::Lognormal { sigma } => (sigma * sigma).exp() - 1.0,
            ServiceDistribution::BoundedPareto { shape, bound_ratio } => {
                let lower = Self::pareto_lower_bound(shape, bound_ratio);
                let m1 = self.pareto_moment(1.0, lower, shape, bound_ratio);
                self.pareto_moment(2.0, lower, shape, bound_ratio) - m1 * m1
            }
        }
    }

    /// `E[X^j]` for a bounded Pareto on `[L, rL]`.
    fn pareto_moment(&self, j: f64, lower: f64, shape: f64, ratio: f64) -> f64 {
        let upper = ratio * lower;
        let scale = shape * lower.powf(shape) / (1.0 - ratio.powf(-shape));
        if (j - shape).abs() < 1e-12 {
            scale * (upper / lower).ln()
        } else {
            scale * (upper.powf(j - shape) - lower.powf(j - shape)) / (j - shape)
        }
    }

    /// One strictly positive draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = match *self {
            ServiceDistribution::Exponential => Exp1.sample(rng),
            ServiceDistribution::Deterministic => 1.0,
            ServiceDistribution::Lognormal { sigma } => {
                if sigma == 0.0 {
                    1.0
                } else {
                    LogNormal::new(-0.5 * sigma * sigma, sigma)
                        .expect("validated sigma")
                        .sample(rng)
                }
            }
            ServiceDistribution::BoundedPareto { shape, bound_ratio } => {
                let lower = Self::pareto_lower_bound(shape, bound_ratio);
                let u: f64 = rng.random();
                lower * (1.0 - u * (1.0 - bound_ratio.powf(-shape))).powf(-1.0 / shape)
            }
        };
        x.max(f64::MIN_POSITIVE)
    }

    pub fn label(&self) -> &'static str {
        match self {
            ServiceDistribution::Exponential => "exponential",
            ServiceDistribution::Deterministic => "deterministic",
            ServiceDistribution::Lognormal { .. } => "lognormal",
            ServiceDistribution::BoundedPareto { .. } => "bounded_pareto",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Midpoint-rule integral of `x^j f(x)` over the truncated support,
    /// using the raw (unnormalized-mean) Pareto density.
    fn pareto_moment_by_quadrature(j: i32, shape: f64, ratio: f64) -> f64 {
        let lower = ServiceDistribution::pareto_lower_bound(shape, ratio);
        let upper = lower * ratio;
        let norm = 1.0 - (lower / upper).powf(shape);
        // integrate in log-space for accuracy over the wide support
        let steps = 200_000;
        let (a, b) = (lower.ln(), upper.ln());
        let h = (b - a) / steps as f64;
        (0..steps)
            .map(|i| {
                let x = (a + (i as f64 + 0.5) * h).exp();
                let pdf = shape * lower.powf(shape) * x.powf(-shape - 1.0) / norm;
                x.powi(j) * pdf * x * h
            })
            .sum()
    }

    #[test]
    fn analytic_means_are_one() {
        for dist in [
            ServiceDistribution::Exponential,
            ServiceDistribution::Deterministic,
            ServiceDistribution::Lognormal { sigma: 1.0 },
            ServiceDistribution::BoundedPareto { shape: 1.5, bound_ratio: 100.0 },
            ServiceDistribution::BoundedPareto { shape: 1.0, bound_ratio: 50.0 },
            ServiceDistribution::BoundedPareto { shape: 2.0, bound_ratio: 10.0 },
        ] {
            assert!((dist.mean() - 1.0).abs() < 1e-9, "{dist:?}");
        }
    }

    #[test]
    fn pareto_normalization_matches_quadrature() {
        for (shape, ratio) in [(1.5, 100.0), (1.0, 50.0), (2.5, 20.0)] {
            let m1 = pareto_moment_by_quadrature(1, shape, ratio);
            assert!((m1 - 1.0).abs() < 1e-6, "shape {shape}: {m1}");
            let m2 = pareto_moment_by_quadrature(2, shape, ratio);
            let dist = ServiceDistribution::BoundedPareto { shape, bound_ratio: ratio };
            assert!((m2 - 1.0 - dist.variance()).abs() / dist.variance() < 1e-6);
        }
    }

    #[test]
    fn deterministic_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(ServiceDistribution::Deterministic.sample(&mut rng), 1.0);
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean: f64 = (0..n)
            .map(|_| ServiceDistribution::Exponential.sample(&mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.004, "{mean}");
    }

    #[test]
    fn bounded_pareto_sample_mean() {
        let dist = ServiceDistribution::BoundedPareto { shape: 1.5, bound_ratio: 100.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let lower = ServiceDistribution::pareto_lower_bound(1.5, 100.0);
        assert!(draws.iter().all(|&x| x >= lower && x <= 100.0 * lower));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (dist.variance() / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean} se {se}");
    }

    #[test]
    fn lognormal_samples_positive_with_mean_one() {
        let dist = ServiceDistribution::Lognormal { sigma: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        assert!(draws.iter().all(|&x| x > 0.0 && x.is_finite()));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (dist.variance() / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn validation() {
        assert!(ServiceDistribution::Lognormal { sigma: -1.0 }.validate().is_err());
        assert!(ServiceDistribution::BoundedPareto { shape: 1.5, bound_ratio: 1.0 }
            .validate()
            .is_err());
        assert!(ServiceDistribution::BoundedPareto { shape: 0.0, bound_ratio: 10.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn parses_tagged_json() {
        let d: ServiceDistribution =
            serde_json::from_str(r#"{"kind":"lognormal","sigma":1.0}"#).unwrap();
        assert_eq!(d, ServiceDistribution::Lognormal { sigma: 1.0 });
        let d: ServiceDistribution = serde_json::from_str(r#"{"kind":"exponential"}"#).unwrap();
        assert_eq!(d, ServiceDistribution::Exponential);
        assert!(serde_json::from_str::<ServiceDistribution>(r#"{"kind":"lognormal","sigma":1,"mu":0}"#).is_err());
    }
}
