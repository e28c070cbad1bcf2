use statrs::distribution::{ContinuousCDF, StudentsT};

use super::SimError;

/// Two-sided 95% Student-t critical value with `df` degrees of freedom.
pub fn t_critical_95(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Sample mean and 95% Student-t confidence halfwidth of independent
/// replication means.
pub fn summarize(replication_means: &[f64]) -> Result<(f64, f64), SimError> {
    let n = replication_means.len();
    if n < 2 {
        return Err(SimError::InsufficientReplications(n));
    }
    let mean = replication_means.iter().sum::<f64>() / n as f64;
    let var = replication_means
        .iter()
        .map(|x| (x - mean).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let halfwidth = t_critical_95(n - 1) * (var / n as f64).sqrt();
    Ok((mean, halfwidth))
}

/// Splits one run's observations into `batches` contiguous batches (dropping
/// the remainder) and summarizes the batch means.
pub fn batch_means(observations: &[f64], batches: usize) -> Result<(f64, f64), SimError> {
    if batches < 2 || observations.len() < batches {
        return Err(SimError::InsufficientReplications(batches.min(observations.len())));
    }
    let size = observations.len() / batches;
    let means: Vec<f64> = observations
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    summarize(&means)
}
