//! Brute-force search for the optimal split. Uses only the mean-response-time
//! formula, never the closed form or the square-root rule, so it can check both.

use crate::cluster::{ArrivalRate, ClusterSpec, LoadSplit, QueueingError, Result, SplitSolution};
use crate::queueing::{mean_response_time, proportional_split};

const REFINE_WIDTH: f64 = 1e-10;
const SWEEP_IMPROVEMENT: f64 = 1e-12;
const MAX_SWEEPS: usize = 10_000;

fn objective(cluster: &ClusterSpec, rate: ArrivalRate, probabilities: &[f64]) -> f64 {
    let split = LoadSplit::from_raw(probabilities.iter().map(|p| p.clamp(0.0, 1.0)).collect());
    mean_response_time(cluster, rate, &split).unwrap_or(f64::INFINITY)
}

/// Minimizes a function that is convex where finite and infinite elsewhere
/// on `[lo, hi]`: coarse grid of step `step`, ternary refinement around the
/// best grid point, then comparison against the exact interval endpoints.
/// `seed` is a known feasible point, used when the feasible region is
/// narrower than the grid.
fn minimize_on_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    step: f64,
    seed: f64,
) -> (f64, f64) {
    let mut best = (seed, f(seed));
    let lo_value = f(lo);
    if lo_value < best.1 {
        best = (lo, lo_value);
    }
    let points = ((hi - lo) / step).ceil() as usize;
    for i in 1..=points {
        let x = (lo + i as f64 * step).min(hi);
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    if !best.1.is_finite() {
        return best;
    }

    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    while b - a > REFINE_WIDTH {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let (f1, f2) = (f(m1), f(m2));
        if f1.is_infinite() && f2.is_infinite() {
            // the feasible interval lies wholly in the third holding the best point
            if best.0 < m1 {
                b = m1;
            } else if best.0 > m2 {
                a = m2;
            } else {
                (a, b) = (m1, m2);
            }
        } else if f1 <= f2 {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mid = 0.5 * (a + b);
    for x in [mid, lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Grid-and-refine search over the probability simplex for the split that
/// minimizes mean response time.
///
/// Two groups: one-dimensional search over `p_0`. More groups: pairwise
/// coordinate descent from the proportional split (move mass between two
/// groups at a time) until a full sweep improves by less than 1e-12.
/// Unstable splits are treated as infinitely bad.
pub fn oracle_optimal_split(
    cluster: &ClusterSpec,
    rate: ArrivalRate,
    resolution: f64,
) -> Result<SplitSolution> {
    if !(resolution > 0.0 && resolution <= 0.01) {
        return Err(QueueingError::InvalidResolution(resolution));
    }
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

    let probabilities = match cluster.len() {
        1 => vec![1.0],
        2 => {
            let seed = proportional_split(cluster).probabilities()[0];
            let (p0, _) = minimize_on_interval(
                |p| objective(cluster, rate, &[p, 1.0 - p]),
                0.0,
                1.0,
                resolution,
                seed,
            );
            vec![p0, 1.0 - p0]
        }
        _ => coordinate_descent(cluster, rate, resolution),
    };

    let split = LoadSplit::from_raw(probabilities);
    let response_time = mean_response_time(cluster, rate, &split)?;
    Ok(SplitSolution::from_split(split, response_time))
}

fn coordinate_descent(cluster: &ClusterSpec, rate: ArrivalRate, resolution: f64) -> Vec<f64> {
    let n = cluster.len();
    let mut p = proportional_split(cluster).probabilities().to_vec();
    let mut current = objective(cluster, rate, &p);
    for _ in 0..MAX_SWEEPS {
        let start = current;
        for i in 0..n {
            for j in i + 1..n {
                let (pi, pj) = (p[i], p[j]);
                let total = pi + pj;
                if total == 0.0 {
                    continue;
                }
                let mut trial = p.clone();
                let (x, fx) = minimize_on_interval(
                    |x| {
                        trial[i] = x;
                        trial[j] = total - x;
                        objective(cluster, rate, &trial)
                    },
                    0.0,
                    total,
                    resolution,
                    pi,
                );
                if fx < current {
                    p[i] = x;
                    p[j] = total - x;
                    current = fx;
                }
            }
        }
        if start - current < SWEEP_IMPROVEMENT {
            break;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rate(x: f64) -> ArrivalRate {
        ArrivalRate::new(x).unwrap()
    }

    #[test]
    fn interval_minimizer_finds_parabola_vertex() {
        let (x, fx) = minimize_on_interval(|x| (x - 0.3137).powi(2) + 1.0, 0.0, 1.0, 1e-3, 0.5);
        assert!((x - 0.3137).abs() < 1e-6);
        assert_relative_eq!(fx, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn interval_minimizer_prefers_exact_endpoint() {
        let (x, _) = minimize_on_interval(|x| -x, 0.0, 1.0, 1e-3, 0.5);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn interval_minimizer_skips_infeasible_region() {
        let f = |x: f64| if x < 0.9 { f64::INFINITY } else { (x - 0.95).powi(2) };
        let (x, _) = minimize_on_interval(f, 0.0, 1.0, 1e-2, 0.95);
        assert!((x - 0.95).abs() < 1e-8);
    }

    #[test]
    fn scenario_a_moderate_load() {
        let a = ClusterSpec::from_pairs(&[(1, 2.0), (2, 1.0)]).unwrap();
        let s = oracle_optimal_split(&a, rate(0.8), 1e-3).unwrap();
        assert!((s.response_time - 0.803458691).abs() < 1e-6);
    }

    #[test]
    fn scenario_a_low_load_hits_boundary() {
        let a = ClusterSpec::from_pairs(&[(1, 2.0), (2, 1.0)]).unwrap();
        let s = oracle_optimal_split(&a, rate(0.4), 1e-3).unwrap();
        assert_eq!(s.split.probabilities(), &[1.0, 0.0]);
        assert_eq!(s.active_groups, vec![0]);
        assert_relative_eq!(s.response_time, 0.625, max_relative = 1e-12);
    }

    #[test]
    fn single_group() {
        let c = ClusterSpec::from_pairs(&[(1, 1.0)]).unwrap();
        let s = oracle_optimal_split(&c, rate(0.5), 1e-3).unwrap();
        assert_eq!(s.split.probabilities(), &[1.0]);
        assert_relative_eq!(s.response_time, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn three_groups_reach_symmetric_optimum() {
        let c = ClusterSpec::from_pairs(&[(1, 1.0), (1, 1.0), (1, 1.0)]).unwrap();
        let s = oracle_optimal_split(&c, rate(1.5), 1e-3).unwrap();
        for p in s.split.probabilities() {
            assert!((p - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn seed_rescues_band_between_grid_points() {
        let f = |x: f64| if (x - 0.505).abs() > 0.002 { f64::INFINITY } else { (x - 0.506).powi(2) };
        let (x, _) = minimize_on_interval(f, 0.0, 1.0, 1e-2, 0.505);
        assert!((x - 0.506).abs() < 1e-8);
    }

    #[test]
    fn narrow_feasible_band_near_capacity() {
        let a = ClusterSpec::from_pairs(&[(1, 2.0), (2, 1.0)]).unwrap();
        let s = oracle_optimal_split(&a, rate(3.99), 1e-2).unwrap();
        assert!(s.response_time.is_finite());
    }

    #[test]
    fn argument_errors() {
        let a = ClusterSpec::from_pairs(&[(1, 2.0), (2, 1.0)]).unwrap();
        assert!(matches!(
            oracle_optimal_split(&a, rate(0.8), 0.5),
            Err(QueueingError::InvalidResolution(_))
        ));
        assert!(matches!(
            oracle_optimal_split(&a, rate(0.8), 0.0),
            Err(QueueingError::InvalidResolution(_))
        ));
        assert!(matches!(
            oracle_optimal_split(&a, rate(4.0), 1e-3),
            Err(QueueingError::Overloaded { .. })
        ));
        assert_eq!(
            oracle_optimal_split(&a, rate(0.0), 1e-3),
            Err(QueueingError::DegenerateRate)
        );
    }
}
