use halo_core::sim::{run_replication, summarize};
use halo_core::{
    build_policy, mean_response_time, run_simulation, ArrivalRate, ClusterSpec, LoadSplit,
    PolicyConfig, PolicyName, ServiceDistribution, SimConfig,
};

fn scenario_a() -> ClusterSpec {
    ClusterSpec::from_pairs(&[(1, 2.0), (2, 1.0)]).unwrap()
}

fn rate(x: f64) -> ArrivalRate {
    ArrivalRate::new(x).unwrap()
}

fn quick(seed: u64) -> SimConfig {
    SimConfig {
        total_jobs: 30_000,
        replications: 6,
        batch_count: 30,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn mm1_mean_is_covered_by_interval() {
    let single = ClusterSpec::from_pairs(&[(1, 1.0)]).unwrap();
    let r = run_simulation(
        &single,
        rate(0.5),
        &ServiceDistribution::Exponential,
        &PolicyConfig::rnd(1),
        &SimConfig::default(),
    )
    .unwrap();
    assert!((r.mean_response_time - 2.0).abs() <= r.ci_halfwidth, "{r:?}");
    assert_eq!(r.jobs_counted, 1_000_000);
}

#[test]
fn fixed_weights_match_analytic_response_time() {
    let cluster = scenario_a();
    let lambda = rate(1.6);
    let weights = vec![0.6, 0.2, 0.2];
    let analytic = mean_response_time(
        &cluster,
        lambda,
        &LoadSplit::new(vec![0.6, 0.4]).unwrap(),
    )
    .unwrap();
    let r = run_simulation(
        &cluster,
        lambda,
        &ServiceDistribution::Exponential,
        &PolicyConfig::halo_rnd(weights),
        &SimConfig::default(),
    )
    .unwrap();
    assert!((r.mean_response_time - analytic).abs() / analytic < 0.03);
    assert!((r.mean_response_time - analytic).abs() <= r.ci_halfwidth, "{r:?} vs {analytic}");
}

#[test]
fn bounded_pareto_service_keeps_the_ps_mean() {
    let cluster = scenario_a();
    let policy = build_policy(PolicyName::HaloRnd, &cluster, rate(0.8), 0)
        .unwrap()
        .policy()
        .clone();
    let r = run_simulation(
        &cluster,
        rate(0.8),
        &ServiceDistribution::BoundedPareto {
            shape: 1.5,
            bound_ratio: 100.0,
        },
        &policy,
        &SimConfig::default(),
    )
    .unwrap();
    assert!((r.mean_response_time - 0.803458691).abs() / 0.803458691 < 0.03, "{r:?}");
}

#[test]
fn replication_bookkeeping_invariants() {
    let cluster = scenario_a();
    let lambda = rate(2.4);
    for name in [PolicyName::HaloRnd, PolicyName::PodBase, PolicyName::Rr, PolicyName::HaloRr] {
        let policy = build_policy(name, &cluster, lambda, 0).unwrap().policy().clone();
        for service in [
            ServiceDistribution::Exponential,
            ServiceDistribution::Lognormal { sigma: 1.0 },
        ] {
            let o = run_replication(&cluster, lambda, &service, &policy, &quick(3), 0).unwrap();
            assert!(o.clock_monotone);
            // departures fire when remaining work hits zero up to the rounding
            // of an absolute clock of this magnitude
            let clock_resolution = 4.0 * f64::EPSILON * o.final_clock * 2.0;
            assert!(
                o.max_departure_residual <= 1e-12 + clock_resolution,
                "{name}: {}",
                o.max_departure_residual
            );

            let accounted = o.work_processed + o.work_remaining;
            assert!((o.work_injected - accounted).abs() / o.work_injected < 1e-6, "{name}");

            let throughput = o.response_times.len() as f64 / o.window;
            let littles = throughput * o.mean_response_time;
            assert!(
                (o.mean_jobs_in_system - littles).abs() / littles < 0.02,
                "{name}: L {} vs X*W {}",
                o.mean_jobs_in_system,
                littles
            );
        }
    }
}

#[test]
fn per_server_throughput_sums_to_arrival_rate() {
    let cluster = scenario_a();
    let lambda = rate(1.6);
    let policy = build_policy(PolicyName::PodBase, &cluster, lambda, 0)
        .unwrap()
        .policy()
        .clone();
    let sim = SimConfig::default();
    let totals: Vec<f64> = (0..sim.replications)
        .map(|r| {
            let o = run_replication(
                &cluster,
                lambda,
                &ServiceDistribution::Exponential,
                &policy,
                &sim,
                r,
            )
            .unwrap();
            o.per_server_completions.iter().sum::<usize>() as f64 / o.window
        })
        .collect();
    let (mean, halfwidth) = summarize(&totals).unwrap();
    let se = halfwidth / halo_core::sim::t_critical_95(totals.len() - 1);
    assert!((mean - 1.6).abs() <= 3.0 * se, "{mean} se {se}");

    let r = run_simulation(&cluster, lambda, &ServiceDistribution::Exponential, &policy, &sim)
        .unwrap();
    assert!((r.per_server_throughput.iter().sum::<f64>() - mean).abs() < 1e-9);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cluster = scenario_a();
    let lambda = rate(1.6);
    let policy = build_policy(PolicyName::HaloPod, &cluster, lambda, 0)
        .unwrap()
        .policy()
        .clone();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                run_simulation(
                    &cluster,
                    lambda,
                    &ServiceDistribution::Exponential,
                    &policy,
                    &quick(42),
                )
                .unwrap()
            })
    };
    let serial = run(1);
    assert_eq!(serial, run(4));
    assert_eq!(serial, run(1));
    assert_eq!(serial.jobs_counted, 30_000 * 6);
    assert_ne!(serial, {
        run_simulation(
            &cluster,
            lambda,
            &ServiceDistribution::Exponential,
            &policy,
            &quick(43),
        )
        .unwrap()
    });
}
