use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use halosim::table::read_sweep_file;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_halosim"));
    c.env_remove("HALOSIM_SEED");
    c
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "groups": [{"count": 1, "speed": 2}, {"count": 2, "speed": 1}],
    "lambdas": [0.8, 1.6],
    "policies": ["rnd", "halo_rnd", "pod_base"],
    "sim": {"total_jobs": 4000, "replications": 3, "batch_count": 10, "seed": 9}
}"#;

#[test]
fn analyze_prints_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["analyze", "--config"])
        .arg(example("scenarioA.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("scenario,lambda,rho,T_prop,T_opt,regime\n"));
    assert_eq!(text.lines().count(), 5);
    assert_eq!(std::fs::read_to_string(dir.path().join("analyze.csv")).unwrap(), text);
}

#[test]
fn validate_bundled_scenarios_pass_and_are_deterministic() {
    for name in ["scenarioA.json", "scenarioB.json"] {
        let run = || bin().args(["validate", "--config"]).arg(example(name)).output().unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
        assert!(stdout(&a).contains("overall: PASS"));
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", &SMALL.replace("[0.8, 1.6]", "[0.8, 4.0]"));
    let o = bin().args(["analyze", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity"));

    let o = bin().args(["analyze", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin().args(["simulate"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn split_reports_regime() {
    let o = bin()
        .args(["split", "--config"])
        .arg(example("scenarioA.json"))
        .args(["--lambda", "0.4"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("regime: active_set"));
    assert!(text.contains("p=1.000000000000"));
}

#[test]
fn all_cells_saturated_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sat.json",
        &SMALL.replace("[0.8, 1.6]", "[3.9]").replace(r#""rnd", "halo_rnd", "pod_base""#, r#""rnd", "rr""#),
    );
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    let rows = read_sweep_file(&dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.simulated_t.is_none() && r.error.is_some()));
}

#[test]
fn seed_precedence_flag_over_env_over_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seeded.json", &SMALL.replace("[0.8, 1.6]", "[0.8]"));
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(format!("{env:?}{flag:?}"));
        let mut c = bin();
        c.args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out);
        if let Some(e) = env {
            c.env("HALOSIM_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        read_sweep_file(&out.join("sweep.csv")).unwrap()[0].seed
    };
    assert_eq!(seed_of(None, None), 9);
    assert_eq!(seed_of(Some("21"), None), 21);
    assert_eq!(seed_of(Some("21"), Some("33")), 33);
}

#[test]
fn chart_combines_analytic_and_simulated_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin().args(["chart", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("small.svg")).unwrap();
    for label in ["T_prop", "T*", "rnd", "halo_rnd", "pod_base"] {
        assert!(svg.contains(&format!(">{label}</text>")), "missing {label}");
    }
    assert_eq!(svg.matches("<polyline").count(), 5);
    assert_eq!(svg.matches(r#"class="errorbar""#).count(), 6);
}

#[test]
fn bundled_charts_keep_optimum_below_proportional() {
    let dir = tempfile::tempdir().unwrap();
    for (name, label) in [("scenarioA.json", "scenarioA"), ("scenarioB.json", "scenarioB")] {
        let o = bin().args(["chart", "--config"]).arg(example(name)).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
        let svg = std::fs::read_to_string(dir.path().join(format!("{label}.svg"))).unwrap();
        let polyline = |label: &str| -> Vec<(f64, f64)> {
            let group = svg.split(&format!(r#"data-label="{label}""#)).nth(1).unwrap();
            let points = group.split(r#"points=""#).nth(1).unwrap().split('"').next().unwrap();
            points
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        };
        let (prop, opt) = (polyline("T_prop"), polyline("T*"));
        assert_eq!(prop.len(), 4);
        for (p, o) in prop.iter().zip(&opt) {
            assert_eq!(p.0, o.0);
            // Smaller value sits lower on the page, i.e. a larger pixel row.
            assert!(o.1 > p.1, "{label}: {o:?} vs {p:?}");
        }
    }
}
