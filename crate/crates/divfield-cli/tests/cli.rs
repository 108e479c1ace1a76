use std::path::Path;
use std::process::{Command, Output};

use divfield::domain::DomainSpec;
use divfield_cli::config::{ExperimentConfig, Stage};
use divfield_cli::io::Table;
use proptest::prelude::*;

fn divfield(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("experiment.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_divfield"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env_remove("DIVFIELD_THREADS")
        .output()
        .unwrap()
}

fn column(dir: &Path, file: &str, name: &str) -> Vec<String> {
    let t = Table::read(&dir.join("out").join(file)).unwrap();
    let c = t.column(name).unwrap_or_else(|| panic!("{file} lacks {name}"));
    t.rows.iter().map(|r| r[c].clone()).collect()
}

#[test]
fn decreasing_resolutions_exit_with_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = divfield(dir.path(), "resolutions = 128, 64\n", &["rasterize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strictly increasing"));
}

#[test]
fn disk_run_passes_and_writes_the_census() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "domain = disk(1)\nresolutions = 16\nq = 1,2\nkernel_samples = 10\npath_samples = 100\n";
    let out = divfield(dir.path(), cfg, &["run", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cells: usize = column(dir.path(), "domain.csv", "true_cells")[0].parse().unwrap();
    assert!(cells > 700 && cells < 900, "{cells}");
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("status = pass"));
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("n/a"), "{report}");
}

#[test]
fn two_resolutions_report_residual_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "domain = square(1)\nresolutions = 8, 16\nq = 2\nkernel_samples = 0\npath_samples = 50\n";
    let out = divfield(dir.path(), cfg, &["sobolev"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = divfield(dir.path(), cfg, &["report"]);
    assert_eq!(rep.status.code(), Some(0));
    let report = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(report.contains("order"), "{report}");
    assert!(report.lines().any(|l| l.contains("residual")), "{report}");
}

#[test]
fn spiral_weight_produces_the_exponent_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "domain = power_spiral(0.5)\nresolutions = 16, 24\ny_stride = 2\nx_stride = 4\npath_samples = 50\n";
    let out = divfield(dir.path(), cfg, &["weight"]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(divfield(dir.path(), cfg, &["report"]).status.code(), Some(0));
    let svg = std::fs::read_to_string(dir.path().join("out/weight_exponent.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("slope"), "{svg}");
}

#[test]
fn integrability_probe_records_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "domain = disk(1)\nresolutions = 8, 16, 32\nintegrability = true\n";
    let out = divfield(dir.path(), cfg, &["rasterize"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let verdicts = column(dir.path(), "integrability.csv", "verdict");
    assert_eq!(verdicts.len(), 3);
    assert!(verdicts.iter().all(|v| v == &verdicts[0]));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("integrability.verdict = {}", verdicts[0])));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "domain = hoelder_cusp(0.5)\nresolutions = 12\nq = 2\nkernel_samples = 5\npath_samples = 50\n";
    let read = |d: &Path| std::fs::read(d.join("out/solve_residuals.csv")).unwrap();
    assert_eq!(divfield(dir.path(), cfg, &["solve", "--threads", "1"]).status.code(), Some(0));
    let one = read(dir.path());
    assert_eq!(divfield(dir.path(), cfg, &["solve", "--threads", "3"]).status.code(), Some(0));
    assert_eq!(one, read(dir.path()));
}

fn any_spec() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|r| DomainSpec::disk(r).unwrap()),
        (0.2f64..3.0).prop_map(|a| DomainSpec::power_spiral(a).unwrap()),
        (0.2f64..0.95).prop_map(|a| DomainSpec::hoelder_cusp(a).unwrap()),
        Just(DomainSpec::log_spiral()),
    ]
}

proptest! {
    #[test]
    fn canonical_config_round_trips(
        domain in any_spec(),
        first in 4usize..64,
        steps in prop::collection::vec(1usize..64, 0..3),
        p in prop::collection::vec(1.01f64..8.0, 1..4),
        q in prop::collection::vec(1.0f64..8.0, 1..4),
        stride in 1usize..8,
        stage in 0usize..7,
    ) {
        let mut resolutions = vec![first];
        for s in steps {
            resolutions.push(resolutions.last().unwrap() + s);
        }
        let cfg = ExperimentConfig { domain, resolutions, p, q, y_stride: stride, stage: Stage::ALL[stage], ..Default::default() };
        let back = ExperimentConfig::parse(&cfg.canonical()).unwrap();
        prop_assert_eq!(back.canonical(), cfg.canonical());
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
