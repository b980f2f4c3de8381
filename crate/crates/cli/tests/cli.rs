use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use quasirev::{BoundaryKind, BoundarySeries, GridSpec, SpatialField};
use quasirev_cli::metrics::read_metrics_csv;

fn quasirev(args: &[&str], config: Option<&str>, dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quasirev"));
    if let Some(text) = config {
        let path = dir.join("config.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.args(args).output().unwrap()
}

fn read(path: &Path) -> BufReader<std::fs::File> {
    BufReader::new(std::fs::File::open(path).unwrap())
}

#[test]
fn inverse_source_run_writes_readable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = quasirev(
        &["--nx", "12", "--nt", "8", "--delta", "0.05", "--seed", "3", "-o", out.to_str().unwrap()],
        Some("test = \"test2\""),
        tmp.path(),
    );
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let spec = GridSpec::new(1.0, 12, 8, 0.2).unwrap();
    for name in ["p_true.csv", "p_comp.csv"] {
        SpatialField::read_csv(spec, read(&out.join(name))).unwrap();
    }
    BoundarySeries::read_csv(spec, BoundaryKind::FluxRate, read(&out.join("data_gt.csv"))).unwrap();
    let rows = read_metrics_csv(&std::fs::read_to_string(out.join("metrics.csv")).unwrap()).unwrap();
    let labels: Vec<&str> = rows.iter().map(|r| r.inclusion.as_str()).collect();
    assert_eq!(labels, ["positive", "negative"]);
    assert_eq!(rows[1].extreme_true, -2.0);
    let gamma = std::fs::read_to_string(out.join("gamma.csv")).unwrap();
    assert_eq!(gamma.lines().count(), 1 + 9);
    let report = std::fs::read_to_string(out.join("run_report.txt")).unwrap();
    assert!(report.contains("epsilon=1e-8"));
    assert!(report.contains("delta=0.05"));
}

#[test]
fn coefficient_run_writes_one_file_per_iterate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("coef");
    let config = "mode = \"coefficient\"\ntest = \"test5\"\n[grid]\nnx = 10\nnt = 6\n[coefficient]\nn_star = 4\n";
    let res = quasirev(&["-o", out.to_str().unwrap()], Some(config), tmp.path());
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let iterates = std::fs::read_dir(out.join("c_n")).unwrap().count();
    assert_eq!(iterates, 4);
    let e_n = std::fs::read_to_string(out.join("e_n.csv")).unwrap();
    assert_eq!(e_n.lines().next(), Some("n,e_n,u_change,data_residual"));
    assert_eq!(e_n.lines().count(), 1 + 4);
    let spec = GridSpec::new(1.0, 10, 6, 0.2).unwrap();
    let c_true = SpatialField::read_csv(spec, read(&out.join("c_true.csv"))).unwrap();
    assert_eq!(c_true.max(), 3.0);
    assert_eq!(c_true.min(), 1.0);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();
    let code = |args: &[&str], config: Option<&str>| quasirev(args, config, tmp.path()).status.code();

    assert_eq!(code(&["-o", out], Some("nonsense_key = 1")), Some(1));
    assert_eq!(code(&["-o", out, "--epsilon=-1"], None), Some(1));
    assert_eq!(code(&["--no-such-flag"], None), Some(1));
    assert_eq!(code(&["-o", out, "--config", "/definitely/missing.toml"], None), Some(1));
    assert_eq!(code(&["-o", out], Some("test = \"test6\"")), Some(1));

    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let nested = blocker.join("out");
    assert_eq!(
        code(&["--nx", "6", "--nt", "4", "-o", nested.to_str().unwrap()], None),
        Some(3)
    );

    // a coefficient this large makes the implicit step indefinite
    let diverging = "mode = \"coefficient\"\ntest = \"custom\"\n[grid]\nnx = 8\nnt = 4\n[coefficient]\nn_star = 1\nc0 = 400.0\n[custom]\nbackground = 400.0\n";
    assert_eq!(code(&["-o", out], Some(diverging)), Some(2));
}

#[test]
fn boundary_rate_concentrates_early() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gamma");
    let res = quasirev(
        &["--nx", "20", "--nt", "50", "--t-final", "1.0", "-q", "-o", out.to_str().unwrap()],
        None,
        tmp.path(),
    );
    assert!(res.status.success());
    let text = std::fs::read_to_string(out.join("gamma.csv")).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (t, g) = l.split_once(',').unwrap();
            (t.parse().unwrap(), g.parse().unwrap())
        })
        .collect();
    let integral = |upto: f64| {
        rows.windows(2)
            .filter(|w| w[1].0 <= upto + 1e-12)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum::<f64>()
    };
    let ratio = integral(0.2) / integral(1.0);
    assert!(ratio >= 0.5, "ratio {ratio}");
}
