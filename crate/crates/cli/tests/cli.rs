use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rdbalance(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdbalance"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn value(out: &Output, key: &str) -> f64 {
    let text = stdout(out);
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"));
    line.trim().parse().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let ok = rdbalance(&["validate", "examples/four_species_unit.rdn"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("3 conservation laws"));

    let cubic = rdbalance(&["validate", "examples/cubic.rdn"]);
    assert_eq!(cubic.status.code(), Some(1));
    assert!(stdout(&cubic).contains("non-quadratic: |α| = 3"));

    assert_eq!(rdbalance(&["validate", "examples/missing.rdn"]).status.code(), Some(2));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rdn");
    fs::write(&bad, "species A B\nreaction A -> \n").unwrap();
    assert_eq!(rdbalance(&["validate", path(&bad)]).status.code(), Some(2));
}

#[test]
fn equilibrium_of_the_four_species_system() {
    let out = rdbalance(&["equilibrium", "examples/four_species_unit.rdn", "--masses", "3,4,1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for (name, want) in [("A1", 2.4), ("A2", 0.6), ("A3", 0.4), ("A4", 1.6)] {
        let got: f64 = value(&out, &format!("  {name}"));
        assert!((got - want).abs() < 1e-10, "{name}: {got} in {text}");
    }
    assert!(value(&out, "db_residual") < 1e-12);

    let wrong_count = rdbalance(&["equilibrium", "examples/four_species_unit.rdn", "--masses", "1,2"]);
    assert_eq!(wrong_count.status.code(), Some(1));
    let negative = rdbalance(&["equilibrium", "examples/four_species_unit.rdn", "--masses", "-1,2,2"]);
    assert_eq!(negative.status.code(), Some(1));
}

#[test]
fn gap_of_the_unit_system() {
    let out = rdbalance(&["gap", "examples/four_species_unit.rdn", "--domain", "interval:1", "--a-inf", "1,1,1,1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("lambda_star = 4.000000"), "{}", stdout(&out));
    assert!(value(&out, "analytic_bound") <= value(&out, "lambda_star") + 1e-12);

    let from_masses = rdbalance(&["gap", "examples/exchange.rdn", "--masses", "2"]);
    assert_eq!(from_masses.status.code(), Some(0));
    assert!(value(&from_masses, "lambda_star") > 0.0);
}

#[test]
fn simulate_then_fit_recovers_the_mode_one_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = rdbalance(&["simulate", "examples/perturbed.cfg", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let diag = dir.path().join("diag.csv");
    let text = fs::read_to_string(&diag).unwrap();
    assert!(text.starts_with("# rdbalance "));

    let fit = rdbalance(&["fit", path(&diag), "--column", "L2sq", "--window", "0,0.2"]);
    assert_eq!(fit.status.code(), Some(0));
    let rate = value(&fit, "lambda_fit");
    assert!((rate / 27.7392 - 1.0).abs() < 0.05, "rate {rate}");
    assert!(value(&fit, "r_squared") > 0.99);

    let missing = rdbalance(&["fit", path(&diag), "--column", "nope", "--window", "0,0.2"]);
    assert_eq!(missing.status.code(), Some(1));
    let backwards = rdbalance(&["fit", path(&diag), "--window", "0.2,0"]);
    assert_eq!(backwards.status.code(), Some(1));
}

#[test]
fn runs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = rdbalance(&[
            "simulate",
            "examples/homogeneous.cfg",
            "examples/mixed.cfg",
            "--jobs",
            "2",
            "--out",
            path(d.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for run in ["homogeneous", "mixed"] {
        let x = fs::read(a.path().join(run).join("diag.csv")).unwrap();
        let y = fs::read(b.path().join(run).join("diag.csv")).unwrap();
        assert_eq!(x, y, "{run} differs between runs");
    }
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let net = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/exchange.rdn");
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, format!("network = {}\n{body}", net.display())).unwrap();
        p
    };
    let base = "domain = interval:1\ngrid = 16\nt_end = 0.01\nspecies.A.base = 1\nspecies.B.base = 1\n";

    let unknown = write("unknown.cfg", &format!("{base}colour = blue\n"));
    assert_eq!(rdbalance(&["simulate", path(&unknown)]).status.code(), Some(1));

    let malformed = write("malformed.cfg", &format!("{base}dt 0.1\n"));
    assert_eq!(rdbalance(&["simulate", path(&malformed)]).status.code(), Some(2));

    let negative = write("negative.cfg", &format!("{base}species.A.perturb = 1:-2\n"));
    assert_eq!(rdbalance(&["simulate", path(&negative), "--out", path(dir.path())]).status.code(), Some(1));

    let fine = write("fine.cfg", base);
    let out_dir = dir.path().join("fine");
    let out = rdbalance(&["simulate", path(&fine), "--out", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("diag.csv").exists());
}

#[test]
fn snapshots_round_trip_as_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let net = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/exchange.rdn");
    let first = dir.path().join("first.cfg");
    fs::write(
        &first,
        format!(
            "network = {}\ndomain = interval:1\ngrid = 16\ndt = 0.001\nt_end = 0.01\nsnapshot_every = 10\n\
             species.A.base = 1\nspecies.A.perturb = 1:0.2\nspecies.B.base = 0.5\n",
            net.display()
        ),
    )
    .unwrap();
    let out = rdbalance(&["simulate", path(&first), "--out", path(&dir.path().join("first"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let snapshot = dir.path().join("first/snapshot_00001.csv");
    assert!(snapshot.exists());

    let second = dir.path().join("second.cfg");
    fs::write(
        &second,
        format!(
            "network = {}\ndomain = interval:1\ngrid = 16\ndt = 0.001\nt_end = 0.01\ninitial.csv = {}\n",
            net.display(),
            snapshot.display()
        ),
    )
    .unwrap();
    let out = rdbalance(&["simulate", path(&second), "--out", path(&dir.path().join("second"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let wrong_grid = dir.path().join("wrong.cfg");
    fs::write(
        &wrong_grid,
        fs::read_to_string(&second).unwrap().replace("grid = 16", "grid = 8"),
    )
    .unwrap();
    let out = rdbalance(&["simulate", path(&wrong_grid), "--out", path(&dir.path().join("wrong"))]);
    assert_ne!(out.status.code(), Some(0));
}
