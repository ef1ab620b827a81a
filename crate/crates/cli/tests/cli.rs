use std::path::Path;
use std::process::{Command, Output};

fn accrete(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accrete")).args(args).env_remove("ACCRETE_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

const BASE: [&str; 10] = ["--lambda", "0.5", "--delta", "1", "--drift", "1", "--horizon", "100", "--seed", "7"];

fn simulate_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate"];
    args.extend(BASE);
    args.extend(["-o", dir.to_str().unwrap()]);
    args.extend(extra);
    accrete(&args)
}

#[test]
fn simulate_is_byte_identical_on_rerun() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = simulate_into(a.path(), &["--ndjson"]);
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(simulate_into(b.path(), &["--ndjson"]).status.success());
    for f in ["trajectory.csv", "events.csv", "meta.json", "events.ndjson"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f} differs");
    }
}

#[test]
fn files_carry_schema_and_hash() {
    let d = tempfile::tempdir().unwrap();
    assert!(simulate_into(d.path(), &[]).status.success());
    let meta: serde_json::Value = serde_json::from_str(&read(&d.path().join("meta.json"))).unwrap();
    let hash = meta["config_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);

    let traj = read(&d.path().join("trajectory.csv"));
    let mut lines = traj.lines();
    assert_eq!(lines.next().unwrap(), format!("# schema=accrete.trajectory/1 config_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "t,xi,N,n0,n1");
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 64);
    for r in &rows {
        assert_eq!(r[1], r[2], "ξ = δN with δ = 1");
        assert_eq!(r[3] + r[4], r[2]);
    }

    let events = read(&d.path().join("events.csv"));
    let mut lines = events.lines();
    assert_eq!(lines.next().unwrap(), format!("# schema=accrete.events/1 config_hash={hash}"));
    assert_eq!(lines.next().unwrap(), "j,t,k,hitter_origin");
    let n_events = lines.count() as u64;
    assert_eq!(meta["events"].as_u64().unwrap(), n_events);
    assert_eq!(meta["engine"], "event");
    assert_eq!(meta["seed"], 7);
}

#[test]
fn persisted_config_reproduces_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(simulate_into(a.path(), &[]).status.success());
    let cfg = a.path().join("config.toml");
    let o = accrete(&["simulate", "--config", cfg.to_str().unwrap(), "-o", b.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(&a.path().join("trajectory.csv")), read(&b.path().join("trajectory.csv")));
    assert_eq!(read(&a.path().join("events.csv")), read(&b.path().join("events.csv")));
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "[system]\nlambda = 0.3\ndelta = 1.0\ndrift = 0.5\nhorizon = 20.0\nseed = 3\n").unwrap();
    let out = d.path().join("out");
    let o = accrete(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: serde_json::Value = serde_json::from_str(&read(&out.join("meta.json"))).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["params"]["lambda"], 0.3);
}

#[test]
fn bad_config_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "[system]\nlamda = 0.3\n").unwrap();
    let o = accrete(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.toml"));
}

#[test]
fn supercritical_without_cap_is_refused() {
    let d = tempfile::tempdir().unwrap();
    let o = accrete(&[
        "simulate", "--lambda", "2", "--delta", "1", "--drift", "0", "--horizon", "10", "-o",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("λδ"), "{}", stderr(&o));
    assert!(!d.path().join("trajectory.csv").exists());
}

#[test]
fn grid_engine_uses_same_schema() {
    let d = tempfile::tempdir().unwrap();
    let o = accrete(&[
        "simulate", "--lambda", "0.5", "--delta", "1", "--drift", "1", "--horizon", "5", "--engine", "grid", "--step",
        "1e-3", "-o", d.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let traj = read(&d.path().join("trajectory.csv"));
    assert_eq!(traj.lines().nth(1).unwrap(), "t,xi,N,n0,n1");
    let meta: serde_json::Value = serde_json::from_str(&read(&d.path().join("meta.json"))).unwrap();
    assert_eq!(meta["engine"], "grid");
    assert_eq!(meta["params"]["grid_step"], 1e-3);
}

fn sweep_into(dir: &Path, threads: &str, replicas: &str) -> Output {
    accrete(&[
        "sweep", "--lambda", "0.5", "--delta", "1", "--drift", "1", "--horizon", "40", "--seed", "5", "--replicas",
        replicas, "--threads", threads, "-o", dir.to_str().unwrap(),
    ])
}

#[test]
fn sweep_does_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = sweep_into(a.path(), "1", "40");
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(sweep_into(b.path(), "4", "40").status.success());
    assert_eq!(read(&a.path().join("aggregate.json")), read(&b.path().join("aggregate.json")));
    assert_eq!(read(&a.path().join("replicas.csv")), read(&b.path().join("replicas.csv")));
    let agg: serde_json::Value = serde_json::from_str(&read(&a.path().join("aggregate.json"))).unwrap();
    assert_eq!(agg["succeeded"], 40);
    assert_eq!(agg["degenerate_ci"], false);
    let v = agg["speed"]["v_hat"]["mean"].as_f64().unwrap();
    assert!(v > 0.5 && v < 1.5, "{v}");
    assert_eq!(read(&a.path().join("replicas.csv")).lines().count(), 42);
}

#[test]
fn single_replica_sweep_flags_degenerate_ci() {
    let d = tempfile::tempdir().unwrap();
    let o = sweep_into(d.path(), "1", "1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("degenerate CI"));
    let agg: serde_json::Value = serde_json::from_str(&read(&d.path().join("aggregate.json"))).unwrap();
    assert_eq!(agg["degenerate_ci"], true);
    assert!(agg["final_n"]["ci"].is_null());
}

#[test]
fn threads_env_must_be_a_number() {
    let d = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate"];
    args.extend(BASE);
    args.extend(["-o", d.path().to_str().unwrap()]);
    let o = Command::new(env!("CARGO_BIN_EXE_accrete")).args(&args).env("ACCRETE_THREADS", "many").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ACCRETE_THREADS"));
}

#[test]
fn analytic_examples() {
    let one = |args: &[&str]| -> String {
        let o = accrete(args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o).trim().to_string()
    };
    assert_eq!(one(&["analytic", "speed", "--lambda", "0.5", "--delta", "1", "--drift", "1"]), "1.00000000000000");
    assert_eq!(one(&["analytic", "psi", "--t", "4", "--y", "2"]), "0.682689492137086");
    assert_eq!(one(&["analytic", "tau-median", "--lambda", "1"]), "0.754693829460248");
    assert_eq!(one(&["analytic", "sigma-const", "--d", "1"]), "0.368746380372508");
    assert_eq!(one(&["analytic", "tail", "--x", "0", "--v", "1", "--t", "2"]), "1.00000000000000");
    let table = one(&["analytic", "tau-cdf", "--lambda", "1", "--table", "t=1:3:3"]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "t,value");
    assert!(lines[3].starts_with("3,"));
}

#[test]
fn analytic_domain_errors_are_echoed() {
    let o = accrete(&["analytic", "speed", "--lambda", "2", "--delta", "1", "--drift", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no linear speed"));
    let o = accrete(&["analytic", "psi", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--y"));
}

#[test]
fn validate_reports_and_exits_zero() {
    let d = tempfile::tempdir().unwrap();
    let report = d.path().join("r.json");
    let o = accrete(&["validate", "analytic", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("criterion 9"));
    let r: serde_json::Value = serde_json::from_str(&read(&report)).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["gates"][0]["gate"], "analytic");
}

#[test]
fn validate_quick_chains() {
    let d = tempfile::tempdir().unwrap();
    let report = d.path().join("r.json");
    let o = accrete(&["validate", "chains", "--quick", "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&read(&report)).unwrap();
    assert_eq!(r["scale"], "quick");
    assert!(r["gates"][0]["runs"][0]["seed"].as_u64().is_some());
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = accrete(&["validate", "everything"]);
    assert_eq!(o.status.code(), Some(2));
}
