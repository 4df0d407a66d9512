use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_snapfilter"));
    c.env_remove("SNAPFILTER_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn isomerization(snapshots: Value, methods: Value) -> Value {
    json!({
        "network": {
            "species": ["S1", "S2"],
            "reactions": [
                {"reactants": {"S1": 1}, "products": {"S2": 1}, "rate": 1.0},
                {"reactants": {"S2": 1}, "products": {"S1": 1}, "rate": 1.5}
            ],
            "observed": ["S2"]
        },
        "initial_state": [10, 0],
        "snapshots": snapshots,
        "query_time": 0.7,
        "methods": methods,
        "trials": {"N_s": 200, "N_r": 5, "seed": 3}
    })
}

fn pure_death(y: i64, methods: Value, n_s: usize) -> Value {
    json!({
        "network": {
            "species": ["S"],
            "reactions": [{"reactants": {"S": 1}, "rate": 2.0}],
            "observed": ["S"]
        },
        "initial_state": [1000],
        "snapshots": [{"t": 0.5, "y": [y]}],
        "query_time": 0.2,
        "methods": methods,
        "trials": {"N_s": n_s, "N_r": 3, "seed": 1}
    })
}

#[test]
fn every_shipped_config_validates() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = bin()
            .args(["validate", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}: {}", path.display(), stderr(&out));
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "OK");
    }
}

#[test]
fn snapshots_out_of_order_name_the_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = isomerization(
        json!([{"t": 0.5, "y": [3]}, {"t": 1.0, "y": [4]}, {"t": 0.8, "y": [5]}]),
        json!([{"kind": "naive"}]),
    );
    let out = bin()
        .args(["validate", "--config"])
        .arg(write(dir.path(), "c.json", &cfg))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("snapshots 1 (t=1) and 2 (t=0.8) are out of order"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn observation_above_initial_count_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pure_death(1001, json!([{"kind": "naive"}]), 10);
    let out = bin()
        .args(["validate", "--config"])
        .arg(write(dir.path(), "c.json", &cfg))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("cannot be reached"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn empty_method_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = isomerization(json!([{"t": 1.0, "y": [4]}]), json!([]));
    let path = write(dir.path(), "c.json", &cfg);
    let out = bin()
        .args(["validate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty method list"));
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn several_problems_are_itemized() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = isomerization(
        json!([{"t": 1.0, "y": [4]}, {"t": 1.0, "y": [5]}]),
        json!([{"kind": "targeting", "dt": 0.1, "resample_every": 0.15}, {"kind": "targeting", "dt": 0.1, "free_reactions": [0, 1]}]),
    );
    cfg["query_time"] = json!(3.0);
    let out = bin()
        .args(["validate", "--config"])
        .arg(write(dir.path(), "c.json", &cfg))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("out of order"), "{err}");
    assert!(err.contains("query time 3 outside"), "{err}");
    assert!(err.contains("not a multiple of dt"), "{err}");
    assert!(err.contains("infeasible split"), "{err}");
    assert!(err.contains("4 problem(s) found"), "{err}");
}

#[test]
fn malformed_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, "{\"network\": 3}").unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn run_to(cfg: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut c = bin();
    c.args(["run", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra);
    if let Some(t) = threads {
        c.env("SNAPFILTER_THREADS", t);
    }
    c.output().unwrap()
}

#[test]
fn run_writes_tables_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = isomerization(
        json!([]),
        json!([
            {"kind": "naive"},
            {"kind": "targeting", "intensity": "rre", "dt": 0.1},
            {"kind": "targeting", "intensity": "optimized", "dt": 0.1, "free_reactions": [1]},
            {"kind": "cp_approx"}
        ]),
    );
    cfg.as_object_mut().unwrap().remove("snapshots");
    cfg["cases"] = json!([
        {"name": "common", "snapshots": [{"t": 1.0, "y": [4]}]},
        {"name": "rare", "snapshots": [{"t": 1.0, "y": [7]}]}
    ]);
    let path = write(dir.path(), "c.json", &cfg);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run_to(&path, &a, &["--threads", "1"], None);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run_to(&path, &b, &[], Some("2"));
    assert!(out.status.success(), "{}", stderr(&out));

    let rows = read_csv(&a.join("results.csv"));
    assert_eq!(rows[0].join(","), "case,method,N_s,N_r,n_success,tve_mean,tve_ci,esf_poisson,esf_girsanov,esf,seconds_per_trial");
    assert_eq!(rows.len(), 1 + 8);
    let rows_b = read_csv(&b.join("results.csv"));
    for (ra, rb) in rows.iter().zip(&rows_b).skip(1) {
        assert_eq!(ra[..10], rb[..10]);
        let esf: f64 = ra[9].parse().unwrap();
        assert!(esf > 0.0 && esf <= 1.0);
    }

    for case in ["common", "rare"] {
        let name = format!("dist_{case}.csv");
        let da = std::fs::read(a.join(&name)).unwrap();
        assert_eq!(da, std::fs::read(b.join(&name)).unwrap());
        let dist = read_csv(&a.join(&name));
        assert_eq!(dist[0].join(","), "method,state,oracle,estimate,ci");
        let methods: Vec<String> = rows
            .iter()
            .skip(1)
            .filter(|r| r[0] == case)
            .map(|r| r[1].clone())
            .collect();
        for m in &methods {
            let (mut po, mut pe) = (0.0, 0.0);
            for r in dist.iter().skip(1).filter(|r| &r[0] == m) {
                po += r[2].parse::<f64>().unwrap();
                pe += r[3].parse::<f64>().unwrap();
            }
            assert!(
                (po - 1.0).abs() < 1e-8 && (pe - 1.0).abs() < 1e-8,
                "{case} {m}: {po} {pe}"
            );
        }
    }

    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cases"].as_array().unwrap().len(), 2);
    let p = summary["cases"][0]["observation_probability"]
        .as_f64()
        .unwrap();
    assert!((p - 0.2451).abs() < 1e-3);
    assert_eq!(summary["cases"][1]["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = isomerization(json!([{"t": 1.0, "y": [4]}]), json!([{"kind": "naive"}]));
    let path = write(dir.path(), "c.json", &cfg);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert!(run_to(&path, &a, &["--seed", "3"], None).status.success());
    assert!(run_to(&path, &b, &[], None).status.success());
    assert!(run_to(&path, &c, &["--seed", "4"], None).status.success());
    let d = |p: &Path| std::fs::read(p.join("dist_main.csv")).unwrap();
    assert_eq!(d(&a), d(&b));
    assert_ne!(d(&a), d(&c));
}

#[test]
fn all_rejected_naive_exits_with_runtime_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = pure_death(150, json!([{"kind": "naive"}]), 1);
    let out = run_to(
        &write(dir.path(), "c.json", &cfg),
        &dir.path().join("o"),
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("all-rejected"));
    let rows = read_csv(&dir.path().join("o/results.csv"));
    assert_eq!(rows[1][4], "0");
}

#[test]
fn unreachable_target_in_sampling_exits_with_runtime_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = isomerization(
        json!([{"t": 1.0, "y": [7]}]),
        json!([{"kind": "targeting", "dt": 0.1, "max_rejects": 1}]),
    );
    let out = run_to(
        &write(dir.path(), "c.json", &cfg),
        &dir.path().join("o"),
        &[],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unreachable"), "{}", stderr(&out));
}
