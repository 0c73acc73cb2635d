use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn riemopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riemopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn sphere_gradient(id: &str) -> Value {
    json!({
        "id": id,
        "manifold": {"kind": "sphere", "dim": 2},
        "objective": {"kind": "squared_distance", "anchors": [[0.0, 0.0, 1.0]], "domain_radius": 1.0},
        "solver": {"method": "gradient", "max_iters": 200},
        "p0": [0.6, 0.0, 0.8]
    })
}

fn single(mut exp: Value) -> Value {
    exp["schema_version"] = json!(1);
    exp
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn valid_sphere_gradient_run_writes_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &single(sphere_gradient("sg")));
    let out = riemopt(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "c.json")
        .collect();
    files.sort();
    assert_eq!(files, vec!["sg.certificate.json", "sg.trace.csv"]);

    let csv = std::fs::read_to_string(dir.path().join("sg.trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,f_value,step_t,dir_norm,dist_to_opt,f_gap,x0,x1,x2");
    assert_eq!(csv.lines().count(), 202);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    assert_eq!(row[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);

    let cert = read_json(&dir.path().join("sg.certificate.json"));
    assert_eq!(cert["schema_version"], 1);
    assert_eq!(cert["config"]["id"], "sg");
    let certs = cert["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 3);
    for c in certs {
        assert_eq!(c["status"], "certified");
        assert_eq!(c["holds"], true);
    }
    assert_eq!(cert["prefix_audits"][0]["samples"], 10);
}

#[test]
fn polyak_without_f_star_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(json!({
        "id": "fw",
        "manifold": {"kind": "euclidean", "dim": 2},
        "objective": {"kind": "fermat_weber", "anchors": [[0, 0], [2, 0], [1, 3]]},
        "solver": {"method": "subgradient", "step": {"rule": "polyak"}, "max_iters": 100},
        "p0": [3.0, 2.0]
    }));
    let p = write_config(dir.path(), "c.json", &cfg);
    let out = riemopt(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("polyak requires f_star"));
}

#[test]
fn domain_exit_is_recorded_and_not_applicable() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = sphere_gradient("exit");
    exp["solver"] = json!({"method": "gradient", "step": {"rule": "fixed_sequence", "steps": [5.0]}, "max_iters": 20});
    let p = write_config(dir.path(), "c.json", &single(exp));
    let out = riemopt(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(&dir.path().join("exit.certificate.json"));
    assert_eq!(cert["terminated_reason"], "DomainExit");
    assert!(cert["certificates"].as_array().unwrap().is_empty());

    // The same exit under t = 1/L with a mis-declared tiny L.
    let mut exp = sphere_gradient("exit2");
    exp["objective"]["grad_lipschitz"] = json!(0.05);
    let p = write_config(dir.path(), "c2.json", &single(exp));
    let out = riemopt(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let cert = read_json(&dir.path().join("exit2.certificate.json"));
    assert_eq!(cert["terminated_reason"], "DomainExit");
    for c in cert["certificates"].as_array().unwrap() {
        assert_eq!(c["status"], "not_applicable");
    }
}

#[test]
fn failing_certificate_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single(json!({
        "id": "osc",
        "manifold": {"kind": "euclidean", "dim": 2},
        "objective": {"kind": "squared_distance", "anchors": [[0, 0]], "grad_lipschitz": 0.5},
        "solver": {"method": "gradient", "max_iters": 10},
        "p0": [1.0, 0.0]
    }));
    let p = write_config(dir.path(), "c.json", &cfg);
    let out = riemopt(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let cert = read_json(&dir.path().join("osc.certificate.json"));
    assert_eq!(cert["passed"], false);
}

fn four_manifolds() -> Value {
    json!({
        "schema_version": 1,
        "experiments": [
            {
                "id": "e", "manifold": {"kind": "euclidean", "dim": 3},
                "objective": {"kind": "karcher", "anchors": [[0, 0, 0], [1, 0, 0], [0, 1, 1]], "domain_radius": 3.0},
                "solver": {"method": "gradient", "max_iters": 10}, "p0": [0.5, 0.5, 0.5]
            },
            {
                "id": "s", "manifold": {"kind": "sphere", "dim": 2},
                "objective": {"kind": "squared_distance", "anchors": [[0, 0, 1]], "domain_radius": 1.2},
                "solver": {"method": "gradient", "max_iters": 10}, "p0": "random(4)"
            },
            {
                "id": "h", "manifold": {"kind": "hyperboloid", "dim": 2},
                "objective": {"kind": "squared_distance", "anchors": [[0, 0, 1]], "domain_radius": 1.5},
                "solver": {"method": "gradient", "max_iters": 10}, "p0": "random(5)"
            },
            {
                "id": "p", "manifold": {"kind": "spd", "dim": 2},
                "objective": {"kind": "karcher", "anchors": [[1, 0, 0, 1], [4, 0, 0, 1]], "domain_radius": 2.0},
                "solver": {"method": "gradient", "max_iters": 10}, "p0": [2, 0, 0, 1]
            }
        ]
    })
}

#[test]
fn audits_pass_on_all_four_manifolds() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &four_manifolds());
    let report = dir.path().join("audit.json");
    let out = riemopt(&[
        "audit",
        p.to_str().unwrap(),
        "--seed",
        "1",
        "--samples",
        "1000",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let v = read_json(&report);
    assert_eq!(v["experiments"].as_array().unwrap().len(), 4);
    for e in v["experiments"].as_array().unwrap() {
        for r in e["reports"].as_array().unwrap() {
            assert_eq!(r["violations"], 0, "{r}");
        }
    }
}

#[test]
fn halved_lipschitz_constant_fails_the_descent_audit() {
    let dir = tempfile::tempdir().unwrap();
    let r: f64 = 1.5;
    let l = r / r.tanh();
    let cfg = single(json!({
        "id": "half",
        "manifold": {"kind": "hyperboloid", "dim": 2},
        "objective": {"kind": "squared_distance", "anchors": [[0, 0, 1]], "domain_radius": r, "grad_lipschitz": l / 2.0},
        "solver": {"method": "gradient", "max_iters": 10},
        "p0": "random(1)"
    }));
    let p = write_config(dir.path(), "c.json", &cfg);
    let out = riemopt(&["audit", p.to_str().unwrap(), "--seed", "1", "--samples", "1000"]);
    assert_eq!(code(&out), 2);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let descent = v["experiments"][0]["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["suite_id"] == "descent-lemma")
        .unwrap()
        .clone();
    assert!(descent["violations"].as_u64().unwrap() > 0);
}

#[test]
fn zero_samples_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &single(sphere_gradient("z")));
    let out = riemopt(&["audit", p.to_str().unwrap(), "--samples", "0"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid argument"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut exp = sphere_gradient("m");
    exp["solver"]["max_iters"] = json!(-3);
    let p = write_config(dir.path(), "c.json", &json!({"schema_version": 1, "experiments": [exp]}));
    let out = riemopt(&["run", p.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("experiments[0].solver.max_iters"), "{err}");

    let out = riemopt(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn identical_runs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let cfg = four_manifolds();
    for d in [&a, &b] {
        let p = write_config(d, "c.json", &cfg);
        assert_eq!(code(&riemopt(&["run", p.to_str().unwrap()])), 0);
    }
    for id in ["e", "s", "h", "p"] {
        let name = format!("{id}.trace.csv");
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn summarize_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = four_manifolds();
    cfg["experiments"]
        .as_array_mut()
        .unwrap()
        .push(json!({
            "id": "osc",
            "manifold": {"kind": "euclidean", "dim": 2},
            "objective": {"kind": "squared_distance", "anchors": [[0, 0]], "grad_lipschitz": 0.5},
            "solver": {"method": "gradient", "max_iters": 10},
            "p0": [1.0, 0.0]
        }));
    let p = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(code(&riemopt(&["run", p.to_str().unwrap()])), 2);

    let one = dir.path().join("one.csv");
    let s_cert = dir.path().join("s.certificate.json");
    let out = riemopt(&["summarize", s_cert.to_str().unwrap(), "-o", one.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&one).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(
        text.lines().next().unwrap(),
        "experiment_id,theorem_id,N,lhs,rhs,margin,holds,wall_time_ms"
    );

    let empty = dir.path().join("empty.csv");
    assert_eq!(code(&riemopt(&["summarize", "-o", empty.to_str().unwrap()])), 0);
    assert_eq!(std::fs::read_to_string(&empty).unwrap().lines().count(), 1);

    let mut all: Vec<String> = ["e", "s", "h", "p", "osc"]
        .iter()
        .map(|id| dir.path().join(format!("{id}.certificate.json")).to_str().unwrap().to_string())
        .collect();
    let mixed = dir.path().join("mixed.csv");
    let mut args = vec!["summarize".to_string()];
    args.append(&mut all.clone());
    args.extend(["-o".into(), mixed.to_str().unwrap().into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&riemopt(&args)), 0);
    let first = std::fs::read(&mixed).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().any(|r| r[6] == "false"));
    assert!(rows.iter().any(|r| r[6] == "true"));
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[1].to_string(), r[0].to_string())).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);

    // Idempotent, and independent of the input order.
    all.reverse();
    let mut args = vec!["summarize".to_string()];
    args.append(&mut all);
    args.extend(["-o".into(), mixed.to_str().unwrap().into()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&riemopt(&args)), 0);
    assert_eq!(std::fs::read(&mixed).unwrap(), first);

    let missing = dir.path().join("nope.json");
    let out = riemopt(&["summarize", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn summary_rows_round_trip_the_in_memory_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.json", &four_manifolds());
    let file = riemopt_cli::load_config(&p).unwrap();
    let results = riemopt_cli::run_config(&file, riemopt_cli::Tolerances::global(1e-9)).unwrap();
    let paths: Vec<PathBuf> = results.iter().map(|r| r.certificate_path.clone()).collect();
    let rows = riemopt_cli::collect_rows(&paths).unwrap();
    let mut expected = Vec::new();
    for r in &results {
        for c in &r.certificates {
            if let riemopt::certificates::CertificateOutcome::Certified(c) = c {
                expected.push((c.theorem_id.to_string(), r.id.clone(), c.n, c.lhs, c.rhs, c.margin, c.holds));
            }
        }
    }
    expected.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let got: Vec<_> = rows
        .iter()
        .map(|r| (r.theorem_id.clone(), r.experiment_id.clone(), r.n, r.lhs, r.rhs, r.margin, r.holds))
        .collect();
    assert_eq!(got, expected);
}
