use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use planar_dvm::io::{self, FieldMeta};
use planar_dvm::{DomainSpec, Field, Grid};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_planar-dvm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn shifted_broadwell() -> Value {
    json!({"velocities": [[3,2],[1,2],[2,3],[2,1]], "rules": [{"i":1,"j":2,"l":3,"m":4,"gamma":1.0}]})
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Small grid and short schedules so the binary finishes in seconds.
fn small_config(boundary: Value) -> Value {
    json!({
        "model": {"source": "inline", "velocities": [[3,2],[1,2],[2,3],[2,1]], "rules": [{"i":1,"j":2,"l":3,"m":4,"gamma":1.0}]},
        "boundary": boundary,
        "solver": {"grid_n": 24, "alpha_schedule": [0.25, 0.125], "k_schedule": [4.0, 16.0], "boundary_nodes": 512},
        "diagnostics": {"boundary_nodes": 512},
        "output": "out"
    })
}

#[test]
fn model_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "shifted.json", &shifted_broadwell());
    let o = run(&["model", "check", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("normal, generic, n0 found"));

    let classical = write(
        dir.path(),
        "classical.json",
        &json!({"velocities": [[1,0],[-1,0],[0,1],[0,-1]], "rules": [{"i":1,"j":2,"l":3,"m":4,"gamma":1.0}]}),
    );
    let o = run(&["model", "check", classical.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("generic: no"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"velocities\": [[1, 2]],").unwrap();
    assert_eq!(code(&run(&["model", "check", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["model", "check", dir.path().join("missing.json").to_str().unwrap()])), 2);
}

#[test]
fn generators_write_checkable_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen.json");
    let o = run(&["model", "gen-shifted", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m = read_json(&out);
    assert_eq!(m["velocities"], json!([[3.0, 2.0], [1.0, 2.0], [2.0, 3.0], [2.0, 1.0]]));
    assert_eq!(code(&run(&["model", "check", out.to_str().unwrap()])), 0);

    let spec = write(
        dir.path(),
        "circle.json",
        &json!({"quadruples": [[[3,2],[1,2],[2,3],[2,1]], [[2,1],[4,5],[4,1],[2,5]]], "gammas": [1.0, 0.5], "n0": [1, 1]}),
    );
    let out = dir.path().join("circle_model.json");
    assert_eq!(code(&run(&["model", "gen-circle", spec.to_str().unwrap(), "-o", out.to_str().unwrap()])), 0);
    assert_eq!(read_json(&out)["velocities"].as_array().unwrap().len(), 7);
    // two rules cannot leave only the classical invariants for seven velocities
    let o = run(&["model", "check", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("generic: yes") && stdout(&o).contains("normal: no"));

    assert_eq!(code(&run(&["model", "gen-shifted", "--c0", "1.0"])), 2);
}

#[test]
fn zero_inflow_solve_gives_zero_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "zero.json", &small_config(json!({"profile": "constant", "values": [0.0]})));
    let o = run(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["all_converged"], true);
    for level in summary["levels"].as_array().unwrap() {
        for key in ["mass", "mild_untruncated", "mild_truncated", "renormalized"] {
            assert_eq!(level["residuals"][key], 0.0, "{key}");
        }
        let (f, _) = io::read_field(&dir.path().join("out").join(level["field"].as_str().unwrap())).unwrap();
        assert!(f.data().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn maxwellian_defaults_meet_the_residual_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "max.json",
        &json!({
            "model": {"source": "file", "path": "model.json"},
            "boundary": {"profile": "maxwellian", "a": 0.0, "b": [0.1, -0.2], "c": 0.05}
        }),
    );
    write(dir.path(), "model.json", &shifted_broadwell());
    let o = run(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["residual_within_threshold"], true, "{summary}");
    let levels = summary["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    let last = &levels[3]["residuals"]["mild_untruncated"];
    assert!(last.as_f64().unwrap() <= 1e-3, "{last}");
}

#[test]
fn forced_non_convergence_exits_3_and_keeps_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(json!({"profile": "constant", "values": [1.0, 2.0, 0.5, 1.5]}));
    c["solver"]["max_outer"] = json!(1);
    let cfg = write(dir.path(), "c.json", &c);
    let o = run(&["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["all_converged"], false);
    assert!(dir.path().join("out/field_k16.csv").exists());
}

#[test]
fn single_and_alpha_sweep_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", &small_config(json!({"profile": "step", "low": 0.5, "high": 2.0, "start": 0.1, "end": 0.4})));
    let out = dir.path().join("single");
    let o = run(&["solve", "--single", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stage = read_json(&out.join("stage.json"));
    assert!(stage["mass"].as_f64().unwrap() <= stage["mass_cap"].as_f64().unwrap() * (1.0 + 1e-12));
    assert_eq!(stage["monotone_violations"], 0);

    let out = dir.path().join("sweep");
    let o = run(&["sweep", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(out.join("field_k16_a0p25.csv").exists());
    assert!(out.join("field_k16_a0p125.csv").exists());
    assert_eq!(read_json(&out.join("summary.json"))["mode"], "alpha-sweep");
}

#[test]
fn diagnose_round_trips_solver_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.json", &small_config(json!({"profile": "maxwellian", "a": 0.0, "b": [0.1, -0.2], "c": 0.05})));
    assert_eq!(code(&run(&["solve", "-c", cfg.to_str().unwrap()])), 0);
    let summary = read_json(&dir.path().join("out/summary.json"));
    let level = &summary["levels"][1];
    let field = dir.path().join("out").join(level["field"].as_str().unwrap());
    let out = dir.path().join("diag");
    let o = run(&["diagnose", "-c", cfg.to_str().unwrap(), "-f", field.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("field_k16.diagnostics.json"));
    let mass = level["residuals"]["mass"].as_f64().unwrap();
    let reread = report["flux"]["mass"].as_f64().unwrap();
    assert!((reread - mass).abs() <= 1e-12 * mass, "{reread} vs {mass}");
    assert!(report["dissipation"]["total"].as_f64().unwrap() >= 0.0);
    assert!(report["dissipation"]["min_term"].as_f64().unwrap() >= 0.0);
    assert!(out.join("field_k16.moduli.csv").exists());
}

#[test]
fn diagnose_hand_made_constant_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &small_config(json!({"profile": "constant", "values": [1.0]})));
    let spec = DomainSpec::unit_disk();
    let grid = Arc::new(Grid::new(&spec.build().unwrap(), 24));
    let field = Field::constant(grid, &[1.0; 4]);
    let model = io::parse_model(&serde_json::to_string(&shifted_broadwell()).unwrap()).unwrap();
    let path = dir.path().join("const.csv");
    let meta = FieldMeta {
        grid: field.grid().spec(),
        p: 4,
        model_hash: io::model_hash(&model).unwrap(),
        config_hash: None,
        data_hash: String::new(),
        mass: 0.0,
        alpha: Some(0.0),
        k: Some(16.0),
        label: "constant".into(),
    };
    io::write_field(&path, &field, meta).unwrap();
    let out = dir.path().join("diag");
    let o = run(&["diagnose", "-c", cfg.to_str().unwrap(), "-f", path.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("const.diagnostics.json"));
    assert_eq!(report["dissipation"]["total"], 0.0);
    let inflow: f64 = report["flux"]["inflow"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    let outflow: f64 = report["flux"]["outflow"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((inflow - outflow).abs() <= 1e-6 * inflow, "{inflow} vs {outflow}");

    // a different model must be rejected
    let mut other = small_config(json!({"profile": "constant", "values": [1.0]}));
    other["model"]["rules"][0]["gamma"] = json!(2.0);
    let other = write(dir.path(), "other.json", &other);
    assert_eq!(code(&run(&["diagnose", "-c", other.to_str().unwrap(), "-f", path.to_str().unwrap()])), 2);

    // a tampered data file must be rejected
    let text = fs::read_to_string(&path).unwrap().replacen(",1\n", ",2\n", 1);
    fs::write(&path, text).unwrap();
    assert_eq!(code(&run(&["diagnose", "-c", cfg.to_str().unwrap(), "-f", path.to_str().unwrap()])), 2);
}

#[test]
fn invalid_configs_are_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(json!({"profile": "constant", "values": [1.0]}));
    c["solver"]["alpha_schedule"] = json!([0.1, 0.2]);
    let p = write(dir.path(), "a.json", &c);
    assert_eq!(code(&run(&["solve", "-c", p.to_str().unwrap()])), 2);

    let mut c = small_config(json!({"profile": "constant", "values": [1.0]}));
    c["colour"] = json!("blue");
    let p = write(dir.path(), "b.json", &c);
    assert_eq!(code(&run(&["solve", "-c", p.to_str().unwrap()])), 2);

    let c = small_config(json!({"profile": "constant", "values": [1.0, 2.0]}));
    let p = write(dir.path(), "c.json", &c);
    assert_eq!(code(&run(&["solve", "-c", p.to_str().unwrap()])), 2);
    assert!(!dir.path().join("out").exists());

    let mut c = small_config(json!({"profile": "constant", "values": [1.0]}));
    c["model"]["velocities"] = json!([[3, 2], [1, 2], [2, 3], [2, 2]]);
    let p = write(dir.path(), "d.json", &c);
    assert_eq!(code(&run(&["solve", "-c", p.to_str().unwrap()])), 1);
}

#[test]
fn help_documents_defaults_and_exit_codes() {
    let o = run(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for needle in ["EXIT CODES", "\"tol_outer\": 1e-10", "\"grid_n\": 64", "\"epsilons\""] {
        assert!(text.contains(needle), "missing {needle}");
    }
}
