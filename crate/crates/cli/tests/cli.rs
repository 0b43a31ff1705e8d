use std::f64::consts::TAU;
use std::path::Path;
use std::process::{Command, Output};

use hyperlab_cli::{read_csv, Schema};
use serde_json::Value;

fn hyperlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperlab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

fn conv_schema() -> Schema {
    Schema::new("hyperlab.conv", &["tau", "value", "error_estimate"])
}

#[test]
fn conv_d1_n3_sandwich() {
    let text = stdout(&hyperlab(&["conv", "--d", "1", "--n", "3", "--tau", "3.001:100:500"]));
    let schema = Schema::new("hyperlab.conv.d1n3", &["tau", "value", "lower_L", "upper_U", "error_estimate"]);
    let t = read_csv(&text, &schema).unwrap();
    assert_eq!(t.rows.len(), 500);
    assert_eq!(t.config.command, "conv");
    let (v, l, u) = (
        t.floats("value").unwrap(),
        t.floats("lower_L").unwrap(),
        t.floats("upper_U").unwrap(),
    );
    for i in 0..500 {
        assert!(l[i] <= v[i] && v[i] <= u[i], "row {i}");
    }
}

#[test]
fn conv_closed_forms_and_zero_region() {
    let text = stdout(&hyperlab(&["conv", "--d", "2", "--n", "3", "--tau", "3:50:100"]));
    let t = read_csv(&text, &conv_schema()).unwrap();
    for (tau, v) in t.floats("tau").unwrap().iter().zip(t.floats("value").unwrap()) {
        assert!((v - TAU * TAU * (1.0 - 3.0 / tau)).abs() < 1e-12 * TAU * TAU);
    }
    let text = stdout(&hyperlab(&["conv", "--d", "1", "--n", "2", "--tau", "1:1.9:10"]));
    let t = read_csv(&text, &conv_schema()).unwrap();
    assert_eq!(t.rows.len(), 10);
    assert!(t.floats("value").unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn conv_recursion_above_four() {
    let text = stdout(&hyperlab(&["conv", "--d", "1", "--n", "4", "--tau", "3.5:6:3"]));
    let t = read_csv(&text, &conv_schema()).unwrap();
    let v = t.floats("value").unwrap();
    assert_eq!(v[0], 0.0);
    assert!(v[1] > 0.0 && v[2] > v[1]);
}

#[test]
fn conv_json_output() {
    let v = json(&hyperlab(&["conv", "--d", "2", "--n", "2", "--tau", "2:4:3", "--format", "json"]));
    assert_eq!(v["schema"], "hyperlab.conv/v1");
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["args"]["tau"], "2:4:3");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["conv", "--d", "1", "--n", "3", "--tau", "5:3:10"],
        vec!["conv", "--d", "3", "--n", "2", "--tau", "1:2:3"],
        vec!["conv", "--d", "1", "--n", "3", "--tau", "nonsense"],
        vec!["constants", "--case", "d3p4"],
        vec!["constants", "--case", "bogus"],
        vec!["bilinear", "--q", "2", "--k", "0", "--l", "1"],
        vec!["quotient", "--family", "gauss", "--a", "1"],
        vec!["frobnicate"],
    ] {
        let o = hyperlab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = hyperlab(&["constants", "--case", "d3p4"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("H^3"));
}

#[test]
fn constants_report() {
    let v = json(&hyperlab(&["constants"]));
    assert_eq!(v["schema"], "hyperlab.constants/v1");
    assert_eq!(v["report"]["pass"], true);
    let cs = v["report"]["constants"].as_array().unwrap();
    assert_eq!(cs.len(), 3);
    let h24 = cs.iter().find(|c| c["case"] == "d2p4").unwrap();
    assert!((h24["value"].as_f64().unwrap() - 2f64.powf(0.75) * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn quotient_table() {
    let text = stdout(&hyperlab(&["quotient", "--family", "exp", "--a", "1,10,100"]));
    let schema = Schema::new("hyperlab.quotient", &["a", "Q", "gap", "error", "tail_bound"]);
    let t = read_csv(&text, &schema).unwrap();
    let q = t.floats("Q").unwrap();
    let limit = TAU / 3f64.sqrt();
    assert!(q[0] < q[1] && q[1] < q[2] && q[2] < limit);
    assert!(t.floats("gap").unwrap()[2] < 0.02 * limit);
}

#[test]
fn caps_and_bilinear_reports() {
    let v = json(&hyperlab(&["caps", "--d", "2", "--n", "5", "--j", "7"]));
    assert!(v["report"]["max_abs_xi"].as_f64().unwrap() <= 8.8858);
    assert_eq!(v["report"]["pass"], true);
    let v = json(&hyperlab(&["caps", "--d", "1", "--n", "-4"]));
    assert!(v["report"]["max_abs_rapidity"].as_f64().unwrap() <= 0.5);
    let v = json(&hyperlab(&["bilinear", "--q", "4", "--k", "0", "--l", "6"]));
    assert_eq!(v["report"]["finite"], true);
    assert!(v["report"]["decay_normalized_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn search_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"d": 2, "p": 4, "family": {"kind": "exp", "m": 1, "bounds": [[0.1, 50.0]]},
            "optimizer": {"iters": 25, "tol": 1e-10, "restarts": 3}, "seed": 11}"#,
    )
    .unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    for out in [&out1, &out2] {
        let o = hyperlab(&["search", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(&out1).unwrap();
    assert_eq!(a, std::fs::read_to_string(&out2).unwrap());
    let cols = [
        "restart",
        "iteration",
        "evaluations",
        "best_quotient",
        "best_error",
        "param_1",
        "boost",
        "x0_1",
        "x0_2",
        "t0",
        "cap",
        "cap_mass",
    ];
    let t = read_csv(&a, &Schema::new("hyperlab.search", &cols)).unwrap();
    let q = t.floats("best_quotient").unwrap();
    assert!(q.windows(2).all(|w| w[1] >= w[0]));
    assert!(q[q.len() - 1] < 2f64.powf(0.75) * std::f64::consts::PI);
    // a different seed gives a different trace
    let o = hyperlab(&["search", "--spec", spec.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(
        stdout(&o).lines().skip(4).collect::<Vec<_>>(),
        a.lines().skip(4).collect::<Vec<_>>()
    );
}

#[test]
fn io_errors_exit_3() {
    let o = hyperlab(&["search", "--spec", "/nonexistent/spec.json"]);
    assert_eq!(o.status.code(), Some(3));
    let o = hyperlab(&[
        "conv",
        "--d",
        "2",
        "--n",
        "2",
        "--tau",
        "2:3:2",
        "--out",
        "/nonexistent/dir/out.csv",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!Path::new("/nonexistent/dir/out.csv").exists());
}

#[test]
fn thread_cap_from_environment() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_hyperlab"))
            .env("HYPERLAB_THREADS", v)
            .args(["conv", "--d", "2", "--n", "2", "--tau", "2:3:2"])
            .output()
            .unwrap()
    };
    let o = run("1");
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("\"threads\":1"));
    assert_eq!(run("zero").status.code(), Some(2));
}
