use std::path::{Path, PathBuf};
use std::process::Command;

use linflow_cli::canonical::to_canonical_string;
use linflow_cli::commands::{AnalyzeReport, ChainReport, DecomposeReport, FloquetReport};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn linflow(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_linflow"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn scratch(name: &str, text: &str) -> String {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Validates against the shipped schema and checks that parsing and
/// re-emitting reproduces the bytes.
fn check_report<T: Serialize + DeserializeOwned>(command: &str, text: &str) -> Value {
    let schema_path = root().join(format!("schemas/jf-schema-1/{command}.schema.json"));
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let value: Value = serde_json::from_str(text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(&value)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{command}: {errors:?}");
    let parsed: T = serde_json::from_str(text).unwrap();
    assert_eq!(to_canonical_string(&parsed).unwrap(), text);
    value
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn decompose_rotation_example() {
    let r = linflow(&["decompose", "data/x4.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<DecomposeReport>("decompose", &r.stdout);
    let f = &v["result"]["factors"];
    assert_eq!(f["kind"], "additive");
    let e = vec![vec![0., -2., 0.], vec![2., 0., 0.], vec![0., 0., 0.]];
    let h = vec![vec![-1., 0., 0.], vec![0., -1., 0.], vec![0., 0., 2.]];
    assert!(close(&matrix(&f["E"]), &e, 1e-10));
    assert!(close(&matrix(&f["H"]), &h, 1e-10));
    assert!(close(
        &matrix(&f["N"]),
        &[vec![0.; 3], vec![0.; 3], vec![0.; 3]],
        1e-10
    ));
    assert!(f["certificate"]["reconstruction"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn decompose_identity_and_group_elements() {
    let r = linflow(&["decompose", "data/identity3.json", "--time", "discrete"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<DecomposeReport>("decompose", &r.stdout);
    let f = &v["result"]["factors"];
    let id = vec![vec![1., 0., 0.], vec![0., 1., 0.], vec![0., 0., 1.]];
    for k in ["e", "h", "u"] {
        assert!(close(&matrix(&f[k]), &id, 1e-14), "{k}");
    }

    // a fixed element of SL(3) with complex, positive and negative eigenvalues
    let g = r#"{"n": 3, "rows": [[0.6, -1.1, 0.2], [0.9, 0.4, -0.3], [0.1, 0.5, -1.7]]}"#;
    let det = {
        let m: [[f64; 3]; 3] = [[0.6, -1.1, 0.2], [0.9, 0.4, -0.3], [0.1, 0.5, -1.7]];
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    assert!(det.abs() > 0.1);
    let r = linflow(&["decompose", &scratch("group.json", g), "--time", "discrete"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<DecomposeReport>("decompose", &r.stdout);
    let cert = &v["result"]["factors"]["certificate"];
    assert!(cert["reconstruction"].as_f64().unwrap() < 1e-9);
    assert!(cert["commutator"].as_f64().unwrap() < 1e-9);
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(
        linflow(&["decompose", &scratch("bad.json", "{\"n\": 2")]).code,
        2
    );
    let trace = scratch(
        "trace.json",
        r#"{"n": 2, "rows": [[1.0, 0.0], [0.0, 1.0]]}"#,
    );
    assert_eq!(linflow(&["decompose", &trace]).code, 2);
    assert_eq!(linflow(&["decompose", "no/such/file.json"]).code, 1);
    assert_eq!(linflow(&["analyze", "data/x4.json", "--flag", "3"]).code, 2);
    assert_eq!(
        linflow(&["decompose", "data/x4.json", "--cluster-tol", "-1"]).code,
        2
    );
    // clap usage errors
    assert_eq!(linflow(&["decompose"]).code, 2);
}

#[test]
fn exit_code_for_ill_conditioned_spectra() {
    // eigenvalues 2e-13 apart are separated at this tolerance, but their
    // projections have norm of order 1e13
    let near = scratch(
        "near.json",
        r#"{"n": 2, "rows": [[1e-13, 1.0], [0.0, -1e-13]]}"#,
    );
    let r = linflow(&["decompose", &near, "--cluster-tol", "1e-13"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}

#[test]
fn analyze_examples() {
    let r = linflow(&["analyze", "data/x5.json", "--flag", "1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<AnalyzeReport>("analyze", &r.stdout);
    let c = &v["result"]["classification"];
    assert_eq!(c["components"].as_array().unwrap().len(), 2);
    assert_eq!(c["structurally_stable"], false);
    assert_eq!(c["conformal"], false);

    let r = linflow(&["analyze", "data/x1.json", "--flag", "1,2"]);
    let v = check_report::<AnalyzeReport>("analyze", &r.stdout);
    let c = &v["result"]["classification"];
    let comps = c["components"].as_array().unwrap();
    assert_eq!(comps.len(), 6);
    assert!(comps.iter().all(|x| x["dim"] == 0));
    assert_eq!(c["structurally_stable"], true);
    assert_eq!(comps.iter().filter(|x| x["attractor"] == true).count(), 1);
    assert_eq!(comps.iter().filter(|x| x["repeller"] == true).count(), 1);
}

#[test]
fn analyze_simulation_cross_check() {
    let r = linflow(&[
        "analyze",
        "data/x4.json",
        "--flag",
        "1",
        "--simulate",
        "100",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<AnalyzeReport>("analyze", &r.stdout);
    let s = &v["result"]["simulation"];
    assert_eq!(s["forward_matches"], 100);
    assert_eq!(s["backward_matches"], 100);

    let r = linflow(&[
        "analyze",
        "data/x5.json",
        "--flag",
        "1,2",
        "--simulate",
        "20",
        "--time",
        "continuous",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // exp(X_1) as a group element, iterated in discrete time
    let g = format!(
        r#"{{"n": 3, "rows": [[{}, 0, 0], [0, {}, 0], [0, 0, {}]]}}"#,
        (-1f64).exp(),
        (-2f64).exp(),
        3f64.exp()
    );
    let r = linflow(&[
        "analyze",
        &scratch("expx1.json", &g),
        "--time",
        "discrete",
        "--flag",
        "1,2",
        "--simulate",
        "20",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn simulation_mismatch_exits_with_four() {
    // no finite simulation gets within 1e-300 of a component
    let r = linflow(&[
        "analyze",
        "data/x4.json",
        "--simulate",
        "3",
        "--sim-tol",
        "1e-300",
    ]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("contradicts"));
    check_report::<AnalyzeReport>("analyze", &r.stdout);
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "analyze",
        "data/x4.json",
        "--flag",
        "1,2",
        "--simulate",
        "10",
        "--seed",
        "7",
    ];
    let a = linflow(&args);
    let b = linflow(&args);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let c = linflow(&[
        "chain-oracle",
        "data/x5.json",
        "--resolution",
        "300",
        "--eps",
        "0.1",
        "--min-time",
        "0.3",
    ]);
    let d = linflow(&[
        "chain-oracle",
        "data/x5.json",
        "--resolution",
        "300",
        "--eps",
        "0.1",
        "--min-time",
        "0.3",
    ]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn trajectory_table() {
    let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join("traj.csv");
    let p = path.to_string_lossy().into_owned();
    let r = linflow(&[
        "analyze",
        "data/x4.json",
        "--flag",
        "1,2",
        "--simulate",
        "2",
        "--trajectory",
        &p,
        "--trajectory-samples",
        "8",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..4], ["start", "time", "nearest", "distance"]);
    assert_eq!(header.len(), 4 + 3 * 2);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    // 9 forward samples and 8 backward ones per start
    assert_eq!(rows.len(), 2 * 17);
    let times: Vec<f64> = rows
        .iter()
        .take(17)
        .map(|r| r[1].parse().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn chain_oracle_examples() {
    let r = linflow(&[
        "chain-oracle",
        "data/nilpotent2.json",
        "--resolution",
        "400",
        "--eps",
        "0.02",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<ChainReport>("chain-oracle", &r.stdout);
    let res = &v["result"];
    assert_eq!(res["marked_count"], 400);
    assert!(res["agreement"].as_f64().unwrap() >= 0.99);

    let r = linflow(&[
        "chain-oracle",
        "data/hyperbolic2.json",
        "--time",
        "discrete",
        "--resolution",
        "400",
        "--eps",
        "0.005",
        "--min-time",
        "4",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<ChainReport>("chain-oracle", &r.stdout);
    let pts = matrix(&v["result"]["marked_points"]);
    assert!(!pts.is_empty());
    // every marked point is near [e_1] or [e_2]
    assert!(pts.iter().all(|p| p[0].abs().min(p[1].abs()) < 0.05));
    assert!(pts.iter().any(|p| p[0].abs() > 0.99) && pts.iter().any(|p| p[1].abs() > 0.99));

    assert_eq!(
        linflow(&["chain-oracle", "data/x5.json", "--resolution", "10000000"]).code,
        5
    );
    let big = scratch(
        "four.json",
        r#"{"n": 4, "rows": [[1,0,0,0],[0,-1,0,0],[0,0,2,0],[0,0,0,-2]]}"#,
    );
    assert_eq!(linflow(&["chain-oracle", &big]).code, 2);
}

#[test]
fn floquet_examples() {
    let r = linflow(&["floquet", "data/periodic_constant.json", "--flag", "1,2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<FloquetReport>("floquet", &r.stdout);
    let res = &v["result"];
    assert_eq!(res["m"], 1);
    let a0 = vec![
        vec![-0.5, -1.0, 0.0],
        vec![1.0, -0.5, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    assert!(close(&matrix(&res["generator"]), &a0, 1e-8));
    assert!(res["reconstruction_residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(
        res["classification"]["components"]
            .as_array()
            .unwrap()
            .len(),
        3
    );

    // X(t) = c(t) X_0 with mean(c) = 1 has generator X_0
    let r = linflow(&["floquet", "data/periodic_modulated.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = check_report::<FloquetReport>("floquet", &r.stdout);
    let x0 = vec![
        vec![-0.3, -0.6, 0.0],
        vec![0.6, -0.3, 0.0],
        vec![0.0, 0.0, 0.6],
    ];
    assert!(close(&matrix(&v["result"]["generator"]), &x0, 1e-8));

    let r = linflow(&["floquet", "data/periodic_rotation.json"]);
    let v = check_report::<FloquetReport>("floquet", &r.stdout);
    assert_eq!(v["result"]["m"], 2);

    let r = linflow(&[
        "floquet",
        "data/periodic_trig.json",
        "--flag",
        "1,2",
        "--steps",
        "2048",
    ]);
    let v = check_report::<FloquetReport>("floquet", &r.stdout);
    assert!(v["result"]["reconstruction_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn floquet_exit_codes() {
    assert_eq!(
        linflow(&["floquet", "data/periodic_trig.json", "--steps", "32"]).code,
        2
    );
    assert_eq!(linflow(&["floquet", "data/x4.json"]).code, 2);
    // with a cluster tolerance this coarse every eigenvalue of a rotation by
    // 2 pi / 3 counts as lying on the negative axis, for every power tried
    let w = 2.0 * std::f64::consts::PI / 3.0;
    let rot = scratch(
        "third.json",
        &format!(
            r#"{{"T": 1.0, "A0": [[0, {}, 0], [{}, 0, 0], [0, 0, 0]]}}"#,
            -w, w
        ),
    );
    let r = linflow(&["floquet", &rot, "--cluster-tol", "1.5"]);
    assert_eq!(r.code, 6, "{}", r.stderr);
    assert_eq!(linflow(&["floquet", &rot]).code, 0);
}
