use std::path::Path;
use std::process::{Command, Output};

fn ctriv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctriv"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const ORDERS: &str = r#"[{"n":2,"m":0},{"n":2,"m":0},{"n":2,"m":0}]"#;

#[test]
fn simulate_identify_project_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "sim.json", r#"{"n": 6000}"#);
    write(d, "orders.json", ORDERS);
    assert!(ctriv(
        &["simulate", "--config", "sim.json", "--seed", "3", "--out", "d.csv"],
        d
    )
    .status
    .success());
    let header = std::fs::read_to_string(d.join("d.csv")).unwrap();
    assert!(header.starts_with("t,u1,u2,u3,y1,y2,y3\n"));

    let out = ctriv(
        &[
            "identify",
            "--data",
            "d.csv",
            "--orders",
            "orders.json",
            "--out",
            "est.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let est: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("est.json")).unwrap()).unwrap();
    let mut a2: Vec<f64> = est["model"]["subsystems"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["a"][1].as_f64().unwrap())
        .collect();
    a2.sort_by(f64::total_cmp);
    for (got, want) in a2.iter().zip([0.006159_6, 0.012858, 0.100978]) {
        assert!((got - want).abs() < 0.02 * want, "{a2:?}");
    }

    let out = ctriv(
        &[
            "project",
            "--estimate",
            "est.json",
            "--map",
            "modal",
            "--out",
            "modal.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let modal: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("modal.json")).unwrap()).unwrap();
    assert_eq!(modal["modes"].as_array().unwrap().len(), 3);
    assert_eq!(modal["ps"].as_array().unwrap().len(), 24);
}

#[test]
fn closed_loop_identification_uses_written_controller() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "sim.json",
        r#"{"benchmark": {"masses":[1,1,1],"springs":[50,50,50],"damping_ratio":0.02,"fs":100,"loop_mode":"closed",
            "noise":{"arma_num":[1,0.5],"arma_den":[1,-0.85],"snr_db":30}}, "n": 6000}"#,
    );
    write(d, "orders.json", ORDERS);
    let out = ctriv(
        &[
            "simulate",
            "--config",
            "sim.json",
            "--out",
            "c.csv",
            "--controller-out",
            "k.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let args = [
        "identify",
        "--data",
        "c.csv",
        "--orders",
        "orders.json",
        "--loop",
        "closed",
    ];
    let out = ctriv(
        &[&args[..], &["--controller", "k.json", "--out", "e.json"]].concat(),
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = ctriv(&[&args[..], &["--out", "e.json"]].concat(), d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MISSING_CONTROLLER"));
}

#[test]
fn montecarlo_and_plot_write_table_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        d,
        "mc.json",
        r#"{"mc": {"sample_sizes": [600, 1200], "runs": 2, "seed": 1, "init_perturbation": 0.025}}"#,
    );
    let out = ctriv(
        &[
            "montecarlo",
            "--config",
            "mc.json",
            "--out",
            "mse.csv",
            "--plots",
            "plots",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(d.join("mse.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 6);
    assert!(d.join("plots/mse.svg").exists());
    assert!(ctriv(&["plot", "--in", "mse.csv", "--out", "p.svg"], d)
        .status
        .success());
    let svg = std::fs::read_to_string(d.join("p.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 12);
}

#[test]
fn exit_codes_separate_validation_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "orders.json", ORDERS);
    write(d, "bad.json", r#"{"n": 100, "typo": 1}"#);
    assert_eq!(
        ctriv(&["simulate", "--config", "bad.json", "--out", "x.csv"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ctriv(
            &[
                "identify",
                "--data",
                "missing.csv",
                "--orders",
                "orders.json",
                "--out",
                "x.json"
            ],
            d
        )
        .status
        .code(),
        Some(2)
    );
    write(
        d,
        "tiny.json",
        r#"{"mc": {"sample_sizes": [10], "runs": 3, "seed": 1, "init_perturbation": 0.025}}"#,
    );
    let out = ctriv(
        &["montecarlo", "--config", "tiny.json", "--out", "m.csv"],
        d,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MC_UNRELIABLE"));
    write(d, "empty.csv", "method,N,param,mse\n");
    let out = ctriv(&["plot", "--in", "empty.csv", "--out", "e.svg"], d);
    assert_eq!(out.status.code(), Some(2));
}
