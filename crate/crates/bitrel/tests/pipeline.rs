//! End-to-end tests of the command line stages, driven through the binary.

use std::path::Path;
use std::process::{Command, Output};

const ENV_KNOBS: [&str; 9] = [
    "BITREL_SEED",
    "BITREL_SYSTEMS",
    "BITREL_SAMPLES",
    "BITREL_METRICS",
    "BITREL_POLICY",
    "BITREL_FORMAT",
    "BITREL_JOBS",
    "BITREL_STATISTIC",
    "BITREL_WINDOW",
];

// A child process must see only the knobs a test sets on purpose, not
// whatever happens to be exported in the developer's shell.
fn bitrel() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bitrel"));
    for knob in ENV_KNOBS {
        cmd.env_remove(knob);
    }
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn staged_stages_reproduce_the_fused_run() {
    let dir = tempfile::tempdir().unwrap();
    let fused = dir.path().join("fused");
    run_ok(bitrel().args([
        "run", "--seed", "77", "--systems", "10", "--samples", "300", "--out", s(&fused),
    ]));

    let specs_dir = dir.path().join("specs");
    let traces_dir = dir.path().join("traces");
    let est_dir = dir.path().join("est");
    let results = dir.path().join("results.csv");
    run_ok(bitrel().args([
        "gen", "--seed", "77", "--systems", "10", "--out", s(&specs_dir),
    ]));
    let specs: Vec<String> = (0..10)
        .map(|i| s(&specs_dir.join(format!("sys_{i}.spec"))).to_string())
        .collect();
    let mut sim = bitrel();
    sim.args(["sim", "--samples", "300", "--out", s(&traces_dir)]);
    sim.args(&specs);
    run_ok(&mut sim);
    let traces: Vec<String> = (0..10)
        .map(|i| s(&traces_dir.join(format!("sys_{i}.btr"))).to_string())
        .collect();
    let mut est = bitrel();
    est.args(["est", "--out", s(&est_dir)]);
    est.args(&traces);
    run_ok(&mut est);
    let mut score = bitrel();
    score.args(["score", "--est", s(&est_dir), "--out", s(&results)]);
    score.args(&specs);
    run_ok(&mut score);

    let staged = std::fs::read(&results).unwrap();
    let inline = std::fs::read(fused.join("results.csv")).unwrap();
    assert!(!staged.is_empty());
    assert_eq!(staged, inline, "staged results differ from fused run");
}

#[test]
fn generated_specs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        run_ok(bitrel().args(["gen", "--seed", "5", "--systems", "3", "--out", s(&out)]));
        bytes.push(std::fs::read(out.join("sys_2.spec")).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn csv_traces_estimate_identically_to_packed_traces() {
    let dir = tempfile::tempdir().unwrap();
    let specs_dir = dir.path().join("specs");
    run_ok(bitrel().args(["gen", "--seed", "11", "--systems", "2", "--out", s(&specs_dir)]));
    let spec = specs_dir.join("sys_0.spec");

    let mut matrices = Vec::new();
    for format in ["btr", "csv"] {
        let traces_dir = dir.path().join(format!("traces_{format}"));
        let est_dir = dir.path().join(format!("est_{format}"));
        run_ok(bitrel().args([
            "sim", "--samples", "200", "--format", format, "--out", s(&traces_dir), s(&spec),
        ]));
        run_ok(bitrel().args([
            "est", "--out", s(&est_dir),
            s(&traces_dir.join(format!("sys_0.{format}"))),
        ]));
        matrices.push(std::fs::read(est_dir.join("sys_0_ham.csv")).unwrap());
    }
    assert_eq!(matrices[0], matrices[1], "trace format changed the estimates");
}

#[test]
fn report_emits_curves_for_an_explicit_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_ok(bitrel().args([
        "run", "--seed", "3", "--systems", "10", "--samples", "200", "--out", s(&out),
    ]));

    // The fused run already swept every statistic.
    for stat in ["tpr", "tnr", "ppv", "npv", "acc", "bacc", "bmi", "mcc"] {
        let csv = out.join("report").join(format!("{stat}.csv"));
        assert!(csv.exists(), "missing {stat}.csv");
    }
    let bacc = std::fs::read_to_string(out.join("report/bacc.csv")).unwrap();
    assert_eq!(bacc.lines().count(), 257, "grid rows plus header");
    let header = bacc.lines().next().unwrap();
    assert!(header.starts_with("x,"), "header: {header}");

    let report_dir = dir.path().join("explicit");
    run_ok(bitrel().args([
        "report", "--statistic", "mcc", "--out", s(&report_dir),
        s(&out.join("results.csv")),
    ]));
    assert!(report_dir.join("mcc.csv").exists());
    let svg = std::fs::read_to_string(report_dir.join("mcc.svg")).unwrap();
    if !svg.contains("<svg") || !svg.contains("polyline") {
        panic!("mcc.svg does not look like a chart");
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(
        exit_code(bitrel().args([
            "run", "--systems", "1", "--samples", "50",
            "--metrics", "bogus", "--out", s(&out),
        ])),
        2
    );
    assert_eq!(
        exit_code(bitrel().args([
            "run", "--systems", "1", "--samples", "50",
            "--window", "9:5", "--out", s(&out),
        ])),
        2
    );
    // Unknown flag, rejected by the parser itself.
    assert_eq!(exit_code(bitrel().args(["gen", "--frobnicate"])), 2);
}

#[test]
fn missing_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(
        exit_code(bitrel().args([
            "sim", "--samples", "10", "--out", s(&out), "/nonexistent/sys_0.spec",
        ])),
        3
    );
}

#[test]
fn malformed_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let bad_spec = dir.path().join("sys_0.spec");
    std::fs::write(&bad_spec, "not a spec at all [[[").unwrap();
    let out = dir.path().join("x");
    assert_eq!(
        exit_code(bitrel().args(["sim", "--samples", "10", "--out", s(&out), s(&bad_spec)])),
        4
    );

    let bad_trace = dir.path().join("sys_0.btr");
    std::fs::write(&bad_trace, b"XXXXgarbage").unwrap();
    assert_eq!(
        exit_code(bitrel().args(["est", "--out", s(&out), s(&bad_trace)])),
        4
    );
}

#[test]
fn failed_run_leaves_a_marker_until_a_rerun_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let code = exit_code(bitrel().args([
        "run", "--seed", "1", "--systems", "2", "--samples", "50",
        "--window", "40:90000", "--out", s(&out),
    ]));
    if code == 0 {
        panic!("run with an oversized window should fail");
    }
    let marker = out.join("run.failed");
    assert!(marker.exists(), "no failure marker written");
    let note = std::fs::read_to_string(&marker).unwrap();
    assert!(!note.trim().is_empty(), "marker should carry the error");

    run_ok(bitrel().args([
        "run", "--seed", "1", "--systems", "2", "--samples", "50", "--out", s(&out),
    ]));
    if marker.exists() {
        panic!("marker survived a successful rerun");
    }
}

#[test]
fn environment_variables_fill_unset_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("specs");
    let mut cmd = bitrel();
    cmd.env("BITREL_SYSTEMS", "3").env("BITREL_SEED", "21");
    cmd.args(["gen", "--out", s(&out)]);
    run_ok(&mut cmd);
    for i in 0..3 {
        assert!(out.join(format!("sys_{i}.spec")).exists());
    }
    assert!(!out.join("sys_3.spec").exists());
}

#[test]
fn flags_beat_environment_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bitrel.toml");
    std::fs::write(&config, "systems = 2\nseed = 9\n").unwrap();

    let from_config = dir.path().join("from_config");
    run_ok(bitrel().args(["gen", "--config", s(&config), "--out", s(&from_config)]));
    assert!(from_config.join("sys_1.spec").exists());
    assert!(!from_config.join("sys_2.spec").exists());

    let from_env = dir.path().join("from_env");
    let mut cmd = bitrel();
    cmd.env("BITREL_SYSTEMS", "3");
    cmd.args(["gen", "--config", s(&config), "--out", s(&from_env)]);
    run_ok(&mut cmd);
    assert!(from_env.join("sys_2.spec").exists());
    assert!(!from_env.join("sys_3.spec").exists());

    let from_flag = dir.path().join("from_flag");
    let mut cmd = bitrel();
    cmd.env("BITREL_SYSTEMS", "3");
    cmd.args(["gen", "--config", s(&config), "--systems", "4", "--out", s(&from_flag)]);
    run_ok(&mut cmd);
    assert!(from_flag.join("sys_3.spec").exists());

    let unknown_key = dir.path().join("unknown.toml");
    std::fs::write(&unknown_key, "sytems = 2\n").unwrap();
    let code = exit_code(bitrel().args([
        "gen", "--config", s(&unknown_key), "--out", s(&dir.path().join("y")),
    ]));
    if code == 0 {
        panic!("a misspelled config key should be rejected");
    }
}

#[test]
fn window_restricts_the_estimation_range() {
    let dir = tempfile::tempdir().unwrap();
    let specs_dir = dir.path().join("specs");
    let traces_dir = dir.path().join("traces");
    run_ok(bitrel().args(["gen", "--seed", "13", "--systems", "1", "--out", s(&specs_dir)]));
    run_ok(bitrel().args([
        "sim", "--samples", "2000", "--out", s(&traces_dir),
        s(&specs_dir.join("sys_0.spec")),
    ]));
    let trace = traces_dir.join("sys_0.btr");

    let full_dir = dir.path().join("est_full");
    let windowed_dir = dir.path().join("est_window");
    run_ok(bitrel().args(["est", "--metrics", "ham", "--out", s(&full_dir), s(&trace)]));
    run_ok(bitrel().args([
        "est", "--metrics", "ham", "--window", "0:200", "--out", s(&windowed_dir), s(&trace),
    ]));
    let full = std::fs::read(full_dir.join("sys_0_ham.csv")).unwrap();
    let windowed = std::fs::read(windowed_dir.join("sys_0_ham.csv")).unwrap();
    assert!(full != windowed, "window had no effect on the estimates");
}
