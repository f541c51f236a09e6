//! End-to-end runs of the `geodex` binary against the checked-in fixtures.
//!
//! Each test spawns the real executable, so exit codes, stdout text, and the
//! structured format are all checked exactly as a shell user would see them.

use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    p.to_str().expect("fixture path is utf-8").to_string()
}

fn run_with(envs: &[(&str, &str)], args: &[&str]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_geodex"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn geodex");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("stdout is utf-8"),
        String::from_utf8(out.stderr).expect("stderr is utf-8"),
    )
}

fn run(args: &[&str]) -> (i32, String, String) {
    run_with(&[], args)
}

#[test]
fn betti_contract_example() {
    let (code, stdout, _) = run(&["betti", "--n", "1", "--max", "8"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("0,0,1,0,2,0,2,0,2"), "{stdout}");
}

#[test]
fn resonance_certifies_the_fixtures() {
    let (code, stdout, _) = run(&["resonance", &fixture("katok_s3.json")]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("LHS = 1 = RHS"), "{stdout}");

    let (code, stdout, _) = run(&["resonance", &fixture("katok_s5.json")]);
    assert_eq!(code, 0);
    assert!(stdout.contains("LHS = 3/4 = RHS"), "{stdout}");
}

#[test]
fn morse_audit_splits_the_controls() {
    let (code, stdout, _) = run(&["morse-audit", &fixture("uniform4.json"), "--cap", "10"]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("M_2=0 < beta_2=1"), "{stdout}");

    let (code, stdout, _) = run(&["morse-audit", &fixture("katok_s3.json"), "--cap", "20"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("audit: clean through degree 20"), "{stdout}");
}

#[test]
fn multiplicity_verdict_exit_codes() {
    let (code, stdout, _) = run(&["multiplicity", &fixture("katok_s3.json")]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("consistent, at least 4"), "{stdout}");

    let (code, stdout, _) = run(&["multiplicity", &fixture("hyperbolic4.json")]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("verdict: violated"), "{stdout}");
}

#[test]
fn jump_find_verify_dual_round_trip() {
    let dir = tempfile::tempdir().expect("tempdir");
    let cert = dir.path().join("cert.json");
    let cert = cert.to_str().unwrap();
    let model = fixture("katok_s3.json");

    let (code, stdout, _) = run(&["jump", "find", &model, "--limit", "2", "--out", cert]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("ok (30 checks)"), "{stdout}");

    // The parallel scan reports the same certificates in the same order.
    let (code, par_stdout, _) = run(&[
        "jump", "find", &model, "--limit", "2", "--out", cert, "--parallel",
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout, par_stdout);

    let (code, stdout, _) = run(&["jump", "verify", &model, cert]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("verification: pass"), "{stdout}");

    let (code, stdout, _) = run(&["jump", "dual", &model, cert]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("dual of N="), "{stdout}");
    assert!(stdout.contains("ok (30 checks)"), "{stdout}");

    // Bending one m_k breaks the per-iterate identities: verification fails
    // with rows, not a usage error.
    let raw = std::fs::read_to_string(cert).unwrap();
    let mut file: Value = serde_json::from_str(&raw).unwrap();
    let m0 = file["certificate"]["m"][0].as_u64().unwrap();
    file["certificate"]["m"][0] = Value::from(m0 + 1);
    let bent = dir.path().join("bent.json");
    std::fs::write(&bent, serde_json::to_string(&file).unwrap()).unwrap();
    let (code, stdout, _) = run(&["jump", "verify", &model, bent.to_str().unwrap()]);
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn structured_reports_parse_and_round_trip() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["betti", "--n", "2", "--max", "12"],
        vec!["iterate", "--m", "3"],
        vec!["mean-index"],
        vec!["nullity", "--m", "4"],
        vec!["resonance"],
        vec!["multiplicity"],
    ];
    let model = fixture("katok_s3.json");
    for mut args in cases {
        if args[0] != "betti" {
            args.insert(1, model.as_str());
        }
        args.extend_from_slice(&["--format", "structured"]);
        let (code, stdout, stderr) = run(&args);
        assert_eq!(code, 0, "{args:?}: {stderr}");
        let value: Value = serde_json::from_str(&stdout).expect("structured output is JSON");
        assert_eq!(value["schema_version"], Value::from(1u32), "{args:?}");
        let again: Value = serde_json::from_str(&value.to_string()).unwrap();
        assert_eq!(value, again, "{args:?}");
    }

    // A failing audit still emits a well-formed report.
    let (code, stdout, _) = run(&[
        "morse-audit",
        &fixture("uniform4.json"),
        "--cap",
        "10",
        "--format",
        "structured",
    ]);
    assert_eq!(code, 1);
    let value: Value = serde_json::from_str(&stdout).unwrap();
    assert!(!value["report"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn structured_find_output_is_a_loadable_certificate() {
    let (code, stdout, _) = run(&[
        "jump",
        "find",
        &fixture("katok_s3.json"),
        "--format",
        "structured",
    ]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&stdout).unwrap();
    let entry = value["certificates"][0].clone();
    let cert: geodex_core::JumpCertificate = serde_json::from_value(entry.clone()).unwrap();
    assert_eq!(cert.n_value, 396);
    assert!(cert.verification.pass);
    // Exact scalars survive the trip through text unchanged.
    assert_eq!(serde_json::to_value(&cert).unwrap(), entry);
}

#[test]
fn approx_touches_tables_but_never_structured_output() {
    let model = fixture("katok_s3.json");
    let (code, stdout, _) = run(&["mean-index", &model, "--approx"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("2.343146"), "{stdout}");
    assert!(!stdout.contains("sqrt"), "{stdout}");

    let (code, stdout, _) = run(&["mean-index", &model, "--approx", "--format", "structured"]);
    assert_eq!(code, 0);
    let value: Value = serde_json::from_str(&stdout).unwrap();
    let shown = value["rows"][0]["mean_index"].as_str().unwrap();
    assert_eq!(shown, "8 - 4*sqrt(2)");
}

#[test]
fn katok_gen_reproduces_the_fixture() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("gen.json");
    let out_str = out.to_str().unwrap();
    let (code, stdout, _) = run(&[
        "katok", "gen", "--n", "1", "--alpha", "1/4*sqrt(2)", "--out", out_str,
    ]);
    assert_eq!(code, 0, "{stdout}");
    let generated = geodex_core::model::load_system(&out).unwrap();
    let pinned = geodex_core::model::load_system(fixture("katok_s3.json")).unwrap();
    assert_eq!(generated, pinned);

    // A rational alpha is rejected as a parameter error.
    let (code, _, stderr) = run(&["katok", "gen", "--n", "1", "--alpha", "1/2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("irrational"), "{stderr}");
}

#[test]
fn scan_budget_env_override() {
    let model = fixture("katok_s3.json");
    let (code, _, stderr) = run_with(&[("GEODEX_SCAN_BUDGET", "50")], &["jump", "find", &model]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("budget exhausted"), "{stderr}");

    let (code, _, stderr) = run_with(&[("GEODEX_SCAN_BUDGET", "oops")], &["multiplicity", &model]);
    assert_eq!(code, 2);
    assert!(stderr.contains("GEODEX_SCAN_BUDGET"), "{stderr}");
}

#[test]
fn unusable_input_names_the_problem() {
    let (code, _, stderr) = run(&["iterate", "no_such_file.json", "--m", "1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("no_such_file.json"), "{stderr}");

    let dir = tempfile::tempdir().expect("tempdir");
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema_version":1,"system":{"n":1,"group_label":"g","bumpy":false,"curvature_pinched":false,"geodesics":[],"surprise":0}}"#,
    )
    .unwrap();
    let (code, _, stderr) = run(&["iterate", bad.to_str().unwrap(), "--m", "1"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("surprise"), "{stderr}");
    assert!(stderr.contains("line 1"), "{stderr}");

    let (code, _, stderr) = run(&["iterate", &fixture("katok_s3.json"), "--m", "0"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("at least 1"), "{stderr}");

    // Unknown flags are clap usage errors, also exit 2.
    let (code, _, _) = run(&["betti", "--n", "1", "--max", "8", "--frobnicate"]);
    assert_eq!(code, 2);
}
