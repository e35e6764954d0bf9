use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], stdin: &str) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_contract-forge"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(args: &[&str], stdin: &str) -> String {
    let r = run(args, stdin);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r.stdout
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gap_setting_solves_to_one() {
    let inst = ok(&["gen", "gap", "--c", "2", "--gamma", "0.1"], "");
    let out = json(&ok(&["solve"], &inst));
    assert!((out["payoff"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((out["first_best"].as_f64().unwrap() - 1.9).abs() < 1e-9);
    assert_eq!(out["provenance"]["command"], "solve");
}

#[test]
fn delta_advantage_contract_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let inst_text = ok(&["gen", "a3", "--eps", "0.3", "--delta", "0.5"], "");
    let inst = json(&inst_text);
    let contract = serde_json::to_string(&inst["provenance"]["metadata"]["delta_contract"]).unwrap();
    let ip = write(dir.path(), "a3.json", &inst_text);
    let cp = write(dir.path(), "c.json", &contract);
    let out = json(&ok(
        &[
            "verify",
            "--instance",
            &ip,
            "--contract",
            &cp,
            "--action",
            "1",
            "--delta",
            "0.5",
        ],
        "",
    ));
    assert!(out["slack"].as_f64().unwrap() >= 0.0);
    assert_eq!(out["holds"], true);
    assert!((out["payoff"].as_f64().unwrap() - 0.4).abs() < 1e-9);
    // Not exactly IC: the agent would rather take the free action.
    let exact = json(&ok(
        &["verify", "--instance", &ip, "--contract", &cp, "--action", "1"],
        "",
    ));
    assert_eq!(exact["holds"], false);
    assert_eq!(exact["best_response"]["action"], 0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let r = run(&["solve", "--bogus"], "");
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("Usage"));
    assert!(r.stdout.is_empty());
}

#[test]
fn malformed_input_exits_two() {
    let r = run(&["solve"], "{\"kind\": \"product\"}");
    assert_eq!(r.code, 2);
    assert!(r.stderr.starts_with("error:"));
}

#[test]
fn unimplementable_action_exits_three() {
    let inst = r#"{"kind": "explicit", "costs": [0, 0.1], "outcome_rewards": [0, 1],
                   "dist": [[0.5, 0.5], [0.5, 0.5]]}"#;
    assert_eq!(run(&["solve", "--action", "1"], inst).code, 3);
    assert_eq!(run(&["solve", "--action", "0"], inst).code, 0);
}

#[test]
fn enumeration_limit_exits_four() {
    let inst = ok(&["gen", "random", "--n", "2", "--m", "21"], "");
    assert_eq!(run(&["solve"], &inst).code, 4);
    // The delta solver never enumerates outcomes.
    let out = json(&ok(&["delta-solve", "--delta", "0.1", "--action", "0"], &inst));
    assert_eq!(out["expected_payment"], 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let cmds: [&[&str]; 3] = [
        &["--seed", "7", "gen", "random", "--n", "3", "--m", "4"],
        &[
            "--seed",
            "3",
            "blackbox",
            "--negative-pair",
            "0.001",
            "--samples",
            "5",
            "--trials",
            "100",
        ],
        &[
            "--seed", "5", "bench", "--n", "3", "--m", "4", "--count", "4", "--delta", "0.1", "--gamma", "0.5",
        ],
    ];
    for args in cmds {
        assert_eq!(ok(args, ""), ok(args, ""), "{args:?}");
    }
    let one = ok(&["bench", "--n", "3", "--m", "3", "--count", "8", "--jobs", "1"], "");
    let four = ok(&["bench", "--n", "3", "--m", "3", "--count", "8", "--jobs", "4"], "");
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 10);
}

#[test]
fn emitted_json_reloads_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let inst = ok(&["--seed", "2", "gen", "random", "--n", "3", "--m", "3"], "");
    let solved = ok(&["solve", "--delta", "0.1"], &inst);
    // A solve result is accepted wherever a contract is expected.
    let cp = write(dir.path(), "solved.json", &solved);
    let ip = write(dir.path(), "inst.json", &inst);
    let v = json(&ok(
        &["verify", "--instance", &ip, "--contract", &cp, "--delta", "0.1"],
        "",
    ));
    assert_eq!(v["holds"], true);
    assert_eq!(v["action"], json(&solved)["action"]);

    let parsed = contract_forge::formats::parse_instance(&inst, Default::default()).unwrap();
    let again = contract_forge::formats::instance_to_json(&parsed, Some(json(&inst)["provenance"].clone()));
    assert_eq!(json(&inst), again);
}

#[test]
fn delta_solve_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let inst = ok(&["gen", "gap", "--c", "2", "--gamma", "0.1"], "");
    let out = json(&ok(
        &["delta-solve", "--delta", "0.01", "--trace", trace.to_str().unwrap()],
        &inst,
    ));
    assert!(out["payoff"].as_f64().unwrap() >= 1.0 - 1e-5);
    assert_eq!(out["per_action"].as_array().unwrap().len(), 2);
    let text = std::fs::read_to_string(trace).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# contract-forge"));
    assert_eq!(
        lines.next().unwrap(),
        "action,bisection,round,gamma,verdict,cut,ratio,threshold,lambda"
    );
    assert!(lines.next().is_some());
}

#[test]
fn linear_and_transform_commands() {
    let dir = tempfile::tempdir().unwrap();
    let inst = ok(&["--seed", "4", "gen", "random", "--n", "4", "--m", "3"], "");
    let approx = json(&ok(&["linear", "--delta", "0.1", "--gamma", "0.5"], &inst));
    assert!(approx["payoff"].as_f64().unwrap() >= approx["guarantee"].as_f64().unwrap());
    let sep = json(&ok(&["linear", "--separable"], &inst));
    let lin = json(&ok(&["linear"], &inst));
    assert!(sep["payoff"].as_f64().unwrap() >= lin["payoff"].as_f64().unwrap() - 1e-7);

    let ip = write(dir.path(), "inst.json", &inst);
    let solved = ok(&["solve", "--delta", "0.2", "--notion", "add"], &inst);
    let cp = write(dir.path(), "c.json", &solved);
    let ic = json(&ok(
        &[
            "transform",
            "--instance",
            &ip,
            "--contract",
            &cp,
            "--delta",
            "0.2",
            "--to",
            "ic",
        ],
        "",
    ));
    assert!(ic["payoff"].as_f64().unwrap() >= ic["payoff_bound"].as_f64().unwrap() - 1e-7);
    let ir = json(&ok(
        &[
            "transform",
            "--instance",
            &ip,
            "--contract",
            &cp,
            "--delta",
            "0.2",
            "--to",
            "ir",
        ],
        "",
    ));
    assert!(ir["agent_utility"].as_f64().unwrap() >= -1e-9);
    assert_eq!(
        run(
            &[
                "transform",
                "--instance",
                &ip,
                "--contract",
                &cp,
                "--delta",
                "1",
                "--to",
                "ic"
            ],
            ""
        )
        .code,
        2
    );
}

#[test]
fn oracle_command_reports_stats() {
    let q = r#"{"weights": [1.0], "mixtures": [[0.25, 0.25]], "reference": [0.5, 0.5]}"#;
    let brute = json(&ok(&["oracle", "--brute"], q));
    assert!((brute["ratio"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let fptas = json(&ok(&["oracle", "--eps", "0.1"], q));
    assert!(fptas["ratio"].as_f64().unwrap() <= 1.1 * 0.25);
    assert!(fptas["stats"]["t"].as_u64().unwrap() > 0);
}

#[test]
fn sat_generators_read_dimacs() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = write(dir.path(), "f.cnf", "c tiny\np cnf 3 2\n1 -2 3 0\n-1 2 0\n");
    let sat = json(&ok(&["gen", "sat", "--cnf", &cnf], ""));
    assert_eq!(sat["probs"].as_array().unwrap().len(), 2);
    let p2 = json(&ok(&["gen", "product2", "--cnf", &cnf, "--eps", "0.1"], ""));
    assert_eq!(p2["costs"].as_array().unwrap().len(), 3);
    let pc = json(&ok(&["gen", "productc", "--cnf", &cnf, "--c", "3", "--eps", "0.1"], ""));
    assert_eq!(pc["costs"].as_array().unwrap().len(), 7);
    let bad = write(dir.path(), "bad.cnf", "p cnf 2 1\n1 3 0\n");
    assert_eq!(run(&["gen", "sat", "--cnf", &bad], "").code, 2);
}

#[test]
fn blackbox_csv_has_one_row_per_trial() {
    let inst = ok(&["gen", "a3", "--eps", "0.3", "--delta", "0.5"], "");
    let out = ok(
        &[
            "--seed", "10", "blackbox", "--eps", "0.1", "--gamma", "0.1", "--eta", "0.05", "--trials", "3",
        ],
        &inst,
    );
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[2].starts_with("0,10,"));
    assert!(lines[4].starts_with("2,12,"));
}
