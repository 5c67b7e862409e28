use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_teamrelax");

const BSC: &str = r#"{"nS":2,"nX":2,"nY":2,"nShat":2,"pS":[0.5,0.5],
"channel":[[0.9,0.1],[0.1,0.9]],"separable":{"delta":[[0,1],[1,0]],"rho":[0,0]}}"#;

fn run(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .envs(env.iter().copied())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gaussian_instance_pipes_into_relax() {
    let inst = run(&["gaussian", "--preset", "test-channel", "--grid", "33"], "", &[]);
    let text = json_of(&inst).to_string();
    let out = run(&["relax", "--mode", "separable", "-"], &text, &[]);
    let v = json_of(&out);
    let value = v["value"].as_f64().unwrap();
    assert!((value - 0.756103).abs() < 1e-4, "{value}");
    assert_eq!(v["status"], "optimal");
}

#[test]
fn binary_instance_relaxes_and_solves_to_the_same_value() {
    let relax = json_of(&run(&["relax", "-"], BSC, &[]));
    let solve = json_of(&run(&["solve", "-"], BSC, &[]));
    assert!((relax["value"].as_f64().unwrap() - 0.1).abs() < 1e-6);
    assert!((solve["value"].as_f64().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn malformed_input_exits_with_two() {
    let out = run(&["relax", "-"], "{\"nS\": 2", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = run(&["relax", "-"], &BSC.replace("0.9,0.1", "0.9,0.2"), &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumeration_budget_exits_with_four() {
    let out = run(&["solve", "-"], BSC, &[("TEAMRELAX_BUDGET", "1")]);
    assert_eq!(out.status.code(), Some(4));
    // the heuristic path runs under the same budget
    let out = run(&["solve", "--heuristic", "-"], BSC, &[("TEAMRELAX_BUDGET", "1")]);
    assert!(out.status.success());
    assert_eq!(json_of(&out)["heuristic"], true);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["--seed", "7", "inverse", "--lambda", "0.7", "-"];
    let first = run(&args, BSC, &[]);
    let second = run(&args, BSC, &[]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let grid = run(&["gaussian", "--preset", "bansal-basar", "--grid", "17"], "", &[]);
    assert_eq!(grid.stdout, run(&["gaussian", "--preset", "bansal-basar", "--grid", "17"], "", &[]).stdout);
}

#[test]
fn inverse_round_trip_certifies_the_code() {
    let v = json_of(&run(&["inverse", "--lambda", "1.5", "--mu-a", "0.2,-0.3", "-"], BSC, &[]));
    assert_eq!(v["verify"]["optimal"], true);
    assert_eq!(v["verify"]["heuristic"], false);
    let syn = v["instance"].to_string();
    let solve = json_of(&run(&["solve", "-"], &syn, &[]));
    let diff = solve["value"].as_f64().unwrap() - v["verify"]["candidateValue"].as_f64().unwrap();
    assert!(diff.abs() < 1e-12, "{diff}");
}

#[test]
fn sweep_writes_csv_rows() {
    let out = run(&["sweep", "--preset", "test-channel", "--grids", "9,17", "--restarts", "1"], "", &[]);
    assert!(out.status.success() || out.status.code() == Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "grid,nS,nX,nY,nShat,relaxValue,heuristicExactValue,closedForm,gap,dpiSlack,seconds"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("9,") && lines[2].starts_with("17,"));
    let cols: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(cols.len(), 11);
    assert!((cols[7].parse::<f64>().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn kkt_accepts_a_relax_report() {
    let dir = std::env::temp_dir().join(format!("teamrelax-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let inst_path = dir.join("bsc.json");
    std::fs::write(&inst_path, BSC).unwrap();
    let sol_path = dir.join("sol.json");
    let out = run(&["-o", sol_path.to_str().unwrap(), "relax", inst_path.to_str().unwrap()], "", &[]);
    assert!(out.status.success());
    let v = json_of(&run(&["kkt", "--solution", sol_path.to_str().unwrap(), inst_path.to_str().unwrap()], "", &[]));
    assert!(v["kkt"]["maxResidual"].as_f64().unwrap() < 1e-6, "{v}");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn info_reports_channel_capacity() {
    let v = json_of(&run(&["info", "--what", "capacity", "-"], BSC, &[]));
    let c = v["value"].as_f64().unwrap();
    assert!((c - 0.368064).abs() < 1e-5, "{v}");
}
