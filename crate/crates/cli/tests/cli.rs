use std::process::{Command, Output};

use qcsim::exec::einsum;
use qcsim::tn::{Label, Tensor};
use qcsim::C64;
use serde_json::Value;

fn qcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcsim")).args(args).env_remove("QCSIM_WORKERS").output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = qcsim(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings");
    v
}

#[test]
fn simulate_qft_counts_gates_and_keeps_norm() {
    let r = report(&["simulate", "--circuit", "qft", "--n", "20", "--engine", "sv"]);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["counters"]["gates"], 220);
    assert!((r["result"]["norm_squared"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn dry_run_reports_the_large_qft_without_allocating() {
    let r = report(&["simulate", "--circuit", "qft", "--n", "33", "--dry-run"]);
    assert_eq!(r["counters"]["gates"], 577);
    assert_eq!(r["result"]["dry_run"], true);
    assert!(r["result"].get("digest").is_none());
}

#[test]
fn mps_run_verifies_against_state_vector() {
    let r = report(&["simulate", "--circuit", "qv", "--n", "10", "--depth", "30", "--engine", "mps", "--max-bond", "64", "--verify"]);
    let v = &r["result"]["verify"];
    assert_eq!(v["passed"], true);
    assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-8);
}

#[test]
fn every_engine_agrees_on_qaoa() {
    for engine in ["sv", "sv-dist", "mps", "tn"] {
        let r = report(&["simulate", "--circuit", "qaoa", "--n", "8", "--p", "2", "--engine", engine, "--verify", "--tolerance", "1e-10"]);
        assert_eq!(r["result"]["verify"]["passed"], true, "{engine}");
    }
}

#[test]
fn fused_simulation_verifies_and_shrinks() {
    let r = report(&["simulate", "--circuit", "qft", "--n", "10", "--max-fused-gate-size", "4", "--verify", "--tolerance", "1e-10"]);
    assert_eq!(r["result"]["verify"]["passed"], true);
    assert!(r["counters"]["fused_gates"].as_u64().unwrap() < r["counters"]["gates"].as_u64().unwrap());
}

#[test]
fn failed_verification_exits_two_with_diff() {
    let out = qcsim(&["simulate", "--circuit", "qv", "--n", "8", "--engine", "mps", "--max-bond", "1", "--verify"]);
    assert_eq!(out.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = &r["result"]["verify"];
    assert_eq!(v["passed"], false);
    assert!(v["fidelity"].as_f64().unwrap() < 1.0 - 1e-8);
    assert!(v["worst"]["bits"].as_str().unwrap().len() == 8);
}

#[test]
fn infeasible_requests_exit_three() {
    assert_eq!(qcsim(&["simulate", "--circuit", "qft", "--n", "40"]).status.code(), Some(3));
    assert_eq!(qcsim(&["pathfind", "--circuit", "qft", "--n", "8", "--memory-budget", "1"]).status.code(), Some(3));
}

#[test]
fn invalid_input_exits_one() {
    assert_eq!(qcsim(&["simulate", "--circuit", "qft"]).status.code(), Some(1));
    assert_eq!(qcsim(&["simulate", "--circuit", "qft", "--n", "4", "--engine", "warp"]).status.code(), Some(1));
    assert_eq!(qcsim(&["simulate", "--circuit", "/nonexistent.json"]).status.code(), Some(1));
}

#[test]
fn reports_are_deterministic_apart_from_timings() {
    let args = ["--seed", "7", "simulate", "--circuit", "qv", "--n", "8", "--engine", "sv-dist", "--global-bits", "2"];
    assert_eq!(without_timings(report(&args)), without_timings(report(&args)));
    let args = ["--seed", "7", "pathfind", "--circuit", "rqc", "--rows", "3", "--cols", "3", "--depth", "4"];
    assert_eq!(without_timings(report(&args)), without_timings(report(&args)));
}

#[test]
fn pathfind_on_two_tensors_costs_one_pairwise_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.json");
    let net = r#"{"tensors":[{"labels":["i","j"],"extents":[2,3]},{"labels":["j","k"],"extents":[3,4]}],"output":["i","k"]}"#;
    std::fs::write(&path, net).unwrap();
    let r = report(&["pathfind", "--network", path.to_str().unwrap()]);
    assert_eq!(r["counters"]["flops"], 24.0);
}

#[test]
fn more_samples_never_cost_more_than_one() {
    let base = ["pathfind", "--circuit", "rqc", "--rows", "3", "--cols", "3", "--depth", "4", "--compare", "greedy"];
    let one = report(&[&base[..], &["--samples", "1"]].concat());
    let many = report(&[&base[..], &["--samples", "64"]].concat());
    assert_eq!(one["counters"]["tensors"], 30);
    let cost = |r: &Value| r["counters"]["flops"].as_f64().unwrap();
    assert!(cost(&many) <= cost(&one));
    assert!(cost(&many) <= many["result"]["greedy_flops"].as_f64().unwrap());
}

#[test]
fn contract_digest_is_independent_of_workers() {
    let base = ["contract", "--circuit", "qv", "--n", "10", "--target", "state", "--memory-budget", "4096"];
    let one = report(&[&["--workers", "1"][..], &base].concat());
    let four = report(&[&["--workers", "4"][..], &base].concat());
    assert!(one["counters"]["slices"].as_f64().unwrap() > 1.0);
    assert_eq!(one["result"]["digest"], four["result"]["digest"]);
    assert_eq!(four["counters"]["workers"], 4);
}

#[test]
fn worker_count_defaults_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qcsim"))
        .args(["contract", "--circuit", "qft", "--n", "6", "--target", "state"])
        .env("QCSIM_WORKERS", "3")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["counters"]["workers"], 3);
}

#[test]
fn accumulated_slice_ranges_match_full_contraction() {
    let base = ["contract", "--circuit", "qft", "--n", "8", "--target", "state", "--memory-budget", "1024"];
    let full = report(&base);
    let slices = full["counters"]["slices"].as_f64().unwrap() as usize;
    let range = format!("0..{slices}");
    let acc = report(&[&base[..], &["--slices", &range, "--accumulate"]].concat());
    assert_eq!(full["result"]["digest"], acc["result"]["digest"]);
    let part = report(&[&base[..], &["--slices", "0..1"]].concat());
    assert_eq!(part["counters"]["slices_contracted"], 1);
}

#[test]
fn cached_repeats_skip_constant_work() {
    let r = report(&["contract", "--circuit", "qv", "--n", "8", "--target", "state", "--cache-bytes", "100000000", "--mutable", "0", "--repeat", "3"]);
    let flops: Vec<f64> = r["counters"]["flops_executed"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(flops.len(), 3);
    assert!(flops[1] < flops[0] && flops[2] == flops[1]);
    assert_eq!(r["counters"]["cache"]["recomputes"], 0);
}

#[test]
fn bench_emits_one_csv_row_per_run() {
    let out = qcsim(&["bench", "--suites", "qft,qaoa", "--sizes", "6", "--engines", "sv,sv-dist,mps"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["circuit", "n", "gates", "engine", "config", "fused_gates", "max_bond", "fidelity", "digest", "wall_seconds"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert!((row[7].parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn converted_bell_amplitude_contracts_to_inverse_sqrt_two() {
    let dir = tempfile::tempdir().unwrap();
    let circuit = dir.path().join("bell.json");
    std::fs::write(&circuit, r#"{"n":2,"ops":[{"name":"h","targets":[0]},{"name":"x","targets":[1],"controls":[0]}]}"#).unwrap();
    let doc_path = dir.path().join("bell.einsum.json");
    report(&["convert", "--circuit", circuit.to_str().unwrap(), "--target", "amplitude:00", "--output", doc_path.to_str().unwrap()]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&doc_path).unwrap()).unwrap();
    let operands: Vec<Tensor> = doc["operands"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            let shape: Vec<usize> = serde_json::from_value(o["shape"].clone()).unwrap();
            let data: Vec<[f64; 2]> = serde_json::from_value(o["data"].clone()).unwrap();
            let modes = (0..shape.len() as u32).map(Label).collect();
            Tensor::new(modes, shape, data.into_iter().map(|[re, im]| C64::new(re, im)).collect()).unwrap()
        })
        .collect();
    let refs: Vec<&Tensor> = operands.iter().collect();
    let v = einsum(doc["expression"].as_str().unwrap(), &refs).unwrap();
    assert!((v.value().unwrap() - C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
}
