use std::collections::BTreeSet;

use bte::cli::run;
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["bte"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json_lines(s: &str) -> Vec<Value> {
    s.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn numbers_nilpotent_formula() {
    let (code, out, _) = call(&["numbers", "--p", "2", "--order", "nilpotent", "--level", "3", "--method", "formula"]);
    assert_eq!(code, 0);
    let v = &json_lines(&out)[0];
    assert_eq!(v["e"], serde_json::json!([4, 2, 4, 2]));
    assert_eq!(v["order"]["kind"], "nilpotent");
    assert_eq!(v["level"], 3);
    assert_eq!(v["method"], "formula");
    assert_eq!(v["flags"], serde_json::json!([]));
}

#[test]
fn numbers_all_methods_agree() {
    let (code, out, _) = call(&["numbers", "--p", "3", "--order", "split", "--t", "1", "--level", "2", "--method", "all"]);
    assert_eq!(code, 0);
    let rows = json_lines(&out);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r["e"], rows[0]["e"]);
    }
    assert_eq!(rows[2]["stabilized"], true);
}

#[test]
fn flagged_numbers_are_strings() {
    let (code, out, _) = call(&["numbers", "--p", "2", "--order", "split", "--t", "1", "--level", "1"]);
    assert_eq!(code, 0);
    let v = &json_lines(&out)[0];
    assert_eq!(v["e"], serde_json::json!([2, 1, "3/2", "3/4"]));
    assert!(!v["flags"].as_array().unwrap().is_empty());
}

#[test]
fn chi_prints_integer() {
    let (code, out, _) = call(&["chi", "--p", "2", "--r", "2", "--u", "1", "--t", "1"]);
    assert_eq!(code, 0);
    assert!(out.trim().parse::<u64>().is_ok());
    let (code, _, err) = call(&["chi", "--p", "2", "--r", "3", "--u", "1", "--t", "1"]);
    assert_eq!(code, 3);
    let e: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(e["error"], "domain_violation");
}

fn dot_graph(s: &str) -> (BTreeSet<String>, BTreeSet<(String, String)>) {
    let mut vs = BTreeSet::new();
    let mut es = BTreeSet::new();
    for line in s.lines().map(str::trim) {
        let quoted: Vec<&str> = line.split('"').skip(1).step_by(2).collect();
        match quoted.len() {
            1 => {
                vs.insert(quoted[0].to_string());
            }
            2 => {
                es.insert((quoted[0].to_string(), quoted[1].to_string()));
            }
            _ => {}
        }
    }
    (vs, es)
}

#[test]
fn branch_dot_round_trips_with_json() {
    for order in [["--order", "split", "--t", "1"], ["--order", "triangular", "--t", "2"], ["--order", "nilpotent", "--t", "0"]] {
        let mut args = vec!["branch", "--p", "3", "--radius", "3"];
        args.extend_from_slice(&order);
        let (code, dot, _) = call(&args);
        assert_eq!(code, 0);
        assert!(dot.starts_with("digraph branch {"));
        let (dv, de) = dot_graph(&dot);
        args.extend_from_slice(&["--format", "json"]);
        let (_, js, _) = call(&args);
        let v: Value = serde_json::from_str(js.trim()).unwrap();
        let jv: BTreeSet<String> =
            v["vertices"].as_array().unwrap().iter().map(|x| x["label"].as_str().unwrap().to_string()).collect();
        let je: BTreeSet<(String, String)> = v["edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e[0].as_str().unwrap().to_string(), e[1].as_str().unwrap().to_string()))
            .collect();
        assert_eq!(dv, jv);
        assert_eq!(de, je);
        assert!(jv.contains("B_0^[0]"));
        // a tree: connected region with one fewer edge than vertices
        assert_eq!(je.len() + 1, jv.len());
    }
}

#[test]
fn stem_vertices_are_boxes() {
    let (_, dot, _) = call(&["branch", "--p", "2", "--order", "split", "--t", "1", "--radius", "2"]);
    assert!(dot.contains("\"B_0^[0]\" [shape=box"));
    assert!(dot.contains("\"B_1^[1]\" [shape=circle"));
}

#[test]
fn act_and_crossratio() {
    let (code, out, _) = call(&["act", "--p", "3", "--matrix", "1,0,0,3", "--ball", "B_1^[1]"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["image"], "B_1/3^[0]");
    let (code, out, _) = call(&["act", "--p", "3", "--matrix", "0,1,1,0", "--end", "inf"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["image"]["valuation"], "inf");
    // [0, inf; 1, -2] = -1/2
    let (code, out, _) = call(&["crossratio", "--p", "3", "--ends", "0,inf,1,-2"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["cross_ratio"]["valuation"], 0);
    let (u, m) = (v["cross_ratio"]["unit"].as_u64().unwrap(), v["cross_ratio"]["unit_modulus"].as_u64().unwrap());
    assert_eq!((2 * u + 1) % m, 0);
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["--help"]).0, 0);
    assert_eq!(call(&["--version"]).0, 0);
    assert_eq!(call(&["numbers", "--p", "2"]).0, 2);
    assert_eq!(call(&["numbers", "--p", "4", "--order", "nilpotent", "--level", "1"]).0, 2);
    assert_eq!(call(&["frobnicate"]).0, 2);
    assert_eq!(call(&["act", "--p", "3", "--matrix", "1,2,1", "--end", "0"]).0, 2);
    let (code, _, err) = call(&["act", "--p", "3", "--matrix", "1,1,1,1", "--end", "0"]);
    assert_eq!(code, 3);
    let e: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(e["error"], "invalid_input");
    assert_eq!(call(&["numbers", "--p", "2", "--order", "eichler", "--level", "1"]).0, 3);
}

#[test]
fn crosscheck_small_grid_has_no_mismatch() {
    let (code, out, _) = call(&["crosscheck", "--primes", "2", "--kinds", "nilpotent,triangular", "--t-max", "1", "--r-max", "2"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("MISMATCH=0"));
    let (code, out, _) = call(&["crosscheck", "--primes", "2", "--kinds", "split", "--t-max", "1", "--r-min", "1", "--r-max", "1", "--format", "json"]);
    assert_eq!(code, 0);
    let rows = json_lines(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["verdict"] == "KNOWN-GAP"));
}
