use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sumset(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumset")).args(args).output().expect("binary runs")
}

fn sumset_threads(args: &[&str], threads: usize) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumset"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn construct2_four_count_certifies_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = sumset(&["construct2", "--oracle", "four-count", "--n", "12", "--m", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(cert["case"], "CASE2");
    assert_eq!(cert["config"]["oracle"], "four-count");
    assert_eq!(cert["config"]["seed"], 0);
    assert_eq!(code(&sumset(&["verify", out.to_str().unwrap()])), 0);
}

#[test]
fn construct2_support_size_succeeds() {
    let o = sumset(&["construct2", "--oracle", "support-size", "--n", "12", "--m", "4"]);
    assert_eq!(code(&o), 0);
    let cert: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(cert["case"].is_string());
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&sumset(&["construct2", "--n", "12", "--m", "4"])), 1);
    assert_eq!(code(&sumset(&["construct2", "--oracle", "no-such-kind", "--n", "12", "--m", "4"])), 1);
    assert_eq!(code(&sumset(&["frobnicate"])), 1);
    assert_eq!(code(&sumset(&["--help"])), 0);
}

#[test]
fn budget_zero_is_not_found() {
    let o = sumset(&["construct2", "--oracle", "four-count", "--n", "12", "--m", "4", "--budget", "0"]);
    assert_eq!(code(&o), 2);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["not_found"]["exhaustive"], false);
}

#[test]
fn tampered_certificate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = sumset(&["construct2", "--oracle", "four-count", "--n", "12", "--m", "4"]);
    let mut cert: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = cert["color"].as_u64().unwrap();
    cert["color"] = Value::from(1 - c);
    let path = write(dir.path(), "bad.json", &serde_json::to_string_pretty(&cert).unwrap());
    let v = sumset(&["verify", &path]);
    assert_eq!(code(&v), 3);
    assert!(stdout(&v).contains("NotMonochromatic"));

    // a listed sum color that disagrees with the oracle
    let mut cert: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s = cert["sums"][0]["color"].as_u64().unwrap();
    cert["sums"][0]["color"] = Value::from(1 - s);
    let path = write(dir.path(), "bad2.json", &serde_json::to_string_pretty(&cert).unwrap());
    assert_eq!(code(&sumset(&["verify", &path])), 3);
}

#[test]
fn malformed_certificate_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "junk.json", "{\"pipeline\": \"construct2\", \"X\": [");
    assert_eq!(code(&sumset(&["verify", &path])), 1);
    assert_eq!(code(&sumset(&["verify", "/nonexistent/cert.json"])), 1);
}

#[test]
fn construct_r_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = sumset(&[
        "construct-r",
        "--oracle",
        "order-invariant:profile:0,1,2,0",
        "--r",
        "3",
        "--n",
        "60",
        "--m",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cert: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!((cert["l_prime"].as_u64(), cert["l"].as_u64()), (Some(0), Some(3)));
    assert_eq!(code(&sumset(&["verify", out.to_str().unwrap()])), 0);

    let o = sumset(&["construct-r", "--oracle", "constant:1", "--r", "3", "--n", "60", "--m", "3"]);
    assert_eq!(code(&o), 0);
    let cert: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cert["color"], 1);

    // m below r is rejected before any search
    assert_eq!(code(&sumset(&["construct-r", "--oracle", "four-count", "--r", "3", "--n", "60", "--m", "2"])), 1);
}

fn table_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn search_tables() {
    let o = sumset(&["search", "--k", "1", "--r", "3", "--m-max", "10"]);
    assert_eq!(code(&o), 0);
    let rows = table_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[3] == "FORCED"));

    let dir = tempfile::tempdir().unwrap();
    let o = sumset(&["search", "--k", "2", "--r", "2", "--m-max", "16", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let rows = table_rows(&fs::read_to_string(dir.path().join("table.csv")).unwrap());
    for row in &rows {
        let m: usize = row[2].parse().unwrap();
        assert_eq!(row[3], if m >= 14 { "FORCED" } else { "ESCAPABLE" }, "M = {m}");
        if m < 14 {
            let text = fs::read_to_string(dir.path().join(&row[4])).unwrap();
            let c = sumset_core_coloring(&text);
            assert_eq!(c.len(), m);
        }
    }

    let o = sumset(&["search", "--k", "2", "--r", "2", "--m-max", "8", "--budget", "0"]);
    assert_eq!(code(&o), 0);
    assert!(table_rows(&stdout(&o)).iter().all(|r| r[3] == "UNDECIDED"));
}

// parse "i:color" lines without the library, checking order
fn sumset_core_coloring(text: &str) -> Vec<u8> {
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            let (n, c) = l.split_once(':').unwrap();
            assert_eq!(n.parse::<usize>().unwrap(), i + 1);
            c.parse().unwrap()
        })
        .collect()
}

#[test]
fn search_resumes_from_checkpoint_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("cp");
    let cp = cp.to_str().unwrap();
    let base = ["search", "--k", "2", "--r", "2", "--m-max", "15", "--checkpoint-dir", cp, "--checkpoint-every", "10"];
    let mut partial = base.to_vec();
    partial.extend(["--budget", "30"]);
    assert_eq!(code(&sumset(&partial)), 0);
    assert!(fs::read_dir(cp).unwrap().count() > 0);
    let resumed = sumset(&base);
    let fresh = sumset(&["search", "--k", "2", "--r", "2", "--m-max", "15"]);
    assert_eq!(table_rows(&stdout(&resumed)), table_rows(&stdout(&fresh)));
    assert_eq!(fs::read_dir(cp).unwrap().count(), 0);
}

#[test]
fn deltasys_generate_check_and_mutate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let o = sumset(&["deltasys", "generate", "--n", "4", "--d", "2", "--pad", "1,1,0", "--slack", "2", "--instance", inst.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["clean"], true);
    assert_eq!(code(&sumset(&["deltasys", "check", inst.to_str().unwrap()])), 0);

    // swap the largest point of W({e0}) for e1: the intersection with
    // W({e1}) then exceeds W(∅)
    let mut s: Value = serde_json::from_str(&fs::read_to_string(&inst).unwrap()).unwrap();
    let e: Vec<u64> = s["E"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    let entry = s["W"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .find(|w| w["u"] == Value::from(vec![e[0]]))
        .unwrap();
    let mut support: Vec<u64> = entry["support"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert_ne!(support.pop(), Some(e[0]));
    support.push(e[1]);
    support.sort_unstable();
    entry["support"] = Value::from(support);
    let bad = write(dir.path(), "bad.json", &serde_json::to_string(&s).unwrap());
    let o = sumset(&["deltasys", "check", &bad]);
    assert_eq!(code(&o), 3);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(!report["cl3_violations"].as_array().unwrap().is_empty());

    let o = sumset(&["deltasys", "generate", "--n", "0", "--d", "2"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["clean"], true);
    assert_eq!(report["domain_size"], 1);
}

#[test]
fn ramsey_direct_search() {
    let o = sumset(&["ramsey", "--coloring", "derived:0", "--oracle", "four-count", "--r", "2", "--n", "10", "--m", "4"]);
    assert_eq!(code(&o), 0);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["found"]["members"].as_array().unwrap().len(), 4);
    assert_eq!(code(&sumset(&["ramsey", "--coloring", "random:2:2", "--n", "8", "--m", "4", "--budget", "0"])), 2);
    assert_eq!(code(&sumset(&["ramsey", "--coloring", "derived:1", "--n", "8", "--m", "4"])), 1);
}

/// Same config and seed, different worker counts: byte-identical output.
#[test]
fn outputs_do_not_depend_on_worker_count() {
    let runs: Vec<Vec<&str>> = vec![
        vec!["construct2", "--oracle", "seeded-hash", "--n", "12", "--m", "4", "--seed", "7"],
        vec!["construct2", "--oracle", "floor-sum", "--n", "12", "--m", "4"],
        vec!["construct-r", "--oracle", "order-invariant:profile:1,0,0,1", "--r", "3", "--n", "60", "--m", "4"],
        vec!["search", "--k", "2", "--r", "2", "--m-max", "14", "--seed", "3"],
        vec!["deltasys", "generate", "--n", "6", "--d", "3", "--slack", "3", "--seed", "11"],
        vec!["ramsey", "--coloring", "random:3:2", "--n", "12", "--m", "5", "--seed", "5"],
    ];
    for args in runs {
        let one = sumset_threads(&args, 1);
        let many = sumset_threads(&args, 8);
        let mut with_flag = args.clone();
        with_flag.extend(["--workers", "3"]);
        let flagged = sumset(&with_flag);
        assert_eq!(one.stdout, many.stdout, "{args:?}");
        assert_eq!(one.stdout, flagged.stdout, "{args:?}");
        assert_eq!(code(&one), code(&many));
        assert!(!one.stdout.is_empty(), "{args:?}");
    }
}
