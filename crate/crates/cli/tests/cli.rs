use std::process::{Command, Output};

fn oblab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oblab"))
        .args(args)
        .env_remove("OBLAB_SEED")
        .output()
        .expect("binary runs")
}

fn oblab_env(args: &[&str], seed: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oblab"))
        .args(args)
        .env("OBLAB_SEED", seed)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SEARCH: &[&str] = &["search-bench", "--n", "1024", "--epsilon", "1", "--beta", "0.01", "--trials", "200"];

#[test]
fn search_bench_writes_one_row_per_trial() {
    let o = oblab(&["search-bench", "--n", "4096", "--epsilon", "1", "--beta", "0.01", "--trials", "1000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert_eq!(lines[0], "trial,correct,iterations,probes");
    let correct = lines[1..].iter().filter(|l| l.split(',').nth(1) == Some("1")).count();
    assert!(correct >= 980, "{correct}");
}

#[test]
fn same_seed_same_bytes() {
    let mut args = SEARCH.to_vec();
    args.extend(["--seed", "9"]);
    let a = oblab(&args);
    let b = oblab(&args);
    assert_eq!(a.stdout, b.stdout);
    args.extend(["--parallel", "3"]);
    let c = oblab(&args);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn environment_seed_overrides_flag() {
    let mut with_flag = SEARCH.to_vec();
    with_flag.extend(["--seed", "5"]);
    let mut other_flag = SEARCH.to_vec();
    other_flag.extend(["--seed", "6"]);
    let flagged = oblab(&with_flag);
    let env = oblab_env(&other_flag, "5");
    assert_eq!(flagged.stdout, env.stdout);
    assert_ne!(flagged.stdout, oblab(&other_flag).stdout);

    let bad = oblab_env(SEARCH, "not-a-number");
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn invalid_arguments_exit_two() {
    assert_eq!(oblab(&["search-bench", "--n", "64", "--beta", "0.01"]).status.code(), Some(2));
    assert_eq!(oblab(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(oblab(&["search-bench", "--n", "64", "--epsilon", "-1", "--beta", "0.01"]).status.code(), Some(2));
    assert_eq!(oblab(&["locate-bench", "--n", "64", "--p", "2", "--epsilon", "1", "--delta", "0.01"]).status.code(), Some(2));
    assert_eq!(oblab(&["search-bench", "--n", "64", "--epsilon", "1", "--beta", "0.01", "--parallel", "0"]).status.code(), Some(2));
}

#[test]
fn schema_prints_without_required_flags() {
    let o = oblab(&["search-bench", "--schema"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["format"], "csv");
    assert_eq!(v["columns"][0]["name"], "trial");
    let o = oblab(&["verify", "--schema"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["format"], "json");
}

#[test]
fn prefix_reads_a_file_and_rejects_unsorted_input() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, "[1, 2, 3, 4]").unwrap();
    let o = oblab(&["prefix", "--file", good.to_str().unwrap(), "--a", "2.5", "--epsilon", "1", "--delta", "0.01", "--beta", "0.01"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["index"], 2);
    assert_eq!(v["sum"], 3.0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[3, 1, 2]").unwrap();
    let o = oblab(&["prefix", "--file", bad.to_str().unwrap(), "--a", "2", "--epsilon", "1", "--delta", "0.01", "--beta", "0.01"]);
    assert_eq!(o.status.code(), Some(2));

    let missing = dir.path().join("missing.json");
    let o = oblab(&["prefix", "--file", missing.to_str().unwrap(), "--a", "2", "--epsilon", "1", "--delta", "0.01", "--beta", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn out_flag_writes_file_and_nothing_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let mut args = SEARCH.to_vec();
    let p = path.to_str().unwrap().to_string();
    args.extend(["--out", &p]);
    let o = oblab(&args);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&oblab(SEARCH)));

    let failed = dir.path().join("failed.csv");
    let o = oblab(&["search-bench", "--n", "64", "--epsilon", "-1", "--beta", "0.01", "--out", failed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!failed.exists());
}

#[test]
fn verify_reports_an_estimate() {
    let o = oblab(&["verify", "--target", "locate", "--n", "64", "--epsilon", "1", "--delta", "0.01", "--trials", "4000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let eps = v["eps_hat"].as_f64().unwrap();
    assert!((0.0..=1.0 + 0.5).contains(&eps), "{eps}");
    assert_eq!(v["trials"], 4000);
    assert!(v["note"].as_str().unwrap().contains("lower"));
}

#[test]
fn dump_trace_is_csv_with_header() {
    let o = oblab(&["dump-trace", "--target", "locate", "--n", "32", "--p", "0"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,kind,address"));
    for (i, l) in lines.enumerate() {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols[0], i.to_string());
        assert!(cols[1] == "R" || cols[1] == "W");
        cols[2].parse::<usize>().unwrap();
    }
}

#[test]
fn tester_accepts_a_fixture_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cycle.json");
    let edges: Vec<[usize; 2]> = (0..200).map(|v| [v, (v + 1) % 200]).collect();
    std::fs::write(&path, serde_json::json!({ "n": 200, "edges": edges }).to_string()).unwrap();
    let o = oblab(&[
        "tester-bench", "--fixture", "file", "--file", path.to_str().unwrap(), "--epsilon", "1", "--trials", "20",
        "--sample-size", "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 21);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("1")));

    std::fs::write(&path, "{\"n\": 3, \"edges\": [[0, 7]]}").unwrap();
    let o = oblab(&["tester-bench", "--fixture", "file", "--file", path.to_str().unwrap(), "--epsilon", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn multisearch_answers_match_the_oracle_on_given_queries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("queries.json");
    std::fs::write(&path, "[-5, 100, 900, 2000, 3000]").unwrap();
    let o = oblab(&["multisearch-bench", "--n", "256", "--epsilon", "1", "--beta", "0.01", "--queries", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("query,answer,oracle,eps_spent,search_invoked,M,t"));
    assert_eq!(text.lines().count(), 6);
    assert!(!text.contains("-0"));
}
