use std::process::Command;

fn kgrepair() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kgrepair"))
}

#[test]
fn malformed_graph_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.tsv");
    std::fs::write(&graph, "a\tb\n").unwrap();
    let out = kgrepair().args(["stats", "--graph"]).arg(&graph).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_file_is_a_plain_failure() {
    let out = kgrepair().args(["stats", "--graph", "/nonexistent/graph.tsv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn aux_graph_needs_a_label_map() {
    let out = kgrepair()
        .args(["enhance", "--graph", "g.tsv", "--predictions", "p.jsonl", "--aux-graph", "a.tsv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn validate_prints_one_line_per_tuple() {
    let dir = tempfile::tempdir().unwrap();
    let tuples = dir.path().join("tuples.tsv");
    std::fs::write(&tuples, "Earth\tC\tGorakhpur\nNowhere\tC\tElsewhere\n").unwrap();
    let graph = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/fixture_b.tsv");
    let out = kgrepair()
        .args(["validate", "--l", "1", "--graph", graph, "--tuples"])
        .arg(&tuples)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["status"], "Unknown");
}
