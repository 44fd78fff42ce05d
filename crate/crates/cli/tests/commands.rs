use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftfact"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn line_network(links: usize) -> String {
    let arcs: Vec<String> = (0..links)
        .map(|i| format!(r#"{{"from": {}, "to": {i}}}"#, i + 1))
        .collect();
    format!(
        r#"{{"vertices": {}, "arcs": [{}], "discount": 0.7071067811865476}}"#,
        links + 1,
        arcs.join(", ")
    )
}

const PATH_SPEC: &str = r#"{
    "graph": {"vertices": 4, "edges": [[0, 1], [1, 2], [2, 3]]},
    "entries": [
        {"vertex": 0, "edge": 0, "alpha": 1.0, "k": 1, "shift": "qstar"},
        {"vertex": 1, "edge": 0, "alpha": -1.0, "shift": "q"},
        {"vertex": 1, "edge": 1, "alpha": 1.0, "k": 1, "shift": "qstar"},
        {"vertex": 2, "edge": 1, "alpha": -1.0, "shift": "q"},
        {"vertex": 2, "edge": 2, "alpha": 1.0, "k": 1, "shift": "qstar"},
        {"vertex": 3, "edge": 2, "alpha": -1.0, "shift": "q"}
    ]
}"#;

#[test]
fn factor_path_spec() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_SPEC);
    let out = dir.path().join("fact.json");
    let o = run(&[
        "factor",
        "--input",
        &input,
        "--output",
        out.to_str().unwrap(),
        "--check",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_json(&out);
    assert_eq!(f["P"], serde_json::json!([0, 1, 2]));
    let diag = f["L"]["entries"][2][2]["terms"][0]["c"].as_f64().unwrap();
    assert!((diag - 2.0 / 3f64.sqrt()).abs() < 1e-12);
    let below = f["L"]["entries"][1][0]["terms"][0].clone();
    assert_eq!(below["j"], 1);
    assert!((below["c"].as_f64().unwrap() + 0.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn factor_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_SPEC);
    let a = stdout(&run(&["factor", "--input", &input]));
    let b = stdout(&run(&["factor", "--input", &input]));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn factor_rejects_cycles_and_bad_input() {
    let dir = TempDir::new().unwrap();
    let cycle = write(
        &dir,
        "c4.json",
        r#"{"graph": {"vertices": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0]]},
            "entries": [
                {"vertex": 0, "edge": 0, "alpha": 1.0, "shift": "q"},
                {"vertex": 1, "edge": 0, "alpha": 1.0, "shift": "q"},
                {"vertex": 1, "edge": 1, "alpha": 1.0, "shift": "q"},
                {"vertex": 2, "edge": 1, "alpha": 1.0, "shift": "q"},
                {"vertex": 2, "edge": 2, "alpha": 1.0, "shift": "q"},
                {"vertex": 3, "edge": 2, "alpha": 1.0, "shift": "q"},
                {"vertex": 3, "edge": 3, "alpha": 1.0, "shift": "q"},
                {"vertex": 0, "edge": 3, "alpha": 1.0, "shift": "q"}
            ]}"#,
    );
    let o = run(&["factor", "--input", &cycle]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("forests"));
    let bad = write(&dir, "bad.json", r#"{"rows": 1}"#);
    assert_eq!(run(&["factor", "--input", &bad]).status.code(), Some(3));
}

#[test]
fn factor_random_tree_matrix() {
    let dir = TempDir::new().unwrap();
    let mut rng = shiftfact::random::rng(5);
    let g = shiftfact::random::tree(&mut rng, 9);
    let spec = shiftfact::random::mg_spec(&mut rng, &g, 2);
    let input = write(&dir, "tree.json", &serde_json::to_string(&spec).unwrap());
    assert!(run(&["factor", "--input", &input, "--check"]).status.success());
    let m = spec.build().unwrap();
    let raw = write(&dir, "matrix.json", &serde_json::to_string(&m).unwrap());
    assert!(run(&["factor", "--input", &raw, "--check"]).status.success());
}

#[test]
fn lqr_four_link_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "line.json", &line_network(4));
    let out = dir.path().join("law.json");
    let o = run(&["lqr", "--input", &input, "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    let law = read_json(&out);
    let k1 = &law["K1"];
    let expected = [[1.5, 0.0], [-0.5, 7.0 / 6.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((k1[i][j].as_f64().unwrap() - expected[i][j]).abs() < 1e-9);
        }
    }
    assert!((k1[3][3].as_f64().unwrap() - 31.0 / 30.0).abs() < 1e-9);
}

#[test]
fn lqr_patterns_and_oracle() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "branching.json",
        r#"{"vertices": 5, "arcs": [{"from": 2, "to": 0}, {"from": 3, "to": 1}, {"from": 3, "to": 2}, {"from": 4, "to": 3}], "discount": 0.7071067811865476}"#,
    );
    let out = dir.path().join("law.json");
    let o = run(&[
        "lqr",
        "--input",
        &input,
        "--output",
        out.to_str().unwrap(),
        "--pattern",
        "--oracle",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("★ 0 0 0\n0 ★ ★ 0\n★ ★ ★ 0\n0 ★ ★ ★\n"));
    assert!(text.contains("★ ★ 0 0 ★ ★ 0 0 0\n"));
    let law = read_json(&out);
    assert!(law["oracle"]["deviation"].as_f64().unwrap() <= 1e-6);
    assert_eq!(law["oracle"]["sparse_form"], true);

    let o = run(&["lqr", "--input", &input, "--output", out.to_str().unwrap(), "--csv"]);
    assert!(stdout(&o).contains("1,0,0,0\n0,1,1,0\n"));
}

#[test]
fn lqr_errors() {
    let dir = TempDir::new().unwrap();
    let cyc = write(
        &dir,
        "cyc.json",
        r#"{"vertices": 3, "arcs": [{"from": 0, "to": 1}, {"from": 1, "to": 2}, {"from": 2, "to": 0}], "discount": 0.5}"#,
    );
    assert_eq!(run(&["lqr", "--input", &cyc]).status.code(), Some(2));
    let bad = write(&dir, "bad.json", r#"{"vertices": 2, "arcs": []}"#);
    assert_eq!(run(&["lqr", "--input", &bad]).status.code(), Some(3));
}

#[test]
fn chordal_verdicts() {
    let dir = TempDir::new().unwrap();
    let c5 = write(
        &dir,
        "c5.json",
        r#"{"vertices": 5, "edges": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]]}"#,
    );
    let tri = write(
        &dir,
        "tri.json",
        r#"{"vertices": 3, "edges": [[0, 1], [1, 2], [2, 0]]}"#,
    );
    let tree = write(
        &dir,
        "tree.json",
        r#"{"vertices": 4, "edges": [[0, 1], [1, 2], [1, 3]]}"#,
    );
    assert!(stdout(&run(&["chordal", "--input", &c5])).contains("cycle >= 4: true, edge graph chordal: false"));
    assert!(stdout(&run(&["chordal", "--input", &tri])).contains("cycle >= 4: false, edge graph chordal: true"));
    let t = stdout(&run(&["chordal", "--input", &tree]));
    assert!(t.contains("is tree: true") && t.contains("edge graph chordal: true"));
    let bad = write(&dir, "bad.json", r#"{"vertices": 2, "edges": [[0, 5]]}"#);
    assert_eq!(run(&["chordal", "--input", &bad]).status.code(), Some(3));
}

#[test]
fn cycle_demo() {
    let t = stdout(&run(&["cycle-demo", "--n", "3"]));
    for c in [
        "1.333333333333",
        "(q*)^0 q^3: -0.333333333333",
        "(q*)^3 q^0: -0.333333333333",
        "0.500000000000",
        "0.166666666667",
    ] {
        assert!(t.contains(c), "{c} missing from\n{t}");
    }
    assert!(t.contains("in R_inf: false"));
    let t = stdout(&run(&["cycle-demo", "--n", "5"]));
    let resid: f64 = t.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(resid <= 1e-8);
    assert!(!run(&["cycle-demo", "--n", "2"]).status.success());
}

#[test]
fn spectral_demo() {
    let o = run(&["spectral-demo"]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!(t.contains("8 / 24"));
    assert!(t.contains("   1.500000 "));
    let orders: Vec<&str> = t.lines().filter(|l| l.contains("order [")).collect();
    assert_eq!(orders.len(), 8);
    for l in orders {
        let inside = l.rsplit('[').next().unwrap().trim_end_matches(']');
        assert!(inside.split(", ").any(|c| c.parse::<f64>().unwrap() > 1e-6));
    }
}

#[test]
fn tolerance_flags_are_accepted() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "path.json", PATH_SPEC);
    let o = run(&[
        "--zero-tol",
        "1e-12",
        "--psd-tol",
        "1e-10",
        "--inv-tol",
        "1e-10",
        "factor",
        "--input",
        &input,
    ]);
    assert!(o.status.success());
}
