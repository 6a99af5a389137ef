use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_synthsearch");
const SERVER: &str = env!("CARGO_BIN_EXE_table-server");

fn run(dir: &Path, cmd: &str, config: &str, out: &str, extra: &[&str]) -> i32 {
    let cfg = dir.join(format!("{out}.toml"));
    fs::write(&cfg, config).unwrap();
    let status = Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join(out))
        .args(extra)
        .status()
        .unwrap();
    status.code().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .from_path(path)
        .unwrap();
    r.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].clone()).collect()
}

fn universe(dir: &Path) -> PathBuf {
    let cfg = "[universe]\nnum_blocks = 60\nnum_nonblocks = 80\nseed = 3\n";
    assert_eq!(run(dir, "gen-universe", cfg, "universe", &[]), 0);
    dir.join("universe")
}

#[test]
fn universe_eval_top1_is_perfect() {
    let d = tempfile::tempdir().unwrap();
    universe(d.path());
    let cfg = r#"model = { kind = "universe", path = "universe/universe.json" }"#;
    assert_eq!(run(d.path(), "eval-single", cfg, "eval", &["--workers", "3"]), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("eval/eval_report.json")).unwrap()).unwrap();
    assert_eq!(report["top_k_accuracy"]["1"], 1.0);
    assert_eq!(report["mrr"], 1.0);
    assert_eq!(report["num_samples"], 80);
}

#[test]
fn lookup_and_empty_models() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("data.tsv"), "CCO\tCC.O\nCCN\tCC.N\n").unwrap();
    fs::write(d.path().join("truth.tsv"), "CCO\tO.CC\t0.9\nCCO\tCC\t0.1\nCCN\tCC.N\t0.5\n").unwrap();
    fs::write(d.path().join("empty.tsv"), "# nothing\n").unwrap();
    let cfg = "model = { kind = \"file\", path = \"truth.tsv\" }\ndataset = \"data.tsv\"\n";
    assert_eq!(run(d.path(), "eval-single", cfg, "truth", &[]), 0);
    let rows = csv_rows(&d.path().join("truth/eval_report.csv"));
    let get = |rows: &[Vec<String>], m: &str| rows.iter().find(|r| r[0] == m).unwrap()[1].parse::<f64>().unwrap();
    assert_eq!(get(&rows, "top_1"), 1.0);
    assert_eq!(get(&rows, "mrr"), 1.0);

    let cfg = "model = { kind = \"file\", path = \"empty.tsv\" }\ndataset = \"data.tsv\"\n";
    assert_eq!(run(d.path(), "eval-single", cfg, "empty", &[]), 0);
    let rows = csv_rows(&d.path().join("empty/eval_report.csv"));
    for r in &rows[1..] {
        if r[0].starts_with("top_") || r[0] == "mrr" {
            assert_eq!(r[1].parse::<f64>().unwrap(), 0.0, "{}", r[0]);
        }
    }
}

#[test]
fn purchasable_targets_solved_at_zero_calls() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("inv.smi"), "CCO\nCCN\n").unwrap();
    fs::write(d.path().join("targets.smi"), "CCO\nCCN\n").unwrap();
    fs::write(d.path().join("m.tsv"), "").unwrap();
    let cfg = r#"
model = { kind = "file", path = "m.tsv" }
inventory = "inv.smi"
targets = "targets.smi"
[algorithm.retro_star]
"#;
    assert_eq!(run(d.path(), "search", cfg, "s", &[]), 0);
    let rows = csv_rows(&d.path().join("s/summary.csv"));
    assert_eq!(column(&rows, "solved"), ["true", "true"]);
    assert_eq!(column(&rows, "calls_to_solution"), ["0", "0"]);
    assert_eq!(column(&rows, "unique_calls"), ["0", "0"]);
}

#[test]
fn universe_solve_rate_matches_ground_truth_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    universe(d.path());
    let truth = csv_rows(&d.path().join("universe/ground_truth.csv"));
    let solvable = column(&truth, "solvable");
    let cfg = r#"
model = { kind = "universe", path = "universe/universe.json" }
dot_routes = 2
write_graphs = true
[algorithm.retro_star]
[budget]
max_model_calls = 10000
"#;
    assert_eq!(run(d.path(), "search", cfg, "a", &["--workers", "4"]), 0);
    assert_eq!(run(d.path(), "search", cfg, "b", &["--workers", "1"]), 0);
    let a = csv_rows(&d.path().join("a/summary.csv"));
    let b = csv_rows(&d.path().join("b/summary.csv"));
    assert_eq!(column(&a, "solved"), solvable);

    let timeless = |rows: &[Vec<String>]| -> Vec<Vec<String>> {
        let drop: Vec<usize> = ["time_to_solution_s", "elapsed_s"]
            .iter()
            .map(|c| rows[0].iter().position(|h| h == c).unwrap())
            .collect();
        rows.iter()
            .map(|r| r.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, v)| v.clone()).collect())
            .collect()
    };
    assert_eq!(timeless(&a), timeless(&b));
    assert!(d.path().join("a/traces/target_0000.jsonl").exists());
    assert!(d.path().join("a/graphs/target_0000.json").exists());
    assert!(fs::read_dir(d.path().join("a/routes")).unwrap().count() > 0);

    // Running max of packing never decreases along a target's series.
    let m = csv_rows(&d.path().join("a/metrics.csv"));
    let idx = column(&m, "target_index");
    let pk: Vec<usize> = column(&m, "packing_running_max").iter().map(|v| v.parse().unwrap()).collect();
    for i in 1..pk.len() {
        if idx[i] == idx[i - 1] {
            assert!(pk[i] >= pk[i - 1]);
        }
    }
}

fn summary_csv(rows: &[(bool, Option<f64>, Option<u64>, usize)]) -> String {
    let mut s = String::from("# hand-written\ntarget,solved,time_to_solution_s,calls_to_solution,final_packing\n");
    for (i, (solved, t, c, p)) in rows.iter().enumerate() {
        let t = t.map(|v| v.to_string()).unwrap_or_default();
        let c = c.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("T{i},{solved},{t},{c},{p}\n"));
    }
    s
}

#[test]
fn report_percentiles_exact() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(
        p.join("a.csv"),
        summary_csv(&[(true, Some(1.0), Some(10), 1), (true, Some(2.0), Some(20), 1), (true, Some(3.0), Some(30), 2), (true, Some(4.0), Some(40), 2)]),
    )
    .unwrap();
    fs::write(p.join("b.csv"), summary_csv(&[(true, Some(5.0), Some(50), 3), (false, None, None, 0), (true, Some(1.0), Some(10), 1)])).unwrap();
    fs::write(p.join("c.csv"), summary_csv(&[(true, Some(7.0), Some(70), 4)])).unwrap();
    let cfg = r#"
series_points = 4
[[runs]]
label = "a"
summary = "a.csv"
[[runs]]
label = "b"
summary = "b.csv"
[[runs]]
label = "c"
summary = "c.csv"
"#;
    assert_eq!(run(p, "report", cfg, "r", &[]), 0);
    let rows = csv_rows(&p.join("r/percentiles.csv"));
    assert_eq!(rows[0], ["run", "metric", "targets", "solved", "n", "p5", "p25", "p50", "p75", "p95", "mean"]);
    let row = |run: &str, metric: &str| -> Vec<f64> {
        rows.iter().find(|r| r[0] == run && r[1] == metric).unwrap()[2..]
            .iter()
            .map(|v| v.parse().unwrap())
            .collect()
    };
    // Linear interpolation at (n - 1) * q / 100.
    let expect = [
        ("a", "time_to_solution_s", vec![4.0, 4.0, 4.0, 1.15, 1.75, 2.5, 3.25, 3.85, 2.5]),
        ("a", "final_packing", vec![4.0, 4.0, 4.0, 1.0, 1.0, 1.5, 2.0, 2.0, 1.5]),
        ("b", "time_to_solution_s", vec![3.0, 2.0, 2.0, 1.2, 2.0, 3.0, 4.0, 4.8, 3.0]),
        ("b", "calls_to_solution", vec![3.0, 2.0, 2.0, 12.0, 20.0, 30.0, 40.0, 48.0, 30.0]),
        ("b", "final_packing", vec![3.0, 2.0, 3.0, 0.1, 0.5, 1.0, 2.0, 2.8, 4.0 / 3.0]),
        ("c", "time_to_solution_s", vec![1.0, 1.0, 1.0, 7.0, 7.0, 7.0, 7.0, 7.0, 7.0]),
    ];
    for (run, metric, want) in expect {
        let got = row(run, metric);
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{run} {metric}: {got:?} vs {want:?}");
        }
    }

    // Solved fraction over calls: x grid 0, 17.5, 35, 52.5, 70.
    let s = csv_rows(&p.join("r/series.csv"));
    let b: Vec<f64> = s[1..]
        .iter()
        .filter(|r| r[0] == "b" && r[1] == "calls")
        .map(|r| r[3].parse().unwrap())
        .collect();
    assert_eq!(b, [0.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
}

#[test]
fn prep_golden_via_cli() {
    let d = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/prep_golden.smi");
    let cfg = format!("input = {:?}\n[rules]\nmax_occurrence = 4\n", fixture.display().to_string());
    assert_eq!(run(d.path(), "prep", &cfg, "p", &["--seed", "5"]), 0);
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("p/prep_report.json")).unwrap()).unwrap();
    assert_eq!(rep["report"]["survivors"], 7);
    assert_eq!(rep["report"]["removed"]["unmapped"], 2);
    let smi = fs::read_to_string(d.path().join("p/survivors.smi")).unwrap();
    assert!(smi.contains("\"seed\":5"));
    assert_eq!(smi.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

#[test]
fn one_point_sweep_passes_score_through() {
    let d = tempfile::tempdir().unwrap();
    universe(d.path());
    let search = r#"
model = { kind = "universe", path = "universe/universe.json" }
[algorithm.retro_star]
[budget]
max_model_calls = 300
"#;
    assert_eq!(run(d.path(), "search", search, "s", &[]), 0);
    let sweep = format!("{search}\n[grid]\ntemperature = [1.0]\n");
    assert_eq!(run(d.path(), "sweep", &sweep, "w", &[]), 0);

    let rows = csv_rows(&d.path().join("s/summary.csv"));
    let solved: Vec<bool> = column(&rows, "solved").iter().map(|v| v == "true").collect();
    let packing: Vec<usize> = column(&rows, "final_packing")
        .iter()
        .zip(&solved)
        .map(|(v, &s)| if s { v.parse().unwrap() } else { 0 })
        .collect();
    let want = synthsearch::search::sweep_score(solved.iter().filter(|&&s| s).count(), &packing);
    let w = csv_rows(&d.path().join("w/sweep.csv"));
    assert_eq!(w.len(), 2);
    let score: f64 = column(&w, "score")[0].parse().unwrap();
    assert!((score - want).abs() < 1e-9, "{score} vs {want}");
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    // Unknown key
    assert_eq!(run(p, "gen-universe", "[universe]\nbogus = 1\n", "u", &[]), 2);
    // Missing input file
    assert_eq!(run(p, "prep", "input = \"nope.smi\"\n", "p", &[]), 2);
    // Wire model that dies immediately
    fs::write(p.join("data.tsv"), "CCO\tCC.O\n").unwrap();
    let cfg = "model = { kind = \"wire\", command = [\"false\"], timeout_s = 5.0 }\ndataset = \"data.tsv\"\n";
    assert_eq!(run(p, "eval-single", cfg, "e", &[]), 3);
    assert!(p.join("e/eval_report.json").exists());
}

#[test]
fn wire_model_matches_file_model() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    universe(p);
    let table = p.join("universe/model.tsv");
    let common = r#"
inventory = "universe/inventory.smi"
targets = "universe/targets.smi"
[algorithm.retro_star]
[budget]
max_model_calls = 200
"#;
    let file = format!("model = {{ kind = \"file\", path = \"universe/model.tsv\" }}\n{common}");
    let wire = format!(
        "model = {{ kind = \"wire\", command = [{:?}, {:?}], name = \"model\" }}\n{common}",
        SERVER,
        table.display().to_string()
    );
    assert_eq!(run(p, "search", &file, "f", &[]), 0);
    assert_eq!(run(p, "search", &wire, "w", &["--workers", "2"]), 0);
    let f = csv_rows(&p.join("f/summary.csv"));
    let w = csv_rows(&p.join("w/summary.csv"));
    for col in ["target", "solved", "calls_to_solution", "final_packing", "unique_calls", "expansions"] {
        assert_eq!(column(&f, col), column(&w, col), "{col}");
    }
}

#[test]
fn outputs_carry_provenance() {
    let d = tempfile::tempdir().unwrap();
    let dir = universe(d.path());
    for name in ["model.tsv", "inventory.smi", "targets.smi", "eval.tsv", "ground_truth.csv"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        assert!(text.starts_with("# synthsearch "), "{name}");
        assert!(text.contains("# config: {\"universe\":"), "{name}");
    }
    let u: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("universe.json")).unwrap()).unwrap();
    assert_eq!(u["provenance"]["config"]["universe"]["seed"], 3);
    assert!(u["provenance"]["version"].as_str().unwrap().starts_with("synthsearch"));
}
