use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn eprank(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eprank"))
        .current_dir(dir)
        .env_remove("EPRANK_CONFIG")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = eprank(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data lines of a CSV with `# ` metadata, split into cells.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let f = Fixture { dir };
        ok(f.path(), &["synth", "--world-size", "4000", "--seed", "5", "--out", "world.csv"]);
        fs::write(f.file("planted.json"), r#"{"P": ["PLANTED"], "W": ["WORLD"]}"#).unwrap();
        f
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn small_corpus(dir: &Path) {
    let rows = [
        "id,year,citations,countries",
        "a1,2013,90,US",
        "a2,2013,40,US|DE",
        "a3,2013,12,DE",
        "a4,2013,7,FR",
        "a5,2013,3,US",
        "a6,2013,1,DE|FR",
        "b1,2014,80,US",
        "b2,2014,33,DE",
        "b3,2014,20,US|DE",
        "b4,2014,9,FR",
        "b5,2014,4,US",
        "b6,2014,0,DE",
    ];
    fs::write(dir.join("small.csv"), rows.join("\n") + "\n").unwrap();
    fs::write(dir.join("ents.json"), r#"{"USA": ["US"], "Germany": ["DE"], "France": ["FR"]}"#).unwrap();
    fs::write(dir.join("pop.json"), r#"{"USA": 330.0, "Germany": 83.0}"#).unwrap();
}

#[test]
fn indicators_csv_and_json_agree() {
    let f = Fixture::new();
    let csv = ok(f.path(), &["indicators", "--input", "world.csv", "--entities", "planted.json", "--display", "full"]);
    let json: Value = serde_json::from_str(&ok(
        f.path(),
        &["indicators", "--input", "world.csv", "--entities", "planted.json", "--format", "json"],
    ))
    .unwrap();

    assert!(csv.starts_with("# "));
    let rows = csv_rows(&csv);
    assert_eq!(rows[0], ["entity", "n_pubs", "ep", "prob_top", "p_top", "per_capita"]);
    assert_eq!(rows.len(), 3);

    assert_eq!(json["metadata"]["command"], "indicators");
    assert_eq!(json["metadata"]["analysis"]["rank_rounding"], "half-up");
    let jrows = json["rows"].as_array().unwrap();
    for row in &rows[1..] {
        let j = jrows.iter().find(|r| r["entity"] == row[0].as_str()).unwrap();
        assert_eq!(j["n_pubs"].as_u64().unwrap().to_string(), row[1]);
        for (col, key) in [(2, "ep"), (3, "prob_top"), (4, "p_top")] {
            let a: f64 = row[col].parse().unwrap();
            let b = j[key].as_f64().unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{key}: {a} vs {b}");
        }
        assert_eq!(row[5], "");
    }
    let eps: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(eps.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(rows[1][0], "P");
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str, seed: &'static str| {
        vec!["synth", "--world-size", "2000", "--seed", seed, "--alpha", "1.1", "--out", out]
    };
    ok(dir.path(), &args("a.csv", "42"));
    ok(dir.path(), &args("b.csv", "42"));
    ok(dir.path(), &args("c.csv", "43"));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert_ne!(a, fs::read(dir.path().join("c.csv")).unwrap());

    let meta: Value = serde_json::from_slice(&fs::read(dir.path().join("a.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["generator"]["seed"], 42);
    assert_eq!(meta["generator"]["planted_alpha"], 1.1);
}

#[test]
fn ingest_round_trip_is_bit_exact() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    ok(dir.path(), &["ingest", "--input", "small.csv", "--out", "x.jsonl"]);
    ok(dir.path(), &["ingest", "--input", "x.jsonl", "--out", "y.csv"]);
    assert_eq!(
        fs::read(dir.path().join("small.csv")).unwrap(),
        fs::read(dir.path().join("y.csv")).unwrap()
    );
    assert!(dir.path().join("x.jsonl.meta.json").exists());
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    let out = eprank(dir.path(), &["indicators", "--input", "absent.csv", "--entities", "ents.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    let out = eprank(dir.path(), &["indicators", "--input", "small.csv", "--entities", "ents.json", "--x0", "150"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_data_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    fs::write(dir.path().join("bad.csv"), "id,year,citations,countries\nz1,2014,-3,US\n").unwrap();
    let out = eprank(dir.path(), &["indicators", "--input", "bad.csv", "--entities", "ents.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn percapita_divides_by_population() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &[
            "percapita", "--input", "small.csv", "--entities", "ents.json", "--populations", "pop.json",
            "--entity", "USA", "--entity", "Germany", "--percentiles", "20,50", "--format", "json",
        ],
    ))
    .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 2);
    for row in json["rows"].as_array().unwrap() {
        let pop = if row["entity"] == "USA" { 330.0 } else { 83.0 };
        if let Some(p) = row["p_top"].as_f64() {
            assert!((row["per_capita"].as_f64().unwrap() - p / pop).abs() < 1e-15);
        }
    }
}

#[test]
fn percapita_requires_every_population() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    let out = eprank(
        dir.path(),
        &["percapita", "--input", "small.csv", "--entities", "ents.json", "--populations", "pop.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("France"));
}

#[test]
fn collab_reports_pairs() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &[
            "collab", "--input", "small.csv", "--entities", "ents.json", "--pairs", "USA:Germany",
            "--percentiles", "20,50", "--format", "json",
        ],
    ))
    .unwrap();
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["entity"], "USA and Germany");
    assert_eq!(rows[0]["n_pubs"], 2);
}

#[test]
fn timeseries_has_one_row_per_year_and_entity() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    let csv = ok(
        dir.path(),
        &[
            "timeseries", "--input", "small.csv", "--entities", "ents.json", "--entity", "USA", "--entity",
            "Germany", "--percentiles", "20,50",
        ],
    );
    let rows = csv_rows(&csv);
    assert_eq!(rows[0][0], "year");
    assert_eq!(rows.len(), 1 + 2 * 2);
    let years: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert!(years.contains(&"2013") && years.contains(&"2014"));

    let out = eprank(
        dir.path(),
        &["timeseries", "--input", "small.csv", "--entities", "ents.json", "--years", "2019"],
    );
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn plotdata_and_oracle_agree_with_the_table() {
    let f = Fixture::new();
    let plot: Value = serde_json::from_str(&ok(
        f.path(),
        &["plotdata", "--input", "world.csv", "--entities", "planted.json", "--entity", "P", "--format", "json"],
    ))
    .unwrap();
    let points = plot["points"].as_array().or_else(|| plot["rows"].as_array()).unwrap();
    assert!(points.len() >= 10);
    for p in points {
        assert!(p["empirical"].as_f64().unwrap() >= 0.0);
        assert!(p["fitted"].as_f64().unwrap() > 0.0);
    }

    let oracle = ok(
        f.path(),
        &["oracle", "--input", "world.csv", "--entities", "planted.json", "--entity", "P", "--mc-samples", "2000"],
    );
    let rows = csv_rows(&oracle);
    let agree = rows[0].iter().position(|h| h == "agree").unwrap();
    assert_eq!(rows.len(), 11);
    for r in &rows[1..] {
        assert_eq!(r[agree], "true", "{r:?}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path());
    fs::write(dir.path().join("cfg.json"), r#"{"percentiles": [20, 50], "rank_rounding": "floor"}"#).unwrap();
    let json: Value = serde_json::from_str(&ok(
        dir.path(),
        &[
            "indicators", "--input", "small.csv", "--entities", "ents.json", "--config", "cfg.json",
            "--rank-rounding", "ceil", "--format", "json",
        ],
    ))
    .unwrap();
    assert_eq!(json["metadata"]["analysis"]["percentiles"], serde_json::json!([20.0, 50.0]));
    assert_eq!(json["metadata"]["analysis"]["rank_rounding"], "ceil");
}
