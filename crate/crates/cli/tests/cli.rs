use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn trialeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trialeq")).args(args).env_remove("TRIALEQ_CONFIG").output().unwrap()
}

fn run_in(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    trialeq(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Header and rows of a stamped result CSV, keyed by column name.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# trialeq "), "{} lacks the stamp line", path.display());
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let (h, rows) = table(path);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("{} has no column {name}", path.display()));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn lookup(path: &Path, key_col: &str, key: &str, col: &str) -> f64 {
    let keys = column(path, key_col);
    let vals = column(path, col);
    let i = keys.iter().position(|k| k == key).unwrap_or_else(|| panic!("no {key} in {}", path.display()));
    vals[i].parse().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn tiny_run_writes_results_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&fixture("tiny/config.toml"), &out, &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));

    for f in ["panel.csv", "pbr_pairs.csv", "pbr_national.csv", "gini.json", "cis.csv", "theil.json", "waterfall_full.csv", "figure_lorenz.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("classification.csv").exists());

    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let status = |name: &str| m["stages"].as_array().unwrap().iter().find(|s| s["name"] == name).unwrap()["status"].clone();
    assert_eq!(status("metrics"), "ok");
    assert_eq!(status("attribution"), "skipped");
    assert_eq!(status("network"), "skipped");
    assert!(m.get("partial").is_none());

    // manifest digests match the files on disk
    for f in m["files"].as_array().unwrap() {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"].as_u64().unwrap(), bytes.len() as u64);
        assert_eq!(f["sha256"].as_str().unwrap(), trialeq::output::sha256_hex(&bytes));
    }
}

#[test]
fn tiny_run_matches_hand_computed_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&fixture("tiny/config.toml"), &out, &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // pair PBR: share of the disease's participants over share of its DALYs
    let pairs = out.join("pbr_pairs.csv");
    let pair = |c: &str, d: &str| {
        let (h, rows) = table(&pairs);
        let (ci, di, pi) = (0, 1, h.iter().position(|x| x == "pbr").unwrap());
        rows.iter().find(|r| r[ci] == c && r[di] == d).unwrap()[pi].parse::<f64>().unwrap()
    };
    assert!((pair("USA", "Neoplasms") - 3.0).abs() < 1e-12);
    assert!((pair("GBR", "Neoplasms") - 1.5).abs() < 1e-12);
    assert!((pair("IND", "Neoplasms") - 1.0 / 6.0).abs() < 1e-12);
    assert!((pair("USA", "Cardiovascular diseases") - 10.0 / 3.0).abs() < 1e-12);
    assert!((pair("IND", "Cardiovascular diseases") - 5.0 / 21.0).abs() < 1e-12);

    let national = out.join("pbr_national.csv");
    assert!((lookup(&national, "country", "USA", "pbr") - 3.75).abs() < 1e-12);
    assert!((lookup(&national, "country", "GBR", "pbr") - 1.875).abs() < 1e-12);
    assert!((lookup(&national, "country", "IND", "pbr") - 0.1875).abs() < 1e-12);

    // national Gini: sum of |xi - xj| over ordered pairs / (2 n^2 mean) = 14.25 / 34.875
    let full = out.join("waterfall_full.csv");
    assert!((lookup(&full, "step", "Baseline", "gini") - 14.25 / 34.875).abs() < 1e-12);
    // replacing IND by the median 1.875 leaves (3.75, 1.875, 1.875)
    assert!((lookup(&full, "step", "Top 34%", "gini") - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(lookup(&full, "step", "All Countries", "gini"), 0.0);
    assert_eq!(lookup(&full, "step", "All Countries", "pct_reduction"), 100.0);
}

#[test]
fn choropleth_clamps_beyond_the_scale() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run_in(&fixture("tiny/config.toml"), &out, &["metrics", "pbr"]).status.success());
    let fig = tmp.path().join("fig");
    let o = trialeq(&["--out", fig.to_str().unwrap(), "emit", "choropleth", "--from", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = fig.join("figure_choropleth.csv");
    // IND log PBR is ln(0.1875) = -1.674
    assert_eq!(lookup(&f, "iso3", "IND", "value"), -1.5);
    let clamped = column(&f, "clamped");
    let iso = column(&f, "iso3");
    assert_eq!(clamped[iso.iter().position(|c| c == "IND").unwrap()], "true");
    assert_eq!(clamped[iso.iter().position(|c| c == "GBR").unwrap()], "false");
}

#[test]
fn equal_participation_gives_a_diagonal_lorenz_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write(
        tmp.path(),
        "panel.csv",
        "country,disease,year,participants,dalys\n\
         USA,Neoplasms,2020,10,5\nGBR,Neoplasms,2020,20,10\nUSA,Mental disorders,2020,30,15\nGBR,Mental disorders,2020,6,3\n",
    );
    let out = tmp.path().join("out");
    let o = trialeq(&["--panel", panel.to_str().unwrap(), "--out", out.to_str().unwrap(), "--period", "2020-2020", "metrics", "lorenz"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let x = column(&out.join("lorenz.csv"), "burden_share");
    let y = column(&out.join("lorenz.csv"), "participant_share");
    for (a, b) in x.iter().zip(&y) {
        assert!((a.parse::<f64>().unwrap() - b.parse::<f64>().unwrap()).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!((x.first().unwrap().as_str(), x.last().unwrap().as_str()), ("0", "1"));
}

#[test]
fn demo_run_covers_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run_in(&fixture("demo/config.toml"), &out, &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    for s in m["stages"].as_array().unwrap() {
        assert_eq!(s["status"], "ok", "{s}");
    }
    for f in ["attribution_part1.json", "shapley_part2.csv", "classification.csv", "network_nodes.csv", "figure_network_metrics.csv"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }

    // default full steps give the five-row waterfall
    let steps = column(&out.join("figure_waterfall_full.csv"), "step");
    assert_eq!(steps, ["Baseline", "Top 25%", "Top 50%", "Top 75%", "All Countries"]);
    let gini: Vec<f64> = column(&out.join("figure_waterfall_full.csv"), "gini").iter().map(|g| g.parse().unwrap()).collect();
    assert!(gini.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*gini.last().unwrap(), 0.0);

    // every pair lands in exactly one status
    let status = column(&out.join("classification.csv"), "status");
    assert_eq!(status.len(), 36 * 16);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = fixture("tiny/config.toml");
    assert!(run_in(&cfg, &a, &["--seed", "7", "run"]).status.success());
    assert!(run_in(&cfg, &b, &["--seed", "7", "--threads", "2", "run"]).status.success());
    for e in std::fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    // a different seed moves the bootstrap intervals but not the point values
    let c = tmp.path().join("c");
    assert!(run_in(&cfg, &c, &["--seed", "8", "run"]).status.success());
    assert_eq!(column(&a.join("waterfall_full.csv"), "gini"), column(&c.join("waterfall_full.csv"), "gini"));
    assert_ne!(std::fs::read(a.join("cis.csv")).unwrap(), std::fs::read(c.join("cis.csv")).unwrap());
}

#[test]
fn missing_predictor_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere/predictors.csv");
    let o = run_in(&fixture("tiny/config.toml"), &tmp.path().join("out"), &["--predictors", missing.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(missing.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "seed = 1\n[metrics]\nbootstrapp = 10\n");
    let o = trialeq(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bootstrapp"), "{}", stderr(&o));
}

#[test]
fn config_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_trialeq"))
        .env("TRIALEQ_CONFIG", fixture("tiny/config.toml"))
        .args(["--out", out.to_str().unwrap(), "metrics", "gini"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("gini.json").is_file());
}

#[test]
fn bad_panel_data_exits_3_and_marks_the_manifest_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = write(tmp.path(), "zero.csv", "country,disease,year,participants,dalys\nUSA,Neoplasms,2020,0,10\nGBR,Neoplasms,2020,0,10\n");
    let out = tmp.path().join("out");
    let o = trialeq(&["--panel", panel.to_str().unwrap(), "--out", out.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m: Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert!(m["partial"].as_str().unwrap().contains("ingest"));
    assert_eq!(m["stages"][0]["status"], "failed");

    let empty = write(tmp.path(), "empty.csv", "country,disease,year,participants,dalys\n");
    let o = trialeq(&["--panel", empty.to_str().unwrap(), "--out", out.to_str().unwrap(), "ingest"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn degenerate_statistics_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let same = write(tmp.path(), "same.csv", "group,value\na,1\na,1\nb,1\nb,1\n");
    let o = trialeq(&["stats", "kruskal", same.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn emit_needs_the_source_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run_in(&fixture("tiny/config.toml"), &out, &["metrics", "pbr"]).status.success());
    let o = trialeq(&["--out", tmp.path().join("fig").to_str().unwrap(), "emit", "waterfall", "--from", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulation"), "{}", stderr(&o));
}

#[test]
fn stats_commands_print_json() {
    let tmp = tempfile::tempdir().unwrap();
    let table = write(tmp.path(), "t.csv", "status,yes,no\nhigh,30,10\nlow,10,30\n");
    let o = trialeq(&["stats", "chi-square", table.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // expected counts are all 20: chi2 = 4 * 100 / 20
    assert!((v["result"]["chi2"].as_f64().unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(v["result"]["df"], 1);

    let groups = write(tmp.path(), "g.csv", "group,value\na,1\na,2\na,3\nb,4\nb,5\nb,6\n");
    let o = trialeq(&["stats", "permutation", groups.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    // only the two most extreme of 20 splits reach |difference| = 3
    assert_eq!(v["result"]["p_value"].as_f64(), Some(0.1));
    assert_eq!(v["result"]["exact"], true);
}
