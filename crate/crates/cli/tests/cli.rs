use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use smartgrid_coalition::data::{load_series, SeriesKind};
use smartgrid_coalition::model::{Household, HouseholdKind, Scenario, StorageSpec};
use tempfile::TempDir;

fn sgcoal(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgcoal"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn sgcoal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut rdr =
        csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    rdr.records().map(|r| r.unwrap()).collect()
}

/// One synthetic day written by `sgcoal synth`, loaded back.
fn one_day(tmp: &TempDir) -> (PathBuf, Scenario) {
    let dir = tmp.path().join("synth");
    let o = sgcoal(&dir, &["synth", "--seed", "3", "--days", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.join("scenario.json");
    let s = Scenario::load(&path).unwrap();
    (path, s)
}

fn save(tmp: &TempDir, name: &str, s: &Scenario) -> String {
    let path = tmp.path().join(name);
    s.save(&path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_method_run_writes_parseable_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = sgcoal(&out, &["run", "--days", "1", "--methods", "individual"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("audits: all"));
    // 9 households, one day, one method.
    assert_eq!(csv_rows(&out.join("run_log.csv")).len(), 9);
    assert_eq!(csv_rows(&out.join("cumulative_individual.csv")).len(), 1);
    assert!(!out.join("cumulative_community.csv").exists());
    assert!(out.join("summary.txt").exists());
}

#[test]
fn full_run_with_shapley_writes_tables_for_both_games() {
    let tmp = TempDir::new().unwrap();
    let (path, _) = one_day(&tmp);
    let out = tmp.path().join("run");
    let o = sgcoal(
        &out,
        &["run", "--scenario", path.to_str().unwrap(), "--shapley"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for method in ["coalitional", "community"] {
        let table = csv_rows(&out.join(format!("coalitions/table_{method}_day01.csv")));
        assert_eq!(table.len(), 63);
        let payoffs = csv_rows(&out.join(format!("coalitions/shapley_{method}_day01.csv")));
        assert_eq!(payoffs.len(), 6);
    }
    for entry in fs::read_dir(&out).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "csv") {
            assert!(!csv_rows(&p).is_empty(), "{}", p.display());
        }
    }
}

#[test]
fn invalid_scenario_exits_with_input_error() {
    let tmp = TempDir::new().unwrap();
    let (_, mut s) = one_day(&tmp);
    s.households[0].demand_kwh[5] = -1.0;
    let bad = save(&tmp, "bad.json", &s);
    let o = sgcoal(&tmp.path().join("out"), &["run", "--scenario", &bad]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(
        err.contains("m1") && err.contains("demand must be finite and nonnegative"),
        "{err}"
    );
}

#[test]
fn malformed_json_exits_with_input_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("broken.json");
    fs::write(&path, "{ not json").unwrap();
    let o = sgcoal(
        &tmp.path().join("out"),
        &["run", "--scenario", path.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cases: &[&[&str]] = &[
        &["sweep", "alpha", "--days", "1", "--grid", ""],
        &["sweep", "capacity", "--days", "1", "--grid", "5:1:1"],
        &[
            "run",
            "--days",
            "1",
            "--methods",
            "individual",
            "--alpha",
            "0.5",
        ],
        &["run", "--days", "1", "--methods", "bogus"],
        &["run", "--days", "99"],
        &["shapley", "--day", "0"],
        &["sweep", "alpha", "--days", "1", "--alpha", "0.5"],
        &["run", "--no-such-flag"],
    ];
    for args in cases {
        let o = sgcoal(&out, args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn alpha_sweep_has_one_row_per_grid_point() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("alpha");
    let o = sgcoal(&out, &["sweep", "alpha", "--days", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out.join("sweep_alpha.csv"));
    assert_eq!(rows.len(), 9);
    assert_eq!(&rows[2][0], "0.3");
}

#[test]
fn capacity_sweep_has_one_row_per_grid_point() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("cap");
    let o = sgcoal(
        &out,
        &["sweep", "capacity", "--days", "1", "--grid", "5:20:1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&out.join("sweep_capacity.csv")).len(), 16);
}

#[test]
fn shapley_command_writes_the_full_table() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("shapley");
    let o = sgcoal(&out, &["shapley", "--days", "2", "--day", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(csv_rows(&out.join("table_community_day02.csv")).len(), 63);
    assert_eq!(csv_rows(&out.join("shapley_community_day02.csv")).len(), 6);
    assert!(stdout(&o).contains("efficiency:") && stdout(&o).contains(" ok"));
}

fn payoffs(path: &Path) -> Vec<(String, f64)> {
    csv_rows(path)
        .iter()
        .map(|r| (r[0].to_string(), r[1].parse().unwrap()))
        .collect()
}

#[test]
fn identical_members_get_identical_payoffs() {
    let tmp = TempDir::new().unwrap();
    let (_, mut s) = one_day(&tmp);
    s.households[1] = Household {
        id: "m2".into(),
        ..s.households[0].clone()
    };
    let path = save(&tmp, "twins.json", &s);
    let out = tmp.path().join("out");
    let o = sgcoal(
        &out,
        &[
            "shapley",
            "--scenario",
            &path,
            "--day",
            "1",
            "--variant",
            "resess",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let p = payoffs(&out.join("shapley_coalitional_day01.csv"));
    assert!((p[0].1 - p[1].1).abs() <= 1e-6, "{p:?}");
}

#[test]
fn an_idle_member_is_flagged_as_a_dummy() {
    let tmp = TempDir::new().unwrap();
    let (_, mut s) = one_day(&tmp);
    let slots = s.grid.slots;
    s.households[5] = Household {
        id: "m6".into(),
        kind: HouseholdKind::StorageOwner,
        demand_kwh: vec![0.0; slots],
        renewable_kwh: vec![0.0; slots],
        storage: Some(StorageSpec::new(0.0, 0.0, 0.0)),
    };
    let path = save(&tmp, "idle.json", &s);
    let out = tmp.path().join("out");
    let o = sgcoal(&out, &["shapley", "--scenario", &path, "--day", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("m6")).unwrap();
    assert!(line.contains("dummy"), "{text}");
    assert_eq!(text.matches("dummy").count(), 1, "{text}");
    let p = payoffs(&out.join("shapley_community_day01.csv"));
    assert!(p[5].1.abs() <= 1e-6);
}

#[test]
fn synthetic_series_reparse() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("synth");
    let o = sgcoal(&out, &["synth", "--seed", "11", "--days", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        load_series(&out.join("price.csv"), SeriesKind::Price)
            .unwrap()
            .len(),
        48
    );
    assert_eq!(
        load_series(&out.join("wind.csv"), SeriesKind::Wind)
            .unwrap()
            .len(),
        48
    );
    let demand = load_series(&out.join("demand.csv"), SeriesKind::Demand).unwrap();
    assert_eq!(demand.columns.len(), 9);
    let s = Scenario::load(&out.join("scenario.json")).unwrap();
    assert_eq!(s.grid.slots, 48);
}
