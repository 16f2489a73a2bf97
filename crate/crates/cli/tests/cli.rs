#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clsc_core::formulation::Criterion;
use clsc_core::instance::{load_instance, Instance};
use common::{analytic_optimum, any_dominated, chord_distance_km};
use serde_json::Value;
use tempfile::TempDir;

fn clsc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clsc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn toy() -> Instance {
    load_instance(fs::File::open(data("toy_3site.json")).unwrap()).unwrap()
}

fn write_instance(dir: &Path, name: &str, inst: &Instance) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(inst).unwrap()).unwrap();
    p
}

fn read_matrix(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.unwrap();
        ids.push(rec[0].to_string());
        rows.push(rec.iter().skip(1).map(|v| v.parse().unwrap()).collect());
    }
    (ids, rows)
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = clsc(&["generate", "--seed", "7", "--hospitals", "4", "--sites", "3", "--out", s(p)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn generate_without_out_is_an_argument_error() {
    let out = clsc(&["generate", "--seed", "1", "--hospitals", "2", "--sites", "2"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn generated_instance_round_trips() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("big.json");
    let out = clsc(&["generate", "--seed", "2020", "--hospitals", "25", "--sites", "25", "--out", s(&p)]);
    assert_eq!(code(&out), 0);
    let inst = load_instance(fs::File::open(&p).unwrap()).unwrap();
    assert_eq!((inst.hospitals.len(), inst.sites.len()), (25, 25));
    let again = write_instance(dir.path(), "again.json", &inst);
    let back = load_instance(fs::File::open(&again).unwrap()).unwrap();
    assert_eq!(inst, back);
}

#[test]
fn distance_override_is_written_verbatim() {
    let dir = TempDir::new().unwrap();
    let mut inst = toy();
    let hs = vec![vec![1.5, 2.25, 30.0], vec![40.125, 5.0, 0.5]];
    let ss = vec![vec![0.0, 7.0, 9.5], vec![7.0, 0.0, 3.0], vec![9.5, 3.0, 0.0]];
    inst.distance_override = Some(clsc_core::instance::DistanceOverride {
        hospital_site: hs.clone(),
        site_site: ss.clone(),
    });
    let p = write_instance(dir.path(), "o.json", &inst);
    let out_dir = dir.path().join("d");
    assert_eq!(code(&clsc(&["distances", "--instance", s(&p), "--out", s(&out_dir)])), 0);
    assert_eq!(read_matrix(&out_dir.join("hospital_site.csv")).1, hs);
    assert_eq!(read_matrix(&out_dir.join("site_site.csv")).1, ss);
}

#[test]
fn single_site_distance_is_zero() {
    let dir = TempDir::new().unwrap();
    let mut inst = toy();
    inst.sites.truncate(1);
    let p = write_instance(dir.path(), "one.json", &inst);
    let out_dir = dir.path().join("d");
    assert_eq!(code(&clsc(&["distances", "--instance", s(&p), "--out", s(&out_dir)])), 0);
    assert_eq!(read_matrix(&out_dir.join("site_site.csv")).1, vec![vec![0.0]]);
}

#[test]
fn sample_distances_match_chord_formula() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("d");
    let p = data("viha_sample.json");
    assert_eq!(code(&clsc(&["distances", "--instance", s(&p), "--out", s(&out_dir)])), 0);
    let inst = load_instance(fs::File::open(&p).unwrap()).unwrap();
    let (ids, rows) = read_matrix(&out_dir.join("hospital_site.csv"));
    assert_eq!(ids.len(), inst.hospitals.len());
    for (h, row) in inst.hospitals.iter().zip(&rows) {
        for (site, &km) in inst.sites.iter().zip(row) {
            let want = chord_distance_km(h.lat, h.lon, site.lat, site.lon);
            assert!((km - want).abs() <= 1e-3 * want.max(1e-3), "{} {}: {km} vs {want}", h.id, site.id);
        }
    }
}

#[test]
fn tiny_job_optimum_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let inst = toy();
    let want = analytic_optimum(&inst, &inst.distances().unwrap(), Criterion::Jobs).unwrap();
    let out = dir.path().join("s.json");
    let run = clsc(&["solve", "--instance", s(&data("toy_3site.json")), "--objective", "z3", "--out", s(&out)]);
    assert_eq!(code(&run), 0);
    let report = read_json(&out);
    assert_eq!(report["status"], "Optimal");
    assert!((report["objective_value"].as_f64().unwrap() - want).abs() < 1e-6);
}

#[test]
fn zero_budget_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let mut inst = toy();
    inst.params.budget = 0.0;
    let p = write_instance(dir.path(), "b0.json", &inst);
    let out = dir.path().join("s.json");
    assert_eq!(code(&clsc(&["solve", "--instance", s(&p), "--objective", "z1", "--out", s(&out)])), 3);
    assert_eq!(read_json(&out)["status"], "Infeasible");
}

#[test]
fn job_bound_above_optimum_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let inst = toy();
    let top = analytic_optimum(&inst, &inst.distances().unwrap(), Criterion::Jobs).unwrap();
    let eps3 = format!("{}", top + 1.0);
    let out = dir.path().join("s.json");
    let run = clsc(&[
        "solve", "--instance", s(&data("toy_3site.json")), "--objective", "z1", "--eps3", &eps3, "--out", s(&out),
    ]);
    assert_eq!(code(&run), 3);
}

#[test]
fn node_limit_exits_with_limit_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.json");
    let run = clsc(&[
        "solve", "--instance", s(&data("viha_sample.json")), "--objective", "z3", "--node-limit", "1", "--out", s(&out),
    ]);
    assert_eq!(code(&run), 4);
    assert_eq!(read_json(&out)["status"], "NodeLimit");
}

#[test]
fn missing_instance_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.json");
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&clsc(&["solve", "--instance", s(&missing), "--objective", "z1", "--out", s(&out)])), 1);
}

#[test]
fn one_cell_sweep_equals_profit_optimum() {
    let dir = TempDir::new().unwrap();
    let toy_path = data("toy_3site.json");
    let solved = dir.path().join("s.json");
    assert_eq!(code(&clsc(&["solve", "--instance", s(&toy_path), "--objective", "z1", "--out", s(&solved)])), 0);
    let z1 = read_json(&solved)["objective_value"].as_f64().unwrap();
    let pd = dir.path().join("p");
    let run = clsc(&["pareto", "--instance", s(&toy_path), "--n2", "1", "--n3", "1", "--out", s(&pd)]);
    assert_eq!(code(&run), 0);
    let front = read_json(&pd.join("front.json"));
    let pts = front.as_array().unwrap();
    assert_eq!(pts.len(), 1);
    assert!((pts[0]["triple"]["z1"].as_f64().unwrap() - z1).abs() <= 1e-6 * z1.abs().max(1.0));
}

#[test]
fn toy_front_matches_golden_and_is_non_dominated() {
    let dir = TempDir::new().unwrap();
    let pd = dir.path().join("p");
    let run = clsc(&["pareto", "--instance", s(&data("toy_3site.json")), "--n2", "3", "--n3", "3", "--out", s(&pd)]);
    assert_eq!(code(&run), 0);
    let text = fs::read_to_string(pd.join("front.csv")).unwrap();
    assert_eq!(text, golden("toy_front.csv"));
    let triples: Vec<[f64; 3]> = read_json(&pd.join("front.json"))
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let t = &p["triple"];
            [t["z1"].as_f64().unwrap(), t["z2"].as_f64().unwrap(), t["z3"].as_f64().unwrap()]
        })
        .collect();
    assert!(!triples.is_empty());
    assert_eq!(any_dominated(&triples), None);
}

fn profit_point(dir: &Path, inst: &Path) -> PathBuf {
    let pd = dir.join("p");
    let run = clsc(&["pareto", "--instance", s(inst), "--n2", "1", "--n3", "1", "--out", s(&pd)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    pd.join("front.json")
}

#[test]
fn toy_comparison_matches_golden() {
    let dir = TempDir::new().unwrap();
    let toy_path = data("toy_3site.json");
    let front = profit_point(dir.path(), &toy_path);
    let cd = dir.path().join("c");
    let run = clsc(&["compare", "--instance", s(&toy_path), "--point", s(&front), "--out", s(&cd)]);
    assert_eq!(code(&run), 0);
    let table = fs::read_to_string(cd.join("report.txt")).unwrap();
    assert_eq!(table, golden("toy_report.txt"));
    assert_eq!(String::from_utf8(run.stdout).unwrap(), table);
    let report = read_json(&cd.join("report.json"));
    assert!(report["circular"]["z1"].as_f64().unwrap() > 0.0);
    assert!(report["linear"]["z1"].as_f64().unwrap() < 0.0);
}

#[test]
fn zero_usage_comparison_has_no_flows() {
    let dir = TempDir::new().unwrap();
    let mut inst = toy();
    for h in &mut inst.hospitals {
        h.usage = 0.0;
    }
    let p = write_instance(dir.path(), "zero.json", &inst);
    let front = profit_point(dir.path(), &p);
    let cd = dir.path().join("c");
    assert_eq!(code(&clsc(&["compare", "--instance", s(&p), "--point", s(&front), "--out", s(&cd)])), 0);
    let report = read_json(&cd.join("report.json"));
    for k in ["collected", "reprocessed", "disposed"] {
        assert_eq!(report["flows"][k].as_f64().unwrap(), 0.0, "{k}");
    }
    assert_eq!(report["linear"]["z1"].as_f64().unwrap(), 0.0);
    assert_eq!(report["linear"]["z2"].as_f64().unwrap(), 0.0);
}

#[test]
fn inverted_job_range_is_an_argument_error() {
    let dir = TempDir::new().unwrap();
    let toy_path = data("toy_3site.json");
    let front = profit_point(dir.path(), &toy_path);
    let cd = dir.path().join("c");
    let run = clsc(&[
        "compare", "--instance", s(&toy_path), "--point", s(&front), "--jobs-low", "30", "--jobs-high", "20", "--out",
        s(&cd),
    ]);
    assert_eq!(code(&run), 2);
}
