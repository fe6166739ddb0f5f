use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gadop_cli::report::{Layout, Provenance};
use gadop_cli::SolveReport;
use gadop_core::milp::MilpStatus;
use gadop_core::{CostBreakdown, FirstStagePlan, ProblemFile};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn gadop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gadop")).args(args).output().expect("binary runs")
}

fn solve(instance: &Path, method: &str, dir: &Path) -> (Output, SolveReport) {
    let out = dir.join(format!("{method}.json"));
    let o = gadop(&["solve", "--instance", instance.to_str().unwrap(), "--method", method, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    (o, report)
}

#[test]
fn deterministic_monolith_pays_no_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let (_, r) = solve(&data("desk4_deterministic.json"), "monolith", dir.path());
    assert_eq!(r.status, MilpStatus::Optimal);
    assert_eq!(r.cost.expected_penalty, 0.0);
    assert_eq!(r.cost.expected_repair, 0.0);
    assert!(r.solver.is_some());
    assert_eq!(r.provenance.command, "solve");
    assert_eq!(r.provenance.flags["command"]["solve"]["method"], "monolith");
    let bytes = std::fs::read(data("desk4_deterministic.json")).unwrap();
    assert_eq!(r.provenance.instance_sha256, gadop_cli::report::sha256_hex(&bytes));
}

#[test]
fn lshape_matches_monolith_in_two_iterations() {
    let dir = tempfile::tempdir().unwrap();
    for fixture in ["desk4_deterministic.json", "desk5.json"] {
        let (_, mono) = solve(&data(fixture), "monolith", dir.path());
        let (_, ls) = solve(&data(fixture), "lshape", dir.path());
        assert!((mono.cost.total - ls.cost.total).abs() <= 1e-6, "{fixture}: {} vs {}", mono.cost.total, ls.cost.total);
        let trace = ls.lshape.expect("trace");
        assert_eq!(trace.iterations.len(), 2);
        assert_eq!(trace.master_solves, 2);
    }
}

#[test]
fn baselines_report_their_model_objective() {
    let dir = tempfile::tempdir().unwrap();
    let (_, mono) = solve(&data("desk5.json"), "monolith", dir.path());
    for method in ["evf", "pdstsp"] {
        let (_, r) = solve(&data("desk5.json"), method, dir.path());
        assert!(r.model_objective.is_some());
        assert!(r.cost.total >= mono.cost.total - 1e-6);
    }
}

#[test]
fn missing_instance_exits_one() {
    let o = gadop(&["solve", "--instance", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn malformed_instance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"customers\": 3}").unwrap();
    let o = gadop(&["solve", "--instance", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_rejects_a_report_for_another_instance() {
    let dir = tempfile::tempdir().unwrap();
    solve(&data("desk4_deterministic.json"), "monolith", dir.path());
    let report = dir.path().join("monolith.json");
    let o = gadop(&["simulate", "--instance", data("desk5.json").to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_writes_histogram_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    solve(&data("desk5.json"), "monolith", dir.path());
    let report = dir.path().join("monolith.json");
    let hist = dir.path().join("h.csv");
    let summary = dir.path().join("s.json");
    let instance = data("desk5.json");
    let args = [
        "simulate",
        "--instance",
        instance.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
        "--samples",
        "5000",
        "--seed",
        "9",
        "--histogram",
        hist.to_str().unwrap(),
        "--out",
        summary.to_str().unwrap(),
    ];
    let o = gadop(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&hist).unwrap();
    assert!(csv.starts_with("bin_lo,bin_hi,count\n"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["simulation"]["draws"], 5000);
    let first = std::fs::read_to_string(&summary).unwrap();
    assert!(gadop(&args).status.success());
    let again: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["simulation"], again["simulation"], "{first}");
}

#[test]
fn compare_emits_one_ranked_row_per_method() {
    let o = gadop(&["compare", "--instance", data("desk5.json").to_str().unwrap(), "--samples", "2000", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("instance,method,rank,exact_total"));
    assert!(lines[1].starts_with("desk5.json,gadop,1,"));
    let methods: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    for m in ["gadop", "evf", "pdstsp"] {
        assert!(methods.contains(&m));
    }
    for l in &lines[1..] {
        let total = l.split(',').nth(3).unwrap();
        assert_eq!(total.split('.').nth(1).map(str::len), Some(2), "{l}");
    }
}

#[test]
fn convert_writes_a_valid_instance() {
    let o = gadop(&[
        "convert",
        "--solomon",
        data("c101_25.txt").to_str().unwrap(),
        "--customers",
        "1-4,9",
        "--drones",
        "2",
        "--ground-prob",
        "0.1",
        "--break-prob",
        "0.1",
        "--break-fraction",
        "0.2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = ProblemFile::from_json(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(f.validate().is_empty());
    assert_eq!(f.instance.num_customers(), 5);
    assert_eq!(f.instance.num_drones(), 2);
    assert!(f.scenarios.is_some());
}

#[test]
fn generate_is_reproducible() {
    let a = gadop(&["generate", "--customers", "4", "--seed", "11"]);
    let b = gadop(&["generate", "--customers", "4", "--seed", "11"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let f = ProblemFile::from_json(&String::from_utf8(a.stdout).unwrap()).unwrap();
    assert!(f.validate().is_empty());
}

#[test]
fn zero_threads_is_an_error() {
    let o = gadop(&["--threads", "0", "solve", "--instance", data("desk5.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

fn report_with(plan: FirstStagePlan, layout: Layout) -> SolveReport {
    SolveReport {
        provenance: Provenance {
            tool_version: "test".into(),
            command: "solve".into(),
            flags: serde_json::Value::Null,
            instance_path: String::new(),
            instance_sha256: String::new(),
        },
        method: "monolith".into(),
        status: MilpStatus::Optimal,
        plan,
        cost: CostBreakdown::default(),
        solver: None,
        model_objective: None,
        lshape: None,
        layout: Some(layout),
        wall_time_s: 0.0,
    }
}

fn render(report: &SolveReport) -> String {
    let dir = tempfile::tempdir().unwrap();
    let rp = dir.path().join("r.json");
    let sp = dir.path().join("m.svg");
    std::fs::write(&rp, serde_json::to_string(report).unwrap()).unwrap();
    let o = gadop(&["render", "--report", rp.to_str().unwrap(), "--svg", sp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read_to_string(sp).unwrap()
}

fn square() -> Layout {
    Layout {
        coordinates: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [-1.0, -1.0]],
        drone_trip_km: vec![6.0],
    }
}

fn attr<'a>(element: &'a str, name: &str) -> &'a str {
    let key = format!(" {name}=\"");
    let start = element.find(&key).unwrap() + key.len();
    &element[start..start + element[start..].find('"').unwrap()]
}

#[test]
fn truck_route_of_four_arcs_is_one_four_segment_polyline() {
    let plan = FirstStagePlan::from_assignments(vec![vec![1, 2, 3]], vec![vec![]]);
    assert_eq!(plan.truck_arcs(0).len(), 4);
    let svg = render(&report_with(plan, square()));
    let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(polylines.len(), 1);
    let points: Vec<&str> = attr(polylines[0], "points").split_whitespace().collect();
    assert_eq!(points.len() - 1, 4);
    assert_eq!(points.first(), points.last());
    assert_eq!(points[1], "2,0");
    assert_eq!(points[2], "2,-2");
}

#[test]
fn empty_plan_draws_depot_and_customers_only() {
    let svg = render(&report_with(FirstStagePlan::empty(1, 1), square()));
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains(r#"version="1.1""#));
    assert_eq!(svg.matches(r#"class="depot""#).count(), 1);
    assert_eq!(svg.matches(r#"class="customer""#).count(), 4);
    for absent in ["<polyline", "<line", r#"class="range""#] {
        assert!(!svg.contains(absent), "{absent}");
    }
}

#[test]
fn range_circle_is_half_the_trip_limit() {
    let plan = FirstStagePlan::from_assignments(vec![vec![]], vec![vec![4, 1]]);
    let svg = render(&report_with(plan, square()));
    let circle = svg.lines().find(|l| l.contains(r#"class="range""#)).unwrap();
    assert_eq!(attr(circle, "r"), "3");
    assert_eq!((attr(circle, "cx"), attr(circle, "cy")), ("0", "0"));
    assert_eq!(svg.matches("<line").count(), 2);
}

#[test]
fn rendered_report_from_solve() {
    let dir = tempfile::tempdir().unwrap();
    solve(&data("desk5.json"), "monolith", dir.path());
    let sp = dir.path().join("m.svg");
    let rp = dir.path().join("monolith.json");
    let o = gadop(&["render", "--report", rp.to_str().unwrap(), "--svg", sp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(sp).unwrap();
    assert_eq!(svg.matches(r#"class="customer""#).count(), 5);
}

#[test]
fn render_needs_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = report_with(FirstStagePlan::empty(1, 1), square());
    r.layout = None;
    let rp = dir.path().join("r.json");
    std::fs::write(&rp, serde_json::to_string(&r).unwrap()).unwrap();
    let o = gadop(&["render", "--report", rp.to_str().unwrap(), "--svg", dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn time_cap_hit_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let instance = data("c101_10_wide.json");
    let o = gadop(&["solve", "--instance", instance.to_str().unwrap(), "--time-cap", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let r: SolveReport = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r.status, MilpStatus::GapLimit);
    let stats = r.solver.unwrap();
    assert!(stats.bound <= stats.objective + 1e-9);
}
