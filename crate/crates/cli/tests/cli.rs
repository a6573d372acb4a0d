use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use wlan_pricing::design::evaluate_objectives;
use wlan_pricing::{ActionProfile, MacProtocol, PricingPolicy, Scenario, BASELINE_CSMA_P};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wlan-pricing"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wlan-pricing-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn records(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes()).records().map(|r| r.unwrap()).collect()
}

#[test]
fn utility_curve_ends_at_one_user() {
    let text = stdout(&["utility-curve"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "m,tau,u_video,u_email");
    assert_eq!(lines.len(), 21);
    assert_eq!(*lines.last().unwrap(), "1,0.117647058824,7.45,4.15");
    assert!(!text.contains('\r'));
}

#[test]
fn phase_diagram_is_reproducible_and_writes_a_sidecar() {
    let out = scratch("phase.csv");
    let args = ["phase-diagram", "--protocol", "both", "--provider", "selfish", "--demand1", "1", "--grid-step", "12"];
    let first = stdout(&args);
    assert_eq!(first, stdout(&args));
    let mut with_out = args.to_vec();
    let path = out.to_str().unwrap();
    with_out.extend(["--out", path]);
    stdout(&with_out);
    assert_eq!(fs::read_to_string(&out).unwrap(), first);
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["experiment"], "phase-diagram");
    assert_eq!(side["spec"]["provider"], "selfish");
    assert_eq!(side["spec"]["n1"]["step"], 12);
    assert_eq!(side["spec"]["demand"][0], 1.0);
}

#[test]
fn phase_rows_recompute_from_their_prices() {
    let text = stdout(&["phase-diagram", "--protocol", "both", "--provider", "selfish", "--demand1", "1", "--grid-step", "9"]);
    let rows = records(&text);
    assert_eq!(rows.len(), 2 * 6 * 6);
    for r in rows {
        assert_eq!(&r[12], "ok");
        let num = |i: usize| r[i].parse::<f64>().unwrap();
        let n = [num(0) as u32, num(1) as u32];
        let protocol = if &r[3] == "tdma" { MacProtocol::Tdma } else { MacProtocol::Csma { p: BASELINE_CSMA_P } };
        let s = Scenario::two_type_baseline(n, [1.0, 0.1], protocol, num(4));
        let o = evaluate_objectives(&ActionProfile::two_type([num(8), num(9)]), &PricingPolicy::single(num(6), num(7)), &s)
            .unwrap();
        for (got, want) in [(o.welfare, num(10)), (o.revenue, num(11))] {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{r:?}: {got} vs {want}");
        }
    }
}

#[test]
fn curves_report_both_protocols() {
    let text = stdout(&["profit-curve", "--n2-range", "1:3"]);
    let rows = records(&text);
    // Two preset cost pairs, three populations each.
    assert_eq!(rows.len(), 6);
    let text = stdout(&["welfare-curve", "--n2-range", "1:2", "--c0-csma", "1e6", "--c0-tdma", "1e6"]);
    assert!(text.starts_with("n1,n2,c0_csma,c0_tdma,welfare_csma,welfare_tdma,ne_csma,ne_tdma,status\n"));
    for r in records(&text) {
        assert_eq!((&r[4], &r[5], &r[6], &r[7]), ("0", "0", "(o,o)", "(o,o)"));
    }
}

#[test]
fn simulate_runs_at_the_design_point() {
    let text = stdout(&["simulate", "--n1", "2", "--n2", "1", "--events", "2000", "--replications", "2", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["report"]["seed"], 3);
    assert_eq!(v["report"]["replications"], 2);
    assert_eq!(text, stdout(&["simulate", "--n1", "2", "--n2", "1", "--events", "2000", "--replications", "2", "--seed", "3"]));
}

#[test]
fn simulate_reads_a_scenario_document() {
    let s = Scenario::two_type_baseline([1, 2], [1.0, 1.0], MacProtocol::Tdma, 0.0);
    let path = scratch("scenario.json");
    fs::write(&path, s.to_json().unwrap()).unwrap();
    let text = stdout(&["simulate", "--scenario", path.to_str().unwrap(), "--events", "1000", "--replications", "2"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let back: Scenario = serde_json::from_value(v["config"]["scenario"].clone()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn verify_exits_zero_when_the_suite_passes() {
    let out = run(&["verify", "collapse"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failures"));
}

#[test]
fn bad_input_fails_without_output() {
    for args in [
        &["phase-diagram", "--n2-range", "9:3"][..],
        &["phase-diagram", "--demand1", "-1"],
        &["phase-diagram", "--grid-step", "0"],
        &["simulate", "--protocol", "both"],
    ] {
        let out = run(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(out.stdout.is_empty());
    }
}
