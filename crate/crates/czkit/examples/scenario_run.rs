//! End-to-end scenario with calibration of the scale parameter, as the `run` subcommand does it.

use czkit::harness::{run, ScaleChoice, Scenario};

fn main() {
    let json = r#"{
        "name": "cantor, calibrated",
        "space": {"example": "cantor_measure", "params": {"depth": 6}},
        "s": "calibrate",
        "ensemble": 120,
        "pairs": 2
    }"#;
    let scenario: Scenario = serde_json::from_str(json).expect("scenario parses");
    assert_eq!(scenario.s, ScaleChoice::Named("calibrate".into()));
    let report = run(&scenario);
    if let Some(cal) = &report.calibration {
        println!("S = {} (r = {}), worst bad probability {:.3} against {:.4}", cal.s, cal.r, cal.p_max, cal.target);
    }
    for check in &report.checks {
        println!("{} {}", if check.pass { "PASS" } else { "FAIL" }, check.name);
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("exit code {}", report.exit_code);
}
