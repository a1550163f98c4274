//! Scenario runs, exit codes, file round trips and the command-line binary.

use czkit::harness::{calibrate_s, generate_example, run, ExampleParams, KernelSource, Scenario, ScaleChoice, SpaceSource, EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_PASS};
use czkit::io::{load_kernel, load_space, read_json, save_kernel, save_space, write_json, KernelFile, LatticeFile, SpaceFile};
use czkit::lattice::DyadicLattice;
use czkit::space::RadiusSampling;
use std::path::PathBuf;
use std::process::Command;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("czkit-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn example(name: &str, params: ExampleParams) -> Scenario {
    Scenario { name: name.into(), space: SpaceSource::Example { example: name.into(), params }, ..Scenario::default() }
}

fn small_grid() -> Scenario {
    example("uniform_grid", ExampleParams { n: Some(5), ..Default::default() })
}

fn czkit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_czkit")).args(args).output().expect("binary runs")
}

#[test]
fn passing_scenario_exits_zero() {
    let rep = run(&small_grid());
    assert!(rep.errors.is_empty(), "{:?}", rep.errors);
    assert!(rep.pass, "{:?}", rep.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    assert_eq!(rep.exit_code, EXIT_PASS);
    assert!(rep.certificate.is_some() && rep.timings.is_none());
}

#[test]
fn unknown_example_and_bad_scale_are_input_errors() {
    let rep = run(&example("no_such_space", ExampleParams::default()));
    assert_eq!(rep.exit_code, EXIT_INPUT_ERROR);
    assert!(rep.certificate.is_none());

    let mut sc = small_grid();
    sc.s = ScaleChoice::Named("huge".into());
    assert_eq!(run(&sc).exit_code, EXIT_INPUT_ERROR);

    let mut sc = small_grid();
    sc.s = ScaleChoice::Named("calibrate".into());
    sc.calibration_ensemble = 50;
    assert_eq!(run(&sc).exit_code, EXIT_INPUT_ERROR);
}

#[test]
fn missed_capture_fails_the_run() {
    let dir = scratch("capture");
    let ex = generate_example("bergman_disc_model", &ExampleParams { rings: Some(4), ..Default::default() }).unwrap();
    // the disc has balls that are not Ahlfors; emptying Omega leaves them uncaptured
    let space = ex.space.with_omega(vec![false; ex.space.n()]).unwrap();
    let (sp, kp) = (dir.join("space.json"), dir.join("kernel.json"));
    save_space(&sp, &space).unwrap();
    save_kernel(&kp, &ex.kernel).unwrap();
    let sc = Scenario { space: SpaceSource::File { file: sp }, kernel: Some(KernelSource::File { file: kp }), ..Scenario::default() };
    let rep = run(&sc);
    assert_eq!(rep.exit_code, EXIT_CHECK_FAILED);
    let capture = rep.checks.iter().find(|c| c.name == "omega_capture").unwrap();
    assert!(!capture.pass);
    assert!(rep.certificate.is_none());
}

#[test]
fn zero_kernel_is_certified() {
    let mut sc = small_grid();
    sc.kernel = Some(KernelSource::Inline(KernelFile { kind: "zero".into(), params: Default::default(), matrix: None }));
    let rep = run(&sc);
    assert_eq!(rep.exit_code, EXIT_PASS);
    let cert = rep.certificate.unwrap();
    assert!(cert.certified_total >= 0.0);
    assert_eq!(cert.norm.value, 0.0);
}

#[test]
fn reports_are_reproducible() {
    let dir = scratch("repro");
    let mut a = example("cantor_measure", ExampleParams { depth: Some(4), ..Default::default() });
    a.ensemble = 120;
    let mut b = a.clone();
    a.report = Some(dir.join("a.json"));
    b.report = Some(dir.join("b.json"));
    run(&a);
    run(&b);
    let (ra, rb) = (std::fs::read_to_string(dir.join("a.json")).unwrap(), std::fs::read_to_string(dir.join("b.json")).unwrap());
    // only the report path differs
    assert_eq!(ra.replace("a.json", "b.json"), rb);
}

#[test]
fn example_edge_cases() {
    let point = generate_example("cantor_measure", &ExampleParams { depth: Some(0), ..Default::default() }).unwrap();
    assert_eq!(point.space.n(), 1);
    assert!((point.space.mu()[0] - 1.0).abs() < 1e-15);
    assert!(generate_example("cantor", &ExampleParams::default()).is_ok());
    assert!(generate_example("cantor_measure", &ExampleParams { depth: Some(13), ..Default::default() }).is_err());

    let grid = generate_example("uniform_grid", &ExampleParams { n: Some(6), ..Default::default() }).unwrap();
    let radii = grid.space.sample_radii(RadiusSampling::Exhaustive);
    let growth = grid.space.check_growth_condition(grid.m, &radii).unwrap();
    assert!(growth.non_ahlfors.is_empty());
}

#[test]
fn calibration_edge_cases() {
    let ex = generate_example("cantor_measure", &ExampleParams { depth: Some(4), ..Default::default() }).unwrap();
    let k = &ex.kernel;
    let trivial = calibrate_s(&ex.space, 0.5, k.tau, k.m, 1.0, 100, 3).unwrap();
    assert_eq!(trivial.s, 1);
    assert!(!trivial.exhausted);
    assert!(calibrate_s(&ex.space, 0.5, k.tau, k.m, 0.25, 99, 3).is_err());

    let shallow = generate_example("cantor_measure", &ExampleParams { depth: Some(2), ..Default::default() }).unwrap();
    let cal = calibrate_s(&shallow.space, 0.5, k.tau, k.m, 0.01, 100, 3).unwrap();
    assert!(cal.exhausted);
    assert!(cal.warning.is_some());
}

#[test]
fn files_round_trip() {
    let dir = scratch("roundtrip");
    for name in ["line_in_plane", "bergman_disc_model"] {
        let ex = generate_example(name, &ExampleParams::default()).unwrap();
        let sp = dir.join(format!("{name}.space.json"));
        save_space(&sp, &ex.space).unwrap();
        let back = load_space(&sp).unwrap();
        assert_eq!(SpaceFile::from_space(&back), SpaceFile::from_space(&ex.space));
        let kp = dir.join(format!("{name}.kernel.json"));
        save_kernel(&kp, &ex.kernel).unwrap();
        assert_eq!(load_kernel(&kp, None).unwrap(), ex.kernel);

        let lat = DyadicLattice::build(&ex.space, 0.5, 5, None).unwrap();
        let lp = dir.join(format!("{name}.lattice.json"));
        write_json(&lp, &LatticeFile::from_lattice(&ex.space, &lat)).unwrap();
        let again = read_json::<LatticeFile>(&lp).unwrap().into_lattice(&ex.space).unwrap();
        assert_eq!((again.k_min(), again.k_max()), (lat.k_min(), lat.k_max()));
        for k in lat.k_min()..=lat.k_max() {
            for x in 0..ex.space.n() {
                let (a, b) = (lat.cube(lat.cube_at(k, x).unwrap()), again.cube(again.cube_at(k, x).unwrap()));
                assert_eq!((a.center, &a.members), (b.center, &b.members));
            }
        }
        assert!(again.verify(&ex.space).ok);
    }
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"points":[1,2],"metric":{"type":"explicit","matrix":[[0,1],[2,0]]},"nu":[1,1],"mu":[1,1],"resolution_h":1}"#).unwrap();
    assert!(load_space(&bad).is_err());
}

#[test]
fn binary_exit_codes_and_outputs() {
    let dir = scratch("binary");
    let (sp, kp) = (dir.join("grid.json"), dir.join("grid.kernel.json"));
    let out = czkit(&["generate-example", "uniform_grid", "--n", "5", "--space-out", sp.to_str().unwrap(), "--kernel-out", kp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(load_space(&sp).is_ok() && load_kernel(&kp, None).is_ok());

    assert_eq!(czkit(&["generate-example", "moebius_strip", "--space-out", sp.to_str().unwrap()]).status.code(), Some(2));

    let out = czkit(&["verify-space", "--space", sp.to_str().unwrap(), "--kernel", kp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);

    let out = czkit(&["norm", "--example", "uniform_grid", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);

    let scenario = dir.join("scenario.json");
    std::fs::write(&scenario, r#"{"name": "grid", "space": {"example": "uniform_grid", "params": {"n": 5}}}"#).unwrap();
    let report = dir.join("report.json");
    let out = czkit(&["run", scenario.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).lines().all(|l| l.starts_with("PASS ")));
    let v: serde_json::Value = read_json(&report).unwrap();
    assert_eq!(v["exit_code"], 0);

    assert_eq!(czkit(&["run", scenario.to_str().unwrap(), "--s", "lots"]).status.code(), Some(2));
    assert_eq!(czkit(&["run", dir.join("missing.json").to_str().unwrap()]).status.code(), Some(2));
}
