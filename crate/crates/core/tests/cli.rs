//! The binary against direct library calls, byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use microdispatch::dispatch::DispatchContext;
use microdispatch::generate::{pge69, random_scenario, GenerateOptions};
use microdispatch::model::{Bus, NetworkModel, Partition, Profile};
use microdispatch::scenario::{load_scenario, Scenario};
use microdispatch::simulator::{run, SimState, SimulationConfig};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microdispatch"))
        .args(args)
        .env_remove("MICRODISPATCH_LOG")
        .output()
        .expect("binary runs")
}

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/pge69.json")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn one_bus(load: f64, gen: f64, steps: usize, profile_len: usize) -> Scenario {
    let mut bus = Bus::load_only(0, Profile::constant(load, profile_len));
    bus.gen_capacity = gen;
    let net = NetworkModel::new(vec![bus], vec![]).unwrap();
    let partition = Partition::from_members(&net, vec![vec![0]]).unwrap();
    Scenario {
        net,
        partition,
        config: SimulationConfig {
            steps,
            horizon: 1,
            ..SimulationConfig::default()
        },
    }
}

#[test]
fn run_writes_what_the_library_writes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("s.json");
    let mut s = random_scenario(&GenerateOptions::new(12, 3, 5)).unwrap();
    s.config.steps = 4;
    s.save(&scenario_path).unwrap();

    let out = dir.path().join("cli");
    let o = bin(&["run", "--scenario", scenario_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--benchmark"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let lib = dir.path().join("lib");
    let config = SimulationConfig {
        benchmark: true,
        ..s.config.clone()
    };
    run(&s.net, &s.partition, &config).unwrap().write_results(&lib).unwrap();
    for name in ["log.json", "costs.csv", "coalitions.csv", "partition_0.csv"] {
        assert_eq!(fs::read(out.join(name)).unwrap(), fs::read(lib.join(name)).unwrap(), "{name}");
    }
    let costs = fs::read_to_string(out.join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 1 + 4);
}

#[test]
fn steps_override_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = bin(&["run", "--scenario", bundled().to_str().unwrap(), "--steps", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let costs = fs::read_to_string(out.join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 2);
    let coalitions = fs::read_to_string(out.join("coalitions.csv")).unwrap();
    assert_eq!(coalitions.lines().count(), 1 + 8);
}

#[test]
fn full_case_study_run_has_96_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results");
    let o = bin(&["run", "--scenario", bundled().to_str().unwrap(), "--benchmark", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let costs = fs::read_to_string(out.join("costs.csv")).unwrap();
    assert_eq!(costs.lines().count(), 1 + 96);
    assert!(costs.lines().skip(1).all(|l| l.split(',').all(|f| !f.is_empty())));
}

#[test]
fn missing_file_and_bad_input_exit_2() {
    let o = bin(&["run", "--scenario", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(bin(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn short_profile_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.json");
    one_bus(0.0, 0.0, 10, 5).save(&path).unwrap();
    let o = bin(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("profile shorter than steps+h"), "{}", stderr(&o));
}

#[test]
fn infeasible_dispatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dark.json");
    // Load with no generation, storage or grid connection.
    one_bus(10.0, 0.0, 1, 2).save(&path).unwrap();
    let o = bin(&["run", "--scenario", path.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["run"]).status.code(), Some(1));
    assert_eq!(bin(&["validate", bundled().to_str().unwrap(), "--horizon", "0"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_is_deterministic_and_checks_sizes() {
    let a = bin(&["gen", "4", "2", "--seed", "7"]);
    let b = bin(&["gen", "4", "2", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let lib = random_scenario(&GenerateOptions::new(4, 2, 7)).unwrap().to_json() + "\n";
    assert_eq!(String::from_utf8(a.stdout).unwrap(), lib);

    let o = bin(&["gen", "3", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("n = 3, m = 5"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    assert!(bin(&["gen", "69", "8", "--out", path.to_str().unwrap()]).status.success());
    assert!(bin(&["validate", path.to_str().unwrap()]).status.success());
}

#[test]
fn bundled_scenario_matches_its_builder() {
    let o = bin(&["gen", "--preset", "pge69"]);
    assert!(o.status.success());
    assert_eq!(o.stdout, fs::read(bundled()).unwrap());
    let s = load_scenario(bundled()).unwrap();
    assert_eq!(s, pge69());
    assert_eq!((s.net.len(), s.partition.len(), s.config.steps), (69, 8, 96));

    let v = bin(&["validate", bundled().to_str().unwrap()]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("ok: 69 buses"));
}

#[test]
fn dump_qp_lists_the_library_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.json");
    let s = one_bus(0.0, 0.0, 1, 2);
    s.save(&path).unwrap();
    let o = bin(&["dump-qp", "--scenario", path.to_str().unwrap(), "--k", "0", "--coalition", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l == "variables 3"), "{text}");

    let state = SimState::initial(&s.net, s.partition.clone());
    let ctx = DispatchContext {
        net: &s.net,
        start: 0,
        horizon: 1,
        soc: &state.soc,
        settings: s.config.dispatch_settings(),
    };
    let mut lib = Vec::new();
    ctx.build_coalition(&[0]).write_listing(&mut lib).unwrap();
    assert_eq!(text.into_bytes(), lib);

    let bad = bin(&["dump-qp", "--scenario", path.to_str().unwrap(), "--coalition", "4"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_microdispatch"))
        .args(["run", "--scenario", bundled().to_str().unwrap(), "--steps", "1"])
        .arg("--out")
        .arg(dir.path().join("r"))
        .env("MICRODISPATCH_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(stderr(&o).contains("step 0"), "{}", stderr(&o));
}
