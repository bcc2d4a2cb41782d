use std::path::Path;

use fdiab::runner::{load_scenario, parse_scenario, save_scenario, scenario_to_json};
use fdiab::system::{Mode, Scenario, SweepKind};

fn shipped() -> Vec<std::path::PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut v: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn shipped_scenarios_load_and_round_trip() {
    let files = shipped();
    assert!(files.len() >= 4);
    let tmp = tempfile::tempdir().unwrap();
    for f in files {
        let s = load_scenario(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        let out = tmp.path().join(f.file_name().unwrap());
        save_scenario(&s, &out).unwrap();
        assert_eq!(load_scenario(&out).unwrap(), s, "{}", f.display());
        if f.file_name().unwrap() != "minimal.json" {
            // Fully resolved files are stored exactly as `save` writes them.
            assert_eq!(std::fs::read_to_string(&f).unwrap(), scenario_to_json(&s).unwrap(), "{}", f.display());
        }
    }
}

#[test]
fn minimal_scenario_equals_default() {
    let m = load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/minimal.json")).unwrap();
    assert_eq!(m, Scenario::default());
    assert_eq!(m.modes, Mode::ALL.to_vec());
    assert_eq!(m.ue_grid.positions().len(), 441);
}

#[test]
fn sweep_scenarios_are_typed() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let link = load_scenario(&dir.join("separation_sweep.json")).unwrap();
    assert_eq!(link.sweep.unwrap().kind, SweepKind::Link);
    let sys = load_scenario(&dir.join("throughput_sweep.json")).unwrap();
    assert_eq!(sys.sweep.unwrap().kind, SweepKind::System);
}

#[test]
fn unknown_schema_version_rejected() {
    let e = parse_scenario(r#"{"schema_version": 9, "donor": {"position": [0, 0, 10]}}"#).unwrap_err();
    assert!(e.to_string().contains("schema_version"));
}
