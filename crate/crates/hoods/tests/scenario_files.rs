use std::fs;
use std::path::{Path, PathBuf};

use hoods::fixture::{fixture_config, generate_fixture, FixtureOptions};
use hoods::{load_scenario, write_scenario};

fn six_bus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/six_bus")
}

fn write_fixture(dir: &Path, days: usize) {
    let opts = FixtureOptions {
        days,
        ..FixtureOptions::default()
    };
    write_scenario(dir, &fixture_config(&opts), &generate_fixture(&opts).unwrap()).unwrap();
}

#[test]
fn bundled_fixture_loads() {
    let sc = load_scenario(&six_bus()).unwrap();
    assert_eq!(sc.instance.network.buses.len(), 6);
    assert_eq!(sc.instance.buildings.len(), 3);
    assert_eq!(sc.instance.horizon(), 14 * 24);
    assert!(!sc.config.aggregation.enabled);
    assert_eq!(sc.paradigm().unwrap().key(), "coor+flex+");
}

#[test]
fn written_scenario_reads_back_identically() {
    let sc = load_scenario(&six_bus()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scenario(dir.path(), &sc.config, &sc.instance).unwrap();
    let again = load_scenario(dir.path()).unwrap();
    assert_eq!(again.instance, sc.instance);
    assert_eq!(again.config, sc.config);
}

#[test]
fn unknown_bus_is_named() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 2);
    let path = dir.path().join("buildings.toml");
    let text = fs::read_to_string(&path).unwrap().replacen("bus = \"b1_l1\"", "bus = \"nowhere\"", 1);
    fs::write(&path, text).unwrap();
    let err = load_scenario(dir.path()).unwrap_err().to_string();
    assert!(err.contains("nowhere"), "{err}");
}

#[test]
fn short_series_names_both_files() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 365);
    let path = dir.path().join("series/h1_2_elec.csv");
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8761);
    fs::write(&path, lines[..8760].join("\n") + "\n").unwrap();
    let err = load_scenario(dir.path()).unwrap_err().to_string();
    assert!(err.contains("h1_2_elec.csv") && err.contains("8759") && err.contains("8760"), "{err}");
}

#[test]
fn broken_timestamp_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 1);
    let path = dir.path().join("series/cop.csv");
    let text = fs::read_to_string(&path).unwrap().replacen("2023-01-01T05:00", "2023-01-01T07:00", 1);
    fs::write(&path, text).unwrap();
    let err = load_scenario(dir.path()).unwrap_err();
    let hit = err.0.iter().find(|e| e.file.ends_with("cop.csv")).expect("cop.csv error");
    assert_eq!(hit.line, Some(7));
}

#[test]
fn missing_file_is_an_error_not_a_panic() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_scenario(dir.path()).unwrap_err().to_string();
    assert!(err.contains("scenario.toml"), "{err}");
}
