use std::fs;

use hoods::fixture::{fixture_config, generate_fixture, FixtureOptions, ELEC_PER_DWELLING};
use hoods::write_scenario;

#[test]
fn same_seed_gives_identical_files() {
    let opts = FixtureOptions {
        seed: 1,
        n_branches: 2,
        buses_per_branch: 3,
        ..FixtureOptions::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_scenario(a.path(), &fixture_config(&opts), &generate_fixture(&opts).unwrap()).unwrap();
    write_scenario(b.path(), &fixture_config(&opts), &generate_fixture(&opts).unwrap()).unwrap();
    for name in ["scenario.toml", "network.toml", "buildings.toml", "catalog.toml", "series/h2_1_elec.csv", "series/cf_pv.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn branches_and_buses_add_up() {
    let inst = generate_fixture(&FixtureOptions {
        n_branches: 2,
        buses_per_branch: 3,
        ..FixtureOptions::default()
    })
    .unwrap();
    assert_eq!(inst.network.buses.len(), 7);
    assert_eq!(inst.network.lines.len(), 6);
    assert_eq!(inst.buildings.len(), 4);
    assert!(inst.network.topology().is_ok());
}

#[test]
fn different_seeds_differ() {
    let a = generate_fixture(&FixtureOptions::default()).unwrap();
    let b = generate_fixture(&FixtureOptions {
        seed: 2,
        ..FixtureOptions::default()
    })
    .unwrap();
    assert_ne!(a.buildings[0].profiles.elec, b.buildings[0].profiles.elec);
}

#[test]
fn annual_appliance_demand_is_typical_per_dwelling() {
    let inst = generate_fixture(&FixtureOptions {
        days: 365,
        n_branches: 3,
        buses_per_branch: 5,
        ..FixtureOptions::default()
    })
    .unwrap();
    for b in &inst.buildings {
        let annual: f64 = b.profiles.elec.iter().sum();
        let dwellings = (annual / ELEC_PER_DWELLING).round();
        assert!(dwellings == 1.0 || dwellings == 2.0, "{}: {annual}", b.id);
        let per = annual / dwellings;
        assert!((per - ELEC_PER_DWELLING).abs() <= 0.1 * ELEC_PER_DWELLING, "{}: {per}", b.id);
    }
}
