use hoods::fixture::{generate_fixture, FixtureOptions};
use hoods::{solver_by_name, HighsSolver, MicrolpSolver};
use hoods_core::assembly::{build_hoods_bui, Instance};
use hoods_core::model::{solve, SolveParams, SolveStatus};
use hoods_core::paradigms::{run_coordinated, run_paradigm, AggregationConfig, ParadigmId};

fn small(days: usize) -> Instance {
    generate_fixture(&FixtureOptions {
        days,
        buses_per_branch: 2,
        ..FixtureOptions::default()
    })
    .unwrap()
}

#[test]
fn backends_agree_on_a_building_model() {
    let inst = small(1);
    let time = inst.full_grid().unwrap();
    let spec = build_hoods_bui(&inst, 0, &time, true).unwrap().spec;
    let params = SolveParams {
        mip_gap: 0.0,
        ..SolveParams::default()
    };
    let a = solve(&spec, &params, &HighsSolver).unwrap();
    let b = solve(&spec, &params, &MicrolpSolver).unwrap();
    assert_eq!(a.status, SolveStatus::Optimal);
    assert_eq!(b.status, SolveStatus::Optimal);
    let (x, y) = (a.objective.unwrap(), b.objective.unwrap());
    assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{x} vs {y}");
}

#[test]
fn unknown_backend_is_rejected() {
    assert!(solver_by_name("cplex").is_err());
    assert_eq!(solver_by_name("HiGHS").unwrap().name(), "highs");
}

#[test]
fn aggregated_sizing_carries_over_to_the_full_year() {
    let inst = small(56);
    let agg = AggregationConfig {
        enabled: true,
        n_periods: 4,
        period_len: 168,
    };
    let r = run_coordinated(&inst, &agg, &HighsSolver, &SolveParams::default()).unwrap();
    assert_eq!(r.stages.len(), 2);
    assert!(r.stages.iter().all(|s| s.status.has_solution()));
    assert!(r.stages[0].variables < r.stages[1].variables);
    assert!((r.costs.total() - r.objective).abs() <= 1e-6 * r.objective.abs().max(1.0));
}

#[test]
fn flexibility_never_costs_more() {
    let inst = small(2);
    let params = SolveParams::default();
    let agg = AggregationConfig::disabled();
    let rigid = run_paradigm(&inst, ParadigmId::CoorMinusFlexMinus, &agg, &HighsSolver, &params).unwrap();
    let flexible = run_paradigm(&inst, ParadigmId::CoorMinusFlexPlus, &agg, &HighsSolver, &params).unwrap();
    assert!(flexible.costs.total() <= rigid.costs.total() * (1.0 + 1e-4) + 1e-6);
}
