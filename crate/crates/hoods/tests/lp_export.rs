//! Models written as LP and MPS read back into HiGHS with the same optimum.

use std::ffi::CString;
use std::path::Path;

use hoods::fixture::{generate_fixture, FixtureOptions};
use hoods::HighsSolver;
use hoods_core::assembly::build_hoods;
use hoods_core::model::{solve, ModelSpec, SolveParams};

fn spec() -> ModelSpec {
    let inst = generate_fixture(&FixtureOptions {
        days: 1,
        buses_per_branch: 2,
        ..FixtureOptions::default()
    })
    .unwrap();
    build_hoods(&inst, &inst.full_grid().unwrap()).unwrap().spec
}

/// Reads `path` with HiGHS, solves it and returns (columns, rows, objective).
fn read_and_solve(path: &Path) -> (i32, i32, f64) {
    let file = CString::new(path.to_str().unwrap()).unwrap();
    let quiet = CString::new("output_flag").unwrap();
    let gap = CString::new("mip_rel_gap").unwrap();
    unsafe {
        let h = highs_sys::Highs_create();
        highs_sys::Highs_setBoolOptionValue(h, quiet.as_ptr(), 0);
        highs_sys::Highs_setDoubleOptionValue(h, gap.as_ptr(), 0.0);
        assert_eq!(highs_sys::Highs_readModel(h, file.as_ptr()), 0, "HiGHS rejected {}", path.display());
        assert_eq!(highs_sys::Highs_run(h), 0);
        let out = (
            highs_sys::Highs_getNumCol(h) as i32,
            highs_sys::Highs_getNumRow(h) as i32,
            highs_sys::Highs_getObjectiveValue(h),
        );
        highs_sys::Highs_destroy(h);
        out
    }
}

#[test]
fn lp_and_mps_round_trip_through_highs() {
    let spec = spec();
    let exact = SolveParams {
        mip_gap: 0.0,
        ..SolveParams::default()
    };
    let direct = solve(&spec, &exact, &HighsSolver).unwrap().objective.unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("model.lp", spec.to_lp()), ("model.mps", spec.to_mps())] {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let (cols, _, obj) = read_and_solve(&path);
        assert_eq!(cols as usize, spec.num_vars(), "{name}");
        assert!((obj - direct).abs() <= 1e-6 * direct.abs().max(1.0), "{name}: {obj} vs {direct}");
    }
}
