//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use std::f64::consts::{FRAC_PI_8, PI, SQRT_2};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hoods::fixture::{generate_fixture, FixtureOptions};
use hoods::{load_scenario, HighsSolver, MicrolpSolver};
use hoods_core::assembly::{build_hoods, Instance};
use hoods_core::cost::annuity_factor;
use hoods_core::domain::{
    effective_cable_params, Building, BuildingProfiles, Bus, BusKind, CableSetting, CableType, LineSection, Mobility,
    Network, TechnoCatalog, TransformerOption, VoltageBands, CABLE_TYPES,
};
use hoods_core::grid::octagon_contains;
use hoods_core::model::{solve, SolveParams, SolveStatus, VarKind};
use hoods_core::paradigms::{aggregation_bundle, building_stages, grid_stage, run_all, AggregationConfig, ParadigmId, PlanResult};
use hoods_core::timeseries::{aggregate, fidelity_report};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Outward face normals of the regular octagon with a vertex on the p axis.
fn face_angles() -> Vec<f64> {
    (0..8).map(|j| FRAC_PI_8 + j as f64 * PI / 4.0).collect()
}

fn inside_by_geometry(p: f64, q: f64, kappa: f64) -> bool {
    let apothem = kappa * FRAC_PI_8.cos();
    face_angles().iter().all(|t| p * t.cos() + q * t.sin() <= apothem)
}

fn distance_to_boundary(p: f64, q: f64, kappa: f64) -> f64 {
    let apothem = kappa * FRAC_PI_8.cos();
    face_angles()
        .iter()
        .map(|t| (p * t.cos() + q * t.sin() - apothem).abs())
        .fold(f64::INFINITY, f64::min)
}

fn c1_octagon(inst: &Instance) -> Outcome {
    let t0 = Instant::now();
    let time = inst.full_grid().map_err(|e| e.to_string())?;
    let m = build_hoods(inst, &time).map_err(|e| e.to_string())?;
    let (big, small) = (SQRT_2 + 1.0, SQRT_2 - 1.0);
    let sig12 = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    let mut rows = 0;
    for c in m.spec.constraints().iter().filter(|c| c.label.starts_with("lim_")) {
        let parts: Vec<&str> = c.label.rsplitn(4, '_').collect();
        let setting = match parts[2] {
            "I" => CableSetting::I,
            "II" => CableSetting::II,
            "III" => CableSetting::III,
            s => return Err(format!("unexpected setting `{s}` in {}", c.label)),
        };
        let line = inst.network.lines.iter().find(|l| c.label.contains(&format!("{}_{}", l.from, l.to)));
        let Some(line) = line else {
            return Err(format!("row {} names no line", c.label));
        };
        let cable = inst.network.cable(&line.cable).ok_or("unknown cable")?;
        let kappa = f64::from(setting.count()) * cable.s_max;
        let [(_, a), (_, b), (_, ck)] = c.terms[..] else {
            return Err(format!("row {} does not have three terms", c.label));
        };
        let cc = -ck / kappa;
        for x in [a.abs(), b.abs(), cc] {
            if !(sig12(x, 1.0) || sig12(x, big) || sig12(x, small)) {
                return Err(format!("row {} has coefficient {x}", c.label));
            }
        }
        let norm = a.hypot(b);
        if !sig12(cc / norm, FRAC_PI_8.cos()) {
            return Err(format!("row {} is not tangent to the inscribed octagon", c.label));
        }
        let angle = b.atan2(a).rem_euclid(2.0 * PI);
        if !face_angles().iter().any(|t| (t - angle).abs() < 1e-12) {
            return Err(format!("row {} has normal at {angle} rad", c.label));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err("model has no line limit rows".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut disagreements = 0;
    let mut outside_circle = 0;
    let n = 10_000;
    for _ in 0..n {
        let kappa: f64 = rng.random_range(10.0..400.0);
        let p = rng.random_range(-1.2..1.2) * kappa;
        let q = rng.random_range(-1.2..1.2) * kappa;
        if distance_to_boundary(p, q, kappa) < 1e-9 * kappa {
            continue;
        }
        let ours = octagon_contains(p, q, kappa, 0.0);
        if ours != inside_by_geometry(p, q, kappa) {
            disagreements += 1;
        }
        if ours && p * p + q * q > kappa * kappa * (1.0 + 1e-12) {
            outside_circle += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        disagreements == 0 && outside_circle == 0 && secs < 5.0,
        format!("{rows} limit rows exact, {n} samples: {disagreements} disagreements, {outside_circle} outside circle, {secs:.2} s"),
    )
}

fn c2_annuity() -> Outcome {
    let a = annuity_factor(0.02, 20.0).map_err(|e| e.to_string())?;
    let b = annuity_factor(0.06, 40.0).map_err(|e| e.to_string())?;
    check(
        (a - 0.061157).abs() <= 1e-6 && (b - 0.066462).abs() <= 1e-6,
        format!("af(2 %, 20 a) = {a:.6}, af(6 %, 40 a) = {b:.6}"),
    )
}

fn find(results: &[PlanResult], p: ParadigmId) -> &PlanResult {
    results.iter().find(|r| r.paradigm == p).expect("paradigm present")
}

fn c3_ordering(results: &[PlanResult], gap: f64) -> Outcome {
    use ParadigmId::*;
    let order = [CoorPlusFlexPlus, CoorMinusFlexPlusPlus, CoorMinusFlexPlus, CoorMinusFlexMinus];
    let totals: Vec<f64> = order.iter().map(|&p| find(results, p).costs.total()).collect();
    let ok = totals
        .windows(2)
        .all(|w| w[0] <= w[1] + gap * w[0].abs().max(w[1].abs()) + 1e-6);
    let text: Vec<String> = order.iter().zip(&totals).map(|(p, t)| format!("{} {t:.2}", p.key())).collect();
    check(ok, text.join(" <= "))
}

/// Two buses, one building, two hours: small enough to enumerate every
/// binary pattern.
fn micro_instance() -> Instance {
    let cable = CABLE_TYPES.iter().find(|c| c.0 == "NAYY 4x35").unwrap();
    let catalog = TechnoCatalog::table_v(vec![3.2, 2.8], vec![0.1, 0.6]);
    let oltc = TransformerOption::oltc(160.0, 13000.0, &catalog.grid).unwrap();
    Instance {
        network: Network {
            buses: vec![
                Bus {
                    id: "mbb".into(),
                    kind: BusKind::Mbb,
                    predecessor: None,
                },
                Bus {
                    id: "house".into(),
                    kind: BusKind::Load,
                    predecessor: Some("mbb".into()),
                },
            ],
            lines: vec![LineSection {
                from: "mbb".into(),
                to: "house".into(),
                length: 20.0,
                cable: cable.0.into(),
                existing: CableSetting::I,
            }],
            cables: vec![CableType {
                name: cable.0.into(),
                r: cable.1,
                x: cable.2,
                s_max: cable.3,
                c_install: 90.0,
                c_material: 10.0,
            }],
            transformers: vec![TransformerOption::frt(400.0), oltc],
        },
        bands: VoltageBands::default(),
        buildings: vec![Building {
            id: "h".into(),
            bus: "house".into(),
            roof_area: 60.0,
            profiles: BuildingProfiles {
                elec: vec![0.6, 0.3],
                elec_q: None,
                space_heat: vec![1.5, 0.8],
                hot_water: vec![0.2, 0.1],
            },
            mobility: Mobility::none(),
        }],
        catalog,
        represented_hours: 8760.0,
    }
}

fn c4_brute_force(inst: &Instance) -> Outcome {
    let time = inst.full_grid().map_err(|e| e.to_string())?;
    let spec = build_hoods(inst, &time).map_err(|e| e.to_string())?.spec;
    let binaries: Vec<_> = spec
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, v)| (i, v.lower, v.upper))
        .collect();
    if binaries.len() > 12 {
        return Err(format!("{} binaries is too many to enumerate", binaries.len()));
    }
    let exact = SolveParams {
        mip_gap: 0.0,
        ..SolveParams::default()
    };
    let milp = solve(&spec, &exact, &HighsSolver).map_err(|e| e.to_string())?;
    let milp_obj = milp.objective.ok_or("MILP has no solution")?;
    let ids: Vec<_> = (0..spec.num_vars()).map(|i| spec.var_by_name(&spec.variables()[i].name).unwrap()).collect();
    let mut best = f64::INFINITY;
    let mut feasible = 0;
    for mask in 0u32..(1 << binaries.len()) {
        let fix: Vec<_> = binaries
            .iter()
            .enumerate()
            .map(|(j, &(i, _, _))| (ids[i], f64::from((mask >> j) & 1)))
            .collect();
        if fix.iter().zip(&binaries).any(|((_, v), &(_, lo, hi))| *v < lo || *v > hi) {
            continue;
        }
        let sub = spec.fix_variables(&fix).map_err(|e| e.to_string())?;
        let r = solve(&sub, &exact, &MicrolpSolver).map_err(|e| e.to_string())?;
        if r.status == SolveStatus::Optimal {
            feasible += 1;
            best = best.min(r.objective.unwrap());
        }
    }
    check(
        close(best, milp_obj, 1e-6),
        format!(
            "{} binaries, {feasible} feasible patterns, enumeration {best:.6}, MILP {milp_obj:.6}",
            binaries.len()
        ),
    )
}

fn c5_storage(inst: &Instance, results: &[&PlanResult]) -> Outcome {
    let cat = &inst.catalog;
    let eta_cs = cat.charging.efficiency;
    let mut worst: f64 = 0.0;
    for r in results {
        for d in &r.dispatch {
            for k in 0..r.time.len() {
                let prev = r.time.prev(k);
                for (s, e, ch, dch) in [
                    (&cat.battery, &d.bat_e, &d.bat_ch, &d.bat_dch),
                    (&cat.thermal_storage, &d.ts_e, &d.ts_ch, &d.ts_dch),
                ] {
                    let want = (1.0 - s.self_discharge) * e[prev] + s.eta_ch * ch[k] - dch[k] / s.eta_dch;
                    worst = worst.max((e[k] - want).abs() / e[k].abs().max(1.0));
                }
                let want = d.vms_e[prev] + d.vms_ch[k] - d.vms_dch[k];
                worst = worst.max((d.vms_e[k] - want).abs() / d.vms_e[k].abs().max(1.0));
            }
            for period in r.time.periods() {
                let ch: f64 = period.clone().map(|k| d.vms_ch[k]).sum();
                let dch: f64 = period.clone().map(|k| d.vms_dch[k]).sum();
                worst = worst.max((ch - dch).abs() / ch.abs().max(1.0));
                let p: f64 = period.clone().map(|k| d.bev_p[k]).sum();
                let need: f64 = period.clone().map(|k| d.mobility_demand[k]).sum::<f64>() / eta_cs;
                worst = worst.max((p - need).abs() / need.abs().max(1.0));
            }
        }
    }
    check(worst <= 1e-6, format!("{} plans, worst relative residual {worst:.2e}", results.len()))
}

fn c6_voltage(inst: &Instance, results: &[&PlanResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut mbb_fixed = true;
    for r in results {
        let oltc = r.reinforcement.is_oltc;
        for (b, bus) in inst.network.buses.iter().enumerate() {
            let band = inst.bands.band(bus);
            let (lo, hi) = if oltc { (band.oltc_min, band.oltc_max) } else { (band.min, band.max) };
            for &u in &r.grid.u[b] {
                worst = worst.max(lo * lo - u).max(u - hi * hi);
                if !oltc && bus.kind == BusKind::Mbb && (u - 1.0).abs() > 1e-6 {
                    mbb_fixed = false;
                }
            }
        }
    }
    check(
        worst <= 1e-6 && mbb_fixed,
        format!("{} plans, worst band excess {:.2e}, busbar at 1 p.u. under FRT: {mbb_fixed}", results.len(), worst.max(0.0)),
    )
}

/// Step with the highest line utilisation.
fn worst_step(inst: &Instance, r: &PlanResult) -> usize {
    let util = |k: usize| {
        inst.network
            .lines
            .iter()
            .enumerate()
            .map(|(l, line)| {
                let cable = inst.network.cable(&line.cable).unwrap();
                let (kappa, _, _) = effective_cable_params(cable, r.reinforcement.lines[l].setting);
                r.grid.p_line[l][k].hypot(r.grid.q_line[l][k]) / kappa
            })
            .fold(0.0, f64::max)
    };
    (0..r.time.len()).max_by(|&a, &b| util(a).total_cmp(&util(b))).unwrap_or(0)
}

/// Backward/forward sweep AC power flow at step `k` with the bus loads
/// implied by the plan's line flows. Returns |V| per bus in p.u.
fn ac_sweep(inst: &Instance, r: &PlanResult, k: usize) -> Vec<f64> {
    let net = &inst.network;
    let topo = net.topology().unwrap();
    let n = net.buses.len();
    let base = inst.bands.v_base * inst.bands.v_base / 1000.0;
    let z: Vec<Complex64> = net
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let cable = net.cable(&line.cable).unwrap();
            let (_, rr, xx) = effective_cable_params(cable, r.reinforcement.lines[l].setting);
            Complex64::new(rr, xx) * (line.length / 1000.0) / base
        })
        .collect();
    let mut load = vec![Complex64::new(0.0, 0.0); n];
    for l in 0..net.lines.len() {
        let s = Complex64::new(r.grid.p_line[l][k], r.grid.q_line[l][k]);
        load[topo.line_to[l]] += s;
        load[topo.line_from[l]] -= s;
    }
    let v_root = Complex64::new(r.grid.u[topo.root][k].max(0.0).sqrt(), 0.0);
    let mut v = vec![v_root; n];
    for _ in 0..200 {
        let inj: Vec<Complex64> = (0..n).map(|b| if b == topo.root { Complex64::new(0.0, 0.0) } else { (load[b] / v[b]).conj() }).collect();
        let mut current = vec![Complex64::new(0.0, 0.0); net.lines.len()];
        for &b in topo.order.iter().rev() {
            if let Some(l) = topo.parent_line[b] {
                current[l] = inj[b] + topo.child_lines[b].iter().map(|&c| current[c]).sum::<Complex64>();
            }
        }
        let mut delta: f64 = 0.0;
        for &b in &topo.order {
            if let Some(l) = topo.parent_line[b] {
                let nv = v[topo.line_from[l]] - z[l] * current[l];
                delta = delta.max((nv - v[b]).norm());
                v[b] = nv;
            }
        }
        if delta < 1e-12 {
            break;
        }
    }
    v.iter().map(|x| x.norm()).collect()
}

fn c7_ac_check(inst: &Instance, results: &[&PlanResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    for r in results {
        let k = worst_step(inst, r);
        let ac = ac_sweep(inst, r, k);
        for (b, vac) in ac.iter().enumerate() {
            let lin = r.grid.u[b][k].max(0.0).sqrt();
            worst = worst.max((vac - lin).abs() / lin);
        }
    }
    check(worst <= 0.02, format!("{} plans at their worst-loaded hour, max |V| deviation {:.4} %", results.len(), 100.0 * worst))
}

fn c8_aggregation() -> Outcome {
    let inst = generate_fixture(&FixtureOptions {
        days: 365,
        ..FixtureOptions::default()
    })
    .map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let bundle = aggregation_bundle(&inst);
    let red = aggregate(&bundle, &[0, 1], 4, 168, inst.represented_hours).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let names = ["elec", "space heat", "hot water", "pv", "cop"];
    let reports: Vec<_> = bundle.iter().map(|s| fidelity_report(s, &red)).collect();
    let peaks_ok = reports[0].peak_error <= 1e-12 && reports[1].peak_error <= 1e-12;
    let means_ok = reports[..2].iter().all(|r| r.mean_error <= 0.05);
    let text: Vec<String> = names
        .iter()
        .zip(&reports)
        .map(|(n, r)| format!("{n} peak {:.2} % mean {:.2} %", 100.0 * r.peak_error, 100.0 * r.mean_error))
        .collect();
    check(peaks_ok && means_ok && secs < 30.0, format!("{}; {secs:.2} s", text.join(", ")))
}

fn c9_costs(results: &[&PlanResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    for r in results {
        let t = r.costs.total();
        worst = worst.max((t - r.objective).abs() / r.objective.abs().max(1.0));
    }
    check(worst <= 1e-6, format!("{} plans, worst relative mismatch {worst:.2e}", results.len()))
}

fn c10_curtailment(plus: &PlanResult, plusplus: &PlanResult, gap: f64) -> Outcome {
    let a = plus.grid_objective.ok_or("Flex+ plan has no grid objective")?;
    let b = plusplus.grid_objective.ok_or("Flex++ plan has no grid objective")?;
    check(
        b <= a + gap * a.abs().max(b.abs()) + 1e-6,
        format!(
            "grid objective {b:.2} with curtailment vs {a:.2} without; {:.3} % of PV curtailed",
            100.0 * plusplus.curtailment_share()
        ),
    )
}

fn main() -> ExitCode {
    let params = SolveParams::default();
    let gap = params.mip_gap;
    let mut lines: Vec<(u32, &str, Outcome)> = Vec::new();

    let micro = micro_instance();
    lines.push((1, "octagon", c1_octagon(&micro)));
    lines.push((2, "annuity factor", c2_annuity()));

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/six_bus");
    let six = load_scenario(&dir).map(|s| s.instance).map_err(|e| e.to_string());
    let all = six.as_ref().map_err(Clone::clone).and_then(|inst| {
        run_all(inst, &AggregationConfig::disabled(), &HighsSolver, &params).map_err(|e| e.to_string())
    });
    let surplus = generate_fixture(&FixtureOptions {
        pv_surplus: true,
        ..FixtureOptions::default()
    })
    .map_err(|e| e.to_string());
    let curtailed = surplus.as_ref().map_err(Clone::clone).and_then(|inst| {
        let stages = building_stages(inst, true, &AggregationConfig::disabled(), &HighsSolver, &params).map_err(|e| e.to_string())?;
        let plus = grid_stage(inst, &stages, true, false, &HighsSolver, &params).map_err(|e| e.to_string())?;
        let plusplus = grid_stage(inst, &stages, true, true, &HighsSolver, &params).map_err(|e| e.to_string())?;
        Ok((plus, plusplus))
    });

    let per_instance = |f: &dyn Fn(&Instance, &[&PlanResult]) -> Outcome| -> Outcome {
        let (inst, all) = (six.as_ref().map_err(Clone::clone)?, all.as_ref().map_err(Clone::clone)?);
        let (sinst, (p, pp)) = (surplus.as_ref().map_err(Clone::clone)?, curtailed.as_ref().map_err(Clone::clone)?);
        let a = f(inst, &all.iter().collect::<Vec<_>>());
        let b = f(sinst, &[p, pp]);
        match (a, b) {
            (Ok(a), Ok(b)) => Ok(format!("six-bus: {a}; pv-surplus: {b}")),
            (a, b) => Err(format!("six-bus: {}; pv-surplus: {}", a.unwrap_or_else(|e| e), b.unwrap_or_else(|e| e))),
        }
    };

    lines.push((3, "paradigm ordering", all.as_ref().map_err(Clone::clone).and_then(|r| c3_ordering(r, gap))));
    lines.push((4, "MILP matches enumeration", c4_brute_force(&micro)));
    lines.push((5, "storage and mobility recursion", per_instance(&c5_storage)));
    lines.push((6, "voltage bands", per_instance(&c6_voltage)));
    lines.push((7, "linearised voltage vs AC", per_instance(&c7_ac_check)));
    lines.push((8, "typical periods", c8_aggregation()));
    lines.push((9, "cost breakdown sums to objective", per_instance(&|_, r| c9_costs(r))));
    lines.push((10, "curtailment lowers grid cost", curtailed.as_ref().map_err(Clone::clone).and_then(|(p, pp)| c10_curtailment(p, pp, gap))));

    let mut failed = 0;
    for (n, name, outcome) in &lines {
        match outcome {
            Ok(d) => println!("[PASS] C{n} {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] C{n} {name}: {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
