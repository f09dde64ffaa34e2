//! Plot-ready result files.

use std::fs;
use std::path::Path;

use anyhow::Context;

use hoods_core::assembly::Instance;
use hoods_core::cost::CostBreakdown;
use hoods_core::paradigms::{ComparisonReport, PlanResult};

/// Cost table rows as `(label, value)`.
pub fn cost_rows(c: &CostBreakdown) -> Vec<(&'static str, f64)> {
    vec![
        ("PV", c.pv()),
        ("Heat pump", c.heat_pump()),
        ("Battery", c.battery()),
        ("Thermal storage", c.thermal_storage()),
        ("Import", c.import()),
        ("Feed-in", c.feed_in()),
        ("Sum buildings", c.building_total()),
        ("Cable", c.grid.cable),
        ("OLTC", c.grid.oltc),
        ("Q compensation", c.grid.q_comp),
        ("Curtailment", c.grid.curtailment),
        ("Sum grid", c.grid_total()),
        ("Total", c.total()),
    ]
}

/// Linear-interpolated quantiles of `values` at 0, 10, ..., 100 %.
pub fn deciles(values: &[f64]) -> [f64; 11] {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = [0.0; 11];
    if v.is_empty() {
        return out;
    }
    for (i, q) in out.iter_mut().enumerate() {
        let pos = i as f64 / 10.0 * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let f = pos - lo as f64;
        *q = v[lo] + f * (v[hi] - v[lo]);
    }
    // Guard against rounding in the interpolation.
    for i in 1..out.len() {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    out
}

/// Branch of every bus: the first bus below the main busbar on its path,
/// `None` for the busbar itself.
pub fn branches(inst: &Instance) -> anyhow::Result<Vec<Option<usize>>> {
    let topo = inst.network.topology()?;
    Ok((0..inst.network.buses.len())
        .map(|b| topo.path_to(b).get(1).copied())
        .collect())
}

fn write_cost_breakdown(path: &Path, r: &PlanResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["component", "annual_cost"])?;
    for (label, v) in cost_rows(&r.costs) {
        w.write_record([label.to_string(), format!("{v:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

fn write_dispatch(path: &Path, inst: &Instance, r: &PlanResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "step",
        "hour",
        "weight",
        "elec_demand",
        "heat_demand",
        "pv",
        "heat_pump",
        "battery_charge",
        "battery_discharge",
        "thermal_charge",
        "thermal_discharge",
        "bev_charge",
        "import",
        "feed_in",
        "curtailment",
    ])?;
    let sum = |f: &dyn Fn(&hoods_core::paradigms::BuildingDispatch) -> &Vec<f64>, k: usize| -> f64 {
        r.dispatch.iter().map(|d| f(d).get(k).copied().unwrap_or(0.0)).sum()
    };
    for (k, step) in r.time.steps().iter().enumerate() {
        let elec: f64 = inst.buildings.iter().map(|b| b.profiles.elec[step.hour]).sum();
        let heat: f64 = inst.buildings.iter().map(|b| b.heat_demand(step.hour)).sum();
        let curt: f64 = r.grid.curtailment.iter().map(|c| c[k]).sum();
        let row = [
            elec,
            heat,
            sum(&|d| &d.pv_p, k),
            sum(&|d| &d.hp_p, k),
            sum(&|d| &d.bat_ch, k),
            sum(&|d| &d.bat_dch, k),
            sum(&|d| &d.ts_ch, k),
            sum(&|d| &d.ts_dch, k),
            sum(&|d| &d.bev_p, k),
            sum(&|d| &d.p_import, k),
            sum(&|d| &d.p_feed_in, k),
            curt,
        ];
        let mut rec = vec![k.to_string(), step.hour.to_string(), format!("{}", step.weight)];
        rec.extend(row.iter().map(|v| format!("{:.6}", clean(*v))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Maps solver noise and negative zero to plain zero.
fn clean(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        0.0
    } else {
        v
    }
}

fn write_voltages(path: &Path, inst: &Instance, r: &PlanResult) -> anyhow::Result<()> {
    let br = branches(inst)?;
    let mut roots: Vec<usize> = br.iter().flatten().copied().collect();
    roots.sort_unstable();
    roots.dedup();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["branch".to_string()];
    header.extend((0..=10).map(|i| format!("p{}", i * 10)));
    w.write_record(&header)?;
    for root in roots {
        let mags: Vec<f64> = br
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == Some(root))
            .flat_map(|(bus, _)| r.grid.u[bus].iter().map(|u| u.max(0.0).sqrt()))
            .collect();
        let mut rec = vec![inst.network.buses[root].id.clone()];
        rec.extend(deciles(&mags).iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_transformer_peaks(path: &Path, r: &PlanResult) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["day", "peak_import_kw", "peak_feed_in_kw"])?;
    let steps = r.time.steps();
    let mut k = 0;
    while k < steps.len() {
        let day = steps[k].hour / 24;
        let (mut imp, mut fi) = (0.0_f64, 0.0_f64);
        while k < steps.len() && steps[k].hour / 24 == day {
            imp = imp.max(r.grid.root_import[k]);
            fi = fi.max(r.grid.root_feed_in[k]);
            k += 1;
        }
        w.write_record([day.to_string(), format!("{:.6}", clean(imp)), format!("{:.6}", clean(fi))])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `cost_breakdown.csv`, `reinforcement.json`, `dispatch.csv`,
/// `voltages.csv` and `transformer_peaks.csv` into `dir`.
pub fn export_results(inst: &Instance, r: &PlanResult, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_cost_breakdown(&dir.join("cost_breakdown.csv"), r)?;
    fs::write(dir.join("reinforcement.json"), serde_json::to_string_pretty(&r.reinforcement)? + "\n")?;
    write_dispatch(&dir.join("dispatch.csv"), inst, r)?;
    write_voltages(&dir.join("voltages.csv"), inst, r)?;
    write_transformer_peaks(&dir.join("transformer_peaks.csv"), r)?;
    Ok(())
}

/// Writes the side-by-side cost table of a comparison.
pub fn export_comparison(report: &ComparisonReport, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("comparison.csv"))?;
    let mut header = vec!["component".to_string()];
    header.extend(report.paradigms.iter().map(|p| p.to_string()));
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.label.clone()];
        rec.extend(row.values.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    let mut pct = vec![format!("Percent of {}", report.baseline)];
    pct.extend(report.percentage.iter().map(|v| format!("{v:.3}")));
    w.write_record(&pct)?;
    let mut share = vec!["Grid share (%)".to_string()];
    share.extend(report.grid_share.iter().map(|v| format!("{v:.3}")));
    w.write_record(&share)?;
    w.flush()?;
    fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}
