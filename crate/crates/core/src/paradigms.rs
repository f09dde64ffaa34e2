//! The four planning pipelines: coordinated planning over grid and buildings,
//! and three sequential variants where buildings plan alone and the grid
//! operator reinforces for the resulting profiles.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::{build_hoods, build_hoods_bui, build_hoods_grid, Instance};
use crate::building::BuildingVars;
use crate::cost::{annuity_factor, building_component_costs, line_capex, BuildingCosts, CostBreakdown, GridCosts};
use crate::domain::{CableSetting, TimeGrid};
use crate::error::{Error, Result};
use crate::grid::{GridVars, InjectionProfile};
use crate::model::{diagnose_infeasibility, solve, Constraint, ModelSpec, SolveParams, SolveStatus, Solver, SolverResult, VarId, VarKind};
use crate::timeseries::aggregate;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ParadigmId {
    CoorPlusFlexPlus,
    CoorMinusFlexMinus,
    CoorMinusFlexPlus,
    CoorMinusFlexPlusPlus,
}

impl ParadigmId {
    pub const ALL: [ParadigmId; 4] = [
        ParadigmId::CoorPlusFlexPlus,
        ParadigmId::CoorMinusFlexMinus,
        ParadigmId::CoorMinusFlexPlus,
        ParadigmId::CoorMinusFlexPlusPlus,
    ];

    /// Short identifier used on the command line and in file names.
    pub fn key(self) -> &'static str {
        match self {
            ParadigmId::CoorPlusFlexPlus => "coor+flex+",
            ParadigmId::CoorMinusFlexMinus => "coor-flex-",
            ParadigmId::CoorMinusFlexPlus => "coor-flex+",
            ParadigmId::CoorMinusFlexPlusPlus => "coor-flex++",
        }
    }

    /// `(coordinated, flexible, curtailment)`.
    pub fn flags(self) -> (bool, bool, bool) {
        match self {
            ParadigmId::CoorPlusFlexPlus => (true, true, false),
            ParadigmId::CoorMinusFlexMinus => (false, false, false),
            ParadigmId::CoorMinusFlexPlus => (false, true, false),
            ParadigmId::CoorMinusFlexPlusPlus => (false, true, true),
        }
    }

    fn from_flags(flexible: bool, curtail: bool) -> Result<Self> {
        match (flexible, curtail) {
            (false, false) => Ok(ParadigmId::CoorMinusFlexMinus),
            (true, false) => Ok(ParadigmId::CoorMinusFlexPlus),
            (true, true) => Ok(ParadigmId::CoorMinusFlexPlusPlus),
            (false, true) => Err(Error::invalid("curtailment requires flexible buildings")),
        }
    }
}

impl fmt::Display for ParadigmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ParadigmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.trim().to_ascii_lowercase().chars().filter(|c| !matches!(c, '_' | ' ')).collect();
        ParadigmId::ALL
            .into_iter()
            .find(|p| p.key() == norm)
            .or(match norm.as_str() {
                "1" | "coordinated" => Some(ParadigmId::CoorPlusFlexPlus),
                "2" => Some(ParadigmId::CoorMinusFlexMinus),
                "3" => Some(ParadigmId::CoorMinusFlexPlus),
                "4" => Some(ParadigmId::CoorMinusFlexPlusPlus),
                _ => None,
            })
            .ok_or_else(|| Error::invalid(format!("unknown paradigm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub enabled: bool,
    pub n_periods: usize,
    /// Period length in hours.
    pub period_len: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n_periods: 4,
            period_len: 168,
        }
    }
}

impl AggregationConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Series used to pick typical periods: total appliance load, total space
/// heat, total hot water, PV availability and COP. Peaks of the first two
/// are preserved.
pub fn aggregation_bundle(inst: &Instance) -> Vec<Vec<f64>> {
    let h = inst.horizon();
    let total = |f: &dyn Fn(&crate::domain::Building) -> &Vec<f64>| -> Vec<f64> {
        (0..h).map(|t| inst.buildings.iter().map(|b| f(b)[t]).sum()).collect()
    };
    vec![
        total(&|b| &b.profiles.elec),
        total(&|b| &b.profiles.space_heat),
        total(&|b| &b.profiles.hot_water),
        inst.catalog.series.cf_pv.clone(),
        inst.catalog.series.cop.clone(),
    ]
}

/// Time grid for sizing stages: typical periods, or the full horizon.
pub fn sizing_grid(inst: &Instance, agg: &AggregationConfig) -> Result<TimeGrid> {
    if !agg.enabled {
        return inst.full_grid();
    }
    let reduced = aggregate(&aggregation_bundle(inst), &[0, 1], agg.n_periods, agg.period_len, inst.represented_hours)?;
    Ok(reduced.grid)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Capacities {
    pub building: String,
    pub pv_kw: f64,
    /// 1 when PV is installed.
    pub pv_installed: f64,
    pub hp_kw: f64,
    pub hp_installed: f64,
    pub battery_kw: f64,
    pub battery_kwh: f64,
    pub ts_kw: f64,
    pub ts_kwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineDecision {
    pub from: String,
    pub to: String,
    pub existing: CableSetting,
    pub setting: CableSetting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reinforcement {
    pub transformer: String,
    pub transformer_kva: f64,
    pub is_oltc: bool,
    pub lines: Vec<LineDecision>,
}

/// Hourly operation of one building on the full horizon.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildingDispatch {
    pub building: String,
    pub pv_p: Vec<f64>,
    pub pv_q: Vec<f64>,
    pub bat_ch: Vec<f64>,
    pub bat_dch: Vec<f64>,
    pub bat_e: Vec<f64>,
    pub hp_p: Vec<f64>,
    pub hp_heat: Vec<f64>,
    pub ts_ch: Vec<f64>,
    pub ts_dch: Vec<f64>,
    pub ts_e: Vec<f64>,
    pub bev_p: Vec<f64>,
    pub bev_mu: Vec<f64>,
    pub vms_ch: Vec<f64>,
    pub vms_dch: Vec<f64>,
    pub vms_e: Vec<f64>,
    pub mobility_demand: Vec<f64>,
    /// Import from and feed-in to the grid at the building's connection.
    pub p_import: Vec<f64>,
    pub p_feed_in: Vec<f64>,
    pub q_import: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridDispatch {
    /// Squared voltage per unit, `[bus][step]`.
    pub u: Vec<Vec<f64>>,
    /// Aggregate line flows, `[line][step]`.
    pub p_line: Vec<Vec<f64>>,
    pub q_line: Vec<Vec<f64>>,
    pub root_import: Vec<f64>,
    pub root_feed_in: Vec<f64>,
    pub q_comp_pos: Vec<f64>,
    pub q_comp_neg: Vec<f64>,
    /// Curtailed feed-in, `[bus][step]`.
    pub curtailment: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub status: SolveStatus,
    pub objective: f64,
    pub mip_gap: Option<f64>,
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub paradigm: ParadigmId,
    pub capacities: Vec<Capacities>,
    pub reinforcement: Reinforcement,
    pub dispatch: Vec<BuildingDispatch>,
    pub grid: GridDispatch,
    /// The full horizon the dispatch lives on.
    pub time: TimeGrid,
    pub costs: CostBreakdown,
    pub stages: Vec<StageReport>,
    /// Total cost composed from stage objectives: the dispatch objective for
    /// coordinated planning, building dispatch objectives plus the grid
    /// objective otherwise.
    pub objective: f64,
    pub building_objectives: Vec<f64>,
    pub grid_objective: Option<f64>,
    /// Weighted curtailed energy in kWh/a.
    pub curtailed_energy: f64,
    /// Weighted PV generation in kWh/a.
    pub pv_energy: f64,
}

impl PlanResult {
    pub fn curtailment_share(&self) -> f64 {
        if self.pv_energy > 0.0 {
            self.curtailed_energy / self.pv_energy
        } else {
            0.0
        }
    }
}

fn report(stage: &str, spec: &ModelSpec, res: &SolverResult) -> StageReport {
    StageReport {
        stage: stage.to_string(),
        status: res.status,
        objective: res.objective.unwrap_or(f64::NAN),
        mip_gap: res.mip_gap,
        variables: spec.num_vars(),
        constraints: spec.num_constraints(),
        binaries: spec.num_binaries(),
    }
}

fn demand_rows(c: &Constraint) -> bool {
    ["bal_p_", "bal_q_", "heat_bal_", "mob_bal_", "node_p_", "node_q_", "root_", "inj_"]
        .iter()
        .any(|p| c.label.starts_with(p))
}

fn solve_stage(stage: &str, spec: &ModelSpec, solver: &dyn Solver, params: &SolveParams) -> Result<SolverResult> {
    let res = solve(spec, params, solver)?;
    if !res.status.has_solution() {
        return Err(Error::Solve {
            stage: stage.to_string(),
            status: res.status,
        });
    }
    Ok(res)
}

/// Values to pin design variables to, cleaned of solver noise.
fn design_assignment(spec: &ModelSpec, vars: &[VarId], res: &SolverResult) -> Vec<(VarId, f64)> {
    vars.iter()
        .map(|&v| {
            let var = spec.variable(v);
            let x = res.value(v);
            let x = match var.kind {
                VarKind::Binary => libm::round(x),
                VarKind::Continuous if libm::fabs(x) < 1e-9 => 0.0,
                VarKind::Continuous => x,
            };
            (v, x.clamp(var.lower, var.upper))
        })
        .collect()
}

fn values(res: &SolverResult, vars: &[VarId]) -> Vec<f64> {
    vars.iter().map(|&v| res.value(v)).collect()
}

fn capacities(id: &str, v: &BuildingVars, res: &SolverResult) -> Capacities {
    Capacities {
        building: id.to_string(),
        pv_kw: res.value(v.pv.kappa),
        pv_installed: libm::round(res.value(v.pv.beta)),
        hp_kw: res.value(v.heat_pump.kappa),
        hp_installed: libm::round(res.value(v.heat_pump.beta)),
        battery_kw: res.value(v.battery.kappa_p),
        battery_kwh: res.value(v.battery.kappa_e),
        ts_kw: res.value(v.thermal.kappa_p),
        ts_kwh: res.value(v.thermal.kappa_e),
    }
}

fn dispatch(id: &str, v: &BuildingVars, res: &SolverResult, exchange: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>) -> BuildingDispatch {
    let (p_import, p_feed_in, q_import) = match (exchange, &v.exchange) {
        (Some(e), _) => e,
        (None, Some(ex)) => (values(res, &ex.p_import), values(res, &ex.p_feed_in), values(res, &ex.q_import)),
        (None, None) => (Vec::new(), Vec::new(), Vec::new()),
    };
    BuildingDispatch {
        building: id.to_string(),
        pv_p: values(res, &v.pv.p),
        pv_q: values(res, &v.pv.q),
        bat_ch: values(res, &v.battery.charge),
        bat_dch: values(res, &v.battery.discharge),
        bat_e: values(res, &v.battery.energy),
        hp_p: values(res, &v.heat_pump.p),
        hp_heat: values(res, &v.heat_pump.heat),
        ts_ch: values(res, &v.thermal.charge),
        ts_dch: values(res, &v.thermal.discharge),
        ts_e: values(res, &v.thermal.energy),
        bev_p: values(res, &v.mobility.p_bev),
        bev_mu: values(res, &v.mobility.mu_bev),
        vms_ch: values(res, &v.mobility.vms_charge),
        vms_dch: values(res, &v.mobility.vms_discharge),
        vms_e: values(res, &v.mobility.vms_energy),
        mobility_demand: v.mobility.demand.clone(),
        p_import,
        p_feed_in,
        q_import,
    }
}

fn grid_dispatch(gv: &GridVars, res: &SolverResult) -> GridDispatch {
    let steps = gv.p_import.len();
    GridDispatch {
        u: gv.u.iter().map(|u| values(res, u)).collect(),
        p_line: gv.lines.iter().map(|l| values(res, &l.p_grid)).collect(),
        q_line: gv.lines.iter().map(|l| values(res, &l.q_grid)).collect(),
        root_import: values(res, &gv.p_import),
        root_feed_in: values(res, &gv.p_feed_in),
        q_comp_pos: values(res, &gv.q_comp_pos),
        q_comp_neg: values(res, &gv.q_comp_neg),
        curtailment: gv
            .curtailment
            .iter()
            .map(|c| c.as_ref().map_or_else(|| vec![0.0; steps], |c| values(res, c)))
            .collect(),
    }
}

fn reinforcement(inst: &Instance, gv: &GridVars, res: &SolverResult) -> Reinforcement {
    let chosen = gv
        .transformer
        .alpha
        .iter()
        .position(|&a| res.value(a) > 0.5)
        .unwrap_or(gv.transformer.incumbent);
    let t = &inst.network.transformers[chosen];
    let lines = inst
        .network
        .lines
        .iter()
        .zip(&gv.lines)
        .map(|(line, lv)| {
            let m = lv.alpha.iter().position(|&a| res.value(a) > 0.5).unwrap_or(0);
            LineDecision {
                from: line.from.clone(),
                to: line.to.clone(),
                existing: line.existing,
                setting: CableSetting::ALL[m],
            }
        })
        .collect();
    Reinforcement {
        transformer: t.name.clone(),
        transformer_kva: t.capacity,
        is_oltc: t.is_oltc,
        lines,
    }
}

fn weighted(time: &TimeGrid, series: &[f64], price: &[f64]) -> f64 {
    time.steps().iter().zip(series).map(|(s, x)| s.weight * price[s.hour] * x).sum()
}

/// Grid-side costs recomputed from decisions and dispatch.
fn grid_costs(inst: &Instance, time: &TimeGrid, rf: &Reinforcement, gd: &GridDispatch, root_energy: bool) -> Result<GridCosts> {
    let s = &inst.catalog.series;
    let af = annuity_factor(inst.catalog.grid.cable_wacc, inst.catalog.grid.cable_lifetime)?;
    let mut cable = 0.0;
    for (l, d) in rf.lines.iter().enumerate() {
        cable += af * line_capex(&inst.network, l, d.setting)?;
    }
    let oltc = inst
        .network
        .transformers
        .iter()
        .find(|t| t.name == rf.transformer)
        .map_or(0.0, |t| t.annualized_cost);
    let q_abs: Vec<f64> = gd.q_comp_pos.iter().zip(&gd.q_comp_neg).map(|(a, b)| a + b).collect();
    let curt: Vec<f64> = (0..time.len()).map(|k| gd.curtailment.iter().map(|c| c[k]).sum()).collect();
    let mut g = GridCosts {
        cable,
        oltc,
        q_comp: weighted(time, &q_abs, &s.price_qcomp),
        curtailment: weighted(time, &curt, &s.price_feed_in),
        ..Default::default()
    };
    if root_energy {
        g.import = weighted(time, &gd.root_import, &s.price_import);
        g.feed_in = -weighted(time, &gd.root_feed_in, &s.price_feed_in);
    }
    Ok(g)
}

fn pv_energy(time: &TimeGrid, dispatch: &[BuildingDispatch]) -> f64 {
    dispatch
        .iter()
        .map(|d| time.steps().iter().zip(&d.pv_p).map(|(s, p)| s.weight * p).sum::<f64>())
        .sum()
}

/// Coordinated planning: size everything on the sizing grid, then dispatch
/// the full horizon with capacities and reinforcement fixed.
pub fn run_coordinated(inst: &Instance, agg: &AggregationConfig, solver: &dyn Solver, params: &SolveParams) -> Result<PlanResult> {
    inst.validate()?;
    let sizing = sizing_grid(inst, agg)?;
    let full = inst.full_grid()?;

    let m1 = build_hoods(inst, &sizing)?;
    let r1 = solve_stage("coordinated sizing", &m1.spec, solver, params)?;
    let mut design: Vec<VarId> = m1.buildings.iter().flat_map(|b| b.design_vars()).collect();
    design.extend(m1.grid.design_vars());
    let fixed = design_assignment(&m1.spec, &design, &r1);

    // Variables are created in the same order on any grid, so design
    // variables carry over by name.
    let m2 = build_hoods(inst, &full)?;
    let fixed2: Vec<(VarId, f64)> = fixed
        .iter()
        .map(|&(v, x)| {
            let name = &m1.spec.variable(v).name;
            m2.spec
                .var_by_name(name)
                .map(|v2| (v2, x))
                .ok_or_else(|| Error::invalid(format!("design variable `{name}` missing in dispatch model")))
        })
        .collect::<Result<_>>()?;
    let spec2 = m2.spec.fix_variables(&fixed2)?;
    let r2 = solve(&spec2, params, solver)?;
    if r2.status == SolveStatus::Infeasible {
        let violations = diagnose_infeasibility(&spec2, params, solver, &demand_rows)?;
        return Err(Error::StageInfeasible {
            stage: "coordinated dispatch".to_string(),
            violations,
        });
    }
    if !r2.status.has_solution() {
        return Err(Error::Solve {
            stage: "coordinated dispatch".to_string(),
            status: r2.status,
        });
    }

    let grid = grid_dispatch(&m2.grid, &r2);
    let mut caps = Vec::new();
    let mut disp = Vec::new();
    let mut bcosts = Vec::new();
    for (i, (b, v)) in inst.buildings.iter().zip(&m2.buildings).enumerate() {
        let bus = inst.building_bus(i)?;
        let c = capacities(&b.id, v, &r2);
        bcosts.push(building_component_costs(&inst.catalog, &c)?);
        caps.push(c);
        // Net exchange with the grid at the building's bus.
        let net: Vec<f64> = (0..full.len())
            .map(|k| m2.grid.net_inflow_p(bus, k).iter().map(|&(v, c)| c * r2.value(v)).sum())
            .collect();
        let qnet: Vec<f64> = (0..full.len())
            .map(|k| m2.grid.net_inflow_q(bus, k).iter().map(|&(v, c)| c * r2.value(v)).sum())
            .collect();
        let imp = net.iter().map(|x| x.max(0.0)).collect();
        let fi = net.iter().map(|x| (-x).max(0.0)).collect();
        disp.push(dispatch(&b.id, v, &r2, Some((imp, fi, qnet))));
    }
    let rf = reinforcement(inst, &m2.grid, &r2);
    let costs = CostBreakdown {
        buildings: bcosts,
        grid: grid_costs(inst, &full, &rf, &grid, true)?,
    };
    let objective = r2.objective.unwrap_or(f64::NAN);
    Ok(PlanResult {
        paradigm: ParadigmId::CoorPlusFlexPlus,
        capacities: caps,
        reinforcement: rf,
        pv_energy: pv_energy(&full, &disp),
        dispatch: disp,
        grid,
        time: full,
        costs,
        stages: vec![report("coordinated sizing", &m1.spec, &r1), report("coordinated dispatch", &spec2, &r2)],
        objective,
        building_objectives: Vec::new(),
        grid_objective: None,
        curtailed_energy: 0.0,
    })
}

/// Outcome of the building sizing and dispatch stages of one building.
#[derive(Clone, Debug)]
pub struct BuildingStage {
    pub capacities: Capacities,
    pub dispatch: BuildingDispatch,
    pub profile: InjectionProfile,
    pub objective: f64,
    pub reports: Vec<StageReport>,
}

/// Sizes building `i` on `sizing`, then dispatches it on `full` with its
/// capacities fixed.
pub fn building_stage(
    inst: &Instance,
    i: usize,
    flexible: bool,
    sizing: &TimeGrid,
    full: &TimeGrid,
    solver: &dyn Solver,
    params: &SolveParams,
) -> Result<BuildingStage> {
    let id = &inst.buildings[i].id;
    let s1 = format!("building {id} sizing");
    let s2 = format!("building {id} dispatch");
    let m1 = build_hoods_bui(inst, i, sizing, flexible)?;
    let r1 = solve_stage(&s1, &m1.spec, solver, params)?;
    let fixed = design_assignment(&m1.spec, &m1.vars.design_vars(), &r1);
    let m2 = build_hoods_bui(inst, i, full, flexible)?;
    let fixed2: Vec<(VarId, f64)> = m2.vars.design_vars().into_iter().zip(fixed.iter().map(|f| f.1)).collect();
    let spec2 = m2.spec.fix_variables(&fixed2)?;
    let r2 = solve(&spec2, params, solver)?;
    if r2.status == SolveStatus::Infeasible {
        let violations = diagnose_infeasibility(&spec2, params, solver, &demand_rows)?;
        return Err(Error::StageInfeasible { stage: s2, violations });
    }
    if !r2.status.has_solution() {
        return Err(Error::Solve { stage: s2, status: r2.status });
    }
    let d = dispatch(id, &m2.vars, &r2, None);
    let profile = InjectionProfile {
        p_import: d.p_import.clone(),
        p_feed_in: d.p_feed_in.clone(),
        q_import: d.q_import.clone(),
    };
    Ok(BuildingStage {
        capacities: capacities(id, &m2.vars, &r2),
        dispatch: d,
        profile,
        objective: r2.objective.unwrap_or(f64::NAN),
        reports: vec![report(&s1, &m1.spec, &r1), report(&s2, &spec2, &r2)],
    })
}

/// Runs every building stage in building order.
pub fn building_stages(
    inst: &Instance,
    flexible: bool,
    agg: &AggregationConfig,
    solver: &dyn Solver,
    params: &SolveParams,
) -> Result<Vec<BuildingStage>> {
    inst.validate()?;
    let sizing = sizing_grid(inst, agg)?;
    let full = inst.full_grid()?;
    (0..inst.buildings.len())
        .map(|i| building_stage(inst, i, flexible, &sizing, &full, solver, params))
        .collect()
}

/// Grid stage over collected building profiles, producing the plan.
pub fn grid_stage(
    inst: &Instance,
    stages: &[BuildingStage],
    flexible: bool,
    curtail: bool,
    solver: &dyn Solver,
    params: &SolveParams,
) -> Result<PlanResult> {
    let paradigm = ParadigmId::from_flags(flexible, curtail)?;
    let full = inst.full_grid()?;
    let profiles: Vec<InjectionProfile> = stages.iter().map(|s| s.profile.clone()).collect();
    let gm = build_hoods_grid(inst, &full, &profiles, curtail)?;
    let res = solve(&gm.spec, params, solver)?;
    if res.status == SolveStatus::Infeasible {
        let violations = diagnose_infeasibility(&gm.spec, params, solver, &|c: &Constraint| c.label.starts_with("inj_"))?;
        let mut per_step: Vec<(usize, f64)> = Vec::new();
        for v in violations {
            let k = v
                .label
                .rsplit_once("_t")
                .and_then(|(_, k)| k.parse::<usize>().ok())
                .unwrap_or(usize::MAX);
            match per_step.iter_mut().find(|(s, _)| *s == k) {
                Some(e) => e.1 += v.amount,
                None => per_step.push((k, v.amount)),
            }
        }
        per_step.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        return Err(Error::GridInfeasible { worst_steps: per_step });
    }
    if !res.status.has_solution() {
        return Err(Error::Solve {
            stage: "grid".to_string(),
            status: res.status,
        });
    }

    let grid = grid_dispatch(&gm.grid, &res);
    let rf = reinforcement(inst, &gm.grid, &res);
    let mut bcosts: Vec<BuildingCosts> = Vec::with_capacity(stages.len());
    let s = &inst.catalog.series;
    for (i, st) in stages.iter().enumerate() {
        let bus = inst.building_bus(i)?;
        let mut c = building_component_costs(&inst.catalog, &st.capacities)?;
        let curt = &grid.curtailment[bus];
        let delivered: Vec<f64> = st.dispatch.p_feed_in.iter().zip(curt).map(|(f, c)| f - c).collect();
        c.import = weighted(&full, &st.dispatch.p_import, &s.price_import);
        c.feed_in = -weighted(&full, &delivered, &s.price_feed_in);
        c.curtailment_received = -weighted(&full, curt, &s.price_feed_in);
        bcosts.push(c);
    }
    let costs = CostBreakdown {
        buildings: bcosts,
        grid: grid_costs(inst, &full, &rf, &grid, false)?,
    };
    let curtailed_energy = grid
        .curtailment
        .iter()
        .map(|c| full.steps().iter().zip(c).map(|(s, x)| s.weight * x).sum::<f64>())
        .sum();
    let dispatch: Vec<BuildingDispatch> = stages.iter().map(|s| s.dispatch.clone()).collect();
    let building_objectives: Vec<f64> = stages.iter().map(|s| s.objective).collect();
    let grid_objective = res.objective.unwrap_or(f64::NAN);
    let mut reports: Vec<StageReport> = stages.iter().flat_map(|s| s.reports.iter().cloned()).collect();
    reports.push(report("grid", &gm.spec, &res));
    Ok(PlanResult {
        paradigm,
        capacities: stages.iter().map(|s| s.capacities.clone()).collect(),
        reinforcement: rf,
        pv_energy: pv_energy(&full, &dispatch),
        dispatch,
        grid,
        time: full,
        costs,
        stages: reports,
        objective: building_objectives.iter().sum::<f64>() + grid_objective,
        building_objectives,
        grid_objective: Some(grid_objective),
        curtailed_energy,
    })
}

/// Sequential planning: buildings size and dispatch themselves, then the
/// grid operator reinforces for the resulting profiles.
pub fn run_uncoordinated(
    inst: &Instance,
    flexible: bool,
    curtail: bool,
    agg: &AggregationConfig,
    solver: &dyn Solver,
    params: &SolveParams,
) -> Result<PlanResult> {
    ParadigmId::from_flags(flexible, curtail)?;
    let stages = building_stages(inst, flexible, agg, solver, params)?;
    grid_stage(inst, &stages, flexible, curtail, solver, params)
}

pub fn run_paradigm(
    inst: &Instance,
    paradigm: ParadigmId,
    agg: &AggregationConfig,
    solver: &dyn Solver,
    params: &SolveParams,
) -> Result<PlanResult> {
    match paradigm.flags() {
        (true, _, _) => run_coordinated(inst, agg, solver, params),
        (false, flexible, curtail) => run_uncoordinated(inst, flexible, curtail, agg, solver, params),
    }
}

/// Runs all four paradigms, sharing the flexible building stages between
/// the two paradigms that differ only in grid-side curtailment.
pub fn run_all(inst: &Instance, agg: &AggregationConfig, solver: &dyn Solver, params: &SolveParams) -> Result<Vec<PlanResult>> {
    let coordinated = run_coordinated(inst, agg, solver, params)?;
    let rigid = building_stages(inst, false, agg, solver, params)?;
    let flex_minus = grid_stage(inst, &rigid, false, false, solver, params)?;
    let flexible = building_stages(inst, true, agg, solver, params)?;
    let flex_plus = grid_stage(inst, &flexible, true, false, solver, params)?;
    let flex_pp = grid_stage(inst, &flexible, true, true, solver, params)?;
    Ok(vec![coordinated, flex_minus, flex_plus, flex_pp])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub paradigms: Vec<ParadigmId>,
    /// Annual cost rows, one value per paradigm.
    pub rows: Vec<ComparisonRow>,
    /// Total cost relative to the baseline, in percent.
    pub percentage: Vec<f64>,
    /// Grid share of the total, in percent.
    pub grid_share: Vec<f64>,
    pub baseline: ParadigmId,
    /// Transformer and line settings per paradigm, for rows that differ.
    pub reinforcement: Vec<(String, Vec<String>)>,
    pub curtailment_share: Vec<f64>,
}

fn pct(v: f64, base: f64) -> f64 {
    if base == 0.0 {
        if v == 0.0 {
            100.0
        } else {
            f64::INFINITY
        }
    } else {
        100.0 * v / base
    }
}

/// Tabulates cost components side by side, relative to the rigid sequential
/// paradigm when present (otherwise the first result).
pub fn compare(results: &[PlanResult]) -> Result<ComparisonReport> {
    if results.is_empty() {
        return Err(Error::invalid("nothing to compare"));
    }
    let base_idx = results
        .iter()
        .position(|r| r.paradigm == ParadigmId::CoorMinusFlexMinus)
        .unwrap_or(0);
    let row = |label: &str, f: &dyn Fn(&CostBreakdown) -> f64| ComparisonRow {
        label: label.to_string(),
        values: results.iter().map(|r| f(&r.costs)).collect(),
    };
    let rows = vec![
        row("PV", &|c| c.pv()),
        row("Heat pump", &|c| c.heat_pump()),
        row("Battery", &|c| c.battery()),
        row("Thermal storage", &|c| c.thermal_storage()),
        row("Import", &|c| c.import()),
        row("Feed-in", &|c| c.feed_in()),
        row("Sum buildings", &|c| c.building_total()),
        row("Cable", &|c| c.grid.cable),
        row("OLTC", &|c| c.grid.oltc),
        row("Q compensation", &|c| c.grid.q_comp),
        row("Curtailment", &|c| c.grid.curtailment),
        row("Sum grid", &|c| c.grid_total()),
        row("Total", &|c| c.total()),
    ];
    let base = results[base_idx].costs.total();
    let mut reinf = Vec::new();
    let trafo: Vec<String> = results
        .iter()
        .map(|r| format!("{} ({} kVA)", r.reinforcement.transformer, r.reinforcement.transformer_kva))
        .collect();
    reinf.push(("transformer".to_string(), trafo));
    if let Some(first) = results.first() {
        for (l, line) in first.reinforcement.lines.iter().enumerate() {
            let settings: Vec<String> = results
                .iter()
                .map(|r| r.reinforcement.lines.get(l).map_or_else(String::new, |d| d.setting.to_string()))
                .collect();
            if settings.iter().any(|s| *s != settings[0]) {
                reinf.push((format!("{}-{}", line.from, line.to), settings));
            }
        }
    }
    Ok(ComparisonReport {
        paradigms: results.iter().map(|r| r.paradigm).collect(),
        percentage: results.iter().map(|r| pct(r.costs.total(), base)).collect(),
        grid_share: results.iter().map(|r| 100.0 * r.costs.grid_share()).collect(),
        baseline: results[base_idx].paradigm,
        rows,
        reinforcement: reinf,
        curtailment_share: results.iter().map(|r| r.curtailment_share()).collect(),
    })
}
