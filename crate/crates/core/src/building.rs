//! Variables and constraints of one building energy hub: PV, battery, heat
//! pump, thermal storage and vehicle charging with a virtual mobility storage.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{Building, TechnoCatalog, TimeGrid};
use crate::error::{Error, Result};
use crate::grid::GridVars;
use crate::model::{ModelSpec, Sense, VarId};
use crate::util::sanitize;

/// Everything the emitters need to know about one building.
#[derive(Clone, Copy, Debug)]
pub struct BuildingContext<'a> {
    pub building: &'a Building,
    pub catalog: &'a TechnoCatalog,
    pub time: &'a TimeGrid,
    /// Enables storage investment and shiftable charging.
    pub flexible: bool,
}

impl BuildingContext<'_> {
    fn tag(&self) -> String {
        sanitize(&self.building.id)
    }

    fn name(&self, symbol: &str) -> String {
        format!("{symbol}_{}", self.tag())
    }

    fn step_name(&self, symbol: &str, k: usize) -> String {
        format!("{symbol}_{}_t{k}", self.tag())
    }

    fn series<'s>(&self, s: &'s [f64], what: &str) -> Result<&'s [f64]> {
        match self.time.max_hour() {
            Some(h) if h >= s.len() => Err(Error::invalid(format!(
                "{what} has {} values but the time grid reaches hour {h}",
                s.len()
            ))),
            _ => Ok(s),
        }
    }

    /// Charging station power of the building in kW.
    pub fn cs_capacity(&self) -> f64 {
        let m = &self.building.mobility;
        if m.daily_kwh > 0.0 {
            self.catalog.charging.rating_kw * f64::from(m.bev_count)
        } else {
            0.0
        }
    }

    /// Mobility demand at step `k`: the daily energy at the deadline hour in
    /// flexible mode, at the arrival hour otherwise.
    pub fn mobility_demand(&self, k: usize) -> f64 {
        let m = &self.building.mobility;
        let h = self.time.steps()[k].hour_of_day();
        let at = if self.flexible { m.deadline_hour } else { m.arrival_hour };
        if h == at {
            m.daily_kwh
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct PvVars {
    pub kappa: VarId,
    pub beta: VarId,
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct StorageVars {
    pub kappa_p: VarId,
    pub kappa_e: VarId,
    pub charge: Vec<VarId>,
    pub discharge: Vec<VarId>,
    pub energy: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct HeatPumpVars {
    pub kappa: VarId,
    pub beta: VarId,
    pub p: Vec<VarId>,
    pub heat: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct MobilityVars {
    /// Electric power drawn by the charging station.
    pub p_bev: Vec<VarId>,
    /// Energy delivered to the vehicles.
    pub mu_bev: Vec<VarId>,
    pub vms_charge: Vec<VarId>,
    pub vms_discharge: Vec<VarId>,
    pub vms_energy: Vec<VarId>,
    pub demand: Vec<f64>,
}

/// Grid exchange of a building planned on its own.
#[derive(Clone, Debug)]
pub struct ExchangeVars {
    pub p_import: Vec<VarId>,
    pub p_feed_in: Vec<VarId>,
    pub q_import: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct BuildingVars {
    pub pv: PvVars,
    pub battery: StorageVars,
    pub heat_pump: HeatPumpVars,
    pub thermal: StorageVars,
    pub mobility: MobilityVars,
    pub exchange: Option<ExchangeVars>,
}

impl BuildingVars {
    /// Capacity and install decisions handed from a sizing stage to a
    /// dispatch stage. The battery energy capacity is omitted because it is
    /// tied to the power capacity by an equality.
    pub fn design_vars(&self) -> Vec<VarId> {
        vec![
            self.pv.kappa,
            self.pv.beta,
            self.battery.kappa_p,
            self.heat_pump.kappa,
            self.heat_pump.beta,
            self.thermal.kappa_p,
            self.thermal.kappa_e,
        ]
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BalanceMode<'g> {
    /// Coupled to the grid flows at bus index `bus`.
    Networked { grid: Option<&'g GridVars>, bus: usize },
    /// Own import and feed-in variables, no grid.
    Standalone,
}

pub fn add_pv(model: &mut ModelSpec, ctx: &BuildingContext) -> Result<PvVars> {
    let cf = ctx.series(&ctx.catalog.series.cf_pv, "cf_pv")?;
    let tan_phi = ctx.catalog.pv_tan_phi();
    let kappa = model.nonneg(ctx.name("pv_kappa"));
    let beta = model.binary(ctx.name("pv_beta"));
    let limit = ctx.catalog.pv.roof_factor * ctx.building.roof_area;
    model.add_constraint(ctx.name("pv_roof"), vec![(kappa, 1.0), (beta, -limit)], Sense::Le, 0.0);
    let mut p = Vec::with_capacity(ctx.time.len());
    let mut q = Vec::with_capacity(ctx.time.len());
    for (k, step) in ctx.time.steps().iter().enumerate() {
        let pk = model.nonneg(ctx.step_name("pv_p", k));
        let qk = model.free(ctx.step_name("pv_q", k));
        model.add_constraint(ctx.step_name("pv_avail", k), vec![(pk, 1.0), (kappa, -cf[step.hour])], Sense::Le, 0.0);
        model.add_constraint(ctx.step_name("pv_qmax", k), vec![(qk, 1.0), (pk, -tan_phi)], Sense::Le, 0.0);
        model.add_constraint(ctx.step_name("pv_qmin", k), vec![(qk, -1.0), (pk, -tan_phi)], Sense::Le, 0.0);
        p.push(pk);
        q.push(qk);
    }
    Ok(PvVars { kappa, beta, p, q })
}

struct StorageSpec<'a> {
    symbol: &'a str,
    eta_ch: f64,
    eta_dch: f64,
    self_discharge: f64,
    etp: Option<f64>,
}

fn add_storage(model: &mut ModelSpec, ctx: &BuildingContext, s: StorageSpec) -> StorageVars {
    let cap = if ctx.flexible { f64::INFINITY } else { 0.0 };
    let kappa_p = model.continuous(ctx.name(&format!("{}_kappa_p", s.symbol)), 0.0, cap);
    let kappa_e = model.continuous(ctx.name(&format!("{}_kappa_e", s.symbol)), 0.0, cap);
    if let Some(etp) = s.etp {
        model.add_constraint(
            ctx.name(&format!("{}_etp", s.symbol)),
            vec![(kappa_e, 1.0), (kappa_p, -etp)],
            Sense::Eq,
            0.0,
        );
    }
    let n = ctx.time.len();
    let mut charge = Vec::with_capacity(n);
    let mut discharge = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    for k in 0..n {
        charge.push(model.continuous(ctx.step_name(&format!("{}_ch", s.symbol), k), 0.0, cap));
        discharge.push(model.continuous(ctx.step_name(&format!("{}_dch", s.symbol), k), 0.0, cap));
        energy.push(model.continuous(ctx.step_name(&format!("{}_e", s.symbol), k), 0.0, cap));
    }
    for k in 0..n {
        let prev = ctx.time.prev(k);
        model.add_constraint(
            ctx.step_name(&format!("{}_soc", s.symbol), k),
            vec![
                (energy[k], 1.0),
                (energy[prev], -(1.0 - s.self_discharge)),
                (charge[k], -s.eta_ch),
                (discharge[k], 1.0 / s.eta_dch),
            ],
            Sense::Eq,
            0.0,
        );
        model.add_constraint(
            ctx.step_name(&format!("{}_chmax", s.symbol), k),
            vec![(charge[k], 1.0), (kappa_p, -1.0)],
            Sense::Le,
            0.0,
        );
        model.add_constraint(
            ctx.step_name(&format!("{}_dchmax", s.symbol), k),
            vec![(discharge[k], 1.0), (kappa_p, -1.0)],
            Sense::Le,
            0.0,
        );
        model.add_constraint(
            ctx.step_name(&format!("{}_emax", s.symbol), k),
            vec![(energy[k], 1.0), (kappa_e, -1.0)],
            Sense::Le,
            0.0,
        );
    }
    StorageVars {
        kappa_p,
        kappa_e,
        charge,
        discharge,
        energy,
    }
}

/// Battery with state equation, rate and energy limits, cyclic state per
/// period and a fixed energy-to-power ratio. Capacities are zero unless the
/// context is flexible.
pub fn add_battery(model: &mut ModelSpec, ctx: &BuildingContext) -> Result<StorageVars> {
    let b = &ctx.catalog.battery;
    Ok(add_storage(
        model,
        ctx,
        StorageSpec {
            symbol: "bat",
            eta_ch: b.eta_ch,
            eta_dch: b.eta_dch,
            self_discharge: b.self_discharge,
            etp: b.etp,
        },
    ))
}

/// Thermal storage; power and energy capacities are sized independently.
pub fn add_thermal_storage(model: &mut ModelSpec, ctx: &BuildingContext) -> Result<StorageVars> {
    let s = &ctx.catalog.thermal_storage;
    Ok(add_storage(
        model,
        ctx,
        StorageSpec {
            symbol: "ts",
            eta_ch: s.eta_ch,
            eta_dch: s.eta_dch,
            self_discharge: s.self_discharge,
            etp: s.etp,
        },
    ))
}

pub fn add_heatpump(model: &mut ModelSpec, ctx: &BuildingContext) -> Result<HeatPumpVars> {
    let cop = ctx.series(&ctx.catalog.series.cop, "cop")?;
    if let Some(bad) = ctx.time.steps().iter().map(|s| cop[s.hour]).find(|&c| !(c > 0.0)) {
        return Err(Error::invalid(format!("cop must be positive, found {bad}")));
    }
    let kappa = model.nonneg(ctx.name("hp_kappa"));
    let beta = model.binary(ctx.name("hp_beta"));
    let big_m = ctx.catalog.big_m(ctx.building);
    model.add_constraint(ctx.name("hp_install"), vec![(kappa, 1.0), (beta, -big_m)], Sense::Le, 0.0);
    let mut p = Vec::with_capacity(ctx.time.len());
    let mut heat = Vec::with_capacity(ctx.time.len());
    for (k, step) in ctx.time.steps().iter().enumerate() {
        let pk = model.nonneg(ctx.step_name("hp_p", k));
        let hk = model.nonneg(ctx.step_name("hp_heat", k));
        model.add_constraint(ctx.step_name("hp_cop", k), vec![(hk, 1.0), (pk, -cop[step.hour])], Sense::Eq, 0.0);
        model.add_constraint(ctx.step_name("hp_cap", k), vec![(pk, 1.0), (kappa, -1.0)], Sense::Le, 0.0);
        p.push(pk);
        heat.push(hk);
    }
    Ok(HeatPumpVars { kappa, beta, p, heat })
}

/// Heat pump output plus storage discharge covers space heat, hot water and
/// storage charging.
pub fn add_heat_balance(
    model: &mut ModelSpec,
    ctx: &BuildingContext,
    hp: &HeatPumpVars,
    ts: &StorageVars,
) -> Result<()> {
    let b = ctx.building;
    ctx.series(&b.profiles.space_heat, "space_heat")?;
    ctx.series(&b.profiles.hot_water, "hot_water")?;
    for (k, step) in ctx.time.steps().iter().enumerate() {
        model.add_constraint(
            ctx.step_name("heat_bal", k),
            vec![(hp.heat[k], 1.0), (ts.discharge[k], 1.0), (ts.charge[k], -1.0)],
            Sense::Eq,
            b.heat_demand(step.hour),
        );
    }
    Ok(())
}

pub fn add_mobility(model: &mut ModelSpec, ctx: &BuildingContext) -> Result<MobilityVars> {
    let m = &ctx.building.mobility;
    if m.arrival_hour >= 24 || m.deadline_hour >= 24 || m.arrival_hour == m.deadline_hour {
        return Err(Error::invalid(format!(
            "building `{}`: invalid charging window {}..{}",
            ctx.building.id, m.arrival_hour, m.deadline_hour
        )));
    }
    let cs = ctx.cs_capacity();
    let eta = ctx.catalog.charging.efficiency;
    let vms_cap = if ctx.flexible { cs } else { 0.0 };
    let n = ctx.time.len();
    let mut vars = MobilityVars {
        p_bev: Vec::with_capacity(n),
        mu_bev: Vec::with_capacity(n),
        vms_charge: Vec::with_capacity(n),
        vms_discharge: Vec::with_capacity(n),
        vms_energy: Vec::with_capacity(n),
        demand: (0..n).map(|k| ctx.mobility_demand(k)).collect(),
    };
    for (k, step) in ctx.time.steps().iter().enumerate() {
        let window = if m.in_window(step.hour_of_day()) { cs } else { 0.0 };
        vars.p_bev.push(model.nonneg(ctx.step_name("bev_p", k)));
        vars.mu_bev.push(model.continuous(ctx.step_name("bev_mu", k), 0.0, window));
        vars.vms_charge.push(model.continuous(ctx.step_name("vms_ch", k), 0.0, vms_cap));
        vars.vms_discharge.push(model.continuous(ctx.step_name("vms_dch", k), 0.0, vms_cap));
        let e_cap = if ctx.flexible && cs > 0.0 { f64::INFINITY } else { 0.0 };
        vars.vms_energy.push(model.continuous(ctx.step_name("vms_e", k), 0.0, e_cap));
    }
    for k in 0..n {
        model.add_constraint(
            ctx.step_name("bev_conv", k),
            vec![(vars.mu_bev[k], 1.0), (vars.p_bev[k], -eta)],
            Sense::Eq,
            0.0,
        );
        model.add_constraint(
            ctx.step_name("mob_bal", k),
            vec![(vars.mu_bev[k], 1.0), (vars.vms_discharge[k], 1.0), (vars.vms_charge[k], -1.0)],
            Sense::Eq,
            vars.demand[k],
        );
        let prev = ctx.time.prev(k);
        model.add_constraint(
            ctx.step_name("vms_soc", k),
            vec![
                (vars.vms_energy[k], 1.0),
                (vars.vms_energy[prev], -1.0),
                (vars.vms_charge[k], -1.0),
                (vars.vms_discharge[k], 1.0),
            ],
            Sense::Eq,
            0.0,
        );
    }
    for (pi, period) in ctx.time.periods().iter().enumerate() {
        let mut terms = Vec::with_capacity(2 * period.len());
        for k in period.clone() {
            terms.push((vars.vms_discharge[k], 1.0));
            terms.push((vars.vms_charge[k], -1.0));
        }
        model.add_constraint(ctx.name(&format!("vms_sum_p{pi}")), terms, Sense::Eq, 0.0);
    }
    Ok(vars)
}

/// Active and reactive power balance of the building, either against grid
/// flows at its bus or against its own import and feed-in variables.
#[allow(clippy::too_many_arguments)]
pub fn add_building_balance(
    model: &mut ModelSpec,
    ctx: &BuildingContext,
    pv: &PvVars,
    battery: &StorageVars,
    hp: &HeatPumpVars,
    mobility: &MobilityVars,
    mode: BalanceMode,
) -> Result<Option<ExchangeVars>> {
    let b = ctx.building;
    ctx.series(&b.profiles.elec, "elec")?;
    let q_over_p = ctx.catalog.q_over_p;
    let n = ctx.time.len();
    let mut exchange = match mode {
        BalanceMode::Standalone => Some(ExchangeVars {
            p_import: Vec::with_capacity(n),
            p_feed_in: Vec::with_capacity(n),
            q_import: Vec::with_capacity(n),
        }),
        BalanceMode::Networked { grid: None, .. } => {
            return Err(Error::invalid("networked building balance needs grid variables"));
        }
        BalanceMode::Networked { .. } => None,
    };
    for (k, step) in ctx.time.steps().iter().enumerate() {
        let mut p_terms = vec![
            (pv.p[k], 1.0),
            (battery.discharge[k], 1.0),
            (battery.charge[k], -1.0),
            (mobility.p_bev[k], -1.0),
            (hp.p[k], -1.0),
        ];
        let mut q_terms = vec![(pv.q[k], 1.0)];
        match (&mut exchange, mode) {
            (Some(ex), _) => {
                let imp = model.nonneg(ctx.step_name("imp_p", k));
                let fi = model.nonneg(ctx.step_name("feedin_p", k));
                let qi = model.free(ctx.step_name("imp_q", k));
                p_terms.push((imp, 1.0));
                p_terms.push((fi, -1.0));
                q_terms.push((qi, 1.0));
                ex.p_import.push(imp);
                ex.p_feed_in.push(fi);
                ex.q_import.push(qi);
            }
            (None, BalanceMode::Networked { grid: Some(g), bus }) => {
                p_terms.extend(g.net_inflow_p(bus, k));
                q_terms.extend(g.net_inflow_q(bus, k));
            }
            _ => unreachable!("mode checked above"),
        }
        model.add_constraint(ctx.step_name("bal_p", k), p_terms, Sense::Eq, b.profiles.elec[step.hour]);
        model.add_constraint(ctx.step_name("bal_q", k), q_terms, Sense::Eq, b.elec_q(step.hour, q_over_p));
    }
    Ok(exchange)
}

/// Emits the complete building hub.
pub fn add_building(model: &mut ModelSpec, ctx: &BuildingContext, mode: BalanceMode) -> Result<BuildingVars> {
    let pv = add_pv(model, ctx)?;
    let battery = add_battery(model, ctx)?;
    let heat_pump = add_heatpump(model, ctx)?;
    let thermal = add_thermal_storage(model, ctx)?;
    add_heat_balance(model, ctx, &heat_pump, &thermal)?;
    let mobility = add_mobility(model, ctx)?;
    let exchange = add_building_balance(model, ctx, &pv, &battery, &heat_pump, &mobility, mode)?;
    Ok(BuildingVars {
        pv,
        battery,
        heat_pump,
        thermal,
        mobility,
        exchange,
    })
}
