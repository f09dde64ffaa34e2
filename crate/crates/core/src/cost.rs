//! Annualized investment and weighted operating costs.
//!
//! Objective terms are emitted into a [`ModelSpec`]; [`CostBreakdown`] is
//! recomputed from solved values with its own arithmetic so the two can be
//! reconciled against each other.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::building::BuildingVars;
use crate::domain::{CableSetting, Network, TechnoCatalog, TimeGrid};
use crate::error::{Error, Result};
use crate::grid::GridVars;
use crate::model::ModelSpec;

/// Capital recovery factor `i(1+i)^N / ((1+i)^N − 1)`.
pub fn annuity_factor(wacc: f64, lifetime: f64) -> Result<f64> {
    if !(wacc > 0.0) || !wacc.is_finite() {
        return Err(Error::invalid(format!("annuity factor needs wacc > 0, got {wacc}")));
    }
    if !(lifetime >= 1.0) || !lifetime.is_finite() {
        return Err(Error::invalid(format!("annuity factor needs lifetime >= 1, got {lifetime}")));
    }
    let g = libm::pow(1.0 + wacc, lifetime);
    Ok(wacc * g / (g - 1.0))
}

/// Capital cost of running line `l` with `setting`, given what is already
/// installed: one trench plus the added cables.
pub fn line_capex(network: &Network, l: usize, setting: CableSetting) -> Result<f64> {
    let line = &network.lines[l];
    let cable = network
        .cable(&line.cable)
        .ok_or_else(|| Error::invalid(format!("unknown cable `{}`", line.cable)))?;
    if setting <= line.existing {
        return Ok(0.0);
    }
    let added = f64::from(setting.count() - line.existing.count());
    Ok(line.length * (cable.c_install + added * cable.c_material))
}

/// Adds PV, heat pump, battery and thermal storage investment terms.
pub fn component_cost_terms(model: &mut ModelSpec, vars: &BuildingVars, catalog: &TechnoCatalog) -> Result<()> {
    let pv = &catalog.pv.cost;
    model.add_objective(vars.pv.beta, pv.annual_fixed()?);
    model.add_objective(vars.pv.kappa, pv.annual_variable()?);
    let hp = &catalog.heat_pump.cost;
    model.add_objective(vars.heat_pump.beta, hp.annual_fixed()?);
    model.add_objective(vars.heat_pump.kappa, hp.annual_variable()?);
    for (st, params) in [(&vars.battery, &catalog.battery), (&vars.thermal, &catalog.thermal_storage)] {
        model.add_objective(st.kappa_e, params.energy_cost.annual_variable()?);
        model.add_objective(st.kappa_p, params.power_cost.annual_variable()?);
    }
    Ok(())
}

/// Weighted import cost and feed-in revenue of a standalone building.
pub fn building_exchange_terms(model: &mut ModelSpec, vars: &BuildingVars, catalog: &TechnoCatalog, time: &TimeGrid) -> Result<()> {
    let ex = vars
        .exchange
        .as_ref()
        .ok_or_else(|| Error::invalid("building has no exchange variables"))?;
    let s = &catalog.series;
    for (k, step) in time.steps().iter().enumerate() {
        model.add_objective(ex.p_import[k], step.weight * s.price_import[step.hour]);
        model.add_objective(ex.p_feed_in[k], -step.weight * s.price_feed_in[step.hour]);
    }
    Ok(())
}

/// Adds cable, OLTC, compensator and curtailment terms, and root energy
/// terms when `root_energy` is set.
pub fn grid_cost_terms(
    model: &mut ModelSpec,
    gv: &GridVars,
    network: &Network,
    catalog: &TechnoCatalog,
    time: &TimeGrid,
    root_energy: bool,
) -> Result<()> {
    let af = annuity_factor(catalog.grid.cable_wacc, catalog.grid.cable_lifetime)?;
    for (l, lv) in gv.lines.iter().enumerate() {
        for (m, setting) in CableSetting::ALL.iter().enumerate() {
            let capex = line_capex(network, l, *setting)?;
            model.add_objective(lv.alpha[m], af * capex);
        }
    }
    for (&a, t) in gv.transformer.alpha.iter().zip(&network.transformers) {
        model.add_objective(a, t.annualized_cost);
    }
    let s = &catalog.series;
    for (k, step) in time.steps().iter().enumerate() {
        let w = step.weight;
        model.add_objective(gv.q_comp_pos[k], w * s.price_qcomp[step.hour]);
        model.add_objective(gv.q_comp_neg[k], w * s.price_qcomp[step.hour]);
        if root_energy {
            model.add_objective(gv.p_import[k], w * s.price_import[step.hour]);
            model.add_objective(gv.p_feed_in[k], -w * s.price_feed_in[step.hour]);
        }
        for curt in gv.curtailment.iter().flatten() {
            model.add_objective(curt[k], w * s.price_feed_in[step.hour]);
        }
    }
    Ok(())
}

/// Annual costs attributed to one building.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildingCosts {
    pub id: String,
    pub pv: f64,
    pub heat_pump: f64,
    pub battery: f64,
    pub thermal_storage: f64,
    pub import: f64,
    /// Feed-in revenue for energy that actually reached the grid (≤ 0).
    pub feed_in: f64,
    /// Tariff received for feed-in curtailed by the grid operator (≤ 0).
    pub curtailment_received: f64,
}

impl BuildingCosts {
    pub fn components(&self) -> f64 {
        self.pv + self.heat_pump + self.battery + self.thermal_storage
    }

    pub fn total(&self) -> f64 {
        self.components() + self.import + self.feed_in + self.curtailment_received
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridCosts {
    pub cable: f64,
    pub oltc: f64,
    pub q_comp: f64,
    /// Compensation paid for curtailed feed-in.
    pub curtailment: f64,
    /// Import at the main busbar (coordinated planning only).
    pub import: f64,
    /// Feed-in revenue at the main busbar (coordinated planning only, ≤ 0).
    pub feed_in: f64,
}

impl GridCosts {
    pub fn reinforcement(&self) -> f64 {
        self.cable + self.oltc + self.q_comp + self.curtailment
    }

    pub fn total(&self) -> f64 {
        self.reinforcement() + self.import + self.feed_in
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub buildings: Vec<BuildingCosts>,
    pub grid: GridCosts,
}

impl CostBreakdown {
    pub fn pv(&self) -> f64 {
        self.buildings.iter().map(|b| b.pv).sum()
    }

    pub fn heat_pump(&self) -> f64 {
        self.buildings.iter().map(|b| b.heat_pump).sum()
    }

    pub fn battery(&self) -> f64 {
        self.buildings.iter().map(|b| b.battery).sum()
    }

    pub fn thermal_storage(&self) -> f64 {
        self.buildings.iter().map(|b| b.thermal_storage).sum()
    }

    /// Electricity import, at building meters or the main busbar.
    pub fn import(&self) -> f64 {
        self.buildings.iter().map(|b| b.import).sum::<f64>() + self.grid.import
    }

    /// Feed-in revenue including curtailment compensation received (≤ 0).
    pub fn feed_in(&self) -> f64 {
        self.buildings.iter().map(|b| b.feed_in + b.curtailment_received).sum::<f64>() + self.grid.feed_in
    }

    pub fn building_total(&self) -> f64 {
        self.pv() + self.heat_pump() + self.battery() + self.thermal_storage() + self.import() + self.feed_in()
    }

    pub fn grid_total(&self) -> f64 {
        self.grid.reinforcement()
    }

    pub fn total(&self) -> f64 {
        self.building_total() + self.grid_total()
    }

    /// Share of the total spent on the grid.
    pub fn grid_share(&self) -> f64 {
        let t = self.total();
        if t == 0.0 {
            0.0
        } else {
            self.grid_total() / t
        }
    }
}

/// Recomputes the investment costs of one building from capacities.
pub fn building_component_costs(catalog: &TechnoCatalog, caps: &crate::paradigms::Capacities) -> Result<BuildingCosts> {
    let pv = &catalog.pv.cost;
    let hp = &catalog.heat_pump.cost;
    let af_pv = annuity_factor(pv.wacc, pv.lifetime)?;
    let af_hp = annuity_factor(hp.wacc, hp.lifetime)?;
    let storage = |p: &crate::domain::StorageParams, kp: f64, ke: f64| -> Result<f64> {
        let e = &p.energy_cost;
        let w = &p.power_cost;
        let af_e = annuity_factor(e.wacc, e.lifetime)?;
        let af_p = annuity_factor(w.wacc, w.lifetime)?;
        Ok(ke * (e.variable * (af_e + e.om_fraction) + e.om_per_unit) + kp * (w.variable * (af_p + w.om_fraction) + w.om_per_unit))
    };
    Ok(BuildingCosts {
        id: caps.building.clone(),
        pv: af_pv * (pv.fixed * caps.pv_installed + pv.variable * caps.pv_kw)
            + pv.om_fraction * (pv.fixed * caps.pv_installed + pv.variable * caps.pv_kw)
            + pv.om_per_unit * caps.pv_kw,
        heat_pump: af_hp * (hp.fixed * caps.hp_installed + hp.variable * caps.hp_kw)
            + hp.om_fraction * (hp.fixed * caps.hp_installed + hp.variable * caps.hp_kw)
            + hp.om_per_unit * caps.hp_kw,
        battery: storage(&catalog.battery, caps.battery_kw, caps.battery_kwh)?,
        thermal_storage: storage(&catalog.thermal_storage, caps.ts_kw, caps.ts_kwh)?,
        ..Default::default()
    })
}
