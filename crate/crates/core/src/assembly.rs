//! Assembly of the three planning problems: the coordinated model over grid
//! and buildings, the standalone building model and the grid model over fixed
//! building injections.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use crate::building::{add_building, BalanceMode, BuildingContext, BuildingVars};
use crate::cost::{building_exchange_terms, component_cost_terms, grid_cost_terms};
use crate::domain::{validate_network, Building, BusKind, Network, TechnoCatalog, TimeGrid, VoltageBands};
use crate::error::{Error, Result};
use crate::grid::{add_fixed_injection_balance, add_grid, add_passive_balance, GridVars, InjectionProfile};
use crate::model::ModelSpec;
use crate::util::sanitize;

/// A complete planning case: grid, buildings, catalog and the number of
/// hours the input horizon stands for.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub bands: VoltageBands,
    pub buildings: Vec<Building>,
    pub catalog: TechnoCatalog,
    pub represented_hours: f64,
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.catalog.horizon()
    }

    pub fn validate(&self) -> Result<()> {
        let report = validate_network(&self.network);
        if !report.is_valid() {
            return Err(Error::invalid(format!("invalid network: {}", report.violations.join("; "))));
        }
        self.bands.validate()?;
        self.catalog.validate()?;
        let h = self.horizon();
        if h == 0 {
            return Err(Error::invalid("empty horizon"));
        }
        if !(self.represented_hours > 0.0) {
            return Err(Error::invalid("represented_hours must be positive"));
        }
        let mut ids = BTreeSet::new();
        let mut buses = BTreeSet::new();
        for b in &self.buildings {
            if !ids.insert(b.id.as_str()) {
                return Err(Error::invalid(format!("duplicate building id `{}`", b.id)));
            }
            let bus = self
                .network
                .buses
                .iter()
                .find(|x| x.id == b.bus)
                .ok_or_else(|| Error::invalid(format!("building `{}` references unknown bus `{}`", b.id, b.bus)))?;
            if bus.kind == BusKind::Mbb {
                return Err(Error::invalid(format!("building `{}` sits on the main busbar", b.id)));
            }
            if !buses.insert(b.bus.as_str()) {
                return Err(Error::invalid(format!("more than one building on bus `{}`", b.bus)));
            }
            b.validate(h)?;
        }
        Ok(())
    }

    pub fn full_grid(&self) -> Result<TimeGrid> {
        TimeGrid::full(self.horizon(), self.represented_hours)
    }

    /// Bus index of building `i`.
    pub fn building_bus(&self, i: usize) -> Result<usize> {
        let b = &self.buildings[i];
        self.network
            .bus_index(&b.bus)
            .ok_or_else(|| Error::invalid(format!("building `{}` references unknown bus `{}`", b.id, b.bus)))
    }

    fn building_at(&self, bus: usize) -> Option<usize> {
        let id = &self.network.buses[bus].id;
        self.buildings.iter().position(|b| &b.bus == id)
    }
}

/// The coordinated model over grid and all buildings.
#[derive(Clone, Debug)]
pub struct HoodsModel {
    pub spec: ModelSpec,
    pub buildings: Vec<BuildingVars>,
    pub grid: GridVars,
}

pub fn build_hoods(inst: &Instance, time: &TimeGrid) -> Result<HoodsModel> {
    inst.validate()?;
    let mut spec = ModelSpec::new();
    let grid = add_grid(&mut spec, &inst.network, &inst.bands, time.len())?;
    let mut buildings = Vec::with_capacity(inst.buildings.len());
    for (i, b) in inst.buildings.iter().enumerate() {
        let ctx = BuildingContext {
            building: b,
            catalog: &inst.catalog,
            time,
            flexible: true,
        };
        let bus = inst.building_bus(i)?;
        let vars = add_building(&mut spec, &ctx, BalanceMode::Networked { grid: Some(&grid), bus })?;
        component_cost_terms(&mut spec, &vars, &inst.catalog)?;
        buildings.push(vars);
    }
    for bus in 0..inst.network.buses.len() {
        if bus != grid.topology.root && inst.building_at(bus).is_none() {
            add_passive_balance(&mut spec, &grid, bus, &sanitize(&inst.network.buses[bus].id));
        }
    }
    grid_cost_terms(&mut spec, &grid, &inst.network, &inst.catalog, time, true)?;
    Ok(HoodsModel { spec, buildings, grid })
}

/// A building planned without regard to the grid.
#[derive(Clone, Debug)]
pub struct BuildingModel {
    pub spec: ModelSpec,
    pub vars: BuildingVars,
}

pub fn build_hoods_bui(inst: &Instance, i: usize, time: &TimeGrid, flexible: bool) -> Result<BuildingModel> {
    let b = inst
        .buildings
        .get(i)
        .ok_or_else(|| Error::invalid(format!("no building with index {i}")))?;
    inst.catalog.validate()?;
    b.validate(inst.horizon())?;
    let ctx = BuildingContext {
        building: b,
        catalog: &inst.catalog,
        time,
        flexible,
    };
    let mut spec = ModelSpec::new();
    let vars = add_building(&mut spec, &ctx, BalanceMode::Standalone)?;
    component_cost_terms(&mut spec, &vars, &inst.catalog)?;
    building_exchange_terms(&mut spec, &vars, &inst.catalog, time)?;
    Ok(BuildingModel { spec, vars })
}

/// Grid reinforcement over fixed building injections.
#[derive(Clone, Debug)]
pub struct GridModel {
    pub spec: ModelSpec,
    pub grid: GridVars,
}

/// `profiles[i]` holds the injections of building `i` on `time`.
pub fn build_hoods_grid(inst: &Instance, time: &TimeGrid, profiles: &[InjectionProfile], curtail: bool) -> Result<GridModel> {
    inst.validate()?;
    if profiles.len() != inst.buildings.len() {
        return Err(Error::invalid(format!(
            "{} injection profiles for {} buildings",
            profiles.len(),
            inst.buildings.len()
        )));
    }
    let mut spec = ModelSpec::new();
    let mut grid = add_grid(&mut spec, &inst.network, &inst.bands, time.len())?;
    for bus in 0..inst.network.buses.len() {
        if bus == grid.topology.root {
            continue;
        }
        let tag = sanitize(&inst.network.buses[bus].id);
        match inst.building_at(bus) {
            Some(i) => add_fixed_injection_balance(&mut spec, &mut grid, bus, &tag, &profiles[i], curtail)?,
            None => add_passive_balance(&mut spec, &grid, bus, &tag),
        }
    }
    grid_cost_terms(&mut spec, &grid, &inst.network, &inst.catalog, time, false)?;
    Ok(GridModel { spec, grid })
}
