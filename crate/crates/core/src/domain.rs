//! Data describing the distribution grid, the buildings on it, the
//! techno-economic catalog and the time structure of a planning run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::cost::annuity_factor;
use crate::error::{Error, Result};
use crate::util::{max_of, min_of};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Mbb,
    Junction,
    Load,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub kind: BusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predecessor: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableType {
    pub name: String,
    /// Resistance in ohm/km.
    pub r: f64,
    /// Reactance in ohm/km.
    pub x: f64,
    /// Thermal limit of a single cable in kVA.
    pub s_max: f64,
    /// Installation cost per metre of trench.
    pub c_install: f64,
    /// Material cost per metre of cable.
    pub c_material: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CableSetting {
    I,
    II,
    III,
}

impl CableSetting {
    pub const ALL: [CableSetting; 3] = [CableSetting::I, CableSetting::II, CableSetting::III];

    /// Number of parallel cables.
    pub fn count(self) -> u32 {
        match self {
            CableSetting::I => 1,
            CableSetting::II => 2,
            CableSetting::III => 3,
        }
    }

    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            1 => Some(CableSetting::I),
            2 => Some(CableSetting::II),
            3 => Some(CableSetting::III),
            _ => None,
        }
    }
}

impl fmt::Display for CableSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CableSetting::I => "I",
            CableSetting::II => "II",
            CableSetting::III => "III",
        })
    }
}

/// Capacity (kVA), resistance and reactance (ohm/km) of `setting` parallel
/// cables of one type.
pub fn effective_cable_params(cable: &CableType, setting: CableSetting) -> (f64, f64, f64) {
    let m = f64::from(setting.count());
    (m * cable.s_max, cable.r / m, cable.x / m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    pub from: String,
    pub to: String,
    /// Length in metres.
    pub length: f64,
    pub cable: String,
    #[serde(default = "default_setting")]
    pub existing: CableSetting,
}

fn default_setting() -> CableSetting {
    CableSetting::I
}

impl LineSection {
    pub fn label(&self) -> String {
        format!("{}_{}", self.from, self.to)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformerOption {
    pub name: String,
    /// Rated power in kVA.
    pub capacity: f64,
    pub is_oltc: bool,
    /// Annualized investment plus O&M; zero for the installed unit.
    pub annualized_cost: f64,
}

impl TransformerOption {
    /// An OLTC option priced from its capital cost.
    pub fn oltc(capacity: f64, capex: f64, grid: &GridEconomics) -> Result<Self> {
        let af = annuity_factor(grid.oltc_wacc, grid.oltc_lifetime)?;
        Ok(Self {
            name: format!("oltc_{capacity}"),
            capacity,
            is_oltc: true,
            annualized_cost: capex * (af + grid.oltc_om_fraction),
        })
    }

    pub fn frt(capacity: f64) -> Self {
        Self {
            name: "frt".to_string(),
            capacity,
            is_oltc: false,
            annualized_cost: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<LineSection>,
    pub cables: Vec<CableType>,
    pub transformers: Vec<TransformerOption>,
}

/// Index structure of a validated radial network.
#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    pub root: usize,
    /// Line feeding each bus; `None` for the root.
    pub parent_line: Vec<Option<usize>>,
    /// Lines leaving each bus.
    pub child_lines: Vec<Vec<usize>>,
    pub line_from: Vec<usize>,
    pub line_to: Vec<usize>,
    pub line_cable: Vec<usize>,
    /// Buses in breadth-first order from the root.
    pub order: Vec<usize>,
}

impl Topology {
    /// Buses from the root down to `bus`, inclusive.
    pub fn path_to(&self, bus: usize) -> Vec<usize> {
        let mut path = vec![bus];
        let mut cur = bus;
        while let Some(l) = self.parent_line[cur] {
            cur = self.line_from[l];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

impl Network {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn cable(&self, name: &str) -> Option<&CableType> {
        self.cables.iter().find(|c| c.name == name)
    }

    pub fn incumbent(&self) -> Option<&TransformerOption> {
        self.transformers.iter().find(|t| !t.is_oltc)
    }

    /// Resolves the network into index form. Fails with the validation
    /// messages if the network is not a single-rooted radial tree.
    pub fn topology(&self) -> Result<Topology> {
        let report = validate_network(self);
        if !report.is_valid() {
            return Err(Error::invalid(format!("invalid network: {}", report.violations.join("; "))));
        }
        let n = self.buses.len();
        let idx: BTreeMap<&str, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
        let mut parent_line = vec![None; n];
        let mut child_lines = vec![Vec::new(); n];
        let mut line_from = Vec::with_capacity(self.lines.len());
        let mut line_to = Vec::with_capacity(self.lines.len());
        let mut line_cable = Vec::with_capacity(self.lines.len());
        for (l, line) in self.lines.iter().enumerate() {
            let (f, t) = (idx[line.from.as_str()], idx[line.to.as_str()]);
            parent_line[t] = Some(l);
            child_lines[f].push(l);
            line_from.push(f);
            line_to.push(t);
            line_cable.push(self.cables.iter().position(|c| c.name == line.cable).unwrap_or(0));
        }
        let root = self.buses.iter().position(|b| b.kind == BusKind::Mbb).unwrap_or(0);
        let mut order = vec![root];
        let mut head = 0;
        while head < order.len() {
            let b = order[head];
            head += 1;
            for &l in &child_lines[b] {
                order.push(line_to[l]);
            }
        }
        Ok(Topology {
            root,
            parent_line,
            child_lines,
            line_from,
            line_to,
            line_cable,
            order,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every structural problem of `network`. The report is sorted, so it
/// does not depend on the order of buses or lines in the input.
pub fn validate_network(network: &Network) -> ValidationReport {
    let mut v: BTreeSet<String> = BTreeSet::new();
    let mut ids: BTreeMap<&str, &Bus> = BTreeMap::new();
    for b in &network.buses {
        if ids.insert(b.id.as_str(), b).is_some() {
            v.insert(format!("duplicate bus id `{}`", b.id));
        }
    }
    let roots: Vec<&Bus> = network.buses.iter().filter(|b| b.kind == BusKind::Mbb).collect();
    match roots.len() {
        0 => {
            v.insert("no root: network has no MBB bus".to_string());
        }
        1 => {}
        _ => {
            v.insert("multiple roots".to_string());
        }
    }
    for b in &network.buses {
        match (&b.predecessor, b.kind) {
            (Some(_), BusKind::Mbb) => {
                v.insert(format!("MBB `{}` has a predecessor", b.id));
            }
            (None, BusKind::Mbb) => {}
            (None, _) => {
                v.insert("multiple roots".to_string());
                v.insert(format!("bus `{}` has no predecessor", b.id));
            }
            (Some(p), _) => {
                if !ids.contains_key(p.as_str()) {
                    v.insert(format!("bus `{}` has unknown predecessor `{p}`", b.id));
                }
            }
        }
    }
    // Walk predecessor links; a walk longer than the bus count is a cycle.
    for b in &network.buses {
        let mut cur = b;
        let mut steps = 0;
        while let Some(p) = &cur.predecessor {
            match ids.get(p.as_str()) {
                Some(next) => cur = next,
                None => break,
            }
            steps += 1;
            if steps > network.buses.len() {
                v.insert("not a tree".to_string());
                v.insert(format!("bus `{}` lies on a predecessor cycle", b.id));
                break;
            }
        }
    }

    let mut feeding: BTreeMap<&str, usize> = BTreeMap::new();
    for line in &network.lines {
        let label = line.label();
        let to = ids.get(line.to.as_str());
        if !ids.contains_key(line.from.as_str()) {
            v.insert(format!("line `{label}` starts at unknown bus `{}`", line.from));
        }
        match to {
            None => {
                v.insert(format!("line `{label}` ends at unknown bus `{}`", line.to));
            }
            Some(bus) => {
                if bus.predecessor.as_deref() != Some(line.from.as_str()) {
                    v.insert(format!("line `{label}` does not follow the predecessor of `{}`", line.to));
                }
            }
        }
        *feeding.entry(line.to.as_str()).or_default() += 1;
        if !(line.length > 0.0) {
            v.insert(format!("line `{label}` has non-positive length {}", line.length));
        }
        if network.cable(&line.cable).is_none() {
            v.insert(format!("line `{label}` uses unknown cable `{}`", line.cable));
        }
    }
    for b in &network.buses {
        let count = feeding.get(b.id.as_str()).copied().unwrap_or(0);
        if b.kind == BusKind::Mbb {
            if count > 0 {
                v.insert(format!("MBB `{}` is fed by a line", b.id));
            }
        } else if b.predecessor.is_some() && count != 1 {
            v.insert(format!("bus `{}` is fed by {count} lines, expected 1", b.id));
        }
    }

    let mut cable_names = BTreeSet::new();
    for c in &network.cables {
        if !cable_names.insert(c.name.as_str()) {
            v.insert(format!("duplicate cable type `{}`", c.name));
        }
        if !(c.r > 0.0 && c.x > 0.0 && c.s_max > 0.0) {
            v.insert(format!("cable `{}` needs positive r, x and s_max", c.name));
        }
        if !(c.c_install >= 0.0 && c.c_material >= 0.0) {
            v.insert(format!("cable `{}` has negative cost", c.name));
        }
    }
    let incumbents = network.transformers.iter().filter(|t| !t.is_oltc).count();
    if incumbents != 1 {
        v.insert(format!("expected exactly one fixed-ratio transformer, found {incumbents}"));
    }
    for t in &network.transformers {
        if !(t.capacity > 0.0) {
            v.insert(format!("transformer `{}` has non-positive capacity", t.name));
        }
        if !(t.annualized_cost >= 0.0) {
            v.insert(format!("transformer `{}` has negative cost", t.name));
        }
    }
    ValidationReport {
        violations: v.into_iter().collect(),
    }
}

/// Per-unit voltage limits for one bus, without and with an OLTC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub min: f64,
    pub max: f64,
    pub oltc_min: f64,
    pub oltc_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageBands {
    /// Line-to-line base voltage in volts.
    pub v_base: f64,
    pub mbb: Band,
    pub default: Band,
    #[serde(default)]
    pub overrides: BTreeMap<String, Band>,
}

impl Default for VoltageBands {
    fn default() -> Self {
        Self {
            v_base: 400.0,
            mbb: Band {
                min: 1.0,
                max: 1.0,
                oltc_min: 0.9,
                oltc_max: 1.1,
            },
            default: Band {
                min: 0.95,
                max: 1.03,
                oltc_min: 0.9,
                oltc_max: 1.1,
            },
            overrides: BTreeMap::new(),
        }
    }
}

impl VoltageBands {
    pub fn band(&self, bus: &Bus) -> Band {
        if let Some(b) = self.overrides.get(&bus.id) {
            return *b;
        }
        if bus.kind == BusKind::Mbb {
            self.mbb
        } else {
            self.default
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bands = [self.mbb, self.default].into_iter().chain(self.overrides.values().copied());
        for b in bands {
            if !(b.oltc_min <= b.min && b.min <= b.max && b.max <= b.oltc_max && b.oltc_min > 0.0) {
                return Err(Error::invalid(format!("inconsistent voltage band {b:?}")));
            }
        }
        if !(self.v_base > 0.0) {
            return Err(Error::invalid("v_base must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildingProfiles {
    /// Appliance active power in kW.
    pub elec: Vec<f64>,
    /// Appliance reactive power in kVAr; derived from `elec` when absent.
    #[serde(default)]
    pub elec_q: Option<Vec<f64>>,
    /// Space heating in kW thermal.
    pub space_heat: Vec<f64>,
    /// Hot water in kW thermal.
    pub hot_water: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mobility {
    /// Daily charging demand of all vehicles of the building in kWh.
    pub daily_kwh: f64,
    pub bev_count: u32,
    pub arrival_hour: u32,
    pub deadline_hour: u32,
}

impl Mobility {
    pub fn none() -> Self {
        Self {
            daily_kwh: 0.0,
            bev_count: 0,
            arrival_hour: 18,
            deadline_hour: 8,
        }
    }

    /// Arrival at 17, 18 or 19 h pairs with a 7, 8 or 9 h deadline.
    pub fn paired(arrival_hour: u32, bev_count: u32, kwh_per_bev: f64) -> Self {
        Self {
            daily_kwh: kwh_per_bev * f64::from(bev_count),
            bev_count,
            arrival_hour,
            deadline_hour: (arrival_hour + 14) % 24,
        }
    }

    /// Whether a vehicle is plugged in during hour-of-day `h`.
    pub fn in_window(&self, h: u32) -> bool {
        let (a, d) = (self.arrival_hour, self.deadline_hour);
        if a < d {
            a <= h && h < d
        } else {
            h >= a || h < d
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub bus: String,
    /// Usable roof area in m².
    pub roof_area: f64,
    pub profiles: BuildingProfiles,
    pub mobility: Mobility,
}

impl Building {
    pub fn elec_q(&self, hour: usize, q_over_p: f64) -> f64 {
        match &self.profiles.elec_q {
            Some(q) => q[hour],
            None => q_over_p * self.profiles.elec[hour],
        }
    }

    pub fn heat_demand(&self, hour: usize) -> f64 {
        self.profiles.space_heat[hour] + self.profiles.hot_water[hour]
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let p = &self.profiles;
        let mut series: Vec<(&str, &Vec<f64>)> =
            vec![("elec", &p.elec), ("space_heat", &p.space_heat), ("hot_water", &p.hot_water)];
        if let Some(q) = &p.elec_q {
            series.push(("elec_q", q));
        }
        for (name, s) in series {
            if s.len() != horizon {
                return Err(Error::invalid(format!(
                    "building `{}`: {name} has {} values, horizon is {horizon}",
                    self.id,
                    s.len()
                )));
            }
            if let Some(bad) = s.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return Err(Error::invalid(format!("building `{}`: {name} contains {bad}", self.id)));
            }
        }
        if !(self.roof_area >= 0.0) {
            return Err(Error::invalid(format!("building `{}`: negative roof area", self.id)));
        }
        let m = &self.mobility;
        if !(m.daily_kwh >= 0.0) || m.arrival_hour >= 24 || m.deadline_hour >= 24 || m.arrival_hour == m.deadline_hour {
            return Err(Error::invalid(format!("building `{}`: invalid mobility {m:?}", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestmentCost {
    /// One-off cost when the component is installed at all.
    #[serde(default)]
    pub fixed: f64,
    /// Cost per unit of capacity.
    #[serde(default)]
    pub variable: f64,
    /// Yearly O&M per unit of capacity.
    #[serde(default)]
    pub om_per_unit: f64,
    /// Yearly O&M as a fraction of the capital cost.
    #[serde(default)]
    pub om_fraction: f64,
    pub wacc: f64,
    pub lifetime: f64,
}

impl InvestmentCost {
    /// Annual cost per unit of capacity.
    pub fn annual_variable(&self) -> Result<f64> {
        let af = annuity_factor(self.wacc, self.lifetime)?;
        Ok(self.variable * (af + self.om_fraction) + self.om_per_unit)
    }

    /// Annual cost of the installation decision itself.
    pub fn annual_fixed(&self) -> Result<f64> {
        let af = annuity_factor(self.wacc, self.lifetime)?;
        Ok(self.fixed * (af + self.om_fraction))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    pub cost: InvestmentCost,
    pub cos_phi_min: f64,
    /// Installable kW per m² of roof.
    pub roof_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatPumpParams {
    pub cost: InvestmentCost,
    /// Capacity bound for the install binary; per-building default when absent.
    #[serde(default)]
    pub big_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    pub energy_cost: InvestmentCost,
    pub power_cost: InvestmentCost,
    pub eta_ch: f64,
    pub eta_dch: f64,
    #[serde(default)]
    pub self_discharge: f64,
    /// Fixed energy-to-power ratio in hours, if any.
    #[serde(default)]
    pub etp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingParams {
    /// Charging station rating per vehicle in kW.
    pub rating_kw: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEconomics {
    pub cable_wacc: f64,
    pub cable_lifetime: f64,
    pub oltc_wacc: f64,
    pub oltc_lifetime: f64,
    pub oltc_om_fraction: f64,
}

/// Hourly exogenous series, all of horizon length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogSeries {
    pub cop: Vec<f64>,
    pub cf_pv: Vec<f64>,
    pub price_import: Vec<f64>,
    pub price_feed_in: Vec<f64>,
    pub price_qcomp: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechnoCatalog {
    pub pv: PvParams,
    pub heat_pump: HeatPumpParams,
    pub battery: StorageParams,
    pub thermal_storage: StorageParams,
    pub charging: ChargingParams,
    /// Reactive to active power ratio of appliance load.
    pub q_over_p: f64,
    pub grid: GridEconomics,
    pub series: CatalogSeries,
}

pub const OLTC_OPTIONS: [(f64, f64); 9] = [
    (160.0, 13000.0),
    (250.0, 16000.0),
    (400.0, 17900.0),
    (630.0, 19600.0),
    (800.0, 20800.0),
    (1000.0, 21900.0),
    (1250.0, 24300.0),
    (1600.0, 26600.0),
    (2000.0, 29500.0),
];

/// Standard NAYY cable types: (name, r ohm/km, x ohm/km, kVA).
pub const CABLE_TYPES: [(&str, f64, f64, f64); 5] = [
    ("NAYY 4x150", 0.206, 0.080, 121.0),
    ("NAYY 4x50", 0.387, 0.102, 60.0),
    ("NAYY 4x35", 0.524, 0.105, 48.0),
    ("NAYY 4x25", 0.727, 0.110, 38.0),
    ("NAYY 4x16", 1.150, 0.116, 30.0),
];

impl TechnoCatalog {
    /// Default German residential parameter set with constant prices.
    pub fn table_v(cop: Vec<f64>, cf_pv: Vec<f64>) -> Self {
        let h = cop.len();
        let roundtrip = libm::sqrt(0.96);
        Self {
            pv: PvParams {
                cost: InvestmentCost {
                    fixed: 4074.0,
                    variable: 914.0,
                    om_per_unit: 12.5,
                    om_fraction: 0.0,
                    wacc: 0.02,
                    lifetime: 20.0,
                },
                cos_phi_min: 0.95,
                roof_factor: 0.1,
            },
            heat_pump: HeatPumpParams {
                cost: InvestmentCost {
                    fixed: 5924.0,
                    variable: 1440.0,
                    om_per_unit: 60.0,
                    om_fraction: 0.0,
                    wacc: 0.02,
                    lifetime: 18.0,
                },
                big_m: None,
            },
            battery: StorageParams {
                energy_cost: InvestmentCost {
                    variable: 1000.0,
                    om_fraction: 0.01,
                    wacc: 0.02,
                    lifetime: 20.0,
                    ..Default::default()
                },
                power_cost: InvestmentCost {
                    wacc: 0.02,
                    lifetime: 20.0,
                    ..Default::default()
                },
                eta_ch: roundtrip,
                eta_dch: roundtrip,
                self_discharge: 0.0,
                etp: Some(3.0),
            },
            thermal_storage: StorageParams {
                energy_cost: InvestmentCost {
                    variable: 194.0,
                    wacc: 0.02,
                    lifetime: 30.0,
                    ..Default::default()
                },
                power_cost: InvestmentCost {
                    variable: 2.5,
                    wacc: 0.02,
                    lifetime: 30.0,
                    ..Default::default()
                },
                eta_ch: 1.0,
                eta_dch: 1.0,
                self_discharge: 0.0,
                etp: None,
            },
            charging: ChargingParams {
                rating_kw: 11.0,
                efficiency: 1.0,
            },
            q_over_p: 0.25,
            grid: GridEconomics {
                cable_wacc: 0.06,
                cable_lifetime: 40.0,
                oltc_wacc: 0.06,
                oltc_lifetime: 40.0,
                oltc_om_fraction: 0.01,
            },
            series: CatalogSeries {
                cop,
                cf_pv,
                price_import: vec![0.45; h],
                price_feed_in: vec![0.06; h],
                price_qcomp: vec![0.045; h],
            },
        }
    }

    pub fn horizon(&self) -> usize {
        self.series.cop.len()
    }

    /// Heat pump capacity bound for `building`.
    pub fn big_m(&self, building: &Building) -> f64 {
        if let Some(m) = self.heat_pump.big_m {
            return m;
        }
        let peak = max_of((0..building.profiles.space_heat.len()).map(|t| building.heat_demand(t)));
        let cop = min_of(self.series.cop.iter().copied());
        if peak <= 0.0 || !cop.is_finite() {
            0.0
        } else {
            peak / cop
        }
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.horizon();
        let s = &self.series;
        for (name, series) in [
            ("cop", &s.cop),
            ("cf_pv", &s.cf_pv),
            ("price_import", &s.price_import),
            ("price_feed_in", &s.price_feed_in),
            ("price_qcomp", &s.price_qcomp),
        ] {
            if series.len() != h {
                return Err(Error::invalid(format!("catalog series {name} has {} values, horizon is {h}", series.len())));
            }
            if series.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("catalog series {name} contains non-finite values")));
            }
        }
        if s.cop.iter().any(|&c| c <= 0.0) {
            return Err(Error::invalid("cop must be positive everywhere"));
        }
        if s.cf_pv.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::invalid("cf_pv must lie in [0, 1]"));
        }
        for (name, st) in [("battery", &self.battery), ("thermal storage", &self.thermal_storage)] {
            for eta in [st.eta_ch, st.eta_dch] {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(Error::invalid(format!("{name} efficiency {eta} outside (0, 1]")));
                }
            }
            if !(0.0..1.0).contains(&st.self_discharge) {
                return Err(Error::invalid(format!("{name} self-discharge outside [0, 1)")));
            }
        }
        if !(self.charging.efficiency > 0.0 && self.charging.efficiency <= 1.0) {
            return Err(Error::invalid("charging efficiency outside (0, 1]"));
        }
        if !(self.pv.cos_phi_min > 0.0 && self.pv.cos_phi_min <= 1.0) {
            return Err(Error::invalid("cos_phi_min outside (0, 1]"));
        }
        for cost in [
            &self.pv.cost,
            &self.heat_pump.cost,
            &self.battery.energy_cost,
            &self.battery.power_cost,
            &self.thermal_storage.energy_cost,
            &self.thermal_storage.power_cost,
        ] {
            annuity_factor(cost.wacc, cost.lifetime)?;
        }
        annuity_factor(self.grid.cable_wacc, self.grid.cable_lifetime)?;
        annuity_factor(self.grid.oltc_wacc, self.grid.oltc_lifetime)?;
        Ok(())
    }

    /// tan(acos(cos_phi_min)), the PV reactive power ratio limit.
    pub fn pv_tan_phi(&self) -> f64 {
        let c = self.pv.cos_phi_min;
        libm::sqrt(1.0 - c * c) / c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeStep {
    /// Index into the hourly input series.
    pub hour: usize,
    /// Number of hours this step stands for.
    pub weight: f64,
}

impl TimeStep {
    pub fn hour_of_day(&self) -> u32 {
        (self.hour % 24) as u32
    }
}

/// Ordered model timesteps grouped into periods. Storage states are cyclic
/// within each period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: Vec<TimeStep>,
    periods: Vec<Range<usize>>,
}

impl TimeGrid {
    pub fn new(steps: Vec<TimeStep>, periods: Vec<Range<usize>>) -> Result<Self> {
        let mut next = 0;
        for p in &periods {
            if p.start != next || p.end <= p.start {
                return Err(Error::invalid("periods must tile the timesteps contiguously"));
            }
            next = p.end;
        }
        if next != steps.len() {
            return Err(Error::invalid("periods must cover every timestep"));
        }
        if steps.iter().any(|s| !(s.weight > 0.0) || !s.weight.is_finite()) {
            return Err(Error::invalid("timestep weights must be positive"));
        }
        Ok(Self { steps, periods })
    }

    /// All `hours` steps as one period, each weighted so the grid stands for
    /// `represented_hours`.
    pub fn full(hours: usize, represented_hours: f64) -> Result<Self> {
        if hours == 0 {
            return Err(Error::invalid("empty horizon"));
        }
        let w = represented_hours / hours as f64;
        let steps = (0..hours).map(|hour| TimeStep { hour, weight: w }).collect();
        Self::new(steps, vec![0..hours])
    }

    pub fn steps(&self) -> &[TimeStep] {
        &self.steps
    }

    pub fn periods(&self) -> &[Range<usize>] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Predecessor of step `k`, wrapping to the end of its period.
    pub fn prev(&self, k: usize) -> usize {
        let p = self.period_of(k);
        if k == p.start {
            p.end - 1
        } else {
            k - 1
        }
    }

    pub fn period_of(&self, k: usize) -> Range<usize> {
        self.periods
            .iter()
            .find(|p| p.contains(&k))
            .cloned()
            .unwrap_or(0..self.steps.len())
    }

    pub fn total_weight(&self) -> f64 {
        self.steps.iter().map(|s| s.weight).sum()
    }

    pub fn max_hour(&self) -> Option<usize> {
        self.steps.iter().map(|s| s.hour).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cable(name: &str) -> CableType {
        CableType {
            name: name.to_string(),
            r: 0.206,
            x: 0.08,
            s_max: 121.0,
            c_install: 90.0,
            c_material: 10.0,
        }
    }

    fn bus(id: &str, kind: BusKind, pred: Option<&str>) -> Bus {
        Bus {
            id: id.to_string(),
            kind,
            predecessor: pred.map(ToString::to_string),
        }
    }

    fn line(from: &str, to: &str) -> LineSection {
        LineSection {
            from: from.to_string(),
            to: to.to_string(),
            length: 50.0,
            cable: "c".to_string(),
            existing: CableSetting::I,
        }
    }

    fn chain() -> Network {
        Network {
            buses: vec![
                bus("mbb", BusKind::Mbb, None),
                bus("a", BusKind::Junction, Some("mbb")),
                bus("b", BusKind::Load, Some("a")),
            ],
            lines: vec![line("mbb", "a"), line("a", "b")],
            cables: vec![cable("c")],
            transformers: vec![TransformerOption::frt(400.0)],
        }
    }

    #[test]
    fn chain_is_valid() {
        assert!(validate_network(&chain()).is_valid());
        let topo = chain().topology().unwrap();
        assert_eq!(topo.order, vec![0, 1, 2]);
        assert_eq!(topo.path_to(2), vec![0, 1, 2]);
    }

    #[test]
    fn two_mbbs_reported() {
        let mut n = chain();
        n.buses.push(bus("m2", BusKind::Mbb, None));
        let r = validate_network(&n);
        assert!(r.violations.iter().any(|v| v == "multiple roots"));
    }

    #[test]
    fn cycle_reported() {
        let mut n = chain();
        n.buses[1].predecessor = Some("b".to_string());
        let r = validate_network(&n);
        assert!(r.violations.iter().any(|v| v == "not a tree"));
    }

    #[test]
    fn report_is_order_independent() {
        let mut n = chain();
        n.buses.push(bus("m2", BusKind::Mbb, None));
        n.lines[1].length = -1.0;
        let a = validate_network(&n);
        n.buses.reverse();
        n.lines.reverse();
        assert_eq!(a, validate_network(&n));
        assert_eq!(a, validate_network(&n));
    }

    #[test]
    fn cable_settings_scale() {
        let c = cable("c");
        assert_eq!(effective_cable_params(&c, CableSetting::I), (121.0, 0.206, 0.08));
        let (k, r, x) = effective_cable_params(&c, CableSetting::II);
        assert_eq!((k, r, x), (242.0, 0.103, 0.04));
    }

    #[test]
    fn window_wraps_midnight() {
        let m = Mobility::paired(18, 1, 5.15);
        assert_eq!(m.deadline_hour, 8);
        let hours: Vec<u32> = (0..24).filter(|&h| m.in_window(h)).collect();
        assert_eq!(hours.len(), 14);
        assert!(m.in_window(18) && m.in_window(7) && !m.in_window(8));
    }

    #[test]
    fn cyclic_prev_within_period() {
        let steps = (0..6).map(|hour| TimeStep { hour, weight: 1.0 }).collect();
        let g = TimeGrid::new(steps, vec![0..3, 3..6]).unwrap();
        assert_eq!(g.prev(0), 2);
        assert_eq!(g.prev(3), 5);
        assert_eq!(g.prev(4), 3);
    }
}
