//! Deterministic synthetic test cases: a radial LV feeder in the style of
//! standard German reference grids with single-family houses, synthetic
//! weather and per-dwelling demand magnitudes typical for Germany.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hoods_core::assembly::Instance;
use hoods_core::domain::{
    Building, BuildingProfiles, Bus, BusKind, CableSetting, CableType, LineSection, Mobility, Network, TechnoCatalog,
    TransformerOption, VoltageBands, CABLE_TYPES, OLTC_OPTIONS,
};
use hoods_core::paradigms::AggregationConfig;
use hoods_core::Result;

use crate::scenario::ScenarioConfig;

/// Annual appliance demand per dwelling in kWh.
pub const ELEC_PER_DWELLING: f64 = 2300.0;
/// Annual heat demand per dwelling in kWh (space heat plus hot water).
pub const HEAT_PER_DWELLING: f64 = 11600.0;
pub const HOT_WATER_PER_DWELLING: f64 = 2000.0;
/// Daily charging demand per vehicle in kWh.
pub const KWH_PER_BEV: f64 = 5.15;
/// Annual PV yield in kWh per kWp.
pub const PV_FULL_LOAD_HOURS: f64 = 1147.0;
pub const INCUMBENT_KVA: f64 = 400.0;
pub const FEEDER_CABLE: &str = "NAYY 4x150";
pub const SERVICE_CABLE: &str = "NAYY 4x35";

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureOptions {
    pub seed: u64,
    pub n_branches: usize,
    pub buses_per_branch: usize,
    /// Number of days generated. A full year is 365; shorter horizons sample
    /// days spread evenly over the year and stand for 8760 h.
    pub days: usize,
    /// Large roofs, a sunny site and long feeders, so that PV feed-in
    /// stresses the grid.
    pub pv_surplus: bool,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            n_branches: 1,
            buses_per_branch: 5,
            days: 14,
            pv_surplus: false,
        }
    }
}

struct Weather {
    /// Outdoor temperature in °C per generated hour.
    temp: Vec<f64>,
    cf_pv: Vec<f64>,
    day_of_year: Vec<usize>,
}

fn day_of_year(k: usize, days: usize) -> usize {
    if days >= 365 {
        k % 365
    } else {
        k * 365 / days
    }
}

fn weather(rng: &mut ChaCha8Rng, days: usize, pv_hours: f64) -> Weather {
    let mut temp = Vec::with_capacity(days * 24);
    let mut cf = Vec::with_capacity(days * 24);
    let mut doys = Vec::with_capacity(days);
    for k in 0..days {
        let doy = day_of_year(k, days);
        doys.push(doy);
        let season = (2.0 * PI * (doy as f64 - 15.0) / 365.0).cos();
        let t_day = 9.0 - 10.0 * season + rng.random_range(-3.0..3.0);
        let clearness: f64 = rng.random_range(0.25..1.0);
        // Day length between roughly 8 h in winter and 16 h in summer.
        let half = 6.0 - 2.0 * season;
        let (rise, set) = (12.5 - half, 12.5 + half);
        let amp = 0.55 - 0.35 * season;
        for h in 0..24 {
            let hf = h as f64;
            temp.push(t_day + 3.0 * (2.0 * PI * (hf - 9.0) / 24.0).sin());
            let x = hf + 0.5;
            cf.push(if x > rise && x < set {
                amp * clearness * (PI * (x - rise) / (set - rise)).sin()
            } else {
                0.0
            });
        }
    }
    let h = cf.len() as f64;
    let annual: f64 = cf.iter().sum::<f64>() * 8760.0 / h;
    if annual > 0.0 {
        let s = pv_hours / annual;
        cf.iter_mut().for_each(|c| *c = (*c * s).min(1.0));
    }
    Weather {
        temp,
        cf_pv: cf,
        day_of_year: doys,
    }
}

/// Scales `raw` so that it stands for `annual` kWh over a year.
fn scale_to(raw: Vec<f64>, annual: f64) -> Vec<f64> {
    let h = raw.len() as f64;
    let total: f64 = raw.iter().sum::<f64>() * 8760.0 / h;
    if total <= 0.0 {
        return raw;
    }
    raw.into_iter().map(|x| x * annual / total).collect()
}

fn appliance_shape(h: usize) -> f64 {
    let hf = h as f64;
    let bump = |c: f64, w: f64| (-(hf - c) * (hf - c) / (2.0 * w * w)).exp();
    0.35 + 0.6 * bump(7.5, 1.5) + 0.3 * bump(12.5, 1.5) + 1.0 * bump(19.5, 2.0)
}

fn hot_water_shape(h: usize) -> f64 {
    let hf = h as f64;
    let bump = |c: f64, w: f64| (-(hf - c) * (hf - c) / (2.0 * w * w)).exp();
    0.05 + 1.0 * bump(7.0, 1.0) + 0.7 * bump(20.0, 1.5)
}

fn building_profiles(rng: &mut ChaCha8Rng, w: &Weather, dwellings: f64) -> BuildingProfiles {
    let n = w.temp.len();
    let level: f64 = rng.random_range(0.92..1.08);
    let mut elec = Vec::with_capacity(n);
    let mut sh = Vec::with_capacity(n);
    let mut hw = Vec::with_capacity(n);
    for t in 0..n {
        let h = t % 24;
        let doy = w.day_of_year[t / 24] as f64;
        let seasonal = 1.0 + 0.2 * (2.0 * PI * (doy - 15.0) / 365.0).cos();
        elec.push(appliance_shape(h) * seasonal * rng.random_range(0.6..1.4));
        sh.push((15.0 - w.temp[t]).max(0.0) * rng.random_range(0.85..1.15));
        hw.push(hot_water_shape(h) * rng.random_range(0.5..1.5));
    }
    BuildingProfiles {
        elec: scale_to(elec, level * ELEC_PER_DWELLING * dwellings),
        elec_q: None,
        space_heat: scale_to(sh, level * (HEAT_PER_DWELLING - HOT_WATER_PER_DWELLING) * dwellings),
        hot_water: scale_to(hw, level * HOT_WATER_PER_DWELLING * dwellings),
    }
}

fn cables() -> Vec<CableType> {
    CABLE_TYPES
        .iter()
        .map(|&(name, r, x, s_max)| CableType {
            name: name.to_string(),
            r,
            x,
            s_max,
            c_install: 90.0,
            c_material: 10.0,
        })
        .collect()
}

fn transformers(catalog: &TechnoCatalog) -> Result<Vec<TransformerOption>> {
    let mut out = vec![TransformerOption::frt(INCUMBENT_KVA)];
    for &(kva, capex) in &OLTC_OPTIONS {
        out.push(TransformerOption::oltc(kva, capex, &catalog.grid)?);
    }
    Ok(out)
}

/// Generates a fixture instance.
///
/// Every branch is a chain of junctions leaving the main busbar; each
/// junction feeds one house through a service line, and with an odd number
/// of buses per branch the last junction feeds a second house. A branch of
/// `b` buses therefore holds `ceil(b/2)` houses.
pub fn generate_fixture(opts: &FixtureOptions) -> Result<Instance> {
    if opts.days == 0 || opts.n_branches == 0 || opts.buses_per_branch == 0 {
        return Err(hoods_core::Error::InvalidArgument("fixture needs at least one day, branch and bus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pv_hours = if opts.pv_surplus { 1.6 * PV_FULL_LOAD_HOURS } else { PV_FULL_LOAD_HOURS };
    let w = weather(&mut rng, opts.days, pv_hours);
    let mean_t = w.temp.iter().sum::<f64>() / w.temp.len() as f64;
    let cop: Vec<f64> = w.temp.iter().map(|t| (3.5 + 0.06 * (t - mean_t)).clamp(2.0, 5.0)).collect();
    let catalog = TechnoCatalog::table_v(cop, w.cf_pv.clone());

    let mut buses = vec![Bus {
        id: "mbb".into(),
        kind: BusKind::Mbb,
        predecessor: None,
    }];
    let mut lines = Vec::new();
    let mut buildings = Vec::new();
    let feeder_scale = if opts.pv_surplus { 4.0 } else { 1.0 };
    let line = |lines: &mut Vec<LineSection>, from: &str, to: &str, length: f64, cable: &str| {
        lines.push(LineSection {
            from: from.into(),
            to: to.into(),
            length: (length * 10.0).round() / 10.0,
            cable: cable.into(),
            existing: CableSetting::I,
        });
    };
    for br in 1..=opts.n_branches {
        let b = opts.buses_per_branch;
        let junctions = b / 2;
        let houses = b - junctions;
        let mut prev = "mbb".to_string();
        let mut house_parents = Vec::with_capacity(houses);
        for j in 1..=junctions {
            let id = format!("b{br}_j{j}");
            buses.push(Bus {
                id: id.clone(),
                kind: BusKind::Junction,
                predecessor: Some(prev.clone()),
            });
            let len = rng.random_range(30.0..50.0) * feeder_scale;
            line(&mut lines, &prev, &id, len, FEEDER_CABLE);
            house_parents.push(id.clone());
            prev = id;
        }
        while house_parents.len() < houses {
            house_parents.push(prev.clone());
        }
        for (k, parent) in house_parents.iter().enumerate() {
            let id = format!("b{br}_l{}", k + 1);
            buses.push(Bus {
                id: id.clone(),
                kind: BusKind::Load,
                predecessor: Some(parent.clone()),
            });
            let len = rng.random_range(10.0..25.0);
            line(&mut lines, parent, &id, len, SERVICE_CABLE);
            let dwellings = if rng.random_bool(0.3) { 2.0 } else { 1.0 };
            let occupants: u32 = (0..dwellings as u32).map(|_| rng.random_range(1..=4u32)).sum();
            let arrival = [17, 18, 19][rng.random_range(0..3usize)];
            let roof = if opts.pv_surplus {
                rng.random_range(450.0..550.0)
            } else {
                rng.random_range(60.0..120.0)
            };
            let mut profiles = building_profiles(&mut rng, &w, dwellings);
            if opts.pv_surplus {
                // Little own demand, so most generation is fed in.
                for v in [&mut profiles.elec, &mut profiles.space_heat, &mut profiles.hot_water] {
                    v.iter_mut().for_each(|x| *x *= 0.25);
                }
            }
            buildings.push(Building {
                id: format!("h{br}_{}", k + 1),
                bus: id,
                roof_area: (roof * 10.0_f64).round() / 10.0,
                profiles,
                mobility: Mobility::paired(arrival, occupants / 2, KWH_PER_BEV),
            });
        }
    }
    let network = Network {
        buses,
        lines,
        cables: cables(),
        transformers: transformers(&catalog)?,
    };
    let inst = Instance {
        network,
        bands: VoltageBands::default(),
        buildings,
        catalog,
        represented_hours: 8760.0,
    };
    inst.validate()?;
    Ok(inst)
}

/// Scenario settings matching a generated fixture. Horizons shorter than
/// four weeks are planned without aggregation.
pub fn fixture_config(opts: &FixtureOptions) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::standard(8760.0);
    if opts.days < 28 {
        cfg.aggregation = AggregationConfig::disabled();
    }
    cfg
}
