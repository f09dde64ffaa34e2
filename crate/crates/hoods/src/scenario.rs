//! Scenario files: a top-level `scenario.toml` naming a network, a building
//! list, a catalog and a directory of hourly CSV series.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use hoods_core::assembly::Instance;
use hoods_core::cost::annuity_factor;
use hoods_core::domain::{
    validate_network, Building, BuildingProfiles, Bus, CableType, CatalogSeries, ChargingParams, GridEconomics,
    HeatPumpParams, LineSection, Mobility, Network, PvParams, StorageParams, TechnoCatalog, TransformerOption,
    VoltageBands,
};
use hoods_core::model::SolveParams;
use hoods_core::paradigms::{AggregationConfig, ParadigmId};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// One problem found while loading, with the file and (if known) line.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadError {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl LoadError {
    fn new(file: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            file: file.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file.display(), l, self.message),
            None => write!(f, "{}: {}", self.file.display(), self.message),
        }
    }
}

/// All problems found in one load attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadErrors(pub Vec<LoadError>);

impl fmt::Display for LoadErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadErrors {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_solver")]
    pub name: String,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<u32>,
}

fn default_solver() -> String {
    "highs".into()
}

fn default_gap() -> f64 {
    1e-4
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            name: default_solver(),
            gap: default_gap(),
            time_limit: None,
            threads: None,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolveParams {
        SolveParams {
            mip_gap: self.gap,
            time_limit: self.time_limit,
            threads: self.threads,
            ..SolveParams::default()
        }
    }
}

/// Contents of `scenario.toml`. File references are relative to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Hours of operation the input horizon stands for, typically 8760.
    pub represented_hours: f64,
    pub network: PathBuf,
    pub buildings: PathBuf,
    pub catalog: PathBuf,
    pub series_dir: PathBuf,
    #[serde(default = "default_paradigm")]
    pub paradigm: String,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// First timestamp of every series.
    #[serde(default = "default_start")]
    pub start: String,
}

fn default_paradigm() -> String {
    ParadigmId::CoorPlusFlexPlus.key().into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_start() -> String {
    "2023-01-01T00:00".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformerKind {
    Frt,
    Oltc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerEntry {
    pub name: String,
    pub kind: TransformerKind,
    /// Rated power in kVA.
    pub capacity: f64,
    /// Capital cost; annualized with the catalog's OLTC economics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capex: Option<f64>,
    /// Annual cost, used as given when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annualized_cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default)]
    pub bands: VoltageBands,
    pub buses: Vec<Bus>,
    pub cables: Vec<CableType>,
    pub lines: Vec<LineSection>,
    pub transformers: Vec<TransformerEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingEntry {
    pub id: String,
    pub bus: String,
    pub roof_area: f64,
    pub elec: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elec_q: Option<PathBuf>,
    pub space_heat: PathBuf,
    pub hot_water: PathBuf,
    #[serde(default = "Mobility::none")]
    pub mobility: Mobility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildingsFile {
    pub buildings: Vec<BuildingEntry>,
}

/// A series given as a CSV file name or as a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    Constant(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesRefs {
    pub cop: SeriesSource,
    pub cf_pv: SeriesSource,
    pub price_import: SeriesSource,
    pub price_feed_in: SeriesSource,
    pub price_qcomp: SeriesSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub q_over_p: f64,
    pub pv: PvParams,
    pub heat_pump: HeatPumpParams,
    pub battery: StorageParams,
    pub thermal_storage: StorageParams,
    pub charging: ChargingParams,
    pub grid: GridEconomics,
    pub series: SeriesRefs,
}

/// A loaded, validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// Directory holding `scenario.toml`.
    pub root: PathBuf,
    pub config: ScenarioConfig,
    pub instance: Instance,
}

impl Scenario {
    pub fn paradigm(&self) -> hoods_core::Result<ParadigmId> {
        self.config.paradigm.parse()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.root.join(&self.config.output)
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, errors: &mut Vec<LoadError>) -> Option<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            errors.push(LoadError::new(path, None, format!("cannot read file: {e}")));
            return None;
        }
    };
    match toml::from_str(&text) {
        Ok(v) => Some(v),
        Err(e) => {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            errors.push(LoadError::new(path, line, e.message().to_string()));
            None
        }
    }
}

/// Reads a `timestamp,value` CSV. Timestamps must be hourly and start at
/// `start`.
pub fn read_series(path: &Path, start: NaiveDateTime) -> Result<Vec<f64>, Vec<LoadError>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| vec![LoadError::new(path, None, format!("cannot read file: {e}"))])?;
    let header = reader
        .headers()
        .map_err(|e| vec![LoadError::new(path, Some(1), e.to_string())])?
        .clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "value" {
        return Err(vec![LoadError::new(path, Some(1), "expected header `timestamp,value`")]);
    }
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                errors.push(LoadError::new(path, Some(line), e.to_string()));
                continue;
            }
        };
        let expected = start + Duration::hours(i as i64);
        match NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT) {
            Ok(ts) if ts == expected => {}
            Ok(ts) => errors.push(LoadError::new(
                path,
                Some(line),
                format!("timestamp {ts} out of sequence, expected {}", expected.format(TIMESTAMP_FORMAT)),
            )),
            Err(e) => errors.push(LoadError::new(path, Some(line), format!("bad timestamp `{}`: {e}", &rec[0]))),
        }
        match rec[1].parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => errors.push(LoadError::new(path, Some(line), format!("bad value `{}`", &rec[1]))),
        }
        if errors.len() > 20 {
            break;
        }
    }
    if errors.is_empty() {
        Ok(values)
    } else {
        Err(errors)
    }
}

pub fn write_series(path: &Path, start: NaiveDateTime, values: &[f64]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "value"])?;
    for (i, v) in values.iter().enumerate() {
        let ts = start + Duration::hours(i as i64);
        w.write_record([ts.format(TIMESTAMP_FORMAT).to_string(), v.to_string()])?;
    }
    w.flush()
}

fn parse_start(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .ok()
        .or_else(|| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().and_then(|d| d.and_hms_opt(0, 0, 0)))
}

struct SeriesLoader<'a> {
    dir: PathBuf,
    start: NaiveDateTime,
    errors: &'a mut Vec<LoadError>,
    /// Horizon and the file it was taken from.
    horizon: Option<(usize, PathBuf)>,
}

impl SeriesLoader<'_> {
    fn file(&mut self, name: &Path) -> Vec<f64> {
        let path = self.dir.join(name);
        match read_series(&path, self.start) {
            Ok(v) => {
                match &self.horizon {
                    None => self.horizon = Some((v.len(), path)),
                    Some((h, from)) if *h != v.len() => self.errors.push(LoadError::new(
                        &path,
                        None,
                        format!("series has {} values, horizon is {h} (from {})", v.len(), from.display()),
                    )),
                    Some(_) => {}
                }
                v
            }
            Err(mut e) => {
                self.errors.append(&mut e);
                Vec::new()
            }
        }
    }
}

/// Loads and validates the scenario at `path` (a `scenario.toml` or the
/// directory holding one).
pub fn load_scenario(path: &Path) -> Result<Scenario, LoadErrors> {
    let file = if path.is_dir() { path.join("scenario.toml") } else { path.to_path_buf() };
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut errors = Vec::new();
    let config: Option<ScenarioConfig> = read_toml(&file, &mut errors);
    let Some(config) = config else {
        return Err(LoadErrors(errors));
    };
    if let Err(e) = config.paradigm.parse::<ParadigmId>() {
        errors.push(LoadError::new(&file, None, e.to_string()));
    }
    if !(config.represented_hours > 0.0) {
        errors.push(LoadError::new(&file, None, "represented_hours must be positive"));
    }
    let start = parse_start(&config.start).unwrap_or_else(|| {
        errors.push(LoadError::new(&file, None, format!("bad start timestamp `{}`", config.start)));
        NaiveDateTime::default()
    });

    let net_path = root.join(&config.network);
    let bld_path = root.join(&config.buildings);
    let cat_path = root.join(&config.catalog);
    let net: Option<NetworkFile> = read_toml(&net_path, &mut errors);
    let bld: Option<BuildingsFile> = read_toml(&bld_path, &mut errors);
    let cat: Option<CatalogFile> = read_toml(&cat_path, &mut errors);
    let (Some(net), Some(bld), Some(cat)) = (net, bld, cat) else {
        return Err(LoadErrors(errors));
    };

    let mut series = SeriesLoader {
        dir: root.join(&config.series_dir),
        start,
        errors: &mut errors,
        horizon: None,
    };
    let mut resolved: Vec<(&str, SeriesSource, Vec<f64>)> = Vec::new();
    for (name, src) in [
        ("cop", &cat.series.cop),
        ("cf_pv", &cat.series.cf_pv),
        ("price_import", &cat.series.price_import),
        ("price_feed_in", &cat.series.price_feed_in),
        ("price_qcomp", &cat.series.price_qcomp),
    ] {
        let src = src.clone();
        let v = match &src {
            SeriesSource::File(f) => series.file(f),
            SeriesSource::Constant(_) => Vec::new(),
        };
        resolved.push((name, src, v));
    }
    let mut buildings = Vec::with_capacity(bld.buildings.len());
    for b in &bld.buildings {
        let elec = series.file(&b.elec);
        let elec_q = b.elec_q.as_ref().map(|f| series.file(f));
        let space_heat = series.file(&b.space_heat);
        let hot_water = series.file(&b.hot_water);
        buildings.push(Building {
            id: b.id.clone(),
            bus: b.bus.clone(),
            roof_area: b.roof_area,
            profiles: BuildingProfiles {
                elec,
                elec_q,
                space_heat,
                hot_water,
            },
            mobility: b.mobility.clone(),
        });
    }
    let horizon = series.horizon.as_ref().map(|h| h.0);
    let Some(horizon) = horizon else {
        errors.push(LoadError::new(&cat_path, None, "no series file defines the horizon"));
        return Err(LoadErrors(errors));
    };
    let mut take = |name: &str| -> Vec<f64> {
        let (_, src, v) = resolved.iter_mut().find(|r| r.0 == name).expect("known series");
        match src {
            SeriesSource::Constant(c) => vec![*c; horizon],
            SeriesSource::File(_) => std::mem::take(v),
        }
    };
    let series = CatalogSeries {
        cop: take("cop"),
        cf_pv: take("cf_pv"),
        price_import: take("price_import"),
        price_feed_in: take("price_feed_in"),
        price_qcomp: take("price_qcomp"),
    };
    let catalog = TechnoCatalog {
        pv: cat.pv,
        heat_pump: cat.heat_pump,
        battery: cat.battery,
        thermal_storage: cat.thermal_storage,
        charging: cat.charging,
        q_over_p: cat.q_over_p,
        grid: cat.grid,
        series,
    };

    let mut transformers = Vec::with_capacity(net.transformers.len());
    for t in &net.transformers {
        let annual = match (t.annualized_cost, t.capex, t.kind) {
            (Some(a), _, _) => a,
            (None, Some(c), _) => match annuity_factor(catalog.grid.oltc_wacc, catalog.grid.oltc_lifetime) {
                Ok(af) => c * (af + catalog.grid.oltc_om_fraction),
                Err(e) => {
                    errors.push(LoadError::new(&cat_path, None, e.to_string()));
                    0.0
                }
            },
            (None, None, TransformerKind::Frt) => 0.0,
            (None, None, TransformerKind::Oltc) => {
                errors.push(LoadError::new(&net_path, None, format!("transformer `{}` needs capex or annualized_cost", t.name)));
                0.0
            }
        };
        transformers.push(TransformerOption {
            name: t.name.clone(),
            capacity: t.capacity,
            is_oltc: t.kind == TransformerKind::Oltc,
            annualized_cost: annual,
        });
    }
    let network = Network {
        buses: net.buses,
        lines: net.lines,
        cables: net.cables,
        transformers,
    };

    // Cross-file references.
    let bus_ids: BTreeSet<&str> = network.buses.iter().map(|b| b.id.as_str()).collect();
    let cable_ids: BTreeSet<&str> = network.cables.iter().map(|c| c.name.as_str()).collect();
    for l in &network.lines {
        for end in [&l.from, &l.to] {
            if !bus_ids.contains(end.as_str()) {
                errors.push(LoadError::new(&net_path, None, format!("line {}-{} references unknown bus `{end}`", l.from, l.to)));
            }
        }
        if !cable_ids.contains(l.cable.as_str()) {
            errors.push(LoadError::new(&net_path, None, format!("line {}-{} references unknown cable `{}`", l.from, l.to, l.cable)));
        }
    }
    for b in &buildings {
        if !bus_ids.contains(b.bus.as_str()) {
            errors.push(LoadError::new(&bld_path, None, format!("building `{}` references unknown bus `{}`", b.id, b.bus)));
        }
    }
    if !errors.is_empty() {
        return Err(LoadErrors(errors));
    }
    for v in validate_network(&network).violations {
        errors.push(LoadError::new(&net_path, None, v));
    }
    if !errors.is_empty() {
        return Err(LoadErrors(errors));
    }

    let instance = Instance {
        network,
        bands: net.bands,
        buildings,
        catalog,
        represented_hours: config.represented_hours,
    };
    if let Err(e) = instance.validate() {
        return Err(LoadErrors(vec![LoadError::new(&file, None, e.to_string())]));
    }
    Ok(Scenario { root, config, instance })
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = toml::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(path, text)
}

/// Writes `instance` as a scenario under `dir`, one CSV per series.
pub fn write_scenario(dir: &Path, config: &ScenarioConfig, instance: &Instance) -> std::io::Result<()> {
    let start = parse_start(&config.start)
        .ok_or_else(|| std::io::Error::other(format!("bad start timestamp `{}`", config.start)))?;
    fs::create_dir_all(dir)?;
    let series_dir = dir.join(&config.series_dir);
    fs::create_dir_all(&series_dir)?;

    let net = NetworkFile {
        bands: instance.bands.clone(),
        buses: instance.network.buses.clone(),
        cables: instance.network.cables.clone(),
        lines: instance.network.lines.clone(),
        transformers: instance
            .network
            .transformers
            .iter()
            .map(|t| TransformerEntry {
                name: t.name.clone(),
                kind: if t.is_oltc { TransformerKind::Oltc } else { TransformerKind::Frt },
                capacity: t.capacity,
                capex: None,
                annualized_cost: Some(t.annualized_cost),
            })
            .collect(),
    };
    write_toml(&dir.join(&config.network), &net)?;

    let mut entries = Vec::with_capacity(instance.buildings.len());
    for b in &instance.buildings {
        let file = |kind: &str| PathBuf::from(format!("{}_{kind}.csv", b.id));
        write_series(&series_dir.join(file("elec")), start, &b.profiles.elec)?;
        write_series(&series_dir.join(file("space_heat")), start, &b.profiles.space_heat)?;
        write_series(&series_dir.join(file("hot_water")), start, &b.profiles.hot_water)?;
        if let Some(q) = &b.profiles.elec_q {
            write_series(&series_dir.join(file("elec_q")), start, q)?;
        }
        entries.push(BuildingEntry {
            id: b.id.clone(),
            bus: b.bus.clone(),
            roof_area: b.roof_area,
            elec: file("elec"),
            elec_q: b.profiles.elec_q.as_ref().map(|_| file("elec_q")),
            space_heat: file("space_heat"),
            hot_water: file("hot_water"),
            mobility: b.mobility.clone(),
        });
    }
    write_toml(&dir.join(&config.buildings), &BuildingsFile { buildings: entries })?;

    let c = &instance.catalog;
    let source = |name: &str, v: &[f64]| -> std::io::Result<SeriesSource> {
        match v.first() {
            Some(&x) if v.iter().all(|&y| y == x) => Ok(SeriesSource::Constant(x)),
            _ => {
                let f = PathBuf::from(format!("{name}.csv"));
                write_series(&series_dir.join(&f), start, v)?;
                Ok(SeriesSource::File(f))
            }
        }
    };
    // Always write cop so the horizon is defined by a file.
    let cop = PathBuf::from("cop.csv");
    write_series(&series_dir.join(&cop), start, &c.series.cop)?;
    let refs = SeriesRefs {
        cop: SeriesSource::File(cop),
        cf_pv: source("cf_pv", &c.series.cf_pv)?,
        price_import: source("price_import", &c.series.price_import)?,
        price_feed_in: source("price_feed_in", &c.series.price_feed_in)?,
        price_qcomp: source("price_qcomp", &c.series.price_qcomp)?,
    };
    let cat = CatalogFile {
        q_over_p: c.q_over_p,
        pv: c.pv.clone(),
        heat_pump: c.heat_pump.clone(),
        battery: c.battery.clone(),
        thermal_storage: c.thermal_storage.clone(),
        charging: c.charging.clone(),
        grid: c.grid.clone(),
        series: refs,
    };
    write_toml(&dir.join(&config.catalog), &cat)?;
    let mut cfg = config.clone();
    cfg.represented_hours = instance.represented_hours;
    write_toml(&dir.join("scenario.toml"), &cfg)
}

impl ScenarioConfig {
    /// Conventional file layout for a scenario directory.
    pub fn standard(represented_hours: f64) -> Self {
        Self {
            represented_hours,
            network: "network.toml".into(),
            buildings: "buildings.toml".into(),
            catalog: "catalog.toml".into(),
            series_dir: "series".into(),
            paradigm: default_paradigm(),
            aggregation: AggregationConfig::default(),
            solver: SolverConfig::default(),
            output: default_output(),
            start: default_start(),
        }
    }
}
