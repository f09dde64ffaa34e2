use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hoods::export::{cost_rows, export_comparison, export_results};
use hoods::fixture::{fixture_config, generate_fixture, FixtureOptions};
use hoods::{exit_code, load_scenario, solver_by_name, write_scenario, Scenario};
use hoods_core::assembly::{build_hoods, build_hoods_bui};
use hoods_core::paradigms::{aggregation_bundle, compare, run_all, run_paradigm, sizing_grid, ParadigmId, PlanResult};
use hoods_core::timeseries::{aggregate, fidelity_report};

#[derive(Parser)]
#[command(name = "hoods", version, about = "Joint planning of LV grids and the buildings connected to them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one planning paradigm and export its results.
    Plan(RunArgs),
    /// Run all four paradigms and compare their annual costs.
    Compare(RunArgs),
    /// Report how well typical periods represent the scenario's series.
    Aggregate(AggArgs),
    /// Generate a synthetic scenario.
    Fixture(FixtureArgs),
    /// Write the sizing model of a scenario as LP or MPS.
    ExportModel(ExportArgs),
}

#[derive(Args)]
struct AggFlags {
    /// Number of typical periods.
    #[arg(long)]
    typical_periods: Option<usize>,
    /// Length of a typical period in hours.
    #[arg(long)]
    period_hours: Option<usize>,
    /// Size on the full horizon.
    #[arg(long)]
    no_aggregation: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file or directory.
    scenario: PathBuf,
    /// coor+flex+, coor-flex-, coor-flex+ or coor-flex++.
    #[arg(long)]
    paradigm: Option<String>,
    #[command(flatten)]
    agg: AggFlags,
    /// Relative MIP gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Time limit per solve in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// highs or microlp.
    #[arg(long)]
    solver: Option<String>,
    /// Output directory, overriding the scenario's.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggArgs {
    scenario: PathBuf,
    #[command(flatten)]
    agg: AggFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    branches: usize,
    #[arg(long, default_value_t = 5)]
    buses_per_branch: usize,
    #[arg(long, default_value_t = 14)]
    days: usize,
    /// Large roofs and long feeders so PV feed-in stresses the grid.
    #[arg(long)]
    pv_surplus: bool,
    /// Directory to write the scenario into.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    /// The coordinated model over grid and buildings.
    Hoods,
    /// One building on its own.
    Building,
}

#[derive(Args)]
struct ExportArgs {
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "hoods")]
    model: ModelKind,
    /// Building id for `--model building`.
    #[arg(long)]
    building: Option<String>,
    #[command(flatten)]
    agg: AggFlags,
    /// Target file; `.mps` selects MPS, anything else LP.
    #[arg(long)]
    out: PathBuf,
}

fn apply_agg(sc: &mut Scenario, agg: &AggFlags) {
    let cfg = &mut sc.config.aggregation;
    if let Some(n) = agg.typical_periods {
        cfg.n_periods = n;
        cfg.enabled = true;
    }
    if let Some(h) = agg.period_hours {
        cfg.period_len = h;
    }
    if agg.no_aggregation {
        cfg.enabled = false;
    }
}

fn load(path: &Path) -> anyhow::Result<Scenario> {
    Ok(load_scenario(path)?)
}

fn print_result(r: &PlanResult) {
    println!("paradigm {}", r.paradigm);
    for s in &r.stages {
        println!(
            "  stage {:<28} {:<12} objective {:>14.2}  vars {:>7} rows {:>7} binaries {:>4}",
            s.stage, s.status.to_string(), s.objective, s.variables, s.constraints, s.binaries
        );
    }
    for (label, v) in cost_rows(&r.costs) {
        println!("  {label:<16} {v:>14.2}");
    }
    println!(
        "  transformer {} ({} kVA), curtailed {:.1} kWh/a ({:.3} % of PV)",
        r.reinforcement.transformer,
        r.reinforcement.transformer_kva,
        r.curtailed_energy,
        100.0 * r.curtailment_share()
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Plan(a) => {
            let (sc, solver, params, out) = prepare(&a)?;
            let p: ParadigmId = match &a.paradigm {
                Some(p) => p.parse()?,
                None => sc.paradigm()?,
            };
            let r = run_paradigm(&sc.instance, p, &sc.config.aggregation, solver.as_ref(), &params)?;
            print_result(&r);
            export_results(&sc.instance, &r, &out)?;
            println!("results written to {}", out.display());
        }
        Command::Compare(a) => {
            let (sc, solver, params, out) = prepare(&a)?;
            let results = run_all(&sc.instance, &sc.config.aggregation, solver.as_ref(), &params)?;
            for r in &results {
                print_result(r);
                export_results(&sc.instance, r, &out.join(r.paradigm.key()))?;
            }
            let report = compare(&results)?;
            print!("{:<16}", "");
            for p in &report.paradigms {
                print!(" {:>14}", p.key());
            }
            println!();
            for row in &report.rows {
                print!("{:<16}", row.label);
                for v in &row.values {
                    print!(" {v:>14.2}");
                }
                println!();
            }
            print!("{:<16}", "% of baseline");
            for v in &report.percentage {
                print!(" {v:>14.2}");
            }
            println!();
            export_comparison(&report, &out)?;
            println!("results written to {}", out.display());
        }
        Command::Aggregate(a) => {
            let mut sc = load(&a.scenario)?;
            apply_agg(&mut sc, &a.agg);
            let cfg = &sc.config.aggregation;
            let inst = &sc.instance;
            let bundle = aggregation_bundle(inst);
            let red = aggregate(&bundle, &[0, 1], cfg.n_periods, cfg.period_len, inst.represented_hours)?;
            let out = a.out.unwrap_or_else(|| sc.output_dir());
            fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("fidelity.csv"))?;
            w.write_record(["series", "peak_error", "mean_error"])?;
            let names = ["elec", "space_heat", "hot_water", "cf_pv", "cop"];
            let mut curves = csv::Writer::from_path(out.join("duration_curves.csv"))?;
            curves.write_record(["series", "rank", "original", "reduced"])?;
            for (name, s) in names.iter().zip(&bundle) {
                let rep = fidelity_report(s, &red);
                println!("{name:<12} peak error {:>8.4} %  mean error {:>8.4} %", 100.0 * rep.peak_error, 100.0 * rep.mean_error);
                w.write_record([name.to_string(), format!("{:.8}", rep.peak_error), format!("{:.8}", rep.mean_error)])?;
                for p in rep.duration_curve {
                    curves.write_record([name.to_string(), p.rank.to_string(), format!("{:.6}", p.original), format!("{:.6}", p.reduced)])?;
                }
            }
            w.flush()?;
            curves.flush()?;
            println!("typical periods {:?} with cardinality {:?}", red.representatives, red.cardinality);
        }
        Command::Fixture(a) => {
            let opts = FixtureOptions {
                seed: a.seed,
                n_branches: a.branches,
                buses_per_branch: a.buses_per_branch,
                days: a.days,
                pv_surplus: a.pv_surplus,
            };
            let inst = generate_fixture(&opts)?;
            write_scenario(&a.out, &fixture_config(&opts), &inst)?;
            println!(
                "wrote {} buses, {} buildings, {} h to {}",
                inst.network.buses.len(),
                inst.buildings.len(),
                inst.horizon(),
                a.out.display()
            );
        }
        Command::ExportModel(a) => {
            let mut sc = load(&a.scenario)?;
            apply_agg(&mut sc, &a.agg);
            let inst = &sc.instance;
            let time = sizing_grid(inst, &sc.config.aggregation)?;
            let spec = match a.model {
                ModelKind::Hoods => build_hoods(inst, &time)?.spec,
                ModelKind::Building => {
                    let Some(id) = &a.building else {
                        bail!(hoods_core::Error::InvalidArgument("--model building needs --building".into()));
                    };
                    let i = inst
                        .buildings
                        .iter()
                        .position(|b| &b.id == id)
                        .ok_or_else(|| hoods_core::Error::InvalidArgument(format!("unknown building `{id}`")))?;
                    build_hoods_bui(inst, i, &time, true)?.spec
                }
            };
            let text = if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("mps")) {
                spec.to_mps()
            } else {
                spec.to_lp()
            };
            if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
            println!(
                "{} variables ({} binary), {} constraints written to {}",
                spec.num_vars(),
                spec.num_binaries(),
                spec.num_constraints(),
                a.out.display()
            );
        }
    }
    Ok(())
}

type Prepared = (Scenario, Box<dyn hoods_core::model::Solver + Send + Sync>, hoods_core::model::SolveParams, PathBuf);

fn prepare(a: &RunArgs) -> anyhow::Result<Prepared> {
    let mut sc = load(&a.scenario)?;
    apply_agg(&mut sc, &a.agg);
    if let Some(g) = a.gap {
        sc.config.solver.gap = g;
    }
    if let Some(t) = a.time_limit {
        sc.config.solver.time_limit = Some(t);
    }
    if let Some(s) = &a.solver {
        sc.config.solver.name = s.clone();
    }
    let solver = solver_by_name(&sc.config.solver.name)?;
    let params = sc.config.solver.params();
    let out = a.out.clone().unwrap_or_else(|| sc.output_dir());
    Ok((sc, solver, params, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
