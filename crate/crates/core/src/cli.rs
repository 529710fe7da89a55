//! `chemoplan` command-line front end.

use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::Error;
use crate::export::{self, ArtifactWriter, Manifest};
use crate::model::PatientModel;
use crate::plan::{self, PlanRow, RunConfig};
use crate::service;
use crate::sim::{self, DoseSchedule};

#[derive(Debug, Parser)]
#[command(
    name = "chemoplan",
    version,
    about = "Chemotherapy dose scheduling with PK/PD models and MOPSO"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Patient parameter JSON (defaults to the built-in etoposide patient).
    #[arg(long, global = true)]
    pub patient: Option<PathBuf>,
    /// Run configuration JSON (sim, swarm, regions, output_dir).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed for the optimizer.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one dosing schedule and write its trajectory and report.
    Simulate {
        /// JSON array or single-column CSV of daily doses.
        schedule: PathBuf,
    },
    /// Search for Pareto-optimal schedules.
    Optimize {
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
        /// Evaluate particles on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Compare selected archive members in a plan table.
    Report {
        /// Archive or front JSON written by `optimize`.
        archive: PathBuf,
        /// Comma-separated member indices into the archive file.
        #[arg(long, value_delimiter = ',')]
        indices: Vec<usize>,
        /// Also pick one representative member per region.
        #[arg(long)]
        per_region: bool,
    },
    /// Run the HTTP API used by the plan explorer.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Optimization jobs allowed to run at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input or configuration (exit 2).
    Input(String),
    /// The model could not be integrated (exit 3).
    Simulation(String),
    /// The requested port is taken (exit 4).
    PortBusy(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Simulation(_) => 3,
            CliError::PortBusy(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Simulation(m) | CliError::PortBusy(m) | CliError::Other(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Simulation(_) => CliError::Simulation(e.to_string()),
            Error::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { schedule } => cmd_simulate(&cli.common, cfg, &schedule),
        Command::Optimize {
            population,
            generations,
            serial,
        } => cmd_optimize(&cli.common, cfg, population, generations, serial),
        Command::Report {
            archive,
            indices,
            per_region,
        } => cmd_report(&cli.common, cfg, &archive, &indices, per_region),
        Command::Serve { port, host, jobs } => cmd_serve(cfg, SocketAddr::new(host, port), jobs),
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.patient {
        cfg.patient = Some(plan::PatientSource::File(p.clone()));
    }
    if let Some(seed) = common.seed {
        cfg.swarm.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn manifest_config(cfg: &RunConfig, patient: &PatientModel) -> serde_json::Value {
    json!({ "run": cfg, "resolved_patient": patient })
}

fn cmd_simulate(_common: &CommonArgs, cfg: RunConfig, schedule_path: &Path) -> Result<(), CliError> {
    cfg.sim.validate()?;
    let patient = cfg.resolve_patient()?;
    let schedule = DoseSchedule::load(schedule_path, cfg.sim.dose_bounds)?;
    cfg.sim.check_schedule(&schedule).map_err(Error::from)?;
    let trajectory = sim::simulate(&schedule, &patient, &cfg.sim)?;
    let report = sim::report(&schedule, &trajectory, &patient);
    let objectives = sim::objectives_of(&trajectory, &cfg.sim);

    let mut manifest = Manifest::new("simulate", manifest_config(&cfg, &patient), None);
    manifest.config["schedule"] = json!(schedule.doses());
    let mut w = ArtifactWriter::create(&cfg.output_dir, manifest)?;
    let mut csv = Vec::new();
    trajectory
        .write_csv(&mut csv)
        .map_err(|e| CliError::Other(e.to_string()))?;
    w.write("trajectory.csv", &csv)?;
    let mut report_json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    report_json.push('\n');
    w.write("report.json", report_json.as_bytes())?;
    w.finish()?;

    println!("avg dose           {:.4} mg/m²", report.avg_dose);
    println!("avg concentration  {:.4} mg/L", report.avg_concentration);
    println!("avg neutrophils    {:.4e} cells/L", report.avg_circ);
    println!("nadir neutrophils  {:.4e} cells/L", objectives.min_circ);
    println!("cells remaining    {}", report.cells_remaining);
    if report.tumor_grew {
        println!("% reduction        0 (tumor grew)");
    } else {
        println!("% reduction        {:.6}", report.pct_reduction);
    }
    println!("feasible           {}", objectives.feasible);
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_optimize(
    _common: &CommonArgs,
    mut cfg: RunConfig,
    population: Option<usize>,
    generations: Option<usize>,
    serial: bool,
) -> Result<(), CliError> {
    if let Some(p) = population {
        cfg.swarm.population = p;
    }
    if let Some(g) = generations {
        cfg.swarm.generations = g;
    }
    if serial {
        cfg.swarm.parallel = false;
    }
    cfg.validate()?;
    let patient = cfg.resolve_patient()?;

    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let flag = interrupted.clone();
        // A second registration in the same process fails; the run still works.
        let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));
    }

    let total = cfg.swarm.generations;
    let outcome = plan::optimize(&patient, &cfg.sim, &cfg.swarm, |stats, _| {
        eprintln!(
            "gen {:>4}/{total}  archive {:>4}  best f1 {:.4e}  best f2 {:.4e}",
            stats.gen, stats.archive_size, stats.best_f1, stats.best_f2
        );
        if interrupted.load(Ordering::SeqCst) {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;

    let front = plan::classify_regions(outcome.archive.members(), cfg.regions);
    let mut manifest = Manifest::new("optimize", manifest_config(&cfg, &patient), Some(cfg.swarm.seed));
    manifest.partial = !outcome.completed;
    let mut w = ArtifactWriter::create(&cfg.output_dir, manifest)?;
    w.write(
        "archive.json",
        export::archive_to_json(outcome.archive.members()).as_bytes(),
    )?;
    w.write("stats.csv", export::stats_to_csv(&outcome.stats).as_bytes())?;
    w.write("front.json", plan::front_to_json(&front).as_bytes())?;
    w.finish()?;

    let feasible = front.iter().filter(|m| m.member.objectives.feasible).count();
    println!(
        "{} non-dominated schedules ({} feasible){}; wrote {}",
        front.len(),
        feasible,
        if outcome.completed {
            ""
        } else {
            " [partial: interrupted]"
        },
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_report(
    common: &CommonArgs,
    cfg: RunConfig,
    archive_path: &Path,
    indices: &[usize],
    per_region: bool,
) -> Result<(), CliError> {
    cfg.sim.validate()?;
    let patient = cfg.resolve_patient()?;
    let members = export::load_archive(archive_path)?;
    let mut picks: Vec<(String, usize)> = Vec::new();
    for &i in indices {
        if i >= members.len() {
            return Err(CliError::Input(format!(
                "index {i} is out of range for an archive of {} members",
                members.len()
            )));
        }
        picks.push((format!("#{i}"), i));
    }
    if per_region && !members.is_empty() {
        let front = plan::classify_regions(&members, cfg.regions);
        for r in plan::representatives(&front) {
            let m = &front[r].member;
            let idx = members
                .iter()
                .position(|x| x == m)
                .expect("front is a permutation of the archive");
            picks.push((format!("#{idx} {}", front[r].region.as_str()), idx));
        }
    }
    let rows: Vec<PlanRow> = picks
        .iter()
        .enumerate()
        .map(|(k, (tag, i))| {
            plan::plan_row(
                format!("Sol-{} {tag}", k + 1),
                &members[*i].position,
                &patient,
                &cfg.sim,
            )
        })
        .collect::<crate::Result<_>>()?;

    let table = plan::format_table(&rows);
    print!("{table}");
    std::io::stdout().flush().ok();
    if common.out.is_some() {
        let mut manifest = Manifest::new("report", manifest_config(&cfg, &patient), None);
        manifest.config["archive"] = json!(archive_path);
        manifest.config["indices"] = json!(picks.iter().map(|p| p.1).collect::<Vec<_>>());
        let mut w = ArtifactWriter::create(&cfg.output_dir, manifest)?;
        w.write("report_table.txt", table.as_bytes())?;
        w.write("report.csv", plan::rows_to_csv(&rows).as_bytes())?;
        w.finish()?;
    }
    Ok(())
}

fn cmd_serve(cfg: RunConfig, addr: SocketAddr, jobs: usize) -> Result<(), CliError> {
    cfg.validate()?;
    let state = service::AppState::new(cfg, jobs)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Other(e.to_string()))?;
    rt.block_on(async move {
        let listener = service::bind(addr).await.map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => CliError::PortBusy(format!("port {} is already in use", addr.port())),
            _ => CliError::Other(format!("cannot bind {addr}: {e}")),
        })?;
        let local = listener.local_addr().map_err(|e| CliError::Other(e.to_string()))?;
        println!("listening on http://{local}");
        std::io::stdout().flush().ok();
        service::serve(listener, state)
            .await
            .map_err(|e| CliError::Other(e.to_string()))
    })
}
