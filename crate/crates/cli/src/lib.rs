//! Subcommand dispatch for the `betagas` binary.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error, 3 an
//! experiment ran but at least one PASS flag is unset.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use betagas::config::{Model, RecordFormat, RunConfig};
use betagas::exec::Execution;
use betagas::experiments::{
    control_escape, control_passes, escape_probability, fit_escape_exponent, laplace_ratio_for,
    phase_transition_report, trend_passes, EscapeRow, EscapeTable, ExponentFit, FitQuantity, PhaseReport,
};
use betagas::io::{self, EquilibriumSummary, Manifest};
use betagas::ratefn::CriticalityReport;
use betagas::sampler::{run_chains, ChainConfig, Checkpoint, Chain, Init, Observation};
use betagas::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_FAILED_FLAGS: i32 = 3;

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "betagas", version, about = "Critical β-ensembles: equilibrium measures, criticality scans and escape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the equilibrium measure; writes measure.csv and summary.json.
    Equilibrium(Common),
    /// Scan the effective potential for critical points off the support.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Reuse measure.csv from an earlier `equilibrium` output directory.
        #[arg(long)]
        equilibrium: Option<PathBuf>,
    },
    /// Run Monte Carlo chains from the `[sample]` section.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Continue the chains checkpointed in this directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the escape experiments of the `[experiment]` section.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Run a single β instead of the configured list.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Print the PASS flags of an experiment output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    quiet: bool,
}

/// A loaded configuration together with the run-level options.
struct Run {
    config: RunConfig,
    config_text: String,
    config_dir: PathBuf,
    out: PathBuf,
    seed: u64,
    workers: usize,
    execution: Execution,
    quiet: bool,
    started: Instant,
}

impl Run {
    fn open(common: &Common) -> Result<Self> {
        let config_text = std::fs::read_to_string(&common.config).map_err(|e| Error::Io {
            path: common.config.display().to_string(),
            source: e,
        })?;
        let config = RunConfig::from_toml(&config_text, &common.config)?;
        config.validate()?;
        let seed = common.seed.or(config.seed).unwrap_or(betagas::config::DEFAULT_SEED);
        std::fs::create_dir_all(&common.out).map_err(|e| Error::Io {
            path: common.out.display().to_string(),
            source: e,
        })?;
        let workers = if common.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            common.workers
        };
        Ok(Self {
            config,
            config_text,
            config_dir: common.config.parent().map(Path::to_path_buf).unwrap_or_default(),
            out: common.out.clone(),
            seed,
            workers,
            execution: Execution::with_workers(workers),
            quiet: common.quiet,
            started: Instant::now(),
        })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn model(&self) -> Result<Model> {
        Model::build(&self.config, &self.config_dir, self.execution)
    }

    /// Copies the config with the effective seed and writes the manifest.
    fn finish(&self, subcommand: &str) -> Result<()> {
        let echoed = format!("# effective seed: {}\n{}", self.seed, self.config_text);
        io::write_file(&self.path("config.toml"), &echoed)?;
        let manifest = Manifest::collect(
            &self.out,
            subcommand,
            &self.config_text,
            self.seed,
            self.workers,
            self.started.elapsed().as_secs_f64(),
        )?;
        manifest.write(&self.out)?;
        self.say(format!("data sha256 {}", manifest.data_sha256));
        Ok(())
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Equilibrium(common) => equilibrium(&Run::open(&common)?),
        Command::Scan { common, equilibrium } => scan(&Run::open(&common)?, equilibrium.as_deref()),
        Command::Sample { common, resume } => sample(&Run::open(&common)?, resume.as_deref()),
        Command::Experiment { common, beta } => {
            let mut run = Run::open(&common)?;
            if let (Some(b), Some(e)) = (beta, run.config.experiment.as_mut()) {
                e.betas = vec![b];
            }
            run.config.validate()?;
            experiment(&run)
        }
        Command::Report { out, quiet } => report(&out, quiet),
    }
}

fn equilibrium(run: &Run) -> Result<i32> {
    let model = run.model()?;
    let s = &model.solution;
    io::write_file(&run.path("measure.csv"), &io::measure_csv(s))?;
    io::write_json(&run.path("summary.json"), &EquilibriumSummary::new(s))?;
    if let Some(c) = &model.critical {
        io::write_json(
            &run.path("critical.json"),
            &serde_json::json!({
                "c0": c.c0,
                "depth": c.depth,
                "power": c.power,
                "epsilon": c.epsilon,
                "glue_value": c.glue_value,
                "convexity": c.convexity,
            }),
        )?;
    }
    for i in &s.support {
        run.say(format!("support [{:.6}, {:.6}] ({:?}, {:?})", i.lo, i.hi, i.lo_class, i.hi_class));
    }
    run.say(format!("C_V = {:.8}", s.robin_constant));
    run.finish("equilibrium")?;
    Ok(EXIT_OK)
}

fn scan(run: &Run, equilibrium_dir: Option<&Path>) -> Result<i32> {
    let mut model = run.model()?;
    if let Some(dir) = equilibrium_dir {
        let (nodes, weights) = io::read_measure_csv(&dir.join("measure.csv"))?;
        let measure = betagas::measure::DiscreteMeasure::from_nodes(nodes, weights)?;
        model.solution = std::sync::Arc::new(betagas::equilibrium::EquilibriumSolution::from_measure(
            measure,
            &model.potential,
            run.config.grid.support_threshold,
        )?);
    }
    let report = model.scan(&run.config)?;
    io::write_json(&run.path("criticality.json"), &report)?;
    let rf = model.rate_function();
    let resolution = report.resolution;
    io::write_file(
        &run.path("rate_function.dat"),
        &io::two_column(rf.evaluation_grid(resolution), "x J(x)"),
    )?;
    for p in &report.critical_points {
        run.say(format!(
            "critical point c0 = {:.6}  J'' = {:.4}  q = {:.3}  beta_q = {:.3}",
            p.c0, p.second_derivative, p.q, p.beta_q
        ));
    }
    for (a, b) in &report.plateaus {
        run.say(format!("plateau [{a:.6}, {b:.6}]"));
    }
    if report.critical_points.is_empty() && report.plateaus.is_empty() {
        run.say("no critical points");
    }
    run.finish("scan")?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainSummary {
    chain: usize,
    seed: u64,
    stream: u64,
    records: usize,
    acceptance: f64,
    proposal_scale: f64,
    cache_deviation: Option<f64>,
    mean_escape_count: f64,
}

fn sample(run: &Run, resume: Option<&Path>) -> Result<i32> {
    let section = run
        .config
        .sample
        .clone()
        .ok_or_else(|| Error::Config("the [sample] section is missing".into()))?;
    let model = run.model()?;
    let observation = match (&model.critical, run.config.scan.as_ref().and_then(|s| s.neighborhood.as_ref())) {
        (Some(c), _) => Some(Observation {
            neighborhood: c.neighborhood.clone(),
            c0: c.c0,
            epsilon: c.epsilon,
        }),
        (None, Some(_)) => {
            let a = model.scan_neighborhood(&run.config)?;
            Some(Observation {
                c0: a.upper(),
                neighborhood: a,
                epsilon: 0.0,
            })
        }
        _ => None,
    };
    let configs: Vec<ChainConfig> = (0..section.chains)
        .map(|k| {
            let mut cfg = ChainConfig::new(section.n, section.beta, model.potential.clone(), model.domain.clone());
            cfg.sweeps = section.sweeps;
            cfg.burn_in = section.burn_in;
            cfg.thinning = section.thinning;
            cfg.proposal_scale = section.proposal_scale;
            cfg.teleport_probability = section.teleport_probability;
            cfg.record_positions = section.record_positions;
            cfg.seed = run.seed;
            cfg.stream = k as u64;
            cfg.init = Init::Quantiles(model.solution.measure.clone());
            cfg.observation = observation.clone();
            cfg
        })
        .collect();
    let runs = match resume {
        None => run_chains(configs, run.execution)?,
        Some(dir) => {
            let jobs = configs
                .into_iter()
                .enumerate()
                .map(|(k, cfg)| {
                    let text = std::fs::read_to_string(dir.join(format!("chain_{k}.checkpoint.json")))
                        .map_err(|e| Error::Io {
                            path: dir.display().to_string(),
                            source: e,
                        })?;
                    let checkpoint = Checkpoint::from_text(&text)?;
                    // Resuming extends each chain by another `sweeps` records.
                    let mut cfg = cfg;
                    cfg.sweeps += checkpoint.sweep.saturating_sub(cfg.burn_in);
                    Chain::resume(cfg, &checkpoint)
                })
                .collect::<Result<Vec<_>>>()?;
            run.execution
                .map(jobs, |chain| chain.continue_run())
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut summaries = Vec::new();
    for (k, r) in runs.iter().enumerate() {
        let (name, body) = match section.format {
            RecordFormat::Jsonl => (format!("chain_{k}.jsonl"), io::records_jsonl(&r.records)),
            RecordFormat::Csv => (format!("chain_{k}.csv"), io::records_csv(&r.records)),
        };
        io::write_file(&run.path(&name), &body)?;
        io::write_file(&run.path(&format!("chain_{k}.checkpoint.json")), &r.checkpoint.to_text())?;
        let counts: Vec<f64> = r.records.iter().map(|x| x.escape_count as f64).collect();
        summaries.push(ChainSummary {
            chain: k,
            seed: run.seed,
            stream: k as u64,
            records: r.records.len(),
            acceptance: r.acceptance,
            proposal_scale: r.proposal_scale,
            cache_deviation: r.cache_deviation,
            mean_escape_count: if counts.is_empty() { 0.0 } else { betagas::stats::mean(&counts) },
        });
        run.say(format!(
            "chain {k}: {} records, acceptance {:.3}, scale {:.4e}",
            r.records.len(),
            r.acceptance,
            r.proposal_scale
        ));
    }
    io::write_json(&run.path("summary.json"), &summaries)?;
    run.finish("sample")?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub criticality: CriticalityReport,
    pub tables: Vec<EscapeTable>,
    pub fits: Vec<ExponentFit>,
    pub phase: Option<PhaseReport>,
    pub control: Option<EscapeTable>,
    pub laplace: Vec<(f64, f64)>,
    pub flags: Vec<Flag>,
}

impl ExperimentReport {
    pub fn pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

/// Tolerance on `|slope - (1-β)/2|`.
pub fn slope_tolerance(beta: f64) -> f64 {
    if beta < 1.0 {
        0.15
    } else if beta <= 2.0 {
        0.25
    } else {
        0.3
    }
}

fn beta_tag(beta: f64) -> String {
    format!("{beta}").replace('.', "p")
}

fn table_csv(table: &EscapeTable) -> String {
    let mut out = String::from(
        "n,chains,sweeps,records,frequency,ci_low,ci_high,effective_samples,mean_count,count_stderr,mean_near,z_ratio,max_simultaneous\n",
    );
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}\n",
            r.n,
            r.chains,
            r.sweeps,
            r.records,
            r.frequency,
            r.ci_low,
            r.ci_high,
            r.effective_samples,
            r.mean_count,
            r.count_stderr,
            r.mean_near,
            r.z_ratio,
            r.max_simultaneous
        ));
    }
    out
}

fn experiment(run: &Run) -> Result<i32> {
    let section = run
        .config
        .experiment
        .clone()
        .ok_or_else(|| Error::Config("the [experiment] section is missing".into()))?;
    let model = run.model()?;
    let criticality = model.scan(&run.config)?;
    io::write_json(&run.path("criticality.json"), &criticality)?;
    let setup = model.escape_setup(criticality.clone(), section.epsilon)?;
    let budget = section.budget(run.seed);
    let mut flags = Vec::new();
    let mut tables = Vec::new();
    let mut fits = Vec::new();

    for &beta in &section.betas {
        let table = escape_probability(&setup, beta, &section.ns, &budget, run.execution)?;
        let tag = beta_tag(beta);
        io::write_file(&run.path(&format!("escape_beta{tag}.csv")), &table_csv(&table))?;
        let count = beta < 1.0;
        io::write_file(
            &run.path(&format!("escape_beta{tag}.dat")),
            &io::two_column(
                table
                    .rows
                    .iter()
                    .map(|r| (r.n as f64, if count { r.mean_count } else { r.frequency })),
                if count { "N mean_escape_count" } else { "N escape_frequency" },
            ),
        )?;
        for r in &table.rows {
            run.say(format!(
                "beta {beta} N {:4}: P = {:.5} [{:.5}, {:.5}]  count {:.4}  near {:.4}",
                r.n, r.frequency, r.ci_low, r.ci_high, r.mean_count, r.mean_near
            ));
        }
        if table.rows.len() >= 2 {
            let pass = trend_passes(&table);
            flags.push(Flag {
                name: format!("trend beta={beta}"),
                pass,
                detail: if beta < 1.0 { "frequency increases with N" } else { "frequency decreases with N" }.into(),
            });
        }
        if table.rows.len() >= 3 {
            match fit_escape_exponent(&table) {
                Ok(fit) => {
                    let tol = slope_tolerance(beta);
                    let pass = (fit.slope - fit.theory_slope).abs() <= tol;
                    let what = match fit.quantity {
                        FitQuantity::Frequency => "slope",
                        FitQuantity::Count => "count-slope",
                    };
                    flags.push(Flag {
                        name: format!("exponent beta={beta}"),
                        pass,
                        detail: format!(
                            "{what} {:.3} ± {:.3} vs theory {:.3} (tolerance {tol})",
                            fit.slope, fit.stderr, fit.theory_slope
                        ),
                    });
                    fits.push(fit);
                }
                Err(e) => flags.push(Flag {
                    name: format!("exponent beta={beta}"),
                    pass: false,
                    detail: e.to_string(),
                }),
            }
        }
        tables.push(table);
    }
    io::write_json(&run.path("fits.json"), &fits)?;

    let phase_n = section.phase_n.unwrap_or_else(|| section.ns.iter().copied().max().unwrap_or(0));
    let straddles = section.betas.iter().any(|b| *b < 1.0) && section.betas.iter().any(|b| *b > 1.0);
    let phase = if straddles {
        let rows: Vec<EscapeRow> = tables
            .iter()
            .flat_map(|t| t.rows.iter().filter(|r| r.n == phase_n).cloned())
            .collect();
        let report = phase_transition_report(phase_n, rows, fits.clone());
        io::write_json(&run.path("phase.json"), &report)?;
        flags.push(Flag {
            name: format!("phase N={phase_n}"),
            pass: report.pass && !report.rows.is_empty(),
            detail: format!(
                "beta<1 dominates with disjoint CIs: {}; ordered above 1: {}",
                report.dominance, report.ordered_above_one
            ),
        });
        Some(report)
    } else {
        None
    };

    let control = match &section.control {
        Some(c) => {
            let resolution = run.config.scan.as_ref().map_or(4000, |s| s.resolution);
            let control_setup = model.control_setup(&setup.neighborhood, resolution, section.epsilon)?;
            let mut control_budget = budget.clone();
            control_budget.sweeps = c.sweeps;
            control_budget.sweep_growth = 0.0;
            let table = control_escape(&control_setup, c.beta, &[c.n], &control_budget, run.execution)?;
            let pass = control_passes(&table);
            flags.push(Flag {
                name: "non-critical control".into(),
                pass,
                detail: format!(
                    "P = {:.5} at N = {} (threshold {})",
                    table.rows[0].frequency,
                    c.n,
                    betagas::experiments::CONTROL_THRESHOLD
                ),
            });
            io::write_file(&run.path("control.csv"), &table_csv(&table))?;
            Some(table)
        }
        None => None,
    };

    let mut laplace = Vec::new();
    if !section.laplace_ns.is_empty() {
        let rf = model.rate_function();
        for &n in &section.laplace_ns {
            laplace.push((n, laplace_ratio_for(&rf, setup.c0, section.epsilon, n)?));
        }
        let last = laplace[laplace.len() - 1].1;
        let first = laplace[0].1;
        flags.push(Flag {
            name: "laplace".into(),
            pass: (0.98..=1.02).contains(&last) && (last - 1.0).abs() <= (first - 1.0).abs(),
            detail: format!("ratios {:?}", laplace),
        });
        io::write_file(&run.path("laplace.dat"), &io::two_column(laplace.clone(), "N ratio"))?;
    }

    let report = ExperimentReport {
        seed: run.seed,
        criticality,
        tables,
        fits,
        phase,
        control,
        laplace,
        flags,
    };
    io::write_json(&run.path(REPORT_FILE), &report)?;
    print_flags(&report.flags, run.quiet);
    run.finish("experiment")?;
    Ok(if report.pass() { EXIT_OK } else { EXIT_FAILED_FLAGS })
}

fn print_flags(flags: &[Flag], quiet: bool) {
    if quiet {
        return;
    }
    for f in flags {
        println!("{} {}: {}", f.name, if f.pass { "PASS" } else { "FAIL" }, f.detail);
    }
}

fn report(out: &Path, quiet: bool) -> Result<i32> {
    let report: ExperimentReport = io::read_json(&out.join(REPORT_FILE))?;
    print_flags(&report.flags, quiet);
    Ok(if report.pass() { EXIT_OK } else { EXIT_FAILED_FLAGS })
}
