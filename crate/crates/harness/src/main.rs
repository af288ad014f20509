use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use svl_harness::config::EquilibriumSpec;
use svl_harness::output::{self, EQUILIBRIUM_CSV, FITS_JSON, RESULTS_CSV};
use svl_harness::tables::{equilibrium_table, fit_rows, FitRecord, EQUILIBRIUM_HEADER};
use svl_harness::{
    build_pool, emit_results, preflight, read_results_csv, run_sweep, validate, CellStore, ExperimentConfig,
    HarnessError, Result,
};

#[derive(Parser)]
#[command(name = "svl", version, about = "Spin-vector Langevin annealing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory (overrides the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Reuse finished cells found in the output directory
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the (gamma, t_a) sweep described by --config
    Run,
    /// Fit kink-density power laws to the results in --out
    Fit,
    /// Tabulate transfer-operator correlation lengths and order parameter
    Equilibrium,
    /// Run the numerical self-checks
    Validate,
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| HarnessError::Config("--config <path> is required".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.ensemble.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    for w in config.validate()? {
        eprintln!("warning: {w}");
    }
    let dir = config.output.dir.clone();
    preflight(&dir)?;
    std::fs::write(dir.join(output::CONFIG_ECHO), config.to_toml()?)?;
    let pool = build_pool(workers(cli))?;
    let store = CellStore::new(dir.join("cells"))?;
    let report = run_sweep(&config, &pool, Some(&store), cli.resume, |cell, result| match result {
        Some(r) => eprintln!(
            "gamma={} t_a={} density={} failures={} ({:.1}s)",
            cell.gamma,
            cell.t_a,
            r.stats.as_ref().map_or(f64::NAN, |s| s.mean_density),
            r.failures.len(),
            r.wall_seconds
        ),
        None => eprintln!("gamma={} t_a={} failed", cell.gamma, cell.t_a),
    })?;
    if !report.reused.is_empty() {
        eprintln!("reused {} finished cells", report.reused.len());
    }
    emit_results(&report.record, &dir)?;
    println!("wrote {}", dir.join(RESULTS_CSV).display());
    for e in &report.record.errors {
        eprintln!("cell gamma={} t_a={}: {}", e.cell.gamma, e.cell.t_a, e.message);
    }
    if !report.record.is_valid() {
        return Err(HarnessError::Numerical(format!(
            "{} cell errors, {} failed trajectories",
            report.record.errors.len(),
            report.record.failure_count()
        )));
    }
    Ok(())
}

fn result_dir(cli: &Cli) -> Result<PathBuf> {
    if let Some(out) = &cli.out {
        return Ok(out.clone());
    }
    if cli.config.is_some() {
        return Ok(load_config(cli)?.output.dir);
    }
    Err(HarnessError::Config("fit needs --out <dir> or --config <path>".into()))
}

fn fit(cli: &Cli) -> Result<()> {
    let dir = result_dir(cli)?;
    let rows = read_results_csv(&dir.join(RESULTS_CSV))?;
    let mut records = Vec::new();
    for (gamma, fit) in fit_rows(&rows) {
        match fit {
            Ok(f) => {
                if f.curvature_flag {
                    eprintln!("gamma={gamma}: residuals look curved (runs-test p = {:.3})", f.runs_p_value);
                }
                println!(
                    "gamma={gamma} alpha={:.4} +- {:.4} window=[{}, {}] n={} r2={:.4}",
                    f.exponent, f.stderr, f.window.0, f.window.1, f.n_points, f.r_squared
                );
                records.push(FitRecord::new(gamma, &f));
            }
            Err(e) => eprintln!("gamma={gamma}: no fit ({e})"),
        }
    }
    output::write_json(&dir.join(FITS_JSON), &records)?;
    if records.is_empty() {
        return Err(HarnessError::Numerical("no gamma value had a usable fit window".into()));
    }
    Ok(())
}

fn equilibrium(cli: &Cli) -> Result<()> {
    let (spec, dir) = match &cli.config {
        Some(_) => {
            let config = load_config(cli)?;
            (config.equilibrium.clone().unwrap_or_default(), config.output.dir)
        }
        None => (
            EquilibriumSpec::default(),
            cli.out.clone().unwrap_or_else(|| PathBuf::from("results")),
        ),
    };
    preflight(&dir)?;
    let pool = build_pool(workers(cli))?;
    let rows = equilibrium_table(&spec, &pool)?;
    write_equilibrium(&dir.join(EQUILIBRIUM_CSV), &rows)?;
    println!("wrote {} rows to {}", rows.len(), dir.join(EQUILIBRIUM_CSV).display());
    Ok(())
}

fn write_equilibrium(path: &Path, rows: &[svl_harness::tables::EquilibriumRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(EQUILIBRIUM_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn validate_cmd(cli: &Cli) -> Result<()> {
    let outcomes = validate::run_all(cli.seed.unwrap_or(1));
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        return Err(HarnessError::Numerical(format!("{failed} of {} checks failed", outcomes.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run => run(&cli),
        Command::Fit => fit(&cli),
        Command::Equilibrium => equilibrium(&cli),
        Command::Validate => validate_cmd(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("svl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
