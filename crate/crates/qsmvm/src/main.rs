use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qsmvm::config::{ConfigFile, Overrides, Scenario};
use qsmvm::formats::{write_trace, write_ts_matrix};
use qsmvm::output::result_csv;
use qsmvm::sweep::{run_sweep, simulate, GridSpec, CONFIG_FILE};
use qsmvm_core::mac::ServiceDiscipline;
use qsmvm_core::Simulator;

#[derive(Parser)]
#[command(name = "qsmvm", version, about = "MANET video routing simulator with QoS and tie-strength path selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for result.csv, protocol_log.csv and the manifest;
        /// the result table goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Run a parameter grid with repetitions.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Repetitions per point; overrides the grid file.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Write a self-contained scenario: config, mobility trace and tie-strength matrix.
    GenScenario {
        #[arg(long, value_parser = ["100", "200"])]
        density: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        mu: u8,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Rebuild sweep.csv and figure tables from a sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Waypoint trace replacing generated mobility.
    #[arg(long)]
    mobility_trace: Option<PathBuf>,
    /// Tie-strength matrix replacing the generated one.
    #[arg(long)]
    ts_matrix: Option<PathBuf>,
    /// Tie-sign ledger from which to compute the tie-strength matrix.
    #[arg(long, conflicts_with = "ts_matrix")]
    ts_ledger: Option<PathBuf>,
    /// Frame-size trace replacing synthesised frame sizes.
    #[arg(long)]
    video_trace: Option<PathBuf>,
    #[arg(long, value_enum)]
    mac_service: Option<MacService>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MacService {
    Strict,
    Weighted,
}

impl InputArgs {
    fn overrides(&self, seed: Option<u64>) -> Overrides {
        Overrides {
            master_seed: seed,
            mobility_trace: self.mobility_trace.clone(),
            ts_matrix: self.ts_matrix.clone(),
            ts_ledger: self.ts_ledger.clone(),
            video_trace: self.video_trace.clone(),
            mac_service: self.mac_service.map(|m| match m {
                MacService::Strict => ServiceDiscipline::Strict,
                MacService::Weighted => ServiceDiscipline::Weighted,
            }),
        }
    }
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn gen_scenario(density: f64, mu: f64, seed: u64, out: &Path) -> Result<()> {
    let mut file = ConfigFile::default();
    file.area.density = density;
    file.ts.mu_ts = mu;
    file.master_seed = seed;
    let scenario = Scenario::from_file(file.clone(), &Overrides::default())?;
    let sim = Simulator::new(scenario.run_config()?)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("mobility.trace"), write_trace(sim.trace()).as_bytes())?;
    write(&out.join("ts_matrix.txt"), write_ts_matrix(sim.ts_matrix()).as_bytes())?;
    file.mobility_trace = Some("mobility.trace".into());
    file.ts_matrix = Some("ts_matrix.txt".into());
    write(&out.join(CONFIG_FILE), file.to_toml().as_bytes())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, seed, out, inputs } => {
            let scenario = Scenario::load(&config, &inputs.overrides(seed))?;
            let result = simulate(&scenario, out.as_deref())?;
            if out.is_none() {
                use std::io::Write;
                std::io::stdout().write_all(&result_csv(&result)?)?;
            }
        }
        Command::Sweep { config, grid, reps, out, inputs } => {
            let scenario = Scenario::load(&config, &inputs.overrides(None))?;
            let mut grid = GridSpec::load(&grid)?;
            if let Some(r) = reps {
                grid.reps = r;
            }
            let table = run_sweep(&scenario, &grid, &out)?;
            eprintln!("{} points, {} runs written to {}", table.rows.len(), table.rows.len() * grid.reps, out.display());
        }
        Command::GenScenario { density, mu, out, seed } => {
            gen_scenario(density.parse()?, f64::from(mu), seed, &out)?;
        }
        Command::Report { input, out } => {
            let table = qsmvm::report::report(&input, &out)?;
            eprintln!("{} points aggregated into {}", table.rows.len(), out.display());
        }
    }
    Ok(())
}
