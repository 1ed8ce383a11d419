use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isar_core::dip::DipConfig;
use isar_core::harness::config::load_method_config;
use isar_core::harness::{
    complete, load_experiment, load_mask, load_matrix, load_scene, run_grid, save_mask, save_matrix, write_pgm, Method,
};
use isar_core::lowrank::SolverConfig;
use isar_core::metrics::{add_noise, MetricsReport};
use isar_core::radar::{fftshift, rd_image, simulate_echo, to_db_image};
use isar_core::sampling::{gen_mask, MaskKind};
use isar_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Sparse-aperture radar imaging: simulate, mask, complete and score.
#[derive(Parser, Debug)]
#[command(name = "isar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the echo matrix of a scene file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a sampling mask.
    Mask(MaskArgs),
    /// Fill in the missing entries of an echo matrix.
    Complete {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// INI file with [solver] and/or [dip] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render the range-Doppler image of an echo matrix as a PGM.
    Image {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        top_db: f64,
        /// Move zero Doppler/range to the raster center.
        #[arg(long)]
        center: bool,
    },
    /// Score the image of an estimate against the image of a reference.
    Metrics {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
    },
    /// Run a method × scenario × ratio × seed grid.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Run on one thread and zero the runtime column for reproducible CSVs.
        #[arg(long)]
        single_thread: bool,
    },
    /// Add white complex Gaussian noise at a given SNR.
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long)]
    kind: MaskKind,
    /// Fraction of entries to drop.
    #[arg(long)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Take the dimensions from this matrix file.
    #[arg(long, conflicts_with_all = ["rows", "cols"])]
    like: Option<PathBuf>,
    #[arg(long, requires = "cols")]
    rows: Option<usize>,
    #[arg(long, requires = "rows")]
    cols: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { scene, out } => {
            save_matrix(&simulate_echo(&load_scene(scene)?)?, out)?;
        }
        Command::Mask(a) => {
            let (rows, cols) = match (a.like, a.rows, a.cols) {
                (Some(path), _, _) => load_matrix(path)?.dims(),
                (None, Some(r), Some(c)) => (r, c),
                _ => return Err(Error::InvalidArgument("need --like or --rows/--cols".into())),
            };
            let mask = gen_mask(a.kind, a.ratio, rows, cols, a.seed)?;
            println!("missing {:.4}", mask.missing_fraction());
            save_mask(&mask, a.out)?;
        }
        Command::Complete {
            method,
            input,
            mask,
            out,
            config,
            seed,
        } => {
            let (solver, dip) = match config {
                Some(path) => load_method_config(path)?,
                None => (SolverConfig::default(), DipConfig::default()),
            };
            let m = load_matrix(input)?;
            let mask = load_mask(mask)?;
            let done = complete(method, &m, &mask, seed, &solver, &dip)?;
            save_matrix(&done.matrix, out)?;
            println!("iterations {} converged {}", done.iterations, done.converged);
            // DIP runs to max_iters without early stop by design; only the
            // solvers report failure to converge.
            if !done.converged && matches!(method, Method::Nnm | Method::Ialm) {
                return Ok(EXIT_NOT_CONVERGED);
            }
        }
        Command::Image {
            input,
            out,
            top_db,
            center,
        } => {
            let db = to_db_image(&rd_image(&load_matrix(input)?)?, top_db)?;
            write_pgm(&if center { fftshift(&db) } else { db }, top_db, out)?;
        }
        Command::Metrics { reference, estimate } => {
            let r = rd_image(&load_matrix(reference)?)?;
            let e = rd_image(&load_matrix(estimate)?)?;
            let s = MetricsReport::score(&r, &e)?;
            println!("rmse,correlation,contrast,snr_db");
            println!("{},{},{},{}", s.rmse, s.correlation, s.contrast, s.snr_db);
        }
        Command::Experiment { config, single_thread } => {
            let cfg = load_experiment(config)?;
            let report = run_grid(&cfg, single_thread)?;
            print!("{}", report.summary_csv);
            let failed = report.errors.iter().filter(|e| e.is_some()).count();
            if failed > 0 {
                log::warn!("{failed} cell(s) failed; see results.csv");
            }
        }
        Command::Noise {
            input,
            out,
            snr_db,
            seed,
        } => {
            save_matrix(&add_noise(&load_matrix(input)?, snr_db, seed)?, out)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { EXIT_DATA } else { EXIT_USAGE })
        }
    }
}
