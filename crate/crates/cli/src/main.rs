//! Batch experiment front end: simulate coded-diffraction observations,
//! run the retrieval solvers, train class priors and evaluate estimates.

mod commands;
mod spec;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use spec::ExperimentSpec;

#[derive(Parser)]
#[command(
    name = "dlpr",
    about = "Phase retrieval from noisy coded diffraction patterns with dictionary-based sparse modeling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SpecArgs {
    /// Experiment spec file (TOML). Flags below override spec keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Corpus row 1..=9 (overrides [scene] row).
    #[arg(long)]
    row: Option<usize>,
    /// Raster side; scenes are square (overrides [scene] rows/cols).
    #[arg(long)]
    size: Option<usize>,
    /// Peak phase magnitude in radians (overrides [scene] peak).
    #[arg(long)]
    peak: Option<f64>,
    /// Scene seed (overrides [scene] seed).
    #[arg(long)]
    scene_seed: Option<u64>,
    /// Number of phase masks S (overrides [masks] count).
    #[arg(long)]
    masks: Option<usize>,
    /// Mask seed (overrides [masks] seed).
    #[arg(long)]
    mask_seed: Option<u64>,
    /// Noise model: poisson | gaussian | noiseless (overrides [noise]).
    #[arg(long)]
    model: Option<String>,
    /// Poisson photon scale chi (overrides [noise] chi).
    #[arg(long)]
    chi: Option<f64>,
    /// Gaussian noise standard deviation (overrides [noise] sigma).
    #[arg(long)]
    sigma: Option<f64>,
    /// Gaussian noise level as global SNR in dB (overrides [noise] snr_db).
    #[arg(long)]
    snr_db: Option<f64>,
    /// Noise seed (overrides [noise] seed).
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Solver: dlpr | dlpr_prior | gsf (overrides [solver] kind).
    #[arg(long)]
    solver: Option<String>,
    /// Outer iterations T (overrides [solver] iterations).
    #[arg(long)]
    iterations: Option<usize>,
    /// Patch side w (overrides [solver] patch_side).
    #[arg(long)]
    patch_side: Option<usize>,
    /// Dictionary atom count k (overrides [solver] atoms).
    #[arg(long)]
    atoms: Option<usize>,
    /// Prior dictionary directory for dlpr_prior (overrides [solver] prior).
    #[arg(long)]
    prior: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(v) = self.row {
            spec.scene.row = v;
        }
        if let Some(v) = self.size {
            spec.scene.rows = v;
            spec.scene.cols = v;
        }
        if let Some(v) = self.peak {
            spec.scene.peak = v;
        }
        if let Some(v) = self.scene_seed {
            spec.scene.seed = v;
        }
        if let Some(v) = self.masks {
            spec.masks.count = v;
        }
        if let Some(v) = self.mask_seed {
            spec.masks.seed = v;
        }
        if let Some(v) = &self.model {
            spec.noise.model = v.clone();
        }
        if let Some(v) = self.chi {
            spec.noise.chi = Some(v);
        }
        if let Some(v) = self.sigma {
            spec.noise.sigma = Some(v);
        }
        if let Some(v) = self.snr_db {
            spec.noise.snr_db = Some(v);
        }
        if let Some(v) = self.noise_seed {
            spec.noise.seed = v;
        }
        if let Some(v) = &self.solver {
            spec.solver.kind = v.clone();
        }
        if let Some(v) = self.iterations {
            spec.solver.iterations = Some(v);
        }
        if let Some(v) = self.patch_side {
            spec.solver.patch_side = v;
        }
        if let Some(v) = self.atoms {
            spec.solver.atoms = v;
        }
        if let Some(v) = &self.prior {
            spec.solver.prior = Some(v.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene, phase masks and noisy observations.
    Simulate(SpecArgs),
    /// Run a solver on previously simulated observations.
    Retrieve(SpecArgs),
    /// Train a dictionary on clean complex rasters.
    LearnDict {
        /// Training rasters (complex format).
        #[arg(long, required = true, num_args = 1..)]
        sources: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        patch_side: usize,
        #[arg(long, default_value_t = 256)]
        atoms: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        /// Passes over the pooled patch set.
        #[arg(long, default_value_t = 4)]
        passes: usize,
        #[arg(long, default_value_t = 2)]
        seed: u64,
        /// Output dictionary directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare an estimate raster against a truth raster.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Optional report directory (phase-difference raster + PNGs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in signal table.
    Corpus,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DLPR_THREADS") {
        let n: usize = v.parse().with_context(|| format!("DLPR_THREADS = {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("rayon thread pool")?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate(args) => {
            let spec = args.resolve()?;
            commands::cmd_simulate(&spec, args.out.as_deref())
        }
        Command::Retrieve(args) => {
            let spec = args.resolve()?;
            commands::cmd_retrieve(&spec, args.out.as_deref())
        }
        Command::LearnDict {
            sources,
            patch_side,
            atoms,
            lambda,
            batch,
            passes,
            seed,
            out,
        } => commands::cmd_learn_dict(
            &sources, patch_side, atoms, lambda, batch, passes, seed, &out,
        ),
        Command::Eval {
            estimate,
            truth,
            out,
        } => commands::cmd_eval(&estimate, &truth, out.as_deref()),
        Command::Corpus => {
            commands::cmd_corpus();
            Ok(())
        }
    }
}
