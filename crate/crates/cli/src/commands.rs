//! The five pipeline commands: simulate, retrieve, learn-dict, eval and
//! corpus listing.

use anyhow::{bail, Context, Result};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dlpr_core::field::{rmse_wrapped, wrap_unchecked, ComplexField};
use dlpr_core::io::{
    export_amplitude_png, export_phase_png, export_real_png, load_dictionary, load_mask_set,
    load_observations, read_complex_raster, save_dictionary, save_mask_set, save_observations,
    write_complex_raster, write_real_raster,
};
use dlpr_core::optics::generate_masks;
use dlpr_core::retrieval::{dlpr, dlpr_prior, gsf, RetrievalResult};
use dlpr_core::sensor::{
    amplitude_scale_for_snr, clean_intensities, gaussian_sigma_for_snr_db, simulate_gaussian,
    simulate_noiseless, simulate_poisson, snr_global_db,
};
use dlpr_core::sparse::{codl, init_dictionary_from_patches, CodlConfig};
use dlpr_core::synthdata::{corpus_signal, corpus_table};

use crate::spec::ExperimentSpec;

fn out_dir(spec: &ExperimentSpec, flag: Option<&Path>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| spec.output.dir.clone())
        .context("no output directory: pass --out or set [output] dir in the spec")
}

fn build_scene(spec: &ExperimentSpec) -> Result<ComplexField> {
    let mut truth = match spec.scene.source.as_str() {
        "corpus" => corpus_signal(
            spec.scene.row,
            spec.scene.rows,
            spec.scene.cols,
            spec.scene.peak,
            spec.scene.seed,
        )?,
        _ => {
            let path = spec.scene.truth.as_ref().unwrap();
            read_complex_raster(path)
                .with_context(|| format!("loading truth raster {}", path.display()))?
        }
    };
    let masks = generate_masks(
        truth.rows(),
        truth.cols(),
        spec.masks.count,
        spec.masks.seed,
    )?;
    let scale = match spec.scene.amplitude_scale {
        Some(s) => s,
        None => amplitude_scale_for_snr(
            &truth,
            &masks,
            spec.scene.calibration_chi_ref,
            spec.scene.calibration_target_db,
        )?,
    };
    truth.scale(scale);
    Ok(truth)
}

/// Simulates observations and writes truth, masks, observations and a
/// run manifest into the output directory. Re-running a spec reproduces
/// byte-identical artifacts.
pub fn cmd_simulate(spec: &ExperimentSpec, out_flag: Option<&Path>) -> Result<()> {
    let dir = out_dir(spec, out_flag)?;
    fs::create_dir_all(&dir)?;
    let truth = build_scene(spec)?;
    let masks = generate_masks(
        truth.rows(),
        truth.cols(),
        spec.masks.count,
        spec.masks.seed,
    )?;

    let y = clean_intensities(&truth, &masks)?;
    let obs = match spec.noise.model.as_str() {
        "poisson" => {
            let chi = spec.noise.chi.unwrap();
            simulate_poisson(&truth, &masks, chi, spec.noise.seed)?
        }
        "gaussian" => {
            let sigma = match spec.noise.sigma {
                Some(s) => s,
                None => gaussian_sigma_for_snr_db(&y, spec.noise.snr_db.unwrap())?,
            };
            simulate_gaussian(&truth, &masks, sigma, spec.noise.seed)?
        }
        _ => simulate_noiseless(&truth, &masks)?,
    };

    write_complex_raster(dir.join("truth.cras"), &truth)?;
    save_mask_set(dir.join("masks"), &masks)?;
    save_observations(dir.join("obs"), &obs)?;

    let snr_line = match obs.model() {
        dlpr_core::NoiseModel::Poisson { chi } => {
            format!("global_snr_db = {:.3}", snr_global_db(&y, chi)?)
        }
        dlpr_core::NoiseModel::Gaussian { sigma } => format!("sigma = {sigma}"),
        dlpr_core::NoiseModel::Noiseless => "noiseless = true".to_string(),
    };
    fs::write(
        dir.join("simulate.toml"),
        format!(
            "model = \"{}\"\nobservations = {}\nrows = {}\ncols = {}\n{}\n",
            obs.model().name(),
            obs.count(),
            truth.rows(),
            truth.cols(),
            snr_line
        ),
    )?;
    println!(
        "simulated {} x {} scene, {} observations ({}) -> {}",
        truth.rows(),
        truth.cols(),
        obs.count(),
        obs.model().name(),
        dir.display()
    );
    Ok(())
}

/// Runs the configured solver on previously simulated artifacts, writing
/// the estimate, an append-only trace, the final dictionary and a summary.
pub fn cmd_retrieve(spec: &ExperimentSpec, out_flag: Option<&Path>) -> Result<()> {
    let dir = out_dir(spec, out_flag)?;
    let obs = load_observations(dir.join("obs")).with_context(|| {
        format!(
            "loading observations from {} (run simulate first)",
            dir.display()
        )
    })?;
    let masks = load_mask_set(dir.join("masks"))
        .with_context(|| format!("loading masks from {}", dir.display()))?;
    let truth_path = dir.join("truth.cras");
    let truth = if truth_path.exists() {
        Some(read_complex_raster(&truth_path)?)
    } else {
        None
    };

    let cfg = spec.solver_config(obs.model())?;
    let tic = Instant::now();
    let result: RetrievalResult = match spec.solver.kind.as_str() {
        "gsf" => gsf(&obs, &masks, &cfg, truth.as_ref())?,
        "dlpr" => dlpr(&obs, &masks, &cfg, truth.as_ref())?,
        _ => {
            let prior_dir = spec.solver.prior.as_ref().unwrap();
            let d_prior = load_dictionary(prior_dir)
                .with_context(|| format!("loading prior dictionary {}", prior_dir.display()))?;
            dlpr_prior(&obs, &masks, &cfg, &d_prior, truth.as_ref())?
        }
    };
    let wall = tic.elapsed().as_secs_f64();

    write_complex_raster(dir.join("estimate.cras"), &result.estimate)?;
    export_amplitude_png(dir.join("estimate_amp.png"), &result.estimate)?;
    export_phase_png(dir.join("estimate_phase.png"), &result.estimate)?;

    // Line-oriented, append-friendly trace: tail-monitorable during long
    // runs.
    let mut trace = fs::File::create(dir.join("trace.txt"))?;
    writeln!(trace, "# iteration rmse objective seconds")?;
    for row in &result.trace {
        let rmse = row.rmse.map_or("NA".to_string(), |r| format!("{r:.17e}"));
        writeln!(
            trace,
            "{} {} {:.17e} {:.3}",
            row.iteration, rmse, row.objective, row.seconds
        )?;
    }

    if let Some(d) = &result.dictionary {
        save_dictionary(
            dir.join("dict"),
            d,
            &format!("retrieve run, solver {}", spec.solver.kind),
        )?;
    }

    let final_rmse = result.trace.last().and_then(|r| r.rmse);
    let rmse_line = match final_rmse {
        Some(r) => format!("final_rmse = {r}\n"),
        None => String::new(),
    };
    fs::write(
        dir.join("summary.toml"),
        format!(
            "solver = \"{}\"\niterations = {}\n{}wall_seconds = {wall}\n",
            spec.solver.kind,
            result.trace.len(),
            rmse_line
        ),
    )?;
    match final_rmse {
        Some(r) => println!(
            "retrieve done: solver {} final rmse {r:.6} ({wall:.1}s)",
            spec.solver.kind
        ),
        None => println!(
            "retrieve done: solver {} ({wall:.1}s, no truth for rmse)",
            spec.solver.kind
        ),
    }
    Ok(())
}

/// Trains a dictionary on patches from clean complex rasters.
#[allow(clippy::too_many_arguments)]
pub fn cmd_learn_dict(
    sources: &[PathBuf],
    patch_side: usize,
    atoms: usize,
    lambda: f64,
    batch: usize,
    passes: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    if sources.is_empty() {
        bail!("no training rasters given");
    }
    let mut pool = Vec::new();
    for path in sources {
        let field = read_complex_raster(path)
            .with_context(|| format!("loading training raster {}", path.display()))?;
        if field.rows() < patch_side || field.cols() < patch_side {
            bail!(
                "{}: raster {}x{} smaller than the {patch_side}x{patch_side} patch",
                path.display(),
                field.rows(),
                field.cols()
            );
        }
        let grid = dlpr_core::patch::PatchGrid::new(field.rows(), field.cols(), patch_side, 1)?;
        pool.extend(
            dlpr_core::patch::extract_patches(&field, &grid)?
                .patches()
                .to_vec(),
        );
    }
    let d0 = init_dictionary_from_patches(&pool, patch_side, atoms, seed)?;
    let cfg = CodlConfig {
        iterations: (passes * pool.len()).div_ceil(batch).max(1),
        batch,
        lambda,
        seed: seed.wrapping_add(1),
        ..Default::default()
    };
    let tic = Instant::now();
    let dict = codl(&pool, &d0, &cfg)?;
    let provenance = format!(
        "learn-dict: {} rasters, {} patches, {passes} passes, lambda {lambda}, seed {seed}",
        sources.len(),
        pool.len()
    );
    save_dictionary(out, &dict, &provenance)?;
    println!(
        "trained {}-atom dictionary on {} patches in {:.1}s -> {}",
        atoms,
        pool.len(),
        tic.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

/// Compares an estimate against the truth: prints aligned and unaligned
/// RMSE and writes the wrapped-phase-difference raster plus PNG renderings.
pub fn cmd_eval(estimate: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let est = read_complex_raster(estimate)
        .with_context(|| format!("loading estimate {}", estimate.display()))?;
    let tru =
        read_complex_raster(truth).with_context(|| format!("loading truth {}", truth.display()))?;
    let aligned = rmse_wrapped(&est, &tru, true)?;
    let unaligned = rmse_wrapped(&est, &tru, false)?;
    println!("rmse_aligned = {aligned:.6}");
    println!("rmse_unaligned = {unaligned:.6}");

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let diff: Vec<f64> = est
            .phase()
            .iter()
            .zip(tru.phase())
            .map(|(&a, b)| wrap_unchecked(a - b))
            .collect();
        write_real_raster(dir.join("phase_diff.rras"), est.rows(), est.cols(), &diff)?;
        export_real_png(dir.join("phase_diff.png"), est.rows(), est.cols(), &diff)?;
        export_phase_png(dir.join("estimate_phase.png"), &est)?;
        export_phase_png(dir.join("truth_phase.png"), &tru)?;
        fs::write(
            dir.join("report.toml"),
            format!("rmse_aligned = {aligned}\nrmse_unaligned = {unaligned}\n"),
        )?;
        println!("report -> {}", dir.display());
    }
    Ok(())
}

/// Prints the built-in signal table.
pub fn cmd_corpus() {
    println!(
        "{:<4} {:<22} {:<6} {:<20} {}",
        "row", "name", "group", "phase", "amplitude"
    );
    for row in corpus_table() {
        let amp = match row.amp_kind {
            Some(k) => k.name().to_string(),
            None => match row.group {
                1 => "constant".to_string(),
                3 => "1 + |psi|/max|psi|".to_string(),
                4 => "1 + |cos(15 psi)|".to_string(),
                _ => "-".to_string(),
            },
        };
        println!(
            "{:<4} {:<22} {:<6} {:<20} {}",
            row.index,
            row.name,
            row.group,
            row.phase_kind.name(),
            amp
        );
    }
}
