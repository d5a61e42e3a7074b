//! The outer alternating-minimization loop shared by the dictionary-based
//! solvers and the filtering-only baseline.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::time::Instant;

use super::{
    objective_value, x_update_with_term, InitMode, LambdaMode, OmpDelta, PatchTerm, SolverConfig,
};
use crate::error::{Error, Result};
use crate::field::{rmse_wrapped, ComplexField};
use crate::optics::{propagate_forward_all, MaskSet};
use crate::patch::{aggregate_patches, extract_patches, PatchGrid, PatchSet};
use crate::sensor::{sensor_update, NoiseModel, ObservationSet};
use crate::sparse::{
    codl, init_dictionary_from_patches, omp_with_gram, CodlConfig, Dictionary, OmpGram, SparseCode,
};

/// Per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based outer iteration.
    pub iteration: usize,
    /// Aligned wrapped-phase RMSE against the supplied truth.
    pub rmse: Option<f64>,
    /// Variational objective at the end of the iteration.
    pub objective: f64,
    /// Wall time of the iteration.
    pub seconds: f64,
}

/// Output of a retrieval run.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub estimate: ComplexField,
    pub trace: Vec<TraceRow>,
    /// Final dictionary (absent for the baseline).
    pub dictionary: Option<Dictionary>,
    /// Final sparse codes (absent for the baseline).
    pub codes: Option<Vec<SparseCode>>,
}

/// Resumable driver state. The object-plane estimate determines the patch
/// term of the next backward propagation (`Σ R_iᴴDα_i = μ ⊙ x̂`), and batch
/// sampling seeds are derived from the iteration index, so this triple
/// restarts a run exactly.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub x: ComplexField,
    pub dictionary: Option<Dictionary>,
    /// 1-based index of the next iteration to execute.
    pub next_iteration: usize,
}

impl Checkpoint {
    /// State after a completed run.
    pub fn after(result: &RetrievalResult, completed_iterations: usize) -> Self {
        Self {
            x: result.estimate.clone(),
            dictionary: result.dictionary.clone(),
            next_iteration: completed_iterations + 1,
        }
    }
}

/// Builds the starting wavefront from the data: uniform amplitude
/// `sqrt(mean z/χ)` (Poisson), `sqrt(max(mean z, ε))` (Gaussian) or
/// `sqrt(mean z)` (exact), with flat or seeded uniform random phase.
pub fn initialize_wavefront(
    obs: &ObservationSet,
    masks: &MaskSet,
    mode: InitMode,
    seed: u64,
) -> Result<ComplexField> {
    if obs.rows() != masks.rows() || obs.cols() != masks.cols() {
        return Err(Error::dims("observations vs masks"));
    }
    let count = (obs.count() * obs.len_pixels()) as f64;
    let mean_z: f64 = obs.rasters().iter().flatten().sum::<f64>() / count;
    let amp = match obs.model() {
        NoiseModel::Poisson { chi } => (mean_z / chi).sqrt(),
        NoiseModel::Gaussian { .. } => mean_z.max(1e-12).sqrt(),
        NoiseModel::Noiseless => mean_z.sqrt(),
    };
    let n = obs.len_pixels();
    let data: Vec<Complex64> = match mode {
        InitMode::Flat => vec![Complex64::new(amp, 0.0); n],
        InitMode::RandomPhase => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| Complex64::from_polar(amp, rng.gen_range(-PI..PI)))
                .collect()
        }
    };
    ComplexField::new(obs.rows(), obs.cols(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolverKind {
    Dlpr,
    DlprPrior,
    Gsf,
}

/// Dictionary-learning phase retrieval: the full four-block loop.
pub fn dlpr(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(obs, masks, cfg, SolverKind::Dlpr, None, truth, None)
}

/// Resumes a [`dlpr`] run from a checkpoint.
pub fn dlpr_resume(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    start: &Checkpoint,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(obs, masks, cfg, SolverKind::Dlpr, None, truth, Some(start))
}

/// Class-specific retrieval with a fixed pre-learned dictionary: the same
/// loop with the dictionary-learning step skipped.
pub fn dlpr_prior(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    d_prior: &Dictionary,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(
        obs,
        masks,
        cfg,
        SolverKind::DlprPrior,
        Some(d_prior),
        truth,
        None,
    )
}

/// Resumes a [`dlpr_prior`] run from a checkpoint.
pub fn dlpr_prior_resume(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    d_prior: &Dictionary,
    start: &Checkpoint,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(
        obs,
        masks,
        cfg,
        SolverKind::DlprPrior,
        Some(d_prior),
        truth,
        Some(start),
    )
}

/// Filtering-only baseline: propagation and sensor filtering with the
/// object-plane estimate taken directly from the backward propagation.
pub fn gsf(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(obs, masks, cfg, SolverKind::Gsf, None, truth, None)
}

/// Resumes a [`gsf`] run from a checkpoint.
pub fn gsf_resume(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    start: &Checkpoint,
    truth: Option<&ComplexField>,
) -> Result<RetrievalResult> {
    run_loop(obs, masks, cfg, SolverKind::Gsf, None, truth, Some(start))
}

fn run_loop(
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    kind: SolverKind,
    d_prior: Option<&Dictionary>,
    truth: Option<&ComplexField>,
    start: Option<&Checkpoint>,
) -> Result<RetrievalResult> {
    cfg.validate()?;
    if obs.rows() != masks.rows() || obs.cols() != masks.cols() {
        return Err(Error::dims("observations vs masks"));
    }
    if obs.count() != masks.count() {
        return Err(Error::dims(format!(
            "{} observations vs {} masks",
            obs.count(),
            masks.count()
        )));
    }
    if cfg.observations != obs.count() {
        return Err(Error::ModelMismatch(format!(
            "config expects S = {}, data has {}",
            cfg.observations,
            obs.count()
        )));
    }
    if let Some(t) = truth {
        if t.rows() != obs.rows() || t.cols() != obs.cols() {
            return Err(Error::dims("truth vs observations"));
        }
    }
    let uses_patches = kind != SolverKind::Gsf;
    // The baseline never touches the grid; a unit-patch placeholder keeps
    // one code path through the backward propagation.
    let grid = if uses_patches {
        PatchGrid::new(obs.rows(), obs.cols(), cfg.patch_side, cfg.stride)?
    } else {
        PatchGrid::new(obs.rows(), obs.cols(), 1, 1)?
    };
    if let Some(d) = d_prior {
        if d.patch_side() != cfg.patch_side {
            return Err(Error::dims(format!(
                "prior dictionary patch side {} vs config {}",
                d.patch_side(),
                cfg.patch_side
            )));
        }
    }

    let mut x;
    let mut dict: Option<Dictionary>;
    let mut first_iter = 1usize;
    // Σ R_iᴴ(Dα_i) of the previous iteration, reconstructed as μ ⊙ x̂ so a
    // checkpointed run resumes bit-exactly.
    let mut patch_sum: Option<Vec<Complex64>> = None;
    match start {
        Some(ckpt) => {
            if ckpt.x.rows() != obs.rows() || ckpt.x.cols() != obs.cols() {
                return Err(Error::dims("checkpoint field shape"));
            }
            if ckpt.next_iteration == 0 {
                return Err(Error::invalid("checkpoint iteration must be >= 1"));
            }
            x = ckpt.x.clone();
            dict = match kind {
                SolverKind::DlprPrior => d_prior.cloned(),
                _ => ckpt.dictionary.clone(),
            };
            first_iter = ckpt.next_iteration;
            if uses_patches && first_iter > 1 {
                patch_sum = Some(multiplicity_product(&x, &grid));
            }
        }
        None => {
            x = initialize_wavefront(obs, masks, cfg.init, cfg.seeds.init)?;
            dict = match kind {
                SolverKind::DlprPrior => d_prior.cloned(),
                _ => None,
            };
        }
    }

    let mut trace = Vec::new();
    let mut final_codes: Option<Vec<SparseCode>> = None;

    for t in first_iter..=cfg.iterations {
        let tic = Instant::now();

        // Forward propagation and sensor-plane filtering.
        let v_all = propagate_forward_all(&x, masks)?;
        let u_all = sensor_update(&v_all, obs, cfg.gamma)?;

        // Object-plane noise estimate: sensor discrepancy after filtering,
        // variance-reduced by the adjoint averaging over S masks.
        let disc: f64 = u_all
            .iter()
            .zip(&v_all)
            .map(|(u, v)| {
                u.data()
                    .iter()
                    .zip(v.data())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
            })
            .sum();
        let s_count = obs.count() as f64;
        let n = obs.len_pixels() as f64;
        let sigma_obj_sq = disc / (s_count * n * s_count);

        // Backward propagation.
        let term = if !uses_patches {
            PatchTerm::Disabled
        } else {
            match &patch_sum {
                Some(sum) => PatchTerm::Sum(sum),
                None => PatchTerm::Zero,
            }
        };
        let x_half =
            x_update_with_term(&u_all, term, &grid, masks, cfg.gamma, cfg.beta)?;

        if !uses_patches {
            x = x_half;
            push_trace(&mut trace, t, &x, &u_all, None, obs, masks, cfg, truth, tic)?;
            continue;
        }

        // Patch formation.
        let patches = extract_patches(&x_half, &grid)?;
        let w2 = grid.patch_len();
        let mean_energy: f64 = patches
            .patches()
            .iter()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / patches.patches().len() as f64;
        let rms_amp = (mean_energy / w2 as f64).sqrt();

        // Dictionary learning (skipped when a prior dictionary is plugged).
        if kind == SolverKind::Dlpr {
            let d0 = match dict.take() {
                Some(d) => d,
                None => init_dictionary_from_patches(
                    patches.patches(),
                    cfg.patch_side,
                    cfg.dict.atoms,
                    cfg.seeds.dict,
                )?,
            };
            let lambda = match cfg.dict.lambda {
                LambdaMode::Absolute { lambda } => lambda,
                LambdaMode::Auto {
                    noise_scale,
                    floor_frac,
                } => {
                    let floor = (floor_frac * rms_amp * cfg.patch_side as f64).max(1e-12);
                    (noise_scale * sigma_obj_sq.sqrt()).max(floor)
                }
            };
            let batches = cfg
                .dict
                .inner_batches
                .unwrap_or_else(|| patches.patches().len().div_ceil(cfg.dict.batch))
                .max(1);
            let codl_cfg = CodlConfig {
                iterations: batches,
                batch: cfg.dict.batch,
                lambda,
                bpdn_tol: cfg.dict.bpdn_tol,
                bpdn_sweeps: cfg.dict.bpdn_sweeps,
                bcd_sweeps: cfg.dict.bcd_sweeps,
                bcd_tol: cfg.dict.bcd_tol,
                damping_floor: cfg.dict.damping_floor,
                seed: cfg.seeds.codl.wrapping_add(t as u64),
            };
            dict = Some(codl(patches.patches(), &d0, &codl_cfg)?);
        }
        let dict_ref = dict
            .as_ref()
            .expect("dictionary present past the learning step");

        // Sparse coding.
        let max_atoms = cfg.max_atoms_effective();
        let delta_for = |p: &[Complex64]| -> f64 {
            let energy: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            match cfg.omp_delta {
                OmpDelta::Absolute { delta } => delta,
                OmpDelta::RelativeEnergy { fraction } => fraction * energy,
                OmpDelta::NoiseScaled { scale } => {
                    // Residual floor keeps clean patches from chasing
                    // float-level noise.
                    (scale * scale * w2 as f64 * sigma_obj_sq).max(1e-14 * energy)
                }
            }
        };
        let gram = OmpGram::new(dict_ref);
        let codes: Vec<SparseCode> = patches
            .patches()
            .par_iter()
            .map(|p| omp_with_gram(p, dict_ref, &gram, delta_for(p), max_atoms))
            .collect::<Result<_>>()?;

        // Sparse reconstruction and aggregation.
        let recon: Vec<Vec<Complex64>> =
            codes.par_iter().map(|c| c.reconstruct(dict_ref)).collect();
        let coded = PatchSet::from_patches(grid.clone(), recon)?;
        x = aggregate_patches(&coded)?;
        patch_sum = Some(multiplicity_product(&x, &grid));
        final_codes = Some(codes);

        let sparse_view = final_codes.as_deref().map(|c| (c, dict_ref, &grid));
        push_trace(
            &mut trace,
            t,
            &x,
            &u_all,
            sparse_view,
            obs,
            masks,
            cfg,
            truth,
            tic,
        )?;
    }

    Ok(RetrievalResult {
        estimate: x,
        trace,
        dictionary: dict,
        codes: final_codes,
    })
}

/// μ ⊙ x̂: equal to the patch sum `Σ R_iᴴ(Dα_i)` of the aggregate that
/// produced x̂.
fn multiplicity_product(x: &ComplexField, grid: &PatchGrid) -> Vec<Complex64> {
    x.data()
        .iter()
        .zip(grid.multiplicity())
        .map(|(&z, &m)| z * m as f64)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn push_trace(
    trace: &mut Vec<TraceRow>,
    iteration: usize,
    x: &ComplexField,
    u_all: &[ComplexField],
    sparse_view: Option<(&[SparseCode], &Dictionary, &PatchGrid)>,
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
    truth: Option<&ComplexField>,
    tic: Instant,
) -> Result<()> {
    let objective = objective_value(x, u_all, sparse_view, obs, masks, cfg)?;
    let rmse = truth.map(|t| rmse_wrapped(x, t, true)).transpose()?;
    trace.push(TraceRow {
        iteration,
        rmse,
        objective,
        seconds: tic.elapsed().as_secs_f64(),
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::generate_masks;
    use crate::sensor::{simulate_noiseless, simulate_poisson};

    fn flat_scene(rows: usize, cols: usize) -> ComplexField {
        ComplexField::new(rows, cols, vec![Complex64::new(1.0, 0.0); rows * cols]).unwrap()
    }

    fn small_cfg(model: NoiseModel, s: usize, t: usize, w: usize) -> SolverConfig {
        let mut cfg = SolverConfig::for_model(model);
        cfg.observations = s;
        cfg.iterations = t;
        cfg.patch_side = w;
        cfg.dict.atoms = 24;
        cfg.dict.batch = 16;
        cfg
    }

    #[test]
    fn initialize_matches_data_scale() {
        let masks = generate_masks(8, 8, 3, 2).unwrap();
        let x = flat_scene(8, 8);
        let obs = simulate_noiseless(&x, &masks).unwrap();
        let init = initialize_wavefront(&obs, &masks, InitMode::Flat, 0).unwrap();
        // Unitarity: mean intensity equals mean squared amplitude = 1.
        for z in init.data() {
            assert!((z.re - 1.0).abs() < 1e-12 && z.im == 0.0);
        }
        let zero_obs =
            simulate_poisson(&ComplexField::zeros(8, 8).unwrap(), &masks, 1.0, 1).unwrap();
        let zero_init = initialize_wavefront(&zero_obs, &masks, InitMode::Flat, 0).unwrap();
        assert!(zero_init.norm() == 0.0);
    }

    #[test]
    fn initialize_random_phase_is_seeded() {
        let masks = generate_masks(8, 8, 2, 2).unwrap();
        let obs = simulate_noiseless(&flat_scene(8, 8), &masks).unwrap();
        let a = initialize_wavefront(&obs, &masks, InitMode::RandomPhase, 9).unwrap();
        let b = initialize_wavefront(&obs, &masks, InitMode::RandomPhase, 9).unwrap();
        let c = initialize_wavefront(&obs, &masks, InitMode::RandomPhase, 10).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn gsf_recovers_flat_scene_immediately() {
        let (rows, cols) = (16, 16);
        let masks = generate_masks(rows, cols, 4, 3).unwrap();
        let truth = flat_scene(rows, cols);
        let obs = simulate_noiseless(&truth, &masks).unwrap();
        let mut cfg = SolverConfig::for_model_gsf(obs.model());
        cfg.observations = 4;
        cfg.iterations = 5;
        let r = gsf(&obs, &masks, &cfg, Some(&truth)).unwrap();
        let rmse = r.trace.last().unwrap().rmse.unwrap();
        assert!(rmse <= 1e-6, "flat noiseless baseline rmse {rmse}");
        assert!(r.dictionary.is_none() && r.codes.is_none());
    }

    #[test]
    fn dlpr_recovers_flat_scene_quickly() {
        let (rows, cols) = (16, 16);
        let masks = generate_masks(rows, cols, 4, 3).unwrap();
        let truth = flat_scene(rows, cols);
        let obs = simulate_noiseless(&truth, &masks).unwrap();
        let cfg = small_cfg(obs.model(), 4, 5, 4);
        let r = dlpr(&obs, &masks, &cfg, Some(&truth)).unwrap();
        let rmse = r.trace.last().unwrap().rmse.unwrap();
        assert!(rmse <= 1e-6, "flat noiseless dlpr rmse {rmse}");
        assert_eq!(r.trace.len(), 5);
        assert!(r.dictionary.is_some() && r.codes.is_some());
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let (rows, cols) = (12, 12);
        let masks = generate_masks(rows, cols, 3, 7).unwrap();
        let truth = flat_scene(rows, cols);
        let obs = simulate_poisson(&truth, &masks, 50.0, 11).unwrap();
        let cfg = small_cfg(obs.model(), 3, 3, 4);
        let a = dlpr(&obs, &masks, &cfg, Some(&truth)).unwrap();
        let b = dlpr(&obs, &masks, &cfg, Some(&truth)).unwrap();
        assert_eq!(a.estimate.data(), b.estimate.data());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.rmse, rb.rmse);
            assert_eq!(ra.objective, rb.objective);
        }
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let (rows, cols) = (12, 12);
        let masks = generate_masks(rows, cols, 3, 7).unwrap();
        let truth = flat_scene(rows, cols);
        let obs = simulate_poisson(&truth, &masks, 50.0, 11).unwrap();
        let full_cfg = small_cfg(obs.model(), 3, 6, 4);
        let full = dlpr(&obs, &masks, &full_cfg, Some(&truth)).unwrap();

        let half_cfg = SolverConfig {
            iterations: 3,
            ..full_cfg.clone()
        };
        let half = dlpr(&obs, &masks, &half_cfg, Some(&truth)).unwrap();
        let ckpt = Checkpoint::after(&half, 3);
        let resumed = dlpr_resume(&obs, &masks, &full_cfg, &ckpt, Some(&truth)).unwrap();

        assert_eq!(
            resumed.estimate.data(),
            full.estimate.data(),
            "resume diverged"
        );
        assert_eq!(resumed.trace.len(), 3);
        for (ra, rb) in resumed.trace.iter().zip(&full.trace[3..]) {
            assert_eq!(ra.rmse, rb.rmse, "iteration {} rmse", ra.iteration);
            assert_eq!(ra.objective, rb.objective);
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let masks = generate_masks(8, 8, 2, 1).unwrap();
        let obs = simulate_noiseless(&flat_scene(8, 8), &masks).unwrap();
        let mut cfg = small_cfg(obs.model(), 2, 2, 3);
        cfg.observations = 5;
        assert!(
            dlpr(&obs, &masks, &cfg, None).is_err(),
            "S mismatch must fail"
        );
        cfg.observations = 2;
        let wrong_truth = flat_scene(4, 4);
        assert!(dlpr(&obs, &masks, &cfg, Some(&wrong_truth)).is_err());
    }

    #[test]
    fn prior_dictionary_patch_side_checked() {
        let masks = generate_masks(8, 8, 2, 1).unwrap();
        let obs = simulate_noiseless(&flat_scene(8, 8), &masks).unwrap();
        let cfg = small_cfg(obs.model(), 2, 2, 3);
        let patches = vec![vec![Complex64::new(1.0, 0.0); 16]; 4];
        let d = init_dictionary_from_patches(&patches, 4, 4, 1).unwrap();
        assert!(dlpr_prior(&obs, &masks, &cfg, &d, None).is_err());
    }
}
