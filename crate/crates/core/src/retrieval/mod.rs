//! Alternating-minimization drivers and their building blocks.
//!
//! One outer iteration runs: forward propagation through every mask, the
//! proximal sensor filter, the diagonal backward-propagation solve, patch
//! extraction, online dictionary learning, greedy sparse coding, and patch
//! aggregation. The baseline solver keeps only the propagation and sensor
//! steps.

mod driver;

pub use driver::{
    dlpr, dlpr_prior, dlpr_prior_resume, dlpr_resume, gsf, gsf_resume, initialize_wavefront,
    Checkpoint, RetrievalResult, TraceRow,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::optics::{adjoint_sum, propagate_forward_all, MaskSet};
use crate::patch::{accumulate_patches, extract_patches, PatchGrid, PatchSet};
use crate::sensor::{NoiseModel, ObservationSet};
use crate::sparse::{Dictionary, SparseCode};

/// How the OMP residual tolerance δ is chosen each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpDelta {
    /// δ = (scale·w·σ̂)² from the estimated object-plane noise σ̂ (the
    /// sensor-plane discrepancy after filtering, averaged down by the mask
    /// count). Shrinks to zero on clean data.
    NoiseScaled { scale: f64 },
    /// Fixed squared-residual tolerance per patch.
    Absolute { delta: f64 },
    /// δ_i = fraction·‖patch_i‖².
    RelativeEnergy { fraction: f64 },
}

/// How the BPDN weight λ inside dictionary learning is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaMode {
    /// λ = max(noise_scale·σ̂, floor_frac·‖patch‖-scale), where the patch
    /// scale is the RMS amplitude times the patch side (coefficients over
    /// unit-ball atoms live at that scale).
    Auto {
        noise_scale: f64,
        floor_frac: f64,
    },
    Absolute {
        lambda: f64,
    },
}

/// Dictionary-learning knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct DictConfig {
    /// Number of atoms k.
    pub atoms: usize,
    /// Mini-batch size η.
    pub batch: usize,
    /// Mini-batches per outer iteration; `None` means one full pass,
    /// `⌈|I_p|/η⌉`.
    pub inner_batches: Option<usize>,
    pub lambda: LambdaMode,
    pub bpdn_tol: f64,
    pub bpdn_sweeps: usize,
    pub bcd_sweeps: usize,
    pub bcd_tol: f64,
    pub damping_floor: f64,
}

impl Default for DictConfig {
    fn default() -> Self {
        Self {
            atoms: 256,
            batch: 64,
            inner_batches: None,
            lambda: LambdaMode::Auto {
                noise_scale: 3.0,
                floor_frac: 0.1,
            },
            bpdn_tol: 1e-4,
            bpdn_sweeps: 60,
            bcd_sweeps: 50,
            bcd_tol: 1e-6,
            damping_floor: 0.9,
        }
    }
}

/// Wavefront initialization: flat phase at the data-implied amplitude, or
/// seeded uniform random phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Flat,
    RandomPhase,
}

/// RNG seeds for the stochastic parts of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    /// Random-phase initialization.
    pub init: u64,
    /// Dictionary initialization from patches.
    pub dict: u64,
    /// Mini-batch sampling (combined with the iteration index).
    pub codl: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            init: 1,
            dict: 2,
            codl: 3,
        }
    }
}

/// Full solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Quadratic sensor-coupling weight γ.
    pub gamma: f64,
    /// Patch-penalty weight β.
    pub beta: f64,
    /// Sparsity weight recorded in the objective (`τ_a·‖α‖₀` terms).
    pub tau_a: f64,
    pub omp_delta: OmpDelta,
    /// Cap on atoms per patch; `None` means `w²/4`.
    pub max_atoms: Option<usize>,
    /// Expected number of observations S.
    pub observations: usize,
    /// Outer iterations T.
    pub iterations: usize,
    pub patch_side: usize,
    pub stride: usize,
    pub dict: DictConfig,
    pub seeds: Seeds,
    pub init: InitMode,
}

impl SolverConfig {
    /// Defaults tied to the noise model: γ = 1/χ, β = χ/1000 for Poisson
    /// data and γ = σ²/10, β = 0.01/σ² for Gaussian data, with S = 12,
    /// T = 20, 10×10 patches at unit stride.
    pub fn for_model(model: NoiseModel) -> Self {
        let (gamma, beta) = match model {
            NoiseModel::Poisson { chi } => (1.0 / chi, chi / 1000.0),
            NoiseModel::Gaussian { sigma } => (sigma * sigma / 10.0, 0.01 / (sigma * sigma)),
            // Exact data has no noise scale to tie the weights to. A tiny
            // γβ keeps the backward step purely data-driven; object-plane
            // filtering still happens at the coding step.
            NoiseModel::Noiseless => (1.0, 1e-9),
        };
        Self {
            gamma,
            beta,
            tau_a: 0.0,
            omp_delta: OmpDelta::NoiseScaled { scale: 1.15 },
            max_atoms: None,
            observations: 12,
            iterations: 20,
            patch_side: 10,
            stride: 1,
            dict: DictConfig::default(),
            seeds: Seeds::default(),
            init: InitMode::Flat,
        }
    }

    /// Baseline defaults: the same settings at the baseline's customary 50
    /// iterations.
    pub fn for_model_gsf(model: NoiseModel) -> Self {
        Self {
            iterations: 50,
            ..Self::for_model(model)
        }
    }

    pub fn max_atoms_effective(&self) -> usize {
        self.max_atoms
            .unwrap_or((self.patch_side * self.patch_side / 4).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta must be positive"));
        }
        if self.tau_a < 0.0 {
            return Err(Error::invalid("tau_a must be nonnegative"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.patch_side == 0 || self.stride == 0 {
            return Err(Error::invalid("patch side and stride must be positive"));
        }
        if self.observations == 0 {
            return Err(Error::invalid("observation count must be positive"));
        }
        if self.dict.atoms == 0 || self.dict.batch == 0 {
            return Err(Error::invalid(
                "dictionary atoms and batch must be positive",
            ));
        }
        Ok(())
    }
}

/// Patch term of the backward-propagation update.
pub(crate) enum PatchTerm<'a> {
    /// No object-plane model at all (baseline): the multiplicity weights
    /// drop out and the update is the plain adjoint mean.
    Disabled,
    /// Sparse model active but all codes zero (first iteration).
    Zero,
    /// `Σ R_iᴴ(Dα_i)` already accumulated into a raster.
    Sum(&'a [Complex64]),
}

/// Backward propagation: solves the normal equations of the coupled
/// least-squares problem in closed form,
/// `x̂ = diag(S/(βγ) + μ_j)⁻¹ [ (1/(βγ)) Σ_s A_sᴴu_s + Σ_i R_iᴴ(Dα_i) ]`.
///
/// Passing no coded patches drops the patch term entirely and the update
/// reduces to the adjoint mean `(1/S) Σ_s A_sᴴu_s`.
pub fn x_update(
    u_all: &[ComplexField],
    coded: Option<&PatchSet>,
    grid: &PatchGrid,
    masks: &MaskSet,
    gamma: f64,
    beta: f64,
) -> Result<ComplexField> {
    let sums;
    let term = match coded {
        Some(ps) => {
            if ps.grid() != grid {
                return Err(Error::dims("coded patches use a different grid"));
            }
            sums = accumulate_patches(ps);
            PatchTerm::Sum(&sums)
        }
        None => PatchTerm::Disabled,
    };
    x_update_with_term(u_all, term, grid, masks, gamma, beta)
}

pub(crate) fn x_update_with_term(
    u_all: &[ComplexField],
    term: PatchTerm<'_>,
    grid: &PatchGrid,
    masks: &MaskSet,
    gamma: f64,
    beta: f64,
) -> Result<ComplexField> {
    if gamma <= 0.0 || beta <= 0.0 {
        return Err(Error::invalid("x update: gamma and beta must be positive"));
    }
    let s_count = masks.count() as f64;
    let adj = adjoint_sum(u_all, masks)?;

    if let PatchTerm::Disabled = term {
        let data = adj.data().iter().map(|&z| z / s_count).collect();
        return ComplexField::new(adj.rows(), adj.cols(), data);
    }

    let weight = 1.0 / (beta * gamma);
    let mu = grid.multiplicity();
    if mu.len() != adj.len() {
        return Err(Error::dims("grid does not match the raster"));
    }
    let zeros;
    let patch_sum: &[Complex64] = match term {
        PatchTerm::Sum(s) => {
            if s.len() != adj.len() {
                return Err(Error::dims("patch sum length"));
            }
            s
        }
        PatchTerm::Zero => {
            zeros = vec![Complex64::new(0.0, 0.0); adj.len()];
            &zeros
        }
        PatchTerm::Disabled => unreachable!(),
    };
    let data = adj
        .data()
        .iter()
        .zip(patch_sum)
        .zip(mu)
        .map(|((&a, &p), &m)| (a * weight + p) / (s_count * weight + m as f64))
        .collect();
    ComplexField::new(adj.rows(), adj.cols(), data)
}

/// Evaluates the full variational objective for diagnostics:
/// data term + `(1/γ)Σ_s‖u_s − A_s x‖²` + `Σ_i [τ_a‖α_i‖₀ + β‖R_i x − Dα_i‖²]`.
///
/// The sparse model may be absent (baseline runs); the data term dispatches
/// on the observation model (`0` for exact data). A zero sensor amplitude
/// against a positive Poisson count yields `+∞`.
pub fn objective_value(
    x: &ComplexField,
    u_all: &[ComplexField],
    sparse_model: Option<(&[SparseCode], &Dictionary, &PatchGrid)>,
    obs: &ObservationSet,
    masks: &MaskSet,
    cfg: &SolverConfig,
) -> Result<f64> {
    if u_all.len() != obs.count() {
        return Err(Error::dims("objective: sensor fields vs observations"));
    }
    let v_all = propagate_forward_all(x, masks)?;
    let mut total = 0.0f64;
    for s in 0..obs.count() {
        let z = obs.raster(s);
        let u = u_all[s].data();
        let v = v_all[s].data();
        for l in 0..z.len() {
            let usq = u[l].norm_sqr();
            match obs.model() {
                NoiseModel::Poisson { chi } => {
                    let rate = usq * chi;
                    if z[l] > 0.0 {
                        if rate <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        total += rate - z[l] * rate.ln();
                    } else {
                        total += rate;
                    }
                }
                NoiseModel::Gaussian { sigma } => {
                    let e = usq - z[l];
                    total += e * e / (sigma * sigma);
                }
                NoiseModel::Noiseless => {}
            }
            total += (u[l] - v[l]).norm_sqr() / cfg.gamma;
        }
    }
    if let Some((codes, dict, grid)) = sparse_model {
        let patches = extract_patches(x, grid)?;
        if codes.len() != patches.patches().len() {
            return Err(Error::dims("objective: codes vs patches"));
        }
        for (code, patch) in codes.iter().zip(patches.patches()) {
            total += cfg.tau_a * code.nnz() as f64;
            let rec = code.reconstruct(dict);
            let res: f64 = patch
                .iter()
                .zip(&rec)
                .map(|(&p, &r)| (p - r).norm_sqr())
                .sum();
            total += cfg.beta * res;
        }
    }
    Ok(total)
}
