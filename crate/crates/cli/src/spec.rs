//! Experiment spec files: TOML with one section per pipeline stage.
//! Command-line flags mirror the spec keys and override them.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

use dlpr_core::retrieval::{InitMode, LambdaMode, OmpDelta, Seeds, SolverConfig};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub masks: MasksSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// "corpus" (built-in signal table) or "file" (truth raster on disk).
    pub source: String,
    /// Corpus row 1..=9.
    pub row: usize,
    pub rows: usize,
    pub cols: usize,
    /// Peak phase magnitude in radians.
    pub peak: f64,
    pub seed: u64,
    /// Truth raster path for `source = "file"`.
    pub truth: Option<PathBuf>,
    /// Explicit amplitude scale; when absent the scene is calibrated so
    /// that `chi_ref` maps to `target_db`.
    pub amplitude_scale: Option<f64>,
    pub calibration_chi_ref: f64,
    pub calibration_target_db: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            source: "corpus".into(),
            row: 1,
            rows: 64,
            cols: 64,
            peak: 8.0,
            seed: 7,
            truth: None,
            amplitude_scale: None,
            calibration_chi_ref: 1e-5,
            calibration_target_db: -7.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasksSpec {
    pub count: usize,
    pub seed: u64,
}

impl Default for MasksSpec {
    fn default() -> Self {
        Self {
            count: 12,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// "poisson", "gaussian" or "noiseless".
    pub model: String,
    pub chi: Option<f64>,
    pub sigma: Option<f64>,
    /// Gaussian noise level as a global SNR target in dB (alternative to
    /// an explicit sigma).
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            model: "poisson".into(),
            chi: Some(1e-3),
            sigma: None,
            snr_db: None,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    /// "dlpr", "dlpr_prior" or "gsf".
    pub kind: String,
    pub iterations: Option<usize>,
    pub patch_side: usize,
    pub stride: usize,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub tau_a: Option<f64>,
    pub atoms: usize,
    pub batch: usize,
    pub lambda: Option<f64>,
    pub omp_delta_scale: Option<f64>,
    pub max_atoms: Option<usize>,
    /// Directory holding the prior dictionary (dlpr_prior).
    pub prior: Option<PathBuf>,
    pub init: String,
    pub seed_init: u64,
    pub seed_dict: u64,
    pub seed_codl: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            kind: "dlpr".into(),
            iterations: None,
            patch_side: 10,
            stride: 1,
            gamma: None,
            beta: None,
            tau_a: None,
            atoms: 256,
            batch: 64,
            lambda: None,
            omp_delta_scale: None,
            max_atoms: None,
            prior: None,
            init: "flat".into(),
            seed_init: 1,
            seed_dict: 2,
            seed_codl: 3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec {}", path.display()))?;
        // toml reports line/column positions for malformed fields.
        let spec: ExperimentSpec =
            toml::from_str(&text).with_context(|| format!("parsing spec {}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.scene.source.as_str() {
            "corpus" => {
                if !(1..=9).contains(&self.scene.row) {
                    bail!("scene.row: corpus rows are 1..=9, got {}", self.scene.row);
                }
                if self.scene.rows == 0 || self.scene.cols == 0 {
                    bail!("scene.rows/cols must be positive");
                }
            }
            "file" => {
                if self.scene.truth.is_none() {
                    bail!("scene.truth: a raster path is required when scene.source = \"file\"");
                }
            }
            other => bail!("scene.source: expected \"corpus\" or \"file\", got \"{other}\""),
        }
        if self.masks.count == 0 {
            bail!("masks.count must be at least 1");
        }
        match self.noise.model.as_str() {
            "poisson" => {
                let chi = self
                    .noise
                    .chi
                    .context("noise.chi is required for poisson")?;
                if chi <= 0.0 {
                    bail!("noise.chi must be positive, got {chi}");
                }
            }
            "gaussian" => {
                if self.noise.sigma.is_none() && self.noise.snr_db.is_none() {
                    bail!("noise.sigma or noise.snr_db is required for gaussian");
                }
                if let Some(s) = self.noise.sigma {
                    if s <= 0.0 {
                        bail!("noise.sigma must be positive, got {s}");
                    }
                }
            }
            "noiseless" => {}
            other => {
                bail!("noise.model: expected poisson, gaussian or noiseless, got \"{other}\"")
            }
        }
        match self.solver.kind.as_str() {
            "dlpr" | "gsf" => {}
            "dlpr_prior" => {
                if self.solver.prior.is_none() {
                    bail!("solver.prior: a dictionary directory is required for dlpr_prior");
                }
            }
            other => bail!("solver.kind: expected dlpr, dlpr_prior or gsf, got \"{other}\""),
        }
        if !matches!(self.solver.init.as_str(), "flat" | "random_phase") {
            bail!(
                "solver.init: expected flat or random_phase, got \"{}\"",
                self.solver.init
            );
        }
        Ok(())
    }

    /// Builds the core solver configuration for a resolved noise model.
    pub fn solver_config(&self, model: dlpr_core::sensor::NoiseModel) -> Result<SolverConfig> {
        let mut cfg = if self.solver.kind == "gsf" {
            SolverConfig::for_model_gsf(model)
        } else {
            SolverConfig::for_model(model)
        };
        cfg.observations = self.masks.count;
        if let Some(t) = self.solver.iterations {
            cfg.iterations = t;
        }
        cfg.patch_side = self.solver.patch_side;
        cfg.stride = self.solver.stride;
        if let Some(g) = self.solver.gamma {
            cfg.gamma = g;
        }
        if let Some(b) = self.solver.beta {
            cfg.beta = b;
        }
        if let Some(t) = self.solver.tau_a {
            cfg.tau_a = t;
        }
        cfg.dict.atoms = self.solver.atoms;
        cfg.dict.batch = self.solver.batch;
        if let Some(l) = self.solver.lambda {
            cfg.dict.lambda = LambdaMode::Absolute { lambda: l };
        }
        if let Some(s) = self.solver.omp_delta_scale {
            cfg.omp_delta = OmpDelta::NoiseScaled { scale: s };
        }
        cfg.max_atoms = self.solver.max_atoms;
        cfg.seeds = Seeds {
            init: self.solver.seed_init,
            dict: self.solver.seed_dict,
            codl: self.solver.seed_codl,
        };
        cfg.init = match self.solver.init.as_str() {
            "random_phase" => InitMode::RandomPhase,
            _ => InitMode::Flat,
        };
        cfg.validate()
            .map_err(|e| anyhow::anyhow!("solver config: {e}"))?;
        Ok(cfg)
    }
}
