//! Sensor-plane modeling: noisy intensity simulation, SNR accounting and
//! the proximal amplitude filters.
//!
//! Observations are squared magnitudes `y_s = |A_s x|²` corrupted either by
//! photon counting (`z ~ Poisson(y·χ)`) or by additive Gaussian noise
//! (`z = y + σ·ε`). The per-pixel filters return the amplitude `b ≥ 0`
//! minimizing `g(b) + (1/γ)(b − |v|)²` for the model data term `g`; the
//! filtered sensor field keeps the phase of the propagated field:
//! `u = b · exp(j·angle(v))`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::optics::{propagate_forward_all, MaskSet};

/// Observation noise model, carried with the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Photon counting: `z ~ Poisson(y·χ)`; `chi` scales counts per unit
    /// intensity.
    Poisson { chi: f64 },
    /// Additive intensity noise: `z = y + σ·ε`, `ε ~ N(0,1)`.
    Gaussian { sigma: f64 },
    /// Exact intensities `z = y`; selects the `b = √z` amplitude
    /// substitution in the sensor update.
    Noiseless,
}

impl NoiseModel {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Poisson { .. } => "poisson",
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::Noiseless => "noiseless",
        }
    }
}

/// A set of `S` intensity rasters plus the noise metadata needed to filter
/// them.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    rows: usize,
    cols: usize,
    rasters: Vec<Vec<f64>>,
    model: NoiseModel,
    seed: u64,
}

impl ObservationSet {
    pub fn new(
        rows: usize,
        cols: usize,
        rasters: Vec<Vec<f64>>,
        model: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || rasters.is_empty() {
            return Err(Error::invalid("observation set must be non-empty"));
        }
        let n = rows * cols;
        for (s, z) in rasters.iter().enumerate() {
            if z.len() != n {
                return Err(Error::dims(format!(
                    "raster {s} has {} pixels, want {n}",
                    z.len()
                )));
            }
            match model {
                NoiseModel::Poisson { chi } => {
                    if chi <= 0.0 || !chi.is_finite() {
                        return Err(Error::invalid("poisson chi must be positive"));
                    }
                    if z.iter()
                        .any(|&v| v < 0.0 || v.fract() != 0.0 || !v.is_finite())
                    {
                        return Err(Error::invalid(format!(
                            "raster {s}: poisson counts must be nonnegative integers"
                        )));
                    }
                }
                NoiseModel::Gaussian { sigma } => {
                    if sigma <= 0.0 || !sigma.is_finite() {
                        return Err(Error::invalid("gaussian sigma must be positive"));
                    }
                    if z.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid(format!("raster {s}: non-finite intensity")));
                    }
                }
                NoiseModel::Noiseless => {
                    if z.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(Error::invalid(format!(
                            "raster {s}: exact intensities must be nonnegative"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            rasters,
            model,
            seed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len_pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of observations `S`.
    pub fn count(&self) -> usize {
        self.rasters.len()
    }

    pub fn raster(&self, s: usize) -> &[f64] {
        &self.rasters[s]
    }

    pub fn rasters(&self) -> &[Vec<f64>] {
        &self.rasters
    }

    pub fn model(&self) -> NoiseModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Clean intensities `y_s = |A_s x|²` for every mask.
pub fn clean_intensities(x: &ComplexField, masks: &MaskSet) -> Result<Vec<Vec<f64>>> {
    let fields = propagate_forward_all(x, masks)?;
    Ok(fields
        .iter()
        .map(|v| v.data().iter().map(|z| z.norm_sqr()).collect())
        .collect())
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates photon-limited observations `z_s[l] ~ Poisson(y_s[l]·χ)`.
///
/// Every pixel draws from its own counter-derived RNG stream, so the result
/// is reproducible regardless of evaluation order.
pub fn simulate_poisson(
    x: &ComplexField,
    masks: &MaskSet,
    chi: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if chi <= 0.0 || !chi.is_finite() {
        return Err(Error::invalid("chi must be positive"));
    }
    let y = clean_intensities(x, masks)?;
    let n = masks.len_pixels() as u64;
    let rasters: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(s, ys)| {
            ys.iter()
                .enumerate()
                .map(|(l, &yv)| {
                    let mut rng = stream_rng(seed, s as u64 * n + l as u64);
                    sample_poisson(yv * chi, &mut rng) as f64
                })
                .collect()
        })
        .collect();
    ObservationSet::new(
        masks.rows(),
        masks.cols(),
        rasters,
        NoiseModel::Poisson { chi },
        seed,
    )
}

/// Simulates Gaussian-noise observations `z_s[l] = y_s[l] + σ·ε`.
pub fn simulate_gaussian(
    x: &ComplexField,
    masks: &MaskSet,
    sigma: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::invalid("sigma must be positive"));
    }
    let y = clean_intensities(x, masks)?;
    let n = masks.len_pixels() as u64;
    let rasters: Vec<Vec<f64>> = y
        .par_iter()
        .enumerate()
        .map(|(s, ys)| {
            ys.iter()
                .enumerate()
                .map(|(l, &yv)| {
                    let mut rng = stream_rng(seed, s as u64 * n + l as u64);
                    let eps: f64 = rng.sample(StandardNormal);
                    yv + sigma * eps
                })
                .collect()
        })
        .collect();
    ObservationSet::new(
        masks.rows(),
        masks.cols(),
        rasters,
        NoiseModel::Gaussian { sigma },
        seed,
    )
}

/// Packages exact intensities as a noiseless observation set.
pub fn simulate_noiseless(x: &ComplexField, masks: &MaskSet) -> Result<ObservationSet> {
    let y = clean_intensities(x, masks)?;
    ObservationSet::new(masks.rows(), masks.cols(), y, NoiseModel::Noiseless, 0)
}

// ---------------------------------------------------------------------------
// Poisson sampling
// ---------------------------------------------------------------------------

/// One Poisson draw with mean `lambda`: CDF inversion below mean 10, the
/// transformed-rejection (PTRS) method above it.
pub fn sample_poisson(lambda: f64, rng: &mut impl Rng) -> u64 {
    assert!(
        lambda >= 0.0 && lambda.is_finite(),
        "poisson mean must be finite and >= 0"
    );
    if lambda == 0.0 {
        0
    } else if lambda < 10.0 {
        poisson_inversion(lambda, rng)
    } else {
        poisson_ptrs(lambda, rng)
    }
}

fn poisson_inversion(lambda: f64, rng: &mut impl Rng) -> u64 {
    let u: f64 = rng.gen();
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0u64;
    // At mean < 10 the tail beyond a few hundred is below f64 resolution.
    while u > cdf && k < 500 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Hörmann's transformed rejection with squeeze (valid for mean >= 10).
fn poisson_ptrs(lambda: f64, rng: &mut impl Rng) -> u64 {
    let b = 0.931 + 2.53 * lambda.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_lambda = lambda.ln();
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let kf = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return kf as u64;
        }
        if kf < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let k = kf;
        if (v * inv_alpha / (a / (us * us) + b)).ln() <= k * ln_lambda - lambda - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

/// Lanczos approximation of ln Γ(x) for x > 0.
#[allow(clippy::excessive_precision)] // published coefficient table
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    debug_assert!(x > 0.0);
    let xm1 = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (xm1 + i as f64);
    }
    let t = xm1 + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (xm1 + 0.5) * t.ln() - t + acc.ln()
}

// ---------------------------------------------------------------------------
// SNR accounting
// ---------------------------------------------------------------------------

/// Pointwise photon-count SNR `y·χ` (squared mean over variance of the
/// count).
pub fn snr_pointwise(y: f64, chi: f64) -> f64 {
    y * chi
}

/// Global photon-count SNR `χ·(ΣΣ y²)/(ΣΣ y)` over all masks and pixels.
pub fn snr_global(y_all: &[Vec<f64>], chi: f64) -> Result<f64> {
    let sum: f64 = y_all.iter().flatten().sum();
    if sum == 0.0 {
        return Err(Error::UndefinedSnr);
    }
    let sum_sq: f64 = y_all.iter().flatten().map(|&y| y * y).sum();
    Ok(chi * sum_sq / sum)
}

/// [`snr_global`] in decibels (`10·log₁₀`).
pub fn snr_global_db(y_all: &[Vec<f64>], chi: f64) -> Result<f64> {
    Ok(10.0 * snr_global(y_all, chi)?.log10())
}

/// Noise standard deviation giving a target global SNR (dB) under the
/// Gaussian model, using the analogous squared-mean-over-variance ratio
/// `(ΣΣ y²)/(S·n·σ²)`.
pub fn gaussian_sigma_for_snr_db(y_all: &[Vec<f64>], snr_db: f64) -> Result<f64> {
    let count: usize = y_all.iter().map(|y| y.len()).sum();
    let sum_sq: f64 = y_all.iter().flatten().map(|&y| y * y).sum();
    if sum_sq == 0.0 || count == 0 {
        return Err(Error::UndefinedSnr);
    }
    let target = 10f64.powf(snr_db / 10.0);
    Ok((sum_sq / (count as f64 * target)).sqrt())
}

/// Amplitude factor κ such that `κ·x` observed through `masks` has global
/// Poisson SNR `target_db` at photon scale `chi_ref`. Scaling the field by
/// κ scales every intensity by κ², so the SNR ratio scales by κ² as well.
pub fn amplitude_scale_for_snr(
    x: &ComplexField,
    masks: &MaskSet,
    chi_ref: f64,
    target_db: f64,
) -> Result<f64> {
    let y = clean_intensities(x, masks)?;
    let base = snr_global(&y, chi_ref)?;
    let target = 10f64.powf(target_db / 10.0);
    Ok((target / base).sqrt())
}

// ---------------------------------------------------------------------------
// Proximal amplitude filters
// ---------------------------------------------------------------------------

/// Closed-form minimizer of the Poisson data term plus quadratic proximity:
/// `b²χ − z·log(b²χ) + (1/γ)(b − |v|)²` over `b ≥ 0`, i.e.
/// `b = (|v| + sqrt(|v|² + 4zγ(1+γχ))) / (2(1+γχ))`.
pub fn sensor_filter_poisson(v_abs: f64, z: f64, gamma: f64, chi: f64) -> Result<f64> {
    if !(v_abs.is_finite() && z.is_finite() && gamma.is_finite() && chi.is_finite()) {
        return Err(Error::invalid("poisson filter: non-finite input"));
    }
    if gamma <= 0.0 || chi <= 0.0 {
        return Err(Error::invalid(
            "poisson filter: gamma and chi must be positive",
        ));
    }
    if z < 0.0 {
        return Err(Error::invalid("poisson filter: negative photon count"));
    }
    let v = v_abs.abs();
    let denom = 1.0 + gamma * chi;
    Ok((v + (v * v + 4.0 * z * gamma * denom).sqrt()) / (2.0 * denom))
}

/// Nonnegative root of the depressed cubic `b³ + Cb + D = 0` with
/// `C = σ²/(2γ) − z`, `D = −(σ²/(2γ))|v|`, chosen as the minimizer of the
/// Gaussian objective `(1/σ²)(b² − z)² + (1/γ)(b − |v|)²`.
pub fn sensor_filter_gaussian(v_abs: f64, z: f64, gamma: f64, sigma: f64) -> Result<f64> {
    if !(v_abs.is_finite() && z.is_finite() && gamma.is_finite() && sigma.is_finite()) {
        return Err(Error::invalid("gaussian filter: non-finite input"));
    }
    if gamma <= 0.0 || sigma <= 0.0 {
        return Err(Error::invalid(
            "gaussian filter: gamma and sigma must be positive",
        ));
    }
    let v = v_abs.abs();
    let half_ratio = sigma * sigma / (2.0 * gamma);
    let c = half_ratio - z;
    let d = -half_ratio * v;

    let objective = |b: f64| {
        let e = b * b - z;
        e * e / (sigma * sigma) + (b - v) * (b - v) / gamma
    };

    let mut best: Option<(f64, f64)> = None;
    for root in depressed_cubic_roots(c, d) {
        if root < -1e-12 {
            continue;
        }
        let b = polish_cubic_root(root.max(0.0), c, d).max(0.0);
        let val = objective(b);
        if best.is_none_or(|(_, bv)| val < bv) {
            best = Some((b, val));
        }
    }
    // D <= 0 guarantees a nonnegative real root (p(0) = D <= 0, p(+inf) > 0).
    let (b, _) = best.expect("cubic with D <= 0 always has a nonnegative root");
    Ok(b)
}

/// Real roots of `t³ + c·t + d = 0`.
fn depressed_cubic_roots(c: f64, d: f64) -> Vec<f64> {
    if c == 0.0 && d == 0.0 {
        return vec![0.0];
    }
    let discriminant = -4.0 * c * c * c - 27.0 * d * d;
    if discriminant > 0.0 {
        // Three real roots: trigonometric form (requires c < 0 here).
        let m = 2.0 * (-c / 3.0).sqrt();
        let arg = (3.0 * d / (c * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        // One real root: Cardano.
        let half_d = d / 2.0;
        let shifted = (half_d * half_d + c * c * c / 27.0).max(0.0).sqrt();
        vec![(-half_d + shifted).cbrt() + (-half_d - shifted).cbrt()]
    }
}

/// One guarded Newton step on `p(b) = b³ + cb + d`.
fn polish_cubic_root(b: f64, c: f64, d: f64) -> f64 {
    let p = b * b * b + c * b + d;
    let dp = 3.0 * b * b + c;
    if dp.abs() > 1e-300 {
        let next = b - p / dp;
        if next.is_finite() {
            let p_next = next * next * next + c * next + d;
            if p_next.abs() <= p.abs() {
                return next;
            }
        }
    }
    b
}

/// Filters every sensor field: `u_s[l] = b_s[l]·exp(j·angle(v_s[l]))` with
/// `b` from the model-matched filter (`√z` for exact intensities).
/// `angle(0)` is taken as 0, so zero pixels map to the real value `b`.
pub fn sensor_update(
    v_all: &[ComplexField],
    obs: &ObservationSet,
    gamma: f64,
) -> Result<Vec<ComplexField>> {
    if v_all.len() != obs.count() {
        return Err(Error::dims(format!(
            "{} propagated fields for {} observations",
            v_all.len(),
            obs.count()
        )));
    }
    for v in v_all {
        if v.rows() != obs.rows() || v.cols() != obs.cols() {
            return Err(Error::dims("sensor update: field/observation shape"));
        }
    }
    let model = obs.model();
    (0..obs.count())
        .into_par_iter()
        .map(|s| {
            let v = &v_all[s];
            let z = obs.raster(s);
            let mut out = Vec::with_capacity(v.len());
            for (l, &vz) in v.data().iter().enumerate() {
                let v_abs = vz.norm();
                let b = match model {
                    NoiseModel::Poisson { chi } => sensor_filter_poisson(v_abs, z[l], gamma, chi)?,
                    NoiseModel::Gaussian { sigma } => {
                        sensor_filter_gaussian(v_abs, z[l], gamma, sigma)?
                    }
                    NoiseModel::Noiseless => z[l].sqrt(),
                };
                let u = if v_abs > 0.0 {
                    vz * (b / v_abs)
                } else {
                    Complex64::new(b, 0.0)
                };
                out.push(u);
            }
            ComplexField::new(v.rows(), v.cols(), out)
        })
        .collect()
}
