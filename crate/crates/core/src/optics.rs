//! Coded-diffraction propagation: random phase masks and the unitary
//! operators `A_s = F M_s`.
//!
//! `M_s` is a diagonal matrix of unit-modulus complex exponents whose
//! phases are drawn i.i.d. from `{0, π/2, −π/2, π}`, and `F` is the
//! unitary 2-D DFT (scaled by `1/√n` in both directions). With that
//! normalization `A_sᴴA_s = I` holds literally, which the backward
//! propagation step relies on.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// The four admissible mask phases.
pub const MASK_ALPHABET: [f64; 4] = [0.0, FRAC_PI_2, -FRAC_PI_2, PI];

/// A set of `S` diagonal phase masks over a fixed raster.
#[derive(Debug, Clone)]
pub struct MaskSet {
    rows: usize,
    cols: usize,
    seed: u64,
    /// Mask phases φ^s, one raster per mask (row-major).
    phases: Vec<Vec<f64>>,
    /// Cached unit-modulus factors e^{jφ}.
    factors: Vec<Vec<Complex64>>,
}

impl MaskSet {
    /// Wraps explicit mask phases, checking the 4-phase alphabet.
    pub fn from_phases(rows: usize, cols: usize, phases: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("mask raster must be non-empty"));
        }
        if phases.is_empty() {
            return Err(Error::invalid("mask count must be at least 1"));
        }
        let n = rows * cols;
        for (s, p) in phases.iter().enumerate() {
            if p.len() != n {
                return Err(Error::dims(format!(
                    "mask {s} has {} entries, want {n}",
                    p.len()
                )));
            }
            for &v in p {
                if !MASK_ALPHABET.iter().any(|&a| (a - v).abs() < 1e-12) {
                    return Err(Error::invalid(format!(
                        "mask {s} contains phase {v} outside {{0, ±π/2, π}}"
                    )));
                }
            }
        }
        let factors = phases
            .iter()
            .map(|p| p.iter().map(|&v| alphabet_factor(v)).collect())
            .collect();
        Ok(Self {
            rows,
            cols,
            seed,
            phases,
            factors,
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

    /// Number of masks `S`.
    pub fn count(&self) -> usize {
        self.phases.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phases(&self, s: usize) -> &[f64] {
        &self.phases[s]
    }

    pub fn all_phases(&self) -> &[Vec<f64>] {
        &self.phases
    }

    fn check_index(&self, s: usize) -> Result<()> {
        if s >= self.count() {
            return Err(Error::invalid(format!(
                "mask index {s} out of range 0..{}",
                self.count()
            )));
        }
        Ok(())
    }

    fn check_field(&self, f: &ComplexField) -> Result<()> {
        if f.rows() != self.rows || f.cols() != self.cols {
            return Err(Error::dims(format!(
                "field {}x{} vs masks {}x{}",
                f.rows(),
                f.cols(),
                self.rows,
                self.cols
            )));
        }
        Ok(())
    }
}

/// Exact unit factors for the 4-phase alphabet; general phases fall back to
/// `cis`.
fn alphabet_factor(phase: f64) -> Complex64 {
    if phase == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if (phase - FRAC_PI_2).abs() < 1e-12 {
        Complex64::new(0.0, 1.0)
    } else if (phase + FRAC_PI_2).abs() < 1e-12 {
        Complex64::new(0.0, -1.0)
    } else if (phase - PI).abs() < 1e-12 {
        Complex64::new(-1.0, 0.0)
    } else {
        Complex64::from_polar(1.0, phase)
    }
}

/// Draws `s_count` masks with i.i.d. uniform phases from the 4-element
/// alphabet, reproducible from the seed.
pub fn generate_masks(rows: usize, cols: usize, s_count: usize, seed: u64) -> Result<MaskSet> {
    if s_count == 0 {
        return Err(Error::invalid("mask count must be at least 1"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("mask raster must be non-empty"));
    }
    let n = rows * cols;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let phases = (0..s_count)
        .map(|_| {
            (0..n)
                .map(|_| MASK_ALPHABET[rng.gen_range(0..4usize)])
                .collect()
        })
        .collect();
    MaskSet::from_phases(rows, cols, phases, seed)
}

// ---------------------------------------------------------------------------
// Unitary 2-D FFT with cached plans
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct Fft2 {
    fwd_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

fn fft2_plans(rows: usize, cols: usize) -> Fft2 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Fft2>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry((rows, cols))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Fft2 {
                fwd_row: planner.plan_fft_forward(cols),
                fwd_col: planner.plan_fft_forward(rows),
                inv_row: planner.plan_fft_inverse(cols),
                inv_col: planner.plan_fft_inverse(rows),
            }
        })
        .clone()
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut Vec<Complex64>) {
    dst.clear();
    dst.resize(rows * cols, Complex64::new(0.0, 0.0));
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

/// In-place unitary 2-D DFT of a row-major raster. `inverse` selects Fᴴ.
fn fft2_unitary(data: &mut Vec<Complex64>, rows: usize, cols: usize, inverse: bool) {
    let plans = fft2_plans(rows, cols);
    let (row_plan, col_plan) = if inverse {
        (plans.inv_row, plans.inv_col)
    } else {
        (plans.fwd_row, plans.fwd_col)
    };

    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        row_plan
            .get_inplace_scratch_len()
            .max(col_plan.get_inplace_scratch_len())
    ];
    for row in data.chunks_exact_mut(cols) {
        row_plan.process_with_scratch(row, &mut scratch);
    }
    let mut t = Vec::new();
    transpose(data, rows, cols, &mut t);
    for col in t.chunks_exact_mut(rows) {
        col_plan.process_with_scratch(col, &mut scratch);
    }
    transpose(&t, cols, rows, data);

    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    for z in data.iter_mut() {
        *z *= scale;
    }
}

/// Forward propagation `v_s = F (M_s x)` with the unitary DFT, so
/// `‖v_s‖ = ‖x‖`.
pub fn propagate_forward(x: &ComplexField, masks: &MaskSet, s: usize) -> Result<ComplexField> {
    masks.check_index(s)?;
    masks.check_field(x)?;
    let factors = &masks.factors[s];
    let mut buf: Vec<Complex64> = x.data().iter().zip(factors).map(|(&z, &m)| z * m).collect();
    fft2_unitary(&mut buf, x.rows(), x.cols(), false);
    ComplexField::new(x.rows(), x.cols(), buf)
}

/// Adjoint propagation `A_sᴴ u = M_sᴴ Fᴴ u`; satisfies
/// `⟨A_s x, u⟩ = ⟨x, A_sᴴ u⟩` and `A_sᴴA_s = I`.
pub fn propagate_adjoint(u: &ComplexField, masks: &MaskSet, s: usize) -> Result<ComplexField> {
    masks.check_index(s)?;
    masks.check_field(u)?;
    let mut buf = u.data().to_vec();
    fft2_unitary(&mut buf, u.rows(), u.cols(), true);
    let factors = &masks.factors[s];
    for (z, m) in buf.iter_mut().zip(factors) {
        *z *= m.conj();
    }
    ComplexField::new(u.rows(), u.cols(), buf)
}

/// Forward-propagates through every mask. Per-mask transforms run in
/// parallel; results are gathered in mask order.
pub fn propagate_forward_all(x: &ComplexField, masks: &MaskSet) -> Result<Vec<ComplexField>> {
    (0..masks.count())
        .into_par_iter()
        .map(|s| propagate_forward(x, masks, s))
        .collect()
}

/// Sum of adjoint propagations `Σ_s A_sᴴ u_s`, accumulated in mask order so
/// the result is bit-reproducible.
pub fn adjoint_sum(u_all: &[ComplexField], masks: &MaskSet) -> Result<ComplexField> {
    if u_all.len() != masks.count() {
        return Err(Error::dims(format!(
            "{} sensor fields for {} masks",
            u_all.len(),
            masks.count()
        )));
    }
    let parts: Vec<ComplexField> = (0..masks.count())
        .into_par_iter()
        .map(|s| propagate_adjoint(&u_all[s], masks, s))
        .collect::<Result<_>>()?;
    let mut acc = vec![Complex64::new(0.0, 0.0); masks.len_pixels()];
    for part in &parts {
        for (a, b) in acc.iter_mut().zip(part.data()) {
            *a += b;
        }
    }
    ComplexField::new(masks.rows, masks.cols, acc)
}
