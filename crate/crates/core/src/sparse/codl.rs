//! Complex-domain online dictionary learning.
//!
//! Streams mini-batches of patches: each batch is sparse-coded by BPDN,
//! folded into the damped second-moment accumulators
//! `A ← β_t A + Σ α αᴴ` and `B ← β_t B + Σ x αᴴ`, and the atoms are then
//! refreshed by projected block-coordinate descent
//! `u_l = (b_l − D a_l)/A(l,l) + d_l`, `d_l = u_l / max(‖u_l‖, 1)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::{bpdn, random_unit_atom, Dictionary, SparseCode};
use crate::error::{Error, Result};

/// Tuning for the online dictionary-learning loop.
#[derive(Debug, Clone)]
pub struct CodlConfig {
    /// Number of mini-batch iterations T.
    pub iterations: usize,
    /// Patches per iteration η.
    pub batch: usize,
    /// BPDN ℓ1 weight λ.
    pub lambda: f64,
    /// BPDN coordinate-change tolerance.
    pub bpdn_tol: f64,
    /// BPDN sweep cap per coding.
    pub bpdn_sweeps: usize,
    /// Block-coordinate-descent sweep cap per batch.
    pub bcd_sweeps: usize,
    /// Per-sweep atom-change threshold ending the BCD loop.
    pub bcd_tol: f64,
    /// Damping floor: β_t = max(1 − 1/t, floor).
    pub damping_floor: f64,
    /// Seed for batch sampling and zero-atom reinitialization.
    pub seed: u64,
}

impl Default for CodlConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            batch: 64,
            lambda: 0.1,
            bpdn_tol: 1e-6,
            bpdn_sweeps: 200,
            bcd_sweeps: 50,
            bcd_tol: 1e-6,
            damping_floor: 0.9,
            seed: 0,
        }
    }
}

/// Seeds a dictionary with `k` patches sampled (with replacement) from the
/// input stream, each normalized to unit norm. Degenerate picks fall back
/// to random unit atoms.
pub fn init_dictionary_from_patches(
    patches: &[Vec<Complex64>],
    patch_side: usize,
    k: usize,
    seed: u64,
) -> Result<Dictionary> {
    if patches.is_empty() {
        return Err(Error::invalid("dictionary init: no patches"));
    }
    if k == 0 {
        return Err(Error::invalid("dictionary init: k must be positive"));
    }
    let w2 = patch_side * patch_side;
    if patches.iter().any(|p| p.len() != w2) {
        return Err(Error::dims("dictionary init: patch length"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut atoms = DMatrix::zeros(w2, k);
    for j in 0..k {
        let pick = &patches[rng.gen_range(0..patches.len())];
        let norm = pick.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let col = if norm > 1e-12 {
            pick.iter().map(|&z| z / norm).collect()
        } else {
            random_unit_atom(w2, &mut rng)
        };
        atoms.set_column(j, &DVector::from_vec(col));
    }
    Dictionary::new(patch_side, atoms)
}

/// Runs the online dictionary-learning loop from `d0` over the patch set.
///
/// Codings within a batch run in parallel but accumulate in index order, so
/// the result is deterministic given the inputs and seed.
pub fn codl(patches: &[Vec<Complex64>], d0: &Dictionary, cfg: &CodlConfig) -> Result<Dictionary> {
    if cfg.iterations == 0 || cfg.batch == 0 {
        return Err(Error::invalid(
            "codl: iterations and batch size must be at least 1",
        ));
    }
    if patches.is_empty() {
        return Err(Error::invalid("codl: no patches"));
    }
    let w2 = d0.atom_len();
    if patches.iter().any(|p| p.len() != w2) {
        return Err(Error::dims("codl: patch length vs dictionary"));
    }
    let k = d0.atom_count();
    let mut dict = d0.atoms().clone();
    let mut acc_a = DMatrix::<Complex64>::zeros(k, k);
    let mut acc_b = DMatrix::<Complex64>::zeros(w2, k);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    for t in 1..=cfg.iterations {
        let picks: Vec<usize> = (0..cfg.batch)
            .map(|_| rng.gen_range(0..patches.len()))
            .collect();
        let working = Dictionary::new(d0.patch_side(), dict.clone())?;
        let codes: Vec<SparseCode> = picks
            .par_iter()
            .map(|&idx| {
                bpdn(
                    &patches[idx],
                    &working,
                    cfg.lambda,
                    cfg.bpdn_tol,
                    cfg.bpdn_sweeps,
                )
                .map(|r| r.code)
            })
            .collect::<Result<_>>()?;

        let beta_t = (1.0 - 1.0 / t as f64).max(cfg.damping_floor);
        acc_a.scale_mut(beta_t);
        acc_b.scale_mut(beta_t);
        for (&idx, code) in picks.iter().zip(&codes) {
            // Sparse rank-1 updates: only support × support entries move.
            let sup = code.support();
            let vals = code.values();
            for &p in sup {
                let ap = vals[p];
                for &q in sup {
                    acc_a[(q, p)] += vals[q] * ap.conj();
                }
                let x = &patches[idx];
                for (row, &xv) in x.iter().enumerate() {
                    acc_b[(row, p)] += xv * ap.conj();
                }
            }
        }

        bcd_atoms(&mut dict, &acc_a, &acc_b, cfg.bcd_sweeps, cfg.bcd_tol);
    }

    // Reinitialize any atom that collapsed to zero.
    for j in 0..k {
        if dict.column(j).norm() < 1e-12 {
            dict.set_column(j, &DVector::from_vec(random_unit_atom(w2, &mut rng)));
        }
    }
    Dictionary::new(d0.patch_side(), dict)
}

/// Projected block-coordinate descent on the atoms. Atoms never selected by
/// any code (`A(l,l) = 0`) are skipped.
fn bcd_atoms(
    dict: &mut DMatrix<Complex64>,
    acc_a: &DMatrix<Complex64>,
    acc_b: &DMatrix<Complex64>,
    max_sweeps: usize,
    tol: f64,
) {
    let k = dict.ncols();
    // An atom counts as "never selected" when its accumulated energy is
    // negligible next to the busiest atom; dividing by it would amplify
    // rounding noise into a unit-norm direction.
    let max_diag = (0..k).map(|l| acc_a[(l, l)].re).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag;
    for _ in 0..max_sweeps {
        let mut max_change: f64 = 0.0;
        for l in 0..k {
            let all = acc_a[(l, l)].re;
            if all <= floor {
                continue;
            }
            // A's column is sparse (only atoms co-selected with l are
            // nonzero); accumulate D·a_l over those entries only.
            let a_col = acc_a.column(l);
            let w2 = dict.nrows();
            let mut d_a = DVector::<Complex64>::zeros(w2);
            for m in 0..k {
                let a_ml = a_col[m];
                if a_ml.norm_sqr() == 0.0 {
                    continue;
                }
                let col = dict.column(m);
                for i in 0..w2 {
                    d_a[i] += col[i] * a_ml;
                }
            }
            let b_col = acc_b.column(l);
            let d_old = dict.column(l).clone_owned();
            let mut u = DVector::<Complex64>::zeros(w2);
            for i in 0..w2 {
                u[i] = (b_col[i] - d_a[i]) / all + d_old[i];
            }
            let norm = u.norm();
            let scale = 1.0 / norm.max(1.0);
            let d_new = u * Complex64::new(scale, 0.0);
            max_change = max_change.max((&d_new - &d_old).norm());
            dict.set_column(l, &d_new);
        }
        if max_change < tol {
            break;
        }
    }
}
