//! Orthogonal matching pursuit in the complex domain.
//!
//! The pursuit follows the classic loop — pick the atom with the largest
//! residual correlation, refit the selected atoms against the original
//! patch by least squares, stop at the residual tolerance — implemented in
//! coefficient space with a precomputed Gram matrix and a progressive
//! Cholesky factor, so one selection step costs `O(k·|Q|)` instead of
//! `O(k·w²)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Dictionary, SparseCode};
use crate::error::{Error, Result};

/// Precomputed `G = DᴴD` shared by every pursuit over the same dictionary.
#[derive(Debug, Clone)]
pub struct OmpGram {
    gram: DMatrix<Complex64>,
}

impl OmpGram {
    pub fn new(dict: &Dictionary) -> Self {
        let k = dict.atom_count();
        let mut gram = DMatrix::zeros(k, k);
        for j in 0..k {
            let dj = dict.atom(j);
            for i in 0..=j {
                let v: Complex64 = dict
                    .atom(i)
                    .iter()
                    .zip(dj)
                    .map(|(&a, &b)| a.conj() * b)
                    .sum();
                gram[(i, j)] = v;
                gram[(j, i)] = v.conj();
            }
        }
        Self { gram }
    }
}

/// Greedy sparse coding: repeatedly selects the atom with the largest
/// residual correlation `|d_jᴴ r|` (lowest index on ties), refits the
/// selected atoms against the original patch by least squares, and stops
/// once the squared residual drops to `delta` or `max_atoms` atoms are in
/// use.
///
/// A patch whose initial energy is already within `delta` (in particular
/// the zero patch) codes to the zero vector. A rank-deficient selection is
/// dropped and the pursuit terminates with the previous fit.
pub fn omp(
    patch: &[Complex64],
    dict: &Dictionary,
    delta: f64,
    max_atoms: usize,
) -> Result<SparseCode> {
    omp_with_gram(patch, dict, &OmpGram::new(dict), delta, max_atoms)
}

/// [`omp`] with a caller-supplied Gram matrix, for coding many patches over
/// one dictionary.
pub fn omp_with_gram(
    patch: &[Complex64],
    dict: &Dictionary,
    gram: &OmpGram,
    delta: f64,
    max_atoms: usize,
) -> Result<SparseCode> {
    let w2 = dict.atom_len();
    if patch.len() != w2 {
        return Err(Error::dims(format!(
            "patch length {} vs atom length {w2}",
            patch.len()
        )));
    }
    if delta < 0.0 || !delta.is_finite() {
        return Err(Error::invalid("omp: delta must be finite and >= 0"));
    }
    if max_atoms == 0 {
        return Err(Error::invalid("omp: max_atoms must be at least 1"));
    }
    let k = dict.atom_count();
    if gram.gram.nrows() != k {
        return Err(Error::dims("omp: gram size vs dictionary"));
    }
    // The refit cannot use more atoms than the patch dimension.
    let cap = max_atoms.min(w2).min(k);

    let patch_energy: f64 = patch.iter().map(|z| z.norm_sqr()).sum();
    let mut energy = patch_energy;
    if energy <= delta {
        return Ok(SparseCode::zero(k));
    }

    // c0 = Dᴴx; c = Dᴴr maintained in coefficient space.
    let mut c0 = vec![Complex64::new(0.0, 0.0); k];
    for (j, slot) in c0.iter_mut().enumerate() {
        *slot = dict
            .atom(j)
            .iter()
            .zip(patch)
            .map(|(&d, &x)| d.conj() * x)
            .sum();
    }
    let mut c = c0.clone();

    let mut support: Vec<usize> = Vec::new();
    let mut in_support = vec![false; k];
    // Progressive lower Cholesky factor of G[Q, Q], row-major packed.
    let mut chol: Vec<Complex64> = Vec::new();
    let mut coefs: Vec<Complex64> = Vec::new();

    while support.len() < cap {
        // Strongest remaining correlation, lowest index on ties. Selected
        // atoms are orthogonal to the residual up to rounding; skipping
        // them keeps the selection exact.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            if in_support[j] {
                continue;
            }
            let m = c[j].norm_sqr();
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((j, m));
            }
        }
        let Some((j_star, corr)) = best else { break };
        if corr == 0.0 {
            // Residual orthogonal to every remaining atom.
            break;
        }

        // Grow the Cholesky factor with row [w, l]: L w = G[Q, j*],
        // l = sqrt(G[j*,j*] − ‖w‖²). A non-positive pivot means the
        // selection went rank-deficient: drop the atom and stop.
        let q = support.len();
        let mut row = Vec::with_capacity(q + 1);
        for i in 0..q {
            let qi = support[i];
            let mut v = gram.gram[(qi, j_star)];
            for t in 0..i {
                v -= chol[i * (i + 1) / 2 + t] * row[t];
            }
            let pivot = chol[i * (i + 1) / 2 + i];
            row.push(v / pivot);
        }
        let diag = gram.gram[(j_star, j_star)].re - row.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if diag <= 1e-13 {
            break;
        }
        let pivot = Complex64::new(diag.sqrt(), 0.0);
        support.push(j_star);
        in_support[j_star] = true;
        // The new row of L is (L⁻¹ g)ᴴ.
        chol.extend(row.iter().map(|z| z.conj()));
        chol.push(pivot);

        // β = (G_QQ)⁻¹ c0_Q by forward/back substitution.
        let m = support.len();
        let mut fwd = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..m {
            let mut v = c0[support[i]];
            for t in 0..i {
                v -= chol[i * (i + 1) / 2 + t] * fwd[t];
            }
            fwd[i] = v / chol[i * (i + 1) / 2 + i];
        }
        coefs = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            let mut v = fwd[i];
            for t in (i + 1)..m {
                v -= chol[t * (t + 1) / 2 + i].conj() * coefs[t];
            }
            coefs[i] = v / chol[i * (i + 1) / 2 + i];
        }

        // Residual correlations c = c0 − G[:, Q]β and the refit residual
        // energy ‖x‖² − βᴴ G_QQ β (clamped against cancellation).
        c.copy_from_slice(&c0);
        let mut fit = 0.0f64;
        for (slot, &qj) in coefs.iter().zip(&support) {
            let beta = *slot;
            for (cj, &gj) in c.iter_mut().zip(gram.gram.column(qj).iter()) {
                *cj -= gj * beta;
            }
            fit += (beta.conj() * c0[qj]).re;
        }
        energy = (patch_energy - fit).max(0.0);
        if energy <= delta {
            break;
        }
    }

    let mut values = vec![Complex64::new(0.0, 0.0); k];
    for (slot, &j) in coefs.iter().zip(&support) {
        values[j] = *slot;
    }
    Ok(SparseCode::from_parts(values, support))
}
