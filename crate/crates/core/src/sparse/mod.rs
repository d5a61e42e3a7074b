//! Complex-domain sparse coding over learned dictionaries.
//!
//! A [`Dictionary`] holds `k` complex atoms of length `w²`, each constrained
//! to the unit Euclidean ball. Patches are coded either greedily
//! ([`omp`](crate::sparse::omp)) against a residual tolerance, or by
//! ℓ1-regularized regression ([`bpdn`](crate::sparse::bpdn)) inside the
//! online dictionary-learning loop ([`codl`](crate::sparse::codl)).

mod bpdn;
mod codl;
mod omp;

pub use bpdn::{bpdn, bpdn_kkt_residual, BpdnResult};
pub use codl::{codl, init_dictionary_from_patches, CodlConfig};
pub use omp::{omp, omp_with_gram, OmpGram};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on the unit-ball constraint check (pure float slack).
const NORM_SLACK: f64 = 1e-9;

/// A `w² × k` complex atom matrix with every column in the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<Complex64>,
    patch_side: usize,
}

impl Dictionary {
    /// Wraps an atom matrix, checking shape against the patch side, the
    /// unit-ball constraint, and that no atom is all-zero.
    pub fn new(patch_side: usize, atoms: DMatrix<Complex64>) -> Result<Self> {
        if patch_side == 0 {
            return Err(Error::invalid("dictionary patch side must be positive"));
        }
        if atoms.nrows() != patch_side * patch_side {
            return Err(Error::dims(format!(
                "atom length {} for patch side {patch_side}",
                atoms.nrows()
            )));
        }
        if atoms.ncols() == 0 {
            return Err(Error::invalid("dictionary must have at least one atom"));
        }
        for j in 0..atoms.ncols() {
            let norm = atoms.column(j).norm();
            if norm > 1.0 + NORM_SLACK {
                return Err(Error::invalid(format!("atom {j} has norm {norm} > 1")));
            }
            if norm < 1e-12 {
                return Err(Error::invalid(format!("atom {j} is all-zero")));
            }
        }
        Ok(Self { atoms, patch_side })
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    /// Atom length `w²`.
    pub fn atom_len(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms `k`.
    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<Complex64> {
        &self.atoms
    }

    /// Column j as a contiguous slice (atoms are stored column-major).
    pub fn atom(&self, j: usize) -> &[Complex64] {
        let w2 = self.atom_len();
        &self.atoms.as_slice()[j * w2..(j + 1) * w2]
    }

    /// Largest column norm (≤ 1 for a valid dictionary).
    pub fn max_atom_norm(&self) -> f64 {
        (0..self.atom_count())
            .map(|j| self.atoms.column(j).norm())
            .fold(0.0, f64::max)
    }
}

/// A sparse coefficient vector over a dictionary: dense values plus the
/// explicit support set. Values vanish outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    values: Vec<Complex64>,
    support: Vec<usize>,
}

impl SparseCode {
    pub fn zero(k: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); k],
            support: Vec::new(),
        }
    }

    pub(crate) fn from_parts(values: Vec<Complex64>, mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        Self { values, support }
    }

    /// Dense coefficient vector of length k.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Sorted indices of the nonzero coefficients.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    /// Reconstruction `Dα`, iterating only the support.
    pub fn reconstruct(&self, dict: &Dictionary) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dict.atom_len()];
        for &j in &self.support {
            let coef = self.values[j];
            for (o, &a) in out.iter_mut().zip(dict.atom(j)) {
                *o += coef * a;
            }
        }
        out
    }
}

/// Complex soft-threshold: `h·max(0, 1 − t/|h|)`.
#[inline]
pub(crate) fn soft_threshold(h: Complex64, t: f64) -> Complex64 {
    let mag = h.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        h * ((mag - t) / mag)
    }
}

/// A random unit vector with i.i.d. circular-Gaussian entries.
pub(crate) fn random_unit_atom(len: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..len)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}
