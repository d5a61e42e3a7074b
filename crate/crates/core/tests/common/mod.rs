//! Independent oracles shared by the integration and acceptance suites.
//!
//! Everything here deliberately avoids the closed-form/diagonal code paths
//! it is used to check: scalar minimizers run a grid search, the normal
//! equations are solved by conjugate gradients over the raw operators, and
//! BPDN is re-solved by ADMM.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use dlpr_core::field::ComplexField;
use dlpr_core::optics::{propagate_adjoint, propagate_forward, MaskSet};
use dlpr_core::patch::{accumulate_patches, extract_patches, PatchGrid, PatchSet};
use dlpr_core::sparse::Dictionary;

/// Grid-search minimizer on [0, hi] with two local refinement rounds.
/// Resolution after refinement is about `hi/steps · (1/50)²`.
pub fn brute_force_min(obj: impl Fn(f64) -> f64, hi: f64, steps: usize) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = hi;
    let mut best_x = 0.0f64;
    for _round in 0..3 {
        let n = steps;
        let mut best_val = f64::INFINITY;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let v = obj(x);
            if v < best_val {
                best_val = v;
                best_x = x;
            }
        }
        let step = (hi - lo) / n as f64;
        lo = (best_x - 2.0 * step).max(0.0);
        hi = best_x + 2.0 * step;
    }
    best_x
}

/// The scalar objective the Poisson sensor filter minimizes.
pub fn poisson_filter_objective(b: f64, v_abs: f64, z: f64, gamma: f64, chi: f64) -> f64 {
    let data = if z > 0.0 {
        if b <= 0.0 {
            return f64::INFINITY;
        }
        let rate = b * b * chi;
        rate - z * rate.ln()
    } else {
        b * b * chi
    };
    data + (b - v_abs) * (b - v_abs) / gamma
}

/// The scalar objective the Gaussian sensor filter minimizes.
pub fn gaussian_filter_objective(b: f64, v_abs: f64, z: f64, gamma: f64, sigma: f64) -> f64 {
    let e = b * b - z;
    e * e / (sigma * sigma) + (b - v_abs) * (b - v_abs) / gamma
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(y: &mut [Complex64], alpha: Complex64, x: &[Complex64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Conjugate-gradient solve of the backward-propagation normal equations
/// built from the raw forward/adjoint and patch operators (no unitarity or
/// diagonal-structure assumptions).
pub fn cg_x_update_oracle(
    u_all: &[ComplexField],
    coded: &PatchSet,
    grid: &PatchGrid,
    masks: &MaskSet,
    gamma: f64,
    beta: f64,
    iters: usize,
) -> ComplexField {
    let (rows, cols) = (masks.rows(), masks.cols());
    let n = rows * cols;
    let weight = 1.0 / (beta * gamma);

    let apply = |xv: &[Complex64]| -> Vec<Complex64> {
        let x = ComplexField::new(rows, cols, xv.to_vec()).unwrap();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for s in 0..masks.count() {
            let fwd = propagate_forward(&x, masks, s).unwrap();
            let back = propagate_adjoint(&fwd, masks, s).unwrap();
            axpy(&mut out, Complex64::new(weight, 0.0), back.data());
        }
        let patches = extract_patches(&x, grid).unwrap();
        let sums = accumulate_patches(&patches);
        for (o, s) in out.iter_mut().zip(&sums) {
            *o += s;
        }
        out
    };

    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    for (s, u) in u_all.iter().enumerate() {
        let back = propagate_adjoint(u, masks, s).unwrap();
        axpy(&mut rhs, Complex64::new(weight, 0.0), back.data());
    }
    for (o, s) in rhs.iter_mut().zip(&accumulate_patches(coded)) {
        *o += s;
    }

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r).re;
    for _ in 0..iters {
        if rs_old.sqrt() < 1e-14 {
            break;
        }
        let ap = apply(&p);
        let alpha = rs_old / dot(&p, &ap).re;
        axpy(&mut x, Complex64::new(alpha, 0.0), &p);
        axpy(&mut r, Complex64::new(-alpha, 0.0), &ap);
        let rs_new = dot(&r, &r).re;
        let ratio = rs_new / rs_old;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + Complex64::new(ratio, 0.0) * *pi;
        }
        rs_old = rs_new;
    }
    ComplexField::new(rows, cols, x).unwrap()
}

/// ADMM solve of `min ½‖x − Dα‖² + λ‖α‖₁`: an independent route to the
/// BPDN optimum.
pub fn admm_bpdn_oracle(
    patch: &[Complex64],
    dict: &Dictionary,
    lambda: f64,
    rho: f64,
    iters: usize,
) -> Vec<Complex64> {
    let k = dict.atom_count();
    let w2 = dict.atom_len();
    let d = dict.atoms();
    let mut gram = d.ad_mul(d);
    for j in 0..k {
        gram[(j, j)] += Complex64::new(rho, 0.0);
    }
    let chol = gram.cholesky().expect("G + ρI is positive definite");
    let dtx = d.ad_mul(&DVector::from_column_slice(patch));

    let mut beta = DVector::<Complex64>::zeros(k);
    let mut dual = DVector::<Complex64>::zeros(k);
    for _ in 0..iters {
        let rhs = &dtx + (&beta - &dual).scale(rho);
        let alpha = chol.solve(&rhs);
        for j in 0..k {
            let t = alpha[j] + dual[j];
            let mag = t.norm();
            beta[j] = if mag <= lambda / rho {
                Complex64::new(0.0, 0.0)
            } else {
                t * ((mag - lambda / rho) / mag)
            };
        }
        dual += &alpha - &beta;
    }
    let _ = w2;
    beta.as_slice().to_vec()
}

/// BPDN objective for a coefficient vector.
pub fn bpdn_objective(
    patch: &[Complex64],
    dict: &Dictionary,
    lambda: f64,
    alpha: &[Complex64],
) -> f64 {
    let mut rec = vec![Complex64::new(0.0, 0.0); dict.atom_len()];
    for (j, &a) in alpha.iter().enumerate() {
        if a.norm_sqr() > 0.0 {
            for (r, &dv) in rec.iter_mut().zip(dict.atom(j)) {
                *r += a * dv;
            }
        }
    }
    let res: f64 = patch
        .iter()
        .zip(&rec)
        .map(|(&p, &r)| (p - r).norm_sqr())
        .sum();
    let l1: f64 = alpha.iter().map(|z| z.norm()).sum();
    0.5 * res + lambda * l1
}

/// Random matrix helper for small dictionary instances.
pub fn random_unit_dictionary(w2: usize, k: usize, side: usize, seed: u64) -> Dictionary {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut atoms = DMatrix::zeros(w2, k);
    for j in 0..k {
        let mut col: Vec<Complex64> = (0..w2)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.iter_mut().for_each(|z| *z /= norm);
        atoms.set_column(j, &DVector::from_vec(col));
    }
    Dictionary::new(side, atoms).unwrap()
}
