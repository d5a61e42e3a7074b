//! Complex wavefront rasters, phase wrapping and the wrapped-phase RMSE
//! metric.
//!
//! A [`ComplexField`] is the central unknown of the retrieval problem: a
//! complex-valued image `x = a ⊙ exp(jψ)` stored as a flat row-major vector
//! together with its raster dimensions. Only the wrapped (interferometric)
//! phase `angle(x) ∈ [-π, π)` is observable, so estimates are evaluated with
//! [`rmse_wrapped`], optionally after removing the global phase offset that
//! intensity measurements cannot determine.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A complex-valued raster, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    /// Builds a field from row-major data. Fails on empty dimensions, a
    /// length mismatch, or non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("field dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dims(format!(
                "{} values for a {rows}x{cols} raster",
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::invalid("field contains non-finite entries"));
        }
        Ok(Self { rows, cols, data })
    }

    /// All-zero field.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    /// Builds `a ⊙ exp(jψ)` from amplitude and phase rasters (row-major,
    /// both of length `rows·cols`).
    pub fn from_amp_phase(rows: usize, cols: usize, amp: &[f64], phase: &[f64]) -> Result<Self> {
        if amp.len() != rows * cols || phase.len() != rows * cols {
            return Err(Error::dims("amplitude/phase length"));
        }
        let data = amp
            .iter()
            .zip(phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect();
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pixels `n = rows·cols`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Linear index of pixel (r, c) in row-major order.
    #[inline]
    pub fn idx(&self, r: usize, c: usize) -> usize {
        r * self.cols + c
    }

    /// Per-pixel magnitude `|x|`.
    pub fn amplitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    /// Per-pixel wrapped phase `angle(x) ∈ [-π, π)`; `angle(0) = 0`.
    pub fn phase(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|z| if z.norm_sqr() == 0.0 { 0.0 } else { z.arg() })
            .collect()
    }

    /// Euclidean norm of the vectorized field.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Scales every entry in place.
    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }
}

/// Wraps a phase value to the principal interval `[-π, π)`:
/// `mod(v + π, 2π) − π`.
///
/// Returns an error for non-finite input.
pub fn wrap(v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::invalid("wrap: non-finite phase"));
    }
    Ok(wrap_unchecked(v))
}

/// `wrap` without the finiteness check, for hot loops over values already
/// known finite.
#[inline]
pub fn wrap_unchecked(v: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let m = (v + PI).rem_euclid(two_pi);
    // rem_euclid can return 2π when (v + π) is a tiny negative number.
    if m >= two_pi {
        -PI
    } else {
        m - PI
    }
}

/// Wraps a slice of phases elementwise.
pub fn wrap_slice(v: &[f64]) -> Result<Vec<f64>> {
    v.iter().map(|&x| wrap(x)).collect()
}

/// Root-mean-square error between the wrapped phases of two fields:
/// `sqrt( mean_l W(angle(est)_l − angle(truth)_l)² )`, in radians.
///
/// Intensity data `|A_s x|²` are blind to a constant phase factor, so with
/// `align_global_phase` the circular-mean offset
/// `c = angle(Σ_l exp(j·diff_l))` is removed from the estimate first.
pub fn rmse_wrapped(
    estimate: &ComplexField,
    truth: &ComplexField,
    align_global_phase: bool,
) -> Result<f64> {
    if !estimate.same_shape(truth) {
        return Err(Error::dims(format!(
            "rmse: {}x{} vs {}x{}",
            estimate.rows, estimate.cols, truth.rows, truth.cols
        )));
    }
    let est_phase = estimate.phase();
    let truth_phase = truth.phase();
    let diffs: Vec<f64> = est_phase
        .iter()
        .zip(&truth_phase)
        .map(|(&a, &b)| wrap_unchecked(a - b))
        .collect();

    let offset = if align_global_phase {
        let sum: Complex64 = diffs.iter().map(|&d| Complex64::from_polar(1.0, d)).sum();
        if sum.norm_sqr() == 0.0 {
            0.0
        } else {
            sum.arg()
        }
    } else {
        0.0
    };

    let n = diffs.len() as f64;
    let sq_sum: f64 = diffs
        .iter()
        .map(|&d| {
            let e = wrap_unchecked(d - offset);
            e * e
        })
        .sum();
    Ok((sq_sum / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_fixed_points() {
        assert_eq!(wrap(0.0).unwrap(), 0.0);
        // mod(2π, 2π) − π = −π by definition.
        assert!((wrap(PI).unwrap() + PI).abs() < 1e-15);
        assert!((wrap(1.5 * PI).unwrap() + 0.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn wrap_rejects_non_finite() {
        assert!(wrap(f64::NAN).is_err());
        assert!(wrap(f64::INFINITY).is_err());
    }

    #[test]
    fn wrap_range_and_idempotence_dense_sweep() {
        let mut v = -25.0;
        while v < 25.0 {
            let w = wrap(v).unwrap();
            assert!((-PI..PI).contains(&w), "wrap({v}) = {w} out of range");
            assert_eq!(wrap(w).unwrap(), w, "wrap not idempotent at {v}");
            v += 0.0137;
        }
    }

    proptest! {
        #[test]
        fn wrap_periodicity(v in -1.0e6_f64..1.0e6, k in -50i64..50) {
            let shifted = v + 2.0 * PI * k as f64;
            let a = wrap(v).unwrap();
            let b = wrap(shifted).unwrap();
            // Building v + 2πk in f64 already perturbs the argument by
            // ~eps·|v|; allow that on top of the 1e-12 wrap slack.
            let tol = 1e-12 + 4.0 * f64::EPSILON * v.abs().max(shifted.abs());
            // Compare circularly: the two wraps may land at ±π ends.
            let d = wrap_unchecked(a - b).abs();
            prop_assert!(d <= tol || (2.0 * PI - d) <= tol);
        }

        #[test]
        fn wrap_always_in_range(v in -1.0e9_f64..1.0e9) {
            let w = wrap(v).unwrap();
            prop_assert!((-PI..PI).contains(&w));
        }
    }

    fn field_from_phase(rows: usize, cols: usize, phase: &[f64]) -> ComplexField {
        let amp = vec![1.0; rows * cols];
        ComplexField::from_amp_phase(rows, cols, &amp, phase).unwrap()
    }

    #[test]
    fn rmse_zero_for_identical_fields() {
        let phase: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = field_from_phase(4, 4, &phase);
        assert_eq!(rmse_wrapped(&f, &f, false).unwrap(), 0.0);
        assert_eq!(rmse_wrapped(&f, &f, true).unwrap(), 0.0);
    }

    #[test]
    fn rmse_constant_offset() {
        let phase: Vec<f64> = (0..64).map(|i| (i as f64 * 0.21).cos()).collect();
        let shifted: Vec<f64> = phase.iter().map(|p| p + 0.3).collect();
        let a = field_from_phase(8, 8, &phase);
        let b = field_from_phase(8, 8, &shifted);
        let plain = rmse_wrapped(&b, &a, false).unwrap();
        assert!((plain - 0.3).abs() < 1e-12, "unaligned rmse {plain}");
        let aligned = rmse_wrapped(&b, &a, true).unwrap();
        assert!(aligned < 1e-12, "aligned rmse {aligned}");
    }

    #[test]
    fn rmse_symmetry() {
        let pa: Vec<f64> = (0..100).map(|i| (i as f64 * 0.13).sin() * 2.9).collect();
        let pb: Vec<f64> = (0..100).map(|i| (i as f64 * 0.31).cos() * 2.1).collect();
        let a = field_from_phase(10, 10, &pa);
        let b = field_from_phase(10, 10, &pb);
        for align in [false, true] {
            let ab = rmse_wrapped(&a, &b, align).unwrap();
            let ba = rmse_wrapped(&b, &a, align).unwrap();
            assert!((ab - ba).abs() < 1e-12, "asymmetric: {ab} vs {ba}");
        }
    }

    #[test]
    fn rmse_rejects_shape_mismatch() {
        let a = ComplexField::zeros(2, 3).unwrap();
        let b = ComplexField::zeros(3, 2).unwrap();
        assert!(rmse_wrapped(&a, &b, true).is_err());
    }

    #[test]
    fn field_rejects_bad_input() {
        assert!(ComplexField::new(0, 4, vec![]).is_err());
        assert!(ComplexField::new(2, 2, vec![Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(
            ComplexField::new(1, 1, vec![Complex64::new(f64::NAN, 0.0)]).is_err(),
            "NaN entries must be rejected"
        );
    }
}
