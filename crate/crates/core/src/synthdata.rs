//! Synthetic phase surfaces and amplitude-phase coupling groups.
//!
//! Six parametric phase surfaces (Gaussian, truncated Gaussian, mountain,
//! quadratic, shear plane, and a Gaussian with alternate angular octants
//! removed) are combined with four amplitude couplings
//! `a = k₀ + k₁·f(ψ)` into the nine-signal test corpus enumerated by
//! [`corpus_table`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Parametric surface family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Gaussian,
    TruncatedGaussian,
    Mountain,
    Quadratic,
    ShearPlane,
    /// Gaussian with alternate 45° angular octants zeroed.
    AlternateOctantGaussian,
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Gaussian => "gaussian",
            SurfaceKind::TruncatedGaussian => "truncated_gaussian",
            SurfaceKind::Mountain => "mountain",
            SurfaceKind::Quadratic => "quadratic",
            SurfaceKind::ShearPlane => "shear_plane",
            SurfaceKind::AlternateOctantGaussian => "alternate_octant_gaussian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian" => SurfaceKind::Gaussian,
            "truncated_gaussian" => SurfaceKind::TruncatedGaussian,
            "mountain" => SurfaceKind::Mountain,
            "quadratic" => SurfaceKind::Quadratic,
            "shear_plane" => SurfaceKind::ShearPlane,
            "alternate_octant_gaussian" => SurfaceKind::AlternateOctantGaussian,
            other => return Err(Error::invalid(format!("unknown surface kind '{other}'"))),
        })
    }

    /// Smooth families whose adjacent-pixel phase difference is checked to
    /// stay below π (unambiguous fringes).
    fn is_smooth(&self) -> bool {
        matches!(
            self,
            SurfaceKind::Gaussian | SurfaceKind::Quadratic | SurfaceKind::ShearPlane
        )
    }
}

/// A surface recipe: family, raster size, peak phase magnitude (radians)
/// and the shape parameters the family uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub rows: usize,
    pub cols: usize,
    /// Peak |ψ| in radians; the raster is scaled so its maximum magnitude
    /// equals this exactly.
    pub peak: f64,
    /// Gaussian width as a fraction of the smaller raster dimension.
    pub sigma_frac: f64,
    /// Truncation-disk radius as a fraction of the smaller dimension.
    pub radius_frac: f64,
    /// Mountain smoothing length as a fraction of the smaller dimension.
    pub smoothness: f64,
    /// Seed for the mountain roughness.
    pub seed: u64,
}

impl SurfaceSpec {
    pub fn new(kind: SurfaceKind, rows: usize, cols: usize) -> Self {
        Self {
            kind,
            rows,
            cols,
            peak: 8.0,
            sigma_frac: 0.18,
            radius_frac: 0.40,
            smoothness: 0.06,
            seed: 0,
        }
    }

    pub fn with_peak(mut self, peak: f64) -> Self {
        self.peak = peak;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Generates the phase raster (radians, row-major) for a spec.
pub fn make_surface(spec: &SurfaceSpec) -> Result<Vec<f64>> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::invalid("surface raster must be non-empty"));
    }
    if !spec.peak.is_finite() || spec.peak < 0.0 {
        return Err(Error::invalid(
            "surface peak must be finite and nonnegative",
        ));
    }
    let (rows, cols) = (spec.rows, spec.cols);
    let r0 = (rows as f64 - 1.0) / 2.0;
    let c0 = (cols as f64 - 1.0) / 2.0;
    let min_dim = rows.min(cols) as f64;
    let sigma = (spec.sigma_frac * min_dim).max(1e-9);

    let mut raw = vec![0.0f64; rows * cols];
    match spec.kind {
        SurfaceKind::Gaussian => {
            fill(&mut raw, rows, cols, |r, c| {
                let (dr, dc) = (r as f64 - r0, c as f64 - c0);
                (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
            });
        }
        SurfaceKind::TruncatedGaussian => {
            let radius_sq = (spec.radius_frac * min_dim).powi(2);
            fill(&mut raw, rows, cols, |r, c| {
                let (dr, dc) = (r as f64 - r0, c as f64 - c0);
                let d2 = dr * dr + dc * dc;
                if d2 <= radius_sq {
                    (-d2 / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            });
        }
        SurfaceKind::Quadratic => {
            fill(&mut raw, rows, cols, |r, c| {
                let rn = normalized_centered(r, rows);
                let cn = normalized_centered(c, cols);
                (rn * rn + cn * cn) / 2.0
            });
        }
        SurfaceKind::ShearPlane => {
            fill(&mut raw, rows, cols, |r, c| {
                let rn = if rows > 1 {
                    r as f64 / (rows - 1) as f64
                } else {
                    0.0
                };
                let cn = if cols > 1 {
                    c as f64 / (cols - 1) as f64
                } else {
                    0.0
                };
                (rn + cn) / 2.0
            });
        }
        SurfaceKind::Mountain => {
            let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
            for v in raw.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let blur_sigma = (spec.smoothness * min_dim).max(0.5);
            separable_blur(&mut raw, rows, cols, blur_sigma);
            // Shift to a nonnegative terrain before peak scaling.
            let min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
            for v in raw.iter_mut() {
                *v -= min;
            }
        }
        SurfaceKind::AlternateOctantGaussian => {
            fill(&mut raw, rows, cols, |r, c| {
                let (dr, dc) = (r as f64 - r0, c as f64 - c0);
                let theta = dr.atan2(dc);
                // Angle bins [kπ/4, (k+1)π/4) counted from −π; odd bins are
                // removed. atan2(0, 0) = 0 keeps the center pixel.
                let bin = (((theta + PI) / (PI / 4.0)).floor() as i64).clamp(0, 7);
                if bin % 2 == 0 {
                    (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
                } else {
                    0.0
                }
            });
        }
    }

    // Scale so max |ψ| equals the requested peak exactly.
    let max_abs = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs > 0.0 && spec.peak > 0.0 {
        let s = spec.peak / max_abs;
        for v in raw.iter_mut() {
            *v *= s;
        }
    } else {
        raw.iter_mut().for_each(|v| *v = 0.0);
    }

    if spec.kind.is_smooth() && spec.peak > 0.0 {
        let max_diff = max_adjacent_diff(&raw, rows, cols);
        if max_diff >= PI {
            return Err(Error::invalid(format!(
                "{} surface has adjacent-pixel phase step {max_diff:.3} >= π at this \
                 resolution; lower the peak or enlarge the raster",
                spec.kind.name()
            )));
        }
    }
    Ok(raw)
}

fn fill(buf: &mut [f64], rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) {
    for r in 0..rows {
        for c in 0..cols {
            buf[r * cols + c] = f(r, c);
        }
    }
}

/// Coordinate mapped to [−1, 1] around the raster center.
fn normalized_centered(i: usize, n: usize) -> f64 {
    if n > 1 {
        (2.0 * i as f64 - (n as f64 - 1.0)) / (n as f64 - 1.0)
    } else {
        0.0
    }
}

/// Largest |ψ(p) − ψ(q)| over 4-neighbor pixel pairs.
pub fn max_adjacent_diff(raster: &[f64], rows: usize, cols: usize) -> f64 {
    let mut m: f64 = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let v = raster[r * cols + c];
            if r + 1 < rows {
                m = m.max((raster[(r + 1) * cols + c] - v).abs());
            }
            if c + 1 < cols {
                m = m.max((raster[r * cols + c + 1] - v).abs());
            }
        }
    }
    m
}

fn separable_blur(buf: &mut [f64], rows: usize, cols: usize, sigma: f64) {
    let radius = (4.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let ksum: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.into_iter().map(|k| k / ksum).collect();

    let clamp = |i: i64, n: usize| i.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0f64; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let cc = clamp(c as i64 + ki as i64 - radius, cols);
                acc += kv * buf[r * cols + cc];
            }
            tmp[r * cols + c] = acc;
        }
    }
    for c in 0..cols {
        for r in 0..rows {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let rr = clamp(r as i64 + ki as i64 - radius, rows);
                acc += kv * tmp[rr * cols + c];
            }
            buf[r * cols + c] = acc;
        }
    }
}

// ---------------------------------------------------------------------------
// Amplitude-phase coupling groups
// ---------------------------------------------------------------------------

/// How amplitude relates to phase: `a = k₀ + k₁·f(ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeCoupling {
    /// Group 1: constant amplitude `a ≡ k₀`.
    Unit,
    /// Group 2: amplitude from an unrelated surface.
    None,
    /// Group 3: `f(ψ) = |ψ| / max|ψ|` (highly similar).
    NormalizedAbs,
    /// Group 4: `f(ψ) = |cos(15ψ)|` (less similar).
    AbsCos15,
}

/// Signal group: coupling plus the amplitude-level constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSpec {
    pub group: u8,
    pub k0: f64,
    pub k1: f64,
    pub coupling: AmplitudeCoupling,
}

impl GroupSpec {
    pub fn group1() -> Self {
        Self {
            group: 1,
            k0: 1.0,
            k1: 0.0,
            coupling: AmplitudeCoupling::Unit,
        }
    }

    pub fn group2() -> Self {
        Self {
            group: 2,
            k0: 1.0,
            k1: 1.0,
            coupling: AmplitudeCoupling::None,
        }
    }

    pub fn group3() -> Self {
        Self {
            group: 3,
            k0: 1.0,
            k1: 1.0,
            coupling: AmplitudeCoupling::NormalizedAbs,
        }
    }

    pub fn group4() -> Self {
        Self {
            group: 4,
            k0: 1.0,
            k1: 1.0,
            coupling: AmplitudeCoupling::AbsCos15,
        }
    }

    pub fn by_number(group: u8) -> Result<Self> {
        Ok(match group {
            1 => Self::group1(),
            2 => Self::group2(),
            3 => Self::group3(),
            4 => Self::group4(),
            g => return Err(Error::invalid(format!("unknown signal group {g}"))),
        })
    }
}

/// Builds the complex signal `x = a ⊙ exp(jψ)` for a phase surface and
/// group. Group 2 requires an independent amplitude surface, normalized to
/// `[k₀, k₀ + k₁]` so the amplitude stays positive.
pub fn make_signal(
    phase_spec: &SurfaceSpec,
    group: &GroupSpec,
    amp_spec: Option<&SurfaceSpec>,
) -> Result<ComplexField> {
    let psi = make_surface(phase_spec)?;
    let n = psi.len();
    let amp: Vec<f64> = match group.coupling {
        AmplitudeCoupling::Unit => vec![group.k0; n],
        AmplitudeCoupling::None => {
            let spec = amp_spec
                .ok_or_else(|| Error::invalid("group 2 needs an independent amplitude surface"))?;
            if spec.rows != phase_spec.rows || spec.cols != phase_spec.cols {
                return Err(Error::dims("amplitude/phase surface shapes differ"));
            }
            let s = make_surface(spec)?;
            let max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > 0.0 {
                s.iter()
                    .map(|v| group.k0 + group.k1 * v.abs() / max)
                    .collect()
            } else {
                vec![group.k0; n]
            }
        }
        AmplitudeCoupling::NormalizedAbs => {
            let max = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if max > 0.0 {
                psi.iter()
                    .map(|v| group.k0 + group.k1 * v.abs() / max)
                    .collect()
            } else {
                vec![group.k0; n]
            }
        }
        AmplitudeCoupling::AbsCos15 => psi
            .iter()
            .map(|v| group.k0 + group.k1 * (15.0 * v).cos().abs())
            .collect(),
    };
    if amp.iter().any(|&a| a <= 0.0) {
        return Err(Error::invalid("generated amplitude must be positive"));
    }
    ComplexField::from_amp_phase(phase_spec.rows, phase_spec.cols, &amp, &psi)
}

// ---------------------------------------------------------------------------
// Test corpus
// ---------------------------------------------------------------------------

/// One row of the simulated-signal table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusRow {
    /// 1-based signal number.
    pub index: usize,
    pub name: &'static str,
    pub phase_kind: SurfaceKind,
    pub group: u8,
    /// Amplitude surface for group-2 rows.
    pub amp_kind: Option<SurfaceKind>,
}

/// The nine-signal corpus: constant, independent, highly-similar and
/// less-similar amplitudes over truncated-Gaussian and shear-plane phases.
pub fn corpus_table() -> Vec<CorpusRow> {
    use SurfaceKind::*;
    vec![
        CorpusRow {
            index: 1,
            name: "const-truncgauss",
            phase_kind: TruncatedGaussian,
            group: 1,
            amp_kind: None,
        },
        CorpusRow {
            index: 2,
            name: "const-shear",
            phase_kind: ShearPlane,
            group: 1,
            amp_kind: None,
        },
        CorpusRow {
            index: 3,
            name: "mountain-shear",
            phase_kind: ShearPlane,
            group: 2,
            amp_kind: Some(Mountain),
        },
        CorpusRow {
            index: 4,
            name: "quadratic-truncgauss",
            phase_kind: TruncatedGaussian,
            group: 2,
            amp_kind: Some(Quadratic),
        },
        CorpusRow {
            index: 5,
            name: "gaussian-shear",
            phase_kind: ShearPlane,
            group: 2,
            amp_kind: Some(Gaussian),
        },
        CorpusRow {
            index: 6,
            name: "highsim-truncgauss",
            phase_kind: TruncatedGaussian,
            group: 3,
            amp_kind: None,
        },
        CorpusRow {
            index: 7,
            name: "highsim-shear",
            phase_kind: ShearPlane,
            group: 3,
            amp_kind: None,
        },
        CorpusRow {
            index: 8,
            name: "lesssim-truncgauss",
            phase_kind: TruncatedGaussian,
            group: 4,
            amp_kind: None,
        },
        CorpusRow {
            index: 9,
            name: "lesssim-shear",
            phase_kind: ShearPlane,
            group: 4,
            amp_kind: None,
        },
    ]
}

/// Instantiates a corpus row at the given raster size, peak and seed.
pub fn corpus_signal(
    index: usize,
    rows: usize,
    cols: usize,
    peak: f64,
    seed: u64,
) -> Result<ComplexField> {
    let table = corpus_table();
    let row = table
        .iter()
        .find(|r| r.index == index)
        .ok_or_else(|| Error::invalid(format!("corpus row {index} (valid: 1..=9)")))?;
    let phase = SurfaceSpec::new(row.phase_kind, rows, cols)
        .with_peak(peak)
        .with_seed(seed);
    let group = GroupSpec::by_number(row.group)?;
    let amp = row.amp_kind.map(|k| {
        SurfaceSpec::new(k, rows, cols)
            .with_peak(peak)
            .with_seed(seed ^ 0x9e3779b9)
    });
    make_signal(&phase, &group, amp.as_ref())
}

/// Training scenes for the class-specific prior: a Gaussian phase surface
/// plus the four single-quadrant cuts of it, all with unit amplitude.
pub fn prior_training_set(rows: usize, cols: usize, peak: f64) -> Result<Vec<ComplexField>> {
    let spec = SurfaceSpec::new(SurfaceKind::Gaussian, rows, cols).with_peak(peak);
    let full = make_surface(&spec)?;
    let r0 = (rows as f64 - 1.0) / 2.0;
    let c0 = (cols as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(5);
    let unit = vec![1.0; rows * cols];
    out.push(ComplexField::from_amp_phase(rows, cols, &unit, &full)?);
    for quadrant in 0..4 {
        let mut cut = full.clone();
        for r in 0..rows {
            for c in 0..cols {
                let top = (r as f64) < r0;
                let left = (c as f64) < c0;
                let q = match (top, left) {
                    (true, true) => 0,
                    (true, false) => 1,
                    (false, true) => 2,
                    (false, false) => 3,
                };
                if q != quadrant {
                    cut[r * cols + c] = 0.0;
                }
            }
        }
        out.push(ComplexField::from_amp_phase(rows, cols, &unit, &cut)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_peak_gives_zero_raster() {
        for kind in [
            SurfaceKind::Gaussian,
            SurfaceKind::TruncatedGaussian,
            SurfaceKind::Mountain,
            SurfaceKind::Quadratic,
            SurfaceKind::ShearPlane,
            SurfaceKind::AlternateOctantGaussian,
        ] {
            let spec = SurfaceSpec::new(kind, 16, 16).with_peak(0.0);
            let s = make_surface(&spec).unwrap();
            assert!(s.iter().all(|&v| v == 0.0), "{kind:?} not zero at peak 0");
        }
    }

    #[test]
    fn gaussian_peaks_at_center_with_symmetry() {
        let spec = SurfaceSpec::new(SurfaceKind::Gaussian, 33, 33);
        let s = make_surface(&spec).unwrap();
        let center = s[16 * 33 + 16];
        assert!((center - 8.0).abs() < 1e-12, "center {center}");
        assert!(s.iter().all(|&v| v <= center));
        for (dr, dc) in [(3i64, 5i64), (7, 2)] {
            let at = |r: i64, c: i64| s[(r * 33 + c) as usize];
            let v = at(16 + dr, 16 + dc);
            assert!((v - at(16 - dr, 16 + dc)).abs() < 1e-12);
            assert!((v - at(16 + dr, 16 - dc)).abs() < 1e-12);
            assert!((v - at(16 - dr, 16 - dc)).abs() < 1e-12);
        }
    }

    #[test]
    fn surface_peak_is_exact() {
        for kind in [
            SurfaceKind::Gaussian,
            SurfaceKind::TruncatedGaussian,
            SurfaceKind::Mountain,
            SurfaceKind::Quadratic,
            SurfaceKind::ShearPlane,
            SurfaceKind::AlternateOctantGaussian,
        ] {
            let spec = SurfaceSpec::new(kind, 40, 40).with_peak(5.5).with_seed(3);
            let s = make_surface(&spec).unwrap();
            let max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((max - 5.5).abs() < 1e-12, "{kind:?}: peak {max}");
        }
    }

    #[test]
    fn alternate_octant_zeroes_four_bins() {
        let spec = SurfaceSpec::new(SurfaceKind::AlternateOctantGaussian, 65, 65);
        let s = make_surface(&spec).unwrap();
        let (r0, c0) = (32.0, 32.0);
        let mut nonzero_bins = std::collections::BTreeSet::new();
        for r in 0..65 {
            for c in 0..65 {
                let v = s[r * 65 + c];
                if v != 0.0 {
                    let theta = (r as f64 - r0).atan2(c as f64 - c0);
                    let bin = (((theta + PI) / (PI / 4.0)).floor() as i64).clamp(0, 7);
                    nonzero_bins.insert(bin);
                }
            }
        }
        assert_eq!(
            nonzero_bins.len(),
            4,
            "exactly 4 of 8 octants populated: {nonzero_bins:?}"
        );
        assert!(
            nonzero_bins.iter().all(|b| b % 2 == 0),
            "only even bins: {nonzero_bins:?}"
        );
    }

    #[test]
    fn smooth_surfaces_have_unambiguous_fringes() {
        for kind in [
            SurfaceKind::Gaussian,
            SurfaceKind::Quadratic,
            SurfaceKind::ShearPlane,
        ] {
            let spec = SurfaceSpec::new(kind, 64, 64);
            let s = make_surface(&spec).unwrap();
            assert!(max_adjacent_diff(&s, 64, 64) < PI);
        }
        // An extreme peak at a coarse raster must be rejected.
        let bad = SurfaceSpec::new(SurfaceKind::Gaussian, 8, 8).with_peak(60.0);
        assert!(make_surface(&bad).is_err());
    }

    #[test]
    fn mountain_is_seeded() {
        let base = SurfaceSpec::new(SurfaceKind::Mountain, 32, 32);
        let a = make_surface(&base.with_seed(1)).unwrap();
        let b = make_surface(&base.with_seed(1)).unwrap();
        let c = make_surface(&base.with_seed(2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn group1_has_unit_amplitude() {
        let phase = SurfaceSpec::new(SurfaceKind::TruncatedGaussian, 24, 24);
        let x = make_signal(&phase, &GroupSpec::group1(), None).unwrap();
        assert!(x.amplitude().iter().all(|&a| (a - 1.0).abs() < 1e-15));
    }

    #[test]
    fn group3_amplitude_tracks_phase() {
        let phase = SurfaceSpec::new(SurfaceKind::TruncatedGaussian, 24, 24);
        let x = make_signal(&phase, &GroupSpec::group3(), None).unwrap();
        let amp = x.amplitude();
        assert!(amp.iter().all(|&a| (1.0..=2.0 + 1e-12).contains(&a)));
        let psi = make_surface(&phase).unwrap();
        let max_idx = (0..psi.len())
            .max_by(|&a, &b| psi[a].abs().total_cmp(&psi[b].abs()))
            .unwrap();
        assert!((amp[max_idx] - 2.0).abs() < 1e-12, "a = 2 where |ψ| peaks");
    }

    #[test]
    fn group4_flat_phase_gives_amplitude_two() {
        let phase = SurfaceSpec::new(SurfaceKind::ShearPlane, 16, 16).with_peak(0.0);
        let x = make_signal(&phase, &GroupSpec::group4(), None).unwrap();
        assert!(x.amplitude().iter().all(|&a| (a - 2.0).abs() < 1e-12));
    }

    #[test]
    fn group2_requires_amplitude_surface() {
        let phase = SurfaceSpec::new(SurfaceKind::ShearPlane, 16, 16);
        assert!(make_signal(&phase, &GroupSpec::group2(), None).is_err());
        let amp = SurfaceSpec::new(SurfaceKind::Mountain, 16, 16).with_seed(4);
        let x = make_signal(&phase, &GroupSpec::group2(), Some(&amp)).unwrap();
        assert!(x.amplitude().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn corpus_matches_published_table() {
        let t = corpus_table();
        assert_eq!(t.len(), 9);
        assert!(t[0].group == 1 && t[1].group == 1);
        assert!(t[7].group == 4 && t[8].group == 4);
        assert_eq!(t[2].amp_kind, Some(SurfaceKind::Mountain));
        assert_eq!(t[3].amp_kind, Some(SurfaceKind::Quadratic));
        assert_eq!(t[4].amp_kind, Some(SurfaceKind::Gaussian));
        for (i, row) in t.iter().enumerate() {
            assert_eq!(row.index, i + 1);
        }
    }

    #[test]
    fn corpus_rows_instantiate() {
        for i in 1..=9 {
            let x = corpus_signal(i, 32, 32, 4.0, 7).unwrap();
            assert_eq!(x.len(), 32 * 32);
            assert!(x.amplitude().iter().all(|&a| a > 0.0));
        }
        assert!(corpus_signal(10, 32, 32, 4.0, 7).is_err());
    }

    #[test]
    fn prior_set_has_five_scenes() {
        let set = prior_training_set(32, 32, 6.0).unwrap();
        assert_eq!(set.len(), 5);
        // Quarter cuts keep strictly fewer nonzero-phase pixels than the
        // full surface.
        let nonzero = |f: &ComplexField| f.phase().iter().filter(|p| p.abs() > 0.0).count();
        let full = nonzero(&set[0]);
        for cut in &set[1..] {
            let nz = nonzero(cut);
            assert!(nz > 0 && nz < full);
        }
    }
}
