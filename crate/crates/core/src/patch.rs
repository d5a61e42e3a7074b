//! Overlapping square-patch decomposition and aggregation.
//!
//! A [`PatchGrid`] enumerates every `w×w` window that lies fully inside the
//! raster (no wraparound), stepping by `stride`. Windows and the pixels
//! inside each window are both ordered column-major, and the grid records
//! the per-pixel multiplicity `μ_j` — how many windows cover pixel `j` —
//! which is the diagonal of `Σ_i R_iᴴR_i`. Aggregation inverts extraction
//! in the least-squares sense: per-pixel sum of covering patch values
//! divided by `μ_j`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Index set and multiplicity bookkeeping for overlapping `w×w` patches.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    rows: usize,
    cols: usize,
    patch_side: usize,
    stride: usize,
    /// Top-left (row, col) of each patch, column-major over the raster.
    tops: Vec<(usize, usize)>,
    /// μ_j: number of patches covering pixel j (row-major).
    multiplicity: Vec<u32>,
}

impl PatchGrid {
    /// Builds the grid for a `rows×cols` raster with patch side `w` and the
    /// given stride (unit stride is the usual choice).
    pub fn new(rows: usize, cols: usize, patch_side: usize, stride: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("patch grid: empty raster"));
        }
        if patch_side == 0 || stride == 0 {
            return Err(Error::invalid(
                "patch grid: patch side and stride must be positive",
            ));
        }
        if patch_side > rows || patch_side > cols {
            return Err(Error::invalid(format!(
                "patch side {patch_side} exceeds raster {rows}x{cols}"
            )));
        }
        let mut tops = Vec::new();
        let mut c = 0;
        while c + patch_side <= cols {
            let mut r = 0;
            while r + patch_side <= rows {
                tops.push((r, c));
                r += stride;
            }
            c += stride;
        }
        let mut multiplicity = vec![0u32; rows * cols];
        for &(r0, c0) in &tops {
            for dc in 0..patch_side {
                for dr in 0..patch_side {
                    multiplicity[(r0 + dr) * cols + (c0 + dc)] += 1;
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            patch_side,
            stride,
            tops,
            multiplicity,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Patch length `w²`.
    pub fn patch_len(&self) -> usize {
        self.patch_side * self.patch_side
    }

    /// Number of patches `|I_p|`.
    pub fn patch_count(&self) -> usize {
        self.tops.len()
    }

    /// Top-left coordinates of the patches, in extraction order.
    pub fn tops(&self) -> &[(usize, usize)] {
        &self.tops
    }

    /// Per-pixel patch multiplicities μ (row-major).
    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    /// True when every pixel is covered by at least one patch.
    pub fn covers_all_pixels(&self) -> bool {
        self.multiplicity.iter().all(|&m| m > 0)
    }

    pub fn matches_field(&self, field: &ComplexField) -> bool {
        self.rows == field.rows() && self.cols == field.cols()
    }
}

/// The patches `x_i = R_i x` extracted from a field on a [`PatchGrid`].
///
/// Each patch is vectorized column-major: entry `(dr, dc)` of the window
/// sits at position `dc·w + dr`.
#[derive(Debug, Clone)]
pub struct PatchSet {
    grid: PatchGrid,
    patches: Vec<Vec<Complex64>>,
}

impl PatchSet {
    /// Wraps externally produced patches (e.g. sparse reconstructions
    /// `Dα_i`), checking counts and lengths against the grid.
    pub fn from_patches(grid: PatchGrid, patches: Vec<Vec<Complex64>>) -> Result<Self> {
        if patches.len() != grid.patch_count() {
            return Err(Error::dims(format!(
                "{} patches for a grid of {}",
                patches.len(),
                grid.patch_count()
            )));
        }
        let w2 = grid.patch_len();
        if patches.iter().any(|p| p.len() != w2) {
            return Err(Error::dims(format!("every patch must have length {w2}")));
        }
        Ok(Self { grid, patches })
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn patches(&self) -> &[Vec<Complex64>] {
        &self.patches
    }

    pub fn patches_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.patches
    }
}

/// Extracts every grid window from the field.
pub fn extract_patches(field: &ComplexField, grid: &PatchGrid) -> Result<PatchSet> {
    if !grid.matches_field(field) {
        return Err(Error::dims(format!(
            "grid {}x{} vs field {}x{}",
            grid.rows,
            grid.cols,
            field.rows(),
            field.cols()
        )));
    }
    let w = grid.patch_side;
    let data = field.data();
    let cols = grid.cols;
    let patches = grid
        .tops
        .iter()
        .map(|&(r0, c0)| {
            let mut p = Vec::with_capacity(w * w);
            for dc in 0..w {
                for dr in 0..w {
                    p.push(data[(r0 + dr) * cols + (c0 + dc)]);
                }
            }
            p
        })
        .collect();
    PatchSet::from_patches(grid.clone(), patches)
}

/// Sums every patch back into place and divides by the multiplicity:
/// `(Σ R_iᴴR_i)⁻¹ Σ R_iᴴ x_i`.
///
/// Fails if some pixel is covered by no patch.
pub fn aggregate_patches(patches: &PatchSet) -> Result<ComplexField> {
    let sum = accumulate_patches(patches);
    let grid = &patches.grid;
    let mut out = sum;
    for (j, v) in out.iter_mut().enumerate() {
        let mu = grid.multiplicity[j];
        if mu == 0 {
            return Err(Error::UncoveredPixel(j));
        }
        *v /= mu as f64;
    }
    ComplexField::new(grid.rows, grid.cols, out)
}

/// The raw patch sum `Σ R_iᴴ x_i` without the multiplicity division, as
/// needed by the backward-propagation update.
pub fn accumulate_patches(patches: &PatchSet) -> Vec<Complex64> {
    let grid = &patches.grid;
    let w = grid.patch_side;
    let cols = grid.cols;
    let mut sum = vec![Complex64::new(0.0, 0.0); grid.rows * grid.cols];
    // Fixed iteration order keeps the accumulation bit-reproducible.
    for (i, &(r0, c0)) in grid.tops.iter().enumerate() {
        let p = &patches.patches[i];
        for dc in 0..w {
            for dr in 0..w {
                sum[(r0 + dr) * cols + (c0 + dc)] += p[dc * w + dr];
            }
        }
    }
    sum
}
