//! File formats for rasters and solver artifacts.
//!
//! Rasters are flat little-endian `f64` streams behind a 16-byte header
//! (8-byte magic, `u32` rows, `u32` cols). Complex rasters interleave
//! (re, im) pairs row-major; real rasters use one value per pixel and a
//! distinct magic. Mask sets, observation sets, dictionaries and solver
//! checkpoints are stored as rasters plus a small TOML sidecar.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::optics::MaskSet;
use crate::retrieval::Checkpoint;
use crate::sensor::{NoiseModel, ObservationSet};
use crate::sparse::Dictionary;

const COMPLEX_MAGIC: &[u8; 8] = b"CPXRAST1";
const REAL_MAGIC: &[u8; 8] = b"RELRAST1";

fn write_header(w: &mut impl Write, magic: &[u8; 8], rows: usize, cols: usize) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&(rows as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 8], path: &Path) -> Result<(usize, usize)> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)
        .map_err(|_| Error::BadRaster(format!("{}: truncated header", path.display())))?;
    if &head[..8] != magic {
        return Err(Error::BadRaster(format!(
            "{}: bad magic {:?}",
            path.display(),
            &head[..8]
        )));
    }
    let rows = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::BadRaster(format!(
            "{}: empty raster",
            path.display()
        )));
    }
    Ok((rows, cols))
}

/// Writes a complex field as interleaved (re, im) `f64` pairs.
pub fn write_complex_raster(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_header(&mut w, COMPLEX_MAGIC, field.rows(), field.cols())?;
    for z in field.data() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_complex_raster(path: impl AsRef<Path>) -> Result<ComplexField> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let (rows, cols) = read_header(&mut r, COMPLEX_MAGIC, path)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expect = rows * cols * 16;
    if bytes.len() != expect {
        return Err(Error::BadRaster(format!(
            "{}: {} payload bytes, want {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexField::new(rows, cols, data)
}

/// Writes a real raster (row-major `f64`).
pub fn write_real_raster(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    data: &[f64],
) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::dims(format!(
            "{} values for {rows}x{cols}",
            data.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_header(&mut w, REAL_MAGIC, rows, cols)?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_real_raster(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    let (rows, cols) = read_header(&mut r, REAL_MAGIC, path)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expect = rows * cols * 8;
    if bytes.len() != expect {
        return Err(Error::BadRaster(format!(
            "{}: {} payload bytes, want {expect}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((rows, cols, data))
}

// ---------------------------------------------------------------------------
// PNG export
// ---------------------------------------------------------------------------

fn to_gray_png(path: &Path, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = image::GrayImage::from_fn(cols as u32, rows as u32, |c, r| {
        let v = values[r as usize * cols + c as usize];
        image::Luma([(255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path)
        .map_err(|e| Error::BadRaster(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Grayscale PNG of `|x|`, normalized to the data range.
pub fn export_amplitude_png(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    to_gray_png(
        path.as_ref(),
        field.rows(),
        field.cols(),
        &field.amplitude(),
    )
}

/// Grayscale PNG of the wrapped phase (−π ↦ black, +π ↦ white).
pub fn export_phase_png(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    let phase = field.phase();
    let pi = std::f64::consts::PI;
    let scaled: Vec<f64> = phase.iter().map(|p| (p + pi) / (2.0 * pi)).collect();
    let path = path.as_ref();
    let img = image::GrayImage::from_fn(field.cols() as u32, field.rows() as u32, |c, r| {
        let v = scaled[r as usize * field.cols() + c as usize];
        image::Luma([(255.0 * v).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path)
        .map_err(|e| Error::BadRaster(format!("{}: {e}", path.display())))?;
    Ok(())
}

/// Grayscale PNG of a real raster, normalized to its range.
pub fn export_real_png(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    values: &[f64],
) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::dims("png raster length"));
    }
    to_gray_png(path.as_ref(), rows, cols, values)
}

// ---------------------------------------------------------------------------
// Mask sets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MaskMeta {
    rows: usize,
    cols: usize,
    count: usize,
    seed: u64,
}

fn toml_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::BadRaster(format!("{}: {e}", path.display()))
}

/// Saves a mask set as `mask_NN.rras` phase rasters plus `masks.toml`.
pub fn save_mask_set(dir: impl AsRef<Path>, masks: &MaskSet) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for s in 0..masks.count() {
        write_real_raster(
            dir.join(format!("mask_{s:02}.rras")),
            masks.rows(),
            masks.cols(),
            masks.phases(s),
        )?;
    }
    let meta = MaskMeta {
        rows: masks.rows(),
        cols: masks.cols(),
        count: masks.count(),
        seed: masks.seed(),
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_err(dir, e))?;
    fs::write(dir.join("masks.toml"), text)?;
    Ok(())
}

pub fn load_mask_set(dir: impl AsRef<Path>) -> Result<MaskSet> {
    let dir = dir.as_ref();
    let meta_path = dir.join("masks.toml");
    let meta: MaskMeta =
        toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| toml_err(&meta_path, e))?;
    let mut phases = Vec::with_capacity(meta.count);
    for s in 0..meta.count {
        let (rows, cols, data) = read_real_raster(dir.join(format!("mask_{s:02}.rras")))?;
        if rows != meta.rows || cols != meta.cols {
            return Err(Error::BadRaster(format!(
                "mask {s}: shape mismatch with sidecar"
            )));
        }
        phases.push(data);
    }
    MaskSet::from_phases(meta.rows, meta.cols, phases, meta.seed)
}

// ---------------------------------------------------------------------------
// Observation sets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ObsMeta {
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    seed: u64,
    rows: usize,
    cols: usize,
    count: usize,
}

/// Saves observations as `obs_NN.rras` rasters plus `observations.toml`.
pub fn save_observations(dir: impl AsRef<Path>, obs: &ObservationSet) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for s in 0..obs.count() {
        write_real_raster(
            dir.join(format!("obs_{s:02}.rras")),
            obs.rows(),
            obs.cols(),
            obs.raster(s),
        )?;
    }
    let (chi, sigma) = match obs.model() {
        NoiseModel::Poisson { chi } => (Some(chi), None),
        NoiseModel::Gaussian { sigma } => (None, Some(sigma)),
        NoiseModel::Noiseless => (None, None),
    };
    let meta = ObsMeta {
        model: obs.model().name().to_string(),
        chi,
        sigma,
        seed: obs.seed(),
        rows: obs.rows(),
        cols: obs.cols(),
        count: obs.count(),
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_err(dir, e))?;
    fs::write(dir.join("observations.toml"), text)?;
    Ok(())
}

pub fn load_observations(dir: impl AsRef<Path>) -> Result<ObservationSet> {
    let dir = dir.as_ref();
    let meta_path = dir.join("observations.toml");
    let meta: ObsMeta =
        toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| toml_err(&meta_path, e))?;
    let model = match meta.model.as_str() {
        "poisson" => NoiseModel::Poisson {
            chi: meta
                .chi
                .ok_or_else(|| Error::invalid("poisson sidecar missing chi"))?,
        },
        "gaussian" => NoiseModel::Gaussian {
            sigma: meta
                .sigma
                .ok_or_else(|| Error::invalid("gaussian sidecar missing sigma"))?,
        },
        "noiseless" => NoiseModel::Noiseless,
        other => {
            return Err(Error::invalid(format!(
                "unknown observation model '{other}'"
            )))
        }
    };
    let mut rasters = Vec::with_capacity(meta.count);
    for s in 0..meta.count {
        let (rows, cols, data) = read_real_raster(dir.join(format!("obs_{s:02}.rras")))?;
        if rows != meta.rows || cols != meta.cols {
            return Err(Error::BadRaster(format!(
                "obs {s}: shape mismatch with sidecar"
            )));
        }
        rasters.push(data);
    }
    ObservationSet::new(meta.rows, meta.cols, rasters, model, meta.seed)
}

// ---------------------------------------------------------------------------
// Dictionaries
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DictMeta {
    patch_side: usize,
    atoms: usize,
    provenance: String,
}

/// Saves a dictionary as a `w²×k` complex raster plus `dict.toml`. The
/// `provenance` string records how the prior was trained.
pub fn save_dictionary(dir: impl AsRef<Path>, dict: &Dictionary, provenance: &str) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (w2, k) = (dict.atom_len(), dict.atom_count());
    let mut data = vec![Complex64::new(0.0, 0.0); w2 * k];
    for j in 0..k {
        for (i, &v) in dict.atom(j).iter().enumerate() {
            data[i * k + j] = v;
        }
    }
    let field = ComplexField::new(w2, k, data)?;
    write_complex_raster(dir.join("dict.cras"), &field)?;
    let meta = DictMeta {
        patch_side: dict.patch_side(),
        atoms: k,
        provenance: provenance.to_string(),
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_err(dir, e))?;
    fs::write(dir.join("dict.toml"), text)?;
    Ok(())
}

pub fn load_dictionary(dir: impl AsRef<Path>) -> Result<Dictionary> {
    let dir = dir.as_ref();
    let meta_path = dir.join("dict.toml");
    let meta: DictMeta =
        toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| toml_err(&meta_path, e))?;
    let field = read_complex_raster(dir.join("dict.cras"))?;
    let w2 = meta.patch_side * meta.patch_side;
    if field.rows() != w2 || field.cols() != meta.atoms {
        return Err(Error::BadRaster(
            "dictionary raster shape mismatch with sidecar".into(),
        ));
    }
    let mut atoms = nalgebra::DMatrix::zeros(w2, meta.atoms);
    for j in 0..meta.atoms {
        for i in 0..w2 {
            atoms[(i, j)] = field.data()[i * meta.atoms + j];
        }
    }
    Dictionary::new(meta.patch_side, atoms)
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    next_iteration: usize,
    has_dictionary: bool,
}

/// Saves resumable solver state (estimate, dictionary, iteration index).
pub fn save_checkpoint(dir: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_complex_raster(dir.join("state_x.cras"), &ckpt.x)?;
    if let Some(d) = &ckpt.dictionary {
        save_dictionary(dir, d, "checkpoint")?;
    }
    let meta = CheckpointMeta {
        next_iteration: ckpt.next_iteration,
        has_dictionary: ckpt.dictionary.is_some(),
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_err(dir, e))?;
    fs::write(dir.join("checkpoint.toml"), text)?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let meta_path = dir.join("checkpoint.toml");
    let meta: CheckpointMeta =
        toml::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| toml_err(&meta_path, e))?;
    let x = read_complex_raster(dir.join("state_x.cras"))?;
    let dictionary = if meta.has_dictionary {
        Some(load_dictionary(dir)?)
    } else {
        None
    };
    Ok(Checkpoint {
        x,
        dictionary,
        next_iteration: meta.next_iteration,
    })
}
