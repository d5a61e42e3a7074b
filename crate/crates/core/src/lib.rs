//! Phase retrieval from noisy coded diffraction patterns with
//! complex-domain dictionary learning.
//!
//! The library recovers a complex object wavefront from squared-magnitude
//! measurements taken through random phase masks, under Poisson or Gaussian
//! noise. The solver alternates four blocks: a proximal amplitude filter at
//! the sensor plane, a diagonal least-squares backward propagation, greedy
//! sparse coding of object-plane patches over a complex dictionary, and
//! online dictionary learning. A Gerchberg–Saxton-style baseline (the same
//! loop without the object-plane sparse model) and synthetic test scenes
//! are included for benchmarking.

pub mod error;
pub mod field;
pub mod io;
pub mod optics;
pub mod patch;
pub mod retrieval;
pub mod sensor;
pub mod sparse;
pub mod synthdata;

pub use error::{Error, Result};
pub use field::{rmse_wrapped, wrap, ComplexField};
pub use optics::{generate_masks, MaskSet};
pub use patch::{aggregate_patches, extract_patches, PatchGrid, PatchSet};
pub use retrieval::{RetrievalResult, SolverConfig};
pub use sensor::{NoiseModel, ObservationSet};
pub use sparse::{Dictionary, SparseCode};
