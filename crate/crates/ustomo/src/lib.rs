//! Speed-of-sound tomography on a desk: FDTD wave simulation, adjoint-state
//! inversion, and neural correction of surrogate-model errors.
//!
//! The crate simulates a circular ultrasound-tomography rig in 2D. A ring of
//! transmitters fires one at a time; receivers on the same ring record
//! pressure traces; the inverse problem recovers the speed-of-sound field
//! `c(x)` inside the ring. Three forward-model tiers are built from one
//! configurable solver:
//!
//! * a *physical* tier standing in for the true measurement process,
//! * an *accurate* tier (fine grid, good absorbing layer),
//! * a *surrogate* tier (coarse grid, deliberately thin absorbing layer)
//!   that is cheap enough for iterative inversion.
//!
//! Inverting measured data directly with the surrogate model bakes its
//! modelling error into the image. The correction pipeline learns a mapping
//! that converts measured signals into signals the surrogate model would have
//! produced, by composing a trace autoencoder `α`, a block-sparse residual
//! network `φ'`, and the decoder `β`. Reconstruction then runs on the cheap
//! model with corrected data (the NNAEE scheme).
//!
//! Module map:
//!
//! * [`scene`] — random speed-of-sound fields, grid projection, RMSE
//! * [`wavesim`] — leapfrog FDTD solver, damping layers, measurement sets
//! * [`adjoint`] — misfit, adjoint-state gradient, iterative reconstruction
//! * [`neural`] — dense/block-sparse networks, backprop, Adam training
//! * [`pipeline`] — dataset generation, training stages, evaluation reports
//! * [`store`] — binary formats (`SOSF`, `MSIG`, `NNET`) and manifests
//!
//! The `book/` directory at the repository root walks through the same
//! modules with runnable examples; its snippets compile as doc-tests via
//! [`guide`].

pub mod adjoint;
pub mod guide;
pub mod neural;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod store;
pub mod wavesim;

use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid model configuration (CFL violation, bad geometry, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Inclusion placement failed after the bounded number of retries.
    #[error("inclusion placement failed after {retries} retries")]
    Placement { retries: usize },

    /// Grids are not commensurate for block-mean projection.
    #[error("resampling error: {0}")]
    Resample(String),

    /// Array dimensions do not match the operation's contract.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The time stepper produced a non-finite value.
    #[error("solver instability: non-finite field value at step {step}")]
    Instability { step: usize },

    /// Iterative reconstruction failed to decrease the misfit.
    #[error("optimization diverged after {iterations} iterations")]
    Divergence {
        iterations: usize,
        /// Last iterate that still had a finite, non-increasing misfit.
        last_stable: Box<scene::SosField>,
        misfit_history: Vec<f64>,
    },

    /// Network training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// Network widths/shapes incompatible with the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// File did not start with the expected magic bytes or has a bad layout.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// File ended before the declared payload was complete.
    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    /// Stored checksum does not match the file contents.
    #[error("checksum mismatch for {path}")]
    Checksum { path: PathBuf },

    /// Manifest or model file written by an incompatible version.
    #[error("unsupported format version {found} in {path} (supported: {supported})")]
    Version {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("json error in {path}: {detail}")]
    Json { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
