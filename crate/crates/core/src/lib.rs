//! Non-intrusive reduced order modelling with adaptive randomized dynamic
//! mode decomposition (ARDMD).
//!
//! The pipeline:
//!
//! 1. [`swe`] generates shallow-water snapshot data on a β-plane channel.
//! 2. [`rsvd`] computes a randomized economy SVD of the snapshot matrix.
//! 3. [`dmd`] builds the reduced operator, Ritz values, modes and amplitudes.
//! 4. [`rank`] sweeps the target rank and picks the smallest one meeting the
//!    error and correlation thresholds.
//! 5. [`rbf`] interpolates the modal coefficients in time with thin-plate
//!    radial basis functions so fields can be predicted between snapshots.
//!
//! [`io`] holds the binary containers and CSV exports used by the CLI.

pub mod dmd;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rank;
pub mod rbf;
pub mod rsvd;
pub mod snapshots;
pub mod swe;

pub use dmd::{DmdFit, DmdModel, Reconstruction, RitzPoint, SvdMethod};
pub use error::{Error, ErrorKind, Result};
pub use linalg::{ComplexMatrix, RealMatrix, SvdFactors};
pub use rank::{RankCriteria, RankSelection, RankSweepRecord};
pub use rbf::{NiromInterpolant, RbfLayout, RbfSurface, ScatteredNodes};
pub use rsvd::SketchConfig;
pub use snapshots::SnapshotMatrix;
pub use swe::{FieldTriple, Scales, SweConfig, SweRun};

pub use faer::c64;
