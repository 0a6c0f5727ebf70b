use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, RealMatrix};

/// Flattened field snapshots sampled at a uniform interval.
///
/// Column `t` holds the state at time `t * dt`. Each column is a grid of
/// `ny` rows by `nx` columns flattened row-major (`index = j * nx + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: RealMatrix,
    dt: f64,
    nx: usize,
    ny: usize,
    field: String,
}

impl SnapshotMatrix {
    pub fn new(data: RealMatrix, dt: f64, nx: usize, ny: usize, field: impl Into<String>) -> Result<Self> {
        let (m, n) = (data.nrows(), data.ncols());
        if m == 0 || n == 0 {
            return Err(Error::Shape(format!("snapshot matrix must be non-empty, got {m}x{n}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("sampling interval must be positive, got {dt}")));
        }
        if nx == 0 || ny == 0 || nx.checked_mul(ny) != Some(m) {
            return Err(Error::Shape(format!("grid {nx}x{ny} does not match {m} rows")));
        }
        ensure_finite(data.as_ref())?;
        Ok(Self { data, dt, nx, ny, field: field.into() })
    }

    /// Wraps an ungridded matrix as a single-row grid (`nx = rows`, `ny = 1`).
    pub fn ungridded(data: RealMatrix, dt: f64, field: impl Into<String>) -> Result<Self> {
        let m = data.nrows();
        Self::new(data, dt, m, 1, field)
    }

    pub fn data(&self) -> MatRef<'_, f64> {
        self.data.as_ref()
    }

    pub fn into_data(self) -> RealMatrix {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.rows()).map(|i| self.data[(i, t)]).collect()
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.dt
    }

    /// Copy with entries divided by `value_ref` and the time step by `time_ref`.
    pub fn divided(&self, value_ref: f64, time_ref: f64) -> Result<Self> {
        let data = Mat::from_fn(self.rows(), self.cols(), |i, j| self.data[(i, j)] / value_ref);
        Self::new(data, self.dt / time_ref, self.nx, self.ny, self.field.clone())
    }

    /// Inverse of [`SnapshotMatrix::divided`].
    pub fn multiplied(&self, value_ref: f64, time_ref: f64) -> Result<Self> {
        let data = Mat::from_fn(self.rows(), self.cols(), |i, j| self.data[(i, j)] * value_ref);
        Self::new(data, self.dt * time_ref, self.nx, self.ny, self.field.clone())
    }
}
