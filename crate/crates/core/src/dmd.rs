//! Dynamic mode decomposition on top of an (optionally randomized) SVD.
//!
//! Given snapshots `V = [v₀ … v_N]`, split into `V₀ = [v₀ … v_{N−1}]` and
//! `V₁ = [v₁ … v_N]`, factor `V₀ ≈ U Σ Wᵀ` and form the reduced operator
//! `S = Uᵀ V₁ W Σ⁺`. Its eigenpairs `S X = X Λ` give the Ritz values and the
//! modes `Φ = U X`. Amplitudes fit the first snapshot in the least-squares
//! sense, and the rank-`k` model is `V_DMD = Φ diag(a) Van` with
//! `Van[j, t] = λ_jᵗ`.
//!
//! Mode columns are normalized to unit 2-norm; the scale lives in the
//! amplitudes. Modes are ordered by descending `|a_j|`, then descending
//! `|λ_j|`, then ascending frequency.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};
use log::{debug, warn};

use crate::error::{Error, Result};
use crate::linalg::{
    complex_lstsq, eig_general, frobenius_complex, pinv_diag, to_complex, ComplexMatrix, RealMatrix, SvdFactors,
    DEFAULT_RANK_TOL,
};
use crate::rsvd::{full_svd_reference, randomized_svd, SketchConfig};
use crate::snapshots::SnapshotMatrix;

/// Splits `[v₀ … v_N]` into the shifted pair `([v₀ … v_{N−1}], [v₁ … v_N])`.
pub fn split_snapshots(v: MatRef<'_, f64>) -> Result<(RealMatrix, RealMatrix)> {
    let n = v.ncols();
    if n < 3 {
        return Err(Error::Shape(format!("need at least 3 snapshots, got {n}")));
    }
    Ok((v.subcols(0, n - 1).to_owned(), v.subcols(1, n - 1).to_owned()))
}

#[derive(Clone, Debug)]
pub struct ReducedOperator {
    pub matrix: RealMatrix,
    /// Retained singular values that were treated as zero by `Σ⁺`.
    pub truncated: usize,
}

/// `S = Uᵀ (V₁ W Σ⁺)`.
pub fn reduced_operator(f: &SvdFactors, v1: MatRef<'_, f64>) -> Result<ReducedOperator> {
    if v1.nrows() != f.u.nrows() || v1.ncols() != f.w.nrows() {
        return Err(Error::Shape(format!(
            "shifted snapshots are {}x{}, factors expect {}x{}",
            v1.nrows(),
            v1.ncols(),
            f.u.nrows(),
            f.w.nrows()
        )));
    }
    let pinv = pinv_diag(&f.sigma, DEFAULT_RANK_TOL);
    let truncated = f.rank() - pinv.rank;
    if truncated > 0 {
        warn!("reduced operator: {truncated} retained singular value(s) below tolerance were zeroed");
    }
    let w_scaled = Mat::from_fn(f.w.nrows(), f.rank(), |i, j| f.w[(i, j)] * pinv.inverse[j]);
    let projected = v1 * &w_scaled;
    let matrix = f.u.transpose() * &projected;
    Ok(ReducedOperator { matrix, truncated })
}

/// Eigenvalues of `S` and the lifted modes `Φ = U X` with unit-norm columns.
pub fn dmd_modes(f: &SvdFactors, s: MatRef<'_, f64>) -> Result<(ComplexMatrix, Vec<c64>)> {
    if s.nrows() != f.rank() {
        return Err(Error::Shape(format!("operator size {} does not match rank {}", s.nrows(), f.rank())));
    }
    let eig = eig_general(s)?;
    let mut phi = to_complex(f.u.as_ref()) * &eig.vectors;
    normalize_columns(&mut phi);
    Ok((phi, eig.values))
}

fn normalize_columns(phi: &mut ComplexMatrix) -> Vec<f64> {
    (0..phi.ncols())
        .map(|j| {
            let norm = phi.col(j).norm_l2();
            if norm > 0.0 {
                for i in 0..phi.nrows() {
                    phi[(i, j)] /= norm;
                }
            }
            norm
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<c64>,
    /// `‖Φ a − v₀‖₂`.
    pub residual: f64,
    /// Set when `Φ` is numerically rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
}

/// Least-squares amplitudes `a = Φ⁺ v₀`.
pub fn amplitudes(phi: MatRef<'_, c64>, v0: &[f64]) -> Result<AmplitudeFit> {
    let rhs: Vec<c64> = v0.iter().map(|&x| c64::new(x, 0.0)).collect();
    let ls = complex_lstsq(phi, &rhs, DEFAULT_RANK_TOL)?;
    let rank_deficient = ls.rank < phi.ncols();
    if rank_deficient {
        debug!("amplitudes: mode matrix has rank {} < {}", ls.rank, phi.ncols());
    }
    Ok(AmplitudeFit { amplitudes: ls.solution, residual: ls.residual, rank_deficient })
}

/// `Van[j, t] = λ_jᵗ` for `t = 0 … n_cols − 1`.
pub fn vandermonde(lambda: &[c64], n_cols: usize) -> ComplexMatrix {
    let mut van = Mat::zeros(lambda.len(), n_cols);
    for (j, &l) in lambda.iter().enumerate() {
        let mut p = c64::new(1.0, 0.0);
        for t in 0..n_cols {
            van[(j, t)] = p;
            p *= l;
        }
    }
    van
}

/// How the snapshot matrix is factored before the DMD step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdMethod {
    Randomized(SketchConfig),
    /// Deterministic economy SVD truncated to `rank`.
    Exact { rank: usize },
}

impl SvdMethod {
    pub fn rank(&self) -> usize {
        match self {
            SvdMethod::Randomized(cfg) => cfg.target_rank,
            SvdMethod::Exact { rank } => *rank,
        }
    }
}

/// Rank-`k` DMD model `v_t = Σ_j a_j φ_j λ_jᵗ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DmdModel {
    modes: ComplexMatrix,
    ritz: Vec<c64>,
    amplitudes: Vec<c64>,
    dt: f64,
    snapshot_count: usize,
}

/// Diagnostics gathered while fitting a model.
#[derive(Clone, Debug)]
pub struct DmdFit {
    pub model: DmdModel,
    pub svd_rank_used: usize,
    pub truncated_singular_values: usize,
    pub amplitude_residual: f64,
    pub rank_deficient_modes: bool,
}

impl DmdModel {
    /// Builds a model, normalizing mode columns (scale absorbed into the
    /// amplitudes) and applying the canonical mode order.
    pub fn new(
        mut modes: ComplexMatrix,
        ritz: Vec<c64>,
        mut amplitudes: Vec<c64>,
        dt: f64,
        snapshot_count: usize,
    ) -> Result<Self> {
        validate_parts(&modes, &ritz, &amplitudes, dt)?;
        let norms = normalize_columns(&mut modes);
        for (a, n) in amplitudes.iter_mut().zip(norms) {
            *a *= n;
        }
        let order = mode_order(&ritz, &amplitudes);
        let modes = Mat::from_fn(modes.nrows(), order.len(), |i, j| modes[(i, order[j])]);
        let ritz = order.iter().map(|&j| ritz[j]).collect();
        let amplitudes = order.iter().map(|&j| amplitudes[j]).collect();
        Ok(Self { modes, ritz, amplitudes, dt, snapshot_count })
    }

    /// Reassembles a model exactly as stored, without renormalizing.
    pub(crate) fn from_stored(
        modes: ComplexMatrix,
        ritz: Vec<c64>,
        amplitudes: Vec<c64>,
        dt: f64,
        snapshot_count: usize,
    ) -> Result<Self> {
        validate_parts(&modes, &ritz, &amplitudes, dt)?;
        Ok(Self { modes, ritz, amplitudes, dt, snapshot_count })
    }

    /// Runs the full decomposition on a snapshot matrix.
    pub fn fit(v: &SnapshotMatrix, method: SvdMethod) -> Result<DmdFit> {
        let (v0, v1) = split_snapshots(v.data())?;
        let factors = match method {
            SvdMethod::Randomized(cfg) => randomized_svd(v0.as_ref(), &cfg)?,
            SvdMethod::Exact { rank } => full_svd_reference(v0.as_ref(), rank)?,
        };
        let op = reduced_operator(&factors, v1.as_ref())?;
        let (phi, lambda) = dmd_modes(&factors, op.matrix.as_ref())?;
        let fit = amplitudes(phi.as_ref(), &v.column(0))?;
        let model = DmdModel::new(phi, lambda, fit.amplitudes, v.dt(), v.cols())?;
        Ok(DmdFit {
            model,
            svd_rank_used: factors.rank_used,
            truncated_singular_values: op.truncated,
            amplitude_residual: fit.residual,
            rank_deficient_modes: fit.rank_deficient,
        })
    }

    pub fn modes(&self) -> MatRef<'_, c64> {
        self.modes.as_ref()
    }

    pub fn ritz(&self) -> &[c64] {
        &self.ritz
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amplitudes
    }

    pub fn rank(&self) -> usize {
        self.ritz.len()
    }

    /// Length of each mode (state dimension).
    pub fn state_dim(&self) -> usize {
        self.modes.nrows()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of snapshots the model was trained on (`N + 1`).
    pub fn snapshot_count(&self) -> usize {
        self.snapshot_count
    }

    /// Training window `[t₁, t_N]`, with the first snapshot at time zero.
    pub fn time_window(&self) -> (f64, f64) {
        (0.0, self.snapshot_count.saturating_sub(1) as f64 * self.dt)
    }

    /// Modal coefficients `b_j = a_j λ_jᵗ` at snapshot index `t`.
    pub fn coefficients(&self, t: usize) -> Vec<c64> {
        self.ritz.iter().zip(&self.amplitudes).map(|(l, a)| a * l.powu(t as u32)).collect()
    }

    /// `Σ_j b_j φ_j`, real part only.
    pub fn combine(&self, coeffs: &[c64]) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.rank());
        (0..self.state_dim())
            .map(|i| coeffs.iter().enumerate().map(|(j, b)| (self.modes[(i, j)] * b).re).sum())
            .collect()
    }
}

fn validate_parts(modes: &ComplexMatrix, ritz: &[c64], amplitudes: &[c64], dt: f64) -> Result<()> {
    let k = ritz.len();
    if modes.ncols() != k || amplitudes.len() != k {
        return Err(Error::Shape(format!(
            "mode count mismatch: {} modes, {} Ritz values, {} amplitudes",
            modes.ncols(),
            k,
            amplitudes.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("sampling interval must be positive, got {dt}")));
    }
    Ok(())
}

// Keys are rounded to ten significant digits so that conjugate pairs, whose
// magnitudes agree only to round-off, compare as ties.
fn mode_order(ritz: &[c64], amplitudes: &[c64]) -> Vec<usize> {
    let amax = amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let lmax = ritz.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let quantize = |x: f64, scale: f64| if scale > 0.0 { (x / scale * 1e10).round() } else { 0.0 };
    let mut idx: Vec<usize> = (0..ritz.len()).collect();
    idx.sort_by(|&p, &q| {
        let ka = quantize(amplitudes[q].norm(), amax).total_cmp(&quantize(amplitudes[p].norm(), amax));
        let kl = quantize(ritz[q].norm(), lmax).total_cmp(&quantize(ritz[p].norm(), lmax));
        ka.then(kl)
            .then(principal_arg(ritz[p]).total_cmp(&principal_arg(ritz[q])))
            .then(p.cmp(&q))
    });
    idx
}

/// Argument in `(−π, π]`.
fn principal_arg(z: c64) -> f64 {
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Real reconstruction plus the discarded imaginary part.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub data: RealMatrix,
    /// Frobenius norm of the imaginary part of `Φ diag(a) Van`.
    pub imag_residue: f64,
    /// Frobenius norm of the full complex product.
    pub norm: f64,
}

impl Reconstruction {
    pub fn relative_imag_residue(&self) -> f64 {
        if self.norm > 0.0 {
            self.imag_residue / self.norm
        } else {
            0.0
        }
    }
}

/// `Re(Φ diag(a) Van)` over `n_cols` snapshot times.
pub fn reconstruct(model: &DmdModel, n_cols: usize) -> Reconstruction {
    let k = model.rank();
    let scaled = Mat::from_fn(model.state_dim(), k, |i, j| model.modes[(i, j)] * model.amplitudes[j]);
    let van = vandermonde(&model.ritz, n_cols);
    let full = &scaled * &van;
    let data = Mat::from_fn(full.nrows(), full.ncols(), |i, j| full[(i, j)].re);
    let imag = Mat::from_fn(full.nrows(), full.ncols(), |i, j| full[(i, j)].im);
    Reconstruction { data, imag_residue: imag.norm_l2(), norm: frobenius_complex(full.as_ref()) }
}

/// Growth rate and frequency of one Ritz value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RitzPoint {
    pub lambda: c64,
    /// `ln|λ| / dt`; `−∞` when `λ = 0`.
    pub growth_rate: f64,
    /// `arg(λ) / dt` with the argument in `(−π, π]`.
    pub frequency: f64,
    pub amplitude_magnitude: f64,
}

impl RitzPoint {
    pub fn new(lambda: c64, amplitude: c64, dt: f64) -> Self {
        let (growth_rate, frequency) = if lambda.norm() == 0.0 {
            (f64::NEG_INFINITY, 0.0)
        } else {
            (lambda.norm().ln() / dt, principal_arg(lambda) / dt)
        };
        Self { lambda, growth_rate, frequency, amplitude_magnitude: amplitude.norm() }
    }

    /// True for a zero Ritz value, whose growth rate is the `−∞` sentinel.
    pub fn is_degenerate(&self) -> bool {
        self.growth_rate == f64::NEG_INFINITY
    }
}

/// Ritz points in the model's mode order (descending amplitude).
pub fn spectrum(model: &DmdModel) -> Vec<RitzPoint> {
    let points: Vec<RitzPoint> = model
        .ritz
        .iter()
        .zip(&model.amplitudes)
        .map(|(&l, &a)| RitzPoint::new(l, a, model.dt))
        .collect();
    if points.iter().any(RitzPoint::is_degenerate) {
        warn!("spectrum: zero Ritz value(s) present, growth rate reported as -inf");
    }
    points
}
