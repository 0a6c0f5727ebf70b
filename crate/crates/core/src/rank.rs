//! Adaptive rank selection.
//!
//! Every candidate rank in `[k_min, k_max]` is decomposed and scored with the
//! relative reconstruction error and the correlation coefficient. The chosen
//! rank is the smallest one meeting both thresholds; when none does, the rank
//! with the lowest error is returned and flagged as not converged.

use std::time::Instant;

use faer::MatRef;
use rayon::prelude::*;

use crate::dmd::{reconstruct, DmdModel, SvdMethod};
use crate::error::{Error, Result};
use crate::linalg::frobenius;
use crate::rsvd::SketchConfig;
use crate::snapshots::SnapshotMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankCriteria {
    pub max_rel_error: f64,
    pub min_correlation: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub sweep_step: usize,
    /// Subspace iterations passed through to the randomized SVD.
    pub power_iterations: usize,
}

pub const DEFAULT_MAX_REL_ERROR: f64 = 1e-3;
pub const DEFAULT_MIN_CORRELATION: f64 = 0.999;
pub const DEFAULT_K_CAP: usize = 64;

impl RankCriteria {
    /// Defaults for a snapshot matrix with `snapshot_count` columns, i.e.
    /// `n = snapshot_count − 1` columns in the shifted matrices.
    pub fn for_snapshots(snapshot_count: usize) -> Self {
        let n = snapshot_count.saturating_sub(1);
        Self {
            max_rel_error: DEFAULT_MAX_REL_ERROR,
            min_correlation: DEFAULT_MIN_CORRELATION,
            k_min: 2,
            k_max: n.saturating_sub(1).min(DEFAULT_K_CAP),
            sweep_step: 1,
            power_iterations: 0,
        }
    }

    pub fn validate(&self, snapshot_count: usize) -> Result<()> {
        let n = snapshot_count.saturating_sub(1);
        if !(2 <= self.k_min && self.k_min <= self.k_max && self.k_max < n) {
            return Err(Error::Config(format!(
                "rank bounds must satisfy 2 <= k_min <= k_max < n = {n}, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if !(self.max_rel_error > 0.0) {
            return Err(Error::Config(format!("error threshold must be positive, got {}", self.max_rel_error)));
        }
        if !(self.min_correlation > 0.0 && self.min_correlation <= 1.0) {
            return Err(Error::Config(format!("correlation threshold must lie in (0, 1], got {}", self.min_correlation)));
        }
        if self.sweep_step == 0 {
            return Err(Error::Config("sweep step must be at least 1".into()));
        }
        Ok(())
    }

    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (self.k_min..=self.k_max).step_by(self.sweep_step)
    }

    pub fn accepts(&self, rel_error: f64, correlation: f64) -> bool {
        rel_error <= self.max_rel_error && correlation >= self.min_correlation
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankSweepRecord {
    pub k: usize,
    pub rel_error: f64,
    pub correlation: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct RankSelection {
    pub model: DmdModel,
    pub k: usize,
    pub rel_error: f64,
    pub correlation: f64,
    /// False when no candidate met both thresholds.
    pub converged: bool,
    /// One record per candidate, ordered by `k`.
    pub trace: Vec<RankSweepRecord>,
}

fn check_same_shape(v: MatRef<'_, f64>, w: MatRef<'_, f64>) -> Result<()> {
    if v.nrows() != w.nrows() || v.ncols() != w.ncols() {
        return Err(Error::Shape(format!(
            "metric operands differ in shape: {}x{} vs {}x{}",
            v.nrows(),
            v.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

/// `‖V − V_DMD‖_F / ‖V‖_F`.
pub fn relative_error(v: MatRef<'_, f64>, v_dmd: MatRef<'_, f64>) -> Result<f64> {
    check_same_shape(v, v_dmd)?;
    let norm = frobenius(v);
    if norm == 0.0 {
        return Err(Error::Shape("relative error is undefined for a zero reference".into()));
    }
    Ok(frobenius((v - v_dmd).as_ref()) / norm)
}

/// `⟨V, V_DMD⟩² / (‖V‖_F² ‖V_DMD‖_F²)` over the flattened matrices.
pub fn correlation(v: MatRef<'_, f64>, v_dmd: MatRef<'_, f64>) -> Result<f64> {
    check_same_shape(v, v_dmd)?;
    let (nv, nd) = (frobenius(v), frobenius(v_dmd));
    if nv == 0.0 || nd == 0.0 {
        return Err(Error::Shape("correlation is undefined for a zero operand".into()));
    }
    let mut inner = 0.0;
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            inner += (v[(i, j)] / nv) * (v_dmd[(i, j)] / nd);
        }
    }
    Ok((inner * inner).min(1.0))
}

/// Seed for candidate rank `k`, derived from the base seed with a SplitMix64
/// finalizer so neighbouring ranks get unrelated streams.
pub fn rank_seed(base: u64, k: usize) -> u64 {
    let mut z = base ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn method_for(criteria: &RankCriteria, seed: u64, k: usize) -> SvdMethod {
    SvdMethod::Randomized(SketchConfig::new(k, rank_seed(seed, k)).with_power_iterations(criteria.power_iterations))
}

/// Fits one candidate and scores it against the data.
pub fn evaluate_rank(v: &SnapshotMatrix, method: SvdMethod) -> Result<(DmdModel, f64, f64)> {
    let fit = DmdModel::fit(v, method)?;
    let rec = reconstruct(&fit.model, v.cols());
    let err = relative_error(v.data(), rec.data.as_ref())?;
    // an all-zero reconstruction has no defined correlation; score it as 0
    let corr = correlation(v.data(), rec.data.as_ref()).unwrap_or(0.0);
    Ok((fit.model, err, corr))
}

pub fn select_rank(v: &SnapshotMatrix, criteria: &RankCriteria, seed: u64) -> Result<RankSelection> {
    criteria.validate(v.cols())?;
    let ks: Vec<usize> = criteria.candidates().collect();
    let trace = ks
        .par_iter()
        .map(|&k| {
            let start = Instant::now();
            let (_, rel_error, correlation) = evaluate_rank(v, method_for(criteria, seed, k))?;
            Ok(RankSweepRecord { k, rel_error, correlation, wall_time: start.elapsed().as_secs_f64() })
        })
        .collect::<Result<Vec<_>>>()?;

    let (best, converged) = match trace.iter().find(|r| criteria.accepts(r.rel_error, r.correlation)) {
        Some(r) => (r, true),
        None => {
            let r = trace
                .iter()
                .min_by(|a, b| a.rel_error.total_cmp(&b.rel_error).then(a.k.cmp(&b.k)))
                .expect("candidate list is non-empty");
            log::warn!("rank sweep did not converge; best error {:.4e} at k = {}", r.rel_error, r.k);
            (r, false)
        }
    };
    // refit the winner; the fit is deterministic so it matches the sweep
    let (model, rel_error, correlation) = evaluate_rank(v, method_for(criteria, seed, best.k))?;
    debug_assert_eq!(rel_error.to_bits(), best.rel_error.to_bits());
    Ok(RankSelection { model, k: best.k, rel_error, correlation, converged, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::Mat;

    #[test]
    fn identical_matrices_have_zero_error() {
        let v = Mat::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        assert_eq!(relative_error(v.as_ref(), v.as_ref()).unwrap(), 0.0);
    }

    #[test]
    fn zero_reconstruction_has_unit_error() {
        let v = Mat::from_fn(4, 3, |i, j| (i + j) as f64 + 1.0);
        let z = Mat::<f64>::zeros(4, 3);
        assert_eq!(relative_error(v.as_ref(), z.as_ref()).unwrap(), 1.0);
    }

    #[test]
    fn metrics_reject_bad_inputs() {
        let v = Mat::from_fn(2, 2, |i, j| (i + j) as f64);
        let z = Mat::<f64>::zeros(2, 2);
        assert!(relative_error(z.as_ref(), v.as_ref()).is_err());
        assert!(correlation(v.as_ref(), z.as_ref()).is_err());
        assert!(relative_error(v.as_ref(), Mat::<f64>::zeros(2, 3).as_ref()).is_err());
    }

    #[test]
    fn correlation_scale_invariant_and_orthogonal() {
        let v = Mat::from_fn(3, 2, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        let w = Mat::from_fn(3, 2, |i, j| 2.0 * v[(i, j)]);
        assert!((correlation(v.as_ref(), w.as_ref()).unwrap() - 1.0).abs() < 1e-12);
        let a = Mat::from_fn(2, 1, |i, _| [1.0, 0.0][i]);
        let b = Mat::from_fn(2, 1, |i, _| [0.0, 1.0][i]);
        assert_eq!(correlation(a.as_ref(), b.as_ref()).unwrap(), 0.0);
    }

    #[test]
    fn criteria_defaults_and_validation() {
        let c = RankCriteria::for_snapshots(120);
        assert_eq!((c.k_min, c.k_max), (2, 64));
        assert!(c.validate(120).is_ok());
        let c = RankCriteria::for_snapshots(20);
        assert_eq!(c.k_max, 18);
        assert!(c.validate(20).is_ok());
        let bad = RankCriteria { k_min: 1, ..c };
        assert!(bad.validate(20).is_err());
        let bad = RankCriteria { k_max: 19, ..c };
        assert!(bad.validate(20).is_err());
        let bad = RankCriteria { min_correlation: 1.5, ..c };
        assert!(bad.validate(20).is_err());
    }

    #[test]
    fn rank_seeds_differ() {
        assert_ne!(rank_seed(7, 2), rank_seed(7, 3));
        assert_eq!(rank_seed(7, 2), rank_seed(7, 2));
    }
}
