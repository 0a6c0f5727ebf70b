//! Randomized economy SVD.
//!
//! A Gaussian test matrix `M` (`n × r`, `r = min(n, 2k)`) sketches the range
//! of `A`; the sketch is orthonormalized into `Q`, `A` is projected onto it,
//! and a small SVD of `QᵀA` is lifted back with `U = Q Q₁`. The top `k`
//! triplets are returned.
//!
//! The test matrix has standard normal entries drawn from a ChaCha8 stream
//! seeded by [`SketchConfig::seed`], so results are bit-reproducible per seed.
//! When the sketch is numerically rank deficient the factors are padded with
//! orthonormal completions and zero singular values so the output always has
//! exactly `k` columns.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, economy_svd, ensure_finite, orthonormalize, RealMatrix, SvdFactors};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SketchConfig {
    /// Target rank `k`, with `2 <= k < n`.
    pub target_rank: usize,
    pub seed: u64,
    /// Extra subspace iterations. Zero reproduces the plain sketch.
    pub power_iterations: usize,
}

impl SketchConfig {
    pub fn new(target_rank: usize, seed: u64) -> Self {
        Self { target_rank, seed, power_iterations: 0 }
    }

    pub fn with_power_iterations(mut self, q: usize) -> Self {
        self.power_iterations = q;
        self
    }

    /// Number of sketch columns for an input with `n` columns.
    pub fn sketch_width(&self, n: usize) -> usize {
        n.min(2 * self.target_rank)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let k = self.target_rank;
        if k < 2 || k >= n {
            return Err(Error::Config(format!("target rank must satisfy 2 <= k < n, got k = {k}, n = {n}")));
        }
        Ok(())
    }
}

/// Gaussian test matrix, filled column by column from the seeded stream.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = StandardNormal.sample(&mut rng);
        }
    }
    m
}

pub fn randomized_svd(a: MatRef<'_, f64>, cfg: &SketchConfig) -> Result<SvdFactors> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(Error::Shape(format!(
            "randomized SVD expects rows >= cols, got {m}x{n}; transpose the input"
        )));
    }
    cfg.validate(n)?;
    ensure_finite(a)?;
    let k = cfg.target_rank;

    let test = gaussian_matrix(n, cfg.sketch_width(n), cfg.seed);
    let mut q = orthonormalize((a * &test).as_ref());
    for _ in 0..cfg.power_iterations {
        let z = orthonormalize((a.transpose() * &q).as_ref());
        q = orthonormalize((a * &z).as_ref());
    }

    // B = QᵀA is wide; factor Bᵀ = W Σ Q₁ᵀ instead.
    let b_t = a.transpose() * &q;
    let small = if q.ncols() == 0 {
        SvdFactors::new(Mat::zeros(n, 0), Vec::new(), Mat::zeros(0, 0))
    } else {
        economy_svd(b_t.as_ref())?
    };
    let kept = k.min(small.rank());
    let mut u = &q * small.w.subcols(0, kept);
    let mut w = small.u.subcols(0, kept).to_owned();
    let mut sigma = small.sigma[..kept].to_vec();

    if kept < k {
        log::debug!("randomized SVD: sketch rank {kept} < target {k}, padding with null directions");
        u = complete_orthonormal(u.as_ref(), k);
        w = complete_orthonormal(w.as_ref(), k);
        sigma.resize(k, 0.0);
    }
    Ok(SvdFactors::new(u, sigma, w))
}

/// Deterministic economy SVD truncated to `k` columns, used as the accuracy
/// and timing baseline for [`randomized_svd`].
pub fn full_svd_reference(a: MatRef<'_, f64>, k: usize) -> Result<SvdFactors> {
    if k == 0 {
        return Err(Error::Config("truncation rank must be at least 1".into()));
    }
    Ok(economy_svd(a)?.truncate(k))
}
