#![allow(dead_code)]

use faer::Mat;
use nirom::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut r = rng(seed);
    Mat::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Classical Gram-Schmidt with re-orthogonalization, written out by hand.
pub fn gram_schmidt(a: &Mat<f64>) -> Mat<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut v: Vec<f64> = (0..m).map(|i| a[(i, j)]).collect();
        for _ in 0..2 {
            for b in &q {
                let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= d * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.iter().map(|x| x / norm).collect());
    }
    Mat::from_fn(m, n, |i, j| q[j][i])
}

/// Random matrix with orthonormal columns.
pub fn orthonormal(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    gram_schmidt(&uniform_matrix(rows, cols, seed))
}

/// `U diag(sigma) Wᵀ` with random orthonormal factors.
pub fn planted_spectrum(rows: usize, cols: usize, sigma: &[f64], seed: u64) -> Mat<f64> {
    let u = orthonormal(rows, sigma.len(), seed);
    let w = orthonormal(cols, sigma.len(), seed.wrapping_add(1));
    Mat::from_fn(rows, cols, |i, j| (0..sigma.len()).map(|p| u[(i, p)] * sigma[p] * w[(j, p)]).sum())
}

/// Real block-diagonal generator: a positive real entry `r` contributes a 1×1
/// block, a complex entry `r e^{iθ}` a 2×2 rotation-scaling block for the pair.
pub enum Block {
    Real(f64),
    Pair(f64, f64),
}

pub fn block_matrix(blocks: &[Block]) -> Mat<f64> {
    let n: usize = blocks.iter().map(|b| if let Block::Pair(..) = b { 2 } else { 1 }).sum();
    let mut d = Mat::zeros(n, n);
    let mut p = 0;
    for b in blocks {
        match *b {
            Block::Real(r) => {
                d[(p, p)] = r;
                p += 1;
            }
            Block::Pair(r, th) => {
                d[(p, p)] = r * th.cos();
                d[(p, p + 1)] = -r * th.sin();
                d[(p + 1, p)] = r * th.sin();
                d[(p + 1, p + 1)] = r * th.cos();
                p += 2;
            }
        }
    }
    d
}

pub fn block_eigenvalues(blocks: &[Block]) -> Vec<c64> {
    let mut out = Vec::new();
    for b in blocks {
        match *b {
            Block::Real(r) => out.push(c64::new(r, 0.0)),
            Block::Pair(r, th) => {
                out.push(c64::from_polar(r, th));
                out.push(c64::from_polar(r, -th));
            }
        }
    }
    out
}

/// Snapshots `v_t = P D^t z₀` for a random `m × r` embedding `P`.
pub struct Planted {
    pub snapshots: Mat<f64>,
    pub embedding: Mat<f64>,
    pub eigenvalues: Vec<c64>,
}

pub fn planted_dynamics(m: usize, n_snapshots: usize, blocks: &[Block], seed: u64) -> Planted {
    let d = block_matrix(blocks);
    let r = d.nrows();
    let p = uniform_matrix(m, r, seed);
    let mut z: Vec<f64> = (0..r).map(|i| 1.0 + 0.25 * i as f64).collect();
    let mut v = Mat::zeros(m, n_snapshots);
    for t in 0..n_snapshots {
        for i in 0..m {
            v[(i, t)] = (0..r).map(|q| p[(i, q)] * z[q]).sum();
        }
        z = (0..r).map(|i| (0..r).map(|q| d[(i, q)] * z[q]).sum()).collect();
    }
    Planted { snapshots: v, embedding: p, eigenvalues: block_eigenvalues(blocks) }
}

/// Largest distance from each expected value to its nearest match, with
/// every found value used at most once.
pub fn spectrum_distance(found: &[c64], expected: &[c64]) -> f64 {
    assert_eq!(found.len(), expected.len());
    let mut used = vec![false; found.len()];
    let mut worst: f64 = 0.0;
    for e in expected {
        let (idx, d) = found
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, f)| (i, (f - e).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        used[idx] = true;
        worst = worst.max(d);
    }
    worst
}

/// Every value has a conjugate partner within `tol` (itself if real).
pub fn conjugate_closed(values: &[c64], tol: f64) -> bool {
    let conj: Vec<c64> = values.iter().map(|z| z.conj()).collect();
    spectrum_distance(values, &conj) <= tol
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / n
}
