//! Thin-plate radial basis function interpolation of DMD modal coefficients.
//!
//! A surface has the form
//!
//! ```text
//! s(x) = c₀ + c·x + Σᵢ βᵢ K(‖x − xᵢ‖₂),   K(r) = r² ln(r + 1)
//! ```
//!
//! with side conditions `Σ βᵢ = 0` and `Σ βᵢ xᵢ = 0`, which together with the
//! interpolation conditions give the symmetric saddle-point system
//! `[K P; Pᵀ 0] [β; c] = [f; 0]`. It is solved densely with partial pivoting
//! and a couple of steps of iterative refinement.
//!
//! Coordinates are mapped affinely onto `[0, 1]` per axis before the kernel is
//! evaluated; the mapping is stored with the surface.
//!
//! Note the kernel is `r² ln(r + 1)`, not the classical `r² ln r`.

use faer::linalg::solvers::Solve;
use faer::Mat;
use log::warn;
use rayon::prelude::*;

use crate::dmd::{vandermonde, DmdModel};
use crate::error::{Error, Result};

/// Radial kernel family. Only the thin-plate variant exists today.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    ThinPlate,
}

impl Kernel {
    #[inline]
    pub fn eval(self, r: f64) -> f64 {
        match self {
            Kernel::ThinPlate => r * r * r.ln_1p(),
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Kernel::ThinPlate => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Kernel::ThinPlate),
            _ => None,
        }
    }
}

/// `K(r) = r² ln(r + 1)` for `r >= 0`.
pub fn thinplate_kernel(r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Config(format!("kernel radius must be nonnegative, got {r}")));
    }
    Ok(Kernel::ThinPlate.eval(r))
}

/// Per-axis affine map `x ↦ (x − lower) / width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisScaling<const D: usize> {
    pub lower: [f64; D],
    pub width: [f64; D],
}

impl<const D: usize> AxisScaling<D> {
    /// Bounding-box map of the points; degenerate axes get unit width.
    pub fn fit(points: &[[f64; D]]) -> Self {
        let mut lower = [f64::INFINITY; D];
        let mut upper = [f64::NEG_INFINITY; D];
        for p in points {
            for d in 0..D {
                lower[d] = lower[d].min(p[d]);
                upper[d] = upper[d].max(p[d]);
            }
        }
        let mut width = [1.0; D];
        for d in 0..D {
            let w = upper[d] - lower[d];
            if w > 0.0 {
                width[d] = w;
            }
        }
        Self { lower, width }
    }

    #[inline]
    pub fn apply(&self, x: &[f64; D]) -> [f64; D] {
        let mut out = [0.0; D];
        for d in 0..D {
            out[d] = (x[d] - self.lower[d]) / self.width[d];
        }
        out
    }
}

/// Interpolation data: distinct points in `ℝᴰ` with one value each.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteredNodes<const D: usize> {
    points: Vec<[f64; D]>,
    values: Vec<f64>,
}

impl<const D: usize> ScatteredNodes<D> {
    pub fn new(points: Vec<[f64; D]>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Shape(format!("{} points but {} values", points.len(), values.len())));
        }
        validate_points(&points)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0, value: values[i] });
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &[[f64; D]] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn validate_points<const D: usize>(points: &[[f64; D]]) -> Result<()> {
    if points.len() < D + 1 {
        return Err(Error::Shape(format!("need at least {} nodes in {D} dimension(s), got {}", D + 1, points.len())));
    }
    for (i, p) in points.iter().enumerate() {
        if let Some(d) = p.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i, col: d, value: p[d] });
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    let lex = |a: &[f64; D], b: &[f64; D]| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    };
    order.sort_by(|&a, &b| lex(&points[a], &points[b]));
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::DuplicateNode { first: w[0].min(w[1]), second: w[0].max(w[1]) });
        }
    }
    Ok(())
}

/// A fitted RBF interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct RbfSurface<const D: usize> {
    kernel: Kernel,
    scaling: AxisScaling<D>,
    centers: Vec<[f64; D]>,
    scaled_centers: Vec<[f64; D]>,
    weights: Vec<f64>,
    constant: f64,
    linear: [f64; D],
}

impl<const D: usize> RbfSurface<D> {
    /// Reassembles a surface from stored parts.
    pub fn from_parts(
        kernel: Kernel,
        scaling: AxisScaling<D>,
        centers: Vec<[f64; D]>,
        weights: Vec<f64>,
        constant: f64,
        linear: [f64; D],
    ) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::Shape(format!("{} centers but {} weights", centers.len(), weights.len())));
        }
        let scaled_centers = centers.iter().map(|c| scaling.apply(c)).collect();
        Ok(Self { kernel, scaling, centers, scaled_centers, weights, constant, linear })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn scaling(&self) -> &AxisScaling<D> {
        &self.scaling
    }

    pub fn centers(&self) -> &[[f64; D]] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Affine coefficients `(c₀, c)` in scaled coordinates.
    pub fn affine_scaled(&self) -> (f64, [f64; D]) {
        (self.constant, self.linear)
    }

    /// Affine coefficients `(c₀, c)` in the original coordinates.
    pub fn affine(&self) -> (f64, [f64; D]) {
        let mut c0 = self.constant;
        let mut c = [0.0; D];
        for d in 0..D {
            c[d] = self.linear[d] / self.scaling.width[d];
            c0 -= c[d] * self.scaling.lower[d];
        }
        (c0, c)
    }

    /// `[Σ βᵢ, Σ βᵢ xᵢ₁, …]`, in original coordinates.
    pub fn side_conditions(&self) -> Vec<f64> {
        let mut out = vec![self.weights.iter().sum()];
        for d in 0..D {
            out.push(self.weights.iter().zip(&self.centers).map(|(b, c)| b * c[d]).sum());
        }
        out
    }

    pub fn eval(&self, x: &[f64; D]) -> f64 {
        let xs = self.scaling.apply(x);
        if xs.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
            warn!("RBF evaluation at {x:?} lies outside the sampled region; extrapolating");
        }
        let mut s = self.constant;
        for d in 0..D {
            s += self.linear[d] * xs[d];
        }
        for (c, b) in self.scaled_centers.iter().zip(&self.weights) {
            s += b * self.kernel.eval(distance(&xs, c));
        }
        s
    }

    /// Largest `|s(xᵢ) − fᵢ|` over the nodes.
    pub fn max_residual(&self, nodes: &ScatteredNodes<D>) -> f64 {
        nodes.points.iter().zip(&nodes.values).map(|(p, f)| (self.eval(p) - f).abs()).fold(0.0, f64::max)
    }
}

#[inline]
fn distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for d in 0..D {
        let t = a[d] - b[d];
        s += t * t;
    }
    s.sqrt()
}

pub fn eval_rbf<const D: usize>(surface: &RbfSurface<D>, x: &[f64; D]) -> f64 {
    surface.eval(x)
}

pub fn fit_rbf<const D: usize>(nodes: &ScatteredNodes<D>) -> Result<RbfSurface<D>> {
    let mut out = fit_rbf_many(&nodes.points, &[&nodes.values])?;
    Ok(out.pop().expect("one right-hand side"))
}

/// Fits one surface per value set on a shared set of points, factoring the
/// saddle-point matrix once.
pub fn fit_rbf_many<const D: usize>(points: &[[f64; D]], values: &[&[f64]]) -> Result<Vec<RbfSurface<D>>> {
    validate_points(points)?;
    let n = points.len();
    for v in values {
        if v.len() != n {
            return Err(Error::Shape(format!("{n} points but {} values", v.len())));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0, value: v[i] });
        }
    }
    let kernel = Kernel::ThinPlate;
    let scaling = AxisScaling::fit(points);
    let scaled: Vec<[f64; D]> = points.iter().map(|p| scaling.apply(p)).collect();

    let poly = Mat::from_fn(n, D + 1, |i, j| if j == 0 { 1.0 } else { scaled[i][j - 1] });
    check_affine_rank(poly.as_ref())?;

    let size = n + D + 1;
    let mut system = Mat::<f64>::zeros(size, size);
    for j in 0..n {
        for i in 0..j {
            let k = kernel.eval(distance(&scaled[i], &scaled[j]));
            system[(i, j)] = k;
            system[(j, i)] = k;
        }
        for q in 0..=D {
            system[(j, n + q)] = poly[(j, q)];
            system[(n + q, j)] = poly[(j, q)];
        }
    }

    let rhs = Mat::from_fn(size, values.len(), |i, c| if i < n { values[c][i] } else { 0.0 });
    let lu = system.partial_piv_lu();
    let mut sol = lu.solve(&rhs);
    for _ in 0..2 {
        let residual = &rhs - &system * &sol;
        sol += lu.solve(&residual);
    }

    (0..values.len())
        .map(|c| {
            let weights: Vec<f64> = (0..n).map(|i| sol[(i, c)]).collect();
            let mut linear = [0.0; D];
            for d in 0..D {
                linear[d] = sol[(n + 1 + d, c)];
            }
            Ok(RbfSurface {
                kernel,
                scaling,
                centers: points.to_vec(),
                scaled_centers: scaled.clone(),
                weights,
                constant: sol[(n, c)],
                linear,
            })
        })
        .collect()
}

fn check_affine_rank(poly: faer::MatRef<'_, f64>) -> Result<()> {
    let required = poly.ncols();
    let qr = poly.col_piv_qr();
    let r = qr.R();
    let pivots: Vec<f64> = (0..required).map(|i| r[(i, i)].abs()).collect();
    let rank = crate::linalg::numerical_rank(&pivots, 1e-10);
    if rank < required {
        return Err(Error::CollinearNodes { rank, required });
    }
    Ok(())
}

/// How the modal coefficients `b_jᵗ` are interpolated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RbfLayout {
    /// One surface over (mode index, time) for the real parts and one for the
    /// imaginary parts.
    #[default]
    Joint,
    /// Independent time-only curves per mode.
    PerMode,
}

impl RbfLayout {
    pub fn tag(self) -> u8 {
        match self {
            RbfLayout::Joint => 2,
            RbfLayout::PerMode => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            2 => Some(RbfLayout::Joint),
            1 => Some(RbfLayout::PerMode),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NiromSurfaces {
    Joint { re: RbfSurface<2>, im: RbfSurface<2> },
    PerMode { re: Vec<RbfSurface<1>>, im: Vec<RbfSurface<1>> },
}

/// Interpolated modal coefficients for a DMD model.
#[derive(Clone, Debug, PartialEq)]
pub struct NiromInterpolant {
    surfaces: NiromSurfaces,
    rank: usize,
    window: (f64, f64),
}

/// Nodes `(j, t_i)` for `j = 1 … k` (mode index) and every training instant,
/// with the real and imaginary parts of `b_jᵗ = a_j λ_jᵗ`.
pub fn coefficient_nodes(model: &DmdModel) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
    let n_times = model.snapshot_count();
    let van = vandermonde(model.ritz(), n_times);
    let k = model.rank();
    let mut points = Vec::with_capacity(k * n_times);
    let mut re = Vec::with_capacity(k * n_times);
    let mut im = Vec::with_capacity(k * n_times);
    for j in 0..k {
        let a = model.amplitudes()[j];
        for t in 0..n_times {
            let b = a * van[(j, t)];
            points.push([(j + 1) as f64, t as f64 * model.dt()]);
            re.push(b.re);
            im.push(b.im);
        }
    }
    (points, re, im)
}

impl NiromInterpolant {
    pub fn fit(model: &DmdModel, layout: RbfLayout) -> Result<Self> {
        let (points, re, im) = coefficient_nodes(model);
        let surfaces = match layout {
            RbfLayout::Joint => {
                let mut fitted = fit_rbf_many(&points, &[&re, &im])?;
                let im = fitted.pop().expect("two surfaces");
                let re = fitted.pop().expect("two surfaces");
                NiromSurfaces::Joint { re, im }
            }
            RbfLayout::PerMode => {
                let n_times = model.snapshot_count();
                let times: Vec<[f64; 1]> = points[..n_times].iter().map(|p| [p[1]]).collect();
                let curves = (0..model.rank())
                    .into_par_iter()
                    .map(|j| {
                        let span = j * n_times..(j + 1) * n_times;
                        let mut fitted = fit_rbf_many(&times, &[&re[span.clone()], &im[span]])?;
                        let im = fitted.pop().expect("two curves");
                        Ok((fitted.pop().expect("two curves"), im))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (re_curves, im_curves) = curves.into_iter().unzip();
                NiromSurfaces::PerMode { re: re_curves, im: im_curves }
            }
        };
        Ok(Self { surfaces, rank: model.rank(), window: model.time_window() })
    }

    pub fn from_parts(surfaces: NiromSurfaces, rank: usize, window: (f64, f64)) -> Result<Self> {
        if let NiromSurfaces::PerMode { re, im } = &surfaces {
            if re.len() != rank || im.len() != rank {
                return Err(Error::Shape(format!("expected {rank} curves per part, got {} and {}", re.len(), im.len())));
            }
        }
        Ok(Self { surfaces, rank, window })
    }

    pub fn layout(&self) -> RbfLayout {
        match self.surfaces {
            NiromSurfaces::Joint { .. } => RbfLayout::Joint,
            NiromSurfaces::PerMode { .. } => RbfLayout::PerMode,
        }
    }

    pub fn surfaces(&self) -> &NiromSurfaces {
        &self.surfaces
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Validates `t` against the training window, snapping values within
    /// round-off of an endpoint onto it.
    pub fn check_time(&self, t: f64) -> Result<f64> {
        let (start, end) = self.window;
        let tol = 1e-9 * (end - start).abs().max(f64::MIN_POSITIVE);
        if !t.is_finite() || t < start - tol || t > end + tol {
            return Err(Error::OutOfWindow { t, start, end });
        }
        Ok(t.clamp(start, end))
    }

    /// Interpolated coefficients `b_j(t)`.
    pub fn coefficients(&self, t: f64) -> Result<Vec<faer::c64>> {
        let t = self.check_time(t)?;
        Ok(match &self.surfaces {
            NiromSurfaces::Joint { re, im } => (0..self.rank)
                .map(|j| {
                    let x = [(j + 1) as f64, t];
                    faer::c64::new(re.eval(&x), im.eval(&x))
                })
                .collect(),
            NiromSurfaces::PerMode { re, im } => {
                re.iter().zip(im).map(|(r, i)| faer::c64::new(r.eval(&[t]), i.eval(&[t]))).collect()
            }
        })
    }
}

/// Field estimate `Σ_j b_j(t) φ_j` at any time inside the training window.
pub fn nirom_predict(model: &DmdModel, interp: &NiromInterpolant, t: f64) -> Result<Vec<f64>> {
    if interp.rank() != model.rank() {
        return Err(Error::Shape(format!(
            "interpolant has {} modes but the model has {}",
            interp.rank(),
            model.rank()
        )));
    }
    let b = interp.coefficients(t)?;
    Ok(model.combine(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn generic_points() -> Vec<[f64; 2]> {
        vec![[0.0, 0.0], [1.0, 0.1], [0.2, 0.9], [0.8, 0.7], [0.45, 0.3], [0.1, 0.55]]
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(thinplate_kernel(0.0).unwrap(), 0.0);
        assert_relative_eq!(thinplate_kernel(E - 1.0).unwrap(), (E - 1.0).powi(2), epsilon = 1e-15);
        assert_relative_eq!(thinplate_kernel(1.0).unwrap(), 2f64.ln(), epsilon = 1e-16);
        assert!(thinplate_kernel(-0.1).is_err());
    }

    #[test]
    fn kernel_is_monotone() {
        let mut prev = 0.0;
        for i in 1..1000 {
            let k = thinplate_kernel(i as f64 * 0.01).unwrap();
            assert!(k > prev);
            prev = k;
        }
    }

    #[test]
    fn affine_data_is_reproduced() {
        let pts = generic_points();
        let vals = pts.iter().map(|p| 3.0 + 2.0 * p[0] - p[1]).collect();
        let s = fit_rbf(&ScatteredNodes::new(pts, vals).unwrap()).unwrap();
        assert!(s.weights().iter().all(|b| b.abs() < 1e-8));
        let (c0, c) = s.affine();
        assert_relative_eq!(c0, 3.0, epsilon = 1e-8);
        assert_relative_eq!(c[0], 2.0, epsilon = 1e-8);
        assert_relative_eq!(c[1], -1.0, epsilon = 1e-8);
        assert_relative_eq!(s.eval(&[0.5, 0.5]), 3.5, epsilon = 1e-8);
    }

    #[test]
    fn bump_is_interpolated() {
        let pts = generic_points();
        let mut vals = vec![0.0; 6];
        vals[4] = 1.0;
        let nodes = ScatteredNodes::new(pts, vals).unwrap();
        let s = fit_rbf(&nodes).unwrap();
        assert!(s.max_residual(&nodes) < 1e-8);
        let l1: f64 = s.weights().iter().map(|b| b.abs()).sum();
        for c in s.side_conditions() {
            assert!(c.abs() <= 1e-8 * l1);
        }
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let mut pts = generic_points();
        pts[3] = pts[1];
        let err = ScatteredNodes::new(pts, vec![0.0; 6]).unwrap_err();
        assert!(matches!(err, Error::DuplicateNode { first: 1, second: 3 }));
    }

    #[test]
    fn collinear_nodes_rejected() {
        let pts: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 2.0 * i as f64 + 1.0]).collect();
        let nodes = ScatteredNodes::new(pts, vec![1.0, 0.0, 2.0, 1.0, 0.5]).unwrap();
        assert!(matches!(fit_rbf(&nodes), Err(Error::CollinearNodes { rank: 2, required: 3 })));
    }

    #[test]
    fn one_dimensional_curve() {
        let pts: Vec<[f64; 1]> = (0..8).map(|i| [i as f64 * 0.3]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (p[0]).sin()).collect();
        let nodes = ScatteredNodes::new(pts, vals).unwrap();
        let s = fit_rbf(&nodes).unwrap();
        assert!(s.max_residual(&nodes) < 1e-10);
    }

    #[test]
    fn layout_tags_round_trip() {
        for l in [RbfLayout::Joint, RbfLayout::PerMode] {
            assert_eq!(RbfLayout::from_tag(l.tag()), Some(l));
        }
        assert_eq!(Kernel::from_tag(Kernel::ThinPlate.tag()), Some(Kernel::ThinPlate));
    }
}
