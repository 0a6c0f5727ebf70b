//! Shallow-water snapshot generator on a β-plane channel.
//!
//! Solves
//!
//! ```text
//! u_t + u u_x + v u_y + φ_x − f v = 0
//! v_t + u v_x + v v_y + φ_y + f u = 0
//! φ_t + (φ u)_x + (φ v)_y = 0,          φ = g h
//! ```
//!
//! on `[0, Lmax] × [0, Dmax]`, periodic in `x` with solid walls (`v = 0`) at
//! `y = 0` and `y = Dmax`. Space is discretized with centered second-order
//! differences on a collocated grid (one-sided second-order at the walls) and
//! time with classical RK4.
//!
//! Grid points are `x_i = i Lmax / nx` (the periodic image of `x = Lmax` is
//! `i = 0`) and `y_j = j Dmax / (ny − 1)`, so both wall rows are included.
//! Fields are flattened row-major, `index = j * nx + i`.

use faer::Mat;

use crate::error::{Error, Result};
use crate::snapshots::SnapshotMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SweConfig {
    pub l_max: f64,
    pub d_max: f64,
    pub nx: usize,
    pub ny: usize,
    /// Interval between stored snapshots, in seconds.
    pub dt: f64,
    pub n_snapshots: usize,
    pub f0: f64,
    pub beta: f64,
    pub g: f64,
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
    /// Internal RK4 step. `None` picks `cfl_safety` times the stable step.
    pub step_dt: Option<f64>,
    pub cfl_safety: f64,
}

impl Default for SweConfig {
    fn default() -> Self {
        Self {
            l_max: 6.0e6,
            d_max: 4.4e6,
            nx: 32,
            ny: 24,
            dt: 600.0,
            n_snapshots: 120,
            f0: 1.0e-4,
            beta: 1.5e-11,
            g: 10.0,
            h0: 2.0e3,
            h1: 220.0,
            h2: 133.0,
            step_dt: None,
            cfl_safety: 0.5,
        }
    }
}

impl SweConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_max", self.l_max),
            ("d_max", self.d_max),
            ("dt", self.dt),
            ("g", self.g),
            ("h0", self.h0),
            ("cfl_safety", self.cfl_safety),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        for (name, value) in [("f0", self.f0), ("beta", self.beta), ("h1", self.h1), ("h2", self.h2)] {
            if !value.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {value}")));
            }
        }
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Config(format!("grid must be at least 3x3, got {}x{}", self.nx, self.ny)));
        }
        if self.n_snapshots < 1 {
            return Err(Error::Config("at least one snapshot is required".into()));
        }
        if let Some(step) = self.step_dt {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::Config(format!("step_dt must be positive, got {step}")));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.l_max / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.d_max / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy()
    }

    pub fn points(&self) -> usize {
        self.nx * self.ny
    }
}

/// `f(y) = f₀ + (β/2)(2y − Dmax)` at each grid row.
pub fn coriolis_profile(cfg: &SweConfig) -> Vec<f64> {
    (0..cfg.ny).map(|j| cfg.f0 + 0.5 * cfg.beta * (2.0 * cfg.y(j) - cfg.d_max)).collect()
}

/// Height and velocities on the grid, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTriple {
    pub nx: usize,
    pub ny: usize,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldTriple {
    pub fn uniform(nx: usize, ny: usize, h: f64, u: f64, v: f64) -> Self {
        let n = nx * ny;
        Self { nx, ny, h: vec![h; n], u: vec![u; n], v: vec![v; n] }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Largest `|v|` on the two wall rows.
    pub fn max_wall_v(&self) -> f64 {
        let top = (self.ny - 1) * self.nx;
        self.v[..self.nx].iter().chain(&self.v[top..]).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.u).chain(&self.v).all(|x| x.is_finite())
    }
}

/// Grammeltvedt height field with geostrophic velocities. The wall rows of
/// `v` are set to zero, as the closed form is only approximately zero there.
pub fn grammeltvedt_initial(cfg: &SweConfig) -> Result<FieldTriple> {
    cfg.validate()?;
    let f = coriolis_profile(cfg);
    if let Some(j) = f.iter().position(|&fj| fj == 0.0) {
        return Err(Error::Config(format!("Coriolis parameter vanishes on grid row {j}")));
    }
    let (l, d) = (cfg.l_max, cfg.d_max);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = FieldTriple::uniform(cfg.nx, cfg.ny, 0.0, 0.0, 0.0);
    for j in 0..cfg.ny {
        let y = cfg.y(j);
        let fj = f[j];
        let a = 9.0 * (d / 2.0 - y) / (2.0 * d);
        let b = 9.0 * (d / 2.0 - y) / d;
        let sech2 = 1.0 / b.cosh().powi(2);
        for i in 0..cfg.nx {
            let x = cfg.x(i);
            let (s, c) = (two_pi * x / l).sin_cos();
            let k = out.index(i, j);
            out.h[k] = cfg.h0 + cfg.h1 * a.tanh() + cfg.h2 * s * sech2;
            out.u[k] = -cfg.g / fj * 9.0 * cfg.h1 / (2.0 * d) * (a.tanh().powi(2) - 1.0)
                - 18.0 * cfg.g / fj * cfg.h2 * b.sinh() * s / (d * b.cosh().powi(3));
            out.v[k] = if j == 0 || j == cfg.ny - 1 {
                0.0
            } else {
                two_pi * cfg.h2 * cfg.g / (fj * l) * c * sech2
            };
        }
    }
    Ok(out)
}

/// Largest stable RK4 step for a state: `min(dx, dy) / (sqrt(g h_max) + |u|_max)`.
pub fn stable_step(cfg: &SweConfig, state: &FieldTriple) -> f64 {
    let h_max = state.h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let speed = state.u.iter().chain(&state.v).fold(0.0f64, |m, x| m.max(x.abs()));
    cfg.dx().min(cfg.dy()) / ((cfg.g * h_max).sqrt() + speed)
}

/// `∬ h dx dy`: periodic rectangle rule in `x`, trapezoid rule in `y`.
pub fn mass(cfg: &SweConfig, h: &[f64]) -> f64 {
    let (nx, ny) = (cfg.nx, cfg.ny);
    let mut total = 0.0;
    for j in 0..ny {
        let w = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
        total += w * h[j * nx..(j + 1) * nx].iter().sum::<f64>();
    }
    total * cfg.dx() * cfg.dy()
}

#[derive(Clone, Debug)]
pub struct SweRun {
    pub h: SnapshotMatrix,
    pub u: SnapshotMatrix,
    pub v: SnapshotMatrix,
    pub initial: FieldTriple,
    pub step_dt: f64,
    pub substeps: usize,
    /// `max_t |M(t) − M(0)| / M(0)` over the stored snapshots.
    pub mass_drift: f64,
}

pub fn simulate(cfg: &SweConfig) -> Result<SweRun> {
    let initial = grammeltvedt_initial(cfg)?;
    simulate_from(cfg, initial)
}

pub fn simulate_from(cfg: &SweConfig, initial: FieldTriple) -> Result<SweRun> {
    cfg.validate()?;
    if initial.nx != cfg.nx || initial.ny != cfg.ny {
        return Err(Error::Shape(format!(
            "initial state is {}x{} but the grid is {}x{}",
            initial.nx, initial.ny, cfg.nx, cfg.ny
        )));
    }
    let n = cfg.points();
    if initial.h.len() != n || initial.u.len() != n || initial.v.len() != n {
        return Err(Error::Shape("initial field lengths do not match the grid".into()));
    }
    if !initial.is_finite() {
        return Err(Error::Config("initial state contains non-finite values".into()));
    }

    let stable = stable_step(cfg, &initial);
    let step = match cfg.step_dt {
        Some(s) if s > stable => return Err(Error::Cfl { requested: s, stable }),
        Some(s) => s,
        None => cfg.cfl_safety * stable,
    };
    let substeps = (cfg.dt / step).ceil().max(1.0) as usize;
    let step = cfg.dt / substeps as f64;
    log::debug!("shallow water: step {step:.3} s, {substeps} substeps per snapshot, stable {stable:.3} s");

    let solver = Solver::new(cfg);
    let mut state = State {
        u: initial.u.clone(),
        v: initial.v.clone(),
        phi: initial.h.iter().map(|h| cfg.g * h).collect(),
    };
    let mut h = Mat::zeros(n, cfg.n_snapshots);
    let mut u = Mat::zeros(n, cfg.n_snapshots);
    let mut v = Mat::zeros(n, cfg.n_snapshots);
    let m0 = mass(cfg, &initial.h);
    let mut drift = 0.0f64;
    let mut scratch = Scratch::new(n);

    for t in 0..cfg.n_snapshots {
        if t > 0 {
            for _ in 0..substeps {
                solver.rk4(&mut state, step, &mut scratch);
            }
            if !state.is_finite() {
                return Err(Error::BlowUp { last_valid: t - 1 });
            }
        }
        let hs: Vec<f64> = state.phi.iter().map(|p| p / cfg.g).collect();
        drift = drift.max(((mass(cfg, &hs) - m0) / m0).abs());
        for k in 0..n {
            h[(k, t)] = hs[k];
            u[(k, t)] = state.u[k];
            v[(k, t)] = state.v[k];
        }
    }

    Ok(SweRun {
        h: SnapshotMatrix::new(h, cfg.dt, cfg.nx, cfg.ny, "h")?,
        u: SnapshotMatrix::new(u, cfg.dt, cfg.nx, cfg.ny, "u")?,
        v: SnapshotMatrix::new(v, cfg.dt, cfg.nx, cfg.ny, "v")?,
        initial,
        step_dt: step,
        substeps,
        mass_drift: drift,
    })
}

#[derive(Clone)]
struct State {
    u: Vec<f64>,
    v: Vec<f64>,
    phi: Vec<f64>,
}

impl State {
    fn zeros(n: usize) -> Self {
        Self { u: vec![0.0; n], v: vec![0.0; n], phi: vec![0.0; n] }
    }

    fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.phi).all(|x| x.is_finite())
    }

    /// `self = base + c * d`
    fn axpy_from(&mut self, base: &State, c: f64, d: &State) {
        for (o, (b, x)) in self.u.iter_mut().zip(base.u.iter().zip(&d.u)) {
            *o = b + c * x;
        }
        for (o, (b, x)) in self.v.iter_mut().zip(base.v.iter().zip(&d.v)) {
            *o = b + c * x;
        }
        for (o, (b, x)) in self.phi.iter_mut().zip(base.phi.iter().zip(&d.phi)) {
            *o = b + c * x;
        }
    }
}

struct Scratch {
    k: [State; 4],
    stage: State,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            k: [State::zeros(n), State::zeros(n), State::zeros(n), State::zeros(n)],
            stage: State::zeros(n),
            fx: vec![0.0; n],
            fy: vec![0.0; n],
        }
    }
}

struct Solver {
    nx: usize,
    ny: usize,
    inv_2dx: f64,
    inv_2dy: f64,
    f: Vec<f64>,
}

impl Solver {
    fn new(cfg: &SweConfig) -> Self {
        Self {
            nx: cfg.nx,
            ny: cfg.ny,
            inv_2dx: 0.5 / cfg.dx(),
            inv_2dy: 0.5 / cfg.dy(),
            f: coriolis_profile(cfg),
        }
    }

    #[inline]
    fn ddx(&self, a: &[f64], i: usize, j: usize) -> f64 {
        let row = j * self.nx;
        let ip = if i + 1 == self.nx { 0 } else { i + 1 };
        let im = if i == 0 { self.nx - 1 } else { i - 1 };
        (a[row + ip] - a[row + im]) * self.inv_2dx
    }

    #[inline]
    fn ddy(&self, a: &[f64], i: usize, j: usize) -> f64 {
        let nx = self.nx;
        let at = |jj: usize| a[jj * nx + i];
        if j == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) * self.inv_2dy
        } else if j == self.ny - 1 {
            (3.0 * at(j) - 4.0 * at(j - 1) + at(j - 2)) * self.inv_2dy
        } else {
            (at(j + 1) - at(j - 1)) * self.inv_2dy
        }
    }

    fn rhs(&self, s: &State, out: &mut State, fx: &mut [f64], fy: &mut [f64]) {
        for k in 0..s.phi.len() {
            fx[k] = s.phi[k] * s.u[k];
            fy[k] = s.phi[k] * s.v[k];
        }
        for j in 0..self.ny {
            let wall = j == 0 || j == self.ny - 1;
            for i in 0..self.nx {
                let k = j * self.nx + i;
                let (u, v) = (s.u[k], s.v[k]);
                out.u[k] = -u * self.ddx(&s.u, i, j) - v * self.ddy(&s.u, i, j) - self.ddx(&s.phi, i, j)
                    + self.f[j] * v;
                out.v[k] = if wall {
                    0.0
                } else {
                    -u * self.ddx(&s.v, i, j) - v * self.ddy(&s.v, i, j) - self.ddy(&s.phi, i, j) - self.f[j] * u
                };
                out.phi[k] = -self.ddx(fx, i, j) - self.ddy(fy, i, j);
            }
        }
    }

    fn rk4(&self, s: &mut State, dt: f64, w: &mut Scratch) {
        let Scratch { k, stage, fx, fy } = w;
        let [k1, k2, k3, k4] = k;
        self.rhs(s, k1, fx, fy);
        stage.axpy_from(s, 0.5 * dt, k1);
        self.rhs(stage, k2, fx, fy);
        stage.axpy_from(s, 0.5 * dt, k2);
        self.rhs(stage, k3, fx, fy);
        stage.axpy_from(s, dt, k3);
        self.rhs(stage, k4, fx, fy);
        let c = dt / 6.0;
        for idx in 0..s.u.len() {
            s.u[idx] += c * (k1.u[idx] + 2.0 * k2.u[idx] + 2.0 * k3.u[idx] + k4.u[idx]);
            s.v[idx] += c * (k1.v[idx] + 2.0 * k2.v[idx] + 2.0 * k3.v[idx] + k4.v[idx]);
            s.phi[idx] += c * (k1.phi[idx] + 2.0 * k2.phi[idx] + 2.0 * k3.phi[idx] + k4.phi[idx]);
        }
    }
}

/// Scalar reference quantities for the nondimensional form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scales {
    pub l_ref: f64,
    pub h_ref: f64,
    pub u_ref: f64,
    pub t_ref: f64,
}

impl Scales {
    /// `L_ref = Lmax`, `h_ref = H₀`, `u_ref = max |u₀|`, `t_ref = L_ref / u_ref`.
    pub fn from_initial(cfg: &SweConfig, initial: &FieldTriple) -> Result<Self> {
        let u_ref = initial.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self::new(cfg.l_max, cfg.h0, u_ref)
    }

    pub fn new(l_ref: f64, h_ref: f64, u_ref: f64) -> Result<Self> {
        for (name, value) in [("l_ref", l_ref), ("h_ref", h_ref), ("u_ref", u_ref)] {
            if !(value.is_finite() && value != 0.0) {
                return Err(Error::Config(format!("reference value {name} must be finite and nonzero, got {value}")));
            }
        }
        Ok(Self { l_ref, h_ref, u_ref, t_ref: l_ref / u_ref })
    }
}

/// Dimensionless copies of the three fields.
#[derive(Clone, Debug)]
pub struct ScaledFields {
    pub h: SnapshotMatrix,
    pub u: SnapshotMatrix,
    pub v: SnapshotMatrix,
    pub scales: Scales,
}

pub fn nondimensionalize(run: &SweRun, scales: Scales) -> Result<ScaledFields> {
    Ok(ScaledFields {
        h: run.h.divided(scales.h_ref, scales.t_ref)?,
        u: run.u.divided(scales.u_ref, scales.t_ref)?,
        v: run.v.divided(scales.u_ref, scales.t_ref)?,
        scales,
    })
}

/// Inverse of [`nondimensionalize`] for one field: `h` uses `h_ref`, anything
/// else `u_ref`.
pub fn redimensionalize(field: &SnapshotMatrix, scales: Scales) -> Result<SnapshotMatrix> {
    let value = if field.field() == "h" { scales.h_ref } else { scales.u_ref };
    field.multiplied(value, scales.t_ref)
}
