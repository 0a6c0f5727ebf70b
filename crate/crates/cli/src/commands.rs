use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::Mat;
use nirom::dmd::{reconstruct, spectrum};
use nirom::io::{self, Cell, CsvTable, ModelFile};
use nirom::rank::{correlation, evaluate_rank, rank_seed, relative_error, select_rank, RankSweepRecord};
use nirom::rbf::nirom_predict;
use nirom::rsvd::{full_svd_reference, gaussian_matrix, randomized_svd};
use nirom::swe::{self, Scales};
use nirom::{
    DmdModel, Error, NiromInterpolant, RankCriteria, RbfLayout, Result, SketchConfig, SnapshotMatrix, SvdMethod,
    SweConfig,
};

use crate::config::write_manifest;
use crate::{BenchOpts, DecomposeOpts, GenerateOpts, MetricsOpts, PredictOpts, DEFAULT_SEED};

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| Error::Config(format!("missing required option --{flag}")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn parse_layout(s: Option<&str>) -> Result<RbfLayout> {
    match s {
        None | Some("joint") => Ok(RbfLayout::Joint),
        Some("per-mode") => Ok(RbfLayout::PerMode),
        Some(other) => Err(Error::Config(format!("unknown RBF layout '{other}' (expected joint or per-mode)"))),
    }
}

fn layout_name(l: RbfLayout) -> &'static str {
    match l {
        RbfLayout::Joint => "joint",
        RbfLayout::PerMode => "per-mode",
    }
}

pub fn generate(mut opts: GenerateOpts) -> Result<()> {
    let out = required(&opts.out, "out")?.clone();
    let d = SweConfig::default();
    let cfg = SweConfig {
        l_max: opts.l_max.unwrap_or(d.l_max),
        d_max: opts.d_max.unwrap_or(d.d_max),
        nx: opts.nx.unwrap_or(d.nx),
        ny: opts.ny.unwrap_or(d.ny),
        dt: opts.dt.unwrap_or(d.dt),
        n_snapshots: opts.snapshots.unwrap_or(d.n_snapshots),
        f0: opts.f0.unwrap_or(d.f0),
        beta: opts.beta.unwrap_or(d.beta),
        g: opts.g.unwrap_or(d.g),
        h0: opts.h0.unwrap_or(d.h0),
        h1: opts.h1.unwrap_or(d.h1),
        h2: opts.h2.unwrap_or(d.h2),
        step_dt: opts.step_dt,
        cfl_safety: d.cfl_safety,
    };
    let dimensional = opts.dimensional.unwrap_or(false);
    let start = Instant::now();
    let run = swe::simulate(&cfg)?;
    println!(
        "grid {}x{}, {} snapshots every {} s; step {:.6} s ({} per snapshot); mass drift {:.3e}; {:.2} s",
        cfg.nx,
        cfg.ny,
        cfg.n_snapshots,
        cfg.dt,
        run.step_dt,
        run.substeps,
        run.mass_drift,
        start.elapsed().as_secs_f64()
    );
    let fields = if dimensional {
        [run.h.clone(), run.u.clone(), run.v.clone()]
    } else {
        let scales = Scales::from_initial(&cfg, &run.initial)?;
        println!(
            "nondimensional: L_ref = {:e} m, h_ref = {:e} m, u_ref = {:e} m/s, t_ref = {:e} s",
            scales.l_ref, scales.h_ref, scales.u_ref, scales.t_ref
        );
        let s = swe::nondimensionalize(&run, scales)?;
        [s.h, s.u, s.v]
    };
    create_dir(&out)?;
    for f in &fields {
        let path = out.join(format!("{}.snap", f.field()));
        io::write_snapshots(&path, f)?;
        println!("wrote {}", path.display());
    }

    opts = GenerateOpts {
        out: Some(out.clone()),
        nx: Some(cfg.nx),
        ny: Some(cfg.ny),
        snapshots: Some(cfg.n_snapshots),
        dt: Some(cfg.dt),
        step_dt: cfg.step_dt,
        l_max: Some(cfg.l_max),
        d_max: Some(cfg.d_max),
        f0: Some(cfg.f0),
        beta: Some(cfg.beta),
        g: Some(cfg.g),
        h0: Some(cfg.h0),
        h1: Some(cfg.h1),
        h2: Some(cfg.h2),
        dimensional: Some(dimensional),
    };
    write_manifest(&out.join("generate.manifest.toml"), "generate", &opts)
}

struct FieldResult {
    name: String,
    k: usize,
    rel_error: f64,
    correlation: f64,
    status: &'static str,
}

pub fn decompose(mut opts: DecomposeOpts) -> Result<()> {
    let out = required(&opts.out, "out")?.clone();
    let mut inputs = opts.inputs.clone();
    if let Some(dir) = opts.fields_dir.take() {
        inputs.extend(["h", "u", "v"].iter().map(|f| dir.join(format!("{f}.snap"))));
    }
    if inputs.is_empty() {
        return Err(Error::Config("no input: pass --input FILE or --fields-dir DIR".into()));
    }
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let layout = parse_layout(opts.rbf_layout.as_deref())?;
    let fit_rbf = opts.fit_rbf.unwrap_or(false);
    let power = opts.power_iterations.unwrap_or(0);
    println!("seed {seed}");
    create_dir(&out)?;

    let mut results = Vec::new();
    let mut criteria_used = None;
    for path in &inputs {
        let v = io::read_snapshots(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or(v.field()).to_string();
        let mut criteria = RankCriteria::for_snapshots(v.cols());
        criteria.max_rel_error = opts.max_rel_error.unwrap_or(criteria.max_rel_error);
        criteria.min_correlation = opts.min_correlation.unwrap_or(criteria.min_correlation);
        criteria.k_min = opts.k_min.unwrap_or(criteria.k_min);
        criteria.k_max = opts.k_max.unwrap_or(criteria.k_max);
        criteria.power_iterations = power;

        let (model, k, rel_error, corr, status, trace) = match opts.rank {
            Some(k) => {
                let start = Instant::now();
                let cfg = SketchConfig::new(k, rank_seed(seed, k)).with_power_iterations(power);
                let (model, e, c) = evaluate_rank(&v, SvdMethod::Randomized(cfg))?;
                let rec = RankSweepRecord { k, rel_error: e, correlation: c, wall_time: start.elapsed().as_secs_f64() };
                (model, k, e, c, "fixed", vec![rec])
            }
            None => {
                let sel = select_rank(&v, &criteria, seed)?;
                let status = if sel.converged { "converged" } else { "NOT-CONVERGED" };
                (sel.model, sel.k, sel.rel_error, sel.correlation, status, sel.trace)
            }
        };
        criteria_used = Some(criteria);

        let interpolant = if fit_rbf { Some(NiromInterpolant::fit(&model, layout)?) } else { None };
        let file = ModelFile { model, interpolant, nx: v.nx(), ny: v.ny(), field: v.field().to_string() };
        io::write_model(&out.join(format!("{name}.dmd")), &file)?;
        io::sweep_table(&trace).write(&out.join(format!("{name}_sweep.csv")))?;
        io::spectrum_table(&spectrum(&file.model)).write(&out.join(format!("{name}_spectrum.csv")))?;
        results.push(FieldResult { name, k, rel_error, correlation: corr, status });
    }

    println!("{:<8} {:>4} {:>14} {:>20}  status", "field", "k", "Er_DMD", "C_DMD");
    for r in &results {
        println!("{:<8} {:>4} {:>14.4e} {:>20.15}  {}", r.name, r.k, r.rel_error, r.correlation, r.status);
    }
    for r in results.iter().filter(|r| r.status == "NOT-CONVERGED") {
        println!(
            "NOT-CONVERGED: {} has no rank meeting the thresholds; kept k = {} with the lowest error",
            r.name, r.k
        );
    }

    let c = criteria_used.expect("at least one input");
    opts.inputs = inputs;
    opts.seed = Some(seed);
    opts.max_rel_error = Some(c.max_rel_error);
    opts.min_correlation = Some(c.min_correlation);
    opts.power_iterations = Some(power);
    opts.fit_rbf = Some(fit_rbf);
    opts.rbf_layout = Some(layout_name(layout).into());
    write_manifest(&out.join("decompose.manifest.toml"), "decompose", &opts)
}

fn uniform_spacing(times: &[f64]) -> Option<f64> {
    let step = times.get(1)? - times[0];
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12 * step.abs().max(1.0));
    (uniform && step > 0.0).then_some(step)
}

pub fn predict(mut opts: PredictOpts) -> Result<()> {
    let model_path = required(&opts.model, "model")?.clone();
    let out = required(&opts.out, "out")?.clone();
    let file = io::read_model(&model_path)?;
    let model = &file.model;
    let interp = match &file.interpolant {
        Some(i) => i.clone(),
        None => {
            let layout = parse_layout(opts.rbf_layout.as_deref())?;
            log::info!("model has no interpolant; fitting the {} layout", layout_name(layout));
            NiromInterpolant::fit(model, layout)?
        }
    };
    let at_nodes = opts.at_nodes.unwrap_or(false);
    let times: Vec<f64> = if at_nodes {
        (0..model.snapshot_count()).map(|t| t as f64 * model.dt()).collect()
    } else {
        opts.times.clone()
    };
    if times.is_empty() {
        return Err(Error::Config("no times given: pass --times T1,T2,... or --at-nodes".into()));
    }

    let mut columns = Vec::with_capacity(times.len());
    for &t in &times {
        columns.push(nirom_predict(model, &interp, t)?);
    }
    let m = model.state_dim();
    let data = Mat::from_fn(m, times.len(), |i, j| columns[j][i]);
    let dt = if at_nodes { model.dt() } else { uniform_spacing(&times).unwrap_or(model.dt()) };
    let pred = SnapshotMatrix::new(data, dt, file.nx, file.ny, file.field.clone())?;

    create_dir(&out)?;
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("field").to_string();
    io::write_snapshots(&out.join(format!("{stem}_pred.snap")), &pred)?;
    let mut times_csv = CsvTable::new(["index", "t"]);
    for (i, &t) in times.iter().enumerate() {
        times_csv.push(vec![i.into(), t.into()]);
    }
    times_csv.write(&out.join(format!("{stem}_pred_times.csv")))?;
    println!("predicted {} time(s) for field {}", times.len(), file.field);

    if let Some(ref_path) = &opts.reference {
        let reference = io::read_snapshots(ref_path)?;
        if reference.rows() != m {
            return Err(Error::Shape(format!("reference has {} rows, model has {m}", reference.rows())));
        }
        let (dx, dy) = (opts.dx.unwrap_or(1.0), opts.dy.unwrap_or(1.0));
        println!("{:>16} {:>8} {:>14}", "t", "column", "rel_error");
        for (j, &t) in times.iter().enumerate() {
            let idx = (t / reference.dt()).round();
            if (t / reference.dt() - idx).abs() > 1e-9 || idx < 0.0 || idx as usize >= reference.cols() {
                log::warn!("t = {t} is not a reference snapshot time; skipping comparison");
                continue;
            }
            let idx = idx as usize;
            let truth = reference.column(idx);
            let est = &columns[j];
            let norm = truth.iter().map(|x| x * x).sum::<f64>().sqrt();
            let err = truth.iter().zip(est).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / norm;
            println!("{t:>16.6e} {idx:>8} {err:>14.6e}");
            io::local_error_table(file.nx, file.ny, dx, dy, &truth, est)?
                .write(&out.join(format!("{stem}_local_error_{idx:04}.csv")))?;
        }
    }

    opts.at_nodes = Some(at_nodes);
    if opts.rbf_layout.is_none() {
        opts.rbf_layout = Some(layout_name(interp.layout()).into());
    }
    write_manifest(&out.join(format!("{stem}_predict.manifest.toml")), "predict", &opts)
}

pub fn metrics(opts: MetricsOpts) -> Result<()> {
    let a = io::read_snapshots(required(&opts.reference, "reference")?)?;
    let b = io::read_snapshots(required(&opts.estimate, "estimate")?)?;
    println!("Er = {:.6e}", relative_error(a.data(), b.data())?);
    println!("C  = {:.15}", correlation(a.data(), b.data())?);
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("size '{s}' must look like 5000x200"));
    let (m, n) = s.split_once('x').ok_or_else(bad)?;
    Ok((m.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
}

/// Linear dynamics of `r` damped rotations, embedded through a Gaussian map,
/// plus a small full-rank perturbation. `n + 1` columns so the shifted
/// matrices are `m × n`.
fn synthetic_snapshots(m: usize, n: usize, seed: u64) -> Result<SnapshotMatrix> {
    let pairs = n.min(60) / 2;
    let mut z = Mat::<f64>::zeros(2 * pairs, n + 1);
    for b in 0..pairs {
        let (radius, angle) = (1.0 - 0.002 * b as f64, 0.05 * (b + 1) as f64);
        let amp = 0.85f64.powi(b as i32);
        for t in 0..=n {
            let (r, th) = (amp * radius.powi(t as i32), angle * t as f64);
            z[(2 * b, t)] = r * th.cos();
            z[(2 * b + 1, t)] = r * th.sin();
        }
    }
    let embed = gaussian_matrix(m, 2 * pairs, seed);
    let noise = gaussian_matrix(m, n + 1, seed.wrapping_add(1));
    let data = &embed * &z + Mat::from_fn(m, n + 1, |i, j| 1e-8 * noise[(i, j)]);
    SnapshotMatrix::ungridded(data, 1.0, "synthetic")
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed().as_secs_f64());
        last = Some(v);
    }
    Ok((best, last.expect("at least one repeat")))
}

fn reconstruction_error(v: &SnapshotMatrix, model: &DmdModel) -> Result<f64> {
    relative_error(v.data(), reconstruct(model, v.cols()).data.as_ref())
}

pub fn bench(mut opts: BenchOpts) -> Result<()> {
    if opts.sizes.is_empty() {
        opts.sizes = vec!["5000x200".into()];
    }
    if opts.ranks.is_empty() {
        opts.ranks = vec![20];
    }
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let repeats = opts.repeats.unwrap_or(3);
    println!("seed {seed}");
    let mut table = CsvTable::new([
        "m",
        "n",
        "k",
        "t_ardmd_s",
        "t_fullsvd_s",
        "sigma_max_rel_diff",
        "ardmd_rel_error",
        "fullsvd_rel_error",
    ]);
    for size in &opts.sizes {
        let (m, n) = parse_size(size)?;
        let v = synthetic_snapshots(m, n, seed)?;
        let v0 = v.data().subcols(0, n);
        for &k in &opts.ranks {
            let sketch = SketchConfig::new(k, rank_seed(seed, k));
            let (t_r, fast) = best_of(repeats, || DmdModel::fit(&v, SvdMethod::Randomized(sketch)))?;
            let (t_f, full) = best_of(repeats, || DmdModel::fit(&v, SvdMethod::Exact { rank: k }))?;
            let rs = randomized_svd(v0, &sketch)?;
            let fs = full_svd_reference(v0, k)?;
            let sigma_diff = rs.sigma.iter().zip(&fs.sigma).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
            let row: Vec<Cell> = vec![
                m.into(),
                n.into(),
                k.into(),
                t_r.into(),
                t_f.into(),
                sigma_diff.into(),
                reconstruction_error(&v, &fast.model)?.into(),
                reconstruction_error(&v, &full.model)?.into(),
            ];
            println!(
                "m = {m:>6} n = {n:>4} k = {k:>3}: ARDMD {t_r:.4} s, full-SVD DMD {t_f:.4} s ({:.2}x)",
                t_f / t_r
            );
            table.push(row);
        }
    }
    opts.seed = Some(seed);
    opts.repeats = Some(repeats);
    match &opts.out {
        Some(path) => {
            table.write(path)?;
            let manifest: PathBuf = path.with_extension("manifest.toml");
            write_manifest(&manifest, "bench", &opts)
        }
        None => {
            print!("{}", String::from_utf8_lossy(&table.to_bytes()?));
            Ok(())
        }
    }
}
