//! Binary containers for snapshots and models, and CSV exports.
//!
//! All binary values are little-endian regardless of host. Integers are `u64`
//! unless noted, floats are IEEE-754 `f64`, complex numbers are stored as
//! `(re, im)` pairs and matrices row-major.
//!
//! Snapshot container:
//!
//! ```text
//! "NIROM1" 'L' rows cols dt nx ny name_len:u16 name:utf8  payload[rows*cols]
//! ```
//!
//! Model container:
//!
//! ```text
//! "NIROMDMD1" 'L' k m dt snapshot_count nx ny name_len:u16 name:utf8
//! modes[m*k] ritz[k] amplitudes[k] has_rbf:u8 [rbf block]
//!
//! rbf block:  layout:u8 surfaces  { dim:u8 n kernel:u8 lower[dim] width[dim]
//!                                   centers[n*dim] weights[n] c0 c[dim] }*
//! ```
//!
//! The joint layout stores two surfaces (real, imaginary); the per-mode
//! layout stores `2k` curves, real and imaginary interleaved per mode.
//!
//! Writes go to a temporary file in the target directory that is renamed into
//! place, so readers never see a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use faer::{c64, Mat};

use crate::dmd::{DmdModel, RitzPoint};
use crate::error::{Error, Result};
use crate::rank::RankSweepRecord;
use crate::rbf::{AxisScaling, Kernel, NiromInterpolant, NiromSurfaces, RbfLayout, RbfSurface};
use crate::snapshots::SnapshotMatrix;

pub const SNAPSHOT_MAGIC: &[u8; 6] = b"NIROM1";
pub const MODEL_MAGIC: &[u8; 9] = b"NIROMDMD1";
const LITTLE_ENDIAN: u8 = b'L';

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format { offset, reason: reason.into() }
}

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u16(&mut self, x: u16) {
        self.bytes(&x.to_le_bytes());
    }
    fn u64(&mut self, x: usize) {
        self.bytes(&(x as u64).to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.bytes(&x.to_le_bytes());
    }
    fn c64(&mut self, z: c64) {
        self.f64(z.re);
        self.f64(z.im);
    }
    fn name(&mut self, name: &str) -> Result<()> {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Config(format!("field name is {} bytes; at most 65535 allowed", name.len())))?;
        self.u16(len);
        self.bytes(name.as_bytes());
        Ok(())
    }
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            format_err(
                self.buf.len(),
                format!("truncated while reading {what}: need {n} bytes at offset {}", self.pos),
            )
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, magic: &[u8]) -> Result<()> {
        let got = self.take(magic.len(), "magic")?;
        if got != magic {
            return Err(format_err(0, format!("bad magic {:?}", String::from_utf8_lossy(got))));
        }
        let at = self.pos;
        let tag = self.u8("endianness tag")?;
        if tag != LITTLE_ENDIAN {
            return Err(format_err(at, format!("unsupported endianness tag {tag:#04x}")));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    /// A strictly positive count that fits in memory.
    fn count(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = self.u64(what)?;
        if v == 0 {
            return Err(format_err(at, format!("{what} must be positive")));
        }
        usize::try_from(v).map_err(|_| format_err(at, format!("{what} = {v} is too large")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn positive_f64(&mut self, what: &str) -> Result<f64> {
        let at = self.pos;
        let v = self.f64(what)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(format_err(at, format!("{what} must be positive and finite, got {v}")));
        }
        Ok(v)
    }

    fn c64(&mut self, what: &str) -> Result<c64> {
        Ok(c64::new(self.f64(what)?, self.f64(what)?))
    }

    fn name(&mut self) -> Result<String> {
        let len = self.u16("name length")? as usize;
        let at = self.pos;
        let bytes = self.take(len, "field name")?;
        String::from_utf8(bytes.to_vec()).map_err(|_| format_err(at, "field name is not valid UTF-8"))
    }

    /// Ensures `n` items of `size` bytes remain before allocating for them.
    fn expect_len(&self, n: usize, size: usize, what: &str) -> Result<()> {
        let need = n.checked_mul(size).ok_or_else(|| format_err(self.pos, format!("{what} size overflows")))?;
        let have = self.buf.len() - self.pos;
        if have < need {
            return Err(format_err(
                self.buf.len(),
                format!("length mismatch in {what}: expected {need} bytes from offset {}, found {have}", self.pos),
            ));
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(format_err(
                self.pos,
                format!("length mismatch: {} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn encode_snapshots(s: &SnapshotMatrix) -> Result<Vec<u8>> {
    let mut e = Encoder::default();
    e.bytes(SNAPSHOT_MAGIC);
    e.u8(LITTLE_ENDIAN);
    e.u64(s.rows());
    e.u64(s.cols());
    e.f64(s.dt());
    e.u64(s.nx());
    e.u64(s.ny());
    e.name(s.field())?;
    e.buf.reserve(8 * s.rows() * s.cols());
    let data = s.data();
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            e.f64(data[(i, j)]);
        }
    }
    Ok(e.buf)
}

pub fn decode_snapshots(buf: &[u8]) -> Result<SnapshotMatrix> {
    let mut d = Decoder::new(buf);
    d.magic(SNAPSHOT_MAGIC)?;
    let rows = d.count("rows")?;
    let cols = d.count("cols")?;
    let dt = d.positive_f64("dt")?;
    let grid_at = d.pos;
    let nx = d.count("nx")?;
    let ny = d.count("ny")?;
    if nx.checked_mul(ny) != Some(rows) {
        return Err(format_err(grid_at, format!("grid {nx}x{ny} does not match {rows} rows")));
    }
    let name = d.name()?;
    let n = rows.checked_mul(cols).ok_or_else(|| format_err(d.pos, "payload size overflows"))?;
    d.expect_len(n, 8, "payload")?;
    if buf.len() - d.pos != 8 * n {
        return Err(format_err(d.pos + 8 * n, format!("length mismatch: {} trailing bytes", buf.len() - d.pos - 8 * n)));
    }
    let payload_at = d.pos;
    let mut data = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v = d.f64("payload")?;
            if !v.is_finite() {
                return Err(format_err(payload_at + 8 * (i * cols + j), format!("non-finite value {v}")));
            }
            data[(i, j)] = v;
        }
    }
    d.finish()?;
    SnapshotMatrix::new(data, dt, nx, ny, name)
}

/// A fitted model together with its optional coefficient interpolant and
/// the grid it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub model: DmdModel,
    pub interpolant: Option<NiromInterpolant>,
    pub nx: usize,
    pub ny: usize,
    pub field: String,
}

fn encode_surface<const D: usize>(e: &mut Encoder, s: &RbfSurface<D>) {
    e.u8(D as u8);
    e.u64(s.centers().len());
    e.u8(s.kernel().tag());
    for x in s.scaling().lower.iter().chain(&s.scaling().width) {
        e.f64(*x);
    }
    for c in s.centers() {
        for x in c {
            e.f64(*x);
        }
    }
    for w in s.weights() {
        e.f64(*w);
    }
    let (c0, c) = s.affine_scaled();
    e.f64(c0);
    for x in c {
        e.f64(x);
    }
}

fn decode_surface<const D: usize>(d: &mut Decoder<'_>) -> Result<RbfSurface<D>> {
    let at = d.pos;
    let dim = d.u8("surface dimension")? as usize;
    if dim != D {
        return Err(format_err(at, format!("surface dimension {dim} does not match layout (expected {D})")));
    }
    let n = d.count("surface node count")?;
    let at = d.pos;
    let kernel = Kernel::from_tag(d.u8("kernel tag")?).ok_or_else(|| format_err(at, "unknown kernel tag"))?;
    d.expect_len(n, 8 * (D + 1), "surface nodes")?;
    let mut lower = [0.0; D];
    let mut width = [0.0; D];
    for x in lower.iter_mut() {
        *x = d.f64("axis lower bound")?;
    }
    for x in width.iter_mut() {
        let at = d.pos;
        *x = d.positive_f64("axis width").map_err(|_| format_err(at, "axis width must be positive"))?;
    }
    let mut centers = vec![[0.0; D]; n];
    for c in centers.iter_mut() {
        for x in c.iter_mut() {
            *x = d.f64("center")?;
        }
    }
    let weights = (0..n).map(|_| d.f64("weight")).collect::<Result<Vec<_>>>()?;
    let c0 = d.f64("constant term")?;
    let mut c = [0.0; D];
    for x in c.iter_mut() {
        *x = d.f64("linear term")?;
    }
    RbfSurface::from_parts(kernel, AxisScaling { lower, width }, centers, weights, c0, c)
}

pub fn encode_model(file: &ModelFile) -> Result<Vec<u8>> {
    let model = &file.model;
    let (m, k) = (model.state_dim(), model.rank());
    let mut e = Encoder::default();
    e.bytes(MODEL_MAGIC);
    e.u8(LITTLE_ENDIAN);
    e.u64(k);
    e.u64(m);
    e.f64(model.dt());
    e.u64(model.snapshot_count());
    e.u64(file.nx);
    e.u64(file.ny);
    e.name(&file.field)?;
    e.buf.reserve(16 * (m * k + 2 * k));
    let modes = model.modes();
    for i in 0..m {
        for j in 0..k {
            e.c64(modes[(i, j)]);
        }
    }
    for z in model.ritz().iter().chain(model.amplitudes()) {
        e.c64(*z);
    }
    match &file.interpolant {
        None => e.u8(0),
        Some(interp) => {
            if interp.rank() != k {
                return Err(Error::Shape(format!("interpolant has {} modes but the model has {k}", interp.rank())));
            }
            e.u8(1);
            e.u8(interp.layout().tag());
            match interp.surfaces() {
                NiromSurfaces::Joint { re, im } => {
                    e.u64(2);
                    encode_surface(&mut e, re);
                    encode_surface(&mut e, im);
                }
                NiromSurfaces::PerMode { re, im } => {
                    e.u64(2 * k);
                    for (r, i) in re.iter().zip(im) {
                        encode_surface(&mut e, r);
                        encode_surface(&mut e, i);
                    }
                }
            }
        }
    }
    Ok(e.buf)
}

pub fn decode_model(buf: &[u8]) -> Result<ModelFile> {
    let mut d = Decoder::new(buf);
    d.magic(MODEL_MAGIC)?;
    let k = d.count("rank k")?;
    let m = d.count("state dimension m")?;
    let dt = d.positive_f64("dt")?;
    let count = d.count("snapshot count")?;
    let grid_at = d.pos;
    let nx = d.count("nx")?;
    let ny = d.count("ny")?;
    if nx.checked_mul(ny) != Some(m) {
        return Err(format_err(grid_at, format!("grid {nx}x{ny} does not match state dimension {m}")));
    }
    let field = d.name()?;
    let n_complex = m.checked_mul(k).and_then(|x| x.checked_add(2 * k)).ok_or_else(|| format_err(d.pos, "size overflows"))?;
    d.expect_len(n_complex, 16, "complex arrays")?;
    let mut modes = Mat::zeros(m, k);
    for i in 0..m {
        for j in 0..k {
            modes[(i, j)] = d.c64("modes")?;
        }
    }
    let ritz = (0..k).map(|_| d.c64("eigenvalues")).collect::<Result<Vec<_>>>()?;
    let amplitudes = (0..k).map(|_| d.c64("amplitudes")).collect::<Result<Vec<_>>>()?;
    let model = DmdModel::from_stored(modes, ritz, amplitudes, dt, count)?;

    let at = d.pos;
    let interpolant = match d.u8("interpolant flag")? {
        0 => None,
        1 => {
            let at = d.pos;
            let layout = RbfLayout::from_tag(d.u8("layout tag")?).ok_or_else(|| format_err(at, "unknown layout tag"))?;
            let at = d.pos;
            let surfaces = d.u64("surface count")?;
            let surfaces = match layout {
                RbfLayout::Joint => {
                    if surfaces != 2 {
                        return Err(format_err(at, format!("joint layout needs 2 surfaces, found {surfaces}")));
                    }
                    let re = decode_surface::<2>(&mut d)?;
                    let im = decode_surface::<2>(&mut d)?;
                    NiromSurfaces::Joint { re, im }
                }
                RbfLayout::PerMode => {
                    if surfaces != 2 * k as u64 {
                        return Err(format_err(at, format!("per-mode layout needs {} curves, found {surfaces}", 2 * k)));
                    }
                    let mut re = Vec::with_capacity(k);
                    let mut im = Vec::with_capacity(k);
                    for _ in 0..k {
                        re.push(decode_surface::<1>(&mut d)?);
                        im.push(decode_surface::<1>(&mut d)?);
                    }
                    NiromSurfaces::PerMode { re, im }
                }
            };
            Some(NiromInterpolant::from_parts(surfaces, k, model.time_window())?)
        }
        other => return Err(format_err(at, format!("invalid interpolant flag {other}"))),
    };
    d.finish()?;
    Ok(ModelFile { model, interpolant, nx, ny, field })
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_snapshots(path: &Path, s: &SnapshotMatrix) -> Result<()> {
    write_atomic(path, &encode_snapshots(s)?)
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotMatrix> {
    decode_snapshots(&fs::read(path)?)
}

pub fn write_model(path: &Path, file: &ModelFile) -> Result<()> {
    write_atomic(path, &encode_model(file)?)
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    decode_model(&fs::read(path)?)
}

/// One CSV cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
}

impl Cell {
    /// Integers verbatim, reals with 17 significant digits.
    pub fn render(&self) -> String {
        match *self {
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format!("{x:.16e}"),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

/// A header plus rows, rendered in insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

pub fn spectrum_table(points: &[RitzPoint]) -> CsvTable {
    let mut t = CsvTable::new(["re_lambda", "im_lambda", "growth_rate", "frequency", "amplitude"]);
    for p in points {
        t.push(vec![
            p.lambda.re.into(),
            p.lambda.im.into(),
            p.growth_rate.into(),
            p.frequency.into(),
            p.amplitude_magnitude.into(),
        ]);
    }
    t
}

pub fn sweep_table(trace: &[RankSweepRecord]) -> CsvTable {
    let mut t = CsvTable::new(["k", "rel_error", "correlation", "wall_time_s"]);
    for r in trace {
        t.push(vec![r.k.into(), r.rel_error.into(), r.correlation.into(), r.wall_time.into()]);
    }
    t
}

/// Pointwise `|reference − estimate|` on a grid with spacings `dx`, `dy`;
/// row order follows the flattened index `j * nx + i`.
pub fn local_error_table(nx: usize, ny: usize, dx: f64, dy: f64, reference: &[f64], estimate: &[f64]) -> Result<CsvTable> {
    if reference.len() != nx * ny || estimate.len() != nx * ny {
        return Err(Error::Shape(format!(
            "grid {nx}x{ny} does not match field lengths {} and {}",
            reference.len(),
            estimate.len()
        )));
    }
    let mut t = CsvTable::new(["x", "y", "abs_error"]);
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            t.push(vec![(i as f64 * dx).into(), (j as f64 * dy).into(), (reference[k] - estimate[k]).abs().into()]);
        }
    }
    Ok(t)
}
