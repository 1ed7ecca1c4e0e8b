//! ADT1 trajectory container, height-field files, CSV/JSON emitters and run
//! manifests.
//!
//! ADT1 layout (little-endian): a 40-byte header
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `ADT1`                            |
//! | 4..8   | version, `u32` = 1                      |
//! | 8..16  | `d`, `u64`                              |
//! | 16..24 | `n_steps`, `u64`                        |
//! | 24     | dtype: 0 = `f32`, 1 = `f64`             |
//! | 25     | channels: bit 0 loss, bit 1 gradient    |
//! | 26..40 | reserved, zero                          |
//!
//! followed by `n_steps` frames, each holding `d` weights, then the loss (if
//! present), then `d` gradient components (if present).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{FieldKind, HeightField};
use crate::model::{Series, Trajectory};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"ADT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryHeader {
    pub d: u64,
    pub n_steps: u64,
    pub dtype: Dtype,
    pub has_loss: bool,
    pub has_gradient: bool,
}

impl TrajectoryHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8..16].copy_from_slice(&self.d.to_le_bytes());
        b[16..24].copy_from_slice(&self.n_steps.to_le_bytes());
        b[24] = self.dtype.code();
        b[25] = u8::from(self.has_loss) | (u8::from(self.has_gradient) << 1);
        b
    }

    /// Parses and checks the fixed header fields.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= 4 && &bytes[0..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"ADT1\"", String::from_utf8_lossy(&bytes[0..4]))));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncation {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}, expected {VERSION}")));
        }
        let dtype = match bytes[24] {
            0 => Dtype::F32,
            1 => Dtype::F64,
            other => return Err(Error::Format(format!("unknown dtype code {other}"))),
        };
        let channels = bytes[25];
        if channels & !0b11 != 0 {
            return Err(Error::Format(format!("unknown channel bits {channels:#04x}")));
        }
        if bytes[26..HEADER_LEN].iter().any(|&b| b != 0) {
            return Err(Error::Format("reserved header bytes are not zero".into()));
        }
        let d = u64_at(8);
        if d == 0 {
            return Err(Error::Format("dimension d is zero".into()));
        }
        Ok(Self {
            d,
            n_steps: u64_at(16),
            dtype,
            has_loss: channels & 1 != 0,
            has_gradient: channels & 2 != 0,
        })
    }

    /// Values per frame across all channels.
    pub fn frame_width(&self) -> Option<u64> {
        let g = if self.has_gradient { self.d } else { 0 };
        self.d.checked_add(u64::from(self.has_loss))?.checked_add(g)
    }

    /// Total file size implied by the header.
    pub fn file_len(&self) -> Option<u64> {
        self.frame_width()?
            .checked_mul(self.n_steps)?
            .checked_mul(self.dtype.size() as u64)?
            .checked_add(HEADER_LEN as u64)
    }
}

/// Serialises a trajectory in the given dtype.
pub fn encode_trajectory<T: Real>(traj: &Trajectory<T>, dtype: Dtype) -> Result<Vec<u8>> {
    let violations = traj.validate();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let header = TrajectoryHeader {
        d: traj.dim() as u64,
        n_steps: traj.n_steps() as u64,
        dtype,
        has_loss: traj.losses().is_some(),
        has_gradient: traj.gradients().is_some(),
    };
    let len = header.file_len().ok_or_else(|| Error::Argument("trajectory too large".into()))?;
    let mut out = Vec::with_capacity(len as usize);
    out.extend_from_slice(&header.to_bytes());
    let put = |out: &mut Vec<u8>, v: T| match dtype {
        Dtype::F32 => out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes()),
        Dtype::F64 => out.extend_from_slice(&v.f64().to_le_bytes()),
    };
    let d = traj.dim();
    for t in 0..traj.n_steps() {
        for &v in &traj.frames()[t * d..(t + 1) * d] {
            put(&mut out, v);
        }
        if let Some(l) = traj.losses() {
            put(&mut out, l[t]);
        }
        if let Some(g) = traj.gradients() {
            for &v in &g[t * d..(t + 1) * d] {
                put(&mut out, v);
            }
        }
    }
    Ok(out)
}

/// Parses an ADT1 buffer. Single-precision payloads are widened to `f64`.
pub fn decode_trajectory(bytes: &[u8]) -> Result<Trajectory<f64>> {
    let h = TrajectoryHeader::parse(bytes)?;
    let expected = h.file_len().ok_or_else(|| Error::Format("declared payload size overflows".into()))?;
    if expected != bytes.len() as u64 {
        return Err(Error::Truncation {
            expected,
            actual: bytes.len() as u64,
        });
    }
    let d = h.d as usize;
    let n = h.n_steps as usize;
    let size = h.dtype.size();
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(size)
        .map(|c| match h.dtype {
            Dtype::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
            Dtype::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
        })
        .collect();
    let width = h.frame_width().expect("checked above") as usize;
    let mut frames = Vec::with_capacity(n * d);
    let mut losses = Vec::with_capacity(if h.has_loss { n } else { 0 });
    let mut grads = Vec::with_capacity(if h.has_gradient { n * d } else { 0 });
    for row in values.chunks_exact(width) {
        frames.extend_from_slice(&row[..d]);
        let mut i = d;
        if h.has_loss {
            losses.push(row[i]);
            i += 1;
        }
        if h.has_gradient {
            grads.extend_from_slice(&row[i..i + d]);
        }
    }
    let mut traj = Trajectory::new(d, frames)?;
    if h.has_loss {
        traj = traj.with_losses(losses);
    }
    if h.has_gradient {
        traj = traj.with_gradients(grads);
    }
    traj.validated()
}

pub fn write_trajectory<T: Real>(traj: &Trajectory<T>, path: impl AsRef<Path>) -> Result<()> {
    write_trajectory_as(traj, path, Dtype::F64)
}

pub fn write_trajectory_as<T: Real>(traj: &Trajectory<T>, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    write_atomic(path, &encode_trajectory(traj, dtype)?)
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Trajectory<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_trajectory(&bytes)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Plain table rendered as comma-separated text with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row of numbers. `f64` display is the shortest string that
    /// parses back to the same value.
    pub fn push<V: Real>(&mut self, row: &[V]) {
        self.rows.push(row.iter().map(|v| v.f64().to_string()).collect());
    }

    pub fn push_text<S: ToString>(&mut self, row: &[S]) {
        self.rows.push(row.iter().map(ToString::to_string).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn from_series<T: Real>(series: &Series<T>, x: &str, y: &str) -> Self {
        let mut t = Table::new([x, y]);
        for (a, b) in series.iter() {
            t.push(&[a, b]);
        }
        t
    }
}

/// Parses a two-column numeric CSV with a header row back into a series.
pub fn parse_series_csv(text: &str) -> Result<Series<f64>> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| Error::Format(format!("line {}: missing column", i + 1)))?
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
        };
        x.push(next()?);
        y.push(next()?);
    }
    Series::new(x, y)
}

pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<S: Serialize>(path: impl AsRef<Path>, value: &S) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<D> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Height field as CSV: a `n,kind,seed,extent` header, its values, then `n`
/// rows of `n` heights (row 0 first).
pub fn field_to_csv<T: Real>(field: &HeightField<T>) -> String {
    let n = field.n();
    let mut s = String::from("n,kind,seed,extent\n");
    let _ = writeln!(s, "{},{},{},{}", n, field.kind().as_str(), field.seed(), field.extent().f64());
    for row in field.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|v| v.f64().to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn field_from_csv(text: &str) -> Result<HeightField<f64>> {
    let mut lines = text.lines();
    let head = lines.next().unwrap_or_default();
    if head.trim() != "n,kind,seed,extent" {
        return Err(Error::Format("height-field CSV must start with n,kind,seed,extent".into()));
    }
    let meta: Vec<&str> = lines.next().unwrap_or_default().split(',').map(str::trim).collect();
    if meta.len() != 4 {
        return Err(Error::Format("height-field metadata needs four columns".into()));
    }
    let n: usize = meta[0].parse().map_err(|e| Error::Format(format!("n: {e}")))?;
    let kind = FieldKind::parse(meta[1]).ok_or_else(|| Error::Format(format!("unknown field kind {:?}", meta[1])))?;
    let seed: u64 = meta[2].parse().map_err(|e| Error::Format(format!("seed: {e}")))?;
    let mut values = Vec::with_capacity(n * n);
    for (r, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for v in line.split(',') {
            values.push(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {r}: {e}")))?,
            );
        }
        if values.len() - before != n {
            return Err(Error::Format(format!("row {r} has {} values, expected {n}", values.len() - before)));
        }
    }
    if values.len() != n * n {
        return Err(Error::Format(format!("{} rows, expected {n}", values.len() / n.max(1))));
    }
    HeightField::from_values(n, values, kind, seed)
}

/// Writes CSV for `.csv` paths and an ADT1 container (one frame per row)
/// otherwise.
pub fn write_field<T: Real>(field: &HeightField<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        write_atomic(path, field_to_csv(field).as_bytes())
    } else {
        let traj = Trajectory::new(field.n(), field.values().to_vec())?;
        write_trajectory(&traj, path)
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<HeightField<f64>> {
    let path = path.as_ref();
    if is_csv(path) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        field_from_csv(&text)
    } else {
        let t = read_trajectory(path)?;
        if t.n_steps() != t.dim() {
            return Err(Error::Format(format!(
                "height field container must be square, got {} rows of {}",
                t.n_steps(),
                t.dim()
            )));
        }
        HeightField::from_values(t.dim(), t.frames().to_vec(), FieldKind::External, 0)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand arguments as invoked.
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, seeds: Vec<u64>, outputs: Vec<PathBuf>) -> Self {
        Self {
            command,
            config,
            tool_version: crate::VERSION.to_string(),
            seeds,
            outputs,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }
}
