//! Binary field (`NVS1`) and scattering-data (`NVB1`) files, plus CSV
//! export and import.
//!
//! All numbers are little-endian. `NVS1`: magic, `u32 N`, `f64 L`, `u8 kind`
//! (0 real, 1 complex), then `N^2` values row-major. `NVB1`: magic,
//! `u32 M`, `f64 K`, `f64 t`, then `M^2` complex pairs `b(k, 0)` in node
//! order; `b(k, t)` follows from the stored time.
//!
//! CSV values are written with 17 significant digits, so text round trips
//! are exact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{NvsError, Result};
use crate::faddeev::DEFAULT_K_MIN;
use crate::grid::{ComplexField, GridSpec};
use crate::scattering::{evolve_b, KGrid, ScatteringData};

pub const FIELD_MAGIC: &[u8; 4] = b"NVS1";
pub const SCATTERING_MAGIC: &[u8; 4] = b"NVB1";
pub const FIELD_CSV_HEADER: &str = "x1,x2,re,im";
pub const SCATTERING_CSV_HEADER: &str = "kre,kim,bre,bim";

const KIND_REAL: u8 = 0;
const KIND_COMPLEX: u8 = 1;

fn format_error(msg: impl Into<String>) -> NvsError {
    NvsError::Format(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(format_error(format!("truncated file: need {end} bytes, have {}", self.bytes.len())));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_error(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_field(f: &ComplexField) -> Vec<u8> {
    let g = f.grid();
    let kind = if f.is_real() { KIND_REAL } else { KIND_COMPLEX };
    let per = if kind == KIND_REAL { 8 } else { 16 };
    let mut out = Vec::with_capacity(17 + per * g.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(g.size() as u32).to_le_bytes());
    out.extend_from_slice(&g.half_width().to_le_bytes());
    out.push(kind);
    for v in f.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        if kind == KIND_COMPLEX {
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<ComplexField> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != FIELD_MAGIC {
        return Err(format_error("missing NVS1 magic"));
    }
    let n = r.u32()? as usize;
    let l = r.f64()?;
    let grid = GridSpec::new(l, n).map_err(|e| format_error(format!("bad grid header: {e}")))?;
    let field = match r.u8()? {
        KIND_REAL => {
            let vals = (0..grid.len()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            ComplexField::from_real_values(grid, &vals)?
        }
        KIND_COMPLEX => {
            let vals = (0..grid.len())
                .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
                .collect::<Result<Vec<_>>>()?;
            ComplexField::new(grid, vals)?
        }
        other => return Err(format_error(format!("unknown field kind {other}"))),
    };
    r.finish()?;
    Ok(field)
}

pub fn encode_scattering(s: &ScatteringData) -> Vec<u8> {
    let kg = s.kgrid();
    let mut out = Vec::with_capacity(24 + 16 * kg.len());
    out.extend_from_slice(SCATTERING_MAGIC);
    out.extend_from_slice(&(kg.size() as u32).to_le_bytes());
    out.extend_from_slice(&kg.half_width().to_le_bytes());
    out.extend_from_slice(&s.time().to_le_bytes());
    for b in s.base() {
        out.extend_from_slice(&b.re.to_le_bytes());
        out.extend_from_slice(&b.im.to_le_bytes());
    }
    out
}

/// The file does not record `k_min`; it is taken as the default, lowered to
/// the innermost node when the grid is finer.
fn file_kgrid(half_width: f64, size: usize) -> Result<KGrid> {
    let innermost = half_width / size as f64 * std::f64::consts::SQRT_2;
    KGrid::with_min(half_width, size, DEFAULT_K_MIN.min(innermost))
        .map_err(|e| format_error(format!("bad k-grid header: {e}")))
}

pub fn decode_scattering(bytes: &[u8]) -> Result<ScatteringData> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != SCATTERING_MAGIC {
        return Err(format_error("missing NVB1 magic"));
    }
    let m = r.u32()? as usize;
    let k = r.f64()?;
    let t = r.f64()?;
    if !t.is_finite() {
        return Err(format_error(format!("time {t} is not finite")));
    }
    let kg = file_kgrid(k, m)?;
    let base = (0..kg.len())
        .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let s = ScatteringData::synthetic(kg, base, "nvb1")?;
    Ok(if t == 0.0 { s } else { evolve_b(&s, t) })
}

pub fn write_field(path: impl AsRef<Path>, f: &ComplexField) -> Result<()> {
    Ok(std::fs::write(path, encode_field(f))?)
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    decode_field(&std::fs::read(path)?)
}

pub fn write_scattering(path: impl AsRef<Path>, s: &ScatteringData) -> Result<()> {
    Ok(std::fs::write(path, encode_scattering(s))?)
}

pub fn read_scattering(path: impl AsRef<Path>) -> Result<ScatteringData> {
    decode_scattering(&std::fs::read(path)?)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_row(out: &mut String, cols: [f64; 4]) {
    let _ = writeln!(out, "{},{},{},{}", num(cols[0]), num(cols[1]), num(cols[2]), num(cols[3]));
}

/// Rows `x1,x2,re,im` in storage order.
pub fn field_to_csv(f: &ComplexField) -> String {
    let g = f.grid();
    let mut out = String::with_capacity(100 * g.len());
    out.push_str(FIELD_CSV_HEADER);
    out.push('\n');
    for (i, v) in f.values().iter().enumerate() {
        let z = g.node_at(i);
        push_row(&mut out, [z.re, z.im, v.re, v.im]);
    }
    out
}

/// Rows `kre,kim,bre,bim` of `b(k, t)` in node order.
pub fn scattering_to_csv(s: &ScatteringData) -> String {
    let kg = s.kgrid();
    let mut out = String::with_capacity(100 * kg.len());
    out.push_str(SCATTERING_CSV_HEADER);
    out.push('\n');
    for (k, b) in kg.nodes().zip(s.values()) {
        push_row(&mut out, [k.re, k.im, b.re, b.im]);
    }
    out
}

fn parse_rows(text: &str, header: &str) -> Result<Vec<[f64; 4]>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(format_error(format!("expected CSV header {header}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(format_error(format!("line {}: expected 4 columns", i + 2)));
            }
            let mut row = [0.0; 4];
            for (slot, c) in row.iter_mut().zip(cols) {
                *slot = c
                    .trim()
                    .parse()
                    .map_err(|_| format_error(format!("line {}: bad number {c:?}", i + 2)))?;
            }
            Ok(row)
        })
        .collect()
}

fn square_side(rows: usize) -> Result<usize> {
    let n = (rows as f64).sqrt().round() as usize;
    if n * n != rows || n == 0 {
        return Err(format_error(format!("{rows} rows do not form a square grid")));
    }
    Ok(n)
}

/// Inverse of [`field_to_csv`]. A field whose imaginary parts are all zero
/// is read back as real.
pub fn field_from_csv(text: &str) -> Result<ComplexField> {
    let rows = parse_rows(text, FIELD_CSV_HEADER)?;
    let n = square_side(rows.len())?;
    let grid = GridSpec::new(-rows[0][0], n).map_err(|e| format_error(format!("bad grid: {e}")))?;
    for (i, row) in rows.iter().enumerate() {
        let z = grid.node_at(i);
        if z.re != row[0] || z.im != row[1] {
            return Err(format_error(format!("row {i}: coordinates do not match the grid")));
        }
    }
    if rows.iter().all(|r| r[3] == 0.0) {
        let vals: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        ComplexField::from_real_values(grid, &vals)
    } else {
        ComplexField::new(grid, rows.iter().map(|r| Complex64::new(r[2], r[3])).collect())
    }
}

/// Inverse of [`scattering_to_csv`]; the values are stored as time-0 data.
pub fn scattering_from_csv(text: &str) -> Result<ScatteringData> {
    let rows = parse_rows(text, SCATTERING_CSV_HEADER)?;
    let m = square_side(rows.len())?;
    let matches = |kg: &KGrid| {
        rows.iter()
            .zip(kg.nodes())
            .all(|(r, k)| k.re == r[0] && k.im == r[1])
    };
    // K = -k_0 M / (M - 1) up to rounding; search a few ulps around it.
    let guess = -rows[0][0] * m as f64 / (m as f64 - 1.0);
    let mut candidate = guess;
    for _ in 0..8 {
        candidate = candidate.next_down();
    }
    let mut found = None;
    for _ in 0..17 {
        if let Ok(kg) = file_kgrid(candidate, m) {
            if matches(&kg) {
                found = Some(kg);
                break;
            }
        }
        candidate = candidate.next_up();
    }
    let kg = found.ok_or_else(|| format_error("k coordinates do not match a half-shifted grid"))?;
    ScatteringData::synthetic(kg, rows.iter().map(|r| Complex64::new(r[2], r[3])).collect(), "csv")
}

/// CSV export of an `NVS1` or `NVB1` file, chosen by its magic.
pub fn export_csv(bytes: &[u8]) -> Result<String> {
    match bytes.get(..4) {
        Some(m) if m == FIELD_MAGIC => Ok(field_to_csv(&decode_field(bytes)?)),
        Some(m) if m == SCATTERING_MAGIC => Ok(scattering_to_csv(&decode_scattering(bytes)?)),
        _ => Err(format_error("unknown file magic")),
    }
}
