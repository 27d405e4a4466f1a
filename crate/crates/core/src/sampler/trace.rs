//! Binary columnar traces of raw chain observables.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      5 bytes  "KLAB1"
//! dim        u32
//! half_ext   u32
//! spacing    f64
//! sites      u64
//! measure    u32      0 = conventional, 1 = modified
//! n_obs      u32
//! n_obs × { len u16, name [u8; len] (UTF-8) }
//! n_rows     u64
//! n_obs × n_rows f64  (column-major: all rows of column 0 first)
//! ```

use std::path::Path;

use crate::action::Measure;
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 5] = b"KLAB1";

/// Upper bound on the number of columns a decoder accepts.
pub const MAX_COLUMNS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub dim: u32,
    pub half_extent: u32,
    pub spacing: f64,
    pub sites: u64,
    pub measure: Measure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Trace {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    fn validate(&self) -> Result<()> {
        if self.names.len() != self.columns.len() {
            return Err(Error::Trace(format!(
                "{} names for {} columns",
                self.names.len(),
                self.columns.len()
            )));
        }
        if self.names.len() > MAX_COLUMNS {
            return Err(Error::Trace(format!("more than {MAX_COLUMNS} columns")));
        }
        let rows = self.rows();
        if self.columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Trace("columns have unequal lengths".into()));
        }
        for name in &self.names {
            if name.is_empty() || name.len() > u16::MAX as usize {
                return Err(Error::Trace(format!("bad column name length {}", name.len())));
            }
        }
        check_geometry(&self.header)
    }
}

fn check_geometry(h: &TraceHeader) -> Result<()> {
    if h.dim == 0 {
        return Err(Error::Trace("dimension 0".into()));
    }
    if !(h.spacing.is_finite() && h.spacing > 0.0) {
        return Err(Error::Trace(format!("bad spacing {}", h.spacing)));
    }
    let side = 2 * h.half_extent as u64 + 1;
    let expected = side
        .checked_pow(h.dim)
        .ok_or_else(|| Error::Trace("site count overflows".into()))?;
    if expected != h.sites {
        return Err(Error::Trace(format!(
            "site count {} inconsistent with (2L+1)^n = {expected}",
            h.sites
        )));
    }
    Ok(())
}

pub fn encode_trace(trace: &Trace) -> Result<Vec<u8>> {
    trace.validate()?;
    let rows = trace.rows();
    let mut out = Vec::with_capacity(64 + trace.columns.len() * (rows * 8 + 32));
    out.extend_from_slice(TRACE_MAGIC);
    let h = &trace.header;
    out.extend_from_slice(&h.dim.to_le_bytes());
    out.extend_from_slice(&h.half_extent.to_le_bytes());
    out.extend_from_slice(&h.spacing.to_le_bytes());
    out.extend_from_slice(&h.sites.to_le_bytes());
    let m: u32 = match h.measure {
        Measure::Conventional => 0,
        Measure::Modified => 1,
    };
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&(trace.names.len() as u32).to_le_bytes());
    for name in &trace.names {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    for col in &trace.columns {
        for v in col {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Trace(format!("truncated at byte {} (need {n} more)", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const K: usize>(&mut self) -> Result<[u8; K]> {
        Ok(self.take(K)?.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

/// Decodes a trace, validating every length against the buffer before
/// allocating.
pub fn decode_trace(bytes: &[u8]) -> Result<Trace> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(TRACE_MAGIC.len())? != TRACE_MAGIC {
        return Err(Error::Trace("bad magic".into()));
    }
    let dim = r.u32()?;
    let half_extent = r.u32()?;
    let spacing = r.f64()?;
    let sites = r.u64()?;
    let measure = match r.u32()? {
        0 => Measure::Conventional,
        1 => Measure::Modified,
        other => return Err(Error::Trace(format!("unknown measure tag {other}"))),
    };
    let header = TraceHeader {
        dim,
        half_extent,
        spacing,
        sites,
        measure,
    };
    check_geometry(&header)?;
    let n_obs = r.u32()? as usize;
    // each name needs at least 3 bytes
    if n_obs > MAX_COLUMNS || n_obs.saturating_mul(3) > r.remaining() {
        return Err(Error::Trace(format!("implausible column count {n_obs}")));
    }
    let mut names = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let len = r.u16()? as usize;
        if len == 0 {
            return Err(Error::Trace("empty column name".into()));
        }
        let raw = r.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|e| Error::Trace(format!("column name is not UTF-8: {e}")))?;
        names.push(name.to_owned());
    }
    let n_rows = r.u64()?;
    let payload = (n_rows as u128) * (n_obs as u128) * 8;
    if payload != r.remaining() as u128 {
        return Err(Error::Trace(format!(
            "{n_rows} rows x {n_obs} columns need {payload} bytes, found {}",
            r.remaining()
        )));
    }
    let n_rows = if n_obs == 0 { 0 } else { n_rows as usize };
    let mut columns = Vec::with_capacity(n_obs);
    for _ in 0..n_obs {
        let mut col = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            col.push(r.f64()?);
        }
        columns.push(col);
    }
    Ok(Trace {
        header,
        names,
        columns,
    })
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    std::fs::write(path, encode_trace(trace)?)?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    decode_trace(&std::fs::read(path)?)
}
