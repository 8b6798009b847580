//! CSV number formatting and a binary wave-function file format.
//!
//! A state file is the 8-byte magic `TDSEWF01`, a little-endian `u64` header
//! length, a JSON header, then `(re, im)` pairs as little-endian `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, WaveFunction};

pub const STATE_MAGIC: &[u8; 8] = b"TDSEWF01";

/// Float with 17 significant digits, which round-trips every `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub time: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

pub fn write_state(path: &Path, f: &WaveFunction, time: f64, metadata: BTreeMap<String, String>) -> Result<()> {
    let g = f.grid();
    let header = StateHeader { dim: g.dim(), half_width: g.half_width(), points: g.points(), time, metadata };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(STATE_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for v in f.values() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_state(path: &Path) -> Result<(WaveFunction, StateHeader)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != STATE_MAGIC {
        return Err(Error::InvalidArgument(format!("{} is not a state file", path.display())));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: StateHeader = serde_json::from_slice(&json)?;
    let grid = SpatialGrid::new(header.dim, header.half_width, header.points)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut buf = [0u8; 16];
    for _ in 0..grid.len() {
        r.read_exact(&mut buf)?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        values.push(Complex64::new(re, im));
    }
    Ok((WaveFunction::new(&grid, values)?, header))
}
