//! EWG1 binary grid files.
//!
//! Layout (little-endian): magic `EWG1`, `u32 nx`, `u32 ny`, `u8 kind`
//! (0 = real64, 1 = complex128 as interleaved re/im), four `f64` extent
//! values `(xmin, xmax, ymin, ymax)`, `f64 time`, then `nx·ny` values
//! row-major with x fastest. The header is 53 bytes.

use std::path::Path;

use num_complex::Complex64;

use crate::error::CliError;
use crate::output::write_atomic;

pub const MAGIC: &[u8; 4] = b"EWG1";
pub const HEADER_LEN: usize = 53;

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

impl GridData {
    fn kind(&self) -> u8 {
        match self {
            GridData::Real(_) => 0,
            GridData::Complex(_) => 1,
        }
    }

    fn len(&self) -> usize {
        match self {
            GridData::Real(v) => v.len(),
            GridData::Complex(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub nx: u32,
    pub ny: u32,
    /// `(xmin, xmax, ymin, ymax)`.
    pub extent: [f64; 4],
    pub time: f64,
    pub data: GridData,
}

impl GridField {
    pub fn encode(&self) -> Result<Vec<u8>, CliError> {
        let cells = self.nx as usize * self.ny as usize;
        if cells == 0 || self.data.len() != cells {
            return Err(CliError::Format(format!(
                "grid {}×{} does not match its {} payload values",
                self.nx,
                self.ny,
                self.data.len()
            )));
        }
        let per = if self.data.kind() == 0 { 8 } else { 16 };
        let mut out = Vec::with_capacity(HEADER_LEN + per * cells);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.nx.to_le_bytes());
        out.extend_from_slice(&self.ny.to_le_bytes());
        out.push(self.data.kind());
        for v in self.extent.iter().chain([&self.time]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &self.data {
            GridData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            GridData::Complex(v) => v.iter().for_each(|c| {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < HEADER_LEN {
            return Err(CliError::Format(format!("truncated header: {} bytes", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(CliError::Format(format!("bad magic {:?}, expected EWG1", &bytes[..4])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let (nx, ny, kind) = (u32_at(4), u32_at(8), bytes[12]);
        let extent = [f64_at(13), f64_at(21), f64_at(29), f64_at(37)];
        let time = f64_at(45);
        let cells = nx as usize * ny as usize;
        let per = match kind {
            0 => 8,
            1 => 16,
            k => return Err(CliError::Format(format!("unknown grid kind {k}"))),
        };
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != per * cells {
            return Err(CliError::Format(format!(
                "payload is {} bytes, expected {} for a {nx}×{ny} grid",
                payload.len(),
                per * cells
            )));
        }
        let vals: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let data = if kind == 0 {
            GridData::Real(vals)
        } else {
            GridData::Complex(vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
        };
        Ok(GridField {
            nx,
            ny,
            extent,
            time,
            data,
        })
    }
}

/// Writes `field` atomically; returns the bytes written.
pub fn write_grid(field: &GridField, path: &Path) -> Result<Vec<u8>, CliError> {
    let bytes = field.encode()?;
    write_atomic(path, &bytes)?;
    Ok(bytes)
}

pub fn read_grid(path: &Path) -> Result<GridField, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GridField::decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(n: u32) -> GridField {
        GridField {
            nx: n,
            ny: n,
            extent: [-1.0, 1.0, -2.0, 2.0],
            time: 3.5,
            data: GridData::Real((0..n * n).map(|i| i as f64 * 0.1 - 1e-300).collect()),
        }
    }

    #[test]
    fn sizes_follow_the_layout() {
        assert_eq!(real(256).encode().unwrap().len(), 524_341);
        let c = GridField {
            data: GridData::Complex(vec![Complex64::new(1.0, -1.0); 16]),
            ..real(4)
        };
        let payload = |g: &GridField| g.encode().unwrap().len() - HEADER_LEN;
        assert_eq!(payload(&c), 2 * payload(&real(4)));
    }

    #[test]
    fn decode_inverts_encode() {
        let g = real(2);
        assert_eq!(GridField::decode(&g.encode().unwrap()).unwrap(), g);
        let c = GridField {
            data: GridData::Complex(vec![Complex64::new(f64::MIN_POSITIVE, -0.0); 6]),
            nx: 3,
            ny: 2,
            ..g
        };
        let back = GridField::decode(&c.encode().unwrap()).unwrap();
        assert_eq!(back.encode().unwrap(), c.encode().unwrap());
    }

    #[test]
    fn rejects_corrupt_files() {
        let bytes = real(2).encode().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(GridField::decode(&bad).is_err());
        assert!(GridField::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(GridField::decode(&bytes[..20]).is_err());
        let mut kind = bytes;
        kind[12] = 7;
        assert!(GridField::decode(&kind).is_err());
        let mismatched = GridField { nx: 3, ..real(2) };
        assert!(mismatched.encode().is_err());
    }
}
