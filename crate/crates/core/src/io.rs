//! Flat binary field format.
//!
//! A file is a sequence of records. Each record is a 56-byte header followed
//! by row-major node data (`i` fastest), everything little-endian:
//!
//! | offset | type      | content                               |
//! |--------|-----------|---------------------------------------|
//! | 0      | `[u8; 8]` | magic `GLVARFLD`                      |
//! | 8      | `u32`     | format version, currently 1           |
//! | 12     | `u32`     | kind: 1 complex, 2 real               |
//! | 16     | `u64`     | `nx` (nodes along x)                  |
//! | 24     | `u64`     | `ny`                                  |
//! | 32     | `f64`     | origin x                              |
//! | 40     | `f64`     | origin y                              |
//! | 48     | `f64`     | spacing `h`                           |
//! | 56     | data      | complex: `(re, im)` f64 pairs; real: f64 |
//!
//! A checkpoint holds a complex record for `psi` followed by a real record
//! for the stream function of `A`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{GaugeField, OrderParameter, ScalarField};
use crate::grid::Grid2D;

pub const MAGIC: &[u8; 8] = b"GLVARFLD";
pub const VERSION: u32 = 1;
const KIND_COMPLEX: u32 = 1;
const KIND_REAL: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

fn write_header(w: &mut impl Write, g: &Grid2D, kind: u32) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    w.write_all(&(g.nx() as u64).to_le_bytes())?;
    w.write_all(&(g.ny() as u64).to_le_bytes())?;
    for v in [g.origin()[0], g.origin()[1], g.h()] {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_complex(mut w: impl Write, g: &Grid2D, values: &[Complex64]) -> Result<()> {
    if values.len() != g.len() {
        return Err(Error::GridMismatch);
    }
    write_header(&mut w, g, KIND_COMPLEX)?;
    for z in values {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_real(mut w: impl Write, g: &Grid2D, values: &[f64]) -> Result<()> {
    if values.len() != g.len() {
        return Err(Error::GridMismatch);
    }
    write_header(&mut w, g, KIND_REAL)?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Read one record.
pub fn read_record(mut r: impl Read) -> Result<(Grid2D, FieldData)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = read_u32(&mut r)?;
    let nx = read_u64(&mut r)? as usize;
    let ny = read_u64(&mut r)? as usize;
    let (ox, oy, h) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let g = Grid2D::new([ox, oy], nx, ny, h)?;
    let data = match kind {
        KIND_COMPLEX => {
            let mut v = Vec::with_capacity(g.len());
            for _ in 0..g.len() {
                v.push(Complex64::new(read_f64(&mut r)?, read_f64(&mut r)?));
            }
            FieldData::Complex(v)
        }
        KIND_REAL => FieldData::Real((0..g.len()).map(|_| read_f64(&mut r)).collect::<Result<_>>()?),
        k => return Err(Error::Format(format!("unknown record kind {k}"))),
    };
    Ok((g, data))
}

pub fn read_real_field(path: &Path) -> Result<ScalarField> {
    match read_record(BufReader::new(File::open(path)?))? {
        (g, FieldData::Real(v)) => ScalarField::new(g, v),
        _ => Err(Error::Format("expected a real record".into())),
    }
}

pub fn write_real_field(path: &Path, f: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_real(&mut w, f.grid(), f.values())?;
    w.flush()?;
    Ok(())
}

pub fn write_checkpoint(path: &Path, psi: &OrderParameter, a: &GaugeField) -> Result<()> {
    if !psi.grid().same_shape(a.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_complex(&mut w, psi.grid(), psi.values())?;
    write_real(&mut w, a.grid(), a.stream())?;
    w.flush()?;
    Ok(())
}

/// Returns `psi` and the stream function of `A`.
pub fn read_checkpoint(path: &Path) -> Result<(OrderParameter, ScalarField)> {
    let mut r = BufReader::new(File::open(path)?);
    let psi = match read_record(&mut r)? {
        (g, FieldData::Complex(v)) => OrderParameter::new(g, v)?,
        _ => return Err(Error::Format("checkpoint must start with a complex record".into())),
    };
    let stream = match read_record(&mut r)? {
        (g, FieldData::Real(v)) => ScalarField::new(g, v)?,
        _ => return Err(Error::Format("checkpoint must end with a real record".into())),
    };
    if !psi.grid().same_shape(stream.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok((psi, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid2D::new([-1.0, 0.5], 4, 3, 0.25).unwrap();
        let mut buf = Vec::new();
        write_real(&mut buf, &g, &[1.0; 12]).unwrap();
        assert_eq!(buf.len(), 56 + 12 * 8);
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[48..56].try_into().unwrap()), 0.25);
    }

    #[test]
    fn complex_round_trip_is_exact() {
        let g = Grid2D::centered_square(2.0, 5).unwrap();
        let v: Vec<Complex64> = (0..g.len()).map(|k| Complex64::new(k as f64 / 7.0, -(k as f64).sqrt())).collect();
        let mut buf = Vec::new();
        write_complex(&mut buf, &g, &v).unwrap();
        let (g2, d) = read_record(buf.as_slice()).unwrap();
        assert!(g2.same_shape(&g));
        assert_eq!(d, FieldData::Complex(v));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let g = Grid2D::centered_square(2.0, 2).unwrap();
        let mut buf = Vec::new();
        write_real(&mut buf, &g, &[0.0; 9]).unwrap();
        assert!(matches!(read_record(&buf[..buf.len() - 1]), Err(Error::Io(_))));
        buf[0] = b'X';
        assert!(matches!(read_record(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = Grid2D::centered_square(2.0, 6).unwrap();
        let psi = OrderParameter::from_fn(g, |p| Complex64::new(p[0], p[1] * 0.5));
        let a = GaugeField::symmetric(g, 3.0, [0.0, 0.0], 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        write_checkpoint(&path, &psi, &a).unwrap();
        let (p2, s2) = read_checkpoint(&path).unwrap();
        assert_eq!(p2.values(), psi.values());
        assert_eq!(s2.values(), a.stream());
    }
}
