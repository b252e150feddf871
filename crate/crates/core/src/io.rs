//! Little-endian binary formats.
//!
//! | magic  | header                        | payload                          |
//! |--------|-------------------------------|----------------------------------|
//! | `TKT3` | `u64` × 3 dims                | `f64` values in linear order     |
//! | `TKM3` | `u64` n, `u64` count          | count × (`u32`, `u32`, `u32`)    |
//! | `TKS3` | `u64` n, `u64` count          | triples as in `TKM3`, then count × `f64` |
//!
//! Coordinates are zero-based and strictly sorted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sampling::{Coord, Mask, SampleSet};
use crate::tensor::DenseTensor3;

const TENSOR_MAGIC: &[u8; 4] = b"TKT3";
const MASK_MAGIC: &[u8; 4] = b"TKM3";
const SAMPLES_MAGIC: &[u8; 4] = b"TKS3";

pub fn write_tensor<W: Write>(mut w: W, t: &DenseTensor3) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    for d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in t.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<DenseTensor3> {
    expect_magic(&mut r, TENSOR_MAGIC)?;
    let dims = [read_len(&mut r)?, read_len(&mut r)?, read_len(&mut r)?];
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(read_f64(&mut r)?);
    }
    expect_eof(&mut r)?;
    DenseTensor3::from_vec(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_mask<W: Write>(mut w: W, mask: &Mask) -> Result<()> {
    write_coords(&mut w, MASK_MAGIC, mask)?;
    w.flush()?;
    Ok(())
}

/// Reads a mask. The nominal rate is set to the empirical density and the
/// generator seed is unknown.
pub fn read_mask<R: Read>(mut r: R) -> Result<Mask> {
    let (n, coords) = read_coords(&mut r, MASK_MAGIC)?;
    expect_eof(&mut r)?;
    build_mask(n, coords)
}

pub fn write_samples<W: Write>(mut w: W, s: &SampleSet) -> Result<()> {
    write_coords(&mut w, SAMPLES_MAGIC, s.mask())?;
    for v in s.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(mut r: R) -> Result<SampleSet> {
    let (n, coords) = read_coords(&mut r, SAMPLES_MAGIC)?;
    let mut values = Vec::with_capacity(coords.len());
    for _ in 0..coords.len() {
        values.push(read_f64(&mut r)?);
    }
    expect_eof(&mut r)?;
    let mask = build_mask(n, coords)?;
    SampleSet::new(mask, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor3) -> Result<()> {
    write_tensor(BufWriter::new(File::create(path)?), t)
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor3> {
    read_tensor(BufReader::new(File::open(path)?))
}

pub fn save_mask(path: impl AsRef<Path>, m: &Mask) -> Result<()> {
    write_mask(BufWriter::new(File::create(path)?), m)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    read_mask(BufReader::new(File::open(path)?))
}

pub fn save_samples(path: impl AsRef<Path>, s: &SampleSet) -> Result<()> {
    write_samples(BufWriter::new(File::create(path)?), s)
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<SampleSet> {
    read_samples(BufReader::new(File::open(path)?))
}

fn write_coords<W: Write>(w: &mut W, magic: &[u8; 4], mask: &Mask) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&(mask.n() as u64).to_le_bytes())?;
    w.write_all(&(mask.len() as u64).to_le_bytes())?;
    for c in mask.coords() {
        for i in c {
            w.write_all(&i.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_coords<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<(usize, Vec<Coord>)> {
    expect_magic(r, magic)?;
    let n = read_len(r)?;
    let count = read_len(r)?;
    if n > u32::MAX as usize || count as u128 > (n as u128).pow(3) {
        return Err(Error::Format(format!("{count} coordinates for n = {n}")));
    }
    let mut coords = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        coords.push([read_u32(r)?, read_u32(r)?, read_u32(r)?]);
    }
    Ok((n, coords))
}

fn build_mask(n: usize, coords: Vec<Coord>) -> Result<Mask> {
    let density = coords.len() as f64 / (n as f64).powi(3);
    Mask::from_coords(n, coords, density, None).map_err(|e| Error::Format(e.to_string()))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    match r.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after payload".into())),
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated file".into()),
        _ => Error::Io(e),
    })
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    usize::try_from(u64::from_le_bytes(b)).map_err(|_| Error::Format("length overflow".into()))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{bernoulli_mask, observe};

    #[test]
    fn tensor_layout_is_fixed() {
        let t = DenseTensor3::from_vec([1, 1, 2], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let mut expect = b"TKT3".to_vec();
        for d in [1u64, 1, 2] {
            expect.extend(d.to_le_bytes());
        }
        expect.extend(1.0f64.to_le_bytes());
        expect.extend((-2.0f64).to_le_bytes());
        assert_eq!(buf, expect);
        assert_eq!(read_tensor(&buf[..]).unwrap(), t);
    }

    #[test]
    fn mask_and_samples_roundtrip() {
        let t = DenseTensor3::from_fn([5; 3], |i, j, k| (i + 2 * j + 3 * k) as f64);
        let mask = bernoulli_mask(5, 0.3, 4).unwrap();
        let s = observe(&t, &mask).unwrap();
        let mut buf = Vec::new();
        write_mask(&mut buf, &mask).unwrap();
        assert_eq!(buf.len(), 4 + 16 + 12 * mask.len());
        let back = read_mask(&buf[..]).unwrap();
        assert_eq!(back.coords(), mask.coords());
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        let back = read_samples(&buf[..]).unwrap();
        assert_eq!(back.values(), s.values());
        assert_eq!(back.coords(), s.coords());
    }

    #[test]
    fn malformed_input_is_a_format_error() {
        assert!(matches!(read_tensor(&b"TKM3"[..]), Err(Error::Format(_))));
        let t = DenseTensor3::zeros([2, 2, 2]);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert!(matches!(read_tensor(&buf[..buf.len() - 1]), Err(Error::Format(_))));
        buf.push(0);
        assert!(matches!(read_tensor(&buf[..]), Err(Error::Format(_))));

        // unsorted coordinates
        let mut m = b"TKM3".to_vec();
        m.extend(3u64.to_le_bytes());
        m.extend(2u64.to_le_bytes());
        for c in [1u32, 0, 0, 0, 0, 0] {
            m.extend(c.to_le_bytes());
        }
        assert!(matches!(read_mask(&m[..]), Err(Error::Format(_))));
    }

    #[test]
    fn files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let t = DenseTensor3::from_fn([2, 3, 4], |i, j, k| (i * 100 + j * 10 + k) as f64 + 0.5);
        let path = dir.path().join("t.tkt3");
        save_tensor(&path, &t).unwrap();
        assert_eq!(load_tensor(&path).unwrap(), t);
    }
}
