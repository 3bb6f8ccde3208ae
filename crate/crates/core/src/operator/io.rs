//! Binary serialization of operator functions.
//!
//! Layout (all integers and doubles little-endian):
//!
//! ```text
//! bytes 0..8   magic "OPVF0001"
//! bytes 8..16  n  (vertex count, u64)
//! bytes 16..24 ℓ  (matrix dimension, u64)
//! then n·ℓ² complex entries, 16 bytes each: re f64, im f64,
//! matrices in vertex order, each row-major.
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::budget::{dense_cap, PORT_CAP};
use crate::error::{Error, Result};

use super::OperatorFunction;

pub const MAGIC: [u8; 8] = *b"OPVF0001";

pub fn write_operator_function(w: &mut impl Write, f: &OperatorFunction) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&(f.n() as u64).to_le_bytes())?;
    w.write_all(&(f.ell() as u64).to_le_bytes())?;
    for m in f.mats() {
        for r in 0..f.ell() {
            for c in 0..f.ell() {
                let z = m[(r, c)];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_operator_function(r: &mut impl Read) -> Result<OperatorFunction> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::domain(format!(
            "bad operator-file magic {magic:02x?}, expected {MAGIC:02x?}"
        )));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8);
    r.read_exact(&mut buf8)?;
    let ell = u64::from_le_bytes(buf8);
    if n == 0 || ell == 0 {
        return Err(Error::domain(format!("degenerate dimensions n = {n}, ℓ = {ell}")));
    }
    let entries = n
        .checked_mul(ell)
        .and_then(|v| v.checked_mul(ell))
        .filter(|&v| v <= (PORT_CAP as u64).max(dense_cap() as u64 * dense_cap() as u64));
    let Some(entries) = entries else {
        return Err(Error::capacity(format!(
            "operator file declares {n}·{ell}² entries, beyond the slot cap"
        )));
    };
    let ell = ell as usize;
    let mut mats = Vec::with_capacity(n as usize);
    let mut entry = [0u8; 16];
    for _ in 0..n {
        let mut m = DMatrix::<Complex64>::zeros(ell, ell);
        for r_i in 0..ell {
            for c in 0..ell {
                r.read_exact(&mut entry)?;
                let re = f64::from_le_bytes(entry[0..8].try_into().unwrap());
                let im = f64::from_le_bytes(entry[8..16].try_into().unwrap());
                m[(r_i, c)] = Complex64::new(re, im);
            }
        }
        mats.push(m);
    }
    let _ = entries;
    OperatorFunction::new(mats)
}

pub fn save_operator_function(path: &Path, f: &OperatorFunction) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_operator_function(&mut w, f)?;
    w.flush()?;
    Ok(())
}

pub fn load_operator_function(path: &Path) -> Result<OperatorFunction> {
    let mut r = BufReader::new(File::open(path)?);
    read_operator_function(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::random_unitary_function;

    #[test]
    fn roundtrip_preserves_matrices() {
        let f = random_unitary_function(4, 3, 31).unwrap();
        let mut buf = Vec::new();
        write_operator_function(&mut buf, &f).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 8 + 4 * 9 * 16);
        let g = read_operator_function(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let f = random_unitary_function(2, 2, 5).unwrap();
        let mut buf = Vec::new();
        write_operator_function(&mut buf, &f).unwrap();
        buf[0] ^= 0xFF;
        assert!(read_operator_function(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let f = random_unitary_function(2, 2, 5).unwrap();
        let mut buf = Vec::new();
        write_operator_function(&mut buf, &f).unwrap();
        buf.truncate(buf.len() - 7);
        assert!(read_operator_function(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn norm_invariant_checked_on_load() {
        // hand-craft a file whose matrix violates the contraction bound
        let mut buf = Vec::new();
        buf.extend_from_slice(&MAGIC);
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&2.0f64.to_le_bytes());
        buf.extend_from_slice(&0.0f64.to_le_bytes());
        assert!(read_operator_function(&mut buf.as_slice()).is_err());
    }
}
