//! Binary snapshot files for preference posteriors.
//!
//! All integers are little-endian `u64` unless noted and all reals are
//! little-endian IEEE-754 `f64`; matrices are row-major. See
//! `docs/snapshot-format.md` for the field table.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::PreferencePosterior;
use crate::error::{Error, Result};
use crate::nn::MlpArchitecture;
use crate::scalar::Scalar;
use crate::snapshot::Validate;

pub const MAGIC: &[u8; 8] = b"HITLPREF";
pub const FORMAT_VERSION: u32 = 1;

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_len<R: Read>(r: &mut R, what: &str, max: u64) -> Result<usize> {
    let v = get_u64(r)?;
    if v > max {
        return Err(Error::Snapshot(format!("{what} of {v} is implausible")));
    }
    Ok(v as usize)
}

pub fn write_snapshot<T: Scalar, W: Write>(mut w: W, version: u64, post: &PreferencePosterior<T>) -> Result<()> {
    post.validate()?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    put_u64(&mut w, version)?;
    put_u64(&mut w, post.training_set_size as u64)?;
    put_f64(&mut w, post.prior_precision)?;
    put_f64(&mut w, post.final_loss)?;
    let arch = &post.architecture;
    put_u64(&mut w, arch.input_dim as u64)?;
    put_u64(&mut w, arch.hidden.len() as u64)?;
    for &h in &arch.hidden {
        put_u64(&mut w, h as u64)?;
    }
    put_u64(&mut w, arch.output_dim as u64)?;
    let p = post.psi_star.len();
    put_u64(&mut w, p as u64)?;
    for v in post.psi_star.iter() {
        put_f64(&mut w, v.as_f64())?;
    }
    let mut buf = Vec::with_capacity(8 * p);
    for i in 0..p {
        buf.clear();
        for j in 0..p {
            buf.extend_from_slice(&post.covariance_chol[(i, j)].as_f64().to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot file, returning its version and the posterior.
pub fn read_snapshot<T: Scalar, R: Read>(mut r: R) -> Result<(u64, PreferencePosterior<T>)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("not a preference snapshot (bad magic)".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let fv = u32::from_le_bytes(b4);
    if fv != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {fv}")));
    }
    r.read_exact(&mut b4)?;
    let version = get_u64(&mut r)?;
    let training_set_size = get_len(&mut r, "training set size", u32::MAX as u64)?;
    let prior_precision = get_f64(&mut r)?;
    let final_loss = get_f64(&mut r)?;
    let input_dim = get_len(&mut r, "input dimension", 1 << 20)?;
    let n_hidden = get_len(&mut r, "hidden layer count", 64)?;
    let hidden = (0..n_hidden)
        .map(|_| get_len(&mut r, "layer width", 1 << 16))
        .collect::<Result<Vec<_>>>()?;
    let output_dim = get_len(&mut r, "output dimension", 1 << 16)?;
    let architecture = MlpArchitecture {
        input_dim,
        hidden,
        output_dim,
    };
    let p = get_len(&mut r, "parameter count", 1 << 16)?;
    if p != architecture.n_params() {
        return Err(Error::Snapshot(format!(
            "parameter count {p} does not match architecture ({})",
            architecture.n_params()
        )));
    }
    let psi = (0..p).map(|_| get_f64(&mut r).map(T::lit)).collect::<Result<Vec<_>>>()?;
    let mut row = vec![0u8; 8 * p];
    let mut chol = DMatrix::zeros(p, p);
    for i in 0..p {
        r.read_exact(&mut row)?;
        for j in 0..p {
            let v = f64::from_le_bytes(row[8 * j..8 * j + 8].try_into().expect("8-byte chunk"));
            chol[(i, j)] = T::lit(v);
        }
    }
    let post = PreferencePosterior {
        architecture,
        psi_star: DVector::from_vec(psi),
        covariance_chol: chol,
        prior_precision,
        training_set_size,
        final_loss,
    };
    post.validate()?;
    Ok((version, post))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PreferencePosterior<f64> {
        let arch = MlpArchitecture::new(2, vec![3]);
        let p = arch.n_params();
        PreferencePosterior {
            architecture: arch,
            psi_star: DVector::from_fn(p, |i, _| i as f64 * 0.25 - 1.0),
            covariance_chol: DMatrix::from_fn(p, p, |i, j| if i >= j { 1.0 + (i * p + j) as f64 * 1e-3 } else { 0.0 }),
            prior_precision: 1.0,
            training_set_size: 6,
            final_loss: 2.5,
        }
    }

    #[test]
    fn round_trip() {
        let post = small();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, 7, &post).unwrap();
        let p = post.psi_star.len();
        assert_eq!(buf.len(), 8 + 4 + 4 + 9 * 8 + 8 * p + 8 * p * p);
        let (v, back) = read_snapshot::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(v, 7);
        assert_eq!(back, post);
    }

    #[test]
    fn layout_is_little_endian_row_major() {
        let post = small();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, 1, &post).unwrap();
        assert_eq!(&buf[..8], b"HITLPREF");
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 1);
        let p = post.psi_star.len();
        let start = buf.len() - 8 * p * p;
        // second stored value is L[0][1], an upper-triangle zero
        assert_eq!(f64::from_le_bytes(buf[start + 8..start + 16].try_into().unwrap()), 0.0);
        let l10 = start + 8 * p;
        assert_eq!(f64::from_le_bytes(buf[l10..l10 + 8].try_into().unwrap()), post.covariance_chol[(1, 0)]);
    }

    #[test]
    fn corrupt_files_rejected() {
        let post = small();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, 1, &post).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot::<f64, _>(bad.as_slice()).is_err());
        assert!(read_snapshot::<f64, _>(&buf[..buf.len() - 1]).is_err());
    }
}
