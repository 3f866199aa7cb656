//! Sample-file serialization.
//!
//! Binary layout: the 8-byte magic `RCOVSMP1`, then `d` and `N` as
//! little-endian u64, then the `d x N` matrix as little-endian f64 in
//! row-major order, then an optional corruption block (count followed by the
//! sorted replaced indices, both u64). CSV export writes one sample per row
//! with header `x0,...,x{d-1}`.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::data::SampleMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RCOVSMP1";

pub fn write_samples<W: Write>(mut w: W, samples: &SampleMatrix) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(samples.d() as u64).to_le_bytes())?;
    w.write_all(&(samples.n() as u64).to_le_bytes())?;
    for &v in samples.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(bad) = samples.corrupted_indices() {
        w.write_all(&(bad.len() as u64).to_le_bytes())?;
        for &i in bad {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_samples_to_path<P: AsRef<Path>>(path: P, samples: &SampleMatrix) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_samples(std::io::BufWriter::new(f), samples)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn read_samples<R: Read>(mut r: R) -> Result<SampleMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::MalformedFile("file shorter than the magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::MalformedFile("bad magic".into()));
    }
    let d = read_u64(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    if d == 0 || n == 0 || d.checked_mul(n).is_none() {
        return Err(Error::MalformedFile(format!("bad shape {d} x {n}")));
    }
    let mut data = Array2::zeros((d, n));
    for i in 0..d {
        for j in 0..n {
            data[[i, j]] = read_f64(&mut r)
                .map_err(|_| Error::MalformedFile("truncated sample block".into()))?;
        }
    }
    // Optional corruption block: present iff bytes remain.
    let mut count_buf = [0u8; 8];
    match r.read(&mut count_buf)? {
        0 => SampleMatrix::new(data),
        8 => {
            let count = u64::from_le_bytes(count_buf) as usize;
            if count > n {
                return Err(Error::MalformedFile(format!(
                    "corruption count {count} exceeds N={n}"
                )));
            }
            let mut bad = BTreeSet::new();
            let mut prev: Option<u64> = None;
            for _ in 0..count {
                let idx = read_u64(&mut r)
                    .map_err(|_| Error::MalformedFile("truncated corruption block".into()))?;
                if let Some(p) = prev {
                    if idx <= p {
                        return Err(Error::MalformedFile(
                            "corruption indices not strictly increasing".into(),
                        ));
                    }
                }
                if idx as usize >= n {
                    return Err(Error::MalformedFile(format!(
                        "corruption index {idx} out of range"
                    )));
                }
                prev = Some(idx);
                bad.insert(idx as usize);
            }
            SampleMatrix::with_corruption(data, bad)
        }
        _ => Err(Error::MalformedFile("truncated corruption count".into())),
    }
}

pub fn read_samples_from_path<P: AsRef<Path>>(path: P) -> Result<SampleMatrix> {
    let f = std::fs::File::open(path)?;
    read_samples(std::io::BufReader::new(f))
}

/// One sample per row, header `x0,...,x{d-1}`.
pub fn export_csv<W: Write>(mut w: W, samples: &SampleMatrix) -> Result<()> {
    let d = samples.d();
    let header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for j in 0..samples.n() {
        let row: Vec<String> = (0..d)
            .map(|i| format!("{}", samples.data()[[i, j]]))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip_without_corruption() {
        let s = SampleMatrix::new(array![[1.0, 2.5], [-3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(s.data(), back.data());
        assert!(back.corrupted_indices().is_none());
    }

    #[test]
    fn round_trip_with_corruption() {
        let s = SampleMatrix::with_corruption(
            array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
            [0usize, 2usize].into_iter().collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(s.data(), back.data());
        assert_eq!(
            back.corrupted_indices().unwrap().iter().copied().collect::<Vec<_>>(),
            vec![0, 2]
        );
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_samples(&b"NOTMAGIC"[..]).is_err());
        let s = SampleMatrix::new(array![[1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &s).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_samples(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = SampleMatrix::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        export_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x0,x1");
        assert_eq!(lines[1], "1,3");
        assert_eq!(lines[2], "2,4");
    }

    proptest::proptest! {
        #[test]
        fn round_trip_preserves_bits(values in proptest::collection::vec(-1e12f64..1e12, 4..40)) {
            let n = values.len() / 2;
            let data = Array2::from_shape_vec((2, n), values[..2 * n].to_vec()).unwrap();
            let s = SampleMatrix::new(data).unwrap();
            let mut buf = Vec::new();
            write_samples(&mut buf, &s).unwrap();
            let back = read_samples(buf.as_slice()).unwrap();
            proptest::prop_assert_eq!(s.data(), back.data());
        }
    }
}
