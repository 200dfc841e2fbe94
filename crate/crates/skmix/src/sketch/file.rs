//! The `.skmx` sketch file format.
//!
//! Little-endian throughout:
//!
//! ```text
//! offset 0   magic "SKMX0001" (8 bytes)
//!        8   n        u64
//!       16   p        u64
//!       24   q        u64
//!       32   q_shared u64
//!       40   seed     u64   (precondition + sampling seed)
//!       48   transform_kind u8 (0 = DCT)
//!       49   has_labels     u8 (0 or 1)
//!       50   sign bits, ceil(p/8) bytes, packed LSB-first; bit set = sign -1
//!        .   shared indices, q_shared x u32
//!        .   n row records: [q x u32 indices][q x f64 values]
//!        .   labels, n x u32 (only when has_labels = 1)
//! ```
//!
//! Reads are strict: wrong magic, out-of-range headers, unsorted indices, or
//! non-finite values are data-format errors carrying the byte offset where the
//! problem was detected, and truncation inside a row names the offending row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::precondition::{PreconditionOp, TransformKind};
use crate::sketch::{RowSketch, SketchSpec, SketchedDataset};

pub const MAGIC: &[u8; 8] = b"SKMX0001";

/// Serialize `ds` to `path`.
pub fn write_sketch_file(path: impl AsRef<Path>, ds: &SketchedDataset) -> Result<()> {
    ds.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    write_sketch(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

/// Deserialize a sketch file from `path`.
pub fn read_sketch_file(path: impl AsRef<Path>) -> Result<SketchedDataset> {
    let mut r = CountingReader { inner: BufReader::new(File::open(path)?), offset: 0 };
    read_sketch(&mut r)
}

pub fn write_sketch<W: Write>(w: &mut W, ds: &SketchedDataset) -> Result<()> {
    let spec = &ds.spec;
    w.write_all(MAGIC)?;
    for v in [ds.n() as u64, spec.p as u64, spec.q as u64, spec.q_shared as u64, spec.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[ds.precondition.transform().code()])?;
    w.write_all(&[ds.labels.is_some() as u8])?;

    let mut bits = vec![0u8; spec.p.div_ceil(8)];
    for (j, &s) in ds.precondition.signs().iter().enumerate() {
        if s < 0.0 {
            bits[j / 8] |= 1 << (j % 8);
        }
    }
    w.write_all(&bits)?;

    for &idx in &ds.shared_indices {
        w.write_all(&idx.to_le_bytes())?;
    }
    for row in &ds.rows {
        for &idx in &row.indices {
            w.write_all(&idx.to_le_bytes())?;
        }
        for &val in &row.values {
            w.write_all(&val.to_le_bytes())?;
        }
    }
    if let Some(labels) = &ds.labels {
        for &l in labels {
            w.write_all(&l.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_sketch<R: Read>(r: &mut CountingReader<R>) -> Result<SketchedDataset> {
    let mut magic = [0u8; 8];
    r.read_exact_or(&mut magic, "file shorter than magic")?;
    if &magic != MAGIC {
        return Err(Error::format(0, format!("bad magic {magic:?}, expected {MAGIC:?}")));
    }
    let n = r.read_u64("n")? as usize;
    let header_off = r.offset;
    let p = r.read_u64("p")? as usize;
    let q = r.read_u64("q")? as usize;
    let q_shared = r.read_u64("q_shared")? as usize;
    let seed = r.read_u64("seed")?;
    let spec = SketchSpec { p, q, q_shared, seed };
    if let Err(e) = spec.validate() {
        return Err(Error::format(header_off, format!("invalid header: {e}")));
    }

    let code_off = r.offset;
    let code = r.read_u8("transform_kind")?;
    let transform = TransformKind::from_code(code)
        .ok_or_else(|| Error::format(code_off, format!("unknown transform kind {code}")))?;
    let flag_off = r.offset;
    let has_labels = match r.read_u8("has_labels")? {
        0 => false,
        1 => true,
        other => {
            return Err(Error::format(flag_off, format!("has_labels must be 0 or 1, got {other}")))
        }
    };

    let mut bits = vec![0u8; p.div_ceil(8)];
    r.read_exact_or(&mut bits, "truncated sign bits")?;
    let signs: Vec<f64> =
        (0..p).map(|j| if bits[j / 8] >> (j % 8) & 1 == 1 { -1.0 } else { 1.0 }).collect();
    let precondition = PreconditionOp::from_parts(p, seed, signs, transform)
        .map_err(|e| Error::format(r.offset, format!("bad preconditioner: {e}")))?;

    let shared_off = r.offset;
    let mut shared = Vec::with_capacity(q_shared);
    for _ in 0..q_shared {
        shared.push(r.read_u32("shared index")?);
    }
    validate_index_set(&shared, p, shared_off, "shared index set")?;

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let row_off = r.offset;
        let row = read_row(r, q, i)?;
        validate_index_set(&row.indices, p, row_off, &format!("row {i}"))?;
        if let Some(j) = row.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                row_off + (q * 4 + j * 8) as u64,
                format!("row {i} value {j} is not finite"),
            ));
        }
        rows.push(row);
    }

    let labels =
        if has_labels {
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let off = r.offset;
                labels.push(r.read_u32("label").map_err(|_| {
                    Error::format(off, format!("file truncated in labels at row {i}"))
                })?);
            }
            Some(labels)
        } else {
            None
        };

    Ok(SketchedDataset { spec, precondition, shared_indices: shared, rows, labels })
}

fn read_row<R: Read>(r: &mut CountingReader<R>, q: usize, row: usize) -> Result<RowSketch> {
    let start = r.offset;
    let truncated = |r: &CountingReader<R>| {
        Error::format(
            r.offset,
            format!("file truncated mid-row; offending row {row} starts at byte {start}"),
        )
    };
    let mut indices = Vec::with_capacity(q);
    for _ in 0..q {
        indices.push(r.read_u32("row index").map_err(|_| truncated(r))?);
    }
    let mut values = Vec::with_capacity(q);
    for _ in 0..q {
        values.push(r.read_f64("row value").map_err(|_| truncated(r))?);
    }
    Ok(RowSketch { indices, values })
}

fn validate_index_set(indices: &[u32], p: usize, offset: u64, what: &str) -> Result<()> {
    for w in indices.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::format(offset, format!("{what}: indices not strictly increasing")));
        }
    }
    if let Some(&last) = indices.last() {
        if last as usize >= p {
            return Err(Error::format(
                offset,
                format!("{what}: index {last} out of range (p={p})"),
            ));
        }
    }
    Ok(())
}

/// `Read` wrapper that tracks the absolute byte offset for error reporting.
pub struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    pub fn new(inner: R) -> Self {
        CountingReader { inner, offset: 0 }
    }

    fn read_exact_or(&mut self, buf: &mut [u8], msg: &str) -> Result<()> {
        let at = self.offset;
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(Error::format(at, msg.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn read_u8(&mut self, what: &str) -> Result<u8> {
        let mut b = [0u8; 1];
        self.read_exact_or(&mut b, &format!("truncated reading {what}"))?;
        Ok(b[0])
    }

    fn read_u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact_or(&mut b, &format!("truncated reading {what}"))?;
        Ok(u32::from_le_bytes(b))
    }

    fn read_u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact_or(&mut b, &format!("truncated reading {what}"))?;
        Ok(u64::from_le_bytes(b))
    }

    fn read_f64(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact_or(&mut b, &format!("truncated reading {what}"))?;
        Ok(f64::from_le_bytes(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::{sketch_matrix, SketchSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_dataset(labels: bool) -> SketchedDataset {
        let spec = SketchSpec { p: 13, q: 5, q_shared: 2, seed: 31 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> =
            (0..6).map(|_| (0..13).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut ds = sketch_matrix(&x, &spec).unwrap();
        if labels {
            ds.labels = Some(vec![0, 1, 2, 0, 1, 2]);
        }
        ds
    }

    fn to_bytes(ds: &SketchedDataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_sketch(&mut buf, ds).unwrap();
        buf
    }

    fn from_bytes(bytes: &[u8]) -> Result<SketchedDataset> {
        read_sketch(&mut CountingReader::new(bytes))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for labels in [false, true] {
            let ds = sample_dataset(labels);
            let bytes = to_bytes(&ds);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, ds);
            assert_eq!(to_bytes(&back), bytes, "second serialization differs");
        }
    }

    #[test]
    fn file_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.skmx");
        let ds = sample_dataset(true);
        write_sketch_file(&path, &ds).unwrap();
        let back = read_sketch_file(&path).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn rejects_bad_magic() {
        let ds = sample_dataset(false);
        let mut bytes = to_bytes(&ds);
        bytes[0] = b'X';
        match from_bytes(&bytes) {
            Err(Error::DataFormat { offset, msg }) => {
                assert_eq!(offset, 0);
                assert!(msg.contains("magic"), "{msg}");
            }
            other => panic!("expected DataFormat, got {other:?}"),
        }
    }

    #[test]
    fn truncation_mid_row_names_the_row() {
        let ds = sample_dataset(false);
        let bytes = to_bytes(&ds);
        let header = 8 + 5 * 8 + 2 + 13usize.div_ceil(8) + 2 * 4;
        let row_len = 5 * 4 + 5 * 8;
        // Cut inside row 2's value block.
        let cut = header + 2 * row_len + row_len / 2;
        match from_bytes(&bytes[..cut]) {
            Err(Error::DataFormat { offset, msg }) => {
                assert!(msg.contains("row 2"), "{msg}");
                assert!(offset as usize <= cut);
            }
            other => panic!("expected DataFormat, got {other:?}"),
        }
    }

    #[test]
    fn rejects_header_invariant_violations() {
        let ds = sample_dataset(false);
        let mut bytes = to_bytes(&ds);
        // q (offset 24) larger than p.
        bytes[24..32].copy_from_slice(&200u64.to_le_bytes());
        match from_bytes(&bytes) {
            Err(Error::DataFormat { msg, .. }) => assert!(msg.contains("invalid header"), "{msg}"),
            other => panic!("expected DataFormat, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_row_indices() {
        let ds = sample_dataset(false);
        let mut bytes = to_bytes(&ds);
        let header = 8 + 5 * 8 + 2 + 13usize.div_ceil(8) + 2 * 4;
        // Swap row 0's first two u32 indices.
        let (a, b) = (header, header + 4);
        let mut first = [0u8; 4];
        first.copy_from_slice(&bytes[a..a + 4]);
        let mut second = [0u8; 4];
        second.copy_from_slice(&bytes[b..b + 4]);
        bytes[a..a + 4].copy_from_slice(&second);
        bytes[b..b + 4].copy_from_slice(&first);
        match from_bytes(&bytes) {
            Err(Error::DataFormat { msg, .. }) => {
                assert!(msg.contains("row 0") && msg.contains("increasing"), "{msg}")
            }
            other => panic!("expected DataFormat, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_transform_kind() {
        let ds = sample_dataset(false);
        let mut bytes = to_bytes(&ds);
        bytes[48] = 9;
        match from_bytes(&bytes) {
            Err(Error::DataFormat { offset, msg }) => {
                assert_eq!(offset, 48);
                assert!(msg.contains("transform"), "{msg}");
            }
            other => panic!("expected DataFormat, got {other:?}"),
        }
    }

    #[test]
    fn seeded_random_round_trips_stay_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..20 {
            let p = rng.random_range(1..40usize);
            let q = rng.random_range(1..=p);
            let q_shared = rng.random_range(0..=q);
            let n = rng.random_range(0..12usize);
            let spec = SketchSpec { p, q, q_shared, seed: trial };
            let x: Vec<Vec<f64>> =
                (0..n).map(|_| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
            let ds = sketch_matrix(&x, &spec).unwrap();
            let bytes = to_bytes(&ds);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, ds, "trial {trial}");
            assert_eq!(to_bytes(&back), bytes, "trial {trial} bytes");
        }
    }
}
