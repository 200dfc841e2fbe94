//! Raw data readers: numeric CSV and the IDX container format (MNIST's format),
//! plus the IDX writers the test suites use to build fixtures.
//!
//! CSV: one point per row; an optional first header line is detected by any field
//! failing to parse as a number; `label_col = true` consumes the final column as an
//! integer label. Malformed rows are data-format errors carrying the byte offset.
//!
//! IDX: big-endian header `[0, 0, dtype, ndims]` then `ndims` u32 dimensions, then
//! row-major data. Supported dtypes: u8 (0x08, MNIST images 0x00000803 and labels
//! 0x00000801) and f64 (0x0E). u8 elements are scaled to [0, 1] by dividing by 255
//! so pixel data arrives in the range the preconditioner expects; f64 elements pass
//! through. Reading streams one row at a time, so a file never needs to fit in
//! memory alongside its sketch.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Dense rows plus labels when the source carries them.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseData {
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<u32>>,
}

/// Read a numeric CSV file; see the module doc for the dialect.
pub fn read_csv(path: impl AsRef<Path>, label_col: bool) -> Result<DenseData> {
    read_csv_from(File::open(path)?, label_col)
}

/// [`read_csv`] over any reader.
pub fn read_csv_from<R: Read>(reader: R, label_col: bool) -> Result<DenseData> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    for item in CsvRows::new(reader, label_col) {
        let (row, label) = item?;
        rows.push(row);
        if let Some(l) = label {
            labels.push(l);
        }
    }
    if rows.is_empty() {
        return Err(Error::format(0, "csv holds no data rows".to_string()));
    }
    Ok(DenseData { rows, labels: label_col.then_some(labels) })
}

/// Streaming CSV reader: yields one `(features, label)` pair per data row without
/// holding the file. The header line, when present, is skipped silently.
pub struct CsvRows<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    label_col: bool,
    first: bool,
    width: Option<usize>,
    rows_out: usize,
}

impl CsvRows<File> {
    pub fn open(path: impl AsRef<Path>, label_col: bool) -> Result<Self> {
        Ok(CsvRows::new(File::open(path)?, label_col))
    }
}

impl<R: Read> CsvRows<R> {
    pub fn new(reader: R, label_col: bool) -> Self {
        let records = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader)
            .into_records();
        CsvRows { records, label_col, first: true, width: None, rows_out: 0 }
    }

    fn parse_record(&mut self, record: &csv::StringRecord) -> Result<(Vec<f64>, Option<u32>)> {
        let offset = record.position().map_or(0, |p| p.byte());
        if *self.width.get_or_insert(record.len()) != record.len() {
            return Err(Error::format(
                offset,
                format!(
                    "row {} has {} fields, expected {}",
                    self.rows_out,
                    record.len(),
                    self.width.unwrap()
                ),
            ));
        }
        let feature_count = record.len() - usize::from(self.label_col);
        if feature_count == 0 {
            return Err(Error::format(offset, "row has a label but no features".to_string()));
        }
        let mut row = Vec::with_capacity(feature_count);
        for field in record.iter().take(feature_count) {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(offset, format!("row {}: '{}' is not a number", self.rows_out, field))
            })?;
            if !v.is_finite() {
                return Err(Error::format(
                    offset,
                    format!("row {}: non-finite value '{}'", self.rows_out, field),
                ));
            }
            row.push(v);
        }
        let label = if self.label_col {
            let field = &record[record.len() - 1];
            Some(field.parse::<u32>().map_err(|_| {
                Error::format(
                    offset,
                    format!(
                        "row {}: label '{}' is not a non-negative integer",
                        self.rows_out, field
                    ),
                )
            })?)
        } else {
            None
        };
        self.rows_out += 1;
        Ok((row, label))
    }
}

impl<R: Read> Iterator for CsvRows<R> {
    type Item = Result<(Vec<f64>, Option<u32>)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(csv_err(e))),
            };
            if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
                continue; // blank line
            }
            let skip_header = self.first && record.iter().any(|f| f64::from_str(f).is_err());
            self.first = false;
            if skip_header {
                continue;
            }
            return Some(self.parse_record(&record));
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    Error::format(offset, format!("csv: {e}"))
}

/// Element type of an IDX file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxType {
    U8,
    F64,
}

impl IdxType {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0x08 => Some(IdxType::U8),
            0x0E => Some(IdxType::F64),
            _ => None,
        }
    }

    fn code(self) -> u8 {
        match self {
            IdxType::U8 => 0x08,
            IdxType::F64 => 0x0E,
        }
    }

    fn size(self) -> usize {
        match self {
            IdxType::U8 => 1,
            IdxType::F64 => 8,
        }
    }
}

/// Streaming IDX reader: parses the header eagerly, then yields one row per
/// `next()` as a flat `Vec<f64>` (a "row" is one slice along the first dimension).
#[derive(Debug)]
pub struct IdxReader<R> {
    inner: R,
    dtype: IdxType,
    dims: Vec<usize>,
    row_len: usize,
    rows_read: usize,
    offset: u64,
}

impl IdxReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        IdxReader::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> IdxReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut offset = 0u64;
        let mut magic = [0u8; 4];
        read_exact_at(&mut inner, &mut magic, &mut offset, "idx magic")?;
        if magic[0] != 0 || magic[1] != 0 {
            return Err(Error::format(
                0,
                format!("bad idx magic {magic:?}: first two bytes must be zero"),
            ));
        }
        let dtype = IdxType::from_code(magic[2]).ok_or_else(|| {
            Error::format(2, format!("unsupported idx element type 0x{:02x}", magic[2]))
        })?;
        let ndims = magic[3] as usize;
        if ndims == 0 || ndims > 3 {
            return Err(Error::format(3, format!("idx rank {ndims} out of range 1..=3")));
        }
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            let mut buf = [0u8; 4];
            read_exact_at(&mut inner, &mut buf, &mut offset, "idx dimension")?;
            dims.push(u32::from_be_bytes(buf) as usize);
        }
        let row_len = dims[1..].iter().product::<usize>().max(1);
        Ok(IdxReader { inner, dtype, dims, row_len, rows_read: 0, offset })
    }

    /// Number of rows (the first dimension).
    pub fn n(&self) -> usize {
        self.dims[0]
    }

    /// Flattened elements per row (1 for rank-1 files such as label files).
    pub fn row_len(&self) -> usize {
        self.row_len
    }

    pub fn dtype(&self) -> IdxType {
        self.dtype
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn read_row(&mut self) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.row_len);
        match self.dtype {
            IdxType::U8 => {
                let mut buf = vec![0u8; self.row_len];
                self.read_exact(&mut buf)?;
                row.extend(buf.iter().map(|&b| f64::from(b) / 255.0));
            }
            IdxType::F64 => {
                let mut buf = vec![0u8; self.row_len * 8];
                self.read_exact(&mut buf)?;
                row.extend(
                    buf.chunks_exact(8)
                        .map(|c| f64::from_be_bytes(c.try_into().expect("8-byte chunk"))),
                );
            }
        }
        self.rows_read += 1;
        Ok(row)
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        let what = format!("row {} of {}", self.rows_read, self.dims[0]);
        read_exact_at(&mut self.inner, buf, &mut self.offset, &what)
    }
}

impl<R: Read> Iterator for IdxReader<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.rows_read >= self.dims[0] {
            return None;
        }
        Some(self.read_row())
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    match r.read_exact(buf) {
        Ok(()) => {
            *offset += buf.len() as u64;
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Err(Error::format(*offset, format!("file truncated while reading {what}")))
        }
        Err(e) => Err(e.into()),
    }
}

/// Read a rank-1 u8 IDX file (MNIST label magic 0x00000801) as integer labels.
pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let reader = IdxReader::open(path)?;
    if reader.dtype() != IdxType::U8 || reader.dims().len() != 1 {
        return Err(Error::format(
            2,
            "label file must be a rank-1 u8 idx file (magic 0x00000801)".to_string(),
        ));
    }
    let mut labels = Vec::with_capacity(reader.n());
    for row in reader {
        // Undo the [0,1] display scaling: labels are raw bytes.
        labels.push((row?[0] * 255.0).round() as u32);
    }
    Ok(labels)
}

/// Write a u8 IDX file with the given dimensions; `bytes` must yield exactly
/// `dims.iter().product()` elements.
pub fn write_idx_u8(
    path: impl AsRef<Path>,
    dims: &[usize],
    bytes: impl IntoIterator<Item = u8>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_idx_header(&mut w, IdxType::U8, dims)?;
    let expected: usize = dims.iter().product();
    let mut count = 0usize;
    for b in bytes {
        w.write_all(&[b])?;
        count += 1;
    }
    finish_idx(w, count, expected)
}

/// Write a rank-2 f64 IDX file (`n` rows of `p`); `rows` must yield exactly `n`
/// rows of width `p`. Rows are written as they arrive, so callers can generate
/// arbitrarily large files without holding them.
pub fn write_idx_f64(
    path: impl AsRef<Path>,
    n: usize,
    p: usize,
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_idx_header(&mut w, IdxType::F64, &[n, p])?;
    let mut count = 0usize;
    for row in rows {
        if row.len() != p {
            return Err(Error::invalid(format!(
                "idx row {count} has {} values, expected {p}",
                row.len()
            )));
        }
        for v in row {
            w.write_all(&v.to_be_bytes())?;
        }
        count += 1;
    }
    finish_idx(w, count, n)
}

fn write_idx_header<W: Write>(w: &mut W, dtype: IdxType, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > 3 {
        return Err(Error::invalid("idx rank must be 1..=3"));
    }
    w.write_all(&[0, 0, dtype.code(), dims.len() as u8])?;
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::invalid("idx dimension exceeds u32"))?;
        w.write_all(&d.to_be_bytes())?;
    }
    Ok(())
}

fn finish_idx<W: Write>(mut w: BufWriter<W>, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::invalid(format!(
            "idx writer got {got} elements, header promised {expected}"
        )));
    }
    w.flush()?;
    Ok(())
}

/// Total bytes a rank-2 IDX file occupies: header plus payload. Used by the memory
/// accounting test to size its input without statting the file twice.
pub fn idx_file_size(dtype: IdxType, n: usize, p: usize) -> u64 {
    (4 + 2 * 4) as u64 + (n as u64) * (p as u64) * dtype.size() as u64
}
