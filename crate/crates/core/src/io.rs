//! Native point file format and label files.
//!
//! Point files are little-endian:
//!
//! ```text
//! "BEVP" | u32 version (=1) | u64 point count
//! then per point: f64 x | f64 y | f64 z | u8 r | u8 g | u8 b | u8 label   (28 bytes)
//! ```
//!
//! Label files are one raw `u8` per point in file order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::classes::is_valid_label;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BEVP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 16;
pub const RECORD_LEN: usize = 28;

/// One colored, labeled 3D sample.
///
/// `index` is the zero-based read order within its source cloud and is the
/// identity used for tie-breaking and for assembling remapped label vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub label: u8,
    pub index: u64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, rgb: [u8; 3], label: u8, index: u64) -> Self {
        Point {
            x,
            y,
            z,
            r: rgb[0],
            g: rgb[1],
            b: rgb[2],
            label,
            index,
        }
    }

    #[inline]
    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    fn encode(&self, buf: &mut [u8; RECORD_LEN]) {
        buf[0..8].copy_from_slice(&self.x.to_le_bytes());
        buf[8..16].copy_from_slice(&self.y.to_le_bytes());
        buf[16..24].copy_from_slice(&self.z.to_le_bytes());
        buf[24] = self.r;
        buf[25] = self.g;
        buf[26] = self.b;
        buf[27] = self.label;
    }

    fn decode(buf: &[u8], index: u64) -> Self {
        let f = |i: usize| f64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        Point {
            x: f(0),
            y: f(8),
            z: f(16),
            r: buf[24],
            g: buf[25],
            b: buf[26],
            label: buf[27],
            index,
        }
    }
}

/// Streaming reader yielding batches of at most `chunk_size` points.
///
/// Batches are yielded in file order with consecutive `index` values. After
/// the first error the iterator is fused.
pub struct PointReader {
    path: PathBuf,
    inner: BufReader<File>,
    declared: u64,
    read: u64,
    chunk_size: usize,
    done: bool,
}

/// Opens `path` and validates the header.
pub fn read_point_stream(path: impl AsRef<Path>, chunk_size: usize) -> Result<PointReader> {
    PointReader::open(path, chunk_size)
}

impl PointReader {
    pub fn open(path: impl AsRef<Path>, chunk_size: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if chunk_size == 0 {
            return Err(Error::Config("chunk_size must be positive".into()));
        }
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = BufReader::with_capacity(1 << 16, file);
        let mut header = [0u8; HEADER_LEN as usize];
        let n = read_full(&mut inner, &mut header).map_err(|e| Error::io(&path, e))?;
        if n < header.len() {
            return Err(Error::MalformedHeader {
                path,
                reason: format!("expected {HEADER_LEN} header bytes, found {n}"),
            });
        }
        if &header[0..4] != MAGIC {
            return Err(Error::MalformedHeader {
                path,
                reason: format!("bad magic {:?}", &header[0..4]),
            });
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::MalformedHeader {
                path,
                reason: format!("unsupported version {version}"),
            });
        }
        let declared = u64::from_le_bytes(header[8..16].try_into().unwrap());
        Ok(PointReader {
            path,
            inner,
            declared,
            read: 0,
            chunk_size,
            done: false,
        })
    }

    /// Point count declared in the header.
    pub fn declared_count(&self) -> u64 {
        self.declared
    }

    fn next_batch(&mut self) -> Result<Option<Vec<Point>>> {
        let remaining = self.declared - self.read;
        if remaining == 0 {
            let mut probe = [0u8; 1];
            let n = read_full(&mut self.inner, &mut probe).map_err(|e| Error::io(&self.path, e))?;
            if n > 0 {
                return Err(Error::TrailingBytes {
                    path: self.path.clone(),
                    declared: self.declared,
                });
            }
            return Ok(None);
        }
        let want = remaining.min(self.chunk_size as u64) as usize;
        let mut buf = vec![0u8; want * RECORD_LEN];
        let got = read_full(&mut self.inner, &mut buf).map_err(|e| Error::io(&self.path, e))?;
        let whole = got / RECORD_LEN;
        if got % RECORD_LEN != 0 {
            return Err(Error::TruncatedRecord {
                path: self.path.clone(),
                offset: HEADER_LEN + (self.read + whole as u64) * RECORD_LEN as u64,
            });
        }
        if whole < want {
            return Err(Error::CountMismatch {
                path: self.path.clone(),
                declared: self.declared,
                found: self.read + whole as u64,
            });
        }
        let mut batch = Vec::with_capacity(want);
        for (i, rec) in buf.chunks_exact(RECORD_LEN).enumerate() {
            let p = Point::decode(rec, self.read + i as u64);
            if !is_valid_label(p.label) {
                return Err(Error::Format {
                    path: self.path.clone(),
                    reason: format!(
                        "invalid label {} in record at byte offset {}",
                        p.label,
                        HEADER_LEN + p.index * RECORD_LEN as u64
                    ),
                });
            }
            batch.push(p);
        }
        self.read += want as u64;
        Ok(Some(batch))
    }
}

impl Iterator for PointReader {
    type Item = Result<Vec<Point>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_batch() {
            Ok(Some(b)) => Some(Ok(b)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads a whole point file into memory.
pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let reader = PointReader::open(path, 1 << 16)?;
    let mut out = Vec::with_capacity(reader.declared_count().min(1 << 24) as usize);
    for batch in reader {
        out.extend(batch?);
    }
    Ok(out)
}

/// Incremental point file writer. The header count is patched on `finish`.
pub struct PointWriter {
    path: PathBuf,
    inner: BufWriter<File>,
    count: u64,
}

impl PointWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = BufWriter::new(file);
        let mut header = [0u8; HEADER_LEN as usize];
        header[0..4].copy_from_slice(MAGIC);
        header[4..8].copy_from_slice(&VERSION.to_le_bytes());
        inner.write_all(&header).map_err(|e| Error::io(&path, e))?;
        Ok(PointWriter {
            path,
            inner,
            count: 0,
        })
    }

    pub fn write(&mut self, p: &Point) -> Result<()> {
        if !is_valid_label(p.label) {
            return Err(Error::InvalidLabel {
                label: p.label,
                position: self.count as usize,
            });
        }
        let mut rec = [0u8; RECORD_LEN];
        p.encode(&mut rec);
        self.inner
            .write_all(&rec)
            .map_err(|e| Error::io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64> {
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        self.inner.seek(SeekFrom::Start(8)).map_err(io)?;
        self.inner.write_all(&self.count.to_le_bytes()).map_err(io)?;
        self.inner.flush().map_err(io)?;
        Ok(self.count)
    }
}

/// Writes `points` in slice order. Stored `index` values are not written;
/// they are reassigned from file order on read.
pub fn write_points(path: impl AsRef<Path>, points: &[Point]) -> Result<()> {
    let mut w = PointWriter::create(path)?;
    for p in points {
        w.write(p)?;
    }
    w.finish()?;
    Ok(())
}

/// Writes one byte per label. Fails before touching the file when
/// `labels.len()` differs from `expected_count`.
pub fn write_labels(path: impl AsRef<Path>, labels: &[u8], expected_count: u64) -> Result<()> {
    if labels.len() as u64 != expected_count {
        return Err(Error::LengthMismatch {
            expected: expected_count,
            actual: labels.len() as u64,
        });
    }
    if let Some(position) = labels.iter().position(|&l| !is_valid_label(l)) {
        return Err(Error::InvalidLabel {
            label: labels[position],
            position,
        });
    }
    let path = path.as_ref();
    std::fs::write(path, labels).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let labels = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if let Some(position) = labels.iter().position(|&l| !is_valid_label(l)) {
        return Err(Error::InvalidLabel {
            label: labels[position],
            position,
        });
    }
    Ok(labels)
}
