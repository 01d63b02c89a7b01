//! On-disk cache of the exact coefficient table of `F`.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic[8] = "CMTRACEQ"
//! version: u32
//! valuation: i64
//! truncation_order: i64
//! count: u32
//! count x { sign: u8, num_len: u32, num: [u8], den_len: u32, den: [u8] }
//! sha256 of everything above: [u8; 32]
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cmtrace_core::maass::{CoefficientSource, PartitionFormSource};
use cmtrace_core::QSeries;
use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"CMTRACEQ";
pub const FORMAT_VERSION: u32 = 1;
pub const FILE_NAME: &str = "f_coefficients.bin";

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a coefficient cache (bad magic)")]
    BadMagic,
    #[error("cache format version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("cache checksum mismatch")]
    Checksum,
    #[error("cache file truncated or malformed")]
    Malformed,
}

pub fn encode(series: &QSeries) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&series.valuation().to_le_bytes());
    out.extend_from_slice(&series.truncation_order().to_le_bytes());
    let dense = series.dense();
    out.extend_from_slice(&(dense.len() as u32).to_le_bytes());
    for c in &dense {
        let (sign, num) = c.numer().to_bytes_le();
        out.push(u8::from(sign == Sign::Minus));
        put_bytes(&mut out, &num);
        put_bytes(&mut out, &c.denom().to_biguint().unwrap().to_bytes_le());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CacheError> {
        let end = self.at.checked_add(n).ok_or(CacheError::Malformed)?;
        let s = self.buf.get(self.at..end).ok_or(CacheError::Malformed)?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CacheError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, CacheError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], CacheError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

pub fn decode(bytes: &[u8]) -> Result<QSeries, CacheError> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(CacheError::Malformed);
    }
    if &bytes[..8] != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != FORMAT_VERSION {
        return Err(CacheError::Version { found });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CacheError::Checksum);
    }
    let mut r = Reader { buf: body, at: 12 };
    let valuation = r.i64()?;
    let truncation = r.i64()?;
    let count = r.u32()? as usize;
    let mut coeffs = Vec::with_capacity(count);
    for _ in 0..count {
        let neg = match r.take(1)?[0] {
            0 => false,
            1 => true,
            _ => return Err(CacheError::Malformed),
        };
        let num = BigUint::from_bytes_le(r.bytes()?);
        let den = BigUint::from_bytes_le(r.bytes()?);
        if den == BigUint::default() {
            return Err(CacheError::Malformed);
        }
        let sign = if neg { Sign::Minus } else { Sign::Plus };
        coeffs.push(BigRational::new(
            BigInt::from_biguint(sign, num),
            BigInt::from_biguint(Sign::Plus, den),
        ));
    }
    if r.at != body.len() || valuation + count as i64 > truncation {
        return Err(CacheError::Malformed);
    }
    Ok(QSeries::new(valuation, coeffs, truncation))
}

/// Write atomically: temp file in the same directory, then rename.
pub fn cache_write(dir: &Path, series: &QSeries) -> Result<PathBuf, CacheError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(FILE_NAME);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&encode(series))?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| CacheError::Io(e.error))?;
    Ok(path)
}

pub fn cache_read(dir: &Path) -> Result<QSeries, CacheError> {
    decode(&fs::read(dir.join(FILE_NAME))?)
}

/// Coefficient source that seeds itself from the cache and writes back
/// whenever the table grows.
pub struct DiskCachedSource {
    dir: PathBuf,
    inner: PartitionFormSource,
}

impl DiskCachedSource {
    pub fn open(dir: &Path) -> Self {
        let inner = match cache_read(dir) {
            Ok(table) => {
                log::info!(
                    "coefficient cache hit: order {} from {}",
                    table.truncation_order(),
                    dir.display()
                );
                PartitionFormSource::with_table(table)
            }
            Err(CacheError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                log::info!("coefficient cache empty at {}", dir.display());
                PartitionFormSource::new()
            }
            Err(e) => {
                log::warn!("ignoring coefficient cache at {}: {e}; rebuilding", dir.display());
                PartitionFormSource::new()
            }
        };
        DiskCachedSource {
            dir: dir.to_path_buf(),
            inner,
        }
    }

    pub fn into_arc(self) -> Arc<dyn CoefficientSource> {
        Arc::new(self)
    }
}

impl CoefficientSource for DiskCachedSource {
    fn coefficients(&self, order: i64) -> cmtrace_core::Result<Arc<QSeries>> {
        let before = self.inner.current().map_or(0, |t| t.truncation_order());
        let table = self.inner.coefficients(order)?;
        if table.truncation_order() > before {
            match cache_write(&self.dir, &table) {
                Ok(p) => log::info!(
                    "coefficient cache written: order {} to {}",
                    table.truncation_order(),
                    p.display()
                ),
                Err(e) => log::warn!("could not write coefficient cache: {e}"),
            }
        }
        Ok(table)
    }
}
