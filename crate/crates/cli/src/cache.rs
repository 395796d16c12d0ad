//! On-disk cache of chain batches.
//!
//! File layout: one JSON header line, then `n * d` little-endian f64 values
//! in row-major order. Files are named by config digest, seed and chain
//! count, and the header is checked again on load.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use ald_core::ChainBatch;
use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

const MAGIC: &str = "ald-chain-batch-v1";

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    magic: String,
    config_digest: String,
    seed: u64,
    n: usize,
    d: usize,
    steps_run: usize,
}

#[derive(Debug, Clone)]
pub struct BatchCache {
    dir: PathBuf,
}

impl BatchCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        BatchCache { dir: dir.into() }
    }

    pub fn path(&self, digest: &str, seed: u64, n: usize) -> PathBuf {
        self.dir.join(format!("{digest}-{seed:016x}-{n}.bin"))
    }

    /// The cached batch, or `None` when no file exists.
    pub fn load(&self, digest: &str, seed: u64, n: usize) -> Result<Option<ChainBatch>> {
        let path = self.path(digest, seed, n);
        if !path.exists() {
            return Ok(None);
        }
        let batch = read_batch(&path).with_context(|| format!("reading cached batch {}", path.display()))?;
        if batch.config_digest != digest || batch.seed != seed || batch.samples.nrows() != n {
            bail!("cached batch {} does not match its name", path.display());
        }
        Ok(Some(batch))
    }

    pub fn store(&self, batch: &ChainBatch) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.path(&batch.config_digest, batch.seed, batch.samples.nrows());
        // write then rename, so a crash never leaves a truncated batch behind
        let tmp = path.with_extension("tmp");
        write_batch(batch, &tmp)?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }
}

pub fn write_batch(batch: &ChainBatch, path: &Path) -> Result<()> {
    let (n, d) = batch.samples.dim();
    let header = Header {
        magic: MAGIC.into(),
        config_digest: batch.config_digest.clone(),
        seed: batch.seed,
        n,
        d,
        steps_run: batch.steps_run,
    };
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in batch.samples.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<ChainBatch> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end()).context("bad header")?;
    if header.magic != MAGIC {
        bail!("unknown format {:?}", header.magic);
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.n * header.d * 8 {
        bail!("expected {} bytes of samples, found {}", header.n * header.d * 8, bytes.len());
    }
    let values: Vec<f64> =
        bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(ChainBatch {
        samples: Array2::from_shape_vec((header.n, header.d), values)?,
        seed: header.seed,
        config_digest: header.config_digest,
        steps_run: header.steps_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> ChainBatch {
        ChainBatch {
            samples: Array2::from_shape_fn((3, 2), |(i, j)| i as f64 - 0.1 * j as f64 + 1e-300),
            seed: 42,
            config_digest: "abc".into(),
            steps_run: 19999,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BatchCache::new(dir.path());
        assert!(cache.load("abc", 42, 3).unwrap().is_none());
        cache.store(&batch()).unwrap();
        assert_eq!(cache.load("abc", 42, 3).unwrap().unwrap(), batch());
        assert!(cache.load("abc", 43, 3).unwrap().is_none());
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = BatchCache::new(dir.path());
        let path = cache.store(&batch()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(cache.load("abc", 42, 3).is_err());
    }
}
