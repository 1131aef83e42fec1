//! On-disk formats: demonstration datasets, checkpoints, run configs and CSV reports.

mod checkpoint;
mod config;
mod dataset;
pub mod report;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use config::{EvalConfig, RunConfig};
pub use dataset::{load_dataset, read_dataset, save_dataset, write_dataset, DATASET_VERSION};

use std::fs::File;
use std::io::{self, Read};
use std::path::Path;

use crate::error::{Error, Result};

fn eof_as_corrupt(e: io::Error, what: &str) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Corrupt(format!("{what}: file is truncated"))
    } else {
        Error::Io(e)
    }
}

/// Little-endian primitive reader that reports short files as corruption.
struct LeReader<R> {
    inner: R,
    what: &'static str,
}

impl<R: Read> LeReader<R> {
    fn new(inner: R, what: &'static str) -> Self {
        Self { inner, what }
    }

    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| eof_as_corrupt(e, self.what))?;
        Ok(b)
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| eof_as_corrupt(e, self.what))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn f64s<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.f64()?;
        }
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 6]) -> Result<()> {
        let m = self.bytes::<6>()?;
        if &m != expected {
            return Err(Error::Corrupt(format!("{}: bad magic {:?}", self.what, String::from_utf8_lossy(&m))));
        }
        Ok(())
    }

    /// Fails unless the stream is exhausted.
    fn finish(mut self) -> Result<()> {
        let mut extra = [0u8; 1];
        match self.inner.read(&mut extra)? {
            0 => Ok(()),
            _ => Err(Error::Corrupt(format!("{}: trailing bytes after payload", self.what))),
        }
    }
}

fn with_path(e: io::Error, path: &Path) -> io::Error {
    io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> io::Result<File> {
    File::open(path).map_err(|e| with_path(e, path))
}

fn create(path: &Path) -> io::Result<File> {
    File::create(path).map_err(|e| with_path(e, path))
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}
