use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{put_f64s, LeReader};
use crate::error::{Error, Result};
use crate::policy::{ArchConfig, PolicyParams, Stages, Standardizer};

const MAGIC: &[u8; 6] = b"USCKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

fn arch_fields(a: &ArchConfig) -> [usize; 10] {
    [
        a.image_height,
        a.image_width,
        a.conv1_channels,
        a.conv2_channels,
        a.kernel,
        a.stride,
        a.feature_dim,
        a.encoder_hidden,
        a.action_hidden,
        a.quality_hidden,
    ]
}

fn arch_from_fields(f: [usize; 10]) -> ArchConfig {
    ArchConfig {
        image_height: f[0],
        image_width: f[1],
        conv1_channels: f[2],
        conv2_channels: f[3],
        kernel: f[4],
        stride: f[5],
        feature_dim: f[6],
        encoder_hidden: f[7],
        action_hidden: f[8],
        quality_hidden: f[9],
    }
}

fn standardizers(p: &PolicyParams) -> [&Standardizer; 3] {
    [&p.norm.pose, &p.norm.wrench, &p.norm.action]
}

fn payload(p: &PolicyParams) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 * p.param_count() + 512);
    for g in p.groups() {
        for t in &g.tensors {
            put_f64s(&mut buf, &t.data);
        }
    }
    for s in standardizers(p) {
        put_f64s(&mut buf, &s.mean);
        put_f64s(&mut buf, &s.std);
    }
    buf
}

fn payload_len(p: &PolicyParams) -> usize {
    8 * (p.param_count() + standardizers(p).iter().map(|s| 2 * s.mean.len()).sum::<usize>())
}

pub fn write_checkpoint<W: Write>(mut w: W, p: &PolicyParams) -> Result<()> {
    let body = payload(p);
    let mut head = Vec::with_capacity(64);
    head.extend_from_slice(MAGIC);
    head.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in arch_fields(&p.arch) {
        head.extend_from_slice(&(v as u32).to_le_bytes());
    }
    head.push(u8::from(p.stages.bc_trained) | u8::from(p.stages.quality_trained) << 1);
    head.extend_from_slice(&(p.param_count() as u64).to_le_bytes());
    head.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    w.write_all(&head)?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint, refusing one written for a different architecture.
pub fn read_checkpoint<R: Read>(r: R, expected: &ArchConfig) -> Result<PolicyParams> {
    let mut r = LeReader::new(r, "checkpoint");
    r.magic(MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Corrupt(format!("checkpoint: unsupported version {version}")));
    }
    let mut fields = [0usize; 10];
    for f in &mut fields {
        *f = r.u32()? as usize;
    }
    let arch = arch_from_fields(fields);
    if &arch != expected {
        return Err(Error::ConfigMismatch(format!("checkpoint architecture {arch:?} differs from configured {expected:?}")));
    }
    let flags = r.u8()?;
    if flags > 3 {
        return Err(Error::Corrupt(format!("checkpoint: unknown stage flags {flags:#04x}")));
    }
    let count = r.u64()?;
    let stored = r.u32()?;

    let mut p = PolicyParams::init(arch, 0)?;
    if count != p.param_count() as u64 {
        return Err(Error::Corrupt(format!("checkpoint: {count} parameters, architecture needs {}", p.param_count())));
    }
    let mut body = vec![0u8; payload_len(&p)];
    r.fill(&mut body)?;
    r.finish()?;
    let computed = crc32fast::hash(&body);
    if computed != stored {
        return Err(Error::ChecksumMismatch { stored, computed });
    }

    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for net in p.networks_mut() {
        for t in &mut net.params.tensors {
            t.data.iter_mut().for_each(|v| *v = values.next().expect("payload sized from architecture"));
        }
    }
    for s in [&mut p.norm.pose, &mut p.norm.wrench, &mut p.norm.action] {
        s.mean.iter_mut().for_each(|v| *v = values.next().expect("payload sized from architecture"));
        s.std.iter_mut().for_each(|v| *v = values.next().expect("payload sized from architecture"));
    }
    p.stages = Stages { bc_trained: flags & 1 != 0, quality_trained: flags & 2 != 0 };
    Ok(p)
}

pub fn save_checkpoint(path: &Path, p: &PolicyParams) -> Result<()> {
    write_checkpoint(BufWriter::new(super::create(path)?), p)
}

pub fn load_checkpoint(path: &Path, expected: &ArchConfig) -> Result<PolicyParams> {
    read_checkpoint(BufReader::new(super::open(path)?), expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ArchConfig {
        ArchConfig { image_height: 16, image_width: 16, feature_dim: 8, ..ArchConfig::default() }
    }

    fn sample() -> PolicyParams {
        let mut p = PolicyParams::init(small(), 3).unwrap();
        p.norm.action.mean[2] = -1.5e-7;
        p.norm.wrench.std[5] = 42.0;
        p.stages.bc_trained = true;
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &p).unwrap();
        let q = read_checkpoint(bytes.as_slice(), &small()).unwrap();
        assert_eq!(q, p);
        let mut again = Vec::new();
        write_checkpoint(&mut again, &q).unwrap();
        assert_eq!(again, bytes);
    }

    #[test]
    fn flipped_payload_bit_fails_checksum() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &sample()).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01;
        assert!(matches!(read_checkpoint(bytes.as_slice(), &small()), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn architecture_mismatch_is_refused() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &sample()).unwrap();
        let other = ArchConfig { feature_dim: 16, ..small() };
        assert!(matches!(read_checkpoint(bytes.as_slice(), &other), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &sample()).unwrap();
        bytes.truncate(bytes.len() / 2);
        assert!(matches!(read_checkpoint(bytes.as_slice(), &small()), Err(Error::Corrupt(_))));
    }
}
