use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{put_f64s, LeReader};
use crate::error::{Error, Result};
use crate::geometry::{Action, Quaternion};
use crate::sim::{Image, Observation, Wrench};
use crate::train::{Dataset, Record};

const MAGIC: &[u8; 6] = b"USDEMO";
pub const DATASET_VERSION: u16 = 1;

fn image_dims(d: &Dataset) -> Result<(usize, usize)> {
    let Some(first) = d.records.first() else { return Ok((0, 0)) };
    let (h, w) = (first.observation.image.height, first.observation.image.width);
    for r in &d.records {
        let im = &r.observation.image;
        if im.height != h || im.width != w || im.pixels.len() != h * w {
            return Err(Error::ShapeMismatch(format!(
                "record {}/{} has a {}x{} image, expected {h}x{w}",
                r.episode_id, r.step, im.height, im.width
            )));
        }
    }
    Ok((h, w))
}

pub fn write_dataset<W: Write>(mut w: W, d: &Dataset) -> Result<()> {
    let (h, wd) = image_dims(d)?;
    let mut buf = Vec::with_capacity(32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(wd as u32).to_le_bytes());
    buf.extend_from_slice(&(d.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(d.episode_count() as u32).to_le_bytes());
    w.write_all(&buf)?;
    for r in &d.records {
        buf.clear();
        buf.extend_from_slice(&r.episode_id.to_le_bytes());
        buf.extend_from_slice(&r.step.to_le_bytes());
        for p in &r.observation.image.pixels {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        put_f64s(&mut buf, &r.observation.position);
        put_f64s(&mut buf, &r.observation.orientation.to_array());
        put_f64s(&mut buf, &r.observation.wrench.to_array());
        put_f64s(&mut buf, &r.action.to_array());
        buf.push(r.label);
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: R) -> Result<Dataset> {
    let mut r = LeReader::new(r, "dataset");
    r.magic(MAGIC)?;
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::Corrupt(format!("dataset: unsupported version {version}")));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let n = r.u64()?;
    let episodes = r.u32()? as usize;
    let mut records = Vec::new();
    for _ in 0..n {
        let episode_id = r.u32()?;
        let step = r.u32()?;
        let mut pixels = Vec::with_capacity(h * w);
        for _ in 0..h * w {
            pixels.push(r.f32()?);
        }
        let position = r.f64s::<3>()?;
        let orientation = Quaternion::from_array(r.f64s::<4>()?);
        let wrench = Wrench::from_slice(&r.f64s::<6>()?);
        let action = Action::from_slice(&r.f64s::<7>()?);
        let label = r.u8()?;
        if label > 1 {
            return Err(Error::Corrupt(format!("dataset: label {label} is not 0 or 1")));
        }
        let observation = Observation { image: Image { height: h, width: w, pixels }, position, orientation, wrench };
        records.push(Record { episode_id, step, observation, action, label });
    }
    r.finish()?;
    let d = Dataset { records };
    if d.episode_count() != episodes {
        return Err(Error::Corrupt(format!(
            "dataset: header lists {episodes} episodes, records hold {}",
            d.episode_count()
        )));
    }
    Ok(d)
}

pub fn save_dataset(path: &Path, d: &Dataset) -> Result<()> {
    write_dataset(BufWriter::new(super::create(path)?), d)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(BufReader::new(super::open(path)?))
}
