//! CSV reports. Every file starts with a header and keeps a constant column count.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::guided::{EvalSummary, GuidanceReport};
use crate::train::{Dataset, TrainReport};

fn to_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_rows<W: Write>(w: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(to_io)?;
    for r in rows {
        out.write_record(&r).map_err(to_io)?;
    }
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-epoch losses; accuracy columns appear when the report has them.
pub fn write_train_report<W: Write>(w: W, r: &TrainReport) -> Result<()> {
    let with_acc = r.rows.iter().any(|x| x.val_accuracy.is_some());
    let header: &[&str] = if with_acc {
        &["epoch", "train_loss", "val_loss", "train_accuracy", "val_accuracy"]
    } else {
        &["epoch", "train_loss", "val_loss"]
    };
    write_rows(
        w,
        header,
        r.rows.iter().map(|x| {
            let mut v = vec![x.epoch.to_string(), x.train_loss.to_string(), x.val_loss.to_string()];
            if with_acc {
                v.push(opt(x.train_accuracy));
                v.push(opt(x.val_accuracy));
            }
            v
        }),
    )
}

pub fn write_guidance_report<W: Write>(w: W, r: &GuidanceReport) -> Result<()> {
    write_rows(
        w,
        &["epoch", "steps", "guidance_requests", "guide_chosen", "buffer_len", "updates", "train_loss", "mean_confidence"],
        r.epochs.iter().map(|e| {
            vec![
                e.epoch.to_string(),
                e.steps.to_string(),
                e.guidance_requests.to_string(),
                e.guide_chosen.to_string(),
                e.buffer_len.to_string(),
                e.updates.to_string(),
                e.train_loss.to_string(),
                e.mean_confidence.to_string(),
            ]
        }),
    )
}

/// One row per rollout step: `episode_id, step, q, label`.
pub fn write_trace<W: Write>(w: W, s: &EvalSummary) -> Result<()> {
    write_rows(
        w,
        &["episode_id", "step", "q", "label"],
        s.episodes.iter().enumerate().flat_map(|(e, ep)| {
            ep.steps
                .iter()
                .enumerate()
                .map(move |(i, st)| vec![e.to_string(), i.to_string(), st.confidence.to_string(), st.label.to_string()])
        }),
    )
}

/// Pose, wrench, action and label of every record, for external plotting.
pub fn write_dataset_table<W: Write>(w: W, d: &Dataset) -> Result<()> {
    let header = [
        "episode_id", "step", "px", "py", "pz", "qw", "qx", "qy", "qz", "fx", "fy", "fz", "tx", "ty", "tz", "dpx", "dpy",
        "dpz", "dow", "dox", "doy", "doz", "label",
    ];
    write_rows(
        w,
        &header,
        d.records.iter().map(|r| {
            let o = &r.observation;
            let mut v = vec![r.episode_id.to_string(), r.step.to_string()];
            v.extend(o.position.iter().map(f64::to_string));
            v.extend(o.orientation.to_array().iter().map(f64::to_string));
            v.extend(o.wrench.to_array().iter().map(f64::to_string));
            v.extend(r.action.to_array().iter().map(f64::to_string));
            v.push(r.label.to_string());
            v
        }),
    )
}

/// Creates `path` and hands it to one of the writers above.
pub fn to_file(path: &Path, f: impl FnOnce(File) -> Result<()>) -> Result<()> {
    f(super::create(path)?)
}
