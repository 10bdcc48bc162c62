//! Line-delimited JSON dataset files.
//!
//! ```text
//! {"format":"sixpack-synth/1","category":"bowl","seed":7,"sequences":2}
//! {"category":"bowl","instance_id":3,"seed":11,"frames":100}
//! {"index":0,"rotation":[..9 row-major..],"translation":[x,y,z],"points":[[x,y,z,r,g,b],..],"sources":[12,null,..]}
//! ...
//! ```
//!
//! Each sequence header is followed by exactly `frames` frame lines. Floats
//! are written in shortest round-trip form, so loading reproduces the saved
//! values bitwise.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Frame, Sequence};
use crate::encode::ObservedPoint;
use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};

pub const DATASET_FORMAT: &str = "sixpack-synth/1";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub category: String,
    pub seed: u64,
    pub sequences: Vec<Sequence>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    format: String,
    category: String,
    seed: u64,
    sequences: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceHeader {
    category: String,
    instance_id: u64,
    seed: u64,
    frames: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    index: usize,
    rotation: [f64; 9],
    translation: [f64; 3],
    points: Vec<[f64; 6]>,
    sources: Vec<Option<u32>>,
}

pub(crate) fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_line(
        &mut w,
        &FileHeader {
            format: DATASET_FORMAT.into(),
            category: dataset.category.clone(),
            seed: dataset.seed,
            sequences: dataset.sequences.len(),
        },
    )?;
    for seq in &dataset.sequences {
        write_line(
            &mut w,
            &SequenceHeader {
                category: seq.category.clone(),
                instance_id: seq.instance_id,
                seed: seq.seed,
                frames: seq.frames.len(),
            },
        )?;
        for f in &seq.frames {
            write_line(
                &mut w,
                &FrameRecord {
                    index: f.index,
                    rotation: f.gt_pose.rotation.to_row_major(),
                    translation: f.gt_pose.translation.into(),
                    points: f
                        .points
                        .iter()
                        .map(|p| {
                            let x = p.position;
                            [x.x, x.y, x.z, p.color[0], p.color[1], p.color[2]]
                        })
                        .collect(),
                    sources: f.sources.clone(),
                },
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) struct Lines<R> {
    pub(crate) inner: R,
    pub(crate) line: usize,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn next<T: for<'de> Deserialize<'de>>(&mut self) -> Result<T> {
        let mut buf = String::new();
        if self.inner.read_line(&mut buf)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "dataset file is truncated").into());
        }
        self.line += 1;
        if !buf.ends_with('\n') {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "dataset file ends mid-record").into());
        }
        serde_json::from_str(&buf).map_err(|e| Error::Format(format!("line {}: {e}", self.line)))
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut lines = Lines { inner: BufReader::new(File::open(path)?), line: 0 };
    let first: serde_json::Value = lines.next()?;
    let found = first.get("format").and_then(|v| v.as_str()).unwrap_or("").to_string();
    if found != DATASET_FORMAT {
        return Err(Error::FormatVersionMismatch { expected: DATASET_FORMAT.into(), found });
    }
    let header: FileHeader = serde_json::from_value(first).map_err(|e| Error::Format(e.to_string()))?;
    let mut sequences = Vec::with_capacity(header.sequences);
    for _ in 0..header.sequences {
        let sh: SequenceHeader = lines.next()?;
        let mut frames = Vec::with_capacity(sh.frames);
        for _ in 0..sh.frames {
            let r: FrameRecord = lines.next()?;
            if r.points.len() != r.sources.len() {
                return Err(Error::Format(format!("line {}: points and sources differ in length", lines.line)));
            }
            frames.push(Frame {
                index: r.index,
                gt_pose: Pose::new(Rotation::from_row_major(&r.rotation)?, Vec3::from(r.translation)),
                points: r
                    .points
                    .iter()
                    .map(|p| ObservedPoint::new(Vec3::new(p[0], p[1], p[2]), [p[3], p[4], p[5]]))
                    .collect(),
                sources: r.sources,
            });
        }
        sequences.push(Sequence { category: sh.category, instance_id: sh.instance_id, seed: sh.seed, frames });
    }
    let mut rest = String::new();
    if lines.inner.read_line(&mut rest)? != 0 && !rest.trim().is_empty() {
        return Err(Error::Format("trailing data after the last sequence".into()));
    }
    Ok(Dataset { category: header.category, seed: header.seed, sequences })
}
