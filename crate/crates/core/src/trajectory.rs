//! Line-delimited JSON trajectory files.
//!
//! ```text
//! {"format":"sixpack-traj/1","method":"6pack","category":"bowl","sequences":2}
//! {"sequence":0,"frames":100}
//! {"frame":0,"rotation":[..9 row-major..],"translation":[x,y,z],"valid":true}
//! ...
//! ```
//!
//! Each sequence header is followed by exactly `frames` pose lines with
//! consecutive frame indices starting at 0.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Rotation, Vec3};
use crate::synthdata::io::{write_line, Lines};
use crate::tracker::TrackedPose;

pub const TRAJECTORY_FORMAT: &str = "sixpack-traj/1";

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub method: String,
    pub category: String,
    pub sequences: Vec<Vec<TrackedPose>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileHeader {
    format: String,
    method: String,
    category: String,
    sequences: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceHeader {
    sequence: usize,
    frames: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    frame: usize,
    rotation: [f64; 9],
    translation: [f64; 3],
    valid: bool,
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_line(
        &mut w,
        &FileHeader {
            format: TRAJECTORY_FORMAT.into(),
            method: traj.method.clone(),
            category: traj.category.clone(),
            sequences: traj.sequences.len(),
        },
    )?;
    for (s, seq) in traj.sequences.iter().enumerate() {
        write_line(&mut w, &SequenceHeader { sequence: s, frames: seq.len() })?;
        for (i, p) in seq.iter().enumerate() {
            write_line(
                &mut w,
                &PoseRecord {
                    frame: i,
                    rotation: p.pose.rotation.to_row_major(),
                    translation: p.pose.translation.into(),
                    valid: p.valid,
                },
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let mut lines = Lines { inner: BufReader::new(File::open(path)?), line: 0 };
    let first: serde_json::Value = lines.next()?;
    let found = first.get("format").and_then(|v| v.as_str()).unwrap_or("").to_string();
    if found != TRAJECTORY_FORMAT {
        return Err(Error::FormatVersionMismatch { expected: TRAJECTORY_FORMAT.into(), found });
    }
    let header: FileHeader = serde_json::from_value(first).map_err(|e| Error::Format(e.to_string()))?;
    let mut sequences = Vec::with_capacity(header.sequences);
    for s in 0..header.sequences {
        let sh: SequenceHeader = lines.next()?;
        if sh.sequence != s {
            return Err(Error::Format(format!("line {}: expected sequence {s}", lines.line)));
        }
        let mut poses = Vec::with_capacity(sh.frames);
        for i in 0..sh.frames {
            let r: PoseRecord = lines.next()?;
            if r.frame != i {
                return Err(Error::Format(format!("line {}: expected frame {i}", lines.line)));
            }
            let rotation = Rotation::from_row_major(&r.rotation)?;
            poses.push(TrackedPose { pose: Pose::new(rotation, Vec3::from(r.translation)), valid: r.valid });
        }
        sequences.push(poses);
    }
    Ok(Trajectory { method: header.method, category: header.category, sequences })
}
