//! BVH motion-capture files: parsing, forward kinematics, serialization.
//!
//! The HIERARCHY section becomes a flat, topologically ordered [`Skeleton`];
//! the MOTION section becomes [`ChannelFrames`] holding raw file values
//! (degrees for rotations, file units for translations). Forward kinematics
//! turns both into a [`PoseSequence`] of 3D joint positions, which the rest
//! of the crate treats as the marker set.

mod fk;
mod parse;
mod write;

pub use fk::forward_kinematics;
pub use parse::parse_bvh;
pub use write::serialize_bvh;

use crate::Tensor2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BvhError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("channel mismatch ({what}): declared {declared}, found {actual}")]
    ChannelMismatch {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("motion section declares zero frames")]
    EmptyMotion,
}

/// One degree of freedom of a joint, in the order declared by the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn from_keyword(s: &str) -> Option<Channel> {
        Some(match s {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            Channel::Xrotation | Channel::Yrotation | Channel::Zrotation
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    /// Index of the parent joint; `None` only for the root (joint 0).
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    pub channels: Vec<Channel>,
    pub end_site: Option<[f64; 3]>,
}

/// Parsed joint hierarchy in file order (parents always precede children).
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joints: Vec<Joint>,
}

impl Skeleton {
    pub(crate) fn new(joints: Vec<Joint>) -> Self {
        debug_assert!(joints
            .iter()
            .enumerate()
            .all(|(i, j)| j.parent.map_or(i == 0, |p| p < i)));
        Skeleton { joints }
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn total_channels(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    pub fn marker_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    /// Children indices per joint, derived from the parent links.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.joints.len()];
        for (i, j) in self.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                ch[p].push(i);
            }
        }
        ch
    }
}

/// Raw per-frame channel values from the MOTION section.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrames {
    pub frame_time: f64,
    /// F × C matrix; C equals the skeleton's total channel count.
    pub values: Tensor2,
}

impl ChannelFrames {
    pub fn frame_count(&self) -> usize {
        self.values.rows()
    }
}

/// A sequence of 3D marker positions: one row per frame, columns interleaved
/// as (x, y, z) per marker.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub marker_names: Vec<String>,
    pub frame_rate: f64,
    pub unit_scale_to_cm: f64,
    pub positions: Tensor2,
}

impl PoseSequence {
    pub fn marker_count(&self) -> usize {
        self.marker_names.len()
    }

    pub fn frame_count(&self) -> usize {
        self.positions.rows()
    }

    pub fn dims(&self) -> usize {
        self.positions.cols()
    }

    /// (x, y, z) of one marker in one frame.
    pub fn marker(&self, frame: usize, marker: usize) -> [f64; 3] {
        let row = self.positions.row(frame);
        [row[3 * marker], row[3 * marker + 1], row[3 * marker + 2]]
    }
}
