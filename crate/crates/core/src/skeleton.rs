//! Ten-node stick-figure plans: pose integration and rendering.

use std::fmt;
use std::str::FromStr;

use image::Rgb;
use imageproc::drawing::{draw_antialiased_line_segment_mut, draw_filled_circle_mut};
use imageproc::pixelops::interpolate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::direction::{direction_to_delta, Direction};
use crate::frame::FrameImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkeletonNode {
    Head,
    LeftShoulder,
    RightShoulder,
    LeftHand,
    RightHand,
    Pelvis,
    LeftKnee,
    RightKnee,
    LeftFoot,
    RightFoot,
}

impl SkeletonNode {
    pub const ALL: [SkeletonNode; 10] = [
        SkeletonNode::Head,
        SkeletonNode::LeftShoulder,
        SkeletonNode::RightShoulder,
        SkeletonNode::LeftHand,
        SkeletonNode::RightHand,
        SkeletonNode::Pelvis,
        SkeletonNode::LeftKnee,
        SkeletonNode::RightKnee,
        SkeletonNode::LeftFoot,
        SkeletonNode::RightFoot,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SkeletonNode::Head => "head",
            SkeletonNode::LeftShoulder => "left_shoulder",
            SkeletonNode::RightShoulder => "right_shoulder",
            SkeletonNode::LeftHand => "left_hand",
            SkeletonNode::RightHand => "right_hand",
            SkeletonNode::Pelvis => "pelvis",
            SkeletonNode::LeftKnee => "left_knee",
            SkeletonNode::RightKnee => "right_knee",
            SkeletonNode::LeftFoot => "left_foot",
            SkeletonNode::RightFoot => "right_foot",
        }
    }

    pub fn index(self) -> usize {
        SkeletonNode::ALL.iter().position(|&n| n == self).expect("listed")
    }
}

impl fmt::Display for SkeletonNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown skeleton node `{0}`")]
pub struct UnknownNode(pub String);

/// Accepts `right hand`, `Right-Hand`, `right_hand`.
impl FromStr for SkeletonNode {
    type Err = UnknownNode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .join("_");
        SkeletonNode::ALL
            .into_iter()
            .find(|n| n.label() == norm)
            .ok_or_else(|| UnknownNode(s.trim().to_string()))
    }
}

/// Drawn edges.
pub const BONES: [(SkeletonNode, SkeletonNode); 10] = [
    (SkeletonNode::Head, SkeletonNode::LeftShoulder),
    (SkeletonNode::Head, SkeletonNode::RightShoulder),
    (SkeletonNode::LeftShoulder, SkeletonNode::LeftHand),
    (SkeletonNode::RightShoulder, SkeletonNode::RightHand),
    (SkeletonNode::LeftShoulder, SkeletonNode::Pelvis),
    (SkeletonNode::RightShoulder, SkeletonNode::Pelvis),
    (SkeletonNode::Pelvis, SkeletonNode::LeftKnee),
    (SkeletonNode::Pelvis, SkeletonNode::RightKnee),
    (SkeletonNode::LeftKnee, SkeletonNode::LeftFoot),
    (SkeletonNode::RightKnee, SkeletonNode::RightFoot),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SkeletonError {
    #[error("plan has {got} directions for node {node}, expected {expected}")]
    WrongLength {
        node: SkeletonNode,
        got: usize,
        expected: usize,
    },
    #[error("frame count must be at least 2, got {0}")]
    TooFewFrames(usize),
    #[error("node {node} at ({x}, {y}) lies outside the {width}x{height} frame")]
    OutOfFrame {
        node: SkeletonNode,
        x: i32,
        y: i32,
        width: u32,
        height: u32,
    },
}

/// One direction per frame transition for each of the ten nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonPlan {
    frame_count: usize,
    directions: Vec<Vec<Direction>>,
}

impl SkeletonPlan {
    pub fn still(frame_count: usize) -> Result<Self, SkeletonError> {
        if frame_count < 2 {
            return Err(SkeletonError::TooFewFrames(frame_count));
        }
        Ok(SkeletonPlan {
            frame_count,
            directions: vec![vec![Direction::Motionless; frame_count - 1]; SkeletonNode::ALL.len()],
        })
    }

    /// `directions[i]` belongs to `SkeletonNode::ALL[i]`.
    pub fn new(frame_count: usize, directions: Vec<Vec<Direction>>) -> Result<Self, SkeletonError> {
        if frame_count < 2 {
            return Err(SkeletonError::TooFewFrames(frame_count));
        }
        assert_eq!(directions.len(), SkeletonNode::ALL.len(), "one list per node");
        for (node, d) in SkeletonNode::ALL.iter().zip(&directions) {
            if d.len() != frame_count - 1 {
                return Err(SkeletonError::WrongLength {
                    node: *node,
                    got: d.len(),
                    expected: frame_count - 1,
                });
            }
        }
        Ok(SkeletonPlan {
            frame_count,
            directions,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn directions(&self, node: SkeletonNode) -> &[Direction] {
        &self.directions[node.index()]
    }

    pub fn set(&mut self, node: SkeletonNode, transition: usize, direction: Direction) {
        self.directions[node.index()][transition] = direction;
    }

    /// This plan followed by `other`, sharing the boundary frame.
    pub fn concat(&self, other: &SkeletonPlan) -> SkeletonPlan {
        SkeletonPlan {
            frame_count: self.frame_count + other.frame_count - 1,
            directions: self
                .directions
                .iter()
                .zip(&other.directions)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
        }
    }
}

/// Pixel coordinates of every node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pose {
    pub points: [(i32, i32); 10],
}

#[derive(Serialize, Deserialize)]
struct Joint {
    node: SkeletonNode,
    x: i32,
    y: i32,
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let joints: Vec<Joint> = SkeletonNode::ALL
            .iter()
            .zip(&self.points)
            .map(|(&node, &(x, y))| Joint { node, x, y })
            .collect();
        joints.serialize(s)
    }
}

impl Pose {
    pub fn get(&self, node: SkeletonNode) -> (i32, i32) {
        self.points[node.index()]
    }

    /// A standing figure centred in a `size × size` frame.
    pub fn standing(size: u32) -> Pose {
        let s = size as f64;
        let at = |fx: f64, fy: f64| ((s * fx).round() as i32, (s * fy).round() as i32);
        Pose {
            points: [
                at(0.50, 0.18),
                at(0.38, 0.32),
                at(0.62, 0.32),
                at(0.30, 0.50),
                at(0.70, 0.50),
                at(0.50, 0.55),
                at(0.42, 0.70),
                at(0.58, 0.70),
                at(0.40, 0.88),
                at(0.60, 0.88),
            ],
        }
    }
}

/// `pose_k = pose_{k−1} + δ(plan[node][k])`, clamped to the frame.
pub fn integrate_skeleton(
    plan: &SkeletonPlan,
    initial: &Pose,
    sigma: u32,
    width: u32,
    height: u32,
) -> Result<Vec<Pose>, SkeletonError> {
    for (node, &(x, y)) in SkeletonNode::ALL.iter().zip(&initial.points) {
        if x < 0 || y < 0 || x >= width as i32 || y >= height as i32 {
            return Err(SkeletonError::OutOfFrame {
                node: *node,
                x,
                y,
                width,
                height,
            });
        }
    }
    let mut poses = vec![*initial];
    for k in 0..plan.frame_count - 1 {
        let mut next = *poses.last().expect("non-empty");
        for (i, p) in next.points.iter_mut().enumerate() {
            let d = direction_to_delta(plan.directions[i][k], sigma);
            p.0 = (p.0 + d.dx).clamp(0, width as i32 - 1);
            p.1 = (p.1 + d.dy).clamp(0, height as i32 - 1);
        }
        poses.push(next);
    }
    Ok(poses)
}

const BONE_COLOR: Rgb<u8> = Rgb([170, 170, 170]);

/// Saturated disc colour per node.
pub const NODE_COLORS: [[u8; 3]; 10] = [
    [255, 40, 40],
    [255, 150, 0],
    [230, 230, 0],
    [0, 200, 60],
    [0, 220, 220],
    [40, 90, 255],
    [160, 60, 255],
    [255, 40, 200],
    [255, 110, 110],
    [110, 255, 110],
];

pub fn disc_radius(size: u32) -> i32 {
    (size as i32 / 64).max(2)
}

/// Bones as anti-aliased grey lines, then node discs, on black.
pub fn render_pose(pose: &Pose, size: u32) -> FrameImage {
    let mut img = FrameImage::new(size, size, [0, 0, 0]);
    let canvas = img.as_rgb_mut();
    for (a, b) in BONES {
        draw_antialiased_line_segment_mut(canvas, pose.get(a), pose.get(b), BONE_COLOR, interpolate);
    }
    let r = disc_radius(size);
    for (p, c) in pose.points.iter().zip(NODE_COLORS) {
        draw_filled_circle_mut(canvas, *p, r, Rgb(c));
    }
    img
}

pub fn render_skeleton_frames(poses: &[Pose], size: u32) -> Vec<FrameImage> {
    poses.iter().map(|p| render_pose(p, size)).collect()
}
