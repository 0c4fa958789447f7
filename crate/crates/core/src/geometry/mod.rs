//! Oriented BEV boxes and the output-space machinery built on them:
//! rotated IoU, optimal matching, the consensus difference measure and
//! average precision.

mod assignment;
mod consensus;
mod precision;
mod rotated_box;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{hungarian_match, iou_matrix, solve_assignment, BoxMatch};
pub use consensus::{consensus, difference_measure, is_consensus, ConsensusConfig, DifferenceMode, FovRegion};
pub use precision::average_precision;
pub use rotated_box::{intersection_area, intersection_polygon, normalize_yaw, rotated_iou, OrientedBox, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate box: length {length}, width {width}")]
    DegenerateBox { length: f64, width: f64 },
    #[error("non-finite box coordinate")]
    NonFinite,
    #[error("invalid consensus config: {0}")]
    InvalidConfig(String),
    #[error("malformed detection set JSON: {0}")]
    Json(String),
}

/// One perception output: the boxes produced for a frame.
///
/// JSON form: `{"frame_id": 3, "boxes": [{"x":..,"y":..,"l":..,"w":..,"yaw":..,"score":..}]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_id: u64,
    pub boxes: Vec<OrientedBox>,
}

impl DetectionSet {
    pub fn new(frame_id: u64, boxes: Vec<OrientedBox>) -> Self {
        Self { frame_id, boxes }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.boxes.iter().try_for_each(OrientedBox::validate)
    }

    /// Boxes whose centre lies inside `fov`, in original order.
    pub fn restricted_to(&self, fov: FovRegion) -> DetectionSet {
        DetectionSet {
            frame_id: self.frame_id,
            boxes: self
                .boxes
                .iter()
                .filter(|b| b.center_within(fov.center_x, fov.center_y, fov.radius))
                .copied()
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("detection sets always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let set: DetectionSet = serde_json::from_str(text).map_err(|e| GeometryError::Json(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }
}
