use serde::{Deserialize, Serialize};

use super::{hungarian_match, DetectionSet, GeometryError};

/// A disc in the BEV plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovRegion {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceMode {
    /// Normalized matched-IoU dissimilarity over the full sets.
    Jaccard,
    /// Same formula, restricted to boxes centred in the ego field of view.
    EgoFov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    pub epsilon: f64,
    pub mode: DifferenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov: Option<FovRegion>,
    #[serde(default = "default_match_min_iou")]
    pub match_min_iou: f64,
}

fn default_match_min_iou() -> f64 {
    0.1
}

impl ConsensusConfig {
    pub fn jaccard(epsilon: f64) -> Self {
        Self { epsilon, mode: DifferenceMode::Jaccard, fov: None, match_min_iou: default_match_min_iou() }
    }

    pub fn ego_fov(epsilon: f64, fov: FovRegion) -> Self {
        Self { epsilon, mode: DifferenceMode::EgoFov, fov: Some(fov), match_min_iou: default_match_min_iou() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(GeometryError::InvalidConfig(format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        if !(0.0..1.0).contains(&self.match_min_iou) {
            return Err(GeometryError::InvalidConfig(format!("match_min_iou {} not in [0, 1)", self.match_min_iou)));
        }
        match (self.mode, self.fov) {
            (DifferenceMode::EgoFov, None) => Err(GeometryError::InvalidConfig("ego_fov mode needs a fov region".into())),
            (_, Some(fov)) if fov.radius.is_nan() || fov.radius <= 0.0 => {
                Err(GeometryError::InvalidConfig(format!("fov radius {} must be positive", fov.radius)))
            }
            _ => Ok(()),
        }
    }
}

fn jaccard_difference(ys: &DetectionSet, y0: &DetectionSet, match_min_iou: f64) -> Result<f64, GeometryError> {
    if ys.boxes.is_empty() && y0.boxes.is_empty() {
        return Ok(0.0);
    }
    let matched: f64 = hungarian_match(ys, y0, match_min_iou)?.iter().map(|m| m.iou).sum();
    let denom = ys.len().max(y0.len()).max(1) as f64;
    Ok((1.0 - matched / denom).clamp(0.0, 1.0))
}

/// Dissimilarity `d` in `[0, 1]` between a collaborative output `ys` and a
/// reference `y0`: one minus the Hungarian-matched IoU mass, normalized by
/// the larger set.
///
/// Two empty sets are identical and give `d = 0` in both modes.
pub fn difference_measure(ys: &DetectionSet, y0: &DetectionSet, cfg: &ConsensusConfig) -> Result<f64, GeometryError> {
    match cfg.mode {
        DifferenceMode::Jaccard => jaccard_difference(ys, y0, cfg.match_min_iou),
        DifferenceMode::EgoFov => {
            let fov = cfg
                .fov
                .ok_or_else(|| GeometryError::InvalidConfig("ego_fov mode needs a fov region".into()))?;
            let ys = ys.restricted_to(fov);
            let y0 = y0.restricted_to(fov);
            jaccard_difference(&ys, &y0, cfg.match_min_iou)
        }
    }
}

/// `d(ys, y0) <= epsilon`, boundary inclusive.
pub fn consensus(ys: &DetectionSet, y0: &DetectionSet, cfg: &ConsensusConfig) -> Result<bool, GeometryError> {
    Ok(is_consensus(difference_measure(ys, y0, cfg)?, cfg.epsilon))
}

pub fn is_consensus(d: f64, epsilon: f64) -> bool {
    d <= epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use proptest::prelude::*;

    fn row(n: usize, x0: f64, y: f64) -> Vec<OrientedBox> {
        (0..n).map(|i| OrientedBox::new(x0 + 8.0 * i as f64, y, 4.5, 1.9, 0.0)).collect()
    }

    fn fov() -> FovRegion {
        FovRegion { center_x: 0.0, center_y: 0.0, radius: 30.0 }
    }

    #[test]
    fn identical_sets_have_zero_difference() {
        let y = DetectionSet::new(1, row(5, -16.0, 0.0));
        assert_eq!(difference_measure(&y, &y, &ConsensusConfig::jaccard(0.3)).unwrap(), 0.0);
        assert_eq!(difference_measure(&y, &y, &ConsensusConfig::ego_fov(0.3, fov())).unwrap(), 0.0);
    }

    #[test]
    fn false_positive_flood_breaks_consensus() {
        let y0 = DetectionSet::new(1, row(5, -16.0, 0.0));
        let mut flooded = y0.clone();
        flooded.boxes.extend(row(5, -16.0, 10.0));
        flooded.boxes.extend(row(5, -16.0, -10.0));
        let cfg = ConsensusConfig::jaccard(0.3);
        let d = difference_measure(&flooded, &y0, &cfg).unwrap();
        assert!((d - (1.0 - 5.0 / 15.0)).abs() < 1e-12);
        assert!(!consensus(&flooded, &y0, &cfg).unwrap());
    }

    #[test]
    fn complementary_boxes_outside_fov_are_free() {
        let y0 = DetectionSet::new(1, row(5, -16.0, 0.0));
        let mut fused = y0.clone();
        fused.boxes.extend(row(3, 40.0, 40.0));
        let cfg = ConsensusConfig::ego_fov(0.3, fov());
        assert_eq!(difference_measure(&fused, &y0, &cfg).unwrap(), 0.0);
        // the same extras count in jaccard mode
        assert!(difference_measure(&fused, &y0, &ConsensusConfig::jaccard(0.3)).unwrap() > 0.3);
    }

    #[test]
    fn empty_restricted_sets_are_in_consensus() {
        let far = DetectionSet::new(1, row(2, 100.0, 100.0));
        let empty = DetectionSet::new(1, vec![]);
        let cfg = ConsensusConfig::ego_fov(0.3, fov());
        assert_eq!(difference_measure(&far, &empty, &cfg).unwrap(), 0.0);
        assert_eq!(difference_measure(&empty, &empty, &ConsensusConfig::jaccard(0.3)).unwrap(), 0.0);
        assert_eq!(difference_measure(&far, &empty, &ConsensusConfig::jaccard(0.3)).unwrap(), 1.0);
    }

    #[test]
    fn consensus_boundary_is_inclusive() {
        assert!(is_consensus(0.0, 0.3));
        assert!(is_consensus(0.3, 0.3));
        assert!(!is_consensus(0.667, 0.3));
    }

    #[test]
    fn config_validation() {
        assert!(ConsensusConfig::jaccard(0.3).validate().is_ok());
        assert!(ConsensusConfig::jaccard(0.0).validate().is_err());
        assert!(ConsensusConfig::jaccard(1.0).validate().is_err());
        let mut cfg = ConsensusConfig::ego_fov(0.3, fov());
        assert!(cfg.validate().is_ok());
        cfg.fov = None;
        assert!(cfg.validate().is_err());
        let json = r#"{"epsilon":0.3,"mode":"ego_fov","fov":{"center_x":0,"center_y":0,"radius":30}}"#;
        let parsed: ConsensusConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.match_min_iou, 0.1);
        assert_eq!(parsed.mode, DifferenceMode::EgoFov);
    }

    fn arb_set() -> impl Strategy<Value = DetectionSet> {
        prop::collection::vec((-30.0f64..30.0, -30.0f64..30.0, 1.0f64..5.0, 0.5f64..2.5, -3.0f64..3.0), 0..10)
            .prop_map(|v| DetectionSet::new(0, v.into_iter().map(|(x, y, l, w, t)| OrientedBox::new(x, y, l, w, t)).collect()))
    }

    proptest! {
        #[test]
        fn difference_identity_and_range(a in arb_set(), b in arb_set(), jaccard in any::<bool>()) {
            let cfg = if jaccard { ConsensusConfig::jaccard(0.3) } else { ConsensusConfig::ego_fov(0.3, fov()) };
            let d = difference_measure(&a, &b, &cfg).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!(difference_measure(&a, &a, &cfg).unwrap().abs() < 1e-12);
        }

        #[test]
        fn difference_nonincreasing_as_matched_iou_grows(n in 1usize..6, extra in 0usize..4, shift in 0.0f64..1.5, k in 0usize..6) {
            // y0 on a grid; ys = y0 with box k shifted, plus far-away extras.
            let y0 = DetectionSet::new(0, row(n, -20.0, 0.0));
            let k = k % n;
            let build = |s: f64| {
                let mut ys = y0.clone();
                ys.boxes[k].center_x += s;
                ys.boxes.extend(row(extra, -20.0, 15.0));
                ys
            };
            let cfg = ConsensusConfig { match_min_iou: 0.0, ..ConsensusConfig::jaccard(0.3) };
            let worse = difference_measure(&build(shift), &y0, &cfg).unwrap();
            let better = difference_measure(&build(shift * 0.5), &y0, &cfg).unwrap();
            prop_assert!(better <= worse + 1e-12);
        }
    }
}
