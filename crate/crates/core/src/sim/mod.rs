//! Seeded multi-agent detection scenes with output-level attacks.
//!
//! Agents observe oriented car boxes inside their sensing discs, share noisy
//! detections, and a late-fusion model merges them. Attackers attach an
//! [`AttackEffect`] that alters every fusion they take part in.

mod calibrate;
mod fusion;
mod scenario;

use thiserror::Error;

use crate::engine::EngineError;
use crate::geometry::GeometryError;

pub use calibrate::{
    baseline_output, calibrate_severity, evaluate_frame, evaluate_outcome, ks_p_value, ks_statistic, quantile, sim_consensus, Baseline,
    CalibrationOptions, CalibrationReport, FrameScore, Quantiles, DEFAULT_EPSILON,
};
pub use fusion::{apply_attack, SimFusion};
pub use scenario::{
    generate_scene, AgentInfo, AttackConfig, AttackEffect, AttackKind, Displacement, Role, Scene, ScenarioConfig, SimMessage, SimPayload,
    SimWorldFrame, FLOOD_BOXES_PER_SEVERITY, FLOOD_SPACING, SUBTLE_SHIFT_PER_SEVERITY, SUBTLE_YAW_PER_SEVERITY, SUPPRESS_FRACTION_PER_SEVERITY,
    SUPPRESS_RADIUS,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("placed only {placed} of {requested} objects; lower the density or min_separation")]
    Placement { placed: usize, requested: u32 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
