//! Sampling-consensus defense for collaborative perception.
//!
//! An ego robot fuses messages from teammates, some of which may be
//! adversarial. Instead of trusting everyone it repeatedly samples a small
//! subset of teammates, fuses their messages and keeps the result only if it
//! agrees with its own individual perception. The modules:
//!
//! - [`sampling`]: closed-form sampling budgets and success probabilities,
//!   with exact hypergeometric counterparts.
//! - [`geometry`]: oriented boxes, rotated IoU, Hungarian matching, the
//!   consensus difference measure and average precision.
//! - [`engine`]: the per-frame sample-and-verify loop, plus static-team and
//!   temporal-reference variants.
//! - [`a2cp`]: attacker-ratio estimation by aggressive-to-conservative probing.
//! - [`sim`]: an output-level multi-agent detection simulator with
//!   parametrized attacks, used to exercise everything above.

pub mod a2cp;
pub mod engine;
pub mod geometry;
pub mod rng;
pub mod sampling;
pub mod sim;

pub use a2cp::{a2cp_run, a2cp_step, ProbeConfig, ProbeOrder, ProbeRunReport, ProbeState};
pub use engine::{
    robosac_frame, robosac_sequence, AgentId, AgentMessage, EngineConfig, EngineError, FrameBundle, FusionModel,
    ReferenceMode, RobosacOutcome, TeamMode,
};
pub use geometry::{ConsensusConfig, DetectionSet, DifferenceMode, FovRegion, OrientedBox};
pub use sampling::{RatioGrid, SamplingError, SamplingPlan};
