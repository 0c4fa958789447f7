//! Aggressive-to-conservative probing (A2CP) with retrospect.
//!
//! When the attacker ratio is unknown, the ego robot probes a grid of
//! candidate ratios `R_k = h_k / S`, sampling `S (1 - R_k)` teammates per
//! probe. A consensus at level `k` proves at least that many benign
//! teammates exist, so the estimate drops to `R_k` and every level `>= k`
//! is closed. Lower (more aggressive) levels stay open until their attempt
//! counter `T_k` reaches the bound `U_k` from [`a2cp_upper_bounds`]; this
//! retrospect keeps one unlucky draw from locking in an overestimate.
//!
//! A [`ProbeState`] is single-owner and mutated frame by frame.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{check_unique_ids, AgentId, AgentMessage, EngineError, FrameBundle, FrameContext, FusionModel};
use crate::geometry::{difference_measure, is_consensus, ConsensusConfig, DetectionSet};
use crate::rng::{substream, tag};
use crate::sampling::{a2cp_upper_bounds, RatioGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOrder {
    /// Sweep the open levels `k = 1..K` in passes, one probe per open
    /// level per pass; a consensus ends the pass.
    #[default]
    RoundRobin,
    /// Always probe the lowest open level.
    LowestFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub grid: RatioGrid,
    pub confidence: f64,
    /// Probes allowed per frame.
    pub frame_budget: u32,
    pub consensus: ConsensusConfig,
    #[serde(default)]
    pub order: ProbeOrder,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ProbeConfig {
    /// The usual setup: grid `[0, 1/S, ..., (S-1)/S]`, round-robin order.
    pub fn standard(team_size: u32, confidence: f64, frame_budget: u32, consensus: ConsensusConfig, rng_seed: u64) -> Result<Self, EngineError> {
        let grid = RatioGrid::full(team_size).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Ok(Self { grid, confidence, frame_budget, consensus, order: ProbeOrder::RoundRobin, rng_seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeState {
    grid: RatioGrid,
    counters: Vec<u32>,
    bounds: Vec<u32>,
    estimate: f64,
    estimate_level: Option<usize>,
    frame_budget: u32,
    order: ProbeOrder,
    total_probes: u64,
}

impl ProbeState {
    pub fn new(grid: RatioGrid, confidence: f64, frame_budget: u32, order: ProbeOrder) -> Result<Self, EngineError> {
        if frame_budget == 0 {
            return Err(EngineError::InvalidConfig("per-frame probe budget must be positive".into()));
        }
        let bounds = a2cp_upper_bounds(&grid, confidence).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            counters: vec![0; grid.len()],
            bounds,
            grid,
            estimate: 1.0,
            estimate_level: None,
            frame_budget,
            order,
            total_probes: 0,
        })
    }

    pub fn from_config(cfg: &ProbeConfig) -> Result<Self, EngineError> {
        cfg.consensus.validate()?;
        Self::new(cfg.grid.clone(), cfg.confidence, cfg.frame_budget, cfg.order)
    }

    pub fn grid(&self) -> &RatioGrid {
        &self.grid
    }

    pub fn counters(&self) -> &[u32] {
        &self.counters
    }

    pub fn bounds(&self) -> &[u32] {
        &self.bounds
    }

    /// Current attacker-ratio estimate; 1.0 until some level reaches consensus.
    pub fn estimate(&self) -> f64 {
        self.estimate
    }

    pub fn estimate_level(&self) -> Option<usize> {
        self.estimate_level
    }

    pub fn total_probes(&self) -> u64 {
        self.total_probes
    }

    pub fn is_open(&self, k: usize) -> bool {
        self.counters[k] < self.bounds[k]
    }

    /// No level left to probe: the estimate is final.
    pub fn is_saturated(&self) -> bool {
        (0..self.counters.len()).all(|k| !self.is_open(k))
    }

    fn record(&mut self, k: usize, agreed: bool) {
        self.total_probes += 1;
        if agreed {
            self.estimate = self.grid.ratio(k);
            self.estimate_level = Some(k);
            for j in k..self.counters.len() {
                self.counters[j] = self.bounds[j];
            }
        } else {
            self.counters[k] += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub level: usize,
    pub ratio: f64,
    pub sampled: Vec<AgentId>,
    pub d: f64,
    pub consensus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameProbeLog {
    pub frame_id: u64,
    pub probes: Vec<ProbeRecord>,
    pub estimate_after: f64,
    /// Output of the last consensus this frame, usable as perception output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted_output: Option<DetectionSet>,
}

/// Spends up to `frame_budget` probes of one frame.
pub fn a2cp_step<M: FusionModel, R: Rng + ?Sized>(
    state: &mut ProbeState,
    ego: &AgentMessage<M::Payload>,
    teammates: &[AgentMessage<M::Payload>],
    model: &M,
    consensus: &ConsensusConfig,
    rng: &mut R,
) -> Result<FrameProbeLog, EngineError> {
    check_unique_ids(ego, teammates)?;
    if teammates.len() != state.grid.team_size() as usize {
        return Err(EngineError::TeamSizeMismatch { expected: state.grid.team_size(), actual: teammates.len() });
    }
    let mut ctx = FrameContext::new(model, ego);
    let mut probes = Vec::new();
    let mut accepted_output = None;
    let mut frame_id = None;

    let mut probe = |state: &mut ProbeState, k: usize, ctx: &mut FrameContext<'_, M>, rng: &mut R| -> Result<bool, EngineError> {
        let reference = ctx.individual()?.clone();
        frame_id.get_or_insert(reference.frame_id);
        let mut picked = index::sample(rng, teammates.len(), state.grid.sample_size(k) as usize).into_vec();
        picked.sort_unstable();
        let chosen: Vec<&AgentMessage<M::Payload>> = picked.iter().map(|&i| &teammates[i]).collect();
        let fused = ctx.fused(&chosen)?;
        let d = difference_measure(&fused, &reference, consensus)?;
        let agreed = is_consensus(d, consensus.epsilon);
        probes.push(ProbeRecord {
            level: k,
            ratio: state.grid.ratio(k),
            sampled: chosen.iter().map(|m| m.agent_id).collect(),
            d,
            consensus: agreed,
        });
        if agreed {
            accepted_output = Some(fused);
        }
        state.record(k, agreed);
        Ok(agreed)
    };

    let budget = state.frame_budget;
    let mut spent = 0u32;
    'frame: while spent < budget && !state.is_saturated() {
        match state.order {
            ProbeOrder::RoundRobin => {
                for k in 0..state.counters.len() {
                    if spent >= budget {
                        break 'frame;
                    }
                    if !state.is_open(k) {
                        continue;
                    }
                    spent += 1;
                    if probe(state, k, &mut ctx, rng)? {
                        continue 'frame;
                    }
                }
            }
            ProbeOrder::LowestFirst => {
                let k = (0..state.counters.len()).find(|&k| state.is_open(k)).expect("not saturated");
                spent += 1;
                probe(state, k, &mut ctx, rng)?;
            }
        }
    }

    Ok(FrameProbeLog {
        frame_id: frame_id.unwrap_or_default(),
        probes,
        estimate_after: state.estimate,
        accepted_output,
    })
}

/// Result of probing a whole scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_ratio: Option<f64>,
    pub estimate: f64,
    /// Index of the frame after which the estimate never changed.
    pub frames_to_final: usize,
    pub total_steps: u64,
    pub saturated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    pub per_frame: Vec<FrameProbeLog>,
}

/// The grid ratio a perfect estimator would report for `true_ratio`:
/// the smallest grid ratio at or above it, or 1.0 if none is.
pub fn discretized_ratio(grid: &RatioGrid, true_ratio: f64) -> f64 {
    grid.ratios().into_iter().find(|&r| r >= true_ratio - 1e-9).unwrap_or(1.0)
}

/// Probes frame after frame until every level saturates or the scene ends.
/// Frame `f` draws from substream `(rng_seed, PROBE, frame_id)`.
pub fn a2cp_run<M: FusionModel>(
    frames: &[FrameBundle<M::Payload>],
    model: &M,
    cfg: &ProbeConfig,
    true_ratio: Option<f64>,
) -> Result<ProbeRunReport, EngineError> {
    if frames.is_empty() {
        return Err(EngineError::EmptySequence);
    }
    let mut state = ProbeState::from_config(cfg)?;
    let mut per_frame = Vec::new();
    let mut frames_to_final = 0;
    for (index, frame) in frames.iter().enumerate() {
        if state.is_saturated() {
            break;
        }
        let before = state.estimate();
        let mut rng = substream(cfg.rng_seed, &[tag::PROBE, frame.frame_id]);
        let mut log = a2cp_step(&mut state, &frame.ego, &frame.teammates, model, &cfg.consensus, &mut rng)?;
        log.frame_id = frame.frame_id;
        if state.estimate() != before {
            frames_to_final = index;
        }
        per_frame.push(log);
    }
    let estimate = state.estimate();
    Ok(ProbeRunReport {
        true_ratio,
        estimate,
        frames_to_final,
        total_steps: state.total_probes(),
        saturated: state.is_saturated(),
        success: true_ratio.map(|t| (estimate - discretized_ratio(&cfg.grid, t)).abs() < 1e-9),
        per_frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use crate::rng::SimRng;
    use rand::SeedableRng;
    use std::convert::Infallible;

    /// Payload = is_attacker. Any attacker in the fused set floods far boxes.
    struct ToyModel;

    impl FusionModel for ToyModel {
        type Payload = bool;
        type Error = Infallible;

        fn predict_individual(&self, _ego: &AgentMessage<bool>) -> Result<DetectionSet, Infallible> {
            Ok(DetectionSet::new(0, vec![OrientedBox::new(0.0, 0.0, 4.0, 2.0, 0.0)]))
        }

        fn predict_fused(&self, ego: &AgentMessage<bool>, mates: &[&AgentMessage<bool>]) -> Result<DetectionSet, Infallible> {
            let mut out = self.predict_individual(ego)?;
            if mates.iter().any(|m| m.payload) {
                out.boxes.extend((0..5).map(|i| OrientedBox::new(20.0 + 8.0 * i as f64, 0.0, 4.0, 2.0, 0.0)));
            }
            Ok(out)
        }
    }

    fn scene(attackers: usize, frames: u64) -> Vec<FrameBundle<bool>> {
        (0..frames)
            .map(|f| FrameBundle {
                frame_id: f,
                ego: AgentMessage { agent_id: 0, payload: false },
                teammates: (0..5).map(|i| AgentMessage { agent_id: i + 1, payload: (i as usize) < attackers }).collect(),
            })
            .collect()
    }

    fn cfg(seed: u64, order: ProbeOrder) -> ProbeConfig {
        let mut c = ProbeConfig::standard(5, 0.99, 5, ConsensusConfig::jaccard(0.3), seed).unwrap();
        c.order = order;
        c
    }

    #[test]
    fn attacker_free_team_needs_one_probe() {
        for order in [ProbeOrder::RoundRobin, ProbeOrder::LowestFirst] {
            let report = a2cp_run(&scene(0, 100), &ToyModel, &cfg(1, order), Some(0.0)).unwrap();
            assert_eq!(report.total_steps, 1);
            assert_eq!(report.estimate, 0.0);
            assert_eq!(report.frames_to_final, 0);
            assert_eq!(report.success, Some(true));
        }
    }

    #[test]
    fn all_attacker_team_spends_every_bound() {
        for seed in 0..20 {
            for order in [ProbeOrder::RoundRobin, ProbeOrder::LowestFirst] {
                let report = a2cp_run(&scene(5, 100), &ToyModel, &cfg(seed, order), Some(1.0)).unwrap();
                assert_eq!(report.total_steps, 77);
                assert_eq!(report.estimate, 1.0);
                assert_eq!(report.frames_to_final, 0);
                assert!(report.saturated);
                assert!(report.per_frame.iter().all(|f| f.probes.len() <= 5));
            }
        }
    }

    #[test]
    fn three_attackers_estimate_point_six() {
        let hits = (0..50)
            .filter(|&seed| a2cp_run(&scene(3, 100), &ToyModel, &cfg(seed, ProbeOrder::RoundRobin), Some(0.6)).unwrap().estimate == 0.6)
            .count();
        // 1 - 0.9^27 = 0.94 per run
        assert!(hits >= 40, "{hits}/50");
    }

    #[test]
    fn invariants_hold_on_every_frame() {
        for seed in 0..30 {
            for attackers in 0..=5 {
                let c = cfg(seed, ProbeOrder::RoundRobin);
                let mut state = ProbeState::from_config(&c).unwrap();
                let mut prev_estimate = state.estimate();
                let mut prev_counters = state.counters().to_vec();
                let mut min_consensus = f64::INFINITY;
                for frame in scene(attackers, 60) {
                    let mut rng = SimRng::seed_from_u64(seed * 1000 + frame.frame_id);
                    let log = a2cp_step(&mut state, &frame.ego, &frame.teammates, &ToyModel, &c.consensus, &mut rng).unwrap();
                    assert!(log.probes.len() <= 5);
                    for p in &log.probes {
                        if p.consensus {
                            min_consensus = min_consensus.min(p.ratio);
                            // consensus only with a clean subset
                            assert!(p.sampled.iter().all(|&id| id as usize > attackers));
                        }
                    }
                    assert!(state.estimate() <= prev_estimate);
                    assert!(state.counters().iter().zip(&prev_counters).all(|(a, b)| a >= b));
                    assert!(state.counters().iter().zip(state.bounds()).all(|(t, u)| t <= u));
                    if let Some(k) = state.estimate_level() {
                        assert!((k..5).all(|j| state.counters()[j] == state.bounds()[j]));
                    }
                    prev_estimate = state.estimate();
                    prev_counters = state.counters().to_vec();
                }
                assert!(state.total_probes() <= 77);
                if min_consensus.is_finite() {
                    assert_eq!(state.estimate(), min_consensus);
                } else {
                    assert_eq!(state.estimate(), 1.0);
                }
            }
        }
    }

    #[test]
    fn round_robin_retrospects_lower_levels() {
        // with 2 attackers, level 0.6 (s=2) passes easily while 0.4 (s=3)
        // rarely does; round-robin must keep probing 0.2/0.4 after 0.6 agrees
        let report = (0..20)
            .map(|seed| a2cp_run(&scene(2, 100), &ToyModel, &cfg(seed, ProbeOrder::RoundRobin), Some(0.4)).unwrap())
            .find(|r| {
                r.per_frame.iter().flat_map(|f| &f.probes).position(|p| p.consensus && p.ratio > 0.4)
                    .is_some_and(|i| r.per_frame.iter().flat_map(|f| &f.probes).skip(i + 1).any(|p| p.ratio < 0.6))
            });
        assert!(report.is_some());
    }

    #[test]
    fn grid_without_true_ratio_rounds_up() {
        let grid = RatioGrid::from_ratios(5, &[0.0, 0.2, 0.4, 0.6, 0.8]).unwrap();
        assert_eq!(discretized_ratio(&grid, 0.3), 0.4);
        assert_eq!(discretized_ratio(&grid, 0.2), 0.2);
        assert_eq!(discretized_ratio(&grid, 0.9), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = cfg(0, ProbeOrder::RoundRobin);
        let mut state = ProbeState::from_config(&c).unwrap();
        let frame = &scene(0, 1)[0];
        let mut rng = SimRng::seed_from_u64(0);
        let err = a2cp_step(&mut state, &frame.ego, &frame.teammates[..4], &ToyModel, &c.consensus, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::TeamSizeMismatch { .. }));
        assert!(ProbeState::new(c.grid.clone(), 0.99, 0, ProbeOrder::RoundRobin).is_err());
        assert!(matches!(a2cp_run::<ToyModel>(&[], &ToyModel, &c, None), Err(EngineError::EmptySequence)));
    }

    #[test]
    fn report_serializes_to_json() {
        let report = a2cp_run(&scene(1, 20), &ToyModel, &cfg(4, ProbeOrder::RoundRobin), Some(0.2)).unwrap();
        let value: serde_json::Value = serde_json::to_value(&report).unwrap();
        for key in ["true_ratio", "estimate", "frames_to_final", "total_steps", "per_frame"] {
            assert!(value.get(key).is_some(), "{key}");
        }
    }
}
