//! Per-frame hypothesize-and-verify loop.
//!
//! Each frame the ego robot computes a reference output (its own individual
//! prediction, or the previous frame's output in temporal mode), then draws
//! random subsets of `s` teammates, fuses their messages and accepts the
//! first fused output that agrees with the reference within `epsilon`.
//! After `N` disagreeing draws it falls back to individual perception.
//!
//! A single frame is sequential: each draw's early stop depends on the
//! previous one. Distinct frames or experiments may run concurrently as long
//! as each owns its RNG stream and the [`FusionModel`] is `Sync` (or cloned
//! per worker).

use std::collections::BTreeSet;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{difference_measure, is_consensus, ConsensusConfig, DetectionSet, GeometryError};
use crate::rng::{substream, tag};
use crate::sampling::SamplingPlan;

pub type AgentId = u32;

/// One agent's shared contribution. The payload is opaque to the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage<P> {
    pub agent_id: AgentId,
    pub payload: P,
}

/// The perception model the engine queries.
///
/// Implementations must be deterministic given identical inputs, and
/// `predict_fused` with no teammates must equal `predict_individual`.
pub trait FusionModel {
    type Payload;
    type Error: std::error::Error + Send + Sync + 'static;

    fn predict_individual(&self, ego: &AgentMessage<Self::Payload>) -> Result<DetectionSet, Self::Error>;

    fn predict_fused(
        &self,
        ego: &AgentMessage<Self::Payload>,
        teammates: &[&AgentMessage<Self::Payload>],
    ) -> Result<DetectionSet, Self::Error>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Compare against the ego's own individual prediction.
    #[default]
    Individual,
    /// Compare against the previous frame's output.
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeamMode {
    /// Sample afresh every frame.
    #[default]
    Dynamic,
    /// Keep fusing with the first accepted set until it fails consensus.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedrawPolicy {
    /// Every draw is an independent uniform subset.
    #[default]
    Independent,
    /// Walk a random permutation of all distinct subsets (small teams only).
    NoRepeat,
}

/// Largest `C(S, s)` the no-repeat policy will enumerate.
pub const MAX_ENUMERATED_SUBSETS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub plan: SamplingPlan,
    pub consensus: ConsensusConfig,
    #[serde(default)]
    pub reference: ReferenceMode,
    #[serde(default)]
    pub team_mode: TeamMode,
    #[serde(default)]
    pub redraw: RedrawPolicy,
    #[serde(default)]
    pub rng_seed: u64,
}

impl EngineConfig {
    pub fn new(plan: SamplingPlan, consensus: ConsensusConfig, rng_seed: u64) -> Self {
        Self {
            plan,
            consensus,
            reference: ReferenceMode::Individual,
            team_mode: TeamMode::Dynamic,
            redraw: RedrawPolicy::Independent,
            rng_seed,
        }
    }

    /// Rejects malformed plans and plans whose sample size exceeds the
    /// benign head-count `S (1 - eta)`: such an engine could only ever
    /// accept a subset containing an attacker.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.plan.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.consensus.validate()?;
        if !self.plan.is_feasible() {
            return Err(EngineError::Infeasible {
                sample_size: self.plan.sample_size,
                benign: self.plan.team_size as f64 * (1.0 - self.plan.attacker_ratio),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    InvalidConfig(String),
    #[error("sample size {sample_size} exceeds the {benign} benign teammates the plan assumes")]
    Infeasible { sample_size: u32, benign: f64 },
    #[error("sample size {sample_size} exceeds team of {team_size}")]
    SampleExceedsTeam { sample_size: u32, team_size: usize },
    #[error("agent id {0} appears twice in one frame")]
    DuplicateAgent(AgentId),
    #[error("static team changed at frame {frame_id}")]
    ChangingTeam { frame_id: u64 },
    #[error("expected {expected} teammates, got {actual}")]
    TeamSizeMismatch { expected: u32, actual: usize },
    #[error("empty frame sequence")]
    EmptySequence,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("fusion model failed: {0}")]
    Model(#[source] Box<dyn std::error::Error + Send + Sync>),
}

fn model_err<E: std::error::Error + Send + Sync + 'static>(e: E) -> EngineError {
    EngineError::Model(Box::new(e))
}

/// One hypothesis: the sampled teammates and their fused output's distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub sampled: Vec<AgentId>,
    pub d: f64,
    pub consensus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobosacOutcome {
    pub frame_id: u64,
    pub output: DetectionSet,
    pub steps_used: u32,
    pub consensus_reached: bool,
    /// Empty when falling back to individual perception.
    pub accepted_teammates: Vec<AgentId>,
    pub draws: Vec<DrawRecord>,
    pub individual_calls: u32,
    pub fused_calls: u32,
    /// Static mode: output came from the trusted set without sampling.
    #[serde(default)]
    pub used_trusted_set: bool,
    /// Static mode: the trusted set failed consensus this frame and was dropped.
    #[serde(default)]
    pub trust_revoked: bool,
}

/// The JSON-lines record written per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub frame_id: u64,
    pub steps_used: u32,
    pub consensus: bool,
    pub accepted_ids: Vec<AgentId>,
    pub d_values: Vec<f64>,
}

impl RobosacOutcome {
    pub fn record(&self) -> OutcomeRecord {
        OutcomeRecord {
            frame_id: self.frame_id,
            steps_used: self.steps_used,
            consensus: self.consensus_reached,
            accepted_ids: self.accepted_teammates.clone(),
            d_values: self.draws.iter().map(|d| d.d).collect(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.record()).expect("outcome records always serialize")
    }
}

/// Lazily computed individual prediction plus call counters for one frame.
pub(crate) struct FrameContext<'a, M: FusionModel> {
    model: &'a M,
    ego: &'a AgentMessage<M::Payload>,
    individual: Option<DetectionSet>,
    pub(crate) individual_calls: u32,
    pub(crate) fused_calls: u32,
}

impl<'a, M: FusionModel> FrameContext<'a, M> {
    pub(crate) fn new(model: &'a M, ego: &'a AgentMessage<M::Payload>) -> Self {
        Self { model, ego, individual: None, individual_calls: 0, fused_calls: 0 }
    }

    pub(crate) fn individual(&mut self) -> Result<&DetectionSet, EngineError> {
        if self.individual.is_none() {
            self.individual_calls += 1;
            self.individual = Some(self.model.predict_individual(self.ego).map_err(model_err)?);
        }
        Ok(self.individual.as_ref().expect("just computed"))
    }

    pub(crate) fn fused(&mut self, teammates: &[&AgentMessage<M::Payload>]) -> Result<DetectionSet, EngineError> {
        self.fused_calls += 1;
        self.model.predict_fused(self.ego, teammates).map_err(model_err)
    }

    /// Reference output for consensus: the supplied temporal reference if
    /// any, else the individual prediction.
    fn reference(&mut self, cfg: &EngineConfig, temporal: Option<&DetectionSet>) -> Result<DetectionSet, EngineError> {
        match (cfg.reference, temporal) {
            (ReferenceMode::Temporal, Some(previous)) => Ok(previous.clone()),
            _ => self.individual().cloned(),
        }
    }
}

pub(crate) fn check_unique_ids<P>(ego: &AgentMessage<P>, teammates: &[AgentMessage<P>]) -> Result<(), EngineError> {
    let mut seen = BTreeSet::from([ego.agent_id]);
    for m in teammates {
        if !seen.insert(m.agent_id) {
            return Err(EngineError::DuplicateAgent(m.agent_id));
        }
    }
    Ok(())
}

fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn subset_count(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Sampling core shared by the dynamic and static paths.
fn sample_until_consensus<M: FusionModel, R: Rng + ?Sized>(
    ctx: &mut FrameContext<'_, M>,
    teammates: &[AgentMessage<M::Payload>],
    cfg: &EngineConfig,
    reference: &DetectionSet,
    frame_id: u64,
    rng: &mut R,
) -> Result<RobosacOutcome, EngineError> {
    let sample_size = cfg.plan.sample_size as usize;
    let team = teammates.len();
    if sample_size > team {
        return Err(EngineError::SampleExceedsTeam { sample_size: cfg.plan.sample_size, team_size: team });
    }

    let mut enumerated = match cfg.redraw {
        RedrawPolicy::NoRepeat if subset_count(team, sample_size) <= MAX_ENUMERATED_SUBSETS => {
            let mut subsets = all_subsets(team, sample_size);
            subsets.shuffle(rng);
            Some(subsets.into_iter())
        }
        _ => None,
    };

    let mut draws = Vec::new();
    for _ in 0..cfg.plan.budget {
        let picked: Vec<usize> = match enumerated.as_mut() {
            Some(it) => match it.next() {
                Some(subset) => subset,
                None => break,
            },
            None => {
                let mut v = index::sample(rng, team, sample_size).into_vec();
                v.sort_unstable();
                v
            }
        };
        let chosen: Vec<&AgentMessage<M::Payload>> = picked.iter().map(|&i| &teammates[i]).collect();
        let fused = ctx.fused(&chosen)?;
        let d = difference_measure(&fused, reference, &cfg.consensus)?;
        let agreed = is_consensus(d, cfg.consensus.epsilon);
        let sampled: Vec<AgentId> = chosen.iter().map(|m| m.agent_id).collect();
        draws.push(DrawRecord { sampled: sampled.clone(), d, consensus: agreed });
        if agreed {
            return Ok(RobosacOutcome {
                frame_id,
                output: fused,
                steps_used: draws.len() as u32,
                consensus_reached: true,
                accepted_teammates: sampled,
                draws,
                individual_calls: ctx.individual_calls,
                fused_calls: ctx.fused_calls,
                used_trusted_set: false,
                trust_revoked: false,
            });
        }
    }

    let output = ctx.individual()?.clone();
    Ok(RobosacOutcome {
        frame_id,
        output,
        steps_used: draws.len() as u32,
        consensus_reached: false,
        accepted_teammates: Vec::new(),
        draws,
        individual_calls: ctx.individual_calls,
        fused_calls: ctx.fused_calls,
        used_trusted_set: false,
        trust_revoked: false,
    })
}

/// Runs one frame of sample consensus.
///
/// `reference` is only consulted in [`ReferenceMode::Temporal`]; without it
/// the individual prediction is the reference (the first temporal frame).
pub fn robosac_frame<M: FusionModel, R: Rng + ?Sized>(
    ego: &AgentMessage<M::Payload>,
    teammates: &[AgentMessage<M::Payload>],
    model: &M,
    cfg: &EngineConfig,
    reference: Option<&DetectionSet>,
    rng: &mut R,
) -> Result<RobosacOutcome, EngineError> {
    cfg.validate()?;
    check_unique_ids(ego, teammates)?;
    if cfg.plan.sample_size as usize > teammates.len() {
        return Err(EngineError::SampleExceedsTeam { sample_size: cfg.plan.sample_size, team_size: teammates.len() });
    }
    let mut ctx = FrameContext::new(model, ego);
    let reference = ctx.reference(cfg, reference)?;
    let mut outcome = sample_until_consensus(&mut ctx, teammates, cfg, &reference, reference.frame_id, rng)?;
    outcome.frame_id = outcome.output.frame_id;
    Ok(outcome)
}

/// All messages an ego robot receives in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameBundle<P> {
    pub frame_id: u64,
    pub ego: AgentMessage<P>,
    pub teammates: Vec<AgentMessage<P>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceSummary {
    pub frames: usize,
    pub consensus_frames: usize,
    pub total_steps: u64,
    pub mean_steps: f64,
    pub individual_calls: u64,
    pub fused_calls: u64,
    pub trust_revocations: usize,
}

impl SequenceSummary {
    pub fn from_outcomes(outcomes: &[RobosacOutcome]) -> Self {
        let frames = outcomes.len();
        let total_steps: u64 = outcomes.iter().map(|o| o.steps_used as u64).sum();
        Self {
            frames,
            consensus_frames: outcomes.iter().filter(|o| o.consensus_reached).count(),
            total_steps,
            mean_steps: if frames == 0 { 0.0 } else { total_steps as f64 / frames as f64 },
            individual_calls: outcomes.iter().map(|o| o.individual_calls as u64).sum(),
            fused_calls: outcomes.iter().map(|o| o.fused_calls as u64).sum(),
            trust_revocations: outcomes.iter().filter(|o| o.trust_revoked).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub outcomes: Vec<RobosacOutcome>,
    pub summary: SequenceSummary,
}

/// Runs a scene frame by frame.
///
/// Frame `f` draws from the substream `(cfg.rng_seed, ENGINE, frame_id)`, so
/// the sampled subsets do not depend on what earlier frames consumed. In
/// static mode the first accepted set is reused, with one verification per
/// frame, until it fails consensus; the trust is then revoked and sampling
/// resumes on that frame.
pub fn robosac_sequence<M: FusionModel>(
    frames: &[FrameBundle<M::Payload>],
    model: &M,
    cfg: &EngineConfig,
) -> Result<SequenceReport, EngineError> {
    cfg.validate()?;
    let first = frames.first().ok_or(EngineError::EmptySequence)?;
    let team_ids = |f: &FrameBundle<M::Payload>| f.teammates.iter().map(|m| m.agent_id).collect::<BTreeSet<_>>();
    let initial_team = team_ids(first);

    let mut outcomes: Vec<RobosacOutcome> = Vec::with_capacity(frames.len());
    let mut trusted: Option<Vec<AgentId>> = None;
    for frame in frames {
        check_unique_ids(&frame.ego, &frame.teammates)?;
        if cfg.team_mode == TeamMode::Static && team_ids(frame) != initial_team {
            return Err(EngineError::ChangingTeam { frame_id: frame.frame_id });
        }
        let mut rng = substream(cfg.rng_seed, &[tag::ENGINE, frame.frame_id]);
        let previous = outcomes.last().map(|o| &o.output);
        let mut ctx = FrameContext::new(model, &frame.ego);
        let reference = ctx.reference(cfg, previous)?;

        let mut revoked = false;
        if let Some(ids) = &trusted {
            let chosen: Vec<&AgentMessage<M::Payload>> =
                frame.teammates.iter().filter(|m| ids.contains(&m.agent_id)).collect();
            let fused = ctx.fused(&chosen)?;
            let d = difference_measure(&fused, &reference, &cfg.consensus)?;
            if is_consensus(d, cfg.consensus.epsilon) {
                outcomes.push(RobosacOutcome {
                    frame_id: frame.frame_id,
                    output: fused,
                    steps_used: 0,
                    consensus_reached: true,
                    accepted_teammates: ids.clone(),
                    draws: Vec::new(),
                    individual_calls: ctx.individual_calls,
                    fused_calls: ctx.fused_calls,
                    used_trusted_set: true,
                    trust_revoked: false,
                });
                continue;
            }
            trusted = None;
            revoked = true;
        }

        let mut outcome = sample_until_consensus(&mut ctx, &frame.teammates, cfg, &reference, frame.frame_id, &mut rng)?;
        outcome.trust_revoked = revoked;
        if cfg.team_mode == TeamMode::Static && outcome.consensus_reached && !outcome.accepted_teammates.is_empty() {
            trusted = Some(outcome.accepted_teammates.clone());
        }
        outcomes.push(outcome);
    }
    let summary = SequenceSummary::from_outcomes(&outcomes);
    Ok(SequenceReport { outcomes, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrientedBox;
    use crate::rng::SimRng;
    use rand::SeedableRng;
    use std::convert::Infallible;

    /// Each message is (is_attacker); the ego sees one box, benign teammates
    /// add nothing in-range, attackers add a flood of far boxes.
    struct ToyModel;

    impl FusionModel for ToyModel {
        type Payload = bool;
        type Error = Infallible;

        fn predict_individual(&self, _ego: &AgentMessage<bool>) -> Result<DetectionSet, Infallible> {
            Ok(DetectionSet::new(0, vec![OrientedBox::new(0.0, 0.0, 4.0, 2.0, 0.0)]))
        }

        fn predict_fused(&self, ego: &AgentMessage<bool>, teammates: &[&AgentMessage<bool>]) -> Result<DetectionSet, Infallible> {
            let mut out = self.predict_individual(ego)?;
            for (i, m) in teammates.iter().enumerate() {
                if m.payload {
                    out.boxes.push(OrientedBox::new(20.0 + 10.0 * i as f64, 0.0, 4.0, 2.0, 0.0));
                }
            }
            Ok(out)
        }
    }

    fn team(attackers: &[bool]) -> (AgentMessage<bool>, Vec<AgentMessage<bool>>) {
        let ego = AgentMessage { agent_id: 0, payload: false };
        let mates = attackers.iter().enumerate().map(|(i, &a)| AgentMessage { agent_id: i as u32 + 1, payload: a }).collect();
        (ego, mates)
    }

    fn cfg(attackers: u32, s: u32, n: u32) -> EngineConfig {
        let plan = SamplingPlan { attacker_ratio: attackers as f64 / 5.0, team_size: 5, sample_size: s, budget: n, confidence: 0.99 };
        EngineConfig::new(plan, ConsensusConfig::jaccard(0.3), 1)
    }

    #[test]
    fn all_benign_accepts_first_draw() {
        let (ego, mates) = team(&[false; 5]);
        let mut rng = SimRng::seed_from_u64(0);
        let out = robosac_frame(&ego, &mates, &ToyModel, &cfg(1, 3, 7), None, &mut rng).unwrap();
        assert!(out.consensus_reached);
        assert_eq!(out.steps_used, 1);
        assert_eq!(out.accepted_teammates.len(), 3);
        assert_eq!(out.individual_calls, 1);
    }

    #[test]
    fn all_attackers_exhausts_budget_and_falls_back() {
        let (ego, mates) = team(&[true; 5]);
        let mut rng = SimRng::seed_from_u64(0);
        let out = robosac_frame(&ego, &mates, &ToyModel, &cfg(1, 1, 10), None, &mut rng).unwrap();
        assert!(!out.consensus_reached);
        assert_eq!(out.steps_used, 10);
        assert!(out.accepted_teammates.is_empty());
        assert_eq!(out.output, ToyModel.predict_individual(&ego).unwrap());
        assert!(out.draws.iter().all(|d| !d.consensus));
    }

    #[test]
    fn infeasible_and_oversized_plans_are_refused() {
        let (ego, mates) = team(&[false; 5]);
        let mut rng = SimRng::seed_from_u64(0);
        // eta = 0.6 leaves 2 benign, s = 3 could never be clean
        let err = robosac_frame(&ego, &mates, &ToyModel, &cfg(3, 3, 7), None, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::Infeasible { .. }));
        let err = robosac_frame(&ego, &mates[..2], &ToyModel, &cfg(0, 3, 7), None, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::SampleExceedsTeam { .. }));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let (ego, mut mates) = team(&[false; 5]);
        mates[2].agent_id = 1;
        let mut rng = SimRng::seed_from_u64(0);
        let err = robosac_frame(&ego, &mates, &ToyModel, &cfg(1, 3, 7), None, &mut rng).unwrap_err();
        assert!(matches!(err, EngineError::DuplicateAgent(1)));
    }

    #[test]
    fn accepted_draw_is_last_and_clean() {
        let (ego, mates) = team(&[false, true, false, false, false]);
        for seed in 0..200 {
            let mut rng = SimRng::seed_from_u64(seed);
            let out = robosac_frame(&ego, &mates, &ToyModel, &cfg(1, 3, 7), None, &mut rng).unwrap();
            assert!(out.steps_used <= 7);
            if out.consensus_reached {
                assert!(out.draws.last().unwrap().consensus);
                assert!(out.draws[..out.draws.len() - 1].iter().all(|d| !d.consensus));
                assert!(!out.accepted_teammates.contains(&2));
            }
        }
    }

    #[test]
    fn no_repeat_policy_tries_each_subset_once() {
        // single benign teammate out of 5, s = 1: at most 5 distinct subsets
        let (ego, mates) = team(&[true, true, true, true, false]);
        let mut c = cfg(4, 1, 50);
        c.redraw = RedrawPolicy::NoRepeat;
        let mut rng = SimRng::seed_from_u64(3);
        let out = robosac_frame(&ego, &mates, &ToyModel, &c, None, &mut rng).unwrap();
        assert!(out.consensus_reached);
        assert!(out.steps_used <= 5);
        let distinct: BTreeSet<_> = out.draws.iter().map(|d| d.sampled.clone()).collect();
        assert_eq!(distinct.len(), out.draws.len());
        assert_eq!(subset_count(5, 2), 10);
        assert_eq!(all_subsets(5, 2).len(), 10);
    }

    fn bundles(attackers: &[bool], frames: u64) -> Vec<FrameBundle<bool>> {
        (0..frames)
            .map(|f| {
                let (ego, teammates) = team(attackers);
                FrameBundle { frame_id: f, ego, teammates }
            })
            .collect()
    }

    #[test]
    fn static_mode_amortizes_sampling() {
        let frames = bundles(&[false, true, false, false, false], 100);
        let mut c = cfg(1, 3, 7);
        c.team_mode = TeamMode::Static;
        let report = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        assert!(report.summary.total_steps <= 7);
        assert!(report.outcomes.iter().skip_while(|o| !o.consensus_reached).skip(1).all(|o| o.used_trusted_set));
        c.team_mode = TeamMode::Dynamic;
        let dynamic = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        assert!(dynamic.summary.mean_steps > report.summary.mean_steps);
    }

    #[test]
    fn static_mode_rejects_changing_team() {
        let mut frames = bundles(&[false; 5], 3);
        frames[2].teammates[0].agent_id = 99;
        let mut c = cfg(1, 3, 7);
        c.team_mode = TeamMode::Static;
        assert!(matches!(robosac_sequence(&frames, &ToyModel, &c), Err(EngineError::ChangingTeam { frame_id: 2 })));
        c.team_mode = TeamMode::Dynamic;
        assert!(robosac_sequence(&frames, &ToyModel, &c).is_ok());
        assert!(matches!(robosac_sequence::<ToyModel>(&[], &ToyModel, &c), Err(EngineError::EmptySequence)));
    }

    #[test]
    fn static_mode_revokes_trust_when_a_member_turns() {
        let mut frames = bundles(&[false; 5], 4);
        let mut c = cfg(1, 3, 7);
        c.team_mode = TeamMode::Static;
        let trusted = robosac_sequence(&frames[..1], &ToyModel, &c).unwrap().outcomes[0].accepted_teammates.clone();
        for f in &mut frames[2..] {
            for m in &mut f.teammates {
                m.payload = m.agent_id == trusted[0];
            }
        }
        let report = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        assert!(report.outcomes[1].used_trusted_set);
        assert!(report.outcomes[2].trust_revoked);
        assert!(!report.outcomes[2].accepted_teammates.contains(&trusted[0]));
        assert_eq!(report.summary.trust_revocations, 1);
    }

    #[test]
    fn temporal_mode_skips_individual_calls() {
        let frames = bundles(&[false; 5], 10);
        let mut c = cfg(0, 3, 7);
        let individual = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        c.reference = ReferenceMode::Temporal;
        let temporal = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        assert_eq!(individual.summary.individual_calls, 10);
        assert_eq!(temporal.summary.individual_calls, 1);
        let decisions = |r: &SequenceReport| r.outcomes.iter().map(|o| o.consensus_reached).collect::<Vec<_>>();
        assert_eq!(decisions(&individual), decisions(&temporal));
    }

    #[test]
    fn sequence_is_deterministic() {
        let frames = bundles(&[false, true, false, true, false], 30);
        let c = cfg(2, 2, 11);
        let a = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        let b = robosac_sequence(&frames, &ToyModel, &c).unwrap();
        assert_eq!(a, b);
        let line = a.outcomes[0].to_json_line();
        let parsed: OutcomeRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed, a.outcomes[0].record());
    }
}
