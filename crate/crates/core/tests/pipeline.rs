use std::convert::Infallible;

use robosac_core::sampling::SamplingPlan;
use robosac_core::sim::{generate_scene, sim_consensus, ScenarioConfig, SimFusion};
use robosac_core::{
    robosac_sequence, AgentMessage, ConsensusConfig, DetectionSet, EngineConfig, FrameBundle, FusionModel, OrientedBox, TeamMode,
};

/// Fusion by concatenation: each agent's payload is its detection list.
struct Union;

impl FusionModel for Union {
    type Payload = Vec<OrientedBox>;
    type Error = Infallible;

    fn predict_individual(&self, ego: &AgentMessage<Self::Payload>) -> Result<DetectionSet, Infallible> {
        Ok(DetectionSet::new(0, ego.payload.clone()))
    }

    fn predict_fused(&self, ego: &AgentMessage<Self::Payload>, teammates: &[&AgentMessage<Self::Payload>]) -> Result<DetectionSet, Infallible> {
        let mut boxes = ego.payload.clone();
        for m in teammates {
            boxes.extend(m.payload.iter().filter(|b| !boxes.iter().any(|o| o.center_x == b.center_x && o.center_y == b.center_y)).copied().collect::<Vec<_>>());
        }
        Ok(DetectionSet::new(0, boxes))
    }
}

fn toy_frames(attackers: &[u32]) -> Vec<FrameBundle<Vec<OrientedBox>>> {
    let shared: Vec<OrientedBox> = (0..4).map(|i| OrientedBox::new(10.0 * i as f64, 0.0, 4.5, 1.9, 0.0)).collect();
    (0..30)
        .map(|f| FrameBundle {
            frame_id: f,
            ego: AgentMessage { agent_id: 0, payload: shared.clone() },
            teammates: (1..=5)
                .map(|id| {
                    let mut payload = shared.clone();
                    if attackers.contains(&id) {
                        payload.extend((0..6).map(|k| OrientedBox::new(5.0 + 10.0 * k as f64, 20.0, 4.5, 1.9, 0.3)));
                    }
                    AgentMessage { agent_id: id, payload }
                })
                .collect(),
        })
        .collect()
}

#[test]
fn generic_model_never_accepts_an_attacker() {
    let plan = SamplingPlan::from_budget(5, 2, 11, 0.99).unwrap();
    let cfg = EngineConfig::new(plan, ConsensusConfig::jaccard(0.3), 17);
    let report = robosac_sequence(&toy_frames(&[2, 4]), &Union, &cfg).unwrap();
    for o in &report.outcomes {
        assert!(!o.accepted_teammates.contains(&2) && !o.accepted_teammates.contains(&4));
        if !o.consensus_reached {
            assert_eq!(o.steps_used, 11);
            assert!(o.accepted_teammates.is_empty());
        }
    }
    assert!(report.summary.consensus_frames >= 25, "{:?}", report.summary);
}

#[test]
fn attacker_free_sim_team_agrees_on_the_first_draw() {
    let scenario = ScenarioConfig { attacker_count: 0, frames: 30, rng_seed: 4, ..Default::default() };
    let scene = generate_scene(&scenario).unwrap();
    let plan = SamplingPlan::from_sample_size(5, 0, 3, 0.99).unwrap();
    let cfg = EngineConfig::new(plan, sim_consensus(&scenario, 0.3), 1);
    let report = robosac_sequence(&scene.bundles(), &SimFusion::default(), &cfg).unwrap();
    assert!(report.outcomes.iter().all(|o| o.consensus_reached && o.steps_used == 1 && o.accepted_teammates.len() == 3));
}

#[test]
fn static_team_keeps_benign_trust_and_is_reproducible() {
    let scenario = ScenarioConfig { attacker_count: 1, frames: 40, rng_seed: 8, ..Default::default() };
    let scene = generate_scene(&scenario).unwrap();
    let plan = SamplingPlan::from_sample_size(5, 1, 3, 0.99).unwrap();
    let mut cfg = EngineConfig::new(plan, sim_consensus(&scenario, 0.3), 3);
    cfg.team_mode = TeamMode::Static;
    let run = || robosac_sequence(&scene.bundles(), &SimFusion::default(), &cfg).unwrap();
    let (a, b) = (run(), run());
    let lines = |r: &robosac_core::engine::SequenceReport| r.outcomes.iter().map(|o| o.to_json_line()).collect::<Vec<_>>();
    assert_eq!(lines(&a), lines(&b));
    let attacker = scene.attacker_ids()[0];
    assert!(a.outcomes.iter().all(|o| !o.accepted_teammates.contains(&attacker)));
    // after the first acceptance each frame costs a single verification
    assert!(a.summary.fused_calls < 2 * a.summary.frames as u64, "{:?}", a.summary);
}
