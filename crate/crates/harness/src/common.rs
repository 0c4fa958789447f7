use robosac_core::rng::derive_seed;
use robosac_core::sim::{generate_scene, sim_consensus, Scene, ScenarioConfig, SimFusion};
use robosac_core::{robosac_sequence, EngineConfig, RobosacOutcome, SamplingPlan};

use crate::spec::ExperimentSpec;
use crate::HarnessError;

/// Draw cap when the engine samples "without a budget".
pub const UNBUDGETED_DRAWS: u32 = 1_000;

/// Seed-derivation tags, one per experiment.
pub mod tag {
    pub const BOUNDS: u64 = 101;
    pub const TRADEOFF: u64 = 102;
    pub const ESTIMATION: u64 = 103;
    pub const MODES: u64 = 104;
    pub const ABLATION: u64 = 105;
    pub const CALIBRATE: u64 = 106;
    /// Second-level tag separating engine draws from scene generation.
    pub const ENGINE: u64 = 1;
}

/// Attacker head-count for a ratio on a team of `team_size`; the ratio must
/// land on the grid `k / team_size`.
pub fn attackers_for_ratio(ratio: f64, team_size: u32) -> Result<u32, HarnessError> {
    let a = (ratio * team_size as f64).round();
    if (a / team_size as f64 - ratio).abs() > 1e-9 || a < 0.0 || a > team_size as f64 {
        return Err(HarnessError::Config(format!("ratio {ratio} is not a multiple of 1/{team_size}")));
    }
    Ok(a as u32)
}

pub fn scene_for(spec: &ExperimentSpec, attackers: u32, seed_path: &[u64]) -> Result<Scene, HarnessError> {
    let cfg = ScenarioConfig { attacker_count: attackers, rng_seed: derive_seed(spec.seed(), seed_path), ..spec.scenario.clone() };
    Ok(generate_scene(&cfg)?)
}

/// Engine config for a simulated scene with an explicit plan.
pub fn engine_for(scene: &Scene, spec: &ExperimentSpec, sample_size: u32, budget: u32, seed_path: &[u64]) -> EngineConfig {
    let cfg = &scene.config;
    let plan = SamplingPlan {
        attacker_ratio: cfg.attacker_ratio(),
        team_size: cfg.team_size,
        sample_size,
        budget,
        confidence: spec.engine.confidence,
    };
    let mut engine = EngineConfig::new(plan, sim_consensus(cfg, spec.engine.epsilon), derive_seed(spec.seed(), seed_path));
    engine.reference = spec.engine.reference;
    engine.team_mode = spec.engine.team_mode;
    engine.redraw = spec.engine.redraw;
    engine
}

pub fn run_engine(scene: &Scene, engine: &EngineConfig) -> Result<Vec<RobosacOutcome>, HarnessError> {
    Ok(robosac_sequence(&scene.bundles(), &SimFusion::default(), engine)?.outcomes)
}

/// Consensus on a subset the hidden roles say is attacker-free.
pub fn accepted_clean(outcome: &RobosacOutcome, scene: &Scene) -> bool {
    outcome.consensus_reached
        && !outcome.accepted_teammates.is_empty()
        && outcome.accepted_teammates.iter().all(|&id| !scene.is_attacker(id))
}

/// Consensus on a subset holding an attacker.
pub fn accepted_attacker(outcome: &RobosacOutcome, scene: &Scene) -> bool {
    outcome.consensus_reached && outcome.accepted_teammates.iter().any(|&id| scene.is_attacker(id))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error of paired differences `a - b`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = mean(&d);
    if d.len() < 2 {
        return (m, 0.0);
    }
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    (m, (var / d.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_to_attackers() {
        assert_eq!(attackers_for_ratio(0.4, 5).unwrap(), 2);
        assert_eq!(attackers_for_ratio(1.0, 5).unwrap(), 5);
        assert!(attackers_for_ratio(0.3, 5).is_err());
    }

    #[test]
    fn paired_difference_by_hand() {
        let (m, se) = paired_difference(&[3.0, 5.0, 7.0], &[1.0, 2.0, 3.0]);
        assert_eq!(m, 3.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
