use rand::seq::{index, IndexedRandom};
use serde::{Deserialize, Serialize};

use super::fusion::SimFusion;
use super::scenario::{generate_scene, AttackConfig, Scene, ScenarioConfig, SimMessage};
use super::SimError;
use crate::engine::{AgentId, FusionModel, RobosacOutcome};
use crate::geometry::{average_precision, difference_measure, ConsensusConfig, DetectionSet, DifferenceMode};
use crate::rng::{derive_seed, substream, tag};

pub const DEFAULT_EPSILON: f64 = 0.3;

/// The consensus check used with simulated scenes: ego-FoV mode on the
/// ego's own sensing disc.
pub fn sim_consensus(cfg: &ScenarioConfig, epsilon: f64) -> ConsensusConfig {
    ConsensusConfig::ego_fov(epsilon, cfg.ego_fov())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub epsilon: f64,
    /// Required gap between the attacked 1st and clean 99th percentiles.
    pub target_separation: f64,
    pub sample_size: u32,
    pub min_frames: usize,
    pub mode: DifferenceMode,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { epsilon: DEFAULT_EPSILON, target_separation: 0.05, sample_size: 3, min_frames: 1000, mode: DifferenceMode::EgoFov }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p01: f64,
    pub p50: f64,
    pub p99: f64,
    pub mean: f64,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            p01: quantile(&v, 0.01),
            p50: quantile(&v, 0.5),
            p99: quantile(&v, 0.99),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS p-value (Kolmogorov series).
pub fn ks_p_value(d: f64, n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let sum: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            (if k as u64 % 2 == 1 { 2.0 } else { -2.0 }) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    sum.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub attack: AttackConfig,
    pub epsilon: f64,
    pub frames: usize,
    pub clean: Quantiles,
    pub attacked: Quantiles,
    /// `attacked.p01 - clean.p99`.
    pub separation: f64,
    pub pass: bool,
    #[serde(skip)]
    pub clean_d: Vec<f64>,
    #[serde(skip)]
    pub attacked_d: Vec<f64>,
}

/// Distance to the individual prediction for fusions over benign-only
/// subsets versus subsets holding at least one attacker.
///
/// Runs `ceil(min_frames / cfg.frames)` scenes with seeds derived from
/// `cfg.rng_seed`; every frame contributes one clean and one attacked
/// sample. PASS iff `clean.p99 < epsilon < attacked.p01` and the gap
/// reaches `target_separation`.
pub fn calibrate_severity(cfg: &ScenarioConfig, opts: &CalibrationOptions) -> Result<CalibrationReport, SimError> {
    cfg.validate()?;
    let s = opts.sample_size as usize;
    let benign_count = (cfg.team_size - cfg.attacker_count) as usize;
    if cfg.attacker_count == 0 || s == 0 || benign_count < s {
        return Err(SimError::InvalidConfig(format!(
            "calibration needs an attacker and {s} benign teammates (team {}, attackers {})",
            cfg.team_size, cfg.attacker_count
        )));
    }
    let consensus = ConsensusConfig { mode: opts.mode, ..sim_consensus(cfg, opts.epsilon) };
    consensus.validate()?;
    let model = SimFusion::default();
    let scenes = opts.min_frames.div_ceil(cfg.frames as usize).max(1);

    let mut clean_d = Vec::new();
    let mut attacked_d = Vec::new();
    for scene_index in 0..scenes as u64 {
        let scene_cfg = ScenarioConfig { rng_seed: derive_seed(cfg.rng_seed, &[tag::CALIBRATION, scene_index]), ..cfg.clone() };
        let scene = generate_scene(&scene_cfg)?;
        let attackers = scene.attacker_ids();
        let benign = scene.benign_ids();
        for (i, bundle) in scene.bundles().iter().enumerate() {
            let mut rng = substream(cfg.rng_seed, &[tag::CALIBRATION, scene_index, i as u64]);
            let individual = model.predict_individual(&bundle.ego)?;
            let pick = |ids: &[AgentId]| -> Vec<&SimMessage> { bundle.teammates.iter().filter(|m| ids.contains(&m.agent_id)).collect() };

            let clean_ids: Vec<AgentId> = index::sample(&mut rng, benign.len(), s).iter().map(|k| benign[k]).collect();
            let clean = model.predict_fused(&bundle.ego, &pick(&clean_ids))?;
            clean_d.push(difference_measure(&clean, &individual, &consensus)?);

            let attacker = *attackers.choose(&mut rng).expect("at least one attacker");
            let others: Vec<AgentId> = scene.teammate_ids().into_iter().filter(|&id| id != attacker).collect();
            let mut attacked_ids: Vec<AgentId> = index::sample(&mut rng, others.len(), s - 1).iter().map(|k| others[k]).collect();
            attacked_ids.push(attacker);
            let attacked = model.predict_fused(&bundle.ego, &pick(&attacked_ids))?;
            attacked_d.push(difference_measure(&attacked, &individual, &consensus)?);
        }
    }
    let clean = Quantiles::of(&clean_d);
    let attacked = Quantiles::of(&attacked_d);
    let separation = attacked.p01 - clean.p99;
    let pass = clean.p99 < opts.epsilon && opts.epsilon < attacked.p01 && separation >= opts.target_separation;
    Ok(CalibrationReport { attack: cfg.attack, epsilon: opts.epsilon, frames: clean_d.len(), clean, attacked, separation, pass, clean_d, attacked_d })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub ap50: f64,
    pub ap70: f64,
}

/// AP at IoU 0.5 and 0.7 against every ground-truth object in the world.
pub fn evaluate_frame(output: &DetectionSet, ground_truth: &DetectionSet) -> Result<FrameScore, SimError> {
    Ok(FrameScore { ap50: average_precision(output, ground_truth, 0.5)?, ap70: average_precision(output, ground_truth, 0.7)? })
}

pub fn evaluate_outcome(outcome: &RobosacOutcome, scene: &Scene, index: usize) -> Result<FrameScore, SimError> {
    evaluate_frame(&outcome.output, &scene.frames[index].ground_truth)
}

/// Reference pipelines the defense is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Ego perception only; the lower bound.
    Individual,
    /// Fuse every teammate, attackers included.
    NoDefense,
    /// Fuse benign teammates only, using the hidden roles; the upper bound.
    AllBenign,
}

pub fn baseline_output(scene: &Scene, index: usize, model: &SimFusion, baseline: Baseline) -> Result<DetectionSet, SimError> {
    let bundle = scene.bundle(index);
    let mates: Vec<&SimMessage> = match baseline {
        Baseline::Individual => Vec::new(),
        Baseline::NoDefense => bundle.teammates.iter().collect(),
        Baseline::AllBenign => bundle.teammates.iter().filter(|m| !scene.is_attacker(m.agent_id)).collect(),
    };
    model.predict_fused(&bundle.ego, &mates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::AttackKind;
    use rand::{Rng, SeedableRng};

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.125), 0.5);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }

    #[test]
    fn ks_statistic_by_hand() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_statistic(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
        assert!(ks_p_value(ks_statistic(&a, &b), 2000, 2000) > 0.01);
        let c: Vec<f64> = (0..2000).map(|_| rng.random::<f64>() + 0.1).collect();
        assert!(ks_p_value(ks_statistic(&a, &c), 2000, 2000) < 1e-6);
    }

    #[test]
    fn default_attack_calibrates() {
        let report = calibrate_severity(&ScenarioConfig::default(), &CalibrationOptions::default()).unwrap();
        assert!(report.frames >= 1000);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn each_attack_kind_calibrates_at_full_severity() {
        for kind in [AttackKind::FnSuppress, AttackKind::Mixed, AttackKind::Subtle] {
            let cfg = ScenarioConfig { attack: AttackConfig { kind, severity: 1.0 }, rng_seed: 3, ..Default::default() };
            let report = calibrate_severity(&cfg, &CalibrationOptions::default()).unwrap();
            assert!(report.pass, "{kind:?}: {report:?}");
        }
    }

    #[test]
    fn severity_zero_is_indistinguishable() {
        // short scenes so attacker identity and layout vary across many samples
        let cfg = ScenarioConfig { attack: AttackConfig { kind: AttackKind::Mixed, severity: 0.0 }, rng_seed: 11, frames: 10, ..Default::default() };
        let report = calibrate_severity(&cfg, &CalibrationOptions::default()).unwrap();
        assert!(!report.pass);
        let p = ks_p_value(ks_statistic(&report.clean_d, &report.attacked_d), report.frames, report.frames);
        assert!(p > 0.01, "KS p = {p}");
    }

    #[test]
    fn weak_subtle_attack_fails_calibration() {
        let cfg = ScenarioConfig { attack: AttackConfig { kind: AttackKind::Subtle, severity: 0.1 }, ..Default::default() };
        assert!(!calibrate_severity(&cfg, &CalibrationOptions::default()).unwrap().pass);
    }

    #[test]
    fn calibration_needs_attackers() {
        let cfg = ScenarioConfig { attacker_count: 0, ..Default::default() };
        assert!(calibrate_severity(&cfg, &CalibrationOptions::default()).is_err());
    }

    #[test]
    fn perfect_output_scores_one() {
        let scene = generate_scene(&ScenarioConfig::default()).unwrap();
        let gt = &scene.frames[0].ground_truth;
        assert_eq!(evaluate_frame(gt, gt).unwrap(), FrameScore { ap50: 1.0, ap70: 1.0 });
    }

    #[test]
    fn all_seeing_ego_gains_nothing_from_fusion() {
        let cfg = ScenarioConfig { ego_fov_radius: 160.0, attacker_count: 0, frames: 20, ..Default::default() };
        let scene = generate_scene(&cfg).unwrap();
        let model = SimFusion::default();
        let (mut solo, mut fused) = (0.0, 0.0);
        for i in 0..scene.frames.len() {
            assert_eq!(scene.frames[i].visible[0].len(), cfg.object_count as usize);
            let gt = &scene.frames[i].ground_truth;
            solo += evaluate_frame(&baseline_output(&scene, i, &model, Baseline::Individual).unwrap(), gt).unwrap().ap50;
            fused += evaluate_frame(&baseline_output(&scene, i, &model, Baseline::AllBenign).unwrap(), gt).unwrap().ap50;
        }
        let gain = (fused - solo) / scene.frames.len() as f64;
        assert!(gain.abs() < 0.05, "gain {gain}");
    }

    #[test]
    fn baselines_order_as_expected() {
        let model = SimFusion::default();
        let mut totals = [0.0; 3];
        for seed in 0..3 {
            let scene = generate_scene(&ScenarioConfig { rng_seed: seed, frames: 10, ..Default::default() }).unwrap();
            for i in 0..scene.frames.len() {
                for (slot, b) in [Baseline::NoDefense, Baseline::Individual, Baseline::AllBenign].into_iter().enumerate() {
                    let out = baseline_output(&scene, i, &model, b).unwrap();
                    totals[slot] += evaluate_frame(&out, &scene.frames[i].ground_truth).unwrap().ap50;
                }
            }
        }
        assert!(totals[0] < totals[1] && totals[1] < totals[2], "{totals:?}");
    }
}
