use rayon::prelude::*;
use robosac_core::sampling::sampling_budget;
use robosac_core::sim::{calibrate_severity, evaluate_frame, AttackConfig, AttackKind, CalibrationOptions, ScenarioConfig};
use robosac_core::{ReferenceMode, TeamMode};

use crate::common::{accepted_attacker, accepted_clean, engine_for, mean, run_engine, scene_for, tag};
use crate::report::{Check, Report, Table};
use crate::{row, ExperimentSpec, HarnessError};

pub const ABLATION_EPSILONS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
/// Two attack families at two strengths, standing in for two iteration
/// counts of two gradient attacks.
pub const ABLATION_ATTACKS: [(AttackKind, f64); 4] =
    [(AttackKind::FpFlood, 0.75), (AttackKind::FpFlood, 1.0), (AttackKind::Mixed, 0.75), (AttackKind::Mixed, 1.0)];
const ATTACKERS: u32 = 1;
const SAMPLE_SIZE: u32 = 3;
const CALIBRATED_EPSILON: f64 = 0.3;
/// Largest success-rate spread across attack kinds at one epsilon.
const MAX_KIND_SPREAD: f64 = 0.1;

fn kind_name(kind: AttackKind) -> &'static str {
    match kind {
        AttackKind::FpFlood => "fp_flood",
        AttackKind::FnSuppress => "fn_suppress",
        AttackKind::Mixed => "mixed",
        AttackKind::Subtle => "subtle",
    }
}

struct Cell {
    success: Vec<bool>,
    false_accepts: usize,
    ap50: Vec<f64>,
    ap70: Vec<f64>,
}

/// Success and AP over an epsilon x attack grid at eta = 0.2, s = 3, p = 0.99
/// budget. Scenes and draws are shared across epsilons for each attack.
pub fn run_ablation_epsilon(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let team = spec.scenario.team_size;
    let budget = sampling_budget(spec.engine.confidence, SAMPLE_SIZE, ATTACKERS as f64 / team as f64)?;
    let jobs: Vec<(usize, usize, u64)> = (0..ABLATION_EPSILONS.len())
        .flat_map(|e| (0..ABLATION_ATTACKS.len()).flat_map(move |a| (0..spec.repeats as u64).map(move |k| (e, a, k))))
        .collect();
    let cells: Vec<Cell> = jobs
        .par_iter()
        .map(|&(e, a, k)| -> Result<Cell, HarnessError> {
            let (kind, severity) = ABLATION_ATTACKS[a];
            let mut local = spec.clone();
            local.scenario.attack = AttackConfig { kind, severity };
            local.engine.epsilon = ABLATION_EPSILONS[e];
            let scene = scene_for(&local, ATTACKERS, &[tag::ABLATION, a as u64, k])?;
            let mut engine = engine_for(&scene, &local, SAMPLE_SIZE, budget, &[tag::ABLATION, a as u64, k, tag::ENGINE]);
            engine.reference = ReferenceMode::Individual;
            engine.team_mode = TeamMode::Dynamic;
            let outcomes = run_engine(&scene, &engine)?;
            let mut cell = Cell { success: Vec::new(), false_accepts: 0, ap50: Vec::new(), ap70: Vec::new() };
            for (i, o) in outcomes.iter().enumerate() {
                let score = evaluate_frame(&o.output, &scene.frames[i].ground_truth)?;
                cell.success.push(accepted_clean(o, &scene));
                cell.false_accepts += accepted_attacker(o, &scene) as usize;
                cell.ap50.push(score.ap50);
                cell.ap70.push(score.ap70);
            }
            Ok(cell)
        })
        .collect::<Result<_, _>>()?;

    let mut report = Report::new("ablation-epsilon", spec.seed(), spec.repeats);
    let mut table = Table::new("ablation_epsilon", &["epsilon", "attack", "severity", "frames", "success_rate", "false_accept_rate", "ap50", "ap70"]);
    let reps = spec.repeats as usize;
    let mut rates = vec![vec![0.0; ABLATION_ATTACKS.len()]; ABLATION_EPSILONS.len()];
    for (e, &eps) in ABLATION_EPSILONS.iter().enumerate() {
        for (a, &(kind, severity)) in ABLATION_ATTACKS.iter().enumerate() {
            let start = (e * ABLATION_ATTACKS.len() + a) * reps;
            let chunk = &cells[start..start + reps];
            let success: Vec<bool> = chunk.iter().flat_map(|c| c.success.iter().copied()).collect();
            let frames = success.len();
            let rate = success.iter().filter(|&&b| b).count() as f64 / frames as f64;
            rates[e][a] = rate;
            let ap50: Vec<f64> = chunk.iter().flat_map(|c| c.ap50.iter().copied()).collect();
            let ap70: Vec<f64> = chunk.iter().flat_map(|c| c.ap70.iter().copied()).collect();
            let false_accepts: usize = chunk.iter().map(|c| c.false_accepts).sum();
            table.push(row![eps, kind_name(kind), severity, frames, rate, false_accepts as f64 / frames as f64, mean(&ap50), mean(&ap70)]);
        }
    }
    for (e, &eps) in ABLATION_EPSILONS.iter().enumerate() {
        let lo = rates[e].iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rates[e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        report.checks.push(Check::new(
            format!("attack_kind_spread_below_0.1[eps={eps}]"),
            hi - lo < MAX_KIND_SPREAD,
            format!("success rates {:?}", rates[e].iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>()),
        ));
    }
    let at = |eps: f64| ABLATION_EPSILONS.iter().position(|&x| (x - eps).abs() < 1e-12).expect("epsilon on the grid");
    let calibrated = &rates[at(CALIBRATED_EPSILON)];
    report.checks.push(Check::new(
        "calibrated_epsilon_success_at_least_0.95",
        calibrated.iter().all(|&r| r >= 0.95),
        format!("success at eps {CALIBRATED_EPSILON}: {calibrated:?}"),
    ));
    let loose = mean(&rates[at(0.5)]);
    report.checks.push(Check::new(
        "loose_epsilon_not_better",
        loose <= mean(calibrated),
        format!("mean success eps 0.5 {loose:.4} vs eps {CALIBRATED_EPSILON} {:.4}", mean(calibrated)),
    ));

    // any epsilon in (clean_p99, attacked_p01) separates the two d distributions
    let mut bands = Table::new("epsilon_band", &["attack", "severity", "frames", "clean_p99", "attacked_p01", "separated"]);
    let reports = ABLATION_ATTACKS
        .par_iter()
        .enumerate()
        .map(|(a, &(kind, severity))| {
            let cfg = ScenarioConfig {
                attack: AttackConfig { kind, severity },
                rng_seed: robosac_core::rng::derive_seed(spec.seed(), &[tag::ABLATION, a as u64, u64::MAX]),
                ..spec.scenario.clone()
            };
            let opts = CalibrationOptions { epsilon: CALIBRATED_EPSILON, sample_size: SAMPLE_SIZE, ..Default::default() };
            calibrate_severity(&cfg, &opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (&(kind, severity), c) in ABLATION_ATTACKS.iter().zip(&reports) {
        let separated = c.clean.p99 < c.attacked.p01;
        bands.push(row![kind_name(kind), severity, c.frames, c.clean.p99, c.attacked.p01, separated]);
    }
    report.tables.push(table);
    report.tables.push(bands);
    Ok(report)
}
