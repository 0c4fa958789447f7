use rayon::prelude::*;
use robosac_core::sampling::sampling_budget;
use robosac_core::sim::{baseline_output, evaluate_frame, Baseline, SimFusion};
use robosac_core::{ReferenceMode, RobosacOutcome, TeamMode};

use crate::common::{accepted_clean, engine_for, mean, paired_difference, run_engine, scene_for, tag};
use crate::report::{Check, Report, Table};
use crate::{row, ExperimentSpec, HarnessError};

const ATTACKERS: u32 = 1;
const SAMPLE_SIZE: u32 = 3;
const MODES: [(&str, ReferenceMode, TeamMode); 3] = [
    ("dynamic", ReferenceMode::Individual, TeamMode::Dynamic),
    ("static", ReferenceMode::Individual, TeamMode::Static),
    ("temporal", ReferenceMode::Temporal, TeamMode::Dynamic),
];
const BASELINES: [(&str, Baseline); 3] =
    [("no_defense", Baseline::NoDefense), ("individual", Baseline::Individual), ("all_benign", Baseline::AllBenign)];

#[derive(Default)]
struct ModeStats {
    steps: Vec<f64>,
    fused_calls: Vec<f64>,
    individual_calls: Vec<f64>,
    success: Vec<bool>,
    ap50: Vec<f64>,
    ap70: Vec<f64>,
    revocations: usize,
}

impl ModeStats {
    fn extend(&mut self, other: ModeStats) {
        self.steps.extend(other.steps);
        self.fused_calls.extend(other.fused_calls);
        self.individual_calls.extend(other.individual_calls);
        self.success.extend(other.success);
        self.ap50.extend(other.ap50);
        self.ap70.extend(other.ap70);
        self.revocations += other.revocations;
    }
}

struct RepeatResult {
    modes: Vec<ModeStats>,
    baselines: Vec<Vec<f64>>,
    first_outcomes: Vec<Vec<RobosacOutcome>>,
}

/// Dynamic vs static team vs temporal reference at eta = 0.2, s = 3 and the
/// p = 0.99 budget, plus the AP ordering against the baselines.
pub fn run_modes(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let team = spec.scenario.team_size;
    let budget = sampling_budget(spec.engine.confidence, SAMPLE_SIZE, ATTACKERS as f64 / team as f64)?;
    let repeats: Vec<RepeatResult> = (0..spec.repeats as u64)
        .into_par_iter()
        .map(|k| -> Result<RepeatResult, HarnessError> {
            let scene = scene_for(spec, ATTACKERS, &[tag::MODES, k])?;
            let model = SimFusion::default();
            let mut modes = Vec::new();
            let mut first_outcomes = Vec::new();
            for (_, reference, team_mode) in MODES {
                let mut engine = engine_for(&scene, spec, SAMPLE_SIZE, budget, &[tag::MODES, k, tag::ENGINE]);
                engine.reference = reference;
                engine.team_mode = team_mode;
                let outcomes = run_engine(&scene, &engine)?;
                let mut stats = ModeStats::default();
                for (i, o) in outcomes.iter().enumerate() {
                    let score = evaluate_frame(&o.output, &scene.frames[i].ground_truth)?;
                    stats.steps.push(o.steps_used as f64);
                    stats.fused_calls.push(o.fused_calls as f64);
                    stats.individual_calls.push(o.individual_calls as f64);
                    stats.success.push(accepted_clean(o, &scene));
                    stats.ap50.push(score.ap50);
                    stats.ap70.push(score.ap70);
                    stats.revocations += o.trust_revoked as usize;
                }
                modes.push(stats);
                first_outcomes.push(if k == 0 { outcomes } else { Vec::new() });
            }
            let baselines = BASELINES
                .iter()
                .map(|&(_, b)| {
                    (0..scene.frames.len())
                        .map(|i| Ok(evaluate_frame(&baseline_output(&scene, i, &model, b)?, &scene.frames[i].ground_truth)?.ap50))
                        .collect::<Result<Vec<f64>, HarnessError>>()
                })
                .collect::<Result<_, _>>()?;
            Ok(RepeatResult { modes, baselines, first_outcomes })
        })
        .collect::<Result<_, _>>()?;

    let mut modes: Vec<ModeStats> = MODES.iter().map(|_| ModeStats::default()).collect();
    let mut baselines: Vec<Vec<f64>> = vec![Vec::new(); BASELINES.len()];
    let mut report = Report::new("modes", spec.seed(), spec.repeats);
    for (k, r) in repeats.into_iter().enumerate() {
        for (j, m) in r.modes.into_iter().enumerate() {
            modes[j].extend(m);
        }
        for (j, b) in r.baselines.into_iter().enumerate() {
            baselines[j].extend(b);
        }
        if k == 0 {
            for (j, outcomes) in r.first_outcomes.iter().enumerate() {
                let body: String = outcomes.iter().map(|o| o.to_json_line() + "\n").collect();
                report.attachments.push((format!("outcomes_{}.jsonl", MODES[j].0), body));
            }
        }
    }

    let rate = |m: &ModeStats| m.success.iter().filter(|&&b| b).count() as f64 / m.success.len() as f64;
    let mut table = Table::new(
        "modes",
        &["mode", "frames", "mean_steps", "fused_calls_per_frame", "individual_calls_per_frame", "success_rate", "ap50", "ap70", "trust_revocations"],
    );
    for (j, (name, _, _)) in MODES.iter().enumerate() {
        let m = &modes[j];
        table.push(row![
            *name,
            m.steps.len(),
            mean(&m.steps),
            mean(&m.fused_calls),
            mean(&m.individual_calls),
            rate(m),
            mean(&m.ap50),
            mean(&m.ap70),
            m.revocations,
        ]);
        report.checks.push(Check::new(format!("success_at_least_0.9[{name}]"), rate(m) >= 0.9, format!("success {:.4}", rate(m))));
    }
    let (dynamic, stat, temporal) = (&modes[0], &modes[1], &modes[2]);
    report.checks.push(Check::new(
        "static_fewer_steps_than_dynamic",
        mean(&stat.steps) < mean(&dynamic.steps),
        format!("static {:.3} vs dynamic {:.3} steps/frame", mean(&stat.steps), mean(&dynamic.steps)),
    ));
    report.checks.push(Check::new(
        "temporal_fewer_individual_calls",
        mean(&temporal.individual_calls) < mean(&dynamic.individual_calls),
        format!("temporal {:.3} vs individual-reference {:.3} calls/frame", mean(&temporal.individual_calls), mean(&dynamic.individual_calls)),
    ));

    let mut ordering = Table::new("ap_ordering", &["pipeline", "frames", "ap50", "paired_diff_vs_next", "paired_se"]);
    let chain: Vec<(&str, &Vec<f64>)> =
        vec![("no_defense", &baselines[0]), ("individual", &baselines[1]), ("robosac", &dynamic.ap50), ("all_benign", &baselines[2])];
    for (j, (name, aps)) in chain.iter().enumerate() {
        let (diff, se) = chain.get(j + 1).map_or((f64::NAN, f64::NAN), |(_, next)| paired_difference(next, aps));
        ordering.push(row![*name, aps.len(), mean(aps), diff, se]);
    }
    for j in 0..2 {
        let (lo, hi) = (chain[j], chain[j + 1]);
        let (diff, se) = paired_difference(hi.1, lo.1);
        report.checks.push(Check::new(
            format!("ap_{}_below_{}", lo.0, hi.0),
            diff > 3.0 * se,
            format!("gain {diff:.4}, 3SE {:.4}", 3.0 * se),
        ));
    }
    let (diff, se) = paired_difference(chain[2].1, chain[3].1);
    report.checks.push(Check::new(
        "ap_robosac_at_most_all_benign",
        diff <= 3.0 * se,
        format!("robosac - all_benign {diff:.4}, 3SE {:.4}", 3.0 * se),
    ));
    report.tables.push(table);
    report.tables.push(ordering);
    Ok(report)
}
