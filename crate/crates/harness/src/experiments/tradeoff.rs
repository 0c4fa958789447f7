use rayon::prelude::*;
use robosac_core::sampling::{sampling_budget, success_probability_exact};
use robosac_core::sim::{baseline_output, evaluate_frame, Baseline, SimFusion};
use robosac_core::{ReferenceMode, TeamMode};

use crate::common::{accepted_clean, engine_for, mean, paired_difference, run_engine, scene_for, tag};
use crate::report::{within_three_se, Check, Report, Table};
use crate::{row, ExperimentSpec, HarnessError};

pub const TRADEOFF_BUDGETS: [u32; 4] = [1, 3, 5, 7];
const ATTACKERS: u32 = 1;
const SAMPLE_SIZE: u32 = 3;
/// Published success rates at budgets 1, 3, 5, 7.
const REPORTED_SUCCESS: [f64; 4] = [0.45, 0.77, 0.96, 1.00];

#[derive(Default, Clone)]
struct Series {
    success: Vec<bool>,
    ap50: Vec<f64>,
    ap70: Vec<f64>,
    steps: Vec<f64>,
}

struct RepeatResult {
    budgets: Vec<Series>,
    sizes: Vec<Series>,
    lower: Series,
    upper: Series,
}

/// Budgets {1,3,5,7} at eta = 0.2, s = 3 with common random numbers: every
/// budget sees the same scene and the same draw sequence, so a larger
/// budget only converts fallbacks into accepted subsets. Also sweeps the
/// sample size with its p = 0.99 budget.
pub fn run_tradeoff(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let team = spec.scenario.team_size;
    let eta = ATTACKERS as f64 / team as f64;
    let sizes: Vec<(u32, u32)> = (1..=team - ATTACKERS)
        .map(|s| Ok((s, sampling_budget(spec.engine.confidence, s, eta)?)))
        .collect::<Result<_, HarnessError>>()?;

    let repeats: Vec<RepeatResult> = (0..spec.repeats as u64)
        .into_par_iter()
        .map(|k| -> Result<RepeatResult, HarnessError> {
            let scene = scene_for(spec, ATTACKERS, &[tag::TRADEOFF, k])?;
            let model = SimFusion::default();
            let run = |s: u32, budget: u32| -> Result<Series, HarnessError> {
                let mut engine = engine_for(&scene, spec, s, budget, &[tag::TRADEOFF, k, tag::ENGINE]);
                engine.reference = ReferenceMode::Individual;
                engine.team_mode = TeamMode::Dynamic;
                let mut out = Series::default();
                for (i, o) in run_engine(&scene, &engine)?.iter().enumerate() {
                    let score = evaluate_frame(&o.output, &scene.frames[i].ground_truth)?;
                    out.success.push(accepted_clean(o, &scene));
                    out.ap50.push(score.ap50);
                    out.ap70.push(score.ap70);
                    out.steps.push(o.steps_used as f64);
                }
                Ok(out)
            };
            let baseline = |b: Baseline| -> Result<Series, HarnessError> {
                let mut out = Series::default();
                for i in 0..scene.frames.len() {
                    let score = evaluate_frame(&baseline_output(&scene, i, &model, b)?, &scene.frames[i].ground_truth)?;
                    out.ap50.push(score.ap50);
                    out.ap70.push(score.ap70);
                }
                Ok(out)
            };
            Ok(RepeatResult {
                budgets: TRADEOFF_BUDGETS.iter().map(|&n| run(SAMPLE_SIZE, n)).collect::<Result<_, _>>()?,
                sizes: sizes.iter().map(|&(s, n)| run(s, n)).collect::<Result<_, _>>()?,
                lower: baseline(Baseline::Individual)?,
                upper: baseline(Baseline::AllBenign)?,
            })
        })
        .collect::<Result<_, _>>()?;

    let concat = |pick: &dyn Fn(&RepeatResult) -> &Series| -> Series {
        let mut all = Series::default();
        for r in &repeats {
            let s = pick(r);
            all.success.extend(&s.success);
            all.ap50.extend(&s.ap50);
            all.ap70.extend(&s.ap70);
            all.steps.extend(&s.steps);
        }
        all
    };
    let rate = |s: &Series| s.success.iter().filter(|&&b| b).count() as f64 / s.success.len() as f64;
    let lower = concat(&|r| &r.lower);
    let upper = concat(&|r| &r.upper);

    let mut report = Report::new("tradeoff", spec.seed(), spec.repeats);
    let mut table = Table::new(
        "tradeoff",
        &[
            "budget", "frames", "success_rate", "success_exact", "reported_success", "mean_steps", "ap50", "ap70", "ap50_lower", "ap50_upper",
            "ap70_lower", "ap70_upper",
        ],
    );
    let by_budget: Vec<Series> = (0..TRADEOFF_BUDGETS.len()).map(|j| concat(&|r| &r.budgets[j])).collect();
    for (j, &n) in TRADEOFF_BUDGETS.iter().enumerate() {
        let s = &by_budget[j];
        let exact = success_probability_exact(team, ATTACKERS, SAMPLE_SIZE, n);
        table.push(row![
            n,
            s.success.len(),
            rate(s),
            exact,
            REPORTED_SUCCESS[j],
            mean(&s.steps),
            mean(&s.ap50),
            mean(&s.ap70),
            mean(&lower.ap50),
            mean(&upper.ap50),
            mean(&lower.ap70),
            mean(&upper.ap70),
        ]);
        report.checks.push(within_three_se(format!("success_within_3se[budget={n}]"), rate(s), exact, s.success.len()));
        let ap = mean(&s.ap50);
        report.checks.push(Check::new(
            format!("ap_bracketed[budget={n}]"),
            mean(&lower.ap50) <= ap && ap <= mean(&upper.ap50),
            format!("lower {:.4} <= {ap:.4} <= upper {:.4}", mean(&lower.ap50), mean(&upper.ap50)),
        ));
    }
    for j in 1..TRADEOFF_BUDGETS.len() {
        let (a, b) = (&by_budget[j - 1], &by_budget[j]);
        let (diff, se) = paired_difference(&b.ap50, &a.ap50);
        report.checks.push(Check::new(
            format!("ap_increases[budget {}->{}]", TRADEOFF_BUDGETS[j - 1], TRADEOFF_BUDGETS[j]),
            diff > 0.0,
            format!("mean AP50 gain {diff:.4} (paired SE {se:.4})"),
        ));
    }

    let mut by_size = Table::new("tradeoff_sample_size", &["s", "budget", "frames", "success_rate", "success_exact", "mean_steps", "ap50", "ap70"]);
    let size_series: Vec<Series> = (0..sizes.len()).map(|j| concat(&|r| &r.sizes[j])).collect();
    for (j, &(s, n)) in sizes.iter().enumerate() {
        let series = &size_series[j];
        by_size.push(row![
            s,
            n,
            series.success.len(),
            rate(series),
            success_probability_exact(team, ATTACKERS, s, n),
            mean(&series.steps),
            mean(&series.ap50),
            mean(&series.ap70),
        ]);
    }
    let aps: Vec<f64> = size_series.iter().map(|s| mean(&s.ap50)).collect();
    report.checks.push(Check::new(
        "ap_nondecreasing_in_s",
        aps.windows(2).all(|w| w[1] >= w[0]),
        format!("AP50 by s: {}", aps.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")),
    ));
    report.tables.push(table);
    report.tables.push(by_size);
    Ok(report)
}
