use rayon::prelude::*;
use robosac_core::rng::derive_seed;
use robosac_core::sim::{
    calibrate_severity, generate_scene, ks_p_value, ks_statistic, AttackConfig, AttackKind, CalibrationOptions, CalibrationReport, ScenarioConfig,
};

use crate::common::tag;
use crate::report::{Check, Report, Table};
use crate::{row, ExperimentSpec, HarnessError};

/// Subtle-attack severities swept downward to locate the detection limit.
pub const SUBTLE_SWEEP: [f64; 10] = [1.0, 0.8, 0.6, 0.5, 0.4, 0.35, 0.3, 0.25, 0.2, 0.1];
/// Subtle attacks weaker than this are expected to slip under epsilon.
pub const SUBTLE_FAIL_BELOW: f64 = 0.3;
/// Scene length for the severity-0 test; short scenes vary layout and
/// attacker identity across many samples.
const KS_SCENE_FRAMES: u32 = 10;

fn row_for(table: &mut Table, label: &str, r: &CalibrationReport) {
    table.push(row![
        label,
        r.attack.severity,
        r.frames,
        r.clean.p01,
        r.clean.p50,
        r.clean.p99,
        r.attacked.p01,
        r.attacked.p50,
        r.attacked.p99,
        r.separation,
        r.pass,
    ]);
}

/// Calibration gate on the configured attack, a downward subtle sweep, and
/// a two-sample test that severity 0 is indistinguishable from benign.
pub fn run_calibrate(spec: &ExperimentSpec) -> Result<Report, HarnessError> {
    let opts = CalibrationOptions { epsilon: spec.engine.epsilon, sample_size: spec.engine.sample_size, ..Default::default() };
    let base = ScenarioConfig { rng_seed: derive_seed(spec.seed(), &[tag::CALIBRATE]), ..spec.scenario.clone() };

    let mut configs = vec![("configured".to_string(), base.clone())];
    for &severity in &SUBTLE_SWEEP {
        configs.push(("subtle".into(), ScenarioConfig { attack: AttackConfig { kind: AttackKind::Subtle, severity }, ..base.clone() }));
    }
    let zero = ScenarioConfig { attack: AttackConfig { severity: 0.0, ..base.attack }, frames: KS_SCENE_FRAMES, ..base.clone() };
    configs.push(("severity_zero".into(), zero));

    let reports: Vec<CalibrationReport> =
        configs.par_iter().map(|(_, cfg)| calibrate_severity(cfg, &opts)).collect::<Result<_, _>>()?;

    let mut report = Report::new("calibrate", spec.seed(), spec.repeats);
    let mut table = Table::new(
        "calibration",
        &[
            "attack", "severity", "frames", "clean_p01", "clean_p50", "clean_p99", "attacked_p01", "attacked_p50", "attacked_p99", "separation",
            "pass",
        ],
    );
    for ((label, cfg), r) in configs.iter().zip(&reports) {
        let name = if label == "configured" { serde_json::to_value(cfg.attack.kind)?.as_str().unwrap_or_default().to_string() } else { label.clone() };
        row_for(&mut table, &name, r);
    }

    let configured = &reports[0];
    report.checks.push(Check::new(
        "configured_attack_passes",
        configured.pass,
        format!(
            "clean p99 {:.4} < eps {} < attacked p01 {:.4}",
            configured.clean.p99, opts.epsilon, configured.attacked.p01
        ),
    ));

    let sweep = &reports[1..=SUBTLE_SWEEP.len()];
    let weakest_pass = SUBTLE_SWEEP.iter().zip(sweep).filter(|(_, r)| r.pass).map(|(&s, _)| s).fold(f64::NAN, f64::min);
    let weak_fail = SUBTLE_SWEEP.iter().zip(sweep).filter(|(&s, _)| s < SUBTLE_FAIL_BELOW).all(|(_, r)| !r.pass);
    report.checks.push(Check::new(
        "subtle_attack_fails_below_boundary",
        weak_fail && sweep.iter().any(|r| r.pass),
        format!("weakest passing subtle severity {weakest_pass}; every severity below {SUBTLE_FAIL_BELOW} fails: {weak_fail}"),
    ));

    let zero = reports.last().expect("severity-zero run");
    let p = ks_p_value(ks_statistic(&zero.clean_d, &zero.attacked_d), zero.clean_d.len(), zero.attacked_d.len());
    report.checks.push(Check::new("severity_zero_indistinguishable", !zero.pass && p > 0.01, format!("KS p-value {p:.4}, gate pass {}", zero.pass)));

    // ground truth of one scene in the DetectionSet line format
    let scene = generate_scene(&base)?;
    let dump: String = scene.frames.iter().map(|f| f.ground_truth.to_json() + "\n").collect();
    report.attachments.push(("scene_ground_truth.jsonl".into(), dump));
    report.tables.push(table);
    Ok(report)
}
