//! Browser bindings for the demo page. Every export takes plain numbers or
//! strings and returns a JSON string, so the page needs no generated types.

use robosac_core::geometry::{intersection_polygon, rotated_iou, OrientedBox, Point};
use robosac_core::sampling::{a2cp_upper_bounds, max_collaborators, sampling_budget, success_probability, RatioGrid, SamplingPlan};
use robosac_core::sim::{baseline_output, evaluate_frame, generate_scene, sim_consensus, AttackConfig, AttackKind, Baseline, ScenarioConfig, SimFusion};
use robosac_core::{robosac_sequence, DetectionSet, EngineConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn to_js<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo values serialize")
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Budgets and success curves for a team of `team_size` at confidence `p`.
///
/// Returns `{ratios, budgets: [[N for s=1..]], curves: [[p(N) for N=1..max_budget]] (s = sample_size),
/// max_collaborators: [per ratio at max_budget], probe_bounds}`.
#[wasm_bindgen]
pub fn sampling_curves(confidence: f64, team_size: u32, sample_size: u32, max_budget: u32) -> Result<String, JsValue> {
    let grid = RatioGrid::full(team_size).map_err(err)?;
    let ratios: Vec<f64> = grid.ratios().into_iter().filter(|&r| r > 0.0 && r < 1.0).collect();
    let budgets: Vec<Vec<Option<u32>>> = ratios
        .iter()
        .map(|&eta| (1..=team_size).map(|s| if (s as f64) <= team_size as f64 * (1.0 - eta) { sampling_budget(confidence, s, eta).ok() } else { None }).collect())
        .collect();
    let curves: Vec<Vec<f64>> =
        ratios.iter().map(|&eta| (1..=max_budget.max(1)).map(|n| success_probability(eta, sample_size, n)).collect()).collect();
    let collaborators: Vec<Option<u32>> = ratios.iter().map(|&eta| max_collaborators(confidence, max_budget.max(1), eta).ok()).collect();
    let bounds = a2cp_upper_bounds(&grid, confidence).map_err(err)?;
    Ok(to_js(&json!({
        "ratios": ratios,
        "budgets": budgets,
        "curves": curves,
        "max_collaborators": collaborators,
        "probe_ratios": grid.ratios(),
        "probe_bounds": bounds,
    })))
}

fn polygon(points: &[Point]) -> Vec<[f64; 2]> {
    points.iter().map(|p| [p.x, p.y]).collect()
}

/// IoU of two boxes given as `[x, y, length, width, yaw]`, with both outlines
/// and the overlap polygon for drawing.
#[wasm_bindgen]
pub fn box_iou(a: &[f64], b: &[f64]) -> Result<String, JsValue> {
    let parse = |v: &[f64]| match v {
        [x, y, l, w, yaw] => Ok(OrientedBox::new(*x, *y, *l, *w, *yaw)),
        _ => Err(err("a box is [x, y, length, width, yaw]")),
    };
    let (a, b) = (parse(a)?, parse(b)?);
    let iou = rotated_iou(&a, &b).map_err(err)?;
    Ok(to_js(&json!({
        "iou": iou,
        "a": polygon(&a.corners()),
        "b": polygon(&b.corners()),
        "overlap": polygon(&intersection_polygon(&a, &b)),
    })))
}

fn boxes(set: &DetectionSet) -> Vec<[f64; 6]> {
    set.boxes.iter().map(|b| [b.center_x, b.center_y, b.length, b.width, b.yaw, b.score]).collect()
}

/// One simulated frame: scene layout, the defended output and the baselines.
///
/// `attack` is one of `fp_flood`, `fn_suppress`, `mixed`, `subtle`.
#[wasm_bindgen]
pub fn simulate_frame(seed: u64, attackers: u32, attack: &str, severity: f64, sample_size: u32, budget: u32, epsilon: f64) -> Result<String, JsValue> {
    let kind: AttackKind = serde_json::from_value(json!(attack)).map_err(err)?;
    let cfg = ScenarioConfig { attacker_count: attackers, frames: 1, rng_seed: seed, attack: AttackConfig { kind, severity }, ..Default::default() };
    let scene = generate_scene(&cfg).map_err(err)?;
    let plan = SamplingPlan::from_budget(cfg.team_size, attackers, budget, 0.99)
        .map(|p| SamplingPlan { sample_size, ..p })
        .map_err(err)?;
    let engine = EngineConfig::new(plan, sim_consensus(&cfg, epsilon), seed);
    let model = SimFusion::default();
    let report = robosac_sequence(&scene.bundles(), &model, &engine).map_err(err)?;
    let outcome = &report.outcomes[0];
    let truth = &scene.frames[0].ground_truth;

    let mut pipelines = Vec::new();
    for (name, output) in [
        ("individual", baseline_output(&scene, 0, &model, Baseline::Individual).map_err(err)?),
        ("no_defense", baseline_output(&scene, 0, &model, Baseline::NoDefense).map_err(err)?),
        ("robosac", outcome.output.clone()),
        ("all_benign", baseline_output(&scene, 0, &model, Baseline::AllBenign).map_err(err)?),
    ] {
        let score = evaluate_frame(&output, truth).map_err(err)?;
        pipelines.push(json!({ "name": name, "ap50": score.ap50, "ap70": score.ap70, "boxes": boxes(&output) }));
    }
    Ok(to_js(&json!({
        "world_extent": cfg.world_extent,
        "agents": scene.agents,
        "ground_truth": boxes(truth),
        "draws": outcome.draws,
        "consensus": outcome.consensus_reached,
        "accepted": outcome.accepted_teammates,
        "steps_used": outcome.steps_used,
        "epsilon": epsilon,
        "pipelines": pipelines,
    })))
}
