use robosac_web::{box_iou, sampling_curves, simulate_frame};
use serde_json::{json, Value};

#[test]
fn curves_carry_the_probe_bounds() {
    let v: Value = serde_json::from_str(&sampling_curves(0.99, 5, 2, 20).unwrap()).unwrap();
    assert_eq!(v["probe_bounds"], json!([1, 9, 19, 27, 21]));
    assert_eq!(v["budgets"][0][1], json!(5));
    assert_eq!(v["curves"][0].as_array().unwrap().len(), 20);
}

#[test]
fn identical_boxes_overlap_fully() {
    let v: Value = serde_json::from_str(&box_iou(&[0.0, 0.0, 4.0, 2.0, 0.3], &[0.0, 0.0, 4.0, 2.0, 0.3]).unwrap()).unwrap();
    assert_eq!(v["iou"], json!(1.0));
    assert_eq!(v["overlap"].as_array().unwrap().len(), 4);
}

#[test]
fn disjoint_boxes_have_no_overlap() {
    let v: Value = serde_json::from_str(&box_iou(&[0.0, 0.0, 4.0, 2.0, 0.0], &[10.0, 0.0, 4.0, 2.0, 1.0]).unwrap()).unwrap();
    assert_eq!(v["iou"], json!(0.0));
    assert!(v["overlap"].as_array().unwrap().is_empty());
}

#[test]
fn frame_reports_all_pipelines() {
    let v: Value = serde_json::from_str(&simulate_frame(3, 1, "fp_flood", 1.0, 3, 7, 0.3).unwrap()).unwrap();
    let names: Vec<&str> = v["pipelines"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["individual", "no_defense", "robosac", "all_benign"]);
    assert_eq!(v["agents"].as_array().unwrap().len(), 6);
}
