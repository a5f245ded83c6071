mod common;

use common::*;
use evseg::optim::EnergyParams;
use evseg::pipeline::{segment, SegmentConfig};

#[test]
fn matching_oracle_picks_the_best_assignment() {
    let labels = [0, 0, 1, 1, 1, 2];
    let truth = [1, 1, 0, 0, 1, 0];
    assert_eq!(matched_correct(&labels, &truth, &[true; 6]), 4);
    assert_eq!(matched_correct(&labels, &truth, &[false, true, true, true, true, true]), 3);
}

#[test]
fn single_motion_gives_one_label() {
    let (_, window) = generate(&single_motion_scene(8.0, 0.0), 1);
    let r = segment(&window, &SegmentConfig::default()).unwrap();
    assert_eq!(r.pool.len(), 1);
    let params = r.pool.model(0).params();
    assert!(flow_close(params, &[8.0, 0.0]), "recovered {params:?}");
}

#[test]
fn two_motions_are_separated() {
    let (scene, window) = generate(&small_two_motion_scene(), 3);
    let on_object = scene.gt_labels.iter().filter(|&&l| l == 1).count();
    assert!(on_object * 100 >= 15 * scene.events.len());
    let r = segment(&window, &SegmentConfig::default()).unwrap();
    assert_eq!(r.pool.len(), 2);
    let keep: Vec<bool> = scene.clutter.iter().map(|c| !c).collect();
    let correct = matched_correct(r.labeling.as_slice(), &scene.gt_labels, &keep);
    assert!(correct * 10 >= 9 * window.len(), "{correct} of {}", window.len());
    assert!(r.energy_trace.windows(2).all(|e| e[1] <= e[0]));
}

#[test]
fn without_label_cost_the_trace_still_descends() {
    let (_, window) = generate(&small_two_motion_scene(), 4);
    let config = SegmentConfig {
        energy: EnergyParams::new(40.0, 0.0).unwrap(),
        ..SegmentConfig::default()
    };
    let r = segment(&window, &config).unwrap();
    assert!(r.pool.len() >= 2);
    assert!(r.energy_trace.windows(2).all(|e| e[1] <= e[0]), "{:?}", r.energy_trace);
}

#[test]
fn segmentation_is_deterministic() {
    let (_, window) = generate(&small_two_motion_scene(), 5);
    let a = segment(&window, &SegmentConfig::default()).unwrap();
    let b = segment(&window, &SegmentConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_document(), b.to_document());
}
