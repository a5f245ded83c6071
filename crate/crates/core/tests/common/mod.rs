#![allow(dead_code)]

use evseg::events::{EventWindow, SensorGeometry};
use evseg::motion::MotionModel;
use evseg::synth::{generate_scene, LabeledEvents, SceneObject, SceneSpec, Shape, Texture};

pub fn dots(spacing: f64, radius: f64, low: f64, high: f64, seed: u64) -> Texture {
    Texture::Dots {
        spacing,
        radius,
        low,
        high,
        density: 1.0,
        seed,
    }
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Shape {
    Shape::Rect { x0, y0, x1, y1 }
}

/// Background drifting at (8, 0) px/s, bounded so no texture enters the
/// frame during `duration`.
pub fn background(width: usize, height: usize, spacing: f64) -> SceneObject {
    SceneObject {
        id: 0,
        motion: MotionModel::flow(8.0, 0.0),
        offset: (0.0, 0.0),
        texture: dots(spacing, 2.0, 0.0, 1.0, 1),
        shape: rect(8.0, -20.0, width as f64 - 8.0, height as f64 + 20.0),
    }
}

pub fn object(id: u32, flow: (f64, f64), at: (f64, f64), size: (f64, f64), seed: u64) -> SceneObject {
    SceneObject {
        id,
        motion: MotionModel::flow(flow.0, flow.1),
        offset: at,
        texture: dots(7.0, 1.5, 0.2, 1.2, seed),
        shape: rect(0.0, 0.0, size.0, size.1),
    }
}

/// Background plus one object at (-12, 6) px/s on a 128x96 sensor.
pub fn two_motion_scene() -> SceneSpec {
    SceneSpec {
        geometry: SensorGeometry::new(128, 96).unwrap(),
        background: background(128, 96, 16.0),
        objects: vec![object(1, (-12.0, 6.0), (70.0, 30.0), (32.0, 24.0), 2)],
        contrast_threshold: 0.15,
        duration: 0.8,
        noise_rate: 0.0,
    }
}

/// A quicker 64x48 version of [`two_motion_scene`].
pub fn small_two_motion_scene() -> SceneSpec {
    SceneSpec {
        geometry: SensorGeometry::new(64, 48).unwrap(),
        background: SceneObject {
            texture: dots(10.0, 2.0, 0.0, 1.0, 1),
            ..background(64, 48, 10.0)
        },
        objects: vec![object(1, (-12.0, 6.0), (30.0, 12.0), (20.0, 16.0), 2)],
        contrast_threshold: 0.2,
        duration: 0.6,
        noise_rate: 0.0,
    }
}

/// Background and two objects with distinct flows.
pub fn three_motion_scene() -> SceneSpec {
    SceneSpec {
        geometry: SensorGeometry::new(128, 96).unwrap(),
        background: background(128, 96, 16.0),
        objects: vec![
            object(1, (-12.0, 6.0), (74.0, 12.0), (30.0, 24.0), 2),
            object(2, (4.0, -14.0), (20.0, 56.0), (30.0, 24.0), 3),
        ],
        contrast_threshold: 0.15,
        duration: 0.8,
        noise_rate: 0.0,
    }
}

/// Only the background, moving at `(vx, vy)`.
pub fn single_motion_scene(vx: f64, vy: f64) -> SceneSpec {
    let mut spec = small_two_motion_scene();
    spec.objects.clear();
    spec.background.motion = MotionModel::flow(vx, vy);
    spec
}

pub fn generate(spec: &SceneSpec, seed: u64) -> (LabeledEvents, EventWindow) {
    let scene = generate_scene(spec, seed).unwrap();
    let window = EventWindow::new(scene.events.clone(), spec.geometry).unwrap();
    (scene, window)
}

/// Best achievable count of correctly labeled events over all one-to-one
/// label-to-object assignments, by exhaustive search.
pub fn matched_correct(labels: &[usize], truth: &[u32], keep: &[bool]) -> usize {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let m = truth.iter().max().map_or(0, |m| *m as usize + 1);
    let mut confusion = vec![vec![0usize; m]; k];
    for ((&l, &g), &ok) in labels.iter().zip(truth).zip(keep) {
        if ok {
            confusion[l][g as usize] += 1;
        }
    }
    fn search(confusion: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == confusion.len() {
            return 0;
        }
        // the row may also stay unmatched
        let mut best = search(confusion, row + 1, used);
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(confusion[row][c] + search(confusion, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    search(&confusion, 0, &mut vec![false; m])
}

/// Per-component tolerance on recovered flows.
pub fn flow_close(got: &[f64], truth: &[f64]) -> bool {
    got.iter()
        .zip(truth)
        .all(|(g, t)| (g - t).abs() <= (0.05 * t.abs()).max(0.2))
}
