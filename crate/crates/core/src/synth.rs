//! Synthetic event scenes with ground-truth labels.
//!
//! Each object carries a log-intensity texture in its own frame, a soft
//! support shape and a motion model. The brightness seen by a pixel at time
//! `t` is found by warping the pixel back to time 0 along each object's
//! motion, sampling the textures there and compositing them in list order
//! over a zero base (later objects in front). Every pixel then runs the threshold-crossing
//! event model on an adaptively refined time grid.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::{BoundingBox, PixelMask};
use crate::events::{Event, Intrinsics, Polarity, SensorGeometry};
use crate::motion::{Family, MotionModel, Warper};

/// Log-intensity pattern in an object's own frame.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Texture {
    Constant {
        value: f64,
    },
    Ramp {
        base: f64,
        gx: f64,
        gy: f64,
    },
    /// Vertical edge at `u = position`, rising from `low` to `high` over
    /// `softness` pixels.
    Step {
        position: f64,
        low: f64,
        high: f64,
        #[serde(default = "one")]
        softness: f64,
    },
    /// Antialiased discs on a jittered grid of `spacing`-pixel cells.
    Dots {
        spacing: f64,
        radius: f64,
        low: f64,
        high: f64,
        #[serde(default = "one")]
        density: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Smooth value noise with lattice period `scale`.
    Noise {
        scale: f64,
        base: f64,
        amplitude: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn one() -> f64 {
    1.0
}

/// Support of an object in its own frame, with a one-pixel soft rim.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    #[default]
    Full,
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Disk {
        cx: f64,
        cy: f64,
        radius: f64,
    },
}

/// A moving textured surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub motion: MotionModel,
    /// Position of the object frame origin at time 0.
    pub offset: (f64, f64),
    pub texture: Texture,
    pub shape: Shape,
}

/// Full description of a synthetic recording.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub geometry: SensorGeometry,
    pub background: SceneObject,
    /// Foreground objects, back to front.
    pub objects: Vec<SceneObject>,
    pub contrast_threshold: f64,
    pub duration: f64,
    /// Uniform clutter events per pixel per second.
    pub noise_rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    id: u32,
    family: String,
    params: Vec<f64>,
    #[serde(default)]
    offset: [f64; 2],
    texture: Texture,
    #[serde(default)]
    shape: Shape,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    width: usize,
    height: usize,
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    contrast_threshold: f64,
    duration: f64,
    #[serde(default)]
    noise_rate: f64,
    background: ObjectFile,
    #[serde(default)]
    objects: Vec<ObjectFile>,
}

impl ObjectFile {
    fn into_object(self) -> Result<SceneObject> {
        let family: Family = self.family.parse()?;
        Ok(SceneObject {
            id: self.id,
            motion: MotionModel::new(family, self.params)?,
            offset: (self.offset[0], self.offset[1]),
            texture: self.texture,
            shape: self.shape,
        })
    }
}

impl SceneSpec {
    /// Parses a TOML scene description.
    pub fn parse(text: &str) -> Result<Self> {
        let file: SceneFile = toml::from_str(text).map_err(|e| Error::Config(format!("scene: {e}")))?;
        let mut geometry = SensorGeometry::new(file.width, file.height)?;
        match (file.fx, file.fy, file.cx, file.cy) {
            (Some(fx), Some(fy), Some(cx), Some(cy)) => {
                geometry = geometry.with_intrinsics(Intrinsics { fx, fy, cx, cy })?;
            }
            (None, None, None, None) => {}
            _ => return Err(Error::Config("scene intrinsics need all of fx, fy, cx, cy".to_string())),
        }
        let spec = SceneSpec {
            geometry,
            background: file.background.into_object()?,
            objects: file
                .objects
                .into_iter()
                .map(ObjectFile::into_object)
                .collect::<Result<_>>()?,
            contrast_threshold: file.contrast_threshold,
            duration: file.duration,
            noise_rate: file.noise_rate,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return bad(format!("contrast threshold must be positive, got {}", self.contrast_threshold));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return bad(format!("noise rate must be >= 0, got {}", self.noise_rate));
        }
        if self.background.id != 0 {
            return bad("background object must have id 0".to_string());
        }
        let mut ids = HashSet::new();
        for obj in self.all_objects() {
            if !ids.insert(obj.id) {
                return bad(format!("duplicate object id {}", obj.id));
            }
            obj.motion.warper(0.0, &self.geometry)?;
            let ok = match obj.texture {
                Texture::Step { softness, .. } => softness > 0.0,
                Texture::Dots {
                    spacing,
                    radius,
                    density,
                    ..
                } => spacing > 0.0 && radius > 0.0 && (0.0..=1.0).contains(&density),
                Texture::Noise { scale, .. } => scale > 0.0,
                _ => true,
            };
            if !ok {
                return bad(format!("invalid texture parameters for object {}", obj.id));
            }
        }
        Ok(())
    }

    /// Background followed by the foreground objects.
    pub fn all_objects(&self) -> impl Iterator<Item = &SceneObject> {
        std::iter::once(&self.background).chain(&self.objects)
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.all_objects().map(|o| o.id).collect()
    }
}

/// Generated events with their ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEvents {
    pub events: Vec<Event>,
    /// Object id per event.
    pub gt_labels: Vec<u32>,
    /// Marks injected noise events (labeled 0).
    pub clutter: Vec<bool>,
    pub gt_models: Vec<(u32, MotionModel)>,
    /// Visible region of every object at time 0.
    pub gt_masks: Vec<(u32, PixelMask)>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice_hash(seed: u64, i: i64, j: i64, salt: u64) -> f64 {
    let h = splitmix(seed ^ splitmix((i as u64).wrapping_mul(0x1f1f_1f1f) ^ splitmix(j as u64 ^ salt)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl Texture {
    fn sample(&self, u: f64, v: f64, scene_seed: u64) -> f64 {
        match *self {
            Texture::Constant { value } => value,
            Texture::Ramp { base, gx, gy } => base + gx * u + gy * v,
            Texture::Step {
                position,
                low,
                high,
                softness,
            } => {
                let s = ((u - position) / softness + 0.5).clamp(0.0, 1.0);
                low + (high - low) * s
            }
            Texture::Dots {
                spacing,
                radius,
                low,
                high,
                density,
                seed,
            } => {
                let seed = seed ^ splitmix(scene_seed);
                let (ci, cj) = ((u / spacing).floor() as i64, (v / spacing).floor() as i64);
                let slack = (spacing - 2.0 * radius - 1.0).max(0.0);
                let mut cover: f64 = 0.0;
                for i in ci - 1..=ci + 1 {
                    for j in cj - 1..=cj + 1 {
                        if lattice_hash(seed, i, j, 3) >= density {
                            continue;
                        }
                        let cx = (i as f64 + 0.5) * spacing + (lattice_hash(seed, i, j, 1) - 0.5) * slack;
                        let cy = (j as f64 + 0.5) * spacing + (lattice_hash(seed, i, j, 2) - 0.5) * slack;
                        let d = ((u - cx).powi(2) + (v - cy).powi(2)).sqrt();
                        cover = cover.max((radius + 0.5 - d).clamp(0.0, 1.0));
                    }
                }
                low + (high - low) * cover
            }
            Texture::Noise {
                scale,
                base,
                amplitude,
                seed,
            } => {
                let seed = seed ^ splitmix(scene_seed);
                let (a, b) = (u / scale, v / scale);
                let (i, j) = (a.floor() as i64, b.floor() as i64);
                let (fa, fb) = (smoothstep(a - i as f64), smoothstep(b - j as f64));
                let h = |di: i64, dj: i64| lattice_hash(seed, i + di, j + dj, 0);
                let top = h(0, 0) + fa * (h(1, 0) - h(0, 0));
                let bottom = h(0, 1) + fa * (h(1, 1) - h(0, 1));
                base + amplitude * (top + fb * (bottom - top))
            }
        }
    }
}

impl Shape {
    fn alpha(&self, u: f64, v: f64) -> f64 {
        match *self {
            Shape::Full => 1.0,
            Shape::Rect { x0, y0, x1, y1 } => ((u - x0).min(x1 - u).min(v - y0).min(y1 - v) + 0.5).clamp(0.0, 1.0),
            Shape::Disk { cx, cy, radius } => {
                (radius + 0.5 - ((u - cx).powi(2) + (v - cy).powi(2)).sqrt()).clamp(0.0, 1.0)
            }
        }
    }
}

/// Scene prepared for sampling.
struct Renderer<'a> {
    layers: Vec<(&'a SceneObject, Warper)>,
    seed: u64,
}

impl<'a> Renderer<'a> {
    fn new(spec: &'a SceneSpec, seed: u64) -> Result<Self> {
        let layers = spec
            .all_objects()
            .map(|o| Ok((o, o.motion.warper(0.0, &spec.geometry)?)))
            .collect::<Result<_>>()?;
        Ok(Self { layers, seed })
    }

    fn local(&self, layer: usize, x: f64, y: f64, t: f64) -> (f64, f64) {
        let (obj, warper) = &self.layers[layer];
        let (u, v) = warper.warp_point(x, y, t);
        (u - obj.offset.0, v - obj.offset.1)
    }

    fn log_intensity(&self, x: f64, y: f64, t: f64) -> f64 {
        let mut value = 0.0;
        for (k, (obj, _)) in self.layers.iter().enumerate() {
            let (u, v) = self.local(k, x, y, t);
            let a = obj.shape.alpha(u, v);
            if a > 0.0 {
                value = (1.0 - a) * value + a * obj.texture.sample(u, v, self.seed);
            }
        }
        value
    }

    /// Front-most layer whose support reaches `min_alpha` at the pixel.
    fn owner_layer(&self, x: f64, y: f64, t: f64, min_alpha: f64) -> usize {
        (1..self.layers.len())
            .rev()
            .find(|&k| {
                let (u, v) = self.local(k, x, y, t);
                self.layers[k].0.shape.alpha(u, v) >= min_alpha
            })
            .unwrap_or(0)
    }

    fn owner_with(&self, x: f64, y: f64, t: f64, min_alpha: f64) -> u32 {
        self.layers[self.owner_layer(x, y, t, min_alpha)].0.id
    }

    /// Surface responsible for a change between `t0` and `t1`: the nearest
    /// object touching the pixel at either end of the interval.
    fn cause(&self, x: f64, y: f64, t0: f64, t1: f64) -> u32 {
        let k = self.owner_layer(x, y, t0, 1e-9).max(self.owner_layer(x, y, t1, 1e-9));
        self.layers[k].0.id
    }

    /// Upper bound on how fast object-frame coordinates move under pixels.
    fn max_speed(&self, geometry: &SensorGeometry, duration: f64) -> f64 {
        let (w, h) = (geometry.width as f64, geometry.height as f64);
        let mut best: f64 = 0.0;
        let dt = duration * 1e-3;
        for k in 0..self.layers.len() {
            for i in 0..=4 {
                for j in 0..=4 {
                    let (x, y) = (w * i as f64 / 4.0, h * j as f64 / 4.0);
                    for s in 0..=4 {
                        let t = duration * s as f64 / 4.0;
                        let a = self.local(k, x, y, t);
                        let b = self.local(k, x, y, t + dt);
                        let d = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt() / dt;
                        if d.is_finite() {
                            best = best.max(d);
                        }
                    }
                }
            }
        }
        1.5 * best
    }
}

/// Threshold-crossing simulation of one pixel.
fn simulate_pixel(
    render: &Renderer<'_>,
    x: f64,
    y: f64,
    c: f64,
    duration: f64,
    coarse_dt: f64,
    out: &mut Vec<(Event, u32)>,
) {
    // slack absorbs rounding when a change is an exact multiple of c
    let threshold = c * (1.0 - 1e-9);
    let fine_change = c / 10.0;
    let min_dt = coarse_dt / 4096.0;
    let mut t0 = 0.0;
    let mut l0 = render.log_intensity(x, y, 0.0);
    let mut reference = l0;
    while t0 < duration {
        let mut step = coarse_dt.min(duration - t0);
        let mut l1 = render.log_intensity(x, y, t0 + step);
        while (l1 - l0).abs() > fine_change && step > min_dt {
            step *= 0.5;
            l1 = render.log_intensity(x, y, t0 + step);
        }
        let t1 = if step >= duration - t0 { duration } else { t0 + step };
        let mut emit = |level: f64, p: Polarity| {
            let frac = if l1 != l0 { ((level - l0) / (l1 - l0)).clamp(0.0, 1.0) } else { 1.0 };
            let t = t0 + frac * (t1 - t0);
            out.push((Event::new(t, x, y, p), render.cause(x, y, t0, t1)));
        };
        while l1 - reference >= threshold {
            reference += c;
            emit(reference, Polarity::Pos);
        }
        while reference - l1 >= threshold {
            reference -= c;
            emit(reference, Polarity::Neg);
        }
        t0 = t1;
        l0 = l1;
    }
}

/// Renders the scene into labeled events, sorted by time.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<LabeledEvents> {
    spec.validate()?;
    let render = Renderer::new(spec, seed)?;
    let geometry = &spec.geometry;
    let speed = render.max_speed(geometry, spec.duration);
    // half a pixel of pattern motion per coarse step
    let coarse_dt = if speed > 0.0 { (0.5 / speed).min(spec.duration / 4.0) } else { spec.duration };

    let rows: Vec<Vec<(Event, u32)>> = (0..geometry.height)
        .into_par_iter()
        .map(|y| {
            let mut out = Vec::new();
            for x in 0..geometry.width {
                simulate_pixel(&render, x as f64, y as f64, spec.contrast_threshold, spec.duration, coarse_dt, &mut out);
            }
            out
        })
        .collect();
    let mut tagged: Vec<(Event, u32, bool)> = rows.into_iter().flatten().map(|(e, l)| (e, l, false)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_count = (spec.noise_rate * geometry.pixel_count() as f64 * spec.duration).round() as usize;
    for _ in 0..noise_count {
        let t = rng.gen_range(0.0..spec.duration);
        let x = rng.gen_range(0..geometry.width) as f64;
        let y = rng.gen_range(0..geometry.height) as f64;
        let p = if rng.gen_bool(0.5) { Polarity::Pos } else { Polarity::Neg };
        tagged.push((Event::new(t, x, y, p), 0, true));
    }
    tagged.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));

    let gt_masks = spec
        .all_objects()
        .map(|o| (o.id, object_mask_at(&render, geometry, o.id, 0.0)))
        .collect();
    Ok(LabeledEvents {
        events: tagged.iter().map(|r| r.0).collect(),
        gt_labels: tagged.iter().map(|r| r.1).collect(),
        clutter: tagged.iter().map(|r| r.2).collect(),
        gt_models: spec.all_objects().map(|o| (o.id, o.motion.clone())).collect(),
        gt_masks,
    })
}

fn object_mask_at(render: &Renderer<'_>, geometry: &SensorGeometry, id: u32, t: f64) -> PixelMask {
    let mut mask = PixelMask::for_geometry(geometry);
    for y in 0..geometry.height {
        for x in 0..geometry.width {
            if render.owner_with(x as f64, y as f64, t, 0.5) == id {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Pixels where object `id` is the front-most surface at time `t`.
pub fn gt_mask(spec: &SceneSpec, id: u32, t: f64, seed: u64) -> Result<PixelMask> {
    let render = Renderer::new(spec, seed)?;
    Ok(object_mask_at(&render, &spec.geometry, id, t))
}

/// Box of object `id` at time `t`; `None` when it is not visible.
pub fn gt_box(spec: &SceneSpec, id: u32, t: f64) -> Result<Option<BoundingBox>> {
    Ok(gt_mask(spec, id, t, 0)?.bounding_box())
}

/// `index label` lines; noise events carry a trailing `noise` token.
pub fn labels_to_text(labels: &[u32], clutter: &[bool]) -> String {
    let mut out = String::with_capacity(labels.len() * 8);
    for (i, (&l, &c)) in labels.iter().zip(clutter).enumerate() {
        let _ = if c { writeln!(out, "{i} {l} noise") } else { writeln!(out, "{i} {l}") };
    }
    out
}

/// Parses a label file into `(labels, clutter)`, indexed by event.
pub fn parse_labels(text: &str) -> Result<(Vec<u32>, Vec<bool>)> {
    let mut labels = Vec::new();
    let mut clutter = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = s.split_whitespace().collect();
        if !(f.len() == 2 || (f.len() == 3 && f[2] == "noise")) {
            return Err(Error::parse(line, "expected 'index label [noise]'"));
        }
        let index: usize = f[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad index '{}'", f[0])))?;
        let label: u32 = f[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad label '{}'", f[1])))?;
        if index != labels.len() {
            return Err(Error::Range {
                line,
                msg: format!("expected index {}, found {index}", labels.len()),
            });
        }
        labels.push(label);
        clutter.push(f.len() == 3);
    }
    Ok((labels, clutter))
}
