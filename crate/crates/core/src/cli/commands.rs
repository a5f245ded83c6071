//! File-level entry points behind the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;

use crate::cli::config::RunConfig;
use crate::cli::image::{render, write_ppm, RenderStyle};
use crate::error::{Error, Result};
use crate::eval::{
    cluster_box, convex_hull_mask, detection_rate, detection_success, gt_boxes_to_text, iou, parse_gt_boxes,
    read_pgm, write_pgm, GtBox, LabelMap, PixelMask,
};
use crate::events::{
    denoise, parse_event_stream, write_event_file, Event, EventWindow, SensorGeometry, window_events,
};
use crate::motion::Family;
use crate::pipeline::{segment, SegmentationResult};
use crate::synth::{generate_scene, gt_box, gt_mask, labels_to_text, SceneSpec};

pub const MANIFEST: &str = "manifest.txt";
pub const GEOMETRY: &str = "geometry.toml";
pub const EVENTS: &str = "events.txt";
pub const LABELS: &str = "labels.txt";
pub const GT_BOXES: &str = "gt_boxes.txt";
pub const GT_MASKS: &str = "gt_masks.txt";

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Smallest sensor holding every event of an event file.
pub fn infer_geometry(text: &str) -> Result<SensorGeometry> {
    let events = parse_event_stream(text, &SensorGeometry::new(1 << 30, 1 << 30)?)?;
    let (w, h) = events.iter().fold((1.0f64, 1.0f64), |(w, h), e| {
        (w.max(e.x.floor() + 1.0), h.max(e.y.floor() + 1.0))
    });
    SensorGeometry::new(w as usize, h as usize)
}

/// Geometry from an explicit file, else from `fallback` when it exists,
/// else inferred from the events.
fn resolve_geometry(explicit: Option<&Path>, fallback: Option<&Path>, events_text: &str) -> Result<SensorGeometry> {
    match (explicit, fallback) {
        (Some(path), _) => SensorGeometry::from_file(path),
        (None, Some(path)) if path.exists() => SensorGeometry::from_file(path),
        _ => {
            let g = infer_geometry(events_text)?;
            warn!("no geometry given; assuming a {}x{} sensor", g.width, g.height);
            Ok(g)
        }
    }
}

/// Files written for one window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowOutput {
    pub index: usize,
    pub result: PathBuf,
    pub image: PathBuf,
}

pub fn window_file_stem(index: usize) -> String {
    format!("window_{index:04}")
}

/// Segments every window of an event file and writes per-window result
/// documents, label images and a manifest into `config.out`.
pub fn cmd_segment(events: &Path, geometry: Option<&Path>, config: &RunConfig) -> Result<Vec<WindowOutput>> {
    let text = read_text(events)?;
    let geometry = resolve_geometry(geometry, None, &text)?;
    if config.families.contains(&Family::Rot3) && geometry.intrinsics.is_none() {
        return Err(Error::Config(
            "the rot3 family needs a geometry file with intrinsics".to_string(),
        ));
    }
    let mut stream = parse_event_stream(&text, &geometry)?;
    let out = &config.out;
    create_dir(out)?;

    let events_ref = if config.denoise_radius > 0 {
        let all = EventWindow::new(stream, geometry)?;
        stream = denoise(&all, config.denoise_radius, config.denoise_horizon).events;
        info!("denoising kept {} of {} events", stream.len(), all.len());
        let path = out.join(EVENTS);
        write_event_file(&path, &stream)?;
        PathBuf::from(EVENTS)
    } else {
        std::fs::canonicalize(events).map_err(|e| Error::io(events, e))?
    };

    let windows = window_events(&stream, &geometry, config.events_per_window, config.stride)?;
    if windows.is_empty() {
        warn!(
            "{} events do not fill a window of {}; nothing to segment",
            stream.len(),
            config.events_per_window
        );
    }
    let segment_config = config.segment_config()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outputs = pool.install(|| {
        windows
            .par_iter()
            .enumerate()
            .map(|(index, window)| -> Result<WindowOutput> {
                let result = segment(window, &segment_config)?;
                info!(
                    "window {index}: {} labels, energy {}",
                    result.pool.len(),
                    result.final_energy()
                );
                let stem = window_file_stem(index);
                let output = WindowOutput {
                    index,
                    result: PathBuf::from(format!("{stem}.result")),
                    image: PathBuf::from(format!("{stem}.ppm")),
                };
                write_text(&out.join(&output.result), &result.to_document())?;
                write_ppm(&out.join(&output.image), &render(&result, window, RenderStyle::Iwe)?)?;
                Ok(output)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    write_text(&out.join(GEOMETRY), &geometry.to_text())?;
    write_text(&out.join("config.toml"), &config.to_text())?;
    let manifest = Manifest {
        events: events_ref,
        geometry: PathBuf::from(GEOMETRY),
        windows: outputs.clone(),
    };
    write_text(&out.join(MANIFEST), &manifest.to_text())?;
    Ok(outputs)
}

/// Index of a segmentation run directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    /// Event stream the windows index into; relative paths are relative to
    /// the manifest's directory.
    pub events: PathBuf,
    pub geometry: PathBuf,
    pub windows: Vec<WindowOutput>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "events {}\ngeometry {}\n",
            self.events.display(),
            self.geometry.display()
        );
        for w in &self.windows {
            let _ = writeln!(s, "window {} {} {}", w.index, w.result.display(), w.image.display());
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut events, mut geometry, mut windows) = (None, None, Vec::new());
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let (key, rest) = s.split_once(' ').unwrap_or((s, ""));
            match key {
                "events" => events = Some(PathBuf::from(rest.trim())),
                "geometry" => geometry = Some(PathBuf::from(rest.trim())),
                "window" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 3 {
                        return Err(Error::parse(line, "expected 'window <index> <result> <image>'"));
                    }
                    let index = f[0]
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad window index '{}'", f[0])))?;
                    windows.push(WindowOutput {
                        index,
                        result: PathBuf::from(f[1]),
                        image: PathBuf::from(f[2]),
                    });
                }
                other => return Err(Error::parse(line, format!("unknown manifest key '{other}'"))),
            }
        }
        Ok(Manifest {
            events: events.ok_or_else(|| Error::parse(0, "manifest lacks an events line"))?,
            geometry: geometry.ok_or_else(|| Error::parse(0, "manifest lacks a geometry line"))?,
            windows,
        })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::parse(&read_text(&dir.join(MANIFEST))?)
    }
}

/// Generates a synthetic scene and writes events, labels, geometry and
/// ground truth sampled at `gt_samples` evenly spaced times.
pub fn cmd_synth(spec: &Path, seed: u64, out: &Path, gt_samples: usize) -> Result<usize> {
    let spec = SceneSpec::from_file(spec)?;
    let scene = generate_scene(&spec, seed)?;
    create_dir(out)?;
    write_event_file(&out.join(EVENTS), &scene.events)?;
    write_text(&out.join(LABELS), &labels_to_text(&scene.gt_labels, &scene.clutter))?;
    write_text(&out.join(GEOMETRY), &spec.geometry.to_text())?;

    let times: Vec<f64> = match gt_samples {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|k| spec.duration * k as f64 / (n - 1) as f64).collect(),
    };
    let ids = spec.object_ids();
    if ids.iter().any(|&id| id > 255) {
        return Err(Error::Config("ground-truth label maps need object ids below 256".to_string()));
    }
    let mut boxes = Vec::new();
    let mut index = String::new();
    for (k, &t) in times.iter().enumerate() {
        let mut map = LabelMap {
            width: spec.geometry.width,
            height: spec.geometry.height,
            data: vec![0; spec.geometry.pixel_count()],
        };
        for &id in ids.iter().filter(|&&id| id != 0) {
            if let Some(bbox) = gt_box(&spec, id, t)? {
                boxes.push(GtBox {
                    t_start: t,
                    t_end: t,
                    bbox,
                    object_id: id,
                });
            }
            let mask = gt_mask(&spec, id, t, seed)?;
            for (v, &m) in map.data.iter_mut().zip(&mask.data) {
                if m {
                    *v = id as u8;
                }
            }
        }
        let name = format!("gt_mask_{k:04}.pgm");
        write_pgm(&out.join(&name), &map)?;
        let _ = writeln!(index, "{t} {name}");
    }
    write_text(&out.join(GT_BOXES), &gt_boxes_to_text(&boxes))?;
    write_text(&out.join(GT_MASKS), &index)?;
    info!("{} events written to {}", scene.events.len(), out.display());
    Ok(scene.events.len())
}

/// Scoring rule of [`cmd_eval`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Detection,
    Iou,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Detection => "detection",
            Metric::Iou => "iou",
        }
    }
}

/// Per-window and aggregate scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    /// `(window index, scored instances, score)`; detection scores count
    /// successes, IoU scores are the mean over instances.
    pub windows: Vec<(usize, usize, f64)>,
    /// Detection rate in percent, or mean IoU.
    pub aggregate: f64,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("metric {}\n", self.metric.name());
        for &(w, n, score) in &self.windows {
            let _ = writeln!(s, "window {w} {n} {score}");
        }
        match self.metric {
            Metric::Detection => {
                let _ = writeln!(s, "aggregate {:.2}", self.aggregate);
            }
            Metric::Iou => {
                let _ = writeln!(s, "aggregate {:.4}", self.aggregate);
            }
        }
        s
    }
}

struct LoadedWindow {
    index: usize,
    result: SegmentationResult,
    window: EventWindow,
}

fn load_windows(results: &Path, events_override: Option<&Path>) -> Result<(Vec<LoadedWindow>, SensorGeometry)> {
    let manifest = Manifest::read(results)?;
    let geometry = SensorGeometry::from_file(&results.join(&manifest.geometry))?;
    let events_path = events_override.map_or_else(|| results.join(&manifest.events), Path::to_path_buf);
    let stream = parse_event_stream(&read_text(&events_path)?, &geometry)?;
    let loaded = manifest
        .windows
        .iter()
        .map(|w| {
            let result = SegmentationResult::parse(&read_text(&results.join(&w.result))?)?;
            let window = slice_window(&stream, &geometry, &result)?;
            Ok(LoadedWindow {
                index: w.index,
                result,
                window,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((loaded, geometry))
}

/// The events a result refers to.
pub fn slice_window(stream: &[Event], geometry: &SensorGeometry, result: &SegmentationResult) -> Result<EventWindow> {
    let (start, n) = (result.offset, result.event_count());
    let events = stream.get(start..start + n).ok_or_else(|| {
        Error::Eval(format!(
            "result covers events {start}..{} but the stream holds {}",
            start + n,
            stream.len()
        ))
    })?;
    let window = EventWindow::with_offset(events.to_vec(), *geometry, start)?;
    if window.t_min != result.t_min || window.t_max != result.t_max {
        return Err(Error::Eval(format!(
            "events {start}..{} do not span the result's time range",
            start + n
        )));
    }
    Ok(window)
}

/// Ground-truth samples nearest the middle of `[t0, t1]`, one per object.
fn nearest_boxes(boxes: &[GtBox], t0: f64, t1: f64) -> Vec<GtBox> {
    let mid = 0.5 * (t0 + t1);
    let mut best: Vec<GtBox> = Vec::new();
    for b in boxes.iter().filter(|b| b.overlaps(t0, t1)) {
        let d = (0.5 * (b.t_start + b.t_end) - mid).abs();
        match best.iter_mut().find(|c| c.object_id == b.object_id) {
            Some(c) if (0.5 * (c.t_start + c.t_end) - mid).abs() <= d => {}
            Some(c) => *c = *b,
            None => best.push(*b),
        }
    }
    best.sort_by_key(|b| b.object_id);
    best
}

fn read_mask_index(gt: &Path) -> Result<Vec<(f64, PathBuf)>> {
    let path = gt.join(GT_MASKS);
    read_text(&path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let t = f
                .first()
                .and_then(|t| t.parse().ok())
                .filter(|_| f.len() == 2)
                .ok_or_else(|| Error::parse(k + 1, "expected 't file'"))?;
            Ok((t, gt.join(f[1])))
        })
        .collect()
}

fn uncovered_error(uncovered: &[usize]) -> Error {
    let list: Vec<String> = uncovered.iter().map(usize::to_string).collect();
    Error::Eval(format!("no ground truth for windows {}", list.join(", ")))
}

/// Scores a segmentation run against synthetic or annotated ground truth.
/// Label 0 of every result (its largest cluster) is taken as background.
pub fn cmd_eval(results: &Path, gt: &Path, metric: Metric, events: Option<&Path>) -> Result<EvalReport> {
    let (windows, geometry) = load_windows(results, events)?;
    let mut scores = Vec::with_capacity(windows.len());
    let mut uncovered = Vec::new();
    match metric {
        Metric::Detection => {
            let boxes = parse_gt_boxes(&read_text(&gt.join(GT_BOXES))?)?;
            let (mut hits, mut total) = (0, 0);
            for w in &windows {
                let targets = nearest_boxes(&boxes, w.result.t_min, w.result.t_max);
                if targets.is_empty() {
                    uncovered.push(w.index);
                    continue;
                }
                let mut window_hits = 0;
                for target in &targets {
                    let t = 0.5 * (target.t_start + target.t_end);
                    let clusters = w.result.warped_clusters_at(&w.window, t)?;
                    let mut hit = false;
                    for detected in clusters.iter().skip(1).filter_map(|c| cluster_box(c)) {
                        hit |= detection_success(&detected, &target.bbox)?;
                    }
                    window_hits += usize::from(hit);
                }
                hits += window_hits;
                total += targets.len();
                scores.push((w.index, targets.len(), window_hits as f64));
            }
            if !uncovered.is_empty() {
                return Err(uncovered_error(&uncovered));
            }
            Ok(EvalReport {
                metric,
                windows: scores,
                aggregate: detection_rate(hits, total)?,
            })
        }
        Metric::Iou => {
            let masks = read_mask_index(gt)?;
            let (mut sum, mut total) = (0.0, 0);
            for w in &windows {
                let mid = 0.5 * (w.result.t_min + w.result.t_max);
                let Some((t, path)) = masks
                    .iter()
                    .filter(|(t, _)| *t >= w.result.t_min && *t <= w.result.t_max)
                    .min_by(|a, b| (a.0 - mid).abs().total_cmp(&(b.0 - mid).abs()))
                else {
                    uncovered.push(w.index);
                    continue;
                };
                let map = read_pgm(path)?;
                if (map.width, map.height) != (geometry.width, geometry.height) {
                    return Err(Error::Eval(format!("{} does not match the sensor size", path.display())));
                }
                let predicted: Vec<PixelMask> = w
                    .result
                    .warped_clusters_at(&w.window, *t)?
                    .iter()
                    .skip(1)
                    .map(|c| convex_hull_mask(c, &geometry))
                    .collect();
                let ids: Vec<u8> = map.labels().into_iter().filter(|&id| id != 0).collect();
                let mut window_sum = 0.0;
                for &id in &ids {
                    let truth = map.mask_of(id);
                    let mut best = iou(&PixelMask::for_geometry(&geometry), &truth)?;
                    for p in &predicted {
                        best = best.max(iou(p, &truth)?);
                    }
                    window_sum += best;
                }
                sum += window_sum;
                total += ids.len();
                let mean = if ids.is_empty() { 1.0 } else { window_sum / ids.len() as f64 };
                scores.push((w.index, ids.len(), mean));
            }
            if !uncovered.is_empty() {
                return Err(uncovered_error(&uncovered));
            }
            if total == 0 {
                return Err(Error::Eval("no ground-truth objects to score".to_string()));
            }
            Ok(EvalReport {
                metric,
                windows: scores,
                aggregate: sum / total as f64,
            })
        }
    }
}

/// Draws a result over its events. Without an explicit geometry the file
/// next to the result is used, then the events' extent.
pub fn cmd_render(
    result: &Path,
    events: &Path,
    geometry: Option<&Path>,
    out: &Path,
    style: RenderStyle,
) -> Result<()> {
    let parsed = SegmentationResult::parse(&read_text(result)?)?;
    let text = read_text(events)?;
    let sibling = result.parent().map(|d| d.join(GEOMETRY));
    let geometry = resolve_geometry(geometry, sibling.as_deref(), &text)?;
    let stream = parse_event_stream(&text, &geometry)?;
    let window = slice_window(&stream, &geometry, &parsed)?;
    write_ppm(out, &render(&parsed, &window, style)?)
}
