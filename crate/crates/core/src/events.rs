//! Event data model, text stream parsing, windowing and isolated-event
//! denoising.
//!
//! Event files are line oriented: every non-empty line holds
//! `t x y p` separated by whitespace. Polarity may be written either as
//! `0/1` or as `-1/+1`; `0` maps to negative polarity.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Sign of a brightness change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Neg,
    Pos,
}

impl Polarity {
    pub fn from_sign(sign: f64) -> Self {
        if sign < 0.0 {
            Polarity::Neg
        } else {
            Polarity::Pos
        }
    }

    pub fn sign(self) -> i8 {
        match self {
            Polarity::Neg => -1,
            Polarity::Pos => 1,
        }
    }
}

/// A single brightness-change sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    /// Timestamp in seconds.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: f64, x: f64, y: f64, p: Polarity) -> Self {
        Self { t, x, y, p }
    }

    /// Integer pixel that contains the event.
    pub fn pixel(&self) -> (i64, i64) {
        (self.x.floor() as i64, self.y.floor() as i64)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.t, self.x, self.y, self.p.sign())
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Sensor resolution plus optional calibration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorGeometry {
    pub width: usize,
    pub height: usize,
    pub intrinsics: Option<Intrinsics>,
}

impl SensorGeometry {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "sensor size must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            intrinsics: None,
        })
    }

    pub fn with_intrinsics(mut self, k: Intrinsics) -> Result<Self> {
        if !(k.fx > 0.0 && k.fy > 0.0) || !k.cx.is_finite() || !k.cy.is_finite() {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                k.fx, k.fy
            )));
        }
        self.intrinsics = Some(k);
        Ok(self)
    }

    /// Center used by in-plane models: the principal point when calibrated,
    /// the image center otherwise.
    pub fn center(&self) -> (f64, f64) {
        match self.intrinsics {
            Some(k) => (k.cx, k.cy),
            None => (
                (self.width as f64 - 1.0) / 2.0,
                (self.height as f64 - 1.0) / 2.0,
            ),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Reads a key-value geometry file (`width`, `height` and optionally
    /// `fx`, `fy`, `cx`, `cy`).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            width: usize,
            height: usize,
            fx: Option<f64>,
            fy: Option<f64>,
            cx: Option<f64>,
            cy: Option<f64>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let geometry = SensorGeometry::new(raw.width, raw.height)?;
        match (raw.fx, raw.fy, raw.cx, raw.cy) {
            (None, None, None, None) => Ok(geometry),
            (Some(fx), Some(fy), Some(cx), Some(cy)) => {
                geometry.with_intrinsics(Intrinsics { fx, fy, cx, cy })
            }
            _ => Err(Error::Config(
                "intrinsics need all of fx, fy, cx, cy".to_string(),
            )),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("width = {}\nheight = {}\n", self.width, self.height);
        if let Some(k) = self.intrinsics {
            s.push_str(&format!(
                "fx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}\n",
                k.fx, k.fy, k.cx, k.cy
            ));
        }
        s
    }
}

/// A chronologically ordered packet of events.
#[derive(Clone, Debug, PartialEq)]
pub struct EventWindow {
    pub events: Vec<Event>,
    pub geometry: SensorGeometry,
    pub t_min: f64,
    pub t_max: f64,
    /// Index of the first event in the originating stream.
    pub offset: usize,
}

impl EventWindow {
    /// Builds a window; events must already be sorted by time.
    pub fn new(events: Vec<Event>, geometry: SensorGeometry) -> Result<Self> {
        Self::with_offset(events, geometry, 0)
    }

    pub fn with_offset(events: Vec<Event>, geometry: SensorGeometry, offset: usize) -> Result<Self> {
        if let Some(k) = events.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::Config(format!(
                "events out of chronological order at index {}",
                k + 1
            )));
        }
        let t_min = events.first().map_or(0.0, |e| e.t);
        let t_max = events.last().map_or(0.0, |e| e.t);
        Ok(Self {
            events,
            geometry,
            t_min,
            t_max,
            offset,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time span of the window.
    pub fn duration(&self) -> f64 {
        self.t_max - self.t_min
    }
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: '{token}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what}: '{token}' is not finite")));
    }
    Ok(v)
}

/// Parses `t x y p` lines. Line numbers in errors are 1-based.
pub fn parse_event_stream(source: &str, geometry: &SensorGeometry) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (k, raw) in source.lines().enumerate() {
        let line = k + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line,
                format!("expected 4 fields 't x y p', found {}", fields.len()),
            ));
        }
        let t = parse_number(fields[0], line, "timestamp")?;
        let x = parse_number(fields[1], line, "x")?;
        let y = parse_number(fields[2], line, "y")?;
        let p = match fields[3] {
            "1" | "+1" => Polarity::Pos,
            "0" | "-1" => Polarity::Neg,
            other => {
                return Err(Error::parse(
                    line,
                    format!("polarity '{other}' is not one of 0, 1, -1, +1"),
                ))
            }
        };
        if t < 0.0 {
            return Err(Error::Range {
                line,
                msg: format!("negative timestamp {t}"),
            });
        }
        if !geometry.contains(x, y) {
            return Err(Error::Range {
                line,
                msg: format!(
                    "pixel ({x}, {y}) outside {}x{} sensor",
                    geometry.width, geometry.height
                ),
            });
        }
        events.push(Event { t, x, y, p });
    }
    Ok(events)
}

pub fn read_event_file(path: &Path, geometry: &SensorGeometry) -> Result<Vec<Event>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_event_stream(&text, geometry)
}

/// Serializes events in the text format accepted by [`parse_event_stream`],
/// using -1/+1 polarity.
pub fn events_to_text(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 24);
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}

pub fn write_event_file(path: &Path, events: &[Event]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(events_to_text(events).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Splits a stream into windows of exactly `size` consecutive events,
/// advancing by `stride`. A trailing partial window is dropped.
pub fn window_events(
    stream: &[Event],
    geometry: &SensorGeometry,
    size: usize,
    stride: usize,
) -> Result<Vec<EventWindow>> {
    if size == 0 || stride == 0 || stride > size {
        return Err(Error::Config(format!(
            "window size {size} and stride {stride} need 1 <= stride <= size"
        )));
    }
    let mut windows = Vec::new();
    let mut start = 0;
    while start + size <= stream.len() {
        windows.push(EventWindow::with_offset(
            stream[start..start + size].to_vec(),
            *geometry,
            start,
        )?);
        start += stride;
    }
    Ok(windows)
}

/// Removes events with no other event within `radius` pixels (Chebyshev)
/// and `horizon` seconds. Order of surviving events is preserved.
pub fn denoise(window: &EventWindow, radius: u32, horizon: f64) -> EventWindow {
    let keep = support_mask(&window.events, &window.geometry, radius, horizon);
    let events = window
        .events
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(e, _)| *e)
        .collect();
    EventWindow::with_offset(events, window.geometry, window.offset)
        .expect("filtering preserves chronological order")
}

/// Per-event flag: true when another event supports it.
pub fn support_mask(
    events: &[Event],
    geometry: &SensorGeometry,
    radius: u32,
    horizon: f64,
) -> Vec<bool> {
    let (w, h) = (geometry.width as i64, geometry.height as i64);
    // per-pixel timestamps, already sorted because the window is
    let mut buckets: Vec<Vec<(f64, usize)>> = vec![Vec::new(); geometry.pixel_count()];
    for (i, e) in events.iter().enumerate() {
        let (px, py) = e.pixel();
        if px >= 0 && py >= 0 && px < w && py < h {
            buckets[(py * w + px) as usize].push((e.t, i));
        }
    }
    let r = radius as i64;
    events
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (px, py) = e.pixel();
            for qy in (py - r).max(0)..=(py + r).min(h - 1) {
                for qx in (px - r).max(0)..=(px + r).min(w - 1) {
                    let bucket = &buckets[(qy * w + qx) as usize];
                    let lo = bucket.partition_point(|&(t, _)| t < e.t - horizon);
                    if bucket[lo..]
                        .iter()
                        .take_while(|&&(t, _)| t <= e.t + horizon)
                        .any(|&(_, j)| j != i)
                    {
                        return true;
                    }
                }
            }
            false
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(64, 48).unwrap()
    }

    #[test]
    fn parses_fields_and_polarity_conventions() {
        let evs = parse_event_stream("0.001 10 20 1\n0.002 5 5 0\n0.004 1 1 -1\n", &geom()).unwrap();
        assert_eq!(evs[0], Event::new(0.001, 10.0, 20.0, Polarity::Pos));
        assert_eq!(evs[1], Event::new(0.002, 5.0, 5.0, Polarity::Neg));
        assert_eq!(evs[2].p, Polarity::Neg);
    }

    #[test]
    fn reports_line_of_malformed_token() {
        let err = parse_event_stream("0.001 10 20 1\n0.002 5 5 0\n0.003 10 twenty 1\n", &geom())
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_event_stream("0.1 1 2\n", &geom()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn rejects_out_of_bounds_pixel() {
        assert!(matches!(
            parse_event_stream("\n0.1 64 2 1\n", &geom()),
            Err(Error::Range { line: 2, .. })
        ));
    }

    #[test]
    fn geometry_file() {
        let g = SensorGeometry::parse("width = 240\nheight = 180\n").unwrap();
        assert_eq!((g.width, g.height), (240, 180));
        assert!(g.intrinsics.is_none());
        let g = SensorGeometry::parse(
            "width = 240\nheight = 180\nfx = 200.0\nfy = 200.0\ncx = 120.0\ncy = 90.0\n",
        )
        .unwrap();
        assert_eq!(SensorGeometry::parse(&g.to_text()).unwrap(), g);
        assert!(SensorGeometry::parse("width = 240\nheight = 180\nfx = 1.0\n").is_err());
        assert!(SensorGeometry::parse("width = 0\nheight = 180\n").is_err());
    }

    fn stream(n: usize) -> Vec<Event> {
        (0..n)
            .map(|i| Event::new(i as f64 * 0.01, (i % 8) as f64, 3.0, Polarity::Pos))
            .collect()
    }

    #[test]
    fn windowing_arithmetic() {
        let w = window_events(&stream(5), &geom(), 2, 2).unwrap();
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|w| w.len() == 2));
        assert_eq!(w[1].offset, 2);

        let s = stream(4);
        let w = window_events(&s, &geom(), 3, 1).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].events, s[0..3]);
        assert_eq!(w[1].events, s[1..4]);

        assert!(window_events(&[], &geom(), 3, 1).unwrap().is_empty());
        assert!(window_events(&s, &geom(), 3, 4).is_err());
    }

    #[test]
    fn denoise_examples() {
        let lonely = EventWindow::new(vec![Event::new(0.0, 3.0, 3.0, Polarity::Pos)], geom()).unwrap();
        assert!(denoise(&lonely, 1, 0.01).is_empty());

        let pair = EventWindow::new(
            vec![
                Event::new(0.0, 3.0, 3.0, Polarity::Pos),
                Event::new(0.001, 3.0, 3.0, Polarity::Neg),
            ],
            geom(),
        )
        .unwrap();
        assert_eq!(denoise(&pair, 1, 0.01).len(), 2);

        let mut evs = Vec::new();
        for y in 10..13 {
            for x in 10..13 {
                evs.push(Event::new(0.001 * (evs.len() as f64), x as f64, y as f64, Polarity::Pos));
            }
        }
        evs.push(Event::new(0.02, 63.0, 47.0, Polarity::Pos));
        let w = EventWindow::new(evs.clone(), geom()).unwrap();
        let d = denoise(&w, 1, 0.05);
        assert_eq!(d.events, evs[..9]);
    }
}
