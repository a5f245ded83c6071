//! Color label images written as binary pixmaps.

use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{EventWindow, SensorGeometry};
use crate::pipeline::SegmentationResult;

/// Label colors, indexed by label id.
pub const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [170, 110, 40],
];

pub fn label_color(label: usize) -> [u8; 3] {
    PALETTE[label % PALETTE.len()]
}

/// An 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Distinct non-black colors in the image, sorted.
    pub fn foreground_colors(&self) -> Vec<[u8; 3]> {
        let mut colors: Vec<[u8; 3]> = self
            .data
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .filter(|c| c != &[0, 0, 0])
            .collect();
        colors.sort_unstable();
        colors.dedup();
        colors
    }
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let bad = |m: &str| Error::parse(0, format!("pixmap: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("not a binary pixmap"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit pixmaps are supported"));
    }
    let data = bytes.get(pos + 1..).ok_or_else(|| bad("truncated data"))?;
    if data.len() != width * height * 3 {
        return Err(bad("pixel data size mismatch"));
    }
    Ok(RgbImage {
        width,
        height,
        data: data.to_vec(),
    })
}

pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes)
}

/// How a result is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum RenderStyle {
    /// Events warped by their cluster's model; each pixel takes the color
    /// of the label depositing the most mass.
    Iwe,
    /// Events at their raw pixels, colored by the label of the latest one.
    Events,
}

impl std::str::FromStr for RenderStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iwe" => Ok(RenderStyle::Iwe),
            "events" => Ok(RenderStyle::Events),
            other => Err(Error::Config(format!("unknown render style '{other}'"))),
        }
    }
}

pub fn render(result: &SegmentationResult, window: &EventWindow, style: RenderStyle) -> Result<RgbImage> {
    if window.len() != result.event_count() {
        return Err(Error::Config(format!(
            "result labels {} events but the window holds {}",
            result.event_count(),
            window.len()
        )));
    }
    let SensorGeometry { width, height, .. } = window.geometry;
    let mut image = RgbImage::new(width, height);
    let labels = result.labeling.as_slice();
    match style {
        RenderStyle::Iwe => {
            let k = result.pool.len();
            let mut mass = vec![0.0f64; width * height * k];
            for (l, cluster) in result.warped_clusters(window)?.iter().enumerate() {
                for &(x, y) in cluster {
                    splat(&mut mass, width, height, k, l, x, y);
                }
            }
            for p in 0..width * height {
                let cell = &mass[p * k..(p + 1) * k];
                let best = (0..k).fold(None, |best: Option<usize>, l| match best {
                    Some(b) if cell[b] >= cell[l] => Some(b),
                    _ if cell[l] > 0.0 => Some(l),
                    b => b,
                });
                if let Some(l) = best {
                    image.set(p % width, p / width, label_color(l));
                }
            }
        }
        RenderStyle::Events => {
            for (e, &l) in window.events.iter().zip(labels) {
                let (x, y) = e.pixel();
                if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                    image.set(x as usize, y as usize, label_color(l));
                }
            }
        }
    }
    Ok(image)
}

fn splat(mass: &mut [f64], width: usize, height: usize, k: usize, label: usize, x: f64, y: f64) {
    if !(x.is_finite() && y.is_finite()) {
        return;
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let (px, py) = (x0 as i64 + dx, y0 as i64 + dy);
            let w = wx * wy;
            if w > 0.0 && px >= 0 && py >= 0 && (px as usize) < width && (py as usize) < height {
                mass[(py as usize * width + px as usize) * k + label] += w;
            }
        }
    }
}
