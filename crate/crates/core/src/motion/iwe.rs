//! Images of warped events, the variance contrast and IWE negatives.

use crate::error::Result;
use crate::events::{Event, SensorGeometry};
use crate::motion::model::{MotionModel, Warper};

/// How a warped event deposits its unit mass on the pixel grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[derive(Default)]
pub enum Kernel {
    /// Bilinear split over the four enclosing pixel centers.
    #[default]
    Bilinear,
    /// Normalized Gaussian of standard deviation `sigma` px, truncated at
    /// three sigma.
    Gaussian { sigma: f64 },
}


/// Image of warped events. Pixel `(x, y)` is centered on integer
/// coordinates and stored at `grid[y * width + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iwe {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<f64>,
    pub t_ref: f64,
    pub kernel: Kernel,
    /// Mass that fell outside the image.
    pub discarded: f64,
}

impl Iwe {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.grid[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.grid.iter().sum()
    }
}

/// Reusable accumulation buffer, so that objective evaluations during
/// fitting do not allocate.
#[derive(Clone, Debug)]
pub(crate) struct Splatter {
    width: usize,
    height: usize,
    kernel: Kernel,
    radius: i64,
}

impl Splatter {
    pub(crate) fn new(geometry: &SensorGeometry, kernel: Kernel) -> Self {
        let radius = match kernel {
            Kernel::Bilinear => 1,
            Kernel::Gaussian { sigma } => (3.0 * sigma).ceil().max(1.0) as i64,
        };
        Self {
            width: geometry.width,
            height: geometry.height,
            kernel,
            radius,
        }
    }

    /// Adds unit mass at `(x, y)`; returns the mass that fell outside.
    pub(crate) fn splat(&self, grid: &mut [f64], x: f64, y: f64) -> f64 {
        let (w, h) = (self.width as i64, self.height as i64);
        if !(x.is_finite() && y.is_finite()) {
            return 1.0;
        }
        match self.kernel {
            Kernel::Bilinear => {
                let (x0, y0) = (x.floor(), y.floor());
                let (fx, fy) = (x - x0, y - y0);
                let (ix, iy) = (x0 as i64, y0 as i64);
                let mut lost = 0.0;
                for (dx, dy, wgt) in [
                    (0, 0, (1.0 - fx) * (1.0 - fy)),
                    (1, 0, fx * (1.0 - fy)),
                    (0, 1, (1.0 - fx) * fy),
                    (1, 1, fx * fy),
                ] {
                    let (px, py) = (ix + dx, iy + dy);
                    if px >= 0 && py >= 0 && px < w && py < h {
                        grid[(py * w + px) as usize] += wgt;
                    } else {
                        lost += wgt;
                    }
                }
                lost
            }
            Kernel::Gaussian { sigma } => {
                let r = self.radius;
                let n = (2 * r + 1) as usize;
                let (cx, cy) = (x.round() as i64, y.round() as i64);
                let mut wx = [0.0f64; 64];
                let mut wy = [0.0f64; 64];
                let sx = gaussian_taps(&mut wx[..n], cx - r, x, sigma);
                let sy = gaussian_taps(&mut wy[..n], cy - r, y, sigma);
                let norm = 1.0 / (sx * sy);
                let mut kept = 0.0;
                for (j, &gy) in wy[..n].iter().enumerate() {
                    let py = cy - r + j as i64;
                    if py < 0 || py >= h || gy == 0.0 {
                        continue;
                    }
                    let row = (py * w) as usize;
                    for (i, &gx) in wx[..n].iter().enumerate() {
                        let px = cx - r + i as i64;
                        if px < 0 || px >= w || gx == 0.0 {
                            continue;
                        }
                        let m = gx * gy * norm;
                        grid[row + px as usize] += m;
                        kept += m;
                    }
                }
                1.0 - kept
            }
        }
    }
}

/// Fills separable taps, zero beyond three sigma; returns their sum.
fn gaussian_taps(taps: &mut [f64], first: i64, center: f64, sigma: f64) -> f64 {
    let inv = -0.5 / (sigma * sigma);
    let cut = 3.0 * sigma;
    let mut sum = 0.0;
    for (k, slot) in taps.iter_mut().enumerate() {
        let d = (first + k as i64) as f64 - center;
        *slot = if d.abs() <= cut { (inv * d * d).exp() } else { 0.0 };
        sum += *slot;
    }
    sum
}

/// Largest supported Gaussian width; kernel taps live on the stack.
pub const MAX_GAUSSIAN_SIGMA: f64 = 10.0;

pub(crate) fn accumulate(
    events: &[Event],
    warper: &Warper,
    splatter: &Splatter,
    grid: &mut [f64],
) -> f64 {
    grid.iter_mut().for_each(|v| *v = 0.0);
    let mut lost = 0.0;
    for e in events {
        let (x, y) = warper.warp_event(e);
        lost += splatter.splat(grid, x, y);
    }
    lost
}

/// Builds the image of events warped to `t_ref` by `model`.
pub fn build_iwe(
    events: &[Event],
    model: &MotionModel,
    t_ref: f64,
    geometry: &SensorGeometry,
    kernel: Kernel,
) -> Result<Iwe> {
    let warper = model.warper(t_ref, geometry)?;
    let splatter = Splatter::new(geometry, clamp_kernel(kernel));
    let mut grid = vec![0.0; geometry.pixel_count()];
    let discarded = accumulate(events, &warper, &splatter, &mut grid);
    Ok(Iwe {
        width: geometry.width,
        height: geometry.height,
        grid,
        t_ref,
        kernel,
        discarded,
    })
}

pub(crate) fn clamp_kernel(kernel: Kernel) -> Kernel {
    match kernel {
        Kernel::Gaussian { sigma } => Kernel::Gaussian {
            sigma: sigma.clamp(1e-3, MAX_GAUSSIAN_SIGMA),
        },
        k => k,
    }
}

/// Population variance of a pixel grid (two-pass).
pub fn grid_variance(grid: &[f64]) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    let n = grid.len() as f64;
    let mean = grid.iter().sum::<f64>() / n;
    grid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Contrast of an IWE.
pub fn variance(iwe: &Iwe) -> f64 {
    grid_variance(&iwe.grid)
}

/// 8-bit negative of a min-max normalized IWE: 0 marks the sharpest pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NegIwe {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<u8>,
    pub model_id: Option<usize>,
}

/// Round-half-up quantization to [0, 255] followed by the negative.
pub fn negate_iwe(iwe: &Iwe) -> NegIwe {
    let (lo, hi) = iwe
        .grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let grid = if hi > lo {
        let scale = 255.0 / (hi - lo);
        iwe.grid
            .iter()
            .map(|&v| {
                let q = ((v - lo) * scale + 0.5).floor().clamp(0.0, 255.0) as u8;
                255 - q
            })
            .collect()
    } else {
        vec![255; iwe.grid.len()]
    };
    NegIwe {
        width: iwe.width,
        height: iwe.height,
        grid,
        model_id: None,
    }
}

impl NegIwe {
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.grid[y * self.width + x]
    }

    /// Bilinear sample; `None` outside `[0, W-1] x [0, H-1]`.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (wmax, hmax) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(x >= 0.0 && y >= 0.0 && x <= wmax && y <= hmax) {
            return None;
        }
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (ix, iy) = (x0 as usize, y0 as usize);
        let ix1 = (ix + 1).min(self.width - 1);
        let iy1 = (iy + 1).min(self.height - 1);
        let v = |cx: usize, cy: usize| f64::from(self.at(cx, cy));
        Some(
            (1.0 - fy) * ((1.0 - fx) * v(ix, iy) + fx * v(ix1, iy))
                + fy * ((1.0 - fx) * v(ix, iy1) + fx * v(ix1, iy1)),
        )
    }

    /// Unary cost of a warped location: the floored bilinear sample, or 255
    /// outside the image.
    pub fn cost_at(&self, x: f64, y: f64) -> u32 {
        match self.sample(x, y) {
            // guard against 174.99999999 from exact-looking arithmetic
            Some(v) => ((v + 1e-9).floor() as u32).min(255),
            None => 255,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Polarity;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(12, 10).unwrap()
    }

    fn iwe_of(points: &[(f64, f64)], kernel: Kernel) -> Iwe {
        let events: Vec<Event> = points
            .iter()
            .map(|&(x, y)| Event::new(0.0, x, y, Polarity::Pos))
            .collect();
        build_iwe(&events, &MotionModel::flow(0.0, 0.0), 0.0, &geom(), kernel).unwrap()
    }

    #[test]
    fn integer_landing() {
        let iwe = iwe_of(&[(5.0, 5.0)], Kernel::Bilinear);
        assert_eq!(iwe.at(5, 5), 1.0);
        assert_eq!(iwe.total(), 1.0);
    }

    #[test]
    fn half_pixel_split() {
        let iwe = iwe_of(&[(5.5, 5.0), (5.5, 5.0)], Kernel::Bilinear);
        assert_eq!(iwe.at(5, 5), 1.0);
        assert_eq!(iwe.at(6, 5), 1.0);
        assert_eq!(iwe.total(), 2.0);
    }

    #[test]
    fn out_of_bounds_mass_is_tracked() {
        for kernel in [Kernel::Bilinear, Kernel::Gaussian { sigma: 1.0 }] {
            let iwe = iwe_of(&[(-0.5, 3.0), (11.5, 9.5), (30.0, 1.0), (6.2, 4.7)], kernel);
            assert!((iwe.total() + iwe.discarded - 4.0).abs() < 1e-9, "{kernel:?}");
        }
    }

    #[test]
    fn gaussian_sums_to_one_inside() {
        let iwe = iwe_of(&[(6.3, 4.6)], Kernel::Gaussian { sigma: 1.0 });
        assert!((iwe.total() - 1.0).abs() < 1e-12);
        assert!(iwe.at(6, 5) > iwe.at(8, 5));
    }

    #[test]
    fn variance_examples() {
        assert_eq!(grid_variance(&[3.0; 16]), 0.0);
        let g: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 2.0 }).collect();
        assert!((grid_variance(&g) - 1.0).abs() < 1e-15);
    }

    fn grid(values: &[f64]) -> Iwe {
        Iwe {
            width: values.len(),
            height: 1,
            grid: values.to_vec(),
            t_ref: 0.0,
            kernel: Kernel::Bilinear,
            discarded: 0.0,
        }
    }

    #[test]
    fn negative_endpoints_and_midpoint() {
        let n = negate_iwe(&grid(&[0.0, 4.0, 2.0, 1.0]));
        assert_eq!(n.grid, vec![255, 0, 127, 191]);
        let c = negate_iwe(&grid(&[1.5; 5]));
        assert!(c.grid.iter().all(|&v| v == 255));
    }

    #[test]
    fn bilinear_unary_sample() {
        let n = NegIwe {
            width: 2,
            height: 1,
            grid: vec![100, 200],
            model_id: None,
        };
        assert_eq!(n.cost_at(0.75, 0.0), 175);
        assert_eq!(n.cost_at(1.0, 0.0), 200);
        assert_eq!(n.cost_at(1.01, 0.0), 255);
        assert_eq!(n.cost_at(f64::NAN, 0.0), 255);
    }
}
