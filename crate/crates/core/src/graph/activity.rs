use crate::events::EventWindow;

/// Binary image of pixels that received at least one event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityImage {
    pub width: usize,
    pub height: usize,
    pub grid: Vec<bool>,
    /// Active pixels as `(x, y)`, sorted by x then y.
    pub active_pixels: Vec<(u32, u32)>,
}

impl ActivityImage {
    pub fn is_active(&self, x: usize, y: usize) -> bool {
        self.grid[y * self.width + x]
    }
}

/// Marks the pixel `(floor(x), floor(y))` of every event.
pub fn activity_image(window: &EventWindow) -> ActivityImage {
    let (w, h) = (window.geometry.width, window.geometry.height);
    let mut grid = vec![false; w * h];
    for e in &window.events {
        let (px, py) = e.pixel();
        if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
            grid[py as usize * w + px as usize] = true;
        }
    }
    let mut active_pixels = Vec::new();
    for x in 0..w {
        for y in 0..h {
            if grid[y * w + x] {
                active_pixels.push((x as u32, y as u32));
            }
        }
    }
    ActivityImage {
        width: w,
        height: h,
        grid,
        active_pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, Polarity, SensorGeometry};

    fn window(points: &[(f64, f64)]) -> EventWindow {
        let events = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Event::new(i as f64, x, y, Polarity::Pos))
            .collect();
        EventWindow::new(events, SensorGeometry::new(8, 6).unwrap()).unwrap()
    }

    #[test]
    fn repeated_pixel_counts_once() {
        let a = activity_image(&window(&[(3.0, 3.0), (3.0, 3.0), (3.0, 3.0)]));
        assert_eq!(a.active_pixels, vec![(3, 3)]);
    }

    #[test]
    fn empty_window_has_no_active_pixels() {
        let a = activity_image(&window(&[]));
        assert!(a.active_pixels.is_empty());
        assert!(a.grid.iter().all(|&v| !v));
    }

    #[test]
    fn floors_subpixel_coordinates() {
        let a = activity_image(&window(&[(1.4, 2.9), (5.0, 0.0), (0.2, 4.0)]));
        assert!(a.is_active(1, 2));
        assert_eq!(a.active_pixels, vec![(0, 4), (1, 2), (5, 0)]);
    }
}
