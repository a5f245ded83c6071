//! Contrast-maximization fitting of a motion model to a group of events.

use crate::error::Result;
use crate::events::{Event, SensorGeometry};
use crate::motion::iwe::{accumulate, clamp_kernel, grid_variance, Kernel, Splatter};
use crate::motion::model::{Family, MotionModel};

/// Settings for [`fit_motion`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub kernel: Kernel,
    /// Objective evaluation budget, shared across simplex restarts.
    pub max_evals: usize,
    /// Convergence threshold on the relative spread of contrast values
    /// over the simplex.
    pub rel_tol: f64,
    /// Initial simplex size, expressed as the pixel displacement it causes
    /// over the time span of the events.
    pub step_px: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            kernel: Kernel::Bilinear,
            max_evals: 200,
            rel_tol: 1e-4,
            step_px: 2.0,
        }
    }
}

/// Minimizes `f` with the Nelder-Mead simplex method, restarting around the
/// incumbent until a restart stops improving or the budget is spent.
/// Returns the best point and value seen, including `x0` itself.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], max_evals: usize, rel_tol: f64) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut best = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    if n == 0 {
        return (best, best_f);
    }

    loop {
        let start_f = best_f;
        // simplex around the incumbent
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best.clone(), best_f));
        for i in 0..n {
            if evals >= max_evals {
                break;
            }
            let mut x = best.clone();
            x[i] += steps[i];
            let fx = eval(&x, &mut evals);
            simplex.push((x, fx));
        }
        if simplex.len() < n + 1 {
            break;
        }

        while evals < max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if (hi - lo).abs() <= rel_tol * lo.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };
            let xr = along(-1.0);
            let fr = eval(&xr, &mut evals);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = if evals < max_evals { eval(&xe, &mut evals) } else { f64::INFINITY };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = eval(&xc, &mut evals);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    // shrink toward the best vertex
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        if evals >= max_evals {
                            break;
                        }
                        let x: Vec<f64> = anchor
                            .iter()
                            .zip(&vertex.0)
                            .map(|(a, v)| a + 0.5 * (v - a))
                            .collect();
                        let fx = eval(&x, &mut evals);
                        *vertex = (x, fx);
                    }
                }
            }
        }

        for (x, fx) in &simplex {
            if *fx < best_f {
                best_f = *fx;
                best = x.clone();
            }
        }
        let improved = best_f < start_f - rel_tol * start_f.abs();
        if !improved || evals >= max_evals {
            break;
        }
    }
    (best, best_f)
}

/// Simplex step per parameter giving roughly `step_px` of displacement over
/// `span` seconds.
fn parameter_steps(family: Family, geometry: &SensorGeometry, span: f64, step_px: f64) -> Vec<f64> {
    let lin = step_px / span;
    let radius = geometry.width.max(geometry.height) as f64 / 4.0;
    match family {
        Family::Flow2 => vec![lin, lin],
        Family::Sim4 => vec![lin, lin, lin / radius, lin / radius],
        Family::Rot3 => {
            let (fx, fy) = geometry
                .intrinsics
                .map_or((radius, radius), |k| (k.fx, k.fy));
            vec![lin / fy, lin / fx, lin / radius]
        }
    }
}

/// Contrast of the IWE of `events` warped by `model`.
pub fn contrast(
    events: &[Event],
    model: &MotionModel,
    t_ref: f64,
    geometry: &SensorGeometry,
    kernel: Kernel,
) -> Result<f64> {
    let warper = model.warper(t_ref, geometry)?;
    let splatter = Splatter::new(geometry, clamp_kernel(kernel));
    let mut grid = vec![0.0; geometry.pixel_count()];
    accumulate(events, &warper, &splatter, &mut grid);
    Ok(grid_variance(&grid))
}

/// Fits `family` to `events` by maximizing IWE variance, starting from
/// `init`. Never returns parameters with lower contrast than `init`.
pub fn fit_motion(
    events: &[Event],
    init: &MotionModel,
    geometry: &SensorGeometry,
    t_ref: f64,
    options: &FitOptions,
) -> Result<MotionModel> {
    let family = init.family();
    // validates intrinsics up front
    init.warper(t_ref, geometry)?;
    let span = events
        .iter()
        .map(|e| (e.t - t_ref).abs())
        .fold(0.0, f64::max);
    if events.len() < 2 || span <= 0.0 {
        return Ok(init.clone());
    }

    let splatter = Splatter::new(geometry, clamp_kernel(options.kernel));
    let mut grid = vec![0.0; geometry.pixel_count()];
    let objective = |theta: &[f64]| -> f64 {
        let Ok(model) = MotionModel::new(family, theta.to_vec()) else {
            return f64::INFINITY;
        };
        let warper = model
            .warper(t_ref, geometry)
            .expect("intrinsics checked above");
        accumulate(events, &warper, &splatter, &mut grid);
        -grid_variance(&grid)
    };
    let steps = parameter_steps(family, geometry, span, options.step_px);
    let (theta, _) = nelder_mead(objective, init.params(), &steps, options.max_evals, options.rel_tol);
    MotionModel::new(family, theta)
}
