//! Parametric warps, images of warped events and contrast-maximization
//! fitting.

mod fit;
mod iwe;
mod model;

pub use fit::{contrast, fit_motion, nelder_mead, FitOptions};
pub use iwe::{build_iwe, grid_variance, negate_iwe, variance, Iwe, Kernel, NegIwe, MAX_GAUSSIAN_SIGMA};
pub use model::{warp_event, Family, MotionModel, Warper};
