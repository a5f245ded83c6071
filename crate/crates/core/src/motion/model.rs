use std::fmt;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::events::{Event, SensorGeometry};

/// Parametric image-plane motion families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Constant optical flow `(vx, vy)` in px/s.
    Flow2,
    /// Pure camera rotation `(wx, wy, wz)` in rad/s; needs intrinsics.
    Rot3,
    /// Similarity flow `(vx, vy, wz, s)` about the principal point:
    /// translation in px/s, in-plane rotation rate in rad/s and expansion
    /// rate in 1/s.
    Sim4,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Flow2, Family::Rot3, Family::Sim4];

    pub fn dof(self) -> usize {
        match self {
            Family::Flow2 => 2,
            Family::Rot3 => 3,
            Family::Sim4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Flow2 => "flow2",
            Family::Rot3 => "rot3",
            Family::Sim4 => "sim4",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flow2" => Ok(Family::Flow2),
            "rot3" => Ok(Family::Rot3),
            "sim4" => Ok(Family::Sim4),
            other => Err(Error::Config(format!("unknown motion family '{other}'"))),
        }
    }
}

/// A motion family together with its parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionModel {
    family: Family,
    params: Vec<f64>,
}

impl MotionModel {
    pub fn new(family: Family, params: Vec<f64>) -> Result<Self> {
        if params.len() != family.dof() {
            return Err(Error::Config(format!(
                "{family} takes {} parameters, got {}",
                family.dof(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite {family} parameters {params:?}")));
        }
        Ok(Self { family, params })
    }

    pub fn zero(family: Family) -> Self {
        Self {
            family,
            params: vec![0.0; family.dof()],
        }
    }

    pub fn flow(vx: f64, vy: f64) -> Self {
        Self {
            family: Family::Flow2,
            params: vec![vx, vy],
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Prepares a warp to `t_ref` for the given sensor.
    pub fn warper(&self, t_ref: f64, geometry: &SensorGeometry) -> Result<Warper> {
        let kind = match self.family {
            Family::Flow2 => WarpKind::Flow {
                vx: self.params[0],
                vy: self.params[1],
            },
            Family::Sim4 => {
                let (cx, cy) = geometry.center();
                WarpKind::Similarity {
                    center: Complex64::new(cx, cy),
                    rate: Complex64::new(self.params[3], self.params[2]),
                    velocity: Complex64::new(self.params[0], self.params[1]),
                }
            }
            Family::Rot3 => {
                let k = geometry.intrinsics.ok_or_else(|| {
                    Error::Config("rot3 motion requires camera intrinsics".to_string())
                })?;
                WarpKind::Rotation {
                    fx: k.fx,
                    fy: k.fy,
                    cx: k.cx,
                    cy: k.cy,
                    omega: Vector3::new(self.params[0], self.params[1], self.params[2]),
                }
            }
        };
        Ok(Warper { t_ref, kind })
    }
}

impl fmt::Display for MotionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        for p in &self.params {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum WarpKind {
    Flow {
        vx: f64,
        vy: f64,
    },
    // Flow of the field dz/dt = velocity + rate * (z - center) on the
    // complex plane; `rate` = s + i*wz.
    Similarity {
        center: Complex64,
        rate: Complex64,
        velocity: Complex64,
    },
    Rotation {
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        omega: Vector3<f64>,
    },
}

/// Transports image points to a reference time along a motion model.
#[derive(Clone, Debug)]
pub struct Warper {
    t_ref: f64,
    kind: WarpKind,
}

/// (e^z - 1) / z, stable near zero.
fn exp_ratio(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0
    } else {
        (z.exp() - 1.0) / z
    }
}

impl Warper {
    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    pub fn warp_event(&self, e: &Event) -> (f64, f64) {
        self.warp_point(e.x, e.y, e.t - self.t_ref)
    }

    /// Moves a point observed `dt` seconds after the reference time back to
    /// the reference time. The result may be outside the image, and is NaN
    /// when a rotation carries the ray behind the camera.
    pub fn warp_point(&self, x: f64, y: f64, dt: f64) -> (f64, f64) {
        match &self.kind {
            WarpKind::Flow { vx, vy } => (x - dt * vx, y - dt * vy),
            WarpKind::Similarity {
                center,
                rate,
                velocity,
            } => {
                let tau = -dt;
                let z = *rate * tau;
                let rel = Complex64::new(x, y) - center;
                let out = z.exp() * rel + velocity * exp_ratio(z) * tau + center;
                (out.re, out.im)
            }
            WarpKind::Rotation {
                fx,
                fy,
                cx,
                cy,
                omega,
            } => {
                let ray = Vector3::new((x - cx) / fx, (y - cy) / fy, 1.0);
                let r = Rotation3::from_scaled_axis(-omega * dt) * ray;
                if r.z <= 1e-12 {
                    return (f64::NAN, f64::NAN);
                }
                (fx * r.x / r.z + cx, fy * r.y / r.z + cy)
            }
        }
    }
}

/// Warps a single event to `t_ref`.
pub fn warp_event(
    e: &Event,
    model: &MotionModel,
    t_ref: f64,
    geometry: &SensorGeometry,
) -> Result<(f64, f64)> {
    Ok(model.warper(t_ref, geometry)?.warp_event(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Intrinsics, Polarity};

    fn calibrated() -> SensorGeometry {
        SensorGeometry::new(240, 180)
            .unwrap()
            .with_intrinsics(Intrinsics {
                fx: 200.0,
                fy: 200.0,
                cx: 120.0,
                cy: 90.0,
            })
            .unwrap()
    }

    fn ev(t: f64, x: f64, y: f64) -> Event {
        Event::new(t, x, y, Polarity::Pos)
    }

    #[test]
    fn flow_displacement() {
        let g = calibrated();
        let p = warp_event(&ev(1.0, 10.0, 10.0), &MotionModel::flow(2.0, -3.0), 0.0, &g).unwrap();
        assert_eq!(p, (8.0, 13.0));
    }

    #[test]
    fn zero_parameters_are_identity() {
        let g = calibrated();
        let e = ev(0.7, 33.25, 71.5);
        for fam in Family::ALL {
            let p = warp_event(&e, &MotionModel::zero(fam), 0.1, &g).unwrap();
            assert!((p.0 - e.x).abs() < 1e-12 && (p.1 - e.y).abs() < 1e-12, "{fam}");
        }
    }

    #[test]
    fn rotation_needs_intrinsics() {
        let g = SensorGeometry::new(10, 10).unwrap();
        let m = MotionModel::new(Family::Rot3, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(m.warper(0.0, &g), Err(Error::Config(_))));
    }

    #[test]
    fn roll_about_principal_axis_is_planar_rotation() {
        let g = calibrated();
        let wz = 0.5;
        let m = MotionModel::new(Family::Rot3, vec![0.0, 0.0, wz]).unwrap();
        let w = m.warper(0.0, &g).unwrap();
        assert_eq!(w.warp_point(120.0, 90.0, 0.02), (120.0, 90.0));
        for &(x, y, dt) in &[(10.0, 20.0, 0.02), (200.0, 170.0, -0.015), (0.0, 0.0, 0.01)] {
            // explicit rotation matrix + pinhole projection
            let a: f64 = -wz * dt;
            let (c, s) = (a.cos(), a.sin());
            let (bx, by) = ((x - 120.0) / 200.0, (y - 90.0) / 200.0);
            let (rx, ry) = (c * bx - s * by, s * bx + c * by);
            let expect = (200.0 * rx + 120.0, 200.0 * ry + 90.0);
            let got = w.warp_point(x, y, dt);
            assert!((got.0 - expect.0).abs() < 1e-6 && (got.1 - expect.1).abs() < 1e-6);
        }
    }

    #[test]
    fn similarity_without_rotation_or_scale_is_flow() {
        let g = calibrated();
        let sim = MotionModel::new(Family::Sim4, vec![3.0, -1.5, 0.0, 0.0]).unwrap();
        let p = warp_event(&ev(0.4, 50.0, 60.0), &sim, 0.0, &g).unwrap();
        assert!((p.0 - 48.8).abs() < 1e-12 && (p.1 - 60.6).abs() < 1e-12);
    }

    #[test]
    fn similarity_pure_scale_about_center() {
        let g = calibrated();
        let s = 0.8;
        let sim = MotionModel::new(Family::Sim4, vec![0.0, 0.0, 0.0, s]).unwrap();
        let w = sim.warper(0.0, &g).unwrap();
        let (x, y) = w.warp_point(150.0, 90.0, 0.5);
        assert!((x - (120.0 + 30.0 * (-s * 0.5f64).exp())).abs() < 1e-9);
        assert!((y - 90.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameter_vectors() {
        assert!(MotionModel::new(Family::Flow2, vec![1.0]).is_err());
        assert!(MotionModel::new(Family::Sim4, vec![1.0, 0.0, f64::NAN, 0.0]).is_err());
        assert_eq!("SIM4".parse::<Family>().unwrap(), Family::Sim4);
    }
}
