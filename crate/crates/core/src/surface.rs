//! Implicit surfaces `phi(x) = 0` close to the unit sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real3;

/// Largest admissible `|eps_i|`; beyond this the small-deformation picture
/// no longer applies.
pub const MAX_EPS: f64 = 0.5;

const PROJECTION_MAX_ITERS: usize = 50;
const PROJECTION_TOL: f64 = 1e-12;
const GRADIENT_FLOOR: f64 = 1e-12;

/// Quartic deformation coefficients `(eps1, eps2, eps3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct EpsilonTriple([f64; 3]);

impl EpsilonTriple {
    pub fn new(eps1: f64, eps2: f64, eps3: f64) -> Result<Self> {
        Self::try_from([eps1, eps2, eps3])
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// `max_i |eps_i|`.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0.0)
    }
}

impl TryFrom<[f64; 3]> for EpsilonTriple {
    type Error = Error;

    fn try_from(eps: [f64; 3]) -> Result<Self> {
        for e in eps {
            if !e.is_finite() || e.abs() > MAX_EPS {
                return Err(Error::InvalidInput(format!(
                    "deformation coefficient {e} outside [-{MAX_EPS}, {MAX_EPS}]"
                )));
            }
        }
        Ok(Self(eps))
    }
}

impl From<EpsilonTriple> for [f64; 3] {
    fn from(e: EpsilonTriple) -> Self {
        e.0
    }
}

/// The surfaces supported by the geodesic integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SurfaceSpec {
    /// `sum_i (x_i^2 + eps_i x_i^4) - 1 = 0`
    Quartic { eps: EpsilonTriple },
    /// `sum_i x_i^2 / a_i^2 - 1 = 0`
    Ellipsoid {
        #[serde(deserialize_with = "positive_axes")]
        axes: [f64; 3],
    },
}

fn positive_axes<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<[f64; 3], D::Error> {
    let axes = <[f64; 3]>::deserialize(d)?;
    if axes.iter().all(|a| a.is_finite() && *a > 0.0) {
        Ok(axes)
    } else {
        Err(serde::de::Error::custom("ellipsoid semi-axes must be positive"))
    }
}

/// Diagonal Hessian of `phi`. Both surface variants are axis-aligned, but the
/// type is used through its symmetric-matrix operations only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricMatrix3 {
    diag: Real3,
}

impl SymmetricMatrix3 {
    pub fn from_diagonal(diag: Real3) -> Self {
        Self { diag }
    }

    pub fn diagonal(&self) -> Real3 {
        self.diag
    }

    pub fn mul_vec(&self, v: &Real3) -> Real3 {
        self.diag.component_mul(v)
    }

    /// `v . H . v`
    pub fn quadratic_form(&self, v: &Real3) -> f64 {
        v.dot(&self.mul_vec(v))
    }

    pub fn to_matrix(&self) -> nalgebra::Matrix3<f64> {
        nalgebra::Matrix3::from_diagonal(&self.diag)
    }
}

impl SurfaceSpec {
    pub fn quartic(eps: EpsilonTriple) -> Self {
        SurfaceSpec::Quartic { eps }
    }

    pub fn ellipsoid(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        let axes = [a1, a2, a3];
        if axes.iter().all(|a| a.is_finite() && *a > 0.0) {
            Ok(SurfaceSpec::Ellipsoid { axes })
        } else {
            Err(Error::InvalidInput("ellipsoid semi-axes must be positive".into()))
        }
    }

    pub fn unit_sphere() -> Self {
        SurfaceSpec::Quartic { eps: EpsilonTriple([0.0; 3]) }
    }

    pub fn phi(&self, x: &Real3) -> f64 {
        match self {
            SurfaceSpec::Quartic { eps } => (0..3).map(|i| x[i] * x[i] + eps.0[i] * x[i].powi(4)).sum::<f64>() - 1.0,
            SurfaceSpec::Ellipsoid { axes } => (0..3).map(|i| (x[i] / axes[i]).powi(2)).sum::<f64>() - 1.0,
        }
    }

    pub fn grad_phi(&self, x: &Real3) -> Real3 {
        match self {
            SurfaceSpec::Quartic { eps } => Real3::from_fn(|i, _| 2.0 * x[i] + 4.0 * eps.0[i] * x[i].powi(3)),
            SurfaceSpec::Ellipsoid { axes } => Real3::from_fn(|i, _| 2.0 * x[i] / (axes[i] * axes[i])),
        }
    }

    pub fn hess_phi(&self, x: &Real3) -> SymmetricMatrix3 {
        let diag = match self {
            SurfaceSpec::Quartic { eps } => Real3::from_fn(|i, _| 2.0 + 12.0 * eps.0[i] * x[i] * x[i]),
            SurfaceSpec::Ellipsoid { axes } => Real3::from_fn(|i, _| 2.0 / (axes[i] * axes[i])),
        };
        SymmetricMatrix3::from_diagonal(diag)
    }

    /// Moves `x` onto the surface along its own gradient direction:
    /// Newton iteration on `t -> phi(x + t grad_phi(x))`.
    pub fn project_to_surface(&self, x: &Real3) -> Result<Real3> {
        if !(x.iter().all(|c| c.is_finite())) || x.norm() == 0.0 {
            return Err(Error::InvalidInput("cannot project the origin".into()));
        }
        let dir = self.grad_phi(x);
        if dir.norm() < GRADIENT_FLOOR {
            return Err(Error::DegenerateGradient { norm: dir.norm() });
        }
        let mut t = 0.0;
        let mut p = *x;
        let mut residual = self.phi(&p);
        for _ in 0..PROJECTION_MAX_ITERS {
            if residual.abs() <= PROJECTION_TOL * 1e-2 {
                break;
            }
            let slope = self.grad_phi(&p).dot(&dir);
            if slope == 0.0 {
                break;
            }
            t -= residual / slope;
            p = x + dir * t;
            residual = self.phi(&p);
        }
        if residual.abs() > PROJECTION_TOL || !residual.is_finite() {
            return Err(Error::NonConvergence { residual });
        }
        Ok(p)
    }

    /// Removes the normal component of `v` at `x`.
    pub fn project_velocity(&self, x: &Real3, v: &Real3) -> Result<Real3> {
        let g = self.grad_phi(x);
        let gn = g.norm();
        if gn < GRADIENT_FLOOR {
            return Err(Error::DegenerateGradient { norm: gn });
        }
        let n = g / gn;
        let mut w = v - n * v.dot(&n);
        // one more sweep removes the rounding left by the first
        w -= n * w.dot(&n);
        Ok(w)
    }

    /// Scale of the deformation, used to pick slow time scales.
    pub fn deformation_scale(&self) -> f64 {
        match self {
            SurfaceSpec::Quartic { eps } => eps.max_abs(),
            SurfaceSpec::Ellipsoid { axes } => {
                let k: Vec<f64> = axes.iter().map(|a| 1.0 / (a * a)).collect();
                let kmax = k.iter().cloned().fold(f64::MIN, f64::max);
                let kmin = k.iter().cloned().fold(f64::MAX, f64::min);
                kmax - kmin
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(a: f64, b: f64, c: f64) -> SurfaceSpec {
        SurfaceSpec::quartic(EpsilonTriple::new(a, b, c).unwrap())
    }

    #[test]
    fn phi_examples() {
        assert_eq!(eps(0.0, 0.0, 0.0).phi(&Real3::new(1.0, 0.0, 0.0)), 0.0);
        assert!((eps(0.02, 0.03, 0.04).phi(&Real3::new(0.0, 0.0, 1.0)) - 0.04).abs() < 1e-15);
        let e = SurfaceSpec::ellipsoid(1.01, 1.02, 1.03).unwrap();
        assert!(e.phi(&Real3::new(1.01, 0.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_examples() {
        assert_eq!(eps(0.0, 0.0, 0.0).grad_phi(&Real3::z()), Real3::new(0.0, 0.0, 2.0));
        let s = eps(0.02, 0.03, 0.04);
        assert!((s.grad_phi(&Real3::z()) - Real3::new(0.0, 0.0, 2.16)).norm() < 1e-15);
        assert_eq!(eps(0.0, 0.0, 0.0).hess_phi(&Real3::new(0.3, -0.2, 0.9)).diagonal(), Real3::new(2.0, 2.0, 2.0));
        assert!((s.hess_phi(&Real3::z()).diagonal() - Real3::new(2.0, 2.0, 2.48)).norm() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let sphere = SurfaceSpec::unit_sphere();
        let p = sphere.project_to_surface(&Real3::new(2.0, 0.0, 0.0)).unwrap();
        assert!((p - Real3::x()).norm() < 1e-12);
        assert_eq!(sphere.project_to_surface(&Real3::x()).unwrap(), Real3::x());

        // oracle: z^2 + 0.04 z^4 = 1 solved in closed form for z^2
        let z = ((-1.0 + (1.0_f64 + 0.16).sqrt()) / 0.08).sqrt();
        assert!((z - 0.981_281_4).abs() < 1e-6);
        let s = eps(0.02, 0.03, 0.04);
        let p = s.project_to_surface(&Real3::new(0.0, 0.0, 1.001)).unwrap();
        assert!(s.phi(&p).abs() <= 1e-12);
        assert!((p - Real3::new(0.0, 0.0, z)).norm() < 1e-12);
    }

    #[test]
    fn projection_rejects_origin_and_far_points() {
        let sphere = SurfaceSpec::unit_sphere();
        assert!(sphere.project_to_surface(&Real3::zeros()).is_err());
        let s = eps(-0.5, -0.5, -0.5);
        // x + t grad never reaches phi = 0 when the quartic dominates
        let r = s.project_to_surface(&Real3::new(1e3, 0.0, 0.0));
        assert!(r.is_err() || s.phi(&r.unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn velocity_projection_examples() {
        let sphere = SurfaceSpec::unit_sphere();
        let x = Real3::x();
        assert_eq!(sphere.project_velocity(&x, &Real3::y()).unwrap(), Real3::y());
        let w = sphere.project_velocity(&x, &Real3::new(1.0, 1.0, 0.0)).unwrap();
        assert!((w - Real3::y()).norm() < 1e-15);
    }

    #[test]
    fn reference_initial_velocity_is_nearly_tangent() {
        let s = SurfaceSpec::ellipsoid(1.01, 1.02, 1.03).unwrap();
        let x = s.project_to_surface(&Real3::new(-0.0117, 0.0001, -1.0299)).unwrap();
        let v = Real3::new(-1.9416, 0.0194, 0.0228);
        let w = s.project_velocity(&x, &v).unwrap();
        assert!((w - v).norm() < 1e-3);
        let g = s.grad_phi(&x);
        assert!(w.dot(&g).abs() <= 1e-12 * w.norm() * g.norm());
    }

    #[test]
    fn degenerate_gradient() {
        let sphere = SurfaceSpec::unit_sphere();
        assert!(matches!(sphere.project_velocity(&Real3::zeros(), &Real3::x()), Err(Error::DegenerateGradient { .. })));
    }

    #[test]
    fn serde_shape() {
        let s = eps(0.02, 0.03, 0.04);
        assert_eq!(serde_json::to_string(&s).unwrap(), r#"{"type":"quartic","eps":[0.02,0.03,0.04]}"#);
        let e: SurfaceSpec = serde_json::from_str(r#"{"type":"ellipsoid","axes":[1.01,1.02,1.03]}"#).unwrap();
        assert_eq!(e, SurfaceSpec::ellipsoid(1.01, 1.02, 1.03).unwrap());
        assert!(serde_json::from_str::<SurfaceSpec>(r#"{"type":"ellipsoid","axes":[1,0,1]}"#).is_err());
        assert!(serde_json::from_str::<SurfaceSpec>(r#"{"type":"quartic","eps":[0.9,0,0]}"#).is_err());
    }
}
