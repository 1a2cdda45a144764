//! Stationary points of the averaged flow and their stability.
//!
//! Points are returned as projective representatives: unit vectors with the
//! third component nonnegative (ties broken by the second, then the first).
//! Three families occur on the quartic sphere:
//!
//! * `S1`: the coordinate axes, always stationary.
//! * `S2`: one component zero and the ratio of the other two fixed by the
//!   deformation, e.g. `L1 = 0, L3^2 / L2^2 = e3 / e2`, present iff
//!   `e2 e3 > 0`.
//! * `S3`: all components nonzero with `L_i^2 = q_i / (q1 + q2 + q3)`,
//!   present iff every `q_i` is positive (see [`crate::atlas::boundary_residuals`]).
//!
//! The `S1` labels follow the axis order `(0,0,1), (0,1,0), (1,0,0)`.

use nalgebra::{Matrix2, Matrix3x2};
use serde::{Deserialize, Serialize};

use crate::atlas::boundary_residuals;
use crate::averaged::{averaged_rhs, AveragedModel, Frame};
use crate::error::{Error, Result};
use crate::surface::EpsilonTriple;
use crate::Real3;

/// Relative tolerance below which a deciding quantity counts as zero.
pub const MARGINAL_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
const LEVEL_PROBE_RADIUS: f64 = 1e-2;
const LEVEL_PROBE_COUNT: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    S1a,
    S1b,
    S1c,
    S2a,
    S2b,
    S2c,
    S3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stability {
    Focus,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityMethod {
    /// Sign conditions on the deformation coefficients.
    Inequality,
    /// Eigenvalues of the restricted linearization.
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    #[serde(rename = "L0")]
    pub l0: Real3,
    pub family: Family,
    pub stability: Stability,
    /// Restricted spectrum as `[[re, im], [re, im]]`.
    pub eigen: [[f64; 2]; 2],
}

/// Antipodal representative with `L3 >= 0`, then `L2 >= 0`, then `L1 >= 0`.
pub fn canonical_representative(l: &Real3) -> Real3 {
    for i in (0..3).rev() {
        if l[i] > 0.0 {
            return *l;
        }
        if l[i] < 0.0 {
            return -l;
        }
    }
    *l
}

fn point(l: Real3, family: Family) -> (Real3, Family) {
    (canonical_representative(&l.normalize()), family)
}

/// Locations of the stationary points of the quartic-sphere averaged flow.
pub fn stationary_locations(eps: &EpsilonTriple) -> Result<Vec<(Real3, Family)>> {
    if eps.is_zero() {
        return Err(Error::DegenerateEpsilon);
    }
    let [e1, e2, e3] = eps.as_array();
    let mut out = vec![point(Real3::z(), Family::S1a), point(Real3::y(), Family::S1b), point(Real3::x(), Family::S1c)];
    if e2 * e3 > 0.0 {
        let (a, b) = (e2.abs().sqrt(), e3.abs().sqrt());
        out.push(point(Real3::new(0.0, a, b), Family::S2a));
        out.push(point(Real3::new(0.0, -a, b), Family::S2a));
    }
    if e3 * e1 > 0.0 {
        let (a, b) = (e1.abs().sqrt(), e3.abs().sqrt());
        out.push(point(Real3::new(a, 0.0, b), Family::S2b));
        out.push(point(Real3::new(-a, 0.0, b), Family::S2b));
    }
    if e1 * e2 > 0.0 {
        let (a, b) = (e1.abs().sqrt(), e2.abs().sqrt());
        out.push(point(Real3::new(a, b, 0.0), Family::S2c));
        out.push(point(Real3::new(-a, b, 0.0), Family::S2c));
    }
    let q = boundary_residuals(eps.as_array());
    if q.iter().all(|&v| v > 0.0) {
        let s = q / q.sum();
        let (a, b, c) = (s[0].sqrt(), s[1].sqrt(), s[2].sqrt());
        for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            out.push(point(Real3::new(sa * a, sb * b, c), Family::S3));
        }
    }
    Ok(out)
}

/// Enumerates the stationary points of the quartic-sphere averaged flow.
///
/// Stability is taken from the restricted spectrum; where the linearization
/// is degenerate the energy-level test of [`classify_by_energy_level`] decides.
pub fn enumerate_stationary(eps: &EpsilonTriple) -> Result<Vec<StationaryPoint>> {
    let model = AveragedModel::quartic(*eps);
    stationary_locations(eps)?.into_iter().map(|(l0, family)| build_point(&model, l0, family)).collect()
}

/// Stationary points for any averaged model; an ellipsoid gives its axes.
pub fn enumerate_for_model(model: &AveragedModel) -> Result<Vec<StationaryPoint>> {
    match model {
        AveragedModel::Quartic { eps } => enumerate_stationary(eps),
        AveragedModel::Quadratic { kappa } => {
            let distinct = (0..3).all(|i| kappa[i] != kappa[(i + 1) % 3]);
            if !distinct {
                return Err(Error::DegenerateEpsilon);
            }
            [(Real3::z(), Family::S1a), (Real3::y(), Family::S1b), (Real3::x(), Family::S1c)]
                .into_iter()
                .map(|(l0, family)| build_point(model, l0, family))
                .collect()
        }
    }
}

fn build_point(model: &AveragedModel, l0: Real3, family: Family) -> Result<StationaryPoint> {
    let jr = restricted(model, &l0)?;
    let eigen = eigenvalues(&jr);
    let stability = match spectrum_stability(model, &l0, &jr) {
        Ok(s) => s,
        Err(Error::Marginal { .. }) => classify_by_energy_level(model, &l0),
        Err(e) => return Err(e),
    };
    Ok(StationaryPoint { l0, family, stability, eigen })
}

fn tangent_basis(l0: &Real3) -> Result<Matrix3x2<f64>> {
    let f = Frame::with_fallback(l0)?;
    Ok(Matrix3x2::from_columns(&[f.e1, f.e2]))
}

fn restricted(model: &AveragedModel, l0: &Real3) -> Result<Matrix2<f64>> {
    let residual = model.rhs(l0).norm();
    if residual.is_nan() || residual > STATIONARY_TOL * l0.norm_squared().max(1.0) {
        return Err(Error::NotStationary { residual });
    }
    let b = tangent_basis(l0)?;
    Ok(b.transpose() * model.jacobian(l0) * b)
}

/// Linearization of the averaged flow at a stationary `l0`, restricted to the
/// tangent plane of the sphere `|L| = |l0|` in an orthonormal basis.
pub fn jacobian_restricted(l0: &Real3, eps: &EpsilonTriple) -> Result<Matrix2<f64>> {
    restricted(&AveragedModel::quartic(*eps), l0)
}

/// Spectrum of a 2×2 matrix as `[[re, im], [re, im]]`.
pub fn eigenvalues(m: &Matrix2<f64>) -> [[f64; 2]; 2] {
    let half_tr = 0.5 * m.trace();
    let disc = half_tr * half_tr - m.determinant();
    if disc >= 0.0 {
        let r = disc.sqrt();
        [[half_tr + r, 0.0], [half_tr - r, 0.0]]
    } else {
        let r = (-disc).sqrt();
        [[half_tr, r], [half_tr, -r]]
    }
}

/// Unstable and stable eigendirections (tangent unit vectors) of a saddle.
pub fn saddle_directions(model: &AveragedModel, l0: &Real3) -> Result<(Real3, Real3)> {
    let jr = restricted(model, l0)?;
    let [[lu, _], [ls, _]] = eigenvalues(&jr);
    if !(lu > 0.0 && ls < 0.0) {
        return Err(Error::Marginal { value: lu });
    }
    let b = tangent_basis(l0)?;
    let dir = |lambda: f64| {
        let (a, bb, c, d) = (jr[(0, 0)], jr[(0, 1)], jr[(1, 0)], jr[(1, 1)]);
        let v1 = nalgebra::Vector2::new(bb, lambda - a);
        let v2 = nalgebra::Vector2::new(lambda - d, c);
        let v = if v1.norm() >= v2.norm() { v1 } else { v2 };
        (b * v).normalize()
    };
    Ok((dir(lu), dir(ls)))
}

fn spectrum_stability(model: &AveragedModel, l0: &Real3, jr: &Matrix2<f64>) -> Result<Stability> {
    let scale = model.rate_scale(l0.norm());
    let det = jr.determinant() / (scale * scale);
    if det.abs() <= MARGINAL_TOL {
        return Err(Error::Marginal { value: det });
    }
    Ok(if det > 0.0 { Stability::Focus } else { Stability::Saddle })
}

/// The quantity whose sign decides stability in the inequality list, for
/// coefficients scaled to `max |e_i| = 1`. Focus iff positive.
fn deciding_quantity(family: Family, eps: &EpsilonTriple) -> f64 {
    let m = eps.max_abs();
    let [e1, e2, e3] = eps.as_array().map(|e| e / m);
    let q = boundary_residuals([e1, e2, e3]);
    match family {
        Family::S1a => e1 * e2,
        Family::S1b => e3 * e1,
        Family::S1c => e2 * e3,
        Family::S2a => -q[0],
        Family::S2b => -q[1],
        Family::S2c => -q[2],
        Family::S3 => q.min(),
    }
}

/// Stability of an enumerated point by the chosen method.
pub fn classify_stability(point: &StationaryPoint, eps: &EpsilonTriple, method: StabilityMethod) -> Result<Stability> {
    if eps.is_zero() {
        return Err(Error::DegenerateEpsilon);
    }
    match method {
        StabilityMethod::Inequality => {
            let d = deciding_quantity(point.family, eps);
            if d.abs() <= MARGINAL_TOL {
                Err(Error::Marginal { value: d })
            } else if point.family == Family::S3 || d > 0.0 {
                Ok(Stability::Focus)
            } else {
                Ok(Stability::Saddle)
            }
        }
        StabilityMethod::Spectrum => {
            let model = AveragedModel::quartic(*eps);
            let jr = restricted(&model, &point.l0)?;
            spectrum_stability(&model, &point.l0, &jr)
        }
    }
}

/// Stability from the shape of the energy surface around `l0`: an isolated
/// extremum of `H` on the sphere is a focus, anything else a saddle. Used
/// where the linearization vanishes.
pub fn classify_by_energy_level(model: &AveragedModel, l0: &Real3) -> Stability {
    let Ok(f) = Frame::with_fallback(l0) else {
        return Stability::Saddle;
    };
    let norm = l0.norm();
    let h0 = model.hamiltonian(l0);
    let floor = 1e-14 * model.energy_scale(norm);
    let mut signs = Vec::with_capacity(LEVEL_PROBE_COUNT);
    for k in 0..LEVEL_PROBE_COUNT {
        let a = std::f64::consts::TAU * k as f64 / LEVEL_PROBE_COUNT as f64;
        let p = f.e3 + LEVEL_PROBE_RADIUS * (a.cos() * f.e1 + a.sin() * f.e2);
        let dh = model.hamiltonian(&(p.normalize() * norm)) - h0;
        if dh.abs() > floor {
            signs.push(dh > 0.0);
        }
    }
    let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    if signs.is_empty() || changes > 0 {
        Stability::Saddle
    } else {
        Stability::Focus
    }
}

/// `(foci, saddles)` among the given points.
pub fn count_stability(points: &[StationaryPoint]) -> (usize, usize) {
    let foci = points.iter().filter(|p| p.stability == Stability::Focus).count();
    (foci, points.len() - foci)
}

/// Residual of the averaged field at a point, used in checks.
pub fn stationary_residual(l0: &Real3, eps: &EpsilonTriple) -> f64 {
    averaged_rhs(l0, eps).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eps(a: f64, b: f64, c: f64) -> EpsilonTriple {
        EpsilonTriple::new(a, b, c).unwrap()
    }

    fn families(points: &[StationaryPoint]) -> Vec<Family> {
        points.iter().map(|p| p.family).collect()
    }

    #[test]
    fn reference_counts() {
        use Family::*;
        let p = enumerate_stationary(&eps(0.02, 0.03, 0.04)).unwrap();
        assert_eq!(families(&p), [S1a, S1b, S1c, S2a, S2a, S2b, S2b, S2c, S2c, S3, S3, S3, S3]);
        assert_eq!(count_stability(&p), (7, 6));
        let p = enumerate_stationary(&eps(0.01, 0.03, 0.04)).unwrap();
        assert_eq!(p.len(), 9);
        assert_eq!(count_stability(&p), (5, 4));
        let p = enumerate_stationary(&eps(-0.02, 0.03, 0.04)).unwrap();
        assert_eq!(count_stability(&p), (3, 2));
        let p = enumerate_stationary(&eps(-0.01, 0.0, 0.01)).unwrap();
        assert_eq!(families(&p), [S1a, S1b, S1c]);
        assert_eq!(count_stability(&p), (2, 1));
        assert_eq!(p[1].stability, Stability::Saddle);
    }

    #[test]
    fn s2a_location() {
        let p = enumerate_stationary(&eps(0.02, 0.03, 0.04)).unwrap();
        let s2a: Vec<_> = p.iter().filter(|p| p.family == Family::S2a).collect();
        let (a, b) = ((3.0_f64 / 7.0).sqrt(), (4.0_f64 / 7.0).sqrt());
        assert!((s2a[0].l0 - Real3::new(0.0, a, b)).norm() < 1e-15);
        assert!((s2a[1].l0 - Real3::new(0.0, -a, b)).norm() < 1e-15);
        assert_eq!(s2a[0].stability, Stability::Saddle);
    }

    #[test]
    fn all_zero_is_rejected() {
        assert_eq!(enumerate_stationary(&eps(0.0, 0.0, 0.0)), Err(Error::DegenerateEpsilon));
    }

    #[test]
    fn restricted_jacobian_examples() {
        let e = eps(0.02, 0.03, 0.04);
        let j = jacobian_restricted(&Real3::z(), &e).unwrap();
        let ev = eigenvalues(&j);
        assert!(ev[0][0].abs() <= 1e-9 * ev[0][1].abs() && ev[0][1] != 0.0);
        // closed form at the pole: lambda^2 = -(9/16) e1 e2
        assert!((ev[0][1].abs() - (9.0 / 16.0 * 0.0006_f64).sqrt()).abs() < 1e-15);
        let s2a = Real3::new(0.0, (3.0_f64 / 7.0).sqrt(), (4.0_f64 / 7.0).sqrt());
        let ev = eigenvalues(&jacobian_restricted(&s2a, &e).unwrap());
        assert!(ev[0][1] == 0.0 && ev[0][0] > 0.0 && (ev[0][0] + ev[1][0]).abs() < 1e-12);
        for p in enumerate_stationary(&e).unwrap() {
            assert!(jacobian_restricted(&p.l0, &e).unwrap().trace().abs() <= 1e-10);
        }
        assert!(matches!(
            jacobian_restricted(&Real3::new(0.3, 0.4, 0.5).normalize(), &e),
            Err(Error::NotStationary { .. })
        ));
    }

    #[test]
    fn stability_examples() {
        let e = eps(0.02, 0.03, 0.04);
        let pts = enumerate_stationary(&e).unwrap();
        for m in [StabilityMethod::Inequality, StabilityMethod::Spectrum] {
            assert_eq!(classify_stability(&pts[0], &e, m).unwrap(), Stability::Focus);
            for p in pts.iter().filter(|p| p.family == Family::S3) {
                assert_eq!(classify_stability(p, &e, m).unwrap(), Stability::Focus);
            }
        }
        let e = eps(-0.02, 0.03, 0.04);
        let pts = enumerate_stationary(&e).unwrap();
        for m in [StabilityMethod::Inequality, StabilityMethod::Spectrum] {
            assert_eq!(classify_stability(&pts[0], &e, m).unwrap(), Stability::Saddle);
        }
        let ev = pts[0].eigen;
        assert!(ev[0][0] > 0.0 && ev[1][0] < 0.0 && ev[0][1] == 0.0);
    }

    #[test]
    fn marginal_cases_are_reported() {
        let e = eps(-0.01, 0.0, 0.01);
        let pts = enumerate_stationary(&e).unwrap();
        for m in [StabilityMethod::Inequality, StabilityMethod::Spectrum] {
            assert!(matches!(classify_stability(&pts[0], &e, m), Err(Error::Marginal { .. })));
        }
        // the energy test settles them: H has an extremum at both poles
        assert_eq!(pts[0].stability, Stability::Focus);
        assert_eq!(pts[2].stability, Stability::Focus);
    }

    #[test]
    fn energy_level_agrees_with_spectrum_when_nondegenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let e = eps(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let model = AveragedModel::quartic(e);
            for p in enumerate_stationary(&e).unwrap() {
                let jr = restricted(&model, &p.l0).unwrap();
                let scale = model.rate_scale(1.0);
                if (jr.determinant() / (scale * scale)).abs() > 1e-3 {
                    assert_eq!(classify_by_energy_level(&model, &p.l0), p.stability, "{e:?} {p:?}");
                }
            }
        }
    }

    #[test]
    fn points_are_stationary_and_antipodally_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let e = eps(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            for p in enumerate_stationary(&e).unwrap() {
                assert!(stationary_residual(&p.l0, &e) <= 1e-12);
                assert!(stationary_residual(&(-p.l0), &e) <= 1e-12);
                assert!((p.l0.norm() - 1.0).abs() < 1e-15);
                assert_eq!(canonical_representative(&p.l0), p.l0);
            }
        }
    }

    #[test]
    fn euler_top_axes() {
        let model = AveragedModel::Quadratic { kappa: [1.0 / 1.0201, 1.0 / 1.0404, 1.0 / 1.0609] };
        let pts = enumerate_for_model(&model).unwrap();
        let st: Vec<_> = pts.iter().map(|p| p.stability).collect();
        assert_eq!(st, [Stability::Focus, Stability::Saddle, Stability::Focus]);
        let (u, s) = saddle_directions(&model, &Real3::y()).unwrap();
        assert!(u.dot(&Real3::y()).abs() < 1e-15 && s.dot(&Real3::y()).abs() < 1e-15);
        let j = model.jacobian(&Real3::y());
        let ju = j * u;
        assert!((ju - u * ju.dot(&u)).norm() < 1e-12 && ju.dot(&u) > 0.0);
    }

    #[test]
    fn canonical_representative_rules() {
        assert_eq!(canonical_representative(&Real3::new(0.0, 0.0, -1.0)), Real3::z());
        assert_eq!(canonical_representative(&Real3::new(0.5, -0.5, 0.0)), Real3::new(-0.5, 0.5, 0.0));
        assert_eq!(canonical_representative(&Real3::new(-1.0, 0.0, 0.0)), Real3::x());
    }
}
