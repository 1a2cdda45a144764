//! Exact geodesic loop normals against the averaged momentum flow.

use geocoil::averaged::{integrate_averaged, AveragedModel};
use geocoil::geodesic::{angular_momentum, integrate_geodesic, loop_normals, PhaseState, Trajectory};
use geocoil::separatrix::{quotient_antipodal, trace_separatrices, TraceOptions};
use geocoil::{AveragedTrajectory, Error, Real3, Result, SurfaceSpec};
use serde::{Deserialize, Serialize};

/// Largest deformation for which the comparison is meaningful.
pub const MAX_EPS: f64 = 0.1;
pub const DEFAULT_HORIZON: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub t_mid: f64,
    pub exact_normal: [f64; 3],
    pub averaged_l_hat: [f64; 3],
    /// Angle in radians, in `[0, pi]`.
    pub angle_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub max_angle_error: f64,
    pub horizon: f64,
    pub eps_scale: f64,
    pub loops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub records: Vec<LoopRecord>,
    pub summary: ComparisonSummary,
}

pub struct Comparison {
    pub report: ComparisonReport,
    pub exact: Trajectory,
    pub averaged: AveragedTrajectory,
}

/// Angle between two nonzero vectors.
pub fn angle_between(a: &Real3, b: &Real3) -> f64 {
    let c = a.normalize().dot(&b.normalize()).clamp(-1.0, 1.0);
    // atan2 form stays accurate for nearly parallel vectors
    let s = a.normalize().cross(&b.normalize()).norm();
    s.atan2(c)
}

/// Integrates the geodesic from `init` for `horizon`, splits it into loops,
/// and compares each loop normal with the averaged flow started from the
/// initial angular momentum, matched at the loop midpoint time.
pub fn compare(surface: &SurfaceSpec, init: &PhaseState, horizon: f64, tol: f64) -> Result<Comparison> {
    compare_from(surface, init, None, horizon, tol)
}

/// Like [`compare`], with the averaged flow optionally started from `l_start`
/// instead of the initial angular momentum.
fn compare_from(
    surface: &SurfaceSpec,
    init: &PhaseState,
    l_start: Option<Real3>,
    horizon: f64,
    tol: f64,
) -> Result<Comparison> {
    let SurfaceSpec::Quartic { eps } = surface else {
        return Err(Error::VariantMismatch);
    };
    if eps.max_abs() > MAX_EPS {
        return Err(Error::InvalidInput(format!("comparison needs max |eps| <= {MAX_EPS}")));
    }
    let exact = integrate_geodesic(surface, init, horizon, tol)?;
    let start = PhaseState { t: 0.0, ..*exact.samples.first().expect("nonempty") };
    let loops = loop_normals(&exact)?;
    let model = AveragedModel::for_surface(surface);
    let l0 = l_start.unwrap_or_else(|| angular_momentum(&start));
    let averaged = integrate_averaged(&model, &l0, horizon, tol)?;
    let t0 = init.t;
    let records: Vec<LoopRecord> = loops
        .iter()
        .map(|lp| {
            let l_hat = averaged.interpolate(lp.t_mid - t0).normalize();
            LoopRecord {
                t_mid: lp.t_mid,
                exact_normal: lp.normal.into(),
                averaged_l_hat: l_hat.into(),
                angle_error: angle_between(&lp.normal, &l_hat),
            }
        })
        .collect();
    let max_angle_error = records.iter().map(|r| r.angle_error).fold(0.0, f64::max);
    let summary = ComparisonSummary { max_angle_error, horizon, eps_scale: eps.max_abs(), loops: records.len() };
    Ok(Comparison { report: ComparisonReport { records, summary }, exact, averaged })
}

/// The same comparison run backwards: the geodesic restarts from the
/// time-reversed end of a forward run and the averaged flow from the
/// reflected end of the forward averaged run. The field is even in `L`, so
/// both sides retrace their forward paths and the errors should agree.
pub fn compare_reversed(surface: &SurfaceSpec, init: &PhaseState, horizon: f64, tol: f64) -> Result<Comparison> {
    let forward = compare(surface, init, horizon, tol)?;
    let mut back = forward.exact.reversed_final_state();
    back.t = 0.0;
    let l_end = -forward.averaged.final_point();
    compare_from(surface, &back, Some(l_end), horizon, tol)
}

/// Largest angle between a loop normal of the geodesic from `init` and the
/// nearest separatrix of the averaged net for the same surface.
pub fn tube_distance(surface: &SurfaceSpec, init: &PhaseState, horizon: f64, tol: f64) -> Result<f64> {
    let exact = integrate_geodesic(surface, init, horizon, tol)?;
    let loops = loop_normals(&exact)?;
    let model = AveragedModel::for_surface(surface);
    let l_norm = angular_momentum(init).norm();
    let net = quotient_antipodal(&trace_separatrices(&model, l_norm, &TraceOptions::default())?)?;
    Ok(loops.iter().map(|lp| net.angular_distance_to_edges(&lp.normal)).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use geocoil::EpsilonTriple;

    #[test]
    fn angle_examples() {
        assert_eq!(angle_between(&Real3::x(), &Real3::x()), 0.0);
        assert!((angle_between(&Real3::x(), &-Real3::x()) - std::f64::consts::PI).abs() < 1e-15);
        assert!((angle_between(&Real3::x(), &Real3::y()) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn undeformed_sphere_agrees_exactly() {
        let s = SurfaceSpec::quartic(EpsilonTriple::new(0.0, 0.0, 0.0).unwrap());
        let init = PhaseState::on_surface(&s, Real3::new(0.3, 0.5, 0.8), Real3::new(0.9, -0.2, 0.1), 0.0).unwrap();
        let c = compare(&s, &init, 60.0, 1e-10).unwrap();
        assert!(c.report.summary.max_angle_error <= 1e-6);
        assert!(c.report.summary.loops >= 3);
    }

    #[test]
    fn rejects_large_or_wrong_surfaces() {
        let init = PhaseState::new(Real3::x(), Real3::y(), 0.0);
        let big = SurfaceSpec::quartic(EpsilonTriple::new(0.2, 0.0, 0.0).unwrap());
        assert!(matches!(compare(&big, &init, 10.0, 1e-10), Err(Error::InvalidInput(_))));
        let ell = SurfaceSpec::ellipsoid(1.01, 1.02, 1.03).unwrap();
        assert_eq!(compare(&ell, &init, 10.0, 1e-10).err(), Some(Error::VariantMismatch));
    }
}
