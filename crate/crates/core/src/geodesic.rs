//! Exact geodesic flow on an implicit surface and the angular-momentum signal
//! extracted from it.
//!
//! The equation of motion of a free unit-mass particle constrained to
//! `phi(x) = 0`, with the Lagrange multiplier eliminated, is
//!
//! ```text
//! x'' = -(x' . Hess(phi) . x') / |grad phi|^2 * grad phi
//! ```
//!
//! and is integrated as a first-order system in `(x, v)` with the state pulled
//! back onto the surface (and the speed restored) after every accepted step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Dopri5Options, StepAction};
use crate::surface::SurfaceSpec;
use crate::Real3;

pub const MIN_TOL: f64 = 1e-14;
pub const MAX_TOL: f64 = 1e-4;
const SECTION_ANGLES: usize = 180;

/// Position and tangent velocity on the surface at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub x: Real3,
    pub v: Real3,
    pub t: f64,
}

impl PhaseState {
    pub fn new(x: Real3, v: Real3, t: f64) -> Self {
        Self { x, v, t }
    }

    /// Repairs approximate initial data: `x` is projected onto the surface and
    /// `v` onto the tangent plane there. The speed of the input is kept.
    pub fn on_surface(s: &SurfaceSpec, x: Real3, v: Real3, t: f64) -> Result<Self> {
        let speed = v.norm();
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::InvalidInput("initial velocity must be nonzero".into()));
        }
        let x = s.project_to_surface(&x)?;
        let w = s.project_velocity(&x, &v)?;
        if w.norm() == 0.0 {
            return Err(Error::InvalidInput("initial velocity is normal to the surface".into()));
        }
        Ok(Self { x, v: w * (speed / w.norm()), t })
    }

    /// Checks the on-surface and tangency invariants.
    pub fn validate(&self, s: &SurfaceSpec) -> Result<()> {
        let phi = s.phi(&self.x);
        if phi.abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("state is off the surface (phi = {phi:e})")));
        }
        let g = s.grad_phi(&self.x);
        let speed = self.v.norm();
        if speed.is_nan() || speed <= 0.0 {
            return Err(Error::InvalidInput("velocity must be nonzero".into()));
        }
        if self.v.dot(&g).abs() > 1e-9 * speed * g.norm() {
            return Err(Error::InvalidInput("velocity is not tangent to the surface".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryStats {
    /// Max of `|phi|` over the stored samples.
    pub max_constraint_drift: f64,
    /// Max of `| |v|^2 - |v0|^2 | / |v0|^2` over the stored samples.
    pub max_energy_drift: f64,
    /// Largest `|phi|` seen right before a repair, i.e. the raw integrator drift.
    pub max_unrepaired_constraint: f64,
    /// Largest relative speed-squared defect right before a repair.
    pub max_unrepaired_energy: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub surface: SurfaceSpec,
    pub samples: Vec<PhaseState>,
    pub stats: TrajectoryStats,
}

/// One loop of a coil: the normalized mean angular momentum between two
/// successive upward crossings of the section plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopNormal {
    pub t_start: f64,
    pub t_end: f64,
    pub t_mid: f64,
    pub normal: Real3,
}

/// Returns `(x', v')` of the constrained geodesic equation.
pub fn geodesic_rhs(s: &SurfaceSpec, state: &PhaseState) -> Result<(Real3, Real3)> {
    let g = s.grad_phi(&state.x);
    let g2 = g.norm_squared();
    if g2.sqrt() < 1e-12 {
        return Err(Error::DegenerateGradient { norm: g2.sqrt() });
    }
    let curvature = s.hess_phi(&state.x).quadratic_form(&state.v);
    Ok((state.v, g * (-curvature / g2)))
}

/// `L = x × v` (unit mass).
pub fn angular_momentum(state: &PhaseState) -> Real3 {
    state.x.cross(&state.v)
}

/// Exact evolution of the angular momentum on the quartic sphere:
/// `L' = x × x''`, written out component-wise.
pub fn momentum_rhs_exact(s: &SurfaceSpec, state: &PhaseState) -> Result<Real3> {
    let eps = match s {
        SurfaceSpec::Quartic { eps } => eps.as_array(),
        SurfaceSpec::Ellipsoid { .. } => return Err(Error::VariantMismatch),
    };
    let x = &state.x;
    let v = &state.v;
    let num: f64 = (0..3).map(|j| (2.0 + 12.0 * eps[j] * x[j] * x[j]) * v[j] * v[j]).sum();
    let den: f64 = (0..3).map(|j| (2.0 * x[j] + 4.0 * eps[j] * x[j].powi(3)).powi(2)).sum();
    if den.sqrt() < 1e-12 {
        return Err(Error::DegenerateGradient { norm: den.sqrt() });
    }
    let k = -4.0 * num / den;
    let [e1, e2, e3] = eps;
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    Ok(Real3::new(
        k * x2 * x3 * (e3 * x3 * x3 - e2 * x2 * x2),
        k * x3 * x1 * (e1 * x1 * x1 - e3 * x3 * x3),
        k * x1 * x2 * (e2 * x2 * x2 - e1 * x1 * x1),
    ))
}

fn pack(x: &Real3, v: &Real3) -> [f64; 6] {
    [x[0], x[1], x[2], v[0], v[1], v[2]]
}

fn unpack(y: &[f64; 6]) -> (Real3, Real3) {
    (Real3::new(y[0], y[1], y[2]), Real3::new(y[3], y[4], y[5]))
}

/// Integrates the geodesic from `init` over `[init.t, init.t + t_end]`,
/// recording every accepted step.
pub fn integrate_geodesic(s: &SurfaceSpec, init: &PhaseState, t_end: f64, tol: f64) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(Error::InvalidInput(format!("tol {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]")));
    }
    init.validate(s)?;

    let speed0 = init.v.norm();
    let speed0_sq = speed0 * speed0;
    // keep several steps per loop so section crossings are resolved
    let opts = Dopri5Options::with_tol(tol).h_max(0.5 / speed0);
    let mut samples = vec![*init];
    let mut stats = TrajectoryStats { max_constraint_drift: s.phi(&init.x).abs(), ..TrajectoryStats::default() };

    let rhs = |t: f64, y: &[f64; 6]| {
        let (x, v) = unpack(y);
        let (dx, dv) = geodesic_rhs(s, &PhaseState::new(x, v, t))?;
        Ok(pack(&dx, &dv))
    };
    let out = ode::integrate(rhs, init.t, pack(&init.x, &init.v), init.t + t_end, &opts, |t, y| {
        let (x, v) = unpack(y);
        stats.max_unrepaired_constraint = stats.max_unrepaired_constraint.max(s.phi(&x).abs());
        stats.max_unrepaired_energy = stats.max_unrepaired_energy.max((v.norm_squared() - speed0_sq).abs() / speed0_sq);
        let x = s.project_to_surface(&x)?;
        let v = s.project_velocity(&x, &v)?;
        let v = v * (speed0 / v.norm());
        stats.max_constraint_drift = stats.max_constraint_drift.max(s.phi(&x).abs());
        stats.max_energy_drift = stats.max_energy_drift.max((v.norm_squared() - speed0_sq).abs() / speed0_sq);
        *y = pack(&x, &v);
        samples.push(PhaseState::new(x, v, t));
        Ok(StepAction::Continue)
    })?;
    stats.accepted_steps = out.accepted;
    stats.rejected_steps = out.rejected;
    Ok(Trajectory { surface: *s, samples, stats })
}

impl Trajectory {
    /// The same path run backwards: velocities flipped, starting at the
    /// final sample.
    pub fn reversed_final_state(&self) -> PhaseState {
        let last = self.samples.last().expect("trajectory has at least one sample");
        PhaseState::new(last.x, -last.v, 0.0)
    }

    pub fn final_state(&self) -> &PhaseState {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, tau: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + tau) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
}

fn hermite3(p0: &Real3, p1: &Real3, m0: &Real3, m1: &Real3, tau: f64) -> Real3 {
    Real3::from_fn(|i, _| hermite(p0[i], p1[i], m0[i], m1[i], tau))
}

fn hermite3_slope(p0: &Real3, p1: &Real3, m0: &Real3, m1: &Real3, tau: f64, h: f64) -> Real3 {
    let t2 = tau * tau;
    Real3::from_fn(|i, _| {
        ((6.0 * t2 - 6.0 * tau) * p0[i]
            + (3.0 * t2 - 4.0 * tau + 1.0) * m0[i]
            + (-6.0 * t2 + 6.0 * tau) * p1[i]
            + (3.0 * t2 - 2.0 * tau) * m1[i])
            / h
    })
}

/// `∫ L dt` over `[0, h]` for a cubic through `(l0, dl0)` and `(l1, dl1)`.
fn hermite_integral(l0: &Real3, l1: &Real3, dl0: &Real3, dl1: &Real3, h: f64) -> Real3 {
    (l0 + l1) * (h / 2.0) + (dl0 - dl1) * (h * h / 12.0)
}

/// Splits the trajectory into loops and returns each loop's normal.
///
/// The section is a plane through the origin containing the initial `L`
/// direction; within that pencil the plane is chosen to stay as far as
/// possible from the plane of motion over the whole run, so that every loop
/// crosses it transversally. Loops run between successive crossings where
/// `x · n` changes from negative to non-negative.
pub fn loop_normals(traj: &Trajectory) -> Result<Vec<LoopNormal>> {
    let samples = &traj.samples;
    if samples.len() < 2 {
        return Err(Error::TooShort { crossings: 0 });
    }
    let moments: Vec<Real3> = samples.iter().map(angular_momentum).collect();
    let rates = samples
        .iter()
        .map(|st| geodesic_rhs(&traj.surface, st).map(|(_, a)| st.x.cross(&a)))
        .collect::<Result<Vec<Real3>>>()?;

    let l0 = moments[0].normalize();
    let seed = if l0.x.abs() < 0.9 { Real3::x() } else { Real3::y() };
    let a = l0.cross(&seed).normalize();
    let b = l0.cross(&a);
    let directions: Vec<Real3> = moments.iter().map(|l| l.normalize()).collect();
    let section = (0..SECTION_ANGLES)
        .map(|k| {
            let th = std::f64::consts::PI * k as f64 / SECTION_ANGLES as f64;
            a * th.cos() + b * th.sin()
        })
        .map(|n| (directions.iter().map(|d| d.dot(&n).abs()).fold(0.0, f64::max), n))
        .min_by(|p, q| p.0.total_cmp(&q.0))
        .map(|(_, n)| n)
        .expect("at least one candidate plane");

    // (sample index i, tau in (0, 1]) of each upward crossing in [i, i+1]
    let mut crossings: Vec<(usize, f64)> = Vec::new();
    for i in 0..samples.len() - 1 {
        let (s0, s1) = (samples[i].x.dot(&section), samples[i + 1].x.dot(&section));
        if s0 < 0.0 && s1 >= 0.0 {
            let h = samples[i + 1].t - samples[i].t;
            let (m0, m1) = (h * samples[i].v.dot(&section), h * samples[i + 1].v.dot(&section));
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if hermite(s0, s1, m0, m1, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push((i, hi));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::TooShort { crossings: crossings.len() });
    }

    let at = |i: usize, tau: f64| {
        let h = samples[i + 1].t - samples[i].t;
        let (m0, m1) = (rates[i] * h, rates[i + 1] * h);
        let l = hermite3(&moments[i], &moments[i + 1], &m0, &m1, tau);
        let dl = hermite3_slope(&moments[i], &moments[i + 1], &m0, &m1, tau, h);
        (samples[i].t + tau * h, l, dl)
    };

    let mut loops = Vec::with_capacity(crossings.len() - 1);
    for pair in crossings.windows(2) {
        let (i0, tau0) = pair[0];
        let (i1, tau1) = pair[1];
        let (ta, la, dla) = at(i0, tau0);
        let (tb, lb, dlb) = at(i1, tau1);
        let mut total = hermite_integral(&la, &moments[i0 + 1], &dla, &rates[i0 + 1], samples[i0 + 1].t - ta);
        for j in i0 + 1..i1 {
            total += hermite_integral(
                &moments[j],
                &moments[j + 1],
                &rates[j],
                &rates[j + 1],
                samples[j + 1].t - samples[j].t,
            );
        }
        total += hermite_integral(&moments[i1], &lb, &rates[i1], &dlb, tb - samples[i1].t);
        loops.push(LoopNormal { t_start: ta, t_end: tb, t_mid: 0.5 * (ta + tb), normal: total.normalize() });
    }
    Ok(loops)
}
