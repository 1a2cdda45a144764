//! The averaged angular-momentum system.
//!
//! To first order in the deformation a geodesic is a great circle
//! `x = cos(psi) e1 + sin(psi) e2` whose normal `L` drifts slowly. Averaging
//! the exact momentum equation over the fast phase `psi` gives, for the
//! quartic sphere,
//!
//! ```text
//! L1' = 3/4 L2 L3 / L^2 [ (e3 - e2) L1^2 + e3 L2^2 - e2 L3^2 ]
//! L2' = 3/4 L3 L1 / L^2 [ -e3 L1^2 + (e1 - e3) L2^2 + e1 L3^2 ]
//! L3' = 3/4 L1 L2 / L^2 [ e2 L1^2 - e1 L2^2 + (e2 - e1) L3^2 ]
//! ```
//!
//! which is Hamiltonian for the angular-momentum Poisson bracket with
//! `H = 3/16 L^2 sum_i e_i ((L_i / L)^2 - 1)^2`, written as `L' = grad H × L`.
//! Both `|L|^2` (the Casimir) and `H` are conserved.
//!
//! An ellipsoid with semi-axes `a_i` averages to the Euler-top field
//! `L' = 1/2 ((k3 - k2) L2 L3, (k1 - k3) L3 L1, (k2 - k1) L1 L2)` with
//! `k_i = 1 / a_i^2` and `H = -1/4 sum_i k_i L_i^2`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Dopri5Options, StepAction};
use crate::surface::{EpsilonTriple, SurfaceSpec};
use crate::Real3;

const POLE_TOL: f64 = 1e-20;
/// Quadrature nodes for the phase average; the integrand is a trigonometric
/// polynomial of degree 4, so the trapezoidal rule is exact well below this.
pub const PHASE_NODES: usize = 1024;

/// Orthonormal right-handed frame with `e3 = L / |L|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Real3,
    pub e2: Real3,
    pub e3: Real3,
}

impl Frame {
    /// Like [`frame_vectors`] but usable on the whole sphere: near the
    /// `L1` axis the coordinates are permuted cyclically, the frame is built
    /// there, and the vectors are permuted back.
    pub fn with_fallback(l: &Real3) -> Result<Self> {
        match frame_vectors(l) {
            Err(Error::FramePole(_)) => {
                let forward = |w: &Real3| Real3::new(w[1], w[2], w[0]);
                let back = |w: &Real3| Real3::new(w[2], w[0], w[1]);
                let f = frame_vectors(&forward(l))?;
                Ok(Frame { e1: back(&f.e1), e2: back(&f.e2), e3: back(&f.e3) })
            }
            other => other,
        }
    }

    /// Unit position on the great circle at phase `psi`.
    pub fn position(&self, psi: f64) -> Real3 {
        self.e1 * psi.cos() + self.e2 * psi.sin()
    }
}

/// The frame of the unperturbed great circle with normal `L`.
pub fn frame_vectors(l: &Real3) -> Result<Frame> {
    let (l1, l2, l3) = (l[0], l[1], l[2]);
    let s = l2 * l2 + l3 * l3;
    let norm = l.norm();
    if (norm.is_nan() || norm <= 0.0) || s <= POLE_TOL {
        return Err(Error::FramePole([l1, l2, l3]));
    }
    let rs = s.sqrt();
    Ok(Frame { e1: Real3::new(0.0, l3, -l2) / rs, e2: Real3::new(-s, l1 * l2, l1 * l3) / (norm * rs), e3: l / norm })
}

/// Right-hand side of the averaged system on the quartic sphere.
pub fn averaged_rhs(l: &Real3, eps: &EpsilonTriple) -> Real3 {
    let [e1, e2, e3] = eps.as_array();
    let (l1, l2, l3) = (l[0], l[1], l[2]);
    let (s1, s2, s3) = (l1 * l1, l2 * l2, l3 * l3);
    let c = 0.75 / (s1 + s2 + s3);
    Real3::new(
        c * l2 * l3 * ((e3 - e2) * s1 + e3 * s2 - e2 * s3),
        c * l3 * l1 * (-e3 * s1 + (e1 - e3) * s2 + e1 * s3),
        c * l1 * l2 * (e2 * s1 - e1 * s2 + (e2 - e1) * s3),
    )
}

/// Jacobian of [`averaged_rhs`] with respect to `L`.
pub fn averaged_jacobian(l: &Real3, eps: &EpsilonTriple) -> Matrix3<f64> {
    let [e1, e2, e3] = eps.as_array();
    let (l1, l2, l3) = (l[0], l[1], l[2]);
    let (s1, s2, s3) = (l1 * l1, l2 * l2, l3 * l3);
    let n = s1 + s2 + s3;
    let q1 = (e3 - e2) * s1 + e3 * s2 - e2 * s3;
    let q2 = -e3 * s1 + (e1 - e3) * s2 + e1 * s3;
    let q3 = e2 * s1 - e1 * s2 + (e2 - e1) * s3;
    let g = [l2 * l3 * q1, l3 * l1 * q2, l1 * l2 * q3];
    let dg = [
        [2.0 * (e3 - e2) * l1 * l2 * l3, l3 * q1 + 2.0 * e3 * s2 * l3, l2 * q1 - 2.0 * e2 * l2 * s3],
        [l3 * q2 - 2.0 * e3 * s1 * l3, 2.0 * (e1 - e3) * l1 * l2 * l3, l1 * q2 + 2.0 * e1 * l1 * s3],
        [l2 * q3 + 2.0 * e2 * s1 * l2, l1 * q3 - 2.0 * e1 * l1 * s2, 2.0 * (e2 - e1) * l1 * l2 * l3],
    ];
    Matrix3::from_fn(|i, j| 0.75 * (dg[i][j] / n - 2.0 * g[i] * l[j] / (n * n)))
}

/// The conserved energy of the averaged system.
pub fn hamiltonian(l: &Real3, eps: &EpsilonTriple) -> f64 {
    let n = l.norm_squared();
    let sum: f64 = (0..3).map(|i| eps.get(i) * (l[i] * l[i] / n - 1.0).powi(2)).sum();
    3.0 / 16.0 * n * sum
}

/// First-order momentum rate along the unperturbed great circle at phase
/// `psi`, in an arbitrary frame for `L`.
pub fn oscillatory_rhs_in_frame(frame: &Frame, l_norm: f64, eps: &EpsilonTriple, psi: f64) -> Real3 {
    let [e1, e2, e3] = eps.as_array();
    let x = frame.position(psi);
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let c = 2.0 * l_norm * l_norm;
    Real3::new(
        c * (e2 * x2.powi(3) * x3 - e3 * x3.powi(3) * x2),
        c * (e3 * x3.powi(3) * x1 - e1 * x1.powi(3) * x3),
        c * (e1 * x1.powi(3) * x2 - e2 * x2.powi(3) * x1),
    )
}

/// Oscillatory right-hand side before averaging, with `omega t + theta`
/// replaced by `phase_angle`, in the frame of [`frame_vectors`].
pub fn oscillatory_rhs(l: &Real3, eps: &EpsilonTriple, phase_angle: f64) -> Result<Real3> {
    let frame = frame_vectors(l)?;
    Ok(oscillatory_rhs_in_frame(&frame, l.norm(), eps, phase_angle))
}

/// Mean of [`oscillatory_rhs`] over one period of the phase.
pub fn average_over_phase(l: &Real3, eps: &EpsilonTriple) -> Result<Real3> {
    let frame = frame_vectors(l)?;
    let norm = l.norm();
    let step = std::f64::consts::TAU / PHASE_NODES as f64;
    let sum = (0..PHASE_NODES)
        .map(|k| oscillatory_rhs_in_frame(&frame, norm, eps, k as f64 * step))
        .fold(Real3::zeros(), |acc, v| acc + v);
    Ok(sum / PHASE_NODES as f64)
}

/// Averaged dynamics for either surface family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AveragedModel {
    Quartic {
        eps: EpsilonTriple,
    },
    /// Euler-top field of an ellipsoid, `kappa_i = 1 / a_i^2`.
    Quadratic {
        kappa: [f64; 3],
    },
}

impl AveragedModel {
    pub fn quartic(eps: EpsilonTriple) -> Self {
        AveragedModel::Quartic { eps }
    }

    pub fn for_surface(s: &SurfaceSpec) -> Self {
        match *s {
            SurfaceSpec::Quartic { eps } => AveragedModel::Quartic { eps },
            SurfaceSpec::Ellipsoid { axes } => AveragedModel::Quadratic { kappa: axes.map(|a| 1.0 / (a * a)) },
        }
    }

    pub fn eps(&self) -> Option<EpsilonTriple> {
        match self {
            AveragedModel::Quartic { eps } => Some(*eps),
            AveragedModel::Quadratic { .. } => None,
        }
    }

    pub fn rhs(&self, l: &Real3) -> Real3 {
        match self {
            AveragedModel::Quartic { eps } => averaged_rhs(l, eps),
            AveragedModel::Quadratic { kappa: k } => {
                0.5 * Real3::new((k[2] - k[1]) * l[1] * l[2], (k[0] - k[2]) * l[2] * l[0], (k[1] - k[0]) * l[0] * l[1])
            }
        }
    }

    pub fn jacobian(&self, l: &Real3) -> Matrix3<f64> {
        match self {
            AveragedModel::Quartic { eps } => averaged_jacobian(l, eps),
            AveragedModel::Quadratic { kappa: k } => {
                let (a, b, c) = (0.5 * (k[2] - k[1]), 0.5 * (k[0] - k[2]), 0.5 * (k[1] - k[0]));
                Matrix3::new(0.0, a * l[2], a * l[1], b * l[2], 0.0, b * l[0], c * l[1], c * l[0], 0.0)
            }
        }
    }

    pub fn hamiltonian(&self, l: &Real3) -> f64 {
        match self {
            AveragedModel::Quartic { eps } => hamiltonian(l, eps),
            AveragedModel::Quadratic { kappa } => -0.25 * (0..3).map(|i| kappa[i] * l[i] * l[i]).sum::<f64>(),
        }
    }

    /// Typical angular rate of `L / |L|` on the sphere of radius `l_norm`.
    pub fn rate_scale(&self, l_norm: f64) -> f64 {
        let spread = match self {
            AveragedModel::Quartic { eps } => eps.max_abs(),
            AveragedModel::Quadratic { kappa } => {
                let hi = kappa.iter().cloned().fold(f64::MIN, f64::max);
                let lo = kappa.iter().cloned().fold(f64::MAX, f64::min);
                0.5 * (hi - lo)
            }
        };
        spread * l_norm
    }

    /// Magnitude used to turn energy drift into a relative number.
    pub fn energy_scale(&self, l_norm: f64) -> f64 {
        match self {
            AveragedModel::Quartic { eps } => 3.0 / 16.0 * l_norm * l_norm * eps.max_abs(),
            AveragedModel::Quadratic { .. } => self.rate_scale(l_norm) * l_norm,
        }
    }

    /// `|H(l) - H(l0)|` relative to `max(|H(l0)|, energy_scale)`.
    pub fn relative_energy_drift(&self, l0: &Real3, l: &Real3) -> f64 {
        let h0 = self.hamiltonian(l0);
        (self.hamiltonian(l) - h0).abs() / h0.abs().max(self.energy_scale(l0.norm()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AveragedStats {
    /// Largest per-step relative `|L|^2` defect before renormalization.
    pub max_casimir_step_drift: f64,
    /// Largest relative `|L|^2` deviation of the stored samples.
    pub max_casimir_drift: f64,
    pub max_hamiltonian_drift: f64,
    pub accepted_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedTrajectory {
    pub model: AveragedModel,
    /// `(t, L)`; times decrease for a backward run.
    pub samples: Vec<(f64, Real3)>,
    pub stats: AveragedStats,
}

impl AveragedTrajectory {
    /// Linear interpolation of `L` at time `t` (clamped to the sampled span).
    pub fn interpolate(&self, t: f64) -> Real3 {
        let s = &self.samples;
        let sign = if s.len() > 1 && s[1].0 < s[0].0 { -1.0 } else { 1.0 };
        let key = |u: f64| sign * u;
        let k = s.partition_point(|(ts, _)| key(*ts) <= key(t));
        if k == 0 {
            return s[0].1;
        }
        if k == s.len() {
            return s[s.len() - 1].1;
        }
        let (t0, l0) = s[k - 1];
        let (t1, l1) = s[k];
        let w = (t - t0) / (t1 - t0);
        l0 * (1.0 - w) + l1 * w
    }

    pub fn final_point(&self) -> Real3 {
        self.samples.last().expect("nonempty").1
    }
}

fn check_start(l0: &Real3, t_end: f64) -> Result<f64> {
    let norm = l0.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::InvalidInput("initial angular momentum must be nonzero".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    Ok(norm)
}

fn drive<H>(
    model: &AveragedModel,
    l0: &Real3,
    t_end: f64,
    tol: f64,
    dir: Direction,
    h_max: f64,
    mut visit: H,
) -> Result<AveragedTrajectory>
where
    H: FnMut(f64, &Real3) -> StepAction,
{
    let norm = check_start(l0, t_end)?;
    let sign = match dir {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let n2 = norm * norm;
    let opts = Dopri5Options::with_tol(tol).h_max(h_max);
    let mut samples = vec![(0.0, *l0)];
    let mut stats = AveragedStats::default();
    let rhs = |_t: f64, y: &[f64; 3]| Ok((model.rhs(&Real3::from(*y)) * sign).into());
    let out = ode::integrate(rhs, 0.0, (*l0).into(), t_end, &opts, |tau, y| {
        let raw = Real3::from(*y);
        stats.max_casimir_step_drift = stats.max_casimir_step_drift.max((raw.norm_squared() - n2).abs() / n2);
        let l = raw * (norm / raw.norm());
        stats.max_casimir_drift = stats.max_casimir_drift.max((l.norm_squared() - n2).abs() / n2);
        stats.max_hamiltonian_drift = stats.max_hamiltonian_drift.max(model.relative_energy_drift(l0, &l));
        *y = l.into();
        samples.push((sign * tau, l));
        Ok(visit(sign * tau, &l))
    })?;
    stats.accepted_steps = out.accepted;
    Ok(AveragedTrajectory { model: *model, samples, stats })
}

/// Integrates the averaged system, renormalizing `|L|` after every step.
pub fn integrate_averaged(model: &AveragedModel, l0: &Real3, t_end: f64, tol: f64) -> Result<AveragedTrajectory> {
    integrate_averaged_dir(model, l0, t_end, tol, Direction::Forward)
}

pub fn integrate_averaged_dir(
    model: &AveragedModel,
    l0: &Real3,
    t_end: f64,
    tol: f64,
    dir: Direction,
) -> Result<AveragedTrajectory> {
    drive(model, l0, t_end, tol, dir, f64::INFINITY, |_, _| StepAction::Continue)
}

/// Runs forward until `on_step` asks to stop or `t_max` is reached.
pub fn integrate_averaged_until<H>(
    model: &AveragedModel,
    l0: &Real3,
    t_max: f64,
    tol: f64,
    dir: Direction,
    h_max: f64,
    on_step: H,
) -> Result<AveragedTrajectory>
where
    H: FnMut(f64, &Real3) -> StepAction,
{
    drive(model, l0, t_max, tol, dir, h_max, on_step)
}

/// First return of the orbit through `l0` to the section plane spanned by
/// `l0` and the origin, transverse to the flow. Returns `(period, L)`.
pub fn first_return(model: &AveragedModel, l0: &Real3, tol: f64, t_max: f64) -> Result<(f64, Real3)> {
    let f0 = model.rhs(l0);
    if f0.norm() <= 1e-14 * model.rate_scale(l0.norm()).max(1e-300) * l0.norm() {
        return Err(Error::InvalidInput("starting point is stationary".into()));
    }
    let n = f0.normalize();
    let capture = 1e-3 * l0.norm();
    let mut prev: Option<(f64, Real3)> = None;
    let mut hit: Option<(f64, Real3)> = None;
    integrate_averaged_until(model, l0, t_max, tol, Direction::Forward, f64::INFINITY, |t, l| {
        if let Some((tp, lp)) = prev {
            let (s0, s1) = (lp.dot(&n), l.dot(&n));
            if s0 < 0.0 && s1 >= 0.0 && (l - l0).norm() < capture {
                let h = t - tp;
                let (m0, m1) = (model.rhs(&lp) * h, model.rhs(l) * h);
                let cubic = |tau: f64| {
                    let t2 = tau * tau;
                    let t3 = t2 * tau;
                    lp * (2.0 * t3 - 3.0 * t2 + 1.0)
                        + m0 * (t3 - 2.0 * t2 + tau)
                        + l * (-2.0 * t3 + 3.0 * t2)
                        + m1 * (t3 - t2)
                };
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if cubic(mid).dot(&n) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hit = Some((tp + hi * h, cubic(hi)));
                return StepAction::Stop;
            }
        }
        prev = Some((t, *l));
        StepAction::Continue
    })?;
    hit.ok_or_else(|| Error::InvalidInput(format!("no return to the section within t = {t_max}")))
}
