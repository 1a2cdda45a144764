//! Embedded Dormand-Prince 5(4) integrator for small fixed-size systems.
//!
//! Each accepted step is handed to a caller hook that may repair the state in
//! place (manifold projection) or stop the integration early.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Steps smaller than this are reported as [`Error::StepFailure`].
    pub h_min: f64,
    pub max_steps: usize,
}

impl Dopri5Options {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }

    pub fn h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-10, h_max: f64::INFINITY, h_min: 1e-12, max_steps: 10_000_000 }
    }
}

/// What to do after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// True when the hook stopped the run before `t_end`.
    pub stopped: bool,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn scaled_norm<const N: usize>(v: &[f64; N], y: &[f64; N], y_new: &[f64; N], opts: &Dopri5Options) -> f64 {
    let sum: f64 = (0..N)
        .map(|i| {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            (v[i] / sc).powi(2)
        })
        .sum();
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    rhs: &mut F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    opts: &Dopri5Options,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let d0 = scaled_norm(y0, y0, y0, opts);
    let d1 = scaled_norm(f0, y0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + h0, &y1)?;
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = scaled_norm(&diff, y0, y0, opts) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dmax).powf(0.2) };
    Ok((100.0 * h0).min(h1).min(opts.h_max))
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end > t0`.
///
/// `on_step(t, &mut y)` sees every accepted state; any change it makes to `y`
/// becomes the starting point of the next step.
pub fn integrate<const N: usize, F, H>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Dopri5Options,
    mut on_step: H,
) -> Result<Outcome<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    H: FnMut(f64, &mut [f64; N]) -> Result<StepAction>,
{
    if t_end.is_nan() || t_end <= t0 {
        return Err(Error::InvalidInput(format!("t_end ({t_end}) must exceed t0 ({t0})")));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y)?;
    let mut h = initial_step(&mut rhs, t0, &y0, &k1, opts)?.min(t_end - t0);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut last_rejected = false;

    while t < t_end {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepFailure { t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }

        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
        let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = rhs(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = rhs(t + h, &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
        let y_new = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(t + h, &y_new)?;
        let err_vec: [f64; N] =
            std::array::from_fn(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]));
        let err = scaled_norm(&err_vec, &y, &y_new, opts);

        if err.is_finite() && err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            accepted += 1;
            let action = on_step(t, &mut y)?;
            if action == StepAction::Stop {
                return Ok(Outcome { t, y, accepted, rejected, stopped: t < t_end });
            }
            k1 = if y == y_new { k7 } else { rhs(t, &y)? };
            let mut factor = if err == 0.0 { MAX_FACTOR } else { SAFETY * err.powf(-0.2) };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if last_rejected {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(opts.h_max);
            last_rejected = false;
        } else {
            rejected += 1;
            let factor = if err.is_finite() { (SAFETY * err.powf(-0.2)).max(MIN_FACTOR) } else { MIN_FACTOR };
            h *= factor.min(1.0);
            last_rejected = true;
        }
        if h < opts.h_min && t < t_end {
            return Err(Error::StepFailure { t });
        }
    }
    Ok(Outcome { t, y, accepted, rejected, stopped: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_one_period() {
        let opts = Dopri5Options::with_tol(1e-11);
        let tau = 2.0 * std::f64::consts::PI;
        let out = integrate(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            tau,
            &opts,
            |_, _| Ok(StepAction::Continue),
        )
        .unwrap();
        assert_eq!(out.t, tau);
        assert!((out.y[0] - 1.0).abs() < 1e-9 && out.y[1].abs() < 1e-9);
    }

    #[test]
    fn exponential_growth_matches_closed_form() {
        let opts = Dopri5Options::with_tol(1e-12);
        let out =
            integrate(|_, y: &[f64; 1]| Ok([y[0]]), 0.0, [1.0], 3.0, &opts, |_, _| Ok(StepAction::Continue)).unwrap();
        assert!((out.y[0] - 3.0_f64.exp()).abs() < 1e-9 * 3.0_f64.exp());
    }

    #[test]
    fn hook_can_stop_and_repair() {
        let opts = Dopri5Options::with_tol(1e-8);
        let mut seen = 0;
        let out = integrate(
            |_, _: &[f64; 1]| Ok([1.0]),
            0.0,
            [0.0],
            10.0,
            &opts,
            |_, y| {
                seen += 1;
                y[0] = 0.0;
                Ok(if seen == 3 { StepAction::Stop } else { StepAction::Continue })
            },
        )
        .unwrap();
        assert!(out.stopped);
        assert_eq!(out.accepted, 3);
        assert_eq!(out.y[0], 0.0);
    }

    #[test]
    fn step_underflow_is_reported() {
        // blow-up at t = 1
        let opts = Dopri5Options::with_tol(1e-10);
        let r = integrate(|_, y: &[f64; 1]| Ok([y[0] * y[0]]), 0.0, [1.0], 2.0, &opts, |_, _| Ok(StepAction::Continue));
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn rejects_empty_interval() {
        let r = integrate(
            |_, y: &[f64; 1]| Ok(*y),
            1.0,
            [1.0],
            1.0,
            &Dopri5Options::default(),
            |_, _| Ok(StepAction::Continue),
        );
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
