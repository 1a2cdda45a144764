//! Topological type of the separatrix net as a function of the deformation.
//!
//! All conditions are homogeneous in `(e1, e2, e3)`, so the classification
//! depends only on the direction of the triple. Before comparing against the
//! tolerance the triple is scaled to `max |e_i| = 1`, which makes the result
//! exactly scale invariant.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::Real3;

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopType {
    I,
    II,
    III,
    IV,
    Marginal,
}

impl TopType {
    /// `(foci, saddles)` on the projective plane.
    pub fn counts(self) -> Option<(usize, usize)> {
        match self {
            TopType::I => Some((7, 6)),
            TopType::II => Some((5, 4)),
            TopType::III => Some((3, 2)),
            TopType::IV => Some((2, 1)),
            TopType::Marginal => None,
        }
    }

    pub fn from_counts(foci: usize, saddles: usize) -> Result<Self> {
        [TopType::I, TopType::II, TopType::III, TopType::IV]
            .into_iter()
            .find(|t| t.counts() == Some((foci, saddles)))
            .ok_or(Error::UnknownCounts { foci, saddles })
    }

    pub fn label(self) -> &'static str {
        match self {
            TopType::I => "I",
            TopType::II => "II",
            TopType::III => "III",
            TopType::IV => "IV",
            TopType::Marginal => "Marginal",
        }
    }
}

impl fmt::Display for TopType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The three quadratic forms whose zero sets bound the Type I region:
/// `q1 = e1 e2 - e2 e3 + e3 e1`, `q2 = e1 e2 + e2 e3 - e3 e1`,
/// `q3 = -e1 e2 + e2 e3 + e3 e1`.
pub fn boundary_residuals(eps: [f64; 3]) -> Real3 {
    let [e1, e2, e3] = eps;
    let (p12, p23, p31) = (e1 * e2, e2 * e3, e3 * e1);
    Real3::new(p12 - p23 + p31, p12 + p23 - p31, -p12 + p23 + p31)
}

fn normalized(eps: [f64; 3]) -> Result<[f64; 3]> {
    let m = eps.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
    if !eps.iter().all(|e| e.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite deformation {eps:?}")));
    }
    if m == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(eps.map(|e| e / m))
}

/// Classifies a deformation triple into Types I to IV, or Marginal on a
/// boundary.
pub fn classify_type(eps: [f64; 3], tol: f64) -> Result<TopType> {
    let e = normalized(eps)?;
    let zero: Vec<bool> = e.iter().map(|x| x.abs() <= tol).collect();
    let n_zero = zero.iter().filter(|&&z| z).count();
    if n_zero >= 2 {
        return Ok(TopType::Marginal);
    }
    if n_zero == 1 {
        let k = zero.iter().position(|&z| z).expect("one zero");
        let paired = e[(k + 1) % 3] * e[(k + 2) % 3];
        return Ok(if paired < -tol { TopType::IV } else { TopType::Marginal });
    }
    let products = [e[0] * e[1], e[1] * e[2], e[2] * e[0]];
    if products.iter().all(|&p| p > 0.0) {
        let q = boundary_residuals(e);
        if q.iter().all(|&v| v > tol) {
            Ok(TopType::I)
        } else if q.iter().any(|v| v.abs() <= tol) {
            Ok(TopType::Marginal)
        } else {
            Ok(TopType::II)
        }
    } else if products.iter().any(|p| p.abs() <= tol) {
        Ok(TopType::Marginal)
    } else {
        Ok(TopType::III)
    }
}

/// The four type conditions evaluated independently of each other, in the
/// order I, II, III, IV. For non-Marginal input exactly one holds.
pub fn type_predicates(eps: [f64; 3], tol: f64) -> Result<[bool; 4]> {
    let e = normalized(eps)?;
    let [e1, e2, e3] = e;
    let q = boundary_residuals(e);
    let nonzero = e.iter().all(|x| x.abs() > tol);
    let same_sign = e.iter().all(|&x| x > 0.0) || e.iter().all(|&x| x < 0.0);
    let type_i = q.iter().all(|&v| v > tol);
    let type_ii = nonzero && same_sign && q.iter().any(|&v| v <= tol);
    let cases = [e2 * e3 > 0.0 && e1 * e2 <= 0.0, e3 * e1 > 0.0 && e2 * e3 <= 0.0, e1 * e2 > 0.0 && e3 * e1 <= 0.0];
    let type_iii = nonzero && cases.iter().filter(|&&c| c).count() == 1;
    let paired = [e2 * e3, e3 * e1, e1 * e2];
    let type_iv = (0..3).any(|k| e[k].abs() <= tol && paired[k] <= 0.0);
    Ok([type_i, type_ii, type_iii, type_iv])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSample {
    pub u: f64,
    pub v: f64,
    pub top: TopType,
}

/// Regular grid over the projective disk of deformation directions.
///
/// Nodes are `u_i = -1 + 2 i / resolution` for `i = 0..=resolution` (and the
/// same for `v`), keeping those inside the closed unit disk; the direction is
/// `(u, v, sqrt(1 - u^2 - v^2))`. Even resolutions place nodes on the axes.
pub fn sample_region_map(resolution: usize) -> Result<Vec<RegionSample>> {
    if resolution < 16 {
        return Err(Error::InvalidInput(format!("resolution must be at least 16, got {resolution}")));
    }
    let node = |i: usize| -1.0 + 2.0 * i as f64 / resolution as f64;
    let mut out = Vec::new();
    for j in 0..=resolution {
        let v = node(j);
        for i in 0..=resolution {
            let u = node(i);
            let r2 = u * u + v * v;
            if r2 > 1.0 {
                continue;
            }
            let w = (1.0 - r2).max(0.0).sqrt();
            let top = classify_type([u, v, w], DEFAULT_TOL)?;
            out.push(RegionSample { u, v, top });
        }
    }
    Ok(out)
}

/// Disk coordinates of a deformation direction (third component made
/// nonnegative).
pub fn eps_to_disk(eps: [f64; 3]) -> Result<(f64, f64)> {
    let n = (eps[0] * eps[0] + eps[1] * eps[1] + eps[2] * eps[2]).sqrt();
    if n == 0.0 {
        return Err(Error::AllZero);
    }
    let s = if eps[2] < 0.0 { -1.0 } else { 1.0 };
    Ok((s * eps[0] / n, s * eps[1] / n))
}

/// The grid sample nearest to `(u, v)`.
pub fn nearest_sample(grid: &[RegionSample], u: f64, v: f64) -> Option<&RegionSample> {
    grid.iter().min_by(|a, b| {
        let da = (a.u - u).powi(2) + (a.v - v).powi(2);
        let db = (b.u - u).powi(2) + (b.v - v).powi(2);
        da.total_cmp(&db)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_triples() {
        assert_eq!(classify_type([0.02, 0.03, 0.04], DEFAULT_TOL), Ok(TopType::I));
        assert_eq!(classify_type([0.01, 0.03, 0.04], DEFAULT_TOL), Ok(TopType::II));
        assert_eq!(classify_type([-0.02, 0.03, 0.04], DEFAULT_TOL), Ok(TopType::III));
        assert_eq!(classify_type([-0.01, 0.0, 0.01], DEFAULT_TOL), Ok(TopType::IV));
        assert_eq!(classify_type([0.0, 0.0, 0.0], DEFAULT_TOL), Err(Error::AllZero));
    }

    #[test]
    fn residual_examples() {
        assert_eq!(boundary_residuals([1.0, 1.0, 1.0]), Real3::new(1.0, 1.0, 1.0));
        // independent evaluation in exact integer arithmetic (units of 1e-4)
        let (a, b, c) = (2_i64, 3, 4);
        let exact = [a * b - b * c + c * a, a * b + b * c - c * a, -a * b + b * c + c * a];
        assert_eq!(exact, [2, 10, 14]);
        let q = boundary_residuals([0.02, 0.03, 0.04]);
        for i in 0..3 {
            assert!((q[i] - exact[i] as f64 * 1e-4).abs() < 1e-18);
        }
        // e3 = e1 e2 / (e2 - e1) zeroes the first form
        let (e1, e2) = (0.01, 0.03);
        assert!(boundary_residuals([e1, e2, e1 * e2 / (e2 - e1)])[0].abs() < 1e-18);
    }

    #[test]
    fn marginal_boundaries() {
        // e3 = e1 e2 / (e2 - e1) puts (1, 2, 2) on q1 = 0 and (2, 1, 2) on q2 = 0
        for e in [[1.0, 2.0, 2.0], [0.01, 0.02, 0.02], [2.0, 1.0, 2.0], [1.0, 1.0, 0.5]] {
            assert_eq!(classify_type(e, DEFAULT_TOL).unwrap(), TopType::Marginal, "{e:?}");
        }
        assert_eq!(classify_type([1.0, 2.0, 2.1], DEFAULT_TOL).unwrap(), TopType::II);
        assert_eq!(classify_type([1.0, 2.0, 1.9], DEFAULT_TOL).unwrap(), TopType::I);
        assert_eq!(classify_type([0.0, 0.0, 0.03], DEFAULT_TOL).unwrap(), TopType::Marginal);
        assert_eq!(classify_type([0.0, 0.01, 0.03], DEFAULT_TOL).unwrap(), TopType::Marginal);
        assert_eq!(classify_type([0.0, -0.01, 0.03], DEFAULT_TOL).unwrap(), TopType::IV);
    }

    #[test]
    fn predicates_are_exclusive_for_reference_triples() {
        for (e, k) in
            [([0.02, 0.03, 0.04], 0), ([0.01, 0.03, 0.04], 1), ([-0.02, 0.03, 0.04], 2), ([-0.01, 0.0, 0.01], 3)]
        {
            let p = type_predicates(e, DEFAULT_TOL).unwrap();
            assert_eq!(p.iter().filter(|&&b| b).count(), 1, "{e:?}");
            assert!(p[k]);
        }
    }

    #[test]
    fn counts_round_trip() {
        for t in [TopType::I, TopType::II, TopType::III, TopType::IV] {
            let (f, s) = t.counts().unwrap();
            assert_eq!(f - s, 1);
            assert_eq!(TopType::from_counts(f, s), Ok(t));
        }
        assert_eq!(TopType::from_counts(4, 4), Err(Error::UnknownCounts { foci: 4, saddles: 4 }));
    }

    #[test]
    fn region_map_contents() {
        assert!(sample_region_map(8).is_err());
        let grid = sample_region_map(64).unwrap();
        for t in [TopType::I, TopType::II, TopType::III, TopType::IV] {
            assert!(grid.iter().any(|s| s.top == t), "{t:?}");
        }
        for s in &grid {
            assert!(s.u * s.u + s.v * s.v <= 1.0);
            let w = (1.0 - s.u * s.u - s.v * s.v).max(0.0).sqrt();
            assert_eq!(classify_type([2.0 * s.u, 2.0 * s.v, 2.0 * w], DEFAULT_TOL).unwrap(), s.top);
        }
    }

    #[test]
    fn reference_triples_land_in_their_region() {
        let grid = sample_region_map(64).unwrap();
        for (e, t) in [
            ([0.02, 0.03, 0.04], TopType::I),
            ([0.01, 0.03, 0.04], TopType::II),
            ([-0.02, 0.03, 0.04], TopType::III),
            ([-0.01, 0.0, 0.01], TopType::IV),
        ] {
            let (u, v) = eps_to_disk(e).unwrap();
            let cell = nearest_sample(&grid, u, v).unwrap();
            if t == TopType::IV {
                // Type IV occupies lines only; the nearest node lies on v = 0
                assert_eq!(cell.v, 0.0);
            }
            assert_eq!(cell.top, t, "{e:?}");
        }
    }

    #[test]
    fn type_changes_straddle_residual_sign_changes() {
        let grid = sample_region_map(64).unwrap();
        let res = 64;
        for pair in grid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.v != b.v || (b.u - a.u - 2.0 / res as f64).abs() > 1e-12 {
                continue;
            }
            let pick = [TopType::I, TopType::II];
            if pick.contains(&a.top) && pick.contains(&b.top) && a.top != b.top {
                let w = |s: &RegionSample| (1.0 - s.u * s.u - s.v * s.v).max(0.0).sqrt();
                let qa = boundary_residuals([a.u, a.v, w(&a)]);
                let qb = boundary_residuals([b.u, b.v, w(&b)]);
                assert!((0..3).any(|i| qa[i].signum() != qb[i].signum()));
            }
        }
    }
}
