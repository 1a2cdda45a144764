//! Separatrix nets of the averaged flow.
//!
//! Every saddle has two unstable and two stable branches. Each branch is
//! seeded a small distance from the saddle along its eigendirection and
//! integrated (forward for unstable, backward for stable) until it enters a
//! small ball around a stationary point. Duplicate edges found from both ends
//! are merged, so on the sphere every saddle ends up with four edge-ends.
//!
//! Sphere vertex `2k` is the projective representative `k` and `2k + 1` is
//! its antipode. Edge samples are unit vectors ordered forward in time.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::atlas::{classify_type, TopType, DEFAULT_TOL};
use crate::averaged::{integrate_averaged_until, AveragedModel, Direction};
use crate::error::{Error, Result};
use crate::ode::StepAction;
use crate::stationary::{enumerate_for_model, saddle_directions, Stability, StationaryPoint};
use crate::surface::EpsilonTriple;
use crate::Real3;

const TWIN_TOL: f64 = 1e-2;
const VERTEX_MATCH_TOL: f64 = 1e-9;
const SADDLE_LINK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Sphere,
    ProjectivePlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Side of the eigendirection the edge leaves `from` on (`±1`, `0` for a
    /// focus).
    pub from_branch: i8,
    pub to_branch: i8,
    /// Direction in which the edge was integrated.
    pub traced: Direction,
    /// Both ends are saddles at matching energy.
    pub saddle_link: bool,
    pub samples: Vec<Real3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnresolvedEdge {
    pub saddle: usize,
    pub branch: i8,
    pub direction: Direction,
    pub last: Real3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixGraph {
    pub vertices: Vec<StationaryPoint>,
    pub edges: Vec<Edge>,
    pub space: Space,
    pub model: AveragedModel,
    pub l_norm: f64,
    pub unresolved: Vec<UnresolvedEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Seed distance from the saddle, relative to `|L|`.
    pub seed_offset: f64,
    /// Capture-ball radius, relative to `|L|`.
    pub capture_radius: f64,
    pub tol: f64,
    /// `t_max = t_max_factor / rate`, with the model's rate scale.
    pub t_max_factor: f64,
    /// Largest step as a multiple of `1 / rate`.
    pub step_factor: f64,
    pub parallel: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            seed_offset: 1e-6,
            capture_radius: 1e-3,
            tol: 1e-10,
            t_max_factor: 1e6,
            step_factor: 0.2,
            parallel: true,
        }
    }
}

impl SeparatrixGraph {
    /// `(foci, saddles)` among the vertices.
    pub fn counts(&self) -> (usize, usize) {
        crate::stationary::count_stability(&self.vertices)
    }

    /// Largest relative energy drift along any edge.
    pub fn max_edge_energy_drift(&self) -> f64 {
        self.edges
            .iter()
            .flat_map(|e| {
                let first = e.samples[0];
                e.samples.iter().map(move |p| self.model.relative_energy_drift(&first, p))
            })
            .fold(0.0, f64::max)
    }

    /// Angle between the unit direction `p` and the nearest edge polyline
    /// (for a projective graph also of `-p`).
    pub fn angular_distance_to_edges(&self, p: &Real3) -> f64 {
        let p = p.normalize();
        let mut best = f64::INFINITY;
        let probes: &[Real3] = match self.space {
            Space::Sphere => &[p],
            Space::ProjectivePlane => &[p, -p],
        };
        for q in probes {
            for e in &self.edges {
                best = best.min(polyline_distance(q, &e.samples));
            }
        }
        2.0 * (0.5 * best).min(1.0).asin()
    }

    /// Checks that every saddle has exactly two outgoing and two incoming
    /// edges on the sphere.
    pub fn check_saddle_valence(&self) -> Result<()> {
        for (id, v) in self.vertices.iter().enumerate() {
            if v.stability != Stability::Saddle {
                continue;
            }
            let out = self.edges.iter().filter(|e| e.from == id).count();
            let inc = self.edges.iter().filter(|e| e.to == id).count();
            if out != 2 || inc != 2 {
                return Err(Error::InvalidInput(format!("saddle {id} has {out} outgoing and {inc} incoming edges")));
            }
        }
        Ok(())
    }

    /// Checks that flipping the sign of `L_axis`, together with reversing
    /// time, maps the sphere graph onto itself.
    pub fn check_reflection(&self, axis: usize) -> Result<()> {
        let flip = |p: &Real3| {
            let mut q = *p;
            q[axis] = -q[axis];
            q
        };
        let image: Vec<usize> =
            self.vertices.iter().map(|v| find_vertex(&self.vertices, &flip(&v.l0))).collect::<Result<_>>()?;
        for e in &self.edges {
            let mapped: Vec<Real3> = e.samples.iter().rev().map(flip).collect();
            let (a, b) = (image[e.to], image[e.from]);
            let found =
                self.edges.iter().any(|f| f.from == a && f.to == b && polyline_gap(&mapped, &f.samples) <= TWIN_TOL);
            if !found {
                return Err(Error::AsymmetricInput(format!(
                    "edge {}->{} has no mirror image in axis {axis}",
                    e.from, e.to
                )));
            }
        }
        Ok(())
    }
}

fn find_vertex(vertices: &[StationaryPoint], p: &Real3) -> Result<usize> {
    vertices
        .iter()
        .position(|v| (v.l0 - p).norm() <= VERTEX_MATCH_TOL)
        .ok_or_else(|| Error::AsymmetricInput(format!("no vertex at {p:?}")))
}

fn segment_distance(p: &Real3, a: &Real3, b: &Real3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let s = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) };
    (a + d * s - p).norm()
}

fn closest_on_segment(p: &Real3, a: &Real3, b: &Real3) -> Real3 {
    let d = b - a;
    let len2 = d.norm_squared();
    let s = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&d) / len2).clamp(0.0, 1.0) };
    a + d * s
}

/// Distance from `p` to a polyline.
pub fn polyline_distance(p: &Real3, line: &[Real3]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => (line[0] - p).norm(),
        _ => line.windows(2).map(|w| segment_distance(p, &w[0], &w[1])).fold(f64::INFINITY, f64::min),
    }
}

/// Largest distance from a point of `a` to the polyline `b`.
fn polyline_gap(a: &[Real3], b: &[Real3]) -> f64 {
    a.iter().map(|p| polyline_distance(p, b)).fold(0.0, f64::max)
}

fn arc_midpoint(line: &[Real3]) -> Real3 {
    let total: f64 = line.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut acc = 0.0;
    for w in line.windows(2) {
        let seg = (w[1] - w[0]).norm();
        if acc + seg >= 0.5 * total && seg > 0.0 {
            let s = (0.5 * total - acc) / seg;
            return w[0] + (w[1] - w[0]) * s;
        }
        acc += seg;
    }
    line[line.len() / 2]
}

struct Seed {
    origin: usize,
    branch: i8,
    direction: Direction,
    start: Real3,
}

enum TraceEnd {
    Captured { vertex: usize, samples: Vec<Real3> },
    Unresolved { last: Real3 },
}

struct Tracer<'a> {
    model: &'a AveragedModel,
    vertices: &'a [StationaryPoint],
    l_norm: f64,
    opts: &'a TraceOptions,
}

impl Tracer<'_> {
    fn run(&self, seed: &Seed) -> Result<TraceEnd> {
        let rate = self.model.rate_scale(self.l_norm);
        let t_max = self.opts.t_max_factor / rate;
        let h_max = self.opts.step_factor / rate;
        let r = self.opts.capture_radius * self.l_norm;
        let centres: Vec<Real3> = self.vertices.iter().map(|v| v.l0 * self.l_norm).collect();
        let mut armed = false;
        let mut prev = seed.start;
        let mut samples = vec![seed.start / self.l_norm];
        let mut hit = None;
        let l0 = seed.start;
        integrate_averaged_until(self.model, &l0, t_max, self.opts.tol, seed.direction, h_max, |_, l| {
            for (j, c) in centres.iter().enumerate() {
                if j == seed.origin && !armed {
                    continue;
                }
                if segment_distance(c, &prev, l) < r {
                    let end = if (l - c).norm() < r { *l } else { closest_on_segment(c, &prev, l) };
                    samples.push(end.normalize());
                    hit = Some(j);
                    return StepAction::Stop;
                }
            }
            if (l - centres[seed.origin]).norm() > r {
                armed = true;
            }
            samples.push(l / self.l_norm);
            prev = *l;
            StepAction::Continue
        })?;
        Ok(match hit {
            Some(vertex) => TraceEnd::Captured { vertex, samples },
            None => TraceEnd::Unresolved { last: prev / self.l_norm },
        })
    }
}

fn sphere_vertices(points: &[StationaryPoint]) -> Vec<StationaryPoint> {
    points.iter().flat_map(|p| [*p, StationaryPoint { l0: -p.l0, ..*p }]).collect()
}

fn branch_sign(x: f64) -> i8 {
    if x >= 0.0 {
        1
    } else {
        -1
    }
}

/// Traces the separatrix net of the averaged flow on the sphere `|L| = l_norm`.
pub fn trace_separatrices(model: &AveragedModel, l_norm: f64, opts: &TraceOptions) -> Result<SeparatrixGraph> {
    if !(l_norm.is_finite() && l_norm > 0.0) {
        return Err(Error::InvalidInput(format!("|L| must be positive, got {l_norm}")));
    }
    let vertices = sphere_vertices(&enumerate_for_model(model)?);
    let dirs: Vec<Option<(Real3, Real3)>> = vertices
        .iter()
        .map(|v| match v.stability {
            Stability::Saddle => saddle_directions(model, &v.l0).map(Some),
            Stability::Focus => Ok(None),
        })
        .collect::<Result<_>>()?;

    let mut seeds = Vec::new();
    for (id, v) in vertices.iter().enumerate() {
        let Some((u, s)) = dirs[id] else { continue };
        for (dir, direction) in [(u, Direction::Forward), (s, Direction::Backward)] {
            for branch in [1_i8, -1] {
                let p = (v.l0 + dir * (branch as f64 * opts.seed_offset)).normalize() * l_norm;
                seeds.push(Seed { origin: id, branch, direction, start: p });
            }
        }
    }
    if seeds.is_empty() {
        return Err(Error::InvalidInput("averaged flow has no saddle".into()));
    }

    let tracer = Tracer { model, vertices: &vertices, l_norm, opts };
    let results: Vec<Result<TraceEnd>> = if opts.parallel {
        let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(1);
        let chunk = seeds.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk)
                .map(|part| {
                    let tracer = &tracer;
                    scope.spawn(move || part.iter().map(|s| tracer.run(s)).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("trace worker panicked")).collect()
        })
    } else {
        seeds.iter().map(|s| tracer.run(s)).collect()
    };

    let arrival_branch = |vertex: usize, end: &Real3, stable: bool| -> i8 {
        match dirs[vertex] {
            Some((u, s)) => branch_sign((end - vertices[vertex].l0).dot(if stable { &s } else { &u })),
            None => 0,
        }
    };
    let energy_scale = model.energy_scale(1.0);
    let mut merged: BTreeMap<(usize, i8, usize, i8), Edge> = BTreeMap::new();
    let mut unresolved = Vec::new();
    for (seed, res) in seeds.iter().zip(results) {
        match res? {
            TraceEnd::Unresolved { last } => unresolved.push(UnresolvedEdge {
                saddle: seed.origin,
                branch: seed.branch,
                direction: seed.direction,
                last,
            }),
            TraceEnd::Captured { vertex, mut samples } => {
                let end = *samples.last().expect("nonempty");
                let edge = match seed.direction {
                    Direction::Forward => Edge {
                        from: seed.origin,
                        to: vertex,
                        from_branch: seed.branch,
                        to_branch: arrival_branch(vertex, &end, true),
                        traced: Direction::Forward,
                        saddle_link: false,
                        samples,
                    },
                    Direction::Backward => {
                        samples.reverse();
                        Edge {
                            from: vertex,
                            to: seed.origin,
                            from_branch: arrival_branch(vertex, &end, false),
                            to_branch: seed.branch,
                            traced: Direction::Backward,
                            saddle_link: false,
                            samples,
                        }
                    }
                };
                let (a, b) = (&vertices[edge.from], &vertices[edge.to]);
                let saddle_link = a.stability == Stability::Saddle
                    && b.stability == Stability::Saddle
                    && (model.hamiltonian(&a.l0) - model.hamiltonian(&b.l0)).abs() <= SADDLE_LINK_TOL * energy_scale;
                merged
                    .entry((edge.from, edge.from_branch, edge.to, edge.to_branch))
                    .or_insert(Edge { saddle_link, ..edge });
            }
        }
    }
    Ok(SeparatrixGraph {
        vertices,
        edges: merged.into_values().collect(),
        space: Space::Sphere,
        model: *model,
        l_norm,
        unresolved,
    })
}

/// Convenience wrapper for the quartic sphere.
pub fn trace_quartic(eps: &EpsilonTriple, l_norm: f64, opts: &TraceOptions) -> Result<SeparatrixGraph> {
    trace_separatrices(&AveragedModel::quartic(*eps), l_norm, opts)
}

/// Identifies each vertex and edge of a sphere graph with its antipodal twin.
pub fn quotient_antipodal(g: &SeparatrixGraph) -> Result<SeparatrixGraph> {
    if g.space != Space::Sphere {
        return Err(Error::InvalidInput("graph is already projective".into()));
    }
    if !g.vertices.len().is_multiple_of(2) {
        return Err(Error::AsymmetricInput("odd number of vertices".into()));
    }
    for pair in g.vertices.chunks(2) {
        if (pair[0].l0 + pair[1].l0).norm() > VERTEX_MATCH_TOL || pair[0].stability != pair[1].stability {
            return Err(Error::AsymmetricInput(format!("vertex {:?} lacks an antipodal twin", pair[0].l0)));
        }
    }
    let anti = |id: usize| id ^ 1;
    let mut twin = vec![usize::MAX; g.edges.len()];
    for (i, e) in g.edges.iter().enumerate() {
        let image: Vec<Real3> = e.samples.iter().rev().map(|p| -p).collect();
        let best = g
            .edges
            .iter()
            .enumerate()
            .filter(|(_, f)| f.from == anti(e.to) && f.to == anti(e.from))
            .map(|(j, f)| (j, polyline_gap(&image, &f.samples)))
            .filter(|&(_, d)| d <= TWIN_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match best {
            Some((j, _)) => twin[i] = j,
            None => {
                return Err(Error::AsymmetricInput(format!("edge {}->{} has no antipodal twin", e.from, e.to)));
            }
        }
    }
    let mut edges = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        let j = twin[i];
        if twin[j] != i {
            return Err(Error::AsymmetricInput(format!("edges {i} and {j} are not mutual twins")));
        }
        if j != i && !prefer(&arc_midpoint(&e.samples), &arc_midpoint(&g.edges[j].samples), i, j) {
            continue;
        }
        edges.push(Edge { from: e.from / 2, to: e.to / 2, ..e.clone() });
    }
    Ok(SeparatrixGraph {
        vertices: g.vertices.iter().step_by(2).copied().collect(),
        edges,
        space: Space::ProjectivePlane,
        model: g.model,
        l_norm: g.l_norm,
        unresolved: g
            .unresolved
            .iter()
            .filter(|u| u.saddle % 2 == 0)
            .map(|u| UnresolvedEdge { saddle: u.saddle / 2, ..u.clone() })
            .collect(),
    })
}

/// Whether edge `i` (midpoint `a`) is the representative of the pair rather
/// than its twin `j` (midpoint `b`): larger third component wins, then
/// second, then first, then the lower index.
fn prefer(a: &Real3, b: &Real3, i: usize, j: usize) -> bool {
    for k in (0..3).rev() {
        if (a[k] - b[k]).abs() > 1e-9 {
            return a[k] > b[k];
        }
    }
    i < j
}

/// Type of a projective net from its vertex counts, cross-checked against
/// the inequality classification of `eps`.
pub fn verify_type(g: &SeparatrixGraph, eps: &EpsilonTriple) -> Result<TopType> {
    if g.space != Space::ProjectivePlane {
        return Err(Error::InvalidInput("verify_type expects a projective graph".into()));
    }
    let (foci, saddles) = g.counts();
    let from_graph = TopType::from_counts(foci, saddles)?;
    let from_eps = classify_type(eps.as_array(), DEFAULT_TOL)?;
    if from_graph != from_eps {
        return Err(Error::ConsistencyError { from_graph: from_graph.to_string(), from_eps: from_eps.to_string() });
    }
    Ok(from_graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(a: f64, b: f64, c: f64) -> EpsilonTriple {
        EpsilonTriple::new(a, b, c).unwrap()
    }

    fn net(e: EpsilonTriple) -> SeparatrixGraph {
        trace_quartic(&e, 1.0, &TraceOptions::default()).unwrap()
    }

    #[test]
    fn type_i_net() {
        let e = eps(0.02, 0.03, 0.04);
        let g = net(e);
        assert_eq!(g.vertices.len(), 26);
        assert!(g.unresolved.is_empty());
        g.check_saddle_valence().unwrap();
        assert!(g.max_edge_energy_drift() <= 1e-6);
        let q = quotient_antipodal(&g).unwrap();
        assert_eq!(q.vertices.len(), 13);
        assert_eq!(q.edges.len() * 2, g.edges.len());
        assert_eq!(q.counts(), (7, 6));
        assert_eq!(verify_type(&q, &e), Ok(TopType::I));
    }

    #[test]
    fn edges_start_and_end_at_vertices() {
        let g = net(eps(0.01, 0.03, 0.04));
        for e in &g.edges {
            assert!((e.samples[0] - g.vertices[e.from].l0).norm() <= 1e-3);
            assert!((e.samples.last().unwrap() - g.vertices[e.to].l0).norm() <= 1e-3);
            let (a, b) = (&g.vertices[e.from], &g.vertices[e.to]);
            if a.stability == Stability::Saddle && b.stability == Stability::Saddle {
                assert!(e.saddle_link);
            }
        }
    }

    #[test]
    fn nets_are_mirror_symmetric() {
        for e in [eps(0.02, 0.03, 0.04), eps(-0.02, 0.03, 0.04)] {
            let g = net(e);
            for axis in 0..3 {
                g.check_reflection(axis).unwrap();
            }
        }
    }

    #[test]
    fn other_types() {
        for (e, t) in [
            (eps(0.01, 0.03, 0.04), TopType::II),
            (eps(-0.02, 0.03, 0.04), TopType::III),
            (eps(-0.01, 0.0, 0.01), TopType::IV),
        ] {
            let g = net(e);
            g.check_saddle_valence().unwrap();
            let q = quotient_antipodal(&g).unwrap();
            assert_eq!(verify_type(&q, &e), Ok(t));
            let (f, s) = q.counts();
            assert_eq!(f as i64 - s as i64, 1);
        }
    }

    #[test]
    fn quotient_rejects_broken_input() {
        let g = net(eps(-0.01, 0.0, 0.01));
        let mut broken = g.clone();
        broken.edges.pop();
        assert!(matches!(quotient_antipodal(&broken), Err(Error::AsymmetricInput(_))));
        let q = quotient_antipodal(&g).unwrap();
        assert!(quotient_antipodal(&q).is_err());
        assert!(verify_type(&g, &eps(-0.01, 0.0, 0.01)).is_err());
        // a projective net checked against the wrong deformation
        assert!(matches!(verify_type(&q, &eps(0.02, 0.03, 0.04)), Err(Error::ConsistencyError { .. })));
    }

    #[test]
    fn quotient_picks_upper_representatives() {
        let q = quotient_antipodal(&net(eps(0.02, 0.03, 0.04))).unwrap();
        for v in &q.vertices {
            assert_eq!(crate::stationary::canonical_representative(&v.l0), v.l0);
        }
    }

    #[test]
    fn serial_and_parallel_tracing_agree() {
        let e = eps(-0.02, 0.03, 0.04);
        let a = trace_quartic(&e, 1.0, &TraceOptions { parallel: false, ..Default::default() }).unwrap();
        let b = trace_quartic(&e, 1.0, &TraceOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn euler_top_net() {
        let model = AveragedModel::Quadratic { kappa: [1.0 / 1.0201, 1.0 / 1.0404, 1.0 / 1.0609] };
        let g = trace_separatrices(&model, 2.0, &TraceOptions::default()).unwrap();
        g.check_saddle_valence().unwrap();
        assert_eq!(g.edges.len(), 4);
        let q = quotient_antipodal(&g).unwrap();
        assert_eq!(q.counts(), (2, 1));
        // the separatrices leave and enter the middle axis
        assert!(g.angular_distance_to_edges(&Real3::y()) < 1e-3);
    }
}
