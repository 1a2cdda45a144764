//! Text file formats: CSV tables and JSON documents.
//!
//! Floats in CSV are written in `{:.16e}` form (17 significant digits), which
//! round-trips exactly. JSON uses serde_json's shortest round-trip form.

use std::fmt::Write;

use serde::Serialize;

use crate::atlas::RegionSample;
use crate::averaged::AveragedTrajectory;
use crate::error::{Error, Result};
use crate::geodesic::{angular_momentum, Trajectory};
use crate::separatrix::{SeparatrixGraph, Space};
use crate::stationary::{Family, Stability, StationaryPoint};

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidInput(format!("serialization failed: {e}")))
}

/// `t,x1,x2,x3,v1,v2,v3,L1,L2,L3`, one row per accepted step.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,x1,x2,x3,v1,v2,v3,L1,L2,L3\n");
    for s in &traj.samples {
        let l = angular_momentum(s);
        let row = [s.t, s.x[0], s.x[1], s.x[2], s.v[0], s.v[1], s.v[2], l[0], l[1], l[2]];
        push_row(&mut out, &row);
    }
    out
}

/// `t,L1,L2,L3`.
pub fn averaged_csv(traj: &AveragedTrajectory) -> String {
    let mut out = String::from("t,L1,L2,L3\n");
    for (t, l) in &traj.samples {
        push_row(&mut out, &[*t, l[0], l[1], l[2]]);
    }
    out
}

fn push_row(out: &mut String, row: &[f64]) {
    for (k, v) in row.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// `u,v,type`.
pub fn region_csv(grid: &[RegionSample]) -> String {
    let mut out = String::from("u,v,type\n");
    for s in grid {
        let _ = writeln!(out, "{:.16e},{:.16e},{}", s.u, s.v, s.top.label());
    }
    out
}

#[derive(Serialize)]
struct PointRecord {
    #[serde(rename = "L0")]
    l0: [f64; 3],
    family: Family,
    stability: Stability,
    eigen: [[f64; 2]; 2],
}

impl From<&StationaryPoint> for PointRecord {
    fn from(p: &StationaryPoint) -> Self {
        Self { l0: p.l0.into(), family: p.family, stability: p.stability, eigen: p.eigen }
    }
}

/// JSON array of `{L0, family, stability, eigen}`.
pub fn stationary_json(points: &[StationaryPoint]) -> Result<String> {
    let records: Vec<PointRecord> = points.iter().map(PointRecord::from).collect();
    json(&records)
}

#[derive(Serialize)]
struct VertexRecord {
    id: usize,
    #[serde(rename = "L0")]
    l0: [f64; 3],
    family: Family,
    stability: Stability,
}

#[derive(Serialize)]
struct EdgeRecord {
    from: usize,
    to: usize,
    saddle_link: bool,
    samples: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct GraphRecord {
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
    space: Space,
    unresolved: usize,
}

/// JSON `{vertices:[{id, L0, family, stability}], edges:[{from, to, samples}], space}`.
pub fn graph_json(g: &SeparatrixGraph) -> Result<String> {
    let record = GraphRecord {
        vertices: g
            .vertices
            .iter()
            .enumerate()
            .map(|(id, v)| VertexRecord { id, l0: v.l0.into(), family: v.family, stability: v.stability })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeRecord {
                from: e.from,
                to: e.to,
                saddle_link: e.saddle_link,
                samples: e.samples.iter().map(|p| (*p).into()).collect(),
            })
            .collect(),
        space: g.space,
        unresolved: g.unresolved.len(),
    };
    json(&record)
}

/// Any serializable value as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    json(value)
}
