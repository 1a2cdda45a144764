//! Regenerates `tests/fixtures/compare_calibration.json`.
//!
//! cargo run -p geocoil-cli --example calibrate > crates/cli/tests/fixtures/compare_calibration.json

use geocoil::{EpsilonTriple, PhaseState, Real3, SurfaceSpec};
use geocoil_cli::compare::{compare, compare_reversed, tube_distance};
use serde_json::json;

const EPS: [f64; 3] = [0.02, 0.03, 0.04];
const HORIZON: f64 = 200.0;
const TOL: f64 = 1e-10;
const STARTS: [([f64; 3], [f64; 3]); 3] =
    [([0.2, 0.9, 0.3], [0.9, -0.1, -0.3]), ([0.5, 0.5, 0.7], [-0.7, 0.7, 0.0]), ([0.3, 0.3, 0.9], [1.0, 0.0, -0.3])];
const SADDLE_START: ([f64; 3], [f64; 3]) = ([-0.0117, 0.0001, -1.0299], [-1.9416, 0.0194, 0.0228]);
const SADDLE_AXES: [f64; 3] = [1.01, 1.02, 1.03];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let surface = SurfaceSpec::quartic(EpsilonTriple::try_from(EPS)?);
    let mut runs = Vec::new();
    for (x, v) in STARTS {
        let init = PhaseState::on_surface(&surface, Real3::from(x), Real3::from(v), 0.0)?;
        let fwd = compare(&surface, &init, HORIZON, TOL)?.report.summary;
        let rev = compare_reversed(&surface, &init, HORIZON, TOL)?.report.summary;
        runs.push(json!({
            "x0": x,
            "v0": v,
            "loops": fwd.loops,
            "max_angle_error": fwd.max_angle_error,
            "reversed_max_angle_error": rev.max_angle_error,
        }));
    }
    let [a, b, c] = SADDLE_AXES;
    let ellipsoid = SurfaceSpec::ellipsoid(a, b, c)?;
    let init = PhaseState::on_surface(&ellipsoid, Real3::from(SADDLE_START.0), Real3::from(SADDLE_START.1), 0.0)?;
    let tube = tube_distance(&ellipsoid, &init, HORIZON, TOL)?;
    let fixture = json!({
        "compare": {
            "eps": EPS,
            "t_end": HORIZON,
            "tol": TOL,
            "max_angle_error_limit": 0.09,
            "runs": runs,
        },
        "tube": {
            "ellipsoid": SADDLE_AXES,
            "x0": SADDLE_START.0,
            "v0": SADDLE_START.1,
            "t_end": HORIZON,
            "tol": TOL,
            "max_distance_limit": 0.17,
            "max_distance": tube,
        },
    });
    println!("{}", serde_json::to_string_pretty(&fixture)?);
    Ok(())
}
