//! JSON run configuration. Command-line flags override these fields.

use std::path::Path;

use geocoil::{EpsilonTriple, SurfaceSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub surface: Option<SurfaceSpec>,
    /// Shorthand for a quartic surface.
    pub eps: Option<[f64; 3]>,
    pub x0: Option<[f64; 3]>,
    pub v0: Option<[f64; 3]>,
    #[serde(rename = "L0")]
    pub l0: Option<[f64; 3]>,
    pub t_end: Option<f64>,
    pub tol: Option<f64>,
    pub resolution: Option<usize>,
    pub l_norm: Option<f64>,
    pub reverse: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed config {}: {e}", path.display())))
    }

    /// The surface from flags or config; `eps` takes precedence over `surface`.
    pub fn surface(&self) -> Result<SurfaceSpec, CliError> {
        if let Some(e) = self.eps {
            return Ok(SurfaceSpec::quartic(EpsilonTriple::try_from(e)?));
        }
        self.surface.ok_or_else(|| CliError::Usage("no surface given (use --eps, --ellipsoid or a config file)".into()))
    }

    pub fn eps(&self) -> Result<EpsilonTriple, CliError> {
        match self.surface()? {
            SurfaceSpec::Quartic { eps } => Ok(eps),
            SurfaceSpec::Ellipsoid { .. } => Err(CliError::Usage("this command needs a quartic surface".into())),
        }
    }

    pub fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, CliError> {
        value.ok_or_else(|| CliError::Usage(format!("missing required input `{name}`")))
    }
}
