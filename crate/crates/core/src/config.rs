//! JSON configuration for the `simulate` and `trace` commands.
//!
//! Every document carries `schema_version`; unknown fields are rejected
//! and both parse and validation failures name the offending field path.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filter_pose_stream_toggled, AngularPose, OneEuroParams};
use crate::harness::SessionPlan;
use crate::tremor::{synth_tremor, TremorProfile};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "RAYSTEADY_SEED";

fn config_error(file: &Path, field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        file: file.to_path_buf(),
        field: field.into(),
        reason: reason.into(),
    }
}

/// Parses `bytes` as a versioned JSON document of type `T`.
fn parse_versioned<T: DeserializeOwned>(bytes: &[u8], file: &Path) -> Result<T> {
    let mut value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| config_error(file, "$", e.to_string()))?;
    let Some(obj) = value.as_object_mut() else {
        return Err(config_error(file, "$", "expected a JSON object"));
    };
    match obj.remove("schema_version") {
        None => return Err(config_error(file, "schema_version", "missing field")),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => {}
        Some(v) => {
            return Err(config_error(
                file,
                "schema_version",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ))
        }
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        config_error(file, field, e.into_inner().to_string())
    })
}

/// Re-labels a validation error with the field path it came from.
fn at_field(file: &Path, prefix: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => {
            let field = if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            };
            config_error(file, field, reason)
        }
        Error::Aliasing { rate_hz, tremor_hz } => config_error(
            file,
            "model.sample_rate_hz",
            format!("{rate_hz} Hz aliases tremor at {tremor_hz} Hz"),
        ),
        other => config_error(file, prefix, other.to_string()),
    }
}

fn validate_plan(plan: &SessionPlan, file: &Path) -> Result<()> {
    plan.profile
        .validate()
        .map_err(|e| at_field(file, "profile", e))?;
    plan.model
        .validate()
        .map_err(|e| at_field(file, "model", e))?;
    plan.filter_params
        .validate()
        .map_err(|e| at_field(file, "filter_params", e))?;
    plan.validate().map_err(|e| at_field(file, "", e))
}

pub fn parse_session_config(bytes: &[u8], file: &Path) -> Result<SessionPlan> {
    let plan: SessionPlan = parse_versioned(bytes, file)?;
    validate_plan(&plan, file)?;
    Ok(plan)
}

/// Applies `RAYSTEADY_SEED` when set.
pub fn apply_seed_override(plan: &mut SessionPlan, value: Option<&str>) -> Result<()> {
    if let Some(raw) = value {
        plan.seed_root = raw.trim().parse().map_err(|_| {
            Error::invalid(
                "RAYSTEADY_SEED",
                format!("expected an unsigned 64-bit integer, got `{raw}`"),
            )
        })?;
    }
    Ok(())
}

/// Settings for a single tremor stream filtered with optional toggles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub profile: TremorProfile,
    pub filter_params: OneEuroParams,
    pub filter_on: bool,
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Times at which the filter flag flips.
    pub toggles_s: Vec<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            profile: TremorProfile::default(),
            filter_params: OneEuroParams::default(),
            filter_on: true,
            sample_rate_hz: 90.0,
            duration_s: 10.0,
            toggles_s: Vec::new(),
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::invalid("duration_s", "must be finite and > 0"));
        }
        if !self.sample_rate_hz.is_finite() || self.sample_rate_hz <= 2.0 * self.profile.tremor_hz {
            return Err(Error::Aliasing {
                rate_hz: self.sample_rate_hz,
                tremor_hz: self.profile.tremor_hz,
            });
        }
        if self.toggles_s.iter().any(|t| !t.is_finite()) || !self.toggles_s.is_sorted() {
            return Err(Error::invalid("toggles_s", "must be finite and ascending"));
        }
        Ok(())
    }

    /// Generates the tremor stream of a hand held still at (0, 0) and
    /// filters it. Returns (raw, rendered) poses.
    pub fn run(&self) -> Result<(Vec<AngularPose>, Vec<AngularPose>)> {
        self.validate()?;
        let raw: Vec<AngularPose> =
            synth_tremor(&self.profile, self.duration_s, self.sample_rate_hz)?
                .into_iter()
                .map(|s| AngularPose::new(s.t, s.yaw_offset_deg, s.pitch_offset_deg))
                .collect();
        let filtered =
            filter_pose_stream_toggled(&raw, &self.filter_params, self.filter_on, &self.toggles_s)?;
        Ok((raw, filtered))
    }
}

pub fn parse_trace_config(bytes: &[u8], file: &Path) -> Result<TraceConfig> {
    let config: TraceConfig = parse_versioned(bytes, file)?;
    config
        .profile
        .validate()
        .map_err(|e| at_field(file, "profile", e))?;
    config
        .filter_params
        .validate()
        .map_err(|e| at_field(file, "filter_params", e))?;
    config.validate().map_err(|e| match e {
        Error::Aliasing { rate_hz, tremor_hz } => config_error(
            file,
            "sample_rate_hz",
            format!("{rate_hz} Hz aliases tremor at {tremor_hz} Hz"),
        ),
        other => at_field(file, "", other),
    })?;
    Ok(config)
}

/// Reads a file, keeping the bytes for digesting.
pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Version-tagged wrapper used when writing a config back out.
#[derive(Debug, Serialize)]
pub struct Versioned<'a, T: Serialize> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: &'a T,
}

impl<'a, T: Serialize> Versioned<'a, T> {
    pub fn new(body: &'a T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

pub fn session_config_json(plan: &SessionPlan) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Versioned::new(plan))?)
}
