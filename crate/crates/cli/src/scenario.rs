//! Scenario files: TOML descriptions of a radar, a scene and the
//! processing settings, plus the two built-in presets.
//!
//! Keys carry their SI unit in the name (`sensor_height_m`,
//! `bandwidth_hz`) because silent unit mismatches are the classic way to
//! ruin a radar config. Unknown keys are rejected for the same reason: a
//! typo must fail loudly, not fall back to a default.

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use echoheight_core::extract::{SamplingMode, TrackingParams};
use echoheight_core::fmcw::{RadarConfig, TargetSpec};
use echoheight_core::geometry::{GroundModel, ScatteringModel};
use echoheight_core::height::HeightGrid;
use echoheight_core::{dsp::WindowKind, Complex64};

/// Long-range setup sampling the modulation once per measurement cycle:
/// slow approach, long observation interval.
pub const PRESET_SOMC: &str = r#"
# One sample per measurement cycle: a pedestrian-speed pass from 80 m out
# to 160 m, one amplitude sample per cycle over the whole pass.

[radar]
center_frequency_hz = 76.5e9
bandwidth_hz = 0.2e9
ramp_duration_s = 25.6e-6
ramps_per_cpi = 16
ramp_repetition_interval_s = 100e-6
measurement_cycle_s = 55.6e-3
samples_per_ramp = 512
noise_power = 0.0

[scene]
sensor_height_m = 1.3

[[targets]]
height_m = 1.8
initial_distance_m = 80.0
radial_speed_mps = 2.8

[processing]
mode = "per_cycle"
cycles = 514
"#;

/// Short-range setup sampling the modulation once per ramp: highway
/// speed, one CPI yields a whole amplitude track.
pub const PRESET_SOPRI: &str = r#"
# One sample per ramp: at 18 m/s a 71 ms CPI sweeps through 1.3 m of
# distance, enough for a per-CPI height spectrum at close range.

[radar]
center_frequency_hz = 76.5e9
bandwidth_hz = 1.0e9
ramp_duration_s = 128e-6
ramps_per_cpi = 512
ramp_repetition_interval_s = 138.671875e-6
measurement_cycle_s = 0.125
samples_per_ramp = 1024
noise_power = 0.0

[scene]
sensor_height_m = 1.3

[[targets]]
height_m = 0.5
initial_distance_m = 16.0
radial_speed_mps = 18.0

[processing]
mode = "per_cpi"
cycles = 20
"#;

/// Embedded presets by name.
pub const PRESETS: &[(&str, &str)] = &[("somc", PRESET_SOMC), ("sopri", PRESET_SOPRI)];

fn default_noise_power() -> f64 {
    0.0
}

fn default_reflection_real() -> f64 {
    -1.0
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_threshold_factor() -> f64 {
    8.0
}

fn default_window() -> String {
    "hann".into()
}

fn default_spectral_window() -> String {
    "rectangular".into()
}

fn default_coast_limit() -> u32 {
    5
}

fn default_grid_spacing() -> f64 {
    0.02
}

fn default_grid_count() -> usize {
    301
}

fn default_seed() -> u64 {
    7777
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarSection {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub ramp_duration_s: f64,
    pub ramps_per_cpi: usize,
    pub ramp_repetition_interval_s: f64,
    pub measurement_cycle_s: f64,
    pub samples_per_ramp: usize,
    #[serde(default = "default_noise_power")]
    pub noise_power: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub sensor_height_m: f64,
    #[serde(default = "default_reflection_real")]
    pub reflection_coefficient_real: f64,
    #[serde(default)]
    pub reflection_coefficient_imag: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub height_m: f64,
    pub initial_distance_m: f64,
    pub radial_speed_mps: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// "isotropic" or "retroreflector".
    #[serde(default)]
    pub scattering: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingSection {
    /// "per_cycle" or "per_cpi".
    pub mode: String,
    /// Measurement cycles to simulate.
    pub cycles: usize,
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
    /// Window for range-Doppler processing: "hann" or "rectangular".
    #[serde(default = "default_window")]
    pub window: String,
    /// Window for the height spectrum.
    #[serde(default = "default_spectral_window")]
    pub spectral_window: String,
    #[serde(default = "default_coast_limit")]
    pub coast_limit: u32,
    /// Track association gate; 0 picks three range resolutions.
    #[serde(default)]
    pub gate_radius_m: f64,
    /// Leading ramps the detector looks at; 0 picks the whole CPI in
    /// per-cycle mode and at most 64 ramps in per-CPI mode, where a fast
    /// scene would smear across range cells over a long CPI.
    #[serde(default)]
    pub detection_ramps: usize,
    #[serde(default)]
    pub grid_min_m: f64,
    #[serde(default = "default_grid_spacing")]
    pub grid_spacing_m: f64,
    #[serde(default = "default_grid_count")]
    pub grid_count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub radar: RadarSection,
    pub scene: SceneSection,
    pub targets: Vec<TargetSection>,
    pub processing: ProcessingSection,
}

/// A validated scenario, expressed in the simulator's own types.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub config: RadarConfig,
    pub ground: GroundModel,
    pub sensor_height: f64,
    pub targets: Vec<TargetSpec>,
    pub mode: SamplingMode,
    pub cycles: usize,
    pub threshold_factor: f64,
    pub window: WindowKind,
    pub spectral_window: WindowKind,
    pub tracking: TrackingParams,
    pub grid: HeightGrid,
    /// Ramps the detector sees per CPI; always 1..=ramps_per_cpi.
    pub detection_ramps: usize,
    pub seed: u64,
}

fn parse_window(name: &str, field: &str) -> Result<WindowKind> {
    match name {
        "hann" => Ok(WindowKind::Hann),
        "rectangular" => Ok(WindowKind::Rectangular),
        other => bail!("{field}: unknown window {other:?}, expected \"hann\" or \"rectangular\""),
    }
}

fn parse_scattering(name: Option<&str>, index: usize) -> Result<ScatteringModel> {
    match name {
        None | Some("isotropic") => Ok(ScatteringModel::Isotropic),
        Some("retroreflector") => Ok(ScatteringModel::Retroreflector),
        Some(other) => bail!(
            "targets[{index}].scattering: unknown model {other:?}, \
             expected \"isotropic\" or \"retroreflector\""
        ),
    }
}

impl Scenario {
    /// Parse scenario TOML already loaded as a value tree.
    pub fn from_value(value: toml::Value) -> Result<Self> {
        let scenario: Scenario = value
            .try_into()
            .map_err(|e| anyhow!("invalid scenario: {e}"))?;
        Ok(scenario)
    }

    /// Turn the parsed sections into validated simulator types. Errors
    /// name the offending scenario field.
    pub fn build(&self) -> Result<RunPlan> {
        let r = &self.radar;
        let config = RadarConfig {
            center_frequency: r.center_frequency_hz,
            bandwidth: r.bandwidth_hz,
            ramp_duration: r.ramp_duration_s,
            ramps_per_cpi: r.ramps_per_cpi,
            ramp_repetition_interval: r.ramp_repetition_interval_s,
            measurement_cycle: r.measurement_cycle_s,
            samples_per_ramp: r.samples_per_ramp,
            noise_power: r.noise_power,
        };
        config.validate().map_err(|e| anyhow!("[radar]: {e}"))?;

        if !(self.scene.sensor_height_m.is_finite() && self.scene.sensor_height_m > 0.0) {
            bail!("scene.sensor_height_m: must be > 0");
        }
        let ground = GroundModel::new(Complex64::new(
            self.scene.reflection_coefficient_real,
            self.scene.reflection_coefficient_imag,
        ))
        .map_err(|e| anyhow!("scene.reflection_coefficient: {e}"))?;

        if self.targets.is_empty() {
            bail!("targets: at least one target is required");
        }
        let mut targets = Vec::with_capacity(self.targets.len());
        for (i, t) in self.targets.iter().enumerate() {
            let spec = TargetSpec {
                height: t.height_m,
                initial_distance: t.initial_distance_m,
                radial_speed: t.radial_speed_mps,
                amplitude: t.amplitude,
                scattering: parse_scattering(t.scattering.as_deref(), i)?,
            };
            spec.validate().map_err(|e| anyhow!("targets[{i}]: {e}"))?;
            targets.push(spec);
        }

        let p = &self.processing;
        let mode = match p.mode.as_str() {
            "per_cycle" => SamplingMode::PerCycle,
            "per_cpi" => SamplingMode::PerRamp,
            other => bail!(
                "processing.mode: unknown mode {other:?}, \
                 expected \"per_cycle\" or \"per_cpi\""
            ),
        };
        if p.cycles == 0 {
            bail!("processing.cycles: must be >= 1");
        }
        if !(p.threshold_factor.is_finite() && p.threshold_factor > 0.0) {
            bail!("processing.threshold_factor: must be > 0");
        }
        if !(p.gate_radius_m.is_finite() && p.gate_radius_m >= 0.0) {
            bail!("processing.gate_radius_m: must be >= 0");
        }
        let gate_radius = if p.gate_radius_m > 0.0 {
            p.gate_radius_m
        } else {
            3.0 * config.range_resolution()
        };
        if p.detection_ramps > config.ramps_per_cpi {
            bail!(
                "processing.detection_ramps: exceeds radar.ramps_per_cpi ({})",
                config.ramps_per_cpi
            );
        }
        let detection_ramps = if p.detection_ramps > 0 {
            p.detection_ramps
        } else if mode == SamplingMode::PerRamp {
            config.ramps_per_cpi.min(64)
        } else {
            config.ramps_per_cpi
        };
        let tracking = TrackingParams {
            gate_radius,
            cycle_time: config.measurement_cycle,
            coast_limit: p.coast_limit,
            velocity_ambiguity: Some(config.velocity_ambiguity_span()),
        };
        let grid = HeightGrid::new(p.grid_min_m, p.grid_spacing_m, p.grid_count)
            .map_err(|e| anyhow!("processing.grid_*: {e}"))?;

        Ok(RunPlan {
            config,
            ground,
            sensor_height: self.scene.sensor_height_m,
            targets,
            mode,
            cycles: p.cycles,
            threshold_factor: p.threshold_factor,
            window: parse_window(&p.window, "processing.window")?,
            spectral_window: parse_window(&p.spectral_window, "processing.spectral_window")?,
            tracking,
            grid,
            detection_ramps,
            seed: p.seed,
        })
    }
}

/// Load scenario TOML as a value tree from a preset name or a file path.
pub fn load_value(name_or_path: &str) -> Result<toml::Value> {
    let text = match PRESETS.iter().find(|(name, _)| *name == name_or_path) {
        Some((_, text)) => (*text).to_string(),
        None => std::fs::read_to_string(name_or_path)
            .with_context(|| format!("cannot read scenario file {name_or_path:?}"))?,
    };
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| anyhow!("scenario {name_or_path:?} is not valid TOML: {e}"))?;
    Ok(toml::Value::Table(table))
}

/// Apply one `key.path=value` override to a scenario value tree. Numeric
/// indices step into arrays (`targets.0.height_m`). The value is parsed
/// as TOML; if the key currently holds an integer, a whole-number float
/// is coerced so sweeps can drive integer knobs.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form key.path=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        bail!("override {assignment:?} has an empty key path");
    }

    let mut new_value = parse_toml_scalar(raw);
    let slot = lookup_path(root, path)?;
    if let (toml::Value::Integer(_), toml::Value::Float(f)) = (&*slot, &new_value) {
        if f.fract() == 0.0 && f.abs() < 9.2e18 {
            new_value = toml::Value::Integer(*f as i64);
        }
    }
    *slot = new_value;
    Ok(())
}

fn parse_toml_scalar(raw: &str) -> toml::Value {
    // A bare scalar is valid TOML as `v = <raw>`; strings fall back to
    // being taken literally so users need not double-quote.
    if let Ok(table) = format!("v = {raw}").parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            if !v.is_table() && !v.is_array() {
                return v.clone();
            }
        }
    }
    toml::Value::String(raw.to_string())
}

fn lookup_path<'a>(root: &'a mut toml::Value, path: &str) -> Result<&'a mut toml::Value> {
    let mut cursor = root;
    for part in path.split('.') {
        cursor = if let Ok(index) = part.parse::<usize>() {
            cursor
                .as_array_mut()
                .ok_or_else(|| anyhow!("override path {path:?}: {part:?} indexes a non-array"))?
                .get_mut(index)
                .ok_or_else(|| anyhow!("override path {path:?}: index {index} out of range"))?
        } else {
            cursor
                .as_table_mut()
                .ok_or_else(|| anyhow!("override path {path:?}: {part:?} is not a table key"))?
                .entry(part)
                .or_insert(toml::Value::Boolean(false))
        };
    }
    Ok(cursor)
}

/// Full front door: load, apply overrides, parse, validate.
pub fn load_plan(name_or_path: &str, overrides: &[String]) -> Result<(Scenario, RunPlan)> {
    let mut value = load_value(name_or_path)?;
    for assignment in overrides {
        apply_override(&mut value, assignment)?;
    }
    let scenario = Scenario::from_value(value)?;
    let plan = scenario.build()?;
    Ok((scenario, plan))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_build() {
        for (name, _) in PRESETS {
            let value = load_value(name).unwrap();
            let plan = Scenario::from_value(value).unwrap().build().unwrap();
            assert!(plan.cycles > 0, "{name} has no cycles");
            assert!(plan.config.validate().is_ok());
        }
    }

    #[test]
    fn somc_preset_reaches_160_m_without_ambiguity() {
        let plan = Scenario::from_value(load_value("somc").unwrap())
            .unwrap()
            .build()
            .unwrap();
        let t = plan.targets[0];
        let far = t.initial_distance
            + t.radial_speed * (plan.cycles - 1) as f64 * plan.config.measurement_cycle;
        assert!(far > 159.0 && far < 161.0, "far edge {far}");
        assert!(plan.config.max_unambiguous_range() > far + 5.0);
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let mut value = load_value("somc").unwrap();
        value
            .as_table_mut()
            .unwrap()
            .get_mut("radar")
            .unwrap()
            .as_table_mut()
            .unwrap()
            .insert("bandwith_hz".into(), toml::Value::Float(1.0));
        let err = Scenario::from_value(value).unwrap_err().to_string();
        assert!(err.contains("bandwith_hz"), "error was: {err}");
    }

    #[test]
    fn build_errors_name_the_field() {
        let mut value = load_value("somc").unwrap();
        apply_override(&mut value, "scene.sensor_height_m=-1").unwrap();
        let err = Scenario::from_value(value)
            .unwrap()
            .build()
            .unwrap_err()
            .to_string();
        assert!(err.contains("sensor_height_m"), "error was: {err}");
    }

    #[test]
    fn overrides_reach_nested_and_indexed_keys() {
        let mut value = load_value("somc").unwrap();
        apply_override(&mut value, "targets.0.height_m=2.5").unwrap();
        apply_override(&mut value, "processing.cycles=99").unwrap();
        apply_override(&mut value, "processing.window=rectangular").unwrap();
        let scenario = Scenario::from_value(value).unwrap();
        assert_eq!(scenario.targets[0].height_m, 2.5);
        assert_eq!(scenario.processing.cycles, 99);
        let plan = scenario.build().unwrap();
        assert_eq!(plan.window, WindowKind::Rectangular);
    }

    #[test]
    fn float_override_on_integer_key_is_coerced() {
        let mut value = load_value("somc").unwrap();
        apply_override(&mut value, "processing.cycles=64.0").unwrap();
        let scenario = Scenario::from_value(value).unwrap();
        assert_eq!(scenario.processing.cycles, 64);
    }

    #[test]
    fn gate_radius_defaults_to_three_range_resolutions() {
        let plan = Scenario::from_value(load_value("somc").unwrap())
            .unwrap()
            .build()
            .unwrap();
        let expected = 3.0 * plan.config.range_resolution();
        assert!((plan.tracking.gate_radius - expected).abs() < 1e-12);
    }
}
