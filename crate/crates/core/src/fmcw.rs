//! Chirp-sequence FMCW simulation: beat-signal synthesis for multipath
//! scenes and two-stage range-Doppler processing.
//!
//! A measurement cycle carries one coherent processing interval (CPI) of
//! `ramps_per_cpi` identical up-chirps. After dechirping, a scatterer with
//! round-trip delay `tau` leaves a beat tone at `slope * tau` whose phase
//! advances from ramp to ramp with the radial motion; the first DFT over
//! fast time gives range, the second over slow time gives velocity. Within
//! one ramp the scene is frozen (stop-and-go approximation).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// In a graph that links std the inherent f64 methods shadow the trait;
// built alone as no_std the trait is what provides them.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::dsp::{windowed_fft, Fft, WindowKind};
use crate::geometry::{exact_path_delays, GroundModel, SceneGeometry, ScatteringModel};
use crate::SPEED_OF_LIGHT;

/// Range-FFT zero-padding used by [`range_doppler_map`]. Padding keeps the
/// three-point peak interpolation accurate across fractional-bin positions;
/// all physical readouts go through the stored bin spacings, so results do
/// not depend on this choice beyond the interpolation tolerance.
pub const DEFAULT_RANGE_PAD: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FmcwError {
    /// A radar parameter violates the config invariants.
    #[error("invalid radar config: {0}")]
    InvalidConfig(&'static str),
    /// A target parameter is out of range.
    #[error("invalid target: {0}")]
    InvalidTarget(&'static str),
    /// Scene became infeasible: a target reached the sensor plane.
    #[error("target {index} reached zero distance at t = {time} s")]
    TargetReachedSensor { index: usize, time: f64 },
    /// A scatterer sits beyond the unambiguous range of the sampling.
    #[error("echo at {range} m beyond unambiguous range {max} m")]
    RangeAmbiguous { range: f64, max: f64 },
    /// Geometry construction failed for a simulated target.
    #[error("scene geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Chirp-sequence waveform and sampling parameters.
///
/// Invariants checked by [`RadarConfig::validate`]: positive finite
/// waveform parameters, `ramp_duration <= ramp_repetition_interval`,
/// `ramps_per_cpi * ramp_repetition_interval <= measurement_cycle`,
/// `bandwidth < center_frequency`, `noise_power >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig {
    /// Carrier frequency, Hz.
    pub center_frequency: f64,
    /// Swept bandwidth, Hz; sets the range resolution c / (2 B).
    pub bandwidth: f64,
    /// Active ramp time, s.
    pub ramp_duration: f64,
    /// Ramps forming one CPI.
    pub ramps_per_cpi: usize,
    /// Ramp-to-ramp period, s.
    pub ramp_repetition_interval: f64,
    /// Cycle-to-cycle period, s; one CPI is processed per cycle.
    pub measurement_cycle: f64,
    /// Complex samples per ramp.
    pub samples_per_ramp: usize,
    /// Per-sample complex AWGN variance (both quadratures together).
    pub noise_power: f64,
}

impl RadarConfig {
    pub fn validate(&self) -> Result<(), FmcwError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.center_frequency) {
            return Err(FmcwError::InvalidConfig("center_frequency must be > 0"));
        }
        if !positive(self.bandwidth) {
            return Err(FmcwError::InvalidConfig("bandwidth must be > 0"));
        }
        if self.bandwidth >= self.center_frequency {
            return Err(FmcwError::InvalidConfig(
                "bandwidth must stay below the carrier",
            ));
        }
        if !positive(self.ramp_duration) {
            return Err(FmcwError::InvalidConfig("ramp_duration must be > 0"));
        }
        if !positive(self.ramp_repetition_interval) {
            return Err(FmcwError::InvalidConfig(
                "ramp_repetition_interval must be > 0",
            ));
        }
        if self.ramp_duration > self.ramp_repetition_interval {
            return Err(FmcwError::InvalidConfig(
                "ramp_duration exceeds ramp_repetition_interval",
            ));
        }
        if self.ramps_per_cpi == 0 {
            return Err(FmcwError::InvalidConfig("ramps_per_cpi must be >= 1"));
        }
        if self.samples_per_ramp < 2 {
            return Err(FmcwError::InvalidConfig("samples_per_ramp must be >= 2"));
        }
        if !positive(self.measurement_cycle) {
            return Err(FmcwError::InvalidConfig("measurement_cycle must be > 0"));
        }
        if self.cpi_duration() > self.measurement_cycle * (1.0 + 1e-12) {
            return Err(FmcwError::InvalidConfig(
                "CPI does not fit into measurement_cycle",
            ));
        }
        if !self.noise_power.is_finite() || self.noise_power < 0.0 {
            return Err(FmcwError::InvalidConfig("noise_power must be >= 0"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency
    }

    /// Range resolution c / (2 B), m.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    /// CPI duration `ramps_per_cpi * ramp_repetition_interval`, s.
    pub fn cpi_duration(&self) -> f64 {
        self.ramps_per_cpi as f64 * self.ramp_repetition_interval
    }

    /// Fast-time sample rate, Hz.
    pub fn sample_rate(&self) -> f64 {
        self.samples_per_ramp as f64 / self.ramp_duration
    }

    /// Chirp slope B / T_ramp, Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.ramp_duration
    }

    /// Largest range whose beat frequency stays below Nyquist,
    /// c * samples_per_ramp / (4 B).
    pub fn max_unambiguous_range(&self) -> f64 {
        SPEED_OF_LIGHT * self.samples_per_ramp as f64 / (4.0 * self.bandwidth)
    }

    /// Largest one-sided velocity before Doppler wraps, lambda / (4 T_pri).
    pub fn max_unambiguous_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.ramp_repetition_interval)
    }

    /// Full width of the Doppler ambiguity interval, lambda / (2 T_pri).
    pub fn velocity_ambiguity_span(&self) -> f64 {
        self.wavelength() / (2.0 * self.ramp_repetition_interval)
    }
}

/// One simulated scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    /// Height above ground, m.
    pub height: f64,
    /// Horizontal distance at t = 0, m.
    pub initial_distance: f64,
    /// Radial speed, m/s; positive recedes from the sensor.
    pub radial_speed: f64,
    /// Echo amplitude scale before the 1/d^2 decay.
    pub amplitude: f64,
    pub scattering: ScatteringModel,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<(), FmcwError> {
        if !self.height.is_finite() || self.height < 0.0 {
            return Err(FmcwError::InvalidTarget("height must be >= 0"));
        }
        if !self.initial_distance.is_finite() || self.initial_distance <= 0.0 {
            return Err(FmcwError::InvalidTarget("initial_distance must be > 0"));
        }
        if !self.radial_speed.is_finite() {
            return Err(FmcwError::InvalidTarget("radial_speed must be finite"));
        }
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(FmcwError::InvalidTarget("amplitude must be >= 0"));
        }
        Ok(())
    }
}

/// One CPI of complex beat samples. Carries the config it was sampled with
/// (so downstream transforms know their bin scalings) and the per-ramp
/// ground-truth target distances, kept for validation and never read by the
/// processing chain.
#[derive(Debug, Clone)]
pub struct Cpi {
    data: Vec<Complex64>,
    config: RadarConfig,
    /// Start time of the first ramp, s.
    pub timestamp: f64,
    truth: Vec<Vec<f64>>,
}

impl Cpi {
    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn ramps(&self) -> usize {
        self.config.ramps_per_cpi
    }

    pub fn samples_per_ramp(&self) -> usize {
        self.config.samples_per_ramp
    }

    pub fn ramp(&self, n: usize) -> &[Complex64] {
        let s = self.config.samples_per_ramp;
        &self.data[n * s..(n + 1) * s]
    }

    /// Ground-truth horizontal distance of `target` during ramp `n`.
    pub fn truth_distance(&self, target: usize, n: usize) -> f64 {
        self.truth[target][n]
    }

    pub fn truth_targets(&self) -> usize {
        self.truth.len()
    }

    pub fn beat_energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// View of ramps `start..start + count` as a CPI of its own.
    ///
    /// A fast scene migrates through range cells within a long CPI,
    /// smearing its range-Doppler peak; detecting on a leading slice
    /// short enough to hold still, while reading amplitudes off the full
    /// CPI, sidesteps that without touching the samples.
    ///
    /// Panics when the ramp range leaves the CPI or `count` is zero.
    pub fn sub_cpi(&self, start: usize, count: usize) -> Cpi {
        assert!(count > 0, "sub-CPI needs at least one ramp");
        assert!(
            start + count <= self.config.ramps_per_cpi,
            "ramps {}..{} outside CPI of {}",
            start,
            start + count,
            self.config.ramps_per_cpi
        );
        let s = self.config.samples_per_ramp;
        let mut config = self.config;
        config.ramps_per_cpi = count;
        Cpi {
            data: self.data[start * s..(start + count) * s].to_vec(),
            config,
            timestamp: self.timestamp
                + start as f64 * self.config.ramp_repetition_interval,
            truth: self
                .truth
                .iter()
                .map(|t| t[start..start + count].to_vec())
                .collect(),
        }
    }
}

/// Range-Doppler plane of one CPI.
///
/// Rows run over Doppler with zero velocity in the middle row (receding
/// targets below it, approaching above), columns over range. All physical
/// readouts go through the stored bin spacings, so the FFT lengths behind
/// the map stay an implementation detail.
#[derive(Debug, Clone)]
pub struct RangeDopplerMap {
    data: Vec<Complex64>,
    doppler_bins: usize,
    range_bins: usize,
    /// Meters per range column.
    pub range_bin_spacing: f64,
    /// Meters per second per Doppler row.
    pub velocity_bin_spacing: f64,
    /// Physical range resolution c / (2 B), independent of padding.
    pub range_resolution: f64,
}

impl RangeDopplerMap {
    pub fn doppler_bins(&self) -> usize {
        self.doppler_bins
    }

    pub fn range_bins(&self) -> usize {
        self.range_bins
    }

    pub fn value(&self, doppler_row: usize, range_col: usize) -> Complex64 {
        self.data[doppler_row * self.range_bins + range_col]
    }

    pub fn magnitude(&self, doppler_row: usize, range_col: usize) -> f64 {
        self.value(doppler_row, range_col).norm()
    }

    /// Row index of zero radial velocity.
    pub fn zero_velocity_row(&self) -> usize {
        self.doppler_bins / 2
    }

    /// Range at a (possibly fractional) column index.
    pub fn bin_to_range(&self, col: f64) -> f64 {
        col * self.range_bin_spacing
    }

    /// Receding-positive radial velocity at a (possibly fractional) row.
    pub fn bin_to_velocity(&self, row: f64) -> f64 {
        (self.zero_velocity_row() as f64 - row) * self.velocity_bin_spacing
    }

    pub fn total_energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }
}

/// Complex tone accumulated through a phase rotator; exact start phase,
/// one complex multiply per sample.
fn add_tone(buf: &mut [Complex64], amplitude: Complex64, freq_per_sample: f64) {
    let rot = Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * freq_per_sample);
    let mut z = amplitude;
    for slot in buf.iter_mut() {
        *slot += z;
        z *= rot;
    }
}

/// Synthesize the beat samples of one CPI starting at `start_time`.
///
/// Target distances advance as `initial_distance + radial_speed * t` with
/// `t` taken at each ramp start. Every target contributes its path
/// combinations per [`ScatteringModel`]: round-trip weights 1, 2 gamma and
/// gamma^2 on direct/direct, mixed and bounced/bounced (the mixed term
/// absent for retroreflectors). Each path is a beat tone at `slope * tau`
/// from the exact per-ramp delays, scaled by `amplitude / d^2`. Tone
/// phases are anchored so that the phase a spectral peak reports
/// corresponds to the center frequency itself. Complex AWGN of variance
/// `noise_power` is added when nonzero; `rng` is untouched otherwise.
pub fn synthesize_cpi<R: Rng + ?Sized>(
    config: &RadarConfig,
    targets: &[TargetSpec],
    ground: &GroundModel,
    sensor_height: f64,
    start_time: f64,
    rng: &mut R,
) -> Result<Cpi, FmcwError> {
    config.validate()?;
    for t in targets {
        t.validate()?;
    }

    let n_ramps = config.ramps_per_cpi;
    let n_samples = config.samples_per_ramp;
    let dt = config.ramp_duration / n_samples as f64;
    let slope = config.slope();
    // Beat tones sit at the positive frequency slope * tau while keeping
    // the IQ dechirp phase -2 pi f tau, so a spectral peak reports the
    // phase at B/2 below the anchor frequency. Anchoring at the upper
    // sweep edge therefore makes the reported phase, and with it the
    // multipath modulation and the ramp-to-ramp Doppler progression,
    // track the center frequency exactly.
    let f_anchor = config.center_frequency + 0.5 * config.bandwidth;
    let r_max = config.max_unambiguous_range();
    let gamma = ground.reflection_coefficient();
    let one = Complex64::new(1.0, 0.0);

    let mut data = vec![Complex64::new(0.0, 0.0); n_ramps * n_samples];
    let mut truth = vec![vec![0.0; n_ramps]; targets.len()];

    for (ti, target) in targets.iter().enumerate() {
        for n in 0..n_ramps {
            let t_ramp = start_time + n as f64 * config.ramp_repetition_interval;
            let d = target.initial_distance + target.radial_speed * t_ramp;
            if d <= 0.0 {
                return Err(FmcwError::TargetReachedSensor {
                    index: ti,
                    time: t_ramp,
                });
            }
            truth[ti][n] = d;

            let geometry = SceneGeometry::new(sensor_height, target.height, d)?;
            let delays = exact_path_delays(&geometry);
            let echo_range = SPEED_OF_LIGHT * delays.indirect;
            if echo_range >= r_max {
                return Err(FmcwError::RangeAmbiguous {
                    range: echo_range,
                    max: r_max,
                });
            }

            let direct_rt = 2.0 * delays.direct;
            let mixed_rt = delays.direct + delays.indirect;
            let bounced_rt = 2.0 * delays.indirect;
            let iso;
            let retro;
            let paths: &[(Complex64, f64)] = match target.scattering {
                ScatteringModel::Isotropic => {
                    iso = [
                        (one, direct_rt),
                        (2.0 * gamma, mixed_rt),
                        (gamma * gamma, bounced_rt),
                    ];
                    &iso
                }
                ScatteringModel::Retroreflector => {
                    retro = [(one, direct_rt), (gamma * gamma, bounced_rt)];
                    &retro
                }
            };

            let scale = target.amplitude / (d * d);
            let buf = &mut data[n * n_samples..(n + 1) * n_samples];
            for (weight, tau) in paths {
                let carrier =
                    Complex64::from_polar(scale, -2.0 * core::f64::consts::PI * f_anchor * tau);
                add_tone(buf, weight * carrier, slope * tau * dt);
            }
        }
    }

    if config.noise_power > 0.0 {
        let sigma = (config.noise_power / 2.0).sqrt();
        for slot in data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *slot += Complex64::new(sigma * re, sigma * im);
        }
    }

    Ok(Cpi {
        data,
        config: *config,
        timestamp: start_time,
        truth,
    })
}

/// Windowed range DFT of one ramp, zero-padded to the next power of two.
pub fn range_profile(samples: &[Complex64], window: WindowKind) -> Vec<Complex64> {
    windowed_fft(samples, window, 1)
}

/// Range profile with an extra power-of-two padding factor for denser
/// interpolation grids.
pub fn range_profile_padded(
    samples: &[Complex64],
    window: WindowKind,
    pad_factor: usize,
) -> Vec<Complex64> {
    windowed_fft(samples, window, pad_factor)
}

/// Meters per range bin of a profile of length `n_fft`.
pub fn range_bin_spacing(config: &RadarConfig, n_fft: usize) -> f64 {
    SPEED_OF_LIGHT * config.samples_per_ramp as f64 / (2.0 * config.bandwidth * n_fft as f64)
}

/// Two-stage range-Doppler transform with the default range padding.
/// `window` tapers the fast-time stage; the slow-time stage is rectangular.
pub fn range_doppler_map(cpi: &Cpi, window: WindowKind) -> RangeDopplerMap {
    range_doppler_map_padded(cpi, window, DEFAULT_RANGE_PAD)
}

/// Range-Doppler transform with an explicit range padding factor.
pub fn range_doppler_map_padded(
    cpi: &Cpi,
    window: WindowKind,
    range_pad: usize,
) -> RangeDopplerMap {
    let config = cpi.config();
    let n_ramps = cpi.ramps();
    let n_range = config.samples_per_ramp.next_power_of_two() * range_pad;
    let n_doppler = n_ramps.next_power_of_two();

    let mut profiles = Vec::with_capacity(n_ramps);
    for n in 0..n_ramps {
        profiles.push(range_profile_padded(cpi.ramp(n), window, range_pad));
    }

    let doppler_fft = Fft::new(n_doppler);
    let mut data = vec![Complex64::new(0.0, 0.0); n_doppler * n_range];
    let mut column = vec![Complex64::new(0.0, 0.0); n_doppler];
    let half = n_doppler / 2;
    for col in 0..n_range {
        for slot in column.iter_mut() {
            *slot = Complex64::new(0.0, 0.0);
        }
        for (n, profile) in profiles.iter().enumerate() {
            column[n] = profile[col];
        }
        doppler_fft.process(&mut column);
        // Store rows with zero Doppler shifted into the middle.
        for (k, value) in column.iter().enumerate() {
            let row = (k + half) % n_doppler;
            data[row * n_range + col] = *value;
        }
    }

    RangeDopplerMap {
        data,
        doppler_bins: n_doppler,
        range_bins: n_range,
        range_bin_spacing: range_bin_spacing(config, n_range),
        velocity_bin_spacing: config.wavelength()
            / (2.0 * n_doppler as f64 * config.ramp_repetition_interval),
        range_resolution: config.range_resolution(),
    }
}
