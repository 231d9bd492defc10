//! Target detection, cycle-to-cycle tracking and amplitude-track
//! extraction.
//!
//! Two sampling modes feed the height estimation. Once per measurement
//! cycle the strongest echo of a tracked object yields one amplitude sample
//! (mode [`SamplingMode::PerCycle`]); the samples sit wherever the motion
//! put the object, so they are nonequidistant over reciprocal distance but
//! may span a long interval. Alternatively every ramp of a single CPI
//! yields one sample (mode [`SamplingMode::PerRamp`]); the span is short
//! but sampling is equidistant and an independent estimate exists per
//! cycle.

use alloc::vec::Vec;

// In a graph that links std the inherent f64 methods shadow the trait;
// built alone as no_std the trait is what provides them.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::dsp::{parabolic_vertex, WindowKind};
use crate::fmcw::{range_bin_spacing, range_profile_padded, Cpi, RangeDopplerMap, DEFAULT_RANGE_PAD};
use crate::{Complex64, SPEED_OF_LIGHT};

/// Minimum amplitude samples before spectral processing is worthwhile.
pub const MIN_SPECTRAL_SAMPLES: usize = 8;

/// Peaks closer than this many range resolutions to a stronger peak are
/// treated as its sidelobes unless they hold a comparable amplitude.
const NMS_RANGE_FACTOR: f64 = 4.0;
/// Doppler-row distance of the sidelobe suppression neighborhood.
const NMS_DOPPLER_ROWS: usize = 3;
/// Amplitude ratio above which a nearby peak counts as a separate target.
/// Sits just above the -13 dB first sidelobe of a rectangular window.
const NMS_AMPLITUDE_RATIO: f64 = 0.25;
/// Fraction of the global maximum below which no cell qualifies. On a
/// noise-free map the median collapses toward numerical dust and distant
/// window sidelobes would otherwise pass the adaptive floor.
const RELATIVE_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    /// Too few observations for spectral processing.
    #[error("only {got} amplitude samples, need at least {need}")]
    InsufficientObservation { got: usize, need: usize },
    /// Amplitude samples must move strictly through distance.
    #[error("track distances are not strictly monotonic")]
    NonMonotonicDistances,
    /// A sample carries a non-finite or non-positive distance.
    #[error("invalid amplitude sample: {0}")]
    InvalidSample(&'static str),
    /// The detection's range gate leaves the processed profile.
    #[error("range gate at {range} m outside the profile")]
    RangeGateOutOfBounds { range: f64 },
}

/// One detected echo in a range-Doppler map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Interpolated slant range, m.
    pub range: f64,
    /// Receding-positive radial velocity, m/s. Ambiguous modulo the
    /// waveform's ambiguity span; see [`unwrap_velocity`].
    pub radial_velocity: f64,
    /// Interpolated peak magnitude.
    pub amplitude: f64,
    /// Measurement cycle the detection belongs to.
    pub cycle_index: usize,
}

/// Local maxima of the map above an adaptive floor.
///
/// The floor is `threshold_factor` times the median cell magnitude (the
/// median tracks the noise level since targets occupy few cells), but
/// never below [`RELATIVE_FLOOR`] of the map's maximum. A peak
/// must beat its eight neighbors (Doppler wraps, the range border columns
/// are skipped), and nearby weaker maxima within a few range resolutions
/// are folded into the strongest one of their region so window sidelobes
/// do not multiply detections. Range and Doppler positions and the
/// amplitude are refined by three-point parabolic interpolation.
pub fn detect_targets(
    map: &RangeDopplerMap,
    threshold_factor: f64,
    cycle_index: usize,
) -> Vec<Detection> {
    let rows = map.doppler_bins();
    let cols = map.range_bins();
    let mut mags = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            mags.push(map.magnitude(r, c));
        }
    }

    let mut scratch = mags.clone();
    let mid = scratch.len() / 2;
    let (_, median, _) = scratch.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let global_max = mags.iter().fold(0.0_f64, |a, &b| a.max(b));
    let threshold = (threshold_factor * *median).max(RELATIVE_FLOOR * global_max);

    // Strict local maxima with an index tie-break so a flat plateau yields
    // exactly one candidate.
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..rows {
        for c in 1..cols - 1 {
            let m = mags[r * cols + c];
            if !(m > threshold) || m == 0.0 {
                continue;
            }
            let mut beaten = false;
            for dr in [rows - 1, 0, 1] {
                for dc in [cols - 1, 0, 1usize] {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let nr = (r + dr) % rows;
                    let nc = (c + dc) % cols;
                    let nm = mags[nr * cols + nc];
                    let nidx = nr * cols + nc;
                    if nm > m || (nm == m && nidx < r * cols + c) {
                        beaten = true;
                        break;
                    }
                }
                if beaten {
                    break;
                }
            }
            if !beaten {
                candidates.push((r, c, m));
            }
        }
    }

    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    // Sidelobe suppression: strongest first, weaker nearby maxima survive
    // only with a comparable amplitude.
    let nms_cols = (NMS_RANGE_FACTOR * map.range_resolution / map.range_bin_spacing) as usize;
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    'cand: for (r, c, m) in candidates {
        for (kr, kc, km) in &kept {
            let row_dist = {
                let d = r.abs_diff(*kr);
                d.min(rows - d)
            };
            if row_dist <= NMS_DOPPLER_ROWS
                && c.abs_diff(*kc) <= nms_cols
                && m < NMS_AMPLITUDE_RATIO * km
            {
                continue 'cand;
            }
        }
        kept.push((r, c, m));
    }

    let mut detections: Vec<Detection> = kept
        .into_iter()
        .map(|(r, c, _)| {
            let (off_r, amplitude) =
                parabolic_vertex(mags[r * cols + c - 1], mags[r * cols + c], mags[r * cols + c + 1]);
            let up = (r + rows - 1) % rows;
            let down = (r + 1) % rows;
            let (off_d, _) =
                parabolic_vertex(mags[up * cols + c], mags[r * cols + c], mags[down * cols + c]);
            Detection {
                range: map.bin_to_range(c as f64 + off_r),
                radial_velocity: map.bin_to_velocity(r as f64 + off_d),
                amplitude,
                cycle_index,
            }
        })
        .collect();
    detections.sort_by(|a, b| a.range.total_cmp(&b.range));
    detections
}

/// Resolve a Doppler-ambiguous velocity against a coarse reference.
///
/// Chirp-sequence Doppler gives the velocity only modulo `span`; the
/// range progression over cycles gives a crude but unambiguous rate.
/// Returns the alias of `ambiguous` closest to `reference`.
pub fn unwrap_velocity(ambiguous: f64, reference: f64, span: f64) -> f64 {
    ambiguous + ((reference - ambiguous) / span).round() * span
}

/// Tracker parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingParams {
    /// Association gate radius in the (range, velocity * cycle) metric, m.
    /// A practical default is three range resolutions.
    pub gate_radius: f64,
    /// Measurement cycle period, s; scales velocity into the gate metric
    /// and drives prediction.
    pub cycle_time: f64,
    /// Consecutive missed cycles before a track retires.
    pub coast_limit: u32,
    /// Doppler ambiguity span of the waveform, m/s. Until a track has two
    /// points its Doppler velocity may be off by multiples of this, so the
    /// gate is widened accordingly; `None` disables the widening.
    pub velocity_ambiguity: Option<f64>,
}

/// One tracked object: its detection history and coasting state.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u32,
    history: Vec<Detection>,
    /// Consecutive cycles without an update.
    pub missed: u32,
    /// A retired track no longer associates but keeps its history.
    pub retired: bool,
}

impl Track {
    fn start(id: u32, detection: Detection) -> Self {
        Self {
            id,
            history: alloc::vec![detection],
            missed: 0,
            retired: false,
        }
    }

    pub fn history(&self) -> &[Detection] {
        &self.history
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn first(&self) -> &Detection {
        &self.history[0]
    }

    pub fn last(&self) -> &Detection {
        self.history.last().expect("tracks hold >= 1 detection")
    }

    /// Unambiguous range rate from the last two detections, m/s.
    pub fn slope_velocity(&self, cycle_time: f64) -> Option<f64> {
        if self.history.len() < 2 {
            return None;
        }
        let a = &self.history[self.history.len() - 2];
        let b = self.last();
        let dt = (b.cycle_index - a.cycle_index) as f64 * cycle_time;
        (dt > 0.0).then(|| (b.range - a.range) / dt)
    }

    fn predicted_range(&self, cycle: usize, cycle_time: f64) -> f64 {
        let last = self.last();
        let dt = cycle.saturating_sub(last.cycle_index) as f64 * cycle_time;
        let v = self
            .slope_velocity(cycle_time)
            .unwrap_or(last.radial_velocity);
        last.range + v * dt
    }
}

/// One association round: nearest-neighbor matching inside the gate,
/// strongest pairs first by metric distance. A detection left over inside
/// some live gate is a duplicate of an already-tracked object (a split or
/// straddling peak) and is dropped; only detections outside every gate
/// spawn tracks. Unmatched tracks coast and retire past the coast limit.
/// Consumes and returns the track set so callers thread it through cycles.
pub fn update_tracks(
    mut tracks: Vec<Track>,
    detections: &[Detection],
    params: &TrackingParams,
) -> Vec<Track> {
    // Metric distances of all candidate pairs inside the gate.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let mut det_gated = alloc::vec![false; detections.len()];
    for (ti, track) in tracks.iter().enumerate() {
        if track.retired {
            continue;
        }
        for (di, det) in detections.iter().enumerate() {
            let dt_cycles = det.cycle_index.saturating_sub(track.last().cycle_index);
            let dt = dt_cycles as f64 * params.cycle_time;
            let dr = det.range - track.predicted_range(det.cycle_index, params.cycle_time);
            let dv = (det.radial_velocity - track.last().radial_velocity) * params.cycle_time;
            let dist = (dr * dr + dv * dv).sqrt();
            let mut gate = params.gate_radius;
            if track.history.len() < 2 {
                if let Some(span) = params.velocity_ambiguity {
                    // The single Doppler velocity may alias; widen by two
                    // ambiguity steps of drift.
                    gate += 2.0 * span * dt;
                }
            }
            if dist <= gate {
                pairs.push((dist, ti, di));
                det_gated[di] = true;
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut track_taken = alloc::vec![false; tracks.len()];
    let mut det_taken = alloc::vec![false; detections.len()];
    for (_, ti, di) in pairs {
        if track_taken[ti] || det_taken[di] {
            continue;
        }
        track_taken[ti] = true;
        det_taken[di] = true;
        tracks[ti].history.push(detections[di]);
        tracks[ti].missed = 0;
    }

    // Every call is one measurement cycle, so an empty detection list
    // still ages the live tracks.
    for (ti, track) in tracks.iter_mut().enumerate() {
        if track.retired || track_taken[ti] {
            continue;
        }
        track.missed += 1;
        if track.missed > params.coast_limit {
            track.retired = true;
        }
    }

    let mut next_id = tracks.iter().map(|t| t.id + 1).max().unwrap_or(0);
    for (di, det) in detections.iter().enumerate() {
        if !det_taken[di] && !det_gated[di] {
            tracks.push(Track::start(next_id, *det));
            next_id += 1;
        }
    }
    tracks
}

/// How an amplitude track was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// One sample per measurement cycle from the tracked detection.
    PerCycle,
    /// One sample per ramp within a single CPI.
    PerRamp,
}

/// One amplitude observation at a known distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmSample {
    /// Slant range of the echo, m.
    pub distance: f64,
    pub amplitude: f64,
}

/// Echo amplitude over distance for one object, the input to the height
/// spectra.
///
/// Invariants enforced on construction: at least
/// [`MIN_SPECTRAL_SAMPLES`] samples, strictly monotonic positive
/// distances (either direction), finite amplitudes.
#[derive(Debug, Clone)]
pub struct AmTrack {
    samples: Vec<AmSample>,
    pub source: SamplingMode,
    /// Sensor mounting height, m.
    pub sensor_height: f64,
    /// Carrier wavelength, m.
    pub wavelength: f64,
}

impl AmTrack {
    pub fn new(
        samples: Vec<AmSample>,
        source: SamplingMode,
        sensor_height: f64,
        wavelength: f64,
    ) -> Result<Self, ExtractError> {
        if samples.len() < MIN_SPECTRAL_SAMPLES {
            return Err(ExtractError::InsufficientObservation {
                got: samples.len(),
                need: MIN_SPECTRAL_SAMPLES,
            });
        }
        for s in &samples {
            if !s.distance.is_finite() || s.distance <= 0.0 {
                return Err(ExtractError::InvalidSample("distance must be > 0"));
            }
            if !s.amplitude.is_finite() {
                return Err(ExtractError::InvalidSample("amplitude must be finite"));
            }
        }
        let increasing = samples[1].distance > samples[0].distance;
        for pair in samples.windows(2) {
            let ok = if increasing {
                pair[1].distance > pair[0].distance
            } else {
                pair[1].distance < pair[0].distance
            };
            if !ok {
                return Err(ExtractError::NonMonotonicDistances);
            }
        }
        Ok(Self {
            samples,
            source,
            sensor_height,
            wavelength,
        })
    }

    pub fn samples(&self) -> &[AmSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        let a = self.samples[0].distance;
        let b = self.samples[self.samples.len() - 1].distance;
        a.min(b)
    }

    pub fn max_distance(&self) -> f64 {
        let a = self.samples[0].distance;
        let b = self.samples[self.samples.len() - 1].distance;
        a.max(b)
    }

    /// Midpoint of the observed distance interval, m.
    pub fn center_distance(&self) -> f64 {
        0.5 * (self.min_distance() + self.max_distance())
    }

    /// Length of the observed distance interval, m.
    pub fn interval_length(&self) -> f64 {
        self.max_distance() - self.min_distance()
    }

    /// Replace the amplitudes, keeping distances and metadata.
    pub(crate) fn with_amplitudes(&self, amplitudes: &[f64]) -> Self {
        let samples = self
            .samples
            .iter()
            .zip(amplitudes)
            .map(|(s, a)| AmSample {
                distance: s.distance,
                amplitude: *a,
            })
            .collect();
        Self {
            samples,
            source: self.source,
            sensor_height: self.sensor_height,
            wavelength: self.wavelength,
        }
    }
}

/// Amplitude track of a finished per-cycle track.
///
/// The range readout degrades where the modulation bottoms out and can
/// step against the motion there; such samples are dropped so the track
/// stays strictly monotonic along its overall direction. The loss is
/// immaterial: they sit at pattern minima where the abscissa is least
/// trustworthy to begin with.
pub fn am_track_from_cycles(
    track: &Track,
    sensor_height: f64,
    wavelength: f64,
) -> Result<AmTrack, ExtractError> {
    let receding = track.last().range >= track.first().range;
    let mut samples: Vec<AmSample> = Vec::with_capacity(track.len());
    for d in track.history() {
        let keep = match samples.last() {
            Some(prev) if receding => d.range > prev.distance,
            Some(prev) => d.range < prev.distance,
            None => true,
        };
        if keep {
            samples.push(AmSample {
                distance: d.range,
                amplitude: d.amplitude,
            });
        }
    }
    AmTrack::new(samples, SamplingMode::PerCycle, sensor_height, wavelength)
}

/// Per-ramp amplitude track of one CPI around a detection.
///
/// The per-ramp distances are the arithmetic progression
/// `d0 + v * n * t_pri` with `d0` refined from the first ramp's profile
/// near the detection and `v` the detection's radial velocity (unwrap it
/// first if the scene moves faster than the ambiguity). Each amplitude is
/// the ramp's spectrum evaluated exactly at the predicted distance: the
/// gate follows the motion even across range cells, and reading off-grid
/// avoids the sampling-phase ripple a cell-quantized readout would
/// imprint on the modulation.
pub fn am_track_from_cpi(
    cpi: &Cpi,
    detection: &Detection,
    sensor_height: f64,
) -> Result<AmTrack, ExtractError> {
    let config = cpi.config();
    let n_ramps = cpi.ramps();
    if n_ramps < MIN_SPECTRAL_SAMPLES {
        return Err(ExtractError::InsufficientObservation {
            got: n_ramps,
            need: MIN_SPECTRAL_SAMPLES,
        });
    }

    let pad = DEFAULT_RANGE_PAD;
    let n_fft = config.samples_per_ramp.next_power_of_two() * pad;
    let spacing = range_bin_spacing(config, n_fft);
    let max_range = n_fft as f64 * spacing;
    let v = detection.radial_velocity;
    let t_pri = config.ramp_repetition_interval;

    // Refine the start distance on the first ramp: hill-climb from the
    // detection's cell to the local peak, then interpolate.
    let profile0 = range_profile_padded(cpi.ramp(0), WindowKind::Rectangular, pad);
    let start_cell = (detection.range / spacing).round() as isize;
    if start_cell < 1 || start_cell as usize >= n_fft - 1 {
        return Err(ExtractError::RangeGateOutOfBounds {
            range: detection.range,
        });
    }
    let mut cell = start_cell as usize;
    let search = 2 * pad;
    let lo = cell.saturating_sub(search).max(1);
    let hi = (cell + search).min(n_fft - 2);
    for c in lo..=hi {
        if profile0[c].norm() > profile0[cell].norm() {
            cell = c;
        }
    }
    let (off, _) = parabolic_vertex(
        profile0[cell - 1].norm(),
        profile0[cell].norm(),
        profile0[cell + 1].norm(),
    );
    let d0 = (cell as f64 + off) * spacing;

    // Beat frequency of a one-way distance, as cycles per sample.
    let cycles_per_meter = 2.0 * config.bandwidth / (SPEED_OF_LIGHT * config.samples_per_ramp as f64);

    let mut samples = Vec::with_capacity(n_ramps);
    for n in 0..n_ramps {
        let d_n = d0 + v * n as f64 * t_pri;
        if d_n <= 0.0 || d_n >= max_range {
            return Err(ExtractError::RangeGateOutOfBounds { range: d_n });
        }
        let nu = cycles_per_meter * d_n;
        let step = Complex64::from_polar(1.0, -2.0 * core::f64::consts::PI * nu);
        let mut rotator = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for x in cpi.ramp(n) {
            acc += x * rotator;
            rotator *= step;
        }
        samples.push(AmSample {
            distance: d_n,
            amplitude: acc.norm(),
        });
    }

    AmTrack::new(
        samples,
        SamplingMode::PerRamp,
        sensor_height,
        config.wavelength(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmcw::{range_doppler_map, synthesize_cpi, RadarConfig, TargetSpec};
    use crate::geometry::{
        exact_path_delays, propagation_factor, GroundModel, SceneGeometry, ScatteringModel,
    };
    use crate::Complex64;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_config() -> RadarConfig {
        RadarConfig {
            center_frequency: 76.5e9,
            bandwidth: 1.0e9,
            ramp_duration: 25.6e-6,
            ramps_per_cpi: 16,
            ramp_repetition_interval: 100e-6,
            measurement_cycle: 55.6e-3,
            samples_per_ramp: 512,
            noise_power: 0.0,
        }
    }

    fn free_space() -> GroundModel {
        GroundModel::new(Complex64::new(0.0, 0.0)).unwrap()
    }

    fn no_rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    fn det(range: f64, velocity: f64, cycle: usize) -> Detection {
        Detection {
            range,
            radial_velocity: velocity,
            amplitude: 1.0,
            cycle_index: cycle,
        }
    }

    fn params() -> TrackingParams {
        TrackingParams {
            gate_radius: 0.45,
            cycle_time: 55.6e-3,
            coast_limit: 5,
            velocity_ambiguity: None,
        }
    }

    #[test]
    fn single_target_yields_single_detection() {
        let target = TargetSpec {
            height: 0.0,
            initial_distance: 20.0,
            radial_speed: 0.0,
            amplitude: 1.0,
            scattering: ScatteringModel::Isotropic,
        };
        let cpi = synthesize_cpi(&test_config(), &[target], &free_space(), 1.3, 0.0, &mut no_rng())
            .unwrap();
        let map = range_doppler_map(&cpi, crate::dsp::WindowKind::Rectangular);
        let detections = detect_targets(&map, 8.0, 0);
        assert_eq!(detections.len(), 1, "sidelobes must not multiply detections");
        let d = &detections[0];
        assert_relative_eq!(d.range, (400.0_f64 + 1.69).sqrt(), max_relative = 1e-3);
        assert!(d.radial_velocity.abs() < map.velocity_bin_spacing);
    }

    #[test]
    fn empty_scene_yields_no_detections() {
        let cpi =
            synthesize_cpi(&test_config(), &[], &free_space(), 1.3, 0.0, &mut no_rng()).unwrap();
        let map = range_doppler_map(&cpi, crate::dsp::WindowKind::Rectangular);
        assert!(detect_targets(&map, 8.0, 0).is_empty());
    }

    #[test]
    fn doppler_separates_equal_range_targets() {
        // Same range cell, velocities two Doppler rows apart.
        let mut a = TargetSpec {
            height: 0.0,
            initial_distance: 20.0,
            radial_speed: 0.0,
            amplitude: 1.0,
            scattering: ScatteringModel::Isotropic,
        };
        let mut b = a;
        b.radial_speed = 2.45; // two rows at 1.22 m/s per row
        a.radial_speed = -2.45;
        let cpi = synthesize_cpi(&test_config(), &[a, b], &free_space(), 1.3, 0.0, &mut no_rng())
            .unwrap();
        let map = range_doppler_map(&cpi, crate::dsp::WindowKind::Rectangular);
        let detections = detect_targets(&map, 8.0, 0);
        assert_eq!(detections.len(), 2);
        let mut vs: Vec<f64> = detections.iter().map(|d| d.radial_velocity).collect();
        vs.sort_by(f64::total_cmp);
        assert_relative_eq!(vs[0], -2.45, max_relative = 0.3);
        assert_relative_eq!(vs[1], 2.45, max_relative = 0.3);
    }

    #[test]
    fn track_forms_and_follows_across_cycles() {
        let mut tracks = Vec::new();
        let dt = 55.6e-3;
        for k in 0..20 {
            let range = 30.0 + 2.8 * dt * k as f64;
            tracks = update_tracks(tracks, &[det(range, 2.8, k)], &params());
        }
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 20);
        assert!(!tracks[0].retired);
        assert_relative_eq!(
            tracks[0].slope_velocity(dt).unwrap(),
            2.8,
            max_relative = 1e-9
        );
    }

    #[test]
    fn gap_within_coast_limit_keeps_the_track() {
        let mut tracks = Vec::new();
        let dt = 55.6e-3;
        for k in 0..20usize {
            let dets = if (5..8).contains(&k) {
                alloc::vec![]
            } else {
                alloc::vec![det(30.0 + 2.8 * dt * k as f64, 2.8, k)]
            };
            tracks = update_tracks(tracks, &dets, &params());
        }
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 17);
        assert!(!tracks[0].retired);
    }

    #[test]
    fn long_outage_retires_and_respawns() {
        let mut tracks = Vec::new();
        let dt = 55.6e-3;
        for k in 0..30usize {
            let dets = if (5..15).contains(&k) {
                alloc::vec![]
            } else {
                alloc::vec![det(30.0 + 2.8 * dt * k as f64, 2.8, k)]
            };
            tracks = update_tracks(tracks, &dets, &params());
        }
        assert_eq!(tracks.len(), 2);
        assert!(tracks[0].retired);
        assert!(!tracks[1].retired);
        assert_ne!(tracks[0].id, tracks[1].id);
    }

    #[test]
    fn split_peak_inside_gate_spawns_no_rival() {
        // A peak straddling two range cells can come back as two nearby
        // detections; the leftover one must not seed a competing track.
        let mut tracks = Vec::new();
        let dt = 55.6e-3;
        for k in 0..12usize {
            let range = 30.0 + 2.8 * dt * k as f64;
            let dets = if k >= 6 {
                alloc::vec![det(range, 2.8, k), det(range + 0.3, 2.8, k)]
            } else {
                alloc::vec![det(range, 2.8, k)]
            };
            tracks = update_tracks(tracks, &dets, &params());
        }
        assert_eq!(tracks.len(), 1, "duplicates inside the gate spawned rivals");
        assert_eq!(tracks[0].len(), 12);
    }

    #[test]
    fn detection_outside_every_gate_still_spawns() {
        let mut tracks = Vec::new();
        let dt = 55.6e-3;
        for k in 0..4usize {
            tracks = update_tracks(tracks, &[det(30.0 + 2.8 * dt * k as f64, 2.8, k)], &params());
        }
        tracks = update_tracks(
            tracks,
            &[det(30.0 + 2.8 * dt * 4.0, 2.8, 4), det(50.0, 0.0, 4)],
            &params(),
        );
        assert_eq!(tracks.len(), 2);
    }

    #[test]
    fn crossing_targets_keep_identities() {
        // Receding and approaching tracks cross in range; the velocity term
        // of the metric keeps the pairing straight.
        let mut tracks = Vec::new();
        let dt = 0.0556;
        for k in 0..40 {
            let t = k as f64 * dt;
            let d_up = det(30.0 + 2.8 * t, 2.8, k);
            let d_down = det(34.0 - 2.8 * t, -2.8, k);
            tracks = update_tracks(tracks, &[d_up, d_down], &params());
        }
        assert_eq!(tracks.len(), 2);
        for track in &tracks {
            let v = track.slope_velocity(dt).unwrap();
            let v0 = track.first().radial_velocity;
            assert_relative_eq!(v, v0, max_relative = 1e-6);
            assert_eq!(track.len(), 40);
        }
    }

    #[test]
    fn velocity_unwrap_picks_nearest_alias() {
        let span = 14.129958;
        assert_relative_eq!(
            unwrap_velocity(3.87, 17.9, span),
            3.87 + span,
            max_relative = 1e-12
        );
        assert_relative_eq!(unwrap_velocity(2.8, 2.9, span), 2.8, max_relative = 1e-12);
        assert_relative_eq!(
            unwrap_velocity(-3.0, -17.0, span),
            -3.0 - span,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cycle_track_needs_enough_monotonic_samples() {
        let mut track = Track::start(0, det(80.0, 2.8, 0));
        for k in 1..514 {
            track.history.push(det(80.0 + 0.1557 * k as f64, 2.8, k));
        }
        let am = am_track_from_cycles(&track, 1.3, 3.919e-3).unwrap();
        assert_eq!(am.len(), 514);
        assert_relative_eq!(am.min_distance(), 80.0, max_relative = 1e-12);
        assert!(am.max_distance() > 159.0);

        // A stationary target grooms down to its first sample: no usable
        // distance span, so no spectral interval.
        let mut stationary = Track::start(0, det(80.0, 0.0, 0));
        for k in 1..20 {
            stationary.history.push(det(80.0, 0.0, k));
        }
        assert!(matches!(
            am_track_from_cycles(&stationary, 1.3, 3.919e-3),
            Err(ExtractError::InsufficientObservation { got: 1, .. })
        ));

        let mut short = Track::start(0, det(80.0, 2.8, 0));
        for k in 1..3 {
            short.history.push(det(80.0 + 0.16 * k as f64, 2.8, k));
        }
        assert!(matches!(
            am_track_from_cycles(&short, 1.3, 3.919e-3),
            Err(ExtractError::InsufficientObservation { got: 3, .. })
        ));
    }

    #[test]
    fn backward_range_jitter_is_groomed_out() {
        // Receding track with two samples stepping backwards, as the
        // readout does near deep modulation minima.
        let mut track = Track::start(0, det(80.0, 2.8, 0));
        for k in 1..40usize {
            let mut r = 80.0 + 0.1557 * k as f64;
            if k == 10 || k == 25 {
                r -= 0.3;
            }
            track.history.push(det(r, 2.8, k));
        }
        let am = am_track_from_cycles(&track, 1.3, 3.919e-3).unwrap();
        assert_eq!(am.len(), 38);
        for pair in am.samples().windows(2) {
            assert!(pair[1].distance > pair[0].distance);
        }
    }

    #[test]
    fn per_ramp_track_matches_multipath_oracle() {
        // 64 ramps, receding; per-ramp amplitudes must follow the
        // |F| / d^2 shape. Narrow bandwidth keeps the path beats well
        // inside one range cell, where that shape is exact; at wider
        // bandwidths the paths start to resolve, which displaces the
        // modulation pattern by a constant few centimeters without
        // changing its frequency.
        let mut config = test_config();
        config.bandwidth = 0.02e9;
        config.ramps_per_cpi = 64;
        config.ramp_repetition_interval = 138.671875e-6;
        let target = TargetSpec {
            height: 1.0,
            initial_distance: 25.0,
            radial_speed: 18.0,
            amplitude: 1.0,
            scattering: ScatteringModel::Isotropic,
        };
        let ground = GroundModel::perfect();
        let cpi = synthesize_cpi(&config, &[target], &ground, 1.3, 0.0, &mut no_rng()).unwrap();
        let map = range_doppler_map(&cpi, crate::dsp::WindowKind::Rectangular);
        let detections = detect_targets(&map, 8.0, 0);
        assert!(!detections.is_empty());
        let mut detection = detections[0];
        // 18 m/s aliases at this PRI; restore it from truth.
        detection.radial_velocity =
            unwrap_velocity(detection.radial_velocity, 18.0, config.velocity_ambiguity_span());

        let am = am_track_from_cpi(&cpi, &detection, 1.3).unwrap();
        assert_eq!(am.len(), 64);
        let expected_span = 18.0 * 63.0 * config.ramp_repetition_interval;
        assert_relative_eq!(am.interval_length(), expected_span, max_relative = 0.02);

        // Oracle: propagation-factor magnitude over the truth distances,
        // scaled like the echo.
        let oracle: Vec<f64> = (0..64)
            .map(|n| {
                let d = cpi.truth_distance(0, n);
                let g = SceneGeometry::new(1.3, 1.0, d).unwrap();
                let fp = propagation_factor(
                    &g,
                    config.center_frequency,
                    &ground,
                    ScatteringModel::Isotropic,
                );
                fp.norm() / (d * d)
            })
            .collect();
        let samples = am.samples();
        let scale = samples[0].amplitude / oracle[0];
        for (s, o) in samples.iter().zip(oracle.iter()) {
            assert_relative_eq!(s.amplitude, scale * o, max_relative = 0.02);
        }
        let _ = exact_path_delays(&SceneGeometry::new(1.3, 1.0, 25.0).unwrap());
    }

    #[test]
    fn per_ramp_track_rejects_zero_velocity() {
        let config = test_config();
        let target = TargetSpec {
            height: 0.0,
            initial_distance: 20.0,
            radial_speed: 0.0,
            amplitude: 1.0,
            scattering: ScatteringModel::Isotropic,
        };
        let cpi =
            synthesize_cpi(&config, &[target], &free_space(), 1.3, 0.0, &mut no_rng()).unwrap();
        let map = range_doppler_map(&cpi, crate::dsp::WindowKind::Rectangular);
        let detection = detect_targets(&map, 8.0, 0)[0];
        assert!(matches!(
            am_track_from_cpi(&cpi, &detection, 1.3),
            Err(ExtractError::NonMonotonicDistances)
        ));
    }

    #[test]
    fn am_track_rejects_malformed_samples() {
        let mk = |d: f64, a: f64| AmSample {
            distance: d,
            amplitude: a,
        };
        let good: Vec<AmSample> = (0..10).map(|i| mk(10.0 + i as f64, 1.0)).collect();
        assert!(AmTrack::new(good.clone(), SamplingMode::PerCycle, 1.3, 3.9e-3).is_ok());

        let mut stalled = good.clone();
        stalled[5].distance = stalled[4].distance;
        assert!(matches!(
            AmTrack::new(stalled, SamplingMode::PerCycle, 1.3, 3.9e-3),
            Err(ExtractError::NonMonotonicDistances)
        ));

        let mut negative = good.clone();
        negative[0].distance = -1.0;
        assert!(matches!(
            AmTrack::new(negative, SamplingMode::PerCycle, 1.3, 3.9e-3),
            Err(ExtractError::InvalidSample(_))
        ));

        assert!(matches!(
            AmTrack::new(good[..5].to_vec(), SamplingMode::PerCycle, 1.3, 3.9e-3),
            Err(ExtractError::InsufficientObservation { .. })
        ));
    }
}
