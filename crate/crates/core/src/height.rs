//! Height estimation from the ground-multipath amplitude modulation.
//!
//! Over a flat reflecting ground the echo amplitude of a point object
//! oscillates with distance; over *reciprocal* distance `u = 1/d` the
//! oscillation is a clean tone whose frequency is proportional to the
//! object's height. Detrending an amplitude track and reading the peak of
//! its spectrum over `u` therefore measures height with a single sensor
//! and no elevation beamforming.
//!
//! Two spectral paths exist. [`nedft_psd`] evaluates the nonequidistant
//! DFT directly on a height grid and works for any monotonic track.
//! [`linearized_fft_psd`] exploits that within a short distance interval
//! `u` is affine in `d`, so the per-ramp samples of one CPI are
//! equidistant and a plain FFT applies.

use alloc::vec::Vec;

// In a graph that links std the inherent f64 methods shadow the trait;
// built alone as no_std the trait is what provides them.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::dsp::{parabolic_vertex, windowed_fft, WindowKind};
use crate::extract::AmTrack;
use crate::geometry::ScatteringModel;
use crate::Complex64;

/// Zero-padding factor of the linearized FFT path.
const LINEARIZED_PAD: usize = 8;
/// Heights above this are discarded from linearized spectra, matching the
/// default grid span.
const HEIGHT_CAP: f64 = 6.0;
/// Interval-to-distance ratio above which the linearization of `1/d` is
/// no longer trusted.
const LINEARIZATION_LIMIT: f64 = 0.2;
/// Relative step jitter tolerated by the equidistance check.
const EQUIDISTANCE_JITTER: f64 = 1e-6;
/// Mean removal notches the spectrum near zero height; estimates below
/// this fraction of the spectral resolution sit inside the notch.
pub const DC_LIMIT_FACTOR: f64 = 0.66;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeightError {
    #[error("invalid height grid: {0}")]
    InvalidGrid(&'static str),
    /// Every amplitude sample is zero, nothing to detrend.
    #[error("amplitude track is identically zero")]
    MeaninglessAmplitudes,
    /// The linearized path needs equidistant sampling over distance.
    #[error("track distances are not equidistant")]
    NonUniformSampling,
    /// The observed interval is too long for the linearized path.
    #[error("interval covers {ratio} of the center distance, limit {limit}")]
    IntervalTooWide { ratio: f64, limit: f64 },
    /// Interval and center distance outside `0 < interval < 2 * center`.
    #[error("invalid observation interval: {0}")]
    InvalidInterval(&'static str),
    /// The spectrum has no usable peak.
    #[error("spectrum is degenerate, no peak to read")]
    DegenerateSpectrum,
}

/// Achievable height resolution of an observation geometry.
///
/// An interval of length `interval` centered at `center_distance`
/// separates two heights once they differ by roughly one spectral bin
/// over reciprocal distance, which works out to
/// `wavelength * (d0^2 - interval^2 / 4) / (2 * sensor_height * interval)`.
pub fn spectral_resolution(
    sensor_height: f64,
    wavelength: f64,
    center_distance: f64,
    interval: f64,
) -> Result<f64, HeightError> {
    if !(sensor_height > 0.0) || !(wavelength > 0.0) {
        return Err(HeightError::InvalidInterval(
            "sensor height and wavelength must be > 0",
        ));
    }
    if !(center_distance > 0.0) || !interval.is_finite() {
        return Err(HeightError::InvalidInterval(
            "center distance must be > 0 and interval finite",
        ));
    }
    if !(interval > 0.0 && interval < 2.0 * center_distance) {
        return Err(HeightError::InvalidInterval(
            "interval must lie in (0, 2 * center distance)",
        ));
    }
    Ok(
        wavelength * (center_distance * center_distance - 0.25 * interval * interval)
            / (2.0 * sensor_height * interval),
    )
}

/// Interval length needed for a wanted height resolution, the inverse of
/// [`spectral_resolution`] at fixed center distance.
///
/// Uses the rationalized root `2x / (lam * (sqrt(b^2 + x) + b))` with
/// `b = 2 * h_s * resolution`, `x = (lam * d0)^2`; the textbook
/// `sqrt(b^2 + x) - b` form cancels catastrophically once the wanted
/// resolution is coarse.
pub fn required_interval(
    sensor_height: f64,
    wavelength: f64,
    center_distance: f64,
    resolution: f64,
) -> Result<f64, HeightError> {
    if !(sensor_height > 0.0) || !(wavelength > 0.0) {
        return Err(HeightError::InvalidInterval(
            "sensor height and wavelength must be > 0",
        ));
    }
    if !(center_distance > 0.0) || !(resolution > 0.0) {
        return Err(HeightError::InvalidInterval(
            "center distance and resolution must be > 0",
        ));
    }
    let b = 2.0 * sensor_height * resolution;
    let x = (wavelength * center_distance) * (wavelength * center_distance);
    Ok(2.0 * x / (wavelength * ((b * b + x).sqrt() + b)))
}

/// Equally spaced candidate heights for the nonequidistant transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightGrid {
    min: f64,
    spacing: f64,
    count: usize,
}

impl HeightGrid {
    pub fn new(min: f64, spacing: f64, count: usize) -> Result<Self, HeightError> {
        if !min.is_finite() || min < 0.0 {
            return Err(HeightError::InvalidGrid("minimum must be finite and >= 0"));
        }
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(HeightError::InvalidGrid("spacing must be finite and > 0"));
        }
        if count < 2 {
            return Err(HeightError::InvalidGrid("need at least two grid points"));
        }
        Ok(Self {
            min,
            spacing,
            count,
        })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn height(&self, index: usize) -> f64 {
        self.min + index as f64 * self.spacing
    }
}

impl Default for HeightGrid {
    /// 0 to 6 m in 2 cm steps, wide enough for road users and street
    /// furniture while keeping the transform cheap.
    fn default() -> Self {
        Self {
            min: 0.0,
            spacing: 0.02,
            count: 301,
        }
    }
}

/// Which transform produced a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    Nedft,
    LinearizedFft,
}

/// Power spectrum of an amplitude track over candidate heights,
/// max-normalized when nonzero.
#[derive(Debug, Clone)]
pub struct HeightSpectrum {
    heights: Vec<f64>,
    psd: Vec<f64>,
    pub method: SpectralMethod,
    /// Center of the observed distance interval, m.
    pub center_distance: f64,
    /// Length of the observed distance interval, m.
    pub interval_length: f64,
}

impl HeightSpectrum {
    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }
}

/// Height estimate with its reliability qualifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightEstimate {
    /// Estimated height above ground, m.
    pub height: f64,
    /// Spectral resolution of the observation, m.
    pub resolution: f64,
    /// False when the track dips below the far-field distance bound for
    /// this height, where the oscillation stops being a single tone.
    pub valid_lower_bound: bool,
    /// False when the estimate sits inside the detrending notch near zero
    /// height; see [`DC_LIMIT_FACTOR`].
    pub valid_dc_limit: bool,
    /// True when the raw spectral peak was halved because the object
    /// returns only the direct-direct and ground-ground paths, doubling
    /// the modulation frequency.
    pub retroreflector_corrected: bool,
}

/// Detrend an amplitude track for spectral readout: undo the
/// inverse-square range loss, remove the mean, normalize to unit maximum.
///
/// A track whose compensated amplitude is constant comes back as zeros;
/// an identically zero track is refused.
pub fn preprocess(track: &AmTrack) -> Result<AmTrack, HeightError> {
    if track.samples().iter().all(|s| s.amplitude == 0.0) {
        return Err(HeightError::MeaninglessAmplitudes);
    }
    let mut values: Vec<f64> = track
        .samples()
        .iter()
        .map(|s| s.amplitude * s.distance * s.distance)
        .collect();
    let scale = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    for v in &mut values {
        *v -= mean;
    }
    let peak = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    if peak > 1e-12 * scale {
        for v in &mut values {
            *v /= peak;
        }
    } else {
        // Residue of a flat compensated profile is rounding noise, not
        // modulation; normalizing would blow it up to unit scale.
        for v in &mut values {
            *v = 0.0;
        }
    }
    Ok(track.with_amplitudes(&values))
}

/// Spectral frequency over reciprocal distance belonging to a height.
fn height_frequency(sensor_height: f64, wavelength: f64, height: f64) -> f64 {
    2.0 * sensor_height * height / wavelength
}

/// Nonequidistant DFT of a track over a height grid.
///
/// Each grid height maps to the tone frequency `2 * h_s * h / lambda`
/// over reciprocal distance; the transform correlates the windowed track
/// with that tone at the actual sample positions `1 / d_n`, so no
/// resampling is needed however irregularly the cycles landed.
pub fn nedft_psd(track: &AmTrack, grid: &HeightGrid, window: WindowKind) -> HeightSpectrum {
    let n = track.len();
    let w = window.coefficients(n);
    let windowed: Vec<(f64, f64)> = track
        .samples()
        .iter()
        .zip(w.iter())
        .map(|(s, wi)| (1.0 / s.distance, s.amplitude * wi))
        .collect();

    let mut heights = Vec::with_capacity(grid.count());
    let mut psd = Vec::with_capacity(grid.count());
    for k in 0..grid.count() {
        let h = grid.height(k);
        let f = height_frequency(track.sensor_height, track.wavelength, h);
        let mut acc = Complex64::new(0.0, 0.0);
        for (u, x) in &windowed {
            let phase = -2.0 * core::f64::consts::PI * f * u;
            acc += Complex64::new(phase.cos() * x, phase.sin() * x);
        }
        heights.push(h);
        psd.push(acc.norm_sqr());
    }
    normalize(&mut psd);
    HeightSpectrum {
        heights,
        psd,
        method: SpectralMethod::Nedft,
        center_distance: track.center_distance(),
        interval_length: track.interval_length(),
    }
}

/// FFT of an equidistant track, linearizing `1/d` around the interval
/// center.
///
/// Within a short interval the reciprocal distance is affine in distance,
/// `1/d ~ 1/d0 - (d - d0) / d0^2`, so equidistant distance steps `dd`
/// are equidistant in `u` with step `dd / d0^2` and a zero-padded FFT
/// replaces the expensive direct transform. Bin `k` of the length
/// `n_fft` FFT then sits at height
/// `lambda * d0^2 / (2 * h_s) * k / (n_fft * dd)`. Fails when the steps
/// jitter or the interval is too long to linearize.
pub fn linearized_fft_psd(
    track: &AmTrack,
    window: WindowKind,
) -> Result<HeightSpectrum, HeightError> {
    let samples = track.samples();
    let n = samples.len();
    let step = (samples[n - 1].distance - samples[0].distance) / (n - 1) as f64;
    for pair in samples.windows(2) {
        let s = pair[1].distance - pair[0].distance;
        if (s - step).abs() > EQUIDISTANCE_JITTER * step.abs() {
            return Err(HeightError::NonUniformSampling);
        }
    }
    let d0 = track.center_distance();
    let ratio = track.interval_length() / d0;
    if ratio >= LINEARIZATION_LIMIT {
        return Err(HeightError::IntervalTooWide {
            ratio,
            limit: LINEARIZATION_LIMIT,
        });
    }

    let data: Vec<Complex64> = samples
        .iter()
        .map(|s| Complex64::new(s.amplitude, 0.0))
        .collect();
    let spectrum = windowed_fft(&data, window, LINEARIZED_PAD);
    let n_fft = spectrum.len();

    // Frequency spacing over u is 1 / (n_fft * dd / d0^2); scale into
    // height per bin. A decreasing track only flips the sign of the tone
    // frequency, which the magnitude ignores.
    let height_per_bin =
        track.wavelength * d0 * d0 / (2.0 * track.sensor_height * n_fft as f64 * step.abs());
    let keep = ((HEIGHT_CAP / height_per_bin).floor() as usize + 1).min(n_fft / 2);
    let mut heights = Vec::with_capacity(keep);
    let mut psd = Vec::with_capacity(keep);
    for (k, value) in spectrum.iter().take(keep).enumerate() {
        heights.push(k as f64 * height_per_bin);
        psd.push(value.norm_sqr());
    }
    normalize(&mut psd);
    Ok(HeightSpectrum {
        heights,
        psd,
        method: SpectralMethod::LinearizedFft,
        center_distance: d0,
        interval_length: track.interval_length(),
    })
}

fn normalize(psd: &mut [f64]) {
    let peak = psd.iter().fold(0.0_f64, |a, &b| a.max(b));
    if peak > 0.0 {
        for v in psd {
            *v /= peak;
        }
    }
}

/// Read the height off a spectrum and qualify it.
///
/// Takes the largest bin above zero height, refines it by parabolic
/// interpolation on the log power, and halves the result for a
/// retroreflecting object whose modulation runs at twice the height
/// frequency. The qualifiers compare the estimate against the spectral
/// resolution of the observation interval and the track's closest
/// distance against the far-field bound `4 * h * h_s / range_resolution`.
pub fn estimate_height(
    spectrum: &HeightSpectrum,
    track: &AmTrack,
    scattering: ScatteringModel,
    range_resolution: f64,
) -> Result<HeightEstimate, HeightError> {
    let heights = spectrum.heights();
    let psd = spectrum.psd();
    let mut peak: Option<usize> = None;
    for (k, &p) in psd.iter().enumerate() {
        if heights[k] == 0.0 {
            continue;
        }
        if peak.map_or(true, |best| p > psd[best]) {
            peak = Some(k);
        }
    }
    let k = peak.ok_or(HeightError::DegenerateSpectrum)?;
    if !(psd[k] > 0.0) {
        return Err(HeightError::DegenerateSpectrum);
    }

    let raw = if k > 0 && k + 1 < psd.len() {
        // Log-domain parabola mirrors the Gaussian-like mainlobe shape.
        let floor = 1e-30;
        let (off, _) = parabolic_vertex(
            (psd[k - 1] + floor).ln(),
            (psd[k] + floor).ln(),
            (psd[k + 1] + floor).ln(),
        );
        heights[k] + off * (heights[k + 1] - heights[k])
    } else {
        heights[k]
    };

    let (height, corrected) = match scattering {
        ScatteringModel::Isotropic => (raw, false),
        ScatteringModel::Retroreflector => (0.5 * raw, true),
    };

    let resolution = spectral_resolution(
        track.sensor_height,
        track.wavelength,
        spectrum.center_distance,
        spectrum.interval_length,
    )?;
    let far_field_bound = 4.0 * height * track.sensor_height / range_resolution;
    Ok(HeightEstimate {
        height,
        resolution,
        valid_lower_bound: track.min_distance() > far_field_bound,
        valid_dc_limit: height >= DC_LIMIT_FACTOR * resolution,
        retroreflector_corrected: corrected,
    })
}
