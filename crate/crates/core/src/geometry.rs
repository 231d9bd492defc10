//! Scene geometry and the ground-multipath propagation factor.
//!
//! The scene is a sensor at height `h_s` above a flat reflecting ground and
//! a point scatterer at height `h_t`, separated by horizontal distance `d`.
//! Every echo travels out and back over the direct path, the ground-bounced
//! path, or one of each, so the transfer function factors into a bulk delay
//! and a multipath term built from the one-way delay difference between the
//! bounced and the direct ray.

use num_complex::Complex64;
// In a graph that links std the inherent f64 methods shadow the trait;
// built alone as no_std the trait is what provides them.
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    /// A geometry parameter is out of range (zero/negative distance,
    /// negative height, non-finite value).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    /// Ground reflection coefficients must satisfy |gamma| <= 1.
    #[error("reflection coefficient magnitude exceeds 1")]
    ReflectionOutOfRange,
}

/// Sensor/scatterer arrangement over a flat ground plane.
///
/// Invariants enforced on construction: `sensor_height > 0`,
/// `target_height >= 0`, `distance > 0`, all finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneGeometry {
    sensor_height: f64,
    target_height: f64,
    distance: f64,
}

impl SceneGeometry {
    pub fn new(
        sensor_height: f64,
        target_height: f64,
        distance: f64,
    ) -> Result<Self, GeometryError> {
        if !sensor_height.is_finite() || sensor_height <= 0.0 {
            return Err(GeometryError::InvalidGeometry(
                "sensor height must be finite and > 0",
            ));
        }
        if !target_height.is_finite() || target_height < 0.0 {
            return Err(GeometryError::InvalidGeometry(
                "target height must be finite and >= 0",
            ));
        }
        if !distance.is_finite() || distance <= 0.0 {
            return Err(GeometryError::InvalidGeometry(
                "distance must be finite and > 0",
            ));
        }
        Ok(Self {
            sensor_height,
            target_height,
            distance,
        })
    }

    pub fn sensor_height(&self) -> f64 {
        self.sensor_height
    }

    pub fn target_height(&self) -> f64 {
        self.target_height
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Same sensor and target, evaluated at another horizontal distance.
    pub fn at_distance(&self, distance: f64) -> Result<Self, GeometryError> {
        Self::new(self.sensor_height, self.target_height, distance)
    }
}

/// Ground reflection, a single complex coefficient applied per bounce.
///
/// A smooth road at grazing incidence in the automotive band is close to
/// [`GroundModel::perfect`], gamma = -1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundModel {
    reflection: Complex64,
}

impl GroundModel {
    pub fn new(reflection: Complex64) -> Result<Self, GeometryError> {
        if !reflection.re.is_finite() || !reflection.im.is_finite() {
            return Err(GeometryError::InvalidGeometry(
                "reflection coefficient must be finite",
            ));
        }
        if reflection.norm_sqr() > 1.0 + 1e-12 {
            return Err(GeometryError::ReflectionOutOfRange);
        }
        Ok(Self { reflection })
    }

    /// Ideal fully reflecting ground, gamma = -1.
    pub fn perfect() -> Self {
        Self {
            reflection: Complex64::new(-1.0, 0.0),
        }
    }

    pub fn reflection_coefficient(&self) -> Complex64 {
        self.reflection
    }
}

/// How the scatterer returns energy arriving from different elevations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatteringModel {
    /// Point scatterer returning every incident ray; all four path
    /// combinations contribute.
    Isotropic,
    /// Trihedral corner reflector: energy leaves back along the incident
    /// ray, so the mixed direct/bounced combinations vanish and only the
    /// fully direct and fully bounced round trips remain.
    Retroreflector,
}

/// One-way propagation delays of the direct and the ground-bounced ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDelays {
    /// Direct ray, sqrt(d^2 + (h_s - h_t)^2) / c.
    pub direct: f64,
    /// Ground-bounced ray via the mirror image, sqrt(d^2 + (h_s + h_t)^2) / c.
    pub indirect: f64,
}

impl PathDelays {
    /// One-way delay difference, always >= 0.
    pub fn difference(&self) -> f64 {
        self.indirect - self.direct
    }
}

/// Exact one-way delays from the mirror-image construction.
pub fn exact_path_delays(geometry: &SceneGeometry) -> PathDelays {
    let d = geometry.distance();
    let diff = geometry.sensor_height() - geometry.target_height();
    let sum = geometry.sensor_height() + geometry.target_height();
    PathDelays {
        direct: (d * d + diff * diff).sqrt() / SPEED_OF_LIGHT,
        indirect: (d * d + sum * sum).sqrt() / SPEED_OF_LIGHT,
    }
}

/// Far-field one-way delay difference, 2 h_t h_s / (c d).
///
/// First-order expansion of the exact difference in the heights over the
/// distance; the relative error is about (h_s^2 + h_t^2) / (2 d^2).
pub fn delay_difference_approx(geometry: &SceneGeometry) -> f64 {
    2.0 * geometry.target_height() * geometry.sensor_height()
        / (SPEED_OF_LIGHT * geometry.distance())
}

/// Multipath factor of the two-way transfer function at carrier `frequency`.
///
/// With `gamma` the per-bounce ground reflection and `phi = 2 pi f dtau`
/// built from the exact one-way delay difference `dtau`:
///
/// ```text
/// Isotropic:      F = 1 + 2 gamma e^{-j phi} + gamma^2 e^{-j 2 phi}
/// Retroreflector: F = 1 + gamma^2 e^{-j 2 phi}
/// ```
///
/// The bulk delay of the direct round trip is not included. For gamma = -1
/// the isotropic factor collapses to -4 e^{-j phi} sin^2(phi / 2), an
/// amplitude swinging between 0 and 4.
pub fn propagation_factor(
    geometry: &SceneGeometry,
    frequency: f64,
    ground: &GroundModel,
    scattering: ScatteringModel,
) -> Complex64 {
    let dtau = exact_path_delays(geometry).difference();
    let phi = 2.0 * core::f64::consts::PI * frequency * dtau;
    let gamma = ground.reflection_coefficient();
    let rot = Complex64::from_polar(1.0, -phi);
    let rot2 = Complex64::from_polar(1.0, -2.0 * phi);
    match scattering {
        ScatteringModel::Isotropic => {
            Complex64::new(1.0, 0.0) + 2.0 * gamma * rot + gamma * gamma * rot2
        }
        ScatteringModel::Retroreflector => Complex64::new(1.0, 0.0) + gamma * gamma * rot2,
    }
}

/// Magnitude of the isotropic factor for gamma = -1 in the far field:
///
/// ```text
/// |F(1/d)| ~= 4 sin^2(2 pi (h_s / lambda) h_t / d)
/// ```
///
/// Over reciprocal distance this oscillates at a rate proportional to the
/// target height, which is what the height spectrum later picks up. Nulls
/// sit at d = 2 h_s h_t / (k lambda), k = 1, 2, ...
pub fn propagation_factor_magnitude_approx(geometry: &SceneGeometry, wavelength: f64) -> f64 {
    let arg = 2.0 * core::f64::consts::PI * geometry.sensor_height() * geometry.target_height()
        / (wavelength * geometry.distance());
    let s = arg.sin();
    4.0 * s * s
}

/// Closest distance at which all four echoes still share one range cell.
///
/// The spread between the shortest and the longest round trip is about
/// 4 h_t h_s / d; requiring it below the range resolution gives
/// `d_min = 4 h_t h_s / resolution`. Closer than this the echo splits into
/// separate range peaks and the single-cell amplitude model breaks down.
pub fn min_distance_bound(geometry: &SceneGeometry, range_resolution: f64) -> f64 {
    4.0 * geometry.target_height() * geometry.sensor_height() / range_resolution
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn carrier() -> f64 {
        76.5e9
    }

    fn wavelength() -> f64 {
        SPEED_OF_LIGHT / carrier()
    }

    #[test]
    fn rejects_degenerate_geometry() {
        assert!(SceneGeometry::new(1.3, 1.0, 0.0).is_err());
        assert!(SceneGeometry::new(1.3, 1.0, -5.0).is_err());
        assert!(SceneGeometry::new(0.0, 1.0, 10.0).is_err());
        assert!(SceneGeometry::new(1.3, -0.1, 10.0).is_err());
        assert!(SceneGeometry::new(1.3, f64::NAN, 10.0).is_err());
        assert!(SceneGeometry::new(1.3, 0.0, 10.0).is_ok());
    }

    #[test]
    fn exact_delays_match_direct_evaluation() {
        let g = SceneGeometry::new(1.3, 1.0, 100.0).unwrap();
        let delays = exact_path_delays(&g);
        // Frozen from sqrt((d^2 + (h_s +- h_t)^2)) / c evaluated independently.
        assert_relative_eq!(delays.difference(), 8.67150031e-11, max_relative = 1e-8);
        assert!(delays.indirect > delays.direct);
    }

    #[test]
    fn ground_level_target_has_no_delay_difference() {
        let g = SceneGeometry::new(1.3, 0.0, 50.0).unwrap();
        let delays = exact_path_delays(&g);
        assert_abs_diff_eq!(delays.difference(), 0.0);
    }

    #[test]
    fn approx_delay_difference_close_to_exact() {
        let g = SceneGeometry::new(1.3, 1.0, 100.0).unwrap();
        let approx = delay_difference_approx(&g);
        assert_relative_eq!(approx, 8.67266648e-11, max_relative = 1e-8);
        let exact = exact_path_delays(&g).difference();
        assert!((approx - exact).abs() / exact < 1e-3);

        // Near field: still within a couple percent at d = 10 max(h).
        let g = SceneGeometry::new(1.0, 1.0, 10.0).unwrap();
        let exact = exact_path_delays(&g).difference();
        let approx = delay_difference_approx(&g);
        assert!((approx - exact).abs() / exact < 0.02);
    }

    #[test]
    fn perfect_ground_collapses_to_sine_form() {
        let g = SceneGeometry::new(1.0, 1.0, 137.0).unwrap();
        let f = carrier();
        let fp = propagation_factor(&g, f, &GroundModel::perfect(), ScatteringModel::Isotropic);
        let phi = 2.0 * core::f64::consts::PI * f * exact_path_delays(&g).difference();
        let s = (phi / 2.0).sin();
        let reference = -4.0 * s * s * Complex64::from_polar(1.0, -phi);
        assert_abs_diff_eq!(fp.re, reference.re, epsilon = 1e-12);
        assert_abs_diff_eq!(fp.im, reference.im, epsilon = 1e-12);
    }

    #[test]
    fn magnitude_approx_nulls_and_peak() {
        let g = SceneGeometry::new(1.0, 1.0, 1.0).unwrap();
        let lam = wavelength();
        // Nulls at d = 2 h_s h_t / (k lambda); frozen for the 76.5 GHz
        // bridge scene with both heights at 1 m.
        for (k, d_null) in [(1, 510.353066), (2, 255.176533), (3, 170.117689)] {
            let _ = k;
            let g = g.at_distance(d_null).unwrap();
            assert_abs_diff_eq!(
                propagation_factor_magnitude_approx(&g, lam),
                0.0,
                epsilon = 1e-9
            );
        }
        // First overtone peak: argument 3 pi / 2 at d = 4 / (3 lambda).
        let g = g.at_distance(340.235377).unwrap();
        assert_relative_eq!(
            propagation_factor_magnitude_approx(&g, lam),
            4.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn magnitude_bounded_by_reflection_strength() {
        let g = SceneGeometry::new(1.3, 1.7, 63.0).unwrap();
        for gamma in [-1.0, -0.8, -0.3] {
            let ground = GroundModel::new(Complex64::new(gamma, 0.0)).unwrap();
            let bound = (1.0 + gamma.abs()) * (1.0 + gamma.abs());
            for d in [20.0, 35.5, 80.0, 123.0] {
                let g = g.at_distance(d).unwrap();
                let fp =
                    propagation_factor(&g, carrier(), &ground, ScatteringModel::Isotropic);
                assert!(fp.norm() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn retroreflector_keeps_only_double_bounce() {
        let g = SceneGeometry::new(1.3, 1.0, 40.0).unwrap();
        let f = carrier();
        let fp = propagation_factor(&g, f, &GroundModel::perfect(), ScatteringModel::Retroreflector);
        // gamma = -1 squares to 1: F = 1 + e^{-j 2 phi}, magnitude 2 |cos phi|.
        let phi = 2.0 * core::f64::consts::PI * f * exact_path_delays(&g).difference();
        assert_relative_eq!(fp.norm(), 2.0 * phi.cos().abs(), max_relative = 1e-9);
    }

    #[test]
    fn retroreflector_null_spacing_halves() {
        // Null spacing over reciprocal distance: lambda / (2 h_s h_t)
        // isotropic, lambda / (4 h_s h_t) retroreflective. Count local
        // minima well below the lobe maxima; a fixed small threshold would
        // miss retro nulls, whose dips narrow linearly instead of
        // quadratically and can fall between samples.
        let count_nulls = |scattering: ScatteringModel| -> usize {
            let n = 40_000;
            let mags: Vec<f64> = (0..n)
                .map(|i| {
                    let u =
                        1.0 / 300.0 + (1.0 / 60.0 - 1.0 / 300.0) * (i as f64) / (n as f64 - 1.0);
                    let g = SceneGeometry::new(1.3, 1.0, 1.0 / u).unwrap();
                    propagation_factor(&g, carrier(), &GroundModel::perfect(), scattering).norm()
                })
                .collect();
            mags.windows(3)
                .filter(|w| w[1] <= w[0] && w[1] < w[2] && w[1] < 0.2)
                .count()
        };
        let iso = count_nulls(ScatteringModel::Isotropic);
        let retro = count_nulls(ScatteringModel::Retroreflector);
        // The swept phase interval covers 9 full and 18 half turns.
        assert_eq!(iso, 9, "retro={retro}");
        assert_eq!(retro, 18, "iso={iso}");
    }

    #[test]
    fn min_distance_bound_examples() {
        let g = SceneGeometry::new(1.3, 1.0, 100.0).unwrap();
        assert_relative_eq!(min_distance_bound(&g, 0.15), 34.6666667, max_relative = 1e-6);
        let g = SceneGeometry::new(1.3, 2.5, 100.0).unwrap();
        assert_relative_eq!(min_distance_bound(&g, 0.15), 86.6666667, max_relative = 1e-6);
        let g = SceneGeometry::new(1.3, 0.0, 100.0).unwrap();
        assert_abs_diff_eq!(min_distance_bound(&g, 0.15), 0.0);
    }
}
