//! Shared DSP plumbing: a power-of-two FFT, window functions and peak
//! interpolation.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// In a graph that links std the inherent f64 methods shadow the trait;
// built alone as no_std the trait is what provides them.
#[allow(unused_imports)]
use num_traits::Float;

/// Window applied before a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// No tapering; narrowest main lobe, -13 dB sidelobes.
    Rectangular,
    /// Symmetric raised cosine; wider main lobe, -31 dB sidelobes.
    Hann,
}

impl WindowKind {
    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            WindowKind::Hann => {
                if len < 2 {
                    return vec![1.0; len];
                }
                (0..len)
                    .map(|n| {
                        let x = core::f64::consts::PI * n as f64 / (len as f64 - 1.0);
                        let s = x.sin();
                        s * s
                    })
                    .collect()
            }
        }
    }

    /// Sum of squared coefficients; the Parseval factor of a windowed DFT.
    pub fn energy_gain(&self, len: usize) -> f64 {
        self.coefficients(len).iter().map(|w| w * w).sum()
    }
}

/// Forward radix-2 FFT plan with precomputed twiddles, X[k] = sum_n x[n]
/// e^{-j 2 pi k n / N}. Unnormalized, so Parseval reads
/// sum |X|^2 = N sum |x|^2.
pub struct Fft {
    len: usize,
    /// Twiddles e^{-j 2 pi k / N} for k in 0..N/2.
    twiddles: Vec<Complex64>,
}

impl Fft {
    /// `len` must be a power of two and nonzero.
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length must be a power of two");
        let step = -2.0 * core::f64::consts::PI / len as f64;
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, step * k as f64))
            .collect();
        Self { len, twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place transform of exactly `self.len()` samples.
    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len, "buffer length does not match plan");
        let n = self.len;
        if n <= 1 {
            return;
        }

        // Bit-reversal permutation.
        let shift = (n.leading_zeros() + 1) as usize;
        for i in 0..n {
            let j = i.reverse_bits() >> shift;
            if j > i {
                data.swap(i, j);
            }
        }

        // Butterflies, twiddle stride halving per stage.
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for start in (0..n).step_by(2 * half) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            half *= 2;
        }
    }
}

/// Windowed, zero-padded forward transform. Output length is
/// `len.next_power_of_two() * pad_factor` (`pad_factor` itself a power of
/// two); the window spans the occupied prefix only.
pub fn windowed_fft(samples: &[Complex64], window: WindowKind, pad_factor: usize) -> Vec<Complex64> {
    assert!(pad_factor.is_power_of_two(), "pad factor must be a power of two");
    assert!(!samples.is_empty(), "empty input");
    let n_fft = samples.len().next_power_of_two() * pad_factor;
    let coeffs = window.coefficients(samples.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for (slot, (x, w)) in buf.iter_mut().zip(samples.iter().zip(coeffs.iter())) {
        *slot = x * w;
    }
    let plan = Fft::new(n_fft);
    plan.process(&mut buf);
    buf
}

/// Vertex of the parabola through (-1, ym), (0, y0), (1, yp).
///
/// Returns (offset, value); the offset is clamped to [-0.5, 0.5] so a noisy
/// neighborhood cannot throw the refined position outside the middle cell.
pub fn parabolic_vertex(ym: f64, y0: f64, yp: f64) -> (f64, f64) {
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return (0.0, y0);
    }
    let mut offset = 0.5 * (ym - yp) / denom;
    if !offset.is_finite() {
        offset = 0.0;
    }
    offset = offset.clamp(-0.5, 0.5);
    let value = y0 - 0.25 * (ym - yp) * offset;
    (offset, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, xm) in x.iter().enumerate() {
                    let phase = -2.0 * core::f64::consts::PI * (k * m) as f64 / n as f64;
                    acc += xm * Complex64::from_polar(1.0, phase);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let n = 64;
        let mut data: Vec<Complex64> = (0..n)
            .map(|i| {
                let t = i as f64;
                Complex64::new((0.3 * t).sin() + 0.2, (0.7 * t).cos() - 0.1)
            })
            .collect();
        let reference = naive_dft(&data);
        Fft::new(n).process(&mut data);
        for (got, want) in data.iter().zip(reference.iter()) {
            assert_abs_diff_eq!(got.re, want.re, epsilon = 1e-9);
            assert_abs_diff_eq!(got.im, want.im, epsilon = 1e-9);
        }
    }

    #[test]
    fn pure_tone_lands_on_its_bin() {
        let n = 128;
        let k0 = 19;
        let mut data: Vec<Complex64> = (0..n)
            .map(|m| {
                Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * (k0 * m) as f64 / n as f64)
            })
            .collect();
        Fft::new(n).process(&mut data);
        for (k, x) in data.iter().enumerate() {
            if k == k0 {
                assert_relative_eq!(x.norm(), n as f64, max_relative = 1e-9);
            } else {
                assert_abs_diff_eq!(x.norm(), 0.0, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn parseval_holds_with_padding() {
        let samples: Vec<Complex64> = (0..100)
            .map(|i| Complex64::new((i as f64 * 0.11).cos(), (i as f64 * 0.05).sin()))
            .collect();
        let spectrum = windowed_fft(&samples, WindowKind::Rectangular, 4);
        let e_time: f64 = samples.iter().map(|x| x.norm_sqr()).sum();
        let e_freq: f64 = spectrum.iter().map(|x| x.norm_sqr()).sum();
        assert_relative_eq!(e_freq, e_time * spectrum.len() as f64, max_relative = 1e-11);
    }

    #[test]
    fn hann_window_tapers_to_zero_ends() {
        let w = WindowKind::Hann.coefficients(64);
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[63], 0.0, epsilon = 1e-12);
        assert_relative_eq!(w[32], 1.0, max_relative = 1e-3);
    }

    #[test]
    fn parabolic_vertex_recovers_quadratic_peak() {
        // y = 3 - (x - 0.2)^2 sampled at -1, 0, 1.
        let f = |x: f64| 3.0 - (x - 0.2) * (x - 0.2);
        let (offset, value) = parabolic_vertex(f(-1.0), f(0.0), f(1.0));
        assert_abs_diff_eq!(offset, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(value, 3.0, epsilon = 1e-12);
        // Flat neighborhood degrades gracefully.
        let (offset, value) = parabolic_vertex(1.0, 1.0, 1.0);
        assert_abs_diff_eq!(offset, 0.0);
        assert_abs_diff_eq!(value, 1.0);
    }
}
