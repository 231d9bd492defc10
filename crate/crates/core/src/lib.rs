//! Height estimation of static objects from ground-multipath amplitude
//! modulation in automotive FMCW radar.
//!
//! A radar echo from an elevated object reaches the sensor over four path
//! combinations (direct and ground-reflected, out and back). Their
//! interference modulates the received amplitude as the distance changes;
//! the modulation frequency over reciprocal distance is proportional to the
//! object's height. This crate provides the pieces of that chain:
//!
//! * [`geometry`] - scene geometry, path delays and the multipath
//!   propagation factor,
//! * [`fmcw`] - chirp-sequence beat-signal synthesis and range-Doppler
//!   processing,
//! * [`extract`] - detection, tracking and amplitude-track extraction in
//!   the two sampling modes (once per measurement cycle, once per ramp),
//! * [`height`] - amplitude-track preprocessing, height spectra through a
//!   nonequidistant DFT or a linearized FFT, and the final estimate with
//!   its validity checks.
//!
//! The crate is `no_std` (with `alloc`); everything operates on plain
//! buffers so hosts decide about IO, formats and parallelism.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dsp;
pub mod extract;
pub mod fmcw;
pub mod geometry;
pub mod height;

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
