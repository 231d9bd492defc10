//! Host-side half of the echoheight simulator: scenario files, the
//! cycle-by-cycle run loop, CSV reports and parameter sweeps. All signal
//! processing lives in `echoheight-core`; this crate only feeds it and
//! writes down what it found.

pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod sweep;
