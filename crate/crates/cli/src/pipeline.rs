//! Scenario execution: drive the synthesis/processing chain cycle by
//! cycle and collect per-target height results.
//!
//! Everything numerical happens in the core crate; this module only
//! orchestrates (and is deliberately reproducible: one seeded RNG drives
//! all cycles in order).

use std::time::Instant;

use anyhow::{anyhow, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use echoheight_core::extract::{
    am_track_from_cpi, am_track_from_cycles, detect_targets, unwrap_velocity, update_tracks,
    AmTrack, SamplingMode, Track, MIN_SPECTRAL_SAMPLES,
};
use echoheight_core::fmcw::{range_doppler_map, synthesize_cpi};
use echoheight_core::geometry::{exact_path_delays, SceneGeometry};
use echoheight_core::height::{
    estimate_height, linearized_fft_psd, nedft_psd, preprocess, HeightEstimate, HeightSpectrum,
};
use echoheight_core::SPEED_OF_LIGHT;

use crate::scenario::RunPlan;

/// Height readout of one CPI of a per-ramp track.
#[derive(Debug, Clone)]
pub struct CycleEstimate {
    pub cycle: usize,
    pub estimate: HeightEstimate,
}

/// Everything the run learned about one tracked object.
#[derive(Debug, Clone)]
pub struct TargetReport {
    pub track_id: u32,
    /// Height of the matched true target; None when no truth matches.
    pub true_height: Option<f64>,
    /// Representative height estimate of the whole run.
    pub estimate: HeightEstimate,
    /// Spectrum behind the representative estimate.
    pub spectrum: HeightSpectrum,
    /// Raw amplitude track behind the spectrum.
    pub track: AmTrack,
    /// Detrended version the spectrum was computed from.
    pub preprocessed: AmTrack,
    /// Per-CPI estimates (per-ramp mode only, one entry per tracked CPI).
    pub cycle_estimates: Vec<CycleEstimate>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub targets: Vec<TargetReport>,
    /// Cycles actually simulated; fewer than planned when the scene ran
    /// out of geometry (target at the sensor, ambiguous range).
    pub cycles_run: usize,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
}

/// Simulate and process one scenario.
pub fn run(plan: &RunPlan) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut warnings = Vec::new();
    let mut tracks: Vec<Track> = Vec::new();
    let mut cycle_estimates: Vec<(u32, CycleEstimate)> = Vec::new();
    let mut first_ranges: Vec<(u32, usize, f64)> = Vec::new();
    let mut cycles_run = 0;

    for cycle in 0..plan.cycles {
        let start_time = cycle as f64 * plan.config.measurement_cycle;
        let cpi = match synthesize_cpi(
            &plan.config,
            &plan.targets,
            &plan.ground,
            plan.sensor_height,
            start_time,
            &mut rng,
        ) {
            Ok(cpi) => cpi,
            Err(e) => {
                warnings.push(format!("cycle {cycle}: {e}; stopping early"));
                break;
            }
        };
        cycles_run += 1;

        // Detect on the leading ramps only: a fast scene walks through
        // range cells over a long CPI and the smeared peak fragments into
        // several detections. The amplitude readout below still spans the
        // whole CPI.
        let map = if plan.detection_ramps < plan.config.ramps_per_cpi {
            range_doppler_map(&cpi.sub_cpi(0, plan.detection_ramps), plan.window)
        } else {
            range_doppler_map(&cpi, plan.window)
        };
        let detections = detect_targets(&map, plan.threshold_factor, cycle);
        tracks = update_tracks(tracks, &detections, &plan.tracking);

        for track in &tracks {
            if track.len() == 1 && track.first().cycle_index == cycle {
                first_ranges.push((track.id, cycle, track.first().range));
            }
        }

        if plan.mode == SamplingMode::PerRamp {
            for track in &tracks {
                if track.retired || track.len() < 2 || track.last().cycle_index != cycle {
                    continue;
                }
                // The Doppler readout aliases at highway speed; the track's
                // cycle-to-cycle range rate recovers the true interval.
                let Some(reference) = track.slope_velocity(plan.tracking.cycle_time) else {
                    continue;
                };
                let mut detection = *track.last();
                detection.radial_velocity = unwrap_velocity(
                    detection.radial_velocity,
                    reference,
                    plan.config.velocity_ambiguity_span(),
                );
                match per_cpi_estimate(plan, &cpi, &detection) {
                    Ok((estimate, _, _, _)) => {
                        cycle_estimates.push((track.id, CycleEstimate { cycle, estimate }));
                    }
                    Err(e) => warnings.push(format!("cycle {cycle} track {}: {e}", track.id)),
                }
            }
        }
    }

    let mut reports = Vec::new();
    for track in &tracks {
        if track.len() < MIN_SPECTRAL_SAMPLES && plan.mode == SamplingMode::PerCycle {
            continue;
        }
        let report = match plan.mode {
            SamplingMode::PerCycle => per_cycle_report(plan, track),
            SamplingMode::PerRamp => per_ramp_report(plan, track, &cycle_estimates),
        };
        match report {
            Ok(Some(report)) => reports.push(report),
            Ok(None) => {}
            Err(e) => warnings.push(format!("track {}: {e}", track.id)),
        }
    }

    for report in &mut reports {
        report.true_height = match_truth(plan, &first_ranges, report.track_id);
    }
    reports.sort_by_key(|r| r.track_id);

    Ok(RunOutcome {
        targets: reports,
        cycles_run,
        warnings,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

/// Spectrum and qualified estimate of one per-ramp amplitude track.
fn per_cpi_estimate(
    plan: &RunPlan,
    cpi: &echoheight_core::fmcw::Cpi,
    detection: &echoheight_core::extract::Detection,
) -> Result<(HeightEstimate, HeightSpectrum, AmTrack, AmTrack)> {
    let track = am_track_from_cpi(cpi, detection, plan.sensor_height)?;
    let detrended = preprocess(&track)?;
    let spectrum = linearized_fft_psd(&detrended, plan.spectral_window)?;
    let estimate = estimate_height(
        &spectrum,
        &detrended,
        plan.targets[0].scattering,
        plan.config.range_resolution(),
    )?;
    Ok((estimate, spectrum, track, detrended))
}

fn per_cycle_report(plan: &RunPlan, track: &Track) -> Result<Option<TargetReport>> {
    let am = am_track_from_cycles(track, plan.sensor_height, plan.config.wavelength())?;
    let detrended = preprocess(&am)?;
    let spectrum = nedft_psd(&detrended, &plan.grid, plan.spectral_window);
    let estimate = estimate_height(
        &spectrum,
        &detrended,
        plan.targets[0].scattering,
        plan.config.range_resolution(),
    )?;
    Ok(Some(TargetReport {
        track_id: track.id,
        true_height: None,
        estimate,
        spectrum,
        track: am,
        preprocessed: detrended,
        cycle_estimates: Vec::new(),
    }))
}

fn per_ramp_report(
    plan: &RunPlan,
    track: &Track,
    all_estimates: &[(u32, CycleEstimate)],
) -> Result<Option<TargetReport>> {
    let estimates: Vec<CycleEstimate> = all_estimates
        .iter()
        .filter(|(id, _)| *id == track.id)
        .map(|(_, e)| e.clone())
        .collect();
    if estimates.is_empty() {
        return Ok(None);
    }

    // Representative estimate: the median height among fully qualified
    // CPIs, or among all of them when none qualifies.
    let qualified: Vec<&CycleEstimate> = estimates
        .iter()
        .filter(|e| e.estimate.valid_lower_bound && e.estimate.valid_dc_limit)
        .collect();
    let pool: Vec<&CycleEstimate> = if qualified.is_empty() {
        estimates.iter().collect()
    } else {
        qualified
    };
    let mut heights: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, e)| (e.estimate.height, i))
        .collect();
    heights.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let representative = pool[heights[heights.len() / 2].1];

    // Rebuild the representative CPI's spectrum for the report. The RNG
    // stream cannot be rewound per cycle, so recompute deterministically
    // from a fresh run of the same seed up to that cycle.
    let rebuilt = rebuild_cycle(plan, representative.cycle, track)?;
    let (estimate, spectrum, am, detrended) = rebuilt;

    Ok(Some(TargetReport {
        track_id: track.id,
        true_height: None,
        estimate,
        spectrum,
        track: am,
        preprocessed: detrended,
        cycle_estimates: estimates,
    }))
}

/// Re-derive one cycle's spectrum by replaying the seeded simulation up
/// to `cycle` and processing that CPI for `track`'s detection.
fn rebuild_cycle(
    plan: &RunPlan,
    cycle: usize,
    track: &Track,
) -> Result<(HeightEstimate, HeightSpectrum, AmTrack, AmTrack)> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut cpi = None;
    for c in 0..=cycle {
        let start_time = c as f64 * plan.config.measurement_cycle;
        let synthesized = synthesize_cpi(
            &plan.config,
            &plan.targets,
            &plan.ground,
            plan.sensor_height,
            start_time,
            &mut rng,
        )
        .map_err(|e| anyhow!("cycle {c} vanished on replay: {e}"))?;
        if c == cycle {
            cpi = Some(synthesized);
        }
    }
    let cpi = cpi.expect("loop covers 0..=cycle");

    let detection = track
        .history()
        .iter()
        .find(|d| d.cycle_index == cycle)
        .ok_or_else(|| anyhow!("track {} has no detection at cycle {cycle}", track.id))?;
    let reference = velocity_reference(track, cycle, plan.tracking.cycle_time)
        .ok_or_else(|| anyhow!("track {} too short for a range rate", track.id))?;
    let mut detection = *detection;
    detection.radial_velocity = unwrap_velocity(
        detection.radial_velocity,
        reference,
        plan.config.velocity_ambiguity_span(),
    );
    per_cpi_estimate(plan, &cpi, &detection)
}

/// Range rate over the two detections up to `cycle`, matching what the
/// live pass used at that point.
fn velocity_reference(track: &Track, cycle: usize, cycle_time: f64) -> Option<f64> {
    let history = track.history();
    let pos = history.iter().position(|d| d.cycle_index == cycle)?;
    if pos == 0 {
        return None;
    }
    let a = &history[pos - 1];
    let b = &history[pos];
    let dt = (b.cycle_index - a.cycle_index) as f64 * cycle_time;
    (dt > 0.0).then(|| (b.range - a.range) / dt)
}

/// Match a track to the true target whose slant range at the track's
/// first cycle comes closest, within a few range resolutions.
fn match_truth(plan: &RunPlan, first_ranges: &[(u32, usize, f64)], track_id: u32) -> Option<f64> {
    let &(_, cycle, range) = first_ranges.iter().find(|(id, _, _)| *id == track_id)?;
    let t = cycle as f64 * plan.config.measurement_cycle;
    let tolerance = (5.0 * plan.config.range_resolution()).max(1.0);
    let mut best: Option<(f64, f64)> = None;
    for target in &plan.targets {
        let d = target.initial_distance + target.radial_speed * t;
        if d <= 0.0 {
            continue;
        }
        let Ok(geometry) = SceneGeometry::new(plan.sensor_height, target.height, d) else {
            continue;
        };
        let slant = SPEED_OF_LIGHT * exact_path_delays(&geometry).direct;
        let err = (slant - range).abs();
        if err < tolerance && best.map_or(true, |(e, _)| err < e) {
            best = Some((err, target.height));
        }
    }
    best.map(|(_, h)| h)
}
