//! CSV emission. Files are written atomically (temp file, then rename)
//! so a crashed run never leaves a half-written table, and all numbers
//! use Rust's shortest-roundtrip float formatting so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::pipeline::{RunOutcome, TargetReport};

/// Column order of `results.csv`, one row per tracked object.
pub const RESULTS_HEADER: &str = "target_id,true_height_m,estimated_height_m,resolution_m,\
valid_lower_bound,valid_dc_limit,retroreflector_corrected";

/// Write a file via a temp sibling and an atomic rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create output directory {}", parent.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn results_row(report: &TargetReport) -> String {
    let e = &report.estimate;
    format!(
        "{},{},{},{},{},{},{}",
        report.track_id,
        opt(report.true_height),
        e.height,
        e.resolution,
        e.valid_lower_bound,
        e.valid_dc_limit,
        e.retroreflector_corrected
    )
}

/// Emit every table of one run into `dir`: `results.csv` plus, per
/// target, the height spectrum, the amplitude track and (in per-CPI
/// mode) the per-cycle estimates.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    let mut results = String::from(RESULTS_HEADER);
    results.push('\n');
    for report in &outcome.targets {
        results.push_str(&results_row(report));
        results.push('\n');
    }
    write_atomic(&dir.join("results.csv"), &results)?;

    for report in &outcome.targets {
        let id = report.track_id;

        let mut spectrum = String::from("height_m,psd\n");
        for (h, p) in report
            .spectrum
            .heights()
            .iter()
            .zip(report.spectrum.psd().iter())
        {
            writeln!(spectrum, "{h},{p}").expect("string writes cannot fail");
        }
        write_atomic(&dir.join(format!("spectrum_{id}.csv")), &spectrum)?;

        let mut track = String::from("distance_m,amplitude,preprocessed\n");
        for (raw, flat) in report
            .track
            .samples()
            .iter()
            .zip(report.preprocessed.samples().iter())
        {
            writeln!(track, "{},{},{}", raw.distance, raw.amplitude, flat.amplitude)
                .expect("string writes cannot fail");
        }
        write_atomic(&dir.join(format!("am_track_{id}.csv")), &track)?;

        if !report.cycle_estimates.is_empty() {
            let mut cycles = String::from(
                "cycle,estimated_height_m,resolution_m,valid_lower_bound,valid_dc_limit\n",
            );
            for ce in &report.cycle_estimates {
                writeln!(
                    cycles,
                    "{},{},{},{},{}",
                    ce.cycle,
                    ce.estimate.height,
                    ce.estimate.resolution,
                    ce.estimate.valid_lower_bound,
                    ce.estimate.valid_dc_limit
                )
                .expect("string writes cannot fail");
            }
            write_atomic(&dir.join(format!("per_cycle_estimates_{id}.csv")), &cycles)?;
        }
    }
    Ok(())
}

/// One-line human summary per target for the terminal.
pub fn summarize(outcome: &RunOutcome) -> String {
    let mut out = String::new();
    if outcome.targets.is_empty() {
        out.push_str("no usable tracks\n");
    }
    for report in &outcome.targets {
        let e = &report.estimate;
        let truth = report
            .true_height
            .map(|h| format!("{h:.3} m"))
            .unwrap_or_else(|| "unmatched".into());
        let _ = writeln!(
            out,
            "track {}: height {:.3} m (truth {}, resolution {:.3} m, \
             lower bound {}, dc limit {}{})",
            report.track_id,
            e.height,
            truth,
            e.resolution,
            if e.valid_lower_bound { "ok" } else { "violated" },
            if e.valid_dc_limit { "ok" } else { "violated" },
            if e.retroreflector_corrected {
                ", retro corrected"
            } else {
                ""
            }
        );
    }
    let _ = writeln!(
        out,
        "{} cycle(s) in {:.2} s",
        outcome.cycles_run, outcome.elapsed_s
    );
    for warning in &outcome.warnings {
        let _ = writeln!(out, "warning: {warning}");
    }
    out
}
