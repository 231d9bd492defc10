//! Parameter sweeps: run the same scenario across a list of values for
//! one key, in parallel, and merge the results into one table.
//!
//! Each run writes its own subdirectory atomically; the aggregate
//! `sweep.csv` is merged single-threaded afterwards so concurrent
//! workers never share a file.

use std::path::Path;

use anyhow::{anyhow, Result};
use rayon::prelude::*;

use crate::pipeline::{self, RunOutcome};
use crate::report::{self, RESULTS_HEADER};
use crate::scenario::{apply_override, Scenario};

/// Aggregate table header: the swept value prefixed to each results row.
pub fn sweep_header(param: &str) -> String {
    format!("{param},{RESULTS_HEADER}")
}

/// Run `scenario` once per value of `param`, writing per-run tables into
/// `out_dir/<param>=<value>/` and the aggregate into `out_dir/sweep.csv`.
/// An empty value list produces only the aggregate header.
pub fn run_sweep(
    base: &toml::Value,
    param: &str,
    values: &[f64],
    out_dir: &Path,
) -> Result<Vec<RunOutcome>> {
    let runs: Vec<(f64, RunOutcome)> = values
        .par_iter()
        .map(|&value| -> Result<(f64, RunOutcome)> {
            let mut tree = base.clone();
            apply_override(&mut tree, &format!("{param}={value}"))?;
            let plan = Scenario::from_value(tree)?
                .build()
                .map_err(|e| anyhow!("{param}={value}: {e}"))?;
            let outcome = pipeline::run(&plan)?;
            report::write_run(&out_dir.join(format!("{param}={value}")), &outcome)?;
            Ok((value, outcome))
        })
        .collect::<Result<_>>()?;

    let mut aggregate = sweep_header(param);
    aggregate.push('\n');
    for (value, outcome) in &runs {
        for target in &outcome.targets {
            aggregate.push_str(&format!("{value},{}\n", report::results_row(target)));
        }
    }
    report::write_atomic(&out_dir.join("sweep.csv"), &aggregate)?;

    Ok(runs.into_iter().map(|(_, o)| o).collect())
}
