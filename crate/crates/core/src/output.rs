//! CSV emission for ensemble statistics and angle sweeps.
//!
//! Floats are written as `{:.9e}` (ten significant digits); samples where a
//! quantity was not evaluated are written as `NaN`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ensemble::EnsembleStats;
use crate::error::{Error, Result};

const BASE_COLUMNS: [&str; 7] = [
    "time",
    "mean_purity_true",
    "sem_purity_true",
    "mean_purity_filter",
    "sem_purity_filter",
    "mean_fidelity",
    "sem_fidelity",
];

const CORRELATION_COLUMNS: [&str; 4] = [
    "mean_ccorr_true",
    "mean_ccorr_filter",
    "mean_discord_true",
    "mean_discord_filter",
];

pub const SWEEP_COLUMNS: [&str; 4] = ["angle_deg", "mean_final_fidelity", "sem_final_fidelity", "n_unstable"];

/// Column names for a run of the given Hilbert-space dimension.
pub fn stats_header(dim: usize) -> Vec<&'static str> {
    let mut cols = BASE_COLUMNS.to_vec();
    if dim == 4 {
        cols.extend(CORRELATION_COLUMNS);
    }
    cols.push("n_unstable");
    cols
}

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.9e}")
    }
}

pub fn write_stats<W: Write>(stats: &EnsembleStats, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(stats_header(stats.dim))?;
    for (i, &t) in stats.times.iter().enumerate() {
        let mut row = vec![
            fmt_float(t),
            fmt_float(stats.purity_true.mean[i]),
            fmt_float(stats.purity_true.sem[i]),
            fmt_float(stats.purity_filter.mean[i]),
            fmt_float(stats.purity_filter.sem[i]),
            fmt_float(stats.fidelity.mean[i]),
            fmt_float(stats.fidelity.sem[i]),
        ];
        if stats.dim == 4 {
            match &stats.correlations {
                Some(c) => row.extend(
                    [&c.classical_true, &c.classical_filter, &c.discord_true, &c.discord_filter]
                        .map(|s| fmt_float(s.mean[i])),
                ),
                None => row.extend(std::iter::repeat_n(fmt_float(f64::NAN), 4)),
            }
        }
        row.push(stats.n_unstable_by_time[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_stats_csv(stats: &EnsembleStats, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_stats(stats, BufWriter::new(file))
}

/// Final-fidelity summary of one angle in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub angle_deg: f64,
    pub mean_final_fidelity: f64,
    pub sem_final_fidelity: f64,
    pub n_unstable: usize,
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_float(r.angle_deg),
            fmt_float(r.mean_final_fidelity),
            fmt_float(r.sem_final_fidelity),
            r.n_unstable.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep(rows, BufWriter::new(file))
}
