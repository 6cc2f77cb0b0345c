//! Scan, simulation and spectrum runs driven by a [`RunConfig`], and their
//! CSV writers.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{classify, lz_estimate, AtState};
use crate::dynamics::{propagate, PropagationResult};
use crate::model::{MultiLambdaSystem, StateVector};
use crate::spectral::{track_from_state, track_spectrum, SpectralSnapshot};

use super::config::{RunConfig, ScanAxis};
use super::CliError;

pub const SCAN_HEADER: [&str; 6] = ["scan_value", "pf", "max_intermediate_pop", "at_verdict", "xi", "seconds"];

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub scan_value: f64,
    pub pf: f64,
    pub max_intermediate_pop: f64,
    pub at_verdict: AtState,
    pub xi: Option<f64>,
    pub seconds: Option<f64>,
}

/// Rows of one scan. Detuning scans produce one table per pulse width.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub axis: ScanAxis,
    pub width: Option<f64>,
    pub rows: Vec<ScanRow>,
}

/// Nine significant digits, fixed layout.
pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

fn evaluate_point(
    cfg: &RunConfig,
    sys: &MultiLambdaSystem,
    width: f64,
    value: f64,
) -> Result<ScanRow, CliError> {
    let started = Instant::now();
    let pulses = cfg.pulses(width)?;
    let icfg = cfg.integrator.apply(&pulses);
    let result = propagate(sys, &pulses, &icfg, &StateVector::initial(sys.n_intermediate()))
        .map_err(|source| CliError::Numerical { value, source })?;
    let verdict = classify(sys).at_state;
    let xi = if verdict.exists() { lz_estimate(sys, &pulses).ok().map(|lz| lz.xi) } else { None };
    Ok(ScanRow {
        scan_value: value,
        pf: result.final_pf,
        max_intermediate_pop: result.max_intermediate_population,
        at_verdict: verdict,
        xi,
        seconds: cfg.output.timing.then(|| started.elapsed().as_secs_f64()),
    })
}

/// Runs every scan point on the current rayon pool. Rows come back in
/// input order; on failure the error of the earliest failing point wins.
pub fn run_scan(cfg: &RunConfig) -> Result<Vec<ScanTable>, CliError> {
    let jobs: Vec<(ScanAxis, Option<f64>, Vec<f64>)> = match &cfg.scan {
        Some(scan) if scan.axis == ScanAxis::CommonDetuning => cfg
            .widths
            .iter()
            .map(|&w| (ScanAxis::CommonDetuning, Some(w), scan.values()))
            .collect(),
        Some(scan) => vec![(ScanAxis::PulseWidth, None, scan.values())],
        None => vec![(ScanAxis::PulseWidth, None, cfg.widths.clone())],
    };

    jobs.into_iter()
        .map(|(axis, width, values)| {
            let results: Vec<Result<ScanRow, CliError>> = values
                .par_iter()
                .map(|&v| match axis {
                    ScanAxis::PulseWidth => evaluate_point(cfg, &cfg.system, v, v),
                    ScanAxis::CommonDetuning => {
                        let sys = cfg.system.with_common_shift(v);
                        evaluate_point(cfg, &sys, width.expect("detuning scans carry a width"), v)
                    }
                })
                .collect();
            let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
            Ok(ScanTable { axis, width, rows })
        })
        .collect()
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_scan_csv<W: Write>(table: &ScanTable, out: W) -> Result<(), CliError> {
    let mut w = csv_writer(out);
    w.write_record(SCAN_HEADER)?;
    for r in &table.rows {
        w.write_record([
            format_float(r.scan_value),
            format_float(r.pf),
            format_float(r.max_intermediate_pop),
            r.at_verdict.code().to_string(),
            r.xi.map(format_float).unwrap_or_default(),
            r.seconds.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One full propagation per configured width.
pub fn run_simulation(cfg: &RunConfig) -> Result<Vec<(f64, PropagationResult)>, CliError> {
    let results: Vec<Result<(f64, PropagationResult), CliError>> = cfg
        .widths
        .par_iter()
        .map(|&w| {
            let pulses = cfg.pulses(w)?;
            let icfg = cfg.integrator.apply(&pulses);
            let init = StateVector::initial(cfg.system.n_intermediate());
            propagate(&cfg.system, &pulses, &icfg, &init)
                .map(|r| (w, r))
                .map_err(|source| CliError::Numerical { value: w, source })
        })
        .collect();
    results.into_iter().collect()
}

pub fn write_populations_csv<W: Write>(result: &PropagationResult, out: W) -> Result<(), CliError> {
    let dim = result.populations.len();
    let mut w = csv_writer(out);
    let mut header = vec!["t".to_string(), "p_i".to_string()];
    header.extend((1..dim - 1).map(|k| format!("p_{k}")));
    header.push("p_f".into());
    w.write_record(&header)?;
    for (j, t) in result.time_grid.iter().enumerate() {
        let mut rec = vec![format_float(*t)];
        rec.extend(result.populations.iter().map(|s| format_float(s[j])));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Eigenvalue tracks for each configured width on a uniform time grid.
pub fn run_spectrum(cfg: &RunConfig) -> Result<Vec<(f64, Vec<SpectralSnapshot>)>, CliError> {
    cfg.widths
        .iter()
        .map(|&w| {
            let pulses = cfg.pulses(w)?;
            let (a, b) = pulses.default_window();
            let a = cfg.spectrum.t_start.unwrap_or(a);
            let b = cfg.spectrum.t_end.unwrap_or(b);
            if !(a < b) {
                return Err(CliError::Validation(format!("spectrum window [{a}, {b}] is empty")));
            }
            let n = cfg.spectrum.points;
            let grid: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
            let snaps = track_spectrum(&cfg.system, &pulses, &grid)
                .map_err(|source| CliError::Numerical { value: w, source })?;
            Ok((w, snaps))
        })
        .collect()
}

/// Columns: time, envelopes, eigenvalue of every track (by track id), then
/// the components of the track that starts in state `i`.
pub fn write_spectrum_csv<W: Write>(
    cfg: &RunConfig,
    width: f64,
    snaps: &[SpectralSnapshot],
    out: W,
) -> Result<(), CliError> {
    let pulses = cfg.pulses(width)?;
    let dim = snaps.first().map_or(0, |s| s.eigenvalues.len());
    let at = track_from_state(snaps, 0);
    let mut w = csv_writer(out);
    let mut header = vec!["t".to_string(), "omega_p".into(), "omega_s".into()];
    header.extend((0..dim).map(|k| format!("lambda_{k}")));
    header.push("at_track".into());
    header.push("at_c_i".into());
    header.extend((1..dim.saturating_sub(1)).map(|k| format!("at_c_{k}")));
    header.push("at_c_f".into());
    w.write_record(&header)?;
    for s in snaps {
        let (p, st) = pulses.values(s.t);
        let mut rec = vec![format_float(s.t), format_float(p), format_float(st)];
        rec.extend((0..dim).map(|k| format_float(s.eigenvalue_of(k))));
        rec.push(at.to_string());
        rec.extend(s.eigenvector_of(at).into_iter().map(format_float));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
