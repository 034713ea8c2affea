//! Result serialization: CSV tables and block-structured plot data.
//!
//! Floats print through Rust's shortest round-trip formatting, so files are
//! bit-identical across runs with the same seed. The wall-time column is
//! hardware-dependent; emitters take an `include_times` flag to drop it when
//! comparing outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AggregateRow, CellCoords, ExperimentResults, SweepAxis, TrialRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Plotdata,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plotdata" => Ok(OutputFormat::Plotdata),
            other => Err(Error::InvalidConfig(format!(
                "unknown output format {other:?} (expected csv or plotdata)"
            ))),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        v.to_string()
    }
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn coord_fields(coords: &CellCoords) -> Vec<String> {
    vec![
        coords.solver.to_string(),
        coords.label.clone(),
        coords.n.to_string(),
        coords.m.to_string(),
        coords.k_true.to_string(),
        fmt_opt_usize(coords.k_est),
        fmt_f64(coords.snr),
        fmt_f64(coords.flip_ratio),
        fmt_f64(coords.tau),
        fmt_f64(coords.c),
        fmt_opt_f64(coords.mu_coef),
        fmt_opt_f64(coords.mu),
        fmt_opt_usize(coords.flips_assumed),
    ]
}

const COORD_HEADER: &str = "solver,label,n,m,k_true,k_est,snr,flip_ratio,tau,c,mu_coef,mu,flips_assumed";

/// Aggregate table as CSV text.
pub fn format_aggregate_csv(rows: &[AggregateRow], include_times: bool) -> String {
    let mut out = String::new();
    out.push_str(COORD_HEADER);
    out.push_str(",mean_error,std_error");
    if include_times {
        out.push_str(",mean_time_ms");
    }
    out.push_str(",n_trials\n");
    for row in rows {
        let mut fields = coord_fields(&row.coords);
        fields.push(fmt_opt_f64(row.mean_error));
        fields.push(fmt_opt_f64(row.std_error));
        if include_times {
            fields.push(fmt_f64(row.mean_time_ms));
        }
        fields.push(row.n_trials.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Trial table as CSV text.
pub fn format_trials_csv(rows: &[TrialRecord], include_times: bool) -> String {
    let mut out = String::new();
    out.push_str(COORD_HEADER);
    out.push_str(",trial,seed,error");
    if include_times {
        out.push_str(",time_ms");
    }
    out.push_str(",status\n");
    for row in rows {
        let mut fields = coord_fields(&row.coords);
        fields.push(row.trial.to_string());
        fields.push(row.seed.to_string());
        fields.push(fmt_opt_f64(row.error));
        if include_times {
            fields.push(fmt_f64(row.time_ms));
        }
        fields.push(row.status.clone());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn axis_value(coords: &CellCoords, axis: SweepAxis) -> String {
    match axis {
        SweepAxis::M | SweepAxis::None => coords.m.to_string(),
        SweepAxis::KTrue => coords.k_true.to_string(),
        SweepAxis::Snr => fmt_f64(coords.snr),
        SweepAxis::FlipRatio => fmt_f64(coords.flip_ratio),
        SweepAxis::Tau => fmt_f64(coords.tau),
        SweepAxis::C => fmt_f64(coords.c),
        SweepAxis::MuCoef => fmt_opt_f64(coords.mu_coef),
        SweepAxis::KEst => fmt_opt_usize(coords.k_est),
        SweepAxis::LFlips => fmt_opt_usize(coords.flips_assumed),
    }
}

/// Plot-data text: whitespace-separated columns, one block per curve,
/// blocks separated by blank lines, `#`-prefixed header comments.
///
/// A contour sweep emits `tau mu_coef mean_error` rows grouped into one
/// block per `tau` value — the layout contour plotters expect.
pub fn format_plotdata(results: &ExperimentResults, include_times: bool) -> String {
    let mut out = String::new();
    if results.contour {
        let mut current_tau: Option<f64> = None;
        out.push_str("# tau mu_coef mean_error\n");
        for row in &results.aggregates {
            if current_tau.is_some_and(|t| t != row.coords.tau) {
                out.push('\n');
            }
            current_tau = Some(row.coords.tau);
            let _ = writeln!(
                out,
                "{} {} {}",
                fmt_f64(row.coords.tau),
                fmt_opt_f64(row.coords.mu_coef),
                row.mean_error.map(fmt_f64).unwrap_or_else(|| "nan".into()),
            );
        }
        return out;
    }

    let axis = results.axis;
    let mut current_curve: Option<usize> = None;
    for row in &results.aggregates {
        if current_curve != Some(row.coords.curve) {
            if current_curve.is_some() {
                out.push('\n');
            }
            current_curve = Some(row.coords.curve);
            let _ = writeln!(out, "# {}", row.coords.label);
            let _ = writeln!(
                out,
                "# {} mean_error std_error{} n_trials",
                axis.column_name(),
                if include_times { " mean_time_ms" } else { "" },
            );
        }
        let mean = row.mean_error.map(fmt_f64).unwrap_or_else(|| "nan".into());
        let std = row.std_error.map(fmt_f64).unwrap_or_else(|| "nan".into());
        if include_times {
            let _ = writeln!(
                out,
                "{} {} {} {} {}",
                axis_value(&row.coords, axis),
                mean,
                std,
                fmt_f64(row.mean_time_ms),
                row.n_trials,
            );
        } else {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                axis_value(&row.coords, axis),
                mean,
                std,
                row.n_trials,
            );
        }
    }
    out
}

fn check_path(path: &Path) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(Error::InvalidConfig("output path is empty".into()));
    }
    Ok(())
}

/// Writes the aggregate table to `path` in the chosen format.
pub fn emit_results(
    results: &ExperimentResults,
    path: &Path,
    format: OutputFormat,
    include_times: bool,
) -> Result<()> {
    check_path(path)?;
    if results.aggregates.is_empty() {
        return Err(Error::InvalidConfig("results table is empty".into()));
    }
    let text = match format {
        OutputFormat::Csv => format_aggregate_csv(&results.aggregates, include_times),
        OutputFormat::Plotdata => format_plotdata(results, include_times),
    };
    fs::write(path, text)?;
    Ok(())
}

/// Writes the per-trial table to `path` as CSV.
pub fn emit_trials(results: &ExperimentResults, path: &Path, include_times: bool) -> Result<()> {
    check_path(path)?;
    if results.trials.is_empty() {
        return Err(Error::InvalidConfig("trial table is empty".into()));
    }
    fs::write(path, format_trials_csv(&results.trials, include_times))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{
        run_experiment, ExperimentConfig, OneOrMany, Snr, SolverKind, SolverSpec,
    };

    fn small_results() -> ExperimentResults {
        let config = ExperimentConfig {
            name: "emit-test".into(),
            n: 20,
            m: OneOrMany::many(vec![25, 30]),
            k: OneOrMany::one(2),
            r_f: OneOrMany::one(0.1),
            r_n: OneOrMany::one(Snr::INF),
            trials: 2,
            base_seed: 5,
            solvers: OneOrMany::many(vec![
                SolverSpec::new(SolverKind::Biht),
                SolverSpec::new(SolverKind::Passive),
            ]),
        };
        run_experiment(&config).unwrap()
    }

    #[test]
    fn aggregate_csv_has_header_and_schema() {
        let results = small_results();
        let text = format_aggregate_csv(&results.aggregates, true);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "solver,label,n,m,k_true,k_est,snr,flip_ratio,tau,c,mu_coef,mu,flips_assumed,mean_error,std_error,mean_time_ms,n_trials"
        );
        assert_eq!(lines.count(), 4); // 2 solvers x 2 m values
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "biht");
        assert_eq!(fields[3], "25");
        assert_eq!(fields[6], "inf");
        assert_eq!(fields.last().unwrap(), &"2");

        // timing column drops out on request, along with its header
        let no_times = format_aggregate_csv(&results.aggregates, false);
        assert!(!no_times.contains("mean_time_ms"));
        assert_eq!(
            no_times.lines().next().unwrap().matches(',').count(),
            row.matches(',').count() - 1
        );
    }

    #[test]
    fn trials_csv_lists_every_run() {
        let results = small_results();
        let text = format_trials_csv(&results.trials, false);
        assert_eq!(text.lines().count(), 1 + 8); // header + 2 cells x 2 m x 2 trials
        assert!(text.lines().nth(1).unwrap().ends_with("ok"));
        assert!(text.contains(",0,") && text.contains(",1,")); // trial indices
    }

    #[test]
    fn plotdata_blocks_split_curves() {
        let results = small_results();
        let text = format_plotdata(&results, false);
        let blocks: Vec<&str> = text.split("\n\n").collect();
        assert_eq!(blocks.len(), 2); // biht curve, passive curve
        assert!(blocks[0].starts_with("# biht\n"));
        assert!(blocks[1].starts_with("# passive\n"));
        // each block: two header comments and one row per m value
        for block in blocks {
            let data_rows: Vec<&str> = block
                .lines()
                .filter(|l| !l.starts_with('#') && !l.is_empty())
                .collect();
            assert_eq!(data_rows.len(), 2);
            let fields: Vec<&str> = data_rows[0].split_whitespace().collect();
            assert_eq!(fields.len(), 4); // x mean std n
            assert_eq!(fields[0], "25");
        }
    }

    #[test]
    fn contour_plotdata_groups_by_tau() {
        let config = ExperimentConfig {
            name: "contour-test".into(),
            n: 20,
            m: OneOrMany::one(25),
            k: OneOrMany::one(2),
            r_f: OneOrMany::one(0.0),
            r_n: OneOrMany::one(Snr::INF),
            trials: 1,
            base_seed: 5,
            solvers: OneOrMany::one(SolverSpec {
                tau: Some(OneOrMany::many(vec![-0.6, -0.4])),
                mu_coef: Some(OneOrMany::many(vec![0.5, 0.7, 0.9])),
                ..SolverSpec::new(SolverKind::Epsvm)
            }),
        };
        let results = run_experiment(&config).unwrap();
        let text = format_plotdata(&results, false);
        let blocks: Vec<&str> = text.trim_end().split("\n\n").collect();
        assert_eq!(blocks.len(), 2); // one per tau
        let first_rows: Vec<&str> = blocks[0]
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect();
        assert_eq!(first_rows.len(), 3); // one per C
        let fields: Vec<&str> = first_rows[0].split_whitespace().collect();
        assert_eq!(fields[0], "-0.6");
        assert_eq!(fields[1], "0.5");
    }

    #[test]
    fn emit_rejects_empty_paths_and_writes_files() {
        let results = small_results();
        assert!(emit_results(&results, Path::new(""), OutputFormat::Csv, true).is_err());

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("agg.csv");
        emit_results(&results, &csv_path, OutputFormat::Csv, true).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("solver,"));

        let plot_path = dir.path().join("curves.dat");
        emit_results(&results, &plot_path, OutputFormat::Plotdata, false).unwrap();
        assert!(fs::read_to_string(&plot_path).unwrap().starts_with("# biht"));

        let trials_path = dir.path().join("trials.csv");
        emit_trials(&results, &trials_path, true).unwrap();
        let trials_text = fs::read_to_string(&trials_path).unwrap();
        assert!(trials_text.lines().next().unwrap().contains("trial,seed,error,time_ms,status"));
    }

    #[test]
    fn float_formatting_round_trips() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(-0.30000000000000004), "-0.30000000000000004");
        assert_eq!(fmt_opt_f64(None), "");
        for &v in &[0.1, 1.0 / 3.0, 2.5e-17, 1234.5678] {
            let t = fmt_f64(v);
            assert_eq!(t.parse::<f64>().unwrap(), v);
        }
    }
}
