//! CSV readers and writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the exact values and reruns give identical bytes.

use std::io::Read;

use sfde_core::diagnostics::{CheckReport, ConvergenceReport, UniformityReport};
use sfde_core::path::steps_in;
use sfde_core::pricing::HedgeOutcome;
use sfde_core::{InitialPath, Measure, PathRecord, PricingResult};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Core(#[from] sfde_core::Error),
}

/// Reads a two-column numeric CSV whose header must be exactly `header`.
pub fn read_columns<R: Read>(reader: R, header: [&str; 2]) -> Result<Vec<(f64, f64)>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(IoError::Format(format!(
            "expected header `{},{}`, found `{}`",
            header[0],
            header[1],
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(IoError::Format(format!("row {}: expected 2 fields", line + 1)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| IoError::Format(format!("row {}: `{s}` is not a number", line + 1)))
        };
        rows.push((parse(&record[0])?, parse(&record[1])?));
    }
    Ok(rows)
}

/// Uniform spacing of ascending abscissae, checked to grid tolerance.
fn uniform_step(xs: &[f64], what: &str) -> Result<f64, IoError> {
    if xs.len() < 2 {
        return Err(IoError::Format(format!("{what}: need at least two rows")));
    }
    let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if step.is_nan() || step <= 0.0 {
        return Err(IoError::Format(format!("{what}: times must be ascending")));
    }
    for (i, &x) in xs.iter().enumerate() {
        let expected = xs[0] + i as f64 * step;
        if (x - expected).abs() > 1e-9 * step.max(1.0) {
            return Err(IoError::Format(format!("{what}: row {} is off the uniform grid", i + 1)));
        }
    }
    Ok(step)
}

/// Initial path from `offset,price` rows covering `[-window, 0]`, resampled
/// to `step` by linear interpolation when the file uses another spacing.
pub fn read_initial_path<R: Read>(reader: R, window: f64, step: f64) -> Result<InitialPath, IoError> {
    let rows = read_columns(reader, ["offset", "price"])?;
    let offsets: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let spacing = uniform_step(&offsets, "initial path")?;
    let tol = 1e-9 * spacing;
    if (offsets[0] + window).abs() > tol || offsets[offsets.len() - 1].abs() > tol {
        return Err(IoError::Format(format!(
            "initial path: offsets must run from -{window} to 0"
        )));
    }
    let values = rows.iter().map(|r| r.1).collect();
    let theta = InitialPath::new(window, window / (rows.len() - 1) as f64, values)?;
    if steps_in(window, step) == Some(rows.len() - 1) {
        Ok(theta)
    } else {
        Ok(theta.resample(step)?)
    }
}

/// Realized path from `t,price` rows, such as a `simulate` dump. Time zero
/// must be one of the rows and the spacing must equal `dt`.
pub fn read_path<R: Read>(reader: R, gap: f64, window: f64, dt: f64) -> Result<PathRecord, IoError> {
    let rows = read_columns(reader, ["t", "price"])?;
    let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let step = uniform_step(&times, "path")?;
    if (step - dt).abs() > 1e-9 * dt {
        return Err(IoError::Format(format!(
            "path: sample spacing {step} differs from dt = {dt}"
        )));
    }
    let zero_index = times
        .iter()
        .position(|t| t.abs() <= 1e-9 * dt)
        .ok_or_else(|| IoError::Format("path: no row at t = 0".into()))?;
    let prices = rows.iter().map(|r| r.1).collect();
    Ok(PathRecord::from_parts(dt, zero_index, gap, window, prices, None, Measure::Physical)?)
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> String {
    let bytes = wtr.into_inner().expect("in-memory writer cannot fail");
    String::from_utf8(bytes).expect("csv output is ascii")
}

fn writer(header: &[&str]) -> csv::Writer<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).expect("in-memory writer cannot fail");
    wtr
}

fn row(wtr: &mut csv::Writer<Vec<u8>>, fields: &[String]) {
    wtr.write_record(fields).expect("in-memory writer cannot fail");
}

pub fn path_csv(path: &PathRecord) -> String {
    let mut wtr = writer(&["t", "price"]);
    for (i, s) in path.prices().iter().enumerate() {
        let t = (i as f64 - path.zero_index() as f64) * path.step();
        row(&mut wtr, &[t.to_string(), s.to_string()]);
    }
    finish(wtr)
}

pub fn pricing_csv(result: &PricingResult, seed: u64) -> String {
    let mut wtr = writer(&["method", "price", "std_error", "ci_lo", "ci_hi", "replicates", "seed"]);
    row(
        &mut wtr,
        &[
            result.method.name().to_owned(),
            result.price.to_string(),
            result.std_error.to_string(),
            result.ci95.0.to_string(),
            result.ci95.1.to_string(),
            result.replicates.to_string(),
            seed.to_string(),
        ],
    );
    finish(wtr)
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut wtr = writer(&["k", "discrepancy", "std_error"]);
    for (k, est) in report.k_values.iter().zip(&report.discrepancies) {
        row(&mut wtr, &[k.to_string(), est.mean.to_string(), est.std_error.to_string()]);
    }
    finish(wtr)
}

pub fn hedge_csv(outcomes: &[HedgeOutcome]) -> String {
    let mut wtr = writer(&["path", "terminal_error", "payoff", "terminal_wealth"]);
    for (i, o) in outcomes.iter().enumerate() {
        row(
            &mut wtr,
            &[
                i.to_string(),
                o.terminal_error.to_string(),
                o.payoff.to_string(),
                o.terminal_wealth.to_string(),
            ],
        );
    }
    finish(wtr)
}

/// One row per checked statistic.
pub fn checks_csv(checks: &[CheckReport], uniformity: Option<&UniformityReport>) -> String {
    let mut wtr = writer(&["check", "time", "k", "estimate", "std_error", "target", "pass"]);
    for c in checks {
        row(
            &mut wtr,
            &[
                c.name.to_owned(),
                c.time.map(|t| t.to_string()).unwrap_or_default(),
                String::new(),
                c.estimate.mean.to_string(),
                c.estimate.std_error.to_string(),
                c.target.to_string(),
                c.pass.to_string(),
            ],
        );
    }
    if let Some(u) = uniformity {
        for (k, est) in u.k_values.iter().zip(&u.estimates) {
            row(
                &mut wtr,
                &[
                    u.name.to_owned(),
                    String::new(),
                    k.to_string(),
                    est.mean.to_string(),
                    est.std_error.to_string(),
                    String::new(),
                    u.pass.to_string(),
                ],
            );
        }
    }
    finish(wtr)
}
