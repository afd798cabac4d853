//! Result tables.
//!
//! A sweep produces three CSV files: `summary.csv` (one row per cell,
//! mean and sample sd of each metric), `runs.csv` (one row per seed) and
//! `timing.csv` (weight-evaluation wall time). Timing is kept out of the
//! first two so they are reproducible byte for byte.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::experiment::CellResult;
use crate::Error;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const TIMING_FILE: &str = "timing.csv";

/// Metrics reported per cell, in column order.
pub const METRICS: [&str; 4] = ["trans_error_cm", "rot_error_rad", "actions", "contacts"];

fn param_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn param_names(cells: &[CellResult]) -> Vec<String> {
    cells.first().map(|c| c.params.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default()
}

fn param_values(cell: &CellResult) -> impl Iterator<Item = String> + '_ {
    cell.params.iter().map(|(_, v)| param_text(v))
}

pub fn write_summary<W: Write>(cells: &[CellResult], w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = param_names(cells);
    header.extend(["runs", "terminated", "failed"].map(String::from));
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_sd"));
    }
    out.write_record(&header)?;
    for cell in cells {
        let s = cell.summary();
        let mut row: Vec<String> = param_values(cell).collect();
        row.extend([s.runs, s.terminated, s.failed].map(|n| n.to_string()));
        for (mean, sd) in [s.trans_error_cm, s.rot_error_rad, s.actions, s.contacts] {
            row.push(mean.to_string());
            row.push(sd.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_runs<W: Write>(cells: &[CellResult], w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = param_names(cells);
    header.extend(
        [
            "seed",
            "terminated",
            "failure",
            "iterations",
            "trans_error_cm",
            "rot_error_rad",
            "mean_contacts",
            "mean_events",
        ]
        .map(String::from),
    );
    out.write_record(&header)?;
    for cell in cells {
        for r in &cell.runs {
            let mut row: Vec<String> = param_values(cell).collect();
            row.extend([
                r.seed.to_string(),
                r.terminated.to_string(),
                r.failure.clone().unwrap_or_default(),
                r.iterations.to_string(),
                r.trans_error_cm.to_string(),
                r.rot_error_rad.to_string(),
                r.mean_contacts.to_string(),
                r.mean_events.to_string(),
            ]);
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_timing<W: Write>(cells: &[CellResult], w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = param_names(cells);
    header.extend(["seed", "weights_ms"].map(String::from));
    out.write_record(&header)?;
    for cell in cells {
        for r in &cell.runs {
            let mut row: Vec<String> = param_values(cell).collect();
            row.extend([r.seed.to_string(), r.weights_ms.to_string()]);
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn create(path: PathBuf) -> Result<File, Error> {
    File::create(&path).map_err(|e| Error::Io(path, e))
}

/// Writes the three sweep files into `dir` and returns their paths.
pub fn write_all(dir: &Path, cells: &[CellResult]) -> Result<[PathBuf; 3], Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(dir.to_path_buf(), e))?;
    let paths = [dir.join(SUMMARY_FILE), dir.join(RUNS_FILE), dir.join(TIMING_FILE)];
    write_summary(cells, create(paths[0].clone())?)?;
    write_runs(cells, create(paths[1].clone())?)?;
    write_timing(cells, create(paths[2].clone())?)?;
    Ok(paths)
}

/// A summary file read back: sweep parameter columns and metric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub params: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub params: Vec<String>,
    pub runs: usize,
    pub terminated: usize,
    pub failed: usize,
    /// `(mean, sd)` per entry of [`METRICS`].
    pub metrics: Vec<(f64, f64)>,
}

pub fn read_summary(path: &Path) -> Result<Summary, Error> {
    let bad = |msg: String| Error::Format(path.to_path_buf(), msg);
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(path.to_path_buf(), io),
        other => bad(format!("{other:?}")),
    })?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let n_params = header.iter().position(|h| h == "runs").ok_or_else(|| bad("no `runs` column".into()))?;
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| bad(format!("no `{name}` column")));
    let metric_cols: Vec<(usize, usize)> = METRICS
        .iter()
        .map(|m| Ok((col(&format!("{m}_mean"))?, col(&format!("{m}_sd"))?)))
        .collect::<Result<_, Error>>()?;
    let (terminated, failed) = (col("terminated")?, col("failed")?);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| field(i).parse::<usize>().map_err(|e| bad(format!("row {}: {e}", line + 1)));
        let float = |i: usize| field(i).parse::<f64>().map_err(|e| bad(format!("row {}: {e}", line + 1)));
        rows.push(SummaryRow {
            params: (0..n_params).map(|i| field(i).to_string()).collect(),
            runs: int(n_params)?,
            terminated: int(terminated)?,
            failed: int(failed)?,
            metrics: metric_cols.iter().map(|&(m, s)| Ok((float(m)?, float(s)?))).collect::<Result<_, Error>>()?,
        });
    }
    Ok(Summary { params: header[..n_params].to_vec(), rows })
}

/// Aligned plain-text table with `mean ± sd` cells.
pub fn render_table(s: &Summary) -> String {
    let mut header: Vec<String> = s.params.clone();
    header
        .extend(["runs", "terminated", "trans err (cm)", "rot err (rad)", "# actions", "# contacts"].map(String::from));
    let mut rows: Vec<Vec<String>> = vec![header];
    for r in &s.rows {
        let mut row = r.params.clone();
        row.push(r.runs.to_string());
        row.push(if r.failed > 0 {
            format!("{} ({} failed)", r.terminated, r.failed)
        } else {
            r.terminated.to_string()
        });
        for (i, &(m, sd)) in r.metrics.iter().enumerate() {
            let digits = if METRICS[i] == "rot_error_rad" { 4 } else { 2 };
            row.push(format!("{m:.digits$} ± {sd:.digits$}"));
        }
        rows.push(row);
    }
    let widths: Vec<usize> =
        (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(v, &w)| format!("{v:>w$}")).collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
        }
    }
    out
}

/// Plot-ready long format: one row per cell and metric.
pub fn write_long<W: Write>(s: &Summary, w: W) -> Result<(), Error> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cell".to_string()];
    header.extend(s.params.iter().cloned());
    header.extend(["metric", "mean", "sd", "runs"].map(String::from));
    out.write_record(&header)?;
    for (i, r) in s.rows.iter().enumerate() {
        for (m, &(mean, sd)) in METRICS.iter().zip(&r.metrics) {
            let mut row = vec![i.to_string()];
            row.extend(r.params.iter().cloned());
            row.extend([m.to_string(), mean.to_string(), sd.to_string(), r.runs.to_string()]);
            out.write_record(&row)?;
        }
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
