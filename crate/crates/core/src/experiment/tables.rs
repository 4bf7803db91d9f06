//! CSV, JSON and plain-text renderings of study summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::run::{ExperimentOutcome, ReplicationSummary};
use crate::error::{Error, Result};

/// Everything `summary.json` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub rows: Vec<ReplicationSummary>,
}

impl StudySummary {
    pub fn from_outcomes(outcomes: &[ExperimentOutcome]) -> Self {
        Self { rows: outcomes.iter().map(|o| o.summary.clone()).collect() }
    }
}

/// One failed step of one replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub model: String,
    #[serde(rename = "L")]
    pub side: f64,
    pub replication: usize,
    /// `sampler`, `p=<multiplier>` or `range`.
    pub stage: String,
    pub reason: String,
}

pub fn failure_rows(outcomes: &[ExperimentOutcome]) -> Vec<FailureRow> {
    let mut out = Vec::new();
    for o in outcomes {
        let row = |i: usize, stage: String, reason: String| FailureRow {
            model: o.config.label.clone(),
            side: o.config.side,
            replication: i,
            stage,
            reason,
        };
        for r in &o.records {
            if let Err(e) = &r.count {
                out.push(row(r.replication, "sampler".into(), e.clone()));
                continue;
            }
            for (p, c) in o.config.multipliers.iter().zip(&r.columns) {
                match c {
                    Err(e) => out.push(row(r.replication, format!("p={p}"), e.clone())),
                    Ok(d) if d.interval.is_none() => {
                        out.push(row(r.replication, format!("p={p}"), format!("no empty space (N = {}, V = 0)", d.n_isolated)))
                    }
                    Ok(_) => {}
                }
            }
            if let Some(Err(e)) = &r.range {
                out.push(row(r.replication, "range".into(), e.clone()));
            }
        }
    }
    out
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn multipliers(summary: &StudySummary) -> Result<Vec<f64>> {
    let first = summary.rows.first().ok_or_else(|| Error::invalid("cannot emit tables for an empty summary"))?;
    let ps: Vec<f64> = first.columns.iter().map(|c| c.multiplier).collect();
    if summary.rows.iter().any(|r| r.columns.iter().map(|c| c.multiplier).ne(ps.iter().copied())) {
        return Err(Error::invalid("all rows of a table must share the same multipliers"));
    }
    Ok(ps)
}

fn table1(summary: &StudySummary, ps: &[f64]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["model".to_string(), "L".into(), "n_bar".into()];
    for p in ps {
        header.push(format!("mean_p{p}"));
        header.push(format!("sd_p{p}"));
    }
    let rows = summary
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone(), r.side.to_string(), num(r.mean_count)];
            for c in &r.columns {
                row.push(num(c.mean_beta));
                row.push(num(c.sd_beta));
            }
            row
        })
        .collect();
    (header, rows)
}

fn table2(summary: &StudySummary) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["model", "L", "mean_r_hat", "sd_r_hat", "mean_beta", "sd_beta", "flat", "failures"].map(String::from).to_vec();
    let rows = summary
        .rows
        .iter()
        .filter_map(|r| {
            let g = r.range.as_ref()?;
            Some(vec![
                r.model.clone(),
                r.side.to_string(),
                num(g.mean_r_hat),
                num(g.sd_r_hat),
                num(g.mean_beta),
                num(g.sd_beta),
                g.flat_count.to_string(),
                g.failure_count.to_string(),
            ])
        })
        .collect();
    (header, rows)
}

fn table3(summary: &StudySummary, ps: &[f64], with_range: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["model".to_string(), "L".into()];
    header.extend(ps.iter().map(|p| format!("coverage_p{p}")));
    if with_range {
        header.push("coverage_r_hat".into());
    }
    header.extend(ps.iter().map(|p| format!("failures_p{p}")));
    let rows = summary
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone(), r.side.to_string()];
            row.extend(r.columns.iter().map(|c| num(c.coverage_rate)));
            if with_range {
                row.push(num(r.range.as_ref().and_then(|g| g.coverage_rate)));
            }
            row.extend(r.columns.iter().map(|c| c.failure_count.to_string()));
            row
        })
        .collect();
    (header, rows)
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into())
}

fn aligned(out: &mut String, title: &str, cells: &[Vec<String>]) {
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|j| cells.iter().filter_map(|r| r.get(j)).map(|c| c.chars().count()).max().unwrap_or(0)).collect();
    let _ = writeln!(out, "{title}");
    for r in cells {
        let line: Vec<String> = r.iter().enumerate().map(|(j, c)| format!("{c:>w$}", w = widths[j])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out.push('\n');
}

fn text_tables(summary: &StudySummary, ps: &[f64]) -> String {
    let mut out = String::new();
    let mut t1 = vec![{
        let mut h = vec!["model".to_string(), "L".into(), "n_bar".into()];
        h.extend(ps.iter().map(|p| format!("p={p}")));
        h
    }];
    for r in &summary.rows {
        let mut row = vec![r.model.clone(), r.side.to_string(), fixed(r.mean_count, 1)];
        row.extend(r.columns.iter().map(|c| format!("{} ({})", fixed(c.mean_beta, 1), fixed(c.sd_beta, 1))));
        t1.push(row);
    }
    aligned(&mut out, "Mean (sd) of beta estimates", &t1);

    if summary.rows.iter().any(|r| r.range.is_some()) {
        let mut t2 = vec![["model", "L", "R_hat", "beta(R_hat)"].map(String::from).to_vec()];
        for r in &summary.rows {
            if let Some(g) = &r.range {
                t2.push(vec![
                    r.model.clone(),
                    r.side.to_string(),
                    format!("{} ({})", fixed(g.mean_r_hat, 3), fixed(g.sd_r_hat, 3)),
                    format!("{} ({})", fixed(g.mean_beta, 1), fixed(g.sd_beta, 1)),
                ]);
            }
        }
        aligned(&mut out, "Range estimate and beta at the estimated range", &t2);
    }

    let with_range = summary.rows.iter().any(|r| r.range.is_some());
    let mut t3 = vec![{
        let mut h = vec!["model".to_string(), "L".into()];
        h.extend(ps.iter().map(|p| format!("p={p}")));
        if with_range {
            h.push("R_hat".into());
        }
        h
    }];
    let pct = |v: Option<f64>| fixed(v.map(|x| 100.0 * x), 1);
    for r in &summary.rows {
        let mut row = vec![r.model.clone(), r.side.to_string()];
        row.extend(r.columns.iter().map(|c| pct(c.coverage_rate)));
        if with_range {
            row.push(pct(r.range.as_ref().and_then(|g| g.coverage_rate)));
        }
        t3.push(row);
    }
    aligned(&mut out, "Coverage (%) of confidence intervals", &t3);
    out
}

/// Writes `table1.csv`, `table2.csv` (when a range column exists),
/// `table3.csv`, `summary.json`, `tables.txt` and `failures.csv` into
/// `out_dir` and returns their paths.
pub fn emit_tables(summary: &StudySummary, failures: &[FailureRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ps = multipliers(summary)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let with_range = summary.rows.iter().any(|r| r.range.is_some());

    let path = out_dir.join("table1.csv");
    let (h, rows) = table1(summary, &ps);
    write_csv(&path, &h, &rows)?;
    written.push(path);

    if with_range {
        let path = out_dir.join("table2.csv");
        let (h, rows) = table2(summary);
        write_csv(&path, &h, &rows)?;
        written.push(path);
    }

    let path = out_dir.join("table3.csv");
    let (h, rows) = table3(summary, &ps, with_range);
    write_csv(&path, &h, &rows)?;
    written.push(path);

    let path = out_dir.join("failures.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["model", "L", "replication", "stage", "reason"]).map_err(|e| csv_err(&path, e))?;
    for f in failures {
        let rec = [f.model.clone(), f.side.to_string(), f.replication.to_string(), f.stage.clone(), f.reason.clone()];
        w.write_record(&rec).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::parse("summary", e))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = out_dir.join("tables.txt");
    fs::write(&path, text_tables(summary, &ps)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn read_summary(path: &Path) -> Result<StudySummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}
