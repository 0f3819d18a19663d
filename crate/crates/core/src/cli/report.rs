//! Flat run rows, the per-group summary and CSV writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::{pareto_front, ParetoPoint};
use crate::training::{median, median_mad, RunRecord};
use crate::Result;

/// Header comment on every CSV this module writes.
pub const SCHEMA_LINE: &str = "# schema=1";

/// One scored run for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run_id: String,
    pub task: String,
    pub model: String,
    pub seed: u64,
    pub iterations: usize,
    pub mse: f64,
    pub nonzero: usize,
    pub diverged: bool,
}

impl RunRow {
    /// Rows for a record: one per op for multi-output tasks, otherwise one.
    pub fn from_record(r: &RunRecord, run_id: &str) -> Vec<RunRow> {
        let row = |task: String, mse: f64| RunRow {
            run_id: run_id.to_string(),
            task,
            model: r.model.clone(),
            seed: r.seed,
            iterations: r.train_trace.len(),
            mse,
            nonzero: r.nonzero,
            diverged: r.diverged || !mse.is_finite(),
        };
        if r.op_mse.is_empty() {
            vec![row(r.task.clone(), r.val_mse)]
        } else {
            r.op_mse
                .iter()
                .map(|(op, mse)| row(format!("{}-{op}", r.task), *mse))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub task: String,
    pub runs: usize,
    pub median_mse: f64,
    pub mad_mse: f64,
    pub median_nonzero: f64,
    pub diverged: usize,
    /// Empty, `partial` when some runs diverged, `empty` when all did.
    pub flag: &'static str,
}

/// Median and MAD per `(model, task)`, over the runs that did not diverge.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.model, &r.task)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, task), members)| {
            let ok: Vec<&&RunRow> = members.iter().filter(|r| !r.diverged).collect();
            let diverged = members.len() - ok.len();
            let mses: Vec<f64> = ok.iter().map(|r| r.mse).collect();
            let nz: Vec<f64> = ok.iter().map(|r| r.nonzero as f64).collect();
            let (median_mse, mad_mse) = median_mad(&mses).unwrap_or((f64::NAN, f64::NAN));
            SummaryRow {
                model: model.to_string(),
                task: task.to_string(),
                runs: members.len(),
                median_mse,
                mad_mse,
                median_nonzero: median(&nz).unwrap_or(f64::NAN),
                diverged,
                flag: match (ok.len(), diverged) {
                    (0, _) => "empty",
                    (_, 0) => "",
                    _ => "partial",
                },
            }
        })
        .collect()
}

/// Pareto front of the finished runs of each task.
pub fn pareto_by_task(rows: &[RunRow]) -> Vec<(String, ParetoPoint)> {
    let mut tasks: BTreeMap<&str, Vec<ParetoPoint>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.diverged) {
        tasks.entry(&r.task).or_default().push(ParetoPoint {
            nonzero_params: r.nonzero,
            mse: r.mse,
            run_id: r.run_id.clone(),
        });
    }
    tasks
        .into_iter()
        .flat_map(|(task, pts)| pareto_front(&pts).into_iter().map(move |p| (task.to_string(), p)))
        .collect()
}

/// Opens `path` and writes the schema line; the caller adds a header and rows.
pub fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{SCHEMA_LINE}")?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_runs(path: &Path, rows: &[RunRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["run_id", "task", "model", "seed", "iterations", "mse", "nonzero", "diverged"])?;
    for r in rows {
        w.write_record([
            r.run_id.clone(),
            r.task.clone(),
            r.model.clone(),
            r.seed.to_string(),
            r.iterations.to_string(),
            r.mse.to_string(),
            r.nonzero.to_string(),
            r.diverged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "model",
        "task",
        "runs",
        "median_mse",
        "mad_mse",
        "median_nonzero",
        "diverged",
        "flag",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.task.clone(),
            r.runs.to_string(),
            r.median_mse.to_string(),
            r.mad_mse.to_string(),
            r.median_nonzero.to_string(),
            r.diverged.to_string(),
            r.flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pareto(path: &Path, front: &[(String, ParetoPoint)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["task", "nonzero", "mse", "run_id"])?;
    for (task, p) in front {
        w.write_record([task.clone(), p.nonzero_params.to_string(), p.mse.to_string(), p.run_id.clone()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, task: &str, mse: f64, diverged: bool) -> RunRow {
        RunRow {
            run_id: format!("{model}-{task}-{mse}"),
            task: task.into(),
            model: model.into(),
            seed: 0,
            iterations: 1,
            mse,
            nonzero: 3,
            diverged,
        }
    }

    #[test]
    fn median_and_mad_per_group() {
        let rows = [row("a", "t", 1.0, false), row("a", "t", 2.0, false), row("a", "t", 3.0, false)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].median_mse, s[0].mad_mse, s[0].flag), (2.0, 1.0, ""));
    }

    #[test]
    fn diverged_runs_are_counted_not_scored() {
        let rows = [row("a", "t", 1.0, false), row("a", "t", f64::NAN, true), row("a", "t", 3.0, false)];
        let s = summarize(&rows);
        assert_eq!((s[0].diverged, s[0].median_mse, s[0].flag), (1, 2.0, "partial"));
        let s = summarize(&[row("b", "t", f64::NAN, true)]);
        assert_eq!(s[0].flag, "empty");
        assert!(s[0].median_mse.is_nan());
    }

    #[test]
    fn groups_are_keyed_by_model_and_task() {
        let rows = [
            row("a", "t1", 1.0, false),
            row("a", "t2", 1.0, false),
            row("b", "t1", 1.0, false),
            row("a", "t1", 5.0, false),
        ];
        let s = summarize(&rows);
        let keys: Vec<(&str, &str, usize)> = s.iter().map(|r| (r.model.as_str(), r.task.as_str(), r.runs)).collect();
        assert_eq!(keys, vec![("a", "t1", 2), ("a", "t2", 1), ("b", "t1", 1)]);
    }
}
