//! Plot-data tables aggregated from run directories.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::run::{quantile_sorted, write_csv_atomic};

/// Parsed `metrics.csv`: column names and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricsTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    if s.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        s.parse::<f64>().map_err(|e| {
                            Error::Config(format!("{}:{}: {e}", path.display(), i + 2))
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// `metrics.csv` files of a run directory (top level or `rep_*`).
pub fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let top = dir.join("metrics.csv");
    if top.exists() {
        return Ok(vec![top]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("rep_")))
        .map(|p| p.join("metrics.csv"))
        .filter(|p| p.exists())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("{}: no metrics.csv found", dir.display())));
    }
    Ok(files)
}

/// Writes `<out>/<metric>.csv` with columns
/// `iteration,series,replicates,median,q25,q75` for every metric column
/// found in the given run directories; each directory is one series.
pub fn write_report(dirs: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut per_metric: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for dir in dirs {
        let series = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("run")
            .to_string();
        let tables = metrics_files(dir)?
            .iter()
            .map(|p| MetricsTable::read(p))
            .collect::<Result<Vec<_>>>()?;
        let columns: Vec<String> = tables[0]
            .columns
            .iter()
            .filter(|c| *c != "iteration" && *c != "n")
            .cloned()
            .collect();
        for metric in columns {
            let mut by_iter: Vec<(usize, Vec<f64>)> = Vec::new();
            for t in &tables {
                let (Some(it), Some(vals)) = (t.column("iteration"), t.column(&metric)) else { continue };
                for (i, v) in it.into_iter().zip(vals) {
                    if !v.is_finite() {
                        continue;
                    }
                    let i = i as usize;
                    match by_iter.iter_mut().find(|e| e.0 == i) {
                        Some(e) => e.1.push(v),
                        None => by_iter.push((i, vec![v])),
                    }
                }
            }
            by_iter.sort_by_key(|e| e.0);
            let rows: Vec<Vec<String>> = by_iter
                .into_iter()
                .map(|(i, mut v)| {
                    v.sort_by(f64::total_cmp);
                    vec![
                        i.to_string(),
                        series.clone(),
                        v.len().to_string(),
                        quantile_sorted(&v, 0.5).to_string(),
                        quantile_sorted(&v, 0.25).to_string(),
                        quantile_sorted(&v, 0.75).to_string(),
                    ]
                })
                .collect();
            match per_metric.iter_mut().find(|e| e.0 == metric) {
                Some(e) => e.1.extend(rows),
                None => per_metric.push((metric, rows)),
            }
        }
    }
    let header: Vec<String> = ["iteration", "series", "replicates", "median", "q25", "q75"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut written = Vec::new();
    for (metric, rows) in per_metric {
        let path = out.join(format!("{metric}.csv"));
        write_csv_atomic(&path, &header, rows)?;
        written.push(path);
    }
    Ok(written)
}
