//! Method x dataset comparison tables with "mean (std)" cells in percent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::RunResult;

pub const AVERAGE_COLUMN: &str = "Avg.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Fractions in [0, 1].
    pub mean: f64,
    pub std: f64,
}

impl Cell {
    /// `"59.37 (7.79)"` for mean 0.5937, std 0.0779.
    pub fn percent(&self) -> String {
        format!("{:.2} ({:.2})", self.mean * 100.0, self.std * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    /// One cell per dataset column.
    pub cells: Vec<Cell>,
    /// Unweighted mean of the row's means and of its stds.
    pub average: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub datasets: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown table format {other:?}"
            ))),
        }
    }
}

/// Unweighted mean of the cells' means and of their stds.
pub fn average(cells: &[Cell]) -> Result<Cell> {
    if cells.is_empty() {
        return Err(Error::EmptyResults);
    }
    let n = cells.len() as f64;
    Ok(Cell {
        mean: cells.iter().map(|c| c.mean).sum::<f64>() / n,
        std: cells.iter().map(|c| c.std).sum::<f64>() / n,
    })
}

/// Rows are methods and columns datasets, both in order of first appearance.
/// Every method must have exactly one result per dataset.
pub fn emit_table(results: &[RunResult]) -> Result<Table> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut datasets: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for r in results {
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let rows = methods
        .into_iter()
        .map(|method| {
            let cells = datasets
                .iter()
                .map(|d| {
                    let found: Vec<&RunResult> = results
                        .iter()
                        .filter(|r| r.method == method && &r.dataset == d)
                        .collect();
                    match found.as_slice() {
                        [r] => Ok(Cell {
                            mean: r.mean,
                            std: r.std,
                        }),
                        [] => Err(Error::AxisMismatch(format!(
                            "{method} has no result for {d}"
                        ))),
                        _ => Err(Error::AxisMismatch(format!(
                            "{method} has {} results for {d}",
                            found.len()
                        ))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TableRow {
                average: average(&cells)?,
                method,
                cells,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Table { datasets, rows })
}

impl Table {
    fn header(&self) -> Vec<String> {
        std::iter::once("Method".to_string())
            .chain(self.datasets.iter().cloned())
            .chain(std::iter::once(AVERAGE_COLUMN.to_string()))
            .collect()
    }

    fn string_rows(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                std::iter::once(r.method.clone())
                    .chain(r.cells.iter().map(Cell::percent))
                    .chain(std::iter::once(r.average.percent()))
                    .collect()
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let header = self.header();
        let rows = self.string_rows();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                rows.iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cols: &[String]| {
            cols.iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, w))| {
                    if i == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for r in &rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(self.header()).map_err(csv_err)?;
        for r in self.string_rows() {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self, format: TableFormat) -> Result<String> {
        match format {
            TableFormat::Text => Ok(self.to_text()),
            TableFormat::Csv => self.to_csv(),
            TableFormat::Json => self.to_json(),
        }
    }
}
