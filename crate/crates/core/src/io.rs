//! CSV formats: input data, path export, metrics and fitted coefficients.
//!
//! Dialect: comma separated, `.` decimals, UTF-8, mandatory header row.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::path::{PathEvent, SolutionPath};
use crate::simlab::MetricsRecord;

pub const PATH_HEADER: [&str; 5] = ["step", "tau", "event", "j", "b_j"];
pub const METRICS_HEADER: [&str; 9] = [
    "method",
    "lambda_ratio",
    "mean_me",
    "mc_stderr_me",
    "mean_tm",
    "cs_rate",
    "sign_rate",
    "false_inclusion_rate",
    "steps_mean",
];

/// A numeric table split into covariates and one response column.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Option<Vec<f64>>,
}

/// Reads a numeric CSV; `response` names the column to split off, if any.
pub fn read_dataset<R: Read>(reader: R, response: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let resp_idx = match response {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("response column `{name}` not found")))?,
        ),
        None => None,
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "row {}, column `{}`: `{v}` is not a number",
                        line + 2,
                        header[c]
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                vals.len(),
                header.len()
            )));
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != resp_idx).collect();
    if cols.is_empty() {
        return Err(Error::Parse("no covariate columns".into()));
    }
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, a| rows[i][cols[a]]);
    let y = resp_idx.map(|c| rows.iter().map(|r| r[c]).collect());
    Ok(Dataset {
        names: cols.iter().map(|&c| header[c].clone()).collect(),
        x,
        y,
    })
}

/// Long-format path export: one `j = 0` row with the event label per
/// breakpoint, then one row per nonzero coefficient (1-based `j`).
pub fn write_path_csv<W: Write>(path: &SolutionPath, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PATH_HEADER)?;
    for (idx, bp) in path.breakpoints.iter().enumerate() {
        let step = idx.to_string();
        let tau = bp.tau.to_string();
        w.write_record([step.as_str(), tau.as_str(), &bp.event.to_string(), "0", ""])?;
        for (j, &v) in bp.b.iter().enumerate() {
            if v != 0.0 {
                w.write_record([
                    step.as_str(),
                    tau.as_str(),
                    "",
                    &(j + 1).to_string(),
                    &v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// A breakpoint read back from a path CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub step: usize,
    pub tau: f64,
    pub event: PathEvent,
    pub b: Vec<f64>,
}

pub fn read_path_csv<R: Read>(reader: R, p: usize) -> Result<Vec<PathRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().collect::<Vec<_>>() != PATH_HEADER {
        return Err(Error::Parse("unexpected path CSV header".into()));
    }
    let mut out: Vec<PathRow> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{}`", field(k))))
        };
        let step: usize = field(0)
            .parse()
            .map_err(|_| Error::Parse(format!("bad step `{}`", field(0))))?;
        let j: usize = field(3)
            .parse()
            .map_err(|_| Error::Parse(format!("bad index `{}`", field(3))))?;
        if j == 0 {
            out.push(PathRow {
                step,
                tau: num(1)?,
                event: field(2).parse()?,
                b: vec![0.0; p],
            });
        } else {
            let row = out.last_mut().filter(|r| r.step == step).ok_or_else(|| {
                Error::Parse(format!(
                    "coefficient row for step {step} before its event row"
                ))
            })?;
            if j > p {
                return Err(Error::IndexOutOfRange { index: j, p });
            }
            row.b[j - 1] = num(4)?;
        }
    }
    Ok(out)
}

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.to_string(),
            r.lambda_ratio.to_string(),
            r.mean_me.to_string(),
            r.mc_stderr_me.to_string(),
            r.mean_tm.to_string(),
            r.cs_rate.to_string(),
            r.sign_rate.to_string(),
            r.false_inclusion_rate.to_string(),
            r.steps_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a metrics CSV, keyed by column name.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub values: Vec<(String, f64)>,
}

impl MetricsRow {
    pub fn get(&self, column: &str) -> Option<f64> {
        self.values
            .iter()
            .find(|(k, _)| k == column)
            .map(|(_, v)| *v)
    }
}

pub fn read_metrics_csv<R: Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.first().map(String::as_str) != Some("method") {
        return Err(Error::Parse(
            "metrics CSV must start with a `method` column".into(),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let method = rec.get(0).unwrap_or("").to_owned();
        let values = header[1..]
            .iter()
            .zip(rec.iter().skip(1))
            .map(|(h, v)| {
                v.parse::<f64>()
                    .map(|x| (h.clone(), x))
                    .map_err(|_| Error::Parse(format!("column `{h}`: `{v}` is not a number")))
            })
            .collect::<Result<_>>()?;
        out.push(MetricsRow { method, values });
    }
    Ok(out)
}

/// Fitted coefficients, one row per covariate.
#[derive(Debug, Clone)]
pub struct FitTable<'a> {
    pub names: &'a [String],
    pub coefficients: &'a [f64],
    pub standardized: &'a [f64],
    pub lambda: f64,
    pub sigma_hat: Option<f64>,
    pub kkt_residual: f64,
}

pub fn write_fit_csv<W: Write>(t: &FitTable<'_>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "variable",
        "coefficient",
        "standardized_coefficient",
        "active",
        "lambda",
        "sigma_hat",
        "kkt_max_residual",
    ])?;
    let sigma = t.sigma_hat.map(|s| s.to_string()).unwrap_or_default();
    for ((name, c), s) in t.names.iter().zip(t.coefficients).zip(t.standardized) {
        w.write_record([
            name.clone(),
            c.to_string(),
            s.to_string(),
            (*s != 0.0).to_string(),
            t.lambda.to_string(),
            sigma.clone(),
            t.kkt_residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
