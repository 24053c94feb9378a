//! CSV and JSON file formats.
//!
//! | file      | columns                                      |
//! |-----------|----------------------------------------------|
//! | dataset   | `y,t,tau,x1,...,xp` (`tau` optional)         |
//! | truth     | `i,j,beta_true`                              |
//! | fit       | `i,t,tau,j,beta`                             |
//! | path      | `lambda,bic,converged,loss,penalty,support_total` |
//! | grid      | `t,tau,j,beta_hat`                           |
//! | metrics   | `j,precision,recall,tnr,npv,defined` + `mse` row |
//! | queries   | `t,tau,x1,...,xp`                            |
//! | predictions | `t,tau,quantile`                           |
//! | edges     | `edge_id,i,k`                                |
//!
//! Sample and covariate indices are 1-based. Floats are written with the
//! shortest representation that parses back to the same value, so reading
//! a file and writing it again reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm::FitResult;
use crate::data_model::{CoefMatrix, Dataset};
use crate::error::{Error, Result};
use crate::knn_graph::KnnGraph;
use crate::metrics::PairConfusion;
use crate::model_select::PathResult;
use crate::predict::CoefGrid;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        msg: msg.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => io_err(path, io),
            _ => unreachable!(),
        },
        _ => {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        }
    }
}

/// Reader over a CSV file with a header row. Records are exposed with their
/// line numbers for error messages.
struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_err(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(parse_err(path, 1, "missing header row"));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn expect_header(&self, names: &[&str]) -> Result<()> {
        if self.header != names {
            return Err(parse_err(
                &self.path,
                1,
                format!("expected header `{}`, found `{}`", names.join(","), self.header.join(",")),
            ));
        }
        Ok(())
    }

    fn float(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<f64> {
        let raw = rec.get(col).unwrap_or("");
        let v: f64 = raw.parse().map_err(|_| {
            parse_err(&self.path, line, format!("column `{}`: `{raw}` is not a number", self.header[col]))
        })?;
        if !v.is_finite() {
            return Err(parse_err(&self.path, line, format!("column `{}`: non-finite value", self.header[col])));
        }
        Ok(v)
    }

    fn index(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<usize> {
        let raw = rec.get(col).unwrap_or("");
        match raw.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(parse_err(
                &self.path,
                line,
                format!("column `{}`: `{raw}` is not a 1-based index", self.header[col]),
            )),
        }
    }
}

struct Out {
    path: PathBuf,
    w: csv::Writer<File>,
}

impl Out {
    fn create(path: &Path, header: &[&str]) -> Result<Out> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut out = Out {
            path: path.to_path_buf(),
            w: csv::Writer::from_writer(file),
        };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.w.write_record(&fields).map_err(|e| csv_err(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

/// Dataset file contents before quantile levels are settled.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCsv {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub tau: Option<Vec<f64>>,
    pub x: Vec<f64>,
    pub p: usize,
}

impl DatasetCsv {
    /// Builds a validated dataset. When the file had no `tau` column the
    /// levels are drawn uniformly from `delta` with `seed`.
    pub fn into_dataset(self, delta: (f64, f64), seed: u64) -> Result<Dataset> {
        let tau = match self.tau {
            Some(tau) => tau,
            None => {
                if !(0.0 < delta.0 && delta.0 < delta.1 && delta.1 < 1.0) {
                    return Err(crate::error::invalid("delta", "quantile interval must lie inside (0, 1)"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.y.len()).map(|_| rng.random_range(delta.0..delta.1)).collect()
            }
        };
        let mut ds = Dataset::new(self.y, self.x, self.p, self.t, tau)?;
        ds.delta = delta;
        Ok(ds)
    }
}

fn x_columns(table: &Table, first: usize) -> Result<usize> {
    let p = table.header.len() - first;
    for (k, name) in table.header[first..].iter().enumerate() {
        if *name != format!("x{}", k + 1) {
            return Err(parse_err(&table.path, 1, format!("expected column `x{}`, found `{name}`", k + 1)));
        }
    }
    if p == 0 {
        return Err(parse_err(&table.path, 1, "no covariate columns x1..xp"));
    }
    Ok(p)
}

/// Reads `y,t[,tau],x1,...,xp`.
pub fn read_dataset(path: &Path) -> Result<DatasetCsv> {
    let table = Table::read(path)?;
    let h = &table.header;
    if h.len() < 2 || h[0] != "y" || h[1] != "t" {
        return Err(parse_err(path, 1, "header must start with `y,t`"));
    }
    let has_tau = h.get(2).is_some_and(|c| c == "tau");
    let first_x = if has_tau { 3 } else { 2 };
    let p = x_columns(&table, first_x)?;

    let mut out = DatasetCsv {
        y: Vec::with_capacity(table.rows.len()),
        t: Vec::with_capacity(table.rows.len()),
        tau: has_tau.then(Vec::new),
        x: Vec::with_capacity(table.rows.len() * p),
        p,
    };
    for (line, rec) in &table.rows {
        out.y.push(table.float(*line, rec, 0)?);
        out.t.push(table.float(*line, rec, 1)?);
        if let Some(tau) = out.tau.as_mut() {
            tau.push(table.float(*line, rec, 2)?);
        }
        for j in 0..p {
            out.x.push(table.float(*line, rec, first_x + j)?);
        }
    }
    if out.y.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut header = vec!["y".to_string(), "t".to_string(), "tau".to_string()];
    header.extend((1..=ds.p).map(|j| format!("x{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = Out::create(path, &header)?;
    for i in 0..ds.n() {
        let mut row = vec![ds.y[i].to_string(), ds.t[i].to_string(), ds.tau[i].to_string()];
        row.extend(ds.row(i).iter().map(f64::to_string));
        out.row(row)?;
    }
    out.finish()
}

/// Collects `(i, j, value)` triples into a complete `n x p` matrix.
fn assemble(path: &Path, cells: Vec<(u64, usize, usize, f64)>) -> Result<CoefMatrix> {
    let n = cells.iter().map(|c| c.1).max().unwrap_or(0);
    let p = cells.iter().map(|c| c.2).max().unwrap_or(0);
    if n == 0 {
        return Err(parse_err(path, 2, "no data rows"));
    }
    let mut m = CoefMatrix::zeros(n, p);
    let mut seen = vec![false; n * p];
    for (line, i, j, v) in cells {
        let slot = (j - 1) * n + (i - 1);
        if seen[slot] {
            return Err(parse_err(path, line, format!("duplicate entry for i={i}, j={j}")));
        }
        seen[slot] = true;
        m.set(i - 1, j - 1, v);
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        return Err(parse_err(
            path,
            0,
            format!("missing entry for i={}, j={}", slot % n + 1, slot / n + 1),
        ));
    }
    Ok(m)
}

pub fn write_truth(path: &Path, truth: &CoefMatrix) -> Result<()> {
    let mut out = Out::create(path, &["i", "j", "beta_true"])?;
    for i in 0..truth.n() {
        for j in 0..truth.p() {
            out.row([(i + 1).to_string(), (j + 1).to_string(), truth.get(i, j).to_string()])?;
        }
    }
    out.finish()
}

pub fn read_truth(path: &Path) -> Result<CoefMatrix> {
    let table = Table::read(path)?;
    table.expect_header(&["i", "j", "beta_true"])?;
    let mut cells = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        cells.push((
            *line,
            table.index(*line, rec, 0)?,
            table.index(*line, rec, 1)?,
            table.float(*line, rec, 2)?,
        ));
    }
    assemble(path, cells)
}

/// Fitted coefficients with the training points they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct FitCsv {
    pub points: Vec<(f64, f64)>,
    pub beta: CoefMatrix,
}

pub fn write_fit(path: &Path, points: &[(f64, f64)], beta: &CoefMatrix) -> Result<()> {
    beta.check_shape(points.len(), beta.p())?;
    let mut out = Out::create(path, &["i", "t", "tau", "j", "beta"])?;
    for (i, &(t, tau)) in points.iter().enumerate() {
        for j in 0..beta.p() {
            out.row([
                (i + 1).to_string(),
                t.to_string(),
                tau.to_string(),
                (j + 1).to_string(),
                beta.get(i, j).to_string(),
            ])?;
        }
    }
    out.finish()
}

pub fn read_fit(path: &Path) -> Result<FitCsv> {
    let table = Table::read(path)?;
    table.expect_header(&["i", "t", "tau", "j", "beta"])?;
    let mut cells = Vec::with_capacity(table.rows.len());
    let mut points: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (line, rec) in &table.rows {
        let i = table.index(*line, rec, 0)?;
        let pt = (table.float(*line, rec, 1)?, table.float(*line, rec, 2)?);
        if let Some(prev) = points.insert(i, pt) {
            if prev != pt {
                return Err(parse_err(path, *line, format!("sample {i} has inconsistent (t, tau)")));
            }
        }
        cells.push((*line, i, table.index(*line, rec, 3)?, table.float(*line, rec, 4)?));
    }
    let beta = assemble(path, cells)?;
    Ok(FitCsv {
        points: points.into_values().collect(),
        beta,
    })
}

/// Summary of one fit, stored next to the coefficient file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub lambda: f64,
    pub eta: f64,
    pub k: usize,
    pub iters: usize,
    pub converged: bool,
    pub loss: f64,
    pub penalty: f64,
    pub support_total: usize,
}

impl RunManifest {
    pub fn from_fit(fit: &FitResult, eta: f64, k: usize) -> Self {
        RunManifest {
            lambda: fit.lambda,
            eta,
            k,
            iters: fit.iters,
            converged: fit.converged,
            loss: fit.objective.loss,
            penalty: fit.objective.penalty,
            support_total: fit.support_total(),
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

pub fn write_path(path: &Path, result: &PathResult) -> Result<()> {
    let mut out = Out::create(path, &["lambda", "bic", "converged", "loss", "penalty", "support_total"])?;
    for (fit, bic) in result.fits.iter().zip(&result.bics) {
        out.row([
            fit.lambda.to_string(),
            bic.to_string(),
            fit.converged.to_string(),
            fit.objective.loss.to_string(),
            fit.objective.penalty.to_string(),
            fit.support_total().to_string(),
        ])?;
    }
    out.finish()
}

pub fn write_grid(path: &Path, grid: &CoefGrid) -> Result<()> {
    let mut out = Out::create(path, &["t", "tau", "j", "beta_hat"])?;
    for (k, t) in grid.t_grid.iter().enumerate() {
        for (l, tau) in grid.tau_grid.iter().enumerate() {
            for j in 0..grid.p {
                out.row([t.to_string(), tau.to_string(), (j + 1).to_string(), grid.get(k, l, j).to_string()])?;
            }
        }
    }
    out.finish()
}

pub fn read_grid(path: &Path) -> Result<CoefGrid> {
    let table = Table::read(path)?;
    table.expect_header(&["t", "tau", "j", "beta_hat"])?;
    let mut cells = Vec::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        cells.push((
            *line,
            table.float(*line, rec, 0)?,
            table.float(*line, rec, 1)?,
            table.index(*line, rec, 2)?,
            table.float(*line, rec, 3)?,
        ));
    }
    if cells.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    let sorted_unique = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let t_grid = sorted_unique(cells.iter().map(|c| c.1).collect());
    let tau_grid = sorted_unique(cells.iter().map(|c| c.2).collect());
    let p = cells.iter().map(|c| c.3).max().unwrap_or(0);
    let (nk, nl) = (t_grid.len(), tau_grid.len());
    let mut values = vec![0.0; nk * nl * p];
    let mut seen = vec![false; values.len()];
    for (line, t, tau, j, v) in cells {
        let k = t_grid.binary_search_by(|a| a.total_cmp(&t)).expect("value from the grid");
        let l = tau_grid.binary_search_by(|a| a.total_cmp(&tau)).expect("value from the grid");
        let slot = (k * nl + l) * p + (j - 1);
        if seen[slot] {
            return Err(parse_err(path, line, format!("duplicate cell t={t}, tau={tau}, j={j}")));
        }
        seen[slot] = true;
        values[slot] = v;
    }
    if seen.iter().any(|s| !s) {
        return Err(parse_err(path, 0, "grid is incomplete"));
    }
    Ok(CoefGrid {
        t_grid,
        tau_grid,
        p,
        values,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Per-covariate pair metrics followed by an `mse` row whose value sits in
/// the second column.
pub fn write_metrics(path: &Path, per_covariate: &[PairConfusion], mse: f64) -> Result<()> {
    let mut out = Out::create(path, &["j", "precision", "recall", "tnr", "npv", "defined"])?;
    for (j, pc) in per_covariate.iter().enumerate() {
        out.row([
            (j + 1).to_string(),
            fmt_opt(pc.precision),
            fmt_opt(pc.recall),
            fmt_opt(pc.tnr),
            fmt_opt(pc.npv),
            pc.defined_flags(),
        ])?;
    }
    out.row(["mse".to_string(), mse.to_string(), String::new(), String::new(), String::new(), String::new()])?;
    out.finish()
}

/// Query points for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Queries {
    pub points: Vec<(f64, f64)>,
    pub x: Vec<Vec<f64>>,
}

pub fn read_queries(path: &Path) -> Result<Queries> {
    let table = Table::read(path)?;
    if table.header.len() < 2 || table.header[0] != "t" || table.header[1] != "tau" {
        return Err(parse_err(path, 1, "header must start with `t,tau`"));
    }
    let p = x_columns(&table, 2)?;
    let mut q = Queries {
        points: Vec::new(),
        x: Vec::new(),
    };
    for (line, rec) in &table.rows {
        q.points.push((table.float(*line, rec, 0)?, table.float(*line, rec, 1)?));
        q.x.push((0..p).map(|j| table.float(*line, rec, 2 + j)).collect::<Result<_>>()?);
    }
    Ok(q)
}

pub fn write_predictions(path: &Path, points: &[(f64, f64)], values: &[f64]) -> Result<()> {
    let mut out = Out::create(path, &["t", "tau", "quantile"])?;
    for (&(t, tau), v) in points.iter().zip(values) {
        out.row([t.to_string(), tau.to_string(), v.to_string()])?;
    }
    out.finish()
}

/// Debug export of the neighbor graph, one undirected edge per row.
pub fn write_edges(path: &Path, graph: &KnnGraph) -> Result<()> {
    let mut out = Out::create(path, &["edge_id", "i", "k"])?;
    for (m, &(a, b)) in graph.edges().iter().enumerate() {
        out.row([(m + 1).to_string(), (a + 1).to_string(), (b + 1).to_string()])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{generate, SimSpec};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let dir = tmp();
        let (ds, _) = generate(&SimSpec::new(25, 9, 5)).unwrap();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_dataset(&a, &ds).unwrap();
        let back = read_dataset(&a).unwrap().into_dataset(ds.delta, 0).unwrap();
        assert_eq!(back, ds);
        write_dataset(&b, &back).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn dataset_without_tau_draws_levels() {
        let dir = tmp();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y,t,x1\n1.0,0.2,1\n2.5,0.7,1\n").unwrap();
        let raw = read_dataset(&path).unwrap();
        assert!(raw.tau.is_none());
        let ds = raw.clone().into_dataset((0.05, 0.95), 3).unwrap();
        assert!(ds.tau.iter().all(|&t| (0.05..0.95).contains(&t)));
        assert_eq!(ds, raw.into_dataset((0.05, 0.95), 3).unwrap());
    }

    #[test]
    fn malformed_dataset_names_file_and_line() {
        let dir = tmp();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "y,t,tau,x1\n1,0.5,0.5,1\n2,0.5,abc,1\n").unwrap();
        let err = read_dataset(&path).unwrap_err().to_string();
        assert!(err.contains("bad.csv:3"), "{err}");
        assert!(err.contains("tau"), "{err}");

        std::fs::write(&path, "y,t,tau,x2\n1,0.5,0.5,1\n").unwrap();
        assert!(read_dataset(&path).unwrap_err().to_string().contains("bad.csv:1"));

        std::fs::write(&path, "y,t,tau,x1\n1,0.5,0.5\n").unwrap();
        assert!(read_dataset(&path).is_err());

        let missing = dir.path().join("nope.csv");
        assert!(matches!(read_dataset(&missing), Err(Error::Io { .. })));
    }

    #[test]
    fn truth_and_fit_round_trip() {
        let dir = tmp();
        let (ds, truth) = generate(&SimSpec::new(12, 9, 2)).unwrap();
        let p = dir.path().join("truth.csv");
        write_truth(&p, &truth).unwrap();
        assert_eq!(read_truth(&p).unwrap(), truth);

        let f1 = dir.path().join("fit1.csv");
        let f2 = dir.path().join("fit2.csv");
        write_fit(&f1, &ds.points(), &truth).unwrap();
        let back = read_fit(&f1).unwrap();
        assert_eq!(back.points, ds.points());
        assert_eq!(back.beta, truth);
        write_fit(&f2, &back.points, &back.beta).unwrap();
        assert_eq!(std::fs::read(&f1).unwrap(), std::fs::read(&f2).unwrap());
    }

    #[test]
    fn incomplete_fit_is_rejected() {
        let dir = tmp();
        let path = dir.path().join("fit.csv");
        std::fs::write(&path, "i,t,tau,j,beta\n1,0.1,0.5,1,2\n2,0.2,0.5,2,3\n").unwrap();
        assert!(read_fit(&path).unwrap_err().to_string().contains("missing"));
        std::fs::write(&path, "i,t,tau,j,beta\n1,0.1,0.5,1,2\n1,0.1,0.5,1,3\n").unwrap();
        assert!(read_fit(&path).unwrap_err().to_string().contains("fit.csv:3"));
    }

    #[test]
    fn grid_round_trip() {
        let dir = tmp();
        let grid = CoefGrid::from_fn(vec![0.1, 0.5], vec![0.2, 0.4, 0.9], 2, |t, tau| vec![t, t * tau + 0.1]).unwrap();
        let a = dir.path().join("g1.csv");
        let b = dir.path().join("g2.csv");
        write_grid(&a, &grid).unwrap();
        let back = read_grid(&a).unwrap();
        assert_eq!(back, grid);
        write_grid(&b, &back).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tmp();
        let path = dir.path().join("run.json");
        let m = RunManifest {
            lambda: 0.125,
            eta: 1.0,
            k: 5,
            iters: 42,
            converged: true,
            loss: 1.5,
            penalty: 0.25,
            support_total: 7,
        };
        write_manifest(&path, &m).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["lambda", "eta", "k", "iters", "converged", "loss", "penalty", "support_total"] {
            assert!(text.contains(&format!("\"{key}\"")));
        }
    }

    #[test]
    fn metrics_file_layout() {
        let dir = tmp();
        let path = dir.path().join("m.csv");
        let pcs = vec![
            crate::metrics::pair_confusion(&[0.0, 5.0, 5.0], &[0.0, 0.0, 5.0], 1e-9).unwrap(),
            crate::metrics::pair_confusion(&[1.0; 3], &[1.0; 3], 1e-9).unwrap(),
        ];
        write_metrics(&path, &pcs, 0.5).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "j,precision,recall,tnr,npv,defined\n1,0.5,0.5,0,0,1111\n2,,,1,1,0011\nmse,0.5,,,,\n"
        );
    }

    #[test]
    fn edge_export_is_one_based() {
        let dir = tmp();
        let path = dir.path().join("e.csv");
        write_edges(&path, &KnnGraph::from_edges(3, vec![(0, 1), (1, 2)])).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "edge_id,i,k\n1,1,2\n2,2,3\n");
    }

    #[test]
    fn queries_and_predictions() {
        let dir = tmp();
        let path = dir.path().join("q.csv");
        std::fs::write(&path, "t,tau,x1,x2\n0.5,0.5,1,2\n0.1,0.9,1,0\n").unwrap();
        let q = read_queries(&path).unwrap();
        assert_eq!(q.points, vec![(0.5, 0.5), (0.1, 0.9)]);
        assert_eq!(q.x, vec![vec![1.0, 2.0], vec![1.0, 0.0]]);
        let out = dir.path().join("p.csv");
        write_predictions(&out, &q.points, &[1.25, -3.0]).unwrap();
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "t,tau,quantile\n0.5,0.5,1.25\n0.1,0.9,-3\n");
    }
}
