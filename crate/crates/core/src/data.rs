//! Datasets, the squared-error loss, and the assumption checks every
//! stacking argument starts from.
//!
//! A [`Dataset`] holds one feature matrix per component slot plus a shared
//! target vector. Components only ever interact with the theory through
//! their [`OutputVector`]s, the values they produce on every record.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for the linear independence check.
pub const A1_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Row-major feature matrix for one component slot.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * names.len() {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: rows * names.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { names, rows, values })
    }

    /// Builds a matrix from per-record rows, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    what: "feature row",
                    expected: cols,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let names = (0..cols).map(|c| format!("x{c}")).collect();
        Self::new(names, rows.len(), values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((0..self.rows).map(|i| self.row(i)[j]).collect())
    }

    fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            names: self.names.clone(),
            rows: indices.len(),
            values,
        }
    }
}

/// Labeled records: one input matrix per component slot and shared targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Vec<FeatureMatrix>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<FeatureMatrix>, targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Dataset("a dataset needs at least one record".into()));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        for m in &inputs {
            if m.rows() != targets.len() {
                return Err(Error::Dimension {
                    what: "input matrix rows",
                    expected: targets.len(),
                    got: m.rows(),
                });
            }
        }
        Ok(Self { inputs, targets })
    }

    /// A dataset with no input slots, for components known only through
    /// their outputs.
    pub fn targets_only(targets: Vec<f64>) -> Result<Self> {
        Self::new(Vec::new(), targets)
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn slots(&self) -> usize {
        self.inputs.len()
    }

    pub fn slot(&self, j: usize) -> Option<&FeatureMatrix> {
        self.inputs.get(j)
    }

    pub fn inputs(&self) -> &[FeatureMatrix] {
        &self.inputs
    }

    /// Looks up a column by its full CSV name (`c<j>_<name>`).
    pub fn column(&self, full_name: &str) -> Option<Vec<f64>> {
        let (slot, name) = parse_column_name(full_name)?;
        self.inputs.get(slot)?.column(name)
    }

    /// Restricts the dataset to the given records, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Dataset(format!(
                "record index {bad} out of range for {} records",
                self.n()
            )));
        }
        let inputs = self.inputs.iter().map(|m| m.select(indices)).collect();
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        Self::new(inputs, targets)
    }

    /// Splits into the first `n_first` records and the rest.
    pub fn split_at(&self, n_first: usize) -> Result<(Self, Self)> {
        let first: Vec<usize> = (0..n_first).collect();
        let rest: Vec<usize> = (n_first..self.n()).collect();
        Ok((self.select(&first)?, self.select(&rest)?))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file).map_err(|e| match e {
            Error::Csv { source, .. } => Error::csv(path, source),
            Error::Dataset(msg) => Error::Dataset(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Reads the CSV layout: a header row, columns `c<j>_<name>` grouped by
    /// component slot `j`, and one `target` column.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::csv("<csv>", e))?.clone();

        let mut target_col = None;
        let mut slots: BTreeMap<usize, Vec<(usize, String)>> = BTreeMap::new();
        for (idx, h) in headers.iter().enumerate() {
            if h == "target" {
                if target_col.replace(idx).is_some() {
                    return Err(Error::Dataset("duplicate target column".into()));
                }
            } else if let Some((slot, name)) = parse_column_name(h) {
                slots.entry(slot).or_default().push((idx, name.to_string()));
            } else {
                return Err(Error::Dataset(format!(
                    "column {h:?} is neither `target` nor `c<j>_<name>`"
                )));
            }
        }
        let target_col = target_col.ok_or_else(|| Error::Dataset("missing target column".into()))?;
        for (expected, &slot) in slots.keys().enumerate() {
            if slot != expected {
                return Err(Error::Dataset(format!(
                    "component slots must be numbered from 0 without gaps; missing c{expected}_"
                )));
            }
        }

        let mut targets = Vec::new();
        let mut cells: Vec<Vec<f64>> = vec![Vec::new(); slots.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::csv("<csv>", e))?;
            let parse = |idx: usize| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("");
                raw.trim().parse::<f64>().map_err(|_| {
                    Error::Dataset(format!(
                        "record {}: cannot parse {raw:?} in column {:?}",
                        line + 1,
                        &headers[idx]
                    ))
                })
            };
            targets.push(parse(target_col)?);
            for (slot, cols) in slots.values().enumerate() {
                for (idx, _) in cols {
                    cells[slot].push(parse(*idx)?);
                }
            }
        }
        let n = targets.len();
        let inputs = slots
            .into_values()
            .zip(cells)
            .map(|(cols, values)| FeatureMatrix::new(cols.into_iter().map(|(_, name)| name).collect(), n, values))
            .collect::<Result<Vec<_>>>()?;
        Self::new(inputs, targets)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::new();
        for (j, m) in self.inputs.iter().enumerate() {
            header.extend(m.names().iter().map(|n| format!("c{j}_{n}")));
        }
        header.push("target".into());
        wtr.write_record(&header).map_err(|e| Error::csv("<csv>", e))?;
        for i in 0..self.n() {
            let mut row: Vec<String> = Vec::with_capacity(header.len());
            for m in &self.inputs {
                row.extend(m.row(i).iter().map(|v| v.to_string()));
            }
            row.push(self.targets[i].to_string());
            wtr.write_record(&row).map_err(|e| Error::csv("<csv>", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Csv { source, .. } => Error::csv(path, source),
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

fn parse_column_name(header: &str) -> Option<(usize, &str)> {
    let rest = header.strip_prefix('c')?;
    let (slot, name) = rest.split_once('_')?;
    Some((slot.parse().ok()?, name))
}

/// A component evaluated on every record of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OutputVector(Vec<f64>);

impl OutputVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output vector"));
        }
        Ok(Self(values))
    }

    /// The constant-one output of the bias component.
    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for OutputVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<OutputVector> for Vec<f64> {
    fn from(v: OutputVector) -> Self {
        v.0
    }
}

impl AsRef<[f64]> for OutputVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for OutputVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Sum of squared residuals between predictions and targets.
pub fn total_loss(outputs: impl AsRef<[f64]>, targets: impl AsRef<[f64]>) -> Result<f64> {
    let (a, b) = (outputs.as_ref(), targets.as_ref());
    if a.len() != b.len() {
        return Err(Error::Dimension {
            what: "loss operands",
            expected: b.len(),
            got: a.len(),
        });
    }
    Ok(sse(a, b))
}

pub(crate) fn sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Root mean squared error for a stored sum of squares over `n` records.
pub fn rmse(sse: f64, n: usize) -> f64 {
    (sse / n as f64).sqrt()
}

/// Outcome of the linear independence, no-perfect-component and width checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_linear_independence: bool,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
    pub a2_no_perfect_component: bool,
    /// Sum of absolute residuals `sum_i |f_j(x_i) - y_i|`, one per output.
    pub residual_abs_sums: Vec<f64>,
    pub a5_width_bound: bool,
    pub k: usize,
    pub n: usize,
}

impl AssumptionReport {
    /// Index of the first output that is dependent on the earlier ones, if A1 fails.
    pub fn first_dependent(outputs: &[OutputVector]) -> Option<usize> {
        (1..=outputs.len()).find_map(|m| {
            let (smallest, largest) = singular_extremes(&outputs[..m]);
            (smallest <= A1_RELATIVE_TOLERANCE * largest).then_some(m - 1)
        })
    }
}

/// `K < 2*sqrt(N) - 1`, strict.
pub fn width_bound_holds(k: usize, n: usize) -> bool {
    (k as f64) < 2.0 * (n as f64).sqrt() - 1.0
}

fn singular_extremes(outputs: &[OutputVector]) -> (f64, f64) {
    let n = outputs.first().map_or(0, OutputVector::len);
    let cols = outputs.len();
    if n == 0 || cols == 0 {
        return (0.0, 0.0);
    }
    let m = DMatrix::from_fn(n, cols, |i, j| outputs[j][i]);
    let sv = m.singular_values();
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    // Fewer records than columns means a rank deficit the SVD cannot show.
    let smallest = if n < cols {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    (smallest, largest)
}

/// Checks A1, A2 and A5 for `outputs` (the bias output `f0` first) against
/// `targets`. Violations are reported, never raised.
pub fn check_assumptions(outputs: &[OutputVector], targets: &[f64]) -> Result<AssumptionReport> {
    if outputs.is_empty() {
        return Err(Error::Dataset("assumption check needs at least one output".into()));
    }
    for o in outputs {
        if o.len() != targets.len() {
            return Err(Error::Dimension {
                what: "output vector",
                expected: targets.len(),
                got: o.len(),
            });
        }
    }
    let n = targets.len();
    let k = outputs.len() - 1;
    let (smallest, largest) = singular_extremes(outputs);
    let residual_abs_sums: Vec<f64> = outputs
        .iter()
        .map(|o| o.iter().zip(targets).map(|(f, y)| (f - y).abs()).sum())
        .collect();
    Ok(AssumptionReport {
        a1_linear_independence: largest > 0.0 && smallest > A1_RELATIVE_TOLERANCE * largest,
        smallest_singular_value: smallest,
        largest_singular_value: largest,
        a2_no_perfect_component: residual_abs_sums.iter().all(|&s| s > 0.0),
        residual_abs_sums,
        a5_width_bound: width_bound_holds(k, n),
        k,
        n,
    })
}
