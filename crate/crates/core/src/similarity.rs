//! Feature tables, Gaussian-kernel similarities and the dense similarity
//! matrix.
//!
//! Binary matrix layout (`.hcsim`): the 6 magic bytes `HCSIM1`, the point
//! count as a little-endian `u32`, then the strict upper triangle in row-major
//! order as little-endian `f64`s.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{HcError, Result};
use crate::numeric::CompensatedSum;

pub const MATRIX_MAGIC: &[u8; 6] = b"HCSIM1";

/// Bandwidth multiplier applied to the mean pairwise distance by
/// [`Sigma::Auto`].
pub const AUTO_BANDWIDTH_FACTOR: f64 = 0.5;

/// A row-major table of real-valued features.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() {
            return Err(HcError::DegenerateInput("dataset has no rows".into()));
        }
        if dim == 0 {
            return Err(HcError::DegenerateInput(
                "dataset has no feature columns".into(),
            ));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(HcError::Dataset {
                    row: r + 1,
                    column: row.len().min(dim) + 1,
                    message: format!("expected {dim} columns, found {}", row.len()),
                });
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(HcError::Dataset {
                    row: r + 1,
                    column: c + 1,
                    message: "value is not finite".into(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Dataset {
            rows: rows.len(),
            dim,
            values,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(HcError::invalid(format!(
                "{} labels for {} rows",
                labels.len(),
                self.rows
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices
            .iter()
            .map(|&i| {
                if i < self.rows {
                    Ok(self.row(i).to_vec())
                } else {
                    Err(HcError::invalid(format!("row {i} out of range")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Dataset::from_rows(rows)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }

    /// Z-scores every column. Constant columns become all zeros.
    pub fn standardized(&self) -> Dataset {
        let n = self.rows as f64;
        let mut out = self.clone();
        for c in 0..self.dim {
            let mean = (0..self.rows).map(|r| self.row(r)[c]).sum::<f64>() / n;
            let var = (0..self.rows)
                .map(|r| (self.row(r)[c] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for r in 0..self.rows {
                let v = &mut out.values[r * self.dim + c];
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
        out
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// How to read a delimited feature file.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Field delimiter; sniffed from the first line when `None`.
    pub delimiter: Option<u8>,
    pub has_header: bool,
    /// 0-based column kept aside as the row label.
    pub label_column: Option<usize>,
    /// 0-based columns dropped before parsing numbers.
    pub drop_columns: Vec<usize>,
}

pub fn load_dataset(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Dataset> {
    let mut text = String::new();
    File::open(path.as_ref())?.read_to_string(&mut text)?;
    parse_dataset(&text, options)
}

fn sniff_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    (*b"\t,;")
        .into_iter()
        .find(|&d| first.as_bytes().contains(&d))
        .unwrap_or(b',')
}

/// Parses delimited numeric text. Blank lines are skipped.
pub fn parse_dataset(text: &str, options: &LoadOptions) -> Result<Dataset> {
    let delimiter = options.delimiter.unwrap_or_else(|| sniff_delimiter(text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| HcError::Dataset {
            row: e.position().map(|p| p.line() as usize).unwrap_or(0),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(HcError::Dataset {
                    row: line,
                    column: record.len().min(w) + 1,
                    message: format!("ragged row: expected {w} fields, found {}", record.len()),
                })
            }
            Some(_) => {}
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            if options.label_column == Some(c) {
                labels.push(field.to_string());
                continue;
            }
            if options.drop_columns.contains(&c) {
                continue;
            }
            let value: f64 = field.parse().map_err(|_| HcError::Dataset {
                row: line,
                column: c + 1,
                message: format!("non-numeric value {field:?}"),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HcError::DegenerateInput("no data rows".into()));
    }
    let data = Dataset::from_rows(rows)?;
    if options.label_column.is_some() {
        data.with_labels(labels)
    } else {
        Ok(data)
    }
}

/// Symmetric, nonnegative pairwise similarities with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
    total_weight: f64,
}

impl SimilarityMatrix {
    /// Builds the matrix from `f(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(HcError::invalid(
                "similarity matrix needs at least one point",
            ));
        }
        let mut data = vec![0.0; n * n];
        let mut total = CompensatedSum::new();
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(HcError::invalid(format!(
                        "similarity w({i},{j}) = {v} is not a nonnegative finite number"
                    )));
                }
                data[i * n + j] = v;
                data[j * n + i] = v;
                total.add(v);
            }
        }
        Ok(SimilarityMatrix {
            n,
            data,
            total_weight: total.value(),
        })
    }

    /// From the strict upper triangle in row-major order.
    pub fn from_upper_triangle(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(HcError::invalid(format!(
                "{} upper-triangle entries for n = {n}, expected {expected}",
                upper.len()
            )));
        }
        let mut it = upper.iter().copied();
        Self::from_fn(n, |_, _| it.next().expect("length checked"))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::from_fn(n, |_, _| value)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Cached `sum_{i<j} w(i, j)`.
    #[inline]
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| self.get(i, j)))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_fn(self.n, |i, j| self.get(i, j) * factor)
    }

    /// Reorders points: entry `(i, j)` of the result is `(perm[i], perm[j])`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(HcError::invalid("permutation length differs from n"));
        }
        Self::from_fn(self.n, |i, j| self.get(perm[i], perm[j]))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let n = u32::try_from(self.n)
            .map_err(|_| HcError::invalid("matrix too large for the binary format"))?;
        out.write_all(MATRIX_MAGIC)?;
        out.write_all(&n.to_le_bytes())?;
        for v in self.upper_triangle() {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let truncated = |e: io::Error| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                HcError::Format("file is truncated".into())
            } else {
                HcError::Io(e)
            }
        };
        let mut magic = [0u8; 6];
        input.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MATRIX_MAGIC {
            return Err(HcError::Format("bad magic bytes".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word).map_err(truncated)?;
        let n = u32::from_le_bytes(word) as usize;
        if n == 0 {
            return Err(HcError::Format("matrix declares zero points".into()));
        }
        let count = n * (n - 1) / 2;
        let mut bytes = vec![0u8; count * 8];
        input.read_exact(&mut bytes).map_err(truncated)?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(HcError::Format(format!(
                "trailing bytes after {count} entries for n = {n}"
            )));
        }
        let upper: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_upper_triangle(n, &upper).map_err(|e| HcError::Format(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Kernel bandwidth selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma {
    /// `AUTO_BANDWIDTH_FACTOR` times the mean pairwise Euclidean distance.
    Auto,
    /// The mean pairwise Euclidean distance itself.
    MeanDistance,
    Explicit(f64),
}

impl std::str::FromStr for Sigma {
    type Err = HcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Sigma::Auto),
            "mean" | "mean-distance" => Ok(Sigma::MeanDistance),
            other => other.parse::<f64>().map(Sigma::Explicit).map_err(|_| {
                HcError::invalid(format!("sigma must be auto, mean or a number, got {s:?}"))
            }),
        }
    }
}

/// A Gaussian similarity matrix together with the bandwidth it used.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    pub matrix: SimilarityMatrix,
    pub sigma: f64,
    pub mean_distance: f64,
}

/// Mean Euclidean distance over all unordered pairs of rows.
pub fn mean_pairwise_distance(data: &Dataset) -> f64 {
    let n = data.len();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in i + 1..n {
            acc.add(data.sq_dist(i, j).sqrt());
        }
    }
    acc.value() / (n * (n - 1) / 2) as f64
}

/// `w(i, j) = exp(-|x_i - x_j|^2 / (2 sigma^2))`.
pub fn gaussian_similarity(data: &Dataset, sigma: Sigma) -> Result<GaussianKernel> {
    let n = data.len();
    if n < 2 {
        return Err(HcError::invalid(format!(
            "the Gaussian kernel needs at least 2 points, got {n}"
        )));
    }
    let mean_distance = mean_pairwise_distance(data);
    let sigma = match sigma {
        Sigma::Explicit(s) if s.is_finite() && s > 0.0 => s,
        Sigma::Explicit(s) => {
            return Err(HcError::invalid(format!("sigma must be positive, got {s}")))
        }
        Sigma::Auto | Sigma::MeanDistance if mean_distance <= 0.0 => {
            return Err(HcError::DegenerateInput(
                "all points are identical, so the mean distance is zero".into(),
            ))
        }
        Sigma::Auto => AUTO_BANDWIDTH_FACTOR * mean_distance,
        Sigma::MeanDistance => mean_distance,
    };
    let denom = 2.0 * sigma * sigma;
    let matrix = SimilarityMatrix::from_fn(n, |i, j| (-data.sq_dist(i, j) / denom).exp())?;
    Ok(GaussianKernel {
        matrix,
        sigma,
        mean_distance,
    })
}
