//! The six pairwise scores and their symmetric score matrices.
//!
//! Every score is a deterministic function of the four pair expectations, is
//! symmetric in its two arguments, and lands in `[0,1]` when defined. Scores
//! whose defining ratio has a zero denominator are `Undefined`, a first-class
//! outcome that downstream evaluation resolves by policy rather than by a
//! silent default.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::bitseries::{pair_expectations, BitSeries, PairExpectations, Weighting};
use crate::error::{Error, Result};

/// A score outcome: a value in `[0,1]`, or explicitly undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined,
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }
}

/// Agreement rate: `1 - E[|fx - fy|]`. Always defined.
pub fn ham(e: &PairExpectations) -> MetricValue {
    MetricValue::Defined(1.0 - e.absdiff)
}

/// Intersection over union of active samples:
/// `E[fx·fy] / (E[fx] + E[fy] - E[fx·fy])`.
///
/// Undefined when the denominator is zero, i.e. both streams carry no
/// weighted activity at all.
pub fn tmt(e: &PairExpectations) -> MetricValue {
    let denom = (e.x + e.y) - e.product;
    if denom == 0.0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined(e.product / denom)
    }
}

/// Root-distance closeness: `1 - sqrt(E[|fx - fy|])`. For binary streams the
/// squared difference equals the absolute difference, so the usual quadratic
/// mean collapses to this form. Always defined.
pub fn cls(e: &PairExpectations) -> MetricValue {
    MetricValue::Defined(1.0 - e.absdiff.sqrt())
}

/// Cosine of the angle between the streams under the weighted inner product:
/// `E[fx·fy] / (sqrt(E[fx]) · sqrt(E[fy]))`.
///
/// Undefined when either stream has zero weighted activity.
pub fn cos(e: &PairExpectations) -> MetricValue {
    if e.x == 0.0 || e.y == 0.0 {
        return MetricValue::Undefined;
    }
    if e.product == e.x && e.product == e.y {
        // A stream against itself; short-circuit past the sqrt rounding.
        return MetricValue::Defined(1.0);
    }
    MetricValue::Defined((e.product / (e.x.sqrt() * e.y.sqrt())).min(1.0))
}

/// Scaled absolute covariance: `4 · |E[fx·fy] - E[fx]·E[fy]|`. The covariance
/// of two binary streams is bounded by 1/4 in magnitude, so the factor 4
/// stretches it onto `[0,1]`. Always defined.
pub fn cov(e: &PairExpectations) -> MetricValue {
    MetricValue::Defined((4.0 * (e.product - e.x * e.y).abs()).min(1.0))
}

/// Departure from independence: `max(0, 1 - E[fx]·E[fy] / E[fx·fy])`, the
/// relative excess of joint activity over what independence predicts, clamped
/// at zero for anti-correlated pairs.
///
/// Undefined when the streams are never jointly active.
pub fn dep(e: &PairExpectations) -> MetricValue {
    if e.product == 0.0 {
        return MetricValue::Undefined;
    }
    if e.product == e.x && e.product == e.y {
        return MetricValue::Defined(1.0 - e.x);
    }
    MetricValue::Defined((1.0 - (e.x * e.y) / e.product).max(0.0))
}

/// Conditional activity `E[fx·fy] / E[fy]`: how often `fx` fires given `fy`
/// fires. Directional, so not part of the symmetric score set. Undefined when
/// `fy` has zero weighted activity.
pub fn cond_expectation(e: &PairExpectations) -> MetricValue {
    if e.y == 0.0 {
        MetricValue::Undefined
    } else {
        MetricValue::Defined((e.product / e.y).min(1.0))
    }
}

/// The six symmetric scores, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Ham,
    Tmt,
    Cls,
    Cos,
    Cov,
    Dep,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Ham,
        MetricKind::Tmt,
        MetricKind::Cls,
        MetricKind::Cos,
        MetricKind::Cov,
        MetricKind::Dep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ham => "ham",
            MetricKind::Tmt => "tmt",
            MetricKind::Cls => "cls",
            MetricKind::Cos => "cos",
            MetricKind::Cov => "cov",
            MetricKind::Dep => "dep",
        }
    }

    pub fn evaluate(self, e: &PairExpectations) -> MetricValue {
        match self {
            MetricKind::Ham => ham(e),
            MetricKind::Tmt => tmt(e),
            MetricKind::Cls => cls(e),
            MetricKind::Cos => cos(e),
            MetricKind::Cov => cov(e),
            MetricKind::Dep => dep(e),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ham" => Ok(MetricKind::Ham),
            "tmt" => Ok(MetricKind::Tmt),
            "cls" => Ok(MetricKind::Cls),
            "cos" => Ok(MetricKind::Cos),
            "cov" => Ok(MetricKind::Cov),
            "dep" => Ok(MetricKind::Dep),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

/// Symmetric `m x m` matrix of one score over all node pairs of a system.
/// The diagonal is excluded: a node is never paired with itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    metric: MetricKind,
    dim: usize,
    values: Vec<MetricValue>,
}

impl ScoreMatrix {
    /// Fresh matrix with every off-diagonal cell `Undefined`.
    pub fn new(metric: MetricKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::TooFewNodes { got: dim });
        }
        Ok(ScoreMatrix {
            metric,
            dim,
            values: vec![MetricValue::Undefined; dim * dim],
        })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> MetricValue {
        assert!(i != j, "the diagonal is excluded from the score matrix");
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.values[i * self.dim + j]
    }

    /// Set both `(i,j)` and `(j,i)`; the matrix stays symmetric by
    /// construction.
    pub fn set_pair(&mut self, i: usize, j: usize, v: MetricValue) {
        assert!(i != j, "the diagonal is excluded from the score matrix");
        assert!(i < self.dim && j < self.dim, "index out of range");
        self.values[i * self.dim + j] = v;
        self.values[j * self.dim + i] = v;
    }
}

/// Score every unordered node pair of `traces` with one metric.
pub fn score_matrix(
    traces: &[BitSeries],
    w: &Weighting,
    metric: MetricKind,
) -> Result<ScoreMatrix> {
    let mut out = score_matrices(traces, w, &[metric])?;
    Ok(out.pop().expect("one matrix per requested metric"))
}

/// Score every unordered node pair once and evaluate all requested metrics
/// from the shared pair expectations.
pub fn score_matrices(
    traces: &[BitSeries],
    w: &Weighting,
    metrics: &[MetricKind],
) -> Result<Vec<ScoreMatrix>> {
    let m = traces.len();
    let mut out = metrics
        .iter()
        .map(|&k| ScoreMatrix::new(k, m))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..m {
        for j in i + 1..m {
            let e = pair_expectations(&traces[i], &traces[j], w)?;
            for matrix in &mut out {
                matrix.set_pair(i, j, matrix.metric.evaluate(&e));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Matrix files
// ---------------------------------------------------------------------------

/// Write a matrix as CSV: one row per line, cells comma-separated, the
/// diagonal left empty, undefined cells spelled `nan`.
pub fn write_matrix_csv(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..matrix.dim {
        let row: Vec<String> = (0..matrix.dim)
            .map(|j| {
                if i == j {
                    String::new()
                } else {
                    match matrix.get(i, j) {
                        MetricValue::Defined(v) => format!("{v}"),
                        MetricValue::Undefined => "nan".to_string(),
                    }
                }
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a CSV matrix written by [`write_matrix_csv`]. The metric kind is not
/// stored in the CSV body, so the caller supplies it (in the pipeline it is
/// carried by the file name suffix).
pub fn read_matrix_csv(path: &Path, metric: MetricKind) -> Result<ScoreMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<&str> = text.lines().collect();
    let dim = rows.len();
    let mut matrix =
        ScoreMatrix::new(metric, dim).map_err(|_| Error::parse_file(path, "matrix needs at least two rows"))?;
    let mut cells = vec![MetricValue::Undefined; dim * dim];
    for (i, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != dim {
            return Err(Error::parse(
                path,
                i + 1,
                format!("row has {} cells, expected {dim}", fields.len()),
            ));
        }
        for (j, field) in fields.iter().enumerate() {
            let field = field.trim();
            if i == j {
                if !field.is_empty() {
                    return Err(Error::parse(path, i + 1, "diagonal cells must be empty"));
                }
                continue;
            }
            cells[i * dim + j] = parse_cell(field, path, i + 1)?;
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let a = cells[i * dim + j];
            let b = cells[j * dim + i];
            if a != b {
                return Err(Error::parse_file(
                    path,
                    format!("matrix is not symmetric at ({i},{j})"),
                ));
            }
            matrix.set_pair(i, j, a);
        }
    }
    Ok(matrix)
}

fn parse_cell(field: &str, path: &Path, line: usize) -> Result<MetricValue> {
    if field == "nan" {
        return Ok(MetricValue::Undefined);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("invalid score {field:?}")))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::parse(
            path,
            line,
            format!("score {v} outside [0,1]"),
        ));
    }
    Ok(MetricValue::Defined(v))
}

/// Write a matrix as JSON: `{"metric", "m", "values"}` with row-major cells,
/// `null` on the diagonal and the string `"nan"` for undefined scores.
pub fn write_matrix_json(path: &Path, matrix: &ScoreMatrix) -> Result<()> {
    let mut values = Vec::with_capacity(matrix.dim * matrix.dim);
    for i in 0..matrix.dim {
        for j in 0..matrix.dim {
            values.push(if i == j {
                serde_json::Value::Null
            } else {
                match matrix.get(i, j) {
                    MetricValue::Defined(v) => serde_json::json!(v),
                    MetricValue::Undefined => serde_json::json!("nan"),
                }
            });
        }
    }
    let doc = serde_json::json!({
        "metric": matrix.metric.name(),
        "m": matrix.dim,
        "values": values,
    });
    let text = serde_json::to_string_pretty(&doc).expect("matrix document serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read a JSON matrix written by [`write_matrix_json`].
pub fn read_matrix_json(path: &Path) -> Result<ScoreMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::parse_file(path, e.to_string()))?;
    let metric: MetricKind = doc
        .get("metric")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::parse_file(path, "missing metric name"))?
        .parse()?;
    let dim = doc
        .get("m")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse_file(path, "missing dimension m"))? as usize;
    let raw = doc
        .get("values")
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::parse_file(path, "missing values array"))?;
    if raw.len() != dim * dim {
        return Err(Error::parse_file(
            path,
            format!("values has {} cells, expected {}", raw.len(), dim * dim),
        ));
    }
    let mut cells = vec![MetricValue::Undefined; dim * dim];
    for (idx, cell) in raw.iter().enumerate() {
        let (i, j) = (idx / dim, idx % dim);
        if i == j {
            if !cell.is_null() {
                return Err(Error::parse_file(path, "diagonal cells must be null"));
            }
            continue;
        }
        cells[idx] = match cell {
            serde_json::Value::String(s) if s == "nan" => MetricValue::Undefined,
            serde_json::Value::Number(n) => {
                let v = n.as_f64().unwrap_or(f64::NAN);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::parse_file(path, format!("score {v} outside [0,1]")));
                }
                MetricValue::Defined(v)
            }
            other => {
                return Err(Error::parse_file(
                    path,
                    format!("invalid cell {other} at ({i},{j})"),
                ))
            }
        };
    }
    let mut matrix = ScoreMatrix::new(metric, dim)?;
    for i in 0..dim {
        for j in i + 1..dim {
            let a = cells[i * dim + j];
            let b = cells[j * dim + i];
            if a != b {
                return Err(Error::parse_file(
                    path,
                    format!("matrix is not symmetric at ({i},{j})"),
                ));
            }
            matrix.set_pair(i, j, a);
        }
    }
    Ok(matrix)
}
