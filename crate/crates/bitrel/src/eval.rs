//! Soft confusion scoring of a score matrix against the known wiring.
//!
//! The ground truth is binary but the estimates are graded, so each node pair
//! contributes fractionally to all four confusion cells through `min` overlap:
//! a pair with truth `K` and estimate `E` adds `min(K,E)` to the true
//! positives, `min(1-K,E)` to the false positives, `min(K,1-E)` to the false
//! negatives and `min(1-K,1-E)` to the true negatives. Every ordered
//! off-diagonal pair is counted, so each unordered pair enters twice; all
//! reported statistics are ratios, which the doubling leaves untouched.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricValue, ScoreMatrix};
use crate::sysgen::{KnownAdjacency, SystemType};

/// What to do with pairs whose score is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UndefinedPolicy {
    /// Treat an undefined score as 0, i.e. as a confident "not linked".
    #[default]
    Zero,
    /// Leave the pair out of the confusion counts entirely.
    Skip,
}

impl UndefinedPolicy {
    pub fn name(self) -> &'static str {
        match self {
            UndefinedPolicy::Zero => "zero",
            UndefinedPolicy::Skip => "skip",
        }
    }
}

impl fmt::Display for UndefinedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UndefinedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(UndefinedPolicy::Zero),
            "skip" => Ok(UndefinedPolicy::Skip),
            _ => Err(Error::UnknownPolicy(s.to_string())),
        }
    }
}

/// Fractional confusion cell totals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfusionCounts {
    pub tpc: f64,
    pub fpc: f64,
    pub fnc: f64,
    pub tnc: f64,
}

impl ConfusionCounts {
    /// Add one pair's contribution: truth `known`, graded estimate
    /// `estimate` in `[0,1]`.
    pub fn accumulate(&mut self, known: bool, estimate: f64) {
        let k: f64 = if known { 1.0 } else { 0.0 };
        self.tpc += k.min(estimate);
        self.fpc += (1.0 - k).min(estimate);
        self.fnc += k.min(1.0 - estimate);
        self.tnc += (1.0 - k).min(1.0 - estimate);
    }

    pub fn total(&self) -> f64 {
        self.tpc + self.fpc + self.fnc + self.tnc
    }
}

/// Accumulate the confusion counts of one score matrix against the wiring.
pub fn confusion(
    known: &KnownAdjacency,
    scores: &ScoreMatrix,
    policy: UndefinedPolicy,
) -> Result<ConfusionCounts> {
    if known.dim() != scores.dim() {
        return Err(Error::DimensionMismatch {
            left: known.dim(),
            right: scores.dim(),
        });
    }
    let m = known.dim();
    let mut counts = ConfusionCounts::default();
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let estimate = match (scores.get(i, j), policy) {
                (MetricValue::Defined(v), _) => v,
                (MetricValue::Undefined, UndefinedPolicy::Zero) => 0.0,
                (MetricValue::Undefined, UndefinedPolicy::Skip) => continue,
            };
            counts.accumulate(known.get(i, j), estimate);
        }
    }
    Ok(counts)
}

/// The eight summary statistics. Each is `None` when its denominator (or a
/// constituent rate) is unavailable, which the file formats spell `nan`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatSet {
    /// Sensitivity `TP / (TP + FN)`.
    pub tpr: Option<f64>,
    /// Specificity `TN / (TN + FP)`.
    pub tnr: Option<f64>,
    /// Precision `TP / (TP + FP)`.
    pub ppv: Option<f64>,
    /// Negative predictive value `TN / (TN + FN)`.
    pub npv: Option<f64>,
    /// Plain accuracy `(TP + TN) / total`.
    pub acc: Option<f64>,
    /// Balanced accuracy `(TPR + TNR) / 2`.
    pub bacc: Option<f64>,
    /// Bookmaker informedness `TPR + TNR - 1`, in `[-1,1]`.
    pub bmi: Option<f64>,
    /// Matthews correlation
    /// `(TP·TN - FP·FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN))`, in `[-1,1]`.
    pub mcc: Option<f64>,
}

/// Derive all eight statistics from confusion totals.
pub fn statistics(c: &ConfusionCounts) -> StatSet {
    let ratio = |num: f64, denom: f64| if denom > 0.0 { Some(num / denom) } else { None };
    let tpr = ratio(c.tpc, c.tpc + c.fnc);
    let tnr = ratio(c.tnc, c.tnc + c.fpc);
    let mcc_denom =
        ((c.tpc + c.fpc) * (c.tpc + c.fnc) * (c.tnc + c.fpc) * (c.tnc + c.fnc)).sqrt();
    StatSet {
        tpr,
        tnr,
        ppv: ratio(c.tpc, c.tpc + c.fpc),
        npv: ratio(c.tnc, c.tnc + c.fnc),
        acc: ratio(c.tpc + c.tnc, c.total()),
        bacc: match (tpr, tnr) {
            (Some(a), Some(b)) => Some((a + b) / 2.0),
            _ => None,
        },
        bmi: match (tpr, tnr) {
            (Some(a), Some(b)) => Some(a + b - 1.0),
            _ => None,
        },
        mcc: if mcc_denom > 0.0 {
            Some((c.tpc * c.tnc - c.fpc * c.fnc) / mcc_denom)
        } else {
            None
        },
    }
}

/// Names of the eight statistics, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatName {
    Tpr,
    Tnr,
    Ppv,
    Npv,
    Acc,
    Bacc,
    Bmi,
    Mcc,
}

impl StatName {
    pub const ALL: [StatName; 8] = [
        StatName::Tpr,
        StatName::Tnr,
        StatName::Ppv,
        StatName::Npv,
        StatName::Acc,
        StatName::Bacc,
        StatName::Bmi,
        StatName::Mcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatName::Tpr => "tpr",
            StatName::Tnr => "tnr",
            StatName::Ppv => "ppv",
            StatName::Npv => "npv",
            StatName::Acc => "acc",
            StatName::Bacc => "bacc",
            StatName::Bmi => "bmi",
            StatName::Mcc => "mcc",
        }
    }

    pub fn get(self, s: &StatSet) -> Option<f64> {
        match self {
            StatName::Tpr => s.tpr,
            StatName::Tnr => s.tnr,
            StatName::Ppv => s.ppv,
            StatName::Npv => s.npv,
            StatName::Acc => s.acc,
            StatName::Bacc => s.bacc,
            StatName::Bmi => s.bmi,
            StatName::Mcc => s.mcc,
        }
    }

    /// Value range of the statistic, for density estimation grids.
    pub fn domain(self) -> (f64, f64) {
        match self {
            StatName::Bmi | StatName::Mcc => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for StatName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tpr" => Ok(StatName::Tpr),
            "tnr" => Ok(StatName::Tnr),
            "ppv" => Ok(StatName::Ppv),
            "npv" => Ok(StatName::Npv),
            "acc" => Ok(StatName::Acc),
            "bacc" => Ok(StatName::Bacc),
            "bmi" => Ok(StatName::Bmi),
            "mcc" => Ok(StatName::Mcc),
            _ => Err(Error::UnknownStatistic(s.to_string())),
        }
    }
}

/// One row of the results table: one system scored with one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub ordinal: u64,
    pub system_type: SystemType,
    pub metric: MetricKind,
    pub counts: ConfusionCounts,
    pub stats: StatSet,
}

/// Score one system's matrix and assemble its results row.
pub fn score_system(
    ordinal: u64,
    system_type: SystemType,
    known: &KnownAdjacency,
    scores: &ScoreMatrix,
    policy: UndefinedPolicy,
) -> Result<ResultRow> {
    let counts = confusion(known, scores, policy)?;
    Ok(ResultRow {
        ordinal,
        system_type,
        metric: scores.metric(),
        stats: statistics(&counts),
        counts,
    })
}

const RESULTS_HEADER: &str = "ordinal,type,metric,tp,fp,fn,tn,tpr,tnr,ppv,npv,acc,bacc,bmi,mcc";

fn opt_field(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

/// Write the results table as CSV, one row per (system, metric).
pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.stats;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.ordinal,
            r.system_type,
            r.metric,
            r.counts.tpc,
            r.counts.fpc,
            r.counts.fnc,
            r.counts.tnc,
            opt_field(s.tpr),
            opt_field(s.tnr),
            opt_field(s.ppv),
            opt_field(s.npv),
            opt_field(s.acc),
            opt_field(s.bacc),
            opt_field(s.bmi),
            opt_field(s.mcc),
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a results table written by [`write_results`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {RESULTS_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::parse(
                path,
                lineno,
                format!("row has {} fields, expected 15", fields.len()),
            ));
        }
        let bad = |what: &str| Error::parse(path, lineno, format!("invalid {what}"));
        let count = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| bad(what))
        };
        let stat = |s: &str, what: &str| -> Result<Option<f64>> {
            if s == "nan" {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(what))
            }
        };
        rows.push(ResultRow {
            ordinal: fields[0].parse().map_err(|_| bad("ordinal"))?,
            system_type: fields[1].parse()?,
            metric: fields[2].parse()?,
            counts: ConfusionCounts {
                tpc: count(fields[3], "tp")?,
                fpc: count(fields[4], "fp")?,
                fnc: count(fields[5], "fn")?,
                tnc: count(fields[6], "tn")?,
            },
            stats: StatSet {
                tpr: stat(fields[7], "tpr")?,
                tnr: stat(fields[8], "tnr")?,
                ppv: stat(fields[9], "ppv")?,
                npv: stat(fields[10], "npv")?,
                acc: stat(fields[11], "acc")?,
                bacc: stat(fields[12], "bacc")?,
                bmi: stat(fields[13], "bmi")?,
                mcc: stat(fields[14], "mcc")?,
            },
        });
    }
    Ok(rows)
}
