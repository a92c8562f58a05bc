//! Gaussian kernel density curves over statistic values, and their plots.
//!
//! Curves live on a fixed 256-point grid spanning the statistic's domain.
//! Bandwidth follows the Silverman rule with a small floor so that degenerate
//! samples (all identical, or a single value) still produce a curve. Mass
//! that the kernel would push past a domain edge is reflected back in, and
//! the curve is renormalized so its trapezoid integral over the grid is
//! exactly one.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::{ResultRow, StatName};
use crate::metrics::MetricKind;

/// Number of grid points per curve.
pub const GRID_POINTS: usize = 256;

/// Lower bound on the Silverman bandwidth.
pub const BANDWIDTH_FLOOR: f64 = 1e-3;

/// A density estimate on `[lo, hi]`, sampled at [`GRID_POINTS`] points.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub lo: f64,
    pub hi: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

impl DensityCurve {
    /// Trapezoid integral over the grid; one by construction, up to rounding.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.ys, (self.hi - self.lo) / (GRID_POINTS - 1) as f64)
    }

    /// Linear interpolation of the curve at `x` inside `[lo, hi]`.
    pub fn at(&self, x: f64) -> f64 {
        assert!(x >= self.lo && x <= self.hi, "evaluation outside the grid");
        let dx = (self.hi - self.lo) / (GRID_POINTS - 1) as f64;
        let pos = (x - self.lo) / dx;
        let i = (pos.floor() as usize).min(GRID_POINTS - 2);
        let frac = pos - i as f64;
        self.ys[i] + (self.ys[i + 1] - self.ys[i]) * frac
    }
}

fn trapezoid(ys: &[f64], dx: f64) -> f64 {
    let mut acc = 0.0;
    for w in ys.windows(2) {
        acc += (w[0] + w[1]) * 0.5 * dx;
    }
    acc
}

/// Interpolated quantile of a sorted slice (the common linear convention).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let idx = p * (n - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (idx - lo as f64)
}

/// Silverman's rule of thumb with a floor:
/// `max(1e-3, 0.9 * min(sd, IQR / 1.34) * n^(-1/5))`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty());
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = sd.min(iqr / 1.34);
    (0.9 * spread * (n as f64).powf(-0.2)).max(BANDWIDTH_FLOOR)
}

/// Estimate the density of `samples` on `[lo, hi]`.
///
/// Every sample must lie inside the domain; boundary mass is reflected at
/// both edges and the result is renormalized to unit integral.
pub fn kde_estimate(samples: &[f64], lo: f64, hi: f64) -> Result<DensityCurve> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidGrid {
            lo,
            hi,
            gridpoints: GRID_POINTS,
        });
    }
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    for &s in samples {
        if !s.is_finite() || s < lo || s > hi {
            return Err(Error::InvalidConfig(format!(
                "sample {s} outside the density domain [{lo}, {hi}]"
            )));
        }
    }
    let h = silverman_bandwidth(samples);
    let dx = (hi - lo) / (GRID_POINTS - 1) as f64;
    let xs: Vec<f64> = (0..GRID_POINTS).map(|g| lo + dx * g as f64).collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut ys = Vec::with_capacity(GRID_POINTS);
    for &x in &xs {
        let mut acc = 0.0;
        for &s in samples {
            for image in [s, 2.0 * lo - s, 2.0 * hi - s] {
                let u = (x - image) / h;
                if u.abs() < 40.0 {
                    acc += (-0.5 * u * u).exp();
                }
            }
        }
        ys.push(acc * norm);
    }
    let integral = trapezoid(&ys, dx);
    // Positive kernel mass at every sample keeps the integral nonzero.
    for y in &mut ys {
        *y /= integral;
    }
    Ok(DensityCurve {
        lo,
        hi,
        xs,
        ys,
        bandwidth: h,
        n_samples: samples.len(),
    })
}

/// Density curves of one statistic, one curve per metric that produced at
/// least one defined value.
#[derive(Debug, Clone)]
pub struct CurveSet {
    pub stat: StatName,
    pub curves: Vec<(MetricKind, DensityCurve)>,
    /// Metrics requested but without a single defined value of the statistic.
    pub missing: Vec<MetricKind>,
}

/// Build the curves of `stat` for each requested metric from a results table.
/// Undefined statistic values are left out of the sample sets.
pub fn curves_report(
    rows: &[ResultRow],
    stat: StatName,
    metrics: &[MetricKind],
) -> Result<CurveSet> {
    let (lo, hi) = stat.domain();
    let mut curves = Vec::new();
    let mut missing = Vec::new();
    for &metric in metrics {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.metric == metric)
            .filter_map(|r| stat.get(&r.stats))
            .collect();
        if values.is_empty() {
            missing.push(metric);
        } else {
            curves.push((metric, kde_estimate(&values, lo, hi)?));
        }
    }
    Ok(CurveSet {
        stat,
        curves,
        missing,
    })
}

/// Write a curve set as CSV: an `x` column, then one density column per
/// metric, 256 rows.
pub fn write_curves_csv(path: &Path, set: &CurveSet) -> Result<()> {
    if set.curves.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "statistic {} has no defined values for any requested metric",
            set.stat
        )));
    }
    let mut out = String::from("x");
    for (metric, _) in &set.curves {
        out.push(',');
        out.push_str(metric.name());
    }
    out.push('\n');
    let xs = &set.curves[0].1.xs;
    for g in 0..GRID_POINTS {
        out.push_str(&format!("{:.6}", xs[g]));
        for (_, curve) in &set.curves {
            out.push_str(&format!(",{:.6}", curve.ys[g]));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

const SVG_W: f64 = 720.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

/// Render a curve set as a standalone SVG line chart.
pub fn write_curves_svg(path: &Path, set: &CurveSet) -> Result<()> {
    if set.curves.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "statistic {} has no defined values for any requested metric",
            set.stat
        )));
    }
    let (lo, hi) = set.stat.domain();
    let y_max = set
        .curves
        .iter()
        .flat_map(|(_, c)| c.ys.iter().copied())
        .fold(0.0f64, f64::max)
        * 1.05;
    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - lo) / (hi - lo) * plot_w;
    let py = |y: f64| MARGIN_T + plot_h - (y / y_max) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{} density</text>\n",
        MARGIN_L + plot_w / 2.0,
        set.stat
    ));

    // Gridlines and ticks: x every 0.25 units, y at five even levels.
    let mut x_tick = lo;
    while x_tick <= hi + 1e-9 {
        let xp = px(x_tick);
        svg.push_str(&format!(
            "  <line x1=\"{xp:.1}\" y1=\"{}\" x2=\"{xp:.1}\" y2=\"{}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_T,
            MARGIN_T + plot_h
        ));
        svg.push_str(&format!(
            "  <text x=\"{xp:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{x_tick}</text>\n",
            MARGIN_T + plot_h + 16.0
        ));
        x_tick += 0.25;
    }
    for i in 0..=4 {
        let y_val = y_max * i as f64 / 4.0;
        let yp = py(y_val);
        svg.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{yp:.1}\" x2=\"{}\" y2=\"{yp:.1}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
            MARGIN_L,
            MARGIN_L + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{y_val:.2}</text>\n",
            MARGIN_L - 6.0,
            yp + 4.0
        ));
    }

    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        MARGIN_L,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        MARGIN_L,
        MARGIN_T,
        MARGIN_L,
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        SVG_H - 10.0,
        set.stat
    ));

    // One polyline per metric.
    for (k, (_, curve)) in set.curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = curve
            .xs
            .iter()
            .zip(&curve.ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    }

    // Legend, top right inside the plot.
    for (k, (metric, _)) in set.curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let ly = MARGIN_T + 14.0 + 16.0 * k as f64;
        let lx = MARGIN_L + plot_w - 110.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            metric
        ));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}
