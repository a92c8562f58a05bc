//! Packed binary event streams and weighted-expectation arithmetic.
//!
//! A [`BitSeries`] stores one event stream as `u64` words, bit `t` at word
//! `t / 64`, bit position `t % 64` (LSB first), trailing pad bits zero.
//! Expectations are weighted averages over the stream: with uniform weights
//! they reduce to popcount over the packed words; a rectangular window uses
//! masked popcounts; explicit weights fall back to a sequential per-sample
//! accumulation in double precision.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// One binary event stream: `len` samples, each 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSeries {
    words: Vec<u64>,
    len: usize,
}

impl BitSeries {
    /// All-zero stream of `len` samples. `len` must be at least 1.
    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "a BitSeries holds at least one sample");
        BitSeries {
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = BitSeries::zeros(bits.len());
        for (t, &b) in bits.iter().enumerate() {
            if b {
                s.words[t / WORD_BITS] |= 1u64 << (t % WORD_BITS);
            }
        }
        s
    }

    /// Build a stream by evaluating `f` at each sample index.
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = BitSeries::zeros(len);
        for t in 0..len {
            if f(t) {
                s.words[t / WORD_BITS] |= 1u64 << (t % WORD_BITS);
            }
        }
        s
    }

    /// Parse a literal like `"1100"`. Intended for small fixtures.
    ///
    /// Panics on characters other than '0' and '1' and on empty input.
    pub fn from_bit_str(s: &str) -> Self {
        let bits: Vec<bool> = s
            .chars()
            .map(|c| match c {
                '0' => false,
                '1' => true,
                other => panic!("invalid bit character {other:?}"),
            })
            .collect();
        BitSeries::from_bools(&bits)
    }

    /// Assemble from pre-packed words.
    ///
    /// Panics if the word count does not match `len` or a pad bit is set;
    /// callers constructing words from untrusted bytes must check pads first.
    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(len >= 1, "a BitSeries holds at least one sample");
        assert_eq!(words.len(), len.div_ceil(WORD_BITS), "word count mismatch");
        assert_eq!(pad_bits(&words, len), 0, "pad bits must be zero");
        BitSeries { words, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false // len >= 1 by construction
    }

    pub fn get(&self, t: usize) -> bool {
        assert!(t < self.len, "sample index {t} out of range {}", self.len);
        (self.words[t / WORD_BITS] >> (t % WORD_BITS)) & 1 == 1
    }

    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Elementwise AND with an equal-length stream.
    pub fn and(&self, other: &BitSeries) -> Result<BitSeries> {
        self.check_len(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| a & b)
            .collect();
        Ok(BitSeries {
            words,
            len: self.len,
        })
    }

    /// Elementwise XOR with an equal-length stream.
    pub fn xor(&self, other: &BitSeries) -> Result<BitSeries> {
        self.check_len(other)?;
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| a ^ b)
            .collect();
        Ok(BitSeries {
            words,
            len: self.len,
        })
    }

    /// Pack into `ceil(len/8)` bytes, bit `t` at byte `t / 8`, position `t % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        'outer: for word in &self.words {
            for byte in word.to_le_bytes() {
                if out.len() == nbytes {
                    break 'outer;
                }
                out.push(byte);
            }
        }
        out
    }

    fn check_len(&self, other: &BitSeries) -> Result<()> {
        if self.len == other.len {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            })
        }
    }
}

impl fmt::Display for BitSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in 0..self.len {
            f.write_str(if self.get(t) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn pad_bits(words: &[u64], len: usize) -> u64 {
    let used = len % WORD_BITS;
    if used == 0 {
        0
    } else {
        words[words.len() - 1] & (!0u64 << used)
    }
}

/// The window/weight function `w(t)` shared by every expectation in an
/// analysis. Weights are non-negative and must sum to a positive total.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `w(t) = 1` everywhere; the experimental default.
    Uniform,
    /// `w(t) = 1` on `[start, end)`, 0 outside.
    Window { start: usize, end: usize },
    /// One arbitrary non-negative weight per sample.
    Explicit(Vec<f64>),
}

impl Weighting {
    pub fn window(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidWindow {
                start,
                end,
                len: end,
            });
        }
        Ok(Weighting::Window { start, end })
    }

    pub fn explicit(weights: Vec<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidWeight { index, value });
            }
            sum += value;
        }
        if sum <= 0.0 {
            return Err(Error::ZeroWeightSum);
        }
        Ok(Weighting::Explicit(weights))
    }

    /// Check that this weighting is usable for a stream of `len` samples.
    pub fn validate_for(&self, len: usize) -> Result<()> {
        match self {
            Weighting::Uniform => Ok(()),
            Weighting::Window { start, end } => {
                if *start >= *end || *end > len {
                    Err(Error::InvalidWindow {
                        start: *start,
                        end: *end,
                        len,
                    })
                } else {
                    Ok(())
                }
            }
            Weighting::Explicit(w) => {
                if w.len() != len {
                    Err(Error::WeightLengthMismatch {
                        weights: w.len(),
                        samples: len,
                    })
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `w(t)`, assuming `validate_for` passed.
    pub fn weight_at(&self, t: usize) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::Window { start, end } => {
                if t >= *start && t < *end {
                    1.0
                } else {
                    0.0
                }
            }
            Weighting::Explicit(w) => w[t],
        }
    }
}

/// The four weighted expectations every pairwise metric is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExpectations {
    /// E[fx]
    pub x: f64,
    /// E[fy]
    pub y: f64,
    /// E[fx * fy], the expectation of the elementwise AND.
    pub product: f64,
    /// E[|fx - fy|], the expectation of the elementwise XOR.
    pub absdiff: f64,
}

/// Weighted expectation of one stream: `(Σ w(t)·f(t)) / Σ w(t)`, in `[0,1]`.
pub fn expectation(f: &BitSeries, w: &Weighting) -> Result<f64> {
    w.validate_for(f.len())?;
    match w {
        Weighting::Uniform => Ok(f.popcount() as f64 / f.len() as f64),
        Weighting::Window { start, end } => {
            let count = popcount_range(f.words(), *start, *end);
            Ok(count as f64 / (end - start) as f64)
        }
        Weighting::Explicit(weights) => {
            let mut sum_w = 0.0;
            let mut sum_wf = 0.0;
            for (t, &wt) in weights.iter().enumerate() {
                if !wt.is_finite() || wt < 0.0 {
                    return Err(Error::InvalidWeight {
                        index: t,
                        value: wt,
                    });
                }
                sum_w += wt;
                if f.get(t) {
                    sum_wf += wt;
                }
            }
            if sum_w <= 0.0 {
                return Err(Error::ZeroWeightSum);
            }
            Ok(sum_wf / sum_w)
        }
    }
}

/// Weighted expectation of the elementwise product (binary AND).
pub fn expectation_product(fx: &BitSeries, fy: &BitSeries, w: &Weighting) -> Result<f64> {
    Ok(pair_expectations(fx, fy, w)?.product)
}

/// Weighted expectation of the elementwise absolute difference (binary XOR).
pub fn expectation_absdiff(fx: &BitSeries, fy: &BitSeries, w: &Weighting) -> Result<f64> {
    Ok(pair_expectations(fx, fy, w)?.absdiff)
}

/// All four pair expectations in one pass over the packed words.
pub fn pair_expectations(
    fx: &BitSeries,
    fy: &BitSeries,
    w: &Weighting,
) -> Result<PairExpectations> {
    if fx.len() != fy.len() {
        return Err(Error::LengthMismatch {
            left: fx.len(),
            right: fy.len(),
        });
    }
    w.validate_for(fx.len())?;
    match w {
        Weighting::Uniform => {
            let n = fx.len() as f64;
            let (cx, cy, cand, cxor) = pair_popcounts(fx.words(), fy.words(), 0, fx.len());
            Ok(PairExpectations {
                x: cx as f64 / n,
                y: cy as f64 / n,
                product: cand as f64 / n,
                absdiff: cxor as f64 / n,
            })
        }
        Weighting::Window { start, end } => {
            let n = (end - start) as f64;
            let (cx, cy, cand, cxor) = pair_popcounts(fx.words(), fy.words(), *start, *end);
            Ok(PairExpectations {
                x: cx as f64 / n,
                y: cy as f64 / n,
                product: cand as f64 / n,
                absdiff: cxor as f64 / n,
            })
        }
        Weighting::Explicit(weights) => {
            let mut sum_w = 0.0;
            let (mut sx, mut sy, mut sand, mut sxor) = (0.0, 0.0, 0.0, 0.0);
            for (t, &wt) in weights.iter().enumerate() {
                if !wt.is_finite() || wt < 0.0 {
                    return Err(Error::InvalidWeight {
                        index: t,
                        value: wt,
                    });
                }
                sum_w += wt;
                let bx = fx.get(t);
                let by = fy.get(t);
                if bx {
                    sx += wt;
                }
                if by {
                    sy += wt;
                }
                if bx && by {
                    sand += wt;
                }
                if bx != by {
                    sxor += wt;
                }
            }
            if sum_w <= 0.0 {
                return Err(Error::ZeroWeightSum);
            }
            Ok(PairExpectations {
                x: sx / sum_w,
                y: sy / sum_w,
                product: sand / sum_w,
                absdiff: sxor / sum_w,
            })
        }
    }
}

/// Popcount of bits `[start, end)`, masking the boundary words.
fn popcount_range(words: &[u64], start: usize, end: usize) -> u64 {
    debug_assert!(start < end);
    let first = start / WORD_BITS;
    let last = (end - 1) / WORD_BITS;
    let lo_mask = !0u64 << (start % WORD_BITS);
    let hi_used = end - last * WORD_BITS;
    let hi_mask = if hi_used == WORD_BITS {
        !0u64
    } else {
        (1u64 << hi_used) - 1
    };
    if first == last {
        return (words[first] & lo_mask & hi_mask).count_ones() as u64;
    }
    let mut total = (words[first] & lo_mask).count_ones() as u64;
    for w in &words[first + 1..last] {
        total += w.count_ones() as u64;
    }
    total + (words[last] & hi_mask).count_ones() as u64
}

/// Popcounts of x, y, x&y and x^y over `[start, end)` in a single pass.
fn pair_popcounts(x: &[u64], y: &[u64], start: usize, end: usize) -> (u64, u64, u64, u64) {
    debug_assert!(start < end);
    let first = start / WORD_BITS;
    let last = (end - 1) / WORD_BITS;
    let lo_mask = !0u64 << (start % WORD_BITS);
    let hi_used = end - last * WORD_BITS;
    let hi_mask = if hi_used == WORD_BITS {
        !0u64
    } else {
        (1u64 << hi_used) - 1
    };
    let (mut cx, mut cy, mut cand, mut cxor) = (0u64, 0u64, 0u64, 0u64);
    for i in first..=last {
        let mut mask = !0u64;
        if i == first {
            mask &= lo_mask;
        }
        if i == last {
            mask &= hi_mask;
        }
        let wx = x[i] & mask;
        let wy = y[i] & mask;
        cx += wx.count_ones() as u64;
        cy += wy.count_ones() as u64;
        cand += (wx & wy).count_ones() as u64;
        cxor += (wx ^ wy).count_ones() as u64;
    }
    (cx, cy, cand, cxor)
}

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

/// On-disk trace encoding, selected by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    /// Text: header line `m,n`, then one row of comma-separated 0/1 per node.
    Csv,
    /// Binary: magic `BTR1`, u32 LE node count, u64 LE sample count, then
    /// `ceil(n/8)` bytes per node, bit `t` at byte `t/8` position `t%8`.
    Btr,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "btr" => Ok(TraceFormat::Btr),
            _ => Err(Error::InvalidConfig(format!(
                "unknown trace format {s:?}; expected csv or btr"
            ))),
        }
    }
}

impl TraceFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(TraceFormat::Csv),
            Some("btr") => Ok(TraceFormat::Btr),
            _ => Err(Error::InvalidConfig(format!(
                "cannot infer trace format from {}: expected a .csv or .btr extension",
                path.display()
            ))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Btr => "btr",
        }
    }
}

const BTR_MAGIC: &[u8; 4] = b"BTR1";

/// Write equal-length traces to `path` in the format named by its extension.
pub fn write_traces(path: &Path, traces: &[BitSeries]) -> Result<()> {
    let format = TraceFormat::from_path(path)?;
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to write".into()));
    }
    let n = traces[0].len();
    for t in traces {
        if t.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: t.len(),
            });
        }
    }
    let bytes = match format {
        TraceFormat::Csv => {
            let mut out = String::new();
            out.push_str(&format!("{},{}\n", traces.len(), n));
            for trace in traces {
                let row: Vec<&str> = (0..n).map(|t| if trace.get(t) { "1" } else { "0" }).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        TraceFormat::Btr => {
            let mut out = Vec::with_capacity(16 + traces.len() * n.div_ceil(8));
            out.extend_from_slice(BTR_MAGIC);
            out.extend_from_slice(&(traces.len() as u32).to_le_bytes());
            out.extend_from_slice(&(n as u64).to_le_bytes());
            for trace in traces {
                out.extend_from_slice(&trace.to_bytes());
            }
            out
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a trace file written by [`write_traces`].
pub fn read_traces(path: &Path) -> Result<Vec<BitSeries>> {
    let format = TraceFormat::from_path(path)?;
    match format {
        TraceFormat::Csv => read_traces_csv(path),
        TraceFormat::Btr => read_traces_btr(path),
    }
}

fn read_traces_csv(path: &Path) -> Result<Vec<BitSeries>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file; expected header m,n"))?;
    let mut parts = header.split(',');
    let m: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "header must be m,n with integer node count"))?;
    let n: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, 1, "header must be m,n with integer sample count"))?;
    if parts.next().is_some() {
        return Err(Error::parse(path, 1, "header has trailing fields"));
    }
    if m == 0 || n == 0 {
        return Err(Error::parse(path, 1, "node and sample counts must be positive"));
    }
    let mut traces = Vec::with_capacity(m);
    for _ in 0..m {
        let (idx, line) = lines.next().ok_or_else(|| {
            Error::parse(path, m + 1, format!("expected {m} trace rows, file ended early"))
        })?;
        let lineno = idx + 1;
        let mut bits = Vec::with_capacity(n);
        for field in line.split(',') {
            match field.trim() {
                "0" => bits.push(false),
                "1" => bits.push(true),
                other => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("invalid sample {other:?}; expected 0 or 1"),
                    ))
                }
            }
        }
        if bits.len() != n {
            return Err(Error::parse(
                path,
                lineno,
                format!("row has {} samples, header says {n}", bits.len()),
            ));
        }
        traces.push(BitSeries::from_bools(&bits));
    }
    if let Some((idx, line)) = lines.next() {
        if !line.trim().is_empty() {
            return Err(Error::parse(path, idx + 1, "unexpected data after last trace row"));
        }
    }
    Ok(traces)
}

fn read_traces_btr(path: &Path) -> Result<Vec<BitSeries>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[0..4] != BTR_MAGIC {
        return Err(Error::parse_file(path, "missing BTR1 header"));
    }
    let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if m == 0 || n == 0 {
        return Err(Error::parse_file(path, "node and sample counts must be positive"));
    }
    let row_bytes = n.div_ceil(8);
    let expected = 16 + m * row_bytes;
    if bytes.len() != expected {
        return Err(Error::parse_file(
            path,
            format!("file is {} bytes, expected {expected} for m={m}, n={n}", bytes.len()),
        ));
    }
    let mut traces = Vec::with_capacity(m);
    for node in 0..m {
        let row = &bytes[16 + node * row_bytes..16 + (node + 1) * row_bytes];
        let mut words = vec![0u64; n.div_ceil(WORD_BITS)];
        for (i, &b) in row.iter().enumerate() {
            words[i / 8] |= (b as u64) << ((i % 8) * 8);
        }
        if pad_bits(&words, n) != 0 {
            return Err(Error::parse_file(
                path,
                format!("node {node} has nonzero pad bits beyond sample {n}"),
            ));
        }
        traces.push(BitSeries::from_words(words, n));
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Per-sample reference path, kept free of packed-word arithmetic.
    fn naive_expectation(bits: &[bool], weights: &[f64]) -> f64 {
        let sum_w: f64 = weights.iter().sum();
        let sum_wf: f64 = bits
            .iter()
            .zip(weights)
            .map(|(&b, &w)| if b { w } else { 0.0 })
            .sum();
        sum_wf / sum_w
    }

    fn bools(s: &BitSeries) -> Vec<bool> {
        (0..s.len()).map(|t| s.get(t)).collect()
    }

    #[test]
    fn expectation_uniform_examples() {
        let w = Weighting::Uniform;
        assert_eq!(expectation(&BitSeries::from_bit_str("1100"), &w).unwrap(), 0.5);
        assert_eq!(expectation(&BitSeries::from_bit_str("1111"), &w).unwrap(), 1.0);
    }

    #[test]
    fn expectation_explicit_example() {
        // (2*1 + 1*1 + 1*0 + 0*0) / (2+1+1+0) = 3/4
        let f = BitSeries::from_bit_str("1100");
        let w = Weighting::explicit(vec![2.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(expectation(&f, &w).unwrap(), 0.75);
    }

    #[test]
    fn expectation_product_examples() {
        let w = Weighting::Uniform;
        let fx = BitSeries::from_bit_str("1100");
        assert_eq!(
            expectation_product(&fx, &BitSeries::from_bit_str("1010"), &w).unwrap(),
            0.25
        );
        assert_eq!(
            expectation_product(&fx, &BitSeries::from_bit_str("0011"), &w).unwrap(),
            0.0
        );
        assert_eq!(
            expectation_product(&BitSeries::from_bit_str("1110"), &fx, &w).unwrap(),
            0.5
        );
    }

    #[test]
    fn expectation_absdiff_examples() {
        let w = Weighting::Uniform;
        let fx = BitSeries::from_bit_str("1100");
        assert_eq!(expectation_absdiff(&fx, &fx, &w).unwrap(), 0.0);
        assert_eq!(
            expectation_absdiff(&fx, &BitSeries::from_bit_str("0011"), &w).unwrap(),
            1.0
        );
        assert_eq!(
            expectation_absdiff(&fx, &BitSeries::from_bit_str("1010"), &w).unwrap(),
            0.5
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let fx = BitSeries::from_bit_str("1100");
        let fy = BitSeries::from_bit_str("110");
        assert!(matches!(
            expectation_product(&fx, &fy, &Weighting::Uniform),
            Err(Error::LengthMismatch { .. })
        ));
        let w = Weighting::explicit(vec![1.0; 3]).unwrap();
        assert!(matches!(
            expectation(&fx, &w),
            Err(Error::WeightLengthMismatch { .. })
        ));
    }

    #[test]
    fn zero_weight_sum_is_an_error() {
        assert!(matches!(
            Weighting::explicit(vec![0.0, 0.0]),
            Err(Error::ZeroWeightSum)
        ));
        // Direct enum construction still fails at evaluation time.
        let w = Weighting::Explicit(vec![0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            expectation(&BitSeries::from_bit_str("1100"), &w),
            Err(Error::ZeroWeightSum)
        ));
    }

    #[test]
    fn negative_weight_is_an_error() {
        assert!(matches!(
            Weighting::explicit(vec![1.0, -0.5]),
            Err(Error::InvalidWeight { index: 1, .. })
        ));
    }

    #[test]
    fn window_bounds_are_checked() {
        assert!(Weighting::window(3, 3).is_err());
        let w = Weighting::window(2, 6).unwrap();
        assert!(matches!(
            expectation(&BitSeries::from_bit_str("1100"), &w),
            Err(Error::InvalidWindow { .. })
        ));
    }

    #[test]
    fn window_matches_equivalent_explicit_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=130usize);
            let fx = BitSeries::from_fn(n, |_| rng.random_bool(0.4));
            let fy = BitSeries::from_fn(n, |_| rng.random_bool(0.6));
            let start = rng.random_range(0..n);
            let end = rng.random_range(start + 1..=n);
            let window = Weighting::Window { start, end };
            let explicit = Weighting::Explicit(
                (0..n).map(|t| if t >= start && t < end { 1.0 } else { 0.0 }).collect(),
            );
            let a = pair_expectations(&fx, &fy, &window).unwrap();
            let b = pair_expectations(&fx, &fy, &explicit).unwrap();
            for (lhs, rhs) in [(a.x, b.x), (a.y, b.y), (a.product, b.product), (a.absdiff, b.absdiff)] {
                assert!((lhs - rhs).abs() < 1e-12, "window {start}..{end} of {n}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn packed_path_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(1..=64usize);
            let f = BitSeries::from_fn(n, |_| rng.random_bool(0.5));
            let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            if weights.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let packed = expectation(&f, &Weighting::Explicit(weights.clone())).unwrap();
            let naive = naive_expectation(&bools(&f), &weights);
            assert!((packed - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn product_and_absdiff_compose_from_elementwise_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let n = rng.random_range(1..=200usize);
            let fx = BitSeries::from_fn(n, |_| rng.random_bool(0.5));
            let fy = BitSeries::from_fn(n, |_| rng.random_bool(0.3));
            let w = Weighting::Uniform;
            let via_and = expectation(&fx.and(&fy).unwrap(), &w).unwrap();
            let via_xor = expectation(&fx.xor(&fy).unwrap(), &w).unwrap();
            assert_eq!(expectation_product(&fx, &fy, &w).unwrap(), via_and);
            assert_eq!(expectation_absdiff(&fx, &fy, &w).unwrap(), via_xor);
        }
    }

    #[test]
    fn binary_identity_holds() {
        // E[fx] + E[fy] = 2 E[fx·fy] + E[|fx−fy|]
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..500 {
            let n = rng.random_range(1..=96usize);
            let fx = BitSeries::from_fn(n, |_| rng.random_bool(0.5));
            let fy = BitSeries::from_fn(n, |_| rng.random_bool(0.7));
            let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
            let w = Weighting::Explicit(weights);
            let e = pair_expectations(&fx, &fy, &w).unwrap();
            assert!((e.x + e.y - (2.0 * e.product + e.absdiff)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn flipping_a_weighted_zero_strictly_increases(
            bits in proptest::collection::vec(any::<bool>(), 1..64),
            raw in proptest::collection::vec(0.01f64..1.0, 64),
            pick in any::<proptest::sample::Index>(),
        ) {
            let zeros: Vec<usize> = bits.iter().enumerate().filter(|(_, &b)| !b).map(|(t, _)| t).collect();
            prop_assume!(!zeros.is_empty());
            let t = zeros[pick.index(zeros.len())];
            let weights: Vec<f64> = raw[..bits.len()].to_vec();
            let f = BitSeries::from_bools(&bits);
            let mut flipped_bits = bits.clone();
            flipped_bits[t] = true;
            let flipped = BitSeries::from_bools(&flipped_bits);
            let w = Weighting::Explicit(weights);
            prop_assert!(expectation(&flipped, &w).unwrap() > expectation(&f, &w).unwrap());
        }

        #[test]
        fn trace_files_round_trip(
            rows in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 1..130), 1..6),
        ) {
            let n = rows[0].len();
            let traces: Vec<BitSeries> = rows
                .iter()
                .map(|r| {
                    let mut padded = r.clone();
                    padded.resize(n, false);
                    BitSeries::from_bools(&padded)
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            for name in ["t.csv", "t.btr"] {
                let path = dir.path().join(name);
                write_traces(&path, &traces).unwrap();
                let back = read_traces(&path).unwrap();
                prop_assert_eq!(&back, &traces);
            }
        }
    }

    #[test]
    fn popcount_range_word_boundaries() {
        let f = BitSeries::from_fn(130, |t| t % 3 == 0);
        for (start, end) in [(0, 130), (0, 64), (63, 65), (64, 128), (1, 2), (127, 130), (0, 1)] {
            let expected = (start..end).filter(|&t| t % 3 == 0).count() as u64;
            assert_eq!(popcount_range(f.words(), start, end), expected, "{start}..{end}");
        }
    }

    #[test]
    fn btr_rejects_nonzero_pad_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.btr");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"BTR1");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&3u64.to_le_bytes());
        bytes.push(0b1111_1000); // samples say 000, pad bits set
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_traces(&path), Err(Error::ParseFile { .. })));
    }

    #[test]
    fn csv_parse_error_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "2,3\n1,0,1\n1,2,0\n").unwrap();
        match read_traces(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn display_round_trips_bit_literals() {
        for s in ["1", "0", "1100", "101010101010101010101"] {
            assert_eq!(BitSeries::from_bit_str(s).to_string(), s);
        }
    }
}
