//! Per-sample reference computations for the integration suites.
//!
//! Everything here walks the streams one sample at a time with bool vectors
//! and plain f64 sums, deliberately sharing no arithmetic with the library's
//! packed-word paths.

/// The four weighted expectations of a pair, computed sample by sample.
pub struct RefPair {
    pub ex: f64,
    pub ey: f64,
    pub eand: f64,
    pub exor: f64,
}

pub fn ref_pair(fx: &[bool], fy: &[bool], weights: &[f64]) -> RefPair {
    assert_eq!(fx.len(), fy.len());
    assert_eq!(fx.len(), weights.len());
    let mut sw = 0.0;
    let (mut sx, mut sy, mut sand, mut sxor) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..fx.len() {
        let w = weights[t];
        sw += w;
        if fx[t] {
            sx += w;
        }
        if fy[t] {
            sy += w;
        }
        if fx[t] && fy[t] {
            sand += w;
        }
        if fx[t] != fy[t] {
            sxor += w;
        }
    }
    assert!(sw > 0.0);
    RefPair {
        ex: sx / sw,
        ey: sy / sw,
        eand: sand / sw,
        exor: sxor / sw,
    }
}

/// Reference value of one score by lowercase name; `None` when undefined.
pub fn ref_metric(name: &str, p: &RefPair) -> Option<f64> {
    match name {
        "ham" => Some(1.0 - p.exor),
        "tmt" => {
            let denom = p.ex + p.ey - p.eand;
            if denom == 0.0 {
                None
            } else {
                Some(p.eand / denom)
            }
        }
        "cls" => Some(1.0 - p.exor.sqrt()),
        "cos" => {
            if p.ex == 0.0 || p.ey == 0.0 {
                None
            } else {
                Some(p.eand / (p.ex * p.ey).sqrt())
            }
        }
        "cov" => Some(4.0 * (p.eand - p.ex * p.ey).abs()),
        "dep" => {
            if p.eand == 0.0 {
                None
            } else {
                Some((1.0 - p.ex * p.ey / p.eand).max(0.0))
            }
        }
        other => panic!("unknown metric {other}"),
    }
}
