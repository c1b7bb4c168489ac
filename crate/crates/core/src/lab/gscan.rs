//! Direct summation of `G(t) = Σ_{√n ≥ t > e√n/u_n} 1/(n u_n²)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martingale::iterated_log_unchecked;

/// Largest admissible window end.
pub const MAX_WINDOW: u64 = 2_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GPoint {
    pub t: f64,
    /// Window `[lo, hi]`; empty when `lo > hi`.
    pub lo: u64,
    pub hi: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GScan {
    pub e: f64,
    pub points: Vec<GPoint>,
    pub max: f64,
    /// Max over the upper half of the grid against the lower half.
    pub growth_ratio: f64,
    /// `growth_ratio ≤ 1.05`.
    pub no_growth: bool,
}

fn inside(n: u64, e: f64, t: f64) -> bool {
    let nf = n as f64;
    e * e * nf < iterated_log_unchecked(nf) * t * t
}

/// Largest `n` with `e²n < L(n)t²`, or 0 when there is none.
fn window_end(e: f64, t: f64) -> Result<u64> {
    if !inside(1, e, t) {
        return Ok(0);
    }
    let mut hi = 2u64;
    while inside(hi, e, t) {
        hi *= 2;
        if hi > MAX_WINDOW {
            return Err(Error::DimensionCap {
                requested: hi as usize,
                cap: MAX_WINDOW as usize,
            });
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if inside(mid, e, t) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn g_value(e: f64, t: f64) -> Result<GPoint> {
    if !(e > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need e, t > 0, got {e}, {t}")));
    }
    let lo = (t * t).ceil().max(1.0) as u64;
    let hi = window_end(e, t)?;
    let mut value = 0.0;
    for n in lo..=hi {
        let nf = n as f64;
        value += 1.0 / (nf * iterated_log_unchecked(nf));
    }
    Ok(GPoint { t, lo, hi, value })
}

/// `n` log-spaced points in `[a, b]`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

pub fn g_scan(e: f64, t_grid: &[f64]) -> Result<GScan> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let points = grid.iter().map(|&t| g_value(e, t)).collect::<Result<Vec<_>>>()?;
    let max = points.iter().map(|p| p.value).fold(0.0, f64::max);
    let half = points.len() / 2;
    let low = points[..half.max(1)].iter().map(|p| p.value).fold(0.0, f64::max);
    let high = points[half..].iter().map(|p| p.value).fold(0.0, f64::max);
    let growth_ratio = if low > 0.0 {
        high / low
    } else if high > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(GScan {
        e,
        points,
        max,
        growth_ratio,
        no_growth: max.is_finite() && growth_ratio <= 1.05,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_window(e: f64, t: f64) -> (u64, u64) {
        let lo = (t * t).ceil() as u64;
        let mut hi = 0;
        for n in 1..100_000u64 {
            let l = (n as f64).ln().ln().max(1.0);
            let l = if (n as f64) <= std::f64::consts::E { 1.0 } else { l };
            if e * e * (n as f64) < l * t * t {
                hi = n;
            }
        }
        (lo, hi)
    }

    #[test]
    fn window_matches_brute_force() {
        for t in [1.0, 2.5, 7.0, 10.0, 30.0] {
            let p = g_value(0.5, t).unwrap();
            assert_eq!((p.lo, p.hi), brute_window(0.5, t), "t = {t}");
        }
        assert_eq!(g_value(0.5, 10.0).unwrap().hi, 756);
    }

    #[test]
    fn empty_window_is_zero() {
        // With e large, e²n < L(n)t² fails already at n = ⌈t²⌉.
        let p = g_value(5.0, 2.0).unwrap();
        assert!(p.lo > p.hi);
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn scan_has_no_growth() {
        let s = g_scan(0.5, &log_grid(1.0, 1000.0, 13)).unwrap();
        assert!(s.no_growth, "{s:?}");
        assert!(s.max.is_finite() && s.max < 2.0);
        assert!(g_scan(0.5, &[]).is_err());
        assert!(g_value(0.0, 1.0).is_err());
    }
}
