//! `F(s) = e^s − s − 1` and `g(s) = F(s)/s²`.

const SERIES_CUT: f64 = 1e-4;

pub fn scalar_f(s: f64) -> f64 {
    if s.abs() < SERIES_CUT {
        s * s * (0.5 + s * (1.0 / 6.0 + s * (1.0 / 24.0 + s / 120.0)))
    } else {
        s.exp_m1() - s
    }
}

/// `g(0) = 1/2` by continuity.
pub fn scalar_g(s: f64) -> f64 {
    if s.abs() < SERIES_CUT {
        0.5 + s * (1.0 / 6.0 + s * (1.0 / 24.0 + s / 120.0))
    } else {
        (s.exp_m1() - s) / (s * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(scalar_f(0.0), 0.0);
        assert_eq!(scalar_g(0.0), 0.5);
        assert!((scalar_f(3.0) - (3f64.exp() - 4.0)).abs() < 1e-12);
        assert!((scalar_f(3.0) - 16.08554).abs() < 1e-5);
        // Branches agree at the cut.
        let s = SERIES_CUT;
        assert!((scalar_g(s * 0.999_999) - scalar_g(s * 1.000_001)).abs() < 1e-10);
        assert!((scalar_f(-0.5) - ((-0.5f64).exp() - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn g_strictly_increasing() {
        let mut prev = scalar_g(1e-3);
        for i in 2..=10_000 {
            let g = scalar_g(i as f64 * 1e-3);
            assert!(g > prev, "at s = {}", i as f64 * 1e-3);
            prev = g;
        }
    }
}
