use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ScaleError {
    #[error("scale bounds must satisfy vL2 <= vL1 < vR1 <= vR2 (got {0}, {1}, {2}, {3})")]
    Unordered(f64, f64, f64, f64),
    #[error("lp-range and hp-range cannot both have zero width")]
    BothSidesDegenerate,
    #[error("value {value} lies outside the scale ({lo}, {hi})")]
    OutOfScale { value: f64, lo: f64, hi: f64 },
    #[error("value {0} falls in a zero-width range")]
    DegenerateRange(f64),
    #[error("non-finite value")]
    NonFinite,
}

/// Four reference points of a continuous variable in its measurement units.
/// `(vL2, vL1)` is the lp-range, `[vL1, vR1)` the n-range and `[vR1, vR2)`
/// the hp-range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousScale {
    pub l2: f64,
    pub l1: f64,
    pub r1: f64,
    pub r2: f64,
}

impl ContinuousScale {
    pub fn new(l2: f64, l1: f64, r1: f64, r2: f64) -> Result<Self, ScaleError> {
        if ![l2, l1, r1, r2].iter().all(|v| v.is_finite()) {
            return Err(ScaleError::NonFinite);
        }
        if !(l2 <= l1 && l1 < r1 && r1 <= r2) {
            return Err(ScaleError::Unordered(l2, l1, r1, r2));
        }
        if l2 == l1 && r1 == r2 {
            return Err(ScaleError::BothSidesDegenerate);
        }
        Ok(Self { l2, l1, r1, r2 })
    }

    /// The identity scale: rescaled values are raw values.
    pub fn identity() -> Self {
        Self {
            l2: -1.5,
            l1: -0.5,
            r1: 0.5,
            r2: 1.5,
        }
    }

    pub fn has_lp(&self) -> bool {
        self.l1 > self.l2
    }

    pub fn has_hp(&self) -> bool {
        self.r2 > self.r1
    }

    /// Interval covered by rescaled values: `(-1.5, 1.5)` narrowed to the
    /// n-range side when a side range has zero width.
    pub fn rescaled_domain(&self) -> (f64, f64) {
        let lo = if self.has_lp() { -1.5 } else { -0.5 };
        let hi = if self.has_hp() { 1.5 } else { 0.5 };
        (lo, hi)
    }

    /// Moves a raw value outside the legal domain to the nearest interior
    /// point at `1e-6` of the scale width. Returns whether it moved.
    pub fn clamp_raw(&self, v: f64) -> (f64, bool) {
        let margin = 1e-6 * (self.r2 - self.l2);
        let lo = if self.has_lp() { self.l2 + margin } else { self.l1 };
        let hi = if self.has_hp() { self.r2 - margin } else { self.r1 - margin };
        if v < lo {
            (lo, true)
        } else if v > hi {
            (hi, true)
        } else {
            (v, false)
        }
    }
}

/// Maps a raw value to the rescaled axis: n-range to `[-0.5, 0.5)`, lp-range
/// to `(-1.5, -0.5)`, hp-range to `[0.5, 1.5)`.
pub fn rescale(v: f64, s: &ContinuousScale) -> Result<f64, ScaleError> {
    if !v.is_finite() {
        return Err(ScaleError::NonFinite);
    }
    let out = || ScaleError::OutOfScale {
        value: v,
        lo: s.l2,
        hi: s.r2,
    };
    if v < s.l1 {
        if v <= s.l2 {
            return Err(out());
        }
        Ok(-1.5 + (v - s.l2) / (s.l1 - s.l2))
    } else if v < s.r1 {
        Ok(-0.5 + (v - s.l1) / (s.r1 - s.l1))
    } else {
        if v > s.r2 || (v == s.r2 && s.has_hp()) {
            return Err(out());
        }
        if !s.has_hp() {
            return Err(ScaleError::DegenerateRange(v));
        }
        Ok(0.5 + (v - s.r1) / (s.r2 - s.r1))
    }
}

pub fn inverse_rescale(y: f64, s: &ContinuousScale) -> Result<f64, ScaleError> {
    if !y.is_finite() {
        return Err(ScaleError::NonFinite);
    }
    if y <= -1.5 || y >= 1.5 {
        return Err(ScaleError::OutOfScale {
            value: y,
            lo: -1.5,
            hi: 1.5,
        });
    }
    if y < -0.5 {
        if !s.has_lp() {
            return Err(ScaleError::DegenerateRange(y));
        }
        Ok(s.l2 + (y + 1.5) * (s.l1 - s.l2))
    } else if y < 0.5 {
        Ok(s.l1 + (y + 0.5) * (s.r1 - s.l1))
    } else {
        if !s.has_hp() {
            return Err(ScaleError::DegenerateRange(y));
        }
        Ok(s.r1 + (y - 0.5) * (s.r2 - s.r1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hr() -> ContinuousScale {
        ContinuousScale::new(20.0, 60.0, 100.0, 220.0).unwrap()
    }

    #[test]
    fn boundaries_and_midpoints() {
        let s = hr();
        assert_eq!(rescale(60.0, &s).unwrap(), -0.5);
        assert_eq!(rescale(100.0, &s).unwrap(), 0.5);
        assert_eq!(rescale(160.0, &s).unwrap(), 1.0);
        assert_eq!(rescale(80.0, &s).unwrap(), 0.0);
        assert_eq!(rescale(40.0, &s).unwrap(), -1.0);
        // a quarter of the way into the lp-range
        assert!((rescale(30.0, &s).unwrap() + 1.25).abs() < 1e-15);
    }

    #[test]
    fn inverse_points() {
        let s = hr();
        assert_eq!(inverse_rescale(0.0, &s).unwrap(), 80.0);
        assert_eq!(inverse_rescale(-0.5, &s).unwrap(), 60.0);
    }

    #[test]
    fn out_of_scale() {
        let s = hr();
        assert!(matches!(rescale(20.0, &s), Err(ScaleError::OutOfScale { .. })));
        assert!(matches!(rescale(220.0, &s), Err(ScaleError::OutOfScale { .. })));
        assert!(matches!(rescale(-5.0, &s), Err(ScaleError::OutOfScale { .. })));
    }

    #[test]
    fn zero_width_sides() {
        let s = ContinuousScale::new(-0.5, -0.5, 0.5, 1.5).unwrap();
        assert_eq!(rescale(-0.5, &s).unwrap(), -0.5);
        assert!(matches!(inverse_rescale(-1.0, &s), Err(ScaleError::DegenerateRange(_))));
        assert_eq!(s.rescaled_domain(), (-0.5, 1.5));

        let s = ContinuousScale::new(3.0, 12.0, 17.0, 17.0).unwrap();
        assert!(matches!(rescale(17.0, &s), Err(ScaleError::DegenerateRange(_))));
        assert!(matches!(inverse_rescale(0.7, &s), Err(ScaleError::DegenerateRange(_))));
        assert_eq!(s.rescaled_domain(), (-1.5, 0.5));
    }

    #[test]
    fn invalid_scales() {
        assert!(ContinuousScale::new(0.0, 1.0, 1.0, 2.0).is_err());
        assert!(ContinuousScale::new(2.0, 1.0, 3.0, 4.0).is_err());
        assert_eq!(
            ContinuousScale::new(1.0, 1.0, 2.0, 2.0),
            Err(ScaleError::BothSidesDegenerate)
        );
    }

    #[test]
    fn clamp_policy() {
        let s = hr();
        let (v, moved) = s.clamp_raw(500.0);
        assert!(moved);
        assert!(rescale(v, &s).unwrap() < 1.5);
        let (v, moved) = s.clamp_raw(80.0);
        assert!(!moved);
        assert_eq!(v, 80.0);
        let hb = ContinuousScale::new(3.0, 12.0, 17.0, 17.0).unwrap();
        let (v, _) = hb.clamp_raw(20.0);
        assert!(rescale(v, &hb).unwrap() < 0.5);
    }

    #[test]
    fn round_trip_random() {
        let s = ContinuousScale::new(6.8, 7.35, 7.45, 7.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut xs: Vec<f64> = (0..1000).map(|_| rng.random_range(6.8..7.8)).collect();
        xs.retain(|&x| x > 6.8);
        xs.sort_by(f64::total_cmp);
        for v in xs {
            let y = rescale(v, &s).unwrap();
            assert!(y > -1.5 && y < 1.5);
            let back = inverse_rescale(y, &s).unwrap();
            assert!(((back - v) / v).abs() <= 1e-12, "{v} -> {y} -> {back}");
            if v > prev.0 {
                assert!(y > prev.1);
            }
            prev = (v, y);
        }
    }
}
