use crate::error::{Error, Result};

/// Z-score standardization. A column whose values are all identical maps every
/// input to 0 and reports a standard deviation of 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaler {
    pub mean: f64,
    pub std: f64,
    pub constant: bool,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler {
        mean: 0.0,
        std: 1.0,
        constant: false,
    };

    /// Population mean and standard deviation.
    pub fn fit(values: &[f64]) -> Result<Self> {
        let first = *values.first().ok_or(Error::EmptyBatch)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scaler input".into()));
        }
        if values.iter().all(|&v| v == first) {
            return Ok(Self {
                mean: first,
                std: 1.0,
                constant: true,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            constant: false,
        })
    }

    /// Median and interquartile range (rescaled to a normal standard
    /// deviation), so a few gross outliers do not set the scale. Falls back to
    /// [`fit`](Self::fit) when the interquartile range is zero.
    pub fn fit_robust(values: &[f64]) -> Result<Self> {
        let plain = Self::fit(values)?;
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        let iqr = q(0.75) - q(0.25);
        if plain.constant || iqr <= 0.0 {
            return Ok(plain);
        }
        Ok(Self {
            mean: q(0.5),
            std: iqr / 1.348_979_500_392_163_4,
            constant: false,
        })
    }

    #[inline]
    pub fn transform(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }

    #[inline]
    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Convenience for the `(mean, stddev)` pair of a training column.
pub fn fit_scaler(values: &[f64]) -> Result<(f64, f64)> {
    Scaler::fit(values).map(|s| (s.mean, s.std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_column() {
        let s = Scaler::fit(&[4.5, 4.5, 4.5]).unwrap();
        assert_eq!((s.mean, s.std), (4.5, 1.0));
        assert!([4.5, 4.5, 10.0].iter().all(|&v| s.transform(v) == 0.0));
    }

    #[test]
    fn two_values_by_hand() {
        assert_eq!(fit_scaler(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
        assert!(matches!(Scaler::fit(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn robust_ignores_outliers() {
        let s = Scaler::fit_robust(&[1.0, 2.0, 3.0, 4.0, 5.0, 1000.0]).unwrap();
        assert_eq!(s.mean, 3.5);
        assert!((s.std - 2.5 / 1.348_979_500_392_163_4).abs() < 1e-12);
        let c = Scaler::fit_robust(&[2.0, 2.0, 2.0]).unwrap();
        assert!(c.constant);
        let flat = Scaler::fit_robust(&[1.0, 1.0, 1.0, 1.0, 9.0]).unwrap();
        assert_eq!(flat, Scaler::fit(&[1.0, 1.0, 1.0, 1.0, 9.0]).unwrap());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e4f64..1e4, 2..50), y in -1e6f64..1e6) {
            prop_assume!(values.iter().any(|&v| v != values[0]));
            let s = Scaler::fit(&values).unwrap();
            let back = s.inverse(s.transform(y));
            prop_assert!((back - y).abs() <= 1e-10 * y.abs().max(1.0));
        }
    }
}
