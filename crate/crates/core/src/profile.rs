use crate::error::{invalid, Result};
use crate::stats::linear_fit;

/// Power law `value ~ constant * radius^exponent` fitted on log-log pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub range: (f64, f64),
    pub residual: f64,
    pub points: usize,
}

/// Radii with averaged quantities and an optional power-law fit.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: Option<PowerFit>,
    pub flags: Vec<String>,
}

impl DecayProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() {
            return invalid("radii and values differ in length");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("radii must be strictly increasing");
        }
        Ok(Self {
            radii,
            values,
            fit: None,
            flags: Vec::new(),
        })
    }

    /// Fits over the closed range `[lo, hi]`; nonpositive values are skipped and flagged.
    pub fn with_fit(mut self, lo: f64, hi: f64) -> Self {
        let lo_t = lo * (1.0 - 1e-12);
        let hi_t = hi * (1.0 + 1e-12);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut skipped = 0;
        for (&r, &v) in self.radii.iter().zip(&self.values) {
            if r < lo_t || r > hi_t {
                continue;
            }
            if v > 0.0 && v.is_finite() {
                xs.push(r.ln());
                ys.push(v.ln());
            } else {
                skipped += 1;
            }
        }
        if skipped > 0 {
            self.flags
                .push(format!("{skipped} nonpositive values excluded from fit"));
        }
        self.fit = linear_fit(&xs, &ys).map(|(a, b, res)| PowerFit {
            exponent: b,
            constant: a.exp(),
            range: (lo, hi),
            residual: res,
            points: xs.len(),
        });
        if self.fit.is_none() {
            self.flags.push("fit undefined".into());
        }
        self
    }

    pub fn exponent(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.exponent)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Element-wise mean of profiles sharing their radii.
    pub fn mean_of(profiles: &[DecayProfile]) -> Result<Self> {
        let Some(first) = profiles.first() else {
            return invalid("no profiles to average");
        };
        let mut values = vec![0.0; first.values.len()];
        for p in profiles {
            if p.radii != first.radii {
                return invalid("profiles use different radii");
            }
            for (acc, v) in values.iter_mut().zip(&p.values) {
                *acc += v;
            }
        }
        let n = profiles.len() as f64;
        values.iter_mut().for_each(|v| *v /= n);
        Self::new(first.radii.clone(), values)
    }
}

/// `n` geometrically spaced radii from `lo` to `hi`.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let q = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (q * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let radii = geometric_radii(1.0, 64.0, 7);
        let values: Vec<f64> = radii.iter().map(|r| 3.0 * r.powf(-0.75)).collect();
        let p = DecayProfile::new(radii, values)
            .unwrap()
            .with_fit(1.0, 64.0);
        let f = p.fit.unwrap();
        assert!((f.exponent + 0.75).abs() < 1e-12);
        assert!((f.constant - 3.0).abs() < 1e-10);
        assert_eq!(f.points, 7);
    }

    #[test]
    fn zero_profile_has_no_fit() {
        let p = DecayProfile::new(vec![1.0, 2.0, 3.0], vec![0.0; 3])
            .unwrap()
            .with_fit(1.0, 3.0);
        assert!(p.fit.is_none());
        assert!(!p.flags.is_empty());
    }

    #[test]
    fn rejects_unsorted_radii() {
        assert!(DecayProfile::new(vec![2.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
