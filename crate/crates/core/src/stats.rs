//! Small sample statistics used by the Monte Carlo drivers.

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (v / n as f64).sqrt())
}

/// Unbiased sample variance and an estimate of its standard error.
pub fn variance_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 4 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let m = xs.iter().sum::<f64>() / nf;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / nf;
    let var_of_var = ((m4 - s2 * s2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    (s2, var_of_var.sqrt())
}

/// Linear-interpolation quantile (`q` in `[0, 1]`) of unsorted data.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s: Vec<f64> = xs.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    s[lo] * (1.0 - t) + s[hi] * t
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

impl Quantiles {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            q50: quantile(xs, 0.5),
            q90: quantile(xs, 0.9),
            q99: quantile(xs, 0.99),
            max: quantile(xs, 1.0),
        }
    }
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let res = (x
        .iter()
        .zip(y)
        .map(|(u, v)| (v - a - b * u).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Some((a, b, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
        let (a, b, r) = linear_fit(&x, &y).unwrap();
        assert!((a - 1.5).abs() < 1e-14 && (b + 2.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(quantile(&xs, 0.25), 2.0);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (m, s) = mean_stderr(&[2.0; 10]);
        assert_eq!((m, s), (2.0, 0.0));
    }
}
