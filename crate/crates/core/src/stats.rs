//! Tiny least-squares helpers for extrapolation and rate fits.

/// Fit of `y ≈ a + b·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Largest absolute residual.
    pub max_residual: f64,
}

/// Ordinary least squares for `y ≈ a + b·x`; needs two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).abs()).fold(0.0, f64::max);
    Some(LinearFit { intercept, slope, max_residual })
}

/// Fits `a_k ≈ c∞ + c₁/k` and returns the fit (intercept is `c∞`).
pub fn inverse_k_fit(ks: &[f64], values: &[f64]) -> Option<LinearFit> {
    let inv: Vec<f64> = ks.iter().map(|k| 1.0 / k).collect();
    linear_fit(&inv, values)
}

/// Slope of `log y` against `log x`; `None` if any value is not positive.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!(f.max_residual < 1e-12);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }

    #[test]
    fn inverse_power_extrapolation() {
        let ks = [2.0, 4.0, 8.0];
        let vals: Vec<f64> = ks.iter().map(|k| 0.5 + 0.3 / k).collect();
        let f = inverse_k_fit(&ks, &vals).unwrap();
        assert!((f.intercept - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slopes() {
        let f = loglog_slope(&[0.25, 0.125, 0.0625], &[0.1, 0.05, 0.025]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }
}
