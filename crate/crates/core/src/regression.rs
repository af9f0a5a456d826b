//! Ordinary least squares on a single regressor, shared by the rank-frequency
//! fit and the subset-exponent estimator.

#[derive(Debug, Clone, Copy)]
pub(crate) struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub se_intercept: f64,
    pub r2: f64,
}

/// Fit `y = intercept + slope * x`. Needs at least two distinct `x` values;
/// standard errors are NaN-free only with three or more points.
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> LineFit {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let dof = n - 2.0;
    let (se_slope, se_intercept) = if dof > 0.0 {
        let s2 = sse / dof;
        let sum_x2: f64 = xs.iter().map(|x| x * x).sum();
        ((s2 / sxx).sqrt(), (s2 * sum_x2 / (n * sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    // A flat response is fitted perfectly by a zero slope.
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    LineFit {
        slope,
        intercept,
        se_slope,
        se_intercept,
        r2,
    }
}
