use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{Error, Result};

/// Inverse of the regularized incomplete beta function `I_x(a, b)` in `x`.
///
/// Safeguarded Newton iteration inside a shrinking bisection bracket.
pub fn inverse_regularized_beta(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let log_norm = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = a / (a + b);
    for _ in 0..300 {
        let f = beta_reg(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let log_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - log_norm;
        let step = f / log_pdf.exp();
        let mut next = x - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 * x.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Exact (Clopper–Pearson) two-sided binomial confidence interval for
/// `k` successes in `n` trials at level `1 − alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "clopper_pearson: need 0 <= k <= n and n >= 1, got k={k}, n={n}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "clopper_pearson: alpha must be in (0, 1), got {alpha}"
        )));
    }
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        inverse_regularized_beta(alpha / 2.0, kf, nf - kf + 1.0)
    };
    let hi = if k == n {
        1.0
    } else {
        inverse_regularized_beta(1.0 - alpha / 2.0, kf + 1.0, nf - kf)
    };
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries() {
        let (lo, hi) = clopper_pearson(0, 10, 0.05).unwrap();
        assert_eq!(lo, 0.0);
        // closed form for k = 0: 1 - (alpha/2)^(1/n)
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(10, 10, 0.05).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn invalid_arguments() {
        assert!(clopper_pearson(3, 2, 0.05).is_err());
        assert!(clopper_pearson(0, 0, 0.05).is_err());
        assert!(clopper_pearson(1, 2, 0.0).is_err());
        assert!(clopper_pearson(1, 2, 1.0).is_err());
    }

    #[test]
    fn contains_point_estimate_and_widens() {
        for n in [1u64, 2, 7, 30, 200] {
            for k in 0..=n {
                let (lo95, hi95) = clopper_pearson(k, n, 0.05).unwrap();
                let (lo99, hi99) = clopper_pearson(k, n, 0.01).unwrap();
                let p = k as f64 / n as f64;
                assert!(lo95 <= p && p <= hi95);
                assert!(lo99 <= lo95 && hi95 <= hi99);
            }
        }
    }

    #[test]
    fn inverse_is_inverse() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 5.0), (30.0, 4.0), (1.0, 1.0)] {
            for &p in &[1e-6, 0.025, 0.3, 0.5, 0.975, 0.999999] {
                let x = inverse_regularized_beta(p, a, b);
                // near the endpoints the cdf is steeper than the f64 grid of x
                let (below, above) = (x - 4.0 * f64::EPSILON, (x + 4.0 * f64::EPSILON).min(1.0));
                let close = (beta_reg(a, b, x) - p).abs() < 1e-12;
                let bracketed = beta_reg(a, b, below) <= p && p <= beta_reg(a, b, above);
                assert!(close || bracketed, "a={a} b={b} p={p}");
            }
        }
    }
}
