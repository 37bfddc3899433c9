//! One-feature logistic regression with balanced class weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible |weight| per position unit; reached only under
/// (quasi-)complete separation.
pub const WEIGHT_CAP: f64 = 30.0;

const STEP_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Log-odds change per position unit.
    pub weight: f64,
    pub intercept: f64,
    /// Position where the predicted probability crosses 0.5 (NaN if weight is 0).
    pub cutoff: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn decision(&self, x: f64) -> f64 {
        self.weight * x + self.intercept
    }

    pub fn probability(&self, x: f64) -> f64 {
        sigmoid(self.decision(x))
    }

    /// True when the model predicts the success class.
    pub fn predict(&self, x: f64) -> bool {
        self.decision(x) > 0.0
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Class-balanced negative log-likelihood of `(weight, intercept)`.
///
/// Observation `i` carries weight `n / (2 · n_class(i))`, so both classes
/// contribute the same total mass.
#[derive(Clone, Debug)]
pub struct LogisticObjective<'a> {
    x: &'a [f64],
    y: &'a [bool],
    w: Vec<f64>,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a [f64], y: &'a [bool]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidArgument("positions and labels differ in length".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("positions must be finite".into()));
        }
        let n_pos = y.iter().filter(|&&b| b).count();
        let n_neg = y.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::InvalidArgument("both classes must be present".into()));
        }
        let n = y.len() as f64;
        let (wp, wn) = (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64));
        let w = y.iter().map(|&b| if b { wp } else { wn }).collect();
        Ok(Self { x, y, w })
    }

    pub fn sample_weights(&self) -> &[f64] {
        &self.w
    }

    pub fn value(&self, weight: f64, intercept: f64) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&x, &y), &w)| {
                let z = weight * x + intercept;
                // -log σ(z) = softplus(-z), -log(1-σ(z)) = softplus(z)
                w * if y { softplus(-z) } else { softplus(z) }
            })
            .sum()
    }

    /// Gradient with respect to `(weight, intercept)`.
    pub fn gradient(&self, weight: f64, intercept: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for ((&x, &y), &w) in self.x.iter().zip(self.y).zip(&self.w) {
            let r = w * (sigmoid(weight * x + intercept) - f64::from(u8::from(y)));
            g[0] += r * x;
            g[1] += r;
        }
        g
    }

    fn hessian(&self, weight: f64, intercept: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for (&x, &w) in self.x.iter().zip(&self.w) {
            let p = sigmoid(weight * x + intercept);
            let s = w * p * (1.0 - p);
            h[0][0] += s * x * x;
            h[0][1] += s * x;
            h[1][1] += s;
        }
        h[1][0] = h[0][1];
        h
    }
}

/// Fits `P(success | x) = σ(weight · x + intercept)` by damped Newton
/// (iteratively reweighted least squares) on the class-balanced likelihood.
///
/// `labels[i]` is true for the success class. Stops when the largest
/// parameter step falls below 1e-8 or after 100 iterations. If the classes
/// are separable the weight is capped at ±30 per unit, the intercept is
/// refit for that weight, and the fit is flagged as not converged.
pub fn balanced_logistic_fit(positions: &[f64], labels: &[bool]) -> Result<LogisticFit> {
    let obj = LogisticObjective::new(positions, labels)?;
    if let Some(sign) = separation_sign(positions, labels) {
        // the likelihood has no finite maximizer: cap the weight at once
        let a = WEIGHT_CAP * sign;
        let b = refit_intercept(&obj, a, 0.0);
        return Ok(LogisticFit {
            weight: a,
            intercept: b,
            cutoff: -b / a,
            converged: false,
            iterations: 0,
        });
    }
    let (mut a, mut b) = (0.0f64, 0.0f64);
    let mut f = obj.value(a, b);
    let mut converged = false;
    let mut capped = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let g = obj.gradient(a, b);
        let h = obj.hessian(a, b);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let (da, db) = if det > 0.0 && det.is_finite() {
            (
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            )
        } else {
            // flat curvature: fall back to a gradient step
            (-g[0], -g[1])
        };
        let mut t = 1.0;
        let (mut na, mut nb, mut nf);
        loop {
            na = a + t * da;
            nb = b + t * db;
            nf = obj.value(na, nb);
            if nf <= f || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let step = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        f = nf;
        if a.abs() > WEIGHT_CAP {
            capped = true;
            break;
        }
        if step < STEP_TOL {
            converged = true;
            break;
        }
    }

    if capped {
        a = WEIGHT_CAP.copysign(a);
        b = refit_intercept(&obj, a, b);
        converged = false;
    }

    Ok(LogisticFit {
        weight: a,
        intercept: b,
        cutoff: if a != 0.0 { -b / a } else { f64::NAN },
        converged,
        iterations,
    })
}

/// Sign of the diverging weight when the classes are (quasi-)completely
/// separated on the line, i.e. one class lies entirely on one side.
fn separation_sign(x: &[f64], y: &[bool]) -> Option<f64> {
    let (mut pos_min, mut pos_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut neg_min, mut neg_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&v, &label) in x.iter().zip(y) {
        if label {
            pos_min = pos_min.min(v);
            pos_max = pos_max.max(v);
        } else {
            neg_min = neg_min.min(v);
            neg_max = neg_max.max(v);
        }
    }
    if neg_max <= pos_min && neg_min < pos_max {
        Some(1.0)
    } else if pos_max <= neg_min && pos_min < neg_max {
        Some(-1.0)
    } else {
        None
    }
}

/// Newton on the intercept alone with the weight held fixed.
fn refit_intercept(obj: &LogisticObjective<'_>, weight: f64, start: f64) -> f64 {
    let mut b = start;
    let mut f = obj.value(weight, b);
    for _ in 0..MAX_ITER {
        let g = obj.gradient(weight, b)[1];
        let h = obj.hessian(weight, b)[1][1];
        let d = if h > 1e-300 { -g / h } else { -g.signum() };
        let mut t = 1.0;
        let (mut nb, mut nf);
        loop {
            nb = b + t * d;
            nf = obj.value(weight, nb);
            if nf <= f || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        let step = (nb - b).abs();
        b = nb;
        f = nf;
        if step < STEP_TOL {
            break;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_signal_gives_flat_model() {
        let x = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let y = [false, false, false, true, true, true];
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        assert!(fit.converged);
        assert!(fit.weight.abs() < 1e-9);
        for v in x {
            assert!((fit.probability(v) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn separated_classes_are_capped() {
        let x = [0.0, 1.0, 9.0, 10.0];
        let y = [false, false, true, true];
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        assert!(!fit.converged, "{fit:?}");
        assert_eq!(fit.weight, WEIGHT_CAP);
        assert!(fit.cutoff > 1.0 && fit.cutoff < 9.0, "{fit:?}");
        let flipped = balanced_logistic_fit(&x, &[true, true, false, false]).unwrap();
        assert_eq!(flipped.weight, -WEIGHT_CAP);
        // touching classes are still separated
        let fit = balanced_logistic_fit(&[0.0, 1.0, 1.0, 2.0], &y).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn balanced_weights_sum_per_class() {
        let x = [0.0; 5];
        let y = [true, false, false, false, false];
        let obj = LogisticObjective::new(&x, &y).unwrap();
        let w = obj.sample_weights();
        assert!((w[0] - 2.5).abs() < 1e-15);
        let neg: f64 = w[1..].iter().sum();
        assert!((neg - 2.5).abs() < 1e-15);
    }

    #[test]
    fn balanced_intercept_for_constant_feature() {
        // with balanced weights the optimum predicts 0.5 regardless of imbalance
        let x = [1.0, 1.0, 1.0, 1.0];
        let y = [true, false, false, false];
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        assert!(fit.decision(1.0).abs() < 1e-8);
    }

    #[test]
    fn precondition_errors() {
        assert!(balanced_logistic_fit(&[1.0, 2.0], &[true, true]).is_err());
        assert!(balanced_logistic_fit(&[1.0, f64::NAN], &[true, false]).is_err());
        assert!(balanced_logistic_fit(&[1.0], &[true, false]).is_err());
    }

    fn noisy_instance(seed: u64, n_pos: usize, n_neg: usize) -> (Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n_pos {
            x.push(6.0 + 2.5 * (rng.random::<f64>() - 0.5) * 2.0);
            y.push(true);
        }
        for _ in 0..n_neg {
            x.push(4.0 + 2.5 * (rng.random::<f64>() - 0.5) * 2.0);
            y.push(false);
        }
        (x, y)
    }

    #[test]
    fn gradient_vanishes_and_matches_finite_differences() {
        let (x, y) = noisy_instance(4, 30, 10);
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        assert!(fit.converged);
        let obj = LogisticObjective::new(&x, &y).unwrap();
        let g = obj.gradient(fit.weight, fit.intercept);
        assert!((g[0] * g[0] + g[1] * g[1]).sqrt() < 1e-6);

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let a = rng.random::<f64>() * 4.0 - 2.0;
            let b = rng.random::<f64>() * 10.0 - 5.0;
            let g = obj.gradient(a, b);
            let h = 1e-6;
            let fa = (obj.value(a + h, b) - obj.value(a - h, b)) / (2.0 * h);
            let fb = (obj.value(a, b + h) - obj.value(a, b - h)) / (2.0 * h);
            assert!((fa - g[0]).abs() <= 1e-5 * g[0].abs().max(1.0));
            assert!((fb - g[1]).abs() <= 1e-5 * g[1].abs().max(1.0));
        }
    }

    #[test]
    fn negating_positions_negates_weight_and_cutoff() {
        let (x, y) = noisy_instance(9, 25, 15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = balanced_logistic_fit(&x, &y).unwrap();
        let b = balanced_logistic_fit(&neg, &y).unwrap();
        assert!((a.weight + b.weight).abs() < 1e-7);
        assert!((a.cutoff + b.cutoff).abs() < 1e-7);
    }
}
