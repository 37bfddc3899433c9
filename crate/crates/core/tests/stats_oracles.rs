//! Statistical routines against brute-force oracles.

use polispace_core::stats::{balanced_logistic_fit, clopper_pearson, roc_auc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)` by direct summation.
fn upper_tail(n: u64, k: u64, p: f64) -> f64 {
    (k..=n)
        .map(|i| (ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (1.0 - p).ln()).exp())
        .sum()
}

/// Root of a monotone function on (0, 1) by bisection.
fn bisect(f: impl Fn(f64) -> f64, increasing: bool) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn clopper_pearson_matches_tail_bisection() {
    let alpha = 0.05;
    for n in [1u64, 2, 5, 10, 37, 100, 250] {
        let step = (n / 12).max(1);
        for k in (0..=n).step_by(step as usize).chain([n]) {
            let (lo, hi) = clopper_pearson(k, n, alpha).unwrap();
            let want_lo = if k == 0 {
                0.0
            } else {
                bisect(|p| upper_tail(n, k, p) - alpha / 2.0, true)
            };
            let want_hi = if k == n {
                1.0
            } else {
                // P(X ≤ k) = 1 − P(X ≥ k + 1) falls as p grows
                bisect(|p| (1.0 - upper_tail(n, k + 1, p)) - alpha / 2.0, false)
            };
            assert!((lo - want_lo).abs() < 1e-9, "n={n} k={k}: lo {lo} vs {want_lo}");
            assert!((hi - want_hi).abs() < 1e-9, "n={n} k={k}: hi {hi} vs {want_hi}");
        }
    }
}

#[test]
fn auc_matches_pair_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..50 {
        let n = rng.random_range(2..200);
        // coarse scores force plenty of ties
        let levels = rng.random_range(2..30);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / 3.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        labels[0] = true;
        labels[1] = false;
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let got = roc_auc(&scores, &labels).unwrap();
        assert!((got - wins / pairs).abs() < 1e-12, "case {case}: {got} vs {}", wins / pairs);
    }
}

/// Class-balanced log-loss written out independently of the library.
fn balanced_loss(x: &[f64], y: &[bool], w: f64, b: f64) -> f64 {
    let n = x.len() as f64;
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    let n_neg = n - n_pos;
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let z = w * xi + b;
            // -log σ(z) for positives, -log(1 − σ(z)) for negatives
            let signed = if yi { -z } else { z };
            let loss = if signed > 30.0 { signed } else { signed.exp().ln_1p() };
            let weight = if yi { n / (2.0 * n_pos) } else { n / (2.0 * n_neg) };
            weight * loss
        })
        .sum()
}

/// Minimizer by successively refined grid search.
fn grid_minimum(x: &[f64], y: &[bool]) -> (f64, f64) {
    let (mut cw, mut cb) = (0.0, 0.0);
    let mut half = 20.0;
    while half > 1e-6 {
        let mut best = (f64::INFINITY, cw, cb);
        for i in -20..=20 {
            for j in -20..=20 {
                let w = cw + half * i as f64 / 20.0;
                let b = cb + half * j as f64 / 20.0;
                let l = balanced_loss(x, y, w, b);
                if l < best.0 {
                    best = (l, w, b);
                }
            }
        }
        cw = best.1;
        cb = best.2;
        half /= 4.0;
    }
    (cw, cb)
}

#[test]
fn logistic_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..20 {
        let n = rng.random_range(30..300);
        let shift = rng.random_range(0.2..2.0);
        let imbalance = rng.random_range(0.15..0.85);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.random::<f64>() < imbalance;
            let noise: f64 = rng.random_range(-1.5..1.5);
            x.push(5.0 + noise + if label { shift } else { 0.0 });
            y.push(label);
        }
        y[0] = true;
        y[1] = false;
        let fit = balanced_logistic_fit(&x, &y).unwrap();
        assert!(fit.converged, "case {case}");
        let (w, b) = grid_minimum(&x, &y);
        assert!((fit.weight - w).abs() < 1e-3, "case {case}: w {} vs {w}", fit.weight);
        assert!((fit.intercept - b).abs() < 1e-3, "case {case}: b {} vs {b}", fit.intercept);
    }
}
