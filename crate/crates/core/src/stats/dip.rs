//! Hartigan's dip statistic and a seeded Monte Carlo p-value.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipResult {
    /// Within `[1/(2n), 1/4]`.
    pub dip: f64,
    /// Fraction of null replicates with a dip at least as large.
    pub p_value: f64,
    pub n_boot: usize,
    pub seed: u64,
}

/// Dip of a sorted sample: the largest distance between its empirical CDF
/// and the closest unimodal CDF.
///
/// Follows the greatest-convex-minorant / least-concave-majorant iteration
/// of Hartigan & Hartigan (AS 217) with the later index corrections. The
/// result lies in `[1/(2n), 1/4]`.
pub fn dip_statistic(sorted: &[f64]) -> Result<f64> {
    let n = sorted.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dip test needs at least two finite values, got {n}"
        )));
    }
    if sorted.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("dip statistic expects sorted finite input".into()));
    }
    if sorted[0] == sorted[n - 1] {
        return Ok(1.0 / (2.0 * n as f64));
    }

    // one-based views to keep the index arithmetic of the reference algorithm
    let x = |i: usize| sorted[i - 1];
    let mut mn = vec![0usize; n + 1];
    let mut mj = vec![0usize; n + 1];
    let mut gcm = vec![0usize; n + 2];
    let mut lcm = vec![0usize; n + 2];

    // fit points of the convex minorant
    mn[1] = 1;
    for j in 2..=n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            let mnmnj = mn[mnj];
            if mnj == 1
                || (x(j) - x(mnj)) * (mnj as f64 - mnmnj as f64)
                    < (x(mnj) - x(mnmnj)) * (j as f64 - mnj as f64)
            {
                break;
            }
            mn[j] = mnmnj;
        }
    }
    // fit points of the concave majorant
    mj[n] = n;
    for k in (1..n).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            let mjmjk = mj[mjk];
            if mjk == n
                || (x(k) - x(mjk)) * (mjk as f64 - mjmjk as f64)
                    < (x(mjk) - x(mjmjk)) * (k as f64 - mjk as f64)
            {
                break;
            }
            mj[k] = mjmjk;
        }
    }

    let mut low = 1usize;
    let mut high = n;
    let mut dip = 1.0f64;

    loop {
        gcm[1] = high;
        let mut i = 1;
        while gcm[i] > low {
            gcm[i + 1] = mn[gcm[i]];
            i += 1;
        }
        let l_gcm = i;
        let mut ig = l_gcm;
        let mut ix = ig - 1;

        lcm[1] = low;
        let mut i = 1;
        while lcm[i] < high {
            lcm[i + 1] = mj[lcm[i]];
            i += 1;
        }
        let l_lcm = i;
        let mut ih = l_lcm;
        let mut iv = 2usize;

        let mut d = 0.0f64;
        if l_gcm != 2 || l_lcm != 2 {
            loop {
                let gcmix = gcm[ix];
                let lcmiv = lcm[iv];
                if gcmix > lcmiv {
                    let gcmi1 = gcm[ix + 1];
                    let dx = (lcmiv as f64 - gcmi1 as f64 + 1.0)
                        - (x(lcmiv) - x(gcmi1)) * (gcmix - gcmi1) as f64
                            / (x(gcmix) - x(gcmi1));
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv - 1;
                    }
                } else {
                    let lcmiv1 = lcm[iv - 1];
                    let dx = (x(gcmix) - x(lcmiv1)) * (lcmiv - lcmiv1) as f64
                        / (x(lcmiv) - x(lcmiv1))
                        - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix + 1;
                        ih = iv;
                    }
                }
                if ix < 1 {
                    ix = 1;
                }
                if iv > l_lcm {
                    iv = l_lcm;
                }
                if gcm[ix] == lcm[iv] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }

        if d < dip {
            break;
        }

        // dip of the convex minorant on [low, high]
        let mut dip_l = 0.0f64;
        for j in ig..l_gcm {
            let mut max_t = 1.0f64;
            let (jb, je) = (gcm[j + 1], gcm[j]);
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    let t = (jj - jb + 1) as f64 - (x(jj) - x(jb)) * c;
                    if max_t < t {
                        max_t = t;
                    }
                }
            }
            if dip_l < max_t {
                dip_l = max_t;
            }
        }
        // dip of the concave majorant
        let mut dip_u = 0.0f64;
        for j in ih..l_lcm {
            let mut max_t = 1.0f64;
            let (jb, je) = (lcm[j], lcm[j + 1]);
            if je - jb > 1 && x(je) != x(jb) {
                let c = (je - jb) as f64 / (x(je) - x(jb));
                for jj in jb..=je {
                    let t = (x(jj) - x(jb)) * c - (jj as f64 - jb as f64 - 1.0);
                    if max_t < t {
                        max_t = t;
                    }
                }
            }
            if dip_u < max_t {
                dip_u = max_t;
            }
        }

        let dip_new = dip_l.max(dip_u);
        if dip < dip_new {
            dip = dip_new;
        }
        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }

    Ok(dip / (2.0 * n as f64))
}

fn finite_sorted(samples: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v
}

/// Sorted null dips for uniform samples of one size.
///
/// Replicate `b` draws from the ChaCha stream `b` of `seed`, so the
/// distribution does not depend on thread scheduling.
fn simulate_null(n: usize, n_boot: usize, seed: u64) -> Vec<f64> {
    let mut dips: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            u.sort_by(|a, c| a.partial_cmp(c).expect("finite"));
            dip_statistic(&u).expect("n >= 2")
        })
        .collect();
    dips.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    dips
}

/// Memoized null distributions keyed by sample size, shared across many
/// tests with the same replicate count and seed.
pub struct DipNullCache {
    n_boot: usize,
    seed: u64,
    tables: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl DipNullCache {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        Self {
            n_boot,
            seed,
            tables: Mutex::new(HashMap::new()),
        }
    }

    fn null_for(&self, n: usize) -> Arc<Vec<f64>> {
        if let Some(t) = self.tables.lock().expect("poisoned").get(&n) {
            return Arc::clone(t);
        }
        let table = Arc::new(simulate_null(n, self.n_boot, self.seed));
        self.tables
            .lock()
            .expect("poisoned")
            .entry(n)
            .or_insert(table)
            .clone()
    }

    /// Dip test of `samples` (non-finite values dropped).
    pub fn test(&self, samples: &[f64]) -> Result<DipResult> {
        if self.n_boot == 0 {
            return Err(Error::InvalidArgument("n_boot must be positive".into()));
        }
        let sorted = finite_sorted(samples);
        let dip = dip_statistic(&sorted)?;
        let null = self.null_for(sorted.len());
        let below = null.partition_point(|&d| d < dip);
        Ok(DipResult {
            dip,
            p_value: (null.len() - below) as f64 / self.n_boot as f64,
            n_boot: self.n_boot,
            seed: self.seed,
        })
    }
}

/// Hartigan's dip test against the uniform null.
pub fn dip_test(samples: &[f64], n_boot: usize, seed: u64) -> Result<DipResult> {
    DipNullCache::new(n_boot, seed).test(samples)
}
