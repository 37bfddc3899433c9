//! Forward sampling of the logistic homophily model and recovery benchmarks.
//!
//! Follow links are drawn independently with
//! `P(i follows j) = σ(α_i + β_j − γ‖φ_i − φ_j‖²)`.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca::{correspondence_analysis, embedding_stability, party_centroids, CaConfig, StabilityReport};
use crate::calibrate::{
    apply_calibration, fit_affine_map, AffineCalibration, DimensionSpec, Fidelity, PositionTable,
    DEFAULT_ALPHA,
};
use crate::error::{Error, Result};
use crate::model::{filter_network, BipartiteNetwork, PopularityCut};
use crate::stats::pearson;

/// How follower latent positions are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FollowerPositions {
    /// Uniformly chosen party center plus isotropic Gaussian noise.
    PartyMixture { spread: f64 },
    /// Isotropic Gaussian around the origin.
    Gaussian { std: f64 },
    /// Uniform on the cube `[-half_width, half_width]^d`.
    Uniform { half_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelParams {
    pub n_followers: usize,
    pub n_elites: usize,
    pub d: usize,
    pub gamma: f64,
    pub alpha_mean: f64,
    pub alpha_std: f64,
    pub beta_mean: f64,
    pub beta_std: f64,
    /// One latent center per party; elites are assigned round-robin.
    pub party_centers: Vec<Vec<f64>>,
    pub within_party_std: f64,
    pub follower_positions: FollowerPositions,
    /// Log-normal parameters of each follower account's own follower count.
    pub account_followers_log_mean: f64,
    pub account_followers_log_std: f64,
    pub seed: u64,
}

impl SyntheticModelParams {
    /// Two-dimensional space with six parties on a hexagon.
    pub fn hexagon(seed: u64) -> Self {
        let centers = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / 3.0;
                vec![1.5 * t.cos(), 1.5 * t.sin()]
            })
            .collect();
        Self {
            n_followers: 2000,
            n_elites: 100,
            d: 2,
            gamma: 2.0,
            alpha_mean: 0.0,
            alpha_std: 0.5,
            beta_mean: 0.0,
            beta_std: 0.5,
            party_centers: centers,
            within_party_std: 0.3,
            follower_positions: FollowerPositions::PartyMixture { spread: 0.4 },
            account_followers_log_mean: 80f64.ln(),
            account_followers_log_std: 1.2,
            seed,
        }
    }

    /// One-dimensional space with two distant wing parties and a small
    /// centrist party between them (calibration needs three parties).
    pub fn line(seed: u64) -> Self {
        Self {
            d: 1,
            party_centers: vec![vec![-1.5], vec![0.0], vec![1.5]],
            ..Self::hexagon(seed)
        }
    }

    pub fn party_count(&self) -> usize {
        self.party_centers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_followers == 0 || self.n_elites == 0 || self.d == 0 {
            return bad("sizes and dimension must be positive".into());
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma {} must be >= 0", self.gamma));
        }
        if self.party_count() < 3 {
            return bad(format!("{} parties, need at least 3", self.party_count()));
        }
        if self.party_centers.iter().any(|c| c.len() != self.d) {
            return bad("party centers must have d coordinates".into());
        }
        let stds = [
            self.alpha_std,
            self.beta_std,
            self.within_party_std,
            self.account_followers_log_std,
        ];
        if stds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("standard deviations must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Known truth behind a sampled network.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub follower_positions: DMatrix<f64>,
    pub elite_positions: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Party label of each elite.
    pub elite_party: Vec<String>,
    /// Affine map latent → survey space: `score = map · φ + offset`.
    pub survey_map: DMatrix<f64>,
    pub survey_offset: Vec<f64>,
    /// Survey scores of each party: the image of its elite centroid.
    pub party_scores: BTreeMap<String, Vec<f64>>,
    /// Survey-space image of every follower's true position.
    pub follower_scores: DMatrix<f64>,
    /// Own follower count of every follower account.
    pub account_followers: Vec<u64>,
}

impl GroundTruth {
    pub fn elite_party_map(&self, net: &BipartiteNetwork) -> HashMap<String, String> {
        net.elite_ids()
            .iter()
            .cloned()
            .zip(self.elite_party.iter().cloned())
            .collect()
    }
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Follow probability under the homophily model.
pub fn edge_probability(alpha: f64, beta: f64, gamma: f64, phi_i: &[f64], phi_j: &[f64]) -> f64 {
    let d2: f64 = phi_i.iter().zip(phi_j).map(|(a, b)| (a - b) * (a - b)).sum();
    logistic(alpha + beta - gamma * d2)
}

/// Survey dimensions of synthetic instances.
pub fn synthetic_dimensions(d: usize) -> Vec<DimensionSpec> {
    (1..=d).map(|k| DimensionSpec::new(format!("dim{k}"), "2000")).collect()
}

pub fn follower_id(i: usize) -> String {
    format!("f{i:06}")
}

pub fn elite_id(j: usize) -> String {
    format!("e{j:04}")
}

pub fn party_name(p: usize) -> String {
    format!("P{p}")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Samples a network and its ground truth.
pub fn generate_network(params: &SyntheticModelParams) -> Result<(BipartiteNetwork, GroundTruth)> {
    generate_network_rotated(params, None)
}

/// As [`generate_network`], with every latent position rotated by the
/// orthogonal `rotation` after drawing. Distances, and therefore the
/// network, are unchanged up to floating-point rounding.
pub fn generate_network_rotated(
    params: &SyntheticModelParams,
    rotation: Option<&DMatrix<f64>>,
) -> Result<(BipartiteNetwork, GroundTruth)> {
    params.validate()?;
    let d = params.d;
    let p = params.party_count();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut elites = DMatrix::zeros(params.n_elites, d);
    let mut elite_party = Vec::with_capacity(params.n_elites);
    for j in 0..params.n_elites {
        let party = j % p;
        for k in 0..d {
            elites[(j, k)] = params.party_centers[party][k] + params.within_party_std * gaussian(&mut rng);
        }
        elite_party.push(party_name(party));
    }
    let mut followers = DMatrix::zeros(params.n_followers, d);
    for i in 0..params.n_followers {
        match params.follower_positions {
            FollowerPositions::PartyMixture { spread } => {
                let party = rng.random_range(0..p);
                for k in 0..d {
                    followers[(i, k)] = params.party_centers[party][k] + spread * gaussian(&mut rng);
                }
            }
            FollowerPositions::Gaussian { std } => {
                for k in 0..d {
                    followers[(i, k)] = std * gaussian(&mut rng);
                }
            }
            FollowerPositions::Uniform { half_width } => {
                for k in 0..d {
                    followers[(i, k)] = rng.random_range(-half_width..=half_width);
                }
            }
        }
    }
    if let Some(r) = rotation {
        if r.nrows() != d || r.ncols() != d {
            return Err(Error::InvalidArgument(format!("rotation must be {d}×{d}")));
        }
        followers = &followers * r.transpose();
        elites = &elites * r.transpose();
    }

    let normal = |m: f64, s: f64| Normal::new(m, s).expect("validated std");
    let alpha_dist = normal(params.alpha_mean, params.alpha_std);
    let beta_dist = normal(params.beta_mean, params.beta_std);
    let alpha: Vec<f64> = (0..params.n_followers).map(|_| alpha_dist.sample(&mut rng)).collect();
    let beta: Vec<f64> = (0..params.n_elites).map(|_| beta_dist.sample(&mut rng)).collect();
    let counts = LogNormal::new(params.account_followers_log_mean, params.account_followers_log_std)
        .expect("validated std");
    let account_followers: Vec<u64> = (0..params.n_followers)
        .map(|_| counts.sample(&mut rng).round() as u64)
        .collect();

    // One ChaCha stream per follower keeps the draws independent of threads.
    let edge_seed: u64 = rng.random();
    let rows: Vec<Vec<(u32, u32)>> = (0..params.n_followers)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(edge_seed);
            r.set_stream(i as u64);
            let fi: Vec<f64> = followers.row(i).iter().copied().collect();
            let mut out = Vec::new();
            for j in 0..params.n_elites {
                let ej: Vec<f64> = elites.row(j).iter().copied().collect();
                let prob = edge_probability(alpha[i], beta[j], params.gamma, &fi, &ej);
                if r.random::<f64>() < prob {
                    out.push((i as u32, j as u32));
                }
            }
            out
        })
        .collect();
    let net = BipartiteNetwork::from_parts(
        (0..params.n_followers).map(follower_id).collect(),
        (0..params.n_elites).map(elite_id).collect(),
        rows.into_iter().flatten().collect(),
    )?;

    // Survey space: a random well-conditioned affine image, rescaled so
    // party scores span [1, 9] on every dimension.
    let mut centroids = vec![vec![0.0; d]; p];
    let mut sizes = vec![0usize; p];
    for j in 0..params.n_elites {
        let party = j % p;
        sizes[party] += 1;
        for k in 0..d {
            centroids[party][k] += elites[(j, k)];
        }
    }
    for (c, &n) in centroids.iter_mut().zip(&sizes) {
        for v in c.iter_mut() {
            *v /= n.max(1) as f64;
        }
    }
    let mut map = loop {
        let m = DMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
        let sv = m.singular_values();
        if sv.min() > 0.2 * sv.max() {
            break m;
        }
    };
    let raw: Vec<Vec<f64>> = centroids
        .iter()
        .map(|c| (0..d).map(|r| (0..d).map(|k| map[(r, k)] * c[k]).sum()).collect())
        .collect();
    let mut offset = vec![0.0; d];
    for r in 0..d {
        let present = raw.iter().zip(&sizes).filter(|(_, &n)| n > 0).map(|(v, _)| v[r]);
        let lo = present.clone().fold(f64::INFINITY, f64::min);
        let hi = present.fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { 8.0 / (hi - lo) } else { 1.0 };
        for k in 0..d {
            map[(r, k)] *= scale;
        }
        offset[r] = 1.0 - lo * scale;
    }
    let image = |phi: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|r| (0..d).map(|k| map[(r, k)] * phi[k]).sum::<f64>() + offset[r])
            .collect()
    };
    let party_scores = centroids
        .iter()
        .zip(&sizes)
        .enumerate()
        .filter(|(_, (_, &n))| n > 0)
        .map(|(q, (c, _))| (party_name(q), image(c)))
        .collect();
    let mut follower_scores = DMatrix::zeros(params.n_followers, d);
    for i in 0..params.n_followers {
        let phi: Vec<f64> = followers.row(i).iter().copied().collect();
        for (r, v) in image(&phi).into_iter().enumerate() {
            follower_scores[(i, r)] = v;
        }
    }

    Ok((
        net,
        GroundTruth {
            follower_positions: followers,
            elite_positions: elites,
            alpha,
            beta,
            elite_party,
            survey_map: map,
            survey_offset: offset,
            party_scores,
            follower_scores,
            account_followers,
        },
    ))
}

/// Options of the end-to-end benchmark pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub min_elites_followed: u32,
    pub min_account_followers: Option<u64>,
    /// Latent dimensions; defaults to one less than the party count.
    pub k_dims: Option<usize>,
    pub ridge_alpha: f64,
    pub ca_seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            min_elites_followed: 3,
            min_account_followers: None,
            k_dims: None,
            ridge_alpha: DEFAULT_ALPHA,
            ca_seed: 0,
        }
    }
}

/// Calibrated positions produced from a synthetic network.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub followers: PositionTable,
    pub elites: PositionTable,
    pub calibrations: Vec<AffineCalibration>,
    pub singular_values: Vec<f64>,
    pub edges: usize,
}

/// filter → CA → party centroids → ridge maps → projection.
pub fn run_pipeline(
    net: &BipartiteNetwork,
    truth: &GroundTruth,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    let counts: HashMap<String, u64> = net
        .follower_ids()
        .iter()
        .cloned()
        .zip(truth.account_followers.iter().copied())
        .collect();
    let popularity = opts.min_account_followers.map(|m| PopularityCut {
        min_account_followers: m,
        account_followers: &counts,
    });
    let (filtered, _) = filter_network(net, opts.min_elites_followed, popularity)?;
    if filtered.n_followers() < 2 || filtered.n_elites() < 2 {
        return Err(Error::Empty("network after filtering"));
    }
    let elite_party = truth.elite_party_map(net);
    let parties = truth.party_scores.len();
    let k = opts
        .k_dims
        .unwrap_or(parties.saturating_sub(1).max(1))
        .min(filtered.n_followers().min(filtered.n_elites()) - 1);
    let cfg = CaConfig {
        k_dims: k,
        seed: opts.ca_seed,
        ..CaConfig::default()
    };
    let emb = correspondence_analysis(&filtered, &cfg)?;
    let centroids = party_centroids(&emb, &elite_party)?;
    let dims = synthetic_dimensions(truth.survey_map.nrows());
    let calibrations = dims
        .iter()
        .enumerate()
        .map(|(r, spec)| {
            let scores: BTreeMap<String, f64> =
                truth.party_scores.iter().map(|(p, s)| (p.clone(), s[r])).collect();
            fit_affine_map(spec, &centroids, &scores, opts.ridge_alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let pos = apply_calibration(&emb, &calibrations)?;
    Ok(PipelineOutput {
        followers: pos.followers,
        elites: pos.elites,
        calibrations,
        singular_values: emb.singular_values,
        edges: filtered.edge_count(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub seed: u64,
    pub dimensions: Vec<String>,
    /// Pearson correlation of recovered and true follower scores per dimension.
    pub pearson: Vec<f64>,
    pub fidelity: Vec<Fidelity>,
    pub followers_kept: usize,
    pub elites_kept: usize,
    pub edges: usize,
    pub runtime_secs: f64,
}

impl RecoveryReport {
    pub fn mean_pearson(&self) -> f64 {
        self.pearson.iter().sum::<f64>() / self.pearson.len() as f64
    }
}

/// Row index of each follower id, for the `f{i:06}` ids of synthetic networks.
fn synthetic_row(id: &str) -> usize {
    id[1..].parse().expect("synthetic follower id")
}

/// Pearson correlation, per survey dimension, of recovered follower
/// positions against their true survey-space images.
pub fn recovery_pearson(followers: &PositionTable, truth: &GroundTruth) -> Result<Vec<f64>> {
    let rows: Vec<usize> = followers.ids().iter().map(|id| synthetic_row(id)).collect();
    (0..followers.columns().len())
        .map(|c| {
            let got = followers.column(c);
            let want: Vec<f64> = rows.iter().map(|&i| truth.follower_scores[(i, c)]).collect();
            pearson(&got, &want)
        })
        .collect()
}

/// Samples an instance, runs the pipeline and scores the recovery.
pub fn recovery_benchmark(params: &SyntheticModelParams, opts: &PipelineOptions) -> Result<RecoveryReport> {
    recovery_benchmark_rotated(params, opts, None)
}

pub fn recovery_benchmark_rotated(
    params: &SyntheticModelParams,
    opts: &PipelineOptions,
    rotation: Option<&DMatrix<f64>>,
) -> Result<RecoveryReport> {
    let start = Instant::now();
    let (net, truth) = generate_network_rotated(params, rotation)?;
    let out = run_pipeline(&net, &truth, opts)?;
    let pearson = recovery_pearson(&out.followers, &truth)?;
    Ok(RecoveryReport {
        seed: params.seed,
        dimensions: out.followers.columns().to_vec(),
        pearson,
        fidelity: out.calibrations.iter().map(|c| c.fidelity).collect(),
        followers_kept: out.followers.len(),
        elites_kept: out.elites.len(),
        edges: out.edges,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Random orthogonal matrix (QR of a Gaussian matrix, signs fixed).
pub fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Restricts a position table to the given ids, in that order.
fn subset(table: &PositionTable, ids: &[String]) -> Result<PositionTable> {
    let mut out = PositionTable::new(table.columns().to_vec());
    for id in ids {
        let r = table
            .row_of(id)
            .ok_or_else(|| Error::EntityMismatch(format!("{id} missing")))?;
        out.push(id.clone(), table.row(r))?;
    }
    Ok(out)
}

/// Correlation of follower positions computed with and without a cut on
/// the accounts' own follower counts, over the followers kept by both runs.
pub fn popularity_stability(
    params: &SyntheticModelParams,
    opts: &PipelineOptions,
    min_account_followers: u64,
) -> Result<StabilityReport> {
    let (net, truth) = generate_network(params)?;
    let full = run_pipeline(&net, &truth, &PipelineOptions { min_account_followers: None, ..opts.clone() })?;
    let cut = run_pipeline(
        &net,
        &truth,
        &PipelineOptions {
            min_account_followers: Some(min_account_followers),
            ..opts.clone()
        },
    )?;
    let shared: Vec<String> = cut
        .followers
        .ids()
        .iter()
        .filter(|id| full.followers.row_of(id).is_some())
        .cloned()
        .collect();
    embedding_stability(&subset(&full.followers, &shared)?, &subset(&cut.followers, &shared)?)
}
