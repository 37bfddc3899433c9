//! Correspondence analysis of the follower → elite adjacency.

mod cache;
pub mod lanczos;
mod operator;

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use cache::{read_embedding, write_embedding, EMBEDDING_MAGIC, EMBEDDING_VERSION};
pub use lanczos::{truncated_svd, LinearOperator, SvdOptions, TruncatedSvd};
pub use operator::ResidualOperator;

use crate::calibrate::PositionTable;
use crate::error::{Error, Result};
use crate::model::BipartiteNetwork;
use crate::stats::pearson;

/// Whether coordinates are scaled by the singular values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateKind {
    /// `D^{-1/2} U Σ` on both sides (symmetric map).
    #[default]
    Principal,
    /// `D^{-1/2} U`
    Standard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaConfig {
    pub k_dims: usize,
    pub solver_tolerance: f64,
    /// Maximum number of thick restarts.
    pub max_iterations: usize,
    pub seed: u64,
    pub coordinate_kind: CoordinateKind,
    pub work_dim: Option<usize>,
}

impl Default for CaConfig {
    fn default() -> Self {
        Self {
            k_dims: 12,
            solver_tolerance: 1e-10,
            max_iterations: 1000,
            seed: 0,
            coordinate_kind: CoordinateKind::Principal,
            work_dim: None,
        }
    }
}

/// Latent coordinates of every follower and elite.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentEmbedding {
    pub follower_ids: Vec<String>,
    pub elite_ids: Vec<String>,
    /// `N × K`
    pub follower_coords: DMatrix<f64>,
    /// `M × K`
    pub elite_coords: DMatrix<f64>,
    /// Nonincreasing, within (0, 1].
    pub singular_values: Vec<f64>,
    pub coordinate_kind: CoordinateKind,
}

impl LatentEmbedding {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    pub fn elite_index(&self) -> HashMap<&str, usize> {
        self.elite_ids
            .iter()
            .enumerate()
            .map(|(j, id)| (id.as_str(), j))
            .collect()
    }
}

/// Runs correspondence analysis on a filtered network.
///
/// Returns the top `k_dims` nontrivial dimensions. Each dimension is
/// oriented so that the largest-magnitude entry of the elite singular vector
/// is positive.
pub fn correspondence_analysis(net: &BipartiteNetwork, cfg: &CaConfig) -> Result<LatentEmbedding> {
    let (n, m) = (net.n_followers(), net.n_elites());
    let max_k = n.min(m).saturating_sub(1);
    if cfg.k_dims == 0 || cfg.k_dims > max_k {
        return Err(Error::InvalidArgument(format!(
            "k_dims = {} outside 1..={max_k} for a {n}x{m} network",
            cfg.k_dims
        )));
    }
    if !(cfg.solver_tolerance > 0.0) {
        return Err(Error::InvalidArgument("solver_tolerance must be positive".into()));
    }
    let op = ResidualOperator::new(net)?;
    let svd = truncated_svd(
        &op,
        &SvdOptions {
            k: cfg.k_dims,
            tolerance: cfg.solver_tolerance,
            max_restarts: cfg.max_iterations,
            work_dim: cfg.work_dim,
            seed: cfg.seed,
        },
    )?;
    log::info!(
        "correspondence analysis: {} dims after {} restarts (residual {:.2e})",
        cfg.k_dims,
        svd.restarts,
        svd.residual
    );

    let sigma0 = svd.singular_values[0];
    let rank = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > 1e-8 * sigma0.max(f64::MIN_POSITIVE) && s > 1e-12)
        .count();
    if rank < cfg.k_dims {
        return Err(Error::RankDeficient {
            requested: cfg.k_dims,
            rank,
        });
    }

    let TruncatedSvd {
        mut u,
        singular_values,
        mut v,
        ..
    } = svd;
    for d in 0..cfg.k_dims {
        let lead = v
            .column(d)
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, &x)| {
                if x.abs() > best.1.abs() {
                    (i, x)
                } else {
                    best
                }
            });
        if lead.1 < 0.0 {
            u.column_mut(d).neg_mut();
            v.column_mut(d).neg_mut();
        }
    }

    let scale_for = |d: usize| match cfg.coordinate_kind {
        CoordinateKind::Principal => singular_values[d],
        CoordinateKind::Standard => 1.0,
    };
    let rows = op.row_masses();
    let cols = op.col_masses();
    let follower_coords =
        DMatrix::from_fn(n, cfg.k_dims, |i, d| u[(i, d)] * scale_for(d) / rows[i].sqrt());
    let elite_coords =
        DMatrix::from_fn(m, cfg.k_dims, |j, d| v[(j, d)] * scale_for(d) / cols[j].sqrt());

    Ok(LatentEmbedding {
        follower_ids: net.follower_ids().to_vec(),
        elite_ids: net.elite_ids().to_vec(),
        follower_coords,
        elite_coords,
        singular_values,
        coordinate_kind: cfg.coordinate_kind,
    })
}

/// Mean row of `rows` per label. Every id must have a label.
pub fn group_means(
    ids: &[String],
    rows: &DMatrix<f64>,
    label_of: &HashMap<String, String>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let k = rows.ncols();
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let label = label_of
            .get(id)
            .ok_or_else(|| Error::UnknownEntity(format!("{id} has no party label")))?;
        let entry = sums
            .entry(label.clone())
            .or_insert_with(|| (vec![0.0; k], 0));
        for d in 0..k {
            entry.0[d] += rows[(i, d)];
        }
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(label, (sum, count))| {
            (label, sum.into_iter().map(|s| s / count as f64).collect())
        })
        .collect())
}

/// Latent centroid of each party's elites.
pub fn party_centroids(
    embedding: &LatentEmbedding,
    elite_party: &HashMap<String, String>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    group_means(&embedding.elite_ids, &embedding.elite_coords, elite_party)
}

/// Number of embedded elites per party.
pub fn party_sizes(
    embedding: &LatentEmbedding,
    elite_party: &HashMap<String, String>,
) -> BTreeMap<String, usize> {
    let mut sizes = BTreeMap::new();
    for id in &embedding.elite_ids {
        if let Some(p) = elite_party.get(id) {
            *sizes.entry(p.clone()).or_insert(0) += 1;
        }
    }
    sizes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub per_dimension: Vec<(String, f64)>,
    pub mean: f64,
}

/// Per-dimension Pearson correlation between two position tables over the
/// same entities and dimensions.
pub fn embedding_stability(a: &PositionTable, b: &PositionTable) -> Result<StabilityReport> {
    if a.columns() != b.columns() {
        return Err(Error::EntityMismatch("dimension lists differ".into()));
    }
    if a.len() != b.len() {
        return Err(Error::EntityMismatch(format!(
            "{} vs {} entities",
            a.len(),
            b.len()
        )));
    }
    let b_rows: Vec<usize> = a
        .ids()
        .iter()
        .map(|id| {
            b.row_of(id)
                .ok_or_else(|| Error::EntityMismatch(format!("{id} missing from second table")))
        })
        .collect::<Result<_>>()?;
    let mut per_dimension = Vec::with_capacity(a.columns().len());
    for (d, name) in a.columns().iter().enumerate() {
        let xa: Vec<f64> = (0..a.len()).map(|i| a.value(i, d)).collect();
        let xb: Vec<f64> = b_rows.iter().map(|&i| b.value(i, d)).collect();
        per_dimension.push((name.clone(), pearson(&xa, &xb)?));
    }
    let mean = per_dimension.iter().map(|(_, r)| r).sum::<f64>() / per_dimension.len() as f64;
    Ok(StabilityReport {
        per_dimension,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_network() -> BipartiteNetwork {
        // followers 0..5 follow elites 0,1; followers 5..10 follow elites 2,3
        let mut edges = Vec::new();
        for i in 0..10u32 {
            let base = if i < 5 { 0 } else { 2 };
            edges.push((i, base));
            edges.push((i, base + 1));
        }
        BipartiteNetwork::from_parts(
            (0..10).map(|i| format!("f{i}")).collect(),
            (0..4).map(|j| format!("e{j}")).collect(),
            edges,
        )
        .unwrap()
    }

    #[test]
    fn first_dimension_separates_disconnected_blocks() {
        let cfg = CaConfig {
            k_dims: 1,
            ..CaConfig::default()
        };
        let emb = correspondence_analysis(&block_network(), &cfg).unwrap();
        assert!((emb.singular_values[0] - 1.0).abs() < 1e-10);
        let f = emb.follower_coords.column(0);
        let e = emb.elite_coords.column(0);
        for i in 1..5 {
            assert!((f[i] - f[0]).abs() < 1e-10);
            assert!((f[i + 5] - f[5]).abs() < 1e-10);
        }
        assert!(f[0] * f[5] < 0.0);
        assert!((e[0] - e[1]).abs() < 1e-10 && (e[2] - e[3]).abs() < 1e-10);
        assert!(e[0] * e[2] < 0.0);
    }

    #[test]
    fn rank_shortfall_is_an_error() {
        // the block network's residual has rank one
        let cfg = CaConfig {
            k_dims: 2,
            ..CaConfig::default()
        };
        match correspondence_analysis(&block_network(), &cfg) {
            Err(Error::RankDeficient { requested: 2, rank: 1 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_bounds_checked() {
        let cfg = CaConfig {
            k_dims: 4,
            ..CaConfig::default()
        };
        assert!(correspondence_analysis(&block_network(), &cfg).is_err());
    }

    fn embedding_with(elites: DMatrix<f64>) -> LatentEmbedding {
        let m = elites.nrows();
        let k = elites.ncols();
        LatentEmbedding {
            follower_ids: vec![],
            elite_ids: (0..m).map(|j| format!("e{j}")).collect(),
            follower_coords: DMatrix::zeros(0, k),
            elite_coords: elites,
            singular_values: vec![0.5; k],
            coordinate_kind: CoordinateKind::Principal,
        }
    }

    #[test]
    fn centroid_examples() {
        let emb = embedding_with(DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, -4.0, -3.0, 4.0]));
        let parties: HashMap<String, String> = [("e0", "solo"), ("e1", "pair"), ("e2", "pair")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let c = party_centroids(&emb, &parties).unwrap();
        assert_eq!(c["solo"], vec![1.0, 2.0]);
        assert_eq!(c["pair"], vec![0.0, 0.0]);
        let sizes = party_sizes(&emb, &parties);
        assert_eq!(sizes["pair"], 2);
    }

    #[test]
    fn unlabeled_elite_is_an_error() {
        let emb = embedding_with(DMatrix::from_row_slice(1, 1, &[1.0]));
        assert!(party_centroids(&emb, &HashMap::new()).is_err());
    }
}
