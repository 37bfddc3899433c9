use rayon::prelude::*;

use super::lanczos::LinearOperator;
use crate::error::{Error, Result};
use crate::model::BipartiteNetwork;

const ROW_BLOCK: usize = 2048;

/// Standardized residual `S = D_r^{-1/2} (P − r cᵀ) D_c^{-1/2}` of a binary
/// adjacency, with `P = A / n` and `r`, `c` the row and column masses.
///
/// `S` is never formed: a product is one sparse pass over the adjacency
/// followed by a rank-one correction.
pub struct ResidualOperator {
    total: f64,
    row_offsets: Vec<usize>,
    row_indices: Vec<u32>,
    col_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    row_mass: Vec<f64>,
    col_mass: Vec<f64>,
    sqrt_row: Vec<f64>,
    sqrt_col: Vec<f64>,
}

impl ResidualOperator {
    pub fn new(net: &BipartiteNetwork) -> Result<Self> {
        if net.edge_count() == 0 {
            return Err(Error::Empty("network has no edges"));
        }
        let (row_offsets, row_indices) = net.row_adjacency();
        let (col_offsets, col_indices) = net.col_adjacency();
        let total = net.edge_count() as f64;
        let masses = |offsets: &[usize]| -> Vec<f64> {
            offsets.windows(2).map(|w| (w[1] - w[0]) as f64 / total).collect()
        };
        let row_mass = masses(&row_offsets);
        let col_mass = masses(&col_offsets);
        if let Some(i) = row_mass.iter().position(|&r| r == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "follower {} has no edges",
                net.follower_ids()[i]
            )));
        }
        if let Some(j) = col_mass.iter().position(|&c| c == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "elite {} has no edges",
                net.elite_ids()[j]
            )));
        }
        Ok(Self {
            total,
            sqrt_row: row_mass.iter().map(|r| r.sqrt()).collect(),
            sqrt_col: col_mass.iter().map(|c| c.sqrt()).collect(),
            row_offsets,
            row_indices,
            col_offsets,
            col_indices,
            row_mass,
            col_mass,
        })
    }

    pub fn row_masses(&self) -> &[f64] {
        &self.row_mass
    }

    pub fn col_masses(&self) -> &[f64] {
        &self.col_mass
    }

    fn product(
        &self,
        offsets: &[usize],
        indices: &[u32],
        sqrt_out: &[f64],
        sqrt_in: &[f64],
        x: &[f64],
        y: &mut [f64],
    ) {
        let scaled: Vec<f64> = x.iter().zip(sqrt_in).map(|(v, s)| v / s).collect();
        let shift: f64 = x.iter().zip(sqrt_in).map(|(v, s)| v * s).sum();
        let inv_total = 1.0 / self.total;
        y.par_chunks_mut(ROW_BLOCK)
            .enumerate()
            .for_each(|(block, out)| {
                let base = block * ROW_BLOCK;
                for (k, yi) in out.iter_mut().enumerate() {
                    let i = base + k;
                    let acc: f64 = indices[offsets[i]..offsets[i + 1]]
                        .iter()
                        .map(|&j| scaled[j as usize])
                        .sum();
                    *yi = acc * inv_total / sqrt_out[i] - sqrt_out[i] * shift;
                }
            });
    }
}

impl LinearOperator for ResidualOperator {
    fn nrows(&self) -> usize {
        self.row_mass.len()
    }

    fn ncols(&self) -> usize {
        self.col_mass.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.product(
            &self.row_offsets,
            &self.row_indices,
            &self.sqrt_row,
            &self.sqrt_col,
            x,
            y,
        );
    }

    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.product(
            &self.col_offsets,
            &self.col_indices,
            &self.sqrt_col,
            &self.sqrt_row,
            x,
            y,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64, n: usize, m: usize) -> BipartiteNetwork {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i as u32, rng.random_range(0..m) as u32));
            for j in 0..m {
                if rng.random::<f64>() < 0.3 {
                    edges.push((i as u32, j as u32));
                }
            }
        }
        for j in 0..m {
            edges.push((rng.random_range(0..n) as u32, j as u32));
        }
        BipartiteNetwork::from_parts(
            (0..n).map(|i| i.to_string()).collect(),
            (0..m).map(|j| j.to_string()).collect(),
            edges,
        )
        .unwrap()
    }

    fn explicit(net: &BipartiteNetwork) -> DMatrix<f64> {
        let (n, m) = (net.n_followers(), net.n_elites());
        let mut a = DMatrix::zeros(n, m);
        for &(i, j) in net.edges() {
            a[(i as usize, j as usize)] = 1.0;
        }
        let p = a / net.edge_count() as f64;
        let r: Vec<f64> = (0..n).map(|i| p.row(i).sum()).collect();
        let c: Vec<f64> = (0..m).map(|j| p.column(j).sum()).collect();
        DMatrix::from_fn(n, m, |i, j| (p[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt())
    }

    #[test]
    fn masses_are_probability_vectors() {
        let op = ResidualOperator::new(&random_net(1, 40, 12)).unwrap();
        assert!((op.row_masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((op.col_masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn products_match_explicit_matrix() {
        let net = random_net(2, 5000, 17);
        let s = explicit(&net);
        let op = ResidualOperator::new(&net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..17).map(|_| rng.random::<f64>() - 0.5).collect();
        let xt: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut y = vec![0.0; 5000];
        let mut yt = vec![0.0; 17];
        op.apply(&x, &mut y);
        op.apply_transpose(&xt, &mut yt);
        let want = &s * nalgebra::DVector::from_vec(x);
        let want_t = s.transpose() * nalgebra::DVector::from_vec(xt);
        for i in 0..5000 {
            assert!((y[i] - want[i]).abs() < 1e-12);
        }
        for j in 0..17 {
            assert!((yt[j] - want_t[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_direction_is_annihilated() {
        let op = ResidualOperator::new(&random_net(4, 30, 9)).unwrap();
        let x: Vec<f64> = op.col_masses().iter().map(|c| c.sqrt()).collect();
        let mut y = vec![0.0; 30];
        op.apply(&x, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn isolated_rows_rejected() {
        let net = BipartiteNetwork::from_parts(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            vec![(0, 0)],
        )
        .unwrap();
        assert!(ResidualOperator::new(&net).is_err());
    }
}
