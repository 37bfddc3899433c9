//! Seeded inputs shared by the benchmarks.

use polispace_core::synth::{generate_network, SyntheticModelParams};
use polispace_core::BipartiteNetwork;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hexagon fixture network scaled to `n_followers` × `n_elites`.
pub fn hexagon_network(n_followers: usize, n_elites: usize, seed: u64) -> BipartiteNetwork {
    let params = SyntheticModelParams {
        n_followers,
        n_elites,
        ..SyntheticModelParams::hexagon(seed)
    };
    generate_network(&params).expect("valid fixture").0
}

/// Sorted sample from a two-component uniform mixture.
pub fn bimodal_sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n)
        .map(|i| rng.random_range(-1.0..1.0) + if i % 3 == 0 { 4.0 } else { 0.0 })
        .collect();
    x.sort_by(f64::total_cmp);
    x
}

/// Positions with overlapping classes; `true` marks the shifted class.
pub fn labeled_positions(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let y = rng.random::<bool>();
            (rng.random_range(0.0..4.0) + if y { 2.0 } else { 0.0 }, y)
        })
        .unzip()
}
