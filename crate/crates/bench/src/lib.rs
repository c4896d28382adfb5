//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use resfield::codec::FrequencyTable;
use resfield::field::{Aabb, FeatureGrid, MultiResBasis, ShadingNetwork};
use resfield::render::{Camera, Intrinsics};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Discretized Laplacian over `2 * half + 1` symbols centered on zero.
pub fn laplace_table(half: usize, scale: f64) -> FrequencyTable {
    let w: Vec<f64> = (0..=2 * half)
        .map(|s| (-(s as f64 - half as f64).abs() / scale).exp())
        .collect();
    FrequencyTable::from_weights(&w).expect("valid weights")
}

/// `n` symbols drawn from `table`'s distribution.
pub fn sample_symbols(table: &FrequencyTable, n: usize, seed: u64) -> Vec<u32> {
    use rand::Rng;
    let mut r = rng(seed);
    let total: u32 = table.counts().iter().sum();
    (0..n)
        .map(|_| table.find(r.gen_range(0..total)) as u32)
        .collect()
}

/// Randomly initialized grids and network at the default model size.
pub struct Model {
    pub basis: MultiResBasis,
    pub coeff: FeatureGrid,
    pub net: ShadingNetwork,
}

impl Model {
    pub fn new(basis_res: &[usize], channels: usize, coeff_res: usize, hidden: &[usize]) -> Self {
        let mut r = rng(7);
        let bounds = Aabb::cube(1.0);
        let shapes: Vec<_> = basis_res.iter().map(|&n| ([n; 3], channels)).collect();
        let basis = MultiResBasis::uniform(&shapes, bounds, 0.1, &mut r).expect("basis");
        let width = basis.total_channels();
        let coeff =
            FeatureGrid::uniform([coeff_res; 3], width, bounds, 0.1, &mut r).expect("coeff");
        let net = ShadingNetwork::new(width, hidden, 2, -2.0, &mut r).expect("network");
        Model { basis, coeff, net }
    }

    pub fn default_size() -> Self {
        Self::new(&[8, 12, 16, 24, 32, 48], 4, 48, &[64, 64])
    }
}

pub fn camera(size: u32) -> Camera {
    let f = 0.5 * size as f64 / (20f64.to_radians()).tan();
    let k = Intrinsics {
        fx: f,
        fy: f,
        cx: 0.5 * size as f64,
        cy: 0.5 * size as f64,
        width: size,
        height: size,
    };
    Camera::look_at(k, [2.0, 1.5, 1.8], [0.0; 3], [0.0, 0.0, 1.0]).expect("camera")
}
