//! Tolerances and workload sizes for the acceptance suite in `tests/acceptance.rs`.

/// Sampling parameters used wherever a criterion says "defaults".
pub const NU: f64 = 0.1;
pub const MU: f64 = 0.1;

pub mod spectral {
    pub const SIZES: [usize; 4] = [100, 200, 400, 800];
    pub const SEEDS_PER_SIZE: u64 = 10;
    /// Largest allowed spread `c2/c1` of `n(1 - λ2)` across sizes.
    pub const MAX_BAND_RATIO: f64 = 3.0;

    pub const UNIFORM_SIZES: [usize; 3] = [2, 10, 100];
    pub const UNIFORM_TOL: f64 = 1e-9;

    pub const WEYL_N: usize = 200;
    pub const WEYL_INSTANCES: u64 = 50;
}

pub mod routing {
    pub const SMALL_N: usize = 250;
    pub const LARGE_N: usize = 1000;
    pub const PAIRS: usize = 10_000;
    pub const GROWTH_BAND: (f64, f64) = (1.4, 2.3);
    pub const MIN_WITHIN_BOUND: f64 = 0.99;
    pub const MAX_DEAD_END_RATE: f64 = 0.01;
}

pub mod sampling {
    pub const N: usize = 500;
    pub const INSTANCES: u64 = 10;
    pub const MEAN_Q_ROUNDS: usize = 100_000;
    pub const MEAN_Q_TOL: f64 = 0.10;
    pub const MAX_Q_ROUNDS: u64 = 10_000;
    pub const MAX_Q_META_TRIALS: usize = 100;
    pub const MAX_Q_EPSILON: f64 = 0.1;
    pub const MAX_Q_MIN_FRACTION: f64 = 0.95;
    /// Cell-area threshold `τ = c/n` for the large-cell fraction check.
    pub const LARGE_CELL_C: f64 = 1.0 / 16.0;
}

pub mod conservation {
    pub const N: usize = 200;
    pub const TICKS: u64 = 1_000_000;
    pub const MAX_RELATIVE_DRIFT: f64 = 1e-9;
}

pub mod cost {
    pub const SIZES: [usize; 3] = [200, 500, 1000];
    pub const TRIALS: usize = 30;
    pub const EPSILON: f64 = 0.01;
    pub const MIN_RATIO_GROWTH: f64 = 1.3;
}

pub mod prediction {
    pub const N: usize = 100;
    pub const EPSILON: f64 = 0.01;
    pub const TRIALS: usize = 100;
    pub const BAND: f64 = 0.5;
}
