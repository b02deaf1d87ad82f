//! Fixtures shared by the benchmarks.

use layerwise::shallow::FitConfig;
use layerwise::{make_grid, Activation, Grid, ShallowNet};

/// A deterministic net with `units` units on `n` inputs.
pub fn fixed_net(n: usize, units: usize, activation: Activation) -> ShallowNet {
    let params: Vec<f64> = (0..(n + 2) * units)
        .map(|i| ((i as f64) * 0.618_033_988_75).fract() * 2.0 - 1.0)
        .collect();
    ShallowNet::from_params(n, units, activation, &params).expect("consistent parameter count")
}

pub fn grid(n: usize, p: usize) -> Grid {
    make_grid(n, p).expect("small grid")
}

/// Short training runs so a single iteration stays in the millisecond range.
pub fn quick_fit(seed: u64) -> FitConfig {
    FitConfig {
        seed,
        restarts: 1,
        iterations: 200,
        ..FitConfig::default()
    }
}
