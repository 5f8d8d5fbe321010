//! Shared inputs for the benchmarks.

use multimatch_core::datagen::{generate_market, Market, MarketSpec};

/// Market shapes the benchmarks sweep, as (candidates, employers).
pub const SHAPES: [(usize, usize); 5] = [(10, 100), (50, 100), (100, 100), (110, 100), (150, 100)];

/// Round cap used for timing.
pub const ROUNDS: usize = 10;

pub fn markets(seed: u64) -> Vec<Market> {
    SHAPES.iter().map(|&(n, m)| generate_market(MarketSpec::new(n, m, seed)).expect("bench shapes are valid")).collect()
}
