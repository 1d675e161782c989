//! Shared inputs for the benchmarks.

use annular_dyn::annuli::{build_bn_sequence, ChainOptions};
use annular_dyn::{AnnuliChain, ExtLogReal, Profile};

/// Log-radii `0.5, 1.0, …, 6.0`.
pub fn t_grid() -> Vec<ExtLogReal> {
    (1..=12).map(|i| ExtLogReal::from_f64(0.5 * i as f64)).collect()
}

/// The five-entry chain for `e^z` from `t0 = 2`.
pub fn flagship_chain() -> AnnuliChain {
    build_bn_sequence(
        &annular_dyn::function::ExpFn,
        &ExtLogReal::from_f64(2.0),
        5,
        &Profile::desk_relaxed(),
        &ChainOptions::default(),
    )
    .expect("flagship chain")
}
