//! Shared fixtures for the benchmarks.

use ran_topo_core::pipeline::PreparedData;
use ran_topo_core::synth::{generate, SynthConfig};
use ran_topo_core::{RanGraph, SplitRatios};

/// The default synthetic network (300 sites, about 1500 cells).
pub fn default_network() -> RanGraph {
    generate(&SynthConfig::default()).expect("default synth config is valid").graph
}

/// A network with `sites` sites and otherwise default settings.
pub fn network(sites: usize) -> RanGraph {
    let cfg = SynthConfig {
        sites,
        ..SynthConfig::default()
    };
    generate(&cfg).expect("valid synth config").graph
}

/// Split and normalized data with the default ratios.
pub fn prepared(graph: RanGraph) -> PreparedData {
    PreparedData::new(graph, SplitRatios::DEFAULT, 1).expect("split succeeds")
}

/// `n` scored pairs with a few ties, alternating labels.
pub fn scored_pairs(n: usize) -> Vec<(f64, bool)> {
    (0..n).map(|i| (((i * 7919) % 1000) as f64 / 1000.0, i % 3 == 0)).collect()
}
