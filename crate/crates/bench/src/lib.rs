//! Shared scenario builders for the benchmarks.

use ergocap::channel::{build_channel_stats, five_cluster_scenario, ChannelStats};

/// Four-antenna statistics over the first `paths` clusters of the reference
/// scenario.
pub fn demo_stats(paths: usize, sigma2: f64) -> ChannelStats {
    let specs: Vec<_> = five_cluster_scenario().into_iter().take(paths).collect();
    build_channel_stats(&specs, 4, 4, sigma2, 0.5).expect("reference scenario is valid")
}
