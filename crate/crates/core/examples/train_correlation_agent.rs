//! Correlation rewards: the agent learns to avoid redundant bands. Its subset
//! is compared with the exact minimum-correlation subset.
//!
//!     cargo run --release --example train_correlation_agent

use bandsel::synthetic::correlated_scene;
use bandsel::{exhaustive_best, train, BandStats, EnvConfig, Objective, RewardScheme, StatsConfig, TrainConfig};

fn main() -> bandsel::Result<()> {
    let image = correlated_scene(12, 1000, 4, 0.5, 200)?;
    let stats = BandStats::compute(&image, StatsConfig::default())?;
    let env = EnvConfig {
        k: 4,
        reward_scheme: RewardScheme::Correlation,
    };
    let policy = train(&stats, env, TrainConfig::default())?;
    let chosen = policy.select_bands(4)?;
    let (best, best_corr) = exhaustive_best(Objective::min_corr(&stats), 4)?;

    println!("agent:      {chosen:?} Corr = {:.4}", stats.mean_correlation(&chosen)?);
    println!("exhaustive: {best:?} Corr = {best_corr:.4}");
    Ok(())
}
