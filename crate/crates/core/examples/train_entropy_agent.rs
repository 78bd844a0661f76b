//! Train the Q-network agent with entropy rewards and check its greedy
//! selection against the top-K entropy ranking, which is the return-optimal set.
//!
//!     cargo run --release --example train_entropy_agent

use std::collections::BTreeSet;

use bandsel::synthetic::distinct_level_scene;
use bandsel::{rank_by_entropy, train_with, BandStats, EnvConfig, RewardScheme, StatsConfig, TrainConfig};

fn main() -> bandsel::Result<()> {
    let image = distinct_level_scene(16, 2000, 100)?;
    let stats = BandStats::compute(&image, StatsConfig::default())?;
    let env = EnvConfig {
        k: 4,
        reward_scheme: RewardScheme::Entropy,
    };

    let policy = train_with(&stats, env, TrainConfig::default(), |rec| {
        if rec.episode % 250 == 0 {
            println!(
                "episode {:>4}  eps {:.3}  return {:.4}  loss {:?}",
                rec.episode, rec.epsilon, rec.episode_return, rec.loss
            );
        }
    })?;

    let chosen = policy.select_bands(4)?;
    let top = rank_by_entropy(&stats, 4)?;
    println!(
        "agent picks {chosen:?} (MIE {:.4})",
        stats.mean_information_entropy(&chosen)?
    );
    println!(
        "top-4 by entropy {top:?} (MIE {:.4})",
        stats.mean_information_entropy(&top)?
    );
    let same = chosen.iter().collect::<BTreeSet<_>>() == top.iter().collect::<BTreeSet<_>>();
    println!(
        "same set: {same}; {} episodes in {:.1}s",
        policy.episodes(),
        policy.elapsed_secs
    );
    Ok(())
}
