//! Every non-learning selector next to the exhaustive oracle, for both
//! objectives.
//!
//!     cargo run --example oracle_comparison

use bandsel::baselines::ObjectiveKind;
use bandsel::synthetic::correlated_scene;
use bandsel::{exhaustive_best, greedy_select, random_subset, rank_by_entropy, BandStats, Objective, StatsConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bandsel::Result<()> {
    let image = correlated_scene(14, 800, 5, 0.4, 9)?;
    let stats = BandStats::compute(&image, StatsConfig::default())?;
    let k = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    for kind in [ObjectiveKind::MaxMie, ObjectiveKind::MinCorr] {
        let objective = Objective { kind, stats: &stats };
        println!("objective {kind:?}");
        let candidates = [
            ("entropy_rank", rank_by_entropy(&stats, k)?),
            ("greedy", greedy_select(objective, k)?),
            ("random", random_subset(stats.bands(), k, &mut rng)?),
            ("exhaustive", exhaustive_best(objective, k)?.0),
        ];
        for (name, subset) in candidates {
            println!(
                "  {name:<13} {:<20} score {:.5}",
                format!("{subset:?}"),
                objective.score(&subset)?
            );
        }
    }
    Ok(())
}
