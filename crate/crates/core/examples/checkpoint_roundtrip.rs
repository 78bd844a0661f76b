//! Save a trained policy in both checkpoint encodings, load it back and show
//! that the reloaded policy selects the same bands.
//!
//!     cargo run --release --example checkpoint_roundtrip

use bandsel::checkpoint::Checkpoint;
use bandsel::synthetic::distinct_level_scene;
use bandsel::{train, BandStats, EnvConfig, RewardScheme, StatsConfig, TrainConfig};

fn main() -> bandsel::Result<()> {
    let image = distinct_level_scene(10, 500, 4)?;
    let stats = BandStats::compute(&image, StatsConfig::default())?;
    let env = EnvConfig {
        k: 3,
        reward_scheme: RewardScheme::Entropy,
    };
    let cfg = TrainConfig {
        max_episodes: 200,
        ..TrainConfig::default()
    };
    let policy = train(&stats, env, cfg)?;
    let ckpt = Checkpoint::from_policy(&policy, image.remap().as_slice().to_vec(), stats, String::new())?;

    let dir = tempfile::tempdir().expect("temp dir");
    for name in ["policy.bin", "policy.json"] {
        let path = dir.path().join(name);
        ckpt.save(&path)?;
        let back = Checkpoint::load(&path)?;
        let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        println!(
            "{name}: {size} bytes, identical = {}, selects {:?}",
            back == ckpt,
            back.policy().select_bands(3)?
        );
    }
    println!("original policy selects {:?}", policy.select_bands(3)?);
    Ok(())
}
