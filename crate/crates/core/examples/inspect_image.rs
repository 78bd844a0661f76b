//! Write a labelled scene to CSV and ENVI, read both back, drop a few bands and
//! print the cached statistics.
//!
//!     cargo run --example inspect_image

use std::collections::BTreeSet;

use bandsel::hsi::EnviDtype;
use bandsel::synthetic::labelled_scene;
use bandsel::{load_image, BandStats, ImageFormat, StatsConfig};

fn main() -> bandsel::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let scene = labelled_scene(8, 4, 25, 3, 1)?.with_wavelengths((0..8).map(|b| 400.0 + 50.0 * b as f64).collect())?;

    let csv = dir.path().join("scene.csv");
    scene.write_csv(&csv)?;
    let from_csv = load_image(&csv, ImageFormat::Csv)?;

    let hdr = dir.path().join("scene.hdr");
    scene.write_envi(&hdr, 10, 10, EnviDtype::Float32)?;
    let from_envi = load_image(&hdr, ImageFormat::EnviBsq)?;
    println!(
        "csv: {} bands x {} pixels, labels {:?}",
        from_csv.bands(),
        from_csv.pixels(),
        from_csv.class_counts()
    );
    println!(
        "envi: {} bands, wavelengths {:?}",
        from_envi.bands(),
        from_envi.wavelengths().unwrap_or(&[])
    );

    let trimmed = from_csv.remove_bands(&BTreeSet::from([0, 5]))?;
    println!(
        "after dropping 0 and 5: original numbering {:?}",
        trimmed.remap().as_slice()
    );

    let stats = BandStats::compute(&trimmed, StatsConfig::default())?;
    for (b, h) in stats.entropies().iter().enumerate() {
        println!(
            "band {:>2} (orig {:>2}): H = {h:.4} bits",
            b,
            trimmed.remap().as_slice()[b]
        );
    }
    let summary = stats.summary().correlation_summary;
    println!(
        "off-diagonal correlation: min {:.3}, max {:.3}, mean {:.3}",
        summary.min, summary.max, summary.mean_offdiag
    );
    println!(
        "MIE of the first three bands: {:.4}",
        stats.mean_information_entropy(&[0, 1, 2])?
    );
    Ok(())
}
