use std::fs;

use bandsel::checkpoint::Checkpoint;
use bandsel::eval::{EvalOptions, EvalReport};
use bandsel::hsi::EnviDtype;
use bandsel::synthetic::{distinct_level_scene, labelled_scene};
use bandsel::{
    load_image, repeated_eval, train, BandStats, EnvConfig, Error, HyperspectralImage, ImageFormat, RewardScheme,
    SplitSpec, StatsConfig, TrainConfig,
};

#[test]
fn envi_round_trips_in_both_sample_types() {
    let dir = tempfile::tempdir().unwrap();
    let image = HyperspectralImage::from_bands(vec![vec![0.0, 1.0, 2.0, 65535.0, 7.0, 9.0], vec![3.0; 6]])
        .unwrap()
        .with_wavelengths(vec![450.5, 460.25])
        .unwrap();
    for dtype in [EnviDtype::Float32, EnviDtype::Uint16] {
        let hdr = dir.path().join(format!("{dtype:?}.hdr"));
        image.write_envi(&hdr, 2, 3, dtype).unwrap();
        for path in [hdr.clone(), hdr.with_extension("raw")] {
            let back = load_image(&path, ImageFormat::from_path(&path)).unwrap();
            assert_eq!(back.values(), image.values());
            assert_eq!(back.wavelengths(), Some(&[450.5, 460.25][..]));
        }
    }
    // float32 keeps what f32 can represent
    let fine = HyperspectralImage::from_bands(vec![vec![0.1, 1.0 / 3.0]]).unwrap();
    let hdr = dir.path().join("fine.hdr");
    fine.write_envi(&hdr, 1, 2, EnviDtype::Float32).unwrap();
    let back = load_image(&hdr, ImageFormat::EnviBsq).unwrap();
    assert_eq!(back.values(), &[0.1f32 as f64, (1.0f32 / 3.0) as f64]);
}

#[test]
fn envi_header_offset_and_byte_order() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = dir.path().join("off.hdr");
    let mut payload = vec![0xAAu8; 5];
    for v in [1.5f32, -2.0] {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.path().join("off.raw"), &payload).unwrap();
    let header =
        "ENVI\nsamples = 2\nlines = 1\nbands = 1\nheader offset = 5\ndata type = 4\ninterleave = bsq\nbyte order = 0\n";
    fs::write(&hdr, header).unwrap();
    assert_eq!(load_image(&hdr, ImageFormat::EnviBsq).unwrap().values(), &[1.5, -2.0]);

    fs::write(&hdr, header.replace("byte order = 0", "byte order = 1")).unwrap();
    assert!(load_image(&hdr, ImageFormat::EnviBsq).is_err());
    fs::write(&hdr, header.replace("interleave = bsq", "interleave = bip")).unwrap();
    assert!(matches!(
        load_image(&hdr, ImageFormat::EnviBsq),
        Err(Error::UnsupportedDtype(_) | Error::MalformedHeader(_))
    ));
}

#[test]
fn mismatched_label_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.csv");
    fs::write(&path, "1,2,3\n4,5,6\n").unwrap();
    fs::write(dir.path().join("img.labels.csv"), "1,2\n").unwrap();
    assert!(load_image(&path, ImageFormat::Csv).is_err());
}

#[test]
fn checkpoints_reload_to_the_same_policy() {
    let dir = tempfile::tempdir().unwrap();
    let image = distinct_level_scene(7, 200, 8).unwrap();
    let stats = BandStats::compute(&image, StatsConfig::default()).unwrap();
    let env = EnvConfig {
        k: 3,
        reward_scheme: RewardScheme::Correlation,
    };
    let cfg = TrainConfig {
        max_episodes: 60,
        batch_size: 20,
        ..TrainConfig::default()
    };
    let policy = train(&stats, env, cfg).unwrap();
    let ckpt = Checkpoint::from_policy(&policy, (10..17).collect(), stats.clone(), "00ff".into()).unwrap();
    for name in ["p.bin", "p.json"] {
        let path = dir.path().join(name);
        ckpt.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.policy().select_bands(3).unwrap(), policy.select_bands(3).unwrap());
        assert_eq!(back.episodes(), 60);
        assert_eq!(back.stats, stats);
    }
    let garbage = dir.path().join("garbage.bin");
    fs::write(&garbage, b"BANDSQN\0\x63\0\0\0").unwrap();
    assert!(matches!(Checkpoint::load(&garbage), Err(Error::Checkpoint(_))));
}

#[test]
fn separable_scene_classifies_perfectly() {
    // class c sits near 10c on band 2 with jitter below 1, so band 2 alone separates them
    let image = labelled_scene(5, 4, 30, 2, 11).unwrap();
    let clean = repeated_eval(&image, &[2], &SplitSpec::default(), 10, &EvalOptions::default()).unwrap();
    assert_eq!((clean.oa_mean, clean.oa_std), (1.0, 0.0));
    assert_eq!((clean.kappa_mean, clean.kappa_std), (1.0, 0.0));
    for run in &clean.per_run {
        let total: usize = run.confusion.iter().flatten().sum();
        assert_eq!(total, run.test_size);
    }
}

#[test]
fn evaluation_reports_are_reproducible_and_parse_back() {
    let image = labelled_scene(6, 3, 40, 1, 2).unwrap();
    let spec = SplitSpec {
        seed: 4,
        ..SplitSpec::default()
    };
    let one = repeated_eval(&image, &[0, 1, 3], &spec, 1, &EvalOptions::default()).unwrap();
    assert_eq!((one.oa_std, one.aa_std, one.kappa_std), (0.0, 0.0, 0.0));

    let serial = repeated_eval(&image, &[0, 1, 3], &spec, 7, &EvalOptions::default()).unwrap();
    let threaded = repeated_eval(
        &image,
        &[0, 1, 3],
        &spec,
        7,
        &EvalOptions {
            threads: 3,
            ..EvalOptions::default()
        },
    )
    .unwrap();
    assert_eq!(serial, threaded);
    let seeds: Vec<u64> = serial.per_run.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, (4..11).collect::<Vec<_>>());

    let json = serde_json::to_string(&serial).unwrap();
    assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), serial);
    let csv = serial.per_run_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("run,seed,oa,aa,kappa"));
    for (i, line) in lines.enumerate() {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0], i as f64);
        assert_eq!(cells[2], serial.per_run[i].oa);
    }
}
