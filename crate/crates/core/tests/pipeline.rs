//! End-to-end runs on synthetic scenes: images and tags in, accuracy out.

use tagparse_core::dataset::{inject_tag_noise, synth_dataset, SyntheticSpec};
use tagparse_core::eval::parse_and_evaluate;
use tagparse_core::graph::{BandwidthRule, EigMethod};
use tagparse_core::pipeline::{
    build_scene_model, initial_labels, parse_with_lgc, parse_with_wssl, SceneConfig,
};
use tagparse_core::solver::SolverParams;

/// The benchmark configuration: slivers below 2% of the image are merged so
/// striped categories form one appearance cluster each, and the basis is wide
/// enough to cover every well-separated cluster.
fn bench_scene_config(seed: u64) -> SceneConfig {
    SceneConfig {
        gmm_components: 10,
        gmm_max_iter: 60,
        gmm_tol: 1e-6,
        min_region_frac: 0.02,
        knn: 28,
        basis_size: 22,
        bandwidth: BandwidthRule::MedianKnn,
        eig: EigMethod::Auto,
        seed,
    }
}

#[test]
fn zero_noise_parse_is_accurate_and_beats_baseline_under_noise() {
    let spec = SyntheticSpec::standard(60, 6, 64, 64, 1);
    let scenes = synth_dataset(&spec).unwrap();
    let model = build_scene_model(&scenes.images, &bench_scene_config(1)).unwrap();

    let alpha = 0.05;
    let params = SolverParams::default();

    for percent in [0.0, 50.0, 100.0] {
        let tags = inject_tag_noise(&scenes.tags, percent, 99).unwrap();
        let ybar = initial_labels(&model.regions, &tags, alpha).unwrap();
        let (scores, report) = parse_with_wssl(&model, &ybar, &params).unwrap();
        let wssl = parse_and_evaluate(&scores, &model.region_maps, &scenes.ground_truth).unwrap();
        let lgc_scores = parse_with_lgc(&model, &ybar, alpha).unwrap();
        let lgc =
            parse_and_evaluate(&lgc_scores, &model.region_maps, &scenes.ground_truth).unwrap();
        eprintln!(
            "noise {percent:5.1}%: wssl {:.2} (iters {}), lgc {:.2}, zero rows {}",
            wssl.accuracy.average, report.iterations, lgc.accuracy.average, wssl.zero_rows
        );
        if percent == 0.0 {
            assert!(
                wssl.accuracy.average >= 90.0,
                "zero-noise accuracy too low: {:.2}",
                wssl.accuracy.average
            );
        }
        assert!(
            wssl.accuracy.average >= lgc.accuracy.average,
            "baseline won at {percent}% noise: wssl {:.2} < lgc {:.2}",
            wssl.accuracy.average,
            lgc.accuracy.average
        );
    }
}

#[test]
fn pipeline_is_deterministic() {
    let spec = SyntheticSpec::standard(6, 3, 32, 32, 4);
    let scenes = synth_dataset(&spec).unwrap();
    let cfg = SceneConfig {
        min_region_frac: 0.005,
        knn: 8,
        basis_size: 8,
        ..bench_scene_config(4)
    };
    let run = || {
        let model = build_scene_model(&scenes.images, &cfg).unwrap();
        let init = initial_labels(&model.regions, &scenes.tags, 0.05).unwrap();
        let (scores, _) = parse_with_wssl(&model, &init, &SolverParams::default()).unwrap();
        parse_and_evaluate(&scores, &model.region_maps, &scenes.ground_truth).unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
}

#[test]
fn concurrent_model_builds_are_bit_identical() {
    let spec = SyntheticSpec::standard(6, 3, 32, 32, 21);
    let scenes = synth_dataset(&spec).unwrap();
    let cfg = SceneConfig {
        min_region_frac: 0.005,
        knn: 8,
        basis_size: 8,
        ..bench_scene_config(21)
    };
    let (a, b) = std::thread::scope(|s| {
        let ha = s.spawn(|| build_scene_model(&scenes.images, &cfg).unwrap());
        let hb = s.spawn(|| build_scene_model(&scenes.images, &cfg).unwrap());
        (ha.join().unwrap(), hb.join().unwrap())
    });
    for (i, map) in a.region_maps.iter().enumerate() {
        assert_eq!(map.labels(), b.region_maps[i].labels(), "image {i}");
    }
    for r in 0..a.regions.len() {
        assert_eq!(a.regions.feature(r), b.regions.feature(r), "region {r}");
    }
    assert_eq!(a.basis.vectors(), b.basis.vectors());
    assert_eq!(a.basis.values(), b.basis.values());
}
