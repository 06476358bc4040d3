use geopin_core::camera::{camera_ray_to_rig, intersect_ground};
use geopin_core::pipeline::evaluate;
use geopin_core::synth::{generate, monte_carlo, presets, NoiseSpec, ScenarioSpec};
use geopin_core::sync::PoseMode;

fn max_error(spec: &ScenarioSpec) -> f64 {
    let report = evaluate(&generate(spec).unwrap().session).unwrap();
    assert!(report.failures.is_empty());
    report.rows.iter().map(|r| r.error_m.unwrap()).fold(0.0, f64::max)
}

#[test]
fn noiseless_scenes_invert_to_the_centimetre() {
    for spec in [
        presets::stationary_markers(NoiseSpec::default(), 1),
        presets::approach_pass(NoiseSpec::default(), 1),
        presets::drive_by(30.0, NoiseSpec::default(), PoseMode::Interpolate, 1),
    ] {
        let worst = max_error(&spec);
        assert!(worst < 0.01, "worst {worst} m");
    }
}

#[test]
fn fix_and_frame_counts() {
    let s = generate(&presets::stationary_markers(NoiseSpec::default(), 1)).unwrap();
    assert_eq!(s.session.track.fixes().len(), 6);
    assert_eq!(s.truth.len(), 31);
    assert_eq!(s.session.annotations.len(), 31 * 3);
    assert!(s.warnings.is_empty());

    // frames after the last fix at 3.2 s are not emitted
    let a = generate(&presets::approach_pass(NoiseSpec::default(), 1)).unwrap();
    assert_eq!(a.session.track.fixes().len(), 17);
    assert_eq!(a.truth.len(), 97);
    assert_eq!(a.truth.last().unwrap().t, 3.2);
}

#[test]
fn emitted_pixels_are_usable() {
    let spec = presets::drive_by(60.0, presets::cpos_noise(), PoseMode::Interpolate, 4);
    let scene = generate(&spec).unwrap();
    assert!(!scene.session.annotations.is_empty());
    for a in &scene.session.annotations {
        let cam = &scene.session.cameras[&a.camera_id];
        assert!(cam.intrinsics.contains(a.px, a.py));
        let ray = camera_ray_to_rig(&cam.extrinsics, &cam.intrinsics.pixel_to_ray(a.px, a.py).unwrap());
        assert!(intersect_ground(&ray.origin, &ray.direction).is_ok());
    }
}

#[test]
fn same_seed_same_scene() {
    let spec = presets::drive_by(30.0, presets::cpos_noise(), PoseMode::Nearest, 77);
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    let other = ScenarioSpec { seed: 78, ..spec.clone() };
    assert_ne!(generate(&spec).unwrap().session.annotations, generate(&other).unwrap().session.annotations);
}

#[test]
fn zero_noise_monte_carlo_stays_within_a_centimetre() {
    let mc = monte_carlo(&presets::stationary_markers(NoiseSpec::default(), 5), 20).unwrap();
    assert_eq!(mc.failures, 0);
    assert!(mc.aggregates.overall.unwrap().max < 0.01);
}

fn p95_over(noise: NoiseSpec, trials: usize) -> (f64, f64) {
    let mc = monte_carlo(&presets::stationary_markers(noise, 11), trials).unwrap();
    (mc.aggregates.overall.unwrap().p95, mc.cross_track.unwrap().p95)
}

#[test]
fn doubling_any_noise_term_grows_the_error() {
    let zero = NoiseSpec::default();
    type Scaled = fn(f64) -> NoiseSpec;
    let terms: [(&str, Scaled); 3] = [
        ("position", |s| NoiseSpec { position_sigma_m: s * 0.02, ..Default::default() }),
        ("heading", |s| NoiseSpec { heading_sigma_deg: s * 0.5, ..Default::default() }),
        ("pixel", |s| NoiseSpec { pixel_sigma_px: s * 2.0, ..Default::default() }),
    ];
    let (base, _) = p95_over(zero, 200);
    for (name, make) in terms {
        let (one, _) = p95_over(make(1.0), 200);
        let (two, _) = p95_over(make(2.0), 200);
        assert!(base < one && one < two, "{name}: {base} {one} {two}");
    }
}

#[test]
fn heading_noise_shows_up_across_the_sight_line() {
    let at = |s: f64| p95_over(NoiseSpec { heading_sigma_deg: s, ..Default::default() }, 10_000).1;
    let (a, b) = (at(0.5), at(1.0));
    assert!(b > a, "{a} {b}");
    // small angles: cross-track scales with σ
    assert!((b / a - 2.0).abs() < 0.05, "{}", b / a);
}
