use diffpad::localizer::residual_map;
use diffpad::pipeline::{derive_seed, synthetic_scene};
use diffpad::suite::{patched_input, run_case, suite_cases, SuiteSpec};
use diffpad::{
    bicubic_downsample, make_bicubic_kernel, restore, BinaryMask, DiffPadConfig, GalleryDenoiser, Image,
    NoiseSchedule, RestorationTask,
};

const SIDE: usize = 48;

fn gallery() -> Vec<Image> {
    (0..5).map(|i| synthetic_scene(SIDE, SIDE, 40 + i)).collect()
}

fn spec() -> SuiteSpec {
    SuiteSpec {
        seeds: 2,
        ..Default::default()
    }
}

#[test]
fn restoration_pulls_patched_and_clean_inputs_together() {
    let images = gallery();
    let den = GalleryDenoiser::new(images.clone()).unwrap();
    let cfg = DiffPadConfig::default();
    let sched = NoiseSchedule::default();
    let s = cfg.pipeline.scale;
    let (mut closer, mut total) = (0, 0);
    for (i, clean) in images.iter().enumerate() {
        for case in suite_cases(&spec(), SIDE, SIDE, i as u64, 5).unwrap() {
            let patched = patched_input(clean, &case).unwrap();
            let run = |x: &Image| {
                let y = bicubic_downsample(x, s).unwrap();
                let task = RestorationTask::super_resolution(
                    y,
                    s,
                    make_bicubic_kernel(s).unwrap(),
                    cfg.sampler.sigma,
                )
                .unwrap();
                restore(
                    &task,
                    &den,
                    &sched,
                    &cfg.sampler,
                    derive_seed(case.content_seed, 9),
                )
                .unwrap()
            };
            let before = patched.distance(clean).unwrap();
            let after = run(&patched).distance(&run(clean)).unwrap();
            closer += (after < before) as usize;
            total += 1;
        }
    }
    assert!(closer as f64 >= 0.95 * total as f64, "{closer}/{total}");
}

#[test]
fn defense_confines_changes_and_residual_marks_the_patch() {
    let images = gallery();
    let den = GalleryDenoiser::new(images.clone()).unwrap();
    let cfg = DiffPadConfig::default();
    let eta = NoiseSchedule::default().eta(1, cfg.sampler.sigma).unwrap();
    // largest move the final data-consistency blend can make on an observed pixel
    let blend_cap = eta / (1.0 + eta) * 255.0;
    let mut ratios = Vec::new();
    for (i, clean) in images.iter().enumerate() {
        for case in suite_cases(&spec(), SIDE, SIDE, i as u64, 6).unwrap() {
            let x = patched_input(clean, &case).unwrap();
            let out = run_case(clean, &case, &cfg, &den).unwrap();
            let r = &out.result;
            if let Some(b) = r.detected {
                for c in 0..3 {
                    for yy in 0..SIDE {
                        for xx in 0..SIDE {
                            if !b.contains(yy, xx) {
                                let d = (r.output.get(yy, xx, c) - x.get(yy, xx, c)).abs();
                                // missed patch pixels can sit far from the prior estimate
                                let cap = if case.truth.contains(yy, xx) {
                                    blend_cap
                                } else {
                                    2.0
                                };
                                assert!(d <= cap, "{} at ({yy},{xx},{c}): {d} > {cap}", case.label());
                            }
                        }
                    }
                }
            }

            // residual of the restoration stage alone
            let loc = diffpad::localize(&x, &cfg, &den).unwrap();
            let res = residual_map(&x, &loc.restored).unwrap();
            let inside = BinaryMask::from_box(SIDE, SIDE, &case.truth).unwrap();
            let a = res.mean_over(&inside).unwrap();
            let b = res.mean_over(&inside.invert()).unwrap();
            ratios.push(a / b);
        }
    }
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(worst >= 2.0, "smallest inside/outside residual ratio {worst}");
}
