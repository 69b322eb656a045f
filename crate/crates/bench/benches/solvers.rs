use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use diffpad::localizer::locate_patch;
use diffpad::pipeline::synthetic_scene;
use diffpad::{
    bicubic_downsample, inpaint_data_solution, make_bicubic_kernel, BinaryMask, PatchBox, SrOperator,
};
use std::hint::black_box;

fn sr_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("sr_solve");
    for side in [64, 128, 256] {
        let x = synthetic_scene(side, side, 1);
        let y = bicubic_downsample(&x, 4).unwrap();
        let op = SrOperator::new(side, side, 4, make_bicubic_kernel(4).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side), &side, |b, _| {
            b.iter(|| op.solve(black_box(&x), black_box(&y), 0.01).unwrap())
        });
    }
    group.finish();
}

fn sr_operator_setup(c: &mut Criterion) {
    c.bench_function("sr_operator_new_256", |b| {
        b.iter(|| SrOperator::new(256, 256, 4, make_bicubic_kernel(4).unwrap()).unwrap())
    });
}

fn inpaint(c: &mut Criterion) {
    let x = synthetic_scene(256, 256, 2);
    let y = synthetic_scene(256, 256, 3);
    let mask = BinaryMask::from_box(256, 256, &PatchBox::new(60, 80, 50))
        .unwrap()
        .invert();
    c.bench_function("inpaint_256", |b| {
        b.iter(|| inpaint_data_solution(black_box(&x), black_box(&y), &mask, 0.01).unwrap())
    });
}

fn locate(c: &mut Criterion) {
    let bits = (0..256 * 256).map(|i| (i * 7919) % 13 == 0).collect();
    let mask = BinaryMask::from_bits(256, 256, bits).unwrap();
    c.bench_function("locate_patch_256_side_48", |b| {
        b.iter(|| locate_patch(black_box(&mask), 48).unwrap())
    });
}

criterion_group!(benches, sr_solve, sr_operator_setup, inpaint, locate);
criterion_main!(benches);
