use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use qfrac_core::corpus::corpus;
use qfrac_core::frac_fueter::{frac_fueter_left, frac_kernel, script_i};
use qfrac_core::fueter::{kernel, verify_stokes_classical};
use qfrac_core::quadrature::gauss_jacobi;
use qfrac_core::rl::{rl_derivative, rl_integral, AlphaVec};
use qfrac_core::{Box4, QuadratureSpec, StructuralSet};

fn one_dimensional(c: &mut Criterion) {
    let bx = Box4::unit();
    let f = &corpus(1, &bx)[0];
    let s = f.slice([0.3, 0.4, 0.5, 0.6], 1);
    let spec = QuadratureSpec::default();
    let al = Complex64::new(0.5, 0.0);
    c.bench_function("gauss_jacobi_24", |b| b.iter(|| gauss_jacobi(black_box(24), -0.5, 0.0, 1.0)));
    c.bench_function("rl_integral", |b| b.iter(|| rl_integral(&s, 0.0, al, black_box(0.7), &spec)));
    c.bench_function("rl_derivative", |b| b.iter(|| rl_derivative(&s, 0.0, al, black_box(0.7), &spec)));
}

fn kernels(c: &mut Criterion) {
    let psi = StructuralSet::standard();
    let bx = Box4::unit();
    let spec = QuadratureSpec::default();
    let al = AlphaVec::real([0.3, 0.5, 0.7, 0.5]).unwrap();
    c.bench_function("cauchy_kernel", |b| b.iter(|| kernel(&psi, black_box(&[0.1, -0.2, 0.3, 0.05]))));
    c.bench_function("frac_kernel", |b| b.iter(|| frac_kernel(&psi, &bx, black_box(&[0.9, 0.8, 0.1, 0.2]), &[0.4, 0.3, 0.6, 0.5], &al, &spec)));
}

fn fractional(c: &mut Criterion) {
    let psi = StructuralSet::standard();
    let bx = Box4::unit();
    let fs = corpus(1, &bx);
    let spec = QuadratureSpec::default();
    let al = AlphaVec::real([0.3, 0.5, 0.7, 0.5]).unwrap();
    let (q, x) = ([0.3, 0.4, 0.5, 0.6], [0.6, 0.45, 0.5, 0.4]);
    c.bench_function("script_i", |b| b.iter(|| script_i(&fs[0], &q, black_box(&x), &al, &spec)));
    c.bench_function("frac_fueter_left", |b| b.iter(|| frac_fueter_left(&fs[0], &psi, &q, black_box(&x), &al, &spec)));
    let light = QuadratureSpec { order: 12, refine_levels: 1, ..spec };
    let mut g = c.benchmark_group("volume");
    g.sample_size(10);
    g.bench_function("stokes_classical_order12", |b| b.iter(|| verify_stokes_classical(&fs[0], &fs[1], &bx, &psi, black_box(&light))));
    g.finish();
}

criterion_group!(benches, one_dimensional, kernels, fractional);
criterion_main!(benches);
