use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use hardstab_bench::{params, spread_polynomial, zero_poles};
use hardstab_core::bounds::kl_monte_carlo;
use hardstab_core::lmi::{probe, DEFAULT_TOLERANCE};
use hardstab_core::synthesis::{ackermann_gain, ce_lqr_gain};
use hardstab_core::systems::{make_hard_pair, InnovationStream};
use hardstab_core::{poly_roots, spectral_radius, InputPolicy, Prng};

fn synthesis(c: &mut Criterion) {
    let mut g = c.benchmark_group("synthesis");
    for n in [2, 5, 8] {
        let sys = params(n).system(0.0).unwrap();
        let poles = zero_poles(n);
        g.bench_with_input(BenchmarkId::new("ackermann", n), &n, |b, _| {
            b.iter(|| ackermann_gain(black_box(&sys), &poles).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("ce_lqr_gain", n), &n, |b, &n| {
            b.iter(|| ce_lqr_gain(&params(n), black_box(0.01)).unwrap())
        });
        let cl = sys.closed_loop(&ce_lqr_gain(&params(n), 0.0).unwrap().k).unwrap();
        g.bench_with_input(BenchmarkId::new("spectral_radius", n), &n, |b, _| {
            b.iter(|| spectral_radius(black_box(&cl)).unwrap())
        });
    }
    g.finish();
}

fn roots(c: &mut Criterion) {
    let p = spread_polynomial(10);
    c.bench_function("poly_roots/10", |b| b.iter(|| poly_roots(black_box(&p)).unwrap()));
}

fn estimation(c: &mut Criterion) {
    let sys = params(8).system(0.005).unwrap();
    let policy = InputPolicy::iid_gaussian(32.0).unwrap();
    c.bench_function("innovation_stream/10k", |b| {
        b.iter(|| {
            let mut s = InnovationStream::new(&sys, &policy, &Prng::new(1, 0)).unwrap();
            (0..10_000).map(|_| s.step().1).sum::<f64>()
        })
    });
    let pair = make_hard_pair(params(2), 0.01).unwrap().with_noise_variance(0.005).unwrap();
    c.bench_function("kl_monte_carlo/1k_trials", |b| {
        b.iter(|| kl_monte_carlo(&pair, &policy, 50, 1000, &Prng::new(2, 0)).unwrap())
    });
}

fn lmi(c: &mut Criterion) {
    let mut g = c.benchmark_group("lmi_probe");
    g.sample_size(10);
    for n in [2, 4, 6] {
        let p = params(n);
        let m = 0.5 * p.sup_bound() * (1.01f64 / 3.2).powi(n as i32 - 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| probe(&p, black_box(m), DEFAULT_TOLERANCE).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, synthesis, roots, estimation, lmi);
criterion_main!(benches);
