use criterion::{black_box, criterion_group, criterion_main, Criterion};
use purimode_bench::short_delay_emitters;
use purimode_core::dynamics::{Engine, Propagator};
use purimode_core::heom::TierCap;
use purimode_core::waveguide::{find_n_poles, WaveguideParams};
use purimode_core::Complex64;

fn generators(c: &mut Criterion) {
    let em = short_delay_emitters();
    let engines = [
        ("tiered_single", Engine::Tiered { cap: TierCap { total: 2, right: Some(1), left: Some(1) } }),
        ("tiered_l4", Engine::Tiered { cap: TierCap::total(4) }),
        ("dense_cap2", Engine::Dense { n_max: 2, cap: Some(2) }),
    ];
    for (name, engine) in engines {
        let prop = Propagator::new(&em.model, engine).expect("propagator");
        let y = prop.initial().to_vec();
        let mut out = vec![Complex64::new(0.0, 0.0); y.len()];
        c.bench_function(&format!("rhs_{name}_dim{}", y.len()), |b| {
            b.iter(|| prop.apply(black_box(&y), &mut out))
        });
    }
}

fn pole_search(c: &mut Criterion) {
    let p = WaveguideParams::resonant_pair(1500.0);
    let mut group = c.benchmark_group("poles");
    group.sample_size(10);
    group.bench_function("find_40_poles_xd1500", |b| b.iter(|| find_n_poles(black_box(&p), 40).expect("roots")));
    group.finish();
}

criterion_group!(benches, generators, pole_search);
criterion_main!(benches);
