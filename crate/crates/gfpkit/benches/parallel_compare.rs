//! Compares the data-parallel structure sweep against a single-threaded
//! run of the same workload. With the default `parallel` feature the sweep
//! uses the global rayon pool; the single-thread case pins the pool to one
//! worker, which matches what the sequential fallback does.

use criterion::{criterion_group, criterion_main, Criterion};
use gfpkit::semantics::equivalent_up_to;
use gfpkit::syntax::{parse, GuardedSignature, Signature};
use gfpkit::Symbols;

fn bench_equivalence_sweep(c: &mut Criterion) {
    let mut syms = Symbols::new();
    let phi = parse("exists y. (R(x,y) & exists z. R(y,z))", &mut syms).unwrap();
    let psi = parse("exists z. (R(x,z) & exists y. R(z,y))", &mut syms).unwrap();
    let sig = GuardedSignature::full(Signature::new([("R", 2), ("P", 1)]));

    let mut group = c.benchmark_group("equivalence_sweep");
    group.sample_size(10);
    group.bench_function("default_pool", |b| {
        b.iter(|| equivalent_up_to(&phi, &psi, &sig, 3).unwrap())
    });
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("one_thread", |b| {
            b.iter(|| pool.install(|| equivalent_up_to(&phi, &psi, &sig, 3).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_equivalence_sweep);
criterion_main!(benches);
