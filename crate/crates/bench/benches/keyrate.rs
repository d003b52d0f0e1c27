use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qkdfk_core::finitekey::EntropyPath;
use qkdfk_core::matqi::{random_density, HermitianMatrix};
use qkdfk_core::minent::{certified_minent, root_fidelity_sdp};
use qkdfk_core::pipeline::{rate, RateSettings};
use qkdfk_core::protocols::{bb84, transmittance_from_db, twin_field, KeyBasis};
use qkdfk_core::relent::{certified_keyterm, grad_objective, QreApproxConfig};
use qkdfk_core::sdp::solve;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn primitives(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (r, s) = (random_density(4, &mut rng), random_density(4, &mut rng));
    let fid = root_fidelity_sdp(&r, &s).unwrap();
    c.bench_function("fidelity_sdp_4x4", |b| b.iter(|| solve(black_box(&fid), 1e-8).unwrap()));

    let sift = bb84(0.0, 0.5).unwrap().sift;
    let rho = random_density(4, &mut rng).add(&HermitianMatrix::identity(4).scale(0.01));
    c.bench_function("grad_objective_bb84", |b| b.iter(|| grad_objective(black_box(&rho), &sift, 1e-10).unwrap()));

    let sqrt_eta = transmittance_from_db(40.0).sqrt();
    c.bench_function("twin_field_instance", |b| {
        b.iter(|| twin_field(black_box(0.93), sqrt_eta, 1e-9, 0.1, KeyBasis::X).unwrap())
    });
}

fn bounds(c: &mut Criterion) {
    let inst = bb84(0.025, 0.5).unwrap();
    let mut g = c.benchmark_group("bb84_q5");
    g.sample_size(10);
    g.bench_function("vn_keyterm", |b| {
        b.iter(|| certified_keyterm(&inst.constraints, &inst.sift, &QreApproxConfig::default()).unwrap())
    });
    g.bench_function("minent", |b| b.iter(|| certified_minent(&inst.constraints, &inst.sift).unwrap()));
    let s = RateSettings::finite(1e8);
    g.bench_function("finite_rate_vn_1e8", |b| b.iter(|| rate(&inst, &s, EntropyPath::VonNeumann).unwrap()));
    g.finish();
}

criterion_group!(benches, primitives, bounds);
criterion_main!(benches);
