//! Sequential versus rayon execution for encoding, decoding and batches of
//! Monte Carlo trials.

use std::hint::black_box;

use byzcode::codec::encode_all_with;
use byzcode::codec::GradientMatrix;
use byzcode::decoder::decode_with;
use byzcode::trials::{run_trials, TrialCase, TrialPlan};
use byzcode::{
    build_allocation, derive_probes, encode_all, inject, validate_config, AttackKind, AttackSpec,
    DecoderOptions, Exec, InjectContext, WeightScheme, WeightSet,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn gradients(
    p: usize,
    s: usize,
    rc: usize,
    d: usize,
) -> (byzcode::MechanismConfig, GradientMatrix) {
    let cfg = validate_config(p, s, rc, d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let g = GradientMatrix::from_columns(&cfg, &cols).unwrap();
    (cfg, g)
}

fn bench_encode(c: &mut Criterion) {
    let (cfg, g) = gradients(100, 5, 10, 20_000);
    let w = WeightSet::generate(&cfg, WeightScheme::Chebyshev);
    let alloc = build_allocation(&cfg);
    let mut group = c.benchmark_group("encode_all");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, cfg.to_string()), |b| {
            b.iter(|| encode_all_with(black_box(&g), &alloc, &w, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_decode(c: &mut Criterion) {
    let (cfg, g) = gradients(100, 5, 10, 20_000);
    let w = WeightSet::generate(&cfg, WeightScheme::Chebyshev);
    let z = encode_all(&g, &build_allocation(&cfg), &w, &cfg).unwrap();
    let spec = AttackSpec::resampled(AttackKind::ReverseGradient(-100.0), 5);
    let ctx = InjectContext {
        cfg: &cfg,
        seed: 3,
        iteration: 0,
    };
    let (received, _) = inject(&z, &spec, ctx).unwrap();
    let probes = derive_probes(&cfg, 3, 0);
    let mut group = c.benchmark_group("decode");
    for (name, exec) in MODES {
        let opts = DecoderOptions {
            exec,
            ..DecoderOptions::default()
        };
        group.bench_function(BenchmarkId::new(name, cfg.to_string()), |b| {
            b.iter(|| decode_with(&cfg, &w, black_box(&received), &probes, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_trials(c: &mut Criterion) {
    let plan = TrialPlan {
        cases: [(12, 2, 2), (20, 5, 10), (48, 3, 6)]
            .into_iter()
            .map(|(p, s, rc)| TrialCase {
                cfg: validate_config(p, s, rc, 4 * rc).unwrap(),
                scheme: WeightScheme::Equispaced,
            })
            .collect(),
        attacks: vec![
            AttackKind::ReverseGradient(-100.0),
            AttackKind::Constant(-100.0),
            AttackKind::Alie(1.0),
        ],
        inject_noise: true,
        decoder: DecoderOptions::default(),
    };
    let mut group = c.benchmark_group("run_trials");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 200), |b| {
            b.iter(|| run_trials(&plan, 0, black_box(200), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_encode, bench_decode, bench_trials);
criterion_main!(benches);
