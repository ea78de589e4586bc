use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tmtree::lda::{fit_lda, LdaConfig};
use tmtree::mobtree::{grow, TreeConfig};
use tmtree::negbin::{fit_nb_intercept, sample_nb, NbParams};
use tmtree::validate::{run_plan, ResamplePlan, Scheme};
use tmtree_bench::{planted_dataset, topic_corpus};

fn bench_nb_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("nb_fit_intercept");
    for &n in &[1_000usize, 10_000, 100_000] {
        let sample = sample_nb(NbParams { mu: 2.0, theta: 0.5 }, n, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| fit_nb_intercept(s).unwrap())
        });
    }
    group.finish();
}

fn bench_lda_fit(c: &mut Criterion) {
    let docs = topic_corpus(10, 400, 1_000, 40, 3);
    c.bench_function("lda_fit_s10_q400_d1000", |b| {
        let cfg = LdaConfig { s: 10, kappa: 0.001, tol: 1e-4, max_iter: 20, seed: 5 };
        b.iter(|| fit_lda(&docs, 400, &cfg).unwrap())
    });
}

fn bench_tree_grow(c: &mut Criterion) {
    let ds = planted_dataset(2_000, 8, 11);
    let cfg = TreeConfig { alpha: 0.01, min_segment: 50, ..TreeConfig::default() };
    c.bench_function("tree_grow_n6000_10vars", |b| b.iter(|| grow(&ds, &cfg).unwrap()));
}

fn bench_stability_study(c: &mut Criterion) {
    let ds = planted_dataset(700, 2, 13);
    let cfg = TreeConfig { alpha: 0.01, min_segment: 40, ..TreeConfig::default() };
    let tree = grow(&ds, &cfg).unwrap();
    let plan = ResamplePlan {
        scheme: Scheme::Rrs,
        b: 10,
        fraction: 5.0 / 6.0,
        seed: 17,
        refit: TreeConfig { alpha: 1e-3, min_segment: 33, ..cfg.clone() },
    };
    c.bench_function("stability_b10_n2100", |b| {
        b.iter(|| run_plan(&ds, &tree, &plan).unwrap())
    });
}

criterion_group!(benches, bench_nb_fit, bench_lda_fit, bench_tree_grow, bench_stability_study);
criterion_main!(benches);
