use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hamdesign::construct::{base_design, expand_to};
use hamdesign::criteria::bayes_d_criterion;
use hamdesign::search::{bubble_sort_search, simulated_annealing_search, SearchConfig};
use hamdesign_bench::{start_design, table_prior};

fn criterion_eval(c: &mut Criterion) {
    let mut g = c.benchmark_group("bayes_d_criterion");
    for (m, n) in [(6, 31), (10, 136), (20, 381)] {
        let d = start_design(m, n);
        let prior = table_prior(m);
        g.bench_with_input(BenchmarkId::from_parameter(format!("m{m}_n{n}")), &d, |b, d| {
            b.iter(|| bayes_d_criterion(d, &prior).unwrap())
        });
    }
    g.finish();
}

fn searches(c: &mut Criterion) {
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    let (m, n) = (8, 57);
    let d0 = start_design(m, n);
    let prior = table_prior(m);
    let cfg = SearchConfig {
        restarts: 1,
        ..SearchConfig::bubble()
    };
    g.bench_function("bubble_m8_n57", |b| {
        b.iter(|| bubble_sort_search(&d0, &prior, &cfg).unwrap())
    });
    let cfg = SearchConfig {
        restarts: 1,
        ..SearchConfig::anneal()
    };
    g.bench_function("anneal_m8_n57", |b| {
        b.iter(|| simulated_annealing_search(&d0, &prior, &cfg).unwrap())
    });
    g.finish();
}

fn expansion(c: &mut Criterion) {
    c.bench_function("expand_5_to_7", |b| {
        b.iter(|| expand_to(base_design(5).unwrap(), 7).unwrap())
    });
}

criterion_group!(benches, criterion_eval, searches, expansion);
criterion_main!(benches);
