use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use polyrag_bench::{deployment, fixtures_dir, system, EXAMPLE_QUESTIONS};
use polyrag_core::dialect::validate;
use polyrag_core::model::Dialect;
use polyrag_core::UserQuery;

fn answer(c: &mut Criterion) {
    let system = system();
    let queries: Vec<UserQuery> = EXAMPLE_QUESTIONS.iter().map(|q| UserQuery::new(*q).unwrap()).collect();
    c.bench_function("answer/eight_examples", |b| {
        b.iter(|| {
            for q in &queries {
                black_box(system.answer(q).unwrap());
            }
        })
    });
}

fn routing(c: &mut Criterion) {
    let cfg = deployment();
    let router = cfg.build_router().unwrap();
    let corpus: Vec<UserQuery> = cfg
        .load_corpus()
        .unwrap()
        .into_iter()
        .map(|l| UserQuery::new(l.question).unwrap())
        .collect();
    c.bench_function("route/corpus", |b| {
        b.iter(|| {
            for q in &corpus {
                let _ = black_box(router.identify_data_source(q));
            }
        })
    });
}

fn validators(c: &mut Criterion) {
    let files = [
        ("mysql_example1.sql", Dialect::Sql),
        ("mongodb_example1.js", Dialect::DocumentFilter),
        ("neo4j_example1.cypher", Dialect::GraphPattern),
        ("es_example2.json", Dialect::SearchDsl),
    ];
    let mut group = c.benchmark_group("validate");
    for (file, dialect) in files {
        let text = std::fs::read_to_string(fixtures_dir().join("queries").join(file)).unwrap();
        group.bench_function(file, |b| b.iter(|| validate(dialect, black_box(&text)).unwrap()));
    }
    group.finish();
}

fn token_benchmark(c: &mut Criterion) {
    let cfg = deployment();
    c.bench_function("prompt/token_benchmark", |b| b.iter(|| black_box(cfg.token_benchmark().unwrap())));
}

fn seeding(c: &mut Criterion) {
    let system = system();
    let seed = fixtures_dir().join("seed/research_network.json");
    c.bench_function("seed/research_graph", |b| {
        b.iter_batched(
            || seed.clone(),
            |p| system.connection("research_graph").unwrap().load_seed_data(p).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, answer, routing, validators, token_benchmark, seeding);
criterion_main!(benches);
