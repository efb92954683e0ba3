use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use semfence::{exact_match, postprocess_sql, preprocess_sql, EvalConfig, KeywordMap};
use semfence_bench::{schema, vocab, QUERIES};

fn preprocess(c: &mut Criterion) {
    let kw = KeywordMap::default();
    c.bench_function("preprocess_sql", |b| {
        b.iter(|| {
            for q in QUERIES {
                black_box(preprocess_sql(black_box(q), &kw).unwrap());
            }
        })
    });
    let pre: Vec<String> = QUERIES.iter().map(|q| preprocess_sql(q, &kw).unwrap()).collect();
    c.bench_function("postprocess_sql", |b| {
        b.iter(|| {
            for q in &pre {
                black_box(postprocess_sql(black_box(q), &kw).unwrap());
            }
        })
    });
}

fn tokenize(c: &mut Criterion) {
    let v = vocab();
    c.bench_function("tokenize", |b| {
        b.iter(|| {
            for q in QUERIES {
                black_box(v.tokenize(black_box(q)));
            }
        })
    });
}

fn eval(c: &mut Criterion) {
    let db = schema();
    let config = EvalConfig::default();
    c.bench_function("exact_match", |b| {
        b.iter(|| {
            for q in &QUERIES[1..] {
                black_box(exact_match(black_box(q), q, &db, &config));
            }
        })
    });
}

criterion_group!(benches, preprocess, tokenize, eval);
criterion_main!(benches);
