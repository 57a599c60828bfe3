//! Throughput of the five paths a large run spends its time in:
//! sealing/opening envelopes, HTML conversion, tokenization, quality
//! scoring, and shard writes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use docmill::extract::html_to_markdown;
use docmill::key::{Stage, StorageKey};
use docmill::quality::{build_profile, compute_metrics, divergence_score, l2_filter_distance};
use docmill::shard::{write_shard, ShardRow};
use docmill::store::MemoryStore;
use docmill::tokenizer::ByteTokenizer;
use docmill::Tokenizer;

fn bench_envelope(c: &mut Criterion) {
    let mut group = c.benchmark_group("envelope");
    for kib in [4usize, 64, 1024] {
        let body = docmill_bench::prose(kib * 220).into_bytes();
        let body = &body[..(kib * 1024).min(body.len())];
        group.throughput(Throughput::Bytes(body.len() as u64));
        group.bench_with_input(BenchmarkId::new("seal", kib), &body, |b, body| {
            b.iter(|| docmill_bench::sealed(black_box(body), "text/plain"));
        });
        let env = docmill_bench::sealed(body, "text/plain");
        group.bench_with_input(BenchmarkId::new("open", kib), &env, |b, env| {
            b.iter(|| black_box(env).open().unwrap());
        });
    }
    group.finish();
}

fn bench_html(c: &mut Criterion) {
    let page = docmill_bench::html_page();
    let mut group = c.benchmark_group("extract");
    group.throughput(Throughput::Bytes(page.len() as u64));
    group.bench_function("html_to_markdown", |b| {
        b.iter(|| html_to_markdown(black_box(&page)));
    });
    group.finish();
}

fn bench_tokenizer(c: &mut Criterion) {
    let text = docmill_bench::prose(20_000);
    let tok = ByteTokenizer::new();
    let tokens = tok.encode(&text).unwrap();
    let mut group = c.benchmark_group("tokenizer");
    group.throughput(Throughput::Bytes(text.len() as u64));
    group.bench_function("byte_encode", |b| {
        b.iter(|| tok.encode(black_box(&text)).unwrap());
    });
    group.bench_function("byte_decode", |b| {
        b.iter(|| tok.decode(black_box(&tokens)).unwrap());
    });
    group.finish();
}

fn bench_quality(c: &mut Criterion) {
    let tok = ByteTokenizer::new();
    let samples: Vec<_> = (0..16)
        .map(|i| {
            let text = docmill_bench::prose(400 + i * 50);
            let tokens = tok.encode(&text).unwrap();
            let metrics = compute_metrics(&text, &tokens).unwrap();
            (metrics, tokens)
        })
        .collect();
    let profile = build_profile(&samples, tok.name()).unwrap();

    let text = docmill_bench::prose(1_200);
    let tokens = tok.encode(&text).unwrap();
    let metrics = compute_metrics(&text, &tokens).unwrap();
    let weights = vec![1.0; 12];

    let mut group = c.benchmark_group("quality");
    group.bench_function("compute_metrics", |b| {
        b.iter(|| compute_metrics(black_box(&text), black_box(&tokens)).unwrap());
    });
    group.bench_function("divergence_score", |b| {
        b.iter(|| divergence_score(black_box(&metrics), &profile, &weights).unwrap());
    });
    group.bench_function("l2_filter_distance", |b| {
        b.iter(|| l2_filter_distance(black_box(&tokens), &profile));
    });
    group.finish();
}

fn bench_shard(c: &mut Criterion) {
    let tok = ByteTokenizer::new();
    let rows: Vec<ShardRow> = (0..64)
        .map(|i| {
            let text = docmill_bench::prose(300);
            ShardRow {
                identifier: format!("representations/bench/doc-{i}.json"),
                representations: vec![("text/plain".to_string(), tok.encode(&text).unwrap())],
            }
        })
        .collect();
    let token_total: usize = rows
        .iter()
        .map(|r| r.representations[0].1.len())
        .sum();

    let mut group = c.benchmark_group("shard");
    group.throughput(Throughput::Elements(token_total as u64));
    group.bench_function("write_64_rows", |b| {
        let store = MemoryStore::new();
        let dest = StorageKey::new(Stage::Parquet, "bench", "shard-0000-of-0001.parquet").unwrap();
        b.iter(|| write_shard(&store, black_box(&rows), &dest).unwrap());
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_envelope,
    bench_html,
    bench_tokenizer,
    bench_quality,
    bench_shard
);
criterion_main!(benches);
