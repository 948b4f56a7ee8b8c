use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use semdensity::eval::ablation_curve;
use semdensity::pipeline::score_corpus;
use semdensity::synth::{planted_corpus, random_corpus};
use semdensity::{Execution, ScoreConfig};

fn corpus_bytes(n: usize, m: usize) -> Vec<u8> {
    let mut out = String::new();
    for r in random_corpus(n, m, 11) {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    out.into_bytes()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_score_corpus(c: &mut Criterion) {
    let cfg = ScoreConfig::default();
    let mut group = c.benchmark_group("score_corpus");
    group.sample_size(10);
    for n in [500, 2_000] {
        let input = corpus_bytes(n, 10);
        group.throughput(Throughput::Elements(n as u64));
        for (name, exec) in modes() {
            group.bench_with_input(BenchmarkId::new(name, n), &input, |b, input| {
                b.iter(|| score_corpus(input, &cfg, exec))
            });
        }
    }
    group.finish();
}

fn bench_ablation(c: &mut Criterion) {
    let cfg = ScoreConfig::default();
    let records = planted_corpus(500, 10, 5);
    let mut group = c.benchmark_group("ablation_curve");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(name, |b| b.iter(|| ablation_curve(&records, 10, &cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_score_corpus, bench_ablation);
criterion_main!(benches);
