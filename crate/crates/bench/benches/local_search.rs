use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use hclocal::{search, MoveIndex, SearchConfig, WMatrix, DEFAULT_TOLERANCE};
use hclocal_bench::{blob_matrix, random_tree};

const SIZES: [usize; 3] = [250, 500, 1000];

fn table_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("w_build");
    group.sample_size(10);
    for n in SIZES {
        let w = blob_matrix(n, 1);
        let tree = random_tree(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| WMatrix::build(&tree, &w).unwrap())
        });
    }
    group.finish();
}

fn best_move(c: &mut Criterion) {
    let mut group = c.benchmark_group("best_move");
    for n in SIZES {
        let w = blob_matrix(n, 1);
        let tree = random_tree(n, 2);
        let table = WMatrix::build(&tree, &w).unwrap();
        let index = MoveIndex::new(&tree, &table);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| index.best(&tree, &table, DEFAULT_TOLERANCE))
        });
    }
    group.finish();
}

/// Ten greedy steps, including the table and index updates.
fn greedy_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_10_steps");
    group.sample_size(20);
    for n in [250, 500] {
        let w = blob_matrix(n, 1);
        let tree = random_tree(n, 2);
        let table = WMatrix::build(&tree, &w).unwrap();
        let index = MoveIndex::new(&tree, &table);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter_batched(
                || (tree.clone(), table.clone(), index.clone()),
                |(mut t, mut tab, mut idx)| {
                    for _ in 0..10 {
                        let Some(mv) = idx.best(&t, &tab, DEFAULT_TOLERANCE) else {
                            break;
                        };
                        idx.apply(&mut t, &mut tab, &mv).unwrap();
                    }
                    t
                },
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn full_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_search");
    group.sample_size(10);
    for n in [150, 300] {
        let w = blob_matrix(n, 1);
        let tree = random_tree(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| search(tree.clone(), &w, &SearchConfig::greedy()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, table_build, best_move, greedy_steps, full_search);
criterion_main!(benches);
