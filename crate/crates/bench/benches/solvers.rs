use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sgsolve_bench::random_games;
use sgsolve_core::graph::mec_decomposition;
use sgsolve_core::models;
use sgsolve_core::oracle::enumerate_solve;
use sgsolve_core::qp_solver::{solve_game_qp, QpOptions};
use sgsolve_core::si::{solve_si, SiConfig};

fn bigmec(c: &mut Criterion) {
    let mut group = c.benchmark_group("bigmec");
    for n in [1, 2, 3, 8] {
        let game = models::bigmec(n);
        group.bench_with_input(BenchmarkId::new("si", n), &game, |b, g| {
            b.iter(|| solve_si(black_box(g), &SiConfig::default()).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("qp", n), &game, |b, g| {
            b.iter(|| solve_game_qp(black_box(g), &QpOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn random(c: &mut Criterion) {
    let mut group = c.benchmark_group("random");
    group.sample_size(20);
    for states in [4, 6] {
        let games = random_games(states, 8);
        group.bench_with_input(BenchmarkId::new("mec", states), &games, |b, gs| {
            b.iter(|| {
                gs.iter()
                    .map(|g| mec_decomposition(black_box(g)).len())
                    .sum::<usize>()
            })
        });
        group.bench_with_input(BenchmarkId::new("si", states), &games, |b, gs| {
            b.iter(|| {
                for g in gs {
                    solve_si(black_box(g), &SiConfig::default()).unwrap();
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("qp", states), &games, |b, gs| {
            b.iter(|| {
                for g in gs {
                    solve_game_qp(black_box(g), &QpOptions::default()).unwrap();
                }
            })
        });
        group.bench_with_input(BenchmarkId::new("oracle", states), &games, |b, gs| {
            b.iter(|| {
                for g in gs {
                    enumerate_solve(black_box(g)).unwrap();
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bigmec, random);
criterion_main!(benches);
