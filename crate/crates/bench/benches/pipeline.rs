use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qswitch_bench::{counts, first_setting};
use qswitch_core::procmat::{probability_table, w_switch, w_switch_dephased};
use qswitch_core::settings::enumerate_settings;
use qswitch_core::tomo::{self, Method};
use qswitch_core::witness::reduced_blocks;
use qswitch_core::{fock, switch};

fn models(c: &mut Criterion) {
    let s = first_setting();
    c.bench_function("fock_switch_one_setting", |b| b.iter(|| fock::switch_probabilities(black_box(&s), 0.8).unwrap()));
    c.bench_function("qubit_switch_all_settings", |b| {
        let all = enumerate_settings();
        b.iter(|| all.iter().map(|s| switch::switch_probabilities(s, 0.3).unwrap()[0][0]).sum::<f64>())
    });
    let w = w_switch();
    c.bench_function("procmat_probability_table", |b| b.iter(|| probability_table(black_box(&w)).unwrap()));
}

fn witness(c: &mut Criterion) {
    let w = w_switch_dephased(0.5).unwrap();
    c.bench_function("reduced_blocks", |b| b.iter(|| reduced_blocks(black_box(&w.op)).unwrap()));
}

fn tomography(c: &mut Criterion) {
    let recs = counts(30_000);
    c.bench_function("tomo_linear_30k", |b| b.iter(|| tomo::reconstruct(black_box(&recs), Method::Linear).unwrap()));
    c.bench_function("tomo_mle_30k", |b| b.iter(|| tomo::reconstruct(black_box(&recs), Method::Mle).unwrap()));
}

criterion_group!(benches, models, witness, tomography);
criterion_main!(benches);
