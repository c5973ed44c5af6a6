use std::f64::consts::FRAC_PI_2;

use chiralmag::floquet::{bessel_j_upto, chiral_root, effective_model, Chirality, DriveParams};
use chiralmag::fock::{FockSpace, Ket};
use chiralmag::model::{chiral_effective, floquet_drive, Hamiltonian};
use chiralmag::observables::{max_current_scan_with, SCAN_SAMPLES};
use chiralmag::propagate::{analytic_transfer, evolve_observe};
use chiralmag::states::StateSpec;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn bessel(c: &mut Criterion) {
    let f = chiral_root();
    c.bench_function("bessel_j_upto_60", |b| {
        b.iter(|| bessel_j_upto(60, black_box(f)))
    });
}

fn effective(c: &mut Criterion) {
    let drive = DriveParams::chiral(20.0, Chirality::Clockwise).unwrap();
    c.bench_function("effective_model", |b| {
        b.iter(|| effective_model(black_box(&drive), 1.0).unwrap())
    });
    let m = effective_model(&drive, 1.0).unwrap();
    c.bench_function("analytic_transfer", |b| {
        b.iter(|| analytic_transfer(&m, black_box(38.6)).unwrap())
    });
}

fn evolution(c: &mut Criterion) {
    let drive = DriveParams::chiral(20.0, Chirality::Clockwise).unwrap();
    let mut g = c.benchmark_group("evolution");
    g.sample_size(10);

    let s = FockSpace::uniform(3, 2).unwrap();
    let psi = Ket::basis(&s, &[1, 0, 0]).unwrap();
    let h: Hamiltonian = floquet_drive(&drive, 1.0, &s).unwrap().into();
    let t3 = effective_model(&drive, 1.0).unwrap().t3();
    g.bench_function("drive_fock1_to_t3", |b| {
        b.iter(|| evolve_observe(&h, &psi, &[0.0, t3], 200, |_, k| Ok(k.norm())).unwrap())
    });

    let s = FockSpace::uniform(3, 6).unwrap();
    let psi = Ket::basis(&s, &[5, 0, 0]).unwrap();
    let m = effective_model(&drive, 1.0).unwrap();
    let h = Hamiltonian::Static(chiral_effective(&m, &s).unwrap());
    let times: Vec<f64> = (0..1000).map(|i| 0.1 * i as f64).collect();
    g.bench_function("effective_fock5_1000_samples", |b| {
        b.iter(|| evolve_observe(&h, &psi, &times, 200, |_, k| Ok(k.norm())).unwrap())
    });
    g.finish();
}

fn current_scan(c: &mut Criterion) {
    let mut g = c.benchmark_group("current_scan");
    g.sample_size(10);
    let spec = StateSpec::fock(1);
    g.bench_function("fock1_one_phase", |b| {
        b.iter(|| max_current_scan_with(&[FRAC_PI_2], &spec, SCAN_SAMPLES).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bessel, effective, evolution, current_scan);
criterion_main!(benches);
