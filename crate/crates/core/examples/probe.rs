// Scratch probe: trains a small interval model and reports per-mode errors
// against the closed-form spectrum, with rough timing.

use std::time::Instant;

use specfield::field::{Activation, OperatorKind, PositionalEncoding};
use specfield::oracle::{interval_eigenvalue, interval_mode, mode_match};
use specfield::rng;
use specfield::shapespace::{built_in_families, FamilyParams, GeometryCode};
use specfield::spectral::{evaluate_spectrum, train_single_shape, TrainConfig};

fn main() {

    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let k: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    let n: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1500);

    let registry = built_in_families();
    let family = registry.create("interval1d", &FamilyParams::default()).unwrap();
    let config = TrainConfig {
        k,
        epochs,
        samples_per_epoch: n,
        seed: 1,
        encoding: PositionalEncoding { octaves: 5, passthrough: true },
        activation: Activation::Sine,
        log_every: 200,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let set = train_single_shape(family.as_ref(), &GeometryCode::empty(), OperatorKind::Laplace, &config).unwrap();
    let train_time = start.elapsed();
    println!("trained {k} modes, {epochs} epochs, n={n}: {:.2?} ({:.1} ms/epoch)",
        train_time, train_time.as_secs_f64() * 1000.0 / epochs as f64);

    let mut eval_rng = rng::stream(99, rng::STREAM_CUBATURE, 0);
    let (eval, cubature) = evaluate_spectrum(&set, family.as_ref(), &GeometryCode::empty(), 4000, &mut eval_rng).unwrap();
    println!("causal order: {:?}", eval.spectrum.causal_order);
    for i in 0..=k {
        let lambda = eval.spectrum.eigenvalues[i];
        let target = interval_eigenvalue(i);
        let reference: Vec<f64> = (0..cubature.n).map(|j| interval_mode(i, cubature.point(j)[0])).collect();
        let mse = mode_match(&eval.modes[i].value, &reference);
        let rel = if target > 0.0 { (lambda - target).abs() / target } else { lambda };
        println!("mode {i}: lambda {lambda:10.4} target {target:10.4} rel {rel:8.2e} match-mse {mse:8.2e}");
    }
}
