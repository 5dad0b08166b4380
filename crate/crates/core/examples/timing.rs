// Scratch micro-timing of one training epoch's phases.

use std::time::Instant;

use specfield::autodiff::Tape;
use specfield::field::{
    known_mode_values, Activation, EigenFieldSet, Mlp, OperatorKind, PositionalEncoding, TrainingMeta,
};
use specfield::rng;
use specfield::shapespace::{built_in_families, sample_domain, FamilyParams, GeometryCode};
use specfield::spectral::chain::{self, GeometrySource};
use specfield::spectral::project;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let reps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20);

    let registry = built_in_families();
    let family = registry.create("interval1d", &FamilyParams::default()).unwrap();
    let encoding = PositionalEncoding { octaves: 5, passthrough: true };
    let mut init = rng::stream(1, rng::STREAM_INIT, 0);
    let feat_w = encoding.output_len(1);
    let set = EigenFieldSet {
        operator: OperatorKind::Laplace,
        elasticity: None,
        family_id: "interval1d".into(),
        family_params: FamilyParams::default(),
        d_g: 0,
        spatial_dim: 1,
        encoding,
        encode_geometry: false,
        modes: (0..k).map(|_| Mlp::init(&[feat_w, 40, 40, 40, 1], Activation::Sine, &mut init).unwrap()).collect(),
        training_meta: TrainingMeta::default(),
    };
    let g = GeometryCode::empty();
    let mut cub_rng = rng::stream(1, rng::STREAM_CUBATURE, 0);
    let cubature = sample_domain(family.as_ref(), &g, n, &mut cub_rng).unwrap();

    let (mut t_fwd, mut t_known, mut t_proj, mut t_loss, mut t_bwd) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..reps {
        let mut tape = Tape::new(1);
        let t0 = Instant::now();
        let feat = chain::tape_features(&mut tape, &set, GeometrySource::Fixed(&g), &cubature.points, n).unwrap();
        let (raws, _params) = chain::tape_raw_modes(&mut tape, &set, feat).unwrap();
        t_fwd += t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let mut known = vec![known_mode_values(OperatorKind::Laplace, 1, 0, &[0.5], &cubature.points, n, 1)];
        project::orthonormalize(&mut known, "known").unwrap();
        let mut prefix = vec![tape
            .constant_with_tangents(known[0].rows, known[0].cols, known[0].value.clone(), known[0].tan.clone())
            .unwrap()];
        t_known += t0.elapsed().as_secs_f64();

        for idx in 0..k {
            let t0 = Instant::now();
            let outcome = chain::tape_project_normalize(&mut tape, raws[idx], &prefix, true, false, "m").unwrap();
            t_proj += t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            let loss = chain::tape_mode_loss(&mut tape, &set, outcome.phi).unwrap();
            t_loss += t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            let _grads = tape.backward(loss).unwrap();
            t_bwd += t0.elapsed().as_secs_f64();
            let stopped = tape.stop_gradient(outcome.phi).unwrap();
            prefix.push(stopped);
        }
    }
    let per = 1000.0 / reps as f64;
    println!("forward: {:.2} ms  known: {:.2} ms  project: {:.2} ms  loss: {:.2} ms  backward: {:.2} ms",
        t_fwd * per, t_known * per, t_proj * per, t_loss * per, t_bwd * per);
}
