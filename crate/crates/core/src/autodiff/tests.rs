use super::*;
use crate::rng;
use rand::Rng;

fn grad_of(grads: &HashMap<usize, Vec<f64>>, id: NodeId) -> f64 {
    grads.get(&id.0).map(|g| g[0]).unwrap_or(0.0)
}

#[test]
fn sin_at_zero_has_unit_tangent() {
    let (tape, _, out) = eval_with_tangents(1, &[0.0], &[1.0], |t, x| t.sin(x)).unwrap();
    assert_eq!(tape.value(out), &[0.0]);
    assert_eq!(tape.tangent(out, 0), &[1.0]);
}

#[test]
fn constants_have_zero_tangents_in_every_direction() {
    let mut tape = Tape::new(3);
    let c = tape.scalar(4.25).unwrap();
    for w in 0..3 {
        assert_eq!(tape.tangent(c, w), &[0.0]);
    }
}

#[test]
fn nested_derivative_of_theta_x_squared() {
    // f = theta * x^2 at theta = 1, x = 1; loss = (df/dx)^2 = (2 theta x)^2.
    // d(loss)/d(theta) = 2 * (2 theta x) * (2 x) = 8.
    let mut tape = Tape::new(1);
    let x = tape.input(1, 1, vec![1.0], vec![1.0]).unwrap();
    let theta = tape.param(1, 1, vec![1.0]).unwrap();
    let x2 = tape.mul(x, x).unwrap();
    let f = tape.mul(theta, x2).unwrap();
    let loss = tape.tangent_sq_sum(f, 0, 1).unwrap();
    let grads = tape.backward(loss).unwrap();
    assert!((grad_of(&grads, theta) - 8.0).abs() < 1e-14);

    // Central finite differences over theta on the same loss.
    let h = 1e-6;
    let loss_at = |th: f64| {
        let mut t = Tape::new(1);
        let x = t.input(1, 1, vec![1.0], vec![1.0]).unwrap();
        let theta = t.param(1, 1, vec![th]).unwrap();
        let x2 = t.mul(x, x).unwrap();
        let f = t.mul(theta, x2).unwrap();
        let l = t.tangent_sq_sum(f, 0, 1).unwrap();
        t.value(l)[0]
    };
    let fd = (loss_at(1.0 + h) - loss_at(1.0 - h)) / (2.0 * h);
    assert!((fd - 8.0).abs() < 1e-6);
}

#[test]
fn product_rule_gradients() {
    let mut tape = Tape::new(0);
    let a = tape.param(1, 1, vec![2.0]).unwrap();
    let b = tape.param(1, 1, vec![3.0]).unwrap();
    let loss = tape.mul(a, b).unwrap();
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grad_of(&grads, a), 3.0);
    assert_eq!(grad_of(&grads, b), 2.0);
}

#[test]
fn stop_gradient_blocks_one_factor() {
    let mut tape = Tape::new(0);
    let a = tape.param(1, 1, vec![2.0]).unwrap();
    let b = tape.param(1, 1, vec![3.0]).unwrap();
    let sa = tape.stop_gradient(a).unwrap();
    let loss = tape.mul(sa, b).unwrap();
    let grads = tape.backward(loss).unwrap();
    // Zero-flow is exact: the blocked parameter never appears.
    assert_eq!(grad_of(&grads, a), 0.0);
    assert_eq!(grad_of(&grads, b), 2.0);
}

#[test]
fn stop_gradient_keeps_primal() {
    let mut tape = Tape::new(0);
    let c = tape.scalar(5.0).unwrap();
    let s = tape.stop_gradient(c).unwrap();
    assert_eq!(tape.value(s), &[5.0]);
}

#[test]
fn stopped_square_has_zero_derivative() {
    // d(stop(x)^2)/dx = 0 through both the tangent and the reverse path.
    let mut tape = Tape::new(1);
    let x = tape.input(1, 1, vec![3.0], vec![1.0]).unwrap();
    let s = tape.stop_gradient(x).unwrap();
    let y = tape.mul(s, s).unwrap();
    assert_eq!(tape.tangent(y, 0), &[0.0]);

    let mut tape = Tape::new(0);
    let x = tape.param(1, 1, vec![3.0]).unwrap();
    let s = tape.stop_gradient(x).unwrap();
    let y = tape.mul(s, s).unwrap();
    let grads = tape.backward(y).unwrap();
    assert_eq!(grad_of(&grads, x), 0.0);
}

#[test]
fn partially_stopped_product_keeps_unmarked_path() {
    // d(x * stop(x))/dx at x = 3 is 3: only the unmarked factor contributes.
    let mut tape = Tape::new(1);
    let x = tape.input(1, 1, vec![3.0], vec![1.0]).unwrap();
    let s = tape.stop_gradient(x).unwrap();
    let y = tape.mul(x, s).unwrap();
    assert_eq!(tape.tangent(y, 0), &[3.0]);

    let mut tape = Tape::new(0);
    let x = tape.param(1, 1, vec![3.0]).unwrap();
    let s = tape.stop_gradient(x).unwrap();
    let y = tape.mul(x, s).unwrap();
    let grads = tape.backward(y).unwrap();
    assert_eq!(grad_of(&grads, x), 3.0);
}

#[test]
fn replay_is_bit_identical() {
    let build = || {
        let mut tape = Tape::new(2);
        let x = tape
            .input(1, 2, vec![0.3, -0.7], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap();
        let s = tape.sin(x).unwrap();
        let e = tape.exp(s).unwrap();
        let t = tape.tanh(e).unwrap();
        let y = tape.sum_all(t).unwrap();
        (tape.value(y).to_vec(), tape.tangent(t, 1).to_vec())
    };
    let (v1, t1) = build();
    let (v2, t2) = build();
    assert_eq!(v1, v2);
    assert_eq!(t1, t2);
}

#[test]
fn non_finite_intermediate_reports_node() {
    let mut tape = Tape::new(0);
    let a = tape.scalar(1.0).unwrap();
    let z = tape.scalar(0.0).unwrap();
    let err = tape.div(a, z).unwrap_err();
    match err {
        Error::Numeric(msg) => assert!(msg.contains("node"), "{msg}"),
        other => panic!("expected numeric failure, got {other:?}"),
    }
}

#[test]
fn backward_rejects_non_scalar_seed() {
    let mut tape = Tape::new(0);
    let x = tape.param(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
    assert!(matches!(tape.backward(x), Err(Error::InvalidConfig(_))));
}

// Reverse-mode derivative of each elementary op against central differences.
#[test]
fn elementary_ops_match_finite_differences() {
    let mut rng = rng::stream(11, "fd-ops", 0);
    let h = 1e-6;
    let check = |df: f64, fd: f64, what: &str| {
        let rel = (df - fd).abs() / df.abs().max(1.0);
        assert!(rel < 1e-6, "{what}: reverse {df} vs fd {fd} (rel {rel:.2e})");
    };

    type Builder = fn(&mut Tape, NodeId, NodeId) -> Result<NodeId>;
    type Scalar = fn(f64, f64) -> f64;
    let binaries: [(&str, Builder, Scalar); 4] = [
        ("add", |t, a, b| t.add(a, b), |x, y| x + y),
        ("sub", |t, a, b| t.sub(a, b), |x, y| x - y),
        ("mul", |t, a, b| t.mul(a, b), |x, y| x * y),
        ("div", |t, a, b| t.div(a, b), |x, y| x / y),
    ];
    for (name, build, eval) in binaries {
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let mut y: f64 = rng.gen_range(0.5..3.0);
            if rng.gen::<bool>() {
                y = -y;
            }
            let mut tape = Tape::new(0);
            let a = tape.param(1, 1, vec![x]).unwrap();
            let b = tape.param(1, 1, vec![y]).unwrap();
            let out = build(&mut tape, a, b).unwrap();
            let grads = tape.backward(out).unwrap();
            check(grad_of(&grads, a), (eval(x + h, y) - eval(x - h, y)) / (2.0 * h), name);
            check(grad_of(&grads, b), (eval(x, y + h) - eval(x, y - h)) / (2.0 * h), name);
        }
    }

    type UBuilder = fn(&mut Tape, NodeId) -> Result<NodeId>;
    type UScalar = fn(f64) -> f64;
    let unaries: [(&str, UBuilder, UScalar); 5] = [
        ("sin", |t, a| t.sin(a), f64::sin),
        ("cos", |t, a| t.cos(a), f64::cos),
        ("exp", |t, a| t.exp(a), f64::exp),
        ("tanh", |t, a| t.tanh(a), f64::tanh),
        ("softplus", |t, a| t.softplus(a), softplus),
    ];
    for (name, build, eval) in unaries {
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let mut tape = Tape::new(0);
            let a = tape.param(1, 1, vec![x]).unwrap();
            let out = build(&mut tape, a).unwrap();
            let grads = tape.backward(out).unwrap();
            check(grad_of(&grads, a), (eval(x + h) - eval(x - h)) / (2.0 * h), name);
        }
    }

    for p in [2.0, 3.0, 0.5, -0.5, -1.0] {
        for _ in 0..100 {
            let x: f64 = rng.gen_range(0.3..3.0);
            let mut tape = Tape::new(0);
            let a = tape.param(1, 1, vec![x]).unwrap();
            let out = tape.powc(a, p).unwrap();
            let grads = tape.backward(out).unwrap();
            let fd = ((x + h).powf(p) - (x - h).powf(p)) / (2.0 * h);
            check(grad_of(&grads, a), fd, "pow");
        }
    }
}

// Mixed second derivative d/dtheta (df/dx) for cubic polynomials is exact.
//
// The engine exposes it through d/dtheta of (df/dx)^2 = 2 (df/dx) f_xtheta,
// checked against the closed-form cross derivative with exact integer
// arithmetic so the comparison is bitwise.
#[test]
fn mixed_derivatives_of_cubics_are_exact() {
    let mut rng = rng::stream(13, "mixed", 0);
    for _ in 0..50 {
        // f(theta, x) = a*theta*x^3 + b*theta*x + c*x^2 + d*theta^2*x
        let a: f64 = rng.gen_range(-3i32..=3) as f64;
        let b: f64 = rng.gen_range(-3i32..=3) as f64;
        let c: f64 = rng.gen_range(-3i32..=3) as f64;
        let d: f64 = rng.gen_range(-3i32..=3) as f64;
        let xv: f64 = rng.gen_range(1i32..=3) as f64;
        let tv: f64 = rng.gen_range(1i32..=3) as f64;

        // df/dx = 3a*theta*x^2 + b*theta + 2c*x + d*theta^2
        let fx = 3.0 * a * tv * xv * xv + b * tv + 2.0 * c * xv + d * tv * tv;
        if fx == 0.0 {
            continue;
        }
        // d2f/(dx dtheta) = 3a*x^2 + b + 2d*theta
        let cross_exact = 3.0 * a * xv * xv + b + 2.0 * d * tv;

        let mut tape = Tape::new(1);
        let x = tape.input(1, 1, vec![xv], vec![1.0]).unwrap();
        let theta = tape.param(1, 1, vec![tv]).unwrap();
        let ca = tape.scalar(a).unwrap();
        let cb = tape.scalar(b).unwrap();
        let cc = tape.scalar(c).unwrap();
        let cd = tape.scalar(d).unwrap();

        let x2 = tape.mul(x, x).unwrap();
        let x3 = tape.mul(x2, x).unwrap();
        let t2 = tape.mul(theta, theta).unwrap();

        let tx3 = tape.mul(theta, x3).unwrap();
        let term1 = tape.mul(ca, tx3).unwrap();
        let tx = tape.mul(theta, x).unwrap();
        let term2 = tape.mul(cb, tx).unwrap();
        let term3 = tape.mul(cc, x2).unwrap();
        let t2x = tape.mul(t2, x).unwrap();
        let term4 = tape.mul(cd, t2x).unwrap();
        let f = {
            let s1 = tape.add(term1, term2).unwrap();
            let s2 = tape.add(term3, term4).unwrap();
            tape.add(s1, s2).unwrap()
        };
        assert_eq!(tape.tangent(f, 0), &[fx]);

        let loss = tape.tangent_sq_sum(f, 0, 1).unwrap();
        let grads = tape.backward(loss).unwrap();
        let cross_engine = grad_of(&grads, theta) / (2.0 * fx);
        assert_eq!(cross_engine, cross_exact);
    }
}

// A two-layer tanh network: reverse gradients of the Dirichlet-style loss
// sum_j (dphi/dx)(x_j)^2 match finite differences over every weight.
#[test]
fn mlp_spatial_gradient_loss_matches_finite_differences() {
    let mut rng = rng::stream(17, "mlp-fd", 0);
    let n = 16;
    let hidden = 5;
    let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w1: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b1: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let w2: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b2: Vec<f64> = vec![rng.gen_range(-0.5..0.5)];

    let eval_loss = |w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]| -> (f64, Option<HashMap<usize, Vec<f64>>>, Vec<NodeId>) {
        let mut tape = Tape::new(1);
        let seeds = vec![1.0; n];
        let x = tape.input(n, 1, xs.clone(), seeds).unwrap();
        let pw1 = tape.param(hidden, 1, w1.to_vec()).unwrap();
        let pb1 = tape.param(1, hidden, b1.to_vec()).unwrap();
        let pw2 = tape.param(1, hidden, w2.to_vec()).unwrap();
        let pb2 = tape.param(1, 1, b2.to_vec()).unwrap();
        let h = tape.linear(x, pw1, pb1).unwrap();
        let h = tape.tanh(h).unwrap();
        let out = tape.linear(h, pw2, pb2).unwrap();
        let integrand = tape.tangent_sq_sum(out, 0, 1).unwrap();
        let loss = tape.sum_all(integrand).unwrap();
        let grads = tape.backward(loss).unwrap();
        let v = tape.value(loss)[0];
        (v, Some(grads), vec![pw1, pb1, pw2, pb2])
    };

    let (_, grads, ids) = eval_loss(&w1, &b1, &w2, &b2);
    let grads = grads.unwrap();
    let h = 1e-5;
    let check = |vec_idx: usize, comp: usize| {
        let mut lo = [w1.clone(), b1.clone(), w2.clone(), b2.clone()];
        let mut hi = lo.clone();
        lo[vec_idx][comp] -= h;
        hi[vec_idx][comp] += h;
        let (flo, _, _) = eval_loss(&lo[0], &lo[1], &lo[2], &lo[3]);
        let (fhi, _, _) = eval_loss(&hi[0], &hi[1], &hi[2], &hi[3]);
        let fd = (fhi - flo) / (2.0 * h);
        let got = grads[&ids[vec_idx].0][comp];
        let rel = (got - fd).abs() / fd.abs().max(1.0);
        assert!(rel < 1e-5, "param {vec_idx}[{comp}]: {got} vs fd {fd}");
    };
    for c in 0..hidden {
        check(0, c);
        check(1, c);
        check(2, c);
    }
    check(3, 0);
}

#[test]
fn strain_density_matches_rigid_and_dilation_cases() {
    // Rigid rotation Jacobian: J = [[0,-1],[1,0]], S = 0, density 0.
    // Feature-major planes: plane w holds channel blocks of length n.
    let mut tape = Tape::new(2);
    let n = 3;
    let value = vec![0.0; n * 2];
    let mut tan = vec![0.0; 2 * n * 2];
    for j in 0..n {
        // plane 0 = d/dx: (d phi_0/dx, d phi_1/dx) = (0, 1)
        tan[n + j] = 1.0;
        // plane 1 = d/dy: (d phi_0/dy, d phi_1/dy) = (-1, 0)
        tan[2 * n + j] = -1.0;
    }
    let f = tape.input(n, 2, value.clone(), tan).unwrap();
    let q = tape.strain_energy_density(f, 1.0, 1.0, true).unwrap();
    assert_eq!(tape.value(q), &[0.0, 0.0, 0.0]);

    // Uniform dilation J = I: S = 2I, |S|^2 = 8, tr S = 4,
    // half * (mu*8 + lambda/2*16) = 8 for mu = lambda = 1.
    let mut tape = Tape::new(2);
    let mut tan = vec![0.0; 2 * n * 2];
    for j in 0..n {
        tan[j] = 1.0; // plane 0, channel 0
        tan[2 * n + n + j] = 1.0; // plane 1, channel 1
    }
    let f = tape.input(n, 2, value, tan).unwrap();
    let q = tape.strain_energy_density(f, 1.0, 1.0, true).unwrap();
    assert_eq!(tape.value(q), &[8.0, 8.0, 8.0]);
}
