use std::time::Instant;
use specfield::autodiff::kernels;

fn main() {
    let n = 1500; let iw = 40; let ow = 40;
    let x: Vec<f64> = (0..n*iw).map(|i| (i as f64* 0.001).sin()*0.5).collect();
    let w: Vec<f64> = (0..ow*iw).map(|i| (i as f64 * 0.01).cos()*0.3).collect();
    let b = vec![0.1; ow];
    let mut y = vec![0.0; n*ow];
    let reps = 200;

    let t0 = Instant::now();
    for _ in 0..reps { kernels::linear_value(&x, n, iw, &w, ow, &b, &mut y); }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    println!("linear_value 1500x40x40: {:.3} ms ({:.2} GFlops)", dt*1e3, 2.0*(n*iw*ow) as f64/dt/1e9);

    let mut xadj = vec![0.0; n*iw];
    let t0 = Instant::now();
    for _ in 0..reps { kernels::linear_backprop_input(&y, n, ow, &w, iw, &mut xadj); }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    println!("backprop_input: {:.3} ms ({:.2} GFlops)", dt*1e3, 2.0*(n*iw*ow) as f64/dt/1e9);

    let mut wadj = vec![0.0; ow*iw];
    let t0 = Instant::now();
    for _ in 0..reps { kernels::linear_backprop_weight(&y, n, ow, &x, iw, &mut wadj); }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    println!("backprop_weight: {:.3} ms ({:.2} GFlops)", dt*1e3, 2.0*(n*iw*ow) as f64/dt/1e9);

    // sin_cos throughput
    let mut acc = 0.0;
    let t0 = Instant::now();
    for _ in 0..reps { for v in &x[..n*40] { let (s,c) = v.sin_cos(); acc += s+c; } }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    println!("sin_cos on 60k: {:.3} ms ({:.1} ns/elem)  [{acc:.1}]", dt*1e3, dt*1e9/(n*40) as f64);

    // plain elementwise mul
    let mut z = vec![0.0; n*ow];
    let t0 = Instant::now();
    for _ in 0..reps { for i in 0..n*ow { z[i] = y[i]*x[i]; } }
    let dt = t0.elapsed().as_secs_f64()/reps as f64;
    println!("elementwise mul 60k: {:.3} ms", dt*1e3);
}
