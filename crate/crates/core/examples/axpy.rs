use std::time::Instant;

fn main() {
    let n = 1500;
    let mut y = vec![0.0f64; n];
    let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
    let reps = 2_000_000;
    let t0 = Instant::now();
    let mut w = 1.0000001;
    for _ in 0..reps {
        for j in 0..n {
            y[j] += w * x[j];
        }
        w *= 0.9999999;
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("axpy n=1500: {:.2} GFlops  [{:.3}]", 2.0 * (n * reps) as f64 / dt / 1e9, y[7]);

    // independent 4-lane dot
    let reps = 2_000_000;
    let t0 = Instant::now();
    let mut acc = [0.0f64; 4];
    for r in 0..reps {
        let mut a = [0.0f64; 4];
        let mut j = 0;
        while j + 4 <= n {
            for l in 0..4 { a[l] += x[j + l] * x[(j + l + r % 7) % n]; }
            j += 4;
        }
        for l in 0..4 { acc[l] += a[l]; }
    }
    let dt = t0.elapsed().as_secs_f64();
    println!("blocked dot: {:.2} GFlops [{:.3}]", 2.0 * (n * reps) as f64 / dt / 1e9, acc[0]);
}
