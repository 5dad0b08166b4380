//! Closed-form Neumann spectra for verification.

use std::f64::consts::PI;

/// Eigenvalue of mode `i` of the negative second derivative on `[0,1]`
/// with natural boundary conditions: `(i pi)^2`.
pub fn interval_eigenvalue(i: usize) -> f64 {
    let w = i as f64 * PI;
    w * w
}

/// Unit-norm eigenfunction of mode `i` on `[0,1]`: the constant for `i = 0`,
/// `sqrt(2) cos(i pi x)` above.
pub fn interval_mode(i: usize, x: f64) -> f64 {
    if i == 0 {
        1.0
    } else {
        2f64.sqrt() * (i as f64 * PI * x).cos()
    }
}

/// Separable Neumann eigenvalues of the unit-width rectangle `[0,1] x [0,h]`:
/// `lambda(m, n) = pi^2 (m^2 + n^2 / h^2)`, ascending with their index pair.
pub fn analytic_rectangle_modes(h: f64, count: usize) -> Vec<(f64, (u32, u32))> {
    assert!(h > 0.0);
    let cap = count as u32 + 2;
    let mut modes = Vec::new();
    for m in 0..=cap {
        for n in 0..=cap {
            let lambda = PI * PI * (m as f64 * m as f64 + (n as f64 * n as f64) / (h * h));
            modes.push((lambda, (m, n)));
        }
    }
    modes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    modes.truncate(count);
    modes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_spectrum() {
        assert_eq!(interval_eigenvalue(0), 0.0);
        assert!((interval_eigenvalue(1) - PI * PI).abs() < 1e-12);
        assert!((interval_mode(2, 0.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unit_square_has_a_double_eigenvalue() {
        let modes = analytic_rectangle_modes(1.0, 4);
        assert_eq!(modes[0].0, 0.0);
        assert!((modes[1].0 - PI * PI).abs() < 1e-12);
        assert!((modes[2].0 - PI * PI).abs() < 1e-12);
        let pairs: Vec<(u32, u32)> = modes[1..3].iter().map(|m| m.1).collect();
        assert!(pairs.contains(&(1, 0)) && pairs.contains(&(0, 1)));
    }

    #[test]
    fn tall_rectangle_orders_the_vertical_branch_first() {
        let modes = analytic_rectangle_modes(2.0, 3);
        assert_eq!(modes[1].1, (0, 1));
        assert!((modes[1].0 - PI * PI / 4.0).abs() < 1e-12);
        // (1,0) ties with (0,2) at h = 2; either may come third.
        assert!((modes[2].0 - PI * PI).abs() < 1e-12);
        assert!(modes[2].1 == (1, 0) || modes[2].1 == (0, 2));
    }
}
