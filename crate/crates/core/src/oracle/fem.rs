//! Linear-triangle small-strain elastic stiffness with lumped mass.
//!
//! The assembled quadratic form matches the continuous one used by the
//! neural side: `v^T K v = integral of mu |S|_F^2 + (lambda/2) tr^2(S)`
//! with `S = grad(phi) + grad(phi)^T`, exact for piecewise-linear fields.

use crate::error::Result;
use crate::field::ElasticityParams;
use crate::oracle::mesh::TriMesh;

/// Dense `2m x 2m` stiffness and `2m` diagonal mass. DOF layout is
/// `(x_0, y_0, x_1, y_1, ...)`.
pub fn fem_elastic_stiffness(mesh: &TriMesh, params: ElasticityParams) -> Result<(Vec<f64>, Vec<f64>)> {
    mesh.validate()?;
    let m = mesh.vertex_count();
    let dof = 2 * m;
    let mut stiffness = vec![0.0; dof * dof];
    let mut mass = vec![0.0; dof];

    // Strain-vector material matrix for s = (S_xx, S_yy, S_xy):
    // s^T D s = mu (S_xx^2 + S_yy^2 + 2 S_xy^2) + (lambda/2) (S_xx + S_yy)^2.
    let d = [
        [params.mu + 0.5 * params.lambda, 0.5 * params.lambda, 0.0],
        [0.5 * params.lambda, params.mu + 0.5 * params.lambda, 0.0],
        [0.0, 0.0, 2.0 * params.mu],
    ];

    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        let p: Vec<[f64; 2]> = tri.iter().map(|v| mesh.vertex(*v)).collect();
        // Linear shape function gradients.
        let mut grad = [[0.0f64; 2]; 3];
        for corner in 0..3 {
            let b = p[(corner + 1) % 3];
            let c = p[(corner + 2) % 3];
            grad[corner][0] = (b[1] - c[1]) / (2.0 * area);
            grad[corner][1] = (c[0] - b[0]) / (2.0 * area);
        }
        // B maps the six local displacements to the strain vector.
        let mut bmat = [[0.0f64; 6]; 3];
        for corner in 0..3 {
            bmat[0][2 * corner] = 2.0 * grad[corner][0];
            bmat[1][2 * corner + 1] = 2.0 * grad[corner][1];
            bmat[2][2 * corner] = grad[corner][1];
            bmat[2][2 * corner + 1] = grad[corner][0];
        }
        // K_e = area * B^T D B.
        let mut ke = [[0.0f64; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = 0.0;
                for r in 0..3 {
                    for s in 0..3 {
                        acc += bmat[r][i] * d[r][s] * bmat[s][j];
                    }
                }
                ke[i][j] = area * acc;
            }
        }
        for i in 0..6 {
            let gi = 2 * tri[i / 2] + i % 2;
            for j in 0..6 {
                let gj = 2 * tri[j / 2] + j % 2;
                stiffness[gi * dof + gj] += ke[i][j];
            }
        }
        for corner in 0..3 {
            mass[2 * tri[corner]] += area / 3.0;
            mass[2 * tri[corner] + 1] += area / 3.0;
        }
    }
    Ok((stiffness, mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mesh::rect_grid_mesh;

    const PARAMS: ElasticityParams = ElasticityParams { mu: 1.0, lambda: 1.0 };

    fn quadratic_form(k: &[f64], u: &[f64]) -> f64 {
        let n = u.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += u[i] * k[i * n + j] * u[j];
            }
        }
        acc
    }

    #[test]
    fn translations_are_in_the_null_space() {
        let mesh = rect_grid_mesh(4, 4, 1.0, 1.0);
        let (k, _) = fem_elastic_stiffness(&mesh, PARAMS).unwrap();
        let dof = 2 * mesh.vertex_count();
        let mut u = vec![0.0; dof];
        u.iter_mut().step_by(2).for_each(|v| *v = 1.0);
        assert!(quadratic_form(&k, &u).abs() < 1e-10);
    }

    #[test]
    fn linearized_rotation_is_in_the_null_space() {
        let mesh = rect_grid_mesh(4, 4, 1.0, 1.0);
        let (k, _) = fem_elastic_stiffness(&mesh, PARAMS).unwrap();
        let m = mesh.vertex_count();
        let mut u = vec![0.0; 2 * m];
        for i in 0..m {
            let v = mesh.vertex(i);
            u[2 * i] = -(v[1] - 0.5);
            u[2 * i + 1] = v[0] - 0.5;
        }
        assert!(quadratic_form(&k, &u).abs() < 1e-10);
    }

    #[test]
    fn uniform_dilation_energy_matches_the_continuous_density() {
        // phi = x: S = 2I, half the quadratic form is 8 per unit area.
        let mesh = rect_grid_mesh(3, 3, 1.0, 1.0);
        let (k, _) = fem_elastic_stiffness(&mesh, PARAMS).unwrap();
        let m = mesh.vertex_count();
        let mut u = vec![0.0; 2 * m];
        for i in 0..m {
            let v = mesh.vertex(i);
            u[2 * i] = v[0];
            u[2 * i + 1] = v[1];
        }
        let energy = 0.5 * quadratic_form(&k, &u);
        assert!((energy - 8.0 * mesh.total_area()).abs() < 1e-9, "{energy}");
    }
}
