//! Cotangent Laplacian with lumped (area-third) mass on triangle meshes.

use crate::error::Result;
use crate::oracle::mesh::TriMesh;

/// Dense stiffness matrix and diagonal lumped mass.
///
/// Edge weights are the usual half cotangent sums; the stiffness is
/// symmetric positive semidefinite with the constant vector in its null
/// space.
pub fn cotan_laplacian(mesh: &TriMesh) -> Result<(Vec<f64>, Vec<f64>)> {
    mesh.validate()?;
    let m = mesh.vertex_count();
    let mut stiffness = vec![0.0; m * m];
    let mut mass = vec![0.0; m];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        for corner in 0..3 {
            mass[tri[corner]] += area / 3.0;
            // Cotangent at `corner` weights the opposite edge.
            let c = mesh.vertex(tri[corner]);
            let a = mesh.vertex(tri[(corner + 1) % 3]);
            let b = mesh.vertex(tri[(corner + 2) % 3]);
            let u = [a[0] - c[0], a[1] - c[1]];
            let v = [b[0] - c[0], b[1] - c[1]];
            let cot = (u[0] * v[0] + u[1] * v[1]) / (2.0 * area);
            let w = 0.5 * cot;
            let (i, j) = (tri[(corner + 1) % 3], tri[(corner + 2) % 3]);
            stiffness[i * m + j] -= w;
            stiffness[j * m + i] -= w;
            stiffness[i * m + i] += w;
            stiffness[j * m + j] += w;
        }
    }
    Ok((stiffness, mass))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mesh::{disk_mesh, rect_grid_mesh};

    fn equilateral() -> TriMesh {
        TriMesh {
            vertices: vec![0.0, 0.0, 1.0, 0.0, 0.5, 3f64.sqrt() / 2.0],
            triangles: vec![[0, 1, 2]],
        }
    }

    #[test]
    fn equilateral_edge_weight_is_half_cot_sixty() {
        let (l, _) = cotan_laplacian(&equilateral()).unwrap();
        let expect = 0.5 / 3f64.sqrt(); // cot(60 deg) / 2
        for (i, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
            assert!((l[i * 3 + j] + expect).abs() < 1e-12, "edge ({i},{j})");
        }
    }

    #[test]
    fn constants_are_in_the_null_space() {
        let mesh = disk_mesh(5, 1.0);
        let m = mesh.vertex_count();
        let (l, _) = cotan_laplacian(&mesh).unwrap();
        for i in 0..m {
            let row_sum: f64 = l[i * m..(i + 1) * m].iter().sum();
            assert!(row_sum.abs() < 1e-12, "row {i}: {row_sum}");
        }
    }

    #[test]
    fn lumped_mass_partitions_the_area() {
        let mesh = rect_grid_mesh(6, 3, 2.0, 1.0);
        let (_, mass) = cotan_laplacian(&mesh).unwrap();
        let total: f64 = mass.iter().sum();
        assert!((total - mesh.total_area()).abs() < 1e-12);
    }

    #[test]
    fn stiffness_is_symmetric() {
        let mesh = disk_mesh(4, 1.0);
        let m = mesh.vertex_count();
        let (l, _) = cotan_laplacian(&mesh).unwrap();
        for i in 0..m {
            for j in 0..m {
                assert!((l[i * m + j] - l[j * m + i]).abs() < 1e-12);
            }
        }
    }
}
