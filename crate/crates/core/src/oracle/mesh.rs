//! Planar triangle meshes for the discrete reference operators.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TriMesh {
    /// `m x 2`, row-major.
    pub vertices: Vec<f64>,
    pub triangles: Vec<[usize; 3]>,
}

const DEGENERATE_AREA: f64 = 1e-14;

impl TriMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len() / 2
    }

    pub fn vertex(&self, i: usize) -> [f64; 2] {
        [self.vertices[2 * i], self.vertices[2 * i + 1]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertex(a);
        let pb = self.vertex(b);
        let pc = self.vertex(c);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Index bounds, positive orientation, and non-degeneracy.
    pub fn validate(&self) -> Result<()> {
        let m = self.vertex_count();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|i| *i >= m) {
                return Err(Error::Parse(format!("triangle {t} references a vertex out of range")));
            }
            let area = self.signed_area(t);
            if area.abs() < DEGENERATE_AREA {
                return Err(Error::Parse(format!("degenerate triangle {t} (area {area:.3e})")));
            }
            if area < 0.0 {
                return Err(Error::Parse(format!("triangle {t} is negatively oriented")));
            }
        }
        Ok(())
    }

    /// Flip any negatively oriented triangles in place.
    pub fn orient(&mut self) {
        for t in 0..self.triangles.len() {
            if self.signed_area(t) < 0.0 {
                self.triangles[t].swap(1, 2);
            }
        }
    }

    pub fn load_off(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_off(&text)
    }

    /// ASCII OFF. Vertices may carry a third coordinate; it must be zero
    /// (planar meshes only) and is dropped.
    pub fn parse_off(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>());
        let header = tokens.next().ok_or_else(|| Error::Parse("empty OFF file".into()))?;
        if header != "OFF" {
            return Err(Error::Parse(format!("expected OFF header, got '{header}'")));
        }
        let mut next_usize = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("OFF: missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("OFF: bad {what}: {e}")))
        };
        let nv = next_usize("vertex count")?;
        let nf = next_usize("face count")?;
        let _ne = next_usize("edge count")?;

        // Read the remaining numeric tokens in one stream; vertex lines have
        // either 2 or 3 coordinates, detected from the token budget.
        let rest: Vec<String> = tokens.collect();
        let face_tokens: usize = {
            // Each face line is "3 a b c".
            4 * nf
        };
        if rest.len() < face_tokens {
            return Err(Error::Parse("OFF: truncated face list".into()));
        }
        let vertex_tokens = rest.len() - face_tokens;
        let per_vertex = if vertex_tokens == 3 * nv {
            3
        } else if vertex_tokens == 2 * nv {
            2
        } else {
            return Err(Error::Parse(format!(
                "OFF: {vertex_tokens} vertex tokens for {nv} vertices (expected 2 or 3 each)"
            )));
        };
        let mut vertices = Vec::with_capacity(2 * nv);
        for v in 0..nv {
            let x: f64 = rest[v * per_vertex]
                .parse()
                .map_err(|e| Error::Parse(format!("OFF vertex {v}: {e}")))?;
            let y: f64 = rest[v * per_vertex + 1]
                .parse()
                .map_err(|e| Error::Parse(format!("OFF vertex {v}: {e}")))?;
            if per_vertex == 3 {
                let z: f64 = rest[v * per_vertex + 2]
                    .parse()
                    .map_err(|e| Error::Parse(format!("OFF vertex {v}: {e}")))?;
                if z.abs() > 1e-9 {
                    return Err(Error::Parse(format!("OFF vertex {v}: nonplanar z = {z}")));
                }
            }
            vertices.push(x);
            vertices.push(y);
        }
        let mut triangles = Vec::with_capacity(nf);
        let base = nv * per_vertex;
        for f in 0..nf {
            let arity: usize = rest[base + 4 * f]
                .parse()
                .map_err(|e| Error::Parse(format!("OFF face {f}: {e}")))?;
            if arity != 3 {
                return Err(Error::Parse(format!("OFF face {f}: only triangles supported, got {arity}")));
            }
            let mut tri = [0usize; 3];
            for (s, t) in tri.iter_mut().enumerate() {
                *t = rest[base + 4 * f + 1 + s]
                    .parse()
                    .map_err(|e| Error::Parse(format!("OFF face {f}: {e}")))?;
            }
            triangles.push(tri);
        }
        let mut mesh = TriMesh { vertices, triangles };
        mesh.orient();
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn save_off(&self, path: &Path) -> Result<()> {
        let mut out = String::from("OFF\n");
        out.push_str(&format!("{} {} 0\n", self.vertex_count(), self.triangles.len()));
        for i in 0..self.vertex_count() {
            let v = self.vertex(i);
            out.push_str(&format!("{} {} 0\n", v[0], v[1]));
        }
        for tri in &self.triangles {
            out.push_str(&format!("3 {} {} {}\n", tri[0], tri[1], tri[2]));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Structured grid mesh of `[0,w] x [0,h]`, `(nx+1)(ny+1)` vertices, each
/// cell split along its diagonal.
pub fn rect_grid_mesh(nx: usize, ny: usize, w: f64, h: f64) -> TriMesh {
    let mut vertices = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(w * i as f64 / nx as f64);
            vertices.push(h * j as f64 / ny as f64);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh { vertices, triangles }
}

/// Disk mesh from concentric rings (ring `r` carries `6r` vertices),
/// stitched ring to ring by angle.
pub fn disk_mesh(rings: usize, radius: f64) -> TriMesh {
    assert!(rings >= 1);
    let mut vertices = vec![0.0, 0.0];
    let mut ring_start = vec![0usize; rings + 1];
    for r in 1..=rings {
        ring_start[r] = vertices.len() / 2;
        let count = 6 * r;
        let rad = radius * r as f64 / rings as f64;
        for k in 0..count {
            let theta = std::f64::consts::TAU * k as f64 / count as f64;
            vertices.push(rad * theta.cos());
            vertices.push(rad * theta.sin());
        }
    }
    let mut triangles = Vec::new();
    // Innermost fan.
    for k in 0..6 {
        triangles.push([0, ring_start[1] + k, ring_start[1] + (k + 1) % 6]);
    }
    // Stitch consecutive rings by advancing the pointer with the smaller
    // next angle.
    for r in 1..rings {
        let (inner_n, outer_n) = (6 * r, 6 * (r + 1));
        let (is, os) = (ring_start[r], ring_start[r + 1]);
        let angle = |k: usize, n: usize| std::f64::consts::TAU * k as f64 / n as f64;
        let (mut i, mut o) = (0usize, 0usize);
        while i < inner_n || o < outer_n {
            let inner_next = angle(i + 1, inner_n);
            let outer_next = angle(o + 1, outer_n);
            let iv = is + i % inner_n;
            let ov = os + o % outer_n;
            if o < outer_n && (i == inner_n || outer_next <= inner_next) {
                let ov2 = os + (o + 1) % outer_n;
                triangles.push([iv, ov, ov2]);
                o += 1;
            } else {
                let iv2 = is + (i + 1) % inner_n;
                triangles.push([iv, ov, iv2]);
                i += 1;
            }
        }
    }
    let mut mesh = TriMesh { vertices, triangles };
    mesh.orient();
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_mesh_covers_the_rectangle() {
        let mesh = rect_grid_mesh(8, 4, 1.0, 0.5);
        mesh.validate().unwrap();
        assert_eq!(mesh.vertex_count(), 9 * 5);
        assert!((mesh.total_area() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disk_mesh_area_approaches_pi() {
        let mesh = disk_mesh(12, 1.0);
        mesh.validate().unwrap();
        let area = mesh.total_area();
        // Inscribed polygon area of a 72-gon rim.
        assert!(area > 3.10 && area < std::f64::consts::PI, "{area}");
    }

    #[test]
    fn disk_mesh_vertex_budget() {
        // 1 + sum 6r = 1 + 3 R (R+1) vertices.
        let mesh = disk_mesh(22, 1.0);
        assert_eq!(mesh.vertex_count(), 1 + 3 * 22 * 23);
    }

    #[test]
    fn off_round_trip_and_z_rejection() {
        let mesh = rect_grid_mesh(2, 2, 1.0, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.off");
        mesh.save_off(&path).unwrap();
        let loaded = TriMesh::load_off(&path).unwrap();
        assert_eq!(loaded.vertex_count(), mesh.vertex_count());
        assert_eq!(loaded.triangles, mesh.triangles);

        let bad = "OFF\n3 1 0\n0 0 0.5\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert!(matches!(TriMesh::parse_off(bad), Err(Error::Parse(_))));
    }

    #[test]
    fn degenerate_triangle_is_named() {
        let mesh = TriMesh {
            vertices: vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0],
            triangles: vec![[0, 1, 2]],
        };
        let err = mesh.validate().unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("triangle 0"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
