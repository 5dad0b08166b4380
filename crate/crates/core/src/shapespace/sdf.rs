//! Grid-sampled signed distance fields.
//!
//! Shell-type families threshold an SDF supplied as a regular grid with
//! bilinear (2D) or trilinear (3D) interpolation. Grids load from a little
//! endian binary layout or a CSV variant of the same content.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::shapespace::Aabb;

const MAGIC: &[u8; 4] = b"SDFG";

#[derive(Debug, Clone)]
pub struct SdfGrid {
    pub dim: usize,
    /// Grid points per axis, each at least 2.
    pub sizes: Vec<usize>,
    pub aabb: Aabb,
    /// Lexicographic over axes, last axis fastest.
    pub values: Vec<f64>,
}

impl SdfGrid {
    pub fn new(sizes: Vec<usize>, aabb: Aabb, values: Vec<f64>) -> Result<Self> {
        let dim = sizes.len();
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parse(format!("SDF grid must be 2D or 3D, got {dim} axes")));
        }
        if aabb.dim() != dim {
            return Err(Error::Parse("SDF grid AABB dimension mismatch".into()));
        }
        if sizes.iter().any(|s| *s < 2) {
            return Err(Error::Parse("SDF grid needs at least 2 points per axis".into()));
        }
        let expect: usize = sizes.iter().product();
        if values.len() != expect {
            return Err(Error::Parse(format!(
                "SDF grid expects {expect} values, got {}",
                values.len()
            )));
        }
        Ok(SdfGrid { dim, sizes, aabb, values })
    }

    /// Sample a closure on a regular grid. Test and fixture helper.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(sizes: Vec<usize>, aabb: Aabb, f: F) -> Result<Self> {
        let dim = sizes.len();
        let total: usize = sizes.iter().product();
        let mut values = vec![0.0; total];
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        for (flat, v) in values.iter_mut().enumerate() {
            let mut rest = flat;
            for a in (0..dim).rev() {
                idx[a] = rest % sizes[a];
                rest /= sizes[a];
            }
            for a in 0..dim {
                let t = idx[a] as f64 / (sizes[a] - 1) as f64;
                x[a] = aabb.lo[a] + t * (aabb.hi[a] - aabb.lo[a]);
            }
            *v = f(&x);
        }
        SdfGrid::new(sizes, aabb, values)
    }

    fn flat(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim {
            flat = flat * self.sizes[a] + idx[a];
        }
        flat
    }

    /// Interpolated SDF value; positive infinity outside the grid box.
    pub fn sample(&self, x: &[f64]) -> f64 {
        if !self.aabb.contains(x) {
            return f64::INFINITY;
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.dim {
            let extent = self.aabb.hi[a] - self.aabb.lo[a];
            let u = (x[a] - self.aabb.lo[a]) / extent * (self.sizes[a] - 1) as f64;
            let c = (u.floor() as usize).min(self.sizes[a] - 2);
            cell[a] = c;
            frac[a] = u - c as f64;
        }
        let mut acc = 0.0;
        let corners = 1usize << self.dim;
        let mut idx = vec![0usize; self.dim];
        for corner in 0..corners {
            let mut weight = 1.0;
            for a in 0..self.dim {
                let hi = (corner >> a) & 1 == 1;
                idx[a] = cell[a] + hi as usize;
                weight *= if hi { frac[a] } else { 1.0 - frac[a] };
            }
            acc += weight * self.values[self.flat(&idx)];
        }
        acc
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            Self::from_binary(&bytes)
        } else {
            Self::from_csv(std::str::from_utf8(&bytes).map_err(|_| {
                Error::Parse(format!("{}: neither binary SDF grid nor UTF-8 CSV", path.display()))
            })?)
        }
    }

    fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cursor = &bytes[4..];
        let mut u32buf = [0u8; 4];
        let mut f64buf = [0u8; 8];
        let mut read_u32 = |c: &mut &[u8]| -> Result<u32> {
            c.read_exact(&mut u32buf).map_err(|_| Error::Parse("truncated SDF grid".into()))?;
            Ok(u32::from_le_bytes(u32buf))
        };
        let version = read_u32(&mut cursor)?;
        if version != 1 {
            return Err(Error::Parse(format!("unsupported SDF grid version {version}")));
        }
        let dim = read_u32(&mut cursor)? as usize;
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parse(format!("SDF grid must be 2D or 3D, got {dim}")));
        }
        let mut sizes = Vec::with_capacity(dim);
        for _ in 0..dim {
            sizes.push(read_u32(&mut cursor)? as usize);
        }
        let mut read_f64 = |c: &mut &[u8]| -> Result<f64> {
            c.read_exact(&mut f64buf).map_err(|_| Error::Parse("truncated SDF grid".into()))?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..dim {
            lo.push(read_f64(&mut cursor)?);
        }
        for _ in 0..dim {
            hi.push(read_f64(&mut cursor)?);
        }
        let total: usize = sizes.iter().product();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(read_f64(&mut cursor)?);
        }
        SdfGrid::new(sizes, Aabb::new(lo, hi), values)
    }

    fn from_csv(text: &str) -> Result<Self> {
        let mut fields = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        let mut next_f64 = |what: &str| -> Result<f64> {
            fields
                .next()
                .ok_or_else(|| Error::Parse(format!("SDF grid CSV: missing {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("SDF grid CSV: bad {what}: {e}")))
        };
        let dim = next_f64("dimension")? as usize;
        if !(dim == 2 || dim == 3) {
            return Err(Error::Parse(format!("SDF grid must be 2D or 3D, got {dim}")));
        }
        let mut sizes = Vec::with_capacity(dim);
        for a in 0..dim {
            sizes.push(next_f64(&format!("size[{a}]"))? as usize);
        }
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for a in 0..dim {
            lo.push(next_f64(&format!("lo[{a}]"))?);
        }
        for a in 0..dim {
            hi.push(next_f64(&format!("hi[{a}]"))?);
        }
        let total: usize = sizes.iter().product();
        let mut values = Vec::with_capacity(total);
        for i in 0..total {
            values.push(next_f64(&format!("value[{i}]"))?);
        }
        SdfGrid::new(sizes, Aabb::new(lo, hi), values)
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for s in &self.sizes {
            out.extend_from_slice(&(*s as u32).to_le_bytes());
        }
        for v in self.aabb.lo.iter().chain(&self.aabb.hi) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("{}", self.dim));
        for s in &self.sizes {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        let bounds: Vec<String> = self
            .aabb
            .lo
            .iter()
            .chain(&self.aabb.hi)
            .map(|v| format!("{v}"))
            .collect();
        out.push_str(&bounds.join(","));
        out.push('\n');
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_grid(n: usize) -> SdfGrid {
        let aabb = Aabb::new(vec![-1.5, -1.5], vec![1.5, 1.5]);
        SdfGrid::from_fn(vec![n, n], aabb, |x| (x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0).unwrap()
    }

    #[test]
    fn interpolation_reproduces_smooth_sdf() {
        let grid = circle_grid(301);
        for (p, expect) in [([0.8, 0.0], -0.2), ([0.0, 0.6], -0.4), ([1.2, 0.0], 0.2)] {
            let got = grid.sample(&p);
            assert!((got - expect).abs() < 1e-3, "{p:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn outside_the_grid_is_far_outside() {
        let grid = circle_grid(31);
        assert!(grid.sample(&[5.0, 5.0]).is_infinite());
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let grid = circle_grid(17);
        let dir = std::env::temp_dir().join(format!("sdf-grid-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let bin = dir.join("g.sdfg");
        let csv = dir.join("g.csv");
        grid.save_binary(&bin).unwrap();
        grid.save_csv(&csv).unwrap();
        let from_bin = SdfGrid::load(&bin).unwrap();
        let from_csv = SdfGrid::load(&csv).unwrap();
        assert_eq!(from_bin.values, grid.values);
        assert_eq!(from_csv.sizes, grid.sizes);
        for (a, b) in from_csv.values.iter().zip(&grid.values) {
            assert_eq!(a, b);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
