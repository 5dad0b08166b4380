//! Built-in shape families.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::shapespace::sdf::SdfGrid;
use crate::shapespace::{Aabb, BoundarySamples, GeometryCode, ShapeFamily};

/// Unit interval, a single 1D shape.
pub struct Interval1d;

impl ShapeFamily for Interval1d {
    fn id(&self) -> &str {
        "interval1d"
    }

    fn spatial_dim(&self) -> usize {
        1
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        &[]
    }

    fn aabb(&self, _g: &GeometryCode) -> Aabb {
        Aabb::new(vec![0.0], vec![1.0])
    }

    fn indicator(&self, _g: &GeometryCode, x: &[f64]) -> bool {
        (0.0..=1.0).contains(&x[0])
    }

    fn volume(&self, _g: &GeometryCode) -> Option<f64> {
        Some(1.0)
    }

    fn boundary_samples(&self, _g: &GeometryCode, n: usize, _rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        for i in 0..n {
            if i % 2 == 0 {
                points.push(0.0);
                normals.push(-1.0);
            } else {
                points.push(1.0);
                normals.push(1.0);
            }
        }
        Some(BoundarySamples { points, normals, count: n })
    }
}

/// Disk of fixed radius centered at the origin.
pub struct Disk2d {
    pub radius: f64,
}

impl ShapeFamily for Disk2d {
    fn id(&self) -> &str {
        "disk2d"
    }

    fn spatial_dim(&self) -> usize {
        2
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        &[]
    }

    fn aabb(&self, _g: &GeometryCode) -> Aabb {
        Aabb::new(vec![-self.radius, -self.radius], vec![self.radius, self.radius])
    }

    fn indicator(&self, _g: &GeometryCode, x: &[f64]) -> bool {
        x[0] * x[0] + x[1] * x[1] <= self.radius * self.radius
    }

    fn volume(&self, _g: &GeometryCode) -> Option<f64> {
        Some(std::f64::consts::PI * self.radius * self.radius)
    }

    fn boundary_samples(&self, _g: &GeometryCode, n: usize, rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        let mut points = Vec::with_capacity(2 * n);
        let mut normals = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            points.push(self.radius * c);
            points.push(self.radius * s);
            normals.push(c);
            normals.push(s);
        }
        Some(BoundarySamples { points, normals, count: n })
    }

    fn params_spec(&self) -> crate::shapespace::FamilyParams {
        let mut params = crate::shapespace::FamilyParams::default();
        params.insert("radius", &format!("{}", self.radius));
        params
    }
}

/// Unit-width rectangle `[0,1] x [0,h]`; the height is the geometry code.
pub struct Rectangle2d;

pub const RECTANGLE_HEIGHT_BOUNDS: (f64, f64) = (0.5, 2.0);

impl ShapeFamily for Rectangle2d {
    fn id(&self) -> &str {
        "rectangle2d"
    }

    fn spatial_dim(&self) -> usize {
        2
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        std::slice::from_ref(&RECTANGLE_HEIGHT_BOUNDS)
    }

    fn aabb(&self, g: &GeometryCode) -> Aabb {
        Aabb::new(vec![0.0, 0.0], vec![1.0, g.0[0]])
    }

    fn indicator(&self, g: &GeometryCode, x: &[f64]) -> bool {
        (0.0..=1.0).contains(&x[0]) && x[1] >= 0.0 && x[1] <= g.0[0]
    }

    fn volume(&self, g: &GeometryCode) -> Option<f64> {
        Some(g.0[0])
    }

    fn boundary_samples(&self, g: &GeometryCode, n: usize, rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        let h = g.0[0];
        let verts = [[0.0, 0.0], [1.0, 0.0], [1.0, h], [0.0, h]];
        Some(polygon_boundary_samples(&verts, n, rng))
    }
}

/// U-shaped planar domain: unit square with a vertical slot removed.
pub struct UShape2d;

const SLOT_X0: f64 = 0.3;
const SLOT_X1: f64 = 0.7;
const SLOT_Y: f64 = 0.3;

impl ShapeFamily for UShape2d {
    fn id(&self) -> &str {
        "ushape2d"
    }

    fn spatial_dim(&self) -> usize {
        2
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        &[]
    }

    fn aabb(&self, _g: &GeometryCode) -> Aabb {
        Aabb::new(vec![0.0, 0.0], vec![1.0, 1.0])
    }

    fn indicator(&self, _g: &GeometryCode, x: &[f64]) -> bool {
        let in_square = (0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]);
        let in_slot = x[0] > SLOT_X0 && x[0] < SLOT_X1 && x[1] > SLOT_Y;
        in_square && !in_slot
    }

    fn volume(&self, _g: &GeometryCode) -> Option<f64> {
        Some(1.0 - (SLOT_X1 - SLOT_X0) * (1.0 - SLOT_Y))
    }

    fn boundary_samples(&self, _g: &GeometryCode, n: usize, rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        let verts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [SLOT_X1, 1.0],
            [SLOT_X1, SLOT_Y],
            [SLOT_X0, SLOT_Y],
            [SLOT_X0, 1.0],
            [0.0, 1.0],
        ];
        Some(polygon_boundary_samples(&verts, n, rng))
    }
}

/// Side profile of a chair as a union of axis-aligned boxes: a back panel,
/// a seat slab, and a front leg. The code is (thickness r, height h, depth d).
pub struct BoxChair2d;

pub const CHAIR_CODE_BOUNDS: [(f64, f64); 3] = [(0.08, 0.3), (0.8, 1.6), (0.6, 1.4)];

impl BoxChair2d {
    fn boxes(g: &GeometryCode) -> [[f64; 4]; 3] {
        let (r, h, d) = (g.0[0], g.0[1], g.0[2]);
        let seat_y = 0.4 * h;
        [
            // [x0, x1, y0, y1]
            [0.0, r, 0.0, h],
            [0.0, d, seat_y - 0.5 * r, seat_y + 0.5 * r],
            [d - r, d, 0.0, seat_y],
        ]
    }
}

impl ShapeFamily for BoxChair2d {
    fn id(&self) -> &str {
        "boxchair2d"
    }

    fn spatial_dim(&self) -> usize {
        2
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        &CHAIR_CODE_BOUNDS
    }

    fn aabb(&self, g: &GeometryCode) -> Aabb {
        let (_, h, d) = (g.0[0], g.0[1], g.0[2]);
        Aabb::new(vec![0.0, 0.0], vec![d, h])
    }

    fn indicator(&self, g: &GeometryCode, x: &[f64]) -> bool {
        Self::boxes(g)
            .iter()
            .any(|b| x[0] >= b[0] && x[0] <= b[1] && x[1] >= b[2] && x[1] <= b[3])
    }
}

/// Thin shell between two level sets of a signed distance field:
/// `x` is inside iff `-t < sdf(x) < 0`, with the thickness `t` as the code.
pub struct SdfShell {
    source: SdfSource,
    /// Grid file the shell was loaded from, when applicable; recorded in the
    /// parameter spec so models referencing this family can be reloaded.
    source_path: Option<String>,
}

pub const SHELL_THICKNESS_BOUNDS: (f64, f64) = (0.15, 0.8);

#[derive(Clone)]
pub enum SdfSource {
    Grid(Arc<SdfGrid>),
    Analytic {
        dim: usize,
        aabb: Aabb,
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl SdfShell {
    pub fn from_grid(grid: SdfGrid) -> Self {
        SdfShell { source: SdfSource::Grid(Arc::new(grid)), source_path: None }
    }

    pub fn from_grid_path(grid: SdfGrid, path: &str) -> Self {
        SdfShell { source: SdfSource::Grid(Arc::new(grid)), source_path: Some(path.to_string()) }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(dim: usize, aabb: Aabb, f: F) -> Self {
        SdfShell { source: SdfSource::Analytic { dim, aabb, f: Arc::new(f) }, source_path: None }
    }

    fn sdf(&self, x: &[f64]) -> f64 {
        match &self.source {
            SdfSource::Grid(g) => g.sample(x),
            SdfSource::Analytic { f, .. } => f(x),
        }
    }
}

impl ShapeFamily for SdfShell {
    fn id(&self) -> &str {
        "sdfshell"
    }

    fn spatial_dim(&self) -> usize {
        match &self.source {
            SdfSource::Grid(g) => g.dim,
            SdfSource::Analytic { dim, .. } => *dim,
        }
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        std::slice::from_ref(&SHELL_THICKNESS_BOUNDS)
    }

    fn aabb(&self, _g: &GeometryCode) -> Aabb {
        match &self.source {
            SdfSource::Grid(g) => g.aabb.clone(),
            SdfSource::Analytic { aabb, .. } => aabb.clone(),
        }
    }

    fn indicator(&self, g: &GeometryCode, x: &[f64]) -> bool {
        let s = self.sdf(x);
        let t = g.0[0];
        -t < s && s < 0.0
    }

    fn params_spec(&self) -> crate::shapespace::FamilyParams {
        let mut params = crate::shapespace::FamilyParams::default();
        if let Some(path) = &self.source_path {
            params.insert("sdf", path);
        }
        params
    }
}

/// A family rotated rigidly in the plane about its per-shape box center.
/// Queries rotate back into the inner family's frame.
pub struct Rotated2d<F: ShapeFamily> {
    pub inner: F,
    pub angle: f64,
}

impl<F: ShapeFamily> Rotated2d<F> {
    pub fn new(inner: F, angle: f64) -> Self {
        assert_eq!(inner.spatial_dim(), 2);
        Rotated2d { inner, angle }
    }

    /// Map a point from the rotated frame into the inner family's frame.
    pub fn to_inner(&self, g: &GeometryCode, x: &[f64]) -> [f64; 2] {
        let c = self.inner.aabb(g).center();
        let (s, co) = (-self.angle).sin_cos();
        let dx = x[0] - c[0];
        let dy = x[1] - c[1];
        [c[0] + co * dx - s * dy, c[1] + s * dx + co * dy]
    }

    /// Map a point from the inner frame into the rotated frame.
    pub fn from_inner(&self, g: &GeometryCode, x: &[f64]) -> [f64; 2] {
        let c = self.inner.aabb(g).center();
        let (s, co) = self.angle.sin_cos();
        let dx = x[0] - c[0];
        let dy = x[1] - c[1];
        [c[0] + co * dx - s * dy, c[1] + s * dx + co * dy]
    }
}

impl<F: ShapeFamily> ShapeFamily for Rotated2d<F> {
    fn id(&self) -> &str {
        "rotated2d"
    }

    fn spatial_dim(&self) -> usize {
        2
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        self.inner.code_bounds()
    }

    fn aabb(&self, g: &GeometryCode) -> Aabb {
        let inner = self.inner.aabb(g);
        let c = inner.center();
        let (s, co) = self.angle.sin_cos();
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for corner in 0..4 {
            let x = if corner & 1 == 0 { inner.lo[0] } else { inner.hi[0] };
            let y = if corner & 2 == 0 { inner.lo[1] } else { inner.hi[1] };
            let dx = x - c[0];
            let dy = y - c[1];
            let rx = c[0] + co * dx - s * dy;
            let ry = c[1] + s * dx + co * dy;
            lo[0] = lo[0].min(rx);
            lo[1] = lo[1].min(ry);
            hi[0] = hi[0].max(rx);
            hi[1] = hi[1].max(ry);
        }
        Aabb::new(lo.to_vec(), hi.to_vec())
    }

    fn indicator(&self, g: &GeometryCode, x: &[f64]) -> bool {
        let p = self.to_inner(g, x);
        self.inner.indicator(g, &p)
    }

    fn volume(&self, g: &GeometryCode) -> Option<f64> {
        self.inner.volume(g)
    }
}

/// View of a parametric family frozen at one geometry code: the shape space
/// collapses to a single shape and the pinned code is recorded in the
/// parameter spec (`pin=a;b;...`) so model files can rebuild it.
pub struct Pinned<R: FamilyRef> {
    inner: R,
    code: GeometryCode,
}

/// Access to a family behind either a borrow or a box.
pub trait FamilyRef: Send + Sync {
    fn family(&self) -> &dyn ShapeFamily;
}

impl<'a> FamilyRef for &'a dyn ShapeFamily {
    fn family(&self) -> &dyn ShapeFamily {
        *self
    }
}

impl FamilyRef for Box<dyn ShapeFamily> {
    fn family(&self) -> &dyn ShapeFamily {
        self.as_ref()
    }
}

pub type PinnedFamily<'a> = Pinned<&'a dyn ShapeFamily>;
pub type PinnedOwned = Pinned<Box<dyn ShapeFamily>>;

impl<R: FamilyRef> Pinned<R> {
    pub fn new(inner: R, code: GeometryCode) -> Self {
        Pinned { inner, code }
    }

    pub fn code(&self) -> &GeometryCode {
        &self.code
    }
}

impl<R: FamilyRef> ShapeFamily for Pinned<R> {
    fn id(&self) -> &str {
        self.inner.family().id()
    }

    fn spatial_dim(&self) -> usize {
        self.inner.family().spatial_dim()
    }

    fn code_bounds(&self) -> &[(f64, f64)] {
        &[]
    }

    fn aabb(&self, _g: &GeometryCode) -> Aabb {
        self.inner.family().aabb(&self.code)
    }

    fn indicator(&self, _g: &GeometryCode, x: &[f64]) -> bool {
        self.inner.family().indicator(&self.code, x)
    }

    fn volume(&self, _g: &GeometryCode) -> Option<f64> {
        self.inner.family().volume(&self.code)
    }

    fn boundary_samples(&self, _g: &GeometryCode, n: usize, rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        self.inner.family().boundary_samples(&self.code, n, rng)
    }

    fn params_spec(&self) -> crate::shapespace::FamilyParams {
        let mut params = self.inner.family().params_spec();
        let pin = self
            .code
            .as_slice()
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(";");
        params.insert("pin", &pin);
        params
    }
}

fn polygon_boundary_samples(verts: &[[f64; 2]], n: usize, rng: &mut ChaCha8Rng) -> BoundarySamples {
    let m = verts.len();
    let mut cumulative = Vec::with_capacity(m);
    let mut total = 0.0;
    for i in 0..m {
        let a = verts[i];
        let b = verts[(i + 1) % m];
        total += ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        cumulative.push(total);
    }
    let mut points = Vec::with_capacity(2 * n);
    let mut normals = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let u: f64 = rng.gen_range(0.0..total);
        let edge = cumulative.partition_point(|c| *c <= u).min(m - 1);
        let start = if edge == 0 { 0.0 } else { cumulative[edge - 1] };
        let a = verts[edge];
        let b = verts[(edge + 1) % m];
        let len = cumulative[edge] - start;
        let t = ((u - start) / len).clamp(0.0, 1.0);
        points.push(a[0] + t * (b[0] - a[0]));
        points.push(a[1] + t * (b[1] - a[1]));
        // Counterclockwise polygon: outward normal is the edge direction
        // rotated clockwise.
        let dx = (b[0] - a[0]) / len;
        let dy = (b[1] - a[1]) / len;
        normals.push(dy);
        normals.push(-dx);
    }
    BoundarySamples { points, normals, count: n }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_contains_origin() {
        let disk = Disk2d { radius: 1.0 };
        assert!(disk.indicator(&GeometryCode::empty(), &[0.0, 0.0]));
        assert!(!disk.indicator(&GeometryCode::empty(), &[1.01, 0.0]));
    }

    #[test]
    fn rectangle_aabb_tracks_height() {
        let rect = Rectangle2d;
        let g = GeometryCode(vec![1.7]);
        let aabb = rect.aabb(&g);
        assert_eq!(aabb.lo, vec![0.0, 0.0]);
        assert_eq!(aabb.hi, vec![1.0, 1.7]);
    }

    #[test]
    fn shell_thresholds_the_signed_distance() {
        let shell = SdfShell::from_fn(2, Aabb::new(vec![-1.5, -1.5], vec![1.5, 1.5]), |x| {
            (x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0
        });
        let g = GeometryCode(vec![0.3]);
        // radius 0.8: sdf = -0.2, inside; radius 0.6: sdf = -0.4, outside
        assert!(shell.indicator(&g, &[0.8, 0.0]));
        assert!(!shell.indicator(&g, &[0.6, 0.0]));
        assert!(!shell.indicator(&g, &[1.1, 0.0]));
    }

    #[test]
    fn ushape_excludes_the_slot() {
        let u = UShape2d;
        let g = GeometryCode::empty();
        assert!(u.indicator(&g, &[0.1, 0.9]));
        assert!(u.indicator(&g, &[0.5, 0.1]));
        assert!(!u.indicator(&g, &[0.5, 0.9]));
    }

    #[test]
    fn chair_is_a_union_of_boxes() {
        let chair = BoxChair2d;
        let g = GeometryCode(vec![0.1, 1.0, 1.0]);
        assert!(chair.indicator(&g, &[0.05, 0.9])); // back
        assert!(chair.indicator(&g, &[0.5, 0.4])); // seat
        assert!(chair.indicator(&g, &[0.95, 0.1])); // leg
        assert!(!chair.indicator(&g, &[0.5, 0.9]));
    }

    #[test]
    fn rotation_preserves_the_indicator_under_mapping() {
        let rot = Rotated2d::new(UShape2d, std::f64::consts::FRAC_PI_6);
        let g = GeometryCode::empty();
        for p in [[0.1, 0.9], [0.5, 0.1], [0.5, 0.9], [0.9, 0.9]] {
            let q = rot.from_inner(&g, &p);
            assert_eq!(rot.indicator(&g, &q), UShape2d.indicator(&g, &p));
        }
    }
}
