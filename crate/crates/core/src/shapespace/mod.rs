//! Parametric shape families behind an inside/outside indicator.
//!
//! Every family implements [`ShapeFamily`] and is looked up by name in the
//! [`registry::FamilyRegistry`]; training and evaluation never see anything
//! beyond the trait. Domain integrals use rejection-sampled interior points
//! with implicitly uniform weights.

pub mod families;
pub mod registry;
pub mod sdf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use registry::{built_in_families, FamilyParams, FamilyRegistry};

/// Point in shape space. Length zero means a single fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCode(pub Vec<f64>);

impl GeometryCode {
    pub fn empty() -> Self {
        GeometryCode(Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned bounding box, `lo[i] <= x[i] <= hi[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Aabb { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn diagonal(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// Boundary points with outward unit normals, for families that can
/// parameterize their boundary analytically.
#[derive(Debug, Clone)]
pub struct BoundarySamples {
    /// `n x dim`, row-major.
    pub points: Vec<f64>,
    /// `n x dim`, row-major unit normals.
    pub normals: Vec<f64>,
    pub count: usize,
}

/// A continuously parameterized family of domains, exposed only through an
/// indicator query plus box metadata.
pub trait ShapeFamily: Send + Sync {
    fn id(&self) -> &str;

    fn spatial_dim(&self) -> usize;

    /// Per-component `[lo, hi]` bounds of the geometry code. Empty for a
    /// single shape.
    fn code_bounds(&self) -> &[(f64, f64)];

    fn code_dim(&self) -> usize {
        self.code_bounds().len()
    }

    /// Bounding box of the domain at `g`; the indicator is false outside it.
    fn aabb(&self, g: &GeometryCode) -> Aabb;

    /// Inside/outside query.
    fn indicator(&self, g: &GeometryCode, x: &[f64]) -> bool;

    /// Closed-form volume when available. Unused by training; all estimators
    /// are ratios of same-set sums.
    fn volume(&self, _g: &GeometryCode) -> Option<f64> {
        None
    }

    /// Analytic boundary sampler when available.
    fn boundary_samples(&self, _g: &GeometryCode, _n: usize, _rng: &mut ChaCha8Rng) -> Option<BoundarySamples> {
        None
    }

    /// Construction parameters in registry `key=value` form, enough for
    /// [`registry::FamilyRegistry`] to rebuild this family from a model file.
    fn params_spec(&self) -> registry::FamilyParams {
        registry::FamilyParams::default()
    }

    fn check_code(&self, g: &GeometryCode) -> Result<()> {
        let bounds = self.code_bounds();
        if g.dim() != bounds.len() {
            return Err(Error::InvalidConfig(format!(
                "family '{}' expects a geometry code of length {}, got {}",
                self.id(),
                bounds.len(),
                g.dim()
            )));
        }
        for (i, (v, (lo, hi))) in g.0.iter().zip(bounds).enumerate() {
            if !(*v >= *lo && *v <= *hi) {
                return Err(Error::InvalidConfig(format!(
                    "geometry code component {i} = {v} outside [{lo}, {hi}] for family '{}'",
                    self.id()
                )));
            }
        }
        Ok(())
    }
}

/// Uniform interior samples of one shape; the Monte Carlo substrate for all
/// domain integrals. Weights are implicitly uniform.
#[derive(Debug, Clone)]
pub struct CubatureSet {
    /// `n x dim`, row-major.
    pub points: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub g: GeometryCode,
}

impl CubatureSet {
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }
}

const REJECTION_ATTEMPT_CAP: u64 = 10_000_000;
const MIN_ACCEPTANCE_RATE: f64 = 1e-4;

/// Rejection-sample `n` interior points, uniform over the domain at `g`.
///
/// Proposals are uniform over the axis-aligned bounding box. Fails loudly
/// when the acceptance rate indicates a degenerate shape rather than
/// returning a partial set.
pub fn sample_domain(
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CubatureSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("sample_domain: n must be at least 1".into()));
    }
    family.check_code(g)?;
    let dim = family.spatial_dim();
    let aabb = family.aabb(g);
    assert_eq!(aabb.dim(), dim);

    let mut points = Vec::with_capacity(n * dim);
    let mut accepted = 0usize;
    let mut attempts = 0u64;
    let mut proposal = vec![0.0; dim];
    while accepted < n {
        if attempts >= REJECTION_ATTEMPT_CAP {
            let rate = accepted as f64 / attempts as f64;
            return Err(Error::DegenerateShape {
                family: family.id().to_string(),
                code: g.0.clone(),
                rate,
                attempts,
            });
        }
        attempts += 1;
        for (c, p) in proposal.iter_mut().enumerate() {
            *p = rng.gen_range(aabb.lo[c]..=aabb.hi[c]);
        }
        if family.indicator(g, &proposal) {
            points.extend_from_slice(&proposal);
            accepted += 1;
        }
        // Bail out early once the rate is hopeless.
        if attempts % 1_000_000 == 0 {
            let rate = accepted as f64 / attempts as f64;
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(Error::DegenerateShape {
                    family: family.id().to_string(),
                    code: g.0.clone(),
                    rate,
                    attempts,
                });
            }
        }
    }
    Ok(CubatureSet { points, n, dim, g: clone_code(g) })
}

fn clone_code(g: &GeometryCode) -> GeometryCode {
    GeometryCode(g.0.clone())
}

/// Uniform sample of the geometry-code box.
pub fn sample_shape_space(family: &dyn ShapeFamily, rng: &mut ChaCha8Rng) -> Result<GeometryCode> {
    let bounds = family.code_bounds();
    if bounds.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "family '{}' has no shape space (code dimension 0)",
            family.id()
        )));
    }
    let code = bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect();
    Ok(GeometryCode(code))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn disk_acceptance_rate_matches_area_ratio() {
        let registry = built_in_families();
        let family = registry.create("disk2d", &FamilyParams::parse("radius=1").unwrap()).unwrap();
        let g = GeometryCode::empty();
        let mut rng = rng::stream(3, rng::STREAM_CUBATURE, 0);
        let mut accepted = 0u32;
        let attempts = 100_000;
        let mut p = [0.0f64; 2];
        for _ in 0..attempts {
            p[0] = rng.gen_range(-1.0..=1.0);
            p[1] = rng.gen_range(-1.0..=1.0);
            if family.indicator(&g, &p) {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / attempts as f64;
        let expected = std::f64::consts::PI / 4.0;
        assert!((rate - expected).abs() < 0.01, "rate {rate} vs {expected}");
    }

    #[test]
    fn sample_domain_returns_exact_count_inside_domain() {
        let registry = built_in_families();
        let family = registry.create("interval1d", &FamilyParams::default()).unwrap();
        let g = GeometryCode::empty();
        let mut rng = rng::stream(4, rng::STREAM_CUBATURE, 0);
        let cubature = sample_domain(family.as_ref(), &g, 1000, &mut rng).unwrap();
        assert_eq!(cubature.n, 1000);
        assert!(cubature.points.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn cubature_is_deterministic_for_a_seed() {
        let registry = built_in_families();
        let family = registry.create("disk2d", &FamilyParams::parse("radius=1").unwrap()).unwrap();
        let g = GeometryCode::empty();
        let mut r1 = rng::stream(9, rng::STREAM_CUBATURE, 7);
        let mut r2 = rng::stream(9, rng::STREAM_CUBATURE, 7);
        let a = sample_domain(family.as_ref(), &g, 500, &mut r1).unwrap();
        let b = sample_domain(family.as_ref(), &g, 500, &mut r2).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn shape_space_sampling_respects_bounds_and_mean() {
        let registry = built_in_families();
        let family = registry.create("rectangle2d", &FamilyParams::default()).unwrap();
        let mut rng = rng::stream(5, rng::STREAM_SHAPE, 0);
        let mut sum = 0.0;
        let draws = 100_000;
        for _ in 0..draws {
            let g = sample_shape_space(family.as_ref(), &mut rng).unwrap();
            assert!(g.0[0] >= 0.5 && g.0[0] <= 2.0);
            sum += g.0[0];
        }
        let mean = sum / draws as f64;
        // Box center is 1.25; 1% of the box width.
        assert!((mean - 1.25).abs() < 0.015, "mean {mean}");
    }

    #[test]
    fn zero_dimensional_family_has_no_shape_space() {
        let registry = built_in_families();
        let family = registry.create("interval1d", &FamilyParams::default()).unwrap();
        let mut rng = rng::stream(6, rng::STREAM_SHAPE, 0);
        assert!(matches!(
            sample_shape_space(family.as_ref(), &mut rng),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn disk_samples_pass_chi_square_uniformity() {
        // 4x4 spatial binning of disk samples vs exact bin masses from the
        // closed-form circle segment integral.
        let registry = built_in_families();
        let family = registry.create("disk2d", &FamilyParams::parse("radius=1").unwrap()).unwrap();
        let g = GeometryCode::empty();
        let mut rng = rng::stream(12, rng::STREAM_CUBATURE, 0);
        let n = 100_000;
        let cubature = sample_domain(family.as_ref(), &g, n, &mut rng).unwrap();

        // Antiderivative of sqrt(1 - x^2): the area oracle for the bins.
        fn circle_area_integral(x: f64) -> f64 {
            let x = x.clamp(-1.0, 1.0);
            0.5 * (x * (1.0 - x * x).sqrt() + x.asin())
        }
        // Integral over [a,b] of min(y, c(x)) with c(x) = sqrt(1 - x^2),
        // for y >= 0 and [a,b] inside [-1,1].
        fn int_min_cap(a: f64, b: f64, y: f64) -> f64 {
            if y >= 1.0 {
                return circle_area_integral(b) - circle_area_integral(a);
            }
            let xc = (1.0 - y * y).sqrt();
            let mut total = 0.0;
            let lo = a.max(-xc);
            let hi = b.min(xc);
            if hi > lo {
                total += y * (hi - lo);
            }
            if a < -xc {
                total += circle_area_integral(b.min(-xc)) - circle_area_integral(a);
            }
            if b > xc {
                total += circle_area_integral(b) - circle_area_integral(a.max(xc));
            }
            total
        }
        // Area of the unit disk inside [x0,x1] x [y0,y1] for a cell that
        // does not straddle the x axis (0 <= y0 < y1 after mirroring).
        fn disk_cell_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
            let (y0, y1) = if y1 <= 0.0 { (-y1, -y0) } else { (y0, y1) };
            assert!(y0 >= 0.0 && y1 > y0);
            if y0 >= 1.0 {
                return 0.0;
            }
            // Inside the strip |x| < xc(y0) the vertical extent is
            // min(y1, c(x)) - y0; outside it the cell misses the disk.
            let x0v = (1.0 - y0 * y0).sqrt();
            let a = x0.max(-x0v);
            let b = x1.min(x0v);
            if b <= a {
                return 0.0;
            }
            int_min_cap(a, b, y1) - y0 * (b - a)
        }

        let edges = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut observed = [[0usize; 4]; 4];
        for j in 0..n {
            let p = cubature.point(j);
            let bx = (((p[0] + 1.0) / 0.5) as usize).min(3);
            let by = (((p[1] + 1.0) / 0.5) as usize).min(3);
            observed[bx][by] += 1;
        }
        let disk_area = std::f64::consts::PI;
        let mut chi2 = 0.0;
        for bx in 0..4 {
            for by in 0..4 {
                let area = disk_cell_area(edges[bx], edges[bx + 1], edges[by], edges[by + 1]);
                let expected = n as f64 * area / disk_area;
                let diff = observed[bx][by] as f64 - expected;
                chi2 += diff * diff / expected;
            }
        }
        // 15 degrees of freedom at significance 0.001.
        assert!(chi2 < 37.70, "chi-square statistic {chi2}");
    }

    #[test]
    fn boundary_normals_flip_the_indicator() {
        let registry = built_in_families();
        for (id, params) in [
            ("interval1d", FamilyParams::default()),
            ("disk2d", FamilyParams::parse("radius=1").unwrap()),
            ("rectangle2d", FamilyParams::default()),
        ] {
            let family = registry.create(id, &params).unwrap();
            let g = if family.code_dim() == 0 {
                GeometryCode::empty()
            } else {
                GeometryCode(vec![1.3])
            };
            let mut rng = rng::stream(21, "boundary", 0);
            let samples = family.boundary_samples(&g, 200, &mut rng).expect("analytic sampler");
            let eps = 1e-4 * family.aabb(&g).diagonal();
            let dim = family.spatial_dim();
            let mut good = 0;
            for i in 0..samples.count {
                let p = &samples.points[i * dim..(i + 1) * dim];
                let nrm = &samples.normals[i * dim..(i + 1) * dim];
                let outside: Vec<f64> = p.iter().zip(nrm).map(|(a, b)| a + eps * b).collect();
                let inside: Vec<f64> = p.iter().zip(nrm).map(|(a, b)| a - eps * b).collect();
                if !family.indicator(&g, &outside) && family.indicator(&g, &inside) {
                    good += 1;
                }
            }
            assert!(
                good as f64 >= 0.99 * samples.count as f64,
                "{id}: only {good}/{} boundary points consistent",
                samples.count
            );
        }
    }
}
