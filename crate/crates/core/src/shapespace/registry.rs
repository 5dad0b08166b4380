//! By-name registry of shape families.
//!
//! Each family registers a constructor closure keyed by its id; the CLI and
//! model loader select one at runtime from `--family` / the model header and
//! hand it free-form `key=value` parameters.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::shapespace::families::{BoxChair2d, Disk2d, Interval1d, Rectangle2d, SdfShell, UShape2d};
use crate::shapespace::sdf::SdfGrid;
use crate::shapespace::ShapeFamily;

/// Free-form family parameters, parsed from `key=value,key=value`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FamilyParams(BTreeMap<String, String>);

impl FamilyParams {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("family parameter '{item}' is not key=value"))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FamilyParams(map))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|e| Error::InvalidConfig(format!("family parameter {key}={raw}: {e}"))),
        }
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn insert(&mut self, key: &str, value: &str) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Canonical `key=value,...` form for manifests and model files.
    pub fn to_spec_string(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

type Factory = Box<dyn Fn(&FamilyParams) -> Result<Box<dyn ShapeFamily>> + Send + Sync>;

pub struct FamilyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl FamilyRegistry {
    pub fn new() -> Self {
        FamilyRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, id: &str, factory: Factory) {
        self.factories.insert(id.to_string(), factory);
    }

    pub fn available(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn create(&self, id: &str, params: &FamilyParams) -> Result<Box<dyn ShapeFamily>> {
        match self.factories.get(id) {
            Some(factory) => factory(params),
            None => Err(Error::UnknownFamily { id: id.to_string(), available: self.available() }),
        }
    }
}

impl Default for FamilyRegistry {
    fn default() -> Self {
        built_in_families()
    }
}

/// Registry with every built-in family.
pub fn built_in_families() -> FamilyRegistry {
    let mut registry = FamilyRegistry::new();
    registry.register("interval1d", Box::new(|_| Ok(Box::new(Interval1d))));
    registry.register(
        "disk2d",
        Box::new(|params| {
            let radius = params.get_f64_or("radius", 1.0)?;
            if radius <= 0.0 {
                return Err(Error::InvalidConfig(format!("disk2d radius must be positive, got {radius}")));
            }
            Ok(Box::new(Disk2d { radius }))
        }),
    );
    registry.register("rectangle2d", Box::new(|_| Ok(Box::new(Rectangle2d))));
    registry.register("ushape2d", Box::new(|_| Ok(Box::new(UShape2d))));
    registry.register("boxchair2d", Box::new(|_| Ok(Box::new(BoxChair2d))));
    registry.register(
        "sdfshell",
        Box::new(|params| {
            let path = params.get_str("sdf").ok_or_else(|| {
                Error::InvalidConfig("sdfshell needs an SDF grid file: --family-params sdf=<path>".into())
            })?;
            let grid = SdfGrid::load(Path::new(path))?;
            Ok(Box::new(SdfShell::from_grid_path(grid, path)))
        }),
    );
    registry
}

/// Build a family from a model header: create by id, then freeze it at the
/// recorded code when the spec carries a `pin` entry.
pub fn instantiate(registry: &FamilyRegistry, id: &str, params: &FamilyParams) -> Result<Box<dyn ShapeFamily>> {
    let base = registry.create(id, params)?;
    match params.get_str("pin") {
        None => Ok(base),
        Some(spec) => {
            let mut code = Vec::new();
            for part in spec.split(';').filter(|s| !s.is_empty()) {
                code.push(part.parse::<f64>().map_err(|e| {
                    Error::InvalidConfig(format!("pinned geometry code component '{part}': {e}"))
                })?);
            }
            let code = crate::shapespace::GeometryCode(code);
            base.check_code(&code)?;
            Ok(Box::new(crate::shapespace::families::Pinned::new(base, code)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapespace::GeometryCode;

    #[test]
    fn lookup_failure_lists_available_ids() {
        let registry = built_in_families();
        let err = match registry.create("torus5d", &FamilyParams::default()) {
            Ok(_) => panic!("lookup should fail"),
            Err(e) => e,
        };
        match err {
            Error::UnknownFamily { id, available } => {
                assert_eq!(id, "torus5d");
                assert!(available.contains(&"disk2d".to_string()));
                assert!(available.contains(&"sdfshell".to_string()));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn params_round_trip() {
        let params = FamilyParams::parse("radius=2.5, foo=bar").unwrap();
        assert_eq!(params.get_f64("radius").unwrap(), Some(2.5));
        assert_eq!(params.get_str("foo"), Some("bar"));
        assert_eq!(params.to_spec_string(), "foo=bar,radius=2.5");
    }

    #[test]
    fn disk_factory_applies_radius() {
        let registry = built_in_families();
        let family = registry.create("disk2d", &FamilyParams::parse("radius=2").unwrap()).unwrap();
        assert!(family.indicator(&GeometryCode::empty(), &[1.5, 0.0]));
    }
}
