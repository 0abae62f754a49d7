//! Section files for the capacity check: TOML with lengths in mm and
//! stresses in MPa.

use std::path::Path;

use rcto_core::aci::SectionSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk form of [`SectionSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionFile {
    /// Width `b`, mm.
    pub width: f64,
    /// Effective depth `d`, mm.
    pub effective_depth: f64,
    /// Tension steel area, mm^2.
    pub steel_area: f64,
    /// Steel yield stress, MPa.
    pub steel_yield: f64,
    /// Concrete strength, MPa.
    pub concrete_strength: f64,
    /// Span, mm.
    pub span: f64,
}

impl From<SectionFile> for SectionSpec {
    fn from(s: SectionFile) -> Self {
        SectionSpec {
            width: s.width,
            effective_depth: s.effective_depth,
            steel_area: s.steel_area,
            steel_yield: s.steel_yield,
            concrete_strength: s.concrete_strength,
            span: s.span,
        }
    }
}

/// Reads a section file.
pub fn load(path: &Path) -> Result<SectionSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SectionFile = toml::from_str(&text).map_err(|e| Error::ConfigFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(file.into())
}

/// Capacity in report units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacity {
    /// Stress block depth, mm.
    pub block_depth_mm: f64,
    /// Nominal moment, kN m.
    pub moment_knm: f64,
    /// Mid-span design load, kN.
    pub load_kn: f64,
}

/// Nominal moment and three-point design load of `section`.
pub fn capacity(section: &SectionSpec) -> Result<Capacity> {
    let m = rcto_core::aci::nominal_moment(section)?;
    Ok(Capacity {
        block_depth_mm: section.block_depth(),
        moment_knm: m * 1e-6,
        load_kn: rcto_core::aci::point_load_for_moment(m, section.span) * 1e-3,
    })
}
