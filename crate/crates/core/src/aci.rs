//! Nominal flexural capacity of prismatic reinforced-concrete sections and
//! the matching three-point-bending design load.
//!
//! Uses the equivalent rectangular (Whitney) stress block with strength
//! reduction factor 1, i.e. nominal rather than factored capacity. Units are
//! whatever the caller uses consistently; the companion CLI works in N and mm.

use crate::error::{Error, Result};

/// Whitney block intensity factor.
pub const BLOCK_FACTOR: f64 = 0.85;

/// Prismatic singly reinforced section under three-point bending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    /// Section width `b`.
    pub width: f64,
    /// Effective depth `d` to the steel centroid.
    pub effective_depth: f64,
    /// Tension steel area `A_s`.
    pub steel_area: f64,
    /// Steel yield stress `f_y`.
    pub steel_yield: f64,
    /// Concrete compressive strength `f'_c`.
    pub concrete_strength: f64,
    /// Simply supported span `L`.
    pub span: f64,
}

impl SectionSpec {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("effective_depth", self.effective_depth),
            ("steel_yield", self.steel_yield),
            ("concrete_strength", self.concrete_strength),
            ("span", self.span),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidProblem(alloc::format!(
                    "section {name} must be positive"
                )));
            }
        }
        if !(self.steel_area >= 0.0) {
            return Err(Error::InvalidProblem(alloc::string::String::from(
                "section steel_area must be non-negative",
            )));
        }
        Ok(())
    }

    /// Depth of the equivalent stress block, `A_s f_y / (0.85 f'_c b)`.
    pub fn block_depth(&self) -> f64 {
        self.steel_area * self.steel_yield / (BLOCK_FACTOR * self.concrete_strength * self.width)
    }
}

/// `M_n = A_s f_y (d - a / 2)`.
pub fn nominal_moment(section: &SectionSpec) -> Result<f64> {
    section.validate()?;
    let a = section.block_depth();
    if a >= section.effective_depth {
        return Err(Error::OverReinforced {
            block_depth: a,
            effective_depth: section.effective_depth,
        });
    }
    Ok(section.steel_area * section.steel_yield * (section.effective_depth - 0.5 * a))
}

/// Mid-span point load that produces `moment` at mid-span: `4 M / L`.
pub fn point_load_for_moment(moment: f64, span: f64) -> f64 {
    4.0 * moment / span
}

/// Mid-span point load at nominal moment capacity.
pub fn three_point_design_load(section: &SectionSpec) -> Result<f64> {
    Ok(point_load_for_moment(
        nominal_moment(section)?,
        section.span,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_inch() -> SectionSpec {
        SectionSpec {
            width: 76.0,
            effective_depth: 128.0,
            steel_area: 130.0,
            steel_yield: 372.3,
            concrete_strength: 57.2,
            span: 1219.0,
        }
    }

    #[test]
    fn block_depth_for_measured_strengths() {
        let a = three_inch().block_depth();
        // 130 * 372.3 / (0.85 * 57.2 * 76) by hand
        assert!((a - 13.098).abs() < 1e-3, "{a}");
    }

    #[test]
    fn no_steel_no_moment() {
        let s = SectionSpec {
            steel_area: 0.0,
            ..three_inch()
        };
        assert_eq!(nominal_moment(&s).unwrap(), 0.0);
    }

    #[test]
    fn wider_section_shallower_block_higher_moment() {
        let s = three_inch();
        let w = SectionSpec {
            width: 2.0 * s.width,
            ..s
        };
        assert!((w.block_depth() - 0.5 * s.block_depth()).abs() < 1e-12);
        assert!(nominal_moment(&w).unwrap() > nominal_moment(&s).unwrap());
    }

    #[test]
    fn load_identity() {
        // 1 kN m over 1 m gives 4 kN.
        assert_eq!(point_load_for_moment(1.0, 1.0), 4.0);
    }

    #[test]
    fn over_reinforced_rejected() {
        let s = SectionSpec {
            steel_area: 5000.0,
            ..three_inch()
        };
        assert!(matches!(
            nominal_moment(&s),
            Err(Error::OverReinforced { .. })
        ));
    }

    #[test]
    fn invalid_inputs_rejected() {
        let s = SectionSpec {
            span: 0.0,
            ..three_inch()
        };
        assert!(matches!(nominal_moment(&s), Err(Error::InvalidProblem(_))));
    }
}
