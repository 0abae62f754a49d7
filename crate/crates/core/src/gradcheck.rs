//! Central finite-difference check of the three gradient families with the
//! bimodulus state frozen.

use alloc::vec::Vec;

use crate::error::Result;
use crate::optimizer::Optimizer;

/// Group of design variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Concrete variables `x_c`.
    Concrete,
    /// Member sizings `x_t`.
    Sizing,
    /// Scaled node positions.
    Position,
}

impl Family {
    /// Short label.
    pub fn name(self) -> &'static str {
        match self {
            Family::Concrete => "x_c",
            Family::Sizing => "x_t",
            Family::Position => "x_p",
        }
    }
}

/// Result for one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    /// Which variables.
    pub family: Family,
    /// Variables checked.
    pub components: usize,
    /// `(step, max relative error)` for every step tried.
    pub sweep: Vec<(f64, f64)>,
    /// Step with the smallest error.
    pub best_step: f64,
    /// Max relative error at `best_step`.
    pub max_rel_error: f64,
    /// Minimum is interior and both ends are at least ten times larger.
    pub v_shaped: bool,
}

/// All families.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Compliance at the checked design.
    pub compliance: f64,
    /// One entry per nonempty family.
    pub families: Vec<FamilyReport>,
}

/// Steps `1e-1` down to `1e-11`.
pub fn default_steps() -> Vec<f64> {
    (1..=11).map(|k| libm::pow(10.0, -(k as f64))).collect()
}

/// Relative error of each component is `|a - fd| / max(|fd|, floor * max|a|)`
/// with `floor = 1e-4`, so components many orders below the family's largest
/// entry are judged on absolute error at that scale.
pub fn check_gradients(opt: &mut Optimizer, steps: &[f64]) -> Result<GradCheckReport> {
    let design = opt.design().clone();
    let converged = opt.evaluate(&design, None)?;
    let frozen = converged.assignment;
    let eval = opt.evaluate(&design, Some(&frozen))?;
    let x = opt.to_vars(&design);
    let nc = design.x_c.len();
    let nt = design.x_t.len();
    let groups = [
        (Family::Concrete, 0..nc, &eval.grad_xc),
        (Family::Sizing, nc..nc + nt, &eval.grad_xt),
        (Family::Position, nc + nt..x.len(), &eval.grad_pos),
    ];
    let mut families = Vec::new();
    for (family, range, analytic) in groups {
        if range.is_empty() {
            continue;
        }
        let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut sweep = Vec::with_capacity(steps.len());
        for &h in steps {
            let mut worst = 0.0f64;
            for (k, j) in range.clone().enumerate() {
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let cp = opt.frozen_compliance(&opt.from_vars(&xp, &design), &frozen)?;
                let cm = opt.frozen_compliance(&opt.from_vars(&xm, &design), &frozen)?;
                let fd = (cp - cm) / (2.0 * h);
                let denom = fd.abs().max(1e-4 * scale).max(f64::MIN_POSITIVE);
                worst = worst.max((analytic[k] - fd).abs() / denom);
            }
            sweep.push((h, worst));
        }
        let (best, &(best_step, max_rel_error)) = sweep
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("at least one step");
        let v_shaped = best > 0
            && best + 1 < sweep.len()
            && sweep[0].1 >= 10.0 * max_rel_error
            && sweep[sweep.len() - 1].1 >= 10.0 * max_rel_error;
        families.push(FamilyReport {
            family,
            components: range.len(),
            sweep,
            best_step,
            max_rel_error,
            v_shaped,
        });
    }
    Ok(GradCheckReport {
        compliance: eval.compliance,
        families,
    })
}
