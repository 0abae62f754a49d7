//! Method of Moving Asymptotes for one objective, a handful of inequality
//! constraints `g_i(x) <= 0` and box bounds.
//!
//! Each step builds the separable convex approximation around the current
//! iterate and solves its dual by nested bisection on the multipliers, which
//! is cheap for the one or two constraints used here.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Asymptote and move-limit constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaSettings {
    /// Initial asymptote offset as a fraction of the variable range.
    pub asymptote_init: f64,
    /// Shrink factor when a variable oscillates.
    pub asymptote_decrease: f64,
    /// Expansion factor when a variable moves monotonically.
    pub asymptote_increase: f64,
    /// Fraction of the asymptote gap the iterate must keep.
    pub albefa: f64,
    /// Smallest asymptote offset, as a fraction of the range.
    pub min_span: f64,
    /// Largest asymptote offset, as a fraction of the range.
    pub max_span: f64,
    /// Raise each variable's objective curvature to the secant estimate
    /// from the previous step.
    pub secant_curvature: bool,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            asymptote_init: 0.5,
            asymptote_decrease: 0.7,
            asymptote_increase: 1.2,
            albefa: 0.1,
            min_span: 0.01,
            max_span: 10.0,
            secant_curvature: true,
        }
    }
}

/// Asymptotes and iterate history.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaState {
    /// Lower asymptotes.
    pub low: Vec<f64>,
    /// Upper asymptotes.
    pub upp: Vec<f64>,
    /// Previous iterate.
    pub xold1: Vec<f64>,
    /// Iterate before that.
    pub xold2: Vec<f64>,
    /// Objective gradient at `xold1`.
    pub dfold1: Vec<f64>,
    /// Steps taken.
    pub iteration: usize,
    /// Constants.
    pub settings: MmaSettings,
}

/// One MMA step's inputs, all evaluated at `x`.
#[derive(Debug, Clone, Copy)]
pub struct MmaProblem<'a> {
    /// Current iterate.
    pub x: &'a [f64],
    /// Objective gradient.
    pub df: &'a [f64],
    /// Constraint values, feasible when `<= 0`.
    pub g: &'a [f64],
    /// Constraint gradients, one row per constraint.
    pub dg: &'a [Vec<f64>],
    /// Lower bounds.
    pub lower: &'a [f64],
    /// Upper bounds.
    pub upper: &'a [f64],
    /// Per-variable move limit as a fraction of the range.
    pub move_limit: &'a [f64],
}

/// Solution of the convex subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    /// New iterate.
    pub x: Vec<f64>,
    /// Constraint multipliers.
    pub lambda: Vec<f64>,
    /// KKT residual of the subproblem at `x`.
    pub kkt_residual: f64,
    /// Move limits had to be lifted to find a feasible point.
    pub relaxed: bool,
}

impl MmaState {
    /// Fresh state for `n` variables.
    pub fn new(n: usize, settings: MmaSettings) -> Self {
        MmaState {
            low: vec![0.0; n],
            upp: vec![0.0; n],
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            dfold1: vec![0.0; n],
            iteration: 0,
            settings,
        }
    }

    fn update_asymptotes(&mut self, x: &[f64], lower: &[f64], upper: &[f64]) {
        let s = self.settings;
        for j in 0..x.len() {
            let range = (upper[j] - lower[j]).max(1e-12);
            if self.iteration < 2 {
                self.low[j] = x[j] - s.asymptote_init * range;
                self.upp[j] = x[j] + s.asymptote_init * range;
            } else {
                let trend = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if trend < 0.0 {
                    s.asymptote_decrease
                } else if trend > 0.0 {
                    s.asymptote_increase
                } else {
                    1.0
                };
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = low.clamp(x[j] - s.max_span * range, x[j] - s.min_span * range);
                self.upp[j] = upp.clamp(x[j] + s.min_span * range, x[j] + s.max_span * range);
            }
        }
    }
}

struct Approximation {
    low: Vec<f64>,
    upp: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    p0: Vec<f64>,
    q0: Vec<f64>,
    p: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn pq(grad: f64, gap_u: f64, gap_l: f64, range: f64) -> (f64, f64) {
    let reg = 1e-5 / range;
    let (pos, neg) = (grad.max(0.0), (-grad).max(0.0));
    (
        gap_u * gap_u * (1.001 * pos + 0.001 * neg + reg),
        gap_l * gap_l * (0.001 * pos + 1.001 * neg + reg),
    )
}

impl Approximation {
    fn build(state: &MmaState, prob: &MmaProblem<'_>, relax: bool) -> Self {
        let n = prob.x.len();
        let albefa = state.settings.albefa;
        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let m = prob.g.len();
        let mut p = vec![vec![0.0; n]; m];
        let mut q = vec![vec![0.0; n]; m];
        let mut b = vec![0.0; m];
        for j in 0..n {
            let x = prob.x[j];
            let range = (prob.upper[j] - prob.lower[j]).max(1e-12);
            let (l, u) = (state.low[j], state.upp[j]);
            let mv = if relax { 1.0 } else { prob.move_limit[j] } * range;
            alpha[j] = prob.lower[j].max(l + albefa * (x - l)).max(x - mv);
            beta[j] = prob.upper[j].min(u - albefa * (u - x)).min(x + mv);
            let (gu, gl) = (u - x, x - l);
            (p0[j], q0[j]) = pq(prob.df[j], gu, gl, range);
            if state.settings.secant_curvature && state.iteration > 0 {
                let dx = x - state.xold1[j];
                if dx != 0.0 {
                    let s = (prob.df[j] - state.dfold1[j]) / dx;
                    let model = 2.0 * (p0[j] / (gu * gu * gu) + q0[j] / (gl * gl * gl));
                    if s > model {
                        // gradient-neutral term adding curvature s - model at x
                        let w = (s - model) / (2.0 * (1.0 / gu + 1.0 / gl));
                        p0[j] += w * gu * gu;
                        q0[j] += w * gl * gl;
                    }
                }
            }
            for i in 0..m {
                let (pi, qi) = pq(prob.dg[i][j], gu, gl, range);
                p[i][j] = pi;
                q[i][j] = qi;
                b[i] += pi / gu + qi / gl;
            }
        }
        for i in 0..m {
            b[i] -= prob.g[i];
        }
        Approximation {
            low: state.low.clone(),
            upp: state.upp.clone(),
            alpha,
            beta,
            p0,
            q0,
            p,
            q,
            b,
        }
    }

    /// Minimizer of the Lagrangian over the box for multipliers `lambda`.
    fn primal(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.p0.len())
            .map(|j| {
                let mut pp = self.p0[j];
                let mut qq = self.q0[j];
                for (i, &l) in lambda.iter().enumerate() {
                    pp += l * self.p[i][j];
                    qq += l * self.q[i][j];
                }
                let (sp, sq) = (libm::sqrt(pp), libm::sqrt(qq));
                let x = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
                x.clamp(self.alpha[j], self.beta[j])
            })
            .collect()
    }

    /// Approximated constraint values at `x`.
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        (0..self.b.len())
            .map(|i| {
                let mut s = 0.0;
                for j in 0..x.len() {
                    s += self.p[i][j] / (self.upp[j] - x[j]) + self.q[i][j] / (x[j] - self.low[j]);
                }
                s - self.b[i]
            })
            .collect()
    }

    fn residual(&self, lambda: &[f64], k: usize) -> f64 {
        self.constraints(&self.primal(lambda))[k]
    }

    /// Sets `lambda[k..]` to the dual maximizer with `lambda[..k]` held.
    /// Returns the first constraint found unattainable.
    fn solve_from(&self, lambda: &mut [f64], k: usize) -> core::result::Result<(), usize> {
        if k == lambda.len() {
            return Ok(());
        }
        let eval = |lambda: &mut [f64], v: f64| -> core::result::Result<f64, usize> {
            lambda[k] = v;
            self.solve_from(lambda, k + 1)?;
            Ok(self.residual(lambda, k))
        };
        if eval(lambda, 0.0)? <= 0.0 {
            return Ok(());
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while eval(lambda, hi)? > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e40 {
                return Err(k);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if eval(lambda, mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        eval(lambda, hi)?;
        Ok(())
    }
}

/// One MMA iteration. Updates `state` and returns the new iterate.
///
/// If the subproblem has no feasible point within the move limits the step is
/// retried once with the move limits lifted; failing that, the error names
/// the unattainable constraint.
pub fn mma_step(state: &mut MmaState, prob: &MmaProblem<'_>) -> Result<SubproblemResult> {
    state.update_asymptotes(prob.x, prob.lower, prob.upper);
    let m = prob.g.len();
    let mut outcome = None;
    for relax in [false, true] {
        let approx = Approximation::build(state, prob, relax);
        let mut lambda = vec![0.0; m];
        match approx.solve_from(&mut lambda, 0) {
            Ok(()) => {
                let x = approx.primal(&lambda);
                let gt = approx.constraints(&x);
                let kkt = libm::sqrt(
                    gt.iter()
                        .zip(&lambda)
                        .map(|(&g, &l)| {
                            let v = g.max(0.0);
                            v * v + (l * g) * (l * g)
                        })
                        .sum(),
                );
                outcome = Some(SubproblemResult {
                    x,
                    lambda,
                    kkt_residual: kkt,
                    relaxed: relax,
                });
                break;
            }
            Err(k) if relax => return Err(Error::MmaInfeasible { constraint: k }),
            Err(_) => {}
        }
    }
    let result = outcome.expect("relaxed attempt either returns or errors");
    state.xold2 = core::mem::replace(&mut state.xold1, prob.x.to_vec());
    state.dfold1 = prob.df.to_vec();
    state.iteration += 1;
    Ok(result)
}

/// KKT residual of the original problem at `x` with multipliers `lambda`.
///
/// Combines the projected Lagrangian gradient, constraint violation and
/// complementarity; zero exactly at a KKT point.
pub fn kkt_residual(
    x: &[f64],
    lambda: &[f64],
    df: &[f64],
    g: &[f64],
    dg: &[Vec<f64>],
    lower: &[f64],
    upper: &[f64],
) -> f64 {
    let mut sum = 0.0;
    for j in 0..x.len() {
        let mut grad = df[j];
        for (i, &l) in lambda.iter().enumerate() {
            grad += l * dg[i][j];
        }
        let r = x[j] - (x[j] - grad).clamp(lower[j], upper[j]);
        sum += r * r;
    }
    for (&gi, &l) in g.iter().zip(lambda) {
        let v = gi.max(0.0);
        sum += v * v + (l * gi) * (l * gi) + (-l).max(0.0) * (-l).max(0.0);
    }
    libm::sqrt(sum)
}
