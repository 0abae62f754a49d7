//! Outer optimization loop: compliance minimization over concrete
//! densities, member sizings and truss node positions under concrete and
//! steel volume budgets.

use alloc::vec;
use alloc::vec::Vec;

use crate::bimodulus::{
    self, AnalysisModel, InnerLoopReport, InnerLoopSettings, StiffnessAssignment,
};
use crate::domain::{total_envelope_volume, GroundStructure, Mode, Problem, RunConfig};
use crate::error::Result;
use crate::fea::{GlobalSystem, Q4};
use crate::filters::{FilterChain, FilterKernel};
use crate::mma::{self, MmaProblem, MmaSettings, MmaState};
use crate::truss::{self, TrussLayout};

/// SIMP stiffness multiplier `floor + rho^p (1 - floor)` and its derivative.
pub fn simp_stiffness_scale(rho: f64, p: f64, floor: f64) -> (f64, f64) {
    let v = libm::pow(rho, p);
    let dv = if rho == 0.0 {
        0.0
    } else {
        p * libm::pow(rho, p - 1.0)
    };
    (floor + v * (1.0 - floor), dv * (1.0 - floor))
}

/// Minimum-thickness sigmoid `x / (1 + exp((m - x) c))`.
pub fn vts_thickness_penalty(x: f64, m: f64, c: f64) -> f64 {
    x / (1.0 + libm::exp((m - x) * c))
}

/// Derivative of [`vts_thickness_penalty`].
pub fn vts_thickness_penalty_derivative(x: f64, m: f64, c: f64) -> f64 {
    let s = 1.0 / (1.0 + libm::exp((m - x) * c));
    s + x * c * s * (1.0 - s)
}

/// Stiffness interpolation of one design mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalization {
    /// Power law on concrete; linear steel sizing.
    Simp {
        /// Exponent.
        p: f64,
        /// Void stiffness multiplier.
        floor: f64,
    },
    /// Sigmoid on both concrete and steel.
    Sigmoid {
        /// Knee.
        m: f64,
        /// Steepness.
        c: f64,
        /// Void stiffness multiplier for concrete.
        floor: f64,
    },
}

impl Penalization {
    /// The interpolation used by `config.mode`.
    pub fn for_config(config: &RunConfig) -> Self {
        match config.mode {
            Mode::Binary => Penalization::Simp {
                p: config.simp_penalty,
                floor: config.density_floor,
            },
            Mode::Vts => Penalization::Sigmoid {
                m: config.vts.m,
                c: config.vts.c,
                floor: config.density_floor,
            },
        }
    }

    /// Concrete stiffness multiplier and derivative at physical density `rho`.
    pub fn concrete(&self, rho: f64) -> (f64, f64) {
        match *self {
            Penalization::Simp { p, floor } => simp_stiffness_scale(rho, p, floor),
            Penalization::Sigmoid { m, c, floor } => (
                floor + (1.0 - floor) * vts_thickness_penalty(rho, m, c),
                (1.0 - floor) * vts_thickness_penalty_derivative(rho, m, c),
            ),
        }
    }

    /// Steel stiffness multiplier and derivative at sizing `x_t`.
    pub fn steel(&self, x: f64) -> (f64, f64) {
        match *self {
            Penalization::Simp { .. } => (x, 1.0),
            Penalization::Sigmoid { m, c, .. } => (
                vts_thickness_penalty(x, m, c),
                vts_thickness_penalty_derivative(x, m, c),
            ),
        }
    }
}

/// Per-element thickness read off a VTS density field.
#[derive(Debug, Clone, PartialEq)]
pub struct VtsThicknessField {
    /// `rho * t_max`.
    pub thickness: Vec<f64>,
    /// Density below the reporting threshold.
    pub sub_minimum: Vec<bool>,
    /// Largest thickness.
    pub t_max: f64,
}

/// Linear thickness interpretation; densities under `threshold` are flagged.
pub fn interpret_vts(rho: &[f64], t_max: f64, threshold: f64) -> VtsThicknessField {
    VtsThicknessField {
        thickness: rho.iter().map(|&r| r * t_max).collect(),
        sub_minimum: rho.iter().map(|&r| r < threshold).collect(),
        t_max,
    }
}

/// Concrete design variables, member sizings and node positions.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignVector {
    /// Mode the vector belongs to.
    pub mode: Mode,
    /// Unfiltered concrete variables, one per element.
    pub x_c: Vec<f64>,
    /// Member sizings.
    pub x_t: Vec<f64>,
    /// Current truss node positions.
    pub positions: Vec<[f64; 2]>,
}

/// One movable node coordinate, scaled to `[0, 1]` for the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeVariable {
    /// Truss node.
    pub node: usize,
    /// 0 for `x`, 1 for `y`.
    pub axis: usize,
    /// Position at scaled value 0.
    pub lower: f64,
    /// Position at scaled value 1.
    pub upper: f64,
}

impl NodeVariable {
    /// Position range.
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Movable coordinates of `ground`, node-major.
pub fn node_variables(ground: &GroundStructure) -> Vec<NodeVariable> {
    let mut out = Vec::new();
    for (k, n) in ground.nodes.iter().enumerate() {
        let r = n.reach();
        for axis in 0..2 {
            if n.is_movable(axis) {
                out.push(NodeVariable {
                    node: k,
                    axis,
                    lower: r[2 * axis],
                    upper: r[2 * axis + 1],
                });
            }
        }
    }
    out
}

/// Log line of one outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Zero-based outer iteration.
    pub iteration: usize,
    /// Compliance of the design analysed this iteration.
    pub compliance: f64,
    /// Concrete volume of that design.
    pub concrete_volume: f64,
    /// Steel volume of that design.
    pub steel_volume: f64,
    /// Concrete volume over the envelope volume.
    pub concrete_fraction: f64,
    /// Steel volume over its budget.
    pub steel_fraction: f64,
    /// Largest change of any scaled design variable in the update.
    pub max_change: f64,
    /// Inner-loop solves.
    pub inner_iterations: usize,
    /// Whether the inner loop's labels reproduced themselves.
    pub labels_consistent: bool,
    /// Ratio at the end of the inner loop.
    pub ratio: f64,
    /// Heaviside sharpness (Binary with projection).
    pub beta: Option<f64>,
    /// Member halvings so far (VTS).
    pub splits: usize,
    /// Member count.
    pub members: usize,
    /// KKT residual of the MMA subproblem.
    pub kkt_residual: f64,
}

/// Compliance with all design gradients at a fixed stiffness assignment.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Solved system.
    pub system: GlobalSystem,
    /// Moduli used.
    pub assignment: StiffnessAssignment,
    /// Inner-loop report when the assignment was computed here.
    pub inner: Option<InnerLoopReport>,
    /// Physical densities.
    pub rho: Vec<f64>,
    /// `F . d`.
    pub compliance: f64,
    /// `dc/dx_c`.
    pub grad_xc: Vec<f64>,
    /// `dc/dx_t`.
    pub grad_xt: Vec<f64>,
    /// `dc/ds` per scaled node variable.
    pub grad_pos: Vec<f64>,
    /// Concrete volume.
    pub concrete_volume: f64,
    /// `dV_c/dx_c`.
    pub concrete_volume_grad: Vec<f64>,
    /// Steel volume.
    pub steel_volume: f64,
    /// `dV_t/dx_t`.
    pub steel_volume_grad_xt: Vec<f64>,
    /// `dV_t/ds`.
    pub steel_volume_grad_pos: Vec<f64>,
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Last accepted design.
    pub design: DesignVector,
    /// Ground structure the design refers to (changes when members split).
    pub ground: GroundStructure,
    /// Physical densities of `design`.
    pub densities: Vec<f64>,
    /// One record per outer iteration.
    pub log: Vec<IterationRecord>,
    /// Stopped on the change tolerance rather than the iteration cap.
    pub converged: bool,
    /// Thickness interpretation in VTS mode.
    pub thickness: Option<VtsThicknessField>,
}

/// Outer-loop driver.
#[derive(Debug, Clone)]
pub struct Optimizer {
    problem: Problem,
    ground: GroundStructure,
    node_vars: Vec<NodeVariable>,
    q4: Q4,
    filter: FilterChain,
    penalization: Penalization,
    design: DesignVector,
    mma: MmaState,
    assignment: Option<StiffnessAssignment>,
    ratio: f64,
    c_ref: Option<f64>,
    iteration: usize,
    last_beta_change: usize,
    last_split: usize,
    splits: usize,
    splits_done: bool,
    log: Vec<IterationRecord>,
}

impl Optimizer {
    /// Sets up the initial feasible design.
    pub fn new(problem: Problem) -> Result<Self> {
        let config = &problem.config;
        let kernel = FilterKernel::new(&problem.mesh, config.filter_radius);
        let filter = match config.mode {
            Mode::Binary if config.heaviside.enabled => FilterChain::projected(
                kernel,
                config.heaviside.beta_start,
                config.heaviside.threshold,
            ),
            _ => FilterChain::density(kernel),
        };
        let ground = problem.ground.clone();
        let x0 = config
            .initial_density
            .unwrap_or_else(|| problem.fill_fraction().min(1.0));
        let design = DesignVector {
            mode: config.mode,
            x_c: vec![x0; problem.mesh.element_count()],
            x_t: vec![config.initial_sizing; ground.members.len()],
            positions: ground.nodes.iter().map(|n| n.position).collect(),
        };
        let ratio = if config.material.bimodulus {
            config.continuation.start
        } else {
            config.continuation.floor
        };
        let node_vars = node_variables(&ground);
        let n = design.x_c.len() + design.x_t.len() + node_vars.len();
        let splits_done = config.mode != Mode::Vts || config.split.interval == 0;
        let mut opt = Optimizer {
            q4: Q4::new(problem.mesh.element_size()),
            penalization: Penalization::for_config(config),
            ground,
            node_vars,
            filter,
            design,
            mma: MmaState::new(n, MmaSettings::default()),
            assignment: None,
            ratio,
            c_ref: None,
            iteration: 0,
            last_beta_change: 0,
            last_split: 0,
            splits: 0,
            splits_done,
            log: Vec::new(),
            problem,
        };
        opt.enforce_volumes()?;
        Ok(opt)
    }

    /// Problem being solved.
    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Current ground structure.
    pub fn ground(&self) -> &GroundStructure {
        &self.ground
    }

    /// Current design.
    pub fn design(&self) -> &DesignVector {
        &self.design
    }

    /// Movable node coordinates.
    pub fn node_vars(&self) -> &[NodeVariable] {
        &self.node_vars
    }

    /// Concrete tension/compression ratio in force.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Heaviside sharpness in force.
    pub fn beta(&self) -> Option<f64> {
        self.filter.beta()
    }

    /// Records so far.
    pub fn log(&self) -> &[IterationRecord] {
        &self.log
    }

    /// Stiffness interpolation in use.
    pub fn penalization(&self) -> Penalization {
        self.penalization
    }

    /// Replaces the current design; its layout must match the ground structure.
    pub fn set_design(&mut self, design: DesignVector) {
        self.design = design;
    }

    /// Forces the concrete ratio (for analysis and testing).
    pub fn set_ratio(&mut self, ratio: f64) {
        self.ratio = ratio;
    }

    /// Forces the Heaviside sharpness.
    pub fn set_beta(&mut self, beta: f64) {
        self.filter.set_beta(beta);
    }

    /// Physical densities of `x_c` under the current filter chain.
    pub fn densities(&self, x_c: &[f64]) -> Vec<f64> {
        self.filter.project(x_c)
    }

    fn element_volume(&self) -> f64 {
        self.problem.element_volume()
    }

    /// Concrete volume of `x_c`.
    pub fn concrete_volume(&self, x_c: &[f64]) -> f64 {
        let v = self.element_volume();
        self.densities(x_c).iter().map(|r| r * v).sum()
    }

    /// Truss layout at `positions`.
    pub fn layout(&self, positions: &[[f64; 2]]) -> Result<TrussLayout> {
        let c = &self.problem.config;
        TrussLayout::new(
            &self.problem.mesh,
            positions.to_vec(),
            self.ground.members.clone(),
            c.ssm_radius,
            c.min_member_length,
        )
    }

    /// Flattens a design into optimizer variables `[x_c, x_t, s]`.
    pub fn to_vars(&self, design: &DesignVector) -> Vec<f64> {
        let mut v = Vec::with_capacity(design.x_c.len() + design.x_t.len() + self.node_vars.len());
        v.extend_from_slice(&design.x_c);
        v.extend_from_slice(&design.x_t);
        for nv in &self.node_vars {
            v.push((design.positions[nv.node][nv.axis] - nv.lower) / nv.range());
        }
        v
    }

    /// Inverse of [`Optimizer::to_vars`]; fixed coordinates come from `template`.
    pub fn from_vars(&self, vars: &[f64], template: &DesignVector) -> DesignVector {
        let nc = template.x_c.len();
        let nt = template.x_t.len();
        let mut positions = template.positions.clone();
        for (k, nv) in self.node_vars.iter().enumerate() {
            positions[nv.node][nv.axis] = nv.lower + vars[nc + nt + k] * nv.range();
        }
        DesignVector {
            mode: template.mode,
            x_c: vars[..nc].to_vec(),
            x_t: vars[nc..nc + nt].to_vec(),
            positions,
        }
    }

    fn inner_settings(&self) -> InnerLoopSettings {
        let c = &self.problem.config;
        InnerLoopSettings {
            material: c.material,
            continuation: c.continuation,
            tol: c.inner_loop_tol,
            max_iters: c.inner_loop_max_iters,
        }
    }

    /// Analyses `design`. With `frozen` the given moduli are used as is;
    /// otherwise the inner loop runs from the warm-start assignment.
    pub fn evaluate(
        &mut self,
        design: &DesignVector,
        frozen: Option<&StiffnessAssignment>,
    ) -> Result<Evaluation> {
        let cfg = self.problem.config.clone();
        let mesh = &self.problem.mesh;
        let rho = self.filter.forward(&design.x_c);
        let t = cfg.thickness;
        let (scale, dscale): (Vec<f64>, Vec<f64>) = rho
            .iter()
            .map(|&r| {
                let (v, dv) = self.penalization.concrete(r);
                (t * v, t * dv)
            })
            .unzip();
        let (mscale, dmscale): (Vec<f64>, Vec<f64>) = design
            .x_t
            .iter()
            .map(|&x| self.penalization.steel(x))
            .unzip();
        let layout = self.layout(&design.positions)?;
        let model = AnalysisModel {
            mesh,
            bcs: &self.problem.bcs,
            q4: &self.q4,
            element_scale: &scale,
            layout: &layout,
            member_scale: &mscale,
        };
        let (system, assignment, inner) = match frozen {
            Some(a) => (model.solve(a)?, a.clone(), None),
            None => {
                let start = match &self.assignment {
                    Some(a) if a.truss_tension.len() == layout.members.len() => a.clone(),
                    _ => StiffnessAssignment::all_stiff(
                        mesh.element_count(),
                        layout.members.len(),
                        &cfg.material,
                        self.ratio,
                    ),
                };
                let out =
                    bimodulus::run_inner_loop(&model, &start, self.ratio, &self.inner_settings())?;
                (out.system, out.assignment, Some(out.report))
            }
        };

        let mut grad_rho = vec![0.0; rho.len()];
        for (e, g) in grad_rho.iter_mut().enumerate() {
            let u = system.element_displacements(mesh, e);
            let k1 = self.q4.stiffness(&assignment.element_d(e), 1.0);
            let mut energy = 0.0;
            for i in 0..8 {
                let row: f64 = (0..8).map(|j| k1[i][j] * u[j]).sum();
                energy += u[i] * row;
            }
            *g = -dscale[e] * energy;
        }
        let grad_xc = self.filter.backprop(&grad_rho)?;
        let grad_xt: Vec<f64> = (0..layout.members.len())
            .map(|m| {
                layout.sizing_sensitivity(m, assignment.truss_moduli[m], dmscale[m], &system.d)
            })
            .collect();
        let pos = layout.node_position_sensitivity(&assignment.truss_moduli, &mscale, &system.d);
        let grad_pos = self
            .node_vars
            .iter()
            .map(|nv| pos[nv.node][nv.axis] * nv.range())
            .collect();

        let ve = self.element_volume();
        let concrete_volume = rho.iter().map(|r| r * ve).sum();
        let concrete_volume_grad = self.filter.backprop(&vec![ve; rho.len()])?;
        let steel_volume = layout.steel_volume(&design.x_t);
        let steel_volume_grad_xt = (0..layout.members.len())
            .map(|m| layout.members[m].area * layout.geometry(m).length)
            .collect();
        let sv = layout.steel_volume_position_gradient(&design.x_t);
        let steel_volume_grad_pos = self
            .node_vars
            .iter()
            .map(|nv| sv[nv.node][nv.axis] * nv.range())
            .collect();
        Ok(Evaluation {
            compliance: system.compliance,
            system,
            assignment,
            inner,
            rho,
            grad_xc,
            grad_xt,
            grad_pos,
            concrete_volume,
            concrete_volume_grad,
            steel_volume,
            steel_volume_grad_xt,
            steel_volume_grad_pos,
        })
    }

    /// Compliance of `design` at fixed moduli, without gradients.
    pub fn frozen_compliance(
        &self,
        design: &DesignVector,
        assignment: &StiffnessAssignment,
    ) -> Result<f64> {
        let t = self.problem.config.thickness;
        let scale: Vec<f64> = self
            .filter
            .project(&design.x_c)
            .iter()
            .map(|&r| t * self.penalization.concrete(r).0)
            .collect();
        let mscale: Vec<f64> = design
            .x_t
            .iter()
            .map(|&x| self.penalization.steel(x).0)
            .collect();
        let layout = self.layout(&design.positions)?;
        let model = AnalysisModel {
            mesh: &self.problem.mesh,
            bcs: &self.problem.bcs,
            q4: &self.q4,
            element_scale: &scale,
            layout: &layout,
            member_scale: &mscale,
        };
        Ok(model.solve(assignment)?.compliance)
    }

    /// Pulls the current design back inside both volume budgets: a uniform
    /// shift of `x_c` found by bisection, and a uniform scaling of `x_t`.
    fn enforce_volumes(&mut self) -> Result<()> {
        let vmax = self.problem.config.concrete_volume_max;
        let shifted = |x: &[f64], eta: f64| -> Vec<f64> {
            x.iter().map(|&v| (v + eta).clamp(0.0, 1.0)).collect()
        };
        if self.concrete_volume(&self.design.x_c) > vmax {
            let (mut lo, mut hi) = (-1.0, 0.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.concrete_volume(&shifted(&self.design.x_c, mid)) > vmax {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            self.design.x_c = shifted(&self.design.x_c, lo);
        }
        if !self.ground.members.is_empty() {
            let smax = self.problem.config.steel_volume_max;
            let layout = self.layout(&self.design.positions)?;
            let mut vol = layout.steel_volume(&self.design.x_t);
            while vol > smax {
                let f = smax / vol * (1.0 - 1e-15);
                for x in &mut self.design.x_t {
                    *x *= f;
                }
                vol = layout.steel_volume(&self.design.x_t);
            }
        }
        Ok(())
    }

    fn schedules_done(&self) -> bool {
        let c = &self.problem.config;
        let ratio_done = self.ratio <= c.continuation.floor;
        let beta_done = match self.filter.beta() {
            Some(b) => b >= c.heaviside.beta_max,
            None => true,
        };
        ratio_done && beta_done && self.splits_done
    }

    /// One outer iteration; returns its record and whether the run converged.
    pub fn outer_step(&mut self) -> Result<(IterationRecord, bool)> {
        let design = self.design.clone();
        let eval = self.evaluate(&design, None)?;
        let inner = eval.inner.clone().expect("inner loop ran");
        self.ratio = inner.ratio;
        self.assignment = Some(eval.assignment.clone());
        let c_ref = *self
            .c_ref
            .get_or_insert(eval.compliance.max(f64::MIN_POSITIVE));

        let cfg = self.problem.config.clone();
        let nc = design.x_c.len();
        let nt = design.x_t.len();
        let x = self.to_vars(&design);
        let n = x.len();
        let mut df = Vec::with_capacity(n);
        df.extend(eval.grad_xc.iter().map(|g| g / c_ref));
        df.extend(eval.grad_xt.iter().map(|g| g / c_ref));
        df.extend(eval.grad_pos.iter().map(|g| g / c_ref));
        let mut g = vec![eval.concrete_volume / cfg.concrete_volume_max - 1.0];
        let mut dg_c = vec![0.0; n];
        for (j, v) in eval.concrete_volume_grad.iter().enumerate() {
            dg_c[j] = v / cfg.concrete_volume_max;
        }
        let mut dg = vec![dg_c];
        if nt > 0 {
            g.push(eval.steel_volume / cfg.steel_volume_max - 1.0);
            let mut row = vec![0.0; n];
            for (k, v) in eval.steel_volume_grad_xt.iter().enumerate() {
                row[nc + k] = v / cfg.steel_volume_max;
            }
            for (k, v) in eval.steel_volume_grad_pos.iter().enumerate() {
                row[nc + nt + k] = v / cfg.steel_volume_max;
            }
            dg.push(row);
        }
        let lower = vec![0.0; n];
        let upper = vec![1.0; n];
        let mut move_limit = vec![cfg.move_limit; nc + nt];
        move_limit.resize(n, cfg.move_limit_position);
        let sub = mma::mma_step(
            &mut self.mma,
            &MmaProblem {
                x: &x,
                df: &df,
                g: &g,
                dg: &dg,
                lower: &lower,
                upper: &upper,
                move_limit: &move_limit,
            },
        )?;
        self.design = self.from_vars(&sub.x, &design);
        self.enforce_volumes()?;
        let x_new = self.to_vars(&self.design);
        let max_change = x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        let envelope = total_envelope_volume(&self.problem.mesh, cfg.thickness);
        let record = IterationRecord {
            iteration: self.iteration,
            compliance: eval.compliance,
            concrete_volume: eval.concrete_volume,
            steel_volume: eval.steel_volume,
            concrete_fraction: eval.concrete_volume / envelope,
            steel_fraction: eval.steel_volume / cfg.steel_volume_max,
            max_change,
            inner_iterations: inner.iterations,
            labels_consistent: inner.labels_consistent,
            ratio: inner.ratio,
            beta: self.filter.beta(),
            splits: self.splits,
            members: nt,
            kkt_residual: sub.kkt_residual,
        };
        self.log.push(record.clone());
        self.iteration += 1;

        let converged = max_change < cfg.change_tol;
        if converged && self.schedules_done() {
            return Ok((record, true));
        }
        self.advance_schedules(converged)?;
        Ok((record, false))
    }

    fn advance_schedules(&mut self, converged: bool) -> Result<()> {
        let cfg = self.problem.config.clone();
        let k = self.iteration;
        if self.ratio > cfg.continuation.floor && k % cfg.continuation.interval.max(1) == 0 {
            self.ratio = bimodulus::apply_continuation(&cfg.continuation, self.ratio);
        }
        if let Some(beta) = self.filter.beta() {
            let due = k - self.last_beta_change >= cfg.heaviside.interval.max(1);
            if beta < cfg.heaviside.beta_max && (due || converged) {
                self.filter
                    .set_beta((2.0 * beta).min(cfg.heaviside.beta_max));
                self.last_beta_change = k;
                self.enforce_volumes()?;
            }
        }
        if !self.splits_done && (k - self.last_split >= cfg.split.interval || converged) {
            self.last_split = k;
            let (ground, sizing, report) = truss::split_members(
                &self.ground,
                &self.design.positions,
                &self.design.x_t,
                &self.problem.mesh,
                &cfg.split,
                cfg.vts.x_bound_factor,
                cfg.min_member_length,
            );
            if report.split == 0 {
                self.splits_done = true;
            } else {
                self.splits += 1;
                self.design.positions = ground.nodes.iter().map(|n| n.position).collect();
                self.design.x_t = sizing;
                self.ground = ground;
                self.node_vars = node_variables(&self.ground);
                let n = self.design.x_c.len() + self.design.x_t.len() + self.node_vars.len();
                self.mma = MmaState::new(n, MmaSettings::default());
                self.assignment = None;
                self.enforce_volumes()?;
            }
        }
        Ok(())
    }

    /// Iterates until convergence or the iteration cap.
    pub fn run(mut self) -> Result<RunResult> {
        let mut converged = false;
        while self.iteration < self.problem.config.max_outer_iters {
            if self.outer_step()?.1 {
                converged = true;
                break;
            }
        }
        Ok(self.finish(converged))
    }

    /// Packages the current design without further iterations.
    pub fn finish(self, converged: bool) -> RunResult {
        let densities = self.densities(&self.design.x_c);
        let cfg = &self.problem.config;
        let thickness = match cfg.mode {
            Mode::Vts => Some(interpret_vts(&densities, cfg.thickness, cfg.vts.m)),
            Mode::Binary => None,
        };
        RunResult {
            design: self.design,
            ground: self.ground,
            densities,
            log: self.log,
            converged,
            thickness,
        }
    }
}

/// Measure of non-discreteness `sum 4 rho (1 - rho) / N`.
pub fn non_discreteness(rho: &[f64]) -> f64 {
    rho.iter().map(|&r| 4.0 * r * (1.0 - r)).sum::<f64>() / rho.len() as f64
}
