//! Force-dependent stiffness: concrete is soft along tensile principal
//! directions, steel is soft in compression.
//!
//! Each outer design step starts with a fixed-point loop that solves the
//! structure, re-labels every Gauss point and member from the resulting
//! stresses, and repeats until compliance settles. The concrete
//! tension/compression modulus ratio follows a continuation schedule from a
//! mild start value down to its floor.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{BoundaryConditions, Continuation, MaterialConstants, Mesh};
use crate::error::{Error, Result};
use crate::fea::{self, Constitutive, GlobalSystem, Mat3, Mat8, Q4};
use crate::truss::TrussLayout;

/// Material state of one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussMaterial {
    /// Rotated constitutive matrix and its principal moduli.
    pub constitutive: Constitutive,
    /// Whether each principal direction is in tension (soft).
    pub tension: [bool; 2],
}

/// Moduli for every Gauss point and member.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessAssignment {
    /// Four Gauss points per element.
    pub gauss: Vec<[GaussMaterial; 4]>,
    /// Member in tension (stiff) or compression (soft).
    pub truss_tension: Vec<bool>,
    /// Member moduli matching `truss_tension`.
    pub truss_moduli: Vec<f64>,
    /// Concrete tension/compression ratio the moduli were built with.
    pub ratio: f64,
}

/// Concrete tension modulus and Poisson ratio at `ratio`.
///
/// The Poisson ratio scales with the modulus so `E / nu` is the same in
/// both directions. At the continuation floor the configured tension values
/// are returned verbatim.
pub fn tension_moduli(
    material: &MaterialConstants,
    schedule: &Continuation,
    ratio: f64,
) -> (f64, f64) {
    if ratio == schedule.floor {
        (material.e_tens, material.nu_tens)
    } else {
        (material.e_comp * ratio, material.nu_comp * ratio)
    }
}

/// Next ratio of the schedule: one step down, never below the floor.
pub fn apply_continuation(schedule: &Continuation, ratio: f64) -> f64 {
    let steps = libm::round((schedule.start - ratio) / schedule.step) + 1.0;
    let next = schedule.start - steps * schedule.step;
    if next <= schedule.floor + 1e-12 * schedule.step {
        schedule.floor
    } else {
        next
    }
}

impl StiffnessAssignment {
    /// Every Gauss point in compression and every member in tension.
    pub fn all_stiff(
        n_elements: usize,
        n_members: usize,
        material: &MaterialConstants,
        ratio: f64,
    ) -> Self {
        let iso = GaussMaterial {
            constitutive: fea::isotropic(material.e_comp, material.nu_comp),
            tension: [false, false],
        };
        StiffnessAssignment {
            gauss: vec![[iso; 4]; n_elements],
            truss_tension: vec![true; n_members],
            truss_moduli: vec![material.truss_e_tens; n_members],
            ratio,
        }
    }

    /// Same labels and angles with moduli rebuilt for `ratio`.
    pub fn with_ratio(
        &self,
        material: &MaterialConstants,
        schedule: &Continuation,
        ratio: f64,
    ) -> Result<Self> {
        let mut out = self.clone();
        out.ratio = ratio;
        for gps in &mut out.gauss {
            for gp in gps.iter_mut() {
                *gp = gauss_material(material, schedule, ratio, gp.tension, gp.constitutive.theta)?;
            }
        }
        Ok(out)
    }

    /// Constitutive matrices of element `e`.
    pub fn element_d(&self, e: usize) -> [Mat3; 4] {
        let g = &self.gauss[e];
        [
            g[0].constitutive.d,
            g[1].constitutive.d,
            g[2].constitutive.d,
            g[3].constitutive.d,
        ]
    }

    /// Number of labels that differ from `other`.
    pub fn label_changes(&self, other: &StiffnessAssignment) -> usize {
        let gp = self
            .gauss
            .iter()
            .zip(&other.gauss)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(a, b)| {
                (a.tension[0] != b.tension[0]) as usize + (a.tension[1] != b.tension[1]) as usize
            })
            .sum::<usize>();
        let members = self
            .truss_tension
            .iter()
            .zip(&other.truss_tension)
            .filter(|(a, b)| a != b)
            .count();
        gp + members
    }

    /// Bitwise-identical stiffness.
    fn same_stiffness(&self, other: &StiffnessAssignment) -> bool {
        self.truss_moduli == other.truss_moduli
            && self.gauss.iter().zip(&other.gauss).all(|(a, b)| {
                a.iter()
                    .zip(b.iter())
                    .all(|(x, y)| x.constitutive.d == y.constitutive.d)
            })
    }
}

fn gauss_material(
    material: &MaterialConstants,
    schedule: &Continuation,
    ratio: f64,
    tension: [bool; 2],
    theta: f64,
) -> Result<GaussMaterial> {
    let (et, nut) = tension_moduli(material, schedule, ratio);
    let pick = |t: bool| {
        if t {
            (et, nut)
        } else {
            (material.e_comp, material.nu_comp)
        }
    };
    let (e1, nu1) = pick(tension[0]);
    let (e2, _) = pick(tension[1]);
    Ok(GaussMaterial {
        constitutive: fea::constitutive_global(e1, e2, nu1, theta)?,
        tension,
    })
}

/// Everything needed to assemble and solve one design.
#[derive(Debug, Clone, Copy)]
pub struct AnalysisModel<'a> {
    /// Continuum mesh.
    pub mesh: &'a Mesh,
    /// Supports and loads.
    pub bcs: &'a BoundaryConditions,
    /// Element kinematics.
    pub q4: &'a Q4,
    /// Stiffness multiplier per element (thickness times penalized density).
    pub element_scale: &'a [f64],
    /// Truss geometry and spreading maps.
    pub layout: &'a TrussLayout,
    /// Stiffness multiplier per member (penalized sizing).
    pub member_scale: &'a [f64],
}

impl AnalysisModel<'_> {
    /// Element matrix of `e` under `state`.
    pub fn element_matrix(&self, e: usize, state: &StiffnessAssignment) -> Mat8 {
        self.q4
            .stiffness(&state.element_d(e), self.element_scale[e])
    }

    /// Assembles and solves with `state` held fixed.
    pub fn solve(&self, state: &StiffnessAssignment) -> Result<GlobalSystem> {
        let kes: Vec<Mat8> = (0..self.mesh.element_count())
            .map(|e| self.element_matrix(e, state))
            .collect();
        let couplings: Vec<_> = (0..self.layout.members.len())
            .map(|m| {
                self.layout
                    .coupling(m, state.truss_moduli[m], self.member_scale[m])
            })
            .collect();
        fea::assemble_and_solve(self.mesh, &kes, &couplings, self.bcs)
    }

    /// Principal stresses at every Gauss point, computed with the moduli in `state`.
    pub fn gauss_states(
        &self,
        state: &StiffnessAssignment,
        system: &GlobalSystem,
    ) -> Vec<[fea::GaussPointState; 4]> {
        (0..self.mesh.element_count())
            .map(|e| {
                let u = system.element_displacements(self.mesh, e);
                let s = self.q4.stresses(&state.element_d(e), &u);
                [
                    fea::principal_stresses(s[0]),
                    fea::principal_stresses(s[1]),
                    fea::principal_stresses(s[2]),
                    fea::principal_stresses(s[3]),
                ]
            })
            .collect()
    }

    /// Labels every Gauss point and member from the solved field.
    pub fn reassign(
        &self,
        state: &StiffnessAssignment,
        system: &GlobalSystem,
        material: &MaterialConstants,
        schedule: &Continuation,
        ratio: f64,
    ) -> Result<StiffnessAssignment> {
        if !material.bimodulus {
            return Ok(StiffnessAssignment::all_stiff(
                self.mesh.element_count(),
                self.layout.members.len(),
                material,
                ratio,
            ));
        }
        let states = self.gauss_states(state, system);
        let mut gauss = Vec::with_capacity(states.len());
        for gps in &states {
            let mut out = [state.gauss[0][0]; 4];
            for (g, s) in gps.iter().enumerate() {
                out[g] = gauss_material(
                    material,
                    schedule,
                    ratio,
                    [s.sigma1 >= 0.0, s.sigma2 >= 0.0],
                    s.theta,
                )?;
            }
            gauss.push(out);
        }
        let truss_tension: Vec<bool> = (0..self.layout.members.len())
            .map(|m| self.layout.elongation(m, &system.d) >= 0.0)
            .collect();
        let truss_moduli = truss_tension
            .iter()
            .map(|&t| {
                if t {
                    material.truss_e_tens
                } else {
                    material.truss_e_comp
                }
            })
            .collect();
        Ok(StiffnessAssignment {
            gauss,
            truss_tension,
            truss_moduli,
            ratio,
        })
    }
}

/// Settings of the fixed-point loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerLoopSettings {
    /// Moduli.
    pub material: MaterialConstants,
    /// Ratio schedule used when the loop stalls.
    pub continuation: Continuation,
    /// Relative compliance change that counts as converged.
    pub tol: f64,
    /// Iterations per ratio before a continuation step.
    pub max_iters: usize,
}

/// Diagnostics of one inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopReport {
    /// Solves performed, across all ratios tried.
    pub iterations: usize,
    /// Compliance after each solve.
    pub trace: Vec<f64>,
    /// Labels that changed after each solve.
    pub switched: Vec<usize>,
    /// The relative-change criterion was met.
    pub converged: bool,
    /// The returned labels reproduce themselves from the returned field.
    pub labels_consistent: bool,
    /// Ratio in force at exit.
    pub ratio: f64,
    /// Continuation steps forced by stalls or oscillation.
    pub continuation_steps: usize,
}

/// Converged solve with the moduli that produced it.
#[derive(Debug, Clone)]
pub struct InnerLoopOutcome {
    /// System solved with `assignment`.
    pub system: GlobalSystem,
    /// Moduli used for `system`.
    pub assignment: StiffnessAssignment,
    /// Diagnostics.
    pub report: InnerLoopReport,
}

fn relative_change(prev: f64, next: f64) -> f64 {
    if prev == next {
        0.0
    } else {
        (next - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
    }
}

fn period_two(trace: &[f64], tol: f64) -> bool {
    let n = trace.len();
    n >= 4
        && relative_change(trace[n - 3], trace[n - 1]) < tol
        && relative_change(trace[n - 4], trace[n - 2]) < tol
        && relative_change(trace[n - 2], trace[n - 1]) >= tol.max(1e-12)
}

/// Runs the fixed-point loop from `start` at `ratio`.
///
/// Converged means the compliance changed by less than `tol` relative to the
/// previous solve. Once that holds the loop keeps going while labels still
/// flip, so that the returned labels normally reproduce themselves; it stops
/// early on an exact fixed point or a label cycle. If `max_iters` solves pass
/// without convergence (or a period-two cycle shows up first) the ratio takes
/// one continuation step and the loop restarts from the latest labels. At the
/// floor that is an error.
pub fn run_inner_loop(
    model: &AnalysisModel<'_>,
    start: &StiffnessAssignment,
    ratio: f64,
    settings: &InnerLoopSettings,
) -> Result<InnerLoopOutcome> {
    let material = &settings.material;
    let schedule = &settings.continuation;
    let mut ratio = ratio;
    let mut current = if start.ratio == ratio {
        start.clone()
    } else {
        start.with_ratio(material, schedule, ratio)?
    };
    let mut trace = Vec::new();
    let mut switched = Vec::new();
    let mut continuation_steps = 0;
    loop {
        let attempt_start = trace.len();
        let mut met = false;
        for _ in 0..settings.max_iters {
            let system = model.solve(&current)?;
            trace.push(system.compliance);
            let next = model.reassign(&current, &system, material, schedule, ratio)?;
            let changes = next.label_changes(&current);
            switched.push(changes);
            let local = &trace[attempt_start..];
            let n = local.len();
            if n >= 2 && relative_change(local[n - 2], local[n - 1]) < settings.tol {
                met = true;
            }
            let exact = next.same_stiffness(&current);
            let cycling = met && n >= 3 && relative_change(local[n - 3], local[n - 1]) < 1e-12;
            if exact || (met && (changes == 0 || cycling)) {
                let report = InnerLoopReport {
                    iterations: trace.len(),
                    trace,
                    switched,
                    converged: true,
                    labels_consistent: changes == 0,
                    ratio,
                    continuation_steps,
                };
                return Ok(InnerLoopOutcome {
                    system,
                    assignment: current,
                    report,
                });
            }
            if !met && period_two(local, 1e-6) {
                break;
            }
            current = next;
        }
        if met {
            // Criterion satisfied but labels never settled: accept the last solve.
            let system = model.solve(&current)?;
            trace.push(system.compliance);
            let next = model.reassign(&current, &system, material, schedule, ratio)?;
            let changes = next.label_changes(&current);
            switched.push(changes);
            let report = InnerLoopReport {
                iterations: trace.len(),
                trace,
                switched,
                converged: true,
                labels_consistent: changes == 0,
                ratio,
                continuation_steps,
            };
            return Ok(InnerLoopOutcome {
                system,
                assignment: current,
                report,
            });
        }
        if ratio <= schedule.floor {
            return Err(Error::InnerLoopDiverged { trace });
        }
        ratio = apply_continuation(schedule, ratio);
        continuation_steps += 1;
        current = current.with_ratio(material, schedule, ratio)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuation_schedule() {
        let s = Continuation::default();
        assert_eq!(s.start, 0.3);
        assert!((apply_continuation(&s, 0.3) - 0.275).abs() < 1e-15);
        let mut r = s.start;
        let mut steps = 0;
        while r > s.floor {
            let next = apply_continuation(&s, r);
            assert!((r - next - s.step).abs() < 1e-12 || next == s.floor);
            r = next;
            steps += 1;
        }
        assert_eq!(steps, 11);
        assert_eq!(r, 0.025);
        assert_eq!(apply_continuation(&s, s.floor), s.floor);
    }

    #[test]
    fn floor_gives_configured_tension_moduli() {
        let m = MaterialConstants::default();
        let s = Continuation::default();
        assert_eq!(tension_moduli(&m, &s, s.floor), (4.5, 0.0075));
        assert!((m.e_tens / m.e_comp - s.floor).abs() < 1e-15);
        let (e, nu) = tension_moduli(&m, &s, 0.3);
        assert!((e - 54.0).abs() < 1e-12);
        assert!((e / nu - m.e_comp / m.nu_comp).abs() < 1e-9);
    }

    #[test]
    fn period_two_detection() {
        assert!(period_two(&[1.0, 2.0, 1.0, 2.0], 1e-6));
        assert!(!period_two(&[1.0, 2.0, 3.0, 4.0], 1e-6));
        assert!(!period_two(&[1.0, 1.0, 1.0, 1.0], 1e-6));
    }
}
