//! TOML problem description and its normalized form.
//!
//! A document has a `[mesh]` table, `[[supports]]` and `[[loads]]` arrays,
//! an optional `[ground]` table and a `[run]` table. Every `[run]` key except
//! `mode` and the two budgets may be omitted; [`ConfigDoc::normalized`]
//! writes all of them out explicitly. The grammar is in `docs/config.md`.

use std::path::Path;

use rcto_core::domain::{
    total_envelope_volume, Anchor, Continuation, HeavisideSchedule, MaterialConstants, MemberDef,
    SplitSchedule, TrussNode, VtsParams,
};
use rcto_core::{BoundaryConditions, GroundStructure, Mesh, Mode, Problem, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whole config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    /// Envelope discretization.
    pub mesh: MeshSpec,
    /// Restraints.
    #[serde(default)]
    pub supports: Vec<SupportSpec>,
    /// Point loads.
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    /// Steel ground structure; absent means plain concrete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<GroundSpec>,
    /// Run settings.
    pub run: RunSpec,
}

/// `[mesh]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// Elements along x.
    pub nx: usize,
    /// Elements along y.
    pub ny: usize,
    /// Square element edge length.
    pub element_size: f64,
}

/// Translational axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Horizontal.
    X,
    /// Vertical.
    Y,
}

/// One `[[supports]]` entry. Exactly one of `at`, `node`, `near` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSpec {
    /// Named anchor such as `"bottom-left"` or `"left-edge"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    /// Raw node index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    /// Lattice node nearest to this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<[f64; 2]>,
    /// Restrained directions.
    pub fix: Vec<Axis>,
}

/// One `[[loads]]` entry, applied in full to every node of its anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    /// Named anchor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    /// Raw node index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    /// Lattice node nearest to this point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<[f64; 2]>,
    /// Horizontal component.
    #[serde(default)]
    pub fx: f64,
    /// Vertical component.
    #[serde(default)]
    pub fy: f64,
}

/// `[ground]`: either a generated lattice or explicit nodes and members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSpec {
    /// Generated lattice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeSpec>,
    /// Explicit nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    /// Explicit members.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<MemberSpec>,
}

/// `[ground.lattice]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    /// Node columns.
    pub cols: usize,
    /// Node rows.
    pub rows: usize,
    /// Member cross-section area.
    pub area: f64,
    /// Inset from the envelope edges; defaults to one element.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// Connectivity reach in lattice steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    /// Node travel either side in x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_x: Option<f64>,
    /// Node travel either side in y.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_y: Option<f64>,
}

/// `[[ground.nodes]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// Reference position.
    pub position: [f64; 2],
    /// `[min, max]` offset in x; `[0, 0]` fixes the coordinate.
    #[serde(default)]
    pub move_x: [f64; 2],
    /// `[min, max]` offset in y.
    #[serde(default)]
    pub move_y: [f64; 2],
}

/// `[[ground.members]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    /// End node indices.
    pub nodes: [usize; 2],
    /// Cross-section area.
    pub area: f64,
}

/// Design mode name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    /// SIMP with projection.
    Binary,
    /// Variable thickness sheet.
    Vts,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::Binary => Mode::Binary,
            ModeSpec::Vts => Mode::Vts,
        }
    }
}

impl From<Mode> for ModeSpec {
    fn from(m: Mode) -> ModeSpec {
        match m {
            Mode::Binary => ModeSpec::Binary,
            Mode::Vts => ModeSpec::Vts,
        }
    }
}

/// `[run]`. Lengths are absolute; defaults scale with the element size.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// `"binary"` or `"vts"`.
    pub mode: Option<ModeSpec>,
    /// Out-of-plane (maximum) thickness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
    /// Concrete budget as a volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concrete_volume_max: Option<f64>,
    /// Concrete budget as a fraction of the envelope; normalized to a volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concrete_fraction: Option<f64>,
    /// Steel budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steel_volume_max: Option<f64>,
    /// Initial density; absent means the concrete fill fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_density: Option<f64>,
    /// Initial member sizing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sizing: Option<f64>,
    /// SIMP exponent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simp_penalty: Option<f64>,
    /// Void stiffness floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_floor: Option<f64>,
    /// Density filter radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_radius: Option<f64>,
    /// Stiffness spreading radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ssm_radius: Option<f64>,
    /// Bimodulus loop tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_loop_tol: Option<f64>,
    /// Bimodulus loop cap per ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_loop_max_iters: Option<usize>,
    /// Outer iteration cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer_iters: Option<usize>,
    /// Convergence threshold on the design change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_tol: Option<f64>,
    /// Move limit for densities and sizings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_limit: Option<f64>,
    /// Move limit for scaled node positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub move_limit_position: Option<f64>,
    /// Shortest admissible member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_member_length: Option<f64>,
    /// Moduli.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialSpec>,
    /// Ratio continuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation: Option<ContinuationSpec>,
    /// Projection schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heaviside: Option<HeavisideSpec>,
    /// Sigmoid and split-node anisotropy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vts: Option<VtsSpec>,
    /// Member halving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
}

/// `[run.material]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    /// Compressive concrete modulus.
    pub e_comp: Option<f64>,
    /// Tensile concrete modulus at the ratio floor.
    pub e_tens: Option<f64>,
    /// Compressive Poisson ratio.
    pub nu_comp: Option<f64>,
    /// Tensile Poisson ratio at the ratio floor.
    pub nu_tens: Option<f64>,
    /// Steel modulus in tension.
    pub truss_e_tens: Option<f64>,
    /// Steel modulus in compression.
    pub truss_e_comp: Option<f64>,
    /// Sign-dependent stiffness on or off.
    pub bimodulus: Option<bool>,
}

/// `[run.continuation]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSpec {
    /// First ratio.
    pub start: Option<f64>,
    /// Decrement.
    pub step: Option<f64>,
    /// Last ratio.
    pub floor: Option<f64>,
    /// Outer iterations per step.
    pub interval: Option<usize>,
}

/// `[run.heaviside]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeavisideSpec {
    /// Projection on or off (Binary mode only).
    pub enabled: Option<bool>,
    /// First sharpness.
    pub beta_start: Option<f64>,
    /// Last sharpness.
    pub beta_max: Option<f64>,
    /// Outer iterations before doubling.
    pub interval: Option<usize>,
    /// Projection threshold.
    pub threshold: Option<f64>,
}

/// `[run.vts]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VtsSpec {
    /// Sigmoid knee.
    pub m: Option<f64>,
    /// Sigmoid steepness.
    pub c: Option<f64>,
    /// x-to-y travel ratio of split nodes.
    pub x_bound_factor: Option<f64>,
}

/// `[run.split]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    /// Outer iterations between splits; 0 disables.
    pub interval: Option<usize>,
    /// Members shorter than this stay whole.
    pub min_length: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ConfigDoc {
    /// Parses TOML text.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and parses a file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| e.at(path))
    }

    /// Pretty TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    /// Validated problem.
    pub fn build(&self) -> Result<Problem> {
        let mesh = Mesh::new(self.mesh.nx, self.mesh.ny, self.mesh.element_size)?;
        let mut fixed = Vec::new();
        for (k, s) in self.supports.iter().enumerate() {
            let anchor = anchor(s.at.as_deref(), s.node, s.near)
                .map_err(|m| invalid(format!("supports[{k}]: {m}")))?;
            if s.fix.is_empty() {
                return Err(invalid(format!("supports[{k}]: fix lists no axis")));
            }
            for n in mesh.resolve(&anchor)? {
                for axis in &s.fix {
                    fixed.push(2 * n + axis_offset(*axis));
                }
            }
        }
        let mut loads = Vec::new();
        for (k, l) in self.loads.iter().enumerate() {
            let anchor = anchor(l.at.as_deref(), l.node, l.near)
                .map_err(|m| invalid(format!("loads[{k}]: {m}")))?;
            for n in mesh.resolve(&anchor)? {
                if l.fx != 0.0 {
                    loads.push((2 * n, l.fx));
                }
                if l.fy != 0.0 {
                    loads.push((2 * n + 1, l.fy));
                }
            }
        }
        let bcs = BoundaryConditions::new(&mesh, fixed, loads)?;
        let config = self.run_config(&mesh)?;
        let ground = match &self.ground {
            None => GroundStructure {
                nodes: Vec::new(),
                members: Vec::new(),
            },
            Some(g) => g.build(&mesh)?,
        };
        Ok(Problem::new(mesh, bcs, ground, config)?)
    }

    /// Same document with every default written out, budgets as volumes
    /// and lattice options resolved. Parsing the result builds an equal
    /// [`Problem`].
    pub fn normalized(&self) -> Result<Self> {
        let problem = self.build()?;
        let h = problem.mesh.element_size();
        let ground = self.ground.as_ref().map(|g| GroundSpec {
            lattice: g.lattice.as_ref().map(|l| LatticeSpec {
                margin: Some(l.margin.unwrap_or(h)),
                level: Some(l.level.unwrap_or(1)),
                move_x: Some(l.move_x.unwrap_or(0.0)),
                move_y: Some(l.move_y.unwrap_or(0.0)),
                ..l.clone()
            }),
            ..g.clone()
        });
        Ok(ConfigDoc {
            mesh: self.mesh.clone(),
            supports: self.supports.clone(),
            loads: self.loads.clone(),
            ground,
            run: RunSpec::from_config(&problem.config),
        })
    }

    fn run_config(&self, mesh: &Mesh) -> Result<RunConfig> {
        let r = &self.run;
        let mode = r.mode.ok_or_else(|| invalid("run.mode is required"))?;
        let mut c = RunConfig::with_defaults(mode.into(), mesh.element_size());
        set(&mut c.thickness, r.thickness);
        c.concrete_volume_max = match (r.concrete_volume_max, r.concrete_fraction) {
            (Some(v), None) => v,
            (None, Some(f)) => f * total_envelope_volume(mesh, c.thickness),
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "give run.concrete_volume_max or run.concrete_fraction, not both",
                ))
            }
            (None, None) => return Err(invalid("run.concrete_volume_max is required")),
        };
        c.steel_volume_max = r
            .steel_volume_max
            .ok_or_else(|| invalid("run.steel_volume_max is required"))?;
        c.initial_density = r.initial_density;
        set(&mut c.initial_sizing, r.initial_sizing);
        set(&mut c.simp_penalty, r.simp_penalty);
        set(&mut c.density_floor, r.density_floor);
        set(&mut c.filter_radius, r.filter_radius);
        set(&mut c.ssm_radius, r.ssm_radius);
        set(&mut c.inner_loop_tol, r.inner_loop_tol);
        set(&mut c.inner_loop_max_iters, r.inner_loop_max_iters);
        set(&mut c.max_outer_iters, r.max_outer_iters);
        set(&mut c.change_tol, r.change_tol);
        set(&mut c.move_limit, r.move_limit);
        set(&mut c.move_limit_position, r.move_limit_position);
        set(&mut c.min_member_length, r.min_member_length);
        if let Some(m) = &r.material {
            let t = &mut c.material;
            set(&mut t.e_comp, m.e_comp);
            set(&mut t.e_tens, m.e_tens);
            set(&mut t.nu_comp, m.nu_comp);
            set(&mut t.nu_tens, m.nu_tens);
            set(&mut t.truss_e_tens, m.truss_e_tens);
            set(&mut t.truss_e_comp, m.truss_e_comp);
            set(&mut t.bimodulus, m.bimodulus);
        }
        if let Some(s) = &r.continuation {
            let t = &mut c.continuation;
            set(&mut t.start, s.start);
            set(&mut t.step, s.step);
            set(&mut t.floor, s.floor);
            set(&mut t.interval, s.interval);
        }
        if let Some(s) = &r.heaviside {
            let t = &mut c.heaviside;
            set(&mut t.enabled, s.enabled);
            set(&mut t.beta_start, s.beta_start);
            set(&mut t.beta_max, s.beta_max);
            set(&mut t.interval, s.interval);
            set(&mut t.threshold, s.threshold);
        }
        if let Some(s) = &r.vts {
            let t = &mut c.vts;
            set(&mut t.m, s.m);
            set(&mut t.c, s.c);
            set(&mut t.x_bound_factor, s.x_bound_factor);
        }
        if let Some(s) = &r.split {
            let t = &mut c.split;
            set(&mut t.interval, s.interval);
            set(&mut t.min_length, s.min_length);
        }
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn axis_offset(a: Axis) -> usize {
    match a {
        Axis::X => 0,
        Axis::Y => 1,
    }
}

fn anchor(
    at: Option<&str>,
    node: Option<usize>,
    near: Option<[f64; 2]>,
) -> std::result::Result<Anchor, String> {
    match (at, node, near) {
        (Some(name), None, None) => {
            Anchor::from_name(name).ok_or_else(|| format!("unknown anchor \"{name}\""))
        }
        (None, Some(n), None) => Ok(Anchor::Node(n)),
        (None, None, Some(p)) => Ok(Anchor::Nearest(p)),
        _ => Err(String::from("exactly one of at, node, near must be given")),
    }
}

impl GroundSpec {
    fn build(&self, mesh: &Mesh) -> Result<GroundStructure> {
        if let Some(l) = &self.lattice {
            if !self.nodes.is_empty() || !self.members.is_empty() {
                return Err(invalid(
                    "ground: lattice cannot be combined with explicit nodes or members",
                ));
            }
            return Ok(GroundStructure::lattice(
                mesh,
                l.cols,
                l.rows,
                l.margin.unwrap_or(mesh.element_size()),
                l.level.unwrap_or(1),
                l.area,
                l.move_x.unwrap_or(0.0),
                l.move_y.unwrap_or(0.0),
            )?);
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| TrussNode {
                position: n.position,
                bounds: [(n.move_x[0], n.move_x[1]), (n.move_y[0], n.move_y[1])],
            })
            .collect();
        let members = self
            .members
            .iter()
            .map(|m| MemberDef {
                nodes: m.nodes,
                area: m.area,
            })
            .collect();
        Ok(GroundStructure { nodes, members })
    }
}

impl RunSpec {
    /// Fully explicit spec for `c`.
    pub fn from_config(c: &RunConfig) -> Self {
        let MaterialConstants {
            e_comp,
            e_tens,
            nu_comp,
            nu_tens,
            truss_e_tens,
            truss_e_comp,
            bimodulus,
        } = c.material;
        let Continuation {
            start,
            step,
            floor,
            interval,
        } = c.continuation;
        let HeavisideSchedule {
            enabled,
            beta_start,
            beta_max,
            interval: beta_interval,
            threshold,
        } = c.heaviside;
        let VtsParams {
            m,
            c: steep,
            x_bound_factor,
        } = c.vts;
        let SplitSchedule {
            interval: split_interval,
            min_length,
        } = c.split;
        RunSpec {
            mode: Some(c.mode.into()),
            thickness: Some(c.thickness),
            concrete_volume_max: Some(c.concrete_volume_max),
            concrete_fraction: None,
            steel_volume_max: Some(c.steel_volume_max),
            initial_density: c.initial_density,
            initial_sizing: Some(c.initial_sizing),
            simp_penalty: Some(c.simp_penalty),
            density_floor: Some(c.density_floor),
            filter_radius: Some(c.filter_radius),
            ssm_radius: Some(c.ssm_radius),
            inner_loop_tol: Some(c.inner_loop_tol),
            inner_loop_max_iters: Some(c.inner_loop_max_iters),
            max_outer_iters: Some(c.max_outer_iters),
            change_tol: Some(c.change_tol),
            move_limit: Some(c.move_limit),
            move_limit_position: Some(c.move_limit_position),
            min_member_length: Some(c.min_member_length),
            material: Some(MaterialSpec {
                e_comp: Some(e_comp),
                e_tens: Some(e_tens),
                nu_comp: Some(nu_comp),
                nu_tens: Some(nu_tens),
                truss_e_tens: Some(truss_e_tens),
                truss_e_comp: Some(truss_e_comp),
                bimodulus: Some(bimodulus),
            }),
            continuation: Some(ContinuationSpec {
                start: Some(start),
                step: Some(step),
                floor: Some(floor),
                interval: Some(interval),
            }),
            heaviside: Some(HeavisideSpec {
                enabled: Some(enabled),
                beta_start: Some(beta_start),
                beta_max: Some(beta_max),
                interval: Some(beta_interval),
                threshold: Some(threshold),
            }),
            vts: Some(VtsSpec {
                m: Some(m),
                c: Some(steep),
                x_bound_factor: Some(x_bound_factor),
            }),
            split: Some(SplitSpec {
                interval: Some(split_interval),
                min_length: Some(min_length),
            }),
        }
    }
}
