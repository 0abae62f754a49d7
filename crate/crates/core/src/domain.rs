//! Design envelope, boundary conditions, ground structure and run settings.
//!
//! Node and element numbering is column-major with `y` varying fastest:
//! node `(i, j)` (column `i`, row `j`, origin at the bottom-left corner) has
//! index `i * (ny + 1) + j`, and element `(i, j)` has index `i * ny + j`.
//! Element nodes run counter-clockwise from the bottom-left corner. DOF `2n`
//! is the `x` displacement of node `n` and `2n + 1` the `y` displacement.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Structured grid of square 4-node plane-stress elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    element_size: f64,
}

impl Mesh {
    /// Builds an `nx` by `ny` grid with square elements of edge `element_size`.
    pub fn new(nx: usize, ny: usize, element_size: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidProblem(String::from(
                "mesh needs at least one element per axis",
            )));
        }
        if !(element_size > 0.0) || !element_size.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "element_size must be positive, got {element_size}"
            )));
        }
        Ok(Mesh {
            nx,
            ny,
            element_size,
        })
    }

    /// Elements along `x`.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Elements along `y`.
    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Edge length of every element.
    pub fn element_size(&self) -> f64 {
        self.element_size
    }

    /// Envelope width.
    pub fn width(&self) -> f64 {
        self.nx as f64 * self.element_size
    }

    /// Envelope height.
    pub fn height(&self) -> f64 {
        self.ny as f64 * self.element_size
    }

    /// Number of lattice nodes.
    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    /// Number of elements.
    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Two DOFs per node.
    pub fn dof_count(&self) -> usize {
        2 * self.node_count()
    }

    /// Index of node at column `i`, row `j`.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    /// Column and row of node `n`.
    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n / (self.ny + 1), n % (self.ny + 1))
    }

    /// Position of node `n`.
    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(n);
        [i as f64 * self.element_size, j as f64 * self.element_size]
    }

    /// Counter-clockwise node list starting at the bottom-left corner.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let i = e / self.ny;
        let j = e % self.ny;
        [
            self.node_index(i, j),
            self.node_index(i + 1, j),
            self.node_index(i + 1, j + 1),
            self.node_index(i, j + 1),
        ]
    }

    /// The eight DOFs of element `e`, in node order, `x` before `y`.
    pub fn element_dofs(&self, e: usize) -> [usize; 8] {
        let n = self.element_nodes(e);
        [
            2 * n[0],
            2 * n[0] + 1,
            2 * n[1],
            2 * n[1] + 1,
            2 * n[2],
            2 * n[2] + 1,
            2 * n[3],
            2 * n[3] + 1,
        ]
    }

    /// Centroid of element `e`.
    pub fn element_center(&self, e: usize) -> [f64; 2] {
        let i = e / self.ny;
        let j = e % self.ny;
        [
            (i as f64 + 0.5) * self.element_size,
            (j as f64 + 0.5) * self.element_size,
        ]
    }

    /// Element containing point `p`, clamped to the envelope.
    pub fn element_at(&self, p: [f64; 2]) -> usize {
        let clamp = |v: f64, n: usize| -> usize {
            let k = libm::floor(v / self.element_size);
            if k < 0.0 {
                0
            } else if k as usize >= n {
                n - 1
            } else {
                k as usize
            }
        };
        clamp(p[0], self.nx) * self.ny + clamp(p[1], self.ny)
    }

    /// Nodes whose distance to `p` is at most `radius`, in index order,
    /// paired with that distance.
    pub fn nodes_within(&self, p: [f64; 2], radius: f64) -> Vec<(usize, f64)> {
        let h = self.element_size;
        let lo = |v: f64| -> usize {
            let k = libm::ceil((v - radius) / h);
            if k < 0.0 {
                0
            } else {
                k as usize
            }
        };
        let hi = |v: f64, n: usize| -> Option<usize> {
            let k = libm::floor((v + radius) / h);
            if k < 0.0 {
                None
            } else {
                Some((k as usize).min(n))
            }
        };
        let mut out = Vec::new();
        let (Some(i1), Some(j1)) = (hi(p[0], self.nx), hi(p[1], self.ny)) else {
            return out;
        };
        for i in lo(p[0])..=i1 {
            for j in lo(p[1])..=j1 {
                let dx = i as f64 * h - p[0];
                let dy = j as f64 * h - p[1];
                let d = libm::sqrt(dx * dx + dy * dy);
                if d <= radius {
                    out.push((self.node_index(i, j), d));
                }
            }
        }
        out
    }

    /// Resolves a named location to node indices.
    pub fn resolve(&self, anchor: &Anchor) -> Result<Vec<usize>> {
        let mid = self.nx / 2;
        let nodes = match *anchor {
            Anchor::BottomLeft => alloc::vec![self.node_index(0, 0)],
            Anchor::BottomRight => alloc::vec![self.node_index(self.nx, 0)],
            Anchor::TopLeft => alloc::vec![self.node_index(0, self.ny)],
            Anchor::TopRight => alloc::vec![self.node_index(self.nx, self.ny)],
            Anchor::TopMid => alloc::vec![self.node_index(mid, self.ny)],
            Anchor::BottomMid => alloc::vec![self.node_index(mid, 0)],
            Anchor::LeftEdge => (0..=self.ny).map(|j| self.node_index(0, j)).collect(),
            Anchor::RightEdge => (0..=self.ny).map(|j| self.node_index(self.nx, j)).collect(),
            Anchor::BottomEdge => (0..=self.nx).map(|i| self.node_index(i, 0)).collect(),
            Anchor::TopEdge => (0..=self.nx).map(|i| self.node_index(i, self.ny)).collect(),
            Anchor::Node(n) => {
                if n >= self.node_count() {
                    return Err(Error::InvalidProblem(format!(
                        "node {n} out of range (mesh has {} nodes)",
                        self.node_count()
                    )));
                }
                alloc::vec![n]
            }
            Anchor::Nearest(p) => {
                let h = self.element_size;
                let i = libm::round(p[0] / h).clamp(0.0, self.nx as f64) as usize;
                let j = libm::round(p[1] / h).clamp(0.0, self.ny as f64) as usize;
                alloc::vec![self.node_index(i, j)]
            }
        };
        Ok(nodes)
    }
}

/// Named mesh location. Mid-span anchors use column `nx / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// Corner node `(0, 0)`.
    BottomLeft,
    /// Corner node `(nx, 0)`.
    BottomRight,
    /// Corner node `(0, ny)`.
    TopLeft,
    /// Corner node `(nx, ny)`.
    TopRight,
    /// Node `(nx / 2, ny)`.
    TopMid,
    /// Node `(nx / 2, 0)`.
    BottomMid,
    /// All nodes with `i = 0`.
    LeftEdge,
    /// All nodes with `i = nx`.
    RightEdge,
    /// All nodes with `j = 0`.
    BottomEdge,
    /// All nodes with `j = ny`.
    TopEdge,
    /// A raw node index.
    Node(usize),
    /// The lattice node closest to a point.
    Nearest([f64; 2]),
}

impl Anchor {
    /// Parses the kebab-case anchor names used in config files.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "bottom-left" => Anchor::BottomLeft,
            "bottom-right" => Anchor::BottomRight,
            "top-left" => Anchor::TopLeft,
            "top-right" => Anchor::TopRight,
            "top-mid" => Anchor::TopMid,
            "bottom-mid" => Anchor::BottomMid,
            "left-edge" => Anchor::LeftEdge,
            "right-edge" => Anchor::RightEdge,
            "bottom-edge" => Anchor::BottomEdge,
            "top-edge" => Anchor::TopEdge,
            _ => return None,
        })
    }
}

/// Restrained DOFs and nodal point loads.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    fixed_dofs: Vec<usize>,
    point_loads: Vec<(usize, f64)>,
}

impl BoundaryConditions {
    /// Validates supports and loads against `mesh`.
    ///
    /// Fixed DOFs are sorted and deduplicated; loads on the same DOF are
    /// summed, keeping first-appearance order.
    pub fn new(
        mesh: &Mesh,
        fixed_dofs: Vec<usize>,
        point_loads: Vec<(usize, f64)>,
    ) -> Result<Self> {
        let ndof = mesh.dof_count();
        let mut fixed = fixed_dofs;
        fixed.sort_unstable();
        fixed.dedup();
        if let Some(&bad) = fixed.iter().find(|&&d| d >= ndof) {
            return Err(Error::InvalidProblem(format!(
                "fixed dof {bad} out of range"
            )));
        }
        let mut loads: Vec<(usize, f64)> = Vec::new();
        for (dof, value) in point_loads {
            if dof >= ndof {
                return Err(Error::InvalidProblem(format!(
                    "load dof {dof} out of range"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "load on dof {dof} is not finite"
                )));
            }
            if fixed.binary_search(&dof).is_ok() {
                return Err(Error::InvalidProblem(format!(
                    "load applied to fixed dof {dof}"
                )));
            }
            match loads.iter_mut().find(|(d, _)| *d == dof) {
                Some(slot) => slot.1 += value,
                None => loads.push((dof, value)),
            }
        }
        if !restrains_rigid_body(mesh, &fixed) {
            return Err(Error::RigidBodyMotion);
        }
        Ok(BoundaryConditions {
            fixed_dofs: fixed,
            point_loads: loads,
        })
    }

    /// Sorted restrained DOFs.
    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed_dofs
    }

    /// `(dof, magnitude)` pairs.
    pub fn point_loads(&self) -> &[(usize, f64)] {
        &self.point_loads
    }

    /// Whether `dof` is restrained.
    pub fn is_fixed(&self, dof: usize) -> bool {
        self.fixed_dofs.binary_search(&dof).is_ok()
    }

    /// Dense global load vector.
    pub fn load_vector(&self, ndof: usize) -> Vec<f64> {
        let mut f = alloc::vec![0.0; ndof];
        for &(dof, v) in &self.point_loads {
            f[dof] += v;
        }
        f
    }
}

/// Checks that the three planar rigid modes restricted to the fixed DOFs
/// are linearly independent.
fn restrains_rigid_body(mesh: &Mesh, fixed: &[usize]) -> bool {
    if fixed.len() < 3 {
        return false;
    }
    // Rotation about the envelope centre keeps the Gram matrix well scaled.
    let cx = 0.5 * mesh.width();
    let cy = 0.5 * mesh.height();
    let scale = mesh.width().max(mesh.height());
    let mut gram = [[0.0f64; 3]; 3];
    for &dof in fixed {
        let p = mesh.node_coords(dof / 2);
        let row = if dof % 2 == 0 {
            [1.0, 0.0, -(p[1] - cy) / scale]
        } else {
            [0.0, 1.0, (p[0] - cx) / scale]
        };
        for a in 0..3 {
            for b in 0..3 {
                gram[a][b] += row[a] * row[b];
            }
        }
    }
    let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
        - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
        + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
    let n = fixed.len() as f64;
    det > 1e-10 * n * n * n
}

/// A movable truss node: reference position plus admissible offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrussNode {
    /// Reference position.
    pub position: [f64; 2],
    /// Per-axis `(min, max)` offset from the reference position.
    pub bounds: [(f64, f64); 2],
}

impl TrussNode {
    /// Node fixed in place.
    pub fn fixed(position: [f64; 2]) -> Self {
        TrussNode {
            position,
            bounds: [(0.0, 0.0); 2],
        }
    }

    /// Whether the node can move along `axis`.
    pub fn is_movable(&self, axis: usize) -> bool {
        self.bounds[axis].1 > self.bounds[axis].0
    }

    /// Axis-aligned box of admissible positions, `[xmin, xmax, ymin, ymax]`.
    pub fn reach(&self) -> [f64; 4] {
        [
            self.position[0] + self.bounds[0].0,
            self.position[0] + self.bounds[0].1,
            self.position[1] + self.bounds[1].0,
            self.position[1] + self.bounds[1].1,
        ]
    }
}

/// A candidate steel bar between two truss nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberDef {
    /// Endpoint node indices.
    pub nodes: [usize; 2],
    /// Full cross-sectional area at `x_t = 1`.
    pub area: f64,
}

/// Movable truss nodes and the candidate members joining them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundStructure {
    /// Truss nodes.
    pub nodes: Vec<TrussNode>,
    /// Candidate members.
    pub members: Vec<MemberDef>,
}

impl GroundStructure {
    /// Regular lattice of `cols` by `rows` nodes inset by `margin` from the
    /// envelope edges, connecting every pair whose column and row offsets are
    /// both at most `level`, skipping pairs that overlap a shorter collinear
    /// member. Node offsets are clipped to the envelope and to half the
    /// lattice spacing so that member boxes never touch.
    #[allow(clippy::too_many_arguments)]
    pub fn lattice(
        mesh: &Mesh,
        cols: usize,
        rows: usize,
        margin: f64,
        level: usize,
        area: f64,
        move_x: f64,
        move_y: f64,
    ) -> Result<Self> {
        if cols < 2 || rows < 1 {
            return Err(Error::InvalidProblem(String::from(
                "ground structure lattice needs at least 2 columns and 1 row",
            )));
        }
        let w = mesh.width() - 2.0 * margin;
        let h = mesh.height() - 2.0 * margin;
        if w <= 0.0 || (rows > 1 && h <= 0.0) {
            return Err(Error::InvalidProblem(String::from(
                "ground structure margin leaves no room for nodes",
            )));
        }
        let sx = w / (cols - 1) as f64;
        let sy = if rows > 1 {
            h / (rows - 1) as f64
        } else {
            f64::INFINITY
        };
        let mx = move_x.min(0.45 * sx);
        let my = move_y.min(0.45 * sy);
        let mut nodes = Vec::with_capacity(cols * rows);
        for i in 0..cols {
            for j in 0..rows {
                let x = margin + i as f64 * sx;
                let y = if rows > 1 {
                    margin + j as f64 * sy
                } else {
                    0.5 * mesh.height()
                };
                let bx = ((-mx).max(-x), mx.min(mesh.width() - x));
                let by = ((-my).max(-y), my.min(mesh.height() - y));
                nodes.push(TrussNode {
                    position: [x, y],
                    bounds: [bx, by],
                });
            }
        }
        let mut members = Vec::new();
        for a in 0..nodes.len() {
            let (ia, ja) = (a / rows, a % rows);
            for b in (a + 1)..nodes.len() {
                let (ib, jb) = (b / rows, b % rows);
                let di = ib.abs_diff(ia);
                let dj = jb.abs_diff(ja);
                if di > level || dj > level {
                    continue;
                }
                // Drop members that pass through another node.
                if gcd(di, dj) != 1 {
                    continue;
                }
                members.push(MemberDef {
                    nodes: [a, b],
                    area,
                });
            }
        }
        Ok(GroundStructure { nodes, members })
    }

    /// Checks bounds, envelope containment and admissible member lengths.
    pub fn validate(&self, mesh: &Mesh, min_length: f64) -> Result<()> {
        let (w, h) = (mesh.width(), mesh.height());
        let tol = 1e-9 * w.max(h);
        for (k, node) in self.nodes.iter().enumerate() {
            for axis in 0..2 {
                let (lo, hi) = node.bounds[axis];
                if !(lo <= 0.0 && hi >= 0.0) {
                    return Err(Error::InvalidProblem(format!(
                        "truss node {k}: bounds must bracket the reference position"
                    )));
                }
            }
            let r = node.reach();
            if r[0] < -tol || r[1] > w + tol || r[2] < -tol || r[3] > h + tol {
                return Err(Error::InvalidProblem(format!(
                    "truss node {k} can leave the design envelope"
                )));
            }
        }
        for (m, member) in self.members.iter().enumerate() {
            let [a, b] = member.nodes;
            if a >= self.nodes.len() || b >= self.nodes.len() {
                return Err(Error::InvalidProblem(format!(
                    "member {m} references a missing node"
                )));
            }
            if !(member.area > 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "member {m} must have positive area"
                )));
            }
            if a == b || box_gap(&self.nodes[a].reach(), &self.nodes[b].reach()) <= min_length {
                return Err(Error::ZeroLengthMember { member: m });
            }
        }
        Ok(())
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest distance between two `[xmin, xmax, ymin, ymax]` boxes.
pub(crate) fn box_gap(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let gx = (a[0] - b[1]).max(b[0] - a[1]).max(0.0);
    let gy = (a[2] - b[3]).max(b[2] - a[3]).max(0.0);
    libm::sqrt(gx * gx + gy * gy)
}

/// Which penalization and filter chain the optimizer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// SIMP + density filter + Heaviside projection.
    Binary,
    /// Variable thickness sheet with minimum-thickness sigmoid.
    Vts,
}

/// Tension/compression moduli for concrete and steel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialConstants {
    /// Concrete modulus along a compressive principal direction.
    pub e_comp: f64,
    /// Concrete modulus along a tensile principal direction at the ratio floor.
    pub e_tens: f64,
    /// Concrete Poisson ratio in compression.
    pub nu_comp: f64,
    /// Concrete Poisson ratio in tension at the ratio floor.
    pub nu_tens: f64,
    /// Steel modulus in tension.
    pub truss_e_tens: f64,
    /// Steel modulus in compression.
    pub truss_e_comp: f64,
    /// When false every Gauss point and member keeps its stiff modulus.
    pub bimodulus: bool,
}

impl Default for MaterialConstants {
    fn default() -> Self {
        MaterialConstants {
            e_comp: 180.0,
            e_tens: 4.5,
            nu_comp: 0.3,
            nu_tens: 0.0075,
            truss_e_tens: 5800.0,
            truss_e_comp: 0.01,
            bimodulus: true,
        }
    }
}

/// Schedule for the concrete tension/compression modulus ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuation {
    /// Initial ratio.
    pub start: f64,
    /// Decrement per step.
    pub step: f64,
    /// Smallest ratio.
    pub floor: f64,
    /// Outer iterations between scheduled steps.
    pub interval: usize,
}

impl Default for Continuation {
    fn default() -> Self {
        Continuation {
            start: 0.3,
            step: 0.025,
            floor: 0.025,
            interval: 1,
        }
    }
}

/// Heaviside sharpness continuation (Binary mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavisideSchedule {
    /// Disabled projection leaves the filtered field untouched.
    pub enabled: bool,
    /// First sharpness.
    pub beta_start: f64,
    /// Last sharpness.
    pub beta_max: f64,
    /// Outer iterations before doubling.
    pub interval: usize,
    /// Filtered density that projects to one half.
    pub threshold: f64,
}

impl Default for HeavisideSchedule {
    fn default() -> Self {
        HeavisideSchedule {
            enabled: true,
            beta_start: 1.0,
            beta_max: 64.0,
            interval: 30,
            threshold: 0.5,
        }
    }
}

/// Minimum-thickness sigmoid and node anisotropy for VTS mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VtsParams {
    /// Knee of the sigmoid.
    pub m: f64,
    /// Sigmoid steepness.
    pub c: f64,
    /// Ratio of `x` to `y` movement range for nodes created by splitting.
    pub x_bound_factor: f64,
}

impl Default for VtsParams {
    fn default() -> Self {
        VtsParams {
            m: 0.3,
            c: 20.0,
            x_bound_factor: 0.5,
        }
    }
}

/// Member halving cadence (VTS mode).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSchedule {
    /// Outer iterations between splits; 0 disables splitting.
    pub interval: usize,
    /// Members shorter than this are not split further.
    pub min_length: f64,
}

/// Every tunable of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Design mode.
    pub mode: Mode,
    /// Out-of-plane thickness (maximum thickness in VTS mode).
    pub thickness: f64,
    /// Concrete volume budget.
    pub concrete_volume_max: f64,
    /// Steel volume budget.
    pub steel_volume_max: f64,
    /// Initial uniform density; `None` uses the concrete fill fraction.
    pub initial_density: Option<f64>,
    /// Initial member sizing `x_t`.
    pub initial_sizing: f64,
    /// SIMP exponent.
    pub simp_penalty: f64,
    /// Stiffness multiplier floor for void elements.
    pub density_floor: f64,
    /// Density filter radius.
    pub filter_radius: f64,
    /// Heaviside continuation.
    pub heaviside: HeavisideSchedule,
    /// VTS parameters.
    pub vts: VtsParams,
    /// Stiffness spreading radius.
    pub ssm_radius: f64,
    /// Moduli.
    pub material: MaterialConstants,
    /// Ratio continuation.
    pub continuation: Continuation,
    /// Relative compliance change that ends the inner loop.
    pub inner_loop_tol: f64,
    /// Inner iterations per ratio before a continuation step is forced.
    pub inner_loop_max_iters: usize,
    /// Outer iteration cap.
    pub max_outer_iters: usize,
    /// Max design change that ends the run once all schedules are done.
    pub change_tol: f64,
    /// MMA move limit for `x_c` and `x_t`.
    pub move_limit: f64,
    /// MMA move limit for the scaled node positions.
    pub move_limit_position: f64,
    /// Member halving schedule.
    pub split: SplitSchedule,
    /// Shortest admissible member length.
    pub min_member_length: f64,
}

impl RunConfig {
    /// Defaults for a mesh with edge length `h`; budgets must still be set.
    pub fn with_defaults(mode: Mode, element_size: f64) -> Self {
        RunConfig {
            mode,
            thickness: 1.0,
            concrete_volume_max: 0.0,
            steel_volume_max: 0.0,
            initial_density: None,
            initial_sizing: 0.5,
            simp_penalty: 3.0,
            density_floor: 1e-9,
            filter_radius: 2.5 * element_size,
            heaviside: HeavisideSchedule::default(),
            vts: VtsParams::default(),
            ssm_radius: 1.5 * element_size,
            material: MaterialConstants::default(),
            continuation: Continuation::default(),
            inner_loop_tol: 1e-3,
            inner_loop_max_iters: 50,
            max_outer_iters: 300,
            change_tol: 0.01,
            move_limit: 0.1,
            move_limit_position: 0.05,
            split: SplitSchedule {
                interval: 40,
                min_length: 2.0 * element_size,
            },
            min_member_length: 0.1 * element_size,
        }
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        let envelope = total_envelope_volume(mesh, self.thickness);
        if !(self.thickness > 0.0) {
            return bad(format!(
                "thickness must be positive, got {}",
                self.thickness
            ));
        }
        if !(self.concrete_volume_max > 0.0) || self.concrete_volume_max > envelope * (1.0 + 1e-12)
        {
            return bad(format!(
                "concrete_volume_max must lie in (0, {envelope}], got {}",
                self.concrete_volume_max
            ));
        }
        if !(self.steel_volume_max > 0.0) {
            return bad(String::from("steel_volume_max must be positive"));
        }
        if !(self.inner_loop_tol > 0.0 && self.inner_loop_tol < 1.0) {
            return bad(String::from("inner_loop_tol must lie in (0, 1)"));
        }
        let c = &self.continuation;
        if !(c.floor > 0.0 && c.floor <= c.start && c.step > 0.0) {
            return bad(String::from(
                "continuation needs 0 < floor <= start and a positive step",
            ));
        }
        if !(self.simp_penalty >= 1.0) {
            return bad(String::from("simp_penalty must be at least 1"));
        }
        if !(self.density_floor > 0.0 && self.density_floor < 1.0) {
            return bad(String::from("density_floor must lie in (0, 1)"));
        }
        if !(self.filter_radius > 0.0) || !(self.ssm_radius > 0.0) {
            return bad(String::from(
                "filter_radius and ssm_radius must be positive",
            ));
        }
        if let Some(x0) = self.initial_density {
            if !(0.0..=1.0).contains(&x0) {
                return bad(String::from("initial_density must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_sizing) {
            return bad(String::from("initial_sizing must lie in [0, 1]"));
        }
        let v = &self.vts;
        if !(v.m > 0.0 && v.m < 1.0 && v.c > 0.0) {
            return bad(String::from("vts needs 0 < m < 1 and c > 0"));
        }
        if !(v.x_bound_factor > 0.0 && v.x_bound_factor <= 1.0) {
            return bad(String::from("vts x_bound_factor must lie in (0, 1]"));
        }
        let hv = &self.heaviside;
        if hv.enabled && !(hv.beta_start >= 0.0 && hv.beta_max >= hv.beta_start) {
            return bad(String::from("heaviside needs 0 <= beta_start <= beta_max"));
        }
        if !(hv.threshold > 0.0 && hv.threshold < 1.0) {
            return bad(String::from("heaviside threshold must lie in (0, 1)"));
        }
        let m = &self.material;
        for (name, value) in [
            ("e_comp", m.e_comp),
            ("e_tens", m.e_tens),
            ("nu_comp", m.nu_comp),
            ("truss_e_tens", m.truss_e_tens),
            ("truss_e_comp", m.truss_e_comp),
        ] {
            if !(value > 0.0) {
                return bad(format!("material {name} must be positive"));
            }
        }
        if !(m.nu_comp < 1.0) {
            return bad(String::from("material nu_comp must be below 1"));
        }
        let floor_ratio = m.e_tens / m.e_comp;
        if (floor_ratio - c.floor).abs() > 1e-9 * c.floor {
            return bad(format!(
                "e_tens / e_comp = {floor_ratio} must equal the continuation floor {}",
                c.floor
            ));
        }
        if (m.nu_tens / m.nu_comp - floor_ratio).abs() > 1e-9 * floor_ratio {
            return bad(String::from("nu_tens / nu_comp must equal e_tens / e_comp"));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0)
            || !(self.move_limit_position > 0.0 && self.move_limit_position <= 1.0)
        {
            return bad(String::from("move limits must lie in (0, 1]"));
        }
        if !(self.change_tol > 0.0) {
            return bad(String::from("change_tol must be positive"));
        }
        if !(self.min_member_length > 0.0) {
            return bad(String::from("min_member_length must be positive"));
        }
        Ok(())
    }
}

/// `nx * ny * h^2 * thickness`.
pub fn total_envelope_volume(mesh: &Mesh, thickness: f64) -> f64 {
    let h = mesh.element_size();
    mesh.element_count() as f64 * h * h * thickness
}

/// A validated optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    /// Continuum mesh.
    pub mesh: Mesh,
    /// Supports and loads.
    pub bcs: BoundaryConditions,
    /// Steel ground structure.
    pub ground: GroundStructure,
    /// Run settings.
    pub config: RunConfig,
}

impl Problem {
    /// Validates the pieces against each other.
    pub fn new(
        mesh: Mesh,
        bcs: BoundaryConditions,
        ground: GroundStructure,
        config: RunConfig,
    ) -> Result<Self> {
        config.validate(&mesh)?;
        ground.validate(&mesh, config.min_member_length)?;
        if bcs.point_loads().iter().all(|&(_, v)| v == 0.0) {
            return Err(Error::InvalidProblem(String::from(
                "at least one nonzero load is required",
            )));
        }
        Ok(Problem {
            mesh,
            bcs,
            ground,
            config,
        })
    }

    /// Volume of one full-density element.
    pub fn element_volume(&self) -> f64 {
        let h = self.mesh.element_size();
        h * h * self.config.thickness
    }

    /// Concrete budget as a fraction of the envelope.
    pub fn fill_fraction(&self) -> f64 {
        self.config.concrete_volume_max / total_envelope_volume(&self.mesh, self.config.thickness)
    }
}
