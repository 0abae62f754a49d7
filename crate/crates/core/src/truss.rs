//! Ground-structure bars, stiffness spreading onto the continuum, and the
//! analytic sensitivities with respect to node positions and member sizing.
//!
//! A member's global stiffness is `K_e = T^T Kbar T`, which for a pin-jointed
//! bar is the rank-one matrix `(E A / L) g g^T` with `g = [-C, -S, C, S]`.
//! Its endpoints do not need to sit on continuum nodes: each endpoint is tied
//! to every continuum node within radius `r` through normalized cosine
//! weights, giving the spread stiffness `N^T K_e N`. Because the weights are
//! `C^1` in the endpoint position (value and slope vanish at `d = r`), the
//! compliance stays differentiable as nodes move.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::domain::{box_gap, GroundStructure, MemberDef, Mesh, SplitSchedule, TrussNode};
use crate::error::{Error, Result};
use crate::fea::TrussCoupling;

/// 4x4 matrix over `[x1, y1, x2, y2]`.
pub type Mat4 = [[f64; 4]; 4];

/// Direction cosines and rotation matrix of the bar from `p1` to `p2`.
///
/// Fails with [`Error::ZeroLengthMember`] (tagged with `member`) when the
/// endpoints are closer than `min_length`.
pub fn transformation(
    p1: [f64; 2],
    p2: [f64; 2],
    min_length: f64,
    member: usize,
) -> Result<(Mat4, f64, f64)> {
    let dx = p2[0] - p1[0];
    let dy = p2[1] - p1[1];
    let len = libm::hypot(dx, dy);
    if !(len > min_length) {
        return Err(Error::ZeroLengthMember { member });
    }
    let (c, s) = (dx / len, dy / len);
    let t = [
        [c, s, 0.0, 0.0],
        [-s, c, 0.0, 0.0],
        [0.0, 0.0, c, s],
        [0.0, 0.0, -s, c],
    ];
    Ok((t, c, s))
}

/// Axial bar stiffness in local axes, `E A / L` on the axial DOFs.
pub fn local_stiffness(modulus: f64, area: f64, length: f64) -> Mat4 {
    let k = modulus * area / length;
    [
        [k, 0.0, -k, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [-k, 0.0, k, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ]
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose4(a: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// `T^T Kbar T` in global axes.
pub fn global_stiffness(modulus: f64, area: f64, p1: [f64; 2], p2: [f64; 2]) -> Result<Mat4> {
    let (t, _, _) = transformation(p1, p2, 0.0, 0)?;
    let len = libm::hypot(p2[0] - p1[0], p2[1] - p1[1]);
    let kbar = local_stiffness(modulus, area, len);
    Ok(mat4_mul(&transpose4(&t), &mat4_mul(&kbar, &t)))
}

/// Derivative of the global bar stiffness with respect to coordinate `axis`
/// of endpoint `end` (0 or 1), by the product rule
/// `dT^T Kbar T + T^T dKbar T + T^T Kbar dT`.
pub fn global_stiffness_derivative(
    modulus: f64,
    area: f64,
    p1: [f64; 2],
    p2: [f64; 2],
    end: usize,
    axis: usize,
) -> Result<Mat4> {
    let (t, c, s) = transformation(p1, p2, 0.0, 0)?;
    let len = libm::hypot(p2[0] - p1[0], p2[1] - p1[1]);
    let sign = if end == 0 { -1.0 } else { 1.0 };
    // dL/dp, dC/dp, dS/dp for the moving coordinate.
    let dl = sign * if axis == 0 { c } else { s };
    let (dc, ds) = if axis == 0 {
        (sign * s * s / len, -sign * c * s / len)
    } else {
        (-sign * c * s / len, sign * c * c / len)
    };
    let dt = [
        [dc, ds, 0.0, 0.0],
        [-ds, dc, 0.0, 0.0],
        [0.0, 0.0, dc, ds],
        [0.0, 0.0, -ds, dc],
    ];
    let kbar = local_stiffness(modulus, area, len);
    let mut dkbar = kbar;
    for row in &mut dkbar {
        for v in row.iter_mut() {
            *v *= -dl / len;
        }
    }
    let tt = transpose4(&t);
    let a = mat4_mul(&transpose4(&dt), &mat4_mul(&kbar, &t));
    let b = mat4_mul(&tt, &mat4_mul(&dkbar, &t));
    let c3 = mat4_mul(&tt, &mat4_mul(&kbar, &dt));
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i][j] + b[i][j] + c3[i][j];
        }
    }
    Ok(out)
}

/// Raw spreading weight `cos(pi d / r) / 2 + 1 / 2` for `d <= r`, else 0.
pub fn raw_weight(distance: f64, radius: f64) -> f64 {
    if distance <= radius {
        0.5 * libm::cos(PI * distance / radius) + 0.5
    } else {
        0.0
    }
}

/// One continuum node receiving part of a truss node's stiffness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEntry {
    /// Continuum node index.
    pub node: usize,
    /// Normalized weight (same for both axes).
    pub weight: f64,
    /// Derivative of `weight` with respect to the truss node position.
    pub grad: [f64; 2],
}

/// Normalized weights tying one truss node to nearby continuum nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadMap {
    /// Entries in continuum-node order; weights sum to one.
    pub entries: Vec<SpreadEntry>,
}

impl SpreadMap {
    /// Weighted displacement of the truss node.
    pub fn interpolate(&self, d: &[f64]) -> [f64; 2] {
        let mut u = [0.0; 2];
        for e in &self.entries {
            u[0] += e.weight * d[2 * e.node];
            u[1] += e.weight * d[2 * e.node + 1];
        }
        u
    }

    /// `d u / d p[axis]` at fixed continuum displacements.
    pub fn interpolate_grad(&self, d: &[f64], axis: usize) -> [f64; 2] {
        let mut u = [0.0; 2];
        for e in &self.entries {
            u[0] += e.grad[axis] * d[2 * e.node];
            u[1] += e.grad[axis] * d[2 * e.node + 1];
        }
        u
    }
}

/// Spreading weights of the truss node `node` located at `p`.
pub fn spread_weights(node: usize, p: [f64; 2], mesh: &Mesh, radius: f64) -> Result<SpreadMap> {
    let near = mesh.nodes_within(p, radius);
    let mut raw = Vec::with_capacity(near.len());
    let mut total = 0.0;
    let mut total_grad = [0.0; 2];
    for &(n, d) in &near {
        let w = raw_weight(d, radius);
        let grad = if d > 0.0 {
            let q = mesh.node_coords(n);
            let slope = -0.5 * PI / radius * libm::sin(PI * d / radius);
            [slope * (p[0] - q[0]) / d, slope * (p[1] - q[1]) / d]
        } else {
            [0.0, 0.0]
        };
        total += w;
        total_grad[0] += grad[0];
        total_grad[1] += grad[1];
        raw.push((n, w, grad));
    }
    if !(total > 0.0) {
        return Err(Error::IsolatedTrussNode { node });
    }
    let entries = raw
        .into_iter()
        .map(|(n, w, g)| {
            let weight = w / total;
            SpreadEntry {
                node: n,
                weight,
                grad: [
                    (g[0] - weight * total_grad[0]) / total,
                    (g[1] - weight * total_grad[1]) / total,
                ],
            }
        })
        .collect();
    Ok(SpreadMap { entries })
}

/// Dense spread stiffness `N^T K_e N` over the continuum DOFs it touches.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadStiffness {
    /// Global DOFs, ascending.
    pub dofs: Vec<usize>,
    /// Row-major square matrix over `dofs`.
    pub matrix: Vec<Vec<f64>>,
}

/// Spreads an arbitrary 4x4 member matrix through the endpoint maps.
pub fn couple_to_continuum(k_e: &Mat4, start: &SpreadMap, end: &SpreadMap) -> SpreadStiffness {
    // Column j of N (4 x ndof): which truss DOF each continuum DOF feeds.
    let mut cols: BTreeMap<usize, [f64; 4]> = BTreeMap::new();
    for (k, map) in [start, end].into_iter().enumerate() {
        for e in &map.entries {
            cols.entry(2 * e.node).or_insert([0.0; 4])[2 * k] += e.weight;
            cols.entry(2 * e.node + 1).or_insert([0.0; 4])[2 * k + 1] += e.weight;
        }
    }
    let dofs: Vec<usize> = cols.keys().copied().collect();
    let n: Vec<[f64; 4]> = cols.values().copied().collect();
    let mut matrix = vec![vec![0.0; dofs.len()]; dofs.len()];
    for (a, na) in n.iter().enumerate() {
        let mut kn = [0.0; 4];
        for i in 0..4 {
            kn[i] = (0..4).map(|j| na[j] * k_e[j][i]).sum();
        }
        for (b, nb) in n.iter().enumerate() {
            matrix[a][b] = (0..4).map(|i| kn[i] * nb[i]).sum();
        }
    }
    SpreadStiffness { dofs, matrix }
}

/// Current truss geometry with spreading maps for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct TrussLayout {
    /// Current node positions.
    pub positions: Vec<[f64; 2]>,
    /// Members.
    pub members: Vec<MemberDef>,
    /// One spreading map per node.
    pub spread: Vec<SpreadMap>,
}

/// Length and unit vector of a member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberGeometry {
    /// Current length.
    pub length: f64,
    /// `(C, S)`.
    pub direction: [f64; 2],
}

impl TrussLayout {
    /// Builds spreading maps for `positions`.
    pub fn new(
        mesh: &Mesh,
        positions: Vec<[f64; 2]>,
        members: Vec<MemberDef>,
        radius: f64,
        min_length: f64,
    ) -> Result<Self> {
        let spread = positions
            .iter()
            .enumerate()
            .map(|(k, &p)| spread_weights(k, p, mesh, radius))
            .collect::<Result<Vec<_>>>()?;
        let layout = TrussLayout {
            positions,
            members,
            spread,
        };
        for m in 0..layout.members.len() {
            let [a, b] = layout.members[m].nodes;
            transformation(layout.positions[a], layout.positions[b], min_length, m)?;
        }
        Ok(layout)
    }

    /// Length and direction of member `m`.
    pub fn geometry(&self, m: usize) -> MemberGeometry {
        let [a, b] = self.members[m].nodes;
        let (pa, pb) = (self.positions[a], self.positions[b]);
        let dx = pb[0] - pa[0];
        let dy = pb[1] - pa[1];
        let length = libm::hypot(dx, dy);
        MemberGeometry {
            length,
            direction: [dx / length, dy / length],
        }
    }

    /// Rank-one spread stiffness of member `m` with axial stiffness
    /// `modulus * area * sizing / L`.
    pub fn coupling(&self, m: usize, modulus: f64, sizing: f64) -> TrussCoupling {
        let geo = self.geometry(m);
        let [a, b] = self.members[m].nodes;
        let [c, s] = geo.direction;
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (map, sign) in [(&self.spread[a], -1.0), (&self.spread[b], 1.0)] {
            for e in &map.entries {
                *acc.entry(2 * e.node).or_insert(0.0) += sign * c * e.weight;
                *acc.entry(2 * e.node + 1).or_insert(0.0) += sign * s * e.weight;
            }
        }
        TrussCoupling {
            stiffness: modulus * self.members[m].area * sizing / geo.length,
            vector: acc.into_iter().collect(),
        }
    }

    /// Elongation of member `m` under continuum displacements `d`.
    pub fn elongation(&self, m: usize, d: &[f64]) -> f64 {
        let geo = self.geometry(m);
        let [a, b] = self.members[m].nodes;
        let ua = self.spread[a].interpolate(d);
        let ub = self.spread[b].interpolate(d);
        geo.direction[0] * (ub[0] - ua[0]) + geo.direction[1] * (ub[1] - ua[1])
    }

    /// Steel volume `sum x_t A L`.
    pub fn steel_volume(&self, sizing: &[f64]) -> f64 {
        (0..self.members.len())
            .map(|m| sizing[m] * self.members[m].area * self.geometry(m).length)
            .sum()
    }

    /// Gradient of `steel_volume` with respect to node positions.
    pub fn steel_volume_position_gradient(&self, sizing: &[f64]) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0; 2]; self.positions.len()];
        for m in 0..self.members.len() {
            let geo = self.geometry(m);
            let [a, b] = self.members[m].nodes;
            let w = sizing[m] * self.members[m].area;
            for axis in 0..2 {
                g[a][axis] -= w * geo.direction[axis];
                g[b][axis] += w * geo.direction[axis];
            }
        }
        g
    }

    /// Compliance derivative `dc/dx_t` of member `m` at frozen modulus,
    /// given `d sizing / d x_t`.
    pub fn sizing_sensitivity(&self, m: usize, modulus: f64, sizing_slope: f64, d: &[f64]) -> f64 {
        let geo = self.geometry(m);
        let delta = self.elongation(m, d);
        -modulus * self.members[m].area * sizing_slope / geo.length * delta * delta
    }

    /// Compliance gradient with respect to every node position, summing the
    /// contributions of the members attached to each node. `moduli` and
    /// `sizing` are the frozen per-member values.
    ///
    /// For a member with axial stiffness `k` and elongation `delta`, the
    /// contribution of `d^T K_e d = k delta^2` is differentiated through the
    /// length in `k`, the direction cosines in `delta`, and the spreading
    /// weights that interpolate the endpoint displacements.
    pub fn node_position_sensitivity(
        &self,
        moduli: &[f64],
        sizing: &[f64],
        d: &[f64],
    ) -> Vec<[f64; 2]> {
        let mut grad = vec![[0.0; 2]; self.positions.len()];
        for m in 0..self.members.len() {
            let geo = self.geometry(m);
            let [a, b] = self.members[m].nodes;
            let k = moduli[m] * self.members[m].area * sizing[m] / geo.length;
            if k == 0.0 {
                continue;
            }
            let e = geo.direction;
            let l = geo.length;
            let ua = self.spread[a].interpolate(d);
            let ub = self.spread[b].interpolate(d);
            let rel = [ub[0] - ua[0], ub[1] - ua[1]];
            let delta = e[0] * rel[0] + e[1] * rel[1];
            // (I - e e^T) rel / L
            let perp = [(rel[0] - e[0] * delta) / l, (rel[1] - e[1] * delta) / l];
            for axis in 0..2 {
                let dua = self.spread[a].interpolate_grad(d, axis);
                let dub = self.spread[b].interpolate_grad(d, axis);
                let ddelta_a = -perp[axis] - (e[0] * dua[0] + e[1] * dua[1]);
                let ddelta_b = perp[axis] + (e[0] * dub[0] + e[1] * dub[1]);
                let dk_a = k * e[axis] / l;
                let dk_b = -dk_a;
                grad[a][axis] -= dk_a * delta * delta + 2.0 * k * delta * ddelta_a;
                grad[b][axis] -= dk_b * delta * delta + 2.0 * k * delta * ddelta_b;
            }
        }
        grad
    }
}

/// What [`split_members`] did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitReport {
    /// Members halved.
    pub split: usize,
    /// Members left whole because halves would be too short or the new node
    /// could not be boxed away from its neighbours.
    pub skipped: usize,
}

/// Halves every member longer than `schedule.min_length`.
///
/// `positions` are the current node positions; the returned ground structure
/// uses them as reference positions, with bounds re-expressed so each node's
/// admissible box is unchanged. A new node sits at the member midpoint with
/// `y` range equal to the mean of its endpoints' ranges and `x` range no
/// larger than `x_bound_factor` times that, shrunk until its box stays at
/// least `min_member_length` away from both endpoint boxes. Children inherit
/// the parent's sizing, so `sum x_t A L` is preserved.
#[allow(clippy::too_many_arguments)]
pub fn split_members(
    ground: &GroundStructure,
    positions: &[[f64; 2]],
    sizing: &[f64],
    mesh: &Mesh,
    schedule: &SplitSchedule,
    x_bound_factor: f64,
    min_member_length: f64,
) -> (GroundStructure, Vec<f64>, SplitReport) {
    let mut nodes: Vec<TrussNode> = ground
        .nodes
        .iter()
        .zip(positions)
        .map(|(n, &p)| {
            let r = n.reach();
            TrussNode {
                position: p,
                bounds: [(r[0] - p[0], r[1] - p[0]), (r[2] - p[1], r[3] - p[1])],
            }
        })
        .collect();
    let mut members = Vec::with_capacity(2 * ground.members.len());
    let mut new_sizing = Vec::with_capacity(2 * ground.members.len());
    let mut report = SplitReport::default();
    for (m, member) in ground.members.iter().enumerate() {
        let [a, b] = member.nodes;
        let (pa, pb) = (positions[a], positions[b]);
        let length = libm::hypot(pb[0] - pa[0], pb[1] - pa[1]);
        if length <= schedule.min_length {
            members.push(*member);
            new_sizing.push(sizing[m]);
            continue;
        }
        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
        let node = if 0.5 * length > min_member_length {
            midpoint_node(
                &nodes[a],
                &nodes[b],
                mid,
                mesh,
                x_bound_factor,
                min_member_length,
            )
        } else {
            None
        };
        match node {
            Some(n) => {
                let c = nodes.len();
                nodes.push(n);
                members.push(MemberDef {
                    nodes: [a, c],
                    area: member.area,
                });
                members.push(MemberDef {
                    nodes: [c, b],
                    area: member.area,
                });
                new_sizing.push(sizing[m]);
                new_sizing.push(sizing[m]);
                report.split += 1;
            }
            None => {
                members.push(*member);
                new_sizing.push(sizing[m]);
                report.skipped += 1;
            }
        }
    }
    (GroundStructure { nodes, members }, new_sizing, report)
}

fn midpoint_node(
    a: &TrussNode,
    b: &TrussNode,
    mid: [f64; 2],
    mesh: &Mesh,
    x_bound_factor: f64,
    min_gap: f64,
) -> Option<TrussNode> {
    let half = |n: &TrussNode, axis: usize| 0.5 * (n.bounds[axis].1 - n.bounds[axis].0);
    let hy = 0.5 * (half(a, 1) + half(b, 1));
    let hx = (0.5 * (half(a, 0) + half(b, 0))).min(x_bound_factor * hy);
    let (ra, rb) = (a.reach(), b.reach());
    let mut scale = 1.0;
    for _ in 0..40 {
        let bounds = [
            (
                (-scale * hx).max(-mid[0]),
                (scale * hx).min(mesh.width() - mid[0]),
            ),
            (
                (-scale * hy).max(-mid[1]),
                (scale * hy).min(mesh.height() - mid[1]),
            ),
        ];
        let node = TrussNode {
            position: mid,
            bounds,
        };
        let r = node.reach();
        if box_gap(&r, &ra) > min_gap && box_gap(&r, &rb) > min_gap {
            return Some(node);
        }
        scale *= 0.5;
    }
    let node = TrussNode::fixed(mid);
    let r = node.reach();
    (box_gap(&r, &ra) > min_gap && box_gap(&r, &rb) > min_gap).then_some(node)
}
