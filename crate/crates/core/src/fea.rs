//! Plane-stress Q4 elements with per-Gauss-point constitutive matrices,
//! global assembly and the direct solve.

use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{BoundaryConditions, Mesh};
use crate::error::{Error, Result};
use crate::sparse::{Pattern, SkylineMatrix};

/// 3x3 plane-stress matrix.
pub type Mat3 = [[f64; 3]; 3];
/// 8x8 element matrix.
pub type Mat8 = [[f64; 8]; 8];

/// Plane-stress material rotated into global axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constitutive {
    /// `stress = d * strain`, engineering shear strain.
    pub d: Mat3,
    /// Modulus along the first principal axis.
    pub e1: f64,
    /// Modulus along the second principal axis.
    pub e2: f64,
    /// Poisson ratio associated with `e1`.
    pub nu1: f64,
    /// Poisson ratio associated with `e2`, `nu1 * e2 / e1`.
    pub nu2: f64,
    /// Angle of the first principal axis from global `x`.
    pub theta: f64,
}

/// Orthotropic material with axis 1 at angle `theta`.
///
/// The second Poisson ratio follows from `e1 / nu1 = e2 / nu2`, which keeps
/// the principal-axis matrix symmetric. The shear term is `1 / g` with
/// `g = (1 + nu1) / e1 + (1 + nu2) / e2`, which reduces to `E / 2(1 + nu)`
/// for isotropic input.
pub fn constitutive_global(e1: f64, e2: f64, nu1: f64, theta: f64) -> Result<Constitutive> {
    let nu2 = nu1 * e2 / e1;
    let nn = nu1 * nu2;
    if !(nn < 1.0) || !(e1 > 0.0) || !(e2 > 0.0) {
        return Err(Error::DegenerateMaterial { nu_product: nn });
    }
    let g = (1.0 + nu1) / e1 + (1.0 + nu2) / e2;
    let s = 1.0 / (1.0 - nn);
    let local = [
        [s * e1, s * nu1 * e2, 0.0],
        [s * nu1 * e2, s * e2, 0.0],
        [0.0, 0.0, 1.0 / g],
    ];
    // Equal moduli are isotropic: skip the rotation so the result is exact.
    let d = if e1 == e2 {
        local
    } else {
        rotate(&local, theta)
    };
    Ok(Constitutive {
        d,
        e1,
        e2,
        nu1,
        nu2,
        theta,
    })
}

/// Isotropic shorthand for `constitutive_global(e, e, nu, 0)`.
pub fn isotropic(e: f64, nu: f64) -> Constitutive {
    constitutive_global(e, e, nu, 0.0).expect("isotropic material with |nu| < 1")
}

/// `T^T local T` with `T` the engineering-strain rotation into the axes at `theta`.
fn rotate(local: &Mat3, theta: f64) -> Mat3 {
    if theta == 0.0 {
        return *local;
    }
    let (s, c) = libm::sincos(theta);
    let t = [
        [c * c, s * s, c * s],
        [s * s, c * c, -c * s],
        [-2.0 * c * s, 2.0 * c * s, c * c - s * s],
    ];
    let mut lt = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            lt[i][j] = (0..3).map(|k| local[i][k] * t[k][j]).sum();
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| t[k][i] * lt[k][j]).sum();
        }
    }
    // Exact symmetry regardless of rounding order.
    for i in 0..3 {
        for j in (i + 1)..3 {
            let m = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    out
}

const G: f64 = 0.577_350_269_189_625_8;

/// Natural coordinates of the 2x2 Gauss rule, counter-clockwise from `(-g, -g)`.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

const NODE_XI: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Strain-displacement matrices of a square element at each Gauss point.
#[derive(Debug, Clone, PartialEq)]
pub struct Q4 {
    b: [[[f64; 8]; 3]; 4],
    det_j: f64,
}

impl Q4 {
    /// Square element with edge `h`.
    pub fn new(h: f64) -> Self {
        let mut b = [[[0.0; 8]; 3]; 4];
        for (g, p) in GAUSS_POINTS.iter().enumerate() {
            for (n, xi) in NODE_XI.iter().enumerate() {
                let dndx = 0.25 * xi[0] * (1.0 + p[1] * xi[1]) * 2.0 / h;
                let dndy = 0.25 * xi[1] * (1.0 + p[0] * xi[0]) * 2.0 / h;
                b[g][0][2 * n] = dndx;
                b[g][1][2 * n + 1] = dndy;
                b[g][2][2 * n] = dndy;
                b[g][2][2 * n + 1] = dndx;
            }
        }
        Q4 {
            b,
            det_j: 0.25 * h * h,
        }
    }

    /// `B` at Gauss point `g`.
    pub fn b(&self, g: usize) -> &[[f64; 8]; 3] {
        &self.b[g]
    }

    /// `sum_g B^T D_g B |J| t`.
    pub fn stiffness(&self, d: &[Mat3; 4], thickness: f64) -> Mat8 {
        let mut k = [[0.0; 8]; 8];
        let w = self.det_j * thickness;
        for g in 0..4 {
            let b = &self.b[g];
            let dg = &d[g];
            // db = D B (3x8)
            let mut db = [[0.0; 8]; 3];
            for i in 0..3 {
                for j in 0..8 {
                    db[i][j] = dg[i][0] * b[0][j] + dg[i][1] * b[1][j] + dg[i][2] * b[2][j];
                }
            }
            for i in 0..8 {
                for j in i..8 {
                    let v = b[0][i] * db[0][j] + b[1][i] * db[1][j] + b[2][i] * db[2][j];
                    k[i][j] += w * v;
                }
            }
        }
        for i in 0..8 {
            for j in 0..i {
                k[i][j] = k[j][i];
            }
        }
        k
    }

    /// Stress `D_g B_g u` at each Gauss point.
    pub fn stresses(&self, d: &[Mat3; 4], u: &[f64; 8]) -> [[f64; 3]; 4] {
        let mut out = [[0.0; 3]; 4];
        for g in 0..4 {
            let mut strain = [0.0; 3];
            for (i, row) in self.b[g].iter().enumerate() {
                strain[i] = row.iter().zip(u).map(|(a, b)| a * b).sum();
            }
            for i in 0..3 {
                out[g][i] = (0..3).map(|k| d[g][i][k] * strain[k]).sum();
            }
        }
        out
    }
}

/// Element stiffness for per-Gauss-point `d`, edge `h` and `thickness`.
pub fn element_stiffness(d: &[Mat3; 4], h: f64, thickness: f64) -> Mat8 {
    Q4::new(h).stiffness(d, thickness)
}

/// Principal stress state at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussPointState {
    /// Larger principal stress.
    pub sigma1: f64,
    /// Smaller principal stress.
    pub sigma2: f64,
    /// Direction of `sigma1`, in `(-pi/2, pi/2]`; zero when `sigma1 == sigma2`.
    pub theta: f64,
}

/// Principal decomposition of `[sx, sy, txy]`.
pub fn principal_stresses(stress: [f64; 3]) -> GaussPointState {
    let [sx, sy, txy] = stress;
    let centre = 0.5 * (sx + sy);
    let half = 0.5 * (sx - sy);
    let radius = libm::hypot(half, txy);
    let scale = sx.abs() + sy.abs() + txy.abs();
    let theta = if radius <= 1e-14 * scale || radius == 0.0 {
        0.0
    } else {
        0.5 * libm::atan2(txy, half)
    };
    GaussPointState {
        sigma1: centre + radius,
        sigma2: centre - radius,
        theta,
    }
}

/// Rank-one stiffness `k * v v^T` over global DOFs, the form taken by a
/// spread truss member.
#[derive(Debug, Clone, PartialEq)]
pub struct TrussCoupling {
    /// Axial stiffness `E A / L` including sizing.
    pub stiffness: f64,
    /// Sparse `(dof, coefficient)` vector, DOFs unique and ascending.
    pub vector: Vec<(usize, f64)>,
}

impl TrussCoupling {
    /// `v . d` for a global displacement vector.
    pub fn project(&self, d: &[f64]) -> f64 {
        self.vector.iter().map(|&(dof, c)| c * d[dof]).sum()
    }
}

/// Solved global system.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    /// Free-DOF stiffness (numbered by position in `free_dofs`).
    pub k_free: SkylineMatrix,
    /// Unrestrained DOFs, ascending.
    pub free_dofs: Vec<usize>,
    /// Full load vector.
    pub f: Vec<f64>,
    /// Full displacement vector, zero on fixed DOFs.
    pub d: Vec<f64>,
    /// `F . d`.
    pub compliance: f64,
    /// `|K_ff d_f - F_f| / |F_f|`, zero when the load is zero.
    pub residual: f64,
}

impl GlobalSystem {
    /// Displacements of element `e`.
    pub fn element_displacements(&self, mesh: &Mesh, e: usize) -> [f64; 8] {
        let dofs = mesh.element_dofs(e);
        let mut u = [0.0; 8];
        for (k, &dof) in dofs.iter().enumerate() {
            u[k] = self.d[dof];
        }
        u
    }
}

/// Assembles continuum and spread-truss stiffness, applies supports and solves.
///
/// Element matrices are summed in element order, then couplings in slice
/// order, so the assembled matrix is bit-reproducible.
pub fn assemble_and_solve(
    mesh: &Mesh,
    element_matrices: &[Mat8],
    couplings: &[TrussCoupling],
    bcs: &BoundaryConditions,
) -> Result<GlobalSystem> {
    let ndof = mesh.dof_count();
    let mut free_index = vec![usize::MAX; ndof];
    let mut free_dofs = Vec::with_capacity(ndof);
    for dof in 0..ndof {
        if !bcs.is_fixed(dof) {
            free_index[dof] = free_dofs.len();
            free_dofs.push(dof);
        }
    }
    let nfree = free_dofs.len();

    let mut pattern = Pattern::new(nfree);
    let mut local = Vec::with_capacity(64);
    for e in 0..mesh.element_count() {
        local.clear();
        local.extend(mesh.element_dofs(e).iter().map(|&d| free_index[d]));
        pattern.add_clique(&local);
    }
    for c in couplings {
        local.clear();
        local.extend(c.vector.iter().map(|&(d, _)| free_index[d]));
        pattern.add_remote_clique(&local);
    }
    for i in 0..nfree {
        pattern.add_clique(&[i]);
    }
    let mut k = SkylineMatrix::new(pattern);

    for (e, ke) in element_matrices.iter().enumerate() {
        let dofs = mesh.element_dofs(e);
        for a in 0..8 {
            let ia = free_index[dofs[a]];
            if ia == usize::MAX {
                continue;
            }
            for b in 0..8 {
                let ib = free_index[dofs[b]];
                if ib != usize::MAX {
                    k.add(ia, ib, ke[a][b]);
                }
            }
        }
    }
    for c in couplings {
        if c.stiffness == 0.0 {
            continue;
        }
        for &(da, va) in &c.vector {
            let ia = free_index[da];
            if ia == usize::MAX {
                continue;
            }
            for &(db, vb) in &c.vector {
                let ib = free_index[db];
                if ib != usize::MAX {
                    k.add(ia, ib, c.stiffness * va * vb);
                }
            }
        }
    }

    let f = bcs.load_vector(ndof);
    let f_free: Vec<f64> = free_dofs.iter().map(|&d| f[d]).collect();
    let chol = k.factor().map_err(|z| Error::SingularStiffness {
        dof: free_dofs[z.0],
    })?;
    let mut x = chol.solve(&f_free);
    let f_norm = norm(&f_free);
    let mut residual = 0.0;
    if f_norm > 0.0 {
        for _ in 0..3 {
            let kx = k.mul_vec(&x);
            let r: Vec<f64> = f_free.iter().zip(&kx).map(|(a, b)| a - b).collect();
            residual = norm(&r) / f_norm;
            if residual <= 1e-12 {
                break;
            }
            let dx = chol.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        let kx = k.mul_vec(&x);
        let r: Vec<f64> = f_free.iter().zip(&kx).map(|(a, b)| a - b).collect();
        residual = norm(&r) / f_norm;
    }

    let mut d = vec![0.0; ndof];
    for (i, &dof) in free_dofs.iter().enumerate() {
        d[dof] = x[i];
    }
    let compliance = f.iter().zip(&d).map(|(a, b)| a * b).sum();
    Ok(GlobalSystem {
        k_free: k,
        free_dofs,
        f,
        d,
        compliance,
        residual,
    })
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    /// Closed-form unit-thickness Q4 stiffness for E = 1 from the classic
    /// 88-line code, nodes counter-clockwise from the bottom-left corner.
    fn classic_ke(nu: f64) -> Mat8 {
        let k = [
            0.5 - nu / 6.0,
            0.125 + nu / 8.0,
            -0.25 - nu / 12.0,
            -0.125 + 3.0 * nu / 8.0,
            -0.25 + nu / 12.0,
            -0.125 - nu / 8.0,
            nu / 6.0,
            0.125 - 3.0 * nu / 8.0,
        ];
        let idx = [
            [0, 1, 2, 3, 4, 5, 6, 7],
            [1, 0, 7, 6, 5, 4, 3, 2],
            [2, 7, 0, 5, 6, 3, 4, 1],
            [3, 6, 5, 0, 7, 2, 1, 4],
            [4, 5, 6, 7, 0, 1, 2, 3],
            [5, 4, 3, 2, 1, 0, 7, 6],
            [6, 3, 4, 1, 2, 7, 0, 5],
            [7, 2, 1, 4, 3, 6, 5, 0],
        ];
        let mut out = [[0.0; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                out[i][j] = k[idx[i][j]] / (1.0 - nu * nu);
            }
        }
        out
    }

    fn uniform(c: &Constitutive) -> [Mat3; 4] {
        [c.d; 4]
    }

    #[test]
    fn isotropic_shear_entry() {
        let c = constitutive_global(180.0, 180.0, 0.3, 0.0).unwrap();
        assert!((c.d[2][2] - 180.0 / 2.6).abs() < 1e-12);
        assert!((c.d[0][0] - 180.0 / 0.91).abs() < 1e-10);
        assert!((c.d[0][1] - 0.3 * 180.0 / 0.91).abs() < 1e-10);
    }

    #[test]
    fn isotropic_is_rotation_invariant() {
        let base = constitutive_global(180.0, 180.0, 0.3, 0.0).unwrap();
        for theta in [0.1, 0.7, PI / 4.0, 1.3, -0.4, PI / 2.0] {
            let r = constitutive_global(180.0, 180.0, 0.3, theta).unwrap();
            let turned = rotate(&base.d, theta);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((r.d[i][j] - base.d[i][j]).abs() < 1e-10, "theta {theta}");
                    assert!((turned[i][j] - base.d[i][j]).abs() < 1e-10, "theta {theta}");
                }
            }
        }
    }

    #[test]
    fn tension_poisson_ratio_from_modulus_ratio() {
        let c = constitutive_global(180.0, 4.5, 0.3, 0.0).unwrap();
        assert!((c.nu2 - 0.0075).abs() < 1e-15);
        assert_eq!(c.d[0][1], c.d[1][0]);
        let rotated = constitutive_global(180.0, 4.5, 0.3, 0.6).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(rotated.d[i][j], rotated.d[j][i]);
            }
        }
    }

    #[test]
    fn rotation_by_quarter_turn_swaps_axes() {
        let a = constitutive_global(180.0, 4.5, 0.3, PI / 2.0).unwrap();
        let b = constitutive_global(4.5, 180.0, 0.3 * 4.5 / 180.0, 0.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.d[i][j] - b.d[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_material_rejected() {
        let err = constitutive_global(1.0, 4.0, 0.6, 0.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateMaterial { .. }));
    }

    #[test]
    fn matches_closed_form_q4() {
        for nu in [0.0, 0.3, 0.45] {
            let ke = element_stiffness(&uniform(&isotropic(1.0, nu)), 1.0, 1.0);
            let oracle = classic_ke(nu);
            for i in 0..8 {
                for j in 0..8 {
                    assert!((ke[i][j] - oracle[i][j]).abs() < 1e-14, "nu {nu} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn stiffness_linear_in_thickness_and_size_independent() {
        let d = uniform(&isotropic(180.0, 0.3));
        let k1 = element_stiffness(&d, 0.762, 1.0);
        let k2 = element_stiffness(&d, 0.762, 2.0);
        let k3 = element_stiffness(&d, 3.0, 1.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!((k2[i][j] - 2.0 * k1[i][j]).abs() < 1e-12);
                assert!((k3[i][j] - k1[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rigid_modes_have_zero_energy() {
        let c = constitutive_global(180.0, 4.5, 0.3, 0.4).unwrap();
        let ke = element_stiffness(&uniform(&c), 1.0, 1.0);
        let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let tx: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let ty: Vec<f64> = (0..8).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect();
        let rot: Vec<f64> = (0..8)
            .map(|i| {
                if i % 2 == 0 {
                    -corners[i / 2][1]
                } else {
                    corners[i / 2][0]
                }
            })
            .collect();
        for mode in [tx, ty, rot] {
            for row in &ke {
                let v: f64 = row.iter().zip(&mode).map(|(a, b)| a * b).sum();
                assert!(v.abs() < 1e-12);
            }
        }
        for row in &ke {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn principal_cases() {
        let s = principal_stresses([3.0, 0.0, 0.0]);
        assert_eq!((s.sigma1, s.sigma2, s.theta), (3.0, 0.0, 0.0));
        let s = principal_stresses([0.0, 0.0, 2.0]);
        assert!((s.sigma1 - 2.0).abs() < 1e-15 && (s.sigma2 + 2.0).abs() < 1e-15);
        assert!((s.theta - PI / 4.0).abs() < 1e-15);
        let s = principal_stresses([-1.5, -1.5, 0.0]);
        assert_eq!((s.sigma1, s.sigma2, s.theta), (-1.5, -1.5, 0.0));
        let s = principal_stresses([-1.0, 2.0, 0.0]);
        assert!((s.theta - PI / 2.0).abs() < 1e-15);
    }

    fn cantilever_one_element() -> (Mesh, BoundaryConditions) {
        let mesh = Mesh::new(1, 1, 1.0).unwrap();
        // Clamp the left edge, pull down at the bottom-right corner.
        let bcs = BoundaryConditions::new(&mesh, vec![0, 1, 2, 3], vec![(5, -1.0)]).unwrap();
        (mesh, bcs)
    }

    #[test]
    fn single_element_matches_dense_solve() {
        let (mesh, bcs) = cantilever_one_element();
        let ke = element_stiffness(&uniform(&isotropic(180.0, 0.3)), 1.0, 1.0);
        let sys = assemble_and_solve(&mesh, &[ke], &[], &bcs).unwrap();
        // Dense oracle: Gaussian elimination on the 4x4 free block.
        // Element DOFs [n0x n0y n1x n1y n2x n2y n3x n3y] = global [0 1 4 5 6 7 2 3].
        let free_local = [2, 3, 4, 5];
        let mut a = [[0.0; 5]; 4];
        for (r, &i) in free_local.iter().enumerate() {
            for (c, &j) in free_local.iter().enumerate() {
                a[r][c] = ke[i][j];
            }
        }
        let globals = [4usize, 5, 6, 7];
        for (r, &g) in globals.iter().enumerate() {
            a[r][4] = if g == 5 { -1.0 } else { 0.0 };
        }
        for p in 0..4 {
            for r in (p + 1)..4 {
                let f = a[r][p] / a[p][p];
                for c in p..5 {
                    a[r][c] -= f * a[p][c];
                }
            }
        }
        let mut x = [0.0; 4];
        for r in (0..4).rev() {
            let s: f64 = ((r + 1)..4).map(|c| a[r][c] * x[c]).sum();
            x[r] = (a[r][4] - s) / a[r][r];
        }
        for (r, &g) in globals.iter().enumerate() {
            assert!((sys.d[g] - x[r]).abs() < 1e-14);
        }
        assert_eq!(sys.d[0], 0.0);
        assert_eq!(sys.d[3], 0.0);
        assert!(sys.compliance > 0.0);
        assert!(sys.residual < 1e-12);
    }

    #[test]
    fn zero_and_doubled_loads() {
        let mesh = Mesh::new(4, 2, 1.0).unwrap();
        let ke = element_stiffness(&uniform(&isotropic(1.0, 0.3)), 1.0, 1.0);
        let kes = vec![ke; mesh.element_count()];
        let fixed = vec![0, 1, 2, 3, 4, 5];
        let tip = 2 * mesh.node_index(4, 1) + 1;
        let zero = BoundaryConditions::new(&mesh, fixed.clone(), vec![(tip, 0.0)]).unwrap();
        let sys0 = assemble_and_solve(&mesh, &kes, &[], &zero).unwrap();
        assert!(sys0.d.iter().all(|&v| v == 0.0));
        assert_eq!(sys0.compliance, 0.0);
        let one = BoundaryConditions::new(&mesh, fixed.clone(), vec![(tip, 1.0)]).unwrap();
        let two = BoundaryConditions::new(&mesh, fixed, vec![(tip, 2.0)]).unwrap();
        let s1 = assemble_and_solve(&mesh, &kes, &[], &one).unwrap();
        let s2 = assemble_and_solve(&mesh, &kes, &[], &two).unwrap();
        for (a, b) in s1.d.iter().zip(&s2.d) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
        assert!((s2.compliance - 4.0 * s1.compliance).abs() < 1e-10 * s2.compliance);
        // Energy identity d^T K d = F^T d.
        let kd = s1
            .k_free
            .mul_vec(&s1.free_dofs.iter().map(|&d| s1.d[d]).collect::<Vec<_>>());
        let energy: f64 = s1
            .free_dofs
            .iter()
            .zip(&kd)
            .map(|(&d, v)| s1.d[d] * v)
            .sum();
        assert!((energy - s1.compliance).abs() < 1e-8 * s1.compliance);
    }

    #[test]
    fn singular_system_names_dof() {
        let mesh = Mesh::new(2, 1, 1.0).unwrap();
        let ke = element_stiffness(&uniform(&isotropic(1.0, 0.3)), 1.0, 1.0);
        let zero = [[0.0; 8]; 8];
        let bcs = BoundaryConditions::new(&mesh, vec![0, 1, 2, 3], vec![(5, 1.0)]).unwrap();
        let err = assemble_and_solve(&mesh, &[ke, zero], &[], &bcs).unwrap_err();
        assert!(matches!(err, Error::SingularStiffness { dof } if dof >= 8));
    }
}
