use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised anywhere in the optimization pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A problem definition failed validation.
    InvalidProblem(String),
    /// Supports do not remove all three planar rigid-body modes.
    RigidBodyMotion,
    /// A member would reach zero length somewhere inside its node boxes.
    ZeroLengthMember {
        /// Member index in the ground structure.
        member: usize,
    },
    /// Principal-axis material with `nu1 * nu2 >= 1`.
    DegenerateMaterial {
        /// Product of the two Poisson ratios.
        nu_product: f64,
    },
    /// Cholesky factorization hit a non-positive pivot.
    SingularStiffness {
        /// Global DOF index at which the pivot vanished.
        dof: usize,
    },
    /// A truss node has no continuum node within the spreading radius.
    IsolatedTrussNode {
        /// Truss node index.
        node: usize,
    },
    /// Bimodulus fixed-point iteration failed with the ratio at its floor.
    InnerLoopDiverged {
        /// Compliance of each inner iteration at the last ratio tried.
        trace: Vec<f64>,
    },
    /// The MMA subproblem had no feasible point, even with relaxed move limits.
    MmaInfeasible {
        /// Index of the first constraint that could not be met.
        constraint: usize,
    },
    /// Sensitivity back-propagation called without a matching forward pass.
    StaleFilterCache,
    /// The ACI stress block does not fit in the effective depth.
    OverReinforced {
        /// Depth of the equivalent stress block.
        block_depth: f64,
        /// Effective depth of the section.
        effective_depth: f64,
    },
}

impl Error {
    /// Stable kebab-case identifier for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidProblem(_) => "invalid-problem",
            Error::RigidBodyMotion => "rigid-body-motion",
            Error::ZeroLengthMember { .. } => "zero-length-member",
            Error::DegenerateMaterial { .. } => "degenerate-material",
            Error::SingularStiffness { .. } => "singular-stiffness",
            Error::IsolatedTrussNode { .. } => "isolated-truss-node",
            Error::InnerLoopDiverged { .. } => "inner-loop-diverged",
            Error::MmaInfeasible { .. } => "mma-infeasible",
            Error::StaleFilterCache => "stale-filter-cache",
            Error::OverReinforced { .. } => "over-reinforced",
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidProblem(msg) => write!(f, "invalid problem: {msg}"),
            Error::RigidBodyMotion => f.write_str(
                "rigid body motion: supports must restrain both translations and rotation",
            ),
            Error::ZeroLengthMember { member } => {
                write!(f, "member {member} can reach zero length within its node bounds")
            }
            Error::DegenerateMaterial { nu_product } => {
                write!(f, "degenerate material: nu1*nu2 = {nu_product} >= 1")
            }
            Error::SingularStiffness { dof } => {
                write!(f, "singular stiffness matrix: zero pivot at dof {dof}")
            }
            Error::IsolatedTrussNode { node } => {
                write!(f, "truss node {node} has no continuum node within the spreading radius")
            }
            Error::InnerLoopDiverged { trace } => write!(
                f,
                "bimodulus loop did not converge at the ratio floor after {} iterations",
                trace.len()
            ),
            Error::MmaInfeasible { constraint } => {
                write!(f, "MMA subproblem infeasible for constraint {constraint}")
            }
            Error::StaleFilterCache => {
                f.write_str("filter back-propagation requested without a matching forward pass")
            }
            Error::OverReinforced {
                block_depth,
                effective_depth,
            } => write!(
                f,
                "over-reinforced section: stress block depth {block_depth} >= effective depth {effective_depth}"
            ),
        }
    }
}

impl core::error::Error for Error {}
