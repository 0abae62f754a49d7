//! Density filter and Heaviside projection from design variables to
//! physical densities, with the transposed chain for sensitivities.

use alloc::vec::Vec;

use crate::domain::Mesh;
use crate::error::{Error, Result};

/// Linear-decay density filter over element centers.
///
/// Row `i` holds `w_ij = max(0, R - |c_i - c_j|)` divided by the row sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterKernel {
    radius: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FilterKernel {
    /// Builds the normalized neighbour lists for `mesh`.
    pub fn new(mesh: &Mesh, radius: f64) -> Self {
        let (nx, ny, h) = (mesh.nx(), mesh.ny(), mesh.element_size());
        let reach = libm::ceil(radius / h) as isize;
        let mut rows = Vec::with_capacity(mesh.element_count());
        for i in 0..nx as isize {
            for j in 0..ny as isize {
                let mut row = Vec::new();
                for di in -reach..=reach {
                    for dj in -reach..=reach {
                        let (k, l) = (i + di, j + dj);
                        if k < 0 || l < 0 || k >= nx as isize || l >= ny as isize {
                            continue;
                        }
                        let dist = h * libm::hypot(di as f64, dj as f64);
                        let w = radius - dist;
                        if w > 0.0 {
                            row.push((k as usize * ny + l as usize, w));
                        }
                    }
                }
                let sum: f64 = row.iter().map(|&(_, w)| w).sum();
                for entry in &mut row {
                    entry.1 /= sum;
                }
                rows.push(row);
            }
        }
        FilterKernel { radius, rows }
    }

    /// Filter radius.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Normalized row of element `e`.
    pub fn row(&self, e: usize) -> &[(usize, f64)] {
        &self.rows[e]
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }

    /// `W^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; y.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[j] += w * y[i];
            }
        }
        out
    }
}

/// Smoothed step about the threshold `eta`:
/// `(tanh(beta eta) + tanh(beta (t - eta))) / (tanh(beta eta) + tanh(beta (1 - eta)))`.
/// Maps 0 to 0 and 1 to 1 for every `beta`; the identity as `beta -> 0`.
pub fn heaviside_project(t: f64, beta: f64, eta: f64) -> f64 {
    if beta < 1e-8 {
        return t;
    }
    let a = libm::tanh(beta * eta);
    (a + libm::tanh(beta * (t - eta))) / (a + libm::tanh(beta * (1.0 - eta)))
}

/// Derivative of [`heaviside_project`] with respect to `t`.
pub fn heaviside_derivative(t: f64, beta: f64, eta: f64) -> f64 {
    if beta < 1e-8 {
        return 1.0;
    }
    let sech = 1.0 / libm::cosh(beta * (t - eta));
    beta * sech * sech / (libm::tanh(beta * eta) + libm::tanh(beta * (1.0 - eta)))
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    beta: Option<f64>,
    filtered: Vec<f64>,
}

/// Density filter optionally followed by Heaviside projection.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterChain {
    kernel: FilterKernel,
    beta: Option<f64>,
    eta: f64,
    cache: Option<Cache>,
}

impl FilterChain {
    /// Filter only.
    pub fn density(kernel: FilterKernel) -> Self {
        FilterChain {
            kernel,
            beta: None,
            eta: 0.5,
            cache: None,
        }
    }

    /// Filter then projection at sharpness `beta` about threshold `eta`.
    pub fn projected(kernel: FilterKernel, beta: f64, eta: f64) -> Self {
        FilterChain {
            kernel,
            beta: Some(beta),
            eta,
            cache: None,
        }
    }

    /// Underlying kernel.
    pub fn kernel(&self) -> &FilterKernel {
        &self.kernel
    }

    /// Current sharpness, `None` without projection.
    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// Changes the sharpness; later back-propagation needs a new forward pass.
    pub fn set_beta(&mut self, beta: f64) {
        if self.beta.is_some() {
            self.beta = Some(beta);
        }
    }

    /// Physical densities without touching the cache.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let filtered = self.kernel.apply(x);
        match self.beta {
            Some(b) => filtered
                .iter()
                .map(|&t| heaviside_project(t, b, self.eta))
                .collect(),
            None => filtered,
        }
    }

    /// Physical densities; caches what [`FilterChain::backprop`] needs.
    pub fn forward(&mut self, x: &[f64]) -> Vec<f64> {
        let filtered = self.kernel.apply(x);
        let out = match self.beta {
            Some(b) => filtered
                .iter()
                .map(|&t| heaviside_project(t, b, self.eta))
                .collect(),
            None => filtered.clone(),
        };
        self.cache = Some(Cache {
            beta: self.beta,
            filtered,
        });
        out
    }

    /// Maps `dF/d rho` to `dF/dx` through the last forward pass.
    pub fn backprop(&self, grad: &[f64]) -> Result<Vec<f64>> {
        let cache = match &self.cache {
            Some(c) if c.beta == self.beta && c.filtered.len() == grad.len() => c,
            _ => return Err(Error::StaleFilterCache),
        };
        match self.beta {
            Some(b) => {
                let chained: Vec<f64> = grad
                    .iter()
                    .zip(&cache.filtered)
                    .map(|(&g, &t)| g * heaviside_derivative(t, b, self.eta))
                    .collect();
                Ok(self.kernel.apply_transpose(&chained))
            }
            None => Ok(self.kernel.apply_transpose(grad)),
        }
    }
}
