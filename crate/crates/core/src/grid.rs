//! Tensor-product velocity grids with trapezoidal weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of each velocity axis in units of the species thermal speed.
pub const HALF_WIDTH_THERMAL: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    /// Particle mass, g (or code units).
    pub mass: f64,
    /// Charge number Z.
    pub charge_number: u32,
}

impl SpeciesParams {
    pub fn new(mass: f64, charge_number: u32) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("species mass must be positive, got {mass}")));
        }
        Ok(SpeciesParams { mass, charge_number })
    }
}

/// Reduced mass m_i m_j / (m_i + m_j).
pub fn reduced_mass(a: &SpeciesParams, b: &SpeciesParams) -> f64 {
    a.mass * b.mass / (a.mass + b.mass)
}

/// Uniform velocity grid on the cube `center ± 6 v_th`.
///
/// Nodes are addressed as `q = (i * n + j) * n + k` with `i` running along v¹.
/// Coordinates are also available in the reduced form `ξ = (v - center) / v_th`,
/// which is identical for every species sharing the same node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    n: usize,
    center: [f64; 3],
    v_th: f64,
    dv: f64,
    /// Grid temperature T_mix used to build the grid; `mass * v_th² == temperature`.
    temperature: f64,
    xi: Vec<f64>,
    axis_weights: Vec<f64>,
}

impl VelocityGrid {
    /// Build the grid for `species` centred on `u_mix` with thermal speed `sqrt(T_mix / m)`.
    pub fn build(species: &SpeciesParams, u_mix: [f64; 3], t_mix: f64, n: usize) -> Result<Self> {
        if !(t_mix > 0.0) || !t_mix.is_finite() {
            return Err(Error::invalid(format!(
                "grid temperature must be positive, got {t_mix}"
            )));
        }
        if !(species.mass > 0.0) {
            return Err(Error::invalid("species mass must be positive"));
        }
        if n < 2 {
            return Err(Error::invalid(format!("need at least 2 nodes per axis, got {n}")));
        }
        if u_mix.iter().any(|u| !u.is_finite()) {
            return Err(Error::invalid("grid center must be finite"));
        }
        let v_th = (t_mix / species.mass).sqrt();
        let dxi = 2.0 * HALF_WIDTH_THERMAL / (n - 1) as f64;
        let xi = (0..n)
            .map(|i| {
                // Symmetric construction keeps ξ_i = -ξ_{n-1-i} exactly.
                let j = i as f64 - 0.5 * (n - 1) as f64;
                j * dxi
            })
            .collect();
        let axis_weights = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect();
        Ok(VelocityGrid {
            n,
            center: u_mix,
            v_th,
            dv: dxi * v_th,
            temperature: t_mix,
            xi,
            axis_weights,
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    pub fn thermal_speed(&self) -> f64 {
        self.v_th
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn dv(&self) -> f64 {
        self.dv
    }

    /// Volume element (Δv)³.
    pub fn cell_volume(&self) -> f64 {
        self.dv * self.dv * self.dv
    }

    pub fn axis_min(&self, axis: usize) -> f64 {
        self.center[axis] + self.xi[0] * self.v_th
    }

    pub fn axis_max(&self, axis: usize) -> f64 {
        self.center[axis] + self.xi[self.n - 1] * self.v_th
    }

    /// Reduced coordinates ξ along one axis.
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// Physical node coordinates along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        self.xi.iter().map(|x| self.center[axis] + x * self.v_th).collect()
    }

    /// One-dimensional trapezoid weights (1/2 on the endpoints).
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unindex(&self, q: usize) -> (usize, usize, usize) {
        let k = q % self.n;
        let ij = q / self.n;
        (ij / self.n, ij % self.n, k)
    }

    /// Physical velocity of node `q`.
    #[inline]
    pub fn velocity(&self, q: usize) -> [f64; 3] {
        let (i, j, k) = self.unindex(q);
        [
            self.center[0] + self.xi[i] * self.v_th,
            self.center[1] + self.xi[j] * self.v_th,
            self.center[2] + self.xi[k] * self.v_th,
        ]
    }

    /// Product weight ω_q.
    #[inline]
    pub fn weight(&self, q: usize) -> f64 {
        let (i, j, k) = self.unindex(q);
        self.axis_weights[i] * self.axis_weights[j] * self.axis_weights[k]
    }

    /// All product weights ω_q in node order.
    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &wi in &self.axis_weights {
            for &wj in &self.axis_weights {
                for &wk in &self.axis_weights {
                    out.push(wi * wj * wk);
                }
            }
        }
        out
    }

    /// Evaluate `func(v)` at every node.
    pub fn map_nodes(&self, mut func: impl FnMut([f64; 3]) -> f64) -> Vec<f64> {
        let coords: Vec<Vec<f64>> = (0..3).map(|a| self.axis_coords(a)).collect();
        let mut out = Vec::with_capacity(self.len());
        for &vx in &coords[0] {
            for &vy in &coords[1] {
                for &vz in &coords[2] {
                    out.push(func([vx, vy, vz]));
                }
            }
        }
        out
    }

    /// Σ_q ω_q values_q (Δv)³.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::invalid(format!(
                "expected {} nodal values, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        let n = self.n;
        let w = &self.axis_weights;
        let mut total = 0.0;
        for i in 0..n {
            let mut plane = 0.0;
            for j in 0..n {
                let row = &values[(i * n + j) * n..(i * n + j + 1) * n];
                let line: f64 = row.iter().zip(w).map(|(v, wk)| v * wk).sum();
                plane += w[j] * line;
            }
            total += w[i] * plane;
        }
        total * self.cell_volume()
    }

    /// Largest |v¹| over the grid.
    pub fn max_abs_v1(&self) -> f64 {
        self.axis_min(0).abs().max(self.axis_max(0).abs())
    }
}
