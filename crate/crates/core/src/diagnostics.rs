//! Conserved totals, entropy, error norms and the Euler reference solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{SpeciesParams, VelocityGrid};
use crate::moments::conserved_densities;

pub mod riemann;

/// Domain totals per unit cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConservedTotals {
    pub mass: [f64; 2],
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl ConservedTotals {
    /// Componentwise (mass₁, mass₂, momentum, energy) as a flat array.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.mass[0],
            self.mass[1],
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
            self.energy,
        ]
    }

    /// Largest relative change of any component; momentum is measured against
    /// the momentum magnitude scale sqrt(2 · mass · energy) so that zero-drift
    /// states are handled.
    pub fn max_relative_drift(&self, reference: &ConservedTotals) -> f64 {
        let mass = reference.mass[0] + reference.mass[1];
        let mom_scale = (2.0 * mass * reference.energy.abs()).sqrt();
        let mut worst = 0.0f64;
        for s in 0..2 {
            let d = (self.mass[s] - reference.mass[s]).abs() / reference.mass[s].abs().max(f64::MIN_POSITIVE);
            worst = worst.max(d);
        }
        for p in 0..3 {
            let d = (self.momentum[p] - reference.momentum[p]).abs() / mom_scale.max(f64::MIN_POSITIVE);
            worst = worst.max(d);
        }
        worst.max((self.energy - reference.energy).abs() / reference.energy.abs().max(f64::MIN_POSITIVE))
    }
}

/// Σ_k Σ_q ω_q a_i f (Δv)³ Δx with a = m (1, v, |v|²/2).
pub fn conserved_totals(
    f: [&Field; 2],
    grids: &[VelocityGrid; 2],
    species: &[SpeciesParams; 2],
    dx: f64,
) -> ConservedTotals {
    let mut t = ConservedTotals::default();
    for i in 0..2 {
        let mut acc = [0.0; 5];
        for k in 0..f[i].cells() {
            let d = conserved_densities(f[i].cell(k), &grids[i], &species[i]);
            for c in 0..5 {
                acc[c] += d[c];
            }
        }
        t.mass[i] = acc[0] * dx;
        for p in 0..3 {
            t.momentum[p] += acc[p + 1] * dx;
        }
        t.energy += acc[4] * dx;
    }
    t
}

/// h(z) = z log z − z with h(0) = 0.
#[inline]
pub fn h(z: f64) -> f64 {
    if z > 0.0 {
        z * z.ln() - z
    } else {
        0.0
    }
}

/// Σ_q ω_q h(f_q) (Δv)³ for one velocity distribution.
pub fn entropy_density(f: &[f64], grid: &VelocityGrid) -> Result<f64> {
    if let Some(v) = f.iter().find(|v| **v < 0.0) {
        return Err(Error::invalid(format!(
            "entropy of a negative distribution value {v:e}"
        )));
    }
    let hv: Vec<f64> = f.iter().map(|&z| h(z)).collect();
    grid.integrate(&hv)
}

/// H = Σ_k Σ_q ω_q (h(f₁) + h(f₂)) (Δv)³ Δx.
pub fn entropy(f: [&Field; 2], grids: &[VelocityGrid; 2], dx: f64) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..2 {
        for k in 0..f[i].cells() {
            total += entropy_density(f[i].cell(k), &grids[i])?;
        }
    }
    Ok(total * dx)
}

/// Running entropy with a backward-difference dissipation rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub h: f64,
    pub dh_dt: f64,
}

impl EntropyRecord {
    pub fn next(&self, h: f64, dt: f64) -> EntropyRecord {
        EntropyRecord {
            h,
            dh_dt: (h - self.h) / dt,
        }
    }
}

/// Σ_k Σ_q |f_coarse − restrict(f_fine)| (Δv)³ Δx, where the fine solution
/// (twice the cells) is restricted by averaging cell pairs.
pub fn l1_self_error(coarse: &Field, fine: &Field, grid: &VelocityGrid, dx_coarse: f64) -> Result<f64> {
    if fine.cells() != 2 * coarse.cells() || fine.nodes() != coarse.nodes() || coarse.nodes() != grid.len() {
        return Err(Error::invalid(format!(
            "incompatible runs: coarse {}×{}, fine {}×{}, grid {}",
            coarse.cells(),
            coarse.nodes(),
            fine.cells(),
            fine.nodes(),
            grid.len()
        )));
    }
    let mut sum = 0.0;
    for k in 0..coarse.cells() {
        let (a, b, c) = (coarse.cell(k), fine.cell(2 * k), fine.cell(2 * k + 1));
        for q in 0..a.len() {
            sum += (a[q] - 0.5 * (b[q] + c[q])).abs();
        }
    }
    Ok(sum * grid.cell_volume() * dx_coarse)
}

/// L1 distance of two runs on the same mesh, same normalization as [`l1_self_error`].
pub fn l1_distance(a: &Field, b: &Field, grid: &VelocityGrid, dx: f64) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::invalid("fields differ in shape"));
    }
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s * grid.cell_volume() * dx)
}

/// r = (a − b) / (|a| + |b|), zero where both vanish.
pub fn relative_difference(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("fields have {} and {} cells", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| rel_diff(x, y)).collect())
}

#[inline]
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let d = a.abs() + b.abs();
    if d == 0.0 {
        0.0
    } else {
        (a - b) / d
    }
}

/// Slope of log(error) against log(cell count) between consecutive levels.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
