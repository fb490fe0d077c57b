//! Species and mixture moments, Maxwellians.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{SpeciesParams, VelocityGrid};

/// Macroscopic quantities of one species in one cell.
///
/// For a vacuum cell (`n == 0`) the velocity and temperature are meaningless;
/// `defined` is false and `u`, `t` are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesMoments {
    pub n: f64,
    pub rho: f64,
    pub u: [f64; 3],
    pub t: f64,
    pub defined: bool,
}

impl SpeciesMoments {
    pub fn new(species: &SpeciesParams, n: f64, u: [f64; 3], t: f64) -> Self {
        SpeciesMoments {
            n,
            rho: species.mass * n,
            u,
            t,
            defined: n > 0.0,
        }
    }

    pub fn vacuum() -> Self {
        SpeciesMoments {
            n: 0.0,
            rho: 0.0,
            u: [0.0; 3],
            t: 0.0,
            defined: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub u_mix: [f64; 3],
    pub t_mix: f64,
}

/// Raw quadrature sums Σ ω f (1, ξ, |ξ|²)(Δv)³ in reduced coordinates.
pub(crate) fn reduced_sums(f: &[f64], grid: &VelocityGrid) -> [f64; 5] {
    let n = grid.nodes_per_axis();
    let xi = grid.xi();
    let w = grid.axis_weights();
    let mut acc = [0.0; 5];
    for i in 0..n {
        let mut plane = [0.0; 5];
        for j in 0..n {
            let row = &f[(i * n + j) * n..(i * n + j + 1) * n];
            let (mut s0, mut s3, mut s4) = (0.0, 0.0, 0.0);
            for k in 0..n {
                let v = w[k] * row[k];
                s0 += v;
                s3 += v * xi[k];
                s4 += v * xi[k] * xi[k];
            }
            let wj = w[j];
            let r2 = xi[i] * xi[i] + xi[j] * xi[j];
            plane[0] += wj * s0;
            plane[2] += wj * s0 * xi[j];
            plane[3] += wj * s3;
            plane[4] += wj * (s4 + r2 * s0);
        }
        let wi = w[i];
        acc[0] += wi * plane[0];
        acc[1] += wi * plane[0] * xi[i];
        acc[2] += wi * plane[2];
        acc[3] += wi * plane[3];
        acc[4] += wi * plane[4];
    }
    let vol = grid.cell_volume();
    acc.iter_mut().for_each(|a| *a *= vol);
    acc
}

/// n, u and T of a nodal distribution.
pub fn species_moments(f: &[f64], grid: &VelocityGrid, species: &SpeciesParams) -> Result<SpeciesMoments> {
    if f.len() != grid.len() {
        return Err(Error::invalid(format!(
            "expected {} nodal values, got {}",
            grid.len(),
            f.len()
        )));
    }
    Ok(species_moments_unchecked(f, grid, species))
}

pub(crate) fn species_moments_unchecked(f: &[f64], grid: &VelocityGrid, species: &SpeciesParams) -> SpeciesMoments {
    let s = reduced_sums(f, grid);
    moments_from_reduced(&s, grid, species)
}

pub(crate) fn moments_from_reduced(s: &[f64; 5], grid: &VelocityGrid, species: &SpeciesParams) -> SpeciesMoments {
    let n = s[0];
    if !(n > 0.0) {
        return SpeciesMoments::vacuum();
    }
    let vt = grid.thermal_speed();
    let c = grid.center();
    let mean = [s[1] / n, s[2] / n, s[3] / n];
    let spread = s[4] / n - (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]);
    let t = (species.mass * vt * vt * spread / 3.0).max(0.0);
    SpeciesMoments::new(
        species,
        n,
        [c[0] + vt * mean[0], c[1] + vt * mean[1], c[2] + vt * mean[2]],
        t,
    )
}

/// Mixture velocity and temperature (second form of the mixture temperature).
pub fn mixture_state(a: &SpeciesMoments, b: &SpeciesMoments) -> Result<MixtureState> {
    let rho = a.rho + b.rho;
    let n = a.n + b.n;
    if !(rho > 0.0) || !(n > 0.0) {
        return Err(Error::invalid("mixture state undefined for a vacuum"));
    }
    let u_mix = std::array::from_fn(|p| (a.rho * a.u[p] + b.rho * b.u[p]) / rho);
    let du2: f64 = (0..3).map(|p| (a.u[p] - b.u[p]).powi(2)).sum();
    let t_mix = (a.n * a.t + b.n * b.t) / n + a.rho * b.rho / rho * du2 / (3.0 * n);
    Ok(MixtureState { u_mix, t_mix })
}

/// Mixture temperature via the first (kinetic-energy difference) form.
pub fn mixture_temperature_energy_form(a: &SpeciesMoments, b: &SpeciesMoments) -> Result<f64> {
    let mix = mixture_state(a, b)?;
    let n = a.n + b.n;
    let sq = |u: &[f64; 3]| u.iter().map(|x| x * x).sum::<f64>();
    let um2 = sq(&mix.u_mix);
    Ok((a.n * a.t + b.n * b.t) / n + (a.rho * (sq(&a.u) - um2) + b.rho * (sq(&b.u) - um2)) / (3.0 * n))
}

/// Maxwellian n (m/2πT)^{3/2} exp(-m|v-u|²/(2T)) sampled at the grid nodes.
pub fn maxwellian(species: &SpeciesParams, n: f64, u: [f64; 3], t: f64, grid: &VelocityGrid) -> Result<Vec<f64>> {
    if !(n > 0.0) || !(t > 0.0) {
        return Err(Error::invalid(format!(
            "maxwellian needs n > 0 and T > 0, got n={n}, T={t}"
        )));
    }
    let mut out = vec![0.0; grid.len()];
    maxwellian_into(species, n, u, t, grid, &mut out);
    Ok(out)
}

/// Separable evaluation of a Maxwellian into `out`.
pub(crate) fn maxwellian_into(
    species: &SpeciesParams,
    n: f64,
    u: [f64; 3],
    t: f64,
    grid: &VelocityGrid,
    out: &mut [f64],
) {
    let m = species.mass;
    let peak = n * (m / (2.0 * PI * t)).powf(1.5);
    let axes: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            grid.axis_coords(a)
                .iter()
                .map(|v| (-m * (v - u[a]).powi(2) / (2.0 * t)).exp())
                .collect()
        })
        .collect();
    let nn = grid.nodes_per_axis();
    for i in 0..nn {
        for j in 0..nn {
            let pij = peak * axes[0][i] * axes[1][j];
            let row = &mut out[(i * nn + j) * nn..(i * nn + j + 1) * nn];
            for (r, ez) in row.iter_mut().zip(&axes[2]) {
                *r = pij * ez;
            }
        }
    }
}

/// Mass, momentum and energy densities Σ ω m (1, v, |v|²/2) f (Δv)³.
pub fn conserved_densities(f: &[f64], grid: &VelocityGrid, species: &SpeciesParams) -> [f64; 5] {
    let s = reduced_sums(f, grid);
    let m = species.mass;
    let vt = grid.thermal_speed();
    let c = grid.center();
    let c2: f64 = c.iter().map(|x| x * x).sum();
    let mom: [f64; 3] = std::array::from_fn(|p| c[p] * s[0] + vt * s[p + 1]);
    let cdot = c[0] * s[1] + c[1] * s[2] + c[2] * s[3];
    let e = 0.5 * (c2 * s[0] + 2.0 * vt * cdot + vt * vt * s[4]);
    [m * s[0], m * mom[0], m * mom[1], m * mom[2], m * e]
}
