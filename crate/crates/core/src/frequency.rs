//! Collision-frequency models.
//!
//! Every model has the shape `ν_ij(v) = K_ij n_j / (δ_ij + |v - u_mix|³)` where
//! `K_ij` is either a constant (power law) or the Coulomb prefactor
//! `4π (Z_i Z_j e² / 2μ_ij)² L_ij`. The velocity-independent variants replace
//! the cubic relative speed, or the whole frequency, by an average.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::PlasmaConstants;
use crate::error::{Error, Result};
use crate::grid::{reduced_mass, SpeciesParams, VelocityGrid};
use crate::moments::{MixtureState, SpeciesMoments};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencyLaw {
    /// `C n_j / (δ + |v - u_mix|³)`, temperatures in the same energy units as m v².
    PowerLaw { c: f64 },
    /// Coulomb momentum-transfer rate; cgs units with temperatures in erg.
    Coulomb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Nodal `|v - u_mix|³`.
    VelocityDependent,
    /// `|v - u_mix|` replaced by `v_T = sqrt(T_mix / 2μ)`.
    Thermal,
    /// `|v - u_mix|³` replaced by its Maxwell-weighted average v̂³.
    Vhat,
    /// The whole frequency replaced by its Maxwell-weighted average ν̄.
    MaxwellAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    pub law: FrequencyLaw,
    pub averaging: Averaging,
}

impl FrequencyModel {
    pub fn power_law(c: f64, averaging: Averaging) -> Self {
        FrequencyModel {
            law: FrequencyLaw::PowerLaw { c },
            averaging,
        }
    }

    pub fn coulomb(averaging: Averaging) -> Self {
        FrequencyModel {
            law: FrequencyLaw::Coulomb,
            averaging,
        }
    }

    /// Apply a command-line tag. The tag selects the averaging; the law family
    /// (power law or Coulomb) of `self` is kept.
    pub fn with_tag(self, tag: &str) -> Result<Self> {
        let averaging = match tag {
            "toy_power" | "power_law" | "sod_veldep" | "veldep" | "velocity_dependent" | "coulomb"
            | "coulomb_veldep" => Averaging::VelocityDependent,
            "coulomb_thermal" | "thermal" | "power_law_thermal" => Averaging::Thermal,
            "coulomb_vhat" | "sod_vhat" | "power_law_vhat" | "vhat" => Averaging::Vhat,
            "coulomb_bar" | "coulomb_maxwell" | "power_law_bar" | "bar" | "maxwell_averaged" => {
                Averaging::MaxwellAveraged
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown frequency tag '{other}' (expected one of toy_power, power_law, sod_veldep, \
                     sod_vhat, coulomb, coulomb_thermal, coulomb_vhat, coulomb_bar)"
                )))
            }
        };
        Ok(FrequencyModel { averaging, ..self })
    }

    pub fn tag(&self) -> &'static str {
        match (self.law, self.averaging) {
            (FrequencyLaw::PowerLaw { .. }, Averaging::VelocityDependent) => "power_law",
            (FrequencyLaw::PowerLaw { .. }, Averaging::Thermal) => "power_law_thermal",
            (FrequencyLaw::PowerLaw { .. }, Averaging::Vhat) => "power_law_vhat",
            (FrequencyLaw::PowerLaw { .. }, Averaging::MaxwellAveraged) => "power_law_bar",
            (FrequencyLaw::Coulomb, Averaging::VelocityDependent) => "coulomb",
            (FrequencyLaw::Coulomb, Averaging::Thermal) => "coulomb_thermal",
            (FrequencyLaw::Coulomb, Averaging::Vhat) => "coulomb_vhat",
            (FrequencyLaw::Coulomb, Averaging::MaxwellAveraged) => "coulomb_bar",
        }
    }
}

/// Regularization δ_ij = 0.1 (¼ sqrt(T_mix / 2μ_ij))³, T_mix in energy units.
pub fn regularization_delta(a: &SpeciesParams, b: &SpeciesParams, t_mix: f64) -> f64 {
    let mu = reduced_mass(a, b);
    let dv = 0.25 * (t_mix / (2.0 * mu)).sqrt();
    0.1 * dv * dv * dv
}

/// Coulomb logarithm L_ij = ½ log(1 + λ_D² / b90²) with temperature in eV.
pub fn coulomb_log(
    z_i: u32,
    z_j: u32,
    charges: [u32; 2],
    densities: [f64; 2],
    t_mix_ev: f64,
    constants: &PlasmaConstants,
) -> Result<f64> {
    if densities.iter().any(|n| *n < 0.0 || !n.is_finite()) {
        return Err(Error::invalid(format!(
            "negative or non-finite density in Coulomb logarithm: {densities:?}"
        )));
    }
    if !(t_mix_ev > 0.0) {
        return Err(Error::invalid(format!(
            "Coulomb logarithm needs T_mix > 0, got {t_mix_ev}"
        )));
    }
    let zz = (z_i * z_j) as f64;
    if zz == 0.0 {
        return Ok(0.0);
    }
    let e2 = constants.e2_ev_cm;
    let z = charges.map(|c| c as f64);
    let n_e = z[0] * densities[0] + z[1] * densities[1];
    // 1/λ_D² = 1/λ_e² + 1/λ_1² + 1/λ_2²
    let screening = 4.0 * PI * e2 / t_mix_ev * (n_e + densities[0] * z[0] * z[0] + densities[1] * z[1] * z[1]);
    if !(screening > 0.0) {
        return Err(Error::invalid("Coulomb logarithm undefined without charged particles"));
    }
    let lambda_d2 = 1.0 / screening;
    let b90 = zz * e2 / t_mix_ev;
    Ok(0.5 * (1.0 + lambda_d2 / (b90 * b90)).ln())
}

/// Everything a frequency evaluation needs about one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellState<'a> {
    pub species: &'a [SpeciesParams; 2],
    pub moments: &'a [SpeciesMoments; 2],
    pub mixture: MixtureState,
    pub constants: &'a PlasmaConstants,
}

/// ν_ij on the grid of species i: either one value for all nodes or one per node.
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencyField {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl FrequencyField {
    #[inline]
    pub fn at(&self, q: usize) -> f64 {
        match self {
            FrequencyField::Constant(v) => *v,
            FrequencyField::Nodal(v) => v[q],
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            FrequencyField::Constant(v) => *v,
            FrequencyField::Nodal(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            FrequencyField::Constant(v) => *v,
            FrequencyField::Nodal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn to_nodal(&self, len: usize) -> Vec<f64> {
        match self {
            FrequencyField::Constant(v) => vec![*v; len],
            FrequencyField::Nodal(v) => v.clone(),
        }
    }
}

/// K_ij: the factor multiplying n_j / (δ + |v - u|³).
pub fn pair_prefactor(model: &FrequencyModel, cell: &CellState<'_>, i: usize, j: usize) -> Result<f64> {
    match model.law {
        FrequencyLaw::PowerLaw { c } => Ok(c),
        FrequencyLaw::Coulomb => {
            let (si, sj) = (&cell.species[i], &cell.species[j]);
            let mu = reduced_mass(si, sj);
            let t_ev = cell.mixture.t_mix / cell.constants.kb_erg_per_ev;
            let l = coulomb_log(
                si.charge_number,
                sj.charge_number,
                [cell.species[0].charge_number, cell.species[1].charge_number],
                [cell.moments[0].n, cell.moments[1].n],
                t_ev,
                cell.constants,
            )?;
            let e2_erg = cell.constants.e2_ev_cm * cell.constants.kb_erg_per_ev;
            let a = (si.charge_number * sj.charge_number) as f64 * e2_erg / (2.0 * mu);
            Ok(4.0 * PI * a * a * l)
        }
    }
}

/// Evaluate ν_ij on `grid_i` for one cell.
pub fn eval_frequency(
    model: &FrequencyModel,
    cell: &CellState<'_>,
    i: usize,
    j: usize,
    grid_i: &VelocityGrid,
) -> Result<FrequencyField> {
    let n_j = cell.moments[j].n;
    if !(n_j > 0.0) || !(cell.mixture.t_mix > 0.0) {
        return Ok(FrequencyField::Constant(0.0));
    }
    let (si, sj) = (&cell.species[i], &cell.species[j]);
    let t_mix = cell.mixture.t_mix;
    let delta = regularization_delta(si, sj, t_mix);
    let k = pair_prefactor(model, cell, i, j)? * n_j;
    let u = cell.mixture.u_mix;
    let mu = reduced_mass(si, sj);
    Ok(match model.averaging {
        Averaging::VelocityDependent => {
            FrequencyField::Nodal(grid_i.map_nodes(|v| k / (delta + rel_speed(v, u).powi(3))))
        }
        Averaging::Thermal => {
            let vt = (t_mix / (2.0 * mu)).sqrt();
            FrequencyField::Constant(k / (delta + vt * vt * vt))
        }
        Averaging::Vhat => {
            let v3 = maxwell_average(grid_i, u, mu / t_mix, |r| r * r * r);
            FrequencyField::Constant(k / (delta + v3))
        }
        Averaging::MaxwellAveraged => {
            FrequencyField::Constant(maxwell_average(grid_i, u, mu / t_mix, |r| k / (delta + r * r * r)))
        }
    })
}

#[inline]
fn rel_speed(v: [f64; 3], u: [f64; 3]) -> f64 {
    ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2) + (v[2] - u[2]).powi(2)).sqrt()
}

/// Σ ω g(|v-u|) 𝓜 / Σ ω 𝓜 with 𝓜 = exp(-a |v-u|²).
pub fn maxwell_average(grid: &VelocityGrid, u: [f64; 3], a: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = grid.nodes_per_axis();
    let w = grid.axis_weights();
    let d: Vec<Vec<f64>> = (0..3)
        .map(|ax| grid.axis_coords(ax).iter().map(|v| (v - u[ax]).powi(2)).collect())
        .collect();
    let e: Vec<Vec<f64>> = d
        .iter()
        .map(|row| row.iter().map(|x| (-a * x).exp()).collect())
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for jj in 0..n {
            let wij = w[i] * w[jj] * e[0][i] * e[1][jj];
            let r2ij = d[0][i] + d[1][jj];
            for kk in 0..n {
                let m = wij * w[kk] * e[2][kk];
                num += m * g((r2ij + d[2][kk]).sqrt());
                den += m;
            }
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// The four frequency fields of one cell: `[[ν_11, ν_12], [ν_21, ν_22]]` indexed `[i][j]`.
pub fn cell_frequencies(
    model: &FrequencyModel,
    cell: &CellState<'_>,
    grids: &[VelocityGrid; 2],
) -> Result<[[FrequencyField; 2]; 2]> {
    Ok([
        [
            eval_frequency(model, cell, 0, 0, &grids[0])?,
            eval_frequency(model, cell, 0, 1, &grids[0])?,
        ],
        [
            eval_frequency(model, cell, 1, 0, &grids[1])?,
            eval_frequency(model, cell, 1, 1, &grids[1])?,
        ],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::KB_ERG_PER_EV;
    use crate::moments::mixture_state;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sp(m: f64, z: u32) -> SpeciesParams {
        SpeciesParams::new(m, z).unwrap()
    }

    #[test]
    fn delta_for_equal_unit_masses() {
        let s = sp(1.0, 0);
        let d = regularization_delta(&s, &s, 1.0);
        assert_relative_eq!(d, 0.1 * (0.25f64 * 1.0f64.sqrt()).powi(3), max_relative = 1e-15);
        let t = sp(1.5, 0);
        assert_eq!(regularization_delta(&s, &t, 0.3), regularization_delta(&t, &s, 0.3));
    }

    #[test]
    fn coulomb_log_limits() {
        let c = PlasmaConstants::default();
        // Extremely dense, cold plasma: λ_D ≪ b90.
        let l = coulomb_log(1, 1, [1, 1], [1e40, 1e40], 1e-3, &c).unwrap();
        assert!((0.0..1e-6).contains(&l));
        assert!(coulomb_log(1, 1, [1, 1], [-1.0, 1.0], 1.0, &c).is_err());
        let hot = coulomb_log(6, 1, [6, 1], [6.1e22, 3.6133e21], 150.0, &c).unwrap();
        assert!(hot > 0.0);
    }

    #[test]
    fn hydrogen_carbon_coulomb_log_golden() {
        // Independently evaluated formula chain at n = (6.1e22, 3.6133e21) cm⁻³, T = 141.1 eV.
        let c = PlasmaConstants::default();
        let l12 = coulomb_log(6, 1, [6, 1], [6.1e22, 3.6133e21], 141.1, &c).unwrap();
        assert_relative_eq!(l12, 0.29650567856174537, max_relative = 1e-12);
        let l11 = coulomb_log(6, 6, [6, 1], [6.1e22, 3.6133e21], 141.1, &c).unwrap();
        assert_relative_eq!(l11, 0.011117549130281863, max_relative = 1e-12);
    }

    #[test]
    fn toy_power_law_value() {
        let species = [sp(1.0, 0), sp(1.5, 0)];
        let g = VelocityGrid::build(&species[0], [0.0; 3], 1.0, 5).unwrap();
        let moments = [
            SpeciesMoments::new(&species[0], 2.0, [0.0; 3], 1.0),
            SpeciesMoments::new(&species[1], 3.0, [0.0; 3], 1.0),
        ];
        let mixture = mixture_state(&moments[0], &moments[1]).unwrap();
        let consts = PlasmaConstants::default();
        let cell = CellState {
            species: &species,
            moments: &moments,
            mixture,
            constants: &consts,
        };
        let model = FrequencyModel::power_law(10.0, Averaging::VelocityDependent);
        let f = eval_frequency(&model, &cell, 0, 1, &g).unwrap();
        let delta = regularization_delta(&species[0], &species[1], mixture.t_mix);
        for q in 0..g.len() {
            let v = g.velocity(q);
            let r = rel_speed(v, mixture.u_mix);
            assert_relative_eq!(f.at(q), 10.0 * 3.0 / (delta + r.powi(3)), max_relative = 1e-14);
        }
    }

    #[test]
    fn cubic_decay_far_from_mixture_velocity() {
        let species = [sp(1.0, 0), sp(1.0, 0)];
        let moments = [
            SpeciesMoments::new(&species[0], 1.0, [0.0; 3], 1.0),
            SpeciesMoments::new(&species[1], 1.0, [0.0; 3], 1.0),
        ];
        let mixture = mixture_state(&moments[0], &moments[1]).unwrap();
        let g = VelocityGrid::build(&species[0], [0.0; 3], 1.0, 13).unwrap();
        let consts = PlasmaConstants::default();
        let cell = CellState {
            species: &species,
            moments: &moments,
            mixture,
            constants: &consts,
        };
        let f = eval_frequency(
            &FrequencyModel::power_law(1.0, Averaging::VelocityDependent),
            &cell,
            0,
            0,
            &g,
        )
        .unwrap();
        // nodes at v¹ = 3 and v¹ = 6 on the axis through the origin
        let a = f.at(g.index(9, 6, 6));
        let b = f.at(g.index(12, 6, 6));
        assert_relative_eq!(a / b, 8.0, max_relative = 1e-3);
    }

    #[test]
    fn maxwell_average_matches_direct_sum() {
        let s = sp(2.0, 1);
        let g = VelocityGrid::build(&s, [0.1, 0.0, 0.0], 1.0, 24).unwrap();
        let u = [0.15, -0.02, 0.0];
        let a = 0.7;
        let (mut num, mut den) = (0.0, 0.0);
        for q in 0..g.len() {
            let v = g.velocity(q);
            let r = rel_speed(v, u);
            let m = g.weight(q) * (-a * r * r).exp();
            num += m / (0.01 + r.powi(3));
            den += m;
        }
        let got = maxwell_average(&g, u, a, |r| 1.0 / (0.01 + r.powi(3)));
        assert_relative_eq!(got, num / den, max_relative = 1e-12);
    }

    #[test]
    fn tags_keep_law_family() {
        let sod = FrequencyModel::power_law(2e4, Averaging::VelocityDependent);
        let m = sod.with_tag("coulomb_vhat").unwrap();
        assert_eq!(m.law, FrequencyLaw::PowerLaw { c: 2e4 });
        assert_eq!(m.averaging, Averaging::Vhat);
        assert!(sod.with_tag("nonsense").is_err());
        let hc = FrequencyModel::coulomb(Averaging::Vhat).with_tag("coulomb").unwrap();
        assert_eq!(hc.averaging, Averaging::VelocityDependent);
    }

    #[test]
    fn vacuum_partner_gives_zero() {
        let species = [sp(1.0, 1), sp(2.0, 1)];
        let moments = [
            SpeciesMoments::new(&species[0], 1.0, [0.0; 3], 1.0),
            SpeciesMoments::vacuum(),
        ];
        let mixture = MixtureState {
            u_mix: [0.0; 3],
            t_mix: 1.0,
        };
        let consts = PlasmaConstants::default();
        let cell = CellState {
            species: &species,
            moments: &moments,
            mixture,
            constants: &consts,
        };
        let g = VelocityGrid::build(&species[0], [0.0; 3], 1.0, 4).unwrap();
        let f = eval_frequency(&FrequencyModel::power_law(1.0, Averaging::Vhat), &cell, 0, 1, &g).unwrap();
        assert_eq!(f, FrequencyField::Constant(0.0));
    }

    proptest! {
        #[test]
        fn coulomb_symmetry_and_nonnegativity(n1 in 1e18f64..1e22, n2 in 1e18f64..1e22,
                                              t_ev in 10.0f64..1000.0, z1 in 1u32..7, z2 in 1u32..7,
                                              avg in 0usize..4) {
            let species = [sp(1.993e-23, z1), sp(1.661e-24, z2)];
            let t = t_ev * KB_ERG_PER_EV;
            let moments = [
                SpeciesMoments::new(&species[0], n1, [0.0; 3], t),
                SpeciesMoments::new(&species[1], n2, [0.0; 3], t),
            ];
            let mixture = mixture_state(&moments[0], &moments[1]).unwrap();
            let consts = PlasmaConstants::default();
            let cell = CellState { species: &species, moments: &moments, mixture, constants: &consts };
            let averaging = [Averaging::VelocityDependent, Averaging::Thermal, Averaging::Vhat,
                             Averaging::MaxwellAveraged][avg];
            let model = FrequencyModel::coulomb(averaging);
            // Prefactor symmetry n_1 K_12 n_2 = n_2 K_21 n_1 and δ_12 = δ_21.
            let k12 = pair_prefactor(&model, &cell, 0, 1).unwrap();
            let k21 = pair_prefactor(&model, &cell, 1, 0).unwrap();
            prop_assert!((k12 - k21).abs() <= 1e-14 * k12.abs());
            let g = VelocityGrid::build(&species[0], [0.0; 3], t, 6).unwrap();
            let f = eval_frequency(&model, &cell, 0, 1, &g).unwrap();
            prop_assert!(f.min() >= 0.0 && f.max().is_finite());
        }

        #[test]
        fn power_law_nodal_symmetry(n1 in 0.1f64..10.0, n2 in 0.1f64..10.0, c in 0.1f64..100.0) {
            let species = [sp(1.0, 0), sp(1.0, 0)];
            let moments = [
                SpeciesMoments::new(&species[0], n1, [0.1, 0.0, 0.0], 1.0),
                SpeciesMoments::new(&species[1], n2, [-0.2, 0.0, 0.0], 0.5),
            ];
            let mixture = mixture_state(&moments[0], &moments[1]).unwrap();
            let consts = PlasmaConstants::default();
            let cell = CellState { species: &species, moments: &moments, mixture, constants: &consts };
            let g = VelocityGrid::build(&species[0], [0.0; 3], 1.0, 5).unwrap();
            let model = FrequencyModel::power_law(c, Averaging::VelocityDependent);
            let f12 = eval_frequency(&model, &cell, 0, 1, &g).unwrap();
            let f21 = eval_frequency(&model, &cell, 1, 0, &g).unwrap();
            for q in 0..g.len() {
                let a = n1 * f12.at(q);
                let b = n2 * f21.at(q);
                prop_assert!((a - b).abs() <= 1e-13 * a.abs());
            }
        }
    }
}
