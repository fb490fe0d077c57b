//! Named experiment presets, JSON configuration and initial data.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::{PlasmaConstants, KB_ERG_PER_EV};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::frequency::{Averaging, FrequencyLaw, FrequencyModel};
use crate::grid::{SpeciesParams, VelocityGrid};
use crate::moments::{mixture_state, species_moments, MixtureState, SpeciesMoments};
use crate::stepper::{GuardPolicy, Scheme, SchemeConfig, SimState, Stepper};
use crate::transport::{Boundary, FluxOrder, SpatialMesh};

/// Preset names accepted by [`preset`].
pub const PRESETS: [&str; 9] = [
    "toy",
    "hc",
    "sod",
    "mach1_7",
    "mach4",
    "interpenetration_high",
    "interpenetration_low",
    "appendix_c1",
    "appendix_c1e4",
];

/// Samples used to average the initial mixture state over the domain.
const GRID_SAMPLES: usize = 4096;
/// Nodes per axis of the auxiliary grid used to integrate non-Maxwellian data.
const PROVISIONAL_NODES: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Dimensionless; temperatures in the energy units of m v².
    Code,
    /// cgs with temperatures given in eV.
    Cgs,
}

/// Density, drift velocity and temperature of one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveState {
    pub n: f64,
    pub u: [f64; 3],
    pub t: f64,
}

impl PrimitiveState {
    fn new(n: f64, u1: f64, t: f64) -> Self {
        PrimitiveState {
            n,
            u: [u1, 0.0, 0.0],
            t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinusoidalTemperature {
    /// T = 1 / (1 + a sin(kx)).
    Reciprocal,
    /// T = 1.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Spatially constant Maxwellians.
    Uniform { states: [PrimitiveState; 2] },
    /// Maxwellians with `left` for x ≤ split and `right` for x > split.
    Piecewise {
        split: f64,
        left: [PrimitiveState; 2],
        right: [PrimitiveState; 2],
    },
    /// f = A m^p exp(−ε / ((R/m)^s − |v − u|₁^s)) inside |v − u|₁ < R/m, zero outside.
    CompactBump {
        amplitude: f64,
        mass_power: f64,
        epsilon: f64,
        radius: f64,
        exponent: i32,
        drift: [[f64; 3]; 2],
    },
    /// n = 1 + a sin(kx), fixed drift, temperature per `temperature`.
    Sinusoidal {
        amplitude: f64,
        wavenumber: f64,
        velocity: [f64; 3],
        temperature: SinusoidalTemperature,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Moment snapshots every this many steps (0: first and last only).
    pub snapshot_every: usize,
    /// Positions x whose containing cells get distribution slices along v¹.
    pub slice_positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub units: Units,
    pub species: [SpeciesParams; 2],
    pub initial: InitialCondition,
    pub frequency: FrequencyModel,
    pub mesh: MeshConfig,
    pub scheme: Scheme,
    pub flux_order: FluxOrder,
    pub velocity_nodes: usize,
    /// Fixed time step; CFL step when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub output: OutputConfig,
    /// Step-shrinking rule after a positivity violation.
    #[serde(default)]
    pub guard: GuardPolicy,
}

fn hydrogen_helium() -> [SpeciesParams; 2] {
    [
        SpeciesParams {
            mass: 1.655e-24,
            charge_number: 1,
        },
        SpeciesParams {
            mass: 3.308e-24,
            charge_number: 2,
        },
    ]
}

fn shock(
    name: &str,
    half_width: f64,
    left: PrimitiveState,
    right: PrimitiveState,
    dt: f64,
    t_end: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        guard: GuardPolicy::Global,
        name: name.into(),
        units: Units::Cgs,
        species: hydrogen_helium(),
        initial: InitialCondition::Piecewise {
            split: 0.0,
            left: [left, left],
            right: [right, right],
        },
        frequency: FrequencyModel::coulomb(Averaging::VelocityDependent),
        mesh: MeshConfig {
            x_min: -half_width,
            x_max: half_width,
            cells: 200,
            boundary: Boundary::Copy,
        },
        scheme: Scheme::Ars222,
        flux_order: FluxOrder::Second,
        velocity_nodes: 48,
        dt: Some(dt),
        t_end,
        output: OutputConfig {
            snapshot_every: 0,
            slice_positions: vec![-0.5 * half_width, 0.0, 0.5 * half_width],
        },
    }
}

fn interpenetration(name: &str, scale: f64) -> ScenarioConfig {
    let (hi, lo, u, t) = (1e20 * scale, 1e17 * scale, 2.2e6, 10.0);
    let mut c = shock(
        name,
        25e-4,
        PrimitiveState::new(hi, u, t),
        PrimitiveState::new(lo, -u, t),
        806e-15,
        120.870e-12,
    );
    c.initial = InitialCondition::Piecewise {
        split: 0.0,
        left: [PrimitiveState::new(hi, u, t), PrimitiveState::new(lo, u, t)],
        right: [PrimitiveState::new(lo, -u, t), PrimitiveState::new(hi, -u, t)],
    };
    c
}

fn appendix(name: &str, c: f64) -> ScenarioConfig {
    let species = SpeciesParams {
        mass: 1.0,
        charge_number: 0,
    };
    ScenarioConfig {
        guard: GuardPolicy::Global,
        name: name.into(),
        units: Units::Code,
        species: [species, species],
        initial: InitialCondition::Sinusoidal {
            amplitude: 0.1,
            wavenumber: std::f64::consts::PI,
            velocity: [1.0, 0.0, 0.0],
            temperature: SinusoidalTemperature::Reciprocal,
        },
        frequency: FrequencyModel::power_law(c, Averaging::VelocityDependent),
        mesh: MeshConfig {
            x_min: 0.0,
            x_max: 2.0,
            cells: 20,
            boundary: Boundary::Periodic,
        },
        scheme: Scheme::Ars222,
        flux_order: FluxOrder::Second,
        velocity_nodes: 48,
        dt: None,
        t_end: 0.1,
        output: OutputConfig {
            snapshot_every: 0,
            slice_positions: vec![],
        },
    }
}

/// Configuration of a named preset.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let homogeneous = || MeshConfig {
        x_min: 0.0,
        x_max: 1.0,
        cells: 1,
        boundary: Boundary::Periodic,
    };
    let config = match name {
        "toy" => ScenarioConfig {
            guard: GuardPolicy::Global,
            name: name.into(),
            units: Units::Code,
            species: [
                SpeciesParams {
                    mass: 1.0,
                    charge_number: 0,
                },
                SpeciesParams {
                    mass: 1.5,
                    charge_number: 0,
                },
            ],
            initial: InitialCondition::CompactBump {
                amplitude: 0.1,
                mass_power: 27.0,
                epsilon: 0.01,
                radius: 0.75,
                exponent: 10,
                drift: [[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]],
            },
            frequency: FrequencyModel::power_law(10.0, Averaging::VelocityDependent),
            mesh: homogeneous(),
            scheme: Scheme::Splitting1,
            flux_order: FluxOrder::First,
            velocity_nodes: 48,
            dt: Some(0.01),
            t_end: 4.0,
            output: OutputConfig {
                snapshot_every: 10,
                slice_positions: vec![0.5],
            },
        },
        "hc" => ScenarioConfig {
            guard: GuardPolicy::Global,
            name: name.into(),
            units: Units::Cgs,
            species: [
                SpeciesParams {
                    mass: 1.993e-23,
                    charge_number: 6,
                },
                SpeciesParams {
                    mass: 1.661e-24,
                    charge_number: 1,
                },
            ],
            initial: InitialCondition::Uniform {
                states: [
                    PrimitiveState::new(6.1e22, 9.818e5, 150.0),
                    PrimitiveState::new(3.6133e21, 0.0, 100.0),
                ],
            },
            frequency: FrequencyModel::coulomb(Averaging::VelocityDependent),
            mesh: homogeneous(),
            scheme: Scheme::Ars222,
            flux_order: FluxOrder::Second,
            velocity_nodes: 48,
            dt: Some(0.8e-15),
            t_end: 8.0e-12,
            output: OutputConfig {
                snapshot_every: 25,
                slice_positions: vec![0.5],
            },
        },
        "sod" => {
            let species = SpeciesParams {
                mass: 1.0,
                charge_number: 0,
            };
            let (l, r) = (PrimitiveState::new(1.0, 0.0, 1.0), PrimitiveState::new(0.1, 0.0, 0.8));
            ScenarioConfig {
                guard: GuardPolicy::Global,
                name: name.into(),
                units: Units::Code,
                species: [species, species],
                initial: InitialCondition::Piecewise {
                    split: 0.0,
                    left: [l, l],
                    right: [r, r],
                },
                frequency: FrequencyModel::power_law(2e4, Averaging::VelocityDependent),
                mesh: MeshConfig {
                    x_min: -0.5,
                    x_max: 0.5,
                    cells: 400,
                    boundary: Boundary::Copy,
                },
                scheme: Scheme::Ars222,
                flux_order: FluxOrder::Second,
                velocity_nodes: 48,
                dt: None,
                t_end: 0.055,
                output: OutputConfig {
                    snapshot_every: 0,
                    slice_positions: vec![-0.25, 0.0, 0.25],
                },
            }
        }
        "mach1_7" => shock(
            name,
            3e-4,
            PrimitiveState::new(6.666e19, 1.7634411e7, 100.0),
            PrimitiveState::new(1.308e20, 8.985007e6, 171.32),
            22e-15,
            5.390e-12,
        ),
        "mach4" => shock(
            name,
            6e-4,
            PrimitiveState::new(3.3488e19, 5.06e7, 100.0),
            PrimitiveState::new(1.128e20, 1.50e7, 586.3),
            25e-15,
            6.345e-12,
        ),
        "interpenetration_high" => interpenetration(name, 1.0),
        "interpenetration_low" => interpenetration(name, 0.01),
        "appendix_c1" | "appendix_convergence" => appendix("appendix_c1", 1.0),
        "appendix_c1e4" => appendix(name, 1e4),
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (available: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(config)
}

/// Recursively merge `patch` into `base`; objects merge key-wise, anything else replaces.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}

impl ScenarioConfig {
    /// Apply a JSON object of field overrides.
    pub fn with_overrides(&self, overrides: &Value) -> Result<ScenarioConfig> {
        if !overrides.is_object() {
            return Err(Error::Config("overrides must be a JSON object".into()));
        }
        let mut v = serde_json::to_value(self)?;
        merge(&mut v, overrides);
        let c: ScenarioConfig =
            serde_json::from_value(v).map_err(|e| Error::Config(format!("inconsistent overrides: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Parse either a full configuration or `{"preset": name, "overrides": {...}}`.
    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed configuration: {e}")))?;
        let c = match v.get("preset") {
            Some(Value::String(name)) => {
                let base = preset(name)?;
                match v.get("overrides") {
                    Some(o) => base.with_overrides(o)?,
                    None => base,
                }
            }
            Some(_) => return Err(Error::Config("'preset' must be a string".into())),
            None => serde_json::from_value(v).map_err(|e| Error::Config(format!("invalid configuration: {e}")))?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mesh with 2^level times the cells and, if fixed, 2^−level times the step.
    pub fn refined(&self, level: u32) -> ScenarioConfig {
        let mut c = self.clone();
        let f = 1usize << level;
        c.mesh.cells *= f;
        c.dt = c.dt.map(|dt| dt / f as f64);
        c
    }

    fn temperature_scale(&self) -> f64 {
        match self.units {
            Units::Code => 1.0,
            Units::Cgs => KB_ERG_PER_EV,
        }
    }

    /// Internal temperature (energy units) to the configuration's units.
    pub fn temperature_out(&self, t: f64) -> f64 {
        t / self.temperature_scale()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for s in &self.species {
            if !(s.mass > 0.0) || !s.mass.is_finite() {
                return bad(format!("species mass must be positive, got {}", s.mass));
            }
        }
        if self.velocity_nodes < 2 {
            return bad(format!(
                "need at least 2 velocity nodes per axis, got {}",
                self.velocity_nodes
            ));
        }
        if self.mesh.cells == 0 || !(self.mesh.x_max > self.mesh.x_min) {
            return bad("mesh needs at least one cell and x_max > x_min".into());
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        match self.frequency.law {
            FrequencyLaw::PowerLaw { c } if !(c >= 0.0) || !c.is_finite() => {
                return bad(format!("frequency constant must be non-negative, got {c}"));
            }
            FrequencyLaw::Coulomb if self.units != Units::Cgs => {
                return bad("Coulomb frequencies require cgs units".into());
            }
            _ => {}
        }
        if let Some(x) = self
            .output
            .slice_positions
            .iter()
            .find(|x| !(**x >= self.mesh.x_min && **x <= self.mesh.x_max))
        {
            return bad(format!(
                "slice position {x} outside [{}, {}]",
                self.mesh.x_min, self.mesh.x_max
            ));
        }
        let check = |s: &PrimitiveState| -> Result<()> {
            if !(s.n > 0.0)
                || !(s.t > 0.0)
                || !s.n.is_finite()
                || !s.t.is_finite()
                || s.u.iter().any(|u| !u.is_finite())
            {
                return Err(Error::Config(format!("initial states need n > 0 and T > 0, got {s:?}")));
            }
            Ok(())
        };
        match &self.initial {
            InitialCondition::Uniform { states } => states.iter().try_for_each(check)?,
            InitialCondition::Piecewise { left, right, .. } => left.iter().chain(right).try_for_each(check)?,
            InitialCondition::CompactBump { amplitude, radius, .. } => {
                if !(*amplitude > 0.0) || !(*radius > 0.0) {
                    return bad("compact bump needs positive amplitude and radius".into());
                }
            }
            InitialCondition::Sinusoidal { amplitude, .. } => {
                if !(amplitude.abs() < 1.0) {
                    return bad(format!("sinusoidal amplitude must satisfy |a| < 1, got {amplitude}"));
                }
            }
        }
        Ok(())
    }
}

/// A configuration turned into grids, mesh and model.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub species: [SpeciesParams; 2],
    pub grids: [VelocityGrid; 2],
    pub mesh: SpatialMesh,
    pub model: FrequencyModel,
    pub constants: PlasmaConstants,
    /// Mixture state the grids are centred on.
    pub grid_mixture: MixtureState,
}

fn compact_bump(v: [f64; 3], center: [f64; 3], m: f64, ic: (f64, f64, f64, f64, i32)) -> f64 {
    let (amplitude, power, eps, radius, s) = ic;
    let r = radius / m;
    let d: f64 = (0..3).map(|p| (v[p] - center[p]).abs()).sum();
    if d >= r {
        return 0.0;
    }
    amplitude * m.powf(power) * (-eps / (r.powi(s) - d.powi(s))).exp()
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let species = [
            SpeciesParams::new(config.species[0].mass, config.species[0].charge_number)?,
            SpeciesParams::new(config.species[1].mass, config.species[1].charge_number)?,
        ];
        let mesh = SpatialMesh::new(
            config.mesh.x_min,
            config.mesh.x_max,
            config.mesh.cells,
            config.mesh.boundary,
        )?;
        let grid_mixture = Self::average_mixture(&config, &species, &mesh)?;
        let n = config.velocity_nodes;
        let grids = [
            VelocityGrid::build(&species[0], grid_mixture.u_mix, grid_mixture.t_mix, n)?,
            VelocityGrid::build(&species[1], grid_mixture.u_mix, grid_mixture.t_mix, n)?,
        ];
        Ok(Scenario {
            model: config.frequency,
            config,
            species,
            grids,
            mesh,
            constants: PlasmaConstants::default(),
            grid_mixture,
        })
    }

    /// Primitive states at x with temperatures in energy units.
    fn primitive_at(config: &ScenarioConfig, x: f64) -> Option<[PrimitiveState; 2]> {
        let scale = config.temperature_scale();
        let conv = |s: PrimitiveState| PrimitiveState { t: s.t * scale, ..s };
        match &config.initial {
            InitialCondition::Uniform { states } => Some(states.map(conv)),
            InitialCondition::Piecewise { split, left, right } => {
                Some(if x <= *split { left.map(conv) } else { right.map(conv) })
            }
            InitialCondition::Sinusoidal {
                amplitude,
                wavenumber,
                velocity,
                temperature,
            } => {
                let s = (wavenumber * x).sin();
                let n = 1.0 + amplitude * s;
                let t = match temperature {
                    SinusoidalTemperature::Reciprocal => 1.0 / n,
                    SinusoidalTemperature::Unit => 1.0,
                };
                let st = PrimitiveState {
                    n,
                    u: *velocity,
                    t: t * scale,
                };
                Some([st, st])
            }
            InitialCondition::CompactBump { .. } => None,
        }
    }

    fn average_mixture(
        config: &ScenarioConfig,
        species: &[SpeciesParams; 2],
        mesh: &SpatialMesh,
    ) -> Result<MixtureState> {
        if let InitialCondition::CompactBump {
            amplitude,
            mass_power,
            epsilon,
            radius,
            exponent,
            drift,
        } = &config.initial
        {
            let mut moments = [SpeciesMoments::vacuum(); 2];
            for i in 0..2 {
                let m = species[i].mass;
                let half = drift[i].iter().fold(0.0f64, |a, d| a.max(d.abs())) + radius / m;
                let grid = VelocityGrid::build(&species[i], [0.0; 3], m * half * half / 36.0, PROVISIONAL_NODES)?;
                let f = grid.map_nodes(|v| {
                    compact_bump(v, drift[i], m, (*amplitude, *mass_power, *epsilon, *radius, *exponent))
                });
                moments[i] = species_moments(&f, &grid, &species[i])?;
            }
            return mixture_state(&moments[0], &moments[1]);
        }
        let mut u = [0.0; 3];
        let mut t = 0.0;
        for s in 0..GRID_SAMPLES {
            let x = mesh.x_min + (s as f64 + 0.5) / GRID_SAMPLES as f64 * (mesh.x_max - mesh.x_min);
            let st = Self::primitive_at(config, x).expect("analytic initial data");
            let mix = mixture_state(
                &SpeciesMoments::new(&species[0], st[0].n, st[0].u, st[0].t),
                &SpeciesMoments::new(&species[1], st[1].n, st[1].u, st[1].t),
            )?;
            for p in 0..3 {
                u[p] += mix.u_mix[p];
            }
            t += mix.t_mix;
        }
        let k = GRID_SAMPLES as f64;
        Ok(MixtureState {
            u_mix: u.map(|c| c / k),
            t_mix: t / k,
        })
    }

    /// Initial distribution sampled at the cell centres.
    pub fn initial_fields(&self) -> Result<[Field; 2]> {
        let cells = self.mesh.cells;
        let mut out: [Field; 2] = std::array::from_fn(|i| Field::zeros(cells, self.grids[i].len()));
        for i in 0..2 {
            let (grid, sp) = (&self.grids[i], &self.species[i]);
            for k in 0..cells {
                let values = match &self.config.initial {
                    InitialCondition::CompactBump {
                        amplitude,
                        mass_power,
                        epsilon,
                        radius,
                        exponent,
                        drift,
                    } => grid.map_nodes(|v| {
                        compact_bump(
                            v,
                            drift[i],
                            sp.mass,
                            (*amplitude, *mass_power, *epsilon, *radius, *exponent),
                        )
                    }),
                    _ => {
                        let st =
                            Self::primitive_at(&self.config, self.mesh.center(k)).expect("analytic initial data")[i];
                        crate::moments::maxwellian(sp, st.n, st.u, st.t, grid)?
                    }
                };
                out[i].cell_mut(k).copy_from_slice(&values);
            }
        }
        Ok(out)
    }

    pub fn initial_state(&self) -> Result<SimState> {
        SimState::new(self.initial_fields()?)
    }

    /// Cells containing the configured slice positions.
    pub fn slice_cells(&self) -> Vec<usize> {
        let m = &self.mesh;
        let mut cells: Vec<usize> = self
            .config
            .output
            .slice_positions
            .iter()
            .map(|x| (((x - m.x_min) / m.dx).floor().max(0.0) as usize).min(m.cells - 1))
            .collect();
        cells.dedup();
        cells
    }

    pub fn stepper(&self) -> Result<Stepper> {
        let mut st = Stepper::new(
            self.species,
            self.grids.clone(),
            self.model,
            self.constants,
            self.mesh,
            SchemeConfig {
                scheme: self.config.scheme,
                flux_order: self.config.flux_order,
                dt: self.config.dt,
            },
        )?;
        st.guard = self.config.guard;
        Ok(st)
    }
}
