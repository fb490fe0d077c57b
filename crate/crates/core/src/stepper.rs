//! Time integration: first-order splitting and the ARS(2,2,2) IMEX scheme.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PlasmaConstants;
use crate::dual::NewtonOptions;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::frequency::FrequencyModel;
use crate::grid::{SpeciesParams, VelocityGrid};
use crate::relaxation::{implicit_relax, CellMultipliers, RelaxContext, RelaxStats};
use crate::transport::{cfl_dt, transport_axpy, FluxOrder, SpatialMesh};

/// γ = 1 − √2/2.
pub const ARS_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
/// δ = 1 − 1/(2γ).
pub const ARS_DELTA: f64 = 1.0 - 1.0 / (2.0 * ARS_GAMMA);

/// Nodes below −threshold · (cell maximum) count as a positivity violation;
/// smaller negatives are clipped.
pub const NEGATIVITY_THRESHOLD: f64 = 1e-13;
/// The guard gives up once Δt falls below this fraction of the CFL step.
pub const DT_FLOOR_FRACTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Splitting1,
    Ars222,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub flux_order: FluxOrder,
    /// Fixed step; the CFL step is used when absent.
    pub dt: Option<f64>,
}

impl SchemeConfig {
    pub fn gamma(&self) -> f64 {
        ARS_GAMMA
    }

    pub fn delta(&self) -> f64 {
        ARS_DELTA
    }
}

/// Evolving solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub step: usize,
    pub f: [Field; 2],
    pub multipliers: Vec<CellMultipliers>,
    /// Number of steps redone by the positivity guard.
    pub guard_triggers: usize,
    /// Accumulated Σ ω |clipped value| (Δv)³ Δx of both species.
    pub clipped_mass: f64,
}

impl SimState {
    pub fn new(f: [Field; 2]) -> Result<Self> {
        if f[0].cells() != f[1].cells() {
            return Err(Error::invalid("species fields have different cell counts"));
        }
        let cells = f[0].cells();
        Ok(SimState {
            time: 0.0,
            step: 0,
            f,
            multipliers: vec![CellMultipliers::default(); cells],
            guard_triggers: 0,
            clipped_mass: 0.0,
        })
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub dt: f64,
    pub guard_triggers: usize,
    pub max_newton_iterations: usize,
    pub max_rate: f64,
    pub max_residual: f64,
}

/// Largest step allowed by the global IMEX positivity bound.
pub fn guard_dt(max_rate: f64) -> f64 {
    if max_rate > 0.0 {
        1.0 / ((1.0 - 2.0 * ARS_GAMMA) * max_rate)
    } else {
        f64::INFINITY
    }
}

/// Step to retry with after a violation at `dt`: the guard bound if it is
/// smaller, otherwise half of `dt`.
pub fn retry_dt(dt: f64, max_rate: f64, floor: f64, time: f64) -> Result<f64> {
    let bound = guard_dt(max_rate);
    let next = if bound < dt { bound } else { 0.5 * dt };
    if next < floor {
        return Err(Error::TimeStepUnderflow { time, dt: next, floor });
    }
    Ok(next)
}

/// How the step is shrunk after a positivity violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    /// Global bound 1 / ((1 − 2γ) max(νᵢᵢ + νᵢⱼ)).
    #[default]
    Global,
    /// Nodewise bound from the stage-1 data of the rejected attempt.
    Local,
}

/// Stage form of the local bound at one node:
/// Δt ≤ f / ((1 − 2γ)(νᵢᵢ + νᵢⱼ) f − (1 − γ)(νᵢᵢ Aᵢᵢ + νᵢⱼ Aᵢⱼ)),
/// unrestricted when the denominator is not positive.
pub fn local_stage_bound(f: f64, nu_sum: f64, nu_target: f64) -> f64 {
    let d = (1.0 - 2.0 * ARS_GAMMA) * nu_sum * f - (1.0 - ARS_GAMMA) * nu_target;
    if d > 0.0 {
        f / d
    } else {
        f64::INFINITY
    }
}

/// Remainder form of the local bound: the largest Δt with
/// E + (1 − γ) Δt 𝓡(f⁽¹⁾) ≥ 0 at every node, where E is the explicit part
/// of the second stage (the step-start state for homogeneous problems).
/// Nodes with E ≤ 0 give no bound.
pub fn local_guard_dt(explicit: &Field, remainder: &Field) -> f64 {
    explicit
        .as_slice()
        .par_iter()
        .zip(remainder.as_slice().par_iter())
        .map(|(&e, &r)| {
            if r < 0.0 && e > 0.0 {
                e / (-(1.0 - ARS_GAMMA) * r)
            } else {
                f64::INFINITY
            }
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Retry step under the local policy: the local bound if smaller, otherwise half.
pub fn retry_local_dt(dt: f64, bound: f64, floor: f64, time: f64) -> Result<f64> {
    let next = if bound < dt { bound } else { 0.5 * dt };
    if next < floor {
        return Err(Error::TimeStepUnderflow { time, dt: next, floor });
    }
    Ok(next)
}

enum Attempt {
    Accepted(RelaxStats),
    /// Largest stage-1 rate and the local bound (infinite when unavailable).
    Violated(f64, f64),
}

/// Full problem description plus reusable scratch storage.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub species: [SpeciesParams; 2],
    pub grids: [VelocityGrid; 2],
    pub model: FrequencyModel,
    pub constants: PlasmaConstants,
    pub newton: NewtonOptions,
    pub mesh: SpatialMesh,
    pub config: SchemeConfig,
    pub guard: GuardPolicy,
    scratch: Vec<[Field; 2]>,
}

impl Stepper {
    pub fn new(
        species: [SpeciesParams; 2],
        grids: [VelocityGrid; 2],
        model: FrequencyModel,
        constants: PlasmaConstants,
        mesh: SpatialMesh,
        config: SchemeConfig,
    ) -> Result<Self> {
        if let Some(dt) = config.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("time step must be positive, got {dt}")));
            }
        }
        Ok(Stepper {
            species,
            grids,
            model,
            constants,
            newton: NewtonOptions::default(),
            mesh,
            config,
            guard: GuardPolicy::Global,
            scratch: Vec::new(),
        })
    }

    pub fn context(&self) -> RelaxContext<'_> {
        RelaxContext {
            species: &self.species,
            grids: &self.grids,
            model: &self.model,
            constants: &self.constants,
            newton: &self.newton,
        }
    }

    pub fn cfl_dt(&self) -> f64 {
        cfl_dt(&self.mesh, &self.grids, self.config.flux_order)
    }

    /// Configured step, or the CFL step.
    pub fn default_dt(&self) -> f64 {
        self.config.dt.unwrap_or_else(|| self.cfl_dt())
    }

    fn check_state(&self, state: &SimState) -> Result<()> {
        for i in 0..2 {
            if state.f[i].cells() != self.mesh.cells || state.f[i].nodes() != self.grids[i].len() {
                return Err(Error::invalid(format!(
                    "species {} field is {}×{}, expected {}×{}",
                    i + 1,
                    state.f[i].cells(),
                    state.f[i].nodes(),
                    self.mesh.cells,
                    self.grids[i].len()
                )));
            }
        }
        if state.multipliers.len() != self.mesh.cells {
            return Err(Error::invalid("multiplier cache does not match the mesh"));
        }
        Ok(())
    }

    fn ensure_scratch(&mut self, count: usize) {
        let shape = [
            (self.mesh.cells, self.grids[0].len()),
            (self.mesh.cells, self.grids[1].len()),
        ];
        let fits = |b: &[Field; 2]| (0..2).all(|i| b[i].cells() == shape[i].0 && b[i].nodes() == shape[i].1);
        self.scratch.retain(|b| fits(b));
        while self.scratch.len() < count {
            self.scratch.push([
                Field::zeros(shape[0].0, shape[0].1),
                Field::zeros(shape[1].0, shape[1].1),
            ]);
        }
    }

    /// Advance by `dt`, shrinking it if positivity is lost. Returns the step actually taken.
    pub fn step(&mut self, state: &mut SimState, dt: f64) -> Result<StepReport> {
        self.check_state(state)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let floor = DT_FLOOR_FRACTION * self.cfl_dt().min(dt);
        let mut dt = dt;
        let mut triggers = 0;
        loop {
            let attempt = match self.config.scheme {
                Scheme::Splitting1 => self.attempt_splitting(state, dt)?,
                Scheme::Ars222 => self.attempt_ars(state, dt)?,
            };
            match attempt {
                Attempt::Accepted(stats) => {
                    let clipped = self.commit(state);
                    state.clipped_mass += clipped;
                    if clipped > 0.0 {
                        log::debug!(
                            "step {}: clipped {clipped:e} of rounding-level negative mass",
                            state.step
                        );
                    }
                    state.time += dt;
                    state.step += 1;
                    state.guard_triggers += triggers;
                    return Ok(StepReport {
                        dt,
                        guard_triggers: triggers,
                        max_newton_iterations: stats.max_newton_iterations,
                        max_rate: stats.max_rate,
                        max_residual: stats.max_residual,
                    });
                }
                Attempt::Violated(rate, local) => {
                    triggers += 1;
                    let next = match self.guard {
                        GuardPolicy::Global => retry_dt(dt, rate, floor, state.time)?,
                        GuardPolicy::Local => retry_local_dt(dt, local, floor, state.time)?,
                    };
                    log::info!("positivity guard at t = {:e}: dt {dt:e} -> {next:e}", state.time);
                    dt = next;
                }
            }
        }
    }

    /// Move the candidate in scratch[0] into the state, clipping tiny negatives.
    fn commit(&mut self, state: &mut SimState) -> f64 {
        let mut clipped = 0.0;
        for i in 0..2 {
            let grid = &self.grids[i];
            let cand = &mut self.scratch[0][i];
            let nodes = cand.nodes();
            clipped += cand
                .as_mut_slice()
                .par_chunks_mut(nodes)
                .map(|cell| {
                    let mut s = 0.0;
                    for (q, v) in cell.iter_mut().enumerate() {
                        if *v < 0.0 {
                            s -= grid.weight(q) * *v;
                            *v = 0.0;
                        }
                    }
                    s
                })
                .sum::<f64>()
                * grid.cell_volume()
                * self.mesh.dx;
            std::mem::swap(&mut state.f[i], cand);
        }
        clipped
    }

    fn violates(f: &Field) -> bool {
        let nodes = f.nodes();
        f.as_slice().par_chunks(nodes).any(|cell| {
            let top = cell.iter().copied().fold(0.0f64, f64::max);
            cell.iter().any(|v| !v.is_finite() || *v < -NEGATIVITY_THRESHOLD * top)
        })
    }

    /// Relax then transport; candidate written to scratch[0].
    fn attempt_splitting(&mut self, state: &mut SimState, dt: f64) -> Result<Attempt> {
        self.ensure_scratch(2);
        let mut relaxed = std::mem::take(&mut self.scratch[1]);
        let mut out = std::mem::take(&mut self.scratch[0]);
        let mut mult = state.multipliers.clone();
        let result = (|| {
            for i in 0..2 {
                relaxed[i].as_mut_slice().copy_from_slice(state.f[i].as_slice());
            }
            let [r1, r2] = &mut relaxed;
            let stats = implicit_relax(&self.context(), [r1, r2], dt, &mut mult, None)?;
            for i in 0..2 {
                out[i].as_mut_slice().copy_from_slice(relaxed[i].as_slice());
                transport_axpy(
                    &relaxed[i],
                    &self.mesh,
                    &self.grids[i],
                    self.config.flux_order,
                    -dt,
                    &mut out[i],
                )?;
            }
            if Self::violates(&out[0]) || Self::violates(&out[1]) {
                return Ok(Attempt::Violated(stats.max_rate, f64::INFINITY));
            }
            Ok(Attempt::Accepted(stats))
        })();
        self.scratch[0] = out;
        self.scratch[1] = relaxed;
        if let Ok(Attempt::Accepted(_)) = result {
            state.multipliers = mult;
        }
        result
    }

    /// ARS(2,2,2) step; candidate written to scratch[0].
    ///
    /// scratch[0]: A = f − δΔt 𝒯(f), later G⁽²⁾ and f⁽²⁾;
    /// scratch[1]: G⁽¹⁾, later f⁽¹⁾; scratch[2]: 𝓡(f⁽¹⁾).
    fn attempt_ars(&mut self, state: &mut SimState, dt: f64) -> Result<Attempt> {
        self.ensure_scratch(3);
        let (gamma, delta) = (ARS_GAMMA, ARS_DELTA);
        let mut a = std::mem::take(&mut self.scratch[0]);
        let mut g1 = std::mem::take(&mut self.scratch[1]);
        let mut rem = std::mem::take(&mut self.scratch[2]);
        let mut mult = state.multipliers.clone();
        let result = (|| {
            for i in 0..2 {
                g1[i].as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
                transport_axpy(
                    &state.f[i],
                    &self.mesh,
                    &self.grids[i],
                    self.config.flux_order,
                    1.0,
                    &mut g1[i],
                )?;
                a[i].as_mut_slice()
                    .par_iter_mut()
                    .zip(g1[i].as_mut_slice().par_iter_mut())
                    .zip(state.f[i].as_slice().par_iter())
                    .for_each(|((av, gv), &fv)| {
                        let t = *gv;
                        *av = fv - delta * dt * t;
                        *gv = fv - gamma * dt * t;
                    });
            }
            let stage1_negative = Self::violates(&g1[0]) || Self::violates(&g1[1]);
            let s1 = {
                let [x1, x2] = &mut g1;
                let [r1, r2] = &mut rem;
                implicit_relax(&self.context(), [x1, x2], gamma * dt, &mut mult, Some([r1, r2]))
            };
            let s1 = match s1 {
                Ok(s) => s,
                Err(Error::SolverFailure { .. }) if stage1_negative => {
                    return Ok(Attempt::Violated(0.0, f64::INFINITY));
                }
                Err(e) => return Err(e),
            };
            let mut local = f64::INFINITY;
            for i in 0..2 {
                transport_axpy(
                    &g1[i],
                    &self.mesh,
                    &self.grids[i],
                    self.config.flux_order,
                    -(1.0 - delta) * dt,
                    &mut a[i],
                )?;
                if self.guard == GuardPolicy::Local {
                    local = local.min(local_guard_dt(&a[i], &rem[i]));
                }
                let c = (1.0 - gamma) * dt;
                a[i].as_mut_slice()
                    .par_iter_mut()
                    .zip(rem[i].as_slice().par_iter())
                    .for_each(|(av, &r)| *av += c * r);
            }
            let stage2_negative = Self::violates(&a[0]) || Self::violates(&a[1]);
            let s2 = {
                let [x1, x2] = &mut a;
                implicit_relax(&self.context(), [x1, x2], gamma * dt, &mut mult, None)
            };
            let s2 = match s2 {
                Ok(s) => s,
                Err(Error::SolverFailure { .. }) if stage2_negative => {
                    return Ok(Attempt::Violated(s1.max_rate, local));
                }
                Err(e) => return Err(e),
            };
            if Self::violates(&a[0]) || Self::violates(&a[1]) {
                return Ok(Attempt::Violated(s1.max_rate, local));
            }
            Ok(Attempt::Accepted(RelaxStats {
                max_newton_iterations: s1.max_newton_iterations.max(s2.max_newton_iterations),
                max_rate: s1.max_rate.max(s2.max_rate),
                max_residual: s1.max_residual.max(s2.max_residual),
            }))
        })();
        self.scratch[0] = a;
        self.scratch[1] = g1;
        self.scratch[2] = rem;
        if let Ok(Attempt::Accepted(_)) = result {
            state.multipliers = mult;
        }
        result
    }
}
