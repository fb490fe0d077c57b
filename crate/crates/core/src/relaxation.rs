//! Implicit collision update `ψᵢ = cᵢ Gᵢ + cᵢ Δt (νᵢᵢ Bᵢᵢ + νᵢⱼ Bᵢⱼ)`.

use rayon::prelude::*;

use crate::constants::PlasmaConstants;
use crate::dual::{self, InterBeta, IntraBeta, NewtonOptions, Problem};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::frequency::{cell_frequencies, CellState, FrequencyField, FrequencyModel};
use crate::grid::{SpeciesParams, VelocityGrid};
use crate::moments::{mixture_state, species_moments_unchecked, SpeciesMoments};

/// Shared, read-only inputs of a relaxation sweep.
#[derive(Debug, Clone, Copy)]
pub struct RelaxContext<'a> {
    pub species: &'a [SpeciesParams; 2],
    pub grids: &'a [VelocityGrid; 2],
    pub model: &'a FrequencyModel,
    pub constants: &'a PlasmaConstants,
    pub newton: &'a NewtonOptions,
}

/// Last multipliers of one cell, used to warm-start the next solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellMultipliers {
    pub intra: [Option<IntraBeta>; 2],
    pub inter: Option<InterBeta>,
}

/// Per-cell summary of one relaxation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub newton_iterations: usize,
    /// max over nodes and species of νᵢᵢ + νᵢⱼ.
    pub max_rate: f64,
    /// Largest scaled Newton residual among the three solves.
    pub max_residual: f64,
}

impl CellStats {
    fn merge(self, other: CellStats) -> CellStats {
        CellStats {
            newton_iterations: self.newton_iterations.max(other.newton_iterations),
            max_rate: self.max_rate.max(other.max_rate),
            max_residual: self.max_residual.max(other.max_residual),
        }
    }
}

/// Full output of one cell, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub psi: [Vec<f64>; 2],
    /// `targets[i][0] = Bᵢᵢ`, `targets[i][1] = Bᵢⱼ`.
    pub targets: [[Vec<f64>; 2]; 2],
    /// `frequencies[i][0] = νᵢᵢ`, `frequencies[i][1] = νᵢⱼ` on grid i.
    pub frequencies: [[Vec<f64>; 2]; 2],
    pub multipliers: CellMultipliers,
    pub stats: CellStats,
}

struct Work {
    targets: [[Vec<f64>; 2]; 2],
    frequencies: [[FrequencyField; 2]; 2],
    c: [Vec<f64>; 2],
    stats: CellStats,
    multipliers: CellMultipliers,
}

fn solve_cell(ctx: &RelaxContext<'_>, g: [&[f64]; 2], dt: f64, warm: &CellMultipliers) -> Result<Option<Work>> {
    let (species, grids) = (ctx.species, ctx.grids);
    let moments: [SpeciesMoments; 2] = [
        species_moments_unchecked(g[0], &grids[0], &species[0]),
        species_moments_unchecked(g[1], &grids[1], &species[1]),
    ];
    let Ok(mixture) = mixture_state(&moments[0], &moments[1]) else {
        return Ok(None);
    };
    if !(mixture.t_mix > 0.0) {
        return Ok(None);
    }
    let cell = CellState {
        species,
        moments: &moments,
        mixture,
        constants: ctx.constants,
    };
    let [[f11, f12], [f21, f22]] = cell_frequencies(ctx.model, &cell, grids)?;
    let frequencies = [[f11, f12], [f22, f21]];

    let mut stats = CellStats::default();
    let mut c: [Vec<f64>; 2] = Default::default();
    let mut w: [[Vec<f64>; 2]; 2] = Default::default();
    for i in 0..2 {
        let len = grids[i].len();
        let [self_nu, cross_nu] = &frequencies[i];
        let mut ci = Vec::with_capacity(len);
        let mut ws = Vec::with_capacity(len);
        let mut wc = Vec::with_capacity(len);
        let mut rate = 0.0f64;
        for q in 0..len {
            let (a, b) = (self_nu.at(q), cross_nu.at(q));
            rate = rate.max(a + b);
            let cq = 1.0 / (1.0 + dt * (a + b));
            ci.push(cq);
            ws.push(cq * a);
            wc.push(cq * b);
        }
        stats.max_rate = stats.max_rate.max(rate);
        c[i] = ci;
        w[i] = [ws, wc];
    }

    let mut multipliers = *warm;
    let mut targets: [[Vec<f64>; 2]; 2] = [
        [vec![0.0; grids[0].len()], vec![0.0; grids[0].len()]],
        [vec![0.0; grids[1].len()], vec![0.0; grids[1].len()]],
    ];
    for i in 0..2 {
        let problem = if i == 0 { Problem::Intra1 } else { Problem::Intra2 };
        let sol = dual::solve_intra(
            problem,
            &grids[i],
            &species[i],
            &w[i][0],
            g[i],
            moments[i].n,
            warm.intra[i],
            ctx.newton,
        )?;
        if let Some(sol) = sol {
            if !dual::family_values(&grids[i], &sol.beta, &mut targets[i][0]) {
                return Err(overflow(problem, sol.report.iterations));
            }
            stats.newton_iterations = stats.newton_iterations.max(sol.report.iterations);
            stats.max_residual = stats.max_residual.max(sol.report.residual);
            warn_non_decaying(problem, sol.beta[4]);
            multipliers.intra[i] = Some(sol.beta);
        }
    }
    let inter = dual::solve_inter(
        grids,
        species,
        [&w[0][1], &w[1][1]],
        g,
        [moments[0].n, moments[1].n],
        warm.inter,
        ctx.newton,
    )?;
    if let Some(report) = inter.report {
        stats.newton_iterations = stats.newton_iterations.max(report.iterations);
        stats.max_residual = stats.max_residual.max(report.residual);
        warn_non_decaying(Problem::Inter, inter.beta[5]);
        multipliers.inter = Some(inter.beta);
        for i in 0..2 {
            if inter.active[i] {
                let gamma = dual::inter_gamma(&inter.beta, species, i);
                if !dual::family_values(&grids[i], &gamma, &mut targets[i][1]) {
                    return Err(overflow(Problem::Inter, report.iterations));
                }
            }
        }
    }
    Ok(Some(Work {
        targets,
        frequencies,
        c,
        stats,
        multipliers,
    }))
}

/// Targets with a nonnegative quadratic multiplier do not decay in |v|.
fn warn_non_decaying(problem: Problem, quadratic: f64) {
    if quadratic >= 0.0 {
        log::warn!(
            "{} target has nonnegative quadratic multiplier {quadratic:e}",
            problem.label()
        );
    }
}

fn overflow(problem: Problem, iterations: usize) -> Error {
    Error::SolverFailure {
        cell: usize::MAX,
        problem: problem.label(),
        reason: "target overflows".into(),
        iterations,
        residual: f64::NAN,
    }
}

/// Relax one cell in place: on return `g` holds ψ. If `remainder` is given it
/// receives `Rᵢ(ψ) = νᵢᵢ (Bᵢᵢ − ψᵢ) + νᵢⱼ (Bᵢⱼ − ψᵢ)`.
pub fn relax_cell(
    ctx: &RelaxContext<'_>,
    g: [&mut [f64]; 2],
    dt: f64,
    multipliers: &mut CellMultipliers,
    remainder: Option<[&mut [f64]; 2]>,
) -> Result<CellStats> {
    let [g1, g2] = g;
    let Some(work) = solve_cell(ctx, [&*g1, &*g2], dt, multipliers)? else {
        if let Some(r) = remainder {
            for ri in r {
                ri.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        return Ok(CellStats::default());
    };
    let mut rem = remainder.map(|[a, b]| [a, b]);
    for (i, gi) in [g1, g2].into_iter().enumerate() {
        let [self_nu, cross_nu] = &work.frequencies[i];
        let [b_self, b_cross] = &work.targets[i];
        let ci = &work.c[i];
        let mut r = rem.as_mut().map(|r| &mut *r[i]);
        for q in 0..gi.len() {
            let (a, b) = (self_nu.at(q), cross_nu.at(q));
            let psi = ci[q] * (gi[q] + dt * (a * b_self[q] + b * b_cross[q]));
            if let Some(r) = r.as_deref_mut() {
                // = νᵢᵢ(Bᵢᵢ − ψ) + νᵢⱼ(Bᵢⱼ − ψ)
                r[q] = ci[q] * (a * (b_self[q] - gi[q]) + b * (b_cross[q] - gi[q]));
            }
            gi[q] = psi;
        }
    }
    *multipliers = work.multipliers;
    Ok(work.stats)
}

/// Relax one cell out of place and return every intermediate quantity.
pub fn relax_cell_detailed(
    ctx: &RelaxContext<'_>,
    g: [&[f64]; 2],
    dt: f64,
    warm: &CellMultipliers,
) -> Result<CellOutput> {
    let len = [g[0].len(), g[1].len()];
    match solve_cell(ctx, g, dt, warm)? {
        None => Ok(CellOutput {
            psi: [g[0].to_vec(), g[1].to_vec()],
            targets: [
                [vec![0.0; len[0]], vec![0.0; len[0]]],
                [vec![0.0; len[1]], vec![0.0; len[1]]],
            ],
            frequencies: [
                [vec![0.0; len[0]], vec![0.0; len[0]]],
                [vec![0.0; len[1]], vec![0.0; len[1]]],
            ],
            multipliers: *warm,
            stats: CellStats::default(),
        }),
        Some(work) => {
            let psi: [Vec<f64>; 2] = std::array::from_fn(|i| {
                let [a, b] = &work.frequencies[i];
                let [ba, bb] = &work.targets[i];
                (0..len[i])
                    .map(|q| work.c[i][q] * (g[i][q] + dt * (a.at(q) * ba[q] + b.at(q) * bb[q])))
                    .collect()
            });
            let frequencies = std::array::from_fn(|i| {
                [
                    work.frequencies[i][0].to_nodal(len[i]),
                    work.frequencies[i][1].to_nodal(len[i]),
                ]
            });
            Ok(CellOutput {
                psi,
                targets: work.targets,
                frequencies,
                multipliers: work.multipliers,
                stats: work.stats,
            })
        }
    }
}

/// Aggregate statistics of a relaxation sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelaxStats {
    pub max_newton_iterations: usize,
    pub max_rate: f64,
    pub max_residual: f64,
}

/// Relax every cell of both species in place with effective step `dt`.
pub fn implicit_relax(
    ctx: &RelaxContext<'_>,
    f: [&mut Field; 2],
    dt: f64,
    multipliers: &mut [CellMultipliers],
    remainder: Option<[&mut Field; 2]>,
) -> Result<RelaxStats> {
    let [f1, f2] = f;
    let (n1, n2) = (f1.nodes(), f2.nodes());
    if f1.cells() != f2.cells() || multipliers.len() != f1.cells() {
        return Err(Error::invalid("relaxation inputs have inconsistent cell counts"));
    }
    let cells = f1
        .as_mut_slice()
        .par_chunks_mut(n1)
        .zip(f2.as_mut_slice().par_chunks_mut(n2))
        .zip(multipliers.par_iter_mut())
        .enumerate();
    let stats: Result<CellStats> = match remainder {
        None => cells
            .map(|(k, ((a, b), m))| relax_cell(ctx, [a, b], dt, m, None).map_err(|e| e.in_cell(k)))
            .try_reduce(CellStats::default, |x, y| Ok(x.merge(y))),
        Some([r1, r2]) => {
            let rems = r1
                .as_mut_slice()
                .par_chunks_mut(n1)
                .zip(r2.as_mut_slice().par_chunks_mut(n2));
            cells
                .zip(rems)
                .map(|((k, ((a, b), m)), (ra, rb))| {
                    relax_cell(ctx, [a, b], dt, m, Some([ra, rb])).map_err(|e| e.in_cell(k))
                })
                .try_reduce(CellStats::default, |x, y| Ok(x.merge(y)))
        }
    };
    let s = stats?;
    Ok(RelaxStats {
        max_newton_iterations: s.newton_iterations,
        max_rate: s.max_rate,
        max_residual: s.max_residual,
    })
}

/// Backward-Euler relaxation of the first-order splitting scheme.
pub fn first_order_relax(
    ctx: &RelaxContext<'_>,
    f: [&mut Field; 2],
    dt: f64,
    multipliers: &mut [CellMultipliers],
) -> Result<RelaxStats> {
    implicit_relax(ctx, f, dt, multipliers, None)
}
