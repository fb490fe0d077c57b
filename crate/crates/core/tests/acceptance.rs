//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines are always visible. Pass a
//! substring to run only matching criteria. Criteria listed in `KNOWN_RED`
//! are expected to fail at the prescribed tolerance; the run aborts if any
//! other criterion fails or if a known-red criterion starts passing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::Instant;

use mixbgk::diagnostics::riemann::{EulerState, RiemannSolution};
use mixbgk::diagnostics::{conserved_totals, rel_diff, ConservedTotals};
use mixbgk::dual::physical::{
    assemble_inter_target, assemble_intra_target, inter_objective, intra_objective, maxwellian_multipliers,
    solve_inter_physical, solve_intra_physical,
};
use mixbgk::dual::NewtonOptions;
use mixbgk::moments::maxwellian;
use mixbgk::relaxation::relax_cell_detailed;
use mixbgk::run::{convergence_orders, convergence_study, Simulation};
use mixbgk::scenarios::{preset, InitialCondition, PrimitiveState, Scenario, ScenarioConfig, PRESETS};
use mixbgk::stepper::Scheme;
use mixbgk::transport::FluxOrder;
use mixbgk::{Result, SpeciesParams, VelocityGrid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_RED: &[&str] = &["mixture-invariance", "convergence-orders", "sod-fluid-limit"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn config(name: &str, edit: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut c = preset(name).expect("preset exists");
    edit(&mut c);
    c
}

fn simulation(c: ScenarioConfig) -> Result<Simulation> {
    Simulation::new(Scenario::build(c)?)
}

// ---------------------------------------------------------------------------
// Homogeneous toy runs
// ---------------------------------------------------------------------------

struct ToyRun {
    totals: Vec<ConservedTotals>,
    mixture: Vec<([f64; 3], f64)>,
    entropy: Vec<f64>,
    guard_triggers: usize,
    min_f: f64,
}

fn toy_run(scheme: Scheme) -> Result<ToyRun> {
    let mut sim = simulation(config("toy", |c| {
        c.velocity_nodes = 32;
        c.scheme = scheme;
    }))?;
    let record = |sim: &Simulation, run: &mut ToyRun| {
        let t = sim.totals();
        run.mixture.push(Simulation::global_mixture(&t, &sim.scenario));
        run.totals.push(t);
        run.entropy.push(sim.entropy.h);
        run.min_f = run
            .min_f
            .min(sim.state.f[0].min_value())
            .min(sim.state.f[1].min_value());
    };
    let mut run = ToyRun {
        totals: vec![],
        mixture: vec![],
        entropy: vec![],
        guard_triggers: 0,
        min_f: f64::INFINITY,
    };
    record(&sim, &mut run);
    for _ in 0..400 {
        let r = sim.step(0.01)?;
        run.guard_triggers += r.guard_triggers;
        record(&sim, &mut run);
    }
    Ok(run)
}

/// Splitting and ARS222 toy runs, computed on first use.
struct ToyCache(Option<(ToyRun, ToyRun)>);

impl ToyCache {
    fn get(&mut self) -> Result<&(ToyRun, ToyRun)> {
        if self.0.is_none() {
            self.0 = Some((toy_run(Scheme::Splitting1)?, toy_run(Scheme::Ars222)?));
        }
        Ok(self.0.as_ref().expect("just filled"))
    }
}

fn conservation(toy: &ToyRun) -> Verdict {
    let drift = toy
        .totals
        .iter()
        .map(|t| t.max_relative_drift(&toy.totals[0]))
        .fold(0.0, f64::max);
    Verdict {
        pass: drift <= 1e-10,
        detail: format!("toy 32³, 400 steps: max relative drift {drift:.3e} (tol 1e-10)"),
    }
}

fn three_figures(x: f64) -> f64 {
    let e = x.abs().log10().floor() - 2.0;
    (x / 10f64.powf(e)).round() * 10f64.powf(e)
}

fn mixture_invariance(toy: &ToyRun) -> Result<Verdict> {
    let (mut du, mut dt) = (0.0f64, 0.0f64);
    for w in toy.mixture.windows(2) {
        let (a, b) = (w[0], w[1]);
        let norm = |u: [f64; 3]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
        du = du.max(norm([b.0[0] - a.0[0], b.0[1] - a.0[1], b.0[2] - a.0[2]]) / norm(a.0));
        dt = dt.max((b.1 - a.1).abs() / a.1);
    }
    let full = Scenario::build(preset("toy")?)?;
    let f = full.initial_fields()?;
    let totals = conserved_totals([&f[0], &f[1]], &full.grids, &full.species, full.mesh.dx);
    let (u, t0) = Simulation::global_mixture(&totals, &full);
    let u0 = u[0];
    let reference = (0.0322, 0.0487);
    let matches = three_figures(u0) == reference.0 && three_figures(t0) == reference.1;
    Ok(Verdict {
        pass: du <= 1e-11 && dt <= 1e-11 && matches,
        detail: format!(
            "toy 32³ per-step drift u_mix {du:.2e}, T_mix {dt:.2e} (tol 1e-11); initial (u_mix, T_mix) on 48³ = ({u0:.5}, {t0:.5}) vs reference {reference:?} to 3 figures: {}",
            if matches { "match" } else { "mismatch" }
        ),
    })
}

fn entropy_decay(toy: &ToyRun) -> Result<Verdict> {
    let increases = toy.entropy.windows(2).filter(|w| !(w[1] < w[0])).count();
    let smallest = toy
        .entropy
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);

    // Joint equilibrium: both species Maxwellian at a common drift and temperature.
    let (u, t) = (0.03, 0.05);
    let mut sim = simulation(config("toy", |c| {
        c.velocity_nodes = 32;
        c.initial = InitialCondition::Uniform {
            states: [
                PrimitiveState {
                    n: 1.0,
                    u: [u, 0.0, 0.0],
                    t,
                },
                PrimitiveState {
                    n: 0.5,
                    u: [u, 0.0, 0.0],
                    t,
                },
            ],
        };
    }))?;
    let h0 = sim.entropy.h;
    let mut change = 0.0f64;
    for _ in 0..5 {
        sim.step(0.01)?;
        change = change.max((sim.entropy.h - h0).abs() / h0.abs().max(1.0));
    }
    Ok(Verdict {
        pass: increases == 0 && change <= 1e-12,
        detail: format!(
            "toy 32³: {increases} non-decreasing steps of 400 (smallest decrease {smallest:.3e}); joint equilibrium relative change {change:.2e} (tol 1e-12)"
        ),
    })
}

// ---------------------------------------------------------------------------
// Dual problems
// ---------------------------------------------------------------------------

fn species(m: f64) -> SpeciesParams {
    SpeciesParams::new(m, 1).expect("valid species")
}

fn dual_exactness() -> Result<Verdict> {
    let opts = NewtonOptions::default();
    let sp = [species(1.0), species(1.5)];
    let grids = [
        VelocityGrid::build(&sp[0], [0.05, 0.0, 0.0], 1.0, 16)?,
        VelocityGrid::build(&sp[1], [0.05, 0.0, 0.0], 1.0, 16)?,
    ];
    let (u, t, n) = ([0.1, -0.05, 0.08], 0.9, [0.7, 0.4]);
    let f = [
        maxwellian(&sp[0], n[0], u, t, &grids[0])?,
        maxwellian(&sp[1], n[1], u, t, &grids[1])?,
    ];
    let w = [vec![3.0; grids[0].len()], vec![2.0; grids[1].len()]];
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut worst = 0.0f64;
    for i in 0..2 {
        let (alpha, _) = solve_intra_physical(&w[i], &f[i], &grids[i], &sp[i], &opts)?;
        let exact = maxwellian_multipliers(&sp[i], n[i], u, t);
        for k in 0..5 {
            worst = worst.max(rel(alpha[k], exact[k]));
        }
    }
    let (alpha, _) = solve_inter_physical([&w[0], &w[1]], [&f[0], &f[1]], &grids, &sp, &opts)?;
    let (e1, e2) = (
        maxwellian_multipliers(&sp[0], n[0], u, t),
        maxwellian_multipliers(&sp[1], n[1], u, t),
    );
    let exact = [e1[0], e2[0], e1[1], e1[2], e1[3], e1[4]];
    for k in 0..6 {
        worst = worst.max(rel(alpha[k], exact[k]));
    }

    // Constraint residuals in every cell of every preset, initially and after two steps.
    let mut residual = 0.0f64;
    let mut checked = 0usize;
    for name in PRESETS {
        let mut sim = simulation(config(name, |c| c.velocity_nodes = 12))?;
        for round in 0..3 {
            let dt = sim.stepper.default_dt();
            let ctx = sim.stepper.context();
            let s = &sim.scenario;
            for k in 0..s.mesh.cells {
                let g = [sim.state.f[0].cell(k), sim.state.f[1].cell(k)];
                let out = relax_cell_detailed(&ctx, g, dt, &sim.state.multipliers[k])?;
                let w: [[Vec<f64>; 2]; 2] = std::array::from_fn(|i| {
                    let [a, b] = &out.frequencies[i];
                    let c = |q: usize| 1.0 / (1.0 + dt * (a[q] + b[q]));
                    [
                        (0..a.len()).map(|q| c(q) * a[q]).collect(),
                        (0..a.len()).map(|q| c(q) * b[q]).collect(),
                    ]
                });
                let gap = |x: &[f64], y: &[f64]| {
                    let d: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                    d.sqrt() / y.iter().map(|q| q * q).sum::<f64>().sqrt()
                };
                for i in 0..2 {
                    let mu = assemble_intra_target(g[i], &w[i][0], &s.grids[i], &s.species[i])?;
                    if mu[0] > 0.0 {
                        let got = assemble_intra_target(&out.targets[i][0], &w[i][0], &s.grids[i], &s.species[i])?;
                        residual = residual.max(gap(&got, &mu));
                    }
                }
                let mu = assemble_inter_target(g, [&w[0][1], &w[1][1]], &s.grids, &s.species)?;
                let got = assemble_inter_target(
                    [&out.targets[0][1], &out.targets[1][1]],
                    [&w[0][1], &w[1][1]],
                    &s.grids,
                    &s.species,
                )?;
                residual = residual.max(gap(&got, &mu));
                checked += 1;
            }
            if round < 2 {
                sim.step(dt)?;
            }
        }
    }
    Ok(Verdict {
        pass: worst <= 1e-10 && residual < 1e-12,
        detail: format!(
            "exponential-family recovery max relative error {worst:.2e} (tol 1e-10); max constraint residual {residual:.2e} over {checked} cell solves in {} presets (tol 1e-12)",
            PRESETS.len()
        ),
    })
}

fn grid_extent(grid: &VelocityGrid) -> (f64, f64) {
    let v = (0..3)
        .map(|p| grid.axis_min(p).abs().max(grid.axis_max(p).abs()))
        .fold(0.0, f64::max);
    (v, 3.0 * v * v)
}

/// Worst scaled relative error of central-difference gradient and Hessian.
fn fd_error(
    eval: impl Fn(&DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>),
    x: &DVector<f64>,
    h: &DVector<f64>,
) -> f64 {
    let (_, g, hess) = eval(x);
    let d = x.len();
    let mut g_fd = DVector::zeros(d);
    let mut h_fd = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h[k];
        xm[k] -= h[k];
        let (vp, gp, _) = eval(&xp);
        let (vm, gm, _) = eval(&xm);
        g_fd[k] = (vp - vm) / (2.0 * h[k]);
        h_fd.set_column(k, &((gp - gm) / (2.0 * h[k])));
    }
    let scale_g = |v: &DVector<f64>| v.component_mul(h);
    let scale_h = |m: &DMatrix<f64>| DMatrix::from_fn(d, d, |i, j| m[(i, j)] * h[i] * h[j]);
    let eg = (scale_g(&g_fd) - scale_g(&g)).norm() / scale_g(&g).norm();
    let eh = (scale_h(&h_fd) - scale_h(&hess)).norm() / scale_h(&hess).norm();
    eg.max(eh)
}

fn derivative_checks() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let sp = [species(rng.gen_range(0.5..3.0)), species(rng.gen_range(0.5..3.0))];
        let center = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0];
        let tg = rng.gen_range(0.5..2.0);
        let grids = [
            VelocityGrid::build(&sp[0], center, tg, 5)?,
            VelocityGrid::build(&sp[1], center, tg, 5)?,
        ];
        let w: [Vec<f64>; 2] = std::array::from_fn(|i| (0..grids[i].len()).map(|_| rng.gen_range(0.5..2.0)).collect());
        let u = [
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
            rng.gen_range(-0.2..0.2),
        ];
        let t = tg * rng.gen_range(0.7..1.4);
        let n = [rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0)];
        let alpha: [[f64; 5]; 2] = std::array::from_fn(|i| {
            let mut a = maxwellian_multipliers(&sp[i], n[i], u, t);
            for v in a.iter_mut() {
                *v *= rng.gen_range(0.9..1.1);
            }
            a
        });
        let other: [Vec<f64>; 2] = std::array::from_fn(|i| {
            grids[i].map_nodes(|v| (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) / (2.0 * tg / sp[i].mass)).exp())
        });
        for i in 0..2 {
            let mu = assemble_intra_target(&other[i], &w[i], &grids[i], &sp[i])?;
            let (vmax, v2max) = grid_extent(&grids[i]);
            let m = sp[i].mass;
            let h = DVector::from_row_slice(&[
                1e-4 / m,
                1e-4 / (m * vmax),
                1e-4 / (m * vmax),
                1e-4 / (m * vmax),
                1e-4 / (m * v2max),
            ]);
            let eval = |x: &DVector<f64>| {
                let a = [x[0], x[1], x[2], x[3], x[4]];
                let e = intra_objective(&a, &w[i], &grids[i], &sp[i], &mu).expect("finite objective");
                (e.value, e.gradient, e.hessian)
            };
            worst = worst.max(fd_error(eval, &DVector::from_row_slice(&alpha[i]), &h));
        }
        let mu = assemble_inter_target([&other[0], &other[1]], [&w[0], &w[1]], &grids, &sp)?;
        let x0 = [
            alpha[0][0],
            alpha[1][0],
            alpha[0][1],
            alpha[0][2],
            alpha[0][3],
            alpha[0][4],
        ];
        let (v0, q0) = grid_extent(&grids[0]);
        let (v1, q1) = grid_extent(&grids[1]);
        let (mv, mq) = (
            (sp[0].mass * v0).max(sp[1].mass * v1),
            (sp[0].mass * q0).max(sp[1].mass * q1),
        );
        let h = DVector::from_row_slice(&[
            1e-4 / sp[0].mass,
            1e-4 / sp[1].mass,
            1e-4 / mv,
            1e-4 / mv,
            1e-4 / mv,
            1e-4 / mq,
        ]);
        let eval = |x: &DVector<f64>| {
            let a = [x[0], x[1], x[2], x[3], x[4], x[5]];
            let e = inter_objective(&a, [&w[0], &w[1]], &grids, &sp, &mu).expect("finite objective");
            (e.value, e.gradient, e.hessian)
        };
        worst = worst.max(fd_error(eval, &DVector::from_row_slice(&x0), &h));
    }
    Ok(Verdict {
        pass: worst <= 1e-5,
        detail: format!("100 random states on 5³ grids, intra and inter: max relative error {worst:.2e} (tol 1e-5)"),
    })
}

// ---------------------------------------------------------------------------
// Positivity
// ---------------------------------------------------------------------------

fn positivity(toy_ars: &ToyRun) -> Result<Verdict> {
    let mut min_f = f64::INFINITY;
    let (mut clipped, mut triggers, mut steps) = (0.0f64, 0usize, 0usize);
    for name in PRESETS {
        for order in [FluxOrder::First, FluxOrder::Second] {
            let mut sim = simulation(config(name, |c| {
                c.velocity_nodes = 12;
                c.scheme = Scheme::Splitting1;
                c.flux_order = order;
                c.dt = None;
            }))?;
            let t_end = sim.scenario.config.t_end;
            for _ in 0..10 {
                if sim.finished(t_end) {
                    break;
                }
                let dt = sim.next_dt(t_end);
                sim.step(dt)?;
                steps += 1;
                min_f = min_f.min(sim.state.f[0].min_value()).min(sim.state.f[1].min_value());
            }
            let totals = sim.totals();
            let count: f64 = (0..2).map(|i| totals.mass[i] / sim.scenario.species[i].mass).sum();
            clipped = clipped.max(sim.state.clipped_mass / count);
            triggers += sim.state.guard_triggers;
        }
    }
    let pass = min_f >= 0.0 && clipped <= 1e-14 && triggers == 0 && toy_ars.guard_triggers == 0 && toy_ars.min_f >= 0.0;
    Ok(Verdict {
        pass,
        detail: format!(
            "first-order splitting at CFL, flux orders 1 and 2, {} presets ({steps} steps): min f {min_f:.3e}, rounding-level negatives clipped {clipped:.1e} of particle count (tol 1e-14), guard triggers {triggers}; ARS222 toy 32³ 400 steps: guard triggers {}, min f {:.3e}",
            PRESETS.len(),
            toy_ars.guard_triggers,
            toy_ars.min_f
        ),
    })
}

// ---------------------------------------------------------------------------
// Space-time convergence
// ---------------------------------------------------------------------------

fn convergence() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = vec![];
    for name in ["appendix_c1", "appendix_c1e4"] {
        for (scheme, order, bound) in [
            (Scheme::Splitting1, FluxOrder::First, 0.9),
            (Scheme::Ars222, FluxOrder::Second, 1.8),
        ] {
            let c = config(name, |c| {
                c.velocity_nodes = 24;
                c.scheme = scheme;
                c.flux_order = order;
            });
            let results = convergence_study(&c, 4)?;
            let orders = convergence_orders(&results);
            let finest = orders[0]
                .last()
                .copied()
                .unwrap_or(f64::NAN)
                .min(orders[1].last().copied().unwrap_or(f64::NAN));
            pass &= finest >= bound;
            let all: Vec<String> = orders[0].iter().map(|o| format!("{o:.3}")).collect();
            parts.push(format!(
                "{name} {scheme:?}: orders [{}] finest {finest:.3} (≥ {bound})",
                all.join(", ")
            ));
        }
    }
    Ok(Verdict {
        pass,
        detail: format!("levels 0..3, 24³: {}", parts.join("; ")),
    })
}

// ---------------------------------------------------------------------------
// Shock-tube runs
// ---------------------------------------------------------------------------

fn run_to_end(sim: &mut Simulation) -> Result<()> {
    let t_end = sim.scenario.config.t_end;
    sim.run_to(t_end, |_, _| Ok(()))
}

fn sod() -> Result<Verdict> {
    let c = config("sod", |c| {
        c.mesh.cells = 200;
        c.velocity_nodes = 32;
    });
    let InitialCondition::Piecewise { split, left, right } = c.initial.clone() else {
        unreachable!("sod preset is piecewise")
    };
    let mut sim = simulation(c)?;
    run_to_end(&mut sim)?;
    let t = sim.state.time;
    let identical = sim.state.f[0]
        .as_slice()
        .iter()
        .zip(sim.state.f[1].as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let xs = sim.scenario.mesh.centers();
    let moments = sim.cell_moments();
    let mut worst = [0.0f64; 3];
    for i in 0..2 {
        let m = sim.scenario.species[i].mass;
        let state = |s: &PrimitiveState| EulerState {
            rho: m * s.n,
            u: s.u[0],
            p: s.n * s.t,
        };
        let exact = RiemannSolution::solve(state(&left[i]), state(&right[i]), 5.0 / 3.0)?;
        let profile = exact.profile(&xs, split, t);
        let jumps = exact.discontinuities(split, t);
        let (mut num, mut den) = ([0.0; 3], [0.0; 3]);
        for (k, x) in xs.iter().enumerate() {
            if jumps.iter().any(|j| (x - j).abs() < 0.025) {
                continue;
            }
            let e = [profile[k].rho / m, profile[k].u, profile[k].p * m / profile[k].rho];
            let q = [moments[k][i].n, moments[k][i].u[0], moments[k][i].t];
            for c in 0..3 {
                num[c] += (q[c] - e[c]).abs();
                den[c] += e[c].abs();
            }
        }
        for c in 0..3 {
            worst[c] = worst[c].max(num[c] / den[c]);
        }
    }
    Ok(Verdict {
        pass: worst.iter().all(|w| *w <= 0.05) && identical,
        detail: format!(
            "200 cells, 32³, t = {t}: L1-relative error n {:.2e}, u {:.2e}, T {:.2e} (tol 5e-2, excluding ±0.025 around contact and shock); species bitwise identical: {identical}",
            worst[0], worst[1], worst[2]
        ),
    })
}

fn mach_comparison() -> Result<Verdict> {
    let run = |tag: &str| -> Result<Simulation> {
        let mut sim = simulation(config("mach1_7", |c| {
            c.mesh.cells = 100;
            c.velocity_nodes = 32;
            c.frequency = c.frequency.with_tag(tag).expect("known tag");
        }))?;
        run_to_end(&mut sim)?;
        Ok(sim)
    };
    let (a, b) = (run("coulomb")?, run("coulomb_vhat")?);
    let (ma, mb) = (a.cell_moments(), b.cell_moments());
    let mut worst = [0.0f64; 3];
    for (x, y) in ma.iter().zip(&mb) {
        for i in 0..2 {
            worst[0] = worst[0].max(rel_diff(x[i].n, y[i].n).abs());
            worst[1] = worst[1].max(rel_diff(x[i].u[0], y[i].u[0]).abs());
            worst[2] = worst[2].max(rel_diff(x[i].t, y[i].t).abs());
        }
    }
    Ok(Verdict {
        pass: worst.iter().all(|w| *w < 0.05),
        detail: format!(
            "100 cells, 32³, t = {:e} s: max |r| n {:.2e}, u¹ {:.2e}, T {:.2e} (tol 5e-2)",
            a.state.time, worst[0], worst[1], worst[2]
        ),
    })
}

// ---------------------------------------------------------------------------
// Hydrogen-carbon relaxation
// ---------------------------------------------------------------------------

fn log_linear_r2(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (t, y): (Vec<f64>, Vec<f64>) = samples.iter().map(|&(t, d)| (t, d.ln())).unzip();
    let (tm, ym) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = t.iter().zip(&y).map(|(a, b)| (b - ym - slope * (a - tm)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

fn hc_relaxation() -> Result<Verdict> {
    let setup = |tag: &str| {
        simulation(config("hc", |c| {
            c.velocity_nodes = 32;
            c.frequency = c.frequency.with_tag(tag).expect("known tag");
        }))
    };
    let gap = |sim: &Simulation| {
        let m = sim.cell_moments();
        (m[0][0].t - m[0][1].t).abs()
    };
    let mut constant = setup("coulomb_vhat")?;
    let d0 = gap(&constant);
    let mut samples = vec![(0.0, d0)];
    while samples.last().expect("nonempty").1 > 1e-3 * d0 {
        let dt = constant.stepper.default_dt();
        constant.step(dt)?;
        samples.push((constant.state.time, gap(&constant)));
    }
    let window = 0.5 * constant.state.time;
    let early: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 <= window).collect();
    let r2_const = log_linear_r2(&early);

    let mut dependent = setup("coulomb")?;
    let mut dep = vec![(0.0, gap(&dependent))];
    while dependent.state.time < window * (1.0 - 1e-9) {
        let dt = dependent.stepper.default_dt().min(window - dependent.state.time);
        dependent.step(dt)?;
        dep.push((dependent.state.time, gap(&dependent)));
    }
    let r2_dep = log_linear_r2(&dep);
    Ok(Verdict {
        pass: r2_const > 0.99 && r2_dep < 0.99,
        detail: format!(
            "32³, window [0, {window:.3e}] s (half the time for |T₁−T₂| to fall by 10³ under ν̂): exponential-fit R² constant {r2_const:.5} (> 0.99), velocity-dependent {r2_dep:.5} (< 0.99)"
        ),
    })
}

// ---------------------------------------------------------------------------

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: &str| filters.is_empty() || filters.iter().any(|f| id.contains(f.as_str()));

    type Check = (&'static str, Box<dyn FnOnce(&mut ToyCache) -> Result<Verdict>>);
    let checks: Vec<Check> = vec![
        ("conservation", Box::new(|toy| Ok(conservation(&toy.get()?.0)))),
        ("mixture-invariance", Box::new(|toy| mixture_invariance(&toy.get()?.0))),
        ("entropy", Box::new(|toy| entropy_decay(&toy.get()?.0))),
        ("dual-exactness", Box::new(|_| dual_exactness())),
        ("derivative-checks", Box::new(|_| derivative_checks())),
        ("positivity", Box::new(|toy| positivity(&toy.get()?.1))),
        ("convergence-orders", Box::new(|_| convergence())),
        ("sod-fluid-limit", Box::new(|_| sod())),
        ("frequency-comparison", Box::new(|_| mach_comparison())),
        ("hc-relaxation", Box::new(|_| hc_relaxation())),
    ];

    let mut toy = ToyCache(None);
    let mut unexpected = vec![];
    for (id, check) in checks {
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let verdict = check(&mut toy).unwrap_or_else(|e| Verdict {
            pass: false,
            detail: format!("error: {e}"),
        });
        let known = KNOWN_RED.contains(&id);
        let tag = match (verdict.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} {id}: {} [{:.1}s]", verdict.detail, start.elapsed().as_secs_f64());
        if verdict.pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected verdicts: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
