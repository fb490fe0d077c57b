//! Exponential-family dual problems and their Newton solver.
//!
//! The implicit update needs, per cell, the three target functions
//! `B = exp(α · a(v))` whose weighted moments equal prescribed vectors μ.
//! Each is the minimizer of the convex objective
//!
//! ```text
//! ψ(α) = Σ_q ω_q w_q exp(α · a_q) (Δv)³ − μ · α
//! ```
//!
//! whose gradient vanishes exactly when the weighted moments of `B` equal μ.
//!
//! Internally every problem is posed in reduced velocity coordinates
//! `ξ = (v − c) / v_th` of each species grid, where the features are
//! `φ(ξ) = (1, ξ¹, ξ², ξ³, |ξ|²)`. A problem is a set of [`Block`]s, one per
//! grid involved; block `b` contributes `exp((A_bᵀ x) · φ)` with a fixed
//! `dim × 5` map `A_b`. The physical-coordinate objectives are the same
//! construction with a different map.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{SpeciesParams, VelocityGrid};

/// Largest exponent admitted in a target evaluation.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Which problem a solve belongs to; used in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    Intra1,
    Intra2,
    Inter,
}

impl Problem {
    pub fn label(&self) -> &'static str {
        match self {
            Problem::Intra1 => "intra species 1",
            Problem::Intra2 => "intra species 2",
            Problem::Inter => "inter species",
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature kernels
// ---------------------------------------------------------------------------

/// Per-axis factors `exp(γ₀/3 + γ_p ξ + γ₄ ξ²)`; `None` when the largest
/// exponent on the grid would exceed [`EXPONENT_LIMIT`].
fn axis_exponentials(xi: &[f64], gamma: &[f64; 5]) -> Option<[Vec<f64>; 3]> {
    if gamma.iter().any(|g| !g.is_finite()) {
        return None;
    }
    let third = gamma[0] / 3.0;
    let mut max_exponent = 0.0;
    let mut axes: [Vec<f64>; 3] = Default::default();
    for (p, axis) in axes.iter_mut().enumerate() {
        let exps: Vec<f64> = xi.iter().map(|x| third + gamma[p + 1] * x + gamma[4] * x * x).collect();
        max_exponent += exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        *axis = exps.into_iter().map(f64::exp).collect();
    }
    if max_exponent > EXPONENT_LIMIT {
        return None;
    }
    Some(axes)
}

/// `exp(γ · φ(ξ_q))` at every node of `grid`. Returns false on overflow.
pub fn family_values(grid: &VelocityGrid, gamma: &[f64; 5], out: &mut [f64]) -> bool {
    let Some(e) = axis_exponentials(grid.xi(), gamma) else {
        return false;
    };
    let n = grid.nodes_per_axis();
    for i in 0..n {
        for j in 0..n {
            let eij = e[0][i] * e[1][j];
            let row = &mut out[(i * n + j) * n..(i * n + j + 1) * n];
            for (r, ek) in row.iter_mut().zip(&e[2]) {
                *r = eij * ek;
            }
        }
    }
    true
}

/// `S = Σ ω w e^{γ·φ} φ φᵀ (Δv)³` (symmetric 5×5).
fn family_sums(grid: &VelocityGrid, w: &[f64], gamma: &[f64; 5]) -> Option<[[f64; 5]; 5]> {
    let e = axis_exponentials(grid.xi(), gamma)?;
    let n = grid.nodes_per_axis();
    let xi = grid.xi();
    let om = grid.axis_weights();
    let ek: Vec<f64> = e[2].iter().zip(om).map(|(a, b)| a * b).collect();
    let x2: Vec<f64> = xi.iter().map(|x| x * x).collect();
    let mut s = [0.0f64; 15];
    for i in 0..n {
        let ci = om[i] * e[0][i];
        if ci == 0.0 {
            continue;
        }
        for j in 0..n {
            let cij = ci * om[j] * e[1][j];
            if cij == 0.0 {
                continue;
            }
            let row = &w[(i * n + j) * n..(i * n + j + 1) * n];
            let (mut t0, mut t1, mut t2, mut t3, mut t4) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..n {
                let b = row[k] * ek[k];
                let bx = b * xi[k];
                let bx2 = b * x2[k];
                t0 += b;
                t1 += bx;
                t2 += bx2;
                t3 += bx2 * xi[k];
                t4 += bx2 * x2[k];
            }
            accumulate_line(&mut s, cij, xi[i], xi[j], [t0, t1, t2, t3, t4]);
        }
    }
    Some(unpack(&s, grid.cell_volume()))
}

/// Fold the line sums `t_r = Σ_k b_k ξ_k^r` of line (i, j) into the 15 unique entries.
#[inline]
fn accumulate_line(s: &mut [f64; 15], c: f64, xi: f64, xj: f64, t: [f64; 5]) {
    let [t0, t1, t2, t3, t4] = t.map(|v| v * c);
    let r = xi * xi + xj * xj;
    let e0 = r * t0 + t2; // Σ b |ξ|²
    s[0] += t0;
    s[1] += xi * t0;
    s[2] += xj * t0;
    s[3] += t1;
    s[4] += e0;
    s[5] += xi * xi * t0;
    s[6] += xi * xj * t0;
    s[7] += xi * t1;
    s[8] += xi * e0;
    s[9] += xj * xj * t0;
    s[10] += xj * t1;
    s[11] += xj * e0;
    s[12] += t2;
    s[13] += r * t1 + t3;
    s[14] += r * r * t0 + 2.0 * r * t2 + t4;
}

fn unpack(s: &[f64; 15], vol: f64) -> [[f64; 5]; 5] {
    const IDX: [[usize; 5]; 5] = [
        [0, 1, 2, 3, 4],
        [1, 5, 6, 7, 8],
        [2, 6, 9, 10, 11],
        [3, 7, 10, 12, 13],
        [4, 8, 11, 13, 14],
    ];
    let mut out = [[0.0; 5]; 5];
    for a in 0..5 {
        for b in 0..5 {
            out[a][b] = s[IDX[a][b]] * vol;
        }
    }
    out
}

/// Weighted feature moments of nodal data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureMoments {
    /// Σ ω w g φ (Δv)³.
    pub sums: [f64; 5],
    /// Σ ω w g |φ| (Δv)³, the scale of each component.
    pub magnitudes: [f64; 5],
}

/// Σ ω w g (φ, |φ|) (Δv)³ in reduced coordinates.
pub fn feature_moments(grid: &VelocityGrid, w: &[f64], g: &[f64]) -> FeatureMoments {
    let n = grid.nodes_per_axis();
    let xi = grid.xi();
    let om = grid.axis_weights();
    let mut s = [0.0f64; 8];
    for i in 0..n {
        for j in 0..n {
            let c = om[i] * om[j];
            let base = (i * n + j) * n;
            let (mut t0, mut t1, mut a1, mut t2) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..n {
                let b = om[k] * w[base + k] * g[base + k];
                t0 += b;
                t1 += b * xi[k];
                a1 += b * xi[k].abs();
                t2 += b * xi[k] * xi[k];
            }
            let (t0, t1, a1, t2) = (c * t0, c * t1, c * a1, c * t2);
            let r = xi[i] * xi[i] + xi[j] * xi[j];
            s[0] += t0;
            s[1] += xi[i] * t0;
            s[2] += xi[j] * t0;
            s[3] += t1;
            s[4] += r * t0 + t2;
            s[5] += xi[i].abs() * t0;
            s[6] += xi[j].abs() * t0;
            s[7] += a1;
        }
    }
    let v = grid.cell_volume();
    FeatureMoments {
        sums: [s[0] * v, s[1] * v, s[2] * v, s[3] * v, s[4] * v],
        magnitudes: [s[0] * v, s[5] * v, s[6] * v, s[7] * v, s[4] * v],
    }
}

// ---------------------------------------------------------------------------
// Generic objective
// ---------------------------------------------------------------------------

/// One grid's contribution to a dual objective.
#[derive(Debug, Clone)]
pub struct Block<'a> {
    pub grid: &'a VelocityGrid,
    /// Nodal weights w = c ν (without quadrature weights).
    pub weights: &'a [f64],
    /// `dim × 5` map: exponent on this grid is `(mapᵀ x) · φ(ξ)`.
    pub map: DMatrix<f64>,
}

impl Block<'_> {
    fn gamma(&self, x: &DVector<f64>) -> [f64; 5] {
        let g = self.map.tr_mul(x);
        [g[0], g[1], g[2], g[3], g[4]]
    }
}

/// Value, gradient and Hessian of ψ at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct DualObjective<'a> {
    pub blocks: Vec<Block<'a>>,
    pub mu: DVector<f64>,
}

impl DualObjective<'_> {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// ψ, ∇ψ, ∇²ψ at `x`, or `None` if a target would overflow.
    pub fn evaluate(&self, x: &DVector<f64>) -> Option<Evaluation> {
        let d = self.dim();
        let mut value = -self.mu.dot(x);
        let mut gradient = -self.mu.clone();
        let mut hessian = DMatrix::zeros(d, d);
        for block in &self.blocks {
            let s = family_sums(block.grid, block.weights, &block.gamma(x))?;
            let s = DMatrix::from_fn(5, 5, |a, b| s[a][b]);
            value += s[(0, 0)];
            gradient += &block.map * s.column(0);
            hessian += &block.map * &s * block.map.transpose();
        }
        if !value.is_finite() {
            return None;
        }
        Some(Evaluation {
            value,
            gradient,
            hessian,
        })
    }

    /// Component scale for the Newton residual: Σ |map| · magnitudes.
    pub fn residual_scale(&self, magnitudes: &[[f64; 5]]) -> DVector<f64> {
        let mut d = DVector::zeros(self.dim());
        for (block, m) in self.blocks.iter().zip(magnitudes) {
            let abs = block.map.abs();
            d += abs * DVector::from_row_slice(m);
        }
        let top = d.amax();
        d.map(|v| v.max(1e-12 * top).max(f64::MIN_POSITIVE))
    }
}

// ---------------------------------------------------------------------------
// Newton solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub max_backtracks: usize,
    /// A solve whose scaled residual is below this bound when progress stops
    /// is accepted; rounding limits the attainable residual.
    pub stagnation_tolerance: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 200,
            tolerance: 1e-14,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
            stagnation_tolerance: 1e-11,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    AbsoluteResidual,
    RelativeResidual,
    StepSize,
    Stagnation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Final ‖D⁻¹ ∇ψ‖.
    pub residual: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonFailure {
    pub reason: String,
    pub iterations: usize,
    pub residual: f64,
}

fn scaled_norm(g: &DVector<f64>, scale: &DVector<f64>) -> f64 {
    g.iter()
        .zip(scale.iter())
        .map(|(a, d)| (a / d) * (a / d))
        .sum::<f64>()
        .sqrt()
}

/// Solve `H d = -g` through a Jacobi-scaled Cholesky factorization, with a
/// small diagonal shift if the matrix is numerically indefinite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let diag: Vec<f64> = (0..n).map(|k| h[(k, k)]).collect();
    if diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let j = DVector::from_iterator(n, diag.iter().map(|v| 1.0 / v.sqrt()));
    let scaled = DMatrix::from_fn(n, n, |a, b| h[(a, b)] * j[a] * j[b]);
    let rhs = DVector::from_fn(n, |a, _| -g[a] * j[a]);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut m = scaled.clone();
        for k in 0..n {
            m[(k, k)] += shift;
        }
        if let Some(ch) = Cholesky::new(m) {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&j));
            }
        }
        shift = if shift == 0.0 { 1e-14 } else { shift * 100.0 };
    }
    None
}

/// Newton's method with backtracking on the merit ½‖D⁻¹∇ψ‖².
pub fn newton_solve(
    objective: &DualObjective<'_>,
    x0: DVector<f64>,
    scale: &DVector<f64>,
    options: &NewtonOptions,
) -> std::result::Result<(DVector<f64>, NewtonReport), NewtonFailure> {
    let mut x = x0;
    let mut eval = objective.evaluate(&x).ok_or_else(|| NewtonFailure {
        reason: "initial guess overflows".into(),
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let mut res = scaled_norm(&eval.gradient, scale);
    let res0 = res;
    let done = |termination, iterations, residual| NewtonReport {
        iterations,
        residual,
        termination,
    };
    for it in 0..options.max_iterations {
        if res < options.tolerance {
            return Ok((x, done(Termination::AbsoluteResidual, it, res)));
        }
        if it > 0 && res < options.tolerance * res0 {
            return Ok((x, done(Termination::RelativeResidual, it, res)));
        }
        let Some(dir) = newton_direction(&eval.hessian, &eval.gradient) else {
            if res < options.stagnation_tolerance {
                return Ok((x, done(Termination::Stagnation, it, res)));
            }
            return Err(NewtonFailure {
                reason: "singular Hessian".into(),
                iterations: it,
                residual: res,
            });
        };
        let merit0 = 0.5 * res * res;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_backtracks {
            let trial = &x + &dir * t;
            if let Some(e) = objective.evaluate(&trial) {
                let r = scaled_norm(&e.gradient, scale);
                if 0.5 * r * r <= (1.0 - 2.0 * options.armijo * t) * merit0 {
                    accepted = Some((trial, e, r));
                    break;
                }
            }
            t *= options.shrink;
        }
        let Some((trial, e, r)) = accepted else {
            if res < options.stagnation_tolerance {
                return Ok((x, done(Termination::Stagnation, it, res)));
            }
            return Err(NewtonFailure {
                reason: "line search failed".into(),
                iterations: it,
                residual: res,
            });
        };
        let step = (&dir * t).norm();
        let xnorm = trial.norm();
        x = trial;
        eval = e;
        res = r;
        if step < options.tolerance * xnorm {
            return Ok((x, done(Termination::StepSize, it + 1, res)));
        }
    }
    if res < options.stagnation_tolerance {
        return Ok((x, done(Termination::Stagnation, options.max_iterations, res)));
    }
    Err(NewtonFailure {
        reason: "iteration limit reached".into(),
        iterations: options.max_iterations,
        residual: res,
    })
}

// ---------------------------------------------------------------------------
// Reduced-coordinate problems used by the relaxation step
// ---------------------------------------------------------------------------

/// Multipliers of an intra-species target in reduced coordinates:
/// `B = exp(β₀ + β₁·ξ + β₂|ξ|²)`.
pub type IntraBeta = [f64; 5];

/// Multipliers of the inter-species targets in reduced coordinates:
/// `(β₀₁₂, β₀₂₁, β₁ (3), β₂)`; species `i` uses `(β₀ᵢ, rᵢ β₁, β₂)` with
/// `rᵢ = sqrt(mᵢ / m₁)`.
pub type InterBeta = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntraSolution {
    pub beta: IntraBeta,
    pub report: NewtonReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterSolution {
    pub beta: InterBeta,
    /// Which species carry a nonzero inter-species target.
    pub active: [bool; 2],
    pub report: Option<NewtonReport>,
}

/// Reduced exponent of the Maxwellian with offset `du` (physical, from the grid
/// center) and temperature `t` for species mass `m` and density `n`.
fn maxwellian_gamma(grid: &VelocityGrid, m: f64, n: f64, du: [f64; 3], t: f64) -> [f64; 5] {
    let tg = grid.temperature();
    let s = grid.thermal_speed();
    let du2: f64 = du.iter().map(|x| x * x).sum();
    [
        (n * (m / (2.0 * PI * t)).powf(1.5)).ln() - m * du2 / (2.0 * t),
        m * s * du[0] / t,
        m * s * du[1] / t,
        m * s * du[2] / t,
        -tg / (2.0 * t),
    ]
}

/// Shared drift and temperature of weighted feature moments over several species.
fn weighted_state(parts: &[(&VelocityGrid, f64, &FeatureMoments)]) -> Option<([f64; 3], f64)> {
    let mass: f64 = parts.iter().map(|(_, m, fm)| m * fm.sums[0]).sum();
    let count: f64 = parts.iter().map(|(_, _, fm)| fm.sums[0]).sum();
    if !(mass > 0.0) || !(count > 0.0) {
        return None;
    }
    let du: [f64; 3] = std::array::from_fn(|p| {
        parts
            .iter()
            .map(|(g, m, fm)| m * g.thermal_speed() * fm.sums[p + 1])
            .sum::<f64>()
            / mass
    });
    let du2: f64 = du.iter().map(|x| x * x).sum();
    let energy: f64 = parts.iter().map(|(g, _, fm)| g.temperature() * fm.sums[4]).sum();
    let t = (energy - mass * du2) / (3.0 * count);
    if !(t > 0.0) || !t.is_finite() {
        return None;
    }
    Some((du, t))
}

fn failure(problem: Problem, f: NewtonFailure) -> Error {
    Error::SolverFailure {
        cell: usize::MAX,
        problem: problem.label(),
        reason: f.reason,
        iterations: f.iterations,
        residual: f.residual,
    }
}

/// Solve an intra-species problem; `None` when the weighted mass moment vanishes.
pub fn solve_intra(
    problem: Problem,
    grid: &VelocityGrid,
    species: &SpeciesParams,
    w: &[f64],
    g: &[f64],
    number_density: f64,
    warm: Option<IntraBeta>,
    options: &NewtonOptions,
) -> Result<Option<IntraSolution>> {
    let fm = feature_moments(grid, w, g);
    if !(fm.sums[0] > 0.0) {
        return Ok(None);
    }
    let objective = DualObjective {
        blocks: vec![Block {
            grid,
            weights: w,
            map: DMatrix::identity(5, 5),
        }],
        mu: DVector::from_row_slice(&fm.sums),
    };
    let scale = objective.residual_scale(&[fm.magnitudes]);
    let x0 = match warm {
        Some(b) if b.iter().all(|v| v.is_finite()) => b,
        _ => {
            let (du, t) = weighted_state(&[(grid, species.mass, &fm)]).unwrap_or(([0.0; 3], grid.temperature()));
            maxwellian_gamma(grid, species.mass, number_density.max(f64::MIN_POSITIVE), du, t)
        }
    };
    let x0 = DVector::from_row_slice(&x0);
    let start = if objective.evaluate(&x0).is_some() {
        x0
    } else {
        let (du, t) = weighted_state(&[(grid, species.mass, &fm)]).unwrap_or(([0.0; 3], grid.temperature()));
        DVector::from_row_slice(&maxwellian_gamma(
            grid,
            species.mass,
            number_density.max(f64::MIN_POSITIVE),
            du,
            t,
        ))
    };
    let (x, report) = newton_solve(&objective, start, &scale, options).map_err(|f| failure(problem, f))?;
    Ok(Some(IntraSolution {
        beta: [x[0], x[1], x[2], x[3], x[4]],
        report,
    }))
}

/// Ratio `sqrt(mᵢ / m₁)` scaling the shared linear multiplier on grid `i`.
pub fn inter_ratio(species: &[SpeciesParams; 2], i: usize) -> f64 {
    (species[i].mass / species[0].mass).sqrt()
}

/// Reduced exponent of species `i` from inter-species multipliers.
pub fn inter_gamma(beta: &InterBeta, species: &[SpeciesParams; 2], i: usize) -> [f64; 5] {
    let r = inter_ratio(species, i);
    [beta[i], r * beta[2], r * beta[3], r * beta[4], beta[5]]
}

/// Solve the inter-species problem. Species with a vanishing weighted mass
/// moment are dropped from the problem and receive a zero target.
#[allow(clippy::too_many_arguments)]
pub fn solve_inter(
    grids: &[VelocityGrid; 2],
    species: &[SpeciesParams; 2],
    w: [&[f64]; 2],
    g: [&[f64]; 2],
    number_density: [f64; 2],
    warm: Option<InterBeta>,
    options: &NewtonOptions,
) -> Result<InterSolution> {
    let fm = [
        feature_moments(&grids[0], w[0], g[0]),
        feature_moments(&grids[1], w[1], g[1]),
    ];
    let active = [fm[0].sums[0] > 0.0, fm[1].sums[0] > 0.0];
    let ids: Vec<usize> = (0..2).filter(|&i| active[i]).collect();
    if ids.is_empty() {
        return Ok(InterSolution {
            beta: warm.unwrap_or([0.0; 6]),
            active,
            report: None,
        });
    }
    // Reduced unknowns: one mass row per active species, then β₁ (3), β₂.
    let dim = ids.len() + 4;
    let mut blocks = Vec::with_capacity(ids.len());
    let mut mu = DVector::zeros(dim);
    let mut mags = Vec::with_capacity(ids.len());
    for (slot, &i) in ids.iter().enumerate() {
        let r = inter_ratio(species, i);
        let mut map = DMatrix::zeros(dim, 5);
        map[(slot, 0)] = 1.0;
        for p in 0..3 {
            map[(ids.len() + p, p + 1)] = r;
        }
        map[(dim - 1, 4)] = 1.0;
        mu += &map * DVector::from_row_slice(&fm[i].sums);
        mags.push(fm[i].magnitudes);
        blocks.push(Block {
            grid: &grids[i],
            weights: w[i],
            map,
        });
    }
    let objective = DualObjective { blocks, mu };
    let scale = objective.residual_scale(&mags);

    let pack = |beta: &InterBeta| {
        let mut x = DVector::zeros(dim);
        for (slot, &i) in ids.iter().enumerate() {
            x[slot] = beta[i];
        }
        for p in 0..4 {
            x[ids.len() + p] = beta[2 + p];
        }
        x
    };
    let cold = || -> InterBeta {
        let parts: Vec<(&VelocityGrid, f64, &FeatureMoments)> =
            ids.iter().map(|&i| (&grids[i], species[i].mass, &fm[i])).collect();
        let (du, t) = weighted_state(&parts).unwrap_or(([0.0; 3], grids[0].temperature()));
        let mut beta = [0.0; 6];
        for &i in &ids {
            let gamma = maxwellian_gamma(
                &grids[i],
                species[i].mass,
                number_density[i].max(f64::MIN_POSITIVE),
                du,
                t,
            );
            beta[i] = gamma[0];
            let r = inter_ratio(species, i);
            for p in 0..3 {
                beta[2 + p] = gamma[p + 1] / r;
            }
            beta[5] = gamma[4];
        }
        beta
    };
    let mut x0 = match warm {
        Some(b) if b.iter().all(|v| v.is_finite()) => pack(&b),
        _ => pack(&cold()),
    };
    if objective.evaluate(&x0).is_none() {
        x0 = pack(&cold());
    }
    let (x, report) = newton_solve(&objective, x0, &scale, options).map_err(|f| failure(Problem::Inter, f))?;
    let mut beta = [0.0; 6];
    for (slot, &i) in ids.iter().enumerate() {
        beta[i] = x[slot];
    }
    for p in 0..4 {
        beta[2 + p] = x[ids.len() + p];
    }
    // Identical species: enforce the exact symmetry of the optimum.
    if ids.len() == 2 && species[0] == species[1] && grids[0] == grids[1] && w[0] == w[1] && g[0] == g[1] {
        let b0 = 0.5 * (beta[0] + beta[1]);
        beta[0] = b0;
        beta[1] = b0;
    }
    Ok(InterSolution {
        beta,
        active,
        report: Some(report),
    })
}

// ---------------------------------------------------------------------------
// Physical-coordinate interface
// ---------------------------------------------------------------------------

/// Maps between physical multipliers α (features `a(v) = m (1, v, |v|²)`) and
/// reduced multipliers β on a given grid.
pub mod physical {
    use super::*;

    /// `m L` with `a(v) = m L φ(ξ)`; rows (1, v¹, v², v³, |v|²).
    fn feature_map(grid: &VelocityGrid, mass: f64) -> DMatrix<f64> {
        let c = grid.center();
        let s = grid.thermal_speed();
        let c2: f64 = c.iter().map(|x| x * x).sum();
        let mut l = DMatrix::zeros(5, 5);
        l[(0, 0)] = 1.0;
        for p in 0..3 {
            l[(p + 1, 0)] = c[p];
            l[(p + 1, p + 1)] = s;
            l[(4, p + 1)] = 2.0 * s * c[p];
        }
        l[(4, 0)] = c2;
        l[(4, 4)] = s * s;
        l * mass
    }

    /// `dim × 5` map for the inter problem: rows (mass₁₂, mass₂₁, v¹, v², v³, |v|²).
    fn inter_feature_map(grid: &VelocityGrid, mass: f64, i: usize) -> DMatrix<f64> {
        let l = feature_map(grid, mass);
        let mut out = DMatrix::zeros(6, 5);
        for b in 0..5 {
            out[(i, b)] = l[(0, b)];
            for r in 1..5 {
                out[(r + 1, b)] = l[(r, b)];
            }
        }
        out
    }

    fn quad_weights(grid: &VelocityGrid, w: &[f64]) -> Result<()> {
        if w.len() != grid.len() {
            return Err(Error::invalid(format!(
                "expected {} nodal weights, got {}",
                grid.len(),
                w.len()
            )));
        }
        Ok(())
    }

    /// μᵢ = Σ ω w G aᵢ (Δv)³.
    pub fn assemble_intra_target(
        g: &[f64],
        w: &[f64],
        grid: &VelocityGrid,
        species: &SpeciesParams,
    ) -> Result<[f64; 5]> {
        quad_weights(grid, w)?;
        quad_weights(grid, g)?;
        let fm = feature_moments(grid, w, g);
        let mu = feature_map(grid, species.mass) * DVector::from_row_slice(&fm.sums);
        Ok([mu[0], mu[1], mu[2], mu[3], mu[4]])
    }

    /// μ = Σ ω (w₁₂ G₁ a₁₂ + w₂₁ G₂ a₂₁) (Δv)³.
    pub fn assemble_inter_target(
        g: [&[f64]; 2],
        w: [&[f64]; 2],
        grids: &[VelocityGrid; 2],
        species: &[SpeciesParams; 2],
    ) -> Result<[f64; 6]> {
        let mut mu = DVector::zeros(6);
        for i in 0..2 {
            quad_weights(&grids[i], w[i])?;
            quad_weights(&grids[i], g[i])?;
            let fm = feature_moments(&grids[i], w[i], g[i]);
            mu += inter_feature_map(&grids[i], species[i].mass, i) * DVector::from_row_slice(&fm.sums);
        }
        Ok(std::array::from_fn(|k| mu[k]))
    }

    fn intra_objective_of<'a>(
        w: &'a [f64],
        grid: &'a VelocityGrid,
        species: &SpeciesParams,
        mu: &[f64; 5],
    ) -> DualObjective<'a> {
        DualObjective {
            blocks: vec![Block {
                grid,
                weights: w,
                map: feature_map(grid, species.mass),
            }],
            mu: DVector::from_row_slice(mu),
        }
    }

    fn inter_objective_of<'a>(
        w: [&'a [f64]; 2],
        grids: &'a [VelocityGrid; 2],
        species: &[SpeciesParams; 2],
        mu: &[f64; 6],
    ) -> DualObjective<'a> {
        DualObjective {
            blocks: (0..2)
                .map(|i| Block {
                    grid: &grids[i],
                    weights: w[i],
                    map: inter_feature_map(&grids[i], species[i].mass, i),
                })
                .collect(),
            mu: DVector::from_row_slice(mu),
        }
    }

    /// ψ(α), ∇ψ, ∇²ψ of the intra-species objective.
    pub fn intra_objective(
        alpha: &[f64; 5],
        w: &[f64],
        grid: &VelocityGrid,
        species: &SpeciesParams,
        mu: &[f64; 5],
    ) -> Result<Evaluation> {
        quad_weights(grid, w)?;
        intra_objective_of(w, grid, species, mu)
            .evaluate(&DVector::from_row_slice(alpha))
            .ok_or_else(|| Error::invalid("target overflows for these multipliers"))
    }

    /// ψ(α), ∇ψ, ∇²ψ of the inter-species objective.
    pub fn inter_objective(
        alpha: &[f64; 6],
        w: [&[f64]; 2],
        grids: &[VelocityGrid; 2],
        species: &[SpeciesParams; 2],
        mu: &[f64; 6],
    ) -> Result<Evaluation> {
        for i in 0..2 {
            quad_weights(&grids[i], w[i])?;
        }
        inter_objective_of(w, grids, species, mu)
            .evaluate(&DVector::from_row_slice(alpha))
            .ok_or_else(|| Error::invalid("target overflows for these multipliers"))
    }

    /// Reduced β from physical α on `grid`.
    pub fn intra_to_reduced(alpha: &[f64; 5], grid: &VelocityGrid, species: &SpeciesParams) -> [f64; 5] {
        let b = feature_map(grid, species.mass).tr_mul(&DVector::from_row_slice(alpha));
        [b[0], b[1], b[2], b[3], b[4]]
    }

    /// Physical α from reduced β on `grid`.
    pub fn intra_from_reduced(beta: &[f64; 5], grid: &VelocityGrid, species: &SpeciesParams) -> [f64; 5] {
        let m = species.mass;
        let c = grid.center();
        let s = grid.thermal_speed();
        let a2 = beta[4] / (m * s * s);
        let a1: [f64; 3] = std::array::from_fn(|p| beta[p + 1] / (m * s) - 2.0 * a2 * c[p]);
        let c2: f64 = c.iter().map(|x| x * x).sum();
        let a0 = beta[0] / m - (a1[0] * c[0] + a1[1] * c[1] + a1[2] * c[2]) - a2 * c2;
        [a0, a1[0], a1[1], a1[2], a2]
    }

    /// Physical α = (α₀₁₂, α₀₂₁, α₁ (3), α₂) from reduced inter β.
    pub fn inter_from_reduced(beta: &InterBeta, grids: &[VelocityGrid; 2], species: &[SpeciesParams; 2]) -> [f64; 6] {
        let a = [
            intra_from_reduced(&inter_gamma(beta, species, 0), &grids[0], &species[0]),
            intra_from_reduced(&inter_gamma(beta, species, 1), &grids[1], &species[1]),
        ];
        [a[0][0], a[1][0], a[0][1], a[0][2], a[0][3], a[0][4]]
    }

    /// Analytic multipliers of a Maxwellian: α₂ = −1/(2T), α₁ = u/T,
    /// α₀ = [log(n (m/2πT)^{3/2}) − m|u|²/(2T)] / m.
    pub fn maxwellian_multipliers(species: &SpeciesParams, n: f64, u: [f64; 3], t: f64) -> [f64; 5] {
        let m = species.mass;
        let u2: f64 = u.iter().map(|x| x * x).sum();
        [
            ((n * (m / (2.0 * PI * t)).powf(1.5)).ln() - m * u2 / (2.0 * t)) / m,
            u[0] / t,
            u[1] / t,
            u[2] / t,
            -1.0 / (2.0 * t),
        ]
    }

    /// B = exp(α · a(v)) at every node.
    pub fn eval_target(alpha: &[f64; 5], grid: &VelocityGrid, species: &SpeciesParams) -> Result<Vec<f64>> {
        let beta = intra_to_reduced(alpha, grid, species);
        let mut out = vec![0.0; grid.len()];
        if !family_values(grid, &beta, &mut out) {
            return Err(Error::invalid("target overflows for these multipliers"));
        }
        Ok(out)
    }

    /// Minimize the intra objective for data (w, G); returns physical α.
    pub fn solve_intra_physical(
        w: &[f64],
        g: &[f64],
        grid: &VelocityGrid,
        species: &SpeciesParams,
        options: &NewtonOptions,
    ) -> Result<([f64; 5], NewtonReport)> {
        quad_weights(grid, w)?;
        quad_weights(grid, g)?;
        let n = crate::moments::species_moments(g, grid, species)?.n;
        let sol = solve_intra(Problem::Intra1, grid, species, w, g, n, None, options)?
            .ok_or_else(|| Error::invalid("weighted mass moment vanishes"))?;
        Ok((intra_from_reduced(&sol.beta, grid, species), sol.report))
    }

    /// Minimize the inter objective; returns physical α.
    pub fn solve_inter_physical(
        w: [&[f64]; 2],
        g: [&[f64]; 2],
        grids: &[VelocityGrid; 2],
        species: &[SpeciesParams; 2],
        options: &NewtonOptions,
    ) -> Result<([f64; 6], InterSolution)> {
        let n = [
            crate::moments::species_moments(g[0], &grids[0], &species[0])?.n,
            crate::moments::species_moments(g[1], &grids[1], &species[1])?.n,
        ];
        let sol = solve_inter(grids, species, w, g, n, None, options)?;
        Ok((inter_from_reduced(&sol.beta, grids, species), sol))
    }

    /// ‖Σ ω w B a (Δv)³ − μ‖ / ‖μ‖ for an intra solution.
    pub fn intra_constraint_residual(
        alpha: &[f64; 5],
        w: &[f64],
        grid: &VelocityGrid,
        species: &SpeciesParams,
        mu: &[f64; 5],
    ) -> Result<f64> {
        let e = intra_objective(alpha, w, grid, species, mu)?;
        Ok(e.gradient.norm() / DVector::from_row_slice(mu).norm())
    }

    /// Same as [`intra_constraint_residual`] for the inter problem.
    pub fn inter_constraint_residual(
        alpha: &[f64; 6],
        w: [&[f64]; 2],
        grids: &[VelocityGrid; 2],
        species: &[SpeciesParams; 2],
        mu: &[f64; 6],
    ) -> Result<f64> {
        let e = inter_objective(alpha, w, grids, species, mu)?;
        Ok(e.gradient.norm() / DVector::from_row_slice(mu).norm())
    }
}
