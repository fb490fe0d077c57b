//! Finite-volume advection along x with upwind or minmod-limited fluxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::VelocityGrid;

/// Safety factor applied to the CFL bound.
pub const CFL_SAFETY: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Zero,
    Copy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxOrder {
    First,
    Second,
}

impl FluxOrder {
    pub fn from_number(order: u32) -> Result<Self> {
        match order {
            1 => Ok(FluxOrder::First),
            2 => Ok(FluxOrder::Second),
            o => Err(Error::Config(format!("flux order must be 1 or 2, got {o}"))),
        }
    }

    pub fn number(self) -> u32 {
        match self {
            FluxOrder::First => 1,
            FluxOrder::Second => 2,
        }
    }

    /// CFL coefficient α.
    pub fn cfl_alpha(self) -> f64 {
        match self {
            FluxOrder::First => 1.0,
            FluxOrder::Second => 2.0 / 3.0,
        }
    }
}

/// Uniform 1D mesh of `cells` cells on [x_min, x_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialMesh {
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub dx: f64,
    pub boundary: Boundary,
}

impl SpatialMesh {
    pub fn new(x_min: f64, x_max: f64, cells: usize, boundary: Boundary) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Config(format!("invalid domain [{x_min}, {x_max}]")));
        }
        if cells == 0 {
            return Err(Error::Config("mesh needs at least one cell".into()));
        }
        Ok(SpatialMesh {
            x_min,
            x_max,
            cells,
            dx: (x_max - x_min) / cells as f64,
            boundary,
        })
    }

    pub fn center(&self, k: usize) -> f64 {
        self.x_min + (k as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|k| self.center(k)).collect()
    }

    /// Source cell of (possibly ghost) index `k`, or `None` for a zero ghost.
    fn resolve(&self, k: isize) -> Option<usize> {
        let n = self.cells as isize;
        if (0..n).contains(&k) {
            return Some(k as usize);
        }
        match self.boundary {
            Boundary::Periodic => Some(k.rem_euclid(n) as usize),
            Boundary::Zero => None,
            Boundary::Copy => Some(k.clamp(0, n - 1) as usize),
        }
    }
}

/// s·min(|a|, |b|, |c|) when a, b, c share the sign s, else 0.
#[inline]
pub fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Flux at k+1/2 from the stencil (g_{k−1}, g_k, g_{k+1}, g_{k+2}).
#[inline]
pub fn numerical_flux(g: [f64; 4], v1: f64, order: FluxOrder) -> f64 {
    let [gm, g0, g1, g2] = g;
    let phi = match order {
        FluxOrder::First => 0.0,
        FluxOrder::Second => minmod3(g0 - gm, g1 - g0, g2 - g1),
    };
    0.5 * v1 * (g1 + g0) - 0.5 * v1.abs() * (g1 - g0 - phi)
}

/// Δt = 0.99 α Δx / max|v¹| over all grids.
pub fn cfl_dt(mesh: &SpatialMesh, grids: &[VelocityGrid], order: FluxOrder) -> f64 {
    let vmax = grids.iter().map(|g| g.max_abs_v1()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return f64::INFINITY;
    }
    CFL_SAFETY * order.cfl_alpha() * mesh.dx / vmax
}

/// out += scale · 𝒯(f), with 𝒯_k = (F_{k+1/2} − F_{k−1/2}) / Δx.
pub fn transport_axpy(
    f: &Field,
    mesh: &SpatialMesh,
    grid: &VelocityGrid,
    order: FluxOrder,
    scale: f64,
    out: &mut Field,
) -> Result<()> {
    if !f.same_shape(out) || f.cells() != mesh.cells || f.nodes() != grid.len() {
        return Err(Error::invalid(format!(
            "transport shapes: field {}×{}, output {}×{}, mesh {}, grid {}",
            f.cells(),
            f.nodes(),
            out.cells(),
            out.nodes(),
            mesh.cells,
            grid.len()
        )));
    }
    let nodes = f.nodes();
    let n = grid.nodes_per_axis();
    let v1: Vec<f64> = grid.axis_coords(0);
    let factor = scale / mesh.dx;
    let zeros = vec![0.0; nodes];
    let cell = |k: isize| -> &[f64] {
        match mesh.resolve(k) {
            Some(c) => f.cell(c),
            None => &zeros,
        }
    };
    out.as_mut_slice().par_chunks_mut(nodes).enumerate().for_each(|(k, o)| {
        let k = k as isize;
        let s = [cell(k - 2), cell(k - 1), cell(k), cell(k + 1), cell(k + 2)];
        for (q, oq) in o.iter_mut().enumerate() {
            let v = v1[q / (n * n)];
            let right = numerical_flux([s[1][q], s[2][q], s[3][q], s[4][q]], v, order);
            let left = numerical_flux([s[0][q], s[1][q], s[2][q], s[3][q]], v, order);
            *oq += factor * (right - left);
        }
    });
    Ok(())
}

/// 𝒯(f) as a new field.
pub fn apply_transport(f: &Field, mesh: &SpatialMesh, grid: &VelocityGrid, order: FluxOrder) -> Result<Field> {
    let mut out = Field::zeros(f.cells(), f.nodes());
    transport_axpy(f, mesh, grid, order, 1.0, &mut out)?;
    Ok(out)
}
