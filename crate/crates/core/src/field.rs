//! Phase-space storage for one species: spatial cells × velocity nodes.

use crate::error::{Error, Result};

/// Cell-major storage: the velocity block of cell `k` is contiguous.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field {
    cells: usize,
    nodes: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(cells: usize, nodes: usize) -> Self {
        Field {
            cells,
            nodes,
            data: vec![0.0; cells * nodes],
        }
    }

    pub fn from_vec(cells: usize, nodes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != cells * nodes {
            return Err(Error::invalid(format!(
                "field data has {} values, expected {} cells × {} nodes",
                data.len(),
                cells,
                nodes
            )));
        }
        Ok(Field { cells, nodes, data })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        &self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn cell_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Field) -> bool {
        self.cells == other.cells && self.nodes == other.nodes
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
