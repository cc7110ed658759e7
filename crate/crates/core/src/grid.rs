//! The 2D computational grid and the PML coordinate stretching.
//!
//! Nodes are numbered row-major with `x` fastest: node `(i, j)` (column `i`,
//! depth row `j`) has linear index `i + j * nx`. Every file format in this
//! crate uses the same ordering.
//!
//! The core region is the set of nodes at least `n_pml` nodes away from every
//! edge; everything else is absorbing layer. The outermost ring of nodes
//! carries the homogeneous Dirichlet condition.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

/// Uniform rectangular grid with an absorbing frame of `n_pml` nodes per side.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    nz: usize,
    h: f64,
    n_pml: usize,
}

impl Grid2D {
    pub fn new(nx: usize, nz: usize, h: f64, n_pml: usize) -> Result<Self> {
        if nx < 3 || nz < 3 {
            return Err(Error::Grid(format!(
                "need at least 3 nodes per axis, got nx={nx}, nz={nz}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Grid(format!("spacing must be positive, got h={h}")));
        }
        if 2 * n_pml >= nx.min(nz) {
            return Err(Error::Grid(format!(
                "PML of {n_pml} nodes per side leaves no core in a {nx}x{nz} grid"
            )));
        }
        Ok(Self { nx, nz, h, n_pml })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_pml(&self) -> usize {
        self.n_pml
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.nz);
        i + j * self.nx
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.nz
    }

    #[inline]
    pub fn is_core(&self, i: usize, j: usize) -> bool {
        i >= self.n_pml && i + self.n_pml < self.nx && j >= self.n_pml && j + self.n_pml < self.nz
    }

    /// Core node that is not on the Dirichlet ring; the only valid place for
    /// sources and receivers.
    pub fn is_active_core(&self, i: usize, j: usize) -> bool {
        i < self.nx && j < self.nz && self.is_core(i, j) && !self.is_boundary(i, j)
    }

    /// Core dimensions `(nx - 2 n_pml, nz - 2 n_pml)`.
    pub fn core_dims(&self) -> (usize, usize) {
        (self.nx - 2 * self.n_pml, self.nz - 2 * self.n_pml)
    }

    pub fn core_indices(&self) -> Vec<usize> {
        self.filter_indices(|i, j| self.is_core(i, j))
    }

    pub fn pml_indices(&self) -> Vec<usize> {
        self.filter_indices(|i, j| !self.is_core(i, j))
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        self.filter_indices(|i, j| self.is_boundary(i, j))
    }

    fn filter_indices(&self, keep: impl Fn(usize, usize) -> bool) -> Vec<usize> {
        (0..self.len())
            .filter(|&idx| {
                let (i, j) = self.coords(idx);
                keep(i, j)
            })
            .collect()
    }

    /// Number of nodes along `axis`.
    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Z => self.nz,
        }
    }
}

/// Shorthand for [`Grid2D::new`].
pub fn build_grid(nx: usize, nz: usize, h: f64, n_pml: usize) -> Result<Grid2D> {
    Grid2D::new(nx, nz, h, n_pml)
}

/// Damping ramp `sigma(t) = sigma_max * t^power`, `t` in `[0, 1]` being the
/// normalized depth into the layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlProfile {
    pub sigma_max: f64,
    pub power: f64,
}

/// Target reflection coefficient of the default ramp.
const DEFAULT_REFLECTION: f64 = 1e-3;

impl PmlProfile {
    pub fn new(sigma_max: f64, power: f64) -> Self {
        Self { sigma_max, power }
    }

    /// Quadratic ramp with `sigma_max = 3 c_ref ln(1/R) / (2 L)`, `L` being the
    /// layer thickness and `R = 1e-3`.
    pub fn from_reference_speed(grid: &Grid2D, c_ref: f64) -> Self {
        let thickness = grid.n_pml() as f64 * grid.h();
        let sigma_max = if grid.n_pml() == 0 {
            0.0
        } else {
            3.0 * c_ref * (1.0 / DEFAULT_REFLECTION).ln() / (2.0 * thickness)
        };
        Self {
            sigma_max,
            power: 2.0,
        }
    }

    /// Normalized depth into the layer at a (possibly half-integer) node
    /// position; zero in the core.
    pub fn depth(&self, grid: &Grid2D, axis: Axis, position: f64) -> f64 {
        let n_pml = grid.n_pml();
        if n_pml == 0 {
            return 0.0;
        }
        let n = grid.extent(axis) as f64;
        let inner_lo = n_pml as f64;
        let inner_hi = n - 1.0 - n_pml as f64;
        if position < inner_lo {
            (inner_lo - position) / n_pml as f64
        } else if position > inner_hi {
            (position - inner_hi) / n_pml as f64
        } else {
            0.0
        }
    }

    /// Complex stretch factor `1 + i sigma(t) / omega`.
    pub fn stretch(&self, grid: &Grid2D, axis: Axis, position: f64, omega: f64) -> C64 {
        debug_assert!(omega > 0.0);
        let t = self.depth(grid, axis, position);
        if t <= 0.0 {
            return C64::new(1.0, 0.0);
        }
        C64::new(1.0, self.sigma_max * t.powf(self.power) / omega)
    }
}

/// Free-function form of [`PmlProfile::stretch`].
pub fn stretch(grid: &Grid2D, profile: &PmlProfile, axis: Axis, position: f64, omega: f64) -> C64 {
    profile.stretch(grid, axis, position, omega)
}

/// Stretch factors tabulated on nodes and half nodes of one axis.
#[derive(Debug, Clone)]
pub struct StretchTable {
    /// `node[i]` = stretch at position `i`.
    pub node: Vec<C64>,
    /// `half[i]` = stretch at position `i + 1/2`.
    pub half: Vec<C64>,
}

impl StretchTable {
    pub fn new(grid: &Grid2D, profile: &PmlProfile, axis: Axis, omega: f64) -> Self {
        let n = grid.extent(axis);
        let node = (0..n)
            .map(|i| profile.stretch(grid, axis, i as f64, omega))
            .collect();
        let half = (0..n - 1)
            .map(|i| profile.stretch(grid, axis, i as f64 + 0.5, omega))
            .collect();
        Self { node, half }
    }
}
