//! PML Helmholtz operator, squared-slowness models and the diagonal `P` blocks.

use crate::grid::{Axis, Grid2D, PmlProfile, StretchTable};
use crate::sparse::SparseMatrixCSR;
use crate::{Error, Result, C64};

/// Squared slowness `s = 1/c^2` on every grid node, in s^2/m^2.
#[derive(Debug, Clone, PartialEq)]
pub struct SlownessModel {
    values: Vec<f64>,
    bounds: Option<(f64, f64)>,
}

impl SlownessModel {
    pub fn new(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "model has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "squared slowness must be finite and positive; node {pos} has {}",
                values[pos]
            )));
        }
        Ok(Self {
            values,
            bounds: None,
        })
    }

    pub fn constant(grid: &Grid2D, s: f64) -> Result<Self> {
        Self::new(grid, vec![s; grid.len()])
    }

    pub fn from_velocity(grid: &Grid2D, velocity: &[f64]) -> Result<Self> {
        if let Some(pos) = velocity.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "velocity must be finite and positive; node {pos} has {}",
                velocity[pos]
            )));
        }
        Self::new(grid, velocity.iter().map(|c| 1.0 / (c * c)).collect())
    }

    /// Attach slowness bounds `(lower, upper)` used by [`Self::updated`].
    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "invalid slowness bounds [{lower}, {upper}]"
            )));
        }
        self.bounds = Some((lower, upper));
        Ok(self)
    }

    /// Bounds expressed in velocity (m/s): the fast limit gives the lower
    /// slowness bound.
    pub fn with_velocity_bounds(self, min_velocity: f64, max_velocity: f64) -> Result<Self> {
        if !(min_velocity > 0.0 && min_velocity <= max_velocity) {
            return Err(Error::InvalidInput(format!(
                "invalid velocity bounds [{min_velocity}, {max_velocity}]"
            )));
        }
        self.with_bounds(
            1.0 / (max_velocity * max_velocity),
            1.0 / (min_velocity * min_velocity),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.values.iter().map(|s| 1.0 / s.sqrt()).collect()
    }

    /// `s + delta`, clamped to the bounds when set. Without bounds the result
    /// must stay positive.
    pub fn updated(&self, delta: &[f64]) -> Result<Self> {
        if delta.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "update has {} entries, model has {}",
                delta.len(),
                self.values.len()
            )));
        }
        let mut values: Vec<f64> = self.values.iter().zip(delta).map(|(s, d)| s + d).collect();
        if let Some((lo, hi)) = self.bounds {
            for v in &mut values {
                *v = v.clamp(lo, hi);
            }
        } else if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "update makes squared slowness non-positive at node {pos}; set bounds"
            )));
        }
        Ok(Self {
            values,
            bounds: self.bounds,
        })
    }
}

/// Assembled `A(s, omega)` together with what it was built from.
#[derive(Debug, Clone)]
pub struct HelmholtzOperator {
    pub a: SparseMatrixCSR,
    pub omega: f64,
    pub grid: Grid2D,
    pub profile: PmlProfile,
    /// `X_i Z_j` at interior nodes and 0 on the Dirichlet ring: the factor
    /// multiplying `-omega^2 s` on the diagonal.
    pub mass: Vec<C64>,
}

impl HelmholtzOperator {
    pub fn dim(&self) -> usize {
        self.a.n_rows()
    }

    /// Diagonal of `P = -dA/ds u`, i.e. `omega^2 X Z u` (zero on the boundary).
    pub fn p_diagonal(&self, u: &[C64]) -> Vec<C64> {
        let w2 = self.omega * self.omega;
        self.mass.iter().zip(u).map(|(m, ui)| w2 * m * ui).collect()
    }
}

/// Five-point negative Laplacian with complex-stretched coefficients minus
/// `omega^2 s X Z`, Dirichlet nodes eliminated symmetrically.
pub fn assemble_helmholtz(
    grid: &Grid2D,
    profile: &PmlProfile,
    model: &SlownessModel,
    omega: f64,
) -> Result<HelmholtzOperator> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    if model.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "model has {} values, grid has {} nodes",
            model.len(),
            grid.len()
        )));
    }
    let (nx, nz) = (grid.nx(), grid.nz());
    let xs = StretchTable::new(grid, profile, Axis::X, omega);
    let zs = StretchTable::new(grid, profile, Axis::Z, omega);
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let w2 = omega * omega;
    let s = model.values();

    let n = grid.len();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(5 * n);
    let mut vals = Vec::with_capacity(5 * n);
    let mut mass = vec![C64::new(0.0, 0.0); n];
    row_offsets.push(0);
    for j in 0..nz {
        for i in 0..nx {
            let idx = grid.index(i, j);
            if grid.is_boundary(i, j) {
                cols.push(idx);
                vals.push(C64::new(1.0, 0.0));
                row_offsets.push(cols.len());
                continue;
            }
            let cxm = zs.node[j] * inv_h2 / xs.half[i - 1];
            let cxp = zs.node[j] * inv_h2 / xs.half[i];
            let czm = xs.node[i] * inv_h2 / zs.half[j - 1];
            let czp = xs.node[i] * inv_h2 / zs.half[j];
            mass[idx] = xs.node[i] * zs.node[j];
            let diag = cxm + cxp + czm + czp - w2 * s[idx] * mass[idx];
            // Columns in ascending order: south, west, centre, east, north.
            let neighbours = [
                (i, j - 1, czm),
                (i - 1, j, cxm),
                (i, j, -diag),
                (i + 1, j, cxp),
                (i, j + 1, czp),
            ];
            for (ni, nj, c) in neighbours {
                if (ni, nj) != (i, j) && grid.is_boundary(ni, nj) {
                    continue;
                }
                cols.push(grid.index(ni, nj));
                vals.push(-c);
            }
            row_offsets.push(cols.len());
        }
    }
    let a = SparseMatrixCSR::from_raw(n, n, row_offsets, cols, vals)?;
    Ok(HelmholtzOperator {
        a,
        omega,
        grid: grid.clone(),
        profile: *profile,
        mass,
    })
}

/// Diagonal matrix `omega^2 diag(u)`.
pub fn assemble_p_block(u: &[C64], omega: f64) -> SparseMatrixCSR {
    let w2 = omega * omega;
    let diag: Vec<C64> = u.iter().map(|ui| w2 * ui).collect();
    SparseMatrixCSR::from_diagonal(&diag)
}

/// Discrete unit point load at `node`: `amplitude / h^2` there, zero elsewhere.
pub fn point_source(grid: &Grid2D, node: usize, amplitude: f64) -> Vec<C64> {
    let mut f = vec![C64::new(0.0, 0.0); grid.len()];
    f[node] = C64::new(amplitude / (grid.h() * grid.h()), 0.0);
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn no_pml(n: usize) -> (Grid2D, PmlProfile) {
        (
            build_grid(n, n, 10.0, 0).unwrap(),
            PmlProfile::new(0.0, 2.0),
        )
    }

    #[test]
    fn interior_row_of_constant_model() {
        let (grid, prof) = no_pml(7);
        let s0 = 1.0 / (1500.0f64 * 1500.0);
        let omega = 2.0 * std::f64::consts::PI * 5.0;
        let op = assemble_helmholtz(
            &grid,
            &prof,
            &SlownessModel::constant(&grid, s0).unwrap(),
            omega,
        )
        .unwrap();
        let idx = grid.index(3, 3);
        let (cols, vals) = op.a.row(idx);
        assert_eq!(cols.len(), 5);
        let h2 = 100.0;
        for (c, v) in cols.iter().zip(vals) {
            if *c == idx {
                assert!((v.re - (4.0 / h2 - omega * omega * s0)).abs() < 1e-15);
            } else {
                assert!((v.re + 1.0 / h2).abs() < 1e-15);
            }
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn boundary_rows_are_identity() {
        let (grid, prof) = no_pml(6);
        let op = assemble_helmholtz(
            &grid,
            &prof,
            &SlownessModel::constant(&grid, 1e-7).unwrap(),
            3.0,
        )
        .unwrap();
        for idx in grid.boundary_indices() {
            let (cols, vals) = op.a.row(idx);
            assert_eq!(cols, &[idx]);
            assert_eq!(vals[0], C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn real_symmetric_without_pml() {
        let (grid, prof) = no_pml(8);
        let s: Vec<f64> = (0..grid.len())
            .map(|k| 1e-7 * (1.0 + 0.01 * k as f64))
            .collect();
        let op =
            assemble_helmholtz(&grid, &prof, &SlownessModel::new(&grid, s).unwrap(), 20.0).unwrap();
        assert!(op.a.values().iter().all(|v| v.im == 0.0));
        let diff = op.a.sub(&op.a.transpose()).unwrap();
        assert_eq!(diff.frobenius_norm(), 0.0);
    }

    #[test]
    fn pml_makes_operator_complex_symmetric_but_not_hermitian() {
        let grid = build_grid(14, 12, 10.0, 3).unwrap();
        let prof = PmlProfile::from_reference_speed(&grid, 2000.0);
        let op = assemble_helmholtz(
            &grid,
            &prof,
            &SlownessModel::constant(&grid, 2.5e-7).unwrap(),
            30.0,
        )
        .unwrap();
        let imag: f64 = op.a.values().iter().map(|v| v.im * v.im).sum();
        assert!(imag > 0.0);
        assert_eq!(op.a.sub(&op.a.transpose()).unwrap().frobenius_norm(), 0.0);
        assert!(
            op.a.sub(&op.a.conjugate_transpose())
                .unwrap()
                .frobenius_norm()
                > 0.0
        );
    }

    #[test]
    fn operator_is_affine_in_the_model() {
        let grid = build_grid(10, 9, 5.0, 2).unwrap();
        let prof = PmlProfile::from_reference_speed(&grid, 1500.0);
        let omega = 40.0;
        let s0 = SlownessModel::constant(&grid, 4e-7).unwrap();
        let ds: Vec<f64> = (0..grid.len())
            .map(|k| 1e-8 * ((k * 7 % 11) as f64 - 5.0))
            .collect();
        let s1 = s0.updated(&ds).unwrap();
        let a0 = assemble_helmholtz(&grid, &prof, &s0, omega).unwrap();
        let a1 = assemble_helmholtz(&grid, &prof, &s1, omega).unwrap();
        let u: Vec<C64> = (0..grid.len())
            .map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let lhs = a1.a.spmv(&u, false).unwrap();
        let rhs = a0.a.spmv(&u, false).unwrap();
        let p = a0.p_diagonal(&u);
        for k in 0..grid.len() {
            let r = lhs[k] - rhs[k] + p[k] * ds[k];
            assert!(r.norm() < 1e-15, "node {k}: {r}");
        }
    }

    #[test]
    fn p_block_examples() {
        let u = vec![C64::new(1.0, 0.0); 4];
        let p = assemble_p_block(&u, 2.0);
        assert_eq!(p.diagonal(), vec![C64::new(4.0, 0.0); 4]);
        let p = assemble_p_block(&[C64::new(0.0, 0.0); 3], 5.0);
        assert!(p.values().iter().all(|v| *v == C64::new(0.0, 0.0)));
        let u = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.25)];
        let v = vec![C64::new(0.0, 1.0), C64::new(3.0, -1.0)];
        let pv = assemble_p_block(&u, 3.0).spmv(&v, false).unwrap();
        for k in 0..2 {
            assert!((pv[k] - 9.0 * u[k] * v[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn model_validation_and_clamp() {
        let grid = build_grid(4, 4, 1.0, 0).unwrap();
        assert!(SlownessModel::new(&grid, vec![1.0; 15]).is_err());
        let mut bad = vec![1.0; 16];
        bad[3] = -1.0;
        assert!(SlownessModel::new(&grid, bad).is_err());
        let m = SlownessModel::constant(&grid, 1.0)
            .unwrap()
            .with_bounds(0.5, 2.0)
            .unwrap();
        let mut d = vec![0.0; 16];
        d[0] = -10.0;
        d[1] = 10.0;
        let m2 = m.updated(&d).unwrap();
        assert_eq!(m2.values()[0], 0.5);
        assert_eq!(m2.values()[1], 2.0);
        let unbounded = SlownessModel::constant(&grid, 1.0).unwrap();
        assert!(unbounded.updated(&d).is_err());
    }
}
