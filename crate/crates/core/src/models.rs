//! Synthetic velocity models and raw-grid import. All functions return
//! velocities (m/s) on the full grid; PML nodes repeat the nearest core value.

use crate::grid::Grid2D;
use crate::{Error, Result};

/// Position of node `(i, j)` in meters relative to the core's top-left node,
/// clamped to the core.
fn core_position(grid: &Grid2D, i: usize, j: usize) -> (f64, f64) {
    let p = grid.n_pml();
    let (cw, ch) = grid.core_dims();
    let ci = i.saturating_sub(p).min(cw - 1);
    let cj = j.saturating_sub(p).min(ch - 1);
    (ci as f64 * grid.h(), cj as f64 * grid.h())
}

fn check_velocity(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} must be a positive velocity, got {v}"
        )))
    }
}

/// Horizontal layers. `velocities[k]` fills depths in
/// `[interfaces[k-1], interfaces[k])`, measured from the top of the core.
pub fn layered(grid: &Grid2D, interfaces_m: &[f64], velocities: &[f64]) -> Result<Vec<f64>> {
    if velocities.len() != interfaces_m.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} layer velocities need {} interfaces, got {}",
            velocities.len(),
            velocities.len().saturating_sub(1),
            interfaces_m.len()
        )));
    }
    if interfaces_m.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "layer interfaces must be strictly increasing".into(),
        ));
    }
    for v in velocities {
        check_velocity(*v, "layer velocity")?;
    }
    Ok((0..grid.len())
        .map(|m| {
            let (i, j) = grid.coords(m);
            let (_, z) = core_position(grid, i, j);
            velocities[interfaces_m.iter().take_while(|&&d| d <= z).count()]
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LensParams {
    /// Velocity at the top of the core.
    pub background: f64,
    /// Vertical velocity gradient, (m/s) per meter of depth.
    pub gradient: f64,
    /// Lens centre in meters from the core's top-left node.
    pub center: [f64; 2],
    pub radius: f64,
    /// Peak velocity perturbation (may be negative).
    pub amplitude: f64,
}

/// Linear-gradient background plus a Gaussian anomaly
/// `amplitude * exp(-d^2 / radius^2)`.
pub fn lens(grid: &Grid2D, p: &LensParams) -> Result<Vec<f64>> {
    check_velocity(p.background, "background")?;
    if !(p.radius.is_finite() && p.radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lens radius must be positive, got {}",
            p.radius
        )));
    }
    let v: Vec<f64> = (0..grid.len())
        .map(|m| {
            let (i, j) = grid.coords(m);
            let (x, z) = core_position(grid, i, j);
            let d2 = (x - p.center[0]).powi(2) + (z - p.center[1]).powi(2);
            p.background + p.gradient * z + p.amplitude * (-d2 / (p.radius * p.radius)).exp()
        })
        .collect();
    if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "lens parameters give a non-positive velocity {bad}"
        )));
    }
    Ok(v)
}

/// Wraps a headerless little-endian `f32` velocity grid of `core_nx * core_nz`
/// values and pads it with `grid.n_pml()` nodes per side. `z_fastest` selects
/// column-major input (the usual layout of Marmousi-style files).
pub fn import_raw(bytes: &[u8], grid: &Grid2D, z_fastest: bool) -> Result<Vec<f64>> {
    let (cw, ch) = grid.core_dims();
    let expected = 4 * cw * ch;
    if bytes.len() != expected {
        return Err(Error::InvalidInput(format!(
            "raw grid of {cw}x{ch} float32 values needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let raw: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = raw.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "raw value {i} is not a positive velocity: {}",
            raw[i]
        )));
    }
    let p = grid.n_pml();
    Ok((0..grid.len())
        .map(|m| {
            let (i, j) = grid.coords(m);
            let ci = i.saturating_sub(p).min(cw - 1);
            let cj = j.saturating_sub(p).min(ch - 1);
            if z_fastest {
                raw[cj + ci * ch]
            } else {
                raw[ci + cj * cw]
            }
        })
        .collect())
}

/// Separable Gaussian smoothing with standard deviations in nodes along x and
/// z (0 skips an axis). Edges are extended by repetition.
pub fn smooth(grid: &Grid2D, values: &[f64], sigma_x: f64, sigma_z: f64) -> Result<Vec<f64>> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} values, got {}",
            grid.len(),
            values.len()
        )));
    }
    if !(sigma_x >= 0.0 && sigma_z >= 0.0) {
        return Err(Error::InvalidInput(
            "smoothing lengths must be non-negative".into(),
        ));
    }
    let (nx, nz) = (grid.nx(), grid.nz());
    let x_pass = convolve(values, nx, nz, sigma_x, true);
    Ok(convolve(&x_pass, nx, nz, sigma_z, false))
}

fn convolve(v: &[f64], nx: usize, nz: usize, sigma: f64, along_x: bool) -> Vec<f64> {
    if sigma == 0.0 {
        return v.to_vec();
    }
    let half = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    let len = if along_x { nx } else { nz } as isize;
    let mut out = vec![0.0; v.len()];
    for j in 0..nz {
        for i in 0..nx {
            let pos = if along_x { i } else { j } as isize;
            let acc: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let q = (pos + k as isize - half).clamp(0, len - 1) as usize;
                    let (a, b) = if along_x { (q, j) } else { (i, q) };
                    w * v[a + b * nx]
                })
                .sum();
            out[i + j * nx] = acc / total;
        }
    }
    out
}
