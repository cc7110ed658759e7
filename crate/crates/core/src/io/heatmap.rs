//! Binary PPM (P6) heatmaps of the core region.
//!
//! One pixel per core node, depth increasing downward. Values are scaled
//! min-max per image; the endpoints go to a sidecar `<name>.txt`.

use std::path::Path;

use crate::grid::Grid2D;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// Black (min) to white (max).
    Grey,
    /// Blue, cyan, green, yellow, red at equally spaced stops.
    FalseColor,
}

impl Colormap {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Grey => "grey",
            Self::FalseColor => "false_color",
        }
    }

    /// Colour for `t` in `[0, 1]`.
    pub fn rgb(&self, t: f64) -> [u8; 3] {
        let t = if t.is_finite() {
            t.clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = |x: f64| (255.0 * x).round() as u8;
        match self {
            Self::Grey => [q(t); 3],
            Self::FalseColor => {
                const STOPS: [[f64; 3]; 5] = [
                    [0.0, 0.0, 1.0],
                    [0.0, 1.0, 1.0],
                    [0.0, 1.0, 0.0],
                    [1.0, 1.0, 0.0],
                    [1.0, 0.0, 0.0],
                ];
                let x = t * 4.0;
                let i = (x.floor() as usize).min(3);
                let f = x - i as f64;
                let (a, b) = (STOPS[i], STOPS[i + 1]);
                [0, 1, 2].map(|c| q(a[c] + f * (b[c] - a[c])))
            }
        }
    }
}

/// Writes the core region of `values` (one per grid node) and its sidecar.
/// Returns the `(min, max)` used for scaling.
pub fn write_heatmap(
    path: &Path,
    grid: &Grid2D,
    values: &[f64],
    colormap: Colormap,
) -> Result<(f64, f64)> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "heatmap needs {} values, got {}",
            grid.len(),
            values.len()
        )));
    }
    let (cw, ch) = grid.core_dims();
    let p = grid.n_pml();
    let core: Vec<f64> = (0..ch)
        .flat_map(|j| (0..cw).map(move |i| (i + p, j + p)))
        .map(|(i, j)| values[grid.index(i, j)])
        .collect();
    let lo = core.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = core.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut bytes = format!("P6\n{cw} {ch}\n255\n").into_bytes();
    for v in &core {
        let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
        bytes.extend_from_slice(&colormap.rgb(t));
    }
    super::write_atomic(path, &bytes)?;
    let sidecar = format!(
        "colormap {}\nmin {lo}\nmax {hi}\nwidth {cw}\nheight {ch}\n",
        colormap.as_str()
    );
    super::write_atomic(&path.with_extension("txt"), sidecar.as_bytes())?;
    Ok((lo, hi))
}
