//! Acquisition geometry, multi-source forward modelling, sampling `Q` and data weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::Grid2D;
use crate::helmholtz::{point_source, HelmholtzOperator};
use crate::sparse::LuFactors;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub node: usize,
    pub amplitude: f64,
    pub receivers: Vec<usize>,
}

/// Sources with their receiver spreads, plus the modelled frequencies.
///
/// Data vectors are ordered source-major: all receivers of source 0, then
/// those of source 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct Survey {
    sources: Vec<Source>,
    frequencies_hz: Vec<f64>,
    offsets: Vec<usize>,
}

impl Survey {
    /// Validates that every source and receiver sits in the active core (the
    /// core minus the Dirichlet ring) and that frequencies are positive and
    /// ascending.
    pub fn new(grid: &Grid2D, sources: Vec<Source>, frequencies_hz: Vec<f64>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidInput("survey has no sources".into()));
        }
        let check = |what: &str, node: usize| -> Result<()> {
            if node >= grid.len() {
                return Err(Error::InvalidInput(format!(
                    "{what} node {node} is outside the grid"
                )));
            }
            let (i, j) = grid.coords(node);
            if !grid.is_active_core(i, j) {
                return Err(Error::InvalidInput(format!(
                    "{what} at ({i}, {j}) is outside the core region"
                )));
            }
            Ok(())
        };
        for (k, src) in sources.iter().enumerate() {
            check(&format!("source {k}"), src.node)?;
            if !src.amplitude.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "source {k} amplitude is not finite"
                )));
            }
            for &r in &src.receivers {
                check(&format!("receiver of source {k}"), r)?;
            }
        }
        if frequencies_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidInput("frequencies must be positive".into()));
        }
        if frequencies_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "frequencies must be strictly ascending".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(sources.len() + 1);
        offsets.push(0);
        for s in &sources {
            offsets.push(offsets.last().unwrap() + s.receivers.len());
        }
        Ok(Self {
            sources,
            frequencies_hz,
            offsets,
        })
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    /// Total number of data `N`.
    pub fn n_data(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Range of source `k`'s data inside a [`DataVector`].
    pub fn data_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Same geometry restricted to another frequency list.
    pub fn with_frequencies(&self, frequencies_hz: Vec<f64>) -> Self {
        Self {
            frequencies_hz,
            ..self.clone()
        }
    }
}

/// One complex field per source.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefield {
    pub fields: Vec<Vec<C64>>,
}

/// Receiver data, concatenated over sources.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    pub values: Vec<C64>,
}

impl DataVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![C64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::sparse::scalar::norm2(&self.values)
    }
}

/// Real non-negative diagonal data weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub diag: Vec<f64>,
}

impl WeightMatrix {
    pub fn identity(n: usize) -> Self {
        Self { diag: vec![1.0; n] }
    }

    pub fn apply(&self, d: &[C64]) -> Vec<C64> {
        d.iter().zip(&self.diag).map(|(v, w)| v * w).collect()
    }

    /// `W^T W` applied to data.
    pub fn apply_squared(&self, d: &[C64]) -> Vec<C64> {
        d.iter().zip(&self.diag).map(|(v, w)| v * (w * w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Identity,
    Offset,
}

/// Identity weights, or weights proportional to source-receiver distance with
/// the largest equal to one.
pub fn build_weights(grid: &Grid2D, survey: &Survey, mode: WeightMode) -> WeightMatrix {
    match mode {
        WeightMode::Identity => WeightMatrix::identity(survey.n_data()),
        WeightMode::Offset => {
            let mut diag = Vec::with_capacity(survey.n_data());
            for src in survey.sources() {
                let (si, sj) = grid.coords(src.node);
                for &r in &src.receivers {
                    let (ri, rj) = grid.coords(r);
                    let dx = ri as f64 - si as f64;
                    let dz = rj as f64 - sj as f64;
                    diag.push(dx.hypot(dz) * grid.h());
                }
            }
            let max = diag.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                for w in &mut diag {
                    *w /= max;
                }
            }
            WeightMatrix { diag }
        }
    }
}

/// Solves `A u_k = f_k` for every source with a shared factorization.
pub fn solve_forward(op: &HelmholtzOperator, lu: &LuFactors, survey: &Survey) -> Result<Wavefield> {
    let fields = survey
        .sources()
        .par_iter()
        .map(|src| {
            let f = point_source(&op.grid, src.node, src.amplitude);
            lu.solve(&f, false).map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Wavefield { fields })
}

/// `d = Q u`: the field sampled at each source's receivers.
pub fn observe(u: &Wavefield, survey: &Survey) -> Result<DataVector> {
    if u.fields.len() != survey.n_sources() {
        return Err(Error::InvalidInput(format!(
            "wavefield has {} sources, survey has {}",
            u.fields.len(),
            survey.n_sources()
        )));
    }
    let mut values = Vec::with_capacity(survey.n_data());
    for (field, src) in u.fields.iter().zip(survey.sources()) {
        for &r in &src.receivers {
            let v = field.get(r).ok_or_else(|| {
                Error::InvalidInput(format!("receiver node {r} is outside the wavefield"))
            })?;
            values.push(*v);
        }
    }
    Ok(DataVector { values })
}

/// `Q_k^* w`: source `k`'s slice of data scattered back onto a grid of `n` nodes.
pub fn scatter(survey: &Survey, k: usize, data: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (&r, v) in survey.sources()[k].receivers.iter().zip(data) {
        out[r] += v;
    }
    out
}

/// `r = d_obs - d_pred`.
pub fn residual(d_obs: &DataVector, d_pred: &DataVector) -> Result<DataVector> {
    if d_obs.len() != d_pred.len() {
        return Err(Error::InvalidInput(format!(
            "data length mismatch: {} observed, {} predicted",
            d_obs.len(),
            d_pred.len()
        )));
    }
    Ok(DataVector {
        values: d_obs
            .values
            .iter()
            .zip(&d_pred.values)
            .map(|(o, p)| o - p)
            .collect(),
    })
}

/// `||d_pred - d_obs|| / ||d_obs||`.
pub fn relative_misfit(d_pred: &DataVector, d_obs: &DataVector) -> Result<f64> {
    let r = residual(d_obs, d_pred)?;
    let denom = d_obs.norm();
    if denom == 0.0 {
        return Err(Error::InvalidInput(
            "observed data are identically zero".into(),
        ));
    }
    Ok(r.norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, PmlProfile};
    use crate::helmholtz::{assemble_helmholtz, SlownessModel};
    use crate::sparse::lu_factor;

    fn survey_one(grid: &Grid2D, src: (usize, usize), recs: &[(usize, usize)]) -> Survey {
        Survey::new(
            grid,
            vec![Source {
                node: grid.index(src.0, src.1),
                amplitude: 1.0,
                receivers: recs.iter().map(|&(i, j)| grid.index(i, j)).collect(),
            }],
            vec![5.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_receivers_in_the_absorbing_layer() {
        let grid = build_grid(20, 20, 10.0, 4).unwrap();
        let ok = Survey::new(
            &grid,
            vec![Source {
                node: grid.index(10, 10),
                amplitude: 1.0,
                receivers: vec![grid.index(2, 10)],
            }],
            vec![5.0],
        );
        assert!(ok.is_err());
    }

    #[test]
    fn observe_picks_receiver_nodes() {
        let grid = build_grid(8, 8, 1.0, 0).unwrap();
        let survey = survey_one(&grid, (3, 3), &[(1, 1), (5, 2)]);
        let u = Wavefield {
            fields: vec![(0..64).map(|k| C64::new(k as f64, -(k as f64))).collect()],
        };
        let d = observe(&u, &survey).unwrap();
        assert_eq!(d.values, vec![C64::new(9.0, -9.0), C64::new(21.0, -21.0)]);
        let ones = Wavefield {
            fields: vec![vec![C64::new(1.0, 0.0); 64]],
        };
        assert!(observe(&ones, &survey)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == C64::new(1.0, 0.0)));
    }

    #[test]
    fn sampling_adjoint_identity() {
        let grid = build_grid(8, 8, 1.0, 0).unwrap();
        let survey = survey_one(&grid, (3, 3), &[(1, 1), (5, 2), (6, 6)]);
        let u: Vec<C64> = (0..64)
            .map(|k| C64::new((k as f64).sin(), (k as f64).cos()))
            .collect();
        let w = vec![C64::new(0.3, 1.0), C64::new(-2.0, 0.5), C64::new(0.0, -1.0)];
        let qu = observe(
            &Wavefield {
                fields: vec![u.clone()],
            },
            &survey,
        )
        .unwrap();
        let qw = scatter(&survey, 0, &w, 64);
        let lhs: C64 = qu.values.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        let rhs: C64 = u.iter().zip(&qw).map(|(a, b)| a.conj() * b).sum();
        assert!((lhs - rhs).norm() < 1e-13);
        // Q Q* = I for distinct receivers.
        let back = observe(&Wavefield { fields: vec![qw] }, &survey).unwrap();
        assert_eq!(back.values, w);
    }

    #[test]
    fn residual_examples() {
        let a = DataVector {
            values: vec![C64::new(1.0, 1.0), C64::new(0.0, 0.0)],
        };
        let b = DataVector {
            values: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        };
        assert_eq!(
            residual(&a, &b).unwrap().values,
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)]
        );
        assert!(residual(&a, &a)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
        assert!(residual(&a, &DataVector::zeros(3)).is_err());
        assert!((relative_misfit(&b, &a).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn offset_weights() {
        let grid = build_grid(12, 12, 5.0, 0).unwrap();
        let survey = survey_one(&grid, (3, 5), &[(3, 5), (5, 5), (7, 5)]);
        let w = build_weights(&grid, &survey, WeightMode::Offset);
        assert_eq!(w.diag[0], 0.0);
        assert!((w.diag[2] - 1.0).abs() < 1e-15);
        assert!((w.diag[2] / w.diag[1] - 2.0).abs() < 1e-14);
        assert_eq!(
            build_weights(&grid, &survey, WeightMode::Identity).diag,
            vec![1.0; 3]
        );
    }

    #[test]
    fn forward_solution_residual_and_symmetry() {
        let grid = build_grid(50, 50, 10.0, 0).unwrap();
        let prof = PmlProfile::new(0.0, 2.0);
        let model = SlownessModel::constant(&grid, 1.0 / (2000.0f64 * 2000.0)).unwrap();
        let op =
            assemble_helmholtz(&grid, &prof, &model, 2.0 * std::f64::consts::PI * 3.0).unwrap();
        let lu = lu_factor(&op.a).unwrap();
        // Source on the middle column of an odd-width interior.
        let grid_odd = build_grid(51, 51, 10.0, 0).unwrap();
        let model_odd = SlownessModel::constant(&grid_odd, 1.0 / (2000.0f64 * 2000.0)).unwrap();
        let op_odd = assemble_helmholtz(
            &grid_odd,
            &prof,
            &model_odd,
            2.0 * std::f64::consts::PI * 3.0,
        )
        .unwrap();
        let lu_odd = lu_factor(&op_odd.a).unwrap();

        let survey = survey_one(&grid, (20, 24), &[]);
        let u = solve_forward(&op, &lu, &survey).unwrap();
        let f = point_source(&grid, grid.index(20, 24), 1.0);
        let au = op.a.spmv(&u.fields[0], false).unwrap();
        let num: f64 = au
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let den: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(num / den < 1e-10);

        let survey = survey_one(&grid_odd, (25, 17), &[]);
        let u = solve_forward(&op_odd, &lu_odd, &survey).unwrap();
        let field = &u.fields[0];
        let scale = field.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for j in 0..51 {
            for i in 0..51 {
                let mirror = grid_odd.index(50 - i, j);
                assert!((field[grid_odd.index(i, j)] - field[mirror]).norm() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let grid = build_grid(10, 10, 10.0, 0).unwrap();
        let prof = PmlProfile::new(0.0, 2.0);
        let model = SlownessModel::constant(&grid, 2.5e-7).unwrap();
        let op = assemble_helmholtz(&grid, &prof, &model, 10.0).unwrap();
        let lu = lu_factor(&op.a).unwrap();
        let survey = Survey::new(
            &grid,
            vec![Source {
                node: grid.index(4, 4),
                amplitude: 0.0,
                receivers: vec![],
            }],
            vec![1.0],
        )
        .unwrap();
        let u = solve_forward(&op, &lu, &survey).unwrap();
        assert!(u.fields[0].iter().all(|v| v.norm() == 0.0));
    }
}
