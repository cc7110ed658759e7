//! Shared fixtures: one small linearization point built both for the sparse
//! solvers and for the dense oracle from the same raw numbers.

#![allow(dead_code)]

use kktfwi::forward::{DataVector, Source, Survey, WeightMatrix};
use kktfwi::grid::{build_grid, Grid2D, PmlProfile};
use kktfwi::helmholtz::SlownessModel;
use kktfwi::kkt::KktVector;
use kktfwi::reduced::{GnSetup, GnState};
use kktfwi::C64;
use kktfwi_oracle::nalgebra::DVector;
use kktfwi_oracle::{DenseInstance, DenseProblem, KktBlocks};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub grid: Grid2D,
    pub profile: PmlProfile,
    pub survey: Survey,
    pub weights: WeightMatrix,
    pub d_obs: DataVector,
    pub model: SlownessModel,
    pub freq_hz: f64,
    pub epsilon: f64,
    pub drop_model_term: bool,
}

impl Fixture {
    /// 12x12 grid, two-node PML, two sources with three receivers each, in
    /// nondimensional units (h = 1, wave speed about 1, eight points per
    /// wavelength), eps = 1e-2.
    pub fn standard() -> Self {
        let grid = build_grid(12, 12, 1.0, 2).unwrap();
        let profile = PmlProfile::from_reference_speed(&grid, 1.0);
        let s: Vec<f64> = (0..grid.len())
            .map(|m| {
                let (i, j) = grid.coords(m);
                1.0 / (1.0 + 0.03 * j as f64 + 0.005 * i as f64).powi(2)
            })
            .collect();
        let model = SlownessModel::new(&grid, s).unwrap();
        let idx = |i, j| grid.index(i, j);
        let sources = vec![
            Source {
                node: idx(4, 4),
                amplitude: 1.0,
                receivers: vec![idx(3, 8), idx(5, 8), idx(8, 8)],
            },
            Source {
                node: idx(7, 7),
                amplitude: 1.0,
                receivers: vec![idx(3, 3), idx(6, 4), idx(8, 5)],
            },
        ];
        let survey = Survey::new(&grid, sources, vec![0.125]).unwrap();
        let weights = WeightMatrix {
            diag: vec![1.0, 0.5, 2.0, 1.0, 1.0, 0.25],
        };
        let d_obs = DataVector {
            values: (0..6).map(|d| C64::new(0.1 * d as f64, -0.2)).collect(),
        };
        Self {
            grid,
            profile,
            survey,
            weights,
            d_obs,
            model,
            freq_hz: 0.125,
            epsilon: 1e-2,
            drop_model_term: false,
        }
    }

    /// Same geometry with every receiver removed.
    pub fn without_receivers(mut self) -> Self {
        let sources = self
            .survey
            .sources()
            .iter()
            .map(|s| Source {
                receivers: vec![],
                ..s.clone()
            })
            .collect();
        self.survey = Survey::new(&self.grid, sources, vec![self.freq_hz]).unwrap();
        self.weights = WeightMatrix { diag: vec![] };
        self.d_obs = DataVector { values: vec![] };
        self
    }

    pub fn setup(&self) -> GnSetup<'_> {
        GnSetup {
            grid: &self.grid,
            profile: &self.profile,
            survey: &self.survey,
            weights: &self.weights,
            d_obs: &self.d_obs,
            freq_hz: self.freq_hz,
            epsilon: self.epsilon,
            drop_model_term: self.drop_model_term,
        }
    }

    pub fn state(&self) -> GnState {
        GnState::new(self.setup(), &self.model).unwrap()
    }

    pub fn dense_problem(&self) -> DenseProblem {
        DenseProblem {
            nx: self.grid.nx(),
            nz: self.grid.nz(),
            h: self.grid.h(),
            n_pml: self.grid.n_pml(),
            sigma_max: self.profile.sigma_max,
            power: self.profile.power,
            slowness: self.model.values().to_vec(),
            omega: 2.0 * std::f64::consts::PI * self.freq_hz,
            sources: self
                .survey
                .sources()
                .iter()
                .map(|s| (s.node, s.amplitude))
                .collect(),
            receivers: self
                .survey
                .sources()
                .iter()
                .map(|s| s.receivers.clone())
                .collect(),
            weights: self.weights.diag.clone(),
            d_obs: self.d_obs.values.clone(),
            epsilon: self.epsilon,
            drop_model_term: self.drop_model_term,
        }
    }

    pub fn dense(&self) -> DenseInstance {
        DenseInstance::new(&self.dense_problem()).unwrap()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_real(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn random_complex(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn random_kkt(rng: &mut impl Rng, k: usize, n: usize) -> KktVector {
    KktVector {
        du: (0..k).map(|_| random_complex(rng, n)).collect(),
        ds: random_real(rng, n),
        lambda: (0..k).map(|_| random_complex(rng, n)).collect(),
    }
}

pub fn to_blocks(x: &KktVector) -> KktBlocks {
    KktBlocks {
        du: x.du.iter().map(|b| DVector::from_column_slice(b)).collect(),
        ds: DVector::from_column_slice(&x.ds),
        lambda: x
            .lambda
            .iter()
            .map(|b| DVector::from_column_slice(b))
            .collect(),
    }
}

pub fn from_blocks(x: &KktBlocks) -> KktVector {
    KktVector {
        du: x.du.iter().map(|b| b.as_slice().to_vec()).collect(),
        ds: x.ds.as_slice().to_vec(),
        lambda: x.lambda.iter().map(|b| b.as_slice().to_vec()).collect(),
    }
}

pub fn rel_err_real(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

pub fn rel_err_complex(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

pub fn kkt_rel_err(a: &KktVector, b: &KktVector) -> f64 {
    use kktfwi::sparse::KrylovVector;
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.norm() / b.norm()
}
