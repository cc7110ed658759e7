//! Dense, brute-force reference for the Gauss-Newton linear algebra on tiny grids.
//!
//! Everything is rebuilt from raw numbers (grid sizes, damping ramp, model
//! values, node lists) with dense LU factorizations. No code is shared with
//! the sparse, matrix-free implementation, so agreement between the two is
//! meaningful evidence.
//!
//! Node `(i, j)` has index `i + j * nx`; the outermost ring is Dirichlet.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

pub use nalgebra;

/// Largest KKT system (complex unknown count `2 K n + n`) the oracle accepts.
pub const MAX_KKT_DIM: usize = 50_000;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("problem too large for the dense oracle: KKT dimension {dim} exceeds {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("inconsistent input: {0}")]
    Input(String),
    #[error("singular {0} matrix")]
    Singular(&'static str),
}

/// Raw description of one linearization point.
#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub nx: usize,
    pub nz: usize,
    pub h: f64,
    pub n_pml: usize,
    pub sigma_max: f64,
    pub power: f64,
    /// Squared slowness per node.
    pub slowness: Vec<f64>,
    pub omega: f64,
    /// `(node, amplitude)` of each point source.
    pub sources: Vec<(usize, f64)>,
    pub receivers: Vec<Vec<usize>>,
    /// Data weights, source-major.
    pub weights: Vec<f64>,
    pub d_obs: Vec<C64>,
    pub epsilon: f64,
    pub drop_model_term: bool,
}

/// Solution of the dense KKT system, split into blocks.
#[derive(Debug, Clone)]
pub struct KktBlocks {
    pub du: Vec<DVector<C64>>,
    pub ds: DVector<f64>,
    pub lambda: Vec<DVector<C64>>,
}

/// Dense operators at the linearization point.
#[derive(Debug, Clone)]
pub struct DenseInstance {
    pub n: usize,
    pub a: DMatrix<C64>,
    pub u: Vec<DVector<C64>>,
    /// Diagonals of the `P_k`.
    pub p: Vec<DVector<C64>>,
    pub weights: DVector<f64>,
    pub residual: DVector<C64>,
    pub jacobian: DMatrix<C64>,
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    receivers: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    epsilon: f64,
    model_term: DVector<f64>,
}

fn damping(pos: f64, n: usize, n_pml: usize, sigma_max: f64, power: f64) -> f64 {
    if n_pml == 0 {
        return 0.0;
    }
    let width = n_pml as f64;
    let lo = width;
    let hi = (n - 1 - n_pml) as f64;
    let t = if pos < lo {
        (lo - pos) / width
    } else if pos > hi {
        (pos - hi) / width
    } else {
        return 0.0;
    };
    sigma_max * t.powf(power)
}

fn is_ring(pb: &DenseProblem, i: usize, j: usize) -> bool {
    i == 0 || j == 0 || i == pb.nx - 1 || j == pb.nz - 1
}

impl DenseProblem {
    fn stretch(&self, pos: f64, n: usize) -> C64 {
        C64::new(
            1.0,
            damping(pos, n, self.n_pml, self.sigma_max, self.power) / self.omega,
        )
    }

    /// Dense `A` and the `X Z` weights of its mass term.
    fn helmholtz(&self) -> (DMatrix<C64>, DVector<C64>) {
        let (nx, nz) = (self.nx, self.nz);
        let n = nx * nz;
        let mut a = DMatrix::<C64>::zeros(n, n);
        let mut xz = DVector::<C64>::zeros(n);
        let ih2 = 1.0 / (self.h * self.h);
        for j in 0..nz {
            for i in 0..nx {
                let c = i + j * nx;
                if is_ring(self, i, j) {
                    a[(c, c)] = C64::new(1.0, 0.0);
                    continue;
                }
                let (x, z) = (self.stretch(i as f64, nx), self.stretch(j as f64, nz));
                let couplings = [
                    (c - 1, z * ih2 / self.stretch(i as f64 - 0.5, nx), i - 1, j),
                    (c + 1, z * ih2 / self.stretch(i as f64 + 0.5, nx), i + 1, j),
                    (c - nx, x * ih2 / self.stretch(j as f64 - 0.5, nz), i, j - 1),
                    (c + nx, x * ih2 / self.stretch(j as f64 + 0.5, nz), i, j + 1),
                ];
                xz[c] = x * z;
                a[(c, c)] = -self.omega * self.omega * self.slowness[c] * x * z;
                for (col, w, ni, nj) in couplings {
                    a[(c, c)] += w;
                    if !is_ring(self, ni, nj) {
                        a[(c, col)] -= w;
                    }
                }
            }
        }
        (a, xz)
    }

    fn validate(&self) -> Result<(), OracleError> {
        let n = self.nx * self.nz;
        let k = self.sources.len();
        let dim = 2 * k * n + n;
        if dim > MAX_KKT_DIM {
            return Err(OracleError::TooLarge {
                dim,
                max: MAX_KKT_DIM,
            });
        }
        if self.nx < 3 || self.nz < 3 || 2 * self.n_pml >= self.nx.min(self.nz) {
            return Err(OracleError::Input("grid too small".into()));
        }
        if self.slowness.len() != n {
            return Err(OracleError::Input("slowness length".into()));
        }
        if self.receivers.len() != k {
            return Err(OracleError::Input(
                "one receiver list per source required".into(),
            ));
        }
        let n_data: usize = self.receivers.iter().map(Vec::len).sum();
        if self.weights.len() != n_data || self.d_obs.len() != n_data {
            return Err(OracleError::Input("weights or data length".into()));
        }
        if self
            .sources
            .iter()
            .map(|s| s.0)
            .chain(self.receivers.iter().flatten().copied())
            .any(|node| node >= n)
        {
            return Err(OracleError::Input("node index out of range".into()));
        }
        Ok(())
    }
}

impl DenseInstance {
    pub fn new(pb: &DenseProblem) -> Result<Self, OracleError> {
        pb.validate()?;
        let n = pb.nx * pb.nz;
        let (a, xz) = pb.helmholtz();
        let lu = a.clone().lu();
        let a_inv = lu.try_inverse().ok_or(OracleError::Singular("Helmholtz"))?;

        let mut u = Vec::new();
        let mut p = Vec::new();
        for &(node, amp) in &pb.sources {
            let mut f = DVector::<C64>::zeros(n);
            f[node] = C64::new(amp / (pb.h * pb.h), 0.0);
            let uk = &a_inv * f;
            let pk = DVector::from_iterator(n, (0..n).map(|m| pb.omega * pb.omega * xz[m] * uk[m]));
            u.push(uk);
            p.push(pk);
        }

        let mut offsets = vec![0];
        for r in &pb.receivers {
            offsets.push(offsets.last().unwrap() + r.len());
        }
        let n_data = *offsets.last().unwrap();
        let mut jacobian = DMatrix::<C64>::zeros(n_data, n);
        let mut residual = DVector::<C64>::zeros(n_data);
        for (k, recs) in pb.receivers.iter().enumerate() {
            for (row, &node) in recs.iter().enumerate() {
                let d = offsets[k] + row;
                residual[d] = pb.d_obs[d] - u[k][node];
                // Row of Q A^{-1} P: column i is A^{-1}[node, i] * p_k[i].
                for i in 0..n {
                    jacobian[(d, i)] = a_inv[(node, i)] * p[k][i];
                }
            }
        }
        let weights = DVector::from_column_slice(&pb.weights);
        let w2 = weights.map(|w| C64::new(w * w, 0.0));
        let wj = DMatrix::from_fn(n_data, n, |d, i| w2[d] * jacobian[(d, i)]);
        let hessian =
            (jacobian.adjoint() * &wj).map(|z| z.re) + DMatrix::<f64>::identity(n, n) * pb.epsilon;
        let wr = residual.component_mul(&w2);
        let model_term = if pb.drop_model_term {
            DVector::zeros(n)
        } else {
            DVector::from_column_slice(&pb.slowness) * pb.epsilon
        };
        let gradient = (jacobian.adjoint() * wr).map(|z| z.re) - &model_term;

        Ok(Self {
            n,
            a,
            u,
            p,
            weights,
            residual,
            jacobian,
            hessian,
            gradient,
            receivers: pb.receivers.clone(),
            offsets,
            epsilon: pb.epsilon,
            model_term,
        })
    }

    pub fn n_sources(&self) -> usize {
        self.u.len()
    }

    /// Real dimension of the block form of the KKT matrix.
    pub fn kkt_real_dim(&self) -> usize {
        4 * self.n_sources() * self.n + self.n
    }

    /// `H ds = g` by dense LU.
    pub fn normal_solve(&self) -> Result<DVector<f64>, OracleError> {
        self.hessian
            .clone()
            .lu()
            .solve(&self.gradient)
            .ok_or(OracleError::Singular("normal-equation"))
    }

    /// The KKT matrix in real block form. Unknowns are ordered
    /// `[Re du_0, Im du_0, ..., ds, Re lambda_0, Im lambda_0, ...]`.
    pub fn kkt_matrix(&self) -> DMatrix<f64> {
        let (n, k) = (self.n, self.n_sources());
        let dim = self.kkt_real_dim();
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let du0 = |s: usize| 2 * n * s;
        let ds0 = 2 * n * k;
        let la0 = |s: usize| ds0 + n + 2 * n * s;
        for s in 0..k {
            // F_s on both real and imaginary parts.
            for (row, &node) in self.receivers[s].iter().enumerate() {
                let w = self.weights[self.offsets[s] + row];
                m[(du0(s) + node, du0(s) + node)] += w * w;
                m[(du0(s) + n + node, du0(s) + n + node)] += w * w;
            }
            for r in 0..n {
                for c in 0..n {
                    // A^*: entry (r, c) is conj(A[c, r]).
                    let ah = self.a[(c, r)].conj();
                    m[(du0(s) + r, la0(s) + c)] = ah.re;
                    m[(du0(s) + r, la0(s) + n + c)] = -ah.im;
                    m[(du0(s) + n + r, la0(s) + c)] = ah.im;
                    m[(du0(s) + n + r, la0(s) + n + c)] = ah.re;
                    let a = self.a[(r, c)];
                    m[(la0(s) + r, du0(s) + c)] = a.re;
                    m[(la0(s) + r, du0(s) + n + c)] = -a.im;
                    m[(la0(s) + n + r, du0(s) + c)] = a.im;
                    m[(la0(s) + n + r, du0(s) + n + c)] = a.re;
                }
                let p = self.p[s][r];
                // -Re(conj(p) lambda) in the ds rows, -p ds in the lambda rows.
                m[(ds0 + r, la0(s) + r)] = -p.re;
                m[(ds0 + r, la0(s) + n + r)] = -p.im;
                m[(la0(s) + r, ds0 + r)] = -p.re;
                m[(la0(s) + n + r, ds0 + r)] = -p.im;
            }
        }
        for r in 0..n {
            m[(ds0 + r, ds0 + r)] = self.epsilon;
        }
        m
    }

    /// Right-hand side in the layout of [`Self::kkt_matrix`].
    pub fn kkt_rhs(&self) -> DVector<f64> {
        let (n, k) = (self.n, self.n_sources());
        let mut b = DVector::<f64>::zeros(self.kkt_real_dim());
        for s in 0..k {
            for (row, &node) in self.receivers[s].iter().enumerate() {
                let d = self.offsets[s] + row;
                let v = self.residual[d] * self.weights[d] * self.weights[d];
                b[2 * n * s + node] += v.re;
                b[2 * n * s + n + node] += v.im;
            }
        }
        for r in 0..n {
            b[2 * n * k + r] = -self.model_term[r];
        }
        b
    }

    /// Packs blocks into the real layout of [`Self::kkt_matrix`].
    pub fn pack(&self, x: &KktBlocks) -> DVector<f64> {
        let (n, k) = (self.n, self.n_sources());
        let mut v = DVector::<f64>::zeros(self.kkt_real_dim());
        for s in 0..k {
            for r in 0..n {
                v[2 * n * s + r] = x.du[s][r].re;
                v[2 * n * s + n + r] = x.du[s][r].im;
                v[2 * n * k + n + 2 * n * s + r] = x.lambda[s][r].re;
                v[2 * n * k + n + 2 * n * s + n + r] = x.lambda[s][r].im;
            }
        }
        v.rows_mut(2 * n * k, n).copy_from(&x.ds);
        v
    }

    pub fn unpack(&self, v: &DVector<f64>) -> KktBlocks {
        let (n, k) = (self.n, self.n_sources());
        let block = |start: usize| {
            DVector::from_iterator(n, (0..n).map(|r| C64::new(v[start + r], v[start + n + r])))
        };
        KktBlocks {
            du: (0..k).map(|s| block(2 * n * s)).collect(),
            ds: v.rows(2 * n * k, n).into_owned(),
            lambda: (0..k).map(|s| block(2 * n * k + n + 2 * n * s)).collect(),
        }
    }

    /// `M xi` with the dense KKT matrix.
    pub fn kkt_apply(&self, x: &KktBlocks) -> KktBlocks {
        self.unpack(&(self.kkt_matrix() * self.pack(x)))
    }

    /// Direct solve of the KKT system.
    pub fn kkt_solve(&self) -> Result<KktBlocks, OracleError> {
        let sol = self
            .kkt_matrix()
            .lu()
            .solve(&self.kkt_rhs())
            .ok_or(OracleError::Singular("KKT"))?;
        Ok(self.unpack(&sol))
    }

    /// `Q^* W^T W r` for source `s`, on the grid.
    pub fn weighted_residual_on_grid(&self, s: usize) -> DVector<C64> {
        let mut out = DVector::<C64>::zeros(self.n);
        for (row, &node) in self.receivers[s].iter().enumerate() {
            let d = self.offsets[s] + row;
            out[node] += self.residual[d] * self.weights[d] * self.weights[d];
        }
        out
    }

    /// `F_s` applied to a grid vector.
    pub fn apply_f(&self, s: usize, x: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::<C64>::zeros(self.n);
        for (row, &node) in self.receivers[s].iter().enumerate() {
            let w = self.weights[self.offsets[s] + row];
            out[node] += x[node] * w * w;
        }
        out
    }
}

/// Dense Jacobian `J = Q A^{-1} P` (rows source-major).
pub fn dense_jacobian(pb: &DenseProblem) -> Result<DMatrix<C64>, OracleError> {
    Ok(DenseInstance::new(pb)?.jacobian)
}

/// Direct solve of `(Re J^* W^T W J + eps I) ds = g`.
pub fn dense_normal_solve(pb: &DenseProblem) -> Result<DVector<f64>, OracleError> {
    DenseInstance::new(pb)?.normal_solve()
}

/// Direct solve of the KKT system.
pub fn dense_kkt_solve(pb: &DenseProblem) -> Result<KktBlocks, OracleError> {
    DenseInstance::new(pb)?.kkt_solve()
}
