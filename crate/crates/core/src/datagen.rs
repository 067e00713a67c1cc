//! Synthetic instance generation and matrix file ingestion.
//!
//! An instance is `M = Q·S + E` where `Q` has i.i.d. standard normal
//! entries, `S` is the polynomial basis over a coordinate grid and `E`
//! is noise. Noise is either dense Gaussian (entries `N(0, σ²)`, which
//! makes `M` full rank) or a rank-structured perturbation for
//! experiments that control the true rank separately from the degree.
//!
//! Randomness: ChaCha8 streams derived from `(seed, role)`; see
//! [`crate::rng`]. Generation is bitwise deterministic per seed.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::polybasis::{default_grid, PolyBasis};
use crate::rng;

pub use crate::io::{load_csv, save_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Dense i.i.d. Gaussian entries with standard deviation σ.
    DenseGaussian,
    /// Rank-k perturbation `(σ/√k)·L·R^T` with standard normal factors,
    /// scaled so entries have standard deviation σ.
    RankStructured { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub degree: usize,
    /// Coordinate grid; `None` means the default grid for `m` points.
    pub grid: Option<Vec<f64>>,
    pub q_seed: u64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
    pub noise_mode: NoiseMode,
}

impl SyntheticSpec {
    pub fn new(n: usize, m: usize, degree: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            degree,
            grid: None,
            q_seed: seed,
            noise_sigma: sigma,
            noise_seed: seed,
            noise_mode: NoiseMode::DenseGaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Argument("dimensions must be at least 1".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Argument(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if let NoiseMode::RankStructured { k } = self.noise_mode {
            if k == 0 || k > self.n.min(self.m) {
                return Err(Error::Argument(format!(
                    "structured noise rank {k} outside 1..={}",
                    self.n.min(self.m)
                )));
            }
        }
        if let Some(grid) = &self.grid {
            if grid.len() != self.m {
                return Err(Error::Argument(format!(
                    "grid has {} points but m = {}",
                    grid.len(),
                    self.m
                )));
            }
        }
        Ok(())
    }

    /// Rank proxy recorded in experiment outputs: the structural rank of
    /// the instance (degree+1 for noiseless data, full for dense noise,
    /// degree+1+k for structured noise), capped by the dimensions.
    pub fn rank_proxy(&self) -> usize {
        let cap = self.n.min(self.m);
        if self.noise_sigma == 0.0 {
            return (self.degree + 1).min(cap);
        }
        match self.noise_mode {
            NoiseMode::DenseGaussian => cap,
            NoiseMode::RankStructured { k } => (self.degree + 1 + k).min(cap),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub m_true: DenseMatrix,
    pub q_true: DenseMatrix,
    pub s: PolyBasis,
    pub e_true: DenseMatrix,
    pub spec: SyntheticSpec,
}

impl Instance {
    /// The noiseless product `Q·S`.
    pub fn qs(&self) -> DenseMatrix {
        self.q_true.matmul(self.s.matrix())
    }
}

/// Generate an instance from its spec; deterministic per seeds.
pub fn generate(spec: &SyntheticSpec) -> Result<Instance> {
    spec.validate()?;
    let grid = match &spec.grid {
        Some(g) => g.clone(),
        None => default_grid(spec.m),
    };
    let s = PolyBasis::new(grid, spec.degree)?;

    let q_true = normal_matrix(spec.n, spec.degree + 1, spec.q_seed, "q");

    let e_true = if spec.noise_sigma == 0.0 {
        DenseMatrix::zeros(spec.n, spec.m)
    } else {
        match spec.noise_mode {
            NoiseMode::DenseGaussian => {
                normal_matrix(spec.n, spec.m, spec.noise_seed, "noise").scale(spec.noise_sigma)
            }
            NoiseMode::RankStructured { k } => {
                let l = normal_matrix(spec.n, k, spec.noise_seed, "noise-left");
                let r = normal_matrix(k, spec.m, spec.noise_seed, "noise-right");
                l.matmul(&r).scale(spec.noise_sigma / (k as f64).sqrt())
            }
        }
    };

    let m_true = q_true.matmul(s.matrix()).add(&e_true);
    Ok(Instance {
        m_true,
        q_true,
        s,
        e_true,
        spec: spec.clone(),
    })
}

/// Matrix with i.i.d. standard normal entries from the given stream.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64, role: &str) -> DenseMatrix {
    let mut r = rng::stream(seed, role);
    DenseMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}
