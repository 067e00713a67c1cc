//! Three-stage solver for column-sampled matrix approximation with
//! polynomial side information.
//!
//! Given the sampled columns `A = M·Ψ`, a polynomial basis `S` and a
//! target rank `r`:
//!
//! 1. *Column space*: the left factor of the rank-r SVD of `A`.
//! 2. *Row space*: fit coefficients `Q̂` minimizing `‖A − Q̂·SΨ‖_F²` by
//!    gradient descent, then take the right factor of the rank-r SVD of
//!    `Q̂·S`.
//! 3. *Core*: fit `Ẑ` minimizing `‖A − U_A·Ẑ·V̂^TΨ‖_F²` by gradient
//!    descent and assemble `M̂ = U_A·Ẑ·V̂^T`.
//!
//! Both descents use the true objective gradients (so they descend), a
//! default step at the inverse Lipschitz constant of the gradient, and
//! enforced monotone traces.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::normal_matrix;
use crate::descent::{descend, DescentOutcome};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::DenseMatrix;
use crate::polybasis::PolyBasis;
use crate::sampling::ColumnSampler;
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpmaConfig {
    pub target_rank: usize,
    pub degree: usize,
    /// Descent step; `None` uses the inverse Lipschitz constant of the
    /// stage gradient (`1/(2‖SΨ‖₂²)` for the coefficient fit,
    /// `1/(2‖U_A‖₂²‖V̂^TΨ‖₂²)` for the core fit).
    #[serde(default)]
    pub step_size: Option<f64>,
    pub max_iters: usize,
    /// Stop when the gradient Frobenius norm falls below this; `None`
    /// uses `1e-10·‖A‖_F`.
    #[serde(default)]
    pub grad_tol: Option<f64>,
    /// Seed for the random coefficient initialization.
    pub seed: u64,
    /// Rescale basis rows to unit norm inside the coefficient fit (the
    /// estimate is mapped back, so only conditioning changes).
    #[serde(default)]
    pub normalize_basis: bool,
}

impl QpmaConfig {
    pub fn new(target_rank: usize, degree: usize, seed: u64) -> Self {
        Self {
            target_rank,
            degree,
            step_size: None,
            max_iters: 5000,
            grad_tol: None,
            seed,
            normalize_basis: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::Argument("target rank must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be at least 1".into()));
        }
        if let Some(s) = self.step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Argument(format!(
                    "step size must be positive, got {s}"
                )));
            }
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Argument(format!(
                    "gradient tolerance must be non-negative, got {t}"
                )));
            }
        }
        Ok(())
    }

    fn effective_grad_tol(&self, a: &DenseMatrix) -> f64 {
        self.grad_tol.unwrap_or(1e-10 * a.frobenius_norm())
    }
}

/// Fitted artifacts of one solve.
#[derive(Debug, Clone)]
pub struct QpmaModel {
    /// n×r estimated column space (orthonormal columns).
    pub u_a: DenseMatrix,
    /// n×(degree+1) estimated polynomial coefficients.
    pub q_hat: DenseMatrix,
    /// m×r estimated row space (orthonormal columns).
    pub v_qs: DenseMatrix,
    /// r×r core.
    pub z_hat: DenseMatrix,
    /// n×m reconstruction `U_A · Ẑ · V̂^T`.
    pub m_hat: DenseMatrix,
    pub iters_q: usize,
    pub iters_z: usize,
    pub trace_q: Vec<f64>,
    pub trace_z: Vec<f64>,
}

impl QpmaModel {
    /// Final coefficient-regression residual `‖A − Q̂·SΨ‖_F`; this is the
    /// constraint slack of the underlying constrained formulation,
    /// surfaced as a diagnostic.
    pub fn constraint_residual(&self) -> f64 {
        self.trace_q.last().map(|f| f.sqrt()).unwrap_or(f64::NAN)
    }

    /// Write the model as a directory of CSV matrices plus meta.json.
    pub fn save_dir(&self, dir: impl AsRef<Path>, cfg: &QpmaConfig) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        io::save_csv(&self.u_a, dir.join("u_a.csv"))?;
        io::save_csv(&self.q_hat, dir.join("q_hat.csv"))?;
        io::save_csv(&self.v_qs, dir.join("v_qs.csv"))?;
        io::save_csv(&self.z_hat, dir.join("z_hat.csv"))?;
        io::save_csv(&self.m_hat, dir.join("m_hat.csv"))?;
        let meta = serde_json::json!({
            "solver": "qpma",
            "config": cfg,
            "iters_q": self.iters_q,
            "iters_z": self.iters_z,
            "final_q_objective": self.trace_q.last(),
            "final_z_objective": self.trace_z.last(),
            "constraint_residual": self.constraint_residual(),
        });
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

/// Left factor of the rank-r SVD of `a`: the orthonormal basis
/// minimizing `‖(I − ŨŨ^T)·A·A^T‖₂`.
pub fn estimate_column_space(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    Ok(a.svd_truncated(r)?.u)
}

/// `‖A − Q·SΨ‖_F²`.
pub fn q_objective(q: &DenseMatrix, a: &DenseMatrix, s_psi: &DenseMatrix) -> Result<f64> {
    check_q_shapes(q, a, s_psi)?;
    Ok(frob_sq(&a.sub(&q.matmul(s_psi))))
}

/// Gradient of [`q_objective`] with respect to `Q`:
/// `−2·(A − Q·SΨ)·(SΨ)^T`.
pub fn q_gradient(q: &DenseMatrix, a: &DenseMatrix, s_psi: &DenseMatrix) -> Result<DenseMatrix> {
    check_q_shapes(q, a, s_psi)?;
    let residual = a.sub(&q.matmul(s_psi));
    Ok(residual.matmul(&s_psi.transpose()).scale(-2.0))
}

fn check_q_shapes(q: &DenseMatrix, a: &DenseMatrix, s_psi: &DenseMatrix) -> Result<()> {
    if q.cols() != s_psi.rows() || q.rows() != a.rows() || s_psi.cols() != a.cols() {
        return Err(Error::Shape {
            context: "coefficient regression".into(),
            expected: format!(
                "Q {}x{}, SΨ {}x{}",
                a.rows(),
                s_psi.rows(),
                s_psi.rows(),
                a.cols()
            ),
            found: format!(
                "Q {}x{}, SΨ {}x{}",
                q.rows(),
                q.cols(),
                s_psi.rows(),
                s_psi.cols()
            ),
        });
    }
    Ok(())
}

/// Fit the polynomial coefficients by gradient descent from a standard
/// normal initialization drawn from `cfg.seed`.
pub fn fit_q(a: &DenseMatrix, s_psi: &DenseMatrix, cfg: &QpmaConfig) -> Result<DescentOutcome> {
    cfg.validate()?;
    if s_psi.rows() != cfg.degree + 1 {
        return Err(Error::Shape {
            context: "fit_q".into(),
            expected: format!("{} basis rows (degree+1)", cfg.degree + 1),
            found: format!("{}", s_psi.rows()),
        });
    }
    let q0 = normal_matrix(a.rows(), s_psi.rows(), cfg.seed, "q-init");
    let step = match cfg.step_size {
        Some(s) => s,
        None => {
            let top = s_psi.spectral_norm()?;
            if top == 0.0 {
                return Err(Error::Rank("sampled basis SΨ is zero".into()));
            }
            1.0 / (2.0 * top * top)
        }
    };
    let grad_tol = cfg.effective_grad_tol(a);
    descend(
        q0,
        |q| frob_sq(&a.sub(&q.matmul(s_psi))),
        |q| {
            a.sub(&q.matmul(s_psi))
                .matmul(&s_psi.transpose())
                .scale(-2.0)
        },
        step,
        cfg.max_iters,
        grad_tol,
    )
}

/// Right factor of the rank-r SVD of `Q̂·S`. Rank deficiency below `r`
/// is an error rather than silently padded.
pub fn estimate_row_space(q_hat: &DenseMatrix, basis: &PolyBasis, r: usize) -> Result<DenseMatrix> {
    if q_hat.cols() != basis.matrix().rows() {
        return Err(Error::Shape {
            context: "estimate_row_space".into(),
            expected: format!("{} coefficient columns", basis.matrix().rows()),
            found: format!("{}", q_hat.cols()),
        });
    }
    let product = q_hat.matmul(basis.matrix());
    let factors = product.svd_truncated(r)?;
    let s1 = factors.sigma[0];
    if s1 <= 0.0 || factors.sigma[r - 1] <= tol::RANK_TOL * s1 {
        return Err(Error::Rank(format!(
            "estimated row matrix Q̂·S has rank below {r} (σ_{r} = {:.3e})",
            factors.sigma[r - 1]
        )));
    }
    Ok(factors.v())
}

/// `‖A − U_A·Z·(V̂^TΨ)‖_F²`; `v_qs_psi` is the r×d matrix of sampled
/// row-space rows, transposed.
pub fn z_objective(
    z: &DenseMatrix,
    a: &DenseMatrix,
    u_a: &DenseMatrix,
    v_qs_psi: &DenseMatrix,
) -> Result<f64> {
    check_z_shapes(z, a, u_a, v_qs_psi)?;
    Ok(frob_sq(&a.sub(&u_a.matmul(z).matmul(v_qs_psi))))
}

/// Gradient of [`z_objective`] with respect to `Z`:
/// `−2·U_A^T·(A − U_A·Z·V̂^TΨ)·(V̂^TΨ)^T`.
pub fn z_gradient(
    z: &DenseMatrix,
    a: &DenseMatrix,
    u_a: &DenseMatrix,
    v_qs_psi: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_z_shapes(z, a, u_a, v_qs_psi)?;
    let residual = a.sub(&u_a.matmul(z).matmul(v_qs_psi));
    Ok(u_a
        .transpose()
        .matmul(&residual)
        .matmul(&v_qs_psi.transpose())
        .scale(-2.0))
}

fn check_z_shapes(
    z: &DenseMatrix,
    a: &DenseMatrix,
    u_a: &DenseMatrix,
    v_qs_psi: &DenseMatrix,
) -> Result<()> {
    let r = u_a.cols();
    if z.rows() != r
        || z.cols() != v_qs_psi.rows()
        || u_a.rows() != a.rows()
        || v_qs_psi.cols() != a.cols()
    {
        return Err(Error::Shape {
            context: "core regression".into(),
            expected: format!(
                "Z {r}x{}, U {}x{r}, V^TΨ {}x{}",
                v_qs_psi.rows(),
                a.rows(),
                v_qs_psi.rows(),
                a.cols()
            ),
            found: format!(
                "Z {}x{}, U {}x{}, V^TΨ {}x{}",
                z.rows(),
                z.cols(),
                u_a.rows(),
                u_a.cols(),
                v_qs_psi.rows(),
                v_qs_psi.cols()
            ),
        });
    }
    Ok(())
}

/// Fit the core matrix by gradient descent from a zero initialization
/// (the objective is convex in `Z`, so the start only affects speed).
pub fn fit_z(
    a: &DenseMatrix,
    u_a: &DenseMatrix,
    v_qs_psi: &DenseMatrix,
    cfg: &QpmaConfig,
) -> Result<DescentOutcome> {
    cfg.validate()?;
    let r = u_a.cols();
    let z0 = DenseMatrix::zeros(r, v_qs_psi.rows());
    let step = match cfg.step_size {
        Some(s) => s,
        None => {
            let top_v = v_qs_psi.spectral_norm()?;
            let top_u = u_a.spectral_norm()?;
            if top_v == 0.0 || top_u == 0.0 {
                return Err(Error::Rank("core regression factors are zero".into()));
            }
            1.0 / (2.0 * top_v * top_v * top_u * top_u)
        }
    };
    let grad_tol = cfg.effective_grad_tol(a);
    descend(
        z0,
        |z| frob_sq(&a.sub(&u_a.matmul(z).matmul(v_qs_psi))),
        |z| {
            u_a.transpose()
                .matmul(&a.sub(&u_a.matmul(z).matmul(v_qs_psi)))
                .matmul(&v_qs_psi.transpose())
                .scale(-2.0)
        },
        step,
        cfg.max_iters,
        grad_tol,
    )
}

/// Run all three stages on the sampled columns `a = M·Ψ`.
pub fn solve(
    a: &DenseMatrix,
    sampler: &ColumnSampler,
    basis: &PolyBasis,
    cfg: &QpmaConfig,
) -> Result<QpmaModel> {
    cfg.validate()?;
    if a.cols() != sampler.len() {
        return Err(Error::Shape {
            context: "solve".into(),
            expected: format!("{} sampled columns", sampler.len()),
            found: format!("{}", a.cols()),
        });
    }
    if basis.points() != sampler.m() {
        return Err(Error::Shape {
            context: "solve".into(),
            expected: format!("basis over {} grid points", sampler.m()),
            found: format!("{}", basis.points()),
        });
    }
    if basis.degree() != cfg.degree {
        return Err(Error::Argument(format!(
            "config degree {} does not match basis degree {}",
            cfg.degree,
            basis.degree()
        )));
    }
    if cfg.target_rank > sampler.len() {
        return Err(Error::Rank(format!(
            "target rank {} exceeds the {} sampled columns",
            cfg.target_rank,
            sampler.len()
        )));
    }

    let r = cfg.target_rank;
    let u_a = estimate_column_space(a, r).map_err(Error::stage("column-space estimation"))?;

    // Optional row preconditioning of the basis: fit in the scaled
    // coordinates, then map the coefficients back.
    let s_psi = basis.sampled(sampler)?;
    let (s_psi_work, row_scales) = if cfg.normalize_basis {
        let norms = basis.row_norms();
        let scaled = DenseMatrix::from_fn(s_psi.rows(), s_psi.cols(), |p, j| {
            let nrm = norms[p];
            if nrm > 0.0 {
                s_psi.get(p, j) / nrm
            } else {
                s_psi.get(p, j)
            }
        });
        (scaled, Some(norms))
    } else {
        (s_psi, None)
    };

    let fit = fit_q(a, &s_psi_work, cfg).map_err(Error::stage("coefficient regression"))?;
    let q_hat = match &row_scales {
        Some(norms) => DenseMatrix::from_fn(fit.estimate.rows(), fit.estimate.cols(), |i, p| {
            let nrm = norms[p];
            if nrm > 0.0 {
                fit.estimate.get(i, p) / nrm
            } else {
                fit.estimate.get(i, p)
            }
        }),
        None => fit.estimate.clone(),
    };

    let v_qs =
        estimate_row_space(&q_hat, basis, r).map_err(Error::stage("row-space estimation"))?;
    let v_qs_psi = v_qs.select_rows(sampler.indices())?.transpose();

    let fit_core = fit_z(a, &u_a, &v_qs_psi, cfg).map_err(Error::stage("core regression"))?;
    let z_hat = fit_core.estimate;
    let m_hat = u_a.matmul(&z_hat).matmul(&v_qs.transpose());

    Ok(QpmaModel {
        u_a,
        q_hat,
        v_qs,
        z_hat,
        m_hat,
        iters_q: fit.iters,
        iters_z: fit_core.iters,
        trace_q: fit.trace,
        trace_z: fit_core.trace,
    })
}

fn frob_sq(m: &DenseMatrix) -> f64 {
    let f = m.frobenius_norm();
    f * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;
    use crate::metrics;
    use crate::polybasis::default_grid;
    use crate::sampling::sample_columns;

    fn planted(n: usize, m: usize, degree: usize, sigma: f64, seed: u64) -> datagen::Instance {
        datagen::generate(&datagen::SyntheticSpec::new(n, m, degree, sigma, seed)).unwrap()
    }

    #[test]
    fn column_space_of_single_vector() {
        let a = DenseMatrix::from_vec(3, 1, vec![0.0, 2.0, 0.0]).unwrap();
        let u = estimate_column_space(&a, 1).unwrap();
        assert!((u.get(1, 0).abs() - 1.0).abs() < 1e-12);
        assert!(u.get(0, 0).abs() < 1e-12 && u.get(2, 0).abs() < 1e-12);
    }

    #[test]
    fn column_space_picks_dominant_direction() {
        // orthogonal columns with norms 3 and 1
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let u = estimate_column_space(&a, 1).unwrap();
        assert!((u.get(0, 0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn column_space_residual_matches_tail_singular_value() {
        let a = datagen::normal_matrix(8, 4, 9, "test-a");
        let r = 2;
        let u = estimate_column_space(&a, r).unwrap();
        let p = crate::matrix::projector(&u).unwrap();
        let aat = a.matmul(&a.transpose());
        let residual = aat.sub(&p.matmul(&aat));
        let full = a.svd_full().unwrap();
        let expected = full.sigma[r] * full.sigma[r];
        assert!((residual.spectral_norm().unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn q_objective_reference_points() {
        let inst = planted(6, 8, 2, 0.0, 3);
        let sampler = ColumnSampler::uniform(8, 5, 11).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let s_psi = inst.s.sampled(&sampler).unwrap();
        assert_eq!(q_objective(&inst.q_true, &a, &s_psi).unwrap(), 0.0);
        let zero = DenseMatrix::zeros(6, 3);
        let f = a.frobenius_norm();
        assert!((q_objective(&zero, &a, &s_psi).unwrap() - f * f).abs() < 1e-12 * f * f);
    }

    #[test]
    fn q_objective_of_perturbation_expands_algebraically() {
        let inst = planted(5, 7, 2, 0.0, 4);
        let sampler = ColumnSampler::uniform(7, 4, 2).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let s_psi = inst.s.sampled(&sampler).unwrap();
        let delta = datagen::normal_matrix(5, 3, 8, "delta");
        let delta = delta.scale(1.0 / delta.frobenius_norm());
        let q = inst.q_true.add(&delta);
        let expected = {
            let d = delta.matmul(&s_psi).frobenius_norm();
            d * d
        };
        let got = q_objective(&q, &a, &s_psi).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected.max(1.0));
    }

    #[test]
    fn fit_q_reaches_least_squares_solution() {
        // well-spread grid keeps the regression well conditioned
        let grid = vec![0.2, 0.9, 1.7, 2.4, 3.1];
        let basis = PolyBasis::new(grid, 1).unwrap();
        let q_true =
            DenseMatrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![2.0, 0.0]]).unwrap();
        let a = q_true.matmul(basis.matrix());
        let mut cfg = QpmaConfig::new(2, 1, 5);
        cfg.max_iters = 20_000;
        cfg.grad_tol = Some(0.0);
        let fit = fit_q(&a, basis.matrix(), &cfg).unwrap();
        let obj = q_objective(&fit.estimate, &a, basis.matrix()).unwrap();
        let scale = a.frobenius_norm().powi(2);
        assert!(obj < 1e-16 * scale, "objective {obj} vs scale {scale}");

        // normal-equations oracle through the independent Jacobi SVD
        let s_psi = basis.matrix();
        let gram = s_psi.matmul(&s_psi.transpose());
        let f = gram.svd_jacobi().unwrap();
        let pinv = {
            let scaled = DenseMatrix::from_fn(f.sigma.len(), f.vt.cols(), |i, j| {
                f.vt.get(i, j) / f.sigma[i]
            });
            scaled.transpose().matmul(&f.u.transpose())
        };
        let q_star = a.matmul(&s_psi.transpose()).matmul(&pinv);
        assert!(fit.estimate.sub(&q_star).max_abs() < 1e-7);
    }

    #[test]
    fn zero_iteration_budget_is_rejected() {
        let mut cfg = QpmaConfig::new(2, 1, 0);
        cfg.max_iters = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let inst = planted(4, 6, 2, 0.01, 6);
        let sampler = ColumnSampler::uniform(6, 5, 3).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let s_psi = inst.s.sampled(&sampler).unwrap();

        for point in 0..20 {
            let q = datagen::normal_matrix(4, 3, 100 + point, "grad-q");
            let analytic = q_gradient(&q, &a, &s_psi).unwrap();
            let fd = central_difference(&q, 1e-6, |x| q_objective(x, &a, &s_psi).unwrap());
            let rel = analytic.sub(&fd).frobenius_norm() / analytic.frobenius_norm().max(1e-12);
            assert!(rel < 1e-5, "point {point}: ∇Q rel error {rel}");
        }

        let u_a = estimate_column_space(&a, 2).unwrap();
        let v_psi = datagen::normal_matrix(2, 5, 55, "grad-v");
        for point in 0..20 {
            let z = datagen::normal_matrix(2, 2, 200 + point, "grad-z");
            let analytic = z_gradient(&z, &a, &u_a, &v_psi).unwrap();
            let fd = central_difference(&z, 1e-6, |x| z_objective(x, &a, &u_a, &v_psi).unwrap());
            let rel = analytic.sub(&fd).frobenius_norm() / analytic.frobenius_norm().max(1e-12);
            assert!(rel < 1e-5, "point {point}: ∇Z rel error {rel}");
        }
    }

    pub(crate) fn central_difference<F: Fn(&DenseMatrix) -> f64>(
        x: &DenseMatrix,
        h: f64,
        f: F,
    ) -> DenseMatrix {
        DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
            let mut plus = x.clone();
            plus.set(i, j, x.get(i, j) + h);
            let mut minus = x.clone();
            minus.set(i, j, x.get(i, j) - h);
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
    }

    #[test]
    fn row_space_recovery_in_noiseless_case() {
        let inst = planted(10, 12, 3, 0.0, 2);
        let r = 4; // degree + 1
        let v_qs = estimate_row_space(&inst.q_true, &inst.s, r).unwrap();
        let qs = inst.qs();
        let v_true = qs.svd_truncated(r).unwrap().v();
        let p1 = crate::matrix::projector(&v_qs).unwrap();
        let p2 = crate::matrix::projector(&v_true).unwrap();
        assert!(p1.sub(&p2).frobenius_norm() < 1e-8);
    }

    #[test]
    fn row_space_of_zero_coefficients_is_rank_error() {
        let basis = PolyBasis::new(default_grid(6), 2).unwrap();
        let zero = DenseMatrix::zeros(5, 3);
        assert!(matches!(
            estimate_row_space(&zero, &basis, 2),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn row_space_rank_one() {
        let basis = PolyBasis::new(vec![1.0, 2.0, 4.0], 0).unwrap();
        let q = DenseMatrix::from_vec(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let v = estimate_row_space(&q, &basis, 1).unwrap();
        // right singular vector of a rank-1 product with all-ones basis row
        let expect = 1.0 / 3.0_f64.sqrt();
        for i in 0..3 {
            assert!((v.get(i, 0).abs() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_z_matches_pseudo_inverse_solution() {
        let inst = planted(8, 10, 2, 0.01, 12);
        let sampler = ColumnSampler::uniform(10, 8, 9).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let r = 3;
        let u_a = estimate_column_space(&a, r).unwrap();
        let v_qs = inst.qs().svd_truncated(r).unwrap().v();
        let v_psi = v_qs.select_rows(sampler.indices()).unwrap().transpose();

        let mut cfg = QpmaConfig::new(r, 2, 1);
        cfg.max_iters = 50_000;
        cfg.grad_tol = Some(1e-13);
        let fit = fit_z(&a, &u_a, &v_psi, &cfg).unwrap();

        // Z* = U^T A (V^TΨ)^+ via the independent Jacobi path
        let f = v_psi.svd_jacobi().unwrap();
        let pinv = {
            let scaled = DenseMatrix::from_fn(f.sigma.len(), f.vt.cols(), |i, j| {
                f.vt.get(i, j) / f.sigma[i]
            });
            scaled.transpose().matmul(&f.u.transpose())
        };
        let z_star = u_a.transpose().matmul(&a).matmul(&pinv);
        assert!(
            fit.estimate.sub(&z_star).frobenius_norm() < 1e-8,
            "difference {}",
            fit.estimate.sub(&z_star).frobenius_norm()
        );
    }

    #[test]
    fn fit_z_recovers_planted_core() {
        let u = datagen::normal_matrix(7, 2, 3, "u").svd_full().unwrap().u;
        let v_psi = {
            let v = datagen::normal_matrix(5, 2, 4, "v").svd_full().unwrap().u;
            v.transpose()
        };
        let z0 = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let a = u.matmul(&z0).matmul(&v_psi);
        let mut cfg = QpmaConfig::new(2, 0, 0);
        cfg.max_iters = 20_000;
        cfg.grad_tol = Some(1e-14);
        let fit = fit_z(&a, &u, &v_psi, &cfg).unwrap();
        assert!(fit.estimate.sub(&z0).frobenius_norm() < 1e-8);
    }

    #[test]
    fn divergence_is_detected() {
        let inst = planted(5, 6, 1, 0.0, 1);
        let sampler = ColumnSampler::uniform(6, 4, 1).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let s_psi = inst.s.sampled(&sampler).unwrap();
        let mut cfg = QpmaConfig::new(2, 1, 0);
        cfg.step_size = Some(1e3);
        assert!(matches!(
            fit_q(&a, &s_psi, &cfg),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn solve_noiseless_planted_recovers_exactly() {
        let inst = planted(30, 30, 3, 0.0, 1);
        let sampler = ColumnSampler::uniform(30, 7, 2).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let cfg = QpmaConfig::new(4, 3, 11);
        let model = solve(&a, &sampler, &inst.s, &cfg).unwrap();
        let err = metrics::nmse(&model.m_hat, &inst.m_true).unwrap();
        assert!(err < 1e-6, "NMSE {err}");
        // rank of the estimate never exceeds the target
        let sv = model.m_hat.singular_values().unwrap();
        assert!(sv[4] < 1e-10 * sv[0].max(1e-300));
    }

    #[test]
    fn solve_labels_the_failing_stage() {
        // a degree-1 basis caps the rank of Q̂·S at 2, so asking for
        // rank 3 must fail inside row-space estimation
        let inst = planted(10, 12, 1, 0.0, 3);
        let sampler = ColumnSampler::uniform(12, 5, 2).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let cfg = QpmaConfig::new(3, 1, 1);
        match solve(&a, &sampler, &inst.s, &cfg) {
            Err(Error::Stage { stage, source }) => {
                assert_eq!(stage, "row-space estimation");
                assert!(matches!(*source, Error::Rank(_)));
            }
            other => panic!("expected a stage-labeled rank error, got {other:?}"),
        }
    }

    #[test]
    fn model_invariants_hold() {
        let inst = planted(14, 16, 2, 0.01, 6);
        let sampler = ColumnSampler::uniform(16, 7, 4).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let model = solve(&a, &sampler, &inst.s, &QpmaConfig::new(3, 2, 2)).unwrap();
        assert!(model.u_a.orthonormality_deviation() < tol::TOL_ORTH);
        assert!(model.v_qs.orthonormality_deviation() < tol::TOL_ORTH);
        let product = model
            .u_a
            .matmul(&model.z_hat)
            .matmul(&model.v_qs.transpose());
        assert_eq!(model.m_hat, product);
        assert!(model.constraint_residual().is_finite());
    }

    #[test]
    fn solve_rejects_rank_above_sample_count() {
        let inst = planted(10, 12, 2, 0.0, 5);
        let sampler = ColumnSampler::uniform(12, 3, 5).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let cfg = QpmaConfig::new(4, 2, 0);
        assert!(matches!(
            solve(&a, &sampler, &inst.s, &cfg),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn solve_is_deterministic() {
        let inst = planted(12, 14, 2, 0.05, 8);
        let sampler = ColumnSampler::uniform(14, 6, 3).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let cfg = QpmaConfig::new(3, 2, 21);
        let m1 = solve(&a, &sampler, &inst.s, &cfg).unwrap();
        let m2 = solve(&a, &sampler, &inst.s, &cfg).unwrap();
        assert_eq!(m1.m_hat, m2.m_hat);
        assert_eq!(m1.trace_q, m2.trace_q);
    }

    #[test]
    fn normalize_basis_changes_conditioning_not_answer() {
        let inst = planted(16, 20, 3, 0.0, 13);
        let sampler = ColumnSampler::uniform(20, 8, 7).unwrap();
        let a = sample_columns(&inst.m_true, &sampler).unwrap();
        let mut cfg = QpmaConfig::new(4, 3, 17);
        cfg.max_iters = 8000;
        let plain = solve(&a, &sampler, &inst.s, &cfg).unwrap();
        cfg.normalize_basis = true;
        let scaled = solve(&a, &sampler, &inst.s, &cfg).unwrap();
        let e1 = metrics::nmse(&plain.m_hat, &inst.m_true).unwrap();
        let e2 = metrics::nmse(&scaled.m_hat, &inst.m_true).unwrap();
        assert!(e1 < 1e-6 && e2 < 1e-6, "plain {e1}, normalized {e2}");
    }
}
