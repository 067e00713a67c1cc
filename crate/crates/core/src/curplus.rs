//! CUR+ baseline: rank-r reconstruction from sampled rows, sampled
//! columns and optional extra random entries.
//!
//! The column factor comes from the rank-r SVD of the sampled columns,
//! the row factor from the sampled rows, and the core is fit by the
//! same gradient-descent machinery as the main solver, restricted to
//! the observed entries. Only observed entries of the input are ever
//! read; [`EntrySource`] exists so tests can enforce that.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descent::descend;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::DenseMatrix;
use crate::rng::derive_seed;
use crate::sampling::{omega_of_columns, sample_entries_uniform, ColumnSampler, EntryIndexSet};
use crate::tol;

/// Read-only access to matrix entries. The solver touches only the
/// entries its sampling plan observes.
pub trait EntrySource {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> f64;
}

impl EntrySource for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }
    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurVariant {
    Type1,
    Type2,
    Type3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurPlusSpec {
    pub d_rows: usize,
    pub d_cols: usize,
    pub extra_entries: usize,
    pub target_rank: usize,
    pub seed: u64,
    #[serde(default)]
    pub step_size: Option<f64>,
    pub max_iters: usize,
}

impl CurPlusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::Argument("target rank must be at least 1".into()));
        }
        if self.d_cols < self.target_rank {
            return Err(Error::Rank(format!(
                "{} sampled columns cannot span rank {}",
                self.d_cols, self.target_rank
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Total distinct observed entries for an n×m input: column entries
    /// plus row entries, minus the row/column overlap counted once, plus
    /// the extras (which are drawn outside rows and columns).
    pub fn sample_budget(&self, n: usize, m: usize) -> usize {
        n * self.d_cols + m * self.d_rows - self.d_rows * self.d_cols + self.extra_entries
    }
}

/// Build the sampling budgets used in the comparisons: Type 1 samples
/// d rows and d columns, Type 2 halves both, Type 3 halves both and
/// adds (d/2)² random entries so its budget matches pure column
/// sampling. Odd `d` is floored at d/2 with a logged note.
pub fn make_type(
    variant: CurVariant,
    n: usize,
    m: usize,
    d: usize,
    r: usize,
    seed: u64,
) -> Result<CurPlusSpec> {
    if !d.is_multiple_of(2) && variant != CurVariant::Type1 {
        log::warn!("odd d = {d}: row/column budgets floored to {}", d / 2);
    }
    let half = d / 2;
    let (d_rows, d_cols, extra) = match variant {
        CurVariant::Type1 => (d, d, 0),
        CurVariant::Type2 => (half, half, 0),
        CurVariant::Type3 => (half, half, half * half),
    };
    if d_cols < r {
        return Err(Error::Rank(format!(
            "{variant:?} with d = {d} samples {d_cols} columns, below target rank {r}"
        )));
    }
    if d_rows > n || d_cols > m {
        return Err(Error::Index(format!(
            "{variant:?} budget ({d_rows} rows, {d_cols} cols) exceeds a {n}x{m} matrix"
        )));
    }
    Ok(CurPlusSpec {
        d_rows,
        d_cols,
        extra_entries: extra,
        target_rank: r,
        seed,
        step_size: None,
        max_iters: 5000,
    })
}

#[derive(Debug, Clone)]
pub struct CurPlusModel {
    pub u_hat: DenseMatrix,
    pub v_hat: DenseMatrix,
    pub z_hat: DenseMatrix,
    pub m_hat: DenseMatrix,
    pub sample_budget: usize,
    pub iters: usize,
    pub trace: Vec<f64>,
}

impl CurPlusModel {
    pub fn save_dir(&self, dir: impl AsRef<Path>, spec: &CurPlusSpec) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        io::save_csv(&self.u_hat, dir.join("u_hat.csv"))?;
        io::save_csv(&self.v_hat, dir.join("v_hat.csv"))?;
        io::save_csv(&self.z_hat, dir.join("z_hat.csv"))?;
        io::save_csv(&self.m_hat, dir.join("m_hat.csv"))?;
        let meta = serde_json::json!({
            "solver": "cur+",
            "baseline": true,
            "spec": spec,
            "sample_budget": self.sample_budget,
            "iters": self.iters,
            "final_objective": self.trace.last(),
        });
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

/// The column sampler a CUR+ solve with this seed will draw. Exposed so
/// experiments can hand the identical columns to other methods for
/// paired comparisons.
pub fn planned_column_sampler(seed: u64, m: usize, d_cols: usize) -> Result<ColumnSampler> {
    ColumnSampler::uniform(m, d_cols, derive_seed(seed, "cur-cols"))
}

/// Reconstruct from entries of `mtx` observed through the sampling plan.
pub fn cur_solve<S: EntrySource>(mtx: &S, spec: &CurPlusSpec) -> Result<CurPlusModel> {
    solve_impl(mtx, spec, None)
}

/// CUR-H style hybrid: the row factor is estimated from rows of
/// `row_source` (e.g. a polynomial estimate) instead of true rows of the
/// input, so row entries of `mtx` are neither read nor counted in the
/// budget.
pub fn cur_solve_hybrid<S: EntrySource>(
    mtx: &S,
    spec: &CurPlusSpec,
    row_source: &DenseMatrix,
) -> Result<CurPlusModel> {
    solve_impl(mtx, spec, Some(row_source))
}

fn solve_impl<S: EntrySource>(
    mtx: &S,
    spec: &CurPlusSpec,
    row_source: Option<&DenseMatrix>,
) -> Result<CurPlusModel> {
    spec.validate()?;
    let (n, m) = (mtx.rows(), mtx.cols());
    let r = spec.target_rank;
    if let Some(src) = row_source {
        if (src.rows(), src.cols()) != (n, m) {
            return Err(Error::Shape {
                context: "cur_solve_hybrid".into(),
                expected: format!("{n}x{m}"),
                found: format!("{}x{}", src.rows(), src.cols()),
            });
        }
    }
    if spec.d_rows < r {
        return Err(Error::Rank(format!(
            "{} sampled rows cannot span rank {r}",
            spec.d_rows
        )));
    }
    if spec.d_cols > m || spec.d_rows > n {
        return Err(Error::Index(format!(
            "sampling plan ({} rows, {} cols) exceeds a {n}x{m} matrix",
            spec.d_rows, spec.d_cols
        )));
    }

    let col_sampler = planned_column_sampler(spec.seed, m, spec.d_cols)?;
    let row_sampler = ColumnSampler::uniform(n, spec.d_rows, derive_seed(spec.seed, "cur-rows"))?;
    let cols = col_sampler.indices();
    let rows = row_sampler.indices();

    // Observed blocks. For the hybrid mode the row block comes from the
    // caller-provided estimate and is not an observation of `mtx`.
    let col_block = DenseMatrix::from_fn(n, cols.len(), |i, j| mtx.entry(i, cols[j]));
    let row_block = match row_source {
        Some(src) => src.select_rows(rows)?,
        None => DenseMatrix::from_fn(rows.len(), m, |i, j| mtx.entry(rows[i], j)),
    };

    let observed_lines = {
        let col_cells = omega_of_columns(n, &col_sampler);
        let row_cells = {
            let pairs: Vec<(usize, usize)> = rows
                .iter()
                .flat_map(|&i| (0..m).map(move |j| (i, j)))
                .collect();
            EntryIndexSet::new(n, m, pairs)?
        };
        col_cells.union(&row_cells)?
    };
    let extra_set = sample_entries_uniform(
        n,
        m,
        spec.extra_entries,
        derive_seed(spec.seed, "cur-extra"),
        &observed_lines,
    )?;
    let extras: Vec<(usize, usize, f64)> = extra_set
        .pairs()
        .iter()
        .map(|&(i, j)| (i, j, mtx.entry(i, j)))
        .collect();

    let sample_budget = if row_source.is_some() {
        n * spec.d_cols + extras.len()
    } else {
        spec.sample_budget(n, m)
    };

    // Factors from the sampled blocks.
    let col_factors = col_block.svd_truncated(r)?;
    if col_factors.sigma[0] <= 0.0
        || col_factors.sigma[r - 1] <= tol::RANK_TOL * col_factors.sigma[0]
    {
        return Err(Error::Rank(format!(
            "sampled columns have rank below {r} (σ_{r} = {:.3e})",
            col_factors.sigma[r - 1]
        )));
    }
    let u_hat = col_factors.u;
    let row_factors = row_block.svd_truncated(r)?;
    if row_factors.sigma[0] <= 0.0
        || row_factors.sigma[r - 1] <= tol::RANK_TOL * row_factors.sigma[0]
    {
        return Err(Error::Rank(format!(
            "sampled rows have rank below {r} (σ_{r} = {:.3e})",
            row_factors.sigma[r - 1]
        )));
    }
    let v_hat = row_factors.v();

    // Core regression restricted to observed entries. Row and column
    // blocks are dense, so residuals are formed blockwise with the
    // row/column overlap subtracted once; in hybrid mode the row block
    // is not observed and does not enter the objective.
    let u_r = u_hat.select_rows(rows)?;
    let v_c = v_hat.select_rows(cols)?;
    let include_rows = row_source.is_none();

    let objective = |z: &DenseMatrix| -> f64 {
        let uz = u_hat.matmul(z);
        let res_c = col_block.sub(&uz.matmul(&v_c.transpose()));
        let mut f = frob_sq(&res_c);
        if include_rows {
            let res_r = row_block.sub(&u_r.matmul(&z.matmul(&v_hat.transpose())));
            let res_rc = {
                let urz = u_r.matmul(z);
                row_overlap(&col_block, rows).sub(&urz.matmul(&v_c.transpose()))
            };
            f += frob_sq(&res_r) - frob_sq(&res_rc);
        }
        for &(i, j, v) in &extras {
            let pred: f64 = (0..z.rows())
                .map(|t| {
                    (0..z.cols())
                        .map(|h| u_hat.get(i, t) * z.get(t, h) * v_hat.get(j, h))
                        .sum::<f64>()
                })
                .sum();
            let rr = v - pred;
            f += rr * rr;
        }
        f
    };
    let gradient = |z: &DenseMatrix| -> DenseMatrix {
        let uz = u_hat.matmul(z);
        let res_c = col_block.sub(&uz.matmul(&v_c.transpose()));
        let mut g = u_hat.transpose().matmul(&res_c).matmul(&v_c);
        if include_rows {
            let res_r = row_block.sub(&u_r.matmul(&z.matmul(&v_hat.transpose())));
            g = g.add(&u_r.transpose().matmul(&res_r).matmul(&v_hat));
            let res_rc = {
                let urz = u_r.matmul(z);
                row_overlap(&col_block, rows).sub(&urz.matmul(&v_c.transpose()))
            };
            g = g.sub(&u_r.transpose().matmul(&res_rc).matmul(&v_c));
        }
        for &(i, j, v) in &extras {
            let pred: f64 = (0..z.rows())
                .map(|t| {
                    (0..z.cols())
                        .map(|h| u_hat.get(i, t) * z.get(t, h) * v_hat.get(j, h))
                        .sum::<f64>()
                })
                .sum();
            let rr = v - pred;
            for t in 0..z.rows() {
                for h in 0..z.cols() {
                    let val = g.get(t, h) + rr * u_hat.get(i, t) * v_hat.get(j, h);
                    g.set(t, h, val);
                }
            }
        }
        g.scale(-2.0)
    };

    let step = match spec.step_size {
        Some(s) => s,
        None => {
            let su = u_hat.spectral_norm()?;
            let sv = v_hat.spectral_norm()?;
            1.0 / (2.0 * su * su * sv * sv)
        }
    };
    let z0 = DenseMatrix::zeros(r, r);
    let grad_tol = 1e-10 * objective(&z0).sqrt();
    let fit = descend(z0, objective, gradient, step, spec.max_iters, grad_tol)?;

    let z_hat = fit.estimate;
    let m_hat = u_hat.matmul(&z_hat).matmul(&v_hat.transpose());
    Ok(CurPlusModel {
        u_hat,
        v_hat,
        z_hat,
        m_hat,
        sample_budget,
        iters: fit.iters,
        trace: fit.trace,
    })
}

/// The rows of the column block that are also sampled rows; `rows`
/// indexes into the full matrix.
fn row_overlap(col_block: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    col_block
        .select_rows(rows)
        .expect("row indices validated against n")
}

/// The reference spectral-error bound for CUR+:
/// `8·σ²_{r+1}·(1 + 2mn)·(1 + (n+m)/d)`. `r` only names which tail
/// singular value is passed in.
pub fn cur_error_bound(m: usize, n: usize, d: usize, r: usize, sigma_r_plus_1: f64) -> f64 {
    debug_assert!(r >= 1 && d >= 1);
    let mn = (m * n) as f64;
    8.0 * sigma_r_plus_1 * sigma_r_plus_1 * (1.0 + 2.0 * mn) * (1.0 + (n + m) as f64 / d as f64)
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

    fn planted_low_rank(n: usize, m: usize, rank: usize, seed: u64) -> DenseMatrix {
        let l = datagen::normal_matrix(n, rank, seed, "cur-left");
        let r = datagen::normal_matrix(rank, m, seed, "cur-right");
        l.matmul(&r)
    }

    #[test]
    fn type_budgets_match_reference_numbers() {
        let n = 100;
        let t1 = make_type(CurVariant::Type1, n, n, 20, 5, 0).unwrap();
        let t2 = make_type(CurVariant::Type2, n, n, 20, 5, 0).unwrap();
        let t3 = make_type(CurVariant::Type3, n, n, 20, 5, 0).unwrap();
        assert_eq!(t1.sample_budget(n, n), 3600);
        assert_eq!(t2.sample_budget(n, n), 1900);
        assert_eq!(t3.sample_budget(n, n), 2000);
        assert_eq!((t1.d_rows, t1.d_cols, t1.extra_entries), (20, 20, 0));
        assert_eq!((t3.d_rows, t3.d_cols, t3.extra_entries), (10, 10, 100));
    }

    #[test]
    fn make_type_rejects_underdetermined_column_factor() {
        assert!(matches!(
            make_type(CurVariant::Type2, 100, 100, 8, 5, 0),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn full_observation_recovers_exact_rank() {
        let m = planted_low_rank(12, 12, 3, 5);
        let spec = CurPlusSpec {
            d_rows: 12,
            d_cols: 12,
            extra_entries: 0,
            target_rank: 3,
            seed: 0,
            step_size: None,
            max_iters: 20_000,
        };
        let model = cur_solve(&m, &spec).unwrap();
        let err = metrics::nmse(&model.m_hat, &m).unwrap();
        assert!(err < 1e-8, "NMSE {err}");
        assert_eq!(model.sample_budget, 144);
    }

    #[test]
    fn planted_type1_recovery() {
        let m = planted_low_rank(40, 40, 5, 3);
        let spec = make_type(CurVariant::Type1, 40, 40, 20, 5, 3).unwrap();
        let model = cur_solve(&m, &spec).unwrap();
        let err = metrics::nmse(&model.m_hat, &m).unwrap();
        assert!(err < 1e-6, "NMSE {err}");
    }

    #[test]
    fn error_bound_arithmetic() {
        assert_eq!(cur_error_bound(100, 100, 20, 5, 0.0), 0.0);
        let b = cur_error_bound(100, 100, 20, 5, 1.0);
        assert!((b - 1_760_088.0).abs() < 1e-6);
    }

    #[test]
    fn bound_contains_measured_error() {
        for seed in 0..20 {
            let m = planted_low_rank(25, 25, 8, 100 + seed);
            let r = 4;
            let spec = make_type(CurVariant::Type1, 25, 25, 12, r, seed).unwrap();
            let model = match cur_solve(&m, &spec) {
                Ok(model) => model,
                Err(Error::Rank(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            let tail = m.svd_full().unwrap().sigma[r];
            let bound = cur_error_bound(25, 25, 12, r, tail);
            let measured = metrics::spectral_sq_error(&model.m_hat, &m).unwrap();
            assert!(
                measured <= bound,
                "seed {seed}: measured {measured} above bound {bound}"
            );
        }
    }

    #[test]
    fn only_observed_entries_are_read() {
        use std::cell::RefCell;
        use std::collections::HashSet;

        struct Tracking<'a> {
            inner: &'a DenseMatrix,
            seen: RefCell<HashSet<(usize, usize)>>,
        }
        impl EntrySource for Tracking<'_> {
            fn rows(&self) -> usize {
                self.inner.rows()
            }
            fn cols(&self) -> usize {
                self.inner.cols()
            }
            fn entry(&self, i: usize, j: usize) -> f64 {
                self.seen.borrow_mut().insert((i, j));
                self.inner.get(i, j)
            }
        }

        let m = planted_low_rank(20, 20, 3, 9);
        let spec = make_type(CurVariant::Type3, 20, 20, 8, 3, 4).unwrap();
        let tracked = Tracking {
            inner: &m,
            seen: RefCell::new(HashSet::new()),
        };
        let model = cur_solve(&tracked, &spec).unwrap();
        let seen = tracked.seen.borrow();
        assert_eq!(
            seen.len(),
            model.sample_budget,
            "read {} distinct entries, budget says {}",
            seen.len(),
            model.sample_budget
        );
    }

    #[test]
    fn hybrid_rows_read_no_row_entries() {
        use std::cell::RefCell;
        use std::collections::HashSet;

        struct Tracking<'a> {
            inner: &'a DenseMatrix,
            seen: RefCell<HashSet<(usize, usize)>>,
        }
        impl EntrySource for Tracking<'_> {
            fn rows(&self) -> usize {
                self.inner.rows()
            }
            fn cols(&self) -> usize {
                self.inner.cols()
            }
            fn entry(&self, i: usize, j: usize) -> f64 {
                self.seen.borrow_mut().insert((i, j));
                self.inner.get(i, j)
            }
        }

        let m = planted_low_rank(16, 16, 3, 2);
        let estimate = m.clone(); // a perfect row estimate for the test
        let spec = CurPlusSpec {
            d_rows: 5,
            d_cols: 6,
            extra_entries: 0,
            target_rank: 3,
            seed: 7,
            step_size: None,
            max_iters: 20_000,
        };
        let tracked = Tracking {
            inner: &m,
            seen: RefCell::new(HashSet::new()),
        };
        let model = cur_solve_hybrid(&tracked, &spec, &estimate).unwrap();
        assert_eq!(model.sample_budget, 16 * 6);
        assert_eq!(tracked.seen.borrow().len(), 16 * 6);
        let err = metrics::nmse(&model.m_hat, &m).unwrap();
        assert!(err < 1e-6, "NMSE {err}");
    }
}
