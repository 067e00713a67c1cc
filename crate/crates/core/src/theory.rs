//! Diagnostics for the analysis quantities: incoherence, singular-value
//! gaps, subspace residuals, canonical angles, the explicit core-fit
//! Hessian and the spectral-error bound evaluators. These make the
//! guarantees checkable on concrete instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::qpma::QpmaModel;
use crate::sampling::ColumnSampler;
use crate::tol;

/// Rank must stay small for the explicit r²×r² Hessian.
pub const HESSIAN_RANK_GUARD: usize = 12;

/// Incoherence of `x` at rank `r`: the larger of
/// `max_i (n/r)·‖uᵢ‖²` and `max_j (m/r)·‖vⱼ‖²` over the rows of the
/// rank-r singular factors. Requires `x` to actually have rank ≥ r.
pub fn incoherence(x: &DenseMatrix, r: usize) -> Result<f64> {
    let f = x.svd_truncated(r)?;
    if f.sigma[0] <= 0.0 || f.sigma[r - 1] <= tol::RANK_TOL * f.sigma[0] {
        return Err(Error::Rank(format!(
            "matrix rank is below {r}; incoherence is undefined"
        )));
    }
    let n = x.rows() as f64;
    let m = x.cols() as f64;
    let u_max = max_row_norm_sq(&f.u);
    let v = f.v();
    let v_max = max_row_norm_sq(&v);
    Ok(((n / r as f64) * u_max).max((m / r as f64) * v_max))
}

fn max_row_norm_sq(x: &DenseMatrix) -> f64 {
    (0..x.rows())
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
}

/// The raw gap value: `min( min_{i,j} |σᵢ(Σ_M) − σⱼ(Σ_{QS,⊥})|,
/// min σ(Σ_M) )`. May be non-positive; see [`delta_gap`].
pub fn delta_gap_raw(sigma_m_top: &[f64], sigma_qs_perp: &[f64]) -> f64 {
    let min_top = sigma_m_top.iter().copied().fold(f64::INFINITY, f64::min);
    let min_pair = sigma_m_top
        .iter()
        .flat_map(|&a| sigma_qs_perp.iter().map(move |&b| (a - b).abs()))
        .fold(f64::INFINITY, f64::min);
    min_top.min(min_pair)
}

/// The singular-value separation both assumptions require. A
/// non-positive gap means the perturbation bounds are vacuous for this
/// instance and is reported as a violation.
pub fn delta_gap(sigma_m_top: &[f64], sigma_qs_perp: &[f64]) -> Result<f64> {
    if sigma_m_top.is_empty() {
        return Err(Error::Argument(
            "need at least one top singular value".into(),
        ));
    }
    let delta = delta_gap_raw(sigma_m_top, sigma_qs_perp);
    if delta <= 0.0 {
        return Err(Error::AssumptionViolation(format!(
            "singular-value gap δ = {delta:.3e} is not positive"
        )));
    }
    Ok(delta)
}

/// The two subspace residuals of the rank-r factors of `m` against the
/// unperturbed product `qs`:
/// `R = QS·V_M − U_M·Σ_M` and `S = (QS)^T·U_M − V_M·Σ_M`.
pub fn wedin_residuals(
    qs: &DenseMatrix,
    m: &DenseMatrix,
    r: usize,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if (qs.rows(), qs.cols()) != (m.rows(), m.cols()) {
        return Err(Error::Shape {
            context: "wedin_residuals".into(),
            expected: format!("{}x{}", m.rows(), m.cols()),
            found: format!("{}x{}", qs.rows(), qs.cols()),
        });
    }
    let f = m.svd_truncated(r)?;
    let v_m = f.v();
    let u_sigma = scale_cols(&f.u, &f.sigma);
    let v_sigma = scale_cols(&v_m, &f.sigma);
    let r_resid = qs.matmul(&v_m).sub(&u_sigma);
    let s_resid = qs.transpose().matmul(&f.u).sub(&v_sigma);
    Ok((r_resid, s_resid))
}

fn scale_cols(x: &DenseMatrix, scales: &[f64]) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) * scales[j])
}

/// Canonical angles between two orthonormal column spans: `acos` of the
/// singular values of `v1^T·v2`, clamped into [0, 1] before the arccos.
/// Returned ascending in angle.
pub fn canonical_angles(v1: &DenseMatrix, v2: &DenseMatrix) -> Result<Vec<f64>> {
    if (v1.rows(), v1.cols()) != (v2.rows(), v2.cols()) {
        return Err(Error::Shape {
            context: "canonical_angles".into(),
            expected: format!("{}x{}", v1.rows(), v1.cols()),
            found: format!("{}x{}", v2.rows(), v2.cols()),
        });
    }
    for v in [v1, v2] {
        let dev = v.orthonormality_deviation();
        if dev > tol::TOL_ORTH {
            return Err(Error::Orthonormality { deviation: dev });
        }
    }
    let overlap = v1.transpose().matmul(v2);
    let gammas = overlap.singular_values()?;
    Ok(gammas
        .into_iter()
        .map(|g| g.clamp(0.0, 1.0).acos())
        .collect())
}

/// `‖sin Θ‖_F` for a list of canonical angles.
pub fn sin_theta_frobenius(angles: &[f64]) -> f64 {
    angles.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt()
}

/// Explicit Hessian of the observed-entry core objective over the
/// column-sampled entry set: with `u` the n×r column factor and
/// `v_sampled` the d×r block of row-space rows at the sampled columns,
///
/// `H = 2·Σ_{i∈[n], j∈C} w·w^T`, `w = vec(uᵢ^T·v_j) ∈ R^{r²}`
///
/// (row-major vec). Positive semidefinite and symmetric by construction.
#[allow(clippy::needless_range_loop)]
pub fn hessian_of_f(u: &DenseMatrix, v_sampled: &DenseMatrix) -> Result<DenseMatrix> {
    let r = u.cols();
    if v_sampled.cols() != r {
        return Err(Error::Shape {
            context: "hessian_of_f".into(),
            expected: format!("{r} columns"),
            found: format!("{}", v_sampled.cols()),
        });
    }
    if r > HESSIAN_RANK_GUARD {
        return Err(Error::Size(format!(
            "explicit Hessian guard: rank {r} exceeds {HESSIAN_RANK_GUARD}"
        )));
    }
    let rr = r * r;
    let mut h = DenseMatrix::zeros(rr, rr);
    let mut w = vec![0.0; rr];
    for i in 0..u.rows() {
        let urow = u.row(i);
        for jj in 0..v_sampled.rows() {
            let vrow = v_sampled.row(jj);
            for t in 0..r {
                for hh in 0..r {
                    w[t * r + hh] = urow[t] * vrow[hh];
                }
            }
            for a in 0..rr {
                let wa = 2.0 * w[a];
                if wa == 0.0 {
                    continue;
                }
                for b in 0..rr {
                    let val = h.get(a, b) + wa * w[b];
                    h.set(a, b, val);
                }
            }
        }
    }
    Ok(h)
}

/// Smallest eigenvalue of a symmetric PSD matrix (via its smallest
/// singular value).
pub fn min_eigenvalue_psd(h: &DenseMatrix) -> Result<f64> {
    let sv = h.singular_values()?;
    Ok(sv.last().copied().unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundVariant {
    /// The original bound with the R/S residual term.
    Old,
    /// The revised bound phrased directly in `‖E‖_F`; the default.
    New,
}

/// Scalar inputs to the spectral-error bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    pub sigma1: f64,
    pub sigma_r_plus_1: f64,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub r_resid_f: f64,
    pub s_resid_f: f64,
    pub e_f: f64,
    pub delta: f64,
    /// `‖V̂_M^T·V̂_QS − I_r‖_F`.
    pub v_mismatch_f: f64,
}

/// Term-by-term value of a bound evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub variant: BoundVariant,
    pub total: f64,
    /// `σ²_{r+1}·(2 + 8m/d)·(1 + (n+m)/d)`.
    pub tail_term: f64,
    /// `4σ₁²` in the old variant, absent (zero) in the new one.
    pub top_term: f64,
    /// Residual term: `σ₁²·(12+8m/d)·(‖R‖²+‖S‖²)/δ²` (old) or
    /// `σ₁²·(4+16m/d)·(‖E‖²/δ² + 2√2·‖E‖/δ)` (new).
    pub residual_term: f64,
    /// `(4m/d)·‖V̂_M^T·V̂_QS − I_r‖_F²`.
    pub mismatch_term: f64,
}

/// Evaluate the squared-spectral-error bound.
pub fn spectral_error_bound(inputs: &BoundInputs, variant: BoundVariant) -> Result<BoundBreakdown> {
    if inputs.delta <= 0.0 {
        return Err(Error::AssumptionViolation(format!(
            "bound requires δ > 0, got {}",
            inputs.delta
        )));
    }
    let m = inputs.m as f64;
    let n = inputs.n as f64;
    let d = inputs.d as f64;
    let s1_sq = inputs.sigma1 * inputs.sigma1;
    let tail_term = inputs.sigma_r_plus_1.powi(2) * (2.0 + 8.0 * m / d) * (1.0 + (n + m) / d);
    let mismatch_term = (4.0 * m / d) * inputs.v_mismatch_f * inputs.v_mismatch_f;
    let (top_term, residual_term) = match variant {
        BoundVariant::Old => {
            let res = (inputs.r_resid_f.powi(2) + inputs.s_resid_f.powi(2))
                / (inputs.delta * inputs.delta);
            (4.0 * s1_sq, s1_sq * (12.0 + 8.0 * m / d) * res)
        }
        BoundVariant::New => {
            let res = inputs.e_f.powi(2) / (inputs.delta * inputs.delta)
                + 2.0 * 2.0_f64.sqrt() * inputs.e_f / inputs.delta;
            (0.0, s1_sq * (4.0 + 16.0 * m / d) * res)
        }
    };
    Ok(BoundBreakdown {
        variant,
        total: tail_term + top_term + residual_term + mismatch_term,
        tail_term,
        top_term,
        residual_term,
        mismatch_term,
    })
}

/// Sample-count floor `⌈max(7μr(t₁+ln r), 7μ̂²r²(t₂+ln r)/n)⌉`, clamped
/// to at least one column.
pub fn sample_floor(mu: f64, mu_hat: f64, r: usize, n: usize, t1: f64, t2: f64) -> usize {
    let rf = r as f64;
    let lnr = rf.ln();
    let a = 7.0 * mu * rf * (t1 + lnr);
    let b = 7.0 * mu_hat * mu_hat * rf * rf * (t2 + lnr) / n as f64;
    (a.max(b).ceil() as usize).max(1)
}

/// Every diagnostic the analysis defines, evaluated on one solved
/// instance. Fields that need the planted decomposition (`QS`, `E`) are
/// absent when only the raw matrix is known.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub mu: f64,
    pub mu_hat: f64,
    pub delta: Option<f64>,
    pub r_resid_f: Option<f64>,
    pub s_resid_f: Option<f64>,
    pub e_f: Option<f64>,
    pub sin_theta_f: f64,
    pub v_mismatch_f: f64,
    pub lambda_min_h: Option<f64>,
    pub alpha_floor: f64,
    pub bound_old: Option<BoundBreakdown>,
    pub bound_new: Option<BoundBreakdown>,
    pub measured_sq_spectral_err: f64,
}

impl TheoryReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub struct ReportContext<'a> {
    pub m_true: &'a DenseMatrix,
    /// The unperturbed product, when known.
    pub qs: Option<&'a DenseMatrix>,
    /// The noise matrix, when known.
    pub e: Option<&'a DenseMatrix>,
    pub model: &'a QpmaModel,
    pub sampler: &'a ColumnSampler,
    pub target_rank: usize,
}

/// Assemble the full diagnostic report for a solved instance.
pub fn theory_report(ctx: &ReportContext) -> Result<TheoryReport> {
    let r = ctx.target_rank;
    let m_true = ctx.m_true;
    let (n, m) = (m_true.rows(), m_true.cols());
    let d = ctx.sampler.len();

    let mu = incoherence(m_true, r)?;
    let mu_hat = incoherence(&ctx.model.m_hat, r)?;

    let m_svd = m_true.svd_full()?;
    let sigma1 = m_svd.sigma[0];
    let sigma_r_plus_1 = m_svd.sigma.get(r).copied().unwrap_or(0.0);
    let v_m = m_svd.truncate(r)?.v();

    let angles = canonical_angles(&v_m, &ctx.model.v_qs)?;
    let sin_theta_f = sin_theta_frobenius(&angles);
    let v_mismatch_f = {
        let overlap = v_m.transpose().matmul(&ctx.model.v_qs);
        overlap.sub(&DenseMatrix::identity(r)).frobenius_norm()
    };

    let lambda_min_h = if r <= HESSIAN_RANK_GUARD {
        let v_sampled = ctx.model.v_qs.select_rows(ctx.sampler.indices())?;
        Some(min_eigenvalue_psd(&hessian_of_f(
            &ctx.model.u_a,
            &v_sampled,
        )?)?)
    } else {
        None
    };

    let mut report = TheoryReport {
        mu,
        mu_hat,
        delta: None,
        r_resid_f: None,
        s_resid_f: None,
        e_f: ctx.e.map(|e| e.frobenius_norm()),
        sin_theta_f,
        v_mismatch_f,
        lambda_min_h,
        alpha_floor: d as f64 / (2.0 * m as f64),
        bound_old: None,
        bound_new: None,
        measured_sq_spectral_err: crate::metrics::spectral_sq_error(&ctx.model.m_hat, m_true)?,
    };

    if let Some(qs) = ctx.qs {
        let qs_sigma = qs.singular_values()?;
        let perp: Vec<f64> = qs_sigma.iter().copied().skip(r).collect();
        let delta = delta_gap_raw(&m_svd.sigma[..r], &perp);
        report.delta = Some(delta);

        let (r_resid, s_resid) = wedin_residuals(qs, m_true, r)?;
        let r_f = r_resid.frobenius_norm();
        let s_f = s_resid.frobenius_norm();
        report.r_resid_f = Some(r_f);
        report.s_resid_f = Some(s_f);

        if delta > 0.0 {
            let inputs = BoundInputs {
                sigma1,
                sigma_r_plus_1,
                m,
                n,
                d,
                r_resid_f: r_f,
                s_resid_f: s_f,
                e_f: report.e_f.unwrap_or(f64::NAN),
                delta,
                v_mismatch_f,
            };
            report.bound_old = Some(spectral_error_bound(&inputs, BoundVariant::Old)?);
            if report.e_f.is_some() {
                report.bound_new = Some(spectral_error_bound(&inputs, BoundVariant::New)?);
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;

    #[test]
    fn incoherence_of_spike_is_maximal() {
        // e1·e1^T concentrates all energy in one row
        let x = DenseMatrix::from_fn(4, 4, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        assert!((incoherence(&x, 1).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_of_flat_matrix_is_one() {
        let x = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        assert!((incoherence(&x, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_matches_direct_recomputation() {
        let x = datagen::normal_matrix(50, 50, 17, "mu");
        let r = 5;
        let got = incoherence(&x, r).unwrap();
        let f = x.svd_full().unwrap();
        let mut best: f64 = 0.0;
        for i in 0..50 {
            let nu: f64 = (0..r).map(|j| f.u.get(i, j).powi(2)).sum();
            best = best.max(50.0 / r as f64 * nu);
            let nv: f64 = (0..r).map(|j| f.vt.get(j, i).powi(2)).sum();
            best = best.max(50.0 / r as f64 * nv);
        }
        assert_eq!(got, best);
    }

    #[test]
    fn incoherence_rejects_rank_deficiency() {
        let x = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        assert!(matches!(incoherence(&x, 2), Err(Error::Rank(_))));
    }

    #[test]
    fn delta_gap_direct_formula() {
        assert_eq!(delta_gap(&[5.0, 4.0], &[1.0]).unwrap(), 3.0);
        assert!(matches!(
            delta_gap(&[5.0, 0.0], &[1.0]),
            Err(Error::AssumptionViolation(_))
        ));
        // no remainder values: only the min singular value matters
        assert_eq!(delta_gap(&[2.0, 1.5], &[]).unwrap(), 1.5);
    }

    #[test]
    fn delta_gap_matches_exhaustive_pairs() {
        let inst = datagen::generate(&datagen::SyntheticSpec::new(40, 40, 4, 0.005, 1)).unwrap();
        let r = 3;
        let m_sigma = inst.m_true.singular_values().unwrap();
        let qs_sigma = inst.qs().singular_values().unwrap();
        let top = &m_sigma[..r];
        let perp: Vec<f64> = qs_sigma[r..].to_vec();
        let got = delta_gap_raw(top, &perp);
        let mut expected = top.iter().copied().fold(f64::INFINITY, f64::min);
        for &a in top {
            for &b in &perp {
                expected = expected.min((a - b).abs());
            }
        }
        assert_eq!(got, expected);
    }

    #[test]
    fn residuals_vanish_without_noise() {
        let inst = datagen::generate(&datagen::SyntheticSpec::new(12, 14, 3, 0.0, 2)).unwrap();
        let (r_resid, s_resid) = wedin_residuals(&inst.qs(), &inst.m_true, 4).unwrap();
        let scale = inst.m_true.frobenius_norm();
        assert!(r_resid.frobenius_norm() < 1e-10 * scale);
        assert!(s_resid.frobenius_norm() < 1e-10 * scale);
    }

    #[test]
    fn residuals_are_dominated_by_noise_norm() {
        for seed in 0..50 {
            let inst =
                datagen::generate(&datagen::SyntheticSpec::new(12, 12, 3, 0.05, seed)).unwrap();
            let (r_resid, s_resid) = wedin_residuals(&inst.qs(), &inst.m_true, 4).unwrap();
            let e_f = inst.e_true.frobenius_norm();
            assert!(r_resid.frobenius_norm() <= e_f + 1e-9);
            assert!(s_resid.frobenius_norm() <= e_f + 1e-9);
        }
    }

    #[test]
    fn residuals_match_closed_form_two_by_two() {
        // M = [[2, 1], [0, 1]] has a closed-form SVD through the 2x2
        // eigen decomposition of M^T M; QS = M − E with a known E.
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let e = DenseMatrix::from_rows(&[vec![0.1, -0.05], vec![0.02, 0.0]]).unwrap();
        let qs = m.sub(&e);

        // closed-form top singular triplet of M
        let (a, b, c, d) = (2.0, 1.0, 0.0, 1.0);
        let g11: f64 = a * a + c * c;
        let g12: f64 = a * b + c * d;
        let g22: f64 = b * b + d * d;
        let tr = g11 + g22;
        let det = g11 * g22 - g12 * g12;
        let lambda1 = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        let sigma1 = lambda1.sqrt();
        let v1 = {
            let vx = g12;
            let vy = lambda1 - g11;
            let nrm = (vx * vx + vy * vy).sqrt();
            [vx / nrm, vy / nrm]
        };
        let u1 = [
            (a * v1[0] + b * v1[1]) / sigma1,
            (c * v1[0] + d * v1[1]) / sigma1,
        ];

        let (r_resid, s_resid) = wedin_residuals(&qs, &m, 1).unwrap();
        // align the sign of the library's factor pair with the oracle's
        let f = m.svd_truncated(1).unwrap();
        let sign = if f.u.get(0, 0) * u1[0] >= 0.0 {
            1.0
        } else {
            -1.0
        };
        let r_expect = [
            (qs.get(0, 0) * v1[0] + qs.get(0, 1) * v1[1] - u1[0] * sigma1) * sign,
            (qs.get(1, 0) * v1[0] + qs.get(1, 1) * v1[1] - u1[1] * sigma1) * sign,
        ];
        assert!((r_resid.get(0, 0) - r_expect[0]).abs() < 1e-12);
        assert!((r_resid.get(1, 0) - r_expect[1]).abs() < 1e-12);
        let s_expect = [
            (qs.get(0, 0) * u1[0] + qs.get(1, 0) * u1[1] - v1[0] * sigma1) * sign,
            (qs.get(0, 1) * u1[0] + qs.get(1, 1) * u1[1] - v1[1] * sigma1) * sign,
        ];
        assert!((s_resid.get(0, 0) - s_expect[0]).abs() < 1e-12);
        assert!((s_resid.get(1, 0) - s_expect[1]).abs() < 1e-12);
    }

    #[test]
    fn angles_of_identical_and_orthogonal_spans() {
        let v = datagen::normal_matrix(6, 2, 3, "angles")
            .svd_full()
            .unwrap()
            .u;
        let same = canonical_angles(&v, &v).unwrap();
        assert!(same.iter().all(|t| t.abs() < 1e-7));

        let e1 = DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let e2 = DenseMatrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let orth = canonical_angles(&e1, &e2).unwrap();
        assert!((orth[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn projector_distance_identity() {
        for seed in 0..10 {
            let v1 = datagen::normal_matrix(10, 3, seed, "v1")
                .svd_full()
                .unwrap()
                .u;
            let v2 = datagen::normal_matrix(10, 3, seed + 99, "v2")
                .svd_full()
                .unwrap()
                .u;
            let p1 = crate::matrix::projector(&v1).unwrap();
            let p2 = crate::matrix::projector(&v2).unwrap();
            let lhs = p1.sub(&p2).frobenius_norm();
            let rhs = 2.0_f64.sqrt() * sin_theta_frobenius(&canonical_angles(&v1, &v2).unwrap());
            assert!(
                (lhs - rhs).abs() < 1e-10,
                "seed {seed}: ‖P₁−P₂‖_F = {lhs} vs √2‖sinΘ‖_F = {rhs}"
            );
        }
    }

    #[test]
    fn hessian_scalar_hand_case() {
        // n = m = 2, r = 1, full sampling, both factors normalized
        // all-ones: H = 2·Σ (uᵢvⱼ)² = 2·4·(1/4) = 2
        let s = 1.0 / 2.0_f64.sqrt();
        let u = DenseMatrix::from_vec(2, 1, vec![s, s]).unwrap();
        let v = DenseMatrix::from_vec(2, 1, vec![s, s]).unwrap();
        let h = hessian_of_f(&u, &v).unwrap();
        assert_eq!((h.rows(), h.cols()), (1, 1));
        assert!((h.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hessian_equals_kronecker_identity() {
        // under full column sampling with orthonormal factors the
        // Hessian collapses to 2·(U^T U)⊗(V^T V) = 2·I
        let u = datagen::normal_matrix(8, 2, 5, "hk-u")
            .svd_full()
            .unwrap()
            .u;
        let v = datagen::normal_matrix(6, 2, 6, "hk-v")
            .svd_full()
            .unwrap()
            .u;
        let h = hessian_of_f(&u, &v).unwrap();
        let expected = DenseMatrix::identity(4).scale(2.0);
        assert!(h.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn hessian_guard_rejects_large_rank() {
        let u = DenseMatrix::zeros(4, 13);
        let v = DenseMatrix::zeros(4, 13);
        assert!(matches!(hessian_of_f(&u, &v), Err(Error::Size(_))));
    }

    #[test]
    fn bound_reduces_in_matched_noiseless_limit() {
        let inputs = BoundInputs {
            sigma1: 3.0,
            sigma_r_plus_1: 0.5,
            m: 100,
            n: 80,
            d: 20,
            r_resid_f: 0.0,
            s_resid_f: 0.0,
            e_f: 0.0,
            delta: 1.0,
            v_mismatch_f: 0.0,
        };
        let old = spectral_error_bound(&inputs, BoundVariant::Old).unwrap();
        let tail = 0.25 * (2.0 + 8.0 * 100.0 / 20.0) * (1.0 + 180.0 / 20.0);
        assert!((old.total - (tail + 4.0 * 9.0)).abs() < 1e-12);
        // the revised variant has no standalone top term
        let new = spectral_error_bound(&inputs, BoundVariant::New).unwrap();
        assert!((new.total - tail).abs() < 1e-12);

        // with a zero tail the old bound collapses to 4σ₁²
        let inputs0 = BoundInputs {
            sigma_r_plus_1: 0.0,
            ..inputs
        };
        let old0 = spectral_error_bound(&inputs0, BoundVariant::Old).unwrap();
        assert!((old0.total - 36.0).abs() < 1e-12);
    }

    #[test]
    fn bound_requires_positive_gap() {
        let inputs = BoundInputs {
            sigma1: 1.0,
            sigma_r_plus_1: 0.0,
            m: 10,
            n: 10,
            d: 5,
            r_resid_f: 0.0,
            s_resid_f: 0.0,
            e_f: 0.0,
            delta: 0.0,
            v_mismatch_f: 0.0,
        };
        assert!(matches!(
            spectral_error_bound(&inputs, BoundVariant::New),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn sample_floor_arithmetic() {
        // degenerate inputs clamp to one column
        assert_eq!(sample_floor(1.0, 1.0, 1, 100, 0.0, 0.0), 1);
        // two-term max with t₁ = t₂ = ln r
        let ln5 = 5.0_f64.ln();
        let got = sample_floor(1.0, 1.0, 5, 100, ln5, ln5);
        assert_eq!(got, 113);
    }
}
