//! Fixed-step gradient descent shared by the regression stages.
//!
//! The objectives here are convex quadratics, so with a step at or below
//! the inverse Lipschitz constant of the gradient the objective must
//! decrease at every step. Steps that fail to improve the objective by
//! more than evaluation noise end the descent (the trace stays strictly
//! decreasing); an increase beyond noise level is reported as
//! divergence, i.e. the step size is too large.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::tol;

pub struct DescentOutcome {
    pub estimate: DenseMatrix,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
    /// Number of accepted steps.
    pub iters: usize,
}

pub fn descend<O, G>(
    start: DenseMatrix,
    objective: O,
    gradient: G,
    step: f64,
    max_iters: usize,
    grad_tol: f64,
) -> Result<DescentOutcome>
where
    O: Fn(&DenseMatrix) -> f64,
    G: Fn(&DenseMatrix) -> DenseMatrix,
{
    let mut x = start;
    let mut trace = vec![objective(&x)];
    for iter in 0..max_iters {
        let g = gradient(&x);
        if g.frobenius_norm() <= grad_tol {
            break;
        }
        let next = x.sub(&g.scale(step));
        let f_next = objective(&next);
        let f_prev = *trace.last().expect("trace is never empty");
        if f_next > f_prev + (tol::DIVERGENCE_REL * f_prev.abs()).max(tol::MONOTONE_SLACK) {
            return Err(Error::Divergence {
                iteration: iter,
                from: f_prev,
                to: f_next,
            });
        }
        if f_next >= f_prev {
            // no measurable progress: the objective is at its resolution
            // floor for this step size
            break;
        }
        trace.push(f_next);
        x = next;
    }
    let iters = trace.len() - 1;
    Ok(DescentOutcome {
        estimate: x,
        trace,
        iters,
    })
}
