use super::{half_sq_norm, LineSearchConfig, Objective};
use crate::linalg::axpy;

pub(crate) struct LineSearchHit {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub g: f64,
    pub step: f64,
}

/// Backtracking until `g(x + α·dir) ≤ g + c·α·slope` with a strict decrease.
/// `None` once `α` drops below the minimum step.
pub(crate) fn backtrack<F: Objective + ?Sized>(
    f: &F,
    x: &[f64],
    g: f64,
    dir: &[f64],
    slope: f64,
    ls: &LineSearchConfig,
) -> Option<LineSearchHit> {
    debug_assert!(slope < 0.0);
    let mut alpha = ls.initial_step;
    while alpha >= ls.min_step {
        let mut trial = x.to_vec();
        axpy(alpha, dir, &mut trial);
        let grad = f.gradient(&trial);
        let g_trial = half_sq_norm(&grad);
        if g_trial.is_finite() && g_trial <= g + ls.sufficient_decrease * alpha * slope && g_trial < g {
            return Some(LineSearchHit {
                x: trial,
                grad,
                g: g_trial,
                step: alpha,
            });
        }
        alpha *= ls.shrink;
    }
    None
}
