use super::line_search::backtrack;
use super::{FinderConfig, FinderRun, Method, Objective, RunState, RunStatus};
use crate::linalg::{dot, minres, norm, MinresFlag};

/// Newton-MR: MINRES least-squares step for `H p = −∇L`, Armijo on `g`.
///
/// The Newton direction is used only when `⟨∇g, p⟩ < 0`; otherwise, or when
/// MINRES breaks down or the line search along `p` fails, the epoch falls
/// back to the `−∇g` direction.
pub(crate) fn run<F: Objective + ?Sized>(f: &F, start: &[f64], config: &FinderConfig) -> FinderRun {
    let mut state = RunState::new(f, start);
    let stop_below = config.stop_threshold();
    let max_inner = config.minres.max_iters.unwrap_or(f.dim()).max(1);
    let mut stop = RunStatus::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        if state.g <= stop_below {
            stop = RunStatus::Converged;
            break;
        }
        let x = state.x.clone();
        let neg_grad: Vec<f64> = state.grad.iter().map(|v| -v).collect();
        let grad_g = f.hvp(&x, &state.grad);
        let outcome = minres(|v| f.hvp(&x, v), &neg_grad, config.minres.rel_tol, max_inner);
        let breakdown = outcome.flag == MinresFlag::Breakdown;

        let mut hit = None;
        let mut slope = f64::NAN;
        let mut dir = outcome.solution;
        if !breakdown {
            slope = dot(&grad_g, &dir);
            if slope < 0.0 {
                hit = backtrack(f, &x, state.g, &dir, slope, &config.line_search);
            }
        }
        let fell_back = hit.is_none();
        if fell_back {
            dir = grad_g.iter().map(|v| -v).collect();
            slope = -dot(&grad_g, &grad_g);
            if slope < 0.0 {
                hit = backtrack(f, &x, state.g, &dir, slope, &config.line_search);
            }
        }
        match hit {
            Some(hit) => {
                let step = hit.step * norm(&dir);
                state.accept(hit.x, hit.grad, hit.g);
                let rec = state.record(epoch, step, outcome.iterations, true);
                rec.slope = Some(slope);
                rec.fell_back = fell_back;
            }
            None => {
                let rec = state.record(epoch, 0.0, outcome.iterations, false);
                rec.fell_back = fell_back;
                stop = if breakdown {
                    RunStatus::InnerBreakdown
                } else {
                    RunStatus::StepUnderflow
                };
                break;
            }
        }
    }
    if state.g <= stop_below {
        stop = RunStatus::Converged;
    }
    state.finish(Method::NewtonMr, stop, config)
}
