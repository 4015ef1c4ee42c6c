use super::line_search::backtrack;
use super::{FinderConfig, FinderRun, Method, Objective, RunState, RunStatus};
use crate::linalg::{dot, norm};

/// Gradient-norm minimisation: steepest descent on `g` with `∇g = H·∇L`.
pub(crate) fn run<F: Objective + ?Sized>(f: &F, start: &[f64], config: &FinderConfig) -> FinderRun {
    let mut state = RunState::new(f, start);
    let stop_below = config.stop_threshold();
    let mut stop = RunStatus::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        if state.g <= stop_below {
            stop = RunStatus::Converged;
            break;
        }
        let grad_g = f.hvp(&state.x, &state.grad);
        let dir: Vec<f64> = grad_g.iter().map(|v| -v).collect();
        let slope = -dot(&grad_g, &grad_g);
        if !(slope < 0.0) {
            // ∇L lies in the kernel of H: g cannot decrease to first order
            state.record(epoch, 0.0, 0, false);
            stop = RunStatus::StepUnderflow;
            break;
        }
        match backtrack(f, &state.x, state.g, &dir, slope, &config.line_search) {
            Some(hit) => {
                let step = hit.step * norm(&dir);
                state.accept(hit.x, hit.grad, hit.g);
                state.record(epoch, step, 0, true).slope = Some(slope);
            }
            None => {
                state.record(epoch, 0.0, 0, false);
                stop = RunStatus::StepUnderflow;
                break;
            }
        }
    }
    if state.g <= stop_below {
        stop = RunStatus::Converged;
    }
    state.finish(Method::Gnm, stop, config)
}
