use super::{half_sq_norm, FinderConfig, FinderRun, Method, Objective, RunState, RunStatus};
use crate::linalg::{dot, norm, steihaug_cg};

/// Newton-TR on `g` with the Gauss–Newton curvature `H²`.
pub(crate) fn run<F: Objective + ?Sized>(f: &F, start: &[f64], config: &FinderConfig) -> FinderRun {
    let tr = &config.trust_region;
    let mut state = RunState::new(f, start);
    let stop_below = config.stop_threshold();
    let max_inner = tr.cg_max_iters.unwrap_or(f.dim()).max(1);
    let mut radius = tr.initial_radius;
    let mut stop = RunStatus::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        if state.g <= stop_below {
            stop = RunStatus::Converged;
            break;
        }
        let x = state.x.clone();
        let grad_g = f.hvp(&x, &state.grad);
        let sub = steihaug_cg(
            |v| {
                let hv = f.hvp(&x, v);
                f.hvp(&x, &hv)
            },
            &grad_g,
            radius,
            tr.cg_rel_tol,
            max_inner,
        );
        let step = sub.step;
        let step_norm = norm(&step);
        // m(0) − m(s) = −⟨∇g, s⟩ − ½‖H s‖²
        let hs = f.hvp(&x, &step);
        let predicted = -dot(&grad_g, &step) - half_sq_norm(&hs);

        let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        let grad = f.gradient(&trial);
        let g_trial = half_sq_norm(&grad);
        let actual = state.g - g_trial;
        let rho = if predicted > 0.0 && g_trial.is_finite() {
            actual / predicted
        } else {
            f64::NEG_INFINITY
        };

        let used_radius = radius;
        if rho < tr.shrink_below {
            radius *= tr.shrink_factor;
        } else if rho > tr.grow_above && step_norm >= (1.0 - 1e-9) * radius {
            radius = (radius * tr.grow_factor).min(tr.max_radius);
        }
        let accepted = rho > tr.accept_above && g_trial < state.g;
        if accepted {
            state.accept(trial, grad, g_trial);
        }
        let rec = state.record(epoch, step_norm, sub.iterations, accepted);
        rec.radius = Some(used_radius);
        if radius < tr.min_radius {
            stop = RunStatus::RadiusUnderflow;
            break;
        }
    }
    if state.g <= stop_below {
        stop = RunStatus::Converged;
    }
    state.finish(Method::NewtonTr, stop, config)
}
