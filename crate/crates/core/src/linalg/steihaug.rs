use super::{axpy, dot, norm};

#[derive(Debug, Clone)]
pub struct SteihaugStep {
    pub step: Vec<f64>,
    pub iterations: usize,
    /// The step was truncated at the trust-region boundary.
    pub on_boundary: bool,
}

/// Steihaug truncated conjugate gradients for
/// `min ⟨grad, s⟩ + ½⟨s, B s⟩` subject to `‖s‖ ≤ radius`.
///
/// The first CG step is the steepest-descent step, so the returned model
/// decrease is never smaller than the Cauchy point's.
pub fn steihaug_cg<F>(
    mut apply_b: F,
    grad: &[f64],
    radius: f64,
    rel_tol: f64,
    max_iters: usize,
) -> SteihaugStep
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    assert!(radius > 0.0, "trust-region radius must be positive");
    let n = grad.len();
    let mut s = vec![0.0; n];
    let g_norm = norm(grad);
    if g_norm == 0.0 {
        return SteihaugStep {
            step: s,
            iterations: 0,
            on_boundary: false,
        };
    }
    let tol = rel_tol * g_norm;
    let mut r = grad.to_vec();
    let mut d: Vec<f64> = grad.iter().map(|v| -v).collect();
    let mut rr = dot(&r, &r);

    for it in 1..=max_iters.max(1) {
        let bd = apply_b(&d);
        let dbd = dot(&d, &bd);
        if dbd <= 0.0 {
            let tau = boundary_tau(&s, &d, radius);
            axpy(tau, &d, &mut s);
            return SteihaugStep {
                step: s,
                iterations: it,
                on_boundary: true,
            };
        }
        let alpha = rr / dbd;
        let mut trial = s.clone();
        axpy(alpha, &d, &mut trial);
        if norm(&trial) >= radius {
            let tau = boundary_tau(&s, &d, radius);
            axpy(tau, &d, &mut s);
            return SteihaugStep {
                step: s,
                iterations: it,
                on_boundary: true,
            };
        }
        s = trial;
        axpy(alpha, &bd, &mut r);
        let rr_next = dot(&r, &r);
        if rr_next.sqrt() <= tol {
            return SteihaugStep {
                step: s,
                iterations: it,
                on_boundary: false,
            };
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = -ri + beta * *di;
        }
    }
    SteihaugStep {
        step: s,
        iterations: max_iters.max(1),
        on_boundary: false,
    }
}

/// Positive root τ of `‖s + τ d‖ = radius` for `‖s‖ < radius`.
fn boundary_tau(s: &[f64], d: &[f64], radius: f64) -> f64 {
    let dd = dot(d, d);
    let sd = dot(s, d);
    let ss = dot(s, s);
    let disc = (sd * sd + dd * (radius * radius - ss)).max(0.0).sqrt();
    // stable form of (−sd + disc)/dd
    if sd <= 0.0 {
        (-sd + disc) / dd
    } else {
        (radius * radius - ss) / (sd + disc)
    }
}
