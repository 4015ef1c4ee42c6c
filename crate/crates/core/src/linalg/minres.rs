//! MINRES for symmetric, possibly indefinite or singular, systems.
//!
//! Plain Lanczos-based MINRES without preconditioning, started from the zero
//! iterate. Two stopping rules: `‖r‖ ≤ tol·‖b‖` for consistent systems and
//! `‖A r‖ ≤ tol·‖A b‖` for inconsistent ones, where the least-squares residual
//! stalls above zero.

use super::{axpy, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinresFlag {
    Converged,
    MaxIters,
    /// The operator failed the symmetry probe or produced non-finite
    /// values; the best iterate found before the failure is returned.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct MinresOutcome {
    pub solution: Vec<f64>,
    /// `‖A·solution − b‖`, recomputed directly from the operator.
    pub residual_norm: f64,
    pub iterations: usize,
    pub flag: MinresFlag,
    /// Recurrence estimate of the residual norm after each iteration, starting
    /// with `‖b‖` for the zero iterate.
    pub residual_history: Vec<f64>,
}

/// Solves `A x = b` (or `min ‖A x − b‖`) for symmetric `A` given as an operator.
pub fn minres<F>(mut apply_a: F, b: &[f64], rel_tol: f64, max_iters: usize) -> MinresOutcome
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm(b);
    if beta1 == 0.0 || !beta1.is_finite() {
        let flag = if beta1 == 0.0 {
            MinresFlag::Converged
        } else {
            MinresFlag::Breakdown
        };
        return MinresOutcome {
            solution: x,
            residual_norm: beta1,
            iterations: 0,
            flag,
            residual_history: vec![beta1],
        };
    }

    let eps = f64::EPSILON;
    let mut history = vec![beta1];
    let mut ab_norm = 0.0;

    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
        let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    let mut beta = beta1;
    let mut oldb = 0.0;
    let mut dbar: f64 = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut tnorm2: f64 = 0.0;
    let mut cs = -1.0;
    let mut sn = 0.0;

    let mut flag = MinresFlag::MaxIters;
    let mut iterations = 0;

    for k in 1..=max_iters {
        let v: Vec<f64> = y.iter().map(|yi| yi / beta).collect();
        y = apply_a(&v);
        if y.len() != n || y.iter().any(|t| !t.is_finite()) {
            flag = MinresFlag::Breakdown;
            break;
        }
        if k == 1 {
            ab_norm = beta1 * norm(&y);
            if ab_norm == 0.0 {
                // b lies in the null space: x = 0 already minimises the residual
                flag = MinresFlag::Converged;
                break;
            }
            // one-off symmetry probe: ⟨Av, Av⟩ = ⟨v, A(Av)⟩. Checking the
            // Lanczos coupling every step misfires once orthogonality is lost.
            let z = apply_a(&y);
            let s = dot(&y, &y);
            let t = dot(&v, &z);
            if !t.is_finite() || (s - t).abs() > (s + eps) * eps.cbrt() {
                flag = MinresFlag::Breakdown;
                break;
            }
        } else {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        oldb = beta;
        beta = norm(&y);
        tnorm2 += alfa * alfa + oldb * oldb + beta * beta;

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;

        // ‖A r‖ for the current iterate
        let ar_norm = phibar * gbar.hypot(dbar);
        if k > 1 && ar_norm <= rel_tol * ab_norm {
            flag = MinresFlag::Converged;
            break;
        }

        // floor relative to ‖A‖ so that badly scaled operators are not clipped
        let gamma = gbar.hypot(beta).max(eps * tnorm2.sqrt()).max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        iterations = k;
        history.push(phibar);

        if phibar <= rel_tol * beta1 {
            flag = MinresFlag::Converged;
            break;
        }
        if beta <= eps * tnorm2.sqrt() {
            // invariant Krylov subspace: x is the least-squares solution
            flag = MinresFlag::Converged;
            break;
        }
    }

    let ax = apply_a(&x);
    let residual_norm = ax
        .iter()
        .zip(b)
        .map(|(a, bi)| (a - bi) * (a - bi))
        .sum::<f64>()
        .sqrt();
    MinresOutcome {
        solution: x,
        residual_norm,
        iterations,
        flag,
        residual_history: history,
    }
}
