//! Critical-point finders.
//!
//! All three methods drive the squared gradient norm `g(θ) = ½‖∇L(θ)‖²` to
//! zero, which makes every critical point of `L` (minima and saddles alike) a
//! global minimiser of `g`. They differ in the direction they take:
//!
//! * [`Method::Gnm`] descends `g` along `−∇g = −H∇L`.
//! * [`Method::NewtonMr`] takes the MINRES least-squares solution of
//!   `H p = −∇L`, line-searched on `g`.
//! * [`Method::NewtonTr`] minimises the Gauss–Newton model
//!   `g + ⟨H∇L, s⟩ + ½‖H s‖²` inside a trust region with Steihaug-CG.

mod config;
mod gnm;
mod line_search;
mod newton_mr;
mod newton_tr;
mod objective;

use serde::{Deserialize, Serialize};

use crate::catalog::classify_point;
use crate::error::Result;
use crate::model::{self, Architecture, Dataset, NetworkParams};

pub use config::{FinderConfig, LineSearchConfig, Method, MinresConfig, TrustRegionConfig};
pub use objective::{DlaeObjective, Objective, QuadraticObjective, ScalarCubic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxEpochs,
    StepUnderflow,
    RadiusUnderflow,
    InnerBreakdown,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxEpochs => "max_epochs",
            RunStatus::StepUnderflow => "step_underflow",
            RunStatus::RadiusUnderflow => "radius_underflow",
            RunStatus::InnerBreakdown => "inner_breakdown",
        }
    }
}

/// One epoch of a run. Epoch 0 describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub epoch: usize,
    /// `g` at the iterate held after this epoch.
    pub sq_grad_norm: f64,
    pub loss: f64,
    /// Length of the attempted step (zero at epoch 0).
    pub step_norm: f64,
    /// Trust radius the step was computed in (Newton-TR only).
    pub radius: Option<f64>,
    pub inner_iters: usize,
    pub accepted: bool,
    /// `⟨∇g, p⟩` for the direction the line search used.
    pub slope: Option<f64>,
    /// The Newton direction was replaced by `−∇g` this epoch.
    pub fell_back: bool,
}

impl TraceRecord {
    /// The trace column shared by all methods: radius for Newton-TR, step
    /// length otherwise.
    pub fn step_or_radius(&self) -> f64 {
        self.radius.unwrap_or(self.step_norm)
    }
}

#[derive(Debug, Clone)]
pub struct FinderRun {
    pub method: Method,
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
    pub terminal: Vec<f64>,
    /// Number of parameter updates performed.
    pub updates: usize,
}

impl FinderRun {
    pub fn terminal_sq_grad_norm(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.sq_grad_norm)
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    /// `g` at the start and after every accepted epoch.
    pub fn accepted_sq_grad_norms(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.epoch == 0 || r.accepted)
            .map(|r| r.sq_grad_norm)
            .collect()
    }
}

pub(crate) fn half_sq_norm(v: &[f64]) -> f64 {
    0.5 * crate::linalg::dot(v, v)
}

/// Shared bookkeeping for all three methods.
pub(crate) struct RunState<'a, F: Objective + ?Sized> {
    pub f: &'a F,
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub g: f64,
    pub records: Vec<TraceRecord>,
    pub updates: usize,
}

impl<'a, F: Objective + ?Sized> RunState<'a, F> {
    pub fn new(f: &'a F, start: &[f64]) -> Self {
        let x = start.to_vec();
        let grad = f.gradient(&x);
        let g = half_sq_norm(&grad);
        let records = vec![TraceRecord {
            epoch: 0,
            sq_grad_norm: g,
            loss: f.loss(&x),
            step_norm: 0.0,
            radius: None,
            inner_iters: 0,
            accepted: true,
            slope: None,
            fell_back: false,
        }];
        Self {
            f,
            x,
            grad,
            g,
            records,
            updates: 0,
        }
    }

    pub fn accept(&mut self, x: Vec<f64>, grad: Vec<f64>, g: f64) {
        self.x = x;
        self.grad = grad;
        self.g = g;
        self.updates += 1;
    }

    pub fn record(&mut self, epoch: usize, step_norm: f64, inner_iters: usize, accepted: bool) -> &mut TraceRecord {
        let loss = self.f.loss(&self.x);
        self.records.push(TraceRecord {
            epoch,
            sq_grad_norm: self.g,
            loss,
            step_norm,
            radius: None,
            inner_iters,
            accepted,
            slope: None,
            fell_back: false,
        });
        self.records.last_mut().unwrap()
    }

    pub fn finish(self, method: Method, stop: RunStatus, config: &FinderConfig) -> FinderRun {
        let status = if self.g <= config.epsilon_crit {
            RunStatus::Converged
        } else if stop == RunStatus::Converged {
            // only reachable when g is NaN
            RunStatus::StepUnderflow
        } else {
            stop
        };
        FinderRun {
            method,
            records: self.records,
            status,
            terminal: self.x,
            updates: self.updates,
        }
    }
}

/// Runs `method` on an arbitrary objective from flat coordinates.
pub fn run_method<F: Objective + ?Sized>(method: Method, f: &F, start: &[f64], config: &FinderConfig) -> Result<FinderRun> {
    config.validate()?;
    if start.len() != f.dim() || start.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::invalid("start point must be finite with the objective's dimension"));
    }
    Ok(match method {
        Method::Gnm => gnm::run(f, start, config),
        Method::NewtonMr => newton_mr::run(f, start, config),
        Method::NewtonTr => newton_tr::run(f, start, config),
    })
}

/// A finished run on the autoencoder, with its terminal parameters.
#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub run: FinderRun,
    pub terminal: NetworkParams,
}

fn run_network(method: Method, start: &NetworkParams, data: &Dataset, config: &FinderConfig) -> Result<NetworkRun> {
    let arch: &Architecture = start.arch();
    model::loss(start, data)?;
    let objective = DlaeObjective::new(arch, data);
    let run = run_method(method, &objective, &start.flatten(), config)?;
    let terminal = NetworkParams::from_flat(arch, &run.terminal)?;
    Ok(NetworkRun { run, terminal })
}

pub fn gnm_run(start: &NetworkParams, data: &Dataset, config: &FinderConfig) -> Result<NetworkRun> {
    run_network(Method::Gnm, start, data, config)
}

pub fn newton_mr_run(start: &NetworkParams, data: &Dataset, config: &FinderConfig) -> Result<NetworkRun> {
    run_network(Method::NewtonMr, start, data, config)
}

pub fn newton_tr_run(start: &NetworkParams, data: &Dataset, config: &FinderConfig) -> Result<NetworkRun> {
    run_network(Method::NewtonTr, start, data, config)
}

pub fn find(method: Method, start: &NetworkParams, data: &Dataset, config: &FinderConfig) -> Result<NetworkRun> {
    run_network(method, start, data, config)
}

/// The classified end point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointRecord {
    pub terminal_sq_grad_norm: f64,
    pub loss: f64,
    pub index: usize,
    pub nullity: usize,
    pub converged: bool,
}

/// Classifies a terminal point; `converged` is `g ≤ epsilon_crit`.
///
/// Index and nullity are read at the balanced member of the point's gauge
/// orbit when one exists (same loss, congruent Hessian at a critical point);
/// unbalanced factorisations inflate the largest curvature and push genuine
/// small eigenvalues under the relative zero threshold.
pub fn classify_terminal(terminal: &NetworkParams, data: &Dataset, tau_rel: f64, epsilon_crit: f64) -> Result<CriticalPointRecord> {
    let g = model::sq_grad_norm(terminal, data)?;
    let balanced = model::balance(terminal);
    let class = classify_point(balanced.as_ref().unwrap_or(terminal), data, tau_rel)?;
    Ok(CriticalPointRecord {
        terminal_sq_grad_norm: g,
        loss: model::loss(terminal, data)?,
        index: class.index,
        nullity: class.nullity,
        converged: g <= epsilon_crit,
    })
}
