//! Adam and QHAdam with a warm-up/inverse-sqrt learning rate schedule,
//! plus a small deterministic trial harness for comparing them on classic
//! test functions.
//!
//! Conventions pinned here: epsilon is added outside the square root in
//! both update rules, and bias correction is applied in both at every step
//! so that QHAdam with nu1 = nu2 = 1 reduces to Adam exactly.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Loss level that counts as "converged" for steps-to-threshold reporting.
pub const LOSS_THRESHOLD: f64 = 1e-6;

/// Loss level past which a trial is recorded as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("bad optimizer config: {message}")]
    BadConfig { message: String },
    #[error("step number must be at least 1")]
    BadStep,
    #[error("state has dimension {state}, gradient has {grad}")]
    DimensionMismatch { state: usize, grad: usize },
    #[error("gradient component {index} is not finite")]
    NonFiniteGrad { index: usize },
    #[error("loss is not finite at the probed point")]
    NonFiniteLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimKind {
    Adam,
    Qhadam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimKind,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_warmup")]
    pub warmup: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_nu1")]
    pub nu1: f64,
    #[serde(default = "default_nu2")]
    pub nu2: f64,
}

fn default_lr0() -> f64 {
    0.0005
}

fn default_warmup() -> u64 {
    1600
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.98
}

fn default_eps() -> f64 {
    1e-9
}

fn default_nu1() -> f64 {
    0.8
}

fn default_nu2() -> f64 {
    0.7
}

impl OptimizerConfig {
    pub fn new(kind: OptimKind) -> Self {
        Self {
            kind,
            lr0: default_lr0(),
            warmup: default_warmup(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            nu1: default_nu1(),
            nu2: default_nu2(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |message: String| Err(OptimError::BadConfig { message });
        // the negated comparison also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.lr0 > 0.0) {
            return bad(format!("lr0 must be positive, got {}", self.lr0));
        }
        if self.warmup == 0 {
            return bad("warmup must be at least 1".to_string());
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must be in [0, 1), got {beta}"));
            }
        }
        for (name, nu) in [("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(0.0..=1.0).contains(&nu) {
                return bad(format!("{name} must be in [0, 1], got {nu}"));
            }
        }
        Ok(())
    }
}

/// Per-parameter moment estimates. `step` counts completed updates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }
}

/// Learning rate at `step` (1-based): linear ramp to lr0 over the warm-up,
/// then inverse-sqrt decay. Both branches give lr0 at step = warmup.
pub fn lr_at(step: u64, config: &OptimizerConfig) -> Result<f64, OptimError> {
    if step == 0 {
        return Err(OptimError::BadStep);
    }
    let lr = if step <= config.warmup {
        config.lr0 * step as f64 / config.warmup as f64
    } else {
        config.lr0 * (config.warmup as f64 / step as f64).sqrt()
    };
    Ok(lr)
}

fn check_grad(state: &OptimizerState, grad: &[f64]) -> Result<(), OptimError> {
    if state.m.len() != grad.len() {
        return Err(OptimError::DimensionMismatch {
            state: state.m.len(),
            grad: grad.len(),
        });
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(OptimError::NonFiniteGrad { index });
    }
    Ok(())
}

/// Advance the moments one step and return the bias-corrected (m_hat, v_hat)
/// per coordinate along with the step's learning rate.
fn advance_moments(
    state: &mut OptimizerState,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, Vec<f64>, f64), OptimError> {
    check_grad(state, grad)?;
    state.step += 1;
    let t = state.step;
    let lr = lr_at(t, config)?;
    let bias1 = 1.0 - config.beta1.powf(t as f64);
    let bias2 = 1.0 - config.beta2.powf(t as f64);
    let mut m_hat = vec![0.0; grad.len()];
    let mut v_hat = vec![0.0; grad.len()];
    for i in 0..grad.len() {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        m_hat[i] = state.m[i] / bias1;
        v_hat[i] = state.v[i] / bias2;
    }
    Ok((m_hat, v_hat, lr))
}

/// One Adam update: lr · m_hat / (sqrt(v_hat) + eps). The caller subtracts
/// the returned vector from the parameters.
pub fn adam_step(
    state: &mut OptimizerState,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>, OptimError> {
    let (m_hat, v_hat, lr) = advance_moments(state, grad, config)?;
    Ok((0..grad.len())
        .map(|i| lr * m_hat[i] / (v_hat[i].sqrt() + config.eps))
        .collect())
}

/// One QHAdam update: the numerator mixes the raw gradient with m_hat by
/// nu1, the denominator mixes the squared gradient with v_hat by nu2.
pub fn qhadam_step(
    state: &mut OptimizerState,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>, OptimError> {
    let (m_hat, v_hat, lr) = advance_moments(state, grad, config)?;
    Ok((0..grad.len())
        .map(|i| {
            let num = (1.0 - config.nu1) * grad[i] + config.nu1 * m_hat[i];
            let den = ((1.0 - config.nu2) * grad[i] * grad[i] + config.nu2 * v_hat[i]).sqrt();
            lr * num / (den + config.eps)
        })
        .collect())
}

/// Dispatch on the configured optimizer kind.
pub fn optimizer_step(
    state: &mut OptimizerState,
    grad: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<f64>, OptimError> {
    match config.kind {
        OptimKind::Adam => adam_step(state, grad, config),
        OptimKind::Qhadam => qhadam_step(state, grad, config),
    }
}

enum StartPoint {
    Fixed(Vec<f64>),
    /// Seeded uniform draw from [-half_width, half_width]^dim.
    SeededBox { half_width: f64 },
}

type LossFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A differentiable test problem with an analytic gradient.
pub struct Problem {
    pub name: String,
    pub dim: usize,
    loss: LossFn,
    grad: GradFn,
    pub optimum: Option<Vec<f64>>,
    start: StartPoint,
}

impl Problem {
    pub fn loss(&self, theta: &[f64]) -> f64 {
        (self.loss)(theta)
    }

    pub fn grad(&self, theta: &[f64]) -> Vec<f64> {
        (self.grad)(theta)
    }

    /// Trial start point; the seed only matters for box-sampled starts.
    pub fn start(&self, seed: u64) -> Vec<f64> {
        match &self.start {
            StartPoint::Fixed(theta) => theta.clone(),
            StartPoint::SeededBox { half_width } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let hw = *half_width;
                (0..self.dim)
                    .map(|_| ((rng.next_u64() % 2_000_001) as f64 / 1_000_000.0 - 1.0) * hw)
                    .collect()
            }
        }
    }

    /// f = sum(theta_i^2), minimized at the origin.
    pub fn sphere(dim: usize) -> Self {
        Self::quadratic(vec![1.0; dim])
    }

    /// f = sum(a_i * theta_i^2) with positive curvatures, minimized at the
    /// origin.
    pub fn quadratic(coeffs: Vec<f64>) -> Self {
        let dim = coeffs.len();
        let grad_coeffs = coeffs.clone();
        let name = if coeffs.iter().all(|&a| a == 1.0) {
            "sphere"
        } else {
            "quadratic"
        };
        Self {
            name: name.to_string(),
            dim,
            loss: Box::new(move |t| t.iter().zip(&coeffs).map(|(x, a)| a * x * x).sum()),
            grad: Box::new(move |t| {
                t.iter().zip(&grad_coeffs).map(|(x, a)| 2.0 * a * x).collect()
            }),
            optimum: Some(vec![0.0; dim]),
            start: StartPoint::SeededBox { half_width: 1.0 },
        }
    }

    /// Classic 2-D Rosenbrock valley, minimized at (1, 1), started from the
    /// standard (-1.2, 1).
    pub fn rosenbrock() -> Self {
        Self {
            name: "rosenbrock".to_string(),
            dim: 2,
            loss: Box::new(|t| {
                let (x, y) = (t[0], t[1]);
                (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
            }),
            grad: Box::new(|t| {
                let (x, y) = (t[0], t[1]);
                vec![
                    -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
                    200.0 * (y - x * x),
                ]
            }),
            optimum: Some(vec![1.0, 1.0]),
            start: StartPoint::Fixed(vec![-1.2, 1.0]),
        }
    }

    /// Problems available by name from the command line.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "sphere" => Some(Self::sphere(10)),
            "quadratic" => Some(Self::quadratic(
                (0..10).map(|i| 0.5 + i as f64 * 0.5).collect(),
            )),
            "rosenbrock" => Some(Self::rosenbrock()),
            _ => None,
        }
    }

    pub fn bundled_names() -> &'static [&'static str] {
        &["sphere", "quadratic", "rosenbrock"]
    }
}

/// Max over coordinates of the relative error between the analytic gradient
/// and a central finite difference with step `h`.
pub fn grad_check(problem: &Problem, theta: &[f64], h: f64) -> Result<f64, OptimError> {
    let g = problem.grad(theta);
    let mut worst: f64 = 0.0;
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = problem.loss(&probe);
        probe[i] = theta[i] - h;
        let down = problem.loss(&probe);
        probe[i] = theta[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(OptimError::NonFiniteLoss);
        }
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Loss trajectory and summary of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub problem: String,
    pub config: OptimizerConfig,
    pub steps: u64,
    pub seed: u64,
    /// (step, loss) samples; step 0 is the start point.
    pub trajectory: Vec<(u64, f64)>,
    pub final_loss: f64,
    pub best_loss: f64,
    /// First step at which the loss dropped to [`LOSS_THRESHOLD`].
    pub steps_to_threshold: Option<u64>,
    pub diverged: bool,
}

/// Run one deterministic trial. Divergence (loss above
/// [`DIVERGENCE_LIMIT`]) stops the run and is recorded, not raised.
pub fn run_trial(
    problem: &Problem,
    config: &OptimizerConfig,
    steps: u64,
    seed: u64,
) -> Result<TrialReport, OptimError> {
    config.validate()?;
    let mut theta = problem.start(seed);
    let mut state = OptimizerState::new(problem.dim);
    let sample_every = (steps / 200).max(1);

    let mut loss = problem.loss(&theta);
    let mut trajectory = vec![(0, loss)];
    let mut best_loss = loss;
    let mut steps_to_threshold = None;
    let mut diverged = false;

    for t in 1..=steps {
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            diverged = true;
            break;
        }
        let grad = problem.grad(&theta);
        let update = optimizer_step(&mut state, &grad, config)?;
        for (x, u) in theta.iter_mut().zip(&update) {
            *x -= u;
        }
        loss = problem.loss(&theta);
        if loss < best_loss {
            best_loss = loss;
        }
        if steps_to_threshold.is_none() && loss <= LOSS_THRESHOLD {
            steps_to_threshold = Some(t);
        }
        if t % sample_every == 0 || t == steps {
            trajectory.push((t, loss));
        }
    }
    if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
        diverged = true;
    }
    Ok(TrialReport {
        problem: problem.name.clone(),
        config: *config,
        steps,
        seed,
        trajectory,
        final_loss: loss,
        best_loss,
        steps_to_threshold,
        diverged,
    })
}
