//! Learning procedures: the averaging estimator, the thresholded self-training
//! step, fresh/reuse iteration schedules, logistic-regression self-training,
//! and the ridge / early-stopping pseudo-label regressions.
//!
//! Conventions shared by every estimator:
//! - hard labels are `sign(βᵀx)` with `sign(0) = +1`;
//! - a sample is accepted at threshold `Γ` when `|βᵀx|/‖β‖ ≥ Γ`;
//! - outputs depend on the current model only through those two quantities,
//!   so directions are invariant to positive rescaling of the model and flip
//!   under negation.

use serde::{Deserialize, Serialize};

use crate::distributions::{sample_unlabeled, LabeledSet, MixtureSpec, UnlabeledSet};
use crate::numerics::{cot_from_correlation, correlation, dot, norm, q_tail, SeedSpec, Vector};
use crate::{Error, Result};

/// `sign(t)` with the fixed tie-break `sign(0) = +1`.
pub fn sign_pm(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// A linear classifier `x ↦ sign(βᵀx)`; the weight vector is guaranteed
/// nonzero and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    beta: Vector,
}

impl LinearModel {
    pub fn new(beta: Vector) -> Result<Self> {
        if beta.is_empty() || beta.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateModel("zero weight vector"));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateModel("non-finite weight vector"));
        }
        Ok(LinearModel { beta })
    }

    /// Unit vector along coordinate axis `j` in dimension `p`.
    pub fn axis(p: usize, j: usize) -> Self {
        let mut beta = vec![0.0; p];
        beta[j] = 1.0;
        LinearModel { beta }
    }

    /// Model `α·μ + √(1-α²)·v` for a unit `μ` and a unit `v ⊥ μ`: a
    /// deterministic direction with prescribed correlation `α` to `μ`.
    pub fn with_correlation_to(mu: &[f64], perp: &[f64], alpha: f64) -> Result<Self> {
        let b = (1.0 - alpha * alpha).max(0.0).sqrt();
        let beta: Vector =
            mu.iter().zip(perp).map(|(&m, &q)| alpha * m + b * q).collect();
        LinearModel::new(beta)
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.beta)
    }

    /// Raw score `βᵀx`.
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.beta, x)
    }

    /// Predicted hard label, `sign(βᵀx)` with `sign(0) = +1`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sign_pm(self.score(x))
    }

    pub fn correlation_to(&self, v: &[f64]) -> Result<f64> {
        correlation(&self.beta, v)
    }

    pub fn cotangent_to(&self, v: &[f64]) -> Result<f64> {
        Ok(cot_from_correlation(self.correlation_to(v)?))
    }

    /// Scale the weights by `c > 0` (used by tests for invariance checks).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::invalid_input(format!("scale must be positive, got {c}")));
        }
        LinearModel::new(self.beta.iter().map(|v| c * v).collect())
    }

    pub fn negated(&self) -> Self {
        LinearModel { beta: self.beta.iter().map(|v| -v).collect() }
    }
}

/// Accepted samples with their hard pseudo-labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabeledSet {
    p: usize,
    inputs: Vec<f64>,
    pseudo_labels: Vec<f64>,
    rejected_count: usize,
}

impl PseudoLabeledSet {
    /// Assemble from explicit rows; meant for synthetic fixtures.
    pub fn from_rows(p: usize, rows: Vec<f64>, pseudo_labels: Vec<f64>) -> Result<Self> {
        if p == 0 || rows.len() != p * pseudo_labels.len() {
            return Err(Error::invalid_input("from_rows: shape mismatch"));
        }
        if pseudo_labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid_input("from_rows: labels must be ±1"));
        }
        Ok(PseudoLabeledSet { p, inputs: rows, pseudo_labels, rejected_count: 0 })
    }

    pub fn accepted_count(&self) -> usize {
        self.pseudo_labels.len()
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected_count
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.p..(i + 1) * self.p]
    }

    pub fn pseudo_label(&self, i: usize) -> f64 {
        self.pseudo_labels[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.pseudo_labels.iter().copied().zip(self.inputs.chunks_exact(self.p))
    }
}

/// Optimizer and selection settings for the refit estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Acceptance threshold `Γ ≥ 0`.
    pub gamma_threshold: f64,
    /// Ridge weight; `None` means the logistic default `1e-3 / accepted_count`.
    pub lambda: Option<f64>,
    /// Gradient-descent step size.
    pub step_size: f64,
    pub max_steps: usize,
    /// Stop when the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma_threshold: 0.0,
            lambda: None,
            step_size: 1.0,
            max_steps: 600,
            tolerance: 1e-4,
        }
    }
}

/// Averaging estimator `(1/n)·Σ y_i x_i`.
pub fn averaging_fit(data: &LabeledSet) -> Result<LinearModel> {
    let n = data.count();
    assert!(n >= 1, "averaging_fit: empty sample");
    let mut sum = vec![0.0; data.p()];
    for (y, x) in data.iter() {
        for (s, &v) in sum.iter_mut().zip(x) {
            *s += y * v;
        }
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    LinearModel::new(sum)
}

/// Keep the samples with normalized margin `|βᵀx|/‖β‖ ≥ Γ` and give each the
/// hard label `sign(βᵀx)`. An empty acceptance set is representable here;
/// downstream fits reject it.
pub fn pseudo_label_select(
    model: &LinearModel,
    data: &UnlabeledSet,
    gamma: f64,
) -> PseudoLabeledSet {
    assert!(gamma >= 0.0, "pseudo_label_select: negative threshold");
    let threshold = gamma * model.norm();
    let p = data.p();
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut rejected = 0usize;
    for x in data.iter() {
        let s = model.score(x);
        if s.abs() >= threshold {
            inputs.extend_from_slice(x);
            labels.push(sign_pm(s));
        } else {
            rejected += 1;
        }
    }
    PseudoLabeledSet { p, inputs, pseudo_labels: labels, rejected_count: rejected }
}

/// One self-training step: the mean of `sign(βᵀx)·x` over accepted samples.
///
/// With `Γ = 0` this is exactly [`averaging_fit`] applied to the
/// pseudo-labeled data.
pub fn self_train_step(
    model: &LinearModel,
    data: &UnlabeledSet,
    gamma: f64,
) -> Result<LinearModel> {
    assert!(gamma >= 0.0, "self_train_step: negative threshold");
    let threshold = gamma * model.norm();
    let mut sum = vec![0.0; data.p()];
    let mut accepted = 0usize;
    for x in data.iter() {
        let s = model.score(x);
        if s.abs() >= threshold {
            let y = sign_pm(s);
            for (acc, &v) in sum.iter_mut().zip(x) {
                *acc += y * v;
            }
            accepted += 1;
        }
    }
    if accepted == 0 {
        return Err(Error::AllRejected { round: 0 });
    }
    for s in &mut sum {
        *s /= accepted as f64;
    }
    LinearModel::new(sum)
}

/// Alignment statistics of one self-training round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    /// 1-based round number.
    pub round: usize,
    /// Correlation of the round's iterate with `μ`.
    pub correlation: f64,
    /// Co-tangent of the iterate against `μ` (infinite at perfect alignment).
    pub cotangent: f64,
    /// Population accuracy of the iterate's direction on the mixture.
    pub accuracy: f64,
}

fn round_stats(model: &LinearModel, spec: &MixtureSpec, round: usize) -> Result<RoundStats> {
    let rho = model.correlation_to(spec.mu())?;
    Ok(RoundStats {
        round,
        correlation: rho,
        cotangent: cot_from_correlation(rho),
        accuracy: accuracy_from_alignment(rho, spec.sigma()),
    })
}

/// Fresh-batch self-training: `τ` rounds, each on an independent batch of
/// `u_per_round` samples drawn from `spec` (round `r` uses `seed.child(r)`).
pub fn iterate_fresh(
    model0: &LinearModel,
    spec: &MixtureSpec,
    u_per_round: usize,
    gamma: f64,
    tau: usize,
    seed: SeedSpec,
) -> Result<(LinearModel, Vec<RoundStats>)> {
    assert!(tau >= 1, "iterate_fresh: need at least one round");
    assert!(u_per_round >= 1, "iterate_fresh: empty rounds");
    let mut current = model0.clone();
    let mut trajectory = Vec::with_capacity(tau);
    for round in 1..=tau {
        let batch = sample_unlabeled(spec, u_per_round, seed.child(round as u64));
        current = self_train_step(&current, &batch, gamma)
            .map_err(|e| promote_round(e, round))?;
        trajectory.push(round_stats(&current, spec, round)?);
    }
    Ok((current, trajectory))
}

/// Reused-batch self-training: `τ` rounds of [`self_train_step`] on one fixed
/// batch. `spec` provides `μ` and `σ` for the trajectory statistics.
pub fn iterate_reuse(
    model0: &LinearModel,
    data: &UnlabeledSet,
    spec: &MixtureSpec,
    gamma: f64,
    tau: usize,
) -> Result<(LinearModel, Vec<RoundStats>)> {
    assert!(tau >= 1, "iterate_reuse: need at least one round");
    let mut current = model0.clone();
    let mut trajectory = Vec::with_capacity(tau);
    for round in 1..=tau {
        current =
            self_train_step(&current, data, gamma).map_err(|e| promote_round(e, round))?;
        trajectory.push(round_stats(&current, spec, round)?);
    }
    Ok((current, trajectory))
}

fn promote_round(e: Error, round: usize) -> Error {
    match e {
        Error::AllRejected { .. } => Error::AllRejected { round },
        other => other,
    }
}

/// Result of a logistic-regression fit, with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LinearModel,
    /// Gradient norm reached `tolerance` within `max_steps`.
    pub converged: bool,
    pub steps: usize,
    pub grad_norm: f64,
    /// Ridge weight actually used.
    pub lambda: f64,
    /// Set when `λ = 0`: on separable pseudo-labels the iterates' norm grows
    /// without bound and the fit is only meaningful as a direction.
    pub divergence_risk: bool,
}

/// Mean logistic loss `(1/N)·Σ ln(1+e^{-ỹβᵀx}) + λ‖β‖²` on accepted samples.
pub fn logistic_objective(data: &PseudoLabeledSet, beta: &[f64], lambda: f64) -> f64 {
    let n = data.accepted_count() as f64;
    let mut acc = 0.0;
    for (y, x) in data.iter() {
        let t = y * dot(beta, x);
        // ln(1+e^{-t}) without overflow on either tail.
        acc += if t > 0.0 { (-t).exp().ln_1p() } else { -t + t.exp().ln_1p() };
    }
    acc / n + lambda * dot(beta, beta)
}

/// Full-batch gradient descent on the regularized logistic loss, started at
/// `β = 0`, stopping when the gradient norm reaches `cfg.tolerance` or after
/// `cfg.max_steps` steps (the latter flagged, not an error).
pub fn logistic_fit(data: &PseudoLabeledSet, cfg: &TrainConfig) -> Result<LogisticFit> {
    let n = data.accepted_count();
    if n == 0 {
        return Err(Error::AllRejected { round: 0 });
    }
    assert!(cfg.step_size > 0.0 && cfg.max_steps > 0 && cfg.tolerance > 0.0);
    let lambda = cfg.lambda.unwrap_or(1e-3 / n as f64);
    let p = data.p();
    let mut beta = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut steps = 0;
    let mut grad_norm = f64::INFINITY;
    while steps < cfg.max_steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (y, x) in data.iter() {
            let t = y * dot(&beta, x);
            // σ(-t) = 1/(1+e^t), the weight of this sample in the gradient.
            let w = 1.0 / (1.0 + t.exp());
            for (g, &v) in grad.iter_mut().zip(x) {
                *g -= y * v * w;
            }
        }
        for (g, &b) in grad.iter_mut().zip(&beta) {
            *g = *g / n as f64 + 2.0 * lambda * b;
        }
        grad_norm = norm(&grad);
        if grad_norm <= cfg.tolerance {
            break;
        }
        for (b, &g) in beta.iter_mut().zip(&grad) {
            *b -= cfg.step_size * g;
        }
        steps += 1;
    }
    let converged = grad_norm <= cfg.tolerance;
    Ok(LogisticFit {
        model: LinearModel::new(beta)?,
        converged,
        steps,
        grad_norm,
        lambda,
        divergence_risk: lambda == 0.0,
    })
}

/// Exact minimizer of the mean squared pseudo-label loss on accepted samples
/// plus `λ‖β‖²`, by a dense symmetric solve of the normal equations
/// `(M + λI)β = v` with `M = (1/N)Σ x xᵀ`, `v = (1/N)Σ sign(β₀ᵀx)·x`.
pub fn ridge_pseudo_fit(
    model_init: &LinearModel,
    data: &UnlabeledSet,
    gamma: f64,
    lambda: f64,
) -> Result<LinearModel> {
    assert!(lambda >= 0.0, "ridge_pseudo_fit: negative lambda");
    assert!(gamma >= 0.0, "ridge_pseudo_fit: negative threshold");
    let p = data.p();
    let threshold = gamma * model_init.norm();
    let mut gram = vec![0.0; p * p]; // upper triangle accumulated
    let mut rhs = vec![0.0; p];
    let mut accepted = 0usize;
    for x in data.iter() {
        let s = model_init.score(x);
        if s.abs() >= threshold {
            let y = sign_pm(s);
            for j in 0..p {
                let xj = x[j];
                let row = &mut gram[j * p..(j + 1) * p];
                for (k, &xk) in x.iter().enumerate().skip(j) {
                    row[k] += xj * xk;
                }
                rhs[j] += y * xj;
            }
            accepted += 1;
        }
    }
    if accepted == 0 {
        return Err(Error::AllRejected { round: 0 });
    }
    let n = accepted as f64;
    let mut m = nalgebra::DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        for k in j..p {
            let val = gram[j * p + k] / n;
            m[(j, k)] = val;
            m[(k, j)] = val;
        }
        m[(j, j)] += lambda;
    }
    let v = nalgebra::DVector::<f64>::from_iterator(p, rhs.iter().map(|r| r / n));
    let solved = m
        .cholesky()
        .map(|ch| ch.solve(&v))
        .ok_or(Error::IllPosed("accepted second-moment matrix is singular"))?;
    LinearModel::new(solved.data.into())
}

/// One-gradient-iteration estimator: the mean of `1(accept)·sign(β₀ᵀx)·x`
/// over **all** `u` samples (acceptance left unnormalized), which differs from
/// [`self_train_step`] only by the positive factor `accepted/u`.
pub fn early_stop_fit(
    model_init: &LinearModel,
    data: &UnlabeledSet,
    gamma: f64,
) -> Result<LinearModel> {
    let step = self_train_step(model_init, data, gamma)?;
    // Rescale mean-over-accepted into mean-over-all; the direction is shared.
    let select = pseudo_label_count(model_init, data, gamma);
    let c = select as f64 / data.count() as f64;
    LinearModel::new(step.beta().iter().map(|v| c * v).collect())
}

fn pseudo_label_count(model: &LinearModel, data: &UnlabeledSet, gamma: f64) -> usize {
    let threshold = gamma * model.norm();
    data.iter().filter(|x| model.score(x).abs() >= threshold).count()
}

/// Population accuracy `P(sign(βᵀx) = y) = 1 - Q(α/σ)` of a direction with
/// correlation `α` to `μ` on the Binary GMM with noise `σ > 0`.
pub fn accuracy_from_alignment(alpha: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "accuracy_from_alignment: sigma must be positive");
    debug_assert!((-1.0..=1.0).contains(&alpha));
    1.0 - q_tail(alpha / sigma)
}
