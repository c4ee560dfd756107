//! Finite-class statistical machinery: the margin loss, clustering error,
//! unsupervised ERM, empirical Rademacher complexity, the clustering-error
//! generalization bound, sublevel-set commonality, constrained ERM, and the
//! deterministic supervision-transfer guarantee.
//!
//! Hypothesis classes here are explicit finite lists of linear models, so
//! suprema, argmins and the commonality constant are exact enumerations and
//! the probabilistic statements become crisp frequency tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_unlabeled, LabeledSet, MixtureSpec, UnlabeledSet, XLaw};
use crate::estimators::LinearModel;
use crate::numerics::{normal_pdf, q_tail, SeedSpec};
use crate::parallel::map_indices;
use crate::{Error, Result};

/// An explicit, ordered hypothesis class of linear models. Members may carry
/// any nonzero scale; enumeration order is fixed and breaks all ties.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass {
    members: Vec<LinearModel>,
}

impl FiniteClass {
    pub fn new(members: Vec<LinearModel>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid_input("finite class: no members"));
        }
        Ok(FiniteClass { members })
    }

    /// `k` unit directions evenly spaced on the circle in dimension 2,
    /// starting at `e₁`.
    pub fn circle_directions(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid_input("finite class: no members"));
        }
        let members = (0..k)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                LinearModel::new(vec![theta.cos(), theta.sin()])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteClass { members })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn member(&self, k: usize) -> &LinearModel {
        &self.members[k]
    }

    pub fn members(&self) -> &[LinearModel] {
        &self.members
    }

    /// Every member scaled by `c > 0`, preserving order.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let members =
            self.members.iter().map(|m| m.scaled(c)).collect::<Result<Vec<_>>>()?;
        Ok(FiniteClass { members })
    }

    /// The class together with the negation of every member.
    pub fn with_mirrors(&self) -> Self {
        let mut members = self.members.clone();
        members.extend(self.members.iter().map(|m| m.negated()));
        FiniteClass { members }
    }
}

/// The margin loss `ℓ_γ: [0,∞) → [0,1]`: 1 on `[0,γ]`, the line `-x/γ + 2`
/// on `[γ,2γ]`, 0 beyond. Sandwiched by `1(x ≤ γ) ≤ ℓ_γ(x) ≤ 1(x ≤ 2γ)` and
/// `1/γ`-Lipschitz.
pub fn margin_loss(x: f64, gamma: f64) -> f64 {
    assert!(x >= 0.0, "margin_loss: negative margin");
    assert!(gamma > 0.0, "margin_loss: nonpositive width");
    if x <= gamma {
        1.0
    } else if x <= 2.0 * gamma {
        -x / gamma + 2.0
    } else {
        0.0
    }
}

/// A margin loss with fixed width, for passing around as a unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginLoss {
    pub gamma: f64,
}

impl MarginLoss {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid_input(format!("margin width {gamma} must be positive")));
        }
        Ok(MarginLoss { gamma })
    }

    pub fn eval(&self, x: f64) -> f64 {
        margin_loss(x, self.gamma)
    }
}

/// Empirical clustering error: the fraction of samples with `|βᵀx| ≤ γ`.
pub fn clustering_error(model: &LinearModel, data: &UnlabeledSet, gamma: f64) -> f64 {
    assert!(gamma > 0.0, "clustering_error: nonpositive width");
    let hits = data.iter().filter(|x| model.score(x).abs() <= gamma).count();
    hits as f64 / data.count() as f64
}

/// Antiderivative of the upper tail: `∫Q(z)dz = z·Q(z) - φ(z)`.
fn q_tail_antideriv(z: f64) -> f64 {
    z * q_tail(z) - normal_pdf(z)
}

/// Exact population clustering error `P(|βᵀx| ≤ γ)` of a linear model on a
/// mixture. The projection collapses to `yX·m + σ‖β‖·g` with `m = βᵀμ`, so
/// the probability is a one-dimensional normal integral with a closed form
/// for every supported scale law.
pub fn population_clustering_error(
    model: &LinearModel,
    spec: &MixtureSpec,
    gamma: f64,
) -> f64 {
    assert!(gamma > 0.0, "population_clustering_error: nonpositive width");
    assert!(spec.sigma() > 0.0, "population_clustering_error: needs sigma > 0");
    assert_eq!(model.p(), spec.p(), "population_clustering_error: dimension mismatch");
    let m = crate::numerics::dot(model.beta(), spec.mu()).abs();
    let s = spec.sigma() * model.norm();
    match spec.x_law() {
        XLaw::ConstantOne => point_mass_window(1.0, m, s, gamma),
        // y·|Z| is symmetric, so the projection is N(0, m² + s²).
        XLaw::FoldedNormal => 1.0 - 2.0 * q_tail(gamma / (m * m + s * s).sqrt()),
        XLaw::BoundedMargin { gamma: gm, m: cap, .. } => {
            let (l, h) = (*gm, cap * gm);
            if *cap == 1.0 || m == 0.0 {
                return point_mass_window(l, m, s, gamma);
            }
            // Average the window probability over X ~ U[l, h].
            let k = |x: f64, c: f64| q_tail_antideriv((x * m - c) / s);
            (s / (m * (h - l)))
                * ((k(h, gamma) - k(l, gamma)) - (k(h, -gamma) - k(l, -gamma)))
        }
    }
}

/// `P(|x·m + s·g| ≤ c)` for a fixed scale `x`.
fn point_mass_window(x: f64, m: f64, s: f64, c: f64) -> f64 {
    q_tail((x * m - c) / s) - q_tail((x * m + c) / s)
}

/// Unsupervised ERM over the class: the member index minimizing
/// `(1/u)·Σ ℓ_γ(|f(x_i)|)`, ties to the lowest index, with its risk.
pub fn unsup_erm(class: &FiniteClass, data: &UnlabeledSet, gamma: f64) -> (usize, f64) {
    assert!(data.count() >= 1, "unsup_erm: empty sample");
    let risks = map_indices(class.size(), |k| {
        let f = class.member(k);
        let mut sum = 0.0;
        for x in data.iter() {
            sum += margin_loss(f.score(x).abs(), gamma);
        }
        sum / data.count() as f64
    });
    let mut best = 0;
    for (k, &r) in risks.iter().enumerate() {
        if r < risks[best] {
            best = k;
        }
    }
    (best, risks[best])
}

/// Monte-Carlo empirical Rademacher complexity
/// `(1/u)·E[sup_f Σ ε_i f(x_i)]` with the supremum enumerated exactly;
/// returns the estimate and its standard error over `sign_draws` sign
/// vectors. Draw `d` uses the child stream `seed.child(d)`, so results do not
/// depend on evaluation order.
pub fn empirical_rademacher(
    class: &FiniteClass,
    data: &UnlabeledSet,
    sign_draws: usize,
    seed: SeedSpec,
) -> (f64, f64) {
    assert!(sign_draws >= 1, "empirical_rademacher: need at least one draw");
    let u = data.count();
    // Score matrix: member-major, sample-minor.
    let scores: Vec<Vec<f64>> = class
        .members()
        .iter()
        .map(|f| data.iter().map(|x| f.score(x)).collect())
        .collect();
    let sups = map_indices(sign_draws, |d| {
        let mut rng = seed.child(d as u64).rng();
        let signs: Vec<f64> =
            (0..u).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let mut sup = f64::NEG_INFINITY;
        for row in &scores {
            let mut acc = 0.0;
            for (s, v) in signs.iter().zip(row) {
                acc += s * v;
            }
            sup = sup.max(acc);
        }
        sup / u as f64
    });
    crate::numerics::mean_stderr(&sups)
}

/// Frequency test of the clustering-error generalization bound: across
/// trials, draw `u` samples, run [`unsup_erm`], and compare the selected
/// member's population clustering error at width `γ` against
///
/// `min_f P(|f(x)| ≤ 2γ) + (2/γ)·R̂_u + 2√(log(2/δ)/u)`,
///
/// where `R̂_u` is the trial's empirical Rademacher estimate. Returns the
/// fraction of trials in which the bound failed. The population error of the
/// selected member is a large-sample estimate; the class minimum is exact.
pub fn clustering_bound_check(
    class: &FiniteClass,
    spec: &MixtureSpec,
    gamma: f64,
    u: usize,
    delta: f64,
    trials: usize,
    seed: SeedSpec,
) -> f64 {
    assert!(trials >= 1, "clustering_bound_check: need at least one trial");
    assert!(delta > 0.0 && delta < 1.0, "clustering_bound_check: delta out of (0,1)");
    const POP_SAMPLES: usize = 100_000;
    const SIGN_DRAWS: usize = 64;
    let min_pop_wide = class
        .members()
        .iter()
        .map(|f| population_clustering_error(f, spec, 2.0 * gamma))
        .fold(f64::INFINITY, f64::min);
    let deviation = 2.0 * ((2.0 / delta).ln() / u as f64).sqrt();
    let violations = map_indices(trials, |t| {
        let trial_seed = seed.child(t as u64);
        let data = sample_unlabeled(spec, u, trial_seed.child(0));
        let (idx, _) = unsup_erm(class, &data, gamma);
        let pop_data = sample_unlabeled(spec, POP_SAMPLES, trial_seed.child(1));
        let pop_err = clustering_error(class.member(idx), &pop_data, gamma);
        let (rad, _) = empirical_rademacher(class, &data, SIGN_DRAWS, trial_seed.child(2));
        let rhs = min_pop_wide + (2.0 / gamma) * rad + deviation;
        pop_err > rhs
    });
    violations.iter().filter(|&&v| v).count() as f64 / trials as f64
}

/// The commonality constant of Def. of sublevel-set overlap: the smallest
/// `ε̃` such that some member is simultaneously `ε`-optimal for the strong
/// loss and `ε̃`-optimal for the weak loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommonalityReport {
    pub epsilon: f64,
    pub epsilon_tilde: f64,
    /// Member index attaining the intersection (lowest index on ties).
    pub witness: usize,
}

/// Exact `ε̃` by enumeration over the strong-loss sublevel set
/// `{k : L(k) ≤ min L + ε}`: the smallest weak-loss excess attained there.
pub fn epsilon_tilde(pop_l: &[f64], pop_lt: &[f64], epsilon: f64) -> Result<CommonalityReport> {
    if pop_l.is_empty() || pop_l.len() != pop_lt.len() {
        return Err(Error::invalid_input("epsilon_tilde: mismatched loss vectors"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid_input(format!("epsilon_tilde: epsilon {epsilon} must be positive")));
    }
    let min_l = pop_l.iter().copied().fold(f64::INFINITY, f64::min);
    let min_lt = pop_lt.iter().copied().fold(f64::INFINITY, f64::min);
    let mut witness = None;
    let mut best = f64::INFINITY;
    for k in 0..pop_l.len() {
        if pop_l[k] <= min_l + epsilon && pop_lt[k] - min_lt < best {
            best = pop_lt[k] - min_lt;
            witness = Some(k);
        }
    }
    // The sublevel set always contains the strong-loss minimizer.
    let witness = witness.expect("strong-loss sublevel set cannot be empty");
    Ok(CommonalityReport { epsilon, epsilon_tilde: best, witness })
}

/// Margin surrogate label loss `min(1, max(0, 1 - y·f(x)))`: bounded in
/// `[0,1]` and 1-Lipschitz in the score.
pub fn hinge01(y: f64, score: f64) -> f64 {
    (1.0 - y * score).clamp(0.0, 1.0)
}

/// Empirical strong risk `(1/n)·Σ ℓ(y_i, f(x_i))` of one member.
pub fn labeled_risk<L>(model: &LinearModel, data: &LabeledSet, loss: &L) -> f64
where
    L: Fn(f64, f64) -> f64,
{
    let mut sum = 0.0;
    for (y, x) in data.iter() {
        sum += loss(y, model.score(x));
    }
    sum / data.count() as f64
}

/// Empirical weak risk `(1/u)·Σ ℓ̃(f(x_i))` of one member.
pub fn unlabeled_risk<U>(model: &LinearModel, data: &UnlabeledSet, loss: &U) -> f64
where
    U: Fn(f64) -> f64,
{
    let mut sum = 0.0;
    for x in data.iter() {
        sum += loss(model.score(x));
    }
    sum / data.count() as f64
}

/// Constrained ERM over the class: among members with weak risk
/// `L̃_U(f) ≤ Ξ`, the one minimizing the strong risk `L_S` (ties to the
/// lowest index). Returns the index and its strong risk.
pub fn constrained_erm<L, U>(
    class: &FiniteClass,
    labeled: &LabeledSet,
    unlabeled: &UnlabeledSet,
    label_loss: &L,
    pseudo_loss: &U,
    xi: f64,
) -> Result<(usize, f64)>
where
    L: Fn(f64, f64) -> f64,
    U: Fn(f64) -> f64,
{
    let mut best: Option<(usize, f64)> = None;
    for k in 0..class.size() {
        let f = class.member(k);
        if unlabeled_risk(f, unlabeled, pseudo_loss) > xi {
            continue;
        }
        let risk = labeled_risk(f, labeled, label_loss);
        if best.map_or(true, |(_, b)| risk < b) {
            best = Some((k, risk));
        }
    }
    best.ok_or(Error::Infeasible { xi })
}

/// Outcome of one deterministic transfer check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub epsilon: f64,
    pub delta: f64,
    pub xi_bar: f64,
    /// Exact commonality constant of the population losses.
    pub epsilon_tilde: f64,
    /// `Ξ̄ ≥ ε̃ + δ`.
    pub premise_margin: bool,
    /// `max_k |L̃(k) - L̃_U(k)| ≤ δ` over the whole class.
    pub premise_unsup_close: bool,
    /// `max_k |L(k) - L_S(k)| ≤ ε` over the sublevel set `𝓕_{L̃, Ξ̄+δ}`.
    pub premise_sup_close: bool,
    pub premises_hold: bool,
    /// Empirical constrained minimizer at `Ξ = Ξ̄ + min L̃`, when feasible.
    pub selected: Option<usize>,
    /// `L(f̂) - min L`, when a member was selected.
    pub excess_risk: Option<f64>,
    /// `L(f̂) ≤ min L + 3ε`; asserted only when the premises hold.
    pub conclusion_holds: Option<bool>,
}

/// Check the deterministic supervision-transfer guarantee on explicit loss
/// vectors: verify the closeness premises by enumeration, solve the
/// constrained empirical problem at `Ξ = Ξ̄ + min_k L̃(k)`, and when the
/// premises hold record whether `L(f̂) ≤ min L + 3ε`. Premise failures
/// downgrade the conclusion to unasserted rather than erroring.
pub fn deterministic_transfer_check(
    pop_l: &[f64],
    pop_lt: &[f64],
    emp_l: &[f64],
    emp_lt: &[f64],
    epsilon: f64,
    delta: f64,
    xi_bar: f64,
) -> Result<TransferReport> {
    let k = pop_l.len();
    if k == 0 || pop_lt.len() != k || emp_l.len() != k || emp_lt.len() != k {
        return Err(Error::invalid_input("transfer check: mismatched loss vectors"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid_input(format!("transfer check: delta {delta} negative")));
    }
    let commonality = epsilon_tilde(pop_l, pop_lt, epsilon)?;
    let eps_tilde = commonality.epsilon_tilde;
    let min_l = pop_l.iter().copied().fold(f64::INFINITY, f64::min);
    let min_lt = pop_lt.iter().copied().fold(f64::INFINITY, f64::min);

    let premise_margin = xi_bar >= eps_tilde + delta;
    let premise_unsup_close =
        (0..k).all(|i| (pop_lt[i] - emp_lt[i]).abs() <= delta);
    // The sublevel set 𝓕_{L̃, Ξ̄+δ} over which strong closeness must hold.
    let premise_sup_close = (0..k)
        .filter(|&i| pop_lt[i] <= min_lt + xi_bar + delta)
        .all(|i| (pop_l[i] - emp_l[i]).abs() <= epsilon);
    let premises_hold = premise_margin && premise_unsup_close && premise_sup_close;

    let xi = xi_bar + min_lt;
    let mut selected: Option<usize> = None;
    for i in 0..k {
        if emp_lt[i] <= xi && selected.map_or(true, |s| emp_l[i] < emp_l[s]) {
            selected = Some(i);
        }
    }
    let excess_risk = selected.map(|s| pop_l[s] - min_l);
    let conclusion_holds = premises_hold
        .then(|| matches!(excess_risk, Some(e) if e <= 3.0 * epsilon));
    Ok(TransferReport {
        epsilon,
        delta,
        xi_bar,
        epsilon_tilde: eps_tilde,
        premise_margin,
        premise_unsup_close,
        premise_sup_close,
        premises_hold,
        selected,
        excess_risk,
        conclusion_holds,
    })
}

/// A randomized toy transfer instance: population loss vectors with
/// perturbed empirical counterparts and parameters drawn wide enough that
/// both premise outcomes occur with substantial probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferInstance {
    pub pop_l: Vec<f64>,
    pub pop_lt: Vec<f64>,
    pub emp_l: Vec<f64>,
    pub emp_lt: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub xi_bar: f64,
}

impl TransferInstance {
    pub fn random(k: usize, seed: SeedSpec) -> Self {
        assert!(k >= 1, "transfer instance: empty class");
        let mut rng = seed.rng();
        let pop_l: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let pop_lt: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let epsilon = 0.05 + 0.45 * rng.gen::<f64>();
        let delta = 0.01 + 0.29 * rng.gen::<f64>();
        // Perturbations sized around the tolerances so premises hold often
        // but not always.
        let e_scale = epsilon * 1.2 * rng.gen::<f64>();
        let d_scale = delta * 1.2 * rng.gen::<f64>();
        let emp_l: Vec<f64> =
            pop_l.iter().map(|&v| v + e_scale * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let emp_lt: Vec<f64> =
            pop_lt.iter().map(|&v| v + d_scale * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        let eps_tilde = epsilon_tilde(&pop_l, &pop_lt, epsilon)
            .expect("nonempty instance")
            .epsilon_tilde;
        let xi_bar = eps_tilde + delta + 0.35 * rng.gen::<f64>() - 0.05;
        TransferInstance { pop_l, pop_lt, emp_l, emp_lt, epsilon, delta, xi_bar }
    }

    pub fn check(&self) -> Result<TransferReport> {
        deterministic_transfer_check(
            &self.pop_l,
            &self.pop_lt,
            &self.emp_l,
            &self.emp_lt,
            self.epsilon,
            self.delta,
            self.xi_bar,
        )
    }
}
