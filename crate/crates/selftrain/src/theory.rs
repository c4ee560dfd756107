//! Closed-form predictions for self-training on the Binary GMM: the
//! threshold quantities (ρ, ν, Λ), the non-asymptotic co-tangent sandwich,
//! the asymptotic co-tangent map `F_ū` and its iteration, the ridge and
//! early-stopping improvement factors, the margin lower bound for general
//! mixtures, and the rejection/folded-tail upper bounds.

use serde::{Deserialize, Serialize};

use crate::distributions::XLaw;
use crate::numerics::{gamma_norm_sq, normal_pdf, q_tail};
use crate::{Error, Result};

/// The scalar quantities driving every Binary GMM prediction, at a given
/// initial correlation `α`, noise `σ` and acceptance threshold `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainQuantities {
    /// Normalized upper threshold `(Γ - α)/σ`.
    pub gbar_plus: f64,
    /// Normalized lower threshold `(α + Γ)/σ`.
    pub gbar_minus: f64,
    /// Signal gain `(φ(Γ̄₊) + φ(Γ̄₋))/ρ`.
    pub lambda: f64,
    /// Acceptance probability `Q(Γ̄₊) + Q(Γ̄₋)`.
    pub rho: f64,
    /// Mislabel share `Q(Γ̄₋)/ρ` among accepted samples.
    pub nu: f64,
}

/// Evaluate the threshold quantities. Requires `α ∈ (0, 1]`, `σ > 0`,
/// `Γ ≥ 0`; `ρ` is strictly positive because normal tails never vanish.
pub fn quantities(alpha: f64, sigma: f64, gamma: f64) -> SelfTrainQuantities {
    assert!(alpha > 0.0 && alpha <= 1.0, "quantities: correlation out of (0,1]");
    assert!(sigma > 0.0, "quantities: sigma must be positive");
    assert!(gamma >= 0.0, "quantities: negative threshold");
    let gbar_plus = (gamma - alpha) / sigma;
    let gbar_minus = (alpha + gamma) / sigma;
    let rho = q_tail(gbar_plus) + q_tail(gbar_minus);
    let nu = q_tail(gbar_minus) / rho;
    let lambda = (normal_pdf(gbar_plus) + normal_pdf(gbar_minus)) / rho;
    SelfTrainQuantities { gbar_plus, gbar_minus, lambda, rho, nu }
}

/// One application of the asymptotic co-tangent map,
///
/// `F_ū(x) = (1 + σΛx/√(1+x²) - 2ν) / (σ√(Λ²/(1+x²) + 1/(ūρ)))`,
///
/// with the quantities recomputed internally at `α = x/√(1+x²)`.
pub fn cot_update(x: f64, sigma: f64, gamma: f64, u_bar: f64) -> f64 {
    assert!(x > 0.0, "cot_update: co-tangent must be positive");
    assert!(u_bar > 0.0, "cot_update: u_bar must be positive");
    let alpha = x / (1.0 + x * x).sqrt();
    let q = quantities(alpha, sigma, gamma);
    let num = 1.0 + sigma * q.lambda * alpha - 2.0 * q.nu;
    let den = sigma * (q.lambda * q.lambda / (1.0 + x * x) + 1.0 / (u_bar * q.rho)).sqrt();
    num / den
}

/// The `ū → ∞` limit of [`cot_update`]: the sampling term `1/(ūρ)` dropped.
pub fn cot_update_infinite(x: f64, sigma: f64, gamma: f64) -> f64 {
    assert!(x > 0.0, "cot_update_infinite: co-tangent must be positive");
    let alpha = x / (1.0 + x * x).sqrt();
    let q = quantities(alpha, sigma, gamma);
    (1.0 + sigma * q.lambda * alpha - 2.0 * q.nu)
        / (sigma * q.lambda * (1.0 - alpha * alpha).sqrt())
}

/// Asymptotic co-tangent of one self-training step started at correlation
/// `α`, at aspect ratio `ū = u/p`.
pub fn asymptotic_cot(alpha: f64, sigma: f64, gamma: f64, u_bar: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "asymptotic_cot: correlation out of (0,1)");
    cot_update(alpha / (1.0 - alpha * alpha).sqrt(), sigma, gamma, u_bar)
}

/// Non-asymptotic co-tangent sandwich at resolution `ε`, with its asymptotic
/// member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
    pub asymptotic: f64,
}

/// The two-sided high-probability bound on `cot(β̂, μ)` after one
/// self-training step from correlation `α` with `u` samples in dimension `p`:
///
/// upper `= (1 + σαΛ - 2ν + (1+σ)ε) / (σ√((βΛ-ε)₊² + (1-ε)₊²·γ_{p-2}/(uρ)))`,
/// lower `= (1 + σαΛ - 2ν - (1+σ)ε) / (σ√((βΛ+ε)²  + (1+ε)² ·γ_{p-2}/(uρ)))`,
///
/// where `β = √(1-α²)` and `γ_q` is the squared mean norm of a `q`-dim
/// standard Gaussian. The accompanying probability holds for an unspecified
/// absolute constant, so callers validate coverage empirically rather than
/// reading a failure rate off `ε`.
pub fn cot_bounds(
    alpha: f64,
    sigma: f64,
    gamma: f64,
    p: usize,
    u: usize,
    epsilon: f64,
) -> Result<CotBounds> {
    assert!(alpha > 0.0 && alpha < 1.0, "cot_bounds: correlation out of (0,1)");
    assert!(u >= 1, "cot_bounds: need at least one sample");
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidResolution {
            epsilon,
            reason: "resolution must lie in (0, 1/2)",
        });
    }
    if p < 2 {
        return Err(Error::invalid_input(format!("cot_bounds: dimension {p} below 2")));
    }
    let q = quantities(alpha, sigma, gamma);
    let beta = (1.0 - alpha * alpha).sqrt();
    let signal = 1.0 + sigma * alpha * q.lambda - 2.0 * q.nu;
    let noise = gamma_norm_sq(p - 2) / (u as f64 * q.rho);
    let clamp = |v: f64| v.max(0.0);
    let den_upper_sq =
        clamp(beta * q.lambda - epsilon).powi(2) + clamp(1.0 - epsilon).powi(2) * noise;
    let den_lower_sq = (beta * q.lambda + epsilon).powi(2) + (1.0 + epsilon).powi(2) * noise;
    if den_upper_sq <= 0.0 || den_lower_sq <= 0.0 {
        return Err(Error::InvalidResolution {
            epsilon,
            reason: "denominator vanishes at this resolution",
        });
    }
    let u_bar = u as f64 / p as f64;
    Ok(CotBounds {
        lower: (signal - (1.0 + sigma) * epsilon) / (sigma * den_lower_sq.sqrt()),
        upper: (signal + (1.0 + sigma) * epsilon) / (sigma * den_upper_sq.sqrt()),
        epsilon,
        asymptotic: asymptotic_cot(alpha, sigma, gamma, u_bar),
    })
}

/// Predicted co-tangent after `τ` fresh-batch self-training rounds started
/// from the supervised model: the `τ`-fold composition `F_ū^τ(√n̄/σ)`.
pub fn iterate_prediction(n_bar: f64, u_bar: f64, sigma: f64, gamma: f64, tau: usize) -> f64 {
    assert!(n_bar > 0.0, "iterate_prediction: n_bar must be positive");
    assert!(sigma > 0.0, "iterate_prediction: sigma must be positive");
    let mut x = n_bar.sqrt() / sigma;
    for _ in 0..tau {
        x = cot_update(x, sigma, gamma, u_bar);
    }
    x
}

/// The aspect ratio `ū` at which one self-training round neither helps nor
/// hurts a model at co-tangent `x`: the root of `F_ū(x) = x` in `ū`, found by
/// bisection. A root exists for every valid input because the infinite-data
/// map strictly improves (`ν < 1/2` whenever `α > 0`); `None` is returned
/// only if the root escapes the search range `[1e-9, 1e9]`.
pub fn fixed_point_u_bar(x: f64, sigma: f64, gamma: f64) -> Option<f64> {
    let (mut lo, mut hi) = (1e-9, 1e9);
    if cot_update(x, sigma, gamma, hi) < x || cot_update(x, sigma, gamma, lo) >= x {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cot_update(x, sigma, gamma, mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Ridge improvement factor `κ(λ) = ((1+σ²)/σ²)·((σ²+λ)/(1+σ²+λ))`: the
/// co-tangent ratio `cot(β̂,μ)/cot(β_init,μ)` of the ridge pseudo-label fit
/// at `Γ = 0` in the population limit. Strictly increasing in `λ`, with
/// `κ(0) = 1` and `κ(∞) = 1 + σ⁻²`.
pub fn ridge_kappa(lambda: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "ridge_kappa: sigma must be positive");
    assert!(lambda >= 0.0, "ridge_kappa: negative lambda");
    let s2 = sigma * sigma;
    if lambda.is_infinite() {
        return 1.0 + 1.0 / s2;
    }
    ((1.0 + s2) / s2) * ((s2 + lambda) / (1.0 + s2 + lambda))
}

/// Early-stopping improvement factor `1 + σ⁻²`: the co-tangent shrinks by
/// exactly this factor after one unnormalized gradient iteration, at any
/// threshold. Coincides with the signal-to-noise eigenvalue ratio
/// `(1+σ²)/σ²` of the mixture's second moment.
pub fn early_stop_factor(sigma: f64) -> f64 {
    assert!(sigma > 0.0, "early_stop_factor: sigma must be positive");
    1.0 + 1.0 / (sigma * sigma)
}

/// The general-mixture lower bound on the refit co-tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginBound {
    /// `(σe^C/4)·γ·(1 - 6e^{-C}M)` with `C = α²γ²/(2σ²)`; can be nonpositive.
    pub bound: f64,
    /// Whether `αγ > √(2·log(12M))·σ`, enabling the strong form.
    pub condition_met: bool,
    /// `0.1·σγ·e^{α²γ²/σ²}` when the condition holds.
    pub strong_bound: Option<f64>,
    /// Set when the general bound is nonpositive (vacuous, kept unclamped).
    pub vacuous: bool,
}

/// Lower bound on `cot(β̂, μ)` for ridgeless least-squares on pseudo-labels
/// from a margin-`γ` mixture with `M`-bounded scale. Domain: `1 ≥ γ ≥ σ > 0`,
/// `M ≥ 1`, `α ∈ (0, 1]`.
pub fn margin_lower_bound(alpha: f64, gamma: f64, sigma: f64, m: f64) -> Result<MarginBound> {
    if !(gamma <= 1.0 && sigma <= gamma && sigma > 0.0) {
        return Err(Error::invalid_input(format!(
            "margin_lower_bound: need 1 >= gamma >= sigma > 0, got gamma={gamma}, sigma={sigma}"
        )));
    }
    if !(m >= 1.0) {
        return Err(Error::invalid_input(format!("margin_lower_bound: need M >= 1, got {m}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid_input(format!(
            "margin_lower_bound: need correlation in (0,1], got {alpha}"
        )));
    }
    let c = alpha * alpha * gamma * gamma / (2.0 * sigma * sigma);
    let bound = (sigma * c.exp() / 4.0) * gamma * (1.0 - 6.0 * (-c).exp() * m);
    let condition_met = alpha * gamma > (2.0 * (12.0 * m).ln()).sqrt() * sigma;
    let strong_bound =
        condition_met.then(|| 0.1 * sigma * gamma * (2.0 * c).exp());
    Ok(MarginBound { bound, condition_met, strong_bound, vacuous: bound <= 0.0 })
}

/// Upper bound on the probability that an accepted sample's pseudo-label
/// disagrees with the sign of its clean projection `μᵀz`, for an initial
/// direction at correlation `α` against a mixture whose scale variable obeys
/// `X ≥ γ = σγ̄`, with the acceptance threshold parametrized as `Γ = ασΓ̄`:
///
/// - `Γ̄ = 0`: `2Q(αγ̄)`;
/// - `Γ̄ > 0`: `2·(Q(γ̄)·Q(αΓ̄/√(1-α²)) + Q(α(γ̄+Γ̄)))/Q_X(Γ̄)`,
///
/// with `Q_X` the upper tail of the scale variable `X`. Infinite when the
/// acceptance event has zero probability under `X` (vacuous bound).
pub fn rejection_mislabel_bound(alpha: f64, gbar: f64, cap_gbar: f64, x_law: &XLaw) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0, "rejection_mislabel_bound: correlation out of (0,1)");
    assert!(gbar > 0.0, "rejection_mislabel_bound: margin must be positive");
    assert!(cap_gbar >= 0.0, "rejection_mislabel_bound: negative threshold");
    if cap_gbar == 0.0 {
        return 2.0 * q_tail(alpha * gbar);
    }
    let beta = (1.0 - alpha * alpha).sqrt();
    let num = q_tail(gbar) * q_tail(alpha * cap_gbar / beta) + q_tail(alpha * (gbar + cap_gbar));
    2.0 * num / x_law.q_upper(cap_gbar)
}

/// Upper bound `√(2/π)·e^{-α²/2}` on `E[1(E)·|g|]` for any event `E` whose
/// probability is at most the folded-normal tail `P(|g| > α)`. Tight for the
/// event `{|g| > α}` itself.
pub fn folded_tail_bound(alpha: f64) -> f64 {
    assert!(alpha >= 0.0, "folded_tail_bound: negative threshold");
    (2.0 / std::f64::consts::PI).sqrt() * (-alpha * alpha / 2.0).exp()
}
