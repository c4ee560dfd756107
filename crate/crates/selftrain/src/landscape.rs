//! Loss landscapes along the mean direction: the supervised quadratic, the
//! pseudo-label (unsupervised) loss, their regularized and constrained
//! semi-supervised combinations, finite-difference gradient magnitudes, and
//! the scale-degeneracy curve of monotone losses.
//!
//! Every scan restricts the population losses to the ray `β = α·μ`, where the
//! projections collapse to the scalar `t = yX + σg`: acceptance at `α ≠ 0`
//! reads `|t| ≥ Γ`, and the losses become one-dimensional expectations. All
//! Monte-Carlo scans share one set of draws across the whole grid (common
//! random numbers), so curves are smooth in `α` and rerunning a scan with the
//! same seed is bitwise reproducible.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::XLaw;
use crate::estimators::{sign_pm, LinearModel};
use crate::numerics::SeedSpec;
use crate::parallel::map_indices;
use crate::{Error, Result};

/// Which curve a [`RayScan`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayKind {
    Supervised,
    Unsupervised,
    SemisupRegularized,
    SemisupConstraintIndicator,
    GradientNormSupervised,
    GradientNormUnsupervised,
    ScaleDecay,
}

impl RayKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RayKind::Supervised => "supervised",
            RayKind::Unsupervised => "unsupervised",
            RayKind::SemisupRegularized => "semisup_regularized",
            RayKind::SemisupConstraintIndicator => "semisup_constraint_indicator",
            RayKind::GradientNormSupervised => "gradient_norm_supervised",
            RayKind::GradientNormUnsupervised => "gradient_norm_unsupervised",
            RayKind::ScaleDecay => "scale_decay",
        }
    }
}

/// A curve evaluated on a strictly increasing `α` grid. Flagged points mark
/// unstable quotients (acceptance probability too small to trust); their
/// value and standard error are placeholder zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayScan {
    kind: RayKind,
    alphas: Vec<f64>,
    values: Vec<f64>,
    std_errors: Vec<f64>,
    flagged: Vec<bool>,
}

impl RayScan {
    fn new(
        kind: RayKind,
        alphas: Vec<f64>,
        values: Vec<f64>,
        std_errors: Vec<f64>,
        flagged: Vec<bool>,
    ) -> Result<Self> {
        if alphas.is_empty()
            || alphas.len() != values.len()
            || alphas.len() != std_errors.len()
            || alphas.len() != flagged.len()
        {
            return Err(Error::invalid_input("ray scan: mismatched column lengths"));
        }
        if alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid_input("ray scan: grid must be strictly increasing"));
        }
        if values.iter().chain(&std_errors).any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("ray scan: non-finite value"));
        }
        Ok(RayScan { kind, alphas, values, std_errors, flagged })
    }

    pub fn kind(&self) -> RayKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn std_errors(&self) -> &[f64] {
        &self.std_errors
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    /// `(alpha, value, std_error, flagged)` at index `i`.
    pub fn point(&self, i: usize) -> (f64, f64, f64, bool) {
        (self.alphas[i], self.values[i], self.std_errors[i], self.flagged[i])
    }

    /// Index of the smallest unflagged value; ties break to the left.
    pub fn min_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.len() {
            if self.flagged[i] {
                continue;
            }
            if best.map_or(true, |b| self.values[i] < self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Write the scan as CSV with header `alpha,value,std_error,flagged`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["alpha", "value", "std_error", "flagged"])?;
        for i in 0..self.len() {
            w.write_record([
                format_f64(self.alphas[i]),
                format_f64(self.values[i]),
                format_f64(self.std_errors[i]),
                (self.flagged[i] as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest `f64` text that round-trips; keeps CSV output byte-stable.
pub(crate) fn format_f64(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

/// `count` evenly spaced grid points covering `[lo, hi]` inclusive.
pub fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo < hi, "grid: need at least two increasing points");
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let last = (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                // The offset (2i - (count-1)) is an exact integer that negates
                // under i -> count-1-i, so a symmetric range (center == 0)
                // yields bit-for-bit mirrored points.
                center + half * ((2 * i) as f64 - last) / last
            }
        })
        .collect()
}

/// The default landscape grid: 401 points on `[-3, 3]`.
pub fn default_grid() -> Vec<f64> {
    grid(-3.0, 3.0, 401)
}

/// Semi-supervised combination parameters: the regularized mixing weight, the
/// constraint level, and the acceptance threshold of the pseudo-label loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiSupSpec {
    pub mix_rho: f64,
    pub constraint_xi: f64,
    pub gamma: f64,
}

impl SemiSupSpec {
    pub fn new(mix_rho: f64, constraint_xi: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mix_rho) {
            return Err(Error::invalid_input(format!("mix weight {mix_rho} outside [0,1]")));
        }
        if !(constraint_xi >= 0.0) {
            return Err(Error::invalid_input(format!("constraint level {constraint_xi} negative")));
        }
        if !(gamma >= 0.0) {
            return Err(Error::invalid_input(format!("threshold {gamma} negative")));
        }
        Ok(SemiSupSpec { mix_rho, constraint_xi, gamma })
    }
}

/// Closed-form supervised population loss `½((E[X²]+σ²)α² - 2E[X]α + 1)` on
/// the grid.
pub fn supervised_loss_ray(x_law: &XLaw, sigma: f64, alphas: &[f64]) -> Result<RayScan> {
    assert!(sigma >= 0.0, "supervised_loss_ray: negative noise");
    let a2 = x_law.second_moment() + sigma * sigma;
    let a1 = x_law.mean();
    let values: Vec<f64> =
        alphas.iter().map(|&a| 0.5 * (a2 * a * a - 2.0 * a1 * a + 1.0)).collect();
    let n = alphas.len();
    RayScan::new(RayKind::Supervised, alphas.to_vec(), values, vec![0.0; n], vec![false; n])
}

/// The supervised minimizer `β* = E[X]/(E[X²]+σ²)` along the ray.
pub fn supervised_minimizer(x_law: &XLaw, sigma: f64) -> f64 {
    x_law.mean() / (x_law.second_moment() + sigma * sigma)
}

/// Scalar mixture draws `t = yX + σg` shared by all Monte-Carlo scans.
fn draw_projections(x_law: &XLaw, sigma: f64, mc_samples: usize, seed: SeedSpec) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..mc_samples)
        .map(|_| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let x = x_law.sample(&mut rng);
            let g: f64 = rng.sample(StandardNormal);
            y * x + sigma * g
        })
        .collect()
}

/// Acceptance-probability floor below which a ratio estimate is flagged.
const MIN_ACCEPTANCE: f64 = 1e-3;

/// Monte-Carlo pseudo-label loss
/// `½·E[1(|t|≥Γ)(sgn(αt) - αt)²] / P(|t|≥Γ)` per grid point, via a ratio
/// estimator on draws shared across the grid. At `α = 0` every sample is
/// accepted and the loss is exactly `1/2`.
pub fn unsupervised_loss_ray(
    x_law: &XLaw,
    sigma: f64,
    gamma: f64,
    alphas: &[f64],
    mc_samples: usize,
    seed: SeedSpec,
) -> Result<RayScan> {
    assert!(sigma >= 0.0 && gamma >= 0.0, "unsupervised_loss_ray: negative parameter");
    assert!(mc_samples >= 1000, "unsupervised_loss_ray: need at least 10^3 samples");
    let t = draw_projections(x_law, sigma, mc_samples, seed);
    let points = map_indices(alphas.len(), |i| unsup_point(&t, gamma, alphas[i]));
    scan_from_points(RayKind::Unsupervised, alphas, points)
}

/// `(value, std_error, flagged)` of the pseudo-label loss at one `α`.
fn unsup_point(t: &[f64], gamma: f64, alpha: f64) -> (f64, f64, bool) {
    if alpha == 0.0 {
        // β = 0: the margin condition 0 ≥ Γ·0 always holds and sgn(0) = +1.
        return (0.5, 0.0, false);
    }
    let n = t.len() as f64;
    let mut sum = 0.0;
    let mut accepted = 0usize;
    for &ti in t {
        if ti.abs() >= gamma {
            let s = alpha * ti;
            let r = sign_pm(s) - s;
            sum += 0.5 * r * r;
            accepted += 1;
        }
    }
    if (accepted as f64) < MIN_ACCEPTANCE * n {
        return (0.0, 0.0, true);
    }
    let value = sum / accepted as f64;
    let mut var = 0.0;
    for &ti in t {
        if ti.abs() >= gamma {
            let s = alpha * ti;
            let r = sign_pm(s) - s;
            let d = 0.5 * r * r - value;
            var += d * d;
        }
    }
    (value, var.sqrt() / accepted as f64, false)
}

fn scan_from_points(
    kind: RayKind,
    alphas: &[f64],
    points: Vec<(f64, f64, bool)>,
) -> Result<RayScan> {
    let values = points.iter().map(|p| p.0).collect();
    let errs = points.iter().map(|p| p.1).collect();
    let flags = points.iter().map(|p| p.2).collect();
    RayScan::new(kind, alphas.to_vec(), values, errs, flags)
}

/// Regularized semi-supervised loss `(1-ρ)·L + ρ·L̃` on the grid; the exact
/// affine combination of [`supervised_loss_ray`] and
/// [`unsupervised_loss_ray`] at the same seed.
pub fn semisup_ray(
    spec: &SemiSupSpec,
    x_law: &XLaw,
    sigma: f64,
    alphas: &[f64],
    mc_samples: usize,
    seed: SeedSpec,
) -> Result<RayScan> {
    let sup = supervised_loss_ray(x_law, sigma, alphas)?;
    let unsup = unsupervised_loss_ray(x_law, sigma, spec.gamma, alphas, mc_samples, seed)?;
    let rho = spec.mix_rho;
    let values: Vec<f64> = sup
        .values()
        .iter()
        .zip(unsup.values())
        .map(|(&s, &u)| (1.0 - rho) * s + rho * u)
        .collect();
    let errs: Vec<f64> = unsup.std_errors().iter().map(|&e| rho * e).collect();
    RayScan::new(
        RayKind::SemisupRegularized,
        alphas.to_vec(),
        values,
        errs,
        unsup.flagged().to_vec(),
    )
}

/// Feasibility indicator `1(L̃(α) ≤ Ξ)` of the constrained formulation on the
/// grid.
pub fn constraint_indicator_ray(
    spec: &SemiSupSpec,
    x_law: &XLaw,
    sigma: f64,
    alphas: &[f64],
    mc_samples: usize,
    seed: SeedSpec,
) -> Result<RayScan> {
    let unsup = unsupervised_loss_ray(x_law, sigma, spec.gamma, alphas, mc_samples, seed)?;
    let values: Vec<f64> = unsup
        .values()
        .iter()
        .zip(unsup.flagged())
        .map(|(&u, &fl)| if !fl && u <= spec.constraint_xi { 1.0 } else { 0.0 })
        .collect();
    let n = alphas.len();
    RayScan::new(
        RayKind::SemisupConstraintIndicator,
        alphas.to_vec(),
        values,
        vec![0.0; n],
        unsup.flagged().to_vec(),
    )
}

/// Which loss a gradient scan differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientTarget {
    Supervised,
    Unsupervised,
}

/// Central finite-difference magnitude `|dL/dα|` of the chosen ray loss, with
/// the difference step equal to the grid spacing (one-sided at the ends).
/// Standard errors combine the two endpoint errors without exploiting the
/// shared draws, so they overestimate.
pub fn gradient_norm_ray(
    target: GradientTarget,
    x_law: &XLaw,
    sigma: f64,
    gamma: f64,
    alphas: &[f64],
    mc_samples: usize,
    seed: SeedSpec,
) -> Result<RayScan> {
    let (base, kind) = match target {
        GradientTarget::Supervised => {
            (supervised_loss_ray(x_law, sigma, alphas)?, RayKind::GradientNormSupervised)
        }
        GradientTarget::Unsupervised => (
            unsupervised_loss_ray(x_law, sigma, gamma, alphas, mc_samples, seed)?,
            RayKind::GradientNormUnsupervised,
        ),
    };
    let n = alphas.len();
    if n < 2 {
        return Err(Error::invalid_input("gradient scan: need at least two grid points"));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i + 1 == n {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dx = base.alphas()[hi] - base.alphas()[lo];
        let slope = (base.values()[hi] - base.values()[lo]) / dx;
        let se = (base.std_errors()[hi].powi(2) + base.std_errors()[lo].powi(2)).sqrt() / dx;
        let fl = base.flagged()[lo] || base.flagged()[hi];
        points.push(if fl { (0.0, 0.0, true) } else { (slope.abs(), se, false) });
    }
    scan_from_points(kind, alphas, points)
}

/// A nonincreasing classification loss with `ℓ(v) → 0` as `v → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneLoss {
    /// `ln(1 + e^{-v})`; value `ln 2` at zero.
    Logistic,
    /// `e^{-v}`; value 1 at zero.
    Exponential,
}

impl MonotoneLoss {
    pub fn eval(&self, v: f64) -> f64 {
        match self {
            MonotoneLoss::Logistic => {
                if v > 0.0 {
                    (-v).exp().ln_1p()
                } else {
                    -v + v.exp().ln_1p()
                }
            }
            MonotoneLoss::Exponential => (-v).exp(),
        }
    }
}

/// Scale-degeneracy curve `α ↦ E[ℓ(α·|βᵀx|)]` for a fixed direction `β`
/// against the mixture with mean `e₁`, scale law `x_law` and noise `σ`.
/// Shared draws make the curve pointwise nonincreasing, not just on average.
pub fn scale_decay_curve(
    model: &LinearModel,
    x_law: &XLaw,
    sigma: f64,
    loss: MonotoneLoss,
    alpha_grid: &[f64],
    mc_samples: usize,
    seed: SeedSpec,
) -> Result<RayScan> {
    assert!(sigma >= 0.0, "scale_decay_curve: negative noise");
    assert!(mc_samples >= 2, "scale_decay_curve: need at least two samples");
    if alpha_grid.iter().any(|&a| a < 0.0) {
        return Err(Error::invalid_input("scale_decay_curve: negative scale"));
    }
    // βᵀx = yX·β₁ + σ‖β‖·g along the mean direction e₁.
    let b1 = model.beta()[0];
    let noise = sigma * model.norm();
    let mut rng = seed.rng();
    let t: Vec<f64> = (0..mc_samples)
        .map(|_| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let x = x_law.sample(&mut rng);
            let g: f64 = rng.sample(StandardNormal);
            (y * x * b1 + noise * g).abs()
        })
        .collect();
    let points = map_indices(alpha_grid.len(), |i| {
        let a = alpha_grid[i];
        if a == 0.0 {
            // Every sample contributes exactly ℓ(0); skip the accumulation.
            return (loss.eval(0.0), 0.0, false);
        }
        let mut sum = 0.0;
        for &ti in &t {
            sum += loss.eval(a * ti);
        }
        let mean = sum / t.len() as f64;
        let mut var = 0.0;
        for &ti in &t {
            let d = loss.eval(a * ti) - mean;
            var += d * d;
        }
        let se = (var / (t.len() as f64 * (t.len() - 1) as f64)).sqrt();
        (mean, se, false)
    });
    scan_from_points(RayKind::ScaleDecay, alpha_grid, points)
}
