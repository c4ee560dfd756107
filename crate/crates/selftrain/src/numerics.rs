//! Deterministic scalar and vector primitives shared by every other module:
//! standard-normal tail and density, alignment geometry (correlation and
//! co-tangent), the squared mean norm `γ_p = (E‖g‖)²` of a standard Gaussian
//! vector, and reproducible random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense real vector. Invariants (nonempty, finite entries) are enforced at
/// the construction sites that matter (samplers, model constructors).
pub type Vector = Vec<f64>;

/// `1/√(2π)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Upper tail `Q(x) = P(N(0,1) > x)`, evaluated through the complementary
/// error function: `Q(x) = erfc(x/√2)/2`.
///
/// Strictly decreasing, with `Q(x) + Q(-x) = 1`.
pub fn q_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density `φ(x) = e^{-x²/2}/√(2π)`.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Euclidean inner product. Panics on length mismatch.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Correlation `ρ(a,b) = ⟨a,b⟩/(‖a‖‖b‖)`, clamped to `[-1, 1]` against
/// floating-point overshoot. Zero vectors are a degenerate-model error.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid_input(format!(
            "correlation: length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateModel("correlation of a zero vector"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Co-tangent of the angle between two vectors: `ρ/√(1-ρ²)`.
///
/// A monotone bijection from ρ ∈ (-1,1) onto the reals. At `|ρ| = 1` the
/// returned value is the IEEE signed infinity (check with `is_infinite`);
/// perfect alignment is representable rather than an error so sweeps that
/// reach it keep running.
pub fn cotangent(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(cot_from_correlation(correlation(a, b)?))
}

/// `ρ/√(1-ρ²)` for a correlation already in hand; `±∞` at `ρ = ±1`.
pub fn cot_from_correlation(rho: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&rho));
    if rho.abs() >= 1.0 {
        return if rho > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    rho / (1.0 - rho * rho).sqrt()
}

/// Inverse of [`cot_from_correlation`]: `x/√(1+x²)`.
pub fn correlation_from_cot(x: f64) -> f64 {
    if x.is_infinite() {
        return x.signum();
    }
    x / (1.0 + x * x).sqrt()
}

/// `γ_p = (E‖g‖)²` for `g ~ N(0, I_p)`, via the chi-distribution mean
/// `E‖g‖ = √2·Γ((p+1)/2)/Γ(p/2)` evaluated in log space.
///
/// Satisfies `p-1 ≤ γ_p ≤ p` for every `p ≥ 1`; `γ_0 = 0` (a 0-dimensional
/// Gaussian has no norm).
pub fn gamma_norm_sq(p: usize) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let p = p as f64;
    let log_mean = 0.5 * std::f64::consts::LN_2 + libm::lgamma((p + 1.0) / 2.0)
        - libm::lgamma(p / 2.0);
    (2.0 * log_mean).exp()
}

/// Addressable, reproducible random stream: `master_seed` names an experiment
/// and `stream_index` one independent stream inside it.
///
/// Streams come from ChaCha12 keyed by a SplitMix64 avalanche of the master
/// seed, with `stream_index` selecting one of 2⁶⁴ independent cipher streams.
/// The same pair always yields the identical stream, on any platform and any
/// thread schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec { master_seed, stream_index }
    }

    /// Instantiate the stream.
    pub fn rng(self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Derive an independent sub-stream family: the (master, stream) pair is
    /// avalanched into a new master seed and `k` indexes streams under it.
    /// Used by multi-batch procedures that need several independent draws per
    /// trial without colliding with other trials.
    pub fn child(self, k: u64) -> SeedSpec {
        SeedSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_index)),
            stream_index: k,
        }
    }
}

/// SplitMix64 finalizer (Steele, Lea, Flood 2014): a 64-bit avalanche with
/// full-period mixing, the standard choice for deriving seeds from counters.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `p` i.i.d. standard normal entries, bit-reproducible per seed.
pub fn gaussian_vector(p: usize, seed: SeedSpec) -> Vector {
    assert!(p >= 1, "gaussian_vector: p must be positive");
    let mut rng = seed.rng();
    let mut v = Vec::with_capacity(p);
    for _ in 0..p {
        v.push(StandardNormal.sample(&mut rng));
    }
    v
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n >= 1, "mean_stderr: empty sample");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
