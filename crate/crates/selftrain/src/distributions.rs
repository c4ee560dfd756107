//! Samplers and population descriptors for the two mixture families.
//!
//! Binary GMM: `x = y·μ + σ·g` with `y` Rademacher, `g ~ N(0, I_p)`, `‖μ‖ = 1`.
//! Generalized mixture (Gen-MM): `x = y·X·μ + σ·g` with `X` a positive scalar
//! random variable; `X ≡ 1` recovers the Binary GMM. All laws here are
//! normalized to `E[X²] = 1` so the population second moment is always
//! `σ²I + μμᵀ`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::{dot, norm, q_tail, SeedSpec, Vector};
use crate::{Error, Result};

/// Shape of the scalar law on a bounded-margin support. Only the uniform
/// shape is provided; the enum keeps the sub-law explicit in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarginShape {
    Uniform,
}

/// Law of the positive scalar `X` in `x = y·X·μ + σ·g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XLaw {
    /// `X ≡ 1`: the Binary GMM.
    ConstantOne,
    /// `X = |N(0,1)|`, density `√(2/π)·e^{-t²/2}` on `t ≥ 0`; the no-margin
    /// case. `y·X` is then exactly standard normal.
    FoldedNormal,
    /// Support contained in `[γ, Mγ]` with `E[X²] = 1`; the margin case.
    /// Construct through [`XLaw::bounded_margin`], which fixes `γ` from `M`.
    BoundedMargin { gamma: f64, m: f64, shape: MarginShape },
}

impl XLaw {
    /// Uniform law on `[γ, Mγ]` rescaled so `E[X²] = 1`, which forces
    /// `γ = √(3/(M² + M + 1))`. Requires `M ≥ 1`.
    pub fn bounded_margin(m: f64) -> Result<Self> {
        if !(m >= 1.0) {
            return Err(Error::invalid_input(format!("bounded_margin: M = {m} < 1")));
        }
        let gamma = (3.0 / (m * m + m + 1.0)).sqrt();
        Ok(XLaw::BoundedMargin { gamma, m, shape: MarginShape::Uniform })
    }

    /// `E[X]`.
    pub fn mean(&self) -> f64 {
        match *self {
            XLaw::ConstantOne => 1.0,
            XLaw::FoldedNormal => (2.0 / std::f64::consts::PI).sqrt(),
            XLaw::BoundedMargin { gamma, m, .. } => gamma * (1.0 + m) / 2.0,
        }
    }

    /// `E[X²]`; equal to 1 for every variant by construction.
    pub fn second_moment(&self) -> f64 {
        match *self {
            XLaw::ConstantOne => 1.0,
            XLaw::FoldedNormal => 1.0,
            XLaw::BoundedMargin { gamma, m, .. } => gamma * gamma * (m * m + m + 1.0) / 3.0,
        }
    }

    /// Upper tail `Q_X(t) = P(X > t)`.
    pub fn q_upper(&self, t: f64) -> f64 {
        match *self {
            XLaw::ConstantOne => {
                if t < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            XLaw::FoldedNormal => {
                if t <= 0.0 {
                    1.0
                } else {
                    2.0 * q_tail(t)
                }
            }
            XLaw::BoundedMargin { gamma, m, .. } => {
                let top = m * gamma;
                if t < gamma {
                    1.0
                } else if t >= top {
                    0.0
                } else {
                    // Degenerate support (m = 1) is fully handled by the two
                    // branches above.
                    (top - t) / (top - gamma)
                }
            }
        }
    }

    /// One draw of `X`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            XLaw::ConstantOne => 1.0,
            XLaw::FoldedNormal => {
                let g: f64 = StandardNormal.sample(rng);
                g.abs()
            }
            XLaw::BoundedMargin { gamma, m, .. } => gamma + (m * gamma - gamma) * rng.gen::<f64>(),
        }
    }
}

/// Parameters of a mixture: unit direction `μ`, noise level `σ ≥ 0`, and the
/// scalar law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    mu: Vector,
    sigma: f64,
    x_law: XLaw,
}

impl MixtureSpec {
    pub fn new(mu: Vector, sigma: f64, x_law: XLaw) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::invalid_input("mixture direction must be nonempty"));
        }
        if (norm(&mu) - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_input(format!(
                "mixture direction must be unit norm, got ‖μ‖ = {}",
                norm(&mu)
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::invalid_input(format!("sigma must be ≥ 0, got {sigma}")));
        }
        Ok(MixtureSpec { mu, sigma, x_law })
    }

    /// Mixture with `μ = e₁`, the convention used by all built-in experiments.
    pub fn along_e1(p: usize, sigma: f64, x_law: XLaw) -> Result<Self> {
        let mut mu = vec![0.0; p.max(1)];
        mu[0] = 1.0;
        MixtureSpec::new(mu, sigma, x_law)
    }

    pub fn p(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x_law(&self) -> &XLaw {
        &self.x_law
    }
}

/// Eigenvalues of the population second moment `E[xxᵀ] = σ²I + E[X²]·μμᵀ`:
/// `(σ² + E[X²], σ²)` along `μ` and orthogonal to it.
pub fn population_second_moment(spec: &MixtureSpec) -> (f64, f64) {
    let s2 = spec.sigma * spec.sigma;
    (s2 + spec.x_law.second_moment(), s2)
}

/// Labeled sample `(y_i, x_i)`, inputs stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    p: usize,
    inputs: Vec<f64>,
    labels: Vec<f64>,
}

impl LabeledSet {
    pub fn from_flat(p: usize, inputs: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if p == 0 || labels.is_empty() || inputs.len() != p * labels.len() {
            return Err(Error::invalid_input(format!(
                "from_flat: {} inputs do not match {} labels in dimension {p}",
                inputs.len(),
                labels.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("from_flat: non-finite entry"));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid_input("from_flat: labels must be ±1"));
        }
        Ok(LabeledSet { p, inputs, labels })
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.labels.iter().copied().zip(self.inputs.chunks_exact(self.p))
    }
}

/// Unlabeled sample, inputs stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    p: usize,
    inputs: Vec<f64>,
}

impl UnlabeledSet {
    /// Build directly from a flat row-major buffer (`count·p` entries).
    pub fn from_flat(p: usize, inputs: Vec<f64>) -> Result<Self> {
        if p == 0 || inputs.is_empty() || inputs.len() % p != 0 {
            return Err(Error::invalid_input(format!(
                "from_flat: buffer length {} is not a positive multiple of p = {p}",
                inputs.len()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("from_flat: non-finite entry"));
        }
        Ok(UnlabeledSet { p, inputs })
    }

    pub fn count(&self) -> usize {
        self.inputs.len() / self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.p..(i + 1) * self.p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.inputs.chunks_exact(self.p)
    }
}

fn draw_sample<R: Rng>(spec: &MixtureSpec, rng: &mut R, out: &mut Vec<f64>) -> f64 {
    let y = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let x = spec.x_law.sample(rng);
    let yx = y * x;
    for &mu_j in &spec.mu {
        let g: f64 = StandardNormal.sample(rng);
        out.push(yx * mu_j + spec.sigma * g);
    }
    y
}

/// `n` i.i.d. labeled pairs, deterministic per seed.
pub fn sample_labeled(spec: &MixtureSpec, n: usize, seed: SeedSpec) -> LabeledSet {
    assert!(n >= 1, "sample_labeled: n must be positive");
    let mut rng = seed.rng();
    let mut inputs = Vec::with_capacity(n * spec.p());
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(draw_sample(spec, &mut rng, &mut inputs));
    }
    LabeledSet { p: spec.p(), inputs, labels }
}

/// `u` i.i.d. draws from the marginal (labels discarded), deterministic per
/// seed. Uses the same draw path as [`sample_labeled`], so the marginal
/// matches exactly.
pub fn sample_unlabeled(spec: &MixtureSpec, u: usize, seed: SeedSpec) -> UnlabeledSet {
    assert!(u >= 1, "sample_unlabeled: u must be positive");
    let mut rng = seed.rng();
    let mut inputs = Vec::with_capacity(u * spec.p());
    for _ in 0..u {
        draw_sample(spec, &mut rng, &mut inputs);
    }
    UnlabeledSet { p: spec.p(), inputs }
}

const CACHE_MAGIC: &[u8; 8] = b"STCACHE1";

/// Write a sample set to the columnar binary cache format: an 8-byte magic,
/// a header of three little-endian u64 fields (p, count, label flag), the
/// input block (`count·p` little-endian f64, row-major), then the label
/// column (`count` f64) when present.
pub fn write_cache(path: &Path, p: usize, inputs: &[f64], labels: Option<&[f64]>) -> Result<()> {
    let count = inputs.len() / p;
    if p == 0 || inputs.len() % p != 0 {
        return Err(Error::invalid_input("write_cache: inputs not a multiple of p"));
    }
    if let Some(l) = labels {
        if l.len() != count {
            return Err(Error::invalid_input("write_cache: label count mismatch"));
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&(p as u64).to_le_bytes())?;
    w.write_all(&(count as u64).to_le_bytes())?;
    w.write_all(&(labels.is_some() as u64).to_le_bytes())?;
    for v in inputs {
        w.write_all(&v.to_le_bytes())?;
    }
    if let Some(l) = labels {
        for v in l {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read back a cache file written by [`write_cache`].
pub fn read_cache(path: &Path) -> Result<(usize, Vec<f64>, Option<Vec<f64>>)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::invalid_input("read_cache: bad magic"));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |r: &mut dyn Read| -> Result<u64> {
        r.read_exact(&mut u64buf)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let p = read_u64(&mut r)? as usize;
    let count = read_u64(&mut r)? as usize;
    let has_labels = read_u64(&mut r)? != 0;
    let read_block = |r: &mut dyn Read, len: usize| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };
    let inputs = read_block(&mut r, count * p)?;
    let labels = if has_labels { Some(read_block(&mut r, count)?) } else { None };
    Ok((p, inputs, labels))
}

impl LabeledSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_cache(path, self.p, &self.inputs, Some(&self.labels))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (p, inputs, labels) = read_cache(path)?;
        let labels = labels.ok_or_else(|| Error::invalid_input("cache has no label column"))?;
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid_input("cache labels must be ±1"));
        }
        Ok(LabeledSet { p, inputs, labels })
    }
}

impl UnlabeledSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_cache(path, self.p, &self.inputs, None)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (p, inputs, _) = read_cache(path)?;
        UnlabeledSet::from_flat(p, inputs)
    }
}

/// Empirical second moment along a unit direction `v`: `(1/u)Σ (vᵀx_i)²`.
pub fn empirical_second_moment_along(data: &UnlabeledSet, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for x in data.iter() {
        let t = dot(x, v);
        acc += t * t;
    }
    acc / data.count() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{correlation, mean_stderr};
    use approx::assert_relative_eq;

    #[test]
    fn bounded_margin_normalization() {
        let law = XLaw::bounded_margin(1.2).unwrap();
        assert_relative_eq!(law.second_moment(), 1.0, max_relative = 1e-12);
        if let XLaw::BoundedMargin { gamma, m, .. } = law {
            assert_relative_eq!(gamma, (3.0f64 / (1.2 * 1.2 + 2.2)).sqrt(), max_relative = 1e-12);
            assert_eq!(m, 1.2);
        } else {
            panic!("wrong variant");
        }
        assert!(XLaw::bounded_margin(0.9).is_err());
    }

    #[test]
    fn x_law_moments() {
        assert_eq!(XLaw::ConstantOne.mean(), 1.0);
        assert_relative_eq!(
            XLaw::FoldedNormal.mean(),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(XLaw::FoldedNormal.second_moment(), 1.0);
    }

    #[test]
    fn q_upper_shapes() {
        assert_eq!(XLaw::ConstantOne.q_upper(0.5), 1.0);
        assert_eq!(XLaw::ConstantOne.q_upper(1.0), 0.0);
        assert_relative_eq!(XLaw::FoldedNormal.q_upper(1.0), 2.0 * q_tail(1.0));
        let law = XLaw::bounded_margin(2.0).unwrap();
        let gamma = (3.0f64 / 7.0).sqrt();
        assert_eq!(law.q_upper(0.5 * gamma), 1.0);
        assert_relative_eq!(law.q_upper(1.5 * gamma), 0.5, max_relative = 1e-12);
        assert_eq!(law.q_upper(2.0 * gamma), 0.0);
    }

    #[test]
    fn spec_validation() {
        assert!(MixtureSpec::new(vec![0.5, 0.5], 1.0, XLaw::ConstantOne).is_err());
        assert!(MixtureSpec::new(vec![1.0], -0.1, XLaw::ConstantOne).is_err());
        let spec = MixtureSpec::along_e1(3, 0.75, XLaw::ConstantOne).unwrap();
        assert_eq!(spec.p(), 3);
        assert_eq!(spec.mu(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_noise_samples_sit_on_centers() {
        let spec = MixtureSpec::along_e1(4, 0.0, XLaw::ConstantOne).unwrap();
        let set = sample_labeled(&spec, 50, SeedSpec::new(1, 0));
        for (y, x) in set.iter() {
            assert_eq!(x[0], y);
            assert!(x[1..].iter().all(|&v| v == 0.0));
        }
        let upx = sample_unlabeled(&spec, 50, SeedSpec::new(1, 1));
        for x in upx.iter() {
            assert_eq!(x[0].abs(), 1.0);
        }
    }

    #[test]
    fn signed_mean_converges_to_mu() {
        let spec = MixtureSpec::along_e1(20, 1.0, XLaw::ConstantOne).unwrap();
        let set = sample_labeled(&spec, 10_000, SeedSpec::new(2, 0));
        let mut mean = vec![0.0; 20];
        for (y, x) in set.iter() {
            for (m, &v) in mean.iter_mut().zip(x) {
                *m += y * v;
            }
        }
        for m in &mut mean {
            *m /= set.count() as f64;
        }
        assert!(correlation(&mean, spec.mu()).unwrap() > 0.99);
    }

    #[test]
    fn label_balance() {
        let spec = MixtureSpec::along_e1(2, 1.0, XLaw::ConstantOne).unwrap();
        let set = sample_labeled(&spec, 10_000, SeedSpec::new(3, 0));
        let frac_pos =
            set.iter().filter(|(y, _)| *y > 0.0).count() as f64 / set.count() as f64;
        assert!((0.47..=0.53).contains(&frac_pos), "class fraction {frac_pos}");
    }

    #[test]
    fn determinism_per_seed() {
        let spec = MixtureSpec::along_e1(5, 0.75, XLaw::FoldedNormal).unwrap();
        let a = sample_unlabeled(&spec, 100, SeedSpec::new(9, 4));
        let b = sample_unlabeled(&spec, 100, SeedSpec::new(9, 4));
        assert_eq!(a, b);
    }

    #[test]
    fn top_eigendirection_second_moment() {
        // E[(μᵀx)²] = σ² + E[X²] = 2 at σ = 1; tested along μ at u = 10⁴.
        let spec = MixtureSpec::along_e1(10, 1.0, XLaw::ConstantOne).unwrap();
        let data = sample_unlabeled(&spec, 10_000, SeedSpec::new(4, 0));
        let along = empirical_second_moment_along(&data, spec.mu());
        assert!((1.85..=2.15).contains(&along), "second moment along μ = {along}");
        let (signal, noise) = population_second_moment(&spec);
        assert_eq!((signal, noise), (2.0, 1.0));
    }

    #[test]
    fn population_second_moment_values() {
        let c = MixtureSpec::along_e1(2, 0.75, XLaw::ConstantOne).unwrap();
        let (s, n) = population_second_moment(&c);
        assert_relative_eq!(s, 1.5625, max_relative = 1e-12);
        assert_relative_eq!(n, 0.5625, max_relative = 1e-12);
        let f = MixtureSpec::along_e1(2, 1.0, XLaw::FoldedNormal).unwrap();
        assert_eq!(population_second_moment(&f), (2.0, 1.0));
        let b = MixtureSpec::along_e1(2, 0.5, XLaw::bounded_margin(1.5).unwrap()).unwrap();
        let (s, n) = population_second_moment(&b);
        assert_relative_eq!(s, 1.25, max_relative = 1e-12);
        assert_relative_eq!(n, 0.25, max_relative = 1e-12);
    }

    #[test]
    fn folded_normal_signed_is_standard_normal() {
        // Kolmogorov–Smirnov test of y·X against N(0,1) at the 1% level
        // (critical value 1.628/√n for large n).
        // At σ = 0 the first coordinate is exactly y·X.
        let spec = MixtureSpec::along_e1(1, 0.0, XLaw::FoldedNormal).unwrap();
        let set = sample_labeled(&spec, 10_000, SeedSpec::new(5, 0));
        let mut yx: Vec<f64> = set.iter().map(|(_, x)| x[0]).collect();
        yx.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = yx.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, &v) in yx.iter().enumerate() {
            let cdf = 1.0 - q_tail(v);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        assert!(ks < 1.628 / n.sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn bounded_margin_support_and_moment() {
        let law = XLaw::bounded_margin(1.4).unwrap();
        let (gamma, m) = match law {
            XLaw::BoundedMargin { gamma, m, .. } => (gamma, m),
            _ => unreachable!(),
        };
        let mut rng = SeedSpec::new(6, 0).rng();
        let xs: Vec<f64> = (0..10_000).map(|_| law.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x >= gamma && x <= m * gamma));
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (mean, se) = mean_stderr(&sq);
        assert!((mean - 1.0).abs() <= 3.0 * se, "E[X²] = {mean} ± {se}");
    }

    #[test]
    fn cache_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = MixtureSpec::along_e1(7, 0.5, XLaw::FoldedNormal).unwrap();
        let labeled = sample_labeled(&spec, 23, SeedSpec::new(8, 0));
        let unlabeled = sample_unlabeled(&spec, 31, SeedSpec::new(8, 1));
        let lp = dir.path().join("labeled.bin");
        let up = dir.path().join("unlabeled.bin");
        labeled.save(&lp).unwrap();
        unlabeled.save(&up).unwrap();
        assert_eq!(LabeledSet::load(&lp).unwrap(), labeled);
        assert_eq!(UnlabeledSet::load(&up).unwrap(), unlabeled);
        assert!(LabeledSet::load(&up).is_err());
    }
}
