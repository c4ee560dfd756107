//! Configuration-driven experiment runner: Monte-Carlo sweeps over the
//! unlabeled budget with theory-vs-empirical deviation columns, plus the
//! landscape and bound-check suites, emitted as CSV tables with a JSON
//! sidecar echoing the full configuration.
//!
//! Trials fan out to the worker pool with one RNG stream per trial, and all
//! aggregation happens in index order on collected vectors, so output bytes
//! do not depend on the thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{clustering_bound_check, FiniteClass, TransferInstance};
use crate::distributions::{sample_labeled, sample_unlabeled, MixtureSpec, UnlabeledSet, XLaw};
use crate::estimators::{
    accuracy_from_alignment, averaging_fit, iterate_fresh, iterate_reuse, logistic_fit,
    pseudo_label_select, self_train_step, LinearModel, TrainConfig,
};
use crate::landscape::{
    self, format_f64, semisup_ray, supervised_loss_ray, unsupervised_loss_ray, SemiSupSpec,
};
use crate::numerics::{correlation_from_cot, cot_from_correlation, mean_stderr, SeedSpec};
use crate::parallel::map_indices;
use crate::theory::iterate_prediction;
use crate::{Error, Result};

/// Monte-Carlo draws per landscape scan.
pub const LANDSCAPE_MC: usize = 100_000;

/// Rounds of batch-reusing self-training in the baseline comparison.
pub const REUSE_ROUNDS: usize = 20;

/// Bootstrap resamples behind every confidence-interval column.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;

const EXPERIMENT_NAMES: [&str; 6] = [
    "gmm_sweep",
    "iterate_compare",
    "logistic_sweep",
    "landscape",
    "bounds_suite",
    "gap_fresh_vs_supervised",
];

/// The experiment families the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ExperimentKind {
    GmmSweep,
    IterateCompare,
    LogisticSweep,
    Landscape,
    BoundsSuite,
    GapFreshVsSupervised,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::GmmSweep,
        ExperimentKind::IterateCompare,
        ExperimentKind::LogisticSweep,
        ExperimentKind::Landscape,
        ExperimentKind::BoundsSuite,
        ExperimentKind::GapFreshVsSupervised,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::GmmSweep => "gmm_sweep",
            ExperimentKind::IterateCompare => "iterate_compare",
            ExperimentKind::LogisticSweep => "logistic_sweep",
            ExperimentKind::Landscape => "landscape",
            ExperimentKind::BoundsSuite => "bounds_suite",
            ExperimentKind::GapFreshVsSupervised => "gap_fresh_vs_supervised",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig {
                field: "experiment",
                message: format!(
                    "unknown experiment name `{s}`; expected one of {}",
                    EXPERIMENT_NAMES.join(", ")
                ),
            })
    }
}

impl TryFrom<String> for ExperimentKind {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        ExperimentKind::from_str(&s).map_err(|e| e.to_string())
    }
}

impl From<ExperimentKind> for String {
    fn from(k: ExperimentKind) -> String {
        k.as_str().to_string()
    }
}

/// What a sweep row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Cotangent,
    Correlation,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Cotangent => "cotangent",
            Metric::Correlation => "correlation",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "cotangent" => Ok(Metric::Cotangent),
            "correlation" => Ok(Metric::Correlation),
            other => Err(Error::invalid_input(format!("unknown metric `{other}`"))),
        }
    }
}

/// Full description of one experiment run. JSON field names match the struct
/// exactly; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub p: usize,
    pub n_bar: f64,
    pub u_bar_grid: Vec<f64>,
    pub sigma: f64,
    pub gamma_threshold: f64,
    pub tau: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub output_path: String,
}

impl ExperimentConfig {
    /// Defaults per experiment family, anchored at p = 400, n̄ = 0.05,
    /// σ = 0.75 for the sweeps; the logistic sweep runs smaller because each
    /// cell performs full gradient-descent fits.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            p: 400,
            n_bar: 0.05,
            u_bar_grid: vec![0.5, 1.0, 2.0, 3.0, 5.0],
            sigma: 0.75,
            gamma_threshold: 0.5,
            tau: 3,
            trials: 100,
            master_seed: 1,
            output_path: "results".to_string(),
        };
        match kind {
            ExperimentKind::GmmSweep => base,
            ExperimentKind::IterateCompare => {
                ExperimentConfig { gamma_threshold: 0.0, ..base }
            }
            ExperimentKind::LogisticSweep => {
                ExperimentConfig { p: 100, n_bar: 0.2, tau: 10, trials: 50, ..base }
            }
            ExperimentKind::GapFreshVsSupervised => {
                // The crossover above the supervised baseline only appears once
                // the fresh iterates approach their fixed point, which takes
                // more rounds than the default sweeps track.
                ExperimentConfig { tau: 8, trials: 400, ..base }
            }
            ExperimentKind::Landscape => ExperimentConfig {
                p: 2,
                n_bar: 0.5,
                sigma: 1.0,
                gamma_threshold: 0.0,
                u_bar_grid: vec![1.0],
                tau: 1,
                trials: 1,
                ..base
            },
            ExperimentKind::BoundsSuite => ExperimentConfig {
                p: 2,
                n_bar: 0.5,
                sigma: 0.5,
                gamma_threshold: 0.25,
                u_bar_grid: vec![250.0],
                tau: 1,
                trials: 200,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, message: impl Into<String>) -> Error {
            Error::InvalidConfig { field, message: message.into() }
        }
        if self.p == 0 {
            return Err(bad("p", "dimension must be at least 1"));
        }
        if !(self.n_bar > 0.0) || !self.n_bar.is_finite() {
            return Err(bad("n_bar", format!("{} is not a positive real", self.n_bar)));
        }
        if self.n_count() == 0 {
            return Err(bad("n_bar", format!("n_bar*p = {} rounds to zero samples", self.n_bar * self.p as f64)));
        }
        if self.u_bar_grid.is_empty() {
            return Err(bad("u_bar_grid", "must be nonempty"));
        }
        for &u in &self.u_bar_grid {
            if !(u > 0.0) || !u.is_finite() {
                return Err(bad("u_bar_grid", format!("entry {u} is not a positive real")));
            }
            if self.u_count(u) == 0 {
                return Err(bad("u_bar_grid", format!("entry {u} rounds to zero samples")));
            }
        }
        if self.u_bar_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad("u_bar_grid", "entries must be strictly ascending"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(bad("sigma", format!("{} is not a positive real", self.sigma)));
        }
        if !(self.gamma_threshold >= 0.0) || !self.gamma_threshold.is_finite() {
            return Err(bad("gamma_threshold", format!("{} is not a nonnegative real", self.gamma_threshold)));
        }
        if self.tau == 0 {
            return Err(bad("tau", "need at least one self-training round"));
        }
        if self.trials == 0 {
            return Err(bad("trials", "need at least one trial"));
        }
        if self.output_path.is_empty() {
            return Err(bad("output_path", "must be nonempty"));
        }
        if self.experiment == ExperimentKind::BoundsSuite {
            if self.p != 2 {
                return Err(bad("p", "the bounds suite enumerates circle directions and needs p = 2"));
            }
            if self.gamma_threshold == 0.0 {
                return Err(bad("gamma_threshold", "the clustering margin width must be positive"));
            }
        }
        Ok(())
    }

    /// Labeled sample count `round(n̄·p)`.
    pub fn n_count(&self) -> usize {
        (self.n_bar * self.p as f64).round() as usize
    }

    /// Unlabeled sample count `round(ū·p)` for one grid entry.
    pub fn u_count(&self, u_bar: f64) -> usize {
        (u_bar * self.p as f64).round() as usize
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_json()?)?)
    }

    /// RNG stream stride per sweep cell: one stream per trial plus one
    /// reserved for the cell's bootstrap resampler.
    fn cell_stride(&self) -> u64 {
        self.trials as u64 + 1
    }

    fn trial_seed(&self, cell: usize, trial: usize) -> SeedSpec {
        SeedSpec::new(self.master_seed, cell as u64 * self.cell_stride() + trial as u64)
    }

    fn bootstrap_seed(&self, cell: usize) -> SeedSpec {
        SeedSpec::new(
            self.master_seed,
            cell as u64 * self.cell_stride() + self.trials as u64,
        )
    }
}

/// One aggregated measurement of a sweep: a config echo, the trial statistics
/// and, where the theory module predicts the quantity, the prediction and
/// the signed deviation `empirical_mean - theory_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment: ExperimentKind,
    /// Which curve the row belongs to (e.g. `fresh_st`, `supervised_with_u`).
    pub variant: String,
    pub metric: Metric,
    pub p: usize,
    pub n_bar: f64,
    pub u_bar: f64,
    pub sigma: f64,
    /// Effective acceptance threshold of this row (sweeps may vary it).
    pub gamma_threshold: f64,
    /// Self-training rounds behind the measurement; 0 for purely supervised
    /// baselines.
    pub tau: usize,
    pub trials: usize,
    pub empirical_mean: f64,
    pub empirical_stderr: f64,
    pub theory_value: Option<f64>,
    pub deviation: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Some contributing fit did not converge, or the cell is otherwise
    /// untrustworthy; statistics are still reported.
    pub flagged: bool,
}

/// Column order of every sweep CSV.
pub const SWEEP_CSV_HEADER: [&str; 17] = [
    "experiment",
    "variant",
    "metric",
    "p",
    "n_bar",
    "u_bar",
    "sigma",
    "gamma_threshold",
    "tau",
    "trials",
    "empirical_mean",
    "empirical_stderr",
    "theory_value",
    "deviation",
    "ci_lower",
    "ci_upper",
    "flagged",
];

fn opt_f64(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// Write rows in order under the fixed header; floats use shortest
/// round-trip formatting so identical runs are byte-identical.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.as_str().to_string(),
            r.variant.clone(),
            r.metric.as_str().to_string(),
            r.p.to_string(),
            format_f64(r.n_bar),
            format_f64(r.u_bar),
            format_f64(r.sigma),
            format_f64(r.gamma_threshold),
            r.tau.to_string(),
            r.trials.to_string(),
            format_f64(r.empirical_mean),
            format_f64(r.empirical_stderr),
            opt_f64(r.theory_value),
            opt_f64(r.deviation),
            opt_f64(r.ci_lower),
            opt_f64(r.ci_upper),
            (r.flagged as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a sweep CSV produced by [`write_sweep_csv`].
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    if rdr.headers()? != &csv::StringRecord::from(SWEEP_CSV_HEADER.as_slice()) {
        return Err(Error::invalid_input("unexpected sweep CSV header"));
    }
    fn f(s: &str, col: &str) -> Result<f64> {
        s.parse().map_err(|_| Error::invalid_input(format!("bad {col} value `{s}`")))
    }
    fn of(s: &str, col: &str) -> Result<Option<f64>> {
        if s.is_empty() { Ok(None) } else { f(s, col).map(Some) }
    }
    fn n(s: &str, col: &str) -> Result<usize> {
        s.parse().map_err(|_| Error::invalid_input(format!("bad {col} value `{s}`")))
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != SWEEP_CSV_HEADER.len() {
            return Err(Error::invalid_input("sweep CSV row has wrong arity"));
        }
        rows.push(SweepRow {
            experiment: ExperimentKind::from_str(&rec[0])?,
            variant: rec[1].to_string(),
            metric: Metric::from_str(&rec[2])?,
            p: n(&rec[3], "p")?,
            n_bar: f(&rec[4], "n_bar")?,
            u_bar: f(&rec[5], "u_bar")?,
            sigma: f(&rec[6], "sigma")?,
            gamma_threshold: f(&rec[7], "gamma_threshold")?,
            tau: n(&rec[8], "tau")?,
            trials: n(&rec[9], "trials")?,
            empirical_mean: f(&rec[10], "empirical_mean")?,
            empirical_stderr: f(&rec[11], "empirical_stderr")?,
            theory_value: of(&rec[12], "theory_value")?,
            deviation: of(&rec[13], "deviation")?,
            ci_lower: of(&rec[14], "ci_lower")?,
            ci_upper: of(&rec[15], "ci_upper")?,
            flagged: &rec[16] == "1",
        });
    }
    Ok(rows)
}

/// Percentile bootstrap confidence interval of the sample mean. Resample `d`
/// consumes a fixed stretch of the seed's stream, so the interval is
/// reproducible; negating all samples exactly negates and swaps the
/// endpoints.
pub fn bootstrap_ci(samples: &[f64], resamples: usize, level: f64, seed: SeedSpec) -> (f64, f64) {
    assert!(!samples.is_empty(), "bootstrap_ci: empty sample");
    assert!(resamples >= 1, "bootstrap_ci: need at least one resample");
    assert!(level > 0.0 && level < 1.0, "bootstrap_ci: level outside (0,1)");
    let n = samples.len();
    let mut rng = seed.rng();
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += samples[rng.gen_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let tail = (((1.0 - level) / 2.0) * resamples as f64).floor() as usize;
    let tail = tail.min(resamples - 1);
    (means[tail], means[resamples - 1 - tail])
}

fn make_row(
    cfg: &ExperimentConfig,
    variant: &str,
    metric: Metric,
    u_bar: f64,
    gamma: f64,
    tau: usize,
    samples: &[f64],
    theory: Option<f64>,
    flagged: bool,
) -> SweepRow {
    let (mean, se) = mean_stderr(samples);
    SweepRow {
        experiment: cfg.experiment,
        variant: variant.to_string(),
        metric,
        p: cfg.p,
        n_bar: cfg.n_bar,
        u_bar,
        sigma: cfg.sigma,
        gamma_threshold: gamma,
        tau,
        trials: samples.len(),
        empirical_mean: mean,
        empirical_stderr: se,
        theory_value: theory,
        deviation: theory.map(|t| mean - t),
        ci_lower: None,
        ci_upper: None,
        flagged,
    }
}

/// Accuracy and cotangent rows of one measured curve at one grid cell.
#[allow(clippy::too_many_arguments)]
fn push_pair(
    rows: &mut Vec<SweepRow>,
    cfg: &ExperimentConfig,
    variant: &str,
    u_bar: f64,
    gamma: f64,
    tau: usize,
    acc: (&[f64], Option<f64>),
    cot: (&[f64], Option<f64>),
    flagged: bool,
) {
    rows.push(make_row(cfg, variant, Metric::Accuracy, u_bar, gamma, tau, acc.0, acc.1, flagged));
    rows.push(make_row(cfg, variant, Metric::Cotangent, u_bar, gamma, tau, cot.0, cot.1, flagged));
}

/// `(cotangent, accuracy)` of a model against the mixture mean.
fn alignment_stats(model: &LinearModel, spec: &MixtureSpec) -> Result<(f64, f64)> {
    let rho = model.correlation_to(spec.mu())?;
    Ok((cot_from_correlation(rho), accuracy_from_alignment(rho, spec.sigma())))
}

/// Theory accuracy implied by a predicted cotangent.
fn accuracy_from_cot(x: f64, sigma: f64) -> f64 {
    accuracy_from_alignment(correlation_from_cot(x), sigma)
}

fn check_kind(cfg: &ExperimentConfig, want: ExperimentKind) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != want {
        return Err(Error::InvalidConfig {
            field: "experiment",
            message: format!("expected {}, got {}", want.as_str(), cfg.experiment.as_str()),
        });
    }
    Ok(())
}

/// Fresh-batch self-training sweep: per `(ū, τ)` cell, accuracy and
/// cotangent of `averaging_fit → iterate_fresh` across trials, with the
/// iterated map prediction as the theory column. All `τ` rows of one `ū`
/// come from the same trajectories, so the orderings are paired.
pub fn run_gmm_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    check_kind(cfg, ExperimentKind::GmmSweep)?;
    let spec = MixtureSpec::along_e1(cfg.p, cfg.sigma, XLaw::ConstantOne)?;
    let n = cfg.n_count();
    let gamma = cfg.gamma_threshold;
    let mut rows = Vec::new();
    for (cell, &u_bar) in cfg.u_bar_grid.iter().enumerate() {
        let u = cfg.u_count(u_bar);
        let trials = map_indices(cfg.trials, |t| -> Result<Vec<(f64, f64)>> {
            let seed = cfg.trial_seed(cell, t);
            let labeled = sample_labeled(&spec, n, seed.child(0));
            let m0 = averaging_fit(&labeled)?;
            let (_, traj) = iterate_fresh(&m0, &spec, u, gamma, cfg.tau, seed.child(1))?;
            Ok(traj.iter().map(|rs| (rs.cotangent, rs.accuracy)).collect())
        });
        let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
        for tau in 1..=cfg.tau {
            let cot: Vec<f64> = trials.iter().map(|tr| tr[tau - 1].0).collect();
            let acc: Vec<f64> = trials.iter().map(|tr| tr[tau - 1].1).collect();
            let pred = iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, gamma, tau);
            let pred_acc = accuracy_from_cot(pred, cfg.sigma);
            push_pair(
                &mut rows,
                cfg,
                "fresh_st",
                u_bar,
                gamma,
                tau,
                (&acc, Some(pred_acc)),
                (&cot, Some(pred)),
                false,
            );
        }
    }
    Ok(rows)
}

struct CompareTrial {
    init: (f64, f64),
    sup_u: (f64, f64),
    fresh: Vec<(f64, f64)>,
    reuse_final: (f64, f64),
}

/// Baseline comparison at one threshold: the initial `n`-label model, a
/// supervised model on `u` labels, Fresh-ST(τ) prefixes, and
/// Iterative-ST([`REUSE_ROUNDS`]) on one reused batch.
pub fn run_iterate_compare(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    check_kind(cfg, ExperimentKind::IterateCompare)?;
    let spec = MixtureSpec::along_e1(cfg.p, cfg.sigma, XLaw::ConstantOne)?;
    let n = cfg.n_count();
    let gamma = cfg.gamma_threshold;
    let mut rows = Vec::new();
    for (cell, &u_bar) in cfg.u_bar_grid.iter().enumerate() {
        let u = cfg.u_count(u_bar);
        let trials = map_indices(cfg.trials, |t| -> Result<CompareTrial> {
            let seed = cfg.trial_seed(cell, t);
            let m0 = averaging_fit(&sample_labeled(&spec, n, seed.child(0)))?;
            let msup = averaging_fit(&sample_labeled(&spec, u, seed.child(1)))?;
            let (_, fresh_traj) = iterate_fresh(&m0, &spec, u, gamma, cfg.tau, seed.child(2))?;
            let batch = sample_unlabeled(&spec, u, seed.child(3));
            let (_, reuse_traj) = iterate_reuse(&m0, &batch, &spec, gamma, REUSE_ROUNDS)?;
            let last = reuse_traj.last().expect("at least one round");
            Ok(CompareTrial {
                init: alignment_stats(&m0, &spec)?,
                sup_u: alignment_stats(&msup, &spec)?,
                fresh: fresh_traj.iter().map(|rs| (rs.cotangent, rs.accuracy)).collect(),
                reuse_final: (last.cotangent, last.accuracy),
            })
        });
        let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
        let split = |get: &dyn Fn(&CompareTrial) -> (f64, f64)| -> (Vec<f64>, Vec<f64>) {
            (trials.iter().map(|t| get(t).0).collect(), trials.iter().map(|t| get(t).1).collect())
        };
        // Initial supervised model: asymptotic cot √n̄/σ regardless of ū.
        let (cot, acc) = split(&|t| t.init);
        let pred = cfg.n_bar.sqrt() / cfg.sigma;
        push_pair(
            &mut rows,
            cfg,
            "initial_supervised",
            u_bar,
            gamma,
            0,
            (&acc, Some(accuracy_from_cot(pred, cfg.sigma))),
            (&cot, Some(pred)),
            false,
        );
        // Supervised on the unlabeled budget: asymptotic cot √ū/σ.
        let (cot, acc) = split(&|t| t.sup_u);
        let pred = u_bar.sqrt() / cfg.sigma;
        push_pair(
            &mut rows,
            cfg,
            "supervised_with_u",
            u_bar,
            gamma,
            0,
            (&acc, Some(accuracy_from_cot(pred, cfg.sigma))),
            (&cot, Some(pred)),
            false,
        );
        for tau in 1..=cfg.tau {
            let cot: Vec<f64> = trials.iter().map(|t| t.fresh[tau - 1].0).collect();
            let acc: Vec<f64> = trials.iter().map(|t| t.fresh[tau - 1].1).collect();
            let pred = iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, gamma, tau);
            push_pair(
                &mut rows,
                cfg,
                "fresh_st",
                u_bar,
                gamma,
                tau,
                (&acc, Some(accuracy_from_cot(pred, cfg.sigma))),
                (&cot, Some(pred)),
                false,
            );
        }
        let (cot, acc) = split(&|t| t.reuse_final);
        push_pair(
            &mut rows,
            cfg,
            "iterative_st",
            u_bar,
            gamma,
            REUSE_ROUNDS,
            (&acc, None),
            (&cot, None),
            false,
        );
    }
    Ok(rows)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RefitMethod {
    Averaging,
    Logistic,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Schedule {
    Fresh,
    Reuse,
}

struct TrajPoint {
    cot: f64,
    accuracy: f64,
    /// All fits up to and including this round converged.
    converged_so_far: bool,
}

/// Iterated pseudo-label refitting under either batch schedule and refit
/// method. The reuse batch comes from `seed.child(0)`, fresh round `r` from
/// `seed.child(r)`, so averaging and logistic runs handed the same seed see
/// identical data.
fn pseudo_schedule(
    model0: &LinearModel,
    spec: &MixtureSpec,
    u: usize,
    gamma: f64,
    tau_max: usize,
    method: RefitMethod,
    schedule: Schedule,
    train: &TrainConfig,
    seed: SeedSpec,
) -> Result<Vec<TrajPoint>> {
    let reuse_batch = match schedule {
        Schedule::Reuse => Some(sample_unlabeled(spec, u, seed.child(0))),
        Schedule::Fresh => None,
    };
    let mut current = model0.clone();
    let mut converged = true;
    let mut out = Vec::with_capacity(tau_max);
    for round in 1..=tau_max {
        let fresh_batch;
        let batch: &UnlabeledSet = match &reuse_batch {
            Some(b) => b,
            None => {
                fresh_batch = sample_unlabeled(spec, u, seed.child(round as u64));
                &fresh_batch
            }
        };
        current = match method {
            RefitMethod::Averaging => {
                self_train_step(&current, batch, gamma).map_err(|e| match e {
                    Error::AllRejected { .. } => Error::AllRejected { round },
                    other => other,
                })?
            }
            RefitMethod::Logistic => {
                let selected = pseudo_label_select(&current, batch, gamma);
                if selected.accepted_count() == 0 {
                    return Err(Error::AllRejected { round });
                }
                let fit = logistic_fit(&selected, train)?;
                converged &= fit.converged;
                fit.model
            }
        };
        let rho = current.correlation_to(spec.mu())?;
        out.push(TrajPoint {
            cot: cot_from_correlation(rho),
            accuracy: accuracy_from_alignment(rho, spec.sigma()),
            converged_so_far: converged,
        });
    }
    Ok(out)
}

struct LogisticTrial {
    sup_u: (f64, f64),
    /// One trajectory per (threshold, schedule, method) combination.
    runs: Vec<Vec<TrajPoint>>,
}

/// Logistic-refit self-training against its averaging counterpart, both
/// schedules, at thresholds `{0, gamma_threshold}`, recorded at iteration
/// counts `{1, 3, 10} ∩ [1, τ]`. Non-convergent logistic fits flag the
/// affected rows instead of erroring.
pub fn run_logistic_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    check_kind(cfg, ExperimentKind::LogisticSweep)?;
    let spec = MixtureSpec::along_e1(cfg.p, cfg.sigma, XLaw::ConstantOne)?;
    let n = cfg.n_count();
    let mut gammas = vec![0.0];
    if cfg.gamma_threshold > 0.0 {
        gammas.push(cfg.gamma_threshold);
    }
    let taus: Vec<usize> = [1, 3, 10].into_iter().filter(|&t| t <= cfg.tau).collect();
    let tau_max = *taus.last().expect("tau >= 1 keeps the list nonempty");
    let schedules = [(Schedule::Fresh, "fresh"), (Schedule::Reuse, "reuse")];
    let methods = [(RefitMethod::Averaging, "averaging"), (RefitMethod::Logistic, "logistic")];
    let train = TrainConfig {
        gamma_threshold: 0.0,
        lambda: Some(1e-3),
        step_size: 1.0,
        max_steps: 500,
        tolerance: 1e-3,
    };
    let mut rows = Vec::new();
    for (cell, &u_bar) in cfg.u_bar_grid.iter().enumerate() {
        let u = cfg.u_count(u_bar);
        let trials = map_indices(cfg.trials, |t| -> Result<LogisticTrial> {
            let seed = cfg.trial_seed(cell, t);
            let m0 = averaging_fit(&sample_labeled(&spec, n, seed.child(0)))?;
            let msup = averaging_fit(&sample_labeled(&spec, u, seed.child(1)))?;
            let mut runs = Vec::with_capacity(gammas.len() * 4);
            for (gi, &g) in gammas.iter().enumerate() {
                for (si, (sched, _)) in schedules.iter().enumerate() {
                    let combo_seed = seed.child(2 + (gi * 2 + si) as u64);
                    for (method, _) in methods {
                        runs.push(pseudo_schedule(
                            &m0, &spec, u, g, tau_max, method, *sched, &train, combo_seed,
                        )?);
                    }
                }
            }
            Ok(LogisticTrial { sup_u: alignment_stats(&msup, &spec)?, runs })
        });
        let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
        let cot: Vec<f64> = trials.iter().map(|t| t.sup_u.0).collect();
        let acc: Vec<f64> = trials.iter().map(|t| t.sup_u.1).collect();
        let pred = u_bar.sqrt() / cfg.sigma;
        push_pair(
            &mut rows,
            cfg,
            "supervised_with_u",
            u_bar,
            0.0,
            0,
            (&acc, Some(accuracy_from_cot(pred, cfg.sigma))),
            (&cot, Some(pred)),
            false,
        );
        for (gi, &g) in gammas.iter().enumerate() {
            for (si, (sched, sched_name)) in schedules.iter().enumerate() {
                for (mi, (method, method_name)) in methods.iter().enumerate() {
                    let run_idx = (gi * 2 + si) * 2 + mi;
                    for &tau in &taus {
                        let cot: Vec<f64> =
                            trials.iter().map(|t| t.runs[run_idx][tau - 1].cot).collect();
                        let acc: Vec<f64> =
                            trials.iter().map(|t| t.runs[run_idx][tau - 1].accuracy).collect();
                        let flagged = trials
                            .iter()
                            .any(|t| !t.runs[run_idx][tau - 1].converged_so_far);
                        // The iterated map predicts the fresh averaging runs.
                        let pred = match (sched, method) {
                            (Schedule::Fresh, RefitMethod::Averaging) => {
                                Some(iterate_prediction(cfg.n_bar, u_bar, cfg.sigma, g, tau))
                            }
                            _ => None,
                        };
                        let variant = format!("{sched_name}_{method_name}");
                        push_pair(
                            &mut rows,
                            cfg,
                            &variant,
                            u_bar,
                            g,
                            tau,
                            (&acc, pred.map(|x| accuracy_from_cot(x, cfg.sigma))),
                            (&cot, pred),
                            flagged,
                        );
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Accuracy gap `acc(Fresh-ST(τ)) - acc(supervised on u labels)` per grid
/// cell, paired within trials, with a percentile bootstrap confidence
/// interval on the mean gap.
pub fn run_gap_fresh_vs_supervised(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    check_kind(cfg, ExperimentKind::GapFreshVsSupervised)?;
    let spec = MixtureSpec::along_e1(cfg.p, cfg.sigma, XLaw::ConstantOne)?;
    let n = cfg.n_count();
    let gamma = cfg.gamma_threshold;
    let mut rows = Vec::new();
    for (cell, &u_bar) in cfg.u_bar_grid.iter().enumerate() {
        let u = cfg.u_count(u_bar);
        let trials = map_indices(cfg.trials, |t| -> Result<(f64, Vec<f64>)> {
            let seed = cfg.trial_seed(cell, t);
            let m0 = averaging_fit(&sample_labeled(&spec, n, seed.child(0)))?;
            let msup = averaging_fit(&sample_labeled(&spec, u, seed.child(1)))?;
            let (_, traj) = iterate_fresh(&m0, &spec, u, gamma, cfg.tau, seed.child(2))?;
            let acc_sup = alignment_stats(&msup, &spec)?.1;
            Ok((acc_sup, traj.iter().map(|rs| rs.accuracy).collect()))
        });
        let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
        for tau in 1..=cfg.tau {
            let gaps: Vec<f64> =
                trials.iter().map(|(sup, fresh)| fresh[tau - 1] - sup).collect();
            let (lo, hi) = bootstrap_ci(
                &gaps,
                BOOTSTRAP_RESAMPLES,
                0.95,
                self::bootstrap_cell_seed(cfg, cell, tau),
            );
            let mut row = make_row(
                cfg,
                "fresh_st_minus_supervised_with_u",
                Metric::Accuracy,
                u_bar,
                gamma,
                tau,
                &gaps,
                None,
                false,
            );
            row.ci_lower = Some(lo);
            row.ci_upper = Some(hi);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn bootstrap_cell_seed(cfg: &ExperimentConfig, cell: usize, tau: usize) -> SeedSpec {
    cfg.bootstrap_seed(cell).child(tau as u64)
}

/// Landscape suite: the supervised, unsupervised and regularized (ρ = 0.8)
/// semi-supervised scans on the default grid, written as one CSV per scan.
pub fn run_landscape(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    check_kind(cfg, ExperimentKind::Landscape)?;
    let out_dir = Path::new(&cfg.output_path);
    fs::create_dir_all(out_dir)?;
    let law = XLaw::ConstantOne;
    let grid = landscape::default_grid();
    let seed = SeedSpec::new(cfg.master_seed, 0);
    let semi = SemiSupSpec::new(0.8, f64::INFINITY, cfg.gamma_threshold)?;
    let scans = [
        ("landscape_supervised.csv", supervised_loss_ray(&law, cfg.sigma, &grid)?),
        (
            "landscape_unsupervised.csv",
            unsupervised_loss_ray(&law, cfg.sigma, cfg.gamma_threshold, &grid, LANDSCAPE_MC, seed)?,
        ),
        (
            "landscape_semisup.csv",
            semisup_ray(&semi, &law, cfg.sigma, &grid, LANDSCAPE_MC, seed)?,
        ),
    ];
    let mut files = Vec::new();
    for (name, scan) in &scans {
        let path = out_dir.join(name);
        scan.write_csv(&path)?;
        files.push(path);
    }
    Ok(files)
}

/// Aggregate results of the bound-checking suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSuiteReport {
    pub clustering_trials: usize,
    pub clustering_violation_rate: f64,
    pub transfer_instances: usize,
    pub transfer_premises_held: usize,
    pub transfer_conclusion_violations: usize,
    /// Fraction of premises-true instances whose conclusion held (1.0 when
    /// no instance exercised the premises).
    pub transfer_pass_rate: f64,
}

/// Bound-checking suite: the clustering-error generalization bound frequency
/// test on 36 circle directions, and the deterministic transfer check over
/// `10 × trials` randomized instances. Emits a JSON report and a two-column
/// CSV.
pub fn run_bounds_suite(cfg: &ExperimentConfig) -> Result<(BoundsSuiteReport, Vec<PathBuf>)> {
    check_kind(cfg, ExperimentKind::BoundsSuite)?;
    let out_dir = Path::new(&cfg.output_path);
    fs::create_dir_all(out_dir)?;
    let class = FiniteClass::circle_directions(36)?;
    let spec = MixtureSpec::along_e1(2, cfg.sigma, XLaw::ConstantOne)?;
    let u = cfg.u_count(*cfg.u_bar_grid.last().expect("validated nonempty"));
    let violation_rate = clustering_bound_check(
        &class,
        &spec,
        cfg.gamma_threshold,
        u,
        0.1,
        cfg.trials,
        SeedSpec::new(cfg.master_seed, 0),
    );
    let instances = 10 * cfg.trials;
    let base = SeedSpec::new(cfg.master_seed, 1);
    let mut held = 0usize;
    let mut violations = 0usize;
    for i in 0..instances {
        let report = TransferInstance::random(50, base.child(i as u64)).check()?;
        if report.premises_hold {
            held += 1;
            if report.conclusion_holds == Some(false) {
                violations += 1;
            }
        }
    }
    let report = BoundsSuiteReport {
        clustering_trials: cfg.trials,
        clustering_violation_rate: violation_rate,
        transfer_instances: instances,
        transfer_premises_held: held,
        transfer_conclusion_violations: violations,
        transfer_pass_rate: if held == 0 {
            1.0
        } else {
            1.0 - violations as f64 / held as f64
        },
    };
    let json_path = out_dir.join("bounds_suite.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n")?;
    let csv_path = out_dir.join("bounds_suite.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["metric", "value"])?;
    w.write_record(["clustering_trials", &report.clustering_trials.to_string()])?;
    w.write_record(["clustering_violation_rate", &format_f64(report.clustering_violation_rate)])?;
    w.write_record(["transfer_instances", &report.transfer_instances.to_string()])?;
    w.write_record(["transfer_premises_held", &report.transfer_premises_held.to_string()])?;
    w.write_record([
        "transfer_conclusion_violations",
        &report.transfer_conclusion_violations.to_string(),
    ])?;
    w.write_record(["transfer_pass_rate", &format_f64(report.transfer_pass_rate)])?;
    w.flush()?;
    Ok((report, vec![json_path, csv_path]))
}

/// Everything one experiment run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// Aggregated sweep rows; empty for the landscape and bounds suites,
    /// whose outputs are their own artifact files.
    pub rows: Vec<SweepRow>,
    /// Files written under the config's `output_path`, sidecar first.
    pub files: Vec<PathBuf>,
}

/// Sidecar written next to every experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSidecar {
    pub config: ExperimentConfig,
    pub library_version: String,
}

/// Validate, dispatch, and write artifacts: a `<experiment>_config.json`
/// sidecar always, a `<experiment>.csv` table for the sweep experiments, and
/// the delegated files for the landscape and bounds suites.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let out_dir = Path::new(&cfg.output_path);
    fs::create_dir_all(out_dir)?;
    let sidecar = RunSidecar {
        config: cfg.clone(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let sidecar_path = out_dir.join(format!("{}_config.json", cfg.experiment.as_str()));
    fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
    let mut files = vec![sidecar_path];
    let rows = match cfg.experiment {
        ExperimentKind::GmmSweep => run_gmm_sweep(cfg)?,
        ExperimentKind::IterateCompare => run_iterate_compare(cfg)?,
        ExperimentKind::LogisticSweep => run_logistic_sweep(cfg)?,
        ExperimentKind::GapFreshVsSupervised => run_gap_fresh_vs_supervised(cfg)?,
        ExperimentKind::Landscape => {
            files.extend(run_landscape(cfg)?);
            Vec::new()
        }
        ExperimentKind::BoundsSuite => {
            files.extend(run_bounds_suite(cfg)?.1);
            Vec::new()
        }
    };
    if !rows.is_empty() {
        let csv_path = out_dir.join(format!("{}.csv", cfg.experiment.as_str()));
        write_sweep_csv(&csv_path, &rows)?;
        files.push(csv_path);
    }
    Ok(RunOutput { rows, files })
}
