//! Ensembles of trajectories and the statistics used to check them.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::larc::OutcomeKind;
use crate::scenario::{FinalPosition, LocalizationPrediction, Scenario, ScenarioError, TrajectoryRecord};

/// Version of the `stats.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Confidence level of every reported interval.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no samples")]
    Empty,
    #[error("rate must be positive and finite")]
    InvalidRate,
    #[error("weights must be non-negative with a positive sum")]
    InvalidWeights,
    #[error("degenerate test: class {0} has zero expected count but {1} observations")]
    Degenerate(usize, u64),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Two-sided standard normal quantile for [`CONFIDENCE`].
pub fn z_value() -> f64 {
    Normal::standard().inverse_cdf(0.5 + CONFIDENCE / 2.0)
}

/// RNG stream for trajectory `index` of an ensemble seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: u64,
    pub total: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    pub fn wilson(count: u64, total: u64, z: f64) -> Self {
        if total == 0 {
            return Self {
                count,
                total,
                estimate: 0.0,
                ci_lo: 0.0,
                ci_hi: 1.0,
            };
        }
        let n = total as f64;
        let p = count as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            count,
            total,
            estimate: p,
            ci_lo: (centre - half).max(0.0).min(p),
            ci_hi: (centre + half).min(1.0).max(p),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionCounts {
    pub x1: u64,
    pub x2: u64,
    pub unresolved: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub absorbed: u64,
    pub not_absorbed: u64,
    pub removed_without_absorption: u64,
}

impl ClassCounts {
    fn add(&mut self, kind: OutcomeKind) {
        match kind {
            OutcomeKind::Absorbed => self.absorbed += 1,
            OutcomeKind::NotAbsorbed => self.not_absorbed += 1,
            OutcomeKind::RemovedWithoutAbsorption => self.removed_without_absorption += 1,
        }
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.absorbed, self.not_absorbed, self.removed_without_absorption]
    }
}

/// First-reduction waiting times and the rate they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitingTimes {
    pub count: u64,
    pub mean: f64,
    pub std_error: f64,
    pub rate_estimate: f64,
    /// Rate interval from the mean's normal interval; `None` when the lower
    /// mean bound is not positive.
    pub rate_ci_lo: f64,
    pub rate_ci_hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(rename = "N")]
    pub n: u64,
    /// `|a1|^2`, the Born weight of `x1`.
    pub born_weight_x1: f64,
    /// Larcs that can form (sites in sectors with non-zero amplitude).
    pub larcs: u64,
    pub p_t: f64,
    pub counts: PositionCounts,
    pub freq_x1: Proportion,
    pub freq_x2: Proportion,
    pub freq_unresolved: Proportion,
    /// Frequency of `x1` among resolved trajectories.
    pub resolved_x1: Proportion,
    pub first_reduction: Option<WaitingTimes>,
    pub class_counts: ClassCounts,
    /// Classes chosen by the first reduction of each trajectory.
    pub first_class_counts: ClassCounts,
    pub prediction: LocalizationPrediction,
}

/// Runs trajectories `0..n` on `jobs` workers. Each trajectory draws from
/// its own index-derived stream, so results do not depend on `jobs`.
pub fn run_trajectories(scenario: &Scenario, seed: u64, n: u64, jobs: usize) -> Result<Vec<TrajectoryRecord>, StatsError> {
    scenario.validate()?;
    let run = |index: u64| -> Result<TrajectoryRecord, ScenarioError> {
        let mut record = scenario.run_trajectory(&mut trajectory_rng(seed, index))?;
        record.seed = seed;
        record.index = index;
        Ok(record)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| StatsError::Pool(e.to_string()))?;
    let records = pool.install(|| (0..n).into_par_iter().map(run).collect::<Result<Vec<_>, _>>())?;
    Ok(records)
}

/// Aggregates records in index order.
pub fn summarize(scenario: &Scenario, seed: u64, records: &[TrajectoryRecord]) -> EnsembleStats {
    let z = z_value();
    let n = records.len() as u64;
    let mut counts = PositionCounts::default();
    let mut class_counts = ClassCounts::default();
    let mut first_class_counts = ClassCounts::default();
    let mut times = Vec::new();
    for r in records {
        match r.final_position {
            FinalPosition::X1 => counts.x1 += 1,
            FinalPosition::X2 => counts.x2 += 1,
            FinalPosition::Unresolved => counts.unresolved += 1,
        }
        for e in &r.reductions {
            class_counts.add(e.outcome);
        }
        if let Some(first) = r.reductions.first() {
            first_class_counts.add(first.outcome);
        }
        if let Some(t) = r.first_reduction_time {
            times.push(t);
        }
    }
    let a = scenario.amplitudes();
    let sites = scenario.sites();
    let larcs = [a.a1, a.a2]
        .iter()
        .zip(sites)
        .filter(|(amp, _)| amp.norm_sqr() > 0.0)
        .map(|(_, s)| s as u64)
        .sum();
    EnsembleStats {
        schema_version: SCHEMA_VERSION,
        seed,
        n,
        born_weight_x1: a.a1.norm_sqr(),
        larcs,
        p_t: scenario.timing().p_t,
        counts,
        freq_x1: Proportion::wilson(counts.x1, n, z),
        freq_x2: Proportion::wilson(counts.x2, n, z),
        freq_unresolved: Proportion::wilson(counts.unresolved, n, z),
        resolved_x1: Proportion::wilson(counts.x1, counts.x1 + counts.x2, z),
        first_reduction: waiting_times(&times, z),
        class_counts,
        first_class_counts,
        prediction: scenario.localization_probability(),
    }
}

fn waiting_times(times: &[f64], z: f64) -> Option<WaitingTimes> {
    if times.is_empty() {
        return None;
    }
    let k = times.len() as f64;
    let mean = times.iter().copied().collect::<CompensatedSum>().value() / k;
    let var = if times.len() > 1 {
        times.iter().map(|t| (t - mean) * (t - mean)).collect::<CompensatedSum>().value() / (k - 1.0)
    } else {
        0.0
    };
    let std_error = (var / k).sqrt();
    let lo_mean = mean - z * std_error;
    Some(WaitingTimes {
        count: times.len() as u64,
        mean,
        std_error,
        rate_estimate: 1.0 / mean,
        rate_ci_lo: 1.0 / (mean + z * std_error),
        rate_ci_hi: (lo_mean > 0.0).then(|| 1.0 / lo_mean),
    })
}

/// Runs and aggregates an ensemble.
pub fn run_ensemble(scenario: &Scenario, seed: u64, n: u64, jobs: usize) -> Result<(Vec<TrajectoryRecord>, EnsembleStats), StatsError> {
    let records = run_trajectories(scenario, seed, n, jobs)?;
    let stats = summarize(scenario, seed, &records);
    Ok((records, stats))
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json(stats: &EnsembleStats) -> String {
    let mut text = serde_json::to_string_pretty(stats).expect("stats serialize");
    text.push('\n');
    text
}

/// Writes one row per trajectory: index, first reduction time (empty when
/// none), final position, number of reductions.
pub fn write_trajectories_csv<W: Write>(records: &[TrajectoryRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "first_reduction_time", "final_position", "reductions"])?;
    for r in records {
        let time = r.first_reduction_time.map_or_else(String::new, |t| format!("{t}"));
        w.write_record([r.index.to_string(), time, r.final_position.to_string(), r.reductions.len().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small lambda
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * c).exp();
        }
        (1.0 - cdf * (2.0 * std::f64::consts::PI).sqrt() / lambda).clamp(0.0, 1.0)
    } else {
        let mut sf = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sf += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
            if term < 1e-18 {
                break;
            }
        }
        sf.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// Sup distance between empirical and model CDF.
    pub statistic: f64,
    pub critical: f64,
    pub p_value: f64,
    pub pass: bool,
}

fn stephens_scale(n: usize) -> f64 {
    let s = (n as f64).sqrt();
    s + 0.12 + 0.11 / s
}

/// One-sample Kolmogorov-Smirnov test of `samples` against `Exp(rate)`.
/// Passes iff the statistic is below the critical value at `alpha`. A
/// single sample gives a valid but weak test.
pub fn ks_exponential_test(samples: &[f64], rate: f64, alpha: f64) -> Result<KsResult, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(StatsError::InvalidRate);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = if x <= 0.0 { 0.0 } else { -(-rate * x).exp_m1() };
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let scale = stephens_scale(sorted.len());
    // kolmogorov_sf is decreasing; bisect for sf(lambda) = alpha
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let critical = 0.5 * (lo + hi) / scale;
    Ok(KsResult {
        statistic: d,
        critical,
        p_value: kolmogorov_sf(scale * d),
        pass: d < critical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins after pooling; each entry lists the original classes.
    pub bins: Vec<Vec<usize>>,
}

/// Pearson chi-square of class counts against class weights. Classes with
/// expected count below 5 are pooled into the neighbouring class (the next
/// one, or the previous for the last class) until every bin reaches 5 or a
/// single bin remains.
pub fn chi_square_outcomes(counts: [u64; 3], weights: [f64; 3]) -> Result<ChiSquareResult, StatsError> {
    let total_w: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || !(total_w > 0.0) {
        return Err(StatsError::InvalidWeights);
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    for (i, (&c, &w)) in counts.iter().zip(&weights).enumerate() {
        if w == 0.0 && c > 0 {
            return Err(StatsError::Degenerate(i, c));
        }
    }
    let mut bins: Vec<(Vec<usize>, f64, f64)> = (0..3)
        .filter(|&i| weights[i] > 0.0)
        .map(|i| (vec![i], counts[i] as f64, n as f64 * weights[i] / total_w))
        .collect();
    while bins.len() > 1 {
        let Some(i) = bins.iter().position(|b| b.2 < 5.0) else {
            break;
        };
        let j = if i + 1 < bins.len() { i + 1 } else { i - 1 };
        let (lo, hi) = (i.min(j), i.max(j));
        let (classes, obs, exp) = bins.remove(hi);
        bins[lo].0.extend(classes);
        bins[lo].0.sort_unstable();
        bins[lo].1 += obs;
        bins[lo].2 += exp;
    }
    let statistic: f64 = bins.iter().map(|(_, o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map_err(|_| StatsError::InvalidWeights)?.sf(statistic)
    };
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
        bins: bins.into_iter().map(|b| b.0).collect(),
    })
}
