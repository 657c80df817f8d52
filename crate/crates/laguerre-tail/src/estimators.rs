//! Monte Carlo estimators for the extreme-eigenvalue tails: direct Monte
//! Carlo and the three importance-sampling schemes, with log-domain
//! accumulation, deterministic sharded execution, and efficiency
//! diagnostics.
//!
//! Replicate j always draws from RNG substream j. Replicates are folded in
//! index order within fixed [`SHARD_SIZE`] shards and shard accumulators are
//! merged in shard order, so the result is bit-identical regardless of
//! worker count or the parallel/sequential code path.

use crate::analytic::{j_rate_bound, log_a, MPLaw};
use crate::ensemble::{validate, EnsembleParams, Regime, Spectrum, TailQuery, TailSide};
use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp_pair, LogReal};
use crate::sampler::{
    sample_bottom_exponential, sample_full_spectrum, sample_rest_spectrum, sample_top_exponential,
    RngStream,
};
use serde::{Deserialize, Serialize};

/// Estimation method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Direct Monte Carlo: sample the full (n, p) spectrum, score the
    /// indicator.
    Dmc,
    /// Importance sampling for the max tail with the tilt rate
    /// (x - beta) / (2x).
    IsMax,
    /// Importance sampling for the max tail in the p/n -> gamma regime,
    /// with an explicit exponential tilt rate.
    IsMaxGamma { tilt_rate: f64 },
    /// Importance sampling for the min tail with the tilt rate
    /// (beta - y) / (2y).
    IsMin,
}

impl Method {
    /// The regime whose validity rules the query must satisfy.
    pub fn regime(&self) -> Regime {
        match self {
            Method::IsMaxGamma { .. } => Regime::GammaFinite,
            _ => Regime::POverNInfty,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dmc => "dmc",
            Method::IsMax => "is",
            Method::IsMaxGamma { .. } => "is-gamma",
            Method::IsMin => "is",
        }
    }
}

/// Fixed shard width of the canonical accumulation order.
pub const SHARD_SIZE: u64 = 1024;

/// Mergeable sufficient statistics of a run: replicate count, log of the
/// weight sum, log of the squared-weight sum, and the largest log weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateAccumulator {
    count: u64,
    log_sum_w: f64,
    log_sum_w2: f64,
    log_max_w: f64,
}

impl Default for EstimateAccumulator {
    fn default() -> Self {
        Self::empty()
    }
}

impl EstimateAccumulator {
    pub fn empty() -> Self {
        Self {
            count: 0,
            log_sum_w: f64::NEG_INFINITY,
            log_sum_w2: f64::NEG_INFINITY,
            log_max_w: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, log_w: f64) {
        self.count += 1;
        self.log_sum_w = log_sum_exp_pair(self.log_sum_w, log_w);
        self.log_sum_w2 = log_sum_exp_pair(self.log_sum_w2, 2.0 * log_w);
        self.log_max_w = self.log_max_w.max(log_w);
        debug_assert!(self.cauchy_schwarz_ok(), "accumulator violates Cauchy-Schwarz");
    }

    /// log sum w^2 >= 2 log sum w - ln(count) whenever count >= 1.
    pub fn cauchy_schwarz_ok(&self) -> bool {
        if self.count == 0 || self.log_sum_w == f64::NEG_INFINITY {
            return true;
        }
        self.log_sum_w2 >= 2.0 * self.log_sum_w - (self.count as f64).ln() - 1e-9
    }

    /// Commutative, associative combination (log-sum-exp on both sums,
    /// addition on counts, max on the max).
    pub fn combine(&self, other: &Self) -> Self {
        Self {
            count: self.count + other.count,
            log_sum_w: log_sum_exp_pair(self.log_sum_w, other.log_sum_w),
            log_sum_w2: log_sum_exp_pair(self.log_sum_w2, other.log_sum_w2),
            log_max_w: self.log_max_w.max(other.log_max_w),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn log_sum_w(&self) -> f64 {
        self.log_sum_w
    }

    pub fn log_sum_w2(&self) -> f64 {
        self.log_sum_w2
    }

    pub fn log_max_w(&self) -> f64 {
        self.log_max_w
    }
}

/// Identifies which run an accumulator belongs to; merging accumulators from
/// different runs is a provenance error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params: EnsembleParams,
    pub query: TailQuery,
    pub method: Method,
    pub seed: u64,
}

/// An accumulator tagged with its run provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedAccumulator {
    pub provenance: Provenance,
    pub acc: EstimateAccumulator,
}

/// Merge two shard accumulators. Commutative and associative up to
/// floating-point rounding; bit-exact when applied in the canonical shard
/// order used by [`run_estimate`].
pub fn merge(a: &TaggedAccumulator, b: &TaggedAccumulator) -> Result<TaggedAccumulator> {
    if a.provenance != b.provenance {
        return Err(Error::Validation(
            "cannot merge accumulators with different run provenance".into(),
        ));
    }
    Ok(TaggedAccumulator { provenance: a.provenance, acc: a.acc.combine(&b.acc) })
}

/// ln L for the max-side importance sampler at tilt rate
/// (x - beta)/(2x): the order-statistic density factor over the tilted
/// exponential density at lambda1, given the rest of the spectrum
/// (descending, length n - 1; empty for n = 1).
pub fn log_weight_is_max(params: &EnsembleParams, x: f64, lambda1: f64, rest: &[f64]) -> Result<f64> {
    let beta = params.beta();
    if !(x > beta) {
        return Err(Error::Domain(format!("max weight requires x > beta, got x={x}")));
    }
    log_weight_max_tilted(params, x, (x - beta) / (2.0 * x), lambda1, rest)
}

/// Same as [`log_weight_is_max`] with an explicit exponential tilt rate
/// (the gamma-regime estimator). The rate must be positive; staying below
/// the efficiency bound of [`j_rate_bound`] is checked once per run, not
/// per weight evaluation.
pub fn log_weight_is_max_gamma(
    params: &EnsembleParams,
    x: f64,
    tilt_rate: f64,
    lambda1: f64,
    rest: &[f64],
) -> Result<f64> {
    if !(tilt_rate > 0.0) {
        return Err(Error::Domain(format!("tilt rate must be positive, got {tilt_rate}")));
    }
    log_weight_max_tilted(params, x, tilt_rate, lambda1, rest)
}

fn log_weight_max_tilted(
    params: &EnsembleParams,
    x: f64,
    rate: f64,
    lambda1: f64,
    rest: &[f64],
) -> Result<f64> {
    let beta = params.beta();
    let (n, p) = (f64::from(params.n()), f64::from(params.p()));
    let lower = if rest.is_empty() { p * x } else { (p * x).max(rest[0]) };
    if !(lambda1 > lower) {
        return Err(Error::Domain(format!(
            "max weight requires lambda1 > max(px, lambda2) = {lower}, got {lambda1}"
        )));
    }
    let la = log_a(params.n(), params.p(), beta)?;
    let mut interaction = 0.0;
    for &l in rest {
        interaction += (lambda1 - l).ln();
    }
    Ok(n.ln() + la + beta * interaction + (beta * (p - n + 1.0) / 2.0 - 1.0) * lambda1.ln()
        - lambda1 / 2.0
        - rate.ln()
        + rate * (lambda1 - lower))
}

/// ln L for the min-side importance sampler at tilt rate (beta - y)/(2y).
/// The sampling density is the reflected exponential truncated to
/// (0, upper); its normalization 1 - exp(-rate * upper) enters the weight.
pub fn log_weight_is_min(params: &EnsembleParams, y: f64, lambda_n: f64, rest: &[f64]) -> Result<f64> {
    let beta = params.beta();
    if !(y > 0.0 && y < beta) {
        return Err(Error::Domain(format!("min weight requires 0 < y < beta, got y={y}")));
    }
    let (n, p) = (f64::from(params.n()), f64::from(params.p()));
    let rate = (beta - y) / (2.0 * y);
    let upper = if rest.is_empty() { p * y } else { (p * y).min(rest[rest.len() - 1]) };
    if !(lambda_n > 0.0 && lambda_n < upper) {
        return Err(Error::Domain(format!(
            "min weight requires 0 < lambda_n < min(py, lambda_(n-1)) = {upper}, got {lambda_n}"
        )));
    }
    let la = log_a(params.n(), params.p(), beta)?;
    let mut interaction = 0.0;
    for &l in rest {
        interaction += (l - lambda_n).ln();
    }
    let log_trunc = (-(-rate * upper).exp_m1()).ln();
    Ok(n.ln() + la + beta * interaction + (beta * (p - n + 1.0) / 2.0 - 1.0) * lambda_n.ln()
        - lambda_n / 2.0
        - rate.ln()
        - rate * (lambda_n - upper)
        + log_trunc)
}

/// Final estimate, dispersion, and efficiency diagnostics of a run, with
/// full provenance. Serialization is deterministic: identical runs produce
/// byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub library_version: String,
    pub method: Method,
    pub params: EnsembleParams,
    pub query: TailQuery,
    pub regime: Regime,
    pub n_reps: u64,
    pub seed: u64,
    /// ln of the estimate; None when the estimate is exactly zero.
    pub log_estimate: Option<f64>,
    /// Three-significant-figure scientific form of the estimate.
    pub estimate_display: String,
    /// ln of the single-replicate standard deviation.
    pub log_std: Option<f64>,
    pub std_display: String,
    /// Std / Est of a single replicate.
    pub std_over_est: Option<f64>,
    /// ln of the second moment of a single replicate.
    pub log_second_moment: Option<f64>,
    /// log E[L^2] / (2 log Z-hat); reported only when the estimate is < 1.
    pub efficiency_ratio: Option<f64>,
    /// Fraction of the weight sum contributed by the largest replicate.
    pub max_weight_share: Option<f64>,
    /// The largest replicate dominates: weight degeneracy warning.
    pub weight_degeneracy_warning: bool,
    /// Second moment did not exceed the squared mean (all weights equal).
    pub degenerate_std: bool,
    /// No replicate scored (direct Monte Carlo with zero hits).
    pub zero_estimate: bool,
    /// Fewer than 10 hits in a direct Monte Carlo run.
    pub low_count: bool,
    /// Hit count for direct Monte Carlo runs.
    pub dmc_hits: Option<u64>,
}

impl EstimateReport {
    pub fn estimate(&self) -> LogReal {
        match self.log_estimate {
            Some(l) => LogReal::from_log(l).expect("report stores finite logs"),
            None => LogReal::zero(),
        }
    }
}

/// Scientific-notation display with three significant figures (`d.dde±dd`),
/// a pure function of the log value.
pub fn display_sci_from_log(log_value: f64) -> String {
    if log_value == f64::NEG_INFINITY {
        return "0.00e+00".to_string();
    }
    let log10 = log_value / std::f64::consts::LN_10;
    let mut exp = log10.floor() as i64;
    let mut mantissa = 10f64.powf(log10 - exp as f64);
    mantissa = (mantissa * 100.0).round() / 100.0;
    if mantissa >= 10.0 {
        mantissa /= 10.0;
        exp += 1;
    }
    if mantissa < 1.0 {
        mantissa *= 10.0;
        exp -= 1;
        mantissa = (mantissa * 100.0).round() / 100.0;
    }
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa:.2}e{sign}{:02}", exp.abs())
}

struct RunContext {
    params: EnsembleParams,
    query: TailQuery,
    method: Method,
    seed: u64,
}

impl RunContext {
    fn replicate(&self, index: u64, master: &RngStream) -> Result<f64> {
        let mut rng = master.substream(index);
        self.replicate_weight(&mut rng).map_err(|e| {
            Error::Numerical(format!("replicate {index} failed (seed {}, substream {index}): {e}", self.seed))
        })
    }

    fn replicate_weight(&self, rng: &mut RngStream) -> Result<f64> {
        let params = &self.params;
        let p = f64::from(params.p());
        let threshold = self.query.threshold;
        match self.method {
            Method::Dmc => {
                let spectrum = sample_full_spectrum(params, rng)?;
                let hit = match self.query.side {
                    TailSide::Max => spectrum.max() > p * threshold,
                    TailSide::Min => spectrum.min() < p * threshold,
                };
                Ok(if hit { 0.0 } else { f64::NEG_INFINITY })
            }
            Method::IsMax | Method::IsMaxGamma { .. } => {
                let rest = self.sample_rest(rng)?;
                let rest = rest.as_ref().map(Spectrum::values).unwrap_or(&[]);
                let lower = if rest.is_empty() { p * threshold } else { (p * threshold).max(rest[0]) };
                let rate = match self.method {
                    Method::IsMaxGamma { tilt_rate } => tilt_rate,
                    _ => (threshold - params.beta()) / (2.0 * threshold),
                };
                let lambda1 = sample_top_exponential(lower, rate, rng)?;
                match self.method {
                    Method::IsMaxGamma { tilt_rate } => {
                        log_weight_is_max_gamma(params, threshold, tilt_rate, lambda1, rest)
                    }
                    _ => log_weight_is_max(params, threshold, lambda1, rest),
                }
            }
            Method::IsMin => {
                let rest = self.sample_rest(rng)?;
                let rest = rest.as_ref().map(Spectrum::values).unwrap_or(&[]);
                let upper = if rest.is_empty() {
                    p * threshold
                } else {
                    (p * threshold).min(rest[rest.len() - 1])
                };
                let rate = (params.beta() - threshold) / (2.0 * threshold);
                let lambda_n = sample_bottom_exponential(upper, rate, rng)?;
                log_weight_is_min(params, threshold, lambda_n, rest)
            }
        }
    }

    fn sample_rest(&self, rng: &mut RngStream) -> Result<Option<Spectrum>> {
        if self.params.n() >= 2 {
            sample_rest_spectrum(&self.params, rng).map(Some)
        } else {
            Ok(None)
        }
    }
}

fn checked_setup(
    params: &EnsembleParams,
    query: &TailQuery,
    method: &Method,
    n_reps: u64,
    seed: u64,
) -> Result<RunContext> {
    if n_reps < 1 {
        return Err(Error::Validation("at least one replicate is required".into()));
    }
    match (method, query.side) {
        (Method::IsMax | Method::IsMaxGamma { .. }, TailSide::Max) => {}
        (Method::IsMin, TailSide::Min) => {}
        (Method::Dmc, _) => {}
        (m, side) => {
            return Err(Error::Validation(format!(
                "method {m:?} does not estimate {side:?}-side tails"
            )));
        }
    }
    validate(params, query, method.regime()).map_err(Error::Validation)?;
    if let Method::IsMaxGamma { tilt_rate } = method {
        if !(*tilt_rate > 0.0) || !tilt_rate.is_finite() {
            return Err(Error::Validation(format!("tilt rate must be positive, got {tilt_rate}")));
        }
        let bound = j_rate_bound(&MPLaw::from_params(params), query.threshold)?;
        if *tilt_rate >= bound {
            return Err(Error::Validation(format!(
                "tilt rate {tilt_rate} must stay below the efficiency bound {bound}"
            )));
        }
    }
    Ok(RunContext { params: *params, query: *query, method: *method, seed })
}

/// The default gamma-regime tilt rate: 0.9 times the efficiency bound.
pub fn default_gamma_tilt_rate(params: &EnsembleParams, x: f64) -> Result<f64> {
    Ok(0.9 * j_rate_bound(&MPLaw::from_params(params), x)?)
}

/// Accumulate replicates [start, end) of the run identified by
/// (params, query, method, seed), in index order. run_estimate is exactly
/// the in-order merge of these accumulators over the canonical shard ranges
/// (multiples of [`SHARD_SIZE`]).
pub fn run_replicate_range(
    params: &EnsembleParams,
    query: &TailQuery,
    method: &Method,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<TaggedAccumulator> {
    let ctx = checked_setup(params, query, method, range.end.max(1), seed)?;
    let master = RngStream::from_seed(seed);
    let mut acc = EstimateAccumulator::empty();
    for j in range {
        acc.push(ctx.replicate(j, &master)?);
    }
    Ok(TaggedAccumulator {
        provenance: Provenance { params: *params, query: *query, method: *method, seed },
        acc,
    })
}

fn shard_ranges(n_reps: u64) -> Vec<std::ops::Range<u64>> {
    let mut out = Vec::with_capacity(((n_reps + SHARD_SIZE - 1) / SHARD_SIZE) as usize);
    let mut start = 0;
    while start < n_reps {
        let end = (start + SHARD_SIZE).min(n_reps);
        out.push(start..end);
        start = end;
    }
    out
}

fn run_shards_sequential(ctx: &RunContext, n_reps: u64) -> Result<EstimateAccumulator> {
    let master = RngStream::from_seed(ctx.seed);
    let mut total = EstimateAccumulator::empty();
    for range in shard_ranges(n_reps) {
        let mut acc = EstimateAccumulator::empty();
        for j in range {
            acc.push(ctx.replicate(j, &master)?);
        }
        total = total.combine(&acc);
    }
    Ok(total)
}

#[cfg(feature = "parallel")]
fn run_shards_parallel(ctx: &RunContext, n_reps: u64) -> Result<EstimateAccumulator> {
    use rayon::prelude::*;
    let shards: Vec<EstimateAccumulator> = shard_ranges(n_reps)
        .into_par_iter()
        .map(|range| {
            let master = RngStream::from_seed(ctx.seed);
            let mut acc = EstimateAccumulator::empty();
            for j in range {
                acc.push(ctx.replicate(j, &master)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    // shard order is preserved by collect; in-order merge keeps the result
    // identical to the sequential path
    Ok(shards.iter().fold(EstimateAccumulator::empty(), |t, a| t.combine(a)))
}

/// Run N independent replicates and assemble the report. With the
/// `parallel` feature the shards run on the ambient rayon pool; the result
/// is bit-identical to [`run_estimate_sequential`] regardless of worker
/// count.
pub fn run_estimate(
    params: &EnsembleParams,
    query: &TailQuery,
    method: &Method,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let ctx = checked_setup(params, query, method, n_reps, seed)?;
    #[cfg(feature = "parallel")]
    let acc = run_shards_parallel(&ctx, n_reps)?;
    #[cfg(not(feature = "parallel"))]
    let acc = run_shards_sequential(&ctx, n_reps)?;
    Ok(assemble_report(&ctx, n_reps, &acc))
}

/// The strictly sequential driver, always available; used by the benches to
/// compare against the data-parallel path.
pub fn run_estimate_sequential(
    params: &EnsembleParams,
    query: &TailQuery,
    method: &Method,
    n_reps: u64,
    seed: u64,
) -> Result<EstimateReport> {
    let ctx = checked_setup(params, query, method, n_reps, seed)?;
    let acc = run_shards_sequential(&ctx, n_reps)?;
    Ok(assemble_report(&ctx, n_reps, &acc))
}

/// Build a report from a finished accumulator (used by run_estimate and by
/// callers that merged their own shard accumulators).
pub fn report_from_accumulator(tagged: &TaggedAccumulator, n_reps: u64) -> EstimateReport {
    let ctx = RunContext {
        params: tagged.provenance.params,
        query: tagged.provenance.query,
        method: tagged.provenance.method,
        seed: tagged.provenance.seed,
    };
    assemble_report(&ctx, n_reps, &tagged.acc)
}

fn assemble_report(ctx: &RunContext, n_reps: u64, acc: &EstimateAccumulator) -> EstimateReport {
    let ln_n = (acc.count() as f64).ln();
    let log_estimate_raw = acc.log_sum_w() - ln_n;
    let log_m2_raw = acc.log_sum_w2() - ln_n;
    let zero_estimate = log_estimate_raw == f64::NEG_INFINITY;

    let (log_std, degenerate_std, std_over_est) = if zero_estimate {
        (None, false, None)
    } else {
        let delta = log_m2_raw - 2.0 * log_estimate_raw;
        if delta > 0.0 {
            // Std = Z sqrt(expm1(log M2 - 2 log Z))
            let log_std = log_estimate_raw + 0.5 * delta.exp_m1().ln();
            (Some(log_std), false, Some((log_std - log_estimate_raw).exp()))
        } else {
            (None, true, Some(0.0))
        }
    };

    let efficiency_ratio = if !zero_estimate && log_estimate_raw < 0.0 && log_m2_raw.is_finite() {
        Some(log_m2_raw / (2.0 * log_estimate_raw))
    } else {
        None
    };
    let max_weight_share = if zero_estimate {
        None
    } else {
        Some((acc.log_max_w() - acc.log_sum_w()).exp())
    };
    let is_dmc = matches!(ctx.method, Method::Dmc);
    let dmc_hits = if is_dmc {
        // indicator weights: sum of weights is the hit count
        Some(if zero_estimate { 0 } else { acc.log_sum_w().exp().round() as u64 })
    } else {
        None
    };
    let low_count = is_dmc && dmc_hits.unwrap_or(0) < 10;

    EstimateReport {
        schema_version: 1,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        method: ctx.method,
        params: ctx.params,
        query: ctx.query,
        regime: ctx.method.regime(),
        n_reps,
        seed: ctx.seed,
        log_estimate: if zero_estimate { None } else { Some(log_estimate_raw) },
        estimate_display: display_sci_from_log(log_estimate_raw),
        log_std,
        std_display: display_sci_from_log(log_std.unwrap_or(f64::NEG_INFINITY)),
        std_over_est,
        log_second_moment: if log_m2_raw == f64::NEG_INFINITY { None } else { Some(log_m2_raw) },
        efficiency_ratio,
        max_weight_share,
        weight_degeneracy_warning: max_weight_share.map(|s| s > 0.5).unwrap_or(false),
        degenerate_std,
        zero_estimate,
        low_count,
        dmc_hits,
    }
}
