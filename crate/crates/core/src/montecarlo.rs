//! Forward propagation of uncertainty about `(m, M)` into the contrast bounds.
//!
//! Each sample `i` draws `m` and then `M` from its own ChaCha stream keyed by
//! `(seed, i)`, consuming exactly one 64-bit word per parameter. Results are
//! collected in index order, so the output does not depend on how many
//! worker threads produced them.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bounds::{feasible_region, ObservedMargins, SensitivityParams};
use crate::contrasts::{contrast_interval, ContrastSpec};
use crate::error::{Error, Result};
use crate::ext_real;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_M_VARIANCE: f64 = 0.1;
pub const QUANTILE_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// A distribution over one sensitivity parameter. Continuous kinds draw
/// strictly inside `(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamDistribution {
    PointMass {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// A normal with the given location and (pre-truncation) variance,
    /// restricted to `(low, high)`.
    TruncatedNormal {
        mean: f64,
        variance: f64,
        low: f64,
        high: f64,
    },
}

/// Which sensitivity parameter a distribution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    SmallM,
    BigM,
}

impl Parameter {
    fn range(self, obs: &ObservedMargins) -> (f64, f64) {
        let region = feasible_region(obs);
        match self {
            Parameter::SmallM => region.m_range(),
            Parameter::BigM => region.big_m_range(),
        }
    }
}

impl ParamDistribution {
    pub fn uniform(param: Parameter, obs: &ObservedMargins) -> Self {
        let (low, high) = param.range(obs);
        ParamDistribution::Uniform { low, high }
    }

    pub fn truncated_normal(param: Parameter, obs: &ObservedMargins, mean: f64, variance: f64) -> Self {
        let (low, high) = param.range(obs);
        ParamDistribution::TruncatedNormal {
            mean,
            variance,
            low,
            high,
        }
    }

    /// Truncated normal centred on `m*/2` with variance 0.1 over `(0, m*)`.
    pub fn default_small_m(obs: &ObservedMargins) -> Self {
        let m_star = feasible_region(obs).m_star.value();
        Self::truncated_normal(Parameter::SmallM, obs, m_star / 2.0, DEFAULT_M_VARIANCE)
    }

    /// Uniform over `(M*, 1)`.
    pub fn default_big_m(obs: &ObservedMargins) -> Self {
        Self::uniform(Parameter::BigM, obs)
    }

    fn support(&self) -> Option<(f64, f64)> {
        match *self {
            ParamDistribution::PointMass { .. } => None,
            ParamDistribution::Uniform { low, high } | ParamDistribution::TruncatedNormal { low, high, .. } => {
                Some((low, high))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ParamDistribution::PointMass { value } if !(0.0..=1.0).contains(&value) => Err(Error::InvalidDistribution(
                format!("point mass at {value} is not a probability"),
            )),
            ParamDistribution::TruncatedNormal { mean, variance, .. }
                if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) =>
            {
                Err(Error::InvalidDistribution(format!(
                    "truncated normal needs a finite mean and positive variance, got mean {mean}, variance {variance}"
                )))
            }
            _ => match self.support() {
                Some((low, high)) if !(high > low) => Err(Error::DegenerateSupport { low, high }),
                _ => Ok(()),
            },
        }
    }

    /// Checks that the support matches the feasible range of `param`.
    /// Point masses only need to lie inside the closed range.
    pub fn check_bound(&self, param: Parameter, obs: &ObservedMargins) -> Result<()> {
        let (expected_low, expected_high) = param.range(obs);
        let tol = crate::bounds::FEASIBILITY_TOLERANCE;
        match (*self, self.support()) {
            (ParamDistribution::PointMass { value }, _) => {
                if value < expected_low - tol || value > expected_high + tol {
                    Err(Error::SupportMismatch {
                        low: value,
                        high: value,
                        expected_low,
                        expected_high,
                    })
                } else {
                    Ok(())
                }
            }
            (_, Some((low, high))) => {
                if (low - expected_low).abs() > tol || (high - expected_high).abs() > tol {
                    Err(Error::SupportMismatch {
                        low,
                        high,
                        expected_low,
                        expected_high,
                    })
                } else {
                    Ok(())
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Uniform in the open interval `(0, 1)` from one 64-bit word.
fn open_unit(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

fn clamp_open(x: f64, low: f64, high: f64) -> f64 {
    if x <= low {
        low.next_up()
    } else if x >= high {
        high.next_down()
    } else {
        x
    }
}

/// A distribution with its normal CDF endpoints precomputed.
#[derive(Debug, Clone, Copy)]
enum Sampler {
    Fixed(f64),
    Uniform {
        low: f64,
        high: f64,
    },
    TruncatedNormal {
        normal: Normal,
        cdf_low: f64,
        cdf_high: f64,
        low: f64,
        high: f64,
    },
}

impl Sampler {
    fn new(dist: &ParamDistribution) -> Result<Self> {
        dist.validate()?;
        Ok(match *dist {
            ParamDistribution::PointMass { value } => Sampler::Fixed(value),
            ParamDistribution::Uniform { low, high } => Sampler::Uniform { low, high },
            ParamDistribution::TruncatedNormal {
                mean,
                variance,
                low,
                high,
            } => {
                let normal =
                    Normal::new(mean, variance.sqrt()).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
                let (cdf_low, cdf_high) = (normal.cdf(low), normal.cdf(high));
                if !(cdf_high > cdf_low) {
                    // support lies so deep in one tail that the CDF cannot resolve it
                    return Err(Error::DegenerateSupport { low, high });
                }
                Sampler::TruncatedNormal {
                    normal,
                    cdf_low,
                    cdf_high,
                    low,
                    high,
                }
            }
        })
    }

    fn draw<R: RngCore>(&self, stream: &mut R) -> f64 {
        let u = open_unit(stream.next_u64());
        match *self {
            Sampler::Fixed(value) => value,
            Sampler::Uniform { low, high } => clamp_open(low + u * (high - low), low, high),
            Sampler::TruncatedNormal {
                normal,
                cdf_low,
                cdf_high,
                low,
                high,
            } => clamp_open(normal.inverse_cdf(cdf_low + u * (cdf_high - cdf_low)), low, high),
        }
    }
}

/// One draw; always consumes exactly one word from `stream`. Continuous
/// kinds invert the CDF over the support, so no draw is ever rejected.
pub fn sample_param<R: RngCore>(dist: &ParamDistribution, stream: &mut R) -> Result<f64> {
    Ok(Sampler::new(dist)?.draw(stream))
}

#[derive(Debug, Clone, Serialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub m_dist: ParamDistribution,
    #[serde(rename = "M_dist")]
    pub big_m_dist: ParamDistribution,
    pub contrast: ContrastSpec,
    pub histogram_bins: usize,
}

impl McConfig {
    /// Default sample size, bins and parameter distributions for `obs`.
    pub fn new(obs: &ObservedMargins, contrast: ContrastSpec, seed: u64) -> Self {
        McConfig {
            n_samples: DEFAULT_SAMPLES,
            seed,
            m_dist: ParamDistribution::default_small_m(obs),
            big_m_dist: ParamDistribution::default_big_m(obs),
            contrast,
            histogram_bins: DEFAULT_BINS,
        }
    }
}

/// One Monte Carlo draw and the contrast bounds it implies; `bounds` is
/// `None` when the contrast was indeterminate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSample {
    pub m: f64,
    pub big_m: f64,
    pub bounds: Option<(f64, f64)>,
}

fn stream_for(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw(obs: &ObservedMargins, config: &McConfig, samplers: &(Sampler, Sampler), index: usize) -> Result<McSample> {
    let mut rng = stream_for(config.seed, index as u64);
    let m = samplers.0.draw(&mut rng);
    let big_m = samplers.1.draw(&mut rng);
    let params = SensitivityParams::unchecked(m, big_m)?;
    let bounds = match contrast_interval(obs, &params, &config.contrast) {
        Ok(ci) => Some((ci.lower, ci.upper)),
        Err(Error::Indeterminate { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(McSample { m, big_m, bounds })
}

fn check_config(obs: &ObservedMargins, config: &McConfig) -> Result<()> {
    if config.n_samples == 0 || config.histogram_bins == 0 {
        return Err(Error::EmptyRun);
    }
    config.m_dist.validate()?;
    config.big_m_dist.validate()?;
    config.m_dist.check_bound(Parameter::SmallM, obs)?;
    config.big_m_dist.check_bound(Parameter::BigM, obs)?;
    Ok(())
}

/// All samples in index order, computed on the current rayon pool.
pub fn run_mc_samples(obs: &ObservedMargins, config: &McConfig) -> Result<Vec<McSample>> {
    check_config(obs, config)?;
    let samplers = (Sampler::new(&config.m_dist)?, Sampler::new(&config.big_m_dist)?);
    (0..config.n_samples)
        .into_par_iter()
        .map(|i| draw(obs, config, &samplers, i))
        .collect()
}

pub fn run_mc(obs: &ObservedMargins, config: &McConfig) -> Result<McSummary> {
    let samples = run_mc_samples(obs, config)?;
    Ok(McSummary::from_samples(config, &samples))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    Ok(pool.install(f))
}

/// [`run_mc`] on `threads` workers; the summary is identical for every
/// thread count.
pub fn run_mc_with_threads(obs: &ObservedMargins, config: &McConfig, threads: usize) -> Result<McSummary> {
    with_threads(threads, || run_mc(obs, config))?
}

/// Per-sample rows `index,m,M,lower,upper`; indeterminate bounds are empty.
pub fn samples_to_csv(samples: &[McSample]) -> String {
    let mut out = String::from("index,m,M,lower,upper\n");
    for (i, s) in samples.iter().enumerate() {
        let (lo, hi) = match s.bounds {
            Some((lo, hi)) => (ext_real::display_full(lo), ext_real::display_full(hi)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!("{i},{},{},{lo},{hi}\n", s.m, s.big_m));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantile {
    pub level: f64,
    #[serde(with = "ext_real")]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges; infinite samples are counted in the outermost bins.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn build(sorted: &[f64], bins: usize) -> Self {
        let finite: Vec<f64> = sorted.iter().copied().filter(|x| x.is_finite()).collect();
        let (lo, hi) = match (finite.first(), finite.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0.0, 0.0),
        };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + width * k as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &x in sorted {
            let k = if x == f64::NEG_INFINITY || width == 0.0 {
                if x == f64::INFINITY {
                    bins - 1
                } else {
                    0
                }
            } else if x == f64::INFINITY {
                bins - 1
            } else {
                (((x - lo) / width).floor() as usize).min(bins - 1)
            };
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    /// Two columns, `bin_left_edge,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left_edge,count\n");
        for (edge, count) in self.edges.iter().zip(&self.counts) {
            out.push_str(&format!("{edge},{count}\n"));
        }
        out
    }
}

/// Distribution of one bound (lower or upper) across the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    #[serde(with = "ext_real")]
    pub mean: f64,
    #[serde(with = "ext_real")]
    pub sd: f64,
    pub quantiles: Vec<Quantile>,
    pub histogram: Histogram,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl BoundSummary {
    fn from_values(values: Vec<f64>, bins: usize) -> Self {
        let n = values.len();
        let (mean, sd) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else if values.iter().all(|&x| x == values[0]) {
            // summation would leave rounding noise on a constant sample
            (values[0], 0.0)
        } else {
            let mean = values.iter().sum::<f64>() / n as f64;
            let sd = if n > 1 {
                (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            (mean, sd)
        };
        let mut sorted = values;
        sorted.sort_by(f64::total_cmp);
        let quantiles = QUANTILE_LEVELS
            .iter()
            .map(|&level| Quantile {
                level,
                value: quantile_sorted(&sorted, level),
            })
            .collect();
        BoundSummary {
            mean,
            sd,
            quantiles,
            histogram: Histogram::build(&sorted, bins),
            sorted,
        }
    }

    /// Empirical `P(bound <= x)` over the determinate samples.
    pub fn p_leq(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return f64::NAN;
        }
        let k = self.sorted.partition_point(|&v| v <= x);
        k as f64 / self.sorted.len() as f64
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }
}

/// Linear interpolation between order statistics (type 7).
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * level;
            let i = h.floor() as usize;
            let frac = h - i as f64;
            let (a, b) = (sorted[i], sorted[(i + 1).min(n - 1)]);
            if frac == 0.0 || a == b {
                a
            } else if a.is_infinite() || b.is_infinite() {
                b
            } else {
                a + frac * (b - a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub contrast: ContrastSpec,
    pub n_samples: usize,
    /// Samples whose contrast was indeterminate; excluded from the statistics.
    pub n_indeterminate: usize,
    pub lower: BoundSummary,
    pub upper: BoundSummary,
}

impl McSummary {
    pub fn from_samples(config: &McConfig, samples: &[McSample]) -> Self {
        let (lower, upper): (Vec<f64>, Vec<f64>) = samples.iter().filter_map(|s| s.bounds).unzip();
        McSummary {
            contrast: config.contrast.clone(),
            n_samples: samples.len(),
            n_indeterminate: samples.len() - lower.len(),
            lower: BoundSummary::from_values(lower, config.histogram_bins),
            upper: BoundSummary::from_values(upper, config.histogram_bins),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_margins() -> ObservedMargins {
        ObservedMargins::new(0.27, 0.38, 0.49).unwrap()
    }

    #[test]
    fn point_mass_is_constant() {
        let d = ParamDistribution::PointMass { value: 0.2 };
        let mut rng = stream_for(7, 0);
        for _ in 0..100 {
            assert_eq!(sample_param(&d, &mut rng).unwrap(), 0.2);
        }
    }

    #[test]
    fn uniform_stays_inside() {
        let d = ParamDistribution::default_big_m(&example_margins());
        assert_eq!(d, ParamDistribution::Uniform { low: 0.49, high: 1.0 });
        let mut rng = stream_for(1, 3);
        for _ in 0..10_000 {
            let x = sample_param(&d, &mut rng).unwrap();
            assert!(x > 0.49 && x < 1.0);
        }
    }

    #[test]
    fn open_unit_extremes() {
        assert!(open_unit(0) > 0.0);
        assert!(open_unit(u64::MAX) < 1.0);
        assert_eq!(clamp_open(1.0, 0.49, 1.0), 1.0f64.next_down());
        assert_eq!(clamp_open(0.0, 0.0, 0.38), 0.0f64.next_up());
    }

    #[test]
    fn degenerate_support() {
        let obs = ObservedMargins::new(0.5, 0.3, 1.0).unwrap();
        let d = ParamDistribution::default_big_m(&obs);
        let mut rng = stream_for(0, 0);
        assert!(matches!(
            sample_param(&d, &mut rng),
            Err(Error::DegenerateSupport { .. })
        ));
        let obs = ObservedMargins::new(0.5, 0.0, 0.4).unwrap();
        let d = ParamDistribution::default_small_m(&obs);
        assert!(matches!(
            sample_param(&d, &mut rng),
            Err(Error::DegenerateSupport { .. })
        ));
    }

    #[test]
    fn invalid_variance() {
        let d = ParamDistribution::TruncatedNormal {
            mean: 0.1,
            variance: 0.0,
            low: 0.0,
            high: 0.38,
        };
        assert!(matches!(d.validate(), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn quantile_interpolation() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.25), 2.0);
        assert!((quantile_sorted(&s, 0.99) - 4.96).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.05), 7.0);
        assert_eq!(quantile_sorted(&[1.0, f64::INFINITY], 0.5), f64::INFINITY);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::build(&[0.0, 0.1, 0.5, 1.0, f64::INFINITY], 4);
        assert_eq!(h.counts, vec![2, 0, 1, 2]);
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let h = Histogram::build(&[0.3, 0.3, 0.3], 5);
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        assert_eq!(h.counts[0], 3);
        assert!(h.to_csv().starts_with("bin_left_edge,count\n0.3,3\n"));
    }

    #[test]
    fn single_sample_summary() {
        let obs = example_margins();
        let mut config = McConfig::new(&obs, ContrastSpec::RiskDifference, 11);
        config.n_samples = 1;
        let samples = run_mc_samples(&obs, &config).unwrap();
        let summary = McSummary::from_samples(&config, &samples);
        let (lo, hi) = samples[0].bounds.unwrap();
        assert_eq!(summary.lower.mean, lo);
        assert_eq!(summary.upper.mean, hi);
        assert_eq!(summary.lower.sd, 0.0);
    }

    #[test]
    fn point_masses_reproduce_robins_bounds() {
        let obs = example_margins();
        let mut config = McConfig::new(&obs, ContrastSpec::RiskDifference, 5);
        config.n_samples = 1000;
        config.m_dist = ParamDistribution::PointMass { value: 0.0 };
        config.big_m_dist = ParamDistribution::PointMass { value: 1.0 };
        let summary = run_mc(&obs, &config).unwrap();
        assert!((summary.lower.mean + 0.4151).abs() < 1e-12);
        assert!((summary.upper.mean - 0.5849).abs() < 1e-12);
        assert_eq!(summary.lower.histogram.counts[0], 1000);
        assert_eq!(summary.lower.p_leq(-0.42), 0.0);
        assert_eq!(summary.lower.p_leq(-0.41), 1.0);
    }

    #[test]
    fn support_mismatch_rejected() {
        let obs = example_margins();
        let mut config = McConfig::new(&obs, ContrastSpec::RiskDifference, 5);
        config.big_m_dist = ParamDistribution::Uniform { low: 0.3, high: 1.0 };
        assert!(matches!(run_mc(&obs, &config), Err(Error::SupportMismatch { .. })));
        config.big_m_dist = ParamDistribution::PointMass { value: 0.4 };
        assert!(matches!(run_mc(&obs, &config), Err(Error::SupportMismatch { .. })));
        config.big_m_dist = ParamDistribution::default_big_m(&obs);
        config.n_samples = 0;
        assert_eq!(run_mc(&obs, &config), Err(Error::EmptyRun));
    }

    #[test]
    fn indeterminate_samples_are_tallied() {
        // every bound is 1, so the odds ratio is inf/inf
        let obs = ObservedMargins::new(0.5, 1.0, 1.0).unwrap();
        let mut config = McConfig::new(&obs, ContrastSpec::OddsRatio, 5);
        config.n_samples = 10;
        config.m_dist = ParamDistribution::PointMass { value: 1.0 };
        config.big_m_dist = ParamDistribution::PointMass { value: 1.0 };
        let summary = run_mc(&obs, &config).unwrap();
        assert_eq!(summary.n_indeterminate, 10);
        assert_eq!(summary.lower.count(), 0);
        assert!(summary.lower.mean.is_nan());
    }
}
