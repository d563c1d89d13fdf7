//! Contrasts `g(p(D_1=1), p(D_0=1))` and their sharp bounds.
//!
//! For any `g` nondecreasing in its first argument and nonincreasing in its
//! second, the bounds are `g(LB_1, UB_0)` and `g(UB_1, LB_0)`. Values are
//! extended reals: ratios with a vanishing denominator yield `+inf`, and only
//! genuinely indeterminate forms (`0/0`, `inf/inf`, `inf - inf`) are errors.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::bounds::{counterfactual_interval, Exposure, ObservedMargins, Probability, SensitivityParams};
use crate::error::{Error, Result};

type Evaluator = dyn Fn(Probability, Probability) -> Result<f64> + Send + Sync;

/// Points per axis used to spot-check custom contrasts for monotonicity.
const MONOTONICITY_PROBES: usize = 41;

#[derive(Clone)]
pub struct CustomContrast {
    name: String,
    eval: Arc<Evaluator>,
}

#[derive(Clone)]
pub enum ContrastSpec {
    RiskRatio,
    RiskDifference,
    OddsRatio,
    OddsDifference,
    Custom(CustomContrast),
}

impl ContrastSpec {
    pub const BUILTIN: [ContrastSpec; 4] = [
        ContrastSpec::RiskRatio,
        ContrastSpec::RiskDifference,
        ContrastSpec::OddsRatio,
        ContrastSpec::OddsDifference,
    ];

    /// Wraps a user-supplied contrast. The evaluator must be nondecreasing in
    /// `p1` and nonincreasing in `p0`; a grid of probability pairs is probed
    /// and a violation rejects the contrast.
    pub fn custom<F>(name: impl Into<String>, eval: F) -> Result<Self>
    where
        F: Fn(Probability, Probability) -> Result<f64> + Send + Sync + 'static,
    {
        let name = name.into();
        check_monotone(&name, &eval)?;
        Ok(ContrastSpec::Custom(CustomContrast {
            name,
            eval: Arc::new(eval),
        }))
    }

    pub fn name(&self) -> &str {
        match self {
            ContrastSpec::RiskRatio => "risk_ratio",
            ContrastSpec::RiskDifference => "risk_difference",
            ContrastSpec::OddsRatio => "odds_ratio",
            ContrastSpec::OddsDifference => "odds_difference",
            ContrastSpec::Custom(c) => &c.name,
        }
    }

    /// Value of the contrast when both counterfactual risks are equal.
    /// `None` for custom contrasts.
    pub fn null_value(&self) -> Option<f64> {
        match self {
            ContrastSpec::RiskRatio | ContrastSpec::OddsRatio => Some(1.0),
            ContrastSpec::RiskDifference | ContrastSpec::OddsDifference => Some(0.0),
            ContrastSpec::Custom(_) => None,
        }
    }
}

impl fmt::Debug for ContrastSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContrastSpec::Custom(c) => write!(f, "Custom({:?})", c.name),
            other => f.write_str(other.name()),
        }
    }
}

impl fmt::Display for ContrastSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for ContrastSpec {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ContrastSpec::Custom(a), ContrastSpec::Custom(b)) => a.name == b.name && Arc::ptr_eq(&a.eval, &b.eval),
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        }
    }
}

impl FromStr for ContrastSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rr" | "risk_ratio" => Ok(ContrastSpec::RiskRatio),
            "rd" | "risk_difference" => Ok(ContrastSpec::RiskDifference),
            "or" | "odds_ratio" => Ok(ContrastSpec::OddsRatio),
            "od" | "odds_difference" => Ok(ContrastSpec::OddsDifference),
            _ => Err(Error::UnknownContrast(s.to_string())),
        }
    }
}

impl Serialize for ContrastSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

fn check_monotone<F>(name: &str, eval: &F) -> Result<()>
where
    F: Fn(Probability, Probability) -> Result<f64>,
{
    let grid: Vec<Probability> = (0..MONOTONICITY_PROBES)
        .map(|i| Probability::saturating(i as f64 / (MONOTONICITY_PROBES - 1) as f64))
        .collect();
    let value = |p1: Probability, p0: Probability| -> Result<Option<f64>> {
        match eval(p1, p0) {
            Ok(v) if v.is_nan() => Err(Error::NonMonotone {
                name: name.to_string(),
                detail: format!("evaluates to NaN at ({p1}, {p0})"),
            }),
            Ok(v) => Ok(Some(v)),
            Err(Error::Indeterminate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let finite_abs = |x: f64| if x.is_finite() { x.abs() } else { 0.0 };
    let slack = |a: f64, b: f64| 1e-12 * finite_abs(a).max(finite_abs(b)).max(1.0);

    for &fixed in &grid {
        let mut prev_p1: Option<(Probability, f64)> = None;
        let mut prev_p0: Option<(Probability, f64)> = None;
        for &moving in &grid {
            if let Some(v) = value(moving, fixed)? {
                if let Some((q, pv)) = prev_p1 {
                    if v < pv - slack(v, pv) {
                        return Err(Error::NonMonotone {
                            name: name.to_string(),
                            detail: format!("decreases in p1 between p1={q} and p1={moving} at p0={fixed}"),
                        });
                    }
                }
                prev_p1 = Some((moving, v));
            }
            if let Some(v) = value(fixed, moving)? {
                if let Some((q, pv)) = prev_p0 {
                    if v > pv + slack(v, pv) {
                        return Err(Error::NonMonotone {
                            name: name.to_string(),
                            detail: format!("increases in p0 between p0={q} and p0={moving} at p1={fixed}"),
                        });
                    }
                }
                prev_p0 = Some((moving, v));
            }
        }
    }
    Ok(())
}

/// `p / (1 - p)`, with `odds(1) = +inf`.
pub fn odds(p: Probability) -> f64 {
    let p = p.value();
    if p >= 1.0 {
        f64::INFINITY
    } else {
        p / (1.0 - p)
    }
}

fn indeterminate(spec: &ContrastSpec, form: &'static str) -> Error {
    Error::Indeterminate {
        contrast: spec.name().to_string(),
        form,
    }
}

/// Quotient of two nonnegative extended reals.
fn ratio(spec: &ContrastSpec, num: f64, den: f64) -> Result<f64> {
    if den == 0.0 {
        if num == 0.0 {
            Err(indeterminate(spec, "0/0"))
        } else {
            Ok(f64::INFINITY)
        }
    } else if den.is_infinite() {
        if num.is_infinite() {
            Err(indeterminate(spec, "inf/inf"))
        } else {
            Ok(0.0)
        }
    } else {
        Ok(num / den)
    }
}

fn difference(spec: &ContrastSpec, a: f64, b: f64) -> Result<f64> {
    if a.is_infinite() && b.is_infinite() {
        Err(indeterminate(spec, "inf-inf"))
    } else {
        Ok(a - b)
    }
}

pub fn eval_contrast(spec: &ContrastSpec, p1: Probability, p0: Probability) -> Result<f64> {
    match spec {
        ContrastSpec::RiskRatio => ratio(spec, p1.value(), p0.value()),
        ContrastSpec::RiskDifference => Ok(p1.value() - p0.value()),
        ContrastSpec::OddsRatio => ratio(spec, odds(p1), odds(p0)),
        ContrastSpec::OddsDifference => difference(spec, odds(p1), odds(p0)),
        ContrastSpec::Custom(c) => (c.eval)(p1, p0),
    }
}

/// Bounds on a contrast. `upper` may be `+inf` for ratio and odds contrasts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastInterval {
    #[serde(with = "crate::ext_real")]
    pub lower: f64,
    #[serde(with = "crate::ext_real")]
    pub upper: f64,
    pub contrast: ContrastSpec,
}

impl ContrastInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Whether `other` lies within `self`.
    pub fn encloses(&self, other: &ContrastInterval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

pub fn contrast_interval(
    obs: &ObservedMargins,
    params: &SensitivityParams,
    spec: &ContrastSpec,
) -> Result<ContrastInterval> {
    let p1 = counterfactual_interval(obs, params, Exposure::Exposed);
    let p0 = counterfactual_interval(obs, params, Exposure::Unexposed);
    Ok(ContrastInterval {
        lower: eval_contrast(spec, p1.lower, p0.upper)?,
        upper: eval_contrast(spec, p1.upper, p0.lower)?,
        contrast: spec.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::validate_params;

    fn p(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    fn example_margins() -> ObservedMargins {
        ObservedMargins::new(0.27, 0.38, 0.49).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(
            eval_contrast(&ContrastSpec::RiskDifference, p(0.5), p(0.5)).unwrap(),
            0.0
        );
        let or = eval_contrast(&ContrastSpec::OddsRatio, p(0.49), p(0.38)).unwrap();
        assert!((or - (0.49 / 0.51) / (0.38 / 0.62)).abs() < 1e-12);
        assert!((or - 1.5676).abs() < 1e-4);
        assert_eq!(
            eval_contrast(&ContrastSpec::RiskRatio, p(0.3), p(0.0)).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn indeterminate_forms() {
        assert!(matches!(
            eval_contrast(&ContrastSpec::RiskRatio, p(0.0), p(0.0)),
            Err(Error::Indeterminate { form: "0/0", .. })
        ));
        assert!(matches!(
            eval_contrast(&ContrastSpec::OddsRatio, p(1.0), p(1.0)),
            Err(Error::Indeterminate { form: "inf/inf", .. })
        ));
        assert!(matches!(
            eval_contrast(&ContrastSpec::OddsDifference, p(1.0), p(1.0)),
            Err(Error::Indeterminate { form: "inf-inf", .. })
        ));
        assert!(matches!(
            eval_contrast(&ContrastSpec::OddsRatio, p(0.0), p(0.0)),
            Err(Error::Indeterminate { form: "0/0", .. })
        ));
        // determinate limits
        assert_eq!(eval_contrast(&ContrastSpec::OddsRatio, p(0.5), p(1.0)).unwrap(), 0.0);
        assert_eq!(
            eval_contrast(&ContrastSpec::OddsRatio, p(1.0), p(0.5)).unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            eval_contrast(&ContrastSpec::OddsDifference, p(0.5), p(1.0)).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn odds_examples() {
        assert_eq!(odds(p(0.5)), 1.0);
        assert_eq!(odds(p(0.0)), 0.0);
        assert_eq!(odds(p(1.0)), f64::INFINITY);
        assert!((odds(p(0.8623)) - 0.8623 / 0.1377).abs() < 1e-12);
        assert!((odds(p(0.8623)) - 6.262).abs() < 1e-3);
    }

    #[test]
    fn interval_examples() {
        let obs = example_margins();
        let robins = validate_params(&obs, 0.0, 1.0).unwrap();
        let corner = validate_params(&obs, 0.38, 0.49).unwrap();
        let cases = [
            (&robins, ContrastSpec::RiskRatio, 0.24, 3.11),
            (&robins, ContrastSpec::RiskDifference, -0.42, 0.58),
            (&corner, ContrastSpec::OddsRatio, 1.00, 1.57),
            (&robins, ContrastSpec::OddsDifference, -1.06, 5.88),
        ];
        for (params, spec, lo, hi) in cases {
            let ci = contrast_interval(&obs, params, &spec).unwrap();
            assert!((ci.lower - lo).abs() <= 0.015, "{spec}: {} vs {lo}", ci.lower);
            assert!((ci.upper - hi).abs() <= 0.015, "{spec}: {} vs {hi}", ci.upper);
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("rr".parse::<ContrastSpec>().unwrap(), ContrastSpec::RiskRatio);
        assert_eq!("OD".parse::<ContrastSpec>().unwrap(), ContrastSpec::OddsDifference);
        assert_eq!(
            "risk_difference".parse::<ContrastSpec>().unwrap(),
            ContrastSpec::RiskDifference
        );
        assert!(matches!("hr".parse::<ContrastSpec>(), Err(Error::UnknownContrast(_))));
    }

    #[test]
    fn custom_contrast_accepted_and_evaluated() {
        let log_rr = ContrastSpec::custom("log_rr", |p1, p0| {
            let r = eval_contrast(&ContrastSpec::RiskRatio, p1, p0)?;
            Ok(r.ln())
        })
        .unwrap();
        let obs = example_margins();
        let params = validate_params(&obs, 0.1, 0.87).unwrap();
        let a = contrast_interval(&obs, &params, &log_rr).unwrap();
        let b = contrast_interval(&obs, &params, &ContrastSpec::RiskRatio).unwrap();
        assert!((a.lower - b.lower.ln()).abs() < 1e-12);
        assert!((a.upper - b.upper.ln()).abs() < 1e-12);
        assert_eq!(a.contrast.name(), "log_rr");
    }

    #[test]
    fn non_monotone_custom_rejected() {
        let wrong_way = ContrastSpec::custom("rd_reversed", |p1, p0| Ok(p0.value() - p1.value()));
        assert!(matches!(wrong_way, Err(Error::NonMonotone { .. })));
        let bump = ContrastSpec::custom("abs_rd", |p1, p0| Ok((p1.value() - p0.value()).abs()));
        assert!(matches!(bump, Err(Error::NonMonotone { .. })));
        let nan = ContrastSpec::custom("nan", |_, _| Ok(f64::NAN));
        assert!(matches!(nan, Err(Error::NonMonotone { .. })));
    }

    #[test]
    fn serializes_as_name() {
        let ci = ContrastInterval {
            lower: 0.5,
            upper: f64::INFINITY,
            contrast: ContrastSpec::OddsRatio,
        };
        assert_eq!(
            serde_json::to_string(&ci).unwrap(),
            r#"{"lower":0.5,"upper":"inf","contrast":"odds_ratio"}"#
        );
    }
}
