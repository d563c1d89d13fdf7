//! Observed-data margins, sensitivity parameters and the bounds they imply
//! on the counterfactual probabilities `p(D_e = 1)`.
//!
//! With `M = max_{e,u} p(D=1 | E=e, U=u)` and `m = min_{e,u} p(D=1 | E=e, U=u)`,
//! the counterfactual probability satisfies
//!
//! ```text
//! p(D=1, E=e) + p(E=1-e) * m  <=  p(D_e = 1)  <=  p(D=1, E=e) + p(E=1-e) * M
//! ```
//!
//! The data alone restrict the parameters to the feasible region
//! `M* <= M <= 1`, `0 <= m <= m*` where `M*`/`m*` are the largest/smallest
//! observed conditional risks. `(m, M) = (0, 1)` gives the assumption-free
//! bounds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack for `[0, 1]` range checks on probabilities.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Slack for comparing sensitivity parameters against the feasible region.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    /// Values within [`PROBABILITY_TOLERANCE`] outside `[0, 1]` are clamped.
    pub fn new(value: f64) -> Result<Self> {
        Self::named("probability", value)
    }

    pub(crate) fn named(name: &'static str, value: f64) -> Result<Self> {
        // also rejects NaN
        if !(-PROBABILITY_TOLERANCE..=1.0 + PROBABILITY_TOLERANCE).contains(&value) {
            return Err(Error::NotAProbability { name, value });
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    /// Clamps arithmetic results that are probabilities by construction.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(
            (-1e-9..=1.0 + 1e-9).contains(&value),
            "value {value} is far outside [0, 1]"
        );
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Binary exposure level `e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Exposure {
    Unexposed,
    Exposed,
}

impl Exposure {
    pub const BOTH: [Exposure; 2] = [Exposure::Exposed, Exposure::Unexposed];

    pub fn level(self) -> u8 {
        match self {
            Exposure::Unexposed => 0,
            Exposure::Exposed => 1,
        }
    }

    /// The level `1 - e`.
    pub fn other(self) -> Exposure {
        match self {
            Exposure::Unexposed => Exposure::Exposed,
            Exposure::Exposed => Exposure::Unexposed,
        }
    }
}

impl TryFrom<u8> for Exposure {
    type Error = Error;

    fn try_from(level: u8) -> Result<Self> {
        match level {
            0 => Ok(Exposure::Unexposed),
            1 => Ok(Exposure::Exposed),
            other => Err(Error::Parse(format!("exposure level must be 0 or 1, got {other}"))),
        }
    }
}

impl From<Exposure> for u8 {
    fn from(e: Exposure) -> u8 {
        e.level()
    }
}

/// The observed distribution of `(D, E)`: `p(E=1)` and the conditional risks
/// `p(D=1 | E=e)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedMargins {
    p_e1: Probability,
    p_d1_e0: Probability,
    p_d1_e1: Probability,
}

impl ObservedMargins {
    /// Both exposure arms must be observed, so `p_e1` has to lie strictly
    /// inside `(0, 1)`.
    pub fn new(p_e1: f64, p_d1_e0: f64, p_d1_e1: f64) -> Result<Self> {
        let p_e1 = Probability::named("p(E=1)", p_e1)?;
        if p_e1.value() <= 0.0 || p_e1.value() >= 1.0 {
            return Err(Error::UnobservedArm(p_e1.value()));
        }
        Ok(ObservedMargins {
            p_e1,
            p_d1_e0: Probability::named("p(D=1|E=0)", p_d1_e0)?,
            p_d1_e1: Probability::named("p(D=1|E=1)", p_d1_e1)?,
        })
    }

    pub fn p_e1(&self) -> Probability {
        self.p_e1
    }

    pub fn p_d1_e0(&self) -> Probability {
        self.p_d1_e0
    }

    pub fn p_d1_e1(&self) -> Probability {
        self.p_d1_e1
    }

    /// `p(E = e)`.
    pub fn p_exposure(&self, e: Exposure) -> Probability {
        match e {
            Exposure::Exposed => self.p_e1,
            Exposure::Unexposed => self.p_e1.complement(),
        }
    }

    /// `p(D = 1 | E = e)`.
    pub fn risk(&self, e: Exposure) -> Probability {
        match e {
            Exposure::Exposed => self.p_d1_e1,
            Exposure::Unexposed => self.p_d1_e0,
        }
    }

    /// Joint cell `p(D = d, E = e)`.
    pub fn joint(&self, d: bool, e: Exposure) -> Probability {
        let risk = self.risk(e).value();
        let pd = if d { risk } else { 1.0 - risk };
        Probability::saturating(pd * self.p_exposure(e).value())
    }
}

impl<'de> Deserialize<'de> for ObservedMargins {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p_e1: f64,
            p_d1_e0: f64,
            p_d1_e1: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        ObservedMargins::new(raw.p_e1, raw.p_d1_e0, raw.p_d1_e1).map_err(serde::de::Error::custom)
    }
}

/// Data-imposed limits on the sensitivity parameters: `m <= m*` and `M >= M*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibleRegion {
    pub m_star: Probability,
    #[serde(rename = "M_star")]
    pub big_m_star: Probability,
}

impl FeasibleRegion {
    pub fn m_range(&self) -> (f64, f64) {
        (0.0, self.m_star.value())
    }

    pub fn big_m_range(&self) -> (f64, f64) {
        (self.big_m_star.value(), 1.0)
    }
}

impl fmt::Display for FeasibleRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= M <= 1, 0 <= m <= {}", self.big_m_star, self.m_star)
    }
}

pub fn feasible_region(obs: &ObservedMargins) -> FeasibleRegion {
    let (r0, r1) = (obs.p_d1_e0, obs.p_d1_e1);
    FeasibleRegion {
        m_star: if r0 <= r1 { r0 } else { r1 },
        big_m_star: if r0 >= r1 { r0 } else { r1 },
    }
}

/// A validated pair `(m, M)`. Only obtainable through [`validate_params`]
/// (or [`SensitivityParams::unchecked`] for callers that have already
/// established feasibility).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityParams {
    m: Probability,
    #[serde(rename = "M")]
    big_m: Probability,
}

impl SensitivityParams {
    pub fn m(&self) -> Probability {
        self.m
    }

    pub fn big_m(&self) -> Probability {
        self.big_m
    }

    /// Skips the feasible-region check but still requires `m <= M`.
    pub fn unchecked(m: f64, big_m: f64) -> Result<Self> {
        let m = Probability::named("m", m)?;
        let big_m = Probability::named("M", big_m)?;
        if m > big_m {
            return Err(Error::Inverted {
                m: m.value(),
                big_m: big_m.value(),
            });
        }
        Ok(SensitivityParams { m, big_m })
    }
}

/// Checks `M* <= M <= 1` and `0 <= m <= m*` with [`FEASIBILITY_TOLERANCE`]
/// slack. Values inside the slack are snapped onto the boundary.
pub fn validate_params(obs: &ObservedMargins, raw_m: f64, raw_big_m: f64) -> Result<SensitivityParams> {
    let region = feasible_region(obs);
    let m_star = region.m_star.value();
    let big_m_star = region.big_m_star.value();

    if raw_m.is_nan() || raw_big_m.is_nan() {
        return Err(Error::Parse("sensitivity parameters must be numbers".into()));
    }
    if raw_m > raw_big_m + FEASIBILITY_TOLERANCE {
        return Err(Error::Inverted {
            m: raw_m,
            big_m: raw_big_m,
        });
    }
    if raw_big_m < big_m_star - FEASIBILITY_TOLERANCE || raw_big_m > 1.0 + FEASIBILITY_TOLERANCE {
        return Err(Error::InfeasibleM {
            value: raw_big_m,
            lower: big_m_star,
        });
    }
    if raw_m < -FEASIBILITY_TOLERANCE || raw_m > m_star + FEASIBILITY_TOLERANCE {
        return Err(Error::InfeasibleSmallM {
            value: raw_m,
            upper: m_star,
        });
    }

    Ok(SensitivityParams {
        m: Probability(raw_m.clamp(0.0, m_star)),
        big_m: Probability(raw_big_m.clamp(big_m_star, 1.0)),
    })
}

/// Bounds `(LB_e, UB_e)` on `p(D_e = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityInterval {
    pub lower: Probability,
    pub upper: Probability,
    pub exposure: Exposure,
}

impl ProbabilityInterval {
    pub fn width(&self) -> f64 {
        self.upper.value() - self.lower.value()
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower.value() <= p && p <= self.upper.value()
    }
}

pub fn counterfactual_interval(obs: &ObservedMargins, params: &SensitivityParams, e: Exposure) -> ProbabilityInterval {
    let observed = obs.joint(true, e).value();
    let weight = obs.p_exposure(e.other()).value();
    ProbabilityInterval {
        lower: Probability::saturating(observed + weight * params.m.value()),
        upper: Probability::saturating(observed + weight * params.big_m.value()),
        exposure: e,
    }
}

/// Observed `p(D = 1 | E = e)`, the risk an unconfounded analysis would report.
pub fn crude_risk(obs: &ObservedMargins, e: Exposure) -> Probability {
    obs.risk(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_margins() -> ObservedMargins {
        ObservedMargins::new(0.27, 0.38, 0.49).unwrap()
    }

    #[test]
    fn probability_range() {
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(1.0001).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(Probability::new(1.0 + 1e-13).unwrap().value(), 1.0);
        assert_eq!(Probability::new(-1e-13).unwrap().value(), 0.0);
    }

    #[test]
    fn margins_reject_unobserved_arm() {
        assert!(matches!(
            ObservedMargins::new(0.0, 0.3, 0.4),
            Err(Error::UnobservedArm(_))
        ));
        assert!(matches!(
            ObservedMargins::new(1.0, 0.3, 0.4),
            Err(Error::UnobservedArm(_))
        ));
        assert!(matches!(
            ObservedMargins::new(0.5, 1.3, 0.4),
            Err(Error::NotAProbability { .. })
        ));
    }

    #[test]
    fn joint_cells_sum_to_one() {
        let obs = example_margins();
        let total: f64 = [true, false]
            .iter()
            .flat_map(|&d| Exposure::BOTH.map(|e| obs.joint(d, e).value()))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasible_region_examples() {
        let r = feasible_region(&example_margins());
        assert_eq!((r.m_star.value(), r.big_m_star.value()), (0.38, 0.49));

        let r = feasible_region(&ObservedMargins::new(0.5, 0.3, 0.3).unwrap());
        assert_eq!((r.m_star.value(), r.big_m_star.value()), (0.3, 0.3));

        let r = feasible_region(&ObservedMargins::new(0.5, 0.0, 1.0).unwrap());
        assert_eq!((r.m_star.value(), r.big_m_star.value()), (0.0, 1.0));
    }

    #[test]
    fn validate_params_examples() {
        let obs = example_margins();
        let p = validate_params(&obs, 0.1, 0.87).unwrap();
        assert_eq!((p.m().value(), p.big_m().value()), (0.1, 0.87));

        assert_eq!(
            validate_params(&obs, 0.5, 1.0),
            Err(Error::InfeasibleSmallM {
                value: 0.5,
                upper: 0.38
            })
        );

        let p = validate_params(&obs, 0.38, 0.49).unwrap();
        assert_eq!((p.m().value(), p.big_m().value()), (0.38, 0.49));
    }

    #[test]
    fn validate_params_errors() {
        let obs = example_margins();
        assert!(matches!(validate_params(&obs, 0.1, 0.4), Err(Error::InfeasibleM { lower, .. }) if lower == 0.49));
        assert!(matches!(
            validate_params(&obs, 0.1, 1.1),
            Err(Error::InfeasibleM { .. })
        ));
        assert!(matches!(
            validate_params(&obs, -0.1, 0.9),
            Err(Error::InfeasibleSmallM { .. })
        ));
        assert!(matches!(validate_params(&obs, 0.9, 0.5), Err(Error::Inverted { .. })));
        // inside the tolerance band: snapped to the boundary
        let p = validate_params(&obs, 0.38 + 5e-10, 0.49 - 5e-10).unwrap();
        assert_eq!((p.m().value(), p.big_m().value()), (0.38, 0.49));
        let p = validate_params(&obs, -5e-10, 1.0 + 5e-10).unwrap();
        assert_eq!((p.m().value(), p.big_m().value()), (0.0, 1.0));
    }

    #[test]
    fn counterfactual_interval_examples() {
        let obs = example_margins();
        let p = validate_params(&obs, 0.0, 1.0).unwrap();

        let i1 = counterfactual_interval(&obs, &p, Exposure::Exposed);
        assert!((i1.lower.value() - 0.1323).abs() < 1e-12);
        assert!((i1.upper.value() - 0.8623).abs() < 1e-12);

        let i0 = counterfactual_interval(&obs, &p, Exposure::Unexposed);
        assert!((i0.lower.value() - 0.2774).abs() < 1e-12);
        assert!((i0.upper.value() - 0.5474).abs() < 1e-12);
    }

    #[test]
    fn degenerate_point_interval() {
        for &pe in &[0.1, 0.5, 0.9] {
            let obs = ObservedMargins::new(pe, 0.3, 0.3).unwrap();
            let p = validate_params(&obs, 0.3, 0.3).unwrap();
            for e in Exposure::BOTH {
                let i = counterfactual_interval(&obs, &p, e);
                assert!((i.lower.value() - 0.3).abs() < 1e-12);
                assert!((i.upper.value() - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crude_risk_examples() {
        let obs = example_margins();
        assert_eq!(crude_risk(&obs, Exposure::Exposed).value(), 0.49);
        assert_eq!(crude_risk(&obs, Exposure::Unexposed).value(), 0.38);
        let obs = ObservedMargins::new(0.4, 0.2, 0.0).unwrap();
        assert_eq!(crude_risk(&obs, Exposure::Exposed).value(), 0.0);
    }

    #[test]
    fn margins_json_validates() {
        let ok: ObservedMargins = serde_json::from_str(r#"{"p_e1":0.27,"p_d1_e0":0.38,"p_d1_e1":0.49}"#).unwrap();
        assert_eq!(ok, example_margins());
        assert!(serde_json::from_str::<ObservedMargins>(r#"{"p_e1":0,"p_d1_e0":0.38,"p_d1_e1":0.49}"#).is_err());
    }
}
