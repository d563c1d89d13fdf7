//! Explicit confounded models that come arbitrarily close to the bounds.
//!
//! Given margins `p'(D, E)` and feasible `(m', M')`, a binary confounder with
//! `p(U=1 | E=1) = p(U=0 | E=0) = 1 - eps` and
//!
//! | cell          | lower p1 / upper p0 | upper p1 / lower p0 |
//! |---------------|---------------------|---------------------|
//! | `p(D=1|E=1,U=1)` | `p'(D=1|E=1)`   | `p'(D=1|E=1)`       |
//! | `p(D=1|E=1,U=0)` | `m'`            | `M'`                |
//! | `p(D=1|E=0,U=1)` | `M'`            | `m'`                |
//! | `p(D=1|E=0,U=0)` | `p'(D=1|E=0)`   | `p'(D=1|E=0)`       |
//!
//! has extrema exactly `(m', M')`, reproduces the margins up to `O(eps)`, and
//! its counterfactual probabilities sit within `O(eps)` of the targeted pair
//! of bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{
    counterfactual_interval, validate_params, Exposure, ObservedMargins, Probability, SensitivityParams,
};
use crate::error::{Error, Result};

/// Epsilon used for sharpness checks when none is given.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Which pair of bounds a witness approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessTarget {
    /// Lower bound of `p(D_1=1)` together with the upper bound of `p(D_0=1)`.
    LowerP1AndUpperP0,
    /// Upper bound of `p(D_1=1)` together with the lower bound of `p(D_0=1)`.
    UpperP1AndLowerP0,
}

impl FromStr for WitnessTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theorem1" | "lower_p1_and_upper_p0" => Ok(WitnessTarget::LowerP1AndUpperP0),
            "theorem2" | "upper_p1_and_lower_p0" => Ok(WitnessTarget::UpperP1AndLowerP0),
            _ => Err(Error::Parse(format!(
                "unknown witness target `{s}` (expected theorem1 or theorem2)"
            ))),
        }
    }
}

impl fmt::Display for WitnessTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WitnessTarget::LowerP1AndUpperP0 => "lower_p1_and_upper_p0",
            WitnessTarget::UpperP1AndLowerP0 => "upper_p1_and_lower_p0",
        })
    }
}

/// `p(D=1 | E=e, U=u)` for binary `E` and `U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CondTable {
    pub e1_u1: Probability,
    pub e1_u0: Probability,
    pub e0_u1: Probability,
    pub e0_u0: Probability,
}

impl CondTable {
    pub fn constant(p: Probability) -> Self {
        CondTable {
            e1_u1: p,
            e1_u0: p,
            e0_u1: p,
            e0_u0: p,
        }
    }

    pub fn get(&self, e: Exposure, u: bool) -> Probability {
        match (e, u) {
            (Exposure::Exposed, true) => self.e1_u1,
            (Exposure::Exposed, false) => self.e1_u0,
            (Exposure::Unexposed, true) => self.e0_u1,
            (Exposure::Unexposed, false) => self.e0_u0,
        }
    }

    fn entries(&self) -> [Probability; 4] {
        [self.e1_u1, self.e1_u0, self.e0_u1, self.e0_u0]
    }

    /// `(min, max)` over all four cells.
    pub fn extrema(&self) -> (Probability, Probability) {
        let entries = self.entries();
        let min = entries
            .iter()
            .copied()
            .fold(Probability::ONE, |a, b| if b < a { b } else { a });
        let max = entries
            .iter()
            .copied()
            .fold(Probability::ZERO, |a, b| if b > a { b } else { a });
        (min, max)
    }
}

/// A joint distribution `p(D, E, U)` with binary `U`, given by `p(E=1)`,
/// `p(U=1 | E=e)` and `p(D=1 | E, U)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryConfounderModel {
    pub p_e1: Probability,
    pub p_u1_given_e1: Probability,
    pub p_u1_given_e0: Probability,
    pub cond_table: CondTable,
}

impl BinaryConfounderModel {
    pub fn p_u_given_e(&self, u: bool, e: Exposure) -> f64 {
        let p_u1 = match e {
            Exposure::Exposed => self.p_u1_given_e1.value(),
            Exposure::Unexposed => self.p_u1_given_e0.value(),
        };
        if u {
            p_u1
        } else {
            1.0 - p_u1
        }
    }

    /// `sum_u p(D=1 | E=given, U=u) p(U=u | E=weights)`.
    fn mix(&self, given: Exposure, weights: Exposure) -> Probability {
        let v = [true, false]
            .iter()
            .map(|&u| self.cond_table.get(given, u).value() * self.p_u_given_e(u, weights))
            .sum();
        Probability::saturating(v)
    }

    /// Observed `p(D, E)` after marginalizing out `U`.
    pub fn implied_margins(&self) -> Result<ObservedMargins> {
        ObservedMargins::new(
            self.p_e1.value(),
            self.mix(Exposure::Unexposed, Exposure::Unexposed).value(),
            self.mix(Exposure::Exposed, Exposure::Exposed).value(),
        )
    }

    pub fn extrema(&self) -> (Probability, Probability) {
        self.cond_table.extrema()
    }

    /// `p(D_e = 1 | E = 1 - e) = sum_u p(D=1 | E=e, U=u) p(U=u | E=1-e)`.
    pub fn counterfactual_in_other_arm(&self, e: Exposure) -> Probability {
        self.mix(e, e.other())
    }

    /// `p(D_e = 1) = p(D=1 | E=e) p(E=e) + p(D_e=1 | E=1-e) p(E=1-e)`.
    pub fn exact_counterfactual(&self, e: Exposure) -> Probability {
        let p_e = match e {
            Exposure::Exposed => self.p_e1.value(),
            Exposure::Unexposed => 1.0 - self.p_e1.value(),
        };
        let observed = self.mix(e, e).value() * p_e;
        let unobserved = self.counterfactual_in_other_arm(e).value() * (1.0 - p_e);
        Probability::saturating(observed + unobserved)
    }
}

/// The near-attaining model built from margins, parameters and `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessModel {
    pub p_e1: Probability,
    pub epsilon: f64,
    pub cond_table: CondTable,
    /// `p(U=1 | E=1) = p(U=0 | E=0) = 1 - eps`.
    pub u_given_e: Probability,
    pub target: WitnessTarget,
}

impl WitnessModel {
    pub fn as_joint(&self) -> BinaryConfounderModel {
        BinaryConfounderModel {
            p_e1: self.p_e1,
            p_u1_given_e1: self.u_given_e,
            p_u1_given_e0: self.u_given_e.complement(),
            cond_table: self.cond_table,
        }
    }
}

pub fn build_witness(
    obs: &ObservedMargins,
    params: &SensitivityParams,
    target: WitnessTarget,
    epsilon: f64,
) -> Result<WitnessModel> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let params = validate_params(obs, params.m().value(), params.big_m().value())?;
    let (m, big_m) = (params.m(), params.big_m());
    let (cross_e1, cross_e0) = match target {
        WitnessTarget::LowerP1AndUpperP0 => (m, big_m),
        WitnessTarget::UpperP1AndLowerP0 => (big_m, m),
    };
    Ok(WitnessModel {
        p_e1: obs.p_e1(),
        epsilon,
        cond_table: CondTable {
            e1_u1: obs.p_d1_e1(),
            e1_u0: cross_e1,
            e0_u1: cross_e0,
            e0_u0: obs.p_d1_e0(),
        },
        u_given_e: Probability::saturating(1.0 - epsilon),
        target,
    })
}

pub fn implied_margins(w: &WitnessModel) -> ObservedMargins {
    w.as_joint()
        .implied_margins()
        .expect("witness inherits p(E=1) from valid margins")
}

/// `(m, M)` realized by the witness.
pub fn implied_extrema(w: &WitnessModel) -> (Probability, Probability) {
    w.cond_table.extrema()
}

pub fn exact_counterfactual(w: &WitnessModel, e: Exposure) -> Probability {
    w.as_joint().exact_counterfactual(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessGap {
    /// Distance between the targeted bound on `p(D_1=1)` and the witness's value.
    pub gap_p1: f64,
    /// Same for `p(D_0=1)`.
    pub gap_p0: f64,
    /// Largest change in `p(D=1 | E=e)` between the witness and the input margins.
    pub margin_drift: f64,
}

/// Builds the witness and measures how close it comes to the targeted
/// bounds. The bounds are recomputed from the witness's own margins so the
/// gaps exclude the margin drift, which is reported separately.
pub fn sharpness_gap(
    obs: &ObservedMargins,
    params: &SensitivityParams,
    target: WitnessTarget,
    epsilon: f64,
) -> Result<SharpnessGap> {
    let w = build_witness(obs, params, target, epsilon)?;
    let implied = implied_margins(&w);
    let (m, big_m) = implied_extrema(&w);
    let witness_params = validate_params(&implied, m.value(), big_m.value())?;

    let p1 = counterfactual_interval(&implied, &witness_params, Exposure::Exposed);
    let p0 = counterfactual_interval(&implied, &witness_params, Exposure::Unexposed);
    let (bound_p1, bound_p0) = match target {
        WitnessTarget::LowerP1AndUpperP0 => (p1.lower, p0.upper),
        WitnessTarget::UpperP1AndLowerP0 => (p1.upper, p0.lower),
    };

    let margin_drift = Exposure::BOTH
        .iter()
        .map(|&e| (implied.risk(e).value() - obs.risk(e).value()).abs())
        .fold(0.0, f64::max);

    Ok(SharpnessGap {
        gap_p1: (bound_p1.value() - exact_counterfactual(&w, Exposure::Exposed).value()).abs(),
        gap_p0: (bound_p0.value() - exact_counterfactual(&w, Exposure::Unexposed).value()).abs(),
        margin_drift,
    })
}
