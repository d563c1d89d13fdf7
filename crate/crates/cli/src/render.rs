use serde::Serialize;

use sharpbounds::ext_real::{self, display};
use sharpbounds::montecarlo::{BoundSummary, QUANTILE_LEVELS};
use sharpbounds::witness::SharpnessGap;
use sharpbounds::{
    build_witness, contrast_interval, counterfactual_interval, exact_counterfactual, feasible_region, implied_extrema,
    implied_margins, sharpness_gap, ContrastInterval, ContrastSpec, Exposure, FeasibleRegion, McConfig, McSummary,
    ObservedMargins, ProbabilityInterval, Result, SensitivityParams, WitnessModel, WitnessTarget,
};

use crate::OutputFormat;

const DP: usize = 2;

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn markdown_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

fn full(x: f64) -> String {
    ext_real::display_full(x)
}

#[derive(Serialize)]
pub struct BoundsReport {
    margins: ObservedMargins,
    feasible_region: FeasibleRegion,
    params: SensitivityParams,
    p1: ProbabilityInterval,
    p0: ProbabilityInterval,
    contrast: ContrastInterval,
}

impl BoundsReport {
    pub fn compute(obs: &ObservedMargins, params: &SensitivityParams, spec: &ContrastSpec) -> Result<Self> {
        Ok(BoundsReport {
            margins: *obs,
            feasible_region: feasible_region(obs),
            params: *params,
            p1: counterfactual_interval(obs, params, Exposure::Exposed),
            p0: counterfactual_interval(obs, params, Exposure::Unexposed),
            contrast: contrast_interval(obs, params, spec)?,
        })
    }

    fn rows(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        vec![
            vec![
                "p(D_1=1)".into(),
                fmt(self.p1.lower.value()),
                fmt(self.p1.upper.value()),
            ],
            vec![
                "p(D_0=1)".into(),
                fmt(self.p0.lower.value()),
                fmt(self.p0.upper.value()),
            ],
            vec![
                self.contrast.contrast.name().into(),
                fmt(self.contrast.lower),
                fmt(self.contrast.upper),
            ],
        ]
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        Ok(match format {
            OutputFormat::Json => serde_json::to_string_pretty(self)?,
            OutputFormat::Csv => csv_rows(&["quantity", "lower", "upper"], &self.rows(full)),
            OutputFormat::Markdown => markdown_rows(&["quantity", "lower", "upper"], &self.rows(|x| display(x, DP))),
        })
    }
}

#[derive(Serialize)]
struct Extrema {
    m: f64,
    #[serde(rename = "M")]
    big_m: f64,
}

#[derive(Serialize)]
struct Counterfactuals {
    p1: f64,
    p0: f64,
}

#[derive(Serialize)]
pub struct WitnessReport {
    witness: WitnessModel,
    implied_margins: ObservedMargins,
    implied_extrema: Extrema,
    exact_counterfactual: Counterfactuals,
    gaps: SharpnessGap,
}

impl WitnessReport {
    pub fn compute(
        obs: &ObservedMargins,
        params: &SensitivityParams,
        target: WitnessTarget,
        epsilon: f64,
    ) -> Result<Self> {
        let witness = build_witness(obs, params, target, epsilon)?;
        let (m, big_m) = implied_extrema(&witness);
        Ok(WitnessReport {
            implied_margins: implied_margins(&witness),
            implied_extrema: Extrema {
                m: m.value(),
                big_m: big_m.value(),
            },
            exact_counterfactual: Counterfactuals {
                p1: exact_counterfactual(&witness, Exposure::Exposed).value(),
                p0: exact_counterfactual(&witness, Exposure::Unexposed).value(),
            },
            gaps: sharpness_gap(obs, params, target, epsilon)?,
            witness,
        })
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let t = &self.witness.cond_table;
        let pairs: Vec<(&str, String)> = vec![
            ("target", self.witness.target.to_string()),
            ("p_e1", full(self.witness.p_e1.value())),
            ("epsilon", full(self.witness.epsilon)),
            ("u_given_e", full(self.witness.u_given_e.value())),
            ("cond_e1_u1", full(t.e1_u1.value())),
            ("cond_e1_u0", full(t.e1_u0.value())),
            ("cond_e0_u1", full(t.e0_u1.value())),
            ("cond_e0_u0", full(t.e0_u0.value())),
            ("implied_p_d1_e1", full(self.implied_margins.p_d1_e1().value())),
            ("implied_p_d1_e0", full(self.implied_margins.p_d1_e0().value())),
            ("exact_p1", full(self.exact_counterfactual.p1)),
            ("exact_p0", full(self.exact_counterfactual.p0)),
            ("gap_p1", full(self.gaps.gap_p1)),
            ("gap_p0", full(self.gaps.gap_p0)),
            ("margin_drift", full(self.gaps.margin_drift)),
        ];
        pairs.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect()
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        Ok(match format {
            OutputFormat::Json => serde_json::to_string_pretty(self)?,
            OutputFormat::Csv => csv_rows(&["key", "value"], &self.rows()),
            OutputFormat::Markdown => markdown_rows(&["key", "value"], &self.rows()),
        })
    }
}

#[derive(Serialize)]
struct Exceedance {
    #[serde(with = "ext_real")]
    x: f64,
    #[serde(with = "ext_real")]
    p: f64,
}

#[derive(Serialize)]
pub struct McReport<'a> {
    margins: &'a ObservedMargins,
    config: &'a McConfig,
    summary: &'a McSummary,
    p_lower_leq: Vec<Exceedance>,
    p_upper_leq: Vec<Exceedance>,
}

impl<'a> McReport<'a> {
    pub fn new(obs: &'a ObservedMargins, config: &'a McConfig, summary: &'a McSummary, thresholds: &[f64]) -> Self {
        let exceedance = |b: &BoundSummary| thresholds.iter().map(|&x| Exceedance { x, p: b.p_leq(x) }).collect();
        McReport {
            margins: obs,
            config,
            summary,
            p_lower_leq: exceedance(&summary.lower),
            p_upper_leq: exceedance(&summary.upper),
        }
    }

    fn rows(&self, fmt: impl Fn(f64) -> String) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for (name, bound, leq) in [
            ("lower", &self.summary.lower, &self.p_lower_leq),
            ("upper", &self.summary.upper, &self.p_upper_leq),
        ] {
            rows.push(vec![name.into(), "mean".into(), fmt(bound.mean)]);
            rows.push(vec![name.into(), "sd".into(), fmt(bound.sd)]);
            for (level, q) in QUANTILE_LEVELS.iter().zip(&bound.quantiles) {
                rows.push(vec![name.into(), format!("q{}", level * 100.0), fmt(q.value)]);
            }
            for e in leq.iter() {
                rows.push(vec![name.into(), format!("P(<= {})", e.x), fmt(e.p)]);
            }
        }
        rows.push(vec![
            "all".into(),
            "n_samples".into(),
            self.summary.n_samples.to_string(),
        ]);
        rows.push(vec![
            "all".into(),
            "n_indeterminate".into(),
            self.summary.n_indeterminate.to_string(),
        ]);
        rows
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        Ok(match format {
            OutputFormat::Json => serde_json::to_string_pretty(self)?,
            OutputFormat::Csv => csv_rows(&["bound", "statistic", "value"], &self.rows(full)),
            OutputFormat::Markdown => markdown_rows(&["bound", "statistic", "value"], &self.rows(|x| display(x, 4))),
        })
    }
}
