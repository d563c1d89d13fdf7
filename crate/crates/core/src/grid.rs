//! Contrast bounds tabulated over an evenly spaced `(m, M)` grid spanning
//! the feasible region.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{feasible_region, validate_params, ObservedMargins};
use crate::contrasts::{contrast_interval, ContrastSpec};
use crate::error::{Error, Result};
use crate::ext_real;

/// Decimal places used when rendering tables for reading.
pub const DISPLAY_DECIMALS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum GridCell {
    Bounds {
        #[serde(with = "ext_real")]
        lower: f64,
        #[serde(with = "ext_real")]
        upper: f64,
    },
    /// The contrast hit an indeterminate form at this cell.
    Indeterminate,
}

impl GridCell {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            GridCell::Bounds { lower, upper } => Some((lower, upper)),
            GridCell::Indeterminate => None,
        }
    }

    fn render(&self, fmt_value: impl Fn(f64) -> String) -> String {
        match *self {
            GridCell::Bounds { lower, upper } => format!("({},{})", fmt_value(lower), fmt_value(upper)),
            GridCell::Indeterminate => "indeterminate".to_string(),
        }
    }
}

/// Rows run over `m` from `m*` down to 0, columns over `M` from `M*` up to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridTable {
    pub contrast: ContrastSpec,
    pub m_values: Vec<f64>,
    #[serde(rename = "M_values")]
    pub big_m_values: Vec<f64>,
    /// `cells[i][j]` belongs to `(m_values[i], big_m_values[j])`.
    pub cells: Vec<Vec<GridCell>>,
}

/// `steps` evenly spaced points from `start` to `end`, endpoints exact.
fn linspace(start: f64, end: f64, steps: usize) -> Vec<f64> {
    let last = steps - 1;
    (0..steps)
        .map(|i| match i {
            0 => start,
            i if i == last => end,
            i => start + (end - start) * (i as f64 / last as f64),
        })
        .collect()
}

pub fn grid(obs: &ObservedMargins, steps: usize, spec: &ContrastSpec) -> Result<GridTable> {
    if steps < 2 {
        return Err(Error::TooFewSteps(steps));
    }
    let region = feasible_region(obs);
    let m_values = linspace(region.m_star.value(), 0.0, steps);
    let big_m_values = linspace(region.big_m_star.value(), 1.0, steps);

    let cells = m_values
        .par_iter()
        .map(|&m| {
            big_m_values
                .iter()
                .map(|&big_m| {
                    let params = validate_params(obs, m, big_m)?;
                    match contrast_interval(obs, &params, spec) {
                        Ok(ci) => Ok(GridCell::Bounds {
                            lower: ci.lower,
                            upper: ci.upper,
                        }),
                        Err(Error::Indeterminate { .. }) => Ok(GridCell::Indeterminate),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GridTable {
        contrast: spec.clone(),
        m_values,
        big_m_values,
        cells,
    })
}

fn axis_label(x: f64) -> String {
    // shortest form of the rounded value: 0.1, 0.62, 1
    format!("{}", ext_real::round_half_away(x, DISPLAY_DECIMALS))
}

impl GridTable {
    pub fn cell(&self, row: usize, col: usize) -> &GridCell {
        &self.cells[row][col]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header row holds the `M` values, the first column the `m` values, and
    /// each cell a quoted `"lower,upper"` pair at full precision.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec![r"m\M".to_string()];
        header.extend(self.big_m_values.iter().map(|v| v.to_string()));
        wtr.write_record(&header)?;
        for (m, row) in self.m_values.iter().zip(&self.cells) {
            let mut record = vec![m.to_string()];
            record.extend(row.iter().map(|c| match c.bounds() {
                Some((lo, hi)) => format!("{},{}", ext_real::display_full(lo), ext_real::display_full(hi)),
                None => "indeterminate".to_string(),
            }));
            wtr.write_record(&record)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Lays the table out as `m` rows by `M` columns with two-decimal cells.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Bounds of the {} as a function of M and m\n\n",
            self.contrast.name().replace('_', " ")
        ));
        out.push_str(r"| m \ M |");
        for v in &self.big_m_values {
            out.push_str(&format!(" {} |", axis_label(*v)));
        }
        out.push('\n');
        out.push_str("|---|");
        out.push_str(&"---|".repeat(self.big_m_values.len()));
        out.push('\n');
        for (m, row) in self.m_values.iter().zip(&self.cells) {
            out.push_str(&format!("| {} |", axis_label(*m)));
            for cell in row {
                out.push_str(&format!(
                    " {} |",
                    cell.render(|x| ext_real::display(x, DISPLAY_DECIMALS))
                ));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_margins() -> ObservedMargins {
        ObservedMargins::new(0.27, 0.38, 0.49).unwrap()
    }

    #[test]
    fn axes_are_linear_with_exact_endpoints() {
        let t = grid(&example_margins(), 5, &ContrastSpec::RiskRatio).unwrap();
        let expected_m_axis = [0.49, 0.6175, 0.745, 0.8725, 1.0];
        for (got, want) in t.big_m_values.iter().zip(expected_m_axis) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(t.big_m_values[0], 0.49);
        assert_eq!(t.big_m_values[4], 1.0);
        assert_eq!(t.m_values[0], 0.38);
        assert_eq!(t.m_values[4], 0.0);
        let labels: Vec<String> = t.big_m_values.iter().map(|v| axis_label(*v)).collect();
        assert_eq!(labels, ["0.49", "0.62", "0.75", "0.87", "1"]);
        let labels: Vec<String> = t.m_values.iter().map(|v| axis_label(*v)).collect();
        assert_eq!(labels, ["0.38", "0.29", "0.19", "0.1", "0"]);
    }

    #[test]
    fn cell_uses_unrounded_axis() {
        // (m=0.38, M=0.6175) gives 1.534; the rounded label 0.62 would give 1.539
        let t = grid(&example_margins(), 5, &ContrastSpec::RiskRatio).unwrap();
        let (_, hi) = t.cell(0, 1).bounds().unwrap();
        assert!((hi - 1.534).abs() < 5e-4, "{hi}");
        assert_eq!(ext_real::display(hi, 2), "1.53");
    }

    #[test]
    fn two_steps_is_the_corner_table() {
        let obs = example_margins();
        let t = grid(&obs, 2, &ContrastSpec::RiskDifference).unwrap();
        assert_eq!(t.m_values, vec![0.38, 0.0]);
        assert_eq!(t.big_m_values, vec![0.49, 1.0]);
        let corner = |m, big_m| {
            let p = validate_params(&obs, m, big_m).unwrap();
            let ci = contrast_interval(&obs, &p, &ContrastSpec::RiskDifference).unwrap();
            GridCell::Bounds {
                lower: ci.lower,
                upper: ci.upper,
            }
        };
        assert_eq!(
            t.cells,
            vec![
                vec![corner(0.38, 0.49), corner(0.38, 1.0)],
                vec![corner(0.0, 0.49), corner(0.0, 1.0)]
            ]
        );
    }

    #[test]
    fn too_few_steps() {
        assert_eq!(
            grid(&example_margins(), 1, &ContrastSpec::RiskRatio),
            Err(Error::TooFewSteps(1))
        );
    }

    #[test]
    fn indeterminate_cells_are_marked() {
        // no cases in either arm: at M = 0 every bound is 0 and RR is 0/0,
        // at M = 1 the upper endpoint is UB_1 / 0 = +inf
        let obs = ObservedMargins::new(0.5, 0.0, 0.0).unwrap();
        let t = grid(&obs, 3, &ContrastSpec::RiskRatio).unwrap();
        assert_eq!(t.cells[0][0], GridCell::Indeterminate);
        assert_eq!(t.cells[0][2].bounds().unwrap().1, f64::INFINITY);
    }

    #[test]
    fn renderings() {
        let t = grid(&example_margins(), 5, &ContrastSpec::RiskDifference).unwrap();
        let md = t.to_markdown();
        assert!(md.contains(r"| m \ M | 0.49 | 0.62 | 0.75 | 0.87 | 1 |"));
        assert!(md.contains("| 0 | (-0.28,0.21) |"));
        assert!(md.trim_end().ends_with("(-0.42,0.58) |"));

        let csv = t.to_csv().unwrap();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        assert_eq!(rdr.headers().unwrap().len(), 6);
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(&rows[0][0], "0.38");
        let pair: Vec<f64> = rows[4][5].split(',').map(|s| s.parse().unwrap()).collect();
        assert!((pair[0] + 0.4151).abs() < 1e-9 && (pair[1] - 0.5849).abs() < 1e-9);

        let json: serde_json::Value = serde_json::from_str(&t.to_json().unwrap()).unwrap();
        assert_eq!(json["contrast"], "risk_difference");
        assert_eq!(json["M_values"].as_array().unwrap().len(), 5);
        assert_eq!(
            json["cells"][4][4]["upper"].as_f64().unwrap(),
            t.cells[4][4].bounds().unwrap().1
        );
    }
}
