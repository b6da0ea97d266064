//! Row and column sums of a contingency table.
//!
//! [`Margins`] is the validated input to every other module: positive row sums
//! `R`, positive column sums `C`, and their common total `N`. Margins are read
//! from JSON (`{"rows": [...], "cols": [...]}`) or a two-line CSV and written
//! back as the same JSON shape.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typical::TypicalMatrix;

/// (1 + sqrt 5) / 2. Row and column ratios strictly below this are known to
/// give typical matrices with entries of a common order.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMargins", into = "RawMargins")]
pub struct Margins {
    rows: Vec<u64>,
    cols: Vec<u64>,
    total: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMargins {
    rows: Vec<i64>,
    cols: Vec<i64>,
}

impl TryFrom<RawMargins> for Margins {
    type Error = Error;

    fn try_from(raw: RawMargins) -> Result<Self> {
        validate_margins(&raw.rows, &raw.cols)
    }
}

impl From<Margins> for RawMargins {
    fn from(m: Margins) -> Self {
        RawMargins {
            rows: m.rows.iter().map(|&v| v as i64).collect(),
            cols: m.cols.iter().map(|&v| v as i64).collect(),
        }
    }
}

/// Checks positivity and equal totals; input order is preserved.
pub fn validate_margins(rows: &[i64], cols: &[i64]) -> Result<Margins> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptyMargins);
    }
    let check = |side: &'static str, v: &[i64]| -> Result<Vec<u64>> {
        v.iter()
            .enumerate()
            .map(|(index, &value)| {
                if value < 1 {
                    Err(Error::NonPositive { side, index, value })
                } else {
                    Ok(value as u64)
                }
            })
            .collect()
    };
    let rows = check("row", rows)?;
    let cols = check("column", cols)?;
    let row_total: u64 = rows.iter().sum();
    let col_total: u64 = cols.iter().sum();
    if row_total != col_total {
        return Err(Error::SumMismatch {
            rows: row_total,
            cols: col_total,
        });
    }
    Ok(Margins {
        rows,
        cols,
        total: row_total,
    })
}

impl Margins {
    /// Convenience constructor from unsigned vectors.
    pub fn new(rows: &[u64], cols: &[u64]) -> Result<Self> {
        let to_signed = |v: &[u64]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
        validate_margins(&to_signed(rows), &to_signed(cols))
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn cols(&self) -> &[u64] {
        &self.cols
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of rows `m`.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of columns `n`.
    pub fn n(&self) -> usize {
        self.cols.len()
    }

    /// Swaps the roles of rows and columns.
    pub fn transpose(&self) -> Margins {
        Margins {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("margins always serialize")
    }

    /// Parses either the JSON object form or a two-line CSV
    /// (first line row sums, second line column sums).
    pub fn parse(text: &str) -> Result<Margins> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let raw: RawMargins =
                serde_json::from_str(trimmed).map_err(|e| Error::Parse(e.to_string()))?;
            return validate_margins(&raw.rows, &raw.cols);
        }
        let mut lines = trimmed.lines().map(str::trim).filter(|l| !l.is_empty());
        let parse_line = |line: Option<&str>, what: &str| -> Result<Vec<i64>> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing {what} line")))?;
            line.split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<i64>()
                        .map_err(|e| Error::Parse(format!("bad {what} entry {tok:?}: {e}")))
                })
                .collect()
        };
        let rows = parse_line(lines.next(), "row")?;
        let cols = parse_line(lines.next(), "column")?;
        if lines.next().is_some() {
            return Err(Error::Parse("CSV margins must have exactly two lines".into()));
        }
        validate_margins(&rows, &cols)
    }

    /// Reads margins from a file path, or from stdin when the path is `-`.
    pub fn from_path(path: &Path) -> Result<Margins> {
        let text = if path.as_os_str() == "-" {
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        } else {
            std::fs::read_to_string(path)?
        };
        Margins::parse(&text)
    }
}

/// Apportions `alpha * v` to integers summing to `target`: floors first, then
/// one unit at a time to the largest fractional parts (lowest index on ties).
fn apportion(values: &[u64], alpha: f64, target: u64) -> Vec<u64> {
    let scaled: Vec<f64> = values.iter().map(|&v| v as f64 * alpha).collect();
    let mut out: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let floor_sum: u64 = out.iter().sum();
    if floor_sum < target {
        let mut order: Vec<usize> = (0..values.len()).collect();
        // stable sort keeps lowest index first among equal fractions
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal)
        });
        let deficit = (target - floor_sum) as usize;
        for &i in order.iter().cycle().take(deficit) {
            out[i] += 1;
        }
    } else if floor_sum > target {
        // round(alpha N) can sit one below the floor sum only through
        // floating-point noise; take units back from the largest entries
        for _ in 0..(floor_sum - target) {
            let i = argmax_lowest(&out);
            out[i] -= 1;
        }
    }
    // lift zeros to one, paying from the largest entry
    for i in 0..out.len() {
        if out[i] == 0 {
            let big = argmax_lowest(&out);
            out[big] -= 1;
            out[i] = 1;
        }
    }
    out
}

fn argmax_lowest(v: &[u64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Scales both margin vectors by `alpha` and rounds them back to positive
/// integers with a common total `round(alpha * N)`.
pub fn scale_and_round(margins: &Margins, alpha: f64) -> Result<Margins> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let target = (alpha * margins.total as f64).round() as u64;
    if margins.m() as u64 > target || margins.n() as u64 > target {
        return Err(Error::Infeasible {
            total: target,
            rows: margins.m(),
            cols: margins.n(),
        });
    }
    let rows = apportion(&margins.rows, alpha, target);
    let cols = apportion(&margins.cols, alpha, target);
    Margins::new(&rows, &cols)
}

/// Diagnostics describing how close margins are to the smooth regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// Largest typical-matrix entry.
    pub tau: f64,
    /// Smallest over largest typical entry.
    pub zeta_ratio: f64,
    /// min(m/n, n/m).
    pub dim_ratio: f64,
    /// Average entry N / (mn).
    pub density: f64,
    pub row_ratio: f64,
    pub col_ratio: f64,
    /// Both margin ratios lie below the golden ratio.
    pub golden_ratio_guarantee: bool,
}

impl SmoothnessReport {
    /// Largest `delta <= 1` for which the margins satisfy all three smoothness
    /// conditions with this report's `tau`.
    pub fn delta(&self) -> f64 {
        self.zeta_ratio.min(self.dim_ratio).min(1.0)
    }
}

pub fn smoothness_report(margins: &Margins, z: &TypicalMatrix) -> SmoothnessReport {
    let zeta = z.zeta();
    let tau = zeta.max();
    let zmin = zeta.min();
    let (m, n) = (margins.m() as f64, margins.n() as f64);
    let ratio = |v: &[u64]| {
        let hi = *v.iter().max().unwrap() as f64;
        let lo = *v.iter().min().unwrap() as f64;
        hi / lo
    };
    let row_ratio = ratio(margins.rows());
    let col_ratio = ratio(margins.cols());
    SmoothnessReport {
        tau,
        zeta_ratio: zmin / tau,
        dim_ratio: (m / n).min(n / m),
        density: margins.total() as f64 / (m * n),
        row_ratio,
        col_ratio,
        golden_ratio_guarantee: row_ratio < GOLDEN_RATIO && col_ratio < GOLDEN_RATIO,
    }
}
