//! Ground-truth engines: exact counting by dynamic programming or brute
//! force, the characteristic-function integral, and geometric Monte Carlo.

mod brute;
mod count;
mod dp;
mod geometric;
mod quadrature;

pub use brute::{brute_enumerate, BRUTE_BUDGET};
pub use geometric::{geometric_mc_count, GeometricEstimate};
pub use quadrature::{
    default_grid, integral_count, min_grid, work_estimate, QuadratureResult, MAX_DIMENSION,
};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::margins::Margins;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dp,
    Brute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExactCount {
    #[serde(serialize_with = "decimal")]
    pub value: BigUint,
    pub states_explored: u64,
    pub method: Method,
}

fn decimal<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_str_radix(10))
}

impl ExactCount {
    /// Natural log of the count, exact to double precision for any size.
    pub fn ln(&self) -> f64 {
        let bits = self.value.bits();
        if bits <= 1000 {
            return num_traits::ToPrimitive::to_f64(&self.value).unwrap_or(f64::INFINITY).ln();
        }
        let shift = bits - 64;
        let top: BigUint = &self.value >> shift;
        num_traits::ToPrimitive::to_f64(&top).unwrap().ln() + shift as f64 * std::f64::consts::LN_2
    }

    pub fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self.value).unwrap_or(f64::INFINITY)
    }
}

/// Which side of the margins becomes the DP state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rows as given when `m <= n`, otherwise transposed.
    #[default]
    Auto,
    AsGiven,
    Transposed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnOrder {
    #[default]
    Ascending,
    AsGiven,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Largest admissible estimate of live states.
    pub state_budget: u64,
    /// Memory the state vectors may occupy, in bytes; lowers the effective
    /// state budget when smaller.
    pub memory_limit: u64,
    pub orientation: Orientation,
    pub column_order: ColumnOrder,
    /// Count the two leading and two trailing columns in closed form.
    pub fold_end_columns: bool,
}

pub const DEFAULT_STATE_BUDGET: u64 = 200_000_000;
pub const DEFAULT_MEMORY_LIMIT: u64 = 4 << 30;

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            state_budget: DEFAULT_STATE_BUDGET,
            memory_limit: DEFAULT_MEMORY_LIMIT,
            orientation: Orientation::Auto,
            column_order: ColumnOrder::Ascending,
            fold_end_columns: true,
        }
    }
}

/// Number of tables with the given margins.
///
/// Runs with 128-bit counters and restarts with big integers on the first
/// overflow.
pub fn exact_count(margins: &Margins, cfg: &DpConfig) -> Result<ExactCount> {
    let transpose = match cfg.orientation {
        Orientation::Auto => margins.m() > margins.n(),
        Orientation::AsGiven => false,
        Orientation::Transposed => true,
    };
    let (rows, mut cols) = if transpose {
        (margins.cols().to_vec(), margins.rows().to_vec())
    } else {
        (margins.rows().to_vec(), margins.cols().to_vec())
    };
    if cfg.column_order == ColumnOrder::Ascending {
        cols.sort_unstable();
    }
    let plan = dp::Plan {
        rows,
        cols,
        fold_end_columns: cfg.fold_end_columns,
    };
    let budget = cfg.state_budget.min(cfg.memory_limit / dp::BYTES_PER_STATE);
    if dp::Packing::new(&plan.rows).is_none() {
        return Err(Error::BudgetExceeded {
            estimate: f64::INFINITY,
            budget,
        });
    }
    let estimate = plan.state_estimate();
    if estimate > budget as f64 {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let (value, states_explored) = match dp::run::<u128>(&plan) {
        Ok(out) => (BigUint::from(out.value), out.states_explored),
        Err(count::Overflow) => {
            let out = dp::run::<BigUint>(&plan).unwrap_or_else(|_| unreachable!());
            (out.value, out.states_explored)
        }
    };
    Ok(ExactCount {
        value,
        states_explored,
        method: Method::Dp,
    })
}
