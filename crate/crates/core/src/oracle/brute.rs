//! Row-by-row enumeration of every table with the given margins.

use num_bigint::BigUint;

use super::{ExactCount, Method};
use crate::error::{Error, Result};
use crate::margins::Margins;

/// Largest admissible number of enumerated partial tables.
pub const BRUTE_BUDGET: u64 = 10_000_000;

/// Upper bound on the leaves visited: the number of unconstrained
/// compositions of every row but the last.
fn work_estimate(margins: &Margins) -> f64 {
    let rows = margins.rows();
    rows[..rows.len() - 1]
        .iter()
        .map(|&r| {
            // C(r + n - 1, n - 1)
            (1..margins.n()).fold(1.0, |acc, i| acc * (r as f64 + i as f64) / i as f64)
        })
        .product()
}

/// Counts tables by filling each row with every composition that fits under
/// the remaining column sums. The last row is forced.
pub fn brute_enumerate(margins: &Margins) -> Result<ExactCount> {
    let estimate = work_estimate(margins);
    if estimate > BRUTE_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            estimate,
            budget: BRUTE_BUDGET,
        });
    }
    let rows = margins.rows();
    let mut remaining = margins.cols().to_vec();
    let mut visited = 0u64;
    let hits = fill_row(rows, 0, &mut remaining, &mut visited);
    Ok(ExactCount {
        value: BigUint::from(hits),
        states_explored: visited,
        method: Method::Brute,
    })
}

fn fill_row(rows: &[u64], j: usize, remaining: &mut [u64], visited: &mut u64) -> u64 {
    *visited += 1;
    if j + 1 == rows.len() {
        // the last row takes whatever is left, which sums to rows[j]
        return 1;
    }
    fill_cell(rows, j, 0, rows[j], remaining, visited)
}

fn fill_cell(
    rows: &[u64],
    j: usize,
    k: usize,
    left: u64,
    remaining: &mut [u64],
    visited: &mut u64,
) -> u64 {
    if k + 1 == remaining.len() {
        if left > remaining[k] {
            return 0;
        }
        remaining[k] -= left;
        let hits = fill_row(rows, j + 1, remaining, visited);
        remaining[k] += left;
        return hits;
    }
    let mut hits = 0;
    for x in 0..=left.min(remaining[k]) {
        remaining[k] -= x;
        hits += fill_cell(rows, j, k + 1, left - x, remaining, visited);
        remaining[k] += x;
    }
    hits
}
