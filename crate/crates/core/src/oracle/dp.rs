//! Column-by-column dynamic program over the vector of remaining row sums.
//!
//! A column with sum `c` is distributed one row at a time. While a column is
//! in progress the unplaced part of `c` is implied by the state itself (the
//! total of the state drops by exactly what has been placed), so the state is
//! still just the mixed vector of updated and not-yet-updated row remainders.
//! Placing `d` units in row `j` maps `y_j -> y_j - d` with everything else
//! fixed, so the new count at `y'` is the suffix sum of old counts along axis
//! `j` from `y'` upward. States are kept sorted by (other coordinates, `y_j`),
//! which turns every pass into a single linear sweep.
//!
//! When `fold_end_columns` is set, the first two and the last two columns are
//! not stepped through: a 2-column block with row sums `x` and column sums
//! `(a, b)` has exactly as many fillings as there are vectors `d <= x` with
//! `sum d = a`, a bounded-composition count.

use super::count::{Checked, CompositionCounter, Count};

/// Mixed-radix encoding of a bounded integer vector into a `u128`.
pub(crate) struct Packing {
    radix: Vec<u128>,
    stride: Vec<u128>,
}

impl Packing {
    pub(crate) fn new(caps: &[u64]) -> Option<Packing> {
        let mut stride = Vec::with_capacity(caps.len());
        let mut acc: u128 = 1;
        for &c in caps {
            stride.push(acc);
            acc = acc.checked_mul(c as u128 + 1)?;
        }
        Some(Packing {
            radix: caps.iter().map(|&c| c as u128 + 1).collect(),
            stride,
        })
    }

    fn encode(&self, v: &[u64]) -> u128 {
        v.iter().zip(&self.stride).map(|(&x, &s)| x as u128 * s).sum()
    }

    fn decode(&self, mut key: u128, out: &mut [u64]) {
        for (o, &r) in out.iter_mut().zip(&self.radix) {
            *o = (key % r) as u64;
            key /= r;
        }
    }
}

pub(crate) struct Plan {
    /// Row sums, i.e. the state coordinates.
    pub rows: Vec<u64>,
    /// Column sums in processing order.
    pub cols: Vec<u64>,
    pub fold_end_columns: bool,
}

impl Plan {
    fn total(&self) -> u64 {
        self.rows.iter().sum()
    }

    /// Sum of the columns at positions `t..`.
    fn suffix(&self, t: usize) -> u64 {
        self.cols[t..].iter().sum()
    }

    /// Range of row `i`'s remainder once `t` columns are placed.
    fn interval(&self, i: usize, t: usize) -> (u64, u64) {
        let placed = self.total() - self.suffix(t);
        let r = self.rows[i];
        (r.saturating_sub(placed), r.min(self.suffix(t)))
    }

    /// Upper bound on the largest state set the run will hold.
    pub(crate) fn state_estimate(&self) -> f64 {
        let (m, n) = (self.rows.len(), self.cols.len());
        let mut peak: f64 = 1.0;
        let first_stepped = if self.fold_end_columns {
            if n < 3 {
                return 1.0;
            }
            let box2: Vec<_> = (0..m).map(|i| self.interval(i, 2)).collect();
            let t2 = self.suffix(2);
            peak = peak.max(box_count(&box2, t2, t2));
            2
        } else {
            0
        };
        let last_stepped = if self.fold_end_columns { n.saturating_sub(2) } else { n };
        for t in first_stepped..last_stepped {
            for j in 0..m {
                let bounds: Vec<_> = (0..m)
                    .map(|i| self.interval(i, if i <= j { t + 1 } else { t }))
                    .collect();
                peak = peak.max(box_count(&bounds, self.suffix(t + 1), self.suffix(t)));
            }
        }
        peak
    }
}

/// Number of integer vectors in the box with coordinate sum in `[lo, hi]`,
/// in floating point.
pub(crate) fn box_count(bounds: &[(u64, u64)], lo: u64, hi: u64) -> f64 {
    let top: u64 = bounds.iter().map(|b| b.1).sum();
    let hi = hi.min(top) as usize;
    if (lo as usize) > hi {
        return 0.0;
    }
    let mut ways = vec![0.0f64; hi + 1];
    ways[0] = 1.0;
    let mut prefix = vec![0.0f64; hi + 2];
    for &(a, b) in bounds {
        for s in 0..=hi {
            prefix[s + 1] = prefix[s] + ways[s];
        }
        let (a, b) = (a as usize, b as usize);
        for s in 0..=hi {
            ways[s] = if s < a {
                0.0
            } else {
                prefix[s - a + 1] - prefix[s.saturating_sub(b)]
            };
        }
    }
    ways[lo as usize..=hi].iter().sum()
}

/// Bytes held per live state at the peak of a row pass (input and output
/// vectors with 128-bit counters).
pub(crate) const BYTES_PER_STATE: u64 = 2 * std::mem::size_of::<(u128, u128)>() as u64;

pub(crate) struct Outcome<C> {
    pub value: C,
    pub states_explored: u64,
}

type States<C> = Vec<(u128, C)>;

/// Places one row's share of the current column.
///
/// `before` is the state total when the column started, `budget` the column
/// sum and `future` the total of the columns still to come.
fn row_pass<C: Count>(
    mut states: States<C>,
    pack: &Packing,
    row: usize,
    budget: u64,
    before: u64,
    future: u64,
) -> Checked<States<C>> {
    let stride = pack.stride[row];
    let radix = pack.radix[row];
    let span = stride * radix;
    // re-key so that row `row` becomes the least significant digit, stored
    // as radix - 1 - y; sorting then yields (other digits, y descending)
    for s in states.iter_mut() {
        let key = s.0;
        let y = (key / stride) % radix;
        s.0 = key / span * span + key % stride * radix + (radix - 1 - y);
    }
    states.sort_unstable_by_key(|s| s.0);

    let mut out = Vec::with_capacity(states.len());
    let mut digits = vec![0u64; pack.radix.len()];
    let mut i = 0;
    while i < states.len() {
        let group = states[i].0 / radix;
        let mut end = i + 1;
        while end < states.len() && states[end].0 / radix == group {
            end += 1;
        }
        let rotated = group * radix;
        let base_key = rotated / span * span + rotated % span / radix;
        pack.decode(base_key, &mut digits);
        let others: u64 = digits.iter().sum();
        let absorb: u64 = digits[row + 1..].iter().sum();
        let y_of = |rk: u128| (radix - 1 - rk % radix) as i128;
        // unplaced budget after this row is budget - before + others + y',
        // which must lie in [0, absorb]
        let base = before as i128 - budget as i128 - others as i128;
        let lo = base.max(0);
        let hi = y_of(states[i].0)
            .min(future as i128)
            .min(base + absorb as i128);
        if lo <= hi {
            let mut run = C::zero();
            let mut p = i;
            let mut y = hi;
            while y >= lo {
                while p < end && y_of(states[p].0) >= y {
                    run.add_assign_checked(&states[p].1)?;
                    p += 1;
                }
                if !run.is_zero() {
                    out.push((base_key + y as u128 * stride, run.clone()));
                }
                y -= 1;
            }
        }
        i = end;
    }
    Ok(out)
}

fn step_column<C: Count>(
    mut states: States<C>,
    pack: &Packing,
    budget: u64,
    before: u64,
    future: u64,
    explored: &mut u64,
) -> Checked<States<C>> {
    for row in 0..pack.radix.len() {
        states = row_pass(states, pack, row, budget, before, future)?;
        *explored += states.len() as u64;
    }
    Ok(states)
}

/// Visits every vector in the box with the given coordinate sum.
fn for_each_in_box(
    bounds: &[(u64, u64)],
    total: u64,
    visit: &mut dyn FnMut(&[u64]) -> Checked<()>,
) -> Checked<()> {
    let m = bounds.len();
    // suffix_lo[i] / suffix_hi[i]: extreme sums of coordinates i..
    let mut suffix_lo = vec![0u64; m + 1];
    let mut suffix_hi = vec![0u64; m + 1];
    for i in (0..m).rev() {
        suffix_lo[i] = suffix_lo[i + 1] + bounds[i].0;
        suffix_hi[i] = suffix_hi[i + 1] + bounds[i].1;
    }
    let mut v = vec![0u64; m];
    fn go(
        i: usize,
        left: u64,
        bounds: &[(u64, u64)],
        lo: &[u64],
        hi: &[u64],
        v: &mut [u64],
        visit: &mut dyn FnMut(&[u64]) -> Checked<()>,
    ) -> Checked<()> {
        if i == bounds.len() {
            return if left == 0 { visit(v) } else { Ok(()) };
        }
        let from = bounds[i].0.max(left.saturating_sub(hi[i + 1]));
        let to = bounds[i].1.min(left.saturating_sub(lo[i + 1]));
        if left < lo[i + 1] {
            return Ok(());
        }
        for x in from..=to {
            v[i] = x;
            go(i + 1, left - x, bounds, lo, hi, v, visit)?;
        }
        Ok(())
    }
    if total < suffix_lo[0] || total > suffix_hi[0] {
        return Ok(());
    }
    go(0, total, bounds, &suffix_lo, &suffix_hi, &mut v, visit)
}

pub(crate) fn run<C: Count>(plan: &Plan) -> Checked<Outcome<C>> {
    let (m, n) = (plan.rows.len(), plan.cols.len());
    let pack = Packing::new(&plan.rows).expect("packing checked by caller");
    let mut explored = 0u64;

    if !plan.fold_end_columns {
        let mut states = vec![(pack.encode(&plan.rows), C::one())];
        let mut before = plan.total();
        for (t, &c) in plan.cols.iter().enumerate() {
            states = step_column(states, &pack, c, before, plan.suffix(t + 1), &mut explored)?;
            before -= c;
        }
        let value = states
            .into_iter()
            .find(|(k, _)| *k == 0)
            .map(|(_, c)| c)
            .unwrap_or_else(C::zero);
        return Ok(Outcome {
            value,
            states_explored: explored,
        });
    }

    match n {
        1 => {
            return Ok(Outcome {
                value: C::one(),
                states_explored: 1,
            })
        }
        2 => {
            let counter = CompositionCounter::<C>::new(m, plan.cols[0])?;
            return Ok(Outcome {
                value: counter.count(&plan.rows)?,
                states_explored: 1,
            });
        }
        _ => {}
    }

    // remainders after the first two columns, weighted by the number of ways
    // to fill those two columns
    let front = CompositionCounter::<C>::new(m, plan.cols[0])?;
    let back = if n >= 4 {
        Some(CompositionCounter::<C>::new(m, plan.cols[n - 2])?)
    } else {
        None
    };
    let bounds: Vec<_> = (0..m).map(|i| plan.interval(i, 2)).collect();
    let t2 = plan.suffix(2);
    let mut placed = vec![0u64; m];

    if n <= 4 {
        // nothing to step through: combine both ends while enumerating
        let mut total = C::zero();
        for_each_in_box(&bounds, t2, &mut |x| {
            explored += 1;
            for i in 0..m {
                placed[i] = plan.rows[i] - x[i];
            }
            let mut w = front.count(&placed)?;
            if w.is_zero() {
                return Ok(());
            }
            if let Some(back) = &back {
                w = w.mul_checked(&back.count(x)?)?;
            }
            total.add_assign_checked(&w)
        })?;
        return Ok(Outcome {
            value: total,
            states_explored: explored,
        });
    }

    let mut states: States<C> = Vec::new();
    for_each_in_box(&bounds, t2, &mut |x| {
        for i in 0..m {
            placed[i] = plan.rows[i] - x[i];
        }
        let w = front.count(&placed)?;
        if !w.is_zero() {
            states.push((pack.encode(x), w));
        }
        Ok(())
    })?;
    explored += states.len() as u64;

    let mut before = t2;
    for t in 2..n - 2 {
        let c = plan.cols[t];
        states = step_column(states, &pack, c, before, plan.suffix(t + 1), &mut explored)?;
        before -= c;
    }

    let back = back.expect("n >= 5");
    let mut total = C::zero();
    let mut x = vec![0u64; m];
    for (key, w) in &states {
        pack.decode(*key, &mut x);
        let ways = back.count(&x)?;
        total.add_assign_checked(&w.mul_checked(&ways)?)?;
    }
    Ok(Outcome {
        value: total,
        states_explored: explored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(rows: &[u64], cols: &[u64], fold: bool) -> Plan {
        Plan {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            fold_end_columns: fold,
        }
    }

    #[test]
    fn packing_round_trip() {
        let p = Packing::new(&[3, 0, 7, 2]).unwrap();
        let v = [2, 0, 5, 1];
        let key = p.encode(&v);
        let mut out = [0; 4];
        p.decode(key, &mut out);
        assert_eq!(out, v);
        assert!(Packing::new(&[u64::MAX, u64::MAX, 3]).is_none());
    }

    #[test]
    fn box_count_small() {
        // x in [0,2]^2 with sum 2: (0,2),(1,1),(2,0)
        assert_eq!(box_count(&[(0, 2), (0, 2)], 2, 2), 3.0);
        // all nine points
        assert_eq!(box_count(&[(0, 2), (0, 2)], 0, 10), 9.0);
        assert_eq!(box_count(&[(1, 2), (3, 3)], 0, 3), 0.0);
        assert_eq!(box_count(&[(1, 2), (3, 3)], 4, 5), 2.0);
    }

    #[test]
    fn small_counts_both_paths() {
        let cases: &[(&[u64], &[u64], u128)] = &[
            (&[1, 1], &[1, 1], 2),
            (&[2, 2], &[2, 2], 3),
            (&[2, 1], &[1, 1, 1], 3),
            (&[3, 3, 3], &[3, 3, 3], 55),
            (&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 1], 120),
            (&[5], &[1, 2, 2], 1),
        ];
        for &(r, c, want) in cases {
            for fold in [false, true] {
                let got = run::<u128>(&plan(r, c, fold)).unwrap().value;
                assert_eq!(got, want, "{r:?} {c:?} fold={fold}");
            }
        }
    }

    #[test]
    fn overflow_surfaces() {
        let p = plan(&[2000, 2000], &[100; 40], true);
        assert!(run::<u128>(&p).is_err());
        let big = run::<num_bigint::BigUint>(&p).unwrap().value;
        assert!(big.bits() > 128);
    }
}
