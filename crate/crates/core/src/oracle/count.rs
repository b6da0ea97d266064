//! Exact non-negative integer arithmetic with a fixed-width fast path.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Raised by the fixed-width path; the caller restarts with [`BigUint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Overflow;

pub(crate) type Checked<T> = std::result::Result<T, Overflow>;

pub(crate) trait Count: Clone + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign_checked(&mut self, other: &Self) -> Checked<()>;
    fn mul_checked(&self, other: &Self) -> Checked<Self>;
    /// `self - other`; the caller guarantees `self >= other`.
    fn sub_exact(&self, other: &Self) -> Self;
    /// `self * mul / div`, where the division is known to be exact.
    fn mul_div_exact(&self, mul: u64, div: u64) -> Checked<Self>;
}

impl Count for u128 {
    fn zero() -> Self {
        0
    }

    fn one() -> Self {
        1
    }

    fn is_zero(&self) -> bool {
        *self == 0
    }

    #[inline]
    fn add_assign_checked(&mut self, other: &Self) -> Checked<()> {
        *self = self.checked_add(*other).ok_or(Overflow)?;
        Ok(())
    }

    #[inline]
    fn mul_checked(&self, other: &Self) -> Checked<Self> {
        self.checked_mul(*other).ok_or(Overflow)
    }

    fn sub_exact(&self, other: &Self) -> Self {
        self - other
    }

    fn mul_div_exact(&self, mul: u64, div: u64) -> Checked<Self> {
        Ok(self.checked_mul(mul as u128).ok_or(Overflow)? / div as u128)
    }
}

impl Count for BigUint {
    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn add_assign_checked(&mut self, other: &Self) -> Checked<()> {
        *self += other;
        Ok(())
    }

    fn mul_checked(&self, other: &Self) -> Checked<Self> {
        Ok(self * other)
    }

    fn sub_exact(&self, other: &Self) -> Self {
        self - other
    }

    fn mul_div_exact(&self, mul: u64, div: u64) -> Checked<Self> {
        Ok(self * mul / div)
    }
}

/// Counts vectors `d` with `0 <= d_i <= caps_i` and `sum d = total`.
///
/// Inclusion-exclusion over the violated upper bounds for short vectors, a
/// sliding-window convolution otherwise.
pub(crate) struct CompositionCounter<C: Count> {
    parts: usize,
    total: u64,
    // binom[v] = C(v + parts - 1, parts - 1)
    binom: Vec<C>,
}

const INCLUSION_EXCLUSION_MAX_PARTS: usize = 12;

impl<C: Count> CompositionCounter<C> {
    pub(crate) fn new(parts: usize, total: u64) -> Checked<Self> {
        let mut binom = Vec::new();
        if parts <= INCLUSION_EXCLUSION_MAX_PARTS {
            let k = (parts - 1) as u64;
            let mut b = C::one();
            binom.push(b.clone());
            for v in 0..total {
                // C(v+1+k, k) = C(v+k, k) (v+1+k) / (v+1)
                b = b.mul_div_exact(v + 1 + k, v + 1)?;
                binom.push(b.clone());
            }
        }
        Ok(CompositionCounter {
            parts,
            total,
            binom,
        })
    }

    pub(crate) fn count(&self, caps: &[u64]) -> Checked<C> {
        debug_assert_eq!(caps.len(), self.parts);
        if caps.iter().sum::<u64>() < self.total {
            return Ok(C::zero());
        }
        if self.binom.is_empty() {
            return self.count_by_convolution(caps);
        }
        let mut plus = C::zero();
        let mut minus = C::zero();
        self.exclude(caps, 0, self.total, false, &mut plus, &mut minus)?;
        Ok(plus.sub_exact(&minus))
    }

    fn exclude(
        &self,
        caps: &[u64],
        start: usize,
        remaining: u64,
        odd: bool,
        plus: &mut C,
        minus: &mut C,
    ) -> Checked<()> {
        let term = &self.binom[remaining as usize];
        if odd {
            minus.add_assign_checked(term)?;
        } else {
            plus.add_assign_checked(term)?;
        }
        for i in start..caps.len() {
            let over = caps[i] + 1;
            if over <= remaining {
                self.exclude(caps, i + 1, remaining - over, !odd, plus, minus)?;
            }
        }
        Ok(())
    }

    fn count_by_convolution(&self, caps: &[u64]) -> Checked<C> {
        let t = self.total as usize;
        let mut ways = vec![C::zero(); t + 1];
        ways[0] = C::one();
        let mut prefix = vec![C::zero(); t + 2];
        for &cap in caps {
            for s in 0..=t {
                let mut acc = prefix[s].clone();
                acc.add_assign_checked(&ways[s])?;
                prefix[s + 1] = acc;
            }
            let cap = cap as usize;
            for s in 0..=t {
                let low = s.saturating_sub(cap);
                ways[s] = prefix[s + 1].sub_exact(&prefix[low]);
            }
        }
        Ok(ways[t].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(caps: &[u64], total: u64) -> u128 {
        fn go(caps: &[u64], left: u64) -> u128 {
            match caps.split_first() {
                None => (left == 0) as u128,
                Some((&c, rest)) => (0..=c.min(left)).map(|d| go(rest, left - d)).sum(),
            }
        }
        go(caps, total)
    }

    #[test]
    fn matches_brute_force() {
        let cases: &[(&[u64], u64)] = &[
            (&[3], 2),
            (&[3], 4),
            (&[2, 2], 2),
            (&[1, 5, 2], 4),
            (&[4, 4, 4, 4], 9),
            (&[0, 7, 3], 5),
            (&[10, 1, 1, 1, 6], 12),
        ];
        for &(caps, total) in cases {
            let ie = CompositionCounter::<u128>::new(caps.len(), total).unwrap();
            assert_eq!(ie.count(caps).unwrap(), brute(caps, total), "{caps:?} {total}");
            let conv = CompositionCounter::<u128> {
                parts: caps.len(),
                total,
                binom: Vec::new(),
            };
            assert_eq!(conv.count(caps).unwrap(), brute(caps, total));
        }
    }

    #[test]
    fn many_parts_use_convolution() {
        let caps = vec![2u64; 14];
        let c = CompositionCounter::<BigUint>::new(14, 9).unwrap();
        assert_eq!(c.count(&caps).unwrap(), BigUint::from(brute(&caps, 9)));
    }

    #[test]
    fn overflow_is_reported() {
        // C(v + 11, 11) leaves 128 bits near v = 1.5e4
        assert!(CompositionCounter::<u128>::new(12, 1_000_000_000).is_err());
        let mut x = u128::MAX;
        assert_eq!(x.add_assign_checked(&1), Err(Overflow));
    }
}
