//! Monte Carlo count from the maximum-entropy geometric distribution.
//!
//! Under independent geometric entries with means `z_jk`, every table with
//! margins `(R, C)` has probability `exp(-g(Z))`, so the hit rate times
//! `exp(g(Z))` estimates the count. The hit rate decays exponentially in the
//! total, so the estimator is only useful for tiny margins; with no hits the
//! estimate is 0.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::typical::TypicalSolution;

const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct GeometricEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
}

pub fn geometric_mc_count(
    solution: &TypicalSolution,
    margins: &Margins,
    samples: u64,
    seed: u64,
) -> Result<GeometricEstimate> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let zeta = solution.z.zeta();
    let (m, n) = (margins.m(), margins.n());
    if zeta.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: (m, n),
            got: zeta.shape(),
        });
    }
    let laws = zeta
        .iter()
        .map(|&z| Geometric::new(1.0 / (1.0 + z)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidConfig(format!("geometric law: {e}")))?;
    // column-major, as stored by the matrix
    let law = |j: usize, k: usize| &laws[k * m + j];
    let (rows, cols) = (margins.rows(), margins.cols());

    let blocks = samples.div_ceil(BLOCK);
    let hits: u64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let len = BLOCK.min(samples - b * BLOCK);
            let mut col_sums = vec![0u64; n];
            let mut hits = 0;
            'sample: for _ in 0..len {
                col_sums.fill(0);
                for (j, &r) in rows.iter().enumerate() {
                    let mut row_sum = 0u64;
                    for (k, cs) in col_sums.iter_mut().enumerate() {
                        let x = law(j, k).sample(&mut rng);
                        row_sum = row_sum.saturating_add(x);
                        *cs = cs.saturating_add(x);
                    }
                    if row_sum != r {
                        continue 'sample;
                    }
                }
                if col_sums == cols {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let p = hits as f64 / samples as f64;
    let (estimate, std_error) = if hits == 0 {
        (0.0, 0.0)
    } else {
        let scale = solution.g_of_z.exp();
        (scale * p, scale * (p * (1.0 - p) / samples as f64).sqrt())
    };
    Ok(GeometricEstimate {
        estimate,
        std_error,
        hits,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::typical::{solve_typical, DEFAULT_MAX_ITER, DEFAULT_TOL};

    fn run(r: &[u64], c: &[u64], samples: u64, seed: u64) -> GeometricEstimate {
        let margins = Margins::new(r, c).unwrap();
        let sol = solve_typical(&margins, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        geometric_mc_count(&sol, &margins, samples, seed).unwrap()
    }

    #[test]
    fn tiny_counts_within_three_se() {
        for (r, c, want) in [(&[1u64, 1][..], &[1u64, 1][..], 2.0), (&[2, 2], &[2, 2], 3.0)] {
            let e = run(r, c, 1_000_000, 42);
            assert!((e.estimate - want).abs() <= 3.0 * e.std_error, "{r:?}: {e:?}");
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = run(&[2, 1], &[1, 2], 5000, 9);
        let b = run(&[2, 1], &[1, 2], 5000, 9);
        assert_eq!(a.hits, b.hits);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }

    #[test]
    fn no_hits_gives_zero() {
        let e = run(&[300, 300], &[300, 300], 2000, 1);
        assert_eq!(e.hits, 0);
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn zero_samples_rejected() {
        let margins = Margins::new(&[1], &[1]).unwrap();
        let sol = solve_typical(&margins, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(geometric_mc_count(&sol, &margins, 0, 0).is_err());
    }
}
