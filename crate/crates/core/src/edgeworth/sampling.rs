//! Monte Carlo cross-check of the Wick moments.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{cubic_coefficient, quartic_coefficient};
use crate::error::{Error, Result};
use crate::gaussian::QuadraticModel;
use crate::typical::TypicalMatrix;

pub const MIN_SAMPLES: usize = 1000;
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct McExpectations {
    pub samples: usize,
    /// Sample mean of `f^2`.
    pub mu_hat: f64,
    pub mu_se: f64,
    /// Sample mean of `h`.
    pub nu_hat: f64,
    pub nu_se: f64,
    /// Sample variance of `h`.
    pub var_h_hat: f64,
    pub var_h_se: f64,
    /// Sample mean of `exp(i f)`.
    pub char_fn_hat: Complex64,
    pub char_fn_se: f64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    count: f64,
    f2: f64,
    f4: f64,
    h: [f64; 4],
    cos: f64,
    sin: f64,
    cos2: f64,
    sin2: f64,
}

impl Sums {
    fn add(&mut self, f: f64, h: f64) {
        self.count += 1.0;
        let f2 = f * f;
        self.f2 += f2;
        self.f4 += f2 * f2;
        let mut p = 1.0;
        for slot in self.h.iter_mut() {
            p *= h;
            *slot += p;
        }
        let (s, c) = f.sin_cos();
        self.cos += c;
        self.sin += s;
        self.cos2 += c * c;
        self.sin2 += s * s;
    }

    fn merge(mut self, o: &Sums) -> Sums {
        self.count += o.count;
        self.f2 += o.f2;
        self.f4 += o.f4;
        for (a, b) in self.h.iter_mut().zip(o.h.iter()) {
            *a += b;
        }
        self.cos += o.cos;
        self.sin += o.sin;
        self.cos2 += o.cos2;
        self.sin2 += o.sin2;
        self
    }
}

/// Draws Gaussian vectors with covariance `Q^{-1}` and averages `f^2`, `h`
/// and `exp(i f)`.
///
/// Samples are generated in fixed-size blocks, block `b` from a ChaCha stream
/// `b` keyed by `seed`, and block sums are combined in block order, so the
/// result depends only on `samples` and `seed`.
pub fn mc_expectations(
    model: &QuadraticModel,
    z: &TypicalMatrix,
    samples: usize,
    seed: u64,
) -> Result<McExpectations> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    let (m, n) = (model.m(), model.n());
    let dim = m + n - 1;
    let pinned = model.pinned_index();
    let l = model.sigma_factor();
    let cubic: Vec<f64> = z.zeta().transpose().iter().map(|&v| cubic_coefficient(v)).collect();
    let quartic: Vec<f64> = z.zeta().transpose().iter().map(|&v| quartic_coefficient(v)).collect();

    let blocks = samples.div_ceil(BLOCK);
    let block_sums: Vec<Sums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let len = BLOCK.min(samples - b * BLOCK);
            let mut normals = vec![0.0; dim];
            let mut x = vec![0.0; m + n];
            let mut sums = Sums::default();
            for _ in 0..len {
                for v in normals.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let mut r = 0;
                for (i, xi) in x.iter_mut().enumerate() {
                    if i == pinned {
                        *xi = 0.0;
                        continue;
                    }
                    // lower-triangular product L * normals
                    *xi = (0..=r).map(|c| l[(r, c)] * normals[c]).sum();
                    r += 1;
                }
                let mut f = 0.0;
                let mut h = 0.0;
                for j in 0..m {
                    for k in 0..n {
                        let w = x[j] + x[m + k];
                        let w2 = w * w;
                        let p = j * n + k;
                        f += cubic[p] * w2 * w;
                        h += quartic[p] * w2 * w2;
                    }
                }
                sums.add(f, h);
            }
            sums
        })
        .collect();
    let s = block_sums.iter().fold(Sums::default(), |acc, b| acc.merge(b));

    let count = s.count;
    let mean = |v: f64| v / count;
    let mu_hat = mean(s.f2);
    let mu_se = ((mean(s.f4) - mu_hat * mu_hat).max(0.0) / count).sqrt();
    let [h1, h2, h3, h4] = s.h.map(mean);
    let var_h = (h2 - h1 * h1).max(0.0);
    let central4 = h4 - 4.0 * h3 * h1 + 6.0 * h2 * h1 * h1 - 3.0 * h1.powi(4);
    let var_h_hat = var_h * count / (count - 1.0);
    let var_h_se = ((central4 - var_h * var_h).max(0.0) / count).sqrt();
    let (c1, s1) = (mean(s.cos), mean(s.sin));
    let char_var = (mean(s.cos2) - c1 * c1).max(0.0) + (mean(s.sin2) - s1 * s1).max(0.0);

    Ok(McExpectations {
        samples,
        mu_hat,
        mu_se,
        nu_hat: h1,
        nu_se: (var_h / count).sqrt(),
        var_h_hat,
        var_h_se,
        char_fn_hat: Complex64::new(c1, s1),
        char_fn_se: (char_var / count).sqrt(),
    })
}
