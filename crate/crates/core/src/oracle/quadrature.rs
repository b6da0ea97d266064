//! Periodic trapezoid rule for the integral representation of the count.
//!
//! With independent geometric entries of means `z_jk`, the probability of
//! hitting the margins exactly is `exp(-g(Z)) #(R,C)`, and it equals the
//! torus average of
//!
//! ```text
//! F(s, t) = exp(-i <R, s> - i <C, t>) prod 1 / (1 + z_jk - z_jk exp(i (s_j + t_k)))
//! ```
//!
//! with one coordinate held at zero. On a uniform grid the inner side
//! factorizes: for fixed outer coordinates, each free inner coordinate
//! contributes an independent one-dimensional sum.
//!
//! The rule with `G` points per axis returns the exact average of the
//! aliased integrand, i.e. it also counts tables whose margins agree with
//! `(R, C)` modulo `G`. Those aliases carry weights of order `rho^G` with
//! `rho = z / (1 + z)`, so the error decays geometrically in `G` at a rate
//! set by the largest entry of `Z`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::Margins;
use crate::typical::TypicalSolution;

/// Largest number of free torus coordinates accepted.
pub const MAX_DIMENSION: usize = 5;

/// Target for `rho_max^G`, as a natural log.
const ALIAS_EXPONENT: f64 = 36.0;

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureResult {
    /// Real part of the integral over the torus.
    pub real_part: f64,
    pub imag_part: f64,
    pub grid_points_per_axis: usize,
    /// `exp(g(Z)) real_part / (2 pi)^(m+n-1)`.
    pub estimate: f64,
}

/// Smallest admissible grid for the given margins.
pub fn min_grid(margins: &Margins) -> usize {
    2 * margins.total() as usize + 2
}

/// Grid size that pushes the aliasing error below `exp(-36)` times a
/// polynomial factor, and never below [`min_grid`].
pub fn default_grid(solution: &TypicalSolution, margins: &Margins) -> usize {
    let z_max = solution.z.zeta().iter().cloned().fold(0.0, f64::max);
    let decay = (1.0 + 1.0 / z_max).ln();
    let alias = (ALIAS_EXPONENT / decay).ceil();
    let alias = if alias.is_finite() { alias as usize } else { 0 };
    min_grid(margins).max(alias)
}

/// Number of complex multiply-adds [`integral_count`] performs.
pub fn work_estimate(margins: &Margins, grid: usize) -> f64 {
    let p = margins.m().min(margins.n()) as f64;
    let q = margins.m().max(margins.n()) as f64;
    let g = grid as f64;
    g.powf(p) * ((q - 1.0) * g * p + p)
}

pub fn integral_count(
    solution: &TypicalSolution,
    margins: &Margins,
    grid: usize,
) -> Result<QuadratureResult> {
    let (m, n) = (margins.m(), margins.n());
    let dim = m + n - 1;
    if dim > MAX_DIMENSION {
        return Err(Error::DimensionTooLarge {
            dim,
            max: MAX_DIMENSION,
        });
    }
    let min = min_grid(margins);
    if grid < min {
        return Err(Error::GridTooCoarse { grid, min });
    }
    let zeta = solution.z.zeta();
    if zeta.shape() != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: (m, n),
            got: zeta.shape(),
        });
    }
    let (zeta, outer_sums, inner_sums) = if m <= n {
        (zeta.clone(), margins.rows(), margins.cols())
    } else {
        (zeta.transpose(), margins.cols(), margins.rows())
    };
    let (p, q) = (outer_sums.len(), inner_sums.len());

    let roots: Vec<Complex64> = (0..grid)
        .map(|g| Complex64::from_polar(1.0, 2.0 * PI * g as f64 / grid as f64))
        .collect();
    // phi[(j * q + k) * grid + g] = 1 / (1 + z - z w^g)
    let phi: Vec<Complex64> = (0..p * q)
        .flat_map(|c| {
            let z = zeta[(c / q, c % q)];
            roots.iter().map(move |&w| (1.0 + z - z * w).inv())
        })
        .collect();
    let phi_at = |j: usize, k: usize, g: usize| phi[(j * q + k) * grid + g];
    let phase = |sum: u64, g: usize| roots[(grid - (sum % grid as u64) as usize * g % grid) % grid];

    let slab = |first: usize| -> Complex64 {
        let mut idx = vec![0usize; p];
        idx[0] = first;
        let mut acc = Complex64::new(0.0, 0.0);
        loop {
            let mut v = Complex64::new(1.0, 0.0);
            for j in 0..p {
                v *= phase(outer_sums[j], idx[j]) * phi_at(j, q - 1, idx[j]);
            }
            for k in 0..q - 1 {
                let mut inner = Complex64::new(0.0, 0.0);
                for g in 0..grid {
                    let mut term = phase(inner_sums[k], g);
                    for j in 0..p {
                        term *= phi_at(j, k, (idx[j] + g) % grid);
                    }
                    inner += term;
                }
                v *= inner;
            }
            acc += v;
            // odometer over the remaining outer coordinates
            let mut j = 1;
            while j < p {
                idx[j] += 1;
                if idx[j] < grid {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == p {
                return acc;
            }
        }
    };
    let slabs: Vec<Complex64> = (0..grid).into_par_iter().map(slab).collect();
    let total: Complex64 = slabs.iter().sum();
    let mean = total / (grid as f64).powi(dim as i32);
    let volume = (2.0 * PI).powi(dim as i32);
    Ok(QuadratureResult {
        real_part: mean.re * volume,
        imag_part: mean.im * volume,
        grid_points_per_axis: grid,
        estimate: solution.g_of_z.exp() * mean.re,
    })
}
