//! The typical matrix: the unique maximizer of the entropy-like function
//! `g(X) = sum (x+1) ln(x+1) - x ln x` over the transportation polytope.
//!
//! The solver works on the dual. At the optimum every entry satisfies
//! `ln((z+1)/z) = phi_j + psi_k`, so `z = 1 / (exp(phi_j + psi_k) - 1)`, and
//! each margin constraint becomes a strictly monotone scalar equation in one
//! potential. Sweeps alternate between solving all row equations with the
//! column potentials held fixed and vice versa.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::margins::Margins;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

// below this many entries per sweep the scalar solves run sequentially
const PARALLEL_THRESHOLD: usize = 16_384;

/// `g(x) = (x+1) ln(x+1) - x ln x`, with `g(0) = 0`.
///
/// Written as `ln(1+x) + x ln(1 + 1/x)` so large arguments do not cancel.
pub fn g_scalar(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.ln_1p() + x * x.recip().ln_1p()
    }
}

/// Sum of `g` over all entries of a non-negative matrix.
pub fn entropy_g(x: &DMatrix<f64>) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..x.nrows() {
        for k in 0..x.ncols() {
            let v = x[(j, k)];
            if !(v >= 0.0) {
                return Err(Error::NegativeEntry {
                    row: j,
                    col: k,
                    value: v,
                });
            }
            total += g_scalar(v);
        }
    }
    Ok(total)
}

/// Maximum relative deviation of row sums and of column sums from the margins.
pub fn residuals(zeta: &DMatrix<f64>, margins: &Margins) -> Result<(f64, f64)> {
    let expected = (margins.m(), margins.n());
    let got = (zeta.nrows(), zeta.ncols());
    if expected != got {
        return Err(Error::ShapeMismatch { expected, got });
    }
    let row = margins
        .rows()
        .iter()
        .enumerate()
        .map(|(j, &r)| (zeta.row(j).sum() - r as f64).abs() / r as f64)
        .fold(0.0, f64::max);
    let col = margins
        .cols()
        .iter()
        .enumerate()
        .map(|(k, &c)| (zeta.column(k).sum() - c as f64).abs() / c as f64)
        .fold(0.0, f64::max);
    Ok((row, col))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalMatrix {
    zeta: DMatrix<f64>,
    row_residual: f64,
    col_residual: f64,
}

impl TypicalMatrix {
    /// Wraps a strictly positive matrix and records its margin residuals.
    pub fn new(zeta: DMatrix<f64>, margins: &Margins) -> Result<Self> {
        let (row_residual, col_residual) = residuals(&zeta, margins)?;
        Ok(TypicalMatrix {
            zeta,
            row_residual,
            col_residual,
        })
    }

    pub fn zeta(&self) -> &DMatrix<f64> {
        &self.zeta
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.zeta[(j, k)]
    }

    pub fn m(&self) -> usize {
        self.zeta.nrows()
    }

    pub fn n(&self) -> usize {
        self.zeta.ncols()
    }

    pub fn row_residual(&self) -> f64 {
        self.row_residual
    }

    pub fn col_residual(&self) -> f64 {
        self.col_residual
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.m())
            .map(|j| (0..self.n()).map(|k| self.zeta[(j, k)]).collect())
            .collect()
    }
}

/// Lagrange multipliers of the margin constraints, gauged so the last column
/// potential is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
}

impl DualPotentials {
    /// Entry `1 / (exp(phi_j + psi_k) - 1)`.
    pub fn entry(&self, j: usize, k: usize) -> f64 {
        (self.row_potential[j] + self.col_potential[k]).exp_m1().recip()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.row_potential.len(), self.col_potential.len(), |j, k| {
            self.entry(j, k)
        })
    }

    fn regauge(&mut self) {
        let shift = *self.col_potential.last().unwrap();
        self.row_potential.iter_mut().for_each(|p| *p += shift);
        self.col_potential.iter_mut().for_each(|p| *p -= shift);
    }
}

#[derive(Debug, Clone)]
pub struct TypicalSolution {
    pub z: TypicalMatrix,
    pub duals: DualPotentials,
    /// `g(Z)` in nats.
    pub g_of_z: f64,
    /// Number of full row+column sweeps performed.
    pub iterations: usize,
}

#[derive(Serialize)]
struct SolutionJson<'a> {
    zeta: Vec<Vec<f64>>,
    row_potential: &'a [f64],
    col_potential: &'a [f64],
    g_of_z: f64,
    iterations: usize,
    row_residual: f64,
    col_residual: f64,
}

impl Serialize for TypicalSolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SolutionJson {
            zeta: self.z.to_rows(),
            row_potential: &self.duals.row_potential,
            col_potential: &self.duals.col_potential,
            g_of_z: self.g_of_z,
            iterations: self.iterations,
            row_residual: self.z.row_residual,
            col_residual: self.z.col_residual,
        }
        .serialize(s)
    }
}

impl TypicalSolution {
    /// `sum phi_j r_j + sum psi_k c_k + sum ln(1 + z_jk)`, equal to `g(Z)` at
    /// the optimum.
    pub fn dual_objective(&self, margins: &Margins) -> f64 {
        let rows: f64 = self
            .duals
            .row_potential
            .iter()
            .zip(margins.rows())
            .map(|(p, &r)| p * r as f64)
            .sum();
        let cols: f64 = self
            .duals
            .col_potential
            .iter()
            .zip(margins.cols())
            .map(|(p, &c)| p * c as f64)
            .sum();
        let logs: f64 = self.z.zeta.iter().map(|z| z.ln_1p()).sum();
        rows + cols + logs
    }
}

/// Solves `sum_k 1/(exp(u + offset_k) - 1) = target` for `u > 0`.
///
/// `ln F(u)` is convex and decreasing, so Newton steps on it are kept inside a
/// shrinking bracket `(lo, hi)`, falling back to bisection.
fn solve_scalar(offsets: &[f64], target: f64, guess: f64) -> f64 {
    let eval = |u: f64| {
        let mut f = 0.0;
        let mut df = 0.0;
        for &o in offsets {
            let z = (u + o).exp_m1().recip();
            f += z;
            df += z * z + z;
        }
        (f, df)
    };
    let ln_target = target.ln();
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut u = if guess > 0.0 && guess.is_finite() {
        guess
    } else {
        1.0
    };
    for _ in 0..400 {
        let (f, df) = eval(u);
        if (f - target).abs() <= 4.0 * f64::EPSILON * target {
            return u;
        }
        if f > target {
            lo = u;
        } else {
            hi = u;
        }
        if hi.is_finite() && hi - lo <= 2.0 * f64::EPSILON * hi {
            return u;
        }
        let newton = u + (f.ln() - ln_target) * f / df;
        u = if newton > lo && newton < hi {
            newton
        } else if !hi.is_finite() {
            2.0 * u
        } else if lo > 0.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * hi
        };
    }
    u
}

fn update_side(own: &mut [f64], other: &[f64], targets: &[u64], parallel: bool) {
    let min_other = other.iter().copied().fold(f64::INFINITY, f64::min);
    let offsets: Vec<f64> = other.iter().map(|p| p - min_other).collect();
    let solve = |(p, &t): (&mut f64, &u64)| {
        let u = solve_scalar(&offsets, t as f64, *p + min_other);
        *p = u - min_other;
    };
    if parallel {
        own.par_iter_mut().zip(targets.par_iter()).for_each(solve);
    } else {
        own.iter_mut().zip(targets.iter()).for_each(solve);
    }
}

/// Computes the typical matrix by alternating dual sweeps from the default
/// start `phi_j = ln(1 + n/r_j)`, `psi = 0`.
pub fn solve_typical(margins: &Margins, tol: f64, max_iter: usize) -> Result<TypicalSolution> {
    let n = margins.n() as f64;
    let init = DualPotentials {
        row_potential: margins
            .rows()
            .iter()
            .map(|&r| (n / r as f64).ln_1p())
            .collect(),
        col_potential: vec![0.0; margins.n()],
    };
    solve_typical_from(margins, init, tol, max_iter)
}

/// Same as [`solve_typical`] from caller-supplied starting potentials.
pub fn solve_typical_from(
    margins: &Margins,
    init: DualPotentials,
    tol: f64,
    max_iter: usize,
) -> Result<TypicalSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    if init.row_potential.len() != margins.m() || init.col_potential.len() != margins.n() {
        return Err(Error::ShapeMismatch {
            expected: (margins.m(), margins.n()),
            got: (init.row_potential.len(), init.col_potential.len()),
        });
    }
    let parallel = margins.m() * margins.n() >= PARALLEL_THRESHOLD;
    let mut duals = init;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        update_side(
            &mut duals.row_potential,
            &duals.col_potential,
            margins.rows(),
            parallel,
        );
        update_side(
            &mut duals.col_potential,
            &duals.row_potential,
            margins.cols(),
            parallel,
        );
        duals.regauge();
        let zeta = duals.matrix();
        let (row_res, col_res) = residuals(&zeta, margins)?;
        residual = row_res.max(col_res);
        if residual <= tol {
            let g_of_z = entropy_g(&zeta)?;
            return Ok(TypicalSolution {
                z: TypicalMatrix {
                    zeta,
                    row_residual: row_res,
                    col_residual: col_res,
                },
                duals,
                g_of_z,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn margins(r: &[u64], c: &[u64]) -> Margins {
        Margins::new(r, c).unwrap()
    }

    #[test]
    fn g_closed_forms() {
        assert_eq!(entropy_g(&DMatrix::zeros(2, 2)).unwrap(), 0.0);
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert_relative_eq!(entropy_g(&ones).unwrap(), 8.0 * 2f64.ln(), epsilon = 1e-14);
        let halves = DMatrix::from_element(2, 2, 0.5);
        let expected = 4.0 * (1.5 * 1.5f64.ln() - 0.5 * 0.5f64.ln());
        assert_relative_eq!(entropy_g(&halves).unwrap(), expected, epsilon = 1e-14);
        assert_relative_eq!(expected, 3.819086, epsilon = 1e-6);
    }

    #[test]
    fn g_rejects_negative() {
        let mut x = DMatrix::from_element(2, 2, 1.0);
        x[(1, 0)] = -0.5;
        assert!(matches!(
            entropy_g(&x),
            Err(Error::NegativeEntry { row: 1, col: 0, .. })
        ));
    }

    #[test]
    fn g_large_argument_matches_asymptotic() {
        // g(x) = 1 + ln x + O(1/x)
        for &x in &[1e3, 1e6, 1e9] {
            let approx = 1.0 + f64::ln(x);
            assert!((g_scalar(x) - approx).abs() < 1.0 / x);
        }
    }

    #[test]
    fn residual_cases() {
        let m = margins(&[10, 6], &[8, 8]);
        let indep = DMatrix::from_fn(2, 2, |j, k| {
            m.rows()[j] as f64 * m.cols()[k] as f64 / m.total() as f64
        });
        let (r, c) = residuals(&indep, &m).unwrap();
        assert!(r < 1e-15 && c < 1e-15);

        let mut bumped = indep.clone();
        bumped[(0, 0)] += 0.1;
        let (r, _) = residuals(&bumped, &m).unwrap();
        assert_relative_eq!(r, 0.01, epsilon = 1e-12);

        assert!(matches!(
            residuals(&DMatrix::zeros(3, 2), &m),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn uniform_margins_give_uniform_matrix() {
        let m = margins(&[2, 2], &[2, 2]);
        let sol = solve_typical(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for z in sol.z.zeta().iter() {
            assert_relative_eq!(*z, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn equal_rows_give_column_over_m() {
        let m = margins(&[6, 6, 6], &[3, 6, 9]);
        let sol = solve_typical(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for j in 0..3 {
            for (k, want) in [1.0, 2.0, 3.0].iter().enumerate() {
                assert_relative_eq!(sol.z.get(j, k), *want, epsilon = 1e-8);
            }
        }
    }

    /// Golden-section maximization of g along the one-parameter family
    /// X(t) = ((t, 3-t), (2-t, t-1)), t in [1, 2].
    fn one_parameter_oracle() -> f64 {
        let g = |t: f64| g_scalar(t) + g_scalar(3.0 - t) + g_scalar(2.0 - t) + g_scalar(t - 1.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (1.0, 2.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn two_by_two_matches_line_search() {
        let t = one_parameter_oracle();
        let m = margins(&[3, 1], &[2, 2]);
        let sol = solve_typical(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let want = [[t, 3.0 - t], [2.0 - t, t - 1.0]];
        for j in 0..2 {
            for k in 0..2 {
                assert!((sol.z.get(j, k) - want[j][k]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn stationarity_and_dual_identity() {
        let m = margins(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        let sol = solve_typical(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let z = sol.z.get(j, k);
                assert!(z > 0.0);
                let lhs = z.recip().ln_1p();
                let rhs = sol.duals.row_potential[j] + sol.duals.col_potential[k];
                assert!((lhs - rhs).abs() <= 1e-8);
            }
        }
        assert_eq!(*sol.duals.col_potential.last().unwrap(), 0.0);
        let dual = sol.dual_objective(&m);
        assert!((dual - sol.g_of_z).abs() <= 1e-8 * sol.g_of_z.abs());
        assert!(sol.z.row_residual() <= DEFAULT_TOL && sol.z.col_residual() <= DEFAULT_TOL);
    }

    #[test]
    fn reports_non_convergence() {
        let m = margins(&[220, 215, 93, 64], &[108, 286, 71, 127]);
        match solve_typical(&m, 1e-14, 2) {
            Err(Error::NoConvergence { iterations: 2, residual }) => assert!(residual > 1e-14),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn scalar_map_is_strictly_decreasing() {
        let offsets = [0.0, 0.3, 1.7, 4.0];
        let f = |u: f64| offsets.iter().map(|o| (u + o).exp_m1().recip()).sum::<f64>();
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let u = i as f64 * 0.05;
            let v = f(u);
            assert!(v < prev);
            prev = v;
        }
        for &target in &[1e-6, 0.3, 5.0, 1e7] {
            let u = solve_scalar(&offsets, target, 1.0);
            assert!((f(u) - target).abs() <= 1e-12 * target, "target {target}");
        }
    }
}
