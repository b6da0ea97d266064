//! Third- and fourth-order corrections to the Gaussian approximation and the
//! assembled count estimate.
//!
//! With `w_jk = s_j + t_k`, the cubic and quartic terms of the integrand are
//! `f = sum a_jk w_jk^3` and `h = sum b_jk w_jk^4`, where
//! `a = z(z+1)(2z+1)/6` and `b = z(z+1)(6z^2+6z+1)/24`. Their Gaussian
//! moments follow from Wick's formula:
//!
//! * `E w^4 = 3 (E w^2)^2`, giving `nu = E h`;
//! * `E w1^3 w2^3 = 9 (E w1^2)(E w2^2)(E w1 w2) + 6 (E w1 w2)^3`, giving
//!   `mu = E f^2` as a double sum over all pairs of cells.
//!
//! The estimate is `exp(gaussian_log - mu/2 + nu)`.

mod sampling;

pub use sampling::{mc_expectations, McExpectations};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gaussian::{build_quadratic, gaussian_log_count, Hyperplane, QuadraticModel};
use crate::margins::Margins;
use crate::typical::{solve_typical, TypicalMatrix, TypicalSolution, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Coefficient of `w^3` in the cubic term.
pub fn cubic_coefficient(z: f64) -> f64 {
    z * (z + 1.0) * (2.0 * z + 1.0) / 6.0
}

/// Coefficient of `w^4` in the quartic term.
pub fn quartic_coefficient(z: f64) -> f64 {
    z * (z + 1.0) * (6.0 * z * z + 6.0 * z + 1.0) / 24.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthTerms {
    pub mu: f64,
    pub nu: f64,
    /// `-mu/2 + nu`.
    pub log_factor: f64,
}

impl EdgeworthTerms {
    pub fn new(mu: f64, nu: f64) -> Self {
        EdgeworthTerms {
            mu,
            nu,
            log_factor: -0.5 * mu + nu,
        }
    }
}

/// Variances `E w_jk^2`, row-major.
fn cell_variances(model: &QuadraticModel) -> Vec<f64> {
    let (m, n) = (model.m(), model.n());
    (0..m * n)
        .map(|p| {
            let (j, k) = (p / n, p % n);
            model.pair_cov(j, k, j, k)
        })
        .collect()
}

/// `nu = E h = sum_jk b_jk * 3 (E w_jk^2)^2`.
pub fn nu_term(z: &TypicalMatrix, model: &QuadraticModel) -> f64 {
    let n = z.n();
    cell_variances(model)
        .iter()
        .enumerate()
        .map(|(p, &var)| quartic_coefficient(z.get(p / n, p % n)) * 3.0 * var * var)
        .sum()
}

/// `mu = E f^2` by the Wick double sum over all ordered pairs of cells.
///
/// For a fixed cell `(j, k)` the covariances with every other cell are
/// `v[j'] + v[m + k']` where `v` is the sum of rows `j` and `m + k` of the
/// padded covariance, so each outer step costs `O(m + n + mn)`.
pub fn mu_term(z: &TypicalMatrix, model: &QuadraticModel) -> f64 {
    let (m, n) = (z.m(), z.n());
    let cells = m * n;
    let var = cell_variances(model);
    let coef: Vec<f64> = z.zeta().transpose().iter().map(|&v| cubic_coefficient(v)).collect();
    let cov = model.padded_covariance();

    let outer = |p: usize| -> f64 {
        let (j, k) = (p / n, p % n);
        let v: Vec<f64> = (0..m + n).map(|i| cov[(j, i)] + cov[(m + k, i)]).collect();
        let (ap, sp) = (coef[p], var[p]);
        let mut acc = 0.0;
        for j2 in 0..m {
            let base = v[j2];
            let row = j2 * n;
            for k2 in 0..n {
                let rho = base + v[m + k2];
                let q = row + k2;
                acc += coef[q] * (9.0 * sp * var[q] * rho + 6.0 * rho * rho * rho);
            }
        }
        ap * acc
    };
    // per-cell partial sums are reduced in index order so the result does not
    // depend on the thread schedule
    let partial: Vec<f64> = if cells >= 256 {
        (0..cells).into_par_iter().map(outer).collect()
    } else {
        (0..cells).map(outer).collect()
    };
    partial.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Pinned coordinate; `None` means `t_n = 0`.
    pub hyperplane: Option<Hyperplane>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            hyperplane: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountEstimate {
    /// Natural log of the corrected estimate.
    pub log_count: f64,
    /// Natural log of the Gaussian approximation alone.
    pub gaussian_log: f64,
    /// `-mu/2 + nu`.
    pub edgeworth_log_factor: f64,
    pub g_of_z: f64,
    pub logdet_qh: f64,
    pub mu: f64,
    pub nu: f64,
}

impl CountEstimate {
    pub fn assemble(g_of_z: f64, model: &QuadraticModel, terms: EdgeworthTerms) -> Self {
        let gaussian_log = gaussian_log_count(g_of_z, model);
        CountEstimate {
            log_count: gaussian_log + terms.log_factor,
            gaussian_log,
            edgeworth_log_factor: terms.log_factor,
            g_of_z,
            logdet_qh: model.logdet_qh(),
            mu: terms.mu,
            nu: terms.nu,
        }
    }

    pub fn count(&self) -> f64 {
        self.log_count.exp()
    }

    pub fn gaussian_count(&self) -> f64 {
        self.gaussian_log.exp()
    }
}

/// Full pipeline with the intermediate objects retained.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub solution: TypicalSolution,
    pub model: QuadraticModel,
    pub terms: EdgeworthTerms,
    pub estimate: CountEstimate,
}

pub fn run_pipeline(margins: &Margins, cfg: &EstimateConfig) -> Result<Pipeline> {
    let solution = solve_typical(margins, cfg.tol, cfg.max_iter)?;
    let hyperplane = cfg
        .hyperplane
        .unwrap_or_else(|| Hyperplane::default_for(margins.n()));
    let model = build_quadratic(&solution.z, hyperplane)?;
    let terms = EdgeworthTerms::new(mu_term(&solution.z, &model), nu_term(&solution.z, &model));
    let estimate = CountEstimate::assemble(solution.g_of_z, &model, terms);
    Ok(Pipeline {
        solution,
        model,
        terms,
        estimate,
    })
}

/// Typical matrix, quadratic form and corrections for `margins`, combined
/// into a log-space estimate of the number of tables.
pub fn estimate_count(margins: &Margins, cfg: &EstimateConfig) -> Result<CountEstimate> {
    run_pipeline(margins, cfg).map(|p| p.estimate)
}

/// Renders `exp(log_value)` as a decimal with six significant digits, e.g.
/// `1.79566e0`, without ever forming the (possibly huge) value itself.
pub fn render_decimal(log_value: f64) -> String {
    if !log_value.is_finite() {
        return if log_value == f64::NEG_INFINITY {
            "0".to_string()
        } else {
            "nan".to_string()
        };
    }
    let log10 = log_value / std::f64::consts::LN_10;
    let mut exponent = log10.floor();
    let mut mantissa = 10f64.powf(log10 - exponent);
    // formatting rounds ties to even on the exact binary value
    let mut digits = format!("{mantissa:.5}");
    if digits.starts_with("10") {
        exponent += 1.0;
        mantissa /= 10.0;
        digits = format!("{mantissa:.5}");
    }
    format!("{digits}e{}", exponent as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn tiny() -> (TypicalMatrix, QuadraticModel) {
        let margins = Margins::new(&[1, 1], &[1, 1]).unwrap();
        let z = TypicalMatrix::new(DMatrix::from_element(2, 2, 0.5), &margins).unwrap();
        let model = build_quadratic(&z, Hyperplane::default_for(2)).unwrap();
        (z, model)
    }

    #[test]
    fn coefficients_at_one_half() {
        assert_relative_eq!(cubic_coefficient(0.5), 0.25);
        assert_relative_eq!(quartic_coefficient(0.5), 0.171875);
    }

    #[test]
    fn tiny_nu_by_hand() {
        let (z, model) = tiny();
        // 4 cells, coefficient 0.171875, unit variances
        assert_relative_eq!(nu_term(&z, &model), 0.171875 * 3.0 * 4.0, epsilon = 1e-12);
    }

    #[test]
    fn tiny_mu_by_hand() {
        let (z, model) = tiny();
        // diagonal: 4 * (9 + 6); off-diagonal: 8 ordered pairs at +1/3 and 4
        // at -1/3, which leave twice the (9/3 + 6/27) of one unordered pair
        let want = 0.0625 * (4.0 * 15.0 + 2.0 * (9.0 * (2.0 / 3.0) + 6.0 * (2.0 / 27.0)));
        assert_relative_eq!(mu_term(&z, &model), want, epsilon = 1e-12);
        assert_relative_eq!(want, 4.5556, epsilon = 1e-4);
    }

    #[test]
    fn mu_brute_force_agrees() {
        // direct quadruple loop over pair_sum_covariance
        let margins = Margins::new(&[5, 3, 8], &[4, 4, 2, 6]).unwrap();
        let sol = solve_typical(&margins, 1e-12, 10_000).unwrap();
        let model = build_quadratic(&sol.z, Hyperplane::DropS(1)).unwrap();
        let (m, n) = (3, 4);
        let mut want = 0.0;
        for j1 in 0..m {
            for k1 in 0..n {
                for j2 in 0..m {
                    for k2 in 0..n {
                        let rho = crate::gaussian::pair_sum_covariance(&model, j1, k1, j2, k2).unwrap();
                        let s1 = model.pair_cov(j1, k1, j1, k1);
                        let s2 = model.pair_cov(j2, k2, j2, k2);
                        want += cubic_coefficient(sol.z.get(j1, k1))
                            * cubic_coefficient(sol.z.get(j2, k2))
                            * (9.0 * s1 * s2 * rho + 6.0 * rho.powi(3));
                    }
                }
            }
        }
        assert_relative_eq!(mu_term(&sol.z, &model), want, max_relative = 1e-12);
    }

    #[test]
    fn tiny_estimate() {
        let margins = Margins::new(&[1, 1], &[1, 1]).unwrap();
        let est = estimate_count(&margins, &EstimateConfig::default()).unwrap();
        assert_relative_eq!(est.gaussian_log, 0.80065, epsilon = 1e-5);
        assert_relative_eq!(est.mu, 4.5556, epsilon = 1e-4);
        assert_relative_eq!(est.nu, 2.0625, epsilon = 1e-12);
        assert_relative_eq!(est.log_count, 0.58537, epsilon = 1e-5);
        assert_eq!(est.log_count, est.gaussian_log + est.edgeworth_log_factor);
        assert_relative_eq!(est.count(), 1.7956, epsilon = 1e-4);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(render_decimal(0.0), "1.00000e0");
        assert_eq!(render_decimal(2f64.ln()), "2.00000e0");
        assert_eq!(render_decimal(1000f64.ln()), "1.00000e3");
        assert_eq!(render_decimal(0.58537), "1.79566e0");
        assert_eq!(render_decimal(-(10f64.ln())), "1.00000e-1");
        // 10^400 is far outside f64 but renders fine
        assert_eq!(render_decimal(400.0 * 10f64.ln()), "1.00000e400");
        assert_eq!(render_decimal(f64::NEG_INFINITY), "0");
    }
}
