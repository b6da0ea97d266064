//! The quadratic form `q(s, t) = 1/2 sum (z^2 + z)(s_j + t_k)^2` restricted
//! to a coordinate hyperplane, its determinants, and the covariance of the
//! Gaussian measure with density proportional to `exp(-q)`.
//!
//! Coordinates are numbered `s_1..s_m` (indices `0..m`) followed by
//! `t_1..t_n` (indices `m..m+n`). `q` vanishes along `(1,..,1; -1,..,-1)`, so
//! one coordinate is pinned to zero; which one does not affect any
//! expectation of a polynomial in the sums `s_j + t_k`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typical::TypicalMatrix;

/// The coordinate set to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperplane {
    /// `s_j = 0` (zero-based row index).
    DropS(usize),
    /// `t_k = 0` (zero-based column index).
    DropT(usize),
}

impl Hyperplane {
    /// `t_n = 0`, the hyperplane with the explicit matrix.
    pub fn default_for(n: usize) -> Self {
        Hyperplane::DropT(n - 1)
    }

    /// Index of the pinned coordinate among all `m + n`.
    pub fn pinned_index(self, m: usize, n: usize) -> Result<usize> {
        match self {
            Hyperplane::DropS(j) if j < m => Ok(j),
            Hyperplane::DropT(k) if k < n => Ok(m + k),
            other => Err(Error::IndexOutOfRange(format!(
                "{other:?} for a {m}x{n} table"
            ))),
        }
    }
}

/// Weight `z^2 + z` of the term `(s_j + t_k)^2`.
fn weight(z: f64) -> f64 {
    z * z + z
}

/// Matrix `M` of the full form on `R^{m+n}`, with `q(x) = 1/2 <x, M x>`.
fn hessian(z: &TypicalMatrix) -> DMatrix<f64> {
    let (m, n) = (z.m(), z.n());
    let mut h = DMatrix::zeros(m + n, m + n);
    for j in 0..m {
        for k in 0..n {
            let w = weight(z.get(j, k));
            h[(j, m + k)] = w;
            h[(m + k, j)] = w;
            h[(j, j)] += w;
            h[(m + k, m + k)] += w;
        }
    }
    h
}

/// Symmetric matrix of `q` itself on `R^{m+n}` (half of [`hessian`]); its
/// eigenvalues are the eigenvalues of the form.
pub fn full_form(z: &TypicalMatrix) -> DMatrix<f64> {
    hessian(z) * 0.5
}

#[derive(Debug, Clone)]
pub struct QuadraticModel {
    m: usize,
    n: usize,
    hyperplane: Hyperplane,
    pinned: usize,
    q: DMatrix<f64>,
    logdet_q: f64,
    sigma: DMatrix<f64>,
    // sigma embedded in (m+n)x(m+n) with a zero row and column at `pinned`
    padded: DMatrix<f64>,
    sigma_factor: DMatrix<f64>,
}

/// Assembles `Q` on the chosen hyperplane and inverts it through Cholesky.
///
/// The diagonal entries are `sum_k (z_jk^2 + z_jk)`, which equal
/// `r_j + sum_k z_jk^2` whenever `Z` has the prescribed margins; this keeps
/// the null direction of the full form exact even when the margins are met
/// only to solver tolerance.
pub fn build_quadratic(z: &TypicalMatrix, hyperplane: Hyperplane) -> Result<QuadraticModel> {
    let (m, n) = (z.m(), z.n());
    let pinned = hyperplane.pinned_index(m, n)?;
    if z.zeta().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let full = hessian(z);
    let dim = m + n - 1;
    let keep: Vec<usize> = (0..m + n).filter(|&i| i != pinned).collect();
    let q = DMatrix::from_fn(dim, dim, |a, b| full[(keep[a], keep[b])]);

    let chol = Cholesky::new(q.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let logdet_q = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet_q.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let sigma = chol.inverse();
    let mut padded = DMatrix::zeros(m + n, m + n);
    for (a, &ia) in keep.iter().enumerate() {
        for (b, &ib) in keep.iter().enumerate() {
            padded[(ia, ib)] = sigma[(a, b)];
        }
    }
    let sigma_factor = Cholesky::new(sigma.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    Ok(QuadraticModel {
        m,
        n,
        hyperplane,
        pinned,
        q,
        logdet_q,
        sigma,
        padded,
        sigma_factor,
    })
}

impl QuadraticModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hyperplane(&self) -> Hyperplane {
        self.hyperplane
    }

    /// Index of the pinned coordinate among all `m + n`.
    pub fn pinned_index(&self) -> usize {
        self.pinned
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `Q^{-1}`, the covariance of the remaining `m + n - 1` coordinates.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower Cholesky factor of `Q^{-1}`.
    pub fn sigma_factor(&self) -> &DMatrix<f64> {
        &self.sigma_factor
    }

    /// Covariance of all `m + n` coordinates, zero on the pinned one.
    pub fn padded_covariance(&self) -> &DMatrix<f64> {
        &self.padded
    }

    pub fn logdet_q(&self) -> f64 {
        self.logdet_q
    }

    /// `ln det(q|L) = (1 - m - n) ln 2 + ln det Q`.
    pub fn logdet_ql(&self) -> f64 {
        (1.0 - (self.m + self.n) as f64) * 2f64.ln() + self.logdet_q
    }

    /// `ln det(q|H) = ln(m + n) + ln det(q|L)`.
    pub fn logdet_qh(&self) -> f64 {
        ((self.m + self.n) as f64).ln() + self.logdet_ql()
    }

    /// `E (s_j1 + t_k1)(s_j2 + t_k2)` without bounds checks.
    #[inline]
    pub fn pair_cov(&self, j1: usize, k1: usize, j2: usize, k2: usize) -> f64 {
        let p = &self.padded;
        let (t1, t2) = (self.m + k1, self.m + k2);
        p[(j1, j2)] + p[(j1, t2)] + p[(t1, j2)] + p[(t1, t2)]
    }

    /// Row-major dump of `Q` and `Q^{-1}` for debugging.
    pub fn dump_json(&self) -> serde_json::Value {
        let rows = |a: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..a.nrows())
                .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
                .collect()
        };
        serde_json::json!({
            "hyperplane": self.hyperplane,
            "q": rows(&self.q),
            "sigma": rows(&self.sigma),
            "logdet_q": self.logdet_q,
            "logdet_ql": self.logdet_ql(),
            "logdet_qh": self.logdet_qh(),
        })
    }
}

/// `E (s_j1 + t_k1)(s_j2 + t_k2)` under the Gaussian measure of the model.
pub fn pair_sum_covariance(
    model: &QuadraticModel,
    j1: usize,
    k1: usize,
    j2: usize,
    k2: usize,
) -> Result<f64> {
    let (m, n) = (model.m, model.n);
    if j1 >= m || j2 >= m || k1 >= n || k2 >= n {
        return Err(Error::IndexOutOfRange(format!(
            "({j1},{k1}),({j2},{k2}) in a {m}x{n} table"
        )));
    }
    Ok(model.pair_cov(j1, k1, j2, k2))
}

/// Natural log of the Gaussian approximation
/// `e^g sqrt(m+n) / ((4 pi)^((m+n-1)/2) sqrt(det q|H))`.
pub fn gaussian_log_count(g_of_z: f64, model: &QuadraticModel) -> f64 {
    let d = (model.m + model.n) as f64;
    g_of_z + 0.5 * d.ln() - 0.5 * (d - 1.0) * (4.0 * PI).ln() - 0.5 * model.logdet_qh()
}

/// Row and column weight totals and the covariance error bound for
/// `delta`-smooth margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceDiagnostics {
    /// `a_j = sum_k (z_jk^2 + z_jk)`.
    pub a: Vec<f64>,
    /// `b_k = sum_j (z_jk^2 + z_jk)`.
    pub b: Vec<f64>,
    /// `12 / (delta^{15/2} (tau^2 + tau) m n)`.
    pub delta_bound: f64,
}

impl CovarianceDiagnostics {
    pub fn new(z: &TypicalMatrix, delta: f64, tau: f64) -> Self {
        let (m, n) = (z.m(), z.n());
        let a = (0..m)
            .map(|j| (0..n).map(|k| weight(z.get(j, k))).sum())
            .collect();
        let b = (0..n)
            .map(|k| (0..m).map(|j| weight(z.get(j, k))).sum())
            .collect();
        let delta_bound = 12.0 / (delta.powf(7.5) * (tau * tau + tau) * (m * n) as f64);
        CovarianceDiagnostics { a, b, delta_bound }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::Margins;
    use approx::assert_relative_eq;

    fn constant(m: usize, n: usize, z: f64) -> TypicalMatrix {
        // margins only feed the residual bookkeeping here
        let rows = vec![n as u64; m];
        let cols = vec![m as u64; n];
        let margins = Margins::new(&rows, &cols).unwrap();
        TypicalMatrix::new(DMatrix::from_element(m, n, z), &margins).unwrap()
    }

    #[test]
    fn tiny_model_matches_hand_arithmetic() {
        let z = constant(2, 2, 0.5);
        let model = build_quadratic(&z, Hyperplane::default_for(2)).unwrap();
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[1.5, 0.0, 0.75, 0.0, 1.5, 0.75, 0.75, 0.75, 1.5],
        );
        assert_relative_eq!(model.q(), &want, epsilon = 1e-15);
        assert_relative_eq!(model.logdet_q().exp(), 1.6875, epsilon = 1e-12);
        assert_relative_eq!(model.logdet_ql().exp(), 0.2109375, epsilon = 1e-12);
        assert_relative_eq!(model.logdet_qh().exp(), 0.84375, epsilon = 1e-12);

        // cofactor inverse of the 3x3 matrix above
        let s = model.sigma();
        assert_relative_eq!(s[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 1)], 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(s[(0, 2)], -2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(s[(2, 2)], 4.0 / 3.0, epsilon = 1e-12);

        assert_relative_eq!(pair_sum_covariance(&model, 0, 0, 0, 0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pair_sum_covariance(&model, 0, 1, 0, 1).unwrap(), 1.0, epsilon = 1e-12);
        let g = 4.0 * crate::typical::g_scalar(0.5);
        assert_relative_eq!(gaussian_log_count(g, &model), 0.80065, epsilon = 1e-5);
    }

    #[test]
    fn constant_matrix_determinant_closed_form() {
        for &(m, n, z) in &[(2usize, 2usize, 0.5), (3, 5, 2.0), (4, 4, 7.5), (6, 2, 0.3)] {
            let model = build_quadratic(&constant(m, n, z), Hyperplane::default_for(n)).unwrap();
            let (mf, nf) = (m as f64, n as f64);
            let want = (mf + nf - 1.0) * (z * z + z).ln()
                + (nf - 1.0) * (mf / 2.0).ln()
                + (mf - 1.0) * (nf / 2.0).ln()
                + ((mf + nf) / 2.0).ln();
            assert_relative_eq!(model.logdet_qh(), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn off_diagonal_entries_and_sparsity() {
        let margins = Margins::new(&[5, 7, 3], &[4, 6, 5]).unwrap();
        let sol = crate::typical::solve_typical(&margins, 1e-12, 10_000).unwrap();
        let model = build_quadratic(&sol.z, Hyperplane::default_for(3)).unwrap();
        let q = model.q();
        for j in 0..3 {
            for k in 0..2 {
                let z = sol.z.get(j, k);
                assert_relative_eq!(q[(j, 3 + k)], z * z + z, epsilon = 1e-14);
                assert_eq!(q[(j, 3 + k)], q[(3 + k, j)]);
            }
            for j2 in 0..3 {
                if j2 != j {
                    assert_eq!(q[(j, j2)], 0.0);
                }
            }
            let margin_diag = margins.rows()[j] as f64
                + (0..3).map(|k| sol.z.get(j, k).powi(2)).sum::<f64>();
            assert_relative_eq!(q[(j, j)], margin_diag, max_relative = 1e-10);
        }
        assert_eq!(q[(3, 4)], 0.0);
        let prod = q * model.sigma();
        assert_relative_eq!(prod, DMatrix::identity(5, 5), epsilon = 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = constant(2, 2, 0.5);
        assert!(matches!(
            build_quadratic(&z, Hyperplane::DropT(2)),
            Err(Error::IndexOutOfRange(_))
        ));
        let model = build_quadratic(&z, Hyperplane::DropS(0)).unwrap();
        assert!(pair_sum_covariance(&model, 2, 0, 0, 0).is_err());
        assert!(pair_sum_covariance(&model, 0, 0, 0, 5).is_err());

        let margins = Margins::new(&[1, 1], &[1, 1]).unwrap();
        let mut bad = DMatrix::from_element(2, 2, 0.5);
        bad[(0, 1)] = -0.2;
        let bad = TypicalMatrix::new(bad, &margins).unwrap();
        assert!(matches!(
            build_quadratic(&bad, Hyperplane::default_for(2)),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn diagnostics_match_diagonal() {
        let margins = Margins::new(&[9, 4, 6, 8], &[7, 7, 13]).unwrap();
        let sol = crate::typical::solve_typical(&margins, 1e-12, 10_000).unwrap();
        let model = build_quadratic(&sol.z, Hyperplane::default_for(3)).unwrap();
        let diag = CovarianceDiagnostics::new(&sol.z, 0.5, 3.0);
        for j in 0..4 {
            assert_relative_eq!(diag.a[j], model.q()[(j, j)], epsilon = 1e-10);
        }
        for k in 0..2 {
            assert_relative_eq!(diag.b[k], model.q()[(4 + k, 4 + k)], epsilon = 1e-10);
        }
        assert!(diag.delta_bound > 0.0);
    }
}
