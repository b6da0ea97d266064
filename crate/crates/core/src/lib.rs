//! Counting non-negative integer matrices with prescribed row and column
//! sums.
//!
//! The estimate starts from the typical matrix `Z`, the maximizer of
//! `g(X) = sum (x+1) ln(x+1) - x ln x` over real matrices with the given
//! margins, applies a Gaussian approximation to the resulting integral and
//! corrects it with third- and fourth-order terms. Exact counts, a quadrature
//! of the integral and Monte Carlo sampling are provided for validation.
//!
//! ```
//! use ctcount::{estimate_count, EstimateConfig, Margins};
//!
//! let margins = Margins::new(&[2, 2], &[2, 2]).unwrap();
//! let est = estimate_count(&margins, &EstimateConfig::default()).unwrap();
//! assert!((est.count() / 3.0 - 1.0).abs() < 0.2);
//! ```

pub mod cli;
pub mod edgeworth;
pub mod error;
pub mod gaussian;
pub mod margins;
pub mod oracle;
pub mod typical;

pub use cli::run_cli;
pub use edgeworth::{estimate_count, run_pipeline, CountEstimate, EstimateConfig};
pub use error::{Error, Result};
pub use gaussian::{build_quadratic, Hyperplane, QuadraticModel};
pub use margins::{scale_and_round, Margins};
pub use oracle::{brute_enumerate, exact_count, DpConfig, ExactCount};
pub use typical::{solve_typical, TypicalMatrix, TypicalSolution};
