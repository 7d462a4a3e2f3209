//! Dense symmetric linear algebra, special functions and quadrature.

pub mod linalg;
pub mod quad;
pub mod special;

pub use linalg::{
    classify_psd, classify_psd_default, classify_spectrum, default_tol_scale, singular_values,
    sym_eigen, PsdClass, PsdVerdict, Spectrum, SymMatrix,
};
pub use quad::{quad_semi_infinite, quad_semi_infinite_with, QuadTolerance};
pub use special::{bessel_k, gamma_fn, ln_bessel_k, ln_gamma};

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
