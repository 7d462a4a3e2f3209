//! Gamma function and the modified Bessel function of the second kind.

use std::f64::consts::PI;

use super::quad::{trapezoid_line, QuadTolerance};
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Largest argument whose gamma value is representable.
pub const GAMMA_MAX_ARG: f64 = 171.624;

fn lanczos_series(x: f64) -> f64 {
    // x is the shifted argument (Γ(x+1) form)
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Γ(x) for `x > 0`, Lanczos approximation with reflection below 1/2.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    if x > GAMMA_MAX_ARG {
        return Err(Error::Range(format!("gamma overflows for x = {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x == x.floor() && x <= 23.0 {
        // exact factorials
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    let pw = t.powf((xm + 0.5) / 2.0);
    (2.0 * PI).sqrt() * pw * (pw * (-t).exp()) * lanczos_series(xm)
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    if x < 20.0 {
        return gamma_unchecked(x).ln();
    }
    let xm = x - 1.0;
    let t = xm + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (xm + 0.5) * t.ln() - t + lanczos_series(xm).ln()
}

/// Largest order accepted by [`bessel_k`].
pub const BESSEL_MAX_ORDER: f64 = 30.0;

/// K_ν(z), modified Bessel function of the second kind.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    Ok(ln_bessel_k(nu, z)?.exp())
}

/// ln K_ν(z). Stays finite where K_ν itself would over- or underflow.
///
/// Half-integer orders use the terminating closed form; all others use the
/// trapezoidal rule on `K_ν(z) = ½ ∫_ℝ exp(−z cosh t + ν t) dt`, centred on
/// the maximum of the exponent at `t* = asinh(ν/z)`.
pub fn ln_bessel_k(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires z > 0, got {z}")));
    }
    if !(nu >= 0.0) || nu > BESSEL_MAX_ORDER {
        return Err(Error::Domain(format!(
            "bessel_k order must lie in [0, {BESSEL_MAX_ORDER}], got {nu}"
        )));
    }
    let twice = 2.0 * nu;
    if twice == twice.floor() && (twice as u64) % 2 == 1 {
        return Ok(ln_bessel_k_half_integer((twice as u64 - 1) / 2, z));
    }
    ln_bessel_k_quadrature(nu, z)
}

/// K_{n+1/2}(z) = √(π/(2z)) e^{−z} Σ_{k=0}^{n} (n+k)! / (k! (n−k)!) (2z)^{−k},
/// summed in log space.
fn ln_bessel_k_half_integer(n: u64, z: f64) -> f64 {
    let mut ln_terms = Vec::with_capacity(n as usize + 1);
    let mut ln_coef = 0.0; // ln[(n+k)!/(k!(n-k)!)] at k = 0
    for k in 0..=n {
        if k > 0 {
            let kf = k as f64;
            let nf = n as f64;
            ln_coef += ((nf + kf) * (nf - kf + 1.0) / kf).ln();
        }
        ln_terms.push(ln_coef - (k as f64) * (2.0 * z).ln());
    }
    let m = ln_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = ln_terms.iter().map(|l| (l - m).exp()).sum();
    0.5 * (PI / (2.0 * z)).ln() - z + m + s.ln()
}

fn ln_bessel_k_quadrature(nu: f64, z: f64) -> Result<f64> {
    let t_star = (nu / z).asinh();
    let phi = |t: f64| -z * t.cosh() + nu * t;
    let phi_star = phi(t_star);
    let integral = trapezoid_line(
        |u| (phi(t_star + u) - phi_star).exp(),
        200.0,
        QuadTolerance::relative(1e-14),
    )?;
    Ok(phi_star + (0.5 * integral).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: composite Simpson on [0, T] of the cosh integral.
    fn simpson_bessel(nu: f64, z: f64) -> f64 {
        let upper = 40.0;
        let n = 400_000;
        let h = upper / n as f64;
        let f = |t: f64| (-z * f64::cosh(t)).exp() * (nu * t).cosh();
        let mut acc = f(0.0) + f(upper);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_integers() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
        assert!(rel(gamma_fn(10.0).unwrap(), 362_880.0) < 1e-15);
    }

    #[test]
    fn gamma_half_matches_integral() {
        // ∫₀^∞ t^{-1/2} e^{-t} dt = 2 ∫₀^∞ e^{-u²} du, by Simpson on [0, 12]
        let n = 200_000;
        let h = 12.0 / n as f64;
        let f = |u: f64| (-u * u).exp();
        let mut acc = f(0.0) + f(12.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let oracle = 2.0 * acc * h / 3.0;
        let g = gamma_fn(0.5).unwrap();
        assert!(rel(g, oracle) < 1e-12, "{g} vs {oracle}");
        assert!(rel(g, 1.772_453_850_905_516) < 1e-14);
    }

    #[test]
    fn gamma_domain_and_range() {
        assert!(matches!(gamma_fn(0.0), Err(Error::Domain(_))));
        assert!(matches!(gamma_fn(-1.5), Err(Error::Domain(_))));
        assert!(matches!(gamma_fn(172.0), Err(Error::Range(_))));
        assert!(gamma_fn(170.5).unwrap().is_finite());
    }

    #[test]
    fn gamma_recurrence_over_range() {
        let mut x = 1e-3;
        while x < 169.0 {
            let lhs = gamma_fn(x + 1.0).unwrap();
            let rhs = x * gamma_fn(x).unwrap();
            assert!(rel(lhs, rhs) < 1e-12, "x = {x}: {lhs} vs {rhs}");
            x *= 1.37;
        }
    }

    #[test]
    fn ln_gamma_agrees_with_gamma() {
        for &x in &[0.01, 0.3, 1.5, 7.25, 19.5, 25.0, 80.3, 160.0] {
            let a = ln_gamma(x).unwrap();
            let b = gamma_fn(x).unwrap().ln();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn bessel_half_integer_examples() {
        let k = bessel_k(0.5, 1.0).unwrap();
        let expected = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!(rel(k, expected) < 1e-14);
        assert!(rel(k, 0.461_068_504_447_894_5) < 1e-12);
        assert!(rel(expected, simpson_bessel(0.5, 1.0)) < 1e-10);

        let k2 = bessel_k(0.5, 2.0).unwrap();
        let e2 = (PI / 4.0).sqrt() * (-2.0f64).exp();
        assert!(rel(k2, e2) < 1e-14);
        assert!(rel(e2, simpson_bessel(0.5, 2.0)) < 1e-10);
    }

    #[test]
    fn bessel_three_halves_from_recurrence() {
        // K_{3/2} = K_{-1/2} + (1/z) K_{1/2} = (1 + 1/z) K_{1/2}
        let seed = (PI / 2.0).sqrt() * (-1.0f64).exp();
        let expected = seed + seed;
        let k = bessel_k(1.5, 1.0).unwrap();
        assert!(rel(k, expected) < 1e-14);
        assert!(rel(k, 0.922_137_008_895_789) < 1e-12);
    }

    #[test]
    fn bessel_quadrature_matches_simpson() {
        for &(nu, z) in &[(0.0, 0.5), (0.25, 1.0), (1.0, 2.0), (2.3, 0.7), (4.0, 5.0), (0.0, 10.0)] {
            let k = bessel_k(nu, z).unwrap();
            let o = simpson_bessel(nu, z);
            assert!(rel(k, o) < 1e-9, "nu={nu} z={z}: {k} vs {o}");
        }
    }

    #[test]
    fn bessel_quadrature_matches_closed_form_near_half_integers() {
        // the quadrature path evaluated at a half-integer must agree with the closed form
        for &(nu, z) in &[(0.5, 1e-4), (2.5, 0.3), (5.5, 12.0), (9.5, 40.0)] {
            let closed = ln_bessel_k(nu, z).unwrap();
            let quad = ln_bessel_k_quadrature(nu, z).unwrap();
            assert!((closed - quad).abs() < 1e-11 * closed.abs().max(1.0), "{nu} {z}");
        }
    }

    #[test]
    fn bessel_recurrence_grid() {
        for &nu in &[0.3, 1.0, 1.7, 3.2, 7.9, 15.0, 28.0] {
            for &z in &[1e-6, 1e-3, 0.05, 0.8, 3.0, 17.0, 50.0] {
                let lm = ln_bessel_k((nu - 1.0f64).abs(), z).unwrap();
                let l0 = ln_bessel_k(nu, z).unwrap();
                let lp = ln_bessel_k(nu + 1.0, z).unwrap();
                // K_{ν+1} − K_{ν−1} = (2ν/z) K_ν, divided through by K_{ν+1}
                let lhs = 1.0 - (lm - lp).exp();
                let rhs = (2.0 * nu / z) * (l0 - lp).exp();
                assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()).max(1e-300), "nu={nu} z={z}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn bessel_domain() {
        assert!(matches!(bessel_k(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(1.0, -2.0), Err(Error::Domain(_))));
        assert!(matches!(bessel_k(31.0, 1.0), Err(Error::Domain(_))));
    }
}
