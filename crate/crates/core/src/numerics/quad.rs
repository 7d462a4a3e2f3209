//! Double-exponential quadrature on the real line and on `(0, ∞)`.

use crate::error::{Error, Result};

/// Acceptance rule for successive refinements: the estimate is accepted
/// once two levels differ by at most `max(abs, rel * |estimate|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl QuadTolerance {
    pub fn relative(rel: f64) -> Self {
        QuadTolerance { abs: 0.0, rel }
    }

    fn accepts(&self, diff: f64, value: f64) -> bool {
        diff <= self.abs.max(self.rel * value.abs())
    }
}

/// Total node cap for the doubling refinement.
pub const MAX_NODES: usize = 1 << 20;

const MIN_LEVELS: usize = 3;
const TAIL_CUTOFF: f64 = 1e-20;
const TAIL_RUN: usize = 3;

/// Trapezoidal rule on `ℝ` with step halving.
///
/// The integrand must be finite, decay at least exponentially on both sides
/// and be unimodal-ish around 0 so the tails can be cut once terms fall
/// below `1e-20` of the running sum. `u_max` bounds the abscissae.
pub(crate) fn trapezoid_line<F>(f: F, u_max: f64, tol: QuadTolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut nodes = 0usize;
    let eval = |u: f64, nodes: &mut usize| -> Result<f64> {
        *nodes += 1;
        let v = f(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical {
                message: format!("integrand is {v} at abscissa {u}"),
                partial: f64::NAN,
            })
        }
    };

    let mut h = 0.5;
    // level 0: all integer multiples of h
    let mut sum = eval(0.0, &mut nodes)?;
    for dir in [1.0, -1.0] {
        let mut run = 0;
        let mut k = 1.0;
        while k * h <= u_max {
            let v = eval(dir * k * h, &mut nodes)?;
            sum += v;
            if v.abs() <= TAIL_CUTOFF * sum.abs() {
                run += 1;
                if run >= TAIL_RUN {
                    break;
                }
            } else {
                run = 0;
            }
            k += 1.0;
        }
    }
    let mut estimate = h * sum;

    let mut level = 0;
    loop {
        level += 1;
        // odd multiples of h/2
        let half = h / 2.0;
        let mut added = 0.0;
        for dir in [1.0, -1.0] {
            let mut run = 0;
            let mut k = 1.0;
            while k * half <= u_max {
                let v = eval(dir * k * half, &mut nodes)?;
                added += v;
                if v.abs() <= TAIL_CUTOFF * (sum + added).abs() {
                    run += 1;
                    if run >= TAIL_RUN {
                        break;
                    }
                } else {
                    run = 0;
                }
                k += 2.0;
            }
        }
        sum += added;
        h = half;
        let next = h * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= MIN_LEVELS && tol.accepts(diff, estimate) {
            return Ok(estimate);
        }
        if nodes >= MAX_NODES {
            return Err(Error::Numerical {
                message: format!(
                    "quadrature did not converge after {nodes} nodes (last change {diff:e})"
                ),
                partial: estimate,
            });
        }
    }
}

/// `∫₀^∞ f(t) dt` for a positive, continuous, integrable `f`.
///
/// Substitutes `t = e^s`, recentres on the peak of `f(e^s) e^s` found by a
/// coarse scan, then applies `s = c + sinh(u)` and the trapezoidal rule in
/// `u` with doubling refinement (capped at [`MAX_NODES`]).
pub fn quad_semi_infinite<F>(f: F, accuracy: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    quad_semi_infinite_with(
        f,
        QuadTolerance {
            abs: accuracy,
            rel: accuracy,
        },
    )
}

/// [`quad_semi_infinite`] with an explicit acceptance rule.
pub fn quad_semi_infinite_with<F>(f: F, tol: QuadTolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol.abs >= 0.0 && tol.rel >= 0.0) || (tol.abs == 0.0 && tol.rel == 0.0) {
        return Err(Error::Parameter("quadrature accuracy must be positive".into()));
    }
    let g = |s: f64| {
        let t = s.exp();
        f(t) * t
    };
    let mut center = 0.0;
    let mut peak = f64::NEG_INFINITY;
    let mut s = -40.0;
    while s <= 40.0 {
        let v = g(s);
        if v.is_finite() && v > peak {
            peak = v;
            center = s;
        }
        s += 0.25;
    }
    if peak <= 0.0 {
        return Ok(0.0);
    }
    trapezoid_line(|u| g(center + u.sinh()) * u.cosh(), 6.5, tol)
}
