//! Conditionally negative definite kernels: the hyperplane test, the
//! Schoenberg transform, metrizability, the induced distance, the Hilbert
//! space embedding and finite-difference monotonicity probes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Func1;
use crate::kernel::spec::{Combinator, KernelSpec};
use crate::kernel::{gram, Point};
use crate::numerics::{sym_eigen, SymMatrix};
use crate::report::{ClassReport, Witness};

/// Default relative tolerance of the CND test.
pub const DEFAULT_CND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CndReport {
    pub is_cnd: bool,
    /// Largest eigenvalue of `PΓP`, `P = I − (1/n)·ones`.
    pub lambda_max_projected: f64,
    /// Zero-sum unit vector with `cᵀΓc > 0`, present iff not CND.
    pub witness_weights: Option<Vec<f64>>,
    pub tol_used: f64,
}

/// Hyperplane test on a matrix. The boundary is `tol · max(1, ‖Γ‖_max)`.
pub fn check_cnd_matrix(gamma: &SymMatrix, tol: f64) -> Result<CndReport> {
    let n = gamma.n();
    if n < 2 {
        return Err(Error::Input("CND check needs at least two points".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::Parameter("tol must be nonnegative".into()));
    }
    gamma.check_finite()?;
    let tol_used = tol * gamma.max_abs().max(1.0);
    let spec = sym_eigen(&gamma.center(), true)?;
    let lambda_max = spec.max();
    let is_cnd = lambda_max <= tol_used;
    let witness_weights = if is_cnd {
        None
    } else {
        let mut v = spec.eigenvectors.expect("requested")[n - 1].clone();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        Some(v)
    };
    Ok(CndReport {
        is_cnd,
        lambda_max_projected: lambda_max,
        witness_weights,
        tol_used,
    })
}

/// Hyperplane test of a kernel on a point sample.
pub fn check_cnd(gamma: &KernelSpec, points: &[Point], tol: f64) -> Result<CndReport> {
    if points.len() < 2 {
        return Err(Error::Input("CND check needs at least two points".into()));
    }
    check_cnd_matrix(&gram(gamma, points)?.matrix, tol)
}

fn check_distinct(points: &[Point]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        if !seen.insert(p.key()) {
            return Err(Error::Input(format!("duplicate point at index {i}")));
        }
    }
    Ok(())
}

/// `2γ_ij − γ_ii − γ_jj > tol · max(1, ‖Γ‖_max)` for every pair `i ≠ j`.
///
/// When `points` is given they must be pairwise distinct.
pub fn check_metrizable(
    gamma: &SymMatrix,
    points: Option<&[Point]>,
    tol: f64,
) -> Result<ClassReport> {
    if let Some(p) = points {
        if p.len() != gamma.n() {
            return Err(Error::Input("point count does not match the matrix".into()));
        }
        check_distinct(p)?;
    }
    gamma.check_finite()?;
    let tol_used = tol * gamma.max_abs().max(1.0);
    let n = gamma.n();
    let mut min_gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let gap = 2.0 * gamma.get(i, j) - gamma.get(i, i) - gamma.get(j, j);
            if !(gap > tol_used) {
                return Ok(ClassReport::new("metrizable", false)
                    .with_witness(Some(Witness::Pair { i, j, value: gap }))
                    .tol("tol", tol)
                    .tol("tol_used", tol_used));
            }
            min_gap = min_gap.min(gap);
        }
    }
    let r = ClassReport::new("metrizable", true)
        .tol("tol", tol)
        .tol("tol_used", tol_used);
    Ok(if min_gap.is_finite() {
        r.num("min_gap", min_gap)
    } else {
        r
    })
}

/// `e^{−t γ(x, y)}`.
pub fn schoenberg_transform(gamma: KernelSpec, t: f64) -> Result<KernelSpec> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("t must be positive, got {t}")));
    }
    Ok(Combinator::Schoenberg {
        inner: Box::new(gamma),
        t,
    }
    .into())
}

/// Radicands in `[−CLAMP_TOL·scale, 0)` are clamped to 0.
pub const CLAMP_TOL: f64 = 1e-12;

fn distance_from_parts(gxy: f64, gxx: f64, gyy: f64) -> Result<f64> {
    let rad = gxy - gxx / 2.0 - gyy / 2.0;
    let scale = gxy.abs().max(gxx.abs()).max(gyy.abs()).max(1.0);
    if rad < -CLAMP_TOL * scale {
        return Err(Error::Metrizability(format!(
            "negative radicand {rad:e} in the induced distance"
        )));
    }
    Ok(rad.max(0.0).sqrt())
}

/// `D_γ(x, y) = √(γ(x, y) − γ(x, x)/2 − γ(y, y)/2)`.
pub fn induced_distance(gamma: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    distance_from_parts(gamma.eval(x, y)?, gamma.eval(x, x)?, gamma.eval(y, y)?)
}

/// [`induced_distance`] read off a Gram matrix.
pub fn induced_distance_matrix(gamma: &SymMatrix, i: usize, j: usize) -> Result<f64> {
    distance_from_parts(gamma.get(i, j), gamma.get(i, i), gamma.get(j, j))
}

/// `γ(x_i, x_j) = ‖h_i − h_j‖² + f_i + f_j` realised in `ℝ^rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    /// Row `i` is `h(x_i)`.
    pub coords: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub base_index: usize,
    pub rank: usize,
    /// Retained eigenvalues of the base-pointed Gram, descending.
    pub eigenvalues: Vec<f64>,
}

impl Embedding {
    pub fn reconstruct(&self, i: usize, j: usize) -> f64 {
        let d2: f64 = self.coords[i]
            .iter()
            .zip(&self.coords[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        d2 + self.f[i] + self.f[j]
    }

    /// `max_ij |γ_ij − reconstruct(i, j)| / max(1, ‖Γ‖_max)`.
    pub fn relative_error(&self, gamma: &SymMatrix) -> f64 {
        let n = gamma.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((gamma.get(i, j) - self.reconstruct(i, j)).abs());
            }
        }
        worst / gamma.max_abs().max(1.0)
    }
}

/// Default relative rank cut-off of [`embed`].
pub const DEFAULT_EMBED_TOL: f64 = 1e-10;

/// Base-pointed Gram `G_ij = ½[γ_ib + γ_jb − γ_ij − γ_bb]`, factored as
/// `V √Λ` over eigenvalues above `tol · λ_max`.
pub fn embed(gamma: &SymMatrix, base_index: usize, tol: f64) -> Result<Embedding> {
    let n = gamma.n();
    if n == 0 {
        return Err(Error::Input("embedding needs at least one point".into()));
    }
    if base_index >= n {
        return Err(Error::Input(format!(
            "base index {base_index} out of range for {n} points"
        )));
    }
    gamma.check_finite()?;
    let f: Vec<f64> = gamma.diagonal().iter().map(|v| v / 2.0).collect();
    if n == 1 {
        return Ok(Embedding {
            coords: vec![vec![]],
            f,
            base_index,
            rank: 0,
            eigenvalues: vec![],
        });
    }
    let cnd = check_cnd_matrix(gamma, DEFAULT_CND_TOL)?;
    if !cnd.is_cnd {
        return Err(Error::NotCnd {
            lambda_max: cnd.lambda_max_projected,
            tol: cnd.tol_used,
        });
    }
    let b = base_index;
    let g = SymMatrix::from_upper_fn(n, |i, j| {
        Ok(0.5 * (gamma.get(i, b) + gamma.get(j, b) - gamma.get(i, j) - gamma.get(b, b)))
    })?;
    let spec = sym_eigen(&g, true)?;
    let lambda_max = spec.max();
    let neg_tol = DEFAULT_CND_TOL * gamma.max_abs().max(1.0) * n as f64;
    if spec.min() < -neg_tol {
        return Err(Error::NotCnd {
            lambda_max: -spec.min(),
            tol: neg_tol,
        });
    }
    let vectors = spec.eigenvectors.expect("requested");
    let keep: Vec<usize> = (0..n)
        .rev()
        .filter(|&k| spec.eigenvalues[k] > tol * lambda_max && spec.eigenvalues[k] > 0.0)
        .collect();
    let mut coords: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            keep.iter()
                .map(|&k| vectors[k][i] * spec.eigenvalues[k].sqrt())
                .collect()
        })
        .collect();
    coords[b].iter_mut().for_each(|v| *v = 0.0);
    Ok(Embedding {
        coords,
        f,
        base_index,
        rank: keep.len(),
        eigenvalues: keep.iter().map(|&k| spec.eigenvalues[k]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    CompletelyMonotone,
    Bernstein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub order: usize,
    pub point: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub property: Monotonicity,
    pub order_checked: usize,
    pub grid: Vec<f64>,
    pub violations: Vec<Violation>,
    pub rel_tol: f64,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const GRID_RATIO: f64 = 1.25;
pub const PROBE_REL_TOL: f64 = 1e-7;
pub const MAX_PROBE_ORDER: usize = 8;

/// `lo, lo·ratio, lo·ratio², …` up to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && ratio > 1.0) || !hi.is_finite() {
        return Err(Error::Parameter(
            "geometric grid needs 0 < lo <= hi and ratio > 1".into(),
        ));
    }
    let mut g = Vec::new();
    let mut k = 0;
    loop {
        let t = lo * ratio.powi(k);
        if t > hi * (1.0 + 1e-12) {
            break;
        }
        g.push(t);
        k += 1;
    }
    Ok(g)
}

/// The probes' default grid: `[0.01, 100]` with ratio 1.25.
pub fn default_grid() -> Vec<f64> {
    geometric_grid(0.01, 100.0, GRID_RATIO).expect("valid constants")
}

fn sample(f: &Func1, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Input("probe grid is empty".into()));
    }
    if grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Input("probe grid must be positive and strictly ascending".into()));
    }
    grid.iter().map(|&t| f.eval_checked(t)).collect()
}

/// Divided differences of every order up to `max_order`; entry `k` holds
/// `f[t_i, …, t_{i+k}]` for each admissible `i`, paired with the same
/// recursion applied to the magnitude bound `max|f|`, which sets the scale
/// of the tolerance at that entry.
fn divided_differences(grid: &[f64], values: &[f64], max_order: usize) -> Vec<Vec<(f64, f64)>> {
    let fmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = vec![values.iter().map(|v| (*v, fmax)).collect::<Vec<_>>()];
    for k in 1..=max_order {
        let prev = &out[k - 1];
        if prev.len() < 2 {
            break;
        }
        let next: Vec<(f64, f64)> = (0..prev.len() - 1)
            .map(|i| {
                let h = grid[i + k] - grid[i];
                ((prev[i + 1].0 - prev[i].0) / h, (prev[i + 1].1 + prev[i].1) / h)
            })
            .collect();
        out.push(next);
    }
    out
}

/// Records `(order, t_i, value)` wherever `sign · dd[i] < −rel_tol · scale[i]`.
fn sign_violations(dd: &[(f64, f64)], grid: &[f64], sign: f64, order: usize, out: &mut Vec<Violation>) {
    for (i, &(v, scale)) in dd.iter().enumerate() {
        if sign * v < -PROBE_REL_TOL * scale {
            out.push(Violation {
                order,
                point: grid[i],
                value: v,
            });
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_PROBE_ORDER {
        return Err(Error::Parameter(format!(
            "probe order must be at most {MAX_PROBE_ORDER}, got {order}"
        )));
    }
    Ok(())
}

/// Necessary condition for complete monotonicity: `(−1)^k f[t_i..t_{i+k}] ≥ −tol`
/// for `k = 0..=order`.
pub fn probe_completely_monotone(
    f: &Func1,
    grid: &[f64],
    order: usize,
) -> Result<MonotonicityReport> {
    check_order(order)?;
    let values = sample(f, grid)?;
    let dd = divided_differences(grid, &values, order);
    let mut violations = Vec::new();
    for (k, d) in dd.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign_violations(d, grid, sign, k, &mut violations);
    }
    Ok(MonotonicityReport {
        property: Monotonicity::CompletelyMonotone,
        order_checked: dd.len() - 1,
        grid: grid.to_vec(),
        violations,
        rel_tol: PROBE_REL_TOL,
    })
}

/// Necessary condition for a Bernstein function: `g ≥ 0` on the grid and
/// `g′` passes the completely monotone probe up to `order`. Violations of
/// `g′` are reported at the order of `g′`; negativity of `g` is order 0.
pub fn probe_bernstein(g: &Func1, grid: &[f64], order: usize) -> Result<MonotonicityReport> {
    check_order(order)?;
    let values = sample(g, grid)?;
    let dd = divided_differences(grid, &values, order + 1);
    let mut violations = Vec::new();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, v) in values.iter().enumerate() {
        if *v < -PROBE_REL_TOL * scale {
            violations.push(Violation {
                order: 0,
                point: grid[i],
                value: *v,
            });
        }
    }
    for (k, d) in dd.iter().enumerate().skip(1) {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sign_violations(d, grid, sign, k - 1, &mut violations);
    }
    Ok(MonotonicityReport {
        property: Monotonicity::Bernstein,
        order_checked: dd.len().saturating_sub(2),
        grid: grid.to_vec(),
        violations,
        rel_tol: PROBE_REL_TOL,
    })
}
