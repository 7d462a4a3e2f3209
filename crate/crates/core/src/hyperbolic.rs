//! Hyperboloid model `ℍ^m = {(x, t) : t² − ‖x‖² = 1, t > 0}`, its kernels
//! and the hyperbolic / log-conditional predicates.

use serde::{Deserialize, Deserializer, Serialize};

use crate::cnd::{check_cnd_matrix, check_metrizable};
use crate::error::{Error, Result};
use crate::kernel::spec::{ExponentAtom, Family, KernelSpec};
use crate::kernel::Point;
use crate::numerics::{classify_psd, dot, sq_dist, sym_eigen, PsdClass, SymMatrix};
use crate::report::{ClassReport, Witness};

/// Relative drift of `t² − ‖x‖² − 1` tolerated (and repaired) at construction.
pub const DRIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperboloidPoint {
    x: Vec<f64>,
    t: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyperboloidPoint {
    x: Vec<f64>,
    t: f64,
}

impl<'de> Deserialize<'de> for HyperboloidPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawHyperboloidPoint::deserialize(d)?;
        HyperboloidPoint::new(raw.x, raw.t).map_err(serde::de::Error::custom)
    }
}

impl HyperboloidPoint {
    /// Validates an ambient point; `t` is recomputed from `x` when the
    /// drift is within [`DRIFT_TOL`].
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::Input("hyperboloid coordinates must be finite".into()));
        }
        if !(t > 0.0) {
            return Err(Error::Input(format!("hyperboloid t must be positive, got {t}")));
        }
        let n2 = dot(&x, &x);
        let drift = (t * t - n2 - 1.0).abs() / (t * t).max(1.0);
        if drift > DRIFT_TOL {
            return Err(Error::Input(format!(
                "point is off the hyperboloid: |t² − ‖x‖² − 1| relative drift {drift:e}"
            )));
        }
        Ok(HyperboloidPoint {
            t: (1.0 + n2).sqrt(),
            x,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// `x ↦ (x, √(1 + ‖x‖²))`.
pub fn lift(x: &[f64]) -> Result<HyperboloidPoint> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("lift requires finite coordinates".into()));
    }
    Ok(HyperboloidPoint {
        t: (1.0 + dot(x, x)).sqrt(),
        x: x.to_vec(),
    })
}

pub fn project(z: &HyperboloidPoint) -> Vec<f64> {
    z.x.clone()
}

/// `[z, w] − 1`, evaluated as `½(‖x − y‖² − (t_z − t_w)²)` with
/// `t_z − t_w = (‖x‖² − ‖y‖²)/(t_z + t_w)` to avoid cancellation.
pub fn minkowski_excess(z: &HyperboloidPoint, w: &HyperboloidPoint) -> Result<f64> {
    if z.dim() != w.dim() {
        return Err(Error::Type(format!(
            "hyperboloid dimension mismatch: {} vs {}",
            z.dim(),
            w.dim()
        )));
    }
    if z == w {
        return Ok(0.0);
    }
    let dt = (dot(&z.x, &z.x) - dot(&w.x, &w.x)) / (z.t + w.t);
    Ok((0.5 * (sq_dist(&z.x, &w.x) - dt * dt)).max(0.0))
}

/// `[z, w] = t_z t_w − ⟨x, y⟩`.
pub fn minkowski_form(z: &HyperboloidPoint, w: &HyperboloidPoint) -> Result<f64> {
    Ok(1.0 + minkowski_excess(z, w)?)
}

/// `arccosh(1 + e)` for `e ≥ 0`.
pub fn acosh1p(e: f64) -> f64 {
    if e < 1e-8 {
        (2.0 * e).sqrt() * (1.0 - e / 12.0)
    } else {
        (e + (e * (e + 2.0)).sqrt()).ln_1p()
    }
}

/// `arccosh(s)`; values in `[1 − tol, 1)` clamp to 0.
pub fn arccosh(s: f64, tol: f64) -> Result<f64> {
    if !(s >= 1.0 - tol) {
        return Err(Error::Invariant(format!("arccosh argument {s} below 1")));
    }
    Ok(acosh1p((s - 1.0).max(0.0)))
}

/// `d(z, w) = arccosh [z, w]`.
pub fn hyperbolic_distance(z: &HyperboloidPoint, w: &HyperboloidPoint) -> Result<f64> {
    Ok(acosh1p(minkowski_excess(z, w)?))
}

/// `[z, w]^{-r} = sech(d(z, w))^r`.
pub fn sech_power_kernel(r: f64) -> Result<KernelSpec> {
    let k: KernelSpec = Family::SechPower { r }.into();
    k.validate()?;
    Ok(k)
}

/// `Σ w_i [z, w]^{-r_i}`.
pub fn isotropic_kernel(atoms: Vec<ExponentAtom>) -> Result<KernelSpec> {
    let k: KernelSpec = Family::Isotropic { atoms }.into();
    k.validate()?;
    Ok(k)
}

/// Strictness flag of an isotropic mixture: some positive weight sits on
/// a positive exponent.
pub fn isotropic_is_strict(atoms: &[ExponentAtom]) -> bool {
    atoms.iter().any(|a| a.weight > 0.0 && a.r > 0.0)
}

/// `H_L(x, y) = 1 / L(x, y)`.
pub fn inverse_kernel(l: KernelSpec) -> Result<KernelSpec> {
    let k: KernelSpec = Family::InverseLogConditional { l: Box::new(l) }.into();
    k.validate()?;
    Ok(k)
}

/// `β(x, x) = 1` and, for every pivot `z` in the sample,
/// `β(x, z)β(y, z) − β(x, y)` is PSD.
pub fn check_hyperbolic(beta: &SymMatrix, tol: f64) -> Result<ClassReport> {
    let n = beta.n();
    if n < 2 {
        return Err(Error::Input("hyperbolic check needs at least two points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter("tol must be positive".into()));
    }
    beta.check_finite()?;
    let base = ClassReport::new("hyperbolic", false).tol("tol", tol);
    for i in 0..n {
        let d = beta.get(i, i);
        if (d - 1.0).abs() > tol {
            return Ok(base
                .with_witness(Some(Witness::Diagonal { index: i, value: d }))
                .note("diagonal entry differs from 1"));
        }
    }
    let mut worst = f64::INFINITY;
    for z in 0..n {
        let m = SymMatrix::from_upper_fn(n, |x, y| {
            Ok(beta.get(x, z) * beta.get(y, z) - beta.get(x, y))
        })?;
        let verdict = classify_psd(&m, tol)?;
        worst = worst.min(verdict.lambda_min / verdict.lambda_max.max(1.0));
        if verdict.class == PsdClass::Indefinite {
            let spec = sym_eigen(&m, true)?;
            let vector = spec.eigenvectors.map(|v| v[0].clone()).unwrap_or_default();
            return Ok(base
                .with_witness(Some(Witness::Pivot {
                    pivot: z,
                    value: spec.eigenvalues[0],
                    vector,
                }))
                .num("pivots_checked", (z + 1) as f64)
                .num("lambda_min_relative", worst));
        }
    }
    Ok(ClassReport {
        verdict: true,
        ..base
    }
    .num("pivots_checked", n as f64)
    .num("lambda_min_relative", worst))
}

/// `log L` is CND; the metrizability of `log L` is reported alongside.
pub fn check_log_conditional(
    l: &SymMatrix,
    points: Option<&[Point]>,
    tol: f64,
) -> Result<ClassReport> {
    l.check_finite()?;
    for i in 0..l.n() {
        for j in i..l.n() {
            if l.get(i, j) < 1.0 - tol {
                return Err(Error::Domain(format!(
                    "log-conditional entries must be >= 1, got {} at ({i}, {j})",
                    l.get(i, j)
                )));
            }
        }
    }
    let log_l = l.map(|v| v.max(1.0).ln())?;
    let cnd = check_cnd_matrix(&log_l, tol)?;
    let metr = check_metrizable(&log_l, points, tol)?;
    let witness = cnd.witness_weights.clone().map(|w| Witness::Eigen {
        value: cnd.lambda_max_projected,
        vector: w,
    });
    Ok(ClassReport::new("log_conditional", cnd.is_cnd)
        .with_witness(witness)
        .tol("tol", tol)
        .tol("cnd_tol_used", cnd.tol_used)
        .num("lambda_max_projected", cnd.lambda_max_projected)
        .num("metrizable", if metr.verdict { 1.0 } else { 0.0 }))
}
