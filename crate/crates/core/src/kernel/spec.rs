//! The declarative kernel tree and its JSON form.
//!
//! Leaves carry a `"family"` discriminator, combinators an `"op"`
//! discriminator. Unknown fields are rejected everywhere.

use serde::{Deserialize, Deserializer, Serialize};

use super::point::Point;
use crate::error::{Error, Result};
use crate::functions::Func1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum KernelSpec {
    Leaf(Family),
    Op(Combinator),
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(deserializer)?;
        let obj = value
            .as_object()
            .ok_or_else(|| D::Error::custom("kernel spec must be a JSON object"))?;
        match (obj.contains_key("family"), obj.contains_key("op")) {
            (true, false) => Family::deserialize(value)
                .map(KernelSpec::Leaf)
                .map_err(D::Error::custom),
            (false, true) => Combinator::deserialize(value)
                .map(KernelSpec::Op)
                .map_err(D::Error::custom),
            (true, true) => Err(D::Error::custom(
                "kernel spec has both \"family\" and \"op\"",
            )),
            (false, false) => Err(D::Error::custom(
                "kernel spec needs a \"family\" or an \"op\" field",
            )),
        }
    }
}

/// Weighted rate `(weight, rate)` of a Gaussian mixture `Σ w e^{-r‖x−y‖²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateAtom {
    pub weight: f64,
    pub rate: f64,
}

/// Weighted exponent `(weight, r)` of an isotropic hyperbolic mixture
/// `Σ w [z,w]^{-r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentAtom {
    pub weight: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternVariant {
    /// `A_ij(u,v) M(‖x−y‖ / γ(u,v)^{1/2}; α_ij, ν_i + ν_j)`
    Product,
    /// `A_ij(u,v) M(‖x−y‖; γ(u,v)^{1/2}, ν_i + ν_j)`
    Hilbert,
}

/// Site matrix kernel `A_ij(u,v) = coeffs[i][j] · base(u,v)`; the base
/// defaults to the constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteMatrix {
    pub coeffs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<KernelSpec>>,
}

impl SiteMatrix {
    pub fn constant(coeffs: Vec<Vec<f64>>) -> Self {
        SiteMatrix { coeffs, base: None }
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `c` everywhere.
    Constant { c: f64 },
    /// `e^{-σ‖x−y‖²}` on Euclidean points.
    Gaussian { sigma: f64 },
    /// `Σ w_i e^{-r_i ‖x−y‖²}`.
    CmMixture { atoms: Vec<RateAtom> },
    /// `‖x−y‖²`, the canonical conditionally negative definite kernel.
    SqDistance,
    /// `‖x−y‖^p`, `0 < p ≤ 2`.
    PowerDistance { p: f64 },
    /// `⟨x, y⟩`
    Linear,
    /// `e^{⟨x, y⟩}`
    ExpInner,
    /// Minkowski form `[z, w] = t_z t_w − ⟨x_z, x_w⟩` on the hyperboloid.
    Minkowski,
    /// `g(‖u−v‖²)^{-m/2} ψ(‖x−y‖² / g(‖u−v‖²))` on Euclidean product points.
    GneitingClassic { g: Func1, psi: Func1, m: u32 },
    /// `A(u,v) e^{-‖x−y‖²/γ(u,v)}` with site kernels `A` and `γ > 0`.
    GneitingGeneral {
        a: Box<KernelSpec>,
        gamma: Box<KernelSpec>,
        m: u32,
    },
    /// `2^{1−ν} (α r)^ν K_ν(α r) / Γ(ν)` with `r = ‖x−y‖`.
    Matern { alpha: f64, nu: f64 },
    /// `[z, w]^{-r}` on the hyperboloid.
    SechPower { r: f64 },
    /// `Σ w_i [z, w]^{-r_i}`.
    Isotropic { atoms: Vec<ExponentAtom> },
    /// `1 / L(x, y)` for a log-conditional `L ≥ 1`.
    InverseLogConditional { l: Box<KernelSpec> },
    /// Channel kernel `Γ(ν_i+ν_j) / γ(u,v)^{ν_i+ν_j}` on channel points over sites.
    GammaPowerMatrix { gamma: Box<KernelSpec>, nus: Vec<f64> },
    /// Matérn matrix kernel on channel points over product points.
    MaternMatrix {
        variant: MaternVariant,
        a: SiteMatrix,
        gamma: Box<KernelSpec>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        alphas: Vec<f64>,
        nus: Vec<f64>,
        #[serde(default)]
        m: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureAtom {
    pub weight: f64,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub point: Point,
    pub value: f64,
}

/// Point weights for [`Combinator::Rescale`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightFn {
    Constant { c: f64 },
    /// `⟨coeffs, x⟩ + offset` on Euclidean points.
    Affine { coeffs: Vec<f64>, offset: f64 },
    /// `e^{-c‖x‖²}` on Euclidean points.
    NormExp { c: f64 },
    /// Exact-match lookup; unknown points are an error.
    Table { entries: Vec<WeightEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub from: Point,
    pub to: Point,
}

/// Point maps for [`Combinator::Pullback`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointMap {
    Identity,
    /// `x ↦ c x` on Euclidean points.
    Scale { c: f64 },
    /// `x ↦ M x + offset` on Euclidean points (`M` given row-wise).
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    Constant { point: Point },
    /// `x ↦ (x, √(1+‖x‖²))` from `ℝ^m` onto the hyperboloid.
    Lift,
    /// `(u, x) ↦ u`
    Site,
    /// `(u, x) ↦ x`
    Spatial,
    Table { entries: Vec<MapEntry> },
}

/// Matrix-valued kernels consumed by [`Combinator::Flatten`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixKernel {
    /// `K_ij(x,y) = a_ij`
    Constant { a: Vec<Vec<f64>> },
    /// `K_ij(x,y) = a_ij e^{-‖x−y‖²/γ_ij}` on Euclidean base points.
    Gaussian {
        a: Vec<Vec<f64>>,
        gamma: Vec<Vec<f64>>,
    },
    /// `K_ij(x,y) = a_ij base(x,y)`
    Separable {
        a: Vec<Vec<f64>>,
        base: Box<KernelSpec>,
    },
    /// Arbitrary entries; only the upper triangle `i ≤ j` is read and
    /// `K_ji(x,y) := K_ij(y,x)`.
    Entries { k: Vec<Vec<KernelSpec>> },
}

impl MatrixKernel {
    pub fn channels(&self) -> usize {
        match self {
            MatrixKernel::Constant { a }
            | MatrixKernel::Gaussian { a, .. }
            | MatrixKernel::Separable { a, .. } => a.len(),
            MatrixKernel::Entries { k } => k.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Combinator {
    /// `p(x,y) q(x,y)`
    Schur {
        left: Box<KernelSpec>,
        right: Box<KernelSpec>,
    },
    /// `p(x,y) q(z,w)` on product points `(x,z)`, `(y,w)`; the right factor
    /// sees the spatial part as a Euclidean point.
    Tensor {
        left: Box<KernelSpec>,
        right: Box<KernelSpec>,
    },
    /// `f(x) K(x,y) f(y)`
    Rescale {
        inner: Box<KernelSpec>,
        weight: WeightFn,
    },
    /// `K(h(x), h(y))`
    Pullback {
        inner: Box<KernelSpec>,
        map: PointMap,
    },
    /// `Σ w_i K_i(x,y)` with `w_i ≥ 0`.
    Mixture { atoms: Vec<MixtureAtom> },
    /// `e^{-t γ(x,y)}`
    Schoenberg { inner: Box<KernelSpec>, t: f64 },
    /// `L((x,i),(y,j)) = K_ij(x,y)`
    Flatten { matrix: MatrixKernel },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {v}")))
    }
}

pub(crate) fn check_square(name: &str, a: &[Vec<f64>], symmetric: bool) -> Result<()> {
    let n = a.len();
    if n == 0 {
        return Err(Error::Parameter(format!("{name} must have at least one row")));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Parameter(format!(
                "{name} row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("{name} row {i} has a non-finite entry")));
        }
    }
    if symmetric {
        for i in 0..n {
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(Error::Parameter(format!(
                        "{name} is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
    }
    Ok(())
}

fn check_nus(nus: &[f64]) -> Result<()> {
    if nus.is_empty() {
        return Err(Error::Parameter("at least one smoothness ν is required".into()));
    }
    for &nu in nus {
        positive("nu", nu)?;
    }
    Ok(())
}

impl KernelSpec {
    /// Checks every leaf's parameter constraints, recursively.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Leaf(f) => f.validate(),
            KernelSpec::Op(c) => c.validate(),
        }
    }

    pub fn from_json(s: &str) -> Result<KernelSpec> {
        let spec: KernelSpec =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("kernel spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("kernel specs always serialize")
    }

    pub fn constant(c: f64) -> KernelSpec {
        KernelSpec::Leaf(Family::Constant { c })
    }

    pub fn sq_distance() -> KernelSpec {
        KernelSpec::Leaf(Family::SqDistance)
    }
}

impl From<Family> for KernelSpec {
    fn from(f: Family) -> Self {
        KernelSpec::Leaf(f)
    }
}

impl From<Combinator> for KernelSpec {
    fn from(c: Combinator) -> Self {
        KernelSpec::Op(c)
    }
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        match self {
            Family::Constant { c } => finite("c", *c),
            Family::Gaussian { sigma } => positive("sigma", *sigma),
            Family::CmMixture { atoms } => {
                for a in atoms {
                    if !(a.weight >= 0.0 && a.weight.is_finite()) {
                        return Err(Error::Parameter("mixture weights must be >= 0".into()));
                    }
                    if !(a.rate >= 0.0 && a.rate.is_finite()) {
                        return Err(Error::Parameter("mixture rates must be >= 0".into()));
                    }
                }
                if !atoms.iter().any(|a| a.weight > 0.0) {
                    return Err(Error::Parameter(
                        "mixture needs at least one positive weight".into(),
                    ));
                }
                Ok(())
            }
            Family::SqDistance | Family::Linear | Family::ExpInner | Family::Minkowski => Ok(()),
            Family::PowerDistance { p } => {
                if *p > 0.0 && *p <= 2.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("power_distance needs 0 < p <= 2, got {p}")))
                }
            }
            Family::GneitingClassic { g, psi, m } => {
                if *m == 0 {
                    return Err(Error::Parameter("spatial dimension m must be >= 1".into()));
                }
                g.validate()?;
                psi.validate()?;
                match psi {
                    Func1::ExpDecay { c } => positive("psi c", *c)?,
                    Func1::PowerDecay { c, tau } => {
                        positive("psi c", *c)?;
                        positive("psi tau", *tau)?;
                    }
                    other => {
                        return Err(Error::Parameter(format!(
                            "psi must be exp_decay or power_decay, got {other:?}"
                        )))
                    }
                }
                match g {
                    Func1::Affine { a, b } => {
                        positive("g a", *a)?;
                        positive("g b", *b)?;
                    }
                    Func1::OnePlusPower { a, beta } => {
                        positive("g a", *a)?;
                        if !(*beta > 0.0 && *beta <= 1.0) {
                            return Err(Error::Parameter(format!(
                                "g = (1+at)^beta needs beta in (0, 1], got {beta}"
                            )));
                        }
                    }
                    Func1::LogEPlus => {}
                    other => {
                        return Err(Error::Parameter(format!(
                            "g must be affine, one_plus_power or log_e_plus, got {other:?}"
                        )))
                    }
                }
                Ok(())
            }
            Family::GneitingGeneral { a, gamma, m } => {
                if *m == 0 {
                    return Err(Error::Parameter("spatial dimension m must be >= 1".into()));
                }
                a.validate()?;
                gamma.validate()
            }
            Family::Matern { alpha, nu } => {
                positive("alpha", *alpha)?;
                positive("nu", *nu)?;
                if *nu > crate::numerics::special::BESSEL_MAX_ORDER {
                    return Err(Error::Parameter(format!("nu = {nu} exceeds the supported range")));
                }
                Ok(())
            }
            Family::SechPower { r } => positive("r", *r),
            Family::Isotropic { atoms } => {
                for a in atoms {
                    if !(a.weight >= 0.0 && a.weight.is_finite()) {
                        return Err(Error::Parameter("isotropic weights must be >= 0".into()));
                    }
                    if !(a.r >= 0.0 && a.r.is_finite()) {
                        return Err(Error::Parameter("isotropic exponents must be >= 0".into()));
                    }
                }
                if !atoms.iter().any(|a| a.weight > 0.0) {
                    return Err(Error::Parameter(
                        "isotropic kernel needs at least one positive weight".into(),
                    ));
                }
                Ok(())
            }
            Family::InverseLogConditional { l } => l.validate(),
            Family::GammaPowerMatrix { gamma, nus } => {
                check_nus(nus)?;
                gamma.validate()
            }
            Family::MaternMatrix {
                variant,
                a,
                gamma,
                alphas,
                nus,
                m,
            } => {
                check_nus(nus)?;
                let l = nus.len();
                check_square("A coefficients", &a.coeffs, true)?;
                if a.channels() != l {
                    return Err(Error::Parameter(format!(
                        "A has {} channels but {l} smoothness values were given",
                        a.channels()
                    )));
                }
                if let Some(b) = &a.base {
                    b.validate()?;
                }
                gamma.validate()?;
                match variant {
                    MaternVariant::Product => {
                        if alphas.len() != l {
                            return Err(Error::Parameter(format!(
                                "product variant needs {l} alphas, got {}",
                                alphas.len()
                            )));
                        }
                        for &al in alphas {
                            positive("alpha", al)?;
                        }
                        if *m == 0 {
                            return Err(Error::Parameter(
                                "product variant needs spatial dimension m >= 1".into(),
                            ));
                        }
                    }
                    MaternVariant::Hilbert => {
                        if !alphas.is_empty() {
                            return Err(Error::Parameter(
                                "hilbert variant takes its scale from gamma; alphas must be empty"
                                    .into(),
                            ));
                        }
                    }
                }
                for (i, x) in nus.iter().enumerate() {
                    for y in &nus[i..] {
                        if x + y > crate::numerics::special::BESSEL_MAX_ORDER {
                            return Err(Error::Parameter(
                                "nu_i + nu_j exceeds the supported range".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

impl Combinator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Combinator::Schur { left, right } | Combinator::Tensor { left, right } => {
                left.validate()?;
                right.validate()
            }
            Combinator::Rescale { inner, weight } => {
                inner.validate()?;
                weight.validate()
            }
            Combinator::Pullback { inner, map } => {
                inner.validate()?;
                map.validate()
            }
            Combinator::Mixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Parameter("mixture needs at least one atom".into()));
                }
                for a in atoms {
                    if !(a.weight >= 0.0 && a.weight.is_finite()) {
                        return Err(Error::Parameter(format!(
                            "mixture weights must be nonnegative, got {}",
                            a.weight
                        )));
                    }
                    a.kernel.validate()?;
                }
                if !atoms.iter().any(|a| a.weight > 0.0) {
                    return Err(Error::Parameter("mixture weights are all zero".into()));
                }
                Ok(())
            }
            Combinator::Schoenberg { inner, t } => {
                positive("t", *t)?;
                inner.validate()
            }
            Combinator::Flatten { matrix } => matrix.validate(),
        }
    }
}

impl WeightFn {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightFn::Constant { c } => finite("c", *c),
            WeightFn::Affine { coeffs, offset } => {
                finite("offset", *offset)?;
                coeffs.iter().try_for_each(|&c| finite("coeff", c))
            }
            WeightFn::NormExp { c } => finite("c", *c),
            WeightFn::Table { entries } => entries.iter().try_for_each(|e| finite("value", e.value)),
        }
    }
}

impl PointMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            PointMap::Scale { c } => finite("c", *c),
            PointMap::Affine { matrix, offset } => {
                if matrix.len() != offset.len() {
                    return Err(Error::Parameter(
                        "affine map needs one offset per matrix row".into(),
                    ));
                }
                if let Some(first) = matrix.first() {
                    if matrix.iter().any(|r| r.len() != first.len()) {
                        return Err(Error::Parameter("affine map matrix is ragged".into()));
                    }
                }
                matrix
                    .iter()
                    .flatten()
                    .chain(offset)
                    .try_for_each(|&v| finite("affine entry", v))
            }
            _ => Ok(()),
        }
    }
}

impl MatrixKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            MatrixKernel::Constant { a } => check_square("a", a, true),
            MatrixKernel::Gaussian { a, gamma } => {
                check_square("a", a, true)?;
                check_square("gamma", gamma, true)?;
                if a.len() != gamma.len() {
                    return Err(Error::Parameter("a and gamma sizes differ".into()));
                }
                if gamma.iter().flatten().any(|&g| !(g > 0.0)) {
                    return Err(Error::Parameter("gamma entries must be positive".into()));
                }
                Ok(())
            }
            MatrixKernel::Separable { a, base } => {
                check_square("a", a, true)?;
                base.validate()
            }
            MatrixKernel::Entries { k } => {
                let n = k.len();
                if n == 0 {
                    return Err(Error::Parameter("matrix kernel has no channels".into()));
                }
                for row in k {
                    if row.len() != n {
                        return Err(Error::Parameter("entries matrix must be square".into()));
                    }
                }
                for i in 0..n {
                    for j in i..n {
                        k[i][j].validate()?;
                    }
                }
                Ok(())
            }
        }
    }
}
