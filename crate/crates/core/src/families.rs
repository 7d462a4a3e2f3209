//! Concrete kernel families: Gaussian, completely monotone radial
//! mixtures, the Gneiting class, Matérn (scalar and matrix valued), the
//! gamma-power matrix kernel and the matrix Gaussian classifier.

use serde::{Deserialize, Serialize};

use crate::cnd::{
    check_cnd_matrix, check_metrizable, default_grid, probe_bernstein, probe_completely_monotone,
    DEFAULT_CND_TOL,
};
use crate::error::{Error, Result};
use crate::functions::Func1;
use crate::kernel::spec::{Family, KernelSpec, MaternVariant, RateAtom, SiteMatrix};
use crate::kernel::{gram, Point};
use crate::numerics::{
    classify_psd, classify_psd_default, default_tol_scale, ln_bessel_k, ln_gamma,
    quad_semi_infinite_with, singular_values, sq_dist, PsdClass, PsdVerdict, QuadTolerance,
    SymMatrix,
};
use crate::report::{ClassReport, Witness};

fn validated(k: KernelSpec) -> Result<KernelSpec> {
    k.validate()?;
    Ok(k)
}

/// `e^{−σ‖x−y‖²}`.
pub fn gaussian(sigma: f64) -> Result<KernelSpec> {
    validated(Family::Gaussian { sigma }.into())
}

/// `Σ w_i e^{−r_i‖x−y‖²}`.
pub fn radial_cm_mixture(atoms: Vec<RateAtom>) -> Result<KernelSpec> {
    validated(Family::CmMixture { atoms }.into())
}

/// The mixing measure charges `(0, ∞)`, i.e. the profile is not constant.
pub fn cm_mixture_is_strict(atoms: &[RateAtom]) -> bool {
    atoms.iter().any(|a| a.weight > 0.0 && a.rate > 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum GneitingSpec {
    /// `g(‖u−v‖²)^{−m/2} ψ(‖x−y‖² / g(‖u−v‖²))`
    Classic { g: Func1, psi: Func1, m: u32 },
    /// `A(u,v) e^{−‖x−y‖²/γ(u,v)}`
    General { a: KernelSpec, gamma: KernelSpec, m: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GneitingConstruction {
    pub kernel: KernelSpec,
    /// Failed necessary-condition probes; evaluation is still permitted.
    pub warnings: Vec<String>,
}

/// Builds a Gneiting kernel. For the classic form `g` is probed as a
/// positive Bernstein function and `ψ` as a nonconstant completely
/// monotone function on [`default_grid`].
pub fn gneiting(spec: GneitingSpec) -> Result<GneitingConstruction> {
    let mut warnings = Vec::new();
    let kernel: KernelSpec = match spec {
        GneitingSpec::Classic { g, psi, m } => {
            let grid = default_grid();
            let gb = probe_bernstein(&g, &grid, 6)?;
            if !gb.pass() {
                warnings.push(format!(
                    "g failed the Bernstein probe ({} violations)",
                    gb.violations.len()
                ));
            }
            if !(g.eval(0.0) > 0.0) {
                warnings.push("g(0) is not positive".into());
            }
            let pc = probe_completely_monotone(&psi, &grid, 6)?;
            if !pc.pass() {
                warnings.push(format!(
                    "psi failed the completely monotone probe ({} violations)",
                    pc.violations.len()
                ));
            }
            if psi.eval(grid[0]) == psi.eval(grid[grid.len() - 1]) {
                warnings.push("psi looks constant on the probe grid".into());
            }
            Family::GneitingClassic { g, psi, m }.into()
        }
        GneitingSpec::General { a, gamma, m } => Family::GneitingGeneral {
            a: Box::new(a),
            gamma: Box::new(gamma),
            m,
        }
        .into(),
    };
    kernel.validate()?;
    Ok(GneitingConstruction { kernel, warnings })
}

/// Sample probe of the generalized Gneiting hypotheses: `γ > 0`, `γ` CND
/// and `A(u,v) γ(u,v)^{m/2}` PSD on the given sites.
pub fn probe_gneiting_general(
    a: &KernelSpec,
    gamma: &KernelSpec,
    m: u32,
    sites: &[Point],
) -> Result<ClassReport> {
    let g = gram(gamma, sites)?.matrix;
    for i in 0..g.n() {
        for j in i..g.n() {
            if !(g.get(i, j) > 0.0) {
                return Err(Error::Domain(format!(
                    "gamma must be positive, got {} at ({i}, {j})",
                    g.get(i, j)
                )));
            }
        }
    }
    let am = gram(a, sites)?.matrix;
    let c = SymMatrix::from_upper_fn(g.n(), |i, j| {
        Ok(am.get(i, j) * g.get(i, j).powf(m as f64 / 2.0))
    })?;
    let cv = classify_psd_default(&c)?;
    let cnd_ok = if g.n() >= 2 {
        check_cnd_matrix(&g, DEFAULT_CND_TOL)?.is_cnd
    } else {
        true
    };
    Ok(ClassReport::new("gneiting_general_hypotheses", cv.class.is_psd() && cnd_ok)
        .tol("psd_tol_used", cv.tol_used)
        .tol("cnd_tol", DEFAULT_CND_TOL)
        .num("c_lambda_min", cv.lambda_min)
        .num("gamma_cnd", if cnd_ok { 1.0 } else { 0.0 }))
}

/// Matérn parameters: inverse scale `alpha` and smoothness `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub alpha: f64,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(alpha: f64, nu: f64) -> Result<Self> {
        validated(Family::Matern { alpha, nu }.into())?;
        Ok(MaternParams { alpha, nu })
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        matern(r, self.alpha, self.nu)
    }

    pub fn oracle(&self, r: f64) -> Result<f64> {
        matern_oracle(r, self.alpha, self.nu)
    }
}

fn check_r(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("distance must be finite and >= 0, got {r}")))
    }
}

/// `M(r; α, ν) = 2^{1−ν} (αr)^ν K_ν(αr) / Γ(ν)`, evaluated in log space;
/// `M(0) = 1`.
pub fn matern(r: f64, alpha: f64, nu: f64) -> Result<f64> {
    check_r(r)?;
    if !(alpha > 0.0 && nu > 0.0) {
        return Err(Error::Parameter(format!(
            "matern needs alpha > 0 and nu > 0, got ({alpha}, {nu})"
        )));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let z = alpha * r;
    let ln_m = (1.0 - nu) * std::f64::consts::LN_2 + nu * z.ln() + ln_bessel_k(nu, z)?
        - ln_gamma(nu)?;
    Ok(ln_m.exp().min(1.0))
}

/// Quadrature of the Gaussian scale mixture
/// `∫₀^∞ e^{−r²t} (α²/4)^ν t^{−1−ν} e^{−α²/(4t)} / Γ(ν) dt`.
pub fn matern_oracle(r: f64, alpha: f64, nu: f64) -> Result<f64> {
    check_r(r)?;
    if !(alpha > 0.0 && nu > 0.0) {
        return Err(Error::Parameter(format!(
            "matern needs alpha > 0 and nu > 0, got ({alpha}, {nu})"
        )));
    }
    let a4 = alpha * alpha / 4.0;
    let c = nu * a4.ln() - ln_gamma(nu)?;
    let r2 = r * r;
    quad_semi_infinite_with(
        |t| (c - (1.0 + nu) * t.ln() - a4 / t - r2 * t).exp(),
        QuadTolerance::relative(1e-12),
    )
}

/// `C^{A,γ}`: `A_ij(u,v) M(‖x−y‖/γ(u,v)^{1/2}; ((α_i²+α_j²)/2)^{1/2}, ν_i+ν_j)`
/// on channel points over `(site, ℝ^m)` product points.
pub fn matern_product_matrix(
    a: SiteMatrix,
    gamma: KernelSpec,
    alphas: Vec<f64>,
    nus: Vec<f64>,
    m: u32,
) -> Result<KernelSpec> {
    validated(
        Family::MaternMatrix {
            variant: MaternVariant::Product,
            a,
            gamma: Box::new(gamma),
            alphas,
            nus,
            m,
        }
        .into(),
    )
}

/// `𝓜_{A,γ}`: `A_ij(u,v) M(‖x−y‖; γ(u,v)^{1/2}, ν_i+ν_j)`.
pub fn matern_hilbert_matrix(a: SiteMatrix, gamma: KernelSpec, nus: Vec<f64>) -> Result<KernelSpec> {
    validated(
        Family::MaternMatrix {
            variant: MaternVariant::Hilbert,
            a,
            gamma: Box::new(gamma),
            alphas: vec![],
            nus,
            m: 0,
        }
        .into(),
    )
}

/// `[Γ(ν_i+ν_j) / γ(u,v)^{ν_i+ν_j}]`.
pub fn gamma_power_matrix(gamma: KernelSpec, nus: Vec<f64>) -> Result<KernelSpec> {
    validated(
        Family::GammaPowerMatrix {
            gamma: Box::new(gamma),
            nus,
        }
        .into(),
    )
}

/// 2×2 interpolation matrix of two duplicated channels at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelWitness {
    pub channels: (usize, usize),
    pub site: usize,
    pub matrix: Vec<Vec<f64>>,
    pub lambda_min: f64,
    /// `lambda_min ≤ 1e-10 · lambda_max`.
    pub singular: bool,
}

/// Strictness classification of a matrix Matérn or gamma-power kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixStrictnessReport {
    pub family: String,
    /// The theorem's SPD condition.
    pub spd: bool,
    pub diagonal_positive: bool,
    /// Channel pairs `i < j` with identical parameters.
    pub duplicates: Vec<(usize, usize)>,
    pub witness: Option<ChannelWitness>,
    /// Standing hypotheses probed on the sites.
    pub hypotheses: Vec<ClassReport>,
}

const SINGULAR_REL: f64 = 1e-10;

fn two_by_two(k: &KernelSpec, p: &Point, q: &Point) -> Result<(Vec<Vec<f64>>, f64, bool)> {
    let g = gram(k, &[p.clone(), q.clone()])?.matrix;
    let v = classify_psd(&g, default_tol_scale(2))?;
    let singular = v.lambda_min <= SINGULAR_REL * v.lambda_max.abs().max(f64::MIN_POSITIVE);
    Ok((g.to_rows(), v.lambda_min, singular))
}

fn psd_hypothesis(name: &str, c: &SymMatrix) -> Result<ClassReport> {
    let v = classify_psd_default(c)?;
    Ok(ClassReport::new(name, v.class.is_psd())
        .tol("tol_used", v.tol_used)
        .num("lambda_min", v.lambda_min)
        .num("lambda_max", v.lambda_max))
}

fn gamma_hypotheses(gamma: &KernelSpec, sites: &[Point]) -> Result<(SymMatrix, Vec<ClassReport>)> {
    let g = gram(gamma, sites)?.matrix;
    let mut min = f64::INFINITY;
    for i in 0..g.n() {
        for j in i..g.n() {
            min = min.min(g.get(i, j));
        }
    }
    if !(min > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive on the sites, min {min}")));
    }
    let mut out = vec![ClassReport::new("gamma_positive", true).num("min", min)];
    if g.n() >= 2 {
        let c = check_cnd_matrix(&g, DEFAULT_CND_TOL)?;
        out.push(
            ClassReport::new("gamma_cnd", c.is_cnd)
                .tol("tol_used", c.tol_used)
                .num("lambda_max_projected", c.lambda_max_projected),
        );
        out.push(check_metrizable(&g, Some(sites), 1e-12)?);
    }
    let inf_diag = g.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    out.push(ClassReport::new("gamma_diagonal_bounded_below", inf_diag > 0.0).num("min", inf_diag));
    Ok((g, out))
}

/// Classifies a `matern_matrix` or `gamma_power_matrix` kernel on the
/// given sites. Sites are the `u` arguments; for Matérn kernels the witness
/// sample point is `(u_0, 0)`.
pub fn classify_matrix_kernel(kernel: &KernelSpec, sites: &[Point]) -> Result<MatrixStrictnessReport> {
    if sites.is_empty() {
        return Err(Error::Input("at least one site is required".into()));
    }
    let family = match kernel {
        KernelSpec::Leaf(f) => f,
        _ => return Err(Error::Type("expected a matrix family leaf".into())),
    };
    match family {
        Family::MaternMatrix {
            variant,
            a,
            gamma,
            alphas,
            nus,
            m,
        } => {
            let l = nus.len();
            let (g, mut hypotheses) = gamma_hypotheses(gamma, sites)?;
            let s = sites.len();
            let mut lg = Vec::with_capacity(l);
            for &nu in nus {
                lg.push(ln_gamma(2.0 * nu)?);
            }
            let c = SymMatrix::from_upper_fn(s * l, |p, q| {
                let (u, i) = (p / l, p % l);
                let (v, j) = (q / l, q % l);
                let aij = a.entry(i.min(j), i.max(j), &sites[u], &sites[v])?;
                let nij = nus[i] + nus[j];
                let gv = g.get(u, v);
                let ln_rest = match variant {
                    MaternVariant::Product => {
                        let ln_n = |k: usize| {
                            -nus[k] * std::f64::consts::LN_2 + 0.5 * lg[k] - nus[k] * alphas[k].ln()
                        };
                        ln_n(i) + ln_n(j) + nij * (alphas[i] + alphas[j]).ln() - ln_gamma(nij)?
                            + (*m as f64 / 2.0) * gv.ln()
                    }
                    MaternVariant::Hilbert => nij * gv.ln() - ln_gamma(nij)?,
                };
                Ok(aij * ln_rest.exp())
            })?;
            hypotheses.insert(0, psd_hypothesis("c_matrix_psd", &c)?);
            let mut diagonal_positive = true;
            for site in sites {
                for i in 0..l {
                    if !(a.entry(i, i, site, site)? > 0.0) {
                        diagonal_positive = false;
                    }
                }
            }
            let mut duplicates = Vec::new();
            for i in 0..l {
                for j in i + 1..l {
                    let same = match variant {
                        MaternVariant::Product => alphas[i] == alphas[j] && nus[i] == nus[j],
                        MaternVariant::Hilbert => nus[i] == nus[j],
                    };
                    if same {
                        duplicates.push((i, j));
                    }
                }
            }
            let dim = (*m).max(1) as usize;
            let witness = match duplicates.first() {
                Some(&(i, j)) => {
                    let base = Point::product(sites[0].clone(), vec![0.0; dim])?;
                    let (matrix, lambda_min, singular) = two_by_two(
                        kernel,
                        &Point::channel(base.clone(), i),
                        &Point::channel(base, j),
                    )?;
                    Some(ChannelWitness {
                        channels: (i, j),
                        site: 0,
                        matrix,
                        lambda_min,
                        singular,
                    })
                }
                None => None,
            };
            Ok(MatrixStrictnessReport {
                family: match variant {
                    MaternVariant::Product => "matern_product".into(),
                    MaternVariant::Hilbert => "matern_hilbert".into(),
                },
                spd: diagonal_positive && duplicates.is_empty(),
                diagonal_positive,
                duplicates,
                witness,
                hypotheses,
            })
        }
        Family::GammaPowerMatrix { gamma, nus } => {
            let (_, hypotheses) = gamma_hypotheses(gamma, sites)?;
            let l = nus.len();
            let mut duplicates = Vec::new();
            for i in 0..l {
                for j in i + 1..l {
                    if nus[i] == nus[j] {
                        duplicates.push((i, j));
                    }
                }
            }
            let witness = match duplicates.first() {
                Some(&(i, j)) => {
                    let (matrix, lambda_min, singular) = two_by_two(
                        kernel,
                        &Point::channel(sites[0].clone(), i),
                        &Point::channel(sites[0].clone(), j),
                    )?;
                    Some(ChannelWitness {
                        channels: (i, j),
                        site: 0,
                        matrix,
                        lambda_min,
                        singular,
                    })
                }
                None => None,
            };
            Ok(MatrixStrictnessReport {
                family: "gamma_power".into(),
                spd: duplicates.is_empty(),
                diagonal_positive: true,
                duplicates,
                witness,
                hypotheses,
            })
        }
        _ => Err(Error::Type(
            "expected a matern_matrix or gamma_power_matrix kernel".into(),
        )),
    }
}

/// Coefficients `a` and exponents `Γ` of the matrix Gaussian
/// `[a_μν e^{−‖x−y‖²/γ_μν}]` on `ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixGaussianInstance {
    pub a: SymMatrix,
    pub gamma: SymMatrix,
    pub m: u32,
}

impl MatrixGaussianInstance {
    /// `C = [a_μν γ_μν^{m/2}]`.
    pub fn c_matrix(&self) -> Result<SymMatrix> {
        let half = self.m as f64 / 2.0;
        SymMatrix::from_upper_fn(self.a.n(), |i, j| {
            Ok(self.a.get(i, j) * self.gamma.get(i, j).powf(half))
        })
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        crate::kernel::flatten(crate::kernel::MatrixKernel::Gaussian {
            a: self.a.to_rows(),
            gamma: self.gamma.to_rows(),
        })
    }

    /// Same instance with channels reordered: new channel `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.a.n();
        Ok(MatrixGaussianInstance {
            a: SymMatrix::from_upper_fn(n, |i, j| Ok(self.a.get(perm[i], perm[j])))?,
            gamma: SymMatrix::from_upper_fn(n, |i, j| Ok(self.gamma.get(perm[i], perm[j])))?,
            m: self.m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixGaussianReport {
    /// `a` is positive definite.
    pub spd: bool,
    /// Every class block `C_F` is positive definite.
    pub c0_universal: bool,
    /// Classes of `2γ_μν = γ_μμ + γ_νν`, each sorted, ordered by first member.
    pub classes: Vec<Vec<usize>>,
    pub failing_class: Option<Vec<usize>>,
    pub a_verdict: PsdVerdict,
    pub c_verdict: PsdVerdict,
    pub gamma_lambda_max_projected: f64,
    pub class_tol_used: f64,
}

/// Default relative tolerance of the class relation.
pub const CLASS_REL_TOL: f64 = 1e-9;

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut k = i;
    while parent[k] != r {
        let next = parent[k];
        parent[k] = r;
        k = next;
    }
    r
}

/// Checks the hypotheses (`C` PSD, `Γ` CND), then evaluates both
/// classification conditions. `tol` is relative to `max|Γ|`.
pub fn classify_matrix_gaussian(inst: &MatrixGaussianInstance, tol: Option<f64>) -> Result<MatrixGaussianReport> {
    let l = inst.a.n();
    if l == 0 || inst.gamma.n() != l {
        return Err(Error::Input("a and gamma must be nonempty and of equal size".into()));
    }
    inst.a.check_finite()?;
    inst.gamma.check_finite()?;
    for i in 0..l {
        for j in i..l {
            if !(inst.gamma.get(i, j) > 0.0) {
                return Err(Error::Parameter(format!(
                    "gamma entries must be positive, got {} at ({i}, {j})",
                    inst.gamma.get(i, j)
                )));
            }
        }
    }
    let c = inst.c_matrix()?;
    let c_verdict = classify_psd_default(&c)?;
    if !c_verdict.class.is_psd() {
        return Err(Error::Precondition(format!(
            "C = [a γ^(m/2)] is not positive semidefinite (lambda_min {:e})",
            c_verdict.lambda_min
        )));
    }
    let gamma_lambda_max_projected = if l >= 2 {
        let r = check_cnd_matrix(&inst.gamma, DEFAULT_CND_TOL)?;
        if !r.is_cnd {
            return Err(Error::Precondition(format!(
                "Gamma is not conditionally negative definite (projected lambda_max {:e})",
                r.lambda_max_projected
            )));
        }
        r.lambda_max_projected
    } else {
        0.0
    };
    let a_verdict = classify_psd_default(&inst.a)?;
    let spd = a_verdict.class == PsdClass::Pd;

    let rel = tol.unwrap_or(CLASS_REL_TOL);
    if !(rel >= 0.0) {
        return Err(Error::Parameter("class tolerance must be nonnegative".into()));
    }
    let class_tol_used = rel * inst.gamma.max_abs();
    let g = &inst.gamma;
    let related = |i: usize, j: usize| {
        (2.0 * g.get(i, j) - g.get(i, i) - g.get(j, j)).abs() <= class_tol_used
    };
    let mut parent: Vec<usize> = (0..l).collect();
    for i in 0..l {
        for j in i + 1..l {
            if related(i, j) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; l];
    for i in 0..l {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[root_of[r]].push(i);
    }
    for cls in &classes {
        for (p, &i) in cls.iter().enumerate() {
            for &j in &cls[p + 1..] {
                if !related(i, j) {
                    return Err(Error::IllConditioned(format!(
                        "class relation is not transitive at channels ({i}, {j})"
                    )));
                }
            }
        }
    }
    let mut failing_class = None;
    for cls in &classes {
        let v = classify_psd_default(&c.submatrix(cls))?;
        if v.class != PsdClass::Pd {
            failing_class = Some(cls.clone());
            break;
        }
    }
    Ok(MatrixGaussianReport {
        spd,
        c0_universal: failing_class.is_none(),
        classes,
        failing_class,
        a_verdict,
        c_verdict,
        gamma_lambda_max_projected,
        class_tol_used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rows: usize,
    pub cols: usize,
    pub sv_max: f64,
    pub sv_min: f64,
    pub full_rank: bool,
    pub rel_tol: f64,
}

/// Evaluation matrix of `e^{−σ‖c − ·‖²}` over every `(σ, c)` on the grid,
/// with its extreme singular values. Full rank means
/// `sv_min > rel_tol · sv_max`.
pub fn direct_sum_rank_probe(
    sigmas: &[f64],
    centers: &[Vec<f64>],
    grid: &[Vec<f64>],
    rel_tol: f64,
) -> Result<RankReport> {
    if sigmas.is_empty() || centers.is_empty() || grid.is_empty() {
        return Err(Error::Input("rank probe needs sigmas, centers and grid points".into()));
    }
    let d = centers[0].len();
    if centers.iter().chain(grid).any(|p| p.len() != d) {
        return Err(Error::Type("rank probe points must share one dimension".into()));
    }
    for &s in sigmas {
        if !(s > 0.0) {
            return Err(Error::Parameter("sigmas must be positive".into()));
        }
    }
    let mut rows = Vec::with_capacity(sigmas.len() * centers.len());
    for &s in sigmas {
        for c in centers {
            rows.push(grid.iter().map(|x| (-s * sq_dist(c, x)).exp()).collect::<Vec<f64>>());
        }
    }
    let sv = singular_values(&rows)?;
    let sv_max = sv[0];
    let sv_min = *sv.last().expect("nonempty");
    Ok(RankReport {
        rows: rows.len(),
        cols: grid.len(),
        sv_max,
        sv_min,
        full_rank: sv_min > rel_tol * sv_max,
        rel_tol,
    })
}

impl From<&MatrixGaussianReport> for ClassReport {
    fn from(r: &MatrixGaussianReport) -> Self {
        ClassReport::new("matrix_gaussian_spd", r.spd)
            .with_witness(r.failing_class.clone().map(|indices| Witness::IndexSet { indices }))
            .tol("class_tol_used", r.class_tol_used)
            .tol("psd_tol_used", r.a_verdict.tol_used)
            .num("c0_universal", if r.c0_universal { 1.0 } else { 0.0 })
            .num("a_lambda_min", r.a_verdict.lambda_min)
            .num("c_lambda_min", r.c_verdict.lambda_min)
            .num("classes", r.classes.len() as f64)
    }
}
