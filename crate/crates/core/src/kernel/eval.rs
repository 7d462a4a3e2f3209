//! Pointwise evaluation of a [`KernelSpec`].
//!
//! Every formula is arranged so that `eval(x, y)` and `eval(y, x)` perform
//! the same floating-point operations on the same operands, which makes the
//! result bit-exactly symmetric.

use super::point::Point;
use super::spec::{
    Combinator, Family, KernelSpec, MaternVariant, MatrixKernel, PointMap, SiteMatrix, WeightFn,
};
use crate::error::{Error, Result};
use crate::families::matern;
use crate::hyperbolic::{lift, minkowski_form};
use crate::numerics::{dot, ln_gamma, sq_dist};

fn euclidean_pair<'a>(x: &'a Point, y: &'a Point) -> Result<(&'a [f64], &'a [f64])> {
    let a = x.as_euclidean()?;
    let b = y.as_euclidean()?;
    if a.len() != b.len() {
        return Err(Error::Type(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok((a, b))
}

/// Splits two product points and checks the spatial dimensions.
fn product_pair<'a>(
    x: &'a Point,
    y: &'a Point,
    m: Option<u32>,
) -> Result<(&'a Point, &'a Point, f64)> {
    let (u, sx) = x.as_product()?;
    let (v, sy) = y.as_product()?;
    if sx.len() != sy.len() {
        return Err(Error::Type(format!(
            "spatial dimension mismatch: {} vs {}",
            sx.len(),
            sy.len()
        )));
    }
    if let Some(m) = m {
        if sx.len() != m as usize {
            return Err(Error::Type(format!(
                "kernel declares spatial dimension {m}, point has {}",
                sx.len()
            )));
        }
    }
    Ok((u, v, sq_dist(sx, sy)))
}

/// Orders two channel points so that the first channel index is the smaller.
fn channel_pair<'a>(
    x: &'a Point,
    y: &'a Point,
    channels: usize,
) -> Result<(&'a Point, usize, &'a Point, usize)> {
    let (bx, i) = x.as_channel()?;
    let (by, j) = y.as_channel()?;
    for c in [i, j] {
        if c >= channels {
            return Err(Error::Type(format!(
                "channel {c} out of range for a {channels}-channel kernel"
            )));
        }
    }
    if i <= j {
        Ok((bx, i, by, j))
    } else {
        Ok((by, j, bx, i))
    }
}

fn positive_gamma(g: f64) -> Result<f64> {
    if g > 0.0 && g.is_finite() {
        Ok(g)
    } else {
        Err(Error::Domain(format!(
            "gamma(u, v) must be positive, got {g}"
        )))
    }
}

impl SiteMatrix {
    pub fn entry(&self, i: usize, j: usize, u: &Point, v: &Point) -> Result<f64> {
        let c = self.coeffs[i][j];
        match &self.base {
            None => Ok(c),
            Some(b) => Ok(c * b.eval(u, v)?),
        }
    }
}

impl KernelSpec {
    /// `K(x, y)`.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        match self {
            KernelSpec::Leaf(f) => f.eval(x, y),
            KernelSpec::Op(c) => c.eval(x, y),
        }
    }
}

impl Family {
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        match self {
            Family::Constant { c } => Ok(*c),
            Family::Gaussian { sigma } => {
                let (a, b) = euclidean_pair(x, y)?;
                Ok((-sigma * sq_dist(a, b)).exp())
            }
            Family::CmMixture { atoms } => {
                let (a, b) = euclidean_pair(x, y)?;
                let d2 = sq_dist(a, b);
                Ok(atoms.iter().map(|at| at.weight * (-at.rate * d2).exp()).sum())
            }
            Family::SqDistance => {
                let (a, b) = euclidean_pair(x, y)?;
                Ok(sq_dist(a, b))
            }
            Family::PowerDistance { p } => {
                let (a, b) = euclidean_pair(x, y)?;
                Ok(sq_dist(a, b).powf(p / 2.0))
            }
            Family::Linear => {
                let (a, b) = euclidean_pair(x, y)?;
                Ok(dot(a, b))
            }
            Family::ExpInner => {
                let (a, b) = euclidean_pair(x, y)?;
                Ok(dot(a, b).exp())
            }
            Family::Minkowski => minkowski_form(x.as_hyperboloid()?, y.as_hyperboloid()?),
            Family::GneitingClassic { g, psi, m } => {
                let (u, v, dx) = product_pair(x, y, Some(*m))?;
                let (su, sv) = euclidean_pair(u, v)?;
                let gv = g.eval_checked(sq_dist(su, sv))?;
                if !(gv > 0.0) {
                    return Err(Error::Domain(format!("g must be positive, got {gv}")));
                }
                Ok(gv.powf(-(*m as f64) / 2.0) * psi.eval_checked(dx / gv)?)
            }
            Family::GneitingGeneral { a, gamma, m } => {
                let (u, v, dx) = product_pair(x, y, Some(*m))?;
                let g = positive_gamma(gamma.eval(u, v)?)?;
                Ok(a.eval(u, v)? * (-dx / g).exp())
            }
            Family::Matern { alpha, nu } => {
                let (a, b) = euclidean_pair(x, y)?;
                matern(sq_dist(a, b).sqrt(), *alpha, *nu)
            }
            Family::SechPower { r } => {
                let s = minkowski_form(x.as_hyperboloid()?, y.as_hyperboloid()?)?;
                Ok(s.powf(-r))
            }
            Family::Isotropic { atoms } => {
                let s = minkowski_form(x.as_hyperboloid()?, y.as_hyperboloid()?)?;
                Ok(atoms.iter().map(|a| a.weight * s.powf(-a.r)).sum())
            }
            Family::InverseLogConditional { l } => {
                let v = l.eval(x, y)?;
                if !(v >= 1.0 - 1e-12) {
                    return Err(Error::Domain(format!(
                        "log-conditional kernel values must be >= 1, got {v}"
                    )));
                }
                Ok(1.0 / v)
            }
            Family::GammaPowerMatrix { gamma, nus } => {
                let (u, i, v, j) = channel_pair(x, y, nus.len())?;
                let g = positive_gamma(gamma.eval(u, v)?)?;
                let s = nus[i] + nus[j];
                Ok((ln_gamma(s)? - s * g.ln()).exp())
            }
            Family::MaternMatrix {
                variant,
                a,
                gamma,
                alphas,
                nus,
                m,
            } => {
                let (bx, i, by, j) = channel_pair(x, y, nus.len())?;
                let check_m = match variant {
                    MaternVariant::Product => Some(*m),
                    MaternVariant::Hilbert => None,
                };
                let (u, v, dx) = product_pair(bx, by, check_m)?;
                let g = positive_gamma(gamma.eval(u, v)?)?;
                let aij = a.entry(i, j, u, v)?;
                let nu = nus[i] + nus[j];
                let r = dx.sqrt();
                let m_val = match variant {
                    MaternVariant::Product => {
                        let alpha = ((alphas[i] * alphas[i] + alphas[j] * alphas[j]) / 2.0).sqrt();
                        matern(r / g.sqrt(), alpha, nu)?
                    }
                    MaternVariant::Hilbert => matern(r, g.sqrt(), nu)?,
                };
                Ok(aij * m_val)
            }
        }
    }
}

impl Combinator {
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        match self {
            Combinator::Schur { left, right } => Ok(left.eval(x, y)? * right.eval(x, y)?),
            Combinator::Tensor { left, right } => {
                let (u, sx) = x.as_product()?;
                let (v, sy) = y.as_product()?;
                let p = left.eval(u, v)?;
                let q = right.eval(&Point::Euclidean(sx.to_vec()), &Point::Euclidean(sy.to_vec()))?;
                Ok(p * q)
            }
            Combinator::Rescale { inner, weight } => {
                let wx = weight.apply(x)?;
                let wy = weight.apply(y)?;
                Ok(inner.eval(x, y)? * (wx * wy))
            }
            Combinator::Pullback { inner, map } => inner.eval(&map.apply(x)?, &map.apply(y)?),
            Combinator::Mixture { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    acc += a.weight * a.kernel.eval(x, y)?;
                }
                Ok(acc)
            }
            Combinator::Schoenberg { inner, t } => Ok((-t * inner.eval(x, y)?).exp()),
            Combinator::Flatten { matrix } => {
                let (bx, i, by, j) = channel_pair(x, y, matrix.channels())?;
                matrix.entry(i, j, bx, by)
            }
        }
    }
}

impl MatrixKernel {
    /// `K_ij(x, y)` for `i ≤ j`.
    pub fn entry(&self, i: usize, j: usize, x: &Point, y: &Point) -> Result<f64> {
        match self {
            MatrixKernel::Constant { a } => Ok(a[i][j]),
            MatrixKernel::Gaussian { a, gamma } => {
                let (p, q) = euclidean_pair(x, y)?;
                Ok(a[i][j] * (-sq_dist(p, q) / gamma[i][j]).exp())
            }
            MatrixKernel::Separable { a, base } => Ok(a[i][j] * base.eval(x, y)?),
            MatrixKernel::Entries { k } => k[i][j].eval(x, y),
        }
    }
}

impl WeightFn {
    pub fn apply(&self, p: &Point) -> Result<f64> {
        let v = match self {
            WeightFn::Constant { c } => *c,
            WeightFn::Affine { coeffs, offset } => {
                let x = p.as_euclidean()?;
                if x.len() != coeffs.len() {
                    return Err(Error::Type(format!(
                        "affine weight expects dimension {}, got {}",
                        coeffs.len(),
                        x.len()
                    )));
                }
                dot(coeffs, x) + offset
            }
            WeightFn::NormExp { c } => {
                let x = p.as_euclidean()?;
                (-c * dot(x, x)).exp()
            }
            WeightFn::Table { entries } => {
                let key = p.key();
                entries
                    .iter()
                    .find(|e| e.point.key() == key)
                    .map(|e| e.value)
                    .ok_or_else(|| Error::Domain("point missing from weight table".into()))?
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical {
                message: "weight function returned a non-finite value".into(),
                partial: v,
            })
        }
    }
}

impl PointMap {
    pub fn apply(&self, p: &Point) -> Result<Point> {
        match self {
            PointMap::Identity => Ok(p.clone()),
            PointMap::Scale { c } => {
                let x = p.as_euclidean()?;
                Ok(Point::Euclidean(x.iter().map(|v| c * v).collect()))
            }
            PointMap::Affine { matrix, offset } => {
                let x = p.as_euclidean()?;
                if let Some(row) = matrix.iter().find(|r| r.len() != x.len()) {
                    return Err(Error::Type(format!(
                        "affine map expects dimension {}, got {}",
                        row.len(),
                        x.len()
                    )));
                }
                Ok(Point::Euclidean(
                    matrix
                        .iter()
                        .zip(offset)
                        .map(|(row, b)| dot(row, x) + b)
                        .collect(),
                ))
            }
            PointMap::Constant { point } => Ok(point.clone()),
            PointMap::Lift => Ok(Point::Hyperboloid(lift(p.as_euclidean()?)?)),
            PointMap::Site => Ok(p.as_product()?.0.clone()),
            PointMap::Spatial => Ok(Point::Euclidean(p.as_product()?.1.to_vec())),
            PointMap::Table { entries } => {
                let key = p.key();
                entries
                    .iter()
                    .find(|e| e.from.key() == key)
                    .map(|e| e.to.clone())
                    .ok_or_else(|| Error::Domain("point missing from map table".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::spec::{MixtureAtom, RateAtom};

    fn e(v: &[f64]) -> Point {
        Point::Euclidean(v.to_vec())
    }

    fn gauss(s: f64) -> KernelSpec {
        Family::Gaussian { sigma: s }.into()
    }

    #[test]
    fn gaussian_zero_distance() {
        assert_eq!(gauss(1.0).eval(&e(&[0.3, 2.0]), &e(&[0.3, 2.0])).unwrap(), 1.0);
    }

    #[test]
    fn schur_of_two_gaussians() {
        let k: KernelSpec = Combinator::Schur {
            left: Box::new(gauss(1.0)),
            right: Box::new(gauss(1.0)),
        }
        .into();
        let v = k.eval(&e(&[0.0]), &e(&[1.0])).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.135_335_283_236_612_7).abs() < 1e-15);
    }

    #[test]
    fn mixture_of_two_gaussians() {
        let k: KernelSpec = Combinator::Mixture {
            atoms: vec![
                MixtureAtom { weight: 0.5, kernel: gauss(1.0) },
                MixtureAtom { weight: 0.5, kernel: gauss(2.0) },
            ],
        }
        .into();
        let v = k.eval(&e(&[0.0]), &e(&[1.0])).unwrap();
        let hand = 0.5 * (-1.0f64).exp() + 0.5 * (-2.0f64).exp();
        assert!((v - hand).abs() < 1e-15);
        assert!((v - 0.251_607_362_204_027_5).abs() < 1e-12);
    }

    #[test]
    fn domain_mismatch_is_type_error() {
        let h = Point::Hyperboloid(lift(&[0.0]).unwrap());
        assert!(matches!(gauss(1.0).eval(&e(&[0.0]), &h), Err(Error::Type(_))));
        assert!(matches!(gauss(1.0).eval(&e(&[0.0]), &e(&[0.0, 1.0])), Err(Error::Type(_))));
        let sech: KernelSpec = Family::SechPower { r: 1.0 }.into();
        assert!(matches!(sech.eval(&e(&[0.0]), &e(&[0.0])), Err(Error::Type(_))));
    }

    #[test]
    fn channel_out_of_range() {
        let k: KernelSpec = Combinator::Flatten {
            matrix: MatrixKernel::Constant { a: vec![vec![1.0]] },
        }
        .into();
        let p = Point::channel(e(&[0.0]), 0);
        let q = Point::channel(e(&[0.0]), 1);
        assert!(matches!(k.eval(&p, &q), Err(Error::Type(_))));
    }

    #[test]
    fn rescale_weight_errors() {
        let k: KernelSpec = Combinator::Rescale {
            inner: Box::new(gauss(1.0)),
            weight: WeightFn::NormExp { c: -1e6 },
        }
        .into();
        let r = k.eval(&e(&[10.0]), &e(&[10.0]));
        assert!(matches!(r, Err(Error::Numerical { .. })));
    }

    #[test]
    fn cm_mixture_hand_value() {
        let k: KernelSpec = Family::CmMixture {
            atoms: vec![RateAtom { weight: 0.3, rate: 1.0 }, RateAtom { weight: 0.7, rate: 4.0 }],
        }
        .into();
        let v = k.eval(&e(&[0.0]), &e(&[1.0])).unwrap();
        let hand = 0.3 * (-1.0f64).exp() + 0.7 * (-4.0f64).exp();
        assert!((v - hand).abs() < 1e-15);
        assert!((v - 0.123_184_6).abs() < 1e-6);
    }
}
