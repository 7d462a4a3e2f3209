use rayon::prelude::*;
use serde::Serialize;

use super::point::Point;
use super::spec::KernelSpec;
use crate::error::{Error, Result};
use crate::numerics::{classify_psd, default_tol_scale, PsdVerdict, SymMatrix};

/// Interpolation matrix `[K(x_i, x_j)]` of a point sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramMatrix {
    pub points: Vec<Point>,
    pub matrix: SymMatrix,
    pub verdict: Option<PsdVerdict>,
}

impl GramMatrix {
    /// Populates `verdict`; `tol_scale` defaults to `1e-10 * n`.
    pub fn classify(&mut self, tol_scale: Option<f64>) -> Result<&PsdVerdict> {
        let tol = tol_scale.unwrap_or_else(|| default_tol_scale(self.matrix.n()));
        let v = classify_psd(&self.matrix, tol)?;
        Ok(self.verdict.insert(v))
    }
}

fn checked_eval(spec: &KernelSpec, x: &Point, y: &Point, i: usize, j: usize) -> Result<f64> {
    match spec.eval(x, y) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(Error::Numerical {
            message: "kernel value is not finite".into(),
            partial: v,
        }
        .at_pair(i, j)),
        Err(e) => Err(e.at_pair(i, j)),
    }
}

/// Assembles the Gram matrix, evaluating each unordered pair once.
///
/// Rows are computed in parallel; the first failing pair in row-major order
/// is reported, independent of scheduling.
pub fn gram(spec: &KernelSpec, points: &[Point]) -> Result<GramMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Input("gram needs at least one point".into()));
    }
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| checked_eval(spec, &points[i], &points[j], i, j))
                .collect()
        })
        .collect();
    let mut upper = Vec::with_capacity(n);
    for r in rows {
        upper.push(r?);
    }
    let matrix = SymMatrix::from_upper_fn(n, |i, j| Ok(upper[i][j - i]))?;
    Ok(GramMatrix {
        points: points.to_vec(),
        matrix,
        verdict: None,
    })
}

/// [`gram`] followed by [`GramMatrix::classify`].
pub fn gram_checked(
    spec: &KernelSpec,
    points: &[Point],
    tol_scale: Option<f64>,
) -> Result<GramMatrix> {
    let mut g = gram(spec, points)?;
    g.classify(tol_scale)?;
    Ok(g)
}

/// Rectangular matrix `[K(x_i, y_j)]`.
pub fn cross_matrix(spec: &KernelSpec, xs: &[Point], ys: &[Point]) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Result<Vec<f64>>> = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            ys.iter()
                .enumerate()
                .map(|(j, y)| checked_eval(spec, x, y, i, j))
                .collect()
        })
        .collect();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::spec::{Family, MatrixKernel};
    use crate::kernel::{flatten, mixture, pullback, rescale, schur, tensor, PointMap, WeightFn};
    use crate::numerics::PsdClass;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(v: &[f64]) -> Point {
        Point::Euclidean(v.to_vec())
    }

    fn gauss(s: f64) -> KernelSpec {
        Family::Gaussian { sigma: s }.into()
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
        (0..n)
            .map(|_| e(&(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn single_point_gram() {
        let g = gram(&gauss(1.0), &[e(&[0.3])]).unwrap();
        assert_eq!(g.matrix.to_rows(), vec![vec![1.0]]);
    }

    #[test]
    fn two_point_gram_is_pd() {
        let g = gram_checked(&gauss(1.0), &[e(&[0.0]), e(&[1.0])], None).unwrap();
        let v = (-1.0f64).exp();
        assert_eq!(g.matrix.to_rows(), vec![vec![1.0, v], vec![v, 1.0]]);
        assert_eq!(g.verdict.unwrap().class, PsdClass::Pd);
    }

    #[test]
    fn flatten_constant_examples() {
        let k = flatten(MatrixKernel::Constant { a: vec![vec![1.0, 1.0], vec![1.0, 1.0]] }).unwrap();
        let pts = vec![Point::channel(e(&[0.0]), 0), Point::channel(e(&[0.0]), 1)];
        let g = gram_checked(&k, &pts, None).unwrap();
        assert_eq!(g.matrix.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(g.verdict.unwrap().class, PsdClass::Psd);

        let k = flatten(MatrixKernel::Constant { a: vec![vec![2.0, 1.0], vec![1.0, 2.0]] }).unwrap();
        let g = gram_checked(&k, &pts, None).unwrap();
        assert_eq!(g.verdict.unwrap().class, PsdClass::Pd);

        let one = flatten(MatrixKernel::Separable { a: vec![vec![1.0]], base: Box::new(gauss(1.0)) }).unwrap();
        let p = Point::channel(e(&[0.0]), 0);
        let q = Point::channel(e(&[1.0]), 0);
        assert_eq!(one.eval(&p, &q).unwrap(), gauss(1.0).eval(&e(&[0.0]), &e(&[1.0])).unwrap());
    }

    #[test]
    fn error_reports_first_pair() {
        let pts = vec![e(&[0.0]), e(&[1.0]), e(&[0.0, 1.0])];
        match gram(&gauss(1.0), &pts) {
            Err(Error::AtPair { i: 0, j: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(gram(&gauss(1.0), &[]), Err(Error::Input(_))));
    }

    #[test]
    fn schur_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = KernelSpec::constant(1.0);
        let pts = random_points(&mut rng, 20, 2);
        for w in pts.windows(2) {
            let k = gauss(0.7);
            assert_eq!(schur(k.clone(), one.clone()).eval(&w[0], &w[1]).unwrap(), k.eval(&w[0], &w[1]).unwrap());
            let s = schur(gauss(0.3), gauss(1.1)).eval(&w[0], &w[1]).unwrap();
            assert!((s - gauss(1.4).eval(&w[0], &w[1]).unwrap()).abs() < 1e-14);
        }
        let g = gram_checked(&schur(gauss(1.0), gauss(2.0)), &pts[..10], None).unwrap();
        assert!(g.verdict.unwrap().class.is_psd());
    }

    #[test]
    fn tensor_examples() {
        let k = tensor(gauss(1.0), gauss(1.0));
        let x = Point::product(e(&[0.0]), vec![0.0]).unwrap();
        let y = Point::product(e(&[1.0]), vec![1.0]).unwrap();
        assert!((k.eval(&x, &y).unwrap() - (-2.0f64).exp()).abs() < 1e-15);

        let t1 = tensor(KernelSpec::constant(1.0), gauss(0.5));
        assert_eq!(t1.eval(&x, &y).unwrap(), gauss(0.5).eval(&e(&[0.0]), &e(&[1.0])).unwrap());

        // Kronecker structure on a 3x3 grid
        let sites: Vec<Point> = [0.0, 0.5, 1.3].iter().map(|v| e(&[*v])).collect();
        let space: Vec<Point> = [0.0, 0.8, 2.0].iter().map(|v| e(&[*v])).collect();
        let mut pts = Vec::new();
        for s in &sites {
            for x in &space {
                pts.push(Point::product(s.clone(), x.as_euclidean().unwrap().to_vec()).unwrap());
            }
        }
        let g = gram_checked(&k, &pts, None).unwrap();
        let gs = gram(&gauss(1.0), &sites).unwrap().matrix;
        let gx = gram(&gauss(1.0), &space).unwrap().matrix;
        for a in 0..9 {
            for b in 0..9 {
                let kron = gs.get(a / 3, b / 3) * gx.get(a % 3, b % 3);
                assert!((g.matrix.get(a, b) - kron).abs() < 1e-15);
            }
        }
        assert!(g.verdict.unwrap().class.is_psd());
    }

    #[test]
    fn rescale_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 10, 3);
        let fact = rescale(Family::ExpInner.into(), WeightFn::NormExp { c: 0.5 }).unwrap();
        for w in pts.windows(2) {
            let a = fact.eval(&w[0], &w[1]).unwrap();
            let b = gauss(0.5).eval(&w[0], &w[1]).unwrap();
            assert!((a - b).abs() < 1e-12 * b.max(1e-300), "{a} {b}");
        }
        let same = rescale(gauss(1.0), WeightFn::Constant { c: 1.0 }).unwrap();
        let two = rescale(gauss(1.0), WeightFn::Constant { c: 2.0 }).unwrap();
        let g0 = gram(&gauss(1.0), &pts).unwrap().matrix;
        assert_eq!(gram(&same, &pts).unwrap().matrix, g0);
        assert_eq!(gram(&two, &pts).unwrap().matrix, g0.scaled(4.0));
    }

    #[test]
    fn pullback_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(&mut rng, 10, 2);
        let id = pullback(gauss(1.0), PointMap::Identity).unwrap();
        let dbl = pullback(gauss(1.0), PointMap::Scale { c: 2.0 }).unwrap();
        for w in pts.windows(2) {
            assert_eq!(id.eval(&w[0], &w[1]).unwrap(), gauss(1.0).eval(&w[0], &w[1]).unwrap());
            let b = gauss(4.0).eval(&w[0], &w[1]).unwrap();
            assert!((dbl.eval(&w[0], &w[1]).unwrap() - b).abs() <= 1e-14 * b.max(1e-300));
        }
        let c = pullback(gauss(1.0), PointMap::Constant { point: e(&[0.0, 0.0]) }).unwrap();
        let g = gram_checked(&c, &pts, None).unwrap();
        assert!(g.matrix.to_rows().iter().flatten().all(|&v| v == 1.0));
        assert_eq!(g.verdict.unwrap().class, PsdClass::Psd);
        let bad = pullback(gauss(1.0), PointMap::Lift).unwrap();
        assert!(matches!(bad.eval(&pts[0], &pts[1]), Err(Error::Type(_))));
    }

    fn leaf_strategy() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            (0.1f64..3.0).prop_map(|s| Family::Gaussian { sigma: s }.into()),
            (0.1f64..3.0, 0.5f64..3.0).prop_map(|(a, n)| Family::Matern { alpha: a, nu: n }.into()),
            (0.0f64..2.0).prop_map(KernelSpec::constant),
            Just(Family::Linear.into()),
        ]
    }

    fn closure_strategy() -> impl Strategy<Value = KernelSpec> {
        (leaf_strategy(), leaf_strategy(), 0.0f64..1.0, 0.1f64..2.0, 0usize..4).prop_map(
            |(l, r, w, c, op)| match op {
                0 => schur(l, r),
                1 => mixture(vec![(w, l), (1.0 - w + 0.01, r)]).unwrap(),
                2 => rescale(l, WeightFn::NormExp { c }).unwrap(),
                _ => pullback(l, PointMap::Scale { c }).unwrap(),
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn bit_exact_symmetry(k in closure_strategy(), seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 6, 3);
            for x in &pts {
                for y in &pts {
                    prop_assert_eq!(k.eval(x, y).unwrap().to_bits(), k.eval(y, x).unwrap().to_bits());
                }
            }
        }

        #[test]
        fn closure_preserves_psd(k in closure_strategy(), seed in 0u64..1000, n in 2usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, n, 2);
            let g = gram_checked(&k, &pts, None).unwrap();
            prop_assert!(g.verdict.as_ref().unwrap().class.is_psd(), "{:?}", g.verdict);
            let m = &g.matrix;
            let tol = g.verdict.as_ref().unwrap().tol_used;
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(2.0 * m.get(i, j).abs() <= m.get(i, i) + m.get(j, j) + 4.0 * tol);
                }
            }
        }

        #[test]
        fn mixture_linearity(w1 in 0.0f64..2.0, w2 in 0.01f64..2.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 8, 2);
            let a = gauss(0.5);
            let b: KernelSpec = Family::Matern { alpha: 1.0, nu: 1.5 }.into();
            let mix = mixture(vec![(w1, a.clone()), (w2, b.clone())]).unwrap();
            let gm = gram(&mix, &pts).unwrap().matrix;
            let ga = gram(&a, &pts).unwrap().matrix;
            let gb = gram(&b, &pts).unwrap().matrix;
            for i in 0..8 {
                for j in 0..8 {
                    prop_assert!((gm.get(i, j) - (w1 * ga.get(i, j) + w2 * gb.get(i, j))).abs() <= 1e-12);
                }
            }
        }
    }
}
