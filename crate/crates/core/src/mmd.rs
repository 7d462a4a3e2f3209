//! Discrete (signed) measures, kernel energies, MMD and randomized SPD probes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{cross_matrix, gram, KernelSpec, Point};
use crate::numerics::{classify_spectrum, default_tol_scale, sym_eigen, PsdClass};
use crate::report::{ClassReport, Witness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// `λ = Σ c_μ δ_{x_μ}`; weights may be negative.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        if atoms.iter().any(|(_, w)| !w.is_finite()) {
            return Err(Error::Input("measure weights must be finite".into()));
        }
        Ok(DiscreteMeasure {
            atoms: atoms
                .into_iter()
                .map(|(point, weight)| Atom { point, weight })
                .collect(),
        })
    }

    /// Uniform probability measure on a sample (repeated points keep their
    /// multiplicity).
    pub fn empirical(sample: &[Point]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::Input("empirical measure of an empty sample".into()));
        }
        let w = 1.0 / sample.len() as f64;
        DiscreteMeasure::new(sample.iter().map(|p| (p.clone(), w)).collect())
    }

    pub fn points(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.point.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        DiscreteMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point.clone(),
                    weight: s * a.weight,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub value: f64,
    pub n_atoms: usize,
    /// SHA-256 of the kernel's canonical JSON.
    pub kernel_id: String,
}

pub fn kernel_id(spec: &KernelSpec) -> String {
    let digest = Sha256::digest(spec.to_json().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `Σ_μν c_μ c_ν K(x_μ, x_ν)`.
pub fn energy(spec: &KernelSpec, lam: &DiscreteMeasure) -> Result<f64> {
    if lam.atoms.is_empty() {
        return Ok(0.0);
    }
    let g = gram(spec, &lam.points())?.matrix;
    Ok(g.quad_form(&lam.weights()))
}

pub fn energy_report(spec: &KernelSpec, lam: &DiscreteMeasure) -> Result<EnergyReport> {
    Ok(EnergyReport {
        value: energy(spec, lam)?,
        n_atoms: lam.atoms.len(),
        kernel_id: kernel_id(spec),
    })
}

/// `Σ_μν a_μ b_ν K(x_μ, y_ν)`.
pub fn mmd_inner(spec: &KernelSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.atoms.is_empty() || nu.atoms.is_empty() {
        return Ok(0.0);
    }
    let k = cross_matrix(spec, &mu.points(), &nu.points())?;
    let b = nu.weights();
    Ok(mu
        .atoms
        .iter()
        .zip(&k)
        .map(|(a, row)| a.weight * row.iter().zip(&b).map(|(k, w)| k * w).sum::<f64>())
        .sum())
}

/// `P_A − P_B` with atoms at identical points merged; the merged weight is
/// `count_A/|A| − count_B/|B|`, so equal multisets give exact zeros.
pub fn empirical_difference(a: &[Point], b: &[Point]) -> Result<DiscreteMeasure> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("mmd needs two nonempty samples".into()));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for (side, sample) in [a, b].into_iter().enumerate() {
        for p in sample {
            let k = *index.entry(p.key()).or_insert_with(|| {
                points.push(p.clone());
                counts.push((0, 0));
                points.len() - 1
            });
            if side == 0 {
                counts[k].0 += 1;
            } else {
                counts[k].1 += 1;
            }
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    // key order makes the result independent of which sample came first
    let mut merged: Vec<(Point, (usize, usize))> = points.into_iter().zip(counts).collect();
    merged.sort_by_key(|(p, _)| p.key());
    DiscreteMeasure::new(
        merged
            .into_iter()
            .map(|(p, (ca, cb))| (p, ca as f64 / na - cb as f64 / nb))
            .filter(|(_, w)| *w != 0.0)
            .collect(),
    )
}

/// Biased V-statistic `√ energy(P_A − P_B)`.
pub fn mmd_distance(spec: &KernelSpec, sample_a: &[Point], sample_b: &[Point]) -> Result<f64> {
    energy_norm(spec, &empirical_difference(sample_a, sample_b)?)
}

/// `√ energy(μ − ν)` for weighted measures; atoms at identical points are
/// merged first, in key order.
pub fn measure_distance(spec: &KernelSpec, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let mut merged: BTreeMap<Vec<u64>, (Point, f64)> = BTreeMap::new();
    for (sign, m) in [(1.0, mu), (-1.0, nu)] {
        for a in &m.atoms {
            merged.entry(a.point.key()).or_insert_with(|| (a.point.clone(), 0.0)).1 += sign * a.weight;
        }
    }
    let lam = DiscreteMeasure::new(merged.into_values().filter(|(_, w)| *w != 0.0).collect())?;
    energy_norm(spec, &lam)
}

/// `√ energy(λ)`, rejecting energies negative beyond rounding.
fn energy_norm(spec: &KernelSpec, lam: &DiscreteMeasure) -> Result<f64> {
    if lam.atoms.is_empty() {
        return Ok(0.0);
    }
    let points = lam.points();
    let w = lam.weights();
    let g = gram(spec, &points)?.matrix;
    let e = g.quad_form(&w);
    let scale: f64 = (0..g.n())
        .flat_map(|i| (0..g.n()).map(move |j| (i, j)))
        .map(|(i, j)| (w[i] * w[j] * g.get(i, j)).abs())
        .sum();
    if e < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Invariant(format!(
            "negative energy {e:e}: kernel is not positive definite on the samples"
        )));
    }
    Ok(e.max(0.0).sqrt())
}

/// Deterministic spectrum test of SPD on a sample plus a randomized
/// search for small energies over unit-norm weights. Trial `t` draws from
/// ChaCha8 stream `t` of `seed`, so results do not depend on scheduling.
pub fn spd_probe(spec: &KernelSpec, points: &[Point], trials: usize, seed: u64) -> Result<ClassReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let mut seen = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        if !seen.insert(p.key()) {
            return Err(Error::Input(format!("duplicate point at index {i}")));
        }
    }
    let g = gram(spec, points)?.matrix;
    let n = g.n();
    let spec_eig = sym_eigen(&g, true)?;
    let verdict = classify_spectrum(&spec_eig, default_tol_scale(n));
    let min_energy = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let mut c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            c.iter_mut().for_each(|v| *v /= norm);
            g.quad_form(&c)
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let pd = verdict.class == PsdClass::Pd;
    let witness = if pd {
        None
    } else {
        let mut v = spec_eig.eigenvectors.expect("requested")[0].clone();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        Some(Witness::Eigen {
            value: verdict.lambda_min,
            vector: v,
        })
    };
    let class = match verdict.class {
        PsdClass::Pd => 2.0,
        PsdClass::Psd => 1.0,
        PsdClass::Indefinite => 0.0,
    };
    Ok(ClassReport::new("spd", pd)
        .with_witness(witness)
        .tol("tol_used", verdict.tol_used)
        .tol("pd_threshold", verdict.pd_threshold)
        .num("lambda_min", verdict.lambda_min)
        .num("lambda_max", verdict.lambda_max)
        .num("psd_class", class)
        .num("min_random_energy", min_energy)
        .num("trials", trials as f64)
        .num("seed", seed as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnd::schoenberg_transform;
    use crate::families::{gaussian, matern_product_matrix};
    use crate::hyperbolic::{lift, sech_power_kernel};
    use proptest::prelude::*;
    use rand::Rng;

    fn e(v: &[f64]) -> Point {
        Point::Euclidean(v.to_vec())
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Point> {
        (0..n)
            .map(|_| e(&(0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn energy_examples() {
        let g = gaussian(1.0).unwrap();
        let dup = DiscreteMeasure::new(vec![(e(&[0.4]), 1.0), (e(&[0.4]), -1.0)]).unwrap();
        assert_eq!(energy(&g, &dup).unwrap(), 0.0);
        let pair = DiscreteMeasure::new(vec![(e(&[0.0]), 1.0), (e(&[1.0]), -1.0)]).unwrap();
        let hand = 2.0 - 2.0 * (-1.0f64).exp();
        assert!((energy(&g, &pair).unwrap() - hand).abs() < 1e-15);
        assert!((hand - 1.264_241_117_657_115_4).abs() < 1e-12);
        let r = energy_report(&g, &pair).unwrap();
        assert_eq!(r.n_atoms, 2);
        assert_eq!(r.kernel_id.len(), 64);
    }

    #[test]
    fn inner_examples() {
        let g = gaussian(1.0).unwrap();
        let dx = DiscreteMeasure::new(vec![(e(&[0.3]), 1.0)]).unwrap();
        assert_eq!(mmd_inner(&g, &dx, &dx).unwrap(), 1.0);
        let d0 = DiscreteMeasure::new(vec![(e(&[0.0]), 1.0)]).unwrap();
        let d1 = DiscreteMeasure::new(vec![(e(&[1.0]), 1.0)]).unwrap();
        assert!((mmd_inner(&g, &d0, &d1).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn distance_examples() {
        let g = gaussian(1.0).unwrap();
        let a = vec![e(&[0.0]), e(&[2.0]), e(&[0.0])];
        let b = vec![e(&[2.0]), e(&[0.0]), e(&[0.0])];
        assert_eq!(mmd_distance(&g, &a, &b).unwrap(), 0.0);
        let d = mmd_distance(&g, &[e(&[0.0])], &[e(&[1.0])]).unwrap();
        assert!((d - (2.0 - 2.0 * (-1.0f64).exp()).sqrt()).abs() < 1e-15);
        assert!((d - 1.124_385).abs() < 1e-6);
        let c = vec![e(&[0.5]), e(&[-1.0])];
        assert_eq!(mmd_distance(&g, &a, &c).unwrap(), mmd_distance(&g, &c, &a).unwrap());
        assert!(matches!(mmd_distance(&g, &[], &c), Err(Error::Input(_))));

        let mu = DiscreteMeasure::empirical(&a).unwrap();
        let nu = DiscreteMeasure::empirical(&c).unwrap();
        let w = measure_distance(&g, &mu, &nu).unwrap();
        assert!((w - mmd_distance(&g, &a, &c).unwrap()).abs() < 1e-15);
        let half = DiscreteMeasure::new(vec![(e(&[0.0]), 0.5), (e(&[0.0]), 0.5)]).unwrap();
        let one = DiscreteMeasure::new(vec![(e(&[0.0]), 1.0)]).unwrap();
        assert_eq!(measure_distance(&g, &half, &one).unwrap(), 0.0);
    }

    #[test]
    fn spd_probe_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = random_points(&mut rng, 20, 2);
        let r = spd_probe(&gaussian(1.0).unwrap(), &pts, 50, 0).unwrap();
        assert!(r.verdict);
        assert!(r.numbers["min_random_energy"] > 0.0);

        let flat = schoenberg_transform(KernelSpec::constant(1.0), 1.0).unwrap();
        let r = spd_probe(&flat, &[e(&[0.0]), e(&[1.0])], 10, 0).unwrap();
        assert!(!r.verdict);
        assert_eq!(r.numbers["psd_class"], 1.0);
        match r.witness {
            Some(Witness::Eigen { value, vector }) => {
                assert!(value.abs() < 1e-12);
                let s = 0.5f64.sqrt();
                assert!((vector[0] - s).abs() < 1e-12 && (vector[1] + s).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }

        let hyp: Vec<Point> = (0..20)
            .map(|_| Point::Hyperboloid(lift(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).unwrap()))
            .collect();
        assert!(spd_probe(&sech_power_kernel(1.0).unwrap(), &hyp, 20, 3).unwrap().verdict);

        assert!(matches!(spd_probe(&flat, &[e(&[0.0]), e(&[0.0])], 1, 0), Err(Error::Input(_))));
        let a = spd_probe(&gaussian(1.0).unwrap(), &pts, 30, 9).unwrap();
        let b = spd_probe(&gaussian(1.0).unwrap(), &pts, 30, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn channel_points_merge_in_mmd() {
        let k = matern_product_matrix(
            crate::kernel::SiteMatrix::constant(vec![vec![2.0, 0.5], vec![0.5, 2.0]]),
            KernelSpec::constant(1.0),
            vec![1.0, 2.0],
            vec![0.5, 1.5],
            1,
        )
        .unwrap();
        let p = |c: usize, x: f64| Point::channel(Point::product(e(&[0.0]), vec![x]).unwrap(), c);
        let a = vec![p(0, 0.0), p(1, 1.0)];
        let b = vec![p(1, 1.0), p(0, 0.0)];
        assert_eq!(mmd_distance(&k, &a, &b).unwrap(), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn quadratic_homogeneity(seed in 0u64..10_000, s in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = random_points(&mut rng, 6, 2);
            let lam = DiscreteMeasure::new(pts.into_iter().map(|p| (p, rng.random_range(-1.0..1.0))).collect()).unwrap();
            let g = gaussian(0.8).unwrap();
            let e1 = energy(&g, &lam).unwrap();
            let e2 = energy(&g, &lam.scaled(s)).unwrap();
            prop_assert!((e2 - s * s * e1).abs() <= 1e-12 * (s * s * e1).abs().max(1e-300));
        }

        #[test]
        fn inner_is_consistent(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = gaussian(1.3).unwrap();
            let mk = |rng: &mut ChaCha8Rng| {
                let pts = random_points(rng, 5, 2);
                DiscreteMeasure::new(pts.into_iter().map(|p| (p, rng.random_range(-1.0..1.0))).collect()).unwrap()
            };
            let (mu, nu) = (mk(&mut rng), mk(&mut rng));
            let (em, en) = (energy(&g, &mu).unwrap(), energy(&g, &nu).unwrap());
            prop_assert!((mmd_inner(&g, &mu, &mu).unwrap() - em).abs() <= 1e-12 * em.abs().max(1.0));
            let ip = mmd_inner(&g, &mu, &nu).unwrap();
            prop_assert!((ip - mmd_inner(&g, &nu, &mu).unwrap()).abs() <= 1e-13);
            prop_assert!(ip * ip <= em * en + 1e-12);
        }

        #[test]
        fn triangle(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = gaussian(0.5).unwrap();
            let a = random_points(&mut rng, 4, 2);
            let b = random_points(&mut rng, 5, 2);
            let c = random_points(&mut rng, 3, 2);
            let d = |x: &[Point], y: &[Point]| mmd_distance(&g, x, y).unwrap();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-10);
        }
    }
}
