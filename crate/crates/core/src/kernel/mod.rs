//! Kernel specifications, points, evaluation and Gram assembly.

mod eval;
pub mod gram;
pub mod point;
pub mod spec;

pub use gram::{cross_matrix, gram, gram_checked, GramMatrix};
pub use point::Point;
pub use spec::{
    Combinator, ExponentAtom, Family, KernelSpec, MapEntry, MaternVariant, MatrixKernel,
    MixtureAtom, PointMap, RateAtom, SiteMatrix, WeightEntry, WeightFn,
};

/// `p(x, y) q(x, y)`.
pub fn schur(left: KernelSpec, right: KernelSpec) -> KernelSpec {
    Combinator::Schur {
        left: Box::new(left),
        right: Box::new(right),
    }
    .into()
}

/// `p(x, y) q(z, w)` on product points `((x, z), (y, w))`.
pub fn tensor(left: KernelSpec, right: KernelSpec) -> KernelSpec {
    Combinator::Tensor {
        left: Box::new(left),
        right: Box::new(right),
    }
    .into()
}

/// `f(x) K(x, y) f(y)`.
pub fn rescale(inner: KernelSpec, weight: WeightFn) -> crate::Result<KernelSpec> {
    let k: KernelSpec = Combinator::Rescale {
        inner: Box::new(inner),
        weight,
    }
    .into();
    k.validate()?;
    Ok(k)
}

/// `K(h(x), h(y))`.
pub fn pullback(inner: KernelSpec, map: PointMap) -> crate::Result<KernelSpec> {
    let k: KernelSpec = Combinator::Pullback {
        inner: Box::new(inner),
        map,
    }
    .into();
    k.validate()?;
    Ok(k)
}

/// `Σ w_i K_i` with nonnegative weights, not all zero.
pub fn mixture(atoms: Vec<(f64, KernelSpec)>) -> crate::Result<KernelSpec> {
    let k: KernelSpec = Combinator::Mixture {
        atoms: atoms
            .into_iter()
            .map(|(weight, kernel)| MixtureAtom { weight, kernel })
            .collect(),
    }
    .into();
    k.validate()?;
    Ok(k)
}

/// `L((x, i), (y, j)) = K_ij(x, y)`.
pub fn flatten(matrix: MatrixKernel) -> crate::Result<KernelSpec> {
    let k: KernelSpec = Combinator::Flatten { matrix }.into();
    k.validate()?;
    Ok(k)
}
