//! Dense symmetric matrices, a cyclic Jacobi eigensolver and the
//! finite-sample positive definiteness classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real symmetric matrix, stored row-major in full.
///
/// Every constructor mirrors the upper triangle into the lower one, so
/// `get(i, j) == get(j, i)` holds bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix by evaluating `f(i, j)` once per unordered pair `i <= j`.
    pub fn from_upper_fn<F>(n: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j)?);
            }
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Builds from a square row list. The upper triangle is authoritative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Input(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        Self::from_upper_fn(n, |i, j| Ok(rows[i][j]))
    }

    /// Like [`SymMatrix::from_rows`], but rejects inputs whose lower and
    /// upper triangles disagree by more than `tol` (absolute).
    pub fn from_rows_checked(rows: &[Vec<f64>], tol: f64) -> Result<Self> {
        let m = Self::from_rows(rows)?;
        for i in 0..m.n {
            for j in 0..i {
                if (rows[i][j] - rows[j][i]).abs() > tol {
                    return Err(Error::Input(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        rows[i][j], rows[j][i]
                    )));
                }
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::Input(format!(
                "non-finite entry {} at ({}, {})",
                self.data[k],
                k / self.n,
                k % self.n
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Entry-wise map, applied once per unordered pair.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<SymMatrix> {
        Self::from_upper_fn(self.n, |i, j| Ok(f(self.get(i, j))))
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_diagonal(&self, eps: f64) -> SymMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m.data[i * self.n + i] += eps;
        }
        m
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.same_size(other)?;
        Ok(SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Entry-wise (Schur) product.
    pub fn hadamard(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.same_size(other)?;
        Ok(SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        let mut m = SymMatrix::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.data[a * k + b] = self.get(i, j);
            }
        }
        m
    }

    /// `P A P` with `P = I - (1/n) 1 1ᵀ`.
    pub fn center(&self) -> SymMatrix {
        let n = self.n;
        let nf = n as f64;
        let row_means: Vec<f64> = (0..n).map(|i| self.row(i).iter().sum::<f64>() / nf).collect();
        let total = row_means.iter().sum::<f64>() / nf;
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, self.get(i, j) - row_means[i] - row_means[j] + total);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let row = self.row(i);
            let inner: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            acc += v[i] * inner;
        }
        acc
    }

    fn same_size(&self, other: &SymMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Input(format!(
                "dimension mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Eigen-decomposition of a [`SymMatrix`], eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl Spectrum {
    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (and optionally eigenvectors) by cyclic Jacobi rotations.
///
/// Sweeps visit `(p, q)` pairs in row order and stop once the off-diagonal
/// Frobenius norm drops below `1e-12 * ‖A‖_F`.
pub fn sym_eigen(a: &SymMatrix, vectors: bool) -> Result<Spectrum> {
    a.check_finite()?;
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = if vectors {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        Some(id)
    } else {
        None
    };

    let fro = a.frobenius();
    let target = JACOBI_REL_TOL * fro;
    let mut converged = n <= 1 || fro == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        let off: f64 = off_diagonal_norm(&m, n);
        if off < target {
            converged = true;
            break;
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    let np = c * akp - s * akq;
                    let nq = s * akp + c * akq;
                    m[k * n + p] = np;
                    m[p * n + k] = np;
                    m[k * n + q] = nq;
                    m[q * n + k] = nq;
                }
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&m, n) >= target {
        return Err(Error::Numerical {
            message: format!("Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"),
            partial: off_diagonal_norm(&m, n),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let eigenvalues = order.iter().map(|&i| m[i * n + i]).collect();
    let eigenvectors = v.map(|v| {
        order
            .iter()
            .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
            .collect()
    });
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[i * n + j] * m[i * n + j];
            }
        }
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PsdClass {
    Pd,
    Psd,
    Indefinite,
}

impl PsdClass {
    pub fn is_psd(self) -> bool {
        !matches!(self, PsdClass::Indefinite)
    }
}

/// Verdict of [`classify_psd`].
///
/// `tol_used` is the PSD boundary; PD additionally requires
/// `lambda_min > pd_threshold`, and `pd_threshold >= tol_used` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub class: PsdClass,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tol_used: f64,
    pub pd_threshold: f64,
}

/// Relative PD threshold applied on top of the PSD boundary.
pub const PD_SCALE: f64 = 1e-8;

/// Default PSD boundary scale for an `n × n` matrix.
pub fn default_tol_scale(n: usize) -> f64 {
    1e-10 * n.max(1) as f64
}

pub fn classify_spectrum(spec: &Spectrum, tol_scale: f64) -> PsdVerdict {
    let lambda_min = spec.min();
    let lambda_max = spec.max();
    let scale = lambda_max.max(1.0);
    let tol_used = tol_scale * scale;
    let pd_threshold = PD_SCALE.max(tol_scale) * scale;
    let class = if lambda_min > pd_threshold {
        PsdClass::Pd
    } else if lambda_min >= -tol_used {
        PsdClass::Psd
    } else {
        PsdClass::Indefinite
    };
    PsdVerdict {
        class,
        lambda_min,
        lambda_max,
        tol_used,
        pd_threshold,
    }
}

/// Classifies a symmetric matrix as PD, PSD or indefinite from its spectrum.
pub fn classify_psd(a: &SymMatrix, tol_scale: f64) -> Result<PsdVerdict> {
    if !(tol_scale > 0.0) || !tol_scale.is_finite() {
        return Err(Error::Parameter(format!(
            "tol_scale must be positive, got {tol_scale}"
        )));
    }
    let spec = sym_eigen(a, false)?;
    Ok(classify_spectrum(&spec, tol_scale))
}

/// [`classify_psd`] with the default boundary `1e-10 * n`.
pub fn classify_psd_default(a: &SymMatrix) -> Result<PsdVerdict> {
    classify_psd(a, default_tol_scale(a.n()))
}

/// Singular values of a dense `rows × cols` matrix by one-sided Jacobi,
/// sorted descending.
pub fn singular_values(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let m = rows.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let k = rows[0].len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Input("ragged matrix".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite entry".into()));
    }
    // orthogonalize the shorter side
    let mut cols: Vec<Vec<f64>> = if k <= m {
        (0..k).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
    } else {
        rows.to_vec()
    };
    let nc = cols.len();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..nc {
            for q in p + 1..nc {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let xp = *x;
                    let yq = *y;
                    *x = c * xp - s * yq;
                    *y = s * xp + c * yq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}
