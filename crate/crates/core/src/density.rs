//! Small Hermitian matrices: canonical states and empirical reduced states.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.entries[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(domain(format!(
                "density matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    /// Real part of the trace; the imaginary part of a Hermitian matrix vanishes.
    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.entries[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Eigenvalues in ascending order, computed on the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Hilbert-Schmidt (Frobenius) distance.
    pub fn hs_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok((&self.entries - &other.entries).norm())
    }

    /// Copy scaled to unit trace.
    pub fn normalized(&self) -> Result<DensityMatrix> {
        let tr = self.trace();
        if !(tr.is_finite() && tr > 0.0) {
            return Err(domain(format!("cannot normalize a matrix with trace {tr}")));
        }
        Ok(Self {
            entries: &self.entries / Complex64::new(tr, 0.0),
        })
    }

    /// `ln det` of the Hermitian part; `-inf` if any eigenvalue is non-positive.
    pub fn log_det(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&x| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY })
            .sum()
    }
}

#[derive(Serialize, Deserialize)]
struct DensityRecord {
    dim: usize,
    /// Row-major real parts.
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n)
                .map(|i| (0..n).map(|j| f(&self.entries[(i, j)])).collect())
                .collect()
        };
        DensityRecord {
            dim: n,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = DensityRecord::deserialize(d)?;
        let n = r.dim;
        let shape_ok = r.re.len() == n
            && r.im.len() == n
            && r.re.iter().chain(&r.im).all(|row| row.len() == n);
        if !shape_ok {
            return Err(D::Error::custom("density matrix rows do not match dim"));
        }
        let entries = DMatrix::from_fn(n, n, |i, j| Complex64::new(r.re[i][j], r.im[i][j]));
        Ok(Self { entries })
    }
}
