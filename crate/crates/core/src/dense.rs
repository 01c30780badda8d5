//! Dense matrix form of an operator together with the weighted metric it
//! acts in. This is the oracle-side representation: everything here is
//! explicit linear algebra at desk scale.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::field::StateField;

/// Diagonal weights of the inner product the operator is measured in
/// (cell measure times quadrature weight times sigma for transport
/// operators; anything positive for synthetic ones).
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    weights: DVector<f64>,
}

impl Metric {
    pub fn new(weights: DVector<f64>) -> Self {
        assert!(
            weights.iter().all(|w| *w > 0.0 && w.is_finite()),
            "metric weights must be positive"
        );
        Self { weights }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self {
            weights: DVector::from_element(dim, 1.0),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.weights.len() {
            acc += self.weights[i] * u[i] * v[i];
        }
        acc
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.inner(u, u).sqrt()
    }

    pub fn inner_c(&self, u: &DVector<Complex64>, v: &DVector<Complex64>) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.weights.len() {
            acc += self.weights[i] * u[i] * v[i].conj();
        }
        acc
    }

    pub fn norm_c(&self, u: &DVector<Complex64>) -> f64 {
        self.inner_c(u, u).re.max(0.0).sqrt()
    }

    /// Square roots of the weights: the similarity that turns this metric
    /// into the Euclidean one.
    pub fn sqrt_weights(&self) -> DVector<f64> {
        self.weights.map(f64::sqrt)
    }
}

/// A square operator materialized as a matrix in plain coordinates, paired
/// with the metric used for norms, adjoints, and singular values.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    metric: Metric,
    /// (n_cells, n_ordinates) when the operator came from a phase grid;
    /// (dim, 1) for synthetic operators.
    shape: (usize, usize),
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>, metric: Metric, shape: (usize, usize)) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator must be square");
        assert_eq!(matrix.nrows(), metric.dim(), "metric dimension mismatch");
        assert_eq!(
            matrix.nrows(),
            shape.0 * shape.1,
            "shape does not match dimension"
        );
        assert!(
            matrix.iter().all(|v| v.is_finite()),
            "operator entries must be finite"
        );
        Self {
            matrix,
            metric,
            shape,
        }
    }

    /// Synthetic operator in the Euclidean metric.
    pub fn synthetic(matrix: DMatrix<f64>) -> Self {
        let n = matrix.nrows();
        Self::new(matrix, Metric::euclidean(n), (n, 1))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    #[inline]
    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    pub fn apply_field(&self, f: &StateField) -> StateField {
        let v = field_to_vec(f);
        vec_to_field(&self.apply_vec(&v), self.shape)
    }

    /// The operator conjugated into the Euclidean coordinates of its metric:
    /// `W A W^{-1}` with `W = diag(sqrt(weights))`. Euclidean norms and
    /// singular values of this matrix are the weighted ones of the original.
    pub fn similarity_matrix(&self) -> DMatrix<f64> {
        let w = self.metric.sqrt_weights();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| w[i] * self.matrix[(i, j)] / w[j])
    }

    /// Adjoint with respect to the metric, as a dense matrix.
    pub fn adjoint_matrix(&self) -> DMatrix<f64> {
        let d = self.metric.weights();
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| d[j] * self.matrix[(j, i)] / d[i])
    }

    /// Weighted operator norm via the largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let s = self.similarity_matrix();
        s.singular_values().max()
    }

    /// Weighted singular values, descending.
    pub fn singular_values(&self) -> DVector<f64> {
        self.similarity_matrix().singular_values()
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn field_to_vec(f: &StateField) -> DVector<f64> {
    DVector::from_column_slice(f.as_slice())
}

pub fn vec_to_field(v: &DVector<f64>, shape: (usize, usize)) -> StateField {
    StateField::from_vec(shape.0, shape.1, v.as_slice().to_vec()).expect("shape mismatch")
}
