//! Phase-space fields: one scalar per (cell, ordinate).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real scalar field over the discrete phase space, stored cell-major
/// (cells outer, ordinates inner). All reductions over a field follow this
/// storage order so traces are bit-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateField {
    n_cells: usize,
    n_ordinates: usize,
    data: Vec<f64>,
}

impl StateField {
    pub fn zeros(n_cells: usize, n_ordinates: usize) -> Self {
        Self {
            n_cells,
            n_ordinates,
            data: vec![0.0; n_cells * n_ordinates],
        }
    }

    pub fn constant(n_cells: usize, n_ordinates: usize, value: f64) -> Self {
        Self {
            n_cells,
            n_ordinates,
            data: vec![value; n_cells * n_ordinates],
        }
    }

    pub fn from_fn(
        n_cells: usize,
        n_ordinates: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(n_cells * n_ordinates);
        for i in 0..n_cells {
            for k in 0..n_ordinates {
                data.push(f(i, k));
            }
        }
        Self {
            n_cells,
            n_ordinates,
            data,
        }
    }

    pub fn from_vec(n_cells: usize, n_ordinates: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_cells * n_ordinates {
            return Err(Error::ShapeMismatch(format!(
                "field data length {} does not match {} cells x {} ordinates",
                data.len(),
                n_cells,
                n_ordinates
            )));
        }
        Ok(Self {
            n_cells,
            n_ordinates,
            data,
        })
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    #[inline]
    pub fn n_ordinates(&self) -> usize {
        self.n_ordinates
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_cells, self.n_ordinates)
    }

    #[inline]
    pub fn idx(&self, cell: usize, ord: usize) -> usize {
        cell * self.n_ordinates + ord
    }

    #[inline]
    pub fn get(&self, cell: usize, ord: usize) -> f64 {
        self.data[cell * self.n_ordinates + ord]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, ord: usize, value: f64) {
        self.data[cell * self.n_ordinates + ord] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &StateField) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self += s * other`, in storage order.
    pub fn add_scaled(&mut self, s: f64, other: &StateField) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> StateField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn sub(&self, other: &StateField) -> StateField {
        debug_assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Self {
            n_cells: self.n_cells,
            n_ordinates: self.n_ordinates,
            data,
        }
    }

    pub fn add(&self, other: &StateField) -> StateField {
        debug_assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Self {
            n_cells: self.n_cells,
            n_ordinates: self.n_ordinates,
            data,
        }
    }
}

/// A complex field, kept as a pair of real fields. Complex arithmetic is
/// confined to the resolvent-quadrature path; every other consumer of
/// [`StateField`] stays real.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStateField {
    pub re: StateField,
    pub im: StateField,
}

impl ComplexStateField {
    pub fn from_real(re: StateField) -> Self {
        let im = StateField::zeros(re.n_cells(), re.n_ordinates());
        Self { re, im }
    }

    pub fn zeros(n_cells: usize, n_ordinates: usize) -> Self {
        Self {
            re: StateField::zeros(n_cells, n_ordinates),
            im: StateField::zeros(n_cells, n_ordinates),
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.re.shape()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.re.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn add_scaled(&mut self, s: num_complex::Complex64, other: &ComplexStateField) {
        // (a + ib) += (sr + isi)(cr + ici)
        for j in 0..self.re.len() {
            let cr = other.re.as_slice()[j];
            let ci = other.im.as_slice()[j];
            self.re.as_mut_slice()[j] += s.re * cr - s.im * ci;
            self.im.as_mut_slice()[j] += s.re * ci + s.im * cr;
        }
    }

    pub fn scale(&mut self, s: num_complex::Complex64) {
        for j in 0..self.re.len() {
            let cr = self.re.as_slice()[j];
            let ci = self.im.as_slice()[j];
            self.re.as_mut_slice()[j] = s.re * cr - s.im * ci;
            self.im.as_mut_slice()[j] = s.re * ci + s.im * cr;
        }
    }

    pub fn sub(&self, other: &ComplexStateField) -> ComplexStateField {
        ComplexStateField {
            re: self.re.sub(&other.re),
            im: self.im.sub(&other.im),
        }
    }
}
