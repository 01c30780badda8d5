//! Inner products and norms on the discrete phase space.

use std::sync::Arc;

use crate::error::Result;
use crate::field::{ComplexStateField, StateField};
use crate::phase::{check_assumptions, AssumptionReport, OpticalField, PhaseGrid};

/// Which measure weights a reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Cell width times quadrature weight.
    Plain,
    /// Additionally weighted by the total cross-section.
    Sigma,
}

/// A grid, its optical parameters, and the precomputed measure vectors.
/// Immutable after construction; shared by reference between operators.
#[derive(Debug, Clone)]
pub struct PhaseSpace {
    grid: PhaseGrid,
    optics: OpticalField,
    report: AssumptionReport,
    /// h * w_k per (cell, ordinate)
    meas: Vec<f64>,
    /// h * w_k * sigma per (cell, ordinate)
    meas_sigma: Vec<f64>,
}

impl PhaseSpace {
    pub fn new(grid: PhaseGrid, optics: OpticalField) -> Result<Arc<Self>> {
        let report = check_assumptions(&grid, &optics)?;
        let no = grid.n_ordinates();
        let mut meas = Vec::with_capacity(grid.dim());
        let mut meas_sigma = Vec::with_capacity(grid.dim());
        for i in 0..grid.n_cells {
            for k in 0..no {
                let m = grid.cell_width * grid.weight(k);
                meas.push(m);
                meas_sigma.push(m * optics.sigma(i, k));
            }
        }
        Ok(Arc::new(Self {
            grid,
            optics,
            report,
            meas,
            meas_sigma,
        }))
    }

    #[inline]
    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    #[inline]
    pub fn optics(&self) -> &OpticalField {
        &self.optics
    }

    #[inline]
    pub fn assumptions(&self) -> &AssumptionReport {
        &self.report
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.grid.n_cells
    }

    #[inline]
    pub fn n_ordinates(&self) -> usize {
        self.grid.n_ordinates()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn zeros(&self) -> StateField {
        StateField::zeros(self.n_cells(), self.n_ordinates())
    }

    pub fn constant(&self, v: f64) -> StateField {
        StateField::constant(self.n_cells(), self.n_ordinates(), v)
    }

    #[inline]
    pub fn measure(&self, weighting: Weighting) -> &[f64] {
        match weighting {
            Weighting::Plain => &self.meas,
            Weighting::Sigma => &self.meas_sigma,
        }
    }

    /// Weighted inner product, cells outer and ordinates inner, fixed order.
    pub fn inner(&self, u: &StateField, v: &StateField, weighting: Weighting) -> f64 {
        debug_assert_eq!(u.shape(), v.shape());
        let w = self.measure(weighting);
        let mut acc = 0.0;
        for ((a, b), m) in u.as_slice().iter().zip(v.as_slice()).zip(w) {
            acc += m * a * b;
        }
        acc
    }

    pub fn norm(&self, u: &StateField, weighting: Weighting) -> f64 {
        self.inner(u, u, weighting).sqrt()
    }

    /// Checked variant of [`Self::inner`] for callers holding unvalidated fields.
    pub fn try_inner(&self, u: &StateField, v: &StateField, weighting: Weighting) -> Result<f64> {
        u.same_shape(v)?;
        Ok(self.inner(u, v, weighting))
    }

    /// Complex inner product, conjugate-linear in the second argument.
    pub fn inner_c(
        &self,
        u: &ComplexStateField,
        v: &ComplexStateField,
        weighting: Weighting,
    ) -> num_complex::Complex64 {
        let w = self.measure(weighting);
        let (ur, ui) = (u.re.as_slice(), u.im.as_slice());
        let (vr, vi) = (v.re.as_slice(), v.im.as_slice());
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..w.len() {
            // u * conj(v)
            re += w[j] * (ur[j] * vr[j] + ui[j] * vi[j]);
            im += w[j] * (ui[j] * vr[j] - ur[j] * vi[j]);
        }
        num_complex::Complex64::new(re, im)
    }

    pub fn norm_c(&self, u: &ComplexStateField, weighting: Weighting) -> f64 {
        self.inner_c(u, u, weighting).re.max(0.0).sqrt()
    }

    pub fn normalized(&self, u: &StateField, weighting: Weighting) -> StateField {
        let n = self.norm(u, weighting);
        u.scaled(1.0 / n)
    }

    pub fn distance(&self, u: &StateField, v: &StateField, weighting: Weighting) -> f64 {
        self.norm(&u.sub(v), weighting)
    }
}
