//! Matrix-free transport operators on a fixed grid: the sweep and its exact
//! inverse, the scattering/fission kernels, their sigma-weighted adjoints,
//! and dense materialization for the oracle.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dense::{field_to_vec, DenseOperator, Metric};
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::space::{PhaseSpace, Weighting};

/// Default cap on dense materialization size.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Operators whose sigma-weighted adjoint can be applied matrix-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointKind {
    TInv,
    K,
    F,
    B,
}

/// Operators that can be materialized as dense matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatKind {
    TInv,
    K,
    F,
    B,
    /// The source-solve composition: inverse of B applied to F.
    C,
}

#[derive(Debug, Default)]
struct OpCounters {
    t_solves: AtomicU64,
    t_applies: AtomicU64,
    k_applies: AtomicU64,
    f_applies: AtomicU64,
    adjoint_applies: AtomicU64,
    c_applies: AtomicU64,
}

/// Snapshot of the operator application counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CountersSnapshot {
    pub t_solves: u64,
    pub t_applies: u64,
    pub k_applies: u64,
    pub f_applies: u64,
    pub adjoint_applies: u64,
    pub c_applies: u64,
}

/// Matrix-free handles for the transport operators on one phase space.
/// Applications are pure; the only interior mutability is cost counting.
#[derive(Debug)]
pub struct OperatorSet {
    space: Arc<PhaseSpace>,
    threads: usize,
    counters: OpCounters,
}

impl OperatorSet {
    pub fn new(space: Arc<PhaseSpace>) -> Self {
        Self {
            space,
            threads: 1,
            counters: OpCounters::default(),
        }
    }

    pub fn with_threads(space: Arc<PhaseSpace>, threads: usize) -> Self {
        Self {
            space,
            threads: threads.max(1),
            counters: OpCounters::default(),
        }
    }

    #[inline]
    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    #[inline]
    pub fn space_arc(&self) -> Arc<PhaseSpace> {
        Arc::clone(&self.space)
    }

    pub fn counters(&self) -> CountersSnapshot {
        CountersSnapshot {
            t_solves: self.counters.t_solves.load(Ordering::Relaxed),
            t_applies: self.counters.t_applies.load(Ordering::Relaxed),
            k_applies: self.counters.k_applies.load(Ordering::Relaxed),
            f_applies: self.counters.f_applies.load(Ordering::Relaxed),
            adjoint_applies: self.counters.adjoint_applies.load(Ordering::Relaxed),
            c_applies: self.counters.c_applies.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn count_c_apply(&self) {
        self.counters.c_applies.fetch_add(1, Ordering::Relaxed);
    }

    fn sweep_over_ordinates(
        &self,
        out: &mut StateField,
        per_ordinate: impl Fn(usize, &mut [f64]) + Sync,
    ) {
        let nc = self.space.n_cells();
        let no = self.space.n_ordinates();
        if self.threads <= 1 || no == 1 {
            let mut col = vec![0.0; nc];
            for k in 0..no {
                per_ordinate(k, &mut col);
                for i in 0..nc {
                    out.set(i, k, col[i]);
                }
            }
            return;
        }
        // Per-ordinate recursions are independent; compute columns in
        // parallel and merge in ordinate order.
        let chunk = no.div_ceil(self.threads);
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(no);
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..self.threads {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(no);
                if lo >= hi {
                    break;
                }
                let f = &per_ordinate;
                handles.push(scope.spawn(move || {
                    let mut local = Vec::with_capacity(hi - lo);
                    for k in lo..hi {
                        let mut col = vec![0.0; nc];
                        f(k, &mut col);
                        local.push(col);
                    }
                    local
                }));
            }
            for h in handles {
                columns.extend(h.join().expect("sweep worker panicked"));
            }
        });
        for (k, col) in columns.iter().enumerate() {
            for i in 0..nc {
                out.set(i, k, col[i]);
            }
        }
    }

    /// Transport solve: per-ordinate implicit upwind march from the inflow
    /// boundary. Homogeneous inflow; nonnegative sources give nonnegative
    /// solutions since every stencil coefficient is nonnegative.
    pub fn solve_t(&self, q: &StateField) -> StateField {
        self.counters.t_solves.fetch_add(1, Ordering::Relaxed);
        let space = &self.space;
        let grid = space.grid();
        let optics = space.optics();
        let nc = grid.n_cells;
        let h = grid.cell_width;
        let mut out = space.zeros();
        self.sweep_over_ordinates(&mut out, |k, col| {
            let mu = grid.mu(k);
            let a = mu.abs() / h;
            if mu > 0.0 {
                let mut prev = 0.0;
                for i in 0..nc {
                    let v = (a * prev + q.get(i, k)) / (a + optics.sigma(i, k));
                    col[i] = v;
                    prev = v;
                }
            } else {
                let mut prev = 0.0;
                for i in (0..nc).rev() {
                    let v = (a * prev + q.get(i, k)) / (a + optics.sigma(i, k));
                    col[i] = v;
                    prev = v;
                }
            }
        });
        out
    }

    /// Exact algebraic inverse of [`Self::solve_t`]: the upwind stencil applied
    /// forward.
    pub fn apply_t(&self, u: &StateField) -> StateField {
        self.counters.t_applies.fetch_add(1, Ordering::Relaxed);
        let space = &self.space;
        let grid = space.grid();
        let optics = space.optics();
        let nc = grid.n_cells;
        let h = grid.cell_width;
        let mut out = space.zeros();
        self.sweep_over_ordinates(&mut out, |k, col| {
            let mu = grid.mu(k);
            let a = mu.abs() / h;
            if mu > 0.0 {
                for i in 0..nc {
                    let upwind = if i == 0 { 0.0 } else { u.get(i - 1, k) };
                    col[i] = a * (u.get(i, k) - upwind) + optics.sigma(i, k) * u.get(i, k);
                }
            } else {
                for i in 0..nc {
                    let upwind = if i + 1 == nc { 0.0 } else { u.get(i + 1, k) };
                    col[i] = a * (u.get(i, k) - upwind) + optics.sigma(i, k) * u.get(i, k);
                }
            }
        });
        out
    }

    fn apply_kernel(
        &self,
        u: &StateField,
        table: impl Fn(usize, usize, usize) -> f64 + Sync,
    ) -> StateField {
        let space = &self.space;
        let grid = space.grid();
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        let mut out = space.zeros();
        let body = |i: usize, row: &mut [f64]| {
            for k in 0..no {
                let mut acc = 0.0;
                for kin in 0..no {
                    acc += grid.weight(kin) * table(i, kin, k) * u.get(i, kin);
                }
                row[k] = acc;
            }
        };
        if self.threads <= 1 || nc == 1 {
            for (i, row) in out.as_mut_slice().chunks_mut(no).enumerate() {
                body(i, row);
            }
        } else {
            let mut rows: Vec<&mut [f64]> = out.as_mut_slice().chunks_mut(no).collect();
            let chunk = nc.div_ceil(self.threads);
            std::thread::scope(|scope| {
                let mut rest: &mut [&mut [f64]] = rows.as_mut_slice();
                let mut start = 0usize;
                while !rest.is_empty() {
                    let take = chunk.min(rest.len());
                    let slice = std::mem::take(&mut rest);
                    let (head, tail) = slice.split_at_mut(take);
                    rest = tail;
                    let base = start;
                    let body = &body;
                    scope.spawn(move || {
                        for (off, row) in head.iter_mut().enumerate() {
                            body(base + off, row);
                        }
                    });
                    start += take;
                }
            });
        }
        out
    }

    /// Scattering kernel: quadrature over the incoming ordinate.
    pub fn apply_k(&self, u: &StateField) -> StateField {
        self.counters.k_applies.fetch_add(1, Ordering::Relaxed);
        let optics = self.space.optics();
        self.apply_kernel(u, |c, kin, kout| optics.kappa(c, kin, kout))
    }

    /// Fission kernel: quadrature over the incoming ordinate.
    pub fn apply_f(&self, u: &StateField) -> StateField {
        self.counters.f_applies.fetch_add(1, Ordering::Relaxed);
        let optics = self.space.optics();
        self.apply_kernel(u, |c, kin, kout| optics.phi(c, kin, kout))
    }

    /// Full transport operator minus scattering.
    pub fn apply_b(&self, u: &StateField) -> StateField {
        let mut out = self.apply_t(u);
        let ku = self.apply_k(u);
        out.add_scaled(-1.0, &ku);
        out
    }

    /// Sigma-weighted adjoint application. The adjoint is taken with respect
    /// to the sigma-weighted inner product: `A* = D^-1 A^T D` with `D` the
    /// diagonal of measure-times-sigma weights.
    pub fn apply_adjoint(&self, kind: AdjointKind, u: &StateField) -> StateField {
        self.counters
            .adjoint_applies
            .fetch_add(1, Ordering::Relaxed);
        match kind {
            AdjointKind::TInv => self.solve_t_adjoint(u),
            AdjointKind::K => self.apply_kernel_adjoint(u, false),
            AdjointKind::F => self.apply_kernel_adjoint(u, true),
            AdjointKind::B => {
                let mut out = self.apply_t_adjoint(u);
                let ks = self.apply_kernel_adjoint(u, false);
                out.add_scaled(-1.0, &ks);
                out
            }
        }
    }

    /// `(T^-1)* v = D^-1 (T^T)^-1 D v`: a reversed sweep in scaled variables.
    fn solve_t_adjoint(&self, v: &StateField) -> StateField {
        let space = &self.space;
        let grid = space.grid();
        let optics = space.optics();
        let nc = grid.n_cells;
        let h = grid.cell_width;
        let d = space.measure(Weighting::Sigma);
        let no = grid.n_ordinates();
        let mut out = space.zeros();
        self.sweep_over_ordinates(&mut out, |k, col| {
            let mu = grid.mu(k);
            let a = mu.abs() / h;
            // March against the sweep direction of T.
            if mu > 0.0 {
                let mut prev = 0.0;
                for i in (0..nc).rev() {
                    let rhs = d[i * no + k] * v.get(i, k);
                    let w = (rhs + a * prev) / (a + optics.sigma(i, k));
                    col[i] = w / d[i * no + k];
                    prev = w;
                }
            } else {
                let mut prev = 0.0;
                for i in 0..nc {
                    let rhs = d[i * no + k] * v.get(i, k);
                    let w = (rhs + a * prev) / (a + optics.sigma(i, k));
                    col[i] = w / d[i * no + k];
                    prev = w;
                }
            }
        });
        out
    }

    /// `T* v = D^-1 T^T D v`.
    pub(crate) fn apply_t_adjoint(&self, v: &StateField) -> StateField {
        let space = &self.space;
        let grid = space.grid();
        let optics = space.optics();
        let nc = grid.n_cells;
        let h = grid.cell_width;
        let d = space.measure(Weighting::Sigma);
        let no = grid.n_ordinates();
        let mut out = space.zeros();
        self.sweep_over_ordinates(&mut out, |k, col| {
            let mu = grid.mu(k);
            let a = mu.abs() / h;
            if mu > 0.0 {
                for i in 0..nc {
                    let here = d[i * no + k] * v.get(i, k);
                    let next = if i + 1 == nc {
                        0.0
                    } else {
                        d[(i + 1) * no + k] * v.get(i + 1, k)
                    };
                    col[i] = ((a + optics.sigma(i, k)) * here - a * next) / d[i * no + k];
                }
            } else {
                for i in 0..nc {
                    let here = d[i * no + k] * v.get(i, k);
                    let prev = if i == 0 {
                        0.0
                    } else {
                        d[(i - 1) * no + k] * v.get(i - 1, k)
                    };
                    col[i] = ((a + optics.sigma(i, k)) * here - a * prev) / d[i * no + k];
                }
            }
        });
        out
    }

    /// `K* v (i, k') = sigma(i,k')^-1 sum_k w_k kappa_i(k', k) sigma(i,k) v(i,k)`,
    /// and the same with the fission kernel.
    fn apply_kernel_adjoint(&self, v: &StateField, fission: bool) -> StateField {
        let space = &self.space;
        let grid = space.grid();
        let optics = space.optics();
        let no = grid.n_ordinates();
        let table = |c: usize, a: usize, b: usize| {
            if fission {
                optics.phi(c, a, b)
            } else {
                optics.kappa(c, a, b)
            }
        };
        let mut out = space.zeros();
        for i in 0..space.n_cells() {
            for kp in 0..no {
                let mut acc = 0.0;
                for k in 0..no {
                    acc += grid.weight(k) * table(i, kp, k) * optics.sigma(i, k) * v.get(i, k);
                }
                out.set(i, kp, acc / optics.sigma(i, kp));
            }
        }
        out
    }

    /// Materializes an operator column-by-column against coordinate fields.
    pub fn materialize(&self, kind: MatKind, cap: usize) -> Result<DenseOperator> {
        let dim = self.space.dim();
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        let shape = (self.space.n_cells(), self.space.n_ordinates());
        let metric = Metric::new(DVector::from_column_slice(
            self.space.measure(Weighting::Sigma),
        ));

        let column = |j: usize, kind: MatKind| -> DVector<f64> {
            let mut e = self.space.zeros();
            e.as_mut_slice()[j] = 1.0;
            let out = match kind {
                MatKind::TInv => self.solve_t(&e),
                MatKind::K => self.apply_k(&e),
                MatKind::F => self.apply_f(&e),
                MatKind::B => self.apply_b(&e),
                MatKind::C => unreachable!("handled below"),
            };
            field_to_vec(&out)
        };

        let matrix = match kind {
            MatKind::C => {
                // Dense solve route: exact inverse of the materialized B
                // applied to the materialized F.
                let b = DMatrix::from_columns(
                    &(0..dim).map(|j| column(j, MatKind::B)).collect::<Vec<_>>(),
                );
                let f = DMatrix::from_columns(
                    &(0..dim).map(|j| column(j, MatKind::F)).collect::<Vec<_>>(),
                );
                let lu = b.lu();
                lu.solve(&f)
                    .ok_or(Error::SingularSystem { lambda: f64::NAN })?
            }
            other => DMatrix::from_columns(&(0..dim).map(|j| column(j, other)).collect::<Vec<_>>()),
        };
        Ok(DenseOperator::new(matrix, metric, shape))
    }

    /// Measures the sigma-norm of the scattering fixed-point map by power
    /// iteration on its adjoint composition.
    pub fn measured_contraction_norm(&self, iters: usize) -> f64 {
        let space = &self.space;
        let mut x = space.constant(1.0);
        // Break symmetry a little so the iteration cannot sit in an
        // invariant subspace.
        for (j, v) in x.as_mut_slice().iter_mut().enumerate() {
            *v += 1e-3 * ((j * 2654435761 % 97) as f64 / 97.0);
        }
        let mut x = space.normalized(&x, Weighting::Sigma);
        let mut rayleigh: f64 = 0.0;
        for _ in 0..iters {
            let ax = self.solve_t(&self.apply_k(&x));
            let gsx = self.apply_adjoint(AdjointKind::K, &self.solve_t_adjoint(&ax));
            let r = space.inner(&gsx, &x, Weighting::Sigma);
            let n = space.norm(&gsx, Weighting::Sigma);
            if n == 0.0 {
                return 0.0;
            }
            x = gsx.scaled(1.0 / n);
            if (r - rayleigh).abs() <= 1e-14 * r.abs() {
                rayleigh = r;
                break;
            }
            rayleigh = r;
        }
        rayleigh.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{build_grid, OpticalField};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn space(sigma: f64, kappa: f64, phi: f64) -> Arc<PhaseSpace> {
        let g = build_grid(16, 1.0, 2, 0.1).unwrap();
        let o = OpticalField::constant(&g, sigma, kappa, phi).unwrap();
        PhaseSpace::new(g, o).unwrap()
    }

    fn rand_field(s: &PhaseSpace, rng: &mut rand_chacha::ChaCha8Rng) -> StateField {
        StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
            rng.gen_range(-1.0..1.0)
        })
    }

    #[test]
    fn sweep_zero_source() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let u = ops.solve_t(&s.zeros());
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(ops.apply_t(&s.zeros()).max_abs(), 0.0);
    }

    #[test]
    fn sweep_follows_upwind_recursion() {
        let g = build_grid(12, 1.0, 1, 0.3).unwrap();
        let o = OpticalField::constant(&g, 2.0, 0.0, 0.1).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let ops = OperatorSet::new(s.clone());
        let q = s.constant(2.0);
        let u = ops.solve_t(&q);
        // Positive ordinate: u_i = (mu/h u_{i-1} + 2) / (mu/h + 2), increasing
        // toward the infinite-medium value 1.
        let k = 1;
        let mu = s.grid().mu(k);
        assert!(mu > 0.0);
        let a = mu / s.grid().cell_width;
        let mut prev = 0.0;
        for i in 0..s.n_cells() {
            let expect = (a * prev + 2.0) / (a + 2.0);
            assert!((u.get(i, k) - expect).abs() < 1e-14);
            assert!(u.get(i, k) > prev);
            assert!(u.get(i, k) < 1.0);
            prev = u.get(i, k);
        }
    }

    #[test]
    fn sweep_preserves_nonnegativity() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let q =
                StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| rng.gen_range(0.0..1.0));
            assert!(ops.solve_t(&q).min_entry() >= 0.0);
            assert!(ops.apply_k(&q).min_entry() >= 0.0);
            assert!(ops.apply_f(&q).min_entry() >= 0.0);
        }
    }

    #[test]
    fn apply_t_is_exact_inverse() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let q = rand_field(&s, &mut rng);
            let r1 = ops.apply_t(&ops.solve_t(&q));
            let r2 = ops.solve_t(&ops.apply_t(&q));
            let qn = s.norm(&q, Weighting::Sigma);
            assert!(s.distance(&r1, &q, Weighting::Sigma) <= 1e-12 * qn);
            assert!(s.distance(&r2, &q, Weighting::Sigma) <= 1e-12 * qn);
        }
    }

    #[test]
    fn transport_term_vanishes_on_constants_away_from_inflow() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let u = s.constant(1.0);
        let tu = ops.apply_t(&u);
        for k in 0..s.n_ordinates() {
            let mu = s.grid().mu(k);
            let inflow_cell = if mu > 0.0 { 0 } else { s.n_cells() - 1 };
            for i in 0..s.n_cells() {
                if i == inflow_cell {
                    let expect = mu.abs() / s.grid().cell_width + 2.0;
                    assert!((tu.get(i, k) - expect).abs() < 1e-12);
                } else {
                    assert!((tu.get(i, k) - 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_kernel_quadrature() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let u = s.constant(1.0);
        let ku = ops.apply_k(&u);
        for v in ku.as_slice() {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_scattering_collapses_b_to_t() {
        let g = build_grid(8, 1.0, 2, 0.1).unwrap();
        let o = OpticalField::constant(&g, 2.0, 0.0, 0.5).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let ops = OperatorSet::new(s.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = rand_field(&s, &mut rng);
        let bu = ops.apply_b(&u);
        let tu = ops.apply_t(&u);
        assert!(s.distance(&bu, &tu, Weighting::Sigma) < 1e-14);
    }

    #[test]
    fn discrete_accretivity() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let alpha = s.assumptions().alpha;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let u = rand_field(&s, &mut rng);
            let bu = ops.apply_b(&u);
            let lhs = s.inner(&bu, &u, Weighting::Plain);
            let rhs = alpha * s.inner(&u, &u, Weighting::Plain);
            assert!(lhs >= rhs - 1e-12, "accretivity violated: {lhs} < {rhs}");
        }
    }

    #[test]
    fn adjoint_identity_all_operators() {
        let g = build_grid(10, 1.3, 2, 0.15).unwrap();
        let o =
            OpticalField::per_material(&g, &[(0.6, 2.2, 0.7, 0.4), (1.3, 1.6, 0.3, 0.9)]).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let ops = OperatorSet::new(s.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = rand_field(&s, &mut rng);
            let v = rand_field(&s, &mut rng);
            let scale = s.norm(&u, Weighting::Sigma) * s.norm(&v, Weighting::Sigma);
            for kind in [
                AdjointKind::TInv,
                AdjointKind::K,
                AdjointKind::F,
                AdjointKind::B,
            ] {
                let au = match kind {
                    AdjointKind::TInv => ops.solve_t(&u),
                    AdjointKind::K => ops.apply_k(&u),
                    AdjointKind::F => ops.apply_f(&u),
                    AdjointKind::B => ops.apply_b(&u),
                };
                let asv = ops.apply_adjoint(kind, &v);
                let lhs = s.inner(&au, &v, Weighting::Sigma);
                let rhs = s.inner(&u, &asv, Weighting::Sigma);
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * scale,
                    "{kind:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn symmetric_kernel_uniform_sigma_self_adjoint() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let u = rand_field(&s, &mut rng);
        let ku = ops.apply_k(&u);
        let ksu = ops.apply_adjoint(AdjointKind::K, &u);
        assert!(s.distance(&ku, &ksu, Weighting::Sigma) < 1e-13);
    }

    #[test]
    fn adjoint_matches_dense_weighted_transpose() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let tinv = ops.materialize(MatKind::TInv, DEFAULT_DENSE_CAP).unwrap();
        let ta = tinv.adjoint_matrix();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let v = rand_field(&s, &mut rng);
        let lhs = ops.apply_adjoint(AdjointKind::TInv, &v);
        let rhs = &ta * crate::dense::field_to_vec(&v);
        for j in 0..s.dim() {
            assert!((lhs.as_slice()[j] - rhs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn materialize_matches_matrix_free() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let b = ops.materialize(MatKind::B, DEFAULT_DENSE_CAP).unwrap();
        let tinv = ops.materialize(MatKind::TInv, DEFAULT_DENSE_CAP).unwrap();
        assert!(tinv.min_entry() >= 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let u = rand_field(&s, &mut rng);
        let lhs = b.apply_field(&u);
        let rhs = ops.apply_b(&u);
        assert!(s.distance(&lhs, &rhs, Weighting::Sigma) <= 1e-13 * s.norm(&u, Weighting::Sigma));
    }

    #[test]
    fn materialize_respects_cap() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        assert!(matches!(
            ops.materialize(MatKind::C, 8),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn measured_contraction_below_rho() {
        let s = space(2.0, 0.5, 0.5);
        let ops = OperatorSet::new(s.clone());
        let measured = ops.measured_contraction_norm(300);
        assert!(measured <= s.assumptions().rho + 1e-8, "{measured}");
    }

    #[test]
    fn threaded_sweeps_match_serial() {
        let g = build_grid(16, 1.0, 4, 0.1).unwrap();
        let o =
            OpticalField::per_material(&g, &[(0.4, 2.0, 0.5, 0.5), (1.0, 1.7, 0.3, 0.6)]).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let serial = OperatorSet::new(s.clone());
        let par = OperatorSet::with_threads(s.clone(), 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q = rand_field(&s, &mut rng);
        for (a, b) in [
            (serial.solve_t(&q), par.solve_t(&q)),
            (serial.apply_t(&q), par.apply_t(&q)),
            (serial.apply_k(&q), par.apply_k(&q)),
            (serial.apply_f(&q), par.apply_f(&q)),
        ] {
            assert_eq!(a, b, "threaded application must be bitwise identical");
        }
    }
}
