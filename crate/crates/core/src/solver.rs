//! Certified source solves: fixed-point realizations of the inverse of B and
//! of the criticality map C, each returning a computable error bound in the
//! sigma-weighted norm.

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::ops::{AdjointKind, OperatorSet};
use crate::space::{PhaseSpace, Weighting};

/// A field together with a rigorous sigma-norm error bound and cost counters.
#[derive(Debug, Clone)]
pub struct CertifiedResult {
    pub value: StateField,
    /// Certified bound on the sigma-norm distance to the exact result.
    pub bound: f64,
    /// Fixed-point steps taken.
    pub iterations: u64,
    pub c_applications: u64,
}

fn iteration_cap(eta: f64, rho: f64, first_increment: f64) -> u64 {
    if first_increment == 0.0 || rho == 0.0 {
        return 16;
    }
    let needed = (eta * (1.0 - rho) / first_increment).ln() / rho.ln();
    needed.max(0.0).ceil() as u64 + 10
}

/// Geometric fixed point with the increment-form stopping rule
/// `rho/(1-rho) * ||u_{k+1} - u_k||_sigma <= eta`.
fn contractive_fixed_point(
    space: &PhaseSpace,
    eta: f64,
    init: StateField,
    step: impl Fn(&StateField) -> StateField,
) -> Result<CertifiedResult> {
    let rho = space.assumptions().rho;
    if rho >= 1.0 {
        return Err(Error::NotContractive { rho });
    }
    let factor = rho / (1.0 - rho);

    let mut u = init;
    let next = step(&u);
    let first = space.distance(&next, &u, Weighting::Sigma);
    u = next;
    let mut steps = 1u64;
    let mut bound = factor * first;
    if bound <= eta || first == 0.0 {
        return Ok(CertifiedResult {
            value: u,
            bound,
            iterations: steps,
            c_applications: 0,
        });
    }

    let cap = iteration_cap(eta, rho, first);
    loop {
        let next = step(&u);
        let inc = space.distance(&next, &u, Weighting::Sigma);
        u = next;
        steps += 1;
        bound = factor * inc;
        if bound <= eta {
            return Ok(CertifiedResult {
                value: u,
                bound,
                iterations: steps,
                c_applications: 0,
            });
        }
        if steps >= cap {
            return Err(Error::IterationCap { cap, bound });
        }
    }
}

/// Solves `B u = q` by the contractive scattering fixed point
/// `u_{k+1} = T^-1 (K u_k + q)` from `u_0 = T^-1 q`.
pub fn solve_b(ops: &OperatorSet, q: &StateField, eta: f64) -> Result<CertifiedResult> {
    let init = ops.solve_t(q);
    contractive_fixed_point(ops.space(), eta, init, |u| {
        ops.solve_t(&ops.apply_k(u).add(q))
    })
}

/// Adjoint counterpart of [`solve_b`]: solves `B* z = q` with the adjoint
/// fixed point `z_{k+1} = T^-* (K* z_k + q)`, which contracts at the same
/// rate because the kernel mass bound covers both quadrature variables.
pub fn solve_b_adjoint(ops: &OperatorSet, q: &StateField, eta: f64) -> Result<CertifiedResult> {
    let init = ops.apply_adjoint(AdjointKind::TInv, q);
    contractive_fixed_point(ops.space(), eta, init, |z| {
        let kz = ops.apply_adjoint(AdjointKind::K, z).add(q);
        ops.apply_adjoint(AdjointKind::TInv, &kz)
    })
}

/// Certified application of `C = B^-1 F`. The fission apply is exact at this
/// scale, so the whole budget goes to the source solve.
pub fn apply_c(ops: &OperatorSet, f: &StateField, eta: f64) -> Result<CertifiedResult> {
    apply_c_budget(ops, f, 0.0, eta)
}

/// Split-budget variant: `eta_f` is the tolerance of the fission apply
/// (zero here, kept for compressed-kernel backends) and `eta_solve` the
/// source-solve tolerance. The certificate combines them through the bound
/// on the inverse of B.
pub fn apply_c_budget(
    ops: &OperatorSet,
    f: &StateField,
    eta_f: f64,
    eta_solve: f64,
) -> Result<CertifiedResult> {
    let g = ops.apply_f(f);
    let mut out = solve_b(ops, &g, eta_solve)?;
    out.bound += b_inverse_bound(ops) * eta_f;
    out.c_applications += 1;
    ops.count_c_apply();
    Ok(out)
}

/// Certified application of `C* = F* B^-*` via the adjoint fixed point.
pub fn apply_c_adjoint(ops: &OperatorSet, f: &StateField, eta: f64) -> Result<CertifiedResult> {
    // F* applied exactly to an approximate solve: budget the inner solve by
    // the kernel-mass bound on the fission norm.
    let f_norm = f_star_bound(ops);
    let inner_eta = eta / f_norm.max(1.0);
    let z = solve_b_adjoint(ops, f, inner_eta)?;
    let value = ops.apply_adjoint(AdjointKind::F, &z.value);
    ops.count_c_apply();
    Ok(CertifiedResult {
        value,
        bound: f_norm * z.bound,
        iterations: z.iterations,
        c_applications: z.c_applications + 1,
    })
}

/// Crude certified bound on the sigma-norm of the inverse of B.
pub fn b_inverse_bound(ops: &OperatorSet) -> f64 {
    let space = ops.space();
    let rho = space.assumptions().rho;
    1.0 / (space.optics().sigma_min() * (1.0 - rho))
}

/// Schur-test bound on the sigma-norm of F (and of its adjoint).
pub fn f_star_bound(ops: &OperatorSet) -> f64 {
    let space = ops.space();
    let ratio = space.optics().sigma_max() / space.optics().sigma_min();
    space.assumptions().big_m * ratio.sqrt()
}

/// An operator that can be applied within a requested certified tolerance.
/// Implemented by the transport composition and by synthetic dense operators
/// used in tests and diagnostics.
pub trait CertifiedMap {
    fn shape(&self) -> (usize, usize);
    /// Inner product of the metric the certificates are stated in.
    fn inner(&self, u: &StateField, v: &StateField) -> f64;
    fn apply(&self, f: &StateField, eta: f64) -> Result<CertifiedResult>;
    fn apply_adjoint(&self, f: &StateField, eta: f64) -> Result<CertifiedResult>;

    fn norm(&self, u: &StateField) -> f64 {
        self.inner(u, u).sqrt()
    }

    fn dim(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }
}

/// The transport criticality map as a certified operator.
pub struct TransportMap<'a> {
    ops: &'a OperatorSet,
}

impl<'a> TransportMap<'a> {
    pub fn new(ops: &'a OperatorSet) -> Self {
        Self { ops }
    }

    pub fn ops(&self) -> &'a OperatorSet {
        self.ops
    }
}

impl CertifiedMap for TransportMap<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.ops.space().n_cells(), self.ops.space().n_ordinates())
    }

    fn inner(&self, u: &StateField, v: &StateField) -> f64 {
        self.ops.space().inner(u, v, Weighting::Sigma)
    }

    fn apply(&self, f: &StateField, eta: f64) -> Result<CertifiedResult> {
        apply_c(self.ops, f, eta)
    }

    fn apply_adjoint(&self, f: &StateField, eta: f64) -> Result<CertifiedResult> {
        apply_c_adjoint(self.ops, f, eta)
    }
}

/// A dense operator applied exactly (bound at round-off scale), with the
/// metric carried by the operator. Used for synthetic cases.
pub struct DenseMap {
    op: crate::dense::DenseOperator,
    adjoint: nalgebra::DMatrix<f64>,
    norm_scale: f64,
}

impl DenseMap {
    pub fn new(op: crate::dense::DenseOperator) -> Self {
        let adjoint = op.adjoint_matrix();
        let norm_scale = op.operator_norm();
        Self {
            op,
            adjoint,
            norm_scale,
        }
    }

    pub fn op(&self) -> &crate::dense::DenseOperator {
        &self.op
    }
}

impl CertifiedMap for DenseMap {
    fn shape(&self) -> (usize, usize) {
        self.op.shape()
    }

    fn inner(&self, u: &StateField, v: &StateField) -> f64 {
        let d = self.op.metric().weights();
        let mut acc = 0.0;
        for j in 0..d.len() {
            acc += d[j] * u.as_slice()[j] * v.as_slice()[j];
        }
        acc
    }

    fn apply(&self, f: &StateField, _eta: f64) -> Result<CertifiedResult> {
        let value = self.op.apply_field(f);
        let bound = 64.0 * f64::EPSILON * self.norm_scale * self.norm(f);
        Ok(CertifiedResult {
            value,
            bound,
            iterations: 1,
            c_applications: 1,
        })
    }

    fn apply_adjoint(&self, f: &StateField, _eta: f64) -> Result<CertifiedResult> {
        let v = crate::dense::field_to_vec(f);
        let out = &self.adjoint * v;
        let value = crate::dense::vec_to_field(&out, self.op.shape());
        let bound = 64.0 * f64::EPSILON * self.norm_scale * self.norm(f);
        Ok(CertifiedResult {
            value,
            bound,
            iterations: 1,
            c_applications: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::field_to_vec;
    use crate::ops::MatKind;
    use crate::phase::{build_grid, OpticalField};
    use crate::space::PhaseSpace;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use std::sync::Arc;

    fn scen_const_ops() -> (Arc<PhaseSpace>, OperatorSet) {
        let g = build_grid(16, 1.0, 2, 0.1).unwrap();
        let o = OpticalField::constant(&g, 2.0, 0.5, 0.5).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let ops = OperatorSet::new(s.clone());
        (s, ops)
    }

    #[test]
    fn zero_source_converges_immediately() {
        let (s, ops) = scen_const_ops();
        let r = solve_b(&ops, &s.zeros(), 1e-10).unwrap();
        assert_eq!(r.value.max_abs(), 0.0);
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn bound_is_sound_against_dense_lu() {
        let (s, ops) = scen_const_ops();
        let b = ops.materialize(MatKind::B, 4096).unwrap();
        let lu = b.matrix().clone().lu();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for eta in [1e-4, 1e-8, 1e-12] {
            for _ in 0..5 {
                let q = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
                    rng.gen_range(-1.0..1.0)
                });
                let q = q.scaled(1.0 / s.norm(&q, Weighting::Sigma));
                let r = solve_b(&ops, &q, eta).unwrap();
                let exact = lu.solve(&field_to_vec(&q)).unwrap();
                let exact = crate::dense::vec_to_field(&exact, (s.n_cells(), s.n_ordinates()));
                let true_err = s.distance(&r.value, &exact, Weighting::Sigma);
                assert!(
                    true_err <= r.bound,
                    "true {true_err:e} > bound {:e}",
                    r.bound
                );
                assert!(r.bound <= eta);
            }
        }
    }

    #[test]
    fn positivity_preserved() {
        let (s, ops) = scen_const_ops();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let q = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| rng.gen_range(0.0..1.0));
        let r = solve_b(&ops, &q, 1e-10).unwrap();
        assert!(r.value.min_entry() >= -1e-12);
        let c = apply_c(&ops, &q, 1e-10).unwrap();
        assert!(c.value.min_entry() >= -1e-12);
    }

    #[test]
    fn iteration_count_tracks_geometric_rate() {
        let (s, ops) = scen_const_ops();
        let rho = s.assumptions().rho;
        let q = s.constant(1.0);
        for eta in [1e-4, 1e-8, 1e-12] {
            let r = solve_b(&ops, &q, eta).unwrap();
            let budget = eta.ln() / rho.ln() + 10.0;
            assert!(
                (r.iterations as f64) <= budget,
                "{} > {budget}",
                r.iterations
            );
        }
    }

    #[test]
    fn halving_eta_costs_a_bounded_number_of_steps() {
        let (s, ops) = scen_const_ops();
        let rho = s.assumptions().rho;
        let q = s.constant(1.0);
        let extra = (2.0_f64.ln() / rho.ln().abs()).ceil() as u64 + 1;
        let mut eta = 1e-3;
        let mut prev = solve_b(&ops, &q, eta).unwrap().iterations;
        for _ in 0..20 {
            eta /= 2.0;
            let next = solve_b(&ops, &q, eta).unwrap().iterations;
            assert!(
                next <= prev + extra,
                "halving eta cost {} extra steps",
                next - prev
            );
            prev = next;
        }
    }

    #[test]
    fn not_contractive_is_rejected() {
        let g = build_grid(4, 1.0, 1, 0.3).unwrap();
        // Scattering mass equals sigma: rho = 1.
        let o = OpticalField::constant(&g, 1.0, 1.0, 0.1).unwrap();
        let s = PhaseSpace::new(g, o).unwrap();
        let ops = OperatorSet::new(s.clone());
        assert!(matches!(
            solve_b(&ops, &s.constant(1.0), 1e-4),
            Err(Error::NotContractive { .. })
        ));
    }

    #[test]
    fn apply_c_zero_and_counters() {
        let (s, ops) = scen_const_ops();
        let r = apply_c(&ops, &s.zeros(), 1e-8).unwrap();
        assert_eq!(r.value.max_abs(), 0.0);
        assert_eq!(r.bound, 0.0);
        assert_eq!(r.c_applications, 1);
        assert_eq!(ops.counters().c_applies, 1);
    }

    #[test]
    fn apply_c_certificate_sound() {
        let (s, ops) = scen_const_ops();
        let c = ops.materialize(MatKind::C, 4096).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let f = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
                rng.gen_range(-1.0..1.0)
            });
            let r = apply_c(&ops, &f, 1e-9).unwrap();
            let exact = c.apply_field(&f);
            let err = s.distance(&r.value, &exact, Weighting::Sigma);
            assert!(
                err <= r.bound && r.bound <= 1e-9,
                "err {err:e} bound {:e}",
                r.bound
            );
        }
    }

    #[test]
    fn adjoint_contract_between_certified_applies() {
        let (s, ops) = scen_const_ops();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let eta = 1e-9;
        for _ in 0..5 {
            let u = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
                rng.gen_range(-1.0..1.0)
            });
            let v = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
                rng.gen_range(-1.0..1.0)
            });
            let cu = apply_c(&ops, &u, eta).unwrap();
            let csv = apply_c_adjoint(&ops, &v, eta).unwrap();
            let lhs = s.inner(&cu.value, &v, Weighting::Sigma);
            let rhs = s.inner(&u, &csv.value, Weighting::Sigma);
            let allow = 2.0 * eta * (s.norm(&u, Weighting::Sigma) + s.norm(&v, Weighting::Sigma));
            assert!((lhs - rhs).abs() <= allow);
        }
    }

    #[test]
    fn adjoint_apply_matches_dense_transpose() {
        let (s, ops) = scen_const_ops();
        let c = ops.materialize(MatKind::C, 4096).unwrap();
        let ct = c.adjoint_matrix();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = StateField::from_fn(s.n_cells(), s.n_ordinates(), |_, _| {
            rng.gen_range(-1.0..1.0)
        });
        let r = apply_c_adjoint(&ops, &f, 1e-11).unwrap();
        let exact = &ct * field_to_vec(&f);
        let exact = crate::dense::vec_to_field(&exact, (s.n_cells(), s.n_ordinates()));
        assert!(s.distance(&r.value, &exact, Weighting::Sigma) <= 1e-10);
    }
}
