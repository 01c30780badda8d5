//! Newton scheme for the criticality eigenpair: residual and Jacobian
//! machinery, exact (dense) and descent-based (matrix-free) updates, and the
//! driver with dynamically scheduled update tolerances.

use nalgebra::{DMatrix, DVector};

use crate::dense::{field_to_vec, vec_to_field, DenseOperator};
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::solver::CertifiedMap;

pub const DEFAULT_GAUGE_SQ: f64 = 2.0;

/// Eigenpair iterate with the gauge convention attached. The residual's
/// second component `1 - ||Cu||^2 / g^2` fixes the eigenvector scale at the
/// solution: `||C u|| = g`.
#[derive(Debug, Clone)]
pub struct EigenIterate {
    pub u: StateField,
    pub lambda: f64,
    pub gauge_sq: f64,
}

impl EigenIterate {
    pub fn new(u: StateField, lambda: f64) -> Self {
        Self {
            u,
            lambda,
            gauge_sq: DEFAULT_GAUGE_SQ,
        }
    }

    pub fn with_gauge(u: StateField, lambda: f64, gauge_sq: f64) -> Self {
        Self {
            u,
            lambda,
            gauge_sq,
        }
    }
}

/// Product-space distance between two iterates.
pub fn pair_distance(map: &dyn CertifiedMap, a: &EigenIterate, u: &StateField, lambda: f64) -> f64 {
    let du = a.u.sub(u);
    (map.inner(&du, &du) + (a.lambda - lambda).powi(2)).sqrt()
}

/// Builds a Newton iterate from a normalized power iterate: the eigenvector
/// is rescaled onto the gauge manifold and the shift comes from the Rayleigh
/// quotient.
pub fn iterate_from_power(
    map: &dyn CertifiedMap,
    a: &StateField,
    eta: f64,
    gauge_sq: f64,
) -> Result<EigenIterate> {
    let c = map.apply(a, eta)?;
    let cn = map.norm(&c.value);
    if cn <= eta {
        return Err(Error::ZeroImage { norm: cn, eta });
    }
    let rayleigh = map.inner(&c.value, a) / map.inner(a, a);
    let u = a.scaled(gauge_sq.sqrt() / cn);
    Ok(EigenIterate::with_gauge(u, 1.0 / rayleigh, gauge_sq))
}

/// Per-step accuracy rule for the update solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceSchedule {
    /// `eta_n = min(omega/2, (beta_bar * gamma / 2) * e_n^2)`: keeps the
    /// perturbed iteration quadratic.
    Quadratic {
        omega: f64,
        beta_bar: f64,
        gamma: f64,
    },
    /// `eta_n = min(omega/2, (zeta/2) * e_n)`: linear reduction with chosen
    /// factor `zeta`.
    Linear { omega: f64, zeta: f64 },
}

impl ToleranceSchedule {
    pub fn validated(self) -> Result<Self> {
        match self {
            ToleranceSchedule::Quadratic {
                omega,
                beta_bar,
                gamma,
            } => {
                if omega <= 0.0 || beta_bar <= 0.0 || gamma <= 0.0 {
                    return Err(Error::InvalidInput(
                        "quadratic schedule needs positive constants".into(),
                    ));
                }
            }
            ToleranceSchedule::Linear { omega, zeta } => {
                if omega <= 0.0 || !(zeta > 0.0 && zeta < 1.0) {
                    return Err(Error::InvalidInput(
                        "linear schedule needs omega > 0, zeta in (0,1)".into(),
                    ));
                }
            }
        }
        Ok(self)
    }

    pub fn eta(&self, e_hat: f64) -> f64 {
        match *self {
            ToleranceSchedule::Quadratic {
                omega,
                beta_bar,
                gamma,
            } => (omega / 2.0).min(0.5 * beta_bar * gamma * e_hat * e_hat),
            ToleranceSchedule::Linear { omega, zeta } => (omega / 2.0).min(0.5 * zeta * e_hat),
        }
    }
}

/// Residual of the eigen-system at an iterate, evaluated through one
/// certified apply. `r1 = u - lambda * C u`, `r2 = 1 - ||Cu||^2 / g^2`.
#[derive(Debug, Clone)]
pub struct Residual {
    pub r1: StateField,
    pub r2: f64,
    /// Certified bound on the product-norm error of (r1, r2).
    pub bound: f64,
    /// The certified image `C u` used to form the residual.
    pub c_of_u: StateField,
    pub c_bound: f64,
    pub c_applications: u64,
}

pub fn residual(map: &dyn CertifiedMap, it: &EigenIterate, eta: f64) -> Result<Residual> {
    let c = map.apply(&it.u, eta)?;
    let mut r1 = it.u.clone();
    r1.add_scaled(-it.lambda, &c.value);
    let cn = map.norm(&c.value);
    let r2 = 1.0 - cn * cn / it.gauge_sq;
    let b1 = it.lambda.abs() * c.bound;
    let b2 = (2.0 * cn + c.bound) * c.bound / it.gauge_sq;
    Ok(Residual {
        r1,
        r2,
        bound: b1.hypot(b2),
        c_of_u: c.value,
        c_bound: c.bound,
        c_applications: c.c_applications,
    })
}

pub fn residual_norm(map: &dyn CertifiedMap, r: &Residual) -> f64 {
    (map.inner(&r.r1, &r.r1) + r.r2 * r.r2).sqrt()
}

/// The block linearization as printed in the saddle form: first component
/// `M dir_u - dir_nu * f_bar`, second component `-<f_bar, dir_u>` with
/// `f_bar = C u_bar` cached by the caller. This is the operator whose
/// inverse-norm bound the neighborhood constants certify.
pub fn apply_dr(
    map: &dyn CertifiedMap,
    base: &EigenIterate,
    f_bar: &StateField,
    dir_u: &StateField,
    dir_nu: f64,
    eta: f64,
) -> Result<(StateField, f64)> {
    let cd = map.apply(dir_u, eta)?;
    let mut first = dir_u.clone();
    first.add_scaled(-base.lambda, &cd.value);
    first.add_scaled(-dir_nu, f_bar);
    let second = -map.inner(f_bar, dir_u);
    Ok((first, second))
}

/// Row functional of the gauge component of the exact derivative:
/// `p = (2/g^2) C* f_bar`. The quadratic gauge differentiates to
/// `-(2/g^2) <C u_bar, C du>`, i.e. the block form with `p` in place of
/// `f_bar` in the constraint row; updates solved with this row are what make
/// the iteration genuinely second order.
pub fn gauge_row(
    map: &dyn CertifiedMap,
    f_bar: &StateField,
    gauge_sq: f64,
    eta: f64,
) -> Result<StateField> {
    let cs = map.apply_adjoint(f_bar, eta)?;
    Ok(cs.value.scaled(2.0 / gauge_sq))
}

fn split_saddle(sol: &DVector<f64>, shape: (usize, usize)) -> (StateField, f64) {
    let n = sol.len() - 1;
    let du = vec_to_field(&DVector::from_column_slice(&sol.as_slice()[..n]), shape);
    (du, sol[n])
}

/// Exact Newton update by a dense bordered solve in the weighted coordinates.
/// Returns `(delta_u, delta_lambda)`.
pub fn newton_update_oracle(
    dense_c: &DenseOperator,
    it: &EigenIterate,
) -> Result<(StateField, f64)> {
    let n = dense_c.dim();
    let w = dense_c.metric().sqrt_weights();
    let s = dense_c.similarity_matrix();

    let u_hat = {
        let u = field_to_vec(&it.u);
        DVector::from_fn(n, |i, _| w[i] * u[i])
    };
    let f_hat = &s * &u_hat;
    let p_hat = (s.transpose() * &f_hat) * (2.0 / it.gauge_sq);

    let r1_hat = &u_hat - &f_hat * it.lambda;
    let r2 = 1.0 - f_hat.norm_squared() / it.gauge_sq;

    let solve = |lambda: f64| -> Option<DVector<f64>> {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = -lambda * s[(i, j)];
            }
            m[(i, i)] += 1.0;
            m[(i, n)] = -f_hat[i];
            m[(n, i)] = -p_hat[i];
        }
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -r1_hat[i];
        }
        rhs[n] = -r2;
        let lu = m.clone().lu();
        let mut sol = lu.solve(&rhs)?;
        // One sweep of iterative refinement keeps the oracle floor near
        // round-off instead of cond-times-round-off.
        for _ in 0..2 {
            let resid = &rhs - &m * &sol;
            match lu.solve(&resid) {
                Some(corr) => sol += corr,
                None => break,
            }
        }
        Some(sol)
    };

    let sol = match solve(it.lambda) {
        Some(s) => s,
        // Exactly singular bordered system: nudge the shift and retry.
        None => solve(it.lambda * (1.0 + 1e-12) + 1e-300)
            .ok_or(Error::SingularSystem { lambda: it.lambda })?,
    };

    let mut du_hat = DVector::zeros(n);
    for i in 0..n {
        du_hat[i] = sol[i] / w[i];
    }
    let mut full = DVector::zeros(n + 1);
    full.rows_mut(0, n).copy_from(&du_hat);
    full[n] = sol[n];
    Ok(split_saddle(&full, dense_c.shape()))
}

/// Block-elimination form of the same update:
/// `delta_u = delta_lambda * M^-1 f - u_n` with
/// `delta_lambda = (r2 + <p, u_n>) / <p, M^-1 f>`. Requires inverting M,
/// which degenerates as lambda approaches the eigenvalue; kept as the
/// cross-check and to exhibit that contrast.
pub fn newton_update_elimination(
    dense_c: &DenseOperator,
    it: &EigenIterate,
) -> Result<(StateField, f64)> {
    let n = dense_c.dim();
    let w = dense_c.metric().sqrt_weights();
    let s = dense_c.similarity_matrix();
    let u_hat = {
        let u = field_to_vec(&it.u);
        DVector::from_fn(n, |i, _| w[i] * u[i])
    };
    let f_hat = &s * &u_hat;
    let p_hat = (s.transpose() * &f_hat) * (2.0 / it.gauge_sq);
    let r2 = 1.0 - f_hat.norm_squared() / it.gauge_sq;

    let mut m = DMatrix::identity(n, n);
    m -= &s * it.lambda;
    let lu = m.lu();
    let minv_f = lu
        .solve(&f_hat)
        .ok_or(Error::SingularSystem { lambda: it.lambda })?;

    let denom = p_hat.dot(&minv_f);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularSystem { lambda: it.lambda });
    }
    let dl = (r2 + p_hat.dot(&u_hat)) / denom;
    let du_hat = &minv_f * dl - &u_hat;
    let du = DVector::from_fn(n, |i, _| du_hat[i] / w[i]);
    Ok((vec_to_field(&du, dense_c.shape()), dl))
}

/// Result of one descent-based update solve.
#[derive(Debug, Clone)]
pub struct DescentUpdate {
    pub delta_u: StateField,
    pub delta_lambda: f64,
    /// Certified bound on the residual of the update equation.
    pub achieved_residual: f64,
    pub sweeps: u64,
    pub c_applications: u64,
    /// Worst per-sweep objective reduction factor observed.
    pub worst_factor: f64,
}

const DESCENT_MAX_SWEEPS: u64 = 2000;
const DESCENT_STALL_WINDOW: usize = 20;
const DESCENT_REFRESH_EVERY: u64 = 50;
/// Fraction of the update tolerance spent on each inner apply, measured
/// against the certification budget `eta / beta_hat`. The cached image of
/// the base iterate enters the update system scaled by the shift, so the
/// raw fraction must be discounted by `beta_hat * (1 + |lambda|)` for the
/// certificate to close.
const INNER_TOL_FRACTION: f64 = 0.05;

/// Matrix-free update solve: minimizes the residual functional
/// `Q(w, nu) = 1/2 ||M w - nu f + g||^2 + 1/2 (s - <p, w>)^2` by projected
/// gradient descent, the scalar gauge constraint held exactly through the
/// projection. The exact line search runs over the plane spanned by the new
/// steepest-descent direction and the previous step, which conjugates
/// successive directions at no extra operator cost. Stops when
/// `sqrt(2Q) <= eta_n / beta_hat`.
pub fn newton_update_descent(
    map: &dyn CertifiedMap,
    it: &EigenIterate,
    eta_n: f64,
    beta_hat: f64,
) -> Result<DescentUpdate> {
    let lambda = it.lambda;
    let inner = INNER_TOL_FRACTION * eta_n / (beta_hat * (1.0 + lambda.abs()));
    let mut c_apps = 0u64;

    let fr = map.apply(&it.u, inner)?;
    c_apps += fr.c_applications.max(1);
    let f = fr.value;
    let f_norm_sq = map.inner(&f, &f);
    // g = M u = u - lambda * C u ; s = gauge residual value.
    let mut g = it.u.clone();
    g.add_scaled(-lambda, &f);
    let s_val = 1.0 - f_norm_sq / it.gauge_sq;

    let pr = map.apply_adjoint(&f, inner)?;
    c_apps += pr.c_applications.max(1);
    let p = pr.value.scaled(2.0 / it.gauge_sq);
    let p_norm_sq = map.inner(&p, &p);
    if p_norm_sq == 0.0 {
        return Err(Error::SingularSystem { lambda });
    }
    // The f and p caches perturb the whole update system; their certified
    // bounds enter every residual statement below.
    let sys_err = (2.0 * lambda.abs() + 2.0) * fr.bound
        + 4.0 * (2.0 / it.gauge_sq) * pr.bound * (1.0 + map.norm(&it.u));

    // Start on the constraint set {<p, w> = s}: minimal-norm constraint
    // point plus the component of the natural initializer (the part of u_n
    // off the current eigendirection) orthogonal to p.
    let mut w = p.scaled(s_val / p_norm_sq);
    {
        let uf = map.inner(&it.u, &f) / f_norm_sq.max(f64::MIN_POSITIVE);
        let mut init = it.u.clone();
        init.add_scaled(-uf, &f);
        let ip = map.inner(&init, &p) / p_norm_sq;
        init.add_scaled(-ip, &p);
        w.add_scaled(1.0, &init);
    }
    let mut nu = 0.0_f64;

    // r1 = M w - nu f + g, tracked incrementally; the affine structure makes
    // the update exact up to the certified apply errors accumulated in
    // `r1_err`.
    let (mut r1, mut r1_err) = {
        let cw = map.apply(&w, inner)?;
        c_apps += cw.c_applications.max(1);
        let mut r = w.clone();
        r.add_scaled(-lambda, &cw.value);
        r.add_scaled(-nu, &f);
        r.add_scaled(1.0, &g);
        (r, lambda.abs() * cw.bound)
    };

    // Previous step and its image under the linear part, for the 2-plane
    // line search.
    let mut prev_step: Option<(StateField, f64, StateField, f64)> = None; // (s_w, s_nu, J s, err)

    let stop = eta_n / beta_hat;
    let mut q_prev = f64::INFINITY;
    let mut worst_factor: f64 = 0.0;
    let mut stall = 0usize;
    let mut sweeps = 0u64;

    loop {
        let r2 = s_val - map.inner(&p, &w);
        let mut q = 0.5 * (map.inner(&r1, &r1) + r2 * r2);
        let mut resid = (2.0 * q).sqrt() + r1_err + sys_err;

        // The cheap tracking applies accumulate certified pessimism that can
        // hide an already-converged iterate; when only that slack blocks the
        // stop test, re-certify the residual with one tight apply.
        if resid > stop && (2.0 * q).sqrt() + sys_err <= 0.8 * stop {
            let tight = (stop / (8.0 * (1.0 + lambda.abs()))).max(1e-15);
            let cw = map.apply(&w, tight)?;
            c_apps += cw.c_applications.max(1);
            let mut r = w.clone();
            r.add_scaled(-lambda, &cw.value);
            r.add_scaled(-nu, &f);
            r.add_scaled(1.0, &g);
            r1 = r;
            r1_err = lambda.abs() * cw.bound;
            prev_step = None;
            q = 0.5 * (map.inner(&r1, &r1) + r2 * r2);
            resid = (2.0 * q).sqrt() + r1_err + sys_err;
        }

        if resid <= stop {
            return Ok(DescentUpdate {
                delta_u: w,
                delta_lambda: nu,
                achieved_residual: resid,
                sweeps,
                c_applications: c_apps,
                worst_factor,
            });
        }
        if sweeps >= DESCENT_MAX_SWEEPS {
            return Err(Error::DescentStall {
                sweeps,
                residual: resid,
                target: stop,
            });
        }

        if q_prev.is_finite() && q_prev > 0.0 {
            let factor = q / q_prev;
            worst_factor = worst_factor.max(factor);
            if factor > 1.0 - 1e-3 {
                stall += 1;
                if stall >= DESCENT_STALL_WINDOW {
                    return Err(Error::DescentStall {
                        sweeps,
                        residual: resid,
                        target: stop,
                    });
                }
            } else {
                stall = 0;
            }
        }
        q_prev = q;

        // Steepest descent direction D = -J* r, gauge component projected
        // onto the constraint tangent space.
        let mstar_r1 = {
            let cs = map.apply_adjoint(&r1, inner)?;
            c_apps += cs.c_applications.max(1);
            let mut v = r1.clone();
            v.add_scaled(-lambda, &cs.value);
            v
        };
        let mut d_w = mstar_r1.scaled(-1.0);
        d_w.add_scaled(r2, &p);
        let proj = map.inner(&p, &d_w) / p_norm_sq;
        d_w.add_scaled(-proj, &p);
        let d_nu = map.inner(&f, &r1);

        // J D = (M d_w - d_nu f, 0) on the tangent space.
        let cd = map.apply(&d_w, inner)?;
        c_apps += cd.c_applications.max(1);
        let mut jd = d_w.clone();
        jd.add_scaled(-lambda, &cd.value);
        jd.add_scaled(-d_nu, &f);
        let jd_err = lambda.abs() * cd.bound;

        // Minimize ||r1 + xi J D + psi J s_prev|| over the search plane.
        let a11 = map.inner(&jd, &jd);
        if a11 == 0.0 {
            return Err(Error::DescentStall {
                sweeps,
                residual: resid,
                target: stop,
            });
        }
        let b1 = map.inner(&r1, &jd);
        let (xi, psi) = match &prev_step {
            Some((_, _, js, _)) => {
                let a12 = map.inner(&jd, js);
                let a22 = map.inner(js, js);
                let b2 = map.inner(&r1, js);
                let det = a11 * a22 - a12 * a12;
                if det.abs() <= 1e-14 * a11 * a22 || a22 == 0.0 {
                    (-b1 / a11, 0.0)
                } else {
                    ((-b1 * a22 + b2 * a12) / det, (-b2 * a11 + b1 * a12) / det)
                }
            }
            None => (-b1 / a11, 0.0),
        };

        let mut step_w = d_w.scaled(xi);
        let mut step_nu = xi * d_nu;
        let mut step_j = jd.scaled(xi);
        let mut step_err = xi.abs() * jd_err;
        if psi != 0.0 {
            if let Some((sw, snu, js, jerr)) = &prev_step {
                step_w.add_scaled(psi, sw);
                step_nu += psi * snu;
                step_j.add_scaled(psi, js);
                step_err += psi.abs() * jerr;
            }
        }

        w.add_scaled(1.0, &step_w);
        nu += step_nu;
        r1.add_scaled(1.0, &step_j);
        r1_err += step_err;
        prev_step = Some((step_w, step_nu, step_j, step_err));
        sweeps += 1;

        // Drift control: refresh the tracked residual from a fresh apply.
        if sweeps.is_multiple_of(DESCENT_REFRESH_EVERY) {
            let cw = map.apply(&w, inner)?;
            c_apps += cw.c_applications.max(1);
            let mut r = w.clone();
            r.add_scaled(-lambda, &cw.value);
            r.add_scaled(-nu, &f);
            r.add_scaled(1.0, &g);
            r1 = r;
            r1_err = lambda.abs() * cw.bound;
            prev_step = None;
        }
    }
}

/// Which solver realizes the update equation.
pub enum UpdateBackend<'a> {
    Descent,
    Oracle(&'a DenseOperator),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NewtonRow {
    pub step: usize,
    pub lambda: f64,
    pub residual_norm: f64,
    pub residual_bound: f64,
    pub e_hat: f64,
    pub eta: f64,
    pub descent_sweeps: u64,
    pub c_applications: u64,
    pub oracle_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NewtonTrace {
    pub rows: Vec<NewtonRow>,
    pub final_u: StateField,
    pub final_lambda: f64,
    pub final_e_hat: f64,
    pub converged: bool,
}

/// Reference eigenpair for oracle-error reporting, gauge-normalized to match
/// the iterate convention.
#[derive(Debug, Clone)]
pub struct OracleRef {
    pub u: StateField,
    pub lambda: f64,
}

const NEWTON_MAX_STEPS: usize = 60;
const DIVERGENCE_WINDOW: usize = 3;
/// Executed update tolerances never drop below this: certifying a residual
/// in f64 needs the inner solves to stay above their own increment floor.
pub const ETA_EXEC_FLOOR: f64 = 5e-13;

/// Newton driver: estimates the error from the residual, schedules the
/// update tolerance, and applies updates until the estimate reaches the
/// target. The gauge is not re-imposed between steps; the residual's second
/// component drives the normalization.
pub fn run_newton(
    map: &dyn CertifiedMap,
    init: EigenIterate,
    schedule: ToleranceSchedule,
    target: f64,
    backend: UpdateBackend<'_>,
    beta_hat: f64,
    oracle: Option<&OracleRef>,
) -> Result<NewtonTrace> {
    let schedule = schedule.validated()?;
    if !(beta_hat >= 1.0 && beta_hat.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta_hat must be finite and >= 1, got {beta_hat}"
        )));
    }
    let mut it = init;
    let mut rows: Vec<NewtonRow> = Vec::new();
    let mut c_total = 0u64;
    let mut res_eta = 1e-8_f64;
    let mut increases = 0usize;
    let mut prev_rnorm = f64::INFINITY;
    let mut last_e_hat = f64::INFINITY;

    for step in 0..NEWTON_MAX_STEPS {
        let r = residual(map, &it, res_eta)?;
        c_total += r.c_applications.max(1);
        let rnorm = residual_norm(map, &r);
        let e_hat = beta_hat * (rnorm + r.bound);
        let oracle_error = oracle.map(|o| pair_distance(map, &it, &o.u, o.lambda));

        last_e_hat = e_hat;
        let converged = e_hat <= target;
        let eta_n = schedule.eta(e_hat).max(ETA_EXEC_FLOOR);
        rows.push(NewtonRow {
            step,
            lambda: it.lambda,
            residual_norm: rnorm,
            residual_bound: r.bound,
            e_hat,
            eta: eta_n,
            descent_sweeps: 0,
            c_applications: c_total,
            oracle_error,
        });
        if converged {
            return Ok(NewtonTrace {
                rows,
                final_u: it.u,
                final_lambda: it.lambda,
                final_e_hat: e_hat,
                converged: true,
            });
        }

        // Meaningful growth only; certification-floor jitter is not
        // divergence.
        if rnorm > prev_rnorm * 1.2 + r.bound {
            increases += 1;
            if increases >= DIVERGENCE_WINDOW {
                return Err(Error::Divergence(DIVERGENCE_WINDOW));
            }
        } else {
            increases = 0;
        }
        prev_rnorm = rnorm;

        let (du, dl, sweeps, apps) = match backend {
            UpdateBackend::Descent => {
                let upd = newton_update_descent(map, &it, eta_n, beta_hat)?;
                (
                    upd.delta_u,
                    upd.delta_lambda,
                    upd.sweeps,
                    upd.c_applications,
                )
            }
            UpdateBackend::Oracle(dense) => {
                let (du, dl) = newton_update_oracle(dense, &it)?;
                (du, dl, 0, 0)
            }
        };
        c_total += apps;
        if let Some(row) = rows.last_mut() {
            row.descent_sweeps = sweeps;
            row.c_applications = c_total;
        }

        it.u.add_scaled(1.0, &du);
        it.lambda += dl;
        // Tighten the residual evaluation along with the expected error.
        res_eta = (0.01 * eta_n).clamp(1e-15, 1e-8);
    }

    Ok(NewtonTrace {
        rows,
        final_u: it.u,
        final_lambda: it.lambda,
        final_e_hat: last_e_hat,
        converged: false,
    })
}
