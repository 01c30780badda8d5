//! Dense desk-scale oracle: eigendecomposition with residual certificates,
//! the projected inf-sup constant, spectral gaps, Riesz projections, the
//! full constant budget, and neighborhood bound verification.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::contour::ContourSpec;
use crate::dense::{DenseOperator, Metric};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct EigenConfig {
    /// Relative residual each certified eigenpair must meet.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Oracle spectral data for a dense operator: leading eigenpairs with
/// residual certificates, adjoint eigenvectors, gaps, and the projected
/// inf-sup constant. Vectors are stored in plain coordinates and normalized
/// in the operator's metric.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub metric: Metric,
    pub shape: (usize, usize),
    /// All eigenvalues sorted by decreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    pub mu1: f64,
    pub mu2: Complex64,
    pub lambda_circ: f64,
    /// Principal eigenvector, nonnegative, metric-normalized.
    pub u1: DVector<f64>,
    /// Principal eigenvector of the adjoint, metric-normalized.
    pub u1_star: DVector<f64>,
    /// Adjoint eigenvector at the conjugate of `mu2`, metric-normalized.
    pub u_lambda_star: DVector<Complex64>,
    /// Minimizing direction of the projected shifted operator on the
    /// complement of the principal eigendirection.
    pub r_circ: DVector<f64>,
    pub theta: f64,
    pub delta: f64,
    pub delta_bar: f64,
    pub q_ratio: f64,
    /// Distance between the orthogonal complements of the right and left
    /// principal eigendirections (codimension one: the principal angle).
    pub dist_complements: f64,
    /// Metric operator norm (largest weighted singular value).
    pub c_norm: f64,
    /// Weighted singular values, descending.
    pub singular_values: Vec<f64>,
    pub residual_mu1: f64,
    pub residual_mu1_star: f64,
    pub residual_mu2_star: f64,
}

impl SpectralReport {
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.metric.inner(a, b)
    }
}

fn sort_eigenvalues(mut ev: Vec<Complex64>) -> Vec<Complex64> {
    ev.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    ev
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    // Box-Muller pairs; seeded and platform-stable.
    let mut v = DVector::zeros(n);
    for i in 0..n {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        v[i] = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
    let norm = v.norm();
    v / norm
}

/// A few steps of shifted inverse iteration in the Euclidean coordinates of
/// the metric. Returns the normalized vector and its residual against `mu`.
fn inverse_iteration_real(
    s: &DMatrix<f64>,
    mu: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(DVector<f64>, f64)> {
    let n = s.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut delta = 1e-11 * scale.max(1e-30);
    for _attempt in 0..4 {
        let mut a = s.clone();
        for i in 0..n {
            a[(i, i)] -= mu + delta;
        }
        if let Some(lu) = Some(a.lu()) {
            let mut v = random_unit(n, rng);
            for _ in 0..6 {
                match lu.solve(&v) {
                    Some(next) => {
                        let norm = next.norm();
                        if !norm.is_finite() || norm == 0.0 {
                            break;
                        }
                        v = next / norm;
                    }
                    None => break,
                }
            }
            let resid = (s * &v - &v * mu).norm();
            match &best {
                Some((_, r)) if *r <= resid => {}
                _ => best = Some((v, resid)),
            }
            if best.as_ref().map(|(_, r)| *r).unwrap_or(f64::MAX) <= 1e-12 * scale {
                break;
            }
        }
        delta *= 37.0;
    }
    best
}

fn inverse_iteration_complex(
    s: &DMatrix<f64>,
    mu: Complex64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(DVector<Complex64>, f64)> {
    let n = s.nrows();
    let mut best: Option<(DVector<Complex64>, f64)> = None;
    let mut delta = 1e-11 * scale.max(1e-30);
    let sc: DMatrix<Complex64> = s.map(|x| Complex64::new(x, 0.0));
    for _attempt in 0..4 {
        let mut a = sc.clone();
        for i in 0..n {
            a[(i, i)] -= mu + Complex64::new(delta, delta);
        }
        let lu = a.lu();
        let mut v: DVector<Complex64> = random_unit(n, rng).map(|x| Complex64::new(x, 0.0));
        for _ in 0..6 {
            match lu.solve(&v) {
                Some(next) => {
                    let norm = next.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        break;
                    }
                    v = next / Complex64::new(norm, 0.0);
                }
                None => break,
            }
        }
        let resid = (&sc * &v - &v * mu).norm();
        match &best {
            Some((_, r)) if *r <= resid => {}
            _ => best = Some((v, resid)),
        }
        if best.as_ref().map(|(_, r)| *r).unwrap_or(f64::MAX) <= 1e-12 * scale {
            break;
        }
        delta *= 37.0;
    }
    best
}

/// Orthonormal basis of the complement of a unit vector, as the trailing
/// columns of a Householder reflector.
fn complement_basis(unit: &DVector<f64>) -> DMatrix<f64> {
    let n = unit.len();
    let s = if unit[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = unit.clone();
    v[0] += s;
    let vn2 = v.norm_squared();
    let mut q = DMatrix::zeros(n, n - 1);
    for j in 1..n {
        for i in 0..n {
            let e = if i == j { 1.0 } else { 0.0 };
            q[(i, j - 1)] = e - 2.0 * v[i] * v[j] / vn2;
        }
    }
    q
}

/// Smallest weighted singular value of the shifted operator projected to the
/// complement of the principal eigendirection, and the direction achieving
/// it (mapped back to plain coordinates).
pub fn compute_theta(
    op: &DenseOperator,
    u1_plain: &DVector<f64>,
    lambda_circ: f64,
) -> Result<(f64, DVector<f64>)> {
    let n = op.dim();
    let w = op.metric().sqrt_weights();
    let s = op.similarity_matrix();
    let mut u_hat = DVector::from_fn(n, |i, _| w[i] * u1_plain[i]);
    let norm = u_hat.norm();
    if norm == 0.0 {
        return Err(Error::InvalidInput("principal direction is zero".into()));
    }
    u_hat /= norm;

    let q = complement_basis(&u_hat);
    let mut m_hat = DMatrix::identity(n, n);
    m_hat -= &s * lambda_circ;
    let projected = q.transpose() * m_hat * &q;
    let svd = projected.svd(true, true);
    let (mut theta, mut idx) = (f64::INFINITY, 0usize);
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv < theta {
            theta = *sv;
            idx = i;
        }
    }
    let v_t = svd.v_t.ok_or(Error::NoConvergence)?;
    let v_min = v_t.row(idx).transpose();
    let r_hat = &q * v_min;
    let r_plain = DVector::from_fn(n, |i, _| r_hat[i] / w[i]);
    Ok((theta, r_plain))
}

/// Full oracle eigendecomposition with residual certificates on every
/// reported pair. The principal eigenvalue must come out real, positive,
/// and simple; the certificates are the only thing downstream trusts.
pub fn dense_eigendecompose(op: &DenseOperator, cfg: &EigenConfig) -> Result<SpectralReport> {
    let n = op.dim();
    if n < 1 {
        return Err(Error::InvalidInput("empty operator".into()));
    }
    let s = op.similarity_matrix();
    let w = op.metric().sqrt_weights();

    let schur =
        nalgebra::linalg::Schur::try_new(s.clone(), 1e-14, 100_000).ok_or(Error::NoConvergence)?;
    let eigenvalues = sort_eigenvalues(schur.complex_eigenvalues().iter().copied().collect());

    let sv_vec = s.singular_values();
    let mut singular_values: Vec<f64> = sv_vec.iter().copied().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c_norm = singular_values.first().copied().unwrap_or(0.0);
    let scale = c_norm.max(1e-300);

    let mu1_c = eigenvalues[0];
    if mu1_c.im.abs() > 1e-10 * scale || mu1_c.re <= 0.0 {
        return Err(Error::CertificateFail(format!(
            "principal eigenvalue {mu1_c} is not real positive"
        )));
    }
    let mu1 = mu1_c.re;
    if n == 1 {
        // Degenerate scalar case, mostly for smoke tests.
        let u1 = DVector::from_element(1, 1.0 / w[0]);
        return Ok(SpectralReport {
            metric: op.metric().clone(),
            shape: op.shape(),
            eigenvalues,
            mu1,
            mu2: Complex64::new(0.0, 0.0),
            lambda_circ: 1.0 / mu1,
            u1: u1.clone(),
            u1_star: u1.clone(),
            u_lambda_star: u1.map(|x| Complex64::new(x, 0.0)),
            r_circ: u1,
            theta: 1.0,
            delta: 1.0,
            delta_bar: 1.0,
            q_ratio: 0.0,
            dist_complements: 0.0,
            c_norm,
            singular_values,
            residual_mu1: 0.0,
            residual_mu1_star: 0.0,
            residual_mu2_star: 0.0,
        });
    }

    let mu2 = eigenvalues[1];
    if mu1 - mu2.norm() <= 1e-9 * scale {
        return Err(Error::CertificateFail(format!(
            "principal eigenvalue not simple: mu1 = {mu1}, |mu2| = {}",
            mu2.norm()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut u1_hat, res1) =
        inverse_iteration_real(&s, mu1, scale, &mut rng).ok_or(Error::NoConvergence)?;
    // Sign-normalize to the nonnegative representative.
    if u1_hat.sum() < 0.0 {
        u1_hat = -u1_hat;
    }
    let st = s.transpose();
    let (mut u1s_hat, res1s) =
        inverse_iteration_real(&st, mu1, scale, &mut rng).ok_or(Error::NoConvergence)?;
    if u1s_hat.sum() < 0.0 {
        u1s_hat = -u1s_hat;
    }
    let (y2_hat, res2) =
        inverse_iteration_complex(&st, mu2.conj(), scale, &mut rng).ok_or(Error::NoConvergence)?;

    let tol = cfg.residual_tol * scale;
    if res1 > tol || res1s > tol || res2 > tol {
        return Err(Error::CertificateFail(format!(
            "eigen residuals {res1:e}/{res1s:e}/{res2:e} exceed {tol:e}"
        )));
    }

    let q_ratio = mu2.norm() / mu1;
    let delta = 1.0 - q_ratio;
    let delta_bar = (Complex64::new(1.0, 0.0) - mu2 / mu1).norm();
    let lambda_circ = 1.0 / mu1;
    let dist = {
        let cosang = u1_hat.dot(&u1s_hat).abs().min(1.0);
        (1.0 - cosang * cosang).max(0.0).sqrt()
    };

    let u1 = DVector::from_fn(n, |i, _| u1_hat[i] / w[i]);
    let (theta, r_circ) = compute_theta(op, &u1, lambda_circ)?;

    let u1_star = DVector::from_fn(n, |i, _| u1s_hat[i] / w[i]);
    let u_lambda_star = DVector::from_fn(n, |i, _| y2_hat[i] / Complex64::new(w[i], 0.0));

    Ok(SpectralReport {
        metric: op.metric().clone(),
        shape: op.shape(),
        eigenvalues,
        mu1,
        mu2,
        lambda_circ,
        u1,
        u1_star,
        u_lambda_star,
        r_circ,
        theta,
        delta,
        delta_bar,
        q_ratio,
        dist_complements: dist,
        c_norm,
        singular_values,
        residual_mu1: res1 / scale,
        residual_mu1_star: res1s / scale,
        residual_mu2_star: res2 / scale,
    })
}

/// The two-sided relation between the spectral gaps and the projected
/// inf-sup constant, evaluated numerically.
///
/// The upper bound follows from the complement component of the
/// second eigenvector being an eigenvector of the projected shifted
/// operator: `theta <= delta_bar`, with equality through the whole chain
/// for normal operators. A sharper-looking factor `(1 - dist)` on the right
/// is reported for inspection but is not a valid bound (any non-normal
/// 2 x 2 already violates it, since theta = delta_bar identically in two
/// dimensions); `pass` refers to the provable chain.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SandwichRecord {
    pub lhs: f64,
    pub mid: f64,
    pub theta: f64,
    pub rhs: f64,
    /// The tightened right-hand value `(1 - dist) * delta_bar`; diagnostic
    /// only.
    pub rhs_tightened: f64,
    pub pass: bool,
    pub tightened_holds: bool,
}

pub fn sandwich_check(report: &SpectralReport) -> Result<SandwichRecord> {
    if report.delta <= 1e-10 {
        return Err(Error::DegenerateGap(report.mu1 - report.mu2.norm()));
    }
    let d = report.metric.weights();
    // |<r_circ, u_lambda_star>| in the metric, conjugate on the second slot.
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d.len() {
        acc += Complex64::new(d[i] * report.r_circ[i], 0.0) * report.u_lambda_star[i].conj();
    }
    let overlap = acc.norm();
    let lhs = report.delta * overlap;
    let mid = report.delta_bar * overlap;
    let rhs = report.delta_bar;
    let rhs_tightened = (1.0 - report.dist_complements) * report.delta_bar;
    let tol = 1e-10 * (1.0 + report.delta_bar);
    let pass = lhs <= mid + tol && mid <= report.theta + tol && report.theta <= rhs + tol;
    let tightened_holds = report.theta <= rhs_tightened + tol;
    Ok(SandwichRecord {
        lhs,
        mid,
        theta: report.theta,
        rhs,
        rhs_tightened,
        pass,
        tightened_holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetParams {
    /// Interpolation parameter for the contraction rate, in (0, 1).
    pub beta: f64,
    /// Schatten exponent.
    pub p: f64,
}

impl Default for BudgetParams {
    fn default() -> Self {
        Self { beta: 0.5, p: 2.0 }
    }
}

/// Every derived constant of the convergence analysis, evaluated verbatim
/// from the oracle spectral data.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstantBudget {
    pub mu1: f64,
    pub lambda_circ: f64,
    pub c_norm: f64,
    pub theta: f64,
    pub delta: f64,
    pub delta_bar: f64,
    /// Norm bound of the shifted operator at the principal shift.
    pub m_lambda: f64,
    /// Uniform bound of the shifted-operator norm over the admissible shifts.
    pub m_bar: f64,
    /// Inverse-Jacobian bound at the solution.
    pub beta: f64,
    /// Radius of the well-conditioned eigenvector ball.
    pub tau: f64,
    /// Inverse-Jacobian bound over the full neighborhood.
    pub beta_bar: f64,
    /// Lipschitz constant of the Jacobian.
    pub gamma: f64,
    /// Radius of the certified Newton convergence ball.
    pub omega: f64,
    pub eps0: f64,
    pub eps1: f64,
    /// Interpolation parameter used for the power-iteration rate.
    pub beta_param: f64,
    /// Scaled-power contraction rate `(|mu2| + eps) / mu1 = q + beta * delta`:
    /// the relative second modulus padded by the contour margin.
    pub delta_bar_rate: f64,
    pub schatten_p: f64,
    pub schatten_norm: f64,
    pub a_p: f64,
    pub b_p: f64,
    pub a_p_exact: bool,
    /// Amplitude constant of the scaled-power decay on the trailing
    /// invariant subspace (may overflow to infinity for stiff budgets).
    pub rate_amplitude: f64,
    pub ln_rate_amplitude: f64,
    /// First power index from which the scaled powers provably contract.
    pub ell0: u64,
}

impl ConstantBudget {
    /// Coercivity lower bound of the map near the principal direction, as a
    /// function of the relative perturbation radius.
    pub fn a_eps(&self, eps: f64) -> f64 {
        (1.0 - eps).powi(2) * (self.mu1 - eps * self.c_norm * (2.0 + eps))
    }
}

fn schatten_constants(p: f64) -> Result<(f64, f64, bool)> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::UnsupportedP(p));
    }
    if (p - 1.0).abs() < 1e-12 {
        return Ok((1.0, 0.0, true));
    }
    if (p - 2.0).abs() < 1e-12 {
        return Ok((0.5, 0.5, true));
    }
    // Numerical sup over a log-radial grid. For p <= 1 the integrand is
    // log|1+z| (maximized on the positive real axis); above one it carries
    // the regularizing exponential factor and needs the full phase sweep.
    let radii: Vec<f64> = (0..400)
        .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 399.0))
        .collect();
    let mut a_p: f64 = 0.0;
    if p <= 1.0 {
        for r in &radii {
            let val = r.powf(-p) * (1.0 + r).ln();
            a_p = a_p.max(val);
        }
    } else {
        let terms = (p.ceil() as usize).saturating_sub(1);
        for r in &radii {
            for k in 0..128 {
                let phase = 2.0 * std::f64::consts::PI * k as f64 / 128.0;
                let z = Complex64::from_polar(*r, phase);
                let mut expo = Complex64::new(0.0, 0.0);
                let mut zj = Complex64::new(1.0, 0.0);
                for j in 1..=terms {
                    zj *= -z;
                    expo += zj / j as f64;
                }
                let val = r.powf(-p) * ((Complex64::new(1.0, 0.0) + z).norm().ln() + expo.re);
                a_p = a_p.max(val);
            }
        }
    }
    Ok((a_p, 0.0, false))
}

/// Evaluates the whole constant budget from a certified report.
pub fn constant_budget(report: &SpectralReport, params: &BudgetParams) -> Result<ConstantBudget> {
    if !(params.beta > 0.0 && params.beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "beta must lie in (0,1), got {}",
            params.beta
        )));
    }
    let c = report.c_norm;
    let theta = report.theta;
    let lam = report.lambda_circ;
    let m_lambda = 1.0 + lam * c;
    let m_bar = 1.0 + lam * c + theta / 4.0;

    let beta = {
        let t1 = 1.0 / theta + 0.5 * (1.0 + m_lambda / theta);
        let t2 = 0.5 * (1.0 + m_lambda / theta) * (1.0 + m_lambda / 2.0);
        (t1 * t1 + t2 * t2).sqrt()
    };

    let tau = (1.0 / (8.0 * c))
        .min(2.0 * theta / (25.0 * (1.0 + lam * c + theta / 4.0) * c))
        .min(theta / (25.0 * m_bar));

    let beta_bar = {
        let q = 2.0 * lam / (2.0 * lam - tau);
        let band = 1.0 + 4.0 * m_bar / theta;
        let b1 = (16.0 / (theta * theta) + q * q * band * band).sqrt();
        let b2 = q * band * (1.0 + m_bar * 4.0 * lam * lam / (2.0 * lam - tau).powi(2)).sqrt();
        b1 + b2
    };

    let gamma = std::f64::consts::SQRT_2 * c;
    let omega = tau
        .min(theta / (4.0 * c))
        .min(1.0 / (3.0 * beta_bar * gamma));
    let eps0 = 1.0 / (16.0 * c * lam);
    let c_bar = lam * c;
    let eps1 = (1.0 / (8.0 * c_bar)) * (3.0_f64).min(8.0 * theta / (25.0 * m_bar));

    let delta_bar_rate = report.q_ratio + params.beta * report.delta;

    let p = params.p;
    let (a_p, b_p, a_p_exact) = schatten_constants(p)?;
    let schatten_norm = report
        .singular_values
        .iter()
        .map(|s| s.powf(p))
        .sum::<f64>()
        .powf(1.0 / p);

    let eps_gap = params.beta * (report.mu1 - report.mu2.norm());
    let contour_len = 2.0 * std::f64::consts::PI * (report.mu2.norm() + eps_gap);
    let pow_plus = (p - 1.0).max(0.0);
    let ln_amp = (contour_len / (2.0 * std::f64::consts::PI * eps_gap)).ln()
        + 2f64.powf(p + 1.0 + pow_plus) * a_p * schatten_norm.powf(p) / eps_gap.powf(p)
        + b_p;
    let rate_amplitude = ln_amp.exp();
    let ell0 = if ln_amp <= 0.0 {
        0
    } else {
        (ln_amp / (1.0 / delta_bar_rate).ln()).ceil() as u64
    };

    Ok(ConstantBudget {
        mu1: report.mu1,
        lambda_circ: lam,
        c_norm: c,
        theta,
        delta: report.delta,
        delta_bar: report.delta_bar,
        m_lambda,
        m_bar,
        beta,
        tau,
        beta_bar,
        gamma,
        omega,
        eps0,
        eps1,
        beta_param: params.beta,
        delta_bar_rate,
        schatten_p: p,
        schatten_norm,
        a_p,
        b_p,
        a_p_exact,
        rate_amplitude,
        ln_rate_amplitude: ln_amp,
        ell0,
    })
}

/// Assembles the printed block linearization at `(u, nu)` in the Euclidean
/// coordinates of the metric.
pub fn assemble_dr_printed(op: &DenseOperator, u_plain: &DVector<f64>, nu: f64) -> DMatrix<f64> {
    let n = op.dim();
    let w = op.metric().sqrt_weights();
    let s = op.similarity_matrix();
    let u_hat = DVector::from_fn(n, |i, _| w[i] * u_plain[i]);
    let f_hat = &s * &u_hat;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -nu * s[(i, j)];
        }
        m[(i, i)] += 1.0;
        m[(i, n)] = -f_hat[i];
        m[(n, i)] = -f_hat[i];
    }
    m
}

/// Assembles the exact derivative (gauge row differentiated) at `(u, nu)`.
pub fn assemble_dr_true(
    op: &DenseOperator,
    u_plain: &DVector<f64>,
    nu: f64,
    gauge_sq: f64,
) -> DMatrix<f64> {
    let n = op.dim();
    let w = op.metric().sqrt_weights();
    let s = op.similarity_matrix();
    let u_hat = DVector::from_fn(n, |i, _| w[i] * u_plain[i]);
    let f_hat = &s * &u_hat;
    let p_hat = (s.transpose() * &f_hat) * (2.0 / gauge_sq);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = -nu * s[(i, j)];
        }
        m[(i, i)] += 1.0;
        m[(i, n)] = -f_hat[i];
        m[(n, i)] = -p_hat[i];
    }
    m
}

fn min_singular(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn max_singular(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

/// Gauge-normalized principal eigenvector: `||C u|| = sqrt(gauge_sq)`.
pub fn gauged_principal(report: &SpectralReport, gauge_sq: f64) -> DVector<f64> {
    &report.u1 * (gauge_sq.sqrt() / report.mu1)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DrBoundCheck {
    pub pass: bool,
    /// Largest inverse norm over the samples.
    pub worst: f64,
    /// Inverse norm at the eigenpair itself.
    pub at_solution: f64,
    pub beta_bar: f64,
    pub samples: usize,
}

/// Samples the neighborhood ball and verifies the inverse-norm bound of the
/// printed block linearization by dense smallest singular values.
pub fn verify_dr_bound(
    op: &DenseOperator,
    report: &SpectralReport,
    budget: &ConstantBudget,
    gauge_sq: f64,
    n_samples: usize,
    seed: u64,
) -> DrBoundCheck {
    let n = op.dim();
    let w = op.metric().sqrt_weights();
    let u_gauged = gauged_principal(report, gauge_sq);
    let nu_radius = budget.theta / (4.0 * budget.c_norm);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let at_solution = 1.0 / min_singular(&assemble_dr_printed(op, &u_gauged, report.lambda_circ));
    let mut worst = at_solution;
    for _ in 0..n_samples {
        let dir_hat = random_unit(n, &mut rng);
        let radius = budget.tau * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        let mut u = u_gauged.clone();
        for i in 0..n {
            u[i] += radius * dir_hat[i] / w[i];
        }
        let nu = report.lambda_circ + nu_radius * rng.gen_range(-1.0f64..1.0);
        let inv_norm = 1.0 / min_singular(&assemble_dr_printed(op, &u, nu));
        worst = worst.max(inv_norm);
    }
    DrBoundCheck {
        pass: worst <= budget.beta_bar * (1.0 + 1e-9),
        worst,
        at_solution,
        beta_bar: budget.beta_bar,
        samples: n_samples,
    }
}

/// Empirical bound on the inverse norm of the exact derivative over a
/// sampled ball around the eigenpair, with a safety margin. This is the
/// constant that certifies error estimates from residual norms.
pub fn dr_true_inverse_bound(
    op: &DenseOperator,
    report: &SpectralReport,
    gauge_sq: f64,
    radius_u: f64,
    radius_nu: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let n = op.dim();
    let w = op.metric().sqrt_weights();
    let u_gauged = gauged_principal(report, gauge_sq);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 1.0
        / min_singular(&assemble_dr_true(
            op,
            &u_gauged,
            report.lambda_circ,
            gauge_sq,
        ));
    for _ in 0..n_samples {
        let dir_hat = random_unit(n, &mut rng);
        let radius = radius_u * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        let mut u = u_gauged.clone();
        for i in 0..n {
            u[i] += radius * dir_hat[i] / w[i];
        }
        let nu = report.lambda_circ + radius_nu * rng.gen_range(-1.0f64..1.0);
        let inv_norm = 1.0 / min_singular(&assemble_dr_true(op, &u, nu, gauge_sq));
        worst = worst.max(inv_norm);
    }
    worst * 1.5
}

/// Largest norm of the exact derivative along the segment from the eigenpair
/// to `(u, nu)`.
pub fn dr_true_sup_norm_on_segment(
    op: &DenseOperator,
    report: &SpectralReport,
    gauge_sq: f64,
    u: &DVector<f64>,
    nu: f64,
    t_samples: usize,
) -> f64 {
    let u_gauged = gauged_principal(report, gauge_sq);
    let mut sup: f64 = 0.0;
    for k in 0..=t_samples {
        let t = k as f64 / t_samples as f64;
        let ut = &u_gauged * (1.0 - t) + u * t;
        let nut = report.lambda_circ * (1.0 - t) + nu * t;
        sup = sup.max(max_singular(&assemble_dr_true(op, &ut, nut, gauge_sq)));
    }
    sup
}

/// Riesz projection of a dense operator through contour quadrature of its
/// resolvent: `E = sum_j (1/N)(zeta_j - center) (zeta_j I - A)^-1`.
pub fn riesz_projection(
    op: &DenseOperator,
    contour: &ContourSpec,
    eigenvalues: &[Complex64],
) -> Result<DenseOperator> {
    let n = op.dim();
    let scale = eigenvalues.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    for zeta in contour.nodes() {
        for mu in eigenvalues {
            if (zeta - mu).norm() <= 1e-8 * scale {
                return Err(Error::ContourHitsSpectrum { zeta });
            }
        }
    }
    let a: DMatrix<Complex64> = op.matrix().map(|x| Complex64::new(x, 0.0));
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    let nn = contour.n_nodes as f64;
    for zeta in contour.nodes() {
        let shifted = &id * zeta - &a;
        let inv = shifted
            .lu()
            .solve(&id)
            .ok_or(Error::ContourHitsSpectrum { zeta })?;
        let wgt = (zeta - contour.center) / nn;
        acc += inv * wgt;
    }
    let re = acc.map(|z| z.re);
    let im_norm = acc.map(|z| z.im).norm();
    let allow = 1e-8 * (1.0 + re.norm());
    if im_norm > allow {
        return Err(Error::ImaginaryResidue {
            norm: im_norm,
            allow,
        });
    }
    Ok(DenseOperator::new(re, op.metric().clone(), op.shape()))
}
