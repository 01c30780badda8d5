//! Power iteration with certified operator applications, plus norm and
//! spectral-gap estimation.

use crate::error::{Error, Result};
use crate::field::StateField;
use crate::ops::OperatorSet;
use crate::solver::{CertifiedMap, TransportMap};

/// How the per-step apply tolerance is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TolerancePolicy {
    /// Tolerance proportional to the current increment; keeps the
    /// perturbation below the contraction budget without overpaying early.
    Proportional {
        factor: f64,
    },
    Fixed {
        eta: f64,
    },
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy::Proportional { factor: 0.1 }
    }
}

const ETA_FLOOR: f64 = 1e-15;
const ETA_CEIL: f64 = 1e-2;
const STAGNATION_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PowerStep {
    pub rayleigh: f64,
    pub increment: f64,
    pub eta_apply: f64,
    pub apply_bound: f64,
    pub c_applications: u64,
}

/// Record of one power-iteration run: per-step Rayleigh quotients and
/// increments, the normalized iterates, and the final distance estimate.
#[derive(Debug, Clone)]
pub struct PowerTrace {
    pub steps: Vec<PowerStep>,
    /// Normalized iterates including the start, one per step boundary.
    pub iterates: Vec<StateField>,
    pub final_iterate: StateField,
    pub final_rayleigh: f64,
    pub distance_estimate: f64,
    pub converged: bool,
}

impl PowerTrace {
    pub fn rayleighs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.rayleigh).collect()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.increment).collect()
    }
}

/// One normalized power step: certified apply, Rayleigh quotient against the
/// current iterate, renormalization.
pub fn power_step(
    map: &dyn CertifiedMap,
    a: &StateField,
    eta_apply: f64,
) -> Result<(StateField, f64)> {
    let b = map.apply(a, eta_apply)?;
    let norm = map.norm(&b.value);
    if norm <= eta_apply {
        return Err(Error::ZeroImage {
            norm,
            eta: eta_apply,
        });
    }
    let rayleigh = map.inner(&b.value, a);
    Ok((b.value.scaled(1.0 / norm), rayleigh))
}

/// Tail estimate for a geometrically decaying increment sequence.
fn distance_estimate(increments: &[f64]) -> f64 {
    let n = increments.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let last = increments[n - 1];
    if last == 0.0 {
        return 0.0;
    }
    let mut q: f64 = 0.0;
    let lo = n.saturating_sub(4);
    for i in lo..n.saturating_sub(1) {
        if increments[i] > 0.0 {
            q = q.max(increments[i + 1] / increments[i]);
        }
    }
    if q == 0.0 {
        q = 0.5;
    }
    let q = q.clamp(0.05, 0.99);
    last * q / (1.0 - q)
}

/// Runs the power iteration from a nonnegative start until the
/// increment-based distance estimate drops below `target`.
pub fn run_power(
    map: &dyn CertifiedMap,
    a0: &StateField,
    target: f64,
    policy: TolerancePolicy,
    max_steps: usize,
) -> Result<PowerTrace> {
    let scale = a0.max_abs();
    if scale == 0.0 {
        return Err(Error::InvalidInput(
            "power iteration needs a nonzero start".into(),
        ));
    }
    if a0.min_entry() < -1e-12 * scale {
        return Err(Error::InvalidInput(
            "power iteration start must be nonnegative".into(),
        ));
    }

    let norm0 = map.norm(a0);
    let mut a = a0.scaled(1.0 / norm0);
    let mut iterates = vec![a.clone()];
    let mut steps: Vec<PowerStep> = Vec::new();
    let mut increments: Vec<f64> = Vec::new();
    let mut c_total = 0u64;
    let mut eta = match policy {
        TolerancePolicy::Proportional { .. } => 1e-4,
        TolerancePolicy::Fixed { eta } => eta,
    };

    for _ in 0..max_steps {
        let b = map.apply(&a, eta)?;
        let norm = map.norm(&b.value);
        if norm <= eta {
            return Err(Error::ZeroImage { norm, eta });
        }
        let rayleigh = map.inner(&b.value, &a);
        c_total += b.c_applications.max(1);
        let next = b.value.scaled(1.0 / norm);
        let diff = next.sub(&a);
        let increment = map.norm(&diff);
        increments.push(increment);
        steps.push(PowerStep {
            rayleigh,
            increment,
            eta_apply: eta,
            apply_bound: b.bound,
            c_applications: c_total,
        });
        a = next;
        iterates.push(a.clone());

        let est = distance_estimate(&increments);
        if est <= target {
            return Ok(PowerTrace {
                steps,
                iterates,
                final_iterate: a,
                final_rayleigh: rayleigh,
                distance_estimate: est,
                converged: true,
            });
        }

        if increments.len() >= STAGNATION_WINDOW {
            let w = &increments[increments.len() - STAGNATION_WINDOW..];
            if w.windows(2).all(|p| p[1] >= p[0] * (1.0 - 1e-12)) {
                return Err(Error::Stagnation {
                    window: STAGNATION_WINDOW,
                    increment,
                });
            }
        }

        if let TolerancePolicy::Proportional { factor } = policy {
            eta = (factor * increment).clamp(ETA_FLOOR, ETA_CEIL);
        }
    }

    let est = distance_estimate(&increments);
    let final_rayleigh = steps.last().map(|s| s.rayleigh).unwrap_or(0.0);
    Ok(PowerTrace {
        steps,
        iterates: iterates.clone(),
        final_iterate: iterates.last().cloned().expect("at least the start"),
        final_rayleigh,
        distance_estimate: est,
        converged: false,
    })
}

/// Largest Rayleigh quotient of the self-adjoint composition `A* A` seen
/// along a power iteration, minus the certified apply slack. Always a valid
/// lower bound for the squared operator norm.
pub fn norm_sq_lower_bound(
    map: &dyn CertifiedMap,
    start: &StateField,
    eta: f64,
    n_steps: usize,
) -> Result<f64> {
    let mut v = start.scaled(1.0 / map.norm(start));
    let mut best: f64 = 0.0;
    for _ in 0..n_steps.max(1) {
        let y = map.apply(&v, eta)?;
        let z = map.apply_adjoint(&y.value, eta)?;
        let r = map.inner(&z.value, &v);
        let slack = eta * (2.0 + 2.0 * r.max(0.0).sqrt());
        best = best.max(r - slack);
        let n = map.norm(&z.value);
        if n == 0.0 {
            break;
        }
        v = z.value.scaled(1.0 / n);
    }
    Ok(best.max(0.0))
}

/// Certified two-sided interval for the sigma operator norm of the
/// criticality map: a Rayleigh lower bound and the crude kernel-mass upper
/// bound through the accretivity constant.
pub fn estimate_norm_c(ops: &OperatorSet, eta: f64, n_steps: usize) -> Result<(f64, f64)> {
    let map = TransportMap::new(ops);
    let start = ops.space().constant(1.0);
    let lo_sq = norm_sq_lower_bound(&map, &start, eta, n_steps)?;
    let lo = lo_sq.sqrt();
    let rep = ops.space().assumptions();
    let ratio = ops.space().optics().sigma_max() / ops.space().optics().sigma_min();
    let hi = rep.big_m * ratio.sqrt() / rep.alpha;
    Ok((lo, hi))
}

/// Non-certified spectral-gap estimate from the decay rate of the Rayleigh
/// increments. The increments of a converging iteration decay at the square
/// of the iterate rate in the symmetric calibration case, hence the square
/// root before converting to a gap.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GapEstimate {
    pub delta_hat: f64,
    /// Fitted geometric ratio of the Rayleigh increments.
    pub increment_rate: f64,
    /// Always false: rate-based heuristic, no certificate.
    pub certified: bool,
}

pub fn estimate_gap(trace: &PowerTrace) -> Result<GapEstimate> {
    let rayleighs = trace.rayleighs();
    if rayleighs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: rayleighs.len(),
        });
    }
    let scale = rayleighs
        .iter()
        .fold(0.0_f64, |m, r| m.max(r.abs()))
        .max(1e-300);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (n, w) in rayleighs.windows(2).enumerate() {
        let inc = (w[1] - w[0]).abs();
        if inc > 1e-15 * scale {
            pts.push((n as f64, inc.ln()));
        }
    }
    if pts.is_empty() {
        // Exactly converged: everything below round-off.
        return Ok(GapEstimate {
            delta_hat: 1.0,
            increment_rate: 0.0,
            certified: false,
        });
    }
    if pts.len() == 1 {
        return Ok(GapEstimate {
            delta_hat: 0.0,
            increment_rate: 1.0,
            certified: false,
        });
    }
    // Least-squares slope of log-increments against the step index.
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Ok(GapEstimate {
            delta_hat: 0.0,
            increment_rate: 1.0,
            certified: false,
        });
    }
    let slope = (n * sxy - sx * sy) / denom;
    let q_inc = slope.exp().clamp(0.0, 1.0);
    let delta_hat = (1.0 - q_inc.sqrt()).clamp(0.0, 1.0);
    Ok(GapEstimate {
        delta_hat,
        increment_rate: q_inc,
        certified: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseOperator;
    use crate::solver::DenseMap;
    use nalgebra::DMatrix;

    fn diag_map(entries: &[f64]) -> DenseMap {
        let n = entries.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { 0.0 });
        DenseMap::new(DenseOperator::synthetic(m))
    }

    #[test]
    fn single_step_on_diagonal_case() {
        let map = diag_map(&[2.0, 1.0]);
        let a = StateField::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let a = a.scaled(1.0 / map.norm(&a));
        let (next, rayleigh) = power_step(&map, &a, 1e-12).unwrap();
        assert!((rayleigh - 1.5).abs() < 1e-12);
        let expect = [2.0 / 5.0_f64.sqrt(), 1.0 / 5.0_f64.sqrt()];
        assert!((next.as_slice()[0] - expect[0]).abs() < 1e-12);
        assert!((next.as_slice()[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_start_locks_onto_subdominant_mode() {
        // Documented failure mode of the nonzero-overlap precondition: with
        // no component along the principal direction the iteration converges
        // to the second eigendirection instead.
        let map = diag_map(&[2.0, 1.0]);
        let mut a = StateField::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let mut rayleigh = 0.0;
        for _ in 0..5 {
            let (next, r) = power_step(&map, &a, 1e-13).unwrap();
            a = next;
            rayleigh = r;
        }
        assert!((rayleigh - 1.0).abs() < 1e-12);
        assert!(a.as_slice()[0].abs() < 1e-12 && (a.as_slice()[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn start_at_eigenvector_converges_immediately() {
        let map = diag_map(&[2.0, 1.0]);
        let a0 = StateField::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let tr = run_power(&map, &a0, 1e-8, TolerancePolicy::Fixed { eta: 1e-13 }, 50).unwrap();
        assert!(tr.converged);
        assert_eq!(tr.steps.len(), 1);
        assert!((tr.final_rayleigh - 2.0).abs() < 1e-12);
    }

    #[test]
    fn iterates_stay_normalized_and_nonnegative() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.2, 0.3, 0.8, 0.1, 0.2, 0.3, 0.6]);
        let map = DenseMap::new(DenseOperator::synthetic(m));
        let a0 = StateField::constant(3, 1, 1.0);
        let tr = run_power(
            &map,
            &a0,
            1e-9,
            TolerancePolicy::Proportional { factor: 0.1 },
            100,
        )
        .unwrap();
        for it in &tr.iterates {
            assert!((map.norm(it) - 1.0).abs() <= 1e-13);
            assert!(it.min_entry() >= -1e-12);
        }
    }

    #[test]
    fn rejects_bad_starts() {
        let map = diag_map(&[2.0, 1.0]);
        let zero = StateField::zeros(2, 1);
        assert!(matches!(
            run_power(&map, &zero, 1e-6, TolerancePolicy::default(), 10),
            Err(Error::InvalidInput(_))
        ));
        let neg = StateField::from_vec(2, 1, vec![1.0, -0.5]).unwrap();
        assert!(matches!(
            run_power(&map, &neg, 1e-6, TolerancePolicy::default(), 10),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gap_estimate_on_diagonal_case() {
        let map = diag_map(&[2.0, 1.0]);
        let a0 = StateField::from_vec(2, 1, vec![1.0, 0.7]).unwrap();
        let tr = run_power(&map, &a0, 1e-12, TolerancePolicy::Fixed { eta: 1e-14 }, 40).unwrap();
        let gap = estimate_gap(&tr).unwrap();
        assert!(!gap.certified);
        // Oracle gap is 0.5; the rate-based estimate is allowed a wide band.
        assert!(
            (gap.delta_hat - 0.5).abs() <= 0.15,
            "delta_hat {}",
            gap.delta_hat
        );
    }

    #[test]
    fn gap_estimate_clamps() {
        let map = diag_map(&[2.0, 1.0]);
        let mk_trace = |incs: &[f64]| {
            let mut ray = vec![1.0];
            for inc in incs {
                let last = *ray.last().unwrap();
                ray.push(last + inc);
            }
            PowerTrace {
                steps: ray
                    .iter()
                    .map(|r| PowerStep {
                        rayleigh: *r,
                        increment: 0.0,
                        eta_apply: 1e-10,
                        apply_bound: 0.0,
                        c_applications: 1,
                    })
                    .collect(),
                iterates: vec![StateField::zeros(2, 1)],
                final_iterate: StateField::zeros(2, 1),
                final_rayleigh: *ray.last().unwrap(),
                distance_estimate: 0.0,
                converged: true,
            }
        };
        let _ = &map;
        // Exactly converged trace: all increments zero.
        let flat = mk_trace(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(estimate_gap(&flat).unwrap().delta_hat, 1.0);
        // Stagnating trace: constant increments.
        let stuck = mk_trace(&[0.1, 0.1, 0.1, 0.1, 0.1]);
        assert!(estimate_gap(&stuck).unwrap().delta_hat.abs() < 1e-9);
        // Too short.
        let short = mk_trace(&[0.1, 0.1]);
        assert!(matches!(
            estimate_gap(&short),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn rank_one_lower_bound_is_sharp_in_one_step() {
        let n = 6;
        let a = nalgebra::DVector::from_fn(n, |i, _| 1.0 + i as f64 * 0.3);
        let b = nalgebra::DVector::from_fn(n, |i, _| 0.5 + (i as f64 * 0.7).cos().abs());
        let m = DMatrix::from_fn(n, n, |i, j| a[i] * b[j]);
        let map = DenseMap::new(DenseOperator::synthetic(m));
        let opnorm = a.norm() * b.norm();
        let start = StateField::from_vec(n, 1, b.as_slice().to_vec()).unwrap();
        let lo_sq = norm_sq_lower_bound(&map, &start, 1e-12, 1).unwrap();
        assert!(lo_sq.sqrt() <= opnorm + 1e-9);
        assert!(
            lo_sq.sqrt() >= opnorm * (1.0 - 1e-9),
            "{} vs {opnorm}",
            lo_sq.sqrt()
        );
    }

    #[test]
    fn coarse_tolerance_on_vanishing_image_is_zero_image() {
        let map = diag_map(&[2.0, 0.0]);
        let a = StateField::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            power_step(&map, &a, 1e-6),
            Err(Error::ZeroImage { .. })
        ));
    }

    #[test]
    fn stagnation_detected() {
        // A permutation-like map keeps the increments from decaying.
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let map = DenseMap::new(DenseOperator::synthetic(m));
        let a0 = StateField::from_vec(2, 1, vec![1.0, 0.2]).unwrap();
        assert!(matches!(
            run_power(&map, &a0, 1e-12, TolerancePolicy::Fixed { eta: 1e-13 }, 100),
            Err(Error::Stagnation { .. })
        ));
    }
}
