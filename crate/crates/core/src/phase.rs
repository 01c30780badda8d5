//! Discrete phase space: slab grid, angular quadrature, optical parameters,
//! and the standing-assumption validators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slab spatial grid plus a symmetric direction-cosine quadrature.
///
/// Ordinates are stored negatives first (ascending), then positives
/// (ascending), and always come in +/- pairs. The quadrature weights sum to
/// one: the angular measure is normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub n_cells: usize,
    pub length: f64,
    pub cell_width: f64,
    pub mu_min: f64,
    mu: Vec<f64>,
    weights: Vec<f64>,
}

impl PhaseGrid {
    #[inline]
    pub fn n_ordinates(&self) -> usize {
        self.mu.len()
    }

    #[inline]
    pub fn mu(&self, k: usize) -> f64 {
        self.mu[k]
    }

    #[inline]
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    #[inline]
    pub fn ordinates(&self) -> &[f64] {
        &self.mu
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n_cells * self.mu.len()
    }
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence. Plenty for the ordinate counts used here.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Builds a slab grid with `2 * n_per_half` ordinates: Gauss-Legendre nodes
/// mapped to [mu_min, 1] and mirrored to [-1, -mu_min], weights rescaled so
/// they sum to one across both half-ranges.
pub fn build_grid(
    n_cells: usize,
    length: f64,
    n_per_half: usize,
    mu_min: f64,
) -> Result<PhaseGrid> {
    if n_cells < 1 {
        return Err(Error::InvalidGrid("n_cells must be >= 1".into()));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "length must be positive, got {length}"
        )));
    }
    if n_per_half < 1 {
        return Err(Error::InvalidGrid("n_per_half must be >= 1".into()));
    }
    if !(mu_min > 0.0 && mu_min < 1.0) {
        return Err(Error::InvalidGrid(format!(
            "mu_min must lie in (0, 1), got {mu_min}"
        )));
    }

    let (nodes, base_w) = gauss_legendre(n_per_half);
    let half = 0.5 * (1.0 - mu_min);
    let mid = 0.5 * (1.0 + mu_min);
    let pos: Vec<f64> = nodes.iter().map(|x| mid + half * x).collect();
    let raw_w: Vec<f64> = base_w.iter().map(|w| w * half).collect();
    let total: f64 = 2.0 * raw_w.iter().sum::<f64>();

    let n_ord = 2 * n_per_half;
    let mut mu = vec![0.0; n_ord];
    let mut weights = vec![0.0; n_ord];
    for j in 0..n_per_half {
        // Negatives ascending (-mu_max .. -mu_min), then positives ascending.
        mu[j] = -pos[n_per_half - 1 - j];
        weights[j] = raw_w[n_per_half - 1 - j] / total;
        mu[n_per_half + j] = pos[j];
        weights[n_per_half + j] = raw_w[j] / total;
    }

    Ok(PhaseGrid {
        n_cells,
        length,
        cell_width: length / n_cells as f64,
        mu_min,
        mu,
        weights,
    })
}

/// Optical parameter fields on a fixed grid: total cross-section per
/// (cell, ordinate), scattering and fission kernels per cell as
/// (ordinate_in, ordinate_out) tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalField {
    n_cells: usize,
    n_ordinates: usize,
    sigma: Vec<f64>,
    kappa: Vec<f64>,
    phi: Vec<f64>,
}

impl OpticalField {
    pub fn new(grid: &PhaseGrid, sigma: Vec<f64>, kappa: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        if sigma.len() != nc * no {
            return Err(Error::ShapeMismatch(format!(
                "sigma has {} entries, expected {}",
                sigma.len(),
                nc * no
            )));
        }
        if kappa.len() != nc * no * no || phi.len() != nc * no * no {
            return Err(Error::ShapeMismatch("kernel table size mismatch".into()));
        }
        if !sigma.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::InvalidOptics(
                "sigma must be finite and strictly positive".into(),
            ));
        }
        if !kappa
            .iter()
            .chain(phi.iter())
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(Error::InvalidOptics(
                "kernels must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            n_cells: nc,
            n_ordinates: no,
            sigma,
            kappa,
            phi,
        })
    }

    /// Spatially and angularly constant parameters.
    pub fn constant(grid: &PhaseGrid, sigma: f64, kappa: f64, phi: f64) -> Result<Self> {
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        Self::new(
            grid,
            vec![sigma; nc * no],
            vec![kappa; nc * no * no],
            vec![phi; nc * no * no],
        )
    }

    /// Piecewise-constant parameters: `regions` gives (x_end, sigma, kappa, phi)
    /// with x_end values increasing and the last one covering the slab end.
    pub fn per_material(grid: &PhaseGrid, regions: &[(f64, f64, f64, f64)]) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidOptics(
                "per_material needs at least one region".into(),
            ));
        }
        let nc = grid.n_cells;
        let no = grid.n_ordinates();
        let mut sigma = vec![0.0; nc * no];
        let mut kappa = vec![0.0; nc * no * no];
        let mut phi = vec![0.0; nc * no * no];
        for i in 0..nc {
            let xc = (i as f64 + 0.5) * grid.cell_width;
            let region = regions
                .iter()
                .find(|r| xc <= r.0)
                .or_else(|| regions.last())
                .expect("regions nonempty");
            for k in 0..no {
                sigma[i * no + k] = region.1;
            }
            for kin in 0..no {
                for kout in 0..no {
                    kappa[(i * no + kin) * no + kout] = region.2;
                    phi[(i * no + kin) * no + kout] = region.3;
                }
            }
        }
        Self::new(grid, sigma, kappa, phi)
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
    pub fn sigma(&self, cell: usize, ord: usize) -> f64 {
        self.sigma[cell * self.n_ordinates + ord]
    }

    /// kappa(cell; ordinate_in, ordinate_out)
    #[inline]
    pub fn kappa(&self, cell: usize, k_in: usize, k_out: usize) -> f64 {
        self.kappa[(cell * self.n_ordinates + k_in) * self.n_ordinates + k_out]
    }

    #[inline]
    pub fn phi(&self, cell: usize, k_in: usize, k_out: usize) -> f64 {
        self.phi[(cell * self.n_ordinates + k_in) * self.n_ordinates + k_out]
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }
}

/// Validation record for the standing assumptions on the optical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Accretivity constant: min over (cell, ordinate) of sigma minus the
    /// larger of the two kernel quadrature masses.
    pub alpha: f64,
    /// Upper bound on all kernel row/column quadrature masses.
    pub big_m: f64,
    /// Fission floor: smallest fission kernel entry.
    pub c_f: f64,
    /// Contraction factor of the scattering fixed-point map in the
    /// sigma-weighted norm.
    pub rho: f64,
    pub kernels_bounded: bool,
    pub accretive: bool,
    pub fission_positive: bool,
    pub contractive: bool,
    pub pass: bool,
}

/// Kernel quadrature masses at (cell, k): integral over the other ordinate
/// index, in both orders.
fn kernel_masses(
    table: impl Fn(usize, usize, usize) -> f64,
    grid: &PhaseGrid,
    cell: usize,
    k: usize,
) -> (f64, f64) {
    let no = grid.n_ordinates();
    let mut row = 0.0; // integral over outgoing ordinate, k incoming
    let mut col = 0.0; // integral over incoming ordinate, k outgoing
    for j in 0..no {
        row += grid.weight(j) * table(cell, k, j);
        col += grid.weight(j) * table(cell, j, k);
    }
    (row, col)
}

/// Discrete contraction factor of the scattering sweep: the largest ratio of
/// a kappa quadrature mass (in either variable) to sigma at the same point.
pub fn compute_rho(grid: &PhaseGrid, optics: &OpticalField) -> Result<f64> {
    check_shapes(grid, optics)?;
    let mut rho: f64 = 0.0;
    for i in 0..grid.n_cells {
        for k in 0..grid.n_ordinates() {
            let (row, col) = kernel_masses(|c, a, b| optics.kappa(c, a, b), grid, i, k);
            rho = rho.max(row.max(col) / optics.sigma(i, k));
        }
    }
    Ok(rho)
}

fn check_shapes(grid: &PhaseGrid, optics: &OpticalField) -> Result<()> {
    if optics.n_cells != grid.n_cells || optics.n_ordinates != grid.n_ordinates() {
        return Err(Error::ShapeMismatch(format!(
            "optics ({} x {}) vs grid ({} x {})",
            optics.n_cells,
            optics.n_ordinates,
            grid.n_cells,
            grid.n_ordinates()
        )));
    }
    Ok(())
}

/// Evaluates the accretivity constant, the kernel mass bound, the fission
/// floor, and the contraction factor on a concrete grid.
pub fn check_assumptions(grid: &PhaseGrid, optics: &OpticalField) -> Result<AssumptionReport> {
    check_shapes(grid, optics)?;
    let no = grid.n_ordinates();

    let mut alpha = f64::INFINITY;
    let mut big_m: f64 = 0.0;
    let mut c_f = f64::INFINITY;
    for i in 0..grid.n_cells {
        for k in 0..no {
            let (krow, kcol) = kernel_masses(|c, a, b| optics.kappa(c, a, b), grid, i, k);
            let (frow, fcol) = kernel_masses(|c, a, b| optics.phi(c, a, b), grid, i, k);
            let s = optics.sigma(i, k);
            alpha = alpha.min((s - krow).min(s - kcol));
            big_m = big_m.max(krow.max(kcol)).max(frow.max(fcol));
            for j in 0..no {
                c_f = c_f.min(optics.phi(i, k, j));
            }
        }
    }
    let rho = compute_rho(grid, optics)?;

    let kernels_bounded = big_m.is_finite();
    let accretive = alpha > 0.0;
    let fission_positive = c_f > 0.0;
    let contractive = rho < 1.0;
    Ok(AssumptionReport {
        alpha,
        big_m,
        c_f,
        rho,
        kernels_bounded,
        accretive,
        fission_positive,
        contractive,
        pass: kernels_bounded && accretive && fission_positive && contractive,
    })
}
