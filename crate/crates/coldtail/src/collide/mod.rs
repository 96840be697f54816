//! Evaluation of the collision operator `Q(f,f)`.
//!
//! Two evaluators are provided:
//!
//! * [`q_direct`] — a brute-force quadrature of the collision integral over
//!   all grid pairs and a spherical rule, with trilinear interpolation at the
//!   off-grid post-collision points. `O(n⁶·|quad|)` work; it exists as a
//!   cross-validation oracle for small grids, not for production runs.
//! * [`SpectralOp`] / [`q_spectral`] — a Fourier-Galerkin evaluation of the
//!   truncated operator with precomputed kernel weights, `O(K·n³ log n)` per
//!   call with `K` decomposition terms. Weight sets are cached per
//!   (grid, model, quadrature) key.
//!
//! [`conserve_project`] removes the numerical drift of the discrete collision
//! invariants: it returns the closest field (least squares in the `h³`
//! inner product) whose discrete mass, momentum, and energy are exactly zero.

pub(crate) mod direct;
pub(crate) mod fft3;
mod spectral;

pub use direct::{q_direct, q_direct_with, DirectOpts, DIRECT_GRID_LIMIT};
pub use spectral::{q_spectral, spectral_op, SpectralDiagnostics, SpectralOp, SpectralParams};
pub(crate) use spectral::{mode, zero_nyquist};

use crate::model::InteractionModel;
use crate::phase::{Distribution, VelocityGrid};
use crate::{Error, Result};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Newton iteration on the Legendre recurrence; accurate to machine precision
/// for the modest orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by upward recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Spherical quadrature: unit nodes with positive weights summing to the
/// sphere measure `4π`.
///
/// The convention here is that weights carry the full measure and the angular
/// function `b(cosθ)` is evaluated separately (so `Σ w·b = ∫ b dσ`).
#[derive(Clone, Debug)]
pub struct AngularQuadrature {
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Largest spherical-harmonic degree integrated exactly.
    pub exactness: usize,
}

impl AngularQuadrature {
    /// Product Gauss rule: Gauss–Legendre in `cosθ` (`n_polar` nodes) times a
    /// uniform azimuthal grid (`n_azimuth` nodes).
    ///
    /// `n_polar` must be even and `n_azimuth` even and ≥ 2 so the rule is
    /// antipodally symmetric (σ and −σ both appear, with equal weights),
    /// which the conservation structure of both evaluators relies on.
    pub fn product_gauss(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar == 0 || n_polar % 2 != 0 {
            return Err(Error::InvalidParam(format!(
                "n_polar must be even and positive, got {n_polar}"
            )));
        }
        if n_azimuth < 2 || n_azimuth % 2 != 0 {
            return Err(Error::InvalidParam(format!(
                "n_azimuth must be even and >= 2, got {n_azimuth}"
            )));
        }
        let (u, wu) = gauss_legendre(n_polar);
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let wphi = 2.0 * std::f64::consts::PI / n_azimuth as f64;
        for (j, &uj) in u.iter().enumerate() {
            let s = (1.0 - uj * uj).max(0.0).sqrt();
            for m in 0..n_azimuth {
                let phi = 2.0 * std::f64::consts::PI * m as f64 / n_azimuth as f64;
                nodes.push([s * phi.cos(), s * phi.sin(), uj]);
                weights.push(wu[j] * wphi);
            }
        }
        Ok(Self {
            nodes,
            weights,
            exactness: (2 * n_polar - 1).min(n_azimuth - 1),
        })
    }

    /// Smallest product rule with at least `total` nodes, keeping the
    /// `n_azimuth = 2·n_polar` aspect used throughout.
    pub fn with_min_nodes(total: usize) -> Result<Self> {
        let mut n_polar = 2;
        while 2 * n_polar * n_polar < total {
            n_polar += 2;
        }
        Self::product_gauss(n_polar, 2 * n_polar)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w − 4π`, the defect of the sphere-measure convention.
    pub fn measure_defect(&self) -> f64 {
        self.weights.iter().sum::<f64>() - FOUR_PI
    }

    /// Restrict to the upper hemisphere (`σ_z > 0`) with doubled weights.
    ///
    /// Valid for antipodally symmetric rules acting on even integrands; the
    /// spectral evaluator uses this to halve its transform count.
    pub(crate) fn half_sphere(&self) -> (Vec<[f64; 3]>, Vec<f64>) {
        let mut nodes = Vec::with_capacity(self.len() / 2);
        let mut weights = Vec::with_capacity(self.len() / 2);
        for (node, w) in self.nodes.iter().zip(&self.weights) {
            if node[2] > 0.0 {
                nodes.push(*node);
                weights.push(2.0 * w);
            }
        }
        (nodes, weights)
    }
}

/// The five discrete collision invariants sampled on a grid:
/// `1, v_x, v_y, v_z, |v|²` at every node.
fn invariant_basis(grid: &VelocityGrid) -> [Vec<f64>; 5] {
    let n = grid.n();
    let mut basis: [Vec<f64>; 5] = [
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
        vec![0.0; grid.len()],
    ];
    for ix in 0..n {
        let vx = grid.coord(ix);
        for iy in 0..n {
            let vy = grid.coord(iy);
            for iz in 0..n {
                let vz = grid.coord(iz);
                let idx = grid.index(ix, iy, iz);
                basis[0][idx] = 1.0;
                basis[1][idx] = vx;
                basis[2][idx] = vy;
                basis[3][idx] = vz;
                basis[4][idx] = vx * vx + vy * vy + vz * vz;
            }
        }
    }
    basis
}

/// Solve a 5×5 linear system by Gaussian elimination with partial pivoting.
fn solve5(mut a: [[f64; 5]; 5], mut b: [f64; 5]) -> [f64; 5] {
    for col in 0..5 {
        let mut pivot = col;
        for row in col + 1..5 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        for row in col + 1..5 {
            let m = a[row][col] / d;
            for k in col..5 {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut s = b[col];
        for k in col + 1..5 {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    x
}

/// Project a collision output onto the subspace with exactly zero discrete
/// mass, momentum, and energy.
///
/// Least-squares correction in the `h³` grid inner product:
/// `q' = q − Σ_a c_a ψ_a` with `c = G⁻¹ m`, `G_ab = ⟨ψ_a, ψ_b⟩`,
/// `m_a = ⟨ψ_a, q⟩`, over the invariant basis `ψ = (1, v, |v|²)`. The
/// projection is idempotent and leaves zero-moment fields unchanged up to
/// roundoff.
pub fn conserve_project(q: &Distribution) -> Distribution {
    let basis = invariant_basis(&q.grid);
    let vol = q.grid.cell_volume();
    let mut gram = [[0.0; 5]; 5];
    let mut m = [0.0; 5];
    for a in 0..5 {
        for b in a..5 {
            let s: f64 = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
            gram[a][b] = vol * s;
            gram[b][a] = vol * s;
        }
        m[a] = vol * basis[a].iter().zip(&q.values).map(|(x, y)| x * y).sum::<f64>();
    }
    let c = solve5(gram, m);
    let mut values = q.values.clone();
    for a in 0..5 {
        if c[a] != 0.0 {
            for (v, psi) in values.iter_mut().zip(&basis[a]) {
                *v -= c[a] * psi;
            }
        }
    }
    Distribution {
        grid: q.grid,
        values,
        label: q.label,
    }
}

/// Discrete invariant moments `(mass, p_x, p_y, p_z, second moment)` of a
/// field in the `h³` inner product — the quantities zeroed by
/// [`conserve_project`].
pub fn invariant_moments(q: &Distribution) -> [f64; 5] {
    let basis = invariant_basis(&q.grid);
    let vol = q.grid.cell_volume();
    let mut m = [0.0; 5];
    for a in 0..5 {
        m[a] = vol * basis[a].iter().zip(&q.values).map(|(x, y)| x * y).sum::<f64>();
    }
    m
}

/// Which collision evaluator a solver should use.
#[derive(Clone, Debug)]
pub enum Collider {
    /// Brute-force oracle with the given spherical rule.
    Direct {
        quad: AngularQuadrature,
        opts: DirectOpts,
    },
    /// Fast spectral evaluator (weights cached per grid/model).
    Spectral(SpectralParams),
}

impl Collider {
    /// Default spectral evaluator.
    pub fn spectral() -> Self {
        Collider::Spectral(SpectralParams::default())
    }

    /// Evaluate `Q(f,f)`.
    pub fn eval(&self, f: &Distribution, model: &InteractionModel) -> Result<Distribution> {
        match self {
            Collider::Direct { quad, opts } => q_direct_with(f, model, quad, opts),
            Collider::Spectral(params) => {
                let op = spectral_op(f.grid, model, params)?;
                op.eval(f)
            }
        }
    }

    /// Evaluate and project onto the zero-invariant subspace.
    pub fn eval_projected(&self, f: &Distribution, model: &InteractionModel) -> Result<Distribution> {
        Ok(conserve_project(&self.eval(f, model)?))
    }
}
