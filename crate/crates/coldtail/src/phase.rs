//! Velocity grids, distribution fields, moments, and entropy.
//!
//! The velocity domain is the cube `[−L, L)³` discretized by `n` uniform
//! nodes per axis, `v_i = −L + i·h` with `h = 2L/n` and `n` even, so the
//! origin is the node `i = n/2`. Nodes come in `±v` pairs except for the
//! single boundary layer at `v = −L` (the `+L` partner is the first node of
//! the periodic extension); this is the convention expected by the Fourier
//! collision evaluator.
//!
//! All velocity integrals use the midpoint rule `h³·Σ`, which on this uniform
//! grid is spectrally accurate for smooth, rapidly decaying integrands.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Negative values larger (in magnitude) than this fraction of the field's
/// peak fail validation; smaller ones are tolerated as spectral ringing.
pub const NEGATIVITY_TOL: f64 = 1e-8;

/// Cells with `f` below this floor contribute zero to `∫ f ln f`.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Uniform truncated 3D Cartesian velocity lattice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityGrid {
    n: usize,
    l: f64,
    h: f64,
}

/// Build a velocity grid with `n` nodes per axis (even, ≥ 4) and half-width
/// `L > 0`.
pub fn make_grid(n_per_axis: usize, l: f64) -> Result<VelocityGrid> {
    if n_per_axis < 4 || n_per_axis % 2 != 0 {
        return Err(Error::InvalidParam(format!(
            "n_per_axis must be even and >= 4, got {n_per_axis}"
        )));
    }
    if !l.is_finite() || l <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "grid half-width L must be finite and > 0, got {l}"
        )));
    }
    Ok(VelocityGrid {
        n: n_per_axis,
        l,
        h: 2.0 * l / n_per_axis as f64,
    })
}

impl VelocityGrid {
    /// Nodes per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-width `L`.
    #[inline]
    pub fn half_width(&self) -> f64 {
        self.l
    }

    /// Spacing `h = 2L/n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total node count `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell volume `h³` (midpoint-rule weight).
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Coordinate of node `i` along one axis: `−L + i·h`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + self.h * i as f64
    }

    /// Row-major flat index (x slowest, z fastest).
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    /// Node coordinates of a flat index.
    #[inline]
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let iz = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let ix = idx / (self.n * self.n);
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    /// Cache/config identity of the grid.
    pub fn key(&self) -> (usize, u64) {
        (self.n, self.l.to_bits())
    }
}

/// Role a scalar field plays; purely descriptive metadata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldLabel {
    /// Laboratory-frame distribution `f(ξ)`.
    F,
    /// Reduced self-similar profile `F(w, ρ)`.
    ReducedProfile,
    /// Two-time self-similar profile `H(w̄, ρ̄)`.
    TwoTimeProfile,
    /// One τ-slice of the two-time field `K(t, τ, ϑ)`.
    KSlice,
}

impl FieldLabel {
    fn as_str(&self) -> &'static str {
        match self {
            FieldLabel::F => "f",
            FieldLabel::ReducedProfile => "F",
            FieldLabel::TwoTimeProfile => "H",
            FieldLabel::KSlice => "K",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "f" => Some(FieldLabel::F),
            "F" => Some(FieldLabel::ReducedProfile),
            "H" => Some(FieldLabel::TwoTimeProfile),
            "K" => Some(FieldLabel::KSlice),
            _ => None,
        }
    }
}

/// Scalar field over a [`VelocityGrid`] (phase-space density).
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub grid: VelocityGrid,
    /// Row-major values, length `n³`.
    pub values: Vec<f64>,
    pub label: FieldLabel,
}

impl Distribution {
    /// Zero field.
    pub fn zeros(grid: VelocityGrid, label: FieldLabel) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            label,
        }
    }

    /// Build from explicit values (length must match the grid).
    pub fn from_values(grid: VelocityGrid, values: Vec<f64>, label: FieldLabel) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, label })
    }

    /// Check finiteness and the negativity tolerance.
    pub fn validate(&self) -> Result<()> {
        let mut peak = 0.0_f64;
        for &v in &self.values {
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "distribution contains non-finite value {v}"
                )));
            }
            peak = peak.max(v.abs());
        }
        let floor = -NEGATIVITY_TOL * peak;
        if let Some(&bad) = self.values.iter().find(|&&v| v < floor) {
            return Err(Error::Numerical(format!(
                "distribution has negative value {bad} below the tolerance {floor:.3e}"
            )));
        }
        Ok(())
    }

    /// True when all values are finite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Fraction of `Σ|f|` carried by the outermost node layer; the periodic
    /// spectral evaluator assumes this is negligible.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let n = self.grid.n;
        let mut boundary = 0.0;
        let mut total = 0.0;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let v = self.values[self.grid.index(ix, iy, iz)].abs();
                    total += v;
                    let edge = |i: usize| i == 0 || i == n - 1;
                    if edge(ix) || edge(iy) || edge(iz) {
                        boundary += v;
                    }
                }
            }
        }
        if total > 0.0 {
            boundary / total
        } else {
            0.0
        }
    }

    /// `self + scale·other` (grids must match).
    pub fn add_scaled(&self, other: &Distribution, scale: f64) -> Result<Distribution> {
        if self.grid != other.grid {
            return Err(Error::InvalidParam(
                "add_scaled requires matching grids".to_owned(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Distribution {
            grid: self.grid,
            values,
            label: self.label,
        })
    }

    /// Midpoint-rule L² norm `sqrt(h³·Σ f²)`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    /// Max-norm `max |f|`.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Low-order velocity moments of a distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `h³·Σ f`.
    pub density: f64,
    /// `h³·Σ f v`.
    pub momentum: [f64; 3],
    /// Second moment with the kinetic ½: `h³·Σ f |v|²/2`.
    pub energy: f64,
    /// `(2/3)·(energy/density − |momentum/density|²/2)`; 0 for empty fields.
    pub temperature: f64,
}

/// Midpoint-rule moments (mass, momentum, energy, derived temperature).
pub fn moments(dist: &Distribution) -> Moments {
    let grid = &dist.grid;
    let n = grid.n;
    let mut density = 0.0;
    let mut momentum = [0.0; 3];
    let mut second = 0.0;
    for ix in 0..n {
        let vx = grid.coord(ix);
        for iy in 0..n {
            let vy = grid.coord(iy);
            let base = (ix * n + iy) * n;
            for iz in 0..n {
                let vz = grid.coord(iz);
                let f = dist.values[base + iz];
                density += f;
                momentum[0] += f * vx;
                momentum[1] += f * vy;
                momentum[2] += f * vz;
                second += f * (vx * vx + vy * vy + vz * vz);
            }
        }
    }
    let vol = grid.cell_volume();
    density *= vol;
    for m in &mut momentum {
        *m *= vol;
    }
    let energy = 0.5 * vol * second;
    let temperature = if density > 0.0 {
        let u2 = momentum
            .iter()
            .map(|m| (m / density) * (m / density))
            .sum::<f64>();
        (2.0 / 3.0) * (energy / density - 0.5 * u2)
    } else {
        0.0
    };
    Moments {
        density,
        momentum,
        energy,
        temperature,
    }
}

/// Unweighted second moment `h³·Σ f |v|²` (no kinetic ½); the `E(ρ)` of the
/// reduced-equation energy identity up to the fixed factor 2.
pub fn second_moment(dist: &Distribution) -> f64 {
    let grid = &dist.grid;
    let n = grid.n;
    let mut second = 0.0;
    for ix in 0..n {
        let vx = grid.coord(ix);
        for iy in 0..n {
            let vy = grid.coord(iy);
            let base = (ix * n + iy) * n;
            for iz in 0..n {
                let vz = grid.coord(iz);
                second += dist.values[base + iz] * (vx * vx + vy * vy + vz * vz);
            }
        }
    }
    grid.cell_volume() * second
}

/// Boltzmann H functional `h³·Σ f ln f`, skipping cells below
/// [`ENTROPY_FLOOR`] (and any negative ringing).
pub fn entropy(dist: &Distribution) -> f64 {
    let sum: f64 = dist
        .values
        .iter()
        .filter(|&&f| f >= ENTROPY_FLOOR)
        .map(|&f| f * f.ln())
        .sum();
    dist.grid.cell_volume() * sum
}

/// Analytic H of a Maxwellian with density `n0` and temperature `t`:
/// `n0·(ln(n0/(2πT)^{3/2}) − 3/2)`.
pub fn maxwellian_entropy(n0: f64, t: f64) -> f64 {
    n0 * ((n0 / (2.0 * std::f64::consts::PI * t).powf(1.5)).ln() - 1.5)
}

/// Support check for a drifting Maxwellian: `|u| + 4√T` against `L` with the
/// given safety margin (fraction of `L` kept free).
pub fn support_fits(grid: &VelocityGrid, u: [f64; 3], t: f64, margin: f64) -> bool {
    let speed = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    speed + 4.0 * t.sqrt() <= grid.half_width() * (1.0 - margin)
}

/// Drifting Maxwellian `n0·(2πT)^{−3/2}·exp(−|v−u|²/(2T))` sampled at the
/// nodes.
///
/// The caller is responsible for the support heuristic (`|u| + 4√T ≲ L`);
/// [`maxwellian_checked`] reports it, and overflow is a warning rather than
/// an error.
pub fn maxwellian(grid: VelocityGrid, n0: f64, u: [f64; 3], t: f64) -> Result<Distribution> {
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParam(format!(
            "maxwellian density must be > 0, got {n0}"
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParam(format!(
            "maxwellian temperature must be > 0, got {t}"
        )));
    }
    let norm = n0 / (2.0 * std::f64::consts::PI * t).powf(1.5);
    let n = grid.n;
    let mut values = vec![0.0; grid.len()];
    for ix in 0..n {
        let dx = grid.coord(ix) - u[0];
        for iy in 0..n {
            let dy = grid.coord(iy) - u[1];
            let base = (ix * n + iy) * n;
            for iz in 0..n {
                let dz = grid.coord(iz) - u[2];
                values[base + iz] = norm * (-(dx * dx + dy * dy + dz * dz) / (2.0 * t)).exp();
            }
        }
    }
    Ok(Distribution {
        grid,
        values,
        label: FieldLabel::F,
    })
}

/// Support diagnostics attached to a constructed state.
#[derive(Clone, Copy, Debug)]
pub struct SupportReport {
    /// `|u| + 4√T`.
    pub support_radius: f64,
    /// True when the support fits inside `L` with the default 12.5% margin.
    pub fits: bool,
}

/// [`maxwellian`] plus the support heuristic (12.5% margin).
pub fn maxwellian_checked(
    grid: VelocityGrid,
    n0: f64,
    u: [f64; 3],
    t: f64,
) -> Result<(Distribution, SupportReport)> {
    let dist = maxwellian(grid, n0, u, t)?;
    let speed = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let report = SupportReport {
        support_radius: speed + 4.0 * t.sqrt(),
        fits: support_fits(&grid, u, t, 0.125),
    };
    Ok((dist, report))
}

/// Reference states: mixtures and the closed-form isotropic relaxation
/// family for Maxwell molecules, which serves as the time-dependent oracle
/// for the homogeneous solvers.
pub mod states {
    use super::*;

    /// Two-bump mixture: equal-temperature Maxwellians at `±u` with total
    /// density `n0`.
    pub fn two_bump(grid: VelocityGrid, n0: f64, u: [f64; 3], t: f64) -> Result<Distribution> {
        let a = maxwellian(grid, 0.5 * n0, u, t)?;
        let b = maxwellian(grid, 0.5 * n0, [-u[0], -u[1], -u[2]], t)?;
        a.add_scaled(&b, 1.0)
    }

    /// Closed-form isotropic relaxation solution for Maxwell molecules with
    /// the isotropic angular weight `b = 1/(4π)`:
    ///
    /// ```text
    /// f(v; K) = n0 (2πKT)^{−3/2} e^{−|v|²/(2KT)} [ (5K−3)/(2K) + (1−K)|v|²/(2K²T) ]
    /// K(t)    = 1 − (1 − K₀) e^{−μ t},   μ = n0·kernel_scale/6
    /// ```
    ///
    /// Density `n0` and energy `(3/2)n0·T` are constant in time; positivity
    /// requires `K ≥ 3/5`.
    pub fn bkw(grid: VelocityGrid, n0: f64, t_temp: f64, k: f64) -> Result<Distribution> {
        if !(0.6..=1.0).contains(&k) {
            return Err(Error::InvalidParam(format!(
                "relaxation parameter K must lie in [0.6, 1] for positivity, got {k}"
            )));
        }
        let kt = k * t_temp;
        let norm = n0 / (2.0 * std::f64::consts::PI * kt).powf(1.5);
        let a = (5.0 * k - 3.0) / (2.0 * k);
        let b = (1.0 - k) / (2.0 * k * k * t_temp);
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        for ix in 0..n {
            let vx = grid.coord(ix);
            for iy in 0..n {
                let vy = grid.coord(iy);
                let base = (ix * n + iy) * n;
                for iz in 0..n {
                    let vz = grid.coord(iz);
                    let v2 = vx * vx + vy * vy + vz * vz;
                    values[base + iz] = norm * (-v2 / (2.0 * kt)).exp() * (a + b * v2);
                }
            }
        }
        Ok(Distribution {
            grid,
            values,
            label: FieldLabel::F,
        })
    }

    /// `K(t) = 1 − (1−K₀)e^{−μt}` with `μ = n0·kernel_scale/6`.
    pub fn bkw_k(t: f64, k0: f64, n0: f64, kernel_scale: f64) -> f64 {
        let mu = n0 * kernel_scale / 6.0;
        1.0 - (1.0 - k0) * (-mu * t).exp()
    }

    /// Analytic `∂_t f` of the relaxation family at parameter `K`:
    /// `df/dK · K̇` with `K̇ = μ(1−K)`.
    pub fn bkw_time_derivative(
        grid: VelocityGrid,
        n0: f64,
        t_temp: f64,
        k: f64,
        kernel_scale: f64,
    ) -> Result<Distribution> {
        if !(0.6..=1.0).contains(&k) {
            return Err(Error::InvalidParam(format!(
                "relaxation parameter K must lie in [0.6, 1], got {k}"
            )));
        }
        let kt = k * t_temp;
        let norm = n0 / (2.0 * std::f64::consts::PI * kt).powf(1.5);
        let a = (5.0 * k - 3.0) / (2.0 * k);
        let b = (1.0 - k) / (2.0 * k * k * t_temp);
        // d/dK of the polynomial coefficients.
        let da = 3.0 / (2.0 * k * k);
        let db = (k - 2.0) / (2.0 * t_temp * k * k * k);
        let kdot = n0 * kernel_scale / 6.0 * (1.0 - k);
        let n = grid.n();
        let mut values = vec![0.0; grid.len()];
        for ix in 0..n {
            let vx = grid.coord(ix);
            for iy in 0..n {
                let vy = grid.coord(iy);
                let base = (ix * n + iy) * n;
                for iz in 0..n {
                    let vz = grid.coord(iz);
                    let v2 = vx * vx + vy * vy + vz * vz;
                    let g = norm * (-v2 / (2.0 * kt)).exp();
                    // dG/dK = G·(−3/(2K) + v²/(2K²T)); product rule with (a + b v²).
                    let dg_factor = -1.5 / k + v2 / (2.0 * k * k * t_temp);
                    let df_dk = g * (dg_factor * (a + b * v2) + da + db * v2);
                    values[base + iz] = df_dk * kdot;
                }
            }
        }
        Ok(Distribution {
            grid,
            values,
            label: FieldLabel::F,
        })
    }
}

/// Portable text serialization of [`Distribution`] fields.
///
/// The format is line-oriented: a fixed magic line, three `key = value`
/// header lines (`n`, `L`, `label`), then exactly `n³` values, one per line,
/// in row-major node order (x slowest, z fastest).
pub mod io {
    use super::*;

    pub const MAGIC: &str = "coldtail-distribution v1";

    /// Serialize in the portable text format with 17 significant digits.
    pub fn export_text(dist: &Distribution) -> String {
        let mut out = String::with_capacity(dist.values.len() * 26 + 128);
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("n = {}\n", dist.grid.n()));
        out.push_str(&format!("L = {:.17e}\n", dist.grid.half_width()));
        out.push_str(&format!("label = {}\n", dist.label.as_str()));
        for v in &dist.values {
            out.push_str(&format!("{v:.17e}\n"));
        }
        out
    }

    /// Parse the portable text format; errors carry 1-based line numbers.
    pub fn import_text(text: &str) -> Result<Distribution> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: String| Error::InvalidParam(format!("line {line}: {msg}"));

        let (_, magic) = lines
            .next()
            .ok_or_else(|| bad(1, "empty input".to_owned()))?;
        if magic.trim() != MAGIC {
            return Err(bad(1, format!("expected magic line {MAGIC:?}")));
        }

        let mut header_field = |name: &str| -> Result<(usize, String)> {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| bad(0, format!("missing header field {name}")))?;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(idx + 1, format!("expected `{name} = ...`")))?;
            if key.trim() != name {
                return Err(bad(idx + 1, format!("expected field {name}, got {}", key.trim())));
            }
            Ok((idx + 1, value.trim().to_owned()))
        };

        let (nline, nstr) = header_field("n")?;
        let n: usize = nstr
            .parse()
            .map_err(|e| bad(nline, format!("bad node count: {e}")))?;
        let (lline, lstr) = header_field("L")?;
        let l: f64 = lstr
            .parse()
            .map_err(|e| bad(lline, format!("bad half-width: {e}")))?;
        let (labline, labstr) = header_field("label")?;
        let label = FieldLabel::parse(&labstr)
            .ok_or_else(|| bad(labline, format!("unknown label {labstr:?}")))?;

        if n > 256 {
            return Err(bad(nline, format!("node count {n} per axis is too large")));
        }
        let grid = make_grid(n, l)?;
        let mut values = Vec::with_capacity(grid.len());
        for (idx, line) in &mut lines {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let v: f64 = t
                .parse()
                .map_err(|e| bad(idx + 1, format!("bad value: {e}")))?;
            if !v.is_finite() {
                return Err(bad(idx + 1, format!("non-finite value {v}")));
            }
            if values.len() == grid.len() {
                return Err(bad(idx + 1, "more values than grid nodes".to_owned()));
            }
            values.push(v);
        }
        if values.len() != grid.len() {
            return Err(Error::InvalidParam(format!(
                "expected {} values, found {}",
                grid.len(),
                values.len()
            )));
        }
        Distribution::from_values(grid, values, label)
    }
}
