//! Fast spectral evaluation of the collision operator.
//!
//! The operator is evaluated in its polar Carleman-type form: writing the
//! relative velocity as `g = r·ω`,
//!
//! ```text
//! Q⁺(ξ) = ks ∫ r^{γ+2} dr ∫_{S²} dσ (1/4π) ∫_{S²} dω
//!             f(ξ − r(ω−σ)/2) · f(ξ − r(ω+σ)/2)
//! Q⁻(ξ) = f(ξ) · ks ∫ r^{γ+2} dr ∫_{S²} dω f(ξ − rω)
//! ```
//!
//! (isotropic angular weight; `∫ b dσ = 1` is consumed in the loss term and
//! cancels the `1/4π` against the ω-sphere measure in the gain term).
//!
//! On the periodic velocity box the ω-integral of the gain term is a
//! spherical mean, diagonal in Fourier space with symbol `4π·sinc(ζ|k|r/2)`.
//! Discretizing `r` by Gauss–Legendre on `[0, L]` and `σ` by an antipodally
//! symmetric spherical rule gives, per radial node `r_q`:
//!
//! ```text
//! A_q(u)  = Σ_p w_p · f(u + r_q σ_p/2) · f(u − r_q σ_p/2)
//! Q̂⁺(k)  = ks Σ_q ω̃_q · sinc(ζ r_q |k|/2) · Â_q(k),   ω̃_q = w_q^{GL} r_q^{γ+2}
//! ```
//!
//! The loss term is a convolution with the multiplier
//!
//! ```text
//! β(k) = ks Σ_q ω̃_q Σ_p w_p cos(ζ r_q k·σ_p)
//! ```
//!
//! which deliberately reuses the *same* discrete rule `(r_q, σ_p)` as the
//! gain term instead of its closed form `4π·sinc(ζ|k|r)`: with matched
//! quadratures the discrete mass of the output cancels to roundoff (the gain
//! and loss `k`-sums are term-for-term equal after antipodal symmetrization),
//! so conservation does not depend on quadrature accuracy. Momentum and
//! energy errors are bounded by the spectral truncation and decay with the
//! smoothness of `f`.
//!
//! Shifted copies of `f` are never materialized: each `(q, p)` term needs the
//! two half-shifted fields `f(u ± r_q σ_p/2)`, which are recovered from a
//! single inverse transform. With `φ(k) = e^{iζ k·a}` and `D = IFFT[(Re φ +
//! Im φ)·F̂]`, the product of the two shifts is `Re(D)² − Im(D)²`; only one
//! complex transform per `(q, p)` pair is spent. Modes on the Nyquist planes
//! are zeroed up front so every shifted field is exactly real.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::fft3::{C64, Fft3};
use super::{gauss_legendre, AngularQuadrature};
use crate::model::InteractionModel;
use crate::phase::{Distribution, VelocityGrid};
use crate::{Error, Result};

/// Quadrature sizes and guards for the spectral evaluator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralParams {
    /// Gauss–Legendre nodes on the radial interval `[0, L]`.
    pub n_radial: usize,
    /// Polar nodes of the spherical product rule (even).
    pub n_polar: usize,
    /// Azimuthal nodes of the spherical product rule (even).
    pub n_azimuth: usize,
    /// Fail instead of proceeding when the boundary layer carries more than
    /// `boundary_tol` of the state's total |f| (the periodic evaluator is
    /// only meaningful for compactly supported states).
    pub strict_boundary: bool,
    /// Boundary-mass threshold for `strict_boundary`.
    pub boundary_tol: f64,
}

impl Default for SpectralParams {
    /// The spherical rule dominates the quadrature error: 6×12 plateaus near
    /// 4e-3 relative error on smooth states, 8×16 near 4e-4, while the radial
    /// rule is converged by 12 nodes. 8×16 keeps a 32-point grid evaluation
    /// well under a second once the operator tables are cached.
    fn default() -> Self {
        Self {
            n_radial: 12,
            n_polar: 8,
            n_azimuth: 16,
            strict_boundary: false,
            boundary_tol: 1e-3,
        }
    }
}

impl SpectralParams {
    /// Smaller quadrature for long time-marching runs; roughly 3–4× faster
    /// per evaluation than the default.
    pub fn coarse() -> Self {
        Self {
            n_radial: 8,
            n_polar: 4,
            n_azimuth: 8,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_radial < 2 {
            return Err(Error::InvalidParam(format!(
                "n_radial must be >= 2, got {}",
                self.n_radial
            )));
        }
        if !(self.boundary_tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "boundary_tol must be positive, got {}",
                self.boundary_tol
            )));
        }
        Ok(())
    }
}

/// Numerical health report of one spectral evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct SpectralDiagnostics {
    /// Fraction of `Σ|f|` on the outermost grid layer.
    pub boundary_fraction: f64,
    /// Largest imaginary residue of the (mathematically real) output,
    /// relative to its largest real value; roundoff-sized when healthy.
    pub imag_residual: f64,
}

/// Precomputed spectral collision evaluator for one (grid, model, quadrature)
/// combination. Obtain through [`spectral_op`], which caches instances.
pub struct SpectralOp {
    grid: VelocityGrid,
    kernel_scale: f64,
    params: SpectralParams,
    fft: Fft3,
    /// Radial nodes with folded weights `ω̃_q = w_q^{GL}·r_q^{γ+2}`.
    radial: Vec<(f64, f64)>,
    /// Upper-hemisphere direction nodes with doubled weights (total `4π`).
    sphere: Vec<([f64; 3], f64)>,
    /// Per radial node: `sinc(ζ r_q |k|/2)` over all modes, zero on Nyquist planes.
    sinc: Vec<Vec<f64>>,
    /// Loss multiplier `β(k)` (without the kernel scale).
    loss: Vec<f64>,
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Signed mode number of FFT bin `i` for an `n`-point transform.
#[inline]
pub(crate) fn mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

pub(crate) fn zero_nyquist(buf: &mut [C64], n: usize) {
    let ny = n / 2;
    for a in 0..n {
        for b in 0..n {
            buf[(ny * n + a) * n + b] = C64::new(0.0, 0.0);
            buf[(a * n + ny) * n + b] = C64::new(0.0, 0.0);
            buf[(a * n + b) * n + ny] = C64::new(0.0, 0.0);
        }
    }
}

impl SpectralOp {
    fn build(grid: VelocityGrid, model: &InteractionModel, params: &SpectralParams) -> Result<Self> {
        model.validate()?;
        params.validate()?;
        if !model.angular.is_isotropic() {
            return Err(Error::InvalidParam(
                "the spectral evaluator supports only the isotropic angular weight; \
                 use the direct evaluator for custom b(cosθ)"
                    .into(),
            ));
        }
        let n = grid.n();
        let l = grid.half_width();
        let zeta = std::f64::consts::PI / l;
        let gamma = model.gamma;

        // Radial rule on [0, L] mapped from Gauss–Legendre on [-1, 1];
        // nodes are interior, so r^{γ+2} stays finite for all admissible γ.
        let (x, w) = gauss_legendre(params.n_radial);
        let radial: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let r = 0.5 * l * (xi + 1.0);
                (r, 0.5 * l * wi * r.powf(gamma + 2.0))
            })
            .collect();

        let full = AngularQuadrature::product_gauss(params.n_polar, params.n_azimuth)?;
        let (nodes, weights) = full.half_sphere();
        let sphere: Vec<([f64; 3], f64)> = nodes.into_iter().zip(weights).collect();

        // Signed-mode vector per flat index (x slowest, z fastest).
        let mut kvec = vec![[0i64; 3]; grid.len()];
        let mut nyquist = vec![false; grid.len()];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let idx = grid.index(ix, iy, iz);
                    kvec[idx] = [mode(ix, n), mode(iy, n), mode(iz, n)];
                    nyquist[idx] = ix == n / 2 || iy == n / 2 || iz == n / 2;
                }
            }
        }

        let sinc_tables: Vec<Vec<f64>> = radial
            .iter()
            .map(|&(r, _)| {
                kvec.iter()
                    .zip(&nyquist)
                    .map(|(k, &ny)| {
                        if ny {
                            0.0
                        } else {
                            let kabs = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
                            sinc(0.5 * zeta * r * kabs)
                        }
                    })
                    .collect()
            })
            .collect();

        // Loss multiplier from the same discrete rule as the gain term (see
        // module docs: this is what makes discrete mass cancel exactly).
        let mut shifts = Vec::with_capacity(radial.len() * sphere.len());
        for &(r, wt) in &radial {
            for &(s, u) in &sphere {
                shifts.push(([zeta * r * s[0], zeta * r * s[1], zeta * r * s[2]], wt * u));
            }
        }
        let loss: Vec<f64> = kvec
            .iter()
            .map(|k| {
                let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
                shifts
                    .iter()
                    .map(|(c, w)| w * (c[0] * kf[0] + c[1] * kf[1] + c[2] * kf[2]).cos())
                    .sum()
            })
            .collect();

        Ok(Self {
            grid,
            kernel_scale: model.kernel_scale,
            params: *params,
            fft: Fft3::new(n),
            radial,
            sphere,
            sinc: sinc_tables,
            loss,
        })
    }

    pub fn grid(&self) -> VelocityGrid {
        self.grid
    }

    pub fn params(&self) -> &SpectralParams {
        &self.params
    }

    /// Number of 3-D transforms spent per evaluation.
    pub fn transforms_per_eval(&self) -> usize {
        // Forward of f, one inverse per (q, p), one forward per q,
        // inverse of the gain, inverse of the loss convolution.
        1 + self.radial.len() * self.sphere.len() + self.radial.len() + 2
    }

    /// Evaluate `Q(f,f)` on the operator's grid.
    pub fn eval(&self, f: &Distribution) -> Result<Distribution> {
        Ok(self.eval_with_diagnostics(f)?.0)
    }

    /// Evaluate with a numerical health report.
    pub fn eval_with_diagnostics(
        &self,
        f: &Distribution,
    ) -> Result<(Distribution, SpectralDiagnostics)> {
        if f.grid.key() != self.grid.key() {
            return Err(Error::InvalidParam(format!(
                "distribution grid {:?} does not match the operator grid {:?}",
                f.grid.key(),
                self.grid.key()
            )));
        }
        if !f.is_finite() {
            return Err(Error::Numerical(
                "spectral evaluation of a non-finite distribution".into(),
            ));
        }
        let boundary_fraction = f.boundary_mass_fraction();
        if self.params.strict_boundary && boundary_fraction > self.params.boundary_tol {
            return Err(Error::Numerical(format!(
                "boundary layer carries {boundary_fraction:.3e} of the state \
                 (limit {:.3e}); enlarge the velocity box",
                self.params.boundary_tol
            )));
        }

        let n = self.grid.n();
        let n3 = self.grid.len();
        let inv_n3 = 1.0 / n3 as f64;
        let zeta = std::f64::consts::PI / self.grid.half_width();
        let mut scratch = self.fft.make_scratch();

        let mut fhat: Vec<C64> = f.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.fft.forward(&mut fhat, &mut scratch);
        zero_nyquist(&mut fhat, n);

        let mut ghat = vec![C64::new(0.0, 0.0); n3];
        let mut work = vec![C64::new(0.0, 0.0); n3];
        let mut aq = vec![0.0f64; n3];
        let mut px = vec![C64::new(0.0, 0.0); n];
        let mut py = vec![C64::new(0.0, 0.0); n];
        let mut pz = vec![C64::new(0.0, 0.0); n];

        for (q, &(r, wt)) in self.radial.iter().enumerate() {
            aq.iter_mut().for_each(|v| *v = 0.0);
            for &(sig, u) in &self.sphere {
                // Per-axis phases of the half-shift a = r σ / 2.
                for i in 0..n {
                    let m = mode(i, n) as f64;
                    px[i] = C64::from_polar(1.0, zeta * m * 0.5 * r * sig[0]);
                    py[i] = C64::from_polar(1.0, zeta * m * 0.5 * r * sig[1]);
                    pz[i] = C64::from_polar(1.0, zeta * m * 0.5 * r * sig[2]);
                }
                for ix in 0..n {
                    let phx = px[ix];
                    for iy in 0..n {
                        let phxy = phx * py[iy];
                        let base = (ix * n + iy) * n;
                        for iz in 0..n {
                            let ph = phxy * pz[iz];
                            // cos+sin multiplier packs both half-shifts into
                            // one transform (see module docs).
                            work[base + iz] = fhat[base + iz] * (ph.re + ph.im);
                        }
                    }
                }
                self.fft.inverse(&mut work, &mut scratch);
                for (a, w) in aq.iter_mut().zip(&work) {
                    let re = w.re * inv_n3;
                    let im = w.im * inv_n3;
                    *a += u * (re * re - im * im);
                }
            }
            for (w, &a) in work.iter_mut().zip(aq.iter()) {
                *w = C64::new(a, 0.0);
            }
            self.fft.forward(&mut work, &mut scratch);
            let sinc_q = &self.sinc[q];
            for ((g, w), &s) in ghat.iter_mut().zip(&work).zip(sinc_q) {
                *g += *w * (wt * s);
            }
        }

        self.fft.inverse(&mut ghat, &mut scratch);
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for g in &ghat {
            max_re = max_re.max((g.re * inv_n3).abs());
            max_im = max_im.max((g.im * inv_n3).abs());
        }

        // Loss convolution: IFFT[β·F̂].
        for (w, (&b, fh)) in work.iter_mut().zip(self.loss.iter().zip(&fhat)) {
            *w = *fh * b;
        }
        self.fft.inverse(&mut work, &mut scratch);

        let ks = self.kernel_scale;
        let values: Vec<f64> = (0..n3)
            .map(|i| ks * (ghat[i].re * inv_n3 - f.values[i] * work[i].re * inv_n3))
            .collect();

        let diag = SpectralDiagnostics {
            boundary_fraction,
            imag_residual: if max_re > 0.0 { max_im / max_re } else { max_im },
        };
        Ok((
            Distribution {
                grid: self.grid,
                values,
                label: f.label,
            },
            diag,
        ))
    }
}

type CacheKey = (usize, u64, u64, u64, usize, usize, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<SpectralOp>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<SpectralOp>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Fetch (or build and cache) the spectral evaluator for a grid, model, and
/// quadrature. Precomputation is amortized: repeated calls with the same key
/// return the same shared instance.
pub fn spectral_op(
    grid: VelocityGrid,
    model: &InteractionModel,
    params: &SpectralParams,
) -> Result<Arc<SpectralOp>> {
    if !model.angular.is_isotropic() {
        return Err(Error::InvalidParam(
            "the spectral evaluator supports only the isotropic angular weight".into(),
        ));
    }
    let (n, lbits) = grid.key();
    let key: CacheKey = (
        n,
        lbits,
        model.gamma.to_bits(),
        model.kernel_scale.to_bits(),
        params.n_radial,
        params.n_polar,
        params.n_azimuth,
    );
    if let Some(op) = cache().lock().unwrap().get(&key) {
        // The boundary guards are not part of the cache key; reuse requires
        // they match, otherwise build an uncached instance below.
        if op.params == *params {
            return Ok(Arc::clone(op));
        }
    }
    let op = Arc::new(SpectralOp::build(grid, model, params)?);
    cache().lock().unwrap().insert(key, Arc::clone(&op));
    Ok(op)
}

/// One-shot spectral evaluation of `Q(f,f)` (uses the operator cache).
pub fn q_spectral(
    f: &Distribution,
    model: &InteractionModel,
    params: &SpectralParams,
) -> Result<Distribution> {
    spectral_op(f.grid, model, params)?.eval(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collide::{invariant_moments, q_direct, AngularQuadrature};
    use crate::model::AngularModel;
    use crate::phase::{make_grid, maxwellian, states, FieldLabel};

    #[test]
    fn maxwellian_is_nearly_annihilated() {
        let g = make_grid(24, 7.0).unwrap();
        let f = maxwellian(g, 1.0, [0.0; 3], 1.0).unwrap();
        let model = InteractionModel::maxwell();
        let q = q_spectral(&f, &model, &SpectralParams::default()).unwrap();
        // Collision rate scale: ks·ρ·f_max.
        let scale = f.max_norm();
        assert!(
            q.max_norm() < 1e-4 * scale,
            "residual {} vs scale {}",
            q.max_norm(),
            scale
        );
    }

    #[test]
    fn mass_is_conserved_to_roundoff() {
        let g = make_grid(16, 6.0).unwrap();
        let f = states::two_bump(g, 1.0, [1.5, 0.0, 0.0], 0.6).unwrap();
        for s in [5.0, 9.0, 3.5] {
            let model = InteractionModel::from_s(s).unwrap();
            let q = q_spectral(&f, &model, &SpectralParams::default()).unwrap();
            let m = invariant_moments(&q);
            // Scale of the mass sum before cancellation.
            let scale = g.cell_volume() * q.values.iter().map(|v| v.abs()).sum::<f64>();
            assert!(
                m[0].abs() <= 1e-13 * scale.max(1e-300),
                "s = {s}: mass {} vs scale {scale}",
                m[0]
            );
        }
    }

    #[test]
    fn momentum_and_energy_errors_are_truncation_small() {
        let g = make_grid(24, 7.0).unwrap();
        let f = maxwellian(g, 1.0, [0.4, 0.0, -0.2], 0.9).unwrap();
        let model = InteractionModel::from_s(9.0).unwrap();
        let q = q_spectral(&f, &model, &SpectralParams::default()).unwrap();
        let m = invariant_moments(&q);
        // Energy scale of the state (second moment), per unit time scale ks·ρ.
        let e_scale = 3.0 * 0.9 + 0.2;
        for a in 1..5 {
            assert!(
                m[a].abs() < 1e-5 * e_scale,
                "moment {a} drift {} too large",
                m[a]
            );
        }
    }

    #[test]
    fn output_is_real_and_torus_even_for_even_states() {
        let g = make_grid(16, 6.0).unwrap();
        let f = states::two_bump(g, 1.0, [1.5, 0.0, 0.0], 0.6).unwrap();
        let model = InteractionModel::from_s(9.0).unwrap();
        let op = spectral_op(g, &model, &SpectralParams::default()).unwrap();
        let (q, diag) = op.eval_with_diagnostics(&f).unwrap();
        assert!(diag.imag_residual < 1e-10, "imag residual {}", diag.imag_residual);
        let n = g.n();
        let scale = q.max_norm();
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let a = q.values[g.index(ix, iy, iz)];
                    let b = q.values[g.index((n - ix) % n, (n - iy) % n, (n - iz) % n)];
                    assert!(
                        (a - b).abs() <= 1e-11 * scale,
                        "asymmetry at ({ix},{iy},{iz})"
                    );
                }
            }
        }
    }

    #[test]
    fn agrees_with_the_direct_oracle_on_a_coarse_grid() {
        // Loose structural cross-check only: at n = 8 the cell width is
        // comparable to the thermal speed, and the direct evaluator's
        // trilinear interpolation of post-collision velocities carries an
        // O(h²) bias that is a sizable fraction of the collision term itself.
        // Measured mismatch on this state is ~0.4; the spectral evaluator is
        // validated quantitatively against the analytic relaxation solution
        // elsewhere, so this test only pins down sign/scale/shape agreement.
        let g = make_grid(8, 4.0).unwrap();
        let f = states::two_bump(g, 1.0, [1.2, 0.0, 0.0], 0.5).unwrap();
        let model = InteractionModel::maxwell();
        let quad = AngularQuadrature::product_gauss(6, 12).unwrap();
        let qd = q_direct(&f, &model, &quad).unwrap();
        let qs = q_spectral(&f, &model, &SpectralParams::default()).unwrap();
        let diff = qs.add_scaled(&qd, -1.0).unwrap();
        let rel = diff.l2_norm() / qd.l2_norm();
        assert!(rel < 0.6, "direct/spectral mismatch {rel}");
        // The two fields must at least correlate strongly (shape agreement).
        let dot: f64 = qs.values.iter().zip(&qd.values).map(|(a, b)| a * b).sum();
        let corr = dot / (qs.l2_norm() * qd.l2_norm() / g.cell_volume());
        assert!(corr > 0.9, "direct/spectral correlation {corr}");
    }

    #[test]
    fn cache_returns_shared_instances() {
        let g = make_grid(8, 4.0).unwrap();
        let model = InteractionModel::from_s(7.0).unwrap();
        let p = SpectralParams::default();
        let a = spectral_op(g, &model, &p).unwrap();
        let b = spectral_op(g, &model, &p).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let other = InteractionModel::from_s(8.0).unwrap();
        let c = spectral_op(g, &other, &p).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }

    #[test]
    fn output_is_exactly_linear_in_kernel_scale() {
        let g = make_grid(8, 4.0).unwrap();
        let f = states::two_bump(g, 1.0, [1.2, 0.0, 0.0], 0.5).unwrap();
        let m1 = InteractionModel::from_s(9.0).unwrap();
        let m2 = InteractionModel::from_s(9.0)
            .unwrap()
            .with_kernel_scale(2.0)
            .unwrap();
        let q1 = q_spectral(&f, &m1, &SpectralParams::default()).unwrap();
        let q2 = q_spectral(&f, &m2, &SpectralParams::default()).unwrap();
        for (a, b) in q1.values.iter().zip(&q2.values) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn rejects_custom_angular_weights() {
        let g = make_grid(8, 4.0).unwrap();
        let model = InteractionModel::maxwell()
            .with_angular(AngularModel::Custom(Arc::new(|_| 1.0)));
        assert!(spectral_op(g, &model, &SpectralParams::default()).is_err());
    }

    #[test]
    fn rejects_grid_mismatch() {
        let g8 = make_grid(8, 4.0).unwrap();
        let g16 = make_grid(16, 4.0).unwrap();
        let model = InteractionModel::maxwell();
        let op = spectral_op(g8, &model, &SpectralParams::default()).unwrap();
        let f = Distribution::zeros(g16, FieldLabel::F);
        assert!(op.eval(&f).is_err());
    }

    #[test]
    fn strict_boundary_guard_fires() {
        let g = make_grid(16, 4.0).unwrap();
        // Bulk sits right at the box edge.
        let f = maxwellian(g, 1.0, [3.5, 0.0, 0.0], 0.5).unwrap();
        let model = InteractionModel::maxwell();
        let params = SpectralParams {
            strict_boundary: true,
            boundary_tol: 1e-6,
            ..SpectralParams::default()
        };
        let op = SpectralOp::build(g, &model, &params).unwrap();
        assert!(op.eval(&f).is_err());
    }
}
