//! Brute-force collision quadrature (the cross-validation oracle).
//!
//! Evaluates, at every grid node ξ,
//!
//! ```text
//! Q(f,f)(ξ) = h³ · Σ_{ξ*}  Σ_σ  w_σ · B(ξ−ξ*, σ) · [ f(ξ'*)·f(ξ') − f(ξ*)·f(ξ) ]
//! ```
//!
//! with the post-collision velocities `ξ', ξ'*` from
//! [`crate::model::post_collision`] and trilinear interpolation for the
//! off-grid values (zero outside the box). Work is `O(n⁶ · |quad|)`, so grids
//! beyond 12³ are refused unless explicitly allowed.

use rayon::prelude::*;

use super::AngularQuadrature;
use crate::model::{dot, kernel_core, post_collision, CollisionPair, InteractionModel};
use crate::phase::Distribution;
use crate::{Error, Result};

/// Largest grid edge accepted without [`DirectOpts::allow_large`].
pub const DIRECT_GRID_LIMIT: usize = 12;

#[derive(Clone, Debug)]
pub struct DirectOpts {
    /// Accept grids beyond [`DIRECT_GRID_LIMIT`] (cost grows as `n⁶`).
    pub allow_large: bool,
    /// Floor for `|ξ−ξ*|` in the kernel power law; defaults to half the grid
    /// spacing. Only felt for soft interactions (negative velocity exponent).
    pub eps_rel: Option<f64>,
}

impl Default for DirectOpts {
    fn default() -> Self {
        Self {
            allow_large: false,
            eps_rel: None,
        }
    }
}

/// Trilinear interpolation of a grid field at an arbitrary point, zero
/// outside the grid box.
pub(crate) fn trilinear(f: &Distribution, p: [f64; 3]) -> f64 {
    let n = f.grid.n() as i64;
    let h = f.grid.spacing();
    let l = f.grid.half_width();
    let mut base = [0i64; 3];
    let mut frac = [0.0f64; 3];
    for d in 0..3 {
        let x = (p[d] + l) / h;
        let i0 = x.floor();
        base[d] = i0 as i64;
        frac[d] = x - i0;
    }
    let mut acc = 0.0;
    for cx in 0..2i64 {
        let ix = base[0] + cx;
        if ix < 0 || ix >= n {
            continue;
        }
        let wx = if cx == 0 { 1.0 - frac[0] } else { frac[0] };
        for cy in 0..2i64 {
            let iy = base[1] + cy;
            if iy < 0 || iy >= n {
                continue;
            }
            let wy = if cy == 0 { 1.0 - frac[1] } else { frac[1] };
            for cz in 0..2i64 {
                let iz = base[2] + cz;
                if iz < 0 || iz >= n {
                    continue;
                }
                let wz = if cz == 0 { 1.0 - frac[2] } else { frac[2] };
                acc += wx
                    * wy
                    * wz
                    * f.values[f.grid.index(ix as usize, iy as usize, iz as usize)];
            }
        }
    }
    acc
}

/// Direct quadrature of `Q(f,f)` with default options (grids beyond
/// [`DIRECT_GRID_LIMIT`] are refused).
pub fn q_direct(
    f: &Distribution,
    model: &InteractionModel,
    quad: &AngularQuadrature,
) -> Result<Distribution> {
    q_direct_with(f, model, quad, &DirectOpts::default())
}

/// Direct quadrature of `Q(f,f)` with explicit options.
pub fn q_direct_with(
    f: &Distribution,
    model: &InteractionModel,
    quad: &AngularQuadrature,
    opts: &DirectOpts,
) -> Result<Distribution> {
    model.validate()?;
    f.validate()?;
    if quad.is_empty() {
        return Err(Error::InvalidParam("empty angular quadrature".into()));
    }
    let n = f.grid.n();
    if n > DIRECT_GRID_LIMIT && !opts.allow_large {
        return Err(Error::InvalidParam(format!(
            "direct evaluation on a {n}³ grid costs O(n⁶); \
             grids beyond {DIRECT_GRID_LIMIT}³ need DirectOpts::allow_large"
        )));
    }
    let h = f.grid.spacing();
    let eps = opts.eps_rel.unwrap_or(0.5 * h);
    if !(eps > 0.0) {
        return Err(Error::InvalidParam(format!(
            "eps_rel must be positive, got {eps}"
        )));
    }
    let vol = f.grid.cell_volume();
    let gamma = model.gamma;
    let ks = model.kernel_scale;
    let iso_b = if model.angular.is_isotropic() {
        Some(1.0 / (4.0 * std::f64::consts::PI))
    } else {
        None
    };

    let grid = f.grid;
    let nodes: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.node(i)).collect();

    // Each output node is an independent fixed-order sum, so the evaluation
    // is bitwise deterministic for any worker count.
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|ix| {
            let mut plane = vec![0.0; n * n];
            for iy in 0..n {
                for iz in 0..n {
                    let idx = grid.index(ix, iy, iz);
                    let xi = nodes[idx];
                    let f_xi = f.values[idx];
                    let mut acc = 0.0;
                    for (star_idx, xi_star) in nodes.iter().enumerate() {
                        let g = [xi[0] - xi_star[0], xi[1] - xi_star[1], xi[2] - xi_star[2]];
                        let r2 = dot(g, g);
                        if r2 == 0.0 {
                            // Diagonal pair: ξ' = ξ'* = ξ, bracket vanishes.
                            continue;
                        }
                        let r = r2.sqrt();
                        let f_star = f.values[star_idx];
                        let loss = f_star * f_xi;
                        for (sigma, w) in quad.nodes.iter().zip(&quad.weights) {
                            let b = match iso_b {
                                Some(b) => b,
                                None => {
                                    let cos_theta = (dot(*sigma, g) / r).clamp(-1.0, 1.0);
                                    model.angular.eval(cos_theta)
                                }
                            };
                            let kernel = kernel_core(ks, b, r, gamma, eps);
                            let pair = CollisionPair {
                                xi,
                                xi_star: *xi_star,
                                sigma: *sigma,
                            };
                            let (xi_p, xi_star_p) = post_collision(&pair);
                            let gain = trilinear(f, xi_p) * trilinear(f, xi_star_p);
                            acc += w * kernel * (gain - loss);
                        }
                    }
                    plane[iy * n + iz] = vol * acc;
                }
            }
            plane.into_iter()
        })
        .collect();

    Ok(Distribution {
        grid,
        values,
        label: f.label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InteractionModel;
    use crate::phase::{make_grid, states, Distribution, FieldLabel};

    #[test]
    fn trilinear_reproduces_multilinear_functions() {
        let g = make_grid(8, 4.0).unwrap();
        let mut d = Distribution::zeros(g, FieldLabel::F);
        let lin = |v: [f64; 3]| 0.7 + 0.3 * v[0] - 0.2 * v[1] + 0.1 * v[2] + 0.05 * v[0] * v[1]
            - 0.04 * v[1] * v[2]
            + 0.02 * v[0] * v[1] * v[2];
        for i in 0..g.len() {
            d.values[i] = lin(g.node(i));
        }
        for p in [
            [0.25, -0.75, 1.3],
            [-3.9, 2.2, 0.0],
            [0.0, 0.0, 0.0],
            [2.999, 2.999, 2.999],
        ] {
            assert!((trilinear(&d, p) - lin(p)).abs() < 1e-12, "at {p:?}");
        }
    }

    #[test]
    fn trilinear_vanishes_outside_the_box() {
        let g = make_grid(8, 4.0).unwrap();
        let mut d = Distribution::zeros(g, FieldLabel::F);
        d.values.iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(trilinear(&d, [5.0, 0.0, 0.0]), 0.0);
        assert_eq!(trilinear(&d, [0.0, -6.0, 0.0]), 0.0);
        // On the last node the value is reproduced; past it, it fades to zero.
        let edge = trilinear(&d, [3.0, 0.0, 0.0]);
        assert!((edge - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let g = make_grid(6, 3.0).unwrap();
        let f = Distribution::zeros(g, FieldLabel::F);
        let model = InteractionModel::maxwell();
        let quad = AngularQuadrature::product_gauss(2, 4).unwrap();
        let q = q_direct(&f, &model, &quad).unwrap();
        assert_eq!(q.max_norm(), 0.0);
    }

    #[test]
    fn refuses_oversized_grids_without_override() {
        let g = make_grid(14, 6.0).unwrap();
        let f = Distribution::zeros(g, FieldLabel::F);
        let model = InteractionModel::maxwell();
        let quad = AngularQuadrature::product_gauss(2, 4).unwrap();
        assert!(q_direct(&f, &model, &quad).is_err());
    }

    #[test]
    fn output_inherits_reflection_symmetry() {
        // An even compactly supported field must produce an even collision
        // output: the quadrature rule and the pair map are reflection
        // invariant. The support is sized so every contributing term (loss
        // pairs and interpolated gain points alike) stays in the interior,
        // away from the asymmetric −L boundary layer and the interpolation
        // fade zones; symmetry then holds to roundoff.
        let g = make_grid(12, 6.0).unwrap();
        let mut f = Distribution::zeros(g, FieldLabel::F);
        for i in 0..g.len() {
            let v = g.node(i);
            if v.iter().all(|x| x.abs() < 2.0) {
                f.values[i] = v
                    .iter()
                    .map(|x| (std::f64::consts::PI * x / 4.0).cos().powi(2))
                    .product();
            }
        }
        let model = InteractionModel::from_s(9.0).unwrap();
        let quad = AngularQuadrature::product_gauss(2, 4).unwrap();
        let q = q_direct(&f, &model, &quad).unwrap();
        let n = g.n();
        let scale = q.max_norm().max(1e-300);
        for ix in 1..n {
            for iy in 1..n {
                for iz in 1..n {
                    let a = q.values[g.index(ix, iy, iz)];
                    let b = q.values[g.index(n - ix, n - iy, n - iz)];
                    assert!(
                        (a - b).abs() <= 1e-11 * scale,
                        "asymmetry at ({ix},{iy},{iz}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn output_is_linear_in_kernel_scale() {
        let g = make_grid(6, 4.5).unwrap();
        let f = states::two_bump(g, 1.0, [1.5, 0.0, 0.0], 0.6).unwrap();
        let quad = AngularQuadrature::product_gauss(2, 4).unwrap();
        let m1 = InteractionModel::maxwell();
        let m2 = InteractionModel::maxwell().with_kernel_scale(2.0).unwrap();
        let q1 = q_direct(&f, &m1, &quad).unwrap();
        let q2 = q_direct(&f, &m2, &quad).unwrap();
        let scale = q1.max_norm();
        for (a, b) in q1.values.iter().zip(&q2.values) {
            assert!((2.0 * a - b).abs() <= 1e-12 * scale);
        }
    }
}
