//! Property-based tests: structural invariants that must hold for *every*
//! admissible input, checked over randomized samples.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coldtail::collide::{conserve_project, invariant_moments};
use coldtail::model::{
    gamma_from_s, kernel_eval, post_collision, s_from_gamma, CollisionPair, InteractionModel,
};
use coldtail::phase::{
    io, make_grid, maxwellian, moments, states, Distribution, FieldLabel, VelocityGrid,
};

fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n < 1e-3 {
        return None;
    }
    Some([v[0] / n, v[1] / n, v[2] / n])
}

/// A reproducible pseudo-random field: positive, bounded, no structure.
fn random_field(grid: VelocityGrid, seed: u64, label: FieldLabel) -> Distribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| rng.gen_range(0.0..4.0)).collect();
    Distribution::from_values(grid, values, label).unwrap()
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    [-5.0..5.0_f64, -5.0..5.0_f64, -5.0..5.0_f64]
}

proptest! {
    /// Elastic pair geometry: post-collision velocities preserve the pair's
    /// momentum, kinetic energy, and relative speed for any unit deflection.
    #[test]
    fn post_collision_conserves_pair_invariants(
        xi in vec3(),
        xi_star in vec3(),
        raw_sigma in vec3(),
    ) {
        let Some(sigma) = unit(raw_sigma) else { return Ok(()) };
        let pair = CollisionPair::new(xi, xi_star, sigma).unwrap();
        let (p, ps) = post_collision(&pair);

        let scale = 1.0 + xi.iter().chain(&xi_star).fold(0.0_f64, |a, x| a.max(x.abs()));
        for d in 0..3 {
            let before = xi[d] + xi_star[d];
            let after = p[d] + ps[d];
            prop_assert!((before - after).abs() <= 1e-12 * scale,
                "momentum[{d}]: {before} vs {after}");
        }
        let e = |a: [f64; 3], b: [f64; 3]| {
            a.iter().chain(&b).map(|x| x * x).sum::<f64>()
        };
        prop_assert!((e(xi, xi_star) - e(p, ps)).abs() <= 1e-11 * scale * scale);

        let speed = |a: [f64; 3], b: [f64; 3]| {
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        };
        prop_assert!((speed(xi, xi_star) - speed(p, ps)).abs() <= 1e-11 * scale);
    }

    /// The isotropic kernel depends on the relative velocity only through
    /// its magnitude: axis permutations and sign flips leave it unchanged.
    #[test]
    fn kernel_sees_only_the_relative_speed(
        rel in vec3(),
        s in 2.1..40.0_f64,
        flip in [any::<bool>(), any::<bool>(), any::<bool>()],
        rotate in 0usize..3,
    ) {
        let model = InteractionModel::from_s(s).unwrap();
        let mut image = rel;
        for d in 0..3 {
            if flip[d] {
                image[d] = -image[d];
            }
        }
        image.rotate_left(rotate);
        let a = kernel_eval(rel, 0.3, &model, 1e-6).unwrap();
        let b = kernel_eval(image, 0.3, &model, 1e-6).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300),
            "kernel changed under an isometry of rel: {a} vs {b}");
    }

    /// Kernel monotonicity in the relative speed follows the potential:
    /// increasing for hard interactions (s > 5), decreasing for soft ones
    /// (s < 5, above the regularization floor), constant at s = 5.
    #[test]
    fn kernel_monotonicity_matches_potential_hardness(
        speed_lo in 0.01..3.0_f64,
        bump in 0.01..3.0_f64,
        s in prop_oneof![2.2..4.9_f64, Just(5.0), 5.1..40.0_f64],
    ) {
        let model = InteractionModel::from_s(s).unwrap();
        let eps = 1e-3;
        let lo = kernel_eval([speed_lo, 0.0, 0.0], 0.0, &model, eps).unwrap();
        let hi = kernel_eval([speed_lo + bump, 0.0, 0.0], 0.0, &model, eps).unwrap();
        if s > 5.0 {
            prop_assert!(hi >= lo);
        } else if s < 5.0 {
            prop_assert!(hi <= lo);
        } else {
            prop_assert!((hi - lo).abs() <= 1e-12 * lo);
        }
        prop_assert!(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > 0.0);
    }

    /// Scaling the kernel strength scales every kernel value linearly.
    #[test]
    fn kernel_scale_acts_linearly(
        rel in vec3(),
        s in 2.1..40.0_f64,
        scale in 0.01..100.0_f64,
    ) {
        let base = InteractionModel::from_s(s).unwrap();
        let scaled = InteractionModel::from_s(s).unwrap().with_kernel_scale(scale).unwrap();
        let a = kernel_eval(rel, -0.2, &base, 1e-6).unwrap();
        let b = kernel_eval(rel, -0.2, &scaled, 1e-6).unwrap();
        prop_assert!((b - scale * a).abs() <= 1e-12 * (scale * a).abs().max(1e-300));
    }

    /// The exponent maps `s ↔ γ` invert each other across the admissible
    /// range `s > 2 ⇔ γ ∈ (−3, 1)`.
    #[test]
    fn gamma_s_maps_are_inverse(s in 2.001..200.0_f64) {
        let gamma = gamma_from_s(s).unwrap();
        prop_assert!((-3.0..1.0).contains(&gamma));
        let back = s_from_gamma(gamma).unwrap();
        prop_assert!((back - s).abs() <= 1e-9 * s, "s = {s} -> gamma = {gamma} -> {back}");
    }

    /// Grid indexing: `index` and `node` are consistent with the per-axis
    /// coordinates, and every index is in range.
    #[test]
    fn grid_index_and_node_agree(
        half_n in 2usize..16,
        l in 0.5..12.0_f64,
        sel in [0.0..1.0_f64, 0.0..1.0_f64, 0.0..1.0_f64],
    ) {
        let n = 2 * half_n;
        let g = make_grid(n, l).unwrap();
        let ix = ((sel[0] * n as f64) as usize).min(n - 1);
        let iy = ((sel[1] * n as f64) as usize).min(n - 1);
        let iz = ((sel[2] * n as f64) as usize).min(n - 1);
        let idx = g.index(ix, iy, iz);
        prop_assert!(idx < g.len());
        let node = g.node(idx);
        prop_assert_eq!(node, [g.coord(ix), g.coord(iy), g.coord(iz)]);
        // Cell volume × node count covers the full box.
        let vol = g.cell_volume() * g.len() as f64;
        prop_assert!((vol - (2.0 * l).powi(3)).abs() <= 1e-9 * vol);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The velocity moments are linear in the distribution.
    #[test]
    fn moments_are_linear(seed_a in 0u64..1 << 32, seed_b in 0u64..1 << 32, c in -3.0..3.0_f64) {
        let g = make_grid(8, 4.0).unwrap();
        let f = random_field(g, seed_a, FieldLabel::F);
        let h = random_field(g, seed_b.wrapping_add(1), FieldLabel::F);
        let lhs = moments(&f.add_scaled(&h, c).unwrap());
        let mf = moments(&f);
        let mh = moments(&h);
        let scale = mf.energy.abs() + mh.energy.abs() + 1.0;
        prop_assert!((lhs.density - (mf.density + c * mh.density)).abs() <= 1e-12 * scale);
        for d in 0..3 {
            prop_assert!(
                (lhs.momentum[d] - (mf.momentum[d] + c * mh.momentum[d])).abs() <= 1e-12 * scale
            );
        }
        prop_assert!((lhs.energy - (mf.energy + c * mh.energy)).abs() <= 1e-12 * scale);
    }

    /// Conservative projection annihilates the five invariant moments and is
    /// idempotent: projecting a projected field changes nothing.
    #[test]
    fn projection_annihilates_invariants_and_is_idempotent(seed in 0u64..1 << 32) {
        let g = make_grid(8, 4.0).unwrap();
        let q = random_field(g, seed, FieldLabel::F);
        let p = conserve_project(&q);
        let scale = moments(&q).energy.max(1.0);
        for m in invariant_moments(&p) {
            prop_assert!(m.abs() <= 1e-10 * scale, "projected moment {m:e}");
        }
        let pp = conserve_project(&p);
        let drift = pp.add_scaled(&p, -1.0).unwrap().max_norm();
        prop_assert!(drift <= 1e-12 * p.max_norm().max(1e-300), "second projection moved by {drift:e}");
    }

    /// Projection never moves a field farther than the raw defect warrants:
    /// a field that is already conservative is a fixed point.
    #[test]
    fn projection_fixes_conservative_fields(seed in 0u64..1 << 32) {
        let g = make_grid(8, 4.0).unwrap();
        let base = conserve_project(&random_field(g, seed, FieldLabel::F));
        let again = conserve_project(&base);
        let diff = again.add_scaled(&base, -1.0).unwrap().max_norm();
        prop_assert!(diff <= 1e-12 * base.max_norm().max(1e-300));
    }

    /// Quadrature moments of a sampled Maxwellian reproduce its parameters
    /// once the support fits the box.
    #[test]
    fn maxwellian_moments_match_parameters(
        n0 in 0.2..2.0_f64,
        u in [-0.8..0.8_f64, -0.8..0.8_f64, -0.8..0.8_f64],
        t in 0.35..1.0_f64,
    ) {
        let g = make_grid(16, 6.0).unwrap();
        let f = maxwellian(g, n0, u, t).unwrap();
        let m = moments(&f);
        prop_assert!((m.density - n0).abs() <= 1e-3 * n0, "density {} vs {n0}", m.density);
        for d in 0..3 {
            prop_assert!((m.momentum[d] - n0 * u[d]).abs() <= 1e-3 * n0);
        }
        let u2 = u.iter().map(|x| x * x).sum::<f64>();
        let e_exact = n0 * (0.5 * u2 + 1.5 * t);
        prop_assert!((m.energy - e_exact).abs() <= 1e-3 * e_exact);
        prop_assert!((m.temperature - t).abs() <= 5e-3 * t);
    }

    /// The bundled closed-form states stay nonnegative and finite across
    /// their admissible parameter ranges.
    #[test]
    fn bundled_states_are_nonnegative(
        n0 in 0.1..2.0_f64,
        ux in -1.2..1.2_f64,
        t in 0.25..1.0_f64,
        k in 0.6..1.0_f64,
    ) {
        let g = make_grid(12, 5.0).unwrap();
        for f in [
            states::two_bump(g, n0, [ux, 0.0, 0.0], t).unwrap(),
            states::bkw(g, n0, t, k).unwrap(),
        ] {
            prop_assert!(f.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    /// Text export/import round-trips distributions exactly: 17 significant
    /// digits pin every f64 bit pattern.
    #[test]
    fn text_serialization_roundtrips_bitwise(
        half_n in 2usize..5,
        l in 0.5..10.0_f64,
        seed in 0u64..1 << 32,
    ) {
        let g = make_grid(2 * half_n, l).unwrap();
        let f = random_field(g, seed, FieldLabel::ReducedProfile);
        let back = io::import_text(&io::export_text(&f)).unwrap();
        prop_assert_eq!(back.grid.n(), f.grid.n());
        prop_assert_eq!(back.grid.half_width().to_bits(), f.grid.half_width().to_bits());
        prop_assert_eq!(back.label, f.label);
        for (a, b) in back.values.iter().zip(&f.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Malformed text never panics the importer — it errors.
    #[test]
    fn importer_rejects_garbage_without_panicking(text in "\\PC{0,256}") {
        let _ = io::import_text(&text);
    }
}
