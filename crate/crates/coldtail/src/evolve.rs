//! Time and ρ integrators: homogeneous relaxation, reduced-equation
//! marching, the two-time split solver, and the Maxwell nonlinear-eigenvalue
//! search.
//!
//! All marchers share one Runge–Kutta driver ([`step_collision`] exposes the
//! collision-only step), apply [`conserve_project`]
//! (crate::collide::conserve_project) at every stage evaluation, and report
//! blow-ups by recording a halt instead of discarding the trajectory: the
//! last good state is always preserved in the outcome.
//!
//! The reduced equation `u₀λ·[3F + w·∂_wF + β·∂_ρF] = Q[F,F]` is marched
//! constructively in `ρ` as `∂_ρF = [Q/(u₀λ) − 3F − w·∂_wF]/β`; the energy
//! identity `β·dE/dρ = 2E` then serves as the independent consistency check
//! (see [`crate::selfsim::energy_identity_gap`]). The two-time system
//! `∂_tK + ∂_τK = Q[K,K]` is split Strang-style: a half step of upwind
//! advection in `τ`, a full collision step slice by slice, and a second half
//! step of advection. Both halves conserve the collision invariants — the
//! advection up to the declared boundary flux, which is accounted per step.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collide::Collider;
use crate::model::InteractionModel;
use crate::phase::{entropy, moments, Distribution, Moments, VelocityGrid};
use crate::selfsim::{
    stretch_term, ProfileFamily, ReducedProfile, SelfSimilarConfig, SimilarityCase,
};
use crate::{Error, Result};

/// Explicit time-stepping scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    /// Explicit Euler, first order.
    #[serde(alias = "Euler")]
    Euler,
    /// Midpoint rule, second order.
    #[serde(alias = "Rk2", alias = "RK2")]
    Rk2,
    /// Classical four-stage Runge–Kutta, fourth order.
    #[serde(alias = "Rk4", alias = "RK4")]
    Rk4,
}

impl TimeScheme {
    /// Formal convergence order.
    pub fn order(&self) -> usize {
        match self {
            TimeScheme::Euler => 1,
            TimeScheme::Rk2 => 2,
            TimeScheme::Rk4 => 4,
        }
    }
}

/// Step-size and duration control shared by all marchers. For the reduced
/// equation, `dt` and `t_end` are read as `Δρ` and the `ρ`-window length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub scheme: TimeScheme,
    /// Step size (`Δt`, or `Δρ` for the reduced march); must be positive.
    pub dt: f64,
    /// End time; must be a whole number of steps.
    pub t_end: f64,
    /// CFL fraction for the two-time advection (unit speed):
    /// `dt ≤ cfl_advect·tau_spacing` is enforced there. In `(0, 1]`.
    pub cfl_advect: f64,
    /// Record a full-field snapshot every this many steps (0 = none beyond
    /// the implicit initial/final states).
    pub snapshot_every: usize,
}

impl StepControl {
    pub fn new(scheme: TimeScheme, dt: f64, t_end: f64) -> Result<Self> {
        let ctl = Self {
            scheme,
            dt,
            t_end,
            cfl_advect: 1.0,
            snapshot_every: 0,
        };
        ctl.validate()?;
        Ok(ctl)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParam(format!(
                "dt must be finite and > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        if !(self.cfl_advect > 0.0 && self.cfl_advect <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "cfl_advect must lie in (0, 1], got {}",
                self.cfl_advect
            )));
        }
        self.n_steps()?;
        Ok(())
    }

    /// Number of steps; `t_end` must be an integer multiple of `dt`.
    pub fn n_steps(&self) -> Result<usize> {
        let raw = self.t_end / self.dt;
        let steps = raw.round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.abs().max(self.dt) {
            return Err(Error::InvalidParam(format!(
                "t_end = {} is not a whole number of dt = {} steps",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// One Runge–Kutta step of `∂_t f = rhs(f)`.
fn rk_step<R>(f: &Distribution, dt: f64, scheme: TimeScheme, rhs: &mut R) -> Result<Distribution>
where
    R: FnMut(&Distribution) -> Result<Distribution>,
{
    match scheme {
        TimeScheme::Euler => {
            let k1 = rhs(f)?;
            f.add_scaled(&k1, dt)
        }
        TimeScheme::Rk2 => {
            let k1 = rhs(f)?;
            let mid = f.add_scaled(&k1, 0.5 * dt)?;
            let k2 = rhs(&mid)?;
            f.add_scaled(&k2, dt)
        }
        TimeScheme::Rk4 => {
            let k1 = rhs(f)?;
            let s1 = f.add_scaled(&k1, 0.5 * dt)?;
            let k2 = rhs(&s1)?;
            let s2 = f.add_scaled(&k2, 0.5 * dt)?;
            let k3 = rhs(&s2)?;
            let s3 = f.add_scaled(&k3, dt)?;
            let k4 = rhs(&s3)?;
            let mut out = f.add_scaled(&k1, dt / 6.0)?;
            out = out.add_scaled(&k2, dt / 3.0)?;
            out = out.add_scaled(&k3, dt / 3.0)?;
            out.add_scaled(&k4, dt / 6.0)
        }
    }
}

/// One collision step of `∂_t f = Q(f,f)` with the chosen scheme, applying
/// the conservation projection at every stage evaluation.
///
/// This is the single code path used by both [`relax_homogeneous`] and the
/// collision stage of [`solve_two_time`], so a τ-uniform two-time run and a
/// homogeneous run perform bit-identical arithmetic per slice.
pub fn step_collision(
    f: &Distribution,
    dt: f64,
    scheme: TimeScheme,
    model: &InteractionModel,
    collider: &Collider,
) -> Result<Distribution> {
    let mut rhs = |g: &Distribution| collider.eval_projected(g, model);
    rk_step(f, dt, scheme, &mut rhs)
}

/// Why and where a run stopped early.
#[derive(Clone, Debug)]
pub struct HaltInfo {
    /// Step at which the failure was detected (the state at `step − 1` is
    /// the last good one).
    pub step: usize,
    pub t: f64,
    pub reason: String,
}

/// Scalar diagnostics recorded at every step of a relaxation run.
#[derive(Clone, Copy, Debug)]
pub struct TrajectorySample {
    pub step: usize,
    pub t: f64,
    pub moments: Moments,
    /// Boltzmann H functional `h³·Σ f ln f`.
    pub entropy: f64,
    /// `‖f(t) − f(0)‖∞`.
    pub linf_drift: f64,
}

/// Result of [`relax_homogeneous`].
#[derive(Clone, Debug)]
pub struct RelaxOutcome {
    /// One row per completed step, including the initial state.
    pub samples: Vec<TrajectorySample>,
    /// `(t, state)` pairs recorded every `snapshot_every` steps.
    pub snapshots: Vec<(f64, Distribution)>,
    /// The last good state.
    pub final_state: Distribution,
    /// Set when the run stopped before `t_end`.
    pub halted: Option<HaltInfo>,
}

/// Integrate the homogeneous relaxation `∂_t f = Q(f,f)` from a physical
/// initial state, recording moments, entropy, and the L∞ drift from the
/// initial state at every step.
///
/// Blow-ups (non-finite states or evaluator failures) stop the run and are
/// reported through `halted`, with the last good state preserved.
pub fn relax_homogeneous(
    f0: &Distribution,
    ctl: &StepControl,
    model: &InteractionModel,
    collider: &Collider,
) -> Result<RelaxOutcome> {
    ctl.validate()?;
    f0.validate()?;
    let steps = ctl.n_steps()?;
    let mut f = f0.clone();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut snapshots = Vec::new();
    let mut halted = None;
    let sample = |step: usize, t: f64, f: &Distribution, f0: &Distribution| {
        let drift = f
            .add_scaled(f0, -1.0)
            .map(|d| d.max_norm())
            .unwrap_or(f64::NAN);
        TrajectorySample {
            step,
            t,
            moments: moments(f),
            entropy: entropy(f),
            linf_drift: drift,
        }
    };
    samples.push(sample(0, 0.0, &f, f0));
    if ctl.snapshot_every > 0 {
        snapshots.push((0.0, f.clone()));
    }
    for step in 1..=steps {
        let t = step as f64 * ctl.dt;
        match step_collision(&f, ctl.dt, ctl.scheme, model, collider) {
            Ok(next) if next.is_finite() => f = next,
            Ok(_) => {
                halted = Some(HaltInfo {
                    step,
                    t,
                    reason: "state became non-finite".to_owned(),
                });
                break;
            }
            Err(e) => {
                halted = Some(HaltInfo {
                    step,
                    t,
                    reason: e.to_string(),
                });
                break;
            }
        }
        samples.push(sample(step, t, &f, f0));
        if ctl.snapshot_every > 0 && step % ctl.snapshot_every == 0 {
            snapshots.push((t, f.clone()));
        }
    }
    Ok(RelaxOutcome {
        samples,
        snapshots,
        final_state: f,
        halted,
    })
}

/// Result of [`march_reduced`].
#[derive(Clone, Debug)]
pub struct MarchOutcome {
    /// The trajectory, one profile per step including the start, with
    /// `rho = k·Δρ`.
    pub profiles: Vec<ReducedProfile>,
    /// Soft diagnostics: negativity beyond the validation tolerance, or
    /// support reaching the grid boundary. Each condition is reported once.
    pub warnings: Vec<String>,
    pub halted: Option<HaltInfo>,
}

/// Negativity threshold (relative to the profile peak) for the march
/// warning. Spectral truncation alone deposits signed dust of order
/// `Δρ·e^{−k_max²T/2}` on the far tail of every marched profile, so the
/// warning is reserved for undershoot far above that floor.
const MARCH_NEGATIVITY_TOL: f64 = 1e-5;

/// March the reduced similarity equation in `ρ`:
/// `∂_ρF = [Q(F,F)/(u₀λ) − 3F − w·∂_wF]/β` from the profile `f0` at `ρ = 0`,
/// with the collision term conservation-projected at every stage.
///
/// The trajectory's discrete energies then satisfy `β·dE/dρ = 2E` up to the
/// scheme's truncation order — the identity that replaces the single-variable
/// contradiction.
pub fn march_reduced(
    f0: &Distribution,
    cfg: &SelfSimilarConfig,
    ctl: &StepControl,
    model: &InteractionModel,
    collider: &Collider,
) -> Result<MarchOutcome> {
    cfg.validate()?;
    ctl.validate()?;
    if !f0.is_finite() {
        return Err(Error::Numerical(
            "march_reduced initial profile contains non-finite values".to_owned(),
        ));
    }
    let steps = ctl.n_steps()?;
    let u0_lambda = cfg.u0 * cfg.lambda;
    let beta = cfg.beta;
    let mut rhs = |g: &Distribution| -> Result<Distribution> {
        let q = collider.eval_projected(g, model)?;
        let s = stretch_term(g)?;
        let values = g
            .values
            .iter()
            .zip(&s.values)
            .zip(&q.values)
            .map(|((f, s), q)| (q / u0_lambda - 3.0 * f - s) / beta)
            .collect();
        Distribution::from_values(g.grid, values, g.label)
    };

    let mut f = f0.clone();
    let mut profiles = Vec::with_capacity(steps + 1);
    profiles.push(ReducedProfile::new(f.clone(), 0.0)?);
    let mut warnings = Vec::new();
    let mut warned_negative = false;
    let mut warned_boundary = false;
    let mut halted = None;
    for step in 1..=steps {
        let rho = step as f64 * ctl.dt;
        match rk_step(&f, ctl.dt, ctl.scheme, &mut rhs) {
            Ok(next) if next.is_finite() => f = next,
            Ok(_) => {
                halted = Some(HaltInfo {
                    step,
                    t: rho,
                    reason: "profile became non-finite".to_owned(),
                });
                break;
            }
            Err(e) => {
                halted = Some(HaltInfo {
                    step,
                    t: rho,
                    reason: e.to_string(),
                });
                break;
            }
        }
        let undershoot = f.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if !warned_negative && undershoot < -MARCH_NEGATIVITY_TOL * f.max_norm() {
            warned_negative = true;
            warnings.push(format!(
                "profile developed negativity beyond tolerance at rho = {rho} \
                 (min {undershoot:.3e})"
            ));
        }
        if !warned_boundary && f.boundary_mass_fraction() > 1e-3 {
            warned_boundary = true;
            warnings.push(format!(
                "profile support reaches the grid boundary at rho = {rho}"
            ));
        }
        profiles.push(ReducedProfile::new(f.clone(), rho)?);
    }
    Ok(MarchOutcome {
        profiles,
        warnings,
        halted,
    })
}

/// Upstream-boundary closure of the two-time τ-window.
#[derive(Clone, Debug)]
pub enum InflowRule {
    /// Nothing flows in.
    Zero,
    /// A fixed slice flows in (by default the initial first slice).
    Frozen(Distribution),
    /// The last slice wraps around.
    Periodic,
}

/// State of the two-time system: slices `K(t, τ_j, ·)` at `τ_j = j·Δτ`, all
/// on one velocity grid, plus the inflow closure at the upstream `τ` edge.
#[derive(Clone, Debug)]
pub struct TwoTimeState {
    pub tau_spacing: f64,
    pub slices: Vec<Distribution>,
    pub boundary: InflowRule,
    pub t: f64,
}

impl TwoTimeState {
    /// Build a state from slices; the boundary defaults to the first slice,
    /// frozen.
    pub fn new(slices: Vec<Distribution>, tau_spacing: f64) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidParam("two-time state needs >= 1 slice".to_owned()));
        }
        if !(tau_spacing.is_finite() && tau_spacing > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau_spacing must be finite and > 0, got {tau_spacing}"
            )));
        }
        let grid = slices[0].grid;
        for s in &slices {
            if s.grid != grid {
                return Err(Error::InvalidParam(
                    "all two-time slices must share one grid".to_owned(),
                ));
            }
            if !s.is_finite() {
                return Err(Error::Numerical(
                    "two-time slice contains non-finite values".to_owned(),
                ));
            }
        }
        let boundary = InflowRule::Frozen(slices[0].clone());
        Ok(Self {
            tau_spacing,
            slices,
            boundary,
            t: 0.0,
        })
    }

    /// Replace the inflow rule.
    pub fn with_boundary(mut self, rule: InflowRule) -> Result<Self> {
        if let InflowRule::Frozen(d) = &rule {
            if d.grid != self.grid() {
                return Err(Error::InvalidParam(
                    "frozen inflow slice must live on the state grid".to_owned(),
                ));
            }
            if !d.is_finite() {
                return Err(Error::Numerical(
                    "frozen inflow slice contains non-finite values".to_owned(),
                ));
            }
        }
        self.boundary = rule;
        Ok(self)
    }

    pub fn tau_cells(&self) -> usize {
        self.slices.len()
    }

    pub fn grid(&self) -> VelocityGrid {
        self.slices[0].grid
    }

    /// Total mass `Δτ·Σ_j h³·Σ K_j`.
    pub fn total_mass(&self) -> f64 {
        self.tau_spacing
            * self
                .slices
                .iter()
                .map(|s| moments(s).density)
                .sum::<f64>()
    }
}

/// Per-step mass accounting of the two-time solver: the change in total mass
/// must equal inflow minus outflow through the τ-window edges.
#[derive(Clone, Copy, Debug)]
pub struct MassBalanceRow {
    pub step: usize,
    pub t: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    pub influx: f64,
    pub outflux: f64,
    /// `(mass_after − mass_before) − (influx − outflux)`; roundoff-level for
    /// a correct step.
    pub defect: f64,
}

/// Result of [`solve_two_time`].
#[derive(Clone, Debug)]
pub struct TwoTimeOutcome {
    /// Full-state snapshots every `snapshot_every` steps (incl. the start).
    pub snapshots: Vec<TwoTimeState>,
    pub final_state: TwoTimeState,
    pub balance: Vec<MassBalanceRow>,
    pub halted: Option<HaltInfo>,
}

/// Advance all slices by a half advection step (upwind, unit speed in τ):
/// `K_j ← (1−ν)K_j + ν·K_{j−1}` with `ν = dt/(2Δτ)`, the `j = 0` neighbor
/// supplied by the inflow rule. Returns the boundary mass fluxes
/// `(in, out) = Δτ·ν·(mass(ghost), mass(K_last))`.
fn advect_half(state: &mut TwoTimeState, nu: f64) -> Result<(f64, f64)> {
    let ghost: Option<&Distribution> = match &state.boundary {
        InflowRule::Zero => None,
        InflowRule::Frozen(d) => Some(d),
        InflowRule::Periodic => state.slices.last(),
    };
    let m_in = ghost.map(|g| moments(g).density).unwrap_or(0.0);
    let m_out = moments(state.slices.last().expect("nonempty")).density;
    let mut next = Vec::with_capacity(state.slices.len());
    for (j, cur) in state.slices.iter().enumerate() {
        let upstream = if j == 0 { ghost } else { Some(&state.slices[j - 1]) };
        let new = match upstream {
            Some(prev) => {
                // cur + ν·(prev − cur); exact identity when prev == cur.
                let diff = prev.add_scaled(cur, -1.0)?;
                cur.add_scaled(&diff, nu)?
            }
            None => {
                // Zero inflow: (1−ν)·cur.
                let diff = Distribution::zeros(cur.grid, cur.label).add_scaled(cur, -1.0)?;
                cur.add_scaled(&diff, nu)?
            }
        };
        next.push(new);
    }
    state.slices = next;
    Ok((
        state.tau_spacing * nu * m_in,
        state.tau_spacing * nu * m_out,
    ))
}

/// Integrate the two-time system `∂_tK + ∂_τK = Q(K,K)` by Strang splitting:
/// half-step upwind advection in τ, a full collision step per slice (in
/// parallel — slices are independent within the stage), half-step advection.
///
/// Maxwell interactions (`γ = 0`) only, matching the regime in which the
/// two-time reduction is posed. The advection CFL `dt ≤ cfl_advect·Δτ` is a
/// configuration error when violated. Mass enters and leaves only through
/// the τ-window edges; the per-step balance is recorded in the outcome.
pub fn solve_two_time(
    state0: &TwoTimeState,
    ctl: &StepControl,
    model: &InteractionModel,
    collider: &Collider,
) -> Result<TwoTimeOutcome> {
    ctl.validate()?;
    if model.gamma != 0.0 {
        return Err(Error::InvalidParam(format!(
            "the two-time system is posed for Maxwell interactions (gamma = 0), \
             got gamma = {}",
            model.gamma
        )));
    }
    if ctl.dt > ctl.cfl_advect * state0.tau_spacing {
        return Err(Error::InvalidParam(format!(
            "advection CFL violated: dt = {} exceeds cfl_advect*tau_spacing = {}",
            ctl.dt,
            ctl.cfl_advect * state0.tau_spacing
        )));
    }
    let steps = ctl.n_steps()?;
    let nu = 0.5 * ctl.dt / state0.tau_spacing;
    let mut state = state0.clone();
    let mut snapshots = Vec::new();
    let mut balance = Vec::with_capacity(steps);
    let mut halted = None;
    if ctl.snapshot_every > 0 {
        snapshots.push(state.clone());
    }
    'steps: for step in 1..=steps {
        let t = step as f64 * ctl.dt;
        let mass_before = state.total_mass();
        let mut work = state.clone();
        let mut influx = 0.0;
        let mut outflux = 0.0;

        match advect_half(&mut work, nu) {
            Ok((fin, fout)) => {
                influx += fin;
                outflux += fout;
            }
            Err(e) => {
                halted = Some(HaltInfo { step, t, reason: e.to_string() });
                break 'steps;
            }
        }
        let collided: Result<Vec<Distribution>> = work
            .slices
            .par_iter()
            .map(|s| step_collision(s, ctl.dt, ctl.scheme, model, collider))
            .collect();
        match collided {
            Ok(slices) if slices.iter().all(|s| s.is_finite()) => work.slices = slices,
            Ok(_) => {
                halted = Some(HaltInfo {
                    step,
                    t,
                    reason: "a slice became non-finite".to_owned(),
                });
                break 'steps;
            }
            Err(e) => {
                halted = Some(HaltInfo { step, t, reason: e.to_string() });
                break 'steps;
            }
        }
        match advect_half(&mut work, nu) {
            Ok((fin, fout)) => {
                influx += fin;
                outflux += fout;
            }
            Err(e) => {
                halted = Some(HaltInfo { step, t, reason: e.to_string() });
                break 'steps;
            }
        }

        work.t = t;
        state = work;
        let mass_after = state.total_mass();
        balance.push(MassBalanceRow {
            step,
            t,
            mass_before,
            mass_after,
            influx,
            outflux,
            defect: (mass_after - mass_before) - (influx - outflux),
        });
        if ctl.snapshot_every > 0 && step % ctl.snapshot_every == 0 {
            snapshots.push(state.clone());
        }
    }
    Ok(TwoTimeOutcome {
        snapshots,
        final_state: state,
        balance,
        halted,
    })
}

/// Residual of the two-time similarity form, `λu₀·[3H + w̄·∂_w̄H + β·∂_ρ̄H]
/// − Q[H,H]`, evaluated slice-wise on a ρ̄-uniform family with centered
/// differences for `∂_ρ̄H`; returns the worst interior-slice L² norm.
///
/// The two-time reduction produces exactly the reduced similarity equation,
/// so this value must agree with the norm of
/// [`crate::selfsim::reduced_residual`] on the same data to roundoff — the
/// two functions share the formula but not the code path.
pub fn correspondence_residual(
    family: &ProfileFamily,
    cfg: &SelfSimilarConfig,
    model: &InteractionModel,
    collider: &Collider,
) -> Result<f64> {
    cfg.validate()?;
    if cfg.case != SimilarityCase::Maxwell {
        return Err(Error::InvalidParam(format!(
            "the two-time correspondence is posed in the Maxwell case, got {}",
            cfg.case
        )));
    }
    let profiles = family.profiles();
    if profiles.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "correspondence residual needs >= 3 slices, got {}",
            profiles.len()
        )));
    }
    let d0 = profiles[1].rho - profiles[0].rho;
    for pair in profiles.windows(2) {
        let d = pair[1].rho - pair[0].rho;
        if (d - d0).abs() > 1e-9 * d0.abs().max(1.0) {
            return Err(Error::InvalidParam(format!(
                "correspondence residual needs uniform rho spacing, got {d0} and {d}"
            )));
        }
    }
    let u0_lambda = cfg.u0 * cfg.lambda;
    let mut worst = 0.0_f64;
    for k in 1..profiles.len() - 1 {
        let f = &profiles[k].f;
        let s = stretch_term(f)?;
        let q = collider.eval(f, model)?;
        let prev = &profiles[k - 1].f;
        let next = &profiles[k + 1].f;
        let values: Vec<f64> = f
            .values
            .iter()
            .zip(&s.values)
            .zip(next.values.iter().zip(&prev.values))
            .zip(&q.values)
            .map(|(((f, s), (a, b)), q)| {
                let d = (a - b) / (2.0 * d0);
                u0_lambda * (3.0 * f + s + cfg.beta * d) - q
            })
            .collect();
        let r = Distribution::from_values(f.grid, values, f.label)?;
        worst = worst.max(r.l2_norm());
    }
    Ok(worst)
}

/// Options of [`eigen_search_maxwell`].
#[derive(Clone, Copy, Debug)]
pub struct EigenOpts {
    /// Number of λ samples across the bracket (≥ 2).
    pub samples: usize,
    /// ρ step of each trial march.
    pub drho: f64,
    /// Steps per trial march; the growth rate is fitted over the last third.
    pub steps: usize,
    pub scheme: TimeScheme,
    /// Bisection stops when the λ-interval is narrower than this.
    pub bisect_tol: f64,
    pub max_bisect: usize,
}

impl Default for EigenOpts {
    fn default() -> Self {
        Self {
            samples: 9,
            drho: 0.05,
            steps: 60,
            scheme: TimeScheme::Rk2,
            bisect_tol: 1e-4,
            max_bisect: 60,
        }
    }
}

/// One evaluation of the shooting functional.
#[derive(Clone, Copy, Debug)]
pub struct GSample {
    pub lambda: f64,
    /// Mass log-growth rate; NaN when the march failed at this λ.
    pub g: f64,
}

/// A root of the shooting functional.
#[derive(Clone, Debug)]
pub struct EigenRoot {
    pub lambda_star: f64,
    /// `g(λ*)` on re-evaluation.
    pub g: f64,
    /// Worst-slice similarity residual of the root's trajectory.
    pub residual: f64,
    /// The trajectory marched at `λ*`.
    pub family: ProfileFamily,
}

/// Result of [`eigen_search_maxwell`]. `roots` may be empty — "no nonlinear
/// eigenvalue in the bracket" is a finding, not an error.
#[derive(Clone, Debug)]
pub struct EigenReport {
    pub bracket: (f64, f64),
    pub samples: Vec<GSample>,
    pub roots: Vec<EigenRoot>,
    pub warnings: Vec<String>,
}

/// The eigen-search shooting functional: march the Maxwell-case reduced
/// equation from the mass-normalized seed and return the asymptotic
/// ρ-growth rate of mass (least-squares slope of `ln M` over the last third
/// of the window).
///
/// Under the exact reduced flow the mass rate is 0 for every λ (the energy
/// rate is pinned to `2/β` instead), so a self-selected λ shows up as a zero
/// of this functional that is stable under refinement; the equation enters
/// only through the product `λu₀` against `Q`, so `g` is exactly invariant
/// under `λ → cλ` with `kernel_scale → c·kernel_scale`.
pub fn eigen_growth_rate(
    seed: &Distribution,
    lambda: f64,
    beta: f64,
    u0: f64,
    model: &InteractionModel,
    collider: &Collider,
    opts: &EigenOpts,
) -> Result<f64> {
    let cfg = SelfSimilarConfig::maxwell(lambda, beta, u0)?;
    let ctl = StepControl {
        scheme: opts.scheme,
        dt: opts.drho,
        t_end: opts.drho * opts.steps as f64,
        cfl_advect: 1.0,
        snapshot_every: 0,
    };
    let out = march_reduced(seed, &cfg, &ctl, model, collider)?;
    if let Some(h) = out.halted {
        return Err(Error::Numerical(format!(
            "trial march at lambda = {lambda} halted at step {}: {}",
            h.step, h.reason
        )));
    }
    let masses: Vec<(f64, f64)> = out
        .profiles
        .iter()
        .map(|p| (p.rho, moments(&p.f).density))
        .collect();
    if masses.iter().any(|&(_, m)| !(m.is_finite() && m > 0.0)) {
        return Err(Error::Numerical(format!(
            "trial march at lambda = {lambda} lost mass positivity"
        )));
    }
    let tail_start = masses.len().saturating_sub((masses.len() / 3).max(2));
    let tail = &masses[tail_start..];
    // Least-squares slope of ln m against rho.
    let n = tail.len() as f64;
    let mean_x = tail.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let mean_y = tail.iter().map(|&(_, m)| m.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, m) in tail {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (m.ln() - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::Numerical("degenerate growth-rate window".to_owned()));
    }
    Ok(sxy / sxx)
}

/// Bracketed sign changes among consecutive finite samples, plus exact
/// zeros. Returns `(lo, hi)` intervals to bisect; an exact zero is returned
/// as a degenerate interval.
fn bracket_sign_changes(samples: &[GSample]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for pair in samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !a.g.is_finite() || !b.g.is_finite() {
            continue;
        }
        if a.g == 0.0 {
            out.push((a.lambda, a.lambda));
        } else if a.g * b.g < 0.0 {
            out.push((a.lambda, b.lambda));
        }
    }
    if let Some(last) = samples.last() {
        if last.g == 0.0 {
            out.push((last.lambda, last.lambda));
        }
    }
    out
}

/// Scan the λ-bracket for zeros of the mass-growth shooting functional
/// (Maxwell interactions only): sample `g` on a uniform grid, bisect each
/// sign change, and return every root with its trajectory and similarity
/// residual. An empty `roots` list means no eigenvalue was found in the
/// bracket — an admissible outcome. λ-points where the march fails are
/// recorded as NaN samples with a warning and excluded from bracketing.
#[allow(clippy::too_many_arguments)]
pub fn eigen_search_maxwell(
    seed: &Distribution,
    beta: f64,
    u0: f64,
    model: &InteractionModel,
    collider: &Collider,
    bracket: (f64, f64),
    opts: &EigenOpts,
) -> Result<EigenReport> {
    if model.gamma != 0.0 {
        return Err(Error::InvalidParam(format!(
            "the eigenvalue search is posed for Maxwell interactions (gamma = 0), \
             got gamma = {}",
            model.gamma
        )));
    }
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParam(format!(
            "lambda bracket must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidParam(format!(
            "need >= 2 bracket samples, got {}",
            opts.samples
        )));
    }
    let m0 = moments(seed).density;
    if !(m0.is_finite() && m0 > 0.0) {
        return Err(Error::InvalidParam(format!(
            "seed must carry positive mass, got {m0}"
        )));
    }
    let norm_values: Vec<f64> = seed.values.iter().map(|v| v / m0).collect();
    let seed = Distribution::from_values(seed.grid, norm_values, seed.label)?;

    let mut warnings = Vec::new();
    let g_of = |lambda: f64, warnings: &mut Vec<String>| -> f64 {
        match eigen_growth_rate(&seed, lambda, beta, u0, model, collider, opts) {
            Ok(g) => g,
            Err(e) => {
                warnings.push(format!("g(lambda = {lambda}) aborted: {e}"));
                f64::NAN
            }
        }
    };

    let mut samples = Vec::with_capacity(opts.samples);
    for i in 0..opts.samples {
        let lambda = lo + (hi - lo) * i as f64 / (opts.samples - 1) as f64;
        let g = g_of(lambda, &mut warnings);
        samples.push(GSample { lambda, g });
    }

    let mut roots = Vec::new();
    for (mut a, mut b) in bracket_sign_changes(&samples) {
        if a < b {
            let mut ga = g_of(a, &mut warnings);
            for _ in 0..opts.max_bisect {
                if b - a <= opts.bisect_tol {
                    break;
                }
                let mid = 0.5 * (a + b);
                let gm = g_of(mid, &mut warnings);
                if !gm.is_finite() {
                    break;
                }
                if gm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if ga * gm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ga = gm;
                }
            }
        }
        let lambda_star = 0.5 * (a + b);
        let g = g_of(lambda_star, &mut warnings);
        let cfg = SelfSimilarConfig::maxwell(lambda_star, beta, u0)?;
        let ctl = StepControl {
            scheme: opts.scheme,
            dt: opts.drho,
            t_end: opts.drho * opts.steps as f64,
            cfl_advect: 1.0,
            snapshot_every: 0,
        };
        let out = march_reduced(&seed, &cfg, &ctl, model, collider)?;
        let family = ProfileFamily::new(out.profiles)?;
        let residual = correspondence_residual(&family, &cfg, model, collider)?;
        roots.push(EigenRoot {
            lambda_star,
            g,
            residual,
            family,
        });
    }
    Ok(EigenReport {
        bracket,
        samples,
        roots,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collide::SpectralParams;
    use crate::phase::{make_grid, maxwellian, states, FieldLabel};
    use crate::selfsim::{energy_identity_gap, reduced_residual};

    fn coarse_collider() -> Collider {
        Collider::Spectral(SpectralParams::coarse())
    }

    #[test]
    fn step_control_validates_and_counts_steps() {
        let ctl = StepControl::new(TimeScheme::Rk2, 0.1, 1.0).unwrap();
        assert_eq!(ctl.n_steps().unwrap(), 10);
        assert!(StepControl::new(TimeScheme::Rk2, 0.0, 1.0).is_err());
        assert!(StepControl::new(TimeScheme::Rk2, -0.1, 1.0).is_err());
        assert!(StepControl::new(TimeScheme::Rk2, 0.3, 1.0).is_err());
        let zero = StepControl::new(TimeScheme::Euler, 0.1, 0.0).unwrap();
        assert_eq!(zero.n_steps().unwrap(), 0);
    }

    #[test]
    fn maxwellian_is_a_fixed_point_with_exact_invariants() {
        let g = make_grid(16, 4.5).unwrap();
        let f0 = maxwellian(g, 1.0, [0.2, 0.0, 0.0], 0.8).unwrap();
        let ctl = StepControl::new(TimeScheme::Rk2, 0.05, 0.5).unwrap();
        let model = InteractionModel::maxwell();
        let out = relax_homogeneous(&f0, &ctl, &model, &coarse_collider()).unwrap();
        assert!(out.halted.is_none());
        assert_eq!(out.samples.len(), 11);
        let m0 = out.samples[0].moments;
        for s in &out.samples {
            // Projection keeps the invariants exact up to the additive
            // roundoff of the state update itself.
            assert!((s.moments.density - m0.density).abs() <= 1e-12 * m0.density);
            assert!((s.moments.energy - m0.energy).abs() <= 1e-12 * m0.energy);
            for d in 0..3 {
                assert!((s.moments.momentum[d] - m0.momentum[d]).abs() <= 1e-12);
            }
        }
        // Equilibrium: drift stays at the discrete-residual level.
        let drift = out.samples.last().unwrap().linf_drift;
        assert!(drift <= 5e-3, "equilibrium drift {drift}");
        // H-theorem diagnostic at the fixed point.
        for pair in out.samples.windows(2) {
            assert!(
                pair[1].entropy - pair[0].entropy <= 1e-10,
                "entropy rose: {} -> {}",
                pair[0].entropy,
                pair[1].entropy
            );
        }
    }

    #[test]
    fn entropy_decreases_from_a_nonequilibrium_state() {
        let g = make_grid(16, 4.5).unwrap();
        let f0 = states::two_bump(g, 1.0, [1.1, 0.0, 0.0], 0.35).unwrap();
        let ctl = StepControl::new(TimeScheme::Rk2, 0.05, 1.0).unwrap();
        let model = InteractionModel::maxwell();
        let out = relax_homogeneous(&f0, &ctl, &model, &coarse_collider()).unwrap();
        assert!(out.halted.is_none());
        for pair in out.samples.windows(2) {
            assert!(pair[1].entropy - pair[0].entropy <= 1e-10);
        }
        // And it strictly decreased overall.
        let first = out.samples.first().unwrap().entropy;
        let last = out.samples.last().unwrap().entropy;
        assert!(last < first - 1e-3, "entropy {first} -> {last}");
    }

    #[test]
    fn rk_schemes_show_their_advertised_order() {
        // Self-convergence against a fine RK4 reference on a fixed spatial
        // discretization isolates the temporal error.
        let g = make_grid(16, 4.5).unwrap();
        let f0 = states::bkw(g, 1.0, 1.0, 0.65).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let t_end = 0.32;
        let reference = {
            let ctl = StepControl::new(TimeScheme::Rk4, 0.002, t_end).unwrap();
            relax_homogeneous(&f0, &ctl, &model, &collider)
                .unwrap()
                .final_state
        };
        let dts = [0.32, 0.16, 0.08, 0.04, 0.032];
        for (scheme, order) in [
            (TimeScheme::Euler, 1.0_f64),
            (TimeScheme::Rk2, 2.0),
            (TimeScheme::Rk4, 4.0),
        ] {
            let mut pts = Vec::new();
            for &dt in &dts {
                let ctl = StepControl::new(scheme, dt, t_end).unwrap();
                let out = relax_homogeneous(&f0, &ctl, &model, &collider).unwrap();
                assert!(out.halted.is_none());
                let err = out
                    .final_state
                    .add_scaled(&reference, -1.0)
                    .unwrap()
                    .l2_norm();
                pts.push((dt.ln(), err.ln()));
            }
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let slope = sxy / sxx;
            assert!(
                (slope - order).abs() <= 0.15 * order,
                "{scheme:?}: measured order {slope}, expected {order}"
            );
        }
    }

    #[test]
    fn march_of_zero_profile_stays_zero() {
        let g = make_grid(12, 4.0).unwrap();
        let f0 = Distribution::zeros(g, FieldLabel::ReducedProfile);
        let cfg = SelfSimilarConfig::hard(0.5, 1.0, 1.0).unwrap();
        let ctl = StepControl::new(TimeScheme::Rk2, 0.05, 0.25).unwrap();
        let model = InteractionModel::from_s(9.0).unwrap();
        let out = march_reduced(&f0, &cfg, &ctl, &model, &coarse_collider()).unwrap();
        assert!(out.halted.is_none());
        assert_eq!(out.profiles.len(), 6);
        for p in &out.profiles {
            assert_eq!(p.f.max_norm(), 0.0);
        }
    }

    #[test]
    fn marched_energy_satisfies_the_identity_at_second_order() {
        // The window must stay short and the box generous: energy grows like
        // e^{2rho/beta} along the march, and a tail that reaches the boundary
        // puts a spatial floor under the identity gap.
        let g = make_grid(24, 6.0).unwrap();
        let f0 = maxwellian(g, 1.0, [0.0; 3], 0.6).unwrap();
        let cfg = SelfSimilarConfig::hard(0.5, 1.0, 1.0).unwrap();
        let model = InteractionModel::from_s(9.0).unwrap();
        let collider = coarse_collider();
        let mut rel_gaps = Vec::new();
        for drho in [0.04, 0.02] {
            let ctl = StepControl::new(TimeScheme::Rk2, drho, 0.16).unwrap();
            let out = march_reduced(&f0, &cfg, &ctl, &model, &collider).unwrap();
            assert!(out.halted.is_none(), "halted: {:?}", out.halted);
            assert!(out.warnings.is_empty(), "warnings: {:?}", out.warnings);
            let gaps = energy_identity_gap(&out.profiles, cfg.beta).unwrap();
            let worst = gaps
                .iter()
                .zip(out.profiles.iter().skip(1))
                .map(|(gap, p)| gap.abs() / p.energy())
                .fold(0.0_f64, f64::max);
            rel_gaps.push(worst);
        }
        assert!(rel_gaps[0] <= 5e-3, "identity gaps {rel_gaps:?}");
        let ratio = rel_gaps[0] / rel_gaps[1];
        assert!(
            (2.5..6.0).contains(&ratio),
            "expected ~4x second-order shrink, got {rel_gaps:?}"
        );
    }

    #[test]
    fn march_respects_beta_covariance() {
        // rho -> rho/beta is an exact symmetry: marching with 2*beta at
        // 2*drho visits the same profiles.
        let g = make_grid(12, 4.0).unwrap();
        let f0 = maxwellian(g, 1.0, [0.0; 3], 0.7).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let cfg1 = SelfSimilarConfig::maxwell(0.9, 1.0, 1.0).unwrap();
        let cfg2 = SelfSimilarConfig::maxwell(0.9, 2.0, 1.0).unwrap();
        let ctl1 = StepControl::new(TimeScheme::Rk2, 0.05, 0.25).unwrap();
        let ctl2 = StepControl::new(TimeScheme::Rk2, 0.10, 0.50).unwrap();
        let out1 = march_reduced(&f0, &cfg1, &ctl1, &model, &collider).unwrap();
        let out2 = march_reduced(&f0, &cfg2, &ctl2, &model, &collider).unwrap();
        assert_eq!(out1.profiles.len(), out2.profiles.len());
        for (p, q) in out1.profiles.iter().zip(&out2.profiles) {
            // Identical step arithmetic: dt/beta is the only combination the
            // rhs sees, and it matches exactly.
            for (a, b) in p.f.values.iter().zip(&q.f.values) {
                assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn two_time_uniform_slices_match_homogeneous_bitwise() {
        let g = make_grid(12, 4.0).unwrap();
        let f0 = states::two_bump(g, 1.0, [0.9, 0.0, 0.0], 0.3).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let slices = vec![f0.clone(); 4];
        let state = TwoTimeState::new(slices, 0.5)
            .unwrap()
            .with_boundary(InflowRule::Periodic)
            .unwrap();
        let ctl = StepControl::new(TimeScheme::Rk2, 0.05, 0.5).unwrap();
        let two = solve_two_time(&state, &ctl, &model, &collider).unwrap();
        assert!(two.halted.is_none());
        let homog = relax_homogeneous(&f0, &ctl, &model, &collider).unwrap();
        for slice in &two.final_state.slices {
            assert_eq!(
                slice.values, homog.final_state.values,
                "uniform two-time slice diverged from the homogeneous run"
            );
        }
        // Advection is the exact identity here, so mass is exactly balanced.
        for row in &two.balance {
            assert!(row.defect.abs() <= 1e-10, "balance defect {}", row.defect);
        }
    }

    #[test]
    fn two_time_mass_balance_closes_with_nonuniform_slices() {
        let g = make_grid(12, 4.0).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let slices = vec![
            maxwellian(g, 1.0, [0.0; 3], 0.6).unwrap(),
            maxwellian(g, 1.5, [0.2, 0.0, 0.0], 0.7).unwrap(),
            maxwellian(g, 0.7, [0.0, -0.2, 0.0], 0.5).unwrap(),
        ];
        for rule in [InflowRule::Zero, InflowRule::Periodic] {
            let state = TwoTimeState::new(slices.clone(), 0.4)
                .unwrap()
                .with_boundary(rule)
                .unwrap();
            let ctl = StepControl::new(TimeScheme::Rk2, 0.1, 0.5).unwrap();
            let out = solve_two_time(&state, &ctl, &model, &collider).unwrap();
            assert!(out.halted.is_none());
            assert_eq!(out.balance.len(), 5);
            for row in &out.balance {
                assert!(
                    row.defect.abs() <= 1e-10,
                    "balance defect {} at step {}",
                    row.defect,
                    row.step
                );
            }
        }
        // Frozen inflow (the default) must also close.
        let state = TwoTimeState::new(slices.clone(), 0.4).unwrap();
        let ctl = StepControl::new(TimeScheme::Rk2, 0.1, 0.3).unwrap();
        let out = solve_two_time(&state, &ctl, &model, &collider).unwrap();
        for row in &out.balance {
            assert!(row.defect.abs() <= 1e-10);
        }
    }

    #[test]
    fn two_time_rejects_bad_configurations() {
        let g = make_grid(8, 4.0).unwrap();
        let f = maxwellian(g, 1.0, [0.0; 3], 0.6).unwrap();
        let state = TwoTimeState::new(vec![f.clone(); 2], 0.05).unwrap();
        let model_hard = InteractionModel::from_s(9.0).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        // CFL: dt = 0.1 > tau_spacing = 0.05.
        let ctl = StepControl::new(TimeScheme::Rk2, 0.1, 0.2).unwrap();
        assert!(solve_two_time(&state, &ctl, &model, &collider).is_err());
        // Non-Maxwell interaction model.
        let ok_ctl = StepControl::new(TimeScheme::Rk2, 0.05, 0.1).unwrap();
        assert!(solve_two_time(&state, &ok_ctl, &model_hard, &collider).is_err());
        // Mismatched frozen-slice grid.
        let other = make_grid(12, 4.0).unwrap();
        let bad = maxwellian(other, 1.0, [0.0; 3], 0.6).unwrap();
        assert!(TwoTimeState::new(vec![f; 2], 0.05)
            .unwrap()
            .with_boundary(InflowRule::Frozen(bad))
            .is_err());
    }

    #[test]
    fn correspondence_residual_matches_reduced_residual_exactly() {
        let g = make_grid(12, 4.0).unwrap();
        let base = maxwellian(g, 1.0, [0.0; 3], 0.7).unwrap();
        let cfg = SelfSimilarConfig::maxwell(0.8, 1.3, 1.1).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let drho = 0.05;
        let profiles: Vec<ReducedProfile> = (0..4)
            .map(|k| {
                let rho = k as f64 * drho;
                let scale = (2.0 * rho / cfg.beta).exp();
                let values = base.values.iter().map(|v| v * scale).collect();
                let f = Distribution::from_values(g, values, FieldLabel::TwoTimeProfile)
                    .unwrap();
                ReducedProfile::new(f, rho).unwrap()
            })
            .collect();
        let family = ProfileFamily::new(profiles.clone()).unwrap();
        let corr = correspondence_residual(&family, &cfg, &model, &collider).unwrap();

        // Same data through the reduced-equation code path.
        let mut worst = 0.0_f64;
        for k in 1..profiles.len() - 1 {
            let values: Vec<f64> = profiles[k + 1]
                .f
                .values
                .iter()
                .zip(&profiles[k - 1].f.values)
                .map(|(a, b)| (a - b) / (2.0 * drho))
                .collect();
            let drho_f = Distribution::from_values(g, values, FieldLabel::TwoTimeProfile)
                .unwrap();
            let r = reduced_residual(&profiles[k], &drho_f, &cfg, &model, &collider)
                .unwrap();
            worst = worst.max(r.l2_norm());
        }
        let diff = (corr - worst).abs();
        assert!(
            diff <= 1e-12 * worst.max(1.0),
            "correspondence {corr} vs reduced {worst}"
        );

        // Zero family -> zero residual.
        let zeros: Vec<ReducedProfile> = (0..3)
            .map(|k| {
                ReducedProfile::new(
                    Distribution::zeros(g, FieldLabel::TwoTimeProfile),
                    k as f64 * drho,
                )
                .unwrap()
            })
            .collect();
        let zfam = ProfileFamily::new(zeros).unwrap();
        assert_eq!(
            correspondence_residual(&zfam, &cfg, &model, &collider).unwrap(),
            0.0
        );

        // Non-Maxwell case is rejected.
        let hard = SelfSimilarConfig::hard(0.5, 1.0, 1.0).unwrap();
        assert!(correspondence_residual(&family, &hard, &model, &collider).is_err());
    }

    #[test]
    fn bracketing_finds_sign_changes_and_nothing_else() {
        let s = |lambda: f64, g: f64| GSample { lambda, g };
        // Same sign throughout: no roots.
        assert!(bracket_sign_changes(&[s(0.5, 1.0), s(1.0, 0.5), s(1.5, 2.0)]).is_empty());
        // One sign change.
        let b = bracket_sign_changes(&[s(0.5, 1.0), s(1.0, -0.5), s(1.5, -2.0)]);
        assert_eq!(b, vec![(0.5, 1.0)]);
        // NaN samples are skipped, not bracketed.
        let b = bracket_sign_changes(&[s(0.5, 1.0), s(1.0, f64::NAN), s(1.5, -2.0)]);
        assert!(b.is_empty());
        // Exact zeros surface as degenerate intervals.
        let b = bracket_sign_changes(&[s(0.5, 1.0), s(1.0, 0.0), s(1.5, 2.0)]);
        assert_eq!(b, vec![(1.0, 1.0)]);
    }

    #[test]
    fn eigen_growth_rate_is_invariant_under_the_lambda_kernel_rescaling() {
        // lambda*u0 multiplies Q only as a product: doubling lambda and the
        // kernel scale leaves every stage bitwise unchanged.
        let g = make_grid(12, 4.0).unwrap();
        let seed = maxwellian(g, 1.0, [0.0; 3], 0.7).unwrap();
        let collider = coarse_collider();
        let opts = EigenOpts {
            samples: 2,
            drho: 0.05,
            steps: 8,
            ..EigenOpts::default()
        };
        let m1 = InteractionModel::maxwell();
        let m2 = InteractionModel::maxwell().with_kernel_scale(2.0).unwrap();
        let g1 = eigen_growth_rate(&seed, 0.7, 1.0, 1.0, &m1, &collider, &opts).unwrap();
        let g2 = eigen_growth_rate(&seed, 1.4, 1.0, 1.0, &m2, &collider, &opts).unwrap();
        assert_eq!(g1, g2, "rescaling symmetry broken: {g1} vs {g2}");
    }

    #[test]
    fn eigen_search_reports_are_internally_consistent() {
        let g = make_grid(8, 4.0).unwrap();
        let seed = maxwellian(g, 2.0, [0.0; 3], 0.6).unwrap();
        let model = InteractionModel::maxwell();
        let collider = coarse_collider();
        let opts = EigenOpts {
            samples: 3,
            drho: 0.05,
            steps: 6,
            ..EigenOpts::default()
        };
        let report =
            eigen_search_maxwell(&seed, 1.0, 1.0, &model, &collider, (0.5, 1.5), &opts)
                .unwrap();
        assert_eq!(report.samples.len(), 3);
        for s in &report.samples {
            assert!(s.g.is_finite(), "unexpected aborted sample at {}", s.lambda);
        }
        // Every root sits inside the bracket with a finite residual, and the
        // root count equals the sign-change count of the scan.
        let expected = bracket_sign_changes(&report.samples).len();
        assert_eq!(report.roots.len(), expected);
        for root in &report.roots {
            assert!(root.lambda_star >= 0.5 && root.lambda_star <= 1.5);
            assert!(root.residual.is_finite());
            assert!(root.g.abs() <= 1e-4, "root g {}", root.g);
        }
        // Rejects a non-Maxwell model and a degenerate bracket.
        let hard = InteractionModel::from_s(9.0).unwrap();
        assert!(
            eigen_search_maxwell(&seed, 1.0, 1.0, &hard, &collider, (0.5, 1.5), &opts)
                .is_err()
        );
        assert!(
            eigen_search_maxwell(&seed, 1.0, 1.0, &model, &collider, (1.5, 0.5), &opts)
                .is_err()
        );
    }
}
