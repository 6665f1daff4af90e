// `!(x > 0)` guards intentionally reject NaN configuration values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Time integration of the parabolic complex Monge-Ampère equation
//! `φ̇ = log(density(ω̂_t + ∂∂̄φ)/Ω) − νφ` on the periodic grid.
//!
//! The reference family `ω̂_t` is static, linear in `t`, or an exponential
//! interpolation towards a (possibly degenerate) limit density. Stepping is
//! classical four-stage explicit integration with an adaptive cap
//! `dt ≤ c·h²·min(1, min g)` (the linearization of the right-hand side is
//! the metric Laplacian, whose stiffness scales with `1/min g`), plus
//! rejection and halving whenever a stage loses metric positivity. When the
//! step size underflows its floor the run reports `singularity-reached` and
//! hands back the last valid state.
//!
//! The background and volume data are supplied fields; on the torus substrate
//! a genuinely curved topology cannot be realized globally, so scenarios feed
//! model data and the estimate suite checks the PDE-level inequalities, which
//! is what the maximum-principle arguments actually use.

use thiserror::Error;

use crate::classflow::Nu;
use crate::fields::{
    for_each_row, for_each_row_reduce_min, metric_from_potential, FieldError,
    MetricField, PeriodicGrid, ScalarField,
};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("metric positivity lost at t={t}: density {value:.3e} at ({i},{j})")]
    Degenerate { t: f64, i: usize, j: usize, value: f64 },
    #[error("time {t} is outside the linear family range [0, {t_prime}]")]
    BeyondFamilyRange { t: f64, t_prime: f64 },
    #[error("invalid flow problem: {0}")]
    InvalidProblem(String),
    #[error("step size underflow at t={t}; singularity reached")]
    SingularityReached { t: f64 },
}

/// Reference-metric family `ω̂_t`.
#[derive(Debug, Clone)]
pub enum BackgroundFamily {
    /// `ω̂_t = ω̂` for all `t`.
    Static { omega_hat: MetricField },
    /// `ω̂_t = ((T′−t)·ω₀ + t·η)/T′` on `[0, T′]`; `η ≥ 0` may degenerate.
    Linear {
        omega0: MetricField,
        eta: ScalarField,
        t_prime: f64,
    },
    /// `ω̂_t = e^{−t}·ω₀ + (1−e^{−t})·ω̂_∞`; `ω̂_∞ ≥ 0` may degenerate.
    Exponential {
        omega0: MetricField,
        omega_inf: ScalarField,
    },
}

/// Blend coefficients for `ω̂_t = a·f1 + b·f2`, shared by all kernels.
struct Blend<'a> {
    a: f64,
    f1: &'a [f64],
    b: f64,
    f2: &'a [f64],
}

impl BackgroundFamily {
    pub fn n(&self) -> usize {
        match self {
            BackgroundFamily::Static { omega_hat } => omega_hat.n(),
            BackgroundFamily::Linear { omega0, .. } => omega0.n(),
            BackgroundFamily::Exponential { omega0, .. } => omega0.n(),
        }
    }

    fn blend_at(&self, t: f64) -> Result<Blend<'_>, FlowError> {
        match self {
            BackgroundFamily::Static { omega_hat } => Ok(Blend {
                a: 1.0,
                f1: omega_hat.values(),
                b: 0.0,
                f2: omega_hat.values(),
            }),
            BackgroundFamily::Linear {
                omega0,
                eta,
                t_prime,
            } => {
                if t < 0.0 || t > *t_prime {
                    return Err(FlowError::BeyondFamilyRange {
                        t,
                        t_prime: *t_prime,
                    });
                }
                Ok(Blend {
                    a: (t_prime - t) / t_prime,
                    f1: omega0.values(),
                    b: t / t_prime,
                    f2: eta.values(),
                })
            }
            BackgroundFamily::Exponential { omega0, omega_inf } => {
                if t < 0.0 {
                    return Err(FlowError::BeyondFamilyRange {
                        t,
                        t_prime: f64::INFINITY,
                    });
                }
                let decay = (-t).exp();
                Ok(Blend {
                    a: decay,
                    f1: omega0.values(),
                    b: 1.0 - decay,
                    f2: omega_inf.values(),
                })
            }
        }
    }

    /// Upper end of the family's validity range.
    pub fn range_end(&self) -> f64 {
        match self {
            BackgroundFamily::Linear { t_prime, .. } => *t_prime,
            _ => f64::INFINITY,
        }
    }
}

/// `(ω̂_t, χ_t)` where `χ_t = ∂_t ω̂_t`, per the family formulas.
pub fn background_at(
    family: &BackgroundFamily,
    t: f64,
) -> Result<(MetricField, ScalarField), FlowError> {
    let n = family.n();
    let blend = family.blend_at(t)?;
    let mut bg = vec![0.0; n * n];
    for_each_row(&mut bg, n, |j, row| {
        let f1 = &blend.f1[j * n..j * n + n];
        let f2 = &blend.f2[j * n..j * n + n];
        for i in 0..n {
            row[i] = blend.a * f1[i] + blend.b * f2[i];
        }
    });
    let chi = match family {
        BackgroundFamily::Static { .. } => vec![0.0; n * n],
        BackgroundFamily::Linear {
            omega0,
            eta,
            t_prime,
        } => {
            let inv = 1.0 / t_prime;
            eta.values()
                .iter()
                .zip(omega0.values())
                .map(|(e, w)| (e - w) * inv)
                .collect()
        }
        BackgroundFamily::Exponential { omega0, omega_inf } => {
            let decay = (-t).exp();
            omega0
                .values()
                .iter()
                .zip(omega_inf.values())
                .map(|(w, e)| -decay * (w - e))
                .collect()
        }
    };
    Ok((
        MetricField::from_values(n, bg),
        ScalarField::from_values(n, chi),
    ))
}

/// One flow on one grid: family, volume density, normalization, initial
/// potential, and an optional degeneracy profile for lower-bound
/// monitoring against `ε log s`.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    grid: PeriodicGrid,
    family: BackgroundFamily,
    omega_big: MetricField,
    log_omega: Vec<f64>,
    nu: Nu,
    phi0: ScalarField,
    degeneracy_profile: Option<ScalarField>,
}

impl FlowProblem {
    pub fn new(
        grid: PeriodicGrid,
        family: BackgroundFamily,
        omega_big: MetricField,
        nu: Nu,
        phi0: ScalarField,
        degeneracy_profile: Option<ScalarField>,
    ) -> Result<Self, FlowError> {
        let n = grid.n();
        if family.n() != n || omega_big.n() != n || phi0.n() != n {
            return Err(FlowError::InvalidProblem(
                "family, volume density and initial potential must share the grid".into(),
            ));
        }
        if !omega_big.is_strictly_positive() {
            let (i, j, value) = omega_big.argmin();
            return Err(FlowError::InvalidProblem(format!(
                "volume density is not strictly positive: {value:.3e} at ({i},{j})"
            )));
        }
        if let Some(s) = &degeneracy_profile {
            if s.n() != n {
                return Err(FlowError::InvalidProblem(
                    "degeneracy profile must share the grid".into(),
                ));
            }
            if s.min_value() < 0.0 {
                return Err(FlowError::InvalidProblem(
                    "degeneracy profile must be non-negative".into(),
                ));
            }
        }
        if let BackgroundFamily::Linear { eta, t_prime, .. } = &family {
            if !(*t_prime > 0.0) {
                return Err(FlowError::InvalidProblem("linear family needs T' > 0".into()));
            }
            if eta.min_value() < 0.0 {
                return Err(FlowError::InvalidProblem(
                    "linear family target must be non-negative".into(),
                ));
            }
        }
        if let BackgroundFamily::Exponential { omega_inf, .. } = &family {
            if omega_inf.min_value() < 0.0 {
                return Err(FlowError::InvalidProblem(
                    "exponential family limit must be non-negative".into(),
                ));
            }
        }
        let log_omega = omega_big.values().iter().map(|v| v.ln()).collect();
        let problem = FlowProblem {
            grid,
            family,
            omega_big,
            log_omega,
            nu,
            phi0,
            degeneracy_profile,
        };
        // The initial metric must be positive; report the violation location.
        let (bg0, _) = background_at(&problem.family, 0.0)?;
        let (m0, ok) = metric_from_potential(&bg0, &problem.phi0);
        if !ok {
            let (i, j, value) = m0.argmin();
            return Err(FlowError::InvalidProblem(format!(
                "initial metric is not positive: {value:.3e} at ({i},{j})"
            )));
        }
        Ok(problem)
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn family(&self) -> &BackgroundFamily {
        &self.family
    }

    pub fn omega_big(&self) -> &MetricField {
        &self.omega_big
    }

    pub fn nu(&self) -> Nu {
        self.nu
    }

    pub fn phi0(&self) -> &ScalarField {
        &self.phi0
    }

    pub fn degeneracy_profile(&self) -> Option<&ScalarField> {
        self.degeneracy_profile.as_ref()
    }

    /// Evolving metric density at a given state.
    pub fn metric_at(&self, state: &FlowState) -> Result<MetricField, FlowError> {
        let (bg, _) = background_at(&self.family, state.t)?;
        let (m, _) = metric_from_potential(&bg, &state.phi);
        Ok(m)
    }

    /// Right-hand side into `out`; returns the minimum density encountered.
    fn rhs_into(&self, t: f64, phi: &[f64], out: &mut [f64]) -> Result<f64, FlowError> {
        self.rhs_stage_into(t, phi, None, out)
    }

    /// Right-hand side at the staged potential `φ + coef·k` (evaluated on the
    /// fly, so intermediate stage potentials never materialize). Returns the
    /// minimum density encountered.
    fn rhs_stage_into(
        &self,
        t: f64,
        phi: &[f64],
        stage: Option<(&[f64], f64)>,
        out: &mut [f64],
    ) -> Result<f64, FlowError> {
        let blend = self.family.blend_at(t)?;
        let min_density = match stage {
            None => self.rhs_rows(&blend, |idx| phi[idx], out),
            Some((k, coef)) => self.rhs_rows(&blend, |idx| phi[idx] + coef * k[idx], out),
        };
        Ok(min_density)
    }

    fn rhs_rows<V>(&self, blend: &Blend<'_>, value_at: V, out: &mut [f64]) -> f64
    where
        V: Fn(usize) -> f64 + Sync,
    {
        let n = self.grid.n();
        let nu = self.nu.as_f64();
        let quarter_inv_h2 = 0.25 * (n as f64) * (n as f64);
        let log_omega = &self.log_omega;
        let (a, b) = (blend.a, blend.b);
        let (f1, f2) = (blend.f1, blend.f2);
        for_each_row_reduce_min(out, n, |j, row| {
            let jn = j * n;
            let jmn = if j == 0 { n - 1 } else { j - 1 } * n;
            let jpn = if j + 1 == n { 0 } else { j + 1 } * n;
            let f1r = &f1[jn..jn + n];
            let f2r = &f2[jn..jn + n];
            let lw = &log_omega[jn..jn + n];
            let mut row_min = f64::INFINITY;
            // Edges wrap; the interior loop is branch-free.
            let mut point = |i: usize, im: usize, ip: usize, row: &mut [f64]| {
                let center = value_at(jn + i);
                let lap = quarter_inv_h2
                    * (value_at(jn + im) + value_at(jn + ip) + value_at(jmn + i)
                        + value_at(jpn + i)
                        - 4.0 * center);
                let dens = a * f1r[i] + b * f2r[i] + lap;
                if dens < row_min {
                    row_min = dens;
                }
                row[i] = dens.ln() - lw[i] - nu * center;
            };
            point(0, n - 1, 1, row);
            for i in 1..n - 1 {
                point(i, i - 1, i + 1, row);
            }
            point(n - 1, n - 2, 0, row);
            row_min
        })
    }
}

/// State of a flow run at one time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub phi: ScalarField,
    /// Right-hand side evaluated at `(t, phi)`.
    pub phidot: ScalarField,
    pub dt_last: f64,
}

impl FlowState {
    /// Initial state; evaluates and validates the right-hand side at `t = 0`.
    pub fn initial(problem: &FlowProblem) -> Result<FlowState, FlowError> {
        let n = problem.grid.n();
        let mut out = vec![0.0; n * n];
        let min_density = problem.rhs_into(0.0, problem.phi0.values(), &mut out)?;
        if min_density <= 0.0 {
            return Err(FlowError::InvalidProblem(format!(
                "initial metric is not positive (min density {min_density:.3e})"
            )));
        }
        Ok(FlowState {
            t: 0.0,
            phi: problem.phi0.clone(),
            phidot: ScalarField::from_values(n, out),
            dt_last: 0.0,
        })
    }
}

/// Step-size policy. `dt ≤ dt_cap_c · h² · min(1, min g)`, optionally capped
/// by an absolute `dt_max`; a stage whose density drops to `positivity_floor`
/// or below rejects the step and retries at half the size.
#[derive(Debug, Clone)]
pub struct StepControl {
    pub dt_cap_c: f64,
    pub dt_max: Option<f64>,
    pub positivity_floor: f64,
    /// Step sizes below `dt_floor_rel · (c·h²)` signal a singularity.
    pub dt_floor_rel: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt_cap_c: 0.2,
            dt_max: None,
            positivity_floor: 1e-12,
            dt_floor_rel: 1e-11,
        }
    }
}

impl StepControl {
    fn base_cap(&self, grid: PeriodicGrid) -> f64 {
        let h = grid.spacing();
        let cap = self.dt_cap_c * h * h;
        match self.dt_max {
            Some(m) => cap.min(m),
            None => cap,
        }
    }
}

/// Scratch buffers reused across steps.
struct Workspace {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    next_phi: Vec<f64>,
    next_phidot: Vec<f64>,
}

impl Workspace {
    fn new(points: usize) -> Self {
        Workspace {
            k2: vec![0.0; points],
            k3: vec![0.0; points],
            k4: vec![0.0; points],
            next_phi: vec![0.0; points],
            next_phidot: vec![0.0; points],
        }
    }
}

enum Attempt {
    /// `(next_phi, next_phidot, min_density_at_next)` are in the workspace.
    Accepted { min_density: f64 },
    Rejected,
}

/// One four-stage attempt at step size `dt`. On acceptance the workspace
/// holds the new potential and its right-hand side.
fn try_step(
    problem: &FlowProblem,
    state: &FlowState,
    dt: f64,
    floor: f64,
    ws: &mut Workspace,
) -> Result<Attempt, FlowError> {
    let n = problem.grid.n();
    let phi = state.phi.values();
    let k1 = state.phidot.values();
    let half = 0.5 * dt;
    let Workspace {
        k2,
        k3,
        k4,
        next_phi,
        next_phidot,
    } = ws;

    // A stage either evaluates cleanly above the positivity floor or rejects
    // the attempt; stage positions past a linear family's T' also reject, so
    // the caller halves dt instead of aborting the run.
    let eval = |t: f64,
                stage: Option<(&[f64], f64)>,
                out: &mut [f64]|
     -> Result<bool, FlowError> {
        match problem.rhs_stage_into(t, phi, stage, out) {
            Ok(min) => Ok(min > floor),
            Err(FlowError::BeyondFamilyRange { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };

    if !eval(state.t + half, Some((k1, half)), k2)? {
        return Ok(Attempt::Rejected);
    }
    if !eval(state.t + half, Some((k2, half)), k3)? {
        return Ok(Attempt::Rejected);
    }
    if !eval(state.t + dt, Some((k3, dt)), k4)? {
        return Ok(Attempt::Rejected);
    }

    // next_phi = phi + dt/6 (k1 + 2 k2 + 2 k3 + k4)
    let sixth = dt / 6.0;
    {
        let (k2, k3, k4) = (&*k2, &*k3, &*k4);
        for_each_row(next_phi, n, |j, row| {
            let base = j * n;
            let p = &phi[base..base + n];
            let a = &k1[base..base + n];
            let b = &k2[base..base + n];
            let c = &k3[base..base + n];
            let d = &k4[base..base + n];
            for i in 0..n {
                row[i] = p[i] + sixth * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
            }
        });
    }
    // Validate the accepted state; its right-hand side doubles as the next
    // step's first stage.
    match problem.rhs_into(state.t + dt, next_phi, next_phidot) {
        Ok(min) if min > floor => Ok(Attempt::Accepted { min_density: min }),
        Ok(_) => Ok(Attempt::Rejected),
        Err(FlowError::BeyondFamilyRange { .. }) => Ok(Attempt::Rejected),
        Err(e) => Err(e),
    }
}

/// Advance one accepted step of size at most `dt`, halving on positivity
/// rejection down to the floor. Errors with `SingularityReached` when the
/// step size underflows; the caller still owns the last valid state.
pub fn step(
    problem: &FlowProblem,
    state: &FlowState,
    dt: f64,
    ctrl: &StepControl,
) -> Result<FlowState, FlowError> {
    if !(dt > 0.0) {
        return Err(FlowError::InvalidProblem("step size must be positive".into()));
    }
    let mut ws = Workspace::new(problem.grid.points());
    let floor_dt = ctrl.dt_floor_rel * ctrl.base_cap(problem.grid);
    let mut next = state.clone();
    step_into(problem, &mut next, dt, floor_dt, ctrl, &mut ws)?;
    Ok(next)
}

/// In-place step: on success `state` is advanced (buffers swapped, not
/// copied) and the accepted minimum density is returned.
fn step_into(
    problem: &FlowProblem,
    state: &mut FlowState,
    dt: f64,
    floor_dt: f64,
    ctrl: &StepControl,
    ws: &mut Workspace,
) -> Result<f64, FlowError> {
    let mut dt_try = dt;
    loop {
        match try_step(problem, state, dt_try, ctrl.positivity_floor, ws)? {
            Attempt::Accepted { min_density } => {
                state.t += dt_try;
                state.dt_last = dt_try;
                std::mem::swap(state.phi.values_vec_mut(), &mut ws.next_phi);
                std::mem::swap(state.phidot.values_vec_mut(), &mut ws.next_phidot);
                return Ok(min_density);
            }
            Attempt::Rejected => {
                dt_try *= 0.5;
                if dt_try < floor_dt {
                    return Err(FlowError::SingularityReached { t: state.t });
                }
            }
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    /// Step size underflow; the trajectory up to `t` is valid.
    SingularityReached { t: f64 },
}

#[derive(Debug)]
pub struct RunOutcome {
    pub final_state: FlowState,
    pub termination: Termination,
    pub steps_taken: u64,
}

/// When to emit samples along a run.
#[derive(Debug, Clone)]
pub enum SampleSchedule {
    /// `t = 0, sample_every, 2·sample_every, …, t_end`.
    Every(f64),
    /// Explicit increasing times in `(0, t_end]`; `0` and `t_end` are always
    /// sampled regardless.
    At(Vec<f64>),
}

impl SampleSchedule {
    /// Increasing boundary list ending exactly at `t_end`.
    fn boundaries(&self, t_end: f64) -> Result<Vec<f64>, FlowError> {
        let mut b = Vec::new();
        match self {
            SampleSchedule::Every(step) => {
                if !(*step > 0.0) {
                    return Err(FlowError::InvalidProblem(
                        "sample_every must be positive".into(),
                    ));
                }
                let mut k = 1u64;
                loop {
                    let t = k as f64 * step;
                    if t >= t_end - 1e-12 * t_end.max(1.0) {
                        break;
                    }
                    b.push(t);
                    k += 1;
                }
            }
            SampleSchedule::At(times) => {
                for &t in times {
                    if !(t > 0.0) || t >= t_end - 1e-12 * t_end.max(1.0) {
                        continue;
                    }
                    if let Some(&last) = b.last() {
                        if t <= last {
                            return Err(FlowError::InvalidProblem(
                                "sample times must be strictly increasing".into(),
                            ));
                        }
                    }
                    b.push(t);
                }
            }
        }
        b.push(t_end);
        Ok(b)
    }
}

/// Integrate to `t_end`, invoking `on_sample` at `t = 0`, at every schedule
/// boundary, and at `t_end`. Step sizes are clipped to land exactly on
/// boundaries, so sampling never changes the trajectory between boundaries
/// and identical configurations reproduce identical output.
pub fn run_scheduled(
    problem: &FlowProblem,
    t_end: f64,
    schedule: &SampleSchedule,
    ctrl: &StepControl,
    mut on_sample: impl FnMut(&FlowState),
) -> Result<RunOutcome, FlowError> {
    if !(t_end >= 0.0) {
        return Err(FlowError::InvalidProblem("t_end must be nonnegative".into()));
    }
    if t_end > problem.family.range_end() {
        return Err(FlowError::InvalidProblem(format!(
            "t_end {} exceeds the family range [0, {}]",
            t_end,
            problem.family.range_end()
        )));
    }
    let mut state = FlowState::initial(problem)?;
    on_sample(&state);
    if t_end == 0.0 {
        return Ok(RunOutcome {
            final_state: state,
            termination: Termination::Completed,
            steps_taken: 0,
        });
    }
    let boundaries = schedule.boundaries(t_end)?;

    let mut ws = Workspace::new(problem.grid.points());
    let base_cap = ctrl.base_cap(problem.grid);
    let floor_dt = ctrl.dt_floor_rel * base_cap;
    let mut min_density: f64 = 1.0; // refined after the first step
    {
        // Initial stiffness estimate from the initial metric.
        let (bg0, _) = background_at(&problem.family, 0.0)?;
        let (m0, _) = metric_from_potential(&bg0, &problem.phi0);
        min_density = min_density.min(m0.min_value());
    }
    let mut boundary_index = 0usize;
    let mut steps: u64 = 0;
    let eps = 1e-12 * t_end.max(1.0);

    loop {
        let boundary = boundaries[boundary_index];
        // Stability cap; clipping to the sample boundary is not a stability
        // event and does not count against the floor.
        let dt_stab = base_cap * min_density.min(1.0);
        if dt_stab < floor_dt {
            return Ok(RunOutcome {
                final_state: state.clone(),
                termination: Termination::SingularityReached { t: state.t },
                steps_taken: steps,
            });
        }
        let dt = dt_stab.min(boundary - state.t);
        match step_into(problem, &mut state, dt, floor_dt, ctrl, &mut ws) {
            Ok(min_d) => {
                min_density = min_d;
                steps += 1;
            }
            Err(FlowError::SingularityReached { t }) => {
                return Ok(RunOutcome {
                    final_state: state,
                    termination: Termination::SingularityReached { t },
                    steps_taken: steps,
                });
            }
            Err(e) => return Err(e),
        }
        if (state.t - boundary).abs() < eps {
            state.t = boundary; // pin to the exact boundary to stop drift
            on_sample(&state);
            boundary_index += 1;
            if boundary_index == boundaries.len() {
                return Ok(RunOutcome {
                    final_state: state,
                    termination: Termination::Completed,
                    steps_taken: steps,
                });
            }
        }
    }
}

/// Uniform-sampling wrapper around [`run_scheduled`].
pub fn run(
    problem: &FlowProblem,
    t_end: f64,
    sample_every: f64,
    ctrl: &StepControl,
    on_sample: impl FnMut(&FlowState),
) -> Result<RunOutcome, FlowError> {
    run_scheduled(
        problem,
        t_end,
        &SampleSchedule::Every(sample_every),
        ctrl,
        on_sample,
    )
}

/// Convenience wrapper collecting sampled states (tests and small runs).
pub fn run_collect(
    problem: &FlowProblem,
    t_end: f64,
    sample_every: f64,
    ctrl: &StepControl,
) -> Result<(Vec<FlowState>, RunOutcome), FlowError> {
    let mut samples = Vec::new();
    let outcome = run(problem, t_end, sample_every, ctrl, |s| samples.push(s.clone()))?;
    Ok((samples, outcome))
}

/// Public right-hand side per the module contract; errors carry the location
/// of a density violation.
pub fn rhs(problem: &FlowProblem, state: &FlowState) -> Result<ScalarField, FlowError> {
    let n = problem.grid.n();
    let mut out = vec![0.0; n * n];
    let min_density = problem.rhs_into(state.t, state.phi.values(), &mut out)?;
    if min_density <= 0.0 {
        let (bg, _) = background_at(&problem.family, state.t)?;
        let (m, _) = metric_from_potential(&bg, &state.phi);
        let (i, j, value) = m.argmin();
        return Err(FlowError::Degenerate {
            t: state.t,
            i,
            j,
            value,
        });
    }
    Ok(ScalarField::from_values(n, out))
}

/// `|∂φ|²`-type Dirichlet integrand paired with the flow's own stencils:
/// `¼ h²·Σ |D⁺φ|²` with forward differences, the exact summation-by-parts
/// partner of the 5-point Laplacian (`Σ φ·¼Δφ·h² = −¼Σ|D⁺φ|²h²`).
pub fn dirichlet_energy(phi: &ScalarField) -> f64 {
    let n = phi.n();
    let inv_h = n as f64;
    let v = phi.values();
    let mut total = 0.0;
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let row = &v[j * n..j * n + n];
        let up = &v[jp * n..jp * n + n];
        let mut acc = 0.0;
        for i in 0..n {
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let dx = (row[ip] - row[i]) * inv_h;
            let dy = (up[i] - row[i]) * inv_h;
            acc += dx * dx + dy * dy;
        }
        total += acc;
    }
    0.25 * total / ((n * n) as f64)
}
