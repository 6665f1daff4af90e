// `!(x > 0)` guards intentionally reject NaN values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Monitored functionals and the estimate suite.
//!
//! A trajectory is summarized by one [`DiagnosticsRecord`] per sample time:
//! extrema of the potential and its velocity, scalar-curvature extrema,
//! volume, Mabuchi energy (static reference families only, where the evolving
//! metric stays cohomologous to the initial one), trace maxima, the
//! third-order quantity, and per-check estimate flags.
//!
//! The named checks are discrete shadows of maximum-principle inequalities.
//! Their constants are computed from the initial data where the statement
//! specifies them (`C₀ = −min R(0) − νn`). An additive discretization slack,
//! measured from a refinement pair of the initial data by the caller,
//! separates genuine violations from `O(h²)` stencil error.

use serde::Serialize;
use thiserror::Error;

use crate::classflow::Nu;
use crate::fields::{
    complex_hessian, fold_rows, metric_from_potential, scalar_curvature, FieldError, MetricField,
    PeriodicGrid, ScalarField,
};
use crate::flow::{background_at, dirichlet_energy, FlowError, FlowProblem, FlowState};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("source term has nonzero mean {0:.3e}; not solvable on the torus")]
    NonZeroMeanSource(f64),
    #[error("conjugate-gradient iteration stalled at residual {0:.3e}")]
    PoissonNotConverged(f64),
    #[error("decay fit needs at least 8 samples, got {0}")]
    TooFewSamples(usize),
    #[error("decay fit requires positive values (sample {index} is {value})")]
    NonPositiveSample { index: usize, value: f64 },
}

// ---------------------------------------------------------------------------
// Ricci potential (periodic Poisson solve)
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64], n: usize) -> f64 {
    // Deterministic row-tree reduction, matching the field kernels.
    let combined: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    fold_rows(&combined, n, |row| row.iter().sum::<f64>(), |x, y| x + y, 0.0)
}

fn mean(v: &[f64], n: usize) -> f64 {
    fold_rows(v, n, |row| row.iter().sum::<f64>(), |x, y| x + y, 0.0) / (v.len() as f64)
}

/// Apply `−¼Δ_h` (positive semi-definite on the periodic grid).
fn neg_quarter_laplacian(src: &ScalarField) -> ScalarField {
    let h = complex_hessian(src);
    ScalarField::from_values(
        src.n(),
        h.values().iter().map(|v| -v).collect(),
    )
}

/// Ricci potential `h₀` of a positive density: solves
/// `¼Δ h₀ = ric(ω₀)` (mean-zero source), then shifts by the constant making
/// `∫ e^{h₀} ω₀ = ∫ ω₀`.
///
/// The solver is conjugate-gradient iteration on the periodic 5-point system,
/// run to an absolute l² residual below `1e−10`.
pub fn ricci_potential(
    grid: PeriodicGrid,
    omega0: &MetricField,
) -> Result<ScalarField, DiagnosticsError> {
    let n = grid.n();
    let r_field = scalar_curvature(omega0)?;
    // Class condition: ∫ R ω₀ = 0 on the torus (Gauss-Bonnet at grid level).
    let gauss: f64 = {
        let prod: Vec<f64> = r_field
            .values()
            .iter()
            .zip(omega0.values())
            .map(|(r, g)| r * g)
            .collect();
        ScalarField::from_values(n, prod).integrate()
    };
    if gauss.abs() > 1e-8 {
        return Err(DiagnosticsError::NonZeroMeanSource(gauss));
    }

    // Ricci density of ω₀ is −¼Δ log g₀, so solve −¼Δ h = ¼Δ log g₀.
    let log_g: Vec<f64> = omega0.values().iter().map(|v| v.ln()).collect();
    let b_field = complex_hessian(&ScalarField::from_values(n, log_g));
    let mut b: Vec<f64> = b_field.values().to_vec();
    let b_mean = mean(&b, n);
    for v in b.iter_mut() {
        *v -= b_mean; // strip roundoff-level mean so CG stays in range(A)
    }

    let points = n * n;
    let mut x = vec![0.0; points];
    let mut r: Vec<f64> = b.clone();
    let mut p = r.clone();
    let mut rs_old = dot(&r, &r, n);
    let tol = 1e-10;
    let max_iter = 20 * points;
    let mut iter = 0;
    while rs_old.sqrt() > tol {
        if iter >= max_iter {
            return Err(DiagnosticsError::PoissonNotConverged(rs_old.sqrt()));
        }
        let ap_field = neg_quarter_laplacian(&ScalarField::from_values(n, p.clone()));
        let ap = ap_field.values();
        let alpha = rs_old / dot(&p, ap, n);
        for i in 0..points {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r, n);
        let beta = rs_new / rs_old;
        for i in 0..points {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
        iter += 1;
    }

    // Normalization shift: ∫ e^{h₀+c} ω₀ = ∫ ω₀ gives c in closed form.
    let vol = omega0.total_volume();
    let weighted: Vec<f64> = x
        .iter()
        .zip(omega0.values())
        .map(|(h, g)| h.exp() * g)
        .collect();
    let weighted_vol = ScalarField::from_values(n, weighted).integrate();
    let c = (vol / weighted_vol).ln();
    for v in x.iter_mut() {
        *v += c;
    }
    Ok(ScalarField::from_values(n, x))
}

// ---------------------------------------------------------------------------
// Mabuchi energy
// ---------------------------------------------------------------------------

/// `Mab(φ) = ∫ log(ω_φ/ω₀) ω_φ − ∫ h₀ (ω_φ − ω₀)` with `ω_φ = ω₀ + ∂∂̄φ`.
pub fn mabuchi_energy(
    grid: PeriodicGrid,
    omega0: &MetricField,
    phi: &ScalarField,
    h0: &ScalarField,
) -> Result<f64, DiagnosticsError> {
    let n = grid.n();
    let (omega_phi, positive) = metric_from_potential(omega0, phi);
    if !positive {
        let (i, j, value) = omega_phi.argmin();
        return Err(DiagnosticsError::Field(FieldError::NonPositiveDensity {
            i,
            j,
            value,
        }));
    }
    let integrand: Vec<f64> = omega_phi
        .values()
        .iter()
        .zip(omega0.values())
        .zip(h0.values())
        .map(|((gp, g0), h)| (gp / g0).ln() * gp - h * (gp - g0))
        .collect();
    Ok(ScalarField::from_values(n, integrand).integrate())
}

// ---------------------------------------------------------------------------
// Third-order quantity
// ---------------------------------------------------------------------------

/// `S = |∇̂g|²` reduced to one complex dimension:
/// `S = ¼ (T_x² + T_y²)/g³` with `T = D g − (D bg / bg)·g` and centered
/// differences `D`. Vanishes iff `g` is a constant multiple of `bg` (for
/// smooth fields at grid precision).
pub fn third_order(g: &MetricField, bg: &MetricField) -> Result<ScalarField, DiagnosticsError> {
    let n = g.n();
    for (field, name) in [(g, "metric"), (bg, "background")] {
        if !field.is_strictly_positive() {
            let (i, j, value) = field.argmin();
            let _ = name;
            return Err(DiagnosticsError::Field(FieldError::NonPositiveDensity {
                i,
                j,
                value,
            }));
        }
    }
    let gv = g.values();
    let bv = bg.values();
    let half_inv_h = 0.5 * n as f64;
    let mut out = vec![0.0; n * n];
    crate::fields::for_each_row_seq(&mut out, n, |j, row| {
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let jp = if j + 1 == n { 0 } else { j + 1 };
        for i in 0..n {
            let im = if i == 0 { n - 1 } else { i - 1 };
            let ip = if i + 1 == n { 0 } else { i + 1 };
            let p = j * n + i;
            let dgx = (gv[j * n + ip] - gv[j * n + im]) * half_inv_h;
            let dgy = (gv[jp * n + i] - gv[jm * n + i]) * half_inv_h;
            let dbx = (bv[j * n + ip] - bv[j * n + im]) * half_inv_h;
            let dby = (bv[jp * n + i] - bv[jm * n + i]) * half_inv_h;
            let tx = dgx - dbx / bv[p] * gv[p];
            let ty = dgy - dby / bv[p] * gv[p];
            let g3 = gv[p] * gv[p] * gv[p];
            row[i] = 0.25 * (tx * tx + ty * ty) / g3;
        }
    });
    Ok(ScalarField::from_values(n, out))
}

// ---------------------------------------------------------------------------
// Decay-rate fit
// ---------------------------------------------------------------------------

/// Least-squares slope of `log(value)` against `t` over the trailing half of
/// the series. Needs at least 8 samples and positive values.
pub fn decay_fit(series: &[(f64, f64)]) -> Result<f64, DiagnosticsError> {
    if series.len() < 8 {
        return Err(DiagnosticsError::TooFewSamples(series.len()));
    }
    let tail = &series[series.len() / 2..];
    let mut pts = Vec::with_capacity(tail.len());
    for (k, (t, v)) in tail.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(DiagnosticsError::NonPositiveSample {
                index: series.len() / 2 + k,
                value: *v,
            });
        }
        pts.push((*t, v.ln()));
    }
    let m = pts.len() as f64;
    let mean_t = pts.iter().map(|(t, _)| t).sum::<f64>() / m;
    let mean_y = pts.iter().map(|(_, y)| y).sum::<f64>() / m;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, y) in &pts {
        cov += (t - mean_t) * (y - mean_y);
        var += (t - mean_t) * (t - mean_t);
    }
    Ok(cov / var)
}

// ---------------------------------------------------------------------------
// Estimate suite
// ---------------------------------------------------------------------------

/// Configuration for the estimate suite and record assembly.
#[derive(Debug, Clone)]
pub struct DiagnosticsConfig {
    /// Absolute tolerance for `holds` verdicts.
    pub tolerance: f64,
    /// Additive discretization slack for curvature-based checks, measured
    /// from a refinement pair of the initial data (0 disables).
    pub curvature_slack: f64,
    /// Compute the Mabuchi column (static reference families only).
    pub mabuchi: bool,
    /// Degenerate-model lower-bound check parameters.
    pub degeneracy: Option<DegeneracyCheck>,
}

#[derive(Debug, Clone)]
pub struct DegeneracyCheck {
    /// The ε in `φ ≥ ε log s − C_ε`.
    pub epsilon: f64,
    /// Points with `s ≤ s_floor` are excluded from the check.
    pub s_floor: f64,
    /// Cap asserted on the measured `C_ε`.
    pub c_cap: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            tolerance: 1e-6,
            curvature_slack: 0.0,
            mabuchi: false,
            degeneracy: None,
        }
    }
}

/// Per-sample state of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct FlagSample {
    pub name: &'static str,
    pub holds: bool,
    pub margin: f64,
}

/// One time-series row of monitored functionals (CSV column order is the
/// declaration order here, flags last).
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub phidot_min: f64,
    pub phidot_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub volume: f64,
    pub mabuchi: f64,
    pub tr_bg_omega_max: f64,
    pub tr_omega_bg_max: f64,
    pub third_order_max: f64,
    pub flags: Vec<FlagSample>,
}

impl DiagnosticsRecord {
    pub fn phidot_linf(&self) -> f64 {
        self.phidot_min.abs().max(self.phidot_max.abs())
    }

    pub const CSV_HEADER: &'static str = "t,dt,phi_min,phi_max,phidot_min,phidot_max,R_min,R_max,volume,mabuchi,tr_bg_omega_max,tr_omega_bg_max,third_order_max,flags";

    pub fn csv_line(&self) -> String {
        let flags = self
            .flags
            .iter()
            .map(|f| format!("{}={}:{}", f.name, u8::from(f.holds), f.margin))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.dt,
            self.phi_min,
            self.phi_max,
            self.phidot_min,
            self.phidot_max,
            self.r_min,
            self.r_max,
            self.volume,
            self.mabuchi,
            self.tr_bg_omega_max,
            self.tr_omega_bg_max,
            self.third_order_max,
            flags
        )
    }
}

/// Aggregate verdict for one named check over a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutcome {
    pub name: &'static str,
    pub applicable: bool,
    pub holds: bool,
    /// Worst signed slack seen (discretization slack already included).
    pub worst_margin: f64,
    /// `(t, i, j)` of the worst margin.
    pub location: Option<(f64, usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub checks: Vec<EstimateOutcome>,
    /// Measured `C_ε` envelope for the degenerate-model check, if enabled.
    pub degeneracy_c_eps: Option<f64>,
}

impl EstimateReport {
    pub fn all_applicable_hold(&self) -> bool {
        self.checks.iter().all(|c| !c.applicable || c.holds)
    }

    pub fn check(&self, name: &str) -> Option<&EstimateOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct CheckState {
    name: &'static str,
    applicable: bool,
    worst_margin: f64,
    location: Option<(f64, usize, usize)>,
}

impl CheckState {
    fn new(name: &'static str, applicable: bool) -> Self {
        CheckState {
            name,
            applicable,
            worst_margin: f64::INFINITY,
            location: None,
        }
    }

    fn update(&mut self, margin: f64, location: (f64, usize, usize)) {
        if margin < self.worst_margin {
            self.worst_margin = margin;
            self.location = Some(location);
        }
    }

    fn outcome(&self, tolerance: f64) -> EstimateOutcome {
        EstimateOutcome {
            name: self.name,
            applicable: self.applicable,
            holds: !self.applicable || self.worst_margin >= -tolerance,
            worst_margin: if self.worst_margin.is_finite() {
                self.worst_margin
            } else {
                0.0
            },
            location: self.location,
        }
    }
}

/// Online evaluator: feed it every sampled state, read the report at the end.
pub struct EstimateSuite {
    cfg: DiagnosticsConfig,
    nu: Nu,
    /// Initial evolving metric and its logarithm.
    g0: MetricField,
    log_g0: Vec<f64>,
    /// `C₀ = −min R(0) − νn` from the scalar-curvature evolution bound.
    c0: f64,
    /// Curvature constant for the trace check (one-dimensional reduction:
    /// `−min R(ω(0))` clipped at zero, plus ν for the background drift term).
    c_hat: f64,
    linear_t_prime: Option<f64>,
    exponential: bool,
    min_q0: Option<f64>,
    prev_logtr: Option<(f64, f64)>,
    checks: Vec<CheckState>,
    c_eps_envelope: f64,
}

const CHECK_SCALAR: usize = 0;
const CHECK_VOLUME: usize = 1;
const CHECK_Q_MONOTONE: usize = 2;
const CHECK_TSUJI: usize = 3;
const CHECK_TRACE_LOG: usize = 4;
const CHECK_DEGENERATE: usize = 5;

impl EstimateSuite {
    pub fn new(problem: &FlowProblem, cfg: DiagnosticsConfig) -> Result<Self, DiagnosticsError> {
        let (bg0, _) = background_at(problem.family(), 0.0)?;
        let (g0, positive) = metric_from_potential(&bg0, problem.phi0());
        if !positive {
            let (i, j, value) = g0.argmin();
            return Err(DiagnosticsError::Field(FieldError::NonPositiveDensity {
                i,
                j,
                value,
            }));
        }
        let r0 = scalar_curvature(&g0)?;
        let min_r0 = r0.min_value();
        let nu = problem.nu();
        let c0 = -min_r0 - nu.as_f64();
        let c_hat = (-min_r0).max(0.0) + nu.as_f64();
        let (linear_t_prime, exponential) = match problem.family() {
            crate::flow::BackgroundFamily::Linear { t_prime, .. } => (Some(*t_prime), false),
            crate::flow::BackgroundFamily::Exponential { .. } => (None, true),
            crate::flow::BackgroundFamily::Static { .. } => (None, false),
        };
        let log_g0 = g0.values().iter().map(|v| v.ln()).collect();
        let degeneracy_applicable =
            cfg.degeneracy.is_some() && problem.degeneracy_profile().is_some();
        let checks = vec![
            CheckState::new("scalar_lower_bound", true),
            CheckState::new("volume_upper_bound", nu == Nu::Zero),
            CheckState::new("q_monotone", linear_t_prime.is_some()),
            CheckState::new("tsuji_combination", exponential),
            CheckState::new("trace_log", true),
            CheckState::new("degenerate_lower_bound", degeneracy_applicable),
        ];
        Ok(EstimateSuite {
            cfg,
            nu,
            g0,
            log_g0,
            c0,
            c_hat,
            linear_t_prime,
            exponential,
            min_q0: None,
            prev_logtr: None,
            checks,
            c_eps_envelope: f64::NEG_INFINITY,
        })
    }

    /// Evaluate all applicable checks at one sampled state, given its
    /// evolving metric `g` and the background derivative `χ_t`.
    pub fn observe(
        &mut self,
        problem: &FlowProblem,
        state: &FlowState,
        g: &MetricField,
        chi: &ScalarField,
        r: &ScalarField,
    ) -> Vec<FlagSample> {
        let n = g.n();
        let t = state.t;
        let nu = self.nu.as_f64();
        let tol = self.cfg.tolerance;
        let slack = self.cfg.curvature_slack;
        let mut flags = Vec::with_capacity(6);

        // (1) Scalar-curvature lower bound: R ≥ −νn − C₀ e^{−νt}.
        {
            let bound = -nu - self.c0 * (-nu * t).exp();
            let (value, loc) = argmin_field(r.values(), n);
            let margin = value - bound + slack;
            self.checks[CHECK_SCALAR].update(margin, (t, loc.0, loc.1));
            flags.push(FlagSample {
                name: "scalar_lower_bound",
                holds: margin >= -tol,
                margin,
            });
        }

        // (2) Volume-form upper bound (ν = 0): log g(t) − log g(0) ≤ C₀ t.
        if self.nu == Nu::Zero {
            let mut worst = f64::INFINITY;
            let mut worst_p = 0usize;
            for (p, (gv, lg0)) in g.values().iter().zip(&self.log_g0).enumerate() {
                let m = self.c0 * t + lg0 - gv.ln();
                if m < worst {
                    worst = m;
                    worst_p = p;
                }
            }
            let margin = worst + t * slack + slack;
            self.checks[CHECK_VOLUME].update(margin, (t, worst_p % n, worst_p / n));
            flags.push(FlagSample {
                name: "volume_upper_bound",
                holds: margin >= -tol,
                margin,
            });
        }

        // (3) Linear family: min Q non-decreasing, Q = (T′−t)φ̇ + φ + nt.
        if let Some(t_prime) = self.linear_t_prime {
            let mut worst = f64::INFINITY;
            let mut worst_p = 0usize;
            for (p, (pd, ph)) in state
                .phidot
                .values()
                .iter()
                .zip(state.phi.values())
                .enumerate()
            {
                let q = (t_prime - t) * pd + ph + t;
                if q < worst {
                    worst = q;
                    worst_p = p;
                }
            }
            let min_q0 = *self.min_q0.get_or_insert(worst);
            let margin = worst - min_q0;
            self.checks[CHECK_Q_MONOTONE].update(margin, (t, worst_p % n, worst_p / n));
            flags.push(FlagSample {
                name: "q_monotone",
                holds: margin >= -tol,
                margin,
            });
        }

        // (4) Exponential family: (e^t − 1)φ̇ − φ − nt ≤ 0.
        if self.exponential {
            let growth = t.exp() - 1.0;
            let mut worst = f64::NEG_INFINITY;
            let mut worst_p = 0usize;
            for (p, (pd, ph)) in state
                .phidot
                .values()
                .iter()
                .zip(state.phi.values())
                .enumerate()
            {
                let v = growth * pd - ph - t;
                if v > worst {
                    worst = v;
                    worst_p = p;
                }
            }
            let margin = -worst;
            self.checks[CHECK_TSUJI].update(margin, (t, worst_p % n, worst_p / n));
            flags.push(FlagSample {
                name: "tsuji_combination",
                holds: margin >= -tol,
                margin,
            });
        }

        // (5) Trace-log inequality: the sampled slope of log max(tr_{ω₀} ω)
        // must not exceed max(Ĉ·tr_ω ω₀ + χ/g) − ν, up to slack.
        {
            let mut max_tr: f64 = f64::NEG_INFINITY;
            let mut bound: f64 = f64::NEG_INFINITY;
            for ((gv, g0v), cv) in g.values().iter().zip(self.g0.values()).zip(chi.values()) {
                max_tr = max_tr.max(gv / g0v);
                bound = bound.max(self.c_hat * g0v / gv + cv / gv);
            }
            let logtr = max_tr.ln();
            let bound = bound - nu;
            if let Some((tp, lp)) = self.prev_logtr {
                let dt = t - tp;
                if dt > 0.0 {
                    let rate = (logtr - lp) / dt;
                    let margin = bound - rate + slack;
                    self.checks[CHECK_TRACE_LOG].update(margin, (t, 0, 0));
                    flags.push(FlagSample {
                        name: "trace_log",
                        holds: margin >= -tol,
                        margin,
                    });
                }
            }
            self.prev_logtr = Some((t, logtr));
        }

        // (6) Degenerate-model lower bound: φ ≥ ε log s − C_ε on {s > floor}.
        if let (Some(check), Some(profile)) =
            (self.cfg.degeneracy.clone(), problem.degeneracy_profile())
        {
            let mut measured = f64::NEG_INFINITY;
            let mut worst_p = 0usize;
            for (p, (s, ph)) in profile
                .values()
                .iter()
                .zip(state.phi.values())
                .enumerate()
            {
                if *s > check.s_floor {
                    let v = check.epsilon * s.ln() - ph;
                    if v > measured {
                        measured = v;
                        worst_p = p;
                    }
                }
            }
            self.c_eps_envelope = self.c_eps_envelope.max(measured);
            let margin = check.c_cap - measured;
            self.checks[CHECK_DEGENERATE].update(margin, (t, worst_p % n, worst_p / n));
            flags.push(FlagSample {
                name: "degenerate_lower_bound",
                holds: margin >= -tol,
                margin,
            });
        }

        flags
    }

    pub fn report(&self) -> EstimateReport {
        EstimateReport {
            checks: self
                .checks
                .iter()
                .map(|c| c.outcome(self.cfg.tolerance))
                .collect(),
            degeneracy_c_eps: if self.c_eps_envelope.is_finite() {
                Some(self.c_eps_envelope)
            } else {
                None
            },
        }
    }
}

fn argmin_field(values: &[f64], n: usize) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, 0usize);
    for (p, v) in values.iter().enumerate() {
        if *v < best.0 {
            best = (*v, p);
        }
    }
    (best.0, (best.1 % n, best.1 / n))
}

/// Evaluate the suite over an already-collected trajectory.
pub fn estimate_suite(
    problem: &FlowProblem,
    states: &[FlowState],
    cfg: DiagnosticsConfig,
) -> Result<EstimateReport, DiagnosticsError> {
    let mut suite = EstimateSuite::new(problem, cfg)?;
    for state in states {
        let (bg, chi) = background_at(problem.family(), state.t)?;
        let (g, _) = metric_from_potential(&bg, &state.phi);
        let r = scalar_curvature(&g)?;
        suite.observe(problem, state, &g, &chi, &r);
    }
    Ok(suite.report())
}

// ---------------------------------------------------------------------------
// Trajectory assembly
// ---------------------------------------------------------------------------

pub struct DiagnosedRun {
    pub records: Vec<DiagnosticsRecord>,
    /// Sampled states, aligned with `records`.
    pub states: Vec<FlowState>,
    pub report: EstimateReport,
    pub final_state: FlowState,
    pub termination: crate::flow::Termination,
    pub steps_taken: u64,
}

/// Integrate and assemble one record per sample, evaluating the estimate
/// suite online. Sampled states always carry a positive metric, so the
/// per-sample curvature evaluations cannot fail.
pub fn run_with_diagnostics(
    problem: &FlowProblem,
    t_end: f64,
    schedule: &crate::flow::SampleSchedule,
    ctrl: &crate::flow::StepControl,
    cfg: DiagnosticsConfig,
) -> Result<DiagnosedRun, DiagnosticsError> {
    let mut suite = EstimateSuite::new(problem, cfg.clone())?;
    let grid = problem.grid();
    let (h0, g0) = if cfg.mabuchi {
        let (bg0, _) = background_at(problem.family(), 0.0)?;
        let (g0, _) = metric_from_potential(&bg0, problem.phi0());
        (Some(ricci_potential(grid, &g0)?), Some(g0))
    } else {
        (None, None)
    };
    let phi0 = problem.phi0().clone();

    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut sample_error: Option<DiagnosticsError> = None;
    let outcome = crate::flow::run_scheduled(problem, t_end, schedule, ctrl, |state| {
        if sample_error.is_some() {
            return;
        }
        match build_record(problem, state, &mut suite, &h0, &g0, &phi0) {
            Ok(rec) => {
                records.push(rec);
                states.push(state.clone());
            }
            Err(e) => sample_error = Some(e),
        }
    })?;
    if let Some(e) = sample_error {
        return Err(e);
    }
    Ok(DiagnosedRun {
        records,
        states,
        report: suite.report(),
        final_state: outcome.final_state,
        termination: outcome.termination,
        steps_taken: outcome.steps_taken,
    })
}

fn build_record(
    problem: &FlowProblem,
    state: &FlowState,
    suite: &mut EstimateSuite,
    h0: &Option<ScalarField>,
    g0: &Option<MetricField>,
    phi0: &ScalarField,
) -> Result<DiagnosticsRecord, DiagnosticsError> {
    let (bg, chi) = background_at(problem.family(), state.t)?;
    let (g, _) = metric_from_potential(&bg, &state.phi);
    let r = scalar_curvature(&g)?;
    let flags = suite.observe(problem, state, &g, &chi, &r);

    let mabuchi = match (h0, g0) {
        (Some(h0), Some(g0)) => {
            let psi = ScalarField::from_values(
                state.phi.n(),
                state
                    .phi
                    .values()
                    .iter()
                    .zip(phi0.values())
                    .map(|(a, b)| a - b)
                    .collect(),
            );
            mabuchi_energy(problem.grid(), g0, &psi, h0)?
        }
        _ => 0.0,
    };

    // Traces: max tr_{ω̂_t} ω = max(g/ω̂_t) and max tr_ω ω₀ = max(ω₀/g).
    let mut tr_bg_omega_max = f64::NEG_INFINITY;
    for (gv, bv) in g.values().iter().zip(bg.values()) {
        tr_bg_omega_max = tr_bg_omega_max.max(gv / bv.max(1e-300));
    }
    let mut tr_omega_bg_max = f64::NEG_INFINITY;
    for (gv, g0v) in g.values().iter().zip(suite.g0.values()) {
        tr_omega_bg_max = tr_omega_bg_max.max(g0v / gv);
    }
    let s_field = third_order(&g, &suite.g0)?;

    Ok(DiagnosticsRecord {
        t: state.t,
        dt: state.dt_last,
        phi_min: state.phi.min_value(),
        phi_max: state.phi.max_value(),
        phidot_min: state.phidot.min_value(),
        phidot_max: state.phidot.max_value(),
        r_min: r.min_value(),
        r_max: r.max_value(),
        volume: g.total_volume(),
        mabuchi,
        tr_bg_omega_max,
        tr_omega_bg_max,
        third_order_max: s_field.max_value(),
        flags,
    })
}

/// Mabuchi dissipation `∫ |∂φ̇|²_ω ωⁿ`, which in one complex dimension equals
/// the flat Dirichlet integrand `¼|∇φ̇|²` independent of the metric.
pub fn mabuchi_dissipation(phidot: &ScalarField) -> f64 {
    dirichlet_energy(phidot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{BackgroundFamily, FlowProblem, StepControl};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(n).unwrap()
    }

    #[test]
    fn ricci_potential_of_flat_metric_is_zero() {
        let g = MetricField::constant(grid(16), 2.0);
        let h0 = ricci_potential(grid(16), &g).unwrap();
        assert!(h0.linf_norm() < 1e-10);
    }

    #[test]
    fn ricci_potential_solves_poisson_and_normalizes() {
        let n = 32;
        let g = MetricField::from_fn(grid(n), |x, _| (0.1 * (2.0 * PI * x).cos()).exp());
        let h0 = ricci_potential(grid(n), &g).unwrap();
        // Residual: ¼Δ h0 must match the Ricci density −¼Δ log g.
        let lap_h = complex_hessian(&h0);
        let log_g = ScalarField::from_values(n, g.values().iter().map(|v| v.ln()).collect());
        let ric = complex_hessian(&log_g);
        let resid = lap_h
            .values()
            .iter()
            .zip(ric.values())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0_f64, f64::max);
        assert!(resid < 1e-9, "poisson residual {resid}");
        // Normalization: ∫ e^{h0} g = ∫ g.
        let weighted = ScalarField::from_values(
            n,
            h0.values()
                .iter()
                .zip(g.values())
                .map(|(h, gv)| h.exp() * gv)
                .collect(),
        );
        assert_relative_eq!(
            weighted.integrate(),
            g.total_volume(),
            max_relative = 1e-10
        );
        // In one complex dimension h0 = −log g + const; check up to a shift.
        let diff: Vec<f64> = h0
            .values()
            .iter()
            .zip(g.values())
            .map(|(h, gv)| h + gv.ln())
            .collect();
        let spread = diff.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - diff.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-9, "h0 + log g not constant: spread {spread}");
    }

    #[test]
    fn ricci_potential_is_shift_invariant_of_log_density() {
        let n = 16;
        let g1 = MetricField::from_fn(grid(n), |x, _| (0.1 * (2.0 * PI * x).cos()).exp());
        let g2 = g1.scale(std::f64::consts::E);
        let h1 = ricci_potential(grid(n), &g1).unwrap();
        let h2 = ricci_potential(grid(n), &g2).unwrap();
        // Scaling g multiplies e^{h} normalization but the shape is shared.
        let d: Vec<f64> = h1
            .values()
            .iter()
            .zip(h2.values())
            .map(|(a, b)| a - b)
            .collect();
        let spread = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - d.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-9);
    }

    #[test]
    fn mabuchi_energy_basics() {
        let n = 16;
        let g0 = MetricField::from_fn(grid(n), |x, _| (0.1 * (2.0 * PI * x).cos()).exp());
        let h0 = ricci_potential(grid(n), &g0).unwrap();
        let zero = ScalarField::zeros(grid(n));
        assert_eq!(mabuchi_energy(grid(n), &g0, &zero, &h0).unwrap(), 0.0);
        // Constants do not move the metric.
        let c = ScalarField::constant(grid(n), 0.7);
        let e = mabuchi_energy(grid(n), &g0, &c, &h0).unwrap();
        assert!(e.abs() < 1e-14);
        // Invariance under φ → φ + c for nontrivial φ.
        let phi = ScalarField::from_fn(grid(n), |x, _| 0.02 * (2.0 * PI * x).sin());
        let phi_shift = ScalarField::from_fn(grid(n), |x, _| 0.02 * (2.0 * PI * x).sin() + 1.3);
        let a = mabuchi_energy(grid(n), &g0, &phi, &h0).unwrap();
        let b = mabuchi_energy(grid(n), &g0, &phi_shift, &h0).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-13);
    }

    #[test]
    fn mabuchi_rejects_degenerate_argument() {
        let n = 16;
        let g0 = MetricField::constant(grid(n), 1.0);
        let h0 = ScalarField::zeros(grid(n));
        let phi = ScalarField::from_fn(grid(n), |x, _| (2.0 / (PI * PI)) * (2.0 * PI * x).cos());
        assert!(mabuchi_energy(grid(n), &g0, &phi, &h0).is_err());
    }

    #[test]
    fn third_order_vanishes_for_conformal_constants() {
        let n = 32;
        let bg = MetricField::from_fn(grid(n), |x, y| {
            1.0 + 0.2 * (2.0 * PI * x).cos() + 0.1 * (2.0 * PI * y).sin()
        });
        let s = third_order(&bg, &bg).unwrap();
        assert!(s.linf_norm() < 1e-24);
        let s2 = third_order(&bg.scale(3.0), &bg).unwrap();
        assert!(s2.linf_norm() < 1e-24);
    }

    #[test]
    fn third_order_matches_analytic_value() {
        let n = 128;
        let bg = MetricField::constant(grid(n), 1.0);
        let g = MetricField::from_fn(grid(n), |x, _| (0.1 * (2.0 * PI * x).cos()).exp());
        let s = third_order(&g, &bg).unwrap();
        // S = ¼ u_x² e^{-u} with u = 0.1 cos(2πx) (derived from T = g·u_x).
        let exact = ScalarField::from_fn(grid(n), |x, _| {
            let u = 0.1 * (2.0 * PI * x).cos();
            let ux = -0.1 * 2.0 * PI * (2.0 * PI * x).sin();
            0.25 * ux * ux * (-u).exp()
        });
        let err = s.linf_distance(&exact);
        assert!(err < 2e-3, "third-order error {err}");
    }

    #[test]
    fn decay_fit_values() {
        let exact: Vec<(f64, f64)> = (0..40).map(|k| {
            let t = k as f64 * 0.25;
            (t, (-t).exp())
        }).collect();
        let rate = decay_fit(&exact).unwrap();
        assert!((rate + 1.0).abs() < 1e-9, "rate {rate}");

        let constant: Vec<(f64, f64)> = (0..40).map(|k| (k as f64 * 0.25, 2.5)).collect();
        let rate = decay_fit(&constant).unwrap();
        assert!(rate.abs() < 1e-9);

        // 5 t e^{-t} on [10, 20]: trailing half is [15, 20] where the fitted
        // slope is −1 + d(log t)/dt ≈ −0.943.
        let poly: Vec<(f64, f64)> = (0..=80)
            .map(|k| {
                let t = 10.0 + k as f64 * 0.125;
                (t, 5.0 * t * (-t).exp())
            })
            .collect();
        let rate = decay_fit(&poly).unwrap();
        assert!((rate + 0.9429).abs() < 2e-3, "rate {rate}");
        assert!((-1.05..=-0.90).contains(&rate), "rate {rate}");
    }

    #[test]
    fn decay_fit_error_paths() {
        assert!(matches!(
            decay_fit(&[(0.0, 1.0); 4]),
            Err(DiagnosticsError::TooFewSamples(4))
        ));
        let mut series: Vec<(f64, f64)> = (0..16).map(|k| (k as f64, 1.0)).collect();
        series[12].1 = -1.0;
        assert!(matches!(
            decay_fit(&series),
            Err(DiagnosticsError::NonPositiveSample { index: 12, .. })
        ));
    }

    fn flat_static_problem(n: usize, nu: Nu, phi0: ScalarField) -> FlowProblem {
        let g = grid(n);
        FlowProblem::new(
            g,
            BackgroundFamily::Static {
                omega_hat: MetricField::constant(g, 1.0),
            },
            MetricField::constant(g, 1.0),
            nu,
            phi0,
            None,
        )
        .unwrap()
    }

    #[test]
    fn estimate_suite_on_homogeneous_run_all_hold() {
        let p = flat_static_problem(16, Nu::One, ScalarField::constant(grid(16), 1.0));
        let ctrl = StepControl {
            dt_max: Some(0.05),
            dt_cap_c: 1e9,
            ..Default::default()
        };
        let (states, _) = crate::flow::run_collect(&p, 1.0, 0.1, &ctrl).unwrap();
        let report = estimate_suite(&p, &states, DiagnosticsConfig::default()).unwrap();
        assert!(report.all_applicable_hold(), "{report:?}");
        // Flat metric: the scalar bound holds with positive margin for t > 0.
        let scalar = report.check("scalar_lower_bound").unwrap();
        assert!(scalar.applicable && scalar.holds);
    }

    #[test]
    fn estimate_suite_flags_corrupted_state() {
        let g = grid(16);
        let p = FlowProblem::new(
            g,
            BackgroundFamily::Exponential {
                omega0: MetricField::constant(g, 1.0),
                omega_inf: ScalarField::constant(g, 0.5),
            },
            MetricField::constant(g, 1.0),
            Nu::One,
            ScalarField::zeros(g),
            None,
        )
        .unwrap();
        let ctrl = StepControl {
            dt_cap_c: 0.5,
            ..Default::default()
        };
        let (mut states, _) = crate::flow::run_collect(&p, 1.0, 0.25, &ctrl).unwrap();
        // Uncorrupted: the Tsuji combination holds.
        let clean = estimate_suite(&p, &states, DiagnosticsConfig::default()).unwrap();
        assert!(clean.check("tsuji_combination").unwrap().holds);
        // Overwrite φ̇ with +10 at a late sample: the combination must flag.
        let last = states.len() - 1;
        states[last].phidot = ScalarField::constant(g, 10.0);
        let report = estimate_suite(&p, &states, DiagnosticsConfig::default()).unwrap();
        let tsuji = report.check("tsuji_combination").unwrap();
        assert!(tsuji.applicable && !tsuji.holds);
        assert!(tsuji.worst_margin < 0.0);
    }

    #[test]
    fn diagnosed_run_produces_records_and_csv() {
        let phi0 = ScalarField::from_fn(grid(16), |x, _| 0.03 * (2.0 * PI * x).sin());
        let p = flat_static_problem(16, Nu::Zero, phi0);
        let ctrl = StepControl {
            dt_cap_c: 0.5,
            ..Default::default()
        };
        let cfg = DiagnosticsConfig {
            mabuchi: true,
            ..Default::default()
        };
        let run =
            run_with_diagnostics(&p, 0.5, &crate::flow::SampleSchedule::Every(0.1), &ctrl, cfg)
                .unwrap();
        assert_eq!(run.records.len(), 6);
        assert!(run.report.all_applicable_hold());
        // Mabuchi energy is non-increasing along the flow.
        for w in run.records.windows(2) {
            assert!(w[1].mabuchi <= w[0].mabuchi + 1e-9);
        }
        let line = run.records[0].csv_line();
        assert_eq!(line.split(',').count(), 14);
        assert!(DiagnosticsRecord::CSV_HEADER.starts_with("t,dt,"));
        // All record entries are finite.
        for rec in &run.records {
            for v in [
                rec.phi_min,
                rec.phi_max,
                rec.phidot_min,
                rec.phidot_max,
                rec.r_min,
                rec.r_max,
                rec.volume,
                rec.mabuchi,
                rec.tr_bg_omega_max,
                rec.tr_omega_bg_max,
                rec.third_order_max,
            ] {
                assert!(v.is_finite());
            }
        }
    }

    #[test]
    fn mabuchi_decrease_rate_matches_dissipation() {
        let phi0 = ScalarField::from_fn(grid(32), |x, _| 0.05 * (2.0 * PI * x).sin());
        let p = flat_static_problem(32, Nu::Zero, phi0);
        let ctrl = StepControl {
            dt_cap_c: 0.5,
            ..Default::default()
        };
        let cfg = DiagnosticsConfig {
            mabuchi: true,
            ..Default::default()
        };
        let sample = 0.005;
        let run =
            run_with_diagnostics(&p, 0.2, &crate::flow::SampleSchedule::Every(sample), &ctrl, cfg)
                .unwrap();
        // Collect dissipation at samples by re-running with state access.
        let (states, _) = crate::flow::run_collect(&p, 0.2, sample, &ctrl).unwrap();
        let mut checked = 0;
        for k in 1..run.records.len() {
            let dt = run.records[k].t - run.records[k - 1].t;
            let rate = (run.records[k].mabuchi - run.records[k - 1].mabuchi) / dt;
            let diss = 0.5
                * (mabuchi_dissipation(&states[k].phidot)
                    + mabuchi_dissipation(&states[k - 1].phidot));
            if rate.abs() > 1e-10 && diss > 1e-10 {
                let rel = (rate + diss).abs() / diss;
                assert!(rel < 0.1, "k={k}: rate {rate} vs -{diss} (rel {rel})");
                checked += 1;
            }
        }
        assert!(checked > 5, "only {checked} resolved samples");
    }
}
