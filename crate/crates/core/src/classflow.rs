//! Cohomology-level flow: evolve `[ω(t)]`, compute the maximal existence
//! time exactly, classify what happens there, and iterate blow-downs.
//!
//! The class of the unnormalized flow moves along `[ω₀] − t·c₁`; it stays
//! Kähler exactly while every declared cone constraint holds, so the maximal
//! time is the first failure among finitely many linear constraints (curves,
//! reference) and one quadratic constraint (self-intersection). Linear
//! failures give exact rational times; the quadratic root is reported as an
//! exact rational when it is one, else as a certified interval of width below
//! `2⁻⁶⁴` produced by exact sign bisection.

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{LatticeError, RationalClass, SurfaceGeometry};
use crate::rational::{exact_sqrt, format_rational, int, rat, to_f64, Rational};

/// Normalization of the flow: `Zero` is the unnormalized equation,
/// `One` the volume-normalized rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Nu {
    Zero,
    One,
}

impl Nu {
    pub fn as_f64(self) -> f64 {
        match self {
            Nu::Zero => 0.0,
            Nu::One => 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassFlowError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("time must be nonnegative")]
    NegativeTime,
    #[error("initial class is not Kähler for the declared data")]
    InitialClassNotKahler,
    #[error("operation requires the unnormalized path (nu = 0)")]
    RequiresUnnormalized,
    #[error("classification failure: {0}")]
    Classification(String),
}

/// The class path `[ω(t)]` for a chosen normalization.
#[derive(Debug, Clone)]
pub struct ClassPath {
    omega0: RationalClass,
    c1: RationalClass,
    nu: Nu,
}

impl ClassPath {
    /// Build the path for `omega0` on `geom`; validates that the initial
    /// class is Kähler and stores `c1 = −K`.
    pub fn new(
        geom: &SurfaceGeometry,
        omega0: RationalClass,
        nu: Nu,
    ) -> Result<Self, ClassFlowError> {
        if !geom.is_kahler(&omega0)? {
            return Err(ClassFlowError::InitialClassNotKahler);
        }
        Ok(ClassPath {
            omega0,
            c1: geom.c1(),
            nu,
        })
    }

    pub fn omega0(&self) -> &RationalClass {
        &self.omega0
    }

    pub fn c1(&self) -> &RationalClass {
        &self.c1
    }

    pub fn nu(&self) -> Nu {
        self.nu
    }

    /// Exact class at rational time (unnormalized path only).
    pub fn class_at_exact(&self, t: &Rational) -> Result<RationalClass, ClassFlowError> {
        if t.is_negative() {
            return Err(ClassFlowError::NegativeTime);
        }
        match self.nu {
            Nu::Zero => Ok(self.omega0.sub(&self.c1.scale(t))),
            Nu::One => Err(ClassFlowError::RequiresUnnormalized),
        }
    }

    /// Class at real time; for `nu = 1` this is
    /// `e^{−t}[ω₀] + (1 − e^{−t})(−c₁)`.
    pub fn class_at_real(&self, t: f64) -> Result<Vec<f64>, ClassFlowError> {
        if t < 0.0 {
            return Err(ClassFlowError::NegativeTime);
        }
        let w0 = self.omega0.to_f64();
        let c1 = self.c1.to_f64();
        Ok(match self.nu {
            Nu::Zero => w0.iter().zip(&c1).map(|(a, b)| a - t * b).collect(),
            Nu::One => {
                let decay = (-t).exp();
                w0.iter()
                    .zip(&c1)
                    .map(|(a, b)| decay * a + (1.0 - decay) * (-b))
                    .collect()
            }
        })
    }
}

/// An exactly represented time value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactTime {
    Infinite,
    Rational {
        #[serde(serialize_with = "ser_rational")]
        value: Rational,
    },
    /// Certified bracket around an irrational value, width below `2⁻⁶⁴`.
    Interval {
        #[serde(serialize_with = "ser_rational")]
        lo: Rational,
        #[serde(serialize_with = "ser_rational")]
        hi: Rational,
    },
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}

impl ExactTime {
    pub fn rational(r: Rational) -> Self {
        ExactTime::Rational { value: r }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            ExactTime::Infinite => f64::INFINITY,
            ExactTime::Rational { value } => to_f64(value),
            ExactTime::Interval { lo, hi } => 0.5 * (to_f64(lo) + to_f64(hi)),
        }
    }

    /// Exact sum; an interval operand widens the result accordingly.
    pub fn add(&self, other: &ExactTime) -> ExactTime {
        use ExactTime::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Rational { value: a }, Rational { value: b }) => Rational { value: a + b },
            (Rational { value: a }, Interval { lo, hi })
            | (Interval { lo, hi }, Rational { value: a }) => Interval {
                lo: lo + a,
                hi: hi + a,
            },
            (Interval { lo: a, hi: b }, Interval { lo: c, hi: d }) => Interval {
                lo: a + c,
                hi: b + d,
            },
        }
    }
}

/// Width target for certified intervals: `2^-64`.
fn interval_width_target() -> Rational {
    Rational::new(1.into(), num_bigint::BigInt::from(2).pow(64))
}

/// Smallest positive root of `q(t) = c0 + c1 t + c2 t²` given `q(0) > 0`,
/// or `None` when `q` stays positive for all `t > 0`.
fn smallest_positive_root(c0: &Rational, c1: &Rational, c2: &Rational) -> Option<ExactTime> {
    debug_assert!(c0.is_positive());
    if c2.is_zero() {
        if !c1.is_negative() {
            return None;
        }
        return Some(ExactTime::rational(-c0 / c1));
    }
    let four = int(4);
    let two = int(2);
    let disc = c1 * c1 - &four * c2 * c0;
    if c2.is_positive() {
        if disc.is_negative() {
            return None;
        }
        let vertex = -c1 / (&two * c2);
        if !vertex.is_positive() {
            // Both roots nonpositive.
            return None;
        }
        if disc.is_zero() {
            return Some(ExactTime::rational(vertex));
        }
        if let Some(sq) = exact_sqrt(&disc) {
            let root = (-c1 - sq) / (&two * c2);
            debug_assert!(root.is_positive());
            return Some(ExactTime::rational(root));
        }
        // q(0) > 0, q(vertex) < 0: bisect in (0, vertex).
        Some(bisect_root(c0, c1, c2, Rational::zero(), vertex))
    } else {
        // Opens downward: q > 0 between the roots and 0 lies inside, so the
        // larger root is the first positive failure.
        debug_assert!(disc.is_positive());
        if let Some(sq) = exact_sqrt(&disc) {
            let root = (-c1 - &sq) / (&two * c2); // c2 < 0 flips the order
            debug_assert!(root.is_positive());
            return Some(ExactTime::rational(root));
        }
        let mut hi = int(1);
        while eval_quadratic(c0, c1, c2, &hi).is_positive() {
            hi = &hi * &two;
        }
        if eval_quadratic(c0, c1, c2, &hi).is_zero() {
            return Some(ExactTime::rational(hi));
        }
        Some(bisect_root(c0, c1, c2, Rational::zero(), hi))
    }
}

fn eval_quadratic(c0: &Rational, c1: &Rational, c2: &Rational, t: &Rational) -> Rational {
    c0 + c1 * t + c2 * t * t
}

/// Exact sign bisection: `q(lo) > 0 >= q(hi)` is maintained.
fn bisect_root(c0: &Rational, c1: &Rational, c2: &Rational, lo: Rational, hi: Rational) -> ExactTime {
    let target = interval_width_target();
    let (mut lo, mut hi) = (lo, hi);
    let half = rat(1, 2);
    while &hi - &lo >= target {
        let mid = (&lo + &hi) * &half;
        let v = eval_quadratic(c0, c1, c2, &mid);
        if v.is_zero() {
            return ExactTime::rational(mid);
        }
        if v.is_positive() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ExactTime::Interval { lo, hi }
}

/// Maximal existence time of the unnormalized class path: the first failure
/// among `a(t)·C > 0` per declared curve, `a(t)·ref > 0`, and `a(t)² > 0`.
pub fn maximal_time(
    geom: &SurfaceGeometry,
    path: &ClassPath,
) -> Result<ExactTime, ClassFlowError> {
    if path.nu != Nu::Zero {
        return Err(ClassFlowError::RequiresUnnormalized);
    }
    if !geom.curve_list_sufficient() {
        return Err(ClassFlowError::Lattice(
            LatticeError::CurveListNotSufficient,
        ));
    }
    let w0 = &path.omega0;
    let c1 = &path.c1;

    // Linear constraints: (w0 - t c1) . v > 0 binds iff c1 . v > 0.
    let mut linear_min: Option<Rational> = None;
    let mut consider = |v: &RationalClass| {
        let slope = geom.pair(c1, v);
        if slope.is_positive() {
            let bound = geom.pair(w0, v) / slope;
            if linear_min.as_ref().is_none_or(|m| &bound < m) {
                linear_min = Some(bound);
            }
        }
    };
    for c in geom.curves() {
        consider(&c.class);
    }
    consider(geom.reference_kahler());

    // Quadratic constraint (w0 - t c1)^2 > 0.
    let q0 = geom.pair(w0, w0);
    let q1 = -int(2) * geom.pair(w0, c1);
    let q2 = geom.pair(c1, c1);
    let quad = smallest_positive_root(&q0, &q1, &q2);

    Ok(match (linear_min, quad) {
        (None, None) => ExactTime::Infinite,
        (Some(r), None) => ExactTime::rational(r),
        (None, Some(q)) => q,
        (Some(r), Some(ExactTime::Rational { value })) => {
            ExactTime::rational(if value < r { value } else { r })
        }
        (Some(r), Some(ExactTime::Interval { lo, hi })) => {
            if hi <= r {
                ExactTime::Interval { lo, hi }
            } else if lo >= r {
                ExactTime::rational(r)
            } else if !eval_quadratic(&q0, &q1, &q2, &r).is_negative() {
                // q(r) >= 0: the root lies at or beyond r.
                ExactTime::rational(r)
            } else {
                // q(r) < 0: the root is inside (lo, r); re-bracket there.
                bisect_root(&q0, &q1, &q2, lo, r)
            }
        }
        (Some(_), Some(ExactTime::Infinite)) => unreachable!("roots are finite"),
    })
}

/// Quadratic coefficients `(c0, c1, c2)` of `Vol(t) = ([ω₀] + t K)²`.
pub fn volume_polynomial(
    geom: &SurfaceGeometry,
    path: &ClassPath,
) -> (Rational, Rational, Rational) {
    let k = geom.canonical_class();
    let w0 = &path.omega0;
    (
        geom.pair(w0, w0),
        int(2) * geom.pair(w0, k),
        geom.pair(k, k),
    )
}

/// Order of vanishing of the volume polynomial at the singular time:
/// 0 (positive volume persists), 1 (simple zero), or 2 (double zero).
pub fn volume_vanishing_order(
    vol: &(Rational, Rational, Rational),
    time: &ExactTime,
) -> Option<u32> {
    let (c0, c1, c2) = vol;
    match time {
        ExactTime::Infinite => None,
        ExactTime::Rational { value } => {
            let v = eval_quadratic(c0, c1, c2, value);
            if !v.is_zero() {
                return Some(0);
            }
            let deriv = c1 + int(2) * c2 * value;
            Some(if deriv.is_zero() { 2 } else { 1 })
        }
        ExactTime::Interval { .. } => {
            // An interval time arises only from an irrational simple root of
            // the volume quadratic, where the zero is first order.
            Some(1)
        }
    }
}

/// What the flow does at its singular time.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SingularityKind {
    NoSingularity,
    Contraction {
        curves: Vec<String>,
        limit_class: Vec<String>,
    },
    CollapseFibration {
        /// Limit class coordinates when the singular time is rational.
        fiber_class: Option<Vec<String>>,
        /// Coefficient `C1` in `Vol = C1 (T−t) + C2 (T−t)²`, when rational.
        #[serde(serialize_with = "ser_opt_rational")]
        volume_linear_coefficient: Option<Rational>,
    },
    CollapseToPoint {
        is_fano: bool,
    },
}

fn ser_opt_rational<S: serde::Serializer>(
    r: &Option<Rational>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match r {
        Some(v) => s.serialize_some(&format_rational(v)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularityReport {
    #[serde(rename = "T")]
    pub time: ExactTime,
    #[serde(flatten)]
    pub kind: SingularityKind,
    /// Coefficients of `Vol(t)` in ascending degree, as `"p/q"` strings.
    pub volume_poly: [String; 3],
    pub volume_vanishing_order: Option<u32>,
}

impl SingularityReport {
    pub fn volume_poly_rational(&self) -> (Rational, Rational, Rational) {
        let p = |s: &String| crate::rational::parse_rational(s).expect("own format");
        (
            p(&self.volume_poly[0]),
            p(&self.volume_poly[1]),
            p(&self.volume_poly[2]),
        )
    }
}

/// Classify the singularity of the unnormalized class path on `geom`.
pub fn classify_singularity(
    geom: &SurfaceGeometry,
    path: &ClassPath,
) -> Result<SingularityReport, ClassFlowError> {
    let time = maximal_time(geom, path)?;
    let vol = volume_polynomial(geom, path);
    let fmt3 = [
        format_rational(&vol.0),
        format_rational(&vol.1),
        format_rational(&vol.2),
    ];
    let order = volume_vanishing_order(&vol, &time);

    let kind = match &time {
        ExactTime::Infinite => SingularityKind::NoSingularity,
        ExactTime::Interval { .. } => {
            // Linear constraints always fail at rational times, so an
            // irrational T means the self-intersection hit zero: a simple
            // zero of the volume with nonzero limit class.
            SingularityKind::CollapseFibration {
                fiber_class: None,
                volume_linear_coefficient: None,
            }
        }
        ExactTime::Rational { value } => {
            let alpha = path.class_at_exact(value)?;
            let alpha_sq = geom.pair(&alpha, &alpha);
            if alpha_sq.is_positive() {
                let annihilated: Vec<_> = geom
                    .curves()
                    .iter()
                    .filter(|c| geom.pair(&alpha, &c.class).is_zero())
                    .collect();
                if annihilated.is_empty() {
                    return Err(ClassFlowError::Classification(
                        "limit class has positive square but annihilates no declared curve"
                            .into(),
                    ));
                }
                for c in &annihilated {
                    if !geom.is_minus_one_curve(&c.class)? {
                        return Err(ClassFlowError::Classification(format!(
                            "annihilated class `{}` is not a (-1)-curve",
                            c.label
                        )));
                    }
                }
                for i in 0..annihilated.len() {
                    for j in 0..i {
                        if !geom
                            .pair(&annihilated[i].class, &annihilated[j].class)
                            .is_zero()
                        {
                            return Err(ClassFlowError::Classification(format!(
                                "annihilated curves `{}`, `{}` are not disjoint",
                                annihilated[i].label, annihilated[j].label
                            )));
                        }
                    }
                }
                SingularityKind::Contraction {
                    curves: annihilated.iter().map(|c| c.label.clone()).collect(),
                    limit_class: alpha.coords().iter().map(format_rational).collect(),
                }
            } else if alpha.is_zero() {
                SingularityKind::CollapseToPoint {
                    is_fano: geom.is_kahler(&geom.c1())?,
                }
            } else {
                // Vol'(T) with Vol written in (T - t): C1 = -(c1 + 2 c2 T).
                let c1lin = -(vol.1.clone() + int(2) * &vol.2 * value);
                SingularityKind::CollapseFibration {
                    fiber_class: Some(alpha.coords().iter().map(format_rational).collect()),
                    volume_linear_coefficient: Some(c1lin),
                }
            }
        }
    };
    Ok(SingularityReport {
        time,
        kind,
        volume_poly: fmt3,
        volume_vanishing_order: order,
    })
}

/// One step of the minimal-model iteration.
#[derive(Debug, Clone, Serialize)]
pub struct MmpStep {
    pub rank: usize,
    pub entering_class: Vec<String>,
    pub report: SingularityReport,
    /// Cumulative flow time at the end of this step.
    pub cumulative_time: ExactTime,
}

/// Terminal state of an [`MmpTrace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MmpOutcome {
    /// Flow exists for all time; no declared curve obstructs. The verdict is
    /// relative to the declared curve list.
    Minimal,
    Collapsed,
}

#[derive(Debug, Clone, Serialize)]
pub struct MmpTrace {
    pub steps: Vec<MmpStep>,
    pub outcome: MmpOutcome,
    /// Final lattice rank.
    pub final_rank: usize,
}

impl MmpTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}

/// Run the surface minimal-model iteration: classify, contract annihilated
/// exceptional curves, push the limit class down, repeat. Terminates in at
/// most `rank` steps.
pub fn mmp_run(
    geom: &SurfaceGeometry,
    omega0: RationalClass,
) -> Result<MmpTrace, ClassFlowError> {
    let mut geom = geom.clone();
    let mut omega = omega0;
    let mut steps = Vec::new();
    let mut cumulative = ExactTime::rational(Rational::zero());
    let max_steps = geom.rank() + 1;

    for _ in 0..max_steps {
        let path = ClassPath::new(&geom, omega.clone(), Nu::Zero)?;
        let report = classify_singularity(&geom, &path)?;
        cumulative = cumulative.add(&report.time);
        let entering: Vec<String> = omega.coords().iter().map(format_rational).collect();
        let rank = geom.rank();
        match &report.kind {
            SingularityKind::NoSingularity => {
                steps.push(MmpStep {
                    rank,
                    entering_class: entering,
                    report,
                    cumulative_time: ExactTime::Infinite,
                });
                return Ok(MmpTrace {
                    steps,
                    outcome: MmpOutcome::Minimal,
                    final_rank: rank,
                });
            }
            SingularityKind::CollapseFibration { .. } | SingularityKind::CollapseToPoint { .. } => {
                steps.push(MmpStep {
                    rank,
                    entering_class: entering,
                    report,
                    cumulative_time: cumulative.clone(),
                });
                return Ok(MmpTrace {
                    steps,
                    outcome: MmpOutcome::Collapsed,
                    final_rank: rank,
                });
            }
            SingularityKind::Contraction { curves, .. } => {
                let classes: Vec<RationalClass> = curves
                    .iter()
                    .map(|label| {
                        geom.curve_by_label(label)
                            .expect("labels come from this geometry")
                            .class
                            .clone()
                    })
                    .collect();
                let t = match &report.time {
                    ExactTime::Rational { value } => value.clone(),
                    _ => {
                        return Err(ClassFlowError::Classification(
                            "contraction at non-rational time".into(),
                        ))
                    }
                };
                let alpha = path.class_at_exact(&t)?;
                let (down, proj) = geom.blow_down(&classes)?;
                let pushed = proj.map_orthogonal(&geom, &alpha)?;
                if !down.is_kahler(&pushed)? {
                    return Err(ClassFlowError::Classification(
                        "pushed-down limit class fails the declared cone test".into(),
                    ));
                }
                steps.push(MmpStep {
                    rank,
                    entering_class: entering,
                    report,
                    cumulative_time: cumulative.clone(),
                });
                geom = down;
                omega = pushed;
            }
        }
    }
    Err(ClassFlowError::Classification(
        "minimal-model iteration exceeded the rank bound".into(),
    ))
}
