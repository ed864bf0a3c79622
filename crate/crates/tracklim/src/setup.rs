//! Problem assembly: from plant and reference coefficients to the mode set,
//! interpolation data, and start-value classification the solvers consume.
//!
//! The feasible error signals are continuous, vanish at infinity, and share
//! three kinds of interpolation data determined by the loop:
//!
//! * at each plant zero `z` in the open right half plane, the error
//!   transform equals the reference transform: `ê(z) = ŵ(z)`;
//! * at each plant pole in the open right half plane, `ê = 0`;
//! * at each reference zero in the open right half plane, `ê = 0`.
//!
//! Each such point `x + iy` (taken with `y >= 0`) contributes one decaying
//! cosine mode and, when `y > 0`, one sine mode. Pairing an error signal
//! against a mode reads off the real or (negated) imaginary part of `ê` at
//! the point, which is how the interpolation data enters the dual problems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratfun::{self, ModeKind, PFTerm, Poly, RatFun};

/// Points with |Re| below this (relative) tolerance cannot be classified as
/// left or right half plane and are rejected.
pub const AXIS_TOL: f64 = 1e-8;

/// Interpolation points closer than this (relative) are not distinct.
pub const DISTINCT_TOL: f64 = 1e-7;

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// The five peak measures of a tracking error signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// sup |e|
    #[serde(rename = "ma")]
    MaxAmplitude,
    /// sup e, clipped below at 0
    #[serde(rename = "pos")]
    PositivePeak,
    /// sup (-e), clipped below at 0
    #[serde(rename = "os")]
    Overshoot,
    /// sup (e - w), clipped below at 0
    #[serde(rename = "us")]
    Undershoot,
    /// (sup e - inf e) / 2
    #[serde(rename = "fl")]
    Fluctuation,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::MaxAmplitude,
        Criterion::PositivePeak,
        Criterion::Overshoot,
        Criterion::Undershoot,
        Criterion::Fluctuation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::MaxAmplitude => "ma",
            Criterion::PositivePeak => "pos",
            Criterion::Overshoot => "os",
            Criterion::Undershoot => "us",
            Criterion::Fluctuation => "fl",
        }
    }

    pub fn parse(name: &str) -> Result<Criterion> {
        match name.trim().to_ascii_lowercase().as_str() {
            "ma" => Ok(Criterion::MaxAmplitude),
            "pos" => Ok(Criterion::PositivePeak),
            "os" => Ok(Criterion::Overshoot),
            "us" => Ok(Criterion::Undershoot),
            "fl" => Ok(Criterion::Fluctuation),
            other => Err(Error::UnknownCriterion {
                name: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Modes
// ---------------------------------------------------------------------------

/// Which interpolation constraint a mode came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSource {
    PlantZero,
    PlantPole,
    RefZero,
}

/// A decaying oscillatory basis function `e^{-x t} cos(y t)` or
/// `e^{-x t} sin(y t)` with `x > 0`, `y >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub x: f64,
    pub y: f64,
    pub kind: ModeKind,
    pub source: ModeSource,
}

impl Mode {
    pub fn eval(&self, t: f64) -> f64 {
        let envelope = (-self.x * t).exp();
        match self.kind {
            ModeKind::Cos => envelope * (self.y * t).cos(),
            ModeKind::Sin => envelope * (self.y * t).sin(),
        }
    }

    /// Full-line integral of the mode over [0, inf).
    pub fn mass(&self) -> f64 {
        ratfun::mode_mass(self.x, self.y, self.kind)
    }

    /// Integral of the mode over [a, b], closed form.
    pub fn seg_mass(&self, a: f64, b: f64) -> f64 {
        let z = Complex64::new(self.x, self.y);
        let i = ratfun::seg_integral(z, a, b);
        match self.kind {
            ModeKind::Cos => i.re,
            ModeKind::Sin => -i.im,
        }
    }

    /// Integral of `t * mode(t)` over [a, b], closed form.
    pub fn seg_mass_t(&self, a: f64, b: f64) -> f64 {
        let z = Complex64::new(self.x, self.y);
        let i = ratfun::seg_integral_t(z, a, b);
        match self.kind {
            ModeKind::Cos => i.re,
            ModeKind::Sin => -i.im,
        }
    }

    pub fn point(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

// ---------------------------------------------------------------------------
// Start-value classification
// ---------------------------------------------------------------------------

/// What the loop structure forces on the initial error value `e(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Biproper plant, reference with unit relative degree: `e(0)` is free.
    FreeStart,
    /// Strictly proper plant, reference with unit relative degree:
    /// `e(0) = w(0+)`.
    PinnedStart,
    /// Reference relative degree two or more: `e(0) = 0`.
    ZeroStart,
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

/// Piecewise-linear function of time with constant extension outside the
/// breakpoint range.
#[derive(Debug, Clone)]
pub struct Pwl {
    /// (t, value) pairs, t strictly increasing.
    pub points: Vec<(f64, f64)>,
}

impl Pwl {
    pub fn constant(v: f64) -> Pwl {
        Pwl {
            points: vec![(0.0, v)],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let idx = pts.partition_point(|&(ti, _)| ti <= t);
        let (t0, v0) = pts[idx - 1];
        let (t1, v1) = pts[idx];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EnvelopeInvalid {
                reason: format!("{name} has no breakpoints"),
            });
        }
        for w in self.points.windows(2) {
            // Negated on purpose: also rejects NaN times.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(w[1].0 > w[0].0) {
                return Err(Error::EnvelopeInvalid {
                    reason: format!("{name} breakpoint times are not strictly increasing"),
                });
            }
        }
        if self.points.iter().any(|&(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::EnvelopeInvalid {
                reason: format!("{name} has non-finite breakpoints"),
            });
        }
        Ok(())
    }
}

/// Transient envelope: on [0, t_bar] the error must stay between `lower`
/// and `upper`; after t_bar it is unconstrained. Only the discretized
/// signal search enforces it; the dual bound ignores it (tightening the
/// feasible set can only raise the optimum, so the bound stays valid).
#[derive(Debug, Clone)]
pub struct Envelope {
    pub t_bar: f64,
    pub lower: Pwl,
    pub upper: Pwl,
}

impl Envelope {
    /// Validate shape and compatibility with a forced start value.
    pub fn validate(&self, e0: Option<f64>) -> Result<()> {
        // Negated on purpose: also rejects a NaN horizon.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.t_bar > 0.0) || !self.t_bar.is_finite() {
            return Err(Error::EnvelopeInvalid {
                reason: format!("horizon t_bar = {} must be positive and finite", self.t_bar),
            });
        }
        self.lower.check("lower bound")?;
        self.upper.check("upper bound")?;
        let mut ts: Vec<f64> = vec![0.0, self.t_bar];
        ts.extend(self.lower.points.iter().map(|&(t, _)| t));
        ts.extend(self.upper.points.iter().map(|&(t, _)| t));
        for &t in &ts {
            if t < 0.0 || t > self.t_bar {
                continue;
            }
            if self.lower.eval(t) > self.upper.eval(t) {
                return Err(Error::EnvelopeInvalid {
                    reason: format!(
                        "lower bound {} exceeds upper bound {} at t = {t}",
                        self.lower.eval(t),
                        self.upper.eval(t)
                    ),
                });
            }
        }
        if let Some(alpha) = e0 {
            // The start value must sit strictly below the upper bound and at
            // or above both the lower bound and zero.
            if !(self.upper.eval(0.0) > alpha && alpha >= self.lower.eval(0.0).max(0.0)) {
                return Err(Error::EnvelopeExcludesStart { alpha });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Problem data
// ---------------------------------------------------------------------------

/// Everything the solvers need, derived once from the plant and reference.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub modes: Vec<Mode>,
    /// Per-mode objective data for the interpolation constraints at plant
    /// zeros: Re ŵ(z) on cosine entries, -Im ŵ(z) on sine entries, zero on
    /// modes from other sources.
    pub b_vec: Vec<f64>,
    /// Per-mode objective data for the undershoot dual: -Re ŵ(p) on cosine
    /// entries and +Im ŵ(p) on sine entries at plant poles, zero elsewhere.
    pub us_obj: Vec<f64>,
    /// Initial reference value w(0+).
    pub alpha: f64,
    pub closure: Closure,
    /// Plant relative degree.
    pub theta_p: usize,
    /// Reference relative degree.
    pub theta_w: usize,
    /// Time-domain expansion of the reference signal.
    pub w_terms: Vec<PFTerm>,
    /// Reduced reference transform.
    pub reference: RatFun,
    /// Smallest decay rate among real-axis plant interpolation points;
    /// +inf when there are none.
    pub gamma: f64,
    /// Smallest decay rate across all modes; +inf when the mode set is empty.
    pub x_min: f64,
}

impl ProblemData {
    /// The forced initial error value, when the closure pins one.
    pub fn e0(&self) -> Option<f64> {
        match self.closure {
            Closure::FreeStart => None,
            Closure::PinnedStart => Some(self.alpha),
            Closure::ZeroStart => Some(0.0),
        }
    }

    pub fn w_eval(&self, t: f64) -> f64 {
        ratfun::time_eval(&self.w_terms, t)
    }

    pub fn w_deriv(&self, t: f64) -> f64 {
        ratfun::time_eval_deriv(&self.w_terms, t)
    }

    pub fn has_ref_zeros(&self) -> bool {
        self.modes.iter().any(|m| m.source == ModeSource::RefZero)
    }

    /// Drop oscillatory modes decaying slower than the dominant real-axis
    /// rate. Valid (value-preserving) for the overshoot dual, and for the
    /// undershoot dual with a nonnegative reference, when the reference has
    /// no right-half-plane zeros.
    pub fn gamma_reduced(&self) -> Result<ProblemData> {
        if self.has_ref_zeros() {
            return Err(Error::ReductionNotApplicable);
        }
        let keep: Vec<bool> = self
            .modes
            .iter()
            .map(|m| m.y == 0.0 || m.x >= self.gamma * (1.0 - 1e-12))
            .collect();
        let filt = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .collect()
        };
        let modes: Vec<Mode> = self
            .modes
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&m, _)| m)
            .collect();
        let x_min = modes.iter().map(|m| m.x).fold(f64::INFINITY, f64::min);
        Ok(ProblemData {
            b_vec: filt(&self.b_vec),
            us_obj: filt(&self.us_obj),
            modes,
            x_min,
            ..self.clone()
        })
    }

    /// Verify that the reference signal is nonnegative (required for the
    /// undershoot measure, which is taken relative to the reference).
    pub fn check_reference_nonneg(&self) -> Result<()> {
        if self.w_terms.is_empty() {
            return Ok(());
        }
        let sigma_max = self
            .w_terms
            .iter()
            .map(|t| t.pole.re)
            .fold(f64::NEG_INFINITY, f64::max);
        // Sampling horizon: long enough for decaying parts to settle and for
        // several periods of the slowest oscillation.
        let decay = self
            .w_terms
            .iter()
            .filter(|t| t.pole.re < -1e-12)
            .map(|t| -t.pole.re)
            .fold(f64::INFINITY, f64::min);
        let mut horizon = if decay.is_finite() { 60.0 / decay } else { 20.0 };
        let y_min = self
            .w_terms
            .iter()
            .filter(|t| t.pole.im.abs() > 1e-12)
            .map(|t| t.pole.im.abs())
            .fold(f64::INFINITY, f64::min);
        if y_min.is_finite() {
            horizon = horizon.max(12.0 * std::f64::consts::PI / y_min);
        }
        if sigma_max > 1e-12 {
            // Growing reference: march far enough that the dominant part rules.
            horizon *= 4.0;
        }
        let n = 10_000;
        let mut min_t = 0.0;
        let mut min_v = f64::INFINITY;
        let mut scale = 0.0f64;
        for k in 0..=n {
            let t = horizon * k as f64 / n as f64;
            let v = self.w_eval(t);
            scale = scale.max(v.abs());
            if v < min_v {
                min_v = v;
                min_t = t;
            }
        }
        // Polish the witness inside its sample bracket.
        let dt = horizon / n as f64;
        let (t_ref, v_ref) = golden_min(
            |t| self.w_eval(t),
            (min_t - dt).max(0.0),
            min_t + dt,
            60,
        );
        if v_ref < min_v {
            min_v = v_ref;
            min_t = t_ref;
        }
        if min_v < -1e-9 * (1.0 + scale) {
            return Err(Error::ReferenceNegative {
                t: min_t,
                value: min_v,
            });
        }
        Ok(())
    }
}

/// Golden-section minimization of a scalar function on [a, b].
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

struct ClassifiedPoints {
    /// Upper-half-plane representatives, y >= 0.
    points: Vec<Complex64>,
}

/// Cluster a root list and classify against the imaginary axis, keeping the
/// open right-half-plane points (upper-half representatives only).
fn classify_roots(roots: &[Complex64], role: &'static str) -> Result<ClassifiedPoints> {
    let clusters = ratfun::cluster_roots(roots);
    let mut points = Vec::new();
    for &(z, mult) in &clusters {
        let tol = AXIS_TOL * (1.0 + z.norm());
        if z.re.abs() <= tol {
            return Err(Error::PointOnImaginaryAxis {
                role,
                re: z.re,
                im: z.im,
            });
        }
        if z.re < 0.0 {
            continue;
        }
        if mult > 1 {
            return Err(Error::RepeatedPoint {
                role,
                re: z.re,
                im: z.im,
                multiplicity: mult,
            });
        }
        if z.im >= 0.0 {
            points.push(z);
        }
    }
    points.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(ClassifiedPoints { points })
}

fn check_distinct(
    a: &ClassifiedPoints,
    role_a: &'static str,
    b: &ClassifiedPoints,
    role_b: &'static str,
) -> Result<()> {
    for &za in &a.points {
        for &zb in &b.points {
            if (za - zb).norm() <= DISTINCT_TOL * (1.0 + za.norm()) {
                return Err(Error::CoincidentPoints {
                    role_a,
                    a_re: za.re,
                    a_im: za.im,
                    role_b,
                    b_re: zb.re,
                    b_im: zb.im,
                });
            }
        }
    }
    Ok(())
}

fn push_modes(
    modes: &mut Vec<Mode>,
    points: &ClassifiedPoints,
    source: ModeSource,
) {
    for &z in &points.points {
        modes.push(Mode {
            x: z.re,
            y: z.im,
            kind: ModeKind::Cos,
            source,
        });
        if z.im > 0.0 {
            modes.push(Mode {
                x: z.re,
                y: z.im,
                kind: ModeKind::Sin,
                source,
            });
        }
    }
}

/// Build the full problem description from plant and reference coefficient
/// lists (ascending powers).
pub fn build_problem(
    plant_num: &[f64],
    plant_den: &[f64],
    ref_num: &[f64],
    ref_den: &[f64],
    seed: u64,
) -> Result<ProblemData> {
    let p_num = Poly::new(plant_num.to_vec());
    let p_den = Poly::new(plant_den.to_vec());
    if p_den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    if p_num.is_zero() {
        return Err(Error::BadConfig {
            reason: "plant numerator is identically zero".into(),
        });
    }
    if p_num.degree() > p_den.degree() {
        return Err(Error::ImproperPlant {
            num_deg: p_num.degree(),
            den_deg: p_den.degree(),
        });
    }
    let theta_p = p_den.degree() - p_num.degree();

    let r_num = Poly::new(ref_num.to_vec());
    let r_den = Poly::new(ref_den.to_vec());
    if r_den.is_zero() {
        return Err(Error::ZeroDenominator);
    }
    if r_num.is_zero() {
        return Err(Error::BadConfig {
            reason: "reference numerator is identically zero".into(),
        });
    }
    if r_num.degree() >= r_den.degree() {
        return Err(Error::ReferenceNotStrictlyProper {
            num_deg: r_num.degree(),
            den_deg: r_den.degree(),
        });
    }
    // Reduce the reference to coprime form before reading its zeros/poles.
    let reference = RatFun::new_seeded(r_num, r_den, seed)?;
    let theta_w = reference.den().degree() - reference.num().degree();

    // The plant is deliberately NOT reduced: a numerator/denominator root
    // pair coinciding in the right half plane is a modeling error the
    // distinctness check below must see, not silently cancel.
    let pz_roots = if p_num.degree() >= 1 {
        p_num.roots(seed.wrapping_add(2))?
    } else {
        Vec::new()
    };
    let pp_roots = if p_den.degree() >= 1 {
        p_den.roots(seed.wrapping_add(3))?
    } else {
        Vec::new()
    };
    let rz_roots = if reference.num().degree() >= 1 {
        reference.num().roots(seed.wrapping_add(4))?
    } else {
        Vec::new()
    };

    let plant_zeros = classify_roots(&pz_roots, "plant zero")?;
    let plant_poles = classify_roots(&pp_roots, "plant pole")?;
    let ref_zeros = classify_roots(&rz_roots, "reference zero")?;

    check_distinct(&plant_zeros, "plant zero", &plant_poles, "plant pole")?;
    check_distinct(&plant_zeros, "plant zero", &ref_zeros, "reference zero")?;
    check_distinct(&plant_poles, "plant pole", &ref_zeros, "reference zero")?;

    // Reference poles may lie anywhere, but not on top of an interpolation
    // point, where ŵ must be finite.
    let rp_roots = if reference.den().degree() >= 1 {
        reference.den().roots(seed.wrapping_add(5))?
    } else {
        Vec::new()
    };
    for &p in &rp_roots {
        for pts in [&plant_zeros, &plant_poles, &ref_zeros] {
            for &z in &pts.points {
                let d = (Complex64::new(p.re, p.im.abs()) - z).norm();
                if d <= DISTINCT_TOL * (1.0 + z.norm()) {
                    return Err(Error::ReferencePoleAtPoint { re: z.re, im: z.im });
                }
            }
        }
    }

    // Start-value classification and the initial reference value.
    let series = reference.asymptotic_series(theta_w.max(1));
    let alpha = series[0];
    let closure = if theta_w == 1 {
        if theta_p == 0 {
            Closure::FreeStart
        } else {
            Closure::PinnedStart
        }
    } else {
        // Defensive: for a rational reference of relative degree theta_w the
        // lower-order initial derivatives vanish identically.
        let scale = series.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        for (idx, &c) in series.iter().enumerate().take(theta_w - 1) {
            if c.abs() > 1e-9 * (1.0 + scale) {
                return Err(Error::InfeasibleReferenceStart {
                    order: idx,
                    value: c,
                });
            }
        }
        Closure::ZeroStart
    };

    let w_terms = reference.partial_fractions(seed.wrapping_add(6))?;

    // Mode set, ordered plant zeros, plant poles, reference zeros.
    let mut modes = Vec::new();
    push_modes(&mut modes, &plant_zeros, ModeSource::PlantZero);
    push_modes(&mut modes, &plant_poles, ModeSource::PlantPole);
    push_modes(&mut modes, &ref_zeros, ModeSource::RefZero);

    let mut b_vec = vec![0.0; modes.len()];
    let mut us_obj = vec![0.0; modes.len()];
    for (j, mode) in modes.iter().enumerate() {
        match mode.source {
            ModeSource::PlantZero => {
                let w = reference.eval(mode.point())?;
                b_vec[j] = match mode.kind {
                    ModeKind::Cos => w.re,
                    ModeKind::Sin => -w.im,
                };
            }
            ModeSource::PlantPole => {
                let w = reference.eval(mode.point())?;
                us_obj[j] = match mode.kind {
                    ModeKind::Cos => -w.re,
                    ModeKind::Sin => w.im,
                };
            }
            ModeSource::RefZero => {}
        }
    }

    let gamma = modes
        .iter()
        .filter(|m| m.source != ModeSource::RefZero && m.y == 0.0)
        .map(|m| m.x)
        .fold(f64::INFINITY, f64::min);
    let x_min = modes.iter().map(|m| m.x).fold(f64::INFINITY, f64::min);

    Ok(ProblemData {
        modes,
        b_vec,
        us_obj,
        alpha,
        closure,
        theta_p,
        theta_w,
        w_terms,
        reference,
        gamma,
        x_min,
    })
}
