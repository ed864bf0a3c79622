//! Job orchestration: parse a problem description, run the requested
//! criteria through both solvers concurrently, and assemble a report.
//!
//! Reports are deterministic for a fixed configuration: every stochastic
//! ingredient (root-finder restarts) is seeded from a hash of the
//! configuration itself.

use std::borrow::Cow;
use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::analytic::first_order_limits;
use crate::dual::{solve_dual, DualOptions, DualResult};
use crate::error::{Error, Result};
use crate::primal::{solve_primal, PrimalOptions, PrimalResult};
use crate::ratfun::ModeKind;
use crate::setup::{build_problem, Criterion, Envelope, Mode, ModeSource, ProblemData, Pwl};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    /// Ascending coefficients, constant term first.
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// A bound profile: either a constant or piecewise-linear breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileConfig {
    Constant(f64),
    Breakpoints(Vec<(f64, f64)>),
}

impl ProfileConfig {
    fn to_pwl(&self) -> Pwl {
        match self {
            ProfileConfig::Constant(v) => Pwl::constant(*v),
            ProfileConfig::Breakpoints(points) => Pwl {
                points: points.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    pub t_bar: f64,
    pub phi_minus: ProfileConfig,
    pub phi_plus: ProfileConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    /// Cap on solver grids; `None` keeps each solver's own default.
    pub max_grid: Option<usize>,
    pub horizon: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-5,
            max_grid: None,
            horizon: None,
        }
    }
}

fn all_criteria() -> Vec<Criterion> {
    Criterion::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub plant: RatioConfig,
    pub reference: RatioConfig,
    #[serde(default = "all_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub envelope: Option<EnvelopeConfig>,
    #[serde(default)]
    pub options: SolverConfig,
    #[serde(default)]
    pub gamma_reduce: bool,
    #[serde(default)]
    pub skip_primal: bool,
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ComplexPair {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemEcho {
    /// Upper-half-plane representatives of the interpolation points.
    pub plant_zeros: Vec<ComplexPair>,
    pub plant_poles: Vec<ComplexPair>,
    pub reference_zeros: Vec<ComplexPair>,
    pub theta_p: usize,
    pub theta_w: usize,
    pub closure: String,
    pub alpha: f64,
    /// `None` when every real-axis point is absent (infinite threshold).
    pub gamma: Option<f64>,
    pub mode_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub coefficients: Vec<f64>,
    pub mass: f64,
    pub max_sign_violation: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Diagnostics {
    pub dual_grid_points: usize,
    pub dual_refinements: usize,
    pub dual_horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moment_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisections: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal_value: Option<f64>,
    /// primal_value - dual_value when both are present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corrected: Option<bool>,
    pub gamma_applied: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub problem: ProblemEcho,
    pub criteria: Vec<CriterionReport>,
    pub seed: u64,
}

/// Solver outputs kept alongside the serializable report, for certificate
/// export and programmatic consumers.
#[derive(Debug)]
pub struct CriterionArtifacts {
    pub criterion: Criterion,
    /// Modes of the (possibly reduced) problem this criterion actually used.
    pub modes: Vec<Mode>,
    pub dual: Option<DualResult>,
    pub primal: Option<PrimalResult>,
}

#[derive(Debug)]
pub struct JobOutcome {
    pub report: Report,
    pub artifacts: Vec<CriterionArtifacts>,
}

impl JobOutcome {
    /// True when every requested criterion finished without a recorded error.
    pub fn all_verified(&self) -> bool {
        self.report.criteria.iter().all(|c| c.error.is_none())
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

fn points_of(p: &ProblemData, source: ModeSource) -> Vec<ComplexPair> {
    p.modes
        .iter()
        .filter(|m| m.source == source && m.kind == ModeKind::Cos)
        .map(|m| ComplexPair { re: m.x, im: m.y })
        .collect()
}

/// The closed-form family: one real plant zero, one real plant pole with
/// z > p, no reference zeros, unit step reference.
fn analytic_value(p: &ProblemData, crit: Criterion) -> Option<f64> {
    let zeros = points_of(p, ModeSource::PlantZero);
    let poles = points_of(p, ModeSource::PlantPole);
    if zeros.len() != 1 || poles.len() != 1 || p.has_ref_zeros() {
        return None;
    }
    if zeros[0].im != 0.0 || poles[0].im != 0.0 {
        return None;
    }
    let (z, pole) = (zeros[0].re, poles[0].re);
    if z <= pole {
        return None;
    }
    // Unit step: a single transform term k/s with k = 1.
    if p.w_terms.len() != 1 {
        return None;
    }
    let term = &p.w_terms[0];
    if term.power != 0
        || term.pole.norm() > 1e-12
        || (term.coeff.re - 1.0).abs() > 1e-12
        || term.coeff.im.abs() > 1e-12
    {
        return None;
    }
    let limits = first_order_limits(z, pole).ok()?;
    match crit {
        Criterion::MaxAmplitude => Some(limits.ma),
        Criterion::PositivePeak => Some(limits.pos),
        Criterion::Overshoot => Some(limits.os),
        Criterion::Fluctuation => Some(limits.fl),
        Criterion::Undershoot => None,
    }
}

fn run_criterion(
    p: &ProblemData,
    crit: Criterion,
    envelope: Option<&Envelope>,
    config: &JobConfig,
) -> (CriterionReport, CriterionArtifacts) {
    let mut report = CriterionReport {
        criterion: crit,
        dual_value: None,
        primal_value: None,
        gap: None,
        analytic_value: analytic_value(p, crit),
        corrected: None,
        gamma_applied: false,
        certificate: None,
        diagnostics: None,
        error: None,
    };
    let mut artifacts = CriterionArtifacts {
        criterion: crit,
        modes: p.modes.clone(),
        dual: None,
        primal: None,
    };

    // The decay-rate reduction is value-preserving only for the one-sided
    // tail criteria; other criteria always use the full mode set.
    let reducible = matches!(crit, Criterion::Overshoot | Criterion::Undershoot);
    let problem: Cow<'_, ProblemData> = if config.gamma_reduce && reducible {
        match p.gamma_reduced() {
            Ok(reduced) => {
                report.gamma_applied = true;
                Cow::Owned(reduced)
            }
            Err(e) => {
                report.error = Some(e.to_string());
                return (report, artifacts);
            }
        }
    } else {
        Cow::Borrowed(p)
    };
    artifacts.modes = problem.modes.clone();

    let dual_opts = DualOptions {
        tol: config.options.tol,
        max_grid: config.options.max_grid.unwrap_or(2048),
        horizon: config.options.horizon,
        ..DualOptions::default()
    };
    match solve_dual(&problem, crit, &dual_opts) {
        Ok(d) => {
            report.dual_value = Some(d.value);
            report.corrected = Some(d.corrected);
            report.certificate = Some(CertificateSummary {
                coefficients: d.coeffs.clone(),
                mass: d.mass,
                max_sign_violation: d.max_sign_violation,
            });
            report.diagnostics = Some(Diagnostics {
                dual_grid_points: d.grid_points,
                dual_refinements: d.refinements,
                dual_horizon: d.horizon,
                ..Diagnostics::default()
            });
            artifacts.dual = Some(d);
        }
        Err(e) => {
            report.error = Some(e.to_string());
            return (report, artifacts);
        }
    }

    if !config.skip_primal {
        let primal_opts = PrimalOptions {
            tol: (config.options.tol * 10.0).max(1e-6),
            max_grid: config.options.max_grid.map_or(4096, |m| m.max(2)),
            horizon: config.options.horizon,
            ..PrimalOptions::default()
        };
        match solve_primal(&problem, crit, envelope, &primal_opts) {
            Ok(pr) => {
                report.primal_value = Some(pr.value);
                report.gap = report.dual_value.map(|d| pr.value - d);
                if let Some(diag) = report.diagnostics.as_mut() {
                    diag.primal_grid_points = Some(pr.grid_points);
                    diag.primal_horizon = Some(pr.horizon);
                    diag.moment_residual = Some(pr.moment_residual);
                    diag.bisections = Some(pr.bisections);
                }
                artifacts.primal = Some(pr);
            }
            Err(e) => {
                report.error = Some(e.to_string());
            }
        }
    }
    (report, artifacts)
}

/// Run every requested criterion and assemble the report.
pub fn run(config: &JobConfig) -> Result<JobOutcome> {
    if config.criteria.is_empty() {
        return Err(Error::BadConfig {
            reason: "criteria list is empty".into(),
        });
    }
    let canonical = serde_json::to_string(config).map_err(|e| Error::BadConfig {
        reason: format!("config not serializable: {e}"),
    })?;
    let seed = fnv1a(canonical.as_bytes());

    let p = build_problem(
        &config.plant.num,
        &config.plant.den,
        &config.reference.num,
        &config.reference.den,
        seed,
    )?;
    let envelope = match &config.envelope {
        Some(env) => {
            let built = Envelope {
                t_bar: env.t_bar,
                lower: env.phi_minus.to_pwl(),
                upper: env.phi_plus.to_pwl(),
            };
            built.validate(p.e0())?;
            Some(built)
        }
        None => None,
    };

    // Criteria are independent given the immutable problem; run them on
    // their own threads and reassemble in request order.
    let mut slots: Vec<Option<(CriterionReport, CriterionArtifacts)>> =
        (0..config.criteria.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &crit in &config.criteria {
            let p = &p;
            let envelope = envelope.as_ref();
            handles.push(scope.spawn(move || run_criterion(p, crit, envelope, config)));
        }
        for (slot, handle) in slots.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("criterion worker panicked"));
        }
    });

    let mut criteria = Vec::with_capacity(slots.len());
    let mut artifacts = Vec::with_capacity(slots.len());
    for slot in slots {
        let (rep, art) = slot.expect("worker result missing");
        criteria.push(rep);
        artifacts.push(art);
    }

    let report = Report {
        problem: ProblemEcho {
            plant_zeros: points_of(&p, ModeSource::PlantZero),
            plant_poles: points_of(&p, ModeSource::PlantPole),
            reference_zeros: points_of(&p, ModeSource::RefZero),
            theta_p: p.theta_p,
            theta_w: p.theta_w,
            closure: match serde_json::to_value(p.closure) {
                Ok(serde_json::Value::String(s)) => s,
                _ => format!("{:?}", p.closure),
            },
            alpha: p.alpha,
            gamma: if p.gamma.is_finite() {
                Some(p.gamma)
            } else {
                None
            },
            mode_count: p.modes.len(),
        },
        criteria,
        seed,
    };
    Ok(JobOutcome { report, artifacts })
}

/// Write `t,e_star,e_primal` samples for one criterion: the dual certificate
/// and (when present) the constructed primal signal, on a log-spaced grid.
pub fn export_certificate_csv(
    artifacts: &CriterionArtifacts,
    path: &std::path::Path,
) -> std::io::Result<()> {
    let horizon = artifacts
        .dual
        .as_ref()
        .map(|d| d.horizon)
        .filter(|&h| h > 0.0)
        .or_else(|| artifacts.primal.as_ref().map(|p| p.horizon))
        .filter(|&h| h > 0.0)
        .unwrap_or(1.0);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,e_star,e_primal")?;
    let n = 2000usize;
    let t_lo = horizon * 1e-6;
    for k in 0..n {
        let t = if k == 0 {
            0.0
        } else {
            t_lo * (horizon / t_lo).powf(k as f64 / (n - 1) as f64)
        };
        let e_star = match &artifacts.dual {
            Some(d) if !d.coeffs.is_empty() => artifacts
                .modes
                .iter()
                .zip(&d.coeffs)
                .map(|(m, &c)| c * m.eval(t))
                .sum::<f64>(),
            _ => 0.0,
        };
        match &artifacts.primal {
            Some(pr) => writeln!(out, "{t},{e_star},{}", pr.signal.eval(t))?,
            None => writeln!(out, "{t},{e_star},")?,
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_config() -> JobConfig {
        JobConfig {
            plant: RatioConfig {
                num: vec![-2.0, 1.0],
                den: vec![-1.0, 1.0],
            },
            reference: RatioConfig {
                num: vec![1.0],
                den: vec![0.0, 1.0],
            },
            criteria: vec![Criterion::Overshoot, Criterion::PositivePeak],
            envelope: None,
            options: SolverConfig::default(),
            gamma_reduce: false,
            skip_primal: false,
        }
    }

    #[test]
    fn config_round_trips() {
        let cfg = basic_config();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: JobConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: JobConfig = serde_json::from_str(
            r#"{"plant":{"num":[-2.0,1.0],"den":[-1.0,1.0]},
                "reference":{"num":[1.0],"den":[0.0,1.0]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.criteria.len(), 5);
        assert!(!cfg.gamma_reduce);
        assert!(cfg.options.horizon.is_none());
    }

    #[test]
    fn report_carries_dual_primal_and_analytic() {
        let outcome = run(&basic_config()).unwrap();
        assert!(outcome.all_verified());
        let os = &outcome.report.criteria[0];
        assert_eq!(os.criterion, Criterion::Overshoot);
        let dual = os.dual_value.unwrap();
        assert!((dual - 1.0).abs() < 5e-3, "dual {dual}");
        assert!((os.analytic_value.unwrap() - 1.0).abs() < 1e-12);
        let gap = os.gap.unwrap();
        assert!((-1e-6..0.02).contains(&gap), "gap {gap}");
        assert_eq!(outcome.report.problem.closure, "free_start");
        assert_eq!(outcome.report.problem.theta_p, 0);
        assert!(outcome.report.problem.gamma == Some(1.0));
    }

    #[test]
    fn deterministic_across_runs() {
        let a = run(&basic_config()).unwrap();
        let b = run(&basic_config()).unwrap();
        let ja = serde_json::to_string(&a.report).unwrap();
        let jb = serde_json::to_string(&b.report).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn empty_criteria_rejected() {
        let mut cfg = basic_config();
        cfg.criteria.clear();
        assert!(matches!(run(&cfg), Err(Error::BadConfig { .. })));
    }

    #[test]
    fn scaled_step_gets_no_analytic_value() {
        let mut cfg = basic_config();
        cfg.reference.num = vec![3.0];
        let outcome = run(&cfg).unwrap();
        assert!(outcome.report.criteria[0].analytic_value.is_none());
        // Values still scale by the reference gain.
        let dual = outcome.report.criteria[0].dual_value.unwrap();
        assert!((dual - 3.0).abs() < 1.5e-2, "dual {dual}");
    }

    #[test]
    fn csv_export_shapes() {
        let mut cfg = basic_config();
        cfg.criteria = vec![Criterion::Overshoot];
        let outcome = run(&cfg).unwrap();
        let dir = std::env::temp_dir().join("tracklim_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cert.csv");
        export_certificate_csv(&outcome.artifacts[0], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,e_star,e_primal");
        assert_eq!(lines.len(), 2001);
        assert!(lines[1].starts_with("0,"));
        // Certificate column reproduces the stored coefficients.
        let row: Vec<&str> = lines[500].split(',').collect();
        let t: f64 = row[0].parse().unwrap();
        let e_star: f64 = row[1].parse().unwrap();
        let d = outcome.artifacts[0].dual.as_ref().unwrap();
        let expect: f64 = outcome.artifacts[0]
            .modes
            .iter()
            .zip(&d.coeffs)
            .map(|(m, &c)| c * m.eval(t))
            .sum();
        assert!((e_star - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn skip_primal_leaves_column_empty() {
        let mut cfg = basic_config();
        cfg.criteria = vec![Criterion::Overshoot];
        cfg.skip_primal = true;
        let outcome = run(&cfg).unwrap();
        assert!(outcome.report.criteria[0].primal_value.is_none());
        let dir = std::env::temp_dir().join("tracklim_csv_skip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cert.csv");
        export_certificate_csv(&outcome.artifacts[0], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn gamma_reduction_preserves_overshoot() {
        // Third-order plant whose oscillatory zero pair is dropped by the
        // reduction; the overshoot limit must not move.
        let plant_num = vec![-50.5, 27.25, -3.0, 1.0];
        let plant_den = vec![-20.0, 11.0, 8.0, 1.0]; // (s-1)(s+4)(s+5)
        let mut cfg = basic_config();
        cfg.plant = RatioConfig {
            num: plant_num,
            den: plant_den,
        };
        cfg.criteria = vec![Criterion::Overshoot];
        cfg.skip_primal = true;
        let full = run(&cfg).unwrap();
        cfg.gamma_reduce = true;
        let reduced = run(&cfg).unwrap();
        let a = full.report.criteria[0].dual_value.unwrap();
        let b = reduced.report.criteria[0].dual_value.unwrap();
        assert!(reduced.report.criteria[0].gamma_applied);
        assert!(!full.report.criteria[0].gamma_applied);
        assert!((a - b).abs() < 5e-3, "full {a} reduced {b}");
        assert!(reduced.artifacts[0].modes.len() < full.artifacts[0].modes.len());
    }
}
