//! Discretized primal: achievable piecewise-linear error signals.
//!
//! The dual side produces lower bounds; this side produces matching upper
//! estimates by constructing concrete error signals. A signal is piecewise
//! linear on a finite grid and identically zero past the last node, so it is
//! continuous, vanishes at infinity, and its pairing with every mode is a
//! closed-form linear functional of the node values. Requiring those
//! pairings to hit the interpolation data makes the signal achievable; the
//! criterion is then minimized by bisecting on a level `L` whose feasibility
//! check is a small linear program (the level enters only through variable
//! bounds, except for the fluctuation criterion, which first re-centers the
//! signal around a free midline variable).
//!
//! Any feasible signal gives a valid upper estimate regardless of grid or
//! horizon; refinement only tightens it.

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpRow, LpStatus, RowKind};
use crate::setup::{golden_min, Criterion, Envelope, Mode, ProblemData};

#[derive(Debug, Clone)]
pub struct PrimalOptions {
    /// Relative value-change threshold for accepting a refinement level.
    pub tol: f64,
    /// Node count of the first uniform grid.
    pub base_grid: usize,
    /// Hard cap on the node count.
    pub max_grid: usize,
    /// Override for the signal support horizon.
    pub horizon: Option<f64>,
    /// Bisection steps on the level.
    pub bisections: usize,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        PrimalOptions {
            tol: 1e-4,
            base_grid: 1024,
            max_grid: 4096,
            horizon: None,
            bisections: 55,
        }
    }
}

/// A piecewise-linear signal, zero outside its grid.
#[derive(Debug, Clone)]
pub struct GridSignal {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridSignal {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return 0.0;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return self.values[0];
        }
        if i >= n {
            return self.values[n - 1];
        }
        let (a, b) = (self.times[i - 1], self.times[i]);
        let f = if b > a { (t - a) / (b - a) } else { 0.0 };
        self.values[i - 1] * (1.0 - f) + self.values[i] * f
    }
}

#[derive(Debug, Clone)]
pub struct PrimalResult {
    /// Criterion value of the constructed signal (an achievable value).
    pub value: f64,
    pub signal: GridSignal,
    /// Largest absolute defect of the interpolation pairings.
    pub moment_residual: f64,
    pub grid_points: usize,
    pub horizon: f64,
    pub bisections: usize,
}

/// Pairing of a piecewise-linear signal with one mode, as coefficients on
/// the node values: integrate the hat-function pieces in closed form.
fn moment_coefficients(mode: &Mode, grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut coef = vec![0.0; n];
    for k in 0..n - 1 {
        let (a, b) = (grid[k], grid[k + 1]);
        let h = b - a;
        if h <= 0.0 {
            continue;
        }
        let i0 = mode.seg_mass(a, b);
        let i1 = mode.seg_mass_t(a, b);
        coef[k] += (b * i0 - i1) / h;
        coef[k + 1] += (i1 - a * i0) / h;
    }
    coef
}

fn build_grid(t_end: f64, n: usize, envelope: Option<&Envelope>) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    // Optimal signals concentrate mass right at the start; a uniform grid
    // smears that over its first cell and biases the level linearly in the
    // spacing. Grade geometrically toward zero so the first cell is tiny.
    let h = t_end / n as f64;
    let mut t = t_end * 1e-9;
    while t < h {
        grid.push(t);
        t *= 2.0;
    }
    if let Some(env) = envelope {
        grid.push(env.t_bar.min(t_end));
        for pwl in [&env.lower, &env.upper] {
            for &(t, _) in &pwl.points {
                if t > 0.0 && t < t_end.min(env.t_bar) {
                    grid.push(t);
                }
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + t_end));
    grid
}

struct Discretization {
    grid: Vec<f64>,
    /// Per-mode node coefficients of the pairing.
    moments: Vec<Vec<f64>>,
    /// Reference samples at the nodes (only needed for the undershoot level).
    w_nodes: Vec<f64>,
}

fn discretize(p: &ProblemData, crit: Criterion, t_end: f64, n: usize, envelope: Option<&Envelope>) -> Discretization {
    let grid = build_grid(t_end, n, envelope);
    let moments = p.modes.iter().map(|m| moment_coefficients(m, &grid)).collect();
    let w_nodes = if crit == Criterion::Undershoot {
        grid.iter().map(|&t| p.w_eval(t)).collect()
    } else {
        Vec::new()
    };
    Discretization { grid, moments, w_nodes }
}

/// Feasibility of the level-`level` problem; returns node values on success.
fn feasible_at(
    p: &ProblemData,
    crit: Criterion,
    d: &Discretization,
    envelope: Option<&Envelope>,
    level: f64,
) -> Result<Option<Vec<f64>>> {
    let n = d.grid.len();
    let e0 = p.e0();
    if crit == Criterion::Fluctuation {
        return feasible_fluctuation(p, d, envelope, level, e0);
    }

    // Bounds on the node values: criterion level, envelope, pinned ends.
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for k in 0..n {
        match crit {
            Criterion::MaxAmplitude => {
                lower[k] = -level;
                upper[k] = level;
            }
            Criterion::PositivePeak => upper[k] = level,
            Criterion::Overshoot => lower[k] = -level,
            Criterion::Undershoot => upper[k] = d.w_nodes[k] + level,
            Criterion::Fluctuation => unreachable!(),
        }
    }
    if let Some(env) = envelope {
        for k in 0..n {
            let t = d.grid[k];
            if t <= env.t_bar {
                lower[k] = lower[k].max(env.lower.eval(t));
                upper[k] = upper[k].min(env.upper.eval(t));
            }
        }
    }
    if let Some(v) = e0 {
        lower[0] = v;
        upper[0] = v;
    }
    lower[n - 1] = 0.0;
    upper[n - 1] = 0.0;
    if lower.iter().zip(&upper).any(|(lo, up)| lo > up) {
        return Ok(None);
    }

    let rows: Vec<LpRow> = d
        .moments
        .iter()
        .zip(&p.b_vec)
        .map(|(coef, &rhs)| LpRow {
            coeffs: coef
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(k, &v)| (k, v))
                .collect(),
            kind: RowKind::Eq,
            rhs,
        })
        .collect();
    let program = LinearProgram {
        n,
        maximize: vec![0.0; n],
        rows,
        lower,
        upper,
    };
    let sol = lp::solve(&program, 0)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(sol.x)),
        LpStatus::Infeasible { .. } => Ok(None),
        LpStatus::Unbounded => Ok(None),
    }
}

/// Fluctuation feasibility: node deviations `d_k` from a free midline `xi`,
/// with `e_k = d_k + xi` and |d_k| <= level.
fn feasible_fluctuation(
    p: &ProblemData,
    d: &Discretization,
    envelope: Option<&Envelope>,
    level: f64,
    e0: Option<f64>,
) -> Result<Option<Vec<f64>>> {
    let n = d.grid.len();
    let xi = n; // column index of the midline
    let mut rows: Vec<LpRow> = Vec::new();
    for (coef, &rhs) in d.moments.iter().zip(&p.b_vec) {
        let mut coeffs: Vec<(usize, f64)> = coef
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k, v))
            .collect();
        let total: f64 = coef.iter().sum();
        coeffs.push((xi, total));
        rows.push(LpRow { coeffs, kind: RowKind::Eq, rhs });
    }
    // The signal vanishes at the horizon; beyond it the midline must still
    // stay within `level` of zero, which this same row enforces.
    rows.push(LpRow {
        coeffs: vec![(n - 1, 1.0), (xi, 1.0)],
        kind: RowKind::Eq,
        rhs: 0.0,
    });
    if let Some(v) = e0 {
        rows.push(LpRow {
            coeffs: vec![(0, 1.0), (xi, 1.0)],
            kind: RowKind::Eq,
            rhs: v,
        });
    }
    if let Some(env) = envelope {
        for k in 0..n {
            let t = d.grid[k];
            if t <= env.t_bar {
                rows.push(LpRow {
                    coeffs: vec![(k, 1.0), (xi, 1.0)],
                    kind: RowKind::Le,
                    rhs: env.upper.eval(t),
                });
                rows.push(LpRow {
                    coeffs: vec![(k, -1.0), (xi, -1.0)],
                    kind: RowKind::Le,
                    rhs: -env.lower.eval(t),
                });
            }
        }
    }
    let mut lower = vec![-level; n + 1];
    let mut upper = vec![level; n + 1];
    lower[xi] = f64::NEG_INFINITY;
    upper[xi] = f64::INFINITY;
    let program = LinearProgram {
        n: n + 1,
        maximize: vec![0.0; n + 1],
        rows,
        lower,
        upper,
    };
    let sol = lp::solve(&program, 0)?;
    match sol.status {
        LpStatus::Optimal => {
            let m = sol.x[xi];
            Ok(Some((0..n).map(|k| sol.x[k] + m).collect()))
        }
        LpStatus::Infeasible { .. } => Ok(None),
        LpStatus::Unbounded => Ok(None),
    }
}

/// Criterion value of a concrete signal (suprema taken over all of time,
/// including the zero tail).
pub fn evaluate_cost(p: &ProblemData, crit: Criterion, sig: &GridSignal) -> f64 {
    let vals = &sig.values;
    match crit {
        Criterion::MaxAmplitude => vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())),
        Criterion::PositivePeak => vals.iter().fold(0.0f64, |a, &v| a.max(v)),
        Criterion::Overshoot => vals.iter().fold(0.0f64, |a, &v| a.max(-v)),
        Criterion::Fluctuation => {
            let hi = vals.iter().fold(0.0f64, |a, &v| a.max(v));
            let lo = vals.iter().fold(0.0f64, |a, &v| a.min(v));
            0.5 * (hi - lo)
        }
        Criterion::Undershoot => {
            // sup of (e - w)+ : linear-in-segment e against smooth w, so
            // sample each segment and polish the best bracket.
            let mut best = 0.0f64;
            let g = |t: f64| sig.eval(t) - p.w_eval(t);
            for k in 0..sig.times.len().saturating_sub(1) {
                let (a, b) = (sig.times[k], sig.times[k + 1]);
                if b <= a {
                    continue;
                }
                let mut seg_best = (a, g(a));
                for j in 1..=8 {
                    let t = a + (b - a) * j as f64 / 8.0;
                    let v = g(t);
                    if v > seg_best.1 {
                        seg_best = (t, v);
                    }
                }
                if seg_best.1 > best - 1e-12 {
                    let lo = (seg_best.0 - (b - a) / 8.0).max(a);
                    let hi = (seg_best.0 + (b - a) / 8.0).min(b);
                    let (_, neg_min) = golden_min(|t| -g(t), lo, hi, 60);
                    best = best.max(-neg_min).max(seg_best.1);
                }
            }
            best
        }
    }
}

fn moment_residual(p: &ProblemData, d: &Discretization, values: &[f64]) -> f64 {
    d.moments
        .iter()
        .zip(&p.b_vec)
        .map(|(coef, &rhs)| {
            let got: f64 = coef.iter().zip(values).map(|(c, v)| c * v).sum();
            (got - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Bisect the level on one fixed discretization.
fn solve_on_grid(
    p: &ProblemData,
    crit: Criterion,
    d: &Discretization,
    envelope: Option<&Envelope>,
    opts: &PrimalOptions,
) -> Result<Option<PrimalResult>> {
    // Find a feasible level by doubling.
    let mut hi = 1.0;
    let mut hi_sol = None;
    for _ in 0..60 {
        if let Some(x) = feasible_at(p, crit, d, envelope, hi)? {
            hi_sol = Some(x);
            break;
        }
        hi *= 2.0;
        if hi > 1e15 {
            break;
        }
    }
    let Some(mut sol) = hi_sol else {
        return Ok(None); // horizon too short to meet the pairings
    };
    let mut steps = 0usize;
    let mut lo = 0.0f64;
    if let Some(x) = feasible_at(p, crit, d, envelope, 0.0)? {
        sol = x;
    } else {
        for _ in 0..opts.bisections {
            steps += 1;
            let mid = 0.5 * (lo + hi);
            if let Some(x) = feasible_at(p, crit, d, envelope, mid)? {
                sol = x;
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-9 * (1.0 + hi) {
                break;
            }
        }
    }
    let signal = GridSignal {
        times: d.grid.clone(),
        values: sol.clone(),
    };
    Ok(Some(PrimalResult {
        value: evaluate_cost(p, crit, &signal),
        moment_residual: moment_residual(p, d, &sol),
        grid_points: d.grid.len(),
        horizon: *d.grid.last().unwrap(),
        bisections: steps,
        signal,
    }))
}

/// Minimize the criterion over achievable piecewise-linear signals.
pub fn solve_primal(
    p: &ProblemData,
    crit: Criterion,
    envelope: Option<&Envelope>,
    opts: &PrimalOptions,
) -> Result<PrimalResult> {
    if crit == Criterion::Undershoot {
        p.check_reference_nonneg()?;
    }
    if p.modes.is_empty() {
        // No interpolation constraints: the zero signal is achievable.
        return Ok(PrimalResult {
            value: 0.0,
            signal: GridSignal {
                times: Vec::new(),
                values: Vec::new(),
            },
            moment_residual: 0.0,
            grid_points: 0,
            horizon: 0.0,
            bisections: 0,
        });
    }
    let mut t_end = opts.horizon.unwrap_or(10.0 / p.x_min);
    if let Some(env) = envelope {
        t_end = t_end.max(2.0 * env.t_bar);
    }

    // Make sure the horizon admits any feasible signal at all, doubling a
    // few times if the pairings cannot be met on a short support.
    let mut n = opts.base_grid.min(opts.max_grid);
    let mut current: Option<PrimalResult> = None;
    for _ in 0..4 {
        let d = discretize(p, crit, t_end, n, envelope);
        match solve_on_grid(p, crit, &d, envelope, opts)? {
            Some(r) => {
                current = Some(r);
                break;
            }
            None => t_end *= 2.0,
        }
    }
    let mut result = current.ok_or(Error::HorizonExhausted { horizon: t_end })?;

    // Refine the grid until the value settles or the cap is reached.
    while n < opts.max_grid {
        n = (2 * n).min(opts.max_grid);
        let d = discretize(p, crit, t_end, n, envelope);
        let Some(next) = solve_on_grid(p, crit, &d, envelope, opts)? else {
            break;
        };
        let settled = (next.value - result.value).abs() <= opts.tol * (1.0 + next.value.abs());
        // Both are achievable values; keep the better (smaller) one.
        if next.value <= result.value {
            result = next;
        }
        if settled {
            break;
        }
    }
    Ok(result)
}
