//! Dense revised simplex for small and mid-size linear programs.
//!
//! Handles general variable bounds (including free and fixed variables),
//! `<=` and `=` rows, and runs the classic two phases: a feasibility phase
//! with artificial variables where the starting point needs one, then the
//! actual objective. The basis inverse is kept explicitly and refreshed
//! periodically by full refactorization, which is plenty for the problem
//! sizes produced here (tens of rows for interpolation systems, a few
//! thousand for discretized sup-norm duals).
//!
//! Pricing is Dantzig's rule with an automatic fallback to Bland's rule
//! after a run of degenerate steps, so cycling cannot persist.

// Kernel loops index a flat row-major basis inverse alongside work arrays;
// explicit indices keep the stride arithmetic visible.
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

/// One sparse constraint row `sum coeffs . x (<=|=) rhs`.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// Maximization problem over `n` structural variables with box bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub n: usize,
    /// Objective coefficients, length `n`; the problem is a maximization.
    pub maximize: Vec<f64>,
    pub rows: Vec<LpRow>,
    /// Per-variable bounds; use `f64::NEG_INFINITY` / `f64::INFINITY` for
    /// one-sided or free variables.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal,
    Infeasible { residual: f64 },
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values (meaningful for `Optimal`).
    pub x: Vec<f64>,
    pub value: f64,
    /// One multiplier per constraint row (phase-2 basis).
    pub row_duals: Vec<f64>,
    pub iterations: usize,
}

const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const DEGEN_STEP: f64 = 1e-11;
const REFACTOR_EVERY: usize = 256;

struct Tableau {
    m: usize,
    /// Sparse columns: structural, then slacks, then artificials.
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    /// Current value of every column; basic entries are kept in sync.
    xval: Vec<f64>,
    basic: Vec<usize>,
    /// Position in `basic` for basic columns.
    basis_pos: Vec<Option<usize>>,
    /// Dense row-major basis inverse.
    binv: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    /// w = B^inv A_col.
    fn ftran(&self, col: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, a) in &self.cols[col] {
            for r in 0..self.m {
                out[r] += self.binv[r * self.m + i] * a;
            }
        }
    }

    /// y = c_B B^inv for the given full cost vector.
    fn btran(&self, cost: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, &bc) in self.basic.iter().enumerate() {
            let cb = cost[bc];
            if cb != 0.0 {
                for i in 0..self.m {
                    out[i] += cb * self.binv[k * self.m + i];
                }
            }
        }
    }

    fn reduced_cost(&self, cost: &[f64], y: &[f64], col: usize) -> f64 {
        let mut acc = cost[col];
        for &(i, a) in &self.cols[col] {
            acc -= y[i] * a;
        }
        acc
    }

    /// Rebuild the basis inverse and basic values from scratch.
    fn refactorize(&mut self) -> Result<()> {
        let m = self.m;
        // Gauss-Jordan with partial pivoting on [B | I].
        let mut mat = vec![0.0; m * m];
        for (k, &bc) in self.basic.iter().enumerate() {
            for &(i, a) in &self.cols[bc] {
                mat[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = mat[col * m + col].abs();
            for r in col + 1..m {
                let v = mat[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= 1e-12 {
                return Err(Error::LpIterationLimit {
                    iterations: self.iterations,
                });
            }
            if piv != col {
                for j in 0..m {
                    mat.swap(col * m + j, piv * m + j);
                    inv.swap(col * m + j, piv * m + j);
                }
            }
            let d = mat[col * m + col];
            for j in 0..m {
                mat[col * m + j] /= d;
                inv[col * m + j] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = mat[r * m + col];
                    if f != 0.0 {
                        for j in 0..m {
                            mat[r * m + j] -= f * mat[col * m + j];
                            inv[r * m + j] -= f * inv[col * m + j];
                        }
                    }
                }
            }
        }
        // binv rows must be indexed by basis position k: row k of B^inv maps
        // residuals to the k-th basic variable. After Gauss-Jordan, inv holds
        // B^{-1} with rows in equation order; basis position k corresponds to
        // column k of B, i.e. row k of the inverse.
        self.binv.copy_from_slice(&inv);
        self.recompute_basics();
        Ok(())
    }

    /// x_B = B^inv (b - sum over nonbasic of A_j x_j).
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut resid = self.rhs.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.basis_pos[j].is_some() {
                continue;
            }
            let v = self.xval[j];
            if v != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * v;
                }
            }
        }
        for k in 0..m {
            let mut acc = 0.0;
            for i in 0..m {
                acc += self.binv[k * m + i] * resid[i];
            }
            self.xval[self.basic[k]] = acc;
        }
    }
}

/// Solve a bounded-variable LP. `max_iter = 0` picks a size-based default.
pub fn solve(lp: &LinearProgram, max_iter: usize) -> Result<LpSolution> {
    let m = lp.rows.len();
    let n = lp.n;
    assert_eq!(lp.maximize.len(), n);
    assert_eq!(lp.lower.len(), n);
    assert_eq!(lp.upper.len(), n);
    let max_iter = if max_iter == 0 { 200 * (m + n) + 20_000 } else { max_iter };

    // Assemble columns: structural, slacks, then artificials as needed.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            debug_assert!(j < n);
            if a != 0.0 {
                cols[j].push((i, a));
            }
        }
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let mut xval: Vec<f64> = (0..n)
        .map(|j| {
            if lp.lower[j].is_finite() {
                lp.lower[j]
            } else if lp.upper[j].is_finite() {
                lp.upper[j]
            } else {
                0.0
            }
        })
        .collect();

    let mut slack_of_row: Vec<Option<usize>> = vec![None; m];
    for (i, row) in lp.rows.iter().enumerate() {
        if row.kind == RowKind::Le {
            let idx = cols.len();
            cols.push(vec![(i, 1.0)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            xval.push(0.0);
            slack_of_row[i] = Some(idx);
        }
    }

    // Residual at the initial nonbasic point decides the starting basis.
    let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
    let mut resid = rhs.clone();
    for (j, col) in cols.iter().enumerate().take(n) {
        let v = xval[j];
        if v != 0.0 {
            for &(i, a) in col {
                resid[i] -= a * v;
            }
        }
    }

    let mut basic: Vec<usize> = Vec::with_capacity(m);
    let mut need_phase1 = false;
    let mut art_cols: Vec<usize> = Vec::new();
    for i in 0..m {
        match (lp.rows[i].kind, slack_of_row[i]) {
            (RowKind::Le, Some(s)) if resid[i] >= 0.0 => {
                xval[s] = resid[i];
                basic.push(s);
            }
            _ => {
                // Artificial with sign matching the residual.
                let idx = cols.len();
                let sigma = if resid[i] >= 0.0 { 1.0 } else { -1.0 };
                cols.push(vec![(i, sigma)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                xval.push(resid[i].abs());
                basic.push(idx);
                art_cols.push(idx);
                if resid[i].abs() > 0.0 {
                    need_phase1 = true;
                }
            }
        }
    }
    let total = cols.len();

    let mut basis_pos = vec![None; total];
    for (k, &bc) in basic.iter().enumerate() {
        basis_pos[bc] = Some(k);
    }

    let mut tab = Tableau {
        m,
        cols,
        lower,
        upper,
        rhs,
        xval,
        basic,
        basis_pos,
        binv: {
            let mut b = vec![0.0; m * m];
            for i in 0..m {
                b[i * m + i] = 1.0;
            }
            b
        },
        iterations: 0,
    };
    // The initial basis is diagonal with entries +/-1 (slacks and signed
    // artificials); invert the signs directly.
    for k in 0..m {
        let bc = tab.basic[k];
        let sign = tab.cols[bc][0].1;
        tab.binv[k * m + k] = 1.0 / sign;
    }

    if need_phase1 || !art_cols.is_empty() {
        let mut cost1 = vec![0.0; total];
        for &a in &art_cols {
            cost1[a] = -1.0;
        }
        let status = run_simplex(&mut tab, &cost1, total, max_iter)?;
        if let LpStatus::Unbounded = status {
            // Cannot happen: the phase objective is bounded above by 0.
            return Err(Error::LpIterationLimit {
                iterations: tab.iterations,
            });
        }
        let infeas: f64 = art_cols.iter().map(|&a| tab.xval[a]).sum();
        let scale = 1.0 + tab.rhs.iter().fold(0.0f64, |acc, &b| acc.max(b.abs()));
        if infeas > 1e-9 * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible { residual: infeas },
                x: tab.xval[..n].to_vec(),
                value: f64::NAN,
                row_duals: vec![0.0; m],
                iterations: tab.iterations,
            });
        }
        // Pin artificials at zero so they can never carry value again; the
        // ratio test then ejects any basic one the moment it is threatened.
        for &a in &art_cols {
            tab.lower[a] = 0.0;
            tab.upper[a] = 0.0;
            if tab.basis_pos[a].is_none() {
                tab.xval[a] = 0.0;
            }
        }
    }

    // Phase 2.
    let mut cost2 = vec![0.0; total];
    cost2[..n].copy_from_slice(&lp.maximize);
    let status = run_simplex(&mut tab, &cost2, total, max_iter)?;

    let value = lp
        .maximize
        .iter()
        .zip(&tab.xval)
        .map(|(c, x)| c * x)
        .sum::<f64>();
    let mut y = vec![0.0; m];
    tab.btran(&cost2, &mut y);
    Ok(LpSolution {
        status: match status {
            LpStatus::Unbounded => LpStatus::Unbounded,
            _ => LpStatus::Optimal,
        },
        x: tab.xval[..n].to_vec(),
        value,
        row_duals: y,
        iterations: tab.iterations,
    })
}

fn run_simplex(tab: &mut Tableau, cost: &[f64], total: usize, max_iter: usize) -> Result<LpStatus> {
    let m = tab.m;
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mut since_refactor = 0usize;
    let mut degen_run = 0usize;
    let mut bland_left = 0usize;

    loop {
        if tab.iterations >= max_iter {
            return Err(Error::LpIterationLimit {
                iterations: tab.iterations,
            });
        }
        tab.btran(cost, &mut y);

        // Pricing.
        let mut entering: Option<(usize, f64, f64)> = None; // (col, |d|, direction)
        for j in 0..total {
            if tab.basis_pos[j].is_some() {
                continue;
            }
            if tab.lower[j] == tab.upper[j] {
                continue; // fixed (includes pinned artificials)
            }
            let d = tab.reduced_cost(cost, &y, j);
            let free = !tab.lower[j].is_finite() && !tab.upper[j].is_finite();
            let dir = if free {
                if d > DUAL_TOL {
                    1.0
                } else if d < -DUAL_TOL {
                    -1.0
                } else {
                    0.0
                }
            } else if (tab.xval[j] - tab.lower[j]).abs() <= 1e-9 * (1.0 + tab.lower[j].abs())
                && tab.lower[j].is_finite()
            {
                if d > DUAL_TOL {
                    1.0
                } else {
                    0.0
                }
            } else if (tab.xval[j] - tab.upper[j]).abs() <= 1e-9 * (1.0 + tab.upper[j].abs())
                && tab.upper[j].is_finite()
            {
                if d < -DUAL_TOL {
                    -1.0
                } else {
                    0.0
                }
            } else {
                // Interior nonbasic (can only arise for free columns).
                if d > DUAL_TOL {
                    1.0
                } else if d < -DUAL_TOL {
                    -1.0
                } else {
                    0.0
                }
            };
            if dir == 0.0 {
                continue;
            }
            if bland_left > 0 {
                entering = Some((j, d.abs(), dir));
                break;
            }
            if entering.is_none_or(|(_, best, _)| d.abs() > best) {
                entering = Some((j, d.abs(), dir));
            }
        }

        let (q, _, dir) = match entering {
            Some(e) => e,
            None => return Ok(LpStatus::Optimal),
        };

        tab.ftran(q, &mut w);

        // Ratio test: how far can x_q move in direction `dir`.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None; // basis position
        // Entering variable's own opposite bound.
        let own_range = tab.upper[q] - tab.lower[q];
        if own_range.is_finite() {
            theta = own_range;
        }
        for k in 0..m {
            let delta = w[k] * dir; // basic k changes by -delta per unit step
            if delta > PIVOT_TOL {
                let bc = tab.basic[k];
                if tab.lower[bc].is_finite() {
                    let room = tab.xval[bc] - tab.lower[bc];
                    let t = room.max(0.0) / delta;
                    if t < theta - 1e-15 || (t < theta + 1e-15 && pick_leaving(tab, leaving, k, &w, bland_left > 0)) {
                        theta = t.max(0.0);
                        leaving = Some(k);
                    }
                }
            } else if delta < -PIVOT_TOL {
                let bc = tab.basic[k];
                if tab.upper[bc].is_finite() {
                    let room = tab.upper[bc] - tab.xval[bc];
                    let t = room.max(0.0) / (-delta);
                    if t < theta - 1e-15 || (t < theta + 1e-15 && pick_leaving(tab, leaving, k, &w, bland_left > 0)) {
                        theta = t.max(0.0);
                        leaving = Some(k);
                    }
                }
            }
        }

        if !theta.is_finite() {
            return Ok(LpStatus::Unbounded);
        }

        tab.iterations += 1;
        since_refactor += 1;
        if theta <= DEGEN_STEP {
            degen_run += 1;
            if degen_run >= 60 && bland_left == 0 {
                bland_left = 400;
            }
        } else {
            degen_run = 0;
        }
        bland_left = bland_left.saturating_sub(1);

        match leaving {
            None => {
                // Bound-to-bound flip of the entering variable.
                for k in 0..m {
                    let bc = tab.basic[k];
                    tab.xval[bc] -= w[k] * dir * theta;
                }
                // Land exactly on the opposite bound.
                tab.xval[q] = if dir > 0.0 { tab.upper[q] } else { tab.lower[q] };
            }
            Some(r) => {
                let pivot = w[r];
                // Move values.
                for k in 0..m {
                    let bc = tab.basic[k];
                    tab.xval[bc] -= w[k] * dir * theta;
                }
                let out_col = tab.basic[r];
                // Snap the leaving variable exactly onto the bound it hit.
                let out_val = tab.xval[out_col];
                let snap = if w[r] * dir > 0.0 {
                    tab.lower[out_col]
                } else {
                    tab.upper[out_col]
                };
                tab.xval[out_col] = if snap.is_finite() { snap } else { out_val };
                tab.xval[q] += dir * theta;

                // Basis exchange and product-form update of binv.
                tab.basis_pos[out_col] = None;
                tab.basic[r] = q;
                tab.basis_pos[q] = Some(r);
                let inv_p = 1.0 / pivot;
                for j in 0..m {
                    tab.binv[r * m + j] *= inv_p;
                }
                for k in 0..m {
                    if k != r {
                        let f = w[k];
                        if f != 0.0 {
                            for j in 0..m {
                                tab.binv[k * m + j] -= f * tab.binv[r * m + j];
                            }
                        }
                    }
                }
            }
        }

        if since_refactor >= REFACTOR_EVERY {
            tab.refactorize()?;
            since_refactor = 0;
        }
    }
}

/// Tie-break for the leaving row: Bland mode takes the smallest basic column
/// index; otherwise prefer the larger pivot magnitude for stability.
fn pick_leaving(tab: &Tableau, current: Option<usize>, cand: usize, w: &[f64], bland: bool) -> bool {
    match current {
        None => true,
        Some(cur) => {
            if bland {
                tab.basic[cand] < tab.basic[cur]
            } else {
                w[cand].abs() > w[cur].abs()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type RawRow = (Vec<(usize, f64)>, RowKind, f64);

    fn lp(
        n: usize,
        maximize: Vec<f64>,
        rows: Vec<RawRow>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> LinearProgram {
        LinearProgram {
            n,
            maximize,
            rows: rows
                .into_iter()
                .map(|(coeffs, kind, rhs)| LpRow { coeffs, kind, rhs })
                .collect(),
            lower,
            upper,
        }
    }

    #[test]
    fn simple_box() {
        let p = lp(
            2,
            vec![1.0, 1.0],
            vec![(vec![(0, 1.0), (1, 1.0)], RowKind::Le, 1.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-9);
        // The binding row carries a unit multiplier.
        assert!((s.row_duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_bounds() {
        let p = lp(
            2,
            vec![1.0, 0.0],
            vec![(vec![(0, 1.0), (1, 1.0)], RowKind::Eq, 2.0)],
            vec![0.0, 0.0],
            vec![1.5, f64::INFINITY],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.5).abs() < 1e-9);
        assert!((s.x[0] - 1.5).abs() < 1e-9);
        assert!((s.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        let p = lp(
            1,
            vec![0.0],
            vec![(vec![(0, 1.0)], RowKind::Le, -1.0)],
            vec![0.0],
            vec![f64::INFINITY],
        );
        let s = solve(&p, 0).unwrap();
        assert!(matches!(s.status, LpStatus::Infeasible { residual } if residual > 0.5));
    }

    #[test]
    fn unbounded_detected() {
        let p = lp(
            1,
            vec![1.0],
            vec![],
            vec![0.0],
            vec![f64::INFINITY],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables() {
        // max y subject to y <= x and y <= -x: optimum 0 at x = 0.
        let p = lp(
            2,
            vec![0.0, 1.0],
            vec![
                (vec![(1, 1.0), (0, -1.0)], RowKind::Le, 0.0),
                (vec![(1, 1.0), (0, 1.0)], RowKind::Le, 0.0),
            ],
            vec![f64::NEG_INFINITY, f64::NEG_INFINITY],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(s.value.abs() < 1e-9);
    }

    #[test]
    fn bound_flip_reaches_upper() {
        let p = lp(
            1,
            vec![1.0],
            vec![(vec![(0, 1.0)], RowKind::Le, 5.0)],
            vec![-1.0],
            vec![2.0],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_equality_needs_artificial() {
        // x + y = -3 with x in [-5, 0], y in [-5, 0].
        let p = lp(
            2,
            vec![1.0, 2.0],
            vec![(vec![(0, 1.0), (1, 1.0)], RowKind::Eq, -3.0)],
            vec![-5.0, -5.0],
            vec![0.0, 0.0],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // Maximize x + 2y on the segment: best at y = 0, x = -3.
        assert!((s.value - -3.0).abs() < 1e-9);
        assert!((s.x[0] - -3.0).abs() < 1e-9);
    }

    #[test]
    fn beale_cycling_example() {
        // Classic degenerate example; Dantzig pricing cycles on it without
        // safeguards. Optimal value is 1/20.
        let p = lp(
            4,
            vec![0.75, -150.0, 0.02, -6.0],
            vec![
                (
                    vec![(0, 0.25), (1, -60.0), (2, -1.0 / 25.0), (3, 9.0)],
                    RowKind::Le,
                    0.0,
                ),
                (
                    vec![(0, 0.5), (1, -90.0), (2, -1.0 / 50.0), (3, 3.0)],
                    RowKind::Le,
                    0.0,
                ),
                (vec![(2, 1.0)], RowKind::Le, 1.0),
            ],
            vec![0.0; 4],
            vec![f64::INFINITY; 4],
        );
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 0.05).abs() < 1e-9, "value {}", s.value);
    }

    #[test]
    fn larger_random_feasibility() {
        // Random-ish dense equality system with known feasible interior
        // point; checks phase 1 + refactorization paths.
        let n = 40;
        let m = 12;
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let x_feas: Vec<f64> = (0..n).map(|_| next().abs()).collect();
        let mut rows = Vec::new();
        for _ in 0..m {
            let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, next())).collect();
            let rhs: f64 = coeffs.iter().map(|&(j, a)| a * x_feas[j]).sum();
            rows.push((coeffs, RowKind::Eq, rhs));
        }
        let obj: Vec<f64> = (0..n).map(|_| next()).collect();
        let p = lp(n, obj.clone(), rows, vec![0.0; n], vec![2.0; n]);
        let s = solve(&p, 0).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // Optimal must be at least the feasible point's objective.
        let feas_val: f64 = obj.iter().zip(&x_feas).map(|(c, x)| c * x).sum();
        assert!(s.value >= feas_val - 1e-7);
        // And the solution must satisfy the rows.
        for row in &p.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * s.x[j]).sum();
            assert!((lhs - row.rhs).abs() < 1e-7);
        }
    }
}
