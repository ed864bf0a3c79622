//! Polynomials, rational functions, and the exponential-mode integrals
//! used throughout the solvers.
//!
//! Polynomials are dense real coefficient lists in ascending order. Roots
//! come from a simultaneous (Aberth–Ehrlich) iteration with deterministic
//! restarts, followed by conjugate pairing and relative clustering, so the
//! same input always produces the same output bits.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance under which two roots are treated as the same point.
pub const ROOT_CLUSTER_TOL: f64 = 1e-7;

/// Relative tolerance for snapping a root with tiny imaginary part onto the
/// real axis during conjugate pairing.
const REAL_SNAP_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Dense real polynomial, coefficients in ascending order of power.
///
/// The highest-order stored coefficient is nonzero unless the polynomial is
/// identically zero (stored as a single `0.0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Build from ascending coefficients, trimming trailing zero terms.
    pub fn new(mut coeffs: Vec<f64>) -> Poly {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn eval_real(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    /// Sum of |c_k| |s|^k; the natural scale for residual tests at `s`.
    pub fn scale_at(&self, s_abs: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * s_abs + c.abs();
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        if self.degree() == 0 {
            return Poly::new(vec![0.0]);
        }
        let d: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Poly::new(d)
    }

    /// Multiply out `leading * prod (s - r_i)`. Imaginary parts must cancel,
    /// i.e. the root list must be closed under conjugation.
    pub fn from_roots(leading: f64, roots: &[Complex64]) -> Poly {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Poly::new(acc.iter().map(|c| c.re * leading).collect())
    }

    /// Taylor coefficients of the polynomial re-expanded around `a`:
    /// p(a + u) = sum_k out[k] u^k. Exact polynomial arithmetic.
    pub fn shift(&self, a: Complex64) -> Vec<Complex64> {
        let n = self.coeffs.len();
        let mut work: Vec<Complex64> = self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        let mut out = Vec::with_capacity(n);
        // Repeated synthetic division by (s - a); remainders are the Taylor coefficients.
        for _ in 0..n {
            for k in (0..work.len() - 1).rev() {
                let up = work[k + 1] * a;
                work[k] += up;
            }
            out.push(work[0]);
            work.remove(0);
            if work.is_empty() {
                break;
            }
        }
        while out.len() < n {
            out.push(Complex64::new(0.0, 0.0));
        }
        out
    }

    /// All complex roots. `seed` drives the perturbed restarts taken when the
    /// base iteration stalls; the first attempt is always the same.
    pub fn roots(&self, seed: u64) -> Result<Vec<Complex64>> {
        if self.degree() == 0 {
            return Err(Error::DegreeTooSmall);
        }
        let mut coeffs = self.coeffs.clone();
        let mut roots = Vec::with_capacity(self.degree());
        // Exact zero constant terms give exact roots at the origin.
        while coeffs.len() > 1 && coeffs[0] == 0.0 {
            roots.push(Complex64::new(0.0, 0.0));
            coeffs.remove(0);
        }
        let deg = coeffs.len() - 1;
        match deg {
            0 => {}
            1 => roots.push(Complex64::new(-coeffs[0] / coeffs[1], 0.0)),
            2 => roots.extend(quadratic_roots(coeffs[0], coeffs[1], coeffs[2])),
            _ => roots.extend(aberth(&coeffs, seed)?),
        }
        Ok(pair_conjugates(roots))
    }

    /// Roots grouped into clusters within [`ROOT_CLUSTER_TOL`] (relative),
    /// returned as (cluster mean, multiplicity).
    pub fn roots_clustered(&self, seed: u64) -> Result<Vec<(Complex64, usize)>> {
        Ok(cluster_roots(&self.roots(seed)?))
    }
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> [Complex64; 2] {
    let disc = Complex64::new(c1 * c1 - 4.0 * c2 * c0, 0.0).sqrt();
    // Pick the sign that avoids cancellation in -c1 ± disc.
    let q = if c1 >= 0.0 { -(disc + c1) } else { disc - c1 } * 0.5;
    let r1 = q / c2;
    let r2 = if q.norm() > 0.0 {
        Complex64::new(c0, 0.0) / q
    } else {
        Complex64::new(0.0, 0.0)
    };
    [r1, r2]
}

/// Tiny deterministic generator for restart perturbations.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_f64(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 53) as f64
}

/// Simultaneous root iteration for degree >= 3 with nonzero constant term.
fn aberth(coeffs: &[f64], seed: u64) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    let monic: Vec<f64> = coeffs.iter().map(|&c| c / lead).collect();
    let poly = Poly { coeffs: monic.clone() };
    let deriv = poly.derivative();

    let radius = 1.0 + monic[..deg].iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let mut rng = seed ^ 0x7c91_6e5a_1f0b_d84d;

    for attempt in 0..9 {
        let mut z: Vec<Complex64> = (0..deg)
            .map(|k| {
                let (r, phase) = if attempt == 0 {
                    (radius * (0.5 + 0.4 * (k as f64 / deg as f64)), 0.43)
                } else {
                    (
                        radius * (0.3 + 1.2 * unit_f64(&mut rng)),
                        2.0 * std::f64::consts::PI * unit_f64(&mut rng),
                    )
                };
                let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / deg as f64 + phase;
                Complex64::new(r * theta.cos(), r * theta.sin())
            })
            .collect();

        let mut ok = false;
        for _ in 0..400 {
            let mut max_step = 0.0f64;
            let mut bad = false;
            for k in 0..deg {
                let p = poly.eval(z[k]);
                let dp = deriv.eval(z[k]);
                if !p.re.is_finite() || !p.im.is_finite() {
                    bad = true;
                    break;
                }
                if p.norm() == 0.0 {
                    continue;
                }
                let newton = if dp.norm() > 0.0 { p / dp } else { Complex64::new(1e-3, 1e-3) };
                let mut sum = Complex64::new(0.0, 0.0);
                for (j, &zj) in z.iter().enumerate() {
                    if j != k {
                        let d = z[k] - zj;
                        if d.norm() > 0.0 {
                            sum += d.inv();
                        }
                    }
                }
                let denom = Complex64::new(1.0, 0.0) - newton * sum;
                let step = if denom.norm() > 1e-300 { newton / denom } else { newton };
                z[k] -= step;
                let rel = step.norm() / (1.0 + z[k].norm());
                max_step = max_step.max(rel);
            }
            if bad {
                break;
            }
            if max_step <= 1e-14 {
                ok = true;
                break;
            }
        }
        if ok {
            // Newton polish against the monic polynomial.
            for zk in z.iter_mut() {
                for _ in 0..3 {
                    let p = poly.eval(*zk);
                    let dp = deriv.eval(*zk);
                    if dp.norm() > 0.0 {
                        *zk -= p / dp;
                    }
                }
            }
            let residual_ok = z
                .iter()
                .all(|&zk| poly.eval(zk).norm() <= 1e-8 * poly.scale_at(zk.norm()).max(1e-300));
            if residual_ok {
                return Ok(z);
            }
        }
    }
    Err(Error::RootsDidNotConverge { degree: deg })
}

/// Enforce closure under conjugation: snap near-real roots onto the axis and
/// replace complex near-pairs by exact conjugate pairs.
fn pair_conjugates(mut roots: Vec<Complex64>) -> Vec<Complex64> {
    for r in roots.iter_mut() {
        if r.im.abs() <= REAL_SNAP_TOL * (1.0 + r.norm()) {
            r.im = 0.0;
        }
    }
    let mut out: Vec<Complex64> = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let zi = roots[i];
        if zi.im == 0.0 {
            out.push(zi);
            continue;
        }
        // Find the closest unused root to the conjugate.
        let target = zi.conj();
        let mut best: Option<(usize, f64)> = None;
        for (j, &zj) in roots.iter().enumerate() {
            if used[j] || zj.im * zi.im > 0.0 {
                continue;
            }
            let d = (zj - target).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        match best {
            Some((j, d)) if d <= 1e-6 * (1.0 + zi.norm()) => {
                used[j] = true;
                let mean = (zi + roots[j].conj()) * 0.5;
                out.push(mean);
                out.push(mean.conj());
            }
            _ => out.push(zi),
        }
    }
    out.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Greedy clustering of a root list at [`ROOT_CLUSTER_TOL`] relative distance.
pub fn cluster_roots(roots: &[Complex64]) -> Vec<(Complex64, usize)> {
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &r in roots {
        let mut placed = false;
        for (center, count) in clusters.iter_mut() {
            if (r - *center).norm() <= ROOT_CLUSTER_TOL * (1.0 + center.norm()) {
                let n = *count as f64;
                *center = (*center * n + r) / (n + 1.0);
                *count += 1;
                placed = true;
                break;
            }
        }
        if !placed {
            clusters.push((r, 1));
        }
    }
    for (center, _) in clusters.iter_mut() {
        if center.im.abs() <= REAL_SNAP_TOL * (1.0 + center.norm()) {
            center.im = 0.0;
        }
    }
    clusters.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    clusters
}

// ---------------------------------------------------------------------------
// Rational functions and partial fractions
// ---------------------------------------------------------------------------

/// One term `coeff * t^power * exp(pole * t)` of a time-domain expansion.
///
/// Terms with non-real poles always occur in conjugate pairs with conjugate
/// coefficients, so sums of terms are real-valued.
#[derive(Debug, Clone)]
pub struct PFTerm {
    pub pole: Complex64,
    pub power: usize,
    pub coeff: Complex64,
}

/// Real rational function `num(s) / den(s)`.
///
/// Construction cancels numerator/denominator roots that coincide within the
/// clustering tolerance, so the stored pair has no common root.
#[derive(Debug, Clone)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

impl RatFun {
    pub fn new(num: Poly, den: Poly) -> Result<RatFun> {
        RatFun::new_seeded(num, den, 0)
    }

    pub fn new_seeded(num: Poly, den: Poly, seed: u64) -> Result<RatFun> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_zero() || num.degree() == 0 || den.degree() == 0 {
            return Ok(RatFun { num, den });
        }
        let nroots = num.roots(seed)?;
        let droots = den.roots(seed.wrapping_add(1))?;
        let mut keep_n = vec![true; nroots.len()];
        let mut keep_d = vec![true; droots.len()];
        let mut cancelled = false;
        for (i, &rn) in nroots.iter().enumerate() {
            let mut best: Option<(usize, f64)> = None;
            for (j, &rd) in droots.iter().enumerate() {
                if !keep_d[j] {
                    continue;
                }
                let d = (rn - rd).norm();
                if d <= ROOT_CLUSTER_TOL * (1.0 + rn.norm()) && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            if let Some((j, _)) = best {
                keep_n[i] = false;
                keep_d[j] = false;
                cancelled = true;
            }
        }
        if !cancelled {
            return Ok(RatFun { num, den });
        }
        let rn: Vec<Complex64> = nroots
            .iter()
            .zip(&keep_n)
            .filter(|(_, &k)| k)
            .map(|(&r, _)| r)
            .collect();
        let rd: Vec<Complex64> = droots
            .iter()
            .zip(&keep_d)
            .filter(|(_, &k)| k)
            .map(|(&r, _)| r)
            .collect();
        Ok(RatFun {
            num: Poly::from_roots(num.leading(), &pair_conjugates(rn)),
            den: Poly::from_roots(den.leading(), &pair_conjugates(rd)),
        })
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    /// Degree drop from numerator to denominator; negative means improper.
    pub fn relative_degree(&self) -> i64 {
        if self.num.is_zero() {
            return i64::MAX;
        }
        self.den.degree() as i64 - self.num.degree() as i64
    }

    /// Evaluate at `s`, rejecting points within relative tolerance of a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval(s);
        let scale = self.den.scale_at(s.norm()).max(f64::MIN_POSITIVE);
        if d.norm() <= 1e-12 * scale {
            return Err(Error::EvalNearPole { re: s.re, im: s.im });
        }
        Ok(self.num.eval(s) / d)
    }

    /// Coefficients `c_1, c_2, ...` of the large-`s` expansion
    /// `num/den = c_1/s + c_2/s^2 + ...` (long division in 1/s).
    pub fn asymptotic_series(&self, n: usize) -> Vec<f64> {
        let q = self.den.degree();
        let r = self.num.degree();
        if self.num.is_zero() {
            return vec![0.0; n];
        }
        // In u = 1/s: num = s^r N(u), den = s^q D(u) with N, D read high-to-low.
        let nn: Vec<f64> = self.num.coeffs.iter().rev().cloned().collect();
        let dd: Vec<f64> = self.den.coeffs.iter().rev().cloned().collect();
        let mut series = vec![0.0; n + 1];
        // Power series of N(u)/D(u).
        let mut quot = vec![0.0; n + 1];
        for k in 0..=n {
            let mut acc = if k < nn.len() { nn[k] } else { 0.0 };
            for i in 1..=k.min(dd.len() - 1) {
                acc -= dd[i] * quot[k - i];
            }
            quot[k] = acc / dd[0];
        }
        // num/den = u^{q-r} * (N/D)(u); emit coefficients of u^1..u^n.
        let shift = q as i64 - r as i64;
        #[allow(clippy::needless_range_loop)] // j enters the shift arithmetic
        for j in 1..=n {
            let idx = j as i64 - shift;
            if idx >= 0 && (idx as usize) < quot.len() {
                series[j] = quot[idx as usize];
            }
        }
        series[1..].to_vec()
    }

    /// Partial-fraction expansion into time-domain terms. Requires strictly
    /// proper input.
    pub fn partial_fractions(&self, seed: u64) -> Result<Vec<PFTerm>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        if self.relative_degree() < 1 {
            return Err(Error::ReferenceNotStrictlyProper {
                num_deg: self.num.degree(),
                den_deg: self.den.degree(),
            });
        }
        let clusters = self.den.roots_clustered(seed)?;
        let lead = self.den.leading();
        let mut terms = Vec::new();
        for &(pole, mult) in &clusters {
            if pole.im < 0.0 {
                continue; // handled as the conjugate of the matching Im > 0 cluster
            }
            let coeffs = self.expand_at(pole, mult, &clusters, lead);
            for (j, c) in coeffs.into_iter().enumerate() {
                let power = mult - 1 - j;
                let mut fact = 1.0;
                for i in 1..=power {
                    fact *= i as f64;
                }
                let coeff = c / fact;
                if coeff.norm() == 0.0 {
                    continue;
                }
                terms.push(PFTerm { pole, power, coeff });
                if pole.im > 0.0 {
                    terms.push(PFTerm {
                        pole: pole.conj(),
                        power,
                        coeff: coeff.conj(),
                    });
                }
            }
        }
        Ok(terms)
    }

    /// Series coefficients d_0..d_{m-1} of (s-p)^m num/den around p.
    fn expand_at(
        &self,
        pole: Complex64,
        mult: usize,
        clusters: &[(Complex64, usize)],
        den_lead: f64,
    ) -> Vec<Complex64> {
        let a = self.num.shift(pole);
        // q(u) = den(p+u) / u^mult as a power series, built from the other
        // clusters: q(u) = lead * prod_{other} (p + u - p_j)^{m_j}.
        let mut q = vec![Complex64::new(0.0, 0.0); mult];
        q[0] = Complex64::new(den_lead, 0.0);
        for &(other, om) in clusters {
            if (other - pole).norm() <= ROOT_CLUSTER_TOL * (1.0 + pole.norm()) {
                continue;
            }
            for _ in 0..om {
                // Multiply series by ((p - other) + u), truncated at mult terms.
                let base = pole - other;
                let mut next = vec![Complex64::new(0.0, 0.0); mult];
                for k in 0..mult {
                    next[k] += q[k] * base;
                    if k + 1 < mult {
                        next[k + 1] += q[k];
                    }
                }
                q = next;
            }
        }
        // Series division a/q up to order mult-1.
        let mut d = vec![Complex64::new(0.0, 0.0); mult];
        for k in 0..mult {
            let mut acc = if k < a.len() { a[k] } else { Complex64::new(0.0, 0.0) };
            for i in 1..=k {
                acc -= q[i] * d[k - i];
            }
            d[k] = acc / q[0];
        }
        d
    }
}

/// Evaluate a sum of [`PFTerm`]s at time `t`.
pub fn time_eval(terms: &[PFTerm], t: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for term in terms {
        acc += term.coeff * t.powi(term.power as i32) * (term.pole * t).exp();
    }
    acc.re
}

/// First time derivative of a sum of [`PFTerm`]s at `t`.
pub fn time_eval_deriv(terms: &[PFTerm], t: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for term in terms {
        let k = term.power as f64;
        let tk1 = if term.power == 0 { 0.0 } else { t.powi(term.power as i32 - 1) };
        let tk = t.powi(term.power as i32);
        acc += term.coeff * (term.pole * t).exp() * (term.pole * tk + k * tk1);
    }
    acc.re
}

// ---------------------------------------------------------------------------
// Exponential-mode integrals
// ---------------------------------------------------------------------------

/// Whether a mode is the cosine or sine component of a complex point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Cos,
    Sin,
}

/// Closed form of the full-line mass `∫_0^∞ e^{-x t} cos(y t) dt` (or sin).
pub fn mode_mass(x: f64, y: f64, kind: ModeKind) -> f64 {
    let d = x * x + y * y;
    match kind {
        ModeKind::Cos => x / d,
        ModeKind::Sin => y / d,
    }
}

/// (1 - e^{-w}) / w, stable near w = 0.
fn em1_over(w: Complex64) -> Complex64 {
    if w.norm() < 0.25 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..18u32 {
            term = if k == 0 { term } else { term * (-w) / k as f64 };
            acc += term / (k as f64 + 1.0);
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) - (-w).exp()) / w
    }
}

/// (1 - (1 + w) e^{-w}) / w^2, stable near w = 0.
fn em2_over(w: Complex64) -> Complex64 {
    if w.norm() < 0.25 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..18u32 {
            term = if k == 0 { term } else { term * (-w) / k as f64 };
            acc += term / (k as f64 + 2.0);
        }
        acc
    } else {
        (Complex64::new(1.0, 0.0) - (Complex64::new(1.0, 0.0) + w) * (-w).exp()) / (w * w)
    }
}

/// `∫_a^b e^{-z t} dt` in closed form.
pub fn seg_integral(z: Complex64, a: f64, b: f64) -> Complex64 {
    let dt = b - a;
    (-z * a).exp() * dt * em1_over(z * dt)
}

/// `∫_a^b t e^{-z t} dt` in closed form.
pub fn seg_integral_t(z: Complex64, a: f64, b: f64) -> Complex64 {
    let dt = b - a;
    let w = z * dt;
    (-z * a).exp() * (a * dt * em1_over(w) + dt * dt * em2_over(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }

    /// Adaptive Simpson quadrature; independent oracle for the closed forms.
    pub fn quad<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let whole = simpson(f, a, b);
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            quad(f, a, m, tol / 2.0, depth - 1) + quad(f, m, b, tol / 2.0, depth - 1)
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cubic_roots_satisfy_polynomial() {
        let p = Poly::new(vec![1.0, 0.0, 0.0, 1.0]); // s^3 + 1
        let roots = p.roots(0).unwrap();
        assert_eq!(roots.len(), 3);
        for r in &roots {
            assert!(p.eval(*r).norm() < 1e-10, "residual too large at {r}");
        }
        // One real root at -1, one conjugate pair at 0.5 +/- i sqrt(3)/2.
        let real: Vec<_> = roots.iter().filter(|r| r.im == 0.0).collect();
        assert_eq!(real.len(), 1);
        assert!((real[0].re + 1.0).abs() < 1e-12);
        let pair: Vec<_> = roots.iter().filter(|r| r.im != 0.0).collect();
        assert!((pair[0].re - 0.5).abs() < 1e-12);
        assert!((pair[0].im.abs() - 3.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn roots_reconstruct_polynomial() {
        let p = Poly::new(vec![-50.5, 27.25, -3.0, 1.0]);
        let roots = p.roots(0).unwrap();
        let q = Poly::from_roots(p.leading(), &roots);
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn origin_roots_are_exact() {
        let p = Poly::new(vec![0.0, 0.0, 2.0, 1.0]); // s^2 (s + 2)
        let roots = p.roots(0).unwrap();
        assert_eq!(roots.iter().filter(|r| r.re == 0.0 && r.im == 0.0).count(), 2);
    }

    #[test]
    fn clustering_merges_near_roots() {
        let roots = vec![c(1.0, 0.0), c(1.0 + 3e-8, 0.0), c(2.0, 0.0)];
        let clusters = cluster_roots(&roots);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].1, 2);
    }

    #[test]
    fn ratfun_cancels_common_root() {
        // (s - 1)(s + 2) / (s - 1)(s + 3)
        let num = Poly::new(vec![-2.0, 1.0, 1.0]);
        let den = Poly::new(vec![-3.0, 2.0, 1.0]);
        let f = RatFun::new(num, den).unwrap();
        assert_eq!(f.num().degree(), 1);
        assert_eq!(f.den().degree(), 1);
        let v = f.eval(c(2.0, 0.0)).unwrap();
        assert!((v.re - 4.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn eval_near_pole_is_rejected() {
        let f = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![-1.0, 1.0])).unwrap();
        assert!(matches!(
            f.eval(c(1.0 + 1e-14, 0.0)),
            Err(Error::EvalNearPole { .. })
        ));
    }

    #[test]
    fn partial_fractions_step_and_ramp() {
        let step = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![0.0, 1.0])).unwrap();
        let terms = step.partial_fractions(0).unwrap();
        assert_eq!(terms.len(), 1);
        assert!((time_eval(&terms, 0.0) - 1.0).abs() < 1e-14);
        assert!((time_eval(&terms, 7.3) - 1.0).abs() < 1e-12);

        let ramp = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![0.0, 0.0, 1.0])).unwrap();
        let terms = ramp.partial_fractions(0).unwrap();
        for t in [0.0, 0.5, 2.0, 9.0] {
            assert!((time_eval(&terms, t) - t).abs() < 1e-10 * (1.0 + t));
        }
    }

    #[test]
    fn partial_fractions_simple_and_double_poles() {
        // 1/((s+1)(s+2)) = 1/(s+1) - 1/(s+2)
        let f = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![2.0, 3.0, 1.0])).unwrap();
        let terms = f.partial_fractions(0).unwrap();
        for t in [0.0f64, 0.3, 1.0, 4.0] {
            let expect = (-t).exp() - (-2.0 * t).exp();
            assert!((time_eval(&terms, t) - expect).abs() < 1e-10);
        }
        // 1/(s+1)^2 -> t e^{-t}
        let f = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![1.0, 2.0, 1.0])).unwrap();
        let terms = f.partial_fractions(0).unwrap();
        for t in [0.0f64, 0.3, 1.0, 4.0] {
            let expect = t * (-t).exp();
            assert!((time_eval(&terms, t) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_fractions_oscillatory() {
        // 1/(s^2 - 2s + 5): poles 1 +/- 2i, w(t) = e^t sin(2t) / 2.
        let f = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![5.0, -2.0, 1.0])).unwrap();
        let terms = f.partial_fractions(0).unwrap();
        assert_eq!(terms.len(), 2);
        for t in [0.0f64, 0.4, 1.1, 2.7] {
            let expect = t.exp() * (2.0 * t).sin() / 2.0;
            assert!((time_eval(&terms, t) - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn time_derivative_matches_difference_quotient() {
        let f = RatFun::new(Poly::new(vec![1.0, 1.0]), Poly::new(vec![2.0, 3.0, 1.0])).unwrap();
        let terms = f.partial_fractions(0).unwrap();
        for t in [0.1, 0.9, 2.5] {
            let h = 1e-6;
            let fd = (time_eval(&terms, t + h) - time_eval(&terms, t - h)) / (2.0 * h);
            assert!((time_eval_deriv(&terms, t) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn asymptotic_series_examples() {
        let step = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![0.0, 1.0])).unwrap();
        assert_eq!(step.asymptotic_series(3), vec![1.0, 0.0, 0.0]);
        let ramp = RatFun::new(Poly::new(vec![1.0]), Poly::new(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(ramp.asymptotic_series(3), vec![0.0, 1.0, 0.0]);
        // (s+2)/(s^2+s+1): c1 = 1, c2 = 1.
        let f = RatFun::new(Poly::new(vec![2.0, 1.0]), Poly::new(vec![1.0, 1.0, 1.0])).unwrap();
        let c = f.asymptotic_series(2);
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!((c[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mode_mass_closed_forms() {
        assert_eq!(mode_mass(1.0, 0.0, ModeKind::Cos), 1.0);
        assert!((mode_mass(1.0, 2.0, ModeKind::Cos) - 0.2).abs() < 1e-15);
        assert!((mode_mass(1.0, 2.0, ModeKind::Sin) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn mode_mass_matches_quadrature() {
        for &x in &[0.5, 1.0, 3.0] {
            for &y in &[0.0, 1.0, 5.0] {
                let horizon = 60.0 / x;
                let qc = quad(&|t: f64| (-x * t).exp() * (y * t).cos(), 0.0, horizon, 1e-12, 40);
                let qs = quad(&|t: f64| (-x * t).exp() * (y * t).sin(), 0.0, horizon, 1e-12, 40);
                assert!((mode_mass(x, y, ModeKind::Cos) - qc).abs() < 1e-8);
                assert!((mode_mass(x, y, ModeKind::Sin) - qs).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn segment_integrals_match_quadrature() {
        let cases = [
            (c(1.0, 2.0), 0.3, 1.7),
            (c(0.5, 0.0), 0.0, 4.0),
            (c(3.0, 5.0), 2.0, 2.001),
            (c(1e-6, 1e-7), 1.0, 2.0),
        ];
        for &(z, a, b) in &cases {
            let re_f = |t: f64| (-z.re * t).exp() * (z.im * t).cos();
            let im_f = |t: f64| -(-z.re * t).exp() * (z.im * t).sin();
            let got = seg_integral(z, a, b);
            assert!((got.re - quad(&re_f, a, b, 1e-13, 40)).abs() < 1e-9);
            assert!((got.im - quad(&im_f, a, b, 1e-13, 40)).abs() < 1e-9);
            let got_t = seg_integral_t(z, a, b);
            let re_t = |t: f64| t * (-z.re * t).exp() * (z.im * t).cos();
            let im_t = |t: f64| -t * (-z.re * t).exp() * (z.im * t).sin();
            assert!((got_t.re - quad(&re_t, a, b, 1e-13, 40)).abs() < 1e-9);
            assert!((got_t.im - quad(&im_t, a, b, 1e-13, 40)).abs() < 1e-9);
        }
    }
}
