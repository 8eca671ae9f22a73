//! Plateau bumps, the cutoff η_R, the coupling g_R, and truncated
//! Gevrey-norm estimates.

use std::collections::BTreeMap;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ser, Interval, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GevreyParams {
    #[serde(with = "ser::rational")]
    pub alpha: Rational,
    #[serde(with = "ser::rational")]
    pub l: Rational,
    #[serde(with = "ser::rational")]
    pub l1: Rational,
    #[serde(with = "ser::rational")]
    pub lprime: Rational,
    #[serde(with = "ser::rational")]
    pub r: Rational,
    #[serde(with = "ser::rational")]
    pub c: Rational,
    #[serde(with = "ser::rational")]
    pub gamma: Rational,
}

impl GevreyParams {
    /// α=2, L=1, L₁=10, L′ the midpoint, R=1, γ=1/2 and c calibrated.
    pub fn default_with(alpha: Rational, l: Rational, l1: Rational) -> Result<Self> {
        let lprime = Rational::from(&l + &l1) / 2u32;
        let c = calibrate_c(&alpha, &l1)?;
        let p = GevreyParams {
            alpha,
            l,
            l1,
            lprime,
            r: Rational::from(1),
            c,
            gamma: Rational::from((1, 2)),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if self.alpha <= 1 {
            return bad("alpha must exceed 1");
        }
        if !(self.l > 0 && self.l < self.lprime && self.lprime < self.l1) {
            return bad("need 0 < L < L' < L1");
        }
        if self.r <= 0 || self.c <= 0 || self.gamma <= 0 {
            return bad("R, c and gamma must be positive");
        }
        Ok(())
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    pub fn r_f64(&self) -> f64 {
        self.r.to_f64()
    }
}

/// φ(t) = exp(−t^(−1/(α−1))) for t > 0, else 0.
pub fn phi(t: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-t.powf(-1.0 / (alpha - 1.0))).exp()
    }
}

/// The monotone step h(t) = φ(t)/(φ(t) + φ(1−t)).
pub fn step_h(t: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let k = 1.0 / (alpha - 1.0);
    // φ(1−t)/φ(t) = exp(t^−k − (1−t)^−k)
    let e = t.powf(-k) - (1.0 - t).powf(-k);
    1.0 / (1.0 + e.exp())
}

/// h′(t), zero outside (0, 1).
pub fn step_h_prime(t: f64, alpha: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let k = 1.0 / (alpha - 1.0);
    let e = t.powf(-k) - (1.0 - t).powf(-k);
    let de = -k * t.powf(-k - 1.0) - k * (1.0 - t).powf(-k - 1.0);
    if e.abs() > 700.0 {
        return 0.0;
    }
    let ee = e.exp();
    -ee * de / ((1.0 + ee) * (1.0 + ee))
}

/// Certified enclosure of h over an interval of arguments (h is monotone).
pub fn step_h_interval(t: &Interval, alpha: &Rational) -> Interval {
    let prec = t.prec();
    let lo = step_h_point(t.lo(), alpha, prec);
    let hi = step_h_point(t.hi(), alpha, prec);
    Interval::new(lo.lo().clone(), hi.hi().clone())
}

fn step_h_point(t: &rug::Float, alpha: &Rational, prec: u32) -> Interval {
    if *t <= 0 {
        return Interval::from_int(0, prec);
    }
    if *t >= 1 {
        return Interval::from_int(1, prec);
    }
    let k = Rational::from(-(Rational::from(alpha - 1u32).recip()));
    let ti = Interval::from_float(t.clone());
    let si = Interval::from_int(1, prec).sub(&ti);
    let e = ti.powr(&k).unwrap().sub(&si.powr(&k).unwrap());
    let one = Interval::from_int(1, prec);
    one.div(&one.add(&e.exp())).unwrap().clamp(0, 1)
}

/// One-dimensional plateau profile: 1 on |u| ≤ ν/2, 0 on |u| ≥ ν.
pub fn plateau_1d(u: f64, nu: f64, alpha: f64) -> f64 {
    let a = u.abs();
    if a <= nu / 2.0 {
        1.0
    } else if a >= nu {
        0.0
    } else {
        step_h(2.0 - 2.0 * a / nu, alpha)
    }
}

/// Derivative of `plateau_1d` in u.
pub fn plateau_1d_prime(u: f64, nu: f64, alpha: f64) -> f64 {
    let a = u.abs();
    if a <= nu / 2.0 || a >= nu {
        0.0
    } else {
        step_h_prime(2.0 - 2.0 * a / nu, alpha) * (-2.0 / nu) * u.signum()
    }
}

/// f_{z,ν}(x, y) as a tensor product, so plateau and support are sup-norm balls.
pub fn plateau_2d(p: [f64; 2], center: [f64; 2], nu: f64, alpha: f64) -> f64 {
    let bx = plateau_1d(p[0] - center[0], nu, alpha);
    if bx == 0.0 {
        return 0.0;
    }
    bx * plateau_1d(p[1] - center[1], nu, alpha)
}

pub fn plateau_2d_grad(p: [f64; 2], center: [f64; 2], nu: f64, alpha: f64) -> [f64; 2] {
    let (u, v) = (p[0] - center[0], p[1] - center[1]);
    [
        plateau_1d_prime(u, nu, alpha) * plateau_1d(v, nu, alpha),
        plateau_1d(u, nu, alpha) * plateau_1d_prime(v, nu, alpha),
    ]
}

/// Certified value of the plateau bump at sup-distance `d` from its center
/// along an axis through the center (the other offset is zero).
pub fn plateau_at_distance(d: &Real, nu: &Rational, alpha: &Rational, prec: u32) -> Real {
    let half = Rational::from(nu / 2u32);
    if d.certainly_le(&Real::Exact(half)) {
        return Real::one();
    }
    if d.cmp_rational(nu).is_some_and(|o| o.is_ge()) {
        return Real::zero();
    }
    // t = 2 − 2d/ν
    let two_over_nu = Rational::from(nu.recip_ref()) * 2u32;
    let t = Interval::from_int(2, prec).sub(&d.interval(prec).mul_rational(&two_over_nu));
    Real::Approx(step_h_interval(&t, alpha))
}

/// η_R(x): 1 on [−2R, 2R], 0 outside (−3R, 3R).
pub fn cutoff(x: f64, r: f64, alpha: f64) -> f64 {
    let a = x.abs();
    if a <= 2.0 * r {
        1.0
    } else if a >= 3.0 * r {
        0.0
    } else {
        step_h((3.0 * r - a) / r, alpha)
    }
}

pub fn cutoff_prime(x: f64, r: f64, alpha: f64) -> f64 {
    let a = x.abs();
    if a <= 2.0 * r || a >= 3.0 * r {
        0.0
    } else {
        step_h_prime((3.0 * r - a) / r, alpha) * (-1.0 / r) * x.signum()
    }
}

/// g_R(x, y) = x·y·η_R(x)·η_R(y); the plateau branch is exactly x*y.
pub fn eval_g(x: f64, y: f64, r: f64, alpha: f64) -> f64 {
    if x.abs() <= 2.0 * r && y.abs() <= 2.0 * r {
        return x * y;
    }
    x * y * cutoff(x, r, alpha) * cutoff(y, r, alpha)
}

pub fn eval_g_grad(x: f64, y: f64, r: f64, alpha: f64) -> [f64; 2] {
    let (ex, ey) = (cutoff(x, r, alpha), cutoff(y, r, alpha));
    let (dx, dy) = (cutoff_prime(x, r, alpha), cutoff_prime(y, r, alpha));
    [y * ex * ey + x * y * dx * ey, x * ex * ey + x * y * ex * dy]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BumpProfile {
    PlateauBump {
        #[serde(with = "ser::rational")]
        center_x: Rational,
        #[serde(with = "ser::rational")]
        center_y: Rational,
        #[serde(with = "ser::rational")]
        nu: Rational,
    },
    Cutoff {
        #[serde(rename = "R", with = "ser::rational")]
        r: Rational,
    },
    Coupling {
        #[serde(rename = "R", with = "ser::rational")]
        r: Rational,
    },
}

/// Evaluates a profile at a point of R (cutoff) or R² (bump, coupling).
pub fn eval_bump(profile: &BumpProfile, s: &[f64], alpha: f64) -> Result<f64> {
    match (profile, s.len()) {
        (BumpProfile::PlateauBump { center_x, nu, .. }, 1) => {
            Ok(plateau_1d(s[0] - center_x.to_f64(), nu.to_f64(), alpha))
        }
        (BumpProfile::PlateauBump { center_x, center_y, nu }, 2) => Ok(plateau_2d(
            [s[0], s[1]],
            [center_x.to_f64(), center_y.to_f64()],
            nu.to_f64(),
            alpha,
        )),
        (BumpProfile::Cutoff { r }, 1) => Ok(cutoff(s[0], r.to_f64(), alpha)),
        (BumpProfile::Coupling { r }, 2) => Ok(eval_g(s[0], s[1], r.to_f64(), alpha)),
        _ => Err(Error::Domain("point dimension does not match profile".into())),
    }
}

/// exp(c·ν^(−1/(α−1))), the certified bump-norm bound.
pub fn bump_norm_bound(nu: &Rational, params: &GevreyParams, prec: u32) -> Interval {
    let k = Rational::from(-(Rational::from(&params.alpha - 1u32).recip()));
    let nuk = Interval::point(nu, prec).powr(&k).expect("nu > 0");
    nuk.mul_rational(&params.c).exp()
}

/// Polynomial in one or two variables with rational coefficients.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<(u32, u32), Rational>,
}

impl Poly {
    pub fn new(nvars: usize) -> Self {
        assert!((1..=2).contains(&nvars));
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Poly::new(nvars);
        p.add_term((0, 0), c);
        p
    }

    pub fn add_term(&mut self, e: (u32, u32), c: Rational) {
        assert!(self.nvars == 2 || e.1 == 0);
        let v = self.terms.entry(e).or_default();
        *v += c;
        if *v == 0 {
            self.terms.remove(&e);
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|(a, b)| a + b).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut p = Poly::new(self.nvars.max(o.nvars));
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                p.add_term((ea.0 + eb.0, ea.1 + eb.1), Rational::from(ca * cb));
            }
        }
        p
    }

    /// ∂^(a,b).
    pub fn derivative(&self, a: u32, b: u32) -> Poly {
        let mut p = Poly::new(self.nvars);
        for (&(i, j), c) in &self.terms {
            if i >= a && j >= b {
                let mut k = c.clone();
                for t in 0..a {
                    k *= i - t;
                }
                for t in 0..b {
                    k *= j - t;
                }
                p.add_term((i - a, j - b), k);
            }
        }
        p
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), c)| c.to_f64() * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Coefficients in x of p(x, y0), low degree first.
    fn restrict_y(&self, y0: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.degree() as usize + 1];
        for (&(i, j), k) in &self.terms {
            c[i as usize] += k.to_f64() * y0.powi(j as i32);
        }
        c
    }

    fn restrict_x(&self, x0: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.degree() as usize + 1];
        for (&(i, j), k) in &self.terms {
            c[j as usize] += k.to_f64() * x0.powi(i as i32);
        }
        c
    }

    /// sup |p| on [−1, 1]^nvars.
    pub fn sup_abs(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        if self.nvars == 1 {
            return sup_abs_1d(&self.restrict_y(0.0));
        }
        let mut best: f64 = 0.0;
        for e in [-1.0, 1.0] {
            best = best.max(sup_abs_1d(&self.restrict_y(e)));
            best = best.max(sup_abs_1d(&self.restrict_x(e)));
        }
        let f = Dense2::new(self);
        let px = Dense2::new(&self.derivative(1, 0));
        let py = Dense2::new(&self.derivative(0, 1));
        let pxx = Dense2::new(&self.derivative(2, 0));
        let pxy = Dense2::new(&self.derivative(1, 1));
        let pyy = Dense2::new(&self.derivative(0, 2));
        const G: usize = 24;
        let at = |a: usize| -1.0 + 2.0 * a as f64 / G as f64;
        let grid: Vec<Vec<f64>> = (0..=G).map(|a| (0..=G).map(|b| f.eval(at(a), at(b)).abs()).collect()).collect();
        for a in 0..=G {
            for b in 0..=G {
                best = best.max(grid[a][b]);
                // Newton only from discrete local maxima of |p|
                let is_peak = (a.saturating_sub(1)..=(a + 1).min(G))
                    .all(|i| (b.saturating_sub(1)..=(b + 1).min(G)).all(|j| grid[i][j] <= grid[a][b]));
                if !is_peak {
                    continue;
                }
                let (mut x, mut y) = (at(a), at(b));
                for _ in 0..60 {
                    let (gx, gy) = (px.eval(x, y), py.eval(x, y));
                    let (h11, h12, h22) = (pxx.eval(x, y), pxy.eval(x, y), pyy.eval(x, y));
                    let det = h11 * h22 - h12 * h12;
                    if det.abs() < 1e-300 {
                        break;
                    }
                    let dx = (h22 * gx - h12 * gy) / det;
                    let dy = (h11 * gy - h12 * gx) / det;
                    x -= dx;
                    y -= dy;
                    if !(-1.0..=1.0).contains(&x) || !(-1.0..=1.0).contains(&y) {
                        break;
                    }
                    if dx.abs() + dy.abs() < 1e-15 {
                        break;
                    }
                }
                if (-1.0..=1.0).contains(&x) && (-1.0..=1.0).contains(&y) {
                    best = best.max(f.eval(x, y).abs());
                }
            }
        }
        best
    }
}

/// Float coefficients for repeated evaluation: c[j][i] multiplies xⁱyʲ.
struct Dense2(Vec<Vec<f64>>);

impl Dense2 {
    fn new(p: &Poly) -> Self {
        let d = p.degree() as usize;
        let mut c = vec![vec![0.0; d + 1]; d + 1];
        for (&(i, j), k) in &p.terms {
            c[j as usize][i as usize] += k.to_f64();
        }
        Dense2(c)
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, row| acc * y + horner(row, x))
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, k| acc * x + k)
}

fn deriv_coeffs(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, k)| k * i as f64).collect()
}

/// Real roots in (a, b) by recursive isolation between critical points.
fn roots_in(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let deg = c.iter().rposition(|&k| k != 0.0).unwrap_or(0);
    if deg == 0 {
        return vec![];
    }
    let c = &c[..=deg];
    let mut pts = vec![a];
    pts.extend(roots_in(&deriv_coeffs(c), a, b));
    pts.push(b);
    let mut out = vec![];
    for w in pts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (horner(c, lo), horner(c, hi));
        if flo == 0.0 {
            out.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if horner(c, m).signum() == flo.signum() {
                lo = m;
            } else {
                hi = m;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

/// sup |p| on [−1, 1] from endpoints and critical points.
pub fn sup_abs_1d(c: &[f64]) -> f64 {
    let mut best = horner(c, -1.0).abs().max(horner(c, 1.0).abs());
    for r in roots_in(&deriv_coeffs(c), -1.0, 1.0) {
        best = best.max(horner(c, r).abs());
    }
    best
}

/// Function representations accepted by `truncated_norm`.
#[derive(Clone, Debug)]
pub enum NormTarget {
    /// Polynomial on [−1, 1]^n; exact once max_order reaches the degree.
    Poly(Poly),
    /// One-dimensional plateau bump of radius ν.
    Bump1d { nu: f64 },
    /// Tensor-product plateau bump of radius ν on R².
    Bump2d { nu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub partial_sums: Vec<f64>,
    pub value: f64,
    pub last_term: f64,
    pub converged: bool,
    /// Exact for polynomials; a sampled diagnostic for bumps.
    pub exact: bool,
}

/// Largest derivative order the bump jets support.
pub const JET_ORDER_CAP: usize = 64;

/// Partial (α, L)-norm Σ_{|ℓ| ≤ max_order} L^{|ℓ|α}/ℓ!^α · sup|∂^ℓ f|.
pub fn truncated_norm(f: &NormTarget, alpha: f64, l: f64, max_order: usize, tol: f64) -> Result<NormReport> {
    let weight = |k: usize| -> f64 { (k as f64 * alpha * l.ln() - alpha * ln_factorial(k)).exp() };
    let mut by_order = vec![0.0; max_order + 1];
    let exact;
    match f {
        NormTarget::Poly(p) => {
            exact = true;
            for (k, slot) in by_order.iter_mut().enumerate() {
                let mut s = 0.0;
                for a in 0..=k as u32 {
                    let b = k as u32 - a;
                    if p.nvars == 1 && b > 0 {
                        continue;
                    }
                    let w = (k as f64 * alpha * l.ln()
                        - alpha * (ln_factorial(a as usize) + ln_factorial(b as usize)))
                    .exp();
                    s += w * p.derivative(a, b).sup_abs();
                }
                *slot = s;
            }
        }
        NormTarget::Bump1d { nu } | NormTarget::Bump2d { nu } => {
            if max_order > JET_ORDER_CAP {
                return Err(Error::DerivativeUnavailable { requested: max_order, available: JET_ORDER_CAP });
            }
            exact = false;
            let sups = bump_derivative_sups(*nu, alpha, max_order);
            let t1: Vec<f64> = (0..=max_order).map(|k| weight(k) * sups[k]).collect();
            if matches!(f, NormTarget::Bump1d { .. }) {
                by_order.copy_from_slice(&t1);
            } else {
                for (k, slot) in by_order.iter_mut().enumerate() {
                    *slot = (0..=k).map(|a| t1[a] * t1[k - a]).sum();
                }
            }
        }
    }
    let mut partial_sums = Vec::with_capacity(max_order + 1);
    let mut acc = 0.0;
    for t in &by_order {
        acc += t;
        partial_sums.push(acc);
    }
    let last_term = *by_order.last().unwrap();
    Ok(NormReport { value: acc, partial_sums, last_term, converged: last_term < tol, exact })
}

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Sampled sup |b^(k)| for k ≤ order over the transition annulus.
fn bump_derivative_sups(nu: f64, alpha: f64, order: usize) -> Vec<f64> {
    let mut sups = vec![0.0; order + 1];
    sups[0] = 1.0;
    const SAMPLES: usize = 400;
    let scale = 2.0 / nu;
    for s in 1..SAMPLES {
        let t0 = s as f64 / SAMPLES as f64;
        let jet = step_h_jet(t0, alpha, order);
        let mut sc = 1.0;
        for (k, c) in jet.iter().enumerate() {
            // b^(k) = k!·c_k·(dt/du)^k
            let d = (c.abs().ln() + ln_factorial(k)).exp() * sc;
            if d.is_finite() && d > sups[k] {
                sups[k] = d;
            }
            sc *= scale;
        }
    }
    sups
}

/// Taylor coefficients of h at t0 ∈ (0, 1).
pub fn step_h_jet(t0: f64, alpha: f64, order: usize) -> Vec<f64> {
    let n = order + 1;
    let k = -1.0 / (alpha - 1.0);
    let mut t = vec![0.0; n];
    t[0] = t0;
    if n > 1 {
        t[1] = 1.0;
    }
    let mut s = vec![0.0; n];
    s[0] = 1.0 - t0;
    if n > 1 {
        s[1] = -1.0;
    }
    let e = jet_sub(&jet_powr(&t, k), &jet_powr(&s, k));
    let mut den = jet_exp(&e);
    den[0] += 1.0;
    let mut one = vec![0.0; n];
    one[0] = 1.0;
    jet_div(&one, &den)
}

fn jet_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn jet_mul_scalar(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

fn jet_div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.len()];
    for m in 0..a.len() {
        let mut v = a[m];
        for k in 1..=m {
            v -= b[k] * c[m - k];
        }
        c[m] = v / b[0];
    }
    c
}

fn jet_exp(a: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; a.len()];
    e[0] = a[0].exp();
    for m in 1..a.len() {
        let s: f64 = (1..=m).map(|k| k as f64 * a[k] * e[m - k]).sum();
        e[m] = s / m as f64;
    }
    e
}

fn jet_ln(a: &[f64]) -> Vec<f64> {
    let mut l = vec![0.0; a.len()];
    l[0] = a[0].ln();
    for m in 1..a.len() {
        let s: f64 = (1..m).map(|k| k as f64 * l[k] * a[m - k]).sum();
        l[m] = (a[m] - s / m as f64) / a[0];
    }
    l
}

fn jet_powr(a: &[f64], r: f64) -> Vec<f64> {
    jet_exp(&jet_mul_scalar(&jet_ln(a), r))
}

/// c such that the sampled order-8 (α, L₁)-norm of the ν = 1 bump is ≤ exp(c),
/// rounded up to a multiple of 1/1000.
pub fn calibrate_c(alpha: &Rational, l1: &Rational) -> Result<Rational> {
    let rep = truncated_norm(&NormTarget::Bump2d { nu: 1.0 }, alpha.to_f64(), l1.to_f64(), 8, 0.0)?;
    let c = rep.value.ln().max(1e-3);
    Ok(Rational::from(((c * 1000.0).ceil() as i64, 1000)))
}
