//! Time-one maps Φ_{i,j,z,ν} of the Hamiltonians ε·f_{z,ν}(s_i)·g_R(s_j).
//!
//! Both f(s_i) and g_R(s_j) are first integrals of the coupled flow, so the
//! map is computed by freezing them: s_j follows the flow of (ε f(s_i))·g_R
//! and s_i follows the flow of (ε g_R(s_j))·f. On the η_R plateau the first
//! flow is (x, y) ↦ (e^{−a}x, e^{a}y), which keeps axis points on their axis
//! and gives exact magnitude updates.

use std::fmt;

use rug::{Integer, Rational};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numeric::{cos_sin_turns, fmt_rational, parse_rational, ser, Interval, Real};
use crate::profiles::{self, GevreyParams};
use crate::rotations::Phase;

/// Largest exponent for which powers of an exact contraction stay exact.
pub const EXACT_POW_CAP: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Amplitude {
    /// ε = exp(−c·ν^(−2/(α−1))).
    Faithful { c: Rational, alpha: Rational },
    /// Toy mode, user-set ε.
    Rate(Rational),
    /// Toy mode, ε = −ln ρ so that e^(−ε) = ρ exactly.
    Contraction(Rational),
}

impl Amplitude {
    /// ε = ln 2.
    pub fn ln2() -> Self {
        Amplitude::Contraction(Rational::from((1, 2)))
    }

    pub fn is_toy(&self) -> bool {
        !matches!(self, Amplitude::Faithful { .. })
    }

    /// Enclosure of ln ε.
    pub fn log_eps(&self, nu: &Rational, prec: u32) -> Interval {
        match self {
            Amplitude::Faithful { c, alpha } => {
                let k = Rational::from(-(Rational::from(alpha - 1u32).recip())) * 2u32;
                let p = Interval::point(nu, prec).powr(&k).expect("nu > 0");
                p.mul_rational(c).neg()
            }
            _ => self.eps(nu, prec).ln().expect("toy eps > 0"),
        }
    }

    /// Enclosure of ε.
    pub fn eps(&self, nu: &Rational, prec: u32) -> Interval {
        match self {
            Amplitude::Faithful { .. } => self.log_eps(nu, prec).exp(),
            Amplitude::Rate(e) => Interval::point(e, prec),
            Amplitude::Contraction(rho) => Interval::point(rho, prec).ln().expect("rho > 0").neg(),
        }
    }

    /// ε as a float; faithful amplitudes underflow to 0 for small ν.
    pub fn eps_f64(&self, nu: &Rational) -> f64 {
        match self {
            Amplitude::Rate(e) => e.to_f64(),
            Amplitude::Contraction(rho) => -rho.to_f64().ln(),
            Amplitude::Faithful { .. } => self.eps(nu, 64).to_f64(),
        }
    }

    /// e^(−s·ε·f) for s = ±1: the multiplier of an x-axis coordinate
    /// (s = 1 forward, −1 backward).
    pub fn factor(&self, nu: &Rational, f: &Real, s: i32, prec: u32) -> Real {
        if let Real::Exact(fv) = f {
            if *fv == 0 {
                return Real::one();
            }
            if let (Amplitude::Contraction(rho), true) = (self, *fv == 1) {
                return Real::Exact(if s > 0 { rho.clone() } else { Rational::from(rho.recip_ref()) });
            }
        }
        let e = self.eps(nu, prec).mul(&f.interval(prec));
        Real::Approx(if s > 0 { e.neg().exp() } else { e.exp() })
    }

    /// e^(−k·ε).
    pub fn factor_pow(&self, nu: &Rational, k: &Integer, prec: u32) -> Real {
        if let Amplitude::Contraction(rho) = self {
            if let Some(kk) = k.to_u64().filter(|&v| v <= EXACT_POW_CAP) {
                return Real::Exact(rug::ops::Pow::pow(rho.clone(), kk as u32));
            }
        }
        let e = self.eps(nu, prec).mul(&Interval::point(&Rational::from(k.clone()), prec));
        Real::Approx(e.neg().exp())
    }
}

#[derive(Serialize, Deserialize)]
struct AmplitudeJson {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<String>,
}

impl Amplitude {
    /// Parses a toy amplitude: a rational ε, or `ln(r)` meaning ε = ln r.
    pub fn parse_toy(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("ln(").and_then(|t| t.strip_suffix(')')) {
            let r = parse_rational(inner)?;
            if r <= 1 {
                return Err(Error::Domain("ln(r) amplitude needs r > 1".into()));
            }
            return Ok(Amplitude::Contraction(r.recip()));
        }
        let e = parse_rational(s)?;
        if e <= 0 {
            return Err(Error::Domain("amplitude must be positive".into()));
        }
        Ok(Amplitude::Rate(e))
    }

    fn to_json(&self) -> AmplitudeJson {
        match self {
            Amplitude::Faithful { c, alpha } => AmplitudeJson {
                mode: "faithful".into(),
                value: None,
                c: Some(fmt_rational(c)),
                alpha: Some(fmt_rational(alpha)),
            },
            Amplitude::Rate(e) => AmplitudeJson { mode: "toy".into(), value: Some(fmt_rational(e)), c: None, alpha: None },
            Amplitude::Contraction(rho) => AmplitudeJson {
                mode: "toy".into(),
                value: Some(format!("ln({})", fmt_rational(&Rational::from(rho.recip_ref())))),
                c: None,
                alpha: None,
            },
        }
    }
}

impl Serialize for Amplitude {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Amplitude {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = AmplitudeJson::deserialize(d)?;
        match j.mode.as_str() {
            "faithful" => {
                let c = parse_rational(j.c.as_deref().ok_or_else(|| de::Error::missing_field("c"))?)
                    .map_err(de::Error::custom)?;
                let alpha = parse_rational(j.alpha.as_deref().ok_or_else(|| de::Error::missing_field("alpha"))?)
                    .map_err(de::Error::custom)?;
                if c <= 0 || alpha <= 1 {
                    return Err(de::Error::custom("faithful amplitude needs c > 0 and alpha > 1"));
                }
                Ok(Amplitude::Faithful { c, alpha })
            }
            "toy" => Amplitude::parse_toy(j.value.as_deref().ok_or_else(|| de::Error::missing_field("value"))?)
                .map_err(de::Error::custom),
            m => Err(de::Error::custom(format!("unknown amplitude mode `{m}`"))),
        }
    }
}

/// Φ_{i,j,z,ν} with z = (center_x, 0). Factor indices are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub i: usize,
    pub j: usize,
    #[serde(with = "ser::rational")]
    pub center_x: Rational,
    #[serde(with = "ser::fraction")]
    pub nu: Rational,
    pub amplitude: Amplitude,
}

impl BumpSpec {
    pub fn new(i: usize, j: usize, center_x: Rational, nu: Rational, amplitude: Amplitude) -> Result<Self> {
        let b = BumpSpec { i, j, center_x, nu, amplitude };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.i) || !(1..=3).contains(&self.j) || self.i == self.j {
            return Err(Error::Domain(format!("bad factor pair ({}, {})", self.i, self.j)));
        }
        if self.nu <= 0 {
            return Err(Error::Domain("nu must be positive".into()));
        }
        Ok(())
    }

    /// Trigger factor (carries f), zero-based.
    pub fn trigger(&self) -> usize {
        self.i - 1
    }

    /// Partner factor (carries g_R), zero-based.
    pub fn partner(&self) -> usize {
        self.j - 1
    }

    pub fn eps_f64(&self) -> f64 {
        self.amplitude.eps_f64(&self.nu)
    }
}

impl fmt::Display for BumpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Phi_{{{},{},{},{}}}", self.i, self.j, fmt_rational(&self.center_x), self.nu)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanePoint {
    /// magnitude·(cos 2πφ, sin 2πφ); phase 0 is the positive x-axis.
    Polar { magnitude: Real, phase: Phase },
    Cartesian { x: f64, y: f64 },
}

impl PlanePoint {
    pub fn axis(magnitude: Real) -> Self {
        PlanePoint::Polar { magnitude, phase: Phase::zero() }
    }

    pub fn axis_rational(m: Rational) -> Self {
        Self::axis(Real::Exact(m))
    }

    pub fn to_cartesian(&self) -> [f64; 2] {
        match self {
            PlanePoint::Cartesian { x, y } => [*x, *y],
            PlanePoint::Polar { magnitude, phase } => {
                let (c, s) = cos_sin_turns(phase.value(), 64);
                let m = magnitude.to_f64();
                [m * c.to_f64(), m * s.to_f64()]
            }
        }
    }

    pub fn demote(&self) -> PlanePoint {
        let [x, y] = self.to_cartesian();
        PlanePoint::Cartesian { x, y }
    }

    pub fn sup_norm_f64(&self) -> f64 {
        let [x, y] = self.to_cartesian();
        x.abs().max(y.abs())
    }

    pub fn magnitude(&self) -> Option<&Real> {
        match self {
            PlanePoint::Polar { magnitude, .. } => Some(magnitude),
            PlanePoint::Cartesian { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PlanePointJson {
    Polar {
        magnitude: Real,
        #[serde(with = "ser::fraction")]
        phase: Rational,
    },
    Cartesian {
        x: f64,
        y: f64,
    },
}

impl Serialize for PlanePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PlanePoint::Polar { magnitude, phase } => {
                PlanePointJson::Polar { magnitude: magnitude.clone(), phase: phase.value().clone() }
            }
            PlanePoint::Cartesian { x, y } => PlanePointJson::Cartesian { x: *x, y: *y },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlanePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match PlanePointJson::deserialize(d)? {
            PlanePointJson::Polar { magnitude, phase } => {
                if phase < 0 || phase >= 1 {
                    return Err(de::Error::custom("phase must lie in [0, 1)"));
                }
                PlanePoint::Polar { magnitude, phase: Phase::new(&phase) }
            }
            PlanePointJson::Cartesian { x, y } => PlanePoint::Cartesian { x, y },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State(pub [PlanePoint; 3]);

impl State {
    /// ((x₁,0),(x₂,0),(x₃,0)).
    pub fn axis(x: [Real; 3]) -> Self {
        State(x.map(PlanePoint::axis))
    }

    pub fn axis_rational(x: [Rational; 3]) -> Self {
        State(x.map(PlanePoint::axis_rational))
    }

    pub fn cartesian(v: [f64; 6]) -> Self {
        State([
            PlanePoint::Cartesian { x: v[0], y: v[1] },
            PlanePoint::Cartesian { x: v[2], y: v[3] },
            PlanePoint::Cartesian { x: v[4], y: v[5] },
        ])
    }

    pub fn to_f64(&self) -> [f64; 6] {
        let a = self.0[0].to_cartesian();
        let b = self.0[1].to_cartesian();
        let c = self.0[2].to_cartesian();
        [a[0], a[1], b[0], b[1], c[0], c[1]]
    }

    pub fn demote(&self) -> State {
        State(self.0.clone().map(|p| p.demote()))
    }

    pub fn sup_norm_f64(&self) -> f64 {
        self.0.iter().map(|p| p.sup_norm_f64()).fold(0.0, f64::max)
    }
}

/// Parameters shared by the flow evaluations.
#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub r: Rational,
    pub alpha: Rational,
    pub prec: u32,
    pub tol: f64,
}

impl FlowConfig {
    pub fn new(r: Rational, alpha: Rational) -> Self {
        FlowConfig { r, alpha, prec: crate::numeric::DEFAULT_PREC, tol: 1e-12 }
    }

    pub fn from_params(p: &GevreyParams) -> Self {
        Self::new(p.r.clone(), p.alpha.clone())
    }
}

/// Which branch evaluated a bump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Identity,
    ClosedForm,
    Numeric,
}

/// Hamiltonians handled by the integrator.
#[derive(Clone, Debug)]
pub enum HDescriptor {
    /// strength·g_R(x, y).
    Coupling { strength: f64, r: f64, alpha: f64 },
    /// strength·f_{center,ν}(x, y).
    Bump { strength: f64, center: [f64; 2], nu: f64, alpha: f64 },
}

impl HDescriptor {
    /// X_H = (−∂H/∂y, ∂H/∂x).
    pub fn field(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, g) = match self {
            HDescriptor::Coupling { strength, r, alpha } => (*strength, profiles::eval_g_grad(p[0], p[1], *r, *alpha)),
            HDescriptor::Bump { strength, center, nu, alpha } => {
                (*strength, profiles::plateau_2d_grad(p, *center, *nu, *alpha))
            }
        };
        [-s * g[1], s * g[0]]
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        match self {
            HDescriptor::Coupling { strength, r, alpha } => strength * profiles::eval_g(p[0], p[1], *r, *alpha),
            HDescriptor::Bump { strength, center, nu, alpha } => strength * profiles::plateau_2d(p, *center, *nu, *alpha),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    pub tol: f64,
    pub h0: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { tol: 1e-12, h0: 0.05, h_min: 1e-12, max_steps: 1_000_000 }
    }
}

fn rk4(h: &HDescriptor, p: [f64; 2], dt: f64) -> [f64; 2] {
    let add = |a: [f64; 2], k: [f64; 2], s: f64| [a[0] + s * k[0], a[1] + s * k[1]];
    let k1 = h.field(p);
    let k2 = h.field(add(p, k1, dt / 2.0));
    let k3 = h.field(add(p, k2, dt / 2.0));
    let k4 = h.field(add(p, k3, dt));
    [
        p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Adaptive RK4 (step doubling with Richardson correction) for the flow of
/// X_H over time t, which may be negative.
pub fn numeric_flow(h: &HDescriptor, t: f64, p: [f64; 2], ctl: &StepControl) -> Result<[f64; 2]> {
    if !t.is_finite() || !p[0].is_finite() || !p[1].is_finite() {
        return Err(Error::Domain("non-finite flow input".into()));
    }
    if t == 0.0 {
        return Ok(p);
    }
    let dir = t.signum();
    let total = t.abs();
    let mut done = 0.0;
    let mut step = ctl.h0.min(total);
    let mut x = p;
    let mut n = 0;
    while done < total {
        n += 1;
        if n > ctl.max_steps {
            return Err(Error::StepUnderflow { step, t: done * dir });
        }
        let dt = step.min(total - done);
        let full = rk4(h, x, dir * dt);
        let half = rk4(h, rk4(h, x, dir * dt / 2.0), dir * dt / 2.0);
        let err = ((half[0] - full[0]).abs()).max((half[1] - full[1]).abs()) / 15.0;
        let scale = ctl.tol * (1.0 + x[0].abs().max(x[1].abs()));
        if err <= scale {
            x = [half[0] + (half[0] - full[0]) / 15.0, half[1] + (half[1] - full[1]) / 15.0];
            done += dt;
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (scale / err).powf(0.2)).min(2.0) };
            step = (dt * grow).max(ctl.h_min);
        } else {
            step = dt * (0.9 * (scale / err).powf(0.2)).max(0.1);
            if step < ctl.h_min {
                return Err(Error::StepUnderflow { step, t: done * dir });
            }
        }
    }
    Ok(x)
}

/// Time-1 map of strength·g_R applied to one plane point.
///
/// On the plateau the closed form (e^{−s}x, e^{s}y) is exact; otherwise the
/// integrator is used.
pub fn hyperbolic_time1(p: [f64; 2], strength: f64, cfg: &FlowConfig) -> Result<([f64; 2], Branch)> {
    if strength == 0.0 {
        return Ok((p, Branch::Identity));
    }
    let r2 = 2.0 * cfg.r.to_f64();
    let grow = strength.abs().exp();
    if p[0].abs() * grow <= r2 && p[1].abs() * grow <= r2 {
        return Ok(([p[0] * (-strength).exp(), p[1] * strength.exp()], Branch::ClosedForm));
    }
    let h = HDescriptor::Coupling { strength, r: cfg.r.to_f64(), alpha: cfg.alpha.to_f64() };
    let ctl = StepControl { tol: cfg.tol, ..Default::default() };
    Ok((numeric_flow(&h, 1.0, p, &ctl)?, Branch::Numeric))
}

/// Applies Φ_{i,j,z,ν} (direction 1) or its inverse (direction −1).
pub fn apply_bump_dir(spec: &BumpSpec, s: &State, dir: i32, cfg: &FlowConfig) -> Result<(State, Branch)> {
    if let Some(out) = exact_branch(spec, s, dir, cfg) {
        return Ok(out);
    }
    cartesian_branch(spec, s, dir, cfg)
}

pub fn apply_bump(spec: &BumpSpec, s: &State, cfg: &FlowConfig) -> Result<State> {
    Ok(apply_bump_dir(spec, s, 1, cfg)?.0)
}

pub fn apply_bump_inverse(spec: &BumpSpec, s: &State, cfg: &FlowConfig) -> Result<State> {
    Ok(apply_bump_dir(spec, s, -1, cfg)?.0)
}

/// Exact handling when both factors are polar and the geometry is one of
/// the certified cases; `None` means fall back to floats.
fn exact_branch(spec: &BumpSpec, s: &State, dir: i32, cfg: &FlowConfig) -> Option<(State, Branch)> {
    let (ti, pj) = (spec.trigger(), spec.partner());
    let (PlanePoint::Polar { magnitude: mt, phase: ph_t }, PlanePoint::Polar { magnitude: mp, phase: ph_p }) =
        (&s.0[ti], &s.0[pj])
    else {
        return None;
    };
    let prec = cfg.prec;
    let f = trigger_value(mt, ph_t, &spec.center_x, &spec.nu, &cfg.alpha, prec)?;
    if f == Real::zero() {
        return Some((s.clone(), Branch::Identity));
    }
    // g_R vanishes on both axes, so s_i is fixed whenever s_j lies on one.
    let half = Rational::from((1, 2));
    let quarter = Rational::from((1, 4));
    let three_q = Rational::from((3, 4));
    let on_x_axis = ph_p.is_zero() || *ph_p.value() == half;
    let on_y_axis = *ph_p.value() == quarter || *ph_p.value() == three_q;
    if !(on_x_axis || on_y_axis) {
        return None;
    }
    let mult = spec.amplitude.factor(&spec.nu, &f, if on_x_axis { dir } else { -dir }, prec);
    let two_r = Rational::from(&cfg.r * 2u32);
    let before_ok = mp.cmp_rational(&two_r).is_some_and(|o| o.is_le());
    let after = mp.mul(&mult, prec);
    if !before_ok || !after.cmp_rational(&two_r).is_some_and(|o| o.is_le()) {
        return None;
    }
    let mut out = s.clone();
    out.0[pj] = PlanePoint::Polar { magnitude: after, phase: ph_p.clone() };
    Some((out, Branch::ClosedForm))
}

/// Certified f at a polar trigger point. Exact at phase 0 and outside the
/// support at other phases when provable; `None` otherwise.
pub fn trigger_value(m: &Real, ph: &Phase, c: &Rational, nu: &Rational, alpha: &Rational, prec: u32) -> Option<Real> {
    if ph.is_zero() {
        let d = m.sub(&Real::Exact(c.clone()), prec).abs();
        return Some(profiles::plateau_at_distance(&d, nu, alpha, prec));
    }
    let (cs, sn) = cos_sin_turns(ph.value(), prec);
    let mi = m.interval(prec);
    let dx = mi.mul(&cs).sub(&Interval::point(c, prec)).abs();
    let dy = mi.mul(&sn).abs();
    let d = dx.max(&dy);
    if d.cmp_rational(nu).is_some_and(|o| o.is_ge()) {
        Some(Real::zero())
    } else {
        None
    }
}

fn cartesian_branch(spec: &BumpSpec, s: &State, dir: i32, cfg: &FlowConfig) -> Result<(State, Branch)> {
    let (ti, pj) = (spec.trigger(), spec.partner());
    let alpha = cfg.alpha.to_f64();
    let r = cfg.r.to_f64();
    let center = [spec.center_x.to_f64(), 0.0];
    let nu = spec.nu.to_f64();
    let eps = spec.eps_f64() * dir as f64;
    let si = s.0[ti].to_cartesian();
    let sj = s.0[pj].to_cartesian();
    let fi = profiles::plateau_2d(si, center, nu, alpha);
    if fi == 0.0 && profiles::plateau_2d_grad(si, center, nu, alpha) == [0.0, 0.0] {
        return Ok((s.clone(), Branch::Identity));
    }
    let gj = profiles::eval_g(sj[0], sj[1], r, alpha);
    let (sj_new, b1) = hyperbolic_time1(sj, eps * fi, cfg)?;
    let grad = profiles::plateau_2d_grad(si, center, nu, alpha);
    let (si_new, b2) = if gj == 0.0 || grad == [0.0, 0.0] {
        (si, Branch::Identity)
    } else {
        let h = HDescriptor::Bump { strength: eps * gj, center, nu, alpha };
        let ctl = StepControl { tol: cfg.tol, ..Default::default() };
        (numeric_flow(&h, 1.0, si, &ctl)?, Branch::Numeric)
    };
    let mut out = s.clone();
    out.0[ti] = PlanePoint::Cartesian { x: si_new[0], y: si_new[1] };
    out.0[pj] = PlanePoint::Cartesian { x: sj_new[0], y: sj_new[1] };
    let branch = if b1 == Branch::Numeric || b2 == Branch::Numeric { Branch::Numeric } else { Branch::ClosedForm };
    Ok((out, branch))
}

/// Float-only Φ on a 6-vector, for brute-force iteration.
pub fn apply_bump_f64(spec: &BumpSpec, v: [f64; 6], dir: i32, cfg: &FlowConfig) -> Result<[f64; 6]> {
    Ok(cartesian_branch(spec, &State::cartesian(v), dir, cfg)?.0.to_f64())
}

/// Inputs to the map-norm bound.
#[derive(Clone, Debug)]
pub struct NormContext {
    /// K = C·‖g_R‖_{α,L₁}.
    pub k: Interval,
    /// Certified bound G on ‖g_R‖_{α,L₁}.
    pub g_norm: Rational,
    /// The ε_H threshold for the Hamiltonian u = ε·f⊗g_R.
    pub eps_h: Interval,
}

impl NormContext {
    pub fn new(params: &GevreyParams, g_norm: Rational, prec: u32) -> Result<Self> {
        let c = crate::budget::c_flow_lemma_a2(&params.alpha, &params.l, &params.l1, prec)?;
        let k = c.mul_rational(&g_norm);
        let eps_h = crate::budget::eps_h(3, &params.alpha, &params.l, &params.l1, prec)?;
        Ok(NormContext { k, g_norm, eps_h })
    }
}

/// ln of the bound on ‖u‖_{α,L₁} for u = ε·f_{z,ν}⊗g_R with the faithful ε:
/// −cν^(−2/(α−1)) + cν^(−1/(α−1)) + ln G.
pub fn hamiltonian_log_bound(nu: &Rational, params: &GevreyParams, g_norm: &Rational, prec: u32) -> Interval {
    let k1 = Rational::from(-(Rational::from(&params.alpha - 1u32).recip()));
    let a = Interval::point(nu, prec).powr(&k1).expect("nu > 0").mul_rational(&params.c);
    let b = Interval::point(nu, prec).powr(&(k1 * 2u32)).expect("nu > 0").mul_rational(&params.c);
    a.sub(&b).add(&Interval::point(g_norm, prec).ln().expect("G > 0"))
}

/// ln of K·exp(−cν^(−1/(α−1))).
pub fn map_norm_log_bound(nu: &Rational, params: &GevreyParams, k: &Interval, prec: u32) -> Interval {
    let k1 = Rational::from(-(Rational::from(&params.alpha - 1u32).recip()));
    let a = Interval::point(nu, prec).powr(&k1).expect("nu > 0").mul_rational(&params.c);
    k.ln().expect("K > 0").sub(&a)
}

/// K·exp(−cν^(−1/(α−1))) after checking ‖u‖ ≤ ε_H.
pub fn map_norm_bound(spec: &BumpSpec, params: &GevreyParams, ctx: &NormContext, prec: u32) -> Result<Interval> {
    check_map_threshold(&spec.nu, params, ctx, prec)?;
    Ok(map_norm_log_bound(&spec.nu, params, &ctx.k, prec).exp())
}

pub fn check_map_threshold(nu: &Rational, params: &GevreyParams, ctx: &NormContext, prec: u32) -> Result<()> {
    let lu = hamiltonian_log_bound(nu, params, &ctx.g_norm, prec);
    let le = ctx.eps_h.ln().ok_or_else(|| Error::Domain("eps_H must be positive".into()))?;
    if lu.cmp_interval(&le) != Some(std::cmp::Ordering::Less) {
        return Err(Error::ThresholdViolation(format!(
            "ln ||u|| in {lu} is not below ln eps_H in {le} for nu = {nu}"
        )));
    }
    Ok(())
}
