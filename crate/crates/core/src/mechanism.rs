//! Attraction maps T = Φ_{b_k} ∘ … ∘ Φ_{b_1} ∘ S_ω, the exact event engine
//! for the three contraction variants, and a float brute-force oracle.
//!
//! In each variant a driving bump (trigger d, partner t) contracts the
//! target factor t by e^{−ε} whenever factor d returns to phase 0, and an
//! auxiliary bump (trigger t, partner a) contracts factor a whenever t
//! returns to phase 0 near its starting magnitude. The auxiliary bump comes
//! first in the bump list, so at a driving time it still sees the old
//! target magnitude.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::flows::{apply_bump_dir, apply_bump_f64, Amplitude, Branch, BumpSpec, FlowConfig, PlanePoint, State};
use crate::numeric::{cos_sin_turns, ser, Interval, Real, DEFAULT_PREC};
use crate::profiles::plateau_at_distance;
use crate::rotations::{advance, Chain, Frequency3, Phase};

/// Largest number of exact events the engine replays one by one.
pub const ENGINE_EVENT_CAP: u64 = 100_000;
/// Largest number of contraction levels summed one by one.
pub const LEVEL_CAP: u64 = 100_000;
/// Partial auxiliary levels evaluated individually below this count.
pub const PARTIAL_LEVEL_CAP: u64 = 64;
/// Events written to JSON before the list is elided.
pub const EVENT_JSON_CAP: usize = 1000;
/// Iteration cap of the brute-force oracle.
pub const BRUTE_FORCE_CAP: u64 = 10_000_000;
/// Precision ceiling (bits) for the closed-form step count.
pub const MAX_PREC: u32 = 1 << 23;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapProgram {
    pub omega: Frequency3,
    pub bumps: Vec<BumpSpec>,
}

impl MapProgram {
    pub fn new(omega: Frequency3, bumps: Vec<BumpSpec>) -> Result<Self> {
        for b in &bumps {
            b.validate()?;
        }
        Ok(MapProgram { omega, bumps })
    }

    pub fn rotation(omega: Frequency3) -> Self {
        MapProgram { omega, bumps: Vec::new() }
    }
}

fn rotate(p: &PlanePoint, beta: &Rational, m: &Integer, cs: (f64, f64)) -> PlanePoint {
    match p {
        PlanePoint::Polar { magnitude, phase } => {
            PlanePoint::Polar { magnitude: magnitude.clone(), phase: advance(phase, m, beta) }
        }
        PlanePoint::Cartesian { x, y } => {
            let (c, s) = cs;
            PlanePoint::Cartesian { x: c * x - s * y, y: s * x + c * y }
        }
    }
}

/// Float cos/sin of 2πω_i.
#[derive(Clone, Copy, Debug)]
pub struct RotF64 {
    pub cs: [(f64, f64); 3],
}

impl RotF64 {
    pub fn new(omega: &Frequency3, sign: i32) -> Self {
        let cs = [0, 1, 2].map(|i| {
            let (c, s) = cos_sin_turns(omega.get(i), 64);
            (c.to_f64(), sign as f64 * s.to_f64())
        });
        RotF64 { cs }
    }

    pub fn apply(&self, v: [f64; 6]) -> [f64; 6] {
        let mut out = v;
        for i in 0..3 {
            let (c, s) = self.cs[i];
            let (x, y) = (v[2 * i], v[2 * i + 1]);
            out[2 * i] = c * x - s * y;
            out[2 * i + 1] = s * x + c * y;
        }
        out
    }
}

/// S_ω^m, exact on polar factors; Cartesian factors need m = ±1.
pub fn rotate_state(omega: &Frequency3, s: &State, m: &Integer) -> State {
    let sign = if *m < 0 { -1 } else { 1 };
    let cs = RotF64::new(omega, sign).cs;
    State([0, 1, 2].map(|i| rotate(&s.0[i], omega.get(i), m, cs[i])))
}

/// One step of T: rotation, then each bump in order.
pub fn step(program: &MapProgram, s: &State, cfg: &FlowConfig) -> Result<State> {
    let mut out = rotate_state(&program.omega, s, &Integer::from(1));
    for b in &program.bumps {
        out = apply_bump_dir(b, &out, 1, cfg)?.0;
    }
    Ok(out)
}

/// One step of T⁻¹.
pub fn step_inverse(program: &MapProgram, s: &State, cfg: &FlowConfig) -> Result<State> {
    let mut out = s.clone();
    for b in program.bumps.iter().rev() {
        out = apply_bump_dir(b, &out, -1, cfg)?.0;
    }
    Ok(rotate_state(&program.omega, &out, &Integer::from(-1)))
}

/// One float step of T (dir = 1) or T⁻¹ (dir = −1).
pub fn step_f64(program: &MapProgram, rot: &RotF64, v: [f64; 6], dir: i32, cfg: &FlowConfig) -> Result<[f64; 6]> {
    if dir > 0 {
        let mut out = rot.apply(v);
        for b in &program.bumps {
            out = apply_bump_f64(b, out, 1, cfg)?;
        }
        Ok(out)
    } else {
        let mut out = v;
        for b in program.bumps.iter().rev() {
            out = apply_bump_f64(b, out, -1, cfg)?;
        }
        Ok(rot.apply(out))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    I,
    II,
    III,
}

/// Zero-based factor roles of a variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Roles {
    pub driving: usize,
    pub target: usize,
    pub aux: usize,
}

impl Variant {
    pub fn roles(self) -> Roles {
        match self {
            Variant::II => Roles { driving: 2, target: 1, aux: 0 },
            Variant::I => Roles { driving: 1, target: 0, aux: 2 },
            Variant::III => Roles { driving: 0, target: 2, aux: 1 },
        }
    }

    pub fn chain(self) -> Chain {
        match self {
            Variant::II => Chain::Q1_Q2_Q3,
            Variant::I => Chain::Q3_Q1_Q2,
            Variant::III => Chain::Q2_Q3_Q1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::I => "I",
            Variant::II => "II",
            Variant::III => "III",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "I" | "i" | "1" => Ok(Variant::I),
            "II" | "ii" | "2" => Ok(Variant::II),
            "III" | "iii" | "3" => Ok(Variant::III),
            _ => Err(Error::Parse(format!("unknown variant `{s}`"))),
        }
    }
}

/// A bump application that changed the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(with = "ser::integer")]
    pub time: Integer,
    /// Index into the program's bump list.
    pub bump: usize,
    /// Contracted (or expanded) factor, 1-based.
    pub factor: usize,
    /// New magnitude over old magnitude.
    pub multiplier: Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Every event replayed exactly.
    EventEngine,
    /// Step count and magnitudes from closed forms only.
    ClosedForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpCheck {
    pub bump: usize,
    /// 1-based trigger factor.
    pub trigger: usize,
    /// Lower bound of (distance to the center at nonzero phases) − ν.
    pub off_phase_margin: String,
    /// "event", "clear" or "hit" at phase-0 returns.
    pub phase_zero: String,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonInterferenceReport {
    pub certified: bool,
    pub checks: Vec<BumpCheck>,
    /// First failure: (bump index, time residue class).
    pub offence: Option<(usize, String)>,
}

/// Certifies that bumps act only at designated events along orbits whose
/// factor magnitudes stay in `bands` and whose phases are multiples of
/// 1/q_i (orbits started on the axes).
///
/// At a nonzero phase θ = 2πk/q the sup-distance from m·(cos θ, sin θ) to
/// (c, 0) is at least c when cos θ ≤ 0, and at least
/// max(c − m, m·sin(2π/q)) otherwise. At phase 0 a designated bump is an
/// event; any other bump needs its whole band outside [c − ν, c + ν].
pub fn certify_noninterference(
    program: &MapProgram,
    bands: &[Interval; 3],
    designated: &[bool],
    prec: u32,
) -> NonInterferenceReport {
    let mut checks = Vec::new();
    let mut offence = None;
    for (bi, b) in program.bumps.iter().enumerate() {
        let i = b.trigger();
        let q = program.omega.q(i).clone();
        let band = &bands[i];
        let c = Interval::point(&b.center_x, prec);
        let lb = if q == 1 {
            None
        } else if q <= 3 {
            Some(c.clone())
        } else {
            let (_, s) = cos_sin_turns(&Rational::from((1, q.clone())), prec);
            let zero = Interval::from_int(0, prec);
            let near = c.sub(&Interval::from_float(band.hi().clone())).max(&zero);
            let side = Interval::from_float(band.lo().clone()).mul(&s);
            Some(c.min(&near.max(&side)))
        };
        let (margin, off_ok) = match lb {
            None => ("none".to_string(), true),
            Some(lb) => {
                let m = lb.sub(&Interval::point(&b.nu, prec));
                let ok = m.is_positive();
                (format!("{}", m.lo().to_f64()), ok)
            }
        };
        let is_designated = designated.get(bi).copied().unwrap_or(false);
        let phase_zero = if is_designated {
            "event"
        } else {
            let lo_edge = Rational::from(&b.center_x - &b.nu);
            let hi_edge = Rational::from(&b.center_x + &b.nu);
            let below = band.cmp_rational(&lo_edge).is_some_and(|o| o.is_le()) || band.hi_rational() <= lo_edge;
            let above = band.cmp_rational(&hi_edge).is_some_and(|o| o.is_ge()) || band.lo_rational() >= hi_edge;
            if below || above {
                "clear"
            } else {
                "hit"
            }
        };
        let ok = off_ok && phase_zero != "hit";
        if !ok && offence.is_none() {
            let residue = if !off_ok { format!("m mod {q} != 0") } else { format!("m mod {q} == 0") };
            offence = Some((bi, residue));
        }
        checks.push(BumpCheck { bump: bi, trigger: i + 1, off_phase_margin: margin, phase_zero: phase_zero.into(), ok });
    }
    NonInterferenceReport { certified: offence.is_none(), checks, offence }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismResult {
    pub variant: Variant,
    pub program: MapProgram,
    pub n: Integer,
    pub halving_count: Integer,
    pub final_state: State,
    pub envelope_ok: bool,
    pub noninterference_ok: bool,
    pub noninterference: NonInterferenceReport,
    pub engine: Engine,
    /// Number of bump applications that change the state.
    pub event_count: Real,
    /// Replayed events (event engine only).
    pub events: Vec<Event>,
    /// Precision (bits) used for the step count.
    pub precision: u32,
}

impl MechanismResult {
    pub fn magnitude(&self, i: usize) -> &Real {
        self.final_state.0[i].magnitude().expect("polar final state")
    }
}

#[derive(Serialize)]
struct MechanismJson<'a> {
    variant: Variant,
    #[serde(rename = "N")]
    n: String,
    halving_count: String,
    #[serde(rename = "final")]
    final_state: &'a State,
    envelope_ok: bool,
    noninterference_ok: bool,
    engine: Engine,
    event_count: String,
    events: Option<&'a [Event]>,
    events_elided: bool,
    precision_bits: u32,
    noninterference: &'a NonInterferenceReport,
    program: &'a MapProgram,
}

impl Serialize for MechanismResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let elided = self.events.len() > EVENT_JSON_CAP;
        let fs = State(self.final_state.0.clone().map(|p| match p {
            PlanePoint::Polar { magnitude, phase } => PlanePoint::Polar { magnitude: magnitude.coarsen(DEFAULT_PREC), phase },
            c => c,
        }));
        MechanismJson {
            variant: self.variant,
            n: self.n.to_string(),
            halving_count: self.halving_count.to_string(),
            final_state: &fs,
            envelope_ok: self.envelope_ok,
            noninterference_ok: self.noninterference_ok,
            engine: self.engine,
            event_count: self.event_count.to_string(),
            events: (!elided).then_some(self.events.as_slice()),
            events_elided: elided,
            precision_bits: self.precision,
            noninterference: &self.noninterference,
            program: &self.program,
        }
        .serialize(s)
    }
}

/// Smallest h with e^{−hε} ≤ 1/2, certified by x·e^{−hε} ≤ x/2 < x·e^{−(h−1)ε},
/// together with the precision that decided it.
pub fn halving_count(amp: &Amplitude, nu: &Rational, max_prec: u32) -> Result<(Integer, u32)> {
    let half = Rational::from((1, 2));
    if let Amplitude::Contraction(rho) = amp {
        let est = (std::f64::consts::LN_2 / -rho.to_f64().ln()).ceil();
        if est.is_finite() && est <= crate::flows::EXACT_POW_CAP as f64 {
            let mut h = (est as u32).max(1);
            let pw = |k: u32| rug::ops::Pow::pow(rho.clone(), k);
            while h > 1 && pw(h - 1) <= half {
                h -= 1;
            }
            while pw(h) > half {
                h += 1;
            }
            return Ok((Integer::from(h), DEFAULT_PREC));
        }
    }
    let le = amp.log_eps(nu, 64);
    // ln(1/ε)/ln 2 bits are needed to hold ln2/ε.
    let need = (-le.lo().to_f64() / std::f64::consts::LN_2).max(0.0);
    if !need.is_finite() || need > max_prec as f64 {
        return Err(Error::PrecisionBudget(format!(
            "step count needs about {need:.3e} bits, cap is {max_prec}"
        )));
    }
    let mut prec = (need as u32).saturating_add(128).max(DEFAULT_PREC);
    loop {
        let eps = amp.eps(nu, prec);
        let ln2 = Interval::ln2(prec);
        let t = ln2.div(&eps).ok_or_else(|| Error::Domain("eps must be positive".into()))?;
        let lo = Interval::from_float(t.lo().clone()).certain_ceil();
        let hi = Interval::from_float(t.hi().clone()).certain_ceil();
        if let (Some(lo), Some(hi)) = (lo, hi) {
            if Integer::from(&hi - &lo) <= 2 {
                let mut h = lo;
                while h <= hi {
                    let he = eps.mul(&Interval::point(&Rational::from(h.clone()), prec));
                    let h1e = eps.mul(&Interval::point(&Rational::from(Integer::from(&h - 1)), prec));
                    if he.lo() >= ln2.hi() && h1e.hi() < ln2.lo() {
                        return Ok((h, prec));
                    }
                    h += 1;
                }
            }
        }
        if prec >= max_prec {
            return Err(Error::PrecisionBudget(format!("step-count bracket undecided at {prec} bits")));
        }
        prec = prec.saturating_mul(2).min(max_prec);
    }
}

/// Σ_{j<h} f(m_j) for the auxiliary bump, m_j = x_t·e^{−jε_D}, and the
/// number of j with f(m_j) ≠ 0, each exact or enclosed.
fn aux_level_sum(
    x_t: &Real,
    aux: &BumpSpec,
    drive: &BumpSpec,
    h: &Integer,
    alpha: &Rational,
    prec: u32,
) -> Result<(Real, Real)> {
    let c = &aux.center_x;
    let nu = &aux.nu;
    let dist = |m: &Real| m.sub(&Real::Exact(c.clone()), prec).abs();
    let below_support = |m: &Real| m.cmp_rational(&Rational::from(c - nu)).is_some_and(|o| o.is_le());
    if h.to_u64().is_some_and(|v| v <= LEVEL_CAP) {
        let step = drive.amplitude.factor(&drive.nu, &Real::one(), 1, prec);
        let mut m = x_t.clone();
        let mut sum = Real::zero();
        let mut hits = Integer::new();
        let mut j = Integer::new();
        while j < *h {
            let f = plateau_at_distance(&dist(&m), nu, alpha, prec);
            if f == Real::zero() {
                if below_support(&m) {
                    break;
                }
            } else {
                sum = sum.add(&f, prec);
                hits += 1;
            }
            m = m.mul(&step, prec);
            j += 1;
        }
        return Ok((sum, Real::Exact(hits.into())));
    }
    // Level counts: m_j ≥ c − ν/2 ⇔ jε ≤ ln(x_t/(c − ν/2)), and
    // m_j > c − ν ⇔ jε < ln(x_t/(c − ν)). Each count is returned as a
    // certain range [lo, hi] ⊂ [0, h].
    let eps = drive.amplitude.eps(&drive.nu, prec);
    let xt = x_t.interval(prec);
    let clip = |k: Integer| k.max(Integer::new()).min(h.clone());
    let count = |edge: Rational, strict: bool| -> Result<(Integer, Integer)> {
        if edge <= 0 {
            return Ok((h.clone(), h.clone()));
        }
        let l = xt
            .div(&Interval::point(&edge, prec))
            .and_then(|r| r.ln())
            .ok_or_else(|| Error::Domain("level logarithm".into()))?;
        let t = l.div(&eps).expect("eps > 0");
        let end = |f: &rug::Float| -> Integer {
            let p = Interval::from_float(f.clone());
            let k = if strict { p.certain_ceil() } else { p.certain_floor().map(|v| v + 1) };
            k.expect("a point has a certain floor")
        };
        Ok((clip(end(t.lo())), clip(end(t.hi()))))
    };
    let (p_lo, p_hi) = count(Rational::from(c - Rational::from(nu / 2u32)), false)?;
    let (s_lo, s_hi) = count(Rational::from(c - nu), true)?;
    let (s_lo, s_hi) = (s_lo.max(p_lo.clone()), s_hi.max(p_hi.clone()));
    if p_lo == p_hi && s_lo == s_hi {
        let (n_p, n_s) = (p_lo.clone(), s_lo.clone());
        let n_partial = Integer::from(&n_s - &n_p);
        let base = Real::Exact(Rational::from(n_p.clone()));
        if n_partial == 0 {
            return Ok((base, Real::Exact(n_p.into())));
        }
        if n_partial.to_u64().is_some_and(|v| v <= PARTIAL_LEVEL_CAP) {
            let mut sum = base;
            let mut j = n_p.clone();
            while j < n_s {
                let m = Real::Approx(xt.mul(&eps.mul(&Interval::point(&Rational::from(j.clone()), prec)).neg().exp()));
                sum = sum.add(&plateau_at_distance(&dist(&m), nu, alpha, prec), prec);
                j += 1;
            }
            return Ok((sum, Real::Exact(n_s.into())));
        }
    } else if Integer::from(&s_lo - &p_hi) <= PARTIAL_LEVEL_CAP {
        return Err(Error::PrecisionBudget("auxiliary level count undecided".into()));
    }
    let range = |a: &Integer, b: &Integer| -> Real {
        if a == b {
            Real::Exact(a.clone().into())
        } else {
            Real::Approx(Interval::from_bounds(&a.clone().into(), &b.clone().into(), prec))
        }
    };
    // Partial levels contribute f ∈ [0, 1] each.
    Ok((range(&p_lo, &s_hi), range(&s_lo, &s_hi)))
}

pub fn polar_axis_magnitudes(z: &State) -> Result<[Real; 3]> {
    let mut out = [Real::zero(), Real::zero(), Real::zero()];
    for (i, p) in z.0.iter().enumerate() {
        match p {
            PlanePoint::Polar { magnitude, phase } if phase.is_zero() => {
                if magnitude.cmp_rational(&Rational::new()) == Some(Ordering::Less) {
                    return Err(Error::HypothesisViolation(format!("x{} is negative", i + 1)));
                }
                out[i] = magnitude.clone();
            }
            _ => return Err(Error::HypothesisViolation(format!("factor {} is not on the positive x-axis", i + 1))),
        }
    }
    Ok(out)
}

/// Bump center for a trigger magnitude: the magnitude itself when exact,
/// otherwise a dyadic rational within ν/8 of it.
pub fn center_for(m: &Real, nu: &Rational) -> Rational {
    match m {
        Real::Exact(r) => r.clone(),
        Real::Approx(i) => {
            // ⌈log₂(1/ν)⌉ ≤ bits(den) − bits(num) + 1.
            let bits = (nu.denom().significant_bits() + 17).saturating_sub(nu.numer().significant_bits());
            crate::numeric::snap(i, &(Integer::from(1) << bits))
        }
    }
}

/// The program of a variant for trigger magnitudes x and frequency ω:
/// [auxiliary bump, driving bump].
pub fn variant_program(
    variant: Variant,
    omega: &Frequency3,
    x: &[Real; 3],
    aux_amp: &Amplitude,
    drive_amp: &Amplitude,
) -> Result<MapProgram> {
    let r = variant.roles();
    let cube = |i: usize| Rational::from((1, rug::ops::Pow::pow(omega.q(i).clone(), 3u32)));
    let nu_a = cube(r.target);
    let nu_d = cube(r.driving);
    let aux = BumpSpec::new(r.target + 1, r.aux + 1, center_for(&x[r.target], &nu_a), nu_a, aux_amp.clone())?;
    let drive = BumpSpec::new(r.driving + 1, r.target + 1, center_for(&x[r.driving], &nu_d), nu_d, drive_amp.clone())?;
    MapProgram::new(omega.clone(), vec![aux, drive])
}

#[derive(Clone, Debug)]
pub struct MechanismOptions {
    pub engine_event_cap: u64,
    pub max_prec: u32,
    /// (auxiliary, driving) centers replacing the derived ones, for replay.
    pub centers: Option<(Rational, Rational)>,
}

impl Default for MechanismOptions {
    fn default() -> Self {
        MechanismOptions { engine_event_cap: ENGINE_EVENT_CAP, max_prec: MAX_PREC, centers: None }
    }
}

/// Runs a variant with one amplitude for both bumps.
pub fn run_mechanism(variant: Variant, omega: &Frequency3, z: &State, amp: &Amplitude, cfg: &FlowConfig) -> Result<MechanismResult> {
    run_mechanism_with(variant, omega, z, amp, amp, cfg, &MechanismOptions::default())
}

fn check_hypotheses(variant: Variant, omega: &Frequency3, x: &[Real; 3], cfg: &FlowConfig) -> Result<()> {
    let r = variant.roles();
    if !omega.check_chain(variant.chain()) {
        return Err(Error::HypothesisViolation(format!("variant {variant} needs chain {}, got {omega}", variant.chain())));
    }
    for i in [r.target, r.driving] {
        let inv_q = Rational::from((1, omega.q(i).clone()));
        let ok = x[i].cmp_rational(&inv_q).is_some_and(|o| o.is_ge()) || x[i].lo_rational() >= inv_q;
        if !ok {
            return Err(Error::HypothesisViolation(format!("x{} >= 1/q{} fails ({} vs {inv_q})", i + 1, i + 1, x[i])));
        }
    }
    let two_r = Rational::from(&cfg.r * 2u32);
    for (i, xi) in x.iter().enumerate() {
        if !xi.certainly_le(&Real::Exact(two_r.clone())) {
            return Err(Error::HypothesisViolation(format!("x{} exceeds 2R", i + 1)));
        }
    }
    Ok(())
}

/// Runs a variant from an axis state with separate auxiliary and driving
/// amplitudes.
pub fn run_mechanism_with(
    variant: Variant,
    omega: &Frequency3,
    z: &State,
    aux_amp: &Amplitude,
    drive_amp: &Amplitude,
    cfg: &FlowConfig,
    opts: &MechanismOptions,
) -> Result<MechanismResult> {
    let x = polar_axis_magnitudes(z)?;
    check_hypotheses(variant, omega, &x, cfg)?;
    let r = variant.roles();
    let mut program = variant_program(variant, omega, &x, aux_amp, drive_amp)?;
    if let Some((ca, cd)) = &opts.centers {
        program.bumps[0].center_x = ca.clone();
        program.bumps[1].center_x = cd.clone();
    }
    let (aux, drive) = (&program.bumps[0], &program.bumps[1]);
    // Every driving event must see the trigger on the plateau.
    let off = x[r.driving].sub(&Real::Exact(drive.center_x.clone()), cfg.prec).abs();
    if !off.certainly_le(&Real::Exact(Rational::from(&drive.nu / 2u32))) {
        return Err(Error::HypothesisViolation(format!(
            "driving magnitude x{} is not on the plateau of its bump",
            r.driving + 1
        )));
    }

    let (h, hp) = halving_count(&drive.amplitude, &drive.nu, opts.max_prec)?;
    let lp = cfg.prec;
    let q_d = omega.q(r.driving).clone();
    let q_t = omega.q(r.target).clone();
    let n = Integer::from(&h * &q_d);
    let ratio = Integer::from(&q_d / &q_t);
    let ratio_r = Real::Exact(Rational::from(ratio.clone()));

    // Closed form. The bracket above certifies x̂_t ≤ x_t/2, which the
    // working-precision enclosure is clipped to.
    let x_t_half = Rational::from(&x[r.target].lo_rational() / 2u32);
    let x_t_hat = match x[r.target].mul(&drive.amplitude.factor_pow(&drive.nu, &h, lp), lp) {
        Real::Approx(i) if x[r.target].is_exact() => Real::Approx(i.clip_hi(&x_t_half)),
        v => v,
    };
    let (level_sum, aux_hits) = match aux_level_sum(&x[r.target], aux, drive, &h, &cfg.alpha, lp) {
        Err(Error::PrecisionBudget(_)) if hp > lp => aux_level_sum(&x[r.target], aux, drive, &h, &cfg.alpha, hp)?,
        v => v?,
    };
    let x_a_hat = match &level_sum {
        Real::Exact(s) if *s.denom() == 1 => {
            let k = Integer::from(s.numer() * &ratio);
            x[r.aux].mul(&aux.amplitude.factor_pow(&aux.nu, &k, lp), lp)
        }
        _ => {
            let e = aux.amplitude.eps(&aux.nu, lp).mul_rational(&Rational::from(ratio.clone()));
            let ex = e.mul(&level_sum.interval(lp)).neg().exp();
            x[r.aux].mul(&Real::Approx(ex), lp)
        }
    };
    let mut mags = x.clone();
    mags[r.target] = x_t_hat;
    mags[r.aux] = x_a_hat;
    let prec = hp.max(lp);

    let bands = [0, 1, 2].map(|i| mags[i].interval(prec).hull(&x[i].interval(prec)).coarsen(lp));
    let ni = certify_noninterference(&program, &bands, &[true, true], lp);
    if !ni.certified {
        let (b, residue) = ni.offence.clone().expect("offence recorded");
        return Err(Error::Interference { bump: b, time: residue });
    }

    let event_count = Real::Exact(h.clone().into()).add(&aux_hits.mul(&ratio_r, lp), lp);
    // Magnitudes only shrink: x̂_t by the bracket, x̂_a by e^{−ε·(…)} ≤ 1.
    let envelope_ok = mags[r.aux].certainly_le(&x[r.aux]) && mags[r.target].certainly_le(&x[r.target]);
    let events_total = Integer::from(&h * &ratio);
    let (final_mags, engine, events) = if events_total.to_u64().is_some_and(|v| v <= opts.engine_event_cap) {
        let (s, events) = event_engine(&program, z, &q_t, &events_total, cfg, lp)?;
        let fm = polar_axis_magnitudes(&s)
            .map_err(|_| Error::NotCertified("event engine left the axes".into()))?;
        for i in 0..3 {
            let agree = match (&fm[i], &mags[i]) {
                (Real::Exact(a), Real::Exact(b)) => a == b,
                (a, b) => {
                    let (ai, bi) = (a.interval(lp), b.interval(lp));
                    ai.lo() <= bi.hi() && bi.lo() <= ai.hi()
                }
            };
            if !agree {
                return Err(Error::NotCertified(format!("event engine and closed form disagree on x{}", i + 1)));
            }
        }
        if Real::Exact(Rational::from(events.len())) != event_count {
            return Err(Error::NotCertified("event count differs from closed form".into()));
        }
        (fm, Engine::EventEngine, events)
    } else {
        (mags, Engine::ClosedForm, Vec::new())
    };

    Ok(MechanismResult {
        variant,
        program: program.clone(),
        n,
        halving_count: h,
        final_state: State::axis(final_mags),
        envelope_ok,
        noninterference_ok: ni.certified,
        noninterference: ni,
        engine,
        event_count,
        events,
        precision: prec,
    })
}

fn ratio_real(after: &Real, before: &Real, prec: u32) -> Real {
    match (after, before) {
        (_, b) if *b == Real::zero() => Real::one(),
        (Real::Exact(a), Real::Exact(b)) => Real::Exact(Rational::from(a / b)),
        (a, b) => Real::Approx(a.interval(prec).div(&b.interval(prec)).expect("nonzero")),
    }
}

/// Replays the events at times k·step, k = 1..=count, exactly. Between
/// event times only the phases move, which the non-interference
/// certificate guarantees.
pub fn event_engine(
    program: &MapProgram,
    z: &State,
    step_len: &Integer,
    count: &Integer,
    cfg: &FlowConfig,
    prec: u32,
) -> Result<(State, Vec<Event>)> {
    let mut s = z.clone();
    let mut events = Vec::new();
    let mut t = Integer::new();
    let ecfg = FlowConfig { prec, ..cfg.clone() };
    let mut k = Integer::new();
    while k < *count {
        k += 1;
        t += step_len;
        s = rotate_state(&program.omega, &s, step_len);
        for (bi, b) in program.bumps.iter().enumerate() {
            let before = s.0[b.partner()].clone();
            let (next, branch) = apply_bump_dir(b, &s, 1, &ecfg)?;
            match branch {
                Branch::Identity => {}
                Branch::ClosedForm => {
                    let (Some(mb), Some(ma)) = (before.magnitude(), next.0[b.partner()].magnitude()) else {
                        return Err(Error::NotCertified("event left polar form".into()));
                    };
                    if ma != mb {
                        events.push(Event { time: t.clone(), bump: bi, factor: b.j, multiplier: ratio_real(ma, mb, prec) });
                    }
                }
                Branch::Numeric => {
                    return Err(Error::NotCertified(format!("bump {bi} needed the numeric branch at time {t}")));
                }
            }
            if next.0.iter().any(|p| matches!(p, PlanePoint::Cartesian { .. })) {
                return Err(Error::NotCertified(format!("bump {bi} left exact form at time {t}")));
            }
            s = next;
        }
    }
    Ok((s, events))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteEvent {
    pub time: u64,
    pub bump: usize,
    pub factor: usize,
    pub multiplier: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BruteForceRun {
    pub final_state: [f64; 6],
    pub events: Vec<BruteEvent>,
    pub events_truncated: bool,
    /// Largest modulus reached by each factor, including the start.
    pub max_modulus: [f64; 3],
    /// (time, state) every `sample_every` steps, plus the start and end.
    pub samples: Vec<(u64, [f64; 6])>,
}

pub fn modulus(v: &[f64; 6], i: usize) -> f64 {
    v[2 * i].hypot(v[2 * i + 1])
}

/// Float iteration of `step` for n steps; records every bump application
/// that changes the state.
pub fn brute_force_run(
    program: &MapProgram,
    s: &[f64; 6],
    n_steps: u64,
    sample_every: Option<u64>,
    cfg: &FlowConfig,
) -> Result<BruteForceRun> {
    if n_steps > BRUTE_FORCE_CAP {
        return Err(Error::Domain(format!("brute force capped at {BRUTE_FORCE_CAP} steps")));
    }
    let rot = RotF64::new(&program.omega, 1);
    let mut v = *s;
    let mut run = BruteForceRun { max_modulus: [0, 1, 2].map(|i| modulus(&v, i)), ..Default::default() };
    if sample_every.is_some() {
        run.samples.push((0, v));
    }
    for m in 1..=n_steps {
        v = rot.apply(v);
        for (bi, b) in program.bumps.iter().enumerate() {
            let next = apply_bump_f64(b, v, 1, cfg)?;
            if next != v {
                if run.events.len() < 1_000_000 {
                    let p = b.partner();
                    let before = modulus(&v, p);
                    let mult = if before == 0.0 { 1.0 } else { modulus(&next, p) / before };
                    run.events.push(BruteEvent { time: m, bump: bi, factor: b.j, multiplier: mult });
                } else {
                    run.events_truncated = true;
                }
            }
            v = next;
        }
        for i in 0..3 {
            run.max_modulus[i] = run.max_modulus[i].max(modulus(&v, i));
        }
        if let Some(k) = sample_every {
            if k > 0 && (m % k == 0 || m == n_steps) {
                run.samples.push((m, v));
            }
        }
    }
    run.final_state = v;
    Ok(run)
}

/// Phase after m steps from phase 0.
pub fn phase_at(omega: &Frequency3, i: usize, m: &Integer) -> Phase {
    advance(&Phase::zero(), m, omega.get(i))
}
