//! The inductive construction: three-phase steps, admissibility, stage
//! certificates, the induction loop with its limit checks, and an
//! independent replay verifier.
//!
//! Every phase is an exact run of the attraction mechanism. The initial
//! point of a step and the stage initial points are float back-iterates,
//! computed only while the step counts stay within the replay cap.

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::budget::{compose_ledger_ln, eps_compose};
use crate::error::{Error, Result};
use crate::flows::{
    check_map_threshold, hamiltonian_log_bound, map_norm_log_bound, Amplitude, BumpSpec, FlowConfig, NormContext,
    PlanePoint, State,
};
use crate::mechanism::{
    brute_force_run, certify_noninterference, modulus, polar_axis_magnitudes, run_mechanism_with, step_f64, Engine,
    MapProgram, MechanismOptions, MechanismResult, RotF64, Variant, BRUTE_FORCE_CAP,
};
use crate::numeric::{log_add, ser, Interval, Real, DEFAULT_PREC};
use crate::profiles::GevreyParams;
use crate::rotations::{certify_density, Chain, DensityCertificate, Frequency3};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DENOMINATOR_CAP_BITS: u32 = 65_536;
pub const DEFAULT_MAX_RETRIES: u32 = 4;
/// Float replays must land within this sup-distance of the exact checkpoint.
pub const REPLAY_TOL: f64 = 1e-8;
/// Highest working precision the construction escalates to.
pub const MAX_WORKING_PREC: u32 = 1 << 20;
/// Re-runs of a phase while the predicted event-count ratio is revised.
const PREDICTION_ROUNDS: u32 = 6;

mod serde_rational3 {
    use rug::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &[Rational; 3], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = x.iter().map(crate::numeric::fmt_rational).collect();
        serde::Serialize::serialize(&v, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Rational; 3], D::Error> {
        let v = <[String; 3]>::deserialize(d)?;
        let mut out = [Rational::new(), Rational::new(), Rational::new()];
        for (o, s) in out.iter_mut().zip(v.iter()) {
            *o = crate::numeric::parse_rational(s).map_err(de::Error::custom)?;
        }
        Ok(out)
    }
}

mod serde_opt_rational {
    use rug::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(r) => s.serialize_some(&crate::numeric::fmt_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| crate::numeric::parse_rational(&s).map_err(de::Error::custom))
            .transpose()
    }
}

/// How bump amplitudes are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    /// ε = δ/R per bump, R the predicted number of auxiliary events per
    /// driving event when the bump later acts as an auxiliary bump.
    Toy {
        #[serde(with = "ser::rational")]
        delta: Rational,
    },
    /// ε = exp(−c·ν^(−2/(α−1))).
    Faithful,
}

impl Mode {
    pub fn toy() -> Self {
        Mode::Toy { delta: Rational::from((1, 2)) }
    }

    pub fn is_toy(&self) -> bool {
        matches!(self, Mode::Toy { .. })
    }

    fn amplitude(&self, params: &GevreyParams, ratio: &Integer) -> Amplitude {
        match self {
            Mode::Toy { delta } => Amplitude::Rate(Rational::from(delta / ratio)),
            Mode::Faithful => Amplitude::Faithful { c: params.c.clone(), alpha: params.alpha.clone() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConfig {
    pub params: GevreyParams,
    pub omega0: Frequency3,
    #[serde(with = "serde_rational3")]
    pub x0: [Rational; 3],
    pub stages: u32,
    pub mode: Mode,
    /// Upper bound imposed on η⁽¹⁾.
    #[serde(with = "serde_opt_rational", default)]
    pub eta0: Option<Rational>,
    /// Certified bound on ‖g_R‖_{α,L₁} used by the norm ledger.
    #[serde(with = "ser::rational")]
    pub g_norm: Rational,
    /// Initial working precision in bits; raised automatically.
    pub prec: u32,
    pub denominator_cap_bits: u32,
    pub max_retries: u32,
    /// Recorded for reproducibility; the construction is deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl ConstructionConfig {
    pub fn default_toy() -> Result<Self> {
        let q = |a: i64, b: i64| Rational::from((a, b));
        Ok(ConstructionConfig {
            params: GevreyParams::default_with(q(2, 1), q(1, 1), q(10, 1))?,
            omega0: Frequency3::new([q(1, 4), q(1, 32), q(1, 2)])?,
            x0: [q(1, 32), q(1, 32), q(1, 32)],
            stages: 5,
            mode: Mode::toy(),
            eta0: None,
            g_norm: q(100, 1),
            prec: DEFAULT_PREC,
            denominator_cap_bits: DEFAULT_DENOMINATOR_CAP_BITS,
            max_retries: DEFAULT_MAX_RETRIES,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.prec < 64 {
            return Err(Error::Domain("precision must be at least 64 bits".into()));
        }
        if !self.omega0.check_chain(Chain::Q3_Q1_Q2) {
            return Err(Error::ChainViolation(format!("{} does not satisfy q3|q1|q2", self.omega0)));
        }
        let half_r = Rational::from(&self.params.r / 2u32);
        for (i, x) in self.x0.iter().enumerate() {
            if *x <= 0 || *x > half_r {
                return Err(Error::HypothesisViolation(format!("x{} must lie in (0, R/2]", i + 1)));
            }
        }
        if self.x0[1] < Rational::from((1, self.omega0.q(1).clone())) {
            return Err(Error::HypothesisViolation("x2 >= 1/q2 fails at stage 0".into()));
        }
        if let Mode::Toy { delta } = &self.mode {
            if *delta <= 0 || delta.to_f64() > std::f64::consts::LN_2 {
                return Err(Error::Domain("toy delta must lie in (0, ln 2]".into()));
            }
        }
        if self.g_norm <= 0 {
            return Err(Error::Domain("g_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Largest unit fraction not exceeding v > 0.
pub fn unit_below(v: &Rational) -> Rational {
    let inv = Rational::from(v.recip_ref());
    Rational::from((Integer::from(1), ceil_int(&inv)))
}

fn floor_int(r: &Rational) -> Integer {
    r.numer().clone().div_rem_floor(r.denom().clone()).0
}

fn ceil_int(r: &Rational) -> Integer {
    -floor_int(&Rational::from(-r))
}

fn pow2(n: u32) -> Integer {
    Integer::from(1) << n
}

/// The η schedule: η⁽¹⁾ is the largest unit fraction below
/// min{ε/4, γ/4, 1/10, η₀}; η⁽ⁿ⁺¹⁾ the largest below
/// min{ε/2ⁿ⁺², γ/2ⁿ⁺², 1/10, η⁽ⁿ⁾/(2q̄₂⁽ⁿ⁾)}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaSchedule {
    /// Enclosure of the composition threshold ε.
    pub epsilon: Real,
    #[serde(with = "ser::rational")]
    pub gamma: Rational,
    #[serde(with = "serde_opt_rational", default)]
    pub eta0: Option<Rational>,
}

impl EtaSchedule {
    pub fn new(params: &GevreyParams, eta0: Option<Rational>, prec: u32) -> Result<Self> {
        let e = eps_compose(3, &params.alpha, &params.l, &params.l1, prec)?;
        Ok(EtaSchedule { epsilon: Real::Approx(e), gamma: params.gamma.clone(), eta0 })
    }

    fn eps_lo(&self) -> Rational {
        self.epsilon.lo_rational()
    }

    /// min{ε/2ⁿ⁺¹, γ/2ⁿ⁺¹, 1/10}.
    pub fn cap(&self, n: u32) -> Rational {
        let d = pow2(n + 1);
        let a = Rational::from(&self.eps_lo() / &d);
        let b = Rational::from(&self.gamma / &d);
        a.min(b).min(Rational::from((1, 10)))
    }

    pub fn first(&self) -> Rational {
        let mut v = self.cap(1);
        if let Some(e) = &self.eta0 {
            v = v.min(e.clone());
        }
        unit_below(&v)
    }

    /// η⁽ⁿ⁺¹⁾ from η⁽ⁿ⁾ and q̄₂⁽ⁿ⁾.
    pub fn next(&self, n: u32, eta_n: &Rational, q2_bar: &Integer) -> Rational {
        let t = Rational::from(eta_n / Integer::from(q2_bar * 2u32));
        unit_below(&self.cap(n + 1).min(t))
    }

    /// min{ε/2, γ/2}, the stage-0 norm threshold.
    pub fn stage0_bound(&self) -> Rational {
        Rational::from(&self.eps_lo() / 2u32).min(Rational::from(&self.gamma / 2u32))
    }
}

/// Σ_{k>n} η⁽ᵏ⁾ bounded through the last computed stage plus the geometric
/// tail (2/3)·η⁽ᴺ⁾/q̄₂⁽ᴺ⁾ that the schedule guarantees beyond it.
/// `etas[k]` and `q2s[k]` are indexed by stage; entry 0 is unused.
pub fn tail_sum(etas: &[Rational], q2s: &[Integer], n: usize) -> Rational {
    let last = etas.len() - 1;
    let mut s = Rational::from((2, 3)) * Rational::from(&etas[last] / &q2s[last]);
    for e in &etas[n + 1..] {
        s += e;
    }
    s
}

/// True iff every bump's support misses the box {|s_i| ≤ 1.1|z_i|}:
/// center − ν > 1.1·|z_i| for its trigger factor i, exactly.
pub fn check_admissible(program: &MapProgram, z: &State) -> bool {
    let bound = |i: usize| -> Rational {
        let m = match &z.0[i] {
            PlanePoint::Polar { magnitude, .. } => magnitude.hi_rational(),
            PlanePoint::Cartesian { x, y } => {
                crate::numeric::rational_of_f64(x.hypot(*y) * (1.0 + 4.0 * f64::EPSILON))
            }
        };
        m * Rational::from((11, 10))
    };
    program.bumps.iter().all(|b| Rational::from(&b.center_x - &b.nu) > bound(b.trigger()))
}

/// Numerator p ≥ 1 coprime to q with |p/q − old| < η, searched outward
/// from round(old·q).
pub fn pick_numerator(old: &Rational, q: &Integer, eta: &Rational) -> Option<Rational> {
    let r = Rational::from(old * q).round().numer().clone();
    let ok = |p: &Integer| -> Option<Rational> {
        if *p < 1 || Integer::from(p.gcd_ref(q)) != 1 {
            return None;
        }
        let v = Rational::from((p.clone(), q.clone()));
        (Rational::from(&v - old).abs() < *eta).then_some(v)
    };
    let mut d = Integer::new();
    loop {
        let lo = Integer::from(&r - &d);
        let hi = Integer::from(&r + &d);
        let within = |p: &Integer| Rational::from(Rational::from((p.clone(), q.clone())) - old).abs() < *eta;
        if !within(&lo) && !within(&hi) && d > 0 {
            return None;
        }
        if let Some(v) = ok(&lo) {
            return Some(v);
        }
        if d > 0 {
            if let Some(v) = ok(&hi) {
                return Some(v);
            }
        }
        d += 1;
    }
}

/// Constraints on a new denominator q = k·base.
struct DenominatorRule<'a> {
    base: &'a Integer,
    /// base/q < η.
    ratio_eta: Option<&'a Rational>,
    /// 1/q < η.
    abs_eta: Option<&'a Rational>,
    /// q ≥ v for each v.
    at_least: Vec<Rational>,
    /// q > v for each v.
    above: Vec<Rational>,
    /// q⁻³ ≤ v/10.
    margin: Option<Rational>,
    /// The coordinate being replaced and the closeness tolerance.
    old: &'a Rational,
    eta: &'a Rational,
}

impl DenominatorRule<'_> {
    fn holds(&self, q: &Integer) -> bool {
        let qr = Rational::from(q.clone());
        if let Some(e) = self.ratio_eta {
            if Rational::from((self.base.clone(), q.clone())) >= *e {
                return false;
            }
        }
        if let Some(e) = self.abs_eta {
            if Rational::from((1, q.clone())) >= *e {
                return false;
            }
        }
        if self.at_least.iter().any(|v| qr < *v) || self.above.iter().any(|v| qr <= *v) {
            return false;
        }
        if let Some(v) = &self.margin {
            let cube = rug::ops::Pow::pow(q.clone(), 3u32);
            if Rational::from((Integer::from(1), cube)) > Rational::from(v / 10u32) {
                return false;
            }
        }
        true
    }

    /// Smallest admissible multiplier, scaled by 2^retry, and the new
    /// coordinate.
    fn choose(&self, retry: u32, cap_bits: u32) -> Result<(Integer, Rational)> {
        let mut k = Integer::from(1);
        if let Some(e) = self.ratio_eta {
            k = k.max(floor_int(&Rational::from(e.recip_ref())) + 1u32);
        }
        if let Some(e) = self.abs_eta {
            let t = Rational::from(Rational::from(e * self.base).recip());
            k = k.max(floor_int(&t) + 1u32);
        }
        for v in &self.at_least {
            k = k.max(ceil_int(&Rational::from(v / self.base)));
        }
        for v in &self.above {
            k = k.max(floor_int(&Rational::from(v / self.base)) + 1u32);
        }
        let mut scaled = false;
        loop {
            let q = Integer::from(&k * self.base);
            if q.significant_bits() > cap_bits {
                return Err(Error::RetryExhausted(format!("denominator exceeds the {cap_bits}-bit cap")));
            }
            if self.holds(&q) {
                if !scaled && retry > 0 {
                    k <<= retry;
                    scaled = true;
                    continue;
                }
                if let Some(v) = pick_numerator(self.old, &q, self.eta) {
                    return Ok((k, v));
                }
            }
            k += 1;
        }
    }
}

fn cube_recip(q: &Integer) -> Rational {
    Rational::from((Integer::from(1), rug::ops::Pow::pow(q.clone(), 3u32)))
}

fn recip_lo(x: &Real) -> Rational {
    let lo = x.lo_rational();
    if lo <= 0 {
        Rational::from(u32::MAX)
    } else {
        lo.recip()
    }
}

fn half_lo(x: &Real) -> Real {
    Real::Exact(Rational::from(&x.lo_rational() / 2u32))
}

/// Failure of a step attempt.
#[derive(Debug)]
enum StepError {
    /// Magnitude enclosures are too wide for a plateau of the given size;
    /// `input` marks widths inherited from the step's input data.
    Shortfall { needed: u32, input: bool },
    /// The float initial point failed its checks (retry with larger denominators).
    ZPrime(String),
    Fail(Error),
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Fail(e)
    }
}

type StepResult<T> = std::result::Result<T, StepError>;

/// Requires an enclosure of x tight enough that a bump of radius ν
/// centered on its midpoint holds x on the inner plateau.
fn check_resolution(x: &Real, nu: &Rational, prec: u32, input: bool) -> StepResult<()> {
    let Real::Approx(i) = x else {
        return Ok(());
    };
    if let Some(w) = i.width().to_rational() {
        if w <= Rational::from(nu / 64u32) {
            return Ok(());
        }
    }
    let hi = x.hi_rational();
    let x_hi = hi.numer().significant_bits() as f64 - hi.denom().significant_bits() as f64 + 1.0;
    let nu_bits = nu.denom().significant_bits() as f64 - nu.numer().significant_bits() as f64;
    let needed = (x_hi + nu_bits).ceil().max(0.0) as u32 + 48;
    // Enough working bits already: the width is inherited from the input.
    let input = input || needed <= prec;
    Err(StepError::Shortfall { needed: needed.max(prec * 2), input })
}

/// Settings shared by the steps of one construction.
#[derive(Clone, Debug)]
pub struct StepSettings {
    pub params: GevreyParams,
    pub mode: Mode,
    pub flow: FlowConfig,
    pub schedule: EtaSchedule,
    /// Index of the stage being built.
    pub stage: u32,
    pub cap_bits: u32,
    pub max_retries: u32,
    pub g_norm: Rational,
}

impl StepSettings {
    pub fn from_config(cfg: &ConstructionConfig, stage: u32) -> Result<Self> {
        let mut flow = FlowConfig::from_params(&cfg.params);
        flow.prec = cfg.prec;
        Ok(StepSettings {
            params: cfg.params.clone(),
            mode: cfg.mode.clone(),
            flow,
            schedule: EtaSchedule::new(&cfg.params, cfg.eta0.clone(), DEFAULT_PREC)?,
            stage,
            cap_bits: cfg.denominator_cap_bits,
            max_retries: cfg.max_retries,
            g_norm: cfg.g_norm.clone(),
        })
    }

    fn opts(&self) -> MechanismOptions {
        MechanismOptions::default()
    }
}

fn rule_phase1<'a>(q2: &'a Integer, w3: &'a Rational, x3: &Real, eta: &'a Rational) -> DenominatorRule<'a> {
    DenominatorRule {
        base: q2,
        ratio_eta: None,
        abs_eta: Some(eta),
        at_least: vec![recip_lo(x3)],
        above: vec![],
        margin: Some(x3.lo_rational()),
        old: w3,
        eta,
    }
}

fn rule_phase2<'a>(q3: &'a Integer, w1: &'a Rational, x1_hat: &Real, eta: &'a Rational) -> DenominatorRule<'a> {
    DenominatorRule {
        base: q3,
        ratio_eta: Some(eta),
        abs_eta: None,
        at_least: vec![],
        above: vec![recip_lo(x1_hat)],
        margin: Some(x1_hat.lo_rational()),
        old: w1,
        eta,
    }
}

fn rule_phase3<'a>(q1: &'a Integer, w2: &'a Rational, x2: &Real, x2_tilde: &Real, eta: &'a Rational) -> DenominatorRule<'a> {
    DenominatorRule {
        base: q1,
        ratio_eta: Some(eta),
        abs_eta: None,
        at_least: vec![recip_lo(x2), recip_lo(x2_tilde)],
        above: vec![],
        margin: None,
        old: w2,
        eta,
    }
}

fn magnitudes(res: &MechanismResult) -> [Real; 3] {
    [0, 1, 2].map(|i| res.magnitude(i).clone())
}

fn axis_f64(x: &[Real; 3]) -> [f64; 6] {
    [x[0].to_f64(), 0.0, x[1].to_f64(), 0.0, x[2].to_f64(), 0.0]
}

fn sup_dist(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// T^(−n)(v) by float iteration of the inverse map.
pub fn iterate_backward(program: &MapProgram, v: [f64; 6], n: u64, flow: &FlowConfig) -> Result<[f64; 6]> {
    let rot = RotF64::new(&program.omega, -1);
    let mut v = v;
    for _ in 0..n {
        v = step_f64(program, &rot, v, -1, flow)?;
    }
    Ok(v)
}

/// One phase of a step: a variant run together with the check that its
/// auxiliary bump is the bump already placed by the previous phase.
struct Phase {
    res: MechanismResult,
    mags: [Real; 3],
}

fn run_phase(
    variant: Variant,
    omega: &Frequency3,
    z: &State,
    aux: &BumpSpec,
    drive_amp: &Amplitude,
    centers: Option<(Rational, Rational)>,
    s: &StepSettings,
    input: bool,
) -> StepResult<Phase> {
    let x = polar_axis_magnitudes(z)?;
    let r = variant.roles();
    let nu_d = cube_recip(omega.q(r.driving));
    check_resolution(&x[r.driving], &nu_d, s.flow.prec, input)?;
    let opts = MechanismOptions { centers, ..s.opts() };
    let res = run_mechanism_with(variant, omega, z, &aux.amplitude, drive_amp, &s.flow, &opts)?;
    if res.program.bumps[0] != *aux {
        return Err(StepError::Fail(Error::NotCertified(format!(
            "variant {variant}: auxiliary bump {} differs from the placed bump {aux}",
            res.program.bumps[0]
        ))));
    }
    let mags = magnitudes(&res);
    Ok(Phase { res, mags })
}

/// The float initial point z′ = 𝒯^(−N)(z̄) with its checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZPrime {
    pub state: [f64; 6],
    /// sup-distance of 𝒯^N(z′) from z̄.
    pub hit_error: f64,
    /// sup-distance |z′ − z|.
    pub distance: f64,
    /// max over m ≤ N of |𝒯^m(z′)_i|.
    pub max_modulus: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub variant: Variant,
    pub engine: Engine,
    #[serde(with = "ser::integer")]
    pub halving_count: Integer,
    #[serde(rename = "N", with = "ser::integer")]
    pub n: Integer,
    pub event_count: Real,
    /// Non-interference of every bump of the current program along the phase.
    pub full_program_noninterference: bool,
}

/// Everything a three-phase step produces.
#[derive(Clone, Debug, PartialEq)]
pub struct InductiveStep {
    pub omega_hat: Frequency3,
    pub omega_tilde: Frequency3,
    pub omega_bar: Frequency3,
    pub x: [Real; 3],
    pub x_hat: [Real; 3],
    pub x_tilde: [Real; 3],
    pub x_bar: [Real; 3],
    pub z_bar: State,
    pub n: Integer,
    pub phases: [PhaseRecord; 3],
    /// B_b, B_c, B_d.
    pub new_bumps: [BumpSpec; 3],
    /// The old bumps followed by the new ones, with ω̄.
    pub program: MapProgram,
    pub z_prime: Option<ZPrime>,
    pub retries: u32,
    /// Exact postconditions, all true on success.
    pub postconditions: Vec<(String, bool)>,
}

fn bands(a: &[Real; 3], b: &[Real; 3], prec: u32) -> [Interval; 3] {
    [0, 1, 2].map(|i| a[i].interval(prec).hull(&b[i].interval(prec)))
}

/// Non-interference of a whole program along one phase, with the phase's
/// two bumps (the last two) designated.
fn full_noninterference(omega: &Frequency3, bumps: &[BumpSpec], start: &[Real; 3], end: &[Real; 3], prec: u32) -> bool {
    let program = MapProgram { omega: omega.clone(), bumps: bumps.to_vec() };
    let k = bumps.len();
    let designated: Vec<bool> = (0..k).map(|i| i + 2 >= k).collect();
    certify_noninterference(&program, &bands(start, end, prec), &designated, prec).certified
}

fn certainly_le_rational(x: &Real, r: &Rational) -> bool {
    x.hi_rational() <= *r
}

fn phase_record(p: &Phase, full_ok: bool) -> PhaseRecord {
    PhaseRecord {
        variant: p.res.variant,
        engine: p.res.engine,
        halving_count: p.res.halving_count.clone(),
        n: p.res.n.clone(),
        event_count: p.res.event_count.clone(),
        full_program_noninterference: full_ok,
    }
}

/// Stored data that pins a step down for replay.
struct ReplayPins<'a> {
    omega_bar: &'a Frequency3,
    new_bumps: &'a [BumpSpec],
}

fn step_attempt(
    program: &MapProgram,
    z: &State,
    eta: &Rational,
    s: &StepSettings,
    retry: u32,
    pins: Option<&ReplayPins>,
) -> StepResult<InductiveStep> {
    let omega = &program.omega;
    let x = polar_axis_magnitudes(z)?;
    if !omega.check_chain(Chain::Q3_Q1_Q2) {
        return Err(Error::HypothesisViolation(format!("{omega} does not satisfy q3|q1|q2")).into());
    }
    if !x.iter().all(|v| v.certainly_positive()) {
        return Err(Error::HypothesisViolation("magnitudes must be positive".into()).into());
    }
    if x[1].lo_rational() < Rational::from((1, omega.q(1).clone())) {
        return Err(Error::HypothesisViolation("x2 >= 1/q2 fails".into()).into());
    }
    let b_a = program
        .bumps
        .last()
        .filter(|b| b.i == 2 && b.j == 1)
        .ok_or_else(|| Error::HypothesisViolation("the program must end with a bump Phi_{2,1}".into()))?
        .clone();
    let prec = s.flow.prec;
    let cap = s.cap_bits;
    let amp = |k: &Integer| s.mode.amplitude(&s.params, k);
    let pinned = |i: usize| pins.map(|p| p.new_bumps[i].clone());

    // Phase 1: variant II under ω̂ = (ω₁, ω₂, p̂₃/q̂₃).
    let (omega_hat, k_b) = match pins {
        Some(p) => {
            let w = omega.with(2, p.omega_bar.get(2).clone())?;
            (w, Integer::new())
        }
        None => {
            let w3 = rule_phase1(omega.q(1), omega.get(2), &x[2], eta).choose(retry, cap)?.1;
            let w = omega.with(2, w3)?;
            let k2 = rule_phase2(w.q(2), omega.get(0), &half_lo(&x[0]), eta).choose(retry, cap)?.0;
            (w, k2)
        }
    };
    let mut k_pred = k_b;
    let mut rounds = 0;
    let ph1 = loop {
        let (drive_amp, centers) = match pinned(0) {
            Some(b) => (b.amplitude.clone(), Some((b_a.center_x.clone(), b.center_x.clone()))),
            None => (amp(&k_pred), None),
        };
        let ph = run_phase(Variant::II, &omega_hat, z, &b_a, &drive_amp, centers, s, true)?;
        rounds += 1;
        if pins.is_some() || !s.mode.is_toy() || rounds >= PREDICTION_ROUNDS {
            break ph;
        }
        let k2 = rule_phase2(omega_hat.q(2), omega.get(0), &ph.mags[0], eta).choose(retry, cap)?.0;
        if k2 <= k_pred {
            break ph;
        }
        k_pred = k2;
    };
    let b_b = ph1.res.program.bumps[1].clone();

    // Phase 2: variant III under ω̃ = (p̃₁/q̃₁, ω₂, ω̂₃) from ẑ.
    let omega_tilde = match pins {
        Some(p) => omega_hat.with(0, p.omega_bar.get(0).clone())?,
        None => {
            let (_, w1) = rule_phase2(omega_hat.q(2), omega.get(0), &ph1.mags[0], eta).choose(retry, cap)?;
            omega_hat.with(0, w1)?
        }
    };
    let z_hat = ph1.res.final_state.clone();
    let mut k_pred = match pins {
        Some(_) => Integer::new(),
        None => rule_phase3(omega_tilde.q(0), omega.get(1), &x[1], &half_lo(&ph1.mags[1]), eta).choose(retry, cap)?.0,
    };
    let mut rounds = 0;
    let ph2 = loop {
        let (drive_amp, centers) = match pinned(1) {
            Some(b) => (b.amplitude.clone(), Some((b_b.center_x.clone(), b.center_x.clone()))),
            None => (amp(&k_pred), None),
        };
        let ph = run_phase(Variant::III, &omega_tilde, &z_hat, &b_b, &drive_amp, centers, s, false)?;
        rounds += 1;
        if pins.is_some() || !s.mode.is_toy() || rounds >= PREDICTION_ROUNDS {
            break ph;
        }
        let k3 = rule_phase3(omega_tilde.q(0), omega.get(1), &x[1], &ph.mags[1], eta).choose(retry, cap)?.0;
        if k3 <= k_pred {
            break ph;
        }
        k_pred = k3;
    };
    let b_c = ph2.res.program.bumps[1].clone();

    // Phase 3: variant I under ω̄ = (ω̃₁, p̄₂/q̄₂, ω̂₃) from z̃.
    let omega_bar = match pins {
        Some(p) => omega_tilde.with(1, p.omega_bar.get(1).clone())?,
        None => {
            let (_, w2) = rule_phase3(omega_tilde.q(0), omega.get(1), &x[1], &ph2.mags[1], eta).choose(retry, cap)?;
            omega_tilde.with(1, w2)?
        }
    };
    let z_tilde = ph2.res.final_state.clone();
    let eta_next = s.schedule.next(s.stage, eta, omega_bar.q(1));
    let mut k_pred = match pins {
        Some(_) => Integer::new(),
        None => rule_phase1(omega_bar.q(1), omega_bar.get(2), &half_lo(&ph2.mags[2]), &eta_next).choose(0, cap)?.0,
    };
    let mut rounds = 0;
    let ph3 = loop {
        let (drive_amp, centers) = match pinned(2) {
            Some(b) => (b.amplitude.clone(), Some((b_c.center_x.clone(), b.center_x.clone()))),
            None => (amp(&k_pred), None),
        };
        let ph = run_phase(Variant::I, &omega_bar, &z_tilde, &b_c, &drive_amp, centers, s, false)?;
        rounds += 1;
        if pins.is_some() || !s.mode.is_toy() || rounds >= PREDICTION_ROUNDS {
            break ph;
        }
        let k4 = rule_phase1(omega_bar.q(1), omega_bar.get(2), &ph.mags[2], &eta_next).choose(0, cap)?.0;
        if k4 <= k_pred {
            break ph;
        }
        k_pred = k4;
    };
    let b_d = ph3.res.program.bumps[1].clone();

    // Full-program non-interference along each phase.
    let old = &program.bumps;
    let mut bumps = old.clone();
    bumps.push(b_b.clone());
    let ni1 = full_noninterference(&omega_hat, &bumps, &x, &ph1.mags, prec);
    bumps.push(b_c.clone());
    let ni2 = full_noninterference(&omega_tilde, &bumps, &ph1.mags, &ph2.mags, prec);
    bumps.push(b_d.clone());
    let ni3 = full_noninterference(&omega_bar, &bumps, &ph2.mags, &ph3.mags, prec);
    if !(ni1 && ni2 && ni3) {
        let which = [ni1, ni2, ni3].iter().position(|b| !b).unwrap() + 1;
        return Err(Error::Interference { bump: old.len() + which - 1, time: format!("phase {which}") }.into());
    }
    let new_program = MapProgram { omega: omega_bar.clone(), bumps };

    let (x_hat, x_tilde, x_bar) = (ph1.mags.clone(), ph2.mags.clone(), ph3.mags.clone());
    let q = |i: usize| omega_bar.q(i).clone();
    let half = |i: usize| Rational::from(&x[i].lo_rational() / 2u32);
    let gap = x_hat[0].sub(&x_bar[0], prec);
    let (adm1, adm3) = (
        cube_recip(&q(0)) <= Rational::from(&x_hat[0].lo_rational() / 10u32),
        cube_recip(&q(2)) <= Rational::from(&x[2].lo_rational() / 10u32),
    );
    let density = certify_density(&omega_bar, eta, true)?;
    let post = vec![
        ("chain".to_string(), omega_bar.check_chain(Chain::Q3_Q1_Q2)),
        ("omega_close".into(), omega_bar.dist(omega) <= *eta),
        ("positivity".into(), x_bar.iter().all(|v| v.certainly_positive())),
        ("halving".into(), (0..3).all(|i| certainly_le_rational(&x_bar[i], &half(i)))),
        ("x2_lower".into(), x_bar[1].lo_rational() >= Rational::from((1, q(1)))),
        ("x1_gap".into(), gap.lo_rational() > cube_recip(&q(0))),
        ("density".into(), density.certified()),
        ("admissibility_margins".into(), adm1 && adm3),
        ("envelope".into(), ph1.res.envelope_ok && ph2.res.envelope_ok && ph3.res.envelope_ok),
    ];
    if let Some((name, _)) = post.iter().find(|(_, ok)| !ok) {
        return Err(Error::NotCertified(format!("postcondition {name} fails")).into());
    }

    let n = Integer::from(&ph1.res.n + &ph2.res.n) + &ph3.res.n;
    let z_bar = ph3.res.final_state.clone();
    let z_prime = if s.mode.is_toy() && n.to_u64().is_some_and(|v| v <= BRUTE_FORCE_CAP) && pins.is_none() {
        let n64 = n.to_u64().unwrap();
        let target = axis_f64(&x_bar);
        let zp = iterate_backward(&new_program, target, n64, &s.flow)?;
        let run = brute_force_run(&new_program, &zp, n64, None, &s.flow)?;
        let zp = ZPrime {
            state: zp,
            hit_error: sup_dist(&run.final_state, &target),
            distance: sup_dist(&zp, &axis_f64(&x)),
            max_modulus: run.max_modulus,
        };
        let eta_f = eta.to_f64();
        if zp.hit_error > REPLAY_TOL {
            return Err(StepError::ZPrime(format!("forward replay misses z-bar by {:e}", zp.hit_error)));
        }
        if zp.distance > eta_f {
            return Err(StepError::ZPrime(format!("|z' - z| = {} exceeds eta", zp.distance)));
        }
        for i in 0..3 {
            if zp.max_modulus[i] > (1.0 + eta_f) * x[i].to_f64() * (1.0 + 1e-12) {
                return Err(StepError::ZPrime(format!("envelope of factor {} exceeded", i + 1)));
            }
        }
        Some(zp)
    } else {
        None
    };

    Ok(InductiveStep {
        phases: [phase_record(&ph1, ni1), phase_record(&ph2, ni2), phase_record(&ph3, ni3)],
        omega_hat,
        omega_tilde,
        omega_bar,
        x,
        x_hat,
        x_tilde,
        x_bar,
        z_bar,
        n,
        new_bumps: [b_b, b_c, b_d],
        program: new_program,
        z_prime,
        retries: retry,
        postconditions: post,
    })
}

fn with_retries(
    program: &MapProgram,
    z: &State,
    eta: &Rational,
    s: &StepSettings,
    pins: Option<&ReplayPins>,
) -> StepResult<InductiveStep> {
    if pins.is_some() {
        return step_attempt(program, z, eta, s, 0, pins);
    }
    let mut last = String::new();
    let mut zprime_failed = false;
    for retry in 0..=s.max_retries {
        match step_attempt(program, z, eta, s, retry, None) {
            Ok(st) => return Ok(st),
            Err(StepError::Fail(Error::Interference { bump, time })) => {
                last = format!("bump {bump} interferes in {time}");
            }
            Err(StepError::ZPrime(m)) => {
                zprime_failed = true;
                last = m;
            }
            Err(e) => return Err(e),
        }
    }
    let msg = format!("after {} retries: {last}", s.max_retries);
    Err(StepError::Fail(if zprime_failed { Error::ShootingDiverged(msg) } else { Error::RetryExhausted(msg) }))
}

/// Runs a step, raising the working precision when the phase outputs need
/// it. Shortfalls in the input data are passed on.
fn run_step(
    program: &MapProgram,
    z: &State,
    eta: &Rational,
    settings: &StepSettings,
    pins: Option<&ReplayPins>,
) -> StepResult<InductiveStep> {
    let mut s = settings.clone();
    loop {
        match with_retries(program, z, eta, &s, pins) {
            Err(StepError::Shortfall { needed, input: false }) if needed <= MAX_WORKING_PREC => {
                s.flow.prec = needed.max(s.flow.prec * 2);
            }
            r => return r,
        }
    }
}

fn step_error(e: StepError) -> Error {
    match e {
        StepError::Shortfall { needed, .. } => Error::PrecisionBudget(format!("magnitudes need {needed} bits")),
        StepError::ZPrime(m) => Error::ShootingDiverged(m),
        StepError::Fail(e) => e,
    }
}

/// The three-phase step from an axis point z for T = B_a∘Φ∘S_ω, where B_a
/// is the program's last bump.
pub fn inductive_step(program: &MapProgram, z: &State, eta: &Rational, settings: &StepSettings) -> Result<InductiveStep> {
    run_step(program, z, eta, settings, None).map_err(step_error)
}

/// The program T⁽⁰⁾ = Φ_{2,1,x₂,q₂⁻³}∘S_ω.
pub fn initial_program(omega: &Frequency3, x2: &Rational, amplitude: Amplitude) -> Result<MapProgram> {
    let b = BumpSpec::new(2, 1, x2.clone(), cube_recip(omega.q(1)), amplitude)?;
    MapProgram::new(omega.clone(), vec![b])
}

/// Data of one step kept in a stage certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub omega_hat: Frequency3,
    pub omega_tilde: Frequency3,
    pub x_hat: [Real; 3],
    pub x_tilde: [Real; 3],
    #[serde(with = "ser::integer")]
    pub n_hat: Integer,
    #[serde(with = "ser::integer")]
    pub n_tilde: Integer,
    #[serde(with = "ser::integer")]
    pub n_bar: Integer,
    pub engines: [Engine; 3],
    pub z_prime: Option<ZPrime>,
    pub retries: u32,
}

/// Forward float replay of T⁽ⁿ⁾ from z₀⁽ⁿ⁾.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub hit_error: f64,
    /// Largest modulus of each factor over [M⁽ʲ⁾, M⁽ʲ⁺¹⁾], for j < n.
    pub segment_sup: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageCertificate {
    pub n: u32,
    pub omega: Frequency3,
    /// Initial point with T⁽ⁿ⁾^M(z₀) = z; absent when M exceeds the replay cap.
    pub z0: Option<State>,
    pub z0_status: String,
    pub z: State,
    #[serde(rename = "M", with = "ser::integer")]
    pub m: Integer,
    /// η⁽ⁿ⁾; absent at stage 0.
    #[serde(with = "serde_opt_rational", default)]
    pub eta: Option<Rational>,
    pub program: MapProgram,
    /// ln of the stage's norm increment.
    pub norm_entry_ln: Real,
    /// ln of the cumulative norm ledger.
    pub ledger_ln: Real,
    pub density_cert: Option<DensityCertificate>,
    pub admissibility_ok: bool,
    pub step: Option<StepRecord>,
    pub replay: Option<ReplayRecord>,
}

impl StageCertificate {
    pub fn x(&self) -> Result<[Real; 3]> {
        polar_axis_magnitudes(&self.z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// x_i⁽ⁿ⁾ ≤ x_i⁽⁰⁾·2⁻ⁿ.
    pub decay: bool,
    /// |ω⁽ⁿ⁺¹⁾ − ω⁽ⁿ⁾| ≤ η⁽ⁿ⁺¹⁾.
    pub cauchy_omega: bool,
    /// |z₀⁽ⁿ⁺¹⁾ − z₀⁽ⁿ⁾| ≤ η⁽ⁿ⁺¹⁾ where both points are computed.
    pub cauchy_z0: bool,
    pub cauchy_z0_checked: u32,
    /// Σ_{k>n} η⁽ᵏ⁾ ≤ η⁽ⁿ⁾/q̄₂⁽ⁿ⁾.
    pub tail: bool,
    /// Cumulative norm ledger ≤ γ.
    pub ledger: bool,
    /// Orbit envelopes of every replayed stage.
    pub envelope: bool,
    pub envelope_checked_stages: u32,
    /// η⁽ⁿ⁾-density of ω⁽ⁿ⁾ survives the tail: q̄₂⁽ⁿ⁾·Σ_{k>n} η⁽ᵏ⁾ ≤ η⁽ⁿ⁾,
    /// so the limit frequency is 2η⁽ⁿ⁾-dense.
    pub nonresonance: bool,
    pub omega_limit: Frequency3,
    /// Bound on |ω^∞ − ω⁽ᴺ⁾|.
    #[serde(with = "ser::rational")]
    pub omega_limit_error: Rational,
    /// Last computed initial point and its distance bound to z₀^∞.
    pub z0_limit: Option<State>,
    #[serde(with = "serde_opt_rational", default)]
    pub z0_limit_error: Option<Rational>,
    #[serde(with = "ser::integer")]
    pub q2_0: Integer,
    #[serde(with = "serde_opt_integer", default)]
    pub q2_0_enlarged_from: Option<Integer>,
    pub all_ok: bool,
}

mod serde_opt_integer {
    use rug::Integer;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Integer>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(n) => s.serialize_some(&n.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Integer>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse::<Integer>().map_err(de::Error::custom))
            .transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema_version: u32,
    pub config: ConstructionConfig,
    /// Working precision the construction settled on.
    pub precision_bits: u32,
    pub stages: Vec<StageCertificate>,
    pub limit_report: LimitReport,
}

fn ln_of(r: &Rational, prec: u32) -> Result<Interval> {
    Interval::point(r, prec).ln().ok_or_else(|| Error::Domain(format!("ln of non-positive {r}")))
}

fn ln_le(x: &Interval, r: &Rational, prec: u32) -> Result<bool> {
    Ok(x.hi() <= ln_of(r, prec)?.lo())
}

/// γ(1 − 2^(−n−1)), the ledger allowance after stage n.
fn ledger_allowance(gamma: &Rational, n: u32) -> Rational {
    let t = Rational::from((pow2(n + 1) - 1u32, pow2(n + 1)));
    t * gamma
}

fn stage0_entry_ln(program: &MapProgram, cfg: &ConstructionConfig, prec: u32) -> Result<Interval> {
    let ctx = NormContext::new(&cfg.params, cfg.g_norm.clone(), prec)?;
    let nu = &program.bumps[0].nu;
    check_map_threshold(nu, &cfg.params, &ctx, prec)?;
    Ok(map_norm_log_bound(nu, &cfg.params, &ctx.k, prec))
}

/// ln of the ledger increment of the three new bumps given the previous
/// total, with the composition threshold checked.
fn stage_entry_ln(new_bumps: &[BumpSpec], prev_ln: &Interval, cfg: &ConstructionConfig, prec: u32) -> Result<Interval> {
    let p = &cfg.params;
    let ctx = NormContext::new(p, cfg.g_norm.clone(), prec)?;
    let mut u = Vec::new();
    for b in new_bumps {
        check_map_threshold(&b.nu, p, &ctx, prec)?;
        u.push(hamiltonian_log_bound(&b.nu, p, &cfg.g_norm, prec));
    }
    compose_ledger_ln(Some(prev_ln), &u, 3, &p.alpha, &p.l, &p.l1, prec)
}

/// Stage 0: T⁽⁰⁾ = Φ_{2,1,x₂,q₂⁻³}∘S_ω. q₂⁽⁰⁾ is doubled until the map norm
/// meets min{ε/2, γ/2}. Returns the certificate and the original q₂ when
/// it was enlarged.
fn stage0(cfg: &ConstructionConfig, sched: &EtaSchedule) -> Result<(StageCertificate, Option<Integer>)> {
    let prec = DEFAULT_PREC;
    let mut omega = cfg.omega0.clone();
    let bound = sched.stage0_bound();
    let mut enlarged = None;
    let eta1 = sched.first();
    let x = cfg.x0.clone().map(Real::Exact);
    for _ in 0..=cfg.denominator_cap_bits {
        let amp = match &cfg.mode {
            Mode::Toy { .. } => {
                let k = rule_phase1(omega.q(1), omega.get(2), &x[2], &eta1).choose(0, cfg.denominator_cap_bits)?.0;
                cfg.mode.amplitude(&cfg.params, &k)
            }
            Mode::Faithful => cfg.mode.amplitude(&cfg.params, &Integer::from(1)),
        };
        let program = initial_program(&omega, &cfg.x0[1], amp)?;
        let entry = stage0_entry_ln(&program, cfg, prec)?;
        if ln_le(&entry, &bound, prec)? {
            let z = State::axis_rational(cfg.x0.clone());
            let cert = StageCertificate {
                n: 0,
                omega,
                z0: Some(z.clone()),
                z0_status: "exact".into(),
                z,
                m: Integer::new(),
                eta: None,
                program,
                norm_entry_ln: Real::Approx(entry.clone()),
                ledger_ln: Real::Approx(entry),
                density_cert: None,
                admissibility_ok: true,
                step: None,
                replay: Some(ReplayRecord { hit_error: 0.0, segment_sup: vec![] }),
            };
            return Ok((cert, enlarged));
        }
        let q = Integer::from(omega.q(1) * 2u32);
        if q.significant_bits() > cfg.denominator_cap_bits {
            break;
        }
        enlarged.get_or_insert_with(|| omega.q(1).clone());
        let w2 = pick_numerator(omega.get(1), &q, &Rational::from((2, q.clone())))
            .ok_or_else(|| Error::Domain("no numerator for the enlarged q2".into()))?;
        omega = omega.with(1, w2)?;
    }
    Err(Error::BudgetExceeded { margin: format!("stage-0 norm stays above {bound}") })
}

/// Forward float replay of a program from z₀ over the stage boundaries
/// `ms` (M⁽⁰⁾, …, M⁽ⁿ⁾); returns the sup-distance to `target` and the
/// per-segment maxima.
pub fn replay_segments(
    program: &MapProgram,
    z0: &[f64; 6],
    ms: &[u64],
    target: &[f64; 6],
    flow: &FlowConfig,
) -> Result<ReplayRecord> {
    let mut v = *z0;
    let mut sup = Vec::new();
    for w in ms.windows(2) {
        let run = brute_force_run(program, &v, w[1] - w[0], None, flow)?;
        let mut mm = run.max_modulus;
        for (i, m) in mm.iter_mut().enumerate() {
            *m = m.max(modulus(&v, i));
        }
        sup.push(mm);
        v = run.final_state;
    }
    Ok(ReplayRecord { hit_error: sup_dist(&v, target), segment_sup: sup })
}

fn stage_bounds(history: &[StageCertificate], m: &Integer) -> Option<Vec<u64>> {
    let mut ms: Vec<u64> = history.iter().map(|c| c.m.to_u64()).collect::<Option<_>>()?;
    ms.push(m.to_u64()?);
    Some(ms)
}

/// Envelope of segment j: every factor stays within (1+η⁽ʲ⁺¹⁾)·x_i⁽ʲ⁾.
fn envelope_holds(rec: &ReplayRecord, history: &[StageCertificate], eta_new: &Rational) -> bool {
    rec.segment_sup.iter().enumerate().all(|(j, sup)| {
        let eta = history.get(j + 1).and_then(|c| c.eta.clone()).unwrap_or_else(|| eta_new.clone());
        let Ok(x) = history[j].x() else {
            return false;
        };
        (0..3).all(|i| sup[i] <= (1.0 + eta.to_f64()) * x[i].to_f64() * (1.0 + 1e-12))
    })
}

/// Stage n+1 from the certified history through stage n.
fn iterative_step(
    history: &[StageCertificate],
    eta: &Rational,
    cfg: &ConstructionConfig,
    s: &StepSettings,
) -> StepResult<StageCertificate> {
    let prev = history.last().expect("stage 0 exists");
    let st = run_step(&prev.program, &prev.z, eta, s, None)?;
    let n = prev.n + 1;
    let m = Integer::from(&prev.m + &st.n);
    let prec = DEFAULT_PREC;

    let prev_ln = prev.ledger_ln.interval(prec);
    let entry = stage_entry_ln(&st.new_bumps, &prev_ln, cfg, prec)?;
    let ledger = log_add(&prev_ln, &entry);
    if !ln_le(&entry, eta, prec)? {
        return Err(Error::BudgetExceeded { margin: format!("stage {n} norm entry ln {entry} exceeds ln eta") }.into());
    }
    if !ln_le(&ledger, &ledger_allowance(&cfg.params.gamma, n), prec)? {
        return Err(Error::BudgetExceeded { margin: format!("ledger ln {ledger} after stage {n}") }.into());
    }

    let inner = MapProgram { omega: st.program.omega.clone(), bumps: st.program.bumps[..st.program.bumps.len() - 1].to_vec() };
    let admissible = check_admissible(&inner, &st.z_bar);
    if !admissible {
        return Err(Error::NotCertified(format!("stage {n} program is not admissible")).into());
    }
    let density = certify_density(&st.omega_bar, eta, true)?;

    let (mut z0, mut z0_status, mut replay) = (None, "not computed".to_string(), None);
    if let (Some(zp), Some(ms)) = (&st.z_prime, stage_bounds(history, &m)) {
        if ms[n as usize] <= BRUTE_FORCE_CAP {
            let zb0 = iterate_backward(&st.program, zp.state, ms[n as usize - 1], &s.flow)?;
            let target = axis_f64(&st.x_bar);
            let rec = replay_segments(&st.program, &zb0, &ms, &target, &s.flow)?;
            if rec.hit_error > REPLAY_TOL || !envelope_holds(&rec, history, eta) {
                return Err(StepError::ZPrime(format!("stage {n} replay misses by {:e}", rec.hit_error)));
            }
            z0 = Some(State::cartesian(zb0));
            z0_status = "computed".into();
            replay = Some(rec);
        }
    }

    let [p1, p2, p3] = &st.phases;
    Ok(StageCertificate {
        n,
        omega: st.omega_bar.clone(),
        z0,
        z0_status,
        z: st.z_bar.clone(),
        m,
        eta: Some(eta.clone()),
        program: st.program.clone(),
        norm_entry_ln: Real::Approx(entry),
        ledger_ln: Real::Approx(ledger),
        density_cert: Some(density),
        admissibility_ok: admissible,
        step: Some(StepRecord {
            omega_hat: st.omega_hat.clone(),
            omega_tilde: st.omega_tilde.clone(),
            x_hat: st.x_hat.clone(),
            x_tilde: st.x_tilde.clone(),
            n_hat: p1.n.clone(),
            n_tilde: p2.n.clone(),
            n_bar: p3.n.clone(),
            engines: [p1.engine, p2.engine, p3.engine],
            z_prime: st.z_prime.clone(),
            retries: st.retries,
        }),
        replay,
    })
}

fn state_dist(a: &State, b: &State) -> f64 {
    sup_dist(&a.to_f64(), &b.to_f64())
}

fn etas_and_q2s(stages: &[StageCertificate]) -> (Vec<Rational>, Vec<Integer>) {
    let etas = stages.iter().map(|c| c.eta.clone().unwrap_or_default()).collect();
    let q2s = stages.iter().map(|c| c.omega.q(1).clone()).collect();
    (etas, q2s)
}

/// The limit checks over a sequence of stages.
pub fn limit_report(stages: &[StageCertificate], cfg: &ConstructionConfig, q2_0_enlarged_from: Option<Integer>) -> Result<LimitReport> {
    let prec = DEFAULT_PREC;
    let (etas, q2s) = etas_and_q2s(stages);
    let last = stages.len() - 1;
    let mut decay = true;
    let mut cauchy_omega = true;
    let mut cauchy_z0 = true;
    let mut z0_checked = 0;
    let mut tail = true;
    let mut envelope = true;
    let mut env_checked = 0;
    let mut nonres = true;
    for (n, c) in stages.iter().enumerate() {
        let x = c.x()?;
        for i in 0..3 {
            let b = Rational::from(&cfg.x0[i] / pow2(n as u32));
            decay &= certainly_le_rational(&x[i], &b);
        }
        if n == 0 {
            continue;
        }
        let prev = &stages[n - 1];
        cauchy_omega &= c.omega.dist(&prev.omega) <= etas[n];
        if let (Some(a), Some(b)) = (&c.z0, &prev.z0) {
            cauchy_z0 &= state_dist(a, b) <= etas[n].to_f64();
            z0_checked += 1;
        }
        let t = tail_sum(&etas, &q2s, n);
        tail &= t <= Rational::from(&etas[n] / &q2s[n]);
        nonres &= c.density_cert.as_ref().is_some_and(|d| d.certified()) && Rational::from(&t * &q2s[n]) <= etas[n];
        if let Some(rec) = &c.replay {
            envelope &= rec.hit_error <= REPLAY_TOL && envelope_holds(rec, &stages[..n], &etas[n]);
            env_checked += 1;
        }
    }
    let ledger = ln_le(&stages[last].ledger_ln.interval(prec), &cfg.params.gamma, prec)?;
    let omega_limit_error = if last == 0 { Rational::new() } else { tail_sum(&etas, &q2s, last) };
    let z0_at = stages.iter().rposition(|c| c.z0.is_some());
    let z0_limit = z0_at.map(|k| stages[k].z0.clone().unwrap());
    let z0_limit_error = z0_at.map(|k| tail_sum(&etas, &q2s, k));
    let all_ok = decay && cauchy_omega && cauchy_z0 && tail && ledger && envelope && nonres;
    Ok(LimitReport {
        decay,
        cauchy_omega,
        cauchy_z0,
        cauchy_z0_checked: z0_checked,
        tail,
        ledger,
        envelope,
        envelope_checked_stages: env_checked,
        nonresonance: nonres,
        omega_limit: stages[last].omega.clone(),
        omega_limit_error,
        z0_limit,
        z0_limit_error,
        q2_0: stages[0].omega.q(1).clone(),
        q2_0_enlarged_from,
        all_ok,
    })
}

fn build(cfg: &ConstructionConfig, prec: u32) -> StepResult<CertificateFile> {
    let mut c = cfg.clone();
    c.prec = prec;
    let sched = EtaSchedule::new(&c.params, c.eta0.clone(), DEFAULT_PREC)?;
    let (s0, enlarged) = stage0(&c, &sched)?;
    let mut stages = vec![s0];
    let mut eta = sched.first();
    for n in 1..=c.stages {
        let s = StepSettings::from_config(&c, n)?;
        let cert = iterative_step(&stages, &eta, &c, &s)?;
        let next = sched.next(n, &eta, cert.omega.q(1));
        stages.push(cert);
        eta = next;
    }
    let limit_report = limit_report(&stages, cfg, enlarged)?;
    Ok(CertificateFile { schema_version: SCHEMA_VERSION, config: cfg.clone(), precision_bits: prec, stages, limit_report })
}

/// Builds stages 0..=cfg.stages. The working precision is raised and the
/// construction restarted whenever stored magnitudes are too coarse for
/// the next plateau.
pub fn run_construction(cfg: &ConstructionConfig) -> Result<CertificateFile> {
    cfg.validate()?;
    let mut prec = cfg.prec;
    loop {
        match build(cfg, prec) {
            Err(StepError::Shortfall { needed, input: true }) if needed <= MAX_WORKING_PREC => {
                prec = needed.max(prec * 2).min(MAX_WORKING_PREC);
            }
            r => return r.map_err(step_error),
        }
    }
}

pub fn write_certificates(file: &CertificateFile) -> Result<String> {
    serde_json::to_string_pretty(file).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_certificates(text: &str) -> Result<CertificateFile> {
    if text.trim().is_empty() {
        return Err(Error::Parse("empty certificate file".into()));
    }
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// One verifier check, named by the invariant it tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyCheck {
    pub stage: Option<u32>,
    pub invariant: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub checks: Vec<VerifyCheck>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &VerifyCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

#[derive(Default)]
struct Checks(Vec<VerifyCheck>);

impl Checks {
    fn add(&mut self, stage: Option<u32>, invariant: &str, ok: bool, detail: impl Into<String>) {
        self.0.push(VerifyCheck { stage, invariant: invariant.into(), ok, detail: if ok { String::new() } else { detail.into() } });
    }
}

fn overlaps(a: &Real, b: &Real, prec: u32) -> bool {
    match (a, b) {
        (Real::Exact(x), Real::Exact(y)) => x == y,
        _ => {
            let (i, j) = (a.interval(prec), b.interval(prec));
            i.lo() <= j.hi() && j.lo() <= i.hi()
        }
    }
}

fn overlaps3(a: &[Real; 3], b: &[Real; 3], prec: u32) -> bool {
    (0..3).all(|i| overlaps(&a[i], &b[i], prec))
}

/// Re-derives every stage from its predecessor and the stored amplitudes
/// and bump centers, and re-checks all stored claims. `replay` enables the
/// float replays of the stored initial points.
pub fn verify_certificates(file: &CertificateFile, replay: bool) -> VerifyReport {
    let mut ch = Checks::default();
    let cfg = &file.config;
    ch.add(None, "schema", file.schema_version == SCHEMA_VERSION, format!("schema_version {}", file.schema_version));
    if file.stages.is_empty() {
        ch.add(None, "schema", false, "no stages");
        return VerifyReport { ok: false, checks: ch.0 };
    }
    let sched = match EtaSchedule::new(&cfg.params, cfg.eta0.clone(), DEFAULT_PREC) {
        Ok(s) => s,
        Err(e) => {
            ch.add(None, "schema", false, format!("config: {e}"));
            return VerifyReport { ok: false, checks: ch.0 };
        }
    };
    let prec = DEFAULT_PREC;
    for (k, c) in file.stages.iter().enumerate() {
        ch.add(Some(c.n), "stage_index", c.n as usize == k, format!("stage at position {k} has n = {}", c.n));
    }
    verify_stage0(&mut ch, file, &sched);
    for k in 1..file.stages.len() {
        verify_stage(&mut ch, file, &sched, k, replay, prec);
    }
    let report = file
        .stages
        .iter()
        .map(|c| c.n)
        .eq(0..file.stages.len() as u32)
        .then(|| limit_report(&file.stages, cfg, file.limit_report.q2_0_enlarged_from.clone()));
    match report {
        Some(Ok(r)) => {
            let ok = r.all_ok && r == file.limit_report;
            ch.add(None, "limit_report", ok, "stored limit report differs from the recomputed one or fails");
        }
        Some(Err(e)) => ch.add(None, "limit_report", false, e.to_string()),
        None => {}
    }
    let ok = ch.0.iter().all(|c| c.ok);
    VerifyReport { ok, checks: ch.0 }
}

fn verify_stage0(ch: &mut Checks, file: &CertificateFile, sched: &EtaSchedule) {
    let cfg = &file.config;
    let c = &file.stages[0];
    let st = Some(0);
    let w0 = &cfg.omega0;
    let same_rest = c.omega.get(0) == w0.get(0) && c.omega.get(2) == w0.get(2);
    let q2_ok = match &file.limit_report.q2_0_enlarged_from {
        None => c.omega == *w0,
        Some(q) => q == w0.q(1) && c.omega.q(1) > w0.q(1) && c.omega.dist(w0) <= Rational::from((2, q.clone())),
    };
    let one = c.program.bumps.len() == 1;
    let b = &c.program.bumps[0];
    let bump_ok = one
        && b.i == 2
        && b.j == 1
        && b.center_x == cfg.x0[1]
        && b.nu == cube_recip(c.omega.q(1))
        && c.program.omega == c.omega;
    let ok = same_rest
        && q2_ok
        && bump_ok
        && c.z == State::axis_rational(cfg.x0.clone())
        && c.m == 0
        && c.eta.is_none()
        && c.omega.check_chain(Chain::Q3_Q1_Q2)
        && c.z0.as_ref() == Some(&c.z);
    ch.add(st, "stage0", ok, "stage 0 does not match the configuration");
    let entry = stage0_entry_ln(&c.program, cfg, DEFAULT_PREC);
    let ok = match entry {
        Ok(e) => {
            let r = Real::Approx(e.clone());
            overlaps(&r, &c.norm_entry_ln, DEFAULT_PREC)
                && overlaps(&r, &c.ledger_ln, DEFAULT_PREC)
                && ln_le(&c.norm_entry_ln.interval(DEFAULT_PREC), &sched.stage0_bound(), DEFAULT_PREC).unwrap_or(false)
        }
        Err(_) => false,
    };
    ch.add(st, "stage0_norm", ok, "stage-0 norm entry is wrong or above min(eps/2, gamma/2)");
}

fn verify_stage(ch: &mut Checks, file: &CertificateFile, sched: &EtaSchedule, k: usize, replay: bool, prec: u32) {
    let cfg = &file.config;
    let (prev, c) = (&file.stages[k - 1], &file.stages[k]);
    let n = c.n;
    let st = Some(n);
    let (Ok(x), Ok(xp)) = (c.x(), prev.x()) else {
        ch.add(st, "positivity", false, "z is not an axis point");
        return;
    };
    let w = &c.omega;
    ch.add(st, "chain", w.check_chain(Chain::Q3_Q1_Q2) && c.program.omega == *w, "q3|q1|q2 fails or the program rotation differs");
    ch.add(st, "positivity", x.iter().all(|v| v.certainly_positive()), "a magnitude is not positive");
    ch.add(st, "x2_lower", x[1].lo_rational() >= Rational::from((1, w.q(1).clone())), "x2 < 1/q2");
    let halving = (0..3).all(|i| certainly_le_rational(&x[i], &Rational::from(&xp[i].lo_rational() / 2u32)));
    ch.add(st, "halving", halving, "x_i > x_i(prev)/2");
    let decay = (0..3).all(|i| certainly_le_rational(&x[i], &Rational::from(&cfg.x0[i] / pow2(n))));
    ch.add(st, "geometric_decay", decay, "x_i > x_i(0)/2^n");

    let want_eta = if k == 1 { sched.first() } else { sched.next(n - 1, prev.eta.as_ref().unwrap_or(&Rational::new()), prev.omega.q(1)) };
    let Some(eta) = c.eta.clone() else {
        ch.add(st, "eta_schedule", false, "eta missing");
        return;
    };
    ch.add(st, "eta_schedule", eta == want_eta, format!("eta {eta}, schedule gives {want_eta}"));
    if k + 1 == file.stages.len() || file.stages[k + 1..].iter().all(|s| s.eta.is_some()) {
        let (etas, q2s) = etas_and_q2s(&file.stages);
        let t = tail_sum(&etas, &q2s, k);
        ch.add(st, "tail", t <= Rational::from(&eta / w.q(1)), format!("tail {t} above eta/q2"));
    }
    ch.add(st, "omega_cauchy", w.dist(&prev.omega) <= eta, "|omega - omega(prev)| > eta");

    let Some(rec) = &c.step else {
        ch.add(st, "step_count", false, "step record missing");
        return;
    };
    ch.add(st, "m_monotone", c.m > prev.m, "M does not increase");
    let total = Integer::from(&rec.n_hat + &rec.n_tilde) + &rec.n_bar;
    ch.add(st, "step_count", c.m == Integer::from(&prev.m + &total), format!("M {} != M(prev) + N", c.m));

    let kb = prev.program.bumps.len();
    let ext = c.program.bumps.len() == kb + 3
        && c.program.bumps[..kb] == prev.program.bumps[..]
        && c.program.bumps[kb + 2].i == 2
        && c.program.bumps[kb + 2].j == 1;
    ch.add(st, "program_extension", ext, "program is not the previous one plus three bumps ending in Phi_{2,1}");
    if !ext {
        return;
    }

    // Exact replay of the three phases from the stored predecessor.
    let mut s = match StepSettings::from_config(cfg, n) {
        Ok(s) => s,
        Err(e) => {
            ch.add(st, "replay", false, e.to_string());
            return;
        }
    };
    s.flow.prec = file.precision_bits;
    let pins = ReplayPins { omega_bar: w, new_bumps: &c.program.bumps[kb..] };
    match run_step(&prev.program, &prev.z, &eta, &s, Some(&pins)) {
        Ok(r) => {
            let mut bad = Vec::new();
            if r.omega_hat != rec.omega_hat || r.omega_tilde != rec.omega_tilde || r.omega_bar != *w {
                bad.push("frequencies");
            }
            let ns = [&rec.n_hat, &rec.n_tilde, &rec.n_bar];
            if (0..3).any(|i| r.phases[i].n != *ns[i]) {
                bad.push("phase step counts");
            }
            if r.program != c.program {
                bad.push("program");
            }
            if !overlaps3(&r.x_hat, &rec.x_hat, prec) || !overlaps3(&r.x_tilde, &rec.x_tilde, prec) {
                bad.push("intermediate magnitudes");
            }
            if !overlaps3(&r.x_bar, &x, prec) {
                bad.push("z");
            }
            ch.add(st, "replay", bad.is_empty(), format!("replay disagrees on {}", bad.join(", ")));
            let gap = r.x_hat[0].sub(&r.x_bar[0], prec).lo_rational() > cube_recip(w.q(0));
            ch.add(st, "x1_gap", gap, "x1_hat - x1_bar <= q1^-3");
            let ni = r.phases.iter().all(|p| p.full_program_noninterference);
            ch.add(st, "noninterference", ni, "a phase touches a bump outside its events");
            let margins = cube_recip(w.q(0)) <= Rational::from(&r.x_hat[0].lo_rational() / 10u32)
                && cube_recip(w.q(2)) <= Rational::from(&xp[2].lo_rational() / 10u32);
            ch.add(st, "admissibility_margins", margins, "q1^-3 > x1_hat/10 or q3^-3 > x3/10");
        }
        Err(e) => ch.add(st, "replay", false, step_error(e).to_string()),
    }

    let density = certify_density(w, &eta, true);
    let ok = match (&density, &c.density_cert) {
        (Ok(d), Some(stored)) => d == stored && d.certified(),
        _ => false,
    };
    ch.add(st, "density", ok, "density certificate differs from the recomputed one or fails");

    let inner = MapProgram { omega: w.clone(), bumps: c.program.bumps[..c.program.bumps.len() - 1].to_vec() };
    let adm = check_admissible(&inner, &c.z);
    ch.add(st, "admissibility", adm && c.admissibility_ok, "program without its last bump is not z-admissible");

    let prev_ln = prev.ledger_ln.interval(prec);
    let ok = match stage_entry_ln(&c.program.bumps[kb..], &prev_ln, cfg, prec) {
        Ok(entry) => {
            let ledger = log_add(&prev_ln, &entry);
            overlaps(&Real::Approx(entry.clone()), &c.norm_entry_ln, prec)
                && overlaps(&Real::Approx(ledger.clone()), &c.ledger_ln, prec)
                && ln_le(&c.norm_entry_ln.interval(prec), &eta, prec).unwrap_or(false)
                && ln_le(&c.ledger_ln.interval(prec), &ledger_allowance(&cfg.params.gamma, n), prec).unwrap_or(false)
        }
        Err(_) => false,
    };
    ch.add(st, "norm_ledger", ok, "norm entry or ledger differs from the recomputed bound or exceeds its allowance");

    if let (Some(a), Some(b)) = (&c.z0, &prev.z0) {
        ch.add(st, "z0_cauchy", state_dist(a, b) <= eta.to_f64(), "|z0 - z0(prev)| > eta");
    }
    if let Some(z0) = &c.z0 {
        let ms = stage_bounds(&file.stages[..k], &c.m);
        match ms {
            Some(ms) if replay && ms[k] <= BRUTE_FORCE_CAP => {
                let ok = match replay_segments(&c.program, &z0.to_f64(), &ms, &axis_f64(&x), &s.flow) {
                    Ok(r) => r.hit_error <= REPLAY_TOL && envelope_holds(&r, &file.stages[..k], &eta),
                    Err(_) => false,
                };
                ch.add(st, "z0_replay", ok, "replay from z0 misses z or leaves the envelope");
            }
            Some(_) if replay => ch.add(st, "z0_replay", false, "z0 stored although M exceeds the replay cap"),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    fn int(n: i64) -> Integer {
        Integer::from(n)
    }

    #[test]
    fn unit_below_examples() {
        assert_eq!(unit_below(&q(1, 4)), q(1, 4));
        assert_eq!(unit_below(&q(3, 10)), q(1, 4));
        assert_eq!(unit_below(&q(7, 2)), q(1, 1));
        assert_eq!(unit_below(&q(1, 1_000_001)), q(1, 1_000_001));
    }

    #[test]
    fn schedule_rules() {
        let params = GevreyParams::default_with(q(2, 1), q(1, 1), q(10, 1)).unwrap();
        let s = EtaSchedule::new(&params, None, DEFAULT_PREC).unwrap();
        let e1 = s.first();
        assert_eq!(*e1.numer(), 1);
        assert!(e1 <= s.cap(1));
        assert!(e1 <= q(1, 10));
        let e2 = s.next(1, &e1, &int(1024));
        assert!(Rational::from(&e2 * 2048u32) <= e1);
        assert!(e2 <= s.cap(2));
        let capped = EtaSchedule::new(&params, Some(q(1, 1000)), DEFAULT_PREC).unwrap();
        assert_eq!(capped.first(), q(1, 1000));
        assert_eq!(s.stage0_bound(), Rational::from(&s.epsilon.lo_rational() / 2u32).min(q(1, 4)));
    }

    #[test]
    fn tail_sum_adds_geometric_remainder() {
        let etas = [q(0, 1), q(1, 20), q(1, 1000)];
        let q2s = [int(32), int(64), int(300)];
        // 1/1000 + (2/3)(1/1000)/300
        assert_eq!(tail_sum(&etas, &q2s, 1), q(1, 1000) + q(2, 900_000));
        assert_eq!(tail_sum(&etas, &q2s, 2), q(2, 900_000));
    }

    #[test]
    fn pick_numerator_examples() {
        assert_eq!(pick_numerator(&q(1, 4), &int(8), &q(1, 10)), None);
        assert_eq!(pick_numerator(&q(1, 4), &int(16), &q(1, 10)), Some(q(3, 16)));
        let v = pick_numerator(&q(1, 3), &int(1000), &q(1, 100)).unwrap();
        assert_eq!(*v.denom(), 1000);
        assert!(Rational::from(&v - q(1, 3)).abs() < q(1, 100));
        assert_eq!(pick_numerator(&q(1, 2), &int(4), &q(1, 100)), None);
    }

    #[test]
    fn admissibility_box() {
        let b = |c: Rational, nu: Rational| BumpSpec::new(2, 1, c, nu, Amplitude::ln2()).unwrap();
        let w = Frequency3::from_pairs([(1, 4), (1, 8), (1, 2)]).unwrap();
        let z = State::axis_rational([q(2, 5), q(2, 5), q(2, 5)]);
        assert!(check_admissible(&MapProgram::rotation(w.clone()), &z));
        // 1 − 1/64 > 1.1·0.4
        assert!(check_admissible(&MapProgram::new(w.clone(), vec![b(q(1, 1), q(1, 64))]).unwrap(), &z));
        // support reaches into the box
        assert!(!check_admissible(&MapProgram::new(w.clone(), vec![b(q(1, 2), q(1, 16))]).unwrap(), &z));
        // boundary: center − ν = 1.1·x exactly is not admissible
        assert!(!check_admissible(&MapProgram::new(w, vec![b(q(1, 2), q(6, 100))]).unwrap(), &z));
    }

    #[test]
    fn denominator_rule_picks_smallest_multiple() {
        let base = int(8);
        let eta = q(1, 10);
        let old = q(1, 3);
        let rule = DenominatorRule {
            base: &base,
            ratio_eta: Some(&eta),
            abs_eta: None,
            at_least: vec![q(100, 1)],
            above: vec![],
            margin: None,
            old: &old,
            eta: &eta,
        };
        // 8/q < 1/10 needs k ≥ 11; q ≥ 100 needs k ≥ 13
        let (k, v) = rule.choose(0, 64).unwrap();
        assert_eq!(k, 13);
        assert_eq!(*v.denom(), 104);
        let (k, _) = rule.choose(2, 64).unwrap();
        assert_eq!(k, 52);
        assert!(matches!(rule.choose(0, 6), Err(Error::RetryExhausted(_))));
        let strict = DenominatorRule { margin: Some(q(1, 1_000_000)), ..rule };
        let (k, _) = strict.choose(0, 64).unwrap();
        // (8k)⁻³ ≤ 10⁻⁷ needs 8k ≥ 216
        assert_eq!(k, 27);
    }

    #[test]
    fn step_hypotheses_are_checked() {
        let cfg = ConstructionConfig::default_toy().unwrap();
        let s = StepSettings::from_config(&cfg, 1).unwrap();
        let w = cfg.omega0.clone();
        let p = initial_program(&w, &q(1, 32), Amplitude::Rate(q(1, 2))).unwrap();
        // x₂ < 1/q₂
        let z = State::axis_rational([q(1, 32), q(1, 64), q(1, 32)]);
        let e = inductive_step(&p, &z, &q(1, 20), &s).unwrap_err();
        assert!(matches!(e, Error::HypothesisViolation(_)), "{e}");
        // the last bump must be Φ_{2,1}
        let bad = MapProgram::rotation(w);
        let z = State::axis_rational([q(1, 32), q(1, 32), q(1, 32)]);
        assert!(matches!(inductive_step(&bad, &z, &q(1, 20), &s), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = ConstructionConfig::default_toy().unwrap();
        assert!(c.validate().is_ok());
        c.prec = 32;
        assert!(matches!(c.validate(), Err(Error::Domain(_))));
        let mut c = ConstructionConfig::default_toy().unwrap();
        c.x0[0] = q(3, 4);
        assert!(matches!(c.validate(), Err(Error::HypothesisViolation(_))));
        let mut c = ConstructionConfig::default_toy().unwrap();
        c.mode = Mode::Toy { delta: q(1, 1) };
        assert!(matches!(c.validate(), Err(Error::Domain(_))));
        let c = ConstructionConfig::default_toy().unwrap();
        let j = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ConstructionConfig>(&j).unwrap(), c);
    }
}
