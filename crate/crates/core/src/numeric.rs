//! Extended-precision enclosures and exact rational helpers.
//!
//! `Interval` is a closed interval of MPFR floats whose endpoints are
//! produced with outward (directed) rounding, so every operation returns a
//! set guaranteed to contain the exact result. `Real` is either an exact
//! rational or such an enclosure.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::float::{Constant, Round};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 192;

macro_rules! down {
    ($p:expr, $v:expr) => {
        Float::with_val_round($p, $v, Round::Down).0
    };
}
macro_rules! up {
    ($p:expr, $v:expr) => {
        Float::with_val_round($p, $v, Round::Up).0
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    lo: Float,
    hi: Float,
}

impl Interval {
    pub fn new(lo: Float, hi: Float) -> Self {
        assert!(!lo.is_nan() && !hi.is_nan(), "NaN interval endpoint");
        assert!(lo <= hi, "inverted interval");
        Interval { lo, hi }
    }

    pub fn point(r: &Rational, prec: u32) -> Self {
        Interval { lo: down!(prec, r), hi: up!(prec, r) }
    }

    pub fn from_int(n: i64, prec: u32) -> Self {
        Self::point(&Rational::from(n), prec)
    }

    pub fn from_float(f: Float) -> Self {
        Interval { lo: f.clone(), hi: f }
    }

    pub fn from_bounds(lo: &Rational, hi: &Rational, prec: u32) -> Self {
        Interval::new(down!(prec, lo), up!(prec, hi))
    }

    pub fn ln2(prec: u32) -> Self {
        Interval { lo: down!(prec, Constant::Log2), hi: up!(prec, Constant::Log2) }
    }

    pub fn pi(prec: u32) -> Self {
        Interval { lo: down!(prec, Constant::Pi), hi: up!(prec, Constant::Pi) }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn add(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: down!(p, &self.lo + &o.lo), hi: up!(p, &self.hi + &o.hi) }
    }

    pub fn sub(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        Interval { lo: down!(p, &self.lo - &o.hi), hi: up!(p, &self.hi - &o.lo) }
    }

    pub fn neg(&self) -> Interval {
        Interval { lo: -self.hi.clone(), hi: -self.lo.clone() }
    }

    pub fn mul(&self, o: &Interval) -> Interval {
        let p = self.prec().max(o.prec());
        let pairs = [(&self.lo, &o.lo), (&self.lo, &o.hi), (&self.hi, &o.lo), (&self.hi, &o.hi)];
        let mut lo: Option<Float> = None;
        let mut hi: Option<Float> = None;
        for (a, b) in pairs {
            let l = down!(p, a * b);
            let h = up!(p, a * b);
            lo = Some(match lo {
                Some(x) if x <= l => x,
                _ => l,
            });
            hi = Some(match hi {
                Some(x) if x >= h => x,
                _ => h,
            });
        }
        Interval::new(lo.unwrap(), hi.unwrap())
    }

    pub fn mul_rational(&self, r: &Rational) -> Interval {
        self.mul(&Interval::point(r, self.prec()))
    }

    /// Division; `None` if the divisor contains zero.
    pub fn div(&self, o: &Interval) -> Option<Interval> {
        if o.contains_zero() {
            return None;
        }
        let p = self.prec().max(o.prec());
        let inv = Interval { lo: down!(p, 1 / &o.hi), hi: up!(p, 1 / &o.lo) };
        Some(self.mul(&inv))
    }

    pub fn exp(&self) -> Interval {
        let p = self.prec();
        Interval { lo: down!(p, self.lo.exp_ref()), hi: up!(p, self.hi.exp_ref()) }
    }

    /// Natural logarithm; `None` unless the interval is strictly positive.
    pub fn ln(&self) -> Option<Interval> {
        if !self.is_positive() {
            return None;
        }
        let p = self.prec();
        Some(Interval { lo: down!(p, self.lo.ln_ref()), hi: up!(p, self.hi.ln_ref()) })
    }

    pub fn sqrt(&self) -> Option<Interval> {
        if self.lo < 0 {
            return None;
        }
        let p = self.prec();
        Some(Interval { lo: down!(p, self.lo.sqrt_ref()), hi: up!(p, self.hi.sqrt_ref()) })
    }

    /// x^k for positive x and rational k.
    pub fn powr(&self, k: &Rational) -> Option<Interval> {
        Some(self.ln()?.mul_rational(k).exp())
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0 {
            self.clone()
        } else if self.hi <= 0 {
            self.neg()
        } else {
            let m = if -self.lo.clone() > self.hi { -self.lo.clone() } else { self.hi.clone() };
            Interval { lo: Float::with_val(self.prec(), 0), hi: m }
        }
    }

    pub fn min(&self, o: &Interval) -> Interval {
        let lo = if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() };
        let hi = if self.hi <= o.hi { self.hi.clone() } else { o.hi.clone() };
        Interval::new(lo, hi)
    }

    pub fn max(&self, o: &Interval) -> Interval {
        let lo = if self.lo >= o.lo { self.lo.clone() } else { o.lo.clone() };
        let hi = if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() };
        Interval::new(lo, hi)
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        let lo = if self.lo <= o.lo { self.lo.clone() } else { o.lo.clone() };
        let hi = if self.hi >= o.hi { self.hi.clone() } else { o.hi.clone() };
        Interval::new(lo, hi)
    }

    /// Clamp into [a, b]; used for quantities known a priori to lie there.
    pub fn clamp(&self, a: i32, b: i32) -> Interval {
        let p = self.prec();
        let fa = Float::with_val(p, a);
        let fb = Float::with_val(p, b);
        let lo = if self.lo < fa { fa.clone() } else if self.lo > fb { fb.clone() } else { self.lo.clone() };
        let hi = if self.hi > fb { fb } else if self.hi < fa { fa } else { self.hi.clone() };
        Interval::new(lo, hi)
    }

    /// Outward rounding to a lower precision.
    pub fn coarsen(&self, prec: u32) -> Interval {
        if prec >= self.prec() {
            return self.clone();
        }
        Interval::new(
            Float::with_val_round(prec, &self.lo, Round::Down).0,
            Float::with_val_round(prec, &self.hi, Round::Up).0,
        )
    }

    /// Intersection with (−∞, r] for an r known to bound the enclosed value.
    pub fn clip_hi(&self, r: &Rational) -> Interval {
        let cap = Float::with_val_round(self.prec(), r, Round::Up).0;
        if cap < self.hi {
            Interval::new(self.lo.clone().min(&cap), cap)
        } else {
            self.clone()
        }
    }

    /// floor(x) when it is the same integer for every point of the enclosure.
    pub fn certain_floor(&self) -> Option<Integer> {
        let a = Float::with_val(self.prec(), self.lo.floor_ref()).to_integer()?;
        let b = Float::with_val(self.prec(), self.hi.floor_ref()).to_integer()?;
        (a == b).then_some(a)
    }

    /// ceil(x) when it is the same integer for every point of the enclosure.
    pub fn certain_ceil(&self) -> Option<Integer> {
        let a = Float::with_val(self.prec(), self.lo.ceil_ref()).to_integer()?;
        let b = Float::with_val(self.prec(), self.hi.ceil_ref()).to_integer()?;
        (a == b).then_some(a)
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0
    }

    pub fn mid(&self) -> Float {
        let p = self.prec() + 1;
        Float::with_val(p, &self.lo + &self.hi) / 2
    }

    pub fn width(&self) -> Float {
        up!(self.prec(), &self.hi - &self.lo)
    }

    pub fn to_f64(&self) -> f64 {
        self.mid().to_f64()
    }

    pub fn lo_rational(&self) -> Rational {
        self.lo.to_rational().expect("finite endpoint")
    }

    pub fn hi_rational(&self) -> Rational {
        self.hi.to_rational().expect("finite endpoint")
    }

    pub fn contains_rational(&self, r: &Rational) -> bool {
        self.lo <= *r && self.hi >= *r
    }

    /// Certain comparison against a rational: `Some` only when every point of
    /// the interval compares the same way.
    pub fn cmp_rational(&self, r: &Rational) -> Option<Ordering> {
        if self.hi < *r {
            Some(Ordering::Less)
        } else if self.lo > *r {
            Some(Ordering::Greater)
        } else if self.lo == *r && self.hi == *r {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    pub fn cmp_interval(&self, o: &Interval) -> Option<Ordering> {
        if self.hi < o.lo {
            Some(Ordering::Less)
        } else if self.lo > o.hi {
            Some(Ordering::Greater)
        } else if self.lo == self.hi && o.lo == o.hi && self.lo == o.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = decimal_digits(self.prec());
        write!(
            f,
            "[{},{}]",
            self.lo.to_string_radix_round(10, Some(digits), Round::Down),
            self.hi.to_string_radix_round(10, Some(digits), Round::Up)
        )
    }
}

fn decimal_digits(prec: u32) -> usize {
    (prec as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

/// Enclosures of cos(2πφ) and sin(2πφ) for an exact phase φ in turns.
///
/// The phase is reduced exactly to [0, 1/8] so the final evaluation is on a
/// range where cos is decreasing and sin increasing.
pub fn cos_sin_turns(phase: &Rational, prec: u32) -> (Interval, Interval) {
    let mut phi = reduce_mod1(phase);
    let one_half = Rational::from((1, 2));
    let quarter = Rational::from((1, 4));
    let eighth = Rational::from((1, 8));
    let mut neg_both = false;
    if phi >= one_half {
        phi -= &one_half;
        neg_both = true;
    }
    let mut neg_cos = false;
    if phi > quarter {
        phi = Rational::from(&one_half - &phi);
        neg_cos = true;
    }
    let mut swap = false;
    if phi > eighth {
        phi = Rational::from(&quarter - &phi);
        swap = true;
    }
    let (mut c, mut s) = if phi == 0 {
        (Interval::from_int(1, prec), Interval::from_int(0, prec))
    } else {
        let a = Interval::pi(prec).mul_rational(&(phi * 2u32));
        let zero = Float::with_val(prec, 0);
        let alo = if a.lo < 0 { zero } else { a.lo.clone() };
        let c = Interval::new(down!(prec, a.hi.cos_ref()), up!(prec, alo.cos_ref()));
        let s = Interval::new(down!(prec, alo.sin_ref()), up!(prec, a.hi.sin_ref()));
        (c, s)
    };
    if swap {
        std::mem::swap(&mut c, &mut s);
    }
    if neg_cos {
        c = c.neg();
    }
    if neg_both {
        c = c.neg();
        s = s.neg();
    }
    (c.clamp(-1, 1), s.clamp(-1, 1))
}

/// x mod 1 in [0, 1).
pub fn reduce_mod1(x: &Rational) -> Rational {
    let (fract, _) = x.clone().fract_floor(Integer::new());
    fract
}

/// ln(e^a + e^b) for enclosures of logarithms; monotone in both arguments.
pub fn log_add(a: &Interval, b: &Interval) -> Interval {
    let prec = a.prec().max(b.prec());
    let lse = |x: &Float, y: &Float, r: Round| -> Float {
        let (m, n) = if x >= y { (x, y) } else { (y, x) };
        let d = Float::with_val_round(prec, n - m, r).0;
        let e = Float::with_val_round(prec, d.exp_ref(), r).0;
        let l = Float::with_val_round(prec, e.ln_1p_ref(), r).0;
        Float::with_val_round(prec, m + &l, r).0
    };
    Interval::new(lse(a.lo(), b.lo(), Round::Down), lse(a.hi(), b.hi(), Round::Up))
}

/// Exact real or a certified enclosure.
#[derive(Clone, Debug, PartialEq)]
pub enum Real {
    Exact(Rational),
    Approx(Interval),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(Rational::new())
    }

    pub fn one() -> Self {
        Real::Exact(Rational::from(1))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Real::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Real::Exact(r) => Some(r),
            Real::Approx(_) => None,
        }
    }

    pub fn interval(&self, prec: u32) -> Interval {
        match self {
            Real::Exact(r) => Interval::point(r, prec),
            Real::Approx(i) => i.clone(),
        }
    }

    pub fn mul(&self, o: &Real, prec: u32) -> Real {
        match (self, o) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(Rational::from(a * b)),
            _ => Real::Approx(self.interval(prec).mul(&o.interval(prec))),
        }
    }

    pub fn add(&self, o: &Real, prec: u32) -> Real {
        match (self, o) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(Rational::from(a + b)),
            _ => Real::Approx(self.interval(prec).add(&o.interval(prec))),
        }
    }

    pub fn sub(&self, o: &Real, prec: u32) -> Real {
        match (self, o) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(Rational::from(a - b)),
            _ => Real::Approx(self.interval(prec).sub(&o.interval(prec))),
        }
    }

    pub fn abs(&self) -> Real {
        match self {
            Real::Exact(a) => Real::Exact(a.clone().abs()),
            Real::Approx(i) => Real::Approx(i.abs()),
        }
    }

    pub fn lo_rational(&self) -> Rational {
        match self {
            Real::Exact(r) => r.clone(),
            Real::Approx(i) => i.lo_rational(),
        }
    }

    pub fn hi_rational(&self) -> Rational {
        match self {
            Real::Exact(r) => r.clone(),
            Real::Approx(i) => i.hi_rational(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(r) => r.to_f64(),
            Real::Approx(i) => i.to_f64(),
        }
    }

    /// Certain comparison; `None` when undecided by the enclosure.
    pub fn cmp_rational(&self, r: &Rational) -> Option<Ordering> {
        match self {
            Real::Exact(a) => Some(a.cmp(r)),
            Real::Approx(i) => i.cmp_rational(r),
        }
    }

    pub fn cmp_real(&self, o: &Real) -> Option<Ordering> {
        match (self, o) {
            (Real::Exact(a), Real::Exact(b)) => Some(a.cmp(b)),
            (Real::Exact(a), Real::Approx(i)) => i.cmp_rational(a).map(Ordering::reverse),
            (Real::Approx(i), Real::Exact(b)) => i.cmp_rational(b),
            (Real::Approx(i), Real::Approx(j)) => i.cmp_interval(j),
        }
    }

    pub fn certainly_lt(&self, o: &Real) -> bool {
        self.cmp_real(o) == Some(Ordering::Less)
    }

    pub fn certainly_le(&self, o: &Real) -> bool {
        matches!(self.cmp_real(o), Some(Ordering::Less | Ordering::Equal))
            || self.hi_rational() <= o.lo_rational()
    }

    pub fn certainly_positive(&self) -> bool {
        self.cmp_rational(&Rational::new()) == Some(Ordering::Greater)
    }

    pub fn coarsen(&self, prec: u32) -> Real {
        match self {
            Real::Exact(_) => self.clone(),
            Real::Approx(i) => Real::Approx(i.coarsen(prec)),
        }
    }

    /// Certain upper bound as a rational.
    pub fn upper(&self) -> Rational {
        self.hi_rational()
    }
}

impl From<Rational> for Real {
    fn from(r: Rational) -> Self {
        Real::Exact(r)
    }
}

impl From<Interval> for Real {
    fn from(i: Interval) -> Self {
        Real::Approx(i)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(r) => f.write_str(&fmt_rational(r)),
            Real::Approx(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for Real {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let (a, b) = body
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("interval `{s}`")))?;
            let lo = parse_rational(a)?;
            let hi = parse_rational(b)?;
            if lo > hi {
                return Err(Error::Parse(format!("inverted interval `{s}`")));
            }
            let prec = prec_for_digits(body.len());
            Ok(Real::Approx(Interval::from_bounds(&lo, &hi, prec)))
        } else {
            Ok(Real::Exact(parse_rational(s)?))
        }
    }
}

fn prec_for_digits(n: usize) -> u32 {
    let bits = (n as f64 * 3.33).ceil() as u32 + 16;
    bits.max(DEFAULT_PREC)
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Decimal string when the expansion terminates, `p/q` otherwise.
pub fn fmt_rational(r: &Rational) -> String {
    let d = r.denom();
    if *d == 1 {
        return r.numer().to_string();
    }
    let mut rest = d.clone();
    let twos = rest.remove_factor_mut(&Integer::from(2));
    let fives = rest.remove_factor_mut(&Integer::from(5));
    let places = twos.max(fives);
    if rest == 1 && places <= 64 {
        let scale = Integer::from(10u32).pow(places);
        let scaled = Integer::from(r.numer() * &scale) / d;
        let neg = scaled < 0;
        let digits = scaled.abs().to_string();
        let places = places as usize;
        let padded = if digits.len() <= places {
            format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
        } else {
            digits
        };
        let (int, frac) = padded.split_at(padded.len() - places);
        format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
    } else {
        format!("{}/{}", r.numer(), d)
    }
}

/// Parses `p/q`, integers, and decimals with optional exponent.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    if s.is_empty() {
        return Err(bad());
    }
    if s.contains('/') {
        let r = Rational::from_str(s).map_err(|_| bad())?;
        return Ok(r);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let n = Integer::from_str(if digits.is_empty() { "0" } else { &digits }).map_err(|_| bad())?;
    let e10 = exp - frac.len() as i32;
    let mut r = Rational::from(n);
    if e10 >= 0 {
        r *= Integer::from(10u32).pow(e10 as u32);
    } else {
        r /= Integer::from(10u32).pow((-e10) as u32);
    }
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Serde adapters for exact types as strings.
pub mod ser {
    pub mod rational {
        use rug::Rational;
        use serde::{de, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&super::super::fmt_rational(r))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
            let s = String::deserialize(d)?;
            super::super::parse_rational(&s).map_err(de::Error::custom)
        }
    }

    pub mod integer {
        use rug::Integer;
        use serde::{de, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(n: &Integer, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&n.to_string())
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Integer, D::Error> {
            let s = String::deserialize(d)?;
            s.trim().parse::<Integer>().map_err(de::Error::custom)
        }
    }

    pub mod fraction {
        //! Always `p/q`, for frequencies.
        use rug::Rational;
        use serde::{de, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
            let s = String::deserialize(d)?;
            super::super::parse_rational(&s).map_err(de::Error::custom)
        }
    }
}

/// Rational approximation of a float, exact.
pub fn rational_of_f64(x: f64) -> Rational {
    Rational::from_f64(x).expect("finite float")
}

/// Nearest rational with the given denominator to an enclosure midpoint.
pub fn snap(i: &Interval, q: &Integer) -> Rational {
    let m = i.mid().to_rational().expect("finite");
    let k = Rational::from(&m * q).round();
    Rational::from((k.numer().clone(), q.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0.125", "3/7", "-2.5", "12", "1e-3", "0.5"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(parse_rational(&fmt_rational(&r)).unwrap(), r);
        }
        assert_eq!(fmt_rational(&Rational::from((1, 8))), "0.125");
        assert_eq!(fmt_rational(&Rational::from((1, 3))), "1/3");
        assert_eq!(fmt_rational(&Rational::from((-1, 20))), "-0.05");
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.2.3").is_err());
    }

    #[test]
    fn cos_sin_special_phases() {
        let p = 128;
        let (c, s) = cos_sin_turns(&Rational::from((1, 4)), p);
        assert!(c.contains_rational(&Rational::new()) && s.contains_rational(&Rational::from(1)));
        let (c, s) = cos_sin_turns(&Rational::from((3, 8)), p);
        let r = -(0.5f64.sqrt());
        assert!((c.to_f64() - r).abs() < 1e-15 && (s.to_f64() + r).abs() < 1e-15);
        for k in 0..97 {
            let ph = Rational::from((k, 97));
            let (c, s) = cos_sin_turns(&ph, p);
            let a = 2.0 * std::f64::consts::PI * k as f64 / 97.0;
            assert!((c.to_f64() - a.cos()).abs() < 1e-14);
            assert!((s.to_f64() - a.sin()).abs() < 1e-14);
            assert!(c.width() < 1e-30 && s.width() < 1e-30);
        }
    }

    #[test]
    fn interval_ops_enclose() {
        let p = 64;
        let a = Interval::point(&Rational::from((1, 3)), p);
        let b = a.mul(&a).sub(&Interval::point(&Rational::from((1, 9)), p));
        assert!(b.contains_zero());
        let e = Interval::from_int(1, p).exp().ln().unwrap();
        assert!(e.contains_rational(&Rational::from(1)));
        let r: Real = "[0.25,0.5]".parse().unwrap();
        assert_eq!(r.cmp_rational(&Rational::from(1)), Some(Ordering::Less));
        assert_eq!(r.cmp_rational(&Rational::from((1, 3))), None);
    }
}
