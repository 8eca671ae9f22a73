//! Rational frequency vectors, torus phases and density certificates.

use std::fmt;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cos_sin_turns, reduce_mod1, Interval};

/// A divisibility pattern `q_a | q_b | q_c`, stored as zero-based indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chain(pub [usize; 3]);

impl Chain {
    pub const Q3_Q1_Q2: Chain = Chain([2, 0, 1]);
    pub const Q1_Q2_Q3: Chain = Chain([0, 1, 2]);
    pub const Q2_Q3_Q1: Chain = Chain([1, 2, 0]);
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "q{}|q{}|q{}", a + 1, b + 1, c + 1)
    }
}

impl std::str::FromStr for Chain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let idx: Vec<usize> = s
            .split('|')
            .map(|t| {
                t.trim()
                    .strip_prefix('q')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|d| (1..=3).contains(d))
                    .map(|d| d - 1)
            })
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Parse(format!("chain `{s}`")))?;
        match idx[..] {
            [a, b, c] if a != b && b != c && a != c => Ok(Chain([a, b, c])),
            _ => Err(Error::Parse(format!("chain `{s}`"))),
        }
    }
}

/// ω = (p₁/q₁, p₂/q₂, p₃/q₃) with positive coprime entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frequency3 {
    w: [Rational; 3],
    chain: Option<Chain>,
}

impl Frequency3 {
    pub fn new(w: [Rational; 3]) -> Result<Self> {
        if w.iter().any(|r| *r <= 0) {
            return Err(Error::Domain("frequencies must be positive".into()));
        }
        let mut f = Frequency3 { w, chain: None };
        f.chain = [Chain::Q3_Q1_Q2, Chain::Q1_Q2_Q3, Chain::Q2_Q3_Q1]
            .into_iter()
            .find(|c| f.check_chain(*c));
        Ok(f)
    }

    pub fn from_pairs(pq: [(u64, u64); 3]) -> Result<Self> {
        if pq.iter().any(|&(_, q)| q == 0) {
            return Err(Error::Domain("zero denominator".into()));
        }
        Self::new(pq.map(|(p, q)| Rational::from((p, q))))
    }

    pub fn get(&self, i: usize) -> &Rational {
        &self.w[i]
    }

    pub fn as_array(&self) -> &[Rational; 3] {
        &self.w
    }

    pub fn p(&self, i: usize) -> &Integer {
        self.w[i].numer()
    }

    pub fn q(&self, i: usize) -> &Integer {
        self.w[i].denom()
    }

    /// The first recognised chain tag, recomputed from the fields.
    pub fn chain(&self) -> Option<Chain> {
        self.chain
    }

    pub fn check_chain(&self, c: Chain) -> bool {
        check_chain(self, c)
    }

    /// Period of S_ω: lcm of the denominators.
    pub fn period(&self) -> Integer {
        let l = self.q(0).clone().lcm(self.q(1));
        l.lcm(self.q(2))
    }

    /// Sup-norm distance |ω − other| in R³.
    pub fn dist(&self, o: &Frequency3) -> Rational {
        (0..3)
            .map(|i| Rational::from(&self.w[i] - &o.w[i]).abs())
            .max()
            .unwrap()
    }

    pub fn with(&self, i: usize, r: Rational) -> Result<Self> {
        let mut w = self.w.clone();
        w[i] = r;
        Self::new(w)
    }
}

impl fmt::Display for Frequency3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.w[0], self.w[1], self.w[2])
    }
}

impl Serialize for Frequency3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<String> = self.w.iter().map(|r| format!("{}/{}", r.numer(), r.denom())).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Frequency3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v: Vec<String> = Vec::deserialize(d)?;
        if v.len() != 3 {
            return Err(D::Error::custom("frequency needs three entries"));
        }
        let mut w: [Rational; 3] = Default::default();
        for (k, s) in v.iter().enumerate() {
            let (p, q) = s.split_once('/').ok_or_else(|| D::Error::custom(format!("`{s}` is not p/q")))?;
            let p: Integer = p.trim().parse().map_err(D::Error::custom)?;
            let q: Integer = q.trim().parse().map_err(D::Error::custom)?;
            if q <= 0 || p.clone().gcd(&q) != 1 {
                return Err(D::Error::custom(format!("`{s}` is not a reduced fraction")));
            }
            w[k] = Rational::from((p, q));
        }
        Frequency3::new(w).map_err(D::Error::custom)
    }
}

/// True iff q_a | q_b | q_c for the pattern (a, b, c).
pub fn check_chain(w: &Frequency3, c: Chain) -> bool {
    let [a, b, cc] = c.0;
    w.q(b).is_divisible(w.q(a)) && w.q(cc).is_divisible(w.q(b))
}

/// A point of T¹ in turns.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Phase(Rational);

impl Phase {
    pub fn new(r: &Rational) -> Self {
        Phase(reduce_mod1(r))
    }

    pub fn zero() -> Self {
        Phase(Rational::new())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// (phase + m·β) mod 1.
pub fn advance(phase: &Phase, m: &Integer, beta: &Rational) -> Phase {
    let step = Rational::from(beta * m);
    Phase::new(&Rational::from(&phase.0 + &step))
}

/// Sup-norm distance from (x, 0) to the nearest nontrivial return of its
/// orbit under the rotation by β = p/q.
///
/// Returns are the rotations by k/q turns; the sup-norm displacement
/// x·max(1 − cos θ, |sin θ|) is increasing in |θ| on [0, π], so the minimum
/// sits at one turn-step 1/q.
pub fn min_return_distance(x: &Interval, beta: &Rational) -> Result<Interval> {
    let q = beta.denom();
    if *q < 2 {
        return Err(Error::Domain("min_return_distance needs q >= 2".into()));
    }
    if !x.is_positive() {
        return Err(Error::Domain("min_return_distance needs x > 0".into()));
    }
    let prec = x.prec();
    let (c, s) = cos_sin_turns(&Rational::from((1, q.clone())), prec);
    let one_minus_c = Interval::from_int(1, prec).sub(&c);
    Ok(x.mul(&one_minus_c.max(&s.abs())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCertificate {
    #[serde(with = "crate::numeric::ser::rational")]
    pub eta: Rational,
    /// The three exact inequalities 1/q₃ < η, q₃/q₁ < η, q₁/q₂ < η.
    pub inequalities: [bool; 3],
    /// Grid cross-check: `None` when skipped because the grid or period is too large.
    pub grid_confirmed: Option<bool>,
    pub grid_cells_per_axis: Option<u64>,
}

impl DensityCertificate {
    pub fn certified(&self) -> bool {
        self.inequalities.iter().all(|&b| b) && self.grid_confirmed != Some(false)
    }
}

pub const GRID_CELL_CAP: u64 = 1_000_000;
pub const GRID_PERIOD_CAP: u64 = 1_000_000;

/// Certifies η-density of S_ω orbits for a chain q₃|q₁|q₂.
pub fn certify_density(w: &Frequency3, eta: &Rational, grid: bool) -> Result<DensityCertificate> {
    if !w.check_chain(Chain::Q3_Q1_Q2) {
        return Err(Error::ChainViolation(format!("{w} does not satisfy q3|q1|q2")));
    }
    if *eta <= 0 {
        return Err(Error::Domain("eta must be positive".into()));
    }
    let (q1, q2, q3) = (w.q(0), w.q(1), w.q(2));
    let inequalities = [
        Rational::from((1, q3.clone())) < *eta,
        Rational::from((q3.clone(), q1.clone())) < *eta,
        Rational::from((q1.clone(), q2.clone())) < *eta,
    ];
    let mut cert = DensityCertificate { eta: eta.clone(), inequalities, grid_confirmed: None, grid_cells_per_axis: None };
    if grid {
        let n = Rational::from(eta.recip_ref()).ceil().numer().to_u64();
        if let (Some(n), Some(period)) = (n, q2.to_u64()) {
            if n.checked_pow(3).is_some_and(|c| c <= GRID_CELL_CAP) && period <= GRID_PERIOD_CAP {
                cert.grid_confirmed = Some(grid_visits_all(w, n, period));
                cert.grid_cells_per_axis = Some(n);
            }
        }
    }
    Ok(cert)
}

/// Cell indices along one axis hit by the orbit value k/q (closed cells, so
/// a point on a cell boundary belongs to both neighbours).
fn cells_hit(num: &Integer, q: &Integer, n: u64) -> (u64, Option<u64>) {
    let scaled = Integer::from(num * n);
    let (c, r) = scaled.div_rem_floor(q.clone());
    let c = c.to_u64().unwrap() % n;
    let other = if r == 0 { Some((c + n - 1) % n) } else { None };
    (c, other)
}

fn grid_visits_all(w: &Frequency3, n: u64, period: u64) -> bool {
    let cells = (n * n * n) as usize;
    let mut seen = vec![false; cells];
    let mut left = cells;
    for m in 0..period {
        let mut axes = [(0u64, None); 3];
        for (i, ax) in axes.iter_mut().enumerate() {
            let num = Integer::from(w.p(i) * m) % w.q(i);
            *ax = cells_hit(&num, w.q(i), n);
        }
        for a in [Some(axes[0].0), axes[0].1].into_iter().flatten() {
            for b in [Some(axes[1].0), axes[1].1].into_iter().flatten() {
                for c in [Some(axes[2].0), axes[2].1].into_iter().flatten() {
                    let k = ((a * n + b) * n + c) as usize;
                    if !seen[k] {
                        seen[k] = true;
                        left -= 1;
                    }
                }
            }
        }
        if left == 0 {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(pq: [(u64, u64); 3]) -> Frequency3 {
        Frequency3::from_pairs(pq).unwrap()
    }

    #[test]
    fn chain_examples() {
        assert!(check_chain(&w([(1, 2), (1, 8), (1, 2)]), Chain::Q3_Q1_Q2));
        assert!(check_chain(&w([(1, 2), (1, 4), (1, 8)]), Chain::Q1_Q2_Q3));
        assert!(!check_chain(&w([(1, 3), (1, 4), (1, 8)]), Chain::Q3_Q1_Q2));
        assert_eq!("q3|q1|q2".parse::<Chain>().unwrap(), Chain::Q3_Q1_Q2);
        assert_eq!(Chain::Q2_Q3_Q1.to_string(), "q2|q3|q1");
    }

    #[test]
    fn advance_examples() {
        let q = |a, b| Rational::from((a, b));
        assert_eq!(advance(&Phase::zero(), &Integer::from(3), &q(1, 4)).value(), &q(3, 4));
        assert_eq!(advance(&Phase::new(&q(1, 8)), &Integer::from(8), &q(1, 8)).value(), &q(1, 8));
        assert!(advance(&Phase::zero(), &Integer::from(7), &q(3, 7)).is_zero());
    }

    #[test]
    fn density_examples() {
        let e = |a, b| Rational::from((a, b));
        let c = certify_density(&w([(1, 4), (1, 16), (1, 2)]), &e(2, 3), false).unwrap();
        assert_eq!(c.inequalities, [true, true, true]);
        let c = certify_density(&w([(1, 2), (1, 4), (1, 2)]), &e(1, 10), false).unwrap();
        assert!(!c.inequalities[0] && !c.certified());
        let c = certify_density(&w([(1, 4), (1, 16), (1, 2)]), &e(1, 2), true).unwrap();
        assert_eq!(c.grid_confirmed, Some(true));
        assert_eq!(c.grid_cells_per_axis, Some(2));
        assert!(matches!(
            certify_density(&w([(1, 3), (1, 4), (1, 8)]), &e(1, 2), false),
            Err(Error::ChainViolation(_))
        ));
    }

    #[test]
    fn frequency_serde() {
        let f = w([(1, 4), (3, 16), (1, 2)]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"["1/4","3/16","1/2"]"#);
        let g: Frequency3 = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        assert!(serde_json::from_str::<Frequency3>(r#"["2/4","3/16","1/2"]"#).is_err());
    }
}
