//! Gevrey-norm constants for composition, Hamiltonian flows and composed
//! flows, the norm ledger, and polynomial checks of the norm inequalities.

use std::cmp::Ordering;

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_add, ser, Interval, Real};
use crate::profiles::{truncated_norm, NormTarget, Poly};

/// The free choices of the composition estimate and the resulting ε_c.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsC {
    pub mu: Real,
    pub a: Real,
    pub lambda: Real,
    pub eps_c: Real,
}

fn check_ls(l: &Rational, l1: &Rational) -> Result<()> {
    if *l <= 0 || l >= l1 {
        return Err(Error::Domain(format!("need 0 < L < L1, got L = {l}, L1 = {l1}")));
    }
    Ok(())
}

/// (L₁/L)^α, exact for integer α.
fn ratio_pow(l: &Rational, l1: &Rational, alpha: &Rational, prec: u32) -> Real {
    let q = Rational::from(l1 / l);
    pow_real(&q, alpha, prec)
}

fn pow_real(base: &Rational, e: &Rational, prec: u32) -> Real {
    if *e.denom() == 1 {
        if let Some(k) = e.numer().to_i32() {
            return Real::Exact(if k >= 0 {
                rug::ops::Pow::pow(base.clone(), k as u32)
            } else {
                rug::ops::Pow::pow(Rational::from(base.recip_ref()), (-k) as u32)
            });
        }
    }
    Real::Approx(Interval::point(base, prec).powr(e).expect("positive base"))
}

/// μ = min{2, (1+(L₁/L)^α)/2}, a = μ^(1/(α−1)) − 1 (a = 1 at α = 1),
/// λ = (N(1+1/a))^(α−1), ε_c = (L₁^α − μL^α)/λ.
pub fn eps_c(n: &Integer, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<EpsC> {
    check_ls(l, l1)?;
    if *alpha < 1 || *n < 1 {
        return Err(Error::Domain("eps_c needs alpha >= 1 and N >= 1".into()));
    }
    let rho = ratio_pow(l, l1, alpha, prec);
    let two = Real::Exact(Rational::from(2));
    let avg = rho.add(&Real::one(), prec).mul(&Real::Exact(Rational::from((1, 2))), prec);
    let mu = match avg.cmp_real(&two) {
        Some(Ordering::Greater | Ordering::Equal) => two,
        Some(Ordering::Less) => avg,
        None => Real::Approx(avg.interval(prec).min(&two.interval(prec))),
    };
    if !(mu.cmp_rational(&Rational::from(1)) == Some(Ordering::Greater) && mu.certainly_lt(&rho)) {
        return Err(Error::Domain("mu not in (1, (L1/L)^alpha)".into()));
    }
    let am1 = Rational::from(alpha - 1u32);
    let a = if am1 == 0 {
        Real::one()
    } else {
        let inv = Rational::from(am1.recip_ref());
        match &mu {
            Real::Exact(m) if inv == 1 => Real::Exact(Rational::from(m - 1u32)),
            _ => Real::Approx(
                mu.interval(prec).powr(&inv).expect("mu > 0").sub(&Interval::from_int(1, prec)),
            ),
        }
    };
    // N(1 + 1/a)
    let base = match &a {
        Real::Exact(av) => Real::Exact(Rational::from(n.clone()) * (Rational::from(av.recip_ref()) + 1u32)),
        Real::Approx(ai) => {
            let one = Interval::from_int(1, prec);
            Real::Approx(one.div(ai).expect("a > 0").add(&one).mul_rational(&Rational::from(n.clone())))
        }
    };
    let lambda = match &base {
        Real::Exact(b) => pow_real(b, &am1, prec),
        Real::Approx(bi) => {
            if am1 == 0 {
                Real::one()
            } else {
                Real::Approx(bi.powr(&am1).expect("positive"))
            }
        }
    };
    let l1a = pow_real(l1, alpha, prec);
    let la = pow_real(l, alpha, prec);
    let num = l1a.sub(&mu.mul(&la, prec), prec);
    let eps = match (&num, &lambda) {
        (Real::Exact(x), Real::Exact(y)) => Real::Exact(Rational::from(x / y)),
        _ => Real::Approx(num.interval(prec).div(&lambda.interval(prec)).expect("lambda > 0")),
    };
    Ok(EpsC { mu, a, lambda, eps_c: eps })
}

pub fn midpoint(l: &Rational, l1: &Rational) -> Rational {
    Rational::from(l + l1) / 2u32
}

/// ε_f(N, α, L, L₁) = ε_c(N, α, L, (L+L₁)/2).
pub fn eps_f(n: &Integer, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Real> {
    check_ls(l, l1)?;
    Ok(eps_c(n, alpha, l, &midpoint(l, l1), prec)?.eps_c)
}

/// ε_H(n, α, L, L₁) = (L₁ − L′)^α · ε_f(2n, α, L, L′), L′ = (L+L₁)/2.
pub fn eps_h(n: u32, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Interval> {
    check_ls(l, l1)?;
    let lp = midpoint(l, l1);
    let f = eps_f(&Integer::from(2 * n), alpha, l, &lp, prec)?;
    let d = pow_real(&Rational::from(l1 - &lp), alpha, prec);
    Ok(d.mul(&f, prec).interval(prec))
}

/// 2^α (L₁ − L)^(−α), the flow constant of the Hamiltonian-flow estimate.
pub fn c_flow_lemma_a2(alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Interval> {
    check_ls(l, l1)?;
    let two = pow_real(&Rational::from(2), alpha, prec);
    let d = pow_real(&Rational::from(l1 - l), &Rational::from(-alpha.clone()), prec);
    Ok(two.mul(&d, prec).interval(prec))
}

/// C = 2^α (L₁ − L′)^(−α) with L′ = (L+L₁)/2.
pub fn c_flow(alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Interval> {
    check_ls(l, l1)?;
    c_flow_lemma_a2(alpha, &midpoint(l, l1), l1, prec)
}

/// ε = min{ε_c(2n, α, L, L′), C·ε_H(n, α, L′, L₁)}.
pub fn eps_compose(n: u32, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Interval> {
    let lp = midpoint(l, l1);
    let a = eps_c(&Integer::from(2 * n), alpha, l, &lp, prec)?.eps_c.interval(prec);
    let b = c_flow(alpha, l, l1, prec)?.mul(&eps_h(n, alpha, &lp, l1, prec)?);
    Ok(a.min(&b))
}

/// ‖Φ^u − Id‖_{α,L} ≤ 2^α(L₁−L)^(−α)·‖u‖_{α,L₁}, valid when ‖u‖ ≤ ε_H.
pub fn flow_norm_bound(u_norm: &Interval, n: u32, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<Interval> {
    let eh = eps_h(n, alpha, l, l1, prec)?;
    if u_norm.cmp_interval(&eh) == Some(Ordering::Greater) || u_norm.hi() > eh.lo() {
        return Err(Error::ThresholdViolation(format!("||u|| in {u_norm} exceeds eps_H in {eh}")));
    }
    Ok(c_flow_lemma_a2(alpha, l, l1, prec)?.mul(u_norm))
}

/// C·Σ‖u_r‖ given prev_norm + C·Σ‖u_r‖ ≤ ε.
pub fn compose_ledger(
    prev_norm: &Interval,
    u_norms: &[Interval],
    n: u32,
    alpha: &Rational,
    l: &Rational,
    l1: &Rational,
    prec: u32,
) -> Result<Interval> {
    let c = c_flow(alpha, l, l1, prec)?;
    let mut sum = Interval::from_int(0, prec);
    for u in u_norms {
        sum = sum.add(u);
    }
    let inc = c.mul(&sum);
    let total = prev_norm.add(&inc);
    let eps = eps_compose(n, alpha, l, l1, prec)?;
    if total.hi() > eps.lo() {
        let margin = total.sub(&eps);
        return Err(Error::BudgetExceeded { margin: margin.to_string() });
    }
    Ok(inc)
}

/// `compose_ledger` with every norm given by an enclosure of its logarithm.
pub fn compose_ledger_ln(
    prev_ln: Option<&Interval>,
    u_lns: &[Interval],
    n: u32,
    alpha: &Rational,
    l: &Rational,
    l1: &Rational,
    prec: u32,
) -> Result<Interval> {
    let c = c_flow(alpha, l, l1, prec)?;
    let mut sum: Option<Interval> = None;
    for u in u_lns {
        sum = Some(match sum {
            None => u.clone(),
            Some(s) => log_add(&s, u),
        });
    }
    let Some(sum) = sum else {
        return Err(Error::Domain("empty ledger increment has no logarithm".into()));
    };
    let inc = c.ln().expect("C > 0").add(&sum);
    let total = match prev_ln {
        Some(p) => log_add(p, &inc),
        None => inc.clone(),
    };
    let eps_ln = eps_compose(n, alpha, l, l1, prec)?.ln().expect("eps > 0");
    if total.hi() > eps_ln.lo() {
        let margin = total.sub(&eps_ln);
        return Err(Error::BudgetExceeded { margin: format!("ln-ratio {margin}") });
    }
    Ok(inc)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormBudgetConstants {
    pub n: u32,
    #[serde(with = "ser::rational")]
    pub alpha: Rational,
    #[serde(with = "ser::rational")]
    pub l: Rational,
    #[serde(with = "ser::rational")]
    pub l1: Rational,
    #[serde(with = "ser::rational")]
    pub lprime: Rational,
    pub mu: Real,
    pub a: Real,
    pub lambda: Real,
    pub eps_c: Real,
    pub eps_f: Real,
    pub eps_h: Real,
    pub c_flow: Real,
    pub eps_compose: Real,
}

/// All constants for X = R^(2n), with the composition constants taken at
/// (2n, α, L, L′).
pub fn constants(n: u32, alpha: &Rational, l: &Rational, l1: &Rational, prec: u32) -> Result<NormBudgetConstants> {
    let lp = midpoint(l, l1);
    let ec = eps_c(&Integer::from(2 * n), alpha, l, &lp, prec)?;
    Ok(NormBudgetConstants {
        n,
        alpha: alpha.clone(),
        l: l.clone(),
        l1: l1.clone(),
        lprime: lp.clone(),
        mu: ec.mu,
        a: ec.a,
        lambda: ec.lambda,
        eps_c: ec.eps_c,
        eps_f: eps_f(&Integer::from(2 * n), alpha, l, l1, prec)?,
        eps_h: Real::Approx(eps_h(n, alpha, l, l1, prec)?),
        c_flow: Real::Approx(c_flow(alpha, l, l1, prec)?),
        eps_compose: Real::Approx(eps_compose(n, alpha, l, l1, prec)?),
    })
}

/// Relative tolerance for comparing independently computed float norms.
pub const NORM_RTOL: f64 = 1e-9;

fn poly_norm(p: &Poly, alpha: f64, l: f64) -> f64 {
    let deg = p.degree() as usize;
    truncated_norm(&NormTarget::Poly(p.clone()), alpha, l, deg, 0.0)
        .expect("polynomial norms are always available")
        .value
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// ‖fg‖_{α,L} ≤ ‖f‖_{α,L}·‖g‖_{α,L} on [−1, 1]^N.
pub fn check_banach_algebra(f: &Poly, g: &Poly, alpha: f64, l: f64) -> InequalityCheck {
    let lhs = poly_norm(&f.mul(g), alpha, l);
    let rhs = poly_norm(f, alpha, l) * poly_norm(g, alpha, l);
    InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + NORM_RTOL) + 1e-300 }
}

/// Σ_{|m|=p} ‖∂^m f‖_{α,L′} ≤ p!^α (L−L′)^(−pα) ‖f‖_{α,L} for L′ < L.
pub fn check_cauchy_gevrey(f: &Poly, p: u32, alpha: f64, l: f64, lp: f64) -> Result<InequalityCheck> {
    if !(0.0 < lp && lp < l) {
        return Err(Error::Domain("need 0 < L' < L".into()));
    }
    let mut lhs = 0.0;
    for a in 0..=p {
        let b = p - a;
        if f.nvars == 1 && b > 0 {
            continue;
        }
        lhs += poly_norm(&f.derivative(a, b), alpha, lp);
    }
    let lnfact: f64 = (1..=p).map(|i| (i as f64).ln()).sum();
    let rhs = (alpha * lnfact - p as f64 * alpha * (l - lp).ln()).exp() * poly_norm(f, alpha, l);
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + NORM_RTOL) + 1e-300 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    #[test]
    fn eps_c_unit_example() {
        let e = eps_c(&Integer::from(1), &q(2, 1), &q(1, 1), &q(2, 1), 128).unwrap();
        assert_eq!(e.mu, Real::Exact(q(2, 1)));
        assert_eq!(e.a, Real::Exact(q(1, 1)));
        assert_eq!(e.lambda, Real::Exact(q(2, 1)));
        assert_eq!(e.eps_c, Real::Exact(q(1, 1)));
    }

    #[test]
    fn eps_c_alpha_one() {
        let e = eps_c(&Integer::from(5), &q(1, 1), &q(1, 1), &q(3, 1), 128).unwrap();
        assert_eq!(e.lambda, Real::one());
        // μ = min{2, 2} = 2, ε_c = L₁ − μL = 1
        assert_eq!(e.eps_c, Real::Exact(q(1, 1)));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eps_c(&Integer::from(1), &q(2, 1), &q(2, 1), &q(1, 1), 64), Err(Error::Domain(_))));
        let u = Interval::from_int(1000, 64);
        assert!(matches!(
            flow_norm_bound(&u, 3, &q(2, 1), &q(1, 1), &q(2, 1), 64),
            Err(Error::ThresholdViolation(_))
        ));
    }

    #[test]
    fn flow_bound_linear() {
        let t = Interval::point(&q(1, 1_000_000), 128);
        let b = flow_norm_bound(&t, 3, &q(2, 1), &q(1, 1), &q(2, 1), 128).unwrap();
        assert!(b.contains_rational(&q(4, 1_000_000)));
    }

    #[test]
    fn default_config_epsilon() {
        let e = eps_compose(3, &q(2, 1), &q(1, 1), &q(10, 1), 128).unwrap();
        // hand evaluation: C = 4/4.5², ε_H = 2.25²·ε_c(6, 2, 5.5, 6.625)
        let mu = (1.0 + (6.625f64 / 5.5).powi(2)) / 2.0;
        let lam = 6.0 * (1.0 + 1.0 / (mu - 1.0));
        let want = 4.0 / 4.5f64.powi(2) * 2.25f64.powi(2) * (6.625f64.powi(2) - mu * 5.5f64.powi(2)) / lam;
        assert!((e.to_f64() - want).abs() < 1e-12, "{} vs {}", e, want);
        let e = eps_compose(3, &q(2, 1), &q(1, 1), &q(2, 1), 128).unwrap();
        assert!(e.to_f64() < 0.02);
    }
}
