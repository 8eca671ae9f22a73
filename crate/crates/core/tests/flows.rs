use orbitcert::flows::{
    apply_bump, apply_bump_dir, apply_bump_f64, apply_bump_inverse, hyperbolic_time1, numeric_flow, Amplitude, Branch,
    BumpSpec, FlowConfig, HDescriptor, PlanePoint, State, StepControl,
};
use orbitcert::numeric::{Interval, Real};
use orbitcert::rotations::Phase;
use proptest::prelude::*;
use rug::Rational;

fn q(a: i64, b: i64) -> Rational {
    Rational::from((a, b))
}

fn cfg() -> FlowConfig {
    let mut c = FlowConfig::new(q(1, 1), q(2, 1));
    c.tol = 1e-15;
    c
}

fn spec(eps: Rational) -> BumpSpec {
    BumpSpec::new(2, 1, q(1, 2), q(1, 4), Amplitude::Rate(eps)).unwrap()
}

/// Sixth-order central difference weights.
const STENCIL: [(f64, f64); 3] = [(1.0, 3.0 / 4.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 60.0)];

fn det(mut a: [[f64; 6]; 6]) -> f64 {
    let mut d = 1.0;
    for c in 0..6 {
        let p = (c..6).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..6 {
            let f = a[r][c] / a[c][c];
            for k in c..6 {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

/// Sixth-order central-difference Jacobian of the bump map.
fn jacobian(s: &BumpSpec, v: [f64; 6], c: &FlowConfig) -> [[f64; 6]; 6] {
    let h = 2e-5;
    let at = |k: usize, d: f64| {
        let mut a = v;
        a[k] += d;
        apply_bump_f64(s, a, 1, c).unwrap()
    };
    let mut j = [[0.0; 6]; 6];
    for k in 0..6 {
        for (d, w) in STENCIL {
            let (p, m) = (at(k, d * h), at(k, -d * h));
            for r in 0..6 {
                j[r][k] += w * (p[r] - m[r]) / h;
            }
        }
    }
    j
}

/// A wide bump, so that difference quotients resolve the map.
fn wide_spec(eps: Rational) -> BumpSpec {
    BumpSpec::new(2, 1, q(3, 2), q(1, 1), Amplitude::Rate(eps)).unwrap()
}

/// Factor 1 anywhere the coupling is active, factor 2 in the support of the wide bump.
fn active_state() -> impl Strategy<Value = [f64; 6]> {
    (-2.8f64..2.8, -2.8f64..2.8, 0.5f64..2.5, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(a, b, c, d, e, f)| [a, b, c, d, e, f])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn bump_map_preserves_volume(v in active_state(), eps in 1u32..=100) {
        let s = wide_spec(q(eps as i64, 100));
        let d = det(jacobian(&s, v, &cfg()));
        prop_assert!((d - 1.0).abs() < 1e-6, "det {d} at {v:?}");
    }

    #[test]
    fn inverse_undoes_bump(v in active_state(), eps in 1u32..=100) {
        let s = wide_spec(q(eps as i64, 100));
        let f = apply_bump_f64(&s, v, 1, &cfg()).unwrap();
        let b = apply_bump_f64(&s, f, -1, &cfg()).unwrap();
        for k in 0..6 {
            prop_assert!((b[k] - v[k]).abs() < 1e-8, "{k}: {} vs {}", b[k], v[k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn identity_off_support(v in prop::array::uniform6(-3.0f64..3.0), eps in 1u32..=100) {
        let s = spec(q(eps as i64, 100));
        // trigger factor is 2: push it out of the sup-ball of radius 1/4 around (1/2, 0)
        let mut v = v;
        if (v[2] - 0.5).abs() < 0.25 && v[3].abs() < 0.25 {
            v[3] = 0.25 + v[3].abs();
        }
        let st = State::cartesian(v);
        let (out, b) = apply_bump_dir(&s, &st, 1, &cfg()).unwrap();
        prop_assert_eq!(b, Branch::Identity);
        prop_assert_eq!(out, st);
    }

    #[test]
    fn closed_form_keeps_axis_and_contracts(x in 1i64..=70, t in 0i64..=100, eps in 1i64..=100, y_axis in any::<bool>()) {
        // trigger on the positive axis at distance t/400 ≤ 1/4 from the center;
        // |x|·e^ε stays within 2R so the exact branch applies
        let s = spec(q(eps, 100));
        let trig = q(1, 2) + q(t, 400);
        let mag = q(x, 100);
        let phase = if y_axis { Phase::new(&q(1, 4)) } else { Phase::zero() };
        let st = State([
            PlanePoint::Polar { magnitude: Real::Exact(mag.clone()), phase: phase.clone() },
            PlanePoint::axis_rational(trig),
            PlanePoint::axis_rational(q(3, 10)),
        ]);
        let (out, b) = apply_bump_dir(&s, &st, 1, &cfg()).unwrap();
        prop_assert!(b != Branch::Numeric);
        match &out.0[0] {
            PlanePoint::Polar { magnitude, phase: ph } => {
                prop_assert_eq!(ph, &phase);
                if y_axis {
                    prop_assert!(Real::Exact(mag.clone()).certainly_le(magnitude));
                } else {
                    prop_assert!(magnitude.certainly_le(&Real::Exact(mag.clone())));
                }
            }
            p => prop_assert!(false, "left the polar form: {p:?}"),
        }
        prop_assert_eq!(&out.0[1], &st.0[1]);
        prop_assert_eq!(&out.0[2], &st.0[2]);
    }

    #[test]
    fn plateau_contraction_rate(x in 1i64..=200, t in 0i64..=50, eps in 1i64..=1000) {
        // on the plateau f = 1, so |x̃| ≤ (1 − ε/2)|x| with ε ∈ (0, 1]
        let e = q(eps, 1000);
        let s = spec(e.clone());
        let mag = q(x, 100);
        let st = State::axis_rational([mag.clone(), q(1, 2) + q(t, 400), q(1, 5)]);
        let out = apply_bump(&s, &st, &cfg()).unwrap();
        let kappa = Rational::from(1) - Rational::from(&e / 2u32);
        let got = out.0[0].magnitude().unwrap();
        prop_assert!(got.hi_rational() <= kappa * mag);
    }

    #[test]
    fn cartesian_branch_matches_exact(x in 1i64..=200, t in 0i64..=100, eps in 1i64..=100) {
        let s = spec(q(eps, 100));
        let st = State::axis_rational([q(x, 100), q(1, 2) + q(t, 400), q(1, 5)]);
        let exact = apply_bump(&s, &st, &cfg()).unwrap().to_f64();
        let float = apply_bump_f64(&s, st.to_f64(), 1, &cfg()).unwrap();
        for k in 0..6 {
            prop_assert!((exact[k] - float[k]).abs() < 1e-12, "{k}: {} vs {}", exact[k], float[k]);
        }
    }

    #[test]
    fn other_factor_bit_exact(v in active_state(), w in prop::array::uniform2(-10.0f64..10.0)) {
        let s = wide_spec(q(1, 2));
        let mut v = v;
        v[4] = w[0];
        v[5] = w[1];
        let out = apply_bump_f64(&s, v, 1, &cfg()).unwrap();
        prop_assert_eq!(out[4].to_bits(), v[4].to_bits());
        prop_assert_eq!(out[5].to_bits(), v[5].to_bits());
    }
}

#[test]
fn contraction_sweep() {
    // e^{−ε} ≤ 1 − ε/2 on (0, 1], certified with an upper enclosure
    for k in 1..=10_000i64 {
        let e = q(k, 10_000);
        let up = Interval::point(&e, 128).neg().exp().hi_rational();
        assert!(up <= Rational::from(1) - Rational::from(&e / 2u32), "eps = {e}");
    }
}

#[test]
fn exact_inverse_on_axis() {
    let s = BumpSpec::new(3, 2, q(1, 4), q(1, 32), Amplitude::ln2()).unwrap();
    let st = State::axis_rational([q(1, 8), q(1, 2), q(1, 4)]);
    let f = apply_bump(&s, &st, &cfg()).unwrap();
    assert_eq!(f.0[1], PlanePoint::axis_rational(q(1, 4)));
    assert_eq!(apply_bump_inverse(&s, &f, &cfg()).unwrap(), st);
}

#[test]
fn hyperbolic_flow_off_plateau_conserves_g() {
    // g_R is a first integral of its own flow, including on the cutoff ramp
    let c = cfg();
    let p = [2.5, 0.3];
    let (out, b) = hyperbolic_time1(p, 0.4, &c).unwrap();
    assert_eq!(b, Branch::Numeric);
    let g = |p: [f64; 2]| orbitcert::profiles::eval_g(p[0], p[1], 1.0, 2.0);
    assert!((g(out) - g(p)).abs() < 1e-10);
    let h = HDescriptor::Coupling { strength: 0.4, r: 1.0, alpha: 2.0 };
    let back = numeric_flow(&h, -1.0, out, &StepControl { tol: 1e-14, ..Default::default() }).unwrap();
    assert!((back[0] - p[0]).abs() < 1e-10 && (back[1] - p[1]).abs() < 1e-10);
}
