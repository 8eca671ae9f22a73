use orbitcert::numeric::Interval;
use orbitcert::rotations::{advance, certify_density, check_chain, min_return_distance, Chain, Frequency3, Phase};
use proptest::prelude::*;
use rug::{Integer, Rational};

fn q(a: i64, b: i64) -> Rational {
    Rational::from((a, b))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Reduced p/q with 1 ≤ p < q.
fn fraction(den: u64, seed: u64) -> (u64, u64) {
    let mut p = 1 + seed % (den - 1).max(1);
    while gcd(p, den) != 1 {
        p = p % (den - 1) + 1;
    }
    (p, den)
}

/// Frequencies with q₃ | q₁ | q₂.
fn chained() -> impl Strategy<Value = Frequency3> {
    (2u64..=6, 1u64..=4, 1u64..=4, any::<[u64; 3]>()).prop_map(|(q3, a, b, s)| {
        let q1 = q3 * (a + 1);
        let q2 = q1 * (b + 1);
        Frequency3::from_pairs([fraction(q1, s[0]), fraction(q2, s[1]), fraction(q3, s[2])]).unwrap()
    })
}

/// Torus distance of a cell center to the nearest orbit point, by brute force.
fn worst_cell_gap(w: &Frequency3, n: u64) -> f64 {
    let period = w.period().to_u64().unwrap();
    let pts: Vec<[f64; 3]> = (0..period)
        .map(|m| {
            let f = |i: usize| Rational::from(w.get(i) * m).fract_floor(Integer::new()).0.to_f64();
            let v = [f(0), f(1), f(2)];
            v.map(|x| x - x.floor())
        })
        .collect();
    let d1 = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(1.0 - d)
    };
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let ctr = [(a as f64 + 0.5) / n as f64, (b as f64 + 0.5) / n as f64, (c as f64 + 0.5) / n as f64];
                let best = pts.iter().map(|p| (0..3).map(|i| d1(p[i], ctr[i])).fold(0.0, f64::max)).fold(f64::MAX, f64::min);
                worst = worst.max(best);
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn advance_is_a_group_action(p in 0i64..1000, m1 in -500i64..500, m2 in -500i64..500, b in 1i64..50, d in 2i64..60) {
        let beta = q(b, d);
        let ph = Phase::new(&q(p, 997));
        let two = advance(&advance(&ph, &Integer::from(m1), &beta), &Integer::from(m2), &beta);
        let one = advance(&ph, &Integer::from(m1 + m2), &beta);
        prop_assert_eq!(&two, &one);
        prop_assert!(*two.value() >= 0 && *two.value() < 1);
    }

    #[test]
    fn period_returns_every_phase(w in chained(), p in 0i64..1000) {
        let per = w.period();
        prop_assert!(check_chain(&w, Chain::Q3_Q1_Q2));
        prop_assert_eq!(&per, w.q(1));
        for i in 0..3 {
            let ph = Phase::new(&q(p, 991));
            prop_assert_eq!(advance(&ph, &per, w.get(i)), ph);
        }
    }

    #[test]
    fn density_inequalities_imply_grid_coverage(w in chained(), k in 2i64..=6) {
        let eta = q(1, k);
        let c = certify_density(&w, &eta, true).unwrap();
        if c.inequalities.iter().all(|&b| b) {
            prop_assert_eq!(c.grid_confirmed, Some(true));
        }
        if c.grid_confirmed == Some(true) {
            // every cell center lies within one cell width of the orbit
            let n = c.grid_cells_per_axis.unwrap();
            prop_assert!(worst_cell_gap(&w, n) <= 1.0 / n as f64 + 1e-12);
        }
    }

    #[test]
    fn min_return_distance_is_attained_at_one_step(x in 1i64..100, b in 1i64..20, d in 2i64..40) {
        prop_assume!(gcd(b as u64, d as u64) == 1);
        let beta = q(b, d);
        let xi = Interval::point(&q(x, 100), 128);
        let m = min_return_distance(&xi, &beta).unwrap();
        let xf = x as f64 / 100.0;
        let brute = (1..d)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / d as f64;
                xf * (1.0 - t.cos()).abs().max(t.sin().abs())
            })
            .fold(f64::MAX, f64::min);
        prop_assert!((m.to_f64() - brute).abs() < 1e-12);
    }
}

#[test]
fn density_fails_for_coarse_chain() {
    let w = Frequency3::from_pairs([(1, 4), (1, 8), (1, 2)]).unwrap();
    let c = certify_density(&w, &q(1, 10), true).unwrap();
    assert!(!c.certified());
    assert_eq!(c.grid_confirmed, Some(false));
}

#[test]
fn frequency_json_round_trip() {
    let w = Frequency3::from_pairs([(3, 8), (5, 16), (1, 2)]).unwrap();
    let s = serde_json::to_string(&w).unwrap();
    assert_eq!(s, r#"["3/8","5/16","1/2"]"#);
    assert_eq!(serde_json::from_str::<Frequency3>(&s).unwrap(), w);
    assert!(serde_json::from_str::<Frequency3>(r#"["2/4","1/2","1/2"]"#).is_err());
}
