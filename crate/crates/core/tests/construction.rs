use std::sync::OnceLock;
use std::time::Instant;

use orbitcert::construction::{
    inductive_step, read_certificates, run_construction, verify_certificates, write_certificates, CertificateFile,
    ConstructionConfig, EtaSchedule, StepSettings, REPLAY_TOL,
};
use orbitcert::flows::{FlowConfig, State};
use orbitcert::mechanism::{step_f64, MapProgram, RotF64, BRUTE_FORCE_CAP};
use orbitcert::numeric::Real;
use orbitcert::rotations::{certify_density, Frequency3};
use rug::{Integer, Rational};

const PREC: u32 = 256;

fn q(a: i64, b: i64) -> Rational {
    Rational::from((a, b))
}

fn cube_recip(q: &Integer) -> Rational {
    Rational::from((Integer::from(1), Integer::from(q * q) * q))
}

fn five_stages() -> &'static CertificateFile {
    static FILE: OnceLock<CertificateFile> = OnceLock::new();
    FILE.get_or_init(|| {
        let t = Instant::now();
        let f = run_construction(&ConstructionConfig::default_toy().unwrap()).unwrap();
        eprintln!("5-stage construction: {:?}", t.elapsed());
        f
    })
}

fn two_stages() -> &'static CertificateFile {
    static FILE: OnceLock<CertificateFile> = OnceLock::new();
    FILE.get_or_init(|| {
        let mut cfg = ConstructionConfig::default_toy().unwrap();
        cfg.stages = 2;
        run_construction(&cfg).unwrap()
    })
}

/// Forward orbit of `program` from `v`: the state after each of `ms` and the
/// per-factor sup of |s_i| over each segment between consecutive entries.
fn orbit_segments(program: &MapProgram, v: [f64; 6], ms: &[u64], flow: &FlowConfig) -> (Vec<[f64; 6]>, Vec<[f64; 3]>) {
    let rot = RotF64::new(&program.omega, 1);
    let modulus = |s: &[f64; 6], i: usize| s[2 * i].hypot(s[2 * i + 1]);
    let (mut s, mut m) = (v, 0u64);
    let mut hits = vec![];
    let mut sups = vec![];
    for &end in ms {
        let mut sup = [0.0f64; 3];
        for i in 0..3 {
            sup[i] = modulus(&s, i);
        }
        while m < end {
            s = step_f64(program, &rot, s, 1, flow).unwrap();
            m += 1;
            for i in 0..3 {
                sup[i] = sup[i].max(modulus(&s, i));
            }
        }
        hits.push(s);
        sups.push(sup);
    }
    (hits, sups)
}

fn upper(x: &Real) -> Rational {
    x.hi_rational()
}

#[test]
fn inductive_step_meets_every_postcondition() {
    let mut cfg = ConstructionConfig::default_toy().unwrap();
    cfg.omega0 = Frequency3::from_pairs([(1, 4), (1, 8), (1, 2)]).unwrap();
    cfg.x0 = [q(1, 8), q(1, 8), q(1, 8)];
    cfg.stages = 0;
    let base = run_construction(&cfg).unwrap();
    let s0 = &base.stages[0];
    let mut cfg1 = cfg.clone();
    cfg1.prec = base.precision_bits;
    let settings = StepSettings::from_config(&cfg1, 1).unwrap();
    let eta = EtaSchedule::new(&cfg.params, None, PREC).unwrap().first();

    let t = Instant::now();
    let st = inductive_step(&s0.program, &s0.z, &eta, &settings).unwrap();
    assert!(t.elapsed().as_secs_f64() < 60.0, "{:?}", t.elapsed());
    assert!(st.postconditions.iter().all(|(_, ok)| *ok), "{:?}", st.postconditions);

    let w = &st.omega_bar;
    let (q1, q2, q3) = (w.q(0), w.q(1), w.q(2));
    // q̄₃ | q̄₁ | q̄₂
    assert!(q1.is_divisible(q3) && q2.is_divisible(q1));
    // |ω̄ − ω| ≤ η
    for i in 0..3 {
        assert!(Rational::from(w.get(i) - s0.omega.get(i)).abs() <= eta);
    }
    let x = s0.x().unwrap();
    for i in 0..3 {
        assert!(st.x_bar[i].lo_rational() > 0);
        assert!(upper(&st.x_bar[i]) <= Rational::from(&x[i].lo_rational() / 2u32));
    }
    assert!(st.x_bar[1].lo_rational() >= Rational::from((Integer::from(1), q2.clone())));
    // x̂₁ − x̄₁ > q̄₁⁻³
    assert!(Rational::from(st.x_hat[0].lo_rational() - upper(&st.x_bar[0])) > cube_recip(q1));
    // density inequalities 1/q̄₃, q̄₃/q̄₁, q̄₁/q̄₂ < η
    assert!(Rational::from((Integer::from(1), q3.clone())) < eta);
    assert!(Rational::from((q3.clone(), q1.clone())) < eta);
    assert!(Rational::from((q1.clone(), q2.clone())) < eta);
    // admissibility margins
    assert!(cube_recip(q1) <= Rational::from(&st.x_hat[0].lo_rational() / 10u32));
    assert!(cube_recip(q3) <= Rational::from(&x[2].lo_rational() / 10u32));
    // the stage map is the old program plus the three new bumps
    assert_eq!(st.program.bumps.len(), s0.program.bumps.len() + 3);
    assert_eq!(&st.program.bumps[..s0.program.bumps.len()], &s0.program.bumps[..]);
    assert_eq!(st.n, Integer::from(&st.phases[0].n + &st.phases[1].n) + &st.phases[2].n);

    // the float preimage, when N is within the brute-force cap, reaches z̄
    // along an orbit inside the envelope
    let n = st.n.to_u64().unwrap();
    match &st.z_prime {
        Some(zp) => {
            let (hits, sups) = orbit_segments(&st.program, zp.state, &[n], &settings.flow);
            let zb = st.z_bar.to_f64();
            let hit = (0..6).map(|k| (hits[0][k] - zb[k]).abs()).fold(0.0, f64::max);
            assert!(hit <= REPLAY_TOL, "hit error {hit}");
            for i in 0..3 {
                assert!(sups[0][i] <= (1.0 + eta.to_f64()) * x[i].to_f64());
            }
        }
        None => assert!(n > BRUTE_FORCE_CAP),
    }
}

#[test]
fn five_stage_loop_properties() {
    let f = five_stages();
    let cfg = &f.config;
    let st = &f.stages;
    assert_eq!(st.len(), 6);
    assert!(f.limit_report.all_ok);

    // x_i⁽ⁿ⁾ ≤ x_i⁽⁰⁾·2⁻ⁿ, exactly
    for (n, c) in st.iter().enumerate() {
        let x = c.x().unwrap();
        for i in 0..3 {
            let b = Rational::from(&cfg.x0[i] / (Integer::from(1) << n as u32));
            assert!(upper(&x[i]) <= b, "stage {n} x{}", i + 1);
        }
    }
    let etas: Vec<Rational> = st.iter().skip(1).map(|c| c.eta.clone().unwrap()).collect();
    for n in 1..st.len() {
        let eta = &etas[n - 1];
        // |ω⁽ⁿ⁾ − ω⁽ⁿ⁻¹⁾| ≤ η⁽ⁿ⁾
        for i in 0..3 {
            assert!(Rational::from(st[n].omega.get(i) - st[n - 1].omega.get(i)).abs() <= *eta);
        }
        // the schedule rule η⁽ⁿ⁺¹⁾·2q̄₂⁽ⁿ⁾ ≤ η⁽ⁿ⁾, which forces the tail bound
        if n + 1 < st.len() {
            let next = &etas[n];
            assert!(Rational::from(next * Integer::from(st[n].omega.q(1) * 2u32)) <= *eta);
        }
    }
    // Σ_{k>n} η⁽ᵏ⁾ ≤ η⁽ⁿ⁾/q̄₂⁽ⁿ⁾: computed terms plus the geometric bound beyond
    for n in 1..st.len() {
        let last = st.len() - 1;
        let mut sum = Rational::from(&etas[last - 1] / st[last].omega.q(1)) * q(2, 3);
        for e in &etas[n..] {
            sum += e;
        }
        assert!(sum <= Rational::from(&etas[n - 1] / st[n].omega.q(1)), "tail at stage {n}");
    }
    // norm ledger total ≤ γ
    let ledger = st.last().unwrap().ledger_ln.interval(PREC).exp();
    assert!(ledger.hi_rational() <= cfg.params.gamma);
    for c in st.iter().skip(1) {
        let entry = c.norm_entry_ln.interval(PREC).exp();
        assert!(entry.hi_rational() <= *c.eta.as_ref().unwrap());
    }

    // brute-force replay from z₀⁽¹⁾ with the composed map
    let s1 = &st[1];
    let z0 = s1.z0.as_ref().expect("stage 1 initial point").to_f64();
    let ms = [st[0].m.to_u64().unwrap(), s1.m.to_u64().unwrap()];
    let flow = FlowConfig::from_params(&cfg.params);
    let t = Instant::now();
    let (hits, sups) = orbit_segments(&s1.program, z0, &ms, &flow);
    eprintln!("replay of {} steps: {:?}", ms[1], t.elapsed());
    let z1 = s1.z.to_f64();
    let hit = (0..6).map(|k| (hits[1][k] - z1[k]).abs()).fold(0.0, f64::max);
    assert!(hit <= 1e-8, "hit error {hit}");
    let rec = s1.replay.as_ref().unwrap();
    assert!((rec.hit_error - hit).abs() <= 1e-12);
    // sup over [M⁽⁰⁾, M⁽¹⁾] ≤ (1+η⁽¹⁾)·max_i x_i⁽⁰⁾
    let x0max = st[0].x().unwrap().iter().map(|v| v.to_f64()).fold(0.0, f64::max);
    let sup = sups[1].iter().cloned().fold(0.0, f64::max);
    assert!(sup <= (1.0 + etas[0].to_f64()) * x0max, "{sup} vs {x0max}");
    // later stages are beyond the brute-force cap
    for c in st.iter().skip(2) {
        assert!(c.m > 10_000_000u64 || c.z0.is_some());
    }
}

#[test]
fn nonresonance_margins_per_stage() {
    let f = five_stages();
    let st = &f.stages;
    for n in 1..st.len() {
        let c = &st[n];
        let eta = c.eta.clone().unwrap();
        let t = Instant::now();
        let d = certify_density(&c.omega, &eta, true).unwrap();
        assert!(d.certified(), "stage {n}");
        assert_eq!(c.density_cert.as_ref(), Some(&d));
        let (q1, q2, q3) = (c.omega.q(0), c.omega.q(1), c.omega.q(2));
        let ineq = [
            Rational::from((Integer::from(1), q3.clone())) < eta,
            Rational::from((q3.clone(), q1.clone())) < eta,
            Rational::from((q1.clone(), q2.clone())) < eta,
        ];
        assert_eq!(d.inequalities, ineq);
        // grid checked where it fits in 10⁶ cells
        let cells = Rational::from(eta.recip_ref()).ceil().numer().to_u64().map(|k| k.pow(3));
        if cells.is_some_and(|c| c <= 1_000_000) && q2.to_u64().is_some_and(|p| p <= 1_000_000) {
            assert_eq!(d.grid_confirmed, Some(true));
        }
        // the tail perturbation moves m·ω by at most q̄₂·Σ_{k>n}η⁽ᵏ⁾ ≤ η
        let tail: Rational = st[n + 1..].iter().map(|c| c.eta.clone().unwrap()).sum::<Rational>()
            + Rational::from(st.last().unwrap().eta.as_ref().unwrap() / st.last().unwrap().omega.q(1));
        assert!(Rational::from(&tail * q2) <= eta);
        assert!(t.elapsed().as_secs_f64() < 60.0);
    }
}

/// `b` encloses `a`: exact values are kept, enclosures may only widen.
fn encloses(b: &Real, a: &Real) -> bool {
    match (a, b) {
        (Real::Exact(x), Real::Exact(y)) => x == y,
        _ => b.lo_rational() <= a.lo_rational() && a.hi_rational() <= b.hi_rational(),
    }
}

#[test]
fn certificates_round_trip_and_verify() {
    let f = two_stages();
    let text = write_certificates(f).unwrap();
    let back = read_certificates(&text).unwrap();
    assert_eq!(back.config, f.config);
    assert_eq!(back.precision_bits, f.precision_bits);
    for (a, b) in f.stages.iter().zip(&back.stages) {
        assert_eq!((&a.omega, &a.program, &a.m, &a.eta), (&b.omega, &b.program, &b.m, &b.eta));
        assert_eq!((&a.z0, &a.replay, &a.density_cert), (&b.z0, &b.replay, &b.density_cert));
        let (xa, xb) = (a.x().unwrap(), b.x().unwrap());
        for i in 0..3 {
            assert!(encloses(&xb[i], &xa[i]));
        }
        assert!(encloses(&b.norm_entry_ln, &a.norm_entry_ln));
        assert!(encloses(&b.ledger_ln, &a.ledger_ln));
    }
    let t = Instant::now();
    let report = verify_certificates(&back, true);
    eprintln!("verify with replay: {:?}", t.elapsed());
    assert!(report.ok, "{:?}", report.failures().collect::<Vec<_>>());
}

#[test]
fn verifier_names_mutated_invariants() {
    let f = two_stages();
    let mutate = |edit: &dyn Fn(&mut CertificateFile), want: &str| {
        let mut g = f.clone();
        edit(&mut g);
        let r = verify_certificates(&g, false);
        assert!(!r.ok, "{want}: accepted");
        assert!(r.failures().any(|c| c.invariant == want), "{want}: {:?}", r.failures().collect::<Vec<_>>());
    };
    mutate(&|g| g.stages[2].m += 1, "step_count");
    mutate(&|g| g.stages[2].eta = Some(Rational::from(g.stages[2].eta.as_ref().unwrap() / 2u32)), "eta_schedule");
    mutate(&|g| g.stages[1].admissibility_ok = false, "admissibility");
    mutate(
        &|g| {
            let w = &g.stages[1].omega;
            g.stages[1].omega = w.with(1, Rational::from((Integer::from(1), w.q(1).clone() * 3u32))).unwrap();
        },
        "chain",
    );
    mutate(
        &|g| {
            let mut x = g.stages[2].x().unwrap();
            x[0] = x[0].mul(&Real::Exact(q(4, 1)), PREC);
            g.stages[2].z = State::axis(x);
        },
        "halving",
    );
    mutate(&|g| g.schema_version += 1, "schema");
}

#[test]
fn zero_stages_and_enlarged_first_denominator() {
    let mut cfg = ConstructionConfig::default_toy().unwrap();
    cfg.stages = 0;
    let f = run_construction(&cfg).unwrap();
    assert_eq!(f.stages.len(), 1);
    assert!(f.limit_report.all_ok);
    assert!(f.limit_report.q2_0_enlarged_from.is_none());
    assert!(verify_certificates(&f, true).ok);

    // γ = 2⁻ᵏ just below the stage-0 map norm forces q₂⁽⁰⁾ up
    cfg.omega0 = Frequency3::from_pairs([(1, 2), (1, 4), (1, 2)]).unwrap();
    cfg.x0 = [q(1, 4), q(1, 4), q(1, 4)];
    let f = run_construction(&cfg).unwrap();
    assert!(f.limit_report.q2_0_enlarged_from.is_none());
    let ln = f.stages[0].norm_entry_ln.interval(PREC);
    let k = (-ln.lo().to_f64() / std::f64::consts::LN_2).ceil() as u32;
    cfg.params.gamma = Rational::from((Integer::from(1), Integer::from(1) << k));
    let f = run_construction(&cfg).unwrap();
    let from = f.limit_report.q2_0_enlarged_from.clone().expect("enlarged");
    assert_eq!(from, *cfg.omega0.q(1));
    assert!(f.limit_report.q2_0 > from);
    assert!(f.limit_report.q2_0.is_divisible(&from));
    let norm = f.stages[0].norm_entry_ln.interval(PREC).exp();
    assert!(norm.hi_rational() <= Rational::from(&cfg.params.gamma / 2u32));
    assert!(verify_certificates(&f, true).ok);
}

#[test]
fn config_rejects_bad_input() {
    let mut cfg = ConstructionConfig::default_toy().unwrap();
    cfg.x0[1] = q(1, 64);
    assert!(run_construction(&cfg).is_err());
    let mut cfg = ConstructionConfig::default_toy().unwrap();
    cfg.omega0 = Frequency3::from_pairs([(1, 3), (1, 8), (1, 2)]).unwrap();
    assert!(matches!(run_construction(&cfg), Err(orbitcert::Error::ChainViolation(_))));
    assert!(read_certificates("").is_err());
    assert!(read_certificates("{}").is_err());
}
