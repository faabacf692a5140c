use approx::assert_relative_eq;
use irs_secrecy::channel::*;
use irs_secrecy::rng::{complex_normal, stream, Purpose};
use irs_secrecy::{Error, SystemParams, Vec2, C64};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn reference() -> SystemParams {
    SystemParams::reference()
}

fn random_phases(m: usize, seed: u64) -> DVector<C64> {
    let mut rng = stream(seed, Purpose::Test, 0);
    DVector::from_fn(m, |_, _| {
        let z = complex_normal(&mut rng);
        z / z.norm()
    })
}

fn random_beam(n: usize, power: f64, seed: u64) -> DVector<C64> {
    let mut rng = stream(seed, Purpose::Test, 1);
    let v = DVector::from_fn(n, |_, _| complex_normal(&mut rng));
    let s = (power / v.norm_squared()).sqrt();
    v * C64::new(s, 0.0)
}

fn sample_variance(xs: &[C64]) -> f64 {
    let n = xs.len() as f64;
    let mean: C64 = xs.iter().sum::<C64>() / n;
    xs.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
}

#[test]
fn derived_constants_at_2_4_ghz() {
    let (lambda, l0) = derived_constants(&reference()).unwrap();
    assert_relative_eq!(lambda, 0.12491352416666666, max_relative = 1e-14);
    assert_relative_eq!(l0, 9.880961210318492e-05, max_relative = 1e-13);
}

#[test]
fn link_gains_at_a_known_point() {
    let g = link_gains(&reference(), &Vec2::new(100.0, 20.0), &Vec2::new(95.0, 13.0)).unwrap();
    assert_relative_eq!(g.l_ai, 3.767580332759542e-09, max_relative = 1e-12);
    assert_relative_eq!(g.l_ib, 7.904768968254794e-07, max_relative = 1e-12);
    assert_relative_eq!(g.l_ie, 1.5522140665118858e-07, max_relative = 1e-12);
}

#[test]
fn zero_distance_is_rejected() {
    assert!(matches!(path_gain(0.0, 2.0, 1.0), Err(Error::DegenerateGeometry(_))));
    let p = reference();
    assert!(matches!(
        link_gains(&p, &Vec2::origin(), &p.eve_loc),
        Err(Error::DegenerateGeometry(_))
    ));
    assert!(matches!(
        los_irs_user(&p, &p.bob_loc, &p.bob_loc),
        Err(Error::DegenerateGeometry(_))
    ));
}

#[test]
fn steering_quarter_turns() {
    let v = steering(3, 0.5, 0.5).unwrap();
    let want = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0)];
    for (a, b) in v.iter().zip(want) {
        assert!((a - b).norm() < 1e-15);
    }
    assert!(matches!(steering(3, 1.5, 0.5), Err(Error::Domain(_))));
}

#[test]
fn los_components_have_expected_shapes() {
    let p = reference();
    let w = Vec2::new(60.0, 25.0);
    match los_components(&p, &w, Endpoint::Alice).unwrap() {
        LosComponent::AliceIrs(h) => {
            assert_eq!(h.shape(), (p.n_irs, p.n_tx));
            let ai = irs_arrival(&p, &w).unwrap();
            let aa = alice_steering(&p, &w).unwrap();
            assert!((h - &ai * aa.adjoint()).norm() < 1e-14);
        }
        _ => panic!("wrong component"),
    }
    match los_components(&p, &w, Endpoint::User(p.bob_loc)).unwrap() {
        LosComponent::IrsUser(h) => assert_eq!(h.len(), p.n_irs),
        _ => panic!("wrong component"),
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let a = sample_channels(&p, &w, 11).unwrap();
    let b = sample_channels(&p, &w, 11).unwrap();
    let c = sample_channels(&p, &w, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.h_ai, c.h_ai);
}

#[test]
fn samples_split_exactly_into_los_and_nlos() {
    let p = reference();
    let w = Vec2::new(80.0, 27.0);
    for seed in 0..20 {
        let s = sample_channels(&p, &w, seed).unwrap();
        assert_eq!(&s.h_ai - &s.h_ai_los, s.h_ai_nlos);
        assert_eq!(&s.h_ib - &s.h_ib_los, s.h_ib_nlos);
        assert_eq!(&s.h_ie - &s.h_ie_los, s.h_ie_nlos);
    }
}

#[test]
fn huge_rician_factor_leaves_only_los() {
    let mut p = reference();
    p.rician_k = 1e12;
    let w = Vec2::new(100.0, 20.0);
    let s = sample_channels(&p, &w, 3).unwrap();
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let los = los_alice_irs(&p, &w).unwrap() * C64::new(g.l_ai.sqrt(), 0.0);
    assert!((&s.h_ai - los).norm() / s.h_ai.norm() < 1e-5);
    assert!(s.h_ib_nlos.norm() / s.h_ib.norm() < 1e-5);
}

#[test]
fn nlos_entries_have_the_rician_variance() {
    let p = reference();
    let w = Vec2::new(90.0, 22.0);
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let k = p.rician_k;
    let mut ai = Vec::new();
    let mut ib = Vec::new();
    for seed in 0..20_000 {
        let s = sample_channels(&p, &w, seed).unwrap();
        ai.extend(s.h_ai_nlos.iter().cloned());
        ib.extend(s.h_ib_nlos.iter().cloned());
    }
    assert_relative_eq!(sample_variance(&ai), g.l_ai / (k + 1.0), max_relative = 0.01);
    assert_relative_eq!(sample_variance(&ib), g.l_ib / (k + 1.0), max_relative = 0.02);
}

/// Per-entry variance of the linearized cascade fluctuation.
#[test]
fn cascade_fluctuation_entry_variance() {
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let bob = p.bob_loc;
    let k = p.rician_k;
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let want = 2.0 * k * g.l_ai * g.l_ib / ((k + 1.0) * (k + 1.0));
    let draws: Vec<DMatrix<C64>> = (0..100_000)
        .map(|s| linearized_cascade_fluctuation(&p, &w, &bob, s).unwrap())
        .collect();
    for r in 0..p.n_irs {
        for c in 0..p.n_tx {
            let xs: Vec<C64> = draws.iter().map(|d| d[(r, c)]).collect();
            assert_relative_eq!(sample_variance(&xs), want, max_relative = 0.03);
        }
    }
}

fn bilinear_variance(p: &SystemParams, w: &Vec2, phi: &DVector<C64>, f: &DVector<C64>, n: u64) -> f64 {
    let xs: Vec<C64> = (0..n)
        .map(|s| phi.dotc(&(linearized_cascade_fluctuation(p, w, &p.bob_loc, s).unwrap() * f)))
        .collect();
    sample_variance(&xs)
}

#[test]
fn bilinear_variance_for_single_antenna_beam() {
    // with f = √P·e_k the first-order variance is 2κ·L_AI·L_IB·M·P/(κ+1)²
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let k = p.rician_k;
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let want = 2.0 * k * g.l_ai * g.l_ib * p.n_irs as f64 * p.tx_power / ((k + 1.0) * (k + 1.0));
    let mut f = DVector::zeros(p.n_tx);
    f[1] = C64::new(p.tx_power.sqrt(), 0.0);
    let phi = random_phases(p.n_irs, 5);
    assert_relative_eq!(bilinear_variance(&p, &w, &phi, &f, 100_000), want, max_relative = 0.03);
}

#[test]
fn bilinear_variance_for_general_beams() {
    // exact first-order variance: κ·L_AI·L_IB·M·(|α_A^H f|² + ‖f‖²)/(κ+1)²
    let p = reference();
    let w = Vec2::new(70.0, 28.0);
    let k = p.rician_k;
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let aa = alice_steering(&p, &w).unwrap();
    for seed in 0..3 {
        let f = random_beam(p.n_tx, p.tx_power, seed);
        let phi = random_phases(p.n_irs, 100 + seed);
        let want = k * g.l_ai * g.l_ib * p.n_irs as f64 * (aa.dotc(&f).norm_sqr() + f.norm_squared())
            / ((k + 1.0) * (k + 1.0));
        assert_relative_eq!(bilinear_variance(&p, &w, &phi, &f, 50_000), want, max_relative = 0.04);
    }
}

#[test]
fn bilinear_variance_does_not_depend_on_phases() {
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let f = random_beam(p.n_tx, p.tx_power, 9);
    let base = bilinear_variance(&p, &w, &DVector::from_element(p.n_irs, C64::new(1.0, 0.0)), &f, 20_000);
    for seed in 0..10 {
        let v = bilinear_variance(&p, &w, &random_phases(p.n_irs, 200 + seed), &f, 20_000);
        assert_relative_eq!(v, base, max_relative = 0.05);
    }
}

#[test]
fn cascade_checks_dimensions() {
    let h = DVector::from_element(3, C64::new(1.0, 0.0));
    let m = DMatrix::from_element(4, 2, C64::new(1.0, 0.0));
    assert!(matches!(cascade(&h, &m), Err(Error::Dimension(_))));
}

#[test]
fn achievable_rate_matches_direct_formula() {
    let g = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0)]);
    let f = DVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
    let phi = DVector::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
    // G f = (1 + j, 0.5); φ^H G f = 1 + j − 0.5j = 1 + 0.5j
    let r = achievable_rate(&g, &f, &phi, 0.5);
    assert_relative_eq!(r, (1.0f64 + 1.25 / 0.5).log2(), max_relative = 1e-14);
}

#[test]
fn eve_model_is_centered_on_the_mean_cascade() {
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let s = sample_channels(&p, &w, 4).unwrap();
    let e = eve_stat_model(&p, &w, &p.eve_loc, &s.h_ai).unwrap();
    let g = link_gains(&p, &w, &p.eve_loc).unwrap();
    let k = p.rician_k;
    assert!((e.realize(&DVector::zeros(p.n_irs)) - &e.g_bar_ae).norm() < 1e-30);
    assert_relative_eq!(e.irs_eve_var, g.l_ie / (k + 1.0), max_relative = 1e-14);
    assert_relative_eq!(e.delta_ae_sq, k * g.l_ai * g.l_ie / ((k + 1.0) * (k + 1.0)), max_relative = 1e-14);
    assert_eq!(e.h_ie_mean, s.h_ie_los);
    assert!(matches!(
        eve_stat_model(&p, &w, &p.eve_loc, &DMatrix::zeros(2, 2)),
        Err(Error::Dimension(_))
    ));
}

#[test]
fn mrt_reaches_the_los_coherent_gain() {
    let p = reference();
    let w = Vec2::new(100.0, 20.0);
    let (f, phi) = mrt_design(&p, &w).unwrap();
    assert_relative_eq!(f.norm_squared(), p.tx_power, max_relative = 1e-14);
    assert!(phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    let hl = los_alice_irs(&p, &w).unwrap();
    let hb = los_irs_user(&p, &w, &p.bob_loc).unwrap();
    let amp = phi.dotc(&(cascade(&hb, &hl).unwrap() * &f)).norm();
    let m = p.n_irs as f64;
    assert_relative_eq!(amp, m * (p.n_tx as f64 * p.tx_power).sqrt(), max_relative = 1e-12);
}

proptest! {
    #[test]
    fn steering_is_unit_modulus(n in 1usize..16, c in -1.0f64..=1.0, d in 0.1f64..1.0) {
        let v = steering(n, c, d).unwrap();
        prop_assert_eq!(v.len(), n);
        prop_assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        prop_assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn path_gain_decreases_with_distance(d in 0.1f64..500.0, e in 0.01f64..10.0, rho in 1.5f64..4.0) {
        let a = path_gain(d, rho, 1e-4).unwrap();
        let b = path_gain(d + e, rho, 1e-4).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn channel_shapes_follow_params(nt in 1usize..6, m in 1usize..9, seed in 0u64..1000) {
        let mut p = SystemParams::reference();
        p.n_tx = nt;
        p.n_irs = m;
        let s = sample_channels(&p, &Vec2::new(50.0, 25.0), seed).unwrap();
        prop_assert_eq!(s.h_ai.shape(), (m, nt));
        prop_assert_eq!(s.h_ib.len(), m);
        prop_assert_eq!(s.h_ie.len(), m);
    }
}
