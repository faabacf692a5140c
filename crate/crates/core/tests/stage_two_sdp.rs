use approx::assert_relative_eq;
use irs_secrecy::channel::{achievable_rate, cascade, mrt_design, sample_channels};
use irs_secrecy::outage::empirical_secrecy_outage;
use irs_secrecy::rng::{complex_normal, stream, Purpose};
use irs_secrecy::secrecy_sdp::*;
use irs_secrecy::{Error, SystemParams, Vec2, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

type CMat = DMatrix<C64>;
type CVec = DVector<C64>;

fn rand_mat(r: usize, c: usize, seed: u64, idx: u64) -> CMat {
    let mut rng = stream(seed, Purpose::Test, idx);
    CMat::from_fn(r, c, |_, _| complex_normal(&mut rng))
}

fn rand_vec(n: usize, seed: u64, idx: u64) -> CVec {
    let mut rng = stream(seed, Purpose::Test, idx);
    CVec::from_fn(n, |_, _| complex_normal(&mut rng))
}

/// Random PSD matrix of the given rank.
fn rand_psd(n: usize, rank: usize, seed: u64, idx: u64) -> CMat {
    let x = rand_mat(n, rank, seed, idx);
    &x * x.adjoint()
}

fn min_eig(m: &CMat) -> f64 {
    SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0))
        .eigenvalues
        .min()
}

fn max_eig(m: &CMat) -> f64 {
    SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0))
        .eigenvalues
        .max()
}

fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

fn unit(v: &CVec) -> CVec {
    v.map(|z| z / z.norm())
}

fn reference_ctx(seed: u64) -> (SystemParams, Vec2, Stage2Context) {
    let p = SystemParams::reference();
    let w = Vec2::new(100.0, 20.0);
    let ch = sample_channels(&p, &w, seed).unwrap();
    let ctx = Stage2Context::new(&p, &w, &p.eve_loc, &ch).unwrap();
    (p, w, ctx)
}

#[test]
fn kronecker_identities_hold_exactly() {
    for i in 0..100u64 {
        let (m, nt) = (1 + (i % 7) as usize, 1 + (i % 5) as usize);
        let g = rand_mat(m, nt, 1, 3 * i);
        let f = rand_psd(nt, 1 + (i % 3) as usize, 2, 3 * i + 1);
        let q = rand_psd(m, 1 + (i % 4) as usize, 3, 3 * i + 2);
        let k = f.transpose().kronecker(&q);
        let vg = CVec::from_column_slice(g.as_slice());
        let lhs = vg.dotc(&(&k * &vg));
        let rhs = (&g * &f * g.adjoint() * &q).trace();
        assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0), "instance {i}");
        let tr = k.trace();
        assert!((tr - f.trace() * q.trace()).norm() <= 1e-10 * tr.norm());
        assert_relative_eq!(k.norm(), f.norm() * q.norm(), max_relative = 1e-10);
        assert_relative_eq!(max_eig(&k), max_eig(&f) * max_eig(&q), max_relative = 1e-9);
    }
}

#[test]
fn hadamard_lifting_matches_the_cascade_power() {
    // Tr(diag(h)·H·F·H^H·diag(h)^H·Q) = conj(h)^H ((H F H^H) ∘ Qᵀ) conj(h)
    for i in 0..100u64 {
        let (m, nt) = (1 + (i % 6) as usize, 1 + (i % 4) as usize);
        let h = rand_vec(m, 4, 3 * i);
        let hm = rand_mat(m, nt, 5, 3 * i + 1);
        let f = rand_psd(nt, 2, 6, 3 * i + 2);
        let q = rand_psd(m, 2, 7, 3 * i);
        let g = cascade(&h, &hm).unwrap();
        let direct = (&g * &f * g.adjoint() * &q).trace();
        let b = (&hm * &f * hm.adjoint()).component_mul(&q.transpose());
        let y = h.map(|z| z.conj());
        let lifted = y.dotc(&(&b * &y));
        assert!((direct - lifted).norm() <= 1e-10 * direct.norm().max(1.0), "instance {i}");
    }
}

#[test]
fn bti_terms_follow_their_definitions() {
    let (p, _, ctx) = reference_ctx(0);
    let s2 = p.noise_power;
    for i in 0..20u64 {
        let f = rand_psd(p.n_tx, 2, 8, i) * C64::new(0.1, 0.0);
        let q = rand_psd(p.n_irs, 3, 9, i);
        let r = 0.05 * i as f64;
        let iid = build_bti(&f, &q, &ctx.eve, &ctx.g_ab, r, s2, p.p_out).unwrap();
        let st = build_bti_with(BtiLifting::Structured, &f, &q, &ctx.eve, &ctx.g_ab, r, s2, p.p_out).unwrap();
        let bob = (&ctx.g_ab * &f * ctx.g_ab.adjoint() * &q).trace().re;
        let mean = (&ctx.eve.g_bar_ae * &f * ctx.eve.g_bar_ae.adjoint() * &q).trace().re;
        let c1 = 2f64.powf(-r) * (s2 + bob) - s2 - mean;
        assert_relative_eq!(iid.c1, c1, max_relative = 1e-9, epsilon = 1e-24);
        assert_relative_eq!(st.c1, c1, max_relative = 1e-9, epsilon = 1e-24);
        assert_relative_eq!(iid.rho_bar, -p.p_out.ln());

        let k = f.transpose().kronecker(&q);
        let d = ctx.eve.delta_ae_sq;
        assert!((&iid.a_mat - &k * C64::new(d, 0.0)).norm() <= 1e-10 * iid.a_mat.norm());
        let vg = CVec::from_column_slice(ctx.eve.g_bar_ae.as_slice());
        assert!((&iid.a_vec - &k * vg * C64::new(d.sqrt(), 0.0)).norm() <= 1e-10 * iid.a_vec.norm());

        let v = ctx.eve.irs_eve_var;
        let h = &ctx.eve.h_ai;
        let b = (h * &f * h.adjoint()).component_mul(&q.transpose());
        assert!((&st.a_mat - &b * C64::new(v, 0.0)).norm() <= 1e-10 * st.a_mat.norm());
    }
}

#[test]
fn bti_builders_check_their_inputs() {
    let (p, _, ctx) = reference_ctx(0);
    let f = CMat::identity(p.n_tx, p.n_tx);
    let q = CMat::identity(p.n_irs, p.n_irs);
    let bad = CMat::identity(2, 2);
    assert!(matches!(
        build_bti(&bad, &q, &ctx.eve, &ctx.g_ab, 0.1, p.noise_power, 0.05),
        Err(Error::Dimension(_))
    ));
    assert!(matches!(
        build_bti(&f, &q, &ctx.eve, &ctx.g_ab, 0.1, p.noise_power, 1.0),
        Err(Error::InvalidParam { .. })
    ));
}

#[test]
fn margin_vanishes_at_the_closed_form_rate() {
    let (p, w, ctx) = reference_ctx(1);
    let (f, phi) = mrt_design(&p, &w).unwrap();
    let (fm, qm) = (outer(&f), outer(&phi));
    let r = ctx.raw_rate(&fm, &qm);
    assert!(ctx.margin(&fm, &qm, r).abs() < 1e-9);
    assert!(ctx.margin(&fm, &qm, r + 0.01) > 0.0);
    assert!(ctx.margin(&fm, &qm, r - 0.01) < 0.0);
    assert_relative_eq!(ctx.rate_vec(&f, &phi), r.max(0.0));
}

#[test]
fn rank_one_extraction_contract() {
    for i in 0..100u64 {
        let n = 1 + (i % 6) as usize;
        let f = rand_psd(n, 1 + (i % n as u64) as usize, 11, 2 * i);
        let h = rand_vec(n, 12, 2 * i + 1);
        let v = rank_one_extract_f(&f, &h).unwrap();
        let want = h.dotc(&(&f * &h)).re;
        assert!((h.dotc(&v).norm_sqr() - want).abs() <= 1e-10 * want, "instance {i}");
        assert!(v.norm_squared() <= f.trace().re * (1.0 + 1e-12));
        assert!(min_eig(&(&f - outer(&v))) >= -1e-10 * f.norm().max(1.0), "instance {i}");
    }
    let z = CMat::zeros(3, 3);
    assert!(rank_one_extract_f(&z, &rand_vec(3, 1, 1)).is_err());
}

#[test]
fn psd_helpers() {
    let a = rand_psd(4, 2, 13, 0);
    let r = psd_sqrt(&a).unwrap();
    assert!((&r * &r - &a).norm() <= 1e-10 * a.norm());
    assert!(psd_sqrt(&(-CMat::identity(2, 2))).is_err());
    assert!(rank_gap(&rand_psd(4, 1, 13, 1)) < 1e-12);
    assert!(rank_gap(&CMat::identity(3, 3)) > 1.0 - 1e-12);
}

#[test]
fn power_minimization_edges() {
    let (p, _, ctx) = reference_ctx(2);
    let q = CMat::from_element(p.n_irs, p.n_irs, C64::new(1.0, 0.0));
    let z = solve_pm_sdp(&ctx, &q, 0.0).unwrap().unwrap();
    assert_eq!(z.power, 0.0);
    assert!(solve_pm_sdp(&ctx, &q, 50.0).unwrap().is_none());
    assert!(matches!(solve_pm_sdp(&ctx, &CMat::identity(2, 2), 0.1), Err(Error::Dimension(_))));
}

#[test]
fn power_minimization_is_tight_and_self_consistent() {
    let (p, w, ctx) = reference_ctx(3);
    let (f0, phi) = mrt_design(&p, &w).unwrap();
    let q = outer(&phi);
    let r = 0.5 * ctx.rate_vec(&f0, &phi);
    assert!(r > 0.0);
    let s = solve_pm_sdp(&ctx, &q, r).unwrap().unwrap();
    assert!(min_eig(&s.f_mat) >= -1e-8 * s.power);
    assert!(s.power <= p.tx_power);
    // the constraint is active at the minimum, and scaling down breaks it
    let m = ctx.margin(&s.f_mat, &q, r);
    assert!(m <= 1e-6 && m > -1e-3, "margin {m}");
    assert!(ctx.margin(&(&s.f_mat * C64::new(0.95, 0.0)), &q, r) > 0.0);
    // auxiliaries sit at the quantities they bound (noise-normalized)
    let t = build_bti_with(BtiLifting::Structured, &s.f_mat, &q, &ctx.eve, &ctx.g_ab, r, 1.0, p.p_out).unwrap();
    let a = t.a_mat / C64::new(p.noise_power, 0.0);
    let av = t.a_vec / C64::new(p.noise_power, 0.0);
    let norm = (a.norm_squared() + 2.0 * av.norm_squared()).sqrt();
    assert_relative_eq!(s.zeta, norm, max_relative = 1e-3);
    assert_relative_eq!(s.upsilon, max_eig(&a).max(0.0), max_relative = 1e-3, epsilon = 1e-9);
}

#[test]
fn beamformer_bisection_contract() {
    let (p, _, ctx) = reference_ctx(4);
    let q = CMat::from_element(p.n_irs, p.n_irs, C64::new(1.0, 0.0));
    let eps = 1e-3;
    let b = bisect_beamformer(&ctx, &q, 0.0, ctx.r_hi, eps).unwrap();
    assert!(!b.lower_infeasible);
    let at = solve_pm_sdp(&ctx, &q, b.rate).unwrap().unwrap();
    assert!(at.power <= p.tx_power * (1.0 + 1e-9));
    let above = solve_pm_sdp(&ctx, &q, b.rate + 2.0 * eps).unwrap();
    assert!(above.is_none_or(|s| s.power > p.tx_power));
    let expect = 1 + (ctx.r_hi / eps).log2().ceil() as usize;
    assert!(b.probes <= expect + 1, "{} probes", b.probes);

    let hi = bisect_beamformer(&ctx, &q, b.rate + 0.1, ctx.r_hi.max(b.rate + 1.0), eps).unwrap();
    assert!(hi.lower_infeasible);
    assert_eq!(hi.rate, 0.0);
    assert!(bisect_beamformer(&ctx, &q, 1.0, 0.5, eps).is_err());
}

#[test]
fn phase_feasibility_contract() {
    let (p, w, ctx) = reference_ctx(5);
    let (f, phi0) = mrt_design(&p, &w).unwrap();
    let fm = outer(&f);
    let ones = solve_phase_feasibility(&ctx, &fm, 0.0).unwrap().unwrap();
    assert_eq!(ones, CMat::from_element(p.n_irs, p.n_irs, C64::new(1.0, 0.0)));
    let r = ctx.rate_vec(&f, &phi0);
    let q = solve_phase_feasibility(&ctx, &fm, r).unwrap().expect("the MRT phases are feasible");
    for k in 0..p.n_irs {
        assert!((q[(k, k)].re - 1.0).abs() < 1e-7);
    }
    assert!(min_eig(&q) >= -1e-7);
    assert!(ctx.margin(&fm, &q, r) <= 1e-6);
    assert!(solve_phase_feasibility(&ctx, &fm, ctx.r_hi + 1.0).unwrap().is_none());
}

#[test]
fn srocr_against_plain_randomization() {
    for seed in 0..3 {
        let (p, w, ctx) = reference_ctx(10 + seed);
        let (f, _) = mrt_design(&p, &w).unwrap();
        let fm = outer(&f);
        let b = bisect_phase(&ctx, &fm, 0.0, ctx.r_hi, 1e-3).unwrap();
        assert!(!b.lower_infeasible);
        let s = srocr_rank_one(&ctx, &b.mat, &fm, b.rate, &SrocrSettings::default()).unwrap();
        let only = SrocrSettings {
            randomization_only: true,
            ..SrocrSettings::default()
        };
        let g = srocr_rank_one(&ctx, &b.mat, &fm, b.rate, &only).unwrap();
        assert_eq!(g.path, Recovery::Gaussian);
        assert!(s.phi.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert_relative_eq!(s.rate, ctx.rate_vec(&f, &s.phi));
        assert!(s.rate <= b.rate + 1e-3);
        assert!(s.rate >= g.rate - 0.05, "srocr {} gaussian {}", s.rate, g.rate);
    }
}

#[test]
fn single_element_surface_uses_the_eigenvector() {
    let mut p = SystemParams::reference();
    p.n_irs = 1;
    let w = Vec2::new(100.0, 20.0);
    let ch = sample_channels(&p, &w, 0).unwrap();
    let ctx = Stage2Context::new(&p, &w, &p.eve_loc, &ch).unwrap();
    let (f, _) = mrt_design(&p, &w).unwrap();
    let q = CMat::identity(1, 1);
    let r = srocr_rank_one(&ctx, &q, &outer(&f), 0.1, &SrocrSettings::default()).unwrap();
    assert_eq!(r.path, Recovery::Eigen);
}

#[test]
fn upper_bound_dominates_every_design() {
    let (p, w, ctx) = reference_ctx(6);
    let ch = sample_channels(&p, &w, 6).unwrap();
    let g = cascade(&ch.h_ib, &ch.h_ai).unwrap();
    let bound = rate_upper_bound(&p, &w, &ch).unwrap();
    assert_eq!(bound, ctx.r_hi);
    let mut rng = stream(6, Purpose::Test, 99);
    for i in 0..200 {
        let f = unit(&rand_vec(p.n_tx, 14, i)) * C64::new((p.tx_power / p.n_tx as f64).sqrt(), 0.0);
        let phi = random_phases(p.n_irs, &mut rng);
        assert!(achievable_rate(&g, &f, &phi, p.noise_power) <= bound);
    }
}

#[test]
fn ao_is_monotone_and_feasible() {
    for m in [4, 6, 8] {
        let mut p = SystemParams::reference();
        p.n_irs = m;
        let w = Vec2::new(100.0, 20.0);
        let ch = sample_channels(&p, &w, 0).unwrap();
        let ctx = Stage2Context::new(&p, &w, &p.eve_loc, &ch).unwrap();
        let (f0, phi0) = mrt_design(&p, &w).unwrap();
        let s = alternating_optimization(&ctx, &f0, &phi0, &AoSettings::default()).unwrap();
        assert!(s.converged);
        assert!(s.trace.len() <= 31);
        for d in s.trace.windows(2) {
            assert!(d[1] >= d[0], "M = {m}: {:?}", s.trace);
        }
        let last = s.trace[s.trace.len() - 1] - s.trace[s.trace.len().saturating_sub(2)];
        assert!(last <= 1e-3);
        assert!(s.f_vec.norm_squared() <= p.tx_power * (1.0 + 1e-12));
        assert!(s.phi_vec.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        if !s.silent {
            assert_relative_eq!(s.rate, ctx.rate_vec(&s.f_vec, &s.phi_vec));
            assert!(s.rate >= ctx.rate_vec(&f0, &phi0));
        }
        assert!(s.rate <= ctx.r_hi);
    }
}

/// Designs priced with the structured lifting keep the secrecy outage at or
/// below p_out when checked against the same Eve model by simulation.
#[test]
fn structured_lifting_is_conservative() {
    for seed in 0..3 {
        let (p, w, ctx) = reference_ctx(20 + seed);
        let ch = sample_channels(&p, &w, 20 + seed).unwrap();
        let (f0, phi0) = mrt_design(&p, &w).unwrap();
        let s = alternating_optimization(&ctx, &f0, &phi0, &AoSettings::default()).unwrap();
        let est = empirical_secrecy_outage(&p, &ch, &ctx.eve, &s.f_vec, &s.phi_vec, s.rate, 10_000, seed).unwrap();
        assert!(est.p_hat <= p.p_out + 3.0 * est.std_err, "seed {seed}: {est:?}");
    }
}

/// The i.i.d. lifting ignores the correlation through the shared IRS–Eve
/// fluctuation and overstates the guaranteed rate.
#[test]
fn iid_lifting_is_not_conservative() {
    let (p, w, ctx) = reference_ctx(30);
    let ch = sample_channels(&p, &w, 30).unwrap();
    let iid = Stage2Context::new(&p, &w, &p.eve_loc, &ch).unwrap().with_lifting(BtiLifting::Iid);
    let (f, phi) = mrt_design(&p, &w).unwrap();
    let r_iid = iid.rate_vec(&f, &phi);
    let r_st = ctx.rate_vec(&f, &phi);
    assert!(r_iid > r_st);
    let est = empirical_secrecy_outage(&p, &ch, &ctx.eve, &f, &phi, r_iid, 20_000, 1).unwrap();
    assert!(est.p_hat > p.p_out + 3.0 * est.std_err, "{est:?}");
}

#[test]
fn fixed_design_reports_silence() {
    let (p, w, ctx) = reference_ctx(7);
    let (f, phi) = mrt_design(&p, &w).unwrap();
    let s = fixed_design(&ctx, &f, &phi).unwrap();
    assert_eq!(s.trace, vec![s.rate]);
    if s.silent {
        assert_eq!(s.f_vec.norm(), 0.0);
        assert_eq!(s.rate, 0.0);
    } else {
        assert_relative_eq!(s.rate, ctx.rate_vec(&f, &phi));
    }
    assert!(fixed_design(&ctx, &CVec::zeros(2), &phi).is_err());
}
