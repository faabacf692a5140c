use approx::assert_relative_eq;
use irs_secrecy::pipeline::*;
use irs_secrecy::placement::worst_eve;
use irs_secrecy::{Error, Rect, SystemParams};

#[test]
fn scheme_tags_round_trip() {
    for t in SchemeTag::ALL {
        assert_eq!(t.as_str().parse::<SchemeTag>().unwrap(), t);
        assert_eq!(t.to_string(), t.as_str());
    }
    assert!("best".parse::<SchemeTag>().is_err());
    assert!(SchemeTag::RandomLocation.random_placement());
    assert!(!SchemeTag::Proposed.random_placement());
}

#[test]
fn known_eve_design_is_verified_and_audited() {
    let p = SystemParams::reference();
    let r = two_stage_known_eve(&p, 0).unwrap();
    assert_eq!(r.scheme, SchemeTag::Proposed);
    assert!(!r.audit.stage1_read_realization);
    assert!(!r.audit.stage2_moved_irs);
    assert!(r.stage2.rate >= 0.0);
    let o = r.empirical_outage;
    assert!(o.p_hat <= p.p_out + 3.0 * o.std_err, "{o:?}");
    let nearest = p.irs_area.clamp(&p.bob_loc);
    assert!(r.placement.result.omega_i.dist(&nearest) < 10.0);
    assert_eq!(r.placement.eve_loc, p.eve_loc);
}

#[test]
fn runs_are_deterministic() {
    let p = SystemParams::reference();
    let a = run_benchmark(&p, SchemeTag::Proposed, 5).unwrap();
    let b = run_benchmark(&p, SchemeTag::Proposed, 5).unwrap();
    assert_eq!(a.stage2.rate, b.stage2.rate);
    assert_eq!(a.stage2.f_vec, b.stage2.f_vec);
    assert_eq!(a.empirical_outage, b.empirical_outage);
}

#[test]
fn mrt_uses_the_full_budget_unless_silent() {
    let p = SystemParams::reference();
    for seed in 0..3 {
        let r = run_benchmark(&p, SchemeTag::Mrt, seed).unwrap();
        if r.stage2.silent {
            assert_eq!(r.stage2.f_vec.norm(), 0.0);
        } else {
            assert_relative_eq!(r.stage2.f_vec.norm_squared(), p.tx_power, max_relative = 1e-12);
        }
    }
}

#[test]
fn random_location_depends_on_the_seed() {
    let p = SystemParams::reference();
    let s = PipelineSettings::default();
    let a = stage_one(&p, SchemeTag::RandomLocation, 1, &s).unwrap();
    let b = stage_one(&p, SchemeTag::RandomLocation, 2, &s).unwrap();
    assert_ne!(a.result.omega_i, b.result.omega_i);
    assert!(p.irs_area.contains(&a.result.omega_i));
    let c = stage_one(&p, SchemeTag::Proposed, 1, &s).unwrap();
    let d = stage_one(&p, SchemeTag::Proposed, 2, &s).unwrap();
    assert_eq!(c, d);
}

#[test]
fn line_of_sight_limit_matches_mrt() {
    let mut p = SystemParams::reference();
    p.rician_k = 1e12;
    for seed in 0..2 {
        let ao = run_benchmark(&p, SchemeTag::Proposed, seed).unwrap();
        let mrt = run_benchmark(&p, SchemeTag::Mrt, seed).unwrap();
        assert!(mrt.stage2.rate > 0.0);
        assert_relative_eq!(ao.stage2.rate, mrt.stage2.rate, max_relative = 0.01);
    }
}

#[test]
fn point_area_reduces_to_a_known_eve() {
    let p = SystemParams::reference();
    let mut pa = p.clone();
    pa.eve_area = Some(Rect::point(p.eve_loc));
    let s = PipelineSettings::default();
    let area = two_stage_suspicious_area_with(&pa, 3, &s).unwrap();
    let placement = stage_one(&p, SchemeTag::GlobalSearch, 3, &s).unwrap();
    let known = stage_two(&p, &placement, SchemeTag::Proposed, 3, &s).unwrap();
    assert_eq!(area.placement.result.omega_i, known.placement.result.omega_i);
    assert_eq!(area.placement.eve_loc, p.eve_loc);
    assert_eq!(area.stage2.rate, known.stage2.rate);
}

#[test]
fn suspicious_area_uses_the_nearest_point_of_the_area() {
    let mut p = SystemParams::reference();
    let area = Rect::new(50.0, 98.0, 5.0, 13.0);
    p.eve_area = Some(area);
    let r = two_stage_suspicious_area(&p, 0).unwrap();
    let w = r.placement.result.omega_i;
    assert_eq!(r.placement.eve_loc, worst_eve(&w, &area));
    assert_eq!(r.placement.result.worst_eve, Some(r.placement.eve_loc));
    assert_eq!(r.placement.eve_loc.y, area.y_max);
    assert!(r.empirical_outage.p_hat <= p.p_out + 3.0 * r.empirical_outage.std_err);
}

#[test]
fn suspicious_area_requires_an_area() {
    let p = SystemParams::reference();
    assert!(matches!(
        two_stage_suspicious_area(&p, 0),
        Err(Error::InvalidParam { field: "eve_area", .. })
    ));
}

#[test]
fn invalid_params_are_rejected_up_front() {
    let mut p = SystemParams::reference();
    p.n_irs = 0;
    assert!(run_benchmark(&p, SchemeTag::Proposed, 0).is_err());
}
