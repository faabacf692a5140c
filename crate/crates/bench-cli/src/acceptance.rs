//! The acceptance suite: ten criteria, each reported as PASS or FAIL with
//! the numbers behind the verdict. A criterion that exceeds its time budget
//! fails even if its checks hold.

use std::fmt;
use std::time::Instant;

use irs_secrecy::channel::{link_gains, linearized_cascade_fluctuation};
use irs_secrecy::outage::{analytic_quantiles, monte_carlo_quantiles};
use irs_secrecy::pipeline::{stage_one, two_stage_known_eve, PipelineSettings, SchemeTag};
use irs_secrecy::placement::{global_search_location, maxmin_location, sca_location_multistart, worst_eve};
use irs_secrecy::rng::{complex_normal, stream, Purpose};
use irs_secrecy::secrecy_sdp::{random_phases, rank_one_extract_f};
use irs_secrecy::{Rect, SystemParams, Vec2, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::config::{RunConfig, SweepAxis, SweepConfig};
use crate::sweep::{run_sweep, SweepResults};

type CMat = DMatrix<C64>;
type CVec = DVector<C64>;

#[derive(Clone, Debug)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {}: {} ({:.1} s of {:.0} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

pub const ALL: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

fn timed(id: u8, title: &'static str, budget: f64, body: impl FnOnce() -> (bool, String)) -> CriterionReport {
    let t = Instant::now();
    let (ok, detail) = body();
    let seconds = t.elapsed().as_secs_f64();
    CriterionReport {
        id,
        title,
        passed: ok && seconds < budget,
        detail,
        seconds,
        budget_seconds: budget,
    }
}

pub fn run(id: u8) -> CriterionReport {
    match id {
        1 => quantile_oracle(),
        2 => distribution_suite(),
        3 => bti_conservativeness(),
        4 => transformation_identities(),
        5 => rank_one_extraction(),
        6 => sca_vs_grid(),
        7 => monotonicity_trends(),
        8 => ao_convergence(),
        9 => worst_eve_geometry(),
        10 => deployment_near_bob(),
        _ => panic!("no acceptance criterion {id}"),
    }
}

pub fn run_all(ids: &[u8]) -> Vec<CriterionReport> {
    ids.iter().map(|&i| run(i)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn quantile_oracle() -> CriterionReport {
    timed(1, "quantile oracle", 10.0, || {
        let mut rng = stream(1, Purpose::Test, 0);
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let mut p = SystemParams::reference();
            p.rician_k = rng.random_range(0.5..20.0);
            p.n_irs = rng.random_range(2..33);
            p.n_tx = rng.random_range(1..9);
            p.tx_power = 10f64.powf(rng.random_range(-2.0..1.0));
            let p_out = rng.random_range(0.01..0.2);
            let (Ok(a), Ok(m)) = (analytic_quantiles(&p, p_out), monte_carlo_quantiles(&p, p_out, 1_000_000, i)) else {
                return (false, format!("tuple {i} errored"));
            };
            worst = worst.max(rel(m.alpha_e, a.alpha_e)).max(rel(m.alpha_b, a.alpha_b));
        }
        (worst <= 5e-3, format!("max relative gap {:.3}% over 10 tuples (limit 0.5%)", 100.0 * worst))
    })
}

fn variance(xs: &[C64]) -> f64 {
    let n = xs.len() as f64;
    let m: C64 = xs.iter().sum::<C64>() / n;
    xs.iter().map(|x| (x - m).norm_sqr()).sum::<f64>() / (n - 1.0)
}

pub fn distribution_suite() -> CriterionReport {
    timed(2, "cascade distribution suite", 30.0, || {
        let p = SystemParams::reference();
        let w = Vec2::new(100.0, 20.0);
        let k = p.rician_k;
        let m = p.n_irs as f64;
        let n = 100_000u64;
        let mut lines = Vec::new();
        let mut ok = true;
        for (name, user) in [("IB", p.bob_loc), ("IE", p.eve_loc)] {
            let Ok(g) = link_gains(&p, &w, &user) else {
                return (false, "link gains failed".into());
            };
            let l_ij = if name == "IB" { g.l_ib } else { g.l_ie };
            let entry = 2.0 * k * g.l_ai * l_ij / ((k + 1.0) * (k + 1.0));
            let draws: Vec<CMat> = (0..n)
                .map(|s| linearized_cascade_fluctuation(&p, &w, &user, s).expect("fluctuation"))
                .collect();
            let mut e_worst: f64 = 0.0;
            for r in 0..p.n_irs {
                for c in 0..p.n_tx {
                    let xs: Vec<C64> = draws.iter().map(|d| d[(r, c)]).collect();
                    e_worst = e_worst.max(rel(variance(&xs), entry));
                }
            }
            let bil = entry * m * p.tx_power;
            let mut rng = stream(2, Purpose::Test, 0);
            let mut vs = Vec::new();
            for _ in 0..10 {
                let phi = random_phases(p.n_irs, &mut rng);
                let f = CVec::from_fn(p.n_tx, |_, _| complex_normal(&mut rng));
                let f = &f * C64::new((p.tx_power / f.norm_squared()).sqrt(), 0.0);
                let xs: Vec<C64> = draws.iter().map(|d| phi.dotc(&(d * &f))).collect();
                vs.push(variance(&xs));
            }
            let b_worst = vs.iter().map(|v| rel(*v, bil)).fold(0.0, f64::max);
            let spread = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / vs.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            ok &= e_worst <= 0.03 && b_worst <= 0.03 && spread <= 0.05;
            lines.push(format!(
                "{name}: entry {:.2}%, bilinear {:.1}%, spread over (phi, f) {:.1}%",
                100.0 * e_worst,
                100.0 * b_worst,
                100.0 * spread
            ));
        }
        (ok, format!("{} (limits 3%, 3%, 5%)", lines.join("; ")))
    })
}

pub fn bti_conservativeness() -> CriterionReport {
    timed(3, "BTI conservativeness", 600.0, || {
        let p = SystemParams::reference();
        let mut worst = f64::NEG_INFINITY;
        let mut bad = Vec::new();
        for seed in 0..20 {
            match two_stage_known_eve(&p, seed) {
                Ok(r) => {
                    let o = r.empirical_outage;
                    let excess = o.p_hat - (p.p_out + 3.0 * o.std_err);
                    worst = worst.max(o.p_hat);
                    if excess > 0.0 {
                        bad.push(seed);
                    }
                }
                Err(e) => return (false, format!("seed {seed}: {e}")),
            }
        }
        (
            bad.is_empty(),
            format!("max empirical outage {worst:.4} over 20 runs; violations at seeds {bad:?}"),
        )
    })
}

fn rand_mat(r: usize, c: usize, seed: u64, idx: u64) -> CMat {
    let mut rng = stream(seed, Purpose::Test, idx);
    CMat::from_fn(r, c, |_, _| complex_normal(&mut rng))
}

fn rand_psd(n: usize, rank: usize, seed: u64, idx: u64) -> CMat {
    let x = rand_mat(n, rank, seed, idx);
    &x * x.adjoint()
}

fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn transformation_identities() -> CriterionReport {
    timed(4, "Kronecker and transformation identities", 5.0, || {
        let mut worst: f64 = 0.0;
        for i in 0..100u64 {
            let (m, nt) = (1 + (i % 8) as usize, 1 + (i % 5) as usize);
            let gb = rand_mat(m, nt, 40, 5 * i);
            let gt = rand_mat(m, nt, 41, 5 * i + 1);
            let gab = rand_mat(m, nt, 42, 5 * i + 2);
            let f = rand_psd(nt, 1 + (i % 3) as usize, 43, 5 * i + 3);
            let q = rand_psd(m, 1 + (i % 4) as usize, 44, 5 * i + 4);
            let k = f.transpose().kronecker(&q);
            let tr = |g: &CMat, h: &CMat| (g * &f * h.adjoint() * &q).trace();
            let gae = &gb + &gt;
            let full = tr(&gae, &gae);
            let f1 = tr(&gt, &gt);
            let f2 = tr(&gb, &gt);
            let mean = tr(&gb, &gb);
            let scale = full.norm().max(1.0);
            // expansion of Eve's power into the random and mean parts
            worst = worst.max((full - (f1 + C64::new(2.0 * f2.re, 0.0) + mean)).norm() / scale);
            // quadratic form of vec(G̃) and the cross term
            let vt = vec_of(&gt);
            worst = worst.max((vt.dotc(&(&k * &vt)) - f1).norm() / f1.norm().max(1.0));
            worst = worst.max((vt.dotc(&(&k * vec_of(&gb))) - f2).norm() / f2.norm().max(1.0));
            // log-difference form at its own rate, rank-one F and Q
            let fv = rand_mat(nt, 1, 45, i).column(0).into_owned();
            let phi = rand_mat(m, 1, 46, i).column(0).into_owned();
            let (f1m, q1m) = (&fv * fv.adjoint(), &phi * phi.adjoint());
            let s2 = 0.7;
            let be = phi.dotc(&(&gae * &fv)).norm_sqr();
            let bb = phi.dotc(&(&gab * &fv)).norm_sqr();
            let rs = (1.0 + bb / s2).log2() - (1.0 + be / s2).log2();
            let lhs = (&gae * &f1m * gae.adjoint() * &q1m).trace().re;
            let rhs = 2f64.powf(-rs) * (s2 + (&gab * &f1m * gab.adjoint() * &q1m).trace().re) - s2;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
        (worst <= 1e-10, format!("max relative residual {worst:.2e} over 100 instances (limit 1e-10)"))
    })
}

fn min_eig(m: &CMat) -> f64 {
    SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0)).eigenvalues.min()
}

pub fn rank_one_extraction() -> CriterionReport {
    timed(5, "rank-one beamformer extraction", 5.0, || {
        let (mut q_err, mut tr_err, mut eig): (f64, f64, f64) = (0.0, f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..100u64 {
            let n = 1 + (i % 8) as usize;
            let f = rand_psd(n, 1 + (i as usize % n), 50, 2 * i);
            let h = rand_mat(n, 1, 51, 2 * i + 1).column(0).into_owned();
            let Ok(v) = rank_one_extract_f(&f, &h) else {
                return (false, format!("instance {i} failed"));
            };
            let want = h.dotc(&(&f * &h)).re;
            q_err = q_err.max((h.dotc(&v).norm_sqr() - want).abs() / want);
            tr_err = tr_err.max(v.norm_squared() - f.trace().re);
            eig = eig.min(min_eig(&(&f - &v * v.adjoint())) / f.norm().max(1.0));
        }
        (
            q_err <= 1e-10 && tr_err <= 1e-10 && eig >= -1e-10,
            format!("Bob quadratic error {q_err:.1e}, max trace increase {tr_err:.1e}, min eig of F - ffH {eig:.1e}"),
        )
    })
}

/// `(bob, eve)` pairs: the reference geometry and five perturbations.
pub fn perturbed_geometries() -> Vec<(Vec2, Vec2)> {
    [
        ((100.0, 15.0), (95.0, 13.0)),
        ((95.0, 15.0), (90.0, 12.0)),
        ((100.0, 10.0), (96.0, 8.0)),
        ((85.0, 15.0), (80.0, 12.0)),
        ((100.0, 15.0), (90.0, 10.0)),
        ((104.0, 17.0), (98.0, 14.0)),
    ]
    .into_iter()
    .map(|((bx, by), (ex, ey))| (Vec2::new(bx, by), Vec2::new(ex, ey)))
    .collect()
}

pub fn sca_vs_grid() -> CriterionReport {
    timed(6, "SCA placement vs 0.1 m grid", 120.0, || {
        let mut ok = true;
        let mut gaps = Vec::new();
        for (bob, eve) in perturbed_geometries() {
            let mut p = SystemParams::reference();
            p.bob_loc = bob;
            p.eve_loc = eve;
            let q = analytic_quantiles(&p, p.p_out).expect("quantiles");
            let (Ok(s), Ok(g)) = (
                sca_location_multistart(&p, &q, 1e-6),
                global_search_location(&p, &q, 0.1),
            ) else {
                return (false, format!("placement failed for bob {bob:?}"));
            };
            let gap = (g.objective - s.objective) / g.objective;
            ok &= gap <= 0.01;
            gaps.push(format!("{:.2}%", 100.0 * gap));
        }
        (ok, format!("objective shortfall vs grid per geometry: {} (limit 1%)", gaps.join(", ")))
    })
}

fn trend_config(m: usize) -> RunConfig {
    RunConfig {
        n_irs: m,
        schemes: vec!["proposed".into()],
        n_seeds: 20,
        timing: false,
        ..RunConfig::default()
    }
}

fn means(r: &SweepResults, values: &[f64], scheme: SchemeTag) -> Vec<f64> {
    values
        .iter()
        .map(|&v| r.summary_for(v, scheme).map_or(f64::NAN, |s| s.mean_rate))
        .collect()
}

fn strictly(xs: &[f64], up: bool) -> bool {
    xs.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] })
}

fn fmt_means(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" / ")
}

pub fn monotonicity_trends() -> CriterionReport {
    timed(7, "monotonicity trends", 1800.0, || {
        let mut parts = Vec::new();
        let mut ok = true;
        let run = |cfg: RunConfig| -> Result<SweepResults, String> {
            let r = run_sweep(&cfg).map_err(|e| e.to_string())?;
            if r.failures() > 0 {
                return Err(format!("{} failed runs", r.failures()));
            }
            Ok(r)
        };

        let ms = [4.0, 6.0, 8.0];
        let mut c = trend_config(6);
        c.sweep = SweepConfig {
            axis: SweepAxis::NIrs,
            values: ms.to_vec(),
        };
        match run(c) {
            Ok(r) => {
                let m = means(&r, &ms, SchemeTag::Proposed);
                let up = strictly(&m, true);
                ok &= up;
                parts.push(format!("M 4/6/8: {} {}", fmt_means(&m), if up { "up" } else { "NOT up" }));
            }
            Err(e) => return (false, e),
        }

        let ps = [20.0, 25.0, 30.0];
        let mut c = trend_config(6);
        c.schemes = vec!["proposed".into(), "random_location".into()];
        c.sweep = SweepConfig {
            axis: SweepAxis::PowerDbm,
            values: ps.to_vec(),
        };
        match run(c) {
            Ok(r) => {
                let m = means(&r, &ps, SchemeTag::Proposed);
                let up = strictly(&m, true);
                let a = r.summary_for(30.0, SchemeTag::Proposed).expect("cell");
                let b = r.summary_for(30.0, SchemeTag::RandomLocation).expect("cell");
                let pooled = (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
                let margin = a.mean_rate - b.mean_rate;
                ok &= up && margin > 2.0 * pooled;
                parts.push(format!("P 20/25/30 dBm: {} {}", fmt_means(&m), if up { "up" } else { "NOT up" }));
                parts.push(format!(
                    "proposed - random location at 30 dBm: {margin:.3} vs 2 pooled SE {:.3}",
                    2.0 * pooled
                ));
            }
            Err(e) => return (false, e),
        }

        let idx = [0.0, 1.0, 2.0];
        let mut c = trend_config(6);
        c.sweep = SweepConfig {
            axis: SweepAxis::EveAreaIndex,
            values: idx.to_vec(),
        };
        match run(c) {
            Ok(r) => {
                let m = means(&r, &idx, SchemeTag::Proposed);
                let down = strictly(&m, false);
                ok &= down;
                parts.push(format!(
                    "Eve area shifted -40/-20/0 m: {} {}",
                    fmt_means(&m),
                    if down { "down" } else { "NOT down" }
                ));
            }
            Err(e) => return (false, e),
        }
        (ok, parts.join("; "))
    })
}

pub fn ao_convergence() -> CriterionReport {
    timed(8, "AO convergence", 600.0, || {
        let mut ok = true;
        let mut lines = Vec::new();
        for m in [4usize, 6, 8] {
            let mut p = SystemParams::reference();
            p.n_irs = m;
            let mut rounds = 0;
            for seed in 0..5 {
                let r = match two_stage_known_eve(&p, seed) {
                    Ok(r) => r,
                    Err(e) => return (false, format!("M = {m}, seed {seed}: {e}")),
                };
                let t = &r.stage2.trace;
                let mono = t.windows(2).all(|w| w[1] >= w[0]);
                let last = if t.len() > 1 { t[t.len() - 1] - t[t.len() - 2] } else { 0.0 };
                ok &= mono && r.stage2.converged && last <= 1e-3 && t.len() <= 31;
                rounds = rounds.max(t.len() - 1);
            }
            lines.push(format!("M = {m}: at most {rounds} rounds"));
        }
        (ok, format!("{} over 5 seeds each", lines.join(", ")))
    })
}

pub fn worst_eve_geometry() -> CriterionReport {
    timed(9, "worst-Eve geometry", 60.0, || {
        let p = SystemParams::reference();
        let q = analytic_quantiles(&p, p.p_out).expect("quantiles");
        let areas: Vec<Rect> = RunConfig::default()
            .eve_areas
            .iter()
            .map(|a| Rect::new(a[0], a[1], a[2], a[3]))
            .collect();
        let mut ok = true;
        let mut lines = Vec::new();
        for area in &areas {
            let Ok(r) = maxmin_location(&p, &q, 0.5, area) else {
                return (false, format!("max-min failed for {area:?}"));
            };
            let w = r.omega_i;
            let e = r.worst_eve.expect("worst Eve");
            let clamp = Vec2::new(w.x.clamp(area.x_min, area.x_max), w.y.clamp(area.y_min, area.y_max));
            let on_edge = e.x == area.x_min || e.x == area.x_max || e.y == area.y_min || e.y == area.y_max;
            let nearest = area.grid(0.25).iter().all(|c| w.dist(c) >= w.dist(&e) - 1e-12);
            ok &= e == clamp && on_edge && nearest;
            lines.push(format!("IRS ({:.1}, {:.1}) -> Eve ({:.1}, {:.1})", w.x, w.y, e.x, e.y));
        }
        // the same rule on many IRS positions, and through the pipeline
        let mut rng = stream(9, Purpose::Test, 0);
        for _ in 0..1000 {
            let w = Vec2::new(rng.random_range(-50.0..200.0), rng.random_range(-20.0..60.0));
            for area in &areas {
                let e = worst_eve(&w, area);
                ok &= e == Vec2::new(w.x.clamp(area.x_min, area.x_max), w.y.clamp(area.y_min, area.y_max));
            }
        }
        let mut pa = p.clone();
        pa.eve_area = Some(areas[2]);
        match stage_one(&pa, SchemeTag::Proposed, 0, &PipelineSettings::default()) {
            Ok(pl) => ok &= pl.eve_loc == worst_eve(&pl.result.omega_i, &areas[2]),
            Err(e) => return (false, e.to_string()),
        }
        (ok, format!("{} areas: {}", areas.len(), lines.join("; ")))
    })
}

pub fn deployment_near_bob() -> CriterionReport {
    timed(10, "deployment near Bob", 120.0, || {
        let eves = [(95.0, 13.0), (85.0, 10.0), (70.0, 12.0), (100.0, 5.0)];
        let bobs = [(100.0, 15.0), (90.0, 15.0), (80.0, 15.0), (60.0, 15.0), (100.0, 10.0), (40.0, 12.0)];
        let mut worst: f64 = 0.0;
        let mut worst_case = String::new();
        for e in eves {
            for b in bobs {
                let mut p = SystemParams::reference();
                p.eve_loc = Vec2::new(e.0, e.1);
                p.bob_loc = Vec2::new(b.0, b.1);
                let pl = match stage_one(&p, SchemeTag::Proposed, 0, &PipelineSettings::default()) {
                    Ok(pl) => pl,
                    Err(err) => return (false, format!("bob {b:?}, eve {e:?}: {err}")),
                };
                let d = pl.result.omega_i.dist(&p.irs_area.clamp(&p.bob_loc));
                if d > worst {
                    worst = d;
                    worst_case = format!("bob {b:?}, eve {e:?}");
                }
            }
        }
        (
            worst <= 10.0,
            format!("largest distance to the Bob-nearest point {worst:.2} m ({worst_case}) over 24 geometries (limit 10 m)"),
        )
    })
}
