//! Outage quantiles α_E, α_B that turn the stage-1 outage constraints into
//! deterministic path-loss constraints, and an empirical secrecy-outage
//! estimator for verifying stage-2 designs.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{cascade, link_gains, ChannelSample, EveStatModel};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::params::SystemParams;
use crate::rng::{complex_normal, stream, Purpose};
use crate::scalar::Real;

/// Amplitude `a = κM√(N_t P)/(κ+1)` of the aligned LoS term and variance
/// `s² = 2κMP/(κ+1)²` of the complex Gaussian fluctuation `g`.
///
/// Eve's normalized gain is modeled as `(a + |g|)²` and Bob's as `(a − |g|)²`.
pub fn gamma_scale<T: Real>(p: &SystemParams<T>) -> (T, T) {
    let k = p.rician_k;
    let m = T::from_usize(p.n_irs).expect("count");
    let nt = T::from_usize(p.n_tx).expect("count");
    let k1 = k + T::one();
    let a = k * m * (nt * p.tx_power).sqrt() / k1;
    let s_sq = T::lit(2.0) * k * m * p.tx_power / (k1 * k1);
    (a, s_sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantileMethod {
    Analytic,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantilePair<T = f64> {
    /// Upper quantile F_E^{-1}(1 − p_out) of Eve's gain.
    pub alpha_e: T,
    /// Lower quantile F_B^{-1}(p_out) of Bob's gain.
    pub alpha_b: T,
    pub method: QuantileMethod,
    /// True when the Bob quantile hit the top of its bracket `a²`.
    pub saturated: bool,
}

fn check_p_out<T: Real>(p_out: T) -> Result<()> {
    if p_out > T::zero() && p_out < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            field: "p_out",
            reason: format!("{p_out:?} outside (0, 1)"),
        })
    }
}

/// CDF of `(a − |g|)²` on `0 <= t <= a²`.
pub fn bob_gain_cdf<T: Real>(t: T, a: T, s_sq: T) -> T {
    let r = t.max(T::zero()).sqrt();
    (-(a - r).powi(2) / s_sq).exp() - (-(a + r).powi(2) / s_sq).exp()
}

/// Closed-form α_E and bisection α_B (relative tolerance 1e-10).
pub fn analytic_quantiles<T: Real>(p: &SystemParams<T>, p_out: T) -> Result<QuantilePair<T>> {
    check_p_out(p_out)?;
    let (a, s_sq) = gamma_scale(p);
    let alpha_e = (a + (-s_sq * p_out.ln()).sqrt()).powi(2);
    let top = a * a;
    let mut saturated = false;
    let alpha_b = if !(s_sq > T::zero()) || !(top > T::zero()) {
        top
    } else if bob_gain_cdf(top, a, s_sq) <= p_out {
        saturated = true;
        top
    } else {
        let (mut lo, mut hi) = (T::zero(), top);
        let tol = T::lit(1e-10);
        for _ in 0..400 {
            if hi - lo <= tol * hi {
                break;
            }
            let mid = (lo + hi) * T::lit(0.5);
            if bob_gain_cdf(mid, a, s_sq) < p_out {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * T::lit(0.5)
    };
    Ok(QuantilePair {
        alpha_e,
        alpha_b,
        method: QuantileMethod::Analytic,
        saturated,
    })
}

/// Empirical quantiles from `samples` draws of `|g|`.
pub fn monte_carlo_quantiles(p: &SystemParams, p_out: f64, samples: usize, seed: u64) -> Result<QuantilePair> {
    check_p_out(p_out)?;
    if samples == 0 {
        return Err(Error::InvalidParam {
            field: "samples",
            reason: "must be positive".into(),
        });
    }
    let (a, s_sq) = gamma_scale(p);
    let s = s_sq.sqrt();
    let mags: Vec<f64> = (0..samples as u64)
        .map(|i| complex_normal(&mut stream(seed, Purpose::Quantile, i)).norm() * s)
        .collect();
    let mut ge: Vec<f64> = mags.iter().map(|g| (a + g).powi(2)).collect();
    let mut gb: Vec<f64> = mags.iter().map(|g| (a - g).powi(2)).collect();
    let alpha_e = empirical_quantile(&mut ge, 1.0 - p_out);
    let alpha_b = empirical_quantile(&mut gb, p_out);
    Ok(QuantilePair {
        alpha_e,
        alpha_b,
        method: QuantileMethod::MonteCarlo { samples, seed },
        saturated: false,
    })
}

/// Order statistic at rank ⌈q·n⌉.
pub fn empirical_quantile(v: &mut [f64], q: f64) -> f64 {
    let n = v.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, x, _) = v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *x
}

pub fn quantiles(p: &SystemParams, p_out: f64, method: QuantileMethod) -> Result<QuantilePair> {
    match method {
        QuantileMethod::Analytic => analytic_quantiles(p, p_out),
        QuantileMethod::MonteCarlo { samples, seed } => monte_carlo_quantiles(p, p_out, samples, seed),
    }
}

/// Fraction of draws below a rate target, with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub n: usize,
}

impl OutageEstimate {
    pub fn from_counts(hits: usize, n: usize) -> Self {
        let p_hat = hits as f64 / n as f64;
        Self {
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
            n,
        }
    }
}

/// Estimate Pr{C_B − C_E < target_r} with Bob's channel fixed to the
/// realization and Eve's drawn from `eve` (fresh IRS–Eve NLoS per draw).
#[allow(clippy::too_many_arguments)]
pub fn empirical_secrecy_outage(
    p: &SystemParams,
    channel: &ChannelSample,
    eve: &EveStatModel,
    f: &DVector<Complex64>,
    phi: &DVector<Complex64>,
    target_r: f64,
    n_draws: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    if n_draws == 0 {
        return Err(Error::InvalidParam {
            field: "n_draws",
            reason: "must be positive".into(),
        });
    }
    let sigma_sq = p.noise_power;
    let g_ab = cascade(&channel.h_ib, &channel.h_ai)?;
    let c_b = (1.0 + phi.dotc(&(g_ab * f)).norm_sqr() / sigma_sq).log2();
    // φ^H diag(h) H f = Σ conj(φ_m)·w_m·h_m with w = H f
    let w = &eve.h_ai * f;
    let coef: Vec<Complex64> = (0..w.len()).map(|m| phi[m].conj() * w[m]).collect();
    let mean: Complex64 = coef.iter().zip(eve.h_ie_mean.iter()).map(|(c, h)| c * h).sum();
    let s = eve.irs_eve_var.sqrt();
    let mut hits = 0usize;
    for i in 0..n_draws as u64 {
        let mut rng = stream(seed, Purpose::Verification, i);
        let fluct: Complex64 = coef.iter().map(|c| c * complex_normal(&mut rng)).sum();
        let c_e = (1.0 + (mean + fluct * s).norm_sqr() / sigma_sq).log2();
        if !(c_b - c_e >= target_r) {
            hits += 1;
        }
    }
    Ok(OutageEstimate::from_counts(hits, n_draws))
}

/// Results of the two deterministic stage-1 outage transformations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundCheck {
    pub holds_e: bool,
    pub holds_b: bool,
}

/// Evaluate `α_E <= (2^{R_E} − 1)σ²/(L_AI L_IE)` and
/// `α_B >= (2^{R_B} − 1)σ²/(L_AI L_IB)` at `omega_i` (Eve at `p.eve_loc`).
///
/// Both sides are compared with a relative slack of 1e-12 so that rate
/// targets computed from the same quantiles test as tight.
pub fn stage1_outage_bound_check<T: Real>(
    p: &SystemParams<T>,
    omega_i: &Vec2<T>,
    r_b: T,
    r_e: T,
    q: &QuantilePair<T>,
) -> Result<BoundCheck> {
    let g = link_gains(p, omega_i, &p.eve_loc)?;
    let two = T::lit(2.0);
    let slack = T::lit(1e-12);
    let rhs_e = (two.powf(r_e) - T::one()) * p.noise_power / (g.l_ai * g.l_ie);
    let rhs_b = (two.powf(r_b) - T::one()) * p.noise_power / (g.l_ai * g.l_ib);
    Ok(BoundCheck {
        holds_e: q.alpha_e <= rhs_e * (T::one() + slack),
        holds_b: q.alpha_b * (T::one() + slack) >= rhs_b,
    })
}
