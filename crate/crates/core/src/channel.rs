//! Geometry-driven channel synthesis: path gains, array responses, Rician
//! sampling, cascaded channels and rates.

use nalgebra::{DMatrix, DVector};
use num_complex::{Complex, Complex64};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::params::SystemParams;
use crate::rng::{complex_normal, stream, Purpose};
use crate::scalar::Real;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength λ_c and reference gain L0 = (λ_c/4π)².
pub fn derived_constants<T: Real>(p: &SystemParams<T>) -> Result<(T, T)> {
    if !(p.carrier_hz > T::zero()) {
        return Err(Error::InvalidParam {
            field: "carrier_hz",
            reason: "must be positive".into(),
        });
    }
    let lambda = T::lit(SPEED_OF_LIGHT) / p.carrier_hz;
    let r = lambda / (T::lit(4.0) * T::PI());
    Ok((lambda, r * r))
}

/// Large-scale gain `L = l0·d^(-rho)`.
pub fn path_gain<T: Real>(d: T, rho: T, l0: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::DegenerateGeometry(format!(
            "link distance must be positive, got {d:?}"
        )));
    }
    Ok(l0 * d.powf(-rho))
}

/// Uniform linear array response with entries `exp(-j·k·2π·spacing·c)`.
pub fn steering<T: Real>(n: usize, cos_angle: T, spacing: T) -> Result<DVector<Complex<T>>> {
    if !(cos_angle.abs() <= T::one()) {
        return Err(Error::Domain(format!(
            "direction cosine {cos_angle:?} outside [-1, 1]"
        )));
    }
    let w = -(T::lit(2.0) * T::PI() * spacing * cos_angle);
    Ok(DVector::from_fn(n, |k, _| {
        let ph = w * T::from_usize(k).expect("index");
        Complex::new(ph.cos(), ph.sin())
    }))
}

fn clamp_unit<T: Real>(c: T) -> T {
    c.max(-T::one()).min(T::one())
}

/// Direction cosine of Alice→IRS, cos φ_AI = x_I/‖ω_I‖.
fn cos_alice_irs<T: Real>(omega_i: &Vec2<T>) -> Result<T> {
    let d = omega_i.norm();
    if !(d > T::zero()) {
        return Err(Error::DegenerateGeometry("IRS placed at Alice".into()));
    }
    Ok(clamp_unit(omega_i.x / d))
}

/// α_A(φ_AI), the Alice-side array response toward the IRS.
pub fn alice_steering<T: Real>(p: &SystemParams<T>, omega_i: &Vec2<T>) -> Result<DVector<Complex<T>>> {
    steering(p.n_tx, cos_alice_irs(omega_i)?, p.element_spacing_fraction)
}

/// α_I(θ_AI) with θ_AI = π − φ_AI, the IRS-side response toward Alice.
pub fn irs_arrival<T: Real>(p: &SystemParams<T>, omega_i: &Vec2<T>) -> Result<DVector<Complex<T>>> {
    steering(p.n_irs, -cos_alice_irs(omega_i)?, p.element_spacing_fraction)
}

/// H_AI^LoS = α_I(θ_AI)·α_A(φ_AI)^H, an M×N_t rank-one unit-modulus matrix.
pub fn los_alice_irs<T: Real>(p: &SystemParams<T>, omega_i: &Vec2<T>) -> Result<DMatrix<Complex<T>>> {
    let ai = irs_arrival(p, omega_i)?;
    let aa = alice_steering(p, omega_i)?;
    Ok(DMatrix::from_fn(p.n_irs, p.n_tx, |m, n| ai[m] * aa[n].conj()))
}

/// h_IJ^LoS = α_I(φ_IJ) with cos φ_IJ = (x_J − x_I)/‖ω_J − ω_I‖.
pub fn los_irs_user<T: Real>(
    p: &SystemParams<T>,
    omega_i: &Vec2<T>,
    omega_u: &Vec2<T>,
) -> Result<DVector<Complex<T>>> {
    let d = omega_i.dist(omega_u);
    if !(d > T::zero()) {
        return Err(Error::DegenerateGeometry("IRS co-located with a user".into()));
    }
    steering(p.n_irs, clamp_unit((omega_u.x - omega_i.x) / d), p.element_spacing_fraction)
}

/// Far end of a LoS link from the IRS.
#[derive(Clone, Copy, Debug)]
pub enum Endpoint<T = f64> {
    Alice,
    User(Vec2<T>),
}

#[derive(Clone, Debug)]
pub enum LosComponent<T = f64> {
    AliceIrs(DMatrix<Complex<T>>),
    IrsUser(DVector<Complex<T>>),
}

/// LoS array-response part of the link between the IRS and `end`.
pub fn los_components<T: Real>(
    p: &SystemParams<T>,
    omega_i: &Vec2<T>,
    end: Endpoint<T>,
) -> Result<LosComponent<T>> {
    match end {
        Endpoint::Alice => los_alice_irs(p, omega_i).map(LosComponent::AliceIrs),
        Endpoint::User(u) => los_irs_user(p, omega_i, &u).map(LosComponent::IrsUser),
    }
}

/// Large-scale gains of the three IRS links.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkGains<T = f64> {
    pub l_ai: T,
    pub l_ib: T,
    pub l_ie: T,
}

pub fn link_gains<T: Real>(p: &SystemParams<T>, omega_i: &Vec2<T>, omega_e: &Vec2<T>) -> Result<LinkGains<T>> {
    let (_, l0) = derived_constants(p)?;
    Ok(LinkGains {
        l_ai: path_gain(omega_i.norm(), p.rho_ai, l0)?,
        l_ib: path_gain(omega_i.dist(&p.bob_loc), p.rho_iu, l0)?,
        l_ie: path_gain(omega_i.dist(omega_e), p.rho_iu, l0)?,
    })
}

/// One joint realization of the three IRS links, with each channel stored
/// next to its scaled LoS and NLoS parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    pub h_ai: DMatrix<Complex64>,
    pub h_ai_los: DMatrix<Complex64>,
    pub h_ai_nlos: DMatrix<Complex64>,
    pub h_ib: DVector<Complex64>,
    pub h_ib_los: DVector<Complex64>,
    pub h_ib_nlos: DVector<Complex64>,
    pub h_ie: DVector<Complex64>,
    pub h_ie_los: DVector<Complex64>,
    pub h_ie_nlos: DVector<Complex64>,
}

/// Split `los + nlos` so that `sum - los == nlos` and `los + nlos == sum` hold
/// bitwise. The NLoS part moves by at most a rounding error.
fn exact_split(los: f64, nlos: f64) -> (f64, f64) {
    let mut sum = los + nlos;
    for _ in 0..8 {
        let n = sum - los;
        let s = los + n;
        if s == sum {
            return (sum, n);
        }
        sum = s;
    }
    // not reached for finite inputs; fall back to the pair that satisfies the
    // subtraction identity
    (sum, sum - los)
}

fn compose(los: Complex64, nlos: Complex64) -> (Complex64, Complex64) {
    let (sr, nr) = exact_split(los.re, nlos.re);
    let (si, ni) = exact_split(los.im, nlos.im);
    (Complex64::new(sr, si), Complex64::new(nr, ni))
}

fn rician_vector(
    los: &DVector<Complex64>,
    gain: f64,
    k: f64,
    rng: &mut impl rand::Rng,
) -> (DVector<Complex64>, DVector<Complex64>, DVector<Complex64>) {
    let a = (k * gain / (k + 1.0)).sqrt();
    let b = (gain / (k + 1.0)).sqrt();
    let n = los.len();
    let mut h = DVector::zeros(n);
    let mut lp = DVector::zeros(n);
    let mut np = DVector::zeros(n);
    for m in 0..n {
        let l = los[m] * a;
        let (s, r) = compose(l, complex_normal(rng) * b);
        h[m] = s;
        lp[m] = l;
        np[m] = r;
    }
    (h, lp, np)
}

/// Draw H_AI, h_IB, h_IE for an IRS at `omega_i` (Eve at `p.eve_loc`).
pub fn sample_channels(p: &SystemParams, omega_i: &Vec2, seed: u64) -> Result<ChannelSample> {
    let g = link_gains(p, omega_i, &p.eve_loc)?;
    let k = p.rician_k;
    let mut rng = stream(seed, Purpose::Channel, 0);

    let hlos = los_alice_irs(p, omega_i)?;
    let a = (k * g.l_ai / (k + 1.0)).sqrt();
    let b = (g.l_ai / (k + 1.0)).sqrt();
    let (m, nt) = hlos.shape();
    let mut h_ai = DMatrix::zeros(m, nt);
    let mut h_ai_los = DMatrix::zeros(m, nt);
    let mut h_ai_nlos = DMatrix::zeros(m, nt);
    for c in 0..nt {
        for r in 0..m {
            let l = hlos[(r, c)] * a;
            let (s, n) = compose(l, complex_normal(&mut rng) * b);
            h_ai[(r, c)] = s;
            h_ai_los[(r, c)] = l;
            h_ai_nlos[(r, c)] = n;
        }
    }
    let (h_ib, h_ib_los, h_ib_nlos) =
        rician_vector(&los_irs_user(p, omega_i, &p.bob_loc)?, g.l_ib, k, &mut rng);
    let (h_ie, h_ie_los, h_ie_nlos) =
        rician_vector(&los_irs_user(p, omega_i, &p.eve_loc)?, g.l_ie, k, &mut rng);
    Ok(ChannelSample {
        h_ai,
        h_ai_los,
        h_ai_nlos,
        h_ib,
        h_ib_los,
        h_ib_nlos,
        h_ie,
        h_ie_los,
        h_ie_nlos,
    })
}

/// G = diag(h_iu)·h_ai.
pub fn cascade(h_iu: &DVector<Complex64>, h_ai: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if h_iu.len() != h_ai.nrows() {
        return Err(Error::Dimension(format!(
            "cascade: {} IRS gains vs {} rows",
            h_iu.len(),
            h_ai.nrows()
        )));
    }
    Ok(DMatrix::from_fn(h_ai.nrows(), h_ai.ncols(), |m, n| h_iu[m] * h_ai[(m, n)]))
}

/// log₂(1 + |φ^H G f|²/σ²).
pub fn achievable_rate(
    g: &DMatrix<Complex64>,
    f: &DVector<Complex64>,
    phi: &DVector<Complex64>,
    sigma_sq: f64,
) -> f64 {
    let s = phi.dotc(&(g * f));
    (1.0 + s.norm_sqr() / sigma_sq).log2()
}

/// Eve's channel statistics given the realized Alice–IRS channel.
///
/// `G_AE = Ḡ_AE + diag(h̃_IE)·H_AI` with `h̃_IE ~ CN(0, irs_eve_var·I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EveStatModel {
    /// Ḡ_AE = diag(h̄_IE)·H_AI.
    pub g_bar_ae: DMatrix<Complex64>,
    /// Per-entry variance κ·L_AI·L_IE/(κ+1)² used by the i.i.d. model.
    pub delta_ae_sq: f64,
    /// Realized H_AI.
    pub h_ai: DMatrix<Complex64>,
    /// Mean IRS–Eve channel h̄_IE = √(κL_IE/(κ+1))·h_IE^LoS.
    pub h_ie_mean: DVector<Complex64>,
    /// Per-entry NLoS variance of h_IE, L_IE/(κ+1).
    pub irs_eve_var: f64,
}

impl EveStatModel {
    /// A realization of G_AE from a standard complex normal vector `v`.
    pub fn realize(&self, v: &DVector<Complex64>) -> DMatrix<Complex64> {
        let s = self.irs_eve_var.sqrt();
        let h = &self.h_ie_mean + v * Complex64::new(s, 0.0);
        DMatrix::from_fn(self.h_ai.nrows(), self.h_ai.ncols(), |m, n| h[m] * self.h_ai[(m, n)])
    }
}

pub fn eve_stat_model(
    p: &SystemParams,
    omega_i: &Vec2,
    omega_e: &Vec2,
    h_ai: &DMatrix<Complex64>,
) -> Result<EveStatModel> {
    if h_ai.shape() != (p.n_irs, p.n_tx) {
        return Err(Error::Dimension(format!(
            "h_ai is {:?}, expected ({}, {})",
            h_ai.shape(),
            p.n_irs,
            p.n_tx
        )));
    }
    let g = link_gains(p, omega_i, omega_e)?;
    let k = p.rician_k;
    let h_ie_mean = los_irs_user(p, omega_i, omega_e)? * Complex64::new((k * g.l_ie / (k + 1.0)).sqrt(), 0.0);
    Ok(EveStatModel {
        g_bar_ae: cascade(&h_ie_mean, h_ai)?,
        delta_ae_sq: k * g.l_ai * g.l_ie / ((k + 1.0) * (k + 1.0)),
        h_ai: h_ai.clone(),
        h_ie_mean,
        irs_eve_var: g.l_ie / (k + 1.0),
    })
}

/// First-order random part of the cascade toward user `omega_j`,
/// `diag(h̃_IJ)·H̄_AI + diag(h̄_IJ)·H̃_AI`; the product of the two NLoS terms
/// is dropped.
pub fn linearized_cascade_fluctuation(
    p: &SystemParams,
    omega_i: &Vec2,
    omega_j: &Vec2,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    let (_, l0) = derived_constants(p)?;
    let l_ai = path_gain(omega_i.norm(), p.rho_ai, l0)?;
    let l_ij = path_gain(omega_i.dist(omega_j), p.rho_iu, l0)?;
    let k = p.rician_k;
    let h_bar = los_alice_irs(p, omega_i)? * Complex64::new((k * l_ai / (k + 1.0)).sqrt(), 0.0);
    let u_bar = los_irs_user(p, omega_i, omega_j)? * Complex64::new((k * l_ij / (k + 1.0)).sqrt(), 0.0);
    let mut rng = stream(seed, Purpose::Channel, 1);
    let sa = (l_ai / (k + 1.0)).sqrt();
    let su = (l_ij / (k + 1.0)).sqrt();
    let (m, nt) = h_bar.shape();
    let h_t = DMatrix::from_fn(m, nt, |_, _| complex_normal(&mut rng) * sa);
    let u_t = DVector::from_fn(m, |_, _| complex_normal(&mut rng) * su);
    Ok(DMatrix::from_fn(m, nt, |r, c| u_t[r] * h_bar[(r, c)] + u_bar[r] * h_t[(r, c)]))
}

/// Closed-form MRT pair: f = √(P/N_t)·α_A(φ_AI), φ = diag(α_I(φ_IB))·α_I(θ_AI).
pub fn mrt_design(p: &SystemParams, omega_i: &Vec2) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let f = alice_steering(p, omega_i)? * Complex64::new((p.tx_power / p.n_tx as f64).sqrt(), 0.0);
    let phi = los_irs_user(p, omega_i, &p.bob_loc)?.component_mul(&irs_arrival(p, omega_i)?);
    Ok((f, phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_split_identities_hold() {
        let cases = [(1.0, 1e-17), (1e-20, 1.0), (0.3, -0.1), (-2.5e-7, 3.3e-6), (0.1, 0.2)];
        for (a, b) in cases {
            let (s, n) = exact_split(a, b);
            assert_eq!(s - a, n);
            assert_eq!(a + n, s);
            assert!((n - b).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()));
        }
    }

    #[test]
    fn steering_examples() {
        let v = steering(4, 0.0, 0.5).unwrap();
        assert!(v.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let v = steering(2, 1.0, 0.5).unwrap();
        assert!((v[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(steering(3, 1.0 + 1e-9, 0.5).is_err());
    }
}
