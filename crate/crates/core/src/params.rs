use crate::error::{Error, Result};
use crate::geometry::{Rect, Vec2};
use crate::scalar::Real;

/// Scenario constants, all in SI units. Alice sits at the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams<T = f64> {
    /// Transmit antennas N_t.
    pub n_tx: usize,
    /// IRS elements M.
    pub n_irs: usize,
    /// Rician factor κ.
    pub rician_k: T,
    /// Alice–IRS path-loss exponent.
    pub rho_ai: T,
    /// IRS–Bob and IRS–Eve path-loss exponent.
    pub rho_iu: T,
    /// Noise power σ² in watts.
    pub noise_power: T,
    /// Transmit power budget P in watts.
    pub tx_power: T,
    /// Secrecy outage target.
    pub p_out: T,
    pub carrier_hz: T,
    pub irs_area: Rect<T>,
    pub bob_loc: Vec2<T>,
    pub eve_loc: Vec2<T>,
    pub eve_area: Option<Rect<T>>,
    /// Element spacing as a fraction of the wavelength (both arrays).
    pub element_spacing_fraction: T,
}

impl<T: Real> SystemParams<T> {
    /// The reference scenario: N_t = 4, M = 5, κ = 2, P = 1 W, σ² = -95 dBm,
    /// p_out = 0.05, 2.4 GHz, Bob at (100, 15), Eve at (95, 13),
    /// IRS area [0, 105] × [20, 30].
    pub fn reference() -> Self {
        Self {
            n_tx: 4,
            n_irs: 5,
            rician_k: T::lit(2.0),
            rho_ai: T::lit(2.2),
            rho_iu: T::lit(3.0),
            noise_power: T::lit(3.162_277_660_168_379_5e-13),
            tx_power: T::one(),
            p_out: T::lit(0.05),
            carrier_hz: T::lit(2.4e9),
            irs_area: Rect::new(T::zero(), T::lit(105.0), T::lit(20.0), T::lit(30.0)),
            bob_loc: Vec2::new(T::lit(100.0), T::lit(15.0)),
            eve_loc: Vec2::new(T::lit(95.0), T::lit(13.0)),
            eve_area: None,
            element_spacing_fraction: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: &str) -> Error {
            Error::InvalidParam {
                field,
                reason: reason.to_string(),
            }
        }
        if self.n_tx < 1 {
            return Err(bad("n_tx", "must be at least 1"));
        }
        if self.n_irs < 1 {
            return Err(bad("n_irs", "must be at least 1"));
        }
        if !(self.rician_k > T::zero()) {
            return Err(bad("rician_k", "must be positive"));
        }
        if !(self.p_out > T::zero() && self.p_out < T::one()) {
            return Err(bad("p_out", "must lie in (0, 1)"));
        }
        if !(self.tx_power > T::zero()) || !self.tx_power.is_finite() {
            return Err(bad("tx_power", "must be positive"));
        }
        if !(self.noise_power > T::zero()) || !self.noise_power.is_finite() {
            return Err(bad("noise_power", "must be positive"));
        }
        if !(self.carrier_hz > T::zero()) {
            return Err(bad("carrier_hz", "must be positive"));
        }
        if !(self.rho_ai > T::zero()) || !(self.rho_iu > T::zero()) {
            return Err(bad("rho_ai/rho_iu", "path-loss exponents must be positive"));
        }
        if !(self.element_spacing_fraction > T::zero()) {
            return Err(bad("element_spacing_fraction", "must be positive"));
        }
        if !self.irs_area.is_valid() {
            return Err(bad("irs_area", "needs min <= max on both axes"));
        }
        if let Some(a) = &self.eve_area {
            if !a.is_valid() {
                return Err(bad("eve_area", "needs min <= max on both axes"));
            }
        }
        if !self.bob_loc.is_finite() || !self.eve_loc.is_finite() {
            return Err(bad("bob_loc/eve_loc", "must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid_and_rejects_bad_outage() {
        let mut p = SystemParams::<f64>::reference();
        p.validate().unwrap();
        p.p_out = 1.5;
        let e = p.validate().unwrap_err().to_string();
        assert!(e.contains("p_out"), "{e}");
    }

    #[test]
    fn reference_noise_is_minus_95_dbm() {
        let p = SystemParams::<f64>::reference();
        let dbm = 10.0 * (p.noise_power / 1e-3).log10();
        assert!((dbm + 95.0).abs() < 1e-12);
    }
}
