//! Stage-1 IRS placement from channel statistics.
//!
//! The exact objective is the path-loss ratio
//! `(σ² + α_B·L_AI·L_IB)/(σ² + α_E·L_AI·L_IE)`, to be maximized over the IRS
//! area. The SCA solver minimizes the noise-free-numerator surrogate
//! `(σ² + α_E·L_AI·L_IE)/(α_B·L_AI·L_IB)` through reciprocal-gain auxiliary
//! variables.

use std::sync::Arc;

use irs_conic::{BarrierSolver, ConicSolver, Constraint, Outcome, SdpInstance, SmoothConvex};
use nalgebra::{DMatrix, DVector};

use crate::channel::{derived_constants, link_gains};
use crate::error::{Error, Result};
use crate::geometry::{Rect, Vec2};
use crate::outage::QuantilePair;
use crate::params::SystemParams;
use crate::scalar::Real;

/// Eve closer than this to the IRS is rejected as degenerate geometry.
pub const MIN_EVE_DISTANCE: f64 = 0.5;

pub const DEFAULT_SCA_EPS: f64 = 1e-6;
pub const DEFAULT_SCA_MAX_ITER: usize = 100;

fn guard<T: Real>(omega_i: &Vec2<T>, omega_e: &Vec2<T>) -> Result<()> {
    let d = omega_i.dist(omega_e);
    if d < T::lit(MIN_EVE_DISTANCE) {
        return Err(Error::DegenerateGeometry(format!(
            "IRS within {MIN_EVE_DISTANCE} m of Eve (distance {d:?})"
        )));
    }
    Ok(())
}

/// Exact stage-1 objective (to be maximized).
pub fn ratio_objective<T: Real>(
    omega_i: &Vec2<T>,
    omega_e: &Vec2<T>,
    q: &QuantilePair<T>,
    p: &SystemParams<T>,
) -> Result<T> {
    guard(omega_i, omega_e)?;
    let g = link_gains(p, omega_i, omega_e)?;
    let s = p.noise_power;
    Ok((s + q.alpha_b * g.l_ai * g.l_ib) / (s + q.alpha_e * g.l_ai * g.l_ie))
}

/// Surrogate minimized by SCA, evaluated with tight auxiliary variables.
pub fn sca_objective<T: Real>(
    omega_i: &Vec2<T>,
    omega_e: &Vec2<T>,
    q: &QuantilePair<T>,
    p: &SystemParams<T>,
) -> Result<T> {
    guard(omega_i, omega_e)?;
    let g = link_gains(p, omega_i, omega_e)?;
    Ok((p.noise_power + q.alpha_e * g.l_ai * g.l_ie) / (q.alpha_b * g.l_ai * g.l_ib))
}

/// Stage-1 rate targets `(R_B, R_E)` at which both outage transformations are tight.
pub fn rate_targets<T: Real>(
    omega_i: &Vec2<T>,
    omega_e: &Vec2<T>,
    q: &QuantilePair<T>,
    p: &SystemParams<T>,
) -> Result<(T, T)> {
    let g = link_gains(p, omega_i, omega_e)?;
    let s = p.noise_power;
    let r_b = (T::one() + q.alpha_b * g.l_ai * g.l_ib / s).log2();
    let r_e = (T::one() + q.alpha_e * g.l_ai * g.l_ie / s).log2();
    Ok((r_b, r_e))
}

/// Worst-case Eve in `area` for an IRS at `omega_i`: the nearest point.
pub fn worst_eve<T: Real>(omega_i: &Vec2<T>, area: &Rect<T>) -> Vec2<T> {
    area.clamp(omega_i)
}

/// Reciprocal-gain auxiliary variables (units of 1/gain).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxVars {
    pub a_ai: f64,
    pub a_ib: f64,
    pub a_ie: f64,
    pub a_ab: f64,
    pub a_be: f64,
}

impl AuxVars {
    /// Values with every auxiliary constraint active at `omega_i`.
    pub fn active(p: &SystemParams, omega_i: &Vec2, omega_e: &Vec2) -> Result<Self> {
        let g = link_gains(p, omega_i, omega_e)?;
        let (a_ai, a_ib, a_ie) = (1.0 / g.l_ai, 1.0 / g.l_ib, 1.0 / g.l_ie);
        Ok(Self {
            a_ai,
            a_ib,
            a_ie,
            a_ab: a_ai * a_ib,
            a_be: a_ib / a_ie,
        })
    }

    fn as_array(&self) -> [f64; 5] {
        [self.a_ai, self.a_ib, self.a_ie, self.a_ab, self.a_be]
    }

    /// Surrogate objective `(σ²/α_B)·a_ab + (α_E/α_B)·a_be`.
    pub fn objective(&self, q: &QuantilePair, p: &SystemParams) -> f64 {
        (p.noise_power / q.alpha_b) * self.a_ab + (q.alpha_e / q.alpha_b) * self.a_be
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlacementResult {
    pub omega_i: Vec2,
    /// Exact ratio objective at `omega_i`.
    pub objective: f64,
    /// SCA surrogate at `omega_i`.
    pub surrogate: f64,
    pub iterations: usize,
    /// Surrogate value after each SCA iteration, starting at the initial point.
    pub trace: Vec<f64>,
    pub worst_eve: Option<Vec2>,
    /// False when the iteration cap was hit before the stopping rule fired.
    pub converged: bool,
}

// Variable layout of the SCA subproblem: x, y, then the five auxiliaries
// divided by their linearization-point values.
const X: usize = 0;
const Y: usize = 1;
const U_AI: usize = 2;
const U_IB: usize = 3;
const U_IE: usize = 4;
const U_AB: usize = 5;
const U_BE: usize = 6;
const NV: usize = 7;

/// `k·‖ω − c‖^ρ − u ≤ 0`.
struct PowerNorm {
    center: Vec2,
    rho: f64,
    k: f64,
    u: usize,
}

impl SmoothConvex for PowerNorm {
    fn eval(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let dx = z[X] - self.center.x;
        let dy = z[Y] - self.center.y;
        let d2 = dx * dx + dy * dy;
        if d2 <= 0.0 {
            return None;
        }
        let d = d2.sqrt();
        let r = self.rho;
        let val = self.k * d.powf(r) - z[self.u];
        let c = self.k * r * d.powf(r - 2.0);
        let mut g = DVector::zeros(NV);
        g[X] = c * dx;
        g[Y] = c * dy;
        g[self.u] = -1.0;
        let mut h = DMatrix::zeros(NV, NV);
        let e = (r - 2.0) / d2;
        h[(X, X)] = c * (1.0 + e * dx * dx);
        h[(Y, Y)] = c * (1.0 + e * dy * dy);
        h[(X, Y)] = c * e * dx * dy;
        h[(Y, X)] = h[(X, Y)];
        Some((val, g, h))
    }
}

/// `k·b1(u_ai, u_ib) − u_ab ≤ 0` with `b1 = ½(u_ai + u_ib)² − u_ai − u_ib + 1`,
/// the upper bound on `u_ai·u_ib` from linearizing `−u²` at 1.
struct ProductUpper {
    k: f64,
}

impl SmoothConvex for ProductUpper {
    fn eval(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let (u1, u2) = (z[U_AI], z[U_IB]);
        let s = u1 + u2;
        let val = self.k * (0.5 * s * s - u1 - u2 + 1.0) - z[U_AB];
        let mut g = DVector::zeros(NV);
        g[U_AI] = self.k * (s - 1.0);
        g[U_IB] = self.k * (s - 1.0);
        g[U_AB] = -1.0;
        let mut h = DMatrix::zeros(NV, NV);
        for i in [U_AI, U_IB] {
            for j in [U_AI, U_IB] {
                h[(i, j)] = self.k;
            }
        }
        Some((val, g, h))
    }
}

/// `k·u_ib − b2(u_ie, u_be) ≤ 0` with `b2 = 2(u_ie + u_be) − 2 − ½(u_ie² + u_be²)`,
/// the lower bound on `u_ie·u_be` from linearizing `(u_ie + u_be)²` at (1, 1).
struct ProductLower {
    k: f64,
}

impl SmoothConvex for ProductLower {
    fn eval(&self, z: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let (u3, u5) = (z[U_IE], z[U_BE]);
        let b2 = 2.0 * (u3 + u5) - 2.0 - 0.5 * (u3 * u3 + u5 * u5);
        let val = self.k * z[U_IB] - b2;
        let mut g = DVector::zeros(NV);
        g[U_IB] = self.k;
        g[U_IE] = u3 - 2.0;
        g[U_BE] = u5 - 2.0;
        let mut h = DMatrix::zeros(NV, NV);
        h[(U_IE, U_IE)] = 1.0;
        h[(U_BE, U_BE)] = 1.0;
        Some((val, g, h))
    }
}

/// The bilinear-split bounds in raw auxiliary units, for checking.
pub mod bounds {
    /// Upper bound on `a_ai·a_ib` linearized at `(l_ai, l_ib)`.
    pub fn b1(a_ai: f64, a_ib: f64, l_ai: f64, l_ib: f64) -> f64 {
        0.5 * ((a_ai + a_ib).powi(2) - l_ai * l_ai - 2.0 * l_ai * (a_ai - l_ai) - l_ib * l_ib
            - 2.0 * l_ib * (a_ib - l_ib))
    }

    /// Lower bound on `a_ie·a_be` linearized at `(l_ie, l_be)`.
    pub fn b2(a_ie: f64, a_be: f64, l_ie: f64, l_be: f64) -> f64 {
        let s = l_ie + l_be;
        0.5 * s * s + s * (a_ie - l_ie) + s * (a_be - l_be) - 0.5 * (a_ie * a_ie + a_be * a_be)
    }

    /// First-order lower bound on `‖ω − ω_E‖^ρ` at `ω_l`.
    pub fn distance_power_tangent(omega: [f64; 2], omega_l: [f64; 2], omega_e: [f64; 2], rho: f64) -> f64 {
        let dx = omega_l[0] - omega_e[0];
        let dy = omega_l[1] - omega_e[1];
        let d2 = dx * dx + dy * dy;
        let d = d2.sqrt();
        d.powf(rho) + rho * d.powf(rho - 2.0) * (dx * (omega[0] - omega_l[0]) + dy * (omega[1] - omega_l[1]))
    }
}

/// One convex SCA subproblem linearized at `point` (Eve at `p.eve_loc`).
///
/// The bilinear splits are applied to the auxiliaries scaled by their
/// linearization-point values; the returned auxiliaries are in raw units.
pub fn sca_subproblem(point: (Vec2, AuxVars), q: &QuantilePair, p: &SystemParams) -> Result<(Vec2, AuxVars)> {
    let (w_l, aux) = point;
    let a = aux.as_array();
    if a.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("auxiliary variables must be positive".into()));
    }
    if !p.irs_area.contains(&w_l) {
        return Err(Error::Domain("linearization point outside the IRS area".into()));
    }
    let (_, l0) = derived_constants(p)?;
    let omega_e = p.eve_loc;
    guard(&w_l, &omega_e)?;

    let mut sdp = SdpInstance::new();
    for _ in 0..NV {
        sdp.add_scalar();
    }
    let c_ab = p.noise_power / q.alpha_b * a[3];
    let c_be = q.alpha_e / q.alpha_b * a[4];
    let j = c_ab + c_be;
    sdp.set_objective(U_AB, c_ab / j);
    sdp.set_objective(U_BE, c_be / j);

    sdp.add(Constraint::Smooth(Arc::new(PowerNorm {
        center: Vec2::origin(),
        rho: p.rho_ai,
        k: 1.0 / (l0 * a[0]),
        u: U_AI,
    })));
    sdp.add(Constraint::Smooth(Arc::new(PowerNorm {
        center: p.bob_loc,
        rho: p.rho_iu,
        k: 1.0 / (l0 * a[1]),
        u: U_IB,
    })));
    // L0·a_ie ≤ d_l^ρ + ρ·d_l^(ρ−2)·(ω_l − ω_E)ᵀ(ω − ω_l), divided by d_l^ρ
    let rho = p.rho_iu;
    let dx = w_l.x - omega_e.x;
    let dy = w_l.y - omega_e.y;
    let d2 = dx * dx + dy * dy;
    let dl_rho = d2.powf(rho / 2.0);
    let gx = rho * dx / d2;
    let gy = rho * dy / d2;
    sdp.add(Constraint::LinearLe {
        a: sdp.row(&[(U_IE, l0 * a[2] / dl_rho), (X, -gx), (Y, -gy)]),
        b: 1.0 - gx * w_l.x - gy * w_l.y,
    });
    sdp.add(Constraint::Smooth(Arc::new(ProductUpper { k: a[0] * a[1] / a[3] })));
    sdp.add(Constraint::Smooth(Arc::new(ProductLower { k: a[1] / (a[2] * a[4]) })));
    for u in [U_IE, U_BE] {
        sdp.add(Constraint::LinearLe {
            a: sdp.row(&[(u, -1.0)]),
            b: 0.0,
        });
    }
    let area = p.irs_area;
    for (idx, lo, hi) in [(X, area.x_min, area.x_max), (Y, area.y_min, area.y_max)] {
        if hi > lo {
            sdp.add(Constraint::LinearLe {
                a: sdp.row(&[(idx, -1.0)]),
                b: -lo,
            });
            sdp.add(Constraint::LinearLe {
                a: sdp.row(&[(idx, 1.0)]),
                b: hi,
            });
        } else {
            sdp.add(Constraint::LinearEq {
                a: sdp.row(&[(idx, 1.0)]),
                b: lo,
            });
        }
    }

    let mut start = vec![1.0; NV];
    start[X] = w_l.x;
    start[Y] = w_l.y;
    let sol = match BarrierSolver::default().solve_from(&sdp, Some(&start))? {
        Outcome::Solved(s) => s,
        Outcome::Infeasible { bound } => {
            return Err(Error::Infeasible(format!(
                "SCA subproblem at a feasible linearization point (phase-I bound {bound:e})"
            )))
        }
    };
    let z = sol.x;
    let omega = area.clamp(&Vec2::new(z[X], z[Y]));
    Ok((
        omega,
        AuxVars {
            a_ai: z[U_AI] * a[0],
            a_ib: z[U_IB] * a[1],
            a_ie: z[U_IE] * a[2],
            a_ab: z[U_AB] * a[3],
            a_be: z[U_BE] * a[4],
        },
    ))
}

fn finish(p: &SystemParams, q: &QuantilePair, omega_i: Vec2, omega_e: Vec2) -> Result<(f64, f64)> {
    Ok((
        ratio_objective(&omega_i, &omega_e, q, p)?,
        sca_objective(&omega_i, &omega_e, q, p)?,
    ))
}

/// SCA from `init`, stopping when `‖ω^(l+1) − ω^(l)‖² ≤ eps`.
///
/// Each iteration relinearizes at the new location with tight auxiliaries.
/// A step that would increase the surrogate is rejected and ends the run.
pub fn sca_location(p: &SystemParams, q: &QuantilePair, init: Vec2, eps: f64) -> Result<PlacementResult> {
    sca_location_capped(p, q, init, eps, DEFAULT_SCA_MAX_ITER)
}

pub fn sca_location_capped(
    p: &SystemParams,
    q: &QuantilePair,
    init: Vec2,
    eps: f64,
    max_iter: usize,
) -> Result<PlacementResult> {
    if !p.irs_area.contains(&init) {
        return Err(Error::Domain(format!("initial point {init:?} outside the IRS area")));
    }
    let omega_e = p.eve_loc;
    let mut w = init;
    let mut j = sca_objective(&w, &omega_e, q, p)?;
    let mut trace = vec![j];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let aux = AuxVars::active(p, &w, &omega_e)?;
        let (w_new, _) = sca_subproblem((w, aux), q, p)?;
        let j_new = sca_objective(&w_new, &omega_e, q, p)?;
        if j_new > j * (1.0 + 1e-9) {
            converged = true;
            break;
        }
        let step = (w_new.x - w.x).powi(2) + (w_new.y - w.y).powi(2);
        w = w_new;
        j = j_new.min(j);
        trace.push(j);
        if step <= eps {
            converged = true;
            break;
        }
    }
    let (objective, surrogate) = finish(p, q, w, omega_e)?;
    Ok(PlacementResult {
        omega_i: w,
        objective,
        surrogate,
        iterations,
        trace,
        worst_eve: None,
        converged,
    })
}

/// SCA from the four corners and the centroid of the IRS area; the start with
/// the smallest surrogate wins.
pub fn sca_location_multistart(p: &SystemParams, q: &QuantilePair, eps: f64) -> Result<PlacementResult> {
    let area = p.irs_area;
    let mut starts = vec![area.centroid()];
    starts.extend(area.corners());
    let mut best: Option<PlacementResult> = None;
    let mut last_err = None;
    for s in starts {
        match sca_location(p, q, s, eps) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.surrogate < b.surrogate) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

/// Grid maximizer of the exact objective, Eve fixed at `p.eve_loc`.
pub fn global_search_location(p: &SystemParams, q: &QuantilePair, grid_step: f64) -> Result<PlacementResult> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidParam {
            field: "grid_step",
            reason: "must be positive".into(),
        });
    }
    let omega_e = p.eve_loc;
    let mut best: Option<(Vec2, f64)> = None;
    for w in p.irs_area.grid(grid_step) {
        if let Ok(v) = ratio_objective(&w, &omega_e, q, p) {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((w, v));
            }
        }
    }
    let (w, _) = best.ok_or_else(|| Error::DegenerateGeometry("every grid point is too close to Eve".into()))?;
    let (objective, surrogate) = finish(p, q, w, omega_e)?;
    Ok(PlacementResult {
        omega_i: w,
        objective,
        surrogate,
        iterations: 0,
        trace: vec![surrogate],
        worst_eve: None,
        converged: true,
    })
}

/// Max-min placement against an Eve anywhere in `eve_area`: for each grid
/// point the inner minimization is the projection onto the area.
pub fn maxmin_location(
    p: &SystemParams,
    q: &QuantilePair,
    irs_grid_step: f64,
    eve_area: &Rect,
) -> Result<PlacementResult> {
    if !(irs_grid_step > 0.0) {
        return Err(Error::InvalidParam {
            field: "irs_grid_step",
            reason: "must be positive".into(),
        });
    }
    if !eve_area.is_valid() {
        return Err(Error::InvalidParam {
            field: "eve_area",
            reason: "needs min <= max on both axes".into(),
        });
    }
    let mut best: Option<(Vec2, Vec2, f64)> = None;
    for w in p.irs_area.grid(irs_grid_step) {
        let e = worst_eve(&w, eve_area);
        if let Ok(v) = ratio_objective(&w, &e, q, p) {
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((w, e, v));
            }
        }
    }
    let (w, e, _) = best.ok_or_else(|| Error::DegenerateGeometry("Eve area overlaps every grid point".into()))?;
    let (objective, surrogate) = finish(p, q, w, e)?;
    Ok(PlacementResult {
        omega_i: w,
        objective,
        surrogate,
        iterations: 0,
        trace: vec![surrogate],
        worst_eve: Some(e),
        converged: true,
    })
}
