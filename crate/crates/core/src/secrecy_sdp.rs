//! Stage-2 design with the IRS fixed: the Bernstein-type (BTI) deterministic
//! form of the secrecy chance constraint, the beamformer power-minimization
//! SDP, the phase-shift feasibility SDP, bisection drivers and rank-one
//! recovery.
//!
//! Eve's channel is `G_AE = diag(h̄_IE + s·v)·H_AI` with `v ~ CN(0, I)`. Two
//! quadratic-form liftings of her received power are available:
//!
//! * [`BtiLifting::Iid`] treats `vec(G_AE)` as having i.i.d. entries of
//!   variance δ² around `Ḡ_AE`, giving `A = δ²(Fᵀ⊗Q)`. This ignores the
//!   correlation created by the shared `h̃_IE` and is not conservative.
//! * [`BtiLifting::Structured`] lifts in the `M` random coefficients of `h̃_IE`
//!   directly, giving `A = s²·(H F H^H ∘ Qᵀ)`, which is exact for the model.
//!
//! Internally all SDP rows are divided by σ² so that noise power is one.

use irs_conic::{BarrierSolver, ConicSolver, Constraint, HermitianBlock, Outcome, SdpInstance};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{cascade, link_gains, ChannelSample, EveStatModel};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::params::SystemParams;
use crate::rng::{complex_normal, stream, Purpose};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

pub const DEFAULT_BISECTION_EPS: f64 = 1e-3;
/// Eigenvalues above `-PSD_FLOOR` are treated as zero.
pub const PSD_FLOOR: f64 = 1e-9;
/// SROCR treats `λ₁/Tr Q` at or above this as rank one. Exactly 1 leaves the
/// augmented SDP without interior points.
pub const SROCR_W_MAX: f64 = 0.999;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BtiLifting {
    Iid,
    #[default]
    Structured,
}

/// Data of the BTI constraint `u^H A u + 2Re{u^H a} ≤ c1`, `u ~ CN(0, I)`,
/// in the units of the inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct BtiTerms {
    pub a_mat: CMat,
    pub a_vec: CVec,
    pub c1: f64,
    /// ϱ = −ln p_out.
    pub rho_bar: f64,
}

/// `Tr A + √(2ϱ)·√(‖A‖_F² + 2‖a‖²) + ϱ·λ⁺(A) − c1`; the constraint holds iff
/// this is non-positive.
pub fn bti_margin(t: &BtiTerms) -> f64 {
    spread(&t.a_mat, &t.a_vec, t.rho_bar) - t.c1
}

/// The `c1`-independent part of the margin.
fn spread(a: &CMat, v: &CVec, rho_bar: f64) -> f64 {
    let tr = a.trace().re;
    let fro = a.norm_squared();
    let lam = if a.nrows() == 0 {
        0.0
    } else {
        max_eigenvalue(a).max(0.0)
    };
    tr + (2.0 * rho_bar).sqrt() * (fro + 2.0 * v.norm_squared()).sqrt() + rho_bar * lam
}

fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn max_eigenvalue(m: &CMat) -> f64 {
    SymmetricEigen::new(hermitize(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let e = SymmetricEigen::new(hermitize(m));
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = CMat::from_columns(&idx.iter().map(|&k| e.eigenvectors.column(k)).collect::<Vec<_>>());
    (vals, vecs)
}

/// `λ₂/λ₁` of a PSD matrix; zero for rank one (or the zero matrix).
pub fn rank_gap(m: &CMat) -> f64 {
    let (v, _) = sorted_eigen(m);
    if v.len() < 2 || !(v[0] > 0.0) {
        return 0.0;
    }
    v[1].max(0.0) / v[0]
}

/// Hermitian square root with eigenvalues in `[-PSD_FLOOR, 0)` clipped to 0.
pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let e = SymmetricEigen::new(hermitize(m));
    let mut d = e.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < -PSD_FLOOR * (1.0 + e.eigenvalues.amax()) {
            return Err(Error::Domain(format!("matrix is not PSD (eigenvalue {v:e})")));
        }
        *v = v.max(0.0).sqrt();
    }
    let u = &e.eigenvectors;
    let dc = DMatrix::from_diagonal(&d.map(|x| Complex64::new(x, 0.0)));
    Ok(u * dc * u.adjoint())
}

fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

fn check_square(name: &str, m: &CMat, n: usize) -> Result<()> {
    if m.shape() != (n, n) {
        return Err(Error::Dimension(format!("{name} is {:?}, expected {n}×{n}", m.shape())));
    }
    Ok(())
}

/// Eve and Bob quadratic-form parts, all divided by σ².
#[derive(Clone, Debug)]
struct Parts {
    a_mat: CMat,
    a_vec: CVec,
    /// Eve's power at the mean channel.
    mean: f64,
    /// Bob's received power.
    bob: f64,
}

/// Everything stage 2 needs about one deployed IRS: Bob's cascade, Eve's
/// statistical model and the budget constants.
#[derive(Clone, Debug)]
pub struct Stage2Context {
    pub g_ab: CMat,
    pub eve: EveStatModel,
    pub sigma_sq: f64,
    pub tx_power: f64,
    pub p_out: f64,
    pub lifting: BtiLifting,
    /// Rate bracket top used by the bisections.
    pub r_hi: f64,
}

impl Stage2Context {
    pub fn new(p: &SystemParams, omega_i: &Vec2, omega_e: &Vec2, channel: &ChannelSample) -> Result<Self> {
        let g_ab = cascade(&channel.h_ib, &channel.h_ai)?;
        let eve = crate::channel::eve_stat_model(p, omega_i, omega_e, &channel.h_ai)?;
        let mut ctx = Self {
            g_ab,
            eve,
            sigma_sq: p.noise_power,
            tx_power: p.tx_power,
            p_out: p.p_out,
            lifting: BtiLifting::default(),
            r_hi: 0.0,
        };
        ctx.r_hi = rate_upper_bound(p, omega_i, channel)?;
        Ok(ctx)
    }

    pub fn with_lifting(mut self, lifting: BtiLifting) -> Self {
        self.lifting = lifting;
        self
    }

    pub fn n_tx(&self) -> usize {
        self.g_ab.ncols()
    }

    pub fn n_irs(&self) -> usize {
        self.g_ab.nrows()
    }

    fn rho_bar(&self) -> f64 {
        -self.p_out.ln()
    }

    fn parts(&self, f: &CMat, q: &CMat) -> Parts {
        let s2 = self.sigma_sq;
        let bob = (&self.g_ab * f * self.g_ab.adjoint() * q).trace().re / s2;
        match self.lifting {
            BtiLifting::Iid => {
                let k = f.transpose().kronecker(q) / Complex64::new(s2, 0.0);
                let g = CVec::from_column_slice(self.eve.g_bar_ae.as_slice());
                let d = self.eve.delta_ae_sq;
                let kg = &k * &g;
                Parts {
                    mean: g.dotc(&kg).re,
                    a_vec: kg * Complex64::new(d.sqrt(), 0.0),
                    a_mat: k * Complex64::new(d, 0.0),
                    bob,
                }
            }
            BtiLifting::Structured => {
                let h = &self.eve.h_ai;
                let s = h * f * h.adjoint();
                let b = s.component_mul(&q.transpose()) / Complex64::new(s2, 0.0);
                let y = self.eve.h_ie_mean.map(|z| z.conj());
                let by = &b * &y;
                let v = self.eve.irs_eve_var;
                Parts {
                    mean: y.dotc(&by).re,
                    a_vec: by * Complex64::new(v.sqrt(), 0.0),
                    a_mat: b * Complex64::new(v, 0.0),
                    bob,
                }
            }
        }
    }

    /// Normalized BTI terms at rate `r`.
    fn terms(&self, f: &CMat, q: &CMat, r: f64) -> BtiTerms {
        let pt = self.parts(f, q);
        BtiTerms {
            c1: 2f64.powf(-r) * (1.0 + pt.bob) - 1.0 - pt.mean,
            a_mat: pt.a_mat,
            a_vec: pt.a_vec,
            rho_bar: self.rho_bar(),
        }
    }

    /// BTI margin in noise-normalized units.
    pub fn margin(&self, f: &CMat, q: &CMat, r: f64) -> f64 {
        bti_margin(&self.terms(f, q, r))
    }

    /// Largest rate whose BTI constraint holds at `(F, Q)`:
    /// `max(0, log₂((1 + bob)/(1 + mean + spread)))`.
    pub fn rate(&self, f: &CMat, q: &CMat) -> f64 {
        self.raw_rate(f, q).max(0.0)
    }

    /// The logarithm above without the clamp; negative when even rate 0 is
    /// not guaranteed.
    pub fn raw_rate(&self, f: &CMat, q: &CMat) -> f64 {
        let pt = self.parts(f, q);
        let sp = spread(&pt.a_mat, &pt.a_vec, self.rho_bar());
        ((1.0 + pt.bob) / (1.0 + pt.mean + sp)).log2()
    }

    pub fn rate_vec(&self, f: &CVec, phi: &CVec) -> f64 {
        self.rate(&outer(f), &outer(phi))
    }

    /// Bob's effective channel `G_AB^H φ`, so that his signal is `h^H f`.
    pub fn bob_effective(&self, phi: &CVec) -> CVec {
        self.g_ab.adjoint() * phi
    }
}

/// BTI terms in the units of the inputs, with either lifting.
#[allow(clippy::too_many_arguments)]
pub fn build_bti_with(
    lifting: BtiLifting,
    f: &CMat,
    q: &CMat,
    eve: &EveStatModel,
    g_ab: &CMat,
    r: f64,
    sigma_sq: f64,
    p_out: f64,
) -> Result<BtiTerms> {
    let (m, nt) = g_ab.shape();
    check_square("F", f, nt)?;
    check_square("Q", q, m)?;
    if eve.g_bar_ae.shape() != (m, nt) || eve.h_ai.shape() != (m, nt) {
        return Err(Error::Dimension("Eve model does not match G_AB".into()));
    }
    if !(p_out > 0.0 && p_out < 1.0) {
        return Err(Error::InvalidParam {
            field: "p_out",
            reason: format!("{p_out} outside (0, 1)"),
        });
    }
    let ctx = Stage2Context {
        g_ab: g_ab.clone(),
        eve: eve.clone(),
        sigma_sq,
        tx_power: f64::INFINITY,
        p_out,
        lifting,
        r_hi: 0.0,
    };
    let t = ctx.terms(f, q, r);
    let s = Complex64::new(sigma_sq, 0.0);
    Ok(BtiTerms {
        a_mat: t.a_mat * s,
        a_vec: t.a_vec * s,
        c1: t.c1 * sigma_sq,
        rho_bar: t.rho_bar,
    })
}

/// BTI terms with the i.i.d. Kronecker lifting `A = δ²(Fᵀ⊗Q)`,
/// `a = δ(Fᵀ⊗Q)vec(Ḡ_AE)`.
pub fn build_bti(
    f: &CMat,
    q: &CMat,
    eve: &EveStatModel,
    g_ab: &CMat,
    r: f64,
    sigma_sq: f64,
    p_out: f64,
) -> Result<BtiTerms> {
    build_bti_with(BtiLifting::Iid, f, q, eve, g_ab, r, sigma_sq, p_out)
}

/// Upper bound on any rate reachable with `‖f‖² ≤ P` and unit-modulus φ:
/// the larger of `log₂(1 + P·(Σ_m |h_IB,m|·‖H_AI[m,:]‖)²/σ²)` (valid for the
/// realization) and the LoS envelope `log₂(1 + P·M²·N_t·L_AI·L_IB/σ²)`.
pub fn rate_upper_bound(p: &SystemParams, omega_i: &Vec2, channel: &ChannelSample) -> Result<f64> {
    let g = link_gains(p, omega_i, &p.eve_loc)?;
    let (m, nt) = (p.n_irs as f64, p.n_tx as f64);
    let los = (1.0 + p.tx_power * m * m * nt * g.l_ai * g.l_ib / p.noise_power).log2();
    let amp: f64 = (0..channel.h_ai.nrows())
        .map(|r| channel.h_ib[r].norm() * channel.h_ai.row(r).norm())
        .sum();
    let real = (1.0 + p.tx_power * amp * amp / p.noise_power).log2();
    Ok(los.max(real))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Beamformer,
    Phase,
}

struct Lifted {
    sdp: SdpInstance,
    block: HermitianBlock,
    zeta: usize,
    upsilon: usize,
}

/// Realified coordinates of a Hermitian matrix whose Euclidean norm is the
/// Frobenius norm: the diagonal, then `√2·Re`, `√2·Im` of the upper triangle.
fn realify_hermitian(a: &CMat, out: &mut Vec<f64>) {
    let n = a.nrows();
    let r2 = std::f64::consts::SQRT_2;
    for k in 0..n {
        out.push(a[(k, k)].re);
    }
    for k in 0..n {
        for l in k + 1..n {
            out.push(r2 * a[(k, l)].re);
            out.push(r2 * a[(k, l)].im);
        }
    }
}

/// Build the BTI rows for the variable block `var` with the other one fixed:
///
/// ```text
/// Tr A(X) + mean(X) − 2^{−R}·bob(X) + √(2ϱ)ζ + ϱυ ≤ 2^{−R} − 1
/// ‖(vec A(X), √2·a(X))‖ ≤ ζ,   υI − A(X) ⪰ 0,   υ ≥ 0,   X ⪰ 0
/// ```
///
/// Every map is linear in `X`, so each coefficient is read off the Hermitian
/// basis.
fn lift(ctx: &Stage2Context, var: Var, fixed: &CMat, r: f64) -> Lifted {
    let n = match var {
        Var::Beamformer => ctx.n_tx(),
        Var::Phase => ctx.n_irs(),
    };
    let mut sdp = SdpInstance::new();
    let block = sdp.add_hermitian(n);
    let zeta = sdp.add_scalar();
    let upsilon = sdp.add_scalar();
    let rb = ctx.rho_bar();
    let w = 2f64.powf(-r);

    let basis = block.basis();
    let parts: Vec<Parts> = basis
        .iter()
        .map(|e| match var {
            Var::Beamformer => ctx.parts(e, fixed),
            Var::Phase => ctx.parts(fixed, e),
        })
        .collect();
    let dim = parts[0].a_mat.nrows();

    let mut lin = vec![(zeta, (2.0 * rb).sqrt()), (upsilon, rb)];
    for (k, pt) in parts.iter().enumerate() {
        lin.push((block.offset + k, pt.a_mat.trace().re + pt.mean - w * pt.bob));
    }
    sdp.add(Constraint::LinearLe {
        a: sdp.row(&lin),
        b: w - 1.0,
    });

    let rows = dim * dim + 2 * dim;
    let mut a = DMatrix::zeros(rows, sdp.n_vars());
    let r2 = std::f64::consts::SQRT_2;
    let mut col = Vec::with_capacity(rows);
    for (k, pt) in parts.iter().enumerate() {
        col.clear();
        realify_hermitian(&pt.a_mat, &mut col);
        for z in pt.a_vec.iter() {
            col.push(r2 * z.re);
            col.push(r2 * z.im);
        }
        a.column_mut(block.offset + k).copy_from_slice(&col);
    }
    sdp.add(Constraint::Soc {
        a,
        b: DVector::zeros(rows),
        c: sdp.row(&[(zeta, 1.0)]),
        d: 0.0,
    });

    let mut terms = vec![(upsilon, CMat::identity(dim, dim))];
    for (k, pt) in parts.iter().enumerate() {
        terms.push((block.offset + k, -&pt.a_mat));
    }
    sdp.add(Constraint::Lmi {
        f0: CMat::zeros(dim, dim),
        terms,
    });
    sdp.add(Constraint::LinearLe {
        a: sdp.row(&[(upsilon, -1.0)]),
        b: 0.0,
    });
    Lifted {
        sdp,
        block,
        zeta,
        upsilon,
    }
}

/// Minimizer of the power-minimization SDP.
#[derive(Clone, Debug)]
pub struct PmSolution {
    pub f_mat: CMat,
    pub zeta: f64,
    pub upsilon: f64,
    /// `Tr F`.
    pub power: f64,
}

fn run(sdp: &SdpInstance) -> Result<Option<Vec<f64>>> {
    match BarrierSolver::default().solve(sdp)? {
        Outcome::Solved(s) => Ok(Some(s.x)),
        Outcome::Infeasible { .. } => Ok(None),
    }
}

/// Minimum-trace beamformer covariance meeting the BTI constraint at rate `r`
/// with `Q` fixed. `Ok(None)` means infeasible. At `r = 0` the zero matrix is
/// returned directly, since then the feasible set may have no interior.
pub fn solve_pm_sdp(ctx: &Stage2Context, q: &CMat, r: f64) -> Result<Option<PmSolution>> {
    check_square("Q", q, ctx.n_irs())?;
    let nt = ctx.n_tx();
    if r <= 0.0 {
        return Ok(Some(PmSolution {
            f_mat: CMat::zeros(nt, nt),
            zeta: 0.0,
            upsilon: 0.0,
            power: 0.0,
        }));
    }
    let mut l = lift(ctx, Var::Beamformer, q, r);
    for (i, v) in l.block.trace_form(&CMat::identity(nt, nt)) {
        l.sdp.set_objective(i, v);
    }
    Ok(run(&l.sdp)?.map(|x| {
        let f_mat = l.block.assemble(&x);
        PmSolution {
            power: f_mat.trace().re,
            f_mat,
            zeta: x[l.zeta],
            upsilon: x[l.upsilon],
        }
    }))
}

/// Result of a bisection over the target rate.
#[derive(Clone, Debug)]
pub struct Bisection {
    /// The solution at the largest feasible rate found.
    pub mat: CMat,
    pub rate: f64,
    pub probes: usize,
    /// Set when `r_lo` itself was infeasible; then `rate = 0`.
    pub lower_infeasible: bool,
}

fn bisect<F>(r_lo: f64, r_hi: f64, eps: f64, zero: CMat, mut feasible: F) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<Option<CMat>>,
{
    if !(r_lo < r_hi) || !(eps > 0.0) {
        return Err(Error::InvalidParam {
            field: "r_lo/r_hi",
            reason: format!("need r_lo < r_hi and eps > 0, got [{r_lo}, {r_hi}], eps {eps}"),
        });
    }
    let mut probes = 1;
    let mut best = match feasible(r_lo)? {
        Some(m) => m,
        None => {
            return Ok(Bisection {
                mat: zero,
                rate: 0.0,
                probes,
                lower_infeasible: true,
            })
        }
    };
    let (mut lo, mut hi) = (r_lo, r_hi);
    while hi - lo > eps {
        let mid = 0.5 * (lo + hi);
        probes += 1;
        match feasible(mid)? {
            Some(m) => {
                best = m;
                lo = mid;
            }
            None => hi = mid,
        }
    }
    Ok(Bisection {
        mat: best,
        rate: lo,
        probes,
        lower_infeasible: false,
    })
}

/// Largest rate (to `eps`) at which the PM solution uses at most the power
/// budget, with `Q` fixed.
pub fn bisect_beamformer(ctx: &Stage2Context, q: &CMat, r_lo: f64, r_hi: f64, eps: f64) -> Result<Bisection> {
    let nt = ctx.n_tx();
    let budget = ctx.tx_power * (1.0 + 1e-9);
    bisect(r_lo, r_hi, eps, CMat::zeros(nt, nt), |r| {
        Ok(solve_pm_sdp(ctx, q, r)?.filter(|s| s.power <= budget).map(|s| s.f_mat))
    })
}

/// Rank-one beamformer from a PSD `F`: `f = F h/√(h^H F h)`.
///
/// `f f^H = F^{1/2} P F^{1/2}` with `P` the projector onto `F^{1/2}h`, so
/// `h^H f f^H h = h^H F h`, `Tr(f f^H) ≤ Tr F` and `F − f f^H ⪰ 0`.
pub fn rank_one_extract_f(f_mat: &CMat, h_b: &CVec) -> Result<CVec> {
    check_square("F", f_mat, h_b.len())?;
    let fh = f_mat * h_b;
    let q = h_b.dotc(&fh).re;
    if !(q > 0.0) {
        return Err(Error::DegenerateGeometry(
            "Bob's effective channel lies in the null space of F".into(),
        ));
    }
    Ok(fh / Complex64::new(q.sqrt(), 0.0))
}

/// Any `Q ⪰ 0` with unit diagonal meeting the BTI constraint at rate `r`,
/// with `F` fixed. `Ok(None)` means infeasible.
pub fn solve_phase_feasibility(ctx: &Stage2Context, f_mat: &CMat, r: f64) -> Result<Option<CMat>> {
    check_square("F", f_mat, ctx.n_tx())?;
    let m = ctx.n_irs();
    if r <= 0.0 {
        return Ok(Some(CMat::from_element(m, m, Complex64::new(1.0, 0.0))));
    }
    let mut l = lift(ctx, Var::Phase, f_mat, r);
    for k in 0..m {
        l.sdp.add(Constraint::LinearEq {
            a: l.sdp.row(&[(l.block.diag_index(k), 1.0)]),
            b: 1.0,
        });
    }
    Ok(run(&l.sdp)?.map(|x| l.block.assemble(&x)))
}

/// Largest feasible rate (to `eps`) of the phase SDP with `F` fixed.
pub fn bisect_phase(ctx: &Stage2Context, f_mat: &CMat, r_lo: f64, r_hi: f64, eps: f64) -> Result<Bisection> {
    let m = ctx.n_irs();
    bisect(r_lo, r_hi, eps, CMat::identity(m, m), |r| solve_phase_feasibility(ctx, f_mat, r))
}

fn unit_phases(v: &CVec) -> CVec {
    v.map(|z| {
        if z.norm() > 0.0 {
            Complex64::from_polar(1.0, z.arg())
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recovery {
    /// `Q*` was already rank one.
    Eigen,
    Srocr,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SrocrSettings {
    pub step: f64,
    pub max_rounds: usize,
    pub candidates: usize,
    pub seed: u64,
    /// Skip SROCR and go straight to Gaussian randomization.
    pub randomization_only: bool,
}

impl Default for SrocrSettings {
    fn default() -> Self {
        Self {
            step: 0.1,
            max_rounds: 30,
            candidates: 1000,
            seed: 0,
            randomization_only: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseRecovery {
    pub phi: CVec,
    pub rate: f64,
    pub path: Recovery,
    pub rounds: usize,
    /// Whether `rate ≥ R_target − 0.05`.
    pub met_target: bool,
}

/// Best of `candidates` unit-modulus projections of `Q*^{1/2}·r`, `r ~ CN(0, I)`,
/// by the closed-form BTI rate with `F` fixed.
pub fn gaussian_randomization(
    ctx: &Stage2Context,
    q_star: &CMat,
    f_mat: &CMat,
    candidates: usize,
    seed: u64,
) -> Result<(CVec, f64)> {
    let root = psd_sqrt(q_star)?;
    let m = q_star.nrows();
    let mut best = (unit_phases(&CVec::from_element(m, Complex64::new(1.0, 0.0))), f64::NEG_INFINITY);
    for i in 0..candidates.max(1) as u64 {
        let mut rng = stream(seed, Purpose::Randomization, i);
        let r = CVec::from_fn(m, |_, _| complex_normal(&mut rng));
        let phi = unit_phases(&(&root * r));
        let rate = ctx.rate(f_mat, &outer(&phi));
        if rate > best.1 {
            best = (phi, rate);
        }
    }
    Ok(best)
}

/// Rank-one phase recovery from a feasible `Q*` of the phase SDP at `r_target`.
///
/// Each round re-solves the phase SDP with the extra constraint
/// `u^H Q u ≥ w·Tr Q` (`u` the principal eigenvector of the previous
/// solution), maximizing `u^H Q u`. `w` starts at `λ₁/Tr Q*`, grows by `step`
/// and the step halves after an infeasible round. If the iterate is not rank
/// one after `max_rounds`, or the projected phases lose more than 0.05 bits,
/// Gaussian randomization is tried as well and the better result kept.
pub fn srocr_rank_one(
    ctx: &Stage2Context,
    q_star: &CMat,
    f_mat: &CMat,
    r_target: f64,
    settings: &SrocrSettings,
) -> Result<PhaseRecovery> {
    let m = ctx.n_irs();
    check_square("Q*", q_star, m)?;
    let slack = 0.05;
    let (vals, vecs) = sorted_eigen(q_star);
    let tr = q_star.trace().re;
    let finish = |phi: CVec, path, rounds| {
        let rate = ctx.rate(f_mat, &outer(&phi));
        PhaseRecovery {
            met_target: rate >= r_target - slack,
            phi,
            rate,
            path,
            rounds,
        }
    };

    if !settings.randomization_only && (m == 1 || vals[0] >= (1.0 - 1e-9) * tr) {
        return Ok(finish(unit_phases(&vecs.column(0).into_owned()), Recovery::Eigen, 0));
    }

    let mut srocr = None;
    if !settings.randomization_only && r_target > 0.0 {
        let mut q = q_star.clone();
        let mut w = vals[0] / tr;
        let mut step = settings.step;
        let mut rounds = 0;
        while rounds < settings.max_rounds {
            rounds += 1;
            let (_, uv) = sorted_eigen(&q);
            let u = uv.column(0).into_owned();
            let target = (w + step).min(SROCR_W_MAX);
            let uu = outer(&u);
            let mut l = lift(ctx, Var::Phase, f_mat, r_target);
            for k in 0..m {
                l.sdp.add(Constraint::LinearEq {
                    a: l.sdp.row(&[(l.block.diag_index(k), 1.0)]),
                    b: 1.0,
                });
            }
            let form = l.block.trace_form(&uu);
            let row: Vec<(usize, f64)> = form.iter().map(|&(i, v)| (i, -v)).collect();
            l.sdp.add(Constraint::LinearLe {
                a: l.sdp.row(&row),
                b: -target * m as f64,
            });
            for (i, v) in form {
                l.sdp.set_objective(i, -v);
            }
            match run(&l.sdp)? {
                Some(x) => {
                    q = l.block.assemble(&x);
                    let (v, _) = sorted_eigen(&q);
                    w = v[0] / m as f64;
                    if w >= SROCR_W_MAX {
                        break;
                    }
                }
                None => {
                    step *= 0.5;
                    if step < 1e-3 {
                        break;
                    }
                }
            }
        }
        let (_, uv) = sorted_eigen(&q);
        srocr = Some(finish(unit_phases(&uv.column(0).into_owned()), Recovery::Srocr, rounds));
        if let Some(s) = &srocr {
            if s.met_target && w >= SROCR_W_MAX {
                return Ok(srocr.unwrap());
            }
        }
    }

    let (phi, _) = gaussian_randomization(ctx, q_star, f_mat, settings.candidates, settings.seed)?;
    let gauss = finish(phi, Recovery::Gaussian, srocr.as_ref().map_or(0, |s| s.rounds));
    Ok(match srocr {
        Some(s) if s.rate >= gauss.rate => s,
        _ => gauss,
    })
}

/// Final stage-2 design.
#[derive(Clone, Debug)]
pub struct StageTwoSolution {
    pub f_vec: CVec,
    pub phi_vec: CVec,
    /// Closed-form BTI rate of `(f_vec, phi_vec)`.
    pub rate: f64,
    /// `λ₂/λ₁` of the last beamformer SDP solution.
    pub f_mat_rank_gap: f64,
    /// `λ₂/λ₁` of the last phase SDP solution.
    pub q_mat_rank_gap: f64,
    /// Rate after each AO round, starting with the initial point.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Set when some phase recovery fell more than 0.05 bits below its SDP rate.
    pub recovery_shortfall: bool,
    /// Set when no transmission meets the constraint even at rate 0; then
    /// `f_vec` is zero.
    pub silent: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AoSettings {
    pub eps_bisection: f64,
    pub eps_ao: f64,
    pub max_rounds: usize,
    pub srocr: SrocrSettings,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            eps_bisection: DEFAULT_BISECTION_EPS,
            eps_ao: 1e-3,
            max_rounds: 30,
            srocr: SrocrSettings::default(),
        }
    }
}

/// Scale `f` onto the power budget if roundoff pushed it over.
fn clip_power(f: CVec, p: f64) -> CVec {
    let n2 = f.norm_squared();
    if n2 > p {
        f * Complex64::new((p / n2).sqrt(), 0.0)
    } else {
        f
    }
}

/// Alternate beamformer and phase bisections from `(f0, φ0)`.
///
/// Each block update is accepted only if the closed-form BTI rate of the
/// rank-one pair does not drop, so the trace is non-decreasing. Stops when a
/// round gains at most `eps_ao`.
pub fn alternating_optimization(
    ctx: &Stage2Context,
    f0: &CVec,
    phi0: &CVec,
    settings: &AoSettings,
) -> Result<StageTwoSolution> {
    if f0.len() != ctx.n_tx() || phi0.len() != ctx.n_irs() {
        return Err(Error::Dimension("initial point does not match the channels".into()));
    }
    let mut f = clip_power(f0.clone(), ctx.tx_power);
    let mut phi = unit_phases(phi0);
    let mut rate = ctx.rate_vec(&f, &phi);
    let mut trace = vec![rate];
    let mut f_gap = 0.0;
    let mut q_gap = 0.0;
    let mut converged = false;
    let mut shortfall = false;
    let eps = settings.eps_bisection;
    let r_hi = ctx.r_hi.max(rate + 2.0 * eps);

    for round in 0..settings.max_rounds {
        let start = rate;
        let q = outer(&phi);

        let b = bisect_beamformer(ctx, &q, rate, r_hi, eps)?;
        if !b.lower_infeasible && b.mat.trace().re > 0.0 {
            f_gap = rank_gap(&b.mat);
            if let Ok(cand) = rank_one_extract_f(&b.mat, &ctx.bob_effective(&phi)) {
                let cand = clip_power(cand, ctx.tx_power);
                let r = ctx.rate_vec(&cand, &phi);
                if r >= rate {
                    f = cand;
                    rate = r;
                }
            }
        }

        let fm = outer(&f);
        let b = bisect_phase(ctx, &fm, rate, r_hi, eps)?;
        if !b.lower_infeasible {
            q_gap = rank_gap(&b.mat);
            let mut s = settings.srocr;
            s.seed = s.seed.wrapping_add(round as u64);
            let rec = srocr_rank_one(ctx, &b.mat, &fm, b.rate, &s)?;
            shortfall |= !rec.met_target;
            if rec.rate >= rate {
                phi = rec.phi;
                rate = rec.rate;
            }
        }

        trace.push(rate);
        if rate - start <= settings.eps_ao {
            converged = true;
            break;
        }
    }
    let silent = ctx.raw_rate(&outer(&f), &outer(&phi)) <= 0.0;
    if silent {
        f = CVec::zeros(ctx.n_tx());
        rate = 0.0;
    }
    Ok(StageTwoSolution {
        silent,
        f_vec: f,
        phi_vec: phi,
        rate,
        f_mat_rank_gap: f_gap,
        q_mat_rank_gap: q_gap,
        trace,
        converged,
        recovery_shortfall: shortfall,
    })
}

/// Evaluate a given pair without optimizing it, for closed-form designs.
pub fn fixed_design(ctx: &Stage2Context, f: &CVec, phi: &CVec) -> Result<StageTwoSolution> {
    if f.len() != ctx.n_tx() || phi.len() != ctx.n_irs() {
        return Err(Error::Dimension("design does not match the channels".into()));
    }
    let mut f = clip_power(f.clone(), ctx.tx_power);
    let phi = unit_phases(phi);
    let raw = ctx.raw_rate(&outer(&f), &outer(&phi));
    let silent = raw <= 0.0;
    if silent {
        f = CVec::zeros(ctx.n_tx());
    }
    let rate = raw.max(0.0);
    Ok(StageTwoSolution {
        f_vec: f,
        phi_vec: phi,
        rate,
        f_mat_rank_gap: 0.0,
        q_mat_rank_gap: 0.0,
        trace: vec![rate],
        converged: true,
        recovery_shortfall: false,
        silent,
    })
}

/// Random unit-modulus vector, mainly for tests and benchmarks.
pub fn random_phases<R: Rng>(m: usize, rng: &mut R) -> CVec {
    CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_trivial_cases() {
        let t = BtiTerms {
            a_mat: CMat::zeros(2, 2),
            a_vec: CVec::zeros(2),
            c1: 1.0,
            rho_bar: 3.0,
        };
        assert_eq!(bti_margin(&t), -1.0);
        let t = BtiTerms {
            a_mat: CMat::identity(3, 3),
            a_vec: CVec::zeros(3),
            c1: 0.0,
            rho_bar: 0.0,
        };
        assert!((bti_margin(&t) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn realified_norm_is_frobenius() {
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = Complex64::new(1.5, 0.0);
        a[(2, 2)] = Complex64::new(-0.5, 0.0);
        a[(0, 2)] = Complex64::new(0.3, -0.7);
        a[(2, 0)] = a[(0, 2)].conj();
        let mut v = Vec::new();
        realify_hermitian(&a, &mut v);
        let n: f64 = v.iter().map(|x| x * x).sum();
        assert!((n - a.norm_squared()).abs() < 1e-14);
    }
}
