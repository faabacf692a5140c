use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::instance::{Constraint, SdpInstance, SmoothConvex, VarBlock};
use crate::linalg::{cholesky_inverse, hermitian_cholesky};
use crate::{ConicSolver, Outcome, Solution, SolverError, C64};

/// Tuning knobs for [`BarrierSolver`].
#[derive(Clone, Debug)]
pub struct BarrierSettings {
    /// Barrier parameter growth factor per outer iteration.
    pub mu: f64,
    /// Relative duality-gap target: stop when `θ/t <= gap_tol·(1 + |c·x|)`.
    pub gap_tol: f64,
    /// Phase-I threshold: a best achievable shift above `-feas_tol` is reported infeasible.
    pub feas_tol: f64,
    /// Newton decrement threshold `λ²/2` for centering.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            mu: 20.0,
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            newton_tol: 1e-10,
            max_newton: 60,
            max_outer: 80,
        }
    }
}

/// Log-barrier interior-point method with a phase-I feasibility stage.
#[derive(Clone, Debug, Default)]
pub struct BarrierSolver {
    pub settings: BarrierSettings,
}

impl BarrierSolver {
    pub fn new(settings: BarrierSettings) -> Self {
        Self { settings }
    }
}

impl ConicSolver for BarrierSolver {
    fn solve_from(
        &self,
        inst: &SdpInstance,
        start: Option<&[f64]>,
    ) -> Result<Outcome, SolverError> {
        inst.validate().map_err(SolverError::Dimension)?;
        let program = match Program::lower(inst)? {
            Some(p) => p,
            None => {
                return Ok(Outcome::Infeasible {
                    bound: f64::INFINITY,
                })
            }
        };
        if let Some(s) = start {
            if s.len() != inst.n_vars() {
                return Err(SolverError::Dimension(format!(
                    "start has {} entries, expected {}",
                    s.len(),
                    inst.n_vars()
                )));
            }
        }
        program.run(start, &self.settings)
    }
}

enum Prim {
    Lin {
        a: DVector<f64>,
        b: f64,
    },
    Soc {
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
    },
    Lmi {
        f0: DMatrix<C64>,
        terms: Vec<(usize, DMatrix<C64>)>,
    },
    Smooth(std::sync::Arc<dyn SmoothConvex>),
}

impl Prim {
    fn degree(&self) -> f64 {
        match self {
            Prim::Lin { .. } | Prim::Smooth(_) => 1.0,
            Prim::Soc { .. } => 2.0,
            Prim::Lmi { f0, .. } => f0.nrows() as f64,
        }
    }

    /// Amount by which the constraint is violated; strictly feasible iff negative.
    fn violation(&self, x: &DVector<f64>) -> Result<f64, SolverError> {
        Ok(match self {
            Prim::Lin { a, b } => a.dot(x) - b,
            Prim::Soc { a, b, c, d } => (a * x + b).norm() - (c.dot(x) + d),
            Prim::Lmi { f0, terms } => {
                let s = lmi_matrix(f0, terms, x, 0.0);
                let eig = SymmetricEigen::new(s).eigenvalues;
                -eig.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            Prim::Smooth(g) => {
                g.eval(x)
                    .ok_or_else(|| {
                        SolverError::Numerical(
                            "start point outside a smooth constraint's domain".into(),
                        )
                    })?
                    .0
            }
        })
    }
}

fn lmi_matrix(
    f0: &DMatrix<C64>,
    terms: &[(usize, DMatrix<C64>)],
    x: &DVector<f64>,
    s: f64,
) -> DMatrix<C64> {
    let mut m = f0.clone();
    for (i, f) in terms {
        let xi = x[*i];
        if xi != 0.0 {
            m.zip_apply(f, |a, b| *a += b * xi);
        }
    }
    if s != 0.0 {
        for k in 0..m.nrows() {
            m[(k, k)].re += s;
        }
    }
    // symmetrize against roundoff
    let mh = m.adjoint();
    (m + mh) * C64::new(0.5, 0.0)
}

/// Phase I searches within this multiple of `1 + ‖x_start‖_∞` of the start,
/// which keeps its barrier bounded on unbounded feasible sets.
const PHASE1_RADIUS: f64 = 1e3;

struct Ball {
    center: DVector<f64>,
    r2: f64,
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

struct Program {
    n: usize,
    c: DVector<f64>,
    prims: Vec<Prim>,
    theta: f64,
    /// Particular solution of the equality system.
    x0: DVector<f64>,
    /// Orthonormal nullspace basis of the equality system (`None` = no equalities).
    null: Option<DMatrix<f64>>,
}

impl Program {
    /// Returns `Ok(None)` when the equality constraints are inconsistent.
    fn lower(inst: &SdpInstance) -> Result<Option<Self>, SolverError> {
        let n = inst.n_vars();
        let mut prims = Vec::new();
        let mut eq_rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for c in inst.constraints() {
            match c {
                Constraint::LinearEq { a, b } => eq_rows.push((a.clone(), *b)),
                Constraint::LinearLe { a, b } => prims.push(Prim::Lin {
                    a: a.clone(),
                    b: *b,
                }),
                Constraint::Soc { a, b, c, d } => prims.push(Prim::Soc {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    d: *d,
                }),
                Constraint::Lmi { f0, terms } => prims.push(Prim::Lmi {
                    f0: f0.clone(),
                    terms: terms.clone(),
                }),
                Constraint::Smooth(g) => prims.push(Prim::Smooth(g.clone())),
            }
        }
        for (block, offset) in inst.blocks() {
            if let VarBlock::Hermitian(m) = *block {
                let hb = crate::HermitianBlock {
                    offset: *offset,
                    n: m,
                };
                let terms = hb
                    .basis()
                    .into_iter()
                    .enumerate()
                    .map(|(k, b)| (*offset + k, b))
                    .collect();
                prims.push(Prim::Lmi {
                    f0: DMatrix::zeros(m, m),
                    terms,
                });
            }
        }
        let theta = prims.iter().map(Prim::degree).sum();
        let c = DVector::from_column_slice(inst.objective());

        let (x0, null) = if eq_rows.is_empty() {
            (DVector::zeros(n), None)
        } else {
            let p = eq_rows.len();
            let mut e = DMatrix::zeros(p, n);
            let mut rhs = DVector::zeros(p);
            for (r, (a, b)) in eq_rows.iter().enumerate() {
                e.set_row(r, &a.transpose());
                rhs[r] = *b;
            }
            let svd = e.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let tol = 1e-12 * smax.max(1.0) * n as f64;
            let x0 = svd
                .solve(&rhs, tol)
                .map_err(|m| SolverError::Numerical(m.to_string()))?;
            let resid = (&e * &x0 - &rhs).norm();
            if resid > 1e-9 * (1.0 + rhs.norm()) {
                return Ok(None);
            }
            let vt = svd.v_t.expect("requested V^T");
            let mut proj = DMatrix::<f64>::identity(n, n);
            for (k, &sv) in svd.singular_values.iter().enumerate() {
                if sv > tol {
                    let r = vt.row(k).transpose();
                    proj -= &r * r.transpose();
                }
            }
            let eig = SymmetricEigen::new(proj);
            let cols: Vec<DVector<f64>> = eig
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.5)
                .map(|(k, _)| eig.eigenvectors.column(k).into_owned())
                .collect();
            let null = if cols.is_empty() {
                DMatrix::zeros(n, 0)
            } else {
                DMatrix::from_columns(&cols)
            };
            (x0, Some(null))
        };

        Ok(Some(Self {
            n,
            c,
            prims,
            theta,
            x0,
            null,
        }))
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.null {
            None => x.clone(),
            Some(nb) => &self.x0 + nb * (nb.transpose() * (x - &self.x0)),
        }
    }

    /// Barrier value, gradient and Hessian; with `s = Some(_)` the shift is an
    /// extra trailing coordinate.
    fn eval(&self, x: &DVector<f64>, s: Option<f64>) -> Option<Eval> {
        self.eval_in(x, s, None)
    }

    /// As [`Program::eval`], optionally adding the ball barrier
    /// `-ln(r² - ‖x - c‖²)` that keeps phase I bounded.
    fn eval_in(&self, x: &DVector<f64>, s: Option<f64>, ball: Option<&Ball>) -> Option<Eval> {
        let n = self.n;
        let dim = n + usize::from(s.is_some());
        let sh = s.unwrap_or(0.0);
        let mut value = 0.0;
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);

        for p in &self.prims {
            match p {
                Prim::Lin { a, b } => {
                    let u = b - a.dot(x) + sh;
                    if u <= 0.0 || !u.is_finite() {
                        return None;
                    }
                    value -= u.ln();
                    // slack gradient in extended space is (-a, 1)
                    let mut v = DVector::zeros(dim);
                    v.rows_mut(0, n).copy_from(&(-a));
                    if s.is_some() {
                        v[n] = 1.0;
                    }
                    grad -= &v / u;
                    hess.ger(1.0 / (u * u), &v, &v, 1.0);
                }
                Prim::Soc { a, b, c, d } => {
                    let y = a * x + b;
                    let t = c.dot(x) + d + sh;
                    let psi = t * t - y.norm_squared();
                    if t <= 0.0 || psi <= 0.0 || !psi.is_finite() {
                        return None;
                    }
                    value -= psi.ln();
                    let mut tau = DVector::zeros(dim);
                    tau.rows_mut(0, n).copy_from(c);
                    if s.is_some() {
                        tau[n] = 1.0;
                    }
                    let aty = a.transpose() * &y;
                    let mut gpsi = &tau * (2.0 * t);
                    gpsi.rows_mut(0, n).axpy(-2.0, &aty, 1.0);
                    grad -= &gpsi / psi;
                    hess.ger(1.0 / (psi * psi), &gpsi, &gpsi, 1.0);
                    hess.ger(-2.0 / psi, &tau, &tau, 1.0);
                    let ata = a.transpose() * a;
                    let mut blk = hess.view_mut((0, 0), (n, n));
                    blk += ata * (2.0 / psi);
                }
                Prim::Lmi { f0, terms } => {
                    let sm = lmi_matrix(f0, terms, x, sh);
                    let l = hermitian_cholesky(&sm)?;
                    let logdet: f64 = (0..l.nrows()).map(|k| 2.0 * l[(k, k)].re.ln()).sum();
                    value -= logdet;
                    let sinv = cholesky_inverse(&l);
                    let ws: Vec<DMatrix<C64>> = terms.iter().map(|(_, f)| &sinv * f).collect();
                    let wts: Vec<DMatrix<C64>> = ws.iter().map(|w| w.transpose()).collect();
                    for (k, (i, _)) in terms.iter().enumerate() {
                        grad[*i] -= ws[k].trace().re;
                        for (m, (j, _)) in terms.iter().enumerate().skip(k) {
                            let v = ws[k].zip_fold(&wts[m], 0.0, |acc, p, q| acc + (p * q).re);
                            hess[(*i, *j)] += v;
                            if m != k {
                                hess[(*j, *i)] += v;
                            }
                        }
                    }
                    if s.is_some() {
                        grad[n] -= sinv.trace().re;
                        let st = sinv.transpose();
                        for (k, (i, _)) in terms.iter().enumerate() {
                            let v = ws[k].zip_fold(&st, 0.0, |acc, p, q| acc + (p * q).re);
                            hess[(*i, n)] += v;
                            hess[(n, *i)] += v;
                        }
                        hess[(n, n)] += sinv.zip_fold(&st, 0.0, |acc, p, q| acc + (p * q).re);
                    }
                }
                Prim::Smooth(g) => {
                    let (gv, gg, gh) = g.eval(x)?;
                    let u = sh - gv;
                    if u <= 0.0 || !u.is_finite() {
                        return None;
                    }
                    value -= u.ln();
                    let mut v = DVector::zeros(dim);
                    v.rows_mut(0, n).copy_from(&(-&gg));
                    if s.is_some() {
                        v[n] = 1.0;
                    }
                    grad -= &v / u;
                    hess.ger(1.0 / (u * u), &v, &v, 1.0);
                    let mut blk = hess.view_mut((0, 0), (n, n));
                    blk += gh / u;
                }
            }
        }
        if let Some(b) = ball {
            let dx = x - &b.center;
            let u = b.r2 - dx.norm_squared();
            if u <= 0.0 {
                return None;
            }
            value -= u.ln();
            grad.rows_mut(0, n).axpy(2.0 / u, &dx, 1.0);
            let mut blk = hess.view_mut((0, 0), (n, n));
            blk.ger(4.0 / (u * u), &dx, &dx, 1.0);
            for k in 0..n {
                blk[(k, k)] += 2.0 / u;
            }
        }
        Some(Eval { value, grad, hess })
    }

    /// Reduced-space basis for the extended coordinates.
    fn basis(&self, ext: bool) -> Option<DMatrix<f64>> {
        self.null.as_ref().map(|nb| {
            if !ext {
                return nb.clone();
            }
            let (r, k) = nb.shape();
            let mut m = DMatrix::zeros(r + 1, k + 1);
            m.view_mut((0, 0), (r, k)).copy_from(nb);
            m[(r, k)] = 1.0;
            m
        })
    }

    /// Newton centering of `t·cost·z + φ(z)`. Returns the number of Newton steps.
    /// With `stop_negative_shift`, the shift coordinate is the last entry and the
    /// method stops as soon as it becomes negative.
    #[allow(clippy::too_many_arguments)]
    fn center(
        &self,
        z: &mut DVector<f64>,
        cost: &DVector<f64>,
        t: f64,
        ext: bool,
        stop_negative_shift: bool,
        ball: Option<&Ball>,
        settings: &BarrierSettings,
    ) -> Result<(usize, f64), SolverError> {
        let basis = self.basis(ext);
        let split = |z: &DVector<f64>| -> (DVector<f64>, Option<f64>) {
            if ext {
                (z.rows(0, self.n).into_owned(), Some(z[self.n]))
            } else {
                (z.clone(), None)
            }
        };
        let merit = |z: &DVector<f64>| -> Option<(f64, Eval)> {
            let (x, s) = split(z);
            let e = self.eval_in(&x, s, ball)?;
            Some((t * cost.dot(z) + e.value, e))
        };
        let (mut f, mut e) = merit(z).ok_or_else(|| {
            SolverError::Numerical("centering started outside the barrier domain".into())
        })?;
        let mut decrement = f64::INFINITY;
        for it in 0..settings.max_newton {
            let g = cost * t + &e.grad;
            let (gr, hr) = match &basis {
                None => (g, e.hess.clone()),
                Some(b) => (b.transpose() * &g, b.transpose() * &e.hess * b),
            };
            let dr = newton_solve(&hr, &gr)?;
            let lam2 = -gr.dot(&dr);
            decrement = lam2.max(0.0);
            if lam2 / 2.0 <= settings.newton_tol {
                return Ok((it, decrement));
            }
            let dz = match &basis {
                None => dr,
                Some(b) => b * dr,
            };
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha > 1e-16 {
                let cand = &*z + &dz * alpha;
                if let Some((fc, ec)) = merit(&cand) {
                    if fc <= f - 0.25 * alpha * lam2 + 1e-13 * f.abs().max(1.0) {
                        accepted = Some((cand, fc, ec));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((cand, fc, ec)) => {
                    *z = cand;
                    f = fc;
                    e = ec;
                }
                None => return Ok((it, decrement)),
            }
            if stop_negative_shift && z[self.n] < 0.0 {
                return Ok((it + 1, decrement));
            }
            if !f.is_finite() || f < -1e300 {
                return Err(SolverError::Unbounded);
            }
        }
        Ok((settings.max_newton, decrement))
    }

    fn run(
        &self,
        start: Option<&[f64]>,
        settings: &BarrierSettings,
    ) -> Result<Outcome, SolverError> {
        let n = self.n;
        let mut x = match start {
            Some(s) => self.project(&DVector::from_column_slice(s)),
            None => self.x0.clone(),
        };
        let mut iterations = 0;

        // phase I
        let mut worst = f64::NEG_INFINITY;
        for p in &self.prims {
            worst = worst.max(p.violation(&x)?);
        }
        if worst >= 0.0 || self.eval(&x, None).is_none() {
            let s0 = worst + 0.5 * (1.0 + worst.abs());
            let mut z = DVector::zeros(n + 1);
            z.rows_mut(0, n).copy_from(&x);
            z[n] = s0;
            let mut cost = DVector::zeros(n + 1);
            cost[n] = 1.0;
            let ball = Ball {
                center: x.clone(),
                r2: (PHASE1_RADIUS * (1.0 + x.amax())).powi(2),
            };
            let mut t = 1.0 / (1.0 + s0.abs());
            let mut feasible = false;
            for _ in 0..settings.max_outer {
                let (its, _) = self.center(&mut z, &cost, t, true, true, Some(&ball), settings)?;
                iterations += its;
                if z[n] < 0.0 {
                    feasible = true;
                    break;
                }
                let gap = self.theta / t;
                let s = z[n];
                if s - gap > 0.0 {
                    return Ok(Outcome::Infeasible { bound: s - gap });
                }
                if gap < settings.feas_tol && s > -settings.feas_tol {
                    return Ok(Outcome::Infeasible { bound: s - gap });
                }
                t *= settings.mu;
            }
            if !feasible {
                return Err(SolverError::IterationLimit);
            }
            x = z.rows(0, n).into_owned();
        }

        let objective_is_zero = self.c.iter().all(|v| *v == 0.0);
        if objective_is_zero {
            return Ok(Outcome::Solved(Solution {
                objective: 0.0,
                x: x.as_slice().to_vec(),
                gap: 0.0,
                iterations,
            }));
        }

        // phase II
        let e = self
            .eval(&x, None)
            .ok_or_else(|| SolverError::Numerical("phase I returned a boundary point".into()))?;
        let mut t = initial_t(&self.c, &e, self.basis(false).as_ref());
        let mut z = x;
        for _ in 0..settings.max_outer {
            let (its, _) = self.center(&mut z, &self.c, t, false, false, None, settings)?;
            iterations += its;
            let obj = self.c.dot(&z);
            let gap = self.theta / t;
            if gap <= settings.gap_tol * (1.0 + obj.abs()) {
                return Ok(Outcome::Solved(Solution {
                    objective: obj,
                    x: z.as_slice().to_vec(),
                    gap,
                    iterations,
                }));
            }
            t *= settings.mu;
        }
        Err(SolverError::IterationLimit)
    }
}

fn initial_t(c: &DVector<f64>, e: &Eval, basis: Option<&DMatrix<f64>>) -> f64 {
    let (cr, gr, hr) = match basis {
        None => (c.clone(), e.grad.clone(), e.hess.clone()),
        Some(b) => (
            b.transpose() * c,
            b.transpose() * &e.grad,
            b.transpose() * &e.hess * b,
        ),
    };
    let Ok(hc) = newton_solve(&hr, &cr) else {
        return 1.0;
    };
    // newton_solve returns -H⁻¹c
    let num = gr.dot(&hc);
    let den = -cr.dot(&hc);
    let t = if den > 0.0 { num / den } else { 1.0 };
    if t.is_finite() && t > 0.0 {
        t.clamp(1e-6, 1e6)
    } else {
        1.0
    }
}

/// Solve `H d = -g` for a symmetric positive (semi)definite `H`, regularizing on failure.
fn newton_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>, SolverError> {
    if h.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let hs = (h + h.transpose()) * 0.5;
    let scale = hs
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = hs.clone();
        if ridge > 0.0 {
            for k in 0..m.nrows() {
                m[(k, k)] += ridge;
            }
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Ok(d);
            }
        }
        ridge = if ridge == 0.0 {
            1e-14 * scale
        } else {
            ridge * 100.0
        };
    }
    Err(SolverError::Numerical(
        "Newton system is not positive definite".into(),
    ))
}
