use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// A convex function `g` used in a constraint `g(x) <= 0`.
///
/// Implementors return `None` when `x` lies outside the function's domain.
pub trait SmoothConvex: Send + Sync {
    /// Value, gradient and Hessian at `x`.
    fn eval(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>, DMatrix<f64>)>;
}

/// One constraint over the flat real variable vector `x`.
#[derive(Clone)]
pub enum Constraint {
    /// `a·x = b`.
    LinearEq { a: DVector<f64>, b: f64 },
    /// `a·x <= b`.
    LinearLe { a: DVector<f64>, b: f64 },
    /// `‖A x + b‖ <= c·x + d`.
    Soc {
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
    },
    /// `F0 + Σ x_i F_i ⪰ 0` with Hermitian `F0`, `F_i`; terms are `(variable index, F_i)`.
    Lmi {
        f0: DMatrix<C64>,
        terms: Vec<(usize, DMatrix<C64>)>,
    },
    /// `g(x) <= 0` for a smooth convex `g`.
    Smooth(Arc<dyn SmoothConvex>),
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::LinearEq { b, .. } => write!(f, "LinearEq(b={b})"),
            Constraint::LinearLe { b, .. } => write!(f, "LinearLe(b={b})"),
            Constraint::Soc { a, .. } => write!(f, "Soc(rows={})", a.nrows()),
            Constraint::Lmi { f0, terms } => {
                write!(f, "Lmi(n={}, terms={})", f0.nrows(), terms.len())
            }
            Constraint::Smooth(_) => write!(f, "Smooth"),
        }
    }
}

/// Kind of a variable block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarBlock {
    /// One free real scalar.
    Scalar,
    /// An `n x n` Hermitian PSD matrix stored as `n²` reals.
    Hermitian(usize),
}

/// Location of a Hermitian PSD block inside the flat variable vector.
///
/// Layout: the `n` diagonal entries first, then for each `k < l` in row-major
/// order the pair `(Re X_kl, Im X_kl)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianBlock {
    pub offset: usize,
    pub n: usize,
}

impl HermitianBlock {
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Absolute variable index of the diagonal entry `k`.
    pub fn diag_index(&self, k: usize) -> usize {
        self.offset + k
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |k| (k + 1..n).map(move |l| (k, l)))
    }

    /// Basis matrices in layout order, so `X = Σ x_i B_i`.
    pub fn basis(&self) -> Vec<DMatrix<C64>> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            let mut m = DMatrix::zeros(n, n);
            m[(k, k)] = C64::new(1.0, 0.0);
            out.push(m);
        }
        for (k, l) in self.pairs() {
            let mut re = DMatrix::zeros(n, n);
            re[(k, l)] = C64::new(1.0, 0.0);
            re[(l, k)] = C64::new(1.0, 0.0);
            out.push(re);
            let mut im = DMatrix::zeros(n, n);
            im[(k, l)] = C64::new(0.0, 1.0);
            im[(l, k)] = C64::new(0.0, -1.0);
            out.push(im);
        }
        out
    }

    /// Build the Hermitian matrix from the full variable vector.
    pub fn assemble(&self, x: &[f64]) -> DMatrix<C64> {
        let n = self.n;
        let v = &x[self.offset..self.offset + self.len()];
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = C64::new(v[k], 0.0);
        }
        let mut idx = n;
        for (k, l) in self.pairs() {
            let z = C64::new(v[idx], v[idx + 1]);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
            idx += 2;
        }
        m
    }

    /// Write `m` (assumed Hermitian; the upper triangle is read) into `x`.
    pub fn write(&self, m: &DMatrix<C64>, x: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            x[self.offset + k] = m[(k, k)].re;
        }
        let mut idx = self.offset + n;
        for (k, l) in self.pairs() {
            x[idx] = m[(k, l)].re;
            x[idx + 1] = m[(k, l)].im;
            idx += 2;
        }
    }

    /// Coefficients of `x ↦ Re tr(C X)` over this block, as `(variable index, value)`.
    pub fn trace_form(&self, c: &DMatrix<C64>) -> Vec<(usize, f64)> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            out.push((self.offset + k, c[(k, k)].re));
        }
        let mut idx = self.offset + n;
        for (k, l) in self.pairs() {
            out.push((idx, c[(l, k)].re + c[(k, l)].re));
            out.push((idx + 1, c[(k, l)].im - c[(l, k)].im));
            idx += 2;
        }
        out
    }
}

/// A convex program over a flat real vector built from scalar and Hermitian PSD blocks.
///
/// Hermitian blocks carry an implicit `X ⪰ 0` constraint. The objective is
/// `minimize c·x`.
#[derive(Clone, Debug, Default)]
pub struct SdpInstance {
    blocks: Vec<(VarBlock, usize)>,
    n_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl SdpInstance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a free real scalar and return its index.
    pub fn add_scalar(&mut self) -> usize {
        let idx = self.n_vars;
        self.blocks.push((VarBlock::Scalar, idx));
        self.n_vars += 1;
        self.objective.push(0.0);
        idx
    }

    /// Append an `n x n` Hermitian PSD block.
    pub fn add_hermitian(&mut self, n: usize) -> HermitianBlock {
        let offset = self.n_vars;
        self.blocks.push((VarBlock::Hermitian(n), offset));
        self.n_vars += n * n;
        self.objective.resize(self.n_vars, 0.0);
        HermitianBlock { offset, n }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn blocks(&self) -> &[(VarBlock, usize)] {
        &self.blocks
    }

    /// Dimensions of the PSD variable blocks.
    pub fn psd_variable_dims(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter_map(|(b, _)| match b {
                VarBlock::Hermitian(n) => Some(*n),
                VarBlock::Scalar => None,
            })
            .collect()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, idx: usize, coeff: f64) {
        self.objective[idx] = coeff;
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// Dense row from sparse `(index, value)` pairs; repeated indices accumulate.
    pub fn row(&self, entries: &[(usize, f64)]) -> DVector<f64> {
        let mut a = DVector::zeros(self.n_vars);
        for &(i, v) in entries {
            a[i] += v;
        }
        a
    }

    /// Check that every constraint's data matches the variable count.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n_vars;
        for (k, c) in self.constraints.iter().enumerate() {
            let ok = match c {
                Constraint::LinearEq { a, .. } | Constraint::LinearLe { a, .. } => a.len() == n,
                Constraint::Soc { a, b, c, .. } => {
                    a.ncols() == n && a.nrows() == b.len() && c.len() == n
                }
                Constraint::Lmi { f0, terms } => {
                    f0.is_square() && terms.iter().all(|(i, m)| *i < n && m.shape() == f0.shape())
                }
                Constraint::Smooth(_) => true,
            };
            if !ok {
                return Err(format!(
                    "constraint {k} ({c:?}) has inconsistent dimensions"
                ));
            }
        }
        Ok(())
    }
}
