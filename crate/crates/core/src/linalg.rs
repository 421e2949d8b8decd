//! Dense linear-algebra helpers: jittered Cholesky and the covariance factor
//! of a low-rank-plus-isotropic precision matrix.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Diagonal jitter escalation used when a Cholesky factorization fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub start: f64,
    pub max: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            start: 1e-8,
            max: 1e-4,
        }
    }
}

impl Jitter {
    pub fn doubled(self) -> Self {
        Self {
            start: self.start * 2.0,
            max: self.max * 2.0,
        }
    }
}

/// Cholesky of `a`, retrying with `start, 10·start, …, max` added to the
/// diagonal. Returns the factor and the jitter that was needed (0 if none).
pub fn cholesky_jittered<T: Scalar>(
    a: &DMatrix<T>,
    jitter: Jitter,
    context: &str,
) -> Result<(Cholesky<T, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let mut eps = jitter.start;
    while eps <= jitter.max * (1.0 + 1e-9) {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += T::lit(eps);
        }
        if let Some(c) = Cholesky::new(b) {
            return Ok((c, eps));
        }
        eps *= 10.0;
    }
    Err(Error::Cholesky {
        context: context.to_string(),
        max_jitter: jitter.max,
    })
}

/// `(C + Cᵀ) / 2`, in place.
pub fn symmetrize<T: Scalar>(c: &mut DMatrix<T>) {
    let n = c.nrows();
    let half = T::lit(0.5);
    for j in 0..n {
        for i in (j + 1)..n {
            let v = (c[(i, j)] + c[(j, i)]) * half;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
}

/// Precision matrix `λI + GᵀG` where `G` has few rows (one per datum) and
/// many columns (one per network parameter).
///
/// Everything the Laplace machinery needs is obtained from the small Gram
/// matrix `GGᵀ`: log-determinants for the evidence, and the exact
/// lower-triangular Cholesky factor of the covariance `(λI + GᵀG)⁻¹` via a
/// sequence of rank-one downdates of `λ^{-1/2} I`.
#[derive(Debug, Clone)]
pub struct LowRankPrecision<T: Scalar> {
    g: DMatrix<T>,
    eigenvalues: DVector<T>,
    eigenvectors: DMatrix<T>,
}

impl<T: Scalar> LowRankPrecision<T> {
    pub fn new(g: DMatrix<T>) -> Self {
        let gram = &g * g.transpose();
        let eig = SymmetricEigen::new(gram);
        let eigenvalues = eig.eigenvalues.map(|e| if e > T::zero() { e } else { T::zero() });
        Self {
            g,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    pub fn rank_bound(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<T> {
        &self.g
    }

    /// Nonzero spectrum of `GᵀG` (padded with zeros up to the row count).
    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    /// `log det(λI + GᵀG) = p log λ + Σ log(1 + e_i/λ)` (Sylvester).
    pub fn log_det(&self, precision: T) -> T {
        let mut acc = T::lit(self.dim() as f64) * precision.ln();
        for e in self.eigenvalues.iter() {
            acc += (T::one() + *e / precision).ln();
        }
        acc
    }

    /// `trace((λI + GᵀG)⁻¹)`.
    pub fn trace_covariance(&self, precision: T) -> T {
        let p = T::lit(self.dim() as f64);
        let mut acc = p / precision;
        for e in self.eigenvalues.iter() {
            acc -= *e / (precision * (precision + *e));
        }
        acc
    }

    pub fn dense_precision(&self, precision: T) -> DMatrix<T> {
        let mut a = self.g.transpose() * &self.g;
        for i in 0..a.nrows() {
            a[(i, i)] += precision;
        }
        a
    }

    /// Lower-triangular `L` with `L Lᵀ = (λI + GᵀG)⁻¹` and positive diagonal.
    pub fn covariance_factor(&self, precision: T) -> Result<DMatrix<T>> {
        if precision <= T::zero() {
            return Err(Error::Data("prior precision must be positive".into()));
        }
        let p = self.dim();
        let emax = self
            .eigenvalues
            .iter()
            .fold(T::zero(), |a, &b| if b > a { b } else { a });
        let tol = emax * T::lit(1e-13) + T::lit(1e-300_f64.max(f64::MIN_POSITIVE));
        let keep: Vec<usize> = (0..self.eigenvalues.len())
            .filter(|&i| self.eigenvalues[i] > tol)
            .collect();

        let mut l = DMatrix::<T>::zeros(p, p);
        let d0 = T::one() / precision.sqrt();
        for i in 0..p {
            l[(i, i)] = d0;
        }
        if keep.is_empty() {
            return Ok(l);
        }

        // Columns of `w` are b_i = (λ(λ+e_i))^{-1/2} Gᵀ u_i, so that
        // Σ = λ⁻¹ I − Σ_i b_i b_iᵀ.
        let mut u = DMatrix::<T>::zeros(self.eigenvectors.nrows(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let scale = T::one() / (precision * (precision + self.eigenvalues[i])).sqrt();
            u.set_column(c, &(self.eigenvectors.column(i) * scale));
        }
        let mut w = self.g.transpose() * u;

        match downdate(&mut l, &mut w) {
            Ok(()) => Ok(l),
            Err(col) => {
                log::debug!("covariance downdate lost definiteness at column {col}; using dense path");
                self.dense_covariance_factor(precision)
            }
        }
    }

    fn dense_covariance_factor(&self, precision: T) -> Result<DMatrix<T>> {
        let a = self.dense_precision(precision);
        let chol = Cholesky::new(a).ok_or_else(|| Error::Cholesky {
            context: "Laplace precision".into(),
            max_jitter: 0.0,
        })?;
        let mut sigma = chol.inverse();
        symmetrize(&mut sigma);
        let (c, _) = cholesky_jittered(&sigma, Jitter::default(), "Laplace covariance")?;
        Ok(c.l())
    }
}

/// Applies `L Lᵀ ← L Lᵀ − Σ_k w_k w_kᵀ` column by column. On loss of
/// definiteness returns the failing column.
fn downdate<T: Scalar>(l: &mut DMatrix<T>, w: &mut DMatrix<T>) -> std::result::Result<(), usize> {
    let p = l.nrows();
    let r = w.ncols();
    let ls = l.as_mut_slice();
    let ws = w.as_mut_slice();
    for j in 0..p {
        let diag = j * p + j;
        for k in 0..r {
            let wkj = ws[k * p + j];
            if wkj == T::zero() {
                continue;
            }
            let ljj = ls[diag];
            let r2 = ljj * ljj - wkj * wkj;
            if !(r2 > T::zero()) {
                return Err(j);
            }
            let rr = r2.sqrt();
            let c = rr / ljj;
            let s = wkj / ljj;
            let inv_c = T::one() / c;
            ls[diag] = rr;
            let lcol = &mut ls[diag + 1..(j + 1) * p];
            let wcol = &mut ws[k * p + j + 1..(k + 1) * p];
            for (li, wi) in lcol.iter_mut().zip(wcol.iter_mut()) {
                let nl = (*li - s * *wi) * inv_c;
                *wi = c * *wi - s * nl;
                *li = nl;
            }
        }
    }
    Ok(())
}
