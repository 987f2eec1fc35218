//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Condition-number ceiling accepted by [`HermitianSolver`].
pub const MAX_CONDITION: f64 = 1e10;

/// Cholesky-based solver for Hermitian positive-definite systems.
///
/// If the plain factorization fails, a diagonal jitter of `1e-12 * trace / n`
/// is added once and the factorization is retried.
#[derive(Clone, Debug)]
pub struct HermitianSolver {
    chol: Cholesky<C64, Dyn>,
    jitter: f64,
    condition_estimate: f64,
}

impl HermitianSolver {
    pub fn new(matrix: &CMat) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::domain("solver needs a non-empty square matrix"));
        }
        let (chol, jitter) = match Cholesky::new(matrix.clone()) {
            Some(c) => (c, 0.0),
            None => {
                let trace: f64 = (0..n).map(|i| matrix[(i, i)].re).sum();
                let jitter = 1e-12 * trace / n as f64;
                let mut m = matrix.clone();
                for i in 0..n {
                    m[(i, i)] += C64::new(jitter, 0.0);
                }
                let c = Cholesky::new(m).ok_or(Error::IllConditioned(f64::INFINITY))?;
                (c, jitter)
            }
        };
        // (max L_ii / min L_ii)^2 is a lower bound on the 2-norm condition number.
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0f64);
        for i in 0..n {
            let d = l[(i, i)].re;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition_estimate = (hi / lo).powi(2);
        if !condition_estimate.is_finite() || condition_estimate > MAX_CONDITION {
            return Err(Error::IllConditioned(condition_estimate));
        }
        Ok(Self {
            chol,
            jitter,
            condition_estimate,
        })
    }

    pub fn solve(&self, rhs: &CVec) -> CVec {
        self.chol.solve(rhs)
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }
}

/// `x^H M y`.
pub fn quad_form(x: &CVec, m: &CMat, y: &CVec) -> C64 {
    x.dotc(&(m * y))
}

/// Largest absolute deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Lower-triangular factor `L` with `L L^H = m` for a Hermitian PSD `m`.
///
/// Falls back to an eigen-decomposition square root (negative eigenvalues
/// clamped to zero) when `m` is only semi-definite.
pub fn psd_factor(m: &CMat) -> Result<CMat> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c.unpack());
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let scale = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0f64, f64::max)
        .max(1e-300);
    let mut lambda = eig.eigenvalues.clone();
    for v in lambda.iter_mut() {
        if *v < -1e-10 * scale {
            return Err(Error::domain(format!(
                "covariance is not positive semi-definite (eigenvalue {v:.3e})"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let n = m.nrows();
    let mut f = eig.eigenvectors.clone();
    for j in 0..n {
        for i in 0..n {
            f[(i, j)] *= lambda[j];
        }
    }
    Ok(f)
}
