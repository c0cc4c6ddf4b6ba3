//! Continuous-time Lyapunov equation `A Q + Q Aᵀ + W = 0`.
//!
//! Two algorithmically independent solvers are provided. [`solve`] reduces
//! `A` to real Schur form and back-substitutes over the quasi-triangular
//! blocks (Bartels–Stewart). [`solve_kronecker`] vectorizes the equation
//! into `(I ⊗ A + A ⊗ I) vec(Q) = −vec(W)` and solves it densely; it costs
//! `O(n⁶)` and exists to cross-check the first one on small systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schur::{self, RealSchur};

/// Spectral abscissa must be below `-HURWITZ_MARGIN` for a unique stationary solution.
pub const HURWITZ_MARGIN: f64 = 1e-12;

/// Solution of a Lyapunov equation together with its relative residual
/// `‖AQ + QAᵀ + W‖ / ‖W‖` (max-norm).
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub q: DMatrix<f64>,
    pub residual: f64,
}

fn real_schur(a: &DMatrix<f64>) -> Result<RealSchur> {
    schur::real_schur(a).ok_or_else(|| Error::Numerical("real Schur iteration did not converge".into()))
}

fn block_max_real(t: &DMatrix<f64>, start: usize, size: usize) -> f64 {
    if size == 1 {
        return t[(start, start)];
    }
    let (a, b, c, d) = (
        t[(start, start)],
        t[(start, start + 1)],
        t[(start + 1, start)],
        t[(start + 1, start + 1)],
    );
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        half_tr + disc.sqrt()
    } else {
        half_tr
    }
}

/// Largest real part over the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    check_square(a, "A")?;
    if a.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let s = real_schur(a)?;
    Ok(s.blocks
        .iter()
        .map(|&(k, size)| block_max_real(&s.t, k, size))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Returns `Err(NotHurwitz)` unless every eigenvalue of `a` has real part below `-HURWITZ_MARGIN`.
pub fn ensure_hurwitz(a: &DMatrix<f64>) -> Result<f64> {
    let max_real = spectral_abscissa(a)?;
    if max_real < -HURWITZ_MARGIN {
        Ok(max_real)
    } else {
        Err(Error::NotHurwitz { max_real })
    }
}

fn check_square(a: &DMatrix<f64>, name: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Shape(format!(
            "{name} must be square, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_inputs(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<()> {
    check_square(a, "A")?;
    check_square(w, "W")?;
    if a.nrows() != w.nrows() {
        return Err(Error::Shape(format!(
            "A is {0}×{0} but W is {1}×{1}",
            a.nrows(),
            w.nrows()
        )));
    }
    Ok(())
}

/// Relative max-norm residual of `A Q + Q Aᵀ + W`.
pub fn residual(a: &DMatrix<f64>, q: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let r = a * q + q * a.transpose() + w;
    let scale = w.amax();
    if scale == 0.0 {
        r.amax()
    } else {
        r.amax() / scale
    }
}

/// Bartels–Stewart solve of `A Q + Q Aᵀ + W = 0` for Hurwitz `A`.
pub fn solve(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<LyapunovSolution> {
    check_inputs(a, w)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(LyapunovSolution {
            q: DMatrix::zeros(0, 0),
            residual: 0.0,
        });
    }
    let schur = real_schur(a)?;
    let max_real = schur
        .blocks
        .iter()
        .map(|&(k, size)| block_max_real(&schur.t, k, size))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_real >= -HURWITZ_MARGIN {
        return Err(Error::NotHurwitz { max_real });
    }

    let (u, t) = (&schur.q, &schur.t);
    // T Y + Y Tᵀ = F with F = −Uᵀ W U and Q = U Y Uᵀ.
    let f = -(u.transpose() * w * u);
    let mut y = DMatrix::<f64>::zeros(n, n);
    let blocks = &schur.blocks;

    for (bj, &(j0, nj)) in blocks.iter().enumerate().rev() {
        for (bi, &(i0, ni)) in blocks.iter().enumerate().rev() {
            let mut rhs = f.view((i0, j0), (ni, nj)).into_owned();
            // Blocks right of the diagonal in T (rows below i in Y) and in column blocks after j.
            for &(k0, nk) in &blocks[bi + 1..] {
                rhs -= t.view((i0, k0), (ni, nk)) * y.view((k0, j0), (nk, nj));
            }
            for &(l0, nl) in &blocks[bj + 1..] {
                rhs -= y.view((i0, l0), (ni, nl)) * t.view((j0, l0), (nj, nl)).transpose();
            }
            let tii = t.view((i0, i0), (ni, ni)).into_owned();
            let tjj = t.view((j0, j0), (nj, nj)).into_owned();
            let block = small_sylvester(&tii, &tjj, &rhs)?;
            y.view_mut((i0, j0), (ni, nj)).copy_from(&block);
        }
    }

    let mut q = u * y * u.transpose();
    q = (&q + q.transpose()) * 0.5;
    let residual = residual(a, &q, w);
    Ok(LyapunovSolution { q, residual })
}

/// Solves `P X + X Rᵀ = C` for blocks of size at most 2×2.
fn small_sylvester(p: &DMatrix<f64>, r: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (np, nr) = (p.nrows(), r.nrows());
    if np == 1 && nr == 1 {
        let denom = p[(0, 0)] + r[(0, 0)];
        return Ok(DMatrix::from_element(1, 1, c[(0, 0)] / denom));
    }
    // Column-major vec: (I_r ⊗ P + R ⊗ I_p) vec(X) = vec(C).
    let size = np * nr;
    let mut k = DMatrix::<f64>::zeros(size, size);
    for col in 0..nr {
        for row in 0..np {
            let idx = col * np + row;
            for p_col in 0..np {
                k[(idx, col * np + p_col)] += p[(row, p_col)];
            }
            for r_col in 0..nr {
                k[(idx, r_col * np + row)] += r[(col, r_col)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_column_slice(c.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular block in Schur back-substitution".into()))?;
    Ok(DMatrix::from_column_slice(np, nr, x.as_slice()))
}

/// Dense Kronecker-vectorization solve; intended as a test oracle for small systems.
pub fn solve_kronecker(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<LyapunovSolution> {
    check_inputs(a, w)?;
    let n = a.nrows();
    ensure_hurwitz(a)?;
    let size = n * n;
    let mut k = DMatrix::<f64>::zeros(size, size);
    // vec(A Q) = (I ⊗ A) vec(Q), vec(Q Aᵀ) = (A ⊗ I) vec(Q), column-major.
    for col in 0..n {
        for row in 0..n {
            let idx = col * n + row;
            for m in 0..n {
                k[(idx, col * n + m)] += a[(row, m)];
                k[(idx, m * n + row)] += a[(col, m)];
            }
        }
    }
    let rhs = -nalgebra::DVector::from_column_slice(w.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Kronecker system".into()))?;
    let mut q = DMatrix::from_column_slice(n, n, x.as_slice());
    q = (&q + q.transpose()) * 0.5;
    let residual = residual(a, &q, w);
    Ok(LyapunovSolution { q, residual })
}
