//! Lanczos iteration with full reorthogonalization for the lowest few
//! eigenpairs of a Hermitian operator that is only available as a
//! matrix-vector product.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::spectral::{eigendecompose, SpectralDecomposition};
use crate::{Error, Result, C64};

/// A Hermitian operator on `C^dim`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`; `y` is overwritten.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for Mat<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (c, xc) in x.iter().enumerate() {
            for (yr, a) in y.iter_mut().zip(self.col_as_slice(c)) {
                *yr += a * xc;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LanczosOptions {
    /// Ritz residual bound, relative to the largest Ritz value magnitude.
    pub tolerance: f64,
    /// Ritz values are extracted every this many steps.
    pub check_every: usize,
    /// Seed of the starting vector.
    pub seed: u64,
    /// Problems this small, or asking for this large a fraction of the
    /// spectrum, go straight to the dense solver.
    pub dense_cutoff: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tolerance: 1e-15, check_every: 10, seed: 0x5eed, dense_cutoff: 64 }
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Two passes of classical Gram-Schmidt against every stored vector.
fn reorthogonalize(basis: &[Vec<C64>], w: &mut [C64]) {
    for _ in 0..2 {
        let coefs: Vec<C64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, c) in basis.iter().zip(coefs) {
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
    }
}

fn dense_lowest<A: LinearOperator + ?Sized>(op: &A, count: usize) -> Result<SpectralDecomposition> {
    let n = op.dim();
    let mut h = Mat::<C64>::zeros(n, n);
    let mut e = vec![C64::new(0.0, 0.0); n];
    let mut col = vec![C64::new(0.0, 0.0); n];
    for c in 0..n {
        e[c] = C64::new(1.0, 0.0);
        op.apply_into(&e, &mut col);
        e[c] = C64::new(0.0, 0.0);
        h.col_as_slice_mut(c).copy_from_slice(&col);
    }
    // Symmetrize away rounding from the matrix-free product.
    let h = Mat::from_fn(n, n, |r, c| (h[(r, c)] + h[(c, r)].conj()) * 0.5);
    Ok(eigendecompose(&h)?.truncated(count))
}

/// The `count` algebraically smallest eigenpairs of `op`.
///
/// Falls back to a dense decomposition for small problems and whenever the
/// Krylov result fails its explicit residual check.
pub fn lowest_eigenpairs<A: LinearOperator + ?Sized>(
    op: &A,
    count: usize,
    options: &LanczosOptions,
) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenpairs of a {n}-dimensional operator"
        )));
    }
    if n <= options.dense_cutoff || 4 * count >= n {
        return dense_lowest(op, count);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut random_unit = |basis: &[Vec<C64>]| -> Vec<C64> {
        loop {
            let mut v: Vec<C64> = (0..n)
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            reorthogonalize(basis, &mut v);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return v;
            }
        }
    };

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    basis.push(random_unit(&basis));
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut scale = 0.0f64;

    let ritz = loop {
        let j = basis.len() - 1;
        op.apply_into(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= a * vi;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * vi;
            }
        }
        reorthogonalize(&basis, &mut w);
        alpha.push(a);
        let b = norm(&w);
        scale = scale.max(a.abs() + b);
        let m = basis.len();

        let full = m == n;
        if full || (m >= count && m % options.check_every == 0) {
            let t = Mat::<f64>::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = t
                .self_adjoint_eigen(Side::Lower)
                .map_err(|e| Error::Numerical(format!("tridiagonal eigensolver: {e:?}")))?;
            let theta: Vec<f64> = eig.S().column_vector().iter().copied().collect();
            let y = eig.U();
            let span = theta[0].abs().max(theta[m - 1].abs()).max(f64::MIN_POSITIVE);
            let converged =
                full || (0..count).all(|k| (b * y[(m - 1, k)]).abs() <= options.tolerance * span);
            if converged {
                break (theta, y.to_owned());
            }
        }

        if b <= 1e-12 * scale.max(1.0) {
            // Invariant subspace reached; continue from a fresh direction.
            beta.push(0.0);
            let fresh = random_unit(&basis);
            basis.push(fresh);
        } else {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
    };

    let (theta, y) = ritz;
    let m = y.nrows();
    let mut vectors = Mat::<C64>::zeros(n, count);
    for k in 0..count {
        let col = vectors.col_as_slice_mut(k);
        for (i, v) in basis.iter().take(m).enumerate() {
            let c = y[(i, k)];
            for (out, vi) in col.iter_mut().zip(v) {
                *out += c * vi;
            }
        }
    }

    // Explicit residual check guards against misconvergence.
    let span = theta[0].abs().max(theta[m - 1].abs()).max(1.0);
    let mut hv = vec![C64::new(0.0, 0.0); n];
    for k in 0..count {
        let v = vectors.col_as_slice(k);
        op.apply_into(v, &mut hv);
        let res: f64 = hv
            .iter()
            .zip(v)
            .map(|(h, x)| (h - theta[k] * x).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if res > 1e-9 * span {
            log::warn!("Lanczos residual {res:e} too large after {m} steps; using dense solver");
            return dense_lowest(op, count);
        }
    }
    log::debug!("Lanczos converged for {count} pairs in {m} steps (dim {n})");
    SpectralDecomposition::new(theta[..count].to_vec(), vectors)
}
