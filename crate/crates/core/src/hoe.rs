//! Commutator-rank oracle.
//!
//! A Hamiltonian `H(a) = Σ a_n h_n` leaves `ρ` stationary iff `[H(a), ρ] = 0`,
//! so the number of independent constraints a steady state imposes is the
//! real rank of the linear map `a ↦ [H(a), ρ]`. That rank is read off the
//! Gram matrix `K_mn = Re Tr([h_m, ρ]† [h_n, ρ])`, which never materializes a
//! `2^L × 2^L` commutator.
//!
//! With `ρ = Σ_k p_k |v_k⟩⟨v_k|` over all block vectors and `w_nk = h_n v_k`:
//!
//! ```text
//! K_mn = 2 Σ_k p_k² Re⟨w_mk|w_nk⟩ − 2 Re Σ_ab p_a p_b conj(B_m[a,b]) B_n[a,b]
//! B_n[a,b] = ⟨v_a|h_n|v_b⟩
//! ```

use faer::{Mat, Side};

use crate::models::TermBasis;
use crate::parallel::{map_indexed, Parallelism};
use crate::spectral::WeightBlocks;
use crate::{Error, Result, C64};

/// Safety factor on the eigenvalue rank threshold; the Gram matrix squares
/// the singular values of the commutator map.
pub const GRAM_SAFETY: f64 = 1e3;

/// Symmetric positive semidefinite `N × N` Gram matrix.
#[derive(Clone, Debug)]
pub struct HoeGram {
    matrix: Mat<f64>,
    /// Largest diagonal entry of the positive part `2 ZᵀZ`; sets the
    /// rounding scale of `K`.
    scale: f64,
}

impl HoeGram {
    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `aᵀ K a = ‖[H(a), ρ]‖_F²`.
    pub fn quadratic_form(&self, a: &[f64]) -> f64 {
        let n = self.size();
        let mut acc = 0.0;
        for c in 0..n {
            let col = self.matrix.col_as_slice(c);
            acc += a[c] * col.iter().zip(a).map(|(k, x)| k * x).sum::<f64>();
        }
        acc
    }
}

pub fn hoe_gram(basis: &TermBasis, blocks: &WeightBlocks) -> Result<HoeGram> {
    hoe_gram_with(basis, blocks, Parallelism::default())
}

pub fn hoe_gram_with(basis: &TermBasis, blocks: &WeightBlocks, par: Parallelism) -> Result<HoeGram> {
    if blocks.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: blocks.dim() });
    }
    let dim = blocks.dim();
    let states: Vec<(f64, &[C64])> = blocks
        .blocks()
        .iter()
        .flat_map(|b| (0..b.size()).map(move |j| (b.weight, b.vector(j))))
        .collect();
    let q = states.len();
    let n = basis.count();

    // Per term: the weighted applied vectors (real and imaginary parts
    // stacked) and the weighted block matrix elements.
    let columns = map_indexed(par, n, |t| -> Result<(Vec<f64>, Vec<f64>)> {
        let term = &basis.terms()[t];
        let mut z = vec![0.0; 2 * q * dim];
        let mut gamma = vec![0.0; 2 * q * q];
        let mut applied = Vec::with_capacity(q);
        for (k, (p, v)) in states.iter().enumerate() {
            let w = term.apply(v)?;
            let (re, rest) = z[2 * k * dim..].split_at_mut(dim);
            for ((r, i), x) in re.iter_mut().zip(rest[..dim].iter_mut()).zip(&w) {
                *r = p * x.re;
                *i = p * x.im;
            }
            applied.push(w);
        }
        for (a, (pa, va)) in states.iter().enumerate() {
            for (b, (pb, _)) in states.iter().enumerate() {
                let elem: C64 = va.iter().zip(&applied[b]).map(|(x, y)| x.conj() * y).sum();
                let scaled = elem * (pa * pb).sqrt();
                gamma[2 * (a * q + b)] = scaled.re;
                gamma[2 * (a * q + b) + 1] = scaled.im;
            }
        }
        Ok((z, gamma))
    });

    let mut z = Mat::<f64>::zeros(2 * q * dim, n);
    let mut gamma = Mat::<f64>::zeros(2 * q * q, n);
    for (t, col) in columns.into_iter().enumerate() {
        let (zc, gc) = col?;
        z.col_as_slice_mut(t).copy_from_slice(&zc);
        gamma.col_as_slice_mut(t).copy_from_slice(&gc);
    }
    let zz = z.transpose() * &z;
    let scale = (0..n).map(|i| 2.0 * zz[(i, i)]).fold(0.0f64, f64::max);
    let k = (zz - gamma.transpose() * &gamma) * faer::Scale(2.0);
    let matrix = Mat::from_fn(n, n, |r, c| 0.5 * (k[(r, c)] + k[(c, r)]));
    Ok(HoeGram { matrix, scale })
}

/// Numerical rank of `K`: eigenvalues above `max(λ_max, s) · N · ε · 10³`,
/// where `s` is the largest diagonal entry of `2 ZᵀZ`. The extra scale keeps
/// a `K` made entirely of cancellation noise at rank zero.
pub fn hoe_rank(gram: &HoeGram) -> Result<usize> {
    let n = gram.size();
    if n == 0 {
        return Ok(0);
    }
    let vals = gram
        .matrix
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Gram eigensolver failed: {e:?}")))?;
    let largest = vals.iter().copied().fold(gram.scale, f64::max);
    if largest <= 0.0 {
        return Ok(0);
    }
    let threshold = largest * n as f64 * f64::EPSILON * GRAM_SAFETY;
    Ok(vals.iter().filter(|&&v| v > threshold).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{assemble, enumerate_terms, random_instance, ModelKind};
    use crate::spectral::{build_steady_state, eigendecompose, SteadyStateSpec};

    fn blocks_for(kind: ModelKind, length: usize, q: &[usize], seed: u64) -> (TermBasis, WeightBlocks, Vec<f64>) {
        let basis = enumerate_terms(kind, length).unwrap();
        let a = random_instance(kind, length, seed).unwrap();
        let h = assemble(&basis, &a).unwrap().to_dense();
        let eig = eigendecompose(&h).unwrap();
        let (_, blocks) = build_steady_state(&SteadyStateSpec::ladder(q), &eig).unwrap();
        (basis, blocks, a.values)
    }

    #[test]
    fn maximally_mixed_gives_zero_gram() {
        let (basis, blocks, _) = blocks_for(ModelKind::H2, 3, &[8], 1);
        let gram = hoe_gram(&basis, &blocks).unwrap();
        assert!(gram.matrix().norm_max() < 1e-14);
        assert_eq!(hoe_rank(&gram).unwrap(), 0);
    }

    #[test]
    fn true_coefficients_are_in_the_kernel() {
        let (basis, blocks, a) = blocks_for(ModelKind::H2, 4, &[1], 2);
        let gram = hoe_gram(&basis, &blocks).unwrap();
        let norm2: f64 = a.iter().map(|x| x * x).sum();
        assert!(gram.quadratic_form(&a).abs() < 1e-12 * norm2 * gram.matrix().norm_max());
    }

    #[test]
    fn rank_matches_table_entries() {
        let (basis, blocks, _) = blocks_for(ModelKind::H2, 3, &[2, 2], 3);
        assert_eq!(hoe_rank(&hoe_gram(&basis, &blocks).unwrap()).unwrap(), 26);
        let (basis, blocks, _) = blocks_for(ModelKind::H3, 3, &[2, 2], 3);
        assert_eq!(hoe_rank(&hoe_gram(&basis, &blocks).unwrap()).unwrap(), 40);
        let (basis, blocks, _) = blocks_for(ModelKind::H3, 4, &[2, 2], 3);
        assert_eq!(hoe_rank(&hoe_gram(&basis, &blocks).unwrap()).unwrap(), 104);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (basis, blocks, _) = blocks_for(ModelKind::H3, 4, &[2, 1], 4);
        let seq = hoe_gram_with(&basis, &blocks, Parallelism::Sequential).unwrap();
        let par = hoe_gram_with(&basis, &blocks, Parallelism::Rayon).unwrap();
        assert_eq!(seq.matrix(), par.matrix());
    }
}
