//! Orthogonal-space equations: linear constraints on the coefficients that
//! follow from `H` mapping each weight block into itself.
//!
//! For blocks `u_m` and the complement `W` of their sum, every generic
//! Hamiltonian with the given steady state satisfies
//!
//! ```text
//! Σ_n a_n ⟨λ_{m'}^i| h_n |λ_m^j⟩ = 0     for m < m'
//! Σ_n a_n ⟨ν_l|      h_n |λ_m^j⟩ = 0     for ν_l ∈ W
//! ```
//!
//! Each complex equation contributes a real and an imaginary row. The
//! number of rows is `2 Σ_{m<m'} q_m q_{m'} + 2Q(2^L − Q)`; the cross sum is
//! over unordered pairs because the `(m', m)` equations are the complex
//! conjugates of the `(m, m')` ones.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::models::{CoefficientVector, ModelKind, TermBasis};
use crate::parallel::{map_indexed, Parallelism};
use crate::spectral::WeightBlocks;
use crate::{Error, Result, C64};

/// Degeneracies `(q_1, …, q_M)` of the nonzero weights at chain length `L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneracyProfile {
    q: Vec<usize>,
    length: usize,
}

impl DegeneracyProfile {
    pub fn new(q: Vec<usize>, length: usize) -> Result<Self> {
        if q.is_empty() || q.contains(&0) {
            return Err(Error::InvalidArgument(format!("degeneracies must be positive, got {q:?}")));
        }
        if length == 0 || length > 40 {
            return Err(Error::InvalidArgument(format!("chain length {length} out of range")));
        }
        let total: usize = q.iter().sum();
        if total as u128 > 1u128 << length {
            return Err(Error::InvalidArgument(format!(
                "total degeneracy {total} exceeds the dimension 2^{length}"
            )));
        }
        Ok(DegeneracyProfile { q, length })
    }

    pub fn q(&self) -> &[usize] {
        &self.q
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn total(&self) -> usize {
        self.q.iter().sum()
    }
}

/// Predicted number of linearly independent real equations, `S`.
pub fn predicted_lie_count(profile: &DegeneracyProfile) -> u64 {
    let q: Vec<u64> = profile.q.iter().map(|&v| v as u64).collect();
    let total: u64 = q.iter().sum();
    let dim = 1u64 << profile.length;
    let cross: u64 = q.iter().enumerate().map(|(m, qm)| qm * q[m + 1..].iter().sum::<u64>()).sum();
    2 * cross + 2 * total * (dim - total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

/// Provenance of one real row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RowTag {
    /// `⟨λ_{m'}^i| h |λ_m^j⟩` with `m < m'`.
    Cross { m: usize, m_prime: usize, i: usize, j: usize, part: Part },
    /// `⟨ν_l| h |λ_m^j⟩`.
    Complement { l: usize, m: usize, j: usize, part: Part },
}

/// Real `S × N` constraint matrix; the true coefficients lie in its kernel.
#[derive(Clone, Debug)]
pub struct EquationSystem {
    pub kind: ModelKind,
    pub length: usize,
    pub matrix: Mat<f64>,
    pub row_tags: Vec<RowTag>,
}

impl EquationSystem {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// `max_r |(M a)_r|`.
    pub fn residual_max(&self, a: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        let mut acc = vec![0.0; self.rows()];
        for (c, &ac) in a.iter().enumerate() {
            for (r, m) in acc.iter_mut().zip(self.matrix.col_as_slice(c)) {
                *r += m * ac;
            }
        }
        for r in acc {
            worst = worst.max(r.abs());
        }
        worst
    }
}

fn row_tags(blocks: &WeightBlocks) -> Vec<RowTag> {
    let profile = blocks.profile();
    let mut tags = Vec::new();
    for m in 0..profile.len() {
        for m_prime in m + 1..profile.len() {
            for i in 0..profile[m_prime] {
                for j in 0..profile[m] {
                    for part in [Part::Re, Part::Im] {
                        tags.push(RowTag::Cross { m, m_prime, i, j, part });
                    }
                }
            }
        }
    }
    let w = blocks.complement().len();
    for (m, &qm) in profile.iter().enumerate() {
        for j in 0..qm {
            for l in 0..w {
                for part in [Part::Re, Part::Im] {
                    tags.push(RowTag::Complement { l, m, j, part });
                }
            }
        }
    }
    tags
}

/// Column `n` of the system: every matrix element of `h_n` in row order.
fn column(blocks: &WeightBlocks, term: &crate::pauli::PauliString, rows: usize) -> Result<Vec<f64>> {
    let list = blocks.blocks();
    let mut applied: Vec<Vec<Vec<C64>>> = Vec::with_capacity(list.len());
    for block in list {
        let mut per_block = Vec::with_capacity(block.size());
        for j in 0..block.size() {
            per_block.push(term.apply(block.vector(j))?);
        }
        applied.push(per_block);
    }
    let mut col = Vec::with_capacity(rows);
    let mut push = |z: C64| {
        col.push(z.re);
        col.push(z.im);
    };
    for m in 0..list.len() {
        for bra_block in &list[m + 1..] {
            for i in 0..bra_block.size() {
                let bra = bra_block.vector(i);
                for w in &applied[m] {
                    push(bra.iter().zip(w).map(|(a, b)| a.conj() * b).sum());
                }
            }
        }
    }
    for per_block in &applied {
        for w in per_block {
            for z in blocks.complement().project(w)? {
                push(z);
            }
        }
    }
    Ok(col)
}

pub fn assemble_equations(blocks: &WeightBlocks, basis: &TermBasis) -> Result<EquationSystem> {
    assemble_equations_with(blocks, basis, Parallelism::default())
}

/// Builds the system column by column (one basis term per column).
pub fn assemble_equations_with(
    blocks: &WeightBlocks,
    basis: &TermBasis,
    par: Parallelism,
) -> Result<EquationSystem> {
    if blocks.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: blocks.dim() });
    }
    let tags = row_tags(blocks);
    let rows = tags.len();
    let terms = basis.terms();
    let columns = map_indexed(par, terms.len(), |n| column(blocks, &terms[n], rows));
    let mut matrix = Mat::<f64>::zeros(rows, terms.len());
    for (n, col) in columns.into_iter().enumerate() {
        matrix.col_as_slice_mut(n).copy_from_slice(&col?);
    }
    Ok(EquationSystem { kind: basis.kind(), length: basis.length(), matrix, row_tags: tags })
}

/// Outcome of a nullspace solve.
#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    /// Unit-norm null vector, sign fixed so its largest-magnitude entry is positive.
    pub a_rec: CoefficientVector,
    /// Recovery error against the true coefficients, once known.
    pub delta: Option<f64>,
    pub rank: usize,
    pub nullity: usize,
    /// Three smallest singular values, ascending; implicit zeros of a wide
    /// system are included.
    pub singular_tail: Vec<f64>,
    pub sigma_max: f64,
    /// Rank threshold `σ_max · max(S, N) · ε`.
    pub threshold: f64,
    pub success: bool,
    pub rows: usize,
    pub cols: usize,
}

impl RecoveryReport {
    /// Fills in `delta` against the true coefficients.
    pub fn with_truth(mut self, a_true: &CoefficientVector) -> Result<Self> {
        self.delta = Some(recovery_error(a_true, &self.a_rec)?);
        Ok(self)
    }
}

/// SVD nullspace of the system.
///
/// Tall systems are reduced by a Householder QR first; the triangular factor
/// has the same singular values and right singular vectors.
pub fn solve_nullspace(sys: &EquationSystem) -> Result<RecoveryReport> {
    let (s, n) = (sys.rows(), sys.cols());
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least two unknowns, got {n}")));
    }
    let (mut sigma, v): (Vec<f64>, Mat<f64>) = if s == 0 {
        (Vec::new(), Mat::identity(n, n))
    } else {
        let svd = if s >= n {
            let r = sys.matrix.qr().thin_R().to_owned();
            r.svd()
        } else {
            sys.matrix.svd()
        }
        .map_err(|e| Error::Numerical(format!("SVD failed to converge: {e:?}")))?;
        (svd.S().column_vector().iter().copied().collect(), svd.V().to_owned())
    };
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let threshold = sigma_max * s.max(n) as f64 * f64::EPSILON;
    let rank = if s == 0 { 0 } else { sigma.iter().filter(|&&x| x > threshold).count() };
    let nullity = n - rank;
    sigma.resize(n, 0.0);
    let singular_tail: Vec<f64> = sigma.iter().rev().take(3).copied().collect();

    let mut values: Vec<f64> = v.col_as_slice(n - 1).to_vec();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let pivot = values.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
    values.iter_mut().for_each(|x| *x *= sign / norm);

    Ok(RecoveryReport {
        a_rec: CoefficientVector { kind: sys.kind, length: sys.length, seed: None, values },
        delta: None,
        rank,
        nullity,
        singular_tail,
        sigma_max,
        threshold,
        success: nullity == 1,
        rows: s,
        cols: n,
    })
}

/// `Δ = 1 − |⟨â_true, â_rec⟩|` for the 2-normalized vectors; invariant under
/// rescaling and sign flips of either argument.
pub fn recovery_error(a_true: &CoefficientVector, a_rec: &CoefficientVector) -> Result<f64> {
    if a_true.kind != a_rec.kind || a_true.length != a_rec.length || a_true.len() != a_rec.len() {
        return Err(Error::DimensionMismatch { expected: a_true.len(), found: a_rec.len() });
    }
    let (na, nb) = (a_true.norm(), a_rec.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("recovery error of a zero vector".into()));
    }
    let cos: f64 = a_true.values.iter().zip(&a_rec.values).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    Ok((1.0 - cos.abs()).clamp(0.0, 1.0))
}

/// Whether `profile` gives at least `N − 1` equations at this length.
pub fn is_recoverable(kind: ModelKind, q: &[usize], length: usize) -> Result<bool> {
    let n = crate::models::term_count(kind, length)? as u64;
    let total: usize = q.iter().sum();
    if total as u64 > 1u64 << length {
        return Ok(false);
    }
    let profile = DegeneracyProfile::new(q.to_vec(), length)?;
    Ok(predicted_lie_count(&profile) + 1 >= n)
}

/// Smallest `L ≤ l_max` at which the profile yields `S ≥ N − 1`.
pub fn critical_length(kind: ModelKind, q: &[usize], l_max: usize) -> Result<Option<usize>> {
    if q.is_empty() || q.contains(&0) {
        return Err(Error::InvalidArgument(format!("degeneracies must be positive, got {q:?}")));
    }
    for length in kind.min_length()..=l_max {
        if is_recoverable(kind, q, length)? {
            return Ok(Some(length));
        }
    }
    Ok(None)
}
