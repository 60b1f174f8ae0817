//! Eigendecompositions, steady states built from eigenstates, and the weight
//! block structure recovered from a steady state.
//!
//! A steady state `ρ = Σ_m p_m Σ_j |E_m^j⟩⟨E_m^j|` has one eigenspace per
//! distinct weight `p_m` (a weight block) plus the kernel of `ρ`. Only the
//! blocks as subspaces are observable: diagonalizing `ρ` returns an arbitrary
//! orthonormal basis of each block, not the eigenstates of `H` themselves.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Relative gap below which two eigenvalues of `ρ` share a weight block.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-10;

/// Eigenvalues of `ρ` at or below this are treated as zero.
pub const ZERO_FLOOR: f64 = 1e-12;

/// Eigenvalues in ascending order with orthonormal eigenvector columns.
///
/// May hold only the lowest few pairs (see [`crate::krylov`]).
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Mat<C64>,
}

impl SpectralDecomposition {
    pub fn new(eigenvalues: Vec<f64>, eigenvectors: Mat<C64>) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.ncols() {
            return Err(Error::DimensionMismatch {
                expected: eigenvectors.ncols(),
                found: eigenvalues.len(),
            });
        }
        Ok(SpectralDecomposition { eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Mat<C64> {
        &self.eigenvectors
    }

    pub fn vector(&self, index: usize) -> &[C64] {
        self.eigenvectors.col_as_slice(index)
    }

    /// Keep the lowest `count` pairs.
    pub fn truncated(self, count: usize) -> Self {
        let count = count.min(self.len());
        let vectors = self.eigenvectors.subcols(0, count).to_owned();
        SpectralDecomposition { eigenvalues: self.eigenvalues[..count].to_vec(), eigenvectors: vectors }
    }

    /// `Σ_i E_i |v_i⟩⟨v_i|` over the held pairs.
    pub fn reconstruct(&self) -> Mat<C64> {
        let n = self.dim();
        let scaled = Mat::<C64>::from_fn(n, self.len(), |r, c| self.eigenvectors[(r, c)] * self.eigenvalues[c]);
        &scaled * self.eigenvectors.adjoint()
    }
}

fn hermitian_asymmetry(m: &Mat<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in c..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

fn check_hermitian(m: &Mat<C64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > tol * m.norm_max().max(1.0) {
        return Err(Error::NotHermitian { asymmetry });
    }
    Ok(())
}

/// Full dense eigendecomposition of a Hermitian matrix.
pub fn eigendecompose(h: &Mat<C64>) -> Result<SpectralDecomposition> {
    check_hermitian(h, 1e-12)?;
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed: {e:?}")))?;
    let eigenvalues = eig.S().column_vector().iter().map(|v| v.re).collect();
    SpectralDecomposition::new(eigenvalues, eig.U().to_owned())
}

/// One mixing weight shared by a set of eigenstates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightClass {
    pub weight: f64,
    pub indices: Vec<usize>,
}

/// Which eigenstates are mixed, and with what weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSpec {
    pub classes: Vec<WeightClass>,
}

impl SteadyStateSpec {
    /// Equal mixture of eigenstates `0..q`.
    pub fn single(q: usize) -> Self {
        Self::ladder(&[q])
    }

    /// Classes of sizes `q` over consecutive lowest eigenstates, with raw
    /// weights `2, 3, 4, …` normalized to unit trace. `(2, 2)` gives weights
    /// `0.2` and `0.3`; a single class gives `1/q`.
    pub fn ladder(q: &[usize]) -> Self {
        let total: f64 = q.iter().enumerate().map(|(m, &qm)| (m + 2) as f64 * qm as f64).sum();
        let mut next = 0;
        let classes = q
            .iter()
            .enumerate()
            .map(|(m, &qm)| {
                let indices = (next..next + qm).collect();
                next += qm;
                WeightClass { weight: (m + 2) as f64 / total, indices }
            })
            .collect();
        SteadyStateSpec { classes }
    }

    pub fn profile(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.indices.len()).collect()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.classes.iter().flat_map(|c| c.indices.iter().copied()).max()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidState("no weight classes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for class in &self.classes {
            if !(class.weight.is_finite() && class.weight > 0.0) {
                return Err(Error::InvalidState(format!("weight {} is not positive", class.weight)));
            }
            if class.indices.is_empty() {
                return Err(Error::InvalidState("empty weight class".into()));
            }
            for &i in &class.indices {
                if !seen.insert(i) {
                    return Err(Error::InvalidState(format!("eigenstate {i} used twice")));
                }
            }
        }
        let largest = self.classes.iter().map(|c| c.weight).fold(0.0, f64::max);
        for (a, ca) in self.classes.iter().enumerate() {
            for cb in &self.classes[a + 1..] {
                if (ca.weight - cb.weight).abs() <= DEFAULT_CLUSTER_TOL * largest {
                    return Err(Error::InvalidState(format!(
                        "weights {} and {} coincide; merge them into one class",
                        ca.weight, cb.weight
                    )));
                }
            }
        }
        let trace: f64 = self.classes.iter().map(|c| c.weight * c.indices.len() as f64).sum();
        if (trace - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("trace is {trace}, not 1")));
        }
        Ok(())
    }
}

/// Orthonormal basis of one weight block.
#[derive(Clone, Debug)]
pub struct WeightBlock {
    pub weight: f64,
    pub vectors: Mat<C64>,
}

impl WeightBlock {
    pub fn size(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, j: usize) -> &[C64] {
        self.vectors.col_as_slice(j)
    }
}

/// Orthonormal basis of the complement of a set of orthonormal vectors.
///
/// Stored as the Householder reflectors that triangularize the stacked
/// vectors; the basis vectors are the trailing columns of their product.
/// Projecting onto all of them costs `O(Q · 2^L)`.
#[derive(Clone, Debug)]
pub struct ComplementBasis {
    dim: usize,
    reflectors: Vec<Vec<C64>>,
}

impl ComplementBasis {
    /// Number of basis vectors, `dim − Q`.
    pub fn len(&self) -> usize {
        self.dim - self.reflectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn reflect(u: &[C64], tail: &mut [C64]) {
        let s: C64 = u.iter().zip(tail.iter()).map(|(a, b)| a.conj() * b).sum();
        let s2 = s * 2.0;
        for (t, a) in tail.iter_mut().zip(u) {
            *t -= s2 * a;
        }
    }

    /// Coefficients `⟨ν_l|w⟩` for every complement vector `ν_l`.
    pub fn project(&self, w: &[C64]) -> Result<Vec<C64>> {
        if w.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: w.len() });
        }
        let mut y = w.to_vec();
        for (k, u) in self.reflectors.iter().enumerate() {
            Self::reflect(u, &mut y[k..]);
        }
        Ok(y.split_off(self.reflectors.len()))
    }

    /// The `l`-th complement vector.
    pub fn vector(&self, l: usize) -> Vec<C64> {
        let q = self.reflectors.len();
        let mut v = vec![C64::new(0.0, 0.0); self.dim];
        v[q + l] = C64::new(1.0, 0.0);
        for (k, u) in self.reflectors.iter().enumerate().rev() {
            Self::reflect(u, &mut v[k..]);
        }
        v
    }

    pub fn to_mat(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.len());
        for l in 0..self.len() {
            m.col_as_slice_mut(l).copy_from_slice(&self.vector(l));
        }
        m
    }
}

/// Orthonormal completion of the columns of `stacked`.
pub fn complement_basis(stacked: &Mat<C64>, dim: usize) -> Result<ComplementBasis> {
    if stacked.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: stacked.nrows() });
    }
    let q = stacked.ncols();
    if q > dim {
        return Err(Error::InvalidState(format!("{q} vectors in a {dim}-dimensional space")));
    }
    if q > 0 {
        let gram = stacked.adjoint() * stacked;
        let dev = (&gram - Mat::<C64>::identity(q, q)).norm_max();
        if dev > 1e-10 {
            return Err(Error::InvalidState(format!("block vectors are not orthonormal ({dev:e})")));
        }
    }
    let mut a = stacked.clone();
    let mut reflectors = Vec::with_capacity(q);
    for k in 0..q {
        let x: Vec<C64> = (k..dim).map(|r| a[(r, k)]).collect();
        let nx = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if nx < 1e-8 {
            return Err(Error::InvalidState("block vectors are linearly dependent".into()));
        }
        let head = x[0];
        let alpha = if head.norm() > 0.0 { -(head / head.norm()) * nx } else { C64::new(-nx, 0.0) };
        let mut u = x;
        u[0] -= alpha;
        let nu = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= nu);
        for c in k..q {
            let mut col: Vec<C64> = (k..dim).map(|r| a[(r, c)]).collect();
            ComplementBasis::reflect(&u, &mut col);
            for (r, v) in (k..dim).zip(col) {
                a[(r, c)] = v;
            }
        }
        reflectors.push(u);
    }
    Ok(ComplementBasis { dim, reflectors })
}

/// Weight blocks of a steady state and the complement of their sum.
#[derive(Clone, Debug)]
pub struct WeightBlocks {
    dim: usize,
    blocks: Vec<WeightBlock>,
    complement: ComplementBasis,
}

impl WeightBlocks {
    pub fn new(dim: usize, blocks: Vec<WeightBlock>) -> Result<Self> {
        for block in &blocks {
            if block.vectors.nrows() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: block.vectors.nrows() });
            }
            if block.size() == 0 {
                return Err(Error::InvalidState("empty weight block".into()));
            }
        }
        let q: usize = blocks.iter().map(WeightBlock::size).sum();
        let mut stacked = Mat::<C64>::zeros(dim, q);
        let mut col = 0;
        for block in &blocks {
            for j in 0..block.size() {
                stacked.col_as_slice_mut(col).copy_from_slice(block.vector(j));
                col += 1;
            }
        }
        let complement = complement_basis(&stacked, dim)?;
        Ok(WeightBlocks { dim, blocks, complement })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[WeightBlock] {
        &self.blocks
    }

    pub fn complement(&self) -> &ComplementBasis {
        &self.complement
    }

    /// `(q_1, …, q_M)`.
    pub fn profile(&self) -> Vec<usize> {
        self.blocks.iter().map(WeightBlock::size).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.weight).collect()
    }

    /// `Q = Σ q_m`.
    pub fn total_rank(&self) -> usize {
        self.blocks.iter().map(WeightBlock::size).sum()
    }

    /// `ρ = Σ_m p_m Σ_j |λ_m^j⟩⟨λ_m^j|` as a dense matrix.
    pub fn density_matrix(&self) -> Mat<C64> {
        let mut rho = Mat::<C64>::zeros(self.dim, self.dim);
        for block in &self.blocks {
            let scaled = &block.vectors * faer::Scale(C64::new(block.weight, 0.0));
            rho += &scaled * block.vectors.adjoint();
        }
        rho
    }
}

/// `ρ` built from the eigenstates of `eig` selected by `spec`, with its
/// exact weight blocks.
pub fn build_steady_state(
    spec: &SteadyStateSpec,
    eig: &SpectralDecomposition,
) -> Result<(Mat<C64>, WeightBlocks)> {
    spec.validate()?;
    if let Some(max) = spec.max_index() {
        if max >= eig.len() {
            return Err(Error::InvalidState(format!(
                "eigenstate {max} requested but only {} are available",
                eig.len()
            )));
        }
    }
    let dim = eig.dim();
    let blocks = spec
        .classes
        .iter()
        .map(|class| {
            let vectors =
                Mat::<C64>::from_fn(dim, class.indices.len(), |r, c| eig.eigenvectors()[(r, class.indices[c])]);
            WeightBlock { weight: class.weight, vectors }
        })
        .collect();
    let blocks = WeightBlocks::new(dim, blocks)?;
    Ok((blocks.density_matrix(), blocks))
}

/// Eigenpairs of a positive semidefinite matrix restricted to its range.
///
/// Pivoted Cholesky finds the numerical range (pivots stop once every
/// remaining diagonal entry is at most `floor`), then a Rayleigh-Ritz step on
/// an orthonormal basis of that range gives the nonzero eigenvalues in
/// descending order. The rest of the spectrum is zero to within `floor`.
fn psd_range_eigen(rho: &Mat<C64>, floor: f64) -> Result<(Vec<f64>, Mat<C64>)> {
    let n = rho.nrows();
    let mut diag: Vec<f64> = (0..n).map(|i| rho[(i, i)].re).collect();
    if let Some(bad) = diag.iter().find(|d| **d < -1e-10) {
        return Err(Error::InvalidState(format!("density matrix has negative diagonal {bad}")));
    }
    let mut factors: Vec<Vec<C64>> = Vec::new();
    loop {
        let (pivot, &largest) = match diag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
            Some(p) => p,
            None => break,
        };
        if largest <= floor || factors.len() == n {
            break;
        }
        let scale = largest.sqrt();
        let mut col: Vec<C64> = rho.col_as_slice(pivot).to_vec();
        for f in &factors {
            let fp = f[pivot].conj();
            for (c, fi) in col.iter_mut().zip(f) {
                *c -= fi * fp;
            }
        }
        col.iter_mut().for_each(|c| *c /= scale);
        for (d, c) in diag.iter_mut().zip(&col) {
            *d -= c.norm_sqr();
        }
        diag[pivot] = 0.0;
        factors.push(col);
    }
    let r = factors.len();
    if r == 0 {
        return Ok((Vec::new(), Mat::zeros(n, 0)));
    }
    let f = Mat::<C64>::from_fn(n, r, |i, k| factors[k][i]);
    let q = f.qr().compute_thin_Q();
    let reduced = q.adjoint() * (rho * &q);
    let reduced = Mat::from_fn(r, r, |i, j| (reduced[(i, j)] + reduced[(j, i)].conj()) * 0.5);
    let eig = reduced
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("reduced eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = eig.S().column_vector().iter().map(|v| v.re).rev().collect();
    let u = eig.U();
    let ritz = &q * u;
    let vecs = Mat::<C64>::from_fn(n, r, |i, k| ritz[(i, r - 1 - k)]);
    Ok((vals, vecs))
}

/// Modified Gram-Schmidt on the columns of `m`, in place.
fn orthonormalize(m: &mut Mat<C64>) {
    for k in 0..m.ncols() {
        let mut col = m.col_as_slice(k).to_vec();
        for prev in 0..k {
            let p = m.col_as_slice(prev);
            let c: C64 = p.iter().zip(&col).map(|(a, b)| a.conj() * b).sum();
            for (x, pv) in col.iter_mut().zip(p) {
                *x -= c * pv;
            }
        }
        let norm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        col.iter_mut().for_each(|v| *v /= norm);
        m.col_as_slice_mut(k).copy_from_slice(&col);
    }
}

/// Result of [`cluster_weights`].
#[derive(Clone, Debug)]
pub struct Clustering {
    pub blocks: WeightBlocks,
    /// Nonzero eigenvalues of `ρ`, descending.
    pub eigenvalues: Vec<f64>,
    /// Gaps that separated two blocks but fell within ten times the
    /// clustering tolerance.
    pub ambiguous_gaps: Vec<f64>,
}

impl Clustering {
    pub fn is_ambiguous(&self) -> bool {
        !self.ambiguous_gaps.is_empty()
    }
}

/// Groups the eigenvectors of `ρ` by eigenvalue.
///
/// Consecutive nonzero eigenvalues whose gap is at most `tol` times the
/// largest eigenvalue share a block. Eigenvalues at or below
/// [`ZERO_FLOOR`] form the kernel, which is never a block; its basis is
/// rebuilt by orthonormal completion of the blocks.
pub fn cluster_weights(rho: &Mat<C64>, tol: f64) -> Result<Clustering> {
    check_hermitian(rho, 1e-12)?;
    let n = rho.nrows();
    let trace: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    if (trace - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("density matrix trace is {trace}, not 1")));
    }
    let (vals, vecs) = psd_range_eigen(rho, ZERO_FLOOR)?;
    let kept = vals.iter().take_while(|v| **v > ZERO_FLOOR).count();
    let largest = vals.first().copied().unwrap_or(0.0);

    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut ambiguous_gaps = Vec::new();
    let mut start = 0;
    for i in 1..=kept {
        let split = i == kept || {
            let gap = vals[i - 1] - vals[i];
            let split = gap > tol * largest;
            if split && gap <= 10.0 * tol * largest {
                ambiguous_gaps.push(gap);
            }
            split
        };
        if split {
            groups.push((start, i));
            start = i;
        }
    }
    if !ambiguous_gaps.is_empty() {
        log::warn!("ambiguous weight clustering: gaps {ambiguous_gaps:?} near tolerance {tol:e}");
    }

    let blocks = groups
        .into_iter()
        .map(|(lo, hi)| {
            let weight = vals[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
            let mut vectors = vecs.subcols(lo, hi - lo).to_owned();
            orthonormalize(&mut vectors);
            WeightBlock { weight, vectors }
        })
        .collect();
    let blocks = WeightBlocks::new(n, blocks)?;
    debug_assert_eq!(blocks.complement().len(), n - kept);
    Ok(Clustering { blocks, eigenvalues: vals[..kept].to_vec(), ambiguous_gaps })
}
