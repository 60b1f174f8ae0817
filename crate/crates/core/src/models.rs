//! Generic 2-local and 3-local open-chain models.
//!
//! `H2` has every single-site Pauli and every nearest-neighbour product of
//! two non-identity Paulis. `H3` adds, for each window of three sites, every
//! `σ^η ⊗ σ^θ ⊗ σ^δ` with `η, δ ∈ {X, Y, Z}` and `θ ∈ {I, X, Y, Z}`; the
//! `θ = I` members are next-nearest-neighbour couplings. Term counts are
//! `12L − 9` and `48L − 81`.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::krylov::LinearOperator;
use crate::pauli::{PauliOp, PauliString, MAX_SITES};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    H2,
    H3,
}

impl ModelKind {
    pub fn min_length(self) -> usize {
        match self {
            ModelKind::H2 => 2,
            ModelKind::H3 => 3,
        }
    }

    pub fn locality(self) -> usize {
        match self {
            ModelKind::H2 => 2,
            ModelKind::H3 => 3,
        }
    }

    pub fn check_length(self, length: usize) -> Result<()> {
        if length < self.min_length() {
            return Err(Error::LengthTooSmall { length, minimum: self.min_length() });
        }
        if length > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "chain length {length} exceeds the supported maximum {MAX_SITES}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::H2 => "h2",
            ModelKind::H3 => "h3",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h2" => Ok(ModelKind::H2),
            "h3" => Ok(ModelKind::H3),
            other => Err(Error::InvalidArgument(format!("unknown model {other:?}"))),
        }
    }
}

/// Closed-form number of terms.
pub fn term_count(kind: ModelKind, length: usize) -> Result<usize> {
    kind.check_length(length)?;
    Ok(match kind {
        ModelKind::H2 => 12 * length - 9,
        ModelKind::H3 => 48 * length - 81,
    })
}

/// Ordered operator basis of a model at a fixed chain length.
#[derive(Clone, Debug, PartialEq)]
pub struct TermBasis {
    kind: ModelKind,
    length: usize,
    terms: Vec<PauliString>,
}

impl TermBasis {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        1usize << self.length
    }

    pub fn count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }
}

/// Enumerates the basis: single-site terms (site, then η), nearest-neighbour
/// pairs (site, then η, θ), then for `H3` the three-site windows (site, then
/// η, θ, δ).
pub fn enumerate_terms(kind: ModelKind, length: usize) -> Result<TermBasis> {
    kind.check_length(length)?;
    let mut terms = Vec::with_capacity(term_count(kind, length)?);
    for site in 0..length {
        for eta in PauliOp::NONTRIVIAL {
            terms.push(PauliString::from_sites(length, &[(site, eta)])?);
        }
    }
    for site in 0..length - 1 {
        for eta in PauliOp::NONTRIVIAL {
            for theta in PauliOp::NONTRIVIAL {
                terms.push(PauliString::from_sites(length, &[(site, eta), (site + 1, theta)])?);
            }
        }
    }
    if kind == ModelKind::H3 {
        for site in 0..length - 2 {
            for eta in PauliOp::NONTRIVIAL {
                for theta in PauliOp::ALL {
                    for delta in PauliOp::NONTRIVIAL {
                        terms.push(PauliString::from_sites(
                            length,
                            &[(site, eta), (site + 1, theta), (site + 2, delta)],
                        )?);
                    }
                }
            }
        }
    }
    Ok(TermBasis { kind, length, terms })
}

/// Real coefficients of a Hamiltonian in a [`TermBasis`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub kind: ModelKind,
    #[serde(rename = "L")]
    pub length: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(basis: &TermBasis, values: Vec<f64>) -> Result<Self> {
        if values.len() != basis.count() {
            return Err(Error::DimensionMismatch { expected: basis.count(), found: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(CoefficientVector { kind: basis.kind(), length: basis.length(), seed: None, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matches(&self, basis: &TermBasis) -> bool {
        self.kind == basis.kind() && self.length == basis.length() && self.len() == basis.count()
    }
}

/// Standard-normal coefficients drawn from ChaCha20 seeded with `seed`.
pub fn random_instance(kind: ModelKind, length: usize, seed: u64) -> Result<CoefficientVector> {
    let count = term_count(kind, length)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = (0..count).map(|_| StandardNormal.sample(&mut rng)).collect();
    Ok(CoefficientVector { kind, length, seed: Some(seed), values })
}

/// `H = Σ a_n h_n` in matrix-free form.
///
/// Terms are grouped by their flip mask, so `H` becomes a sum of
/// "permutation times diagonal" pieces; applying it costs one pass over the
/// state per distinct mask rather than per term.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    length: usize,
    pieces: Vec<(usize, Vec<C64>)>,
}

pub fn assemble(basis: &TermBasis, coefficients: &CoefficientVector) -> Result<Hamiltonian> {
    if !coefficients.matches(basis) {
        return Err(Error::DimensionMismatch { expected: basis.count(), found: coefficients.len() });
    }
    let dim = basis.dim();
    let mut pieces: Vec<(usize, Vec<C64>)> = Vec::new();
    for (term, &a) in basis.terms().iter().zip(&coefficients.values) {
        let mask = term.flip_mask();
        let slot = match pieces.iter().position(|(m, _)| *m == mask) {
            Some(slot) => slot,
            None => {
                pieces.push((mask, vec![C64::new(0.0, 0.0); dim]));
                pieces.len() - 1
            }
        };
        let diag = &mut pieces[slot].1;
        let phase = term.global_phase() * a;
        let sign_mask = term.sign_mask();
        for (x, d) in diag.iter_mut().enumerate() {
            if (x & sign_mask).count_ones() & 1 == 1 {
                *d -= phase;
            } else {
                *d += phase;
            }
        }
    }
    pieces.sort_by_key(|(mask, _)| *mask);
    Ok(Hamiltonian { length: basis.length(), pieces })
}

impl Hamiltonian {
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn dim(&self) -> usize {
        1usize << self.length
    }

    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_to(psi, &mut out);
        Ok(out)
    }

    fn apply_to(&self, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (mask, diag) in &self.pieces {
            for (x, (amp, d)) in psi.iter().zip(diag).enumerate() {
                out[x ^ mask] += d * amp;
            }
        }
    }

    /// Dense `2^L × 2^L` matrix.
    pub fn to_dense(&self) -> Mat<C64> {
        let dim = self.dim();
        let mut h = Mat::<C64>::zeros(dim, dim);
        for (mask, diag) in &self.pieces {
            for (x, d) in diag.iter().enumerate() {
                h[(x ^ mask, x)] += *d;
            }
        }
        h
    }
}

impl LinearOperator for Hamiltonian {
    fn dim(&self) -> usize {
        Hamiltonian::dim(self)
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.apply_to(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn counts_match_table_values() {
        assert_eq!(enumerate_terms(ModelKind::H2, 2).unwrap().count(), 15);
        assert_eq!(enumerate_terms(ModelKind::H3, 3).unwrap().count(), 63);
        assert_eq!(enumerate_terms(ModelKind::H2, 10).unwrap().count(), 111);
        assert_eq!(term_count(ModelKind::H2, 5).unwrap(), 51);
        assert_eq!(term_count(ModelKind::H3, 4).unwrap(), 111);
        assert_eq!(term_count(ModelKind::H3, 10).unwrap(), 399);
    }

    #[test]
    fn enumeration_agrees_with_closed_form() {
        for length in 2..=12 {
            assert_eq!(
                enumerate_terms(ModelKind::H2, length).unwrap().count(),
                term_count(ModelKind::H2, length).unwrap()
            );
        }
        for length in 3..=12 {
            assert_eq!(
                enumerate_terms(ModelKind::H3, length).unwrap().count(),
                term_count(ModelKind::H3, length).unwrap()
            );
        }
    }

    #[test]
    fn short_chains_are_rejected() {
        assert!(matches!(
            enumerate_terms(ModelKind::H3, 2),
            Err(Error::LengthTooSmall { length: 2, minimum: 3 })
        ));
        assert!(term_count(ModelKind::H2, 1).is_err());
    }

    #[test]
    fn terms_are_local_unique_and_ordered() {
        for kind in [ModelKind::H2, ModelKind::H3] {
            let basis = enumerate_terms(kind, 6).unwrap();
            let unique: HashSet<_> = basis.terms().iter().map(|t| t.to_string()).collect();
            assert_eq!(unique.len(), basis.count());
            for term in basis.terms() {
                let (first, last) = term.support().unwrap();
                assert!(last - first < kind.locality());
            }
        }
        let basis = enumerate_terms(ModelKind::H3, 3).unwrap();
        let labels: Vec<_> = basis.terms().iter().map(|t| t.to_string()).collect();
        assert_eq!(&labels[..4], &["XII", "YII", "ZII", "IXI"]);
        assert_eq!(labels[9], "XXI");
        assert_eq!(labels[27], "XIX");
        assert_eq!(labels[28], "XIY");
        assert_eq!(labels[62], "ZZZ");
    }

    #[test]
    fn h3_contains_h2() {
        let h2: HashSet<_> =
            enumerate_terms(ModelKind::H2, 5).unwrap().terms().iter().map(|t| t.to_string()).collect();
        let h3: HashSet<_> =
            enumerate_terms(ModelKind::H3, 5).unwrap().terms().iter().map(|t| t.to_string()).collect();
        assert!(h2.is_subset(&h3));
        assert!(h3.len() > h2.len());
    }

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(ModelKind::H3, 5, 42).unwrap();
        let b = random_instance(ModelKind::H3, 5, 42).unwrap();
        let c = random_instance(ModelKind::H3, 5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert_eq!(a.len(), 159);
    }

    #[test]
    fn gaussian_moments() {
        // 100000 draws spread over consecutive seeds of a long chain.
        let mut draws = Vec::new();
        let mut seed = 0;
        while draws.len() < 100_000 {
            draws.extend(random_instance(ModelKind::H3, 30, seed).unwrap().values);
            seed += 1;
        }
        draws.truncate(100_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn coefficient_json_shape() {
        let a = random_instance(ModelKind::H2, 2, 7).unwrap();
        let json = serde_json::to_value(&a).unwrap();
        assert_eq!(json["kind"], "h2");
        assert_eq!(json["L"], 2);
        assert_eq!(json["seed"], 7);
        assert_eq!(json["values"].as_array().unwrap().len(), 15);
        let back: CoefficientVector = serde_json::from_value(json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn zero_and_single_term_assembly() {
        let basis = enumerate_terms(ModelKind::H2, 3).unwrap();
        let zero = CoefficientVector::new(&basis, vec![0.0; basis.count()]).unwrap();
        let h = assemble(&basis, &zero).unwrap().to_dense();
        assert!(h.norm_max() == 0.0);

        for n in [0, 5, 11, 20] {
            let mut values = vec![0.0; basis.count()];
            values[n] = 1.0;
            let a = CoefficientVector::new(&basis, values).unwrap();
            let h = assemble(&basis, &a).unwrap().to_dense();
            let expected = basis.terms()[n].dense().unwrap();
            assert!((&h - &expected).norm_max() < 1e-15);
        }
    }

    #[test]
    fn mismatched_coefficients_rejected() {
        let basis = enumerate_terms(ModelKind::H2, 3).unwrap();
        let other = random_instance(ModelKind::H2, 4, 1).unwrap();
        assert!(assemble(&basis, &other).is_err());
        assert!(CoefficientVector::new(&basis, vec![1.0; 3]).is_err());
    }
}
