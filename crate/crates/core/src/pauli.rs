//! Pauli strings acting on L-qubit state vectors.
//!
//! Computational basis convention: site 1 (index 0 in [`PauliString::ops`])
//! is the most significant bit of the basis-state index, so `|01⟩` on two
//! sites is index 1 and `|10⟩` is index 2.
//!
//! A string `P` maps `|x⟩` to `i^{n_Y} (-1)^{popcount(x & z)} |x ^ f⟩`, where
//! `f` marks the X/Y sites and `z` the Y/Z sites. Applying a string is
//! therefore a permutation of amplitudes with phases in `{±1, ±i}`.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Largest chain length handled by the bit-mask kernels.
pub const MAX_SITES: usize = 30;

/// Default size limit for [`PauliString::dense`].
pub const DENSE_ORACLE_LIMIT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PauliOp {
    I,
    X,
    Y,
    Z,
}

impl PauliOp {
    pub const NONTRIVIAL: [PauliOp; 3] = [PauliOp::X, PauliOp::Y, PauliOp::Z];
    pub const ALL: [PauliOp; 4] = [PauliOp::I, PauliOp::X, PauliOp::Y, PauliOp::Z];

    fn flips(self) -> bool {
        matches!(self, PauliOp::X | PauliOp::Y)
    }

    fn signs(self) -> bool {
        matches!(self, PauliOp::Y | PauliOp::Z)
    }

    /// The 2×2 matrix, row-major.
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            PauliOp::I => [[one, o], [o, one]],
            PauliOp::X => [[o, one], [one, o]],
            PauliOp::Y => [[o, -i], [i, o]],
            PauliOp::Z => [[one, o], [o, -one]],
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliOp::I => 'I',
            PauliOp::X => 'X',
            PauliOp::Y => 'Y',
            PauliOp::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(PauliOp::I),
            'X' => Some(PauliOp::X),
            'Y' => Some(PauliOp::Y),
            'Z' => Some(PauliOp::Z),
            _ => None,
        }
    }
}

/// A tensor product of single-site Paulis over a chain of `L` sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    ops: Vec<PauliOp>,
    flip_mask: usize,
    sign_mask: usize,
    y_count: u32,
}

impl PauliString {
    pub fn new(ops: Vec<PauliOp>) -> Result<Self> {
        let length = ops.len();
        if length == 0 || length > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "Pauli string length must be in 1..={MAX_SITES}, got {length}"
            )));
        }
        let mut flip_mask = 0usize;
        let mut sign_mask = 0usize;
        let mut y_count = 0u32;
        for (site, op) in ops.iter().enumerate() {
            let bit = 1usize << (length - 1 - site);
            if op.flips() {
                flip_mask |= bit;
            }
            if op.signs() {
                sign_mask |= bit;
            }
            if *op == PauliOp::Y {
                y_count += 1;
            }
        }
        Ok(PauliString { ops, flip_mask, sign_mask, y_count })
    }

    pub fn identity(length: usize) -> Result<Self> {
        Self::new(vec![PauliOp::I; length])
    }

    /// Identity everywhere except the listed `(site, op)` pairs (0-based sites).
    pub fn from_sites(length: usize, sites: &[(usize, PauliOp)]) -> Result<Self> {
        let mut ops = vec![PauliOp::I; length];
        for &(site, op) in sites {
            if site >= length {
                return Err(Error::InvalidArgument(format!(
                    "site {site} out of range for length {length}"
                )));
            }
            ops[site] = op;
        }
        Self::new(ops)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[PauliOp] {
        &self.ops
    }

    /// Hilbert-space dimension `2^L`.
    pub fn dim(&self) -> usize {
        1usize << self.ops.len()
    }

    /// Bit mask of sites whose Pauli flips the computational state (X, Y).
    pub fn flip_mask(&self) -> usize {
        self.flip_mask
    }

    /// Bit mask of sites contributing a parity sign (Y, Z).
    pub fn sign_mask(&self) -> usize {
        self.sign_mask
    }

    /// `i^{n_Y}`, the phase common to every basis state.
    pub fn global_phase(&self) -> C64 {
        match self.y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.ops.iter().filter(|op| **op != PauliOp::I).count()
    }

    /// First and last non-identity sites, or `None` for the identity.
    pub fn support(&self) -> Option<(usize, usize)> {
        let first = self.ops.iter().position(|op| *op != PauliOp::I)?;
        let last = self.ops.iter().rposition(|op| *op != PauliOp::I)?;
        Some((first, last))
    }

    /// Phase acquired by basis state `x`: `P|x⟩ = phase(x) |x ^ flip_mask⟩`.
    #[inline]
    pub fn phase(&self, x: usize) -> C64 {
        let phase = self.global_phase();
        if (x & self.sign_mask).count_ones() & 1 == 1 {
            -phase
        } else {
            phase
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found });
        }
        Ok(())
    }

    /// Writes `P|ψ⟩` into `out`.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) -> Result<()> {
        self.check_dim(psi.len())?;
        self.check_dim(out.len())?;
        let phase = self.global_phase();
        for (x, amp) in psi.iter().enumerate() {
            let odd = (x & self.sign_mask).count_ones() & 1 == 1;
            let value = phase * amp;
            out[x ^ self.flip_mask] = if odd { -value } else { value };
        }
        Ok(())
    }

    pub fn apply(&self, psi: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_into(psi, &mut out)?;
        Ok(out)
    }

    /// `⟨φ|P|ψ⟩` without allocating.
    pub fn matrix_element(&self, phi: &[C64], psi: &[C64]) -> Result<C64> {
        self.check_dim(phi.len())?;
        self.check_dim(psi.len())?;
        let mut even = C64::new(0.0, 0.0);
        let mut odd = C64::new(0.0, 0.0);
        for (x, amp) in psi.iter().enumerate() {
            let term = phi[x ^ self.flip_mask].conj() * amp;
            if (x & self.sign_mask).count_ones() & 1 == 1 {
                odd += term;
            } else {
                even += term;
            }
        }
        Ok(self.global_phase() * (even - odd))
    }

    /// Explicit Kronecker-product matrix, limited to [`DENSE_ORACLE_LIMIT`] sites.
    pub fn dense(&self) -> Result<Mat<C64>> {
        self.dense_with_limit(DENSE_ORACLE_LIMIT)
    }

    pub fn dense_with_limit(&self, limit: usize) -> Result<Mat<C64>> {
        if self.len() > limit {
            return Err(Error::OracleLimit { length: self.len(), limit });
        }
        let mut acc = Mat::<C64>::from_fn(1, 1, |_, _| C64::new(1.0, 0.0));
        for op in &self.ops {
            let site = op.matrix();
            let n = acc.nrows();
            acc = Mat::from_fn(2 * n, 2 * n, |r, c| acc[(r / 2, c / 2)] * site[r % 2][c % 2]);
        }
        Ok(acc)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.ops {
            write!(f, "{}", op.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s
            .chars()
            .map(|c| {
                PauliOp::from_char(c)
                    .ok_or_else(|| Error::InvalidArgument(format!("not a Pauli label: {c:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn basis_state(dim: usize, index: usize) -> Vec<C64> {
        let mut v = vec![c(0.0, 0.0); dim];
        v[index] = c(1.0, 0.0);
        v
    }

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn x_flips_zero_to_one() {
        assert_eq!(p("X").apply(&basis_state(2, 0)).unwrap(), basis_state(2, 1));
    }

    #[test]
    fn y_on_zero_gives_i_one() {
        let out = p("Y").apply(&basis_state(2, 0)).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(0.0, 1.0)]);
        let out = p("Y").apply(&basis_state(2, 1)).unwrap();
        assert_eq!(out, vec![c(0.0, -1.0), c(0.0, 0.0)]);
    }

    #[test]
    fn zz_on_01_is_negative() {
        let out = p("ZZ").apply(&basis_state(4, 0b01)).unwrap();
        assert_eq!(out, vec![c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn site_one_is_most_significant() {
        // X on site 1 of |00⟩ gives |10⟩ = index 2.
        let out = p("XI").apply(&basis_state(4, 0)).unwrap();
        assert_eq!(out, basis_state(4, 2));
    }

    #[test]
    fn matrix_elements() {
        let zero = basis_state(2, 0);
        let one = basis_state(2, 1);
        assert_eq!(p("X").matrix_element(&one, &zero).unwrap(), c(1.0, 0.0));
        assert_eq!(p("Z").matrix_element(&zero, &zero).unwrap(), c(1.0, 0.0));
        assert_eq!(p("Z").matrix_element(&one, &one).unwrap(), c(-1.0, 0.0));

        let psi = vec![c(0.5, -1.0), c(2.0, 0.25), c(-0.3, 0.1), c(0.0, 1.5)];
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let e = p("II").matrix_element(&psi, &psi).unwrap();
        assert!((e.re - norm2).abs() < 1e-14 && e.im.abs() < 1e-14);
    }

    #[test]
    fn dense_examples() {
        let x = p("X").dense().unwrap();
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        assert_eq!(x[(0, 0)], c(0.0, 0.0));

        let id = p("II").dense().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let expected = if r == col { 1.0 } else { 0.0 };
                assert_eq!(id[(r, col)], c(expected, 0.0));
            }
        }

        // Z⊗X written out by hand: diag(X, -X).
        let zx = p("ZX").dense().unwrap();
        let expected = [
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0],
            [0.0, 0.0, -1.0, 0.0],
        ];
        for r in 0..4 {
            for col in 0..4 {
                assert_eq!(zx[(r, col)], c(expected[r][col], 0.0));
            }
        }
    }

    #[test]
    fn dense_respects_limit() {
        let long = PauliString::identity(7).unwrap();
        assert!(matches!(long.dense(), Err(Error::OracleLimit { length: 7, limit: 6 })));
        assert!(long.dense_with_limit(7).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = p("XX").apply(&basis_state(2, 0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, found: 2 }));
        assert!(p("X").matrix_element(&basis_state(4, 0), &basis_state(2, 0)).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        let s = p("IxYz");
        assert_eq!(s.to_string(), "IXYZ");
        assert_eq!(s.weight(), 3);
        assert_eq!(s.support(), Some((1, 3)));
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }
}
