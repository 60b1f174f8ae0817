//! Reference implementations shared by the integration tests. Nothing here
//! calls into the crate's own dense or counting code.

#![allow(dead_code)]

use faer::Mat;
use hamrec::pauli::{PauliOp, PauliString};
use hamrec::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_2x2(op: PauliOp) -> [[C64; 2]; 2] {
    let (o, l) = (c(0.0, 0.0), c(1.0, 0.0));
    match op {
        PauliOp::I => [[l, o], [o, l]],
        PauliOp::X => [[o, l], [l, o]],
        PauliOp::Y => [[o, c(0.0, -1.0)], [c(0.0, 1.0), o]],
        PauliOp::Z => [[l, o], [o, -l]],
    }
}

/// Explicit Kronecker product, leftmost site most significant.
pub fn kron_dense(ops: &[PauliOp]) -> Mat<C64> {
    let mut m = Mat::<C64>::from_fn(1, 1, |_, _| c(1.0, 0.0));
    for &op in ops {
        let p = pauli_2x2(op);
        let n = m.nrows();
        m = Mat::from_fn(2 * n, 2 * n, |r, col| m[(r / 2, col / 2)] * p[r % 2][col % 2]);
    }
    m
}

pub fn string_dense(p: &PauliString) -> Mat<C64> {
    kron_dense(p.ops())
}

/// `Σ a_n h_n` from explicit Kronecker products.
pub fn hamiltonian_dense(terms: &[PauliString], a: &[f64]) -> Mat<C64> {
    let n = 1usize << terms[0].len();
    let mut h = Mat::<C64>::zeros(n, n);
    for (t, &x) in terms.iter().zip(a) {
        h += string_dense(t) * faer::Scale(c(x, 0.0));
    }
    h
}

pub fn frobenius(m: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for col in 0..m.ncols() {
        acc += m.col_as_slice(col).iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    acc.sqrt()
}

pub fn commutator(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    a * b - b * a
}

/// `S` written out from the block counting argument: two real rows per
/// pair of vectors in different blocks (each unordered block pair counted
/// once) and per (kernel vector, block vector) pair.
pub fn lie_count(q: &[usize], length: usize) -> u64 {
    let dim = 1u64 << length;
    let total: u64 = q.iter().map(|&x| x as u64).sum();
    let mut cross = 0u64;
    for i in 0..q.len() {
        for j in (i + 1)..q.len() {
            cross += (q[i] * q[j]) as u64;
        }
    }
    2 * cross + 2 * total * (dim - total)
}

pub fn h2_terms(length: usize) -> usize {
    12 * length - 9
}

pub fn h3_terms(length: usize) -> usize {
    48 * length - 81
}

/// Numeric rank with `τ = σ_max · max(rows, cols) · ε`.
pub fn numeric_rank(m: &Mat<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.singular_values().expect("svd");
    let top = s.iter().copied().fold(0.0f64, f64::max);
    let tau = top * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    s.iter().filter(|&&x| x > tau).count()
}
