//! Determinant-basis linear algebra: occupation encodings, fermionic
//! sign rules, sector-restricted bases, and sparse Hamiltonian
//! application.
//!
//! Everything is real: the Hamiltonian of Eq-style electronic structure
//! problems is real in the determinant basis and every excitation
//! exponential is a real orthogonal map.

use std::collections::HashMap;
use std::sync::Arc;

use crate::integrals::SpinOrbitalIntegrals;
use crate::{PqeError, Result};

/// Bit-packed occupation vector: bit `p` set means spin-orbital `p`
/// is occupied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant(pub u64);

impl Determinant {
    #[inline]
    pub fn occupied(&self, p: usize) -> bool {
        self.0 >> p & 1 == 1
    }

    #[inline]
    pub fn popcount(&self) -> u32 {
        self.0.count_ones()
    }

    /// Twice the Sz projection under the interleaved spin convention
    /// (even bits alpha, odd bits beta).
    pub fn sz_twice(&self) -> i32 {
        let alpha = (self.0 & 0x5555_5555_5555_5555).count_ones() as i32;
        let beta = (self.0 & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as i32;
        alpha - beta
    }

    /// Reference determinant: the `n` lowest spin-orbitals occupied.
    pub fn reference(n: usize) -> Self {
        Determinant((1u64 << n) - 1)
    }
}

/// Applies the operator string `a+_{c1} a+_{c2} ... a_{k2} a_{k1}`
/// (`annihilate = [k1, k2, ...]`, rightmost operator first) with the
/// standard fermionic sign from counting occupied modes below each
/// index. Returns `None` when the result vanishes.
pub fn apply_excitation(
    det: Determinant,
    create: &[usize],
    annihilate: &[usize],
) -> Option<(Determinant, f64)> {
    let mut occ = det.0;
    let mut sign = 1.0;
    for &p in annihilate {
        if occ >> p & 1 == 0 {
            return None;
        }
        if (occ & ((1u64 << p) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        occ &= !(1u64 << p);
    }
    for &p in create.iter().rev() {
        if occ >> p & 1 == 1 {
            return None;
        }
        if (occ & ((1u64 << p) - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        occ |= 1u64 << p;
    }
    Some((Determinant(occ), sign))
}

/// The particle-number and Sz-restricted determinant basis, sorted
/// ascending by bit pattern.
#[derive(Debug)]
pub struct SectorBasis {
    pub m: usize,
    pub n_electrons: usize,
    pub sz_twice: i32,
    pub states: Vec<Determinant>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(m: usize, n_electrons: usize, sz_twice: i32) -> Self {
        assert!(m <= 63, "at most 63 spin-orbitals supported (got {m})");
        let mut states = Vec::new();
        if n_electrons == 0 {
            if sz_twice == 0 {
                states.push(Determinant(0));
            }
        } else {
            // Iterate n-subsets of m bits in increasing numeric order
            // (Gosper's hack).
            let mut mask = (1u64 << n_electrons) - 1;
            let limit = 1u64 << m;
            while mask < limit {
                let det = Determinant(mask);
                if det.sz_twice() == sz_twice {
                    states.push(det);
                }
                let c = mask & mask.wrapping_neg();
                let r = mask + c;
                mask = (((r ^ mask) >> 2) / c) | r;
                if c == 0 {
                    break;
                }
            }
        }
        let index = states.iter().enumerate().map(|(i, d)| (d.0, i)).collect();
        SectorBasis { m, n_electrons, sz_twice, states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn position(&self, det: Determinant) -> Option<usize> {
        self.index.get(&det.0).copied()
    }
}

/// Real amplitudes over a sector basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub basis: Arc<SectorBasis>,
    pub amp: Vec<f64>,
}

impl StateVector {
    pub fn zeros(basis: Arc<SectorBasis>) -> Self {
        let amp = vec![0.0; basis.len()];
        StateVector { basis, amp }
    }

    /// Basis state concentrated on one determinant.
    pub fn unit(basis: Arc<SectorBasis>, position: usize) -> Self {
        let mut sv = Self::zeros(basis);
        sv.amp[position] = 1.0;
        sv
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &StateVector) -> f64 {
        self.amp.iter().zip(&other.amp).map(|(a, b)| a * b).sum()
    }
}

/// Symmetric sparse Hamiltonian over a sector basis (CSR layout).
#[derive(Debug)]
pub struct SparseHamiltonian {
    pub basis: Arc<SectorBasis>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = H x into a plain amplitude array.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }

    pub fn matvec(&self, x: &StateVector) -> Result<StateVector> {
        if !Arc::ptr_eq(&self.basis, &x.basis) && self.dim() != x.amp.len() {
            return Err(PqeError::Dimension(
                "matvec: state basis does not match Hamiltonian".into(),
            ));
        }
        let mut y = StateVector::zeros(self.basis.clone());
        self.matvec_into(&x.amp, &mut y.amp);
        Ok(y)
    }

    pub fn element(&self, row: usize, col: usize) -> f64 {
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            if self.cols[k] == col {
                return self.vals[k];
            }
        }
        0.0
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut dense = nalgebra::DMatrix::zeros(n, n);
        for row in 0..n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                dense[(row, self.cols[k])] = self.vals[k];
            }
        }
        dense
    }
}

/// Builds `<a|H|b>` over the sector basis, applying the one-body and
/// two-body operator strings of the Hamiltonian column by column. The
/// 1/2 two-body prefactor and `e_core` on the diagonal are included.
pub fn build_hamiltonian(
    ints: &SpinOrbitalIntegrals,
    basis: Arc<SectorBasis>,
) -> Result<SparseHamiltonian> {
    if basis.m != ints.m {
        return Err(PqeError::Dimension(format!(
            "basis m={} vs integrals m={}",
            basis.m, ints.m
        )));
    }
    let m = ints.m;
    let dim = basis.len();
    let mut row_ptr = vec![0usize; dim + 1];
    let mut cols_all: Vec<Vec<usize>> = vec![Vec::new(); dim];
    let mut vals_all: Vec<Vec<f64>> = vec![Vec::new(); dim];

    for (col, &det) in basis.states.iter().enumerate() {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        acc.insert(col, ints.e_core);
        let occ: Vec<usize> = (0..m).filter(|&p| det.occupied(p)).collect();
        // One-body: h_pq a+_p a_q.
        for &q in &occ {
            for p in 0..m {
                let hpq = ints.h(p, q);
                if hpq == 0.0 {
                    continue;
                }
                if let Some((d, sign)) = apply_excitation(det, &[p], &[q]) {
                    if let Some(row) = basis.position(d) {
                        *acc.entry(row).or_insert(0.0) += sign * hpq;
                    }
                }
            }
        }
        // Two-body: 1/2 v_pqrs a+_p a+_q a_s a_r.
        for &r in &occ {
            for &s in &occ {
                if s == r {
                    continue;
                }
                let (mid, sign0) =
                    apply_excitation(det, &[], &[r, s]).expect("r,s occupied");
                for q in 0..m {
                    if mid.occupied(q) {
                        continue;
                    }
                    let (mid2, sign1) =
                        apply_excitation(mid, &[q], &[]).expect("q empty");
                    for p in 0..m {
                        let v = ints.v(p, q, r, s);
                        if v == 0.0 || mid2.occupied(p) {
                            continue;
                        }
                        let (d, sign2) =
                            apply_excitation(mid2, &[p], &[]).expect("p empty");
                        if let Some(row) = basis.position(d) {
                            *acc.entry(row).or_insert(0.0) +=
                                0.5 * v * sign0 * sign1 * sign2;
                        }
                    }
                }
            }
        }
        let mut entries: Vec<(usize, f64)> = acc
            .into_iter()
            .filter(|(r, v)| v.abs() > 1e-14 || *r == col)
            .collect();
        entries.sort_by_key(|e| e.0);
        row_ptr[col + 1] = entries.len();
        for (r, v) in entries {
            cols_all[col].push(r);
            vals_all[col].push(v);
        }
    }
    // Column-wise accumulation equals row-wise layout by symmetry.
    for i in 0..dim {
        row_ptr[i + 1] += row_ptr[i];
    }
    Ok(SparseHamiltonian {
        basis,
        row_ptr,
        cols: cols_all.concat(),
        vals: vals_all.concat(),
    })
}
