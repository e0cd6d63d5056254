//! Disentangled unitary coupled-cluster machinery: ordered excitation
//! pools and exact application of the factors `e^{t_mu kappa_mu}`.
//!
//! Each generator `kappa = tau - tau^+` satisfies `kappa^3 = -kappa`,
//! so its exponential has the closed form
//! `e^{t kappa} = 1 + sin(t) kappa + (1 - cos(t)) kappa^2`
//! and every factor is a real orthogonal map on the sector.

use std::sync::Arc;

use crate::fock::{apply_excitation, Determinant, SectorBasis, StateVector};
use crate::integrals::SpinOrbitalIntegrals;
use crate::{PqeError, Result};

/// One anti-Hermitian excitation generator `kappa_mu` with its orbital
/// index tuple, Moller-Plesset denominator, and the position of its
/// partner determinant `|Phi_mu> = kappa_mu |Phi_0>` in the basis.
#[derive(Debug, Clone)]
pub struct ExcitationOp {
    /// Occupied (reference) spin-orbitals, strictly increasing.
    pub occupied: Vec<usize>,
    /// Virtual spin-orbitals, strictly increasing.
    pub virtuals: Vec<usize>,
    /// Excitation rank (1 = single, ... 4 = quadruple).
    pub rank: usize,
    /// Moller-Plesset denominator: sum eps_occ - sum eps_virt.
    pub delta_mp: f64,
    /// Basis position of kappa_mu |Phi_0|.
    pub partner: usize,
    /// Sign attached to the partner determinant so that
    /// kappa_mu |Phi_0> = partner_sign * |det(partner)>.
    pub partner_sign: f64,
}

/// Ordered excitation pool. The list order is the product order of the
/// ansatz with the leftmost factor first: singles block, then doubles,
/// and so on, lexicographic by (occupied, virtuals) inside a block.
#[derive(Debug)]
pub struct OperatorPool {
    pub ops: Vec<ExcitationOp>,
    pub basis: Arc<SectorBasis>,
    /// Reference determinant (the n lowest spin-orbitals).
    pub reference: Determinant,
    /// Basis position of the reference.
    pub reference_pos: usize,
}

impl OperatorPool {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The reference state |Phi_0> as a statevector.
    pub fn reference_state(&self) -> StateVector {
        StateVector::unit(self.basis.clone(), self.reference_pos)
    }
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        for mut tail in combinations(&items[i + 1..], k - 1) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

fn alpha_count(orbs: &[usize]) -> usize {
    orbs.iter().filter(|&&p| p % 2 == 0).count()
}

/// Enumerates all particle-number and Sz-conserving excitations from
/// the reference up to `max_rank`, in the declared block order.
pub fn generate_pool(
    ints: &SpinOrbitalIntegrals,
    basis: Arc<SectorBasis>,
    max_rank: usize,
) -> Result<OperatorPool> {
    let n = ints.n_electrons;
    let reference = Determinant::reference(n);
    let reference_pos = basis.position(reference).ok_or_else(|| {
        PqeError::Validation("reference determinant not in sector basis".into())
    })?;
    let occ_orbs: Vec<usize> = (0..n).collect();
    let virt_orbs: Vec<usize> = (n..ints.m).collect();
    let eps = &ints.orbital_energies;

    let mut ops = Vec::new();
    for rank in 1..=max_rank.min(n).min(ints.m - n) {
        let mut block = Vec::new();
        for occ in combinations(&occ_orbs, rank) {
            for virt in combinations(&virt_orbs, rank) {
                if alpha_count(&occ) != alpha_count(&virt) {
                    continue; // Sz not conserved
                }
                let (det, sign) = match apply_excitation(reference, &virt, &occ) {
                    Some(x) => x,
                    None => continue,
                };
                let partner = match basis.position(det) {
                    Some(p) => p,
                    None => continue,
                };
                let delta_mp: f64 = occ.iter().map(|&i| eps[i]).sum::<f64>()
                    - virt.iter().map(|&a| eps[a]).sum::<f64>();
                block.push(ExcitationOp {
                    occupied: occ.clone(),
                    virtuals: virt,
                    rank,
                    delta_mp,
                    partner,
                    partner_sign: sign,
                });
            }
        }
        block.sort_by(|a, b| {
            (&a.occupied, &a.virtuals).cmp(&(&b.occupied, &b.virtuals))
        });
        ops.extend(block);
    }
    Ok(OperatorPool { ops, basis, reference, reference_pos })
}

/// Applies `kappa_mu = tau - tau^+` to a statevector.
pub fn apply_kappa(psi: &StateVector, op: &ExcitationOp) -> StateVector {
    let basis = &psi.basis;
    let mut out = StateVector::zeros(basis.clone());
    for (i, &a) in psi.amp.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let det = basis.states[i];
        if let Some((d, s)) = apply_excitation(det, &op.virtuals, &op.occupied) {
            if let Some(j) = basis.position(d) {
                out.amp[j] += s * a;
            }
        }
        if let Some((d, s)) = apply_excitation(det, &op.occupied, &op.virtuals) {
            if let Some(j) = basis.position(d) {
                out.amp[j] -= s * a;
            }
        }
    }
    out
}

/// Exact action of `e^{t kappa}` using `kappa^3 = -kappa`:
/// `psi + sin(t) (kappa psi) + (1 - cos(t)) (kappa^2 psi)`.
pub fn apply_exp_kappa(psi: &StateVector, op: &ExcitationOp, t: f64) -> StateVector {
    if t == 0.0 {
        return psi.clone();
    }
    let k1 = apply_kappa(psi, op);
    let k2 = apply_kappa(&k1, op);
    let (sin_t, cos_t) = t.sin_cos();
    let mut out = psi.clone();
    for i in 0..out.amp.len() {
        out.amp[i] += sin_t * k1.amp[i] + (1.0 - cos_t) * k2.amp[i];
    }
    out
}

/// Prepares `U(t) |phi>` for the product convention with the rightmost
/// written factor acting first: ops are applied from the end of the
/// pool (doubles before singles under the block ordering).
pub fn apply_ansatz(pool: &OperatorPool, t: &[f64], phi: &StateVector) -> Result<StateVector> {
    if t.len() != pool.len() {
        return Err(PqeError::Dimension(format!(
            "amplitude vector has {} entries, pool has {}",
            t.len(),
            pool.len()
        )));
    }
    let mut psi = phi.clone();
    for (op, &amp) in pool.ops.iter().zip(t).rev() {
        if amp != 0.0 {
            psi = apply_exp_kappa(&psi, op, amp);
        }
    }
    Ok(psi)
}

/// Prepares `U(t) |Phi_0>`.
pub fn prepare_state(pool: &OperatorPool, t: &[f64]) -> Result<StateVector> {
    apply_ansatz(pool, t, &pool.reference_state())
}
