//! Energy and residue evaluation via the measurement decomposition,
//! plus the measurement ledger that accounts every energy expectation.
//!
//! A full residue sweep costs exactly 2N+1 energy measurements: for
//! each pool element the energies of `U(t) e^{(pi/4) kappa_mu} |Phi_0>`
//! and `U(t) |Phi_mu>`, plus the plain energy `E(t)`.

use std::f64::consts::FRAC_PI_4;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::ansatz::{apply_ansatz, apply_exp_kappa, prepare_state, OperatorPool};
use crate::fock::{SparseHamiltonian, StateVector};
use crate::Result;

/// Where an energy measurement was charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallSite {
    ResidueSweep,
    LineSearch,
    PlainEnergy,
}

/// Counter of energy-expectation evaluations, split per call site.
/// Counters are atomic so concurrent sweeps stay consistent.
#[derive(Debug, Default)]
pub struct MeasurementLedger {
    residue_sweep: AtomicU64,
    line_search: AtomicU64,
    plain_energy: AtomicU64,
}

impl MeasurementLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&self, site: CallSite, count: u64) {
        let counter = match site {
            CallSite::ResidueSweep => &self.residue_sweep,
            CallSite::LineSearch => &self.line_search,
            CallSite::PlainEnergy => &self.plain_energy,
        };
        counter.fetch_add(count, Ordering::Relaxed);
    }

    pub fn total(&self) -> u64 {
        self.residue_sweep.load(Ordering::Relaxed)
            + self.line_search.load(Ordering::Relaxed)
            + self.plain_energy.load(Ordering::Relaxed)
    }

    pub fn breakdown(&self) -> (u64, u64, u64) {
        (
            self.residue_sweep.load(Ordering::Relaxed),
            self.line_search.load(Ordering::Relaxed),
            self.plain_energy.load(Ordering::Relaxed),
        )
    }
}

/// Off-diagonal residues aligned with the pool order.
#[derive(Debug, Clone)]
pub struct ResidueVector {
    pub r: Vec<f64>,
}

impl ResidueVector {
    pub fn norm1(&self) -> f64 {
        self.r.iter().map(|x| x.abs()).sum()
    }

    pub fn norm2_sq(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Result of a full residue sweep.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub residues: ResidueVector,
    /// E(t), the plain energy of the prepared state.
    pub energy: f64,
    /// Diagonal energies E_mu(t) of the rotated partner states.
    pub e_mu: Vec<f64>,
}

fn rayleigh(h: &SparseHamiltonian, psi: &StateVector) -> Result<f64> {
    Ok(psi.dot(&h.matvec(psi)?))
}

/// E(t) = <Psi(t)|H|Psi(t)>. Charges one energy measurement.
pub fn energy(
    h: &SparseHamiltonian,
    pool: &OperatorPool,
    t: &[f64],
    ledger: &MeasurementLedger,
) -> Result<f64> {
    energy_at(h, pool, t, ledger, CallSite::PlainEnergy)
}

/// E(t) charged to an explicit call site (line-search probes use this).
pub fn energy_at(
    h: &SparseHamiltonian,
    pool: &OperatorPool,
    t: &[f64],
    ledger: &MeasurementLedger,
    site: CallSite,
) -> Result<f64> {
    let psi = prepare_state(pool, t)?;
    ledger.charge(site, 1);
    rayleigh(h, &psi)
}

/// Full residue sweep: r_mu = E^{pi/4}_mu - E_mu/2 - E/2 for each mu.
/// Charges exactly 2N+1 energy measurements.
pub fn residue_sweep(
    h: &SparseHamiltonian,
    pool: &OperatorPool,
    t: &[f64],
    ledger: &MeasurementLedger,
) -> Result<SweepResult> {
    let n = pool.len();
    let phi0 = pool.reference_state();
    let psi = apply_ansatz(pool, t, &phi0)?;
    let e = rayleigh(h, &psi)?;
    let mut r = Vec::with_capacity(n);
    let mut e_mu = Vec::with_capacity(n);
    for op in &pool.ops {
        // The pi/4 rotation acts first (rightmost), then U(t).
        let rotated = apply_exp_kappa(&phi0, op, FRAC_PI_4);
        let e_quarter = rayleigh(h, &apply_ansatz(pool, t, &rotated)?)?;
        let mut partner = StateVector::zeros(pool.basis.clone());
        partner.amp[op.partner] = op.partner_sign;
        let e_diag = rayleigh(h, &apply_ansatz(pool, t, &partner)?)?;
        r.push(e_quarter - 0.5 * e_diag - 0.5 * e);
        e_mu.push(e_diag);
    }
    ledger.charge(CallSite::ResidueSweep, 2 * n as u64 + 1);
    Ok(SweepResult { residues: ResidueVector { r }, energy: e, e_mu })
}

/// Direct-projection residues `<Phi_mu|U^+ H U|Phi_0>` by explicit
/// matrix-vector work. Oracle path: no ledger charge.
pub fn residue_direct(
    h: &SparseHamiltonian,
    pool: &OperatorPool,
    t: &[f64],
) -> Result<ResidueVector> {
    let w = h.matvec(&prepare_state(pool, t)?)?;
    let mut r = Vec::with_capacity(pool.len());
    for op in &pool.ops {
        let mut partner = StateVector::zeros(pool.basis.clone());
        partner.amp[op.partner] = op.partner_sign;
        let rotated_partner = apply_ansatz(pool, t, &partner)?;
        r.push(rotated_partner.dot(&w));
    }
    Ok(ResidueVector { r })
}

/// Exact energy variance `||H Psi||^2 - E(t)^2`, i.e. the residue sum
/// of squares over the FULL sector basis. Oracle-only quantity; not a
/// hardware measurable, so it never touches the ledger.
pub fn variance_full(h: &SparseHamiltonian, pool: &OperatorPool, t: &[f64]) -> Result<f64> {
    let psi = prepare_state(pool, t)?;
    let hpsi = h.matvec(&psi)?;
    let e = psi.dot(&hpsi);
    Ok(hpsi.dot(&hpsi) - e * e)
}
