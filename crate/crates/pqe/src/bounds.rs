//! Eigenvalue error certificates and convergence-rate predictions:
//! Kato and Temple brackets, the overlap lower bound, the practical
//! stopping quantity, and Newton-Kantorovich rate estimates.
//!
//! Inapplicable preconditions are values, not errors: sweeps across
//! bond distances must keep going when the trial energy climbs past
//! the first excited level.

/// Outcome of a bound whose preconditions may fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundOutcome<T> {
    Applicable(T),
    Inapplicable,
}

impl<T> BoundOutcome<T> {
    pub fn applicable(self) -> Option<T> {
        match self {
            BoundOutcome::Applicable(x) => Some(x),
            BoundOutcome::Inapplicable => None,
        }
    }
}

/// Which flavor of certificate produced a bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Temple with the full-basis variance and the oracle gap.
    ExactTemple,
    /// Pool-restricted sum with the initial energy as the gap proxy.
    PracticalA,
    /// Two-sided Kato bracket for an interior isolating interval.
    KatoBracket,
}

/// A computed energy certificate.
#[derive(Debug, Clone)]
pub struct EnergyCertificate {
    pub e_trial: f64,
    pub r2_sum: f64,
    pub denom: f64,
    pub eps_t: f64,
    pub kind: CertificateKind,
}

/// Temple bracket: `(E - r2/(e_es - E), E)`, valid when `E < e_es`.
pub fn temple_bracket(e: f64, r2_sum: f64, e_es: f64) -> BoundOutcome<(f64, f64)> {
    if e >= e_es {
        return BoundOutcome::Inapplicable;
    }
    BoundOutcome::Applicable((e - r2_sum / (e_es - e), e))
}

/// Temple certificate with its components recorded.
pub fn temple_certificate(e: f64, r2_sum: f64, e_es: f64) -> BoundOutcome<EnergyCertificate> {
    match temple_bracket(e, r2_sum, e_es) {
        BoundOutcome::Applicable((lower, upper)) => BoundOutcome::Applicable(EnergyCertificate {
            e_trial: upper,
            r2_sum,
            denom: e_es - e,
            eps_t: upper - lower,
            kind: CertificateKind::ExactTemple,
        }),
        BoundOutcome::Inapplicable => BoundOutcome::Inapplicable,
    }
}

/// Kato bracket on an isolating interval (alpha, beta):
/// `(E - r2/(beta - E), E + r2/(E - alpha))`, requiring
/// `alpha < E < beta` and `r2 < (beta - E)(E - alpha)`.
/// `alpha = -inf` degenerates to the Temple lower bound.
pub fn kato_bracket(e: f64, r2_sum: f64, alpha: f64, beta: f64) -> BoundOutcome<(f64, f64)> {
    if !(alpha < e && e < beta) {
        return BoundOutcome::Inapplicable;
    }
    if alpha.is_finite() && r2_sum >= (beta - e) * (e - alpha) {
        return BoundOutcome::Inapplicable;
    }
    let lower = e - r2_sum / (beta - e);
    let upper = if alpha.is_finite() { e + r2_sum / (e - alpha) } else { e };
    BoundOutcome::Applicable((lower, upper))
}

/// Overlap lower bound with the ground state:
/// `1 - r2/(e_es - e_gs)^2 * (1 + r2/(e_es - E)^2)`.
/// May be negative (vacuous); that is returned as-is.
pub fn overlap_lower_bound(r2_sum: f64, e: f64, e_gs: f64, e_es: f64) -> BoundOutcome<f64> {
    let gap = e_es - e_gs;
    if gap <= 0.0 || e >= e_es {
        return BoundOutcome::Inapplicable;
    }
    let correction = 1.0 + r2_sum / ((e_es - e) * (e_es - e));
    BoundOutcome::Applicable(1.0 - r2_sum / (gap * gap) * correction)
}

/// The practical stopping quantity: pool residue sum of squares over
/// the descent from the initial energy.
#[derive(Debug, Clone, Copy)]
pub struct PracticalCriterion {
    pub eps_ta: f64,
    /// Set when the denominator was non-positive (value forced to
    /// +inf, the optimizer proceeds).
    pub degenerate: bool,
}

/// `eps_T^A = sum_{mu in A} r_mu^2 / (E0_initial - E_current)`.
pub fn practical_criterion(
    residues: &[f64],
    e0_initial: f64,
    e_current: f64,
) -> PracticalCriterion {
    let r2: f64 = residues.iter().map(|r| r * r).sum();
    let denom = e0_initial - e_current;
    if denom <= 0.0 {
        // Zero residues are conclusive even without descent.
        let eps_ta = if r2 == 0.0 { 0.0 } else { f64::INFINITY };
        return PracticalCriterion { eps_ta, degenerate: true };
    }
    PracticalCriterion { eps_ta: r2 / denom, degenerate: false }
}

/// Residual 1-norm error estimate, reported alongside for comparison.
pub fn eps_one_norm(residues: &[f64]) -> f64 {
    residues.iter().map(|r| r.abs()).sum()
}

/// Newton-Kantorovich contraction factor and rate lower bound:
/// `q = 1 - sqrt(1 - 2 eta L)` and `gamma_lb = -log(q)`, defined when
/// `2 eta L < 1`.
pub fn nk_rate(eta: f64, l: f64) -> BoundOutcome<(f64, f64)> {
    if eta == 0.0 {
        return BoundOutcome::Applicable((0.0, f64::INFINITY));
    }
    if 2.0 * eta * l >= 1.0 {
        return BoundOutcome::Inapplicable;
    }
    let q = 1.0 - (1.0 - 2.0 * eta * l).sqrt();
    BoundOutcome::Applicable((q, -q.ln()))
}

/// HOMO-LUMO form of the rate bound:
/// `q <= 1 - sqrt(1 - 2 ||r(0)||_1 / gap)` when `2 ||r||_1 < gap`.
pub fn homo_lumo_rate_bound(r0_norm1: f64, gap: f64) -> BoundOutcome<f64> {
    if gap <= 0.0 || 2.0 * r0_norm1 >= gap {
        return BoundOutcome::Inapplicable;
    }
    BoundOutcome::Applicable(1.0 - (1.0 - 2.0 * r0_norm1 / gap).sqrt())
}
