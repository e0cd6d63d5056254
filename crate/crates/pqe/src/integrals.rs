//! FCIDUMP ingestion and the second-quantized Hamiltonian coefficients.
//!
//! Reads the FCIDUMP convention (header with NORB/NELEC/MS2, records
//! `value i j k l` over spatial orbitals in chemists' notation with
//! 8-fold permutation symmetry) and expands to spin-orbital integrals in
//! physicists' ordering. Spatial orbital P maps to spin-orbitals 2P
//! (alpha) and 2P+1 (beta).

use std::collections::HashMap;
use std::path::Path;

use crate::{PqeError, Result};

/// One- and two-body coefficients of the electronic-structure
/// Hamiltonian, over spin-orbitals, in Hartree.
///
/// `v` holds `<pq|rs>` in physicists' ordering, so the two-body part of
/// the Hamiltonian reads `1/2 sum_pqrs v[pqrs] a_p+ a_q+ a_s a_r`.
#[derive(Debug, Clone)]
pub struct SpinOrbitalIntegrals {
    /// Number of spin-orbitals (2 * NORB).
    pub m: usize,
    pub n_electrons: usize,
    /// Scalar energy offset (nuclear repulsion plus frozen core).
    pub e_core: f64,
    h: Vec<f64>,
    v: Vec<f64>,
    /// Hartree-Fock orbital energy per spin-orbital.
    pub orbital_energies: Vec<f64>,
}

impl SpinOrbitalIntegrals {
    #[inline]
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.h[p * self.m + q]
    }

    /// Physicists' two-body coefficient `<pq|rs>`.
    #[inline]
    pub fn v(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.m;
        self.v[((p * m + q) * m + r) * m + s]
    }

    /// Builds integrals directly from dense spin-orbital tables.
    /// Intended for synthetic test Hamiltonians.
    pub fn from_dense(
        n_electrons: usize,
        e_core: f64,
        h: Vec<f64>,
        v: Vec<f64>,
        orbital_energies: Vec<f64>,
    ) -> Result<Self> {
        let m = orbital_energies.len();
        if h.len() != m * m || v.len() != m * m * m * m {
            return Err(PqeError::Dimension(format!(
                "dense tables inconsistent with m={m}"
            )));
        }
        Ok(Self { m, n_electrons, e_core, h, v, orbital_energies })
    }

    /// Recomputes the Fock-matrix diagonal over the reference
    /// occupation: eps_p = h_pp + sum_{i in occ} (<pi|pi> - <pi|ip>).
    pub fn fock_diagonal(&self) -> Vec<f64> {
        let occ: Vec<usize> = (0..self.n_electrons).collect();
        (0..self.m)
            .map(|p| {
                let mut eps = self.h(p, p);
                for &i in &occ {
                    eps += self.v(p, i, p, i) - self.v(p, i, i, p);
                }
                eps
            })
            .collect()
    }
}

/// Hartree-Fock energy of the reference determinant (the `n_electrons`
/// lowest spin-orbitals): `e_core + sum_i h_ii + 1/2 sum_ij (<ij|ij> - <ij|ji>)`.
pub fn hf_energy(ints: &SpinOrbitalIntegrals) -> f64 {
    let n = ints.n_electrons;
    let mut e = ints.e_core;
    for i in 0..n {
        e += ints.h(i, i);
        for j in 0..n {
            e += 0.5 * (ints.v(i, j, i, j) - ints.v(i, j, j, i));
        }
    }
    e
}

/// Parses an FCIDUMP character stream into spin-orbital integrals.
pub fn parse_fcidump(text: &str) -> Result<SpinOrbitalIntegrals> {
    let mut norb: Option<usize> = None;
    let mut nelec: Option<usize> = None;
    let mut lines = text.lines().enumerate();

    // Header: scan until &END (or END&-style terminator), collecting
    // NORB / NELEC assignments. MS2 and symmetry tags are tolerated.
    let mut header = String::new();
    let mut body_start = 0;
    for (lineno, line) in lines.by_ref() {
        header.push_str(line);
        header.push(' ');
        if line.contains("&END") || line.contains("/") {
            body_start = lineno + 1;
            break;
        }
    }
    for field in header.split(|c: char| c == ',' || c.is_whitespace()) {
        if let Some((key, value)) = field.split_once('=') {
            let key = key.trim().to_uppercase();
            if key == "NORB" || key == "NELEC" {
                let parsed: usize = value.trim().parse().map_err(|_| {
                    PqeError::Header(format!("bad {key} value {value:?}"))
                })?;
                if key == "NORB" {
                    norb = Some(parsed);
                } else {
                    nelec = Some(parsed);
                }
            }
        }
    }
    let norb = norb.ok_or_else(|| PqeError::Header("missing NORB".into()))?;
    let nelec = nelec.ok_or_else(|| PqeError::Header("missing NELEC".into()))?;

    // Spatial-orbital tables in chemists' notation (ij|kl).
    let mut h_spatial = vec![0.0; norb * norb];
    let mut g_spatial: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
    let mut e_core = 0.0;

    for (lineno, line) in text.lines().enumerate().skip(body_start) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(PqeError::Parse {
                line: lineno + 1,
                msg: format!("expected `value i j k l`, got {line:?}"),
            });
        }
        let value: f64 = fields[0].replace(['D', 'd'], "E").parse().map_err(|_| {
            PqeError::Parse { line: lineno + 1, msg: format!("bad value {:?}", fields[0]) }
        })?;
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| PqeError::Parse {
                line: lineno + 1,
                msg: format!("bad index {f:?}"),
            })?;
        }
        let [i, j, k, l] = idx;
        for (label, x) in [("i", i), ("j", j), ("k", k), ("l", l)] {
            if x > norb {
                return Err(PqeError::Validation(format!(
                    "index {label}={x} out of range for NORB={norb} (line {})",
                    lineno + 1
                )));
            }
        }
        match (i, j, k, l) {
            (0, 0, 0, 0) => e_core = value,
            (i, j, 0, 0) if i > 0 && j > 0 => {
                h_spatial[(i - 1) * norb + (j - 1)] = value;
                h_spatial[(j - 1) * norb + (i - 1)] = value;
            }
            (i, j, k, l) if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for key in [
                    (i, j, k, l),
                    (j, i, k, l),
                    (i, j, l, k),
                    (j, i, l, k),
                    (k, l, i, j),
                    (l, k, i, j),
                    (k, l, j, i),
                    (l, k, j, i),
                ] {
                    g_spatial.insert(key, value);
                }
            }
            _ => {
                return Err(PqeError::Parse {
                    line: lineno + 1,
                    msg: format!("inconsistent index pattern {idx:?}"),
                })
            }
        }
    }

    let m = 2 * norb;
    let mut h = vec![0.0; m * m];
    for p in 0..m {
        for q in 0..m {
            if p % 2 == q % 2 {
                h[p * m + q] = h_spatial[(p / 2) * norb + q / 2];
            }
        }
    }
    // Physicists' <pq|rs> = (PR|QS)_chem with spin deltas on (p,r), (q,s).
    let mut v = vec![0.0; m * m * m * m];
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                if p % 2 != r % 2 {
                    continue;
                }
                for s in 0..m {
                    if q % 2 != s % 2 {
                        continue;
                    }
                    if let Some(&g) = g_spatial.get(&(p / 2, r / 2, q / 2, s / 2)) {
                        v[((p * m + q) * m + r) * m + s] = g;
                    }
                }
            }
        }
    }

    let mut ints = SpinOrbitalIntegrals {
        m,
        n_electrons: nelec,
        e_core,
        h,
        v,
        orbital_energies: Vec::new(),
    };
    ints.orbital_energies = ints.fock_diagonal();
    Ok(ints)
}

/// Oracle values stored alongside each FCIDUMP fixture.
#[derive(Debug, Clone, Default)]
pub struct SidecarMeta {
    pub bond_distance_angstrom: Option<f64>,
    pub hf_energy: Option<f64>,
    pub fci_ground_energy: Option<f64>,
    pub fci_first_excited_energy: Option<f64>,
    pub orbital_energies: Option<Vec<f64>>,
}

/// Parses a sidecar metadata file (`key = value` lines).
pub fn parse_sidecar(text: &str) -> Result<SidecarMeta> {
    let mut meta = SidecarMeta::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| PqeError::Parse {
            line: lineno + 1,
            msg: format!("expected `key = value`, got {line:?}"),
        })?;
        let parse_f64 = |v: &str| -> Result<f64> {
            v.trim().parse().map_err(|_| PqeError::Parse {
                line: lineno + 1,
                msg: format!("bad number {v:?}"),
            })
        };
        match key.trim() {
            "bond_distance_angstrom" => meta.bond_distance_angstrom = Some(parse_f64(value)?),
            "hf_energy" => meta.hf_energy = Some(parse_f64(value)?),
            "fci_ground_energy" => meta.fci_ground_energy = Some(parse_f64(value)?),
            "fci_first_excited_energy" => {
                meta.fci_first_excited_energy = Some(parse_f64(value)?)
            }
            "orbital_energies" => {
                let mut eps = Vec::new();
                for tok in value.split(',') {
                    eps.push(parse_f64(tok)?);
                }
                meta.orbital_energies = Some(eps);
            }
            _ => {} // unknown keys are ignored
        }
    }
    Ok(meta)
}

/// Loads an FCIDUMP file and, when present, its `.meta` sidecar
/// (same path with the extension replaced).
pub fn load_fixture(path: &Path) -> Result<(SpinOrbitalIntegrals, SidecarMeta)> {
    let text = std::fs::read_to_string(path)?;
    let mut ints = parse_fcidump(&text)?;
    let meta_path = path.with_extension("meta");
    let meta = if meta_path.exists() {
        let meta = parse_sidecar(&std::fs::read_to_string(&meta_path)?)?;
        if let Some(eps) = &meta.orbital_energies {
            if eps.len() != ints.m {
                return Err(PqeError::Dimension(format!(
                    "sidecar orbital_energies has {} entries, expected {}",
                    eps.len(),
                    ints.m
                )));
            }
            ints.orbital_energies = eps.clone();
        }
        meta
    } else {
        SidecarMeta::default()
    };
    Ok((ints, meta))
}
