#!/usr/bin/env python3
"""Generate FCIDUMP fixtures with oracle sidecar metadata.

Computes STO-3G integrals (McMurchie-Davidson scheme), runs restricted
Hartree-Fock, transforms to the MO basis, writes an FCIDUMP file per
geometry, and attaches a sidecar file carrying the HF energy and the two
lowest FCI eigenvalues of the (N, Sz) sector obtained by dense
diagonalization.

Usage: python3 tools/gen_fixtures.py [outdir]
"""

import itertools
import math
import os
import sys

import numpy as np
from scipy.special import hyp1f1

ANGSTROM_TO_BOHR = 1.8897259886

# STO-3G exponents and contraction coefficients.
STO3G = {
    "H": [("s", [3.42525091, 0.62391373, 0.16885540],
           [0.15432897, 0.53532814, 0.44463454])],
    "Li": [("s", [16.1195750, 2.9362007, 0.7946505],
            [0.15432897, 0.53532814, 0.44463454]),
           ("sp", [0.6362897, 0.1478601, 0.0480887],
            [-0.09996723, 0.39951283, 0.70011547],
            [0.15591627, 0.60768372, 0.39195739])],
    "Be": [("s", [30.1678710, 5.4951153, 1.4871927],
            [0.15432897, 0.53532814, 0.44463454]),
           ("sp", [1.3148331, 0.3055389, 0.0993707],
            [-0.09996723, 0.39951283, 0.70011547],
            [0.15591627, 0.60768372, 0.39195739])],
}

CHARGES = {"H": 1, "Li": 3, "Be": 4}


class Primitive:
    def __init__(self, exp, coef, lmn, center):
        self.exp = exp
        self.lmn = lmn
        self.center = np.asarray(center, dtype=float)
        l, m, n = lmn
        # Normalization of a cartesian Gaussian primitive.
        norm = (2 * exp / np.pi) ** 0.75 * (4 * exp) ** ((l + m + n) / 2.0)
        norm /= math.sqrt(df(2 * l - 1) * df(2 * m - 1) * df(2 * n - 1))
        self.coef = coef * norm


def df(n):
    """Double factorial with df(-1) = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


class Shell:
    """A contracted cartesian Gaussian basis function."""

    def __init__(self, exps, coefs, lmn, center):
        self.prims = [Primitive(e, c, lmn, center) for e, c in zip(exps, coefs)]
        # Contracted normalization.
        s = 0.0
        for a in self.prims:
            for b in self.prims:
                s += a.coef * b.coef * overlap_prim(a.exp, a.lmn, a.center,
                                                   b.exp, b.lmn, b.center)
        for p in self.prims:
            p.coef /= math.sqrt(s)


def hermite_e(i, j, t, qx, a, b):
    """Hermite expansion coefficient E_t^{ij} (McMurchie-Davidson)."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return math.exp(-q * qx * qx)
    if j == 0:
        return (hermite_e(i - 1, j, t - 1, qx, a, b) / (2 * p)
                - q * qx / a * hermite_e(i - 1, j, t, qx, a, b)
                + (t + 1) * hermite_e(i - 1, j, t + 1, qx, a, b))
    return (hermite_e(i, j - 1, t - 1, qx, a, b) / (2 * p)
            + q * qx / b * hermite_e(i, j - 1, t, qx, a, b)
            + (t + 1) * hermite_e(i, j - 1, t + 1, qx, a, b))


def overlap_prim(a, lmn1, ra, b, lmn2, rb):
    p = a + b
    s = 1.0
    for k in range(3):
        s *= hermite_e(lmn1[k], lmn2[k], 0, ra[k] - rb[k], a, b)
    return s * (np.pi / p) ** 1.5


def kinetic_prim(a, lmn1, ra, b, lmn2, rb):
    l2, m2, n2 = lmn2
    term0 = b * (2 * (l2 + m2 + n2) + 3) * overlap_prim(a, lmn1, ra, b, lmn2, rb)
    term1 = -2 * b * b * (
        overlap_prim(a, lmn1, ra, b, (l2 + 2, m2, n2), rb)
        + overlap_prim(a, lmn1, ra, b, (l2, m2 + 2, n2), rb)
        + overlap_prim(a, lmn1, ra, b, (l2, m2, n2 + 2), rb))
    term2 = -0.5 * (
        l2 * (l2 - 1) * overlap_prim(a, lmn1, ra, b, (l2 - 2, m2, n2), rb)
        + m2 * (m2 - 1) * overlap_prim(a, lmn1, ra, b, (l2, m2 - 2, n2), rb)
        + n2 * (n2 - 1) * overlap_prim(a, lmn1, ra, b, (l2, m2, n2 - 2), rb))
    return term0 + term1 + term2


def boys(n, x):
    return hyp1f1(n + 0.5, n + 1.5, -x) / (2.0 * n + 1.0)


def hermite_r(t, u, v, n, p, pc):
    """Hermite Coulomb auxiliary integral R^n_{tuv}."""
    x, y, z = pc
    if t == u == v == 0:
        return (-2.0 * p) ** n * boys(n, p * (x * x + y * y + z * z))
    if t > 0:
        val = 0.0
        if t > 1:
            val += (t - 1) * hermite_r(t - 2, u, v, n + 1, p, pc)
        return val + x * hermite_r(t - 1, u, v, n + 1, p, pc)
    if u > 0:
        val = 0.0
        if u > 1:
            val += (u - 1) * hermite_r(t, u - 2, v, n + 1, p, pc)
        return val + y * hermite_r(t, u - 1, v, n + 1, p, pc)
    val = 0.0
    if v > 1:
        val += (v - 1) * hermite_r(t, u, v - 2, n + 1, p, pc)
    return val + z * hermite_r(t, u, v - 1, n + 1, p, pc)


def nuclear_prim(a, lmn1, ra, b, lmn2, rb, rc):
    p = a + b
    rp = (a * ra + b * rb) / p
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    val = 0.0
    for t in range(l1 + l2 + 1):
        et = hermite_e(l1, l2, t, ra[0] - rb[0], a, b)
        for u in range(m1 + m2 + 1):
            eu = hermite_e(m1, m2, u, ra[1] - rb[1], a, b)
            for v in range(n1 + n2 + 1):
                ev = hermite_e(n1, n2, v, ra[2] - rb[2], a, b)
                val += et * eu * ev * hermite_r(t, u, v, 0, p, rp - rc)
    return 2.0 * np.pi / p * val


def eri_prim(a, lmn1, ra, b, lmn2, rb, c, lmn3, rc, d, lmn4, rd):
    p = a + b
    q = c + d
    alpha = p * q / (p + q)
    rp = (a * ra + b * rb) / p
    rq = (c * rc + d * rd) / q
    l1, m1, n1 = lmn1
    l2, m2, n2 = lmn2
    l3, m3, n3 = lmn3
    l4, m4, n4 = lmn4
    val = 0.0
    for t in range(l1 + l2 + 1):
        e1 = hermite_e(l1, l2, t, ra[0] - rb[0], a, b)
        for u in range(m1 + m2 + 1):
            e2 = hermite_e(m1, m2, u, ra[1] - rb[1], a, b)
            for v in range(n1 + n2 + 1):
                e3 = hermite_e(n1, n2, v, ra[2] - rb[2], a, b)
                for tt in range(l3 + l4 + 1):
                    e4 = hermite_e(l3, l4, tt, rc[0] - rd[0], c, d)
                    for uu in range(m3 + m4 + 1):
                        e5 = hermite_e(m3, m4, uu, rc[1] - rd[1], c, d)
                        for vv in range(n3 + n4 + 1):
                            e6 = hermite_e(n3, n4, vv, rc[2] - rd[2], c, d)
                            val += (e1 * e2 * e3 * e4 * e5 * e6
                                    * (-1) ** (tt + uu + vv)
                                    * hermite_r(t + tt, u + uu, v + vv, 0,
                                                alpha, rp - rq))
    return val * 2.0 * np.pi ** 2.5 / (p * q * math.sqrt(p + q))


def contracted(op, sa, sb, *rest):
    val = 0.0
    for pa in sa.prims:
        for pb in sb.prims:
            val += pa.coef * pb.coef * op(pa.exp, pa.lmn, pa.center,
                                          pb.exp, pb.lmn, pb.center, *rest)
    return val


def contracted_eri(sa, sb, sc, sd):
    val = 0.0
    for pa in sa.prims:
        for pb in sb.prims:
            for pc in sc.prims:
                for pd in sd.prims:
                    val += (pa.coef * pb.coef * pc.coef * pd.coef
                            * eri_prim(pa.exp, pa.lmn, pa.center,
                                       pb.exp, pb.lmn, pb.center,
                                       pc.exp, pc.lmn, pc.center,
                                       pd.exp, pd.lmn, pd.center))
    return val


def build_basis(atoms):
    shells = []
    for sym, pos in atoms:
        pos = np.asarray(pos) * ANGSTROM_TO_BOHR
        for entry in STO3G[sym]:
            if entry[0] == "s":
                _, exps, coefs = entry
                shells.append(Shell(exps, coefs, (0, 0, 0), pos))
            else:
                _, exps, scoefs, pcoefs = entry
                shells.append(Shell(exps, scoefs, (0, 0, 0), pos))
                for lmn in [(1, 0, 0), (0, 1, 0), (0, 0, 1)]:
                    shells.append(Shell(exps, pcoefs, lmn, pos))
    return shells


def integrals(atoms):
    shells = build_basis(atoms)
    nb = len(shells)
    S = np.zeros((nb, nb))
    T = np.zeros((nb, nb))
    V = np.zeros((nb, nb))
    for i in range(nb):
        for j in range(i + 1):
            S[i, j] = S[j, i] = contracted(lambda a, l1, r1, b, l2, r2:
                                           overlap_prim(a, l1, r1, b, l2, r2),
                                           shells[i], shells[j])
            T[i, j] = T[j, i] = contracted(lambda a, l1, r1, b, l2, r2:
                                           kinetic_prim(a, l1, r1, b, l2, r2),
                                           shells[i], shells[j])
            v = 0.0
            for sym, pos in atoms:
                rc = np.asarray(pos) * ANGSTROM_TO_BOHR
                v -= CHARGES[sym] * contracted(nuclear_prim, shells[i],
                                               shells[j], rc)
            V[i, j] = V[j, i] = v
    eri = np.zeros((nb, nb, nb, nb))
    # Chemists' notation (ij|kl) with 8-fold symmetry.
    pairs = [(i, j) for i in range(nb) for j in range(i + 1)]
    for a, (i, j) in enumerate(pairs):
        for (k, l) in pairs[:a + 1]:
            val = contracted_eri(shells[i], shells[j], shells[k], shells[l])
            for (p, q, r, s) in {(i, j, k, l), (j, i, k, l), (i, j, l, k),
                                 (j, i, l, k), (k, l, i, j), (l, k, i, j),
                                 (k, l, j, i), (l, k, j, i)}:
                eri[p, q, r, s] = val
    e_nuc = 0.0
    for x in range(len(atoms)):
        for y in range(x):
            rx = np.asarray(atoms[x][1]) * ANGSTROM_TO_BOHR
            ry = np.asarray(atoms[y][1]) * ANGSTROM_TO_BOHR
            e_nuc += (CHARGES[atoms[x][0]] * CHARGES[atoms[y][0]]
                      / np.linalg.norm(rx - ry))
    return S, T + V, eri, e_nuc


def rhf_attempt(S, hcore, eri, e_nuc, n_elec, max_iter, damp, shift,
                tol=1e-12):
    nb = S.shape[0]
    nocc = n_elec // 2
    sval, svec = np.linalg.eigh(S)
    X = svec @ np.diag(sval ** -0.5) @ svec.T
    F = hcore.copy()
    energy = 0.0
    diis_f, diis_e = [], []
    D_old = None
    Cp = None
    for it in range(max_iter):
        Fp = X.T @ F @ X
        if shift > 0.0 and Cp is not None:
            # Virtual-orbital level shift in the orthonormal basis.
            Pocc = Cp[:, :nocc] @ Cp[:, :nocc].T
            Fp = Fp + shift * (np.eye(nb) - Pocc)
        eps, Cp = np.linalg.eigh(Fp)
        C = X @ Cp
        D = 2.0 * C[:, :nocc] @ C[:, :nocc].T
        if damp > 0.0 and D_old is not None:
            D = (1.0 - damp) * D + damp * D_old
        D_old = D
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prqs,rs->pq", eri, D)
        F = hcore + J - 0.5 * K
        new_energy = 0.5 * np.einsum("pq,pq->", D, hcore + F) + e_nuc
        err = F @ D @ S - S @ D @ F
        if abs(new_energy - energy) < tol and np.abs(err).max() < 1e-9:
            energy = new_energy
            break
        energy = new_energy
        # DIIS extrapolation (skipped while damping is active).
        if damp == 0.0:
            diis_f.append(F.copy())
            diis_e.append(err.copy())
            if len(diis_f) > 8:
                diis_f.pop(0)
                diis_e.pop(0)
            if len(diis_f) > 1:
                n = len(diis_f)
                B = -np.ones((n + 1, n + 1))
                B[n, n] = 0.0
                for x in range(n):
                    for y in range(n):
                        B[x, y] = np.einsum("pq,pq->", diis_e[x], diis_e[y])
                rhs = np.zeros(n + 1)
                rhs[n] = -1.0
                try:
                    c = np.linalg.solve(B, rhs)[:n]
                    F = sum(ci * fi for ci, fi in zip(c, diis_f))
                except np.linalg.LinAlgError:
                    pass
    else:
        raise RuntimeError("SCF attempt failed")
    # Final unshifted diagonalization for orbital energies.
    Fp = X.T @ F @ X
    eps, Cp = np.linalg.eigh(Fp)
    C = X @ Cp
    return energy, C, eps


def rhf(S, hcore, eri, e_nuc, n_elec, max_iter=400):
    attempts = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5),
                (0.8, 1.0)]
    last = None
    for damp, shift in attempts:
        try:
            return rhf_attempt(S, hcore, eri, e_nuc, n_elec,
                               max_iter if damp == 0.0 else 4 * max_iter,
                               damp, shift)
        except RuntimeError as exc:
            last = exc
    raise RuntimeError(f"SCF failed to converge: {last}")


def mo_transform(hcore, eri, C):
    h_mo = C.T @ hcore @ C
    eri_mo = np.einsum("pqrs,pi,qj,rk,sl->ijkl", eri, C, C, C, C,
                       optimize=True)
    return h_mo, eri_mo


def write_fcidump(path, h_mo, eri_mo, e_nuc, n_elec, ms2=0, thresh=1e-12):
    nb = h_mo.shape[0]
    with open(path, "w") as f:
        f.write(f"&FCI NORB={nb},NELEC={n_elec},MS2={ms2},\n")
        f.write(" ORBSYM=" + "1," * nb + "\n")
        f.write(" ISYM=1,\n")
        f.write("&END\n")
        seen = set()
        for i in range(nb):
            for j in range(i + 1):
                for k in range(i + 1):
                    lmax = j if k == i else k
                    for l in range(lmax + 1):
                        v = eri_mo[i, j, k, l]
                        if abs(v) > thresh:
                            f.write(f" {v:23.16E} {i+1:3d} {j+1:3d} "
                                    f"{k+1:3d} {l+1:3d}\n")
        for i in range(nb):
            for j in range(i + 1):
                if abs(h_mo[i, j]) > thresh:
                    f.write(f" {h_mo[i,j]:23.16E} {i+1:3d} {j+1:3d}   0   0\n")
        f.write(f" {e_nuc:23.16E}   0   0   0   0\n")


def spin_expand(h_mo, eri_mo):
    """Spatial MO integrals -> spin-orbital physicists' <pq|rs>.

    Spin-orbital 2P is alpha, 2P+1 beta.
    """
    nb = h_mo.shape[0]
    m = 2 * nb
    h = np.zeros((m, m))
    v = np.zeros((m, m, m, m))
    for p in range(m):
        for q in range(m):
            if p % 2 == q % 2:
                h[p, q] = h_mo[p // 2, q // 2]
    for p in range(m):
        for q in range(m):
            for r in range(m):
                for s in range(m):
                    if p % 2 == r % 2 and q % 2 == s % 2:
                        v[p, q, r, s] = eri_mo[p // 2, r // 2, q // 2, s // 2]
    return h, v


def sector_dets(m, n_elec, ms2):
    n_alpha = (n_elec + ms2) // 2
    n_beta = n_elec - n_alpha
    dets = []
    for occ in itertools.combinations(range(m), n_elec):
        na = sum(1 for o in occ if o % 2 == 0)
        if na == n_alpha:
            mask = 0
            for o in occ:
                mask |= 1 << o
            dets.append(mask)
    dets.sort()
    return dets


def occ_list(mask, m):
    return [p for p in range(m) if mask >> p & 1]


def sign_excite(mask, i, a):
    """Sign of a_a^dag a_i acting on |mask> (i occupied, a empty)."""
    lo, hi = (i, a) if i < a else (a, i)
    cnt = bin(mask & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))).count("1")
    return -1.0 if cnt % 2 else 1.0


def fci_lowest(h, v, e_nuc, m, n_elec, ms2, k=2):
    """Dense FCI in the (N, Sz) sector via Slater-Condon rules."""
    dets = sector_dets(m, n_elec, ms2)
    dim = len(dets)
    index = {d: i for i, d in enumerate(dets)}
    H = np.zeros((dim, dim))
    for col, d in enumerate(dets):
        occ = occ_list(d, m)
        diag = e_nuc
        for i in occ:
            diag += h[i, i]
        for i in occ:
            for j in occ:
                diag += 0.5 * (v[i, j, i, j] - v[i, j, j, i])
        H[col, col] = diag
        virt = [p for p in range(m) if not d >> p & 1]
        for i in occ:
            for a in virt:
                d1 = d ^ (1 << i) | (1 << a)
                if d1 not in index:
                    continue
                s1 = sign_excite(d, i, a)
                val = h[a, i]
                for j in occ:
                    if j != i:
                        val += v[a, j, i, j] - v[a, j, j, i]
                H[index[d1], col] += s1 * val
        for ii in range(len(occ)):
            for jj in range(ii):
                i, j = occ[ii], occ[jj]
                for aa in range(len(virt)):
                    for bb in range(aa):
                        a, b = virt[aa], virt[bb]
                        d2 = d ^ (1 << i) ^ (1 << j) | (1 << a) | (1 << b)
                        if d2 not in index:
                            continue
                        # <j i -> b a>: apply i->a then j->b on the
                        # intermediate determinant.
                        mid = d ^ (1 << i) | (1 << a)
                        s = sign_excite(d, i, a) * sign_excite(mid, j, b)
                        H[index[d2], col] += s * (v[a, b, i, j]
                                                  - v[a, b, j, i])
    vals = np.linalg.eigvalsh(H)
    e_gs = vals[0]
    e_es = next(x for x in vals if x > e_gs + 1e-10)
    return e_gs, e_es, dim


def generate(name, atoms_fn, distances, n_elec, outdir):
    mdir = os.path.join(outdir, name)
    os.makedirs(mdir, exist_ok=True)
    for d in distances:
        atoms = atoms_fn(d)
        S, hcore, eri, e_nuc = integrals(atoms)
        e_hf, C, eps = rhf(S, hcore, eri, e_nuc, n_elec)
        h_mo, eri_mo = mo_transform(hcore, eri, C)
        tag = f"{name}_{d:.4f}"
        write_fcidump(os.path.join(mdir, tag + ".fcidump"),
                      h_mo, eri_mo, e_nuc, n_elec)
        h_so, v_so = spin_expand(h_mo, eri_mo)
        e_gs, e_es, dim = fci_lowest(h_so, v_so, e_nuc, 2 * h_mo.shape[0],
                                     n_elec, 0)
        with open(os.path.join(mdir, tag + ".meta"), "w") as f:
            f.write(f"bond_distance_angstrom = {d:.4f}\n")
            f.write(f"hf_energy = {e_hf:.12f}\n")
            f.write(f"fci_ground_energy = {e_gs:.12f}\n")
            f.write(f"fci_first_excited_energy = {e_es:.12f}\n")
        print(f"{tag}: HF={e_hf:.8f}  FCI={e_gs:.8f}  E_es={e_es:.8f}  "
              f"dim={dim}", flush=True)


def h_chain(n):
    return lambda d: [("H", (0.0, 0.0, i * d)) for i in range(n)]


def lih(d):
    return [("Li", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, d))]


def beh2(d):
    return [("H", (0.0, 0.0, -d)), ("Be", (0.0, 0.0, 0.0)),
            ("H", (0.0, 0.0, d))]


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    generate("h2", h_chain(2), [0.5, 0.7414, 1.0, 1.5, 2.0], 2, outdir)
    generate("h4", h_chain(4),
             [0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 1.0, 1.25, 1.5, 1.75,
              2.0, 2.2, 2.4, 2.6, 2.8, 3.0], 4, outdir)
    generate("lih", lih,
             [0.5, 0.75, 1.0, 1.25, 1.5949, 2.0, 2.5, 3.0, 3.25, 3.5,
              4.0], 4, outdir)
    generate("h6", h_chain(6), [0.5, 0.75, 1.0, 1.5, 2.0], 6, outdir)
    generate("beh2", beh2, [0.9, 1.1, 1.3264, 1.6, 2.0], 6, outdir)


if __name__ == "__main__":
    main()
