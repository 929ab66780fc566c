#!/usr/bin/env python3
"""Generate the molecular FCIDUMP fixtures shipped under fixtures/.

Self-contained Gaussian integral engine (McMurchie-Davidson recursions for
s/p shells), restricted Hartree-Fock, MO transformation, optional frozen-core
active space, FCIDUMP writer.  Run from the repository root:

    python3 scripts/make_fixtures.py

The package itself never generates integrals; it only reads these files.
"""

import os
import sys
from math import erf, exp, pi, sqrt

import numpy as np

ANGSTROM = 1.8897259886

# STO-3G universal least-squares expansions (zeta = 1), scaled by zeta^2.
_STO3G_1S_A = (2.227660584, 0.405771156, 0.109818036)
_STO3G_1S_D = (0.154328967, 0.535328142, 0.444634542)
_STO3G_2SP_A = (0.994203122, 0.231031409, 0.075138600)
_STO3G_2S_D = (-0.099967229, 0.399512826, 0.700115469)
_STO3G_2P_D = (0.155916275, 0.607683719, 0.391957393)


def _scaled(alphas, zeta):
    return [a * zeta * zeta for a in alphas]


STO3G_H = [("s", _scaled(_STO3G_1S_A, 1.24), list(_STO3G_1S_D))]
STO3G_F = [("s", _scaled(_STO3G_1S_A, 8.65), list(_STO3G_1S_D)),
           ("sp", _scaled(_STO3G_2SP_A, 2.55),
            (list(_STO3G_2S_D), list(_STO3G_2P_D)))]

# this repo's own split-valence double-zeta sets: the STO-3G valence
# contraction is split into an inner part (two tight primitives, original
# relative weights) and the free outermost primitive (3-21G-style pattern;
# contracted AOs are renormalized downstream)
def _split_valence(alphas, coefs):
    return (list(alphas[:2]), list(coefs[:2])), ([alphas[2]], [1.0])

_H_IN, _H_OUT = _split_valence(_scaled(_STO3G_1S_A, 1.24), _STO3G_1S_D)
DZ_H = [("s",) + _H_IN, ("s",) + _H_OUT]
_F2S_IN, _F2S_OUT = _split_valence(_scaled(_STO3G_2SP_A, 2.55), _STO3G_2S_D)
_F2P_IN, _F2P_OUT = _split_valence(_scaled(_STO3G_2SP_A, 2.55), _STO3G_2P_D)
DZ_F = [("s", _scaled(_STO3G_1S_A, 8.65), list(_STO3G_1S_D)),
        ("sp", _F2S_IN[0], (_F2S_IN[1], _F2P_IN[1])),
        ("sp", _F2S_OUT[0], (_F2S_OUT[1], _F2P_OUT[1]))]


class Primitive:
    __slots__ = ("alpha", "coef", "lmn", "center")

    def __init__(self, alpha, coef, lmn, center):
        self.alpha = alpha
        self.coef = coef
        self.lmn = lmn
        self.center = np.asarray(center, float)


def prim_norm(alpha, lmn):
    l, m, n = lmn
    def dfact(k):
        out = 1
        while k > 1:
            out *= k
            k -= 2
        return out
    num = (2 * alpha / pi) ** 0.75 * (4 * alpha) ** ((l + m + n) / 2.0)
    den = sqrt(dfact(2 * l - 1) * dfact(2 * m - 1) * dfact(2 * n - 1))
    return num / den


def build_basis(atoms, basis_map):
    """atoms: list of (symbol, Z, xyz in bohr). Returns list of contracted AOs."""
    aos = []
    for sym, _z, xyz in atoms:
        for shell in basis_map[sym]:
            kind, exps = shell[0], shell[1]
            if kind == "s":
                coefs = shell[2]
                aos.append([Primitive(a, c * prim_norm(a, (0, 0, 0)), (0, 0, 0), xyz)
                            for a, c in zip(exps, coefs)])
            elif kind == "sp":
                scoef, pcoef = shell[2]
                aos.append([Primitive(a, c * prim_norm(a, (0, 0, 0)), (0, 0, 0), xyz)
                            for a, c in zip(exps, scoef)])
                for lmn in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
                    aos.append([Primitive(a, c * prim_norm(a, lmn), lmn, xyz)
                                for a, c in zip(exps, pcoef)])
            else:
                raise ValueError(kind)
    return aos


def hermite_e(i, j, t, qx, a, b):
    """Hermite expansion coefficient E_t^{ij} (1D)."""
    p = a + b
    q = a * b / p
    if t < 0 or t > i + j:
        return 0.0
    if i == j == t == 0:
        return exp(-q * qx * qx)
    if j == 0:
        return (hermite_e(i - 1, j, t - 1, qx, a, b) / (2 * p)
                - q * qx / a * hermite_e(i - 1, j, t, qx, a, b)
                + (t + 1) * hermite_e(i - 1, j, t + 1, qx, a, b))
    return (hermite_e(i, j - 1, t - 1, qx, a, b) / (2 * p)
            + q * qx / b * hermite_e(i, j - 1, t, qx, a, b)
            + (t + 1) * hermite_e(i, j - 1, t + 1, qx, a, b))


def boys(n, x):
    from scipy.special import hyp1f1
    return float(hyp1f1(n + 0.5, n + 1.5, -x)) / (2 * n + 1)


def hermite_r(t, u, v, n, p, pc):
    if t < 0 or u < 0 or v < 0:
        return 0.0
    if t == u == v == 0:
        return (-2 * p) ** n * boys(n, p * float(pc @ pc))
    if t > 0:
        return ((t - 1) * hermite_r(t - 2, u, v, n + 1, p, pc)
                + pc[0] * hermite_r(t - 1, u, v, n + 1, p, pc))
    if u > 0:
        return ((u - 1) * hermite_r(t, u - 2, v, n + 1, p, pc)
                + pc[1] * hermite_r(t, u - 1, v, n + 1, p, pc))
    return ((v - 1) * hermite_r(t, u, v - 2, n + 1, p, pc)
            + pc[2] * hermite_r(t, u, v - 1, n + 1, p, pc))


def prim_overlap(pa, pb):
    a, b = pa.alpha, pb.alpha
    s = 1.0
    for d in range(3):
        qx = pa.center[d] - pb.center[d]
        s *= hermite_e(pa.lmn[d], pb.lmn[d], 0, qx, a, b)
    return s * (pi / (a + b)) ** 1.5


def prim_kinetic(pa, pb):
    a, b = pa.alpha, pb.alpha
    p = a + b
    dims = []
    for d in range(3):
        qx = pa.center[d] - pb.center[d]
        i, j = pa.lmn[d], pb.lmn[d]
        s0 = hermite_e(i, j, 0, qx, a, b)
        s_p2 = hermite_e(i, j + 2, 0, qx, a, b)
        s_m2 = hermite_e(i, j - 2, 0, qx, a, b) if j >= 2 else 0.0
        tk = -2.0 * b * b * s_p2 + b * (2 * j + 1) * s0 - 0.5 * j * (j - 1) * s_m2
        dims.append((s0, tk))
    pref = (pi / p) ** 1.5
    (sx, tx), (sy, ty), (sz, tz) = dims
    return pref * (tx * sy * sz + sx * ty * sz + sx * sy * tz)


def prim_nuclear(pa, pb, zc, c):
    a, b = pa.alpha, pb.alpha
    p = a + b
    pctr = (a * pa.center + b * pb.center) / p
    pc = pctr - np.asarray(c, float)
    val = 0.0
    for t in range(pa.lmn[0] + pb.lmn[0] + 1):
        ex = hermite_e(pa.lmn[0], pb.lmn[0], t, pa.center[0] - pb.center[0], a, b)
        if ex == 0.0:
            continue
        for u in range(pa.lmn[1] + pb.lmn[1] + 1):
            ey = hermite_e(pa.lmn[1], pb.lmn[1], u, pa.center[1] - pb.center[1], a, b)
            if ey == 0.0:
                continue
            for v in range(pa.lmn[2] + pb.lmn[2] + 1):
                ez = hermite_e(pa.lmn[2], pb.lmn[2], v, pa.center[2] - pb.center[2], a, b)
                if ez == 0.0:
                    continue
                val += ex * ey * ez * hermite_r(t, u, v, 0, p, pc)
    return -zc * 2 * pi / p * val


def prim_eri(pa, pb, pc, pd):
    a, b, c, d = pa.alpha, pb.alpha, pc.alpha, pd.alpha
    p, q = a + b, c + d
    pp = (a * pa.center + b * pb.center) / p
    qq = (c * pc.center + d * pd.center) / q
    alpha = p * q / (p + q)
    pq = pp - qq
    e1 = {}
    for t in range(pa.lmn[0] + pb.lmn[0] + 1):
        for u in range(pa.lmn[1] + pb.lmn[1] + 1):
            for v in range(pa.lmn[2] + pb.lmn[2] + 1):
                val = (hermite_e(pa.lmn[0], pb.lmn[0], t, pa.center[0] - pb.center[0], a, b)
                       * hermite_e(pa.lmn[1], pb.lmn[1], u, pa.center[1] - pb.center[1], a, b)
                       * hermite_e(pa.lmn[2], pb.lmn[2], v, pa.center[2] - pb.center[2], a, b))
                if val != 0.0:
                    e1[(t, u, v)] = val
    e2 = {}
    for t in range(pc.lmn[0] + pd.lmn[0] + 1):
        for u in range(pc.lmn[1] + pd.lmn[1] + 1):
            for v in range(pc.lmn[2] + pd.lmn[2] + 1):
                val = (hermite_e(pc.lmn[0], pd.lmn[0], t, pc.center[0] - pd.center[0], c, d)
                       * hermite_e(pc.lmn[1], pd.lmn[1], u, pc.center[1] - pd.center[1], c, d)
                       * hermite_e(pc.lmn[2], pd.lmn[2], v, pc.center[2] - pd.center[2], c, d))
                if val != 0.0:
                    e2[(t, u, v)] = val
    val = 0.0
    for (t, u, v), ea in e1.items():
        for (tt, uu, vv), eb in e2.items():
            val += ea * eb * (-1) ** (tt + uu + vv) * hermite_r(
                t + tt, u + uu, v + vv, 0, alpha, pq)
    return val * 2 * pi ** 2.5 / (p * q * sqrt(p + q))


def contracted(fn, *aos):
    out = 0.0
    for prims in _prim_product(aos):
        coef = 1.0
        for pr in prims:
            coef *= pr.coef
        out += coef * fn(*prims)
    return out


def _prim_product(aos):
    if len(aos) == 1:
        for p in aos[0]:
            yield (p,)
    else:
        for p in aos[0]:
            for rest in _prim_product(aos[1:]):
                yield (p,) + rest


def integrals(atoms, basis_map):
    aos = build_basis(atoms, basis_map)
    n = len(aos)
    s = np.empty((n, n)); tmat = np.empty((n, n)); vmat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s[i, j] = s[j, i] = contracted(prim_overlap, aos[i], aos[j])
            tmat[i, j] = tmat[j, i] = contracted(prim_kinetic, aos[i], aos[j])
            v = 0.0
            for sym, z, xyz in atoms:
                v += contracted(lambda pa, pb: prim_nuclear(pa, pb, z, xyz),
                                aos[i], aos[j])
            vmat[i, j] = vmat[j, i] = v
    # normalize contractions
    norm = 1.0 / np.sqrt(np.diag(s))
    s *= np.outer(norm, norm); tmat *= np.outer(norm, norm); vmat *= np.outer(norm, norm)
    eri = np.zeros((n, n, n, n))
    pair = [(i, j) for i in range(n) for j in range(i + 1)]
    for ij, (i, j) in enumerate(pair):
        for kl in range(ij + 1):
            k, l = pair[kl]
            val = contracted(prim_eri, aos[i], aos[j], aos[k], aos[l])
            val *= norm[i] * norm[j] * norm[k] * norm[l]
            for (a, b) in ((i, j), (j, i)):
                for (c, d) in ((k, l), (l, k)):
                    eri[a, b, c, d] = eri[c, d, a, b] = val
    e_nuc = 0.0
    for x in range(len(atoms)):
        for y in range(x):
            rz = np.linalg.norm(np.asarray(atoms[x][2]) - np.asarray(atoms[y][2]))
            e_nuc += atoms[x][1] * atoms[y][1] / rz
    return s, tmat + vmat, eri, e_nuc


def rhf(s, hcore, eri, n_occ, e_nuc, max_iter=500, tol=1e-11):
    n = s.shape[0]
    w, u = np.linalg.eigh(s)
    x = u @ np.diag(w ** -0.5) @ u.T
    f = hcore.copy()
    dm = np.zeros_like(s)
    energy = 0.0
    errs, focks = [], []
    for it in range(max_iter):
        fp = x.T @ f @ x
        eps, cp = np.linalg.eigh(fp)
        c = x @ cp
        cocc = c[:, :n_occ]
        dm_new = 2.0 * cocc @ cocc.T
        dm = dm_new if it < 2 else 0.7 * dm_new + 0.3 * dm
        j = np.einsum("pqrs,rs->pq", eri, dm, optimize=True)
        k = np.einsum("prqs,rs->pq", eri, dm, optimize=True)
        f_new = hcore + j - 0.5 * k
        err = f_new @ dm @ s - s @ dm @ f_new
        errs.append(err.ravel()); focks.append(f_new.copy())
        if len(errs) > 8:
            errs.pop(0); focks.pop(0)
        if len(errs) >= 2:
            kd = len(errs)
            bmat = -np.ones((kd + 1, kd + 1)); bmat[kd, kd] = 0.0
            for a in range(kd):
                for b in range(kd):
                    bmat[a, b] = errs[a] @ errs[b]
            rhs = np.zeros(kd + 1); rhs[kd] = -1.0
            try:
                cs = np.linalg.solve(bmat, rhs)[:kd]
                f = sum(ci * fi for ci, fi in zip(cs, focks))
            except np.linalg.LinAlgError:
                f = f_new
        else:
            f = f_new
        e_new = 0.5 * np.einsum("pq,pq->", dm, hcore + f_new) + e_nuc
        if abs(e_new - energy) < tol and np.abs(err).max() < 1e-8:
            energy = e_new
            break
        energy = e_new
    fp = x.T @ f @ x
    eps, cp = np.linalg.eigh(fp)
    c = x @ cp
    return energy, eps, c


def mo_transform(hcore, eri, c):
    h = c.T @ hcore @ c
    g = np.einsum("pi,qj,pqrs,rk,sl->ijkl", c, c, eri, c, c, optimize=True)
    return h, g


def active_space(h, g, core_energy, n_freeze, n_active):
    """Frozen-core reduction: effective one-body + core energy."""
    core = list(range(n_freeze))
    act = list(range(n_freeze, n_freeze + n_active))
    e_core = core_energy
    for c in core:
        e_core += 2 * h[c, c]
        for d in core:
            e_core += 2 * g[c, c, d, d] - g[c, d, d, c]
    heff = np.zeros((n_active, n_active))
    for i, p in enumerate(act):
        for j, q in enumerate(act):
            val = h[p, q]
            for c in core:
                val += 2 * g[p, q, c, c] - g[p, c, c, q]
            heff[i, j] = val
    geff = g[np.ix_(act, act, act, act)]
    return e_core, heff, geff


def write_fcidump(path, norb, nelec, ms2, h, g, core):
    lines = [f" &FCI NORB={norb},NELEC={nelec},MS2={ms2},",
             f"  ORBSYM={'1,' * norb}", "  ISYM=1,", " &END"]
    for p in range(norb):
        for q in range(p + 1):
            ij = p * (p + 1) // 2 + q
            for r in range(norb):
                for s_ in range(r + 1):
                    if ij < r * (r + 1) // 2 + s_:
                        continue
                    val = g[p, q, r, s_]
                    if abs(val) > 1e-14:
                        lines.append(f" {val:.16g} {p + 1} {q + 1} {r + 1} {s_ + 1}")
    for p in range(norb):
        for q in range(p + 1):
            if abs(h[p, q]) > 1e-14:
                lines.append(f" {h[p, q]:.16g} {p + 1} {q + 1} 0 0")
    lines.append(f" {core:.16g} 0 0 0 0")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"  wrote {path}")


def h_chain(n, spacing_ang=1.5):
    d = spacing_ang * ANGSTROM
    return [("H", 1.0, (0.0, 0.0, k * d)) for k in range(n)]


def make_h_systems(outdir):
    for n, name in ((2, "h2_sto3g"), (4, "h4_1d_sto3g"), (6, "h6_1d_sto3g"),
                    (8, "h8_1d_sto3g")):
        atoms = (h_chain(2, 0.7414) if n == 2 else h_chain(n, 1.5))
        s, hcore, eri, e_nuc = integrals(atoms, {"H": STO3G_H})
        e_scf, eps, c = rhf(s, hcore, eri, n // 2, e_nuc)
        h, g = mo_transform(hcore, eri, c)
        print(f"H{n}: E_RHF = {e_scf:.8f}")
        write_fcidump(os.path.join(outdir, f"{name}.fcidump"), len(eps), n, 0, h, g, e_nuc)


def make_hf_molecule(outdir, distances=(0.9, 1.2, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)):
    basis = {"H": DZ_H, "F": DZ_F}
    for r in distances:
        atoms = [("F", 9.0, (0.0, 0.0, 0.0)), ("H", 1.0, (0.0, 0.0, r * ANGSTROM))]
        s, hcore, eri, e_nuc = integrals(atoms, basis)
        e_scf, eps, c = rhf(s, hcore, eri, 5, e_nuc)
        h, g = mo_transform(hcore, eri, c)
        core, heff, geff = active_space(h, g, e_nuc, n_freeze=2, n_active=6)
        print(f"HF r={r:.2f} A: E_RHF = {e_scf:.8f} (n_ao={s.shape[0]})")
        write_fcidump(os.path.join(outdir, f"hf_dz_6o6e_r{r:.2f}.fcidump"),
                      6, 6, 0, heff, geff, core)


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "fixtures"
    os.makedirs(outdir, exist_ok=True)
    make_h_systems(outdir)
    make_hf_molecule(outdir)


if __name__ == "__main__":
    main()
