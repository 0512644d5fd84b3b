"""Compiled trajectory propagator.

Same equations as the numpy route in ``dynamics``.  Every Runge-Kutta stage
needs only the first and last columns of the Fermi projector, P e_1 and
P e_N.  With sigma anywhere inside the spectral gap that contains the Fermi
level, P = (1 + sign(H - sigma)) / 2, and sign(.) applied to a vector is
evaluated with a Zolotarev rational approximation: one complex tridiagonal
solve per pole, uniformly accurate to ~1e-13 once the gap is bracketed by
Sturm-sequence bisection.  When the gap is too small for the tabulated
approximants the projector comes from a full tridiagonal eigendecomposition
(LAPACK dstemr through scipy's cython_lapack, numpy's eigh as last resort).
"""

from __future__ import annotations

import ctypes

import numpy as np
from numba import njit
from numba.extending import get_cython_function_address
from scipy.special import ellipj, ellipkm1

from .lattice import HBAR
from .leads import DEGENERACY_TOL

STATUS = {0: "ok", 1: "orbital norm grew during a step", 2: "non-finite state",
          3: "projector jump inside a step"}

_P = ctypes.POINTER
_dbl, _int = _P(ctypes.c_double), _P(ctypes.c_int)
_dstemr = ctypes.CFUNCTYPE(
    None, ctypes.c_void_p, ctypes.c_void_p, _int, _dbl, _dbl, _dbl, _dbl, _int, _int, _int,
    _dbl, _dbl, _int, _int, _int, _int, _dbl, _int, _int, _int, _int,
)(get_cython_function_address("scipy.linalg.cython_lapack", "dstemr"))

# Zolotarev approximants of sign(x) on [-1, -l] U [l, 1] for l = 2**-k
ZOLO_KMAX = 8
ZOLO_TOL = 1e-13


def zolotarev_sign(ell: float, r: int):
    """Coefficients of sign(x) ~ M x (1 + sum_j a_j / (x^2 + s_j^2)) on ell <= |x| <= 1.

    Returns ``(M, a, s, err)`` with ``err`` the max deviation on a log grid.
    """
    kp = ellipkm1(ell ** 2)
    sn, cn, _, _ = ellipj(np.arange(1, 2 * r + 1) * kp / (2 * r + 1), 1.0 - ell ** 2)
    c = ell ** 2 * sn ** 2 / cn ** 2
    c_pole, c_zero = c[0::2], c[1::2]
    a = np.array([np.prod(c_zero - c_pole[j]) / np.prod(np.delete(c_pole, j) - c_pole[j])
                  for j in range(r)])
    x = np.geomspace(ell, 1.0, 4001)
    f = x * (1.0 + (a / (x[:, None] ** 2 + c_pole)).sum(axis=1))
    m = 2.0 / (f.max() + f.min())
    return m, a, np.sqrt(c_pole), float(np.abs(m * f - 1.0).max())


def _zolotarev_table():
    rows = []
    for k in range(1, ZOLO_KMAX + 1):
        r = 2
        while True:
            m, a, sh, err = zolotarev_sign(2.0 ** -k, r)
            if err < ZOLO_TOL:
                break
            r += 1
        rows.append((m, a, sh))
    rmax = max(len(a) for _, a, _ in rows)
    n_poles = np.array([len(a) for _, a, _ in rows], dtype=np.int64)
    scale = np.array([m for m, _, _ in rows])
    weights = np.zeros((ZOLO_KMAX, rmax))
    shifts = np.zeros((ZOLO_KMAX, rmax))
    for i, (_, a, sh) in enumerate(rows):
        weights[i, :len(a)] = a
        shifts[i, :len(a)] = sh
    return n_poles, scale, weights, shifts


ZOLO_POLES, ZOLO_SCALE, ZOLO_WEIGHTS, ZOLO_SHIFTS = _zolotarev_table()

# indices into the packed parameter vector
_N, _T0, _ALPHA, _K, _MASS, _A, _ECH, _COUP, _EF, _OCC = range(10)


def pack_params(params, occupancy=2.0) -> np.ndarray:
    return np.array([params.n_sites, params.t0, params.alpha, params.k_spring, params.mass,
                     params.lattice_const, params.e_charge, params.coupling_strength,
                     params.fermi_energy, occupancy], dtype=float)


def allocate_records(n_rec, n_orb, n_levels):
    return (np.zeros(n_rec), np.zeros(n_rec), np.zeros(n_rec), np.zeros(n_rec),
            np.zeros((n_rec, n_orb)), np.zeros((n_rec, max(1, 2 * n_levels))))


@njit
def _eigh_tridiagonal(d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars):
    """All eigenpairs of the symmetric tridiagonal (d, e); rows of z are eigenvectors."""
    n = d.shape[0]
    sd[:] = d
    se[:n - 1] = e
    se[n - 1] = 0.0
    ints[0] = n
    ints[1] = 0
    ints[2] = 0
    ints[3] = 0
    ints[4] = n
    ints[5] = n
    ints[6] = 1
    ints[7] = work.shape[0]
    ints[8] = iwork.shape[0]
    ints[9] = 0
    _dstemr(chars[0:].ctypes.data, chars[1:].ctypes.data, ints[0:].ctypes, sd.ctypes, se.ctypes,
            dbls[0:].ctypes, dbls[1:].ctypes, ints[1:].ctypes, ints[2:].ctypes, ints[3:].ctypes,
            w.ctypes, z.ctypes, ints[4:].ctypes, ints[5:].ctypes, isuppz.ctypes, ints[6:].ctypes,
            work.ctypes, ints[7:].ctypes, iwork.ctypes, ints[8:].ctypes, ints[9:].ctypes)
    if ints[9] != 0 or ints[3] != n:
        h = np.zeros((n, n))
        for i in range(n):
            h[i, i] = d[i]
            if i < n - 1:
                h[i, i + 1] = e[i]
                h[i + 1, i] = e[i]
        ww, vv = np.linalg.eigh(h)
        for g in range(n):
            w[g] = ww[g]
            for i in range(n):
                z[g, i] = vv[i, g]


@njit(cache=True)
def _sturm_count(d, e, x):
    """Number of eigenvalues of the tridiagonal (d, e) below ``x``."""
    n = d.shape[0]
    tiny = 1e-300
    q = d[0] - x
    cnt = 1 if q < 0.0 else 0
    for i in range(1, n):
        if abs(q) < tiny:
            q = -tiny
        q = d[i] - x - e[i - 1] * e[i - 1] / q
        if q < 0.0:
            cnt += 1
    return cnt


@njit(cache=True)
def _gap_around(d, e, thr):
    """Bracket the spectral gap containing ``thr``.

    Returns ``(k, lo, hi, gl, gu)``: k eigenvalues lie below thr, the largest
    of them is <= lo, the smallest of the rest is >= hi, and [gl, gu] holds
    the whole spectrum (Gershgorin).
    """
    n = d.shape[0]
    gl = d[0]
    gu = d[0]
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i < n - 1:
            r += abs(e[i])
        gl = min(gl, d[i] - r)
        gu = max(gu, d[i] + r)
    k = _sturm_count(d, e, thr)
    tol = (gu - gl) * 2.0 ** -10
    lo = thr
    hi = thr
    if 0 < k < n:
        a = gl
        b = thr
        while b - a > tol:
            mid = 0.5 * (a + b)
            if _sturm_count(d, e, mid) >= k:
                b = mid
            else:
                a = mid
        lo = b
        a = thr
        b = gu
        while b - a > tol:
            mid = 0.5 * (a + b)
            if _sturm_count(d, e, mid) >= k + 1:
                b = mid
            else:
                a = mid
        hi = a
    return k, lo, hi, gl, gu


@njit(cache=True)
def _rational_columns(d, e, thr, zp, zs, zw, zh, p1, pn, cd, ys):
    """P e_1 and P e_N by the Zolotarev sign approximation; False if the gap is too small."""
    n = d.shape[0]
    k, lo, hi, gl, gu = _gap_around(d, e, thr)
    if k == 0 or k == n:
        # projector is the identity (nothing below thr) or zero
        for i in range(n):
            p1[i] = 0.0
            pn[i] = 0.0
        if k == 0:
            p1[0] = 1.0
            pn[n - 1] = 1.0
        return True
    half = 0.5 * (hi - lo)
    if not half > 0.0:
        return False
    sigma = 0.5 * (hi + lo)
    kappa = max(gu - sigma, sigma - gl) / half
    idx = 1
    while 2.0 ** idx < kappa:
        idx += 1
    if idx > zp.shape[0]:
        return False
    scale = half * 2.0 ** idx
    row = idx - 1
    inv_scale = 1.0 / scale
    for i in range(n):
        p1[i] = 0.0
        pn[i] = 0.0
    # X e_1 and X e_N with X = (H - sigma) / scale
    p1[0] = (d[0] - sigma) * inv_scale
    p1[1] = e[0] * inv_scale
    pn[n - 1] = (d[n - 1] - sigma) * inv_scale
    pn[n - 2] = e[n - 2] * inv_scale
    for j in range(zp[row]):
        sh = zh[row, j]
        w = zw[row, j]
        # LDL^T of the complex symmetric X - i sh (pivots keep Im <= -sh);
        # cd holds inverse pivots
        cd[0] = 1.0 / complex((d[0] - sigma) * inv_scale, -sh)
        for i in range(1, n):
            off = e[i - 1] * inv_scale
            cd[i] = 1.0 / (complex((d[i] - sigma) * inv_scale, -sh) - off * off * cd[i - 1])
        # rhs e_1: forward elimination fills the whole vector
        ys[0] = 1.0
        for i in range(1, n):
            ys[i] = -(e[i - 1] * inv_scale) * cd[i - 1] * ys[i - 1]
        x_next = ys[n - 1] * cd[n - 1]
        p1[n - 1] += w * x_next.real
        for i in range(n - 2, -1, -1):
            x_next = (ys[i] - (e[i] * inv_scale) * x_next) * cd[i]
            p1[i] += w * x_next.real
        # rhs e_N: forward elimination leaves it unchanged
        x_next = cd[n - 1]
        pn[n - 1] += w * x_next.real
        for i in range(n - 2, -1, -1):
            x_next = -(e[i] * inv_scale) * x_next * cd[i]
            pn[i] += w * x_next.real
    m = zs[row]
    for i in range(n):
        p1[i] *= 0.5 * m
        pn[i] *= 0.5 * m
    p1[0] += 0.5
    pn[n - 1] += 0.5
    return True


def rational_projector_columns(diag, off, threshold):
    """(ok, P e_1, P e_N) from the rational route alone, for checks against eigh."""
    n = len(diag)
    p1, pn = np.zeros(n), np.zeros(n)
    ok = _rational_columns(np.asarray(diag, float), np.asarray(off, float), float(threshold),
                           ZOLO_POLES, ZOLO_SCALE, ZOLO_WEIGHTS, ZOLO_SHIFTS, p1, pn,
                           np.zeros(n, complex), np.zeros(n, complex))
    return ok, p1, pn


def zolotarev_tables():
    return ZOLO_POLES, ZOLO_SCALE, ZOLO_WEIGHTS, ZOLO_SHIFTS


@njit
def _projector_columns(u, field, prm, d, e, w, z, ws_work, ws_iwork, ws_isuppz, sd, se, ints, dbls,
                       chars, p1, pn, zp, zs, zw, zh, cd, ys):
    """Build H(u, E) and the first/last columns of the projector above the Fermi level."""
    n = u.shape[0]
    a = prm[_A]
    for i in range(n):
        x = (i + 1 - 0.5 * (n + 1)) * a + u[i]
        d[i] = prm[_ECH] * field * x
    for i in range(n - 1):
        e[i] = -prm[_T0] + prm[_ALPHA] * (u[i + 1] - u[i])
    thr = prm[_EF] + DEGENERACY_TOL
    if _rational_columns(d, e, thr, zp, zs, zw, zh, p1, pn, cd, ys):
        return
    _eigh_tridiagonal(d, e, w, z, ws_work, ws_iwork, ws_isuppz, sd, se, ints, dbls, chars)
    for i in range(n):
        p1[i] = 0.0
        pn[i] = 0.0
    for g in range(n):
        if w[g] > thr:
            c1 = z[g, 0]
            cn = z[g, n - 1]
            for i in range(n):
                zi = z[g, i]
                p1[i] += zi * c1
                pn[i] += zi * cn


@njit(cache=True)
def _derivatives(u, p, psi, field, switch, prm, d, e, p1, pn, du, dp, dpsi, dq):
    n, m = psi.shape
    coup = prm[_COUP] * switch
    occ = prm[_OCC]
    ih = 1.0 / HBAR
    jl = 0.0
    jr = 0.0
    for j in range(m):
        a1 = 0.0j
        an = 0.0j
        for i in range(n):
            a1 += p1[i] * psi[i, j]
            an += pn[i] * psi[i, j]
        jl += a1.real * a1.real + a1.imag * a1.imag
        jr += an.real * an.real + an.imag * an.imag
        for i in range(n):
            hp = d[i] * psi[i, j]
            if i > 0:
                hp += e[i - 1] * psi[i - 1, j]
            if i < n - 1:
                hp += e[i] * psi[i + 1, j]
            gp = p1[i] * a1 + pn[i] * an
            # -i/hbar (H psi - i c Gamma psi)
            dpsi[i, j] = complex(hp.imag * ih, -hp.real * ih) - coup * ih * gp
    dq[0] = 2.0 * coup * ih * occ * jl
    dq[1] = 2.0 * coup * ih * occ * jr

    du[0] = 0.0
    du[n - 1] = 0.0
    dp[0] = 0.0
    dp[n - 1] = 0.0
    mass = prm[_MASS]
    kk = prm[_K]
    al = prm[_ALPHA]
    fe = prm[_ECH] * field
    prev_bond = 0.0
    for i in range(n - 1):
        bond = 0.0
        for j in range(m):
            bond += psi[i, j].real * psi[i + 1, j].real + psi[i, j].imag * psi[i + 1, j].imag
        bond *= occ
        if i > 0:
            dens = 0.0
            for j in range(m):
                dens += psi[i, j].real * psi[i, j].real + psi[i, j].imag * psi[i, j].imag
            dens *= occ
            dp[i] = (-kk * (2.0 * u[i] - u[i + 1] - u[i - 1]) + 2.0 * al * (bond - prev_bond)
                     - fe * (dens - 1.0))
            du[i] = p[i] / mass
        prev_bond = bond


@njit
def workspace(n, m, n_stages):
    """Scratch arrays shared by every stage evaluation of one trajectory."""
    return (np.zeros(n), np.zeros(max(n - 1, 1)), np.zeros(n), np.zeros((n, n)), np.zeros(18 * n),
            np.zeros(10 * n, dtype=np.int32), np.zeros(2 * n, dtype=np.int32), np.zeros(n), np.zeros(n),
            np.zeros(10, dtype=np.int32), np.zeros(2), np.array([86, 65], dtype=np.uint8),
            np.zeros((n_stages, n)), np.zeros((n_stages, n)), np.zeros(n, dtype=np.complex128),
            np.zeros(n, dtype=np.complex128),
            np.zeros((n_stages, n)), np.zeros((n_stages, n)), np.zeros((n_stages, n, m), dtype=np.complex128),
            np.zeros((n_stages, 2)), np.zeros(n), np.zeros(n), np.zeros((n, m), dtype=np.complex128))


@njit
def _observe(u, p, psi, field, switch, prm, ws, zp, zs, zw, zh, out_dq):
    d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars, p1s, pns, cd, ys = ws[:16]
    du, dp, dpsi = ws[20], ws[21], ws[22]
    _projector_columns(u, field, prm, d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars,
                       p1s[0], pns[0], zp, zs, zw, zh, cd, ys)
    _derivatives(u, p, psi, field, switch, prm, d, e, p1s[0], pns[0], du, dp, dpsi, out_dq)


@njit
def rk_step(u, p, psi, q, prm, fields, switches, rk_a, rk_b, rk_c, h, ws, zp, zs, zw, zh):
    """One explicit Runge-Kutta step of length ``h`` in place.

    ``fields``/``switches`` hold the drive at the stage times.  Returns the
    largest deviation of P e_1 or P e_N at any stage from the straight line
    between the c=0 and c=1 stages: O(h^2) for a smooth projector, about
    half the jump or more when the projector jumps inside the step.
    """
    n, m = psi.shape
    n_stages = fields.shape[0]
    d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars, p1s, pns, cd, ys = ws[:16]
    ku, kp, kpsi, kq, su, sp, spsi = ws[16], ws[17], ws[18], ws[19], ws[20], ws[21], ws[22]
    jump = 0.0
    for st in range(n_stages):
        for i in range(n):
            su[i] = u[i]
            sp[i] = p[i]
            for j in range(m):
                spsi[i, j] = psi[i, j]
        for prev in range(st):
            c = h * rk_a[st, prev]
            if c == 0.0:
                continue
            for i in range(n):
                su[i] += c * ku[prev, i]
                sp[i] += c * kp[prev, i]
                for j in range(m):
                    spsi[i, j] += c * kpsi[prev, i, j]
        f = fields[st]
        _projector_columns(su, f, prm, d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls,
                           chars, p1s[st], pns[st], zp, zs, zw, zh, cd, ys)
        _derivatives(su, sp, spsi, f, switches[st], prm, d, e, p1s[st], pns[st],
                     ku[st], kp[st], kpsi[st], kq[st])
    first = 0
    last = 0
    for st in range(n_stages):
        if rk_c[st] < rk_c[first]:
            first = st
        if rk_c[st] > rk_c[last]:
            last = st
    span = rk_c[last] - rk_c[first]
    for st in range(n_stages):
        x = (rk_c[st] - rk_c[first]) / span
        for i in range(n):
            lin1 = (1.0 - x) * p1s[first, i] + x * p1s[last, i]
            linn = (1.0 - x) * pns[first, i] + x * pns[last, i]
            jump = max(jump, abs(p1s[st, i] - lin1), abs(pns[st, i] - linn))
    for st in range(n_stages):
        c = h * rk_b[st]
        if c == 0.0:
            continue
        for i in range(n):
            u[i] += c * ku[st, i]
            p[i] += c * kp[st, i]
            for j in range(m):
                psi[i, j] += c * kpsi[st, i, j]
        q[0] += c * kq[st, 0]
        q[1] += c * kq[st, 1]
    u[0] = 0.0
    u[n - 1] = 0.0
    p[0] = 0.0
    p[n - 1] = 0.0
    return jump


@njit
def column_norms(psi, out):
    n, m = psi.shape
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += psi[i, j].real ** 2 + psi[i, j].imag ** 2
        out[j] = s


@njit
def propagate(u, p, psi, q, prm, stage_field, stage_switch, rec_field, rec_switch, rk_a, rk_b, dt,
              rk_c, every, growth_tol, jump_tol, n_levels, k_start, r_start, rec_jl, rec_jr, rec_ql,
              rec_qr, rec_norm, rec_levels, zp, zs, zw, zh):
    """Advance (u, p, psi, q) in place from step ``k_start`` to ``stage_field.shape[0]``.

    Observables are stored whenever the step index is a multiple of
    ``every``, starting at record slot ``r_start``.  Returns
    ``(status, step, record_slot)``: status 0 on completion, 1 when a norm
    grew, 2 on a non-finite state, and 3 when the projector jumped inside
    ``step``; in that last case the state is left at the start of ``step``.
    """
    n, m = psi.shape
    n_steps, n_stages = stage_field.shape
    ws = workspace(n, m, n_stages)
    d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars, p1s, pns, cd, ys = ws[:16]
    tmp_dq = np.zeros(2)
    save_u = np.zeros(n)
    save_p = np.zeros(n)
    save_psi = np.zeros((n, m), dtype=np.complex128)
    save_q = np.zeros(2)
    norms_prev = np.zeros(m)
    norms_now = np.zeros(m)
    column_norms(psi, norms_prev)

    r = r_start
    for k in range(k_start, n_steps + 1):
        if k % every == 0:
            _observe(u, p, psi, rec_field[r], rec_switch[r], prm, ws, zp, zs, zw, zh, tmp_dq)
            rec_jl[r] = tmp_dq[0]
            rec_jr[r] = tmp_dq[1]
            rec_ql[r] = q[0]
            rec_qr[r] = q[1]
            for j in range(m):
                rec_norm[r, j] = norms_prev[j]
            if n_levels > 0:
                _eigh_tridiagonal(d, e, w, z, work, iwork, isuppz, sd, se, ints, dbls, chars)
                half = n // 2
                for l in range(2 * n_levels):
                    rec_levels[r, l] = w[half - n_levels + l]
            r += 1
        if k == n_steps:
            break
        save_u[:] = u
        save_p[:] = p
        save_psi[:, :] = psi
        save_q[:] = q
        jump = rk_step(u, p, psi, q, prm, stage_field[k], stage_switch[k], rk_a, rk_b, rk_c, dt, ws,
                       zp, zs, zw, zh)
        if jump > jump_tol:
            u[:] = save_u
            p[:] = save_p
            psi[:, :] = save_psi
            q[:] = save_q
            return 3, k, r
        column_norms(psi, norms_now)
        for j in range(m):
            if not np.isfinite(norms_now[j]):
                return 2, k, r
            if norms_now[j] - norms_prev[j] > growth_tol:
                return 1, k, r
            norms_prev[j] = norms_now[j]
    return 0, n_steps, r


def single_step(u, p, psi, q, prm, fields, switches, rk_a, rk_b, rk_c, h):
    """Python entry to ``rk_step`` with a fresh workspace; returns the jump measure."""
    ws = workspace(psi.shape[0], psi.shape[1], fields.shape[0])
    return rk_step(u, p, psi, q, prm, fields, switches, rk_a, rk_b, rk_c, h, ws, *zolotarev_tables())
