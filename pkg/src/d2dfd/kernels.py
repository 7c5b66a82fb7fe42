"""Hot numeric kernels with a numba path and a pure-numpy path.

Both implementations of every kernel are importable (``*_nb`` / ``*_np``);
the unsuffixed names are bound to whichever backend ``_accel.BACKEND``
selected. The two paths agree to rounding (summation order differs).
"""

import math

import numpy as np

from ._accel import BACKEND, njit

__all__ = ["BACKEND", "betainc", "d2d_drop", "power_sum", "CELLULAR", "HD_RX", "HD_TX", "FD"]

CELLULAR, HD_RX, HD_TX, FD = 0, 1, 2, 3

_MAXIT = 400
_EPS = 1e-16
_FPMIN = 1e-300


# --- regularized incomplete beta -------------------------------------------

@njit
def _betacf_nb(a, b, x):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            break
    return h


@njit
def _betainc_scalar_nb(x, a, b):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    lbt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
           + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(lbt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf_nb(a, b, x) / a
    return 1.0 - bt * _betacf_nb(b, a, 1.0 - x) / b


@njit
def _betainc_flat_nb(x, a, b, out):
    for i in range(x.shape[0]):
        out[i] = _betainc_scalar_nb(x[i], a[i], b[i])
    return out


def betainc_nb(x, a, b):
    x, a, b = np.broadcast_arrays(np.asarray(x, float), np.asarray(a, float), np.asarray(b, float))
    shape = x.shape
    # broadcast views are read-only; numba wants owned buffers
    xf, af, bf = (np.array(v, dtype=float).ravel() for v in (x, a, b))
    out = _betainc_flat_nb(xf, af, bf, np.empty(xf.shape[0]))
    return out.reshape(shape)


_lgamma_np = np.vectorize(math.lgamma, otypes=[float])


def _betacf_np(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for m in range(1, _MAXIT + 1):
        if not active.any():
            break
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d1 = 1.0 + aa * d
        d1 = np.where(np.abs(d1) < _FPMIN, _FPMIN, d1)
        c1 = 1.0 + aa / c
        c1 = np.where(np.abs(c1) < _FPMIN, _FPMIN, c1)
        d1 = 1.0 / d1
        h1 = h * d1 * c1
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d2 = 1.0 + aa * d1
        d2 = np.where(np.abs(d2) < _FPMIN, _FPMIN, d2)
        c2 = 1.0 + aa / c1
        c2 = np.where(np.abs(c2) < _FPMIN, _FPMIN, c2)
        d2 = 1.0 / d2
        step = d2 * c2
        h = np.where(active, h1 * step, h)
        c = np.where(active, c2, c)
        d = np.where(active, d2, d)
        active &= ~(np.abs(step - 1.0) < _EPS)
    return h


def betainc_np(x, a, b):
    x, a, b = np.broadcast_arrays(np.asarray(x, float), np.asarray(a, float), np.asarray(b, float))
    out = np.empty(x.shape)
    lo = x <= 0.0
    hi = x >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    if mid.any():
        xm, am, bm = x[mid], a[mid], b[mid]
        lbt = (_lgamma_np(am + bm) - _lgamma_np(am) - _lgamma_np(bm)
               + am * np.log(xm) + bm * np.log1p(-xm))
        bt = np.exp(lbt)
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        # evaluate the fraction on whichever side converges quickly
        aa = np.where(direct, am, bm)
        bb = np.where(direct, bm, am)
        xx = np.where(direct, xm, 1.0 - xm)
        cf = _betacf_np(aa, bb, xx)
        out[mid] = np.where(direct, bt * cf / am, 1.0 - bt * cf / bm)
    return out


# --- Monte Carlo geometry ----------------------------------------------------

@njit
def power_sum_nb(r2, h, alpha):
    half = 0.5 * alpha
    acc = 0.0
    for i in range(r2.shape[0]):
        acc += h[i] * r2[i] ** (-half)
    return acc


def power_sum_np(r2, h, alpha):
    return float(np.sum(h * r2 ** (-0.5 * alpha)))


@njit
def d2d_drop_nb(ue_xy, bs_xy, h_assoc, u_duplex, u_tx, h_int, c_assoc, alpha, p_fd,
                typical_fd, n):
    n_ue = ue_xy.shape[0]
    n_bs = bs_xy.shape[0]
    half = 0.5 * alpha
    cls = np.empty(n_ue, np.int8)
    r2 = np.empty(n_ue)
    for i in range(n_ue):
        x = ue_xy[i, 0]
        y = ue_xy[i, 1]
        r2[i] = x * x + y * y
        dmin = np.inf
        for j in range(n_bs):
            dx = x - bs_xy[j, 0]
            dy = y - bs_xy[j, 1]
            dd = dx * dx + dy * dy
            if dd < dmin:
                dmin = dd
        if c_assoc == 0.0:
            cellular = True
        elif c_assoc == np.inf or dmin == np.inf:
            cellular = False
        else:
            cellular = h_assoc[i] > c_assoc * dmin ** half
        if cellular:
            cls[i] = CELLULAR
        elif u_duplex[i] < p_fd:
            cls[i] = FD
        elif u_tx[i] < 0.5:
            cls[i] = HD_TX
        else:
            cls[i] = HD_RX
    want = FD if typical_fd else HD_TX
    m = 0
    for i in range(n_ue):
        if cls[i] == want:
            m += 1
    if m < n:
        return np.nan, 0.0, 0.0, m
    idx = np.empty(m, np.int64)
    dist = np.empty(m)
    j = 0
    for i in range(n_ue):
        if cls[i] == want:
            idx[j] = i
            dist[j] = r2[i]
            j += 1
    order = np.argsort(dist, kind="mergesort")
    partner = idx[order[n - 1]]
    i_hd = 0.0
    i_fd = 0.0
    for i in range(n_ue):
        if i == partner:
            continue
        if cls[i] == HD_TX:
            i_hd += h_int[i] * r2[i] ** (-half)
        elif cls[i] == FD:
            i_fd += h_int[i] * r2[i] ** (-half)
    return math.sqrt(r2[partner]), i_hd, i_fd, m


def d2d_drop_np(ue_xy, bs_xy, h_assoc, u_duplex, u_tx, h_int, c_assoc, alpha, p_fd,
                typical_fd, n):
    half = 0.5 * alpha
    r2 = np.einsum("ij,ij->i", ue_xy, ue_xy)
    if bs_xy.shape[0]:
        diff = ue_xy[:, None, :] - bs_xy[None, :, :]
        dmin = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    else:
        dmin = np.full(ue_xy.shape[0], np.inf)
    if c_assoc == 0.0:
        cellular = np.ones(r2.shape, dtype=bool)
    elif c_assoc == np.inf:
        cellular = np.zeros(r2.shape, dtype=bool)
    else:
        with np.errstate(invalid="ignore"):
            cellular = np.isfinite(dmin) & (h_assoc > c_assoc * dmin ** half)
    cls = np.where(cellular, CELLULAR,
                   np.where(u_duplex < p_fd, FD, np.where(u_tx < 0.5, HD_TX, HD_RX)))
    want = FD if typical_fd else HD_TX
    elig = np.flatnonzero(cls == want)
    m = elig.size
    if m < n:
        return np.nan, 0.0, 0.0, m
    order = np.argsort(r2[elig], kind="mergesort")
    partner = elig[order[n - 1]]
    contrib = h_int * r2 ** (-half)
    contrib[partner] = 0.0
    i_hd = float(np.sum(np.where(cls == HD_TX, contrib, 0.0)))
    i_fd = float(np.sum(np.where(cls == FD, contrib, 0.0)))
    return math.sqrt(r2[partner]), i_hd, i_fd, m


if BACKEND == "numba":
    betainc = betainc_nb
    d2d_drop = d2d_drop_nb
    power_sum = power_sum_nb
else:
    betainc = betainc_np
    d2d_drop = d2d_drop_np
    power_sum = power_sum_np
