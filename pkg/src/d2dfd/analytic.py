"""Analytic engine: association, distance laws, coverage, interference
Laplace transforms, average rates and sum throughput.

Coverage and rate functions integrate with the adaptive rules in
:mod:`d2dfd.special`; the alpha = 4 closed forms are kept as separate
convenience paths and are never used internally.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import erfcx

from .model import Densities, GeneralLaplaceParams, Scenario, derive_densities
from .special import (
    DEFAULT_SPEC,
    QuadratureSpec,
    QuadResult,
    full_power_integral,
    gamma_fn,
    interference_integral_L,
    lower_power_integral,
    probability_integral,
    quad_finite,
    quad_semi_infinite,
    reg_incomplete_beta,
)

__all__ = [
    "ConvergenceWarning",
    "CoverageQuery",
    "RateResult",
    "Throughput",
    "association_probability",
    "association_probability_closed_alpha4",
    "nearest_bs_pdf",
    "nth_neighbor_pdf",
    "nth_neighbor_mean",
    "serving_bs_distance_pdf",
    "cellular_coverage",
    "cellular_coverage_closed_alpha4",
    "cellular_rate",
    "laplace_nearest",
    "laplace_nearest_closed_alpha4",
    "laplace_fd_on_hd",
    "laplace_hd_on_fd",
    "laplace_general_nth",
    "matched_laplace_params",
    "d2d_coverage",
    "d2d_rate",
    "coverage",
    "sum_throughput",
]

Mode = Literal["cellular", "hd", "fd"]
MODES = ("cellular", "hd", "fd")

# t beyond this makes e^t - 1 overflow; every rate integrand is exactly 0 there
_T_MAX = 700.0


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class CoverageQuery:
    beta: float
    mode: Mode

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta > 0 violated (got {self.beta!r})")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class RateResult:
    rate_nats: float
    quadrature_error: float
    converged: bool = True


@dataclass(frozen=True)
class Throughput:
    """Sum throughput ``total = cellular + d2d`` in nats/s/Hz per square metre."""

    total: float
    cellular: float
    d2d: float
    densities: Densities
    rate_cellular: float | None
    rate_hd: float | None
    rate_fd: float | None

    @property
    def rate_d2d(self) -> float:
        lam = self.densities.lambda_d
        return self.d2d / lam if lam > 0 else 0.0


def _checked(res: QuadResult, what: str) -> QuadResult:
    if not res.converged:
        warnings.warn(
            f"{what}: quadrature did not converge (estimate {res.value:.6g} +/- {res.error:.2g})",
            ConvergenceWarning,
            stacklevel=3,
        )
    return res


def _assoc_coef(s: Scenario) -> float:
    """``gamma / (k P_b)``: the r^alpha coefficient of the association law."""
    if s.k == 0:
        return math.inf
    return s.gamma / (s.k * s.p_b)


# --- association and distance laws ------------------------------------------

def association_probability(s: Scenario, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Probability that a UE picks cellular mode (its nearest BS)."""
    if s.k == 0:
        return 0.0
    c = _assoc_coef(s)
    lam = s.lambda_b
    a = s.alpha
    scale = 1.0 / math.sqrt(math.pi * lam)
    if c > 0:
        scale = min(scale, c ** (-1.0 / a))

    def f(r):
        return 2.0 * math.pi * lam * r * np.exp(-c * r ** a - math.pi * lam * r * r)

    res = _checked(quad_semi_infinite(f, 0.0, spec, scale=scale), "association probability")
    return min(max(res.value, 0.0), 1.0)


def _exp_erfc_term(x: float, phi: str) -> float:
    """``exp(x^2) * (1 - Phi(x))`` with Phi either erf scaled by 1/(2 sqrt 2) or erf itself."""
    if phi == "erf":
        return float(erfcx(x))
    if phi != "scaled":
        raise ValueError(f"phi must be 'scaled' or 'erf', got {phi!r}")
    try:
        return math.exp(x * x) * (1.0 - probability_integral(x))
    except OverflowError:
        return math.inf


def association_probability_closed_alpha4(s: Scenario, phi: str = "scaled") -> float:
    """Closed form of the association probability for alpha = 4.

    ``phi="scaled"`` uses :func:`probability_integral`;
    ``phi="erf"`` uses the error function, for which the expression is the
    exact value of the integral.
    """
    if s.alpha != 4:
        raise ValueError(f"closed form needs alpha = 4, got {s.alpha!r}")
    if not s.gamma > 0:
        raise ValueError("closed form is singular at gamma = 0; use association_probability")
    if not s.k > 0:
        raise ValueError("closed form needs k > 0")
    ratio = s.k * s.p_b / (4.0 * s.gamma)
    x = math.pi * s.lambda_b * math.sqrt(ratio)
    return math.pi * s.lambda_b * math.sqrt(math.pi * ratio) * _exp_erfc_term(x, phi)


def nearest_bs_pdf(r, lambda_b: float):
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0):
        raise ValueError("distance must be nonnegative")
    if not lambda_b > 0:
        raise ValueError("lambda_b must be positive")
    out = 2.0 * math.pi * lambda_b * ra * np.exp(-math.pi * lambda_b * ra * ra)
    return float(out) if np.ndim(r) == 0 else out


def nth_neighbor_pdf(r, n: int, lam: float):
    """Density of the distance to the n-th nearest point of a planar PPP."""
    if int(n) != n or n < 1:
        raise ValueError(f"n >= 1 violated (got {n!r})")
    if not lam > 0:
        raise ValueError("density must be positive")
    ra = np.asarray(r, dtype=float)
    if np.any(ra < 0):
        raise ValueError("distance must be nonnegative")
    n = int(n)
    with np.errstate(divide="ignore"):
        logv = (math.log(2.0) - math.lgamma(n) + n * math.log(lam * math.pi)
                + (2 * n - 1) * np.log(ra) - math.pi * lam * ra * ra)
    out = np.exp(logv)
    return float(out) if np.ndim(r) == 0 else out


def nth_neighbor_mean(n: int, lam: float) -> float:
    """Mean n-th nearest neighbour distance, ``Gamma(n+1/2) / (Gamma(n) sqrt(pi lam))``."""
    return math.exp(math.lgamma(n + 0.5) - math.lgamma(n)) / math.sqrt(math.pi * lam)


def serving_bs_distance_pdf(x, s: Scenario, p_assoc: float):
    if not p_assoc > 0:
        raise ValueError("serving distance is undefined when the association probability is 0")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("distance must be nonnegative")
    c = _assoc_coef(s)
    lam = s.lambda_b
    out = (2.0 * math.pi * lam / p_assoc) * xa * np.exp(-c * xa ** s.alpha - math.pi * lam * xa * xa)
    return float(out) if np.ndim(x) == 0 else out


# --- cellular mode -----------------------------------------------------------

def _resolve_p_assoc(s: Scenario, p_assoc: float | None, spec: QuadratureSpec) -> float:
    p = association_probability(s, spec) if p_assoc is None else p_assoc
    if not p > 0:
        raise ValueError("cellular metrics are undefined when the association probability is 0")
    return p


def cellular_coverage(beta: float, s: Scenario, p_assoc: float | None = None,
                      spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Coverage of a typical CUE served by its nearest BS."""
    if not beta > 0:
        raise ValueError(f"beta > 0 violated (got {beta!r})")
    p = _resolve_p_assoc(s, p_assoc, spec)
    a = s.alpha
    lam = s.lambda_b
    c_assoc = _assoc_coef(s)
    # r^2 coefficient: nearest-BS law plus the BS interference beyond r
    quad_coef = math.pi * lam * (1.0 + 2.0 * beta ** (2.0 / a) * interference_integral_L(beta, a))
    pow_coef = beta * s.sigma2 / s.p_b + c_assoc
    scale = 1.0 / math.sqrt(quad_coef)
    if pow_coef > 0:
        scale = min(scale, pow_coef ** (-1.0 / a))

    def f(r):
        return (2.0 * math.pi * lam / p) * r * np.exp(-quad_coef * r * r - pow_coef * r ** a)

    res = _checked(quad_semi_infinite(f, 0.0, spec, scale=scale), "cellular coverage")
    return min(max(res.value, 0.0), 1.0)


def cellular_coverage_closed_alpha4(beta: float, s: Scenario, p_assoc: float | None = None,
                                    phi: str = "scaled") -> float:
    if s.alpha != 4:
        raise ValueError(f"closed form needs alpha = 4, got {s.alpha!r}")
    if not beta > 0:
        raise ValueError(f"beta > 0 violated (got {beta!r})")
    if not s.k > 0:
        raise ValueError("closed form needs k > 0")
    p = _resolve_p_assoc(s, p_assoc, DEFAULT_SPEC)
    denom = s.k * beta * s.sigma2 + s.gamma
    if not denom > 0:
        raise ValueError("closed form is singular when gamma = sigma2 = 0")
    ratio = s.k * s.p_b / (4.0 * denom)
    rho = math.sqrt(beta) * math.atan(math.sqrt(beta))
    x = math.pi * s.lambda_b * (1.0 + rho) * math.sqrt(ratio)
    return (math.pi * s.lambda_b / p) * math.sqrt(math.pi * ratio) * _exp_erfc_term(x, phi)


def _snr_growth(t):
    """``e^t - 1`` and a mask of nodes where it overflows."""
    big = t > _T_MAX
    z = np.expm1(np.minimum(t, _T_MAX))
    return z, big


def cellular_rate(s: Scenario, p_assoc: float | None = None,
                  spec: QuadratureSpec = DEFAULT_SPEC) -> RateResult:
    """Average CUE rate in nats: outer integral over the serving distance,
    inner over t of the coverage at threshold ``e^t - 1``."""
    p = _resolve_p_assoc(s, p_assoc, spec)
    a = s.alpha
    lam = s.lambda_b
    c_assoc = _assoc_coef(s)
    noise = s.sigma2 / s.p_b
    inner_spec = spec.tighter(10.0)
    inner_worst = [0.0]
    inner_ok = [True]

    def inner(r: float) -> float:
        ra = r ** a

        def g(t):
            z, big = _snr_growth(t)
            with np.errstate(over="ignore"):
                return np.where(big, 0.0, np.exp(-_cell_exponent(z)))

        def _cell_exponent(z):
            expo = 2.0 * math.pi * lam * r * r * z ** (2.0 / a) * interference_integral_L(z, a)
            if noise > 0:
                expo = expo + z * ra * noise
            return expo

        res = quad_semi_infinite(g, 0.0, inner_spec, scale=1.0)
        inner_worst[0] = max(inner_worst[0], res.error)
        inner_ok[0] &= res.converged
        return res.value

    scale = 1.0 / math.sqrt(math.pi * lam)
    if c_assoc > 0:
        scale = min(scale, c_assoc ** (-1.0 / a))

    def outer(rs):
        w = (2.0 * math.pi * lam / p) * rs * np.exp(-math.pi * lam * rs * rs - c_assoc * rs ** a)
        vals = np.array([inner(float(r)) if wi > 0 else 0.0 for r, wi in zip(rs, w)])
        return w * vals

    res = _checked(quad_semi_infinite(outer, 0.0, spec, scale=scale), "cellular rate")
    ok = res.converged and inner_ok[0]
    return RateResult(max(res.value, 0.0), res.error + inner_worst[0], ok)


# --- interference Laplace transforms ----------------------------------------

def laplace_nearest(s_arg, lam: float, r_d, alpha: float, p_d: float, method: str = "beta",
                    spec: QuadratureSpec = DEFAULT_SPEC):
    """Laplace transform of PPP interference from outside the ball of radius r_d.

    ``exp(-2 pi lam integral_{r_d}^inf sP x^{-a}/(1+sP x^{-a}) x dx)``, which
    equals ``exp(-2 pi lam (sP)^{2/a} L(sP r_d^{-a}, a))``. ``method="quad"``
    integrates the exponent directly.
    """
    if not alpha > 2:
        raise ValueError(f"alpha > 2 violated (got {alpha!r})")
    if lam < 0:
        raise ValueError("density must be nonnegative")
    sv = np.asarray(s_arg, dtype=float)
    rv = np.asarray(r_d, dtype=float)
    if np.any(sv < 0) or np.any(rv < 0):
        raise ValueError("s_arg and r_d must be nonnegative")
    scalar = np.ndim(s_arg) == 0 and np.ndim(r_d) == 0
    sv, rv = np.broadcast_arrays(sv, rv)
    c = sv * p_d
    if method == "beta":
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            arg = np.where(rv > 0, c * rv ** (-alpha), np.inf)
            arg = np.where(c > 0, arg, 0.0)
            expo = 2.0 * math.pi * lam * c ** (2.0 / alpha) * interference_integral_L(arg, alpha)
        out = np.exp(-np.where(c > 0, expo, 0.0)) if lam > 0 else np.ones(sv.shape)
    elif method == "quad":
        out = np.empty(sv.shape)
        for idx in np.ndindex(sv.shape):
            ci = float(c[idx])
            ri = float(rv[idx])
            if ci == 0.0 or lam == 0.0:
                out[idx] = 1.0
                continue
            knee = ci ** (1.0 / alpha)
            res = quad_semi_infinite(lambda x: x * ci / (x ** alpha + ci), ri, spec,
                                     scale=max(knee, ri, 1e-300))
            out[idx] = math.exp(-2.0 * math.pi * lam * res.value)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out) if scalar else out


def laplace_nearest_closed_alpha4(beta, lam: float, r_d, variant: str = "antiderivative"):
    """alpha = 4 value of :func:`laplace_nearest` at ``s = beta r_d^4 / P_d``.

    ``variant="arctan_beta"`` uses ``sqrt(beta) * arctan(beta)``;
    ``variant="antiderivative"`` uses ``sqrt(beta) * arctan(sqrt(beta))``.
    """
    b = np.asarray(beta, dtype=float)
    r = np.asarray(r_d, dtype=float)
    if variant == "arctan_beta":
        shape = np.sqrt(b) * np.arctan(b)
    elif variant == "antiderivative":
        shape = np.sqrt(b) * np.arctan(np.sqrt(b))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    out = np.exp(-math.pi * lam * r * r * shape)
    return float(out) if np.ndim(out) == 0 else out


def _full_plane_constant(alpha: float, variant: str) -> float:
    if variant == "corrected":
        return gamma_fn(1.0 + 2.0 / alpha) * gamma_fn(1.0 - 2.0 / alpha)
    if variant == "inverse_alpha":
        return gamma_fn(1.0 + 1.0 / alpha) * gamma_fn(1.0 - 1.0 / alpha)
    raise ValueError(f"unknown variant {variant!r}")


def laplace_fd_on_hd(s_arg, lam: float, alpha: float, p_d: float, variant: str = "corrected"):
    """Laplace transform of interference from an unconditioned planar PPP.

    ``exp(-pi lam (s P_d)^{2/a} C)``. ``variant="corrected"`` takes
    ``C = Gamma(1+2/a) Gamma(1-2/a)``, the value of the Laplace functional;
    ``variant="inverse_alpha"`` takes ``Gamma(1+1/a) Gamma(1-1/a)``.
    """
    if not alpha > 2:
        raise ValueError(f"alpha > 2 violated (got {alpha!r})")
    if lam < 0:
        raise ValueError("density must be nonnegative")
    sv = np.asarray(s_arg, dtype=float)
    if np.any(sv < 0):
        raise ValueError("s_arg must be nonnegative")
    const = _full_plane_constant(alpha, variant)
    if lam == 0:
        return 1.0 if np.ndim(s_arg) == 0 else np.ones(sv.shape)
    out = np.exp(-math.pi * lam * (sv * p_d) ** (2.0 / alpha) * const)
    return float(out) if np.ndim(s_arg) == 0 else out


# same shape with the HD transmitter density, for an FD receiver
laplace_hd_on_fd = laplace_fd_on_hd


def _mean_inverse_gain(c, lo, hi, alpha: float):
    """Average of ``1/(1 + c x^-a)`` for points uniform on the annulus [lo, hi].

    Uses ``integral_lo^hi x c/(x^a + c) dx = c^{2/a} (U(hi') - U(lo'))`` with
    ``U`` the lower power integral and ``lo' = lo c^{-1/a}``.
    """
    c = np.asarray(c, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c, lo, hi = np.broadcast_arrays(c, lo, hi)
    out = np.ones(c.shape)
    live = (c > 0) & (hi > lo)
    if not live.any():
        return out
    cl, ll, hl = c[live], lo[live], hi[live]
    root = cl ** (1.0 / alpha)
    a_lo = ll / root
    a_hi = hl / root
    with np.errstate(divide="ignore", over="ignore"):
        # tails are accurate where both limits sit far out; lower parts otherwise
        tail_lo = interference_integral_L(np.where(a_lo > 0, a_lo ** (-alpha), np.inf), alpha)
        tail_hi = interference_integral_L(np.where(np.isinf(a_hi), 0.0, a_hi ** (-alpha)), alpha)
    part = np.where(a_lo > 1.0, tail_lo - tail_hi,
                    lower_power_integral(a_hi, alpha) - lower_power_integral(a_lo, alpha))
    area_half = 0.5 * (hl * hl - ll * ll)
    out[live] = 1.0 - cl ** (2.0 / alpha) * part / area_half
    return np.clip(out, 0.0, 1.0)


def matched_laplace_params(s: Scenario, d: Densities, duplex: str,
                           w_total: int | None = None) -> GeneralLaplaceParams:
    """Finite-population parameters whose mean transmitter count matches the
    interferer density of ``duplex`` over the region holding ``w_total`` UEs."""
    w = s.w_total if w_total is None else w_total
    lam_int = d.lambda_hd_tx if duplex == "hd" else d.lambda_fd
    m_bar = 1.0 + lam_int * w / s.lambda_u
    return GeneralLaplaceParams(w_total=w, m_bar=max(m_bar, 1.0 + 1e-9))


def laplace_general_nth(s_arg, params: GeneralLaplaceParams, duplex: str, r_d, s: Scenario,
                        exponent: str = "k-l"):
    """Finite-population Laplace transform of same-class D2D interference.

    ``params.w_total`` UEs fill a disc of area ``W / lambda_u`` around the
    receiver, ``M = round(W P_class)`` of them in the receiver's duplex class.
    The number of transmitting interferers ``k`` is Poisson with mean
    ``m_bar - 1`` truncated to ``k <= M - 1``; each lies inside the pairing
    ball with probability ``(n-1)/(M-1)``, the inside count truncated to
    ``f_min = min(k, n-1)`` and renormalized by ``I_{1-p}(k-f_min, f_min+1)``.
    Inside points are uniform on the ball and outside points uniform on the
    rest of the disc, so each contributes the area-averaged factor
    ``1/(1 + s P_d x^-a)``. ``exponent="k-l"`` raises the outside factor to
    ``k - l``; ``"n-l"`` is the alternative reading.
    """
    if duplex not in ("hd", "fd"):
        raise ValueError(f"duplex must be 'hd' or 'fd', got {duplex!r}")
    if exponent not in ("k-l", "n-l"):
        raise ValueError(f"exponent must be 'k-l' or 'n-l', got {exponent!r}")
    n = s.n
    params.check_order(n)
    share = s.p_hd if duplex == "hd" else s.p_fd
    m_class = int(round(params.w_total * share))
    if m_class <= n:
        raise ValueError(f"class population M = {m_class} must exceed the pairing order n = {n}")
    sv = np.asarray(s_arg, dtype=float)
    rv = np.asarray(r_d, dtype=float)
    scalar = np.ndim(s_arg) == 0 and np.ndim(r_d) == 0
    sv, rv = np.broadcast_arrays(sv, rv)
    c = sv * s.p_d
    r_region = math.sqrt(params.w_total / (math.pi * s.lambda_u))
    a_in = _mean_inverse_gain(c, 0.0, rv, s.alpha)
    a_out = _mean_inverse_gain(c, rv, np.maximum(rv, r_region), s.alpha)

    p_in = (n - 1) / (m_class - 1)
    q = params.m_bar - 1.0
    ks = np.arange(m_class)
    log_pois = ks * math.log(q) - q - np.array([math.lgamma(k + 1.0) for k in ks])
    pois = np.exp(log_pois)
    pois /= math.fsum(pois)  # xi: mass of the truncated Poisson law
    total = np.zeros(sv.shape)
    for k in range(m_class):
        f_min = min(k, n - 1)
        norm = 1.0 if k == f_min else reg_incomplete_beta(1.0 - p_in, k - f_min, f_min + 1)
        for l in range(f_min + 1):
            w = math.comb(k, l) * p_in ** l * (1.0 - p_in) ** (k - l) / norm
            e_out = (k - l) if exponent == "k-l" else (n - l)
            total += pois[k] * w * a_in ** l * a_out ** e_out
    # the weights sum to one only up to rounding
    total = np.minimum(total, 1.0)
    return float(total) if scalar else total


def _conditioned_inside_factor(c, r_d, alpha: float, n: int):
    """PPP value of the n-1 interferers inside the pairing ball (uniform on it)."""
    if n == 1:
        return np.ones(np.broadcast(c, r_d).shape)
    return _mean_inverse_gain(c, 0.0, r_d, alpha) ** (n - 1)


# --- D2D coverage and rate -------------------------------------------------

def _class_densities(mode: str, d: Densities) -> tuple[float, float]:
    if mode == "hd":
        return d.lambda_hd_tx, d.lambda_fd
    if mode == "fd":
        return d.lambda_fd, d.lambda_hd_tx
    raise ValueError(f"D2D mode must be 'hd' or 'fd', got {mode!r}")


def _same_class_laplace(c, r, mode, s, d, lam_pair, laplace, general_params, exponent):
    """Laplace factor of same-class interference at ``c = s P_d`` and distance r."""
    n = s.n
    if laplace == "nearest" or (laplace == "auto" and n == 1):
        if n != 1:
            raise ValueError("the nearest-link transform only applies to n = 1")
        return laplace_nearest(c / s.p_d, lam_pair, r, s.alpha, s.p_d)
    if laplace == "ppp":
        return (_conditioned_inside_factor(c, r, s.alpha, n)
                * laplace_nearest(c / s.p_d, lam_pair, r, s.alpha, s.p_d))
    if laplace in ("general", "auto"):
        params = general_params or (
            GeneralLaplaceParams(s.w_total, s.m_bar) if s.m_bar is not None
            else matched_laplace_params(s, d, mode)
        )
        return laplace_general_nth(c / s.p_d, params, mode, r, s, exponent=exponent)
    raise ValueError(f"unknown laplace path {laplace!r}")


def d2d_coverage(beta: float, mode: str, s: Scenario, d: Densities | None = None,
                 laplace: str = "auto", variant: str = "corrected",
                 general_params: GeneralLaplaceParams | None = None, exponent: str = "k-l",
                 spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Coverage of a typical HD or FD D2D receiver paired with its n-th nearest
    same-class transmitter.

    ``laplace`` picks the same-class interference transform: ``"nearest"``
    (n = 1 only), ``"general"`` (finite-population form), ``"ppp"`` (exact PPP
    conditioning on n-1 points inside the pairing ball) or ``"auto"``
    (nearest for n = 1, general otherwise). ``variant`` selects the constant of
    the cross-class transform, see :func:`laplace_fd_on_hd`.
    """
    if not beta > 0:
        raise ValueError(f"beta > 0 violated (got {beta!r})")
    if d is None:
        d = derive_densities(s, association_probability(s, spec))
    lam_pair, lam_other = _class_densities(mode, d)
    if not lam_pair > 0:
        raise ValueError(f"{mode} coverage is undefined: no {mode.upper()} users (density 0)")
    a = s.alpha
    n = s.n
    pow_coef = beta * s.sigma2 / s.p_d + (beta * s.delta if mode == "fd" else 0.0)

    def f(r):
        c = beta * r ** a  # s P_d with s = beta r^a / P_d
        same = _same_class_laplace(c, r, mode, s, d, lam_pair, laplace, general_params, exponent)
        other = laplace_fd_on_hd(c / s.p_d, lam_other, a, s.p_d, variant)
        return nth_neighbor_pdf(r, n, lam_pair) * same * other * np.exp(-pow_coef * r ** a)

    # at large beta the mass sits well inside the pairing scale; shrink the
    # mapping so the adaptive rule sees the peak
    scale = math.sqrt(n / (math.pi * lam_pair)) * min(1.0, beta ** (-1.0 / a))
    if pow_coef > 0:
        scale = min(scale, pow_coef ** (-1.0 / a))
    res = _checked(quad_semi_infinite(f, 0.0, spec, scale=scale), f"{mode} coverage")
    return min(max(res.value, 0.0), 1.0)


def d2d_rate(mode: str, s: Scenario, d: Densities | None = None, laplace: str = "auto",
             variant: str = "corrected", general_params: GeneralLaplaceParams | None = None,
             exponent: str = "k-l", spec: QuadratureSpec = DEFAULT_SPEC) -> RateResult:
    """Average HD or FD D2D rate in nats, outer over r_d and inner over t."""
    if d is None:
        d = derive_densities(s, association_probability(s, spec))
    lam_pair, lam_other = _class_densities(mode, d)
    if not lam_pair > 0:
        raise ValueError(f"{mode} rate is undefined: no {mode.upper()} users (density 0)")
    a = s.alpha
    n = s.n
    pow_coef = s.sigma2 / s.p_d + (s.delta if mode == "fd" else 0.0)
    inner_spec = spec.tighter(10.0)
    inner_worst = [0.0]
    inner_ok = [True]

    def inner(r: float) -> float:
        ra = r ** a

        def g(t):
            z, big = _snr_growth(t)
            with np.errstate(over="ignore"):
                return np.where(big, 0.0, _d2d_inner(z * ra))

        def _d2d_inner(c):
            same = _same_class_laplace(c, r, mode, s, d, lam_pair, laplace, general_params,
                                       exponent)
            other = laplace_fd_on_hd(c / s.p_d, lam_other, a, s.p_d, variant)
            val = same * other
            if pow_coef > 0:
                val = val * np.exp(-pow_coef * c)
            return val

        res = quad_semi_infinite(g, 0.0, inner_spec, scale=1.0)
        inner_worst[0] = max(inner_worst[0], res.error)
        inner_ok[0] &= res.converged
        return res.value

    def outer(rs):
        w = nth_neighbor_pdf(rs, n, lam_pair)
        vals = np.array([inner(float(r)) if wi > 0 else 0.0 for r, wi in zip(rs, w)])
        return w * vals

    scale = math.sqrt(n / (math.pi * lam_pair))
    res = _checked(quad_semi_infinite(outer, 0.0, spec, scale=scale), f"{mode} rate")
    return RateResult(max(res.value, 0.0), res.error + inner_worst[0],
                      res.converged and inner_ok[0])


def coverage(q: CoverageQuery, s: Scenario, d: Densities | None = None, **kwargs) -> float:
    if q.mode == "cellular":
        p = d.p_assoc if d is not None else None
        return cellular_coverage(q.beta, s, p, **kwargs)
    return d2d_coverage(q.beta, q.mode, s, d, **kwargs)


def sum_throughput(s: Scenario, fd_pair_doubling: bool = False, variant: str = "corrected",
                   laplace: str = "auto", spec: QuadratureSpec = DEFAULT_SPEC) -> Throughput:
    """``T = lambda_c R_c + lambda_d R_d`` with ``lambda_d R_d = lambda_HD R_HD +
    lambda_FD R_FD``: HD links are counted once per transmitter-receiver pair
    (density lambda_HD) and every FD transceiver counts as a receiver.
    ``fd_pair_doubling`` additionally doubles the FD term.
    """
    p = association_probability(s, spec)
    d = derive_densities(s, p)
    r_c = cellular_rate(s, p, spec).rate_nats if p > 0 else None
    r_hd = r_fd = None
    if d.lambda_hd_tx > 0:
        r_hd = d2d_rate("hd", s, d, laplace=laplace, variant=variant, spec=spec).rate_nats
    if d.lambda_fd > 0:
        r_fd = d2d_rate("fd", s, d, laplace=laplace, variant=variant, spec=spec).rate_nats
    cell = d.lambda_c * r_c if r_c is not None else 0.0
    dd = 0.0
    if r_hd is not None:
        dd += d.lambda_hd_tx * r_hd
    if r_fd is not None:
        dd += (2.0 if fd_pair_doubling else 1.0) * d.lambda_fd * r_fd
    return Throughput(cell + dd, cell, dd, d, r_c, r_hd, r_fd)
