"""Monte Carlo engine for the cellular / HD-FD D2D overlay.

The typical receiver sits at the origin. Every trial draws from its own
counter-based stream: ``Philox`` keyed by ``SeedSequence(seed, spawn_key=(i,))``
for trial index ``i``, so results do not depend on execution order or on how
trials are split across workers.

Mode-conditioned drops are sampled exactly rather than by rejection. Given
that the typical UE is cellular, its nearest-BS distance follows the serving
distance law; given that it is D2D, the nearest-BS distance is reweighted by
the probability that the association test fails. The other BSs are then a
PPP outside that distance, and the UE field, other UEs' modes, duplex classes
and HD transmit roles are drawn as in an unconditioned drop.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analytic import association_probability, nth_neighbor_mean
from .model import Densities, Scenario, derive_densities

__all__ = [
    "PointField",
    "DropOutcome",
    "Estimate",
    "SinrSample",
    "IndependenceReport",
    "trial_rng",
    "sample_ppp",
    "run_drop",
    "simulate_sinr",
    "estimate_coverage",
    "estimate_coverage_curve",
    "estimate_rate",
    "estimate_association",
    "validate_independence_assumption",
    "window_radii",
]

MODES = ("cellular", "hd", "fd")
_MAX_RESAMPLES = 1000
_MAX_REJECTIONS = 10_000_000


@dataclass(frozen=True)
class PointField:
    points: np.ndarray
    window_radius: float
    intensity: float

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DropOutcome:
    """One drop seen from the typical receiver.

    ``sinr == signal / (interference_bs + interference_hd + interference_fd
    + self_interference + noise)``; only the terms of the drop's mode are
    nonzero. ``pairing_distance`` is the serving distance for every mode.
    """

    mode: str
    pairing_distance: float
    sinr: float
    signal: float
    interference_hd: float = 0.0
    interference_fd: float = 0.0
    interference_bs: float = 0.0
    self_interference: float = 0.0
    noise: float = 0.0
    resampled: int = 0


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    trials: int
    seed: int
    attempts: int = 0
    resampled: int = 0

    @staticmethod
    def from_samples(x: np.ndarray, seed: int, attempts: int = 0, resampled: int = 0):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            raise ValueError("no samples")
        mean = math.fsum(x) / x.size
        sd = math.sqrt(math.fsum((x - mean) ** 2) / (x.size - 1)) if x.size > 1 else 0.0
        return Estimate(mean, sd / math.sqrt(x.size), int(x.size), seed,
                        attempts or int(x.size), resampled)


@dataclass(frozen=True)
class SinrSample:
    mode: str
    sinr: np.ndarray
    pairing_distance: np.ndarray
    seed: int
    attempts: int
    resampled: int


def trial_rng(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


# --- point processes ---------------------------------------------------------

def _polar(radii: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    theta = 2.0 * math.pi * rng.random(radii.size)
    return np.column_stack((radii * np.cos(theta), radii * np.sin(theta)))


def sample_ppp(intensity: float, window_radius: float, rng: np.random.Generator) -> PointField:
    """Homogeneous PPP on the disc of radius ``window_radius`` centred at 0."""
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    if not window_radius > 0:
        raise ValueError("window_radius must be positive")
    count = rng.poisson(intensity * math.pi * window_radius ** 2) if intensity > 0 else 0
    radii = window_radius * np.sqrt(rng.random(count))
    return PointField(_polar(radii, rng), window_radius, intensity)


def _sample_annulus(intensity: float, inner: float, outer: float,
                    rng: np.random.Generator) -> np.ndarray:
    if outer <= inner or intensity == 0:
        return np.empty((0, 2))
    count = rng.poisson(intensity * math.pi * (outer * outer - inner * inner))
    radii = np.sqrt(inner * inner + rng.random(count) * (outer * outer - inner * inner))
    return _polar(radii, rng)


# --- geometry sizing -----------------------------------------------------------

def _assoc_coef(s: Scenario) -> float:
    return math.inf if s.k == 0 else s.gamma / (s.k * s.p_b)


def window_radii(s: Scenario, d: Densities, mode: str, scale: float = 1.0) -> tuple[float, float]:
    """(UE window, BS window) radii for a drop of ``mode``.

    The UE window is ``max(5/sqrt(pi lambda_min), 20 E[r_d])`` with
    ``lambda_min`` the smallest nonzero D2D class density; the BS window
    extends it by ``5/sqrt(pi lambda_b)`` so every UE sees its true nearest BS.
    """
    r_bs0 = 5.0 / math.sqrt(math.pi * s.lambda_b)
    if mode == "cellular":
        return 0.0, r_bs0 * scale
    active = [v for v in (d.lambda_hd_tx, d.lambda_fd) if v > 0]
    lam_pair = d.lambda_fd if mode == "fd" else d.lambda_hd_tx
    if not active or lam_pair <= 0:
        raise ValueError(f"no {mode} users at these parameters")
    r_ue = max(5.0 / math.sqrt(math.pi * min(active)), 20.0 * nth_neighbor_mean(s.n, lam_pair))
    r_ue *= scale
    return r_ue, r_ue + r_bs0 * scale


# --- conditioned nearest-BS distance ----------------------------------------

def _sample_cellular_distance(s: Scenario, rng: np.random.Generator) -> float:
    """Nearest-BS distance given that the association test passes."""
    lam = s.lambda_b
    a = s.alpha
    c = _assoc_coef(s)
    if math.isinf(c):
        raise ValueError("cellular mode has probability 0 (k = 0)")
    if c == 0:
        return math.sqrt(rng.exponential() / (math.pi * lam))
    # proposal r ~ r exp(-c r^a) when the BS density barely matters inside it
    mean_r2 = c ** (-2.0 / a) * math.gamma(4.0 / a) / math.gamma(2.0 / a)
    use_power = math.pi * lam * mean_r2 < 1.0
    for _ in range(_MAX_REJECTIONS):
        if use_power:
            r = (rng.gamma(2.0 / a) / c) ** (1.0 / a)
            if rng.random() < math.exp(-math.pi * lam * r * r):
                return r
        else:
            r = math.sqrt(rng.exponential() / (math.pi * lam))
            if rng.random() < math.exp(-c * r ** a):
                return r
    raise RuntimeError("cellular distance sampler did not accept")


def _sample_d2d_distance(s: Scenario, rng: np.random.Generator) -> float:
    """Nearest-BS distance given that the association test fails."""
    lam = s.lambda_b
    c = _assoc_coef(s)
    if c == 0:
        raise ValueError("D2D mode has probability 0 (gamma = 0)")
    for _ in range(_MAX_REJECTIONS):
        r = math.sqrt(rng.exponential() / (math.pi * lam))
        if math.isinf(c) or rng.random() < -math.expm1(-c * r ** s.alpha):
            return r
    raise RuntimeError("D2D distance sampler did not accept")


def _bs_field_given_nearest(r_c: float, lam: float, radius: float,
                            rng: np.random.Generator) -> np.ndarray:
    nearest = _polar(np.array([r_c]), rng)
    return np.vstack((nearest, _sample_annulus(lam, r_c, max(radius, r_c), rng)))


# --- drops ------------------------------------------------------------------

def _cellular_drop(s: Scenario, bs: np.ndarray, rng: np.random.Generator) -> DropOutcome:
    r2 = np.einsum("ij,ij->i", bs, bs)
    serving = int(np.argmin(r2))
    h = rng.exponential(size=bs.shape[0])
    signal = s.p_b * h[serving] * r2[serving] ** (-0.5 * s.alpha)
    others = np.ones(bs.shape[0], dtype=bool)
    others[serving] = False
    interf = s.p_b * kernels.power_sum(r2[others], h[others], s.alpha)
    sinr = signal / (interf + s.sigma2)
    return DropOutcome("cellular", math.sqrt(r2[serving]), sinr, signal,
                       interference_bs=interf, noise=s.sigma2)


def _d2d_drop(s: Scenario, duplex: str, bs: np.ndarray, r_ue: float,
              rng: np.random.Generator, independent_p: float | None = None) -> DropOutcome:
    c_assoc = _assoc_coef(s)
    for attempt in range(_MAX_RESAMPLES):
        ue = sample_ppp(s.lambda_u, r_ue, rng).points
        n_ue = ue.shape[0]
        h_assoc = rng.exponential(size=n_ue)
        u_duplex = rng.random(n_ue)
        u_tx = rng.random(n_ue)
        h_int = rng.exponential(size=n_ue)
        bs_used, c_used = bs, c_assoc
        if independent_p is not None:
            # modes drawn i.i.d. with the association probability
            keep = rng.random(n_ue) >= independent_p
            ue, h_assoc, u_duplex, u_tx, h_int = (v[keep] for v in (ue, h_assoc, u_duplex, u_tx, h_int))
            bs_used, c_used = np.empty((0, 2)), math.inf
        r_d, i_hd, i_fd, m = kernels.d2d_drop(
            np.ascontiguousarray(ue), np.ascontiguousarray(bs_used), h_assoc, u_duplex, u_tx,
            h_int, float(c_used), float(s.alpha), float(s.p_fd), duplex == "fd", int(s.n),
        )
        if m >= s.n:
            break
    else:
        raise RuntimeError(f"fewer than n={s.n} {duplex} partners in {_MAX_RESAMPLES} attempts")
    h0 = rng.exponential()
    signal = s.p_d * h0 * r_d ** (-s.alpha)
    si = s.p_d * s.delta if duplex == "fd" else 0.0
    i_hd *= s.p_d
    i_fd *= s.p_d
    sinr = signal / (i_hd + i_fd + si + s.sigma2)
    return DropOutcome(duplex, r_d, sinr, signal, interference_hd=i_hd, interference_fd=i_fd,
                       self_interference=si, noise=s.sigma2, resampled=attempt)


def _typical_mode(s: Scenario, r_bs: float, rng: np.random.Generator):
    bs = sample_ppp(s.lambda_b, r_bs, rng).points
    h = rng.exponential()
    if bs.shape[0] == 0 or s.k == 0:
        return False, bs
    r_c = math.sqrt(float(np.min(np.einsum("ij,ij->i", bs, bs))))
    return s.k * s.p_b * h * r_c ** (-s.alpha) > s.gamma, bs


def run_drop(s: Scenario, rng: np.random.Generator, d: Densities | None = None,
             window_scale: float = 1.0) -> DropOutcome:
    """One unconditioned drop: the typical UE picks its mode from the BS field."""
    if d is None:
        d = derive_densities(s, association_probability(s))
    modes = [m for m, lam in (("hd", d.lambda_hd_tx), ("fd", d.lambda_fd)) if lam > 0]
    r_ue = max(window_radii(s, d, m, window_scale)[0] for m in modes) if modes else 0.0
    r_bs = r_ue + 5.0 * window_scale / math.sqrt(math.pi * s.lambda_b)
    cellular, bs = _typical_mode(s, r_bs, rng)
    if cellular:
        return _cellular_drop(s, bs, rng)
    duplex = "fd" if rng.random() < s.p_fd else "hd"
    return _d2d_drop(s, duplex, bs, r_ue or 5.0 / math.sqrt(math.pi * s.lambda_u), rng)


def _conditioned_drop(s: Scenario, mode: str, d: Densities, window_scale: float,
                      rng: np.random.Generator, independent_p: float | None = None) -> DropOutcome:
    r_ue, r_bs = window_radii(s, d, mode, window_scale)
    if mode == "cellular":
        r_c = _sample_cellular_distance(s, rng)
        bs = _bs_field_given_nearest(r_c, s.lambda_b, r_bs, rng)
        return _cellular_drop(s, bs, rng)
    r_c = _sample_d2d_distance(s, rng)
    bs = _bs_field_given_nearest(r_c, s.lambda_b, r_bs, rng)
    return _d2d_drop(s, mode, bs, r_ue, rng, independent_p)


# --- estimators ---------------------------------------------------------------

def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _run_trials(fn, indices, workers: int):
    if workers <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))


def simulate_sinr(s: Scenario, mode: str, trials: int, seed: int, d: Densities | None = None,
                  window_scale: float = 1.0, conditioning: str = "exact",
                  independent_modes: bool = False, workers: int = 1) -> SinrSample:
    """SINR of ``trials`` drops of ``mode``.

    ``conditioning="exact"`` samples drops conditioned on ``mode`` directly;
    ``"rejection"`` runs unconditioned drops and keeps those of ``mode``
    (trial indices keep counting until ``trials`` are collected, capped at
    ``1000 * trials`` attempts). ``independent_modes`` draws other UEs' modes
    i.i.d. with the analytic association probability instead of from the BS
    field.
    """
    _check_mode(mode)
    if trials < 1:
        raise ValueError("trials must be positive")
    if d is None:
        d = derive_densities(s, association_probability(s))
    indep = d.p_assoc if independent_modes else None
    if conditioning == "exact":
        drops = _run_trials(
            lambda i: _conditioned_drop(s, mode, d, window_scale, trial_rng(seed, i), indep),
            range(trials), workers)
        attempts = trials
    elif conditioning == "rejection":
        drops = []
        attempts = 0
        batch = max(trials, 64)
        while len(drops) < trials:
            if attempts >= 1000 * trials:
                break
            idx = range(attempts, attempts + batch)
            got = _run_trials(lambda i: run_drop(s, trial_rng(seed, i), d, window_scale),
                              idx, workers)
            attempts += batch
            for j, out in enumerate(got):
                if out.mode == mode and len(drops) < trials:
                    drops.append(out)
                    last = idx[j]
            if len(drops) >= trials:
                attempts = last + 1
        if not drops:
            raise ValueError(f"no drops of mode {mode!r} in {attempts} attempts")
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    sinr = np.array([o.sinr for o in drops])
    dist = np.array([o.pairing_distance for o in drops])
    resampled = sum(o.resampled for o in drops)
    return SinrSample(mode, sinr, dist, seed, attempts, resampled)


def _min_trials(trials: int):
    if trials < 100:
        raise ValueError(f"trials >= 100 required, got {trials}")


def estimate_coverage_curve(s: Scenario, betas, mode: str, trials: int, seed: int,
                            **kwargs) -> list[Estimate]:
    """Coverage at every threshold in ``betas`` from one common set of drops."""
    _min_trials(trials)
    sample = simulate_sinr(s, mode, trials, seed, **kwargs)
    return [Estimate.from_samples((sample.sinr >= b).astype(float), seed, sample.attempts,
                                  sample.resampled) for b in np.atleast_1d(betas)]


def estimate_coverage(s: Scenario, beta: float, mode: str, trials: int, seed: int,
                      **kwargs) -> Estimate:
    return estimate_coverage_curve(s, [beta], mode, trials, seed, **kwargs)[0]


def estimate_rate(s: Scenario, mode: str, trials: int, seed: int, **kwargs) -> Estimate:
    """Mean of ``ln(1 + SINR)`` in nats."""
    _min_trials(trials)
    sample = simulate_sinr(s, mode, trials, seed, **kwargs)
    return Estimate.from_samples(np.log1p(sample.sinr), seed, sample.attempts, sample.resampled)


def estimate_association(s: Scenario, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Fraction of unconditioned drops whose typical UE picks cellular mode."""
    if trials < 1:
        raise ValueError("trials must be positive")
    r_bs = 5.0 / math.sqrt(math.pi * s.lambda_b)
    hits = _run_trials(lambda i: float(_typical_mode(s, r_bs, trial_rng(seed, i))[0]),
                       range(trials), workers)
    return Estimate.from_samples(np.array(hits), seed)


@dataclass(frozen=True)
class IndependenceReport:
    """Per-threshold comparison of D2D coverage under the true, BS-coupled
    mode geometry against the analytic model and against i.i.d. modes."""

    scenario: Scenario
    seed: int
    trials: int
    rows: list = field(default_factory=list)

    @property
    def max_gap(self) -> float:
        return max((abs(r["gap_analytic"]) for r in self.rows), default=0.0)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "trials": self.trials,
            "max_gap": self.max_gap,
            "rows": [dict(r) for r in self.rows],
        }


def validate_independence_assumption(s: Scenario, trials: int, seed: int, betas=None,
                                     modes=("hd", "fd"), window_scale: float = 1.0,
                                     variant: str = "corrected") -> IndependenceReport:
    """Compare simulated D2D coverage (dependent interferers) with the analytic
    prediction that treats D2D interferers as independent PPPs."""
    from .analytic import d2d_coverage

    if betas is None:
        betas = 10.0 ** (np.arange(-10.0, 21.0, 2.0) / 10.0)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    d = derive_densities(s, association_probability(s))
    rows = []
    for mode in modes:
        lam = d.lambda_fd if mode == "fd" else d.lambda_hd_tx
        if lam <= 0:
            continue
        dep = simulate_sinr(s, mode, trials, seed, d=d, window_scale=window_scale)
        ind = simulate_sinr(s, mode, trials, seed, d=d, window_scale=window_scale,
                            independent_modes=True)
        for b in betas:
            est_dep = Estimate.from_samples((dep.sinr >= b).astype(float), seed)
            est_ind = Estimate.from_samples((ind.sinr >= b).astype(float), seed)
            ana = d2d_coverage(float(b), mode, s, d, variant=variant)
            rows.append({
                "mode": mode,
                "beta": float(b),
                "analytic": ana,
                "mc_dependent": est_dep.mean,
                "mc_dependent_stderr": est_dep.stderr,
                "mc_independent": est_ind.mean,
                "gap_analytic": est_dep.mean - ana,
                "gap_dependence": est_dep.mean - est_ind.mean,
            })
    return IndependenceReport(s, seed, trials, rows)
