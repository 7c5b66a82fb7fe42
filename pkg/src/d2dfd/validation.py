"""Oracle battery behind ``d2dfd validate``.

Every check records its group, tolerance, observed value and verdict. Groups
can be run separately; Monte Carlo checks share one set of drops per mode.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic as A
from . import simulator as S
from .model import Scenario, derive_densities
from .special import (
    gamma_fn,
    interference_integral_L,
    quad_finite,
    quad_semi_infinite,
)

__all__ = ["GROUPS", "Check", "Report", "run_validation"]

GROUPS = ("special-functions", "closed-forms", "analytic", "monte-carlo", "assumptions")

BETA_GRID_DB = np.arange(-10.0, 21.0, 2.0)


@dataclass
class Check:
    name: str
    group: str
    tolerance: float
    observed: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "group": self.group,
            "tolerance": self.tolerance,
            "observed": self.observed,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class Report:
    scenario: Scenario
    seed: int
    trials: int
    checks: list = field(default_factory=list)
    decisions: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "scenario": dataclasses.asdict(self.scenario),
            "seed": self.seed,
            "trials": self.trials,
            "passed": self.passed,
            "failed": self.failed,
            "decisions": self.decisions,
            "checks": [c.as_dict() for c in self.checks],
        }


def _le(name, group, tol, observed, **detail) -> Check:
    observed = float(observed)
    return Check(name, group, tol, observed, bool(observed <= tol), detail)


# --- special functions ---------------------------------------------------------

def _special_checks() -> list[Check]:
    g = "special-functions"
    out = [
        _le("quad.constant", g, 1e-12, abs(quad_finite(lambda x: np.ones_like(x), 0.0, 1.0).value - 1.0)),
        _le("quad.sine", g, 1e-10, abs(quad_finite(np.sin, 0.0, math.pi).value - 2.0)),
        _le("quad.endpoint_singularity", g, 1e-6,
            abs(quad_finite(lambda x: x ** -0.5, 0.0, 1.0).value - 2.0)),
        _le("quad.exponential_tail", g, 1e-10,
            abs(quad_semi_infinite(lambda x: np.exp(-x), 0.0).value - 1.0)),
        _le("quad.inverse_square_tail", g, 1e-10,
            abs(quad_semi_infinite(lambda x: x ** -2.0, 1.0).value - 1.0)),
    ]
    betas = np.logspace(-3, 3, 25)
    ident = np.max(np.abs(interference_integral_L(betas, 4.0) - 0.5 * np.arctan(np.sqrt(betas))))
    out.append(_le("L.alpha4_arctan_identity", g, 1e-9, ident))
    worst = 0.0
    for a in (2.5, 3.0, 4.0, 5.5):
        for b in (0.01, 1.0, 100.0):
            ref = interference_integral_L(b, a, method="quad")
            worst = max(worst, abs(interference_integral_L(b, a) - ref) / ref)
    out.append(_le("L.beta_vs_quadrature", g, 1e-8, worst))
    xs = np.linspace(0.1, 10.0, 50)
    rec = max(abs(gamma_fn(x + 1) - x * gamma_fn(x)) / gamma_fn(x + 1) for x in xs)
    out.append(_le("gamma.recurrence", g, 1e-13, rec))
    return out


# --- closed forms --------------------------------------------------------------

def _closed_form_checks(s: Scenario, report: Report) -> list[Check]:
    g = "closed-forms"
    out = []
    if s.alpha == 4 and s.gamma > 0 and s.k > 0:
        p = A.association_probability(s)
        gap_erf = abs(A.association_probability_closed_alpha4(s, "erf") - p)
        gap_fn = abs(A.association_probability_closed_alpha4(s, "scaled") - p)
        out.append(_le("closed.association", g, 1e-4, gap_erf, scaled_gap=gap_fn,
                       erf_gap=gap_erf, general=p,
                       attribution="scaled probability-integral normalization"
                       if gap_fn > 1e-4 else None))
        gaps_erf, gaps_fn = [], []
        for b in (0.1, 1.0, 10.0):
            ref = A.cellular_coverage(b, s, p)
            gaps_erf.append(abs(A.cellular_coverage_closed_alpha4(b, s, p, "erf") - ref))
            gaps_fn.append(abs(A.cellular_coverage_closed_alpha4(b, s, p, "scaled") - ref))
        out.append(_le("closed.cellular_coverage", g, 1e-4, max(gaps_erf),
                       betas=[0.1, 1.0, 10.0], erf_gaps=gaps_erf, scaled_gaps=gaps_fn,
                       attribution="scaled probability-integral normalization"
                       if max(gaps_fn) > 1e-4 else None))
        report.decisions["probability_integral"] = (
            "erf" if max(gaps_erf + [gap_erf]) <= 1e-4 < max(gaps_fn + [gap_fn]) else "scaled")

    # nearest-link transform at alpha = 4: which arctan argument matches quadrature
    lam, r_d = 0.025, 3.0
    betas = np.logspace(-2, 2, 21)
    errs = {"arctan_beta": 0.0, "antiderivative": 0.0}
    for b in betas:
        ref = A.laplace_nearest(b * r_d ** 4 / s.p_d, lam, r_d, 4.0, s.p_d, method="quad")
        for v in errs:
            errs[v] = max(errs[v], abs(A.laplace_nearest_closed_alpha4(b, lam, r_d, v) - ref) / ref)
    chosen = min(errs, key=errs.get)
    report.decisions["nearest_link_alpha4"] = chosen
    out.append(_le("closed.nearest_link_alpha4", g, 1e-6, errs[chosen], selected=chosen,
                   rel_errors=errs))

    # unconditioned planar transform against the Laplace functional by quadrature
    a = s.alpha
    errs = {"corrected": 0.0, "inverse_alpha": 0.0}
    for c in (1e-3, 1.0, 1e3):
        expo = quad_semi_infinite(lambda x: 2.0 * math.pi * x * c / (x ** a + c), 0.0,
                                  scale=c ** (1.0 / a)).value
        ref = math.exp(-lam * expo)
        for v in errs:
            errs[v] = max(errs[v], abs(A.laplace_fd_on_hd(c / s.p_d, lam, a, s.p_d, v) - ref) / ref)
    chosen = min(errs, key=errs.get)
    report.decisions["full_plane_constant"] = chosen
    out.append(_le("closed.full_plane_constant", g, 1e-6, errs[chosen], selected=chosen,
                   rel_errors=errs))
    return out


# --- analytic properties -------------------------------------------------------

def _analytic_checks(s: Scenario) -> list[Check]:
    g = "analytic"
    out = []
    p = A.association_probability(s)
    d = derive_densities(s, p)
    norm = abs(quad_semi_infinite(lambda r: A.nearest_bs_pdf(r, s.lambda_b), 0.0,
                                  scale=1 / math.sqrt(math.pi * s.lambda_b)).value - 1.0)
    out.append(_le("pdf.nearest_bs", g, 1e-8, norm))
    worst = 0.0
    for n in (1, 2, 3, 5):
        lam = 0.025
        v = quad_semi_infinite(lambda r: A.nth_neighbor_pdf(r, n, lam), 0.0,
                               scale=math.sqrt(n / (math.pi * lam))).value
        worst = max(worst, abs(v - 1.0))
    out.append(_le("pdf.nth_neighbor", g, 1e-8, worst))
    if p > 0:
        sc = min(1 / math.sqrt(math.pi * s.lambda_b), (s.k * s.p_b / s.gamma) ** (1 / s.alpha)
                 if s.gamma > 0 else math.inf)
        v = quad_semi_infinite(lambda x: A.serving_bs_distance_pdf(x, s, p), 0.0, scale=sc).value
        out.append(_le("pdf.serving_bs", g, 1e-8, abs(v - 1.0)))

    sgrid = np.concatenate(([0.0], np.logspace(-4, 4, 40))) / s.p_d
    vals = [A.laplace_nearest(sgrid, 0.025, 3.0, s.alpha, s.p_d),
            A.laplace_fd_on_hd(sgrid, 0.025, s.alpha, s.p_d)]
    at0 = max(abs(v[0] - 1.0) for v in vals)
    out.append(_le("laplace.unit_at_zero", g, 0.0, at0))
    out_of_range = sum(int(np.sum((v <= 0) | (v > 1))) for v in vals)
    out.append(_le("laplace.range", g, 0.0, out_of_range))

    betas = 10.0 ** (BETA_GRID_DB / 10.0)
    modes = ["cellular"] if p > 0 else []
    modes += [m for m, lam in (("hd", d.lambda_hd_tx), ("fd", d.lambda_fd)) if lam > 0]
    curves = {}
    for m in modes:
        curves[m] = np.array([A.coverage(A.CoverageQuery(b, m), s, d) for b in betas])
        rise = max(0.0, float(np.max(np.diff(curves[m]))))
        out.append(_le(f"coverage.monotone.{m}", g, 0.0, rise))
    if "hd" in curves and "fd" in curves and s.n == 1:
        shortfall = max(0.0, float(np.max(curves["hd"] - curves["fd"])))
        out.append(_le("coverage.fd_above_hd", g, 0.0, shortfall))
    ks = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
    ps = [A.association_probability(s.with_(k=k)) for k in ks]
    out.append(_le("association.monotone_in_k", g, 0.0, max(0.0, -float(np.min(np.diff(ps))))))
    return out


# --- Monte Carlo and independence ---------------------------------------------------

def _mc_checks(s: Scenario, trials: int, seed: int, mc_tol: float | None,
               groups: set) -> list[Check]:
    out = []
    p = A.association_probability(s)
    d = derive_densities(s, p)
    betas = 10.0 ** (BETA_GRID_DB / 10.0)

    def tol(default):
        return default if mc_tol is None else mc_tol

    if "monte-carlo" in groups:
        g = "monte-carlo"
        est = S.estimate_association(s, trials, seed)
        z = (est.mean - p) / est.stderr if est.stderr > 0 else (0.0 if est.mean == p else math.inf)
        out.append(_le("mc.association_z", g, tol(3.0), abs(z), analytic=p, mc=est.mean,
                       stderr=est.stderr))
    modes = []
    if p > 0:
        modes.append("cellular")
    modes += [m for m, lam in (("hd", d.lambda_hd_tx), ("fd", d.lambda_fd)) if lam > 0]
    for m in modes:
        sample = S.simulate_sinr(s, m, trials, seed, d=d)
        if m == "cellular":
            ana = np.array([A.cellular_coverage(b, s, p) for b in betas])
            rate = A.cellular_rate(s, p).rate_nats
        else:
            ana = np.array([A.d2d_coverage(b, m, s, d) for b in betas])
            rate = A.d2d_rate(m, s, d).rate_nats
        mc = np.array([np.mean(sample.sinr >= b) for b in betas])
        if "monte-carlo" in groups:
            g = "monte-carlo"
            out.append(_le(f"mc.coverage.{m}", g, tol(0.03), float(np.max(np.abs(mc - ana))),
                           beta_db=BETA_GRID_DB.tolist(), analytic=ana.tolist(),
                           mc=mc.tolist(), resampled=sample.resampled))
            r_est = S.Estimate.from_samples(np.log1p(sample.sinr), seed)
            out.append(_le(f"mc.rate.{m}", g, tol(0.05), abs(r_est.mean - rate) / rate,
                           analytic=rate, mc=r_est.mean, stderr=r_est.stderr))
        if "assumptions" in groups and m != "cellular":
            g = "assumptions"
            ind = S.simulate_sinr(s, m, trials, seed, d=d, independent_modes=True)
            mc_ind = np.array([np.mean(ind.sinr >= b) for b in betas])
            out.append(_le(f"assumption.independence.{m}", g, tol(0.03),
                           float(np.max(np.abs(mc - ana))),
                           dependence_gap=float(np.max(np.abs(mc - mc_ind))),
                           mc_independent=mc_ind.tolist()))
    return out


def run_validation(s: Scenario, trials: int = 10_000, seed: int = 1,
                   only: list[str] | None = None, mc_tol: float | None = None) -> Report:
    """Run the checks of ``only`` (default all groups); ``mc_tol`` replaces
    the tolerance of every Monte Carlo and assumption check."""
    groups = set(GROUPS if not only else only)
    unknown = groups - set(GROUPS)
    if unknown:
        raise ValueError(f"unknown check group(s): {', '.join(sorted(unknown))}")
    report = Report(s, seed, trials)
    if "special-functions" in groups:
        report.checks += _special_checks()
    if "closed-forms" in groups:
        report.checks += _closed_form_checks(s, report)
    if "analytic" in groups:
        report.checks += _analytic_checks(s)
    if groups & {"monte-carlo", "assumptions"}:
        report.checks += _mc_checks(s, trials, seed, mc_tol, groups)
    return report
