"""Scenario parameters, unit conversion and derived process densities."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from pathlib import Path

__all__ = [
    "Scenario",
    "Densities",
    "GeneralLaplaceParams",
    "ScenarioError",
    "dbm_to_watts",
    "watts_to_dbm",
    "db_to_linear",
    "linear_to_db",
    "parse_scenario",
    "load_scenario",
    "derive_densities",
    "reference_scenario",
    "REFERENCE_TEXT",
]


class ScenarioError(ValueError):
    """Invalid scenario document or parameter value.

    ``key`` names the offending parameter and ``line`` the 1-based line of the
    document it came from (``None`` when not tied to a line).
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


def dbm_to_watts(x: float) -> float:
    if not math.isfinite(x):
        raise ValueError(f"power must be finite, got {x!r} dBm")
    return 10.0 ** ((x - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    if not w > 0 or not math.isfinite(w):
        raise ValueError(f"power must be positive and finite, got {w!r} W")
    return 10.0 * math.log10(w) + 30.0


def db_to_linear(x: float) -> float:
    if not math.isfinite(x):
        raise ValueError(f"ratio must be finite, got {x!r} dB")
    return 10.0 ** (x / 10.0)


def linear_to_db(v: float) -> float:
    if not v > 0 or not math.isfinite(v):
        raise ValueError(f"ratio must be positive and finite, got {v!r}")
    return 10.0 * math.log10(v)


@dataclass(frozen=True)
class Scenario:
    """All physical and system parameters, in linear SI units.

    Powers are watts, densities points per square metre. ``w_total`` and
    ``m_bar`` only matter for the finite-population interference transform
    used when ``n > 1``; ``m_bar=None`` lets that code pick the value matched
    to the interferer density.
    """

    lambda_b: float
    lambda_u: float
    p_b: float
    p_d: float
    gamma: float
    k: float
    alpha: float
    sigma2: float
    delta: float
    p_fd: float
    n: int = 1
    w_total: int = 200
    m_bar: float | None = None

    def __post_init__(self):
        for name in ("lambda_b", "lambda_u", "p_b", "p_d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ScenarioError(f"{name} > 0 violated (got {v!r})", key=name)
        for name in ("gamma", "sigma2", "k"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ScenarioError(f"{name} >= 0 violated (got {v!r})", key=name)
        if not self.alpha > 2 or not math.isfinite(self.alpha):
            raise ScenarioError(f"alpha > 2 violated (got {self.alpha!r})", key="alpha")
        if not 0 <= self.delta <= 1:
            raise ScenarioError(f"0 <= delta <= 1 violated (got {self.delta!r})", key="delta")
        if not 0 <= self.p_fd <= 1:
            raise ScenarioError(f"0 <= p_fd <= 1 violated (got {self.p_fd!r})", key="p_fd")
        if int(self.n) != self.n or self.n < 1:
            raise ScenarioError(f"n >= 1 integer violated (got {self.n!r})", key="n")
        object.__setattr__(self, "n", int(self.n))
        if int(self.w_total) != self.w_total or self.w_total < self.n + 1:
            raise ScenarioError(
                f"w_total >= n + 1 violated (got {self.w_total!r}, n={self.n})", key="w_total"
            )
        object.__setattr__(self, "w_total", int(self.w_total))
        if self.m_bar is not None and not self.m_bar > 1:
            raise ScenarioError(f"m_bar > 1 violated (got {self.m_bar!r})", key="m_bar")

    @property
    def p_hd(self) -> float:
        return 1.0 - self.p_fd

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class Densities:
    p_assoc: float
    lambda_c: float
    lambda_d: float
    lambda_hd_tx: float
    lambda_fd: float


@dataclass(frozen=True)
class GeneralLaplaceParams:
    """Finite-population parameters: ``w_total`` UEs, ``m_bar`` mean transmitters."""

    w_total: int
    m_bar: float

    def __post_init__(self):
        if int(self.w_total) != self.w_total or self.w_total < 2:
            raise ValueError(f"w_total must be an integer >= 2, got {self.w_total!r}")
        if not self.m_bar > 1:
            raise ValueError(f"m_bar > 1 violated (got {self.m_bar!r})")

    def check_order(self, n: int) -> None:
        if self.w_total < n + 1:
            raise ValueError(f"w_total >= n + 1 violated (w_total={self.w_total}, n={n})")


def derive_densities(s: Scenario, p_assoc: float) -> Densities:
    if not 0.0 <= p_assoc <= 1.0:
        raise ValueError(f"association probability must lie in [0, 1], got {p_assoc!r}")
    lambda_c = s.lambda_u * p_assoc
    lambda_d = s.lambda_u * (1.0 - p_assoc)
    return Densities(
        p_assoc=p_assoc,
        lambda_c=lambda_c,
        lambda_d=lambda_d,
        lambda_hd_tx=0.5 * lambda_d * (1.0 - s.p_fd),
        lambda_fd=lambda_d * s.p_fd,
    )


# --- scenario documents ------------------------------------------------------

REFERENCE_TEXT = """\
# Simulation parameters of the reference deployment.
lambda_b = 1e-6        # BS / m^2
lambda_u = 0.1         # UE / m^2
gamma_dbm = 0 dBm      # association threshold
sigma2_dbm = -96 dBm   # total noise power
p_b_dbm = 40 dBm
p_d_dbm = 23 dBm
alpha = 4
delta_db = -50 dB      # residual self-interference factor, 1e-5 linear
k = 1
p_fd = 0.5
n = 1
w_total = 200
m_bar = auto
"""

# key -> (kind, required). kind selects the value grammar and conversion.
_KEYS = {
    "lambda_b": ("plain", True),
    "lambda_u": ("plain", True),
    "p_b_dbm": ("dbm", True),
    "p_d_dbm": ("dbm", True),
    "gamma_dbm": ("dbm0", True),
    "sigma2_dbm": ("dbm0", True),
    "k": ("plain", False),
    "alpha": ("plain", True),
    "delta_db": ("db0", False),
    "delta": ("plain", False),
    "p_fd": ("plain", False),
    "n": ("int", False),
    "w_total": ("int", False),
    "m_bar": ("auto", False),
}

_DEFAULTS = {"k": 1.0, "p_fd": 0.5, "n": 1, "w_total": 200, "m_bar": None}

_FIELD_OF = {
    "lambda_b": "lambda_b",
    "lambda_u": "lambda_u",
    "p_b_dbm": "p_b",
    "p_d_dbm": "p_d",
    "gamma_dbm": "gamma",
    "sigma2_dbm": "sigma2",
    "k": "k",
    "alpha": "alpha",
    "delta_db": "delta",
    "delta": "delta",
    "p_fd": "p_fd",
    "n": "n",
    "w_total": "w_total",
    "m_bar": "m_bar",
}

_VALUE_RE = re.compile(r"^(?P<num>[^\s]+)\s*(?P<unit>[A-Za-z]+)?$")


def _parse_number(text: str, key: str, line: int) -> float:
    try:
        v = float(text.replace("−", "-"))
    except ValueError:
        raise ScenarioError(f"{key}: malformed number {text!r}", key=key, line=line) from None
    if math.isnan(v):
        raise ScenarioError(f"{key}: malformed number {text!r}", key=key, line=line)
    return v


def _convert(key: str, raw: str, line: int):
    kind, _ = _KEYS[key]
    if kind == "auto" and raw.strip().lower() == "auto":
        return None
    m = _VALUE_RE.match(raw.strip())
    if not m:
        raise ScenarioError(f"{key}: malformed value {raw!r}", key=key, line=line)
    num, unit = m.group("num"), m.group("unit")
    if kind in ("dbm", "dbm0"):
        if unit is not None and unit.lower() != "dbm":
            raise ScenarioError(f"{key}: expected unit dBm, got {unit!r}", key=key, line=line)
    elif kind == "db0":
        if unit is not None and unit.lower() != "db":
            raise ScenarioError(f"{key}: expected unit dB, got {unit!r}", key=key, line=line)
    elif unit is not None:
        raise ScenarioError(f"{key}: unexpected unit {unit!r}", key=key, line=line)

    v = _parse_number(num, key, line)
    if kind == "dbm":
        if not math.isfinite(v):
            raise ScenarioError(f"{key}: power must be finite", key=key, line=line)
        return dbm_to_watts(v)
    if kind in ("dbm0", "db0"):
        if v == -math.inf:
            return 0.0
        if not math.isfinite(v):
            raise ScenarioError(f"{key}: value must be finite or -inf", key=key, line=line)
        return dbm_to_watts(v) if kind == "dbm0" else db_to_linear(v)
    if kind == "int":
        if not math.isfinite(v) or v != int(v):
            raise ScenarioError(f"{key}: expected an integer, got {num!r}", key=key, line=line)
        return int(v)
    return v


def parse_scenario(text: str) -> Scenario:
    """Parse a ``key = value`` scenario document into a validated Scenario.

    Lines are ``key = value`` with optional ``#`` comments. Keys ending in
    ``_dbm`` take dBm and keys ending in ``_db`` take dB; the unit may be
    written after the number (``40 dBm``). ``gamma_dbm``, ``sigma2_dbm`` and
    ``delta_db`` accept ``-inf`` for an exact zero. ``delta`` may be given
    linearly instead of ``delta_db``. ``m_bar`` accepts ``auto``.
    """
    values: dict[str, object] = {}
    lines_of: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        body = raw_line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"expected 'key = value', got {body!r}", line=lineno)
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _KEYS:
            raise ScenarioError(f"unknown key {key!r}", key=key, line=lineno)
        if key in values:
            raise ScenarioError(f"duplicate key {key!r}", key=key, line=lineno)
        if not raw:
            raise ScenarioError(f"{key}: missing value", key=key, line=lineno)
        values[key] = _convert(key, raw, lineno)
        lines_of[key] = lineno

    if "delta" in values and "delta_db" in values:
        raise ScenarioError(
            "give exactly one of delta / delta_db", key="delta", line=lines_of["delta"]
        )
    for key, (_, required) in _KEYS.items():
        if required and key not in values:
            raise ScenarioError(f"missing required key {key!r}", key=key)
    if "delta" not in values and "delta_db" not in values:
        raise ScenarioError("missing required key 'delta_db'", key="delta_db")

    kwargs = dict(_DEFAULTS)
    for key, v in values.items():
        kwargs[_FIELD_OF[key]] = v
    try:
        return Scenario(**kwargs)
    except ScenarioError as exc:
        # re-anchor the invariant violation on the document line of its key
        src = next((k for k, f in _FIELD_OF.items() if f == exc.key and k in lines_of), None)
        raise ScenarioError(
            str(exc), key=src or exc.key, line=lines_of.get(src) if src else None
        ) from None


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def reference_scenario(**overrides) -> Scenario:
    """The reference deployment, optionally with fields replaced."""
    s = parse_scenario(REFERENCE_TEXT)
    return replace(s, **overrides) if overrides else s
