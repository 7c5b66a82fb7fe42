"""``d2dfd`` command line: association, coverage, rate and throughput sweeps
plus the validation battery.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analytic as A
from . import simulator as S
from .model import ScenarioError, REFERENCE_TEXT, derive_densities, parse_scenario
from .validation import GROUPS, run_validation

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_BETA_GRID = "-10:20:2"
DEFAULT_K_GRID = "0,0.25,0.5,1,2,4"


class UsageError(Exception):
    pass


# --- argument helpers -------------------------------------------------------------

def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included when hit) or a comma list; strictly increasing."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise UsageError(f"grid {text!r}: expected start:stop:step")
            start, stop, step = parts
            if not step > 0:
                raise UsageError(f"grid {text!r}: step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 12) for i in range(max(count, 0))]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"grid {text!r}: {exc}") from None
    if not values:
        raise UsageError(f"grid {text!r} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"grid {text!r} must be strictly increasing")
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"grid {text!r} has non-finite values")
    return values


def parse_modes(text: str) -> list[str]:
    modes = [m.strip().lower() for m in text.split(",") if m.strip()]
    bad = [m for m in modes if m not in A.MODES]
    if bad or not modes:
        raise UsageError(f"--mode expects a subset of {','.join(A.MODES)}, got {text!r}")
    return list(dict.fromkeys(modes))


def load_config(args) -> "A.Scenario":
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    else:
        text = REFERENCE_TEXT
    # overrides replace earlier assignments of the same key
    lines = text.splitlines()
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key = item.split("=", 1)[0].strip()
        drop = {"delta", "delta_db"} if key in ("delta", "delta_db") else {key}
        lines = [ln for ln in lines if ln.split("#", 1)[0].split("=", 1)[0].strip() not in drop]
        lines.append(item)
    if args.n is not None:
        lines = [ln for ln in lines if ln.split("#", 1)[0].split("=", 1)[0].strip() != "n"]
        lines.append(f"n = {args.n}")
    return parse_scenario("\n".join(lines) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else Path(".")


_COVERAGE_PLOT = '''"""Coverage versus SINR threshold, analytic lines and Monte Carlo markers."""
import csv
import sys

import matplotlib.pyplot as plt

files = {files!r}
fig, ax = plt.subplots()
for mode, name in files.items():
    with open(name) as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["x"]) for r in rows]
    line, = ax.plot(x, [float(r["analytic"]) for r in rows], label=mode + " analytic")
    ax.errorbar(x, [float(r["mc_mean"]) for r in rows],
                yerr=[2 * float(r["mc_stderr"]) for r in rows],
                fmt="o", color=line.get_color(), label=mode + " simulation")
ax.set_xlabel("SINR threshold beta (dB)")
ax.set_ylabel("coverage probability")
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "coverage.png", dpi=150)
'''

_THROUGHPUT_PLOT = '''"""Sum throughput versus bias factor k."""
import csv
import sys

import matplotlib.pyplot as plt

with open({name!r}) as fh:
    rows = list(csv.DictReader(fh))
x = [float(r["x"]) for r in rows]
fig, ax = plt.subplots()
for col in ("cellular", "d2d", "total"):
    ax.plot(x, [float(r[col]) for r in rows], marker="o", label=col)
ax.set_xlabel("bias factor k")
ax.set_ylabel("throughput (nats/s/Hz/m^2)")
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "throughput.png", dpi=150)
'''


# --- commands ------------------------------------------------------------------

def cmd_assoc(args) -> int:
    s = load_config(args)
    p = A.association_probability(s)
    est = S.estimate_association(s, args.trials or 100_000, args.seed, workers=args.workers)
    if est.stderr > 0:
        z = (est.mean - p) / est.stderr
    else:
        z = 0.0 if est.mean == p else math.inf
    print(f"analytic  {p!r}")
    print(f"mc        {est.mean!r}")
    print(f"stderr    {est.stderr!r}")
    print(f"z         {z!r}")
    print(f"trials    {est.trials}")
    if args.out:
        write_csv(_out_dir(args) / "assoc.csv", ["k", "analytic", "mc_mean", "mc_stderr", "trials"],
                  [[s.k, p, est.mean, est.stderr, est.trials]])
    return EXIT_OK


def cmd_coverage(args) -> int:
    s = load_config(args)
    grid = parse_grid(args.grid or DEFAULT_BETA_GRID)
    modes = parse_modes(args.mode or "cellular,hd,fd")
    trials = args.trials or 2000
    p = A.association_probability(s)
    d = derive_densities(s, p)
    out = _out_dir(args)
    betas = [10.0 ** (x / 10.0) for x in grid]
    files = {}
    for mode in modes:
        ests = S.estimate_coverage_curve(s, betas, mode, trials, args.seed, d=d,
                                         workers=args.workers)
        rows = []
        for x, b, e in zip(grid, betas, ests):
            ana = A.coverage(A.CoverageQuery(b, mode), s, d)
            rows.append([x, ana, e.mean, e.stderr, e.trials])
        path = out / f"coverage_{mode}.csv"
        write_csv(path, ["x", "analytic", "mc_mean", "mc_stderr", "trials"], rows)
        files[mode] = path.name
        print(f"wrote {path}")
    (out / "plot_coverage.py").write_text(_COVERAGE_PLOT.format(files=files), encoding="utf-8")
    return EXIT_OK


def cmd_rate(args) -> int:
    s = load_config(args)
    modes = parse_modes(args.mode or "cellular,hd,fd")
    trials = args.trials or 10_000
    p = A.association_probability(s)
    d = derive_densities(s, p)
    rows = []
    for mode in modes:
        ana = A.cellular_rate(s, p).rate_nats if mode == "cellular" else A.d2d_rate(mode, s, d).rate_nats
        e = S.estimate_rate(s, mode, trials, args.seed, d=d, workers=args.workers)
        rows.append([mode, ana, e.mean, e.stderr, e.trials])
        print(f"{mode:9s} analytic {ana:.6g}  mc {e.mean:.6g} +/- {e.stderr:.2g}  "
              f"rel.gap {abs(e.mean - ana) / ana:.3%}")
    if args.out:
        write_csv(_out_dir(args) / "rate.csv", ["mode", "analytic", "mc_mean", "mc_stderr", "trials"],
                  rows)
    return EXIT_OK


def cmd_throughput(args) -> int:
    s = load_config(args)
    grid = parse_grid(args.grid or DEFAULT_K_GRID)
    if grid[0] < 0:
        raise UsageError("k grid must be nonnegative")
    rows = []
    for k in grid:
        t = A.sum_throughput(s.with_(k=k), fd_pair_doubling=args.fd_pair_doubling)
        rows.append([k, t.cellular, t.d2d, t.total])
        print(f"k={k:<6g} cellular {t.cellular:.6g}  d2d {t.d2d:.6g}  total {t.total:.6g}")
    out = _out_dir(args)
    path = out / "throughput.csv"
    write_csv(path, ["x", "cellular", "d2d", "total"], rows)
    (out / "plot_throughput.py").write_text(_THROUGHPUT_PLOT.format(name=path.name),
                                            encoding="utf-8")
    totals = [r[3] for r in rows]
    spread = (max(totals) - min(totals)) / (sum(totals) / len(totals))
    print(f"relative spread {spread:.4%}  argmax k={grid[int(np.argmax(totals))]:g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    s = load_config(args)
    only = [g.strip() for g in args.only.split(",")] if args.only else None
    if only and any(g not in GROUPS for g in only):
        raise UsageError(f"--only expects a subset of {','.join(GROUPS)}, got {args.only!r}")
    report = run_validation(s, trials=args.trials or 10_000, seed=args.seed, only=only,
                            mc_tol=args.mc_tol)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.group:18s} {c.name:34s} "
              f"observed={c.observed:.3e} tol={c.tolerance:.1e}")
    for key, val in report.decisions.items():
        print(f"decision {key} = {val}")
    doc = json.dumps(report.as_dict(), indent=2, sort_keys=True, default=str) + "\n"
    if args.out:
        path = _out_dir(args) / "validation.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(doc, encoding="utf-8")
        print(f"wrote {path}")
    if not report.passed:
        print("validation failed: " + ", ".join(report.failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# --- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (default: built-in reference scenario)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one scenario key; repeatable")
    common.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    common.add_argument("--trials", type=int, help="Monte Carlo drops per estimate")
    common.add_argument("--out", help="output directory")
    common.add_argument("--grid", help="start:stop:step or comma list (beta in dB, or k)")
    common.add_argument("--mode", help="comma list from cellular,hd,fd")
    common.add_argument("--n", type=int, help="pairing neighbor order")
    common.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo trials")

    parser = argparse.ArgumentParser(prog="d2dfd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("assoc", parents=[common], help="association probability vs simulation")
    sub.add_parser("coverage", parents=[common], help="coverage sweep over beta (dB)")
    sub.add_parser("rate", parents=[common], help="average rates vs simulation")
    p = sub.add_parser("throughput", parents=[common], help="sum throughput sweep over k")
    p.add_argument("--fd-pair-doubling", action="store_true",
                   help="count every FD link twice in the D2D throughput")
    p = sub.add_parser("validate", parents=[common], help="run the oracle battery")
    p.add_argument("--only", help=f"comma list of groups: {','.join(GROUPS)}")
    p.add_argument("--mc-tol", type=float, help="replace every Monte Carlo tolerance")
    return parser


COMMANDS = {
    "assoc": cmd_assoc,
    "coverage": cmd_coverage,
    "rate": cmd_rate,
    "throughput": cmd_throughput,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.trials is not None and args.trials < 1:
        print("error: --trials must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
