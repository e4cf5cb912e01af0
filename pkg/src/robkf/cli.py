"""Command-line front end: certification, filter runs, comparisons.

Four subcommands wrap the library for scripted use and emit CSV/JSON
for plotting:

    robkf certify --model m.json --tau 0.5        convergence certificate
    robkf run     --model m.json --kind robust    one filter, CSV trajectory
    robkf compare --model m.json                  several filters, aligned CSV
    robkf metric  P.json Q.json                   Thompson distance d_T(P, Q)

Every command is deterministic given its arguments: simulation draws
come from numpy.random.default_rng(seed) (PCG64) via standard_normal,
for the initial state x0 = x0_mean + chol(V0) z and the per-step noise
v_k alike. Numbers are written in shortest round-trip decimal form, so
re-reading a CSV reproduces the doubles exactly.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from robkf.contraction import certify, thompson_metric
from robkf.errors import (
    ConfigError,
    ModelError,
    ModelIOError,
    NumericError,
    RiskSensitiveModeUnsupported,
)
from robkf.filters import FilterConfig, compare_filters, load_observations, run_filter
from robkf.model import load_model, simulate

__all__ = ["RunManifest", "cmd_certify", "cmd_run", "cmd_compare", "cmd_metric", "main"]

log = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

_RNG_NOTE = (
    "Reproducibility: trajectories are simulated with "
    "numpy.random.default_rng(seed) (PCG64); the initial state is "
    "x0_mean + chol(V0) @ z and each step draws v_k by standard_normal, "
    "so a fixed --seed reproduces output files bit for bit. Filters use "
    "V0 from the model file as the gain covariance of step 0, then "
    "alternate prediction and reweighting."
)


@dataclass(frozen=True)
class RunManifest:
    """Normalized arguments of one CLI invocation.

    tol is recorded for provenance (flag default 1e-9) but the library
    tolerances themselves are fixed by the operations' contracts.
    """

    command: str
    model_path: Optional[str] = None
    tau: Optional[float] = None
    c: Optional[float] = None
    theta: Optional[float] = None
    q: int = 40
    N: Optional[int] = None
    steps: Optional[int] = None
    seed: Optional[int] = None
    tol: float = 1e-9
    output_path: Optional[str] = None
    kind: Optional[str] = None
    mode: str = "robust"
    obs_path: Optional[str] = None
    filters: Optional[tuple] = None


def _fmt(x) -> str:
    return repr(float(x))


def _upper_tri_names(name: str, n: int) -> list:
    return [f"{name}_{i}{j}" for i in range(1, n + 1) for j in range(i, n + 1)]


def _upper_tri_values(M: np.ndarray) -> list:
    n = M.shape[0]
    return [M[i, j] for i in range(n) for j in range(i, n)]


def _emit_csv(header: list, rows: list, output_path: Optional[str]) -> None:
    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    if output_path is None:
        write(sys.stdout)
    else:
        with open(output_path, "w", newline="") as fh:
            write(fh)


def _trajectory_row(k: int, ft) -> list:
    row = [str(k)]
    row += [_fmt(v) for v in ft.estimates[k]]
    row += [_fmt(v) for v in _upper_tri_values(ft.P_seq[k - 1])]
    row += [_fmt(v) for v in _upper_tri_values(ft.V_seq[k])]
    row.append(_fmt(ft.theta_seq[k - 1]))
    return row


def cmd_certify(manifest: RunManifest) -> int:
    model = load_model(manifest.model_path)
    cert = certify(model, tau=manifest.tau, q=manifest.q, N=manifest.N, mode=manifest.mode)
    text = json.dumps(cert.as_dict(), indent=2)
    if manifest.output_path is None:
        print(text)
    else:
        Path(manifest.output_path).write_text(text + "\n")
    return 0


def _filter_config(manifest: RunManifest) -> FilterConfig:
    return FilterConfig(
        kind=manifest.kind, tau=manifest.tau, c=manifest.c, theta=manifest.theta
    )


def cmd_run(manifest: RunManifest) -> int:
    model = load_model(manifest.model_path)
    config = _filter_config(manifest)
    if manifest.obs_path is not None:
        if manifest.steps is not None or manifest.seed is not None:
            raise ConfigError("--obs replaces --steps and --seed")
        y = load_observations(manifest.obs_path)
    else:
        if manifest.steps is None:
            raise ConfigError("run needs --steps (with optional --seed) or --obs")
        if manifest.steps < 0:
            raise ConfigError(f"--steps must be >= 0, got {manifest.steps}")
        seed = 0 if manifest.seed is None else manifest.seed
        y = simulate(model, manifest.steps, seed).observations

    ft = run_filter(model, config, y)
    n = model.n
    header = (
        ["k"]
        + [f"xhat_{i}" for i in range(1, n + 1)]
        + _upper_tri_names("P", n)
        + _upper_tri_names("V", n)
        + ["theta"]
    )
    rows = [_trajectory_row(k, ft) for k in range(1, ft.steps + 1)]
    _emit_csv(header, rows, manifest.output_path)
    return 0


def _parse_filter_spec(spec: str) -> FilterConfig:
    """Parse 'kind' or 'kind:key=value,...' with keys tau, c, theta."""
    kind, _, rest = spec.partition(":")
    kw = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq or key not in ("tau", "c", "theta"):
                raise ConfigError(f"bad filter spec item {item!r} in {spec!r}")
            try:
                kw[key] = float(value)
            except ValueError:
                raise ConfigError(f"non-numeric value in filter spec {spec!r}") from None
    return FilterConfig(kind=kind.strip(), **kw)


def cmd_compare(manifest: RunManifest) -> int:
    model = load_model(manifest.model_path)
    if manifest.filters:
        configs = [_parse_filter_spec(s) for s in manifest.filters]
    else:
        configs = [FilterConfig.standard()]
        for tau in (0.0, 0.5, 1.0):
            cert = certify(model, tau=tau, q=manifest.q, N=manifest.N)
            configs.append(FilterConfig.robust(tau, cert.c_max))
    steps = 100 if manifest.steps is None else manifest.steps
    if steps < 0:
        raise ConfigError(f"--steps must be >= 0, got {steps}")
    seed = 0 if manifest.seed is None else manifest.seed
    table = compare_filters(model, configs, steps, seed)

    n = model.n
    header = ["k"]
    for label in table.labels:
        header += [f"{label}_xhat_{i}" for i in range(1, n + 1)]
        header += _upper_tri_names(f"{label}_P", n)
        header += _upper_tri_names(f"{label}_V", n)
        header.append(f"{label}_theta")
    rows = []
    for k in range(1, steps + 1):
        row = [str(k)]
        for ft in table.runs:
            row += _trajectory_row(k, ft)[1:]
        rows.append(row)
    _emit_csv(header, rows, manifest.output_path)
    for label in table.labels:
        log.info("rmse %s = %s", label, _fmt(table.rmse(label)))
    return 0


def _load_matrix(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ModelIOError(f"matrix: {path} not readable") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"matrix: {path} is not valid JSON ({exc})") from exc
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelIOError(f"matrix: {path} is not a rectangular numeric array") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ModelIOError(f"matrix: {path} must hold a square 2-D array, got shape {arr.shape}")
    return arr


def cmd_metric(P_file: str, Q_file: str) -> int:
    P = _load_matrix(P_file)
    Q = _load_matrix(Q_file)
    print(_fmt(thompson_metric(P, Q)))
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this CLI reserves 2 for
    input errors, so remap to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(sub, model=True):
    if model:
        sub.add_argument("--model", required=True, help="model JSON file")
    sub.add_argument("--out", dest="out", default=None, help="output file (default stdout)")
    sub.add_argument("--tol", type=float, default=1e-9,
                     help="tolerance recorded in the run manifest (default 1e-9)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="robkf",
        description="Robust and risk-sensitive Kalman filters with convergence certificates.",
        epilog=_RNG_NOTE,
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    cert = sub.add_parser("certify", help="compute c_max / theta_max for a model",
                          epilog=_RNG_NOTE)
    _add_common(cert)
    cert.add_argument("--tau", type=float, required=True, help="divergence family parameter in [0, 1]")
    cert.add_argument("--q", type=int, default=40, help="Riccati burn-in length (default 40)")
    cert.add_argument("--N", type=int, default=None, help="lifted block length (default max(n, 50))")
    cert.add_argument("--mode", choices=("robust", "risk_sensitive"), default="robust")
    cert.set_defaults(func=lambda m, a: cmd_certify(m))

    run = sub.add_parser("run", help="run one filter, write its trajectory as CSV",
                         epilog=_RNG_NOTE)
    _add_common(run)
    run.add_argument("--kind", choices=("standard", "robust", "risk_sensitive"), required=True)
    run.add_argument("--tau", type=float, default=None)
    run.add_argument("--c", type=float, default=None, help="divergence budget (robust kind)")
    run.add_argument("--theta", type=float, default=None, help="risk parameter (risk_sensitive kind)")
    run.add_argument("--steps", type=int, default=None, help="simulation length")
    run.add_argument("--seed", type=int, default=None, help="simulation seed (default 0)")
    run.add_argument("--obs", default=None,
                     help="CSV of observations (header y1..yp) instead of simulating")
    run.set_defaults(func=lambda m, a: cmd_run(m))

    comp = sub.add_parser("compare", help="run several filters on one simulated trajectory",
                          epilog=_RNG_NOTE)
    _add_common(comp)
    comp.add_argument("--steps", type=int, default=None, help="simulation length (default 100)")
    comp.add_argument("--seed", type=int, default=None, help="simulation seed (default 0)")
    comp.add_argument("--q", type=int, default=40, help="certification burn-in (default 40)")
    comp.add_argument("--N", type=int, default=None, help="certification block length")
    comp.add_argument(
        "--filter", action="append", default=None, metavar="SPEC",
        help="filter spec 'standard', 'robust:tau=T,c=C', or 'risk_sensitive:tau=T,theta=H'; "
             "repeatable; default is the standard filter plus robust filters at "
             "tau in {0, 0.5, 1} with their certified c_max",
    )
    comp.set_defaults(func=lambda m, a: cmd_compare(m))

    met = sub.add_parser("metric", help="Thompson distance between two SPD matrices")
    met.add_argument("P", help="JSON file holding a square matrix")
    met.add_argument("Q", help="JSON file holding a square matrix")
    met.set_defaults(func=lambda m, a: cmd_metric(a.P, a.Q))

    return parser


def _manifest_from(args: argparse.Namespace) -> RunManifest:
    get = lambda name, default=None: getattr(args, name, default)
    tau = get("tau")
    if tau is not None and not 0.0 <= tau <= 1.0:
        raise ConfigError(f"tau must lie in [0, 1], got {tau}")
    filters = get("filter")
    return RunManifest(
        command=args.command,
        model_path=get("model"),
        tau=get("tau"),
        c=get("c"),
        theta=get("theta"),
        q=get("q", 40),
        N=get("N"),
        steps=get("steps"),
        seed=get("seed"),
        tol=get("tol", 1e-9),
        output_path=get("out"),
        kind=get("kind"),
        mode=get("mode", "robust"),
        obs_path=get("obs"),
        filters=tuple(filters) if filters else None,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("ROBKF_LOG", "error").strip().lower(), logging.ERROR)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1

    try:
        manifest = _manifest_from(args)
        log.info("manifest: %s", manifest)
        return args.func(manifest, args)
    except (ConfigError, RiskSensitiveModeUnsupported) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
