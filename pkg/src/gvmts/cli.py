"""Command-line front end for the GvM spectral toolkit.

Parameters travel as JSON files ({"k": ..., "sigma2": ..., "mus": [...],
"kappas": [...]}), series as CSV files with header ``re,im``.  Angles are
radians in (-pi, pi].  All numeric output is serialized at full double
precision.  Exit code 0 means no error surfaced; data or numeric errors
exit 1 and argparse usage errors exit 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .errors import GvmError
from .estimation import (
    ComplexSeries,
    SolverConfig,
    burg_entropy,
    periodogram,
    sample_acvf,
    solve_moments,
)
from .gaussian import SimConfig, build_sigma, simulate, temporal_entropy
from .spectrum import (
    GvMParams,
    _grid_angles,
    _log_g0,
    gvm_acvf,
    gvm_cdf,
    gvm_density,
    gvm_tabulated,
    kl_information,
)

_TWO_PI = 2.0 * math.pi


def _load_params(path: str) -> GvMParams:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise GvmError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise GvmError(f"{path}: expected a JSON object")
    missing = [key for key in ("k", "sigma2", "mus", "kappas") if key not in raw]
    if missing:
        raise GvmError(f"{path}: missing keys {missing}")
    k = raw["k"]
    if not isinstance(k, int) or k < 1:
        raise GvmError(f"{path}: k must be a positive integer")
    for name in ("mus", "kappas"):
        if not isinstance(raw[name], list) or len(raw[name]) != k:
            raise GvmError(f"{path}: {name} must be an array of length k={k}")
    try:
        return GvMParams(
            sigma2=float(raw["sigma2"]),
            mus=tuple(float(v) for v in raw["mus"]),
            kappas=tuple(float(v) for v in raw["kappas"]),
        )
    except (TypeError, ValueError) as exc:
        raise GvmError(f"{path}: invalid parameters: {exc}")


def _load_series(path: str) -> ComplexSeries:
    rows = []
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise GvmError(f"{path}: empty file")
        if [c.strip().lower() for c in header] != ["re", "im"]:
            raise GvmError(f"{path}: line 1: expected header 're,im'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise GvmError(f"{path}: line {lineno}: expected two columns")
            try:
                re, im = float(row[0]), float(row[1])
            except ValueError:
                raise GvmError(f"{path}: line {lineno}: values must be numeric")
            if not (math.isfinite(re) and math.isfinite(im)):
                raise GvmError(f"{path}: line {lineno}: values must be finite")
            rows.append(complex(re, im))
    if len(rows) < 2:
        raise GvmError(f"{path}: a series needs at least two observations")
    return ComplexSeries(np.array(rows))


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row]
            )


def _emit_json(obj, out: Optional[str]) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _params_dict(p: GvMParams) -> dict:
    return {
        "k": p.k,
        "sigma2": p.sigma2,
        "mus": list(p.mus),
        "kappas": list(p.kappas),
    }


def _cmd_spectrum(args) -> int:
    p = _load_params(args.params)
    if args.grid < 2:
        raise GvmError("--grid must be >= 2")
    theta = _grid_angles(args.grid)
    dens = np.atleast_1d(gvm_density(p, theta))
    cdf = np.atleast_1d(gvm_cdf(p, theta))
    _write_csv(args.out, ["theta", "density", "cdf"], zip(theta, dens, cdf))
    return 0


def _cmd_cdf_at(args) -> int:
    p = _load_params(args.params)
    thetas = [float(t) for t in args.theta]
    values = gvm_cdf(p, np.array(thetas))
    _emit_json(
        [{"theta": t, "cdf": float(v)} for t, v in zip(thetas, np.atleast_1d(values))],
        args.out,
    )
    return 0


def _cmd_acvf(args) -> int:
    p = _load_params(args.params)
    if args.max_lag < 1:
        raise GvmError("--max-lag must be >= 1")
    acv = gvm_acvf(p, args.max_lag)
    rows = [(r, acv.nu(r), acv.xi(r)) for r in range(args.max_lag + 1)]
    _write_csv(args.out, ["lag", "re", "im"], rows)
    return 0


def _cmd_estimate(args) -> int:
    x = _load_series(args.input)
    k = args.order
    if k < 1:
        raise GvmError("--order must be >= 1")
    if x.n <= k:
        raise GvmError(f"series too short: need more than k={k} observations")
    acv = sample_acvf(x, k)
    fit = solve_moments(acv, k, cfg=SolverConfig())
    report = {
        "params": _params_dict(fit.params),
        "residual_norm": fit.residual_norm,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "sample_acvf": {
            "sigma2": acv.sigma2,
            "lags": [
                {"r": r, "re": acv.nu(r), "im": acv.xi(r)} for r in range(1, k + 1)
            ],
        },
    }
    _emit_json(report, args.out)
    return 0


def _cmd_simulate(args) -> int:
    p = _load_params(args.params)
    cfg = SimConfig(length=args.length, seed=args.seed, method=args.method)
    x = simulate(p, cfg)
    _write_csv(args.out, ["re", "im"], zip(x.values.real, x.values.imag))
    return 0


def _cmd_entropy(args) -> int:
    from .spectrum import gvm_entropy

    p = _load_params(args.params)
    if p.sigma2 == 0.0:
        raise GvmError("degenerate model: sigma2 = 0 has no entropy")
    # Burg entropy of the model density in closed form: the harmonic terms
    # integrate to zero, leaving 2*pi*log(sigma2/(2*pi*G_0)).
    burg = _TWO_PI * (math.log(p.sigma2) - math.log(_TWO_PI) - _log_g0(p.shape, None, None))
    model = build_sigma(gvm_acvf(p, p.k))
    report = {
        "spectral_entropy": gvm_entropy(p),
        "burg_entropy": burg,
        "temporal_entropy": temporal_entropy(model),
        "order": p.k,
    }
    _emit_json(report, args.out)
    return 0


def _cmd_kl(args) -> int:
    pf = _load_params(args.params)
    pg = _load_params(args.input)
    if args.grid < 4 or args.grid % 2 != 0:
        raise GvmError("--grid must be an even integer >= 4")
    f = gvm_tabulated(pf, args.grid)
    g = gvm_tabulated(pg, args.grid)
    _emit_json({"kl": kl_information(f, g)}, args.out)
    return 0


def _cmd_periodogram(args) -> int:
    x = _load_series(args.input)
    pg = periodogram(x)
    _write_csv(args.out, ["freq", "value"], zip(pg.freqs, pg.values))
    return 0


def _cmd_temporal_entropy(args) -> int:
    p = _load_params(args.params)
    order = args.order if args.order is not None else p.k
    if order < 1:
        raise GvmError("--order must be >= 1")
    model = build_sigma(gvm_acvf(p, order))
    _emit_json({"temporal_entropy": temporal_entropy(model), "order": order}, args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gvmts",
        description=(
            "Maximum-entropy spectral analysis of stationary complex-valued "
            "time series with generalized von Mises spectra."
        ),
        epilog=(
            "Angles are radians in (-pi, pi].  The GVM_TOL environment "
            "variable overrides the default numerical tolerance (1e-12)."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="tabulate density and d.f. on a grid")
    sp.add_argument("--params", required=True, help="model parameter JSON file")
    sp.add_argument("--grid", type=int, default=512, help="number of grid nodes")
    sp.add_argument("--out", required=True, help="output CSV (theta,density,cdf)")
    sp.set_defaults(func=_cmd_spectrum)

    sp = sub.add_parser("cdf-at", help="spectral d.f. at given angles")
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", default=None, help="optional JSON output path")
    sp.add_argument("theta", nargs="+", help="angles in [-pi, pi]")
    sp.set_defaults(func=_cmd_cdf_at)

    sp = sub.add_parser("acvf", help="model autocovariances up to a lag")
    sp.add_argument("--params", required=True)
    sp.add_argument("--max-lag", type=int, required=True)
    sp.add_argument("--out", required=True, help="output CSV (lag,re,im)")
    sp.set_defaults(func=_cmd_acvf)

    sp = sub.add_parser("estimate", help="fit model parameters to a series")
    sp.add_argument("--input", required=True, help="series CSV with header re,im")
    sp.add_argument("--order", type=int, required=True, help="model order k")
    sp.add_argument("--out", default=None, help="optional JSON output path")
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("simulate", help="simulate a Gaussian path")
    sp.add_argument("--params", required=True)
    sp.add_argument("--length", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument(
        "--method",
        choices=["exact-cholesky", "spectral"],
        default="exact-cholesky",
    )
    sp.add_argument("--out", required=True, help="output CSV (re,im)")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("entropy", help="spectral, Burg, and temporal entropy")
    sp.add_argument("--params", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_entropy)

    sp = sub.add_parser("kl", help="divergence between two model spectra")
    sp.add_argument("--params", required=True, help="numerator model JSON")
    sp.add_argument("--input", required=True, help="denominator model JSON")
    sp.add_argument("--grid", type=int, default=4096)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_kl)

    sp = sub.add_parser("periodogram", help="periodogram of a series")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True, help="output CSV (freq,value)")
    sp.set_defaults(func=_cmd_periodogram)

    sp = sub.add_parser("temporal-entropy", help="temporal entropy at order k")
    sp.add_argument("--params", required=True)
    sp.add_argument("--order", type=int, default=None, help="defaults to model k")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_temporal_entropy)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GvmError, ValueError, OverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
