"""Command-line front end: figure-data emitters, sweeps, protocol runs,
and the validation suite.

Every command reads an optional INI config file (one flat section per
command), applies explicit flags on top, echoes the fully resolved
configuration into the output header, and writes plot-ready CSV or JSON.
Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import thermo
from .estimators import EstimatorSpec, estimator_sensitivity
from .model import ChainSpec
from .protocol import ProtocolConfig, run_ensemble, scaling_exponent, write_traces
from .records import SweepRecord, records_to_rows, write_table
from .validate import run_validation

__all__ = ["main"]


def _parse_floats(text: str) -> list:
    """'a,b,c' or 'start:stop:count' (inclusive linspace)."""
    text = str(text)
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    return [float(v) for v in text.split(",")]


def _parse_ints(text: str) -> list:
    return [int(round(v)) for v in _parse_floats(text)]


class ConfigError(Exception):
    pass


class _Resolver:
    """defaults < config file section < explicit command-line flags."""

    def __init__(self, args, section: str):
        self.args = args
        self.cfg = {}
        if getattr(args, "config", None):
            parser = configparser.ConfigParser()
            read = parser.read(args.config)
            if not read:
                raise ConfigError(f"config file {args.config!r} not found")
            if parser.has_section(section):
                self.cfg = dict(parser.items(section))
        self.resolved = {}

    def get(self, key: str, default, cast=lambda v: v):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            val = flag if not isinstance(flag, str) else cast(flag)
        elif key in self.cfg:
            val = cast(self.cfg[key])
        else:
            val = default
        self.resolved[key] = val
        return val


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write(records, out, fmt, config) -> None:
    cols, rows = records_to_rows(records)
    write_table(out, fmt, cols, rows, config)


# ---------------------------------------------------------------------------
# figure commands
# ---------------------------------------------------------------------------
def cmd_fig1(args) -> int:
    res = _Resolver(args, "fig1")
    res.get("seed", 0, int)
    betas = res.get("beta", [20.0, 100.0, 500.0], _parse_floats)
    n = res.get("n", 100_000, int)
    j = res.get("j", 1.0, float)
    ratios = res.get("h-over-j", _parse_floats("0:2:201"), _parse_floats)
    out = res.get("out", "fig1.csv")
    fmt = res.get("format", "csv")
    threads = res.get("threads", 1, int)

    points = [(b, r) for b in sorted(betas) for r in sorted(ratios)]

    def one(point):
        b, r = point
        spec = ChainSpec("XX", n, j, r * j, b)
        return SweepRecord(
            "XX", n, j, r * j, 0.0, b, "qfi_h_per_spin",
            thermo.qfi_h(spec).per_spin, thermo.PROV_EXACT,
        )

    _write(_pmap(one, points, threads), out, fmt, res.resolved)
    return 0


def cmd_fig2(args) -> int:
    res = _Resolver(args, "fig2")
    res.get("seed", 0, int)
    beta = res.get("beta", 100.0, float)
    n = res.get("n", 10_000, int)
    j = res.get("j", 1.0, float)
    ratios = res.get("h-over-j", _parse_floats("0:0.99:100"), _parse_floats)
    out = res.get("out", "fig2.csv")
    fmt = res.get("format", "csv")

    domain_nonempty = 1.0 / beta < j  # otherwise no field satisfies the window
    columns = ["model", "N", "J", "h", "gamma", "beta", "qfi_h_per_spin"]
    if domain_nonempty:
        columns += ["qfi_h_approx_per_spin"]
    columns += ["window_ok"]
    rows = []
    for r in sorted(ratios):
        spec = ChainSpec("XX", n, j, r * j, beta)
        row = {
            "model": "XX", "N": n, "J": j, "h": r * j, "gamma": 0.0, "beta": beta,
            "qfi_h_per_spin": thermo.qfi_h(spec).per_spin,
        }
        if domain_nonempty:
            approx = thermo.qfi_h_approx(spec)
            row["qfi_h_approx_per_spin"] = approx.per_spin
            row["window_ok"] = approx.window_ok
        else:
            row["window_ok"] = False
        rows.append(row)
    write_table(out, fmt, columns, rows, res.resolved)
    return 0


def cmd_fig3(args) -> int:
    res = _Resolver(args, "fig3")
    res.get("seed", 0, int)
    betas = res.get("beta", [100.0, 2.0], _parse_floats)
    n = res.get("n", 1000, int)
    h = res.get("h", 1.0, float)
    ratios = res.get("j-over-h", _parse_floats("0.5:1.5:101"), _parse_floats)
    out = res.get("out", "fig3.csv")
    fmt = res.get("format", "csv")
    threads = res.get("threads", 1, int)

    points = [(b, r) for b in sorted(betas) for r in sorted(ratios)]

    def one(point):
        b, r = point
        spec = ChainSpec("XX", n, r * h, h, b)
        opt = thermo.qfi_j(spec)
        est = estimator_sensitivity(spec, EstimatorSpec("Jz", "J"))
        return [
            SweepRecord("XX", n, r * h, h, 0.0, b, "qfi_j_per_spin",
                        opt.per_spin, opt.provenance),
            SweepRecord("XX", n, r * h, h, 0.0, b, "estimator_j_per_spin",
                        est.per_spin, est.provenance, estimator="Jz"),
        ]

    records = [rec for pair in _pmap(one, points, threads) for rec in pair]
    _write(records, out, fmt, res.resolved)
    return 0


def cmd_fig4a(args) -> int:
    res = _Resolver(args, "fig4a")
    res.get("seed", 0, int)
    beta = res.get("beta", 1000.0, float)
    n = res.get("n", 1000, int)
    j = res.get("j", 1.0, float)
    ratios = res.get("h-over-j", _parse_floats("0:2:81"), _parse_floats)
    gammas = res.get("gamma", _parse_floats("0:1:21"), _parse_floats)
    out = res.get("out", "fig4a.csv")
    fmt = res.get("format", "csv")
    threads = res.get("threads", 1, int)

    points = [(g, r) for g in sorted(gammas) for r in sorted(ratios)]

    def one(point):
        g, r = point
        model = "XX" if g == 0.0 else "XY"
        spec = ChainSpec(model, n, j, r * j, beta, gamma=g)
        val = thermo.qfi_h(spec).per_spin
        logval = math.log10(val) if val > 0 else -math.inf
        return SweepRecord(model, n, j, r * j, g, beta,
                           "log10_qfi_h_per_spin", logval, thermo.PROV_EXACT)

    _write(_pmap(one, points, threads), out, fmt, res.resolved)
    return 0


def cmd_fig4b(args) -> int:
    res = _Resolver(args, "fig4b")
    res.get("seed", 0, int)
    beta = res.get("beta", 100.0, float)
    n = res.get("n", 10, int)
    j = res.get("j", 1.0, float)
    ratios = res.get("h-over-j", _parse_floats("0.5:1.5:11"), _parse_floats)
    out = res.get("out", "fig4b.csv")
    fmt = res.get("format", "csv")
    if n > 12:
        raise ConfigError("fig4b uses the dense oracle and is limited to n <= 12")

    records = []
    for r in sorted(ratios):
        spec = ChainSpec("XY", n, j, r * j, beta, gamma=1.0)
        opt = thermo.qfi_h(spec)
        e_jz = estimator_sensitivity(spec, EstimatorSpec("Jz", "h"))
        e_jx2 = estimator_sensitivity(spec, EstimatorSpec("JxSquared", "h"))
        records += [
            SweepRecord("XY", n, j, r * j, 1.0, beta, "qfi_h_per_spin",
                        opt.per_spin, opt.provenance),
            SweepRecord("XY", n, j, r * j, 1.0, beta, "estimator_h_per_spin",
                        e_jz.per_spin, e_jz.provenance, estimator="Jz"),
            SweepRecord("XY", n, j, r * j, 1.0, beta, "estimator_h_per_spin",
                        e_jx2.per_spin, e_jx2.provenance, estimator="JxSquared"),
        ]
    _write(records, out, fmt, res.resolved)
    return 0


# ---------------------------------------------------------------------------
# sweep / protocol / validate
# ---------------------------------------------------------------------------
_QUANTITIES = {
    "log_partition": lambda s: (thermo.log_partition(s), thermo.PROV_EXACT),
    "magnetization_z": lambda s: (thermo.magnetization_z(s), thermo.PROV_EXACT),
    "susceptibility_h": lambda s: (thermo.susceptibility_h(s), thermo.PROV_EXACT),
    "qfi_h": lambda s: (thermo.qfi_h(s).value, thermo.PROV_EXACT),
    "qfi_j": lambda s: (thermo.qfi_j(s).value, thermo.PROV_EXACT),
    "qfi_h_approx": lambda s: (thermo.qfi_h_approx(s).value, thermo.PROV_APPROX),
    "qfi_j_approx": lambda s: (thermo.qfi_j_approx(s).value, thermo.PROV_APPROX),
}


def cmd_sweep(args) -> int:
    res = _Resolver(args, "sweep")
    res.get("seed", 0, int)
    model = res.get("model", "XX")
    ns = res.get("n", [1000], _parse_ints)
    js = res.get("j", [1.0], _parse_floats)
    ratios = res.get("h-over-j", [0.5], _parse_floats)
    gammas = res.get("gamma", [0.0], _parse_floats)
    betas = res.get("beta", [100.0], _parse_floats)
    quantities = res.get("quantity", ["qfi_h"], lambda v: v.split(","))
    out = res.get("out", "sweep.csv")
    fmt = res.get("format", "csv")
    threads = res.get("threads", 1, int)
    for q in quantities:
        if q not in _QUANTITIES:
            raise ConfigError(f"unknown quantity {q!r}; choose from {sorted(_QUANTITIES)}")

    points = [
        (n, j, r, g, b)
        for n in sorted(ns) for j in sorted(js) for r in sorted(ratios)
        for g in sorted(gammas) for b in sorted(betas)
    ]

    def one(point):
        n, j, r, g, b = point
        spec = ChainSpec(model, n, j, r * j, b, gamma=g)
        recs = []
        for q in quantities:
            val, prov = _QUANTITIES[q](spec)
            recs.append(SweepRecord(model, n, j, r * j, g, b, q, val, prov))
        return recs

    records = [rec for grp in _pmap(one, points, threads) for rec in grp]
    _write(records, out, fmt, res.resolved)
    return 0


def cmd_protocol(args) -> int:
    res = _Resolver(args, "protocol")
    ns = res.get("n", [1000, 4000, 16000], _parse_ints)
    seeds = res.get("seeds", 20, int)
    beta = res.get("beta", 1000.0, float)
    nu = res.get("nu", 50, int)
    kmax = res.get("kmax", 3, int)
    margin = res.get("margin", 3.0, float)
    h_true = res.get("h-true", 0.01, float)
    h_min = res.get("h-min", 0.0, float)
    h_max = res.get("h-max", 0.02, float)
    policy = res.get("floor-policy", "run_to_kmax")
    seed = res.get("seed", 0, int)
    out = res.get("out", "protocol")

    base = ProtocolConfig(
        h_true=h_true, h_min=h_min, h_max=h_max, beta=beta, n=ns[0],
        nu=nu, k_max=kmax, retune_margin=margin, floor_policy=policy, seed=seed,
    )
    traces = run_ensemble(base, sorted(ns), seeds)
    write_traces(f"{out}.traces.jsonl", traces)

    summary = {"config": res.resolved, "rng": traces[0].rng_algorithm}
    try:
        final = scaling_exponent(traces, k=kmax)
        summary["slope"] = final.slope
        summary["stderr"] = final.stderr
        summary["k"] = final.k
        summary["medians"] = dict(zip(map(str, final.n_values), final.medians))
    except ValueError as exc:
        summary["slope_error"] = str(exc)
    first = scaling_exponent(traces, k=1)
    summary["slope_k1"] = first.slope
    summary["stderr_k1"] = first.stderr
    with open(f"{out}.summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return 0


def cmd_validate(args) -> int:
    res = _Resolver(args, "validate")
    quick = res.get("quick", False, lambda v: v in ("1", "true", "yes"))
    tol_scale = res.get("tol-scale", 1.0, float)
    checks, ok = run_validation(quick=quick, tol_scale=tol_scale)
    width = max(len(c.name) for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{c.name:<{width}}  residual={c.residual:.3e}  tol={c.tol:.3e}  {status}")
    print("validation:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (one section per command)")
    p.add_argument("--out", help="output path")
    p.add_argument("--format", choices=["csv", "json"], dest="format")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spinchain-metrology",
        description="Thermal spin-chain magnetometry: sensitivities, sweeps, "
                    "adaptive protocol, validation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    specs = {
        "fig1": (cmd_fig1, ["--beta", "--n", "--j", "--h-over-j"]),
        "fig2": (cmd_fig2, ["--beta", "--n", "--j", "--h-over-j"]),
        "fig3": (cmd_fig3, ["--beta", "--n", "--h", "--j-over-h"]),
        "fig4a": (cmd_fig4a, ["--beta", "--n", "--j", "--h-over-j", "--gamma"]),
        "fig4b": (cmd_fig4b, ["--beta", "--n", "--j", "--h-over-j"]),
        "sweep": (cmd_sweep, ["--model", "--beta", "--n", "--j", "--h-over-j",
                              "--gamma", "--quantity"]),
        "protocol": (cmd_protocol, ["--beta", "--n", "--seeds", "--nu", "--kmax",
                                    "--margin", "--h-true", "--h-min", "--h-max",
                                    "--floor-policy"]),
        "validate": (cmd_validate, ["--quick", "--tol-scale"]),
    }
    for name, (fn, flags) in specs.items():
        p = sub.add_parser(name)
        _add_common(p)
        for flag in flags:
            if flag == "--quick":
                p.add_argument(flag, action="store_const", const="true")
            else:
                p.add_argument(flag)
        p.set_defaults(fn=fn)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
