"""Command-line front end.

Subcommands: ``net`` (generate nets), ``rates`` (scan + verdict + exponent),
``verify`` (numerical certificates), ``mc`` (Monte Carlo comparison) and
``benchmark`` (kernel backends).  Every output file embeds a run manifest.

Exit codes: 0 success/PASS, 1 usage, 2 math/domain error, 3 I/O error,
4 verification FAIL.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys

import numpy as np

from . import __version__, _kernels
from .errors import NetoptError
from .hermite import (gamma_integral, log_decay_coeffs, log_series_ratio,
                      power_mixture_ratio, check_series_sandwich)
from .mcsim import Model, SimConfig, compare_equivalence, parse_payoff, weight_from_payoff
from .nets import TimeNet, balance_cutoff, equidistant, log_power_cutoff, regular_net, score, truncated_net
from .optimizer import OptimizerConfig, estimate_best
from .rates import check_power_floor, classify, fit_exponent, scan
from .weightfn import LogPowerWeight, parse_weight_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MATH = 2
EXIT_IO = 3
EXIT_FAIL = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _manifest(args: argparse.Namespace, seed=None) -> dict:
    fields = {k: v for k, v in vars(args).items()
              if k not in ("func",) and v is not None}
    return {
        "command": args.command,
        "args": {k: (list(v) if isinstance(v, tuple) else v) for k, v in fields.items()},
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
        "kernel_backend": "numba" if _kernels.USING_NUMBA else "numpy",
    }


def _write(payload, args, manifest, csv_text=None):
    out = getattr(args, "out", None)
    fmt = getattr(args, "format", None) or (
        "csv" if out and out.endswith(".csv") else "json")
    if fmt == "csv" and csv_text is not None:
        head = "".join(f"# {k}={json.dumps(v, sort_keys=True, default=str)}\n"
                       for k, v in manifest.items())
        text = head + csv_text
    else:
        doc = {"schema": "netopt/1", "manifest": manifest}
        doc.update(payload)
        text = json.dumps(doc, indent=2, default=str) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_n_list(text: str) -> list[int]:
    """"1,2,4" or a doubling range "4..1024"."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
        out = []
        n = lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    return [int(p) for p in text.split(",") if p]


def _seed_from(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("NETOPT_SEED")
    return int(env) if env else 0


def _opt_config(args) -> OptimizerConfig:
    kw = {}
    if getattr(args, "grid_size", None):
        kw["grid_size"] = args.grid_size
    if getattr(args, "dp_max_n", None):
        kw["dp_max_n"] = args.dp_max_n
    return OptimizerConfig(**kw)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_net(args) -> int:
    h = parse_weight_spec(args.h) if args.h else None
    kind = args.kind
    if kind == "equidistant":
        net = equidistant(args.n)
    elif kind == "regular":
        net = regular_net(h, args.n)
    elif kind == "truncated":
        if args.T in (None, "balance"):
            cut, _ = balance_cutoff(h, args.n)
        else:
            cut = float(args.T)
        net = truncated_net(h, args.n, cut)
    elif kind == "main3":
        if not isinstance(h, LogPowerWeight):
            raise NetoptError("the explicit log-power cutoff needs a logpow weight")
        net = truncated_net(h, args.n, log_power_cutoff(h.alpha, args.n))
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown net kind {kind}")
    payload = dict(net.to_json())
    if h is not None:
        payload["h_spec"] = h.spec_string()
        payload["score"] = score(h, net).total
    _write(payload, args, _manifest(args), csv_text=net.to_csv())
    return EXIT_OK


def cmd_rates(args) -> int:
    h = parse_weight_spec(args.h)
    n_list = _parse_n_list(args.n)
    cfg = _opt_config(args)
    table = scan(h, n_list, cfg)
    verdict = classify(h)
    payload = {
        "table": table.to_json(),
        "verdict": verdict.to_json(),
    }
    try:
        beta_hat, stderr = fit_exponent(table, args.tail_fraction)
        payload["beta_hat"] = beta_hat
        payload["beta_stderr"] = stderr
    except NetoptError as exc:
        payload["beta_hat_error"] = str(exc)
    _write(payload, args, _manifest(args), csv_text=table.to_csv())
    return EXIT_OK


def cmd_verify(args) -> int:
    lines: list[str] = []
    passed = True
    payload: dict = {"suite": args.suite}
    if args.suite == "l7":
        report = check_power_floor(args.theta, args.nmax, _opt_config(args))
        rows = [{"n": r.n, "floor": r.floor, "value_sq": r.value_sq,
                 "margin": r.margin} for r in report.rows]
        payload["rows"] = rows
        passed = report.passed
        for r in report.rows:
            lines.append(f"n={r.n}: value^2={r.value_sq:.6g} >= floor={r.floor:.6g} "
                         f"margin={r.margin:+.3g}")
    elif args.suite == "logser":
        ts = [0.0, 0.5, 0.9, 0.99, 0.999, 1.0 - 1e-6]
        rows = []
        for t in ts:
            chk = log_series_ratio(args.beta, t)
            rows.append({"t": t, "lhs": chk.lhs, "rhs": chk.rhs, "ratio": chk.ratio})
            ok = 1e-4 <= chk.ratio <= 1e4
            passed &= ok
            lines.append(f"t={t}: ratio={chk.ratio:.6g} {'ok' if ok else 'OUT OF RANGE'}")
        payload["rows"] = rows
    elif args.suite == "l1":
        rows = []
        ref = gamma_integral(args.beta)
        for t in (0.5, 0.9, 1.0 - 1e-6):
            chk = power_mixture_ratio(args.beta, t)
            rows.append({"t": t, "psi": chk.psi, "phi": chk.phi, "ratio": chk.ratio})
            lines.append(f"t={t}: psi/phi={chk.ratio:.6g}")
        t = 1.0 - 1e-6
        chk = power_mixture_ratio(args.beta, t)
        limit = chk.phi * (1.0 - t) ** 2 * (-math.log1p(-t)) ** (args.beta + 1.0)
        ok = abs(limit - ref) <= 0.02 * ref
        passed &= ok
        payload["rows"] = rows
        payload["limit"] = {"value": limit, "reference": ref}
        lines.append(f"tail limit {limit:.8g} vs gamma integral {ref:.8g}: "
                     f"{'ok' if ok else 'FAIL'}")
    elif args.suite == "l37":
        coeffs = log_decay_coeffs(args.alpha, 400)
        ts = np.array([0.0, 0.5, 0.9, 0.99])
        try:
            reports = check_series_sandwich(coeffs, ts)
            for r in reports:
                lines.append(f"t={r.t}: {r.lower:.6g} <= {r.s_sq:.6g} <= {r.upper:.6g}")
            payload["rows"] = [{"t": r.t, "w_sq": r.w_sq, "s_sq": r.s_sq} for r in reports]
        except NetoptError as exc:
            passed = False
            lines.append(str(exc))
    elif args.suite == "main-equivalence":
        rows = []
        for spec in ("const:c=1", "power:theta=1"):
            h = parse_weight_spec(spec)
            total = h.total_mass()
            sup = 0.0
            for n in _parse_n_list(args.n or "1..64"):
                est = estimate_best(h, n, _opt_config(args))
                sup = max(sup, math.sqrt(n) * est.value)
            upper_ok = sup <= total + 1e-6
            lower_ok = total <= math.sqrt(2.0) * sup * 1.1
            passed &= upper_ok and lower_ok
            rows.append({"h": spec, "integral": total, "sup_sqrt_n_value": sup})
            lines.append(f"{spec}: sup sqrt(n)*value={sup:.6g}, integral={total:.6g} "
                         f"[upper {'ok' if upper_ok else 'FAIL'}, "
                         f"lower {'ok' if lower_ok else 'FAIL'}]")
        payload["rows"] = rows
    payload["passed"] = passed
    _write(payload, args, _manifest(args))
    for line in lines:
        print(line)
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAIL


def _net_from_spec(spec: str, h=None):
    if os.path.exists(spec):
        with open(spec) as fh:
            text = fh.read()
        if spec.endswith(".csv") or text.lstrip().startswith(("#", "knot")):
            return TimeNet.from_csv(text)
        return TimeNet.from_json(text)
    kind, _, num = spec.partition(":")
    if kind == "equi":
        return equidistant(int(num))
    if kind == "regular":
        if h is None:
            raise NetoptError("regular net spec needs a weight (derived from the payoff)")
        return regular_net(h, int(num))
    raise NetoptError(f"cannot interpret net spec {spec!r}")


def cmd_mc(args) -> int:
    model = Model(args.model)
    payoff = parse_payoff(args.payoff)
    weight = weight_from_payoff(model, payoff)
    net = _net_from_spec(args.net, weight)
    seed = _seed_from(args)
    cfg = SimConfig(n_paths=args.paths, fine_steps=args.m, seed=seed,
                    quad_nodes=args.quad_nodes)
    report = compare_equivalence(model, payoff, net, cfg, weight=weight)
    _write(report.to_json(), args, _manifest(args, seed=seed))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .benchmark import run_benchmarks

    run_benchmarks(dp_size=args.dp_size, series_t=args.series_t,
                   bridge_paths=args.bridge_paths)
    return EXIT_OK


# ---------------------------------------------------------------------------

def make_parser() -> _Parser:
    p = _Parser(prog="netopt", description=__doc__)
    p.add_argument("--threads", type=int, default=None,
                   help="cap kernel parallelism (default: all cores)")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("net", help="generate a time net")
    q.add_argument("--h", help="weight spec, e.g. power:theta=1")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--kind", choices=["equidistant", "regular", "truncated", "main3"],
                   default="regular")
    q.add_argument("--T", help="cutoff for truncated nets, or 'balance'")
    q.add_argument("--out")
    q.add_argument("--format", choices=["json", "csv"])
    q.set_defaults(func=cmd_net)

    q = sub.add_parser("rates", help="scan best estimates across n")
    q.add_argument("--h", required=True)
    q.add_argument("--n", required=True, help="comma list or doubling range a..b")
    q.add_argument("--tail-fraction", type=float, default=0.5, dest="tail_fraction")
    q.add_argument("--grid-size", type=int, dest="grid_size")
    q.add_argument("--dp-max-n", type=int, dest="dp_max_n")
    q.add_argument("--out")
    q.add_argument("--format", choices=["json", "csv"])
    q.set_defaults(func=cmd_rates)

    q = sub.add_parser("verify", help="run a numerical certificate suite")
    q.add_argument("suite", choices=["l7", "logser", "l1", "l37", "main-equivalence"])
    q.add_argument("--theta", type=float, default=1.5)
    q.add_argument("--beta", type=float, default=1.5)
    q.add_argument("--alpha", type=float, default=0.75)
    q.add_argument("--nmax", type=int, default=5)
    q.add_argument("--n", help="n list for main-equivalence")
    q.add_argument("--grid-size", type=int, dest="grid_size")
    q.add_argument("--dp-max-n", type=int, dest="dp_max_n")
    q.add_argument("--out")
    q.set_defaults(func=cmd_verify)

    q = sub.add_parser("mc", help="Monte Carlo error vs weight functional")
    q.add_argument("--model", choices=["W", "S"], required=True)
    q.add_argument("--payoff", required=True,
                   help="identity | square | call:K=1 | hermite:alpha=0.75,terms=200")
    q.add_argument("--net", required=True, help="equi:N | regular:N | file")
    q.add_argument("--paths", type=int, default=10000)
    q.add_argument("--m", type=int, default=4096, help="fine grid steps (power of two)")
    q.add_argument("--seed", type=int, default=None,
                   help="default: NETOPT_SEED env var, else 0")
    q.add_argument("--quad-nodes", type=int, default=64, dest="quad_nodes")
    q.add_argument("--out")
    q.set_defaults(func=cmd_mc)

    q = sub.add_parser("benchmark", help="compare numba and numpy kernels")
    q.add_argument("--dp-size", type=int, default=512, dest="dp_size")
    q.add_argument("--series-t", type=float, default=0.9999, dest="series_t")
    q.add_argument("--bridge-paths", type=int, default=2048, dest="bridge_paths")
    q.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads:
            if _kernels.USING_NUMBA:
                import numba

                numba.set_num_threads(max(1, args.threads))
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetoptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
