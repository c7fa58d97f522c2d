"""Command-line front end.

Subcommands: exponents, thresholds, simulate, verify, sweep, identities.
Exit codes: 0 success, 1 configuration error or bad usage, 2 a failed check
(verify mismatch, identity residual too large), 3 blow-up, 4 dt collapse.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from typing import Dict, List, Optional

from . import config as cfg
from . import exponents as ex
from . import harness
from .dynamics import BLOWUP, DT_COLLAPSE, run

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_BLOWUP, EXIT_COLLAPSE = 0, 1, 2, 3, 4

SUBCOMMANDS = ("exponents", "thresholds", "simulate", "verify", "sweep", "identities")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plaplab",
        description="p-Laplacian / porous-medium reaction-diffusion laboratory.",
        epilog="Config files hold one 'section.key = value' per line; flags override them.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        sp.add_argument("--config", help="flat config file", default=None)
        sp.add_argument("--out", help="output directory", default="out")
        if name == "identities":
            sp.add_argument("--samples", type=int, default=1000, help="random parameter draws")
        group = sp.add_argument_group("config overrides")
        for key in cfg.KEYS:
            group.add_argument(f"--{key.flag}", dest=key.name, default=None, metavar="V",
                               help=f"{key.name}: {key.help} (default: {cfg._show(key.default)})")
    return parser


def _document(args) -> Dict[str, object]:
    doc = cfg.load(args.config) if args.config else cfg.defaults()
    overrides = {k.name: getattr(args, k.name) for k in cfg.KEYS
                 if getattr(args, k.name) is not None}
    return cfg.parse_values(overrides, doc)


def _print_kv(key: str, value) -> None:
    if isinstance(value, bool):
        text = "true" if value else "false"
    elif isinstance(value, (int, float)):
        text = cfg.fmt_number(value)
    else:
        text = str(value)
    print(f"{key}={text}")


def cmd_exponents(doc) -> int:
    params = cfg.problem_params(doc)
    rep = ex.exponent_report(params, qs=doc["query.qs"], s=doc["query.s"])
    crit_name = "sigma0" if params.mode == ex.PLAP else "sigma1"
    _print_kv("mode", params.mode)
    _print_kv(crit_name, rep.critical)
    _print_kv("alpha", rep.alpha)
    _print_kv("fujita", params.fujita_exponent)
    _print_kv("above_fujita", rep.gate)
    _print_kv("regime", rep.regime)
    if rep.linf_rate is not None:
        _print_kv("linf_gamma", rep.linf_rate[0])
        _print_kv("linf_delta", rep.linf_rate[1])
    for q in sorted(rep.gamma_q):
        _print_kv(f"gamma_q{cfg.fmt_number(q)}", rep.gamma_q[q])
        _print_kv(f"delta_q{cfg.fmt_number(q)}", rep.delta_q[q])
    if rep.beta_qs is not None:
        _print_kv("beta", rep.beta_qs)
    for name, value in rep.thresholds.items():
        _print_kv(name, value)
    return EXIT_OK


def _threshold_qs(doc, params) -> List[float]:
    if doc["query.qs"]:
        return list(doc["query.qs"])
    s0 = ex.sigma_zero(params)
    return [s0 + i for i in range(int(math.floor(20 - s0)) + 1)]


def cmd_thresholds(doc) -> int:
    params = cfg.problem_params(doc)
    q0 = doc["query.q0"] if doc["query.q0"] is not None else ex.sigma_zero(params)
    mode = doc["query.threshold_mode"]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["q", "eps_tilde0", "eps_bar0", "eps_hat0", "eps_tilde1"])
    for q in _threshold_qs(doc, params):
        row = [harness.fmt(q), harness.fmt(ex.threshold_eps0(q, q0, params, mode)),
               harness.fmt(ex.threshold_eps_bar0(q, params, mode)),
               harness.fmt(ex.threshold_eps_hat0(q, params, mode))]
        try:
            row.append(harness.fmt(ex.threshold_eps1(q, q0, params, doc["query.eps1_mode"])))
        except ex.ParameterError:
            row.append("")
        w.writerow(row)
    return EXIT_OK


def _status_code(status: str) -> int:
    return {BLOWUP: EXIT_BLOWUP, DT_COLLAPSE: EXIT_COLLAPSE}.get(status, EXIT_OK)


def _simulate(doc, out):
    record = run(cfg.run_config(doc))
    harness.write_run(record, out, cfg.to_flat(doc))
    return record


def cmd_simulate(doc, out) -> int:
    record = _simulate(doc, out)
    print(f"status={record.status}")
    print(("t_star=" if record.status == BLOWUP else "t_end=") + harness.fmt(record.t_stop))
    print(f"s_max={harness.fmt(record.max_s)}")
    return _status_code(record.status)


def _families(doc):
    out = []
    for item in doc["query.families"]:
        parts = item.split(":")
        if len(parts) not in (2, 3):
            raise cfg.ConfigError(f"bad family spec {item!r}; expected family:q[:q0]")
        q0 = float(parts[2]) if len(parts) == 3 else doc["query.q0"]
        out.append((parts[0], float(parts[1]), q0))
    return out


def cmd_verify(doc, out) -> int:
    record = _simulate(doc, out)
    print(f"status={record.status}")
    if record.status != "completed":
        print(f"classification={harness.classify_record(record)} (exploratory)")
        return _status_code(record.status)
    print(f"classification={harness.classify_record(record)}")
    print(f"s_max={harness.fmt(record.max_s)}")
    ok = True
    for rep in harness.smoothing_report(record, _families(doc)):
        print(f"{rep.family} q={cfg.fmt_number(rep.q)} slope={rep.fitted_slope:.6g} "
              f"stderr={rep.stderr:.3g} predicted=-{rep.predicted:.6g} "
              f"window=[{rep.window[0]:.6g},{rep.window[1]:.6g}] {rep.verdict}")
        ok = ok and rep.verdict == harness.MATCH
    return EXIT_OK if ok else EXIT_CHECK


def cmd_sweep(doc, out) -> int:
    base = cfg.run_config(doc)
    rows = harness.sweep(base, doc["sweep.axis"], list(doc["sweep.values"]), out,
                         workers=doc["sweep.workers"])
    for row in rows:
        print(f"{row['index']:04d} {row['axis']}={cfg.fmt_number(row['value'])} "
              f"{row['status']} {row['label']}".rstrip())
    print(f"index={os.path.join(out, 'runs', 'index.csv')}")
    return EXIT_OK


def cmd_identities(doc, samples) -> int:
    rep = ex.identity_suite(samples=samples, seed=doc["seed"])
    print(f"samples={rep.samples}")
    print(f"max_residual={rep.max_residual:.3e}")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_CHECK


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS and not argv[0].startswith("-"):
        parser.print_usage(sys.stderr)
        if argv:
            print(f"plaplab: unknown subcommand {argv[0]!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        doc = _document(args)
        if args.command == "exponents":
            return cmd_exponents(doc)
        if args.command == "thresholds":
            return cmd_thresholds(doc)
        if args.command == "simulate":
            return cmd_simulate(doc, args.out)
        if args.command == "verify":
            return cmd_verify(doc, args.out)
        if args.command == "sweep":
            return cmd_sweep(doc, args.out)
        return cmd_identities(doc, args.samples)
    except (cfg.ConfigError, ValueError, OSError) as exc:
        print(f"plaplab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
