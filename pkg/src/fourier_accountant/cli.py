"""``fourier-accountant compose|sweep|compare <config> [--out PATH] [--threads N]``.

Writes CSV (see docs/format.md). Failures print one ``CODE: message`` line
on stderr and exit with 1, or with 2 when no grid satisfies the requested
accuracy.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time

from . import comparators
from .accountant import FourierAccountant
from .config import PlanConfig, load
from .errors import AccountantError, ConfigError, Infeasible

COLUMNS = [
    "query", "epsilon", "target_delta", "delta_lower", "delta_estimate", "delta_upper",
    "periodisation", "truncation", "discretisation", "fft_clamp_slack", "L", "n", "wall_ms",
]
SWEEP_COLUMNS = COLUMNS[:1] + ["k"] + COLUMNS[1:] + ["update_ms"]
COMPARE_COLUMNS = COLUMNS + ["rdp_delta", "gdp_delta"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _accountant(cfg: PlanConfig) -> FourierAccountant:
    # the selector targets each error term; a quarter of eta keeps the
    # reported budget (both sides, both terms) within 2 eta
    if cfg.auto_grid:
        acc = FourierAccountant(eta=cfg.eta / 4.0, lambdas=cfg.lambdas, sides=cfg.sides, tilt=cfg.tilt)
    else:
        acc = FourierAccountant(cfg.L, cfg.n, lambdas=cfg.lambdas, sides=cfg.sides, tilt=cfg.tilt)
    return acc.fit(cfg.mechanisms)


def _row(query, bound, acc, wall_ms, target=None) -> dict:
    b = bound.budget
    return {
        "query": query, "epsilon": bound.eps, "target_delta": target,
        "delta_lower": bound.lower, "delta_estimate": bound.estimate, "delta_upper": bound.upper,
        "periodisation": b.periodisation, "truncation": b.truncation,
        "discretisation": b.discretisation, "fft_clamp_slack": b.fft_clamp_slack,
        "L": acc.grid_.L, "n": acc.grid_.n, "wall_ms": wall_ms,
    }


def _query_rows(cfg: PlanConfig, acc: FourierAccountant, threads: int) -> list[dict]:
    rows = []
    for kind, values in cfg.queries:
        if kind == "delta_at":
            t0 = time.perf_counter()
            bounds = acc.deltas(values, threads=threads)
            ms = 1e3 * (time.perf_counter() - t0) / len(values)
            rows += [_row("delta", b, acc, ms) for b in bounds]
        else:
            for target in values:
                t0 = time.perf_counter()
                eps = acc.epsilon(target)
                b = acc.delta(eps)
                rows.append(_row("epsilon", b, acc, 1e3 * (time.perf_counter() - t0), target))
    return rows


def cmd_compose(cfg: PlanConfig, threads: int = 1):
    acc = _accountant(cfg)
    return acc, COLUMNS, _query_rows(cfg, acc, threads)


def cmd_sweep(cfg: PlanConfig, threads: int = 1):
    if cfg.k_list is None:
        raise ConfigError("sweep needs a 'sweep: {k_list: [...]}' section", "CONFIG_SWEEP")
    eps_list = [e for kind, vals in cfg.queries if kind == "delta_at" for e in vals]
    if not eps_list:
        raise ConfigError("sweep needs at least one delta_at query", "CONFIG_SWEEP")
    acc = _accountant(cfg)
    rows = []
    for eps in eps_list:
        timings = []
        t0 = time.perf_counter()
        bounds = acc.sweep(cfg.k_list, eps, timings)
        ms = 1e3 * (time.perf_counter() - t0) / len(bounds)
        for k, b, upd in zip(cfg.k_list, bounds, timings):
            row = _row("sweep", b, acc, ms)
            row["k"] = k
            row["update_ms"] = upd
            rows.append(row)
    return acc, SWEEP_COLUMNS, rows


def cmd_compare(cfg: PlanConfig, threads: int = 1):
    acc = _accountant(cfg)
    rows = _query_rows(cfg, acc, threads)
    orders = tuple(cfg.rdp_orders) if cfg.rdp_orders else comparators.DEFAULT_ORDERS
    # both comparators are on unless the config switches them off explicitly
    want_rdp = cfg.rdp or not cfg.gdp
    want_gdp = cfg.gdp or not cfg.rdp
    for row in rows:
        eps = row["epsilon"]
        row["rdp_delta"] = comparators.rdp_delta(cfg.mechanisms, eps, orders) if want_rdp and eps > 0 else None
        row["gdp_delta"] = comparators.gdp_delta(cfg.mechanisms, eps) if want_gdp else None
    return acc, COMPARE_COLUMNS, rows


COMMANDS = {"compose": cmd_compose, "sweep": cmd_sweep, "compare": cmd_compare}


def render(cfg: PlanConfig, acc: FourierAccountant, columns, rows) -> str:
    buf = io.StringIO()
    if cfg.auto_grid:
        buf.write(f"# grid L={acc.grid_.L:.12g} n={acc.grid_.n}\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: _fmt(row.get(c)) for c in columns})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourier-accountant", description="Certified (eps, delta) bounds via FFT of privacy loss distributions.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("config", help="YAML plan file")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--threads", type=int, default=1, help="parallel delta queries (default 1)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1", "BAD_ARGUMENT")
        cfg = load(args.config)
        acc, columns, rows = COMMANDS[args.command](cfg, args.threads)
        text = render(cfg, acc, columns, rows)
    except Infeasible as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except AccountantError as exc:
        print(f"{exc.code}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
