"""Command-line surface: bounds evaluation, entropy constants, path
simulation, and Monte Carlo certification.

Exit codes (stable contract): 0 success, 1 I/O failure, 2 usage or
validation error, 3 certification found violation rows.

The CLI is a thin adapter over the library; it formats tables (6
significant digits) and never computes numbers itself.  All randomness
flows from explicit seeds (flag or config field), never ambient entropy.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources

from .bounds import (
    FULL_RANGE,
    HALF_RANGE,
    DomainError,
    ModelConfig,
    expected_sup_bound,
    fbm_sup_bound,
    tail_bound,
    tail_bound_raw,
)
from .experiments import (
    ConfigError,
    load_experiment_specs,
    report_to_csv,
    report_to_json,
    run_experiments,
)
from .simulate import SamplerConfig, TimeGrid, fou_from_fbm, sample_fbm, write_path_dump

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VIOLATION = 3

DEFAULT_CONFIG_RESOURCE = "certify_default.json"


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    return f"{value:.6g}"


def _print_table(headers, rows) -> None:
    widths = [
        max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
        for i, h in enumerate(headers)
    ]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip())
    for row in rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_bounds(args) -> int:
    cfg = ModelConfig(H=args.H, T=args.T, eps=args.eps)
    thr_half = (
        expected_sup_bound(cfg, HALF_RANGE).value if cfg.H >= 0.5 else None
    )
    thr_full = expected_sup_bound(cfg, FULL_RANGE).value
    headers = (
        "u", "thr_half", "thr_full",
        "bound_half", "bound_full", "raw_half", "raw_full", "marker",
    )
    rows = []
    for u in args.u:
        if thr_half is None:
            bound_half, raw_half = "n/a", "n/a"
        else:
            raw_half = _fmt(tail_bound_raw(cfg, u, HALF_RANGE))
            bound_half = (
                _fmt(tail_bound(cfg, u, HALF_RANGE))
                if u > thr_half
                else "below-threshold"
            )
        raw_full = _fmt(tail_bound_raw(cfg, u, FULL_RANGE))
        bound_full = (
            _fmt(tail_bound(cfg, u, FULL_RANGE))
            if u > thr_full
            else "below-threshold"
        )
        below_all = u <= thr_full and (thr_half is None or u <= thr_half)
        rows.append((
            _fmt(u), _fmt(thr_half), _fmt(thr_full),
            bound_half, bound_full, raw_half, raw_full,
            "below-threshold" if below_all else "",
        ))
    _print_table(headers, rows)
    return EXIT_OK


def cmd_entropy(args) -> int:
    dudley = fbm_sup_bound(args.H, args.T, "dudley")
    pisier = fbm_sup_bound(args.H, args.T, "pisier")
    debicki = fbm_sup_bound(args.H, args.T, "debicki") if args.H >= 0.5 else None
    headers = ("method", "constant", "bound")
    t_pow = args.T ** args.H
    rows = [
        ("dudley", _fmt(dudley.value / t_pow), _fmt(dudley.value)),
        ("pisier", _fmt(pisier.value / t_pow), _fmt(pisier.value)),
        (
            "debicki",
            _fmt(debicki.value / t_pow) if debicki else "n/a",
            _fmt(debicki.value) if debicki else "n/a",
        ),
    ]
    _print_table(headers, rows)
    if debicki is not None:
        print(
            f"comparison: debicki < pisier: {debicki.value < pisier.value}; "
            f"pisier < dudley: {pisier.value < dudley.value} "
            f"(entropy-integral routes are not sharper than debicki)"
        )
    else:
        print(f"comparison: pisier < dudley: {pisier.value < dudley.value}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.method == "circulant" and args.H == 1.0:
        raise DomainError(
            "circulant embedding does not support H=1; use --method cholesky "
            "(H=1 is sampled by the exact rank-one construction B_t = t*Z)"
        )
    grid = TimeGrid(args.T, args.n)
    sampler = SamplerConfig(method=args.method, seed=args.seed, jitter=args.jitter)
    batch = sample_fbm(grid, args.H, sampler, args.count)
    eps = None
    if args.process == "fou":
        eps = args.eps
        batch = fou_from_fbm(batch, eps)
    with open(args.out, "w", encoding="utf-8") as fh:
        write_path_dump(
            batch, fh, process=args.process, H=args.H,
            method=args.method, seed=args.seed, eps=eps,
        )
    print(
        f"wrote {args.count} {args.process} paths (n={args.n}, T={args.T:g}, "
        f"H={args.H:g}, method={args.method}, seed={args.seed}) to {args.out}"
    )
    return EXIT_OK


def _default_config_path() -> str:
    return str(resources.files("fouhit").joinpath("configs", DEFAULT_CONFIG_RESOURCE))


def cmd_certify(args) -> int:
    config_path = args.config if args.config else _default_config_path()
    specs = load_experiment_specs(config_path)
    if args.seed is not None:
        from dataclasses import replace

        specs = [
            replace(s, sampler=replace(s.sampler, seed=args.seed)) for s in specs
        ]
    report = run_experiments(specs)
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(report_to_csv(report))
    with open(args.out_json, "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    print(
        f"certified {len(report.rows)} rows from {config_path}: "
        f"{report.violations} violation(s); reports in {args.out_csv}, {args.out_json}"
    )
    return EXIT_VIOLATION if report.violations else EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fouhit",
        description="Level-crossing tail bounds for a fractional "
        "Ornstein-Uhlenbeck process, with Monte Carlo certification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate the closed-form tail bounds")
    p.add_argument("--H", type=float, required=True, help="Hurst exponent in (0,1]")
    p.add_argument("--T", type=float, required=True, help="time horizon")
    p.add_argument("--eps", type=float, default=1.0, help="noise scale")
    p.add_argument("--u", type=float, nargs="+", required=True, help="level(s)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("entropy", help="entropy-integral supremum estimates")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("simulate", help="sample paths and write a text dump")
    p.add_argument("--H", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="grid points (>= 2)")
    p.add_argument("--count", type=int, required=True, help="number of paths")
    p.add_argument("--process", choices=("fbm", "fou"), default="fbm")
    p.add_argument("--eps", type=float, default=1.0, help="noise scale (fou only)")
    p.add_argument("--method", choices=("cholesky", "circulant"), default="cholesky")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=1e-12)
    p.add_argument("--out", required=True, help="output file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="run a certification config, write reports")
    p.add_argument("--config", help="JSON config (default: packaged config)")
    p.add_argument("--out-csv", default="report.csv")
    p.add_argument("--out-json", default="report.json")
    p.add_argument("--seed", type=int, default=None, help="override all sampler seeds")
    p.set_defaults(func=cmd_certify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def run() -> None:
    sys.exit(main())
