"""Command-line entry point: ``convoykit {run,sweep,metrics,validate}``.

Every failure prints exactly one line to stderr, ``error: <CODE>: <detail>``,
and exits nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .errors import ConfigError, ConvoyError
from .metrics import RunMetrics, percentile_95, platooning_error, run_metrics, series_to_csv, speed_difference, sweep_aggregate
from .net.transport import DEFAULT_GROUP, DEFAULT_PORT
from .sim.engine import run_multicast, run_scenario
from .sim.scenario import BUNDLED_SCENARIOS, ScenarioConfig, bundled_scenario_path, load_scenario
from .sim.trace import Trace

LOG = logging.getLogger("convoykit")

OUT_ENV = "OPENCONVOY_OUT"


class UsageError(ConvoyError):
    code = "E_USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _per_dir(per: Optional[float], config: ScenarioConfig) -> str:
    if per is None:
        levels = set(config.follower_per)
        if len(levels) != 1:
            return "mixed"
        per = levels.pop()
    return f"{per:.2f}"


def _scenario_source(arg: str) -> Path:
    p = Path(arg)
    if not p.exists() and arg in BUNDLED_SCENARIOS:
        return bundled_scenario_path(arg)
    return p


def _load(args) -> tuple[ScenarioConfig, Path]:
    src = _scenario_source(args.scenario)
    config = load_scenario(src)
    try:
        config = config.with_overrides(
            per=getattr(args, "per", None),
            seed=args.seed,
            duration=args.duration,
            gap=args.gap,
        )
    except ConfigError as exc:
        raise ConfigError(str(exc), field=exc.field, source="<command line>") from None
    return config, src


def _out_root(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "out")


def _write_manifest(path: Path, command: str, config: ScenarioConfig, src: Path, **extra) -> None:
    try:
        file_hash = hashlib.sha256(src.read_bytes()).hexdigest()
    except OSError:
        file_hash = None
    manifest = {
        "tool": "convoykit",
        "version": __version__,
        "command": command,
        "scenario_path": str(src),
        "scenario_sha256": file_hash,
        "config_sha256": config.digest(),
        "config": config.to_dict(),
        "started_utc": datetime.now(timezone.utc).isoformat(),
        **extra,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    # the effective scenario, re-runnable as-is
    (path.parent / "scenario.yaml").write_text(config.to_yaml())


def cmd_run(args) -> int:
    config, src = _load(args)
    run_dir = _out_root(args) / config.name / _per_dir(args.per, config) / str(config.seed)
    _write_manifest(
        run_dir / "manifest.json", "run", config, src,
        seeds=[config.seed], per_levels=list(config.follower_per),
        transport=args.transport, output_dir=str(run_dir),
    )
    if args.transport == "multicast":
        trace = run_multicast(config, args.group, args.port, args.iface)
    else:
        trace = run_scenario(config)
    trace.write_csv(run_dir / "trace.csv")
    m = run_metrics(trace, config.desired_gap)
    print(f"trace: {run_dir / 'trace.csv'}")
    print(f"p95_platooning_error_m={m.p95_worst!r} mean_speed_difference_mps={m.mean_speed_difference!r}")
    return 0


def _parse_per_list(text: Optional[str]) -> list[float]:
    if text is None or not text.strip():
        raise UsageError("--per-list needs at least one value")
    levels = []
    for item in text.split(","):
        try:
            value = float(item)
        except ValueError:
            raise ConfigError(f"per-list: not a number: {item!r}", field="per-list", source="<command line>") from None
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"per-list: must be in [0, 1], got {value}", field="per-list", source="<command line>")
        levels.append(value)
    return sorted(set(levels))


def _sweep_cell(config: ScenarioConfig, run_dir: str) -> RunMetrics:
    trace = run_scenario(config)
    d = Path(run_dir)
    d.mkdir(parents=True, exist_ok=True)
    trace.write_csv(d / "trace.csv")
    (d / "platooning_error.csv").write_text(series_to_csv(platooning_error(trace, config.desired_gap)))
    (d / "speed_difference.csv").write_text(series_to_csv([speed_difference(trace)]))
    return run_metrics(trace, config.desired_gap)


def cmd_sweep(args) -> int:
    levels = _parse_per_list(args.per_list)
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    base, src = _load(args)
    seeds = [base.seed + k for k in range(args.seeds)]
    root = _out_root(args) / base.name
    _write_manifest(
        root / "manifest.json", "sweep", base, src,
        seeds=seeds, per_levels=levels, transport="virtual", output_dir=str(root),
    )
    cells = [(per, seed) for per in levels for seed in seeds]
    results = {}
    workers = args.workers or os.cpu_count() or 1
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {
            (per, seed): pool.submit(
                _sweep_cell, base.with_overrides(per=per, seed=seed), str(root / f"{per:.2f}" / str(seed))
            )
            for per, seed in cells
        }
        for (per, seed), fut in futures.items():
            try:
                results[(per, seed)] = fut.result()
            except Exception as exc:
                for other in futures.values():
                    other.cancel()
                raise ConvoyError(f"sweep cell per={per} seed={seed} failed: {exc}") from exc
    summary = sweep_aggregate(results, base.desired_gap, levels)
    summary.write_csv(root / "summary.csv")
    rho_sd, rho_err = summary.trend()
    print(f"summary: {root / 'summary.csv'} ({len(cells)} runs, {len(summary.rows)} levels)")
    print(f"spearman_speed_difference={rho_sd!r} spearman_p95_error={rho_err!r}")
    return 0


def cmd_metrics(args) -> int:
    trace = Trace.read_csv(args.trace)
    out = _out_root(args)
    out.mkdir(parents=True, exist_ok=True)
    errors = platooning_error(trace, args.gap if args.gap is not None else 15.0)
    sd = speed_difference(trace)
    (out / "platooning_error.csv").write_text(series_to_csv(errors))
    (out / "speed_difference.csv").write_text(series_to_csv([sd]))
    lines = ["# schema=1", "metric,value"]
    for e in errors:
        lines.append(f"{e.label.replace('_platooning_error_m', '')}_p95_platooning_error_m,{percentile_95(e)!r}")
    worst = max((percentile_95(e) for e in errors), default=0.0)
    lines.append(f"p95_platooning_error_m,{worst!r}")
    lines.append(f"mean_speed_difference_mps,{float(sd.values.mean())!r}")
    (out / "metrics_summary.csv").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[2:]))
    return 0


def cmd_validate(args) -> int:
    config, _ = _load(args)
    print(f"ok {config.name} vehicles={config.vehicle_count} config_sha256={config.digest()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convoykit", description="Platooning simulation over a lossy V2V channel.")
    parser.add_argument("--version", action="version", version=f"convoykit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def scenario_opts(p, per=True):
        p.add_argument("--scenario", default="paper-repro", help="scenario file or bundled name")
        p.add_argument("--seed", type=int)
        p.add_argument("--duration", type=float, help="seconds")
        p.add_argument("--gap", type=float, help="desired gap, meters")
        p.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./out)")
        if per:
            p.add_argument("--per", type=float, help="packet error rate for every follower")

    p = sub.add_parser("run", help="run one scenario")
    scenario_opts(p)
    p.add_argument("--transport", choices=("virtual", "multicast"), default="virtual")
    p.add_argument("--group", default=DEFAULT_GROUP)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--iface", help="network interface for multicast")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run every (PER, seed) cell and aggregate")
    scenario_opts(p, per=False)
    p.add_argument("--per-list", default="0,0.1,0.2,0.3,0.4,0.5,0.6", help="comma-separated PER levels")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds, starting at --seed")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="compute metrics from a trace CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--gap", type=float, help="desired gap, meters (default 15)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("validate", help="check a scenario file")
    scenario_opts(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except ConvoyError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: E_IO: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
