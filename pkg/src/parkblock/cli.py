"""Command line entry point.

Exit codes: 0 all tests pass, 1 a test failed, 2 configuration error,
3 too many replicas left the window interior.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import experiments as ex
from .simulator import ConfigError, SimConfig, jump_log_csv, run
from .size_measures import MeasureError, parse_measure

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_DISCARD = 0, 1, 2, 3
CONFIG_KEYS = ("nu", "t_end", "half_width", "margin", "seed", "replicas", "trace_times")


def load_config(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: expected one of {', '.join(CONFIG_KEYS)} as key = value")
        try:
            if key == "nu":
                parse_measure(value)
                out[key] = value
            elif key in ("seed", "replicas"):
                out[key] = int(value)
            elif key == "trace_times":
                out[key] = tuple(float(v) for v in value.replace(",", " ").split())
            else:
                out[key] = float(value)
        except (ValueError, MeasureError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parkblock", description=__doc__.splitlines()[0])
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--experiment", metavar="NAME", help="run one registered experiment")
    mode.add_argument("--verify-all", action="store_true", help="run every registered experiment")
    mode.add_argument("--list", action="store_true", help="list experiments and the claim each one checks")
    mode.add_argument("--simulate", action="store_true", help="simulate replicas and write their jump logs or results")
    p.add_argument("--config", metavar="FILE", help="key = value file; flags override it")
    p.add_argument("--nu", help="size measure: dirac:a, exp:rate, gamma:k,theta, discrete:s=w,...")
    p.add_argument("--t-end", type=float, help="time horizon (experiments: sampling time t)")
    p.add_argument("--half-width", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR", help="output directory (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--workers", type=int, default=1)
    return p


def _settings(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    for key in ("nu", "t_end", "half_width", "margin", "replicas", "seed"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    if "nu" in cfg:
        try:
            parse_measure(cfg["nu"])
        except MeasureError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "test", "statistic", "p_value", "target", "tolerance", "n", "pass"])
    for r in reports:
        for t in r.tests:
            d = t.to_dict()
            w.writerow([
                r.name, d["name"], d.get("statistic", d.get("value")), d.get("p_value", ""),
                d.get("target", d.get("minimum", "")), d.get("tolerance", ""), d.get("n", ""), d["pass"],
            ])
    return buf.getvalue()


def _emit(reports, args, out) -> None:
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        for r in reports:
            if args.format == "json":
                (d / f"{r.name}.json").write_text(r.to_json() + "\n")
            for c in r.columns:
                safe = "".join(ch if ch.isalnum() else "_" for ch in c.name)
                (d / f"{r.name}__{safe}.tsv").write_text(c.to_text())
        if args.format == "csv":
            (d / "report.csv").write_text(_report_csv(reports))
    elif args.format == "json":
        body = [r.to_dict() for r in reports]
        out.write(json.dumps(body[0] if len(body) == 1 else body, sort_keys=True, indent=2) + "\n")
    else:
        out.write(_report_csv(reports))


def _simulate(cfg: dict, args, out) -> int:
    try:
        config = SimConfig.from_dict({"t_end": cfg.get("t_end", 0.5), "nu": cfg.get("nu", "dirac:1"), **{
            k: cfg[k] for k in ("half_width", "margin", "seed", "trace_times") if k in cfg}})
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    n = cfg.get("replicas", 1)
    if n < 1:
        raise ConfigError("replicas must be >= 1")
    results = [run(config, k) for k in range(n)]
    if args.format == "csv":
        text = jump_log_csv([r for r in results if r.valid])
        name = "jump_log.csv"
    else:
        text = "".join(r.to_json() + "\n" for r in results)
        name = "results.jsonl"
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)
    else:
        out.write(text)
    invalid = sum(not r.valid for r in results)
    print(f"{n} replicas, {invalid} invalid", file=sys.stderr)
    return EXIT_DISCARD if invalid / n > ex.MAX_DISCARD else EXIT_PASS


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        if args.list:
            for s in ex.registry():
                out.write(f"{s.name:24s} {s.kind:9s} {s.claim}\n")
            return EXIT_PASS
        cfg = _settings(args)
        if args.simulate:
            return _simulate(cfg, args, out)
        overrides = {
            "nu": cfg.get("nu"),
            "t": cfg.get("t_end"),
            "half_width": cfg.get("half_width"),
            "margin": cfg.get("margin"),
            "replicas": cfg.get("replicas"),
        }
        seed = cfg.get("seed", 0)
        specs = ex.registry() if args.verify_all else [ex.get_spec(args.experiment)]
        specs = [s.with_overrides(**overrides) for s in specs]
        reports = []
        for s in specs:
            r = ex.run_experiment(s, seed=seed, workers=args.workers)
            print(r.summary_line(), file=sys.stderr)
            reports.append(r)
        _emit(reports, args, out)
        return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.WindowDiscardRateExceeded as exc:
        print(f"discard rate exceeded: {exc}", file=sys.stderr)
        return EXIT_DISCARD


if __name__ == "__main__":
    sys.exit(main())
