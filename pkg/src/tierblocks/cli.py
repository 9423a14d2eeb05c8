"""Command-line entry point.

Subcommands: ``ingest``, ``workload``, ``blocks``, ``simulate``, ``bench`` and
``report``. Settings come from built-in defaults, then an optional INI config
file (``--config``; keys from every section are merged in file order), then
command-line flags. Exit codes: 0 success, 1 usage error, 2 data error,
3 internal error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import platform
import sys
from collections import defaultdict
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .baselines import TableTooLargeError
from .core import DegenerateBlockError
from .ingest import IngestError, ingest_csv, load_cache, read_schema_hint, save_cache
from .layout import METHODS, LayoutConfig, build_layout
from .scheduler import MIGRATION_COLUMNS, SOLVERS, migration_rows
from .sim import METRIC_COLUMNS, SimConfig, bench_build, metrics_csv, read_metrics_csv, run_cloud_edge, \
    run_three_tier, summary_json
from .cache import POLICIES
from .spatial import MANIFEST_VERSION, tree_to_manifest
from .synthetic import clustered_table, uniform_table
from .workloadgen import (GeneratorConfig, WorkloadFormatError, assemble, gen_arrival_curves, gen_representative,
                          read_workload, write_queries, write_workload)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3

REPS_FILE, TRAIN_FILE, TEST_FILE = "reps.wl", "train.wl", "test.wl"


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    """Comma list of fractions; a trailing ``%`` marks a percentage."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        out.append(float(part[:-1]) / 100.0 if part.endswith("%") else float(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _ints(text: str) -> tuple[int, ...]:
    out = tuple(int(p) for p in text.split(",") if p.strip())
    if not out:
        raise ValueError("empty list")
    return out


def _methods(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


CONFIG_KEYS = {
    "block_size": int,
    "page_size": int,
    "gamma": float,
    "phi": float,
    "freq_limit": int,
    "size_threshold": int,
    "filter": str,
    "method": _methods,
    "solver": str,
    "policy": str,
    "budgets": _floats,
    "capacities": _floats,
    "seeds": _ints,
}

DEFAULTS: dict[str, Any] = {
    "block_size": 2048,
    "page_size": None,
    "gamma": 0.6,
    "phi": 1.0,
    "freq_limit": 1,
    "size_threshold": 2,
    "filter": "soft",
    "method": ("brame-s",),
    "solver": "dp",
    "policy": "lru",
    "budgets": (0.04, 0.08, 0.16, 0.32),
    "capacities": (0.01, 0.02, 0.04, 0.08),
    "seeds": (0,),
}


def read_config(path: str | Path) -> dict[str, Any]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    out: dict[str, Any] = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}: unknown config key {key!r} in [{section}]")
            try:
                out[key] = CONFIG_KEYS[key](raw)
            except ValueError as exc:
                raise UsageError(f"{path}: bad value for {key}: {exc}") from None
    return out


def resolve_settings(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then config file, then flags; validates the merged result."""
    settings = dict(DEFAULTS)
    explicit: set[str] = set()
    if getattr(args, "config", None):
        file_vals = read_config(args.config)
        settings.update(file_vals)
        explicit |= set(file_vals)
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
            explicit.add(key)

    if settings["filter"] not in ("hard", "soft"):
        raise UsageError(f"filter must be hard or soft, got {settings['filter']!r}")
    methods = []
    for m in settings["method"]:
        if m == "brame":
            m = "brame-h" if settings["filter"] == "hard" else "brame-s"
        elif m in ("brame-h", "brame-s") and "filter" in explicit and m[-1] != settings["filter"][0]:
            raise UsageError(f"method {m} conflicts with filter={settings['filter']}")
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)} or brame")
        methods.append(m)
    settings["method"] = tuple(methods)
    if settings["solver"] not in SOLVERS:
        raise UsageError(f"unknown solver {settings['solver']!r}")
    if settings["policy"] not in POLICIES:
        raise UsageError(f"unknown policy {settings['policy']!r}")
    if settings["block_size"] < 1:
        raise UsageError("block_size must be >= 1")
    if settings["page_size"] is not None and settings["page_size"] < 1:
        raise UsageError("page_size must be >= 1")
    if not 0.0 <= settings["gamma"] <= 1.0:
        raise UsageError("gamma must lie in [0, 1]")
    if settings["phi"] < 0:
        raise UsageError("phi must be non-negative")
    for key in ("budgets", "capacities"):
        if any(not 0.0 <= f <= 1.0 for f in settings[key]):
            raise UsageError(f"{key} must be fractions in [0, 1]")
    return settings


def provenance(command: str, settings: dict[str, Any], extra: dict[str, Any] | None = None) -> dict[str, Any]:
    """Run record written into every output. Contains no timestamps so reruns match byte for byte."""
    canon = json.dumps({"command": command, "settings": settings, "extra": extra or {}},
                       sort_keys=True, default=list)
    return {
        "tool": "tierblocks",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": command,
        "config_hash": hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16],
        "seeds": list(settings["seeds"]),
    }


def _prov_lines(prov: dict[str, Any]) -> list[str]:
    return [f"{k}={json.dumps(v) if isinstance(v, list) else v}" for k, v in prov.items()]


def layout_config(settings: dict[str, Any]) -> LayoutConfig:
    return LayoutConfig(block_size=settings["block_size"], page_size=settings["page_size"],
                        freq_limit=settings["freq_limit"], size_threshold=settings["size_threshold"],
                        phi=settings["phi"])


def sim_config(settings: dict[str, Any], edge_budget: float) -> SimConfig:
    return SimConfig(gamma=settings["gamma"], solver=settings["solver"], policy=settings["policy"],
                     budgets=settings["budgets"], capacities=settings["capacities"], edge_budget=edge_budget)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_workload_dir(path: str):
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"workload directory {root} not found")
    reps = read_workload(root / REPS_FILE).queries()
    train = read_workload(root / TRAIN_FILE)
    test = read_workload(root / TEST_FILE)
    return reps, train, test


# -- subcommands -------------------------------------------------------------

def cmd_ingest(args, settings) -> int:
    if (args.csv is None) == (args.synthetic is None):
        raise UsageError("give exactly one of an input CSV or --synthetic")
    if args.csv is not None:
        if args.schema is None:
            raise UsageError("--schema is required with an input CSV")
        if args.rows is not None or args.dims is not None:
            raise UsageError("--rows/--dims only apply with --synthetic")
        table, dictionary = ingest_csv(args.csv, read_schema_hint(args.schema))
        extra = {"source": Path(args.csv).name, "categorical": dictionary.values}
    else:
        if args.schema is not None:
            raise UsageError("--schema does not apply with --synthetic")
        rows, dims = args.rows or 10_000, args.dims or 5
        seed = settings["seeds"][0]
        table = clustered_table(rows, dims, seed=seed) if args.synthetic == "clustered" else \
            uniform_table(rows, dims, seed=seed)
        extra = {"source": f"synthetic:{args.synthetic}", "rows": rows, "dims": dims}
    bin_path, schema_path = save_cache(table, args.out)
    prov = provenance("ingest", settings, extra)
    Path(args.out).with_suffix(".prov.json").write_text(
        json.dumps({"provenance": prov, **extra}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {bin_path} and {schema_path} ({table.n} rows, {table.d} columns)")
    return EXIT_OK


def cmd_workload(args, settings) -> int:
    table = load_cache(args.table)
    if args.min_preds < 1 or args.max_preds < args.min_preds:
        raise UsageError("need 1 <= --min-preds <= --max-preds")
    if args.count < 1 or args.intervals < 1:
        raise UsageError("--count and --intervals must be >= 1")
    seed = settings["seeds"][0]
    gcfg = GeneratorConfig(args.min_preds, args.max_preds, tuple(args.width), args.all_columns)
    reps = gen_representative(table, args.count, gcfg, seed=seed)
    curves = gen_arrival_curves(reps, args.intervals, args.burstiness, seed=seed + 1, rate_scale=args.rate_scale)
    train, test = assemble(reps, curves, args.skew, seed=seed + 2)
    extra = {k: getattr(args, k) for k in ("count", "intervals", "burstiness", "rate_scale", "skew",
                                            "min_preds", "max_preds", "width", "all_columns")}
    header = _prov_lines(provenance("workload", settings, extra))
    out = _out_dir(args.out)
    write_queries(reps, out / REPS_FILE, header)
    write_workload(train, out / TRAIN_FILE, header)
    write_workload(test, out / TEST_FILE, header)
    print(f"wrote {len(reps)} representatives, {len(train)} train and {len(test)} test queries to {out}")
    return EXIT_OK


def forest_manifest(layout, prov: dict[str, Any]) -> dict[str, Any]:
    forest = layout.forest
    return {
        "version": MANIFEST_VERSION,
        "provenance": prov,
        "method": layout.method,
        "rows": int(forest.values.shape[0]),
        "blocks": forest.n_blocks,
        "trees": [tree_to_manifest(t) for t in forest.trees],
    }


def cmd_blocks(args, settings) -> int:
    if len(settings["method"]) != 1:
        raise UsageError("blocks builds one method at a time")
    table = load_cache(args.table)
    reps, _, _ = _load_workload_dir(args.workload)
    method = settings["method"][0]
    layout = build_layout(table, method, reps, layout_config(settings), seed=settings["seeds"][0])
    layout.forest.check()
    prov = provenance("blocks", settings)
    out = _out_dir(args.out)
    (out / "manifest.json").write_text(json.dumps(forest_manifest(layout, prov)) + "\n", encoding="utf-8")
    if layout.partition is not None:
        report = {"provenance": prov, **layout.partition.report()}
        (out / "partition.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"{method}: {layout.forest.n_blocks} blocks over {table.n} rows in {len(layout.forest.trees)} trees")
    return EXIT_OK


def cmd_simulate(args, settings) -> int:
    table = load_cache(args.table)
    reps, train, test = _load_workload_dir(args.workload)
    lcfg = layout_config(settings)
    scfg = sim_config(settings, args.edge_budget)
    seeds = settings["seeds"]
    samples, summaries, migrations = [], [], []
    for seed in seeds:
        for method in settings["method"]:
            layout = build_layout(table, method, reps, lcfg, seed=seed)
            if len(seeds) > 1:
                layout.method = f"{method}@{seed}"
            log: list = []
            if args.task == "cloud-edge":
                s, r = run_cloud_edge(layout, train, test, scfg.budgets, scfg, log)
            else:
                s, r = run_three_tier(layout, train, test, scfg.capacities, scfg, log)
            samples += s
            summaries += r
            migrations += [(layout.method, frac, st) for frac, st in log]
            for run in r:
                print(f"{run.method:12s} {run.task} {run.setting:6.1%}  thr={_pct(run.thr)}  bhr={_pct(run.bhr)}")
    prov = provenance("simulate", settings, {"task": args.task, "edge_budget": args.edge_budget})
    out = _out_dir(args.out)
    header = _prov_lines(prov)
    (out / "metrics.csv").write_text(metrics_csv(samples, header), encoding="utf-8")
    (out / "summary.json").write_text(summary_json(summaries, prov) + "\n", encoding="utf-8")
    buf = io.StringIO()
    buf.writelines(f"# {h}\n" for h in header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("method", "budget") + MIGRATION_COLUMNS)
    for method, frac, st in migrations:
        w.writerow([method, f"{frac:g}"] + migration_rows([st])[0])
    (out / "migrations.csv").write_text(buf.getvalue(), encoding="utf-8")
    return EXIT_OK


def _pct(x: float | None) -> str:
    return "  n/a " if x is None else f"{x:.4f}"


def cmd_bench(args, settings) -> int:
    table = load_cache(args.table)
    reps, _, _ = _load_workload_dir(args.workload)
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    rows = bench_build(table, settings["method"], reps, layout_config(settings), args.repeats, settings["seeds"][0])
    print(f"{'method':10s} {'seconds':>9s} {'blocks':>7s}  phases")
    for r in rows:
        phases = " ".join(f"{k}={v:.3f}" for k, v in sorted(r.phases.items()))
        print(f"{r.method:10s} {r.seconds:9.3f} {r.blocks:7d}  {phases}")
    if args.out:
        payload = {"provenance": provenance("bench", settings, {"repeats": args.repeats}),
                   "rows": [{"method": r.method, "seconds": r.seconds, "phases": r.phases, "blocks": r.blocks}
                            for r in rows]}
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def summarize_metrics(rows: Sequence[dict]) -> list[tuple[str, float, float | None, float | None, int]]:
    """Per (method, setting): mean THR and BHR over intervals that have a value."""
    groups: dict[tuple[str, float], list[dict]] = defaultdict(list)
    for r in rows:
        groups[(r["method"], float(r["budget_or_capacity"]))].append(r)
    out = []
    for (method, setting), rs in groups.items():
        thr = [float(r["thr"]) for r in rs if r["thr"]]
        bhr = [float(r["bhr"]) for r in rs if r["bhr"]]
        out.append((method, setting, float(np.mean(thr)) if thr else None, float(np.mean(bhr)) if bhr else None,
                    sum(int(r["moved_blocks"]) for r in rs)))
    return out


def cmd_report(args, settings) -> int:
    for path in args.files:
        text = Path(path).read_text(encoding="utf-8")
        print(f"== {path}")
        if path.endswith(".json"):
            doc = json.loads(text)
            if "runs" in doc:
                for run in doc["runs"]:
                    print(f"{run['method']:12s} {run['task']:10s} {run['setting']:6.1%}  thr={_pct(run['thr'])}"
                          f"  bhr={_pct(run['bhr'])}  queries={run['queries']}")
            elif "zones" in doc:
                print(f"filter={doc['filter']} pages={doc['pages']} hot_pages={doc['hot_pages']} "
                      f"cold_pages={doc['cold_pages']} hot_rows={doc['hot_rows']} cold_rows={doc['cold_rows']}")
                print(f"zones={len(doc['zones'])} subtables={len(doc['subtables'])} cold_blocks={doc['cold_blocks']}")
            else:
                raise ValueError(f"{path}: not a summary or partition report")
        else:
            rows = read_metrics_csv(text)
            if not rows or set(METRIC_COLUMNS) - set(rows[0]):
                raise ValueError(f"{path}: not a metrics CSV")
            print(f"{'method':12s} {'setting':>8s} {'thr':>7s} {'bhr':>7s} {'moved':>7s}")
            for method, setting, thr, bhr, moved in summarize_metrics(rows):
                print(f"{method:12s} {setting:8.1%} {_pct(thr):>7s} {_pct(bhr):>7s} {moved:7d}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_settings(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--page-size", dest="page_size", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--freq-limit", dest="freq_limit", type=int)
    p.add_argument("--size-threshold", dest="size_threshold", type=int)
    p.add_argument("--filter", choices=("hard", "soft"))
    p.add_argument("--method", type=_methods, help="method or comma list")
    p.add_argument("--solver", choices=tuple(SOLVERS))
    p.add_argument("--policy", choices=tuple(POLICIES))
    p.add_argument("--budgets", type=_floats, help="e.g. 4%%,8%% or 0.04,0.08")
    p.add_argument("--capacities", type=_floats)
    p.add_argument("--seeds", type=_ints, help="comma list of integers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tierblocks", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tierblocks {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="normalize a CSV or synthesize a table into a binary cache")
    p.add_argument("csv", nargs="?")
    p.add_argument("--schema", help="schema hint file (name,kind per line)")
    p.add_argument("--synthetic", choices=("uniform", "clustered"))
    p.add_argument("--rows", type=int)
    p.add_argument("--dims", type=int)
    p.add_argument("--out", required=True, help="cache stem; writes STEM.bin and STEM.schema")
    _add_settings(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("workload", help="generate representative, train and test workloads")
    p.add_argument("--table", required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--intervals", type=int, default=40)
    p.add_argument("--burstiness", type=float, default=0.5)
    p.add_argument("--rate-scale", dest="rate_scale", type=float, default=1.0)
    p.add_argument("--skew", type=float, default=0.05)
    p.add_argument("--min-preds", dest="min_preds", type=int, default=1)
    p.add_argument("--max-preds", dest="max_preds", type=int, default=3)
    p.add_argument("--width", type=float, nargs=2, default=[0.05, 0.2], metavar=("LO", "HI"))
    p.add_argument("--all-columns", dest="all_columns", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    _add_settings(p)
    p.set_defaults(func=cmd_workload)

    p = sub.add_parser("blocks", help="build one layout; write its manifest and partition report")
    p.add_argument("--table", required=True)
    p.add_argument("--workload", required=True, help="directory written by `workload`")
    p.add_argument("--out", required=True)
    _add_settings(p)
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("simulate", help="run the migration or cache experiment")
    p.add_argument("--table", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--task", choices=("cloud-edge", "three-tier"), default="cloud-edge")
    p.add_argument("--edge-budget", dest="edge_budget", type=float, default=0.08)
    p.add_argument("--out", required=True)
    _add_settings(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="time layout construction")
    p.add_argument("--table", required=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", help="optional JSON output")
    _add_settings(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="summarize metrics CSVs, summary JSONs or partition reports")
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


DATA_ERRORS = (IngestError, WorkloadFormatError, TableTooLargeError, DegenerateBlockError, FileNotFoundError,
               IsADirectoryError, json.JSONDecodeError, UnicodeDecodeError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        settings = resolve_settings(args) if args.command != "report" else dict(DEFAULTS)
        return args.func(args, settings)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # malformed inputs surface as ValueError from the readers
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
