"""Command-line interface: stats, synth, evaluate, sweep, tune.

Logs go to standard error; data artifacts go to files under ``--out``.  Every
run that writes artifacts also writes ``manifest.json`` (config echo, seed,
library version, timestamp).  Report CSVs depend only on config and seed, so
rerunning with the same inputs reproduces them byte for byte regardless of
``--jobs``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from .config import (
    RunConfig,
    load_run_config,
    parse_selector,
    synthetic_spec_from_config,
)
from .errors import ConfigError, SurvselError
from .evaluation import (
    EvaluationReport,
    aggregate,
    evaluate_selector,
    write_aggregate_csv,
    write_aggregate_json,
    write_records_csv,
    write_summary_csv,
)
from .scenario import ScenarioView, compute_stats, load_scenario, save_scenario_csv
from .seeding import derive_seed
from .synthetic import generate_synthetic
from .tuning import tune_surrogate, write_trace_csv

log = logging.getLogger(__name__)

_STATS_HEADER = ("scenario", "#I", "#U", "#A", "#F", "C", "%C")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config file")
    common.add_argument("--seed", type=int, help="base random seed (required for runs)")
    common.add_argument("--jobs", type=int, help="parallel worker count (default 1)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument(
        "--overwrite",
        action="store_const",
        const=True,
        help="allow writing into a non-empty output directory",
    )
    common.add_argument(
        "--scenario",
        action="append",
        metavar="PATH",
        help="scenario directory (repeatable; adds to config scenarios)",
    )
    common.add_argument(
        "--selector",
        action="append",
        metavar="SPEC",
        help="selector string (repeatable; adds to config selectors)",
    )
    parser = argparse.ArgumentParser(
        prog="survsel",
        description="Algorithm selection on censored runtime data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_stats = sub.add_parser(
        "stats", parents=[common], help="print a table of scenario statistics"
    )
    p_stats.add_argument("paths", nargs="*", metavar="SCENARIO", help="scenario directories")
    sub.add_parser("synth", parents=[common], help="generate a synthetic scenario directory")
    sub.add_parser("evaluate", parents=[common], help="cross-validate selectors on one scenario")
    sub.add_parser("sweep", parents=[common], help="run a selector x scenario benchmark grid")
    sub.add_parser("tune", parents=[common], help="tune the surrogate loss on one scenario")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "jobs": args.jobs,
        "out": args.out,
        "overwrite": args.overwrite,
        "scenarios": args.scenario,
        "selectors": args.selector,
    }
    cfg = load_run_config(args.config, overrides={k: v for k, v in overrides.items() if v is not None})
    return cfg


def _require_seed(cfg: RunConfig) -> int:
    seed = cfg.get("seed")
    if seed is None:
        raise ConfigError("seed: required (pass --seed or set it in the config)")
    return int(seed)


def _prepare_out(cfg: RunConfig) -> Path:
    out = cfg.get("out")
    if out is None:
        raise ConfigError("out: required (pass --out or set it in the config)")
    out_dir = Path(out)
    if out_dir.exists():
        if not out_dir.is_dir():
            raise ConfigError(f"out: {out_dir} exists and is not a directory")
        if any(out_dir.iterdir()) and not cfg.get("overwrite"):
            raise ConfigError(f"out: {out_dir} is not empty (pass --overwrite to reuse it)")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig, seed: int) -> None:
    from . import __version__

    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": dict(sorted(cfg.values.items())),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _load_scenarios(cfg: RunConfig, need: str = "at least one"):
    paths = cfg.scenario_paths
    if not paths:
        raise ConfigError(f"scenario: {need} scenario directory is required")
    return [(path, load_scenario(path)) for path in paths]


def _parse_selectors(cfg: RunConfig) -> list[tuple[str, object]]:
    texts = cfg.selector_strings
    if not texts:
        raise ConfigError("selector: at least one selector is required")
    parsed = []
    for i, text in enumerate(texts):
        parsed.append(parse_selector(text, cfg, index=i))
    labels = [label for label, _ in parsed]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"selectors: duplicate labels {sorted(labels)}")
    return parsed


def cmd_stats(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    paths = list(args.paths) + cfg.scenario_paths
    if not paths:
        raise ConfigError("stats: no scenario paths given")
    rows = []
    for path in paths:
        s = load_scenario(path)
        st = compute_stats(s)
        rows.append(
            (
                s.name,
                str(st.n_instances),
                str(st.n_unsolvable),
                str(st.n_algorithms),
                str(st.n_features),
                f"{st.cutoff:g}",
                f"{st.pct_censored:.1f}",
            )
        )
    widths = [
        max(len(_STATS_HEADER[c]), max(len(r[c]) for r in rows))
        for c in range(len(_STATS_HEADER))
    ]
    def fmt(row):
        return "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
    print(fmt(_STATS_HEADER))
    for row in rows:
        print(fmt(row))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _merge_config(args)
    seed = _require_seed(cfg)
    out_dir = _prepare_out(cfg)
    spec = synthetic_spec_from_config(cfg, seed)
    scenario = generate_synthetic(spec)
    save_scenario_csv(scenario, out_dir)
    _write_manifest(out_dir, "synth", cfg, seed)
    log.info("wrote scenario %s (%d instances) to %s", scenario.name, scenario.n_instances, out_dir)
    return 0


def _run_cell(
    scenario_path: str,
    selector_text: str,
    config_values: dict,
    folds: int,
    cell_seed: int,
) -> EvaluationReport:
    """Worker for one (scenario, selector) cell; loads its own scenario so
    only small picklable values cross process boundaries."""
    cfg = RunConfig(config_values)
    scenario = load_scenario(scenario_path)
    label, selector = parse_selector(selector_text, cfg)
    return evaluate_selector(selector, scenario, k_folds=folds, seed=cell_seed, label=label)


def _run_cells(cfg: RunConfig, seed: int) -> list[EvaluationReport]:
    scenario_paths = cfg.scenario_paths
    if not scenario_paths:
        raise ConfigError("scenario: at least one scenario directory is required")
    selector_texts = cfg.selector_strings
    _parse_selectors(cfg)  # fail fast on bad selector strings and labels
    folds = cfg.get("folds")
    jobs = max(1, int(cfg.get("jobs")))
    # cell seeds come from the canonical grid position, never submission order
    cells = []
    for si, spath in enumerate(scenario_paths):
        for ci, text in enumerate(selector_texts):
            cells.append((spath, text, derive_seed(seed, si, ci)))
    if jobs == 1:
        return [
            _run_cell(spath, text, cfg.values, folds, cell_seed)
            for spath, text, cell_seed in cells
        ]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(_run_cell, spath, text, cfg.values, folds, cell_seed)
            for spath, text, cell_seed in cells
        ]
        return [f.result() for f in futures]


def _report_failures(reports: list[EvaluationReport]) -> int:
    failed = 0
    for r in reports:
        if r.n_failed_folds:
            failed += 1
            log.error(
                "%s on %s: %d of %d folds failed", r.selector, r.scenario, r.n_failed_folds, r.n_folds
            )
    return failed


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .plots import render_fold_bars

    cfg = _merge_config(args)
    seed = _require_seed(cfg)
    if len(cfg.scenario_paths) != 1:
        raise ConfigError("evaluate: exactly one scenario is required (use sweep for grids)")
    out_dir = _prepare_out(cfg)
    reports = _run_cells(cfg, seed)
    write_summary_csv(reports, out_dir / "summary.csv")
    write_records_csv(reports, out_dir / "records.csv")
    for r in reports:
        render_fold_bars(r, out_dir / f"folds_{_safe_name(r.selector)}.png")
    _write_manifest(out_dir, "evaluate", cfg, seed)
    for r in reports:
        log.info("%s: PAR10 %.3f, nPAR10 %.4f", r.selector, r.par10, r.npar10)
    return 2 if _report_failures(reports) else 0


def cmd_sweep(args: argparse.Namespace) -> int:
    from .plots import render_npar10_heatmap

    cfg = _merge_config(args)
    seed = _require_seed(cfg)
    out_dir = _prepare_out(cfg)
    reports = _run_cells(cfg, seed)
    write_summary_csv(reports, out_dir / "summary.csv")
    write_records_csv(reports, out_dir / "records.csv")
    rows = aggregate(reports)
    write_aggregate_csv(rows, out_dir / "aggregate.csv")
    write_aggregate_json(rows, out_dir / "aggregate.json")
    render_npar10_heatmap(reports, out_dir / "npar10.png")
    _write_manifest(out_dir, "sweep", cfg, seed)
    for row in rows:
        log.info("%s: mean rank %.2f, mean nPAR10 %.4f", row.selector, row.mean_rank, row.mean_npar10)
    return 2 if _report_failures(reports) else 0


def cmd_tune(args: argparse.Namespace) -> int:
    import numpy as np

    from .plots import render_tune_trace

    cfg = _merge_config(args)
    seed = _require_seed(cfg)
    scenarios = _load_scenarios(cfg)
    if len(scenarios) != 1:
        raise ConfigError("tune: exactly one scenario is required")
    out_dir = _prepare_out(cfg)
    _, scenario = scenarios[0]
    view = ScenarioView(scenario, np.arange(scenario.n_instances))
    result = tune_surrogate(view, cfg.tune_budget(seed), cfg.forest_params())
    write_trace_csv(result, out_dir / "trace.csv")
    render_tune_trace(result, out_dir / "trace.png")
    _write_manifest(out_dir, "tune", cfg, seed)
    log.info("best loss: %s", result.best)
    return 0


def _safe_name(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


_COMMANDS = {
    "stats": cmd_stats,
    "synth": cmd_synth,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "tune": cmd_tune,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SurvselError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
