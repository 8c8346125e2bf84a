"""Cross-validated replay evaluation of selectors on scenario data.

No solver ever runs: a fitted selector picks an algorithm per test instance
and the recorded runtime is charged, plus the instance's feature cost.  A
charged run counts as a timeout when the recorded run was censored or the
charged time exceeds the cutoff, and timeouts cost ten times the cutoff
(PAR10).  Scores are normalized against two per-fold references computed
with the identical charging rule: the virtual best (per-instance fastest,
from test labels) and the single best (constant algorithm with best mean
training PAR10).
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .errors import AggregationError
from .scenario import Scenario, ScenarioView, make_folds
from .seeding import derive_seed
from .selectors import SelectorConfig, make_selector, sbs_index, vbs_choices

log = logging.getLogger(__name__)

VBS_REPLAY = "vbs"  # pseudo-selector accepted by evaluate_selector


@dataclass(frozen=True)
class InstanceRecord:
    instance_id: str
    fold: int
    selected: str
    charged_time: float
    timed_out: bool
    par10: float


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_test: int
    par10_model: float
    par10_vbs: float
    par10_sbs: float
    npar10: float
    timeouts: int
    solved: int
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


@dataclass(frozen=True)
class EvaluationReport:
    scenario: str
    selector: str
    seed: int
    n_folds: int
    folds: tuple[FoldResult, ...]
    records: tuple[InstanceRecord, ...]
    par10: float
    par10_vbs: float
    par10_sbs: float
    npar10: float
    timeouts: int
    solved: int
    n_instances: int

    @property
    def n_failed_folds(self) -> int:
        return sum(1 for f in self.folds if f.failed)


def _charge(s: Scenario, idx: np.ndarray, choice: np.ndarray):
    """Charged time, timeout flag and PAR10 score per evaluated instance."""
    r = s.runtimes[idx, choice]
    censored = s.censored[idx, choice]
    charged = s.feature_costs[idx] + r
    timed_out = censored | (charged > s.cutoff)
    par10 = np.where(timed_out, 10.0 * s.cutoff, charged)
    return charged, timed_out, par10


def _npar10(model: float, vbs: float, sbs: float) -> float:
    gap = sbs - vbs
    if gap > 0:
        return (model - vbs) / gap
    # the single best already matches the oracle on this data
    return 0.0 if model == vbs else float("inf")


def evaluate_selector(
    config: SelectorConfig | str,
    scenario: Scenario,
    k_folds: int = 10,
    seed: int = 0,
    label: str | None = None,
) -> EvaluationReport:
    """Fit per fold on training instances, replay on solvable test instances.

    ``config`` may be the string ``"vbs"`` for an oracle replay that selects
    each test instance's truly fastest algorithm.
    """
    is_vbs = isinstance(config, str)
    if is_vbs and config != VBS_REPLAY:
        raise ValueError(f"unknown replay {config!r}; expected {VBS_REPLAY!r}")
    if label is None:
        label = config if is_vbs else config.kind
    assignment = make_folds(scenario, k_folds, seed)
    unsolvable = scenario.unsolvable_mask()
    folds: list[FoldResult] = []
    records: list[InstanceRecord] = []
    pooled = {"model": [], "vbs": [], "sbs": []}
    for fold in range(1, k_folds + 1):
        test_idx = np.nonzero(assignment == fold)[0]
        train_idx = np.nonzero(assignment != fold)[0]
        eval_idx = test_idx[~unsolvable[test_idx]]
        if eval_idx.size == 0:
            folds.append(
                FoldResult(fold, 0, np.nan, np.nan, np.nan, np.nan, 0, 0)
            )
            continue
        train_view = ScenarioView(scenario, train_idx)
        vbs_choice = vbs_choices(scenario.runtimes[eval_idx], scenario.censored[eval_idx])
        sbs_choice = np.full(eval_idx.size, sbs_index(train_view))
        try:
            if is_vbs:
                chosen = vbs_choice
            else:
                selector = make_selector(config).fit(train_view, derive_seed(seed, 0xF0, fold))
                chosen = selector.select_batch(scenario.features[eval_idx])
        except Exception as exc:  # noqa: BLE001 - fold failures surface in the report
            log.error("fold %d failed: %s", fold, exc)
            folds.append(
                FoldResult(fold, eval_idx.size, np.nan, np.nan, np.nan, np.nan, 0, 0, str(exc))
            )
            continue
        charged, timed_out, par10_model = _charge(scenario, eval_idx, chosen)
        _, _, par10_vbs = _charge(scenario, eval_idx, vbs_choice)
        _, _, par10_sbs = _charge(scenario, eval_idx, sbs_choice)
        pooled["model"].append(par10_model)
        pooled["vbs"].append(par10_vbs)
        pooled["sbs"].append(par10_sbs)
        folds.append(
            FoldResult(
                fold=fold,
                n_test=int(eval_idx.size),
                par10_model=float(par10_model.mean()),
                par10_vbs=float(par10_vbs.mean()),
                par10_sbs=float(par10_sbs.mean()),
                npar10=_npar10(
                    float(par10_model.mean()), float(par10_vbs.mean()), float(par10_sbs.mean())
                ),
                timeouts=int(timed_out.sum()),
                solved=int(eval_idx.size - timed_out.sum()),
            )
        )
        for row, i in enumerate(eval_idx):
            records.append(
                InstanceRecord(
                    instance_id=scenario.instances[i],
                    fold=fold,
                    selected=scenario.algorithms[chosen[row]],
                    charged_time=float(charged[row]),
                    timed_out=bool(timed_out[row]),
                    par10=float(par10_model[row]),
                )
            )
    if pooled["model"]:
        model_scores = np.concatenate(pooled["model"])
        vbs_scores = np.concatenate(pooled["vbs"])
        sbs_scores = np.concatenate(pooled["sbs"])
        par10 = float(model_scores.mean())
        par10_vbs = float(vbs_scores.mean())
        par10_sbs = float(sbs_scores.mean())
        npar10 = _npar10(par10, par10_vbs, par10_sbs)
    else:
        par10 = par10_vbs = par10_sbs = npar10 = float("nan")
    timeouts = sum(f.timeouts for f in folds)
    solved = sum(f.solved for f in folds)
    return EvaluationReport(
        scenario=scenario.name,
        selector=label,
        seed=seed,
        n_folds=k_folds,
        folds=tuple(folds),
        records=tuple(records),
        par10=par10,
        par10_vbs=par10_vbs,
        par10_sbs=par10_sbs,
        npar10=npar10,
        timeouts=timeouts,
        solved=solved,
        n_instances=len(records),
    )


@dataclass(frozen=True)
class AggregateRow:
    selector: str
    median_npar10: float
    mean_npar10: float
    mean_rank: float


def aggregate(reports: list[EvaluationReport]) -> list[AggregateRow]:
    """Cross-scenario summary: median/mean nPAR10 and mean rank per selector.

    Requires a complete (selector, scenario) grid; ranks are computed within
    each scenario by nPAR10 with ties averaged, and the table is sorted by
    mean rank.
    """
    selectors = list(dict.fromkeys(r.selector for r in reports))
    scenarios = list(dict.fromkeys(r.scenario for r in reports))
    cell = {}
    for r in reports:
        key = (r.selector, r.scenario)
        if key in cell:
            raise AggregationError(f"duplicate evaluation for {key}")
        cell[key] = r.npar10
    gaps = [
        (sel, sc) for sel in selectors for sc in scenarios if (sel, sc) not in cell
    ]
    if gaps:
        raise AggregationError(f"missing (selector, scenario) cells: {gaps}")
    npar10 = np.array([[cell[(sel, sc)] for sc in scenarios] for sel in selectors])
    ranks = np.stack(
        [scipy_stats.rankdata(npar10[:, c], method="average") for c in range(len(scenarios))],
        axis=1,
    )
    rows = [
        AggregateRow(
            selector=sel,
            median_npar10=float(np.median(npar10[i])),
            mean_npar10=float(npar10[i].mean()),
            mean_rank=float(ranks[i].mean()),
        )
        for i, sel in enumerate(selectors)
    ]
    return sorted(rows, key=lambda row: row.mean_rank)


# -- report emission -------------------------------------------------------


def write_summary_csv(reports: list[EvaluationReport], path) -> None:
    """One row per (scenario, selector) evaluation."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "scenario",
                "selector",
                "seed",
                "n_folds",
                "failed_folds",
                "n_instances",
                "par10",
                "par10_vbs",
                "par10_sbs",
                "npar10",
                "timeouts",
                "solved",
            ]
        )
        for r in reports:
            w.writerow(
                [
                    r.scenario,
                    r.selector,
                    r.seed,
                    r.n_folds,
                    r.n_failed_folds,
                    r.n_instances,
                    repr(r.par10),
                    repr(r.par10_vbs),
                    repr(r.par10_sbs),
                    repr(r.npar10),
                    r.timeouts,
                    r.solved,
                ]
            )


def write_records_csv(reports: list[EvaluationReport], path) -> None:
    """Long format: one row per evaluated (selector, instance)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "scenario",
                "selector",
                "fold",
                "instance_id",
                "selected",
                "charged_time",
                "timed_out",
                "par10",
            ]
        )
        for r in reports:
            for rec in r.records:
                w.writerow(
                    [
                        r.scenario,
                        r.selector,
                        rec.fold,
                        rec.instance_id,
                        rec.selected,
                        repr(rec.charged_time),
                        int(rec.timed_out),
                        repr(rec.par10),
                    ]
                )


def write_aggregate_csv(rows: list[AggregateRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["selector", "median_npar10", "mean_npar10", "mean_rank"])
        for row in rows:
            w.writerow(
                [row.selector, repr(row.median_npar10), repr(row.mean_npar10), repr(row.mean_rank)]
            )


def write_aggregate_json(rows: list[AggregateRow], path) -> None:
    data = [
        {
            "selector": row.selector,
            "median_npar10": row.median_npar10,
            "mean_npar10": row.mean_npar10,
            "mean_rank": row.mean_rank,
        }
        for row in rows
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
