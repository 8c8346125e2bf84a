"""Scenario data model and ASlib-style loading.

A scenario is a runtimes matrix over (instance, algorithm) pairs with
censoring flags, per-instance feature vectors, optional feature costs, a
cutoff ``C``, and optional cross-validation fold assignments.  Two on-disk
layouts are accepted:

* ASlib subset: ``description.txt``, ``algorithm_runs.arff``,
  ``feature_values.arff``, optional ``feature_costs.arff`` and ``cv.arff``.
* CSV trio (used for synthetic scenarios): ``meta.csv``, ``runs.csv``,
  ``features.csv``, optional ``costs.csv`` and ``cv.csv``.

Any run whose status is not ``ok`` is recorded as censored at the cutoff;
measured times above the cutoff are clamped and censored.  Cells never run
at all are treated the same way (censored at ``C``), which is the
pessimistic completion for a partially filled runtime matrix.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arff import read_arff
from .errors import ConsistencyError, FormatError

log = logging.getLogger(__name__)

# Uncensored runs reported as 0 seconds are clamped to this floor so that
# runtimes stay strictly positive.
MIN_RUNTIME = 1e-6


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    algorithms: tuple[str, ...]
    instances: tuple[str, ...]
    feature_names: tuple[str, ...]
    features: np.ndarray  # (n_instances, n_features), NaN = missing
    feature_costs: np.ndarray  # (n_instances,), seconds
    runtimes: np.ndarray  # (n_instances, n_algorithms), seconds in (0, C]
    censored: np.ndarray  # (n_instances, n_algorithms), bool
    cutoff: float
    folds: np.ndarray | None = None  # (n_instances,), fold ids 1..k, or None

    def __post_init__(self):
        for attr in ("features", "feature_costs", "runtimes", "censored", "folds"):
            arr = getattr(self, attr)
            if arr is not None:
                arr = np.asarray(arr)
                arr.flags.writeable = False
                object.__setattr__(self, attr, arr)
        object.__setattr__(self, "_instance_index", {s: i for i, s in enumerate(self.instances)})
        object.__setattr__(self, "_algorithm_index", {s: i for i, s in enumerate(self.algorithms)})
        self.validate()

    # -- structure ---------------------------------------------------------
    @property
    def n_instances(self) -> int:
        return len(self.instances)

    @property
    def n_algorithms(self) -> int:
        return len(self.algorithms)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def instance_index(self, instance_id: str) -> int:
        return self._instance_index[instance_id]

    def algorithm_index(self, algorithm: str) -> int:
        return self._algorithm_index[algorithm]

    def unsolvable_mask(self) -> np.ndarray:
        """True for instances on which every algorithm is censored."""
        return self.censored.all(axis=1)

    def validate(self) -> None:
        n, m = len(self.instances), len(self.algorithms)
        if self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if len(set(self.instances)) != n:
            raise ValueError("duplicate instance ids")
        if len(set(self.algorithms)) != m:
            raise ValueError("duplicate algorithm ids")
        if self.features.shape != (n, len(self.feature_names)):
            raise ValueError("features shape mismatch")
        if self.runtimes.shape != (n, m) or self.censored.shape != (n, m):
            raise ValueError("runtime matrix shape mismatch")
        if self.feature_costs.shape != (n,):
            raise ValueError("feature cost shape mismatch")
        if np.any(self.feature_costs < 0):
            raise ValueError("feature costs must be nonnegative")
        if np.any(self.runtimes <= 0) or np.any(self.runtimes > self.cutoff):
            raise ValueError("runtimes must lie in (0, cutoff]")
        if np.any(self.runtimes[self.censored] != self.cutoff):
            raise ValueError("censored runs must sit exactly at the cutoff")
        if self.folds is not None:
            if self.folds.shape != (n,):
                raise ValueError("fold assignment shape mismatch")
            if np.any(self.folds < 1):
                raise ValueError("fold ids must start at 1")

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.name == other.name
            and self.algorithms == other.algorithms
            and self.instances == other.instances
            and self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.feature_costs, other.feature_costs)
            and np.array_equal(self.runtimes, other.runtimes)
            and np.array_equal(self.censored, other.censored)
            and self.cutoff == other.cutoff
            and (
                (self.folds is None and other.folds is None)
                or (
                    self.folds is not None
                    and other.folds is not None
                    and np.array_equal(self.folds, other.folds)
                )
            )
        )


@dataclass(frozen=True, eq=False)
class ScenarioView:
    """A subset of a scenario's instances (e.g. one fold's training half)."""

    scenario: Scenario
    idx: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("view needs a nonempty 1-D index array")
        if idx.min() < 0 or idx.max() >= self.scenario.n_instances:
            raise ValueError("view indices out of range")
        idx.flags.writeable = False
        object.__setattr__(self, "idx", idx)

    @property
    def features(self) -> np.ndarray:
        return self.scenario.features[self.idx]

    @property
    def runtimes(self) -> np.ndarray:
        return self.scenario.runtimes[self.idx]

    @property
    def censored(self) -> np.ndarray:
        return self.scenario.censored[self.idx]

    @property
    def feature_costs(self) -> np.ndarray:
        return self.scenario.feature_costs[self.idx]

    @property
    def cutoff(self) -> float:
        return self.scenario.cutoff

    @property
    def algorithms(self) -> tuple[str, ...]:
        return self.scenario.algorithms

    @property
    def n_algorithms(self) -> int:
        return self.scenario.n_algorithms

    @property
    def n_instances(self) -> int:
        return self.idx.size

    @property
    def instance_ids(self) -> tuple[str, ...]:
        return tuple(self.scenario.instances[i] for i in self.idx)

    def take(self, rel_idx) -> "ScenarioView":
        """Sub-view by positions relative to this view."""
        return ScenarioView(self.scenario, self.idx[np.asarray(rel_idx, dtype=int)])


@dataclass(frozen=True)
class ScenarioStats:
    n_instances: int
    n_unsolvable: int
    n_algorithms: int
    n_features: int
    cutoff: float
    pct_censored: float


def compute_stats(s: Scenario) -> ScenarioStats:
    """Counts and censoring percentage of a scenario."""
    return ScenarioStats(
        n_instances=s.n_instances,
        n_unsolvable=int(s.unsolvable_mask().sum()),
        n_algorithms=s.n_algorithms,
        n_features=s.n_features,
        cutoff=s.cutoff,
        pct_censored=100.0 * float(s.censored.mean()) if s.censored.size else 0.0,
    )


def make_folds(s: Scenario, k: int, seed: int) -> np.ndarray:
    """Fold ids 1..k per instance.

    Returns the scenario-provided assignment verbatim when one exists;
    otherwise performs a seeded shuffle split into k near-equal parts.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if k > s.n_instances:
        raise ValueError(f"cannot split {s.n_instances} instances into {k} folds")
    if s.folds is not None:
        return s.folds.copy()
    rng = np.random.default_rng([seed, 0xF01D])
    order = rng.permutation(s.n_instances)
    folds = np.empty(s.n_instances, dtype=int)
    for fold, chunk in enumerate(np.array_split(order, k), start=1):
        folds[chunk] = fold
    return folds


# -- loading ---------------------------------------------------------------


def load_scenario(path) -> Scenario:
    """Load a scenario directory (ASlib subset or CSV trio)."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"scenario directory not found: {path}")
    if (path / "description.txt").exists():
        return _load_aslib(path)
    if (path / "meta.csv").exists():
        return _load_csv(path)
    raise FormatError(f"{path}: neither description.txt (ASlib) nor meta.csv (CSV) present")


def _require(path: Path, name: str) -> Path:
    f = path / name
    if not f.exists():
        raise FormatError(f"missing required file {name} in {path}")
    return f


def _read_description(path: Path) -> dict:
    """Top-level ``key: value`` pairs of an ASlib description file."""
    pairs = {}
    for raw in open(path, encoding="utf-8"):
        if not raw.strip() or raw.startswith((" ", "\t", "-", "#")):
            continue
        key, sep, value = raw.partition(":")
        if sep:
            pairs[key.strip()] = value.strip()
    return pairs


def _check_instances(canonical: set, other: set, canonical_src: str, other_src: str):
    missing = sorted(canonical - other)
    extra = sorted(other - canonical)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"in {canonical_src} but not {other_src}: {missing[:10]}")
        if extra:
            parts.append(f"in {other_src} but not {canonical_src}: {extra[:10]}")
        raise ConsistencyError("inconsistent instance sets; " + "; ".join(parts))


def _censor(raw_time, status_ok: bool, cutoff: float) -> tuple[float, bool]:
    if not status_ok or raw_time is None:
        return cutoff, True
    if raw_time >= cutoff:
        return cutoff, raw_time > cutoff  # measured exactly at C stays uncensored
    return max(float(raw_time), MIN_RUNTIME), False


def _assemble(
    name,
    cutoff,
    feature_names,
    feature_rows,  # instance -> list of float|None, in canonical order
    run_records,  # (instance, algorithm) -> (time, ok)
    cost_map,
    fold_map,
    runs_src,
    features_src,
) -> Scenario:
    instances = tuple(feature_rows)
    run_instances = {i for i, _ in run_records}
    _check_instances(set(instances), run_instances, features_src, runs_src)
    algorithms = []
    for (_, a) in run_records:
        if a not in algorithms:
            algorithms.append(a)
    algorithms = tuple(algorithms)

    n, m, d = len(instances), len(algorithms), len(feature_names)
    features = np.full((n, d), np.nan)
    for i, inst in enumerate(instances):
        row = feature_rows[inst]
        features[i] = [np.nan if v is None else v for v in row]
    runtimes = np.full((n, m), cutoff)
    censored = np.ones((n, m), dtype=bool)
    idx_i = {s: i for i, s in enumerate(instances)}
    idx_a = {s: i for i, s in enumerate(algorithms)}
    for (inst, alg), (raw, ok) in run_records.items():
        y, delta = _censor(raw, ok, cutoff)
        runtimes[idx_i[inst], idx_a[alg]] = y
        censored[idx_i[inst], idx_a[alg]] = delta
    costs = np.zeros(n)
    for inst, c in cost_map.items():
        if inst in idx_i:
            costs[idx_i[inst]] = c
    folds = None
    if fold_map:
        _check_instances(set(instances), set(fold_map), features_src, "cv assignment")
        folds = np.array([int(fold_map[inst]) for inst in instances])
    return Scenario(
        name=name,
        algorithms=algorithms,
        instances=instances,
        feature_names=tuple(feature_names),
        features=features,
        feature_costs=costs,
        runtimes=runtimes,
        censored=censored,
        cutoff=float(cutoff),
        folds=folds,
    )


def _load_aslib(path: Path) -> Scenario:
    desc = _read_description(_require(path, "description.txt"))
    name = desc.get("scenario_id", path.name)
    try:
        cutoff = float(desc.get("algorithm_cutoff_time", ""))
    except ValueError:
        raise FormatError(f"{path/'description.txt'}: missing or non-numeric algorithm_cutoff_time")

    runs = read_arff(_require(path, "algorithm_runs.arff"))
    if not runs.rows:
        raise FormatError(f"{path/'algorithm_runs.arff'}: no data rows")
    try:
        c_inst = runs.column("instance_id")
        c_rep = runs.column("repetition")
        c_alg = runs.column("algorithm")
        c_time = runs.column("runtime")
        c_status = runs.column("runstatus")
    except KeyError as exc:
        raise FormatError(f"{path/'algorithm_runs.arff'}: missing column {exc}") from exc
    run_records: dict[tuple[str, str], tuple] = {}
    for row in runs.rows:
        key = (str(row[c_inst]), str(row[c_alg]))
        if key in run_records:
            continue  # repetitions beyond the first are ignored
        rep = row[c_rep]
        if rep is not None and float(rep) > 1:
            continue
        status = (row[c_status] or "").strip().lower()
        run_records[key] = (row[c_time], status == "ok")

    feats = read_arff(_require(path, "feature_values.arff"))
    skip = {"instance_id", "repetition"}
    feat_cols = [i for i, (attr, _) in enumerate(feats.attributes) if attr.lower() not in skip]
    feature_names = [feats.attributes[i][0] for i in feat_cols]
    f_inst = feats.column("instance_id")
    feature_rows: dict[str, list] = {}
    for row in feats.rows:
        inst = str(row[f_inst])
        if inst not in feature_rows:  # first repetition wins
            feature_rows[inst] = [row[i] for i in feat_cols]

    cost_map: dict[str, float] = {}
    cost_path = path / "feature_costs.arff"
    if cost_path.exists():
        costs = read_arff(cost_path)
        g_inst = costs.column("instance_id")
        group_cols = [
            i for i, (attr, _) in enumerate(costs.attributes) if attr.lower() not in skip
        ]
        for row in costs.rows:
            inst = str(row[g_inst])
            if inst not in cost_map:
                # total cost = sum over feature groups; missing entries cost 0
                cost_map[inst] = float(sum(row[i] or 0.0 for i in group_cols))

    fold_map: dict[str, int] = {}
    cv_path = path / "cv.arff"
    if cv_path.exists():
        cv = read_arff(cv_path)
        v_inst = cv.column("instance_id")
        v_fold = cv.column("fold")
        for row in cv.rows:
            inst = str(row[v_inst])
            if inst not in fold_map:
                fold_map[inst] = int(row[v_fold])

    return _assemble(
        name, cutoff, feature_names, feature_rows, run_records, cost_map, fold_map,
        "algorithm_runs.arff", "feature_values.arff",
    )


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _load_csv(path: Path) -> Scenario:
    meta = {}
    for row in _read_csv(_require(path, "meta.csv")):
        if "key" not in row or "value" not in row:
            raise FormatError(f"{path/'meta.csv'}: expected 'key,value' header")
        meta[row["key"]] = row["value"]
    name = meta.get("scenario_id", path.name)
    try:
        cutoff = float(meta.get("algorithm_cutoff_time", ""))
    except ValueError:
        raise FormatError(f"{path/'meta.csv'}: missing or non-numeric algorithm_cutoff_time")

    run_rows = _read_csv(_require(path, "runs.csv"))
    if not run_rows:
        raise FormatError(f"{path/'runs.csv'}: no data rows")
    run_records: dict[tuple[str, str], tuple] = {}
    for row in run_rows:
        try:
            key = (row["instance_id"], row["algorithm"])
            t = float(row["runtime"])
            ok = row["runstatus"].strip().lower() == "ok"
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{path/'runs.csv'}: bad row {row}: {exc}") from exc
        run_records.setdefault(key, (t, ok))

    feat_rows = _read_csv(_require(path, "features.csv"))
    if not feat_rows:
        raise FormatError(f"{path/'features.csv'}: no data rows")
    feature_names = [c for c in feat_rows[0].keys() if c != "instance_id"]
    feature_rows: dict[str, list] = {}
    for row in feat_rows:
        vals = [None if row[c] in ("", "?") else float(row[c]) for c in feature_names]
        feature_rows.setdefault(row["instance_id"], vals)

    cost_map: dict[str, float] = {}
    if (path / "costs.csv").exists():
        for row in _read_csv(path / "costs.csv"):
            cost_map.setdefault(row["instance_id"], float(row["cost"]))
    fold_map: dict[str, int] = {}
    if (path / "cv.csv").exists():
        for row in _read_csv(path / "cv.csv"):
            fold_map.setdefault(row["instance_id"], int(row["fold"]))

    return _assemble(
        name, cutoff, feature_names, feature_rows, run_records, cost_map, fold_map,
        "runs.csv", "features.csv",
    )


def save_scenario_csv(s: Scenario, out_dir) -> None:
    """Write a scenario as the CSV trio accepted by :func:`load_scenario`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "meta.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        w.writerow(["scenario_id", s.name])
        w.writerow(["algorithm_cutoff_time", repr(s.cutoff)])
        w.writerow(["number_of_features", s.n_features])
    with open(out / "runs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "algorithm", "runtime", "runstatus"])
        for i, inst in enumerate(s.instances):
            for j, alg in enumerate(s.algorithms):
                status = "timeout" if s.censored[i, j] else "ok"
                w.writerow([inst, alg, repr(float(s.runtimes[i, j])), status])
    with open(out / "features.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", *s.feature_names])
        for i, inst in enumerate(s.instances):
            row = ["?" if np.isnan(v) else repr(float(v)) for v in s.features[i]]
            w.writerow([inst, *row])
    if np.any(s.feature_costs > 0):
        with open(out / "costs.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "cost"])
            for i, inst in enumerate(s.instances):
                w.writerow([inst, repr(float(s.feature_costs[i]))])
    if s.folds is not None:
        with open(out / "cv.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "fold"])
            for i, inst in enumerate(s.instances):
                w.writerow([inst, int(s.folds[i])])
