"""CART-style trees and bagged forests with pluggable split criteria.

Three criteria share one tree builder: variance reduction (regression), Gini
impurity (classification), and the two-group log-rank statistic (survival).
Per-sample weights feed both the bootstrap sampling probabilities and the
variance/Gini criterion computations; the log-rank criterion works on plain
counts.  Trees are stored as flat node arrays, so routing a whole feature
matrix is a handful of vectorized steps per tree level.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from math import ceil, sqrt

import numpy as np

from ._split import logrank_scan
from .errors import FormatError

CRITERIA = ("variance", "gini", "logrank")

# Gains this small relative to the parent impurity are floating-point noise,
# not structure; treating them as zero keeps pure nodes unsplit.
_GAIN_REL_TOL = 1e-12

_SERIAL_VERSION = "survsel-forest-v1"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features_per_split: int | float | None = None  # None = ceil(sqrt(d))
    min_samples_leaf: int = 1
    min_uncensored_leaf: int = 3  # survival criterion only
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        if self.min_uncensored_leaf < 1:
            raise ValueError("min_uncensored_leaf must be at least 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be nonnegative")
        mf = self.max_features_per_split
        if mf is not None:
            if isinstance(mf, float) and not mf.is_integer():
                if not 0 < mf <= 1:
                    raise ValueError("fractional max_features_per_split must lie in (0, 1]")
            elif int(mf) < 1:
                raise ValueError("max_features_per_split must be positive")

    def resolve_max_features(self, d: int) -> int:
        mf = self.max_features_per_split
        if mf is None:
            m = ceil(sqrt(d))
        elif isinstance(mf, float) and not mf.is_integer():
            m = ceil(mf * d)
        else:
            m = int(mf)
        return max(1, min(m, d))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; feature[i] == -1 marks node i as a leaf."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    leaf_value: np.ndarray | None  # regression payload, NaN on internal nodes
    leaf_probs: np.ndarray | None  # classification payload, (n_nodes, n_classes)
    leaf_members: tuple[np.ndarray, ...] | None  # survival payload

    def __post_init__(self):
        for attr in ("feature", "threshold", "left", "right", "leaf_value", "leaf_probs"):
            arr = getattr(self, attr)
            if arr is not None:
                arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented

        def arr_eq(a, b):
            if (a is None) != (b is None):
                return False
            return a is None or np.array_equal(a, b, equal_nan=True)

        members_eq = (self.leaf_members is None) == (other.leaf_members is None) and (
            self.leaf_members is None
            or (
                len(self.leaf_members) == len(other.leaf_members)
                and all(
                    np.array_equal(a, b)
                    for a, b in zip(self.leaf_members, other.leaf_members)
                )
            )
        )
        return (
            arr_eq(self.feature, other.feature)
            and arr_eq(self.threshold, other.threshold)
            and arr_eq(self.left, other.left)
            and arr_eq(self.right, other.right)
            and arr_eq(self.leaf_value, other.leaf_value)
            and arr_eq(self.leaf_probs, other.leaf_probs)
            and members_eq
        )


@dataclass(frozen=True, eq=False)
class Forest:
    criterion: str
    n_features: int
    n_classes: int  # 0 unless criterion == "gini"
    params: ForestParams
    trees: tuple[Tree, ...]

    def __eq__(self, other):
        if not isinstance(other, Forest):
            return NotImplemented
        return (
            self.criterion == other.criterion
            and self.n_features == other.n_features
            and self.n_classes == other.n_classes
            and self.params == other.params
            and self.trees == other.trees
        )


# -- split search ----------------------------------------------------------


def log_rank_statistic(times_left, censored_left, times_right, censored_right) -> float:
    """Two-group log-rank test statistic, 0 when no uncensored events exist.

    Over the pooled distinct uncensored event times, accumulates the
    observed-minus-expected event count of the left group and normalizes by
    the hypergeometric variance.
    """
    tl = np.asarray(times_left, dtype=float)
    tr = np.asarray(times_right, dtype=float)
    cl = np.asarray(censored_left, dtype=bool)
    cr = np.asarray(censored_right, dtype=bool)
    if tl.size == 0 or tr.size == 0:
        raise ValueError("both groups must be nonempty")
    pooled_t = np.concatenate([tl, tr])
    pooled_e = np.concatenate([~cl, ~cr])
    grid = np.unique(pooled_t[pooled_e])
    if grid.size == 0:
        return 0.0
    pooled_sorted = np.sort(pooled_t)
    left_sorted = np.sort(tl)
    y_all = pooled_t.size - np.searchsorted(pooled_sorted, grid, side="left")
    y_left = tl.size - np.searchsorted(left_sorted, grid, side="left")
    d_all = _counts_at(grid, pooled_t[pooled_e])
    d_left = _counts_at(grid, tl[~cl])
    frac = y_left / y_all
    oe = float(np.sum(d_left - d_all * frac))
    with_var = y_all > 1
    var = float(
        np.sum(
            d_all[with_var]
            * frac[with_var]
            * (1.0 - frac[with_var])
            * (y_all[with_var] - d_all[with_var])
            / (y_all[with_var] - 1.0)
        )
    )
    return oe * oe / var if var > 0 else 0.0


def _counts_at(grid: np.ndarray, times: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(grid, times)
    hit = (idx < grid.size) & (grid[np.minimum(idx, grid.size - 1)] == times)
    return np.bincount(idx[hit], minlength=grid.size)


def _admissible_positions(vals: np.ndarray, min_leaf: int) -> np.ndarray:
    n = vals.size
    i = np.nonzero(vals[:-1] < vals[1:])[0]
    return i[(i + 1 >= min_leaf) & (n - i - 1 >= min_leaf)]


def _best_split_variance(X, y, w, idx, feats, min_leaf):
    best_gain, best_feat, best_thr = 0.0, -1, 0.0
    n = idx.size
    for f in feats:
        order = idx[np.argsort(X[idx, f], kind="stable")]
        vals = X[order, f]
        if vals[0] == vals[-1]:
            continue
        positions = _admissible_positions(vals, min_leaf)
        if positions.size == 0:
            continue
        wv = w[order]
        yv = y[order]
        cw = np.cumsum(wv)
        cwy = np.cumsum(wv * yv)
        cwy2 = np.cumsum(wv * yv * yv)
        w_tot, s1, s2 = cw[-1], cwy[-1], cwy2[-1]
        if w_tot <= 0:
            continue
        sse_parent = s2 - s1 * s1 / w_tot
        if sse_parent <= 0:
            continue
        wl = cw[positions]
        wr = w_tot - wl
        ok = (wl > 0) & (wr > 0)
        if not ok.any():
            continue
        positions, wl, wr = positions[ok], wl[ok], wr[ok]
        sse_l = cwy2[positions] - cwy[positions] ** 2 / wl
        sse_r = (s2 - cwy2[positions]) - (s1 - cwy[positions]) ** 2 / wr
        gains = sse_parent - sse_l - sse_r
        j = int(np.argmax(gains))
        if gains[j] > best_gain and gains[j] > _GAIN_REL_TOL * sse_parent:
            best_gain = float(gains[j])
            best_feat = f
            best_thr = 0.5 * (vals[positions[j]] + vals[positions[j] + 1])
    return best_gain, best_feat, best_thr


def _best_split_gini(X, y, w, idx, feats, min_leaf, n_classes):
    best_gain, best_feat, best_thr = 0.0, -1, 0.0
    for f in feats:
        order = idx[np.argsort(X[idx, f], kind="stable")]
        vals = X[order, f]
        if vals[0] == vals[-1]:
            continue
        positions = _admissible_positions(vals, min_leaf)
        if positions.size == 0:
            continue
        onehot = np.zeros((order.size, n_classes))
        onehot[np.arange(order.size), y[order]] = w[order]
        cum = np.cumsum(onehot, axis=0)
        totals = cum[-1]
        w_tot = totals.sum()
        if w_tot <= 0:
            continue
        # impurity-sum form: W * gini = W - sum_c S_c^2 / W
        g_parent = w_tot - totals @ totals / w_tot
        wl = cum[positions].sum(axis=1)
        wr = w_tot - wl
        ok = (wl > 0) & (wr > 0)
        if not ok.any():
            continue
        positions, wl, wr = positions[ok], wl[ok], wr[ok]
        sl = cum[positions]
        sr = totals - sl
        g_l = wl - np.einsum("ij,ij->i", sl, sl) / wl
        g_r = wr - np.einsum("ij,ij->i", sr, sr) / wr
        gains = g_parent - g_l - g_r
        j = int(np.argmax(gains))
        if gains[j] > best_gain and gains[j] > _GAIN_REL_TOL * max(g_parent, 1.0):
            best_gain = float(gains[j])
            best_feat = f
            best_thr = 0.5 * (vals[positions[j]] + vals[positions[j] + 1])
    return best_gain, best_feat, best_thr


def _best_split_logrank(X, y, event, idx, feats, min_leaf, d0):
    y_node = y[idx]
    e_node = event[idx]
    n_unc = int(e_node.sum())
    grid = np.unique(y_node[e_node])
    if grid.size == 0:
        return 0.0, -1, 0.0
    y_sorted = np.sort(y_node)
    y_total = idx.size - np.searchsorted(y_sorted, grid, side="left")
    d_total = _counts_at(grid, y_node[e_node])
    pos = np.searchsorted(grid, y_node, side="right")
    event_at = np.where(e_node, pos - 1, -1)
    best_gain, best_feat, best_thr = 0.0, -1, 0.0
    for f in feats:
        rel = np.argsort(X[idx, f], kind="stable")
        vals = np.ascontiguousarray(X[idx[rel], f])
        if vals[0] == vals[-1]:
            continue
        stat, split_pos = logrank_scan(
            vals,
            np.ascontiguousarray(pos[rel]),
            np.ascontiguousarray(event_at[rel]),
            d_total.astype(np.int64),
            y_total.astype(np.int64),
            min_leaf,
            d0,
            n_unc,
        )
        if split_pos >= 0 and stat > best_gain:
            best_gain = float(stat)
            best_feat = f
            best_thr = 0.5 * (vals[split_pos] + vals[split_pos + 1])
    return best_gain, best_feat, best_thr


# -- tree construction -----------------------------------------------------


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str,
    params: ForestParams,
    rng: np.random.Generator,
    *,
    censored: np.ndarray | None = None,
    weights: np.ndarray | None = None,
    n_classes: int = 0,
    sample_map: np.ndarray | None = None,
) -> Tree:
    """Grow one tree; degenerate data yields a single leaf.

    ``sample_map`` translates row positions of ``X`` back to caller-side
    sample ids, which is what survival leaves record (the caller computes
    leaf estimators from them).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot fit a tree on empty data")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite; impute missing values first")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if criterion == "logrank":
        if censored is None:
            raise ValueError("survival fitting requires the censored flags")
        event = ~np.asarray(censored, dtype=bool)
    else:
        event = None
    if criterion == "gini":
        y = y.astype(np.int64)
        if n_classes <= 0:
            n_classes = int(y.max()) + 1
    else:
        y = y.astype(float)
    if sample_map is None:
        sample_map = np.arange(n)
    m_feats = params.resolve_max_features(d)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    leaf_value: list[float] = []
    leaf_probs: list[np.ndarray] = []
    leaf_members: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_value.append(np.nan)
        leaf_probs.append(np.zeros(n_classes))
        leaf_members.append(np.empty(0, dtype=np.int64))
        return len(feature) - 1

    def make_leaf(slot: int, idx: np.ndarray) -> None:
        wv = w[idx]
        w_tot = wv.sum()
        if criterion == "variance":
            leaf_value[slot] = float(np.average(y[idx], weights=wv) if w_tot > 0 else y[idx].mean())
        elif criterion == "gini":
            counts = np.bincount(y[idx], weights=wv if w_tot > 0 else None, minlength=n_classes)
            leaf_probs[slot] = counts / counts.sum()
        else:
            leaf_members[slot] = np.sort(sample_map[idx]).astype(np.int64)

    def choose_split(idx: np.ndarray):
        feats = np.sort(rng.choice(d, size=m_feats, replace=False))
        if criterion == "variance":
            if np.all(y[idx] == y[idx[0]]):
                return None
            gain, f, thr = _best_split_variance(X, y, w, idx, feats, params.min_samples_leaf)
        elif criterion == "gini":
            if np.all(y[idx] == y[idx[0]]):
                return None
            gain, f, thr = _best_split_gini(
                X, y, w, idx, feats, params.min_samples_leaf, n_classes
            )
        else:
            if event[idx].sum() < 2 * params.min_uncensored_leaf:
                return None
            gain, f, thr = _best_split_logrank(
                X, y, event, idx, feats, params.min_samples_leaf, params.min_uncensored_leaf
            )
        return None if f < 0 else (f, thr)

    root = new_node()
    stack = [(np.arange(n), 0, root)]
    while stack:
        idx, depth, slot = stack.pop()
        depth_ok = params.max_depth is None or depth < params.max_depth
        split = None
        if depth_ok and idx.size >= 2 * params.min_samples_leaf:
            split = choose_split(idx)
        if split is None:
            make_leaf(slot, idx)
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        l_slot = new_node()
        r_slot = new_node()
        feature[slot] = f
        threshold[slot] = thr
        left[slot] = l_slot
        right[slot] = r_slot
        # LIFO: push right first so the left subtree is numbered first
        stack.append((idx[~go_left], depth + 1, r_slot))
        stack.append((idx[go_left], depth + 1, l_slot))

    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        leaf_value=np.asarray(leaf_value) if criterion == "variance" else None,
        leaf_probs=np.asarray(leaf_probs) if criterion == "gini" else None,
        leaf_members=tuple(leaf_members) if criterion == "logrank" else None,
    )


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    criterion: str,
    params: ForestParams,
    *,
    censored: np.ndarray | None = None,
    weights: np.ndarray | None = None,
    n_classes: int = 0,
    seed: int | None = None,
) -> Forest:
    """Bag ``params.n_trees`` trees; per-tree seeds depend only on the tree
    index, so any fitting order yields the identical forest."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a nonempty (n, d) matrix")
    n = X.shape[0]
    y = np.asarray(y)
    if len(y) != n:
        raise ValueError("y length must match X")
    if criterion == "gini" and n_classes <= 0:
        n_classes = int(np.max(y)) + 1
    w = None if weights is None else np.asarray(weights, dtype=float)
    if w is not None and (np.any(w < 0) or w.sum() <= 0):
        raise ValueError("weights must be nonnegative with positive sum")
    base_seed = params.seed if seed is None else seed
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng([base_seed, 0x7EE5, t])
        if params.bootstrap:
            p = None if w is None else w / w.sum()
            smap = rng.choice(n, size=n, replace=True, p=p)
        else:
            smap = np.arange(n)
        trees.append(
            fit_tree(
                X[smap],
                y[smap],
                criterion,
                params,
                rng,
                censored=None if censored is None else np.asarray(censored, bool)[smap],
                weights=None if w is None else w[smap],
                n_classes=n_classes,
                sample_map=smap,
            )
        )
    return Forest(
        criterion=criterion,
        n_features=X.shape[1],
        n_classes=n_classes if criterion == "gini" else 0,
        params=params,
        trees=tuple(trees),
    )


# -- routing and prediction ------------------------------------------------


def leaf_indices(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf node index per row of ``X`` (vectorized level-by-level descent)."""
    X = np.asarray(X, dtype=float)
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            return node
        cur = node[active]
        go_left = X[active, f[active]] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])


def route(tree: Tree, x: np.ndarray, n_features: int | None = None) -> int:
    """Leaf index for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("route expects a single feature vector")
    expected = n_features
    if expected is None:
        used = tree.feature[tree.feature >= 0]
        expected = int(used.max()) + 1 if used.size else 0
    if x.size < expected:
        raise ValueError(f"feature vector has {x.size} entries, expected at least {expected}")
    if not np.isfinite(x).all():
        raise ValueError("impute missing feature values before routing")
    return int(leaf_indices(tree, x[np.newaxis, :])[0])


def _as_matrix(x: np.ndarray, n_features: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    mat = x[np.newaxis, :] if single else x
    if mat.ndim != 2 or mat.shape[1] != n_features:
        raise ValueError(f"expected feature dimension {n_features}, got shape {x.shape}")
    if not np.isfinite(mat).all():
        raise ValueError("impute missing feature values before prediction")
    return mat, single


def predict_regression_per_tree(forest: Forest, x: np.ndarray) -> np.ndarray:
    """(n_trees, n) matrix of single-tree mean predictions."""
    if forest.criterion != "variance":
        raise ValueError("per-tree regression predictions need a variance-criterion forest")
    mat, single = _as_matrix(x, forest.n_features)
    out = np.empty((len(forest.trees), mat.shape[0]))
    for t, tree in enumerate(forest.trees):
        out[t] = tree.leaf_value[leaf_indices(tree, mat)]
    return out[:, 0] if single else out


def predict_regression(forest: Forest, x: np.ndarray):
    """Mean over trees; scalar for a single vector, (n,) for a matrix."""
    per_tree = predict_regression_per_tree(forest, x)
    out = per_tree.mean(axis=0)
    return float(out) if out.ndim == 0 else out


def predict_class_probs(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Mean of per-tree leaf class frequencies; (K,) or (n, K)."""
    if forest.criterion != "gini":
        raise ValueError("class probabilities need a gini-criterion forest")
    mat, single = _as_matrix(x, forest.n_features)
    acc = np.zeros((mat.shape[0], forest.n_classes))
    for tree in forest.trees:
        acc += tree.leaf_probs[leaf_indices(tree, mat)]
    acc /= len(forest.trees)
    return acc[0] if single else acc


# -- serialization ---------------------------------------------------------


def save_forest(forest: Forest, path) -> None:
    """Write a forest to ``path`` (npz container with a versioned header)."""
    meta = {
        "version": _SERIAL_VERSION,
        "criterion": forest.criterion,
        "n_features": forest.n_features,
        "n_classes": forest.n_classes,
        "n_trees": len(forest.trees),
        "params": asdict(forest.params),
    }
    payload = {"meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for t, tree in enumerate(forest.trees):
        payload[f"t{t}_feature"] = tree.feature
        payload[f"t{t}_threshold"] = tree.threshold
        payload[f"t{t}_left"] = tree.left
        payload[f"t{t}_right"] = tree.right
        if tree.leaf_value is not None:
            payload[f"t{t}_leaf_value"] = tree.leaf_value
        if tree.leaf_probs is not None:
            payload[f"t{t}_leaf_probs"] = tree.leaf_probs
        if tree.leaf_members is not None:
            lengths = np.array([len(m) for m in tree.leaf_members], dtype=np.int64)
            payload[f"t{t}_member_lengths"] = lengths
            payload[f"t{t}_member_data"] = (
                np.concatenate(tree.leaf_members) if lengths.sum() else np.empty(0, np.int64)
            )
    np.savez_compressed(path, **payload)


def load_forest(path) -> Forest:
    with np.load(path) as data:
        try:
            meta = json.loads(bytes(data["meta"]))
        except KeyError:
            raise FormatError(f"{path}: not a forest file (missing header)")
        if meta.get("version") != _SERIAL_VERSION:
            raise FormatError(
                f"{path}: unsupported forest format {meta.get('version')!r}, "
                f"expected {_SERIAL_VERSION}"
            )
        trees = []
        for t in range(meta["n_trees"]):
            members = None
            if f"t{t}_member_lengths" in data:
                lengths = data[f"t{t}_member_lengths"]
                flat = data[f"t{t}_member_data"]
                offsets = np.concatenate(([0], np.cumsum(lengths)))
                members = tuple(
                    flat[offsets[i] : offsets[i + 1]] for i in range(len(lengths))
                )
            trees.append(
                Tree(
                    feature=data[f"t{t}_feature"],
                    threshold=data[f"t{t}_threshold"],
                    left=data[f"t{t}_left"],
                    right=data[f"t{t}_right"],
                    leaf_value=data.get(f"t{t}_leaf_value"),
                    leaf_probs=data.get(f"t{t}_leaf_probs"),
                    leaf_members=members,
                )
            )
    params = ForestParams(**meta["params"])
    return Forest(
        criterion=meta["criterion"],
        n_features=meta["n_features"],
        n_classes=meta["n_classes"],
        params=params,
        trees=tuple(trees),
    )
