"""Random survival forest: log-rank splits, Nelson-Aalen leaves, permutation
variable importance.

Trees are grown on bootstrap samples; each split maximizes the standardized
log-rank statistic over ``mtry`` randomly chosen candidate variables and all
observed thresholds of each. Terminal nodes carry Nelson-Aalen cumulative
hazard step functions evaluated on the shared grid of the training data's
distinct event times, so the ensemble CHF is a plain average. A subject's
mortality is the sum of its ensemble CHF over that grid; out-of-bag error is
1 - Harrell's C of mortalities.

VIMP permutes one covariate column over each tree's out-of-bag rows (fresh
permutation per tree and variable), re-predicts, and reports the increase in
out-of-bag error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .data import SurvivalDataset
from .metrics import harrell_c


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None          # None -> ceil(sqrt(p))
    min_node_events: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_node_events < 1:
            raise ValueError("min_node_events must be >= 1")

    def resolved_mtry(self, p: int) -> int:
        m = self.mtry if self.mtry is not None else int(np.ceil(np.sqrt(p)))
        if not 1 <= m <= p:
            raise ValueError(f"mtry must be in [1, {p}], got {m}")
        return m


@dataclass
class SurvivalTree:
    """Flattened binary tree; feature == -1 marks a terminal node."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_chf: np.ndarray       # (n_nodes, n_grid); zero rows for internal nodes
    in_bag: np.ndarray         # bool mask over training subjects
    n_splits: int


@dataclass
class Forest:
    trees: list[SurvivalTree]
    time_grid: np.ndarray      # distinct event times of the training data
    config: ForestConfig
    n_features: int


@dataclass(frozen=True)
class VimpResult:
    importance: np.ndarray
    oob_error: float


@njit(cache=True)
def _best_split(xv, r_i, is_event, d_all, Y_all, min_events, total_events):
    """Exhaustive log-rank split search for one candidate variable.

    r_i[i] counts the node's distinct event times <= t_i, so subject i sits
    in the risk set of event-time slots 0..r_i[i]-1. Returns
    (score, threshold); score < 0 means no admissible split.
    """
    m = xv.shape[0]
    n_ev_times = d_all.shape[0]
    order = np.argsort(xv)
    YL = np.zeros(n_ev_times)
    dL = np.zeros(n_ev_times)
    evL = 0
    best = -1.0
    best_thr = 0.0
    for pos in range(m - 1):
        i = order[pos]
        for e in range(r_i[i]):
            YL[e] += 1.0
        if is_event[i]:
            dL[r_i[i] - 1] += 1.0
            evL += 1
        if xv[order[pos]] == xv[order[pos + 1]]:
            continue
        evR = total_events - evL
        if evL < min_events or evR < min_events:
            continue
        num = 0.0
        var = 0.0
        for e in range(n_ev_times):
            Y = Y_all[e]
            yl = YL[e]
            d = d_all[e]
            num += dL[e] - d * yl / Y
            if Y > 1.0:
                var += d * (yl / Y) * (1.0 - yl / Y) * (Y - d) / (Y - 1.0)
        if var > 0.0:
            score = abs(num) / np.sqrt(var)
            if score > best:
                best = score
                best_thr = 0.5 * (xv[order[pos]] + xv[order[pos + 1]])
    return best, best_thr


@njit(cache=True)
def _traverse(feature, threshold, left, right, X):
    """Terminal-node index for each row of X."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True)
def _permuted_mortality(feature, threshold, left, right, leaf_mort,
                        Xoob, Xperm, out):
    """Accumulate per-variable permuted mortalities for one tree's OOB rows.

    Xperm[j, i] is the permuted value of variable j for OOB row i; all other
    variables keep their observed values.
    """
    n = Xoob.shape[0]
    p = Xoob.shape[1]
    for j in range(p):
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                f = feature[node]
                v = Xperm[j, i] if f == j else Xoob[i, f]
                if v <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[j, i] += leaf_mort[node]


def _nelson_aalen_on_grid(times, status, grid) -> np.ndarray:
    """Nelson-Aalen cumulative hazard of a node, evaluated at grid points."""
    order = np.argsort(times, kind="stable")
    ts, ss = times[order], status[order]
    distinct, start = np.unique(ts, return_index=True)
    at_risk = len(ts) - start
    d = np.add.reduceat(ss, start)
    keep = d > 0
    if not keep.any():
        return np.zeros(len(grid))
    chf_steps = np.cumsum(d[keep] / at_risk[keep])
    pos = np.searchsorted(distinct[keep], grid, side="right")
    return np.concatenate(([0.0], chf_steps))[pos]


def _grow_tree(Xb, tb, sb, mtry, min_events, grid, rng):
    """Grow one tree on a bootstrap sample; returns flattened arrays."""
    p = Xb.shape[1]
    feature, threshold, left, right = [], [], [], []
    leaf_rows = {}
    n_splits = 0

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        return len(feature) - 1

    stack = [(new_node(), np.arange(Xb.shape[0]))]
    while stack:
        node, rows = stack.pop()
        t_node, s_node = tb[rows], sb[rows]
        total_events = int(s_node.sum())
        split = None
        best_score = -1.0
        if total_events >= 2 * min_events and rows.size >= 2:
            ev_times = np.unique(t_node[s_node == 1])
            d_all = np.bincount(
                np.searchsorted(ev_times, t_node[s_node == 1]),
                minlength=len(ev_times)).astype(float)
            t_sorted = np.sort(t_node)
            Y_all = (rows.size
                     - np.searchsorted(t_sorted, ev_times, side="left")).astype(float)
            r_i = np.searchsorted(ev_times, t_node, side="right").astype(np.int64)
            is_event = s_node.astype(np.bool_)
            candidates = rng.choice(p, size=mtry, replace=False)
            for j in candidates:
                score, thr = _best_split(np.ascontiguousarray(Xb[rows, j]),
                                         r_i, is_event, d_all, Y_all,
                                         min_events, total_events)
                if score > best_score:
                    best_score = score
                    split = (int(j), float(thr))
        if split is not None and best_score > 0.0:
            j, thr = split
            go_left = Xb[rows, j] <= thr
            feature[node] = j
            threshold[node] = thr
            nl, nr = new_node(), new_node()
            left[node], right[node] = nl, nr
            n_splits += 1
            stack.append((nl, rows[go_left]))
            stack.append((nr, rows[~go_left]))
        else:
            leaf_rows[node] = rows

    n_nodes = len(feature)
    leaf_chf = np.zeros((n_nodes, len(grid)))
    for node, rows in leaf_rows.items():
        leaf_chf[node] = _nelson_aalen_on_grid(tb[rows], sb[rows], grid)
    return (np.array(feature, dtype=np.int64), np.array(threshold),
            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
            leaf_chf, n_splits)


def grow_forest(data: SurvivalDataset, config: ForestConfig) -> Forest:
    """Grow the ensemble on bootstrap samples of the data."""
    if data.n_events < 2 * config.min_node_events:
        raise ValueError(
            f"need at least {2 * config.min_node_events} events to grow trees")
    mtry = config.resolved_mtry(data.p)
    grid = np.unique(data.times[data.status == 1])
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = []
    any_split = False
    for k in range(config.n_trees):
        rng = np.random.default_rng(seeds[k])
        boot = rng.integers(0, data.n, size=data.n)
        in_bag = np.zeros(data.n, dtype=bool)
        in_bag[boot] = True
        Xb = data.covariates[boot]
        fe, th, le, ri, chf, n_splits = _grow_tree(
            Xb, data.times[boot], data.status[boot], mtry,
            config.min_node_events, grid, rng)
        any_split = any_split or n_splits > 0
        trees.append(SurvivalTree(feature=fe, threshold=th, left=le, right=ri,
                                  leaf_chf=chf, in_bag=in_bag,
                                  n_splits=n_splits))
    if not any_split:
        raise ValueError("degenerate data: no tree admitted a single split")
    return Forest(trees=trees, time_grid=grid, config=config,
                  n_features=data.p)


def predict_cumulative_hazard(forest: Forest, X) -> np.ndarray:
    """Ensemble cumulative hazard (average of tree CHFs) on the time grid."""
    X = np.ascontiguousarray(np.asarray(X, dtype=float))
    acc = np.zeros((X.shape[0], len(forest.time_grid)))
    for tree in forest.trees:
        leaves = _traverse(tree.feature, tree.threshold, tree.left, tree.right, X)
        acc += tree.leaf_chf[leaves]
    return acc / len(forest.trees)


def predict_mortality(forest: Forest, X) -> np.ndarray:
    """Ensemble mortality: CHF summed over the event-time grid, per row."""
    return predict_cumulative_hazard(forest, X).sum(axis=1)


def vimp(forest: Forest, data: SurvivalDataset, seed: int | None = None) -> VimpResult:
    """Permutation importance from the increase in out-of-bag error.

    The per-subject out-of-bag mortality averages tree mortalities over the
    trees where the subject was out of bag; the error is 1 - Harrell's C.
    """
    n, p = data.n, data.p
    if p != forest.n_features:
        raise ValueError("data does not match the forest's feature count")
    X = data.covariates
    base_acc = np.zeros(n)
    perm_acc = np.zeros((p, n))
    counts = np.zeros(n)
    seed = forest.config.seed if seed is None else seed
    seeds = np.random.SeedSequence((seed, 0x5eed)).spawn(len(forest.trees))
    for k, tree in enumerate(forest.trees):
        oob = np.flatnonzero(~tree.in_bag)
        if oob.size == 0:
            continue
        Xoob = np.ascontiguousarray(X[oob])
        leaf_mort = tree.leaf_chf.sum(axis=1)
        leaves = _traverse(tree.feature, tree.threshold, tree.left, tree.right,
                           Xoob)
        base_acc[oob] += leaf_mort[leaves]
        counts[oob] += 1.0
        rng = np.random.default_rng(seeds[k])
        order = np.argsort(rng.random((p, oob.size)), axis=1)
        Xperm = np.take_along_axis(np.ascontiguousarray(Xoob.T), order, axis=1)
        out = np.zeros((p, oob.size))
        _permuted_mortality(tree.feature, tree.threshold, tree.left, tree.right,
                            leaf_mort, Xoob, Xperm, out)
        perm_acc[:, oob] += out
    covered = counts > 0
    if not covered.any():
        raise ValueError("no subject was ever out of bag; cannot compute VIMP")
    t_c, s_c = data.times[covered], data.status[covered]
    base_mort = base_acc[covered] / counts[covered]
    err_base = 1.0 - harrell_c(t_c, s_c, base_mort)
    importance = np.empty(p)
    for j in range(p):
        mort_j = perm_acc[j, covered] / counts[covered]
        importance[j] = (1.0 - harrell_c(t_c, s_c, mort_j)) - err_base
    return VimpResult(importance=importance, oob_error=float(err_base))
