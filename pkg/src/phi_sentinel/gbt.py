"""From-scratch gradient-boosted decision trees for binary classification,
with sparsity-aware default directions for missing (NaN) slots, plus Platt
sigmoid calibration of raw margins.

Training is exact greedy: every midpoint between consecutive distinct sorted
feature values is a candidate, missing rows are tried on both sides of each
candidate, and second-order (Newton) leaf weights are used with an L2 penalty
on leaf values.  Everything is deterministic: equal-gain ties resolve to the
lowest slot index, then the smallest threshold, then missing-left.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .metafeatures import SLOT_NAMES, MetaFeatureVector

__all__ = [
    "TreeNode",
    "GbtModel",
    "TrainParams",
    "TrainingError",
    "CalibrationError",
    "ModelFormatError",
    "DimensionError",
    "train",
    "train_calibrated",
    "predict_margin",
    "predict_proba_raw",
    "predict_proba_calibrated",
    "fit_platt",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "model_hash",
    "stratified_fold_assignments",
]

_LEAF = -1

MODEL_FORMAT_VERSION = 1


class TrainingError(ValueError):
    """Degenerate training input (single-class labels, size mismatch)."""


class CalibrationError(ValueError):
    """Platt fitting needs both classes present."""


class ModelFormatError(ValueError):
    """Model file is malformed or has an unsupported version."""


class DimensionError(ValueError):
    """Input vector width does not match the model."""


@dataclass
class TreeNode:
    """One node: internal nodes split on (feature, threshold) with a default
    side for missing values; leaves carry a log-odds contribution."""

    feature_index: int = _LEAF
    threshold: float = 0.0
    default_left: bool = True
    left: int = _LEAF
    right: int = _LEAF
    leaf_value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature_index == _LEAF


@dataclass
class TrainParams:
    rounds: int = 100
    depth: int = 6
    eta: float = 0.09
    lam: float = 1.0
    min_hessian: float = 1e-6
    seed: int = 0  # reserved; exact greedy training is fully deterministic


@dataclass
class GbtModel:
    trees: list
    base_score: float
    eta: float
    platt_a: float = -1.0  # identity calibration: sigmoid of the margin
    platt_b: float = 0.0
    slot_names: list = field(default_factory=lambda: list(SLOT_NAMES))
    training_loss: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n_features(self) -> int:
        return len(self.slot_names)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -709, 709)))


def _as_matrix(X, n_features: Optional[int] = None) -> np.ndarray:
    if isinstance(X, np.ndarray):
        M = np.asarray(X, dtype=np.float64)
    else:
        rows = [x.values if isinstance(x, MetaFeatureVector) else x for x in X]
        M = np.asarray(rows, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if n_features is not None and M.shape[1] != n_features:
        raise DimensionError(f"expected {n_features} slots, got {M.shape[1]}")
    return M


def _best_split(Xn: np.ndarray, g: np.ndarray, h: np.ndarray, lam: float):
    """Exact greedy search over all (feature, midpoint) candidates.

    Returns (gain, feature, threshold, default_left) or None.  Gains are
    0.5*[GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam)]; for every candidate the
    missing rows are placed on the side that maximizes the gain.
    """
    n, d = Xn.shape
    if n < 2:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")  # NaNs sort last
    sv = np.take_along_axis(Xn, order, axis=0)
    sg = g[order]
    sh = h[order]
    present = ~np.isnan(sv)
    sg = np.where(present, sg, 0.0)
    sh = np.where(present, sh, 0.0)
    cg = np.cumsum(sg, axis=0)
    ch = np.cumsum(sh, axis=0)
    g_tot = float(g.sum())
    h_tot = float(h.sum())
    g_miss = g_tot - cg[-1, :]
    h_miss = h_tot - ch[-1, :]
    parent = (g_tot * g_tot) / (h_tot + lam)

    # Candidate i splits between sorted rows i and i+1; NaNs are trailing, so
    # present[i+1] implies present[i].
    valid = present[1:, :] & (sv[:-1, :] != sv[1:, :])
    if not valid.any():
        return None
    gl = cg[:-1, :]
    hl = ch[:-1, :]

    gl_a = gl + g_miss
    hl_a = hl + h_miss
    gain_a = gl_a**2 / (hl_a + lam) + (g_tot - gl_a) ** 2 / (h_tot - hl_a + lam)
    gain_b = gl**2 / (hl + lam) + (g_tot - gl) ** 2 / (h_tot - hl + lam)
    miss_left = gain_a >= gain_b  # exact ties default left
    gain = 0.5 * (np.where(miss_left, gain_a, gain_b) - parent)
    gain = np.where(valid, gain, -np.inf)

    pos = gain.argmax(axis=0)  # first maximum: smallest threshold per feature
    per_feature = gain[pos, np.arange(d)]
    best = None
    for f in range(d):  # ascending feature order: lowest slot wins ties
        if per_feature[f] > 0.0 and (best is None or per_feature[f] > best[0]):
            i = int(pos[f])
            lo = float(sv[i, f])
            hi = float(sv[i + 1, f])
            thr = (lo + hi) / 2.0
            if thr <= lo:  # midpoint collapsed onto the lower value
                thr = hi
            best = (float(per_feature[f]), f, thr, bool(miss_left[i, f]))
    return best


def _grow_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray, params: TrainParams):
    """Build one tree; returns (nodes, leaf_value_per_row) for the margin update."""
    nodes = []
    contrib = np.empty(X.shape[0], dtype=np.float64)

    def grow(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append(TreeNode())
        g_sum = float(g[idx].sum())
        h_sum = float(h[idx].sum())
        split = None
        if depth < params.depth and h_sum >= params.min_hessian and idx.size >= 2:
            split = _best_split(X[idx], g[idx], h[idx], params.lam)
        if split is None:
            value = -g_sum / (h_sum + params.lam)
            nodes[node_id] = TreeNode(leaf_value=value)
            contrib[idx] = value
            return node_id
        _, f, thr, default_left = split
        col = X[idx, f]
        nan = np.isnan(col)
        go_left = np.where(nan, default_left, col < thr)
        left_id = grow(idx[go_left], depth + 1)
        right_id = grow(idx[~go_left], depth + 1)
        nodes[node_id] = TreeNode(
            feature_index=f, threshold=thr, default_left=default_left,
            left=left_id, right=right_id,
        )
        return node_id

    grow(np.arange(X.shape[0]), 0)
    return nodes, contrib


def train(X, y, params: Optional[TrainParams] = None,
          slot_names: Optional[Sequence[str]] = None) -> GbtModel:
    """Fit the boosted ensemble with logistic loss.

    The base score is the log-odds of the positive rate; each round fits one
    depth-bounded tree to the current gradients/hessians.  Requires both
    classes present.
    """
    params = params or TrainParams()
    M = _as_matrix(X)
    yv = np.asarray(y, dtype=np.float64)
    if M.shape[0] != yv.shape[0]:
        raise TrainingError(f"{M.shape[0]} rows but {yv.shape[0]} labels")
    if M.shape[0] < 2:
        raise TrainingError("need at least 2 rows")
    n_pos = float(yv.sum())
    if n_pos == 0 or n_pos == yv.shape[0]:
        raise TrainingError("both classes must be present")
    if slot_names is None:
        slot_names = list(SLOT_NAMES) if M.shape[1] == len(SLOT_NAMES) else [
            f"f{i}" for i in range(M.shape[1])
        ]

    p_pos = n_pos / yv.shape[0]
    base = math.log(p_pos / (1.0 - p_pos))
    margins = np.full(M.shape[0], base, dtype=np.float64)
    trees = []
    losses = []
    for _ in range(params.rounds):
        p = _sigmoid(margins)
        grad = p - yv
        hess = p * (1.0 - p)
        nodes, contrib = _grow_tree(M, grad, hess, params)
        trees.append(nodes)
        margins = margins + params.eta * contrib
        losses.append(float(np.mean(np.logaddexp(0.0, (1.0 - 2.0 * yv) * margins))))
    return GbtModel(trees=trees, base_score=base, eta=params.eta,
                    slot_names=list(slot_names), training_loss=losses)


def _route(nodes, x) -> float:
    node = nodes[0]
    while not node.is_leaf:
        v = x[node.feature_index]
        if math.isnan(v):
            node = nodes[node.left if node.default_left else node.right]
        elif v < node.threshold:
            node = nodes[node.left]
        else:
            node = nodes[node.right]
    return node.leaf_value


def predict_margin(model: GbtModel, x) -> float:
    """Raw log-odds for one vector; missing slots follow default directions."""
    xv = _as_matrix(x, model.n_features)[0]
    return model.base_score + model.eta * sum(_route(t, xv) for t in model.trees)


def predict_margin_batch(model: GbtModel, X) -> np.ndarray:
    M = _as_matrix(X, model.n_features)
    out = np.full(M.shape[0], model.base_score, dtype=np.float64)
    for nodes in model.trees:
        out += model.eta * np.array([_route(nodes, row) for row in M])
    return out


def predict_proba_raw(model: GbtModel, x) -> float:
    """Sigmoid of the raw margin; strictly monotone in the margin."""
    return float(_sigmoid(predict_margin(model, x)))


def apply_calibration(model: GbtModel, margin):
    """Platt-calibrated probability 1/(1+exp(a*s+b)), strictly inside (0,1)."""
    z = np.clip(model.platt_a * np.asarray(margin, dtype=np.float64) + model.platt_b,
                -709, 709)
    p = 1.0 / (1.0 + np.exp(z))
    return np.clip(p, 1e-15, 1.0 - 1e-15)


def predict_proba_calibrated(model: GbtModel, x) -> float:
    return float(apply_calibration(model, predict_margin(model, x)))


# ---------------------------------------------------------------------------
# Platt scaling
# ---------------------------------------------------------------------------

def fit_platt(scores, labels, max_iter: int = 200, tol: float = 1e-10) -> tuple:
    """Fit p = 1/(1+exp(A*s+B)) to scores by Newton iterations.

    Targets are smoothed per Platt: t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2),
    which keeps the optimum finite even for separable scores.  Converges to
    gradient infinity-norm below ``tol``.
    """
    s = np.asarray(scores, dtype=np.float64)
    yv = np.asarray(labels, dtype=np.float64)
    n_pos = float(yv.sum())
    n_neg = float(yv.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise CalibrationError("both classes must be present to calibrate")
    t = np.where(yv == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def loss_of(a, b):
        z = a * s + b
        return float(np.sum(np.logaddexp(0.0, z) - (1.0 - t) * z))

    a = 0.0
    b = math.log((n_neg + 1.0) / (n_pos + 1.0))
    cur = loss_of(a, b)
    for _ in range(max_iter):
        z = np.clip(a * s + b, -709, 709)
        p = 1.0 / (1.0 + np.exp(z))
        resid = t - p
        ga = float(np.dot(s, resid))
        gb = float(resid.sum())
        if max(abs(ga), abs(gb)) < tol:
            break
        w = p * (1.0 - p)
        haa = float(np.dot(s * s, w)) + 1e-12
        hab = float(np.dot(s, w))
        hbb = float(w.sum()) + 1e-12
        det = haa * hbb - hab * hab
        da = -(hbb * ga - hab * gb) / det
        db = -(haa * gb - hab * ga) / det
        step = 1.0
        while step > 1e-12:
            na, nb = a + step * da, b + step * db
            new = loss_of(na, nb)
            if new <= cur + 1e-12:
                a, b, cur = na, nb, new
                break
            step *= 0.5
        else:
            break
    return a, b


def stratified_fold_assignments(labels, folds: int, seed: int) -> np.ndarray:
    """Seeded stratified fold ids with a rolling round-robin counter across
    classes, so per-class and total fold sizes each differ by at most one."""
    yv = np.asarray(labels)
    rng = random.Random(seed)
    fold_of = np.empty(yv.shape[0], dtype=np.int64)
    counter = 0
    for cls in (1, 0):
        idx = [int(i) for i in np.flatnonzero(yv == cls)]
        rng.shuffle(idx)
        for i in idx:
            fold_of[i] = counter % folds
            counter += 1
    return fold_of


def train_calibrated(X, y, params: Optional[TrainParams] = None,
                     calibration_folds: int = 5, seed: int = 0,
                     slot_names: Optional[Sequence[str]] = None) -> GbtModel:
    """Train the ensemble and fit Platt scaling on out-of-fold margins.

    In-sample margins of a well-fit ensemble are degenerate, so calibration
    scores come from an internal stratified split of the training partition.
    If any internal fit is impossible (a fold losing a class), the model falls
    back to identity calibration with a warning.
    """
    params = params or TrainParams()
    M = _as_matrix(X)
    yv = np.asarray(y, dtype=np.int64)
    model = train(M, yv, params, slot_names=slot_names)
    try:
        fold_of = stratified_fold_assignments(yv, calibration_folds, seed)
        oof = np.empty(M.shape[0], dtype=np.float64)
        for f in range(calibration_folds):
            test = fold_of == f
            sub = train(M[~test], yv[~test], params, slot_names=slot_names)
            oof[test] = predict_margin_batch(sub, M[test])
        a, b = fit_platt(oof, yv)
    except (TrainingError, CalibrationError) as exc:
        warnings.warn(f"falling back to identity calibration: {exc}")
        a, b = -1.0, 0.0
    model.platt_a = a
    model.platt_b = b
    return model


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_to_dict(model: GbtModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "base_score": model.base_score,
        "eta": model.eta,
        "platt": {"a": model.platt_a, "b": model.platt_b},
        "slot_names": list(model.slot_names),
        "trees": [
            {
                "nodes": [
                    {
                        "feat": n.feature_index,
                        "thr": n.threshold,
                        "default_left": n.default_left,
                        "left": n.left,
                        "right": n.right,
                        "leaf": n.leaf_value,
                    }
                    for n in nodes
                ]
            }
            for nodes in model.trees
        ],
    }


def model_from_dict(doc: dict) -> GbtModel:
    try:
        if doc["format_version"] != MODEL_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model format_version {doc['format_version']!r}"
            )
        trees = [
            [
                TreeNode(
                    feature_index=n["feat"], threshold=n["thr"],
                    default_left=n["default_left"], left=n["left"],
                    right=n["right"], leaf_value=n["leaf"],
                )
                for n in t["nodes"]
            ]
            for t in doc["trees"]
        ]
        return GbtModel(
            trees=trees,
            base_score=doc["base_score"],
            eta=doc["eta"],
            platt_a=doc["platt"]["a"],
            platt_b=doc["platt"]["b"],
            slot_names=list(doc["slot_names"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def _serialize(model: GbtModel) -> str:
    # json emits floats via shortest round-trip repr (<= 17 significant
    # digits), so save -> load -> predict is exact.
    return json.dumps(model_to_dict(model), indent=1)


def save_model(model: GbtModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_serialize(model))


def load_model(path) -> GbtModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def model_hash(model: GbtModel) -> str:
    import hashlib

    return hashlib.sha256(_serialize(model).encode("utf-8")).hexdigest()
