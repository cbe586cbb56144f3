"""Precomputed-kernel soft-margin SVM with one-vs-rest multiclass.

The binary solver is sequential minimal optimization over the dual with
max-violating-pair working-set selection, lowest-index tie-breaking, and
an analytic two-variable subproblem. It maintains the gradient of the dual
objective incrementally, so one update costs O(n). Models store only what
prediction needs: support indices, dual coefficients, and the bias.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateClassError, SvmError

_TAU = 1e-12  # guard for non-positive curvature in the two-variable subproblem


@dataclass(frozen=True)
class BinarySvm:
    """One trained binary machine (positive class versus the rest)."""

    positive_class: int | None
    bias: float
    support: np.ndarray
    dual_coef: np.ndarray
    C: float
    n_train: int
    converged: bool
    iterations: int
    objective: float
    alpha: np.ndarray | None = None
    objective_history: tuple = ()

    def decision_values(self, rows: np.ndarray) -> np.ndarray:
        return rows[:, self.support] @ self.dual_coef + self.bias


@dataclass(frozen=True)
class SvmModel:
    """Per-class binary machines plus the class list they discriminate."""

    classes: tuple
    machines: tuple
    C: float
    n_train: int
    gram_digest: str | None = None

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines)


def _as_matrix(K) -> np.ndarray:
    values = getattr(K, "values", K)
    return np.asarray(values, dtype=np.float64)


def train_binary(
    K,
    y,
    C: float,
    tol: float = 1e-3,
    max_passes: int | None = None,
    positive_class: int | None = None,
    track_objective: bool = False,
) -> BinarySvm:
    """Solve the dual on a precomputed kernel for labels in {-1, +1}.

    max_passes caps the number of working-set updates (default 10n);
    exceeding it yields a warning carried in the model, not a failure.
    """
    K = _as_matrix(K)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if K.ndim != 2 or K.shape != (n, n):
        raise SvmError(f"kernel block of shape {K.shape} for {n} labels")
    if not np.all(np.abs(y) == 1.0):
        raise SvmError("labels must be -1 or +1")
    if not (y > 0).any() or not (y < 0).any():
        raise DegenerateClassError("both label signs are required for training")
    if C <= 0:
        raise ConfigError(f"C must be > 0, got {C}")
    max_iter = 10 * n if max_passes is None else int(max_passes)

    Kd = K.diagonal()
    Q = K * np.outer(y, y)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of (1/2 a'Qa - sum a)
    history = []
    converged = False
    iterations = 0

    def objective() -> float:
        return 0.5 * (alpha.sum() - alpha @ grad)

    if track_objective:
        history.append(objective())
    for _ in range(max_iter):
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        lo = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not lo.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(lo, yg, np.inf)))
        if yg[i] - yg[j] <= tol:
            converged = True
            break
        iterations += 1
        old_i, old_j = alpha[i], alpha[j]
        quad = Kd[i] + Kd[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            alpha[i] = old_i + delta
            alpha[j] = old_j + delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            alpha[i] = old_i - delta
            alpha[j] = old_j + delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        grad += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        if track_objective:
            history.append(objective())
    else:
        warnings.warn(
            f"SMO did not converge within {max_iter} updates (gap above {tol})"
        )

    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(yg[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        lo = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        upper = float(yg[up].max()) if up.any() else None
        lower = float(yg[lo].min()) if lo.any() else None
        if upper is None:
            bias = lower if lower is not None else 0.0
        elif lower is None:
            bias = upper
        else:
            bias = (upper + lower) / 2.0
    support = np.flatnonzero(alpha > 0)
    return BinarySvm(
        positive_class=positive_class,
        bias=bias,
        support=support,
        dual_coef=alpha[support] * y[support],
        C=float(C),
        n_train=n,
        converged=converged,
        iterations=iterations,
        objective=float(objective()),
        alpha=alpha,
        objective_history=tuple(history),
    )


def train_ovr(
    K,
    labels,
    C: float,
    classes=None,
    tol: float = 1e-3,
    max_passes: int | None = None,
    gram_digest: str | None = None,
) -> SvmModel:
    """One-vs-rest training; two classes collapse to a single machine."""
    K = _as_matrix(K)
    labels = np.asarray(labels)
    n = labels.shape[0]
    if K.shape != (n, n):
        raise SvmError(f"kernel block of shape {K.shape} for {n} labels")
    if classes is None:
        classes = sorted(set(int(v) for v in labels))
    else:
        classes = sorted(int(c) for c in classes)
        for c in classes:
            if not (labels == c).any():
                raise DegenerateClassError(f"class {c} has no training examples")
    if len(classes) < 2:
        raise DegenerateClassError(f"need at least 2 classes, got {len(classes)}")
    machines = []
    if len(classes) == 2:
        y = np.where(labels == classes[1], 1.0, -1.0)
        machines.append(
            train_binary(K, y, C, tol=tol, max_passes=max_passes, positive_class=classes[1])
        )
    else:
        for c in classes:
            y = np.where(labels == c, 1.0, -1.0)
            machines.append(
                train_binary(K, y, C, tol=tol, max_passes=max_passes, positive_class=c)
            )
    return SvmModel(
        classes=tuple(classes),
        machines=tuple(machines),
        C=float(C),
        n_train=n,
        gram_digest=gram_digest,
    )


def decision_function(model: SvmModel, K_rows) -> np.ndarray:
    """Per-machine decision values for each kernel row (tests x train)."""
    rows = np.asarray(K_rows, dtype=np.float64)
    squeeze = rows.ndim == 1
    if squeeze:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[1] != model.n_train:
        raise SvmError(
            f"kernel rows of width {rows.shape[-1]} for {model.n_train} training graphs"
        )
    values = np.column_stack([m.decision_values(rows) for m in model.machines])
    return values[0] if squeeze else values


def predict(model: SvmModel, K_rows):
    """Class ids for one kernel row or a batch of rows.

    Binary: sign of the decision value, zero counting as positive.
    Multiclass: argmax of per-class decision values, ties to lowest class.
    """
    values = decision_function(model, K_rows)
    single = values.ndim == 1
    if single:
        values = values[None, :]
    if len(model.classes) == 2:
        out = np.where(values[:, 0] >= 0, model.classes[1], model.classes[0])
    else:
        out = np.asarray(model.classes)[np.argmax(values, axis=1)]
    return int(out[0]) if single else out


def save_model(model: SvmModel, path) -> Path:
    """Serialize to JSON: classes, per-machine coefficients, provenance."""
    path = Path(path)
    obj = {
        "format": "nask-svm v1",
        "classes": list(model.classes),
        "C": model.C,
        "n_train": model.n_train,
        "gram_digest": model.gram_digest,
        "machines": [
            {
                "positive_class": m.positive_class,
                "bias": m.bias,
                "support": m.support.tolist(),
                "dual_coef": m.dual_coef.tolist(),
                "converged": m.converged,
                "iterations": m.iterations,
                "objective": m.objective,
            }
            for m in model.machines
        ],
    }
    path.write_text(json.dumps(obj, indent=2) + "\n")
    return path


def load_model(path) -> SvmModel:
    """Inverse of save_model; loaded machines keep no full alpha vector."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SvmError(f"cannot load model from {path}: {exc}") from exc
    if obj.get("format") != "nask-svm v1":
        raise SvmError(f"{path.name}: unsupported model format {obj.get('format')!r}")
    machines = tuple(
        BinarySvm(
            positive_class=m["positive_class"],
            bias=float(m["bias"]),
            support=np.asarray(m["support"], dtype=np.int64),
            dual_coef=np.asarray(m["dual_coef"], dtype=np.float64),
            C=float(obj["C"]),
            n_train=int(obj["n_train"]),
            converged=bool(m["converged"]),
            iterations=int(m["iterations"]),
            objective=float(m["objective"]),
        )
        for m in obj["machines"]
    )
    return SvmModel(
        classes=tuple(obj["classes"]),
        machines=machines,
        C=float(obj["C"]),
        n_train=int(obj["n_train"]),
        gram_digest=obj.get("gram_digest"),
    )
