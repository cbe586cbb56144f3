"""Mixed-type attribute similarity for nodes and edges.

Per-dimension partial similarities (equality for categorical dims, scaled
absolute difference for numerical dims) are pushed through an exponential
transform and averaged. The scalar functions are the reference semantics;
the packed variants vectorize the same arithmetic over all pairs of
elements of two graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SchemaError
from .graph import CATEGORICAL, NUMERICAL, AttributeVector, DimensionSpec


@dataclass(frozen=True)
class SimilarityParams:
    """Scaling parameter of the exponential transform."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be a finite real, got {self.gamma!r}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")


def partial_similarity(dim: DimensionSpec, a, b) -> float:
    """Per-dimension similarity in [0, 1].

    Categorical: exact-match indicator on symbol ids. Numerical: one minus
    the range-scaled absolute difference, clamped into [0, 1]; a zero-width
    range degenerates to the exact-match indicator.
    """
    if dim.kind == CATEGORICAL:
        if not isinstance(a, int) or not isinstance(b, int):
            raise SchemaError(f"categorical dimension {dim.name!r} compares symbol ids")
        return 1.0 if a == b else 0.0
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
        raise SchemaError(f"numerical dimension {dim.name!r} compares reals")
    width = dim.range
    if width is None:
        raise SchemaError(f"dimension {dim.name!r} has no computed range")
    if width == 0.0:
        return 1.0 if a == b else 0.0
    q = abs(a - b) / width
    if q > 1.0:
        q = 1.0  # query values outside the stored range clamp to zero similarity
    return 1.0 - q


def exp_transform(s: float, p: SimilarityParams) -> float:
    """Map a partial similarity s in [0,1] to exp(-gamma*(1-s)) in (0,1]."""
    if not 0.0 <= s <= 1.0:
        raise SchemaError(f"partial similarity {s} outside [0, 1]")
    return math.exp(-p.gamma * (1.0 - s))


def element_similarity_P(
    dims: tuple[DimensionSpec, ...],
    x: AttributeVector,
    y: AttributeVector,
    p: SimilarityParams,
) -> float:
    """Average transformed per-dimension similarity of two elements.

    Applies identically to node pairs and edge pairs; the caller picks the
    dimension list. Always strictly positive.
    """
    d = len(dims)
    if d == 0:
        raise SchemaError("element similarity needs at least one declared dimension")
    if len(x.values) != d or len(y.values) != d:
        raise SchemaError(
            f"vectors of length {len(x.values)}/{len(y.values)} against {d} dimensions"
        )
    total = 0.0
    for k, dim in enumerate(dims):
        total += exp_transform(partial_similarity(dim, x.values[k], y.values[k]), p)
    return total / d


class PackedAttrs:
    """Column-major arrays for one graph's node or edge attribute vectors.

    Splits dimensions into categorical ids, range-scaled numerical values,
    and zero-range numerical values so that all-pairs similarity reduces to
    a few dense array operations.
    """

    __slots__ = ("count", "dim_count", "cat", "num_scaled", "num_exact")

    def __init__(self, dims: tuple[DimensionSpec, ...], vectors):
        vectors = list(vectors)
        self.count = len(vectors)
        self.dim_count = len(dims)
        cat_cols, scaled_cols, exact_cols = [], [], []
        for k, dim in enumerate(dims):
            column = [vec.values[k] for vec in vectors]
            if dim.kind == CATEGORICAL:
                cat_cols.append(np.asarray(column, dtype=np.int64))
                continue
            width = dim.range
            if width is None:
                raise SchemaError(f"dimension {dim.name!r} has no computed range")
            values = np.asarray(column, dtype=np.float64)
            if width == 0.0:
                exact_cols.append(values)
            else:
                scaled_cols.append(values / width)
        shape = (self.count, 0)
        self.cat = np.column_stack(cat_cols) if cat_cols else np.empty(shape, np.int64)
        self.num_scaled = (
            np.column_stack(scaled_cols) if scaled_cols else np.empty(shape, np.float64)
        )
        self.num_exact = (
            np.column_stack(exact_cols) if exact_cols else np.empty(shape, np.float64)
        )


def similarity_matrix(a: PackedAttrs, b: PackedAttrs, p: SimilarityParams) -> np.ndarray:
    """All-pairs element similarity between two packed attribute sets."""
    if a.dim_count != b.dim_count:
        raise SchemaError("packed attribute sets disagree on dimensionality")
    if a.dim_count == 0:
        raise SchemaError("element similarity needs at least one declared dimension")
    if a.count == 0 or b.count == 0:
        return np.zeros((a.count, b.count))
    floor = math.exp(-p.gamma)  # transformed value of an exact mismatch
    acc = np.zeros((a.count, b.count))
    if a.cat.shape[1]:
        eq = (a.cat[:, None, :] == b.cat[None, :, :]).sum(axis=2)
        acc += eq + (a.cat.shape[1] - eq) * floor
    if a.num_exact.shape[1]:
        eq = (a.num_exact[:, None, :] == b.num_exact[None, :, :]).sum(axis=2)
        acc += eq + (a.num_exact.shape[1] - eq) * floor
    if a.num_scaled.shape[1]:
        diff = np.abs(a.num_scaled[:, None, :] - b.num_scaled[None, :, :])
        np.minimum(diff, 1.0, out=diff)
        acc += np.exp(-p.gamma * diff).sum(axis=2)
    return acc / a.dim_count
