"""Gram-matrix computation, normalization, PSD validation, persistence.

Entries are computed per upper-triangle pair and mirrored, so the matrix
is exactly symmetric as stored. Each (i, j) entry is computed by exactly
one worker with a fixed per-entry evaluation order, which makes the output
byte-identical across --threads settings. Files use a small text format:
a version header, one-line JSON metadata, the dimension, then rows of
space-separated reals at 17 significant digits (bit-exact round trip).
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .datasets import Dataset
from .errors import (
    ConfigError,
    DatasetError,
    GramComputeError,
    GramFormatError,
    InvalidGramError,
)
from .expansion import ExpansionPlan
from .similarity import SimilarityParams
from .stars import KernelContext
from .version import __version__

_HEADER = "NASK-GRAM v1"
_META_KEYS = ("dataset_digest", "gamma", "H", "tau", "normalize", "edge_elements", "version")


@dataclass(frozen=True)
class GramMeta:
    """Provenance carried with every Gram matrix."""

    dataset_digest: str
    gamma: float
    depth: int
    tau: float
    normalize: bool
    edge_elements: str
    version: str = f"nask {__version__}"

    def to_obj(self) -> dict:
        return {
            "dataset_digest": self.dataset_digest,
            "gamma": self.gamma,
            "H": self.depth,
            "tau": self.tau,
            "normalize": self.normalize,
            "edge_elements": self.edge_elements,
            "version": self.version,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "GramMeta":
        missing = [key for key in _META_KEYS if key not in obj]
        if missing:
            raise GramFormatError(f"metadata missing keys: {', '.join(missing)}")
        try:
            return cls(
                dataset_digest=str(obj["dataset_digest"]),
                gamma=float(obj["gamma"]),
                depth=int(obj["H"]),
                tau=float(obj["tau"]),
                normalize=bool(obj["normalize"]),
                edge_elements=str(obj["edge_elements"]),
                version=str(obj["version"]),
            )
        except (TypeError, ValueError) as exc:
            raise GramFormatError(f"metadata has ill-typed values: {exc}") from exc


@dataclass(frozen=True)
class GramMatrix:
    """Symmetric kernel matrix over a dataset, with provenance metadata."""

    values: np.ndarray
    meta: GramMeta

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidGramError(f"gram values must be square, got shape {values.shape}")
        if not np.array_equal(values, values.T):
            raise InvalidGramError("gram values must be exactly symmetric")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PsdVerdict:
    """Outcome of a spectral positive-semidefiniteness check."""

    psd: bool
    min_eig: float
    max_eig: float
    tol: float
    threshold: float


def matrix_digest(values: np.ndarray) -> str:
    """Content hash of the raw matrix bytes."""
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()


_WORKER_STATE: dict = {}


def _entry_value(ctx: KernelContext, graphs, plan: ExpansionPlan, i: int, j: int) -> float:
    try:
        value = ctx.pair_value(graphs[i], graphs[j], plan.max_depth, plan.cache_families)
    except MemoryError as exc:
        raise GramComputeError(f"resource exhaustion while computing pair ({i}, {j})") from exc
    except FloatingPointError as exc:
        raise GramComputeError(f"numeric failure while computing pair ({i}, {j})") from exc
    if not math.isfinite(value):
        raise GramComputeError(f"non-finite kernel value at pair ({i}, {j})")
    return value


def _worker_block(block) -> list[float]:
    ctx = _WORKER_STATE["ctx"]
    graphs = _WORKER_STATE["graphs"]
    plan = _WORKER_STATE["plan"]
    return [_entry_value(ctx, graphs, plan, i, j) for i, j in block]


def compute_gram(
    ds: Dataset,
    params: SimilarityParams | None = None,
    plan: ExpansionPlan | None = None,
    tau: float = 0.0,
    edge_elements: str = "auto",
    normalize: bool = False,
    threads: int = 1,
    compensated: bool = False,
) -> GramMatrix:
    """Full kernel matrix of a dataset (ranges must be computed already).

    Workers split the upper triangle into contiguous blocks; every entry is
    computed by exactly one worker and mirrored, so results do not depend
    on the worker count.
    """
    if ds.num_graphs == 0:
        raise DatasetError("no graphs")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    params = params if params is not None else SimilarityParams()
    plan = plan if plan is not None else ExpansionPlan()
    if not isinstance(params, SimilarityParams):
        raise ConfigError(f"params must be SimilarityParams, got {type(params).__name__}")
    if not isinstance(plan, ExpansionPlan):
        raise ConfigError(f"plan must be ExpansionPlan, got {type(plan).__name__}")
    ctx = KernelContext(
        ds.schema, params, tau=tau, edge_elements=edge_elements, compensated=compensated
    )
    for g in ds.graphs:
        pack = ctx.register(g)
        pack.family(min(plan.max_depth, pack.n))  # warm caches before forking
    n = ds.num_graphs
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    values = np.zeros((n, n))

    if threads > 1 and "fork" not in multiprocessing.get_all_start_methods():
        warnings.warn("fork start method unavailable; computing on one thread")
        threads = 1
    if threads == 1 or n < 4:
        flat = _worker_block_local(ctx, ds.graphs, plan, pairs)
    else:
        blocks = [list(chunk) for chunk in np.array_split(np.array(pairs), threads * 4)]
        blocks = [[(int(i), int(j)) for i, j in chunk] for chunk in blocks if len(chunk)]
        _WORKER_STATE.update(ctx=ctx, graphs=ds.graphs, plan=plan)
        try:
            mp_ctx = multiprocessing.get_context("fork")
            with mp_ctx.Pool(processes=threads) as pool:
                results = pool.map(_worker_block, blocks)
        finally:
            _WORKER_STATE.clear()
        flat = [value for chunk in results for value in chunk]
    for (i, j), value in zip(pairs, flat):
        values[i, j] = value
        values[j, i] = value

    meta = GramMeta(
        dataset_digest=ds.digest,
        gamma=params.gamma,
        depth=plan.max_depth,
        tau=ctx.tau,
        normalize=False,
        edge_elements=edge_elements,
    )
    gram = GramMatrix(values=values, meta=meta)
    return normalize_gram(gram) if normalize else gram


def _worker_block_local(ctx, graphs, plan, pairs) -> list[float]:
    return [_entry_value(ctx, graphs, plan, i, j) for i, j in pairs]


def normalize_gram(gram: GramMatrix) -> GramMatrix:
    """Cosine-normalize so every diagonal entry is 1 (PSD preserved)."""
    diag = gram.values.diagonal()
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise InvalidGramError(
            f"cannot normalize: nonpositive diagonal at graph index {int(bad[0])}"
        )
    values = gram.values / np.sqrt(np.outer(diag, diag))
    return GramMatrix(values=values, meta=replace(gram.meta, normalize=True))


def check_psd(gram, tol: float = 1e-8) -> PsdVerdict:
    """Spectral PSD check: min eigenvalue >= -tol * max(1, max eigenvalue)."""
    values = gram.values if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvalidGramError(f"psd check needs a square matrix, got shape {values.shape}")
    if not np.array_equal(values, values.T):
        raise InvalidGramError("psd check needs an exactly symmetric matrix")
    try:
        eigs = np.linalg.eigvalsh(values)
    except np.linalg.LinAlgError as exc:
        raise GramComputeError(
            f"eigensolver failed on matrix {matrix_digest(values)}"
        ) from exc
    min_eig = float(eigs[0])
    max_eig = float(eigs[-1])
    threshold = tol * max(1.0, max_eig)
    return PsdVerdict(
        psd=bool(min_eig >= -threshold),
        min_eig=min_eig,
        max_eig=max_eig,
        tol=tol,
        threshold=threshold,
    )


def export_gram(gram: GramMatrix, path) -> Path:
    """Write the text format; 17 significant digits round-trip bit-exactly."""
    path = Path(path)
    lines = [_HEADER, json.dumps(gram.meta.to_obj()), str(gram.n)]
    for row in gram.values:
        lines.append(" ".join("%.17g" % value for value in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def import_gram(path) -> GramMatrix:
    """Parse a Gram file, checking version, shape, and symmetry."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise GramFormatError(f"cannot read {path}: {exc}") from exc
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise GramFormatError(f"{path.name}: empty file")
    if lines[0] != _HEADER:
        raise GramFormatError(
            f"{path.name}:1: unsupported version {lines[0]!r} (expected {_HEADER!r})"
        )
    if len(lines) < 3:
        raise GramFormatError(f"{path.name}: truncated file (line {len(lines) + 1})")
    try:
        meta_obj = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise GramFormatError(f"{path.name}:2: metadata parse failure: {exc}") from exc
    if not isinstance(meta_obj, dict):
        raise GramFormatError(f"{path.name}:2: metadata must be a JSON object")
    meta = GramMeta.from_obj(meta_obj)
    try:
        n = int(lines[2].strip())
    except ValueError as exc:
        raise GramFormatError(f"{path.name}:3: dimension parse failure") from exc
    if n < 1:
        raise GramFormatError(f"{path.name}:3: dimension must be >= 1, got {n}")
    rows = lines[3:]
    if len(rows) != n:
        raise GramFormatError(
            f"{path.name}: dimension mismatch, expected {n} rows, found {len(rows)}"
        )
    values = np.empty((n, n))
    for r, line in enumerate(rows):
        lineno = r + 4
        fields = line.split()
        if len(fields) != n:
            raise GramFormatError(
                f"{path.name}:{lineno}: expected {n} values, found {len(fields)}"
            )
        try:
            values[r] = [float(f) for f in fields]
        except ValueError as exc:
            raise GramFormatError(f"{path.name}:{lineno}: parse failure: {exc}") from exc
        if not np.all(np.isfinite(values[r])):
            raise GramFormatError(f"{path.name}:{lineno}: non-finite value")
    if not np.array_equal(values, values.T):
        raise GramFormatError(f"{path.name}: matrix is not symmetric as stored")
    return GramMatrix(values=values, meta=meta)
