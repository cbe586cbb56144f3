"""TU-format dataset ingestion, validation, serialization, and digests.

The on-disk layout is the TU Dortmund graph-classification format: a
directory holding `{name}_A.txt`, `{name}_graph_indicator.txt`,
`{name}_graph_labels.txt`, and optional node/edge label and attribute
files. Node and edge ids in files are 1-based; everything in memory is
0-based. Node/edge label columns become categorical dimensions (listed
first in the schema), attribute columns become numerical dimensions.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

from .errors import DatasetError, SchemaError
from .graph import (
    CATEGORICAL,
    NUMERICAL,
    AttributedGraph,
    AttributeSchema,
    AttributeVector,
    DimensionSpec,
    canonical_edge,
)

_FILE_SUFFIXES = (
    "A",
    "graph_indicator",
    "graph_labels",
    "node_labels",
    "node_attributes",
    "edge_labels",
    "edge_attributes",
)


@dataclass(frozen=True)
class Dataset:
    """An ordered graph collection with shared schema and per-graph labels.

    labels are contiguous 0-based class ids; class_values maps them back to
    the original label values in sorted order. The digest hashes the
    canonical serialized form, so it is stable under reload round trips and
    under range computation.
    """

    name: str
    schema: AttributeSchema
    graphs: tuple[AttributedGraph, ...]
    labels: tuple[int, ...]
    class_values: tuple = ()

    def __post_init__(self):
        if len(self.labels) != len(self.graphs):
            raise DatasetError(
                f"{len(self.labels)} labels for {len(self.graphs)} graphs"
            )
        k = len(self.class_values)
        for i, (g, label) in enumerate(zip(self.graphs, self.labels)):
            if g.label != label:
                raise DatasetError(f"graph {i} label disagrees with dataset labels")
            if not 0 <= label < k:
                raise DatasetError(f"graph {i} label {label} outside 0..{k - 1}")
        if list(self.class_values) != sorted(set(self.class_values)):
            raise DatasetError("class_values must be sorted and duplicate-free")

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    @property
    def num_classes(self) -> int:
        return len(self.class_values)

    @cached_property
    def digest(self) -> str:
        return canonical_digest(self)


def _read_lines(path: Path) -> list[str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _split_fields(line: str) -> list[str]:
    # TU files separate fields with commas, sometimes with stray spaces
    return [f for f in (piece.strip() for piece in line.replace(",", " ").split()) if f]


def _parse_int_rows(path: Path, expect_width: int | None = None) -> list[list[int]]:
    rows = []
    width = expect_width
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = _split_fields(line)
        if not fields:
            raise DatasetError(f"{path.name}:{lineno}: blank line")
        try:
            row = [int(f) for f in fields]
        except ValueError as exc:
            raise DatasetError(f"{path.name}:{lineno}: non-integer token") from exc
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DatasetError(
                f"{path.name}:{lineno}: expected {width} fields, got {len(row)}"
            )
        rows.append(row)
    return rows


def _parse_float_rows(path: Path) -> list[list[float]]:
    rows = []
    width = None
    for lineno, line in enumerate(_read_lines(path), start=1):
        fields = _split_fields(line)
        if not fields:
            raise DatasetError(f"{path.name}:{lineno}: blank line")
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise DatasetError(f"{path.name}:{lineno}: non-numeric token") from exc
        for value in row:
            if not math.isfinite(value):
                raise DatasetError(f"{path.name}:{lineno}: non-finite attribute value")
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DatasetError(
                f"{path.name}:{lineno}: expected {width} fields, got {len(row)}"
            )
        rows.append(row)
    return rows


def _intern_columns(rows: list[list[int]], prefix: str) -> tuple[list[DimensionSpec], list[list[int]]]:
    """Intern raw categorical columns to dense symbol ids, keeping originals."""
    if not rows:
        return [], []
    width = len(rows[0])
    dims, id_rows = [], [[None] * width for _ in rows]
    for col in range(width):
        table: dict[int, int] = {}
        for r, row in enumerate(rows):
            value = row[col]
            if value not in table:
                table[value] = len(table)
            id_rows[r][col] = table[value]
        originals = tuple(sorted(table, key=table.get))
        dims.append(DimensionSpec(f"{prefix}{col}", CATEGORICAL, categories=originals))
    return dims, id_rows


def load_tu_dataset(directory, name: str | None = None) -> Dataset:
    """Parse one TU-format dataset directory into a Dataset.

    Undirected edges must appear in both directions in `_A.txt`; mirrored
    edge attribute rows must agree exactly. Class labels are remapped to
    contiguous 0-based ids preserving their sorted original order.
    """
    directory = Path(directory)
    if name is None:
        name = directory.name
    if not directory.is_dir():
        raise DatasetError(f"dataset directory not found: {directory}")

    def path_for(suffix: str) -> Path:
        return directory / f"{name}_{suffix}.txt"

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not path_for(suffix).is_file():
            raise DatasetError(f"missing mandatory file {path_for(suffix).name}")

    indicator = [row[0] for row in _parse_int_rows(path_for("graph_indicator"), 1)]
    num_nodes_total = len(indicator)
    if num_nodes_total == 0:
        raise DatasetError("graph indicator file declares no nodes")
    num_graphs = max(indicator)
    if min(indicator) < 1:
        raise DatasetError("graph indicator ids must be >= 1")
    graph_sizes = [0] * num_graphs
    node_graph = [0] * num_nodes_total  # 0-based graph index per global node
    node_local = [0] * num_nodes_total  # 0-based local node id per global node
    for node, gid in enumerate(indicator):
        gidx = gid - 1
        node_graph[node] = gidx
        node_local[node] = graph_sizes[gidx]
        graph_sizes[gidx] += 1
    for gidx, size in enumerate(graph_sizes):
        if size == 0:
            raise DatasetError(f"graph {gidx + 1} has no nodes")

    raw_labels = [row[0] for row in _parse_int_rows(path_for("graph_labels"), 1)]
    if len(raw_labels) != num_graphs:
        raise DatasetError(
            f"{len(raw_labels)} graph labels for {num_graphs} graphs"
        )
    class_values = tuple(sorted(set(raw_labels)))
    remap = {value: i for i, value in enumerate(class_values)}
    labels = tuple(remap[value] for value in raw_labels)

    node_label_rows = []
    node_attr_rows = []
    if path_for("node_labels").is_file():
        node_label_rows = _parse_int_rows(path_for("node_labels"))
        if len(node_label_rows) != num_nodes_total:
            raise DatasetError(
                f"{path_for('node_labels').name}: {len(node_label_rows)} rows "
                f"for {num_nodes_total} nodes"
            )
    if path_for("node_attributes").is_file():
        node_attr_rows = _parse_float_rows(path_for("node_attributes"))
        if len(node_attr_rows) != num_nodes_total:
            raise DatasetError(
                f"{path_for('node_attributes').name}: {len(node_attr_rows)} rows "
                f"for {num_nodes_total} nodes"
            )
    if not node_label_rows and not node_attr_rows:
        raise DatasetError(
            f"dataset {name!r} has neither node labels nor node attributes; "
            "kernels need at least one node dimension"
        )

    edge_rows = _parse_int_rows(path_for("A"), 2) if path_for("A").is_file() else []
    num_edge_rows = len(edge_rows)
    edge_label_rows = []
    edge_attr_rows = []
    if path_for("edge_labels").is_file():
        edge_label_rows = _parse_int_rows(path_for("edge_labels"))
        if len(edge_label_rows) != num_edge_rows:
            raise DatasetError(
                f"{path_for('edge_labels').name}: {len(edge_label_rows)} rows "
                f"for {num_edge_rows} edge rows"
            )
    if path_for("edge_attributes").is_file():
        edge_attr_rows = _parse_float_rows(path_for("edge_attributes"))
        if len(edge_attr_rows) != num_edge_rows:
            raise DatasetError(
                f"{path_for('edge_attributes').name}: {len(edge_attr_rows)} rows "
                f"for {num_edge_rows} edge rows"
            )

    node_cat_dims, node_cat_ids = _intern_columns(node_label_rows, "node_label_")
    edge_cat_dims, edge_cat_ids = _intern_columns(edge_label_rows, "edge_label_")
    node_num_dims = [
        DimensionSpec(f"node_attr_{c}", NUMERICAL)
        for c in range(len(node_attr_rows[0]) if node_attr_rows else 0)
    ]
    edge_num_dims = [
        DimensionSpec(f"edge_attr_{c}", NUMERICAL)
        for c in range(len(edge_attr_rows[0]) if edge_attr_rows else 0)
    ]
    schema = AttributeSchema(
        node_dims=tuple(node_cat_dims) + tuple(node_num_dims),
        edge_dims=tuple(edge_cat_dims) + tuple(edge_num_dims),
    )

    def node_vector(node: int) -> AttributeVector:
        values = []
        if node_cat_ids:
            values.extend(node_cat_ids[node])
        if node_attr_rows:
            values.extend(node_attr_rows[node])
        return AttributeVector(tuple(values))

    def edge_vector(row: int) -> AttributeVector:
        values = []
        if edge_cat_ids:
            values.extend(edge_cat_ids[row])
        if edge_attr_rows:
            values.extend(edge_attr_rows[row])
        return AttributeVector(tuple(values))

    # group directed edge rows per graph, check mirror symmetry and
    # attribute agreement, then keep one record per canonical edge
    per_graph_edges: list[dict] = [dict() for _ in range(num_graphs)]
    seen_directed: list[dict] = [dict() for _ in range(num_graphs)]
    for row, (u_raw, v_raw) in enumerate(edge_rows):
        lineno = row + 1
        for endpoint in (u_raw, v_raw):
            if not 1 <= endpoint <= num_nodes_total:
                raise DatasetError(f"{name}_A.txt:{lineno}: node id {endpoint} out of range")
        u, v = u_raw - 1, v_raw - 1
        if u == v:
            raise DatasetError(f"{name}_A.txt:{lineno}: self-loop on node {u_raw}")
        if node_graph[u] != node_graph[v]:
            raise DatasetError(
                f"{name}_A.txt:{lineno}: edge joins nodes of graphs "
                f"{node_graph[u] + 1} and {node_graph[v] + 1}"
            )
        gidx = node_graph[u]
        key = (node_local[u], node_local[v])
        if key in seen_directed[gidx]:
            raise DatasetError(f"{name}_A.txt:{lineno}: duplicate edge row")
        seen_directed[gidx][key] = row

    has_edge_dims = schema.has_edge_attrs
    for gidx, directed in enumerate(seen_directed):
        for (lu, lv), row in directed.items():
            if (lv, lu) not in directed:
                raise DatasetError(
                    f"graph {gidx + 1}: edge ({lu}, {lv}) lacks its mirrored row"
                )
            key = canonical_edge(lu, lv)
            if key in per_graph_edges[gidx]:
                if has_edge_dims:
                    other = per_graph_edges[gidx][key]
                    if edge_vector(row).values != other.values:
                        raise DatasetError(
                            f"graph {gidx + 1}: mirrored rows of edge {key} "
                            "disagree on attributes"
                        )
                continue
            per_graph_edges[gidx][key] = edge_vector(row) if has_edge_dims else None

    graphs = []
    nodes_by_graph: list[list[int]] = [[] for _ in range(num_graphs)]
    for node, gidx in enumerate(node_graph):
        nodes_by_graph[gidx].append(node)
    for gidx in range(num_graphs):
        size = graph_sizes[gidx]
        nbrs = [[] for _ in range(size)]
        for u, v in per_graph_edges[gidx]:
            nbrs[u].append(v)
            nbrs[v].append(u)
        adjacency = tuple(tuple(sorted(s)) for s in nbrs)
        attrs = tuple(node_vector(node) for node in nodes_by_graph[gidx])
        edge_attrs = None
        if has_edge_dims:
            edge_attrs = tuple(sorted(per_graph_edges[gidx].items()))
        graphs.append(
            AttributedGraph(
                graph_id=gidx,
                adjacency=adjacency,
                node_attrs=attrs,
                edge_attrs=edge_attrs,
                label=labels[gidx],
            )
        )

    return Dataset(
        name=name,
        schema=schema,
        graphs=tuple(graphs),
        labels=labels,
        class_values=class_values,
    )


def compute_ranges(ds: Dataset, graph_indices=None) -> Dataset:
    """Return a dataset whose numerical dimensions carry observed min/max.

    Statistics pool over all nodes (resp. edges) of the selected graphs;
    by default over the whole dataset. Dimensions with no observations are
    left without a range and error if a similarity later needs them.
    """
    graphs = ds.graphs if graph_indices is None else [ds.graphs[i] for i in graph_indices]

    def ranged(dims: tuple[DimensionSpec, ...], vectors_of) -> tuple[DimensionSpec, ...]:
        out = []
        for k, dim in enumerate(dims):
            if dim.kind == CATEGORICAL:
                out.append(dim)
                continue
            low = high = None
            for g in graphs:
                for vec in vectors_of(g):
                    value = vec.values[k]
                    if low is None or value < low:
                        low = value
                    if high is None or value > high:
                        high = value
            if low is None:
                out.append(DimensionSpec(dim.name, NUMERICAL))
            else:
                out.append(DimensionSpec(dim.name, NUMERICAL, range_min=low, range_max=high))
        return tuple(out)

    schema = AttributeSchema(
        node_dims=ranged(ds.schema.node_dims, lambda g: g.node_attrs),
        edge_dims=ranged(
            ds.schema.edge_dims,
            lambda g: (vec for _, vec in (g.edge_attrs or ())),
        ),
    )
    return Dataset(
        name=ds.name,
        schema=schema,
        graphs=ds.graphs,
        labels=ds.labels,
        class_values=ds.class_values,
    )


def validate_dataset(ds: Dataset) -> dict:
    """Check every graph against the schema and summarize the dataset.

    Returns a report dict with counts, class histogram, degree statistics,
    and the schema summary. Raises DatasetError on any violation.
    """
    from .graph import validate_vector

    if ds.num_graphs == 0:
        raise DatasetError("no graphs")
    degrees = []
    total_edges = 0
    total_nodes = 0
    for i, g in enumerate(ds.graphs):
        if g.num_nodes == 0:
            raise DatasetError(f"graph {i} has no nodes")
        total_nodes += g.num_nodes
        total_edges += g.num_edges
        for v in range(g.num_nodes):
            degrees.append(len(g.adjacency[v]))
            try:
                validate_vector(g.node_attrs[v], ds.schema.node_dims, f"graph {i} node {v}")
            except SchemaError as exc:
                raise DatasetError(str(exc)) from exc
        if ds.schema.has_edge_attrs:
            if g.edge_attrs is None:
                raise DatasetError(f"graph {i} lacks edge attributes required by the schema")
            for key, vec in g.edge_attrs:
                try:
                    validate_vector(vec, ds.schema.edge_dims, f"graph {i} edge {key}")
                except SchemaError as exc:
                    raise DatasetError(str(exc)) from exc
    histogram = {}
    for label in ds.labels:
        original = ds.class_values[label]
        histogram[original] = histogram.get(original, 0) + 1

    def dim_summary(dim: DimensionSpec) -> dict:
        info = {"name": dim.name, "kind": dim.kind}
        if dim.kind == NUMERICAL:
            info["range_min"] = dim.range_min
            info["range_max"] = dim.range_max
        else:
            info["cardinality"] = len(dim.categories)
        return info

    return {
        "name": ds.name,
        "graphs": ds.num_graphs,
        "classes": ds.num_classes,
        "class_histogram": histogram,
        "nodes": total_nodes,
        "edges": total_edges,
        "degree_min": min(degrees),
        "degree_max": max(degrees),
        "degree_mean": sum(degrees) / len(degrees),
        "node_dims": [dim_summary(d) for d in ds.schema.node_dims],
        "edge_dims": [dim_summary(d) for d in ds.schema.edge_dims],
        "digest": ds.digest,
    }


def _format_value(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def canonical_files(ds: Dataset) -> dict[str, str]:
    """Serialize the dataset to canonical TU-format file contents.

    Nodes are renumbered 1..N in dataset order, directed edge rows are
    sorted ascending, categorical symbol ids map back to their original
    values, and floats print in shortest round-trip form. This is both the
    writer's payload and the basis of the content digest.
    """
    def split_point(dims, what):
        count = sum(1 for d in dims if d.kind == CATEGORICAL)
        if any(d.kind == CATEGORICAL for d in dims[count:]):
            raise DatasetError(
                f"{what} dimensions must list categorical before numerical to serialize"
            )
        return count

    node_base = []
    total = 0
    for g in ds.graphs:
        node_base.append(total)
        total += g.num_nodes

    indicator_lines = []
    node_label_lines = []
    node_attr_lines = []
    cat_count = split_point(ds.schema.node_dims, "node")
    node_cat_dims = ds.schema.node_dims[:cat_count]
    node_num_dims = ds.schema.node_dims[cat_count:]
    for gidx, g in enumerate(ds.graphs):
        for v in range(g.num_nodes):
            indicator_lines.append(str(gidx + 1))
            values = g.node_attrs[v].values
            if node_cat_dims:
                node_label_lines.append(
                    ", ".join(
                        str(dim.categories[values[k]] if dim.categories else values[k])
                        for k, dim in enumerate(node_cat_dims)
                    )
                )
            if node_num_dims:
                node_attr_lines.append(
                    ", ".join(
                        _format_value(values[cat_count + k])
                        for k in range(len(node_num_dims))
                    )
                )

    directed = []
    for gidx, g in enumerate(ds.graphs):
        base = node_base[gidx]
        for u, v in g.edges:
            directed.append((base + u + 1, base + v + 1, gidx, (u, v)))
            directed.append((base + v + 1, base + u + 1, gidx, (u, v)))
    directed.sort(key=lambda t: (t[0], t[1]))
    a_lines = [f"{u}, {v}" for u, v, _, _ in directed]

    edge_label_lines = []
    edge_attr_lines = []
    ecat_count = split_point(ds.schema.edge_dims, "edge")
    edge_cat_dims = ds.schema.edge_dims[:ecat_count]
    edge_num_dims = ds.schema.edge_dims[ecat_count:]
    if ds.schema.has_edge_attrs:
        for _, _, gidx, key in directed:
            values = ds.graphs[gidx].edge_attr_map[key].values
            if edge_cat_dims:
                edge_label_lines.append(
                    ", ".join(
                        str(dim.categories[values[k]] if dim.categories else values[k])
                        for k, dim in enumerate(edge_cat_dims)
                    )
                )
            if edge_num_dims:
                edge_attr_lines.append(
                    ", ".join(
                        _format_value(values[ecat_count + k])
                        for k in range(len(edge_num_dims))
                    )
                )

    label_lines = [str(ds.class_values[label]) for label in ds.labels]

    files = {
        "A": a_lines,
        "graph_indicator": indicator_lines,
        "graph_labels": label_lines,
    }
    if node_label_lines:
        files["node_labels"] = node_label_lines
    if node_attr_lines:
        files["node_attributes"] = node_attr_lines
    if edge_label_lines:
        files["edge_labels"] = edge_label_lines
    if edge_attr_lines:
        files["edge_attributes"] = edge_attr_lines
    return {suffix: "\n".join(lines) + "\n" if lines else "" for suffix, lines in files.items()}


def canonical_digest(ds: Dataset) -> str:
    """Content hash of the canonical serialized form (name-independent)."""
    h = hashlib.sha256()
    files = canonical_files(ds)
    for suffix in _FILE_SUFFIXES:
        if suffix in files:
            h.update(suffix.encode())
            h.update(b"\x00")
            h.update(files[suffix].encode())
            h.update(b"\x00")
    return h.hexdigest()


def save_tu_dataset(ds: Dataset, directory, name: str | None = None) -> list[Path]:
    """Write the dataset in TU format; returns the written file paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if name is None:
        name = ds.name
    written = []
    for suffix, content in canonical_files(ds).items():
        path = directory / f"{name}_{suffix}.txt"
        path.write_text(content)
        written.append(path)
    return written
