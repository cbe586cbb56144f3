"""Cross-validation protocol: stratification, determinism, and reporting."""

import json

import numpy as np
import pytest

from nask.datasets import compute_ranges
from nask.errors import ConfigError
from nask.evaluate import (
    TRANSDUCTIVE_NOTE,
    CvConfig,
    CvReport,
    cross_validate,
    stratified_folds,
)
from nask.expansion import ExpansionPlan
from nask.gram import compute_gram, normalize_gram
from nask.similarity import SimilarityParams

from conftest import graph_with
import synth

# one-config grid: selection is skipped entirely
SINGLE_GRID = dict(gammas=(1.0,), depths=(1,), normalize_options=(True,), costs=(1.0,))
# two-config grid: inner selection runs and ties resolve to the first entry
SMALL_GRID = dict(gammas=(1.0,), depths=(1, 2), normalize_options=(True,), costs=(1.0,))


def easy_dataset(count=18, seed=30, name="easy2"):
    """Perfectly separable two-class set: node symbols are class-constant."""
    rng = np.random.default_rng(seed)
    schema = synth.mixed_schema(n_cat=1, n_num=0, cat_card=2)
    graphs = []
    for i in range(count):
        label = i % 2
        n = int(rng.integers(3, 7))
        edges = synth.connected_edges(rng, n, extra=0.2)
        graphs.append(graph_with(i, n, edges, [(label,)] * n, label=label))
    return synth.dataset_from_graphs(graphs, name=name, schema=schema)


class TestStratifiedFolds:
    def test_balanced_two_class_split(self):
        labels = np.array([0, 1] * 5)
        folds = stratified_folds(labels, 5, seed=3)
        assert all(fold.size == 2 for fold in folds)
        for fold in folds:
            assert sorted(labels[fold]) == [0, 1]

    def test_uneven_sizes_differ_by_at_most_one(self):
        labels = np.array([0, 0, 0, 0, 1, 1, 1])
        folds = stratified_folds(labels, 3, seed=0)
        assert sorted(fold.size for fold in folds) == [2, 2, 3]

    def test_folds_partition_all_indices(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(0, 3, size=23)
        while np.unique(labels, return_counts=True)[1].min() < 4:
            labels = rng.integers(0, 3, size=23)
        folds = stratified_folds(labels, 4, seed=9)
        merged = np.concatenate(folds)
        assert np.array_equal(np.sort(merged), np.arange(23))
        for fold in folds:
            assert np.array_equal(fold, np.sort(fold))

    def test_class_counts_within_one_across_folds(self):
        labels = np.array([0] * 11 + [1] * 7 + [2] * 5)
        folds = stratified_folds(labels, 4, seed=2)
        for c in (0, 1, 2):
            counts = [int(np.sum(labels[fold] == c)) for fold in folds]
            assert max(counts) - min(counts) <= 1

    def test_deterministic_for_fixed_seed(self):
        labels = np.arange(40) % 4
        a = stratified_folds(labels, 5, seed=7)
        b = stratified_folds(labels, 5, seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = stratified_folds(labels, 5, seed=8)
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_small_class_falls_back_with_warning(self):
        labels = np.array([0, 0, 0, 0, 0, 1])
        with pytest.warns(UserWarning, match="falling back"):
            folds = stratified_folds(labels, 3, seed=1)
        merged = np.concatenate(folds)
        assert np.array_equal(np.sort(merged), np.arange(6))

    def test_fold_count_validated(self):
        labels = np.array([0, 1, 0, 1])
        with pytest.raises(ConfigError):
            stratified_folds(labels, 1, seed=0)
        with pytest.raises(ConfigError):
            stratified_folds(labels, 5, seed=0)


class TestCvConfig:
    def test_defaults_form_the_published_grid(self):
        cfg = CvConfig()
        grid = cfg.grid()
        assert len(grid) == 3 * 4 * 2 * 7
        assert grid[0] == (0.1, 1, True, 1e-3)
        # gamma varies slowest, cost fastest
        assert grid[1] == (0.1, 1, True, 1e-2)
        assert grid[-1] == (10.0, 4, False, 1e3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(folds=1),
            dict(repeats=0),
            dict(inner_folds=1),
            dict(gammas=()),
            dict(gammas=(0.0,)),
            dict(depths=(0,)),
            dict(costs=(-1.0,)),
            dict(range_mode="loose"),
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            CvConfig(**kwargs)


class TestCrossValidate:
    def test_separable_dataset_scores_high(self):
        ds = easy_dataset()
        cfg = CvConfig(folds=3, repeats=2, seed=0, **SINGLE_GRID)
        report = cross_validate(ds, cfg)
        assert isinstance(report, CvReport)
        assert len(report.outer_accuracies) == 6
        assert report.mean_accuracy >= 0.95
        assert report.transductive_note == TRANSDUCTIVE_NOTE
        assert report.per_config[0]["times_selected"] == 6
        assert report.per_config[0]["mean_inner_accuracy"] is None
        assert all(f["inner_accuracy"] is None for f in report.folds)

    def test_repeated_run_is_bit_reproducible(self):
        ds = easy_dataset()
        cfg = CvConfig(folds=3, repeats=1, seed=5, **SINGLE_GRID)
        first = cross_validate(ds, cfg)
        second = cross_validate(ds, cfg)
        assert first.results_digest() == second.results_digest()
        # wall-clock environment details stay out of the reproducible payload
        assert "environment" not in first.results_obj()
        assert "environment" in json.loads(first.to_json())

    def test_seed_changes_the_splits(self):
        ds = easy_dataset()
        base = dict(folds=3, repeats=1, **SINGLE_GRID)
        a = cross_validate(ds, CvConfig(seed=0, **base))
        b = cross_validate(ds, CvConfig(seed=1, **base))
        assert a.results_digest() != b.results_digest()

    def test_folds_partition_dataset_each_repeat(self):
        ds = easy_dataset()
        cfg = CvConfig(folds=3, repeats=2, seed=3, **SINGLE_GRID)
        report = cross_validate(ds, cfg)
        for repeat in (0, 1):
            entries = [f for f in report.folds if f["repeat"] == repeat]
            assert len(entries) == 3
            merged = sorted(i for f in entries for i in f["test_indices"])
            assert merged == list(range(ds.num_graphs))
            for f in entries:
                assert f["train_size"] == ds.num_graphs - len(f["test_indices"])

    def test_inner_selection_reports_and_breaks_ties_low(self):
        ds = easy_dataset()
        cfg = CvConfig(folds=3, repeats=1, seed=0, inner_folds=2, **SMALL_GRID)
        report = cross_validate(ds, cfg)
        picks = [c["times_selected"] for c in report.per_config]
        assert sum(picks) == 3
        inner = [c["mean_inner_accuracy"] for c in report.per_config]
        assert all(v is not None for v in inner)
        # both depths separate this set perfectly, so the tie goes to the
        # first grid entry every time
        if inner[0] == inner[1] == 1.0:
            assert picks == [3, 0]
        for f in report.folds:
            assert f["inner_accuracy"] is not None
            assert f["selected"]["gamma"] == 1.0

    def test_gram_cache_reproduces_uncached_run(self):
        ds = easy_dataset()
        cfg = CvConfig(folds=3, repeats=1, seed=2, **SINGLE_GRID)
        plain = cross_validate(ds, cfg)
        full = compute_ranges(ds)
        gram = compute_gram(full, SimilarityParams(gamma=1.0), ExpansionPlan(max_depth=1))
        cached = cross_validate(ds, cfg, gram_cache={(1.0, 1): gram})
        assert cached.results_digest() == plain.results_digest()

    def test_gram_cache_digest_mismatch_refused(self):
        ds = easy_dataset()
        other = compute_ranges(easy_dataset(count=12, seed=77, name="other"))
        gram = compute_gram(other, SimilarityParams(gamma=1.0), ExpansionPlan(max_depth=1))
        cfg = CvConfig(folds=3, repeats=1, **SINGLE_GRID)
        with pytest.raises(ConfigError, match="different dataset"):
            cross_validate(ds, cfg, gram_cache={(1.0, 1): gram})

    def test_gram_cache_must_be_unnormalized(self):
        ds = easy_dataset()
        full = compute_ranges(ds)
        gram = normalize_gram(
            compute_gram(full, SimilarityParams(gamma=1.0), ExpansionPlan(max_depth=1))
        )
        cfg = CvConfig(folds=3, repeats=1, **SINGLE_GRID)
        with pytest.raises(ConfigError, match="unnormalized"):
            cross_validate(ds, cfg, gram_cache={(1.0, 1): gram})

    def test_gram_cache_incompatible_with_per_fold_ranges(self):
        ds = easy_dataset()
        full = compute_ranges(ds)
        gram = compute_gram(full, SimilarityParams(gamma=1.0), ExpansionPlan(max_depth=1))
        cfg = CvConfig(folds=3, repeats=1, range_mode="per-fold", **SINGLE_GRID)
        with pytest.raises(ConfigError, match="range_mode"):
            cross_validate(ds, cfg, gram_cache={(1.0, 1): gram})

    def test_per_fold_ranges_drop_the_transductive_note(self):
        rng = np.random.default_rng(41)
        schema = synth.mixed_schema(n_cat=1, n_num=1, with_ranges=False)
        graphs = [
            synth.random_graph(rng, schema, graph_id=i, min_nodes=3, max_nodes=6, label=i % 2)
            for i in range(12)
        ]
        ds = synth.dataset_from_graphs(graphs, name="perfold", schema=schema)
        cfg = CvConfig(folds=2, repeats=1, range_mode="per-fold", **SINGLE_GRID)
        report = cross_validate(ds, cfg)
        assert report.transductive_note is None
        assert len(report.outer_accuracies) == 2
        full_report = cross_validate(ds, CvConfig(folds=2, repeats=1, **SINGLE_GRID))
        assert full_report.transductive_note == TRANSDUCTIVE_NOTE

    def test_too_many_folds_rejected(self):
        ds = easy_dataset(count=6)
        with pytest.raises(ConfigError, match="folds"):
            cross_validate(ds, CvConfig(folds=10, repeats=1, **SINGLE_GRID))

    def test_single_class_rejected(self):
        rng = np.random.default_rng(8)
        schema = synth.mixed_schema(n_cat=1, n_num=0)
        graphs = [
            synth.random_graph(rng, schema, graph_id=i, min_nodes=3, max_nodes=5)
            for i in range(6)
        ]
        ds = synth.dataset_from_graphs(graphs, name="mono", schema=schema, labels=[0] * 6)
        with pytest.raises(ConfigError, match="classes"):
            cross_validate(ds, CvConfig(folds=2, repeats=1, **SINGLE_GRID))


@pytest.fixture(scope="module")
def report():
    ds = easy_dataset()
    return cross_validate(ds, CvConfig(folds=3, repeats=1, seed=0, **SINGLE_GRID))


class TestReportOutput:
    def test_results_obj_layout(self, report):
        obj = report.results_obj()
        assert obj["format"] == "nask-cv-report v1"
        assert obj["dataset"] == "easy2"
        assert obj["dataset_digest"] == report.dataset_digest
        assert obj["config"]["folds"] == 3
        assert isinstance(obj["config"]["gammas"], list)

    def test_environment_metadata_recorded(self, report):
        env = report.environment
        assert "tool_version" in env and "timestamp_utc" in env
        assert env["gram_seconds"]  # full mode computes at least one matrix
        assert env["convergence_warnings"] >= 0

    def test_text_rendering(self, report):
        text = report.to_text()
        assert "mean accuracy" in text
        assert "gamma" in text and "picked" in text
        assert TRANSDUCTIVE_NOTE.split(";")[0] in text

    def test_json_round_trip(self, report):
        obj = json.loads(report.to_json())
        assert obj["mean_accuracy"] == report.mean_accuracy
        assert len(obj["folds"]) == 3
