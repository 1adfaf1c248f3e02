"""Synthetic datasets and model pools for tests, demos and benchmarks."""

from __future__ import annotations

import numpy as np

from shift.catalog.records import ModelRecord
from shift.extractors.spec import ExtractorSpec
from shift.readers import SampleSource


def gaussian_blobs(n: int, dim: int = 8, n_classes: int = 4, seed: int = 0, spread: float = 1.0,
                   centers: np.ndarray | None = None) -> SampleSource:
    """Isotropic Gaussian clusters, one per class, with balanced labels."""
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = np.random.default_rng(10_000 + n_classes * 31 + dim).normal(0.0, 3.0, size=(n_classes, dim))
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    X = centers[y] + rng.normal(0.0, spread, size=(n, dim))
    return SampleSource(X.astype(np.float32), y)


def train_test_blobs(n_train: int, n_test: int, dim: int = 8, n_classes: int = 4, seed: int = 0,
                     spread: float = 1.0) -> tuple[SampleSource, SampleSource]:
    """Train and test splits drawn from the same cluster centers."""
    centers = np.random.default_rng(seed + 7).normal(0.0, 3.0, size=(n_classes, dim))
    train = gaussian_blobs(n_train, dim, n_classes, seed * 2 + 1, spread, centers)
    test = gaussian_blobs(n_test, dim, n_classes, seed * 2 + 2, spread, centers)
    return train, test


def model_pool(M: int, *, feature_dim: int = 8, knobs=None, seed: int = 0, prefix: str = "m",
               inference_cost: float = 1.0, load_cost: float = 0.0, upstream=None) -> list[ModelRecord]:
    """``M`` synthetic models; by default the quality knobs are distinct and decreasing.

    Model ids are zero-padded so lexical order equals index order.
    """
    if knobs is None:
        knobs = np.linspace(0.95, 0.05, M) if M > 1 else [0.9]
    width = max(2, len(str(M - 1)))
    records = []
    for i in range(M):
        records.append(ModelRecord(
            model_id=f"{prefix}{i:0{width}d}",
            feature_dim=feature_dim,
            per_sample_inference_cost=inference_cost,
            load_cost=load_cost,
            n_params=1_000_000 * (i + 1),
            upstream_accuracy=None if upstream is None else float(upstream[i]),
            extractor_spec=ExtractorSpec(seed=seed * 1000 + i, quality_knob=float(knobs[i])),
        ))
    return records


def seed_catalog(catalog, *, M: int = 6, n_train: int = 400, n_test: int = 100, dim: int = 8,
                 n_classes: int = 4, seed: int = 0, knobs=None) -> dict:
    """Register a pool plus ``TrainReader``/``TestReader`` in ``catalog``.

    Upstream accuracies are planted in reverse of the quality knobs so the
    upstream-best model is not the proxy-best one.
    """
    train, test = train_test_blobs(n_train, n_test, dim, n_classes, seed)
    pool = model_pool(M, feature_dim=dim, knobs=knobs, seed=seed,
                      upstream=np.linspace(0.60, 0.90, M))
    for record in pool:
        catalog.register_model(record)
    catalog.register_reader("TrainReader", train, n_classes=n_classes)
    catalog.register_reader("TestReader", test, n_classes=n_classes)
    return {"models": [m.model_id for m in pool], "train": train, "test": test}


def linear_hook(X: np.ndarray) -> np.ndarray:
    """Raw coordinates: keeps classes split by a hyperplane."""
    return np.asarray(X, dtype=np.float32)[:, :3].copy()


def quadratic_hook(X: np.ndarray) -> np.ndarray:
    """Squared planar coordinates plus the region coordinate.

    Classes split by a circle around the origin become linearly separable;
    the sign of either planar coordinate is lost.
    """
    X = np.asarray(X, dtype=np.float64)
    return np.column_stack([X[:, 0] ** 2, X[:, 1] ** 2, X[:, 2]]).astype(np.float32)


def two_distribution_data(n_blue: int, n_orange: int, n_test: int, seed: int = 0,
                          orange_share: float = 0.7, region_offset: float = 1.0,
                          blue_threshold: float = -0.52):
    """Data where the better model depends on which distribution is seen.

    Rows are 3-D: two standard-normal planar coordinates and a region
    coordinate (``region_offset`` for blue, 0 for orange). Blue labels say
    whether the second planar coordinate exceeds ``blue_threshold``, which
    only linear features keep. Orange labels say whether the planar radius exceeds its median,
    which only squared features make linearly separable. The test split is
    mostly orange.

    Returns:
        ``(blue, orange, test)`` sample sources.
    """
    rng = np.random.default_rng(seed)
    radius = np.sqrt(2.0 * np.log(2.0))  # median radius of a 2-D standard normal

    def draw(n, region):
        P = rng.normal(0.0, 1.0, size=(n, 2))
        X = np.column_stack([P, np.full(n, region)])
        if region:
            y = (P[:, 1] > blue_threshold).astype(np.int64)
        else:
            y = (np.linalg.norm(P, axis=1) > radius).astype(np.int64)
        return X, y

    Xb, yb = draw(n_blue, region_offset)
    Xo, yo = draw(n_orange, 0.0)
    n_to = int(round(orange_share * n_test))
    Xt1, yt1 = draw(n_to, 0.0)
    Xt2, yt2 = draw(n_test - n_to, region_offset)
    perm = rng.permutation(n_test)
    Xt = np.concatenate([Xt1, Xt2])[perm]
    yt = np.concatenate([yt1, yt2])[perm]
    return (SampleSource(Xb.astype(np.float32), yb), SampleSource(Xo.astype(np.float32), yo),
            SampleSource(Xt.astype(np.float32), yt))


def benchmark_catalog(catalog, *, n_datasets: int = 4, M: int = 5, n_train: int = 200, n_test: int = 80,
                      dim: int = 8, n_classes: int = 4, seed: int = 0, accuracies=None) -> dict:
    """Register datasets ``D0..`` (with ``-train``/``-test`` splits) and planted results.

    Args:
        accuracies: optional ``M x n_datasets`` array of fine-tune accuracies;
            defaults to seeded values in ``[0.5, 0.95]``.

    Returns:
        ``{"models": [...], "datasets": [...], "accuracies": {(model, dataset): acc}}``.
    """
    rng = np.random.default_rng(seed)
    pool = model_pool(M, feature_dim=dim, seed=seed, upstream=np.linspace(0.6, 0.9, M))
    for record in pool:
        catalog.register_model(record)
    if accuracies is None:
        accuracies = np.round(rng.uniform(0.5, 0.95, size=(M, n_datasets)), 4)
    datasets = []
    for j in range(n_datasets):
        name = f"D{j}"
        train, test = train_test_blobs(n_train, n_test, dim, n_classes, seed * 100 + j,
                                       spread=1.0 + 0.25 * j)
        both = SampleSource(np.concatenate([train.X, test.X]), np.concatenate([train.y, test.y]))
        catalog.register_reader(name, both, n_classes=n_classes, type_tag="Natural" if j % 2 == 0 else "Structured")
        catalog.register_reader(f"{name}-train", train, n_classes=n_classes, type_tag="split")
        catalog.register_reader(f"{name}-test", test, n_classes=n_classes, type_tag="split")
        datasets.append(name)
    planted = {}
    for i, record in enumerate(pool):
        for j, name in enumerate(datasets):
            acc = float(accuracies[i][j])
            catalog.record_benchmark_result(record.model_id, name, acc, wall_time=1000.0 * (i + 1))
            planted[(record.model_id, name)] = acc
    return {"models": [m.model_id for m in pool], "datasets": datasets, "accuracies": planted}
