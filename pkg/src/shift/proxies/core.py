"""Proxy requests, values and the dispatching ``compute_proxy``."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from shift.errors import DimMismatch, EmptySplit, InvalidField, UnknownScoringAlgorithm
from shift.hashing import digest64
from shift.proxies.knn import knn_accuracy
from shift.proxies.leep import leep_score
from shift.proxies.linear import linear_accuracy
from shift.registry import ACCURACY_METHODS, PROXY_METHODS

_ARG_NAMES = {
    "lr": "learning_rate", "learning_rate": "learning_rate",
    "l2": "l2", "l2_regularizer": "l2", "reg": "l2",
    "batch": "batch_size", "batch_size": "batch_size",
    "epochs": "epochs", "seed": "seed", "k": "k",
}


@dataclass(frozen=True)
class ProxyRequest:
    method: str
    k: int = 1
    learning_rate: float = 0.1
    l2: float = 0.0
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.method not in PROXY_METHODS:
            raise UnknownScoringAlgorithm(f"unknown proxy {self.method!r}")
        if self.k < 1:
            raise InvalidField("k must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidField("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidField("learning rate must be > 0")
        if self.l2 < 0:
            raise InvalidField("l2 must be >= 0")

    @classmethod
    def from_call(cls, name: str, args=()) -> "ProxyRequest":
        """Build a request from a query-level call such as ``Linear(lr=0.1)``."""
        kwargs = {}
        for key, value in dict(args).items():
            field_name = _ARG_NAMES.get(key)
            if field_name is None:
                raise InvalidField(f"{name} has no argument {key!r}")
            kwargs[field_name] = value
        for int_field in ("k", "batch_size", "epochs", "seed"):
            if int_field in kwargs:
                kwargs[int_field] = int(kwargs[int_field])
        if name not in PROXY_METHODS:
            raise UnknownScoringAlgorithm(f"unknown scoring algorithm {name!r}")
        return cls(name, **kwargs)

    @property
    def is_accuracy(self) -> bool:
        return self.method in ACCURACY_METHODS

    def params(self) -> dict:
        """Hyperparameters that influence this method's value."""
        if self.method in ("CosineNN", "EuclideanNN"):
            return {"k": self.k}
        if self.method == "Linear":
            return {
                "learning_rate": self.learning_rate, "l2": self.l2, "batch_size": self.batch_size,
                "epochs": self.epochs, "seed": self.seed,
            }
        return {}

    def key(self) -> str:
        return digest64(self.method, self.params())

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ProxyValue:
    value: float
    model_id: str = ""
    method: str = ""
    train_hash: str = ""
    test_hash: str = ""
    n_train_used: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def loss(self) -> float:
        return proxy_loss(self.method, self.value)

    def to_dict(self) -> dict:
        return {
            "value": self.value, "model_id": self.model_id, "method": self.method,
            "train_hash": self.train_hash, "test_hash": self.test_hash, "n_train_used": self.n_train_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProxyValue":
        return cls(d["value"], d["model_id"], d["method"], d["train_hash"], d["test_hash"], d["n_train_used"])


def proxy_loss(method: str, value: float) -> float:
    """Lower is better: ``1 - accuracy`` or ``-LEEP``."""
    return -value if method == "LEEP" else 1.0 - value


def proxy_key(model_id: str, request: ProxyRequest, train_hash: str, test_hash: str, n_train_used: int) -> str:
    return digest64("proxy", model_id, request.method, request.params(), train_hash, test_hash, int(n_train_used))


def compute_proxy(train_X, train_y, test_X, test_y, request: ProxyRequest, n_classes: int | None = None) -> float:
    """Proxy value of one model's features: an accuracy, or LEEP's log-likelihood."""
    train_X = np.asarray(train_X)
    test_X = np.asarray(test_X)
    if len(train_X) == 0 or len(test_X) == 0:
        raise EmptySplit("train and test splits need at least one sample")
    if train_X.ndim != 2 or test_X.ndim != 2 or train_X.shape[1] != test_X.shape[1]:
        raise DimMismatch(f"train dim {train_X.shape} and test dim {test_X.shape} disagree")
    if len(train_y) != len(train_X) or len(test_y) != len(test_X):
        raise DimMismatch("labels and features disagree on row count")
    n_classes = max(int(n_classes or 0), int(max(np.max(train_y), np.max(test_y))) + 1)
    if request.method == "CosineNN":
        return knn_accuracy(train_X, train_y, test_X, test_y, "cosine", request.k)
    if request.method == "EuclideanNN":
        return knn_accuracy(train_X, train_y, test_X, test_y, "euclidean", request.k)
    if request.method == "Linear":
        return linear_accuracy(
            train_X, train_y, test_X, test_y, n_classes,
            learning_rate=request.learning_rate, l2=request.l2, batch_size=request.batch_size,
            epochs=request.epochs, seed=request.seed,
        )
    return leep_score(train_X, train_y, test_X, test_y, n_classes)
