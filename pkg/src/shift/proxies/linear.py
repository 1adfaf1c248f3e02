"""Softmax regression trained by seeded mini-batch SGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy plus ``0.5 * l2 * ||W||^2`` and its gradients."""
    m = len(X)
    Z = X @ W + b
    Zs = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Zs).sum(axis=1))
    loss = float(np.mean(logsum - Zs[np.arange(m), y])) + 0.5 * l2 * float(np.sum(W * W))
    G = softmax(Z)
    G[np.arange(m), y] -= 1.0
    G /= m
    return loss, X.T @ G + l2 * W, G.sum(axis=0)


@dataclass
class LinearModel:
    W: np.ndarray
    b: np.ndarray
    epoch_losses: list

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(np.asarray(X, dtype=np.float64) @ self.W + self.b, axis=1)


def train_linear(
    X, y, n_classes: int, *, learning_rate: float = 0.1, l2: float = 0.0,
    batch_size: int = 64, epochs: int = 10, seed: int = 0,
) -> LinearModel:
    """Xavier-uniform init, one seeded shuffle per epoch, plain SGD.

    ``epoch_losses`` records the full-data objective after every epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (d + n_classes))
    W = rng.uniform(-limit, limit, size=(d, n_classes))
    b = np.zeros(n_classes)
    losses = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = perm[s : s + batch_size]
            _, dW, db = loss_and_grad(W, b, X[idx], y[idx], l2)
            W -= learning_rate * dW
            b -= learning_rate * db
        losses.append(loss_and_grad(W, b, X, y, l2)[0])
    return LinearModel(W, b, losses)


def linear_accuracy(train_X, train_y, test_X, test_y, n_classes: int, **hyper) -> float:
    model = train_linear(train_X, train_y, n_classes, **hyper)
    return float(np.mean(model.predict(test_X) == np.asarray(test_y)))
