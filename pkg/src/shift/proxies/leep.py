"""LEEP over a dummy source posterior.

Headless feature extractors expose no source-label posterior, so the
posterior is taken as a softmax over feature coordinates (each coordinate a
pseudo source class).
"""

from __future__ import annotations

import numpy as np

from shift.proxies.linear import softmax

_EPS = 1e-12


def leep_score(train_X, train_y, test_X, test_y, n_classes: int) -> float:
    """Mean log-likelihood of test labels under the empirical predictor.

    The conditional ``P(y | z)`` is fit on the train split; a test label never
    seen with any pseudo class gets probability floored at ``1e-12``.
    """
    theta_tr = softmax(np.asarray(train_X, dtype=np.float64))
    theta_te = softmax(np.asarray(test_X, dtype=np.float64))
    train_y = np.asarray(train_y, dtype=np.int64)
    test_y = np.asarray(test_y, dtype=np.int64)
    n = len(train_y)
    joint = np.zeros((n_classes, theta_tr.shape[1]))
    np.add.at(joint, train_y, theta_tr)
    joint /= n
    marginal = joint.sum(axis=0)
    cond = joint / np.where(marginal > 0, marginal, 1.0)
    probs = np.einsum("iz,iz->i", theta_te, cond[test_y])
    return float(np.mean(np.log(np.maximum(probs, _EPS))))
