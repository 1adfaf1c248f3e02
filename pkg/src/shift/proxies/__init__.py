from shift.proxies.core import ProxyRequest, ProxyValue, compute_proxy, proxy_key, proxy_loss
from shift.proxies.knn import knn_accuracy, neighbors
from shift.proxies.leep import leep_score
from shift.proxies.linear import loss_and_grad, train_linear

__all__ = [
    "ProxyRequest",
    "ProxyValue",
    "compute_proxy",
    "knn_accuracy",
    "leep_score",
    "loss_and_grad",
    "neighbors",
    "proxy_key",
    "proxy_loss",
    "train_linear",
]
