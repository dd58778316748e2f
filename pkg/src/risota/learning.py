"""Multinomial logistic regression and local SGD for the federated clients.

Model vectors are flat: the ``(n_classes, n_features)`` weight matrix in
row-major order followed by one bias per class.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .exceptions import DataError, PartitionError


def model_size(n_features, n_classes):
    return n_classes * n_features + n_classes


def unpack(w, n_features, n_classes):
    W = w[: n_classes * n_features].reshape(n_classes, n_features)
    b = w[n_classes * n_features:]
    return W, b


def zeros_model(n_features, n_classes):
    return np.zeros(model_size(n_features, n_classes))


def _check_features(X):
    if not np.all(np.isfinite(X)):
        raise DataError("features contain NaN or Inf")


def logits(w, X, n_classes):
    W, b = unpack(w, X.shape[1], n_classes)
    return X @ W.T + b


def loss_and_gradient(w, X, y, n_classes):
    """Mean softmax cross-entropy over ``(X, y)`` and its exact gradient."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise DataError("empty batch")
    _check_features(X)
    z = logits(w, X, n_classes)
    logp = log_softmax(z, axis=1)
    n = X.shape[0]
    loss = -logp[np.arange(n), y].mean()
    r = np.exp(logp)
    r[np.arange(n), y] -= 1.0
    r /= n
    grad = np.concatenate([(r.T @ X).ravel(), r.sum(axis=0)])
    return float(loss), grad


def per_sample_gradients(w, X, y, n_classes):
    """Stack of per-sample gradients, shape ``(n_samples, d)``."""
    X = np.asarray(X, dtype=float)
    p = softmax(logits(w, X, n_classes), axis=1)
    p[np.arange(X.shape[0]), y] -= 1.0
    gw = (p[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
    return np.hstack([gw, p])


def per_sample_gradient_norms(w, X, y, n_classes):
    # ||(p - e_y) x~^T|| = ||p - e_y|| * ||[x, 1]||
    X = np.asarray(X, dtype=float)
    p = softmax(logits(w, X, n_classes), axis=1)
    p[np.arange(X.shape[0]), y] -= 1.0
    return np.linalg.norm(p, axis=1) * np.sqrt((X**2).sum(axis=1) + 1.0)


def draw_minibatch(rng, n_samples, batch_size):
    if batch_size is None or batch_size >= n_samples:
        return np.arange(n_samples)
    return rng.choice(n_samples, size=batch_size, replace=False)


def sgd_step(w, X, y, eta, rng, n_classes, batch_size=32):
    """One SGD step on a uniformly drawn minibatch; returns ``(w_new, grad)``."""
    idx = draw_minibatch(rng, X.shape[0], batch_size)
    _, grad = loss_and_gradient(w, X[idx], y[idx], n_classes)
    return w - eta * grad, grad


@dataclass
class ClientDataset:
    X: np.ndarray
    y: np.ndarray
    alpha: float = 0.0

    def __len__(self):
        return self.X.shape[0]


@dataclass
class LocalTrajectory:
    steps: list
    grad_norms: list = field(default_factory=list)

    @property
    def final(self):
        return self.steps[-1]

    @property
    def n_steps(self):
        return len(self.steps) - 1


def assign_weights(clients):
    total = sum(len(c) for c in clients)
    for c in clients:
        c.alpha = len(c) / total
    return clients


def partition_one_class(X, y, n_clients, cap=None, rng=None):
    """Give client ``i`` the samples of the i-th smallest label.

    With ``cap`` set, each client keeps at most ``cap`` samples of its class,
    drawn without replacement by ``rng`` (or the first ``cap`` if no rng).
    """
    labels = np.unique(y)
    if labels.shape[0] < n_clients:
        raise PartitionError(
            f"{labels.shape[0]} classes cannot cover {n_clients} clients")
    clients = []
    for label in labels[:n_clients]:
        idx = np.flatnonzero(y == label)
        if cap is not None and idx.shape[0] > cap:
            idx = np.sort(rng.choice(idx, size=cap, replace=False)) if rng is not None else idx[:cap]
        clients.append(ClientDataset(X[idx], y[idx]))
    return assign_weights(clients)


def partition_by_ids(X, y, client_ids):
    """Group samples by an explicit client id per sample."""
    ids = np.unique(client_ids)
    clients = [ClientDataset(X[client_ids == i], y[client_ids == i]) for i in ids]
    return assign_weights(clients)


def predict(w, X, n_classes):
    # np.argmax breaks ties toward the lowest class index
    return np.argmax(logits(w, np.asarray(X, dtype=float), n_classes), axis=1)


def evaluate(w, X, y, n_classes):
    """Fraction of samples whose argmax prediction equals the label."""
    return float(np.mean(predict(w, X, n_classes) == np.asarray(y)))


def global_objective(w, clients, n_classes):
    return float(sum(c.alpha * loss_and_gradient(w, c.X, c.y, n_classes)[0]
                     for c in clients))
