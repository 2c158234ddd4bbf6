"""History-based queue wait prediction.

A target job is compared with recent submissions at the same system in a
standardized 8-d feature space (Manhattan metric). The nearest records are
clustered with DBSCAN; if a cluster lies close enough to the target, its
inverse-distance weighted mean wait is returned. Otherwise a ridge regression
over the whole history is used.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .batchsim import QueueSnapshot
from .workload import Job

N_FEATURES = 8
FEATURE_NAMES = ("cores", "ert", "sum_queued_cores", "sum_queued_ert", "sum_queued_elapsed_wait",
                 "occupied_cores", "sum_running_elapsed", "sum_running_ert")
NOISE = -1


@dataclass(frozen=True)
class PredictorParams:
    k_nearest: int = 50
    dbscan_eps: float = 1.0
    dbscan_min_pts: int = 4
    similarity_threshold: float = 0.5
    ridge_lambda: float = 1.0
    history_window: int = 2000
    idw_eps: float = 1e-6


@dataclass(frozen=True)
class HistoryRecord:
    features: tuple[float, ...]
    observed_wait: float


def featurize(job: Job, snap: QueueSnapshot) -> tuple[float, ...]:
    """Raw feature vector; ``job`` must already be scaled to the target system."""
    return (float(job.cores), float(job.ert)) + tuple(float(v) for v in snap.as_tuple())


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return (X - mean) / scale, mean, scale


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Manhattan-metric DBSCAN; returns labels with -1 for noise.

    Points are visited in input order, so border points go to the first
    cluster that reaches them.
    """
    n = len(points)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    dist = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=2)
    neigh = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neigh])
    visited = np.zeros(n, dtype=bool)
    cluster = 0
    for i in range(n):
        if visited[i] or not core[i]:
            continue
        visited[i] = True
        labels[i] = cluster
        todo = deque(neigh[i])
        while todo:
            j = todo.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster
            if visited[j]:
                continue
            visited[j] = True
            if core[j]:
                todo.extend(neigh[j])
        cluster += 1
    return labels


def fit_ridge(Xs: np.ndarray, y: np.ndarray, lam: float) -> tuple[float, np.ndarray]:
    """Ridge with an unpenalized intercept on column-centred ``Xs``.

    Returns (intercept, coefficients). Falls back to least squares when the
    penalized normal matrix is singular (lam = 0 on a rank-deficient design).
    """
    xm = Xs.mean(axis=0)
    ym = y.mean()
    Xc = Xs - xm
    A = Xc.T @ Xc + lam * np.eye(Xs.shape[1])
    b = Xc.T @ (y - ym)
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(Xc, y - ym, rcond=None)[0]
    return float(ym - xm @ beta), beta


class History:
    """Sliding window of past submissions at one system, with cached fits."""

    def __init__(self, params: PredictorParams | None = None):
        self.params = params or PredictorParams()
        self.records: deque[HistoryRecord] = deque(maxlen=self.params.history_window)
        self._cache = None

    def __len__(self):
        return len(self.records)

    def add(self, features, observed_wait: float):
        if observed_wait < 0:
            raise ValueError("observed wait must be non-negative")
        self.records.append(HistoryRecord(tuple(float(f) for f in features), float(observed_wait)))
        self._cache = None

    def _prepared(self):
        if self._cache is None:
            X = np.array([r.features for r in self.records], dtype=float)
            y = np.array([r.observed_wait for r in self.records], dtype=float)
            # content order makes neighbor ties and DBSCAN labels independent of insertion order
            order = np.lexsort(np.column_stack([X, y])[:, ::-1].T)
            X, y = X[order], y[order]
            Xs, mean, scale = standardize(X)
            self._cache = {"X": Xs, "y": y, "mean": mean, "scale": scale, "ridge": None}
        return self._cache

    def ridge_model(self) -> tuple[float, np.ndarray]:
        c = self._prepared()
        if c["ridge"] is None:
            c["ridge"] = fit_ridge(c["X"], c["y"], self.params.ridge_lambda)
        return c["ridge"]

    def predict(self, target) -> float:
        p = self.params
        n = len(self.records)
        if n == 0:
            raise ValueError("cannot predict from an empty history")
        if n == 1:
            return max(0.0, self.records[0].observed_wait)
        c = self._prepared()
        t = (np.asarray(target, dtype=float) - c["mean"]) / c["scale"]
        if n >= p.dbscan_min_pts:
            est = self._cluster_estimate(t, c["X"], c["y"])
            if est is not None:
                return max(0.0, est)
        b0, beta = self.ridge_model()
        return max(0.0, float(b0 + t @ beta))

    def _cluster_estimate(self, t, Xs, y) -> float | None:
        p = self.params
        d = np.abs(Xs - t).sum(axis=1)
        nearest = np.argsort(d, kind="stable")[:p.k_nearest]
        labels = dbscan(Xs[nearest], p.dbscan_eps, p.dbscan_min_pts)
        best = None
        for lab in range(labels.max() + 1):
            members = nearest[labels == lab]
            md = d[members].mean()
            if best is None or md < best[0]:
                best = (md, members)
        if best is None or best[0] > p.similarity_threshold:
            return None
        w = 1.0 / (d[best[1]] + p.idw_eps)
        return float(np.sum(w * y[best[1]]) / np.sum(w))


def predict_wait(target, history, params: PredictorParams | None = None) -> float:
    """Predicted queue wait (s) for feature vector ``target`` given past records."""
    params = params or PredictorParams()
    h = History(PredictorParams(**{**params.__dict__, "history_window": max(1, len(history))}))
    for r in history:
        h.add(r.features, r.observed_wait)
    return h.predict(target)
