"""Estimator-style wrappers around the pyramid clustering and search core.

These follow the scikit-learn conventions (constructor params only, fit
returns self, trailing-underscore attributes for fitted state) so the
toolkit composes with standard pipelines and parameter search helpers.
Rows of X are flattened filters: length in_channels * kernel_side**2,
channel-major then row-major within each kernel.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .clustering import cluster
from .driver import DEFAULT_LOSS_BUDGET, run
from .pyramid import build_pyramids_from_matrix
from .search import CandidateSet, SearchResult, find_closest
from .validation import as_filter_matrix


class MedianRootClustering(ClusterMixin, BaseEstimator):
    """Cluster filters by pyramid distance with median-mean representatives.

    Fitted attributes: labels_ (cluster id per row, ids ordered by
    representative row), representative_indices_ (row index of each
    cluster's representative), n_iter_, converged_.
    """

    def __init__(
        self,
        n_clusters: int = 8,
        *,
        kernel_side: int = 3,
        init: str = "even-spaced",
        random_state: int | None = None,
        max_iter: int = 100,
    ):
        self.n_clusters = n_clusters
        self.kernel_side = kernel_side
        self.init = init
        self.random_state = random_state
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_filter_matrix(X, self.kernel_side)
        n = X.shape[0]
        if not 1 <= self.n_clusters <= n:
            raise ValueError(f"n_clusters must be in [1, {n}], got {self.n_clusters}")
        pyramids = build_pyramids_from_matrix(X, self.kernel_side)
        result = cluster(
            pyramids,
            self.n_clusters,
            strategy=self.init,
            random_state=self.random_state,
            max_iter=self.max_iter,
        )
        labels = np.empty(n, dtype=np.int64)
        reps = []
        for cluster_id, member_set in enumerate(result.clusters):
            reps.append(member_set.representative)
            for row in member_set.members:
                labels[row] = cluster_id
        self.n_features_in_ = X.shape[1]
        self.labels_ = labels
        self.representative_indices_ = np.asarray(reps, dtype=np.int64)
        self.n_iter_ = result.iteration_count
        self.converged_ = result.converged
        return self


class NearestFilterSearch(BaseEstimator):
    """Exact nearest-filter lookup accelerated by per-level bounds.

    fit(X) indexes the candidate filters; predict(X) returns, per query
    row, the row index of the exact nearest candidate (ties go to the
    smaller index).
    """

    def __init__(self, *, kernel_side: int = 3, use_level_bounds: bool = True):
        self.kernel_side = kernel_side
        self.use_level_bounds = use_level_bounds

    def fit(self, X, y=None):
        X = as_filter_matrix(X, self.kernel_side)
        self.n_features_in_ = X.shape[1]
        self.candidates_ = CandidateSet(build_pyramids_from_matrix(X, self.kernel_side))
        return self

    def search(self, x) -> SearchResult:
        check_is_fitted(self, "candidates_")
        row = as_filter_matrix(np.atleast_2d(x), self.kernel_side)
        if row.shape[1] != self.n_features_in_:
            raise ValueError(
                f"query has {row.shape[1]} features, candidates have {self.n_features_in_}"
            )
        key = build_pyramids_from_matrix(row, self.kernel_side)[0]
        return find_closest(key, self.candidates_, use_level_bounds=self.use_level_bounds)

    def query(self, X):
        """Return (indices, squared_distances) for each query row."""
        check_is_fitted(self, "candidates_")
        X = as_filter_matrix(X, self.kernel_side)
        results = [self.search(X[i]) for i in range(X.shape[0])]
        indices = np.asarray([r.best_index for r in results], dtype=np.int64)
        distances = np.asarray([r.distance_sq for r in results], dtype=np.float64)
        return indices, distances

    def predict(self, X):
        return self.query(X)[0]


class AdaptiveFilterPruner(BaseEstimator):
    """Budgeted backward pruning of a whole conv stack.

    fit(model) runs the layer-by-layer retention search against the
    configured evaluator; the outcome lands in report_ (per-layer
    retention and retained filter indices) and state_ (full event log).
    """

    def __init__(
        self,
        evaluator=None,
        *,
        loss_budget: float = DEFAULT_LOSS_BUDGET,
        epochs: int = 1,
        strategy: str = "even-spaced",
        random_state: int | None = None,
        recluster_from_original: bool = False,
    ):
        self.evaluator = evaluator
        self.loss_budget = loss_budget
        self.epochs = epochs
        self.strategy = strategy
        self.random_state = random_state
        self.recluster_from_original = recluster_from_original

    def fit(self, model, y=None):
        if self.evaluator is None:
            raise ValueError("AdaptiveFilterPruner requires an evaluator")
        self.report_, self.state_ = run(
            model,
            self.evaluator,
            self.loss_budget,
            epochs=self.epochs,
            strategy=self.strategy,
            random_state=self.random_state,
            recluster_from_original=self.recluster_from_original,
            return_state=True,
        )
        return self

    @property
    def retention_(self):
        check_is_fitted(self, "report_")
        return {lid: res.retention for lid, res in self.report_.layers.items()}
