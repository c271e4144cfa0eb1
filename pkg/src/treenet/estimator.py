"""Scikit-learn style wrapper around the tree network trainer.

Samples are terms (S-expression strings or Term values) and targets are
one or more binary outputs per sample, so the model drops into the usual
fit/predict workflow and `score` is exact-match accuracy across outputs.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .terms import Term, collect_signatures, parse_term
from .tnn import (
    DEFAULT_HEAD,
    Example,
    OperatorSignature,
    embed,
    infer,
    random_tnn,
)
from .train import Phase, Schedule, round_half_up, train_tnn


def _as_terms(X) -> list[Term]:
    terms = []
    for item in X:
        if isinstance(item, Term):
            terms.append(item)
        elif isinstance(item, str):
            terms.append(parse_term(item))
        else:
            raise TypeError(
                f"samples must be Term values or S-expression strings,"
                f" got {type(item).__name__}"
            )
    if not terms:
        raise ValueError("X must contain at least one term")
    return terms


def _as_targets(y) -> tuple[np.ndarray, bool]:
    arr = np.asarray(y, dtype=np.float64)
    was_flat = arr.ndim == 1
    if was_flat:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ValueError(f"y must be 1-D or 2-D, got shape {np.shape(y)}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("targets must be finite values in [0, 1]")
    return arr, was_flat


class TreeNetClassifier(ClassifierMixin, BaseEstimator):
    """Multi-output binary classifier over first-order terms.

    Builds one small dense network per operator seen in the training
    terms plus a sigmoid head, then trains everything jointly with plain
    minibatch SGD.  Predictions round each head output to 0 or 1.

    Pass `schedule` (a Schedule, or an iterable of (nepoch, lr, batch,
    ncore) tuples) for multi-phase training; otherwise a single phase is
    built from epochs, learning_rate, batch_size and n_jobs.
    """

    def __init__(
        self,
        embedding_dim: int = 12,
        hidden_sizes: tuple[int, ...] = (12,),
        epochs: int = 100,
        learning_rate: float = 0.02,
        batch_size: int = 16,
        n_jobs: int | None = None,
        schedule=None,
        random_state: int = 0,
    ):
        self.embedding_dim = embedding_dim
        self.hidden_sizes = hidden_sizes
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_jobs = n_jobs
        self.schedule = schedule
        self.random_state = random_state

    def _resolved_schedule(self) -> Schedule:
        if self.schedule is not None:
            return Schedule.coerce(self.schedule)
        return Schedule(
            (
                Phase(
                    nepoch=self.epochs,
                    learning_rate=self.learning_rate,
                    batch_size=self.batch_size,
                    ncore=self.n_jobs or 1,
                ),
            )
        )

    def _seed(self) -> int:
        return 0 if self.random_state is None else int(self.random_state)

    def fit(self, X, y) -> "TreeNetClassifier":
        terms = _as_terms(X)
        targets, was_flat = _as_targets(y)
        if len(terms) != targets.shape[0]:
            raise ValueError(
                f"X has {len(terms)} samples but y has {targets.shape[0]}"
            )
        hidden = tuple(int(h) for h in self.hidden_sizes)
        signatures = [
            OperatorSignature(name, arity, hidden)
            for name, arity in sorted(collect_signatures(terms))
        ]
        signatures.append(
            OperatorSignature(
                DEFAULT_HEAD,
                0,
                hidden,
                is_head=True,
                output_size=targets.shape[1],
            )
        )
        initial = random_tnn(signatures, int(self.embedding_dim), self._seed())
        examples = [
            Example(term, {DEFAULT_HEAD: row}) for term, row in zip(terms, targets)
        ]
        self.tnn_, self.report_ = train_tnn(
            self._resolved_schedule(), initial, examples, [], seed=self._seed()
        )
        self.n_outputs_ = targets.shape[1]
        self.classes_ = np.array([0, 1])
        self._flat_targets = was_flat
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "tnn_"):
            raise NotFittedError(
                "this TreeNetClassifier is not fitted yet; call fit first"
            )

    def predict_proba(self, X) -> np.ndarray:
        """Raw sigmoid outputs, one row per sample."""
        self._check_fitted()
        terms = _as_terms(X)
        return np.array([infer(self.tnn_, t, DEFAULT_HEAD) for t in terms])

    def predict(self, X) -> np.ndarray:
        """Outputs rounded to 0/1; shape follows the y passed to fit."""
        proba = self.predict_proba(X)
        predicted = round_half_up(proba).astype(int)
        if self._flat_targets:
            return predicted[:, 0]
        return predicted

    def transform(self, X) -> np.ndarray:
        """Root embeddings of the samples, shape (n, embedding_dim)."""
        self._check_fitted()
        terms = _as_terms(X)
        return np.array([embed(self.tnn_, t) for t in terms])
