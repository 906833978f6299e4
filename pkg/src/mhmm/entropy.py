"""Markov-chain entropy metrics used as an interpretability measure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import ParameterError

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class StationaryDistribution:
    """Solution of ``mu^T A = mu^T`` with ``sum(mu) = 1``.

    ``non_unique`` is set when ``A`` has more than one closed communicating
    class; ``mu`` is then the minimum-norm solution.
    """

    mu: np.ndarray
    non_unique: bool = False


@dataclass(frozen=True)
class EntropyReport:
    per_component_nats: tuple
    per_component_normalized: tuple
    model_average_normalized: float

    def to_dict(self) -> dict:
        return {
            "per_component_nats": list(self.per_component_nats),
            "per_component_normalized": list(self.per_component_normalized),
            "model_average_normalized": self.model_average_normalized,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EntropyReport":
        return cls(tuple(doc["per_component_nats"]), tuple(doc["per_component_normalized"]),
                   doc["model_average_normalized"])


def _check_stochastic(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ParameterError(f"transition matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or A.min() < 0:
        raise ParameterError("transition matrix entries must be finite and non-negative")
    if np.any(np.abs(A.sum(axis=1) - 1.0) > _SUM_TOL):
        raise ParameterError("transition matrix rows must sum to 1")
    return A


def stationary_distribution(A) -> StationaryDistribution:
    """Stationary distribution of a row-stochastic matrix by a direct solve.

    The ``J + 1`` equations ``(A^T - I) mu = 0`` and ``1^T mu = 1`` are solved
    in the least-squares sense; for reducible chains this picks the
    minimum-norm stationary vector.

    >>> stationary_distribution([[.99, .01], [.02, .98]]).mu.round(6).tolist()
    [0.666667, 0.333333]
    """
    A = _check_stochastic(A)
    J = A.shape[0]
    lhs = A.T - np.eye(J)
    system = np.vstack([lhs, np.ones((1, J))])
    rhs = np.zeros(J + 1)
    rhs[-1] = 1.0
    mu, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    # eigenvalue 1 has geometric multiplicity J - rank(A^T - I)
    non_unique = J > 1 and np.linalg.matrix_rank(lhs, tol=1e-10) < J - 1
    return StationaryDistribution(mu, bool(non_unique))


def entropy_rate(A) -> float:
    """Entropy rate in nats, ``-sum_i mu_i sum_j A_ij log A_ij`` (``0 log 0 = 0``)."""
    A = _check_stochastic(A)
    mu = stationary_distribution(A).mu
    row_entropy = -xlogy(A, A).sum(axis=1)
    return float(max(mu @ row_entropy, 0.0))


def normalized_entropy(A) -> float:
    """Entropy rate divided by ``log J``; 1 for the uniform matrix, 0 when ``J = 1``."""
    A = _check_stochastic(A)
    J = A.shape[0]
    if J == 1:
        return 0.0
    return entropy_rate(A) / np.log(J)


def entropy_report(transitions) -> EntropyReport:
    nats = tuple(entropy_rate(A) for A in transitions)
    normalized = tuple(normalized_entropy(A) for A in transitions)
    return EntropyReport(nats, normalized, float(np.mean(normalized)))


def model_entropy(model) -> EntropyReport:
    """Per-component and model-average entropy of a :class:`MixtureModel`."""
    return entropy_report([c.transition for c in model.components])


def transition_inner_product(A1, A2) -> float:
    """Sum of the element-wise product of two transition matrices."""
    A1 = np.asarray(A1, dtype=float)
    A2 = np.asarray(A2, dtype=float)
    if A1.shape != A2.shape:
        raise ParameterError(f"shape mismatch: {A1.shape} vs {A2.shape}")
    return float(np.sum(A1 * A2))
