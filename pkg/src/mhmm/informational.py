"""Entropy-regularized M-step.

The transition update adds a Dirichlet prior that puts extra mass
``lambda - 1`` on the most common transition out of every state. A
component adopts the regularized matrix only when its entropy rate is
strictly lower than that of the plain maximum-likelihood update.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .emissions import MIN_OCCUPANCY, ZeroOccupancyWarning
from .entropy import entropy_rate
from .errors import ConfigError
from .mixture import (
    EStepResult,
    MixtureModel,
    assemble,
    standard_transition,
    update_non_transition,
)

AUTO = "auto"


@dataclass(frozen=True)
class InformationalConfig:
    """``lam`` is a number >= 1 or ``"auto"`` (mean sequence length)."""

    lam: float | str = AUTO
    gate_enabled: bool = True

    def __post_init__(self):
        check_lambda(self.lam)


@dataclass(frozen=True)
class GateDecision:
    component: int
    h_regularized: float
    h_standard: float
    chose_regularized: bool

    def to_dict(self) -> dict:
        return asdict(self)


def check_lambda(lam):
    if isinstance(lam, str):
        if lam.lower() != AUTO:
            raise ConfigError(f"lambda must be a number >= 1 or 'auto', got {lam!r}")
        return
    if lam is None or not np.isfinite(lam) or lam < 1:
        raise ConfigError(f"lambda must be >= 1, got {lam!r}")


def resolve_lambda(lam, data) -> float:
    """Numeric lambda; ``"auto"`` becomes the (mean, rounded) sequence length."""
    check_lambda(lam)
    if isinstance(lam, str):
        mean = float(np.mean(data.lengths))
        return float(np.floor(mean + 0.5))
    return float(lam)


def most_common_indicator(counts) -> np.ndarray:
    """One-hot rows marking the largest entry per row; ties go to the lowest index."""
    counts = np.asarray(counts, dtype=float)
    f = np.zeros_like(counts)
    f[np.arange(counts.shape[0]), np.argmax(counts, axis=1)] = 1.0
    return f


def regularized_transition(counts, lam: float, previous) -> np.ndarray:
    """MAP transition update with the most-common-transition prior.

    ``A_ij = ((lam - 1) f_ij + n_ij) / ((lam - 1) + sum_j n_ij)`` where
    ``n`` are the expected transition counts and ``f`` marks each row's
    largest count. Rows without posterior mass keep ``previous``.

    >>> regularized_transition([[3., 1.]], 3.0, [[.5, .5]]).tolist()
    [[0.8333333333333334, 0.16666666666666666]]
    """
    counts = np.asarray(counts, dtype=float)
    boost = lam - 1.0
    f = most_common_indicator(counts)
    mass = counts.sum(axis=1)
    out = np.array(previous, dtype=float)
    occupied = mass > MIN_OCCUPANCY
    out[occupied] = (boost * f[occupied] + counts[occupied]) / (boost + mass[occupied])[:, None]
    if not occupied.all():
        warnings.warn(f"transition rows {np.flatnonzero(~occupied).tolist()} received no "
                      "posterior mass; keeping previous values", ZeroOccupancyWarning, stacklevel=2)
    return out


def m_step_informational(estep: EStepResult, data, model_old: MixtureModel,
                         config: InformationalConfig) -> tuple[MixtureModel, list]:
    """M-step with the entropy-gated regularized transition update.

    Returns the new model and one :class:`GateDecision` per component.
    With ``config.gate_enabled`` false the regularized matrix is always used.
    """
    lam = resolve_lambda(config.lam, data)
    weights, updates = update_non_transition(estep, data, model_old)
    transitions, decisions = [], []
    for k, comp in enumerate(model_old.components):
        counts = estep.transition_counts(k)
        a_reg = regularized_transition(counts, lam, comp.transition)
        a_std = standard_transition(counts, comp.transition)
        h_reg = entropy_rate(a_reg)
        h_std = entropy_rate(a_std)
        choose = (h_reg < h_std) if config.gate_enabled else True
        transitions.append(a_reg if choose else a_std)
        decisions.append(GateDecision(k, h_reg, h_std, bool(choose)))
    return assemble(weights, updates, transitions), decisions
