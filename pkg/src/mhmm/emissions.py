"""Per-state emission distributions.

Three families are supported: ``Categorical`` for symbol sequences,
``GaussianDiag`` for real-valued vectors and ``Poisson`` for count vectors.
Each emission object holds the parameters of all ``J`` states of one HMM and
is immutable; re-estimation returns a new object.

Observation arrays follow one convention throughout the package:

* categorical: integer array of shape ``(..., )`` with symbols in ``[0, V)``
* gaussian: float array of shape ``(..., D)``
* poisson: non-negative integer array of shape ``(..., D)``

``log_prob`` maps observations of shape ``(..., [D])`` to ``(..., J)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError

#: Lower bound applied to Gaussian variances and Poisson rates.
VARIANCE_FLOOR = 1e-6
#: Total posterior weight below which a state counts as unoccupied.
MIN_OCCUPANCY = 1e-200
_SUM_TOL = 1e-9


class ZeroOccupancyWarning(RuntimeWarning):
    """A state (or component) received no posterior mass; its parameters were kept."""


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _warn_unoccupied(what, idx):
    warnings.warn(
        f"{what} {sorted(int(i) for i in idx)} received no posterior mass; "
        "keeping previous parameters",
        ZeroOccupancyWarning,
        stacklevel=3,
    )


@dataclass(frozen=True, eq=False)
class Categorical:
    """Discrete emissions; ``probs[j, v] = p(y = v | state j)``."""

    probs: np.ndarray

    family: ClassVar[str] = "categorical"

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ParameterError(f"categorical probs must be a (J, V) matrix, got {probs.shape}")
        if not np.all(np.isfinite(probs)) or probs.min() < 0 or probs.max() > 1:
            raise ParameterError("categorical probs must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > _SUM_TOL):
            raise ParameterError("categorical probs rows must sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def num_states(self) -> int:
        return self.probs.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.probs.shape[1]

    def check_observations(self, obs):
        obs = np.asarray(obs)
        if obs.size and not np.issubdtype(obs.dtype, np.integer):
            if not np.all(np.mod(obs, 1) == 0):
                raise ParameterError("categorical observations must be integer symbols")
            obs = obs.astype(np.int64)
        if obs.size and (obs.min() < 0 or obs.max() >= self.num_symbols):
            raise ParameterError(
                f"symbol out of range [0, {self.num_symbols}): "
                f"observed range [{obs.min()}, {obs.max()}]"
            )
        return obs.astype(np.int64, copy=False)

    def log_prob(self, obs) -> np.ndarray:
        obs = self.check_observations(obs)
        with np.errstate(divide="ignore"):
            log_p = np.log(self.probs)
        return np.moveaxis(log_p[:, obs], 0, -1)

    def sample(self, states, rng) -> np.ndarray:
        cdf = np.cumsum(self.probs, axis=1)
        u = rng.random(len(states))
        out = (u[:, None] >= cdf[np.asarray(states)]).sum(axis=1)
        return np.minimum(out, self.num_symbols - 1).astype(np.int64)

    def reestimate(self, obs, weights) -> "Categorical":
        """Weighted maximum-likelihood update; ``weights`` has shape ``(T, J)``."""
        obs = self.check_observations(obs).reshape(-1)
        counts = np.stack(
            [np.bincount(obs, weights=weights[:, j], minlength=self.num_symbols)
             for j in range(self.num_states)]
        )
        mass = counts.sum(axis=1)
        occupied = mass > MIN_OCCUPANCY
        probs = np.array(self.probs)
        probs[occupied] = counts[occupied] / mass[occupied, None]
        if not occupied.all():
            _warn_unoccupied("emission states", np.flatnonzero(~occupied))
        return Categorical(probs)

    def permuted(self, perm) -> "Categorical":
        return Categorical(self.probs[perm])

    def to_dict(self) -> dict:
        return {"family": self.family, "probs": self.probs.tolist()}


@dataclass(frozen=True, eq=False)
class GaussianDiag:
    """Diagonal-covariance Gaussian emissions over ``D`` real dimensions."""

    means: np.ndarray
    variances: np.ndarray

    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        means = _frozen(self.means)
        variances = _frozen(self.variances)
        if means.ndim != 2 or means.shape != variances.shape:
            raise ParameterError(
                f"means and variances must both be (J, D); got {means.shape} and {variances.shape}"
            )
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(variances))):
            raise ParameterError("gaussian parameters must be finite")
        if variances.min() < VARIANCE_FLOOR * (1 - 1e-12):
            raise ParameterError(f"variances must be >= {VARIANCE_FLOOR}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def num_states(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def check_observations(self, obs):
        obs = np.asarray(obs, dtype=float)
        if obs.ndim < 1 or obs.shape[-1] != self.dim:
            raise ParameterError(f"expected observations with last dimension {self.dim}, got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ParameterError("gaussian observations must be finite")
        return obs

    def log_prob(self, obs) -> np.ndarray:
        obs = self.check_observations(obs)
        diff = obs[..., None, :] - self.means
        return -0.5 * np.sum(np.log(2 * np.pi * self.variances) + diff**2 / self.variances, axis=-1)

    def sample(self, states, rng) -> np.ndarray:
        states = np.asarray(states)
        noise = rng.standard_normal((len(states), self.dim))
        return self.means[states] + np.sqrt(self.variances[states]) * noise

    def reestimate(self, obs, weights) -> "GaussianDiag":
        obs = self.check_observations(obs).reshape(-1, self.dim)
        mass = weights.sum(axis=0)
        occupied = mass > MIN_OCCUPANCY
        means = np.array(self.means)
        variances = np.array(self.variances)
        for j in np.flatnonzero(occupied):
            w = weights[:, j]
            mu = w @ obs / mass[j]
            means[j] = mu
            variances[j] = np.maximum(w @ (obs - mu) ** 2 / mass[j], VARIANCE_FLOOR)
        if not occupied.all():
            _warn_unoccupied("emission states", np.flatnonzero(~occupied))
        return GaussianDiag(means, variances)

    def permuted(self, perm) -> "GaussianDiag":
        return GaussianDiag(self.means[perm], self.variances[perm])

    def to_dict(self) -> dict:
        return {"family": self.family, "means": self.means.tolist(),
                "variances": self.variances.tolist()}


@dataclass(frozen=True, eq=False)
class Poisson:
    """Independent Poisson counts per dimension; ``rates`` has shape ``(J, D)``."""

    rates: np.ndarray

    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        rates = _frozen(self.rates)
        if rates.ndim != 2:
            raise ParameterError(f"rates must be (J, D), got {rates.shape}")
        if not np.all(np.isfinite(rates)) or rates.min() < VARIANCE_FLOOR * (1 - 1e-12):
            raise ParameterError(f"rates must be finite and >= {VARIANCE_FLOOR}")
        object.__setattr__(self, "rates", rates)

    @property
    def num_states(self) -> int:
        return self.rates.shape[0]

    @property
    def dim(self) -> int:
        return self.rates.shape[1]

    def check_observations(self, obs):
        obs = np.asarray(obs)
        if obs.ndim < 1 or obs.shape[-1] != self.dim:
            raise ParameterError(f"expected count vectors of dimension {self.dim}, got {obs.shape}")
        if obs.size and (obs.min() < 0 or not np.all(np.mod(obs, 1) == 0)):
            raise ParameterError("poisson observations must be non-negative integers")
        return obs.astype(float)

    def log_prob(self, obs) -> np.ndarray:
        obs = self.check_observations(obs)[..., None, :]
        return np.sum(obs * np.log(self.rates) - self.rates - gammaln(obs + 1), axis=-1)

    def sample(self, states, rng) -> np.ndarray:
        return rng.poisson(self.rates[np.asarray(states)]).astype(np.int64)

    def reestimate(self, obs, weights) -> "Poisson":
        obs = self.check_observations(obs).reshape(-1, self.dim)
        mass = weights.sum(axis=0)
        occupied = mass > MIN_OCCUPANCY
        rates = np.array(self.rates)
        rates[occupied] = (weights[:, occupied].T @ obs) / mass[occupied, None]
        rates = np.maximum(rates, VARIANCE_FLOOR)
        if not occupied.all():
            _warn_unoccupied("emission states", np.flatnonzero(~occupied))
        return Poisson(rates)

    def permuted(self, perm) -> "Poisson":
        return Poisson(self.rates[perm])

    def to_dict(self) -> dict:
        return {"family": self.family, "rates": self.rates.tolist()}


FAMILIES = {cls.family: cls for cls in (Categorical, GaussianDiag, Poisson)}

#: dataset element type -> emission family
ELEMENT_FAMILY = {"categorical": "categorical", "real": "gaussian", "count": "poisson"}


def emission_from_dict(doc: dict):
    try:
        family = doc["family"]
        if family == "categorical":
            return Categorical(np.asarray(doc["probs"], dtype=float))
        if family == "gaussian":
            return GaussianDiag(np.asarray(doc["means"], dtype=float),
                                np.asarray(doc["variances"], dtype=float))
        if family == "poisson":
            return Poisson(np.asarray(doc["rates"], dtype=float))
    except KeyError as exc:
        raise ParameterError(f"emission document missing field {exc}") from None
    raise ParameterError(f"unknown emission family {doc.get('family')!r}")
