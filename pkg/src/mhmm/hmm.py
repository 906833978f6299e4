"""Single-HMM core: parameters, log-space forward-backward and sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emissions import FAMILIES, emission_from_dict
from .errors import ParameterError, UnderflowError

#: Transition probabilities are floored at this value inside the recursions.
TRANSITION_FLOOR = 1e-12
_SUM_TOL = 1e-9


def _check_simplex(vec, what, axis=-1):
    if not np.all(np.isfinite(vec)) or vec.min() < 0 or vec.max() > 1:
        raise ParameterError(f"{what} entries must lie in [0, 1]")
    if np.any(np.abs(vec.sum(axis=axis) - 1.0) > _SUM_TOL):
        raise ParameterError(f"{what} must sum to 1 (within {_SUM_TOL})")


@dataclass(frozen=True, eq=False)
class HmmParams:
    """Parameters of one HMM.

    Parameters
    ----------
    initial : (J,) array
        Initial state distribution.
    transition : (J, J) array
        Row-stochastic transition matrix, ``transition[i, j] = p(c_m = j | c_{m-1} = i)``.
    emission : Categorical, GaussianDiag or Poisson
        Emission parameters for the ``J`` states.

    Arrays are copied and made read-only on construction.
    """

    initial: np.ndarray
    transition: np.ndarray
    emission: object

    def __post_init__(self):
        initial = np.array(self.initial, dtype=float)
        transition = np.array(self.transition, dtype=float)
        if initial.ndim != 1 or initial.size < 1:
            raise ParameterError("initial distribution must be a non-empty vector")
        J = initial.size
        if transition.shape != (J, J):
            raise ParameterError(f"transition must be ({J}, {J}), got {transition.shape}")
        _check_simplex(initial, "initial distribution")
        _check_simplex(transition, "transition rows", axis=1)
        if getattr(self.emission, "num_states", None) != J:
            raise ParameterError(
                f"emission has {getattr(self.emission, 'num_states', None)} states, expected {J}"
            )
        initial.flags.writeable = False
        transition.flags.writeable = False
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)

    @property
    def num_states(self) -> int:
        return self.initial.size

    @property
    def family(self) -> str:
        return self.emission.family

    def replace(self, **changes) -> "HmmParams":
        fields = {"initial": self.initial, "transition": self.transition, "emission": self.emission}
        fields.update(changes)
        return HmmParams(**fields)

    def permuted(self, perm) -> "HmmParams":
        """Relabel states: new state ``s`` is old state ``perm[s]``."""
        perm = np.asarray(perm)
        return HmmParams(self.initial[perm], self.transition[np.ix_(perm, perm)],
                         self.emission.permuted(perm))

    def to_dict(self) -> dict:
        return {
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "emission": self.emission.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HmmParams":
        try:
            return cls(np.asarray(doc["initial"], dtype=float),
                       np.asarray(doc["transition"], dtype=float),
                       emission_from_dict(doc["emission"]))
        except KeyError as exc:
            raise ParameterError(f"HMM document missing field {exc}") from None


@dataclass(frozen=True, eq=False)
class PosteriorTables:
    """E-step output for one sequence under one HMM.

    ``gamma[m, j]`` is the posterior of state ``j`` at step ``m``;
    ``xi[m, i, j]`` the joint posterior of states ``i`` at ``m`` and ``j`` at ``m + 1``.
    """

    gamma: np.ndarray
    xi: np.ndarray
    log_likelihood: float


def _log_rows(mat):
    with np.errstate(divide="ignore"):
        return np.log(mat)


def _forward(log_initial, trans, log_b):
    """Batched log-space forward pass.

    ``log_b`` has shape ``(N, M, J)``; returns ``log_alpha`` of the same shape.
    Each step is a max-shifted log-sum-exp written as a matrix product.
    """
    N, M, J = log_b.shape
    log_alpha = np.empty_like(log_b)
    log_alpha[:, 0] = log_initial + log_b[:, 0]
    with np.errstate(divide="ignore"):
        for m in range(1, M):
            prev = log_alpha[:, m - 1]
            shift = prev.max(axis=1, keepdims=True)
            shift[~np.isfinite(shift)] = 0.0
            log_alpha[:, m] = np.log(np.exp(prev - shift) @ trans) + shift + log_b[:, m]
    return log_alpha


def _backward(trans, log_b):
    N, M, J = log_b.shape
    log_beta = np.zeros_like(log_b)
    with np.errstate(divide="ignore"):
        for m in range(M - 2, -1, -1):
            nxt = log_b[:, m + 1] + log_beta[:, m + 1]
            shift = nxt.max(axis=1, keepdims=True)
            shift[~np.isfinite(shift)] = 0.0
            log_beta[:, m] = np.log(np.exp(nxt - shift) @ trans.T) + shift
    return log_beta


def _logsumexp_last(x):
    shift = x.max(axis=-1)
    safe = np.where(np.isfinite(shift), shift, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(x - safe[..., None]).sum(axis=-1)) + safe


def _dead_steps(log_alpha):
    """Index of the first step where all states have zero forward mass, or -1."""
    dead = ~np.isfinite(log_alpha).any(axis=2)
    any_dead = dead.any(axis=1)
    return np.where(any_dead, dead.argmax(axis=1), -1)


def _floored_transition(params):
    return np.maximum(params.transition, TRANSITION_FLOOR)


def batch_log_likelihood(params: HmmParams, obs) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass over a stack of equal-length sequences.

    Returns ``(log_likelihood, dead_step)`` arrays of shape ``(N,)``; sequences
    with zero probability get ``-inf`` and the 0-based step where mass vanished.
    """
    log_b = params.emission.log_prob(obs)
    if log_b.ndim == 2:
        log_b = log_b[None]
    log_alpha = _forward(_log_rows(params.initial), _floored_transition(params), log_b)
    return _logsumexp_last(log_alpha[:, -1]), _dead_steps(log_alpha)


def batch_forward_backward(params: HmmParams, obs):
    """Forward-backward over a stack of equal-length sequences.

    Parameters
    ----------
    params : HmmParams
    obs : array
        Observations stacked along a leading axis of size ``N``.

    Returns
    -------
    gamma : (N, M, J) array
    xi : (N, M - 1, J, J) array
    log_likelihood : (N,) array
    dead_step : (N,) int array
        First step with zero forward mass, ``-1`` if none. Posteriors of such
        sequences are set to zero.
    """
    log_b = params.emission.log_prob(obs)
    if log_b.ndim == 2:
        log_b = log_b[None]
    trans = _floored_transition(params)
    log_alpha = _forward(_log_rows(params.initial), trans, log_b)
    log_beta = _backward(trans, log_b)
    ll = _logsumexp_last(log_alpha[:, -1])
    dead = _dead_steps(log_alpha)
    ok = np.isfinite(ll)

    # normalize each step by its own log-sum so rows sum to 1 to rounding
    with np.errstate(invalid="ignore"):
        log_g = log_alpha + log_beta
        gamma = np.exp(log_g - _logsumexp_last(log_g)[..., None])
        log_xi = (log_alpha[:, :-1, :, None] + np.log(trans)
                  + (log_b + log_beta)[:, 1:, None, :])
        N, M1, J, _ = log_xi.shape
        flat = log_xi.reshape(N, M1, J * J)
        xi = np.exp(flat - _logsumexp_last(flat)[..., None]).reshape(log_xi.shape)
    gamma[~ok] = 0.0
    xi[~ok] = 0.0
    return gamma, xi, ll, dead


def _as_single(params, seq):
    seq = np.asarray(seq)
    if seq.ndim < 1 or seq.shape[0] < 1:
        raise ParameterError("sequence must contain at least one observation")
    if params.family == "categorical":
        if seq.ndim != 1:
            raise ParameterError(f"categorical sequence must be 1-D, got shape {seq.shape}")
    elif seq.ndim != 2:
        raise ParameterError(f"{params.family} sequence must be (M, D), got shape {seq.shape}")
    return seq[None]


def _raise_underflow(dead_step):
    raise UnderflowError(
        f"zero likelihood: every hidden state has probability 0 at step {int(dead_step)}",
        step=int(dead_step),
    )


def forward_backward(params: HmmParams, seq) -> PosteriorTables:
    """Posterior state marginals, pairwise posteriors and ``log p(Y | params)``.

    All recursions run in log space. Raises :class:`UnderflowError` naming the
    step at which the sequence becomes impossible under ``params``.

    Examples
    --------
    >>> from mhmm.emissions import Categorical
    >>> p = HmmParams([.5, .5], [[.9, .1], [.1, .9]], Categorical([[.2, .8], [.8, .2]]))
    >>> post = forward_backward(p, [0])
    >>> post.gamma.round(3).tolist()
    [[0.2, 0.8]]
    """
    gamma, xi, ll, dead = batch_forward_backward(params, _as_single(params, seq))
    if not np.isfinite(ll[0]):
        _raise_underflow(dead[0])
    return PosteriorTables(gamma[0], xi[0], float(ll[0]))


def sequence_log_likelihood(params: HmmParams, seq) -> float:
    """``log p(Y | params)`` in nats from the forward pass alone."""
    ll, dead = batch_log_likelihood(params, _as_single(params, seq))
    if not np.isfinite(ll[0]):
        _raise_underflow(dead[0])
    return float(ll[0])


def sample_sequence(params: HmmParams, length: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(observations, state_path)`` of the given length.

    ``seed`` may be an integer or a ``numpy.random.Generator``.
    """
    if int(length) < 1:
        raise ParameterError("length must be >= 1")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(params.transition, axis=1)
    init_cdf = np.cumsum(params.initial)
    J = params.num_states
    u = rng.random(length)
    states = np.empty(length, dtype=np.int64)
    states[0] = min(np.searchsorted(init_cdf, u[0], side="right"), J - 1)
    for m in range(1, length):
        states[m] = min(np.searchsorted(cdf[states[m - 1]], u[m], side="right"), J - 1)
    return params.emission.sample(states, rng), states


__all__ = [
    "FAMILIES",
    "HmmParams",
    "PosteriorTables",
    "TRANSITION_FLOOR",
    "batch_forward_backward",
    "batch_log_likelihood",
    "forward_backward",
    "sample_sequence",
    "sequence_log_likelihood",
]
