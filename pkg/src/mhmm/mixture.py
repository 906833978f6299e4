"""Mixtures of HMMs: model container, E-step and the standard M-step."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emissions import MIN_OCCUPANCY, ZeroOccupancyWarning
from .errors import ParameterError, UnderflowError
from .hmm import HmmParams, PosteriorTables, batch_forward_backward

MODEL_SCHEMA = "mhmm.model/1"
_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """``K`` HMM components sharing one emission family, with mixing weights."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ParameterError("a mixture needs at least one component")
        weights = np.array(self.weights, dtype=float)
        if weights.shape != (len(comps),):
            raise ParameterError(f"expected {len(comps)} mixing weights, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or weights.min() < 0 or abs(weights.sum() - 1) > _SUM_TOL:
            raise ParameterError("mixing weights must be a probability vector")
        first = comps[0]
        for c in comps[1:]:
            if c.family != first.family or c.num_states != first.num_states:
                raise ParameterError("all components must share emission family and state count")
            if _emission_dim(c) != _emission_dim(first):
                raise ParameterError("all components must share observation dimensionality")
        weights.flags.writeable = False
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", weights)

    @property
    def num_components(self) -> int:
        return len(self.components)

    @property
    def num_states(self) -> int:
        return self.components[0].num_states

    @property
    def family(self) -> str:
        return self.components[0].family

    @property
    def transitions(self) -> list:
        return [c.transition for c in self.components]

    def permuted(self, perm) -> "MixtureModel":
        """Relabel components: new component ``k`` is old component ``perm[k]``."""
        return MixtureModel(tuple(self.components[p] for p in perm), self.weights[list(perm)])

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "family": self.family,
            "num_components": self.num_components,
            "num_states": self.num_states,
            "weights": self.weights.tolist(),
            "components": [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MixtureModel":
        if doc.get("schema") != MODEL_SCHEMA:
            raise ParameterError(f"not a model document (schema={doc.get('schema')!r})")
        try:
            comps = tuple(HmmParams.from_dict(c) for c in doc["components"])
            return cls(comps, np.asarray(doc["weights"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed model document: {exc}") from None


def _emission_dim(params):
    em = params.emission
    return getattr(em, "dim", None) or getattr(em, "num_symbols", None)


def save_model(model: MixtureModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path) -> MixtureModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read model document {path}: {exc}") from None
    return MixtureModel.from_dict(doc)


@dataclass(frozen=True, eq=False)
class EStepResult:
    """Posterior quantities for every (sequence, component) pair.

    Attributes
    ----------
    responsibilities : (N, K) array
        ``p(Z_n = k | Y_n)``.
    posteriors : list of list of PosteriorTables
        ``posteriors[n][k]`` holds the unweighted state posteriors of sequence
        ``n`` under component ``k``; multiply by ``responsibilities[n, k]`` for
        the mixture-level quantities.
    log_likelihoods : (N, K) array
        ``log p(Y_n | component k)``.
    total_log_likelihood : float
        ``sum_n log sum_k pi_k p(Y_n | k)``.
    """

    responsibilities: np.ndarray
    posteriors: list
    log_likelihoods: np.ndarray
    total_log_likelihood: float

    def transition_counts(self, k: int) -> np.ndarray:
        """Responsibility-weighted expected transition counts of component ``k``, shape ``(J, J)``."""
        r = self.responsibilities[:, k]
        J = self.posteriors[0][k].gamma.shape[1]
        total = np.zeros((J, J))
        for n, row in enumerate(self.posteriors):
            if r[n] > 0:
                total += r[n] * row[k].xi.sum(axis=0)
        return total

    def initial_counts(self, k: int) -> np.ndarray:
        r = self.responsibilities[:, k]
        return sum(r[n] * row[k].gamma[0] for n, row in enumerate(self.posteriors))

    def state_weights(self, k: int) -> np.ndarray:
        """Per-step state weights ``r_nk * gamma_nk`` concatenated over sequences, ``(T, J)``."""
        r = self.responsibilities[:, k]
        return np.concatenate([r[n] * row[k].gamma for n, row in enumerate(self.posteriors)])


def e_step(model: MixtureModel, data) -> EStepResult:
    """Responsibilities and per-component posteriors for every sequence."""
    N, K = len(data), model.num_components
    log_lik = np.empty((N, K))
    posteriors = [[None] * K for _ in range(N)]
    dead_steps = np.full((N, K), -1)
    for idx, obs in data.length_groups:
        for k, comp in enumerate(model.components):
            gamma, xi, ll, dead = batch_forward_backward(comp, obs)
            log_lik[idx, k] = ll
            dead_steps[idx, k] = dead
            for pos, n in enumerate(idx):
                posteriors[n][k] = PosteriorTables(gamma[pos], xi[pos], float(ll[pos]))

    with np.errstate(divide="ignore"):
        joint = log_lik + np.log(model.weights)
    shift = joint.max(axis=1)
    bad = ~np.isfinite(shift)
    if bad.any():
        n = int(np.flatnonzero(bad)[0])
        raise UnderflowError(
            f"sequence {n} has zero likelihood under every component "
            f"(first impossible step per component: {dead_steps[n].tolist()})",
            step=int(dead_steps[n].max()), sequence=n,
        )
    resp = np.exp(joint - shift[:, None])
    norm = resp.sum(axis=1)
    resp /= norm[:, None]
    per_seq = shift + np.log(norm)
    return EStepResult(resp, posteriors, log_lik, float(np.sum(per_seq)))


def normalize_counts(counts, previous, what="transition rows"):
    """Row-normalize expected counts; rows with no mass keep ``previous``."""
    counts = np.asarray(counts, dtype=float)
    mass = counts.sum(axis=-1)
    occupied = mass > MIN_OCCUPANCY
    out = np.array(previous, dtype=float)
    out[occupied] = counts[occupied] / mass[occupied, None]
    if not occupied.all():
        warnings.warn(f"{what} {np.flatnonzero(~occupied).tolist()} received no posterior mass; "
                      "keeping previous values", ZeroOccupancyWarning, stacklevel=3)
    return out


def standard_transition(counts, previous) -> np.ndarray:
    """Closed-form transition update: expected counts normalized per row."""
    return normalize_counts(counts, previous)


def update_non_transition(estep: EStepResult, data, model_old: MixtureModel):
    """Mixing weights plus, per component, the initial distribution and emissions.

    Returns ``(weights, [(initial, emission), ...])``.
    """
    resp = estep.responsibilities
    weights = resp.sum(axis=0) / resp.shape[0]
    obs = data.concatenated
    updates = []
    for k, comp in enumerate(model_old.components):
        if resp[:, k].sum() <= MIN_OCCUPANCY:
            warnings.warn(f"component {k} received no responsibility; keeping previous parameters",
                          ZeroOccupancyWarning, stacklevel=3)
            updates.append((comp.initial, comp.emission))
            continue
        initial = normalize_counts(estep.initial_counts(k)[None], comp.initial[None],
                                   what="initial distribution")[0]
        emission = comp.emission.reestimate(obs, estep.state_weights(k))
        updates.append((initial, emission))
    return weights, updates


def assemble(weights, updates, transitions) -> MixtureModel:
    comps = tuple(HmmParams(init, A, em) for (init, em), A in zip(updates, transitions))
    return MixtureModel(comps, weights)


def m_step_standard(estep: EStepResult, data, model_old: MixtureModel) -> MixtureModel:
    """Maximum-likelihood M-step for all mixture parameters."""
    weights, updates = update_non_transition(estep, data, model_old)
    transitions = [standard_transition(estep.transition_counts(k), comp.transition)
                   for k, comp in enumerate(model_old.components)]
    return assemble(weights, updates, transitions)
