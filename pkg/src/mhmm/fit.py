"""EM driver: configuration, random initialization and the fit loop."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .emissions import VARIANCE_FLOOR, Categorical, GaussianDiag, Poisson
from .entropy import model_entropy
from .errors import ConfigError, NumericalError, UnderflowError
from .evaluation import RunReport, hard_assignments, v_measure
from .hmm import HmmParams
from .informational import InformationalConfig, check_lambda, m_step_informational, resolve_lambda
from .mixture import MixtureModel, e_step, m_step_standard

log = logging.getLogger(__name__)

METHODS = ("standard", "informational")
#: Relative jitter applied to data moments when initializing emissions.
EMISSION_JITTER = 0.1


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 100
    rel_tol: float = 1e-4
    seed: int = 0
    init_dirichlet_alpha: float = 0.1
    method: str = "standard"
    lam: float | str = "auto"
    gate_enabled: bool = True

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be > 0")
        if not self.init_dirichlet_alpha > 0:
            raise ConfigError("init_dirichlet_alpha must be > 0")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "informational":
            check_lambda(self.lam)

    def to_dict(self) -> dict:
        return asdict(self)


def _jitter(rng, shape):
    return EMISSION_JITTER * rng.uniform(-1.0, 1.0, size=shape)


def init_emission(data, J, rng):
    """Emission parameters from pooled data moments, jittered per state."""
    flat = data.concatenated
    if data.family == "categorical":
        freq = np.bincount(flat, minlength=data.num_symbols) / flat.size
        probs = freq * (1.0 + _jitter(rng, (J, freq.size)))
        return Categorical(probs / probs.sum(axis=1, keepdims=True))
    mean = flat.mean(axis=0)
    if data.family == "gaussian":
        var = np.maximum(flat.var(axis=0), VARIANCE_FLOOR)
        scale = np.maximum(np.abs(mean), np.sqrt(var))
        means = mean + _jitter(rng, (J, mean.size)) * scale
        variances = np.maximum(var * (1.0 + _jitter(rng, (J, mean.size))), VARIANCE_FLOOR)
        return GaussianDiag(means, variances)
    rates = np.maximum(mean, VARIANCE_FLOOR) * (1.0 + _jitter(rng, (J, mean.size)))
    return Poisson(np.maximum(rates, VARIANCE_FLOOR))


def init_model(K: int, J: int, data, config: FitConfig) -> MixtureModel:
    """Random starting point.

    Transition rows are drawn from a symmetric Dirichlet with concentration
    ``config.init_dirichlet_alpha`` (small values give near-deterministic
    rows), initial distributions from Dirichlet(1), mixing weights are uniform
    and emissions come from :func:`init_emission`.
    """
    if K < 1 or J < 1:
        raise ConfigError("K and J must be >= 1")
    rng = np.random.default_rng(config.seed)
    comps = []
    for _ in range(K):
        transition = rng.dirichlet(np.full(J, config.init_dirichlet_alpha), size=J)
        initial = rng.dirichlet(np.ones(J))
        comps.append(HmmParams(initial, transition, init_emission(data, J, rng)))
    return MixtureModel(tuple(comps), np.full(K, 1.0 / K))


def _relative_change(prev, cur):
    return abs(cur - prev) / max(abs(prev), np.finfo(float).tiny)


def _run_e_step(model, data, iteration):
    try:
        est = e_step(model, data)
    except UnderflowError as exc:
        raise UnderflowError(f"iteration {iteration}: {exc}", step=exc.step,
                             sequence=exc.sequence) from exc
    if not np.isfinite(est.total_log_likelihood):
        raise NumericalError(f"iteration {iteration}: non-finite log-likelihood "
                             f"{est.total_log_likelihood}")
    return est


def fit(data, K: int, J: int, config: FitConfig | None = None,
        init: MixtureModel | None = None) -> tuple[MixtureModel, RunReport]:
    """Train a mixture of ``K`` HMMs with ``J`` states each by EM.

    Each iteration is one M-step followed by the E-step of the updated model;
    the loop stops once the relative change of the total log-likelihood drops
    below ``config.rel_tol`` or after ``config.max_iterations`` iterations.

    Parameters
    ----------
    data : SequenceDataset
    K, J : int
        Number of components and hidden states per component.
    config : FitConfig, optional
    init : MixtureModel, optional
        Starting model; by default drawn with :func:`init_model`.

    Returns
    -------
    model : MixtureModel
    report : RunReport
    """
    config = config or FitConfig()
    if K < 1 or J < 1:
        raise ConfigError("K and J must be >= 1")
    if K > len(data):
        raise ConfigError(f"K={K} exceeds the number of sequences N={len(data)}")
    model = init if init is not None else init_model(K, J, data, config)
    if model.num_components != K or model.num_states != J:
        raise ConfigError("initial model does not match K and J")
    if model.family != data.family:
        raise ConfigError(f"model family {model.family!r} does not match data ({data.family!r})")

    informational = config.method == "informational"
    info_config = None
    lam = None
    if informational:
        lam = resolve_lambda(config.lam, data)
        info_config = InformationalConfig(lam, config.gate_enabled)

    est = _run_e_step(model, data, 0)
    history = [est.total_log_likelihood]
    decisions = [] if informational else None
    converged = False
    iterations = 0
    for it in range(1, config.max_iterations + 1):
        if informational:
            model, step_decisions = m_step_informational(est, data, model, info_config)
            decisions.append(step_decisions)
        else:
            model = m_step_standard(est, data, model)
        est = _run_e_step(model, data, it)
        history.append(est.total_log_likelihood)
        iterations = it
        log.debug("iteration %d: log-likelihood %.6f", it, history[-1])
        if _relative_change(history[-2], history[-1]) < config.rel_tol:
            converged = True
            break

    assignments = hard_assignments(est)
    vm = None if data.labels is None else v_measure(data.labels, assignments)
    snapshot = dict(config.to_dict(), K=K, J=J, resolved_lambda=lam,
                    dataset=data.name, num_sequences=len(data))
    report = RunReport(
        v_measure=vm,
        entropy=model_entropy(model),
        iterations=iterations,
        final_log_likelihood=history[-1],
        seed=config.seed,
        config=snapshot,
        converged=converged,
        log_likelihood_history=history,
        assignments=assignments.tolist(),
        gate_decisions=decisions,
    )
    return model, report
