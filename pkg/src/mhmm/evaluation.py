"""Clustering quality metrics and run reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .entropy import EntropyReport
from .errors import ConfigError

REPORT_SCHEMA = "mhmm.report/1"


def hard_assignments(estep) -> np.ndarray:
    """Most responsible component per sequence (lowest index on ties)."""
    resp = estep.responsibilities if hasattr(estep, "responsibilities") else np.asarray(estep)
    return np.argmax(resp, axis=1)


def contingency_table(labels_true, labels_pred) -> np.ndarray:
    labels_true = np.asarray(labels_true)
    labels_pred = np.asarray(labels_pred)
    if labels_true.shape != labels_pred.shape or labels_true.ndim != 1:
        raise ConfigError(f"label vectors must be 1-D of equal length, got "
                          f"{labels_true.shape} and {labels_pred.shape}")
    if labels_true.size == 0:
        raise ConfigError("label vectors must be non-empty")
    _, cls = np.unique(labels_true, return_inverse=True)
    _, clu = np.unique(labels_pred, return_inverse=True)
    table = np.zeros((cls.max() + 1, clu.max() + 1))
    np.add.at(table, (cls, clu), 1.0)
    return table


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def homogeneity_completeness_v(labels_true, labels_pred, beta: float = 1.0):
    """Homogeneity, completeness and v-measure from the class/cluster contingency table.

    Degenerate cases: with a single class homogeneity is 1, with a single
    cluster completeness is 1, and ``v = 0`` when both scores are 0.
    """
    table = contingency_table(labels_true, labels_pred)
    n = table.sum()
    h_class = _entropy(table.sum(axis=1))
    h_cluster = _entropy(table.sum(axis=0))
    nz = table > 0
    joint = table[nz] / n
    cluster_sizes = np.broadcast_to(table.sum(axis=0, keepdims=True), table.shape)[nz]
    class_sizes = np.broadcast_to(table.sum(axis=1, keepdims=True), table.shape)[nz]
    h_class_given_cluster = -np.sum(joint * np.log(table[nz] / cluster_sizes))
    h_cluster_given_class = -np.sum(joint * np.log(table[nz] / class_sizes))
    homogeneity = 1.0 if h_class == 0 else 1.0 - h_class_given_cluster / h_class
    completeness = 1.0 if h_cluster == 0 else 1.0 - h_cluster_given_class / h_cluster
    homogeneity = min(max(homogeneity, 0.0), 1.0)
    completeness = min(max(completeness, 0.0), 1.0)
    if homogeneity + completeness == 0:
        v = 0.0
    else:
        v = (1 + beta) * homogeneity * completeness / (beta * homogeneity + completeness)
    return homogeneity, completeness, v


def v_measure(labels_true, labels_pred, beta: float = 1.0) -> float:
    """V-measure of a clustering against ground-truth classes, in ``[0, 1]``."""
    return homogeneity_completeness_v(labels_true, labels_pred, beta)[2]


@dataclass
class RunReport:
    """Outcome of one fit.

    ``gate_decisions`` holds, for the informational method, one list of
    per-component decisions per M-step; ``None`` for the standard method.
    """

    v_measure: float | None
    entropy: EntropyReport
    iterations: int
    final_log_likelihood: float
    seed: int
    config: dict
    converged: bool = False
    log_likelihood_history: list = field(default_factory=list)
    assignments: list | None = None
    gate_decisions: list | None = None

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "v_measure": self.v_measure,
            "entropy": self.entropy.to_dict(),
            "iterations": self.iterations,
            "final_log_likelihood": self.final_log_likelihood,
            "seed": self.seed,
            "config": self.config,
            "converged": self.converged,
            "log_likelihood_history": list(self.log_likelihood_history),
            "assignments": self.assignments,
            "gate_decisions": None if self.gate_decisions is None else [
                [d if isinstance(d, dict) else d.to_dict() for d in step]
                for step in self.gate_decisions
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunReport":
        if doc.get("schema") != REPORT_SCHEMA:
            raise ConfigError(f"not a report document (schema={doc.get('schema')!r})")
        return cls(
            v_measure=doc["v_measure"],
            entropy=EntropyReport.from_dict(doc["entropy"]),
            iterations=doc["iterations"],
            final_log_likelihood=doc["final_log_likelihood"],
            seed=doc["seed"],
            config=doc["config"],
            converged=doc.get("converged", False),
            log_likelihood_history=doc.get("log_likelihood_history", []),
            assignments=doc.get("assignments"),
            gate_decisions=doc.get("gate_decisions"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())
