"""Sequence corpora: containers, CSV/JSON I/O, the Libras loader and a mixture sampler."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .emissions import ELEMENT_FAMILY
from .errors import ConfigError, DatasetError

ELEMENT_TYPES = tuple(ELEMENT_FAMILY)
LAYOUTS = ("row-per-sequence", "long-format")
DATASET_SCHEMA = "mhmm.dataset/1"

LIBRAS_STEPS = 45
LIBRAS_CLASSES = range(1, 16)
#: Digit pairs used for the Libras hand-movement experiments.
LIBRAS_PAIRS = ((1, 8), (2, 3), (3, 4), (3, 8), (4, 14))


def _coerce_sequence(seq, element_type):
    if element_type == "categorical":
        arr = np.asarray(seq)
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim != 1:
            raise DatasetError(f"categorical sequences must be 1-D, got shape {arr.shape}")
        if arr.size and not np.all(np.mod(arr, 1) == 0):
            raise DatasetError("categorical symbols must be integers")
        arr = arr.astype(np.int64)
        if arr.size and arr.min() < 0:
            raise DatasetError("categorical symbols must be non-negative")
        return arr
    dtype = float if element_type == "real" else np.int64
    arr = np.asarray(seq)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DatasetError(f"{element_type} sequences must be (M, D), got shape {arr.shape}")
    if element_type == "count" and arr.size and (arr.min() < 0 or not np.all(np.mod(arr, 1) == 0)):
        raise DatasetError("count observations must be non-negative integers")
    if element_type == "real" and not np.all(np.isfinite(arr.astype(float))):
        raise DatasetError("real observations must be finite")
    return arr.astype(dtype)


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    """``N`` observation sequences of one element type, with optional labels.

    ``element_type`` is ``"categorical"`` (integer symbols), ``"real"``
    (real vectors, Gaussian emissions) or ``"count"`` (count vectors,
    Poisson emissions). Sequences may differ in length.
    """

    sequences: tuple
    labels: np.ndarray | None = None
    element_type: str = "categorical"
    name: str = "dataset"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.element_type not in ELEMENT_TYPES:
            raise DatasetError(f"unknown element type {self.element_type!r}; expected one of {ELEMENT_TYPES}")
        seqs = tuple(_coerce_sequence(s, self.element_type) for s in self.sequences)
        if not seqs:
            raise DatasetError("dataset must contain at least one sequence")
        for n, s in enumerate(seqs):
            if s.shape[0] < 1:
                raise DatasetError(f"sequence {n} is empty")
        if self.element_type != "categorical":
            dims = {s.shape[1] for s in seqs}
            if len(dims) != 1:
                raise DatasetError(f"inconsistent observation dimensions {sorted(dims)}")
        for s in seqs:
            s.flags.writeable = False
        object.__setattr__(self, "sequences", seqs)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (len(seqs),):
                raise DatasetError(f"expected {len(seqs)} labels, got shape {labels.shape}")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def family(self) -> str:
        return ELEMENT_FAMILY[self.element_type]

    @property
    def dim(self) -> int | None:
        """Observation dimension ``D``; ``None`` for categorical data."""
        if self.element_type == "categorical":
            return None
        return self.sequences[0].shape[1]

    @property
    def num_symbols(self) -> int | None:
        if self.element_type != "categorical":
            return None
        return int(max(s.max() for s in self.sequences)) + 1

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.shape[0] for s in self.sequences])

    @cached_property
    def length_groups(self) -> list:
        """``[(indices, stacked_obs), ...]`` grouping equal-length sequences, ordered by length."""
        lengths = self.lengths
        groups = []
        for length in np.unique(lengths):
            idx = np.flatnonzero(lengths == length)
            groups.append((idx, np.stack([self.sequences[i] for i in idx])))
        return groups

    @cached_property
    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.sequences, axis=0)

    def subset(self, indices) -> "SequenceDataset":
        indices = np.asarray(indices, dtype=int)
        labels = None if self.labels is None else self.labels[indices]
        return SequenceDataset(tuple(self.sequences[i] for i in indices), labels,
                               self.element_type, self.name, dict(self.metadata))

    def standardized(self) -> "SequenceDataset":
        """Per-dimension z-scoring of real-valued data (pooled over all steps)."""
        if self.element_type != "real":
            raise ConfigError("standardization only applies to real-valued data")
        flat = self.concatenated
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        std[std == 0] = 1.0
        seqs = tuple((s - mean) / std for s in self.sequences)
        meta = dict(self.metadata, standardized=True)
        return SequenceDataset(seqs, self.labels, self.element_type, self.name, meta)

    def to_dict(self) -> dict:
        return {
            "schema": DATASET_SCHEMA,
            "layout": "sequences",
            "element_type": self.element_type,
            "name": self.name,
            "metadata": self.metadata,
            "sequences": [s.tolist() for s in self.sequences],
            "labels": None if self.labels is None else self.labels.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SequenceDataset":
        if doc.get("schema") != DATASET_SCHEMA:
            raise DatasetError(f"not a dataset document (schema={doc.get('schema')!r})")
        return cls(tuple(doc["sequences"]), doc.get("labels"), doc["element_type"],
                   doc.get("name", "dataset"), doc.get("metadata") or {})


def save_dataset(dataset: SequenceDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset.to_dict()) + "\n")


def load_dataset(path) -> SequenceDataset:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON: {exc}") from None
    return SequenceDataset.from_dict(doc)


# --------------------------------------------------------------------- CSV

def _parse_value(token, element_type, where):
    text = token.strip()
    try:
        if element_type == "real":
            value = float(text)
            if not np.isfinite(value):
                raise ValueError
            return value
        value = int(text)
    except ValueError:
        raise DatasetError(f"{where}: cannot parse {token!r} as {element_type}") from None
    if value < 0:
        raise DatasetError(f"{where}: {element_type} values must be non-negative, got {value}")
    return value


def _parse_label(token):
    text = token.strip()
    try:
        return int(text)
    except ValueError:
        return text


def _read_header_comment(lines):
    """Settings from a leading ``# mhmm-dataset key=value ...`` line, if any."""
    settings = {}
    if lines and lines[0].startswith("#"):
        for part in lines[0][1:].split():
            if "=" in part:
                key, value = part.split("=", 1)
                settings[key] = value
    return settings


def _resolve_column(label_column, header, ncols, where):
    if label_column is None:
        return None
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None or label_column not in header:
            raise DatasetError(f"{where}: unknown label column {label_column!r}")
        return header.index(label_column)
    idx = int(label_column)
    if not -ncols <= idx < ncols:
        raise DatasetError(f"{where}: unknown label column {label_column!r} ({ncols} columns)")
    return idx % ncols


def load_sequences_csv(path, layout=None, element_type=None, label_column=None,
                       dims=None, header=None, seq_id_column="seq_id", name=None) -> SequenceDataset:
    """Read a sequence corpus from CSV.

    Parameters
    ----------
    path : path-like
    layout : {"row-per-sequence", "long-format"}
        Row layout: one sequence per row, ``dims`` values per time step
        interleaved. Long layout: one time step per row with a header naming
        ``seq_id_column``, the optional label column and the value columns.
    element_type : {"categorical", "real", "count"}
    label_column : int or str, optional
        Column holding the class label (index, or name when a header is present).
    dims : int, optional
        Values per time step in the row layout (default 1).
    header : bool, optional
        Whether the first data line is a header (default: True for long
        layout, False otherwise).

    A first line of the form ``# mhmm-dataset layout=... element_type=...``
    supplies defaults for any argument left as ``None``.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    lines = text.splitlines()
    settings = _read_header_comment(lines)
    layout = layout or settings.get("layout", "row-per-sequence")
    element_type = element_type or settings.get("element_type", "categorical")
    if label_column is None and settings.get("label_column"):
        label_column = settings["label_column"]
    dims = int(dims if dims is not None else settings.get("dims", 1))
    if layout not in LAYOUTS:
        raise DatasetError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if element_type not in ELEMENT_TYPES:
        raise DatasetError(f"unknown element type {element_type!r}")
    if dims < 1:
        raise DatasetError("dims must be >= 1")
    if header is None:
        header = layout == "long-format" or settings.get("header") == "1"

    numbered = [(i + 1, row) for i, row in enumerate(csv.reader(lines))
                if row and not (row[0].startswith("#") and i == 0) and any(t.strip() for t in row)]
    if not numbered:
        raise DatasetError(f"{path}: no data rows")
    names = None
    if header:
        names = [t.strip() for t in numbered[0][1]]
        numbered = numbered[1:]

    if layout == "row-per-sequence":
        sequences, labels = [], []
        for lineno, row in numbered:
            where = f"{path}:{lineno}"
            lab = _resolve_column(label_column, names, len(row), where)
            values = []
            for col, token in enumerate(row):
                if col == lab:
                    labels.append(_parse_label(token))
                else:
                    values.append(_parse_value(token, element_type, f"{where}: column {col + 1}"))
            if not values or len(values) % dims:
                raise DatasetError(f"{where}: {len(values)} values is not a multiple of dims={dims}")
            arr = np.array(values)
            sequences.append(arr.reshape(-1, dims) if (dims > 1 or element_type != "categorical") else arr)
    else:
        if names is None or seq_id_column not in names:
            raise DatasetError(f"{path}: long-format file needs a header with column {seq_id_column!r}")
        id_col = names.index(seq_id_column)
        lab = _resolve_column(label_column, names, len(names), f"{path}:{numbered[0][0] - 1}")
        value_cols = [c for c in range(len(names)) if c not in (id_col, lab)]
        if element_type == "categorical" and len(value_cols) != 1:
            raise DatasetError(f"{path}: categorical long-format data needs exactly one value column")
        groups: dict = {}
        group_labels: dict = {}
        for lineno, row in numbered:
            where = f"{path}:{lineno}"
            if len(row) != len(names):
                raise DatasetError(f"{where}: expected {len(names)} columns, got {len(row)}")
            key = row[id_col].strip()
            step = [_parse_value(row[c], element_type, f"{where}: column {c + 1}") for c in value_cols]
            groups.setdefault(key, []).append(step)
            if lab is not None:
                value = _parse_label(row[lab])
                if group_labels.setdefault(key, value) != value:
                    raise DatasetError(f"{where}: conflicting labels for sequence {key!r}")
        sequences = [np.array(v) for v in groups.values()]
        labels = [group_labels[k] for k in groups] if lab is not None else []
    return SequenceDataset(tuple(sequences), labels if label_column is not None else None,
                           element_type, name or path.stem)


def write_sequences_csv(dataset: SequenceDataset, path, layout="row-per-sequence") -> None:
    """Write ``dataset`` in a CSV layout that :func:`load_sequences_csv` reads back."""
    if layout not in LAYOUTS:
        raise DatasetError(f"unknown layout {layout!r}")
    has_labels = dataset.labels is not None
    dims = dataset.dim or 1
    fmt = repr if dataset.element_type == "real" else str
    with open(path, "w", newline="") as fh:
        header = f"# mhmm-dataset layout={layout} element_type={dataset.element_type} dims={dims}"
        if has_labels:
            header += " label_column=label" if layout == "long-format" else " label_column=0"
        fh.write(header + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        if layout == "row-per-sequence":
            for n, seq in enumerate(dataset.sequences):
                row = [str(dataset.labels[n])] if has_labels else []
                row += [fmt(v.item()) for v in seq.reshape(-1)]
                writer.writerow(row)
        else:
            cols = ["seq_id"] + (["label"] if has_labels else []) + [f"v{d}" for d in range(dims)]
            writer.writerow(cols)
            for n, seq in enumerate(dataset.sequences):
                for step in seq.reshape(seq.shape[0], -1):
                    row = [str(n)] + ([str(dataset.labels[n])] if has_labels else [])
                    writer.writerow(row + [fmt(v.item()) for v in step])


# ------------------------------------------------------------------ Libras

def load_libras(path, digit_pair, standardize=False) -> SequenceDataset:
    """Load two classes of the UCI Libras movement corpus.

    Each row holds 45 interleaved ``(x, y)`` coordinates followed by the class
    id (1-15); rows become length-45 sequences of 2-D real vectors.
    """
    a, b = (int(c) for c in digit_pair)
    if a == b:
        raise ConfigError(f"digit pair classes must differ, got ({a}, {b})")
    for c in (a, b):
        if c not in LIBRAS_CLASSES:
            raise ConfigError(f"Libras classes are 1..15, got {c}")
    sequences, labels = [], []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    ncols = 2 * LIBRAS_STEPS + 1
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith(("@", "#")):
            continue
        tokens = line.split(",")
        if len(tokens) != ncols:
            raise DatasetError(f"{path}:{lineno}: expected {ncols} columns, got {len(tokens)}")
        label = _parse_value(tokens[-1], "count", f"{path}:{lineno}: column {ncols}")
        if label not in (a, b):
            continue
        coords = [_parse_value(t, "real", f"{path}:{lineno}: column {i + 1}")
                  for i, t in enumerate(tokens[:-1])]
        sequences.append(np.array(coords).reshape(LIBRAS_STEPS, 2))
        labels.append(label)
    if not sequences:
        raise DatasetError(f"{path}: no rows of classes {a} and {b}")
    ds = SequenceDataset(tuple(sequences), labels, "real", f"libras {a} vs {b}",
                         {"source": "UCI Libras movement", "digit_pair": [a, b]})
    return ds.standardized() if standardize else ds


# ----------------------------------------------------------------- sampler

def sample_mixture(model, n_per_component: int, length: int, seed) -> SequenceDataset:
    """Draw ``n_per_component`` sequences from each component of ``model``.

    Labels are the generating component index. Sequences are ordered by
    component.
    """
    from .hmm import sample_sequence

    if n_per_component < 1 or length < 1:
        raise ConfigError("n_per_component and length must be >= 1")
    element_type = {v: k for k, v in ELEMENT_FAMILY.items()}[model.family]
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=(model.num_components, n_per_component))
    sequences, labels = [], []
    for k, comp in enumerate(model.components):
        for i in range(n_per_component):
            obs, _ = sample_sequence(comp, length, int(seeds[k, i]))
            sequences.append(obs)
            labels.append(k)
    return SequenceDataset(tuple(sequences), labels, element_type, "synthetic mixture",
                           {"seed": int(seed) if np.isscalar(seed) else None})


# ----------------------------------------------------------------- presets

def separated_generator(self_prob: float = 0.96, emit_prob: float = 0.9):
    """Two 3-state categorical HMMs with near-orthogonal dynamics.

    Component 0 mostly stays in its state, component 1 mostly cycles
    ``0 -> 1 -> 2 -> 0``; state ``j`` emits symbol ``j`` with probability
    ``emit_prob`` in both components.
    """
    from .emissions import Categorical
    from .hmm import HmmParams
    from .mixture import MixtureModel

    J = 3
    off = (1.0 - self_prob) / (J - 1)
    stay = np.full((J, J), off) + (self_prob - off) * np.eye(J)
    cycle = np.roll(stay, 1, axis=1)
    emit = np.full((J, J), (1.0 - emit_prob) / (J - 1)) + (emit_prob - (1.0 - emit_prob) / (J - 1)) * np.eye(J)
    start = np.full(J, 1.0 / J)
    comps = (HmmParams(start, stay, Categorical(emit)), HmmParams(start, cycle, Categorical(emit)))
    return MixtureModel(comps, np.full(2, 0.5))


def count_generator(num_states: int = 3, dim: int = 1, base_rate: float = 2.0, self_prob: float = 0.95):
    """Two Poisson-emission HMMs mimicking copy-number-like count sequences.

    State ``j`` emits counts with rate ``base_rate * (j + 1)``. Component 0 is
    sticky, component 1 moves up one state per step with probability
    ``1 - self_prob``.
    """
    from .emissions import Poisson
    from .hmm import HmmParams
    from .mixture import MixtureModel

    J = num_states
    rates = np.repeat(base_rate * np.arange(1, J + 1)[:, None], dim, axis=1).astype(float)
    sticky = np.full((J, J), (1 - self_prob) / max(J - 1, 1)) + 0.0
    np.fill_diagonal(sticky, self_prob if J > 1 else 1.0)
    drift = np.roll(np.eye(J), 1, axis=1) * (1 - self_prob) + np.eye(J) * self_prob if J > 1 else np.eye(1)
    start = np.full(J, 1.0 / J)
    comps = (HmmParams(start, sticky, Poisson(rates)), HmmParams(start, drift, Poisson(rates)))
    return MixtureModel(comps, np.full(2, 0.5))


PRESETS = {"separated": separated_generator, "counts": count_generator}
