"""CSV ingestion, labelled-set handling, and JSON report serialization.

CSV files are UTF-8, comma-delimited, '.' decimal point, with optional
comment lines starting with '#'. Labelled files carry a 1-based integer
class label in the last column; labels must form a contiguous range 1..C.
JSON reports render every float with at most 9 significant digits, so a
report written twice produces identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .info_leakage import LeakageEstimate
from .tai_pipeline import TaiReport


class ParseError(ValueError):
    """Malformed CSV content; the message carries path and line number."""


class SchemaError(ValueError):
    """Structurally valid file whose content violates the expected schema."""


@dataclass
class LabeledDataset:
    """Per-class sample matrices sharing one feature dimension."""

    classes: list[np.ndarray]

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def dim(self) -> int:
        return self.classes[0].shape[1]

    @property
    def total(self) -> int:
        return sum(len(m) for m in self.classes)


def load_matrix_csv(path) -> np.ndarray:
    """Parse a rectangular numeric CSV into an (N, p) array."""
    rows: list[list[float]] = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            try:
                values = [float(cell) for cell in cells]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric cell") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ParseError(
                    f"{path}:{lineno}: expected {width} columns, got {len(values)}"
                )
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def save_matrix_csv(path, matrix: np.ndarray) -> None:
    """Write rows with shortest-round-trip float formatting."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_labeled_csv(path, return_indices: bool = False):
    """Group rows of a labelled CSV by the integer label in the last column.

    Labels must be integers forming the contiguous range 1..C. With
    ``return_indices`` the original row indices of every class are returned
    alongside, so row-aligned side files can be permuted consistently.
    """
    data = load_matrix_csv(path)
    if data.shape[1] < 2:
        raise SchemaError(f"{path}: need at least one feature column plus a label")
    features = data[:, :-1]
    raw_labels = data[:, -1]
    labels = np.round(raw_labels).astype(int)
    if np.any(np.abs(raw_labels - labels) > 1e-9):
        raise SchemaError(f"{path}: labels must be integers")
    if labels.min() < 1:
        raise SchemaError(f"{path}: labels must be >= 1, found {labels.min()}")
    present = np.unique(labels)
    expected = np.arange(1, labels.max() + 1)
    if not np.array_equal(present, expected):
        raise SchemaError(
            f"{path}: labels must form a contiguous range 1..C, found {present.tolist()}"
        )
    classes = []
    indices = []
    for c in expected:
        mask = labels == c
        classes.append(features[mask])
        indices.append(np.flatnonzero(mask))
    dataset = LabeledDataset(classes)
    if return_indices:
        return dataset, indices
    return dataset


def load_label_column_csv(path) -> np.ndarray:
    """Single-column CSV of integer labels."""
    data = load_matrix_csv(path)
    if data.shape[1] != 1:
        raise SchemaError(f"{path}: expected a single label column")
    labels = np.round(data[:, 0]).astype(int)
    if np.any(np.abs(data[:, 0] - labels) > 1e-9):
        raise SchemaError(f"{path}: labels must be integers")
    return labels


def write_labels_csv(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(f"{int(label)}\n")


def _json_number(value):
    """Round to 9 significant digits; infinities become strings."""
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return float(f"{v:.9g}")


def report_to_dict(report) -> dict:
    """Stable-key dictionary form of a leakage estimate or pipeline report."""
    if isinstance(report, LeakageEstimate):
        return {
            "leakage_nats": _json_number(report.value),
            "seed": int(report.seed),
            "n_samples": int(report.n_samples),
            "q": int(report.model.q),
            "m": int(report.model.m),
        }
    if isinstance(report, TaiReport):
        cfg = report.config
        return {
            "privacy_leakage_nats": _json_number(report.privacy_leakage),
            "interpretability_nats": _json_number(report.interpretability),
            "transferability_nats": _json_number(report.transferability),
            "accuracy_source": _json_number(report.accuracy_source),
            "accuracy_multitask": _json_number(report.accuracy_multitask),
            "epsilon": _json_number(cfg.dp.epsilon),
            "delta": _json_number(cfg.dp.delta),
            "d": _json_number(cfg.dp.d),
            "seed": int(report.seed),
            "config": {
                "source_layers": cfg.source_layers,
                "source_r_max": _json_number(cfg.source_r_max),
                "source_subspace_dim": cfg.source_subspace_dim,
                "target_layers": cfg.target_layers,
                "target_r_max": _json_number(cfg.target_r_max),
                "initial_target_r_max": _json_number(cfg.initial_target_r_max),
                "it_max": cfg.it_max,
                "target_subspace_seq": (
                    list(cfg.target_subspace_seq)
                    if cfg.target_subspace_seq is not None
                    else None
                ),
                "alignment_dim": cfg.alignment_dim,
                "measure_sample_cap": cfg.measure_sample_cap,
            },
        }
    raise TypeError(f"cannot serialize {type(report).__name__}")


def dumps_report(report) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def write_report_json(report, path) -> None:
    """Serialize a report; identical reports produce identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_report(report))
