"""The N x 12 feature matrix, feature-subset masks and the feature CSV format."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import KneeTexError, ParseError
from .texture import FEATURE_NAMES

N_FEATURES = len(FEATURE_NAMES)
FULL_MASK = (1 << N_FEATURES) - 1
CSV_HEADER = ("subject_id", "label") + FEATURE_NAMES


@dataclass(frozen=True)
class FeatureMatrix:
    subject_ids: Tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise KneeTexError(f"expected {len(self.feature_names)} feature columns, got {X.shape}")
        if labels.shape != (X.shape[0],) or len(self.subject_ids) != X.shape[0]:
            raise KneeTexError("subject_ids, X and labels must have the same length")
        if not np.isin(labels, (0, 1)).all():
            raise KneeTexError("labels must be 0 (control) or 1 (case)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))

    @property
    def n_subjects(self) -> int:
        return self.X.shape[0]

    def columns(self, mask: int) -> np.ndarray:
        return np.ascontiguousarray(self.X[:, mask_indices(mask)])


def mask_indices(mask: int) -> List[int]:
    if not 0 < mask <= FULL_MASK:
        raise KneeTexError(f"mask must be in 1..{FULL_MASK}, got {mask}")
    return [j for j in range(N_FEATURES) if mask >> j & 1]


def mask_features(mask: int, names: Sequence[str] = FEATURE_NAMES) -> List[str]:
    return [names[j] for j in mask_indices(mask)]


def mask_hex(mask: int) -> str:
    return f"{mask:03x}"


def parse_mask(text: str) -> int:
    """Accept ``0x...``/bare hex or a ``+``/``,`` separated list of feature names."""
    text = text.strip()
    if any(name in text for name in FEATURE_NAMES):
        mask = 0
        for tok in text.replace(",", "+").split("+"):
            tok = tok.strip()
            if tok not in FEATURE_NAMES:
                raise KneeTexError(f"unknown feature {tok!r}")
            mask |= 1 << FEATURE_NAMES.index(tok)
    else:
        try:
            mask = int(text, 16)
        except ValueError:
            raise KneeTexError(f"cannot parse feature mask {text!r}") from None
    mask_indices(mask)
    return mask


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def format_float(x: float) -> str:
    return f"{x:.9g}"


def write_features_csv(fh, matrix: FeatureMatrix, header_lines: Sequence[str] = ()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for sid, lab, row in zip(matrix.subject_ids, matrix.labels, matrix.X):
        w.writerow([sid, int(lab)] + [format_float(v) for v in row])


def _data_lines(fh):
    for lineno, line in enumerate(fh, start=1):
        if line.startswith("#") or not line.strip():
            continue
        yield lineno, line


def read_features_csv(fh) -> FeatureMatrix:
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, newline="") as f:
            return read_features_csv(f)
    lines = list(_data_lines(fh))
    if not lines:
        raise ParseError("feature CSV is empty")
    reader = csv.reader(io.StringIO("".join(l for _, l in lines)))
    header = next(reader)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ParseError(f"line {lines[0][0]}: header must be {','.join(CSV_HEADER)}")
    ids, labels, rows = [], [], []
    for (lineno, _), rec in zip(lines[1:], reader):
        if len(rec) != len(CSV_HEADER):
            raise ParseError(f"line {lineno}: expected {len(CSV_HEADER)} columns, got {len(rec)}")
        ids.append(rec[0])
        try:
            labels.append(int(rec[1]))
        except ValueError:
            raise ParseError(f"line {lineno}, column label: {rec[1]!r} is not 0 or 1") from None
        vals = []
        for col, v in zip(CSV_HEADER[2:], rec[2:]):
            try:
                vals.append(float(v))
            except ValueError:
                raise ParseError(f"line {lineno}, column {col}: {v!r} is not a number") from None
        rows.append(vals)
    if not rows:
        raise ParseError("feature CSV has no data rows")
    try:
        return FeatureMatrix(tuple(ids), np.array(rows), np.array(labels))
    except KneeTexError as exc:
        raise ParseError(str(exc)) from None
