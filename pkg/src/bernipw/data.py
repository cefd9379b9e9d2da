"""Datasets with missing-at-random responses: schema validation, CSV
ingestion, monotone rescaling to [0, 1], and factor crossing."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class SchemaError(ValueError):
    """The input data violates the missing-data schema."""


@dataclass(frozen=True)
class Sample:
    """One unit: response ``y`` in [0, 1] or ``None`` when unobserved,
    covariate cell code ``x``, and observation flag ``delta``."""

    y: float | None
    x: int
    delta: int

    def __post_init__(self):
        if self.delta not in (0, 1):
            raise SchemaError(f"delta must be 0 or 1, got {self.delta!r}")
        if (self.y is None) != (self.delta == 0):
            raise SchemaError(
                f"y must be present exactly when delta=1 "
                f"(got y={self.y!r}, delta={self.delta})"
            )
        if self.y is not None and not 0.0 <= self.y <= 1.0:
            raise SchemaError(f"observed y must lie in [0, 1], got {self.y}")
        if self.x < 0:
            raise SchemaError(f"covariate code must be nonnegative, got {self.x}")


@dataclass(frozen=True)
class RescaleSpec:
    """Clamped affine map from original units onto [0, 1]: caps ``a < b``."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise SchemaError(f"rescale caps must satisfy a < b, got a={self.a}, b={self.b}")

    def apply(self, value: float) -> float:
        return min(max((value - self.a) / (self.b - self.a), 0.0), 1.0)


def rescale(value: float, spec: RescaleSpec) -> float:
    """min{max{(value − a)/(b − a), 0}, 1}; monotone, clamping absorbs out-of-range inputs."""
    return spec.apply(value)


class Dataset:
    """An immutable ordered sample of (y, x, delta) units.

    Backed by numpy arrays (``y`` holds NaN where unobserved) so the
    estimators can work without materializing row objects; ``samples``
    is available as a lazy tuple view.
    """

    def __init__(self, y, x, delta, cell_labels: Mapping[int, str] | None = None):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=np.intp)
        delta = np.asarray(delta, dtype=np.intp)
        if not (y.ndim == x.ndim == delta.ndim == 1) or not len(y) == len(x) == len(delta):
            raise SchemaError("y, x, delta must be 1-d arrays of equal length")
        if len(y) < 1:
            raise SchemaError("a dataset needs at least one sample")
        if not np.isin(delta, (0, 1)).all():
            raise SchemaError("delta entries must be 0 or 1")
        missing = np.isnan(y)
        if not np.array_equal(missing, delta == 0):
            raise SchemaError("y must be present exactly where delta=1")
        observed = y[~missing]
        if observed.size and (observed.min() < 0.0 or observed.max() > 1.0):
            raise SchemaError("observed y values must lie in [0, 1]")
        if x.size and x.min() < 0:
            raise SchemaError("covariate codes must be nonnegative")
        for arr in (y, x, delta):
            arr.flags.writeable = False
        self._y = y
        self._x = x
        self._delta = delta
        codes = np.unique(x)
        self._cells = frozenset(int(c) for c in codes)
        if cell_labels is None:
            cell_labels = {int(c): str(int(c)) for c in codes}
        else:
            cell_labels = {int(c): str(cell_labels[int(c)]) for c in codes}
        self._cell_labels = cell_labels
        self._samples: tuple[Sample, ...] | None = None

    @classmethod
    def from_samples(cls, samples: Iterable[Sample],
                     cell_labels: Mapping[int, str] | None = None) -> "Dataset":
        rows = tuple(samples)
        y = [np.nan if s.y is None else s.y for s in rows]
        return cls(y, [s.x for s in rows], [s.delta for s in rows], cell_labels)

    @property
    def n(self) -> int:
        return len(self._y)

    @property
    def cells(self) -> frozenset[int]:
        return self._cells

    @property
    def cell_labels(self) -> Mapping[int, str]:
        return dict(self._cell_labels)

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def x(self) -> np.ndarray:
        return self._x

    @property
    def delta(self) -> np.ndarray:
        return self._delta

    @property
    def samples(self) -> tuple[Sample, ...]:
        if self._samples is None:
            self._samples = tuple(
                Sample(None if d == 0 else float(v), int(c), int(d))
                for v, c, d in zip(self._y, self._x, self._delta)
            )
        return self._samples

    @property
    def observed_rate(self) -> float:
        return float(self._delta.mean())

    def label_of(self, code: int) -> str:
        return self._cell_labels[code]


def ingest_csv(path, y_col: str = "y", x_col: str = "x", delta_col: str = "delta",
               rescale_spec: RescaleSpec | None = None) -> Dataset:
    """Read a dataset from a CSV file with a header row.

    ``delta`` must be 0 or 1 and ``y`` must be empty exactly when delta=0.
    Rows with a missing covariate are rejected.  When ``rescale_spec`` is
    given it is applied to y before the [0, 1] range check.  Row order is
    preserved; covariate labels are mapped to dense codes in order of
    first appearance and retained for reporting.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in (y_col, x_col, delta_col):
            if col not in header:
                raise SchemaError(f"missing column {col!r} in {path} (header: {header})")
        ys: list[float] = []
        xs: list[int] = []
        deltas: list[int] = []
        code_of: dict[str, int] = {}
        labels: dict[int, str] = {}
        for lineno, row in enumerate(reader, start=2):
            raw_delta = (row[delta_col] or "").strip()
            if raw_delta not in ("0", "1"):
                raise SchemaError(f"{path}:{lineno}: delta must be 0 or 1, got {raw_delta!r}")
            delta = int(raw_delta)
            raw_y = (row[y_col] or "").strip()
            if delta == 0:
                if raw_y:
                    raise SchemaError(
                        f"{path}:{lineno}: y={raw_y!r} present although delta=0"
                    )
                yval = np.nan
            else:
                if not raw_y:
                    raise SchemaError(f"{path}:{lineno}: y missing although delta=1")
                try:
                    yval = float(raw_y)
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: y={raw_y!r} is not a number") from None
                if rescale_spec is not None:
                    yval = rescale_spec.apply(yval)
                if not 0.0 <= yval <= 1.0:
                    raise SchemaError(
                        f"{path}:{lineno}: y={yval} outside [0, 1] and no rescale spec given"
                    )
            raw_x = (row[x_col] or "").strip()
            if not raw_x:
                raise SchemaError(f"{path}:{lineno}: missing covariate value")
            if raw_x not in code_of:
                code = len(code_of)
                code_of[raw_x] = code
                labels[code] = raw_x
            ys.append(yval)
            xs.append(code_of[raw_x])
            deltas.append(delta)
    if not ys:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(ys, xs, deltas, labels)


def write_csv(dataset: Dataset, path, y_col: str = "y", x_col: str = "x",
              delta_col: str = "delta") -> None:
    """Serialize a dataset back to CSV; inverse of :func:`ingest_csv` on
    canonical files (floats use shortest round-trip formatting)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([y_col, x_col, delta_col])
        for v, c, d in zip(dataset.y, dataset.x, dataset.delta):
            ytxt = "" if d == 0 else repr(float(v))
            writer.writerow([ytxt, dataset.label_of(int(c)), int(d)])


def cross_factor(codes: Sequence[int], dims: Sequence[int]) -> int:
    """Encode a tuple of per-dimension category codes into a single cell code.

    Row-major over the declared category orders, so the encoding is a
    bijection from the category grid onto 0..(prod(dims)−1) and stable
    across runs.
    """
    if len(codes) != len(dims):
        raise SchemaError(
            f"got {len(codes)} codes for {len(dims)} declared dimensions"
        )
    cell = 0
    for code, dim in zip(codes, dims):
        if dim < 1:
            raise SchemaError(f"category dimensions must be >= 1, got {dim}")
        if not 0 <= code < dim:
            raise SchemaError(f"unseen category code {code} for dimension of size {dim}")
        cell = cell * dim + code
    return cell
