"""Functional datasets: synthetic GP mixtures, CSV input/output, smoothing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, EmptyDatasetError, ParseError
from .kernels import KernelParams, check_grid, sample_gp


@dataclass(frozen=True)
class Dataset:
    """N curves observed on a shared 1-D grid.

    Attributes
    ----------
    grid : ndarray, shape (p,)
    curves : ndarray, shape (N, p)
    truth : ndarray of int, shape (N,), optional
        1-based cluster labels, when known.
    names : tuple of str
        One name per curve.
    grid_name : str
        Header of the grid column when written to CSV.
    """

    grid: np.ndarray
    curves: np.ndarray
    truth: np.ndarray | None = None
    names: tuple = ()
    grid_name: str = "x"

    def __post_init__(self):
        grid = check_grid(self.grid, require_sorted=True)
        curves = np.atleast_2d(np.asarray(self.curves, dtype=float))
        if curves.shape[1] != grid.size:
            raise DomainError(f"curves have length {curves.shape[1]}, grid has {grid.size} points")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "curves", curves)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.int64)
            if truth.shape != (curves.shape[0],):
                raise DomainError("truth must have one label per curve")
            object.__setattr__(self, "truth", truth)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"y{i + 1}" for i in range(curves.shape[0])))
        elif len(self.names) != curves.shape[0]:
            raise DomainError("names must have one entry per curve")
        else:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def N(self) -> int:
        return self.curves.shape[0]

    @property
    def p(self) -> int:
        return self.grid.size


@dataclass(frozen=True)
class ScenarioSpec:
    """Recipe for a synthetic GP mixture on a uniform grid over ``domain``."""

    components: tuple
    counts: tuple
    p: int = 300
    seed: int = 0
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        if len(self.components) != len(self.counts) or not self.components:
            raise DomainError("need one curve count per component")
        if any(int(c) < 1 for c in self.counts):
            raise DomainError("curve counts must be positive")
        if int(self.p) < 2:
            raise DomainError("grid length p must be at least 2")


# (l, sigma) per cluster for the two simulation settings
SCENARIOS = {
    1: ((0.2, 0.2), (0.5, 0.3)),  # hard: clusters overlap visually
    2: ((0.2, 0.5), (0.5, 0.2)),  # easy
}


def scenario(number: int, p: int = 300, n_per_cluster: int = 10, seed: int = 0, family="sqexp") -> ScenarioSpec:
    """Two-cluster simulation setting ``number`` (1 = hard, 2 = easy)."""
    if number not in SCENARIOS:
        raise DomainError(f"unknown scenario {number}; expected one of {sorted(SCENARIOS)}")
    comps = tuple(KernelParams(family, l, s) for l, s in SCENARIOS[number])
    return ScenarioSpec(comps, (n_per_cluster,) * len(comps), p=p, seed=seed)


def uniform_grid(p: int, domain=(0.0, 1.0)) -> np.ndarray:
    return np.linspace(domain[0], domain[1], int(p))


def simulate_mixture(spec: ScenarioSpec) -> Dataset:
    """Draw every curve of a scenario; curve ``j`` uses the j-th derived seed.

    Seeds come from ``numpy.random.SeedSequence(spec.seed)``, so the whole
    dataset is a deterministic function of the scenario.
    """
    grid = uniform_grid(spec.p, spec.domain)
    total = int(sum(spec.counts))
    seeds = np.random.SeedSequence(spec.seed).generate_state(total, dtype=np.uint64)
    curves = np.empty((total, grid.size))
    truth = np.empty(total, dtype=np.int64)
    j = 0
    for g, (params, count) in enumerate(zip(spec.components, spec.counts)):
        for _ in range(int(count)):
            curves[j] = sample_gp(params, grid, int(seeds[j]))
            truth[j] = g + 1
            j += 1
    return Dataset(grid, curves, truth)


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric cell {text!r}", row=row, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {text!r}", row=row, column=column)
    return value


def load_csv(path) -> Dataset:
    """Read a dataset stored as grid column followed by one column per curve.

    A header row is required; its entries after the first become curve
    names. Rows and columns in error messages are 1-based file positions.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyDatasetError("file is empty")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ParseError("need a grid column and at least one curve column", row=1)
    if len(rows) == 1:
        raise EmptyDatasetError("file has a header but no data rows")
    width = len(header)
    data = np.empty((len(rows) - 1, width))
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", row=r)
        for c, cell in enumerate(row):
            data[r - 2, c] = _parse_float(cell.strip(), r, c + 1)
    grid = data[:, 0]
    dup = np.flatnonzero(np.diff(np.sort(grid)) == 0)
    if dup.size:
        value = np.sort(grid)[dup[0]]
        row = int(np.flatnonzero(grid == value)[1]) + 2
        raise ParseError(f"duplicate grid value {value!r}", row=row, column=1)
    if np.any(np.diff(grid) < 0):
        order = np.argsort(grid)
        data = data[order]
        grid = data[:, 0]
    return Dataset(grid, data[:, 1:].T, names=tuple(header[1:]), grid_name=header[0])


def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(ds: Dataset) -> str:
    """Serialize with shortest round-trip float formatting (<= 17 digits)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([ds.grid_name, *ds.names])
    for j in range(ds.p):
        w.writerow([_fmt(ds.grid[j]), *(_fmt(v) for v in ds.curves[:, j])])
    return buf.getvalue()


def write_csv(ds: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8")


def write_labels(labels, path, names=None) -> None:
    """Write a two-column ``curve,label`` CSV."""
    labels = np.asarray(labels, dtype=np.int64)
    names = names or [f"y{i + 1}" for i in range(labels.size)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["curve", "label"])
    for name, lab in zip(names, labels):
        w.writerow([name, int(lab)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_labels(path) -> np.ndarray:
    """Labels from the last column of a CSV with a header row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise EmptyDatasetError("label file has no data rows")
    out = []
    for r, row in enumerate(rows[1:], start=2):
        try:
            out.append(int(row[-1]))
        except ValueError:
            raise ParseError(f"non-integer label {row[-1]!r}", row=r, column=len(row)) from None
    return np.asarray(out, dtype=np.int64)


def moving_average(ds: Dataset, window: int) -> Dataset:
    """Centered moving average without padding.

    The output keeps ``p - window + 1`` points; the grid is trimmed by
    ``window // 2`` at each end.
    """
    window = int(window)
    if window < 1 or window % 2 == 0 or window > ds.p:
        raise DomainError(f"window must be odd and in [1, {ds.p}], got {window}")
    if window == 1:
        return ds
    smoothed = np.lib.stride_tricks.sliding_window_view(ds.curves, window, axis=1).mean(axis=-1)
    h = window // 2
    return replace(ds, grid=ds.grid[h : ds.p - h], curves=smoothed)
