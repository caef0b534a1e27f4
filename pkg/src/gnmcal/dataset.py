"""Physical and computer-model data, synthetic benchmarks and CSV I/O."""
import csv
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .rng import stream

PHYSICAL_HEADER = ["x", "y"]
MODEL_HEADER = ["x", "theta", "y"]


class CSVFormatError(ValueError):
    """Malformed or invalid data file; carries the 1-based line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}: line {line}: {message}")


class PhysicalPoint(NamedTuple):
    x: float
    y: float


class ModelPoint(NamedTuple):
    x: float
    theta: float
    y: float


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PhysicalDataset:
    """Observed ``(x, y)`` pairs with strictly increasing ``x``.

    Unsorted input is sorted on construction; a repeated ``x`` is rejected.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if x.shape != y.shape:
            raise ValueError("x and y must have the same length")
        if x.size < 2:
            raise ValueError(f"a physical dataset needs at least 2 points, got {x.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("physical data must be finite")
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
        dup = np.flatnonzero(np.diff(x) == 0)
        if dup.size:
            raise ValueError(f"duplicate physical input x={x[dup[0]]!r}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    def __len__(self):
        return self.x.size

    def __eq__(self, other):
        if not isinstance(other, PhysicalDataset):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    @property
    def points(self):
        return [PhysicalPoint(float(a), float(b)) for a, b in zip(self.x, self.y)]

    def subset(self, index):
        index = np.asarray(index)
        return PhysicalDataset(self.x[index], self.y[index])


@dataclass(frozen=True, eq=False)
class ModelDataset:
    """Computer-model triples ``(x, theta, y)`` sorted by ``x``.

    Ties in ``x`` are allowed; the sort is stable so tied rows keep their
    input order.
    """

    x: np.ndarray
    theta: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=np.float64).ravel() for c in (self.x, self.theta, self.y)]
        if not (cols[0].shape == cols[1].shape == cols[2].shape):
            raise ValueError("x, theta and y must have the same length")
        if cols[0].size < 1:
            raise ValueError("a model dataset needs at least one point")
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise ValueError("model data must be finite")
        order = np.argsort(cols[0], kind="stable")
        for name, c in zip(("x", "theta", "y"), cols):
            object.__setattr__(self, name, _frozen(c[order]))

    def __len__(self):
        return self.x.size

    def __eq__(self, other):
        if not isinstance(other, ModelDataset):
            return NotImplemented
        return (np.array_equal(self.x, other.x) and np.array_equal(self.theta, other.theta)
                and np.array_equal(self.y, other.y))

    @property
    def points(self):
        return [ModelPoint(float(a), float(b), float(c))
                for a, b, c in zip(self.x, self.theta, self.y)]


@dataclass(frozen=True)
class SyntheticTruth:
    """Closed-form benchmark: physical curve, model surface and true calibration."""

    name: str
    physical_response: Callable
    model_response: Callable
    true_theta: Callable
    x_range: tuple
    theta_range: tuple


def _sd1_physical(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(x / 10.0) * np.sin(x)


def _sd1_model(x, theta):
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta == 0):
        raise ValueError("SD1 model response is undefined at theta = 0")
    return np.exp(x / 10.0) * np.sin(x) * x / (2.0 * theta)


def _sd1_theta(x):
    return 0.5 * np.asarray(x, dtype=np.float64)


def _sd2_physical(x):
    x = np.asarray(x, dtype=np.float64)
    return np.cos(2.0 * x) * np.sin(x / 2.0)


def _sd2_model(x, theta):
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    d = (x - 2.0) ** 2 + 1.0
    return (np.cos(2.0 * x) * np.sin(x / 2.0)
            * np.sin(np.pi * theta / (2.0 * d))
            * np.cos(2.0 * np.pi * theta / d)
            * np.exp(theta / (2.0 * d) - 0.5))


def _sd2_theta(x):
    x = np.asarray(x, dtype=np.float64)
    return (x - 2.0) ** 2 + 1.0


def sd1_truth():
    """Exponentially modulated sine with linear calibration ``theta = x / 2``."""
    return SyntheticTruth("sd1", _sd1_physical, _sd1_model, _sd1_theta,
                          (9 * math.pi / 8, 5 * math.pi / 2), (math.pi / 4, 3 * math.pi / 2))


def sd2_truth():
    """Modulated cosine with quadratic calibration ``theta = (x - 2)^2 + 1``."""
    return SyntheticTruth("sd2", _sd2_physical, _sd2_model, _sd2_theta,
                          (3 * math.pi / 8, math.pi), (math.pi / 4, math.pi))


BUILTIN = {"sd1": sd1_truth, "sd2": sd2_truth}


def get_truth(name):
    try:
        return BUILTIN[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; expected one of {sorted(BUILTIN)}") from None


def generate_synthetic(truth, m, n, x_range=None, theta_range=None, seed=0):
    """Sample a physical/model dataset pair from a closed-form benchmark.

    Physical inputs are uniform on ``x_range``. Each physical input also gets
    ``n // (2 m)`` model points sharing its exact ``x`` (with uniform
    ``theta``), so every physical input is covered by the model design; the
    remaining model points are uniform on the rectangle.

    Returns
    -------
    (PhysicalDataset, ModelDataset)
    """
    m, n = int(m), int(n)
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    if n < m:
        raise ValueError(f"n must be >= m, got n={n}, m={m}")
    x_lo, x_hi = truth.x_range if x_range is None else x_range
    t_lo, t_hi = truth.theta_range if theta_range is None else theta_range
    if not (x_hi > x_lo and t_hi > t_lo):
        raise ValueError("sampling ranges must be non-degenerate")
    if truth.name == "sd1" and t_lo <= 1e-6:
        raise ValueError("SD1 theta range must be bounded away from 0 (lower bound > 1e-6)")

    gen_x = stream(seed, 1)
    xp = np.sort(gen_x.uniform(x_lo, x_hi, m))
    while np.any(np.diff(xp) == 0):
        dup = np.flatnonzero(np.diff(xp) == 0)[0] + 1
        xp[dup] = gen_x.uniform(x_lo, x_hi, 1)[0]
        xp = np.sort(xp)
    yp = truth.physical_response(xp)

    per_column = n // (2 * m)
    n_fill = n - per_column * m
    col_x = np.repeat(xp, per_column)
    col_t = stream(seed, 2).uniform(t_lo, t_hi, col_x.size)
    fill_x = stream(seed, 3).uniform(x_lo, x_hi, n_fill)
    fill_t = stream(seed, 4).uniform(t_lo, t_hi, n_fill)
    xc = np.concatenate([col_x, fill_x])
    tc = np.concatenate([col_t, fill_t])
    yc = truth.model_response(xc, tc)
    return PhysicalDataset(xp, yp), ModelDataset(xc, tc, yc)


def _fmt(v):
    return format(float(v), ".17g")


def _read_rows(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise CSVFormatError(path, 1, "empty file, expected header " + ",".join(header)) from None
        if [h.strip() for h in first] != header:
            raise CSVFormatError(path, 1, f"expected header {','.join(header)!r}, got {','.join(first)!r}")
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CSVFormatError(path, line, f"expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise CSVFormatError(path, line, f"field {name!r} is not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise CSVFormatError(path, line, f"field {name!r} is not finite: {cell!r}")
                vals.append(v)
            rows.append((line, vals))
    return rows


def load_physical(path):
    rows = _read_rows(path, PHYSICAL_HEADER)
    if len(rows) < 2:
        raise CSVFormatError(path, len(rows) + 2, "a physical dataset needs at least 2 rows")
    seen = {}
    for line, (x, _) in rows:
        if x in seen:
            raise CSVFormatError(path, line, f"duplicate physical x={x!r} (first on line {seen[x]})")
        seen[x] = line
    arr = np.array([v for _, v in rows])
    return PhysicalDataset(arr[:, 0], arr[:, 1])


def load_model(path):
    rows = _read_rows(path, MODEL_HEADER)
    if not rows:
        raise CSVFormatError(path, 2, "a model dataset needs at least one row")
    arr = np.array([v for _, v in rows])
    return ModelDataset(arr[:, 0], arr[:, 1], arr[:, 2])


def write_csv(dataset, path):
    """Write a physical or model dataset with 17 significant digits."""
    if isinstance(dataset, PhysicalDataset):
        header, cols = PHYSICAL_HEADER, (dataset.x, dataset.y)
    elif isinstance(dataset, ModelDataset):
        header, cols = MODEL_HEADER, (dataset.x, dataset.theta, dataset.y)
    else:
        raise TypeError(f"cannot write {type(dataset).__name__}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def plant_true_curve(physical, model, truth):
    """Add the exact true-curve points ``(x_j, f(x_j), y_j)`` to a model dataset.

    Returns
    -------
    (ModelDataset, numpy.ndarray)
        The augmented dataset and, for each physical input, the index of its
        planted point in that dataset.
    """
    theta = np.asarray(truth.true_theta(physical.x), dtype=np.float64)
    aug = ModelDataset(np.concatenate([model.x, physical.x]),
                       np.concatenate([model.theta, theta]),
                       np.concatenate([model.y, physical.y]))
    index = np.empty(len(physical), dtype=np.int64)
    for j, (x, t) in enumerate(zip(physical.x, theta)):
        hit = np.flatnonzero((aug.x == x) & (aug.theta == t) & (aug.y == physical.y[j]))
        index[j] = hit[0]
    return aug, index
