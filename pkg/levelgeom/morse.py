import itertools
from typing import NamedTuple

import numpy as np
import scipy.spatial

from . import curvature
from . import errors
from . import fields

CONVERGED_GRAD = 1e-9
MAX_ITERATIONS = 50
NONDEGENERACY_FLOOR = 1e-6
DEDUP_RADIUS = 1e-6
MAX_STEP = 0.25


class CriticalPoint(NamedTuple):
    location: np.ndarray
    value: float
    morse_index: int
    hessian_eigenvalues: np.ndarray

    def to_json(self):
        return {
            "location": [float(x) for x in self.location],
            "value": float(self.value),
            "index": int(self.morse_index),
            "eigenvalues": [float(x) for x in self.hessian_eigenvalues],
        }


class CriticalPoints(list):
    """Critical points sorted by value then location, plus notes about
    degenerate points that were dropped because their value lies outside
    the interval of interest."""

    def __init__(self, points=(), notes=()):
        super().__init__(points)
        self.notes = tuple(notes)

    @property
    def values(self):
        return [cp.value for cp in self]


class RegularDecomposition(NamedTuple):
    interval: fields.Interval
    critical_values: tuple
    intervals: tuple

    @property
    def regular(self):
        return not self.critical_values

    def describe(self):
        if not self.intervals:
            return f"[{self.interval.a:.6g}, {self.interval.b:.6g}] has no regular subintervals"
        parts = ", ".join(f"({lo:.6g}, {hi:.6g})" for lo, hi in self.intervals)
        if self.regular:
            return f"regular interval {parts}"
        values = ", ".join(f"{c:.6g}" for c in self.critical_values)
        return f"critical values {{{values}}} split the interval into {parts}"


def seed_points(box, seed_grid):
    if seed_grid < 8:
        raise errors.ConfigError(f"seed_grid must be at least 8, got {seed_grid}.")
    # Nodes sit at cell centres so seeds never start on the box faces.
    axes = [lo + (np.arange(seed_grid) + 0.5) * (hi - lo) / seed_grid for lo, hi in zip(box.lo, box.hi)]
    return np.array(list(itertools.product(*axes)), np.float64)


def _newton(field, box, points):
    """Damped Newton on grad f = 0 for a batch of seeds. Returns the final
    points and a mask of the converged ones."""
    limit = MAX_STEP * float(np.linalg.norm(box.size))
    active = np.ones(len(points), bool)
    converged = np.zeros(len(points), bool)
    for _ in range(MAX_ITERATIONS + 1):
        index = np.flatnonzero(active)
        if not len(index):
            break
        jets = field.jets(points[index])
        norms = np.linalg.norm(jets.grads, axis=-1)
        done = norms <= CONVERGED_GRAD
        converged[index[done]] = True
        active[index[done]] = False
        index, grads, hessians = index[~done], jets.grads[~done], jets.hessians[~done]
        if not len(index):
            break
        steps = -np.einsum("nij,nj->ni", np.linalg.pinv(hessians, hermitian=True), grads)
        lengths = np.linalg.norm(steps, axis=-1, keepdims=True)
        steps *= np.minimum(1.0, limit / np.maximum(lengths, 1e-300))
        moved = points[index] + steps
        stalled = lengths[:, 0] == 0
        inside = field.contains(moved) & box.contains(moved)
        points[index] = moved
        active[index[~inside | stalled]] = False
    return points, converged


def _dedup(points, box):
    """Keeps the lexicographically first point of every cluster closer than
    DEDUP_RADIUS in box-normalized coordinates."""
    if not len(points):
        return points
    unit = box.normalize(points)
    order = np.lexsort(unit.T[::-1])
    unit, points = unit[order], points[order]
    neighbors = scipy.spatial.cKDTree(unit).query_ball_point(unit, DEDUP_RADIUS)
    covered = np.zeros(len(points), bool)
    kept = []
    for i, near in enumerate(neighbors):
        if not covered[i]:
            kept.append(i)
            covered[near] = True
    return points[kept]


def classify(field, location):
    jet = field.eval_jet(location)
    norm = float(np.linalg.norm(jet.gradient))
    assert norm <= CONVERGED_GRAD, (location, norm)
    Q = np.asarray(jet.hessian)
    eigenvalues = np.linalg.eigvalsh(Q)
    scale = np.linalg.norm(Q)
    degenerate = scale == 0 or abs(np.prod(eigenvalues)) < NONDEGENERACY_FLOOR * scale**field.dim
    cp = CriticalPoint(
        location=np.asarray(location, np.float64),
        value=float(jet.value),
        morse_index=int(np.count_nonzero(eigenvalues < 0)),
        hessian_eigenvalues=eigenvalues,
    )
    return cp, degenerate


def find_critical_points(field, box, seed_grid=8, interval=None):
    """Seeded Newton search for critical points inside the box.

    Converged points are deduplicated in box-normalized coordinates and
    re-checked with a fresh jet. A degenerate point raises NotMorseError,
    unless an interval is given and the point's value lies outside it, in
    which case it is dropped with a note.
    """
    if box.dim != field.dim:
        raise errors.DomainError(f"Box dimension {box.dim} does not match field dimension {field.dim}.")
    seeds = seed_points(box, seed_grid)
    seeds = seeds[field.contains(seeds)]
    points, converged = _newton(field, box, seeds.copy())
    points = _dedup(points[converged], box)
    found, dropped = [], {}
    for location in points:
        cp, degenerate = classify(field, location)
        if not degenerate:
            found.append(cp)
            continue
        if interval is not None and not interval.contains(cp.value):
            key = round(cp.value, 9)
            dropped[key] = dropped.get(key, 0) + 1
            continue
        raise errors.NotMorseError(
            f"Degenerate critical point at {np.round(location, 9).tolist()} with value "
            f"{cp.value:.6g} (Hessian eigenvalues {np.round(cp.hessian_eigenvalues, 9).tolist()}).",
            location,
        )
    found.sort(key=lambda cp: (round(cp.value, 12), tuple(cp.location)))
    notes = [
        f"dropped {count} degenerate critical points with value {value:.6g} outside the interval"
        for value, count in sorted(dropped.items())
    ]
    return CriticalPoints(found, notes)


def regular_decomposition(cps, interval):
    values = sorted(float(cp.value) for cp in cps if interval.contains(cp.value))
    distinct = []
    for value in values:
        if not distinct or value - distinct[-1] > 1e-9 * max(1.0, abs(value)):
            distinct.append(value)
    edges = [interval.a] + [c for c in distinct if interval.a < c < interval.b] + [interval.b]
    intervals = tuple((lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo)
    return RegularDecomposition(interval, tuple(distinct), intervals)


class ProbeRow(NamedTuple):
    radius: float
    mean_rate: float
    gauss_rate: float
    grad_rate: float


class ProbeTable(NamedTuple):
    point: CriticalPoint
    rows: tuple

    def growth(self):
        """Largest value of each bounded statistic over the radius ladder
        relative to its value at the largest radius, and the smallest
        gradient rate relative to its first value."""
        first = self.rows[0]
        mean = max(r.mean_rate for r in self.rows) / max(first.mean_rate, 1e-300)
        gauss = max(r.gauss_rate for r in self.rows) / max(first.gauss_rate, 1e-300)
        grad = min(r.grad_rate for r in self.rows) / max(first.grad_rate, 1e-300)
        return mean, gauss, grad

    def to_json(self):
        return {"point": self.point.to_json(), "rows": [row._asdict() for row in self.rows]}


def singularity_probe(field, cp, radii, others=(), samples=256, seed=0):
    """Curvature growth near a critical point. At each radius r, random
    points on the sphere of radius r give r max|H|, r^(n-1) max|K grad f|
    and min|grad f| / r, which stay bounded (bounded away from zero for the
    last) as r shrinks."""
    radii = sorted((float(r) for r in radii), reverse=True)
    assert radii and radii[-1] > 0, radii
    for other in others:
        distance = np.linalg.norm(np.asarray(other.location) - cp.location)
        if 0 < distance <= radii[0]:
            raise errors.PreconditionError(
                f"Critical point at {np.round(other.location, 6).tolist()} lies inside the probe "
                f"ball of radius {radii[0]:g} around {np.round(cp.location, 6).tolist()}."
            )
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(samples, field.dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    n = field.n
    rows = []
    for r in radii:
        points = cp.location + r * directions
        if not np.all(field.contains(points)):
            raise errors.DomainError(f"Probe sphere of radius {r:g} leaves the domain of {field}.")
        jets = field.jets(points)
        batch = curvature.curvature_batch(jets, n, field.grad_floor)
        if not np.all(batch.regular):
            raise errors.NearCriticalError(f"Probe sphere of radius {r:g} touches a critical point.")
        rows.append(
            ProbeRow(
                radius=r,
                mean_rate=float(r * np.max(np.abs(batch.H))),
                gauss_rate=float(r ** (n - 1) * np.max(np.abs(batch.K) * batch.grad_norm)),
                grad_rate=float(np.min(batch.grad_norm) / r),
            )
        )
    return ProbeTable(cp, tuple(rows))
