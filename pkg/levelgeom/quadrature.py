"""Stratified Monte Carlo estimates of region, level-set and profile integrals.

Samples are drawn in fixed chunks; chunk k uses the RNG stream spawned from
(seed, stream, k) and chunk results are reduced in chunk order, so results do
not depend on how many workers ran the chunks.
"""

import dataclasses
import functools
import math
from typing import NamedTuple

import numpy as np
import scipy.integrate

from . import core
from . import curvature
from . import errors
from . import fields
from . import reports

BOUNDARY_LAYER = 0.01
PROFILE_STREAM = 1
FACE_STREAM = 2


@dataclasses.dataclass(frozen=True)
class QuadratureConfig:
    samples: int = 2_000_000
    seed: int = 0
    strata: int = 8
    shell_epsilon: float = 0.01
    chunk: int = 65536
    strategy: str = "thread"
    workers: int = 0
    face_samples: int = 10_000

    def __post_init__(self):
        if self.samples < 1000:
            raise errors.ConfigError(f"Need at least 1000 samples, got {self.samples}.")
        if not self.shell_epsilon > 0:
            raise errors.ConfigError(f"shell_epsilon must be positive, got {self.shell_epsilon}.")
        if self.strata < 1 or self.chunk < 1:
            raise errors.ConfigError("strata and chunk must be positive.")
        if self.strategy not in ("blocking", "thread", "process"):
            raise errors.ConfigError(f"Unknown worker strategy '{self.strategy}'.")

    @classmethod
    def for_interval(cls, interval, shell_epsilon=0.0, **kwargs):
        """Resolves a zero `shell_epsilon` to 0.005 (b - a)."""
        if not shell_epsilon > 0:
            shell_epsilon = 0.005 * interval.width if interval.width > 0 else 0.01
        return cls(shell_epsilon=shell_epsilon, **kwargs)

    @property
    def pool(self):
        return core.Pool(self.strategy, self.workers)


@dataclasses.dataclass(frozen=True)
class LevelProfile:
    bin_edges: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray

    def __post_init__(self):
        assert np.all(np.diff(self.bin_edges) > 0), self.bin_edges
        assert len(self.values) == len(self.std_errors) == len(self.bin_edges) - 1

    @property
    def centers(self):
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self):
        return np.diff(self.bin_edges)

    def basis(self, ts):
        """Matrix B with B @ values the piecewise-linear interpolant through
        the bin centres, extrapolated linearly past the outer centres."""
        ts = np.asarray(ts, np.float64)
        c = self.centers
        B = np.zeros((len(ts), len(c)))
        if len(c) == 1:
            B[:, 0] = 1.0
            return B
        k = np.clip(np.searchsorted(c, ts) - 1, 0, len(c) - 2)
        frac = (ts - c[k]) / (c[k + 1] - c[k])
        rows = np.arange(len(ts))
        B[rows, k] = 1.0 - frac
        B[rows, k + 1] = frac
        return B

    def integrate(self, weight=None, lo=None, hi=None, points=4097):
        """Integral of weight(t) * profile(t) over [lo, hi], by default the
        profile's whole range."""
        lo = self.bin_edges[0] if lo is None else lo
        hi = self.bin_edges[-1] if hi is None else hi
        ts = np.linspace(lo, hi, points)
        w = np.ones_like(ts) if weight is None else np.asarray(weight(ts), np.float64)
        coeffs = scipy.integrate.trapezoid(w[:, None] * self.basis(ts), ts, axis=0)
        value = float(coeffs @ self.values)
        error = float(np.sqrt(np.sum((coeffs * self.std_errors) ** 2)))
        return reports.IntegralEstimate(value, error)


class Samples:
    """The hit samples of one chunk with lazily derived geometric quantities;
    this is what integrands receive."""

    def __init__(self, field, points, jets):
        self.field = field
        self.points = points
        self.jets = jets
        self.values = jets.values
        self.grads = jets.grads
        self.grad_norm = np.linalg.norm(jets.grads, axis=-1)
        self.regular = self.grad_norm > field.grad_floor

    def __len__(self):
        return len(self.values)

    @functools.cached_property
    def curvature(self):
        return curvature.curvature_batch(self.jets, self.field.n, self.field.grad_floor)


# Integrands: functions of `Samples` returning one value per sample.


def one(s):
    return np.ones(len(s))


def value(s):
    return s.values


def grad_norm(s):
    return s.grad_norm


def mean_curvature(s):
    return s.curvature.H


def gauss_grad(i):
    def fn(s):
        return s.curvature.K * s.grads[:, i]

    fn.__name__ = f"gauss_grad_{i}"
    return fn


def abs_gauss_grad_norm(s):
    return np.abs(s.curvature.K) * s.grad_norm


def gauss_grad_norm(s):
    return s.curvature.K * s.grad_norm


def times_grad_norm(g):
    def fn(s):
        return g(s) * s.grad_norm

    fn.__name__ = f"{getattr(g, '__name__', 'g')}_times_grad_norm"
    return fn


def weighted(h):
    """(h o f) |grad f| for a weight h over level values."""

    def fn(s):
        return np.asarray(h(s.values), np.float64) * s.grad_norm

    return fn


class Channel(NamedTuple):
    integrand: object
    lo: float
    hi: float


class _Plan:

    def __init__(self, dim, box, cfg):
        strata = cfg.strata
        while strata > 1 and 2 * strata**dim > cfg.samples:
            strata -= 1
        self.strata = strata
        self.cells = strata**dim
        self.per_cell = math.ceil(cfg.samples / self.cells)
        self.repeats = max(1, cfg.chunk // self.cells)
        self.chunks = math.ceil(self.per_cell / self.repeats)
        self.samples = self.per_cell * self.cells
        self.cell_size = box.size / strata
        self.dim = dim
        self.digits = strata ** np.arange(dim)

    def chunk_repeats(self, index):
        return min(self.repeats, self.per_cell - index * self.repeats)


def _run_chunk(field, channels, box, plan, lo, hi, job):
    index, seed = job
    rng = np.random.default_rng(seed)
    cells = np.tile(np.arange(plan.cells), plan.chunk_repeats(index))
    corner = (cells[:, None] // plan.digits) % plan.strata
    points = box.lo + (corner + rng.random((len(cells), plan.dim))) * plan.cell_size
    values = field.value(points)
    hit = (values >= lo) & (values <= hi)
    points, cells, values = points[hit], cells[hit], values[hit]
    samples = Samples(field, points, field.safe_jets(points))
    sums = np.zeros((len(channels), plan.cells))
    squares = np.zeros((len(channels), plan.cells))
    evaluated = {}
    with np.errstate(all="ignore"):
        for k, (g, a, b) in enumerate(channels):
            if id(g) not in evaluated:
                raw = np.asarray(g(samples), np.float64) if len(samples) else np.zeros(0)
                evaluated[id(g)] = np.where(samples.regular, raw, 0.0)
            weights = np.where((values >= a) & (values <= b), evaluated[id(g)], 0.0)
            sums[k] = np.bincount(cells, weights, plan.cells)
            squares[k] = np.bincount(cells, weights**2, plan.cells)
    unit = box.normalize(points)
    layer = np.any((unit < BOUNDARY_LAYER) | (unit > 1 - BOUNDARY_LAYER), axis=-1)
    return sums, squares, int(hit.sum()), int(layer.sum())


def _sweep(field, channels, box, cfg, stream=0):
    if box.dim != field.dim:
        raise errors.DomainError(f"Box dimension {box.dim} does not match field dimension {field.dim}.")
    lo = min(c.lo for c in channels)
    hi = max(c.hi for c in channels)
    plan = _Plan(field.dim, box, cfg)
    seeds = np.random.SeedSequence(cfg.seed, spawn_key=(stream,)).spawn(plan.chunks)
    fn = functools.partial(_run_chunk, field, channels, box, plan, lo, hi)
    results = cfg.pool.map(fn, list(enumerate(seeds)))
    sums = np.zeros((len(channels), plan.cells))
    squares = np.zeros((len(channels), plan.cells))
    hits = layer = 0
    for chunk_sums, chunk_squares, chunk_hits, chunk_layer in results:
        sums += chunk_sums
        squares += chunk_squares
        hits += chunk_hits
        layer += chunk_layer
    n = plan.per_cell
    cell_volume = box.volume / plan.cells
    means = sums / n
    variances = np.maximum(squares - n * means**2, 0.0) / (n - 1)
    values = cell_volume * means.sum(axis=1)
    errors_ = cell_volume * np.sqrt(variances.sum(axis=1) / n)
    notes = ()
    if layer:
        notes = (
            f"{layer} samples in [{lo:.6g}, {hi:.6g}] lie within {BOUNDARY_LAYER:.0%} "
            "of the box boundary; the region may extend outside the box",
        )
    fraction = hits / plan.samples
    return [
        reports.IntegralEstimate(float(v), float(e), plan.samples, fraction, notes)
        for v, e in zip(values, errors_)
    ]


def region_integrals(field, integrands, interval, box, cfg, stream=0):
    """One sweep, one estimate per integrand, all over the same samples."""
    if interval.a == interval.b:
        zero = reports.IntegralEstimate(0.0, 0.0, 0, 0.0)
        return [zero for _ in integrands]
    channels = [Channel(g, interval.a, interval.b) for g in integrands]
    return _sweep(field, channels, box, cfg, stream)


def region_integral(field, g, interval, box, cfg, stream=0):
    return region_integrals(field, [g], interval, box, cfg, stream)[0]


def _check_shell(lo, hi, critical_values):
    for c in critical_values:
        if lo <= c <= hi:
            raise errors.CriticalValueError(
                f"Critical value {c:.6g} lies inside the shell [{lo:.6g}, {hi:.6g}].", c
            )


def level_integral_shell(field, g, t, box, cfg, critical_values=(), epsilon=None):
    """Surface integral of g over f^-1(t) as the shell limit
    (1 / 2e) * integral of g |grad f| over f^-1([t - e, t + e])."""
    eps = cfg.shell_epsilon if epsilon is None else epsilon
    _check_shell(t - eps, t + eps, critical_values)
    shell = fields.Interval(t - eps, t + eps)
    estimate = region_integral(field, times_grad_norm(g), shell, box, cfg)
    return estimate.scaled(1.0 / (2 * eps))


def nu_from_cumulative(field, t0, a, box, cfg, critical_values=()):
    """nu(t0) as the derivative at t0 of t -> integral of |grad f| over
    f^-1([a, t]), by a central difference sharing one sample stream."""
    eps = cfg.shell_epsilon
    assert t0 - eps >= a, (t0, eps, a)
    _check_shell(t0 - eps, t0 + eps, critical_values)
    channels = [
        Channel(grad_norm, a, t0 + eps),
        Channel(grad_norm, a, t0 - eps),
        Channel(grad_norm, t0 - eps, t0 + eps),
    ]
    upper, lower, shell = _sweep(field, channels, box, cfg)
    value = (upper.value - lower.value) / (2 * eps)
    return dataclasses.replace(shell, value=value, std_error=shell.std_error / (2 * eps))


def level_profile(field, g, interval, bins, box, cfg, stream=0):
    """Binned profile of t -> integral of g / |grad f| over f^-1(t)."""
    if bins < 1:
        raise errors.ConfigError(f"Need at least one bin, got {bins}.")
    if not interval.a < interval.b:
        raise errors.ConfigError(f"A profile needs a < b, got [{interval.a}, {interval.b}].")
    edges = np.linspace(interval.a, interval.b, bins + 1)
    channels = [Channel(g, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
    estimates = _sweep(field, channels, box, cfg, stream)
    widths = np.diff(edges)
    values = np.array([e.value for e in estimates]) / widths
    errors_ = np.array([e.std_error for e in estimates]) / widths
    return LevelProfile(edges, values, errors_)


def nu_profile(field, interval, bins, box, cfg, stream=0):
    return level_profile(field, grad_norm, interval, bins, box, cfg, stream)


def containment_check(field, interval, box, cfg):
    """Samples every box face; level values inside [a, b] on a face mean the
    region may leak out of the box. A heuristic, not a proof."""
    warnings = []
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(FACE_STREAM,)))
    for axis in range(box.dim):
        for side, coord in (("lo", box.lo[axis]), ("hi", box.hi[axis])):
            points = box.lo + rng.random((cfg.face_samples, box.dim)) * box.size
            points[:, axis] = coord
            values = field.value(points)
            inside = int(np.count_nonzero((values >= interval.a) & (values <= interval.b)))
            if inside:
                warnings.append(
                    f"{inside} of {cfg.face_samples} samples on face x{axis + 1}={coord:g} "
                    f"({side}) have level values in [{interval.a:g}, {interval.b:g}]"
                )
    return warnings


def verify_coarea(field, g, interval, box, cfg, bins=30, rtol=1e-3, k_sigma=3.0, critical_values=()):
    """Coarea check: region integral of g against the integrated binned
    profile of g / |grad f|, drawn from an independent sample stream."""
    lhs = region_integral(field, g, interval, box, cfg)
    if interval.a == interval.b:
        return reports.make_report("COAREA", lhs, reports.IntegralEstimate.exact(0.0), rtol, k_sigma)
    profile = level_profile(field, g, interval, bins, box, cfg, stream=PROFILE_STREAM)
    rhs = profile.integrate()
    notes = critical_bin_notes(profile, critical_values)
    return reports.make_report("COAREA", lhs, rhs, rtol, k_sigma, notes)


def critical_bin_notes(profile, critical_values):
    notes = []
    for c in critical_values:
        k = np.searchsorted(profile.bin_edges, c, side="right") - 1
        if 0 <= k < len(profile.values):
            lo, hi = profile.bin_edges[k], profile.bin_edges[k + 1]
            notes.append(f"profile bin [{lo:.6g}, {hi:.6g}] contains critical value {c:.6g}")
    return notes
