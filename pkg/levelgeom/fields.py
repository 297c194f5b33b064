import dataclasses
from typing import NamedTuple

import numpy as np

from . import errors

DEFAULT_EXTENT = 100.0
GRAD_FLOOR = 1e-10


class Jet2(NamedTuple):
    """Value, gradient and (symmetric) Hessian of a field at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


class JetBatch(NamedTuple):
    values: np.ndarray
    grads: np.ndarray
    hessians: np.ndarray

    def __len__(self):
        return len(self.values)

    def jet(self, index):
        return Jet2(float(self.values[index]), self.grads[index], self.hessians[index])


class Interval(NamedTuple):
    a: float
    b: float

    @classmethod
    def make(cls, a, b):
        a, b = float(a), float(b)
        if not a <= b:
            raise errors.ConfigError(f"Interval needs a <= b, got [{a}, {b}].")
        return cls(a, b)

    @property
    def width(self):
        return self.b - self.a

    def contains(self, t):
        return self.a <= t <= self.b


@dataclasses.dataclass(frozen=True)
class BoundingBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, np.float64).reshape(-1)
        hi = np.asarray(self.hi, np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise errors.ConfigError(f"Box corners differ in dimension: {lo}, {hi}.")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise errors.ConfigError(f"Box needs finite lo < hi per axis: {lo}, {hi}.")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, lo, hi, dim):
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self):
        return len(self.lo)

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def volume(self):
        return float(np.prod(self.size))

    def contains(self, points):
        points = np.asarray(points)
        return np.all((points >= self.lo) & (points <= self.hi), axis=-1)

    def encloses(self, other):
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def normalize(self, points):
        return (np.asarray(points) - self.lo) / self.size

    def __eq__(self, other):
        return (
            isinstance(other, BoundingBox)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))


def as_point(coords, dim=None):
    point = np.asarray(coords, np.float64).reshape(-1)
    if dim is not None and len(point) != dim:
        raise errors.DomainError(f"Point {point} does not have dimension {dim}.")
    if not np.all(np.isfinite(point)):
        raise errors.DomainError(f"Point {point} has non-finite coordinates.")
    return point


class ScalarField:
    """A C² function on an open subset of R^d (d >= 3).

    Subclasses implement batched `value()` and `jets()` on arrays of shape
    (N, d). Instances are immutable and safe to evaluate from many threads.
    """

    def __init__(self, dim, box=None, name="field", grad_scale=1.0):
        if dim < 3:
            raise errors.UnsupportedDimensionError(f"Fields need d >= 3, got {dim}.")
        self.dim = dim
        self.box = box or BoundingBox.uniform(-DEFAULT_EXTENT, DEFAULT_EXTENT, dim)
        if self.box.dim != dim:
            raise errors.DomainError(f"Domain box has dimension {self.box.dim}, not {dim}.")
        self.name = name
        self.grad_scale = grad_scale

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, d={self.dim})"

    @property
    def n(self):
        return self.dim - 1

    @property
    def grad_floor(self):
        return GRAD_FLOOR * self.grad_scale

    def value(self, points):
        raise NotImplementedError

    def jets(self, points):
        raise NotImplementedError

    def contains(self, points):
        return self.box.contains(points)

    def eval_jet(self, point):
        point = as_point(point, self.dim)
        if not self.contains(point[None])[0]:
            raise errors.DomainError(f"Point {point} is outside the domain of {self}.")
        return self.jets(point[None]).jet(0)

    def safe_jets(self, points):
        points = np.asarray(points, np.float64)
        if len(points) == 0:
            d = self.dim
            return JetBatch(np.zeros(0), np.zeros((0, d)), np.zeros((0, d, d)))
        inside = self.contains(points)
        if not np.all(inside):
            bad = points[~inside][0]
            raise errors.DomainError(f"Point {bad} is outside the domain of {self}.")
        return self.jets(points)


class Sphere(ScalarField):

    def __init__(self, dim=3, box=None):
        super().__init__(dim, box, "sphere")

    def value(self, points):
        points = np.asarray(points, np.float64)
        return np.einsum("ni,ni->n", points, points)

    def jets(self, points):
        points = np.asarray(points, np.float64)
        hessians = np.broadcast_to(2.0 * np.eye(self.dim), (len(points), self.dim, self.dim))
        return JetBatch(self.value(points), 2.0 * points, hessians.copy())


class DoubleWell(ScalarField):
    """(x1^2 - 1)^2 + x2^2 + ... + xd^2: minima at x1 = ±1, saddle value 1."""

    def __init__(self, dim=3, box=None):
        super().__init__(dim, box, "double_well")

    def value(self, points):
        points = np.asarray(points, np.float64)
        x = points[:, 0]
        rest = points[:, 1:]
        return (x**2 - 1.0) ** 2 + np.einsum("ni,ni->n", rest, rest)

    def jets(self, points):
        points = np.asarray(points, np.float64)
        x = points[:, 0]
        grads = 2.0 * points
        grads[:, 0] = 4.0 * x * (x**2 - 1.0)
        hessians = np.zeros((len(points), self.dim, self.dim))
        idx = np.arange(1, self.dim)
        hessians[:, idx, idx] = 2.0
        hessians[:, 0, 0] = 12.0 * x**2 - 4.0
        return JetBatch(self.value(points), grads, hessians)


class Torus(ScalarField):
    """(sqrt(x^2 + y^2) - R)^2 + z^2 on the box minus an axial core.

    The field is continuous everywhere but not differentiable on the z-axis,
    so jets are only defined where sqrt(x^2 + y^2) > core.
    """

    def __init__(self, major=2.0, core=None, box=None):
        super().__init__(3, box, "torus")
        self.major = float(major)
        self.core = self.major / 4 if core is None else float(core)
        if self.major <= 0 or self.core < 0 or self.core >= self.major:
            raise errors.DomainError(
                f"Torus needs 0 <= core < major, got core={self.core}, major={self.major}."
            )
        on_axis = np.all(self.box.lo[:2] <= 0) and np.all(self.box.hi[:2] >= 0)
        if self.core == 0 and on_axis:
            raise errors.DomainError(
                "Torus domain box contains the z-axis where the field is not C²; "
                "use a positive core radius or a box that avoids the axis."
            )

    def contains(self, points):
        points = np.asarray(points, np.float64)
        rho = np.hypot(points[..., 0], points[..., 1])
        return self.box.contains(points) & (rho > self.core)

    def value(self, points):
        points = np.asarray(points, np.float64)
        rho = np.hypot(points[:, 0], points[:, 1])
        return (rho - self.major) ** 2 + points[:, 2] ** 2

    def jets(self, points):
        points = np.asarray(points, np.float64)
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        rho = np.hypot(x, y)
        q = rho - self.major
        grads = np.stack([2 * q * x / rho, 2 * q * y / rho, 2 * z], axis=-1)
        hessians = np.zeros((len(points), 3, 3))
        hessians[:, 0, 0] = 2 * (x**2 / rho**2 + q * y**2 / rho**3)
        hessians[:, 1, 1] = 2 * (y**2 / rho**2 + q * x**2 / rho**3)
        hessians[:, 0, 1] = hessians[:, 1, 0] = 2 * (x * y / rho**2 - q * x * y / rho**3)
        hessians[:, 2, 2] = 2.0
        return JetBatch(q**2 + z**2, grads, hessians)


class Quadric(ScalarField):
    """x^T A x for a symmetric coefficient matrix A."""

    def __init__(self, coeffs, box=None, dim=None):
        coeffs = np.asarray(coeffs, np.float64)
        if coeffs.ndim == 1 and dim and len(coeffs) == dim * dim:
            coeffs = coeffs.reshape(dim, dim)
        if coeffs.ndim == 1:
            coeffs = np.diag(coeffs)
        if coeffs.ndim != 2 or coeffs.shape[0] != coeffs.shape[1]:
            raise errors.ConfigError(f"Quadric coefficients must be a diagonal or square matrix, got {coeffs.shape}.")
        self.matrix = 0.5 * (coeffs + coeffs.T)
        super().__init__(len(self.matrix), box, "quadric")

    def value(self, points):
        points = np.asarray(points, np.float64)
        return np.einsum("ni,ij,nj->n", points, self.matrix, points)

    def jets(self, points):
        points = np.asarray(points, np.float64)
        hessians = np.broadcast_to(2.0 * self.matrix, (len(points), self.dim, self.dim))
        return JetBatch(self.value(points), 2.0 * points @ self.matrix, hessians.copy())


BUILTINS = {
    "sphere": lambda dim=3, box=None, **kw: Sphere(dim, box),
    "double_well": lambda dim=3, box=None, **kw: DoubleWell(dim, box),
    "torus": lambda dim=3, box=None, major=2.0, core=None, **kw: Torus(major, core, box),
    "quadric": lambda dim=3, box=None, coeffs=None, **kw: Quadric(
        np.ones(dim) if coeffs is None else coeffs, box, dim
    ),
}


def builtin_field(name, **params):
    if name not in BUILTINS:
        raise errors.ConfigError(f"Unknown builtin field '{name}', choose from {sorted(BUILTINS)}.")
    field = BUILTINS[name](**params)
    if name == "torus" and params.get("dim", 3) != 3:
        raise errors.UnsupportedDimensionError("The torus field only exists in d = 3.")
    if "dim" in params and field.dim != params["dim"]:
        raise errors.ConfigError(f"Field '{name}' has dimension {field.dim}, not {params['dim']}.")
    return field


def finite_diff_jet(field, point, h=1e-4):
    """Central-difference jet, an O(h²) oracle for the analytic jets."""
    assert h > 0, h
    point = as_point(point, field.dim)
    d = field.dim
    eye = h * np.eye(d)
    singles = np.concatenate([point + eye, point - eye])
    pairs, index = [], []
    for i in range(d):
        for j in range(i + 1, d):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                pairs.append(point + si * eye[i] + sj * eye[j])
            index.append((i, j))
    stencil = np.concatenate([point[None], singles, np.array(pairs).reshape(-1, d)])
    if not np.all(field.contains(stencil)):
        raise errors.DomainError(f"Difference stencil of width {h} at {point} leaves the domain.")
    values = field.value(stencil)
    center, plus, minus = values[0], values[1 : d + 1], values[d + 1 : 2 * d + 1]
    cross = values[2 * d + 1 :].reshape(-1, 4)
    gradient = (plus - minus) / (2 * h)
    hessian = np.diag((plus - 2 * center + minus) / h**2)
    for (i, j), (pp, pm, mp, mm) in zip(index, cross):
        hessian[i, j] = hessian[j, i] = (pp - pm - mp + mm) / (4 * h**2)
    return Jet2(float(center), gradient, hessian)
