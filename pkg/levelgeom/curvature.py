from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import errors
from . import fields


class CurvatureSample(NamedTuple):
    H: float
    K: float
    normal: np.ndarray
    grad_norm: float


class CurvatureBatch(NamedTuple):
    """Curvatures for a batch of jets; entries at near-critical points are
    zero and flagged False in `regular`."""

    H: np.ndarray
    K: np.ndarray
    normals: np.ndarray
    grad_norm: np.ndarray
    regular: np.ndarray


def _cofactor_adjugate(S):
    d = len(S)
    cof = np.empty_like(S)
    for i in range(d):
        for j in range(d):
            minor = np.delete(np.delete(S, i, axis=0), j, axis=1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


def _adjugate3(S):
    # Explicit cofactors; works on a single matrix or a stack.
    a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 0, 2]
    d, e, f = S[..., 1, 0], S[..., 1, 1], S[..., 1, 2]
    g, h, i = S[..., 2, 0], S[..., 2, 1], S[..., 2, 2]
    rows = [
        [e * i - f * h, c * h - b * i, b * f - c * e],
        [f * g - d * i, a * i - c * g, c * d - a * f],
        [d * h - e * g, b * g - a * h, a * e - b * d],
    ]
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2)


def adjugate(S):
    """Classical adjoint: adj(S) @ S == det(S) * I."""
    S = np.asarray(S, np.float64)
    d = len(S)
    assert S.shape == (d, d) and d >= 3, S.shape
    if d == 3:
        return _adjugate3(S)
    scale = np.linalg.norm(S)
    lu, piv = scipy.linalg.lu_factor(S, check_finite=False)
    swaps = np.count_nonzero(piv != np.arange(d))
    det = (-1) ** swaps * np.prod(np.diag(lu))
    if scale > 0 and abs(det) > 1e-12 * scale**d:
        adj = det * scipy.linalg.lu_solve((lu, piv), np.eye(d), check_finite=False)
        residual = np.linalg.norm(adj @ S - det * np.eye(d))
        if residual <= 1e-10 * max(scale**d, 1e-300):
            return adj
    return _cofactor_adjugate(S)


def adjugate_batch(S):
    S = np.asarray(S, np.float64)
    d = S.shape[-1]
    if d == 3:
        return _adjugate3(S)
    out = np.empty_like(S)
    if len(S) == 0:
        return out
    scale = np.linalg.norm(S, axis=(-2, -1))
    det = np.linalg.det(S)
    good = (scale > 0) & (np.abs(det) > 1e-12 * scale**d)
    if np.any(good):
        out[good] = det[good, None, None] * np.linalg.inv(S[good])
    for index in np.flatnonzero(~good):
        out[index] = _cofactor_adjugate(S[index])
    return out


def _check_regular(jet, grad_floor):
    norm = float(np.linalg.norm(jet.gradient))
    if not norm > grad_floor:
        raise errors.NearCriticalError(
            f"|grad f| = {norm:.3g} is below the critical floor {grad_floor:.3g}."
        )
    return norm


def mean_curvature(jet, n, grad_floor=fields.GRAD_FLOOR):
    norm = _check_regular(jet, grad_floor)
    grad, Q = np.asarray(jet.gradient), np.asarray(jet.hessian)
    numer = norm**2 * np.trace(Q) - grad @ Q @ grad
    return float(numer / (n * norm**3))


def gaussian_curvature(jet, n, grad_floor=fields.GRAD_FLOOR):
    norm = _check_regular(jet, grad_floor)
    grad = np.asarray(jet.gradient)
    return float(grad @ adjugate(jet.hessian) @ grad / norm ** (n + 2))


def unit_normal(jet):
    norm = _check_regular(jet, 0.0)
    return -np.asarray(jet.gradient, np.float64) / norm


def curvature_sample(jet, n, grad_floor=fields.GRAD_FLOOR):
    return CurvatureSample(
        H=mean_curvature(jet, n, grad_floor),
        K=gaussian_curvature(jet, n, grad_floor),
        normal=unit_normal(jet),
        grad_norm=float(np.linalg.norm(jet.gradient)),
    )


def curvature_batch(jets, n, grad_floor=fields.GRAD_FLOOR):
    grads, Q = jets.grads, jets.hessians
    norm = np.linalg.norm(grads, axis=-1)
    regular = norm > grad_floor
    safe = np.where(regular, norm, 1.0)
    quad = np.einsum("ni,nij,nj->n", grads, Q, grads)
    trace = np.trace(Q, axis1=-2, axis2=-1)
    H = (norm**2 * trace - quad) / (n * safe**3)
    adj = adjugate_batch(Q)
    K = np.einsum("ni,nij,nj->n", grads, adj, grads) / safe ** (n + 2)
    normals = -grads / safe[:, None]
    zero = ~regular
    H[zero], K[zero], normals[zero] = 0.0, 0.0, 0.0
    return CurvatureBatch(H, K, normals, norm, regular)


def divergence_check_H(field, point, h=1e-4, n=None):
    """(1/n) div(grad f / |grad f|) by central differences of the unit
    gradient, independent of the Hessian formula."""
    n = field.n if n is None else n
    point = fields.as_point(point, field.dim)
    eye = h * np.eye(field.dim)
    stencil = np.concatenate([point + eye, point - eye])
    if not np.all(field.contains(stencil)):
        raise errors.DomainError(f"Divergence stencil of width {h} at {point} leaves the domain.")
    grads = field.jets(stencil).grads
    norms = np.linalg.norm(grads, axis=-1)
    if np.any(norms <= field.grad_floor):
        raise errors.NearCriticalError(f"Divergence stencil at {point} touches a critical point.")
    units = grads / norms[:, None]
    d = field.dim
    div = np.sum((np.diag(units[:d]) - np.diag(units[d:])) / (2 * h))
    return float(div / n)
