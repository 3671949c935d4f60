"""von Mises-Fisher targets on Stiefel and Grassmann manifolds.

Only unnormalised log-densities are exposed; nothing here exponentiates them.
"""
from dataclasses import dataclass
from typing import Callable, Optional
import math

import numpy as np

from .manifolds import Grassmann, Manifold, Sphere, Stiefel

FAMILIES = ("varying_n", "varying_k", "anisotropy", "grassmann_variance")


@dataclass(frozen=True)
class TargetDensity:
    """Unnormalised log-density on a manifold, with optional ambient gradient."""

    manifold: Manifold
    log_p: Callable[[np.ndarray], float]
    euclid_grad_log_p: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "target"


@dataclass(frozen=True)
class VmfStiefelParams:
    F: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.F, dtype=float)
        if f.ndim != 2 or not np.all(np.isfinite(f)):
            raise ValueError("F must be a finite 2-d array")
        object.__setattr__(self, "F", f)


@dataclass(frozen=True)
class VmfGrassmannParams:
    P: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.P, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError("P must be square")
        if np.max(np.abs(p - p.T)) > 1e-10:
            raise ValueError("P must be symmetric")
        if np.linalg.eigvalsh(p)[0] < -1e-10:
            raise ValueError("P must be positive semi-definite")
        object.__setattr__(self, "P", p)


def _check_shape(x, shape):
    if x.shape != shape:
        raise ValueError(f"shape mismatch: point {x.shape} vs parameter {shape}")


def vmf_stiefel_logp(gamma, params):
    """Tr(F^T Gamma)."""
    gamma = np.asarray(gamma)
    _check_shape(gamma, params.F.shape)
    return float(np.vdot(params.F, gamma))


def vmf_grassmann_logp(gamma, params):
    """Tr(P Gamma Gamma^T); invariant under Gamma -> Gamma O for orthogonal O."""
    gamma = np.asarray(gamma)
    _check_shape(gamma[:, :1], (params.P.shape[0], 1))
    return float(np.vdot(params.P @ gamma, gamma))


def vmf_grassmann_euclid_grad(gamma, params):
    gamma = np.asarray(gamma)
    _check_shape(gamma[:, :1], (params.P.shape[0], 1))
    return 2.0 * (params.P @ gamma)


def _stacked_f(n, diag):
    k = len(diag)
    f = np.zeros((n, k))
    f[:k, :k] = np.diag(diag)
    return f


def build_benchmark_params(n, k, family, lam=None, manifold="stiefel"):
    """Parameters of the benchmark families, F = (D; 0) and P = F F^T.

    On the Stiefel manifold ``varying_n`` and ``varying_k`` use
    D = diag(1, ..., k) and ``anisotropy`` uses D = diag(1, lam) with k = 2.
    On the Grassmann manifold ``varying_n`` and ``varying_k`` use D = I_k and
    ``grassmann_variance`` uses D = sqrt(lam) I_k.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer))):
        raise ValueError("n and k must be integers")
    if not 1 <= k < n:
        raise ValueError(f"family {family} needs 1 <= k < n, got n={n}, k={k}")
    if manifold not in ("stiefel", "grassmann"):
        raise ValueError(f"benchmark families live on stiefel or grassmann, not {manifold}")

    if family == "anisotropy":
        if manifold != "stiefel" or k != 2:
            raise ValueError("anisotropy family is defined on the Stiefel manifold with k = 2")
        if lam is None or lam <= 0:
            raise ValueError("anisotropy family needs lambda > 0")
        return VmfStiefelParams(_stacked_f(n, [1.0, float(lam)]))
    if family == "grassmann_variance":
        if manifold != "grassmann":
            raise ValueError("grassmann_variance family is defined on the Grassmann manifold")
        if lam is None or lam <= 0:
            raise ValueError("grassmann_variance family needs lambda > 0")
        f = _stacked_f(n, [math.sqrt(lam)] * k)
        return VmfGrassmannParams(f @ f.T)
    if manifold == "stiefel":
        return VmfStiefelParams(_stacked_f(n, np.arange(1, k + 1, dtype=float)))
    f = _stacked_f(n, [1.0] * k)
    return VmfGrassmannParams(f @ f.T)


def vmf_stiefel_target(params, manifold=None):
    f = params.F
    manifold = manifold or Stiefel(*f.shape)
    return TargetDensity(
        manifold=manifold,
        log_p=lambda g: float(np.vdot(f, g)),
        euclid_grad_log_p=lambda g: f.copy(),
        name="vmf_stiefel",
    )


def vmf_grassmann_target(params, k):
    p = params.P
    return TargetDensity(
        manifold=Grassmann(p.shape[0], k),
        log_p=lambda g: float(np.vdot(p @ g, g)),
        euclid_grad_log_p=lambda g: 2.0 * (p @ g),
        name="vmf_grassmann",
    )


def vmf_sphere_target(mu, kappa):
    """density proportional to exp(kappa * mu^T x) on the unit sphere."""
    mu = np.asarray(mu, dtype=float)
    kmu = kappa * mu
    return TargetDensity(
        manifold=Sphere(mu.size - 1),
        log_p=lambda x: float(np.dot(kmu, x)),
        euclid_grad_log_p=lambda x: kmu.copy(),
        name="vmf_sphere",
    )


def _uniform_sphere(dim, rng, count):
    """``count`` uniform points on the unit sphere in R^dim (normalised Gaussians)."""
    g = rng.standard_normal((count, dim))
    nrm = np.linalg.norm(g, axis=1)
    bad = nrm == 0.0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        nrm = np.linalg.norm(g, axis=1)
        bad = nrm == 0.0
    return g / nrm[:, None]


def _householder_to(mu):
    """Reflection (acting on rows) mapping e_1 to ``mu``; identity when mu == e_1."""
    e1 = np.zeros_like(mu)
    e1[0] = 1.0
    u = e1 - mu
    nrm = np.linalg.norm(u)
    if nrm < 1e-15:
        return lambda y: y
    u = u / nrm
    return lambda y: y - 2.0 * np.outer(y @ u, u)


def vmf_sphere_oracle_sample(mu, kappa, rng, size=None):
    """Exact draws from vMF(mu, kappa) on the unit sphere in R^p.

    Beta-proposal rejection scheme for the cosine ``w = mu^T x``; the tangential
    part is uniform on the orthogonal sphere. ``kappa == 0`` is the uniform
    distribution. With ``size`` given, returns an array of shape (size, p).
    """
    mu = np.asarray(mu, dtype=float)
    if abs(np.linalg.norm(mu) - 1.0) > 1e-10:
        raise ValueError("mu must be a unit vector")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if size is None:
        return _vmf_draws(mu, kappa, rng, 1)[0]
    return _vmf_draws(mu, kappa, rng, int(size))


def _vmf_draws(mu, kappa, rng, count):
    p = mu.size
    if kappa == 0:
        return _uniform_sphere(p, rng, count)
    w = _vmf_cosines(p, kappa, rng, count)
    if p > 1:
        tail = _uniform_sphere(p - 1, rng, count)
        y = np.hstack([w[:, None], np.sqrt(np.maximum(1.0 - w * w, 0.0))[:, None] * tail])
    else:
        y = np.where(w >= 0, 1.0, -1.0)[:, None]
    y = _householder_to(mu)(y)
    return y / np.linalg.norm(y, axis=1)[:, None]


def _vmf_cosines(p, kappa, rng, count):
    if p == 3:
        # Closed-form inverse CDF of the cosine on S^2.
        u = 1.0 - rng.random(count)
        return 1.0 + np.log(u + (1.0 - u) * math.exp(-2.0 * kappa)) / kappa
    if p == 1:
        # Two atoms at +-1 with weights exp(+-kappa).
        return np.where(rng.random(count) < 1.0 / (1.0 + math.exp(-2.0 * kappa)), 1.0, -1.0)
    b = (p - 1) / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + (p - 1) ** 2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + (p - 1) * math.log(1.0 - x0 * x0)
    out = np.empty(count)
    for i in range(count):
        while True:
            z = rng.beta((p - 1) / 2.0, (p - 1) / 2.0)
            w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
            if kappa * w + (p - 1) * math.log(1.0 - x0 * w) - c >= math.log(1.0 - rng.random()):
                out[i] = w
                break
    return out
