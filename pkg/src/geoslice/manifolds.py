"""Riemannian manifolds with closed-form geodesics.

Points and tangent vectors are plain numpy arrays in ambient coordinates:
vectors for ``Euclidean`` and ``Sphere``, n x k matrices for ``Stiefel`` and
``Grassmann`` (a Grassmann point is stored as any orthonormal basis of the
subspace). The manifold objects are immutable descriptors; every method is a
pure function of its arguments apart from the caller-supplied generator.
"""
from dataclasses import dataclass
import math

import numpy as np

from .linalg_kernels import (
    SkewExpFlow,
    compact_qr,
    compact_svd,
    orthonormal_complement,
)

POINT_TOL = 1e-8
TWO_PI = 2.0 * math.pi


class SingularProjectionError(ValueError):
    """Projection onto the manifold is undefined (zero or rank-deficient input)."""


class DegenerateManifoldError(ValueError):
    pass


class GeodesicCurve:
    """A geodesic with its (x, v)-dependent factorisation computed once.

    ``point(t)`` and ``point_velocity(t)`` are then cheap, which is what the
    stepping-out and shrinkage loops need.
    """

    def point(self, t):
        raise NotImplementedError

    def point_velocity(self, t):
        raise NotImplementedError

    __call__ = point


class Manifold:
    kind = "abstract"
    n = 0
    k = 0

    @property
    def shape(self):
        raise NotImplementedError

    @property
    def intrinsic_dim(self):
        raise NotImplementedError

    # -- constraints -------------------------------------------------------
    def constraint_violation(self, x):
        return 0.0

    def tangent_violation(self, x, v):
        return 0.0

    def check_point(self, x, tol=POINT_TOL):
        x = np.asarray(x, dtype=float)
        if x.shape != self.shape:
            raise ValueError(f"{self}: point has shape {x.shape}, expected {self.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"{self}: point has non-finite entries")
        err = self.constraint_violation(x)
        if err > tol:
            raise ValueError(f"{self}: point violates the manifold constraint by {err:.3e}")
        return x

    def check_tangent(self, x, v, tol=POINT_TOL):
        v = np.asarray(v, dtype=float)
        if v.shape != self.shape:
            raise ValueError(f"{self}: tangent has shape {v.shape}, expected {self.shape}")
        err = self.tangent_violation(x, v)
        if err > tol:
            raise ValueError(f"{self}: vector is not tangent (violation {err:.3e})")
        return v

    # -- metric ------------------------------------------------------------
    def inner(self, x, u, v):
        return float(np.vdot(u, v))

    def norm(self, x, v):
        return math.sqrt(max(self.inner(x, v, v), 0.0))

    # -- tangent sampling --------------------------------------------------
    def tangent_from_coords(self, x, c):
        """Isometry from R^intrinsic_dim onto the tangent space at ``x``."""
        raise NotImplementedError

    def random_tangent(self, x, rng):
        """Standard Gaussian on the tangent space (metric-orthonormal coordinates)."""
        return self.tangent_from_coords(x, rng.standard_normal(self.intrinsic_dim))

    def sample_unit_tangent(self, x, rng):
        """Uniform draw from the unit tangent sphere at ``x``."""
        if self.intrinsic_dim == 0:
            raise DegenerateManifoldError(f"{self} has no tangent directions")
        while True:
            v = self.random_tangent(x, rng)
            nrm = self.norm(x, v)
            if nrm > 0.0:
                return v / nrm

    def proj_tangent(self, x, a):
        """Orthogonal projection of an ambient array onto the tangent space."""
        raise NotImplementedError

    # -- geodesics ---------------------------------------------------------
    def curve(self, x, v):
        raise NotImplementedError

    def geodesic(self, x, v, theta):
        return self.curve(x, v).point(theta)

    def geodesic_with_velocity(self, x, v, theta):
        return self.curve(x, v).point_velocity(theta)

    def uturn(self, x, v, alpha):
        """Walk ``alpha`` along the geodesic, then reverse the direction."""
        y, vel = self.geodesic_with_velocity(x, v, alpha)
        return y, -vel

    def project(self, a):
        raise NotImplementedError

    # -- comparison and I/O ------------------------------------------------
    def point_distance(self, x, y):
        return float(np.max(np.abs(np.asarray(x) - np.asarray(y))))

    def descriptor(self):
        return {"kind": self.kind, "n": self.n, "k": self.k,
                "intrinsic_dim": self.intrinsic_dim}

    def to_record(self, x):
        """Flat row-major serialisation with a descriptor header."""
        x = np.asarray(x, dtype=float)
        return {"manifold": self.descriptor(), "shape": list(x.shape),
                "values": x.ravel(order="C").tolist()}

    def from_record(self, rec):
        if rec["manifold"]["kind"] != self.kind:
            raise ValueError(f"record is for {rec['manifold']['kind']}, not {self.kind}")
        x = np.asarray(rec["values"], dtype=float).reshape(rec["shape"])
        return self.check_point(x)

    def random_point(self, rng):
        return self.project(rng.standard_normal(self.shape))


# ---------------------------------------------------------------------------
# Euclidean space


class _LineCurve(GeodesicCurve):
    def __init__(self, x, v):
        self.x, self.v = x, v

    def point(self, t):
        return self.x + t * self.v

    def point_velocity(self, t):
        return self.x + t * self.v, self.v.copy()

    __call__ = point


@dataclass(frozen=True)
class Euclidean(Manifold):
    d: int

    kind = "euclidean"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("euclidean dimension must be >= 1")

    @property
    def n(self):
        return self.d

    @property
    def k(self):
        return 1

    @property
    def shape(self):
        return (self.d,)

    @property
    def intrinsic_dim(self):
        return self.d

    def tangent_from_coords(self, x, c):
        return np.asarray(c, dtype=float).copy()

    def random_tangent(self, x, rng):
        return rng.standard_normal(self.d)

    def proj_tangent(self, x, a):
        return np.asarray(a, dtype=float).copy()

    def curve(self, x, v):
        return _LineCurve(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    def project(self, a):
        return np.asarray(a, dtype=float).copy()


# ---------------------------------------------------------------------------
# Hypersphere


class _GreatCircle(GeodesicCurve):
    def __init__(self, x, v):
        self.x = x
        self.speed = math.sqrt(float(np.dot(v, v)))
        self.u = v / self.speed if self.speed > 0.0 else v

    def point(self, t):
        # Periodic with period 2*pi / speed; reduce the angle for accuracy.
        a = math.fmod(t * self.speed, TWO_PI)
        return math.cos(a) * self.x + math.sin(a) * self.u

    def point_velocity(self, t):
        a = math.fmod(t * self.speed, TWO_PI)
        c, s = math.cos(a), math.sin(a)
        return c * self.x + s * self.u, self.speed * (c * self.u - s * self.x)

    __call__ = point


@dataclass(frozen=True)
class Sphere(Manifold):
    """Unit sphere S^d in R^(d+1)."""

    d: int

    kind = "sphere"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("sphere dimension must be >= 1")

    @property
    def n(self):
        return self.d + 1

    @property
    def k(self):
        return 1

    @property
    def shape(self):
        return (self.d + 1,)

    @property
    def intrinsic_dim(self):
        return self.d

    def constraint_violation(self, x):
        return abs(float(np.dot(x, x)) - 1.0)

    def tangent_violation(self, x, v):
        return abs(float(np.dot(x, v)))

    def tangent_from_coords(self, x, c):
        basis = orthonormal_complement(np.asarray(x, dtype=float).reshape(-1, 1))
        return basis @ np.asarray(c, dtype=float)

    def random_tangent(self, x, rng):
        # Projecting an ambient Gaussian onto x-perp has the same law as
        # Gaussian coordinates in an orthonormal basis of the tangent space.
        g = rng.standard_normal(self.d + 1)
        return g - np.dot(x, g) * x

    def proj_tangent(self, x, a):
        a = np.asarray(a, dtype=float)
        return a - np.dot(x, a) * x

    def curve(self, x, v):
        return _GreatCircle(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    def project(self, a):
        a = np.asarray(a, dtype=float)
        nrm = math.sqrt(float(np.dot(a, a)))
        if not nrm > 0.0 or not math.isfinite(nrm):
            raise SingularProjectionError("cannot project the zero vector onto the sphere")
        return a / nrm


# ---------------------------------------------------------------------------
# Stiefel manifold, canonical metric


def _polar(a):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise SingularProjectionError("non-finite input to projection")
    u, d, vt = np.linalg.svd(a, full_matrices=False)
    if d[-1] <= 1e-12 * max(d[0], 1.0):
        raise SingularProjectionError(
            f"rank-deficient input (smallest singular value {d[-1]:.3e})")
    return u @ vt


def _skew_from_upper(c, k):
    pi = np.zeros((k, k))
    iu = np.triu_indices(k, 1)
    pi[iu] = c
    return pi - pi.T


class _StiefelGeodesic(GeodesicCurve):
    def __init__(self, gamma, delta):
        k = gamma.shape[1]
        pi = gamma.T @ delta
        pi = 0.5 * (pi - pi.T)
        q, r = compact_qr(delta - gamma @ (gamma.T @ delta))
        gen = np.zeros((2 * k, 2 * k))
        gen[:k, :k] = pi
        gen[:k, k:] = -r.T
        gen[k:, :k] = r
        self.k = k
        self.basis = np.hstack([gamma, q])
        self.gen = gen
        self.flow = SkewExpFlow(gen)

    def point(self, t):
        return self.basis @ self.flow.columns(t, self.k)

    def point_velocity(self, t):
        m = self.flow.columns(t, self.k)
        return self.basis @ m, self.basis @ (self.gen @ m)

    __call__ = point


@dataclass(frozen=True)
class Stiefel(Manifold):
    """Orthonormal n x k frames with the canonical metric."""

    n: int
    k: int

    kind = "stiefel"

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"stiefel needs 1 <= k <= n, got n={self.n}, k={self.k}")

    @property
    def shape(self):
        return (self.n, self.k)

    @property
    def intrinsic_dim(self):
        return self.k * (self.k - 1) // 2 + self.k * (self.n - self.k)

    def constraint_violation(self, x):
        return float(np.max(np.abs(x.T @ x - np.eye(self.k))))

    def tangent_violation(self, x, v):
        s = x.T @ v
        return float(np.max(np.abs(s + s.T)))

    def inner(self, x, u, v):
        # Tr(u^T (I - x x^T / 2) v)
        return float(np.vdot(u, v) - 0.5 * np.vdot(x.T @ u, x.T @ v))

    def tangent_from_coords(self, x, c):
        c = np.asarray(c, dtype=float)
        n, k = self.n, self.k
        m = k * (k - 1) // 2
        pi = _skew_from_upper(c[:m], k)
        sigma = c[m:].reshape(n - k, k)
        return x @ pi + orthonormal_complement(x) @ sigma

    def random_tangent(self, x, rng):
        # Same law as tangent_from_coords with Gaussian coordinates: the
        # projected ambient Gaussian replaces the explicit complement basis.
        k = self.k
        pi = _skew_from_upper(rng.standard_normal(k * (k - 1) // 2), k)
        g = rng.standard_normal(self.shape)
        return x @ pi + (g - x @ (x.T @ g))

    def proj_tangent(self, x, a):
        a = np.asarray(a, dtype=float)
        s = x.T @ a
        return a - x @ (0.5 * (s + s.T))

    def curve(self, x, v):
        return _StiefelGeodesic(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    def project(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {a.shape}")
        return _polar(a)


# ---------------------------------------------------------------------------
# Grassmann manifold


class _GrassmannGeodesic(GeodesicCurve):
    def __init__(self, gamma, delta):
        u, d, v = compact_svd(delta)
        self.gv = gamma @ v
        self.u = u
        self.d = d
        self.vt = v.T

    def point(self, t):
        a = self.d * t
        return (self.gv * np.cos(a) + self.u * np.sin(a)) @ self.vt

    def point_velocity(self, t):
        a = self.d * t
        c, s = np.cos(a), np.sin(a)
        y = (self.gv * c + self.u * s) @ self.vt
        dy = (self.u * (self.d * c) - self.gv * (self.d * s)) @ self.vt
        return y, dy

    __call__ = point


@dataclass(frozen=True)
class Grassmann(Manifold):
    """k-dimensional subspaces of R^n, represented by orthonormal bases."""

    n: int
    k: int

    kind = "grassmann"

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"grassmann needs 1 <= k <= n, got n={self.n}, k={self.k}")

    @property
    def shape(self):
        return (self.n, self.k)

    @property
    def intrinsic_dim(self):
        return self.k * (self.n - self.k)

    def constraint_violation(self, x):
        return float(np.max(np.abs(x.T @ x - np.eye(self.k))))

    def tangent_violation(self, x, v):
        return float(np.max(np.abs(x.T @ v)))

    def tangent_from_coords(self, x, c):
        sigma = np.asarray(c, dtype=float).reshape(self.n - self.k, self.k)
        return orthonormal_complement(x) @ sigma

    def random_tangent(self, x, rng):
        g = rng.standard_normal(self.shape)
        return g - x @ (x.T @ g)

    def proj_tangent(self, x, a):
        a = np.asarray(a, dtype=float)
        return a - x @ (x.T @ a)

    def curve(self, x, v):
        return _GrassmannGeodesic(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    def project(self, a):
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ValueError(f"expected shape {self.shape}, got {a.shape}")
        return _polar(a)

    def point_distance(self, x, y):
        """Max-norm distance between the orthogonal projectors."""
        return float(np.max(np.abs(x @ x.T - y @ y.T)))


def make_manifold(kind, n=None, k=None):
    """Build a manifold from a descriptor.

    ``n`` is the ambient dimension for every kind, so a sphere with ``n = 3``
    is S^2. ``k`` is only used by stiefel and grassmann.
    """
    if kind == "euclidean":
        return Euclidean(int(n))
    if kind == "sphere":
        return Sphere(int(n) - 1)
    if kind == "stiefel":
        return Stiefel(int(n), int(k))
    if kind == "grassmann":
        return Grassmann(int(n), int(k))
    raise ValueError(f"unknown manifold kind {kind!r}")
