"""Markov kernels on manifolds and a chain driver.

GSS is the geodesic slice sampler. RMH, GeoRMH and GeoMALA are the baselines
it is benchmarked against; RMH is biased by construction and kept as-is.
Every step kernel takes a ``numpy.random.Generator`` and touches no other
state, so a chain is reproducible from its seed.
"""
from dataclasses import dataclass, field
from typing import Optional
import math
import time

import numpy as np

from .manifolds import SingularProjectionError, Grassmann, Stiefel
from .slice1d import (
    DEFAULT_MAX_SHRINK_ATTEMPTS,
    ShrinkNonTermination,
    StepOutParams,
    shrink,
    step_out,
)

TARGET_ACCEPT = 0.234
ADAPT_EVERY = 20
ADAPT_GAIN = 0.5
STEP_CLAMP = (1e-8, 1e4)
INITIAL_STEP = 0.01

SAMPLERS = ("gss", "rmh", "geormh", "geomala")


class GssStepError(RuntimeError):
    """Shrinkage failed inside a GSS transition; carries the offending state."""

    def __init__(self, cause, record):
        super().__init__(f"{cause}; state={record}")
        self.cause = cause
        self.record = record


class ChainError(RuntimeError):
    def __init__(self, cause, partial):
        super().__init__(f"chain aborted after {len(partial.states)} states: {cause}")
        self.cause = cause
        self.partial = partial


@dataclass(frozen=True)
class GssConfig:
    step_out: StepOutParams
    max_shrink_attempts: int = DEFAULT_MAX_SHRINK_ATTEMPTS

    def __post_init__(self):
        if self.max_shrink_attempts < 1:
            raise ValueError("max_shrink_attempts must be positive")


def _log_uniform(rng):
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return math.log(u)


class _LevelSet:
    """Membership in the slice along one geodesic, remembering the last point."""

    __slots__ = ("curve", "log_p", "log_t", "last")

    def __init__(self, curve, log_p, log_t):
        self.curve = curve
        self.log_p = log_p
        self.log_t = log_t
        self.last = None

    def __call__(self, alpha):
        y = self.curve(alpha)
        self.last = (alpha, y)
        return self.log_p(y) > self.log_t


def gss_step(x, target, cfg, rng, log_px=None):
    """One geodesic slice sampling transition.

    Returns ``(y, log_t, attempts)``: the new point (reprojected onto the
    manifold), the log of the sampled level and the number of shrinkage
    proposals.
    """
    man = target.manifold
    if log_px is None:
        log_px = target.log_p(x)
    log_t = log_px + _log_uniform(rng)
    v = man.sample_unit_tangent(x, rng)
    level = _LevelSet(man.curve(x, v), target.log_p, log_t)
    iv = step_out(0.0, level, cfg.step_out, rng)
    try:
        out = shrink(level, iv, rng, cfg.max_shrink_attempts)
    except ShrinkNonTermination as exc:
        record = {"x": man.to_record(x), "log_t": log_t, "v": np.asarray(v).ravel().tolist(),
                  "interval": [iv.ell, iv.r]}
        raise GssStepError(exc, record) from exc
    alpha, y = level.last
    if alpha != out.theta:
        y = level.curve(out.theta)
    return man.project(y), log_t, out.attempts


def adapt_step_size(h, recent_accept_rate, target_rate=TARGET_ACCEPT, gain=ADAPT_GAIN):
    """Multiplicative Robbins-Monro style update towards ``target_rate``."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    h = h * math.exp(gain * (recent_accept_rate - target_rate))
    return min(max(h, STEP_CLAMP[0]), STEP_CLAMP[1])


def _mh_accept(log_ratio, rng):
    # Accept iff Upsilon < p(y)/p(x), Upsilon ~ Unif[0, 1).
    return rng.random() < math.exp(min(log_ratio, 0.0))


def rmh_step(x, target, h, rng, log_px=None):
    """Projected random walk Metropolis on the Stiefel manifold (biased).

    Returns ``(y, accepted, log_py)``.
    """
    man = target.manifold
    if not isinstance(man, Stiefel):
        raise ValueError("rmh is defined on the Stiefel manifold")
    if h < 0:
        raise ValueError("step size must be nonnegative")
    if log_px is None:
        log_px = target.log_p(x)
    g = rng.standard_normal(man.shape)
    try:
        prop = man.project(x + h * g)
    except SingularProjectionError:
        return x, False, log_px
    log_pp = target.log_p(prop)
    if _mh_accept(log_pp - log_px, rng):
        return prop, True, log_pp
    return x, False, log_px


def geormh_step(x, target, h, rng, log_px=None):
    """Metropolis with a geodesic proposal gamma_(x, V)(h), V Gaussian on T_x M.

    Returns ``(y, accepted, log_py)``.
    """
    man = target.manifold
    if not h > 0:
        raise ValueError("step size must be positive")
    if log_px is None:
        log_px = target.log_p(x)
    while True:
        vel = man.random_tangent(x, rng)
        speed = man.norm(x, vel)
        if speed > 0.0:
            break
    prop = man.project(man.geodesic(x, vel / speed, h * speed))
    log_pp = target.log_p(prop)
    if _mh_accept(log_pp - log_px, rng):
        return prop, True, log_pp
    return x, False, log_px


def geomala_step(x, target, h, rng, log_px=None):
    """Geodesic MALA on the Grassmann manifold: one leapfrog step plus MH.

    Returns ``(y, accepted, log_py)``.
    """
    man = target.manifold
    if not isinstance(man, Grassmann):
        raise ValueError("geomala is defined on the Grassmann manifold")
    grad = target.euclid_grad_log_p
    if grad is None:
        raise ValueError("geomala needs a target with euclid_grad_log_p")
    if not h > 0:
        raise ValueError("step size must be positive")
    if log_px is None:
        log_px = target.log_p(x)

    v_bar = man.proj_tangent(x, rng.standard_normal(man.shape))
    e0 = log_px - 0.5 * float(np.vdot(v_bar, v_bar))
    v_half = man.proj_tangent(x, v_bar + 0.5 * h * grad(x))
    x_new, v_new = man.geodesic_with_velocity(x, v_half, h)
    v_new = man.proj_tangent(x_new, v_new)
    v_star = man.proj_tangent(x_new, v_new + 0.5 * h * grad(x_new))
    log_pnew = target.log_p(x_new)
    e1 = log_pnew - 0.5 * float(np.vdot(v_star, v_star))
    if _mh_accept(e1 - e0, rng):
        y = man.project(x_new)
        return y, True, target.log_p(y)
    return x, False, log_px


@dataclass(frozen=True)
class SamplerSpec:
    """Which kernel to run and its hyperparameters.

    ``w``, ``m`` and ``max_shrink_attempts`` apply to GSS; ``step`` is the
    initial h_a for RMH/GeoRMH (adapted when ``adapt`` is set) or the fixed
    h for GeoMALA.
    """

    name: str
    w: float = 1.0
    m: int = 1
    max_shrink_attempts: int = DEFAULT_MAX_SHRINK_ATTEMPTS
    step: float = INITIAL_STEP
    adapt: bool = True

    def __post_init__(self):
        if self.name not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.name!r}; expected one of {SAMPLERS}")

    def gss_config(self):
        return GssConfig(StepOutParams(self.w, self.m), self.max_shrink_attempts)


@dataclass
class ChainResult:
    """A sampled path with per-step instrumentation.

    ``states[0]`` is the initial point; entry ``i > 0`` of ``levels``,
    ``shrink_attempts`` and ``accept_flags`` describes the transition that
    produced ``states[i]`` (entry 0 holds placeholders).
    """

    states: np.ndarray
    log_p: np.ndarray
    levels: Optional[np.ndarray] = None
    shrink_attempts: Optional[np.ndarray] = None
    accept_flags: Optional[np.ndarray] = None
    step_sizes: Optional[np.ndarray] = None
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)


def run_chain(target, spec, x0, n_steps, rng):
    """Run ``n_steps`` states (including ``x0``) of the chosen kernel."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    man = target.manifold
    x = man.check_point(x0, tol=1e-7)
    lp = target.log_p(x)
    states = np.empty((n_steps,) + man.shape)
    log_ps = np.empty(n_steps)
    states[0], log_ps[0] = x, lp
    gss = spec.name == "gss"
    levels = np.full(n_steps, np.nan) if gss else None
    attempts = np.zeros(n_steps, dtype=np.int64) if gss else None
    accepts = None if gss else np.zeros(n_steps, dtype=bool)
    steps = None if gss else np.full(n_steps, np.nan)
    meta = {"sampler": spec.name}
    if spec.name == "rmh":
        meta["biased"] = True
        meta["warning"] = "projected random walk with an uncorrected MH ratio; biased"

    if gss:
        cfg = spec.gss_config()
    else:
        kernel = {"rmh": rmh_step, "geormh": geormh_step, "geomala": geomala_step}[spec.name]
        h = spec.step
        adapt = spec.adapt and spec.name in ("rmh", "geormh")
        window = 0

    t0 = time.perf_counter()
    i = 1
    try:
        for i in range(1, n_steps):
            if gss:
                x, log_t, att = gss_step(x, target, cfg, rng, log_px=lp)
                lp = target.log_p(x)
                levels[i], attempts[i] = log_t, att
            else:
                x, acc, lp = kernel(x, target, h, rng, log_px=lp)
                accepts[i], steps[i] = acc, h
                window += acc
                if adapt and i % ADAPT_EVERY == 0:
                    h = adapt_step_size(h, window / ADAPT_EVERY)
                    window = 0
            states[i], log_ps[i] = x, lp
    except Exception as exc:
        partial = ChainResult(states[:i], log_ps[:i],
                              None if levels is None else levels[:i],
                              None if attempts is None else attempts[:i],
                              None if accepts is None else accepts[:i],
                              None if steps is None else steps[:i],
                              time.perf_counter() - t0, meta)
        raise ChainError(exc, partial) from exc
    wall = time.perf_counter() - t0
    if accepts is not None and n_steps > 1:
        meta["accept_rate"] = float(np.mean(accepts[1:]))
    if attempts is not None and n_steps > 1:
        meta["mean_shrink_attempts"] = float(np.mean(attempts[1:]))
    return ChainResult(states, log_ps, levels, attempts, accepts, steps, wall, meta)


def ideal_slice_1d_step(x, log_p_1d, level_set_sampler, rng):
    """Idealised slice sampler on R: t ~ Unif(0, p(x)), then y ~ Unif(L(t)).

    ``level_set_sampler(log_t, rng)`` must draw exactly uniformly from
    ``{y : log p(y) > log_t}``.
    """
    log_t = log_p_1d(x) + _log_uniform(rng)
    return level_set_sampler(log_t, rng)
