"""Stepping-out and shrinkage on the real line for an arbitrary target set.

Both procedures only see the set through a membership predicate
``member(alpha) -> bool``, so the same code serves the geodesic sampler (where
the set is a parameterised slice of a level set) and the Monte-Carlo checks of
their distributional properties.
"""
from dataclasses import dataclass

DEFAULT_MAX_SHRINK_ATTEMPTS = 10_000


@dataclass(frozen=True)
class StepOutParams:
    """Interval width ``w`` and total step budget ``m``."""

    w: float
    m: int = 1

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"w must be positive, got {self.w}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class Interval:
    ell: float
    r: float

    @property
    def width(self):
        return self.r - self.ell

    def __contains__(self, a):
        return self.ell < a < self.r


@dataclass(frozen=True)
class ShrinkOutcome:
    theta: float
    attempts: int


class ShrinkNonTermination(RuntimeError):
    def __init__(self, attempts, interval):
        super().__init__(
            f"shrinkage did not hit the target set after {attempts} attempts "
            f"on ({interval.ell!r}, {interval.r!r})")
        self.attempts = attempts
        self.interval = interval


def step_out(theta0, member, params, rng):
    """Randomly positioned interval around ``theta0`` expanded into the set.

    The budget of ``m + 1`` endpoint positions is split uniformly at random
    into a left and a right share before expanding.
    """
    w, m = params.w, params.m
    u = w * rng.random()
    ell = theta0 - u
    r = ell + w
    iota = int(rng.integers(1, m + 1))
    i = 2
    while i <= iota and member(ell):
        ell -= w
        i += 1
    j = 2
    while j <= m + 1 - iota and member(r):
        r += w
        j += 1
    return Interval(ell, r)


def stepout_law_samples(theta0, member, params, rng, count):
    return [step_out(theta0, member, params, rng) for _ in range(count)]


def shrink(member, iv, rng, max_attempts=DEFAULT_MAX_SHRINK_ATTEMPTS):
    """Shrinkage on the circle obtained by gluing the ends of ``[ell, r)``.

    The current point is 0. Positions are tracked in the wrapped coordinate
    ``h`` in ``(0, r - ell)``, where ``h > r`` maps back to ``h - (r - ell)``.
    The bracket ``(0, h_max) U [h_min, r - ell)`` always contains the current
    point and shrinks after every rejection.
    """
    ell, r = iv.ell, iv.r
    span = r - ell
    h = span * rng.random()
    theta = h - span if h > r else h
    h_min = h_max = h
    attempts = 1
    while not member(theta):
        if attempts >= max_attempts:
            raise ShrinkNonTermination(attempts, iv)
        if h_min <= h < span:
            h_min = h
        else:
            h_max = h
        # One uniform over the total bracket length, split into the two pieces.
        z = (h_max + (span - h_min)) * rng.random()
        h = z if z < h_max else h_min + (z - h_max)
        theta = h - span if h > r else h
        attempts += 1
    return ShrinkOutcome(theta, attempts)
