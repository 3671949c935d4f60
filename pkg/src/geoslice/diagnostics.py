"""Effective sample size of a scalar trace and repetition summaries."""
from dataclasses import dataclass
from typing import List

import numpy as np

MIN_LENGTH = 10
# ESS values are clamped to [1, ESS_CAP * N].
ESS_CAP = 1.0


class DegenerateSeriesError(ValueError):
    pass


class SeriesTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class EssResult:
    ess: float
    superefficient: bool
    iact: float


@dataclass(frozen=True)
class EssSummary:
    per_run_ess: List[float]
    min: float
    median: float
    max: float
    n_samples: int


def trace_statistic(chain, target=None):
    """Log unnormalised density along the chain.

    ``run_chain`` already records it; with a target the values are
    recomputed from the states instead.
    """
    if target is None:
        return np.asarray(chain.log_p, dtype=float).copy()
    return np.array([target.log_p(s) for s in chain.states])


def autocorrelation(series):
    """Normalised autocorrelation at all lags (FFT, biased estimator)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0:
        raise DegenerateSeriesError("series has zero variance")
    return acov / acov[0]


def ess_details(series):
    """Initial positive sequence estimate.

    Pairs ``rho[2j] + rho[2j+1]`` are summed while positive, giving the
    integrated autocorrelation time ``-1 + 2 * sum``.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < MIN_LENGTH:
        raise SeriesTooShortError(f"need at least {MIN_LENGTH} values, got {n}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSeriesError("series has non-finite values")
    if np.ptp(x) == 0.0:
        raise DegenerateSeriesError("series is constant")
    rho = autocorrelation(x)
    npairs = n // 2
    pairs = rho[: 2 * npairs : 2] + rho[1 : 2 * npairs : 2]
    nonpos = np.nonzero(pairs <= 0.0)[0]
    stop = nonpos[0] if nonpos.size else npairs
    iact = -1.0 + 2.0 * float(np.sum(pairs[:stop]))
    cap = ESS_CAP * n
    if iact <= 0.0 or n / iact > cap:
        return EssResult(cap, True, iact)
    return EssResult(max(n / iact, 1.0), False, iact)


def ess(series):
    return ess_details(series).ess


def summarize_repetitions(per_run_ess):
    """Min, lower-middle median and max of per-run ESS values."""
    vals = sorted(float(v) for v in per_run_ess)
    if not vals:
        raise ValueError("no repetitions to summarise")
    return EssSummary(
        per_run_ess=[float(v) for v in per_run_ess],
        min=vals[0],
        median=vals[(len(vals) - 1) // 2],
        max=vals[-1],
        n_samples=len(vals),
    )
