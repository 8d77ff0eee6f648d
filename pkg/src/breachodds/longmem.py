"""Fractional differencing, exact local Whittle estimation of ``d`` and
conditional forecasts of a fractionally integrated error term."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from . import kernels
from .errors import DomainError, NumericalError

D_INTERVAL = (-0.5, 1.0)
DEFAULT_BANDWIDTH_EXPONENT = 0.65
DEFAULT_TRUNCATION = 1000
# direct convolution below this length, FFT above
_DIRECT_MAX = 2048


@dataclass(frozen=True)
class MemoryEstimate:
    d: float
    m: int
    objective: float
    search_interval: tuple

    def to_dict(self):
        out = asdict(self)
        out["search_interval"] = list(self.search_interval)
        return out

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["d"]), int(doc["m"]), float(doc["objective"]), tuple(doc["search_interval"]))


def fracdiff_coefficients(d: float, n: int) -> np.ndarray:
    """First ``n`` coefficients of the binomial expansion of ``(1-L)^d``."""
    if n <= 0:
        return np.empty(0)
    j = np.arange(1, n)
    out = np.empty(n)
    out[0] = 1.0
    out[1:] = np.cumprod((j - 1 - d) / j)
    return out


def fracdiff(x, d: float) -> np.ndarray:
    """Apply ``(1-L)^d`` to ``x``, truncating the filter at the sample start."""
    x = np.asarray(x, dtype=np.float64)
    if d == 0:
        return x.copy()
    T = x.size
    pi = fracdiff_coefficients(d, T)
    if T <= _DIRECT_MAX:
        return np.convolve(x, pi)[:T]
    return signal.fftconvolve(x, pi)[:T]


def ar_coefficients(d: float, n: int) -> np.ndarray:
    """``phi_1..phi_n`` of the AR(infinity) form ``y_t = sum phi_j y_{t-j} + e_t``."""
    return -fracdiff_coefficients(d, n + 1)[1:]


def periodogram(x) -> np.ndarray:
    """``I(lambda_k) = |sum_t x_t exp(-i lambda_k t)|^2 / (2 pi T)`` for
    ``k = 1 .. (T-1)//2``."""
    x = np.asarray(x, dtype=np.float64)
    T = x.size
    if T < 4:
        raise DomainError(f"periodogram needs T >= 4, got {T}")
    X = np.fft.rfft(x)[1:(T - 1) // 2 + 1]
    return (X.real ** 2 + X.imag ** 2) / (2.0 * np.pi * T)


def fourier_frequencies(T: int, m: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(1, m + 1) / T


def default_bandwidth(T: int, exponent: float = DEFAULT_BANDWIDTH_EXPONENT) -> int:
    return int(math.floor(T ** exponent))


def elw_objective(d: float, x, m: int) -> float:
    """Exact local Whittle objective at ``d`` over the first ``m`` frequencies."""
    x = np.asarray(x, dtype=np.float64)
    T = x.size
    I = periodogram(fracdiff(x, d))[:m]
    G = I.mean()
    if not (np.isfinite(G) and G > 0):
        raise NumericalError(f"ELW objective undefined at d={d}: mean periodogram {G}")
    loglam = np.log(fourier_frequencies(T, m))
    return float(np.log(G) - 2.0 * d * loglam.mean())


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    return 0.5 * (a + b)


def estimate_d(x, m: int | None = None, interval=D_INTERVAL, tol: float = 1e-5) -> MemoryEstimate:
    """Exact local Whittle estimate of the fractional integration order.

    Parameters
    ----------
    x : array_like
        Series of length ``T >= 64``.
    m : int, optional
        Bandwidth; defaults to ``floor(T**0.65)``.
    interval : (float, float)
        Search interval for ``d``.
    tol : float
        Width of the final golden-section bracket.
    """
    x = np.asarray(x, dtype=np.float64)
    T = x.size
    if T < 64:
        raise DomainError(f"estimate_d needs T >= 64, got {T}")
    if m is None:
        m = default_bandwidth(T)
    if not 1 <= m < T / 2:
        raise DomainError(f"bandwidth m={m} must satisfy 1 <= m < T/2 = {T / 2}")
    if not np.all(np.isfinite(x)):
        raise NumericalError("estimate_d: non-finite input")
    lo, hi = map(float, interval)
    d = _golden_section(lambda v: elw_objective(v, x, m), lo, hi, tol)
    return MemoryEstimate(float(d), int(m), elw_objective(d, x, m), (lo, hi))


def innovation_variance(residuals, d: float) -> float:
    """Variance of the fractionally differenced (whitened) residuals."""
    return float(np.var(fracdiff(residuals, d)))


def forecast_error(residuals, d: float, sigma2: float, horizon: int, truncation: int | None = None,
                   rng: np.random.Generator | None = None, innovations=None) -> np.ndarray:
    """Simulate the long-memory error ``horizon`` months past the residuals.

    Each month's conditional mean is the truncated AR(infinity) combination
    of the preceding ``truncation`` values (observed residuals, then already
    simulated months); a ``N(0, sigma2)`` innovation is added.

    Innovations are drawn from ``rng`` as ``horizon`` standard normals
    unless passed explicitly (already scaled) via ``innovations``.
    """
    if not -0.5 < d <= 1.0:
        raise DomainError(f"forecast_error needs d in (-0.5, 1], got {d}")
    if horizon <= 0:
        return np.empty(0)
    r = np.asarray(residuals, dtype=np.float64)
    if truncation is None:
        truncation = min(DEFAULT_TRUNCATION, r.size)
    if not 1 <= truncation <= r.size:
        raise DomainError(f"truncation {truncation} must lie in 1..{r.size}")
    if innovations is None:
        if sigma2 < 0:
            raise DomainError(f"negative innovation variance {sigma2}")
        if rng is None:
            raise DomainError("forecast_error needs an rng or explicit innovations")
        innovations = math.sqrt(sigma2) * rng.standard_normal(horizon)
    else:
        innovations = np.asarray(innovations, dtype=np.float64)
        if innovations.size != horizon:
            raise DomainError(f"{innovations.size} innovations for horizon {horizon}")
    phi = ar_coefficients(d, truncation)
    return kernels.ar_forecast(r[-truncation:], phi, innovations)


def forecast_mean(residuals, d: float, horizon: int, truncation: int | None = None) -> np.ndarray:
    """Conditional expectation path (zero innovations)."""
    return forecast_error(residuals, d, 0.0, horizon, truncation, innovations=np.zeros(max(horizon, 0)))
