"""OLS trend models with an ONI covariate, break-date search and
information-criterion model selection.

The time regressor is ``t / n`` for ``t = 1..n`` so the quadratic column
stays well conditioned; forecasts continue it as ``(n + h) / n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, NumericalError
from .ingest import AlignedPanel
from .series import MonthDate, MonthlySeries

LINEAR, QUADRATIC, BROKEN = "linear", "quadratic", "broken"
TREND_NAMES = (LINEAR, QUADRATIC, BROKEN)
DEFAULT_TRIM = 0.15
MIN_SIDE_MONTHS = 24

_COLUMNS = {
    LINEAR: ("const", "t", "oni"),
    QUADRATIC: ("const", "t", "t^2", "oni"),
    BROKEN: ("const", "t", "break", "oni"),
}


@dataclass(frozen=True)
class TrendKind:
    """``linear``, ``quadratic`` or ``broken``; a broken trend carries the
    last month before the level shift (``None`` means "to be estimated")."""

    name: str
    break_date: MonthDate | None = None

    def __post_init__(self):
        if self.name not in TREND_NAMES:
            raise DomainError(f"unknown trend kind {self.name!r}; expected one of {TREND_NAMES}")
        if self.break_date is not None and self.name != BROKEN:
            raise DomainError(f"{self.name} trend takes no break date")

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def quadratic(cls):
        return cls(QUADRATIC)

    @classmethod
    def broken(cls, break_date: MonthDate | None = None):
        return cls(BROKEN, break_date)

    @property
    def columns(self):
        return _COLUMNS[self.name]

    def __str__(self):
        if self.name == BROKEN and self.break_date is not None:
            return f"broken@{self.break_date}"
        return self.name


def _time(n: int, positions) -> np.ndarray:
    return np.asarray(positions, dtype=np.float64) / n


def _design(kind: TrendKind, n: int, positions, oni, break_pos: int | None) -> np.ndarray:
    t = _time(n, positions)
    cols = [np.ones_like(t), t]
    if kind.name == QUADRATIC:
        cols.append(t * t)
    elif kind.name == BROKEN:
        cols.append((np.asarray(positions) > break_pos).astype(np.float64))
    cols.append(np.asarray(oni, dtype=np.float64))
    return np.column_stack(cols)


def _break_position(kind: TrendKind, start: MonthDate, n: int) -> int:
    """1-based position of the break month; indicator is 1 for positions after it."""
    if kind.break_date is None:
        raise DomainError("broken trend needs a break date (see estimate_break)")
    p = kind.break_date - start + 1
    if not 1 <= p <= n - 1:
        raise DomainError(f"break {kind.break_date} not strictly inside {start}..{start.shift(n - 1)}")
    return p


def build_design(kind: TrendKind, panel: AlignedPanel) -> np.ndarray:
    """Regressor matrix: ``[1, t, ONI]``, ``[1, t, t^2, ONI]`` or
    ``[1, t, I(t > t0), ONI]`` with ``t`` normalised to ``(0, 1]``."""
    n = len(panel)
    if n == 0:
        raise DomainError("empty panel")
    bp = _break_position(kind, panel.start, n) if kind.name == BROKEN else None
    return _design(kind, n, np.arange(1, n + 1), panel.x_oni, bp)


@dataclass(frozen=True, eq=False)
class TrendFit:
    """A fitted trend regression.

    ``k`` counts the regression coefficients plus the error variance.
    ``cov`` is ``sigma2 * inv(X'X)`` with ``sigma2 = RSS / (n - p)``; the
    log-likelihood uses the ML variance ``RSS / n``.
    """

    kind: TrendKind
    beta: np.ndarray
    cov: np.ndarray
    sigma2: float
    residuals: MonthlySeries
    loglik: float
    aic: float
    bic: float
    n: int
    k: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def rss(self) -> float:
        return float(np.dot(self.residuals.values, self.residuals.values))

    @property
    def start(self) -> MonthDate:
        return self.residuals.start

    @property
    def end(self) -> MonthDate:
        return self.residuals.end

    @property
    def gamma(self) -> float:
        """ONI coefficient (last entry of ``beta``)."""
        return float(self.beta[-1])

    def per_decade(self) -> dict:
        """Slope (and curvature) in degC per decade (per decade squared)."""
        scale = 120.0 / self.n
        out = {"slope": float(self.beta[1] * scale)}
        if self.kind.name == QUADRATIC:
            out["curvature"] = float(self.beta[2] * scale * scale)
        if self.kind.name == BROKEN:
            out["shift"] = float(self.beta[2])
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.name,
            "break_date": None if self.kind.break_date is None else str(self.kind.break_date),
            "columns": list(self.kind.columns),
            "beta": [float(v) for v in self.beta],
            "cov": [[float(v) for v in row] for row in self.cov],
            "sigma2": float(self.sigma2),
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "n": int(self.n),
            "k": int(self.k),
            "start": str(self.start),
            "residuals": [float(v) for v in self.residuals.values],
            "per_decade": self.per_decade(),
            "diagnostics": dict(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrendFit":
        bd = doc.get("break_date")
        kind = TrendKind(doc["kind"], None if bd is None else MonthDate.parse(bd))
        res = MonthlySeries(MonthDate.parse(doc["start"]), doc["residuals"], label="residuals")
        return cls(
            kind,
            np.asarray(doc["beta"], dtype=np.float64),
            np.asarray(doc["cov"], dtype=np.float64),
            float(doc["sigma2"]),
            res,
            float(doc["loglik"]),
            float(doc["aic"]),
            float(doc["bic"]),
            int(doc["n"]),
            int(doc["k"]),
            dict(doc.get("diagnostics", {})),
        )


def gaussian_loglik(rss: float, n: int) -> float:
    """Profile Gaussian log-likelihood at the ML variance ``rss / n``."""
    with np.errstate(divide="ignore"):
        return float(-0.5 * n * (math.log(2.0 * math.pi) + np.log(rss / n) + 1.0)) if rss > 0 else math.inf


def information_criteria(loglik: float, k: int, n: int) -> tuple[float, float]:
    return 2.0 * k - 2.0 * loglik, k * math.log(n) - 2.0 * loglik


def _collinear_column(X: np.ndarray, names) -> str:
    for j in range(1, X.shape[1] + 1):
        if np.linalg.matrix_rank(X[:, :j]) < j:
            return names[j - 1]
    return names[-1]


def fit_ols(X: np.ndarray, y, kind: TrendKind, start: MonthDate = MonthDate(1, 1)) -> TrendFit:
    """Least-squares fit of ``y`` on ``X``.

    Raises
    ------
    NumericalError
        If ``X`` is rank deficient; the message names the first column that
        is a combination of the preceding ones.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise DomainError(f"y has shape {y.shape}, expected ({n},)")
    if n <= p:
        raise DomainError(f"need more rows ({n}) than columns ({p})")
    names = list(kind.columns) if len(kind.columns) == p else [f"x{j}" for j in range(p)]
    if np.linalg.matrix_rank(X) < p:
        raise NumericalError(f"design matrix is rank deficient: column {_collinear_column(X, names)!r} is collinear")
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - p)
    Rinv = np.linalg.solve(R, np.eye(p))
    cov = sigma2 * (Rinv @ Rinv.T)
    cov = 0.5 * (cov + cov.T)
    loglik = gaussian_loglik(rss, n)
    k = p + 1
    aic, bic = information_criteria(loglik, k, n)
    return TrendFit(kind, beta, cov, sigma2, MonthlySeries(start, resid, label="residuals"),
                    loglik, aic, bic, n, k)


def fit_trend(kind: TrendKind, panel: AlignedPanel) -> TrendFit:
    return fit_ols(build_design(kind, panel), panel.y, kind, panel.start)


def break_ssr_profile(panel: AlignedPanel, trim: float = DEFAULT_TRIM):
    """Residual sum of squares of the broken-trend fit for every candidate
    break position in the trimmed interior.

    Returns ``(positions, ssr)`` with 1-based break positions. Uses the
    Frisch-Waugh partialling-out of ``[1, t, ONI]`` with suffix sums, so
    the whole profile costs O(n).
    """
    n = len(panel)
    if not 0 < trim < 0.5:
        raise DomainError(f"trim must lie in (0, 0.5), got {trim}")
    lo = max(int(math.ceil(trim * n)), MIN_SIDE_MONTHS)
    hi = min(int(math.floor((1 - trim) * n)), n - MIN_SIDE_MONTHS)
    if hi < lo:
        raise DomainError(f"sample of {n} months too short for a break search with trim {trim}")
    Z = _design(TrendKind.linear(), n, np.arange(1, n + 1), panel.x_oni, None)
    y = panel.y
    if np.linalg.matrix_rank(Z) < Z.shape[1]:
        raise NumericalError(f"break search: column {_collinear_column(Z, TrendKind.linear().columns)!r} is collinear")
    Q, R = np.linalg.qr(Z)
    ry = y - Q @ (Q.T @ y)
    base = float(ry @ ry)
    # indicator d_p = 1{position > p}; Z'd_p and r_y'd_p are suffix sums
    Zs = np.cumsum(Z[::-1], axis=0)[::-1]          # Zs[i] = sum_{j>=i} Z[j]
    rs = np.cumsum(ry[::-1])[::-1]
    positions = np.arange(lo, hi + 1)
    Zd = Zs[positions]                              # rows after position p (0-based index p)
    ryd = rs[positions]
    cnt = (n - positions).astype(np.float64)
    W = np.linalg.solve(R.T, Zd.T)                  # R^-T Z'd
    dMd = cnt - np.einsum("ij,ij->j", W, W)
    with np.errstate(divide="ignore", invalid="ignore"):
        ssr = base - np.where(dMd > 1e-12, ryd * ryd / dMd, 0.0)
    return positions, ssr


def estimate_break(panel: AlignedPanel, trim: float = DEFAULT_TRIM) -> MonthDate:
    """Break month minimising the broken-trend SSR; earliest on ties."""
    positions, ssr = break_ssr_profile(panel, trim)
    best = int(np.argmin(ssr))
    return panel.start.shift(int(positions[best]) - 1)


def choose_by_criteria(candidates, label=lambda c: str(c)):
    """Lowest AIC wins; if AIC and BIC pick different candidates, the BIC
    winner is returned and the disagreement recorded.

    Returns ``(winner, diagnostics)``.
    """
    candidates = list(candidates)
    if not candidates:
        raise DomainError("no candidates to select from")
    by_aic = min(candidates, key=lambda c: c.aic)
    by_bic = min(candidates, key=lambda c: c.bic)
    diag = {
        "criteria": {label(c): {"aic": float(c.aic), "bic": float(c.bic)} for c in candidates},
        "aic_winner": label(by_aic),
        "bic_winner": label(by_bic),
        "criteria_disagree": by_aic is not by_bic,
    }
    return by_bic, diag


def select_model(fits) -> TrendFit:
    """Best trend fit by AIC, deferring to BIC when the two disagree."""
    fits = list(fits)
    if not fits:
        raise DomainError("select_model needs at least one fit")
    n0 = fits[0].n
    if any(f.n != n0 or f.start != fits[0].start for f in fits):
        raise DomainError("fits were estimated on different samples")
    winner, diag = choose_by_criteria(fits, label=lambda f: str(f.kind))
    return replace(winner, diagnostics={**winner.diagnostics, **diag})


def sample_coefficients(fit: TrendFit, rng: np.random.Generator) -> np.ndarray:
    """One draw from ``N(beta, cov)`` through a symmetric eigen-factorisation."""
    cov = np.asarray(fit.cov, dtype=np.float64)
    if not np.all(np.isfinite(cov)):
        raise NumericalError("coefficient covariance is not finite")
    scale = float(np.max(np.abs(cov))) if cov.size else 0.0
    z = rng.standard_normal(len(fit.beta))
    if scale == 0.0:
        return np.array(fit.beta, dtype=np.float64)
    A = None
    for jitter in (0.0, 1e-12):
        w, V = np.linalg.eigh(cov + jitter * scale * np.eye(len(cov)))
        if w.min() >= -1e-10 * scale:
            A = V * np.sqrt(np.clip(w, 0.0, None))
            break
    if A is None:
        raise NumericalError(f"coefficient covariance is not positive semi-definite (min eigenvalue {w.min():.3g})")
    return fit.beta + A @ z


def trend_mean_path(fit: TrendFit, beta, horizon: int, oni_path) -> MonthlySeries:
    """Deterministic part ``X beta`` for the ``horizon`` months after the
    sample, with the supplied future ONI values."""
    beta = np.asarray(beta, dtype=np.float64)
    oni = np.asarray(getattr(oni_path, "values", oni_path), dtype=np.float64)
    if beta.shape != (len(fit.kind.columns),):
        raise DomainError(f"beta has {beta.size} entries, {fit.kind} needs {len(fit.kind.columns)}")
    if oni.shape != (horizon,):
        raise DomainError(f"ONI path has {oni.size} months, horizon is {horizon}")
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    n = fit.n
    bp = _break_position(fit.kind, fit.start, n) if fit.kind.name == BROKEN else None
    X = _design(fit.kind, n, np.arange(n + 1, n + horizon + 1), oni, bp)
    return MonthlySeries(fit.end.shift(1), X @ beta, label=f"trend mean ({fit.kind})")
