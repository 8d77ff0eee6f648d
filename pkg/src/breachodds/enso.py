"""Markov-switching mean/variance model for the Oceanic Nino Index.

``ONI_t = mu[s_t] + e_t`` with ``e_t ~ N(0, sigma2[s_t])`` and ``s_t`` a
first-order Markov chain. Estimation is EM with the Hamilton filter and Kim
smoother; the number of regimes is picked by AIC/BIC over odd candidates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import kernels
from .errors import DomainError, EstimationError, NumericalError
from .series import MonthDate, MonthlySeries
from .trend import choose_by_criteria

MAX_ITER = 500
REL_TOL = 1e-8
N_RESTARTS = 10
VARIANCE_FLOOR = 1e-10
DEFAULT_REGIMES = (3, 5, 7)

_LOG2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class MsModel:
    """Fitted k-regime model; regimes are ordered by descending mean."""

    k: int
    mu: np.ndarray
    sigma2: np.ndarray
    trans: np.ndarray
    loglik: float = math.nan
    aic: float = math.nan
    bic: float = math.nan
    filtered_final: np.ndarray = None
    n_obs: int = 0
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        k = int(self.k)
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        s2 = np.asarray(self.sigma2, dtype=np.float64).reshape(-1)
        P = np.asarray(self.trans, dtype=np.float64)
        ff = (np.full(k, 1.0 / k) if self.filtered_final is None
              else np.asarray(self.filtered_final, dtype=np.float64).reshape(-1))
        if mu.shape != (k,) or s2.shape != (k,) or P.shape != (k, k) or ff.shape != (k,):
            raise DomainError(f"inconsistent shapes for a {k}-regime model")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise DomainError("transition rows must be probability vectors")
        if np.any(s2 < 0):
            raise DomainError("regime variances must be non-negative")
        if np.any(ff < 0) or abs(ff.sum() - 1.0) > 1e-9:
            raise DomainError("filtered_final must be a probability vector")
        object.__setattr__(self, "k", k)
        for name, arr in (("mu", mu), ("sigma2", s2), ("trans", P), ("filtered_final", ff)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_params(self) -> int:
        return n_params(self.k)

    def canonical(self) -> "MsModel":
        """Same model with regimes sorted by descending mean."""
        order = np.argsort(-self.mu, kind="stable")
        return MsModel(self.k, self.mu[order], self.sigma2[order], self.trans[np.ix_(order, order)],
                       self.loglik, self.aic, self.bic, self.filtered_final[order], self.n_obs,
                       dict(self.diagnostics))

    def same_as(self, other: "MsModel") -> bool:
        return (self.k == other.k and np.array_equal(self.mu, other.mu)
                and np.array_equal(self.sigma2, other.sigma2)
                and np.array_equal(self.trans, other.trans)
                and np.array_equal(self.filtered_final, other.filtered_final))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "mu": self.mu.tolist(),
            "sigma2": self.sigma2.tolist(),
            "trans": self.trans.tolist(),
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "filtered_final": self.filtered_final.tolist(),
            "n_obs": int(self.n_obs),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MsModel":
        return cls(int(doc["k"]), doc["mu"], doc["sigma2"], doc["trans"], float(doc["loglik"]),
                   float(doc["aic"]), float(doc["bic"]), doc["filtered_final"], int(doc.get("n_obs", 0)),
                   dict(doc.get("diagnostics", {})))


def n_params(k: int) -> int:
    """k means + k variances + k(k-1) free transition probabilities."""
    return k + k + k * (k - 1)


def stationary_distribution(trans) -> np.ndarray:
    """Solve ``pi P = pi``, ``sum(pi) = 1`` (minimum-norm if not unique)."""
    P = np.asarray(trans, dtype=np.float64)
    k = P.shape[0]
    A = np.vstack([P.T - np.eye(k), np.ones((1, k))])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _log_densities(y, mu, sigma2):
    y = np.asarray(y, dtype=np.float64)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return -0.5 * (_LOG2PI + np.log(sigma2)[None, :] + (y - mu[None, :]) ** 2 / sigma2[None, :])


def _values(data):
    return np.asarray(getattr(data, "values", data), dtype=np.float64)


def hamilton_filter(model: MsModel, data):
    """Filtered regime probabilities and log-likelihood.

    The chain starts from the stationary distribution of ``model.trans``.

    Returns
    -------
    filtered : ndarray, shape (T, k)
    loglik : float
    """
    y = _values(data)
    if y.size == 0:
        raise DomainError("hamilton_filter needs data")
    init = stationary_distribution(model.trans)
    filtered, _, loglik, fail = kernels.hamilton_forward(
        _log_densities(y, model.mu, model.sigma2), model.trans, init)
    if fail >= 0:
        where = data.start.shift(fail) if isinstance(data, MonthlySeries) else f"index {fail}"
        raise NumericalError(f"all regime densities underflow at {where}")
    return filtered, float(loglik)


@dataclass
class _EMRun:
    mu: np.ndarray
    sigma2: np.ndarray
    trans: np.ndarray
    init: np.ndarray
    loglik: float
    trace: list
    iterations: int


class _Degenerate(Exception):
    pass


def em_run(y, mu, sigma2, trans, init=None, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> _EMRun:
    """EM from one starting point.

    The initial-state distribution is a free parameter re-estimated from the
    smoothed first-month probabilities, which keeps every EM step an exact
    maximisation and the likelihood trace non-decreasing.
    """
    y = np.asarray(y, dtype=np.float64)
    mu, s2, P = (np.array(a, dtype=np.float64) for a in (mu, sigma2, trans))
    k = mu.size
    p0 = np.full(k, 1.0 / k) if init is None else np.array(init, dtype=np.float64)
    trace = []
    for _ in range(max_iter):
        filt, pred, ll, fail = kernels.hamilton_forward(_log_densities(y, mu, s2), P, p0)
        if fail >= 0 or not math.isfinite(ll):
            raise _Degenerate(f"filter failed at index {fail}")
        if trace and (ll - trace[-1]) < tol * abs(trace[-1]):
            trace.append(ll)
            break
        trace.append(ll)
        sm, joint = kernels.kim_smoother(filt, pred, P)
        w = sm.sum(axis=0)
        if np.any(w <= 1e-12):
            raise _Degenerate("empty regime")
        new_mu = sm.T @ y / w
        new_s2 = (sm * (y[:, None] - new_mu[None, :]) ** 2).sum(axis=0) / w
        if np.any(new_s2 < VARIANCE_FLOOR):
            raise _Degenerate("variance collapse")
        rows = joint.sum(axis=1)
        new_P = np.where(rows[:, None] > 0, joint / np.where(rows > 0, rows, 1.0)[:, None], P)
        mu, s2, P = new_mu, new_s2, new_P
        p0 = sm[0] / sm[0].sum()
    return _EMRun(mu, s2, P, p0, trace[-1], trace, len(trace))


def _initial_guess(y, k, rng, randomize):
    if randomize:
        levels = (np.arange(k) + rng.random(k)) / k
        diag = rng.uniform(0.7, 0.98, size=k)
    else:
        levels = (np.arange(k) + 0.5) / k
        diag = np.full(k, 0.9)
    mu = np.quantile(y, levels)
    s2 = np.full(k, np.var(y) / k)
    if k == 1:
        P = np.ones((1, 1))
    else:
        P = np.empty((k, k))
        for i in range(k):
            P[i] = (1.0 - diag[i]) / (k - 1)
            P[i, i] = diag[i]
    return mu, s2, P


def _finalize(y, k, mu, s2, P, diagnostics, n_obs, start=None):
    raw = MsModel(k, mu, s2, P, n_obs=n_obs, diagnostics=diagnostics)
    data = MonthlySeries(start, y) if start is not None else y
    filtered, ll = hamilton_filter(raw, data)
    aic = 2.0 * n_params(k) - 2.0 * ll
    bic = n_params(k) * math.log(n_obs) - 2.0 * ll
    model = MsModel(k, mu, s2, P, ll, aic, bic, filtered[-1] / filtered[-1].sum(), n_obs, diagnostics)
    return model.canonical()


def fit_markov_switching(data, k: int, seed: int = 0, n_restarts: int = N_RESTARTS,
                         max_iter: int = MAX_ITER, tol: float = REL_TOL) -> MsModel:
    """Maximum-likelihood fit by EM, best of ``n_restarts`` seeded starts.

    Runs whose variances collapse are abandoned and replaced by a fresh
    random start (at most ``3 * n_restarts`` attempts in total).
    """
    y = _values(data)
    start = data.start if isinstance(data, MonthlySeries) else None
    if k < 1:
        raise DomainError(f"regime count must be >= 1, got {k}")
    if y.size < 10 * k:
        raise DomainError(f"{y.size} observations is too few for {k} regimes (need {10 * k})")
    T = y.size
    if k == 1:
        mu, s2 = np.array([y.mean()]), np.array([np.var(y)])
        if s2[0] < VARIANCE_FLOOR:
            raise EstimationError("constant series: variance collapsed")
        return _finalize(y, 1, mu, s2, np.ones((1, 1)), {"restarts": 1, "em_trace": []}, T, start)

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), k]))
    runs, failures, attempts = [], [], 0
    while len(runs) < n_restarts and attempts < 3 * n_restarts:
        mu0, s20, P0 = _initial_guess(y, k, rng, randomize=attempts > 0)
        attempts += 1
        try:
            runs.append(em_run(y, mu0, s20, P0, max_iter=max_iter, tol=tol))
        except _Degenerate as exc:
            failures.append(str(exc))
    if not runs:
        raise EstimationError(f"all {attempts} EM starts for k={k} degenerated: {failures[:3]}")
    best = max(runs, key=lambda r: r.loglik)
    diag = {
        "restarts": len(runs),
        "failed_starts": len(failures),
        "em_loglik": float(best.loglik),
        "em_iterations": best.iterations,
        "em_trace": [float(v) for v in best.trace],
    }
    return _finalize(y, k, best.mu, best.sigma2, best.trans, diag, T, start)


def select_regimes(data, candidates=DEFAULT_REGIMES, seed: int = 0, **kwargs) -> MsModel:
    """Fit every candidate regime count; lowest AIC, BIC on disagreement."""
    candidates = sorted(set(int(c) for c in candidates))
    if not candidates:
        raise DomainError("no regime candidates")
    if any(c < 1 or c % 2 == 0 for c in candidates):
        raise DomainError(f"regime candidates must be odd: {candidates}")
    models = [fit_markov_switching(data, k, seed, **kwargs) for k in candidates]
    winner, diag = choose_by_criteria(models, label=lambda m: f"k={m.k}")
    return MsModel(winner.k, winner.mu, winner.sigma2, winner.trans, winner.loglik, winner.aic,
                   winner.bic, winner.filtered_final, winner.n_obs, {**winner.diagnostics, "selection": diag})


def simulate_regimes(model: MsModel, horizon: int, rng: np.random.Generator):
    """Future regimes and ONI values for ``horizon`` months.

    The current regime is drawn from ``model.filtered_final`` and the chain
    is advanced once per month. Randomness is one block of
    ``1 + 2 * horizon`` uniforms, so a shorter horizon yields a prefix of a
    longer one under the same generator state.
    """
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    u = rng.random(1 + 2 * horizon)
    state_u = np.concatenate(([u[0]], u[1::2]))
    z = ndtri(u[2::2] + 2.0 ** -54)
    cum_init = np.cumsum(model.filtered_final)
    cum_trans = np.cumsum(model.trans, axis=1)
    states = kernels.markov_states(cum_init, cum_trans, state_u)
    values = model.mu[states] + np.sqrt(model.sigma2[states]) * z
    return states, values


def simulate_oni(model: MsModel, horizon: int, rng: np.random.Generator,
                 start: MonthDate = MonthDate(1, 1)) -> MonthlySeries:
    _, values = simulate_regimes(model, horizon, rng)
    return MonthlySeries(start, values, label="simulated ONI")
