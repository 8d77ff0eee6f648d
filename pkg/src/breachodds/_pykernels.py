"""NumPy reference implementations of the hot loops.

Same signatures and semantics as the compiled ``_ckernels`` module; used
when the extension is unavailable or ``BREACHODDS_PURE_PYTHON`` is set.
"""
import numpy as np


def hamilton_forward(logdens, trans, init):
    """Forward filter with per-step rescaling.

    Returns ``(filtered, predicted, loglik, fail)`` where ``fail`` is the
    first month at which the update has zero mass, or -1.
    """
    logdens = np.ascontiguousarray(logdens, dtype=np.float64)
    trans = np.ascontiguousarray(trans, dtype=np.float64)
    T, k = logdens.shape
    filtered = np.empty((T, k))
    predicted = np.empty((T, k))
    pred = np.asarray(init, dtype=np.float64)
    loglik = 0.0
    for t in range(T):
        if t:
            pred = filtered[t - 1] @ trans
        predicted[t] = pred
        lmax = logdens[t].max()
        if not np.isfinite(lmax):
            return filtered, predicted, loglik, t
        w = pred * np.exp(logdens[t] - lmax)
        c = w.sum()
        if not c > 0.0:
            return filtered, predicted, loglik, t
        filtered[t] = w / c
        loglik += np.log(c) + lmax
    return filtered, predicted, loglik, -1


def kim_smoother(filtered, predicted, trans):
    """Backward pass. Returns smoothed probabilities and summed joint
    probabilities ``sum_t Pr(s_t=i, s_{t+1}=j | data)``."""
    T, k = filtered.shape
    smoothed = np.empty((T, k))
    smoothed[T - 1] = filtered[T - 1]
    joint = np.zeros((k, k))
    for t in range(T - 2, -1, -1):
        p = predicted[t + 1]
        r = np.divide(smoothed[t + 1], p, out=np.zeros(k), where=p > 0)
        smoothed[t] = filtered[t] * (trans @ r)
        joint += filtered[t][:, None] * trans * r[None, :]
    return smoothed, joint


def ar_forecast(history, phi, innovations):
    """Iterate ``y = sum_j phi[j-1] * y[-j] + e`` over the innovations.

    ``history`` must hold exactly ``len(phi)`` past values, oldest first.
    """
    L = len(phi)
    H = len(innovations)
    buf = np.empty(L + H)
    buf[:L] = history
    phir = np.ascontiguousarray(np.asarray(phi, dtype=np.float64)[::-1])
    for h in range(H):
        buf[L + h] = phir @ buf[h:L + h] + innovations[h]
    return buf[L:].copy()


def markov_states(cum_init, cum_trans, uniforms):
    """Draw ``len(uniforms) - 1`` future states by inverse-CDF lookup.

    ``uniforms[0]`` picks the current state from ``cum_init``; each further
    uniform advances the chain by one step.
    """
    k = len(cum_init)
    s = min(int(np.searchsorted(cum_init, uniforms[0], side="right")), k - 1)
    out = np.empty(len(uniforms) - 1, dtype=np.int64)
    for h in range(1, len(uniforms)):
        s = min(int(np.searchsorted(cum_trans[s], uniforms[h], side="right")), k - 1)
        out[h - 1] = s
    return out
