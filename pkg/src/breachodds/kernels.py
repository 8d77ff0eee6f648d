"""Backend selection for the hot loops.

The compiled ``_ckernels`` extension is used when it was built; otherwise,
or when the environment variable ``BREACHODDS_PURE_PYTHON`` is set to a
non-empty value, the NumPy fallback in ``_pykernels`` is used. ``BACKEND``
names the active choice.
"""
import os

from . import _pykernels

if os.environ.get("BREACHODDS_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

hamilton_forward = _impl.hamilton_forward
kim_smoother = _impl.kim_smoother
ar_forecast = _impl.ar_forecast
markov_states = _impl.markov_states

__all__ = ["BACKEND", "hamilton_forward", "kim_smoother", "ar_forecast", "markov_states"]
