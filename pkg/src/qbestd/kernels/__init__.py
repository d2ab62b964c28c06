"""Hot numeric kernels: Numba fast path with a pure-NumPy fallback.

Both backends expose the same two functions:

    scaled_distance_matrix(qs, ts) -> (|qs| x |ts|) Euclidean distances
        over rows already divided by the per-dimension standard deviation
    window_dtw_costs(dist, length, starts) -> per-window min-ratio DTW cost

Backend selection: the QBESTD_BACKEND environment variable ("numba" or
"numpy"; "auto"/unset picks numba when importable). The numpy fallback is
always available and produces the same results to floating-point tolerance.
"""

from __future__ import annotations

import os

from . import _numpy

_BACKENDS = {"numpy": _numpy}

try:
    from . import _numba
except ImportError:
    _numba = None
else:
    _BACKENDS["numba"] = _numba

DEFAULT_BACKEND = "numba" if "numba" in _BACKENDS else "numpy"

ENV_VAR = "QBESTD_BACKEND"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str | None = None):
    """Resolve a kernel backend module by name, env var, or default."""
    if name is None:
        name = os.environ.get(ENV_VAR, "").strip().lower() or "auto"
    if name == "auto":
        name = DEFAULT_BACKEND
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {available_backends()}"
        )
    return _BACKENDS[name]
